//! Expertise inference and interface-tier selection.
//!
//! The user's level is a hidden state of a four-state Markov chain. Each
//! completed step emits an observation made of a help flag and a completion
//! time bucket; the forward recursion keeps a running posterior over the
//! levels, and a hysteresis rule decides when the interface tier follows it.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const LEVELS: usize = 4;

/// Probability vector over [`Level`], indexed by `Level::index`.
pub type Distribution = [f64; LEVELS];

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    None,
    Basic,
    Advanced,
    Expert,
}

impl Level {
    pub const ALL: [Level; LEVELS] = [Level::None, Level::Basic, Level::Advanced, Level::Expert];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Level> {
        Level::ALL.get(i).copied()
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Level::None => "none",
            Level::Basic => "basic",
            Level::Advanced => "advanced",
            Level::Expert => "expert",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Level> {
        Level::ALL.into_iter().find(|l| l.keyword() == s)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.keyword())
    }
}

/// Presentation modality of step content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterfaceTier {
    Text,
    Visual,
    Ar,
    Video,
}

impl InterfaceTier {
    pub const ALL: [InterfaceTier; 4] = [
        InterfaceTier::Text,
        InterfaceTier::Visual,
        InterfaceTier::Ar,
        InterfaceTier::Video,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            InterfaceTier::Text => "text",
            InterfaceTier::Visual => "visual",
            InterfaceTier::Ar => "ar",
            InterfaceTier::Video => "video",
        }
    }

    pub fn from_keyword(s: &str) -> Option<InterfaceTier> {
        InterfaceTier::ALL.into_iter().find(|t| t.keyword() == s)
    }

    /// The level this tier is designed for.
    pub fn level(self) -> Level {
        match self {
            InterfaceTier::Text => Level::Expert,
            InterfaceTier::Visual => Level::Advanced,
            InterfaceTier::Ar => Level::Basic,
            InterfaceTier::Video => Level::None,
        }
    }

    /// One step along Text → Visual → Ar → Video, saturating at Video.
    pub fn more_supportive(self) -> InterfaceTier {
        match self {
            InterfaceTier::Text => InterfaceTier::Visual,
            InterfaceTier::Visual => InterfaceTier::Ar,
            InterfaceTier::Ar | InterfaceTier::Video => InterfaceTier::Video,
        }
    }
}

impl fmt::Display for InterfaceTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeBucket {
    Fast,
    Normal,
    Slow,
}

impl TimeBucket {
    pub const ALL: [TimeBucket; 3] = [TimeBucket::Fast, TimeBucket::Normal, TimeBucket::Slow];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn keyword(self) -> &'static str {
        match self {
            TimeBucket::Fast => "fast",
            TimeBucket::Normal => "normal",
            TimeBucket::Slow => "slow",
        }
    }
}

impl fmt::Display for TimeBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.keyword())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub leaf_id: String,
    pub help_requested: bool,
    pub time_bucket: TimeBucket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserModelConfig {
    pub prior: Distribution,
    /// Row-stochastic; `transition[from][to]`.
    pub transition: [Distribution; LEVELS],
    pub p_help: Distribution,
    /// Row-stochastic; `time_emission[level][bucket]`.
    pub time_emission: [[f64; 3]; LEVELS],
    pub fast_ratio: f64,
    pub slow_ratio: f64,
    pub switch_threshold: f64,
    pub switch_streak: u32,
}

impl Default for UserModelConfig {
    fn default() -> Self {
        UserModelConfig {
            prior: [0.25; LEVELS],
            transition: [
                [0.90, 0.10, 0.00, 0.00],
                [0.05, 0.90, 0.05, 0.00],
                [0.00, 0.05, 0.90, 0.05],
                [0.00, 0.00, 0.10, 0.90],
            ],
            p_help: [0.60, 0.35, 0.15, 0.05],
            time_emission: [
                [0.05, 0.40, 0.55],
                [0.15, 0.55, 0.30],
                [0.35, 0.50, 0.15],
                [0.60, 0.35, 0.05],
            ],
            fast_ratio: 0.75,
            slow_ratio: 1.5,
            switch_threshold: 0.7,
            switch_streak: 2,
        }
    }
}

/// A violated constraint in a [`UserModelConfig`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed user model config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid user model config: {}", .0.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<ConfigIssue>),
}

fn check_distribution(field: String, row: &[f64], issues: &mut Vec<ConfigIssue>) {
    if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
        issues.push(ConfigIssue {
            field,
            message: "entries must lie in [0, 1]".into(),
        });
        return;
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        issues.push(ConfigIssue {
            field,
            message: format!("must sum to 1 (sums to {sum})"),
        });
    }
}

impl UserModelConfig {
    pub fn validate(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        check_distribution("prior".into(), &self.prior, &mut issues);
        for (i, row) in self.transition.iter().enumerate() {
            check_distribution(format!("transition[{i}]"), row, &mut issues);
        }
        for (i, row) in self.time_emission.iter().enumerate() {
            check_distribution(format!("time_emission[{i}]"), row, &mut issues);
        }
        for (i, p) in self.p_help.iter().enumerate() {
            if !(*p > 0.0 && *p < 1.0) {
                issues.push(ConfigIssue {
                    field: format!("p_help[{i}]"),
                    message: format!("must lie strictly between 0 and 1, got {p}"),
                });
            }
        }
        if !(self.fast_ratio > 0.0 && self.fast_ratio < self.slow_ratio) {
            issues.push(ConfigIssue {
                field: "fast_ratio".into(),
                message: "need 0 < fast_ratio < slow_ratio".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.switch_threshold) {
            issues.push(ConfigIssue {
                field: "switch_threshold".into(),
                message: "must be a probability".into(),
            });
        }
        if self.switch_streak == 0 {
            issues.push(ConfigIssue {
                field: "switch_streak".into(),
                message: "must be at least 1".into(),
            });
        }
        issues
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: UserModelConfig = toml::from_str(s)?;
        let issues = cfg.validate();
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError::Invalid(issues))
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Likelihood of `(help, bucket)` under each level.
    pub fn emission(&self, help_requested: bool, bucket: TimeBucket) -> Distribution {
        let mut e = [0.0; LEVELS];
        for (l, slot) in e.iter_mut().enumerate() {
            let help = if help_requested {
                self.p_help[l]
            } else {
                1.0 - self.p_help[l]
            };
            *slot = help * self.time_emission[l][bucket.index()];
        }
        e
    }

    /// Prior for a user with a declared starting level: 0.55 on that level,
    /// the rest spread evenly.
    pub fn biased_prior(level: Level) -> Distribution {
        let mut p = [0.15; LEVELS];
        p[level.index()] = 0.55;
        p
    }
}

/// Discretizes a completion time against the step's nominal duration.
///
/// Ratios exactly equal to a threshold fall into `Normal`.
pub fn bucket_time(duration: f64, nominal: f64, cfg: &UserModelConfig) -> TimeBucket {
    let ratio = duration / nominal;
    if ratio < cfg.fast_ratio {
        TimeBucket::Fast
    } else if ratio > cfg.slow_ratio {
        TimeBucket::Slow
    } else {
        TimeBucket::Normal
    }
}

/// One forward-recursion step: predict through the transition matrix, weight
/// by the emission, renormalize. `None` when every term vanishes.
pub fn forward_step(
    posterior: &Distribution,
    emission: &Distribution,
    transition: &[Distribution; LEVELS],
) -> Option<Distribution> {
    let mut next = [0.0; LEVELS];
    for (to, slot) in next.iter_mut().enumerate() {
        let predicted: f64 = (0..LEVELS)
            .map(|from| posterior[from] * transition[from][to])
            .sum();
        *slot = predicted * emission[to];
    }
    let total: f64 = next.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return None;
    }
    next.iter_mut().for_each(|p| *p /= total);
    Some(next)
}

/// Most probable level; ties go to the lower (more supported) level.
pub fn classify(posterior: &Distribution) -> Level {
    let mut best = 0;
    for i in 1..LEVELS {
        if posterior[i] > posterior[best] {
            best = i;
        }
    }
    Level::ALL[best]
}

pub fn select_tier(level: Level) -> InterfaceTier {
    match level {
        Level::Expert => InterfaceTier::Text,
        Level::Advanced => InterfaceTier::Visual,
        Level::Basic => InterfaceTier::Ar,
        Level::None => InterfaceTier::Video,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UserModelError {
    #[error("observation for '{leaf}' has zero likelihood under every level; check the emission parameters")]
    DegenerateLikelihood { leaf: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub posterior: Distribution,
    pub current_tier: InterfaceTier,
    pub streak_level: Option<Level>,
    pub streak_count: u32,
    pub history: Vec<Observation>,
}

/// A tier switch made by [`UserState::maybe_switch_tier`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierSwitch {
    pub from: InterfaceTier,
    pub to: InterfaceTier,
}

impl UserState {
    /// Starts from `prior` with the tier of its most probable level.
    pub fn new(prior: Distribution) -> Self {
        UserState {
            posterior: prior,
            current_tier: select_tier(classify(&prior)),
            streak_level: None,
            streak_count: 0,
            history: Vec::new(),
        }
    }

    pub fn level(&self) -> Level {
        classify(&self.posterior)
    }

    /// Forward update of the posterior with one observation.
    ///
    /// On a degenerate likelihood the state is left untouched.
    pub fn observe(
        &mut self,
        obs: Observation,
        cfg: &UserModelConfig,
    ) -> Result<(), UserModelError> {
        let emission = cfg.emission(obs.help_requested, obs.time_bucket);
        let next = forward_step(&self.posterior, &emission, &cfg.transition).ok_or_else(|| {
            UserModelError::DegenerateLikelihood {
                leaf: obs.leaf_id.clone(),
            }
        })?;
        self.posterior = next;
        self.history.push(obs);
        Ok(())
    }

    /// Hysteresis rule: the tier follows the classified level only after the
    /// same level has led with at least `switch_threshold` mass for
    /// `switch_streak` consecutive calls.
    pub fn maybe_switch_tier(&mut self, cfg: &UserModelConfig) -> Option<TierSwitch> {
        let level = classify(&self.posterior);
        let peak = self.posterior[level.index()];
        if level == self.current_tier.level() || peak < cfg.switch_threshold {
            self.streak_level = None;
            self.streak_count = 0;
            return None;
        }
        if self.streak_level == Some(level) {
            self.streak_count += 1;
        } else {
            self.streak_level = Some(level);
            self.streak_count = 1;
        }
        if self.streak_count < cfg.switch_streak {
            return None;
        }
        let switch = TierSwitch {
            from: self.current_tier,
            to: select_tier(level),
        };
        self.current_tier = switch.to;
        self.streak_level = None;
        self.streak_count = 0;
        Some(switch)
    }

    /// `observe` followed by `maybe_switch_tier`.
    pub fn update(
        &mut self,
        obs: Observation,
        cfg: &UserModelConfig,
    ) -> Result<Option<TierSwitch>, UserModelError> {
        self.observe(obs, cfg)?;
        Ok(self.maybe_switch_tier(cfg))
    }
}
