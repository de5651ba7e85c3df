//! Simulated technician of a known expertise level, for exercising the
//! adaptation loop.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::session::{Command, LoadedModel, Session, SessionEvent};
use crate::automaton::Action;
use crate::clock::Timestamp;
use crate::maintenance_model::{Role, UserRecord};
use crate::user_model::{
    bucket_time, classify, Distribution, InterfaceTier, Level, TimeBucket, UserModelConfig,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStep {
    /// 1-based action count.
    pub t: usize,
    pub action: Action,
    pub help: bool,
    pub bucket: Option<TimeBucket>,
    pub duration: Option<u32>,
    pub posterior: Distribution,
    pub tier: InterfaceTier,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Simulation {
    pub true_level: Level,
    pub seed: u64,
    pub prior: Distribution,
    pub steps: Vec<SimStep>,
    pub events: Vec<SessionEvent>,
    pub final_posterior: Distribution,
    pub final_level: Level,
    pub final_tier: InterfaceTier,
    pub tier_changes: usize,
}

fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// A whole-second duration that `bucket_time` puts in `bucket`.
fn duration_in(
    rng: &mut ChaCha8Rng,
    bucket: TimeBucket,
    nominal: u32,
    cfg: &UserModelConfig,
) -> u32 {
    let cap = (2.0 * cfg.slow_ratio * nominal as f64).ceil() as u32 + 1;
    let fits: Vec<u32> = (0..=cap)
        .filter(|d| bucket_time(*d as f64, nominal as f64, cfg) == bucket)
        .collect();
    assert!(
        !fits.is_empty(),
        "no whole-second duration lands in {bucket}"
    );
    fits[rng.random_range(0..fits.len())]
}

/// Drives an in-memory session: actions drawn by automaton probability,
/// help by `p_help[true_level]`, time bucket by `time_emission[true_level]`.
/// The procedure starts over whenever it completes, until `max_steps`
/// actions have been taken.
pub fn simulate_user(
    ctx: &LoadedModel,
    true_level: Level,
    seed: u64,
    max_steps: usize,
) -> Simulation {
    let cfg = &ctx.model.user_config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let user = UserRecord {
        id: "sim".into(),
        name: format!("simulated {true_level}"),
        role: Role::Technician,
        initial_level: None,
    };
    let mut now = Timestamp(0);
    let (mut s, mut events) = Session::create_for(ctx, "sim", user, None, now);
    let prior = s.user_state.posterior;
    let mut steps = Vec::with_capacity(max_steps);
    let lvl = true_level.index();
    for t in 1..=max_steps {
        if ctx.pdfa.is_accepting(s.state).unwrap_or(false) {
            events.extend(s.restart(ctx, now));
        }
        let enabled = ctx.pdfa.enabled(s.state).expect("valid state");
        let weights: Vec<f64> = enabled.iter().map(|(_, p)| *p).collect();
        let action = enabled[pick(&mut rng, &weights)].0.clone();
        let (help, bucket, duration) = match &action {
            Action::Complete(leaf) => {
                let help = rng.random::<f64>() < cfg.p_help[lvl];
                let bucket = TimeBucket::ALL[pick(&mut rng, &cfg.time_emission[lvl])];
                let nominal = ctx
                    .model
                    .task_model
                    .leaf(leaf)
                    .map_or(1, |l| l.nominal_duration);
                let duration = duration_in(&mut rng, bucket, nominal, cfg);
                if help {
                    let cmd = Command::Help { leaf: leaf.clone() };
                    events.extend(s.apply(ctx, &cmd, now).expect("enabled leaf"));
                }
                now = Timestamp(now.0 + u64::from(duration) * 1000);
                let cmd = Command::Complete {
                    leaf: leaf.clone(),
                    duration,
                };
                events.extend(s.apply(ctx, &cmd, now).expect("enabled leaf"));
                (help, Some(bucket), Some(duration))
            }
            Action::Skip(target) => {
                let cmd = Command::Skip {
                    target: target.clone(),
                };
                events.extend(s.apply(ctx, &cmd, now).expect("enabled skip"));
                (false, None, None)
            }
            Action::ExitLoop(target) => {
                let cmd = Command::ExitLoop {
                    target: target.clone(),
                };
                events.extend(s.apply(ctx, &cmd, now).expect("enabled exit"));
                (false, None, None)
            }
            Action::RequestHelp => unreachable!("help is not a transition"),
        };
        steps.push(SimStep {
            t,
            action,
            help,
            bucket,
            duration,
            posterior: s.user_state.posterior,
            tier: s.user_state.current_tier,
        });
    }
    let tier_changes = events
        .iter()
        .filter(|e| matches!(e, SessionEvent::TierChanged { .. }))
        .count();
    Simulation {
        true_level,
        seed,
        prior,
        final_posterior: s.user_state.posterior,
        final_level: classify(&s.user_state.posterior),
        final_tier: s.user_state.current_tier,
        steps,
        events,
        tier_changes,
    }
}

pub(crate) fn fmt_posterior(p: &Distribution) -> String {
    let parts: Vec<String> = p.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(","))
}

impl Simulation {
    /// Trace lines plus a summary, as printed by the command line tool.
    pub fn render(&self) -> String {
        let mut out = String::new();
        writeln!(out, "prior={}", fmt_posterior(&self.prior)).unwrap();
        for st in &self.steps {
            writeln!(
                out,
                "t={} action={} help={} bucket={} posterior={}",
                st.t,
                st.action,
                u8::from(st.help),
                st.bucket.map_or("-", |b| b.keyword()),
                fmt_posterior(&st.posterior)
            )
            .unwrap();
        }
        writeln!(
            out,
            "final level={} tier={} posterior={} switches={}",
            self.final_level,
            self.final_tier,
            fmt_posterior(&self.final_posterior),
            self.tier_changes
        )
        .unwrap();
        out
    }
}
