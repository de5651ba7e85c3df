//! Exhaustive hidden-path oracle for the expertise HMM.

use std::time::{Duration, Instant};

use emaint::user_model::{Observation, TimeBucket, UserModelConfig, UserState};

/// Every emission-distinct observation: (help requested, time bucket).
pub const SYMBOLS: [(bool, TimeBucket); 6] = [
    (false, TimeBucket::Fast),
    (false, TimeBucket::Normal),
    (false, TimeBucket::Slow),
    (true, TimeBucket::Fast),
    (true, TimeBucket::Normal),
    (true, TimeBucket::Slow),
];

/// Leaves of the fixed model the sequences run over, in procedure order.
pub const LEAVES: [&str; 3] = ["a", "b", "c"];

fn emission(cfg: &UserModelConfig, help: bool, bucket: TimeBucket, level: usize) -> f64 {
    let b = match bucket {
        TimeBucket::Fast => 0,
        TimeBucket::Normal => 1,
        TimeBucket::Slow => 2,
    };
    let h = if help {
        cfg.p_help[level]
    } else {
        1.0 - cfg.p_help[level]
    };
    h * cfg.time_emission[level][b]
}

/// Posterior over the last hidden level from explicit path weights; path
/// `p` ends in level `p % 4`.
fn marginal(paths: &[f64]) -> [f64; 4] {
    let mut m = [0.0; 4];
    for (p, w) in paths.iter().enumerate() {
        m[p % 4] += w;
    }
    let z: f64 = m.iter().sum();
    m.map(|x| x / z)
}

#[derive(Debug, Default)]
pub struct HmmCheck {
    /// Every sequence of length `1..=complete_len` was compared.
    pub complete_len: usize,
    pub sequences: u64,
    pub worst: f64,
    pub first_mismatch: Option<String>,
}

struct Walk<'a> {
    cfg: &'a UserModelConfig,
    /// `step[s][i][j]`: transition i to j times the emission of symbol s at j.
    step: [[[f64; 4]; 4]; 6],
    tol: f64,
    deadline: Instant,
    aborted: bool,
    sequences: u64,
    worst: f64,
    first_mismatch: Option<String>,
    trace: Vec<usize>,
}

impl Walk<'_> {
    /// `paths[p]` is the joint weight of hidden path `p` (levels h0..hk in
    /// base 4, hk least significant) and the observations so far.
    fn visit(&mut self, paths: &[f64], state: &UserState, remaining: usize) {
        if remaining == 0 || self.aborted {
            return;
        }
        if Instant::now() > self.deadline {
            self.aborted = true;
            return;
        }
        for (si, &(help, bucket)) in SYMBOLS.iter().enumerate() {
            let m = &self.step[si];
            let mut next = Vec::with_capacity(paths.len() * 4);
            for (p, w) in paths.iter().enumerate() {
                let row = &m[p % 4];
                next.extend_from_slice(&[w * row[0], w * row[1], w * row[2], w * row[3]]);
            }
            let mut forward = state.clone();
            let leaf = LEAVES[self.trace.len() % LEAVES.len()];
            forward
                .observe(
                    Observation {
                        leaf_id: leaf.to_string(),
                        help_requested: help,
                        time_bucket: bucket,
                    },
                    self.cfg,
                )
                .expect("emissions are positive");
            self.trace.push(si);
            let exact = marginal(&next);
            let err = exact
                .iter()
                .zip(forward.posterior)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            self.sequences += 1;
            self.worst = self.worst.max(err);
            if err > self.tol && self.first_mismatch.is_none() {
                self.first_mismatch = Some(format!(
                    "sequence {:?}: exhaustive {exact:?} vs forward {:?}",
                    self.trace, forward.posterior
                ));
            }
            self.visit(&next, &forward, remaining - 1);
            self.trace.pop();
        }
    }
}

/// Compares the forward posterior with the exhaustive path sum for every
/// sequence up to `max_len`, deepening one length at a time until done or
/// `budget` runs out.
pub fn check_sequences(
    cfg: &UserModelConfig,
    max_len: usize,
    tol: f64,
    budget: Duration,
) -> HmmCheck {
    let deadline = Instant::now() + budget;
    let mut step = [[[0.0; 4]; 4]; 6];
    for (m, &(help, bucket)) in step.iter_mut().zip(SYMBOLS.iter()) {
        for (row, trans) in m.iter_mut().zip(cfg.transition) {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = trans[j] * emission(cfg, help, bucket, j);
            }
        }
    }
    let mut result = HmmCheck::default();
    for len in 1..=max_len {
        let mut walk = Walk {
            cfg,
            step,
            tol,
            deadline,
            aborted: false,
            sequences: 0,
            worst: 0.0,
            first_mismatch: None,
            trace: Vec::new(),
        };
        // h0 comes from the prior and carries no observation
        walk.visit(&cfg.prior, &UserState::new(cfg.prior), len);
        result.worst = result.worst.max(walk.worst);
        if result.first_mismatch.is_none() {
            result.first_mismatch = walk.first_mismatch;
        }
        if walk.aborted {
            break;
        }
        result.complete_len = len;
        result.sequences = walk.sequences;
    }
    result
}

/// Sequences of length `1..=n` over [`SYMBOLS`].
pub fn sequence_count(n: usize) -> u64 {
    (1..=n as u32).map(|k| 6u64.pow(k)).sum()
}

/// Posterior over the last level for one sequence, summing the joint
/// weight of every hidden path `h0..hn` explicitly.
pub fn exhaustive_posterior(cfg: &UserModelConfig, seq: &[(bool, TimeBucket)]) -> [f64; 4] {
    let n = seq.len();
    let mut m = [0.0; 4];
    for code in 0..4usize.pow(n as u32 + 1) {
        let path: Vec<usize> = (0..=n)
            .map(|k| code / 4usize.pow((n - k) as u32) % 4)
            .collect();
        let mut w = cfg.prior[path[0]];
        for (k, &(help, bucket)) in seq.iter().enumerate() {
            w *= cfg.transition[path[k]][path[k + 1]] * emission(cfg, help, bucket, path[k + 1]);
        }
        m[path[n]] += w;
    }
    let z: f64 = m.iter().sum();
    m.map(|x| x / z)
}
