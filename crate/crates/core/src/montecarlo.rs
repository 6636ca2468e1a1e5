//! Gillespie simulation of the process.
//!
//! Trial `i` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `i`, so
//! estimates do not depend on how trials are scheduled across threads.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::qcore::{stacks_of_ordered, ModelError, RateProfile, StateVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("dimension mismatch: initial state has {from} particles, target has {to}")]
    DimensionMismatch { from: usize, to: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub initial: StateVector,
    pub t: f64,
    pub trials: u64,
    pub seed: u64,
    pub profile: RateProfile,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.initial.require_ordered()?;
        if self.trials == 0 {
            return Err(SimError::NoTrials);
        }
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(SimError::NegativeTime(self.t));
        }
        Ok(())
    }

    /// Generator for trial `trial`.
    pub fn stream(&self, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(trial);
        rng
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub target: Vec<i64>,
    pub p_hat: f64,
    /// `sqrt(p_hat (1 - p_hat) / trials)`.
    pub stderr: f64,
    pub trials: u64,
    pub hits: u64,
}

impl Estimate {
    fn from_hits(target: &StateVector, hits: u64, trials: u64) -> Self {
        let p_hat = hits as f64 / trials as f64;
        Self {
            target: target.coords().to_vec(),
            p_hat,
            stderr: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
            trials,
            hits,
        }
    }
}

/// Runs one trajectory up to time `t` and returns the final state.
pub fn simulate_one<R: Rng>(y: &StateVector, t: f64, profile: &RateProfile, rng: &mut R) -> StateVector {
    let q = profile.q().value();
    let mut x = y.coords().to_vec();
    let mut rates = Vec::with_capacity(x.len());
    let mut clock = 0.0;
    loop {
        let dec = stacks_of_ordered(&x);
        rates.clear();
        rates.extend(
            dec.entries()
                .iter()
                .map(|s| profile.a(s.site) * (1.0 - q.powi(s.height as i32))),
        );
        let total: f64 = rates.iter().sum();
        let dt: f64 = rng.sample::<f64, _>(Exp1) / total;
        clock += dt;
        if clock > t {
            break;
        }
        let mut u = rng.gen::<f64>() * total;
        let mut chosen = rates.len() - 1;
        for (i, &r) in rates.iter().enumerate() {
            if u < r {
                chosen = i;
                break;
            }
            u -= r;
        }
        x[dec.top_index(chosen)] += 1;
        debug_assert!(x.windows(2).all(|w| w[0] >= w[1]), "order broken: {x:?}");
    }
    StateVector::relaxed(x)
}

/// Hit frequencies of `targets` over `config.trials` independent runs.
pub fn estimate_prob(config: &SimConfig, targets: &[StateVector]) -> Result<Vec<Estimate>, SimError> {
    config.validate()?;
    for x in targets {
        x.require_ordered()?;
        if x.len() != config.initial.len() {
            return Err(SimError::DimensionMismatch {
                from: config.initial.len(),
                to: x.len(),
            });
        }
    }
    let counts = (0..config.trials)
        .into_par_iter()
        .fold(
            || vec![0u64; targets.len()],
            |mut acc, trial| {
                let end = simulate_one(&config.initial, config.t, &config.profile, &mut config.stream(trial));
                if let Some(i) = targets.iter().position(|x| x.coords() == end.coords()) {
                    acc[i] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; targets.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(targets
        .iter()
        .zip(counts)
        .map(|(x, hits)| Estimate::from_hits(x, hits, config.trials))
        .collect())
}

/// Counts of every final state reached, in descending lexicographic order.
pub fn sample_states(config: &SimConfig) -> Result<Vec<(StateVector, u64)>, SimError> {
    config.validate()?;
    let counts = (0..config.trials)
        .into_par_iter()
        .fold(BTreeMap::new, |mut acc, trial| {
            let end = simulate_one(&config.initial, config.t, &config.profile, &mut config.stream(trial));
            *acc.entry(end.coords().to_vec()).or_insert(0u64) += 1;
            acc
        })
        .reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    Ok(counts
        .into_iter()
        .rev()
        .map(|(x, c)| (StateVector::new(x).expect("simulation preserves order"), c))
        .collect())
}
