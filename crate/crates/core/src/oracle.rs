//! Master-equation referee on a truncated window.
//!
//! States are all weakly decreasing `X` with `y_k <= x_k <= ceiling`.
//! Jumps off the ceiling are absorbed into a leak counter. Particles only
//! move right, so a path ending inside the window never left it and
//! in-window masses carry no truncation error; the leak bounds what is missing.

use std::collections::HashMap;

use rayon::prelude::*;
use statrs::distribution::{DiscreteCDF, Poisson};
use thiserror::Error;

use crate::qcore::{stacks_of_ordered, ModelError, RateProfile, StateVector};

/// Largest window the oracle will enumerate.
pub const STATE_CAP: usize = 2_000_000;

/// Poisson tail at which the uniformization series stops.
pub const SERIES_TAIL: f64 = 1e-14;

/// Largest `Lambda t` handled in one uniformization pass.
const CHUNK_LAMBDA_T: f64 = 30.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("window would hold {count} states, above the cap of {cap}")]
    StateCap { count: u128, cap: usize },
    #[error("dimension mismatch: initial state has {from} particles, target has {to}")]
    DimensionMismatch { from: usize, to: usize },
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error("eps must be positive, got {0}")]
    InvalidEps(f64),
}

/// Ordered states between a floor `Y` and a common ceiling.
#[derive(Debug, Clone)]
pub struct StateWindow {
    floor: Vec<i64>,
    ceiling: i64,
    states: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
}

impl StateWindow {
    /// Enumerates in lexicographically descending order.
    pub fn new(floor: &StateVector, ceiling: i64) -> Result<Self, OracleError> {
        floor.require_ordered()?;
        let y = floor.coords().to_vec();
        let count = count_states(&y, ceiling);
        if count > STATE_CAP as u128 {
            return Err(OracleError::StateCap {
                count,
                cap: STATE_CAP,
            });
        }
        let mut states = Vec::with_capacity(count as usize);
        let mut cur = vec![0; y.len()];
        enumerate(&y, ceiling, 0, ceiling, &mut cur, &mut states);
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Self {
            floor: y,
            ceiling,
            states,
            index,
        })
    }

    pub fn floor(&self) -> &[i64] {
        &self.floor
    }

    pub fn ceiling(&self) -> i64 {
        self.ceiling
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<i64>] {
        &self.states
    }

    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        self.index.get(x).copied()
    }
}

fn enumerate(
    y: &[i64],
    ceiling: i64,
    k: usize,
    upper: i64,
    cur: &mut Vec<i64>,
    out: &mut Vec<Vec<i64>>,
) {
    if k == y.len() {
        out.push(cur.clone());
        return;
    }
    let mut v = upper.min(ceiling);
    while v >= y[k] {
        cur[k] = v;
        enumerate(y, ceiling, k + 1, v, cur, out);
        v -= 1;
    }
}

/// Number of window states, by dynamic programming over coordinates.
pub fn count_states(y: &[i64], ceiling: i64) -> u128 {
    let Some(&lowest) = y.last() else {
        return 1;
    };
    if y.iter().any(|&v| v > ceiling) {
        return 0;
    }
    let span = (ceiling - lowest + 1) as usize;
    // ways[v]: completions of the remaining coordinates given the previous one equals lowest + v
    let mut ways = vec![1u128; span];
    for &yk in y.iter().rev() {
        let mut next = vec![0u128; span];
        let mut acc = 0u128;
        for v in 0..span {
            let site = lowest + v as i64;
            if site >= yk {
                acc += ways[v];
            }
            next[v] = acc;
        }
        ways = next;
    }
    ways[span - 1]
}

/// Sparse generator of the truncated chain.
#[derive(Debug, Clone)]
pub struct Generator {
    outgoing: Vec<Vec<(usize, f64)>>,
    incoming: Vec<Vec<(usize, f64)>>,
    exit: Vec<f64>,
    leak: Vec<f64>,
    lambda: f64,
}

impl Generator {
    pub fn len(&self) -> usize {
        self.exit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exit.is_empty()
    }

    /// Off-diagonal rates out of state `i`.
    pub fn outgoing(&self, i: usize) -> &[(usize, f64)] {
        &self.outgoing[i]
    }

    /// Total exit rate of state `i`, including the leak.
    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    /// Rate at which state `i` jumps past the ceiling.
    pub fn leak_rate(&self, i: usize) -> f64 {
        self.leak[i]
    }

    /// Uniformization constant: the largest exit rate.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `sum_j H_ij` with the leak counted as an in-window target; zero by construction.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.outgoing[i].iter().map(|&(_, r)| r).sum::<f64>() + self.leak[i] - self.exit[i]
    }
}

pub fn build_generator(window: &StateWindow, profile: &RateProfile) -> Generator {
    let q = profile.q().value();
    let n = window.len();
    let mut outgoing = vec![Vec::new(); n];
    let mut incoming = vec![Vec::new(); n];
    let mut exit = vec![0.0; n];
    let mut leak = vec![0.0; n];
    let mut target = Vec::new();
    for (i, x) in window.states.iter().enumerate() {
        let dec = stacks_of_ordered(x);
        for (s, stack) in dec.entries().iter().enumerate() {
            let rate = profile.a(stack.site) * (1.0 - q.powi(stack.height as i32));
            exit[i] += rate;
            if stack.site == window.ceiling {
                leak[i] += rate;
                continue;
            }
            target.clear();
            target.extend_from_slice(x);
            target[dec.top_index(s)] += 1;
            let j = window
                .index_of(&target)
                .expect("in-window jump target is enumerated");
            outgoing[i].push((j, rate));
            incoming[j].push((i, rate));
        }
    }
    let lambda = exit.iter().copied().fold(0.0, f64::max);
    Generator {
        outgoing,
        incoming,
        exit,
        leak,
        lambda,
    }
}

/// Masses on a window plus the mass absorbed past its ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub mass: Vec<f64>,
    pub leak: f64,
}

impl Distribution {
    pub fn point(len: usize, at: usize) -> Self {
        let mut mass = vec![0.0; len];
        mass[at] = 1.0;
        Self { mass, leak: 0.0 }
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum::<f64>() + self.leak
    }

    /// `sum |p_i - q_i|` over the window plus the leak difference.
    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            + (self.leak - other.leak).abs()
    }
}

/// One uniformized step `p S` together with the mass newly leaked.
fn step(gen: &Generator, p: &[f64], out: &mut [f64]) -> f64 {
    let inv = 1.0 / gen.lambda;
    out.par_iter_mut().enumerate().for_each(|(j, o)| {
        let mut acc = p[j] * (1.0 - gen.exit[j] * inv);
        for &(i, r) in &gen.incoming[j] {
            acc += p[i] * r * inv;
        }
        *o = acc;
    });
    p.iter().zip(&gen.leak).map(|(m, l)| m * l * inv).sum()
}

fn evolve_chunk(gen: &Generator, initial: &Distribution, dt: f64) -> Distribution {
    let lt = gen.lambda * dt;
    let mut weight = (-lt).exp();
    let mut cumulative = weight;
    let mut cur = initial.mass.clone();
    let mut next = vec![0.0; cur.len()];
    let mut leaked = initial.leak;
    let mut mass: Vec<f64> = cur.iter().map(|m| weight * m).collect();
    let mut leak = weight * leaked;
    let mut m = 0u64;
    while 1.0 - cumulative > SERIES_TAIL {
        m += 1;
        leaked += step(gen, &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        weight *= lt / m as f64;
        cumulative += weight;
        for (acc, c) in mass.iter_mut().zip(&cur) {
            *acc += weight * c;
        }
        leak += weight * leaked;
        if weight == 0.0 && m as f64 > lt {
            break;
        }
    }
    Distribution { mass, leak }
}

/// `P(t) = sum_m e^{-Lambda t} (Lambda t)^m / m! P(0) S^m` with `S = I + H / Lambda`.
///
/// Long horizons are split so each pass has `Lambda dt <= 30`.
pub fn evolve(gen: &Generator, initial: &Distribution, t: f64) -> Distribution {
    assert!(t >= 0.0, "negative time {t}");
    assert_eq!(initial.mass.len(), gen.len());
    if t == 0.0 || gen.lambda == 0.0 {
        return initial.clone();
    }
    let chunks = (gen.lambda * t / CHUNK_LAMBDA_T).ceil().max(1.0) as usize;
    let dt = t / chunks as f64;
    (0..chunks).fold(initial.clone(), |d, _| evolve_chunk(gen, &d, dt))
}

/// `P(N >= k)` for `N ~ Poisson(lambda)`.
pub fn poisson_tail(lambda: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if lambda == 0.0 {
        return 0.0;
    }
    Poisson::new(lambda).expect("positive mean").sf(k - 1)
}

/// Smallest `K` with `P(Poisson(n a_max t) >= K) < eps`.
///
/// The total jump rate never exceeds `n a_max`, so fewer than `K` jumps
/// happen by time `t` except on an event of probability below `eps`.
pub fn window_bound(n: usize, t: f64, profile: &RateProfile, eps: f64) -> u64 {
    assert!(eps > 0.0, "eps must be positive");
    let lambda = n as f64 * profile.max_a() * t;
    let mut lo = 0u64;
    let mut hi = 1u64;
    while poisson_tail(lambda, hi) >= eps {
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if poisson_tail(lambda, mid) < eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    if poisson_tail(lambda, lo) < eps {
        lo
    } else {
        hi
    }
}

/// A solved window.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub window: StateWindow,
    pub distribution: Distribution,
}

impl OracleRun {
    /// Mass at `x`; zero outside the window.
    pub fn prob(&self, x: &[i64]) -> f64 {
        self.window
            .index_of(x)
            .map_or(0.0, |i| self.distribution.mass[i])
    }

    /// `(state, mass)` pairs in window order.
    pub fn iter(&self) -> impl Iterator<Item = (&[i64], f64)> {
        self.window
            .states()
            .iter()
            .map(Vec::as_slice)
            .zip(self.distribution.mass.iter().copied())
    }
}

fn validate(y: &StateVector, t: f64, eps: f64) -> Result<(), OracleError> {
    y.require_ordered()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(OracleError::NegativeTime(t));
    }
    if !(eps > 0.0) {
        return Err(OracleError::InvalidEps(eps));
    }
    Ok(())
}

/// Evolves the point mass at `y` on the window with ceiling
/// `max(max(Y) + K, extra_ceiling)`, `K` from [`window_bound`].
pub fn oracle_distribution(
    y: &StateVector,
    t: f64,
    profile: &RateProfile,
    eps: f64,
    extra_ceiling: Option<i64>,
) -> Result<OracleRun, OracleError> {
    validate(y, t, eps)?;
    let k = window_bound(y.len(), t, profile, eps) as i64;
    let ceiling = (y.max_site() + k).max(extra_ceiling.unwrap_or(i64::MIN));
    let window = StateWindow::new(y, ceiling)?;
    let gen = build_generator(&window, profile);
    let start = window.index_of(y.coords()).expect("floor is a window state");
    let distribution = evolve(&gen, &Distribution::point(window.len(), start), t);
    Ok(OracleRun {
        window,
        distribution,
    })
}

/// `P_Y(X; t)` from the master equation.
pub fn oracle_prob(
    y: &StateVector,
    x: &StateVector,
    t: f64,
    profile: &RateProfile,
    eps: f64,
) -> Result<f64, OracleError> {
    x.require_ordered()?;
    if x.len() != y.len() {
        return Err(OracleError::DimensionMismatch {
            from: y.len(),
            to: x.len(),
        });
    }
    validate(y, t, eps)?;
    if x.coords().iter().zip(y.coords()).any(|(a, b)| a < b) {
        return Ok(0.0);
    }
    Ok(oracle_distribution(y, t, profile, eps, Some(x.max_site()))?.prob(x.coords()))
}
