//! Seeded verification panels shared by the `verify` command, the examples
//! and the acceptance tests.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bethe::{c_function, is_well_separated, perm_sum_identity_residual};
use crate::oracle::{oracle_prob, OracleError};
use crate::qcore::{QParams, RateProfile, StateVector};
use crate::transition::{
    boundary_residual, free_evolution_residual, transition_probability, ContourOptions,
    TransitionError, TransitionRequest,
};

/// Oracle window tolerance used by the panels.
pub const ORACLE_EPS: f64 = 1e-12;

pub const Q_CHOICES: [f64; 3] = [0.3, 0.5, 0.7];

/// One checked quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(suite: &str, name: String, value: f64, tolerance: f64) -> Self {
        Self {
            suite: suite.to_string(),
            name,
            value,
            tolerance,
            passed: value < tolerance,
        }
    }

    fn failed(suite: &str, name: String, tolerance: f64) -> Self {
        Self {
            suite: suite.to_string(),
            name,
            value: f64::INFINITY,
            tolerance,
            passed: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn max_value(&self) -> f64 {
        self.checks.iter().map(|c| c.value).fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn extend(&mut self, other: SuiteReport) {
        self.checks.extend(other.checks);
    }
}

/// A random transition problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub from: StateVector,
    pub to: StateVector,
    pub t: f64,
    pub profile: RateProfile,
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `q` from [`Q_CHOICES`] and every `a_i` on `lo..=hi` (and the default) uniform in `[0.5, 2]`.
pub fn random_profile<R: Rng>(rng: &mut R, lo: i64, hi: i64) -> RateProfile {
    let q = QParams::new(*Q_CHOICES.choose(rng).expect("nonempty")).expect("valid q");
    let default_a = rng.gen_range(0.5..2.0);
    let overrides: Vec<(i64, f64)> = (lo..=hi).map(|s| (s, rng.gen_range(0.5..2.0))).collect();
    RateProfile::new(q, default_a, overrides).expect("valid rates")
}

/// Weakly decreasing vector with entries in `lo..=hi`.
pub fn random_state<R: Rng>(rng: &mut R, n: usize, lo: i64, hi: i64) -> StateVector {
    let mut v: Vec<i64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    v.sort_unstable_by(|a, b| b.cmp(a));
    StateVector::new(v).expect("sorted")
}

/// A reachable target: `Y` pushed right by up to `max_step` per particle, order restored.
pub fn random_target<R: Rng>(rng: &mut R, y: &StateVector, max_step: i64) -> StateVector {
    let mut x: Vec<i64> = y.coords().to_vec();
    // move particles from the front so the result stays weakly decreasing
    for k in 0..x.len() {
        let cap = if k == 0 { i64::MAX } else { x[k - 1] };
        let step = rng.gen_range(0..=max_step);
        x[k] = (x[k] + step).min(cap).max(y.coords()[k]);
    }
    StateVector::new(x).expect("ordered by construction")
}

/// Random case with `Y` in `[0, 2]`, displacement up to 2 per particle and `t` in `[0, 2]`.
pub fn random_case<R: Rng>(rng: &mut R, n: usize) -> Case {
    let from = random_state(rng, n, 0, 2);
    let to = random_target(rng, &from, 2);
    let t = rng.gen_range(0.0..2.0);
    let profile = random_profile(rng, -1, to.max_site() + 1);
    Case { from, to, t, profile }
}

/// Point on the annulus `0.5 <= |w| <= 2` with `{w_i} ∪ {q w_j}` separated by more than `0.02 max|w|`.
///
/// Feasible for `q <= 0.8`, where `|w - q w| >= 0.1`.
pub fn random_separated_point<R: Rng>(rng: &mut R, n: usize, q: QParams) -> Vec<Complex64> {
    assert!(q.value() <= 0.8, "separation threshold is unreachable for q = {}", q.value());
    loop {
        let w: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..TAU)))
            .collect();
        if is_well_separated(&w, q) && min_gap(&w, q) > 0.02 * max_norm(&w) {
            return w;
        }
    }
}

fn max_norm(w: &[Complex64]) -> f64 {
    w.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn min_gap(w: &[Complex64], q: QParams) -> f64 {
    let pts: Vec<Complex64> = w.iter().copied().chain(w.iter().map(|z| q.value() * z)).collect();
    let mut gap = f64::INFINITY;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            gap = gap.min((pts[i] - pts[j]).norm());
        }
    }
    gap
}

/// Permutation-sum and C-function identities on `points` random points for each `n` up to `n_max`.
pub fn identities_suite(n_max: usize, points: usize, seed: u64) -> SuiteReport {
    const TOL: f64 = 1e-10;
    let mut rng = rng(seed);
    let mut report = SuiteReport::default();
    for n in 1..=n_max {
        let mut worst_perm = 0.0f64;
        let mut worst_c = 0.0f64;
        let mut failures = 0usize;
        for _ in 0..points {
            let q = QParams::new(rng.gen_range(0.1..0.8)).expect("valid q");
            let w = random_separated_point(&mut rng, n, q);
            match (perm_sum_identity_residual(&w, q), c_function(&w, q)) {
                (Ok(r), Ok(c)) => {
                    let want = (1.0 - q.value().powi(n as i32)) / (1.0 - q.value());
                    worst_perm = worst_perm.max(r.norm());
                    worst_c = worst_c.max((c - want).norm());
                }
                _ => failures += 1,
            }
        }
        if failures > 0 {
            report.checks.push(Check::failed("identities", format!("n={n} pole hits"), TOL));
        }
        report
            .checks
            .push(Check::new("identities", format!("n={n} permutation sum"), worst_perm, TOL));
        report
            .checks
            .push(Check::new("identities", format!("n={n} C-function"), worst_c, TOL));
    }
    report
}

/// Residual tolerance by particle number, relative to `max(1, largest term)`.
pub fn residual_tolerance(n: usize) -> f64 {
    match n {
        1 => 1e-9,
        2 => 1e-7,
        _ => 1e-6,
    }
}

/// Free-evolution and boundary residuals on `cases` random configurations per `n`.
pub fn residuals_suite(n_max: usize, cases: usize, seed: u64, contour: &ContourOptions) -> SuiteReport {
    let mut rng = rng(seed);
    let mut report = SuiteReport::default();
    for n in 1..=n_max {
        let tol = residual_tolerance(n);
        for c in 0..cases {
            let case = random_case(&mut rng, n);
            // free evolution holds on all of Z^n, so probe an arbitrary relaxed X
            let relaxed: Vec<i64> = (0..n).map(|_| rng.gen_range(-1..=4)).collect();
            let x = StateVector::relaxed(relaxed);
            let name = format!("n={n} free evolution #{c} X={x} Y={} t={:.3}", case.from, case.t);
            report.checks.push(
                match free_evolution_residual(&x, &case.from, case.t, &case.profile, contour) {
                    Ok(r) => Check::new("residuals", name, r.relative(), tol),
                    Err(_) => Check::failed("residuals", name, tol),
                },
            );
            if n >= 2 {
                let k = rng.gen_range(0..n - 1);
                let site = rng.gen_range(-1..=4);
                let context: Vec<i64> = (0..n).map(|_| rng.gen_range(-1..=4)).collect();
                let name = format!(
                    "n={n} boundary #{c} k={} x={site} context={context:?} Y={} t={:.3}",
                    k + 1,
                    case.from,
                    case.t
                );
                report.checks.push(
                    match boundary_residual(k, site, &context, &case.from, case.t, &case.profile, contour) {
                        Ok(r) => Check::new("residuals", name, r.relative(), tol),
                        Err(_) => Check::failed("residuals", name, tol),
                    },
                );
            }
        }
    }
    report
}

/// Tolerance for formula-versus-oracle agreement.
pub fn oracle_tolerance(n: usize) -> f64 {
    match n {
        0..=2 => 1e-8,
        3 => 1e-6,
        _ => 1e-4,
    }
}

/// Formula and oracle values for one case.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub case: Case,
    pub formula: f64,
    pub oracle: f64,
    pub imag_leak: f64,
}

impl Comparison {
    pub fn delta(&self) -> f64 {
        (self.formula - self.oracle).abs()
    }
}

#[derive(Debug)]
pub enum CompareError {
    Formula(TransitionError),
    Oracle(OracleError),
}

pub fn compare(case: &Case, contour: &ContourOptions) -> Result<Comparison, CompareError> {
    let req = TransitionRequest::new(case.from.clone(), case.to.clone(), case.t, case.profile.clone())
        .with_contour(*contour);
    let f = transition_probability(&req).map_err(CompareError::Formula)?;
    let o = oracle_prob(&case.from, &case.to, case.t, &case.profile, ORACLE_EPS)
        .map_err(CompareError::Oracle)?;
    Ok(Comparison {
        case: case.clone(),
        formula: f.p,
        oracle: o,
        imag_leak: f.imag_leak,
    })
}

/// The formula-versus-oracle panel: `per_n[n - 1]` cases with `n` particles.
pub fn oracle_panel(per_n: &[usize], seed: u64) -> Vec<Case> {
    let mut rng = rng(seed);
    let mut cases = Vec::new();
    for (i, &count) in per_n.iter().enumerate() {
        for _ in 0..count {
            cases.push(random_case(&mut rng, i + 1));
        }
    }
    cases
}

/// Cases per particle number: 10, 30, 15 and 1 for `n = 1..=4`, cut at `n_max`.
pub fn default_panel_sizes(n_max: usize) -> Vec<usize> {
    [10, 30, 15, 1].into_iter().take(n_max).collect()
}

pub fn oracle_match_suite(n_max: usize, seed: u64, contour: &ContourOptions) -> SuiteReport {
    let mut report = SuiteReport::default();
    for (i, case) in oracle_panel(&default_panel_sizes(n_max), seed).iter().enumerate() {
        let n = case.from.len();
        let tol = oracle_tolerance(n);
        let name = format!("n={n} #{i} {} -> {} t={:.3}", case.from, case.to, case.t);
        report.checks.push(match compare(case, contour) {
            Ok(c) => Check::new("oracle-match", name, c.delta(), tol),
            Err(_) => Check::failed("oracle-match", name, tol),
        });
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_respect_their_ranges() {
        let mut r = rng(3);
        for _ in 0..200 {
            let n = r.gen_range(1..=4);
            let case = random_case(&mut r, n);
            assert!(case.from.is_ordered() && case.to.is_ordered());
            assert!(case.to.coords().iter().zip(case.from.coords()).all(|(x, y)| x >= y));
            assert!((0.0..2.0).contains(&case.t));
            assert!(Q_CHOICES.contains(&case.profile.q().value()));
            for s in -1..=case.to.max_site() + 1 {
                assert!((0.5..2.0).contains(&case.profile.a(s)));
            }
        }
    }

    #[test]
    fn panels_are_seeded() {
        assert_eq!(oracle_panel(&[2, 3], 11), oracle_panel(&[2, 3], 11));
        assert_ne!(oracle_panel(&[2, 3], 11), oracle_panel(&[2, 3], 12));
    }

    #[test]
    fn small_suites_pass() {
        assert!(identities_suite(4, 10, 1).all_passed());
        let o = ContourOptions::default();
        let r = residuals_suite(2, 2, 1, &o);
        assert!(r.all_passed(), "{:?}", r.failures().collect::<Vec<_>>());
        let m = oracle_match_suite(2, 1, &o);
        assert!(m.all_passed(), "{:?}", m.failures().collect::<Vec<_>>());
    }
}
