//! Transition probabilities from the Bethe-ansatz permutation sum.
//!
//! `P_Y(X; t) = W(X)^{-1} sum_sigma Lambda_Y(X; t; sigma)` where each
//! `Lambda` is `prod_k (-1/b_{x_k})` times an `n`-fold contour integral over
//! a common circle. The unnormalized sum `u0` is defined for every `X` in
//! `Z^n`, which is what the evolution and boundary residuals probe.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::bethe::{chain_factor, LambdaIntegrand, Permutation, StepIntegrand};
use crate::qcore::{q_factorial, weight_w, ModelError, PoleError, RateProfile, StateVector};
use crate::quadrature::{
    choose_radius, contour_integral_fn, contour_integral_n, ContourSpec, QuadratureError,
    QuadratureResult, TorusIntegrand, DEFAULT_MAX_NODES, DEFAULT_NODES, DEFAULT_TOL,
};

/// Default cap on `R t`; beyond it `e^{R t}` cancellation eats double precision.
pub const DEFAULT_MAX_RT: f64 = 40.0;

/// Relative gap below which two rates count as coincident in the closed form.
pub const CONFLUENCE_RTOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransitionError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("dimension mismatch: initial state has {from} particles, target has {to}")]
    DimensionMismatch { from: usize, to: usize },
    #[error("time must be nonnegative, got {0}")]
    NegativeTime(f64),
    #[error(
        "R t = {:.3} exceeds the limit {limit} (t = {t}, R = {radius}); use the master-equation oracle instead",
        .t * .radius
    )]
    TimeTooLarge { t: f64, radius: f64, limit: f64 },
    #[error(transparent)]
    Pole(#[from] PoleError),
    #[error("invalid contour options: {0}")]
    InvalidContour(String),
    #[error("contour quadrature did not converge (max |delta| = {:e})", .0.estimated_error)]
    NonConvergence(Box<ProbabilityResult>),
}

/// Contour choices shared by every evaluation in a request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourOptions {
    /// Explicit radius; when absent [`choose_radius`] is used.
    pub radius: Option<f64>,
    /// Multiplier applied to the chosen (or explicit) radius.
    pub radius_scale: f64,
    pub nodes: usize,
    pub max_nodes: usize,
    pub tol: f64,
    pub max_rt: f64,
}

impl Default for ContourOptions {
    fn default() -> Self {
        Self {
            radius: None,
            radius_scale: 1.0,
            nodes: DEFAULT_NODES,
            max_nodes: DEFAULT_MAX_NODES,
            tol: DEFAULT_TOL,
            max_rt: DEFAULT_MAX_RT,
        }
    }
}

impl ContourOptions {
    /// Fixed resolution: `nodes` is both the starting and maximal node count.
    pub fn fixed_nodes(nodes: usize) -> Self {
        Self {
            nodes,
            max_nodes: nodes,
            ..Self::default()
        }
    }

    fn spec(&self, radius: f64) -> ContourSpec {
        ContourSpec {
            radius,
            nodes: self.nodes,
            max_nodes: self.max_nodes,
            tol: self.tol,
        }
    }

    fn resolve_radius(&self, auto: impl FnOnce() -> f64) -> Result<f64, TransitionError> {
        if !(self.radius_scale.is_finite() && self.radius_scale > 0.0) {
            return Err(TransitionError::InvalidContour(format!(
                "radius scale must be positive, got {}",
                self.radius_scale
            )));
        }
        let base = match self.radius {
            Some(r) => r,
            None => auto(),
        };
        let r = base * self.radius_scale;
        if !(r.is_finite() && r > 0.0) {
            return Err(TransitionError::InvalidContour(format!(
                "radius must be positive, got {r}"
            )));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRequest {
    pub from: StateVector,
    pub to: StateVector,
    pub t: f64,
    pub profile: RateProfile,
    pub contour: ContourOptions,
}

impl TransitionRequest {
    pub fn new(from: StateVector, to: StateVector, t: f64, profile: RateProfile) -> Self {
        Self {
            from,
            to,
            t,
            profile,
            contour: ContourOptions::default(),
        }
    }

    pub fn with_contour(mut self, contour: ContourOptions) -> Self {
        self.contour = contour;
        self
    }

    fn validate(&self) -> Result<(), TransitionError> {
        self.from.require_ordered()?;
        self.to.require_ordered()?;
        check_dims(&self.from, &self.to)?;
        check_time(self.t)
    }
}

/// One `Lambda_Y(X; t; sigma)` with its quadrature record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationTerm {
    pub sigma: Vec<usize>,
    /// `prod_k (-1/b_{x_k})` times the contour integral.
    pub value: Complex64,
    pub quadrature: QuadratureResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityResult {
    /// Real part of the normalized sum, unclamped.
    pub p: f64,
    /// `|Im|` of the normalized sum before it was discarded.
    pub imag_leak: f64,
    /// Propagated quadrature error estimate on `p`.
    pub estimated_error: f64,
    pub converged: bool,
    pub radius: f64,
    /// Largest node count used by any of the integrals.
    pub nodes_used: usize,
    /// Per-permutation terms in lexicographic order (empty for the step formula).
    pub terms: Vec<PermutationTerm>,
}

impl ProbabilityResult {
    /// `p` clamped into `[0, 1]` for display.
    pub fn presented(&self) -> f64 {
        self.p.clamp(0.0, 1.0)
    }
}

/// Unnormalized Bethe sum `u0_Y(X; t)` with quadrature metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct BetheSum {
    pub value: Complex64,
    pub estimated_error: f64,
    pub converged: bool,
    pub radius: f64,
    pub nodes_used: usize,
    pub terms: Vec<PermutationTerm>,
}

fn check_dims(from: &StateVector, to: &StateVector) -> Result<(), TransitionError> {
    if from.len() != to.len() || from.is_empty() {
        return Err(TransitionError::DimensionMismatch {
            from: from.len(),
            to: to.len(),
        });
    }
    Ok(())
}

fn check_time(t: f64) -> Result<(), TransitionError> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(TransitionError::NegativeTime(t))
    }
}

fn check_rt(t: f64, radius: f64, opts: &ContourOptions) -> Result<(), TransitionError> {
    if radius * t > opts.max_rt {
        return Err(TransitionError::TimeTooLarge {
            t,
            radius,
            limit: opts.max_rt,
        });
    }
    Ok(())
}

fn prefactor(x: &[i64], profile: &RateProfile) -> f64 {
    x.iter().map(|&xk| -1.0 / profile.b(xk)).product()
}

/// Integrates, keeping the partial result when the node budget runs out.
fn integrate<I: TorusIntegrand>(
    integrand: &I,
    spec: &ContourSpec,
) -> Result<QuadratureResult, TransitionError> {
    match contour_integral_n(integrand, spec) {
        Ok(r) => Ok(r),
        Err(QuadratureError::NonConvergence(r)) => Ok(r),
        Err(QuadratureError::Pole(p)) => Err(p.into()),
        Err(QuadratureError::InvalidSpec(s)) => Err(TransitionError::InvalidContour(s)),
    }
}

/// `sum_sigma Lambda_Y(X; t; sigma)` at a fixed radius.
///
/// With `time_derivative` the integrands carry `-(w_1 + ... + w_n)`,
/// giving `d/dt u0` instead.
pub fn bethe_sum_at(
    x: &StateVector,
    y: &StateVector,
    t: f64,
    profile: &RateProfile,
    opts: &ContourOptions,
    radius: f64,
    time_derivative: bool,
) -> Result<BetheSum, TransitionError> {
    check_dims(y, x)?;
    check_time(t)?;
    check_rt(t, radius, opts)?;
    let spec = opts.spec(radius);
    let pre = prefactor(x.coords(), profile);
    let mut terms = Vec::new();
    let mut value = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    let mut converged = true;
    let mut nodes_used = 0;
    for sigma in Permutation::all(x.len()) {
        let integrand = LambdaIntegrand::new(x.coords(), y.coords(), &sigma, t, profile)
            .time_derivative(time_derivative);
        let quad = integrate(&integrand, &spec)?;
        let term = pre * quad.value;
        value += term;
        err += pre.abs() * quad.estimated_error;
        converged &= quad.converged;
        nodes_used = nodes_used.max(quad.nodes_used);
        terms.push(PermutationTerm {
            sigma: sigma.images().to_vec(),
            value: term,
            quadrature: quad,
        });
    }
    Ok(BetheSum {
        value,
        estimated_error: err,
        converged,
        radius,
        nodes_used,
        terms,
    })
}

/// `P_Y(X; t)` from the permutation sum.
pub fn transition_probability(req: &TransitionRequest) -> Result<ProbabilityResult, TransitionError> {
    req.validate()?;
    let radius = req
        .contour
        .resolve_radius(|| choose_radius(&req.profile, &req.from, &req.to))?;
    let sum = bethe_sum_at(&req.to, &req.from, req.t, &req.profile, &req.contour, radius, false)?;
    let w = weight_w(&req.to, req.profile.q())?;
    let result = ProbabilityResult {
        p: sum.value.re / w,
        imag_leak: sum.value.im.abs() / w,
        estimated_error: sum.estimated_error / w,
        converged: sum.converged,
        radius,
        nodes_used: sum.nodes_used,
        terms: sum.terms,
    };
    if result.converged {
        Ok(result)
    } else {
        Err(TransitionError::NonConvergence(Box::new(result)))
    }
}

/// Single-particle `P_y(x; t)`.
///
/// Uses the partial-fraction sum over the distinct rates on `y..=x`; when two
/// of those rates coincide within [`CONFLUENCE_RTOL`] it switches to the
/// one-variable contour form, which realizes the confluent limit.
pub fn one_particle_prob(y: i64, x: i64, t: f64, profile: &RateProfile) -> f64 {
    if x < y {
        return 0.0;
    }
    if x == y {
        return (-profile.b(y) * t).exp();
    }
    let rates: Vec<f64> = (y..=x).map(|k| profile.b(k)).collect();
    let confluent = rates.iter().enumerate().any(|(i, &bi)| {
        rates[i + 1..]
            .iter()
            .any(|&bj| (bi - bj).abs() <= CONFLUENCE_RTOL * bi.max(bj))
    });
    if confluent {
        one_particle_contour(y, x, t, profile)
    } else {
        one_particle_residue_sum(&rates, t)
    }
}

/// `(prod_{k<last} b_k) sum_k [prod_{j != k} 1/(b_j - b_k)] e^{-b_k t}`; rates must be distinct.
pub fn one_particle_residue_sum(rates: &[f64], t: f64) -> f64 {
    let (_, head) = rates.split_last().expect("at least one rate");
    let lead: f64 = head.iter().product();
    let mut total = 0.0;
    for (k, &bk) in rates.iter().enumerate() {
        let mut term = (-bk * t).exp();
        for (j, &bj) in rates.iter().enumerate() {
            if j != k {
                term /= bj - bk;
            }
        }
        total += term;
    }
    lead * total
}

/// `-1/b_x (2 pi i)^{-1} \oint prod'_{k=y}^{x} b_k/(b_k - w) e^{-w t} dw` on `|w| = 2 max b`.
pub fn one_particle_contour(y: i64, x: i64, t: f64, profile: &RateProfile) -> f64 {
    let radius = 2.0 * profile.max_b_in(y.min(x) - 1, y.max(x));
    let spec = ContourSpec::new(radius)
        .with_nodes(64, 1 << 14)
        .with_tol(1e-14);
    let f = |w: &[Complex64]| Ok(chain_factor(profile, y, x, w[0])? * (-w[0] * t).exp());
    let quad = match contour_integral_fn(f, 1, &spec) {
        Ok(r) => r,
        Err(QuadratureError::NonConvergence(r)) => r,
        Err(e) => panic!("one-particle contour on |w| = {radius}: {e}"),
    };
    (-1.0 / profile.b(x) * quad.value).re
}

/// Step initial condition `Y = (0, ..., 0)` through the single symmetrized integral
/// `[n]_q! / W(X) prod_k (-1/b_{x_k}) \oint B(w) prod_j [...]`.
pub fn step_init_prob(
    x: &StateVector,
    t: f64,
    profile: &RateProfile,
    opts: &ContourOptions,
) -> Result<ProbabilityResult, TransitionError> {
    x.require_ordered()?;
    check_time(t)?;
    let origin = StateVector::step(x.len());
    let radius = opts.resolve_radius(|| choose_radius(profile, &origin, x))?;
    check_rt(t, radius, opts)?;
    let quad = integrate(&StepIntegrand::new(x.coords(), t, profile), &opts.spec(radius))?;
    let q = profile.q();
    let scale = q_factorial(x.len(), q) / weight_w(x, q)? * prefactor(x.coords(), profile);
    let value = scale * quad.value;
    let result = ProbabilityResult {
        p: value.re,
        imag_leak: value.im.abs(),
        estimated_error: scale.abs() * quad.estimated_error,
        converged: quad.converged,
        radius,
        nodes_used: quad.nodes_used,
        terms: Vec::new(),
    };
    if result.converged {
        Ok(result)
    } else {
        Err(TransitionError::NonConvergence(Box::new(result)))
    }
}

fn radius_over(
    states: &[&StateVector],
    y: &StateVector,
    profile: &RateProfile,
    opts: &ContourOptions,
) -> Result<f64, TransitionError> {
    opts.resolve_radius(|| {
        let lo = states.iter().map(|s| StateVector::min_site(s)).min().unwrap_or(0).min(y.min_site()) - 1;
        let hi = states.iter().map(|s| StateVector::max_site(s)).max().unwrap_or(0).max(y.max_site());
        2.0 * profile.max_b_in(lo, hi)
    })
}

fn converged_value(sum: BetheSum) -> Result<Complex64, TransitionError> {
    if sum.converged {
        Ok(sum.value)
    } else {
        Err(TransitionError::NonConvergence(Box::new(ProbabilityResult {
            p: sum.value.re,
            imag_leak: sum.value.im.abs(),
            estimated_error: sum.estimated_error,
            converged: false,
            radius: sum.radius,
            nodes_used: sum.nodes_used,
            terms: sum.terms,
        })))
    }
}

/// `u0_Y(X; t) = sum_sigma Lambda_Y(X; t; sigma)` for any `X` in `Z^n`.
pub fn u0_sum(
    x: &StateVector,
    y: &StateVector,
    t: f64,
    profile: &RateProfile,
    opts: &ContourOptions,
) -> Result<Complex64, TransitionError> {
    y.require_ordered()?;
    let radius = radius_over(&[x], y, profile, opts)?;
    converged_value(bethe_sum_at(x, y, t, profile, opts, radius, false)?)
}

/// A residual together with the magnitude of the terms it balances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub residual: Complex64,
    /// `max(1, largest |term|)`.
    pub scale: f64,
}

impl Residual {
    pub fn abs(&self) -> f64 {
        self.residual.norm()
    }

    pub fn relative(&self) -> f64 {
        self.residual.norm() / self.scale
    }

    fn from_terms(residual: Complex64, terms: impl IntoIterator<Item = Complex64>) -> Self {
        let scale = terms.into_iter().map(|z| z.norm()).fold(1.0, f64::max);
        Self { residual, scale }
    }
}

/// `d/dt u0(X) - sum_k (b_{x_k - 1} u0(X^{k,-}) - b_{x_k} u0(X))`.
///
/// The time derivative is taken under the integral sign.
pub fn free_evolution_residual(
    x: &StateVector,
    y: &StateVector,
    t: f64,
    profile: &RateProfile,
    opts: &ContourOptions,
) -> Result<Residual, TransitionError> {
    y.require_ordered()?;
    check_dims(y, x)?;
    let lowered: Vec<StateVector> = (0..x.len()).map(|k| x.shifted(k, -1)).collect();
    let mut all: Vec<&StateVector> = lowered.iter().collect();
    all.push(x);
    let radius = radius_over(&all, y, profile, opts)?;

    let du = converged_value(bethe_sum_at(x, y, t, profile, opts, radius, true)?)?;
    let u = converged_value(bethe_sum_at(x, y, t, profile, opts, radius, false)?)?;
    let mut rhs = Complex64::new(0.0, 0.0);
    let mut terms = vec![du];
    for (k, xm) in lowered.iter().enumerate() {
        let xk = x.coords()[k];
        let um = converged_value(bethe_sum_at(xm, y, t, profile, opts, radius, false)?)?;
        let gain = profile.b(xk - 1) * um;
        let loss = profile.b(xk) * u;
        rhs += gain - loss;
        terms.push(gain);
        terms.push(loss);
    }
    Ok(Residual::from_terms(du - rhs, terms))
}

/// `b_{x-1} u0(.., x-1, x, ..) - q b_{x-1} u0(.., x, x-1, ..) - (1-q) b_x u0(.., x, x, ..)`
/// with the pair at zero-based positions `k, k+1` and the other coordinates
/// taken from `context`.
pub fn boundary_residual(
    k: usize,
    x: i64,
    context: &[i64],
    y: &StateVector,
    t: f64,
    profile: &RateProfile,
    opts: &ContourOptions,
) -> Result<Residual, TransitionError> {
    y.require_ordered()?;
    let n = context.len();
    if n != y.len() {
        return Err(TransitionError::DimensionMismatch {
            from: y.len(),
            to: n,
        });
    }
    assert!(k + 1 < n, "boundary pair ({k}, {}) out of range for n = {n}", k + 1);
    let with_pair = |a: i64, b: i64| {
        let mut c = context.to_vec();
        c[k] = a;
        c[k + 1] = b;
        StateVector::relaxed(c)
    };
    let rising = with_pair(x - 1, x);
    let falling = with_pair(x, x - 1);
    let level = with_pair(x, x);
    let radius = radius_over(&[&rising, &falling, &level], y, profile, opts)?;
    let eval =
        |s: &StateVector| converged_value(bethe_sum_at(s, y, t, profile, opts, radius, false)?);
    let q = profile.q().value();
    let lhs = profile.b(x - 1) * eval(&rising)?;
    let r1 = q * profile.b(x - 1) * eval(&falling)?;
    let r2 = (1.0 - q) * profile.b(x) * eval(&level)?;
    Ok(Residual::from_terms(lhs - r1 - r2, [lhs, r1, r2]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::QParams;

    fn sv(v: &[i64]) -> StateVector {
        StateVector::new(v.to_vec()).unwrap()
    }

    fn hom(q: f64, a: f64) -> RateProfile {
        RateProfile::homogeneous(QParams::new(q).unwrap(), a).unwrap()
    }

    /// Single-particle probabilities by nested quadrature of the jump-time
    /// densities: P_y(x; t) = int_0^t b_y e^{-b_y s} P_{y+1}(x; t - s) ds.
    fn nested_oracle(rates: &[f64], t: f64) -> f64 {
        fn rec(rates: &[f64], t: f64) -> f64 {
            if rates.len() == 1 {
                return (-rates[0] * t).exp();
            }
            // composite Gauss-Legendre, 5 points on 200 panels
            let nodes = [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
            let weights = [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];
            let panels = 40;
            let h = t / panels as f64;
            let mut total = 0.0;
            for p in 0..panels {
                let mid = (p as f64 + 0.5) * h;
                for (xi, wi) in nodes.iter().zip(weights) {
                    let s = mid + 0.5 * h * xi;
                    total += 0.5 * h * wi * rates[0] * (-rates[0] * s).exp() * rec(&rates[1..], t - s);
                }
            }
            total
        }
        rec(rates, t)
    }

    #[test]
    fn one_particle_cases() {
        let p = RateProfile::new(QParams::new(0.5).unwrap(), 1.0, [(1, 1.6), (2, 0.7)]).unwrap();
        assert_eq!(one_particle_prob(3, 2, 1.0, &p), 0.0);
        assert!((one_particle_prob(1, 1, 0.8, &p) - (-0.8f64 * 0.8).exp()).abs() < 1e-16);
        let (b0, b1) = (p.b(0), p.b(1));
        let t = 1.3;
        let want = b0 / (b1 - b0) * ((-b0 * t).exp() - (-b1 * t).exp());
        assert!((one_particle_prob(0, 1, t, &p) - want).abs() < 1e-15);
        let rates: Vec<f64> = (0..=2).map(|k| p.b(k)).collect();
        assert!((one_particle_prob(0, 2, t, &p) - nested_oracle(&rates, t)).abs() < 1e-9);
    }

    #[test]
    fn confluent_rates_use_contour() {
        let p = hom(0.5, 1.0);
        let t = 1.0;
        let b: f64 = 0.5;
        assert!((one_particle_prob(0, 1, t, &p) - b * t * (-b * t).exp()).abs() < 1e-13);
        // Erlang(3): (b t)^2 / 2 e^{-b t}
        let want = (b * t).powi(2) / 2.0 * (-b * t).exp();
        assert!((one_particle_prob(0, 2, t, &p) - want).abs() < 1e-13);
    }

    #[test]
    fn contour_and_residue_sum_agree() {
        let p = RateProfile::new(QParams::new(0.3).unwrap(), 1.0, [(0, 0.6), (1, 1.9), (2, 1.2), (3, 0.8)]).unwrap();
        for x in 0..=3 {
            let a = one_particle_contour(0, x, 1.7, &p);
            let rates: Vec<f64> = (0..=x).map(|k| p.b(k)).collect();
            let b = one_particle_residue_sum(&rates, 1.7);
            assert!((a - b).abs() < 1e-12, "x = {x}: {a} vs {b}");
        }
    }

    #[test]
    fn initial_condition_and_support() {
        let p = hom(0.5, 1.0);
        let y = sv(&[1, 0]);
        let at = |x: &[i64], t: f64| {
            transition_probability(&TransitionRequest::new(y.clone(), sv(x), t, p.clone()))
                .unwrap()
                .p
        };
        assert!((at(&[1, 0], 0.0) - 1.0).abs() < 1e-8);
        assert!(at(&[1, 1], 0.0).abs() < 1e-8);
        assert!(at(&[2, 0], 0.0).abs() < 1e-8);
        // x_2 < y_2 is unreachable
        assert!(at(&[3, -1], 0.8).abs() < 1e-8);
    }

    #[test]
    fn one_particle_confluent_example() {
        let p = hom(0.5, 1.0);
        let r = transition_probability(&TransitionRequest::new(sv(&[0]), sv(&[1]), 1.0, p)).unwrap();
        assert!((r.p - 0.5 * (-0.5f64).exp()).abs() < 1e-10);
        assert!(r.imag_leak < 1e-8);
        assert_eq!(r.terms.len(), 1);
    }

    #[test]
    fn step_formula_examples() {
        let p = hom(0.5, 1.0);
        let o = ContourOptions::default();
        let r = step_init_prob(&sv(&[0]), 0.9, &p, &o).unwrap();
        assert!((r.p - (-0.5f64 * 0.9).exp()).abs() < 1e-10);
        let r = step_init_prob(&sv(&[0, 0, 0]), 0.0, &p, &o).unwrap();
        assert!((r.p - 1.0).abs() < 1e-8);
        let a = step_init_prob(&sv(&[1, 0]), 0.5, &p, &o).unwrap();
        let b = transition_probability(&TransitionRequest::new(sv(&[0, 0]), sv(&[1, 0]), 0.5, p)).unwrap();
        assert!((a.p - b.p).abs() < 1e-8);
    }

    #[test]
    fn u0_initial_condition() {
        let p = RateProfile::new(QParams::new(0.4).unwrap(), 1.0, [(1, 1.5)]).unwrap();
        let o = ContourOptions::default();
        let y = sv(&[1, 1, 0]);
        let w = weight_w(&y, p.q()).unwrap();
        let v = u0_sum(&y, &y, 0.0, &p, &o).unwrap();
        assert!((v - Complex64::new(w, 0.0)).norm() < 1e-8);
        for x in [&[1, 0, 0][..], &[2, 1, 0], &[1, 1, 1], &[3, 1, 0]] {
            let v = u0_sum(&sv(x), &y, 0.0, &p, &o).unwrap();
            assert!(v.norm() < 1e-8, "{x:?}: {v}");
        }
        let x = sv(&[2, 2, 0]);
        let u = u0_sum(&x, &y, 0.6, &p, &o).unwrap();
        let pr = transition_probability(&TransitionRequest::new(y.clone(), x.clone(), 0.6, p.clone())).unwrap();
        assert!((u.re - weight_w(&x, p.q()).unwrap() * pr.p).abs() < 1e-10);
    }

    #[test]
    fn residual_examples() {
        let p = RateProfile::new(QParams::new(0.5).unwrap(), 0.8, [(0, 1.4), (2, 0.6)]).unwrap();
        let o = ContourOptions::default();
        let r = free_evolution_residual(&StateVector::relaxed(vec![2]), &sv(&[0]), 0.7, &p, &o).unwrap();
        assert!(r.abs() < 1e-9);
        let r = free_evolution_residual(&StateVector::relaxed(vec![1, 2]), &sv(&[1, 0]), 0.7, &p, &o).unwrap();
        assert!(r.abs() < 1e-7);
        for x in -1..=3 {
            let r = boundary_residual(0, x, &[0, 0], &sv(&[1, 0]), 0.5, &p, &o).unwrap();
            assert!(r.abs() < 1e-8, "x = {x}: {r:?}");
            let r = boundary_residual(0, x, &[0, 0], &sv(&[1, 0]), 0.0, &p, &o).unwrap();
            assert!(r.abs() < 1e-8, "t = 0, x = {x}: {r:?}");
        }
    }

    #[test]
    fn request_validation() {
        let p = hom(0.5, 1.0);
        let bad = |from: StateVector, to: StateVector, t: f64| {
            transition_probability(&TransitionRequest::new(from, to, t, p.clone())).unwrap_err()
        };
        assert!(matches!(bad(sv(&[0]), sv(&[0, 0]), 1.0), TransitionError::DimensionMismatch { .. }));
        assert!(matches!(bad(sv(&[0]), sv(&[0]), -1.0), TransitionError::NegativeTime(_)));
        assert!(matches!(bad(sv(&[0]), StateVector::relaxed(vec![]), 1.0), TransitionError::Model(_)));
        assert!(matches!(
            bad(sv(&[0, 0]), StateVector::relaxed(vec![0, 1]), 1.0),
            TransitionError::Model(ModelError::Unordered(_))
        ));
        assert!(matches!(bad(sv(&[0]), sv(&[1]), 100.0), TransitionError::TimeTooLarge { .. }));
    }

    #[test]
    fn fixed_resolution_budget_reports_non_convergence() {
        let p = hom(0.9, 1.0);
        let req = TransitionRequest::new(sv(&[0, 0]), sv(&[1, 0]), 0.5, p)
            .with_contour(ContourOptions::fixed_nodes(8));
        match transition_probability(&req) {
            Err(TransitionError::NonConvergence(r)) => assert!(!r.converged),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
