//! Trapezoidal quadrature of `(2 pi i)^{-n} \oint ... \oint` over a common
//! circle `|w_j| = R`, with node doubling until two successive resolutions
//! agree.
//!
//! For integrands analytic in an annulus around the circle the periodic
//! trapezoidal rule converges geometrically, so the change under one
//! doubling is a sharp error surrogate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::qcore::{PoleError, RateProfile, StateVector};

pub const DEFAULT_NODES: usize = 64;
pub const DEFAULT_MAX_NODES: usize = 1024;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadratureError {
    #[error("invalid contour: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Pole(#[from] PoleError),
    #[error(
        "quadrature did not converge: |delta| = {:e} with {} nodes per circle",
        .0.estimated_error,
        .0.nodes_used
    )]
    NonConvergence(QuadratureResult),
}

/// Common circle radius and node schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourSpec {
    pub radius: f64,
    /// Nodes per circle at the first accepted resolution (a power of two, at least 8).
    pub nodes: usize,
    pub max_nodes: usize,
    pub tol: f64,
}

impl ContourSpec {
    pub fn new(radius: f64) -> Self {
        Self {
            radius,
            nodes: DEFAULT_NODES,
            max_nodes: DEFAULT_MAX_NODES,
            tol: DEFAULT_TOL,
        }
    }

    pub fn with_nodes(mut self, nodes: usize, max_nodes: usize) -> Self {
        self.nodes = nodes;
        self.max_nodes = max_nodes;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<(), QuadratureError> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(QuadratureError::InvalidSpec(format!(
                "radius must be positive, got {}",
                self.radius
            )));
        }
        if self.nodes < 8 || !self.nodes.is_power_of_two() {
            return Err(QuadratureError::InvalidSpec(format!(
                "node count must be a power of two >= 8, got {}",
                self.nodes
            )));
        }
        if self.max_nodes < self.nodes || !self.max_nodes.is_power_of_two() {
            return Err(QuadratureError::InvalidSpec(format!(
                "max_nodes must be a power of two >= nodes, got {}",
                self.max_nodes
            )));
        }
        if !(self.tol > 0.0) {
            return Err(QuadratureError::InvalidSpec(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: Complex64,
    /// `|value(M) - value(M/2)|`.
    pub estimated_error: f64,
    pub nodes_used: usize,
    pub converged: bool,
}

/// Nodes `R e^{2 pi i m / M}` with weights `z_m / M`, so that
/// `sum weight * f(node)` approximates `(2 pi i)^{-1} \oint f(z) dz`.
pub fn circle_nodes(radius: f64, m: usize) -> Vec<(Complex64, Complex64)> {
    assert!(m >= 1, "need at least one node");
    let inv = 1.0 / m as f64;
    (0..m)
        .map(|k| {
            let z = Complex64::from_polar(radius, 2.0 * PI * k as f64 * inv);
            (z, z * inv)
        })
        .collect()
}

/// An integrand on the torus `|w_1| = ... = |w_n| = R`.
///
/// The value at a point is `coupling(w) * prod_j factor(j, w_j)`. Factors
/// are evaluated once per node and variable; `prepare` lets the coupling
/// precompute tables over the node set (for instance pair interactions,
/// which only depend on the two node indices involved).
pub trait TorusIntegrand: Sync {
    type Grid: Sync;

    fn dim(&self) -> usize;

    fn prepare(&self, nodes: &[Complex64]) -> Result<Self::Grid, PoleError>;

    fn factor(&self, var: usize, w: Complex64) -> Result<Complex64, PoleError>;

    fn coupling(
        &self,
        grid: &Self::Grid,
        w: &[Complex64],
        idx: &[usize],
    ) -> Result<Complex64, PoleError>;
}

/// Adapter turning a closure of the full point into a [`TorusIntegrand`].
pub struct FnIntegrand<F> {
    dim: usize,
    f: F,
}

impl<F> FnIntegrand<F>
where
    F: Fn(&[Complex64]) -> Result<Complex64, PoleError> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> TorusIntegrand for FnIntegrand<F>
where
    F: Fn(&[Complex64]) -> Result<Complex64, PoleError> + Sync,
{
    type Grid = ();

    fn dim(&self) -> usize {
        self.dim
    }

    fn prepare(&self, _nodes: &[Complex64]) -> Result<(), PoleError> {
        Ok(())
    }

    fn factor(&self, _var: usize, _w: Complex64) -> Result<Complex64, PoleError> {
        Ok(Complex64::new(1.0, 0.0))
    }

    fn coupling(&self, _: &(), w: &[Complex64], _: &[usize]) -> Result<Complex64, PoleError> {
        (self.f)(w)
    }
}

/// Tensor-product trapezoidal sum with `m` nodes per circle.
///
/// The outermost variable is spread over worker threads; partial sums are
/// combined in node order, so the result is bit-for-bit reproducible for a
/// given `m`.
pub fn torus_sum<I: TorusIntegrand>(
    integrand: &I,
    radius: f64,
    m: usize,
) -> Result<Complex64, PoleError> {
    let n = integrand.dim();
    assert!(n >= 1, "integrand must have at least one variable");
    let nodes_weights = circle_nodes(radius, m);
    let nodes: Vec<Complex64> = nodes_weights.iter().map(|(z, _)| *z).collect();
    let grid = integrand.prepare(&nodes)?;

    // weighted per-variable factors, laid out [var][node]
    let mut table = Vec::with_capacity(n * m);
    for var in 0..n {
        for &(z, wt) in &nodes_weights {
            table.push(integrand.factor(var, z)? * wt);
        }
    }

    let partials: Vec<Complex64> = (0..m)
        .into_par_iter()
        .map(|outer| {
            let mut idx = vec![0usize; n];
            let mut w = vec![nodes[0]; n];
            idx[0] = outer;
            w[0] = nodes[outer];
            // prefix[j] = product of weighted factors of variables 0..j
            let mut prefix = vec![Complex64::new(0.0, 0.0); n + 1];
            prefix[0] = Complex64::new(1.0, 0.0);
            prefix[1] = table[outer];
            for j in 1..n {
                w[j] = nodes[0];
                prefix[j + 1] = prefix[j] * table[j * m];
            }
            let mut acc = Complex64::new(0.0, 0.0);
            loop {
                acc += prefix[n] * integrand.coupling(&grid, &w, &idx)?;
                // odometer over variables 1..n, innermost last
                let mut j = n - 1;
                loop {
                    if j == 0 {
                        return Ok(acc);
                    }
                    idx[j] += 1;
                    if idx[j] < m {
                        break;
                    }
                    idx[j] = 0;
                    w[j] = nodes[0];
                    j -= 1;
                }
                w[j] = nodes[idx[j]];
                prefix[j + 1] = prefix[j] * table[j * m + idx[j]];
                for k in (j + 1)..n {
                    prefix[k + 1] = prefix[k] * table[k * m];
                }
            }
        })
        .collect::<Result<Vec<_>, PoleError>>()?;

    Ok(partials.into_iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b))
}

/// Integrates with node doubling: compares `M/2` and `M` starting from
/// `spec.nodes`, doubling until `|delta| < tol * max(1, |value|)` or
/// `spec.max_nodes` is reached.
pub fn contour_integral_n<I: TorusIntegrand>(
    integrand: &I,
    spec: &ContourSpec,
) -> Result<QuadratureResult, QuadratureError> {
    spec.validate()?;
    let mut m = spec.nodes;
    let mut coarse = torus_sum(integrand, spec.radius, m / 2)?;
    loop {
        let fine = torus_sum(integrand, spec.radius, m)?;
        let delta = (fine - coarse).norm();
        let converged = delta < spec.tol * fine.norm().max(1.0);
        let result = QuadratureResult {
            value: fine,
            estimated_error: delta,
            nodes_used: m,
            converged,
        };
        if converged {
            return Ok(result);
        }
        if m >= spec.max_nodes {
            return Err(QuadratureError::NonConvergence(result));
        }
        coarse = fine;
        m *= 2;
    }
}

/// Closure form of [`contour_integral_n`] for an `n`-variable integrand.
pub fn contour_integral_fn<F>(
    f: F,
    n: usize,
    spec: &ContourSpec,
) -> Result<QuadratureResult, QuadratureError>
where
    F: Fn(&[Complex64]) -> Result<Complex64, PoleError> + Sync,
{
    contour_integral_n(&FnIntegrand::new(n, f), spec)
}

/// Twice the largest `b_k` over sites `[min(Y, X) - 1, max(Y, X)]`.
///
/// With a common radius the `q w_i` poles (modulus `qR`) are automatically
/// inside and the `w_l / q` poles (modulus `R / q`) outside.
pub fn choose_radius(profile: &RateProfile, from: &StateVector, to: &StateVector) -> f64 {
    let lo = from.min_site().min(to.min_site()) - 1;
    let hi = from.max_site().max(to.max_site());
    2.0 * profile.max_b_in(lo, hi)
}
