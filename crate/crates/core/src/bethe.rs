//! Symmetric-group bookkeeping and the Bethe-ansatz amplitudes.
//!
//! Indices are zero-based throughout: a permutation of `n` elements maps
//! `0..n` onto itself, and an inversion `(beta, alpha)` has `alpha < beta`
//! with `sigma^{-1}(alpha) > sigma^{-1}(beta)`.

use num_complex::Complex64;
use thiserror::Error;

use crate::qcore::{checked_div, q_factorial, PoleError, QParams, RateProfile};
use crate::quadrature::TorusIntegrand;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0:?} is not a permutation of 0..{}", .0.len())]
pub struct PermutationError(pub Vec<usize>);

/// An element of `S_n` in one-line notation, with cached inverse and inversions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    images: Vec<usize>,
    inverse: Vec<usize>,
    inversions: Vec<(usize, usize)>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self, PermutationError> {
        let n = images.len();
        let mut inverse = vec![usize::MAX; n];
        for (i, &s) in images.iter().enumerate() {
            if s >= n || inverse[s] != usize::MAX {
                return Err(PermutationError(images));
            }
            inverse[s] = i;
        }
        let mut inversions = Vec::new();
        for beta in 0..n {
            for alpha in 0..beta {
                if inverse[alpha] > inverse[beta] {
                    inversions.push((beta, alpha));
                }
            }
        }
        Ok(Self {
            images,
            inverse,
            inversions,
        })
    }

    /// From one-based one-line notation, e.g. `[2, 3, 1]`.
    pub fn from_one_line(images: &[usize]) -> Result<Self, PermutationError> {
        if images.contains(&0) {
            return Err(PermutationError(images.to_vec()));
        }
        Self::new(images.iter().map(|&s| s - 1).collect())
    }

    pub fn identity(n: usize) -> Self {
        Self::new((0..n).collect()).expect("identity is a permutation")
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    #[inline]
    pub fn images(&self) -> &[usize] {
        &self.images
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    #[inline]
    pub fn inverse_of(&self, i: usize) -> usize {
        self.inverse[i]
    }

    pub fn inverse(&self) -> Permutation {
        Self::new(self.inverse.clone()).expect("inverse is a permutation")
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &s)| i == s)
    }

    /// `self ∘ (k, k+1)`: the images at positions `k` and `k + 1` swapped.
    pub fn swap_adjacent(&self, k: usize) -> Permutation {
        let mut images = self.images.clone();
        images.swap(k, k + 1);
        Self::new(images).expect("swapping keeps a bijection")
    }

    /// `self ∘ other`, i.e. `i -> self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.len(), other.len());
        Self::new(other.images.iter().map(|&i| self.images[i]).collect())
            .expect("composition is a permutation")
    }

    pub fn inversions(&self) -> &[(usize, usize)] {
        &self.inversions
    }

    /// Streams all of `S_n` in lexicographic order of the one-line images.
    pub fn all(n: usize) -> Permutations {
        Permutations {
            next: Some((0..n).collect()),
        }
    }
}

/// Lexicographic successor iteration; see [`Permutation::all`].
#[derive(Debug, Clone)]
pub struct Permutations {
    next: Option<Vec<usize>>,
}

impl Iterator for Permutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if next_lexicographic(&mut succ) {
            self.next = Some(succ);
        }
        Some(Permutation::new(current).expect("generated a bijection"))
    }
}

fn next_lexicographic(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Inversion pairs `(beta, alpha)` of `sigma`.
pub fn inversions(sigma: &Permutation) -> Vec<(usize, usize)> {
    sigma.inversions().to_vec()
}

/// `S_(beta, alpha)(w) = -(q w_beta - w_alpha) / (q w_alpha - w_beta)`, `alpha < beta`.
pub fn s_factor(
    beta: usize,
    alpha: usize,
    w: &[Complex64],
    q: QParams,
) -> Result<Complex64, PoleError> {
    assert!(alpha < beta, "S-factor needs alpha < beta, got ({beta}, {alpha})");
    s_pair(w[alpha], w[beta], q.value())
}

#[inline]
fn s_pair(wa: Complex64, wb: Complex64, q: f64) -> Result<Complex64, PoleError> {
    let den = q * wa - wb;
    let scale = (q * wa.norm()).max(wb.norm());
    checked_div(-(q * wb - wa), den, scale, "S-factor")
}

/// `A_sigma(w)`: product of S-factors over the inversions of `sigma`.
pub fn a_sigma(sigma: &Permutation, w: &[Complex64], q: QParams) -> Result<Complex64, PoleError> {
    assert_eq!(sigma.len(), w.len());
    sigma
        .inversions()
        .iter()
        .try_fold(ONE, |acc, &(beta, alpha)| {
            Ok(acc * s_pair(w[alpha], w[beta], q.value())?)
        })
}

/// `B(w) = prod_{i<j} (w_i - w_j) / (w_i - q w_j)`.
pub fn b_factor(w: &[Complex64], q: QParams) -> Result<Complex64, PoleError> {
    let q = q.value();
    let mut acc = ONE;
    for i in 0..w.len() {
        for j in (i + 1)..w.len() {
            acc *= b_pair(w[i], w[j], q)?;
        }
    }
    Ok(acc)
}

#[inline]
fn b_pair(wi: Complex64, wj: Complex64, q: f64) -> Result<Complex64, PoleError> {
    let scale = wi.norm().max(q * wj.norm());
    checked_div(wi - wj, wi - q * wj, scale, "B-factor")
}

/// `C(w) = sum_k prod_{j != k} (q w_j - w_k) / (w_j - w_k)`.
pub fn c_function(w: &[Complex64], q: QParams) -> Result<Complex64, PoleError> {
    let q = q.value();
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..w.len() {
        let mut term = ONE;
        for j in 0..w.len() {
            if j != k {
                let scale = w[j].norm().max(w[k].norm());
                term *= checked_div(q * w[j] - w[k], w[j] - w[k], scale, "C-function")?;
            }
        }
        total += term;
    }
    Ok(total)
}

/// `sum_sigma A_sigma(w_{sigma^{-1}(1)}, ..., w_{sigma^{-1}(n)}) - [n]_q! B(w)`.
///
/// Costs `n!` amplitude evaluations.
pub fn perm_sum_identity_residual(w: &[Complex64], q: QParams) -> Result<Complex64, PoleError> {
    let n = w.len();
    let mut permuted = vec![Complex64::new(0.0, 0.0); n];
    let mut lhs = Complex64::new(0.0, 0.0);
    for sigma in Permutation::all(n) {
        for (i, slot) in permuted.iter_mut().enumerate() {
            *slot = w[sigma.inverse_of(i)];
        }
        lhs += a_sigma(&sigma, &permuted, q)?;
    }
    Ok(lhs - q_factorial(n, q) * b_factor(w, q)?)
}

/// Minimum pairwise distance among `{w_i} ∪ {q w_j}` exceeds `1e-3 max |w_i|`.
pub fn is_well_separated(w: &[Complex64], q: QParams) -> bool {
    let scale = w.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(scale > 0.0) || w.iter().any(|z| !z.is_finite()) {
        return false;
    }
    let pts: Vec<Complex64> = w
        .iter()
        .copied()
        .chain(w.iter().map(|z| q.value() * z))
        .collect();
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            if (pts[i] - pts[j]).norm() <= 1e-3 * scale {
                return false;
            }
        }
    }
    true
}

/// `prod'_{k=lower}^{upper} b_k / (b_k - w)`.
///
/// The reciprocal branch of the extended product is a polynomial in `w`,
/// so only the ordinary branch can hit a pole.
pub fn chain_factor(
    profile: &RateProfile,
    lower: i64,
    upper: i64,
    w: Complex64,
) -> Result<Complex64, PoleError> {
    let mut acc = ONE;
    if upper >= lower {
        for k in lower..=upper {
            let b = profile.b(k);
            acc *= checked_div(Complex64::new(b, 0.0), b - w, b.max(w.norm()), "rate pole")?;
        }
    } else {
        for k in (upper + 1)..lower {
            let b = profile.b(k);
            acc *= (b - w) / b;
        }
    }
    Ok(acc)
}

/// The `sigma` term of the Bethe sum, without the `prod_k (-1/b_{x_k})`
/// prefactor:
///
/// `A_sigma(w) prod_j [ prod'_{k=y_{sigma(j)}}^{x_j} b_k/(b_k - w_{sigma(j)}) e^{-w_j t} ]`.
///
/// `x` may be any element of `Z^n`; `y` supplies the initial positions.
pub fn lambda_integrand(
    x: &[i64],
    y: &[i64],
    sigma: &Permutation,
    t: f64,
    w: &[Complex64],
    profile: &RateProfile,
) -> Result<Complex64, PoleError> {
    let n = x.len();
    assert_eq!(y.len(), n);
    assert_eq!(sigma.len(), n);
    assert_eq!(w.len(), n);
    let mut acc = a_sigma(sigma, w, profile.q())?;
    for j in 0..n {
        let m = sigma.apply(j);
        acc *= chain_factor(profile, y[m], x[j], w[m])? * (-w[j] * t).exp();
    }
    Ok(acc)
}

/// M x M table of a two-variable kernel over the node set.
#[derive(Debug, Clone)]
pub struct PairTable {
    m: usize,
    values: Vec<Complex64>,
}

impl PairTable {
    fn build(
        nodes: &[Complex64],
        f: impl Fn(Complex64, Complex64) -> Result<Complex64, PoleError>,
    ) -> Result<Self, PoleError> {
        let m = nodes.len();
        let mut values = Vec::with_capacity(m * m);
        for &a in nodes {
            for &b in nodes {
                values.push(f(a, b)?);
            }
        }
        Ok(Self { m, values })
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.m + j]
    }
}

/// [`lambda_integrand`] as a torus integrand: the rate chains are per-variable
/// factors, `A_sigma` is the coupling.
///
/// With `time_derivative` set, the coupling carries the extra factor
/// `-(w_1 + ... + w_n)`, which yields `d/dt` of the integral.
#[derive(Debug, Clone)]
pub struct LambdaIntegrand<'a> {
    x: Vec<i64>,
    y: Vec<i64>,
    sigma: &'a Permutation,
    t: f64,
    profile: &'a RateProfile,
    time_derivative: bool,
}

impl<'a> LambdaIntegrand<'a> {
    pub fn new(
        x: &[i64],
        y: &[i64],
        sigma: &'a Permutation,
        t: f64,
        profile: &'a RateProfile,
    ) -> Self {
        assert_eq!(x.len(), y.len());
        assert_eq!(x.len(), sigma.len());
        Self {
            x: x.to_vec(),
            y: y.to_vec(),
            sigma,
            t,
            profile,
            time_derivative: false,
        }
    }

    pub fn time_derivative(mut self, on: bool) -> Self {
        self.time_derivative = on;
        self
    }
}

impl TorusIntegrand for LambdaIntegrand<'_> {
    type Grid = PairTable;

    fn dim(&self) -> usize {
        self.x.len()
    }

    fn prepare(&self, nodes: &[Complex64]) -> Result<PairTable, PoleError> {
        let q = self.profile.q().value();
        // entry (i, j) = S with w_alpha = node i, w_beta = node j
        PairTable::build(nodes, |wa, wb| s_pair(wa, wb, q))
    }

    fn factor(&self, var: usize, w: Complex64) -> Result<Complex64, PoleError> {
        // variable w_m carries the chain of particle j = sigma^{-1}(m)
        let j = self.sigma.inverse_of(var);
        Ok(chain_factor(self.profile, self.y[var], self.x[j], w)? * (-w * self.t).exp())
    }

    #[inline]
    fn coupling(
        &self,
        grid: &PairTable,
        w: &[Complex64],
        idx: &[usize],
    ) -> Result<Complex64, PoleError> {
        let mut acc = ONE;
        for &(beta, alpha) in self.sigma.inversions() {
            acc *= grid.get(idx[alpha], idx[beta]);
        }
        if self.time_derivative {
            acc *= -w.iter().sum::<Complex64>();
        }
        Ok(acc)
    }
}

/// Integrand of the step-initial formula: `B(w) prod_j prod'_{k=0}^{x_j} b_k/(b_k - w_j) e^{-w_j t}`.
#[derive(Debug, Clone)]
pub struct StepIntegrand<'a> {
    x: Vec<i64>,
    t: f64,
    profile: &'a RateProfile,
}

impl<'a> StepIntegrand<'a> {
    pub fn new(x: &[i64], t: f64, profile: &'a RateProfile) -> Self {
        Self {
            x: x.to_vec(),
            t,
            profile,
        }
    }
}

impl TorusIntegrand for StepIntegrand<'_> {
    type Grid = PairTable;

    fn dim(&self) -> usize {
        self.x.len()
    }

    fn prepare(&self, nodes: &[Complex64]) -> Result<PairTable, PoleError> {
        let q = self.profile.q().value();
        PairTable::build(nodes, |wi, wj| b_pair(wi, wj, q))
    }

    fn factor(&self, var: usize, w: Complex64) -> Result<Complex64, PoleError> {
        Ok(chain_factor(self.profile, 0, self.x[var], w)? * (-w * self.t).exp())
    }

    #[inline]
    fn coupling(
        &self,
        grid: &PairTable,
        _w: &[Complex64],
        idx: &[usize],
    ) -> Result<Complex64, PoleError> {
        let n = idx.len();
        let mut acc = ONE;
        for i in 0..n {
            for j in (i + 1)..n {
                acc *= grid.get(idx[i], idx[j]);
            }
        }
        Ok(acc)
    }
}
