//! State model, rate profiles and q-deformed combinatorial primitives.
//!
//! Particle configurations are weakly decreasing integer tuples
//! `x_1 >= x_2 >= ... >= x_n`. Each lattice site carries a conductance
//! `a_i > 0`; the formulas mostly use the rescaled rate `b_i = a_i (1 - q)`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative threshold below which a denominator counts as vanishing.
pub const POLE_RTOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("q must lie strictly inside (0, 1), got {0}")]
    InvalidQ(f64),
    #[error("conductance must be positive and finite, got {value} (site {site:?})")]
    InvalidConductance { site: Option<i64>, value: f64 },
    #[error("state {0:?} is not weakly decreasing")]
    Unordered(Vec<i64>),
    #[error("state must hold at least one particle")]
    Empty,
    #[error("malformed rate file: {0}")]
    RateFile(String),
    #[error("malformed state: {0}")]
    Parse(String),
}

/// A denominator vanished (relative to the magnitude of its operands).
#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("pole in {context}: |denominator| = {denominator:e} at operand scale {scale:e}")]
pub struct PoleError {
    pub context: &'static str,
    pub denominator: f64,
    pub scale: f64,
}

/// Divides `num / den`, failing when `|den| < POLE_RTOL * scale`.
#[inline]
pub fn checked_div(
    num: Complex64,
    den: Complex64,
    scale: f64,
    context: &'static str,
) -> Result<Complex64, PoleError> {
    let d = den.norm();
    if !(d >= POLE_RTOL * scale) || d == 0.0 {
        return Err(PoleError {
            context,
            denominator: d,
            scale,
        });
    }
    Ok(num / den)
}

/// The deformation parameter, `0 < q < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct QParams(f64);

impl QParams {
    pub fn new(q: f64) -> Result<Self, ModelError> {
        if q > 0.0 && q < 1.0 {
            Ok(Self(q))
        } else {
            Err(ModelError::InvalidQ(q))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `[k]_q! = (1-q)(1-q^2)...(1-q^k) / (1-q)^k`, equal to 1 for `k = 0`.
pub fn q_factorial(k: usize, q: QParams) -> f64 {
    let q = q.value();
    let mut acc = 1.0;
    let mut qpow = 1.0;
    let mut bracket = 0.0;
    for _ in 0..k {
        // [j]_q = 1 + q + ... + q^{j-1}
        bracket += qpow;
        qpow *= q;
        acc *= bracket;
    }
    acc
}

/// Site-dependent conductances: a default value plus finitely many overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfile {
    default_a: f64,
    overrides: BTreeMap<i64, f64>,
    q: QParams,
}

fn check_conductance(site: Option<i64>, value: f64) -> Result<(), ModelError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidConductance { site, value })
    }
}

impl RateProfile {
    /// Homogeneous profile with `a_i = default_a` everywhere.
    pub fn homogeneous(q: QParams, default_a: f64) -> Result<Self, ModelError> {
        check_conductance(None, default_a)?;
        Ok(Self {
            default_a,
            overrides: BTreeMap::new(),
            q,
        })
    }

    pub fn new(
        q: QParams,
        default_a: f64,
        overrides: impl IntoIterator<Item = (i64, f64)>,
    ) -> Result<Self, ModelError> {
        let mut profile = Self::homogeneous(q, default_a)?;
        for (site, a) in overrides {
            check_conductance(Some(site), a)?;
            profile.overrides.insert(site, a);
        }
        Ok(profile)
    }

    pub fn with_override(mut self, site: i64, a: f64) -> Result<Self, ModelError> {
        check_conductance(Some(site), a)?;
        self.overrides.insert(site, a);
        Ok(self)
    }

    #[inline]
    pub fn q(&self) -> QParams {
        self.q
    }

    pub fn default_a(&self) -> f64 {
        self.default_a
    }

    pub fn overrides(&self) -> &BTreeMap<i64, f64> {
        &self.overrides
    }

    /// Conductance `a_site`.
    #[inline]
    pub fn a(&self, site: i64) -> f64 {
        self.overrides.get(&site).copied().unwrap_or(self.default_a)
    }

    /// Rescaled rate `b_site = a_site (1 - q)`.
    #[inline]
    pub fn b(&self, site: i64) -> f64 {
        self.a(site) * (1.0 - self.q.value())
    }

    /// Upper bound for `a_i` over the whole lattice.
    pub fn max_a(&self) -> f64 {
        self.overrides
            .values()
            .copied()
            .fold(self.default_a, f64::max)
    }

    /// Largest `b_k` over the inclusive site range `lo..=hi`.
    pub fn max_b_in(&self, lo: i64, hi: i64) -> f64 {
        assert!(lo <= hi, "empty site range {lo}..={hi}");
        let mut overridden = 0u64;
        let mut best_a = f64::NEG_INFINITY;
        for (_, &a) in self.overrides.range(lo..=hi) {
            overridden += 1;
            best_a = best_a.max(a);
        }
        if overridden < (hi - lo) as u64 + 1 {
            best_a = best_a.max(self.default_a);
        }
        best_a * (1.0 - self.q.value())
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let file: RateFile =
            serde_json::from_str(text).map_err(|e| ModelError::RateFile(e.to_string()))?;
        file.try_into()
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::RateFile(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&RateFile::from(self)).expect("rate file serializes")
    }
}

/// On-disk rate profile: `{"q": 0.5, "default_a": 1.0, "overrides": {"-2": 2.0}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateFile {
    pub q: f64,
    pub default_a: f64,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

impl TryFrom<RateFile> for RateProfile {
    type Error = ModelError;

    fn try_from(file: RateFile) -> Result<Self, ModelError> {
        let q = QParams::new(file.q)?;
        let mut overrides = Vec::with_capacity(file.overrides.len());
        for (key, a) in file.overrides {
            let site: i64 = key.trim().parse().map_err(|_| {
                ModelError::RateFile(format!("override key {key:?} is not a decimal integer"))
            })?;
            overrides.push((site, a));
        }
        RateProfile::new(q, file.default_a, overrides)
    }
}

impl From<&RateProfile> for RateFile {
    fn from(p: &RateProfile) -> Self {
        RateFile {
            q: p.q.value(),
            default_a: p.default_a,
            overrides: p
                .overrides
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }
}

/// `b_site = a_site (1 - q)`.
pub fn rate_b(profile: &RateProfile, site: i64) -> f64 {
    profile.b(site)
}

/// Particle positions `(x_1, ..., x_n)`.
///
/// [`StateVector::new`] only accepts weakly decreasing tuples. Residual
/// checks need the unnormalized amplitude on all of `Z^n`, which is what
/// [`StateVector::relaxed`] is for; such vectors are flagged and rejected by
/// probability-facing operations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateVector {
    coords: Vec<i64>,
    ordered: bool,
}

impl StateVector {
    pub fn new(coords: Vec<i64>) -> Result<Self, ModelError> {
        if coords.is_empty() {
            return Err(ModelError::Empty);
        }
        if !is_weakly_decreasing(&coords) {
            return Err(ModelError::Unordered(coords));
        }
        Ok(Self {
            coords,
            ordered: true,
        })
    }

    /// Arbitrary element of `Z^n`.
    pub fn relaxed(coords: Vec<i64>) -> Self {
        let ordered = !coords.is_empty() && is_weakly_decreasing(&coords);
        Self { coords, ordered }
    }

    /// `(0, ..., 0)` with `n` entries.
    pub fn step(n: usize) -> Self {
        Self {
            coords: vec![0; n],
            ordered: n > 0,
        }
    }

    #[inline]
    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Whether the coordinates are weakly decreasing.
    #[inline]
    pub fn is_ordered(&self) -> bool {
        self.ordered
    }

    pub fn require_ordered(&self) -> Result<(), ModelError> {
        if self.ordered {
            Ok(())
        } else if self.coords.is_empty() {
            Err(ModelError::Empty)
        } else {
            Err(ModelError::Unordered(self.coords.clone()))
        }
    }

    pub fn min_site(&self) -> i64 {
        self.coords.iter().copied().min().unwrap_or(0)
    }

    pub fn max_site(&self) -> i64 {
        self.coords.iter().copied().max().unwrap_or(0)
    }

    /// Copy with coordinate `k` (zero-based) shifted by `delta`; the result is relaxed.
    pub fn shifted(&self, k: usize, delta: i64) -> Self {
        let mut coords = self.coords.clone();
        coords[k] += delta;
        Self::relaxed(coords)
    }

    /// Translate every coordinate by `delta`.
    pub fn translated(&self, delta: i64) -> Self {
        Self {
            coords: self.coords.iter().map(|x| x + delta).collect(),
            ordered: self.ordered,
        }
    }

    /// Parses `"3,1,0"`; whitespace around entries is ignored.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let coords = text
            .split(',')
            .map(|s| {
                s.trim().parse::<i64>().map_err(|_| {
                    ModelError::Parse(format!("entry {s:?} is not an integer"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(coords)
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

fn is_weakly_decreasing(coords: &[i64]) -> bool {
    coords.windows(2).all(|w| w[0] >= w[1])
}

/// One stack: `height` particles sharing `site`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stack {
    pub site: i64,
    pub height: usize,
}

/// Stacks of a configuration, highest site first, with cumulative counts
/// `N_i = k_1 + ... + k_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StackDecomposition {
    entries: Vec<Stack>,
    cumulative: Vec<usize>,
}

impl StackDecomposition {
    pub fn from_entries(entries: Vec<Stack>) -> Result<Self, ModelError> {
        if entries.is_empty() {
            return Err(ModelError::Empty);
        }
        if entries.iter().any(|s| s.height == 0) || entries.windows(2).any(|w| w[0].site <= w[1].site)
        {
            return Err(ModelError::Unordered(
                entries.iter().map(|s| s.site).collect(),
            ));
        }
        let cumulative = entries
            .iter()
            .scan(0, |acc, s| {
                *acc += s.height;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            entries,
            cumulative,
        })
    }

    pub fn entries(&self) -> &[Stack] {
        &self.entries
    }

    pub fn cumulative(&self) -> &[usize] {
        &self.cumulative
    }

    /// Zero-based index of the particle on top of stack `i`.
    pub fn top_index(&self, i: usize) -> usize {
        if i == 0 {
            0
        } else {
            self.cumulative[i - 1]
        }
    }

    pub fn reconstruct(&self) -> StateVector {
        let coords = self
            .entries
            .iter()
            .flat_map(|s| std::iter::repeat(s.site).take(s.height))
            .collect();
        StateVector {
            coords,
            ordered: true,
        }
    }
}

/// Stack decomposition of an ordered state.
pub fn stacks(x: &StateVector) -> Result<StackDecomposition, ModelError> {
    x.require_ordered()?;
    Ok(stacks_of_ordered(x.coords()))
}

/// Stack decomposition of a slice already known to be weakly decreasing.
pub(crate) fn stacks_of_ordered(coords: &[i64]) -> StackDecomposition {
    let mut entries: Vec<Stack> = Vec::new();
    for &x in coords {
        match entries.last_mut() {
            Some(s) if s.site == x => s.height += 1,
            _ => entries.push(Stack { site: x, height: 1 }),
        }
    }
    let cumulative = entries
        .iter()
        .scan(0, |acc, s| {
            *acc += s.height;
            Some(*acc)
        })
        .collect();
    StackDecomposition {
        entries,
        cumulative,
    }
}

/// `W(X) = prod_i [k_i]_q!` over stack heights.
pub fn weight_w(x: &StateVector, q: QParams) -> Result<f64, ModelError> {
    let st = stacks(x)?;
    Ok(st
        .entries()
        .iter()
        .map(|s| q_factorial(s.height, q))
        .product())
}

/// Extended product over `k = lower..=upper`.
///
/// Ordinary product when `upper >= lower`, 1 when `upper == lower - 1`, and
/// `1 / prod_{k=upper+1}^{lower-1} f(k)` when `upper < lower - 1`.
pub fn prod_prime<F>(mut f: F, lower: i64, upper: i64) -> Result<Complex64, PoleError>
where
    F: FnMut(i64) -> Complex64,
{
    let one = Complex64::new(1.0, 0.0);
    if upper >= lower {
        Ok((lower..=upper).map(&mut f).fold(one, |acc, v| acc * v))
    } else if upper == lower - 1 {
        Ok(one)
    } else {
        let mut den = one;
        for k in (upper + 1)..lower {
            let v = f(k);
            if v.norm() == 0.0 || !v.is_finite() {
                return Err(PoleError {
                    context: "reciprocal extended product",
                    denominator: v.norm(),
                    scale: 0.0,
                });
            }
            den *= v;
        }
        Ok(one / den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(v: f64) -> QParams {
        QParams::new(v).unwrap()
    }

    #[test]
    fn q_params_reject_boundary() {
        assert!(QParams::new(0.0).is_err());
        assert!(QParams::new(1.0).is_err());
        assert!(QParams::new(f64::NAN).is_err());
        assert!(QParams::new(0.3).is_ok());
    }

    #[test]
    fn q_factorial_values() {
        assert_eq!(q_factorial(0, q(0.37)), 1.0);
        assert!((q_factorial(2, q(0.5)) - 1.5).abs() < 1e-15);
        // (1 + q)(1 + q + q^2) at q = 1/2
        let direct = (1.0 + 0.5) * (1.0 + 0.5 + 0.25);
        assert!((q_factorial(3, q(0.5)) - direct).abs() < 1e-15);
        assert!((q_factorial(3, q(0.5)) - 2.625).abs() < 1e-15);
    }

    #[test]
    fn q_factorial_matches_defining_product() {
        for &qv in &[0.1, 0.5, 0.9] {
            for k in 0..10 {
                let mut num = 1.0;
                for j in 1..=k {
                    num *= 1.0 - f64::powi(qv, j as i32);
                }
                let def = num / (1.0 - qv).powi(k as i32);
                assert!((q_factorial(k, q(qv)) - def).abs() < 1e-12 * def);
            }
        }
    }

    #[test]
    fn q_factorial_ratio() {
        let qq = q(0.63);
        for k in 1..12 {
            let r = q_factorial(k, qq) / q_factorial(k - 1, qq);
            let expect = (1.0 - 0.63f64.powi(k as i32)) / (1.0 - 0.63);
            assert!((r - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn weight_examples() {
        let qq = q(0.5);
        assert_eq!(weight_w(&StateVector::new(vec![3, 1, 0]).unwrap(), qq).unwrap(), 1.0);
        assert!((weight_w(&StateVector::new(vec![2, 2]).unwrap(), qq).unwrap() - 1.5).abs() < 1e-15);
        assert!(
            (weight_w(&StateVector::new(vec![5, 5, 5]).unwrap(), qq).unwrap() - 2.625).abs() < 1e-15
        );
        assert!(weight_w(&StateVector::relaxed(vec![0, 1]), qq).is_err());
    }

    #[test]
    fn stack_examples() {
        let st = stacks(&StateVector::new(vec![4, 4, 2, 0]).unwrap()).unwrap();
        assert_eq!(
            st.entries(),
            &[
                Stack { site: 4, height: 2 },
                Stack { site: 2, height: 1 },
                Stack { site: 0, height: 1 }
            ]
        );
        assert_eq!(st.cumulative(), &[2, 3, 4]);

        let st = stacks(&StateVector::new(vec![0, 0, 0]).unwrap()).unwrap();
        assert_eq!(st.entries(), &[Stack { site: 0, height: 3 }]);
        assert_eq!(st.cumulative(), &[3]);

        let st = stacks(&StateVector::new(vec![7, 3, 3, 3, 1, 1]).unwrap()).unwrap();
        let pairs: Vec<_> = st.entries().iter().map(|s| (s.site, s.height)).collect();
        assert_eq!(pairs, vec![(7, 1), (3, 3), (1, 2)]);
        assert_eq!(st.cumulative(), &[1, 4, 6]);
        assert_eq!(st.top_index(1), 1);
        assert_eq!(st.top_index(2), 4);
    }

    #[test]
    fn stacks_reject_unordered() {
        assert!(stacks(&StateVector::relaxed(vec![1, 2])).is_err());
        assert!(StateVector::new(vec![1, 2]).is_err());
        assert!(StateVector::new(vec![]).is_err());
        assert!(
            StackDecomposition::from_entries(vec![Stack { site: 1, height: 1 }, Stack { site: 1, height: 2 }])
                .is_err()
        );
    }

    #[test]
    fn prod_prime_branches() {
        let f = |k: i64| Complex64::new(k as f64 + 10.0, 0.0);
        assert_eq!(prod_prime(f, 0, -1).unwrap(), Complex64::new(1.0, 0.0));
        let v = prod_prime(f, 0, -3).unwrap();
        let expect = 1.0 / (f(-1).re * f(-2).re);
        assert!((v.re - expect).abs() < 1e-15 && v.im == 0.0);
        let id = |k: i64| Complex64::new(k as f64, 0.0);
        assert_eq!(prod_prime(id, 1, 2).unwrap(), Complex64::new(2.0, 0.0));
        // reciprocal branch hits f(0) = 0
        assert!(prod_prime(id, 2, -2).is_err());
    }

    #[test]
    fn rate_b_examples() {
        let p = RateProfile::homogeneous(q(0.5), 1.0).unwrap();
        assert_eq!(rate_b(&p, 17), 0.5);
        let p = RateProfile::homogeneous(q(0.25), 2.0).unwrap();
        assert_eq!(rate_b(&p, -4), 1.5);
        let p = RateProfile::homogeneous(q(0.5), 1.0)
            .unwrap()
            .with_override(3, 0.4)
            .unwrap();
        assert!((rate_b(&p, 3) - 0.2).abs() < 1e-16);
        assert_eq!(rate_b(&p, 2), 0.5);
    }

    #[test]
    fn profile_rejects_nonpositive() {
        assert!(RateProfile::homogeneous(q(0.5), 0.0).is_err());
        assert!(RateProfile::new(q(0.5), 1.0, [(2, -1.0)]).is_err());
    }

    #[test]
    fn rate_file_parsing() {
        let p = RateProfile::from_json_str(
            r#"{"q": 0.5, "default_a": 1.0, "overrides": {"-2": 2.0, "3": 0.5}}"#,
        )
        .unwrap();
        assert_eq!(p.q().value(), 0.5);
        assert_eq!(p.a(-2), 2.0);
        assert_eq!(p.a(3), 0.5);
        assert_eq!(p.a(0), 1.0);
        assert_eq!(p.max_a(), 2.0);
        let back = RateProfile::from_json_str(&p.to_json_string()).unwrap();
        assert_eq!(back, p);

        assert!(RateProfile::from_json_str(r#"{"q": 0.5, "default_a": 1.0, "overrides": {"x": 2.0}}"#).is_err());
        assert!(RateProfile::from_json_str(r#"{"q": 1.5, "default_a": 1.0}"#).is_err());
        assert!(RateProfile::from_json_str(r#"{"q": 0.5}"#).is_err());
        // overrides are optional
        assert!(RateProfile::from_json_str(r#"{"q": 0.5, "default_a": 1.0}"#).is_ok());
    }

    #[test]
    fn max_b_in_scans_overrides() {
        let p = RateProfile::new(q(0.5), 1.0, [(2, 4.0), (9, 10.0)]).unwrap();
        assert_eq!(p.max_b_in(-1, 2), 2.0);
        assert_eq!(p.max_b_in(-1, 1), 0.5);
        assert_eq!(p.max_b_in(3, 3), 0.5);
        assert_eq!(p.max_b_in(0, 9), 5.0);
        let all = RateProfile::new(q(0.5), 3.0, [(0, 1.0), (1, 1.2)]).unwrap();
        assert_eq!(all.max_b_in(0, 1), 0.6);
    }

    #[test]
    fn parse_states() {
        assert_eq!(StateVector::parse("3, 1,0").unwrap().coords(), &[3, 1, 0]);
        assert!(StateVector::parse("0,1").is_err());
        assert!(StateVector::parse("a").is_err());
    }

    proptest! {
        #[test]
        fn prod_prime_splicing(
            y in -5i64..=5, m in -5i64..=5, x in -5i64..=5,
            coeffs in proptest::collection::vec(0.5f64..2.0, 11),
            phases in proptest::collection::vec(0.0f64..6.28, 11),
        ) {
            let f = |k: i64| {
                let i = (k + 5) as usize;
                Complex64::from_polar(coeffs[i], phases[i])
            };
            let left = prod_prime(f, m + 1, x).unwrap() * prod_prime(f, y, m).unwrap();
            let right = prod_prime(f, y, x).unwrap();
            prop_assert!((left - right).norm() < 1e-10 * (1.0 + right.norm()));
        }

        #[test]
        fn stacks_roundtrip(mut coords in proptest::collection::vec(-6i64..6, 1..8)) {
            coords.sort_unstable_by(|a, b| b.cmp(a));
            let x = StateVector::new(coords).unwrap();
            let st = stacks(&x).unwrap();
            prop_assert_eq!(st.reconstruct(), x.clone());
            prop_assert_eq!(*st.cumulative().last().unwrap(), x.len());
            let again = StackDecomposition::from_entries(st.entries().to_vec()).unwrap();
            prop_assert_eq!(stacks(&again.reconstruct()).unwrap(), again);
        }

        #[test]
        fn weight_at_least_one(mut coords in proptest::collection::vec(-4i64..4, 1..7), qv in 0.05f64..0.95) {
            coords.sort_unstable_by(|a, b| b.cmp(a));
            let distinct = coords.windows(2).all(|w| w[0] != w[1]);
            let w = weight_w(&StateVector::new(coords).unwrap(), q(qv)).unwrap();
            prop_assert!(w >= 1.0);
            prop_assert_eq!(w == 1.0, distinct);
        }
    }
}
