//! Discrete input alphabets and their feasible probability polytopes.
//!
//! The optical alphabet is a set of nonnegative amplitudes under a peak,
//! a mean (optical power) cap and a second-moment (electrical power) cap.
//! The RF alphabet is a set of complex points under an electrical power cap.
//! Point positions are fixed; only the probabilities are optimized, so each
//! alphabet induces a polytope of admissible probability vectors.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;

/// Tolerance on `sum(p) = 1` and on the moment caps.
pub const PROB_TOL: f64 = 1e-9;

/// Scalar type of a channel input: real for intensity modulation, complex
/// for the RF link.
pub trait Symbol: Copy + Send + Sync + std::fmt::Debug + std::ops::Add<Output = Self> + 'static {
    /// Weight of the squared distance in the Gaussian log-likelihood,
    /// 1/2 for real noise of unit variance and 1 for circular complex noise.
    const EXP_WEIGHT: f64;
    /// Real-valued samples per second per hertz of bandwidth.
    const SAMPLES_PER_HZ: f64;

    fn zero() -> Self;
    fn diff(self, other: Self) -> Self;
    fn scaled(self, s: f64) -> Self;
    /// Squared magnitude.
    fn energy(self) -> f64;
    /// `Re(conj(self) · other)`.
    fn re_dot(self, other: Self) -> f64;
}

impl Symbol for f64 {
    const EXP_WEIGHT: f64 = 0.5;
    const SAMPLES_PER_HZ: f64 = 2.0;

    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn diff(self, other: Self) -> Self {
        self - other
    }
    #[inline]
    fn scaled(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn energy(self) -> f64 {
        self * self
    }
    #[inline]
    fn re_dot(self, other: Self) -> f64 {
        self * other
    }
}

impl Symbol for Complex64 {
    const EXP_WEIGHT: f64 = 1.0;
    const SAMPLES_PER_HZ: f64 = 1.0;

    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline]
    fn diff(self, other: Self) -> Self {
        self - other
    }
    #[inline]
    fn scaled(self, s: f64) -> Self {
        self * s
    }
    #[inline]
    fn energy(self) -> f64 {
        self.norm_sqr()
    }
    #[inline]
    fn re_dot(self, other: Self) -> f64 {
        self.re * other.re + self.im * other.im
    }
}

/// Common view of the two alphabets used by the rate and optimizer code.
pub trait Constellation: Clone + Send + Sync {
    type Point: Symbol;

    fn points(&self) -> &[Self::Point];
    fn probs(&self) -> &[f64];
    /// Cap on the average electrical power `Σ p |x|²`.
    fn elec_cap(&self) -> f64;
    /// Polytope of admissible probability vectors for these points.
    fn feasible_set(&self) -> Result<FeasibleSet>;
    /// Same points and caps with a new probability vector.
    fn with_probs(&self, probs: Vec<f64>) -> Result<Self>;

    fn order(&self) -> usize {
        self.points().len()
    }

    /// Average electrical power `Σ p |x|²`.
    fn elec_power(&self) -> f64 {
        self.points()
            .iter()
            .zip(self.probs())
            .map(|(x, p)| p * x.energy())
            .sum()
    }
}

fn check_probs(probs: &[f64], len: usize) -> Result<()> {
    if probs.len() != len {
        return Err(Error::Dimension {
            expected: len,
            got: probs.len(),
        });
    }
    if len == 0 {
        return Err(Error::Domain("constellation must have at least one point".into()));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < -PROB_TOL) {
        return Err(Error::Domain("probabilities must be finite and nonnegative".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::Domain(format!("probabilities sum to {total}, expected 1")));
    }
    Ok(())
}

fn cap_ok(value: f64, cap: f64) -> bool {
    value <= cap + PROB_TOL * cap.abs().max(1.0)
}

/// Nonnegative real amplitude alphabet with peak, mean and power caps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OpticalRepr", into = "OpticalRepr")]
pub struct OpticalConstellation {
    points: Vec<f64>,
    probs: Vec<f64>,
    peak: f64,
    mean_cap: f64,
    elec_cap: f64,
}

impl OpticalConstellation {
    pub fn new(points: Vec<f64>, probs: Vec<f64>, peak: f64, mean_cap: f64, elec_cap: f64) -> Result<Self> {
        check_probs(&probs, points.len())?;
        if !(peak > 0.0) || !peak.is_finite() {
            return Err(Error::Domain(format!("peak must be positive, got {peak}")));
        }
        if !(mean_cap >= 0.0) || !(elec_cap >= 0.0) {
            return Err(Error::Domain("power caps must be nonnegative".into()));
        }
        if let Some(x) = points
            .iter()
            .find(|x| !x.is_finite() || **x < 0.0 || **x > peak * (1.0 + 1e-12))
        {
            return Err(Error::Domain(format!("point {x} outside [0, {peak}]")));
        }
        let c = OpticalConstellation {
            points,
            probs,
            peak,
            mean_cap,
            elec_cap,
        };
        c.check_caps()?;
        Ok(c)
    }

    fn check_caps(&self) -> Result<()> {
        let mean = self.mean();
        if !cap_ok(mean, self.mean_cap) {
            return Err(Error::InfeasibleCaps(format!(
                "mean amplitude {mean} exceeds cap {}",
                self.mean_cap
            )));
        }
        let power = self.elec_power();
        if !cap_ok(power, self.elec_cap) {
            return Err(Error::InfeasibleCaps(format!(
                "electrical power {power} exceeds cap {}",
                self.elec_cap
            )));
        }
        Ok(())
    }

    pub fn peak(&self) -> f64 {
        self.peak
    }

    pub fn mean_cap(&self) -> f64 {
        self.mean_cap
    }

    /// Average amplitude `Σ p x`.
    pub fn mean(&self) -> f64 {
        self.points.iter().zip(&self.probs).map(|(x, p)| p * x).sum()
    }

    /// `(mean, electrical power)`.
    pub fn moments(&self) -> (f64, f64) {
        (self.mean(), self.elec_power())
    }
}

impl Constellation for OpticalConstellation {
    type Point = f64;

    fn points(&self) -> &[f64] {
        &self.points
    }
    fn probs(&self) -> &[f64] {
        &self.probs
    }
    fn elec_cap(&self) -> f64 {
        self.elec_cap
    }
    fn feasible_set(&self) -> Result<FeasibleSet> {
        FeasibleSet::optical(&self.points, self.mean_cap, self.elec_cap)
    }
    fn with_probs(&self, probs: Vec<f64>) -> Result<Self> {
        OpticalConstellation::new(self.points.clone(), probs, self.peak, self.mean_cap, self.elec_cap)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpticalRepr {
    symbols: Vec<(f64, f64)>,
    peak: f64,
    mean_cap: f64,
    elec_cap: f64,
}

impl From<OpticalConstellation> for OpticalRepr {
    fn from(c: OpticalConstellation) -> Self {
        OpticalRepr {
            symbols: c.points.into_iter().zip(c.probs).collect(),
            peak: c.peak,
            mean_cap: c.mean_cap,
            elec_cap: c.elec_cap,
        }
    }
}

impl TryFrom<OpticalRepr> for OpticalConstellation {
    type Error = Error;

    fn try_from(r: OpticalRepr) -> Result<Self> {
        let (points, probs) = r.symbols.into_iter().unzip();
        OpticalConstellation::new(points, probs, r.peak, r.mean_cap, r.elec_cap)
    }
}

/// Complex alphabet with an electrical power cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RfRepr", into = "RfRepr")]
pub struct RFConstellation {
    points: Vec<Complex64>,
    probs: Vec<f64>,
    elec_cap: f64,
}

impl RFConstellation {
    pub fn new(points: Vec<Complex64>, probs: Vec<f64>, elec_cap: f64) -> Result<Self> {
        check_probs(&probs, points.len())?;
        if !(elec_cap >= 0.0) {
            return Err(Error::Domain("power cap must be nonnegative".into()));
        }
        if points.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::Domain("points must be finite".into()));
        }
        let c = RFConstellation {
            points,
            probs,
            elec_cap,
        };
        let power = c.elec_power();
        if !cap_ok(power, elec_cap) {
            return Err(Error::InfeasibleCaps(format!(
                "electrical power {power} exceeds cap {elec_cap}"
            )));
        }
        Ok(c)
    }

    /// `(0, electrical power)`; the mean is not constrained on this link.
    pub fn moments(&self) -> (f64, f64) {
        (0.0, self.elec_power())
    }
}

impl Constellation for RFConstellation {
    type Point = Complex64;

    fn points(&self) -> &[Complex64] {
        &self.points
    }
    fn probs(&self) -> &[f64] {
        &self.probs
    }
    fn elec_cap(&self) -> f64 {
        self.elec_cap
    }
    fn feasible_set(&self) -> Result<FeasibleSet> {
        FeasibleSet::rf(&self.points, self.elec_cap)
    }
    fn with_probs(&self, probs: Vec<f64>) -> Result<Self> {
        RFConstellation::new(self.points.clone(), probs, self.elec_cap)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RfRepr {
    symbols: Vec<([f64; 2], f64)>,
    elec_cap: f64,
}

impl From<RFConstellation> for RfRepr {
    fn from(c: RFConstellation) -> Self {
        RfRepr {
            symbols: c.points.into_iter().map(|x| [x.re, x.im]).zip(c.probs).collect(),
            elec_cap: c.elec_cap,
        }
    }
}

impl TryFrom<RfRepr> for RFConstellation {
    type Error = Error;

    fn try_from(r: RfRepr) -> Result<Self> {
        let (points, probs) = r
            .symbols
            .into_iter()
            .map(|([re, im], p)| (Complex64::new(re, im), p))
            .unzip();
        RFConstellation::new(points, probs, r.elec_cap)
    }
}

/// Equispaced `M`-PAM on `[0, peak]` with equal probabilities.
pub fn make_pam(order: usize, peak: f64, mean_cap: f64, elec_cap: f64) -> Result<OpticalConstellation> {
    if order == 0 {
        return Err(Error::UnsupportedOrder(0));
    }
    let points = if order == 1 {
        vec![0.0]
    } else {
        let step = peak / (order - 1) as f64;
        (0..order).map(|k| k as f64 * step).collect()
    };
    let probs = vec![1.0 / order as f64; order];
    OpticalConstellation::new(points, probs, peak, mean_cap, elec_cap)
}

/// Square `N`-QAM scaled so that the equiprobable average power equals `elec_cap`.
///
/// `N = 1` is the single point at the origin.
pub fn make_qam(order: usize, elec_cap: f64) -> Result<RFConstellation> {
    let side = (order as f64).sqrt().round() as usize;
    if order == 0 || side * side != order {
        return Err(Error::UnsupportedOrder(order));
    }
    if !(elec_cap >= 0.0) {
        return Err(Error::Domain("power cap must be nonnegative".into()));
    }
    let probs = vec![1.0 / order as f64; order];
    if order == 1 {
        return RFConstellation::new(vec![Complex64::new(0.0, 0.0)], probs, elec_cap);
    }
    // unit-spacing grid {±1, ±3, ...} has average power 2(L² − 1)/3
    let l = side as f64;
    let scale = (elec_cap / (2.0 * (l * l - 1.0) / 3.0)).sqrt();
    let level = |i: usize| (2.0 * i as f64 - (l - 1.0)) * scale;
    let points = (0..side)
        .flat_map(|i| (0..side).map(move |j| Complex64::new(level(i), level(j))))
        .collect();
    RFConstellation::new(points, probs, elec_cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pam_examples() {
        let c = make_pam(2, 2.0, 10.0, 10.0).unwrap();
        assert_eq!(c.points(), &[0.0, 2.0]);
        assert_eq!(c.probs(), &[0.5, 0.5]);
        assert_eq!(c.moments(), (1.0, 2.0));

        let c = make_pam(1, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(c.points(), &[0.0]);

        // {0, 8/7, ..., 8}: mean 4, power 64·140/(49·8) = 22.857
        let c = make_pam(8, 8.0, 4.0, 24.0).unwrap();
        let (mean, power) = c.moments();
        assert_relative_eq!(mean, 4.0, epsilon = 1e-12);
        let expected: f64 = (0..8).map(|k| (8.0 * k as f64 / 7.0).powi(2)).sum::<f64>() / 8.0;
        assert_relative_eq!(power, expected, epsilon = 1e-12);
        assert!(power <= 24.0);

        assert!(matches!(make_pam(8, 8.0, 3.9, 24.0), Err(Error::InfeasibleCaps(_))));
        assert!(matches!(make_pam(8, 8.0, 4.0, 20.0), Err(Error::InfeasibleCaps(_))));
        assert!(make_pam(0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn qam_examples() {
        let c = make_qam(4, 1.0).unwrap();
        for x in c.points() {
            assert_relative_eq!(x.re.abs(), 0.5f64.sqrt(), epsilon = 1e-12);
            assert_relative_eq!(x.im.abs(), 0.5f64.sqrt(), epsilon = 1e-12);
        }
        let c = make_qam(1, 1.0).unwrap();
        assert_eq!(c.points(), &[Complex64::new(0.0, 0.0)]);

        let c = make_qam(16, 1.0).unwrap();
        assert_relative_eq!(c.elec_power(), 1.0, epsilon = 1e-12);
        let s = 1.0 / 10f64.sqrt();
        let mut re: Vec<f64> = c.points().iter().map(|x| x.re / s).collect();
        re.sort_by(f64::total_cmp);
        re.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        assert_eq!(re.len(), 4);
        for (got, want) in re.iter().zip([-3.0, -1.0, 1.0, 3.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        assert_eq!(make_qam(8, 1.0), Err(Error::UnsupportedOrder(8)));
    }

    #[test]
    fn moments_of_single_point() {
        let c = OpticalConstellation::new(vec![3.0], vec![1.0], 3.0, 3.0, 9.0).unwrap();
        assert_eq!(c.moments(), (3.0, 9.0));
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(OpticalConstellation::new(vec![0.0, 1.0], vec![0.6, 0.6], 1.0, 1.0, 1.0).is_err());
        assert!(OpticalConstellation::new(vec![0.0, 1.0], vec![1.0], 1.0, 1.0, 1.0).is_err());
        assert!(OpticalConstellation::new(vec![0.0, 2.0], vec![0.5, 0.5], 1.0, 5.0, 5.0).is_err());
    }

    #[test]
    fn json_pairs() {
        let c = make_qam(4, 2.0).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"symbols\":[[["));
        let back: RFConstellation = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);

        let o = make_pam(4, 1.0, 0.5, 1.0).unwrap();
        let v = serde_json::to_value(&o).unwrap();
        assert_eq!(v["symbols"][3], serde_json::json!([1.0, 0.25]));
        let back: OpticalConstellation = serde_json::from_value(v).unwrap();
        assert_eq!(back, o);
    }
}
