//! Expectations over standard Gaussian noise.
//!
//! A [`NoiseRule`] is a list of noise samples with weights: Gauss–Hermite
//! nodes, a truncated Simpson grid, or seeded Monte Carlo draws. Complex
//! rules are tensor products of two real rules (or paired real draws), with
//! `W = (T₁ + iT₂)/√2` so that `E|W|² = 1`.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::hermite::GaussHermite;
use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constellation::Symbol;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadMethod {
    GaussHermite,
    TruncatedGrid,
    MonteCarlo,
}

/// How Gaussian expectations are evaluated.
///
/// `points` is the rule order per real dimension for the deterministic
/// rules and the number of draws for Monte Carlo. `truncation` is the
/// half-width of the grid in standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub method: QuadMethod,
    pub points: usize,
    pub truncation: f64,
    pub seed: u64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            method: QuadMethod::GaussHermite,
            points: 48,
            truncation: 8.0,
            seed: 0,
        }
    }
}

impl QuadratureSpec {
    pub fn gauss_hermite(points: usize) -> Self {
        QuadratureSpec {
            method: QuadMethod::GaussHermite,
            points,
            ..Default::default()
        }
    }

    pub fn truncated_grid(points: usize, truncation: f64) -> Self {
        QuadratureSpec {
            method: QuadMethod::TruncatedGrid,
            points,
            truncation,
            seed: 0,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        QuadratureSpec {
            method: QuadMethod::MonteCarlo,
            points: samples,
            seed,
            ..Default::default()
        }
    }

    /// Same rule with a different truncation; a no-op for the other methods.
    pub fn with_truncation(self, truncation: f64) -> Self {
        QuadratureSpec { truncation, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points == 0 {
            return Err(Error::Domain("quadrature needs at least one point".into()));
        }
        if !(self.truncation > 0.0) || !self.truncation.is_finite() {
            return Err(Error::Domain(format!(
                "truncation must be positive, got {}",
                self.truncation
            )));
        }
        Ok(())
    }

    /// Advisory note when the rule is coarser than recommended.
    pub fn warning(&self) -> Option<String> {
        match self.method {
            QuadMethod::MonteCarlo => None,
            _ if self.points < 8 => Some(format!(
                "quadrature order {} is below the recommended minimum of 8",
                self.points
            )),
            QuadMethod::TruncatedGrid if self.truncation < 4.0 => Some(format!(
                "truncation {}σ is below the recommended minimum of 4σ",
                self.truncation
            )),
            _ => None,
        }
    }

    pub fn is_random(&self) -> bool {
        self.method == QuadMethod::MonteCarlo
    }
}

/// Value of an expectation and its Monte Carlo standard error (zero for
/// deterministic rules).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

/// Weighted noise samples for one symbol type.
#[derive(Debug, Clone)]
pub struct NoiseRule<S> {
    nodes: Vec<S>,
    weights: Vec<f64>,
    random: bool,
}

/// Symbol types with a Gaussian noise rule.
pub trait NoiseDomain: Symbol {
    fn noise_rule(spec: &QuadratureSpec) -> Result<NoiseRule<Self>>;
}

impl NoiseDomain for f64 {
    fn noise_rule(spec: &QuadratureSpec) -> Result<NoiseRule<f64>> {
        spec.validate()?;
        if spec.method == QuadMethod::MonteCarlo {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let nodes: Vec<f64> = (0..spec.points).map(|_| StandardNormal.sample(&mut rng)).collect();
            let weights = vec![1.0 / spec.points as f64; spec.points];
            return Ok(NoiseRule {
                nodes,
                weights,
                random: true,
            });
        }
        let (nodes, weights) = real_rule(spec);
        Ok(NoiseRule {
            nodes,
            weights,
            random: false,
        })
    }
}

impl NoiseDomain for Complex64 {
    fn noise_rule(spec: &QuadratureSpec) -> Result<NoiseRule<Complex64>> {
        spec.validate()?;
        if spec.method == QuadMethod::MonteCarlo {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let nodes: Vec<Complex64> = (0..spec.points)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im) * FRAC_1_SQRT_2
                })
                .collect();
            let weights = vec![1.0 / spec.points as f64; spec.points];
            return Ok(NoiseRule {
                nodes,
                weights,
                random: true,
            });
        }
        let (t, w) = real_rule(spec);
        let mut nodes = Vec::with_capacity(t.len() * t.len());
        let mut weights = Vec::with_capacity(t.len() * t.len());
        for (ta, wa) in t.iter().zip(w.iter()) {
            for (tb, wb) in t.iter().zip(w.iter()) {
                nodes.push(Complex64::new(*ta, *tb) * FRAC_1_SQRT_2);
                weights.push(wa * wb);
            }
        }
        Ok(NoiseRule {
            nodes,
            weights,
            random: false,
        })
    }
}

/// Nodes and weights for `E f(T)`, `T ~ N(0, 1)`.
fn real_rule(spec: &QuadratureSpec) -> (Vec<f64>, Vec<f64>) {
    match spec.method {
        QuadMethod::GaussHermite => {
            let table = hermite_table(spec.points);
            (table.0.clone(), table.1.clone())
        }
        QuadMethod::TruncatedGrid => simpson_rule(spec.points, spec.truncation),
        QuadMethod::MonteCarlo => unreachable!("handled by the caller"),
    }
}

type Table = Arc<(Vec<f64>, Vec<f64>)>;

/// Gauss–Hermite nodes rescaled to the standard normal density, cached per order.
fn hermite_table(order: usize) -> Table {
    static CACHE: OnceLock<Mutex<HashMap<usize, Table>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().expect("cache poisoned").get(&order) {
        return Arc::clone(t);
    }
    let rule = GaussHermite::new(NonZeroUsize::new(order).expect("order validated"));
    let (nodes, weights): (Vec<f64>, Vec<f64>) = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (x * std::f64::consts::SQRT_2, w / PI.sqrt()))
        .unzip();
    let table = Arc::new((nodes, weights));
    cache.lock().expect("cache poisoned").insert(order, Arc::clone(&table));
    table
}

/// Composite Simpson rule on `[-τ, τ]` against the normal density; the
/// tail mass outside the interval is dropped.
fn simpson_rule(intervals: usize, tau: f64) -> (Vec<f64>, Vec<f64>) {
    let n = intervals.max(2).next_multiple_of(2);
    let h = 2.0 * tau / n as f64;
    let density = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    (0..=n)
        .map(|i| {
            let t = -tau + i as f64 * h;
            let coef = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (t, coef * h / 3.0 * density(t))
        })
        .unzip()
}

impl<S: Symbol> NoiseRule<S> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[S] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E f(noise)`. Nodes are evaluated in parallel; the reduction runs in
    /// node order so the result does not depend on the thread count.
    pub fn expect<F>(&self, f: F) -> Estimate
    where
        F: Fn(S) -> f64 + Sync,
    {
        let values: Vec<f64> = self.nodes.par_iter().map(|&n| f(n)).collect();
        let value: f64 = values.iter().zip(&self.weights).map(|(v, w)| v * w).sum();
        let std_err = if self.random && values.len() > 1 {
            let n = values.len() as f64;
            let var = values.iter().map(|v| (v - value).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Estimate { value, std_err }
    }

    /// Component-wise `E f(noise)` for a vector-valued `f` of length `dim`.
    pub fn expect_vec<F>(&self, dim: usize, f: F) -> Vec<f64>
    where
        F: Fn(S, &mut [f64]) + Sync,
    {
        let values: Vec<Vec<f64>> = self
            .nodes
            .par_iter()
            .map(|&n| {
                let mut out = vec![0.0; dim];
                f(n, &mut out);
                out
            })
            .collect();
        let mut acc = vec![0.0; dim];
        for (v, w) in values.iter().zip(&self.weights) {
            for (a, x) in acc.iter_mut().zip(v) {
                *a += w * x;
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hermite_moments() {
        let rule = f64::noise_rule(&QuadratureSpec::default()).unwrap();
        assert_relative_eq!(rule.expect(|_| 1.0).value, 1.0, epsilon = 1e-13);
        assert_relative_eq!(rule.expect(|t| t * t).value, 1.0, epsilon = 1e-12);
        assert_relative_eq!(rule.expect(|t| t.powi(4)).value, 3.0, epsilon = 1e-11);
        // E cos(T) = e^{-1/2}
        assert_relative_eq!(rule.expect(f64::cos).value, (-0.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn grid_moments() {
        let rule = f64::noise_rule(&QuadratureSpec::truncated_grid(400, 8.0)).unwrap();
        assert_relative_eq!(rule.expect(|_| 1.0).value, 1.0, epsilon = 1e-10);
        assert_relative_eq!(rule.expect(|t| t * t).value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn complex_moments() {
        let rule = Complex64::noise_rule(&QuadratureSpec::gauss_hermite(16)).unwrap();
        assert_eq!(rule.len(), 256);
        assert_relative_eq!(rule.expect(|w| w.norm_sqr()).value, 1.0, epsilon = 1e-12);
        assert_relative_eq!(rule.expect(|w| w.re * w.im).value, 0.0, epsilon = 1e-14);
        // E|W|⁴ = 2 for circular complex Gaussian
        assert_relative_eq!(rule.expect(|w| w.norm_sqr().powi(2)).value, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn monte_carlo_is_seeded() {
        let spec = QuadratureSpec::monte_carlo(20_000, 5);
        let a = f64::noise_rule(&spec).unwrap().expect(|t| t * t);
        let b = f64::noise_rule(&spec).unwrap().expect(|t| t * t);
        assert_eq!(a, b);
        assert!(a.std_err > 0.0);
        assert!((a.value - 1.0).abs() < 4.0 * a.std_err);

        let c = Complex64::noise_rule(&spec).unwrap().expect(|w| w.norm_sqr());
        assert!((c.value - 1.0).abs() < 4.0 * c.std_err);
    }

    #[test]
    fn warnings_for_coarse_rules() {
        assert!(QuadratureSpec::gauss_hermite(4).warning().is_some());
        assert!(QuadratureSpec::truncated_grid(64, 3.0).warning().is_some());
        assert!(QuadratureSpec::default().warning().is_none());
        assert!(QuadratureSpec::gauss_hermite(0).validate().is_err());
    }

    #[test]
    fn vector_expectation_matches_scalar() {
        let rule = f64::noise_rule(&QuadratureSpec::default()).unwrap();
        let v = rule.expect_vec(2, |t, out| {
            out[0] = t * t;
            out[1] = t.cos();
        });
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(v[1], rule.expect(f64::cos).value, epsilon = 1e-15);
    }
}
