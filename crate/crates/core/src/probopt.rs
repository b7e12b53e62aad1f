//! Optimizing the input probabilities of one link for fixed precoder power.
//!
//! Both optimizers minimize a smooth function over a [`FeasibleSet`] and
//! are generic over [`SimplexObjective`]:
//!
//! * [`pgd`] is projected gradient descent with Armijo backtracking along
//!   the projection arc, used with the exact (quadrature) rate;
//! * [`frank_wolfe`] moves toward the polytope vertex returned by the
//!   linear oracle, used with the closed-form lower bound.
//!
//! Objectives work in per-channel-use units (bits); [`SimplexObjective::scale`]
//! converts them to bits/s.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, Symbol};
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::quadrature::{NoiseDomain, NoiseRule, QuadMethod, QuadratureSpec};
use crate::rate::{sq_dists, Kernel, LinkPhysics};

/// A smooth function of a probability vector, to be minimized.
pub trait SimplexObjective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, p: &[f64]) -> f64;
    fn gradient(&self, p: &[f64]) -> Vec<f64>;
    /// Multiplier converting values to bits/s.
    fn scale(&self) -> f64;
}

/// Negative mutual information (bits per channel use) of a link at fixed
/// precoder power, evaluated by quadrature.
pub struct ExactRateObjective<S> {
    points: Vec<S>,
    distance_scale: f64,
    value_rule: NoiseRule<S>,
    grad_rule: NoiseRule<S>,
    scale: f64,
}

impl<S: NoiseDomain> ExactRateObjective<S> {
    /// `truncation` gives separate truncations for the value and gradient
    /// rules; they only matter for the truncated-grid method.
    pub fn new(
        points: &[S],
        q_sq: f64,
        phys: &LinkPhysics,
        quad: &QuadratureSpec,
        truncation: (f64, f64),
    ) -> Result<Self> {
        phys.validate()?;
        let (value_spec, grad_spec) = match quad.method {
            QuadMethod::TruncatedGrid => (quad.with_truncation(truncation.0), quad.with_truncation(truncation.1)),
            _ => (*quad, *quad),
        };
        Ok(ExactRateObjective {
            points: points.to_vec(),
            distance_scale: phys.distance_scale(q_sq.max(0.0)),
            value_rule: S::noise_rule(&value_spec)?,
            grad_rule: S::noise_rule(&grad_spec)?,
            scale: S::SAMPLES_PER_HZ * phys.bandwidth,
        })
    }
}

impl<S: NoiseDomain> SimplexObjective for ExactRateObjective<S> {
    fn dim(&self) -> usize {
        self.points.len()
    }

    fn value(&self, p: &[f64]) -> f64 {
        let kernel = Kernel::new(&self.points, p, self.distance_scale);
        self.value_rule.expect(|n| kernel.neg_info_at(n)).value / LN_2
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let kernel = Kernel::new(&self.points, p, self.distance_scale);
        let mut g = self
            .grad_rule
            .expect_vec(p.len(), |n, out| kernel.neg_info_grad_at(n, out));
        for v in &mut g {
            *v /= LN_2;
        }
        g
    }

    fn scale(&self) -> f64 {
        self.scale
    }
}

/// `Σ_k p_k log2 Σ_m p_m exp(−t·|x_k − x_m|²)`, the probability-dependent
/// part of a link's closed-form lower bound (with `t = w·ρ/2`).
pub struct LowerBoundObjective {
    dists: Vec<f64>,
    t: f64,
    dim: usize,
    scale: f64,
}

impl LowerBoundObjective {
    pub fn new<S: Symbol>(points: &[S], q_sq: f64, phys: &LinkPhysics) -> Result<Self> {
        phys.validate()?;
        Ok(LowerBoundObjective {
            dists: sq_dists(points),
            t: 0.5 * S::EXP_WEIGHT * q_sq.max(0.0) * phys.unit_snr(),
            dim: points.len(),
            scale: S::SAMPLES_PER_HZ * phys.bandwidth,
        })
    }

    /// `ln Σ_m p_m exp(−t d_im)` for every row `i`.
    fn log_sums(&self, p: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let row = &self.dists[i * self.dim..(i + 1) * self.dim];
                let terms = p
                    .iter()
                    .zip(row)
                    .filter(|(pm, _)| **pm > 0.0)
                    .map(|(pm, d)| pm.ln() - self.t * d);
                log_sum_exp(terms)
            })
            .collect()
    }
}

impl SimplexObjective for LowerBoundObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, p: &[f64]) -> f64 {
        let logs = self.log_sums(p);
        p.iter()
            .zip(&logs)
            .filter(|(pk, _)| **pk > 0.0)
            .map(|(pk, l)| pk * l)
            .sum::<f64>()
            / LN_2
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let logs = self.log_sums(p);
        (0..self.dim)
            .map(|i| {
                let cross: f64 = (0..self.dim)
                    .filter(|&k| p[k] > 0.0)
                    .map(|k| p[k] * (-self.t * self.dists[k * self.dim + i] - logs[k]).exp())
                    .sum();
                (logs[i] + cross) / LN_2
            })
            .collect()
    }

    fn scale(&self) -> f64 {
        self.scale
    }
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let peak = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if peak == f64::NEG_INFINITY {
        return peak;
    }
    peak + terms.map(|v| (v - peak).exp()).sum::<f64>().ln()
}

/// Settings of the projected gradient method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PGDConfig {
    /// Truncation (in σ) of the objective rule on the truncated grid.
    pub truncation_obj: f64,
    /// Truncation (in σ) of the gradient rule on the truncated grid.
    pub truncation_grad: f64,
    /// Backtracking factor β.
    pub armijo_beta: f64,
    /// Sufficient-decrease fraction c.
    pub armijo_c: f64,
    pub initial_step: f64,
    /// Stop once `‖p[i] − p[i−1]‖ ≤ stop_tol`.
    pub stop_tol: f64,
    /// Also stop once an accepted step lowers the objective by at most
    /// this fraction of its magnitude (flat valleys).
    #[serde(default = "default_stall_tol")]
    pub stall_tol: f64,
    pub max_iters: usize,
}

fn default_stall_tol() -> f64 {
    1e-10
}

impl Default for PGDConfig {
    fn default() -> Self {
        PGDConfig {
            truncation_obj: 8.0,
            truncation_grad: 8.0,
            armijo_beta: 0.5,
            armijo_c: 1e-4,
            initial_step: 1.0,
            stop_tol: 1e-7,
            stall_tol: default_stall_tol(),
            max_iters: 500,
        }
    }
}

impl PGDConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.truncation_obj > 0.0
            && self.truncation_grad > 0.0
            && self.armijo_beta > 0.0
            && self.armijo_beta < 1.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.initial_step > 0.0
            && self.stop_tol > 0.0
            && self.stall_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid PGD settings: {self:?}")))
        }
    }
}

/// Settings of the Frank–Wolfe method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FWConfig {
    /// Stop once `|∇fᵀd| ≤ stop_tol` (bits per channel use).
    pub stop_tol: f64,
    pub max_iters: usize,
    /// Width at which the step-size bisection stops.
    pub line_search_tol: f64,
}

impl Default for FWConfig {
    fn default() -> Self {
        FWConfig {
            stop_tol: 1e-6,
            max_iters: 5000,
            line_search_tol: 1e-6,
        }
    }
}

impl FWConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stop_tol > 0.0 && self.line_search_tol > 0.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid Frank-Wolfe settings: {self:?}")))
        }
    }
}

/// One optimizer iteration. `objective` is in bits/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iter: usize,
    pub objective: f64,
    pub step: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbResult {
    pub probs: Vec<f64>,
    /// Starting point at `iter = 0`, then one entry per accepted step.
    pub trace: Vec<TracePoint>,
    pub converged: bool,
}

impl ProbResult {
    fn trivial(dim: usize) -> Self {
        ProbResult {
            probs: vec![1.0; dim],
            trace: Vec::new(),
            converged: true,
        }
    }
}

/// Trace as CSV with a schema comment line.
pub fn trace_csv(trace: &[TracePoint]) -> String {
    let mut out = String::from("# schema=1\niter,objective,step,delta_p\n");
    for t in trace {
        out.push_str(&format!("{},{},{},{}\n", t.iter, t.objective, t.step, t.delta));
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Largest step relative to `initial_step` reachable by the warm start.
const MAX_STEP_GROWTH: f64 = 1e6;

/// Projected gradient descent from `start` (projected into `set` first).
pub fn pgd<O: SimplexObjective>(obj: &O, set: &FeasibleSet, start: &[f64], cfg: &PGDConfig) -> Result<ProbResult> {
    cfg.validate()?;
    check_dim(obj.dim(), set)?;
    if obj.dim() == 1 {
        return Ok(ProbResult::trivial(1));
    }
    let mut p = set.project(start)?;
    let mut f = obj.value(&p);
    let mut trace = vec![TracePoint {
        iter: 0,
        objective: obj.scale() * f,
        step: 0.0,
        delta: 0.0,
    }];
    let mut step = cfg.initial_step;
    for iter in 1..=cfg.max_iters {
        let g = obj.gradient(&p);
        // try a longer step than last time before backtracking
        let mut t = (step / cfg.armijo_beta).min(MAX_STEP_GROWTH * cfg.initial_step);
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = p.iter().zip(&g).map(|(pi, gi)| pi - t * gi).collect();
            let cand = set.project(&trial)?;
            let decrease = dot(&g, &cand.iter().zip(&p).map(|(a, b)| a - b).collect::<Vec<_>>());
            if norm_diff(&cand, &p) == 0.0 {
                accepted = Some((cand, f, t));
                break;
            }
            let fc = obj.value(&cand);
            if fc <= f + cfg.armijo_c * decrease {
                accepted = Some((cand, fc, t));
                break;
            }
            t *= cfg.armijo_beta;
        }
        let Some((next, fnext, t)) = accepted else {
            // no descent even with a tiny step: p is stationary to working precision
            return Ok(ProbResult {
                probs: p,
                trace,
                converged: true,
            });
        };
        step = t;
        let delta = norm_diff(&next, &p);
        let stalled = f - fnext <= cfg.stall_tol * f.abs();
        p = next;
        f = fnext;
        trace.push(TracePoint {
            iter,
            objective: obj.scale() * f,
            step: t,
            delta,
        });
        if delta <= cfg.stop_tol || stalled {
            return Ok(ProbResult {
                probs: p,
                trace,
                converged: true,
            });
        }
    }
    Ok(ProbResult {
        probs: p,
        trace,
        converged: false,
    })
}

/// Vertex of `set` minimizing `gradᵀp` (lowest index on ties).
pub fn fw_lp_step(grad: &[f64], set: &FeasibleSet) -> Result<Vec<f64>> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Domain("gradient must be finite".into()));
    }
    set.lp_vertex(grad)
}

/// Frank–Wolfe from `start` (projected into `set` first).
pub fn frank_wolfe<O: SimplexObjective>(
    obj: &O,
    set: &FeasibleSet,
    start: &[f64],
    cfg: &FWConfig,
) -> Result<ProbResult> {
    cfg.validate()?;
    check_dim(obj.dim(), set)?;
    if obj.dim() == 1 {
        return Ok(ProbResult::trivial(1));
    }
    let mut p = set.project(start)?;
    let mut f = obj.value(&p);
    let mut trace = vec![TracePoint {
        iter: 0,
        objective: obj.scale() * f,
        step: 0.0,
        delta: 0.0,
    }];
    let along = |p: &[f64], d: &[f64], lambda: f64| -> Vec<f64> {
        p.iter().zip(d).map(|(a, b)| (a + lambda * b).max(0.0)).collect()
    };
    for iter in 1..=cfg.max_iters {
        let g = obj.gradient(&p);
        let v = fw_lp_step(&g, set)?;
        let d: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
        let gap = dot(&g, &d);
        if gap.abs() <= cfg.stop_tol {
            return Ok(ProbResult {
                probs: p,
                trace,
                converged: true,
            });
        }
        let slope = |lambda: f64| dot(&obj.gradient(&along(&p, &d, lambda)), &d);
        let mut lambda = if slope(1.0) <= 0.0 {
            1.0
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            while hi - lo > cfg.line_search_tol {
                let mid = 0.5 * (lo + hi);
                if slope(mid) <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let mut next = along(&p, &d, lambda);
        let mut fnext = obj.value(&next);
        if fnext > f {
            lambda = lambda.min(2.0 / (iter as f64 + 2.0));
            loop {
                next = along(&p, &d, lambda);
                fnext = obj.value(&next);
                if fnext <= f || lambda < 1e-16 {
                    break;
                }
                lambda *= 0.5;
            }
            if fnext > f {
                return Ok(ProbResult {
                    probs: p,
                    trace,
                    converged: true,
                });
            }
        }
        let delta = norm_diff(&next, &p);
        p = next;
        f = fnext;
        trace.push(TracePoint {
            iter,
            objective: obj.scale() * f,
            step: lambda,
            delta,
        });
    }
    Ok(ProbResult {
        probs: p,
        trace,
        converged: false,
    })
}

fn check_dim(dim: usize, set: &FeasibleSet) -> Result<()> {
    if dim == set.dim() {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected: set.dim(),
            got: dim,
        })
    }
}

/// Gradient of `−R` (bits/s) with respect to the probabilities of `c`, by
/// the same quadrature as the rate.
pub fn grad_phi<C>(c: &C, q_sq: f64, phys: &LinkPhysics, quad: &QuadratureSpec, cfg: &PGDConfig) -> Result<Vec<f64>>
where
    C: Constellation,
    C::Point: NoiseDomain,
{
    let obj = ExactRateObjective::new(c.points(), q_sq, phys, quad, (cfg.truncation_obj, cfg.truncation_grad))?;
    let s = obj.scale();
    Ok(obj.gradient(c.probs()).into_iter().map(|g| s * g).collect())
}

/// Probabilities of `c` maximizing its exact rate at power `q_sq`, starting
/// from the current probabilities.
pub fn pgd_optimize<C>(
    c: &C,
    q_sq: f64,
    phys: &LinkPhysics,
    set: &FeasibleSet,
    cfg: &PGDConfig,
    quad: &QuadratureSpec,
) -> Result<ProbResult>
where
    C: Constellation,
    C::Point: NoiseDomain,
{
    let obj = ExactRateObjective::new(c.points(), q_sq, phys, quad, (cfg.truncation_obj, cfg.truncation_grad))?;
    pgd(&obj, set, c.probs(), cfg)
}

/// Probabilities of `c` maximizing its closed-form lower bound at power
/// `q_sq`, starting from the current probabilities.
pub fn fw_optimize<C: Constellation>(
    c: &C,
    q_sq: f64,
    phys: &LinkPhysics,
    set: &FeasibleSet,
    cfg: &FWConfig,
) -> Result<ProbResult> {
    let obj = LowerBoundObjective::new(c.points(), q_sq, phys)?;
    frank_wolfe(&obj, set, c.probs(), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{make_pam, make_qam, OpticalConstellation, RFConstellation};
    use crate::rate::{link_bounds, rate_lifi};
    use approx::assert_relative_eq;

    fn phys_for_snr(snr: f64, eps: f64) -> LinkPhysics {
        LinkPhysics::new((snr / eps).sqrt(), 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn lp_step_examples() {
        let set = FeasibleSet::simplex(3).unwrap();
        assert_eq!(fw_lp_step(&[3.0, 1.0, 2.0], &set).unwrap(), vec![0.0, 1.0, 0.0]);
        let set = FeasibleSet::simplex(2).unwrap();
        assert_eq!(fw_lp_step(&[1.0, 1.0], &set).unwrap(), vec![1.0, 0.0]);
        assert!(fw_lp_step(&[f64::NAN, 1.0], &set).is_err());
    }

    #[test]
    fn identical_points_give_equal_gradient() {
        let c = OpticalConstellation::new(vec![0.5; 3], vec![0.2, 0.3, 0.5], 1.0, 1.0, 1.0).unwrap();
        let g = grad_phi(
            &c,
            1.0,
            &phys_for_snr(1.0, 0.25),
            &QuadratureSpec::default(),
            &PGDConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(g[0], g[1], epsilon = 1e-12);
        assert_relative_eq!(g[0], g[2], epsilon = 1e-12);
    }

    #[test]
    fn symmetric_pair_gives_equal_gradient() {
        let c = RFConstellation::new(
            vec![
                num_complex::Complex64::new(1.0, 0.0),
                num_complex::Complex64::new(-1.0, 0.0),
            ],
            vec![0.5, 0.5],
            1.0,
        )
        .unwrap();
        let g = grad_phi(
            &c,
            1.0,
            &phys_for_snr(2.0, 1.0),
            &QuadratureSpec::default(),
            &PGDConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(g[0], g[1], max_relative = 1e-12);
    }

    #[test]
    fn lower_bound_gradient_matches_finite_differences() {
        let pts = [0.0, 0.3, 0.6, 1.0];
        let obj = LowerBoundObjective::new(&pts, 5.0, &phys_for_snr(1.0, 1.0)).unwrap();
        let p = [0.1, 0.2, 0.3, 0.4];
        let g = obj.gradient(&p);
        for i in 0..4 {
            let mut up = p;
            let mut dn = p;
            up[i] += 1e-6;
            dn[i] -= 1e-6;
            let fd = (obj.value(&up) - obj.value(&dn)) / 2e-6;
            assert_relative_eq!(g[i], fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn single_point_is_trivial() {
        let c = make_pam(1, 1.0, 1.0, 1.0).unwrap();
        let set = c.feasible_set().unwrap();
        let r = pgd_optimize(
            &c,
            1.0,
            &phys_for_snr(1.0, 1.0),
            &set,
            &PGDConfig::default(),
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert_eq!(r.probs, vec![1.0]);
        let q = make_qam(1, 1.0).unwrap();
        let r = fw_optimize(
            &q,
            1.0,
            &phys_for_snr(1.0, 1.0),
            &q.feasible_set().unwrap(),
            &FWConfig::default(),
        )
        .unwrap();
        assert_eq!(r.probs, vec![1.0]);
    }

    #[test]
    fn pgd_two_pam_with_mean_cap_matches_sweep() {
        // points {0, 1}, mean cap 0.3 forces p(1) ≤ 0.3
        let c = OpticalConstellation::new(vec![0.0, 1.0], vec![0.7, 0.3], 1.0, 0.3, 1.0).unwrap();
        let set = c.feasible_set().unwrap();
        let phys = LinkPhysics::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let q = 3.0;
        let quad = QuadratureSpec::default();
        let r = pgd_optimize(&c, q, &phys, &set, &PGDConfig::default(), &quad).unwrap();
        let best = (0..=300)
            .map(|i| {
                let t = i as f64 * 1e-3;
                let ci = c.with_probs(vec![1.0 - t, t]).unwrap();
                rate_lifi(&ci, q, &phys, &quad).unwrap().value
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let got = rate_lifi(&c.with_probs(r.probs.clone()).unwrap(), q, &phys, &quad)
            .unwrap()
            .value;
        assert!(got >= best - 1e-9, "{got} vs {best}");
        assert!(r.trace.windows(2).all(|w| w[1].objective <= w[0].objective + 1e-10));
    }

    #[test]
    fn fw_two_points_matches_sweep() {
        let c = OpticalConstellation::new(vec![0.0, 1.0], vec![0.5, 0.5], 1.0, 1.0, 1.0).unwrap();
        let set = c.feasible_set().unwrap();
        let phys = LinkPhysics::new(1.0, 1.0, 1.0, 1.0).unwrap();
        let r = fw_optimize(&c, 2.0, &phys, &set, &FWConfig::default()).unwrap();
        let got = link_bounds(&c.with_probs(r.probs.clone()).unwrap(), 2.0, &phys).0;
        let best = (0..=100_000)
            .map(|i| {
                let t = i as f64 * 1e-5;
                link_bounds(&c.with_probs(vec![1.0 - t, t]).unwrap(), 2.0, &phys).0
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((got - best).abs() <= 1e-4 * best.abs().max(1.0));
        assert!(r.trace.windows(2).all(|w| w[1].objective <= w[0].objective + 1e-10));
    }

    #[test]
    fn trace_csv_has_schema_line() {
        let t = [TracePoint {
            iter: 0,
            objective: -1.5,
            step: 0.0,
            delta: 0.0,
        }];
        let csv = trace_csv(&t);
        assert!(csv.starts_with("# schema=1\niter,objective,step,delta_p\n0,-1.5,0,0\n"));
    }
}
