//! Alternating optimization of the power split and the input distributions.
//!
//! [`optimize_exact`] alternates water-filling and projected gradient on the
//! exact rate; [`optimize_lb`] alternates the lower-bound power split and
//! Frank–Wolfe on the closed-form lower bound. Both record one trace entry
//! per outer iteration and return the best iterate seen.

use serde::{Deserialize, Serialize};

use crate::constellation::{Constellation, OpticalConstellation, RFConstellation};
use crate::error::{Error, Result};
use crate::power::{lb_allocate, wf_allocate, PowerAllocation, PowerBudget};
use crate::probopt::{fw_optimize, pgd_optimize, FWConfig, PGDConfig};
use crate::quadrature::QuadratureSpec;
use crate::rate::{bounds_aggregate, rate_aggregate, LinkPhysics};

/// Relative slack under which the budget counts as spent in full.
pub const BUDGET_TIGHT_TOL: f64 = 1e-6;

/// A fully resolved instance: both alphabets, both links and the budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub lifi: OpticalConstellation,
    pub wifi: RFConstellation,
    pub phys1: LinkPhysics,
    pub phys2: LinkPhysics,
    pub budget: PowerBudget,
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        self.phys1.validate()?;
        self.phys2.validate()?;
        self.budget.validate()
    }

    /// Same problem with new probability vectors.
    pub fn with_probs(&self, p1: Vec<f64>, p2: Vec<f64>) -> Result<Self> {
        Ok(Problem {
            lifi: self.lifi.with_probs(p1)?,
            wifi: self.wifi.with_probs(p2)?,
            ..self.clone()
        })
    }

    /// Budget cost per unit of `q̂` on each link.
    pub fn kappa(&self) -> (f64, f64) {
        self.budget
            .coefficients(&self.lifi, &self.wifi, &self.phys1, &self.phys2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Exact,
    LowerBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlternatingConfig {
    /// Stop once the objective changes by at most this many bits/s.
    /// `None` means `1e-4·(B1 + B2)`.
    #[serde(default)]
    pub outer_tol: Option<f64>,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    /// With `false` the distributions stay fixed and only the power split
    /// is optimized.
    #[serde(default = "default_true")]
    pub optimize_probs: bool,
    #[serde(default)]
    pub pgd: PGDConfig,
    #[serde(default)]
    pub fw: FWConfig,
    /// Relative budget tolerance of the water-filling bisection.
    #[serde(default = "default_power_tol")]
    pub wf_tol: f64,
    /// Residual tolerance of the lower-bound stationary-point search.
    #[serde(default = "default_power_tol")]
    pub lb_tol: f64,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
}

fn default_max_outer() -> usize {
    50
}

fn default_true() -> bool {
    true
}

fn default_power_tol() -> f64 {
    1e-10
}

impl Default for AlternatingConfig {
    fn default() -> Self {
        AlternatingConfig {
            outer_tol: None,
            max_outer: default_max_outer(),
            optimize_probs: true,
            pgd: PGDConfig::default(),
            fw: FWConfig::default(),
            wf_tol: default_power_tol(),
            lb_tol: default_power_tol(),
            quadrature: QuadratureSpec::default(),
        }
    }
}

impl AlternatingConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(xi) = self.outer_tol {
            if !(xi > 0.0) {
                return Err(Error::Domain(format!("outer tolerance must be positive, got {xi}")));
            }
        }
        if self.max_outer == 0 {
            return Err(Error::Domain("max_outer must be at least 1".into()));
        }
        if !(self.wf_tol > 0.0 && self.lb_tol > 0.0) {
            return Err(Error::Domain("power tolerances must be positive".into()));
        }
        self.pgd.validate()?;
        self.fw.validate()?;
        self.quadrature.validate()
    }

    /// `ξ` in bits/s for the given links.
    pub fn xi(&self, phys1: &LinkPhysics, phys2: &LinkPhysics) -> f64 {
        self.outer_tol.unwrap_or(1e-4 * (phys1.bandwidth + phys2.bandwidth))
    }
}

/// State after one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterStep {
    pub iter: usize,
    /// Objective in bits/s.
    pub objective: f64,
    pub std_err: f64,
    pub q1_sq: f64,
    pub q2_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub objective_kind: Objective,
    pub lifi: OpticalConstellation,
    pub wifi: RFConstellation,
    pub allocation: PowerAllocation,
    /// Best objective reached, in bits/s.
    pub objective: f64,
    pub std_err: f64,
    /// Iteration whose state is returned.
    pub best_iter: usize,
    pub trace: Vec<OuterStep>,
    pub converged: bool,
    /// Electrical power charged at the returned state.
    pub budget_used: f64,
    pub budget_total: f64,
    pub budget_tight: bool,
}

impl Solution {
    pub const CSV_HEADER: &'static str =
        "objective_kind,objective,std_err,q1_sq,q2_sq,outer_iters,converged,budget_used,budget_total";

    pub fn csv_row(&self) -> String {
        let kind = match self.objective_kind {
            Objective::Exact => "exact",
            Objective::LowerBound => "lower_bound",
        };
        format!(
            "{},{},{},{},{},{},{},{},{}",
            kind,
            self.objective,
            self.std_err,
            self.allocation.q1_sq,
            self.allocation.q2_sq,
            self.trace.len(),
            self.converged,
            self.budget_used,
            self.budget_total
        )
    }

    /// Outer trace as CSV with a schema comment line.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("# schema=1\niter,objective,std_err,q1_sq,q2_sq\n");
        for t in &self.trace {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                t.iter, t.objective, t.std_err, t.q1_sq, t.q2_sq
            ));
        }
        out
    }
}

/// Run bookkeeping shared by the two drivers.
struct Run {
    kind: Objective,
    trace: Vec<OuterStep>,
    best: Option<(Problem, PowerAllocation, f64, f64, usize)>,
}

impl Run {
    fn new(kind: Objective) -> Self {
        Run {
            kind,
            trace: Vec::new(),
            best: None,
        }
    }

    fn record(&mut self, prob: &Problem, alloc: PowerAllocation, value: f64, std_err: f64) {
        let iter = self.trace.len() + 1;
        self.trace.push(OuterStep {
            iter,
            objective: value,
            std_err,
            q1_sq: alloc.q1_sq,
            q2_sq: alloc.q2_sq,
        });
        if self.best.as_ref().is_none_or(|b| value > b.2) {
            self.best = Some((prob.clone(), alloc, value, std_err, iter));
        }
    }

    fn fail(&self, e: Error) -> Error {
        match e {
            Error::Solver { .. } => e,
            other => Error::Solver {
                message: other.to_string(),
                trace: self.trace.iter().map(|t| t.objective).collect(),
            },
        }
    }

    fn finish(self, converged: bool) -> Solution {
        let (prob, allocation, objective, std_err, best_iter) =
            self.best.expect("at least one outer iteration is recorded");
        let kappa = prob.kappa();
        let budget_used = allocation.budget_used(kappa);
        let budget_total = prob.budget.total_elec;
        Solution {
            objective_kind: self.kind,
            lifi: prob.lifi,
            wifi: prob.wifi,
            allocation,
            objective,
            std_err,
            best_iter,
            trace: self.trace,
            converged,
            budget_used,
            budget_total,
            budget_tight: (budget_used - budget_total).abs() <= BUDGET_TIGHT_TOL * budget_total.max(f64::MIN_POSITIVE),
        }
    }
}

fn reshapes(prob: &Problem, cfg: &AlternatingConfig) -> bool {
    cfg.optimize_probs && (prob.lifi.order() > 1 || prob.wifi.order() > 1)
}

fn exact_value(prob: &Problem, alloc: &PowerAllocation, quad: &QuadratureSpec) -> Result<(f64, f64)> {
    let r = rate_aggregate(
        &prob.lifi,
        &prob.wifi,
        alloc.q1_sq,
        alloc.q2_sq,
        &prob.phys1,
        &prob.phys2,
        quad,
    )?;
    Ok((r.rate_total, r.std_err))
}

fn lower_value(prob: &Problem, alloc: &PowerAllocation) -> f64 {
    bounds_aggregate(
        &prob.lifi,
        &prob.wifi,
        alloc.q1_sq,
        alloc.q2_sq,
        &prob.phys1,
        &prob.phys2,
    )
    .0
}

/// Alternates water-filling and projected gradient on the exact rate.
///
/// The power split is computed first for the starting distributions; each
/// outer iteration then updates both distributions at the previous powers,
/// recomputes the split and evaluates the rate. Stops once the rate moves
/// by at most `ξ` or after `max_outer` evaluations.
pub fn optimize_exact(start: &Problem, cfg: &AlternatingConfig) -> Result<Solution> {
    start.validate()?;
    cfg.validate()?;
    let xi = cfg.xi(&start.phys1, &start.phys2);
    let mut run = Run::new(Objective::Exact);
    let step = |prob: &Problem| {
        wf_allocate(
            &prob.lifi,
            &prob.wifi,
            &prob.phys1,
            &prob.phys2,
            &prob.budget,
            cfg.wf_tol,
        )
    };

    let mut prob = start.clone();
    let mut alloc = step(&prob).map_err(|e| run.fail(e))?;
    let (mut prev, se) = exact_value(&prob, &alloc, &cfg.quadrature).map_err(|e| run.fail(e))?;
    run.record(&prob, alloc, prev, se);

    // with nothing to reshape every further iteration repeats the first
    let mut converged = cfg.max_outer == 1 || !reshapes(start, cfg);
    while !converged && run.trace.len() < cfg.max_outer {
        if cfg.optimize_probs {
            let (r1, r2) = rayon::join(
                || {
                    let set = prob.lifi.feasible_set()?;
                    pgd_optimize(&prob.lifi, alloc.q1_sq, &prob.phys1, &set, &cfg.pgd, &cfg.quadrature)
                },
                || {
                    let set = prob.wifi.feasible_set()?;
                    pgd_optimize(&prob.wifi, alloc.q2_sq, &prob.phys2, &set, &cfg.pgd, &cfg.quadrature)
                },
            );
            let (r1, r2) = (r1.map_err(|e| run.fail(e))?, r2.map_err(|e| run.fail(e))?);
            prob = prob.with_probs(r1.probs, r2.probs).map_err(|e| run.fail(e))?;
        }
        alloc = step(&prob).map_err(|e| run.fail(e))?;
        let (value, se) = exact_value(&prob, &alloc, &cfg.quadrature).map_err(|e| run.fail(e))?;
        run.record(&prob, alloc, value, se);
        if (value - prev).abs() <= xi {
            converged = true;
            break;
        }
        prev = value;
    }
    Ok(run.finish(converged))
}

/// Alternates the lower-bound power split and Frank–Wolfe on the
/// closed-form lower bound.
///
/// The split is computed first; each outer iteration recomputes the split
/// for the current distributions, updates both distributions at that split
/// and evaluates the bound. The returned state is the best iterate's
/// distributions with the power split re-solved for them, so the budget
/// holds with equality; its objective may differ slightly from the trace.
pub fn optimize_lb(start: &Problem, cfg: &AlternatingConfig) -> Result<Solution> {
    start.validate()?;
    cfg.validate()?;
    let xi = cfg.xi(&start.phys1, &start.phys2);
    let mut run = Run::new(Objective::LowerBound);
    let step = |prob: &Problem| {
        lb_allocate(
            &prob.lifi,
            &prob.wifi,
            &prob.phys1,
            &prob.phys2,
            &prob.budget,
            cfg.lb_tol,
        )
        .map(|r| r.0)
    };

    let mut prob = start.clone();
    let mut alloc = step(&prob).map_err(|e| run.fail(e))?;
    let mut prev = lower_value(&prob, &alloc);
    run.record(&prob, alloc, prev, 0.0);

    let mut converged = cfg.max_outer == 1 || !reshapes(start, cfg);
    while !converged && run.trace.len() < cfg.max_outer {
        alloc = step(&prob).map_err(|e| run.fail(e))?;
        if cfg.optimize_probs {
            let set1 = prob.lifi.feasible_set().map_err(|e| run.fail(e))?;
            let set2 = prob.wifi.feasible_set().map_err(|e| run.fail(e))?;
            let r1 = fw_optimize(&prob.lifi, alloc.q1_sq, &prob.phys1, &set1, &cfg.fw).map_err(|e| run.fail(e))?;
            let r2 = fw_optimize(&prob.wifi, alloc.q2_sq, &prob.phys2, &set2, &cfg.fw).map_err(|e| run.fail(e))?;
            prob = prob.with_probs(r1.probs, r2.probs).map_err(|e| run.fail(e))?;
        }
        let value = lower_value(&prob, &alloc);
        run.record(&prob, alloc, value, 0.0);
        if (value - prev).abs() <= xi {
            converged = true;
            break;
        }
        prev = value;
    }
    // The last update is to the distributions, which can change the budget
    // coefficients; re-split the power so the returned state spends the
    // budget exactly.
    if let Some(best) = run.best.as_mut() {
        let alloc = match step(&best.0) {
            Ok(a) => a,
            Err(e) => return Err(run.fail(e)),
        };
        best.1 = alloc;
        best.2 = lower_value(&best.0, &alloc);
    }
    Ok(run.finish(converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{make_pam, make_qam};
    use crate::probopt::fw_optimize;
    use crate::scenario::Scenario;
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn reference() -> (Problem, AlternatingConfig) {
        let s = Scenario::default();
        (s.problem().unwrap(), s.solver)
    }

    fn degenerate() -> Problem {
        let (mut p, _) = reference();
        p.lifi = make_pam(1, 1.0, 0.5, 1.0).unwrap();
        p.wifi = make_qam(1, 1.0).unwrap();
        p
    }

    #[test]
    fn degenerate_alphabets_carry_no_information() {
        let (_, cfg) = reference();
        let p = degenerate();
        let s = optimize_exact(&p, &cfg).unwrap();
        assert_eq!(s.objective, 0.0);
        assert_eq!(s.trace.len(), 1);
        assert!(s.converged);

        let s = optimize_lb(&p, &cfg).unwrap();
        let collapse = (1.0 - 1.0 / LN_2) * (p.phys1.bandwidth + p.phys2.bandwidth);
        assert_relative_eq!(s.objective, collapse, max_relative = 1e-12);
        assert_eq!(s.trace.len(), 1);
    }

    #[test]
    fn zero_budget_gives_zero_rate() {
        let (mut p, cfg) = reference();
        p.budget.total_elec = 0.0;
        let s = optimize_exact(&p, &cfg).unwrap();
        assert_eq!((s.allocation.q1_sq, s.allocation.q2_sq), (0.0, 0.0));
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn rf_only_decouples() {
        let (mut p, cfg) = reference();
        p.lifi = make_pam(1, 1.0, 0.5, 1.0).unwrap();
        let s = optimize_lb(&p, &cfg).unwrap();
        let cap = p.wifi.elec_cap();
        assert_relative_eq!(
            s.allocation.q2_sq,
            p.budget.total_elec / (p.phys2.amp_efficiency * cap),
            max_relative = 1e-12
        );
        let set = p.wifi.feasible_set().unwrap();
        let single = fw_optimize(&p.wifi, s.allocation.q2_sq, &p.phys2, &set, &cfg.fw).unwrap();
        for (a, b) in s.wifi.probs().iter().zip(&single.probs) {
            assert_relative_eq!(*a, *b, epsilon = 1e-9);
        }
    }

    #[test]
    fn exact_beats_fixed_distributions() {
        let (p, cfg) = reference();
        let shaped = optimize_exact(&p, &cfg).unwrap();
        let fixed = optimize_exact(
            &p,
            &AlternatingConfig {
                optimize_probs: false,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(fixed.trace.len(), 1);
        assert!(shaped.objective >= fixed.objective - 3.0 * fixed.std_err.max(shaped.std_err));
        assert!(shaped.budget_tight);
    }

    #[test]
    fn lower_bound_trace_rises_and_budget_is_spent() {
        for caps in [false, true] {
            let (mut p, cfg) = reference();
            p.budget.budget_uses_caps = caps;
            let s = optimize_lb(&p, &cfg).unwrap();
            assert!(s.converged);
            assert!(s.trace.len() <= cfg.max_outer);
            for w in s.trace.windows(2) {
                assert!(w[1].objective >= w[0].objective - 1e-9, "{:?}", s.trace);
            }
            assert!(s.budget_tight, "used {} of {}", s.budget_used, s.budget_total);
            let direct = bounds_aggregate(
                &s.lifi,
                &s.wifi,
                s.allocation.q1_sq,
                s.allocation.q2_sq,
                &p.phys1,
                &p.phys2,
            )
            .0;
            assert_relative_eq!(s.objective, direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn rerun_from_solution_is_a_fixed_point() {
        let (p, cfg) = reference();
        let xi = cfg.xi(&p.phys1, &p.phys2);
        let s = optimize_lb(&p, &cfg).unwrap();
        let again = optimize_lb(
            &p.with_probs(s.lifi.probs().to_vec(), s.wifi.probs().to_vec()).unwrap(),
            &cfg,
        )
        .unwrap();
        assert!((again.objective - s.objective).abs() < xi);

        let s = optimize_exact(&p, &cfg).unwrap();
        let again = optimize_exact(
            &p.with_probs(s.lifi.probs().to_vec(), s.wifi.probs().to_vec()).unwrap(),
            &cfg,
        )
        .unwrap();
        assert!((again.objective - s.objective).abs() < xi);
    }

    #[test]
    fn inner_failure_carries_partial_trace() {
        let (p, _) = reference();
        let mut run = Run::new(Objective::Exact);
        run.record(&p, PowerAllocation::fixed(1.0, 1.0), 5.0, 0.0);
        run.record(&p, PowerAllocation::fixed(1.0, 1.0), 6.0, 0.0);
        match run.fail(Error::Bracket("no sign change".into())) {
            Error::Solver { message, trace } => {
                assert!(message.contains("no sign change"));
                assert_eq!(trace, vec![5.0, 6.0]);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = AlternatingConfig {
            outer_tol: Some(0.0),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        cfg.outer_tol = None;
        cfg.max_outer = 0;
        assert!(cfg.validate().is_err());
        let text = serde_json::to_string(&AlternatingConfig::default()).unwrap();
        assert_eq!(
            serde_json::from_str::<AlternatingConfig>(&text).unwrap(),
            AlternatingConfig::default()
        );
    }
}
