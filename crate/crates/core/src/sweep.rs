//! Parameter sweeps producing long-form CSV.
//!
//! Each grid point yields one row per method:
//!
//! * `exact`: alternating optimization of the exact rate
//! * `equiprobable`: the same pipeline with the distributions held fixed
//! * `exact_lower`, `exact_upper`: the closed-form bounds at the `exact` solution
//! * `lower_bound`: alternating optimization of the lower bound
//! * `lower_bound_rate`: the exact rate at the `lower_bound` solution
//!
//! On the `snr` axis the powers are fixed at `q̂1 = q̂2 = 1` and each link
//! gain is set so that the equiprobable input reaches the requested SNR
//! (in dB); only the distributions are optimized there.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alternate::{optimize_exact, optimize_lb, AlternatingConfig, Problem, Solution};
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::power::PowerAllocation;
use crate::probopt::{fw_optimize, pgd_optimize};
use crate::quadrature::QuadratureSpec;
use crate::rate::{rate_aggregate, RateReport};
use crate::scenario::{OpticalSpec, Scenario};

pub const SWEEP_HEADER: &str = "axis,x,method,rate,q1_sq,q2_sq,snr1,snr2,std,converged";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Total electrical power `P_T`.
    #[serde(rename = "P_T")]
    TotalPower,
    /// Instantaneous optical power `P_ins`, with `P_o = 0.8·P_ins` and the
    /// optical mean cap at half the peak.
    #[serde(rename = "P_ins")]
    InstOptical,
    /// Optical bandwidth `B1` in Hz.
    #[serde(rename = "B1")]
    Bandwidth1,
    /// Per-link SNR in dB at fixed unit powers.
    #[serde(rename = "snr")]
    Snr,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::TotalPower => "P_T",
            Axis::InstOptical => "P_ins",
            Axis::Bandwidth1 => "B1",
            Axis::Snr => "snr",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "P_T" | "pt" => Ok(Axis::TotalPower),
            "P_ins" | "pins" => Ok(Axis::InstOptical),
            "B1" | "b1" => Ok(Axis::Bandwidth1),
            "snr" | "SNR" => Ok(Axis::Snr),
            _ => Err(Error::config(
                "axis",
                format!("unknown axis '{s}', expected P_T, P_ins, B1 or snr"),
            )),
        }
    }
}

/// `steps` evenly spaced values from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepRange {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.stop
                } else {
                    self.start + h * i as f64
                }
            })
            .collect()
    }

    pub fn validate(&self, axis: Axis) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::config("range", "needs at least one step"));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::config("range", "bounds must be finite"));
        }
        if self.steps > 1 && !(self.stop > self.start) {
            return Err(Error::config("range", "must be increasing"));
        }
        if axis != Axis::Snr && !(self.start > 0.0) {
            return Err(Error::config("range", format!("{axis} values must be positive")));
        }
        Ok(())
    }
}

impl FromStr for SweepRange {
    type Err = Error;

    /// Parses `a:b:n`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("range", format!("expected start:stop:steps, got '{s}'"));
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        Ok(SweepRange {
            start: parts[0].trim().parse().map_err(|_| bad())?,
            stop: parts[1].trim().parse().map_err(|_| bad())?,
            steps: parts[2].trim().parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: Axis,
    pub x: f64,
    pub method: String,
    pub rate: f64,
    pub q1_sq: f64,
    pub q2_sq: f64,
    pub snr1: f64,
    pub snr2: f64,
    pub std: f64,
    pub converged: bool,
}

impl SweepRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.axis,
            self.x,
            self.method,
            self.rate,
            self.q1_sq,
            self.q2_sq,
            self.snr1,
            self.snr2,
            self.std,
            self.converged
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("# schema=1\n{SWEEP_HEADER}\n");
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// The scenario at one grid point. `index` offsets the Monte Carlo seed so
/// that every point draws its own samples.
pub fn scenario_at(base: &Scenario, axis: Axis, x: f64, index: usize) -> Result<Scenario> {
    let mut s = base.clone();
    s.solver.quadrature.seed = base.solver.quadrature.seed.wrapping_add(index as u64);
    match axis {
        Axis::TotalPower => s.budget.total_elec = x,
        Axis::InstOptical => {
            s.budget.max_inst_optical = x;
            s.budget.max_avg_optical = 0.8 * x;
            match &mut s.lifi.constellation {
                OpticalSpec::Pam { peak, mean_cap, .. } => *mean_cap = 0.5 * *peak,
                OpticalSpec::Explicit(e) => e.mean_cap = 0.5 * e.peak,
            }
        }
        Axis::Bandwidth1 => s.lifi.bandwidth = x,
        Axis::Snr => {
            let snr = 10f64.powf(x / 10.0);
            let p = base.problem()?;
            let gain = |bw: f64, noise: f64, eps: f64| {
                if eps > 0.0 {
                    (snr * bw * noise / eps).sqrt()
                } else {
                    0.0
                }
            };
            s.lifi.gain = Some(gain(p.phys1.bandwidth, p.phys1.noise_psd, p.lifi.elec_power()));
            s.wifi.gain = Some(gain(p.phys2.bandwidth, p.phys2.noise_psd, p.wifi.elec_power()));
        }
    }
    s.validate()?;
    Ok(s)
}

#[allow(clippy::too_many_arguments)]
fn row(
    axis: Axis,
    x: f64,
    method: &str,
    rate: f64,
    std: f64,
    alloc: &PowerAllocation,
    r: &RateReport,
    converged: bool,
) -> SweepRow {
    SweepRow {
        axis,
        x,
        method: method.to_string(),
        rate,
        q1_sq: alloc.q1_sq,
        q2_sq: alloc.q2_sq,
        snr1: r.snr1,
        snr2: r.snr2,
        std,
        converged,
    }
}

fn report(
    prob: &Problem,
    sol_probs: (&[f64], &[f64]),
    alloc: &PowerAllocation,
    quad: &QuadratureSpec,
) -> Result<RateReport> {
    let p = prob.with_probs(sol_probs.0.to_vec(), sol_probs.1.to_vec())?;
    rate_aggregate(&p.lifi, &p.wifi, alloc.q1_sq, alloc.q2_sq, &p.phys1, &p.phys2, quad)
}

fn power_point(s: &Scenario, axis: Axis, x: f64) -> Result<Vec<SweepRow>> {
    let prob = s.problem()?;
    let cfg = s.solver;
    let quad = &cfg.quadrature;
    let exact = optimize_exact(&prob, &cfg)?;
    let fixed = optimize_exact(
        &prob,
        &AlternatingConfig {
            optimize_probs: false,
            ..cfg
        },
    )?;
    let lb = optimize_lb(&prob, &cfg)?;

    let probs = |sol: &Solution| (sol.lifi.probs().to_vec(), sol.wifi.probs().to_vec());
    let (e1, e2) = probs(&exact);
    let re = report(&prob, (&e1, &e2), &exact.allocation, quad)?;
    let (f1, f2) = probs(&fixed);
    let rf = report(&prob, (&f1, &f2), &fixed.allocation, quad)?;
    let (l1, l2) = probs(&lb);
    let rl = report(&prob, (&l1, &l2), &lb.allocation, quad)?;

    Ok(vec![
        row(
            axis,
            x,
            "exact",
            exact.objective,
            exact.std_err,
            &exact.allocation,
            &re,
            exact.converged,
        ),
        row(
            axis,
            x,
            "equiprobable",
            fixed.objective,
            fixed.std_err,
            &fixed.allocation,
            &rf,
            fixed.converged,
        ),
        row(
            axis,
            x,
            "exact_lower",
            re.lower_total,
            0.0,
            &exact.allocation,
            &re,
            exact.converged,
        ),
        row(
            axis,
            x,
            "exact_upper",
            re.upper_total,
            0.0,
            &exact.allocation,
            &re,
            exact.converged,
        ),
        row(
            axis,
            x,
            "lower_bound",
            lb.objective,
            0.0,
            &lb.allocation,
            &rl,
            lb.converged,
        ),
        row(
            axis,
            x,
            "lower_bound_rate",
            rl.rate_total,
            rl.std_err,
            &lb.allocation,
            &rl,
            lb.converged,
        ),
    ])
}

fn snr_point(s: &Scenario, x: f64) -> Result<Vec<SweepRow>> {
    let prob = s.problem()?;
    let cfg = s.solver;
    let quad = &cfg.quadrature;
    let alloc = PowerAllocation::fixed(1.0, 1.0);
    let set1 = prob.lifi.feasible_set()?;
    let set2 = prob.wifi.feasible_set()?;

    let (g1, g2) = if cfg.optimize_probs {
        let (a, b) = rayon::join(
            || pgd_optimize(&prob.lifi, 1.0, &prob.phys1, &set1, &cfg.pgd, quad),
            || pgd_optimize(&prob.wifi, 1.0, &prob.phys2, &set2, &cfg.pgd, quad),
        );
        let (a, b) = (a?, b?);
        (a.converged && b.converged, (a.probs, b.probs))
    } else {
        (true, (prob.lifi.probs().to_vec(), prob.wifi.probs().to_vec()))
    };
    let f1 = fw_optimize(&prob.lifi, 1.0, &prob.phys1, &set1, &cfg.fw)?;
    let f2 = fw_optimize(&prob.wifi, 1.0, &prob.phys2, &set2, &cfg.fw)?;
    let fw_converged = f1.converged && f2.converged;

    let rf = rate_aggregate(&prob.lifi, &prob.wifi, 1.0, 1.0, &prob.phys1, &prob.phys2, quad)?;
    let re = report(&prob, (&g2.0, &g2.1), &alloc, quad)?;
    let rl = report(&prob, (&f1.probs, &f2.probs), &alloc, quad)?;
    let axis = Axis::Snr;
    Ok(vec![
        row(axis, x, "exact", re.rate_total, re.std_err, &alloc, &re, g1),
        row(axis, x, "equiprobable", rf.rate_total, rf.std_err, &alloc, &rf, true),
        row(axis, x, "exact_lower", re.lower_total, 0.0, &alloc, &re, g1),
        row(axis, x, "exact_upper", re.upper_total, 0.0, &alloc, &re, g1),
        row(axis, x, "lower_bound", rl.lower_total, 0.0, &alloc, &rl, fw_converged),
        row(
            axis,
            x,
            "lower_bound_rate",
            rl.rate_total,
            rl.std_err,
            &alloc,
            &rl,
            fw_converged,
        ),
    ])
}

/// Rows for a single grid point.
pub fn sweep_point(base: &Scenario, axis: Axis, x: f64, index: usize) -> Result<Vec<SweepRow>> {
    let s = scenario_at(base, axis, x, index)?;
    match axis {
        Axis::Snr => snr_point(&s, x),
        _ => power_point(&s, axis, x),
    }
}

/// Runs every grid point on the current rayon pool. Rows come back in grid
/// order whatever the completion order.
pub fn run_sweep(base: &Scenario, axis: Axis, range: &SweepRange) -> Result<Vec<SweepRow>> {
    range.validate(axis)?;
    let values = range.values();
    let per_point: Vec<Result<Vec<SweepRow>>> = values
        .par_iter()
        .enumerate()
        .map(|(i, &x)| sweep_point(base, axis, x, i))
        .collect();
    let mut rows = Vec::with_capacity(values.len() * 6);
    for r in per_point {
        rows.extend(r?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn range_parsing() {
        let r: SweepRange = "0.5:2:4".parse().unwrap();
        assert_eq!(r.values(), vec![0.5, 1.0, 1.5, 2.0]);
        let r: SweepRange = "3:3:1".parse().unwrap();
        assert_eq!(r.values(), vec![3.0]);
        assert!("1:2".parse::<SweepRange>().is_err());
        assert!("1:x:3".parse::<SweepRange>().is_err());
        let r: SweepRange = "2:1:3".parse().unwrap();
        assert!(r.validate(Axis::TotalPower).is_err());
        let r: SweepRange = "-10:20:4".parse().unwrap();
        assert!(r.validate(Axis::TotalPower).is_err());
        assert!(r.validate(Axis::Snr).is_ok());
    }

    #[test]
    fn axis_names_round_trip() {
        for a in [Axis::TotalPower, Axis::InstOptical, Axis::Bandwidth1, Axis::Snr] {
            assert_eq!(a.name().parse::<Axis>().unwrap(), a);
        }
        assert!("P_o".parse::<Axis>().is_err());
    }

    #[test]
    fn inst_axis_couples_the_optical_limits() {
        let s = scenario_at(&Scenario::default(), Axis::InstOptical, 2.0, 0).unwrap();
        assert_eq!(s.budget.max_inst_optical, 2.0);
        assert_relative_eq!(s.budget.max_avg_optical, 1.6);
        match s.lifi.constellation {
            OpticalSpec::Pam { peak, mean_cap, .. } => assert_eq!(mean_cap, 0.5 * peak),
            _ => unreachable!(),
        }
    }

    #[test]
    fn snr_axis_hits_the_requested_snr() {
        let s = scenario_at(&Scenario::default(), Axis::Snr, 4.0, 0).unwrap();
        let p = s.problem().unwrap();
        let want = 10f64.powf(0.4);
        assert_relative_eq!(p.phys1.snr(1.0, p.lifi.elec_power()), want, max_relative = 1e-12);
        assert_relative_eq!(p.phys2.snr(1.0, p.wifi.elec_power()), want, max_relative = 1e-12);
    }

    #[test]
    fn one_point_sweep_matches_direct_calls() {
        let base = Scenario::default();
        let rows = run_sweep(&base, Axis::TotalPower, &"1:1:1".parse().unwrap()).unwrap();
        let prob = base.problem().unwrap();
        let exact = optimize_exact(&prob, &base.solver).unwrap();
        let lb = optimize_lb(&prob, &base.solver).unwrap();
        let get = |m: &str| rows.iter().find(|r| r.method == m).unwrap();
        assert_eq!(get("exact").rate, exact.objective);
        assert_eq!(get("exact").q1_sq, exact.allocation.q1_sq);
        assert_eq!(get("lower_bound").rate, lb.objective);
        assert_eq!(rows.len(), 6);
        for r in &rows {
            assert!(r.rate.is_finite());
        }
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("# schema=1\naxis,x,method"));
        assert_eq!(csv.lines().count(), 2 + rows.len());
    }

    #[test]
    fn rows_respect_the_bounds() {
        let rows = run_sweep(&Scenario::default(), Axis::TotalPower, &"0.25:2:3".parse().unwrap()).unwrap();
        for chunk in rows.chunks(6) {
            let get = |m: &str| chunk.iter().find(|r| r.method == m).unwrap();
            let (e, lo, hi) = (get("exact"), get("exact_lower"), get("exact_upper"));
            assert!(lo.rate <= e.rate + 3.0 * e.std && e.rate <= hi.rate + 3.0 * e.std);
            assert!(get("lower_bound").rate <= get("lower_bound_rate").rate + 3.0 * e.std);
        }
    }
}
