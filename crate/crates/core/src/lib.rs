//! Achievable-rate evaluation and input optimization for an aggregated
//! optical (LiFi) and RF (WiFi) link with finite-alphabet inputs.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alternate;
pub mod channel;
pub mod constellation;
pub mod error;
pub mod feasible;
pub mod power;
pub mod probopt;
pub mod quadrature;
pub mod rate;
pub mod scenario;
pub mod sweep;

pub use alternate::{optimize_exact, optimize_lb, AlternatingConfig, Objective, OuterStep, Problem, Solution};
pub use constellation::{make_pam, make_qam, Constellation, OpticalConstellation, RFConstellation, Symbol};
pub use error::{Error, Result};
pub use feasible::{project_feasible, FeasibleSet, LinearCap, SetKind};
pub use power::{
    lb_allocate, lb_phi, lb_stationary_residual, wf_allocate, wf_kkt_residuals, LowerBoundLine, PowerAllocation,
    PowerBudget,
};
pub use probopt::{
    fw_lp_step, fw_optimize, grad_phi, pgd_optimize, trace_csv, ExactRateObjective, FWConfig, LowerBoundObjective,
    PGDConfig, ProbResult, SimplexObjective, TracePoint,
};
pub use quadrature::{Estimate, NoiseDomain, NoiseRule, QuadMethod, QuadratureSpec};
pub use rate::{
    bounds_aggregate, bounds_lifi, bounds_wifi, link_bounds, link_rate, lmmse, lmmse_inv, mmse, rate_aggregate,
    rate_lifi, rate_wifi, LinkPhysics, RateReport,
};
pub use scenario::{equal_split, Scenario};
pub use sweep::{run_sweep, sweep_csv, Axis, SweepRange, SweepRow};
