//! Independent oracle checks run by `aggrate selftest`.
//!
//! Each check recomputes a quantity by a different route than the library
//! (direct numerical integration, exhaustive grids, finite differences or
//! a hand-solved case) and compares.

use std::f64::consts::{E, PI};

use aggrate_core::rate::info_nats_at_snr;
use aggrate_core::{
    bounds_aggregate, grad_phi, lb_allocate, lb_phi, link_rate, make_pam, make_qam, mmse, rate_aggregate, wf_allocate,
    Constellation, LinkPhysics, NoiseDomain, PGDConfig, PowerBudget, QuadratureSpec,
};

pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Link with unit bandwidth and noise whose SNR per unit `q̂` is `snr`.
fn unit_link(snr: f64) -> LinkPhysics {
    LinkPhysics::new(snr.sqrt(), 1.0, 1.0, 1.0).expect("valid link")
}

/// Mutual information in bits of `y = a·x + n`, `n ~ N(0, 1)`, by the
/// trapezoid rule on the output density.
fn real_info_trapezoid(points: &[f64], probs: &[f64], a: f64) -> f64 {
    let lo = points.iter().fold(f64::INFINITY, |m, x| m.min(a * x)) - 12.0;
    let hi = points.iter().fold(f64::NEG_INFINITY, |m, x| m.max(a * x)) + 12.0;
    let n = 200_000;
    let h = (hi - lo) / n as f64;
    let mut hy = 0.0;
    for i in 0..=n {
        let y = lo + h * i as f64;
        let f: f64 = points
            .iter()
            .zip(probs)
            .map(|(x, p)| p * (-(y - a * x).powi(2) / 2.0).exp() / (2.0 * PI).sqrt())
            .sum();
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        if f > 0.0 {
            hy -= w * h * f * f.log2();
        }
    }
    hy - 0.5 * (2.0 * PI * E).log2()
}

fn rate_matches_direct_integration() -> Check {
    let c = make_pam(4, 1.0, 0.5, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for snr in [0.3, 3.0, 30.0] {
        let phys = unit_link(snr);
        let r = link_rate(&c, 1.0, &phys, &QuadratureSpec::default()).unwrap().value;
        let direct = 2.0 * real_info_trapezoid(c.points(), c.probs(), snr.sqrt());
        worst = worst.max((r - direct).abs());
    }
    check(
        "rate_vs_integration",
        worst <= 1e-6,
        format!("max abs diff {worst:.2e} bits/s"),
    )
}

fn saturation() -> Check {
    let snr = 1e4;
    let c1 = make_pam(8, 1.0, 0.5, 1.0).unwrap();
    let c2 = make_qam(16, 1.0).unwrap();
    let r1 = link_rate(&c1, 1.0, &unit_link(snr / c1.elec_power()), &QuadratureSpec::default())
        .unwrap()
        .value;
    let r2 = link_rate(&c2, 1.0, &unit_link(snr / c2.elec_power()), &QuadratureSpec::default())
        .unwrap()
        .value;
    let (e1, e2) = (rel(r1, 2.0 * 3.0), rel(r2, 4.0));
    check(
        "saturation_40dB",
        e1 <= 0.01 && e2 <= 0.01,
        format!("8-PAM {e1:.2e}, 16-QAM {e2:.2e} relative"),
    )
}

fn water_filling_hand_case() -> Check {
    // unit-power links with LMMSE(x) = 1/(1+x): ½/(1+q1) = γ and 1/(1+q2) = γ
    // with q1 + q2 = 4 give q1 = 1, q2 = 3
    let c1 = make_pam(2, 2f64.sqrt(), 1.0, 1.0).unwrap();
    let c2 = make_qam(4, 1.0).unwrap();
    let phys = unit_link(1.0);
    let budget = PowerBudget::new(4.0, 1e9, 1e3).unwrap();
    let a = wf_allocate(&c1, &c2, &phys, &phys, &budget, 1e-12).unwrap();
    let err = (a.q1_sq - 1.0).abs().max((a.q2_sq - 3.0).abs());
    check(
        "water_filling_(1,3)",
        err <= 1e-6,
        format!("q = ({:.9}, {:.9})", a.q1_sq, a.q2_sq),
    )
}

fn lb_allocation_vs_grid() -> Check {
    let c1 = make_pam(8, 1.0, 0.5, 1.0).unwrap();
    let c2 = make_qam(16, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for (s1, s2, total) in [(50.0, 20.0, 1.0), (2.0, 8.0, 0.5), (400.0, 1.0, 2.0)] {
        let (p1, p2) = (unit_link(s1), unit_link(s2));
        let budget = PowerBudget::new(total, 0.8, 1.0).unwrap();
        let (_, phi) = lb_allocate(&c1, &c2, &p1, &p2, &budget, 1e-12).unwrap();
        let kappa1 = c1.elec_power();
        let upper = budget.tau_sq(&c1).min(total / kappa1);
        let grid_best = (0..=10_000)
            .map(|i| lb_phi(upper * i as f64 / 1e4, &c1, &c2, &p1, &p2, &budget).unwrap())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max((phi - grid_best).max(0.0) / grid_best.abs());
    }
    check(
        "lb_allocation_vs_grid",
        worst <= 1e-3,
        format!("worst excess {worst:.2e} relative"),
    )
}

fn bound_sandwich() -> Check {
    let quad = QuadratureSpec::default();
    let mut ok = true;
    let mut cases = 0;
    for m in [2, 4, 8] {
        for n in [1, 4, 16] {
            for snr in [0.05, 1.0, 20.0, 500.0] {
                let c1 = make_pam(m, 1.0, 0.5, 1.0).unwrap();
                let c2 = make_qam(n, 1.0).unwrap();
                let (p1, p2) = (unit_link(snr), unit_link(0.5 * snr));
                let r = rate_aggregate(&c1, &c2, 1.0, 1.0, &p1, &p2, &quad).unwrap();
                let (lo, hi) = bounds_aggregate(&c1, &c2, 1.0, 1.0, &p1, &p2);
                let slack = 1e-9 * hi.abs().max(1.0);
                ok &= lo <= r.rate_total + slack && r.rate_total <= hi + slack;
                cases += 1;
            }
        }
    }
    check("bound_sandwich", ok, format!("{cases} cases"))
}

fn gradient_vs_finite_differences() -> Check {
    let quad = QuadratureSpec::default();
    let cfg = PGDConfig::default();
    let base = make_pam(4, 1.0, 0.5, 1.0).unwrap();
    let c = base.with_probs(vec![0.4, 0.1, 0.3, 0.2]).unwrap();
    let phys = unit_link(3.0);
    let g = grad_phi(&c, 1.0, &phys, &quad, &cfg).unwrap();
    let neg_rate = |p: Vec<f64>| -link_rate(&c.with_probs(p).unwrap(), 1.0, &phys, &quad).unwrap().value;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, j) in [(0, 1), (1, 3), (2, 0)] {
        let mut plus = c.probs().to_vec();
        let mut minus = c.probs().to_vec();
        plus[i] += h;
        plus[j] -= h;
        minus[i] -= h;
        minus[j] += h;
        let fd = (neg_rate(plus) - neg_rate(minus)) / (2.0 * h);
        worst = worst.max(rel(g[i] - g[j], fd));
    }
    check("gradient_vs_fd", worst <= 1e-3, format!("worst {worst:.2e} relative"))
}

fn mmse_relation() -> Check {
    let quad = QuadratureSpec::default();
    let c = make_pam(2, 1.0, 0.5, 1.0).unwrap();
    let rule = <f64 as NoiseDomain>::noise_rule(&quad).unwrap();
    let mut worst: f64 = 0.0;
    for snr in [0.5, 1.0, 2.0] {
        let h = 1e-4 * snr;
        let d = (info_nats_at_snr(&c, snr + h, &rule).value - info_nats_at_snr(&c, snr - h, &rule).value) / (2.0 * h);
        let m = mmse(&c, snr, &quad).unwrap().value;
        worst = worst.max(rel(d, 0.5 * m));
    }
    check("mmse_relation", worst <= 0.01, format!("worst {worst:.2e} relative"))
}

pub fn run() -> Vec<Check> {
    vec![
        rate_matches_direct_integration(),
        saturation(),
        water_filling_hand_case(),
        lb_allocation_vs_grid(),
        bound_sandwich(),
        gradient_vs_finite_differences(),
        mmse_relation(),
    ]
}
