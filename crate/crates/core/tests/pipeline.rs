use aggrate_core::{
    bounds_aggregate, make_pam, make_qam, optimize_exact, optimize_lb, project_feasible, rate_aggregate, Constellation,
    LinkPhysics, QuadratureSpec, Scenario,
};
use proptest::prelude::*;

#[test]
fn reference_scenario_end_to_end() {
    let s = Scenario::default();
    let prob = s.problem().unwrap();
    let exact = optimize_exact(&prob, &s.solver).unwrap();
    let lb = optimize_lb(&prob, &s.solver).unwrap();
    assert!(exact.converged && lb.converged);
    assert!(exact.trace.iter().all(|t| t.objective <= exact.objective));
    assert!(lb.budget_tight);
    assert!(exact.budget_used <= exact.budget_total * (1.0 + 1e-9));

    let (lo, _) = bounds_aggregate(
        &lb.lifi,
        &lb.wifi,
        lb.allocation.q1_sq,
        lb.allocation.q2_sq,
        &prob.phys1,
        &prob.phys2,
    );
    assert!((lo - lb.objective).abs() <= 1e-9 * lo.abs());
}

#[test]
fn solution_json_round_trips() {
    let s = Scenario::default();
    let sol = optimize_lb(&s.problem().unwrap(), &s.solver).unwrap();
    let text = serde_json::to_string(&sol).unwrap();
    let back: aggrate_core::Solution = serde_json::from_str(&text).unwrap();
    assert_eq!(back, sol);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rate_sits_between_bounds(
        m in prop::sample::select(vec![2usize, 4, 8]),
        n in prop::sample::select(vec![1usize, 4, 16]),
        w1 in prop::collection::vec(0.01f64..1.0, 8),
        w2 in prop::collection::vec(0.01f64..1.0, 16),
        snr1_db in -20.0f64..40.0,
        snr2_db in -20.0f64..40.0,
    ) {
        let c1 = make_pam(m, 1.0, 0.5, 1.0).unwrap();
        let c2 = make_qam(n, 1.0).unwrap();
        let normalize = |w: &[f64]| {
            let t: f64 = w.iter().sum();
            w.iter().map(|v| v / t).collect::<Vec<_>>()
        };
        let c1 = c1.with_probs(project_feasible(&normalize(&w1[..m]), &c1.feasible_set().unwrap()).unwrap()).unwrap();
        let c2 = c2.with_probs(project_feasible(&normalize(&w2[..n]), &c2.feasible_set().unwrap()).unwrap()).unwrap();
        let p1 = LinkPhysics::new(10f64.powf(snr1_db / 20.0), 1.0, 1.0, 1.0).unwrap();
        let p2 = LinkPhysics::new(10f64.powf(snr2_db / 20.0), 1.0, 1.0, 1.0).unwrap();
        let r = rate_aggregate(&c1, &c2, 1.0, 1.0, &p1, &p2, &QuadratureSpec::default()).unwrap();
        let (lo, hi) = bounds_aggregate(&c1, &c2, 1.0, 1.0, &p1, &p2);
        let slack = 1e-9 * hi.abs().max(1.0);
        prop_assert!(lo <= r.rate_total + slack);
        prop_assert!(r.rate_total <= hi + slack);
        prop_assert!(r.rate_total <= 2.0 * (m as f64).log2() + (n as f64).log2() + slack);
    }
}
