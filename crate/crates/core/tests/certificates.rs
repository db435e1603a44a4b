use osr_core::optimizer::{
    check_prop1, check_prop2_bounds, convex_suite, run_constrained, ActiveQuadratic, Averaging,
    PrimalMode, Prop2Bounds, RunConfig,
};

#[test]
fn convex_suite_certificates_hold_every_step() {
    for case in convex_suite(1000) {
        let p = &case.problem;
        let trace = run_constrained(p.objective.as_ref(), &case.config).unwrap();
        let prop2 = check_prop2_bounds(
            &trace,
            Prop2Bounds {
                f_star: p.f_star,
                lambda_star: p.lambda_star,
                constraint_bound: p.constraint_bound,
            },
        );
        assert!(prop2.holds(), "{}: {:?}", p.name, prop2.first_violation);
        let last = prop2.last().unwrap();
        assert_eq!(last.step, 1000);
        assert!(
            last.bound1_rhs < 1e-3,
            "{}: λ/(mη₂) = {}",
            p.name,
            last.bound1_rhs
        );
        let g = trace.last().unwrap().constraint_avg;
        assert!(g.abs() < 1e-3, "{}: g = {g}", p.name);

        let prop1 = check_prop1(&trace, p.norm_bound);
        assert!(prop1.holds(), "{}: {:?}", p.name, prop1.first_violation);
        assert!(prop1.max_recurrence_error <= 1e-12);
    }
}

#[test]
fn quadratic_converges_from_a_cold_start() {
    let mut config = RunConfig::new(vec![0.0]);
    config.primal.mode = PrimalMode::Exact;
    config.eta2 = 5.0;
    config.delta = 1e-3;
    config.max_steps = 2000;
    let trace = run_constrained(&ActiveQuadratic, &config).unwrap();
    let last = trace.last().unwrap();
    assert!(
        (last.average[0] - 1.0).abs() < 1e-2,
        "θ̃ = {}",
        last.average[0]
    );
    assert!((last.lambda - 2.0).abs() < 0.1, "λ = {}", last.lambda);
}

#[test]
fn literal_averaging_satisfies_the_recurrence() {
    let mut config = RunConfig::new(vec![0.3]);
    config.primal.averaging = Averaging::Literal;
    config.primal.eta1 = 0.05;
    config.eta2 = 1.0;
    config.max_steps = 300;
    let trace = run_constrained(&ActiveQuadratic, &config).unwrap();
    let r = check_prop1(&trace, 2.0);
    assert!(r.max_recurrence_error <= 1e-12);
}
