use proptest::prelude::*;
use semiclassical::limit::{build_s0, GroundStateSet, SetOptions};
use semiclassical::localization::manifold_element;
use semiclassical::minmax::solve_at;
use semiclassical::problem::{Problem, ProblemSpec};
use semiclassical::verify::{
    convergence_diagnostics, decay_recursion_check, directional_derivative_test, gradient_floor_experiment,
    tail_profile, EnsembleSpec, Regime, DEFAULT_WINDOW,
};
use semiclassical::Error;

fn reference(eps: f64) -> (ProblemSpec, GroundStateSet, Problem) {
    let spec = ProblemSpec::reference();
    let opts = SetOptions { dim: 1, v0: 2.0, delta0: spec.params.delta0, t0: spec.params.t0 };
    let set = build_s0(opts, &spec.nonlinearity).unwrap();
    let problem = spec.clone().with_localization(set.constants).at_eps(eps).unwrap();
    (spec, set, problem)
}

#[test]
fn directional_prediction_at_half() {
    let (_, _, p) = reference(0.1);
    let rec = directional_derivative_test(&[0.5], &p).unwrap();
    // V'(0.5) = -e^{-1/4}, m = 1 + e^{-1/4}, ∫U_m² = 4√m.
    let dv = -(-0.25f64).exp();
    let m = 1.0 + (-0.25f64).exp();
    assert!((rec.m - m).abs() < 1e-14);
    let predicted = -0.05 * dv * 4.0 * m.sqrt();
    assert!((rec.predicted - predicted).abs() < 1e-3 * predicted);
    assert!((0.75..=1.25).contains(&rec.ratio), "ratio {}", rec.ratio);
    assert!(rec.measured.abs() <= rec.dual_bound * (1.0 + 1e-6));
    assert!(matches!(directional_derivative_test(&[0.0], &p), Err(Error::OutOfRange(_))));
}

#[test]
fn converged_solution_decays_and_matches_the_manifold() {
    let (spec, set, p) = reference(0.1);
    let sol = solve_at(&spec, 0.1, &set).unwrap();
    let rep = tail_profile(&sol.field, &p, DEFAULT_WINDOW).unwrap();
    let fit = rep.fit.unwrap();
    assert!(fit.rate > 0.0 && fit.r_squared >= 0.99);
    assert!(rep.tail.windows(2).all(|w| w[1] <= w[0]));
    // The χ-mass at radius ε^{-1/2} stays bounded.
    assert!(rep.tail_at(10f64.sqrt()).unwrap() / 0.1f64.sqrt() < 1.0);
    let diag = convergence_diagnostics(&sol.field, &p, &set).unwrap();
    assert!(diag.within_2r0);
    let exact = manifold_element(&set, 2, &[0.0], &p).unwrap();
    let d0 = convergence_diagnostics(&exact, &p, &set).unwrap();
    assert!(d0.distance < 1e-6 && d0.member == 2);
}

#[test]
fn floor_experiment_is_reproducible_and_respects_duality() {
    let (spec, set, _) = reference(0.1);
    let ens = EnsembleSpec { members: 12, seed: 3 };
    let a = gradient_floor_experiment(&spec, &set, &[0.2, 0.1], &ens).unwrap();
    let b = gradient_floor_experiment(&spec, &set, &[0.2, 0.1], &ens).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 4);
    for r in &a.rows {
        assert!(r.duality_excess <= 1e-6, "{r:?}");
        assert!(r.min_dual_norm > 0.0);
    }
    let disp: Vec<f64> = a.rows.iter().filter(|r| r.regime == Regime::Displaced).map(|r| r.min_dual_norm).collect();
    assert!(disp[1] < disp[0]);
    let mut buf = Vec::new();
    a.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("eps,regime,min_dual_norm,witness_id\n"));
    assert!(matches!(
        gradient_floor_experiment(&spec, &set, &[0.1], &EnsembleSpec { members: 0, seed: 1 }),
        Err(Error::EmptyEnsemble(_))
    ));
}

fn iterate(q0: f64, theta: f64, b: f64, slack: &[f64]) -> Vec<f64> {
    let mut q = vec![q0];
    for s in slack {
        let next = (q.last().unwrap() / theta + b) * s;
        q.push(next.min(*q.last().unwrap()));
    }
    q
}

proptest! {
    #[test]
    fn recursion_holds_whenever_the_hypothesis_does(
        q0 in 0.0f64..100.0,
        theta in 1.05f64..4.0,
        b in 0.0f64..2.0,
        slack in prop::collection::vec(0.0f64..=1.0, 1..40),
        start in 0usize..5,
    ) {
        let q = iterate(q0, theta, b, &slack);
        let r1 = start.min(q.len() - 1) as f64;
        prop_assert!(decay_recursion_check(&q, 0.0, theta, b, r1).unwrap());
        // Monotone in b and in 1/θ.
        prop_assert!(decay_recursion_check(&q, 0.0, theta, b + 0.5, r1).unwrap());
        prop_assert!(decay_recursion_check(&q, 0.0, 1.0 + (theta - 1.0) / 2.0, b, r1).unwrap());
    }
}
