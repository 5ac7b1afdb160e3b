mod common;

use common::{
    central_difference, cone_cases, cone_point, gordan_trials, normal_values, random_expr,
    random_point, rel_close, rng, vertex_reduction_failures,
};
use proptest::prelude::*;
use rand::Rng;

use vvicert_core::audit::{
    generate_instance, run_matrix, Outcome, RandomInstanceSpec, RuleId, DEFAULT_RADIUS,
};
use vvicert_core::certify::{
    self, invex_pair_at, invex_pairs, CheckSpec, InvexClass, PointOutcome, Quantifier, VviVariant,
};
use vvicert_core::cone::OrderingCone;
use vvicert_core::expr::{parse, Context};
use vvicert_core::linalg::norm;
use vvicert_core::model::KernelKind;
use vvicert_core::problem::Problem;
use vvicert_core::sampling::SamplingPlan;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn printed_expressions_reparse_identically(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let text = random_expr(&mut r, n, 4);
        let e = parse(&text, n, Context::Function).unwrap();
        let again = parse(&e.to_string(), n, Context::Function).unwrap();
        for _ in 0..100 {
            let x = random_point(&mut r, n, 2.0);
            let (a, b) = (e.eval(&x).unwrap(), again.eval(&x).unwrap());
            prop_assert!(rel_close(a, b, 1e-12), "{text}: {a} vs {b} at {x:?}");
        }
    }

    #[test]
    fn derivatives_match_central_differences(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let text = random_expr(&mut r, n, 3);
        let e = parse(&text, n, Context::Function).unwrap();
        for _ in 0..10 {
            let x = random_point(&mut r, n, 1.0);
            for j in 0..n {
                let d = e.differentiate(j).unwrap().eval(&x).unwrap();
                let fd = central_difference(|p| e.eval(p).unwrap(), &x, j, 1e-5);
                prop_assert!(rel_close(d, fd, 1e-6), "d/dx{} {text} at {x:?}: {d} vs {fd}", j + 1);
            }
        }
    }

    #[test]
    fn differentiation_is_linear(seed in any::<u64>(), n in 1usize..4) {
        let mut r = rng(seed);
        let (ta, tb) = (random_expr(&mut r, n, 3), random_expr(&mut r, n, 3));
        let a = parse(&ta, n, Context::Function).unwrap();
        let b = parse(&tb, n, Context::Function).unwrap();
        let sum = parse(&format!("({ta}) + ({tb})"), n, Context::Function).unwrap();
        for _ in 0..10 {
            let x = random_point(&mut r, n, 1.5);
            for j in 0..n {
                let lhs = sum.differentiate(j).unwrap().eval(&x).unwrap();
                let rhs = a.differentiate(j).unwrap().eval(&x).unwrap() + b.differentiate(j).unwrap().eval(&x).unwrap();
                prop_assert!(rel_close(lhs, rhs, 1e-12));
            }
        }
    }

    #[test]
    fn cone_order_is_transitive(
        which in 0usize..4,
        x in prop::collection::vec(-5.0..5.0f64, 3),
        w1 in prop::collection::vec(0.0..2.0f64, 4),
        w2 in prop::collection::vec(0.0..2.0f64, 4),
        noise in prop::collection::vec(-1e-9..1e-9f64, 3),
    ) {
        let cone = &cone_cases()[which];
        let k = cone.dim();
        let x = &x[..k];
        let y: Vec<f64> = x.iter().zip(cone_point(cone, &w1)).zip(&noise).map(|((a, b), n)| a + b + n).collect();
        let z: Vec<f64> = y.iter().zip(cone_point(cone, &w2)).map(|(a, b)| a + b).collect();
        if cone.leq(x, &y).unwrap() && cone.leq(&y, &z).unwrap() {
            let gap: Vec<f64> = z.iter().zip(x).map(|(a, b)| a - b).collect();
            prop_assert!(normal_values(cone, &gap).iter().all(|&v| v >= -2.0 * cone.tol()));
        }
    }

    #[test]
    fn cone_order_is_antisymmetric(
        which in 0usize..4,
        x in prop::collection::vec(-5.0..5.0f64, 3),
        d in prop::collection::vec(-1e-3..1e-3f64, 3),
    ) {
        let cone = &cone_cases()[which];
        let k = cone.dim();
        let x = &x[..k];
        let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        if cone.leq(x, &y).unwrap() && cone.leq(&y, x).unwrap() {
            prop_assert!(norm(&d[..k]) <= 1e-7, "{d:?}");
        }
    }

    #[test]
    fn strict_order_is_convex(
        which in 0usize..4,
        w1 in prop::collection::vec(0.01..2.0f64, 4),
        w2 in prop::collection::vec(0.01..2.0f64, 4),
        lambda in 0.0..=1.0f64,
    ) {
        let cone = &cone_cases()[which];
        let zero = vec![0.0; cone.dim()];
        let (u, v) = (cone_point(cone, &w1), cone_point(cone, &w2));
        prop_assume!(cone.lt(&zero, &u).unwrap() && cone.lt(&zero, &v).unwrap());
        let mix: Vec<f64> = u.iter().zip(&v).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        prop_assert!(cone.lt(&zero, &mix).unwrap());
    }

    #[test]
    fn orthant_membership_is_componentwise(v in prop::collection::vec(-1.0..1.0f64, 1..5)) {
        let cone = OrderingCone::orthant(v.len()).unwrap();
        prop_assert_eq!(cone.contains(&v).unwrap(), v.iter().all(|&c| c >= -cone.tol()));
    }
}

fn random_instance(seed: u64) -> Problem {
    generate_instance(&RandomInstanceSpec::from_seed(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(25))]

    // 25 instances x 40 points = 1000 single-region points.
    #[test]
    fn jacobian_matches_finite_differences(seed in any::<u64>()) {
        let p = random_instance(seed);
        let n = p.f.input_dim();
        let mut r = rng(seed);
        let h = 1e-5;
        let mut tested = 0;
        while tested < 40 {
            let x = random_point(&mut r, n, 0.99);
            let single = |q: &[f64]| p.f.active_pieces(q, 1e-7).map(|a| a.len() == 1).unwrap_or(false);
            let stencil_inside = (0..n).all(|j| {
                let mut a = x.clone();
                let mut b = x.clone();
                a[j] += h;
                b[j] -= h;
                single(&a) && single(&b) && p.f.active_pieces(&a, 1e-7).unwrap() == p.f.active_pieces(&x, 1e-7).unwrap()
                    && p.f.active_pieces(&b, 1e-7).unwrap() == p.f.active_pieces(&x, 1e-7).unwrap()
            });
            if !single(&x) || !stencil_inside {
                continue;
            }
            tested += 1;
            let poly = p.f.clarke_jacobian(&x, 1e-7).unwrap();
            prop_assert_eq!(poly.num_vertices(), 1);
            let v = poly.vertex(0);
            for i in 0..p.f.output_dim() {
                for j in 0..n {
                    let fd = central_difference(|q| p.f.eval(q).unwrap()[i], &x, j, h);
                    prop_assert!(rel_close(v[(i, j)], fd, 1e-6), "({i},{j}) at {x:?}: {} vs {fd}", v[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn vertices_and_hull_lie_in_the_outer_box(seed in any::<u64>()) {
        let p = random_instance(seed);
        let n = p.f.input_dim();
        let mut r = rng(seed ^ 1);
        // Points on the gluing hyperplane s = 0 are where several pieces meet.
        let mut points = vec![vec![0.0; n]];
        for _ in 0..20 {
            points.push(random_point(&mut r, n, 0.99));
        }
        for x in points {
            let poly = p.f.clarke_jacobian(&x, 1e-7).unwrap();
            let outer = p.f.cartesian_outer_box(&x, 1e-7).unwrap();
            for v in &poly.vertices {
                prop_assert!(outer.contains(v, 1e-9));
            }
            for _ in 0..20 {
                let mut lambda: Vec<f64> = (0..poly.num_vertices()).map(|_| r.random::<f64>()).collect();
                let s: f64 = lambda.iter().sum();
                lambda.iter_mut().for_each(|l| *l /= s);
                prop_assert!(outer.contains(&poly.combination(&lambda), 1e-9));
            }
        }
    }

    #[test]
    fn audit_is_reproducible(seed in any::<u64>()) {
        let plan = SamplingPlan::default().with_seed(seed).with_samples(500);
        let inst = vec![(random_instance(seed), vec![0.0; RandomInstanceSpec::from_seed(seed).n])];
        let rules = [RuleId::T31, RuleId::T33, RuleId::T46];
        let a = run_matrix(&rules, &inst, DEFAULT_RADIUS, &plan).unwrap();
        let b = run_matrix(&rules, &inst, DEFAULT_RADIUS, &plan).unwrap();
        prop_assert_eq!(a.table(), b.table());
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        prop_assert_eq!(a.counts.violation, 0);
    }

    #[test]
    fn refutations_replay_and_verdicts_are_deterministic(seed in any::<u64>()) {
        let p = random_instance(seed);
        let n = p.f.input_dim();
        let plan = SamplingPlan::default().with_seed(seed).with_samples(500);
        let ctx = p.context(&plan).unwrap();
        let xi = vec![0.0; n];
        let mut specs = vec![
            CheckSpec::Efficiency { xi: xi.clone(), e: p.e.clone(), r: 0.25, weak: false },
            CheckSpec::Efficiency { xi: xi.clone(), e: p.e.clone(), r: 0.25, weak: true },
            CheckSpec::Critical { xi: xi.clone() },
        ];
        for variant in VviVariant::ALL {
            for quantifier in [Quantifier::Forall, Quantifier::Exists] {
                specs.push(CheckSpec::Vvi { variant, xi: xi.clone(), quantifier });
            }
        }
        for class in InvexClass::ALL {
            specs.push(CheckSpec::Invex { class, x0: xi.clone(), e: p.e.clone(), r: 0.25 });
        }
        for spec in specs {
            let a = certify::run(&ctx, &spec).unwrap();
            let b = certify::run(&ctx, &spec).unwrap();
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            if let Some(w) = a.verdict.witness() {
                prop_assert!(certify::replay(&ctx, &spec, w).unwrap(), "{} witness does not replay", spec.label());
            }
        }
    }

    /// Pairwise the stronger class implies the weaker one: a pair that passes
    /// PseudoII never violates PseudoI, QuasiII never QuasiI, and Invex
    /// neither PseudoI nor QuasiI.
    #[test]
    fn class_hierarchy_holds_pairwise(seed in any::<u64>()) {
        let p = random_instance(seed);
        let n = p.f.input_dim();
        let plan = SamplingPlan::default().with_seed(seed).with_samples(400);
        let ctx = p.context(&plan).unwrap();
        let implications = [
            (InvexClass::PseudoII, InvexClass::PseudoI),
            (InvexClass::QuasiII, InvexClass::QuasiI),
            (InvexClass::Invex, InvexClass::PseudoI),
            (InvexClass::Invex, InvexClass::QuasiI),
        ];
        for (x, y) in invex_pairs(&ctx, &vec![0.0; n], 0.25) {
            for (strong, weak) in implications {
                let s = invex_pair_at(&ctx, strong, &p.e, &x, &y).unwrap();
                if matches!(s, PointOutcome::Passed { .. }) {
                    let w = invex_pair_at(&ctx, weak, &p.e, &x, &y).unwrap();
                    prop_assert!(!matches!(w, PointOutcome::Violated(_)), "{strong:?} passes but {weak:?} fails at {x:?}, {y:?}");
                }
            }
        }
    }
}

#[test]
fn continuity_audit_on_straddling_pairs() {
    let mut problems = vec![
        Problem::load("example5", true).unwrap(),
        Problem::load("example23", true).unwrap(),
    ];
    for seed in 0..40u64 {
        let mut spec = RandomInstanceSpec::from_seed(seed);
        spec.n = 1;
        spec.pieces = spec.pieces.max(2);
        problems.push(generate_instance(&spec).unwrap());
    }
    let mut r = rng(7);
    let mut checked = 0;
    for p in &problems {
        let k =
            p.f.lipschitz_estimate(&[0.0], 0.9, 10_000, 3)
                .unwrap()
                .constant;
        let mut local = 0;
        while local < 1000 / problems.len() + 1 {
            let x = random_point(&mut r, 1, 0.9);
            let y = vec![x[0] + r.random_range(-0.05..0.05)];
            if y[0].abs() >= 0.9
                || p.f.active_pieces(&x, 0.0).unwrap() == p.f.active_pieces(&y, 0.0).unwrap()
            {
                continue;
            }
            local += 1;
            let fx = p.f.eval(&x).unwrap();
            let fy = p.f.eval(&y).unwrap();
            let df: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| a - b).collect();
            assert!(
                norm(&df) <= 1.1 * k * (x[0] - y[0]).abs() + 1e-12,
                "{}: {x:?} {y:?} k = {k}",
                p.name
            );
        }
        checked += local;
    }
    assert!(checked >= 1000);
}

#[test]
fn vertex_reduction_is_sound() {
    assert_eq!(vertex_reduction_failures(1000, 11), 0);
}

#[test]
fn gordan_dichotomy_on_random_matrices() {
    let trial = gordan_trials(1000, 2024);
    assert_eq!(trial.unverified, 0);
    assert!(trial.degenerate < 10, "{} degenerate", trial.degenerate);
}

#[test]
fn more_samples_never_turn_consistent_rows_into_violations() {
    let inst = vec![
        (Problem::load("example5", true).unwrap(), vec![0.0]),
        (Problem::load("example23", true).unwrap(), vec![0.0]),
    ];
    let low = run_matrix(
        &RuleId::ALL,
        &inst,
        DEFAULT_RADIUS,
        &SamplingPlan::default().with_samples(500),
    )
    .unwrap();
    let high = run_matrix(
        &RuleId::ALL,
        &inst,
        DEFAULT_RADIUS,
        &SamplingPlan::default().with_samples(10_000),
    )
    .unwrap();
    for (l, h) in low.rows.iter().zip(&high.rows) {
        assert_eq!((l.rule, &l.instance), (h.rule, &h.instance));
        if l.outcome == Outcome::ConsistentWithTheorem {
            assert_ne!(
                h.outcome,
                Outcome::Violation,
                "{} on {}",
                h.rule,
                h.instance
            );
        }
    }
}

#[test]
fn kernel_swap_keeps_the_function() {
    let p = Problem::load("example23", true).unwrap();
    let q = p.with_kernel(KernelKind::Difference).unwrap();
    assert_eq!(p.f.eval(&[0.3]).unwrap(), q.f.eval(&[0.3]).unwrap());
    assert_eq!(q.kernel.kind(), KernelKind::Difference);
}
