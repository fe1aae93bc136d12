use lmsim_core::integrator::{IntegratorControls, Profile};
use lmsim_core::model::{fd_residual, SolutionCurve, F, FP, FPP};
use lmsim_core::oracles::{m_neg_one, universal_profile, ClosedForm};
use lmsim_core::shooting::{
    classify_ivp, estimate_limit, integrate_ivp, shoot_convex, shoot_convex_report, solve, tilde_transform, untilde_transform,
    validate_shape, IvpSpec, OutcomeKind, SearchStatus, Shape, ShootControls, Uniqueness,
};

const S6: f64 = 2.449_489_742_783_178;

fn controls() -> ShootControls {
    ShootControls::default()
}

fn classify(m: f64, a: f64, b: f64) -> lmsim_core::shooting::IvpOutcome {
    classify_ivp(&IvpSpec::new(m, a, b).unwrap(), &controls()).unwrap()
}

#[test]
fn three_outcomes_of_the_ivp() {
    let out = classify(-0.5, 0.0, 0.0);
    assert_eq!(out.kind, OutcomeKind::TypeA);
    let out = classify(-0.5, 0.0, 10.0);
    assert_eq!(out.kind, OutcomeKind::TypeB);
    let out = classify(1.0, 2.5, 0.5);
    assert_eq!(out.kind, OutcomeKind::TypeC);
    let ell = out.tail.unwrap().ell.unwrap();
    assert!((ell - 0.5).abs() < 1e-6, "ell = {ell}");
    assert!(IvpSpec::new(0.0, 1.0, 1.0).is_err());
    assert!(IvpSpec::new(1.0, f64::NAN, 1.0).is_err());
}

#[test]
fn witnesses_carry_the_defining_signs() {
    for (m, a, b) in [(-0.5, 0.0, 0.0), (-0.5, 0.0, 10.0), (-2.0, 1.0, 0.5), (-2.0, 1.0, 3.0), (0.5, 3.0, -1.0), (2.0, 1.0, 0.5)] {
        let spec = IvpSpec::new(m, a, b).unwrap();
        let out = classify_ivp(&spec, &controls()).unwrap();
        let Some(tw) = out.witness_t else { continue };
        let prof = integrate_ivp(&spec, &IntegratorControls::default().with_span(tw + 1.0), &[]).unwrap();
        let y = prof.dense_eval(tw).unwrap();
        match out.kind {
            OutcomeKind::TypeA => assert!(y[FPP].abs() < 1e-8 && y[FP] < 0.0, "({m},{a},{b}): {y:?}"),
            OutcomeKind::TypeB => assert!(y[FP].abs() < 1e-8 && y[FPP] > 0.0, "({m},{a},{b}): {y:?}"),
            OutcomeKind::FVanished => assert!(y[F].abs() < 1e-8, "({m},{a},{b}): {y:?}"),
            _ => {}
        }
    }
}

#[test]
fn convex_shots_at_closed_forms() {
    let sol = shoot_convex(-1.0, S6, &controls()).unwrap();
    assert!((sol.spec.b - (2.0f64 / 3.0).sqrt()).abs() < 1e-8, "b* = {}", sol.spec.b);
    assert_eq!(sol.shape, Shape::Convex);
    for m in [-2.0, -0.5] {
        let sol = shoot_convex(m, S6, &controls()).unwrap();
        assert!((sol.spec.b - 2.0 / S6).abs() < 1e-8, "m={m}: b* = {}", sol.spec.b);
    }
}

#[test]
fn convex_shot_at_m_neg_two_from_zero() {
    let (sol, report) = shoot_convex_report(-2.0, 0.0, &controls()).unwrap();
    let ell = sol.limit_ell.unwrap();
    assert!(ell > -2.0 && ell < 0.0, "ell = {ell}");
    assert!(report.b_hi - report.b_lo <= 1e-12 * sol.spec.b.abs().max(1.0));
    let mut tight = controls();
    tight.integrator = tight.integrator.with_tolerances(1e-12, 1e-14);
    let oracle = shoot_convex(-2.0, 0.0, &tight).unwrap();
    assert!((oracle.spec.b - sol.spec.b).abs() < 1e-6, "{} vs {}", oracle.spec.b, sol.spec.b);
    assert!((oracle.limit_ell.unwrap() - ell).abs() < 1e-5);
}

#[test]
fn m_neg_one_closed_form_is_the_only_solution() {
    let set = solve(-1.0, 7.0, &controls()).unwrap();
    assert_eq!(set.isolated.len(), 1);
    assert!(set.family.is_none());
    let sol = &set.isolated[0];
    assert!((sol.limit_ell.unwrap() - (7.0 - S6)).abs() < 1e-6);
    assert!((sol.spec.b - 0.816_496_580_9).abs() < 1e-9);
    for t in [0.0, 1.0, 5.0, 20.0] {
        let y = sol.profile.dense_eval(t).unwrap();
        let exact = m_neg_one(7.0, t).unwrap();
        assert!((y[F] - exact[0]).abs() < 1e-6, "t={t}");
    }
}

#[test]
fn energy_along_m_neg_one_shots() {
    for a in [-5.0, 0.0, S6, 10.0] {
        let sol = shoot_convex(-1.0, a, &controls()).unwrap();
        assert!((sol.spec.b - (2.0f64 / 3.0).sqrt()).abs() < 1e-8, "a={a}");
        let end = sol.trusted_until.min(50.0);
        for (t, y) in sol.profile.samples().filter(|(t, _)| *t <= end) {
            let e = 0.5 * y[FPP] * y[FPP] + y[FP] * y[FP] * y[FP] / 3.0;
            assert!(e.abs() < 1e-9, "a={a} t={t}: energy {e:e}");
        }
    }
}

#[test]
fn certified_empty_below_the_bound() {
    let set = solve(1.0, 1.3, &controls()).unwrap();
    assert!(set.is_empty());
    let reason = set.empty_reason.as_deref().unwrap();
    assert!(reason.contains("2/√(m+1)"), "{reason}");
}

#[test]
fn structure_at_m_neg_two_a_neg_one() {
    let set = solve(-2.0, -1.0, &controls()).unwrap();
    let convex: Vec<_> = set.isolated.iter().filter(|s| s.shape == Shape::Convex).collect();
    let cc: Vec<_> = set.isolated.iter().filter(|s| s.shape == Shape::ConvexConcave).collect();
    assert_eq!(convex.len(), 1);
    assert_eq!(cc.len(), 1);
    assert!(cc[0].limit_ell.unwrap() < -1e-3);
    let fam = set.family.as_ref().unwrap();
    assert!(fam.b_lo < fam.b_hi);
    assert_eq!(fam.samples.len(), controls().family_samples);
    for s in &fam.samples {
        assert!(s.spec.b > fam.b_lo && s.spec.b < fam.b_hi);
        assert!(s.limit_ell.unwrap().abs() < 1e-3);
    }
    assert_eq!(set.uniqueness, Uniqueness::Proven);
}

#[test]
fn search_statuses_by_regime() {
    let set = solve(-0.75, -1.0, &controls()).unwrap();
    assert!(matches!(set.convex_concave_search, SearchStatus::NotAttempted(_)));
    assert_eq!(set.uniqueness, Uniqueness::Proven);
    let set = solve(-0.2, 1.0, &controls()).unwrap();
    assert!(matches!(set.convex_concave_search, SearchStatus::Open(_)));
    assert_eq!(set.uniqueness, Uniqueness::Unknown);
    assert_eq!(set.isolated.len(), 1);
}

#[test]
fn limit_estimates() {
    let prof = universal_profile(S6, 1e5).unwrap();
    let est = estimate_limit(&prof, 1e-8).unwrap();
    assert!(est.ell > 0.0 && est.ell < 1e-3, "{est:?}");
    assert!(est.extrapolated.unwrap().abs() < 1e-8, "{est:?}");

    let spec = IvpSpec::new(1.0, 2.5, 0.5).unwrap();
    let prof = integrate_ivp(&spec, &IntegratorControls::default().with_span(100.0), &[]).unwrap();
    let est = estimate_limit(&prof, 1e-8).unwrap();
    assert!((est.ell - 0.5).abs() < 1e-6, "{est:?}");

    let sol = shoot_convex(-2.0, 0.0, &controls()).unwrap();
    let est = estimate_limit(&sol.profile, 1e-8).unwrap();
    assert!(est.ell > -2.0 && est.ell < 0.0, "{est:?}");

    let short = integrate_ivp(&spec, &IntegratorControls::default().with_span(1.0), &[]).unwrap();
    assert!(estimate_limit(&short, 1e-8).is_err());
}

#[test]
fn tilde_transform_examples() {
    let zero = Profile::<6>::from_curve(vec![0.0, 1.0, 2.0], |_| Ok(([0.0; 6], [0.0; 6]))).unwrap();
    let z = tilde_transform(-3.0, &zero).unwrap();
    for s in [0.0, 0.5, 1.5] {
        assert_eq!(z.jet(s).unwrap(), [0.0; 3]);
    }
    let u = ClosedForm::UniversalRational { tau: S6 }.on(50.0).unwrap();
    let t = tilde_transform(-3.0, u).unwrap();
    let j = t.jet(0.0).unwrap();
    assert!((j[0] + S6).abs() < 1e-15 && (j[1] - 1.0).abs() < 1e-15);
    assert!(tilde_transform(-1.0, u).is_err());
    assert!(tilde_transform(-0.5, u).is_err());
}

#[test]
fn tilde_transform_of_a_computed_solution() {
    let m = -2.0;
    let mut tight = controls();
    tight.integrator = tight.integrator.with_tolerances(1e-12, 1e-14);
    let sol = shoot_convex(m, 1.0, &tight).unwrap();
    let end = sol.trusted_until.min(30.0);
    let prof = integrate_ivp(&sol.spec, &tight.integrator.with_span(end), &[]).unwrap();
    let tilde = tilde_transform(m, &prof).unwrap();
    assert!((tilde.jet(0.0).unwrap()[1] - 1.0).abs() < 1e-14);
    let (s0, s1) = tilde.span();
    let c2 = 2.0 * m / (m + 1.0);
    for i in 1..200 {
        let s = s0 + (s1 - s0) * i as f64 / 200.0;
        let r = fd_residual(&tilde, 1.0, c2, s, 1e-3).unwrap();
        assert!(r.abs() < 1e-8, "s={s}: residual {r:e}");
    }
    let back = untilde_transform(m, tilde).unwrap();
    for (t, y) in prof.samples() {
        let j = back.jet(t).unwrap();
        for k in 0..3 {
            assert!((j[k] - y[k]).abs() < 1e-10, "t={t}");
        }
    }
}

#[test]
fn shape_reports() {
    let set = solve(2.0, 3.0, &controls()).unwrap();
    assert!(!set.is_empty());
    for s in set.all() {
        let r = validate_shape(&s.profile, 2.0);
        assert_eq!(r.positive_decreasing, Some(true), "{:?}", r.violations);
        assert!(r.propagation_ok);
    }

    let (m, a) = (-2.0, -1.0);
    let set = solve(m, a, &controls()).unwrap();
    let cc = set.isolated.iter().find(|s| s.shape == Shape::ConvexConcave).unwrap();
    let r = validate_shape(&cc.profile, m);
    assert_eq!(r.fpp_sign_changes.len(), 1);
    assert!(!r.fpp_sign_changes[0].rising);
    let bound = ((m + 1.0) * a / 2.0).max((-2.0 * m / 3.0).sqrt());
    assert!(cc.spec.b > bound, "b = {} bound {bound}", cc.spec.b);

    let fake = Profile::<6>::from_curve((0..=20).map(|i| 0.1 * i as f64).collect(), |t| {
        Ok(([1.0 - t, -1.0, 0.0, t, 0.0, 0.0], [-1.0, 0.0, 0.0, 1.0, 0.0, 0.0]))
    })
    .unwrap();
    let r = validate_shape(&fake, 2.0);
    assert!(!r.violations.is_empty());
}

#[test]
fn bisection_brackets_are_monotone() {
    for m in [-0.75, -0.5, -0.2] {
        for a in [-1.0, 0.0, 1.0, 3.0] {
            let (sol, rep) = shoot_convex_report(m, a, &controls()).unwrap();
            assert_eq!(sol.shape, Shape::Convex);
            if rep.undecided_probes == 0 {
                assert_eq!(classify(m, a, rep.b_lo).kind, OutcomeKind::TypeA, "m={m} a={a}");
                assert_eq!(classify(m, a, rep.b_hi).kind, OutcomeKind::TypeB, "m={m} a={a}");
            }
            let b_star = sol.spec.b;
            for i in 0..50 {
                let b = 2.0 * b_star * i as f64 / 49.0;
                if (b - b_star).abs() < 1e-3 * b_star.abs().max(1.0) {
                    continue;
                }
                let kind = classify(m, a, b).kind;
                let expect = if b < b_star { OutcomeKind::TypeA } else { OutcomeKind::TypeB };
                assert_eq!(kind, expect, "m={m} a={a} b={b} (b* = {b_star})");
            }
        }
    }
}
