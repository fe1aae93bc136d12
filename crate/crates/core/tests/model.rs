use lmsim_core::integrator::IntegratorControls;
use lmsim_core::model::{
    fd_residual, identity_residuals, isoclines, phase_rhs, psi_pole, residual, scale_solution, to_phase, IsoclineValue, ModelParams,
    PhasePoint, SolutionCurve,
};
use lmsim_core::oracles::{universal, ClosedForm};
use lmsim_core::shooting::{integrate_ivp, IvpSpec};
use proptest::prelude::*;

const S6: f64 = 2.449_489_742_783_178;

fn params(m: f64) -> ModelParams {
    ModelParams::new(m).unwrap()
}

fn valid_m() -> impl Strategy<Value = f64> {
    (-5.0f64..5.0).prop_filter("m must avoid 0 and -1", |m| m.abs() > 1e-6 && (m + 1.0).abs() > 1e-6)
}

/// Root of the isocline difference in `[lo, hi]`, polished by bisection.
fn polish(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let s = g(lo).signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid).signum() == s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn scaled_numerical_profile_solves_the_equation() {
    let m = -2.0;
    // the residual of t -> κ f(κ t) is κ^4 times that of f, so the run is made tighter than the default
    let controls = IntegratorControls { rel_tol: 1e-12, abs_tol: 1e-14, ..IntegratorControls::default() }.with_span(30.0);
    let prof = integrate_ivp(&IvpSpec::new(m, 1.0, 1.023_392_649_2).unwrap(), &controls, &[]).unwrap();
    for kappa in [0.5, 2.0] {
        let scaled = scale_solution(&prof, kappa).unwrap();
        let (t0, t1) = scaled.span();
        let mut worst: f64 = 0.0;
        for i in 1..200 {
            let t = t0 + (t1 - t0) * i as f64 / 200.0;
            worst = worst.max(fd_residual(&scaled, 0.5 * (m + 1.0), m, t, 1e-3).unwrap().abs());
        }
        assert!(worst < 1e-8, "kappa={kappa}: residual {worst:e}");
    }
    assert!(scale_solution(&prof, 0.0).is_err());
    let same = scale_solution(&prof, 1.0).unwrap();
    assert_eq!(same.jet(3.0).unwrap(), prof.jet(3.0).unwrap());
}

#[test]
fn identities_hold_on_an_integrated_run() {
    let m = -0.5;
    let prof = integrate_ivp(&IvpSpec::new(m, 0.0, 0.526_366_371_5).unwrap(), &IntegratorControls::default().with_span(14.0), &[]).unwrap();
    let r = identity_residuals(params(m), &prof, 0.0, prof.t_end()).unwrap();
    assert!(r.iter().all(|x| x.abs() < 1e-6), "{r:?}");
    let r = identity_residuals(params(m), &prof, 2.0, 9.0).unwrap();
    assert!(r.iter().all(|x| x.abs() < 1e-6), "{r:?}");
    assert!(identity_residuals(params(m), &prof, 0.0, 15.0).is_err());
}

#[test]
fn hand_evaluated_values() {
    assert_eq!(phase_rhs(params(2.0), PhasePoint::new(1.0, 2.0)), (0.0, -7.0));
    assert_eq!(residual(params(-1.0), 5.0, 2.0, 0.0, -4.0), 0.0);
    assert_eq!(isoclines(params(-1.0), 1.0).v_q, IsoclineValue::Finite(-1.0 / 3.0));
    assert_eq!(isoclines(params(2.0), psi_pole(params(2.0))).v_q, IsoclineValue::Pole);
    let p = to_phase(2.0, -1.0, 3.0).unwrap();
    assert_eq!((p.u, p.v), (-0.25, 0.375));
    assert!(to_phase(0.0, -1.0, 3.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn universal_curves_solve_every_equation(m in valid_m(), tau in 0.1f64..10.0, t in 0.0f64..100.0) {
        let [f, fp, fpp] = universal(tau, t).unwrap();
        let fppp = -36.0 / (t + tau).powi(4);
        let scale = fppp.abs().max(f * fpp).max(fp * fp);
        let r = residual(params(m), f, fp, fpp, fppp);
        prop_assert!(r.abs() < 1e-12 * scale.max(1.0), "residual {r:e}");
    }

    #[test]
    fn singular_points_are_exact_zeros(m in valid_m()) {
        for p in [PhasePoint::ORIGIN, PhasePoint::A] {
            let (pc, qc) = phase_rhs(params(m), p);
            prop_assert!(pc.abs() < 1e-13 && qc.abs() < 1e-13);
        }
    }

    #[test]
    fn universal_solution_sits_at_a(t in 0.0f64..1000.0) {
        let [f, fp, fpp] = universal(S6, t).unwrap();
        let p = to_phase(f, fp, fpp).unwrap();
        prop_assert!((p.u + 1.0 / 6.0).abs() < 1e-12 && (p.v - 1.0 / 18.0).abs() < 1e-12, "{p:?}");
    }

    #[test]
    fn isoclines_cross_only_at_a(m in valid_m()) {
        let pm = params(m);
        let pole = psi_pole(pm);
        let g = |u: f64| match isoclines(pm, u).v_q {
            IsoclineValue::Finite(vq) => 2.0 * u * u - vq,
            IsoclineValue::Pole => f64::NAN,
        };
        let n = 4000;
        let grid: Vec<f64> = (0..=n).map(|i| -2.0 + 3.0 * i as f64 / n as f64).collect();
        for w in grid.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if lo <= pole && pole <= hi {
                continue;
            }
            let (gl, gh) = (g(lo), g(hi));
            if gl == 0.0 || gl.signum() != gh.signum() {
                let root = polish(g, lo, hi);
                prop_assert!((root + 1.0 / 6.0).abs() < 1e-9 || root.abs() < 1e-9, "m={m}: root at {root}");
            }
        }
        // u = 0 is a double root and -1/6 a simple one
        prop_assert_eq!(g(0.0), 0.0);
        prop_assert!(g(-1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn scaling_keeps_universal_curves_universal(tau in 0.5f64..5.0, kappa in 0.2f64..5.0, t in 0.0f64..20.0) {
        let curve = ClosedForm::UniversalRational { tau }.on(100.0).unwrap();
        let scaled = scale_solution(curve, kappa).unwrap();
        let s = scaled.jet(t).unwrap();
        let u = universal(tau / kappa, t).unwrap();
        for k in 0..3 {
            prop_assert!((s[k] - u[k]).abs() <= 1e-12 * u[k].abs().max(1.0));
        }
    }

    #[test]
    fn scaling_preserves_zero_residual(m in valid_m(), tau in 0.5f64..5.0, kappa in 0.25f64..4.0, t in 0.5f64..10.0) {
        let curve = ClosedForm::UniversalRational { tau }.on(100.0).unwrap();
        let scaled = scale_solution(curve, kappa).unwrap();
        let r = fd_residual(&scaled, 0.5 * (m + 1.0), m, t, 1e-3).unwrap();
        let [f, fp, fpp] = scaled.jet(t).unwrap();
        let scale = (f * fpp).abs().max(fp * fp).max(1.0);
        prop_assert!(r.abs() < 1e-8 * scale, "residual {r:e}");
    }
}
