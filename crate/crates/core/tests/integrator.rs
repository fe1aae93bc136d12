use lmsim_core::integrator::{
    integrate, Direction, EventAction, EventSpec, FnSystem, IntegratorControls, Profile, Termination,
};
use lmsim_core::model::{TSystem, F, FP, FPP};
use lmsim_core::oracles::{m_neg_one, m_neg_third, universal_state};
use lmsim_core::{Error, ModelParams};
use proptest::prelude::*;

fn decay() -> FnSystem<impl Fn(f64, &[f64; 1]) -> [f64; 1]> {
    FnSystem(|_t: f64, y: &[f64; 1]| [-y[0]])
}

fn try_ivp(m: f64, a: f64, b: f64, span: f64) -> lmsim_core::Result<Profile<6>> {
    let system = TSystem::new(ModelParams::new(m).unwrap());
    let controls = IntegratorControls::default().with_span(span);
    integrate(&system, [a, -1.0, b, 0.0, 0.0, 0.0], 0.0, &controls, &[])
}

fn ivp(m: f64, a: f64, b: f64, span: f64) -> Profile<6> {
    try_ivp(m, a, b, span).unwrap()
}

#[test]
fn exponential_decay_endpoint() {
    let prof = integrate(&decay(), [1.0], 0.0, &IntegratorControls::default().with_span(1.0), &[]).unwrap();
    assert!(matches!(prof.termination(), Termination::SpanExhausted { .. }));
    assert_eq!(prof.t_end(), 1.0);
    assert!((prof.final_state()[0] - (-1.0_f64).exp()).abs() < 1e-10);
}

#[test]
fn dense_eval_reproduces_nodes_exactly() {
    let prof = integrate(&decay(), [1.0], 0.0, &IntegratorControls::default().with_span(3.0), &[]).unwrap();
    for (t, y) in prof.samples() {
        assert_eq!(prof.dense_eval(t).unwrap(), *y);
    }
}

#[test]
fn dense_eval_midpoint_of_decay() {
    let prof = integrate(&decay(), [1.0], 0.0, &IntegratorControls::default().with_span(1.0), &[]).unwrap();
    let y = prof.dense_eval(0.5).unwrap()[0];
    assert!((y - (-0.5_f64).exp()).abs() < 1e-9);
}

#[test]
fn interpolation_error_at_step_midpoints() {
    let prof = integrate(&decay(), [1.0], 0.0, &IntegratorControls::default().with_span(5.0), &[]).unwrap();
    let ts = prof.times();
    for w in ts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let err = (prof.dense_eval(mid).unwrap()[0] - (-mid).exp()).abs();
        assert!(err < 1e-9, "midpoint {mid}: {err:e}");
    }
}

#[test]
fn dense_eval_outside_span_is_rejected() {
    let prof = integrate(&decay(), [1.0], 0.0, &IntegratorControls::default().with_span(1.0), &[]).unwrap();
    assert!(matches!(prof.dense_eval(1.5), Err(Error::OutOfSpan { .. })));
    assert!(matches!(prof.dense_eval(-0.1), Err(Error::OutOfSpan { .. })));
}

#[test]
fn invalid_controls_are_rejected() {
    let bad = [
        IntegratorControls { rel_tol: 0.0, ..Default::default() },
        IntegratorControls { abs_tol: -1.0, ..Default::default() },
        IntegratorControls { min_step: 1.0, max_step: 0.5, ..Default::default() },
        IntegratorControls { magnitude_cap: 1.0, ..Default::default() },
        IntegratorControls { max_span: f64::INFINITY, ..Default::default() },
    ];
    for c in bad {
        assert!(matches!(
            integrate(&decay(), [1.0], 0.0, &c, &[]),
            Err(Error::InvalidControls(_))
        ));
    }
}

#[test]
fn non_finite_start_is_rejected() {
    let c = IntegratorControls::default();
    assert!(matches!(integrate(&decay(), [f64::NAN], 0.0, &c, &[]), Err(Error::NonFinite(_))));
    let singular = FnSystem(|_t: f64, y: &[f64; 1]| [1.0 / y[0]]);
    assert!(matches!(integrate(&singular, [0.0], 0.0, &c, &[]), Err(Error::NonFinite(_))));
}

#[test]
fn riccati_case_below_sqrt6_is_singular() {
    let prof = ivp(-1.0 / 3.0, 2.0, 2.0 / 3.0, 100.0);
    assert!(prof.termination().is_singular(), "{:?}", prof.termination());
    assert!(prof.t_end() < 100.0);
}

#[test]
fn riccati_case_above_sqrt6_runs_to_span_end() {
    let prof = ivp(-1.0 / 3.0, 3.0, 1.0, 100.0);
    assert!(matches!(prof.termination(), Termination::SpanExhausted { .. }));
    for (t, y) in prof.samples() {
        let exact = m_neg_third(3.0, t).unwrap();
        assert!((y[F] - exact[0]).abs() < 1e-6, "t = {t}");
    }
}

#[test]
fn m_neg_one_profile_at_one() {
    for a in [-5.0, 0.0, 6.0_f64.sqrt(), 10.0] {
        let b = (2.0_f64 / 3.0).sqrt();
        let prof = ivp(-1.0, a, b, 10.0);
        let y = prof.dense_eval(1.0).unwrap();
        let expected = a - 6.0_f64.sqrt() + 6.0 / (1.0 + 6.0_f64.sqrt());
        assert!((y[F] - expected).abs() < 1e-8, "a = {a}");
        assert!((y[F] - m_neg_one(a, 1.0).unwrap()[0]).abs() < 1e-8);
    }
}

#[test]
fn fixed_step_order_is_five() {
    // forcing the step through max_step with loose tolerances isolates the method order
    let errs: Vec<(f64, f64)> = (0..5)
        .map(|k| {
            let h = 0.25 * 0.5_f64.powi(k);
            let c = IntegratorControls { max_step: h, ..IntegratorControls::default().with_span(10.0).with_tolerances(0.1, 0.1) };
            let prof = integrate(&decay(), [1.0], 0.0, &c, &[]).unwrap();
            (h, (prof.final_state()[0] / (-10.0_f64).exp() - 1.0).abs())
        })
        .collect();
    for w in errs.windows(2) {
        let slope = (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln();
        assert!((slope - 5.0).abs() < 1.0, "observed order {slope}");
    }
}

#[test]
fn error_tracks_tolerance() {
    // global error of a tolerance-proportional 5(4) controller scales like tol^1
    let pts: Vec<(f64, f64)> = (0..7)
        .map(|k| {
            let tol = 1e-4 * 0.25_f64.powi(k);
            let c = IntegratorControls::default().with_span(1.0).with_tolerances(tol, tol);
            let prof = integrate(&decay(), [1.0], 0.0, &c, &[]).unwrap();
            (tol.ln(), (prof.final_state()[0] - (-1.0_f64).exp()).abs().ln())
        })
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope - 1.0).abs() < 0.2, "log-log slope {slope}");
}

#[test]
fn simultaneous_events_earliest_wins_then_list_order() {
    let c = IntegratorControls::default().with_span(5.0);
    let events = [
        EventSpec::new("late", Direction::Falling, EventAction::Terminate, |_, y: &[f64; 1]| y[0] - 0.3),
        EventSpec::new("first", Direction::Falling, EventAction::Terminate, |_, y: &[f64; 1]| y[0] - 0.5),
        EventSpec::new("twin", Direction::Falling, EventAction::Terminate, |_, y: &[f64; 1]| y[0] - 0.5),
    ];
    let prof = integrate(&decay(), [1.0], 0.0, &c, &events).unwrap();
    match prof.termination() {
        Termination::Event { label, t } => {
            assert_eq!(label, "first");
            assert!((t - 2.0_f64.ln()).abs() < 1e-9);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn recorded_events_do_not_stop_the_run() {
    let c = IntegratorControls::default().with_span(3.0);
    let events = [EventSpec::new("half", Direction::Any, EventAction::Record, |_, y: &[f64; 1]| y[0] - 0.5)];
    let prof = integrate(&decay(), [1.0], 0.0, &c, &events).unwrap();
    assert!(matches!(prof.termination(), Termination::SpanExhausted { .. }));
    assert_eq!(prof.events().len(), 1);
    assert!(prof.first_event("half").is_some());
}

#[test]
fn wrong_direction_does_not_fire() {
    let c = IntegratorControls::default().with_span(3.0);
    let events = [EventSpec::new("up", Direction::Rising, EventAction::Terminate, |_, y: &[f64; 1]| y[0] - 0.5)];
    let prof = integrate(&decay(), [1.0], 0.0, &c, &events).unwrap();
    assert!(prof.events().is_empty());
}

#[test]
fn converge_action_reports_converged() {
    let c = IntegratorControls::default().with_span(50.0);
    let events = [EventSpec::new("small", Direction::Falling, EventAction::Converge, |_, y: &[f64; 1]| y[0] - 1e-3)];
    let prof = integrate(&decay(), [1.0], 0.0, &c, &events).unwrap();
    assert!(matches!(prof.termination(), Termination::Converged { label, .. } if label == "small"));
}

#[test]
fn blow_up_of_quadratic_growth() {
    // y' = y^2, y(0) = 1 blows up at t = 1
    let c = IntegratorControls::default().with_span(5.0);
    let prof = integrate(&FnSystem(|_t: f64, y: &[f64; 1]| [y[0] * y[0]]), [1.0], 0.0, &c, &[]).unwrap();
    assert!(prof.termination().is_singular());
    let t_star = prof.t_end();
    assert!((t_star - (1.0 - 1.0 / c.magnitude_cap)).abs() < 1e-6, "t* = {t_star}");
}

#[test]
fn exact_profile_matches_universal_curve() {
    let tau = 6.0_f64.sqrt();
    let ts: Vec<f64> = (0..=200).map(|i| i as f64 * 0.25).collect();
    let prof = Profile::<6>::from_curve(ts, |t| universal_state(tau, t)).unwrap();
    assert!(matches!(prof.termination(), Termination::SpanExhausted { .. }));
    for (t, y) in prof.samples() {
        assert_eq!(*y, universal_state(tau, t).unwrap().0);
    }
    for i in 0..200 {
        let t = 0.25 * i as f64 + 0.125;
        let y = prof.dense_eval(t).unwrap();
        let x = t + tau;
        assert!((y[F] - 6.0 / x).abs() < 1e-7);
        assert!((y[FP] + 6.0 / (x * x)).abs() < 1e-7);
        assert!((y[FPP] - 12.0 / (x * x * x)).abs() < 1e-7);
    }
}

#[test]
fn exact_profile_rejects_unordered_nodes() {
    let tau = 1.0;
    assert!(Profile::<6>::from_curve(vec![0.0, 1.0, 1.0], |t| universal_state(tau, t)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn event_state_satisfies_guard(level in 0.01_f64..0.99, rate in 0.1_f64..5.0) {
        let sys = FnSystem(move |_t: f64, y: &[f64; 1]| [-rate * y[0]]);
        let c = IntegratorControls::default().with_span(200.0 / rate);
        let events = [EventSpec::new("cross", Direction::Falling, EventAction::Terminate, move |_, y: &[f64; 1]| y[0] - level)];
        let prof = integrate(&sys, [1.0], 0.0, &c, &events).unwrap();
        let ev = prof.first_event("cross").unwrap();
        prop_assert!((ev.state[0] - level).abs() < 1e-9);
        let t_exact = -level.ln() / rate;
        prop_assert!((ev.t - t_exact).abs() < 1e-9 * t_exact.max(1.0));
        // the event lies inside the last stored step
        let ts = prof.times();
        prop_assert!(ts.len() >= 2 && ev.t >= ts[ts.len() - 2] && ev.t <= ts[ts.len() - 1]);
    }

    #[test]
    fn integration_is_deterministic(m in -3.0_f64..3.0, a in -3.0_f64..3.0, b in -2.0_f64..2.0) {
        prop_assume!(m.abs() > 1e-3);
        // growing exponential tails are stiff and may exhaust the step budget; the error must repeat too
        let (p1, p2) = match (try_ivp(m, a, b, 8.0), try_ivp(m, a, b, 8.0)) {
            (Ok(p1), Ok(p2)) => (p1, p2),
            (e1, e2) => {
                prop_assert_eq!(e1.err(), e2.err());
                return Ok(());
            }
        };
        prop_assert_eq!(p1.times().len(), p2.times().len());
        for (x, y) in p1.states().iter().zip(p2.states()) {
            prop_assert!(x.iter().zip(y).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
        prop_assert_eq!(p1.termination(), p2.termination());
    }

    #[test]
    fn samples_stay_below_cap_before_blow_up(y0 in 0.5_f64..5.0, cap in 10.0_f64..1e6) {
        let c = IntegratorControls { magnitude_cap: cap, ..IntegratorControls::default().with_span(10.0) };
        let prof = integrate(&FnSystem(|_t: f64, y: &[f64; 1]| [y[0] * y[0]]), [y0], 0.0, &c, &[]).unwrap();
        let blew_up = matches!(prof.termination(), Termination::BlowUp { .. });
        prop_assert!(blew_up);
        let n = prof.states().len();
        for y in &prof.states()[..n - 1] {
            prop_assert!(y[0].abs() < cap);
        }
        prop_assert!(prof.t_end() < 1.0 / y0);
    }

    #[test]
    fn sample_times_strictly_increase(m in -3.0_f64..3.0, a in -3.0_f64..3.0, b in -2.0_f64..2.0) {
        prop_assume!(m.abs() > 1e-3);
        let prof = try_ivp(m, a, b, 8.0);
        prop_assume!(prof.is_ok());
        let prof = prof.unwrap();
        prop_assert!(prof.times().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn accumulated_fp2_is_nondecreasing(m in -3.0_f64..3.0, a in -3.0_f64..3.0, b in -2.0_f64..2.0) {
        prop_assume!(m.abs() > 1e-3);
        let prof = try_ivp(m, a, b, 8.0);
        prop_assume!(prof.is_ok());
        let prof = prof.unwrap();
        prop_assert!(prof.states().windows(2).all(|w| w[1][3] >= w[0][3]));
    }
}
