use lmsim_core::model::{identity_residuals, residual, ModelParams, SolutionCurve};
use lmsim_core::oracles::{
    m_neg_one, m_neg_third, m_neg_third_blowup_time, m_one, m_one_rates, universal, verify_pins, verify_suite, ClosedForm, PIN_NAMES,
};
use lmsim_core::shooting::ShootControls;

const S6: f64 = 2.449_489_742_783_178;

fn forms() -> Vec<ClosedForm> {
    let mut out = Vec::new();
    for tau in [0.5, 1.0, S6, 4.0] {
        out.push(ClosedForm::UniversalRational { tau });
    }
    for a in [-5.0, 0.0, S6, 7.0] {
        out.push(ClosedForm::MNegOne { a });
    }
    for a in [-3.0, -S6, 0.0, 1.0, 2.0, S6, 3.0] {
        out.push(ClosedForm::MNegThird { a });
    }
    for a in [2.0, 2.5, 4.0] {
        out.push(ClosedForm::MOne { a, branch: 1 });
        out.push(ClosedForm::MOne { a, branch: 2 });
    }
    out
}

/// `f'''` computed by hand from each closed form.
fn third(form: &ClosedForm, t: f64) -> f64 {
    let [f, fp, fpp] = form.eval(t).unwrap();
    match *form {
        ClosedForm::UniversalRational { tau } => -36.0 / (t + tau).powi(4),
        ClosedForm::MNegOne { .. } => -36.0 / (t + S6).powi(4),
        // f'' = -f f'/3 on the whole branch
        ClosedForm::MNegThird { .. } => -(fp * fp + f * fpp) / 3.0,
        ClosedForm::MOne { a, branch } => {
            let (k1, k2) = m_one_rates(a).unwrap();
            let k = if branch == 1 { k1 } else { k2 };
            -k * k * (-k * t).exp()
        }
    }
}

/// Sample points of the domain, avoiding the last tenth before a finite blow-up.
fn samples(form: &ClosedForm, n: usize) -> Vec<f64> {
    let end = form.domain_end();
    let top = if end.is_finite() { 0.9 * end } else { 60.0 };
    (0..n).map(|i| top * i as f64 / (n - 1) as f64).collect()
}

#[test]
fn closed_forms_solve_the_equation() {
    for form in forms() {
        let ms: Vec<f64> = form.m().map(|m| vec![m]).unwrap_or_else(|| vec![-3.0, -1.0, -0.5, 0.5, 1.0, 2.0]);
        for m in ms {
            let params = ModelParams::new(m).unwrap();
            for t in samples(&form, 1000) {
                let [f, fp, fpp] = form.eval(t).unwrap();
                let fppp = third(&form, t);
                let scale = fppp.abs().max((f * fpp).abs()).max(fp * fp).max(1.0);
                let r = residual(params, f, fp, fpp, fppp);
                assert!(r.abs() < 1e-12 * scale, "{form:?} m={m} t={t}: residual {r:e}");
            }
        }
    }
}

#[test]
fn closed_form_jets_are_consistent() {
    // f' and f'' agree with central differences of f and f'
    let h = 1e-5;
    for form in forms() {
        for t in samples(&form, 50).into_iter().skip(1) {
            let [_, fp, fpp] = form.eval(t).unwrap();
            let (lo, hi) = (form.eval(t - h).unwrap(), form.eval(t + h).unwrap());
            let dfp = (hi[0] - lo[0]) / (2.0 * h);
            let dfpp = (hi[1] - lo[1]) / (2.0 * h);
            assert!((dfp - fp).abs() < 1e-7 * fp.abs().max(1.0), "{form:?} t={t}: f' {fp} vs {dfp}");
            assert!((dfpp - fpp).abs() < 1e-7 * fpp.abs().max(1.0), "{form:?} t={t}: f'' {fpp} vs {dfpp}");
        }
    }
}

#[test]
fn boundary_conditions() {
    for form in forms() {
        let [f, fp, _] = form.eval(0.0).unwrap();
        assert!((f - form.a()).abs() <= 4.0 * f64::EPSILON * f.abs().max(1.0), "{form:?}: f(0) = {f}");
        // the universal curves meet f'(0) = -1 only at tau = √6; otherwise f'(0) = -a^2/6
        let slope = match form {
            ClosedForm::UniversalRational { .. } => -form.a() * form.a() / 6.0,
            _ => -1.0,
        };
        assert!((fp - slope).abs() <= 4.0 * f64::EPSILON * slope.abs(), "{form:?}: f'(0) = {fp}");
        if form.domain_end().is_infinite() {
            let [f, fp, _] = form.eval(1e6).unwrap();
            assert!(fp.abs() < 1e-10, "{form:?}: f'(1e6) = {fp}");
            if let Some(l) = form.limit() {
                assert!((f - l).abs() < 1e-5, "{form:?}: f(1e6) = {f}, limit {l}");
            }
        }
    }
}

#[test]
fn worked_values() {
    let j = universal(S6, 0.0).unwrap();
    assert!((j[2] - 2.0 / S6).abs() < 1e-15);
    assert_eq!(universal(1.0, 0.0).unwrap(), [6.0, -6.0, 12.0]);
    let j = m_neg_one(0.0, 0.0).unwrap();
    assert!(j[0].abs() < 1e-15 && (j[1] + 1.0).abs() < 1e-15);
    assert!((j[2] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    for t in [0.0, 1.0, 10.0] {
        let [_, fp, fpp] = m_neg_one(3.0, t).unwrap();
        assert!((0.5 * fpp * fpp + fp * fp * fp / 3.0).abs() < 1e-15);
    }
    let (k1, k2) = m_one_rates(2.5).unwrap();
    assert!((k1 - 0.5).abs() < 1e-15 && (k2 - 2.0).abs() < 1e-15);
    let t = 0.7;
    assert!((m_one(2.5, 1, t).unwrap()[0] - (0.5 + 2.0 * (-0.5 * t).exp())).abs() < 1e-15);
    assert!((m_one(2.5, 2, t).unwrap()[0] - (2.0 + 0.5 * (-2.0 * t).exp())).abs() < 1e-15);
    assert_eq!(m_one(2.0, 1, t).unwrap(), m_one(2.0, 2, t).unwrap());
    assert!((m_one(2.0, 1, t).unwrap()[0] - (1.0 + (-t).exp())).abs() < 1e-15);
    assert!(m_one(1.9, 1, 0.0).is_err());
    let j = m_neg_third(3.0, 0.0).unwrap();
    assert!((j[0] - 3.0).abs() < 1e-15 && (j[1] + 1.0).abs() < 1e-15 && (j[2] - 1.0).abs() < 1e-15);
    assert!(m_neg_third_blowup_time(2.0).is_finite());
    assert!(m_neg_third_blowup_time(S6).is_infinite());
    assert!(m_neg_third(2.0, m_neg_third_blowup_time(2.0) + 0.1).is_err());
}

#[test]
fn riccati_branches_meet_at_sqrt6() {
    for a in [S6 - 1e-4, S6 + 1e-4] {
        for t in (0..=20).map(|i| 0.5 * i as f64) {
            let j = m_neg_third(a, t).unwrap();
            let rc = 6.0 / (t + a);
            assert!((j[0] - rc).abs() < 1e-3, "a={a} t={t}: {} vs {rc}", j[0]);
        }
    }
}

#[test]
fn identities_vanish_on_closed_forms() {
    for form in forms() {
        let end = if form.domain_end().is_finite() { 0.9 * form.domain_end() } else { 20.0 };
        let curve = form.on(end).unwrap();
        let ms: Vec<f64> = form.m().map(|m| vec![m]).unwrap_or_else(|| vec![-2.0, -0.5, 2.0]);
        for m in ms {
            let params = ModelParams::new(m).unwrap();
            let r = identity_residuals(params, &curve, 0.0, end).unwrap();
            let scale = curve.jet(0.0).unwrap().iter().chain(curve.jet(end).unwrap().iter()).fold(1.0f64, |s, x| s.max(x.abs()));
            for (k, rk) in r.iter().enumerate() {
                assert!(rk.abs() < 1e-9 * scale.powi(3), "{form:?} m={m}: r{} = {rk:e}", k + 1);
            }
            assert_eq!(identity_residuals(params, &curve, 1.0, 1.0).unwrap(), [0.0; 3]);
        }
    }
}

#[test]
fn suite_passes_at_default_controls() {
    let report = verify_suite(&ShootControls::default());
    assert_eq!(report.pins.len(), PIN_NAMES.len());
    for pin in &report.pins {
        assert!(pin.passed, "{}: {}", pin.name, pin.detail);
        assert!(pin.measured <= pin.tolerance);
    }
}

#[test]
fn loose_tolerance_fails_the_identities() {
    let mut controls = ShootControls::default();
    controls.integrator.rel_tol = 1e-3;
    let report = verify_pins(&controls, &["identities"]).unwrap();
    let pin = &report.pins[0];
    assert!(!pin.passed, "{}", pin.detail);
    assert!(pin.measured.is_finite() && pin.measured > pin.tolerance);
    assert!(report.failures().count() == 1);
}

#[test]
fn pins_can_be_selected() {
    let report = verify_pins(&ShootControls::default(), &["m-neg-one"]).unwrap();
    assert_eq!(report.pins.len(), 1);
    assert_eq!(report.pins[0].name, "m-neg-one");
    assert!(report.passed());
    let report = verify_pins(&ShootControls::default(), &["m-neg-third"]).unwrap();
    for a in ["a=0", "a=1", "a=2"] {
        assert!(report.pins[0].detail.contains(&format!("blow-up {a}")), "{}", report.pins[0].detail);
    }
    assert!(verify_pins(&ShootControls::default(), &["nonsense"]).is_err());
}
