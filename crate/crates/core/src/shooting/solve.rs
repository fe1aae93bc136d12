use rayon::prelude::*;

use super::bisect::shoot_convex_report;
use super::classify::{tail_of, verify_candidate, Candidate};
use super::shape::validate_shape_until;
use super::{
    integrate_ivp, BvpSolution, Family, IvpSpec, Origin, Regime, SearchStatus, Shape, ShootControls, SolutionSet, Uniqueness,
};
use crate::error::{Error, Result};
use crate::oracles::{m_one_rates, universal_profile, ClosedForm};
use crate::phaseplane::{admissible_b, critical_a, trace_with_lines, PhaseControls, Separatrix};

/// Agreement with a closed form beyond which a numerical profile is no longer trusted.
const CLOSED_FORM_TRUST: f64 = 1e-6;

fn phase_controls(controls: &ShootControls) -> PhaseControls {
    PhaseControls::default().with_delta(controls.delta)
}

fn from_candidate(c: Candidate, origin: Origin) -> Result<BvpSolution> {
    if !c.is_solution() {
        return Err(Error::Undecided {
            horizon: c.profile.t_end(),
            detail: format!(
                "b = {} is not verified as a solution (failure {:?}, converged {}, shape {:?})",
                c.spec.b, c.failure, c.converged, c.shape_report.shape
            ),
        });
    }
    let shape = c.shape_report.shape.expect("checked by is_solution");
    Ok(BvpSolution {
        spec: c.spec,
        shape,
        limit_ell: c.tail.ell,
        tail: c.tail,
        origin,
        trusted_until: c.profile.t_end(),
        profile: c.profile,
        shape_report: c.shape_report,
    })
}

fn verified(spec: IvpSpec, controls: &ShootControls, origin: Origin) -> Result<BvpSolution> {
    from_candidate(verify_candidate(&spec, controls)?, origin)
}

/// A numerical profile started on a closed form, trusted while it agrees with it.
fn from_closed_form(m: f64, form: ClosedForm, controls: &ShootControls, origin: Origin) -> Result<BvpSolution> {
    let spec = IvpSpec::new(m, form.a(), form.b()?)?;
    let profile = integrate_ivp(&spec, &controls.integrator, &[])?;
    let mut trusted_until = profile.t_end();
    for (t, y) in profile.samples() {
        let exact = form.eval(t)?;
        if (0..3).any(|k| (y[k] - exact[k]).abs() > CLOSED_FORM_TRUST * exact[k].abs().max(1.0)) {
            trusted_until = t;
            break;
        }
    }
    let tail = tail_of(spec.params(), &profile, trusted_until);
    let shape_report = validate_shape_until(&profile, m, trusted_until);
    let shape = shape_report.shape.ok_or_else(|| Error::Degenerate(format!("closed form at m = {m} has no definite shape")))?;
    Ok(BvpSolution {
        spec,
        shape,
        limit_ell: form.limit(),
        tail,
        origin,
        profile,
        trusted_until,
        shape_report,
    })
}

/// The universal solution `6/(t + √6)` at `a = √6`, which sits on the singular point `A`.
fn fixed_point_solution(m: f64, controls: &ShootControls) -> Result<BvpSolution> {
    let tau = 6.0_f64.sqrt();
    let spec = IvpSpec::new(m, tau, 2.0 / tau)?;
    let profile = universal_profile(tau, controls.integrator.max_span)?;
    let trusted_until = profile.t_end();
    let tail = tail_of(spec.params(), &profile, trusted_until);
    let shape_report = validate_shape_until(&profile, m, trusted_until);
    Ok(BvpSolution {
        spec,
        shape: Shape::Convex,
        limit_ell: Some(0.0),
        tail,
        origin: Origin::FixedPoint,
        profile,
        trusted_until,
        shape_report,
    })
}

/// Replace a bisected convex solution at `a = √6` by the exact universal one.
fn prefer_fixed_point(m: f64, a: f64, convex: BvpSolution, controls: &ShootControls, notes: &mut Vec<String>) -> Result<BvpSolution> {
    if !is_sqrt6(a) {
        return Ok(convex);
    }
    let fixed = fixed_point_solution(m, controls)?;
    notes.push(format!("bisection gives b = {} for the universal solution b = {}", convex.spec.b, fixed.spec.b));
    Ok(fixed)
}

fn is_sqrt6(a: f64) -> bool {
    (a - 6.0_f64.sqrt()).abs() <= 1e-12
}

fn interior_samples(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| lo + (hi - lo) * i as f64 / (n + 1) as f64).collect()
}

/// Verify the family samples in parallel, keeping the verified ones and noting failures.
fn sample_family(m: f64, a: f64, lo: f64, hi: f64, controls: &ShootControls, notes: &mut Vec<String>) -> Result<Family> {
    let results: Vec<(f64, Result<BvpSolution>)> = interior_samples(lo, hi, controls.family_samples)
        .into_par_iter()
        .map(|b| (b, IvpSpec::new(m, a, b).and_then(|s| verified(s, controls, Origin::Separatrix))))
        .collect();
    let mut samples = Vec::new();
    for (b, r) in results {
        match r {
            Ok(s) => samples.push(s),
            Err(e) => notes.push(format!("family sample b = {b} not verified: {e}")),
        }
    }
    Ok(Family { b_lo: lo, b_hi: hi, samples })
}

fn empty(m: f64, a: f64, regime: Regime, reason: String) -> SolutionSet {
    SolutionSet {
        m,
        a,
        regime,
        isolated: Vec::new(),
        family: None,
        empty_reason: Some(reason),
        uniqueness: Uniqueness::Proven,
        convex_concave_search: SearchStatus::Done,
        extra: Vec::new(),
        notes: Vec::new(),
    }
}

/// The structure of the solution set at `(m, a)`.
///
/// * `m < -1`: the convex solution; for `a < 0` also the solution with `lim f < 0`
///   and an interval of `b` giving solutions with `lim f = 0`.
/// * `m = -1`: the closed form with `b = √(2/3)`.
/// * `-1 < m < 0`: the convex solution, known to be unique for `m < -1/3`.
/// * `m > 0`: empty for `a <= 2/√(m+1)`; otherwise the crossings of `S1+` with the
///   line `u = -1/a^2`, and for `m > 1` the segment of that line inside the domain
///   bounded by `S1+` and the `v`-axis. At `m = 1` the closed forms plus a `b` sweep.
pub fn solve(m: f64, a: f64, controls: &ShootControls) -> Result<SolutionSet> {
    let regime = Regime::of(m)?;
    if !a.is_finite() {
        return Err(Error::InvalidParameter(format!("a must be finite, got {a}")));
    }
    controls.validate()?;
    if m > 0.0 && a <= 2.0 / (m + 1.0).sqrt() {
        return Ok(empty(m, a, regime, "a ≤ 2/√(m+1)".to_string()));
    }
    match regime {
        Regime::BelowMinusOne => solve_below_minus_one(m, a, controls),
        Regime::MinusOne => {
            let sol = from_closed_form(m, ClosedForm::MNegOne { a }, controls, Origin::ClosedForm)?;
            Ok(SolutionSet {
                m,
                a,
                regime,
                isolated: vec![sol],
                family: None,
                empty_reason: None,
                uniqueness: Uniqueness::Proven,
                convex_concave_search: SearchStatus::NotAttempted("no convex-concave solutions exist at m = -1".to_string()),
                extra: Vec::new(),
                notes: Vec::new(),
            })
        }
        Regime::MinusOneToZero => solve_negative(m, a, controls),
        Regime::One => solve_m_one(m, a, controls),
        Regime::ZeroToOne | Regime::AboveOne => solve_positive(m, a, regime, controls),
    }
}

fn solve_below_minus_one(m: f64, a: f64, controls: &ShootControls) -> Result<SolutionSet> {
    let mut notes = Vec::new();
    let (convex, report) = shoot_convex_report(m, a, controls).map_err(|e| Error::Bracket(format!("convex solution: {e}")))?;
    notes.push(format!("convex solution bracketed in [{}, {}]", report.b_lo, report.b_hi));
    let convex = prefer_fixed_point(m, a, convex, controls, &mut notes)?;
    let mut isolated = vec![convex];
    let mut family = None;
    let search = if a < 0.0 {
        let adm = admissible_b(m, a, &phase_controls(controls))?;
        notes.push(format!(
            "S1- gives b = {} against the bisected convex b = {}",
            adm.b_convex, isolated[0].spec.b
        ));
        match verified(IvpSpec::new(m, a, adm.b_isolated)?, controls, Origin::Separatrix) {
            Ok(s) => isolated.push(s),
            Err(e) => notes.push(format!("solution with lim f < 0 at b = {} not verified: {e}", adm.b_isolated)),
        }
        family = Some(sample_family(m, a, adm.b_family.0, adm.b_family.1, controls, &mut notes)?);
        SearchStatus::Done
    } else {
        SearchStatus::NotAttempted("existence of convex-concave solutions for m < -1, a >= 0 is open".to_string())
    };
    Ok(SolutionSet {
        m,
        a,
        regime: Regime::BelowMinusOne,
        isolated,
        family,
        empty_reason: None,
        uniqueness: Uniqueness::Proven,
        convex_concave_search: search,
        extra: Vec::new(),
        notes,
    })
}

fn solve_negative(m: f64, a: f64, controls: &ShootControls) -> Result<SolutionSet> {
    let mut notes = Vec::new();
    let (convex, report) = shoot_convex_report(m, a, controls).map_err(|e| Error::Bracket(format!("convex solution: {e}")))?;
    if report.undecided_probes > 0 {
        notes.push(format!("{} bisection probes stayed undecided within the patience span", report.undecided_probes));
    }
    let convex = prefer_fixed_point(m, a, convex, controls, &mut notes)?;
    let uniqueness = if m < -1.0 / 3.0 { Uniqueness::Proven } else { Uniqueness::Unknown };
    let b_star = convex.spec.b;
    let mut extra = Vec::new();
    let search = if m <= -0.5 && a <= 0.0 {
        SearchStatus::NotAttempted("no convex-concave solutions exist for -1 < m <= -1/2, a <= 0".to_string())
    } else if controls.exploratory {
        extra = exploratory_convex_concave(m, a, b_star, controls);
        SearchStatus::Exploratory(format!("b grid above b* = {b_star}; results are not backed by a theorem"))
    } else {
        SearchStatus::Open("existence of convex-concave solutions is open here".to_string())
    };
    Ok(SolutionSet {
        m,
        a,
        regime: Regime::MinusOneToZero,
        isolated: vec![convex],
        family: None,
        empty_reason: None,
        uniqueness,
        convex_concave_search: search,
        extra,
        notes,
    })
}

fn exploratory_convex_concave(m: f64, a: f64, b_star: f64, controls: &ShootControls) -> Vec<BvpSolution> {
    let n = controls.b_grid.min(200);
    let hi = 10.0 * b_star.abs().max(1.0);
    (1..=n)
        .into_par_iter()
        .filter_map(|i| {
            let b = b_star + (hi - b_star) * i as f64 / n as f64;
            let sol = verified(IvpSpec::new(m, a, b).ok()?, controls, Origin::Sweep).ok()?;
            (sol.shape == Shape::ConvexConcave).then_some(sol)
        })
        .collect()
}

fn solve_positive(m: f64, a: f64, regime: Regime, controls: &ShootControls) -> Result<SolutionSet> {
    let mut notes = Vec::new();
    let pc = phase_controls(controls);
    let crit = critical_a(m, &pc)?;
    notes.push(format!("a1* = {}, a2* = {}", crit.a1_star, crit.a2_star));
    let u0 = -1.0 / (a * a);
    let traj = trace_with_lines(m, Separatrix::S1Plus, &pc, &[u0])?;
    let bs: Vec<f64> = traj.line_crossings.iter().map(|c| c.point.v * a * a * a).collect();

    let results: Vec<(f64, Result<BvpSolution>)> = bs
        .par_iter()
        .map(|&b| (b, IvpSpec::new(m, a, b).and_then(|s| verified(s, controls, Origin::Separatrix))))
        .collect();
    let mut isolated = Vec::new();
    for (b, r) in results {
        match r {
            Ok(s) => isolated.push(s),
            Err(e) => notes.push(format!("crossing of S1+ at b = {b} not verified: {e}")),
        }
    }

    let mut family = None;
    if regime == Regime::AboveOne && bs.len() >= 2 {
        let (lo, hi) = (bs[0].min(bs[1]), bs[0].max(bs[1]));
        family = Some(sample_family(m, a, lo, hi, controls, &mut notes)?);
    }

    if is_sqrt6(a) {
        let fixed = fixed_point_solution(m, controls)?;
        match family.as_mut() {
            Some(f) if fixed.spec.b > f.b_lo && fixed.spec.b < f.b_hi => f.samples.push(fixed),
            _ => isolated.push(fixed),
        }
    }

    isolated.sort_by(|x, y| x.spec.b.total_cmp(&y.spec.b));
    let uniqueness = if regime == Regime::ZeroToOne && a > crit.a1_star && a < crit.a2_star {
        Uniqueness::Unknown
    } else {
        Uniqueness::Proven
    };
    let empty_reason = (isolated.is_empty() && family.is_none()).then(|| format!("a < a1* = {}", crit.a1_star));
    Ok(SolutionSet {
        m,
        a,
        regime,
        isolated,
        family,
        empty_reason,
        uniqueness,
        convex_concave_search: SearchStatus::Done,
        extra: Vec::new(),
        notes,
    })
}

fn solve_m_one(m: f64, a: f64, controls: &ShootControls) -> Result<SolutionSet> {
    let mut notes = Vec::new();
    let mut isolated = Vec::new();
    let mut known = Vec::new();
    if let Ok((k1, k2)) = m_one_rates(a) {
        let branches: &[u8] = if k1 == k2 { &[1] } else { &[1, 2] };
        for &branch in branches {
            let sol = from_closed_form(m, ClosedForm::MOne { a, branch }, controls, Origin::ClosedForm)?;
            known.push(sol.spec.b);
            isolated.push(sol);
        }
    }
    // numerical sweep for anything beyond the closed forms
    let n = controls.b_grid;
    let (lo, hi) = (-10.0, 10.0);
    let step = (hi - lo) / (n - 1) as f64;
    let mut extra: Vec<BvpSolution> = (0..n)
        .into_par_iter()
        .filter_map(|i| {
            let b = lo + step * i as f64;
            if known.iter().any(|k| (k - b).abs() < step) {
                return None;
            }
            verified(IvpSpec::new(m, a, b).ok()?, controls, Origin::Sweep).ok()
        })
        .collect();
    extra.sort_by(|x, y| x.spec.b.total_cmp(&y.spec.b));
    if !extra.is_empty() {
        notes.push(format!(
            "b sweep over [{lo}, {hi}] found {} further verified grid points in [{}, {}]",
            extra.len(),
            extra[0].spec.b,
            extra[extra.len() - 1].spec.b
        ));
    }
    let empty_reason = (isolated.is_empty() && extra.is_empty()).then(|| "no closed form for a < 2 and none found by sweep".to_string());
    Ok(SolutionSet {
        m,
        a,
        regime: Regime::One,
        isolated,
        family: None,
        empty_reason,
        uniqueness: Uniqueness::Unknown,
        convex_concave_search: SearchStatus::Done,
        extra,
        notes,
    })
}
