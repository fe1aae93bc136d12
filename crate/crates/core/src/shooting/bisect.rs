use serde::Serialize;

use super::classify::{probe, tail_of, type_a_event, type_b_event, Fate};
use super::shape::validate_shape_until;
use super::{integrate_ivp, BvpSolution, IvpSpec, Origin, Shape, ShootControls};
use crate::error::{Error, Result};
use crate::integrator::{IntegratorControls, Profile};
use crate::model::{F, FP, FPP};

/// Relative width at which bisection stops.
const WIDTH_TOL: f64 = 1e-12;
/// Separation of the two bracket profiles beyond which the midpoint profile is not trusted.
const SEPARATION_TOL: f64 = 1e-6;
const MAX_DOUBLINGS: usize = 60;
const SPAN_GROWTH: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub(crate) enum Side {
    Lower,
    Upper,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionReport {
    pub b_lo: f64,
    pub b_hi: f64,
    pub iterations: usize,
    /// Midpoints no probe could classify within the patience span, assigned by
    /// [`undecided_side`].
    pub undecided_probes: usize,
    /// Longest span a probe needed.
    pub span_used: f64,
}

/// Which side of the convex solution a run lies on.
///
/// For `m < 0` the sides are type A (below) and type B (above). For `m > 0` the
/// upper side is type B and every other fate, including a run that never decides,
/// counts as lower.
fn side(m: f64, fate: Fate) -> Side {
    match fate {
        Fate::B(_) => Side::Upper,
        Fate::A(_) => Side::Lower,
        Fate::Exhausted | Fate::Converged(_) if m > 0.0 => Side::Lower,
        Fate::Exhausted | Fate::Converged(_) => Side::Undecided,
        Fate::Vanished(_) | Fate::Singular(_) => {
            if m > 0.0 {
                Side::Lower
            } else {
                Side::Undecided
            }
        }
    }
}

/// Probe with spans growing from the base span to the patience span until the run decides.
pub(crate) fn probe_side(spec: &IvpSpec, controls: &ShootControls) -> Result<(Side, Profile<6>, f64)> {
    if spec.m < 0.0 && spec.b <= 0.0 {
        let ic = controls.integrator.with_span(controls.integrator.max_span.min(1.0));
        let (_, prof) = probe(spec, &ic, None)?;
        return Ok((Side::Lower, prof, ic.max_span));
    }
    let mut span = controls.integrator.max_span;
    loop {
        let ic = controls.integrator.with_span(span);
        let (fate, prof) = probe(spec, &ic, None)?;
        let s = if spec.m > 0.0 && fate == Fate::Exhausted && span < controls.patience_span {
            Side::Undecided
        } else {
            side(spec.m, fate)
        };
        if s != Side::Undecided || span >= controls.patience_span {
            let s = if s == Side::Undecided && spec.m > 0.0 { Side::Lower } else { s };
            return Ok((s, prof, span));
        }
        span = (span * SPAN_GROWTH).min(controls.patience_span);
    }
}

/// Side given to runs that neither turn type A nor type B within the patience span.
///
/// For `m < -1, a < 0` the runs above the convex solution include the family with
/// `lim f = 0`, none of which is type A, so the bisection separates type A from the
/// rest. Elsewhere undecided runs drift slowly towards type A, so it separates
/// type B from the rest.
pub(crate) fn undecided_side(m: f64, a: f64) -> Side {
    if m < -1.0 && a < 0.0 {
        Side::Upper
    } else {
        Side::Lower
    }
}

fn initial_upper(m: f64, a: f64) -> f64 {
    if m > -1.0 && m < 0.0 {
        // the quadratic bound from the existence argument
        let c = if m <= -1.0 / 3.0 { m } else { -(m + 1.0) / 2.0 };
        (m + 1.0) * (a.abs() + a) / 2.0 + (-2.0 * c).sqrt()
    } else if m < -1.0 {
        ((m + 1.0) * a / 2.0).max((-2.0 * m / 3.0).sqrt()).max(1.0)
    } else {
        a.abs().max(1.0)
    }
}

/// Bracket and bisect on `b` for the solution separating the two sides.
pub(crate) fn bisect(m: f64, a: f64, controls: &ShootControls) -> Result<(f64, BisectionReport, Profile<6>, Profile<6>)> {
    let spec0 = IvpSpec::new(m, a, 0.0)?;
    let mut span_used: f64 = controls.integrator.max_span;

    let mut b_hi = initial_upper(m, a);
    let mut hi_prof = None;
    for _ in 0..MAX_DOUBLINGS {
        let (s, prof, span) = probe_side(&spec0.with_b(b_hi), controls)?;
        span_used = span_used.max(span);
        if s == Side::Upper {
            hi_prof = Some(prof);
            break;
        }
        b_hi *= 2.0;
    }
    let mut hi_prof = hi_prof.ok_or_else(|| Error::Bracket(format!("no type B run up to b = {b_hi} (m={m}, a={a})")))?;

    let mut b_lo = if m < 0.0 { 0.0 } else { 0.0_f64.min(b_hi - 1.0) };
    let mut lo_prof = None;
    for _ in 0..MAX_DOUBLINGS {
        let (s, prof, span) = probe_side(&spec0.with_b(b_lo), controls)?;
        span_used = span_used.max(span);
        if s == Side::Lower {
            lo_prof = Some(prof);
            break;
        }
        if s == Side::Upper {
            b_hi = b_lo;
            hi_prof = prof;
        }
        b_lo = if b_lo == 0.0 { -1.0 } else { 2.0 * b_lo };
    }
    let mut lo_prof = lo_prof.ok_or_else(|| Error::Bracket(format!("no lower run down to b = {b_lo} (m={m}, a={a})")))?;

    let mut iterations = 0;
    let mut undecided_probes = 0;
    while b_hi - b_lo > WIDTH_TOL * b_lo.abs().max(b_hi.abs()).max(1.0) {
        let mid = 0.5 * (b_lo + b_hi);
        if mid <= b_lo || mid >= b_hi {
            break;
        }
        iterations += 1;
        let (s, prof, span) = probe_side(&spec0.with_b(mid), controls)?;
        span_used = span_used.max(span);
        let s = if s == Side::Undecided {
            undecided_probes += 1;
            undecided_side(m, a)
        } else {
            s
        };
        if s == Side::Lower {
            b_lo = mid;
            lo_prof = prof;
        } else {
            b_hi = mid;
            hi_prof = prof;
        }
    }
    let b_star = 0.5 * (b_lo + b_hi);
    let report = BisectionReport { b_lo, b_hi, iterations, undecided_probes, span_used };
    Ok((b_star, report, lo_prof, hi_prof))
}

/// First time at which the bracket profiles differ by more than the separation tolerance.
fn separation_time(lo: &Profile<6>, hi: &Profile<6>) -> f64 {
    let end = lo.t_end().min(hi.t_end());
    for &t in lo.times() {
        if t > end {
            break;
        }
        let (Ok(x), Ok(y)) = (lo.dense_eval(t), hi.dense_eval(t)) else { break };
        let d = (x[F] - y[F]).abs() + (x[FP] - y[FP]).abs() + (x[FPP] - y[FPP]).abs();
        if d > SEPARATION_TOL {
            return t;
        }
    }
    end
}

/// The convex solution, found by bisection between type A and type B runs.
///
/// For `m > 0` the bisection separates type B runs from all others, which brackets
/// the largest `b` giving a solution. A non-convex result is rejected.
pub fn shoot_convex(m: f64, a: f64, controls: &ShootControls) -> Result<BvpSolution> {
    shoot_convex_report(m, a, controls).map(|(s, _)| s)
}

pub fn shoot_convex_report(m: f64, a: f64, controls: &ShootControls) -> Result<(BvpSolution, BisectionReport)> {
    controls.validate()?;
    let (b_star, report, lo, hi) = bisect(m, a, controls)?;
    let spec = IvpSpec::new(m, a, b_star)?;
    let ic: IntegratorControls = controls.integrator.with_span(report.span_used);
    let profile = integrate_ivp(&spec, &ic, &[type_a_event(), type_b_event()])?;
    let trusted_until = separation_time(&lo, &hi).min(profile.t_end());
    let tail = tail_of(spec.params(), &profile, trusted_until);
    let shape_report = validate_shape_until(&profile, m, trusted_until);
    if shape_report.shape != Some(Shape::Convex) {
        return Err(Error::Bracket(format!(
            "bracketed solution at b = {b_star} is not convex ({:?})",
            shape_report.shape
        )));
    }
    let sol = BvpSolution {
        spec,
        shape: Shape::Convex,
        limit_ell: tail.ell,
        tail,
        origin: Origin::Bisection,
        profile,
        trusted_until,
        shape_report,
    };
    Ok((sol, report))
}
