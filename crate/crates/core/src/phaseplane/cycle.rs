use serde::Serialize;

use super::{classify_a, phase_params, PhaseControls, PhaseSystem, PointClass};
use crate::error::{Error, Result};
use crate::integrator::{integrate, Direction, EventAction, EventSpec, Termination};
use crate::model::PhasePoint;

const SECTION_U: f64 = -1.0 / 6.0;
const FIXED_POINT_TOL: f64 = 1e-9;
const GRID: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitCycle {
    pub m: f64,
    /// Crossing of the cycle with the section `u = -1/6, v > 1/18`.
    pub section_point: PhasePoint,
    /// Return time in `s`.
    pub period: f64,
    /// `|R(v) - v|` at the reported point.
    pub residual: f64,
}

/// First return to the section `{u = -1/6, v > 1/18}` of the forward flow from
/// `(-1/6, v)`, with the return time. `None` when the orbit leaves without returning.
pub fn return_map(m: f64, v: f64, controls: &PhaseControls) -> Result<Option<(f64, f64)>> {
    let params = phase_params(m)?;
    if !(v > PhasePoint::A.v) {
        return Err(Error::InvalidParameter(format!("section point must lie above A, got v = {v}")));
    }
    let system = PhaseSystem { params, sign: 1.0 };
    // above A the flow crosses the section with u increasing
    let events = [EventSpec::new("return", Direction::Rising, EventAction::Terminate, |_, y: &[f64; 2]| {
        if y[1] > PhasePoint::A.v {
            y[0] - SECTION_U
        } else {
            -1.0
        }
    })];
    let start = [SECTION_U, v];
    let prof = integrate(&system, start, 0.0, &controls.integrator(), &events)?;
    Ok(match prof.termination() {
        Termination::Event { t, .. } => Some((prof.final_state()[1], *t)),
        _ => None,
    })
}

/// Best-effort search for an attracting or repelling cycle around `A`.
///
/// Scans the displacement `R(v) - v` of the return map over section points above
/// `A` and bisects the first sign change. `Ok(None)` means none was found, not
/// that none exists.
pub fn find_limit_cycle(m: f64, controls: &PhaseControls) -> Result<Option<LimitCycle>> {
    phase_params(m)?;
    let focus = matches!(classify_a(m), PointClass::UnstableFocus | PointClass::StableFocus | PointClass::WeakFocus);
    if !(m > 0.0 && focus) {
        return Err(Error::InvalidParameter(format!("limit cycles are searched around a focus A with m > 0, got m = {m}")));
    }
    let displacement = |v: f64| -> Result<Option<(f64, f64)>> { Ok(return_map(m, v, controls)?.map(|(r, t)| (r - v, t))) };
    let offsets = (0..GRID).map(|i| 1e-4 * (1e4_f64).powf(i as f64 / (GRID - 1) as f64));
    let mut prev: Option<(f64, f64)> = None;
    for off in offsets {
        let v = PhasePoint::A.v + off;
        let Some((d, _)) = displacement(v)? else { break };
        if let Some((pv, pd)) = prev {
            if pd.signum() != d.signum() {
                let (mut lo, mut hi, d_lo) = (pv, v, pd);
                while hi - lo > FIXED_POINT_TOL {
                    let mid = 0.5 * (lo + hi);
                    match displacement(mid)? {
                        Some((dm, _)) if dm.signum() == d_lo.signum() => lo = mid,
                        Some(_) => hi = mid,
                        None => hi = mid,
                    }
                }
                let v_star = 0.5 * (lo + hi);
                return Ok(displacement(v_star)?.map(|(d, period)| LimitCycle {
                    m,
                    section_point: PhasePoint::new(SECTION_U, v_star),
                    period,
                    residual: d.abs(),
                }));
            }
        }
        prev = Some((v, d));
    }
    Ok(None)
}
