use serde::Serialize;

use super::Shape;
use crate::integrator::Profile;
use crate::model::{fd_third_derivative, ModelParams, F, FP, FPP};

/// Sample positions checked against the equation by finite differences.
const RESIDUAL_SAMPLES: usize = 200;
const RESIDUAL_REL_TOL: f64 = 1e-3;
const RESIDUAL_MIN_SCALE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignChange {
    pub t: f64,
    /// `f''` changes from negative to positive.
    pub rising: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeReport {
    pub fpp_sign_changes: Vec<SignChange>,
    pub shape: Option<Shape>,
    /// Concavity propagates as it must: for `m < 0` once `f'' <= 0` it stays negative,
    /// for `m > 0` once `f'' >= 0` it stays positive.
    pub propagation_ok: bool,
    /// For `m > 0`: `f > 0` and `f' < 0` at every sample.
    pub positive_decreasing: Option<bool>,
    /// Largest relative residual of the equation, with `f'''` by finite differences.
    pub max_rel_residual: f64,
    pub violations: Vec<String>,
}

/// Sign pattern of `f''` and the structural checks every solution must pass.
pub fn validate_shape(prof: &Profile<6>, m: f64) -> ShapeReport {
    validate_shape_until(prof, m, prof.t_end())
}

/// As [`validate_shape`], restricted to samples with `t <= t_max`.
pub fn validate_shape_until(prof: &Profile<6>, m: f64, t_max: f64) -> ShapeReport {
    let mut violations = Vec::new();
    let n = prof.times().iter().take_while(|&&t| t <= t_max).count().max(1);
    let ts = &prof.times()[..n];
    let ys = &prof.states()[..n];

    let sign = |v: f64| if v > 0.0 { 1 } else if v < 0.0 { -1 } else { 0 };
    let mut changes = Vec::new();
    let mut last_sign = 0;
    for (t, y) in ts.iter().zip(ys) {
        let s = sign(y[FPP]);
        if s != 0 {
            if last_sign != 0 && s != last_sign {
                changes.push(SignChange { t: *t, rising: s > 0 });
            }
            last_sign = s;
        }
    }
    let first_sign = ys.iter().map(|y| sign(y[FPP])).find(|&s| s != 0).unwrap_or(0);
    let shape = match (first_sign, changes.as_slice()) {
        (1, []) => Some(Shape::Convex),
        (1, [c]) if !c.rising => Some(Shape::ConvexConcave),
        (-1, [c]) if c.rising => Some(Shape::ConcaveConvex),
        _ => None,
    };

    let mut propagation_ok = true;
    let mut triggered = false;
    for (t, y) in ts.iter().zip(ys) {
        let v = y[FPP];
        if triggered && ((m < 0.0 && v > 0.0) || (m > 0.0 && v < 0.0)) {
            propagation_ok = false;
            violations.push(format!("concavity propagation broken at t = {t}"));
            break;
        }
        if (m < 0.0 && v <= 0.0) || (m > 0.0 && v >= 0.0) {
            triggered = true;
        }
    }

    let positive_decreasing = (m > 0.0).then(|| {
        let ok = ys.iter().all(|y| y[F] > 0.0 && y[FP] < 0.0);
        if !ok {
            violations.push("f must stay positive and decreasing for m > 0".to_string());
        }
        ok
    });

    let max_rel_residual = residual_scan(prof, m, n);
    if max_rel_residual > RESIDUAL_REL_TOL {
        violations.push(format!("profile violates the equation: relative residual {max_rel_residual:e}"));
    }

    ShapeReport { fpp_sign_changes: changes, shape, propagation_ok, positive_decreasing, max_rel_residual, violations }
}

fn residual_scan(prof: &Profile<6>, m: f64, n: usize) -> f64 {
    let Ok(params) = ModelParams::new(m) else {
        return f64::INFINITY;
    };
    let ts = prof.times();
    if n < 3 {
        return 0.0;
    }
    let stride = ((n - 2) / RESIDUAL_SAMPLES).max(1);
    let mut worst = 0.0_f64;
    for i in (1..n - 1).step_by(stride) {
        let t = ts[i];
        let gap = (t - ts[i - 1]).min(ts[i + 1] - t);
        let h = (1e-3 * (1.0 + t.abs())).min(0.25 * gap);
        let y = &prof.states()[i];
        let Ok(fppp) = fd_third_derivative(prof, t, h) else { continue };
        let terms = [fppp, params.half_m1() * y[F] * y[FPP], params.m() * y[FP] * y[FP]];
        let scale: f64 = terms.iter().map(|v| v.abs()).sum();
        if scale < RESIDUAL_MIN_SCALE {
            continue;
        }
        worst = worst.max((terms[0] + terms[1] - terms[2]).abs() / scale);
    }
    worst
}
