//! Closed-form solutions used as ground truth and as fast paths.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::Profile;
use crate::model::SolutionCurve;

mod verify;

pub use verify::{verify_pins, verify_suite, PinResult, VerifyReport, PIN_NAMES};

/// `6 / (t + τ)`, a solution for every `m`.
pub fn universal(tau: f64, t: f64) -> Result<[f64; 3]> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    let x = t + tau;
    if !(x > 0.0) {
        return Err(Error::InvalidParameter(format!("t = {t} must exceed -tau = {}", -tau)));
    }
    Ok([6.0 / x, -6.0 / (x * x), 12.0 / (x * x * x)])
}

/// Relative growth of consecutive nodes of [`universal_profile`]; keeps the
/// interpolation error of the continuous extension below `1e-12`.
const UNIVERSAL_NODE_RATIO: f64 = 0.005;

/// Augmented state of `6/(t + τ)` and its derivative, with the accumulated
/// integrals of `f'^2`, `f f'^2` and `f f''^2` from `0` in closed form.
pub fn universal_state(tau: f64, t: f64) -> Result<([f64; 6], [f64; 6])> {
    let [f, fp, fpp] = universal(tau, t)?;
    let x = t + tau;
    let fppp = -36.0 / x.powi(4);
    let acc = [
        12.0 * (tau.powi(-3) - x.powi(-3)),
        54.0 * (tau.powi(-4) - x.powi(-4)),
        144.0 * (tau.powi(-6) - x.powi(-6)),
    ];
    let y = [f, fp, fpp, acc[0], acc[1], acc[2]];
    let d = [fp, fpp, fppp, fp * fp, f * fp * fp, f * fpp * fpp];
    Ok((y, d))
}

/// The orbit `6/(t + τ)` on `[0, t_end]` as a profile, sampled from the closed form.
///
/// This solution is the singular point `A` of the phase plane, a source for many
/// `m`; forward integration loses it at a rate set by the eigenvalues there, while
/// this profile stays on it.
pub fn universal_profile(tau: f64, t_end: f64) -> Result<Profile<6>> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("t_end must be positive and finite, got {t_end}")));
    }
    let mut ts = vec![0.0];
    while *ts.last().expect("nonempty") < t_end {
        let t = *ts.last().expect("nonempty");
        ts.push((t + UNIVERSAL_NODE_RATIO * (t + tau)).min(t_end));
    }
    Profile::from_curve(ts, |t| universal_state(tau, t))
}

/// `a - √6 + 6/(t + √6)`, the solution at `m = -1`.
pub fn m_neg_one(a: f64, t: f64) -> Result<[f64; 3]> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be nonnegative, got {t}")));
    }
    let s6 = 6.0_f64.sqrt();
    let x = t + s6;
    Ok([a - s6 + 6.0 / x, -6.0 / (x * x), 12.0 / (x * x * x)])
}

/// Branch of the `m = -1/3, b = a/3` closed form, selected by the sign of `a^2 - 6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RiccatiBranch {
    Hyperbolic,
    Rational,
    Trigonometric,
}

pub fn riccati_branch(a: f64) -> RiccatiBranch {
    let d = a * a - 6.0;
    if d.abs() <= 1e-12 {
        RiccatiBranch::Rational
    } else if d > 0.0 {
        RiccatiBranch::Hyperbolic
    } else {
        RiccatiBranch::Trigonometric
    }
}

/// First positive zero of `g` found by doubling a bracket and bisecting.
fn first_root(g: impl Fn(f64) -> f64, g0_positive: bool) -> f64 {
    let positive = |x: f64| (g(x) > 0.0) == g0_positive;
    let mut hi = 1.0;
    while positive(hi) {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 4.0 * f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if positive(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// End of the existence interval of the `m = -1/3, b = a/3` solution.
///
/// Infinite for `a >= √6`. For `a^2 < 6` it is the first pole of the cotangent,
/// `(6/J)(π - arccot(a/J))` with `J = √(6 - a^2)` and `arccot` valued in `(0, π)`.
/// For `a <= -√6` it is the zero of the denominator of the hyperbolic form.
pub fn m_neg_third_blowup_time(a: f64) -> f64 {
    let s6 = 6.0_f64.sqrt();
    if a >= s6 {
        return f64::INFINITY;
    }
    match riccati_branch(a) {
        RiccatiBranch::Trigonometric => {
            let j = (6.0 - a * a).sqrt();
            (6.0 / j) * (PI - arccot(a / j))
        }
        RiccatiBranch::Rational => if a > 0.0 { f64::INFINITY } else { -a },
        RiccatiBranch::Hyperbolic => {
            let c = (a * a - 6.0).sqrt();
            let (p, q) = (a + c, a - c);
            // denominator scaled by exp(-ct/6): p - q exp(-ct/3), positive at t = 0
            first_root(|t| p - q * (-c * t / 3.0).exp(), true)
        }
    }
}

fn arccot(x: f64) -> f64 {
    0.5 * PI - x.atan()
}

/// The explicit `m = -1/3` solution with `b = a/3`, valid on `[0, T)`.
///
/// The solution satisfies `f' = (a^2 - 6 - f^2)/6`, hence `f'' = -f f'/3`.
pub fn m_neg_third(a: f64, t: f64) -> Result<[f64; 3]> {
    let end = m_neg_third_blowup_time(a);
    if !(t >= 0.0 && t < end) {
        return Err(Error::InvalidParameter(format!(
            "t = {t} outside the existence interval [0, {end})"
        )));
    }
    let f = match riccati_branch(a) {
        RiccatiBranch::Hyperbolic => {
            let c = (a * a - 6.0).sqrt();
            let (p, q) = (a + c, a - c);
            let e = (-c * t / 3.0).exp();
            c * (p + q * e) / (p - q * e)
        }
        RiccatiBranch::Rational => 6.0 / (t + a),
        RiccatiBranch::Trigonometric => {
            let j = (6.0 - a * a).sqrt();
            let x = j * t / 6.0 + arccot(a / j);
            j * x.cos() / x.sin()
        }
    };
    let fp = (a * a - 6.0 - f * f) / 6.0;
    Ok([f, fp, -f * fp / 3.0])
}

/// The roots `k_1 <= k_2` of `k^2 - a k + 1`, requiring `a >= 2`.
pub fn m_one_rates(a: f64) -> Result<(f64, f64)> {
    if !(a >= 2.0) {
        return Err(Error::InvalidParameter(format!("the m = 1 closed forms need a >= 2, got {a}")));
    }
    let d = (a * a - 4.0).sqrt();
    // k1 k2 = 1 avoids cancellation in the small root
    let k2 = 0.5 * (a + d);
    Ok((1.0 / k2, k2))
}

/// `k_i + e^{-k_i t}/k_i`, the two `m = 1` solutions.
pub fn m_one(a: f64, branch: u8, t: f64) -> Result<[f64; 3]> {
    let (k1, k2) = m_one_rates(a)?;
    let k = match branch {
        1 => k1,
        2 => k2,
        _ => return Err(Error::InvalidParameter(format!("branch must be 1 or 2, got {branch}"))),
    };
    let e = (-k * t).exp();
    Ok([k + e / k, -e, k * e])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum ClosedForm {
    UniversalRational { tau: f64 },
    MNegOne { a: f64 },
    MNegThird { a: f64 },
    MOne { a: f64, branch: u8 },
}

impl ClosedForm {
    /// The exponent the closed form solves, or `None` when it solves every `m`.
    pub fn m(&self) -> Option<f64> {
        match self {
            ClosedForm::UniversalRational { .. } => None,
            ClosedForm::MNegOne { .. } => Some(-1.0),
            ClosedForm::MNegThird { .. } => Some(-1.0 / 3.0),
            ClosedForm::MOne { .. } => Some(1.0),
        }
    }

    pub fn eval(&self, t: f64) -> Result<[f64; 3]> {
        match *self {
            ClosedForm::UniversalRational { tau } => universal(tau, t),
            ClosedForm::MNegOne { a } => m_neg_one(a, t),
            ClosedForm::MNegThird { a } => m_neg_third(a, t),
            ClosedForm::MOne { a, branch } => m_one(a, branch, t),
        }
    }

    pub fn domain_end(&self) -> f64 {
        match *self {
            ClosedForm::MNegThird { a } => m_neg_third_blowup_time(a),
            _ => f64::INFINITY,
        }
    }

    /// `f(0)`.
    pub fn a(&self) -> f64 {
        match *self {
            ClosedForm::UniversalRational { tau } => 6.0 / tau,
            ClosedForm::MNegOne { a } | ClosedForm::MNegThird { a } | ClosedForm::MOne { a, .. } => a,
        }
    }

    /// `f''(0)`.
    pub fn b(&self) -> Result<f64> {
        self.eval(0.0).map(|j| j[2])
    }

    /// `lim f` at the end of an infinite domain.
    pub fn limit(&self) -> Option<f64> {
        match *self {
            ClosedForm::UniversalRational { .. } => Some(0.0),
            ClosedForm::MNegOne { a } => Some(a - 6.0_f64.sqrt()),
            ClosedForm::MNegThird { a } => {
                if a >= 6.0_f64.sqrt() {
                    Some((a * a - 6.0).max(0.0).sqrt())
                } else {
                    None
                }
            }
            ClosedForm::MOne { a, branch } => m_one_rates(a).ok().map(|(k1, k2)| if branch == 1 { k1 } else { k2 }),
        }
    }

    /// The closed form restricted to `[0, end]`.
    pub fn on(self, end: f64) -> Result<ClosedFormCurve> {
        if !(end > 0.0 && end < self.domain_end()) {
            return Err(Error::InvalidParameter(format!(
                "curve end {end} must lie in (0, {})",
                self.domain_end()
            )));
        }
        Ok(ClosedFormCurve { form: self, end })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormCurve {
    pub form: ClosedForm,
    pub end: f64,
}

impl SolutionCurve for ClosedFormCurve {
    fn span(&self) -> (f64, f64) {
        (0.0, self.end)
    }

    fn jet(&self, t: f64) -> Result<[f64; 3]> {
        self.check_in_span(t)?;
        self.form.eval(t)
    }
}
