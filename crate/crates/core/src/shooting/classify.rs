use serde::Serialize;

use super::shape::{validate_shape_until, ShapeReport};
use super::{IvpOutcome, IvpSpec, OutcomeKind, ShootControls, TailReport};
use crate::error::{Error, Result};
use crate::integrator::{integrate, Direction, EventAction, EventSpec, IntegratorControls, Profile, Termination};
use crate::model::{third_derivative, ModelParams, State3, TSystem, F, FP, FPP};

pub(crate) const TYPE_A: &str = "type_a";
pub(crate) const TYPE_B: &str = "type_b";
pub(crate) const F_ZERO: &str = "f_zero";
pub(crate) const CONVERGED: &str = "converged";
const CONCAVE_DECREASING: &str = "concave_decreasing";
const F_PRIME_POSITIVE: &str = "f_prime_positive";

pub(crate) fn type_a_event<'a>() -> EventSpec<'a, 6> {
    EventSpec::new(TYPE_A, Direction::Falling, EventAction::Terminate, |_, y: &[f64; 6]| y[FP].max(y[FPP]))
}

pub(crate) fn type_b_event<'a>() -> EventSpec<'a, 6> {
    EventSpec::new(TYPE_B, Direction::Rising, EventAction::Terminate, |_, y: &[f64; 6]| y[FP].min(y[FPP]))
}

pub(crate) fn f_zero_event<'a>(terminal: bool) -> EventSpec<'a, 6> {
    let action = if terminal { EventAction::Terminate } else { EventAction::Record };
    EventSpec::new(F_ZERO, Direction::Any, action, |_, y: &[f64; 6]| y[F])
}

pub(crate) fn converged_event<'a>(tol: f64) -> EventSpec<'a, 6> {
    EventSpec::new(CONVERGED, Direction::Falling, EventAction::Converge, move |_, y: &[f64; 6]| {
        y[FP].abs().max(y[FPP].abs()) - tol
    })
}

/// Integrate the augmented system from `f(0)=a, f'(0)=-1, f''(0)=b`.
pub fn integrate_ivp(spec: &IvpSpec, controls: &IntegratorControls, events: &[EventSpec<'_, 6>]) -> Result<Profile<6>> {
    let system = TSystem::new(spec.params());
    integrate(&system, State3::initial(spec.a, spec.b).to_array(), 0.0, controls, events)
}

/// Terminal fate of a single run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Fate {
    A(f64),
    B(f64),
    Vanished(f64),
    Singular(f64),
    Converged(f64),
    Exhausted,
}

pub(crate) fn fate_of(prof: &Profile<6>) -> Fate {
    match prof.termination() {
        Termination::Event { label, t } if label == TYPE_A => Fate::A(*t),
        Termination::Event { label, t } if label == TYPE_B => Fate::B(*t),
        Termination::Event { label, t } if label == F_ZERO => Fate::Vanished(*t),
        Termination::Event { t, .. } => Fate::Singular(*t),
        Termination::BlowUp { t } | Termination::StepUnderflow { t } => Fate::Singular(*t),
        Termination::Converged { t, .. } => Fate::Converged(*t),
        Termination::SpanExhausted { .. } => Fate::Exhausted,
    }
}

/// One run with the trichotomy events; convergence stops the run only when `tail_tol` is given.
pub(crate) fn probe(spec: &IvpSpec, ic: &IntegratorControls, tail_tol: Option<f64>) -> Result<(Fate, Profile<6>)> {
    let mut events = vec![type_a_event(), type_b_event(), f_zero_event(spec.m > 0.0)];
    if let Some(tol) = tail_tol {
        events.push(converged_event(tol));
    }
    let prof = integrate_ivp(spec, ic, &events)?;
    Ok((fate_of(&prof), prof))
}

/// `lim f` extrapolated from one tail state, assuming `f - ℓ` behaves like a
/// power `(t + τ)^{-p}` or an exponential. `None` when the tail grows (`p <= 0`).
pub(crate) fn extrapolate_limit(params: ModelParams, f: f64, fp: f64, fpp: f64) -> Option<f64> {
    let fppp = third_derivative(params, f, fp, fpp);
    if fp == 0.0 || fpp == 0.0 || fppp == 0.0 {
        return Some(f);
    }
    let r1 = -fp / fpp;
    let r2 = -fpp / fppp;
    if !(r1 > 0.0 && r2 > 0.0) {
        // not a monotone algebraic or exponential tail; the last value is the best estimate
        return Some(f);
    }
    let den = 2.0 * r2 - r1;
    if r1 > r2 {
        // power-law tail with p = (2 r2 - r1) / (r1 - r2)
        if den <= 0.0 {
            return None;
        }
    } else if den <= 0.0 {
        return Some(f);
    }
    let ell = f + r1 * r2 * fp / den;
    ell.is_finite().then_some(ell)
}

/// `lim f` from `f` at `t/4, t/2, t` by Aitken extrapolation, exact for tails
/// `ℓ + C t^{-p}` and harmless for exponential ones. `None` when the differences
/// do not shrink, i.e. `f` is unbounded or converges too slowly to tell.
pub(crate) fn aitken_limit(prof: &Profile<6>, t: f64) -> Option<f64> {
    let at = |s: f64| prof.dense_eval(s).ok().map(|y| y[F]);
    let (f1, f2, f3) = (at(0.25 * t)?, at(0.5 * t)?, at(t)?);
    let (d1, d2) = (f2 - f1, f3 - f2);
    if d1 == 0.0 || d2 == 0.0 {
        return Some(f3);
    }
    let rho = d2 / d1;
    if rho <= 0.0 {
        // not monotone on this scale; the last value is the best estimate
        return Some(f3);
    }
    if rho >= 1.0 {
        return None;
    }
    Some(f3 + d2 * rho / (1.0 - rho))
}

/// A tail whose decay length `-f'/f''` is shorter than the elapsed time by this
/// factor is treated as exponential; power laws `t^{-p}` have ratio `p + 1`.
const EXPONENTIAL_TAIL: f64 = 6.0;

/// `lim f` from the profile up to `t`: `f - f'^2/f''` on exponential tails, where
/// Aitken's estimate over `t/4, t/2, t` overshoots, and Aitken otherwise.
pub(crate) fn limit_at(prof: &Profile<6>, t: f64) -> Option<f64> {
    let y = prof.dense_eval(t).ok()?;
    if y[FPP] != 0.0 {
        let decay = -y[FP] / y[FPP];
        if decay > 0.0 && t - prof.t_start() > EXPONENTIAL_TAIL * decay {
            return Some(y[F] - y[FP] * y[FP] / y[FPP]);
        }
    }
    aitken_limit(prof, t)
}

pub(crate) fn tail_of(params: ModelParams, prof: &Profile<6>, t: f64) -> TailReport {
    let y = prof.dense_eval(t).unwrap_or(*prof.final_state());
    let ell = if t > prof.t_start() { limit_at(prof, t) } else { extrapolate_limit(params, y[F], y[FP], y[FPP]) };
    TailReport { t, f: y[F], fp_abs: y[FP].abs(), fpp_abs: y[FPP].abs(), ell }
}

/// Classify the initial value problem into the trichotomy, or report a blow-up or a zero of `f`.
///
/// For `m < 0` a zero of `f` is recorded but does not stop the run; for `m > 0` it
/// does. When the run is of type A the integration is continued without events to
/// locate a subsequent singularity.
pub fn classify_ivp(spec: &IvpSpec, controls: &ShootControls) -> Result<IvpOutcome> {
    let spec = IvpSpec::new(spec.m, spec.a, spec.b)?;
    controls.validate()?;
    let params = spec.params();
    let base = controls.integrator;
    if spec.m < 0.0 && spec.b <= 0.0 {
        // concavity at t = 0 propagates for m < 0
        return Ok(IvpOutcome {
            kind: OutcomeKind::TypeA,
            witness_t: Some(0.0),
            tail: None,
            singularity_t: follow_to_singularity(&spec, &base)?,
            span: base.max_span,
        });
    }
    for span in [base.max_span, 2.0 * base.max_span] {
        let ic = base.with_span(span);
        let (fate, prof) = probe(&spec, &ic, Some(controls.tail_tol))?;
        let outcome = |kind, witness_t: Option<f64>| IvpOutcome { kind, witness_t, tail: None, singularity_t: None, span };
        return Ok(match fate {
            Fate::A(t) => IvpOutcome {
                singularity_t: follow_to_singularity(&spec, &ic)?,
                ..outcome(OutcomeKind::TypeA, Some(t))
            },
            Fate::B(t) => outcome(OutcomeKind::TypeB, Some(t)),
            Fate::Vanished(t) => outcome(OutcomeKind::FVanished, Some(t)),
            Fate::Singular(t) => IvpOutcome { singularity_t: Some(t), ..outcome(OutcomeKind::FiniteTimeSingularity, Some(t)) },
            Fate::Converged(t) => IvpOutcome {
                tail: Some(tail_of(params, &prof, t)),
                ..outcome(OutcomeKind::TypeC, Some(t))
            },
            Fate::Exhausted => continue,
        });
    }
    Err(Error::Undecided {
        horizon: 2.0 * base.max_span,
        detail: format!("m={}, a={}, b={}: no sign event and tail above {}", spec.m, spec.a, spec.b, controls.tail_tol),
    })
}

fn follow_to_singularity(spec: &IvpSpec, ic: &IntegratorControls) -> Result<Option<f64>> {
    let prof = integrate_ivp(spec, ic, &[])?;
    Ok(prof.termination().is_singular().then(|| prof.termination().t()))
}

/// Limit of `f` read off a converged profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitEstimate {
    /// `f` at the first time with `|f'| < tol` and `|f f'| < tol`.
    pub ell: f64,
    pub t: f64,
    /// Largest change of `f` on the rest of the profile.
    pub drift: f64,
    /// Whether `drift` stays below `tol` times the remaining span.
    pub settled: bool,
    /// Extrapolation from the whole profile, see [`TailReport::ell`].
    pub extrapolated: Option<f64>,
}

pub fn estimate_limit(prof: &Profile<6>, tail_tol: f64) -> Result<LimitEstimate> {
    let (idx, (t, y)) = prof
        .samples()
        .enumerate()
        .find(|(_, (_, y))| y[FP].abs() < tail_tol && (y[F] * y[FP]).abs() < tail_tol)
        .ok_or_else(|| Error::Undecided {
            horizon: prof.t_end(),
            detail: format!("tail criterion {tail_tol} never met: not converged"),
        })?;
    let ell = y[F];
    let drift = prof.states()[idx..].iter().fold(0.0_f64, |acc, z| acc.max((z[F] - ell).abs()));
    Ok(LimitEstimate {
        ell,
        t,
        drift,
        settled: drift <= tail_tol * (prof.t_end() - t).max(1.0),
        extrapolated: limit_at(prof, prof.t_end()),
    })
}

/// Outcome of integrating a proposed `b` to a long horizon.
#[derive(Debug)]
pub struct Candidate {
    pub spec: IvpSpec,
    pub profile: Profile<6>,
    /// Label and time of the event that disqualified the run.
    pub failure: Option<(String, f64)>,
    pub tail: TailReport,
    /// `|f'|` and `|f''|` below the tail tolerance at the end of the run.
    pub converged: bool,
    pub shape_report: ShapeReport,
}

impl Candidate {
    pub fn is_solution(&self) -> bool {
        self.failure.is_none() && self.converged && self.shape_report.violations.is_empty() && self.shape_report.shape.is_some()
    }
}

/// Factor by which a verification run continues past the first time its tail is flat.
const CONFIRM_FACTOR: f64 = 4.0;
/// A flat tail with more than this many tail tolerances left to travel is still moving.
const SETTLE_FACTOR: f64 = 100.0;

/// Whether `f` at `t` is already at its limit. The remaining change is estimated
/// by `f'^2 / |f''|`, exact for exponential tails and of the order of `|f - ℓ|` for
/// algebraic ones. Exponential tails need no further run: continuing only exposes
/// the drift caused by the finite precision of `b`.
fn settled(prof: &Profile<6>, t: f64, tol: f64) -> bool {
    let Ok(y) = prof.dense_eval(t) else { return false };
    let remaining = if y[FPP] == 0.0 { 0.0 } else { y[FP] * y[FP] / y[FPP].abs() };
    remaining <= SETTLE_FACTOR * tol * y[F].abs().max(1.0)
}

/// Integrate `(m, a, b)` until `|f'|` and `|f''|` fall below the tail tolerance
/// (at most to `controls.verify_horizon`); unless the limit has settled, rerun to
/// `CONFIRM_FACTOR` times that time. Runs stop on any behavior incompatible with a solution: entering
/// `{f' < 0, f'' < 0}` for `m < 0`; `f'` turning positive or `f` vanishing for
/// `m > 0`; a singularity.
pub fn verify_candidate(spec: &IvpSpec, controls: &ShootControls) -> Result<Candidate> {
    let spec = IvpSpec::new(spec.m, spec.a, spec.b)?;
    let params = spec.params();
    let failure_events = || {
        let mut events = Vec::new();
        if spec.m < 0.0 {
            events.push(EventSpec::new(CONCAVE_DECREASING, Direction::Falling, EventAction::Terminate, |_, y: &[f64; 6]| {
                y[FP].max(y[FPP])
            }));
        } else {
            events.push(EventSpec::new(F_PRIME_POSITIVE, Direction::Rising, EventAction::Terminate, |_, y: &[f64; 6]| y[FP]));
            events.push(f_zero_event(true));
        }
        events
    };
    let mut events = failure_events();
    events.push(converged_event(controls.tail_tol));
    let first = integrate_ivp(&spec, &controls.integrator.with_span(controls.verify_horizon), &events)?;
    let profile = match first.termination() {
        Termination::Converged { t, .. } if !settled(&first, *t, controls.tail_tol) => {
            let span = (CONFIRM_FACTOR * t).min(controls.verify_horizon);
            integrate_ivp(&spec, &controls.integrator.with_span(span), &failure_events())?
        }
        _ => first,
    };
    let mut failure = match profile.termination() {
        Termination::Event { label, t } => Some((label.clone(), *t)),
        Termination::BlowUp { t } => Some(("blow_up".to_string(), *t)),
        Termination::StepUnderflow { t } => Some(("step_underflow".to_string(), *t)),
        Termination::SpanExhausted { .. } | Termination::Converged { .. } => None,
    };
    if spec.m < 0.0 && spec.b <= 0.0 {
        failure = Some((CONCAVE_DECREASING.to_string(), 0.0));
    }
    let tail = tail_of(params, &profile, profile.t_end());
    let converged = tail.fp_abs < controls.tail_tol && tail.fpp_abs < controls.tail_tol;
    let shape_report = validate_shape_until(&profile, spec.m, profile.t_end());
    Ok(Candidate { spec, profile, failure, tail, converged, shape_report })
}
