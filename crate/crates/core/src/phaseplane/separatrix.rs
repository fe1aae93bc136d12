use serde::Serialize;

use super::{degenerate_m, local_seed, phase_params, PhaseControls, PhaseSystem, Separatrix};
use crate::error::{Error, Result};
use crate::integrator::{integrate, Direction, EventAction, EventSpec, Profile, Termination};
use crate::model::{p_component, q_component, PhasePoint};

const NEAR_O: &str = "near_o";
const NEAR_A: &str = "near_a";
const SECTION: &str = "section";
const LINE_PREFIX: &str = "line_";
/// Returns to the section this close to `A` are part of a spiral into `A`, not a loop.
const LOOP_MIN_OFFSET: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "curve", content = "u", rename_all = "snake_case")]
pub enum CurveKind {
    PIsocline,
    QIsocline,
    UAxis,
    VAxis,
    /// The vertical line `u = u0`.
    Line(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub curve: CurveKind,
    pub point: PhasePoint,
    /// Arc parameter along the trace, increasing in the traced direction.
    pub sigma: f64,
    pub ordinal: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseTermination {
    NearO,
    NearA,
    Escaped,
    LoopClosed,
    SpanExhausted,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseTrajectory {
    pub which: Option<Separatrix>,
    pub m: f64,
    pub start: PhasePoint,
    /// `+1` if traced with increasing `s`, `-1` if with decreasing `s`.
    pub time_sign: f64,
    /// `(sigma, point)` samples, `sigma = time_sign * s`.
    pub points: Vec<(f64, PhasePoint)>,
    /// Isocline and axis crossings in order along the trace; vertical lines are listed separately.
    pub crossings: Vec<Crossing>,
    pub line_crossings: Vec<Crossing>,
    pub termination: PhaseTermination,
    pub degenerate: bool,
    #[serde(skip_serializing)]
    profile: Profile<2>,
}

impl PhaseTrajectory {
    pub fn profile(&self) -> &Profile<2> {
        &self.profile
    }

    /// Point at arc parameter `sigma`.
    pub fn at(&self, sigma: f64) -> Result<PhasePoint> {
        let y = self.profile.dense_eval(sigma)?;
        Ok(PhasePoint::new(y[0], y[1]))
    }

    pub fn crossings_of(&self, kind: CurveKind) -> impl Iterator<Item = &Crossing> {
        self.crossings.iter().filter(move |c| c.curve == kind)
    }

    /// Sequence of crossed curves, in order.
    pub fn crossing_sequence(&self) -> Vec<CurveKind> {
        self.crossings.iter().map(|c| c.curve).collect()
    }
}

fn curve_of(label: &str, lines: &[f64]) -> Option<CurveKind> {
    match label {
        "p_isocline" => Some(CurveKind::PIsocline),
        "q_isocline" => Some(CurveKind::QIsocline),
        "u_axis" => Some(CurveKind::UAxis),
        "v_axis" => Some(CurveKind::VAxis),
        _ => label
            .strip_prefix(LINE_PREFIX)
            .and_then(|i| i.parse::<usize>().ok())
            .and_then(|i| lines.get(i).copied())
            .map(CurveKind::Line),
    }
}

/// Integrate the planar flow from `start` in direction `time_sign`, recording
/// crossings of the isoclines, the axes and the vertical lines `u = lines[i]`.
pub(crate) fn trace_from(
    m: f64,
    start: PhasePoint,
    time_sign: f64,
    which: Option<Separatrix>,
    controls: &PhaseControls,
    lines: &[f64],
) -> Result<PhaseTrajectory> {
    let params = phase_params(m)?;
    let system = PhaseSystem { params, sign: time_sign };
    let capture = controls.capture_radius;
    let pp = |y: &[f64; 2]| PhasePoint::new(y[0], y[1]);
    let mut events: Vec<EventSpec<'_, 2>> = vec![
        EventSpec::new("p_isocline", Direction::Any, EventAction::Record, move |_, y: &[f64; 2]| p_component(pp(y))),
        EventSpec::new("q_isocline", Direction::Any, EventAction::Record, move |_, y: &[f64; 2]| q_component(params, pp(y))),
        EventSpec::new("u_axis", Direction::Any, EventAction::Record, |_, y: &[f64; 2]| y[1]),
        EventSpec::new("v_axis", Direction::Any, EventAction::Record, |_, y: &[f64; 2]| y[0]),
        EventSpec::new(NEAR_O, Direction::Falling, EventAction::Terminate, move |_, y: &[f64; 2]| {
            pp(y).dist(&PhasePoint::ORIGIN) - capture
        }),
        EventSpec::new(NEAR_A, Direction::Falling, EventAction::Terminate, move |_, y: &[f64; 2]| {
            pp(y).dist(&PhasePoint::A) - capture
        }),
        EventSpec::new(SECTION, Direction::Any, EventAction::Record, |_, y: &[f64; 2]| y[0] + 1.0 / 6.0),
    ];
    for (i, &u0) in lines.iter().enumerate() {
        events.push(EventSpec::new(format!("{LINE_PREFIX}{i}"), Direction::Any, EventAction::Record, move |_, y: &[f64; 2]| {
            y[0] - u0
        }));
    }
    let profile = integrate(&system, [start.u, start.v], 0.0, &controls.integrator(), &events)?;

    let mut crossings = Vec::new();
    let mut line_crossings = Vec::new();
    let mut section_returns = Vec::new();
    for e in profile.events() {
        let point = pp(&e.state);
        if e.label == SECTION {
            if point.v > PhasePoint::A.v {
                section_returns.push(point.v);
            }
            continue;
        }
        if let Some(curve) = curve_of(&e.label, lines) {
            let target = if matches!(curve, CurveKind::Line(_)) { &mut line_crossings } else { &mut crossings };
            let ordinal = target.len();
            target.push(Crossing { curve, point, sigma: e.t, ordinal });
        }
    }
    let looped = section_returns
        .windows(2)
        .any(|w| (w[1] - w[0]).abs() < controls.loop_tol && w[1] - PhasePoint::A.v > LOOP_MIN_OFFSET);
    let termination = match profile.termination() {
        Termination::Event { label, .. } if label == NEAR_O => PhaseTermination::NearO,
        Termination::Event { label, .. } if label == NEAR_A => PhaseTermination::NearA,
        Termination::BlowUp { .. } | Termination::StepUnderflow { .. } => PhaseTermination::Escaped,
        _ if looped => PhaseTermination::LoopClosed,
        _ => PhaseTermination::SpanExhausted,
    };
    let points = profile.samples().map(|(s, y)| (s, pp(y))).collect();
    Ok(PhaseTrajectory {
        which,
        m,
        start,
        time_sign,
        points,
        crossings,
        line_crossings,
        termination,
        degenerate: degenerate_m(m),
        profile,
    })
}

/// Trace a separatrix of `O` from its local seed, in the direction in which it leaves `O`.
pub fn trace_separatrix(m: f64, which: Separatrix, controls: &PhaseControls) -> Result<PhaseTrajectory> {
    trace_with_lines(m, which, controls, &[])
}

/// As [`trace_separatrix`], also recording crossings of the vertical lines `u = lines[i]`.
pub fn trace_with_lines(m: f64, which: Separatrix, controls: &PhaseControls, lines: &[f64]) -> Result<PhaseTrajectory> {
    let seed = local_seed(m, which, controls.delta)?;
    trace_from(m, seed, which.time_sign(), Some(which), controls, lines)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalValues {
    pub m: f64,
    pub u1_star: f64,
    pub u2_star: f64,
    pub a1_star: f64,
    pub a2_star: f64,
    /// Which crossings of `S1+` produced `u1*` and `u2*`.
    pub provenance: [String; 2],
    pub degenerate: bool,
}

/// Critical values of `a` for `m > 0`, from `S1+` traced backwards from `O`.
///
/// For `0 < m < 1`, `u1*` and `u2*` are the abscissas of the last and penultimate
/// crossings of `P = 0` before `S1+` reaches `O`, i.e. the first and second ones met
/// when tracing backwards. For `m > 1` they are the crossing of `P = 0` and of the
/// `u`-axis.
pub fn critical_a(m: f64, controls: &PhaseControls) -> Result<CriticalValues> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter("critical-a defined for m>0 only".to_string()));
    }
    if m == 1.0 {
        return Err(Error::Degenerate(
            "at m = 1 the separatrix S1+ is a homoclinic loop; a2* does not exist".to_string(),
        ));
    }
    let traj = trace_separatrix(m, Separatrix::S1Plus, controls)?;
    let p_cross: Vec<&Crossing> = traj.crossings_of(CurveKind::PIsocline).filter(|c| c.point.u < 0.0).collect();
    let unresolved = |what: &str| Error::Tracing(format!("{what} not found on S1+ at m = {m} (trace ended {:?})", traj.termination));
    let (c1, c2, prov) = if m < 1.0 {
        let c1 = *p_cross.first().ok_or_else(|| unresolved("last crossing of P = 0"))?;
        let c2 = *p_cross.get(1).ok_or_else(|| unresolved("penultimate crossing of P = 0"))?;
        (c1, c2, ["last P=0 crossing", "penultimate P=0 crossing"])
    } else {
        let c1 = *p_cross.first().ok_or_else(|| unresolved("crossing of P = 0"))?;
        let c2 = traj
            .crossings_of(CurveKind::UAxis)
            .find(|c| c.sigma > c1.sigma && c.point.u < 0.0)
            .ok_or_else(|| unresolved("crossing of the u-axis"))?;
        (c1, c2, ["P=0 crossing", "u-axis crossing"])
    };
    let (u1, u2) = (c1.point.u, c2.point.u);
    if !(u1 < u2 && u2 < 0.0) {
        return Err(Error::Tracing(format!("crossing abscissas out of order: u1* = {u1}, u2* = {u2}")));
    }
    let (a1, a2) = ((-1.0 / u1).sqrt(), (-1.0 / u2).sqrt());
    let bound = 2.0 / (m + 1.0).sqrt();
    if !(a1 > bound) {
        return Err(Error::Tracing(format!("a1* = {a1} contradicts the bound a > {bound}")));
    }
    Ok(CriticalValues {
        m,
        u1_star: u1,
        u2_star: u2,
        a1_star: a1,
        a2_star: a2,
        provenance: prov.map(String::from),
        degenerate: degenerate_m(m),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibleB {
    pub m: f64,
    pub a: f64,
    /// Ordinate of `S0-` on the line `u = -1/a^2`.
    pub v_minus: f64,
    /// Ordinate of `S1-` on the line `u = -1/a^2`.
    pub v_plus: f64,
    /// `v_minus * a^3`: the solution with `lim f < 0`.
    pub b_isolated: f64,
    /// `b` of the convex solution, `v_plus * a^3`.
    pub b_convex: f64,
    /// Open interval of `b` giving solutions with `lim f = 0`.
    pub b_family: (f64, f64),
    pub intersection_residual: f64,
}

/// Intersections of the line `u = -1/a^2` with `S0-` and `S1-` for `m < -1`, `a < 0`.
pub fn admissible_b(m: f64, a: f64, controls: &PhaseControls) -> Result<AdmissibleB> {
    if !(m < -1.0) || !(a < 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!("admissible b needs m < -1 and a < 0, got m={m}, a={a}")));
    }
    let u0 = -1.0 / (a * a);
    let hit = |which: Separatrix| -> Result<(f64, f64)> {
        let traj = trace_with_lines(m, which, controls, &[u0])?;
        traj.line_crossings.first().map(|c| (c.point.v, (c.point.u - u0).abs())).ok_or_else(|| {
            Error::Tracing(format!(
                "extend trace: {} ended {:?} before reaching u = {u0}",
                which.name(),
                traj.termination
            ))
        })
    };
    let (v_minus, r_minus) = hit(Separatrix::S0Minus)?;
    let (v_plus, r_plus) = hit(Separatrix::S1Minus)?;
    let a3 = a * a * a;
    let (b_isolated, b_convex) = (v_minus * a3, v_plus * a3);
    let b_family = (b_isolated.min(b_convex), b_isolated.max(b_convex));
    if !(b_family.0 < b_family.1) {
        return Err(Error::Tracing(format!("empty family interval {b_family:?}")));
    }
    Ok(AdmissibleB { m, a, v_minus, v_plus, b_isolated, b_convex, b_family, intersection_residual: r_minus.max(r_plus) })
}
