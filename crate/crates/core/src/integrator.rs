//! Adaptive Dormand–Prince 5(4) integration with dense output and event location.
//!
//! Every numerical run in the crate goes through [`integrate`]. A run produces a
//! [`Profile`]: the accepted steps, the continuous extension of each step, the
//! events that fired and the reason the run stopped.

use serde::Serialize;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const MAX_STEPS: usize = 2_000_000;

/// Label used for the built-in magnitude-cap event.
pub const BLOW_UP_LABEL: &str = "blow_up";

/// A first-order system `y' = F(t, y)` of fixed dimension.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N];

    /// Size of a state, compared against [`IntegratorControls::magnitude_cap`].
    fn magnitude(&self, y: &[f64; N]) -> f64 {
        y.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

/// Adapter turning a closure into an [`OdeSystem`].
pub struct FnSystem<F>(pub F);

impl<const N: usize, F> OdeSystem<N> for FnSystem<F>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    fn rhs(&self, t: f64, y: &[f64; N]) -> [f64; N] {
        (self.0)(t, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Smallest step the controller may demand before the run is declared singular.
    pub min_step: f64,
    /// Length of the integration interval, `[t0, t0 + max_span]`.
    pub max_span: f64,
    pub magnitude_cap: f64,
}

impl Default for IntegratorControls {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            min_step: 1e-14,
            max_span: 100.0,
            magnitude_cap: 1e8,
        }
    }
}

impl IntegratorControls {
    pub fn with_span(mut self, span: f64) -> Self {
        self.max_span = span;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.min_step > 0.0
            && self.min_step < self.max_step
            && self.max_span > 0.0
            && self.max_span.is_finite()
            && self.magnitude_cap > 1.0
            && self.rel_tol.is_finite()
            && self.abs_tol.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidControls(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Rising,
    Falling,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventAction {
    Record,
    Terminate,
    /// Terminate and report the run as converged rather than as an event stop.
    Converge,
}

type Guard<'a, const N: usize> = Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>;

/// A scalar guard whose sign changes are located along the trajectory.
pub struct EventSpec<'a, const N: usize> {
    pub label: String,
    pub guard: Guard<'a, N>,
    pub direction: Direction,
    pub action: EventAction,
}

impl<'a, const N: usize> EventSpec<'a, N> {
    pub fn new(
        label: impl Into<String>,
        direction: Direction,
        action: EventAction,
        guard: impl Fn(f64, &[f64; N]) -> f64 + 'a,
    ) -> Self {
        Self {
            label: label.into(),
            guard: Box::new(guard),
            direction,
            action,
        }
    }

    fn triggers(&self, before: f64, after: f64) -> bool {
        let rising = before < 0.0 && after >= 0.0;
        let falling = before > 0.0 && after <= 0.0;
        match self.direction {
            Direction::Rising => rising,
            Direction::Falling => falling,
            Direction::Any => rising || falling,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord<const N: usize> {
    pub label: String,
    pub t: f64,
    #[serde(with = "serde_arrays")]
    pub state: [f64; N],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    SpanExhausted { t: f64 },
    Event { label: String, t: f64 },
    BlowUp { t: f64 },
    StepUnderflow { t: f64 },
    Converged { label: String, t: f64 },
}

impl Termination {
    pub fn t(&self) -> f64 {
        match self {
            Termination::SpanExhausted { t }
            | Termination::Event { t, .. }
            | Termination::BlowUp { t }
            | Termination::StepUnderflow { t }
            | Termination::Converged { t, .. } => *t,
        }
    }

    /// Blow-up and step underflow both signal a singularity at finite time.
    pub fn is_singular(&self) -> bool {
        matches!(self, Termination::BlowUp { .. } | Termination::StepUnderflow { .. })
    }
}

/// Dense, event-annotated output of one integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile<const N: usize> {
    ts: Vec<f64>,
    ys: Vec<[f64; N]>,
    /// Full step length of interval `i`; the last interval may be cut short by an event.
    hs: Vec<f64>,
    dense: Vec<[[f64; N]; 5]>,
    events: Vec<EventRecord<N>>,
    termination: Termination,
    rhs_evals: usize,
}

impl<const N: usize> Profile<N> {
    /// A profile sampled from an exact curve at the nodes `ts`, with the same
    /// quartic continuous extension as an integrated one. `curve(t)` returns the
    /// state and its derivative; the extension matches both at the nodes and the
    /// state at each midpoint.
    pub fn from_curve(ts: Vec<f64>, curve: impl Fn(f64) -> Result<([f64; N], [f64; N])>) -> Result<Self> {
        if ts.is_empty() || ts.windows(2).any(|w| !(w[1] > w[0])) || ts.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("curve nodes must be finite and strictly increasing".to_string()));
        }
        let mut ys = Vec::with_capacity(ts.len());
        let mut hs = Vec::with_capacity(ts.len());
        let mut dense = Vec::with_capacity(ts.len());
        let (mut y0, mut d0) = curve(ts[0])?;
        ys.push(y0);
        for w in ts.windows(2) {
            let h = w[1] - w[0];
            let (y1, d1) = curve(w[1])?;
            let (ym, _) = curve(w[0] + 0.5 * h)?;
            let mut c = [[0.0; N]; 5];
            for k in 0..N {
                c[0][k] = y0[k];
                c[1][k] = y1[k] - y0[k];
                c[2][k] = h * d0[k] - c[1][k];
                c[3][k] = c[1][k] - c[2][k] - h * d1[k];
                c[4][k] = 16.0 * (ym[k] - c[0][k] - 0.5 * c[1][k] - 0.25 * c[2][k] - 0.125 * c[3][k]);
            }
            ys.push(y1);
            hs.push(h);
            dense.push(c);
            (y0, d0) = (y1, d1);
        }
        let t_end = *ts.last().expect("nonempty");
        Ok(Self { ts, ys, hs, dense, events: Vec::new(), termination: Termination::SpanExhausted { t: t_end }, rhs_evals: 0 })
    }

    pub fn times(&self) -> &[f64] {
        &self.ts
    }

    pub fn states(&self) -> &[[f64; N]] {
        &self.ys
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, &[f64; N])> {
        self.ts.iter().copied().zip(self.ys.iter())
    }

    pub fn events(&self) -> &[EventRecord<N>] {
        &self.events
    }

    pub fn first_event(&self, label: &str) -> Option<&EventRecord<N>> {
        self.events.iter().find(|e| e.label == label)
    }

    pub fn termination(&self) -> &Termination {
        &self.termination
    }

    pub fn t_start(&self) -> f64 {
        self.ts[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.ts.last().expect("profile has at least one sample")
    }

    pub fn final_state(&self) -> &[f64; N] {
        self.ys.last().expect("profile has at least one sample")
    }

    pub fn steps(&self) -> usize {
        self.ts.len() - 1
    }

    pub fn rhs_evaluations(&self) -> usize {
        self.rhs_evals
    }

    /// Evaluate the continuous extension at `t`.
    pub fn dense_eval(&self, t: f64) -> Result<[f64; N]> {
        let (t0, t1) = (self.t_start(), self.t_end());
        if !(t >= t0 && t <= t1) {
            return Err(Error::OutOfSpan { t, start: t0, end: t1 });
        }
        // last node with ts[i] <= t
        let i = self.ts.partition_point(|&x| x <= t) - 1;
        if self.ts[i] == t {
            return Ok(self.ys[i]);
        }
        Ok(interpolate(&self.dense[i], (t - self.ts[i]) / self.hs[i]))
    }

    /// Largest state magnitude over the stored samples, as measured by `system`.
    pub fn max_magnitude<S: OdeSystem<N>>(&self, system: &S) -> f64 {
        self.ys.iter().fold(0.0_f64, |acc, y| acc.max(system.magnitude(y)))
    }
}

fn interpolate<const N: usize>(c: &[[f64; N]; 5], theta: f64) -> [f64; N] {
    let theta1 = 1.0 - theta;
    let mut out = [0.0; N];
    for k in 0..N {
        out[k] = c[0][k] + theta * (c[1][k] + theta1 * (c[2][k] + theta * (c[3][k] + theta1 * c[4][k])));
    }
    out
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for k in 0..N {
        let mut acc = 0.0;
        for (coef, kv) in terms {
            acc += coef * kv[k];
        }
        out[k] += h * acc;
    }
    out
}

fn all_finite<const N: usize>(y: &[f64; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn error_norm<const N: usize>(
    err: &[f64; N],
    y: &[f64; N],
    y_new: &[f64; N],
    controls: &IntegratorControls,
) -> f64 {
    let mut sum = 0.0;
    for k in 0..N {
        let sc = controls.abs_tol + controls.rel_tol * y[k].abs().max(y_new[k].abs());
        let r = err[k] / sc;
        sum += r * r;
    }
    (sum / N as f64).sqrt()
}

fn initial_step<const N: usize, S: OdeSystem<N>>(
    system: &S,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    controls: &IntegratorControls,
) -> f64 {
    let scale = |k: usize| controls.abs_tol + controls.rel_tol * y0[k].abs();
    let (mut dnf, mut dny) = (0.0, 0.0);
    for k in 0..N {
        dnf += (f0[k] / scale(k)).powi(2);
        dny += (y0[k] / scale(k)).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * (dny / dnf).sqrt()
    };
    h = h.min(controls.max_step).min(controls.max_span);
    let y1 = axpy(y0, h, &[(1.0, f0)]);
    let f1 = system.rhs(t0 + h, &y1);
    if !all_finite(&f1) {
        return (h * 1e-3).max(controls.min_step * 10.0);
    }
    let mut der2 = 0.0;
    for k in 0..N {
        der2 += ((f1[k] - f0[k]) / scale(k)).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 5.0)
    };
    (100.0 * h).min(h1).min(controls.max_step).min(controls.max_span)
}

struct StepResult<const N: usize> {
    y_new: [f64; N],
    k7: [f64; N],
    err: f64,
    dense: [[f64; N]; 5],
}

fn attempt_step<const N: usize, S: OdeSystem<N>>(
    system: &S,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    controls: &IntegratorControls,
) -> Option<StepResult<N>> {
    let k2 = system.rhs(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = system.rhs(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = system.rhs(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = system.rhs(
        t + C5 * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = system.rhs(
        t + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y_new = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    if !all_finite(&y_new) {
        return None;
    }
    let k7 = system.rhs(t + h, &y_new);
    if !all_finite(&k7) {
        return None;
    }
    let mut err = [0.0; N];
    for k in 0..N {
        err[k] = h * (E1 * k1[k] + E3 * k3[k] + E4 * k4[k] + E5 * k5[k] + E6 * k6[k] + E7 * k7[k]);
    }
    let err = error_norm(&err, y, &y_new, controls);
    if !err.is_finite() {
        return None;
    }

    let mut dense = [[0.0; N]; 5];
    for k in 0..N {
        let dy = y_new[k] - y[k];
        let bspl = h * k1[k] - dy;
        dense[0][k] = y[k];
        dense[1][k] = dy;
        dense[2][k] = bspl;
        dense[3][k] = dy - h * k7[k] - bspl;
        dense[4][k] = h * (D1 * k1[k] + D3 * k3[k] + D4 * k4[k] + D5 * k5[k] + D6 * k6[k] + D7 * k7[k]);
    }
    Some(StepResult { y_new, k7, err, dense })
}

/// Locate a sign change of `g` on `[t0, t1]` by bisection on the dense output.
fn locate<const N: usize>(
    dense: &[[f64; N]; 5],
    t_node: f64,
    h: f64,
    g: &dyn Fn(f64, &[f64; N]) -> f64,
    t0: f64,
    t1: f64,
    spec: &EventSpec<'_, N>,
) -> f64 {
    let eval = |t: f64| {
        let y = interpolate(dense, (t - t_node) / h);
        g(t, &y)
    };
    let (mut lo, mut hi) = (t0, t1);
    let g_lo = eval(lo);
    let tol = 1e-12 * t1.abs().max(1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = eval(mid);
        if spec.triggers(g_lo, g_mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Integrate `system` from `(t0, y0)` over `[t0, t0 + controls.max_span]`.
///
/// Events are located on the continuous extension of each accepted step. When
/// several guards change sign inside one step the earliest located time wins;
/// exact ties go to the event listed first. A run that crosses the magnitude cap
/// stops with [`Termination::BlowUp`] at the located crossing time.
pub fn integrate<const N: usize, S: OdeSystem<N>>(
    system: &S,
    y0: [f64; N],
    t0: f64,
    controls: &IntegratorControls,
    events: &[EventSpec<'_, N>],
) -> Result<Profile<N>> {
    controls.validate()?;
    if !all_finite(&y0) {
        return Err(Error::NonFinite(format!("initial state {y0:?}")));
    }
    let mut k1 = system.rhs(t0, &y0);
    if !all_finite(&k1) {
        return Err(Error::NonFinite(format!("vector field at initial state {y0:?}")));
    }
    let t_final = t0 + controls.max_span;
    let cap_spec: EventSpec<'_, N> = EventSpec::new(
        BLOW_UP_LABEL,
        Direction::Falling,
        EventAction::Terminate,
        |_, y: &[f64; N]| controls.magnitude_cap - system.magnitude(y),
    );

    let mut prof = Profile {
        ts: vec![t0],
        ys: vec![y0],
        hs: Vec::new(),
        dense: Vec::new(),
        events: Vec::new(),
        termination: Termination::SpanExhausted { t: t_final },
        rhs_evals: 1,
    };

    let mut t = t0;
    let mut y = y0;
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.guard)(t, &y)).collect();
    let mut h = initial_step(system, t0, &y0, &k1, controls);
    prof.rhs_evals += 1;
    let mut last_rejected = false;

    for _ in 0..MAX_STEPS {
        if t >= t_final {
            prof.termination = Termination::SpanExhausted { t };
            return Ok(prof);
        }
        h = h.min(controls.max_step);
        let mut last = false;
        if t + h >= t_final {
            h = t_final - t;
            last = true;
        }
        if h < controls.min_step || t + h == t {
            prof.termination = Termination::StepUnderflow { t };
            return Ok(prof);
        }

        prof.rhs_evals += 6;
        let step = match attempt_step(system, t, &y, &k1, h, controls) {
            Some(s) if s.err <= 1.0 => s,
            Some(s) => {
                let fac = (SAFETY * s.err.powf(-0.2)).clamp(FAC_MIN, 1.0);
                h *= fac;
                last_rejected = true;
                continue;
            }
            None => {
                h *= FAC_MIN;
                last_rejected = true;
                continue;
            }
        };

        let t_new = if last { t_final } else { t + h };
        let g_new: Vec<f64> = events.iter().map(|e| (e.guard)(t_new, &step.y_new)).collect();

        let mut stop: Option<(f64, Termination)> = None;
        if system.magnitude(&step.y_new) > controls.magnitude_cap {
            let tc = locate(&step.dense, t, h, cap_spec.guard.as_ref(), t, t_new, &cap_spec);
            stop = Some((tc, Termination::BlowUp { t: tc }));
        }

        // process triggered events in time order (ties by list order) up to the first stop
        let mut triggered: Vec<(f64, usize)> = events
            .iter()
            .enumerate()
            .filter(|(i, spec)| spec.triggers(g_prev[*i], g_new[*i]))
            .map(|(i, spec)| (locate(&step.dense, t, h, spec.guard.as_ref(), t, t_new, spec), i))
            .collect();
        triggered.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(te, i) in &triggered {
            if stop.as_ref().map_or(false, |(ts, _)| te > *ts) {
                break;
            }
            let spec = &events[i];
            let state = interpolate(&step.dense, (te - t) / h);
            prof.events.push(EventRecord { label: spec.label.clone(), t: te, state });
            match spec.action {
                EventAction::Record => {}
                EventAction::Terminate => {
                    stop = Some((te, Termination::Event { label: spec.label.clone(), t: te }));
                    break;
                }
                EventAction::Converge => {
                    stop = Some((te, Termination::Converged { label: spec.label.clone(), t: te }));
                    break;
                }
            }
        }

        prof.hs.push(h);
        prof.dense.push(step.dense);
        if let Some((te, term)) = stop {
            let y_end = if te >= t_new { step.y_new } else { interpolate(&step.dense, (te - t) / h) };
            prof.ts.push(te.max(t + f64::EPSILON * t.abs().max(1.0)).min(t_new));
            prof.ys.push(y_end);
            prof.termination = term;
            return Ok(prof);
        }
        prof.ts.push(t_new);
        prof.ys.push(step.y_new);

        t = t_new;
        y = step.y_new;
        k1 = step.k7;
        g_prev = g_new;

        let mut fac = if step.err == 0.0 { FAC_MAX } else { SAFETY * step.err.powf(-0.2) };
        fac = fac.clamp(FAC_MIN, if last_rejected { 1.0 } else { FAC_MAX });
        h *= fac;
        last_rejected = false;
    }
    Err(Error::StepBudget(MAX_STEPS))
}

mod serde_arrays {
    use serde::ser::{SerializeSeq, Serializer};

    pub fn serialize<S: Serializer, const N: usize>(arr: &[f64; N], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(N))?;
        for v in arr {
            seq.serialize_element(v)?;
        }
        seq.end()
    }
}
