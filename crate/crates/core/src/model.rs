//! The governing equation `f''' + ((m+1)/2) f f'' - m f'^2 = 0`, its first-order
//! augmented form, the reduced planar system and the integral identities.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{OdeSystem, Profile};
use crate::quadrature;

/// The exponent `m`; zero (the Blasius case) is excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    m: f64,
}

impl ModelParams {
    pub fn new(m: f64) -> Result<Self> {
        if !m.is_finite() {
            return Err(Error::InvalidParameter(format!("m must be finite, got {m}")));
        }
        if m == 0.0 {
            return Err(Error::InvalidParameter(
                "m = 0 is the Blasius case, out of scope".to_string(),
            ));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// `(m + 1) / 2`, the coefficient of `f f''`.
    pub fn half_m1(&self) -> f64 {
        0.5 * (self.m + 1.0)
    }
}

/// Index layout of the augmented t-space state.
pub const F: usize = 0;
pub const FP: usize = 1;
pub const FPP: usize = 2;
pub const ACC_FP2: usize = 3;
pub const ACC_FFP2: usize = 4;
pub const ACC_FFPP2: usize = 5;

/// A point of the t-space trajectory with its running integrals
/// `∫f'^2`, `∫f f'^2` and `∫f f''^2` from the initial time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct State3 {
    pub t: f64,
    pub f: f64,
    pub fp: f64,
    pub fpp: f64,
    pub acc_fp2: f64,
    pub acc_ffp2: f64,
    pub acc_ffpp2: f64,
}

impl State3 {
    /// Initial state of the problem `f(0)=a, f'(0)=-1, f''(0)=b`.
    pub fn initial(a: f64, b: f64) -> Self {
        Self { t: 0.0, f: a, fp: -1.0, fpp: b, acc_fp2: 0.0, acc_ffp2: 0.0, acc_ffpp2: 0.0 }
    }

    pub fn from_array(t: f64, y: &[f64; 6]) -> Self {
        Self {
            t,
            f: y[F],
            fp: y[FP],
            fpp: y[FPP],
            acc_fp2: y[ACC_FP2],
            acc_ffp2: y[ACC_FFP2],
            acc_ffpp2: y[ACC_FFPP2],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.f, self.fp, self.fpp, self.acc_fp2, self.acc_ffp2, self.acc_ffpp2]
    }
}

/// Left-hand side of the equation evaluated on a jet.
pub fn residual(params: ModelParams, f: f64, fp: f64, fpp: f64, fppp: f64) -> f64 {
    fppp + params.half_m1() * f * fpp - params.m * fp * fp
}

/// `f'''` as dictated by the equation.
pub fn third_derivative(params: ModelParams, f: f64, fp: f64, fpp: f64) -> f64 {
    params.m * fp * fp - params.half_m1() * f * fpp
}

pub fn rhs_t(params: ModelParams, y: &[f64; 6]) -> [f64; 6] {
    let (f, fp, fpp) = (y[F], y[FP], y[FPP]);
    [fp, fpp, third_derivative(params, f, fp, fpp), fp * fp, f * fp * fp, f * fpp * fpp]
}

/// The augmented t-space system as an [`OdeSystem`].
///
/// Its magnitude is `max(|f|, |f'|^(1/2), |f''|^(1/3))`, which scales like `f`
/// under the symmetry `f -> κ f(κ t)`. A blow-up cap on this quantity therefore
/// tracks a singularity of `f` itself rather than whichever derivative grows
/// fastest, and the accumulators never trigger it.
#[derive(Debug, Clone, Copy)]
pub struct TSystem {
    pub params: ModelParams,
}

impl TSystem {
    pub fn new(params: ModelParams) -> Self {
        Self { params }
    }
}

pub fn homogeneous_magnitude(f: f64, fp: f64, fpp: f64) -> f64 {
    f.abs().max(fp.abs().sqrt()).max(fpp.abs().cbrt())
}

impl OdeSystem<6> for TSystem {
    fn rhs(&self, _t: f64, y: &[f64; 6]) -> [f64; 6] {
        rhs_t(self.params, y)
    }

    fn magnitude(&self, y: &[f64; 6]) -> f64 {
        homogeneous_magnitude(y[F], y[FP], y[FPP])
    }
}

/// A point `(u, v) = (f'/f^2, f''/f^3)` of the reduced plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePoint {
    pub u: f64,
    pub v: f64,
}

impl PhasePoint {
    pub const ORIGIN: PhasePoint = PhasePoint { u: 0.0, v: 0.0 };
    pub const A: PhasePoint = PhasePoint { u: -1.0 / 6.0, v: 1.0 / 18.0 };

    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn dist(&self, other: &PhasePoint) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }
}

/// `P(u, v) = v - 2u^2`.
pub fn p_component(p: PhasePoint) -> f64 {
    p.v - 2.0 * p.u * p.u
}

/// `Q_m(u, v) = -((m+1)/2) v + m u^2 - 3uv`.
pub fn q_component(params: ModelParams, p: PhasePoint) -> f64 {
    -params.half_m1() * p.v + params.m * p.u * p.u - 3.0 * p.u * p.v
}

pub fn phase_rhs(params: ModelParams, p: PhasePoint) -> (f64, f64) {
    (p_component(p), q_component(params, p))
}

/// Value of the `Q_m = 0` isocline, which has a vertical asymptote.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum IsoclineValue {
    Finite(f64),
    Pole,
}

impl IsoclineValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            IsoclineValue::Finite(v) => Some(v),
            IsoclineValue::Pole => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Isoclines {
    pub v_p: f64,
    pub v_q: IsoclineValue,
}

/// Abscissa of the vertical asymptote of `Ψ_m`.
pub fn psi_pole(params: ModelParams) -> f64 {
    -params.half_m1() / 3.0
}

/// `v = 2u^2` and `v = Ψ_m(u) = m u^2 / (3u + (m+1)/2)`.
pub fn isoclines(params: ModelParams, u: f64) -> Isoclines {
    let den = 3.0 * u + params.half_m1();
    let num = params.m * u * u;
    let v_q = if den == 0.0 {
        if num == 0.0 {
            // m = -1 at u = 0: Q vanishes identically on the v-axis line
            IsoclineValue::Finite(0.0)
        } else {
            IsoclineValue::Pole
        }
    } else {
        IsoclineValue::Finite(num / den)
    };
    Isoclines { v_p: 2.0 * u * u, v_q }
}

pub fn to_phase(f: f64, fp: f64, fpp: f64) -> Result<PhasePoint> {
    if f == 0.0 || !f.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "phase coordinates need finite nonzero f, got {f}"
        )));
    }
    let f2 = f * f;
    Ok(PhasePoint { u: fp / f2, v: fpp / (f2 * f) })
}

/// Slope `dv/du = Q_m / P` of the trajectory through `p`.
pub fn phase_slope(params: ModelParams, p: PhasePoint) -> Result<f64> {
    let pc = p_component(p);
    if pc == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "slope is vertical on the P = 0 isocline at ({}, {})",
            p.u, p.v
        )));
    }
    Ok(q_component(params, p) / pc)
}

/// A solution `t -> (f, f', f'')` on a closed interval.
pub trait SolutionCurve {
    fn span(&self) -> (f64, f64);

    fn jet(&self, t: f64) -> Result<[f64; 3]>;

    /// Running integrals `(∫f'^2, ∫f f'^2, ∫f f''^2)` from the start of the span,
    /// when the curve carries them. Otherwise they are computed by quadrature.
    fn accumulators(&self, _t: f64) -> Option<Result<[f64; 3]>> {
        None
    }

    fn check_in_span(&self, t: f64) -> Result<()> {
        let (start, end) = self.span();
        if t >= start && t <= end {
            Ok(())
        } else {
            Err(Error::OutOfSpan { t, start, end })
        }
    }
}

impl SolutionCurve for Profile<6> {
    fn span(&self) -> (f64, f64) {
        (self.t_start(), self.t_end())
    }

    fn jet(&self, t: f64) -> Result<[f64; 3]> {
        let y = self.dense_eval(t)?;
        Ok([y[F], y[FP], y[FPP]])
    }

    fn accumulators(&self, t: f64) -> Option<Result<[f64; 3]>> {
        Some(self.dense_eval(t).map(|y| [y[ACC_FP2], y[ACC_FFP2], y[ACC_FFPP2]]))
    }
}

impl<C: SolutionCurve + ?Sized> SolutionCurve for &C {
    fn span(&self) -> (f64, f64) {
        (**self).span()
    }

    fn jet(&self, t: f64) -> Result<[f64; 3]> {
        (**self).jet(t)
    }

    fn accumulators(&self, t: f64) -> Option<Result<[f64; 3]>> {
        (**self).accumulators(t)
    }
}

fn accumulated_between<C: SolutionCurve + ?Sized>(curve: &C, alpha: f64, beta: f64) -> Result<[f64; 3]> {
    match (curve.accumulators(alpha), curve.accumulators(beta)) {
        (Some(lo), Some(hi)) => {
            let (lo, hi) = (lo?, hi?);
            Ok([hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]])
        }
        _ => quadrature::integrate_vec(
            |t| {
                let [f, fp, fpp] = curve.jet(t)?;
                Ok([fp * fp, f * fp * fp, f * fpp * fpp])
            },
            alpha,
            beta,
            1e-13,
            1e-13,
        ),
    }
}

/// Residuals of the three integral identities on `[alpha, beta]`:
///
/// ```text
/// r1 = [f'' + ((m+1)/2) f f']            - ((3m+1)/2) ∫ f'^2
/// r2 = [f f'' - f'^2/2 + ((m+1)/2) f^2 f'] - (2m+1)   ∫ f f'^2
/// r3 = [f''^2/2 - (m/3) f'^3]            + ((m+1)/2) ∫ f f''^2
/// ```
pub fn identity_residuals<C: SolutionCurve + ?Sized>(
    params: ModelParams,
    curve: &C,
    alpha: f64,
    beta: f64,
) -> Result<[f64; 3]> {
    curve.check_in_span(alpha)?;
    curve.check_in_span(beta)?;
    if alpha == beta {
        return Ok([0.0; 3]);
    }
    let m = params.m;
    let k = params.half_m1();
    let bracket = |t: f64| -> Result<[f64; 3]> {
        let [f, fp, fpp] = curve.jet(t)?;
        Ok([
            fpp + k * f * fp,
            f * fpp - 0.5 * fp * fp + k * f * f * fp,
            0.5 * fpp * fpp - (m / 3.0) * fp * fp * fp,
        ])
    };
    let (lo, hi) = (bracket(alpha)?, bracket(beta)?);
    let acc = accumulated_between(curve, alpha, beta)?;
    Ok([
        (hi[0] - lo[0]) - 0.5 * (3.0 * m + 1.0) * acc[0],
        (hi[1] - lo[1]) - (2.0 * m + 1.0) * acc[1],
        (hi[2] - lo[2]) + k * acc[2],
    ])
}

/// The curve `t -> alpha * g(beta * t)` for an inner curve `g`.
#[derive(Debug, Clone)]
pub struct AffineView<C> {
    inner: C,
    alpha: f64,
    beta: f64,
}

impl<C: SolutionCurve> AffineView<C> {
    pub fn new(inner: C, alpha: f64, beta: f64) -> Result<Self> {
        if alpha == 0.0 || beta == 0.0 || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "affine view needs finite nonzero factors, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self { inner, alpha, beta })
    }

    pub fn inner(&self) -> &C {
        &self.inner
    }

    pub fn into_inner(self) -> C {
        self.inner
    }

    pub fn factors(&self) -> (f64, f64) {
        (self.alpha, self.beta)
    }
}

impl<C: SolutionCurve> SolutionCurve for AffineView<C> {
    fn span(&self) -> (f64, f64) {
        let (s0, s1) = self.inner.span();
        let (t0, t1) = (s0 / self.beta, s1 / self.beta);
        (t0.min(t1), t0.max(t1))
    }

    fn jet(&self, t: f64) -> Result<[f64; 3]> {
        self.check_in_span(t)?;
        let s = (self.beta * t).clamp(
            self.inner.span().0,
            self.inner.span().1,
        );
        let [g, gp, gpp] = self.inner.jet(s)?;
        let (a, b) = (self.alpha, self.beta);
        Ok([a * g, a * b * gp, a * b * b * gpp])
    }
}

/// The solution `t -> κ f(κ t)`, again a solution of the same equation.
pub fn scale_solution<C: SolutionCurve>(curve: C, kappa: f64) -> Result<AffineView<C>> {
    if kappa == 0.0 {
        return Err(Error::InvalidParameter("scale factor must be nonzero".to_string()));
    }
    AffineView::new(curve, kappa, kappa)
}

/// `f'''` at `t` by a sixth-order central difference of `f''` with spacing `h`.
pub fn fd_third_derivative<C: SolutionCurve + ?Sized>(curve: &C, t: f64, h: f64) -> Result<f64> {
    const W: [f64; 3] = [3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
    let mut acc = 0.0;
    for (j, w) in W.iter().enumerate() {
        let d = (j + 1) as f64 * h;
        acc += w * (curve.jet(t + d)?[2] - curve.jet(t - d)?[2]);
    }
    Ok(acc / h)
}

/// Pointwise residual `f''' + c1 f f'' - c2 f'^2` with `f'''` from finite differences.
pub fn fd_residual<C: SolutionCurve + ?Sized>(curve: &C, c1: f64, c2: f64, t: f64, h: f64) -> Result<f64> {
    let [f, fp, fpp] = curve.jet(t)?;
    let fppp = fd_third_derivative(curve, t, h)?;
    Ok(fppp + c1 * f * fpp - c2 * fp * fp)
}
