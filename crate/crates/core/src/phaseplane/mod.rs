//! The reduced planar system in `(u, v) = (f'/f^2, f''/f^3)` with `ds = f dt`:
//! singular points, invariant directions at the saddle-node `O`, separatrices and
//! the critical parameters read off them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{IntegratorControls, OdeSystem};
use crate::model::{phase_rhs, ModelParams, PhasePoint};

mod cycle;
mod portrait;
mod separatrix;

pub use cycle::{find_limit_cycle, return_map, LimitCycle};
pub use portrait::{portrait, FlowSegment, IsoclineCurve, Portrait, Window};
pub use separatrix::{
    admissible_b, critical_a, trace_separatrix, trace_with_lines, AdmissibleB, CriticalValues, Crossing, CurveKind, PhaseTermination,
    PhaseTrajectory,
};

/// Controls for phase-plane integrations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseControls {
    pub integrator: IntegratorControls,
    /// Distance from `O` of separatrix seeds.
    pub delta: f64,
    /// Phase magnitude beyond which a trajectory is declared escaped.
    pub escape_cap: f64,
    /// Radius of the neighborhoods of `O` and `A` that end a trace.
    pub capture_radius: f64,
    /// Two returns to the Poincaré section closer than this mark a closed loop.
    pub loop_tol: f64,
}

impl Default for PhaseControls {
    fn default() -> Self {
        Self {
            integrator: IntegratorControls {
                rel_tol: 1e-12,
                abs_tol: 1e-14,
                max_span: 1e3,
                magnitude_cap: 1e6,
                ..IntegratorControls::default()
            },
            delta: 1e-6,
            escape_cap: 1e6,
            capture_radius: 1e-8,
            loop_tol: 1e-6,
        }
    }
}

impl PhaseControls {
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub(crate) fn integrator(&self) -> IntegratorControls {
        IntegratorControls { magnitude_cap: self.escape_cap, ..self.integrator }
    }
}

/// `(u', v') = sign * (P, Q_m)`; `sign = -1` runs the flow backwards.
#[derive(Debug, Clone, Copy)]
pub struct PhaseSystem {
    pub params: ModelParams,
    pub sign: f64,
}

impl OdeSystem<2> for PhaseSystem {
    fn rhs(&self, _s: f64, y: &[f64; 2]) -> [f64; 2] {
        let (p, q) = phase_rhs(self.params, PhasePoint::new(y[0], y[1]));
        [self.sign * p, self.sign * q]
    }
}

pub(crate) fn phase_params(m: f64) -> Result<ModelParams> {
    let params = ModelParams::new(m)?;
    if m == -1.0 {
        return Err(Error::InvalidParameter("phase plane not used at m=-1".to_string()));
    }
    Ok(params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PointClass {
    UnstableNode,
    UnstableFocus,
    /// Zero trace: the linearization is a center and the nonlinear terms decide.
    WeakFocus,
    StableFocus,
    StableNode,
    SaddleNode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularPointInfo {
    pub location: PhasePoint,
    pub eigenvalues: [Complex; 2],
    pub classification: PointClass,
    /// Eigen or tangent directions; for `O` these are `L_0 = (1, 0)` then `L = (1, -(m+1)/2)`.
    pub directions: Vec<[f64; 2]>,
    /// For `O`: the manifold tangent to `L` lies below `L` (else above).
    pub w_below_l: Option<bool>,
    /// For `O`: the center manifold lies above `L_0` (else below).
    pub w0_above_l0: Option<bool>,
}

/// Trace and determinant of the Jacobian at `A`.
pub fn jacobian_at_a(m: f64) -> [[f64; 2]; 2] {
    [[2.0 / 3.0, 1.0], [-m / 3.0 - 1.0 / 6.0, -m / 2.0]]
}

pub fn classify_a(m: f64) -> PointClass {
    let tr = 2.0 / 3.0 - m / 2.0;
    let det = 1.0 / 6.0;
    let disc = tr * tr - 4.0 * det;
    if tr == 0.0 {
        PointClass::WeakFocus
    } else if disc >= 0.0 {
        if tr > 0.0 {
            PointClass::UnstableNode
        } else {
            PointClass::StableNode
        }
    } else if tr > 0.0 {
        PointClass::UnstableFocus
    } else {
        PointClass::StableFocus
    }
}

fn eigen_2x2(j: [[f64; 2]; 2]) -> [Complex; 2] {
    let tr = j[0][0] + j[1][1];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let disc = tr * tr - 4.0 * det;
    if disc >= 0.0 {
        let r = disc.sqrt();
        [Complex { re: 0.5 * (tr - r), im: 0.0 }, Complex { re: 0.5 * (tr + r), im: 0.0 }]
    } else {
        let r = (-disc).sqrt();
        [Complex { re: 0.5 * tr, im: -0.5 * r }, Complex { re: 0.5 * tr, im: 0.5 * r }]
    }
}

/// Coefficient `d` of the manifold `v = k u + d u^2` tangent to `L`, `k = -(m+1)/2`.
pub fn w_curvature(m: f64) -> f64 {
    -(3.0 * m + 1.0) / (2.0 * (m + 1.0))
}

/// Coefficient `c` of the center manifold `v = c u^2`.
pub fn w0_curvature(m: f64) -> f64 {
    2.0 * m / (m + 1.0)
}

/// `m` values where the regime rules change and results are only advisory.
pub fn degenerate_m(m: f64) -> bool {
    let s6 = 6.0_f64.sqrt();
    [-1.0 / 3.0, 4.0 / 3.0, (4.0 - 2.0 * s6) / 3.0, (4.0 + 2.0 * s6) / 3.0]
        .iter()
        .any(|&x| (m - x).abs() <= 1e-12)
}

pub fn singular_points(m: f64) -> Result<(SingularPointInfo, SingularPointInfo)> {
    phase_params(m)?;
    let k = -(m + 1.0) / 2.0;
    let o = SingularPointInfo {
        location: PhasePoint::ORIGIN,
        eigenvalues: [Complex { re: 0.0, im: 0.0 }, Complex { re: k, im: 0.0 }],
        classification: PointClass::SaddleNode,
        directions: vec![[1.0, 0.0], [1.0, k]],
        w_below_l: Some(w_curvature(m) < 0.0),
        w0_above_l0: Some(w0_curvature(m) > 0.0),
    };
    let j = jacobian_at_a(m);
    let eig = eigen_2x2(j);
    let directions = if eig[0].im == 0.0 {
        // (J - λ I) x = 0 with J[0][1] = 1 gives x = (1, λ - J[0][0])
        eig.iter().map(|l| [1.0, l.re - j[0][0]]).collect()
    } else {
        Vec::new()
    };
    let a = SingularPointInfo {
        location: PhasePoint::A,
        eigenvalues: eig,
        classification: classify_a(m),
        directions,
        w_below_l: None,
        w0_above_l0: None,
    };
    Ok((o, a))
}

/// Separatrices of `O`. The `Minus` names belong to `m < -1`, the `Plus`-traced
/// `S0Plus`/`S1Plus` and `S2Minus` to `m > -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Separatrix {
    /// Branch of the manifold tangent to `L` with `u > 0`, for `m < -1`.
    S0Minus,
    /// Branch of the manifold tangent to `L` with `u < 0`, for `m < -1`.
    S1Minus,
    /// Center-manifold branch with `u < 0`, for `m < -1`.
    S2Plus,
    S0Plus,
    S1Plus,
    S2Minus,
}

impl Separatrix {
    pub fn for_m(m: f64) -> [Separatrix; 3] {
        if m < -1.0 {
            [Separatrix::S0Minus, Separatrix::S1Minus, Separatrix::S2Plus]
        } else {
            [Separatrix::S0Plus, Separatrix::S1Plus, Separatrix::S2Minus]
        }
    }

    fn valid_for(self, m: f64) -> bool {
        Separatrix::for_m(m).contains(&self)
    }

    fn on_center_manifold(self) -> bool {
        matches!(self, Separatrix::S2Plus | Separatrix::S2Minus)
    }

    fn u_sign(self) -> f64 {
        match self {
            Separatrix::S0Minus | Separatrix::S0Plus => 1.0,
            _ => -1.0,
        }
    }

    /// `+1` when the branch leaves `O` as `s` grows, `-1` when it enters `O`.
    pub fn time_sign(self) -> f64 {
        match self {
            Separatrix::S0Minus | Separatrix::S1Minus | Separatrix::S2Minus => 1.0,
            Separatrix::S2Plus | Separatrix::S0Plus | Separatrix::S1Plus => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Separatrix::S0Minus => "S0-",
            Separatrix::S1Minus => "S1-",
            Separatrix::S2Plus => "S2+",
            Separatrix::S0Plus => "S0+",
            Separatrix::S1Plus => "S1+",
            Separatrix::S2Minus => "S2-",
        }
    }
}

/// A point at distance `delta` from `O` on the local expansion of the separatrix.
pub fn local_seed(m: f64, which: Separatrix, delta: f64) -> Result<PhasePoint> {
    phase_params(m)?;
    if !(delta > 0.0 && delta <= 1e-3) {
        return Err(Error::InvalidParameter(format!("seed distance must lie in (0, 1e-3], got {delta}")));
    }
    if !which.valid_for(m) {
        return Err(Error::InvalidParameter(format!("{} is not a separatrix of the m = {m} portrait", which.name())));
    }
    let sign = which.u_sign();
    let (slope, curv) = if which.on_center_manifold() { (0.0, w0_curvature(m)) } else { (-(m + 1.0) / 2.0, w_curvature(m)) };
    // fixed point of u = δ / sqrt(1 + (v/u)^2) puts the seed exactly at distance δ
    let mut u = sign * delta / (1.0 + slope * slope).sqrt();
    for _ in 0..8 {
        let r = slope + curv * u;
        u = sign * delta / (1.0 + r * r).sqrt();
    }
    Ok(PhasePoint::new(u, slope * u + curv * u * u))
}
