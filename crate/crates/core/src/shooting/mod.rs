//! Shooting on `b = f''(0)`: classification of initial value problems, bisection
//! for the convex solution and the per-regime solution structure.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{IntegratorControls, Profile};
use crate::model::ModelParams;

mod bisect;
mod classify;
mod shape;
mod solve;
mod transform;

pub use bisect::{shoot_convex, shoot_convex_report, BisectionReport};
pub use classify::{classify_ivp, estimate_limit, integrate_ivp, verify_candidate, Candidate, LimitEstimate};
pub use shape::{validate_shape, ShapeReport, SignChange};
pub use solve::solve;
pub use transform::{tilde_factors, tilde_transform, untilde_transform};

/// The initial value problem `f(0)=a, f'(0)=-1, f''(0)=b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IvpSpec {
    pub m: f64,
    pub a: f64,
    pub b: f64,
}

impl IvpSpec {
    pub fn new(m: f64, a: f64, b: f64) -> Result<Self> {
        ModelParams::new(m)?;
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter(format!("a and b must be finite, got a={a}, b={b}")));
        }
        Ok(Self { m, a, b })
    }

    pub fn params(&self) -> ModelParams {
        ModelParams::new(self.m).expect("validated at construction")
    }

    pub fn with_b(&self, b: f64) -> Self {
        Self { b, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutcomeKind {
    /// `f''` turned negative while `f' < 0`.
    TypeA,
    /// `f'` turned positive while `f'' > 0`.
    TypeB,
    /// `f' < 0 < f''` throughout, with the tail criterion met.
    TypeC,
    FiniteTimeSingularity,
    FVanished,
}

/// Tail data at the end of a converged run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailReport {
    pub t: f64,
    pub f: f64,
    pub fp_abs: f64,
    pub fpp_abs: f64,
    /// `lim f`, extrapolated from the tail; `None` when the tail indicates `|f| -> ∞`.
    pub ell: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IvpOutcome {
    pub kind: OutcomeKind,
    pub witness_t: Option<f64>,
    pub tail: Option<TailReport>,
    /// End of the existence interval when the run was followed to a singularity.
    pub singularity_t: Option<f64>,
    pub span: f64,
}

/// Controls shared by classification, bisection and verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShootControls {
    pub integrator: IntegratorControls,
    /// Convergence threshold on `|f'|` and `|f''|`.
    pub tail_tol: f64,
    /// Largest span an undecided bisection probe is extended to.
    pub patience_span: f64,
    /// Integration horizon used when verifying a candidate solution.
    pub verify_horizon: f64,
    pub family_samples: usize,
    /// Number of `b` values probed by grid searches.
    pub b_grid: usize,
    /// Distance from `O` of separatrix seeds.
    pub delta: f64,
    /// Allow convex-concave searches the theory leaves open.
    pub exploratory: bool,
}

impl Default for ShootControls {
    fn default() -> Self {
        Self {
            integrator: IntegratorControls::default(),
            tail_tol: 1e-8,
            patience_span: 1e6,
            verify_horizon: 1e12,
            family_samples: 5,
            b_grid: 1000,
            delta: 1e-6,
            exploratory: false,
        }
    }
}

impl ShootControls {
    pub fn validate(&self) -> Result<()> {
        self.integrator.validate()?;
        let ok = self.tail_tol > 0.0
            && self.patience_span >= self.integrator.max_span
            && self.verify_horizon > 0.0
            && self.delta > 0.0
            && self.delta <= 1e-3
            && self.b_grid >= 2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidControls(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Shape {
    Convex,
    ConvexConcave,
    ConcaveConvex,
}

/// How a reported solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Bisection,
    ClosedForm,
    Separatrix,
    /// The universal solution sitting at the singular point `A`.
    FixedPoint,
    /// Found by a `b` sweep, with no theorem backing the count.
    Sweep,
}

#[derive(Clone)]
pub struct BvpSolution {
    pub spec: IvpSpec,
    pub shape: Shape,
    /// Signed `lim f`; `None` for solutions with `|f| -> ∞`.
    pub limit_ell: Option<f64>,
    pub tail: TailReport,
    pub origin: Origin,
    pub profile: Profile<6>,
    /// Time up to which the profile is resolved, as opposed to drifting off the solution.
    pub trusted_until: f64,
    pub shape_report: ShapeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSummary {
    pub b: f64,
    pub shape: Shape,
    pub ell: Option<f64>,
    pub origin: Origin,
    pub tail: TailReport,
    pub trusted_until: f64,
}

impl BvpSolution {
    pub fn summary(&self) -> SolutionSummary {
        SolutionSummary {
            b: self.spec.b,
            shape: self.shape,
            ell: self.limit_ell,
            origin: self.origin,
            tail: self.tail,
            trusted_until: self.trusted_until,
        }
    }
}

impl std::fmt::Debug for BvpSolution {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fmt.debug_struct("BvpSolution")
            .field("spec", &self.spec)
            .field("shape", &self.shape)
            .field("limit_ell", &self.limit_ell)
            .field("origin", &self.origin)
            .field("steps", &self.profile.steps())
            .finish()
    }
}

/// Cell of the `m` axis with a distinct solution structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    BelowMinusOne,
    MinusOne,
    MinusOneToZero,
    ZeroToOne,
    One,
    AboveOne,
}

impl Regime {
    pub fn of(m: f64) -> Result<Self> {
        ModelParams::new(m)?;
        Ok(if m < -1.0 {
            Regime::BelowMinusOne
        } else if m == -1.0 {
            Regime::MinusOne
        } else if m < 0.0 {
            Regime::MinusOneToZero
        } else if m < 1.0 {
            Regime::ZeroToOne
        } else if m == 1.0 {
            Regime::One
        } else {
            Regime::AboveOne
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Uniqueness {
    /// The reported isolated solutions are all there is.
    Proven,
    /// Nothing is known beyond what was found.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum SearchStatus {
    NotAttempted(String),
    Open(String),
    Exploratory(String),
    Done,
}

/// An interval of `b` every interior point of which gives a solution with `lim f = 0`.
#[derive(Debug)]
pub struct Family {
    pub b_lo: f64,
    pub b_hi: f64,
    pub samples: Vec<BvpSolution>,
}

#[derive(Debug)]
pub struct SolutionSet {
    pub m: f64,
    pub a: f64,
    pub regime: Regime,
    pub isolated: Vec<BvpSolution>,
    pub family: Option<Family>,
    /// Certificate for an empty set.
    pub empty_reason: Option<String>,
    pub uniqueness: Uniqueness,
    pub convex_concave_search: SearchStatus,
    /// Solutions found numerically beyond what the theory guarantees.
    pub extra: Vec<BvpSolution>,
    pub notes: Vec<String>,
}

impl SolutionSet {
    pub fn is_empty(&self) -> bool {
        self.isolated.is_empty() && self.family.is_none() && self.extra.is_empty()
    }

    /// Every reported solution, isolated ones first.
    pub fn all(&self) -> impl Iterator<Item = &BvpSolution> {
        self.isolated
            .iter()
            .chain(self.family.iter().flat_map(|f| f.samples.iter()))
            .chain(self.extra.iter())
    }
}
