use rayon::prelude::*;
use serde::Serialize;

use super::{degenerate_m, phase_params, singular_points, trace_separatrix, PhaseControls, PhaseTrajectory, Separatrix, SingularPointInfo};
use crate::error::{Error, Result};
use crate::model::{isoclines, phase_rhs, psi_pole, IsoclineValue, PhasePoint};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for Window {
    fn default() -> Self {
        Self { u_min: -1.0, u_max: 0.5, v_min: -1.0, v_max: 1.0 }
    }
}

impl Window {
    fn validate(&self) -> Result<()> {
        if self.u_min < self.u_max && self.v_min < self.v_max && [self.u_min, self.u_max, self.v_min, self.v_max].iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid window {self:?}")))
        }
    }

    fn contains(&self, v: f64) -> bool {
        v >= self.v_min && v <= self.v_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoclineCurve {
    pub name: String,
    /// Pieces of the curve inside the window; `Ψ_m` is split at its pole.
    pub segments: Vec<Vec<PhasePoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSegment {
    pub start: PhasePoint,
    pub end: PhasePoint,
}

#[derive(Debug, Clone, Serialize)]
pub struct Portrait {
    pub m: f64,
    pub window: Window,
    pub isoclines: Vec<IsoclineCurve>,
    pub singular_points: Vec<SingularPointInfo>,
    pub separatrices: Vec<PhaseTrajectory>,
    pub flow: Vec<FlowSegment>,
    pub degenerate: bool,
}

const CURVE_SAMPLES: usize = 400;

fn sample_isocline(window: &Window, mut value: impl FnMut(f64) -> Option<f64>) -> Vec<Vec<PhasePoint>> {
    let mut segments = Vec::new();
    let mut current = Vec::new();
    for i in 0..=CURVE_SAMPLES {
        let u = window.u_min + (window.u_max - window.u_min) * i as f64 / CURVE_SAMPLES as f64;
        match value(u) {
            Some(v) if window.contains(v) => current.push(PhasePoint::new(u, v)),
            _ => {
                if !current.is_empty() {
                    segments.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        segments.push(current);
    }
    segments
}

/// Isoclines, singular points, the separatrices of `O` and a direction field on a
/// `grid x grid` lattice of the window.
pub fn portrait(m: f64, window: Window, grid: usize, controls: &PhaseControls) -> Result<Portrait> {
    let params = phase_params(m)?;
    window.validate()?;
    let p_curve = IsoclineCurve { name: "P".to_string(), segments: sample_isocline(&window, |u| Some(isoclines(params, u).v_p)) };
    let pole = psi_pole(params);
    let mut q_segments = Vec::new();
    // split at the pole so no segment jumps across the asymptote
    for (lo, hi) in [(window.u_min, pole.min(window.u_max)), (pole.max(window.u_min), window.u_max)] {
        if lo < hi {
            let w = Window { u_min: lo, u_max: hi, ..window };
            q_segments.extend(sample_isocline(&w, |u| match isoclines(params, u).v_q {
                IsoclineValue::Finite(v) => Some(v),
                IsoclineValue::Pole => None,
            }));
        }
    }
    let q_curve = IsoclineCurve { name: "Q".to_string(), segments: q_segments };
    let (o, a) = singular_points(m)?;

    let separatrices = Separatrix::for_m(m)
        .into_par_iter()
        .map(|which| trace_separatrix(m, which, controls))
        .collect::<Result<Vec<_>>>()?;

    let cell_u = (window.u_max - window.u_min) / grid.max(1) as f64;
    let cell_v = (window.v_max - window.v_min) / grid.max(1) as f64;
    let len = 0.4 * cell_u.min(cell_v);
    let flow = (0..grid * grid)
        .into_par_iter()
        .filter_map(|idx| {
            let (i, j) = (idx / grid, idx % grid);
            let start = PhasePoint::new(window.u_min + (i as f64 + 0.5) * cell_u, window.v_min + (j as f64 + 0.5) * cell_v);
            let (p, q) = phase_rhs(params, start);
            let norm = p.hypot(q);
            (norm > 0.0).then(|| FlowSegment { start, end: PhasePoint::new(start.u + len * p / norm, start.v + len * q / norm) })
        })
        .collect();

    Ok(Portrait {
        m,
        window,
        isoclines: vec![p_curve, q_curve],
        singular_points: vec![o, a],
        separatrices,
        flow,
        degenerate: degenerate_m(m),
    })
}
