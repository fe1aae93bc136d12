use crate::error::{Error, Result};
use crate::model::{AffineView, SolutionCurve};

/// Factors `(α, β)` of `f̃(s) = α f(β s)` for `m < -1`, with
/// `α = -√(-(m+1)/2)` and `β = √(-2/(m+1))`.
///
/// The transformed function solves `f̃''' + f̃ f̃'' - (2m/(m+1)) f̃'^2 = 0`
/// with `f̃'(0) = 1` when `f'(0) = -1`.
pub fn tilde_factors(m: f64) -> Result<(f64, f64)> {
    if !(m < -1.0) || !m.is_finite() {
        return Err(Error::InvalidParameter(format!("the tilde transform needs m < -1, got {m}")));
    }
    let x = -(m + 1.0) / 2.0;
    Ok((-x.sqrt(), (1.0 / x).sqrt()))
}

pub fn tilde_transform<C: SolutionCurve>(m: f64, curve: C) -> Result<AffineView<C>> {
    let (alpha, beta) = tilde_factors(m)?;
    AffineView::new(curve, alpha, beta)
}

/// Inverse of [`tilde_transform`]: recovers `f` from a curve of `f̃`.
pub fn untilde_transform<C: SolutionCurve>(m: f64, curve: C) -> Result<AffineView<C>> {
    let (alpha, beta) = tilde_factors(m)?;
    AffineView::new(curve, 1.0 / alpha, 1.0 / beta)
}
