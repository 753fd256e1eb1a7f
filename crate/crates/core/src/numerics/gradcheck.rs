use super::Tensor;
use crate::error::{Error, Result};

/// Outcome of a finite-difference comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    /// Largest relative error over all coordinates of all tensors.
    pub max_rel_error: f64,
    /// Largest relative error per parameter tensor, in input order.
    pub per_tensor: Vec<f64>,
}

/// Central-difference formula used by [`finite_diff_check_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(x+h) - f(x-h)) / 2h`, error O(h^2).
    #[default]
    ThreePoint,
    /// `(8(f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h`, error O(h^4).
    /// Allows a larger step, which matters when gradients are tiny and
    /// rounding in `f` dominates.
    FivePoint,
}

/// Compares `analytic` gradients of `f` at `params` against central
/// differences with step `eps`.
///
/// The relative error of one coordinate is
/// `|analytic - numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn finite_diff_check<F>(params: &[Tensor], analytic: &[Tensor], eps: f64, f: F) -> Result<GradCheck>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    finite_diff_check_with(params, analytic, eps, Stencil::ThreePoint, f)
}

pub fn finite_diff_check_with<F>(
    params: &[Tensor],
    analytic: &[Tensor],
    eps: f64,
    stencil: Stencil,
    mut f: F,
) -> Result<GradCheck>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Config(format!(
            "finite-difference step must be positive, got {eps}"
        )));
    }
    if params.len() != analytic.len() {
        return Err(Error::dim("finite_diff_check", params.len(), analytic.len()));
    }
    for (p, g) in params.iter().zip(analytic) {
        if p.shape() != g.shape() {
            return Err(Error::dim(
                "finite_diff_check",
                format!("{:?}", p.shape()),
                format!("{:?}", g.shape()),
            ));
        }
    }

    let mut eval = |p: &[Tensor]| -> Result<f64> {
        let v = f(p)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("finite-difference objective".into()))
        }
    };

    let mut work = params.to_vec();
    let mut per_tensor = Vec::with_capacity(params.len());
    for t in 0..work.len() {
        let mut worst: f64 = 0.0;
        for i in 0..work[t].len() {
            let orig = work[t].data()[i];
            let mut at = |x: f64| -> Result<f64> {
                work[t].data_mut()[i] = x;
                eval(&work)
            };
            let numeric = match stencil {
                Stencil::ThreePoint => (at(orig + eps)? - at(orig - eps)?) / (2.0 * eps),
                Stencil::FivePoint => {
                    let near = at(orig + eps)? - at(orig - eps)?;
                    let far = at(orig + 2.0 * eps)? - at(orig - 2.0 * eps)?;
                    (8.0 * near - far) / (12.0 * eps)
                }
            };
            work[t].data_mut()[i] = orig;
            let a = analytic[t].data()[i];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
        per_tensor.push(worst);
    }
    let max_rel_error = per_tensor.iter().copied().fold(0.0, f64::max);
    Ok(GradCheck {
        max_rel_error,
        per_tensor,
    })
}
