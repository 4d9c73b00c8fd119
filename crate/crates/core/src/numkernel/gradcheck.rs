//! Central finite-difference verification of analytic gradients.

use super::params::{Gradients, ParamStore};
use crate::error::Result;

/// Step used by the acceptance checks.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominator floor, so gradients near zero are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst element.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `loss_and_grads` against `(L(θ+h) − L(θ−h)) / 2h` for every
/// scalar in `params`. Parameters are restored before returning.
pub fn grad_check<F>(params: &mut ParamStore, step: f64, mut loss_and_grads: F) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<(f64, Gradients)>,
{
    let (_, analytic) = loss_and_grads(params)?;
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst: None,
        checked: 0,
    };
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        for j in 0..params.get(id).len() {
            let original = params.get(id).data()[j];
            params.get_mut(id).data_mut()[j] = original + step;
            let (plus, _) = loss_and_grads(params)?;
            params.get_mut(id).data_mut()[j] = original - step;
            let (minus, _) = loss_and_grads(params)?;
            params.get_mut(id).data_mut()[j] = original;
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(analytic.get(id).data()[j], numeric);
            report.checked += 1;
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = err;
                report.worst = Some((params.name(id).to_string(), j));
            }
        }
    }
    Ok(report)
}
