use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::losses::{LossEngine, Objective, PairMode};
use crate::network::{NetworkConfig, Weights};
use crate::rng::Rng;
use crate::{Error, Result};

pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Coordinates above which a random subsample is checked.
pub const FULL_CHECK_LIMIT: usize = 10_000;
/// Entries with `|analytic|` at or below this are compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// Max of `|fd - analytic| / |analytic|` over entries above the floor.
    pub max_rel_error: f64,
    /// Max of `|fd - analytic|` over entries at or below the floor.
    pub max_abs_error: f64,
    pub checked: usize,
    pub step: f64,
    /// Flat weight index, analytic and numeric value at the largest relative error.
    pub worst: Option<(usize, f64, f64)>,
}

/// Compares the analytic gradient with central differences of step `h`.
///
/// Random mixing weights (Beta Mixup) are drawn once and reused for every
/// evaluation, so the checked function is deterministic. The quotients come
/// from [`LossEngine::central_differences`].
pub fn finite_difference_check<E: Example>(
    weights: &Weights,
    net: &NetworkConfig,
    data: &[E],
    objective: &Objective,
    h: f64,
    rng: &mut Rng,
) -> Result<GradCheckReport> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Domain(format!("step must be positive, got {h}")));
    }
    let engine = LossEngine::new(net, data)?;
    let tasks = engine.tasks(objective, PairMode::Exact, rng)?;
    let (loss, grad) = engine.evaluate(weights, &tasks, true)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss at the base point".into()));
    }
    let grad = grad.expect("requested");
    let total = weights.w.len();
    let coords: Vec<usize> = if total > FULL_CHECK_LIMIT {
        let mut c = index::sample(rng, total, FULL_CHECK_LIMIT).into_vec();
        c.sort_unstable();
        c
    } else {
        (0..total).collect()
    };
    let analytic = grad.w.as_slice().expect("standard layout");
    let numeric = engine.central_differences(weights, &tasks, &coords, h)?;
    if let Some(i) = numeric.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("difference quotient at coordinate {}", coords[i])));
    }
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut worst = None;
    for (&c, &fd) in coords.iter().zip(&numeric) {
        let a = analytic[c];
        if a.abs() > RELATIVE_FLOOR {
            let rel = (fd - a).abs() / a.abs();
            if rel > max_rel {
                max_rel = rel;
                worst = Some((c, a, fd));
            }
        } else {
            max_abs = max_abs.max((fd - a).abs());
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        max_abs_error: max_abs,
        checked: coords.len(),
        step: h,
        worst,
    })
}
