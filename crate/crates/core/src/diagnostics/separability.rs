use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::VectorDataset;
use crate::{Error, Result};

/// Default number of point visits.
pub const SEPARABILITY_BUDGET: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SeparabilityOutcome {
    /// Linear weights `(k, dim)` classifying every point strictly correctly.
    Separable { witness: Array2<f64>, visits: usize },
    NotSeparatedWithinBudget {
        /// Mean multiclass hinge loss of the final weights.
        final_hinge: f64,
        /// Points not strictly classified by the final weights.
        violations: usize,
        visits: usize,
    },
}

fn scores(w: &Array2<f64>, x: ArrayView1<f64>) -> Array1<f64> {
    w.dot(&x)
}

fn runner_up(s: &Array1<f64>, y: usize) -> usize {
    let mut best = usize::MAX;
    for (c, &v) in s.iter().enumerate() {
        if c != y && (best == usize::MAX || v > s[best]) {
            best = c;
        }
    }
    best
}

/// Points `i` with `<w_{y_i}, x_i> <= max_{s != y_i} <w_s, x_i>`.
pub fn count_violations(w: &Array2<f64>, ds: &VectorDataset) -> usize {
    ds.items
        .iter()
        .filter(|(x, y)| {
            let s = scores(w, x.view());
            s[*y] <= s[runner_up(&s, *y)]
        })
        .count()
}

fn mean_hinge(w: &Array2<f64>, ds: &VectorDataset, margin: f64) -> f64 {
    let total: f64 = ds
        .items
        .iter()
        .map(|(x, y)| {
            let s = scores(w, x.view());
            (margin - (s[*y] - s[runner_up(&s, *y)])).max(0.0)
        })
        .sum();
    total / ds.items.len() as f64
}

/// Multiclass hinge subgradient descent on `h^y(x) = <w_y, x>`.
///
/// Points are visited cyclically; a point whose margin is below `margin`
/// triggers `w_y += x / sqrt(t)` and `w_s -= x / sqrt(t)` for its strongest
/// rival `s`, where `t` counts updates. The run stops at the end of the first
/// pass whose weights classify every point strictly, or after `budget` visits.
pub fn separability_probe(ds: &VectorDataset, budget: usize, margin: f64) -> Result<SeparabilityOutcome> {
    if ds.items.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let k = ds.num_classes();
    if k < 2 {
        return Err(Error::SingleClass);
    }
    let mut w = Array2::<f64>::zeros((k, ds.dim));
    let mut visits = 0;
    let mut updates = 0usize;
    while visits < budget {
        for (x, y) in &ds.items {
            if visits == budget {
                break;
            }
            visits += 1;
            let s = scores(&w, x.view());
            let rival = runner_up(&s, *y);
            if s[*y] - s[rival] < margin {
                updates += 1;
                let eta = 1.0 / (updates as f64).sqrt();
                w.index_axis_mut(Axis(0), *y).scaled_add(eta, x);
                w.index_axis_mut(Axis(0), rival).scaled_add(-eta, x);
            }
        }
        if count_violations(&w, ds) == 0 {
            return Ok(SeparabilityOutcome::Separable { witness: w, visits });
        }
    }
    Ok(SeparabilityOutcome::NotSeparatedWithinBudget {
        final_hinge: mean_hinge(&w, ds, margin),
        violations: count_violations(&w, ds),
        visits,
    })
}
