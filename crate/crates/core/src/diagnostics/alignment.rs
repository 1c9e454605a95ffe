use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::losses::LossEngine;
use crate::network::{NetworkConfig, Weights};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentGap {
    pub max: f64,
    pub mean: f64,
    pub pairs: usize,
}

/// `|g^{y_i}(z) - g^{y_j}(z)|` at the midpoints `z` of all ordered cross-class pairs.
pub fn alignment_gap<E: Example>(weights: &Weights, net: &NetworkConfig, data: &[E]) -> Result<AlignmentGap> {
    let engine = LossEngine::new(net, data)?;
    let labels = engine.labels();
    let pairs: Vec<(usize, usize, f64)> = (0..data.len())
        .flat_map(|i| (0..data.len()).map(move |j| (i, j, 0.5)))
        .filter(|&(i, j, _)| labels[i] != labels[j])
        .collect();
    if pairs.is_empty() {
        return Err(Error::SingleClass);
    }
    let logits = engine.pair_logits(weights, &pairs)?;
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for (row, &(i, j, _)) in logits.rows().into_iter().zip(&pairs) {
        let gap = (row[labels[i]] - row[labels[j]]).abs();
        max = max.max(gap);
        sum += gap;
    }
    Ok(AlignmentGap {
        max,
        mean: sum / pairs.len() as f64,
        pairs: pairs.len(),
    })
}
