use serde::{Deserialize, Serialize};

use crate::data::{ablate_feature, sample_point_of_class, DataConfig, FeatureDictionary};
use crate::losses::LossEngine;
use crate::network::{NetworkConfig, Weights};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassFeatures {
    pub learned: [bool; 2],
    /// Accuracy on fresh points with the other feature ablated, per view.
    pub estimate: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureLearningReport {
    pub classes: Vec<ClassFeatures>,
    /// Number of classes with 0, 1 and 2 features learned.
    pub counts: [usize; 3],
    pub samples: usize,
    pub theta: f64,
}

impl FeatureLearningReport {
    pub fn both_learned(&self) -> usize {
        self.counts[2]
    }
}

/// Whether feature `view` of `class` is learned.
///
/// Draws `samples` fresh class points, removes the class's other feature from
/// them and classifies. Returns the flag (`accuracy >= theta`) and the accuracy.
#[allow(clippy::too_many_arguments)]
pub fn feature_learned(
    weights: &Weights,
    net: &NetworkConfig,
    dict: &FeatureDictionary,
    data: &DataConfig,
    class: usize,
    view: usize,
    samples: usize,
    theta: f64,
    rng: &mut Rng,
) -> Result<(bool, f64)> {
    if samples == 0 {
        return Err(Error::Domain("feature test needs at least one sample".into()));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Domain(format!("theta must lie in (0, 1], got {theta}")));
    }
    if view > 1 {
        return Err(Error::IndexOutOfRange(format!("view {view}")));
    }
    let points = (0..samples)
        .map(|_| {
            let x = sample_point_of_class(data, dict, class, rng)?;
            ablate_feature(&x, dict, class, 1 - view)
        })
        .collect::<Result<Vec<_>>>()?;
    let acc = LossEngine::new(net, &points)?.accuracy(weights)?;
    Ok((acc >= theta, acc))
}

/// Runs [`feature_learned`] for every class and view.
pub fn feature_learning_report(
    weights: &Weights,
    net: &NetworkConfig,
    dict: &FeatureDictionary,
    data: &DataConfig,
    samples: usize,
    theta: f64,
    rng: &mut Rng,
) -> Result<FeatureLearningReport> {
    let mut classes = Vec::with_capacity(data.k);
    let mut counts = [0; 3];
    for y in 0..data.k {
        let (l0, e0) = feature_learned(weights, net, dict, data, y, 0, samples, theta, rng)?;
        let (l1, e1) = feature_learned(weights, net, dict, data, y, 1, samples, theta, rng)?;
        counts[l0 as usize + l1 as usize] += 1;
        classes.push(ClassFeatures {
            learned: [l0, l1],
            estimate: [e0, e1],
        });
    }
    Ok(FeatureLearningReport {
        classes,
        counts,
        samples,
        theta,
    })
}
