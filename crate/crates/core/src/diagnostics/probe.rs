use ndarray::{s, Array1};
use serde::{Deserialize, Serialize};

use crate::data::{sample_simple_dataset, simple_point, FeatureDictionary, SimplePoint};
use crate::linalg::{dot, ls_slope};
use crate::losses::{LossEngine, Objective, PairMode};
use crate::network::{Activation, NetworkConfig, Weights};
use crate::rng::Rng;
use crate::{Error, Result};

/// The class whose gradient is probed.
pub const PROBE_CLASS: usize = 0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeMeasurement {
    pub k: usize,
    pub gap_mult: f64,
    /// `a - b = C log k` for the probed class.
    pub delta_y: f64,
    /// `<-grad_{w_y} J_obj, v_{y,l}>` for views 0 and 1.
    pub corr: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub objective: String,
    pub series: Vec<ProbeMeasurement>,
    /// Least-squares slope of `log corr_1` against `log k`, when at least three
    /// distinct `k` are present and every value is positive.
    pub slope: Option<f64>,
}

/// Linear one-neuron weights: `w_y = a v_{y,0} + b v_{y,1}` for the probed
/// class and `v_{s,0} + v_{s,1}` for every other class.
pub fn probe_weights(dict: &FeatureDictionary, a: f64, b: f64) -> Weights {
    let mut w = Weights::zeros(dict.k, 1, dict.d);
    for y in 0..dict.k {
        let (ca, cb) = if y == PROBE_CLASS { (a, b) } else { (1.0, 1.0) };
        let mut row = w.w.slice_mut(s![y, 0, ..]);
        row.scaled_add(ca, &dict.vector(y, 0));
        row.scaled_add(cb, &dict.vector(y, 1));
    }
    w
}

/// Measures `<-grad J_obj, v_{y,l}>` at [`probe_weights`] with `b = 1` and
/// `a = 1 + C log k`, on a fresh simple dataset of `n` points.
pub fn linear_gradient_probe(
    k: usize,
    d: usize,
    n: usize,
    gap_mult: f64,
    objective: &Objective,
    rng: &mut Rng,
) -> Result<ProbeMeasurement> {
    if d < 2 * k {
        return Err(Error::DimensionTooSmall { required: 2 * k, actual: d });
    }
    let dict = FeatureDictionary::build(k, d, rng)?;
    let data = sample_simple_dataset(k, d, n, &dict, rng)?;
    let delta_y = gap_mult * (k as f64).ln();
    let weights = probe_weights(&dict, 1.0 + delta_y, 1.0);
    let corr = probe_gradient(&weights, &dict, &data, objective, rng)?;
    Ok(ProbeMeasurement { k, gap_mult, delta_y, corr })
}

/// `<-grad_{w_y} J_obj, v_{y,l}>` for the probed class at `weights`.
pub(crate) fn probe_gradient(
    weights: &Weights,
    dict: &FeatureDictionary,
    data: &[SimplePoint],
    objective: &Objective,
    rng: &mut Rng,
) -> Result<[f64; 2]> {
    let net = NetworkConfig {
        k: dict.k,
        m: 1,
        d: dict.d,
        rho: 1.0,
        alpha: 2,
        activation: Activation::Linear,
    };
    let engine = LossEngine::new(&net, data)?;
    let (_, grad) = engine.loss_and_gradient(weights, objective, PairMode::Exact, rng)?;
    let g: Array1<f64> = grad.w.slice(s![PROBE_CLASS, 0, ..]).mapv(|v| -v);
    Ok([dot(g.view(), dict.vector(PROBE_CLASS, 0)), dot(g.view(), dict.vector(PROBE_CLASS, 1))])
}

/// Runs [`linear_gradient_probe`] over `(k, C)` settings with `d = 4k` and
/// `n = n_per_class * k`.
pub fn probe_series(
    settings: &[(usize, f64)],
    n_per_class: usize,
    objective: &Objective,
    rng: &mut Rng,
) -> Result<ProbeResult> {
    let series = settings
        .iter()
        .map(|&(k, c)| linear_gradient_probe(k, 4 * k, n_per_class * k, c, objective, rng))
        .collect::<Result<Vec<_>>>()?;
    let mut ks: Vec<usize> = series.iter().map(|m| m.k).collect();
    ks.sort_unstable();
    ks.dedup();
    let slope = if ks.len() >= 3 && series.iter().all(|m| m.corr[1] > 0.0) {
        let x: Vec<f64> = series.iter().map(|m| (m.k as f64).ln()).collect();
        let y: Vec<f64> = series.iter().map(|m| m.corr[1].ln()).collect();
        Some(ls_slope(&x, &y))
    } else {
        None
    };
    Ok(ProbeResult {
        objective: objective.name().to_string(),
        series,
        slope,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub k: usize,
    pub reps: usize,
    /// Mean over repetitions of `corr_0 - corr_1` at zero gap.
    pub mean_diff: f64,
    /// Standard error of that mean.
    pub std_err: f64,
    pub within_3_sigma: bool,
    /// Largest `|diff + diff'|`, where `diff'` is measured on the same data
    /// with every `beta` replaced by `1 - beta`.
    pub max_exchange_error: f64,
}

/// Zero-gap (`a = b = 1`) ERM probe repeated on `reps` fresh instances.
pub fn symmetry_check(k: usize, n: usize, reps: usize, rng: &mut Rng) -> Result<SymmetryReport> {
    if reps < 2 {
        return Err(Error::Domain("symmetry check needs at least two repetitions".into()));
    }
    let d = 4 * k;
    let mut diffs = Vec::with_capacity(reps);
    let mut max_exchange_error: f64 = 0.0;
    for _ in 0..reps {
        let dict = FeatureDictionary::build(k, d, rng)?;
        let data = sample_simple_dataset(k, d, n, &dict, rng)?;
        let weights = probe_weights(&dict, 1.0, 1.0);
        let c = probe_gradient(&weights, &dict, &data, &Objective::Erm, rng)?;
        let swapped: Vec<SimplePoint> = data.iter().map(|x| simple_point(&dict, x.label, 1.0 - x.beta)).collect();
        let cs = probe_gradient(&weights, &dict, &swapped, &Objective::Erm, rng)?;
        let diff = c[0] - c[1];
        max_exchange_error = max_exchange_error.max((diff + (cs[0] - cs[1])).abs());
        diffs.push(diff);
    }
    let r = reps as f64;
    let mean_diff = diffs.iter().sum::<f64>() / r;
    let var = diffs.iter().map(|x| (x - mean_diff).powi(2)).sum::<f64>() / (r - 1.0);
    let std_err = (var / r).sqrt();
    Ok(SymmetryReport {
        k,
        reps,
        mean_diff,
        std_err,
        within_3_sigma: mean_diff.abs() <= 3.0 * std_err,
        max_exchange_error,
    })
}
