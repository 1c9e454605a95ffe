use serde::{Deserialize, Serialize};

use crate::data::CoefficientLaw;
use crate::linalg::spearman;
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// `bins + 1` edges in `x`; bins hold equal sample counts.
    pub bin_edges: Vec<f64>,
    /// Within-bin mean of `sum beta^alpha / x`.
    pub bin_means: Vec<f64>,
    /// Spearman correlation of the bin means with the bin index.
    pub rank_correlation: f64,
    pub samples: usize,
    pub alpha: u32,
    pub c_p: usize,
    pub distribution: String,
}

/// Estimates `f(x) = E[sum_p beta_p^alpha | sum_p beta_p = x] / x` by binning
/// and measures how monotone it is.
///
/// Each of the `samples` draws is `c_p` i.i.d. coefficients from `law` on `[lo, hi]`.
pub fn verify_assumption_monotone(
    law: CoefficientLaw,
    support: (f64, f64),
    c_p: usize,
    alpha: u32,
    samples: usize,
    bins: usize,
    rng: &mut Rng,
) -> Result<MonotonicityReport> {
    let (lo, hi) = support;
    if bins == 0 || samples < 20 * bins {
        return Err(Error::Domain(format!(
            "need at least 20 samples per bin, got {samples} samples for {bins} bins"
        )));
    }
    if c_p == 0 {
        return Err(Error::Domain("c_p must be at least 1".into()));
    }
    law.validate().map_err(Error::Domain)?;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0) || hi < lo {
        return Err(Error::Domain(format!("bad support [{lo}, {hi}]")));
    }
    if lo == hi {
        return Err(Error::DegenerateDistribution(format!("all mass at {lo}")));
    }
    let mut pairs: Vec<(f64, f64)> = (0..samples)
        .map(|_| {
            let (mut x, mut s) = (0.0, 0.0);
            for _ in 0..c_p {
                let b = law.sample(lo, hi, rng);
                x += b;
                s += b.powi(alpha as i32);
            }
            (x, s / x)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut bin_edges = vec![pairs[0].0];
    let mut bin_means = Vec::with_capacity(bins);
    for b in 0..bins {
        let start = b * samples / bins;
        let end = (b + 1) * samples / bins;
        let chunk = &pairs[start..end];
        bin_means.push(chunk.iter().map(|p| p.1).sum::<f64>() / chunk.len() as f64);
        bin_edges.push(chunk[chunk.len() - 1].0);
    }
    let order: Vec<f64> = (0..bins).map(|b| b as f64).collect();
    Ok(MonotonicityReport {
        bin_edges,
        rank_correlation: spearman(&order, &bin_means),
        bin_means,
        samples,
        alpha,
        c_p,
        distribution: format!("{law} on [{lo}, {hi}]"),
    })
}
