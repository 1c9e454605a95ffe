//! Full-batch gradient descent with trajectory statistics.
//!
//! Along the way the trainer logs, per class `y` and view `l`:
//! `Lambda_{y,l} = max_r <w_{y,r}, v_{y,l}>`, the set `B_{y,l}` of neurons whose
//! correlation reaches `tau * rho / delta1`, `C_{y,l}` (the sum of correlations
//! over `B_{y,l}`), the gap `Delta_y = |C_{y,0} - C_{y,1}|` with the leading
//! view, the largest off-diagonal correlation and the class gaps `D_{y,s}`.

use serde::{Deserialize, Serialize};

use crate::data::{Example, FeatureDictionary};
use crate::losses::{LossEngine, Objective, PairMode};
use crate::network::{correlation_table, NetworkConfig, Weights};
use crate::rng::{stream_rng, Stream};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Learning rate.
    pub eta: f64,
    /// Number of gradient steps `T`.
    pub iters: usize,
    pub objective: Objective,
    pub log_every: usize,
    /// `tau` in the B-set threshold `tau * rho / delta1`.
    pub b_threshold_mult: f64,
    pub seed: u64,
    pub pairs: PairMode,
}

impl TrainConfig {
    pub fn new(objective: Objective, eta: f64, iters: usize) -> Self {
        let b_threshold_mult = match objective {
            Objective::Erm => 1.0,
            _ => 2.0,
        };
        TrainConfig {
            eta,
            iters,
            objective,
            log_every: default_log_every(iters),
            b_threshold_mult,
            seed: 0,
            pairs: PairMode::Exact,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            v.push(format!("train.eta must be a nonnegative finite number, got {}", self.eta));
        }
        if self.log_every == 0 {
            v.push("train.log_every must be at least 1".into());
        }
        if !(self.b_threshold_mult > 0.0) {
            v.push(format!("B-set multiplier must be positive, got {}", self.b_threshold_mult));
        }
        if let Objective::Mixup { spec } = &self.objective {
            if let Err(e) = spec.validate() {
                v.push(e.to_string());
            }
        }
        v
    }
}

/// `max(1, T / 200)`.
pub fn default_log_every(iters: usize) -> usize {
    (iters / 200).max(1)
}

/// Weight-feature statistics at one set of weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub train_acc: f64,
    /// `Lambda_{y,l}`.
    pub lambda: Vec<[f64; 2]>,
    /// `C_{y,l}`.
    pub c: Vec<[f64; 2]>,
    /// `|B_{y,l}|`.
    pub bsize: Vec<[usize; 2]>,
    /// `|C_{y,0} - C_{y,1}|`.
    pub delta: Vec<f64>,
    /// Leading view per class, 1 or 2.
    pub lead: Vec<u8>,
    /// `max_{y, r, s != y, l} <w_{y,r}, v_{s,l}>`, or 0 with a single class.
    pub max_offdiag: f64,
    /// `D_{y,s} = (C_{y,0} + C_{y,1}) - (C_{s,0} + C_{s,1})`.
    pub d_matrix: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub loss: f64,
    #[serde(flatten)]
    pub metrics: Metrics,
}

impl TrajectoryRecord {
    /// Column names: t, loss, train_acc, then per (y, l) lambda/c/bsize, then
    /// per y delta/lead, then max_offdiag. Views are numbered 1 and 2.
    pub fn csv_header(k: usize) -> String {
        let mut cols = vec!["t".to_string(), "loss".into(), "train_acc".into()];
        for y in 0..k {
            for l in 1..=2 {
                cols.push(format!("lambda_{y}_{l}"));
                cols.push(format!("c_{y}_{l}"));
                cols.push(format!("bsize_{y}_{l}"));
            }
        }
        for y in 0..k {
            cols.push(format!("delta_{y}"));
            cols.push(format!("lead_{y}"));
        }
        cols.push("max_offdiag".into());
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let m = &self.metrics;
        let mut cols = vec![self.t.to_string(), self.loss.to_string(), m.train_acc.to_string()];
        for y in 0..m.lambda.len() {
            for l in 0..2 {
                cols.push(m.lambda[y][l].to_string());
                cols.push(m.c[y][l].to_string());
                cols.push(m.bsize[y][l].to_string());
            }
        }
        for y in 0..m.lambda.len() {
            cols.push(m.delta[y].to_string());
            cols.push(m.lead[y].to_string());
        }
        cols.push(m.max_offdiag.to_string());
        cols.join(",")
    }
}

/// Trajectory as CSV text with header.
pub fn trajectory_csv(records: &[TrajectoryRecord], k: usize) -> String {
    let mut out = TrajectoryRecord::csv_header(k);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// `S_{y,l} = (1/N) sum_{i in N_y} sum_{p in P_{y,l}(x_i)} beta_{i,p}^alpha`.
pub fn signal_moments<E: Example>(data: &[E], k: usize, alpha: u32) -> Vec<[f64; 2]> {
    let mut s = vec![[0.0; 2]; k];
    for x in data {
        for (view, slot) in s[x.label()].iter_mut().enumerate() {
            *slot += x.view_coefficients(view).iter().map(|b| b.powi(alpha as i32)).sum::<f64>();
        }
    }
    let n = data.len().max(1) as f64;
    for row in &mut s {
        row[0] /= n;
        row[1] /= n;
    }
    s
}

fn metrics_from_engine(
    engine: &LossEngine,
    weights: &Weights,
    dict: &FeatureDictionary,
    threshold: f64,
) -> Result<Metrics> {
    let k = weights.k();
    if dict.k != k || dict.d != weights.d() {
        return Err(Error::ShapeMismatch("dictionary does not match the weights".into()));
    }
    let corr = correlation_table(weights, dict);
    let mut lambda = vec![[f64::NEG_INFINITY; 2]; k];
    let mut c = vec![[0.0; 2]; k];
    let mut bsize = vec![[0usize; 2]; k];
    let mut max_offdiag = f64::NEG_INFINITY;
    for y in 0..k {
        for r in 0..weights.m() {
            for s in 0..k {
                for l in 0..2 {
                    let v = corr[[y, r, 2 * s + l]];
                    if s == y {
                        lambda[y][l] = lambda[y][l].max(v);
                        if v >= threshold {
                            c[y][l] += v;
                            bsize[y][l] += 1;
                        }
                    } else {
                        max_offdiag = max_offdiag.max(v);
                    }
                }
            }
        }
    }
    if max_offdiag == f64::NEG_INFINITY {
        max_offdiag = 0.0;
    }
    let delta = c.iter().map(|cy| (cy[0] - cy[1]).abs()).collect();
    let lead = (0..k)
        .map(|y| {
            let first_leads = if c[y][0] != c[y][1] {
                c[y][0] > c[y][1]
            } else {
                lambda[y][0] >= lambda[y][1]
            };
            if first_leads {
                1
            } else {
                2
            }
        })
        .collect();
    let d_matrix = (0..k)
        .map(|y| (0..k).map(|s| (c[y][0] + c[y][1]) - (c[s][0] + c[s][1])).collect())
        .collect();
    Ok(Metrics {
        train_acc: engine.accuracy(weights)?,
        lambda,
        c,
        bsize,
        delta,
        lead,
        max_offdiag,
        d_matrix,
    })
}

/// All trajectory statistics for `weights` on `data`.
pub fn compute_metrics<E: Example>(
    weights: &Weights,
    cfg: &NetworkConfig,
    data: &[E],
    dict: &FeatureDictionary,
    b_threshold_mult: f64,
    delta1: f64,
) -> Result<Metrics> {
    let engine = LossEngine::new(cfg, data)?;
    metrics_from_engine(&engine, weights, dict, b_threshold_mult * cfg.rho / delta1)
}

/// Fraction of points classified correctly; ties go to the lowest class.
pub fn train_accuracy<E: Example>(weights: &Weights, cfg: &NetworkConfig, data: &[E]) -> Result<f64> {
    LossEngine::new(cfg, data)?.accuracy(weights)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub weights: Weights,
    pub records: Vec<TrajectoryRecord>,
    /// `S_{y,l}`, fixed by the data.
    pub signal_moments: Vec<[f64; 2]>,
}

/// Runs `T` full-batch steps `w <- w - eta * grad`.
///
/// Records are taken at `t = 0`, every `log_every` steps and at `t = T`.
/// `delta1` sets the B-set threshold `tau * rho / delta1`.
pub fn train<E: Example>(
    weights: &Weights,
    cfg: &NetworkConfig,
    data: &[E],
    dict: &FeatureDictionary,
    train_cfg: &TrainConfig,
    delta1: f64,
) -> Result<TrainOutcome> {
    let v = train_cfg.violations();
    if !v.is_empty() {
        return Err(Error::InvalidConfig(v));
    }
    weights.check_shape(cfg)?;
    let engine = LossEngine::new(cfg, data)?;
    let threshold = train_cfg.b_threshold_mult * cfg.rho / delta1;
    let mut rng = stream_rng(train_cfg.seed, Stream::Train);
    let mut w = weights.clone();
    let mut records = Vec::new();
    for t in 0..train_cfg.iters {
        let step = engine.loss_and_gradient(&w, &train_cfg.objective, train_cfg.pairs, &mut rng);
        let (loss, grad, failure) = match step {
            Ok((loss, grad)) if grad.is_finite() => (loss, grad, None),
            Ok((loss, grad)) => (loss, grad, Some("non-finite gradient")),
            Err(Error::NonFinite(_)) => (f64::NAN, Weights::for_config(cfg), Some("non-finite loss")),
            Err(e) => return Err(e),
        };
        if t % train_cfg.log_every == 0 || failure.is_some() {
            let record = TrajectoryRecord {
                t,
                loss,
                metrics: metrics_from_engine(&engine, &w, dict, threshold)?,
            };
            if let Some(reason) = failure {
                return Err(Error::Diverged {
                    iteration: t,
                    reason: reason.into(),
                    record: Box::new(record),
                });
            }
            records.push(record);
        }
        w.scaled_add(-train_cfg.eta, &grad);
    }
    let final_loss = engine.loss(&w, &train_cfg.objective, &mut rng);
    let record = TrajectoryRecord {
        t: train_cfg.iters,
        loss: *final_loss.as_ref().unwrap_or(&f64::NAN),
        metrics: metrics_from_engine(&engine, &w, dict, threshold)?,
    };
    match final_loss {
        Ok(_) => records.push(record),
        Err(Error::NonFinite(_)) => {
            return Err(Error::Diverged {
                iteration: train_cfg.iters,
                reason: "non-finite loss".into(),
                record: Box::new(record),
            })
        }
        Err(e) => return Err(e),
    }
    Ok(TrainOutcome {
        weights: w,
        records,
        signal_moments: signal_moments(data, cfg.k, cfg.alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{sample_simple_dataset, simple_point, SimplePoint};
    use crate::network::{init_weights, Activation};
    use crate::rng::seeded;

    fn setup(k: usize, n: usize) -> (NetworkConfig, FeatureDictionary, Vec<SimplePoint>, Weights) {
        let mut rng = seeded(5);
        let dict = FeatureDictionary::build(k, 4 * k, &mut rng).unwrap();
        let data = sample_simple_dataset(k, 4 * k, n, &dict, &mut rng).unwrap();
        let cfg = NetworkConfig { k, d: 4 * k, m: 2, rho: 0.1, ..NetworkConfig::default() };
        let w = init_weights(&cfg, &mut rng).unwrap();
        (cfg, dict, data, w)
    }

    #[test]
    fn zero_iterations_return_initial_weights() {
        let (cfg, dict, data, w) = setup(3, 12);
        let out = train(&w, &cfg, &data, &dict, &TrainConfig::new(Objective::Erm, 1.0, 0), 0.25).unwrap();
        assert_eq!(out.weights, w);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].t, 0);
    }

    #[test]
    fn zero_rate_keeps_weights() {
        let (cfg, dict, data, w) = setup(3, 12);
        let out = train(&w, &cfg, &data, &dict, &TrainConfig::new(Objective::MidpointMixup, 0.0, 7), 0.25).unwrap();
        assert_eq!(out.weights, w);
        let ts: Vec<usize> = out.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, (0..=7).collect::<Vec<_>>());
    }

    #[test]
    fn records_follow_cadence_and_end_at_t() {
        let (cfg, dict, data, w) = setup(3, 12);
        let mut tc = TrainConfig::new(Objective::Erm, 0.5, 10);
        tc.log_every = 4;
        let out = train(&w, &cfg, &data, &dict, &tc, 0.25).unwrap();
        let ts: Vec<usize> = out.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 4, 8, 10]);
    }

    #[test]
    fn divergence_reports_iteration() {
        let (cfg, dict, data, mut w) = setup(3, 12);
        w.w.fill(1e308);
        let tc = TrainConfig::new(Objective::Erm, 1.0, 5);
        match train(&w, &cfg, &data, &dict, &tc, 0.25) {
            Err(Error::Diverged { iteration, record, .. }) => {
                assert_eq!(iteration, 0);
                assert_eq!(record.t, iteration);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_rate_is_rejected() {
        let (cfg, dict, data, w) = setup(3, 12);
        let tc = TrainConfig::new(Objective::Erm, -1.0, 5);
        assert!(matches!(train(&w, &cfg, &data, &dict, &tc, 0.25), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn dictionary_weights_have_unit_diagonal_and_no_offdiagonal() {
        let k = 4;
        let mut rng = seeded(1);
        let dict = FeatureDictionary::build(k, 16, &mut rng).unwrap();
        let cfg = NetworkConfig { k, d: 16, m: 1, ..NetworkConfig::default() };
        let mut w = Weights::for_config(&cfg);
        for y in 0..k {
            w.w.slice_mut(ndarray::s![y, 0, ..]).assign(&dict.vector(y, 0));
        }
        let data = vec![simple_point(&dict, 0, 0.5)];
        let m = compute_metrics(&w, &cfg, &data, &dict, 1.0, 0.25).unwrap();
        for y in 0..k {
            assert!((m.lambda[y][0] - 1.0).abs() <= 1e-10);
            assert_eq!(m.lead[y], 1);
        }
        assert!(m.max_offdiag <= 1e-10);
    }

    #[test]
    fn zero_weights_have_empty_b_sets() {
        let (cfg, dict, data, _) = setup(3, 6);
        let m = compute_metrics(&Weights::for_config(&cfg), &cfg, &data, &dict, 1.0, 0.25).unwrap();
        for y in 0..3 {
            assert_eq!(m.lambda[y], [0.0, 0.0]);
            assert_eq!(m.c[y], [0.0, 0.0]);
            assert_eq!(m.bsize[y], [0, 0]);
            assert_eq!(m.delta[y], 0.0);
        }
        assert!(m.d_matrix.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_weights_accuracy_is_share_of_lowest_class() {
        let mut rng = seeded(2);
        let dict = FeatureDictionary::build(2, 8, &mut rng).unwrap();
        let data: Vec<SimplePoint> = (0..10).map(|i| simple_point(&dict, usize::from(i % 2 == 1), 0.5)).collect();
        let cfg = NetworkConfig { k: 2, d: 8, m: 1, activation: Activation::Linear, ..NetworkConfig::default() };
        assert_eq!(train_accuracy(&Weights::for_config(&cfg), &cfg, &data).unwrap(), 0.5);
    }

    #[test]
    fn csv_header_matches_row_width() {
        let (cfg, dict, data, w) = setup(3, 6);
        let out = train(&w, &cfg, &data, &dict, &TrainConfig::new(Objective::Erm, 0.1, 2), 0.25).unwrap();
        let text = trajectory_csv(&out.records, 3);
        let widths: Vec<usize> = text.lines().map(|l| l.split(',').count()).collect();
        assert_eq!(widths[0], 3 + 3 * 2 * 3 + 2 * 3 + 1);
        assert!(widths.iter().all(|&w| w == widths[0]));
        assert!(text.starts_with("t,loss,train_acc,lambda_0_1,c_0_1,bsize_0_1,lambda_0_2"));
    }
}
