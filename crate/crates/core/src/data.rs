//! Synthetic multi-view data.
//!
//! Every class `y` owns two orthonormal features `v_{y,0}` and `v_{y,1}`
//! (views 0 and 1). A [`DataPoint`] is a tuple of `P` patches: `C_P` patches
//! carry `beta * v_{y,0}`, `C_P` paired patches carry `(delta2 - beta) * v_{y,1}`,
//! and every remaining patch is a small combination of the features of `Q`
//! other classes ("feature noise").

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Beta, Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::linalg::{norm, random_orthonormal_rows, remove_component};
use crate::rng::Rng;
use crate::{Error, Result};

/// Law of the signal coefficients on an interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CoefficientLaw {
    Uniform,
    /// `lo + (hi - lo) * Beta(a, a)`, symmetric about the midpoint.
    ShiftedBeta { a: f64 },
}

impl CoefficientLaw {
    pub fn sample(&self, lo: f64, hi: f64, rng: &mut Rng) -> f64 {
        match *self {
            CoefficientLaw::Uniform => lo + (hi - lo) * rng.random::<f64>(),
            CoefficientLaw::ShiftedBeta { a } => {
                let b = Beta::new(a, a).expect("Beta shape checked by validate");
                lo + (hi - lo) * b.sample(rng)
            }
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        match *self {
            CoefficientLaw::Uniform => Ok(()),
            CoefficientLaw::ShiftedBeta { a } if a > 0.0 && a.is_finite() => Ok(()),
            CoefficientLaw::ShiftedBeta { a } => Err(format!("Beta shape must be positive, got {a}")),
        }
    }
}

impl std::fmt::Display for CoefficientLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoefficientLaw::Uniform => write!(f, "uniform"),
            CoefficientLaw::ShiftedBeta { a } => write!(f, "beta({a})"),
        }
    }
}

impl std::str::FromStr for CoefficientLaw {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("uniform") {
            return Ok(CoefficientLaw::Uniform);
        }
        let inner = s
            .strip_prefix("beta(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("unknown coefficient law `{s}` (expected uniform or beta(a))"))?;
        let a: f64 = inner.trim().parse().map_err(|_| format!("bad Beta shape `{inner}`"))?;
        Ok(CoefficientLaw::ShiftedBeta { a })
    }
}

/// Hyperparameters of the patch distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    /// Number of classes.
    pub k: usize,
    /// Patch dimension.
    pub d: usize,
    /// Patches per point.
    pub p: usize,
    /// Signal patches per feature.
    pub c_p: usize,
    /// Feature-noise classes per point.
    pub q: usize,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub delta4: f64,
    pub beta_law: CoefficientLaw,
}

impl Default for DataConfig {
    /// The desk-scale preset.
    fn default() -> Self {
        DataConfig {
            k: 10,
            d: 256,
            p: 30,
            c_p: 2,
            q: 2,
            delta1: 0.25,
            delta2: 1.0,
            delta3: 0.05,
            delta4: 0.06,
            beta_law: CoefficientLaw::Uniform,
        }
    }
}

impl DataConfig {
    /// Every violated constraint, not just the first.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.k < 2 {
            v.push(format!("data.k must be at least 2, got {}", self.k));
        }
        if self.d < 2 * self.k {
            v.push(format!("d < 2k: d = {} but 2k = {}", self.d, 2 * self.k));
        }
        if self.c_p < 1 {
            v.push("data.c_p must be at least 1".to_string());
        }
        if 2 * self.c_p > self.p {
            v.push(format!("2*c_p = {} exceeds p = {}", 2 * self.c_p, self.p));
        }
        if self.q < 1 || self.q + 1 > self.k.max(1) {
            v.push(format!("data.q must lie in [1, k-1], got {}", self.q));
        }
        let deltas = [self.delta1, self.delta2, self.delta3, self.delta4];
        if deltas.iter().any(|x| !x.is_finite()) {
            v.push("coefficient bounds must be finite".to_string());
        }
        if !(self.delta1 > 0.0 && self.delta1 < self.delta2 - self.delta1) {
            v.push(format!(
                "need 0 < delta1 < delta2 - delta1, got delta1 = {}, delta2 = {}",
                self.delta1, self.delta2
            ));
        }
        if !(self.delta3 > 0.0 && self.delta3 <= self.delta4) {
            v.push(format!(
                "need 0 < delta3 <= delta4, got delta3 = {}, delta4 = {}",
                self.delta3, self.delta4
            ));
        }
        if !(self.delta4 < self.delta1) {
            v.push(format!(
                "need delta4 < delta1, got delta4 = {}, delta1 = {}",
                self.delta4, self.delta1
            ));
        }
        if let Err(e) = self.beta_law.validate() {
            v.push(e);
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v))
        }
    }

    /// Support of the signal coefficients, `[delta1, delta2 - delta1]`.
    pub fn beta_support(&self) -> (f64, f64) {
        (self.delta1, self.delta2 - self.delta1)
    }
}

/// The `2k` orthonormal feature vectors, row `2y + view` holds `v_{y,view}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureDictionary {
    pub k: usize,
    pub d: usize,
    pub vectors: Array2<f64>,
}

impl FeatureDictionary {
    pub fn build(k: usize, d: usize, rng: &mut Rng) -> Result<Self> {
        if d < 2 * k {
            return Err(Error::DimensionTooSmall {
                required: 2 * k,
                actual: d,
            });
        }
        let vectors = random_orthonormal_rows(2 * k, d, rng)?;
        Ok(FeatureDictionary { k, d, vectors })
    }

    pub fn vector(&self, class: usize, view: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(2 * class + view)
    }

    pub fn get(&self, class: usize, view: usize) -> Result<ArrayView1<'_, f64>> {
        if class >= self.k || view > 1 {
            return Err(Error::IndexOutOfRange(format!(
                "feature ({class}, {view}) with k = {}",
                self.k
            )));
        }
        Ok(self.vector(class, view))
    }

    /// Coordinates of `x` in the dictionary basis, index `2y + view`.
    pub fn coordinates(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.vectors.dot(&x)
    }
}

pub fn build_feature_dictionary(cfg: &DataConfig, rng: &mut Rng) -> Result<FeatureDictionary> {
    FeatureDictionary::build(cfg.k, cfg.d, rng)
}

/// Anything the network and losses can consume: a labeled tuple of patches.
pub trait Example {
    /// Patches as rows, shape `(P, d)`.
    fn patches(&self) -> ArrayView2<'_, f64>;
    fn label(&self) -> usize;
    /// Coefficients of the label's feature `view` over its signal patches.
    fn view_coefficients(&self, view: usize) -> Vec<f64>;
}

/// One draw from the multi-view distribution, with its generation metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub patches: Array2<f64>,
    pub label: usize,
    /// Patch indices carrying view 0 and view 1 signal, each sorted.
    pub signal_sets: [Vec<usize>; 2],
    /// `(p, phi(p))` for `p` in `signal_sets[0]`.
    pub pairing: Vec<(usize, usize)>,
    /// `beta_{y,p}` for each `p` in `signal_sets[0]`.
    pub signal_coeffs: Vec<f64>,
    /// `delta2 - beta_{y,p}`, the coefficient on the paired view 1 patch.
    pub partner_coeffs: Vec<f64>,
    pub noise_classes: Vec<usize>,
    /// `gamma_{j,view}` for each noise class `j`.
    pub noise_coeffs: Vec<[f64; 2]>,
}

impl Example for DataPoint {
    fn patches(&self) -> ArrayView2<'_, f64> {
        self.patches.view()
    }

    fn label(&self) -> usize {
        self.label
    }

    fn view_coefficients(&self, view: usize) -> Vec<f64> {
        if view == 0 {
            self.signal_coeffs.clone()
        } else {
            self.partner_coeffs.clone()
        }
    }
}

impl DataPoint {
    pub fn num_patches(&self) -> usize {
        self.patches.nrows()
    }

    /// Patch indices that are neither view 0 nor view 1 signal.
    pub fn noise_patches(&self) -> Vec<usize> {
        (0..self.num_patches())
            .filter(|p| !self.signal_sets[0].contains(p) && !self.signal_sets[1].contains(p))
            .collect()
    }

    /// Sum of all patches.
    pub fn patch_sum(&self) -> Array1<f64> {
        self.patches.sum_axis(Axis(0))
    }

    /// Checks the generation invariants, reporting the first violation.
    pub fn check(&self, cfg: &DataConfig, dict: &FeatureDictionary) -> std::result::Result<(), String> {
        let (lo, hi) = cfg.beta_support();
        let [s0, s1] = &self.signal_sets;
        if s0.len() != cfg.c_p || s1.len() != cfg.c_p {
            return Err("signal set size differs from c_p".into());
        }
        if s0.iter().any(|p| s1.contains(p)) {
            return Err("signal sets overlap".into());
        }
        for (idx, &(p, q)) in self.pairing.iter().enumerate() {
            let beta = self.signal_coeffs[idx];
            let partner = self.partner_coeffs[idx];
            if !(lo..=hi).contains(&beta) {
                return Err(format!("beta {beta} outside [{lo}, {hi}]"));
            }
            if beta + partner != cfg.delta2 {
                return Err(format!("beta + partner = {} != delta2", beta + partner));
            }
            let want0 = dict.vector(self.label, 0).mapv(|v| beta * v);
            let want1 = dict.vector(self.label, 1).mapv(|v| partner * v);
            if self.patches.row(p) != want0 || self.patches.row(q) != want1 {
                return Err(format!("signal pair ({p}, {q}) does not match its coefficients"));
            }
        }
        let mut noise = Array1::<f64>::zeros(cfg.d);
        for (j, &s) in self.noise_classes.iter().enumerate() {
            if s == self.label {
                return Err("noise class equals the label".into());
            }
            for view in 0..2 {
                let g = self.noise_coeffs[j][view];
                if !(cfg.delta3..=cfg.delta4).contains(&g) {
                    return Err(format!("noise coefficient {g} outside [delta3, delta4]"));
                }
                noise.scaled_add(g, &dict.vector(s, view));
            }
        }
        for p in self.noise_patches() {
            if self.patches.row(p) != noise {
                return Err(format!("noise patch {p} does not match its coefficients"));
            }
        }
        Ok(())
    }
}

fn check_dict(cfg: &DataConfig, dict: &FeatureDictionary) -> Result<()> {
    if dict.k != cfg.k || dict.d != cfg.d {
        return Err(Error::ShapeMismatch(format!(
            "dictionary is (k = {}, d = {}) but config is (k = {}, d = {})",
            dict.k, dict.d, cfg.k, cfg.d
        )));
    }
    Ok(())
}

fn draw_point(cfg: &DataConfig, dict: &FeatureDictionary, label: usize, rng: &mut Rng) -> DataPoint {
    let chosen = index::sample(rng, cfg.p, 2 * cfg.c_p).into_vec();
    let mut first: Vec<usize> = chosen[..cfg.c_p].to_vec();
    let mut second: Vec<usize> = chosen[cfg.c_p..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    let pairing: Vec<(usize, usize)> = first.iter().copied().zip(second.iter().copied()).collect();

    let (lo, hi) = cfg.beta_support();
    let signal_coeffs: Vec<f64> = (0..cfg.c_p).map(|_| cfg.beta_law.sample(lo, hi, rng)).collect();
    let partner_coeffs: Vec<f64> = signal_coeffs.iter().map(|b| cfg.delta2 - b).collect();

    let noise_classes: Vec<usize> = index::sample(rng, cfg.k - 1, cfg.q)
        .into_iter()
        .map(|s| if s >= label { s + 1 } else { s })
        .collect();
    let noise_coeffs: Vec<[f64; 2]> = noise_classes
        .iter()
        .map(|_| {
            let a = cfg.delta3 + (cfg.delta4 - cfg.delta3) * rng.random::<f64>();
            let b = cfg.delta3 + (cfg.delta4 - cfg.delta3) * rng.random::<f64>();
            [a, b]
        })
        .collect();

    let mut noise = Array1::<f64>::zeros(cfg.d);
    for (j, &s) in noise_classes.iter().enumerate() {
        for view in 0..2 {
            noise.scaled_add(noise_coeffs[j][view], &dict.vector(s, view));
        }
    }

    let mut patches = Array2::<f64>::zeros((cfg.p, cfg.d));
    for mut row in patches.rows_mut() {
        row.assign(&noise);
    }
    for (idx, &(p, q)) in pairing.iter().enumerate() {
        let beta = signal_coeffs[idx];
        let partner = partner_coeffs[idx];
        patches.row_mut(p).assign(&dict.vector(label, 0).mapv(|v| beta * v));
        patches.row_mut(q).assign(&dict.vector(label, 1).mapv(|v| partner * v));
    }

    DataPoint {
        patches,
        label,
        signal_sets: [first, second],
        pairing,
        signal_coeffs,
        partner_coeffs,
        noise_classes,
        noise_coeffs,
    }
}

/// One point with a uniformly drawn label.
pub fn sample_point(cfg: &DataConfig, dict: &FeatureDictionary, rng: &mut Rng) -> Result<DataPoint> {
    cfg.validate()?;
    check_dict(cfg, dict)?;
    let label = rng.random_range(0..cfg.k);
    Ok(draw_point(cfg, dict, label, rng))
}

/// One point of a fixed class (used for fresh diagnostic samples).
pub fn sample_point_of_class(
    cfg: &DataConfig,
    dict: &FeatureDictionary,
    label: usize,
    rng: &mut Rng,
) -> Result<DataPoint> {
    cfg.validate()?;
    check_dict(cfg, dict)?;
    if label >= cfg.k {
        return Err(Error::IndexOutOfRange(format!("class {label} with k = {}", cfg.k)));
    }
    Ok(draw_point(cfg, dict, label, rng))
}

/// `n` i.i.d. draws.
pub fn sample_dataset(
    cfg: &DataConfig,
    dict: &FeatureDictionary,
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<DataPoint>> {
    cfg.validate()?;
    check_dict(cfg, dict)?;
    Ok((0..n)
        .map(|_| {
            let label = rng.random_range(0..cfg.k);
            draw_point(cfg, dict, label, rng)
        })
        .collect())
}

/// A point `x = beta v_{y,0} + (1 - beta) v_{y,1}` of the linear warm-up setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplePoint {
    pub x: Array1<f64>,
    pub label: usize,
    pub beta: f64,
}

impl Example for SimplePoint {
    fn patches(&self) -> ArrayView2<'_, f64> {
        self.x.view().insert_axis(Axis(0))
    }

    fn label(&self) -> usize {
        self.label
    }

    fn view_coefficients(&self, view: usize) -> Vec<f64> {
        if view == 0 {
            vec![self.beta]
        } else {
            vec![1.0 - self.beta]
        }
    }
}

pub const SIMPLE_BETA_RANGE: (f64, f64) = (0.1, 0.9);

/// Builds the simple point of class `label` with a given `beta`.
pub fn simple_point(dict: &FeatureDictionary, label: usize, beta: f64) -> SimplePoint {
    let mut x = dict.vector(label, 0).mapv(|v| beta * v);
    x.scaled_add(1.0 - beta, &dict.vector(label, 1));
    SimplePoint { x, label, beta }
}

pub fn sample_simple_dataset(
    k: usize,
    d: usize,
    n: usize,
    dict: &FeatureDictionary,
    rng: &mut Rng,
) -> Result<Vec<SimplePoint>> {
    if dict.k != k || dict.d != d {
        return Err(Error::ShapeMismatch(format!(
            "dictionary is (k = {}, d = {}) but requested (k = {k}, d = {d})",
            dict.k, dict.d
        )));
    }
    let (lo, hi) = SIMPLE_BETA_RANGE;
    Ok((0..n)
        .map(|_| {
            let label = rng.random_range(0..k);
            let beta = lo + (hi - lo) * rng.random::<f64>();
            simple_point(dict, label, beta)
        })
        .collect())
}

/// Removes feature `v_{class,view}` from every patch of a class-`class` point.
///
/// Each patch loses its component along the feature; the view's signal
/// patches, being pure multiples of it, become exactly zero.
pub fn ablate_feature(point: &DataPoint, dict: &FeatureDictionary, class: usize, view: usize) -> Result<DataPoint> {
    if point.label != class {
        return Err(Error::LabelMismatch {
            expected: class,
            actual: point.label,
        });
    }
    let v = dict.get(class, view)?;
    let mut out = point.clone();
    for row in out.patches.rows_mut() {
        remove_component(row, v);
    }
    for &p in &point.signal_sets[view] {
        out.patches.row_mut(p).fill(0.0);
    }
    Ok(out)
}

/// Dataset where every point's feature noise comes from one other class,
/// with every noise coefficient equal to `delta3`.
pub fn construct_degenerate_instance(
    cfg: &DataConfig,
    dict: &FeatureDictionary,
    n: usize,
    rng: &mut Rng,
) -> Result<Vec<DataPoint>> {
    if cfg.p as f64 * cfg.delta3 <= cfg.delta2 {
        return Err(Error::InvalidConfig(vec![format!(
            "degenerate instance needs p * delta3 > delta2, got {} * {} <= {}",
            cfg.p, cfg.delta3, cfg.delta2
        )]));
    }
    let single = DataConfig {
        q: 1,
        delta4: cfg.delta3,
        ..cfg.clone()
    };
    sample_dataset(&single, dict, n, rng)
}

/// Copy of `point` with every feature-noise patch set to zero.
pub fn without_feature_noise(point: &DataPoint) -> DataPoint {
    let mut out = point.clone();
    for p in point.noise_patches() {
        out.patches.row_mut(p).fill(0.0);
    }
    out.noise_classes.clear();
    out.noise_coeffs.clear();
    out
}

/// Flat labeled vectors, the input of [`inject_spurious_features`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VectorDataset {
    pub dim: usize,
    pub items: Vec<(Array1<f64>, usize)>,
}

impl VectorDataset {
    pub fn new(dim: usize, items: Vec<(Array1<f64>, usize)>) -> Result<Self> {
        if let Some((x, _)) = items.iter().find(|(x, _)| x.len() != dim) {
            return Err(Error::ShapeMismatch(format!(
                "item of dimension {} in a dataset of dimension {dim}",
                x.len()
            )));
        }
        Ok(VectorDataset { dim, items })
    }

    /// Patch sums of multi-view points.
    pub fn from_patch_sums(points: &[DataPoint]) -> Result<Self> {
        let dim = points.first().map(|p| p.patches.ncols()).unwrap_or(0);
        Self::new(dim, points.iter().map(|p| (p.patch_sum(), p.label)).collect())
    }

    pub fn num_classes(&self) -> usize {
        self.items.iter().map(|(_, y)| y + 1).max().unwrap_or(0)
    }
}

/// Result of the Dirichlet injection.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Injection {
    pub dataset: VectorDataset,
    /// `(beta_1, ..., beta_L)` drawn for each item.
    pub coefficients: Vec<Vec<f64>>,
    /// Spurious vectors, row `y * (L - 1) + (l - 2)` holds `v_{y,l}`.
    pub basis: Array2<f64>,
}

/// A draw from the Dirichlet distribution of order `l` with all parameters one.
pub fn dirichlet_ones(l: usize, rng: &mut Rng) -> Vec<f64> {
    let draws: Vec<f64> = (0..l).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|e| e / total).collect()
}

/// `x' = beta_1 x + |x| sum_{l=2..L} beta_l v_{y,l}` for every item.
pub fn inject_spurious_features(ds: &VectorDataset, l: usize, rng: &mut Rng) -> Result<Injection> {
    if l < 1 {
        return Err(Error::Domain("injection order L must be at least 1".into()));
    }
    let classes = ds.num_classes();
    let extra = l - 1;
    if classes * extra > ds.dim {
        return Err(Error::DimensionTooSmall {
            required: classes * extra,
            actual: ds.dim,
        });
    }
    let basis = random_orthonormal_rows(classes * extra, ds.dim, rng)?;
    let mut items = Vec::with_capacity(ds.items.len());
    let mut coefficients = Vec::with_capacity(ds.items.len());
    for (x, y) in &ds.items {
        let betas = dirichlet_ones(l, rng);
        let scale = norm(x.view());
        let mut out = x.mapv(|v| betas[0] * v);
        for (j, b) in betas.iter().enumerate().skip(1) {
            out.scaled_add(scale * b, &basis.row(y * extra + j - 1));
        }
        items.push((out, *y));
        coefficients.push(betas);
    }
    Ok(Injection {
        dataset: VectorDataset { dim: ds.dim, items },
        coefficients,
        basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn small_cfg() -> DataConfig {
        DataConfig {
            k: 4,
            d: 24,
            p: 8,
            c_p: 2,
            q: 2,
            ..DataConfig::default()
        }
    }

    #[test]
    fn dictionary_for_k1_spans_the_plane() {
        let dict = FeatureDictionary::build(1, 2, &mut seeded(0)).unwrap();
        let g = dict.vectors.dot(&dict.vectors.t());
        assert!((g[[0, 0]] - 1.0).abs() < 1e-10);
        assert!((g[[1, 1]] - 1.0).abs() < 1e-10);
        assert!(g[[0, 1]].abs() < 1e-10);
    }

    #[test]
    fn dictionary_for_k3_d16_is_orthonormal() {
        let dict = FeatureDictionary::build(3, 16, &mut seeded(1)).unwrap();
        for a in 0..6 {
            for b in 0..6 {
                let ip = dict.vectors.row(a).dot(&dict.vectors.row(b));
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((ip - target).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn dictionary_rejects_small_dimension() {
        let err = FeatureDictionary::build(5, 9, &mut seeded(1)).unwrap_err();
        assert!(matches!(err, Error::DimensionTooSmall { required: 10, actual: 9 }));
    }

    #[test]
    fn dictionary_is_deterministic() {
        let a = FeatureDictionary::build(3, 16, &mut seeded(42)).unwrap();
        let b = FeatureDictionary::build(3, 16, &mut seeded(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_signal_pair_layout() {
        let cfg = DataConfig {
            k: 3,
            d: 8,
            p: 3,
            c_p: 1,
            q: 1,
            ..DataConfig::default()
        };
        let mut rng = seeded(5);
        let dict = build_feature_dictionary(&cfg, &mut rng).unwrap();
        let x = sample_point(&cfg, &dict, &mut rng).unwrap();
        assert_eq!(x.signal_sets[0].len(), 1);
        assert_eq!(x.signal_sets[1].len(), 1);
        assert_eq!(x.noise_patches().len(), 1);
        x.check(&cfg, &dict).unwrap();
    }

    #[test]
    fn sampled_points_satisfy_invariants() {
        let cfg = small_cfg();
        let mut rng = seeded(9);
        let dict = build_feature_dictionary(&cfg, &mut rng).unwrap();
        let data = sample_dataset(&cfg, &dict, 100, &mut rng).unwrap();
        assert_eq!(data.len(), 100);
        for x in &data {
            x.check(&cfg, &dict).unwrap();
        }
        assert!(sample_dataset(&cfg, &dict, 0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn dataset_is_deterministic() {
        let cfg = small_cfg();
        let dict = build_feature_dictionary(&cfg, &mut seeded(1)).unwrap();
        let a = sample_dataset(&cfg, &dict, 20, &mut seeded(2)).unwrap();
        let b = sample_dataset(&cfg, &dict, 20, &mut seeded(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_config_lists_every_violation() {
        let cfg = DataConfig {
            k: 10,
            d: 4,
            delta4: 0.5,
            ..DataConfig::default()
        };
        let v = cfg.violations();
        assert_eq!(v.len(), 2, "{v:?}");
        assert!(v[0].contains("d < 2k"));
    }

    #[test]
    fn forced_half_beta_is_the_feature_average() {
        let dict = FeatureDictionary::build(3, 10, &mut seeded(3)).unwrap();
        let p = simple_point(&dict, 1, 0.5);
        let want = (&dict.vector(1, 0) + &dict.vector(1, 1)) / 2.0;
        for (a, b) in p.x.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn simple_points_have_unit_coefficient_sum() {
        let dict = FeatureDictionary::build(4, 12, &mut seeded(3)).unwrap();
        let data = sample_simple_dataset(4, 12, 200, &dict, &mut seeded(4)).unwrap();
        for p in &data {
            let s = p.x.dot(&dict.vector(p.label, 0)) + p.x.dot(&dict.vector(p.label, 1));
            assert!((s - 1.0).abs() < 1e-10);
            assert!((0.1..=0.9).contains(&p.beta));
        }
    }

    #[test]
    fn ablation_zeroes_the_removed_view() {
        let cfg = small_cfg();
        let mut rng = seeded(11);
        let dict = build_feature_dictionary(&cfg, &mut rng).unwrap();
        let x = sample_point(&cfg, &dict, &mut rng).unwrap();
        let y = x.label;
        let ablated = ablate_feature(&x, &dict, y, 1).unwrap();
        for &p in &x.signal_sets[1] {
            assert!(norm(ablated.patches.row(p)) <= 1e-12);
        }
        let ablated0 = ablate_feature(&x, &dict, y, 0).unwrap();
        for p in 0..cfg.p {
            assert!(ablated0.patches.row(p).dot(&dict.vector(y, 0)).abs() <= 1e-12);
            let before = x.patches.row(p).dot(&dict.vector(y, 1));
            let after = ablated0.patches.row(p).dot(&dict.vector(y, 1));
            assert!((before - after).abs() <= 1e-12);
        }
    }

    #[test]
    fn ablation_checks_label() {
        let cfg = small_cfg();
        let mut rng = seeded(11);
        let dict = build_feature_dictionary(&cfg, &mut rng).unwrap();
        let x = sample_point(&cfg, &dict, &mut rng).unwrap();
        let other = (x.label + 1) % cfg.k;
        assert!(matches!(
            ablate_feature(&x, &dict, other, 0),
            Err(Error::LabelMismatch { .. })
        ));
    }

    #[test]
    fn degenerate_instance_uses_one_noise_class() {
        let cfg = DataConfig::default();
        let mut rng = seeded(12);
        let dict = build_feature_dictionary(&cfg, &mut rng).unwrap();
        let data = construct_degenerate_instance(&cfg, &dict, 50, &mut rng).unwrap();
        for x in &data {
            assert_eq!(x.noise_classes.len(), 1);
            assert_eq!(x.noise_coeffs[0], [cfg.delta3, cfg.delta3]);
            let s = x.noise_classes[0];
            let sum = x.patch_sum();
            let mass = sum.dot(&dict.vector(s, 0));
            let want = (cfg.p - 2 * cfg.c_p) as f64 * cfg.delta3;
            assert!((mass - want).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_instance_requires_noise_mass() {
        let cfg = DataConfig {
            delta3: 0.01,
            delta4: 0.01,
            ..DataConfig::default()
        };
        let dict = build_feature_dictionary(&cfg, &mut seeded(0)).unwrap();
        assert!(construct_degenerate_instance(&cfg, &dict, 5, &mut seeded(1)).is_err());
    }

    #[test]
    fn injection_with_l1_is_identity() {
        let mut rng = seeded(2);
        let items: Vec<(Array1<f64>, usize)> = (0..10)
            .map(|i| (Array1::from_iter((0..6).map(|j| (i * 7 + j) as f64 * 0.37 - 1.0)), i % 3))
            .collect();
        let ds = VectorDataset::new(6, items).unwrap();
        let inj = inject_spurious_features(&ds, 1, &mut rng).unwrap();
        assert_eq!(inj.dataset, ds);
        assert!(inj.coefficients.iter().all(|c| c == &vec![1.0]));
    }

    #[test]
    fn injection_rejects_small_dimension() {
        let ds = VectorDataset::new(4, vec![(Array1::ones(4), 0), (Array1::ones(4), 2)]).unwrap();
        assert!(inject_spurious_features(&ds, 3, &mut seeded(0)).is_err());
    }

    #[test]
    fn coefficient_law_round_trips_through_text() {
        for law in [CoefficientLaw::Uniform, CoefficientLaw::ShiftedBeta { a: 2.5 }] {
            let back: CoefficientLaw = law.to_string().parse().unwrap();
            assert_eq!(back, law);
        }
        assert!("gamma(2)".parse::<CoefficientLaw>().is_err());
    }
}
