//! Softmax, the ERM / Mixup / Midpoint Mixup cross-entropies and their exact
//! gradients.
//!
//! Every objective is a weighted sum of *pair terms*: for a mixed point
//! `z = lam x_i + (1 - lam) x_j` the term is
//! `-(lam log phi^{y_i}(g(z)) + (1 - lam) log phi^{y_j}(g(z)))`. ERM is the
//! diagonal with `lam = 1`; Midpoint Mixup is every ordered pair at
//! `lam = 1/2`. [`LossEngine`] evaluates such sums and their gradients.
//!
//! The engine works on unique patches: within a point, identical patches
//! (all feature-noise patches of a generated point, for instance) share one
//! pre-activation, and a mixed point's patch `p` only depends on the pair of
//! unique patches at position `p` in its parents. Pre-activations of mixed
//! points are therefore `lam h_i + (1 - lam) h_j` with `h = W x` computed once
//! per step, and the gradient is assembled as one matrix product from
//! per-patch coefficients.

use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng as _;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::data::Example;
use crate::network::{Act, NetworkConfig, Weights};
use crate::rng::Rng;
use crate::{Error, Result};

/// Number of pair tasks reduced together; partial sums are merged in chunk order.
pub const CHUNK: usize = 8192;

pub fn logsumexp(x: ArrayView1<f64>) -> f64 {
    let max = x.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + x.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// `log phi(x)`, computed as `x - logsumexp(x)`.
pub fn log_softmax(x: ArrayView1<f64>) -> Array1<f64> {
    let lse = logsumexp(x);
    x.mapv(|v| v - lse)
}

pub fn softmax(logits: ArrayView1<f64>) -> Result<Array1<f64>> {
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = logits.mapv(|v| (v - max).exp());
    let total = e.sum();
    Ok(e / total)
}

/// A convex combination of two points, carrying both parent labels.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedPoint {
    pub patches: Array2<f64>,
    pub labels: (usize, usize),
    pub lambda: f64,
}

impl Example for MixedPoint {
    fn patches(&self) -> ArrayView2<'_, f64> {
        self.patches.view()
    }

    fn label(&self) -> usize {
        self.labels.0
    }

    fn view_coefficients(&self, _view: usize) -> Vec<f64> {
        Vec::new()
    }
}

/// `lam a + (1 - lam) b`, patchwise.
pub fn mix<A: Example + ?Sized, B: Example + ?Sized>(a: &A, b: &B, lambda: f64) -> Result<MixedPoint> {
    let (pa, pb) = (a.patches(), b.patches());
    if pa.dim() != pb.dim() {
        return Err(Error::ShapeMismatch(format!(
            "cannot mix patch tuples of shapes {:?} and {:?}",
            pa.dim(),
            pb.dim()
        )));
    }
    let mut patches = pa.mapv(|v| lambda * v);
    patches.scaled_add(1.0 - lambda, &pb);
    Ok(MixedPoint {
        patches,
        labels: (a.label(), b.label()),
        lambda,
    })
}

/// `(a + b) / 2`, patchwise.
pub fn midpoint<A: Example + ?Sized, B: Example + ?Sized>(a: &A, b: &B) -> Result<MixedPoint> {
    mix(a, b, 0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MixingKind {
    /// `lam = 1/2` with probability one.
    Midpoint,
    /// `lam ~ Beta(a, a)`, expectation estimated by Monte Carlo.
    Beta { a: f64 },
    /// Finite support: `(lam, probability)` atoms.
    Discrete { atoms: Vec<(f64, f64)> },
}

/// Mixing distribution `D_lam` for [`mixup_loss`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingSpec {
    pub kind: MixingKind,
    /// Draws of `lam` for the Beta estimator.
    pub mc_samples: usize,
}

impl MixingSpec {
    pub fn midpoint() -> Self {
        MixingSpec {
            kind: MixingKind::Midpoint,
            mc_samples: 1,
        }
    }

    pub fn beta(a: f64, mc_samples: usize) -> Self {
        MixingSpec {
            kind: MixingKind::Beta { a },
            mc_samples,
        }
    }

    pub fn discrete(atoms: Vec<(f64, f64)>) -> Self {
        MixingSpec {
            kind: MixingKind::Discrete { atoms },
            mc_samples: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            MixingKind::Midpoint => Ok(()),
            MixingKind::Beta { a } => {
                if !(*a > 0.0 && a.is_finite()) {
                    return Err(Error::Domain(format!("Beta parameter must be positive, got {a}")));
                }
                if self.mc_samples == 0 {
                    return Err(Error::Domain("Beta mixing needs at least one Monte Carlo sample".into()));
                }
                Ok(())
            }
            MixingKind::Discrete { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::Domain("discrete mixing needs at least one atom".into()));
                }
                if atoms.iter().any(|&(l, w)| !(0.0..=1.0).contains(&l) || !(w >= 0.0)) {
                    return Err(Error::Domain("mixing atoms must have lambda in [0, 1] and nonnegative weight".into()));
                }
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain(format!("mixing weights sum to {total}, not 1")));
                }
                Ok(())
            }
        }
    }

    /// Atoms of the (possibly Monte Carlo) expectation over `lam`.
    pub fn atoms(&self, rng: &mut Rng) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        Ok(match &self.kind {
            MixingKind::Midpoint => vec![(0.5, 1.0)],
            MixingKind::Discrete { atoms } => atoms.clone(),
            MixingKind::Beta { a } => {
                let beta = Beta::new(*a, *a).expect("validated");
                let w = 1.0 / self.mc_samples as f64;
                (0..self.mc_samples).map(|_| (beta.sample(rng), w)).collect()
            }
        })
    }
}

/// How the Midpoint Mixup double sum is evaluated during training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// All `N^2` ordered pairs.
    Exact,
    /// `S` ordered pairs drawn uniformly with replacement per evaluation
    /// (unbiased, approximate).
    Sampled(usize),
}

impl std::str::FromStr for PairMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s == "exact" {
            return Ok(PairMode::Exact);
        }
        match s.strip_prefix("sample:").map(|n| n.trim().parse::<usize>()) {
            Some(Ok(n)) if n > 0 => Ok(PairMode::Sampled(n)),
            _ => Err(format!("bad pair mode `{s}` (expected exact or sample:<S>)")),
        }
    }
}

impl std::fmt::Display for PairMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PairMode::Exact => write!(f, "exact"),
            PairMode::Sampled(n) => write!(f, "sample:{n}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "objective", rename_all = "snake_case")]
pub enum Objective {
    Erm,
    MidpointMixup,
    Mixup { spec: MixingSpec },
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::Erm => "erm",
            Objective::MidpointMixup => "midpoint_mixup",
            Objective::Mixup { .. } => "mixup",
        }
    }
}

/// Text forms: `erm`, `midpoint_mixup`, `mixup:midpoint`, `mixup:beta(a):S` and
/// `mixup:discrete:l1@p1;l2@p2`.
impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        match s {
            "erm" => return Ok(Objective::Erm),
            "midpoint_mixup" => return Ok(Objective::MidpointMixup),
            _ => {}
        }
        let bad = || format!("bad objective `{s}`");
        let rest = s.strip_prefix("mixup:").ok_or_else(bad)?;
        let spec = if rest == "midpoint" {
            MixingSpec::midpoint()
        } else if let Some(atoms) = rest.strip_prefix("discrete:") {
            let atoms = atoms
                .split(';')
                .map(|a| {
                    let (l, p) = a.split_once('@').ok_or_else(bad)?;
                    Ok((l.trim().parse().map_err(|_| bad())?, p.trim().parse().map_err(|_| bad())?))
                })
                .collect::<std::result::Result<Vec<(f64, f64)>, String>>()?;
            MixingSpec::discrete(atoms)
        } else {
            let (a, n) = rest.strip_prefix("beta(").and_then(|r| r.split_once("):")).ok_or_else(bad)?;
            MixingSpec::beta(a.trim().parse().map_err(|_| bad())?, n.trim().parse().map_err(|_| bad())?)
        };
        spec.validate().map_err(|e| e.to_string())?;
        Ok(Objective::Mixup { spec })
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Objective::Erm => write!(f, "erm"),
            Objective::MidpointMixup => write!(f, "midpoint_mixup"),
            Objective::Mixup { spec } => match &spec.kind {
                MixingKind::Midpoint => write!(f, "mixup:midpoint"),
                MixingKind::Beta { a } => write!(f, "mixup:beta({a}):{}", spec.mc_samples),
                MixingKind::Discrete { atoms } => {
                    let parts: Vec<String> = atoms.iter().map(|(l, p)| format!("{l}@{p}")).collect();
                    write!(f, "mixup:discrete:{}", parts.join(";"))
                }
            },
        }
    }
}

/// One weighted pair term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairTask {
    pub i: usize,
    pub j: usize,
    pub lambda: f64,
    pub weight: f64,
}

/// `(unique patch in i, unique patch in j, count)`.
type Group = (u32, u32, u32);

/// Per ordered pair `(i, j)` the term `-(log phi^{y_i}(g(z)) + log phi^{y_j}(g(z)))`
/// at the midpoint `z = (x_i + x_j) / 2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTermTable {
    pub n: usize,
    /// Row-major `n x n`.
    pub terms: Vec<f64>,
}

impl PairTermTable {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.terms[i * self.n + j]
    }

    /// Mean over all `N^2` entries, which is `2 J_MM`.
    pub fn mean(&self) -> f64 {
        self.terms.iter().sum::<f64>() / self.terms.len() as f64
    }

    /// `J_MM` recovered from the table.
    pub fn objective(&self) -> f64 {
        0.5 * self.mean()
    }
}

/// Objective evaluator bound to a fixed dataset and network shape.
pub struct LossEngine {
    cfg: NetworkConfig,
    act: Act,
    labels: Vec<usize>,
    /// Unique patches of all points, stacked, shape `(U, d)`.
    unique: Array2<f64>,
    /// `offsets[i]..offsets[i + 1]` are point `i`'s rows of `unique`.
    offsets: Vec<usize>,
    /// Position -> local unique index, per point.
    position_ids: Vec<Vec<u32>>,
    /// Groups of the diagonal pair `(i, i)`.
    diag_groups: Vec<Vec<Group>>,
    /// Groups for pairs `i <= j`, built on first use.
    pair_groups: OnceLock<Vec<Vec<Group>>>,
}

struct Accum {
    loss: f64,
    /// Gradient coefficients per unique patch, shape `(U, k m)` row-major.
    coef: Vec<f64>,
}

impl LossEngine {
    pub fn new<E: Example>(cfg: &NetworkConfig, data: &[E]) -> Result<Self> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let act = cfg.act()?;
        let p = data[0].patches().nrows();
        let mut rows: Vec<Array1<f64>> = Vec::new();
        let mut offsets = vec![0];
        let mut position_ids = Vec::with_capacity(data.len());
        let mut diag_groups = Vec::with_capacity(data.len());
        let mut labels = Vec::with_capacity(data.len());
        for x in data {
            let patches = x.patches();
            if patches.ncols() != cfg.d || patches.nrows() != p {
                return Err(Error::ShapeMismatch(format!(
                    "point of shape {:?}, expected ({p}, {})",
                    patches.dim(),
                    cfg.d
                )));
            }
            if x.label() >= cfg.k {
                return Err(Error::IndexOutOfRange(format!("label {} with k = {}", x.label(), cfg.k)));
            }
            labels.push(x.label());
            let start = rows.len();
            let mut ids = Vec::with_capacity(p);
            let mut counts: Vec<u32> = Vec::new();
            for row in patches.rows() {
                let found = rows[start..].iter().position(|u| *u == row);
                let id = match found {
                    Some(id) => id,
                    None => {
                        rows.push(row.to_owned());
                        counts.push(0);
                        rows.len() - 1 - start
                    }
                };
                counts[id] += 1;
                ids.push(id as u32);
            }
            diag_groups.push(
                counts
                    .iter()
                    .enumerate()
                    .map(|(a, &c)| (a as u32, a as u32, c))
                    .collect(),
            );
            position_ids.push(ids);
            offsets.push(rows.len());
        }
        let mut unique = Array2::zeros((rows.len(), cfg.d));
        for (mut dst, src) in unique.rows_mut().into_iter().zip(rows) {
            dst.assign(&src);
        }
        Ok(LossEngine {
            cfg: cfg.clone(),
            act,
            labels,
            unique,
            offsets,
            position_ids,
            diag_groups,
            pair_groups: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    fn pair_groups(&self) -> &Vec<Vec<Group>> {
        self.pair_groups.get_or_init(|| {
            let n = self.len();
            let mut out = Vec::with_capacity(n * (n + 1) / 2);
            let mut keys: Vec<(u32, u32)> = Vec::new();
            for i in 0..n {
                for j in i..n {
                    keys.clear();
                    keys.extend(
                        self.position_ids[i]
                            .iter()
                            .zip(&self.position_ids[j])
                            .map(|(&a, &b)| (a, b)),
                    );
                    keys.sort_unstable();
                    let mut groups: Vec<Group> = Vec::new();
                    for &(a, b) in &keys {
                        match groups.last_mut() {
                            Some(g) if g.0 == a && g.1 == b => g.2 += 1,
                            _ => groups.push((a, b, 1)),
                        }
                    }
                    out.push(groups);
                }
            }
            out
        })
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        // row i of the upper triangle starts after sum_{t<i} (n - t) entries
        let n = self.len();
        i * n - i * i.saturating_sub(1) / 2 + (j - i)
    }

    /// Pre-activations of every unique patch, shape `(U, k m)`.
    pub fn unique_preactivations(&self, weights: &Weights) -> Array2<f64> {
        self.unique.dot(&weights.as_matrix().t())
    }

    /// Logits at the training points, shape `(N, k)`.
    pub fn logits(&self, weights: &Weights) -> Result<Array2<f64>> {
        weights.check_shape(&self.cfg)?;
        let h = self.unique_preactivations(weights);
        let mut out = Array2::zeros((self.len(), self.cfg.k));
        let mut scratch = Vec::new();
        let mut logits = vec![0.0; self.cfg.k];
        for i in 0..self.len() {
            self.mixed_logits(&h, i, i, 1.0, &self.diag_groups[i], false, &mut logits, &mut scratch);
            out.row_mut(i).assign(&ArrayView1::from(&logits[..]));
        }
        Ok(out)
    }

    /// Logits of `lam x_i + (1 - lam) x_j` for each `(i, j, lam)`, shape `(pairs, k)`.
    pub fn pair_logits(&self, weights: &Weights, pairs: &[(usize, usize, f64)]) -> Result<Array2<f64>> {
        weights.check_shape(&self.cfg)?;
        let n = self.len();
        if let Some(&(i, j, _)) = pairs.iter().find(|&&(i, j, _)| i >= n || j >= n) {
            return Err(Error::IndexOutOfRange(format!("pair ({i}, {j}) with N = {n}")));
        }
        let h = self.unique_preactivations(weights);
        let mut out = Array2::zeros((pairs.len(), self.cfg.k));
        let mut scratch = Vec::new();
        let mut logits = vec![0.0; self.cfg.k];
        for (row, &(i, j, lambda)) in pairs.iter().enumerate() {
            let (groups, swapped) = self.groups_for(i, j);
            self.mixed_logits(&h, i, j, lambda, groups, swapped, &mut logits, &mut scratch);
            out.row_mut(row).assign(&ArrayView1::from(&logits[..]));
        }
        Ok(out)
    }

    /// Logits of `lam x_i + (1 - lam) x_j`; fills `deriv[g * km + row]` with
    /// `count * act'` for each group.
    #[allow(clippy::too_many_arguments)]
    fn mixed_logits(
        &self,
        h: &Array2<f64>,
        i: usize,
        j: usize,
        lambda: f64,
        groups: &[Group],
        swapped: bool,
        logits: &mut [f64],
        deriv: &mut Vec<f64>,
    ) {
        let km = self.cfg.k * self.cfg.m;
        let m = self.cfg.m;
        let mu = 1.0 - lambda;
        logits.iter_mut().for_each(|g| *g = 0.0);
        if deriv.len() < groups.len() * km {
            deriv.resize(groups.len() * km, 0.0);
        }
        let hs = h.as_slice().expect("standard layout");
        for (g, &(a, b, count)) in groups.iter().enumerate() {
            let (a, b) = if swapped { (b, a) } else { (a, b) };
            let ri = (self.offsets[i] + a as usize) * km;
            let rj = (self.offsets[j] + b as usize) * km;
            let hi = &hs[ri..ri + km];
            let hj = &hs[rj..rj + km];
            let c = count as f64;
            let out = &mut deriv[g * km..(g + 1) * km];
            for y in 0..self.cfg.k {
                let mut acc = 0.0;
                for row in y * m..(y + 1) * m {
                    let z = lambda * hi[row] + mu * hj[row];
                    let (v, dv) = self.act.eval(z);
                    acc += v;
                    out[row] = c * dv;
                }
                logits[y] += c * acc;
            }
        }
    }

    fn groups_for(&self, i: usize, j: usize) -> (&[Group], bool) {
        if i == j {
            return (&self.diag_groups[i], false);
        }
        let groups = self.pair_groups();
        if i < j {
            (&groups[self.pair_index(i, j)], false)
        } else {
            (&groups[self.pair_index(j, i)], true)
        }
    }

    fn run_chunk(&self, h: &Array2<f64>, tasks: &[PairTask], acc: &mut Accum, terms: Option<&mut Vec<f64>>, want_grad: bool) {
        let km = self.cfg.k * self.cfg.m;
        let m = self.cfg.m;
        let k = self.cfg.k;
        let mut logits = vec![0.0; k];
        let mut deriv = Vec::new();
        let mut coef_y = vec![0.0; k];
        let mut terms = terms;
        for t in tasks {
            let (groups, swapped) = self.groups_for(t.i, t.j);
            self.mixed_logits(h, t.i, t.j, t.lambda, groups, swapped, &mut logits, &mut deriv);
            let lse = logsumexp(ArrayView1::from(&logits[..]));
            let (yi, yj) = (self.labels[t.i], self.labels[t.j]);
            let lpi = logits[yi] - lse;
            let lpj = logits[yj] - lse;
            acc.loss += t.weight * -(t.lambda * lpi + (1.0 - t.lambda) * lpj);
            if let Some(terms) = terms.as_deref_mut() {
                terms.push(-(lpi + lpj));
            }
            if !want_grad {
                continue;
            }
            for y in 0..k {
                let mut target = 0.0;
                if y == yi {
                    target += t.lambda;
                }
                if y == yj {
                    target += 1.0 - t.lambda;
                }
                coef_y[y] = t.weight * ((logits[y] - lse).exp() - target);
            }
            for (g, &(a, b, _)) in groups.iter().enumerate() {
                let (a, b) = if swapped { (b, a) } else { (a, b) };
                let ci = (self.offsets[t.i] + a as usize) * km;
                let cj = (self.offsets[t.j] + b as usize) * km;
                let dv = &deriv[g * km..(g + 1) * km];
                for row in 0..km {
                    let s = coef_y[row / m] * dv[row];
                    acc.coef[ci + row] += t.lambda * s;
                    acc.coef[cj + row] += (1.0 - t.lambda) * s;
                }
            }
        }
    }

    /// Weighted sum of pair terms and, when `want_grad`, its gradient.
    ///
    /// Tasks are reduced in fixed chunks of [`CHUNK`] whose partial sums are
    /// merged in order, so results do not depend on whether chunks run in
    /// parallel.
    pub fn evaluate(&self, weights: &Weights, tasks: &[PairTask], want_grad: bool) -> Result<(f64, Option<Weights>)> {
        let (loss, grad, _) = self.evaluate_inner(weights, tasks, want_grad, false)?;
        Ok((loss, grad))
    }

    fn evaluate_inner(
        &self,
        weights: &Weights,
        tasks: &[PairTask],
        want_grad: bool,
        want_terms: bool,
    ) -> Result<(f64, Option<Weights>, Vec<f64>)> {
        weights.check_shape(&self.cfg)?;
        let h = self.unique_preactivations(weights);
        let km = self.cfg.k * self.cfg.m;
        let width = if want_grad { h.nrows() * km } else { 0 };
        let chunk_result = |chunk: &[PairTask]| {
            let mut acc = Accum {
                loss: 0.0,
                coef: vec![0.0; width],
            };
            let mut terms = Vec::new();
            self.run_chunk(&h, chunk, &mut acc, want_terms.then_some(&mut terms), want_grad);
            (acc, terms)
        };

        #[cfg(feature = "parallel")]
        let partials: Vec<(Accum, Vec<f64>)> = {
            use rayon::prelude::*;
            tasks.par_chunks(CHUNK).map(chunk_result).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let partials: Vec<(Accum, Vec<f64>)> = tasks.chunks(CHUNK).map(chunk_result).collect();

        let mut loss = 0.0;
        let mut coef = vec![0.0; width];
        let mut terms = Vec::new();
        for (acc, t) in partials {
            loss += acc.loss;
            for (c, a) in coef.iter_mut().zip(&acc.coef) {
                *c += a;
            }
            terms.extend(t);
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        let grad = if want_grad {
            let coef = Array2::from_shape_vec((h.nrows(), km), coef).expect("sized above");
            let g = coef.t().dot(&self.unique);
            let w = g
                .into_shape_with_order((self.cfg.k, self.cfg.m, self.cfg.d))
                .expect("contiguous product");
            Some(Weights { w })
        } else {
            None
        };
        Ok((loss, grad, terms))
    }

    /// Diagonal tasks `(i, i, lam = 1, 1/N)`.
    pub fn erm_tasks(&self) -> Vec<PairTask> {
        let w = 1.0 / self.len() as f64;
        (0..self.len())
            .map(|i| PairTask {
                i,
                j: i,
                lambda: 1.0,
                weight: w,
            })
            .collect()
    }

    /// All ordered midpoint pairs, folded onto `i <= j` (the term is symmetric).
    pub fn midpoint_tasks(&self) -> Vec<PairTask> {
        let n = self.len();
        let w = 1.0 / (n * n) as f64;
        let mut out = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                out.push(PairTask {
                    i,
                    j,
                    lambda: 0.5,
                    weight: if i == j { w } else { 2.0 * w },
                });
            }
        }
        out
    }

    /// Every ordered pair for every atom, row-major over `(i, j)`.
    pub fn mixup_tasks(&self, atoms: &[(f64, f64)]) -> Vec<PairTask> {
        let n = self.len();
        let base = 1.0 / (n * n) as f64;
        let mut out = Vec::with_capacity(n * n * atoms.len());
        for i in 0..n {
            for j in 0..n {
                for &(lambda, p) in atoms {
                    out.push(PairTask {
                        i,
                        j,
                        lambda,
                        weight: base * p,
                    });
                }
            }
        }
        out
    }

    /// `s` ordered midpoint pairs drawn uniformly with replacement.
    pub fn sampled_midpoint_tasks(&self, s: usize, rng: &mut Rng) -> Vec<PairTask> {
        let n = self.len();
        let w = 1.0 / s as f64;
        (0..s)
            .map(|_| PairTask {
                i: rng.random_range(0..n),
                j: rng.random_range(0..n),
                lambda: 0.5,
                weight: w,
            })
            .collect()
    }

    /// Central differences `(f(w + h e_c) - f(w - h e_c)) / (2h)` of the
    /// weighted pair objective along each flat weight coordinate `c`.
    ///
    /// Every pair term enters through its increments `l(w +- h e_c) - l(w)`:
    /// only the logit of the perturbed class moves, by an exactly computed
    /// activation increment `D`, and the term changes by
    /// `log1p(phi (e^D - 1)) - target D`. This is the same quotient as
    /// subtracting two full loss evaluations, without their cancellation.
    pub fn central_differences(&self, weights: &Weights, tasks: &[PairTask], coords: &[usize], h: f64) -> Result<Vec<f64>> {
        weights.check_shape(&self.cfg)?;
        let (k, m, d) = (self.cfg.k, self.cfg.m, self.cfg.d);
        if let Some(&c) = coords.iter().find(|&&c| c >= k * m * d) {
            return Err(Error::IndexOutOfRange(format!("coordinate {c} of {}", k * m * d)));
        }
        let hm = self.unique_preactivations(weights);
        let mut logits = vec![0.0; k];
        let mut scratch = Vec::new();
        let mut out = Vec::with_capacity(coords.len());
        for &coord in coords {
            let row = coord / d;
            let col = coord % d;
            let y = row / m;
            let mut total = 0.0;
            for t in tasks {
                let (groups, swapped) = self.groups_for(t.i, t.j);
                self.mixed_logits(&hm, t.i, t.j, t.lambda, groups, swapped, &mut logits, &mut scratch);
                let lse = logsumexp(ArrayView1::from(&logits[..]));
                let phi = (logits[y] - lse).exp();
                let mut target = 0.0;
                if y == self.labels[t.i] {
                    target += t.lambda;
                }
                if y == self.labels[t.j] {
                    target += 1.0 - t.lambda;
                }
                let mu = 1.0 - t.lambda;
                let (mut up, mut down) = (0.0, 0.0);
                for &(a, b, count) in groups {
                    let (a, b) = if swapped { (b, a) } else { (a, b) };
                    let ua = self.offsets[t.i] + a as usize;
                    let ub = self.offsets[t.j] + b as usize;
                    let z = t.lambda * hm[[ua, row]] + mu * hm[[ub, row]];
                    let u = h * (t.lambda * self.unique[[ua, col]] + mu * self.unique[[ub, col]]);
                    up += count as f64 * self.act.increment(z, u);
                    down += count as f64 * self.act.increment(z, -u);
                }
                let change = |delta: f64| (phi * delta.exp_m1()).ln_1p() - target * delta;
                total += t.weight * (change(up) - change(down));
            }
            out.push(total / (2.0 * h));
        }
        Ok(out)
    }

    /// Tasks for one evaluation of `objective`.
    pub fn tasks(&self, objective: &Objective, pairs: PairMode, rng: &mut Rng) -> Result<Vec<PairTask>> {
        Ok(match (objective, pairs) {
            (Objective::Erm, _) => self.erm_tasks(),
            (Objective::MidpointMixup, PairMode::Exact) => self.midpoint_tasks(),
            (Objective::MidpointMixup, PairMode::Sampled(s)) => self.sampled_midpoint_tasks(s, rng),
            (Objective::Mixup { spec }, _) => self.mixup_tasks(&spec.atoms(rng)?),
        })
    }

    pub fn loss(&self, weights: &Weights, objective: &Objective, rng: &mut Rng) -> Result<f64> {
        let tasks = self.tasks(objective, PairMode::Exact, rng)?;
        Ok(self.evaluate(weights, &tasks, false)?.0)
    }

    pub fn loss_and_gradient(
        &self,
        weights: &Weights,
        objective: &Objective,
        pairs: PairMode,
        rng: &mut Rng,
    ) -> Result<(f64, Weights)> {
        let tasks = self.tasks(objective, pairs, rng)?;
        let (loss, grad) = self.evaluate(weights, &tasks, true)?;
        Ok((loss, grad.expect("requested")))
    }

    /// Exact Midpoint Mixup loss together with the full pair table.
    pub fn midpoint_table(&self, weights: &Weights) -> Result<(f64, PairTermTable)> {
        let n = self.len();
        let tasks = self.midpoint_tasks();
        let (loss, _, upper) = self.evaluate_inner(weights, &tasks, false, true)?;
        let mut terms = vec![0.0; n * n];
        for (t, v) in tasks.iter().zip(upper) {
            terms[t.i * n + t.j] = v;
            terms[t.j * n + t.i] = v;
        }
        Ok((loss, PairTermTable { n, terms }))
    }

    /// Fraction of points whose arg-max logit (lowest index on ties) is the label.
    pub fn accuracy(&self, weights: &Weights) -> Result<f64> {
        let logits = self.logits(weights)?;
        let correct = logits
            .axis_iter(Axis(0))
            .zip(&self.labels)
            .filter(|(row, &y)| argmax(row.view()) == y)
            .count();
        Ok(correct as f64 / self.len() as f64)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(x: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in x.iter().enumerate() {
        if v > x[best] {
            best = i;
        }
    }
    best
}

/// `J = -(1/N) sum_i log phi^{y_i}(g(x_i))`.
pub fn erm_loss<E: Example>(weights: &Weights, cfg: &NetworkConfig, data: &[E]) -> Result<f64> {
    let engine = LossEngine::new(cfg, data)?;
    Ok(engine.evaluate(weights, &engine.erm_tasks(), false)?.0)
}

pub fn erm_loss_gradient<E: Example>(weights: &Weights, cfg: &NetworkConfig, data: &[E]) -> Result<Weights> {
    let engine = LossEngine::new(cfg, data)?;
    Ok(engine.evaluate(weights, &engine.erm_tasks(), true)?.1.expect("requested"))
}

/// `J_M` with the `lam` expectation taken over `spec`'s atoms.
pub fn mixup_loss<E: Example>(
    weights: &Weights,
    cfg: &NetworkConfig,
    data: &[E],
    spec: &MixingSpec,
    rng: &mut Rng,
) -> Result<f64> {
    let engine = LossEngine::new(cfg, data)?;
    let atoms = spec.atoms(rng)?;
    Ok(engine.evaluate(weights, &engine.mixup_tasks(&atoms), false)?.0)
}

pub fn mixup_loss_gradient<E: Example>(
    weights: &Weights,
    cfg: &NetworkConfig,
    data: &[E],
    spec: &MixingSpec,
    rng: &mut Rng,
) -> Result<Weights> {
    let engine = LossEngine::new(cfg, data)?;
    let atoms = spec.atoms(rng)?;
    Ok(engine.evaluate(weights, &engine.mixup_tasks(&atoms), true)?.1.expect("requested"))
}

/// `J_MM` (exact double sum) and the per-pair table.
pub fn midpoint_mixup_loss<E: Example>(
    weights: &Weights,
    cfg: &NetworkConfig,
    data: &[E],
) -> Result<(f64, PairTermTable)> {
    LossEngine::new(cfg, data)?.midpoint_table(weights)
}

pub fn midpoint_mixup_gradient<E: Example>(weights: &Weights, cfg: &NetworkConfig, data: &[E]) -> Result<Weights> {
    let engine = LossEngine::new(cfg, data)?;
    Ok(engine.evaluate(weights, &engine.midpoint_tasks(), true)?.1.expect("requested"))
}
