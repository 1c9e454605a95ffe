//! Two-layer network with a polynomially smoothed ReLU.
//!
//! `g^y(x) = sum_{r in [m]} sum_{p in [P]} act(<w_{y,r}, x^(p)>)`; the second
//! layer is the fixed sum, so only the `k * m` first-layer vectors train.

use ndarray::{Array1, Array2, Array3, ArrayView2};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Example, FeatureDictionary};
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    SmoothedRelu,
    /// Identity; with `m = 1` and one patch this is the linear model `<w_y, x>`.
    Linear,
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim() {
            "smoothed_relu" => Ok(Activation::SmoothedRelu),
            "linear" => Ok(Activation::Linear),
            other => Err(format!("unknown activation `{other}` (expected smoothed_relu or linear)")),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::SmoothedRelu => "smoothed_relu",
            Activation::Linear => "linear",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub k: usize,
    /// Hidden neurons per class.
    pub m: usize,
    pub d: usize,
    /// Width of the polynomial region.
    pub rho: f64,
    /// Degree of the polynomial region.
    pub alpha: u32,
    pub activation: Activation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            k: 10,
            m: 20,
            d: 256,
            rho: 0.5,
            alpha: 4,
            activation: Activation::SmoothedRelu,
        }
    }
}

impl NetworkConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.k < 1 || self.m < 1 || self.d < 1 {
            v.push(format!(
                "network shape must be positive, got k = {}, m = {}, d = {}",
                self.k, self.m, self.d
            ));
        }
        if self.activation == Activation::SmoothedRelu {
            if !(self.rho > 0.0 && self.rho.is_finite()) {
                v.push(format!("network.rho must be positive, got {}", self.rho));
            }
            if self.alpha < 2 {
                v.push(format!("network.alpha must be at least 2, got {}", self.alpha));
            }
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

    pub fn act(&self) -> Result<Act> {
        match self.activation {
            Activation::Linear => Ok(Act::Linear),
            Activation::SmoothedRelu => Ok(Act::Smoothed(SmoothedRelu::new(self.rho, self.alpha)?)),
        }
    }
}

/// The smoothed ReLU with precomputed constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothedRelu {
    rho: f64,
    alpha: u32,
    inv_rho: f64,
    inv_alpha: f64,
    offset: f64,
}

impl SmoothedRelu {
    pub fn new(rho: f64, alpha: u32) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Domain(format!("rho must be positive, got {rho}")));
        }
        if alpha < 2 {
            return Err(Error::Domain(format!("alpha must be at least 2, got {alpha}")));
        }
        let inv_alpha = 1.0 / alpha as f64;
        Ok(SmoothedRelu {
            rho,
            alpha,
            inv_rho: 1.0 / rho,
            inv_alpha,
            offset: (1.0 - inv_alpha) * rho,
        })
    }

    /// `0` below zero, `x^a / (a rho^(a-1))` on `[0, rho]`, `x - (1 - 1/a) rho` above.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// `0` below zero, `(x / rho)^(a-1)` on `(0, rho)`, `1` above.
    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64) {
        if x <= 0.0 {
            (0.0, 0.0)
        } else if x < self.rho {
            let t = (x * self.inv_rho).powi(self.alpha as i32 - 1);
            (x * t * self.inv_alpha, t)
        } else {
            (x - self.offset, 1.0)
        }
    }

    /// `value(x + u) - value(x)`, without cancellation when both points lie
    /// in the same branch.
    pub fn increment(&self, x: f64, u: f64) -> f64 {
        let y = x + u;
        if x <= 0.0 && y <= 0.0 {
            0.0
        } else if x >= self.rho && y >= self.rho {
            u
        } else if (0.0..self.rho).contains(&x) && (0.0..self.rho).contains(&y) {
            // y^a - x^a = (y - x) sum_k y^k x^(a-1-k), scaled by rho
            let (a, b) = (y * self.inv_rho, x * self.inv_rho);
            let mut sum = 0.0;
            let mut ak = 1.0;
            for k in 0..self.alpha {
                sum += ak * b.powi((self.alpha - 1 - k) as i32);
                ak *= a;
            }
            u * sum * self.inv_alpha
        } else {
            self.value(y) - self.value(x)
        }
    }
}

pub fn smoothed_relu(x: f64, rho: f64, alpha: u32) -> Result<f64> {
    Ok(SmoothedRelu::new(rho, alpha)?.value(x))
}

pub fn smoothed_relu_deriv(x: f64, rho: f64, alpha: u32) -> Result<f64> {
    Ok(SmoothedRelu::new(rho, alpha)?.deriv(x))
}

/// Activation resolved from a [`NetworkConfig`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Act {
    Linear,
    Smoothed(SmoothedRelu),
}

impl Act {
    /// `(value, derivative)`.
    #[inline]
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match self {
            Act::Linear => (x, 1.0),
            Act::Smoothed(s) => s.eval(x),
        }
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    /// `value(x + u) - value(x)`.
    pub fn increment(&self, x: f64, u: f64) -> f64 {
        match self {
            Act::Linear => u,
            Act::Smoothed(s) => s.increment(x, u),
        }
    }
}

/// First-layer weights `w_{y,r}`, shape `(k, m, d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w: Array3<f64>,
}

impl Weights {
    pub fn zeros(k: usize, m: usize, d: usize) -> Self {
        Weights {
            w: Array3::zeros((k, m, d)),
        }
    }

    pub fn for_config(cfg: &NetworkConfig) -> Self {
        Self::zeros(cfg.k, cfg.m, cfg.d)
    }

    pub fn k(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn m(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn d(&self) -> usize {
        self.w.shape()[2]
    }

    /// Rows `y * m + r`, shape `(k m, d)`.
    pub fn as_matrix(&self) -> ArrayView2<'_, f64> {
        let (k, m, d) = self.w.dim();
        self.w
            .view()
            .into_shape_with_order((k * m, d))
            .expect("weights are stored contiguously")
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|x| x.is_finite())
    }

    /// `self += a * other`.
    pub fn scaled_add(&mut self, a: f64, other: &Weights) {
        self.w.scaled_add(a, &other.w);
    }

    pub fn norm(&self) -> f64 {
        self.w.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn check_shape(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.w.dim() != (cfg.k, cfg.m, cfg.d) {
            return Err(Error::ShapeMismatch(format!(
                "weights have shape {:?} but config expects ({}, {}, {})",
                self.w.dim(),
                cfg.k,
                cfg.m,
                cfg.d
            )));
        }
        Ok(())
    }
}

/// Xavier initialization: i.i.d. `N(0, 1/d)` entries.
pub fn init_weights(cfg: &NetworkConfig, rng: &mut Rng) -> Result<Weights> {
    cfg.validate()?;
    let normal = Normal::new(0.0, 1.0 / (cfg.d as f64).sqrt()).expect("positive std");
    let w = Array3::from_shape_simple_fn((cfg.k, cfg.m, cfg.d), || normal.sample(rng));
    Ok(Weights { w })
}

fn check_point<E: Example + ?Sized>(cfg: &NetworkConfig, point: &E) -> Result<()> {
    if point.patches().ncols() != cfg.d {
        return Err(Error::ShapeMismatch(format!(
            "patch dimension {} but network expects {}",
            point.patches().ncols(),
            cfg.d
        )));
    }
    Ok(())
}

/// `<w_{y,r}, x^(p)>` for every neuron and patch, shape `(k m, P)`.
pub fn preactivations<E: Example + ?Sized>(weights: &Weights, point: &E) -> Array2<f64> {
    weights.as_matrix().dot(&point.patches().t())
}

/// Logits `g(x)`.
pub fn forward<E: Example + ?Sized>(weights: &Weights, cfg: &NetworkConfig, point: &E) -> Result<Array1<f64>> {
    weights.check_shape(cfg)?;
    check_point(cfg, point)?;
    let act = cfg.act()?;
    let h = preactivations(weights, point);
    let mut logits = Array1::zeros(cfg.k);
    for (row, hrow) in h.rows().into_iter().enumerate() {
        logits[row / cfg.m] += hrow.iter().map(|&x| act.value(x)).sum::<f64>();
    }
    Ok(logits)
}

/// Gradient of `g^y(x)` with respect to `w_{y,1..m}`, shape `(m, d)`.
///
/// `g^y` does not depend on any other class's weights, so this block is the
/// whole nonzero part of the gradient.
pub fn output_gradient<E: Example + ?Sized>(
    weights: &Weights,
    cfg: &NetworkConfig,
    point: &E,
    class: usize,
) -> Result<Array2<f64>> {
    weights.check_shape(cfg)?;
    check_point(cfg, point)?;
    if class >= cfg.k {
        return Err(Error::IndexOutOfRange(format!("class {class} with k = {}", cfg.k)));
    }
    let act = cfg.act()?;
    let patches = point.patches();
    let block = weights.w.index_axis(ndarray::Axis(0), class);
    let h = block.dot(&patches.t());
    let coef = h.mapv(|x| act.eval(x).1);
    Ok(coef.dot(&patches))
}

/// `<w_{y,r}, v_{s,view}>`.
pub fn correlation(
    weights: &Weights,
    dict: &FeatureDictionary,
    y: usize,
    r: usize,
    s: usize,
    view: usize,
) -> Result<f64> {
    if y >= weights.k() || r >= weights.m() {
        return Err(Error::IndexOutOfRange(format!(
            "neuron ({y}, {r}) with k = {}, m = {}",
            weights.k(),
            weights.m()
        )));
    }
    let v = dict.get(s, view)?;
    if v.len() != weights.d() {
        return Err(Error::ShapeMismatch("dictionary and weight dimensions differ".into()));
    }
    Ok(weights.w.slice(ndarray::s![y, r, ..]).dot(&v))
}

/// All correlations, shape `(k, m, 2k)` with last index `2s + view`.
pub fn correlation_table(weights: &Weights, dict: &FeatureDictionary) -> Array3<f64> {
    let c = weights.as_matrix().dot(&dict.vectors.t());
    c.into_shape_with_order((weights.k(), weights.m(), 2 * dict.k))
        .expect("contiguous product")
}
