//! Line-based experiment configuration.
//!
//! One `section.key = value` setting per line; `#` starts a comment. Keys not
//! mentioned keep the value of the chosen preset (`desk` unless `run.preset`
//! names another). Syntax errors stop parsing at the offending line; semantic
//! problems are collected and reported together.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{CoefficientLaw, DataConfig};
use crate::losses::{Objective, PairMode};
use crate::network::{Activation, NetworkConfig};
use crate::trainer::{default_log_every, TrainConfig};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub eta: f64,
    pub iters: usize,
    /// `None` means `max(1, iters / 200)`.
    pub log_every: Option<usize>,
    /// Objective of the single-arm `train` command.
    pub objective: Objective,
    pub pairs: PairMode,
    /// B-set multiplier; `None` picks 1 for ERM and 2 for Mixup objectives.
    pub tau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsConfig {
    /// Fresh samples per feature-learned test.
    pub samples: usize,
    pub theta: f64,
    /// Class counts for the Midpoint Mixup probe series.
    pub probe_ks: Vec<usize>,
    /// Gap multipliers for the ERM probe series.
    pub probe_cs: Vec<f64>,
    /// Class count for the ERM probe series.
    pub probe_k: usize,
    pub probe_n_per_class: usize,
    pub fd_step: f64,
    pub monotone_samples: usize,
    pub monotone_bins: usize,
    pub monotone_c_p: usize,
    pub monotone_alphas: Vec<u32>,
    pub separability_n: usize,
    pub separability_budget: usize,
    pub separability_margin: f64,
    pub injection_l: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        DiagnosticsConfig {
            samples: 100,
            theta: 0.95,
            probe_ks: vec![8, 16, 32, 64],
            probe_cs: vec![1.0, 2.0, 4.0, 8.0],
            probe_k: 16,
            probe_n_per_class: 20,
            fd_step: 1e-5,
            monotone_samples: 5000,
            monotone_bins: 20,
            monotone_c_p: 10,
            monotone_alphas: vec![4, 8, 12],
            separability_n: 200,
            separability_budget: 1_000_000,
            separability_margin: 1.0,
            injection_l: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: String,
    pub data: DataConfig,
    /// Training set size.
    pub n: usize,
    pub network: NetworkConfig,
    pub train: TrainSection,
    pub diagnostics: DiagnosticsConfig,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

pub const PRESETS: [&str; 3] = ["desk", "tiny", "warmup"];

impl ExperimentConfig {
    /// The frozen desk-scale preset.
    pub fn desk() -> Self {
        ExperimentConfig {
            preset: "desk".into(),
            data: DataConfig::default(),
            n: 60,
            network: NetworkConfig::default(),
            train: TrainSection {
                eta: 50.0,
                iters: 1500,
                log_every: None,
                objective: Objective::MidpointMixup,
                pairs: PairMode::Exact,
                tau: None,
            },
            diagnostics: DiagnosticsConfig::default(),
            out: None,
            seed: 0,
        }
    }

    /// Small instance for gradient checks and smoke runs.
    pub fn tiny() -> Self {
        let data = DataConfig {
            k: 3,
            d: 16,
            p: 4,
            c_p: 1,
            q: 1,
            ..DataConfig::default()
        };
        ExperimentConfig {
            preset: "tiny".into(),
            network: NetworkConfig {
                k: 3,
                m: 2,
                d: 16,
                rho: 0.3,
                alpha: 4,
                activation: Activation::SmoothedRelu,
            },
            data,
            n: 6,
            train: TrainSection {
                eta: 1.0,
                iters: 50,
                log_every: None,
                objective: Objective::MidpointMixup,
                pairs: PairMode::Exact,
                tau: None,
            },
            diagnostics: DiagnosticsConfig {
                separability_n: 30,
                ..DiagnosticsConfig::default()
            },
            out: None,
            seed: 0,
        }
    }

    /// Linear model on the simple two-view data.
    pub fn warmup() -> Self {
        let mut cfg = Self::tiny();
        cfg.preset = "warmup".into();
        cfg.n = 60;
        cfg.network.m = 1;
        cfg.network.activation = Activation::Linear;
        cfg.train.eta = 1.0;
        cfg.train.iters = 1000;
        cfg
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "tiny" => Ok(Self::tiny()),
            "warmup" => Ok(Self::warmup()),
            other => Err(Error::InvalidConfig(vec![format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            )])),
        }
    }

    /// Trainer settings for `objective` under this config.
    pub fn train_config(&self, objective: &Objective) -> TrainConfig {
        let mut tc = TrainConfig::new(objective.clone(), self.train.eta, self.train.iters);
        tc.log_every = self.train.log_every.unwrap_or_else(|| default_log_every(self.train.iters));
        if let Some(tau) = self.train.tau {
            tc.b_threshold_mult = tau;
        }
        tc.seed = self.seed;
        tc.pairs = self.train.pairs;
        tc
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.data.violations();
        v.extend(self.network.violations());
        if self.network.k != self.data.k {
            v.push(format!("network.k = {} but data.k = {}", self.network.k, self.data.k));
        }
        if self.network.d != self.data.d {
            v.push(format!("network.d = {} but data.d = {}", self.network.d, self.data.d));
        }
        if self.n == 0 {
            v.push("data.n must be at least 1".into());
        }
        let t = &self.train;
        if !(t.eta >= 0.0 && t.eta.is_finite()) {
            v.push(format!("train.eta must be nonnegative, got {}", t.eta));
        }
        if t.log_every == Some(0) {
            v.push("train.log_every must be at least 1".into());
        }
        if let Some(tau) = t.tau {
            if !(tau > 0.0) {
                v.push(format!("train.tau must be positive, got {tau}"));
            }
        }
        let dg = &self.diagnostics;
        if dg.samples == 0 {
            v.push("diagnostics.samples must be at least 1".into());
        }
        if !(dg.theta > 0.0 && dg.theta <= 1.0) {
            v.push(format!("diagnostics.theta must lie in (0, 1], got {}", dg.theta));
        }
        if !(dg.fd_step > 0.0) {
            v.push(format!("diagnostics.fd_step must be positive, got {}", dg.fd_step));
        }
        if dg.monotone_bins == 0 || dg.monotone_samples < 20 * dg.monotone_bins {
            v.push("diagnostics.monotone_samples must be at least 20 per bin".into());
        }
        if dg.probe_ks.iter().chain([&dg.probe_k]).any(|&k| k < 2) {
            v.push("probe class counts must be at least 2".into());
        }
        if dg.injection_l == 0 {
            v.push("diagnostics.injection_l must be at least 1".into());
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

    /// The config in its line format; parsing the output gives back `self`.
    pub fn render(&self) -> String {
        fn list<T: ToString>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        }
        let d = &self.data;
        let n = &self.network;
        let t = &self.train;
        let g = &self.diagnostics;
        let mut lines = vec![
            format!("run.preset = {}", self.preset),
            format!("run.seed = {}", self.seed),
        ];
        if let Some(out) = &self.out {
            lines.push(format!("run.out = {}", out.display()));
        }
        lines.extend([
            format!("data.k = {}", d.k),
            format!("data.d = {}", d.d),
            format!("data.p = {}", d.p),
            format!("data.c_p = {}", d.c_p),
            format!("data.q = {}", d.q),
            format!("data.delta1 = {}", d.delta1),
            format!("data.delta2 = {}", d.delta2),
            format!("data.delta3 = {}", d.delta3),
            format!("data.delta4 = {}", d.delta4),
            format!("data.beta_law = {}", d.beta_law),
            format!("data.n = {}", self.n),
            format!("network.k = {}", n.k),
            format!("network.d = {}", n.d),
            format!("network.m = {}", n.m),
            format!("network.rho = {}", n.rho),
            format!("network.alpha = {}", n.alpha),
            format!("network.activation = {}", n.activation),
            format!("train.eta = {}", t.eta),
            format!("train.iters = {}", t.iters),
        ]);
        if let Some(le) = t.log_every {
            lines.push(format!("train.log_every = {le}"));
        }
        lines.push(format!("train.objective = {}", t.objective));
        lines.push(format!("train.pairs = {}", t.pairs));
        if let Some(tau) = t.tau {
            lines.push(format!("train.tau = {tau}"));
        }
        lines.extend([
            format!("diagnostics.samples = {}", g.samples),
            format!("diagnostics.theta = {}", g.theta),
            format!("diagnostics.probe_ks = {}", list(&g.probe_ks)),
            format!("diagnostics.probe_cs = {}", list(&g.probe_cs)),
            format!("diagnostics.probe_k = {}", g.probe_k),
            format!("diagnostics.probe_n_per_class = {}", g.probe_n_per_class),
            format!("diagnostics.fd_step = {}", g.fd_step),
            format!("diagnostics.monotone_samples = {}", g.monotone_samples),
            format!("diagnostics.monotone_bins = {}", g.monotone_bins),
            format!("diagnostics.monotone_c_p = {}", g.monotone_c_p),
            format!("diagnostics.monotone_alphas = {}", list(&g.monotone_alphas)),
            format!("diagnostics.separability_n = {}", g.separability_n),
            format!("diagnostics.separability_budget = {}", g.separability_budget),
            format!("diagnostics.separability_margin = {}", g.separability_margin),
            format!("diagnostics.injection_l = {}", g.injection_l),
        ]);
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

struct Line<'a> {
    number: usize,
    key: &'a str,
    value: &'a str,
}

fn split_lines(text: &str) -> Result<Vec<Line<'_>>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line: number,
            message: format!("expected `section.key = value`, got `{content}`"),
        })?;
        let key = key.trim();
        let value = value.trim();
        if !key.contains('.') {
            return Err(Error::ConfigSyntax {
                line: number,
                message: format!("key `{key}` lacks a section"),
            });
        }
        if value.is_empty() {
            return Err(Error::ConfigSyntax {
                line: number,
                message: format!("empty value for `{key}`"),
            });
        }
        out.push(Line { number, key, value });
    }
    Ok(out)
}

fn value<T: FromStr>(line: &Line) -> Result<T> {
    line.value.parse().map_err(|_| Error::ConfigSyntax {
        line: line.number,
        message: format!("cannot parse `{}` for `{}`", line.value, line.key),
    })
}

fn text_value<T: FromStr<Err = String>>(line: &Line) -> Result<T> {
    line.value.parse().map_err(|e: String| Error::ConfigSyntax {
        line: line.number,
        message: e,
    })
}

fn list_value<T: FromStr>(line: &Line) -> Result<Vec<T>> {
    line.value
        .split(',')
        .map(|item| {
            item.trim().parse().map_err(|_| Error::ConfigSyntax {
                line: line.number,
                message: format!("cannot parse list item `{}` for `{}`", item.trim(), line.key),
            })
        })
        .collect()
}

/// Parses `text` on top of the desk preset (or the preset named by `run.preset`).
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with_preset(text, None)
}

/// Like [`parse_config`]; a `run.preset` line in `text` takes precedence over `preset`.
pub fn parse_config_with_preset(text: &str, preset: Option<&str>) -> Result<ExperimentConfig> {
    let lines = split_lines(text)?;
    let mut base = preset.unwrap_or("desk").to_string();
    if let Some(l) = lines.iter().rev().find(|l| l.key == "run.preset") {
        base = l.value.to_string();
    }
    let mut cfg = ExperimentConfig::preset(&base).map_err(|e| match e {
        Error::InvalidConfig(v) => Error::ConfigSyntax {
            line: lines.iter().find(|l| l.key == "run.preset").map_or(0, |l| l.number),
            message: v.join("; "),
        },
        other => other,
    })?;
    let mut net_k = None;
    let mut net_d = None;
    for line in &lines {
        let c = &mut cfg;
        match line.key {
            "run.preset" => {}
            "run.seed" => c.seed = value(line)?,
            "run.out" => c.out = Some(PathBuf::from(line.value)),
            "data.k" => c.data.k = value(line)?,
            "data.d" => c.data.d = value(line)?,
            "data.p" => c.data.p = value(line)?,
            "data.c_p" => c.data.c_p = value(line)?,
            "data.q" => c.data.q = value(line)?,
            "data.delta1" => c.data.delta1 = value(line)?,
            "data.delta2" => c.data.delta2 = value(line)?,
            "data.delta3" => c.data.delta3 = value(line)?,
            "data.delta4" => c.data.delta4 = value(line)?,
            "data.beta_law" => c.data.beta_law = text_value::<CoefficientLaw>(line)?,
            "data.n" => c.n = value(line)?,
            "network.k" => net_k = Some(value(line)?),
            "network.d" => net_d = Some(value(line)?),
            "network.m" => c.network.m = value(line)?,
            "network.rho" => c.network.rho = value(line)?,
            "network.alpha" => c.network.alpha = value(line)?,
            "network.activation" => c.network.activation = text_value::<Activation>(line)?,
            "train.eta" => c.train.eta = value(line)?,
            "train.iters" => c.train.iters = value(line)?,
            "train.log_every" => c.train.log_every = Some(value(line)?),
            "train.objective" => c.train.objective = text_value::<Objective>(line)?,
            "train.pairs" => c.train.pairs = text_value::<PairMode>(line)?,
            "train.tau" => c.train.tau = Some(value(line)?),
            "diagnostics.samples" => c.diagnostics.samples = value(line)?,
            "diagnostics.theta" => c.diagnostics.theta = value(line)?,
            "diagnostics.probe_ks" => c.diagnostics.probe_ks = list_value(line)?,
            "diagnostics.probe_cs" => c.diagnostics.probe_cs = list_value(line)?,
            "diagnostics.probe_k" => c.diagnostics.probe_k = value(line)?,
            "diagnostics.probe_n_per_class" => c.diagnostics.probe_n_per_class = value(line)?,
            "diagnostics.fd_step" => c.diagnostics.fd_step = value(line)?,
            "diagnostics.monotone_samples" => c.diagnostics.monotone_samples = value(line)?,
            "diagnostics.monotone_bins" => c.diagnostics.monotone_bins = value(line)?,
            "diagnostics.monotone_c_p" => c.diagnostics.monotone_c_p = value(line)?,
            "diagnostics.monotone_alphas" => c.diagnostics.monotone_alphas = list_value(line)?,
            "diagnostics.separability_n" => c.diagnostics.separability_n = value(line)?,
            "diagnostics.separability_budget" => c.diagnostics.separability_budget = value(line)?,
            "diagnostics.separability_margin" => c.diagnostics.separability_margin = value(line)?,
            "diagnostics.injection_l" => c.diagnostics.injection_l = value(line)?,
            other => {
                return Err(Error::ConfigSyntax {
                    line: line.number,
                    message: format!("unknown key `{other}`"),
                })
            }
        }
    }
    cfg.network.k = net_k.unwrap_or(cfg.data.k);
    cfg.network.d = net_d.unwrap_or(cfg.data.d);
    cfg.validate()?;
    Ok(cfg)
}
