#![allow(dead_code)]

use mixview::config::ExperimentConfig;
use mixview::data::Example;
use mixview::experiment::{build_problem, Problem};
use mixview::losses::{log_softmax, mix, PairTask};
use mixview::network::{forward, output_gradient, NetworkConfig, Weights};
use ndarray::s;

pub fn tiny(seed: u64) -> (ExperimentConfig, Problem) {
    let mut cfg = ExperimentConfig::tiny();
    cfg.seed = seed;
    let problem = build_problem(&cfg).unwrap();
    (cfg, problem)
}

/// Weighted pair objective evaluated point by point through `forward`.
pub fn naive_objective<E: Example>(w: &Weights, net: &NetworkConfig, data: &[E], tasks: &[PairTask]) -> f64 {
    tasks
        .iter()
        .map(|t| {
            let z = mix(&data[t.i], &data[t.j], t.lambda).unwrap();
            let lp = log_softmax(forward(w, net, &z).unwrap().view());
            -t.weight * (t.lambda * lp[data[t.i].label()] + (1.0 - t.lambda) * lp[data[t.j].label()])
        })
        .sum()
}

/// Gradient of [`naive_objective`] assembled from per-output gradients.
pub fn naive_gradient<E: Example>(w: &Weights, net: &NetworkConfig, data: &[E], tasks: &[PairTask]) -> Weights {
    let mut g = Weights::zeros(w.k(), w.m(), w.d());
    for t in tasks {
        let z = mix(&data[t.i], &data[t.j], t.lambda).unwrap();
        let p = log_softmax(forward(w, net, &z).unwrap().view()).mapv(f64::exp);
        for y in 0..w.k() {
            let mut target = 0.0;
            if y == data[t.i].label() {
                target += t.lambda;
            }
            if y == data[t.j].label() {
                target += 1.0 - t.lambda;
            }
            let block = output_gradient(w, net, &z, y).unwrap();
            g.w.slice_mut(s![y, .., ..]).scaled_add(t.weight * (p[y] - target), &block);
        }
    }
    g
}

pub fn max_abs_diff(a: &Weights, b: &Weights) -> f64 {
    a.w.iter().zip(b.w.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn cosine(a: &Weights, b: &Weights) -> f64 {
    let dot: f64 = a.w.iter().zip(b.w.iter()).map(|(x, y)| x * y).sum();
    dot / (a.norm() * b.norm())
}
