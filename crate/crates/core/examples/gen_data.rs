//! Sample the tiny preset's dictionary and training set and summarize it.

use mixview::config::ExperimentConfig;
use mixview::experiment::build_problem;

fn main() -> mixview::Result<()> {
    let cfg = ExperimentConfig::tiny();
    let p = build_problem(&cfg)?;
    println!("k = {}, d = {}, P = {}, n = {}", cfg.data.k, cfg.data.d, cfg.data.p, p.data.len());
    for (i, point) in p.data.iter().enumerate() {
        println!("point {i}: label {}", point.label);
    }
    Ok(())
}
