//! Train Midpoint Mixup on the tiny preset and print the trajectory.

use mixview::config::ExperimentConfig;
use mixview::experiment::{build_problem, run_arm};
use mixview::Objective;

fn main() -> mixview::Result<()> {
    let cfg = ExperimentConfig::tiny();
    let p = build_problem(&cfg)?;
    let arm = run_arm(&cfg, &p, &Objective::MidpointMixup)?;
    for r in &arm.outcome.records {
        println!("{}", serde_json::to_string(r).expect("serializable"));
    }
    println!("{}", serde_json::to_string_pretty(&arm.report).expect("serializable"));
    Ok(())
}
