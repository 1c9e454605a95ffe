//! Dirichlet spurious-feature injection into the tiny training set.

use mixview::config::ExperimentConfig;
use mixview::experiment::run_inject;

fn main() -> mixview::Result<()> {
    let report = run_inject(&ExperimentConfig::tiny())?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    Ok(())
}
