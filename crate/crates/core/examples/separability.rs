//! Separability of a clean instance and of the degenerate instance.

use mixview::config::ExperimentConfig;
use mixview::experiment::run_separability;

fn main() -> mixview::Result<()> {
    let report = run_separability(&ExperimentConfig::desk())?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    Ok(())
}
