//! Feature and alignment statistics of the initialization.

use mixview::config::ExperimentConfig;
use mixview::experiment::run_diagnose;

fn main() -> mixview::Result<()> {
    let report = run_diagnose(&ExperimentConfig::tiny(), None)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    Ok(())
}
