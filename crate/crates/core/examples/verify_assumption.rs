//! Monotonicity study of the signal-coefficient laws.

use mixview::config::ExperimentConfig;
use mixview::experiment::run_verify_assumption;

fn main() -> mixview::Result<()> {
    let study = run_verify_assumption(&ExperimentConfig::desk())?;
    println!("{}", serde_json::to_string_pretty(&study).expect("serializable"));
    Ok(())
}
