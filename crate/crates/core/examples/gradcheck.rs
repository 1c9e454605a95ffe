//! Finite-difference check of both objectives on the tiny preset.

use mixview::config::ExperimentConfig;
use mixview::experiment::run_gradcheck;

fn main() -> mixview::Result<()> {
    let summary = run_gradcheck(&ExperimentConfig::tiny())?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("serializable"));
    Ok(())
}
