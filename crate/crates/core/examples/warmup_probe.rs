//! Linear probes, the symmetry check and alignment dynamics on the warmup preset.

use mixview::config::ExperimentConfig;
use mixview::experiment::run_warmup_probe;

fn main() -> mixview::Result<()> {
    let study = run_warmup_probe(&ExperimentConfig::warmup())?;
    println!("{}", serde_json::to_string_pretty(&study).expect("serializable"));
    Ok(())
}
