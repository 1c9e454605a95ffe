//! ERM versus Midpoint Mixup on the desk preset with a shortened schedule.

use mixview::config::ExperimentConfig;
use mixview::experiment::run_compare;

fn main() -> mixview::Result<()> {
    let mut cfg = ExperimentConfig::desk();
    cfg.train.iters = 300;
    let c = run_compare(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&c.summary).expect("serializable"));
    Ok(())
}
