use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixview::config::{parse_config_with_preset, ExperimentConfig};
use mixview::experiment::{
    read_weights, run_diagnose, run_gradcheck, run_inject, run_separability, run_verify_assumption,
    run_warmup_probe, write_compare, write_gen_data, write_report, write_train,
};
use mixview::{Error, Objective, PairMode};
use serde_json::json;

#[derive(Parser)]
#[command(name = "mixview", version, about = "ERM versus Midpoint Mixup on synthetic multi-view data")]
struct Cli {
    /// Config file in `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed; overrides the config.
    #[arg(long, global = true, env = "MIXVIEW_SEED")]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base preset: desk, tiny or warmup.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Midpoint Mixup pair evaluation: exact or sample:<S>.
    #[arg(long, global = true)]
    pairs: Option<PairMode>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the feature dictionary and training set.
    GenData,
    /// Train one objective.
    Train {
        /// Overrides train.objective.
        #[arg(long)]
        objective: Option<Objective>,
    },
    /// Train ERM and Midpoint Mixup from the same start and compare.
    Compare,
    /// Feature, correlation and alignment statistics of a set of weights.
    Diagnose {
        /// Weights JSON written by `train`; defaults to the seed's initialization.
        #[arg(long)]
        weights: Option<PathBuf>,
    },
    /// Finite-difference check of both objectives' gradients.
    Gradcheck,
    /// Monotonicity study of the signal-coefficient assumption.
    VerifyAssumption,
    /// Linear gradient probes, the zero-gap symmetry check and alignment dynamics.
    WarmupProbe,
    /// Dirichlet spurious-feature injection into the training set.
    Inject,
    /// Linear separability of a clean and of the degenerate instance.
    Separability,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Train { .. } => "train",
            Command::Compare => "compare",
            Command::Diagnose { .. } => "diagnose",
            Command::Gradcheck => "gradcheck",
            Command::VerifyAssumption => "verify-assumption",
            Command::WarmupProbe => "warmup-probe",
            Command::Inject => "inject",
            Command::Separability => "separability",
        }
    }
}

fn resolve(cli: &Cli) -> mixview::Result<ExperimentConfig> {
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path)?,
        None => String::new(),
    };
    let mut cfg = parse_config_with_preset(&text, cli.preset.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Some(pairs) = cli.pairs {
        cfg.train.pairs = pairs;
    }
    if let Command::Train { objective: Some(o) } = &cli.command {
        cfg.train.objective = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> mixview::Result<serde_json::Value> {
    let cfg = resolve(cli)?;
    let command = cli.command.name();
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("mixview-out").join(command));
    let summary = match &cli.command {
        Command::GenData => {
            write_gen_data(&cfg, &out)?;
            json!({ "points": cfg.n })
        }
        Command::Train { .. } => {
            let (arm, _) = write_train(&cfg, &out)?;
            serde_json::to_value(arm.summary())?
        }
        Command::Compare => {
            let (cmp, _) = write_compare(&cfg, &out)?;
            serde_json::to_value(&cmp.summary)?
        }
        Command::Diagnose { weights } => {
            let w = weights.as_deref().map(read_weights).transpose()?;
            let report = run_diagnose(&cfg, w)?;
            write_report(&cfg, &out, command, "diagnose.json", &report)?;
            json!({ "feature_counts": report.features.counts, "alignment_gap_mean": report.alignment.mean })
        }
        Command::Gradcheck => {
            let report = run_gradcheck(&cfg)?;
            write_report(&cfg, &out, command, "gradcheck.json", &report)?;
            json!({ "max_rel_error": report.max_rel_error })
        }
        Command::VerifyAssumption => {
            let study = run_verify_assumption(&cfg)?;
            write_report(&cfg, &out, command, "monotonicity.json", &study)?;
            let min = study.reports.iter().map(|r| r.rank_correlation).fold(f64::INFINITY, f64::min);
            json!({ "min_rank_correlation": min })
        }
        Command::WarmupProbe => {
            let study = run_warmup_probe(&cfg)?;
            write_report(&cfg, &out, command, "warmup_probe.json", &study)?;
            json!({
                "midpoint_mixup_slope": study.midpoint_mixup.slope,
                "symmetry_within_3_sigma": study.symmetry.within_3_sigma,
                "alignment_ratio": study.alignment.ratio,
            })
        }
        Command::Inject => {
            let report = run_inject(&cfg)?;
            write_report(&cfg, &out, command, "injection.json", &report)?;
            json!({ "coefficient_means": report.coefficient_means, "max_simplex_error": report.max_simplex_error })
        }
        Command::Separability => {
            let report = run_separability(&cfg)?;
            write_report(&cfg, &out, command, "separability.json", &report)?;
            json!({
                "clean": status(&report.clean),
                "degenerate": status(&report.degenerate),
            })
        }
    };
    Ok(json!({ "command": command, "out": out, "summary": summary }))
}

fn status(o: &mixview::diagnostics::SeparabilityOutcome) -> &'static str {
    match o {
        mixview::diagnostics::SeparabilityOutcome::Separable { .. } => "SEPARABLE",
        mixview::diagnostics::SeparabilityOutcome::NotSeparatedWithinBudget { .. } => "NOT_SEPARATED_WITHIN_BUDGET",
    }
}

fn error_json(e: &Error) -> serde_json::Value {
    let mut v = json!({ "error": e.kind(), "message": e.to_string() });
    match e {
        Error::InvalidConfig(list) => v["violations"] = json!(list),
        Error::ConfigSyntax { line, .. } => v["line"] = json!(line),
        Error::Diverged { iteration, record, .. } => {
            v["iteration"] = json!(iteration);
            v["record"] = serde_json::to_value(record).unwrap_or_default();
        }
        _ => {}
    }
    v
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::FAILURE
        }
    }
}
