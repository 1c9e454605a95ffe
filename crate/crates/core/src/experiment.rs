//! Seeded experiment runners and their on-disk artifacts.
//!
//! Every runner derives its randomness from the config seed through the named
//! streams of [`crate::rng`], so adding a diagnostic never shifts the data,
//! the initialization or the training randomness. Writers emit JSON and CSV
//! with shortest round-trip floats and no timestamps, and finish with a
//! `manifest.json` listing each file with its SHA-256.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::data::{
    construct_degenerate_instance, dirichlet_ones, inject_spurious_features, sample_dataset, sample_simple_dataset,
    without_feature_noise, DataPoint, FeatureDictionary, SimplePoint, VectorDataset,
};
use crate::diagnostics::{
    alignment_gap, feature_learning_report, finite_difference_check, probe_series, separability_probe,
    symmetry_check, verify_assumption_monotone, AlignmentGap, FeatureLearningReport, GradCheckReport,
    MonotonicityReport, ProbeResult, SeparabilityOutcome, SymmetryReport,
};
use crate::losses::Objective;
use crate::network::{init_weights, Weights};
use crate::rng::{stream_rng, Stream};
use crate::trainer::{train, trajectory_csv, TrainOutcome, TrajectoryRecord};
use crate::{CoefficientLaw, Result};

/// Dictionary, training set and initial weights shared by every arm of a run.
#[derive(Clone, Debug)]
pub struct Problem {
    pub dict: FeatureDictionary,
    pub data: Vec<DataPoint>,
    pub init: Weights,
}

pub fn build_problem(cfg: &ExperimentConfig) -> Result<Problem> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Data);
    let dict = FeatureDictionary::build(cfg.data.k, cfg.data.d, &mut rng)?;
    let data = sample_dataset(&cfg.data, &dict, cfg.n, &mut rng)?;
    let init = init_weights(&cfg.network, &mut stream_rng(cfg.seed, Stream::Init))?;
    Ok(Problem { dict, data, init })
}

/// One trained arm with its feature-learning report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArmResult {
    pub objective: Objective,
    pub outcome: TrainOutcome,
    pub report: FeatureLearningReport,
}

impl ArmResult {
    pub fn final_record(&self) -> &TrajectoryRecord {
        self.outcome.records.last().expect("trainer always records t = T")
    }

    pub fn summary(&self) -> ArmSummary {
        let first = &self.outcome.records[0];
        let last = self.final_record();
        let mut deltas = last.metrics.delta.clone();
        deltas.sort_by(f64::total_cmp);
        ArmSummary {
            objective: self.objective.name().to_string(),
            initial_loss: first.loss,
            final_loss: last.loss,
            final_train_acc: last.metrics.train_acc,
            feature_counts: self.report.counts,
            both_features: self.report.both_learned(),
            final_delta_min: deltas.first().copied().unwrap_or(0.0),
            final_delta_median: median(&deltas),
            final_delta_max: deltas.last().copied().unwrap_or(0.0),
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub objective: String,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_train_acc: f64,
    pub feature_counts: [usize; 3],
    pub both_features: usize,
    pub final_delta_min: f64,
    pub final_delta_median: f64,
    pub final_delta_max: f64,
}

/// Trains `objective` on `problem` and reports which features were learned.
pub fn run_arm(cfg: &ExperimentConfig, problem: &Problem, objective: &Objective) -> Result<ArmResult> {
    let tc = cfg.train_config(objective);
    let outcome = train(&problem.init, &cfg.network, &problem.data, &problem.dict, &tc, cfg.data.delta1)?;
    let report = feature_learning_report(
        &outcome.weights,
        &cfg.network,
        &problem.dict,
        &cfg.data,
        cfg.diagnostics.samples,
        cfg.diagnostics.theta,
        &mut stream_rng(cfg.seed, Stream::Diag),
    )?;
    Ok(ArmResult {
        objective: objective.clone(),
        outcome,
        report,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub seed: u64,
    pub erm: ArmSummary,
    pub midpoint_mixup: ArmSummary,
    /// Both-features count of Midpoint Mixup minus that of ERM.
    pub both_features_advantage: i64,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub erm: ArmResult,
    pub midpoint_mixup: ArmResult,
    pub summary: CompareSummary,
}

/// ERM and Midpoint Mixup from the same data and the same initialization.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<Comparison> {
    let problem = build_problem(cfg)?;
    let erm = run_arm(cfg, &problem, &Objective::Erm)?;
    let midpoint_mixup = run_arm(cfg, &problem, &Objective::MidpointMixup)?;
    let summary = CompareSummary {
        seed: cfg.seed,
        erm: erm.summary(),
        midpoint_mixup: midpoint_mixup.summary(),
        both_features_advantage: midpoint_mixup.report.both_learned() as i64 - erm.report.both_learned() as i64,
    };
    Ok(Comparison {
        erm,
        midpoint_mixup,
        summary,
    })
}

/// Gradient checks of both training objectives on the config's instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckSummary {
    pub erm: GradCheckReport,
    pub midpoint_mixup: GradCheckReport,
    pub max_rel_error: f64,
}

pub fn run_gradcheck(cfg: &ExperimentConfig) -> Result<GradCheckSummary> {
    let problem = build_problem(cfg)?;
    let mut rng = stream_rng(cfg.seed, Stream::Diag);
    let h = cfg.diagnostics.fd_step;
    let erm = finite_difference_check(&problem.init, &cfg.network, &problem.data, &Objective::Erm, h, &mut rng)?;
    let midpoint_mixup = finite_difference_check(
        &problem.init,
        &cfg.network,
        &problem.data,
        &Objective::MidpointMixup,
        h,
        &mut rng,
    )?;
    Ok(GradCheckSummary {
        max_rel_error: erm.max_rel_error.max(midpoint_mixup.max_rel_error),
        erm,
        midpoint_mixup,
    })
}

/// The coefficient laws of the monotonicity study, all on `[1, 2]`.
pub fn assumption_laws() -> [CoefficientLaw; 3] {
    [
        CoefficientLaw::Uniform,
        CoefficientLaw::ShiftedBeta { a: 2.0 },
        CoefficientLaw::ShiftedBeta { a: 3.0 },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssumptionStudy {
    pub reports: Vec<MonotonicityReport>,
    /// Single-coefficient control, where `f(x) = x^(alpha - 1)` exactly.
    pub control: Vec<MonotonicityReport>,
}

pub fn run_verify_assumption(cfg: &ExperimentConfig) -> Result<AssumptionStudy> {
    let dg = &cfg.diagnostics;
    let mut rng = stream_rng(cfg.seed, Stream::Diag);
    let mut reports = Vec::new();
    let mut control = Vec::new();
    for law in assumption_laws() {
        for &alpha in &dg.monotone_alphas {
            reports.push(verify_assumption_monotone(
                law,
                (1.0, 2.0),
                dg.monotone_c_p,
                alpha,
                dg.monotone_samples,
                dg.monotone_bins,
                &mut rng,
            )?);
            control.push(verify_assumption_monotone(
                law,
                (1.0, 2.0),
                1,
                alpha,
                dg.monotone_samples,
                dg.monotone_bins,
                &mut rng,
            )?);
        }
    }
    Ok(AssumptionStudy { reports, control })
}

/// Alignment gap before and after Midpoint Mixup training on simple data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRun {
    pub initial: AlignmentGap,
    pub final_gap: AlignmentGap,
    pub ratio: f64,
}

/// Trains the config's network with Midpoint Mixup on the simple two-view data.
pub fn run_alignment(cfg: &ExperimentConfig) -> Result<AlignmentRun> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Data);
    let dict = FeatureDictionary::build(cfg.data.k, cfg.data.d, &mut rng)?;
    let data: Vec<SimplePoint> = sample_simple_dataset(cfg.data.k, cfg.data.d, cfg.n, &dict, &mut rng)?;
    let init = init_weights(&cfg.network, &mut stream_rng(cfg.seed, Stream::Init))?;
    let tc = cfg.train_config(&Objective::MidpointMixup);
    let outcome = train(&init, &cfg.network, &data, &dict, &tc, cfg.data.delta1)?;
    let initial = alignment_gap(&init, &cfg.network, &data)?;
    let final_gap = alignment_gap(&outcome.weights, &cfg.network, &data)?;
    Ok(AlignmentRun {
        ratio: final_gap.mean / initial.mean,
        initial,
        final_gap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmupStudy {
    /// Midpoint Mixup at `C = 1` over `probe_ks`.
    pub midpoint_mixup: ProbeResult,
    /// ERM at `k = probe_k` over `probe_cs`.
    pub erm: ProbeResult,
    /// Midpoint Mixup at `k = probe_k`, `C = 1`, for comparison with the ERM series.
    pub midpoint_mixup_reference: ProbeResult,
    pub symmetry: SymmetryReport,
    pub alignment: AlignmentRun,
}

/// Repetitions of the zero-gap symmetry check.
pub const SYMMETRY_REPS: usize = 20;

pub fn run_warmup_probe(cfg: &ExperimentConfig) -> Result<WarmupStudy> {
    let dg = &cfg.diagnostics;
    let mut rng = stream_rng(cfg.seed, Stream::Diag);
    let mm_settings: Vec<(usize, f64)> = dg.probe_ks.iter().map(|&k| (k, 1.0)).collect();
    let midpoint_mixup = probe_series(&mm_settings, dg.probe_n_per_class, &Objective::MidpointMixup, &mut rng)?;
    let erm_settings: Vec<(usize, f64)> = dg.probe_cs.iter().map(|&c| (dg.probe_k, c)).collect();
    let erm = probe_series(&erm_settings, dg.probe_n_per_class, &Objective::Erm, &mut rng)?;
    let midpoint_mixup_reference =
        probe_series(&[(dg.probe_k, 1.0)], dg.probe_n_per_class, &Objective::MidpointMixup, &mut rng)?;
    let symmetry = symmetry_check(dg.probe_k, dg.probe_n_per_class * dg.probe_k, SYMMETRY_REPS, &mut rng)?;
    let alignment = run_alignment(&ExperimentConfig {
        network: crate::NetworkConfig {
            activation: crate::Activation::Linear,
            ..cfg.network.clone()
        },
        ..cfg.clone()
    })?;
    Ok(WarmupStudy {
        midpoint_mixup,
        erm,
        midpoint_mixup_reference,
        symmetry,
        alignment,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionReport {
    pub l: usize,
    pub n: usize,
    /// Mean of each Dirichlet component over the dataset.
    pub coefficient_means: Vec<f64>,
    /// Largest `|sum_l beta_l - 1|`.
    pub max_simplex_error: f64,
    pub min_coefficient: f64,
    pub dataset: VectorDataset,
}

/// Injects `injection_l - 1` spurious features per class into the patch sums
/// of the config's training set.
pub fn run_inject(cfg: &ExperimentConfig) -> Result<InjectionReport> {
    let problem = build_problem(cfg)?;
    let ds = VectorDataset::from_patch_sums(&problem.data)?;
    let l = cfg.diagnostics.injection_l;
    let inj = inject_spurious_features(&ds, l, &mut stream_rng(cfg.seed, Stream::Diag))?;
    let n = inj.coefficients.len();
    let mut coefficient_means = vec![0.0; l];
    let mut max_simplex_error: f64 = 0.0;
    let mut min_coefficient = f64::INFINITY;
    for c in &inj.coefficients {
        for (m, v) in coefficient_means.iter_mut().zip(c) {
            *m += v / n as f64;
            min_coefficient = min_coefficient.min(*v);
        }
        max_simplex_error = max_simplex_error.max((c.iter().sum::<f64>() - 1.0).abs());
    }
    Ok(InjectionReport {
        l,
        n,
        coefficient_means,
        max_simplex_error,
        min_coefficient,
        dataset: inj.dataset,
    })
}

/// Mean and standard deviation of each component over `draws` Dirichlet(1, ..., 1) samples.
pub fn dirichlet_moments(l: usize, draws: usize, rng: &mut crate::rng::Rng) -> (Vec<f64>, Vec<f64>) {
    let mut sum = vec![0.0; l];
    let mut sq = vec![0.0; l];
    for _ in 0..draws {
        for (j, v) in dirichlet_ones(l, rng).into_iter().enumerate() {
            sum[j] += v;
            sq[j] += v * v;
        }
    }
    let n = draws as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let sd = sq.iter().zip(&mean).map(|(q, m)| (q / n - m * m).max(0.0).sqrt()).collect();
    (mean, sd)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityReport {
    pub clean: SeparabilityOutcome,
    pub degenerate: SeparabilityOutcome,
}

/// Patch sums of a noise-free instance and of the degenerate instance, both of
/// `separability_n` points over one dictionary.
pub fn separability_instances(cfg: &ExperimentConfig) -> Result<(VectorDataset, VectorDataset)> {
    cfg.validate()?;
    let n = cfg.diagnostics.separability_n;
    let mut rng = stream_rng(cfg.seed, Stream::Data);
    let dict = FeatureDictionary::build(cfg.data.k, cfg.data.d, &mut rng)?;
    let clean: Vec<DataPoint> = sample_dataset(&cfg.data, &dict, n, &mut rng)?
        .iter()
        .map(without_feature_noise)
        .collect();
    let degenerate = construct_degenerate_instance(&cfg.data, &dict, n, &mut rng)?;
    Ok((VectorDataset::from_patch_sums(&clean)?, VectorDataset::from_patch_sums(&degenerate)?))
}

/// Separability probe on a noise-free instance and on the degenerate instance.
pub fn run_separability(cfg: &ExperimentConfig) -> Result<SeparabilityReport> {
    let dg = &cfg.diagnostics;
    let (clean, degenerate) = separability_instances(cfg)?;
    Ok(SeparabilityReport {
        clean: separability_probe(&clean, dg.separability_budget, dg.separability_margin)?,
        degenerate: separability_probe(&degenerate, dg.separability_budget, dg.separability_margin)?,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub features: FeatureLearningReport,
    pub metrics: TrajectoryRecord,
    pub alignment: AlignmentGap,
}

/// Feature, correlation and alignment statistics of `weights` (the seed's
/// initialization when `None`) on the config's training set.
pub fn run_diagnose(cfg: &ExperimentConfig, weights: Option<Weights>) -> Result<DiagnoseReport> {
    let problem = build_problem(cfg)?;
    let w = weights.unwrap_or_else(|| problem.init.clone());
    w.check_shape(&cfg.network)?;
    let tau = cfg.train_config(&cfg.train.objective).b_threshold_mult;
    let metrics = crate::trainer::compute_metrics(&w, &cfg.network, &problem.data, &problem.dict, tau, cfg.data.delta1)?;
    let mut rng = stream_rng(cfg.seed, Stream::Diag);
    let loss = crate::losses::LossEngine::new(&cfg.network, &problem.data)?.loss(&w, &cfg.train.objective, &mut rng)?;
    Ok(DiagnoseReport {
        features: feature_learning_report(
            &w,
            &cfg.network,
            &problem.dict,
            &cfg.data,
            cfg.diagnostics.samples,
            cfg.diagnostics.theta,
            &mut stream_rng(cfg.seed, Stream::Diag),
        )?,
        metrics: TrajectoryRecord { t: 0, loss, metrics },
        alignment: alignment_gap(&w, &cfg.network, &problem.data)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    /// Resolved config; the output directory is left out so that runs are
    /// comparable across destinations.
    pub config: ExperimentConfig,
    pub files: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Files written by `compare`, besides the manifest.
pub const COMPARE_FILES: [&str; 5] = [
    "trajectory_erm.csv",
    "trajectory_midpoint_mixup.csv",
    "report_erm.json",
    "report_midpoint_mixup.json",
    "summary.json",
];

/// An output directory that hashes everything written to it.
pub struct ArtifactWriter {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

impl ArtifactWriter {
    pub fn create(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root)?;
        Ok(ArtifactWriter {
            root,
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.root.join(name), bytes)?;
        self.entries.push(ManifestEntry {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write_bytes(name, to_json(value)?.as_bytes())
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish(self, command: &str, cfg: &ExperimentConfig) -> Result<Manifest> {
        let manifest = Manifest {
            command: command.to_string(),
            seed: cfg.seed,
            config: ExperimentConfig { out: None, ..cfg.clone() },
            files: self.entries,
        };
        fs::write(self.root.join(MANIFEST_FILE), to_json(&manifest)?)?;
        Ok(manifest)
    }
}

#[derive(Serialize)]
struct ArmReportFile<'a> {
    objective: &'a Objective,
    features: &'a FeatureLearningReport,
    final_record: &'a TrajectoryRecord,
    signal_moments: &'a [[f64; 2]],
}

fn write_arm(w: &mut ArtifactWriter, cfg: &ExperimentConfig, arm: &ArmResult) -> Result<()> {
    let name = arm.objective.name();
    w.write_bytes(
        &format!("trajectory_{name}.csv"),
        trajectory_csv(&arm.outcome.records, cfg.data.k).as_bytes(),
    )?;
    w.write_json(
        &format!("report_{name}.json"),
        &ArmReportFile {
            objective: &arm.objective,
            features: &arm.report,
            final_record: arm.final_record(),
            signal_moments: &arm.outcome.signal_moments,
        },
    )
}

/// Runs `compare` and writes its artifacts under `out`.
pub fn write_compare(cfg: &ExperimentConfig, out: &Path) -> Result<(Comparison, Manifest)> {
    let cmp = run_compare(cfg)?;
    let mut w = ArtifactWriter::create(out)?;
    write_arm(&mut w, cfg, &cmp.erm)?;
    write_arm(&mut w, cfg, &cmp.midpoint_mixup)?;
    w.write_json("summary.json", &cmp.summary)?;
    let manifest = w.finish("compare", cfg)?;
    Ok((cmp, manifest))
}

/// Runs `train` with the config's objective and writes its artifacts under `out`.
pub fn write_train(cfg: &ExperimentConfig, out: &Path) -> Result<(ArmResult, Manifest)> {
    let problem = build_problem(cfg)?;
    let arm = run_arm(cfg, &problem, &cfg.train.objective)?;
    let mut w = ArtifactWriter::create(out)?;
    write_arm(&mut w, cfg, &arm)?;
    w.write_json("weights.json", &arm.outcome.weights)?;
    let manifest = w.finish("train", cfg)?;
    Ok((arm, manifest))
}

#[derive(Serialize)]
struct DatasetFile<'a> {
    dictionary: &'a FeatureDictionary,
    points: &'a [DataPoint],
}

pub fn write_gen_data(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    let problem = build_problem(cfg)?;
    let mut w = ArtifactWriter::create(out)?;
    w.write_json(
        "dataset.json",
        &DatasetFile {
            dictionary: &problem.dict,
            points: &problem.data,
        },
    )?;
    w.finish("gen-data", cfg)
}

/// Writes a single JSON report plus the manifest.
pub fn write_report<T: Serialize>(cfg: &ExperimentConfig, out: &Path, command: &str, file: &str, value: &T) -> Result<Manifest> {
    let mut w = ArtifactWriter::create(out)?;
    w.write_json(file, value)?;
    w.finish(command, cfg)
}

/// Reads weights written by `train`.
pub fn read_weights(path: &Path) -> Result<Weights> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}
