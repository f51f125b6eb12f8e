//! Experiment runner: loads a dataset, partitions it at a non-IID level,
//! runs deployments and writes traces, convergence and F1 tables, bound
//! reports and a replayable manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dflsim_core::bounds::{self, BoundInputs, BoundReportEntry};
use dflsim_core::data::{self, ClientDataset, Dataset, LabelColumn, SkewSpec};
use dflsim_core::engine::{self, DeploymentConfig, DeploymentKind, RunResult};
use dflsim_core::metrics::{self, ConvergenceCriterion};
use dflsim_core::models::{self, ModelKind, ModelSpec, ParamVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const SPLIT: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] dflsim_core::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use dflsim_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(
                E::Io { .. }
                | E::Parse { .. }
                | E::Csv(_)
                | E::EmptyDataset(_)
                | E::FractionSum(..)
                | E::InvalidSkew(_)
                | E::DemandExceedsSupply { .. }
                | E::InvalidModel(_)
                | E::InvalidTopology(_)
                | E::InfeasibleBudget { .. }
                | E::InvalidConfig(_)
                | E::InvalidMetricInput(_),
            ) => 2,
            _ => 3,
        }
    }

    fn kind(&self) -> &'static str {
        if self.exit_code() == 2 {
            "config"
        } else {
            "runtime"
        }
    }

    /// `{"error": "config"|"runtime", "message": ...}`
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Svm,
    Logistic,
}

impl ModelChoice {
    pub fn defaults(self) -> ModelSpec {
        match self {
            ModelChoice::Svm => ModelSpec::svm(),
            ModelChoice::Logistic => ModelSpec::logistic(),
        }
    }

    pub fn default_epochs(self) -> usize {
        match self {
            ModelChoice::Svm => 500,
            ModelChoice::Logistic => 1000,
        }
    }

    fn kind(self) -> ModelKind {
        self.defaults().kind
    }
}

/// Experiment settings. Every optional field falls back to a model- or
/// deployment-specific default; a manifest is this struct fully resolved.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    pub label_col: Option<LabelColumn>,
    pub model: Option<ModelChoice>,
    /// A deployment name or `all`.
    pub deployment: Option<String>,
    pub clients: Option<usize>,
    pub epochs: Option<usize>,
    /// Rounds for ring, star and mesh; unset means 2 for ring and 5 for star/mesh.
    pub rounds: Option<usize>,
    /// `iid`, `level1`, `level2`, `level3` or `custom:<path to SkewSpec JSON>`.
    pub skew: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub window: Option<usize>,
    pub flat_tol: Option<f64>,
    pub lr: Option<f64>,
    pub l2: Option<f64>,
    pub batch_size: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overridden_by(self, other: ExperimentConfig) -> Self {
        Self {
            dataset: other.dataset.or(self.dataset),
            label_col: other.label_col.or(self.label_col),
            model: other.model.or(self.model),
            deployment: other.deployment.or(self.deployment),
            clients: other.clients.or(self.clients),
            epochs: other.epochs.or(self.epochs),
            rounds: other.rounds.or(self.rounds),
            skew: other.skew.or(self.skew),
            seed: other.seed.or(self.seed),
            out: other.out.or(self.out),
            window: other.window.or(self.window),
            flat_tol: other.flat_tol.or(self.flat_tol),
            lr: other.lr.or(self.lr),
            l2: other.l2.or(self.l2),
            batch_size: other.batch_size.or(self.batch_size),
        }
    }

    /// Fills every default. `rounds` stays unset when the user left it to the
    /// per-deployment default.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let model = self.model.unwrap_or(ModelChoice::Svm);
        let spec = model.defaults();
        let crit = ConvergenceCriterion::for_model(model.kind());
        let resolved = ExperimentConfig {
            dataset: Some(
                self.dataset
                    .clone()
                    .ok_or_else(|| CliError::Config("--dataset is required".into()))?,
            ),
            label_col: Some(self.label_col.clone().unwrap_or(LabelColumn::Name("diagnosis".into()))),
            model: Some(model),
            deployment: Some(self.deployment.clone().unwrap_or_else(|| "all".into())),
            clients: Some(self.clients.unwrap_or(5)),
            epochs: Some(self.epochs.unwrap_or(model.default_epochs())),
            rounds: self.rounds,
            skew: Some(self.skew.clone().unwrap_or_else(|| "iid".into())),
            seed: Some(self.seed.unwrap_or(0)),
            out: Some(self.out.clone().unwrap_or_else(|| PathBuf::from("out"))),
            window: Some(self.window.unwrap_or(crit.window)),
            flat_tol: Some(self.flat_tol.unwrap_or(crit.flat_tol)),
            lr: Some(self.lr.unwrap_or(spec.learning_rate)),
            l2: Some(self.l2.unwrap_or(spec.l2_strength)),
            batch_size: Some(self.batch_size.unwrap_or(spec.batch_size)),
        };
        resolved.deployments()?;
        resolved.model_spec().validate()?;
        resolved.criterion().validate()?;
        if resolved.clients == Some(0) {
            return Err(CliError::Config("--clients must be at least 1".into()));
        }
        Ok(resolved)
    }

    fn get<T: Clone>(v: &Option<T>) -> T {
        v.clone().expect("config resolved")
    }

    pub fn deployments(&self) -> Result<Vec<DeploymentKind>> {
        match Self::get(&self.deployment).as_str() {
            "all" => Ok(DeploymentKind::ALL.to_vec()),
            name => Ok(vec![name.parse().map_err(|_| {
                CliError::Config(format!(
                    "unknown deployment `{name}`; expected one of the six names or `all`"
                ))
            })?]),
        }
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            l2_strength: Self::get(&self.l2),
            learning_rate: Self::get(&self.lr),
            batch_size: Self::get(&self.batch_size),
            ..Self::get(&self.model).defaults()
        }
    }

    pub fn criterion(&self) -> ConvergenceCriterion {
        ConvergenceCriterion {
            window: Self::get(&self.window),
            flat_tol: Self::get(&self.flat_tol),
        }
    }

    pub fn deployment_config(&self, kind: DeploymentKind) -> DeploymentConfig {
        let mut c = DeploymentConfig::new(
            kind,
            Self::get(&self.clients),
            Self::get(&self.epochs),
            self.model_spec(),
            Self::get(&self.seed),
        );
        if let Some(r) = self.rounds {
            c.n_rounds = r;
        }
        c.convergence = self.criterion();
        c
    }

    pub fn skew_spec(&self) -> Result<SkewSpec> {
        let skew = Self::get(&self.skew);
        let n = Self::get(&self.clients);
        if let Some(path) = skew.strip_prefix("custom:") {
            let text =
                fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read skew spec {path}: {e}")))?;
            let spec: SkewSpec =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("bad skew spec {path}: {e}")))?;
            spec.validate(n)?;
            Ok(spec)
        } else {
            Ok(SkewSpec::named(&skew, n)?)
        }
    }
}

/// Loaded, split and partitioned data for one experiment.
pub struct Prepared {
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub partition: Vec<ClientDataset>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let dataset = data::load_csv_dataset(
        ExperimentConfig::get(&cfg.dataset),
        &ExperimentConfig::get(&cfg.label_col),
    )?;
    let seed = ExperimentConfig::get(&cfg.seed);
    let (train, validation, test) = data::split_dataset(&dataset, SPLIT, seed)?;
    let partition = data::partition_label_skew(
        &train,
        &validation,
        &cfg.skew_spec()?,
        ExperimentConfig::get(&cfg.clients),
        seed,
    )?;
    Ok(Prepared {
        train,
        validation,
        test,
        partition,
    })
}

/// Writes `contents` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let fail = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(fail)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(fail)?;
    fs::rename(&tmp, path).map_err(fail)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(dflsim_core::Error::from)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn traces_csv(run: &RunResult) -> String {
    let mut s = String::from("deployment,round,client,epoch,train_loss,val_loss\n");
    for trace in &run.traces {
        for e in &trace.entries {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                run.kind, e.round, e.client, e.global_epoch, e.train_loss, e.val_loss
            );
        }
    }
    s
}

/// One row per (deployment, client) with the converged epoch or `NC`.
pub fn convergence_csv(runs: &[RunResult]) -> String {
    let mut s = String::from("deployment,client,converged_epoch\n");
    for run in runs {
        for row in metrics::convergence_rows(run.kind.name(), &run.convergence) {
            s.push_str(&row.join(","));
            s.push('\n');
        }
    }
    s
}

pub fn f1_csv(runs: &[RunResult]) -> String {
    let mut s = String::from("deployment,mean_f1,mean_accuracy\n");
    for run in runs {
        let _ = writeln!(s, "{},{},{}", run.kind, run.mean_f1, run.mean_accuracy);
    }
    s
}

/// Bound inputs matched to a run: `E` counts local SGD steps per train event
/// and `T` all steps a client takes.
pub fn bound_inputs_for(
    stats: &models::ObjectiveStats,
    spec: &ModelSpec,
    config: &DeploymentConfig,
    partition: &[ClientDataset],
) -> Result<BoundInputs> {
    let epochs = config.epochs_per_event()?;
    let largest = partition.iter().map(|c| c.sample_count).max().unwrap_or(1);
    let steps_per_epoch = largest.div_ceil(spec.batch_size);
    let local = epochs * steps_per_epoch;
    Ok(BoundInputs::from_stats(
        stats,
        spec.learning_rate,
        local,
        local * config.rounds(),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub runs: Vec<RunResult>,
    pub bounds: Vec<BoundReportEntry>,
}

/// Runs the configured deployments and writes every artifact into `out`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    let cfg = config.resolve()?;
    let kinds = cfg.deployments()?;
    let configs: Vec<DeploymentConfig> = kinds.iter().map(|&k| cfg.deployment_config(k)).collect();
    for c in &configs {
        c.validate()?;
    }
    let prepared = prepare(&cfg)?;
    let spec = cfg.model_spec();
    let out = ExperimentConfig::get(&cfg.out);

    let runs: Vec<RunResult> = configs
        .par_iter()
        .map(|c| engine::run_deployment(c, &prepared.partition, &prepared.test))
        .collect::<std::result::Result<_, _>>()?;

    let stats = models::estimate_constants(&spec, &prepared.partition)?;
    let mut bound_entries = Vec::new();
    for (run, c) in runs.iter().zip(&configs) {
        let inputs = bound_inputs_for(&stats, &spec, c, &prepared.partition)?;
        let report = bounds::verify_bound(run, &stats, &inputs, &spec, &prepared.partition)?;
        bound_entries.extend(report.entries);
    }

    for run in &runs {
        write_atomic(
            &out.join(format!("traces_{}.csv", run.kind)),
            traces_csv(run).as_bytes(),
        )?;
        write_json(&out.join(format!("run_{}.json", run.kind)), run)?;
    }
    write_atomic(&out.join("convergence.csv"), convergence_csv(&runs).as_bytes())?;
    write_atomic(&out.join("f1.csv"), f1_csv(&runs).as_bytes())?;
    write_json(&out.join("bounds.json"), &bound_entries)?;
    write_json(
        &out.join("partition.json"),
        &data::partition_manifest(&prepared.partition),
    )?;
    write_json(&out.join("manifest.json"), &cfg)?;

    Ok(ExperimentSummary {
        runs,
        bounds: bound_entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub model: ModelKind,
    pub epochs: usize,
    /// `None` when the loss never flattened or crossed.
    pub converged_epoch: Option<usize>,
    pub f1: f64,
    pub accuracy: f64,
    pub final_train_loss: f64,
    pub final_val_loss: f64,
    pub params: ParamVector,
}

/// Single-machine training on the full training split.
pub fn baseline(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<(BaselineReport, metrics::TrainingTrace)> {
    let spec = cfg.model_spec();
    let epochs = ExperimentConfig::get(&cfg.epochs);
    let seed = engine::event_seed(ExperimentConfig::get(&cfg.seed), 0, 0);
    let client = ClientDataset::new(0, prepared.train.clone(), prepared.validation.clone());
    let p0 = ParamVector::zeros(prepared.train.n_features());
    let (params, trace) = models::train_local(&spec, &p0, &client, epochs, seed)?;
    let pred = models::predict(&params, &prepared.test);
    let report = BaselineReport {
        model: spec.kind,
        epochs,
        converged_epoch: cfg.criterion().detect(&trace)?,
        f1: metrics::f1_binary(&pred, prepared.test.labels())?,
        accuracy: metrics::accuracy(&pred, prepared.test.labels())?,
        final_train_loss: models::loss(&spec, &params, &prepared.train)?,
        final_val_loss: models::loss(&spec, &params, &prepared.validation)?,
        params,
    };
    Ok((report, trace))
}

/// Runs the baseline and writes `baseline.json`, its trace and the manifest.
pub fn run_baseline(config: &ExperimentConfig) -> Result<BaselineReport> {
    let cfg = ExperimentConfig {
        skew: Some("iid".into()),
        ..config.clone()
    }
    .resolve()?;
    let prepared = prepare(&cfg)?;
    let (report, trace) = baseline(&cfg, &prepared)?;
    let out = ExperimentConfig::get(&cfg.out);
    let mut csv = String::from("round,epoch,train_loss,val_loss\n");
    for e in &trace.entries {
        let _ = writeln!(csv, "{},{},{},{}", e.round, e.global_epoch, e.train_loss, e.val_loss);
    }
    write_atomic(&out.join("traces_baseline.csv"), csv.as_bytes())?;
    write_json(&out.join("baseline.json"), &report)?;
    write_json(&out.join("manifest.json"), &cfg)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_values() {
        let file = ExperimentConfig {
            seed: Some(1),
            clients: Some(3),
            ..Default::default()
        };
        let flags = ExperimentConfig {
            seed: Some(9),
            ..Default::default()
        };
        let merged = file.overridden_by(flags);
        assert_eq!(merged.seed, Some(9));
        assert_eq!(merged.clients, Some(3));
    }

    #[test]
    fn resolve_fills_model_defaults() {
        let cfg = ExperimentConfig {
            dataset: Some("x.csv".into()),
            model: Some(ModelChoice::Logistic),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        assert_eq!(cfg.epochs, Some(1000));
        assert_eq!(cfg.clients, Some(5));
        assert_eq!(cfg.rounds, None);
        assert_eq!(cfg.deployments().unwrap().len(), 6);
        let ring = cfg.deployment_config(DeploymentKind::ContinuousRing);
        assert_eq!(ring.n_rounds, 2);
        assert_eq!(cfg.deployment_config(DeploymentKind::AggregateStar).n_rounds, 5);
    }

    #[test]
    fn resolve_rejects_bad_values() {
        let base = ExperimentConfig {
            dataset: Some("x.csv".into()),
            ..Default::default()
        };
        assert!(ExperimentConfig { ..base.clone() }.resolve().is_ok());
        let missing = ExperimentConfig::default().resolve().unwrap_err();
        assert_eq!(missing.exit_code(), 2);
        let bad = ExperimentConfig {
            deployment: Some("continuous_star".into()),
            ..base.clone()
        };
        assert_eq!(bad.resolve().unwrap_err().exit_code(), 2);
        let lr = ExperimentConfig { lr: Some(-1.0), ..base };
        assert_eq!(lr.resolve().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn manifest_roundtrip() {
        let cfg = ExperimentConfig {
            dataset: Some("x.csv".into()),
            rounds: Some(3),
            ..Default::default()
        }
        .resolve()
        .unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.resolve().unwrap(), cfg);
    }

    #[test]
    fn error_json_shape() {
        let e = CliError::Config("nope".into());
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"], "config");
        assert_eq!(v["message"], "nope");
        let r = CliError::Core(dflsim_core::Error::EmptyAggregation);
        assert_eq!(r.exit_code(), 3);
    }

    #[test]
    fn atomic_write_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/a.csv");
        write_atomic(&path, b"x\n").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"x\n");
        let names: Vec<_> = fs::read_dir(path.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
    }
}
