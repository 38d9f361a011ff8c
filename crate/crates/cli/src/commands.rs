//! The four subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use fairaa::datagen::LabeledDataset;
use fairaa::kernel::resolve_gamma;
use fairaa::metrics::{evaluate_detailed, EvalInput, EvalSpace};
use fairaa::{
    encode_multi_group, encode_two_group, fit, fit_kernel, gram, matmul, stack_attributes, ArchetypalModel,
    DataMatrix, GramMatrix, KernelSpec, MetricsReport, SensitiveEncoding,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ModelSpec};
use crate::{plots, CliError, Outcome};

pub const THREADS_ENV: &str = "FAIRAA_THREADS";

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Writes through a sibling temporary file and a rename, so a failed write
/// never leaves a truncated file under the final name.
fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
    let tmp = path.with_file_name(format!(".{name}.partial"));
    fs::write(&tmp, contents).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(path, e)
    })
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.into()))?;
    text.push('\n');
    Ok(text)
}

/// Loaded data plus everything derived from it that every fit shares.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub data: LabeledDataset,
    pub encoding: Option<SensitiveEncoding>,
    /// Resolved kernel (median-heuristic width filled in) and its Gram matrix.
    pub kernel: Option<(KernelSpec, GramMatrix)>,
}

impl Experiment {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self, CliError> {
        config.validate()?;
        let data = config.dataset.load(config.seed)?;
        let encodings = data
            .labels
            .iter()
            .map(|l| if l.groups() == 2 { encode_two_group(l) } else { encode_multi_group(l) })
            .collect::<fairaa::Result<Vec<_>>>()?;
        let encoding = match encodings.len() {
            0 => None,
            1 => encodings.into_iter().next(),
            _ => Some(stack_attributes(&encodings)?),
        };
        let kernel = match config.model {
            ModelSpec::Plain => None,
            ModelSpec::Kernel { kernel } => {
                let resolved = KernelSpec {
                    kind: kernel.kind,
                    gamma: match kernel.kind {
                        fairaa::KernelKind::Rbf => Some(resolve_gamma(&data.x, &kernel)?),
                        fairaa::KernelKind::Linear => None,
                    },
                };
                let k = gram(&data.x, &resolved)?;
                Some((resolved, k))
            }
        };
        let mut config = config.clone();
        config.fit.seed = config.seed;
        Ok(Self {
            config,
            data,
            encoding,
            kernel,
        })
    }

    pub fn fit(&self, lambda: f64) -> Result<ArchetypalModel, CliError> {
        if lambda > 0.0 && self.encoding.is_none() {
            return Err(CliError::Config("lambda > 0 needs at least one label column".into()));
        }
        let cfg = self.config.fit.clone().with_lambda(lambda);
        let model = match &self.kernel {
            Some((_, k)) => fit_kernel(k, &cfg, self.encoding.as_ref())?,
            None => fit(&self.data.x, &cfg, self.encoding.as_ref())?,
        };
        Ok(model)
    }

    /// Metrics against the first label attribute, plus per-group accuracies.
    pub fn evaluate(&self, model: &ArchetypalModel) -> Result<(MetricsReport, Vec<f64>), CliError> {
        let labels = self
            .data
            .labels
            .first()
            .ok_or_else(|| CliError::Data(fairaa::Error::Schema("dataset has no label column".into())))?;
        let space = match &self.kernel {
            Some((_, k)) => EvalSpace::Gram(k),
            None => EvalSpace::Data(&self.data.x),
        };
        let (report, sep) = evaluate_detailed(&EvalInput {
            space,
            model,
            labels,
            encoding: self.encoding.as_ref(),
            spec: &self.config.metrics,
            seed: self.config.seed,
            dataset_tag: &self.data.tag,
        })?;
        Ok((report, sep.per_group))
    }

    /// Archetype positions in input space: `C X` for both model kinds.
    pub fn archetype_points(&self, model: &ArchetypalModel) -> Result<DataMatrix, CliError> {
        match model.archetypes() {
            Some(a) => Ok(a.clone()),
            None => Ok(matmul(model.c(), &self.data.x)?),
        }
    }

    fn out(&self) -> &Path {
        &self.config.output_dir
    }
}

#[derive(Serialize)]
struct DatasetMetadata<'a> {
    dataset: crate::config::DatasetSpec,
    seed: u64,
    tag: &'a str,
    rows: usize,
    features: Vec<String>,
    labels: Vec<String>,
}

/// Writes `dataset.csv` and `dataset.json`. Nothing is written unless
/// generation succeeds.
pub fn cmd_generate(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    if !config.dataset.is_generator() {
        return Err(CliError::Config("generate needs a generator dataset, not a csv file".into()));
    }
    let data = config.dataset.load(config.seed)?;
    let csv = data.to_csv_string()?;
    let meta = DatasetMetadata {
        dataset: config.dataset.resolved(),
        seed: config.seed,
        tag: &data.tag,
        rows: data.x.rows(),
        features: data.feature_names_or_default(),
        labels: data.label_names.iter().map(|n| format!("label_{n}")).collect(),
    };
    let meta = to_json(&meta)?;
    let dir = &config.output_dir;
    ensure_dir(dir)?;
    write_file(&dir.join("dataset.csv"), csv.as_bytes())?;
    write_file(&dir.join("dataset.json"), meta.as_bytes())?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct RunLog<'a> {
    lambda: f64,
    k: usize,
    seed: u64,
    iters_run: usize,
    converged: bool,
    stalled: bool,
    final_objective: f64,
    final_penalty: f64,
    trace: &'a [f64],
}

fn projection_csv(data: &LabeledDataset, s: &DataMatrix) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..s.cols()).map(|j| format!("s{j}")).collect();
    header.extend(data.label_names.iter().map(|n| format!("label_{n}")));
    let csv_err = |e: csv::Error| CliError::Data(e.into());
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..s.rows() {
        let mut record: Vec<String> = s.row(i).iter().map(f64::to_string).collect();
        for (labels, values) in data.labels.iter().zip(&data.label_values) {
            record.push(values[labels.labels()[i]].clone());
        }
        w.write_record(&record).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Fits one model at `config.fit.lambda`; writes `model.json`,
/// `projection.csv`, `run_log.json` and, when labels exist, `metrics.json`.
pub fn cmd_fit(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    let exp = Experiment::prepare(config)?;
    let model = exp.fit(exp.config.fit.lambda)?;
    let metrics = if exp.data.labels.is_empty() {
        None
    } else {
        Some(to_json(&exp.evaluate(&model)?.0)?)
    };
    let log = RunLog {
        lambda: model.config().lambda,
        k: model.k(),
        seed: model.seed(),
        iters_run: model.iters_run(),
        converged: model.converged(),
        stalled: model.stalled(),
        final_objective: model.final_objective(),
        final_penalty: model.final_penalty(),
        trace: model.objective_trace(),
    };
    let dir = exp.out();
    ensure_dir(dir)?;
    write_file(&dir.join("model.json"), format!("{}\n", model.to_json()?).as_bytes())?;
    write_file(&dir.join("projection.csv"), projection_csv(&exp.data, model.s())?.as_bytes())?;
    write_file(&dir.join("run_log.json"), to_json(&log)?.as_bytes())?;
    if let Some(m) = metrics {
        write_file(&dir.join("metrics.json"), m.as_bytes())?;
    }
    Ok(Outcome::Success)
}

/// Scores a saved model on the configured dataset; writes `evaluation.json`.
pub fn cmd_evaluate(config: &ExperimentConfig, model_path: &Path) -> Result<Outcome, CliError> {
    let text = fs::read_to_string(model_path).map_err(|e| io_err(model_path, e))?;
    let model = ArchetypalModel::from_json(&text)?;
    let exp = Experiment::prepare(config)?;
    match (&exp.kernel, model.archetypes()) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("model was fitted on features but the config selects a kernel".into()))
        }
        (None, None) => {
            return Err(CliError::Config("model was fitted on a Gram matrix but the config selects plain".into()))
        }
        _ => {}
    }
    let n = exp.data.x.rows();
    if model.s().rows() != n {
        return Err(CliError::Data(fairaa::Error::Shape(format!(
            "model has {} rows in S but the dataset has {n} points",
            model.s().rows()
        ))));
    }
    if let Some(a) = model.archetypes() {
        if a.cols() != exp.data.x.cols() {
            return Err(CliError::Data(fairaa::Error::Shape(format!(
                "model archetypes have {} features but the dataset has {}",
                a.cols(),
                exp.data.x.cols()
            ))));
        }
    }
    let (report, _) = exp.evaluate(&model)?;
    let dir = exp.out();
    ensure_dir(dir)?;
    write_file(&dir.join("evaluation.json"), to_json(&report)?.as_bytes())?;
    Ok(Outcome::Success)
}

/// One λ of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub lambda: f64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<MetricsReport>,
    /// One-vs-rest accuracy per group; empty for two groups.
    #[serde(default)]
    pub ls_per_group: Vec<f64>,
    #[serde(default)]
    pub converged: bool,
    #[serde(default)]
    pub iters_run: usize,
}

/// Change of one λ relative to the baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub lambda: f64,
    /// `EV(0) − EV(λ)`.
    pub ev_drop: f64,
    /// `MMD²(λ) / MMD²(0)`; absent when the baseline MMD² is zero.
    pub mmd_ratio: Option<f64>,
    /// `LS(0) − LS(λ)`.
    pub ls_drop: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub dataset_tag: String,
    pub seed: u64,
    pub k: usize,
    pub model: ModelSpec,
    /// The λ = 0 fit; absent only if that fit failed.
    pub baseline: Option<MetricsReport>,
    /// Ascending in λ.
    pub entries: Vec<Entry>,
    /// One per successful entry, ascending in λ.
    pub deltas: Vec<Delta>,
}

impl ComparisonReport {
    pub fn entry(&self, lambda: f64) -> Option<&Entry> {
        self.entries.iter().find(|e| e.lambda == lambda)
    }

    pub fn delta(&self, lambda: f64) -> Option<&Delta> {
        self.deltas.iter().find(|d| d.lambda == lambda)
    }

    pub fn failed(&self) -> bool {
        self.entries.iter().any(|e| !e.ok)
    }
}

pub type FitResult = Result<(ArchetypalModel, MetricsReport, Vec<f64>), String>;

/// Builds the report from per-λ results given in ascending λ order.
pub fn assemble_report(exp: &Experiment, results: &[(f64, FitResult)]) -> ComparisonReport {
    let entries: Vec<Entry> = results
        .iter()
        .map(|(lambda, r)| match r {
            Ok((model, metrics, per_group)) => Entry {
                lambda: *lambda,
                ok: true,
                error: None,
                metrics: Some(metrics.clone()),
                ls_per_group: per_group.clone(),
                converged: model.converged(),
                iters_run: model.iters_run(),
            },
            Err(e) => Entry {
                lambda: *lambda,
                ok: false,
                error: Some(e.clone()),
                metrics: None,
                ls_per_group: Vec::new(),
                converged: false,
                iters_run: 0,
            },
        })
        .collect();
    let baseline = entries.iter().find(|e| e.lambda == 0.0).and_then(|e| e.metrics.clone());
    let deltas = match &baseline {
        Some(b) => entries
            .iter()
            .filter_map(|e| e.metrics.as_ref().map(|m| (e.lambda, m)))
            .map(|(lambda, m)| Delta {
                lambda,
                ev_drop: b.explained_variance - m.explained_variance,
                mmd_ratio: (b.mmd2 != 0.0).then(|| m.mmd2 / b.mmd2),
                ls_drop: b.ls_accuracy - m.ls_accuracy,
            })
            .collect(),
        None => Vec::new(),
    };
    ComparisonReport {
        dataset_tag: exp.data.tag.clone(),
        seed: exp.config.seed,
        k: exp.config.fit.k,
        model: match &exp.kernel {
            Some((spec, _)) => ModelSpec::Kernel { kernel: *spec },
            None => ModelSpec::Plain,
        },
        baseline,
        entries,
        deltas,
    }
}

fn metrics_csv(report: &ComparisonReport) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Data(e.into());
    w.write_record([
        "lambda",
        "ok",
        "explained_variance",
        "mmd2",
        "ls_accuracy",
        "penalty",
        "ev_drop",
        "mmd_ratio",
        "ls_drop",
        "converged",
        "iters_run",
    ])
    .map_err(csv_err)?;
    let num = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    for e in &report.entries {
        let d = report.delta(e.lambda);
        let m = e.metrics.as_ref();
        w.write_record([
            e.lambda.to_string(),
            e.ok.to_string(),
            num(m.map(|m| m.explained_variance)),
            num(m.map(|m| m.mmd2)),
            num(m.map(|m| m.ls_accuracy)),
            num(m.map(|m| m.penalty)),
            num(d.map(|d| d.ev_drop)),
            num(d.and_then(|d| d.mmd_ratio)),
            num(d.map(|d| d.ls_drop)),
            e.converged.to_string(),
            e.iters_run.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Thread count from `FAIRAA_THREADS`; `None` lets rayon decide.
pub fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} = '{v}' is not a positive integer"))),
        },
    }
}

fn lambda_tag(lambda: f64) -> String {
    format!("lambda_{lambda}")
}

/// Result of [`cmd_compare`].
pub struct Comparison {
    pub report: ComparisonReport,
    pub outcome: Outcome,
    pub files: Vec<PathBuf>,
}

/// Fits every λ of the sweep (baseline included) and writes
/// `comparison.json`, `metrics.csv`, one `model_lambda_<λ>.json` per
/// successful fit and the SVG plots.
pub fn cmd_compare(config: &ExperimentConfig) -> Result<Comparison, CliError> {
    let exp = Experiment::prepare(config)?;
    if exp.data.labels.is_empty() {
        return Err(CliError::Data(fairaa::Error::Schema("compare needs a label column".into())));
    }
    let grid = exp.config.sweep();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let results: Vec<(f64, FitResult)> = pool.install(|| {
        grid.par_iter()
            .map(|&lambda| {
                let r = exp
                    .fit(lambda)
                    .and_then(|m| exp.evaluate(&m).map(|(rep, per)| (m, rep, per)))
                    .map_err(|e| e.to_string());
                (lambda, r)
            })
            .collect()
    });
    let report = assemble_report(&exp, &results);

    let dir = exp.out();
    ensure_dir(dir)?;
    let mut files = Vec::new();
    let mut emit = |name: String, body: &str| -> Result<(), CliError> {
        let path = dir.join(name);
        write_file(&path, body.as_bytes())?;
        files.push(path);
        Ok(())
    };
    emit("comparison.json".into(), &to_json(&report)?)?;
    emit("metrics.csv".into(), &metrics_csv(&report)?)?;
    for (lambda, r) in &results {
        if let Ok((model, _, _)) = r {
            emit(format!("model_{}.json", lambda_tag(*lambda)), &format!("{}\n", model.to_json()?))?;
        }
    }

    let fitted: Vec<(f64, &ArchetypalModel)> = results
        .iter()
        .filter_map(|(l, r)| r.as_ref().ok().map(|(m, _, _)| (*l, m)))
        .collect();
    let labels = &exp.data.labels[0];
    let group_names = &exp.data.label_values[0];
    let mut overlays = Vec::new();
    if let Some(&(l, m)) = fitted.first() {
        overlays.push((l, exp.archetype_points(m)?));
    }
    if let Some(&(l, m)) = fitted.last().filter(|_| fitted.len() > 1) {
        overlays.push((l, exp.archetype_points(m)?));
    }
    emit(
        "data_archetypes.svg".into(),
        &plots::data_with_archetypes(&exp.data.x, labels, group_names, &overlays),
    )?;
    for (l, m) in &fitted {
        emit(
            format!("projection_{}.svg", lambda_tag(*l)),
            &plots::projection(m.s(), labels, group_names, *l),
        )?;
    }
    emit("metrics.svg".into(), &plots::metric_lines(&report))?;
    emit("deltas.svg".into(), &plots::delta_bars(&report))?;

    let outcome = if report.failed() { Outcome::Partial } else { Outcome::Success };
    Ok(Comparison { report, outcome, files })
}
