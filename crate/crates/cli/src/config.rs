//! Experiment configuration: one JSON document plus command-line overrides.

use std::path::{Path, PathBuf};

use fairaa::datagen::{self, ArchetypalParams, LabeledDataset};
use fairaa::metrics::MetricsSpec;
use fairaa::{DataMatrix, FitConfig, KernelKind, KernelSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Where the data comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Dirichlet mixtures of planar archetypes, second half shifted.
    TwoClass {
        #[serde(default = "default_two_class_n")]
        n: usize,
        #[serde(default)]
        archetypes: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        alpha: Option<f64>,
        #[serde(default)]
        group_shift: Option<Vec<f64>>,
        #[serde(default)]
        noise_sd: Option<f64>,
    },
    Moons {
        #[serde(default = "default_moons_n")]
        n: usize,
        #[serde(default = "default_moons_noise")]
        noise_sd: f64,
    },
    Blobs {
        #[serde(default)]
        centers: Option<Vec<Vec<f64>>>,
        #[serde(default = "default_per_blob")]
        per_blob: usize,
        #[serde(default = "default_blob_sd")]
        sd: f64,
    },
    /// A headered CSV file. Without explicit columns, `label_*` columns are
    /// labels and every other column is a feature.
    Csv {
        path: PathBuf,
        #[serde(default)]
        feature_cols: Vec<String>,
        #[serde(default)]
        label_cols: Vec<String>,
        #[serde(default)]
        standardize: bool,
    },
}

fn default_two_class_n() -> usize {
    200
}

fn default_moons_n() -> usize {
    300
}

fn default_moons_noise() -> f64 {
    0.05
}

fn default_per_blob() -> usize {
    100
}

fn default_blob_sd() -> f64 {
    0.6
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::TwoClass {
            n: default_two_class_n(),
            archetypes: None,
            alpha: None,
            group_shift: None,
            noise_sd: None,
        }
    }
}

impl DatasetSpec {
    pub fn is_generator(&self) -> bool {
        !matches!(self, DatasetSpec::Csv { .. })
    }

    /// Generator parameters with every default filled in, for metadata.
    pub fn resolved(&self) -> DatasetSpec {
        match self {
            DatasetSpec::TwoClass {
                n,
                archetypes,
                alpha,
                group_shift,
                noise_sd,
            } => {
                let p = self.two_class_params(*n, archetypes, alpha, group_shift, noise_sd);
                DatasetSpec::TwoClass {
                    n: p.n,
                    archetypes: Some(p.archetypes),
                    alpha: Some(p.alpha),
                    group_shift: Some(p.group_shift),
                    noise_sd: Some(p.noise_sd),
                }
            }
            DatasetSpec::Blobs { centers, per_blob, sd } => DatasetSpec::Blobs {
                centers: Some(centers.clone().unwrap_or_else(default_centers)),
                per_blob: *per_blob,
                sd: *sd,
            },
            other => other.clone(),
        }
    }

    fn two_class_params(
        &self,
        n: usize,
        archetypes: &Option<Vec<Vec<f64>>>,
        alpha: &Option<f64>,
        group_shift: &Option<Vec<f64>>,
        noise_sd: &Option<f64>,
    ) -> ArchetypalParams {
        let mut p = ArchetypalParams::two_class(n);
        if let Some(a) = archetypes {
            p.archetypes = a.clone();
            if group_shift.is_none() {
                let d = a.first().map_or(0, Vec::len);
                p.group_shift = (0..d).map(|j| if j == 0 { 1.5 } else { 0.0 }).collect();
            }
        }
        if let Some(a) = alpha {
            p.alpha = *a;
        }
        if let Some(g) = group_shift {
            p.group_shift = g.clone();
        }
        if let Some(s) = noise_sd {
            p.noise_sd = *s;
        }
        p
    }

    pub fn load(&self, seed: u64) -> Result<LabeledDataset, CliError> {
        let ds = match self {
            DatasetSpec::TwoClass {
                n,
                archetypes,
                alpha,
                group_shift,
                noise_sd,
            } => self.two_class_params(*n, archetypes, alpha, group_shift, noise_sd).generate(seed)?,
            DatasetSpec::Moons { n, noise_sd } => datagen::make_moons(*n, *noise_sd, seed)?,
            DatasetSpec::Blobs { centers, per_blob, sd } => {
                let centers = DataMatrix::from_rows(&centers.clone().unwrap_or_else(default_centers))?;
                datagen::make_blobs(&centers, *per_blob, *sd, seed)?
            }
            DatasetSpec::Csv {
                path,
                feature_cols,
                label_cols,
                standardize,
            } => {
                let (features, labels) = resolve_columns(path, feature_cols, label_cols)?;
                datagen::load_csv(path, &features, &labels, *standardize)?
            }
        };
        Ok(ds)
    }
}

fn default_centers() -> Vec<Vec<f64>> {
    datagen::default_blob_centers().row_iter().map(<[f64]>::to_vec).collect()
}

fn resolve_columns(
    path: &Path,
    features: &[String],
    labels: &[String],
) -> Result<(Vec<String>, Vec<String>), CliError> {
    if !features.is_empty() && !labels.is_empty() {
        return Ok((features.to_vec(), labels.to_vec()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let labels = if labels.is_empty() {
        header.iter().filter(|h| h.starts_with("label_")).cloned().collect()
    } else {
        labels.to_vec()
    };
    let features = if features.is_empty() {
        header.iter().filter(|h| !labels.contains(h)).cloned().collect()
    } else {
        features.to_vec()
    };
    Ok((features, labels))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Archetypal analysis on the feature matrix.
    #[default]
    Plain,
    /// Archetypal analysis on a Gram matrix.
    Kernel { kernel: KernelSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub model: ModelSpec,
    pub fit: FitConfig,
    pub lambda_grid: Vec<f64>,
    pub metrics: MetricsSpec,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            model: ModelSpec::default(),
            fit: FitConfig::new(3),
            lambda_grid: vec![0.0, 0.1, 1.0, 10.0, 100.0],
            metrics: MetricsSpec::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub lambda: Option<Vec<f64>>,
    pub k: Option<usize>,
    pub kernel: Option<KernelKind>,
    pub gamma: Option<f64>,
    pub label_cols: Vec<String>,
    pub feature_cols: Option<Vec<String>>,
    pub standardize: bool,
    pub data: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Loads `path` when given, otherwise starts from defaults, then applies
    /// the overrides.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => Self::read(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(out) = &o.out {
            self.output_dir.clone_from(out);
        }
        if let Some(grid) = &o.lambda {
            self.lambda_grid.clone_from(grid);
            if let [single] = grid.as_slice() {
                self.fit.lambda = *single;
            }
        }
        if let Some(k) = o.k {
            self.fit.k = k;
        }
        if let Some(kind) = o.kernel {
            let gamma = match self.model {
                ModelSpec::Kernel { kernel } if kernel.kind == kind => kernel.gamma,
                _ => None,
            };
            self.model = ModelSpec::Kernel {
                kernel: KernelSpec { kind, gamma },
            };
        }
        if let Some(g) = o.gamma {
            match &mut self.model {
                ModelSpec::Kernel { kernel } if kernel.kind == KernelKind::Rbf => kernel.gamma = Some(g),
                _ => return Err(CliError::Config("--gamma requires an rbf kernel model".into())),
            }
        }
        if let Some(path) = &o.data {
            self.dataset = DatasetSpec::Csv {
                path: path.clone(),
                feature_cols: Vec::new(),
                label_cols: Vec::new(),
                standardize: false,
            };
        }
        let csv_flags = !o.label_cols.is_empty() || o.feature_cols.is_some() || o.standardize;
        if csv_flags {
            match &mut self.dataset {
                DatasetSpec::Csv {
                    feature_cols,
                    label_cols,
                    standardize,
                    ..
                } => {
                    if !o.label_cols.is_empty() {
                        label_cols.clone_from(&o.label_cols);
                    }
                    if let Some(f) = &o.feature_cols {
                        feature_cols.clone_from(f);
                    }
                    *standardize |= o.standardize;
                }
                _ => {
                    return Err(CliError::Config(
                        "--label-col, --feature-cols and --standardize apply to csv datasets".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.lambda_grid.is_empty() {
            return Err(CliError::Config("lambda_grid must not be empty".into()));
        }
        if let Some(bad) = self.lambda_grid.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(CliError::Config(format!("lambda {bad} must be finite and >= 0")));
        }
        if let ModelSpec::Kernel { kernel } = &self.model {
            kernel.validate()?;
        }
        self.metrics.mmd_kernel.validate()?;
        if self.metrics.folds < 2 {
            return Err(CliError::Config("metrics.folds must be at least 2".into()));
        }
        Ok(())
    }

    /// The grid sorted ascending, deduplicated, with the baseline `0` present.
    pub fn sweep(&self) -> Vec<f64> {
        let mut grid = self.lambda_grid.clone();
        if !grid.contains(&0.0) {
            grid.push(0.0);
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }
}

/// Parses `0,0.1,1`.
pub fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("'{s}': {e}")))
        .collect()
}
