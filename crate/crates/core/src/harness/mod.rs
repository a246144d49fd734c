//! Experiment runner: JSON configuration, grid sweeps and CSV output.
//!
//! A configuration names an experiment, a parameter grid with one list per
//! parameter, the trial count and the master seed:
//!
//! ```json
//! {
//!   "experiment": "spectral-efficiency",
//!   "trials": 10000,
//!   "seed": 7,
//!   "grid": { "N": [32], "T": [150], "snr_db": [0, 5, 10, 15, 20, 25, 30] }
//! }
//! ```
//!
//! Every combination of the swept parameters is one grid point, numbered in
//! row-major order. Trial `t` at grid point `g` draws from the random stream
//! `(seed, g, t)`, so all schemes evaluated at one grid point see the same
//! channels.

mod experiments;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use experiments::Experiment;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "RISESTIM_THREADS";

pub const CSV_HEADER: [&str; 11] = [
    "experiment",
    "scheme",
    "snr_db",
    "N",
    "T",
    "J",
    "metric_name",
    "metric_value",
    "std_error",
    "trials",
    "seed",
];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration:\n{}", .0.iter().map(|e| format!("  - {e}")).collect::<Vec<_>>().join("\n"))]
    Config(Vec<String>),

    #[error("{context}: {source}")]
    Runtime {
        context: String,
        #[source]
        source: crate::Error,
    },

    #[error("cannot write `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Config(_))
    }

    fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(vec![msg.into()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    NarrowbandMse,
    SpectralEfficiency,
    OptimalSize,
    Sparse,
    Ofdm,
    Multiuser,
    Opportunistic,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::NarrowbandMse,
        ExperimentKind::SpectralEfficiency,
        ExperimentKind::OptimalSize,
        ExperimentKind::Sparse,
        ExperimentKind::Ofdm,
        ExperimentKind::Multiuser,
        ExperimentKind::Opportunistic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::NarrowbandMse => "narrowband-mse",
            ExperimentKind::SpectralEfficiency => "spectral-efficiency",
            ExperimentKind::OptimalSize => "optimal-size",
            ExperimentKind::Sparse => "sparse",
            ExperimentKind::Ofdm => "ofdm",
            ExperimentKind::Multiuser => "multiuser",
            ExperimentKind::Opportunistic => "opportunistic",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ExperimentKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<_> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            format!("unknown experiment `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// Parameter lists. Unset lists fall back to per-experiment defaults;
/// parameters an experiment does not use are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<Vec<f64>>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<usize>>,
    #[serde(rename = "M_t", default, skip_serializing_if = "Option::is_none")]
    pub m_t: Option<Vec<usize>>,
    #[serde(rename = "M_r", default, skip_serializing_if = "Option::is_none")]
    pub m_r: Option<Vec<usize>>,
    /// Training families (`canonical`, `dft`, `hadamard`, `qdft<L>`) or, for
    /// the rate experiments, `canonical` and `dft`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub families: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_path: Option<bool>,
    #[serde(rename = "N_max", default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<Vec<usize>>,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<usize>>,
    #[serde(rename = "H", default, skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<usize>>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<Vec<usize>>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<usize>>,
    /// Training slots; `pilot_budget` when unset.
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub j: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithms: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_constant: Option<f64>,
    /// Off-grid angle offsets as a fraction of the grid spacing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noiseless: Option<bool>,
    #[serde(rename = "M_c", default, skip_serializing_if = "Option::is_none")]
    pub m_c: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cyclic_prefix: Option<usize>,
    #[serde(rename = "N_p", default, skip_serializing_if = "Option::is_none")]
    pub n_p: Option<Vec<usize>>,
    #[serde(rename = "N_g", default, skip_serializing_if = "Option::is_none")]
    pub n_g: Option<Vec<usize>>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<usize>>,
    /// Pilots per probed state; noiseless probing when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement_pilots: Option<usize>,
}

fn default_trials() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<ExperimentKind>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Output CSV path; `<experiment>.csv` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub grid: Grid,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, grid: Grid, trials: usize, seed: u64) -> Self {
        ExperimentConfig {
            experiment: Some(experiment),
            trials,
            seed,
            output: None,
            grid,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::config(format!("cannot read `{}`: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn kind(&self) -> Result<ExperimentKind, HarnessError> {
        self.experiment
            .ok_or_else(|| HarnessError::config("experiment: not set"))
    }

    /// CSV path, resolved against `dir` when given.
    pub fn output_path(&self, dir: Option<&Path>) -> PathBuf {
        let file = match (&self.output, self.experiment) {
            (Some(p), _) => p.clone(),
            (None, Some(k)) => PathBuf::from(format!("{k}.csv")),
            (None, None) => PathBuf::from("results.csv"),
        };
        match dir {
            Some(d) => d.join(file.file_name().map(PathBuf::from).unwrap_or(file)),
            None => file,
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub experiment: ExperimentKind,
    pub scheme: String,
    pub snr_db: Option<f64>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "T")]
    pub t: Option<usize>,
    #[serde(rename = "J")]
    pub j: Option<usize>,
    pub metric_name: String,
    pub metric_value: f64,
    pub std_error: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Checks the configuration against the preconditions of the experiment's
/// modules. Returns every problem found; empty when the config is runnable.
pub fn validate(config: &ExperimentConfig) -> Vec<String> {
    let mut errors = Vec::new();
    if config.trials == 0 {
        errors.push("trials: must be at least 1".to_string());
    }
    match config.experiment {
        None => errors.push("experiment: not set".to_string()),
        Some(kind) => {
            if let Err(e) = Experiment::resolve(kind, &config.grid) {
                errors.extend(e);
            }
        }
    }
    errors
}

/// Runs every grid point and returns the records in grid order.
pub fn run(config: &ExperimentConfig) -> Result<Vec<ExperimentRecord>, HarnessError> {
    let errors = validate(config);
    if !errors.is_empty() {
        return Err(HarnessError::Config(errors));
    }
    let kind = config.kind()?;
    let experiment = Experiment::resolve(kind, &config.grid).map_err(HarnessError::Config)?;
    let pool = thread_pool()?;
    pool.install(|| experiment.run(config.trials, config.seed))
}

/// Runs the experiment and writes its CSV to `path`.
pub fn run_to_file(config: &ExperimentConfig, path: &Path) -> Result<Vec<ExperimentRecord>, HarnessError> {
    let records = run(config)?;
    let io_err = |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    let file = std::fs::File::create(path).map_err(io_err)?;
    let mut out = std::io::BufWriter::new(file);
    write_csv(&records, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)?;
    Ok(records)
}

/// Rayon pool sized by [`THREADS_ENV`], or rayon's default when unset.
pub fn thread_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(value) = std::env::var(THREADS_ENV) {
        let threads: usize = value.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            HarnessError::config(format!("{THREADS_ENV}: expected a positive integer, got `{value}`"))
        })?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| HarnessError::config(format!("{THREADS_ENV}: {e}")))
}

pub fn write_csv<W: std::io::Write>(records: &[ExperimentRecord], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt_usize = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.experiment.name().to_string(),
            r.scheme.clone(),
            r.snr_db.map(format_float).unwrap_or_default(),
            opt_usize(r.n),
            opt_usize(r.t),
            opt_usize(r.j),
            r.metric_name.clone(),
            format_float(r.metric_value),
            format_float(r.std_error),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()
}

/// `printf("%.9g")`: 9 significant digits, trailing zeros removed,
/// scientific notation outside `[1e-4, 1e9)`.
pub fn format_float(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    } else {
        trim_fraction(&format!("{:.*}", (DIGITS - 1 - exp) as usize, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
