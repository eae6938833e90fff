//! Run configuration.
//!
//! Line-oriented `key = value` pairs; a `[name]` line prefixes the keys that
//! follow with `name.`. Blank lines and lines starting with `#` are skipped.
//! Unknown keys are errors. Relative paths are taken relative to the
//! working directory, so a configuration echoed into the output directory
//! reruns the same way from the same place.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rbqr_core::models::Model;

use crate::bench::Mode;
use crate::files::Format;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{origin}: {msg}")]
pub struct ConfigError {
    pub origin: String,
    pub msg: String,
}

/// Where the training snapshots come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    /// Evaluate `model.name` on `model.param_file`.
    Model,
    /// Gaussian random matrix seeded by `greedy.seed`.
    Random { rows: usize, cols: usize },
}

impl std::str::FromStr for Source {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "model" {
            return Ok(Source::Model);
        }
        if let Some(dims) = s.strip_prefix("random:") {
            let (r, c) = dims.split_once('x').ok_or("random source must look like random:ROWSxCOLS")?;
            let rows = r.parse().map_err(|_| format!("bad row count '{r}'"))?;
            let cols = c.parse().map_err(|_| format!("bad column count '{c}'"))?;
            return Ok(Source::Random { rows, cols });
        }
        if s.is_empty() {
            return Err("matrix.source is empty".into());
        }
        Ok(Source::File(PathBuf::from(s)))
    }
}

impl std::fmt::Display for Source {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Source::File(p) => write!(f, "{}", p.display()),
            Source::Model => f.write_str("model"),
            Source::Random { rows, cols } => write!(f, "random:{rows}x{cols}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub matrix_source: Source,
    pub matrix_format: Format,
    pub model_name: Model,
    pub model_param_file: Option<PathBuf>,
    pub x_min: f64,
    pub x_max: f64,
    pub x_points: usize,
    pub tau: f64,
    /// 0 means `min(N, M)`.
    pub k_max: usize,
    pub workers: usize,
    pub seed: u64,
    /// Snapshot file, or a parameter file when the training set is a model.
    pub validate_source: Option<PathBuf>,
    pub validate_rounds: usize,
    pub eim_enabled: bool,
    pub output_dir: PathBuf,
    pub output_formats: Vec<Format>,
    /// Singular-value cut for `reconstruct`; defaults to `greedy.tau`.
    pub reconstruct_tau2: Option<f64>,
    pub bench_mode: Mode,
    pub bench_workers: Vec<usize>,
    pub bench_k: usize,
    pub bench_rows: usize,
    pub bench_cols_per_worker: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            matrix_source: Source::Model,
            matrix_format: Format::Npy,
            model_name: Model::DampedChirp,
            model_param_file: None,
            x_min: 0.0,
            x_max: 10.0,
            x_points: 2000,
            tau: 1e-8,
            k_max: 0,
            workers: 1,
            seed: 0,
            validate_source: None,
            validate_rounds: 2,
            eim_enabled: true,
            output_dir: PathBuf::from("out"),
            output_formats: vec![Format::Npy],
            reconstruct_tau2: None,
            bench_mode: Mode::Strong,
            bench_workers: vec![1, 2, 4],
            bench_k: 100,
            bench_rows: 10_000,
            bench_cols_per_worker: 100,
        }
    }
}

pub const KEYS: &[&str] = &[
    "matrix.source",
    "matrix.format",
    "model.name",
    "model.param_file",
    "model.x_min",
    "model.x_max",
    "model.x_points",
    "greedy.tau",
    "greedy.k_max",
    "greedy.workers",
    "greedy.seed",
    "validate.source",
    "validate.rounds",
    "eim.enabled",
    "output.dir",
    "output.formats",
    "reconstruct.tau2",
    "bench.mode",
    "bench.workers",
    "bench.k",
    "bench.rows",
    "bench.cols_per_worker",
];

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("'{v}' is not a valid number"))
}

fn positive(v: &str) -> Result<f64, String> {
    let x: f64 = num(v)?;
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(format!("'{v}' must be a positive number"))
    }
}

fn path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn list<T>(v: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(item).collect()
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl Config {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "matrix.source" => self.matrix_source = v.parse()?,
            "matrix.format" => self.matrix_format = v.parse()?,
            "model.name" => {
                self.model_name = Model::from_name(v).ok_or_else(|| format!("unknown model '{v}'"))?;
            }
            "model.param_file" => self.model_param_file = path(v),
            "model.x_min" => self.x_min = num(v)?,
            "model.x_max" => self.x_max = num(v)?,
            "model.x_points" => self.x_points = num(v)?,
            "greedy.tau" => self.tau = positive(v)?,
            "greedy.k_max" => self.k_max = num(v)?,
            "greedy.workers" => self.workers = num::<usize>(v)?.max(1),
            "greedy.seed" => self.seed = num(v)?,
            "validate.source" => self.validate_source = path(v),
            "validate.rounds" => self.validate_rounds = num(v)?,
            "eim.enabled" => {
                self.eim_enabled = match v {
                    "true" | "yes" | "1" => true,
                    "false" | "no" | "0" => false,
                    _ => return Err(format!("'{v}' is not a boolean")),
                }
            }
            "output.dir" => self.output_dir = path(v).ok_or("output.dir is empty")?,
            "output.formats" => {
                let f = list(v, str::parse)?;
                if f.is_empty() {
                    return Err("output.formats is empty".into());
                }
                self.output_formats = f;
            }
            "reconstruct.tau2" => self.reconstruct_tau2 = if v.is_empty() { None } else { Some(positive(v)?) },
            "bench.mode" => {
                self.bench_mode = match v {
                    "strong" => Mode::Strong,
                    "weak" => Mode::Weak,
                    _ => return Err(format!("bench.mode must be strong or weak, got '{v}'")),
                }
            }
            "bench.workers" => {
                let w: Vec<usize> = list(v, num)?;
                if w.first() != Some(&1) || w.windows(2).any(|p| p[0] >= p[1]) {
                    return Err("bench.workers must be increasing and start at 1".into());
                }
                self.bench_workers = w;
            }
            "bench.k" => self.bench_k = num(v)?,
            "bench.rows" => self.bench_rows = num(v)?,
            "bench.cols_per_worker" => self.bench_cols_per_worker = num(v)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let opt = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        Some(match key {
            "matrix.source" => self.matrix_source.to_string(),
            "matrix.format" => self.matrix_format.to_string(),
            "model.name" => self.model_name.name().to_string(),
            "model.param_file" => opt(&self.model_param_file),
            "model.x_min" => self.x_min.to_string(),
            "model.x_max" => self.x_max.to_string(),
            "model.x_points" => self.x_points.to_string(),
            "greedy.tau" => self.tau.to_string(),
            "greedy.k_max" => self.k_max.to_string(),
            "greedy.workers" => self.workers.to_string(),
            "greedy.seed" => self.seed.to_string(),
            "validate.source" => opt(&self.validate_source),
            "validate.rounds" => self.validate_rounds.to_string(),
            "eim.enabled" => self.eim_enabled.to_string(),
            "output.dir" => self.output_dir.display().to_string(),
            "output.formats" => join(&self.output_formats),
            "reconstruct.tau2" => self.reconstruct_tau2.map(|t| t.to_string()).unwrap_or_default(),
            "bench.mode" => match self.bench_mode {
                Mode::Strong => "strong".into(),
                Mode::Weak => "weak".into(),
            },
            "bench.workers" => join(&self.bench_workers),
            "bench.k" => self.bench_k.to_string(),
            "bench.rows" => self.bench_rows.to_string(),
            "bench.cols_per_worker" => self.bench_cols_per_worker.to_string(),
            _ => return None,
        })
    }

    pub fn parse(text: &str, origin: &str) -> Result<Config, ConfigError> {
        let mut cfg = Config::default();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let err = |msg: String| ConfigError { origin: format!("{origin}:{}", i + 1), msg };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| err("unterminated section header".into()))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got '{line}'")))?;
            let k = k.trim();
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            cfg.set(&key, v).map_err(err)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError { origin: origin.clone(), msg: e.to_string() })?;
        Config::parse(&text, &origin)
    }

    /// Applies a `key=value` override.
    pub fn apply(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let err = |msg: String| ConfigError { origin: format!("--set {assignment}"), msg };
        let (k, v) = assignment.split_once('=').ok_or_else(|| err("expected key=value".into()))?;
        self.set(k.trim(), v).map_err(err)
    }

    /// The configuration in the format `parse` reads, every key spelled out.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for key in KEYS {
            let (s, k) = key.split_once('.').unwrap();
            if s != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{s}]");
                section = s;
            }
            let _ = writeln!(out, "{k} = {}", self.get(key).unwrap());
        }
        out
    }
}
