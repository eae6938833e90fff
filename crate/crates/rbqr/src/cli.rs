//! The `rbqr` command line.
//!
//! Every subcommand reads the same configuration, echoes the effective
//! configuration to `output.dir/effective.cfg` and writes `report.txt` and
//! `report.kv` there. Exit status: 0 on success, 1 when a tolerance or a
//! checked bound was not met, 2 on bad input.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rbqr_core::eim::{build_eim, EimOperator};
use rbqr_core::estimators::{self, projection_errors, EstimatorError};
use rbqr_core::greedy::{self, GreedyError, GreedyOptions, GreedyReport, GreedyState};
use rbqr_core::matrix::{Matrix, SnapshotMatrix};
use rbqr_core::models::{build_snapshot_matrix, linspace};
use rbqr_core::scalar::{self, C64, EPS};
use rbqr_core::svd::{self, SvdError};

use crate::bench::{self, BenchError, Mode};
use crate::config::{Config, ConfigError, Source};
use crate::exec::{Threads, WallClock};
use crate::files::{self, FileError, Format};
use crate::random::gaussian_matrix;
use crate::report::{Report, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_REACHED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Largest `|T_total - (T_pivot + T_imgs)| / T_total` a bench run accepts.
pub const TIMING_IDENTITY_TOL: f64 = 0.01;

#[derive(Debug, Parser)]
#[command(name = "rbqr", version, about = "Reduced-basis greedy QR, POD comparison and empirical interpolation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (`key = value` lines, `[section]` headers).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one configuration key. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Pivot-search workers; overrides greedy.workers.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Do not print the report.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Greedy basis; exports basis, pivots, R rows and greedy errors.
    Build,
    /// Greedy basis checked against validate.source (or the training set).
    Validate,
    /// Greedy basis grown until validate.source passes.
    Enrich,
    /// Greedy basis plus interpolation nodes, checked on the training set.
    Eim,
    /// Errors of POD, optimal RRQR, reconstruction and greedy on one matrix.
    PodCompare,
    /// Strong or weak scaling of the pivot search.
    Bench,
    /// Basis from a greedy pass followed by an SVD of the leading R rows.
    Reconstruct,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    File(#[from] FileError),
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => EXIT_NOT_REACHED,
            _ => EXIT_INPUT,
        }
    }
}

impl From<GreedyError> for CliError {
    fn from(e: GreedyError) -> Self {
        match e {
            GreedyError::ToleranceTooSmall(_) | GreedyError::InvalidBasisLimit { .. } | GreedyError::Matrix(_) => {
                CliError::Input(e.to_string())
            }
            GreedyError::Ortho(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        match e {
            EstimatorError::Greedy(g) => g.into(),
            EstimatorError::DimensionMismatch { .. } | EstimatorError::InvalidTolerance(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SvdError> for CliError {
    fn from(e: SvdError) -> Self {
        match e {
            SvdError::Greedy(g) => g.into(),
            SvdError::InvalidTolerance(_) | SvdError::RankTooLow { .. } => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Greedy(g) => g.into(),
            BenchError::WorkerCounts(_) => CliError::Input(e.to_string()),
            BenchError::Nondeterministic { .. } => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub passed: bool,
}

/// Parses `args` (program name first), runs and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            if !cli.quiet {
                print!("{}", outcome.report.to_text());
            }
            if outcome.passed {
                EXIT_OK
            } else {
                EXIT_NOT_REACHED
            }
        }
        Err(e) => {
            eprintln!("rbqr: {e}");
            e.exit_code()
        }
    }
}

pub fn effective_config(cli: &Cli) -> Result<Config, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for s in &cli.set {
        cfg.apply(s)?;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w.max(1);
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = effective_config(cli)?;
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(|source| FileError::Io { path: dir.clone(), source })?;
    let echo = dir.join("effective.cfg");
    fs::write(&echo, cfg.to_text()).map_err(|source| FileError::Io { path: echo, source })?;

    let run = Run { exec: Threads::new(cfg.workers), cfg };
    let outcome = match cli.command {
        Command::Build => run.build(),
        Command::Validate => run.validate(),
        Command::Enrich => run.enrich(),
        Command::Eim => run.eim(),
        Command::PodCompare => run.pod_compare(),
        Command::Bench => run.bench(),
        Command::Reconstruct => run.reconstruct(),
    }?;
    outcome.report.write(&dir)?;
    Ok(outcome)
}

struct Run {
    cfg: Config,
    exec: Threads,
}

fn pass_fail(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Npy => "npy",
        Format::Text => "txt",
    }
}

fn rows_of(m: &Matrix) -> Vec<Vec<C64>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m.get(i, j)).collect()).collect()
}

fn max_norm(s: &SnapshotMatrix) -> f64 {
    s.col_norms_sq().iter().copied().fold(0.0, f64::max).sqrt()
}

impl Run {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn grid(&self) -> Result<Vec<f64>, CliError> {
        let c = &self.cfg;
        if !(c.x_min.is_finite() && c.x_max.is_finite() && c.x_max > c.x_min) {
            return Err(CliError::Input(format!("model grid needs x_min < x_max, got [{}, {}]", c.x_min, c.x_max)));
        }
        Ok(linspace(c.x_min, c.x_max, c.x_points))
    }

    fn evaluate(&self, param_file: &Path) -> Result<SnapshotMatrix, CliError> {
        let params = files::load_params(param_file)?;
        build_snapshot_matrix(self.cfg.model_name, &params, &self.grid()?, &self.exec)
            .map_err(|e| CliError::Input(format!("{}: {e}", param_file.display())))
    }

    fn training(&self) -> Result<SnapshotMatrix, CliError> {
        match &self.cfg.matrix_source {
            Source::File(p) => Ok(files::load_snapshots(p, self.cfg.matrix_format)?),
            Source::Model => {
                let p = self.cfg.model_param_file.as_ref().ok_or_else(|| {
                    CliError::Input("matrix.source = model needs model.param_file".into())
                })?;
                self.evaluate(p)
            }
            Source::Random { rows, cols } => SnapshotMatrix::new(gaussian_matrix(*rows, *cols, self.cfg.seed))
                .map_err(|e| CliError::Input(format!("random matrix: {e}"))),
        }
    }

    fn validation(&self) -> Result<Option<SnapshotMatrix>, CliError> {
        let Some(p) = &self.cfg.validate_source else {
            return Ok(None);
        };
        let v = match self.cfg.matrix_source {
            Source::Model => self.evaluate(p)?,
            _ => files::load_snapshots(p, self.cfg.matrix_format)?,
        };
        Ok(Some(v))
    }

    fn options(&self, s: &SnapshotMatrix) -> GreedyOptions {
        let limit = s.n_rows().min(s.n_cols());
        let k_max = if self.cfg.k_max == 0 { limit } else { self.cfg.k_max };
        GreedyOptions::new(self.cfg.tau, k_max)
    }

    fn greedy(&self, s: SnapshotMatrix) -> Result<(GreedyState, GreedyReport), CliError> {
        let opts = self.options(&s);
        Ok(greedy::greedy_build(s, &opts, &self.exec, &WallClock::new())?)
    }

    fn describe(&self, rep: &mut Report, state: &GreedyState, g: &GreedyReport) {
        let s = state.snapshots();
        rep.push("n_rows", s.n_rows());
        rep.push("n_cols", s.n_cols());
        rep.push("workers", self.cfg.workers);
        rep.push_real("tau", self.cfg.tau);
        rep.push("k", state.k());
        rep.push_real("final_sigma", g.final_sigma);
        rep.push("termination", g.termination.as_str());
        rep.push_real("mean_sweeps", g.mean_sweeps());
        rep.push("rebased_columns", g.rebased_columns);
        rep.push("flops_pivot", g.flops.pivot);
        rep.push("flops_ortho", g.flops.ortho);
        let (fp, fo) = greedy::flop_estimate(s.n_rows(), s.n_cols(), state.k(), g.mean_sweeps());
        rep.push_real("flops_pivot_model", fp);
        rep.push_real("flops_ortho_model", fo);
        let sum = |f: fn(&greedy::IterationTiming) -> f64| g.timings.iter().map(f).sum::<f64>();
        rep.push_real("time_pivot", sum(|t| t.pivot_plus_c));
        rep.push_real("time_imgs", sum(|t| t.imgs));
        rep.push_real("time_total", sum(|t| t.total) + g.final_search_time);
    }

    fn export_greedy(&self, state: &GreedyState, g: &GreedyReport) -> Result<(), CliError> {
        for &f in &self.cfg.output_formats {
            files::save_columns(&self.out(&format!("basis.{}", ext(f))), state.basis(), f)?;
            files::save_rows(&self.out(&format!("r_rows.{}", ext(f))), state.r_rows(), f)?;
        }
        files::save_indices(&self.out("pivots.txt"), state.pivots(), Format::Text)?;
        let mut sigma = g.sigma_hat.clone();
        sigma.push(g.final_sigma);
        files::save_reals(
            &self.out("sigma_hat.txt"),
            &sigma,
            "greedy error before each pivot; the last line is the error of the final basis",
        )?;
        let mut csv = String::from("C,j,t_pivot_c,t_imgs,t_total\n");
        for (j, t) in g.timings.iter().enumerate() {
            csv.push_str(&format!("{},{},{:e},{:e},{:e}\n", self.cfg.workers, j + 1, t.pivot_plus_c, t.imgs, t.total));
        }
        let path = self.out("timings.csv");
        fs::write(&path, csv).map_err(|source| FileError::Io { path, source })?;
        Ok(())
    }

    /// Builds the interpolant, exports nodes and checks every training column
    /// against `Lambda * sigma_hat_k`. Returns whether the bound held.
    fn interpolate(&self, rep: &mut Report, state: &GreedyState, g: &GreedyReport) -> Result<bool, CliError> {
        let q = state.basis();
        let op: EimOperator = build_eim(q).map_err(|e| CliError::Numerical(format!("interpolation: {e}")))?;
        files::save_indices(&self.out("eim_nodes.txt"), op.nodes(), Format::Text)?;
        for &f in &self.cfg.output_formats {
            if f == Format::Npy {
                files::save_indices(&self.out("eim_nodes.npy"), op.nodes(), f)?;
            }
            files::save_rows(&self.out(&format!("node_matrix.{}", ext(f))), &rows_of(op.node_matrix()), f)?;
        }
        let lambda = op.lebesgue_constant().map_err(|e| CliError::Numerical(e.to_string()))?;
        let s = state.snapshots();
        let (mut worst_2, mut worst_max, mut ok) = (0.0f64, 0.0f64, true);
        for i in 0..s.n_cols() {
            let col = s.column(i);
            let approx = op.interpolate(q, &op.samples(col)).map_err(|e| CliError::Numerical(e.to_string()))?;
            let diff: Vec<C64> = col.iter().zip(&approx).map(|(a, b)| a - b).collect();
            let e2 = scalar::norm(&diff);
            worst_2 = worst_2.max(e2);
            worst_max = worst_max.max(diff.iter().map(|z| scalar::abs(*z)).fold(0.0, f64::max));
            ok &= e2 <= lambda * g.final_sigma + 1e3 * EPS * lambda * scalar::norm(col);
        }
        rep.push("eim_nodes", op.k());
        rep.push_real("eim_lebesgue_constant", lambda);
        rep.push_real("eim_bound", lambda * g.final_sigma);
        rep.push_real("eim_err_2", worst_2);
        rep.push_real("eim_err_max", worst_max);
        rep.push("eim_check", pass_fail(ok));
        Ok(ok)
    }

    fn build(&self) -> Result<Outcome, CliError> {
        let (state, g) = self.greedy(self.training()?)?;
        let mut rep = Report::new("rbqr build");
        self.describe(&mut rep, &state, &g);
        self.export_greedy(&state, &g)?;
        let mut passed = g.termination.reached_tolerance();
        if self.cfg.eim_enabled {
            passed &= self.interpolate(&mut rep, &state, &g)?;
        }
        Ok(Outcome { report: rep, passed })
    }

    fn validate(&self) -> Result<Outcome, CliError> {
        let (state, g) = self.greedy(self.training()?)?;
        let samples = match self.validation()? {
            Some(v) => v,
            None => state.snapshots().clone(),
        };
        let v = estimators::validate(state.basis(), &samples, self.cfg.tau, &self.exec)?;
        let mut rep = Report::new("rbqr validate");
        self.describe(&mut rep, &state, &g);
        self.export_greedy(&state, &g)?;
        rep.push("validation_samples", samples.n_cols());
        rep.push_real("validation_max_error", v.max_error());
        rep.push_real("validation_pass_rate", v.pass_rate(self.cfg.tau));
        rep.push("validation", pass_fail(v.pass));
        let mut t = Table::new(&["sample", "error"]);
        for (i, e) in v.worst.iter().take(5) {
            t.row(vec![i.to_string(), format!("{e:.3e}")]);
        }
        rep.table("worst samples", t);
        Ok(Outcome { report: rep, passed: v.pass })
    }

    fn enrich(&self) -> Result<Outcome, CliError> {
        let samples = self
            .validation()?
            .ok_or_else(|| CliError::Input("enrich needs validate.source".into()))?;
        let train = self.training()?;
        let opts = self.options(&train);
        let (mut state, mut g) = greedy::greedy_build(train, &opts, &self.exec, &WallClock::new())?;
        let out = estimators::enrich(
            &mut state,
            &mut g,
            &samples,
            &opts,
            self.cfg.validate_rounds,
            &self.exec,
            &WallClock::new(),
        )?;
        let mut rep = Report::new("rbqr enrich");
        self.describe(&mut rep, &state, &g);
        self.export_greedy(&state, &g)?;
        rep.push("enrich_rounds", out.rounds);
        rep.push("validation", pass_fail(out.passed));
        let mut t = Table::new(&["round", "basis", "appended", "max_error"]);
        for r in 0..out.max_errors.len() {
            let appended = if r == 0 { "-".to_string() } else { out.appended[r - 1].to_string() };
            t.row(vec![r.to_string(), out.basis_sizes[r].to_string(), appended, format!("{:.3e}", out.max_errors[r])]);
        }
        rep.table("enrichment", t);
        Ok(Outcome { report: rep, passed: out.passed })
    }

    fn eim(&self) -> Result<Outcome, CliError> {
        let (state, g) = self.greedy(self.training()?)?;
        let mut rep = Report::new("rbqr eim");
        self.describe(&mut rep, &state, &g);
        self.export_greedy(&state, &g)?;
        let ok = self.interpolate(&mut rep, &state, &g)?;
        Ok(Outcome { report: rep, passed: ok })
    }

    fn pod_compare(&self) -> Result<Outcome, CliError> {
        let s = self.training()?;
        let full = svd::svd(s.matrix())?;
        let (state, g) = self.greedy(s.clone())?;
        let k = state.k();
        let sigma_next = full.sigma.get(k).copied().unwrap_or(0.0);
        let tau2 = self.cfg.reconstruct_tau2.unwrap_or(self.cfg.tau);
        let recon = svd::reconstruct_basis(&s, self.cfg.tau, tau2)?;

        let bases: [(&str, Matrix); 4] = [
            ("pod", full.v.leading_columns(k)),
            ("optimal_rrqr", svd::optimal_rrqr(&s, k)?),
            ("reconstruction", recon.basis.clone()),
            ("greedy", state.basis().clone()),
        ];
        let mut rep = Report::new("rbqr pod-compare");
        self.describe(&mut rep, &state, &g);
        rep.push_real("sigma_k_plus_1", sigma_next);
        let mut table = Table::new(&["method", "k", "err_2", "err_F", "err_max"]);
        let mut errs = Vec::new();
        for (name, q) in &bases {
            let e = projection_errors(&s, q, &self.exec)?;
            table.row(vec![
                name.to_string(),
                q.cols().to_string(),
                format!("{:.6e}", e.qr_err_2),
                format!("{:.6e}", e.qr_err_f),
                format!("{:.6e}", e.qr_err_max),
            ]);
            rep.push_real(&format!("{name}_2norm"), e.qr_err_2);
            rep.push_real(&format!("{name}_fnorm"), e.qr_err_f);
            rep.push_real(&format!("{name}_maxnorm"), e.qr_err_max);
            errs.push(e);
        }
        rep.table("projection errors", table);

        // Roundoff in any of these errors is of order eps ||S||_F.
        let floor = 100.0 * EPS * s.matrix().frobenius_norm();
        let close = |a: f64, b: f64, rel: f64| (a - b).abs() <= rel * a.abs().max(b.abs()) + floor;
        let (pod, rrqr, greedy_e) = (&errs[0], &errs[1], &errs[3]);
        let checks = [
            ("pod_2norm_le_greedy", pod.qr_err_2 <= greedy_e.qr_err_2 + floor),
            ("pod_fnorm_le_greedy", pod.qr_err_f <= greedy_e.qr_err_f + floor),
            ("pod_2norm_is_sigma_k_plus_1", close(pod.qr_err_2, sigma_next, 1e-10)),
            ("optimal_rrqr_2norm_is_sigma_k_plus_1", close(rrqr.qr_err_2, sigma_next, 1e-9)),
            ("greedy_maxnorm_is_r_k_plus_1", close(greedy_e.qr_err_max, g.final_sigma, 1e-10)),
            (
                "greedy_max_le_2_le_f",
                greedy_e.qr_err_max <= greedy_e.qr_err_2 + floor && greedy_e.qr_err_2 <= greedy_e.qr_err_f + floor,
            ),
        ];
        let mut passed = true;
        for (name, ok) in checks {
            rep.push(&format!("check.{name}"), pass_fail(ok));
            passed &= ok;
        }
        Ok(Outcome { report: rep, passed })
    }

    fn reconstruct(&self) -> Result<Outcome, CliError> {
        let s = self.training()?;
        let tau2 = self.cfg.reconstruct_tau2.unwrap_or(self.cfg.tau);
        let r = svd::reconstruct_basis(&s, self.cfg.tau, tau2)?;
        let e = projection_errors(&s, &r.basis, &self.exec)?;
        for &f in &self.cfg.output_formats {
            files::save_columns(&self.out(&format!("basis.{}", ext(f))), &r.basis, f)?;
        }
        let mut rep = Report::new("rbqr reconstruct");
        rep.push("n_rows", s.n_rows());
        rep.push("n_cols", s.n_cols());
        rep.push_real("tau1", self.cfg.tau);
        rep.push_real("tau2", tau2);
        rep.push("j", r.j);
        rep.push("k", r.k);
        rep.push("bracket_found", r.bracket_found);
        rep.push("tau_order_warning", r.tau_order_warning);
        rep.push_real("r22_2norm", r.r22_norm);
        rep.push_real("upper_bound", r.upper_bound());
        rep.push_real("err_2", e.qr_err_2);
        if r.tau_order_warning {
            rep.note("tau2 is below tau1; the bracket may be loose");
        }
        let ok = r.bracket_found && e.qr_err_2 <= r.upper_bound() + 1e-12 * max_norm(&s).max(1.0);
        rep.push("check.error_below_upper_bound", pass_fail(ok));
        Ok(Outcome { report: rep, passed: ok })
    }

    fn bench(&self) -> Result<Outcome, CliError> {
        let c = &self.cfg;
        let scaling = match c.bench_mode {
            Mode::Strong => bench::strong_scaling(self.training()?, c.bench_k, &c.bench_workers)?.0,
            Mode::Weak => bench::weak_scaling(c.bench_rows, c.bench_cols_per_worker, c.bench_k, &c.bench_workers, c.seed)?,
        };
        let path = self.out("timings.csv");
        fs::write(&path, scaling.csv()).map_err(|source| FileError::Io { path, source })?;
        let mut rep = Report::new(match c.bench_mode {
            Mode::Strong => "rbqr bench (strong scaling)",
            Mode::Weak => "rbqr bench (weak scaling)",
        });
        for p in &scaling.points {
            let key = |name: &str| format!("c{}.{name}", p.workers);
            rep.push_real(&key("t_pivot_c"), p.median_pivot);
            rep.push_real(&key("t_imgs"), p.median_imgs);
            rep.push_real(&key("run_time"), p.run_time);
            rep.push_real(&key("efficiency"), p.efficiency);
            rep.push_real(&key("speedup"), p.speedup);
            rep.push_real(&key("predicted_efficiency"), p.predicted_efficiency);
            rep.push_real(&key("pivot_spread"), p.pivot_spread);
            rep.push_real(&key("imgs_r_squared"), p.imgs_r_squared);
        }
        let identity = scaling.identity_max_rel();
        rep.push_real("timing_identity_max_rel", identity);
        let ok = identity <= TIMING_IDENTITY_TOL;
        rep.push("check.timing_identity", pass_fail(ok));
        rep.table("scaling (medians per iteration, seconds)", scaling.table());
        rep.note("efficiency and speedup depend on the machine and are reported, not checked");
        Ok(Outcome { report: rep, passed: ok })
    }
}
