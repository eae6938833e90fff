//! Acceptance run: one line per criterion.
//!
//! `cargo test -p rbqr --test acceptance` runs everything; trailing numeric
//! arguments (`-- 3 8`) select criteria. Exits nonzero only when a hard
//! criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fmt::Write as _;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use common::{geometric, oracle, rel_diff, rng, snaps};
use rbqr::bench::strong_scaling;
use rbqr::exec::{Threads, WallClock};
use rbqr::files::{self, Format};
use rbqr::random::gaussian_matrix;
use rbqr_core::eim::build_eim;
use rbqr_core::estimators::{enrich, projection_errors, validate};
use rbqr_core::exec::{NoClock, Serial};
use rbqr_core::greedy::{greedy_build, GreedyOptions, GreedyReport, GreedyState};
use rbqr_core::matrix::{Matrix, SnapshotMatrix};
use rbqr_core::mgs::mgs_pivoted_qr;
use rbqr_core::models::{self, Model};
use rbqr_core::ortho::DEFAULT_KAPPA;
use rbqr_core::scalar::{c64, C64};
use rbqr_core::svd::{self, optimal_rrqr, pod_basis, reconstruct_basis};

const EPS: f64 = f64::EPSILON;

enum Verdict {
    Pass(String),
    Fail(String),
    /// Target missed for reasons outside the code; does not gate the exit code.
    SoftFail(String),
}

type Check = fn() -> Verdict;

fn check(ok: bool, detail: String) -> Verdict {
    if ok { Verdict::Pass(detail) } else { Verdict::Fail(detail) }
}

fn run(s: &Matrix, tau: f64, k_max: usize) -> (GreedyState, GreedyReport) {
    greedy_build(snaps(s.clone()), &GreedyOptions::new(tau, k_max), &Serial::default(), &NoClock).unwrap()
}

fn chirp(grid: usize, freqs: &[f64], dampings: &[f64]) -> SnapshotMatrix {
    let grid = models::linspace(0.0, 10.0, grid);
    let params = models::tensor_grid(freqs, dampings);
    models::build_snapshot_matrix(Model::DampedChirp, &params, &grid, &Serial::default()).unwrap()
}

/// Frequencies in [1, 3]. On a uniform grid the residuals of f and 4 - f
/// tie exactly, and MGS and the greedy may break the tie differently.
fn warped_freqs(n: usize) -> Vec<f64> {
    models::linspace(0.0, 1.0, n).iter().map(|t| 1.0 + 2.0 * t.powf(1.3)).collect()
}

fn structured() -> Vec<Matrix> {
    let mut g = rng(121);
    let freqs = warped_freqs(8);
    let grid = models::linspace(0.0, 10.0, 1200);
    let bumps = models::tensor_grid(&models::linspace(2.0, 8.0, 10), &models::linspace(0.5, 1.5, 4));
    vec![
        Matrix::identity(6),
        Matrix::diagonal(5, 5, &[5.0, 4.0, 3.0, 2.0, 1.0]),
        chirp(1200, &freqs, &models::linspace(0.0, 0.5, 5)).into_matrix(),
        models::build_snapshot_matrix(Model::GaussianBump, &bumps, &grid, &Serial::default()).unwrap().into_matrix(),
        common::low_rank(40, 60, 7, &mut g),
        common::with_spectrum(40, 50, &geometric(40, 1.0, 0.5), &mut g),
        common::with_spectrum(30, 30, &geometric(30, 1e3, 0.8), &mut g),
        Matrix::from_fn(20, 40, |i, j| c64(1.0 / (i + j + 1) as f64, 0.0)),
        Matrix::from_fn(25, 35, |i, j| rbqr_core::scalar::cis(0.3 * (i * j) as f64)),
        Matrix::from_fn(30, 60, |i, j| c64(((i + 1) as f64).powf(-(j as f64) / 20.0), (j as f64 * 0.1).sin())),
    ]
}

/// 50 random complex Gaussian matrices up to 100 x 400, then the structured set.
fn corpus() -> Vec<Matrix> {
    let mut out: Vec<Matrix> = (0..50u64)
        .map(|i| {
            let rows = 5 + (i as usize * 37) % 96;
            let cols = 5 + (i as usize * 151) % 396;
            gaussian_matrix(rows, cols, 1000 + i)
        })
        .collect();
    out.extend(structured());
    out
}

fn max_col_norm(s: &Matrix) -> f64 {
    s.columns().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max)
}

/// `r -= q (q^H r)`.
fn deflate(r: &mut [C64], q: &[C64]) {
    let c: C64 = q.iter().zip(r.iter()).map(|(a, b)| a.conj() * b).sum();
    for (x, y) in r.iter_mut().zip(q) {
        *x -= c * y;
    }
}

fn residual(s: &Matrix, q: &Matrix) -> Matrix {
    s.sub(&q.mul(&q.adjoint_mul(s)))
}

fn equivalence() -> Verdict {
    let t0 = Instant::now();
    let (mut pivot_mismatch, mut worst) = (Vec::new(), 0.0f64);
    let all = corpus();
    for (n, s) in all.iter().enumerate() {
        let limit = s.rows().min(s.cols());
        let (state, _) = run(s, 1e-10, limit);
        let mgs = mgs_pivoted_qr(&snaps(s.clone()), 1e-10, limit).unwrap();
        if state.pivots() != mgs.pivots.as_slice() {
            pivot_mismatch.push(n);
            continue;
        }
        let sn = snaps(s.clone());
        for ((a, b), &p) in state.r_diag().iter().zip(mgs.r_diag()).zip(&mgs.pivots) {
            let floor = 100.0 * EPS * sn.col_norms_sq()[p].sqrt();
            let excess = ((a - b).abs() - floor).max(0.0) / a.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(excess);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    check(
        pivot_mismatch.is_empty() && worst <= 1e-12 && secs < 30.0,
        format!(
            "{} matrices, pivot mismatches {:?}, worst R(j,j) excess {worst:.1e} (<= 1e-12), {secs:.1} s (< 30 s)",
            all.len(),
            pivot_mismatch
        ),
    )
}

fn greedy_error_is_max_residual() -> Verdict {
    let mut worst = 0.0f64;
    let mut steps = 0usize;
    let all = corpus();
    for s in &all {
        let limit = s.rows().min(s.cols());
        let (state, report) = run(s, 1e-10, limit);
        let floor = 100.0 * EPS * max_col_norm(s);
        let mut r: Vec<Vec<C64>> = s.columns().map(|c| c.to_vec()).collect();
        for k in 0..=state.k() {
            if k > 0 {
                let q = state.basis().col(k - 1);
                r.iter_mut().for_each(|c| deflate(c, q));
            }
            let direct = r.iter().map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()).fold(0.0, f64::max);
            let greedy = report.error_after(k).unwrap();
            worst = worst.max(((direct - greedy).abs() - floor).max(0.0) / greedy.max(f64::MIN_POSITIVE));
            steps += 1;
        }
    }
    check(worst <= 1e-10, format!("{} matrices, {steps} basis sizes, worst relative excess {worst:.1e} (<= 1e-10)", all.len()))
}

fn product_identity() -> Verdict {
    let mut g = rng(131);
    let cases = [
        gaussian_matrix(30, 50, 131),
        common::with_spectrum(30, 40, &geometric(30, 2.0, 0.85), &mut g),
        chirp(400, &models::linspace(1.0, 3.0, 9), &models::linspace(0.0, 0.5, 6)).into_matrix(),
    ];
    let mut worst = 0.0f64;
    for s in &cases {
        let (state, report) = run(s, 1e-9, 21.min(s.cols()));
        for k in 0..20.min(state.k()) {
            let sigma = oracle::singular_values(&s.select_columns(&state.pivots()[..=k]));
            let lhs: f64 = sigma.iter().product();
            let rhs: f64 = state.r_diag()[..=k].iter().product();
            let prev: f64 = state.r_diag()[..k].iter().product();
            worst = worst.max(rel_diff(lhs, rhs)).max(rel_diff(lhs / prev, report.sigma_hat[k]));
        }
    }
    check(worst <= 1e-8, format!("k <= 20 on {} matrices, worst relative difference {worst:.1e} (<= 1e-8)", cases.len()))
}

fn pod_tails() -> Verdict {
    let mut g = rng(141);
    let cases = [
        gaussian_matrix(30, 50, 141),
        gaussian_matrix(60, 20, 142),
        common::with_spectrum(40, 60, &geometric(40, 10.0, 0.7), &mut g),
        chirp(300, &models::linspace(1.0, 3.0, 10), &models::linspace(0.0, 0.5, 6)).into_matrix(),
    ];
    let (mut worst, mut count) = (0.0f64, 0);
    for a in &cases {
        let s = svd::svd(a).unwrap();
        for k in [1, 3, 7, 12] {
            // Tails at roundoff level measure nothing but roundoff.
            if s.sigma[k] < 1e-6 * s.sigma[0] || s.sigma[k - 1] <= s.sigma[k] * (1.0 + 1e-6) {
                continue;
            }
            let tau = 0.5 * (s.sigma[k - 1] + s.sigma[k]);
            let pod = pod_basis(&snaps(a.clone()), tau).unwrap();
            if pod.k != k {
                return Verdict::Fail(format!("tau between sigma_{k} and sigma_{} gave k = {}", k + 1, pod.k));
            }
            let e = residual(a, &pod.basis);
            let tail: f64 = s.sigma[k..].iter().map(|x| x * x).sum();
            worst = worst.max(rel_diff(e.frobenius_norm().powi(2), tail));
            worst = worst.max(rel_diff(oracle::spectral_norm(&e), s.sigma[k]));
            count += 1;
        }
    }
    check(worst <= 1e-10, format!("{count} truncations, worst relative difference {worst:.1e} (<= 1e-10)"))
}

fn trailing_block_identities() -> Verdict {
    let mut g = rng(151);
    let cases = [
        gaussian_matrix(30, 80, 151),
        common::with_spectrum(40, 60, &geometric(40, 1.0, 0.7), &mut g),
        chirp(300, &warped_freqs(8), &models::linspace(0.0, 0.5, 5)).into_matrix(),
    ];
    let (mut norm_err, mut col_err, mut order_ok, mut count) = (0.0f64, 0.0f64, true, 0);
    for s in &cases {
        let sn = snaps(s.clone());
        let full = mgs_pivoted_qr(&sn, 1e-300, s.rows().min(s.cols())).unwrap();
        let (greedy, _) = run(s, 1e-10, 20);
        for k in [1, 5, 12, 20] {
            // Q from the greedy, R from the independent MGS factorization.
            if greedy.pivots()[..k] != full.pivots[..k] {
                return Verdict::Fail(format!("pivot sequences differ before k = {k}"));
            }
            let r22 = full.trailing_block(k);
            let report = projection_errors(&sn, &greedy.basis().leading_columns(k), &Serial::default())
                .unwrap()
                .with_trailing_block(&r22)
                .unwrap();
            let floor = 100.0 * EPS * s.frobenius_norm();
            let excess = |a: f64, b: f64| ((a - b).abs() - floor).max(0.0) / a.max(b).max(f64::MIN_POSITIVE);
            norm_err = norm_err.max(excess(report.qr_err_2, oracle::spectral_norm(&r22)));
            norm_err = norm_err.max(excess(report.qr_err_f, r22.frobenius_norm()));
            for i in 0..s.cols() {
                let tail = (k..full.k()).map(|j| full.r.get(j, i).norm_sqr()).sum::<f64>().sqrt();
                let floor = 100.0 * EPS * sn.col_norms_sq()[i].sqrt();
                let e = report.per_column[i];
                col_err = col_err.max(((e - tail).abs() - floor).max(0.0) / tail.max(f64::MIN_POSITIVE));
            }
            let slack = 1e-12 * report.qr_err_f;
            order_ok &= report.qr_err_max <= report.qr_err_2 + slack && report.qr_err_2 <= report.qr_err_f + slack;
            count += 1;
        }
    }
    check(
        norm_err <= 1e-10 && col_err <= 1e-10 && order_ok,
        format!(
            "{count} cases, ||R22|| excess {norm_err:.1e}, per-column excess {col_err:.1e} (<= 1e-10), max <= 2 <= F {}",
            if order_ok { "holds" } else { "violated" }
        ),
    )
}

fn optimal_rrqr_check() -> Verdict {
    let a = gaussian_matrix(40, 60, 161);
    let sigma = oracle::singular_values(&a);
    let mut worst = 0.0f64;
    for k in [1, 5, 10, 20, 39] {
        let q = optimal_rrqr(&snaps(a.clone()), k).unwrap();
        worst = worst.max(rel_diff(oracle::spectral_norm(&residual(&a, &q)), sigma[k]));
    }
    let mut g = rng(162);
    let mut exact = 0.0f64;
    for k in [1, 4, 9] {
        let b = common::low_rank(30, 45, k, &mut g);
        let q = optimal_rrqr(&snaps(b.clone()), k).unwrap();
        exact = exact.max(oracle::spectral_norm(&residual(&b, &q)) / oracle::spectral_norm(&b));
    }
    check(
        worst <= 1e-9 && exact <= 1e-10,
        format!("||S - QQ^H S||_2 vs sigma_(k+1): {worst:.1e} (<= 1e-9); exact rank: {exact:.1e} (<= 1e-10)"),
    )
}

fn reconstruction_check() -> Verdict {
    let mut g = rng(171);
    let a = common::low_rank(40, 30, 3, &mut g);
    let sigma = oracle::singular_values(&a);
    let r = reconstruct_basis(&snaps(a.clone()), 1e-12, 1e-12).unwrap();
    let full = oracle::spectral_norm(&residual(&a, &r.basis)) / sigma[0];
    let mut exact = 0.0f64;
    let mut sizes_ok = (r.j, r.k) == (3, 3);
    for k in 1..3 {
        let tau2 = 0.5 * (sigma[k - 1] + sigma[k]);
        let r = reconstruct_basis(&snaps(a.clone()), 1e-12, tau2).unwrap();
        sizes_ok &= r.k == k;
        exact = exact.max(rel_diff(oracle::spectral_norm(&residual(&a, &r.basis)), sigma[k]));
    }
    let b = common::with_spectrum(60, 80, &geometric(60, 1.0, 0.6), &mut g);
    let sigma = svd::singular_values(&b).unwrap();
    let mut sandwich = true;
    for (tau1, tau2) in [(1e-3, 1e-2), (1e-5, 1e-4), (1e-6, 3e-3)] {
        let r = reconstruct_basis(&snaps(b.clone()), tau1, tau2).unwrap();
        let err = svd::spectral_norm(&residual(&b, &r.basis)).unwrap();
        sandwich &= r.bracket_found && sigma[r.k] <= err + 1e-12 && err <= r.upper_bound() + 1e-12;
    }
    check(
        sizes_ok && full <= 1e-9 && exact <= 1e-9 && sandwich,
        format!(
            "exact rank: sizes {}, full-rank error {full:.1e}, truncated vs sigma_(k+1) {exact:.1e} (<= 1e-9); sandwich {}",
            if sizes_ok { "match" } else { "differ" },
            if sandwich { "holds" } else { "violated" }
        ),
    )
}

fn recurrence_vs_direct() -> Verdict {
    let s = chirp(200, &models::linspace(1.0, 3.0, 25), &models::linspace(0.0, 0.5, 20));
    let mut state = GreedyState::new(s.clone());
    let mut r: Vec<Vec<C64>> = s.matrix().columns().map(|c| c.to_vec()).collect();
    let (tau, limit) = (1e-8, 200);
    let (mut worst, mut iterations) = (0.0f64, 0);
    loop {
        let outcome = state.search(&Serial::default(), GreedyOptions::new(tau, limit).rebase_ratio);
        for (i, c) in r.iter().enumerate() {
            let direct = c.iter().map(|z| z.norm_sqr()).sum::<f64>();
            let ratio = (state.residual_sq(i).unwrap() - direct).abs() / s.col_norms_sq()[i];
            worst = worst.max(ratio);
        }
        if outcome.best.value < tau * tau || state.k() >= limit {
            break;
        }
        if state.extend(outcome.best.index, DEFAULT_KAPPA).is_err() {
            break;
        }
        let q = state.basis().col(state.k() - 1);
        r.iter_mut().for_each(|c| deflate(c, q));
        iterations += 1;
    }
    check(
        worst <= 1e-10,
        format!("200 x 500 chirp, {iterations} iterations, worst |recurrence - direct| / ||s||^2 {worst:.1e} (<= 1e-10)"),
    )
}

fn worker_determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let s = chirp(2000, &models::linspace(1.0, 3.0, 80), &models::linspace(0.0, 0.5, 50));
    let mut s = Some(s);
    let mut reference: Option<(Vec<u8>, Vec<u8>)> = None;
    let mut k = 0;
    for workers in [1, 2, 4, 8] {
        let (state, report) = greedy_build(
            s.take().unwrap(),
            &GreedyOptions::new(1e-8, 2000),
            &Threads::new(workers),
            &WallClock::new(),
        )
        .unwrap();
        k = state.k();
        let (basis_path, pivot_path) = (dir.path().join(format!("q{workers}.npy")), dir.path().join(format!("p{workers}.txt")));
        files::save_columns(&basis_path, state.basis(), Format::Npy).unwrap();
        files::save_indices(&pivot_path, &report.pivots, Format::Text).unwrap();
        let bytes = (std::fs::read(&basis_path).unwrap(), std::fs::read(&pivot_path).unwrap());
        match &reference {
            None => reference = Some(bytes),
            Some(r) if *r != bytes => return Verdict::Fail(format!("{workers} workers wrote different basis or pivot files")),
            Some(_) => {}
        }
        s = Some(state.into_parts().0);
    }
    Verdict::Pass(format!("2000 x 4000 chirp, k = {k}, basis and pivot files byte-identical for 1, 2, 4, 8 workers"))
}

fn orthogonality() -> Verdict {
    // Rank-550 product with geometrically decaying factor columns: late
    // pivots are nearly dependent on the basis.
    let mut a = gaussian_matrix(5000, 550, 181);
    a.scale_columns(&geometric(550, 1.0, 0.96));
    let s = a.mul(&gaussian_matrix(550, 2000, 182));
    drop(a);
    let (state, report) =
        greedy_build(snaps(s), &GreedyOptions::new(1e-11, 500), &Threads::new(1), &WallClock::new()).unwrap();
    let defect = state.basis().orthonormality_defect();
    check(
        state.k() == 500 && defect <= 1e-13,
        format!(
            "5000 x 2000, k = {}, max |Q^H Q - I| = {defect:.1e} (<= 1e-13), final sigma {:.1e}, mean sweeps {:.2}",
            state.k(),
            report.final_sigma,
            report.mean_sweeps()
        ),
    )
}

fn strong_scaling_check() -> Verdict {
    let s = SnapshotMatrix::new(gaussian_matrix(100_000, 2000, 191)).unwrap();
    let (scaling, s) = match strong_scaling(s, 100, &[1, 2, 4]) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    drop(s);
    let identity = scaling.identity_max_rel();
    let four = scaling.points.last().unwrap();
    let r2 = scaling.points.iter().map(|p| p.imgs_r_squared).fold(f64::INFINITY, f64::min);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut detail = String::new();
    let _ = write!(
        detail,
        "N = 1e5, M = 2000, k = 100: timing identity max {:.2}% (<= 1%), speedup at 4 workers {:.2} (>= 2.5), \
         E_4 {:.3} vs predicted {:.3}, IMGS time linear in j R^2 {r2:.3}, {cores} core(s) available",
        100.0 * identity,
        four.speedup,
        four.efficiency,
        four.predicted_efficiency,
    );
    if identity > 0.01 {
        Verdict::Fail(detail)
    } else if four.speedup < 2.5 {
        Verdict::SoftFail(detail)
    } else {
        Verdict::Pass(detail)
    }
}

fn chirp_end_to_end() -> Verdict {
    let params = |nf, nd| models::tensor_grid(&models::linspace(1.0, 3.0, nf), &models::linspace(0.0, 0.5, nd));
    let grid = models::linspace(0.0, 10.0, 2000);
    let build = |p: &[[f64; 2]]| models::build_snapshot_matrix(Model::DampedChirp, p, &grid, &Serial::default()).unwrap();
    let tau = 1e-8;
    let opts = GreedyOptions::new(tau, 500);
    let exec = Threads::new(1);
    let clock = WallClock::new();
    let (mut state, mut report) = greedy_build(build(&params(25, 20)), &opts, &exec, &clock).unwrap();
    let k0 = state.k();
    let dense = build(&params(73, 58));
    let outcome = enrich(&mut state, &mut report, &dense, &opts, 2, &exec, &clock).unwrap();
    let passed = outcome.passed && validate(state.basis(), &dense, tau, &exec).unwrap().pass;

    let op = build_eim(state.basis()).unwrap();
    let sigma_k = report.final_sigma;
    let mut eim_max = 0.0f64;
    let training = state.snapshots();
    for i in 0..training.n_cols() {
        let col = training.column(i);
        let approx = op.interpolate(state.basis(), &op.samples(col)).unwrap();
        let e = col.iter().zip(&approx).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        eim_max = eim_max.max(e);
    }
    let lebesgue = op.lebesgue_constant().unwrap();
    check(
        k0 < 80 && passed && outcome.rounds <= 2 && eim_max <= 10.0 * sigma_k,
        format!(
            "N = 2000, M = 500: k = {k0} (< 80); 73 x 58 validation {} after {} enrichment round(s), k = {}; \
             EIM max error {eim_max:.1e} vs 10 sigma_k = {:.1e}, Lebesgue {lebesgue:.1}",
            if passed { "passes" } else { "fails" },
            outcome.rounds,
            state.k(),
            10.0 * sigma_k
        ),
    )
}

fn main() {
    let criteria: [(&str, Check); 12] = [
        ("greedy and MGS pivoted QR agree", equivalence),
        ("greedy error is the largest direct residual", greedy_error_is_max_residual),
        ("pivot singular values multiply to R(j,j)", product_identity),
        ("POD error equals the singular value tail", pod_tails),
        ("projection error equals the trailing R block", trailing_block_identities),
        ("optimal RRQR", optimal_rrqr_check),
        ("basis reconstruction", reconstruction_check),
        ("residual recurrence", recurrence_vs_direct),
        ("worker-count determinism", worker_determinism),
        ("orthonormality at k = 500", orthogonality),
        ("strong scaling", strong_scaling_check),
        ("chirp build, validation, enrichment and EIM", chirp_end_to_end),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (mut hard, mut soft, mut passed) = (0, 0, 0);
    panic::set_hook(Box::new(|_| {}));
    for (n, (name, f)) in criteria.iter().enumerate() {
        let id = n + 1;
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let verdict = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => {
                passed += 1;
                ("PASS", d)
            }
            Verdict::Fail(d) => {
                hard += 1;
                ("FAIL", d)
            }
            Verdict::SoftFail(d) => {
                soft += 1;
                ("FAIL [soft]", d)
            }
        };
        println!("{tag:<11} {id:>2}  {name}: {detail} [{secs:.1} s]");
    }
    println!("acceptance: {passed} passed, {hard} failed, {soft} failed soft");
    if hard > 0 {
        std::process::exit(1);
    }
}
