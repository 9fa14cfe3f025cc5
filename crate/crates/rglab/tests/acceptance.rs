//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix3};
use rand::Rng;
use rayon::prelude::*;
use serde_json::Value;

use rglab_core::asymptotics::{
    asymptotic_fisher_covariance, char_poly_roots, gaussian_condition, independence_lhs, is_valid_correlation_structure,
    isserlis_pair_moments, INDEPENDENCE_TOLERANCE,
};
use rglab_core::correlation::{correlate_all, fisher, pairwise_moments, CorrelationVector};
use rglab_core::models::{sample_gaussian_dataset, sample_prior_fisher, synthetic_correlation_noise, GaussianSpec, PriorSpec};
use rglab_core::selection::{estimate_sigma_q, SigmaScale};
use rglab_core::SeedStream;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------------------
// helpers

fn rglab(args: &[&str], workers_env: Option<&str>) -> (i32, String, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rglab"));
    cmd.args(args).env_remove("RGLAB_WORKERS");
    if let Some(w) = workers_env {
        cmd.env("RGLAB_WORKERS", w);
    }
    let out = cmd.output().expect("spawn rglab");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap_or_default();
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("").split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_owned).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"));
    rows.iter().map(|r| r[i].parse::<f64>().expect("numeric cell")).collect()
}

/// All files in `dir` except the timestamped manifest, by name.
fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).into_iter().flatten().flatten() {
        let name = entry.file_name().to_string_lossy().into_owned();
        if name != "manifest.json" {
            files.insert(name, fs::read(entry.path()).unwrap());
        }
    }
    files
}

fn manifest_verifies(dir: &Path) -> bool {
    rglab::output::verify_manifest(dir).map(|bad| bad.is_empty()).unwrap_or(false)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample covariance of two series and its standard error.
fn cov_with_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len() as f64;
    let (ma, mb) = (mean(a), mean(b));
    let w: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
    let mw = mean(&w);
    let var = w.iter().map(|v| (v - mw) * (v - mw)).sum::<f64>() / (n - 1.0);
    (mw, (var / n).sqrt())
}

fn unit_triple(r1: f64, r2: f64, c: f64) -> Matrix3<f64> {
    Matrix3::new(1.0, c, r1, c, 1.0, r2, r1, r2, 1.0)
}

// ---------------------------------------------------------------------------
// criteria

fn discriminant() -> Outcome {
    let d = gaussian_condition(0.5, 0.9).unwrap().discriminant;
    let exact = (d + 0.00855).abs() <= 1e-12;
    // The published figure keeps two significant digits.
    let published = (d + 0.0085).abs() <= 0.5e-4 + 1e-12;
    outcome(exact && published, format!("discriminant(0.5, 0.9) = {d:.17e}; published -0.0085"))
}

fn theorem_one_construction() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for c in [0.1f64, 0.5, 0.9] {
        let rho2 = ((2.0 - c * c) / 2.0).sqrt();
        let expected = 1.0 - (1.0 + c * c / 2.0).sqrt();
        let roots = char_poly_roots(0.0, rho2, c).unwrap();
        let hit = roots.roots.iter().map(|z| (z.re - expected).abs() + z.im.abs()).fold(f64::INFINITY, f64::min);
        let invalid = !is_valid_correlation_structure(0.0, rho2, c).unwrap();
        pass &= hit <= 1e-10 && invalid;
        notes.push(format!("c={c}: root {expected:.12} (err {hit:.1e}), rejected={invalid}"));
    }
    outcome(pass, notes.join("; "))
}

fn isserlis_vs_monte_carlo() -> Outcome {
    let n = 1_000_000;
    let root = SeedStream::root(3);
    let worst = (0..50u64)
        .into_par_iter()
        .map(|case| {
            let stream = root.child("sigma", case);
            let mut rng = stream.rng();
            let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let sigma = a * a.transpose() + Matrix3::identity() * 0.05;
            let spec = GaussianSpec::new(DMatrix::from_iterator(3, 3, sigma.iter().copied())).unwrap();
            let data = sample_gaussian_dataset(&spec, n, &mut stream.child("data", 0).rng()).unwrap();
            let exact = isserlis_pair_moments(&sigma).unwrap().cross_covariances();
            let mc = pairwise_moments(&data, 0, 1).unwrap().cross_covariances();

            let (xi, xj, y) = (data.column(0), data.column(1), data.target());
            let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<f64>>();
            let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<f64>>();
            let rows = [sq(xi), sq(y), prod(xi, y)];
            let cols = [sq(xj), sq(y), prod(xj, y)];
            let mut worst: f64 = 0.0;
            for r in 0..3 {
                for c in 0..3 {
                    let (_, se) = cov_with_se(&rows[r], &cols[c]);
                    worst = worst.max(((mc[r][c] - exact[r][c]) / se).abs());
                }
            }
            worst
        })
        .reduce(|| 0.0, f64::max);
    outcome(worst < 5.0, format!("50 covariances x 9 entries at n = {n}: max |z| = {worst:.2} (limit 5)"))
}

fn delta_method_vs_monte_carlo() -> Outcome {
    let (r1, r2, c) = (0.5, 0.9, 0.3);
    let spec = GaussianSpec::correlation_triple(r1, r2, c).unwrap();
    let sigma4 = asymptotic_fisher_covariance(&spec).unwrap();
    let diag_ok = (0..2).all(|i| (sigma4[(i, i)] - 1.0).abs() <= 1e-9);

    let (n, reps) = (5000usize, 2000u64);
    let scale = ((n - 3) as f64).sqrt();
    let (f1, f2) = (fisher(r1).unwrap(), fisher(r2).unwrap());
    let root = SeedStream::root(4);
    let draws: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|t| {
            let data = sample_gaussian_dataset(&spec, n, &mut root.child("replicate", t).rng()).unwrap();
            let r = correlate_all(&data).unwrap();
            (scale * (fisher(r.values[0]).unwrap() - f1), scale * (fisher(r.values[1]).unwrap() - f2))
        })
        .collect();
    let (a, b): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    let (cov, se) = cov_with_se(&a, &b);
    let z = (cov - sigma4[(0, 1)]) / se;
    outcome(
        z.abs() < 5.0 && diag_ok,
        format!(
            "off-diagonal {:.6} vs MC {cov:.6} (se {se:.4}, z {z:.2}); unit diagonal: {diag_ok}",
            sigma4[(0, 1)]
        ),
    )
}

fn zero_set_equivalence() -> Outcome {
    let grid: Vec<f64> = (0..20).map(|i| -0.95 + 0.1 * i as f64).collect();
    // Deliberately non-unit variances: the condition must not depend on scale.
    let sd = [1.7, 0.6, 2.3];
    let mut checked = 0usize;
    let mut zeros = 0usize;
    let mut mismatches = 0usize;
    for &r1 in &grid {
        for &r2 in &grid {
            let q = gaussian_condition(r1, r2).unwrap();
            let mut cs = grid.clone();
            cs.extend(q.admissible_roots());
            for c in cs {
                if !is_valid_correlation_structure(r1, r2, c).unwrap() {
                    continue;
                }
                let corr = unit_triple(r1, r2, c);
                let sigma = Matrix3::from_fn(|i, j| corr[(i, j)] * sd[i] * sd[j]);
                let lhs = match isserlis_pair_moments(&sigma) {
                    Ok(m) => independence_lhs(&m),
                    // Singular boundary matrices can fail validation by rounding.
                    Err(_) => continue,
                };
                let quad = q.evaluate(c);
                let lhs_zero = lhs.abs() <= INDEPENDENCE_TOLERANCE;
                let quad_zero = quad.abs() <= INDEPENDENCE_TOLERANCE;
                checked += 1;
                zeros += lhs_zero as usize;
                mismatches += (lhs_zero != quad_zero) as usize;
            }
        }
    }
    outcome(
        mismatches == 0 && zeros > 0,
        format!("{checked} valid points, {zeros} on the zero set, {mismatches} disagreements"),
    )
}

fn figure_one(dir: &Path) -> Outcome {
    let out = dir.join("figure1");
    let (code, _, err) = rglab(&["figure1", "--seed", "1", "--workers", "1", "--out", out.to_str().unwrap()], None);
    if code != 0 {
        return outcome(false, format!("figure1 exited with {code}: {err}"));
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let ks = summary["normality"]["ks_distance"].as_f64().unwrap();
    let skew = summary["normality"]["skewness"].as_f64().unwrap();
    let (_, rows) = read_csv(&out.join("fisher_values.csv"));
    let total = summary["histogram"]["total"].as_u64().unwrap();
    let shape_ok = rows.len() == 20_000 && total == 20_000;
    outcome(
        ks < 0.02 && skew.abs() < 0.1 && shape_ok,
        format!("n=59 k=20000 u=100: ks = {ks:.5} (< 0.02), skewness = {skew:.5} (|.| < 0.1), rows = {}", rows.len()),
    )
}

fn figure_two(dir: &Path) -> Outcome {
    let out = dir.join("figure2-a");
    let (code, _, err) = rglab(&["figure2", "--seed", "1", "--workers", "1", "--out", out.to_str().unwrap()], None);
    if code != 0 {
        return outcome(false, format!("figure2 exited with {code}: {err}"));
    }
    let (header, rows) = read_csv(&out.join("curves.csv"));
    let n = column(&header, &rows, "n");
    let d = column(&header, &rows, "d_mean");
    let d_sd = column(&header, &rows, "d_sd");
    let c = column(&header, &rows, "c_mean");
    let c_sd = column(&header, &rows, "c_sd");
    let mode_ok = rows.iter().all(|r| r[5] == "paper_literal");

    let grid_ok = n == [600.0, 800.0, 1000.0, 1200.0];
    let max_sd = d_sd.iter().chain(&c_sd).copied().fold(0.0, f64::max);
    let sd_ok = max_sd < 0.042;
    let increasing = d.windows(2).all(|w| w[0] < w[1]);
    let pessimistic = c.iter().zip(&d).all(|(c, d)| c < d) && c.iter().all(|&c| c < 0.05);
    let d_last = *d.last().unwrap_or(&f64::NAN);
    let band = (0.50..=0.75).contains(&d_last);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    outcome(
        grid_ok && mode_ok && sd_ok && increasing && pessimistic && band,
        format!(
            "(a) max SD {max_sd:.4} < 0.042: {sd_ok}; (b) d_mean [{}] increasing: {increasing}; \
             (c) c_mean [{}] below d_mean and 0.05: {pessimistic}, d_mean(1200) in [0.50, 0.75]: {band}",
            fmt(&d),
            fmt(&c)
        ),
    )
}

fn sigma_q_recovery() -> Outcome {
    let (sigma_q, n, k) = (0.1, 103, 100_000);
    let stream = SeedStream::root(8);
    let truth = sample_prior_fisher(&PriorSpec::new(sigma_q, k).unwrap(), &mut stream.child("prior", 0).rng());
    let noisy = synthetic_correlation_noise(&truth, n, &mut stream.child("noise", 0).rng()).unwrap();
    let r = CorrelationVector { values: noisy.to_correlations(), n: Some(n), clamped: Vec::new() };
    let est = estimate_sigma_q(&r, SigmaScale::Fisher).unwrap();
    outcome(
        (est.value - 0.1).abs() <= 0.005,
        format!("sigma_q_hat = {:.5} (target 0.1 +- 0.005, W = {:.5})", est.value, est.w),
    )
}

fn determinism(dir: &Path) -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let runs: [(&str, &str, Vec<&str>, Option<&str>); 5] = [
        ("figure1", "figure1-b", vec!["--workers", "1"], None),
        ("figure1", "figure1-c", vec![], Some("4")),
        ("figure2", "figure2-b", vec!["--workers", "1"], None),
        ("figure2", "figure2-c", vec!["--workers", "4"], None),
        ("figure2", "figure2-d", vec![], Some("4")),
    ];
    for (cmd, name, extra, env) in runs {
        let out: PathBuf = dir.join(name);
        let mut args = vec![cmd, "--seed", "1", "--out", out.to_str().unwrap()];
        args.extend(extra.iter().copied());
        let (code, _, err) = rglab(&args, env);
        if code != 0 {
            return outcome(false, format!("{cmd} into {name} exited with {code}: {err}"));
        }
        let reference = dir.join(if cmd == "figure1" { "figure1" } else { "figure2-a" });
        let (a, b) = (outputs(&reference), outputs(&out));
        let same = !a.is_empty() && a == b;
        let verified = manifest_verifies(&out) && manifest_verifies(&reference);
        pass &= same && verified;
        let workers = env.map(|w| format!("RGLAB_WORKERS={w}")).unwrap_or_else(|| extra.join(" "));
        notes.push(format!("{name} ({workers}): {} files identical={same}, manifest ok={verified}", b.len()));
    }
    outcome(pass, notes.join("; "))
}

fn main() {
    let started = Instant::now();
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = tmp.path();

    let criteria: Vec<Criterion> = vec![
        ("discriminant reproduction", Box::new(discriminant)),
        ("negative-eigenvalue construction", Box::new(theorem_one_construction)),
        ("Isserlis moments vs Monte Carlo", Box::new(isserlis_vs_monte_carlo)),
        ("delta-method covariance vs Monte Carlo", Box::new(delta_method_vs_monte_carlo)),
        ("independence zero-set equivalence", Box::new(zero_set_equivalence)),
        ("figure 1 normality", Box::new(|| figure_one(dir))),
        ("figure 2 curves", Box::new(|| figure_two(dir))),
        ("sigma_q recovery", Box::new(sigma_q_recovery)),
        ("determinism across runs and workers", Box::new(|| determinism(dir))),
    ];

    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {}: {name} [{:.1}s] {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
