//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line; the
//! process exits non-zero when any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use aesf::closedform::{aesf, esf_exact, linspace, AesfEvaluator, AesfRequest};
use aesf::estimators::{chatterjee_xi, kendall_tau};
use aesf::models::{replicate_rng, sample_with};
use aesf::numerics::ncdf;
use aesf::sensitivity::{esf_mc, sf, sf_distribution, variance_sf_expansion, McEstimate};
use aesf::{Dataset, FunctionalId, Law, Link, ModelSpec, OuterMap, Point, Transform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x5EED_AE5F;

/// Sub-check results of one criterion.
#[derive(Default)]
struct Checks {
    failed: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        let what = what.into();
        if ok {
            self.notes.push(what);
        } else {
            self.failed.push(what);
        }
    }

    fn within_se(&mut self, e: &McEstimate, target: f64, what: &str) {
        let ok = (e.value - target).abs() <= 4.0 * e.std_error;
        self.check(
            ok,
            format!("{what}: mc {:.6} se {:.2e} target {:.6}", e.value, e.std_error, target),
        );
    }
}

fn gaussian() -> ModelSpec {
    ModelSpec::BivariateGaussian { rho: 0.7 }
}

fn tau_gaussian() -> f64 {
    2.0 / PI * 0.7f64.asin()
}

fn criterion_1(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut worst_mean, mut worst_var) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(2..=200);
        let loc: f64 = rng.random_range(-5.0..5.0);
        let scale: f64 = rng.random_range(0.1..3.0);
        let xs: Vec<f64> = (0..n).map(|_| loc + scale * (rng.random::<f64>() - 0.5)).collect();
        let ds = Dataset::univariate(xs.clone()).unwrap();
        let x: f64 = rng.random_range(-10.0..10.0);
        let mean = xs.iter().sum::<f64>() / n as f64;
        let a = sf(FunctionalId::Mean, &ds, Point::univariate(x)).unwrap();
        worst_mean = worst_mean.max((a - (x - mean)).abs() / (x - mean).abs().max(1.0));
        let v = sf(FunctionalId::Variance, &ds, Point::univariate(x)).unwrap();
        let e = variance_sf_expansion(&ds, x).unwrap();
        worst_var = worst_var.max((v - e).abs() / e.abs().max(1.0));
    }
    c.check(worst_mean <= 1e-10, format!("mean SF worst rel err {worst_mean:.1e}"));
    c.check(worst_var <= 1e-10, format!("variance SF worst rel err {worst_var:.1e}"));
}

fn criterion_2(c: &mut Checks) {
    let n01 = ModelSpec::UnivariateNormal { mu: 0.0, sigma: 1.0 };
    for x in [0.0, 1.0, 2.0] {
        let e = esf_mc(FunctionalId::Variance, &n01, 50, Point::univariate(x), 200_000, SEED).unwrap();
        let exact = esf_exact(FunctionalId::Variance, &n01, x, 50).unwrap();
        c.within_se(&e, exact, &format!("variance x={x}"));
    }
    let u = ModelSpec::UniformMax { theta: 1.0 };
    for x in [0.5, 0.9, 1.0] {
        let e = esf_mc(FunctionalId::UniformMax, &u, 10, Point::univariate(x), 200_000, SEED).unwrap();
        let exact = esf_exact(FunctionalId::UniformMax, &u, x, 10).unwrap();
        c.within_se(&e, exact, &format!("uniform_max x={x}"));
    }
}

fn criterion_3(c: &mut Checks) {
    let g = gaussian();
    let req = AesfRequest { functional: FunctionalId::Kendall, model: g, point: Point::bivariate(0.0, 0.0) };
    let closed = aesf(&req).unwrap();
    let stated = tau_gaussian();
    c.check(
        (closed - stated).abs() <= 1e-8,
        format!("closed form at (0,0) = {closed:.9} vs (2/pi)asin(0.7) = {stated:.9}"),
    );
    let e = esf_mc(FunctionalId::Kendall, &g, 1600, Point::bivariate(0.0, 0.0), 10_000, SEED).unwrap();
    c.within_se(&e, closed, "esf_mc n=1600 vs closed form at (0,0)");
    let xs = linspace(-3.0, 3.0, 61);
    let grid = AesfEvaluator::new(FunctionalId::Kendall, &g).unwrap().grid(&xs, &xs).unwrap();
    let max = grid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    c.check(max <= 3.0, format!("max |AESF| on figure-1 grid = {max:.4}"));
}

fn criterion_4(c: &mut Checks) {
    let ind = ModelSpec::IndependentProduct {
        x_law: Law::standard_normal(),
        y_law: Law::Uniform { lo: 0.0, hi: 1.0 },
    };
    let ev = AesfEvaluator::new(FunctionalId::Spearman, &ind).unwrap();
    let (xs, ys) = (linspace(-2.0, 2.0, 9), linspace(0.05, 0.95, 9));
    let mut worst = 0.0f64;
    for &x in &xs {
        for &y in &ys {
            let want = 3.0 * (2.0 * ncdf(x) - 1.0) * (2.0 * y - 1.0);
            worst = worst.max((ev.eval(Point::bivariate(x, y)).unwrap() - want).abs());
        }
    }
    c.check(worst <= 1e-8, format!("9x9 independence grid max err {worst:.1e}"));
    for (x, y) in [(xs[1], ys[2]), (xs[4], ys[4]), (xs[7], ys[6])] {
        let p = Point::bivariate(x, y);
        let e = esf_mc(FunctionalId::Spearman, &ind, 1600, p, 4000, SEED).unwrap();
        c.within_se(&e, ev.eval(p).unwrap(), &format!("mc ({x:.2},{y:.2})"));
    }
    let g = AesfEvaluator::new(FunctionalId::Spearman, &gaussian()).unwrap();
    let fig = linspace(-3.0, 3.0, 61);
    let surf = g.grid(&fig, &fig).unwrap();
    let (lo, hi) = surf.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    c.check(lo >= -12.0 && hi <= 18.0, format!("gaussian surface in [{lo:.3}, {hi:.3}]"));
}

fn criterion_5(c: &mut Checks) {
    let ind = ModelSpec::IndependentProduct {
        x_law: Law::Uniform { lo: 0.0, hi: 1.0 },
        y_law: Law::standard_normal(),
    };
    let ev = AesfEvaluator::new(FunctionalId::Chatterjee, &ind).unwrap();
    let (xs, ys) = (linspace(0.1, 0.9, 9), linspace(-2.0, 2.0, 9));
    let surf = ev.grid(&xs, &ys).unwrap();
    let worst = surf.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    c.check(worst <= 1e-8, format!("9x9 independence grid max |AESF| {worst:.1e}"));
    for (x, y) in [(0.2, -1.0), (0.5, 0.0), (0.8, 1.5)] {
        let e = esf_mc(FunctionalId::Chatterjee, &ind, 1600, Point::bivariate(x, y), 10_000, SEED).unwrap();
        c.within_se(&e, 0.0, &format!("mc ({x},{y})"));
    }
    let pts = [(0.2, 0.7), (0.5, 0.5), (0.8, 0.3)];
    let mut errs = Vec::new();
    for sigma in [0.1, 0.01, 0.001] {
        let m = ModelSpec::AdditiveNoise {
            x_law: Law::Uniform { lo: 0.0, hi: 1.0 },
            link: Link::Linear { slope: 1.0 },
            noise_sigma: sigma,
        };
        let ev = AesfEvaluator::new(FunctionalId::Chatterjee, &m).unwrap();
        let worst = pts
            .iter()
            .map(|&(x, y)| (ev.eval(Point::bivariate(x, y)).unwrap() + 6.0 * (x - y).abs()).abs())
            .fold(0.0f64, f64::max);
        errs.push(worst);
    }
    c.check(
        errs[2] <= 0.05 && errs[0] > errs[1] && errs[1] > errs[2],
        format!("noiseless limit errs {:.1e} {:.1e} {:.1e}", errs[0], errs[1], errs[2]),
    );
}

fn criterion_6(c: &mut Checks) {
    let n01 = ModelSpec::UnivariateNormal { mu: 0.0, sigma: 1.0 };
    let configs = [
        (FunctionalId::PhiLinear { g: Transform::Identity, phi: OuterMap::Sine }, 1.0, 1.0, "identity/sine"),
        // Corollary algebra: (x² − E X²)·2·E X² at x = 2 is 6.
        (FunctionalId::PhiLinear { g: Transform::Square, phi: OuterMap::Square }, 2.0, 6.0, "square/square"),
    ];
    for (f, x, want, name) in configs {
        let target = aesf(&AesfRequest { functional: f, model: n01, point: Point::univariate(x) }).unwrap();
        c.check((target - want).abs() < 1e-12, format!("{name} closed form {target}"));
        let est: Vec<McEstimate> = [100, 400, 1600]
            .iter()
            .map(|&n| esf_mc(f, &n01, n, Point::univariate(x), 10_000, SEED ^ n as u64).unwrap())
            .collect();
        let errs: Vec<f64> = est.iter().map(|e| (e.value - target).abs()).collect();
        let approaching = errs[2] <= errs[0] + 4.0 * (est[0].std_error + est[2].std_error);
        c.check(
            approaching && errs[2] <= 4.0 * est[2].std_error,
            format!(
                "{name} errs {:.4} {:.4} {:.4}, se(1600) {:.4}",
                errs[0], errs[1], errs[2], est[2].std_error
            ),
        );
    }
}

fn criterion_7(c: &mut Checks) {
    let u = ModelSpec::UniformMax { theta: 1.0 };
    let mut draws = sf_distribution(FunctionalId::UniformMax, &u, 10_000, Point::univariate(1.0), 100_000, SEED).unwrap();
    draws.sort_by(f64::total_cmp);
    let m = draws.len() as f64;
    let mut ks = 0.0f64;
    for (i, &s) in draws.iter().enumerate() {
        let f = 1.0 - (-s).exp();
        ks = ks.max((f - i as f64 / m).abs()).max(((i + 1) as f64 / m - f).abs());
    }
    c.check(ks <= 0.01, format!("Kolmogorov distance to Exp(mean 1) {ks:.4}"));
    let half = sf_distribution(FunctionalId::UniformMax, &u, 10_000, Point::univariate(0.5), 100_000, SEED).unwrap();
    let zeros = half.iter().filter(|&&v| v == 0.0).count() as f64 / half.len() as f64;
    c.check(zeros >= 0.999, format!("zero fraction at x=0.5: {zeros}"));
}

fn criterion_8(c: &mut Checks) {
    let replicate_stat = |model: &ModelSpec, stat: fn(&Dataset) -> aesf::Result<f64>| {
        let v: Vec<f64> = (0..200)
            .map(|r| stat(&sample_with(model, 10_000, &mut replicate_rng(SEED, r, 0)).unwrap()).unwrap())
            .collect();
        aesf::sensitivity::mean_and_se(&v)
    };
    let (tau, se) = replicate_stat(&gaussian(), kendall_tau);
    c.check(
        (tau - tau_gaussian()).abs() <= 4.0 * se,
        format!("tau_n {tau:.5} se {se:.1e} vs {:.5}", tau_gaussian()),
    );
    let ind = ModelSpec::IndependentProduct { x_law: Law::standard_normal(), y_law: Law::standard_normal() };
    let (xi, se) = replicate_stat(&ind, chatterjee_xi);
    c.check(xi.abs() <= 4.0 * se, format!("xi_n independence {xi:.5} se {se:.1e}"));
    for n in [2usize, 5, 100] {
        let v: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let ds = Dataset::bivariate(v.clone(), v.iter().map(|t| t * t * t + t).collect()).unwrap();
        let xi = chatterjee_xi(&ds).unwrap();
        let want = 1.0 - 3.0 / (n as f64 + 1.0);
        c.check((xi - want).abs() <= 1e-15, format!("monotone n={n}: {xi} vs {want}"));
    }
}

fn criterion_9(c: &mut Checks) {
    let k = AesfEvaluator::new(FunctionalId::Kendall, &gaussian()).unwrap();
    let s = AesfEvaluator::new(FunctionalId::Spearman, &gaussian()).unwrap();
    for (x, y) in [(2.0, -2.0), (-2.0, 2.0)] {
        let p = Point::bivariate(x, y);
        let (a, b) = (k.eval(p).unwrap(), s.eval(p).unwrap());
        c.check(a.abs() < b.abs(), format!("({x},{y}) |kendall| {:.4} < |spearman| {:.4}", a.abs(), b.abs()));
    }
}

fn run_cli(args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_aesf")).args(args).output().expect("spawn aesf").status;
    assert!(status.success(), "aesf {args:?} failed");
}

fn criterion_10(c: &mut Checks) {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).display().to_string();
    let max_threads = std::thread::available_parallelism().map_or(1, |n| n.get()).max(4).to_string();
    let converge = |out: &str, threads: &str| {
        run_cli(&[
            "converge", "--model", "A", "--functional", "chatterjee", "--x", "0.5", "--y", "-0.3",
            "--schedule", "50,100,200", "--replicates", "300", "--seed", "17", "--threads", threads, "--out", out,
        ])
    };
    let grid = |out: &str, threads: &str| {
        run_cli(&["aesf-grid", "--figure", "1", "--threads", threads, "--out", out]);
    };
    for (name, run) in [("converge", &converge as &dyn Fn(&str, &str)), ("aesf-grid", &grid)] {
        let files: Vec<String> = ["1", "1", &max_threads, &max_threads]
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let p = path(&format!("{name}_{i}.csv"));
                run(&p, t);
                p
            })
            .collect();
        let bytes: Vec<Vec<u8>> = files.iter().map(|p| std::fs::read(Path::new(p)).unwrap()).collect();
        let same = bytes.windows(2).all(|w| w[0] == w[1]) && !bytes[0].is_empty();
        c.check(same, format!("{name} identical across reruns and 1/{max_threads} threads"));
    }
}

type Criterion = (&'static str, fn(&mut Checks));

fn main() {
    let criteria: [Criterion; 10] = [
        ("exact SF identities", criterion_1),
        ("finite-n ESF oracles", criterion_2),
        ("Kendall Gaussian AESF", criterion_3),
        ("Spearman independence law", criterion_4),
        ("Chatterjee null and noiseless limit", criterion_5),
        ("phi-linear convergence", criterion_6),
        ("uniform-max SF distribution", criterion_7),
        ("population values", criterion_8),
        ("Kendall vs Spearman at discordant points", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2}: {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let mut checks = Checks::default();
        let outcome = catch_unwind(AssertUnwindSafe(|| run(&mut checks)));
        let secs = start.elapsed().as_secs_f64();
        if let Err(p) = outcome {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            checks.failed.push(format!("panicked: {msg}"));
        }
        if checks.failed.is_empty() {
            println!("PASS {label} ({secs:.1}s) | {}", checks.notes.join("; "));
        } else {
            failures += 1;
            println!("FAIL {label} ({secs:.1}s) | failed: {} | passed: {}", checks.failed.join("; "), checks.notes.join("; "));
        }
    }
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
