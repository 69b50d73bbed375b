use aesf::closedform::esf_exact;
use aesf::sensitivity::{convergence_study, esf_mc, sf_distribution};
use aesf::{FunctionalId, ModelSpec, OuterMap, Point, Transform};

const SEED: u64 = 2024;

#[test]
fn esf_examples() {
    let m = ModelSpec::UnivariateNormal { mu: -1.0, sigma: 0.5 };
    for n in [3, 30] {
        let e = esf_mc(FunctionalId::Mean, &m, n, Point::univariate(0.25), 5000, SEED).unwrap();
        assert!((e.value - 1.25).abs() <= 4.0 * e.std_error);
    }
    let n01 = ModelSpec::UnivariateNormal { mu: 0.0, sigma: 1.0 };
    let e = esf_mc(FunctionalId::Variance, &n01, 50, Point::univariate(2.0), 20_000, SEED).unwrap();
    let exact = esf_exact(FunctionalId::Variance, &n01, 2.0, 50).unwrap();
    assert!((exact - (50.0 / 51.0 * 4.0 - 2449.0 / 2550.0)).abs() < 1e-14);
    assert!((e.value - exact).abs() <= 4.0 * e.std_error);
    let u = ModelSpec::UniformMax { theta: 1.0 };
    let e = esf_mc(FunctionalId::UniformMax, &u, 10, Point::univariate(0.9), 20_000, SEED).unwrap();
    assert!((e.value - 0.313811).abs() <= 4.0 * e.std_error);
}

#[test]
fn kendall_convergence_to_target() {
    let g = ModelSpec::BivariateGaussian { rho: 0.7 };
    let curve = convergence_study(FunctionalId::Kendall, &g, Point::bivariate(0.0, 0.0), &[50, 200, 800], 1000, SEED).unwrap();
    let target = curve.target.unwrap();
    let err: Vec<f64> = curve.estimates.iter().map(|e| (e.value - target).abs()).collect();
    let (a, b) = (&curve.estimates[1], &curve.estimates[2]);
    let combined = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!(err[2] <= err[1] + 2.0 * combined, "{err:?}");
    for e in &curve.estimates {
        assert!(e.value.abs() <= 3.0 + 4.0 * e.std_error);
    }
}

#[test]
fn closed_form_target_attached() {
    let n01 = ModelSpec::UnivariateNormal { mu: 0.0, sigma: 1.0 };
    let f = FunctionalId::PhiLinear { g: Transform::Identity, phi: OuterMap::Sine };
    let curve = convergence_study(f, &n01, Point::univariate(1.0), &[25, 50, 100], 2000, SEED).unwrap();
    assert_eq!(curve.target, Some(1.0));
    let last = curve.estimates.last().unwrap();
    assert!((last.value - 1.0).abs() <= 4.0 * last.std_error + 0.01);
    // No closed form: no target, still a curve.
    let f = FunctionalId::Spearman;
    let curve = convergence_study(f, &ModelSpec::scenario_b(), Point::bivariate(1.0, 5.0), &[20, 40, 80], 100, SEED).unwrap();
    assert!(curve.target.is_none());
    assert_eq!(curve.estimates.len(), 3);
}

#[test]
fn kendall_replicates_respect_slack_bound() {
    let n = 60;
    let g = ModelSpec::BivariateGaussian { rho: -0.5 };
    for (x, y) in [(3.0, 3.0), (-2.5, 2.5), (0.1, -0.1)] {
        let draws = sf_distribution(FunctionalId::Kendall, &g, n, Point::bivariate(x, y), 500, SEED).unwrap();
        let bound = 3.0 * (n as f64 + 1.0) / n as f64 + 2.0;
        assert!(draws.iter().all(|v| v.abs() <= bound));
    }
}

#[test]
fn uniform_max_below_theta_is_mostly_zero() {
    let u = ModelSpec::UniformMax { theta: 1.0 };
    let draws = sf_distribution(FunctionalId::UniformMax, &u, 10_000, Point::univariate(0.5), 2000, SEED).unwrap();
    let zeros = draws.iter().filter(|v| **v == 0.0).count();
    assert!(zeros as f64 >= 0.999 * draws.len() as f64);
}
