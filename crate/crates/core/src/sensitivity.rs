//! Add-one-point sensitivity: SF = (n+1)·[R(F_{n+1}) − R(F_n)], its Monte Carlo
//! expectation at fixed n, convergence schedules in n, and raw SF draws.
//!
//! Replicates run in parallel on the current rayon pool but are collected in
//! index order and reduced sequentially, so every result is bit-identical for
//! any number of threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::closedform;
use crate::error::{Error, Result};
use crate::estimators::{estimate, kendall_tau, Dataset, FunctionalId};
use crate::models::{replicate_rng, sample_with, ModelSpec};

/// Schedule used when the caller gives none.
pub const DEFAULT_SCHEDULE: [usize; 6] = [50, 100, 200, 400, 800, 1600];

/// Give up after this many tie-driven resamples of one replicate.
const MAX_ATTEMPTS: u32 = 64;

/// Contamination point: `y` is present exactly for bivariate functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub x: f64,
    pub y: Option<f64>,
}

impl Point {
    pub fn univariate(x: f64) -> Self {
        Self { x, y: None }
    }

    pub fn bivariate(x: f64, y: f64) -> Self {
        Self { x, y: Some(y) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    /// Replicate standard deviation over √replicates.
    pub std_error: f64,
    pub replicates: usize,
    pub n: usize,
    pub seed: u64,
    /// Replicates redrawn because sampling or insertion produced a tie.
    pub resampled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceCurve {
    pub schedule: Vec<usize>,
    pub estimates: Vec<McEstimate>,
    /// Closed-form limit, when one is available for the (functional, model) pair.
    pub target: Option<f64>,
}

/// SF by full re-evaluation of the estimator on ds ∪ {point}.
pub fn sf(f: FunctionalId, ds: &Dataset, point: Point) -> Result<f64> {
    let before = estimate(f, ds)?;
    let after = estimate(f, &ds.with_point(point.x, point.y)?)?;
    Ok((ds.len() + 1) as f64 * (after - before))
}

/// Kendall SF in O(n log n) + O(n): (2/n)·Σᵢ sgn[(x−Xᵢ)(y−Yᵢ)] − 2τ_n.
/// Agrees with [`sf`] to rounding; rejects the same ties.
pub fn sf_kendall_incremental(ds: &Dataset, point: Point) -> Result<f64> {
    let y = point.y.ok_or_else(|| Error::domain("kendall needs a bivariate point"))?;
    let tau = kendall_tau(ds)?;
    let ys = ds.require_ys()?;
    let n = ds.len();
    let mut signs: i64 = 0;
    for (i, (&xi, &yi)) in ds.xs().iter().zip(ys).enumerate() {
        if xi == point.x {
            return Err(Error::Tie { axis: crate::error::Axis::X, first: i, second: n });
        }
        if yi == y {
            return Err(Error::Tie { axis: crate::error::Axis::Y, first: i, second: n });
        }
        signs += if (point.x - xi) * (y - yi) >= 0.0 { 1 } else { -1 };
    }
    Ok(2.0 * signs as f64 / n as f64 - 2.0 * tau)
}

/// The variance SF written out in sample moments m = ΣXᵢ/n, q = ΣXᵢ²/n:
/// n/(n+1)·x² − 2n/(n+1)·m·x + (2n+1)/(n+1)·m² − q.
pub fn variance_sf_expansion(ds: &Dataset, x: f64) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::domain("variance needs at least one observation"));
    }
    let n = ds.len() as f64;
    let m = ds.xs().iter().sum::<f64>() / n;
    let q = ds.xs().iter().map(|t| t * t).sum::<f64>() / n;
    Ok(n / (n + 1.0) * x * x - 2.0 * n / (n + 1.0) * m * x + (2.0 * n + 1.0) / (n + 1.0) * m * m - q)
}

/// Mixes `salt` into `seed` (SplitMix64 finalizer); used for per-n seeds of a schedule.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn check_compatible(f: FunctionalId, model: &ModelSpec, point: Point) -> Result<()> {
    model.validate()?;
    if f.is_bivariate() != model.is_bivariate() {
        return Err(Error::domain(format!(
            "functional {f} does not apply to model {}",
            model.name()
        )));
    }
    if f.is_bivariate() != point.y.is_some() {
        return Err(Error::domain(if f.is_bivariate() {
            format!("{f} needs a point with both x and y")
        } else {
            format!("{f} takes a point with x only")
        }));
    }
    Ok(())
}

/// One SF draw for replicate `r`, redrawing the sample on ties. Returns (sf, redraws).
fn replicate_sf(f: FunctionalId, model: &ModelSpec, n: usize, point: Point, seed: u64, r: u64) -> Result<(f64, u32)> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = replicate_rng(seed, r, attempt);
        let ds = sample_with(model, n, &mut rng)?;
        match sf(f, &ds, point) {
            Ok(v) => return Ok((v, attempt)),
            Err(Error::Tie { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Numeric(format!(
        "replicate {r} still tied after {MAX_ATTEMPTS} redraws"
    )))
}

fn raw_draws(
    f: FunctionalId,
    model: &ModelSpec,
    n: usize,
    point: Point,
    replicates: usize,
    seed: u64,
) -> Result<(Vec<f64>, usize)> {
    check_compatible(f, model, point)?;
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    if f.is_bivariate() && n < 2 {
        return Err(Error::domain("rank correlations need n >= 2"));
    }
    let draws: Vec<(f64, u32)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| replicate_sf(f, model, n, point, seed, r))
        .collect::<Result<_>>()?;
    let resampled = draws.iter().filter(|d| d.1 > 0).count();
    Ok((draws.into_iter().map(|d| d.0).collect(), resampled))
}

/// Monte Carlo ESF: mean SF over `replicates` independent samples of size n.
pub fn esf_mc(
    f: FunctionalId,
    model: &ModelSpec,
    n: usize,
    point: Point,
    replicates: usize,
    seed: u64,
) -> Result<McEstimate> {
    if replicates < 2 {
        return Err(Error::domain("esf_mc needs at least 2 replicates"));
    }
    let (draws, resampled) = raw_draws(f, model, n, point, replicates, seed)?;
    let (value, std_error) = mean_and_se(&draws);
    if !value.is_finite() {
        return Err(Error::Numeric(format!("ESF estimate is {value}")));
    }
    Ok(McEstimate { value, std_error, replicates, n, seed, resampled })
}

/// Sequential mean and standard error (Welford), order-fixed for reproducibility.
pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, &x) in v.iter().enumerate() {
        let d = x - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (x - mean);
    }
    let len = v.len() as f64;
    let var = if v.len() > 1 { m2 / (len - 1.0) } else { 0.0 };
    (mean, (var / len).sqrt())
}

/// ESF at each n of `schedule`, each n with its own derived seed, plus the
/// closed-form target when the pair is supported.
pub fn convergence_study(
    f: FunctionalId,
    model: &ModelSpec,
    point: Point,
    schedule: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<ConvergenceCurve> {
    if schedule.len() < 3 {
        return Err(Error::domain("schedule needs at least 3 sample sizes"));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("schedule must be strictly increasing"));
    }
    check_compatible(f, model, point)?;
    let target = match closedform::aesf(&closedform::AesfRequest { functional: f, model: *model, point }) {
        Ok(v) => Some(v),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };
    let estimates = schedule
        .iter()
        .map(|&n| esf_mc(f, model, n, point, replicates, derive_seed(seed, n as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceCurve { schedule: schedule.to_vec(), estimates, target })
}

/// The raw SF value of every replicate, in replicate order.
pub fn sf_distribution(
    f: FunctionalId,
    model: &ModelSpec,
    n: usize,
    point: Point,
    replicates: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if replicates == 0 {
        return Err(Error::domain("need at least one replicate"));
    }
    Ok(raw_draws(f, model, n, point, replicates, seed)?.0)
}
