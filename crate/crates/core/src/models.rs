//! Data-generating laws: samplable joints with analytic marginals and
//! conditional survival functions.
//!
//! Models serialize as JSON objects tagged by `"variant"`:
//!
//! ```json
//! {"variant": "bivariate_gaussian", "rho": 0.7}
//! {"variant": "additive_noise",
//!  "x_law": {"law": "uniform", "lo": -10, "hi": 10},
//!  "link": {"kind": "square"}, "noise_sigma": 3.1622776601683795}
//! {"variant": "uniform_max", "theta": 1}
//! {"variant": "univariate_normal", "mu": 0, "sigma": 1}
//! {"variant": "independent_product",
//!  "x_law": {"law": "normal", "mean": 0, "sd": 1},
//!  "y_law": {"law": "uniform", "lo": 0, "hi": 1}}
//! ```
//!
//! Links are `{"kind": "linear", "slope": c}`, `{"kind": "square"}` and `{"kind": "cos2pi"}`.
//!
//! Sampling draws uniforms from ChaCha8 and normals by Box-Muller (both outputs
//! of each pair are used, cosine branch first). Replicate `r` of a Monte Carlo
//! run uses ChaCha stream `r` under the run's seed, see [`replicate_rng`].

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::Dataset;
use crate::numerics::{ncdf, npdf, Quadrature};

/// Half-width, in standard deviations, of the window normal laws are integrated over.
const NORMAL_SPAN: f64 = 10.0;
/// Panel edges of that window, in standard deviations.
const NORMAL_PANEL: f64 = 2.5;
/// Where sharp integrands get extra panel edges, in units of the noise scale.
const BREAK_OFFSETS: [f64; 7] = [-6.0, -2.0, -0.5, 0.0, 0.5, 2.0, 6.0];

/// A univariate law used for X (and for Y in independent models).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Law {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Law {
    pub fn standard_normal() -> Self {
        Law::Normal { mean: 0.0, sd: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Law::Normal { mean, sd } => {
                if !mean.is_finite() || !(sd.is_finite() && sd > 0.0) {
                    return Err(Error::domain(format!("normal law needs finite mean and sd > 0, got ({mean}, {sd})")));
                }
            }
            Law::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::domain(format!("uniform law needs lo < hi, got ({lo}, {hi})")));
                }
            }
        }
        Ok(())
    }

    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            Law::Normal { mean, sd } => ncdf((t - mean) / sd),
            Law::Uniform { lo, hi } => ((t - lo) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        match *self {
            Law::Normal { mean, sd } => npdf((t - mean) / sd) / sd,
            Law::Uniform { lo, hi } => {
                if (lo..=hi).contains(&t) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Law::Normal { mean, .. } => mean,
            Law::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Law::Normal { sd, .. } => sd * sd,
            Law::Uniform { lo, hi } => (hi - lo) * (hi - lo) / 12.0,
        }
    }

    /// The interval quadrature works on: the support, or ±10 sd for normals.
    pub fn window(&self) -> (f64, f64) {
        match *self {
            Law::Normal { mean, sd } => (mean - NORMAL_SPAN * sd, mean + NORMAL_SPAN * sd),
            Law::Uniform { lo, hi } => (lo, hi),
        }
    }

    fn sample(&self, src: &mut GaussianSource<'_>) -> f64 {
        match *self {
            Law::Normal { mean, sd } => mean + sd * src.next_normal(),
            Law::Uniform { lo, hi } => lo + (hi - lo) * src.next_uniform(),
        }
    }

    /// E[h(X)] for smooth h: Gauss-Hermite for normals, one Legendre panel for uniforms.
    pub fn expect_smooth<F: FnMut(f64) -> f64>(&self, q: &Quadrature, mut h: F) -> f64 {
        match *self {
            Law::Normal { mean, sd } => q.expect_normal(|z| h(mean + sd * z)),
            Law::Uniform { lo, hi } => q.legendre().sum_over(lo, hi, h) / (hi - lo),
        }
    }

    /// E[h(X)] for h that may jump or bend sharply at `breaks`; composite Legendre
    /// with panel edges at every break inside the window.
    pub fn expect_split<F: FnMut(f64) -> f64>(&self, q: &Quadrature, breaks: &[f64], h: F) -> f64 {
        let (lo, hi) = self.window();
        self.integrate_split(q, lo, hi, breaks, h)
    }

    /// ∫_a^b h dF over [a, b] ∩ window, composite Legendre with edges at `breaks`.
    pub fn integrate_split<F: FnMut(f64) -> f64>(&self, q: &Quadrature, a: f64, b: f64, breaks: &[f64], mut h: F) -> f64 {
        let (wlo, whi) = self.window();
        let (lo, hi) = (a.max(wlo), b.min(whi));
        if lo >= hi {
            return 0.0;
        }
        let mut edges = vec![lo, hi];
        if let Law::Normal { mean, sd } = *self {
            let k = (NORMAL_SPAN / NORMAL_PANEL) as i32;
            edges.extend(
                (-k + 1..k)
                    .map(|i| mean + f64::from(i) * NORMAL_PANEL * sd)
                    .filter(|e| *e > lo && *e < hi),
            );
        }
        edges.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        match *self {
            Law::Normal { .. } => q.legendre().sum_panels(&edges, |x| h(x) * self.pdf(x)),
            Law::Uniform { lo, hi } => q.legendre().sum_panels(&edges, h) / (hi - lo),
        }
    }
}

/// Deterministic link g in Y = g(X) + σZ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Link {
    Linear { slope: f64 },
    Square,
    Cos2pi,
}

impl Link {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            Link::Linear { slope } => slope * x,
            Link::Square => x * x,
            Link::Cos2pi => (2.0 * PI * x).cos(),
        }
    }

    /// Every x in [lo, hi] with g(x) = v.
    pub fn preimages(&self, v: f64, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match *self {
            Link::Linear { slope } => {
                if slope != 0.0 {
                    out.push(v / slope);
                }
            }
            Link::Square => {
                if v >= 0.0 {
                    let r = v.sqrt();
                    out.push(-r);
                    out.push(r);
                }
            }
            Link::Cos2pi => {
                if v.abs() <= 1.0 {
                    let a = v.acos() / (2.0 * PI);
                    let k_lo = lo.floor() as i64 - 1;
                    let k_hi = hi.ceil() as i64 + 1;
                    for k in k_lo..=k_hi {
                        out.push(k as f64 - a);
                        out.push(k as f64 + a);
                    }
                }
            }
        }
        out.retain(|x| *x >= lo && *x <= hi);
        out
    }

    /// Turning points of g inside [lo, hi].
    pub fn critical_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match *self {
            Link::Linear { .. } => {}
            Link::Square => out.push(0.0),
            Link::Cos2pi => {
                let k_lo = (2.0 * lo).floor() as i64;
                let k_hi = (2.0 * hi).ceil() as i64;
                out.extend((k_lo..=k_hi).map(|k| k as f64 * 0.5));
            }
        }
        out.retain(|x| *x >= lo && *x <= hi);
        out
    }

    /// (min, max) of g over [lo, hi].
    pub fn range(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut pts = vec![lo, hi];
        pts.extend(self.critical_points(lo, hi));
        pts.iter().map(|&x| self.apply(x)).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    }
}

/// Y = g(X) + σZ with Z standard normal independent of X. The bivariate Gaussian
/// with correlation ρ is the case X ~ N(0,1), g(x) = ρx, σ = √(1−ρ²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Additive {
    pub x_law: Law,
    pub link: Link,
    pub sigma: f64,
}

impl Additive {
    /// P(Y > y | X = x) = Φ((g(x) − y)/σ).
    pub fn survival(&self, y: f64, x: f64) -> f64 {
        ncdf((self.link.apply(x) - y) / self.sigma)
    }

    /// Panel edges in x around the points where g(x) sits within a few noise
    /// scales of each value in `values`.
    pub fn breaks_near(&self, values: &[f64], scale: f64) -> Vec<f64> {
        let (lo, hi) = self.x_law.window();
        let mut out = Vec::new();
        for &v in values {
            for o in BREAK_OFFSETS {
                out.extend(self.link.preimages(v + o * scale, lo, hi));
            }
        }
        out
    }

    /// Edges for integrands in x' that vary on the noise scale wherever g(x')
    /// approaches its values at the window ends or turning points.
    pub fn structural_breaks(&self) -> Vec<f64> {
        let (lo, hi) = self.x_law.window();
        let mut pts = vec![lo, hi];
        pts.extend(self.link.critical_points(lo, hi));
        let values: Vec<f64> = pts.iter().map(|&x| self.link.apply(x)).collect();
        let mut out = self.breaks_near(&values, self.sigma);
        out.extend(pts);
        out
    }
}

/// A data-generating law F.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Standard bivariate normal with correlation ρ ∈ (−1, 1).
    BivariateGaussian { rho: f64 },
    AdditiveNoise { x_law: Law, link: Link, noise_sigma: f64 },
    /// Univariate U[0, θ].
    UniformMax { theta: f64 },
    UnivariateNormal { mu: f64, sigma: f64 },
    /// X and Y independent with the given laws.
    IndependentProduct { x_law: Law, y_law: Law },
}

impl ModelSpec {
    /// Y = 0.7X + √(1 − 0.49)Z, X ~ N(0, 1).
    pub fn scenario_a() -> Self {
        ModelSpec::AdditiveNoise {
            x_law: Law::standard_normal(),
            link: Link::Linear { slope: 0.7 },
            noise_sigma: (1.0f64 - 0.49).sqrt(),
        }
    }

    /// Y = X² + √10 Z, X ~ U(−10, 10).
    pub fn scenario_b() -> Self {
        ModelSpec::AdditiveNoise {
            x_law: Law::Uniform { lo: -10.0, hi: 10.0 },
            link: Link::Square,
            noise_sigma: 10.0f64.sqrt(),
        }
    }

    /// Y = cos(2πX) + 0.5Z, X ~ U(−1, 1).
    pub fn scenario_c() -> Self {
        ModelSpec::AdditiveNoise {
            x_law: Law::Uniform { lo: -1.0, hi: 1.0 },
            link: Link::Cos2pi,
            noise_sigma: 0.5,
        }
    }

    /// Named presets: `A`, `B`, `C` (also `scenario-a` etc.).
    pub fn preset(name: &str) -> Option<Self> {
        let key = name.trim().to_ascii_lowercase();
        let key = key.strip_prefix("scenario").unwrap_or(&key).trim_start_matches(['-', '_']);
        match key {
            "a" => Some(Self::scenario_a()),
            "b" => Some(Self::scenario_b()),
            "c" => Some(Self::scenario_c()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::BivariateGaussian { rho } => {
                if !(rho > -1.0 && rho < 1.0) {
                    return Err(Error::domain(format!("rho must lie strictly inside (-1, 1), got {rho}")));
                }
            }
            ModelSpec::AdditiveNoise { x_law, link, noise_sigma } => {
                x_law.validate()?;
                if let Link::Linear { slope } = link {
                    if !slope.is_finite() {
                        return Err(Error::domain("link slope must be finite"));
                    }
                }
                if !(noise_sigma.is_finite() && noise_sigma > 0.0) {
                    return Err(Error::domain(format!("noise_sigma must be positive, got {noise_sigma}")));
                }
            }
            ModelSpec::UniformMax { theta } => {
                if !(theta.is_finite() && theta > 0.0) {
                    return Err(Error::domain(format!("theta must be positive, got {theta}")));
                }
            }
            ModelSpec::UnivariateNormal { mu, sigma } => {
                Law::Normal { mean: mu, sd: sigma }.validate()?;
            }
            ModelSpec::IndependentProduct { x_law, y_law } => {
                x_law.validate()?;
                y_law.validate()?;
            }
        }
        Ok(())
    }

    /// Parses and validates a JSON model description.
    pub fn from_json(s: &str) -> Result<Self> {
        let m: ModelSpec = serde_json::from_str(s).map_err(|e| Error::Parse(format!("model JSON: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn is_bivariate(&self) -> bool {
        !matches!(self, ModelSpec::UniformMax { .. } | ModelSpec::UnivariateNormal { .. })
    }

    /// Law of X (the only coordinate of univariate models).
    pub fn x_law(&self) -> Law {
        match *self {
            ModelSpec::BivariateGaussian { .. } => Law::standard_normal(),
            ModelSpec::AdditiveNoise { x_law, .. } => x_law,
            ModelSpec::UniformMax { theta } => Law::Uniform { lo: 0.0, hi: theta },
            ModelSpec::UnivariateNormal { mu, sigma } => Law::Normal { mean: mu, sd: sigma },
            ModelSpec::IndependentProduct { x_law, .. } => x_law,
        }
    }

    /// The additive-noise form of the model, when it has one.
    pub fn additive(&self) -> Option<Additive> {
        match *self {
            ModelSpec::BivariateGaussian { rho } => Some(Additive {
                x_law: Law::standard_normal(),
                link: Link::Linear { slope: rho },
                sigma: (1.0 - rho * rho).sqrt(),
            }),
            ModelSpec::AdditiveNoise { x_law, link, noise_sigma } => Some(Additive {
                x_law,
                link,
                sigma: noise_sigma,
            }),
            _ => None,
        }
    }

    fn require_bivariate(&self) -> Result<()> {
        if self.is_bivariate() {
            Ok(())
        } else {
            Err(Error::unsupported(format!("{} has no y coordinate", self.name())))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::BivariateGaussian { .. } => "bivariate_gaussian",
            ModelSpec::AdditiveNoise { .. } => "additive_noise",
            ModelSpec::UniformMax { .. } => "uniform_max",
            ModelSpec::UnivariateNormal { .. } => "univariate_normal",
            ModelSpec::IndependentProduct { .. } => "independent_product",
        }
    }
}

/// Uniform and Box-Muller normal draws from one RNG stream.
struct GaussianSource<'a> {
    rng: &'a mut ChaCha8Rng,
    spare: Option<f64>,
}

impl<'a> GaussianSource<'a> {
    fn new(rng: &'a mut ChaCha8Rng) -> Self {
        Self { rng, spare: None }
    }

    fn next_uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

/// RNG for replicate `replicate` of a run seeded with `seed`. `attempt` > 0 gives
/// fresh streams for resampling after a measure-zero tie.
pub fn replicate_rng(seed: u64, replicate: u64, attempt: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate ^ (u64::from(attempt) << 40));
    rng
}

/// n i.i.d. draws from `model`, deterministic in (model, n, seed).
pub fn sample(model: &ModelSpec, n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with(model, n, &mut rng)
}

/// n i.i.d. draws using the caller's stream. Univariate models leave the y column absent.
pub fn sample_with(model: &ModelSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::domain("sample size must be at least 1"));
    }
    model.validate()?;
    let mut src = GaussianSource::new(rng);
    let mut xs = Vec::with_capacity(n);
    if !model.is_bivariate() {
        let law = model.x_law();
        xs.extend((0..n).map(|_| law.sample(&mut src)));
        return Ok(Dataset::from_parts(xs, None));
    }
    let mut ys = Vec::with_capacity(n);
    match *model {
        ModelSpec::IndependentProduct { x_law, y_law } => {
            for _ in 0..n {
                xs.push(x_law.sample(&mut src));
                ys.push(y_law.sample(&mut src));
            }
        }
        _ => {
            let add = model.additive().expect("bivariate non-independent models are additive");
            for _ in 0..n {
                let x = add.x_law.sample(&mut src);
                let z = src.next_normal();
                xs.push(x);
                ys.push(add.link.apply(x) + add.sigma * z);
            }
        }
    }
    Ok(Dataset::from_parts(xs, Some(ys)))
}

/// P(Y > y | X = x).
pub fn conditional_survival(model: &ModelSpec, y: f64, x: f64) -> Result<f64> {
    model.require_bivariate()?;
    match *model {
        ModelSpec::IndependentProduct { y_law, .. } => Ok(1.0 - y_law.cdf(y)),
        _ => Ok(model.additive().expect("additive").survival(y, x)),
    }
}

/// F_X(t).
pub fn marginal_cdf_x(model: &ModelSpec, t: f64) -> f64 {
    model.x_law().cdf(t)
}

/// F_Y(t) with the default quadrature.
pub fn marginal_cdf_y(model: &ModelSpec, t: f64) -> Result<f64> {
    marginal_cdf_y_with(Quadrature::standard(), model, t)
}

/// F_Y(t). Additive models integrate Φ((t − g(X))/σ) over the law of X.
pub fn marginal_cdf_y_with(q: &Quadrature, model: &ModelSpec, t: f64) -> Result<f64> {
    model.require_bivariate()?;
    match *model {
        ModelSpec::BivariateGaussian { .. } => Ok(ncdf(t)),
        ModelSpec::IndependentProduct { y_law, .. } => Ok(y_law.cdf(t)),
        _ => {
            let add = model.additive().expect("additive");
            if t.is_infinite() {
                return Ok(if t > 0.0 { 1.0 } else { 0.0 });
            }
            let breaks = add.breaks_near(&[t], add.sigma);
            let p = add
                .x_law
                .expect_split(q, &breaks, |x| ncdf((t - add.link.apply(x)) / add.sigma));
            crate::numerics::clamp_probability(p)
        }
    }
}

/// E[h(Y′)] with Y′ distributed as the Y marginal, using the default quadrature.
pub fn expect_y_prime<F: FnMut(f64) -> f64>(model: &ModelSpec, h: F) -> Result<f64> {
    expect_y_prime_with(Quadrature::standard(), model, h)
}

/// E[h(Y′)]: a double (X′, Z′) quadrature for additive models, one Hermite rule
/// for the Gaussian, the y law's own rule for independent models.
pub fn expect_y_prime_with<F: FnMut(f64) -> f64>(q: &Quadrature, model: &ModelSpec, mut h: F) -> Result<f64> {
    model.require_bivariate()?;
    let v = match *model {
        ModelSpec::BivariateGaussian { .. } => q.expect_normal(h),
        ModelSpec::IndependentProduct { y_law, .. } => y_law.expect_smooth(q, h),
        _ => {
            let add = model.additive().expect("additive");
            add.x_law.expect_smooth(q, |x| {
                let gx = add.link.apply(x);
                q.expect_normal(|z| h(gx + add.sigma * z))
            })
        }
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("E[h(Y')] evaluated to {v}")))
    }
}
