//! Normal distribution functions and Gauss quadrature rules.
//!
//! Everything here is a pure function of its arguments. Rule generation uses
//! Newton iteration on the three-term recurrences, so any order is available;
//! the 64-node Legendre rule used by [`bvn_cdf`] is built once and shared.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Default number of nodes per quadrature axis.
pub const DEFAULT_ORDER: usize = 64;

/// Rounding excursions outside [0, 1] larger than this are reported as errors.
const CLAMP_LIMIT: f64 = 1e-9;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Switch from the power series of erf to the continued fraction of erfc.
const SERIES_LIMIT: f64 = 3.0;
const CF_TERMS: usize = 80;

/// Standard normal CDF. Non-finite input is a domain error.
pub fn normal_cdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain(format!("normal_cdf argument must be finite, got {z}")));
    }
    Ok(ncdf(z))
}

/// Standard normal CDF without argument checks: infinities saturate, NaN propagates.
pub fn ncdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    let upper = 0.5 * erfc_nonneg(z.abs() * FRAC_1_SQRT_2);
    if z >= 0.0 {
        1.0 - upper
    } else {
        upper
    }
}

/// Standard normal density.
pub fn npdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// erfc(u) for u >= 0.
fn erfc_nonneg(u: f64) -> f64 {
    if u.is_infinite() {
        return 0.0;
    }
    if u < SERIES_LIMIT {
        1.0 - erf_series(u)
    } else {
        erfc_continued_fraction(u)
    }
}

/// erf(u) = 2/sqrt(pi) exp(-u^2) sum_k (2u^2)^k u / (2k+1)!!, all terms positive.
fn erf_series(u: f64) -> f64 {
    let u2 = u * u;
    let mut term = u;
    let mut sum = u;
    let mut k = 0u32;
    while term > sum * 1e-17 && k < 500 {
        k += 1;
        term *= 2.0 * u2 / f64::from(2 * k + 1);
        sum += term;
    }
    FRAC_2_SQRT_PI * (-u2).exp() * sum
}

/// erfc(u) = exp(-u^2)/sqrt(pi) / (u + (1/2)/(u + 1/(u + (3/2)/(u + ...)))), evaluated bottom-up.
fn erfc_continued_fraction(u: f64) -> f64 {
    let mut f = u;
    for k in (1..=CF_TERMS).rev() {
        f = u + 0.5 * k as f64 / f;
    }
    (-u * u).exp() / (SQRT_PI * f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RuleKind {
    /// Gauss-Legendre mapped onto `[lo, hi]`.
    Legendre { lo: f64, hi: f64 },
    /// Gauss-Hermite against the standard normal density (probabilists' weighting).
    Hermite,
}

/// A Gauss rule. Legendre nodes are stored on the reference interval [-1, 1]
/// and mapped affinely on use; Hermite nodes are abscissae of a standard normal.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    kind: RuleKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss-Legendre rule of the given order on `[lo, hi]`.
    pub fn legendre(order: usize, lo: f64, hi: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::domain("quadrature order must be positive"));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::domain(format!("invalid interval [{lo}, {hi}]")));
        }
        let (nodes, weights) = legendre_nodes(order);
        Ok(Self {
            kind: RuleKind::Legendre { lo, hi },
            nodes,
            weights,
        })
    }

    /// Gauss-Hermite rule of the given order; weights sum to one.
    pub fn hermite(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::domain("quadrature order must be positive"));
        }
        let (nodes, weights) = hermite_nodes(order);
        Ok(Self {
            kind: RuleKind::Hermite,
            nodes,
            weights,
        })
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Reference abscissae: [-1, 1] for Legendre, the real line for Hermite.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same nodes, different interval. Panics on Hermite rules.
    pub fn on_interval(&self, lo: f64, hi: f64) -> Self {
        assert!(matches!(self.kind, RuleKind::Legendre { .. }));
        Self {
            kind: RuleKind::Legendre { lo, hi },
            nodes: self.nodes.clone(),
            weights: self.weights.clone(),
        }
    }

    /// Σ wᵢ f(nodeᵢ) with the rule's own mapping, no finiteness check.
    pub fn sum<F: FnMut(f64) -> f64>(&self, f: F) -> f64 {
        match self.kind {
            RuleKind::Legendre { lo, hi } => self.sum_over(lo, hi, f),
            RuleKind::Hermite => self
                .nodes
                .iter()
                .zip(&self.weights)
                .map({
                    let mut f = f;
                    move |(&t, &w)| w * f(t)
                })
                .sum(),
        }
    }

    /// ∫_lo^hi f using the Legendre nodes of this rule, regardless of its stored interval.
    /// `hi < lo` yields the signed integral.
    pub fn sum_over<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        debug_assert!(matches!(self.kind, RuleKind::Legendre { .. }));
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut acc = 0.0;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * t);
        }
        half * acc
    }

    /// Composite Legendre sum over consecutive `edges` (ascending). Empty panels are skipped.
    pub fn sum_panels<F: FnMut(f64) -> f64>(&self, edges: &[f64], mut f: F) -> f64 {
        edges
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| self.sum_over(w[0], w[1], &mut f))
            .sum()
    }
}

/// Applies `rule` to `f`; a non-finite result is a numeric error.
pub fn integrate<F: FnMut(f64) -> f64>(rule: &QuadratureRule, f: F) -> Result<f64> {
    let v = rule.sum(f);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("quadrature produced {v}")))
    }
}

/// Legendre polynomial P_n(z) and its derivative.
fn legendre_eval(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
    }
    let dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
    (p1, dp)
}

fn legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_eval(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_eval(n, z);
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Physicists' Gauss-Hermite roots by Newton on the orthonormal recurrence,
/// rescaled to the standard normal weight.
fn hermite_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // pi^(-1/4)
    let nf = n as f64;
    let m = n.div_ceil(2);
    // largest root first
    let mut roots = vec![0.0; m];
    let mut wts = vec![0.0; m];
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * roots[0],
            3 => 1.91 * z - 0.91 * roots[1],
            _ => 2.0 * z - roots[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..50 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z1.abs().max(1.0) {
                break;
            }
        }
        roots[i] = z;
        wts[i] = 2.0 / (pp * pp);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let scale = std::f64::consts::SQRT_2;
    for i in 0..m {
        let w = wts[i] / SQRT_PI;
        nodes[n - 1 - i] = scale * roots[i];
        nodes[i] = -scale * roots[i];
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// The shared 64-node Legendre rule on [-1, 1].
pub fn legendre64() -> &'static QuadratureRule {
    static RULE: OnceLock<QuadratureRule> = OnceLock::new();
    RULE.get_or_init(|| QuadratureRule::legendre(DEFAULT_ORDER, -1.0, 1.0).expect("order > 0"))
}

/// The rules every closed-form evaluation draws on, built once per order.
///
/// Doubling `order` doubles every axis at once (Legendre panels, Hermite
/// expectations and the bivariate normal integral).
#[derive(Debug, Clone)]
pub struct Quadrature {
    legendre: QuadratureRule,
    hermite: QuadratureRule,
}

impl Quadrature {
    pub fn new(order: usize) -> Result<Self> {
        Ok(Self {
            legendre: QuadratureRule::legendre(order, -1.0, 1.0)?,
            hermite: QuadratureRule::hermite(order)?,
        })
    }

    /// The shared default-order context.
    pub fn standard() -> &'static Quadrature {
        static CTX: OnceLock<Quadrature> = OnceLock::new();
        CTX.get_or_init(|| Quadrature::new(DEFAULT_ORDER).expect("order > 0"))
    }

    pub fn order(&self) -> usize {
        self.legendre.order()
    }

    pub fn legendre(&self) -> &QuadratureRule {
        &self.legendre
    }

    pub fn hermite(&self) -> &QuadratureRule {
        &self.hermite
    }

    /// E[h(Z)] for a standard normal Z.
    pub fn expect_normal<F: FnMut(f64) -> f64>(&self, h: F) -> f64 {
        self.hermite.sum(h)
    }

    pub fn bvn(&self, x: f64, y: f64, rho: f64) -> Result<f64> {
        bvn_cdf_with(&self.legendre, x, y, rho)
    }
}

/// P(X ≤ x, Y ≤ y) for a standard bivariate normal with correlation `rho`.
///
/// Uses Φ(x)Φ(y) + (1/2π)∫₀^{asin ρ} exp(−(x² − 2xy sin t + y²)/(2cos²t)) dt with the
/// shared 64-node Gauss-Legendre rule.
pub fn bvn_cdf(x: f64, y: f64, rho: f64) -> Result<f64> {
    bvn_cdf_with(legendre64(), x, y, rho)
}

/// [`bvn_cdf`] with a caller-supplied Legendre rule (its interval is ignored).
pub fn bvn_cdf_with(rule: &QuadratureRule, x: f64, y: f64, rho: f64) -> Result<f64> {
    if x.is_nan() || y.is_nan() || rho.is_nan() {
        return Err(Error::domain("bvn_cdf arguments must not be NaN"));
    }
    if rho.abs() > 1.0 {
        return Err(Error::domain(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(ncdf(y));
    }
    if y == f64::INFINITY {
        return Ok(ncdf(x));
    }
    if rho == 1.0 {
        return Ok(ncdf(x.min(y)));
    }
    if rho == -1.0 {
        return Ok((ncdf(x) + ncdf(y) - 1.0).max(0.0));
    }
    let sq = x * x + y * y;
    let xy = x * y;
    let integral = rule.sum_over(0.0, rho.asin(), |t| {
        let s = t.sin();
        let c2 = (1.0 - s) * (1.0 + s);
        (-(sq - 2.0 * xy * s) / (2.0 * c2)).exp()
    });
    clamp_probability(ncdf(x) * ncdf(y) + integral / (2.0 * PI))
}

/// Clamps rounding noise back into [0, 1]; larger excursions are errors.
pub(crate) fn clamp_probability(p: f64) -> Result<f64> {
    if !p.is_finite() || !(-CLAMP_LIMIT..=1.0 + CLAMP_LIMIT).contains(&p) {
        return Err(Error::Numeric(format!("probability {p} outside [0, 1]")));
    }
    Ok(p.clamp(0.0, 1.0))
}
