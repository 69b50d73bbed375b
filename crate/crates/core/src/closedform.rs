//! Exact finite-n ESF formulas, closed-form AESF values and population values of
//! the functionals, evaluated analytically or by deterministic quadrature.
//!
//! Supported (functional, model) pairs:
//!
//! | functional            | models                                               |
//! |-----------------------|------------------------------------------------------|
//! | mean, variance        | univariate_normal, uniform_max                       |
//! | phi_linear            | univariate_normal, uniform_max                       |
//! | uniform_max           | uniform_max                                          |
//! | kendall               | bivariate_gaussian, additive_noise                   |
//! | spearman              | bivariate_gaussian, independent_product              |
//! | chatterjee            | bivariate_gaussian, additive_noise, independent_product |
//!
//! Anything else is [`Error::Unsupported`].
//!
//! Kendall: AESF = 4P[(X−x)(Y−y) > 0] − 2 − 2τ. For the Gaussian this is
//! 8Φ_ρ(x,y) − 4Φ(x) − 4Φ(y) + 2 − (4/π)·asin ρ.
//!
//! Chatterjee under Y = g(X) + σZ: every expectation over Y′ = g(X′) + σZ′ is
//! reduced to one over X′ by integrating Z′ analytically,
//!
//! ```text
//! E_Z′[Φ(a − Z′)²]              = Φ_{1/2}(a/√2, a/√2)
//! E_Z′[Φ(a − Z′)·1(Z′ < b)]     = Φ_{1/√2}(a/√2, b)
//! ```
//!
//! so the four terms are at most double integrals over the law of X.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{FunctionalId, Transform};
use crate::models::{Additive, Law, ModelSpec};
use crate::numerics::{bvn_cdf_with, ncdf, Quadrature, QuadratureRule};
use crate::sensitivity::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AesfRequest {
    pub functional: FunctionalId,
    pub model: ModelSpec,
    pub point: Point,
}

fn unsupported(f: FunctionalId, model: &ModelSpec) -> Error {
    Error::unsupported(format!("no closed form for {f} under {}", model.name()))
}

/// Mean and variance of a univariate model.
fn moments(model: &ModelSpec) -> Option<(f64, f64)> {
    match model {
        ModelSpec::UnivariateNormal { .. } | ModelSpec::UniformMax { .. } => {
            let law = model.x_law();
            Some((law.mean(), law.variance()))
        }
        _ => None,
    }
}

/// Exact E[SF] at sample size n for mean, variance and uniform_max.
pub fn esf_exact(f: FunctionalId, model: &ModelSpec, x: f64, n: usize) -> Result<f64> {
    model.validate()?;
    if n == 0 {
        return Err(Error::domain("n must be positive"));
    }
    if !x.is_finite() {
        return Err(Error::domain("point must be finite"));
    }
    let nf = n as f64;
    match f {
        FunctionalId::Mean => {
            let (mu, _) = moments(model).ok_or_else(|| unsupported(f, model))?;
            Ok(x - mu)
        }
        FunctionalId::Variance => {
            let (mu, var) = moments(model).ok_or_else(|| unsupported(f, model))?;
            let k = nf / (nf + 1.0);
            Ok(k * x * x - 2.0 * k * x * mu + k * mu * mu - (nf * nf - nf - 1.0) / (nf * (nf + 1.0)) * var)
        }
        FunctionalId::UniformMax => {
            let ModelSpec::UniformMax { theta } = *model else {
                return Err(unsupported(f, model));
            };
            check_in_support(x, theta)?;
            Ok(x * (x / theta).powi(n as i32))
        }
        _ => Err(unsupported(f, model)),
    }
}

fn check_in_support(x: f64, theta: f64) -> Result<()> {
    if (0.0..=theta).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("x = {x} lies outside [0, {theta}]")))
    }
}

/// AESF at one point with the default quadrature.
pub fn aesf(req: &AesfRequest) -> Result<f64> {
    AesfEvaluator::new(req.functional, &req.model)?.eval(req.point)
}

/// Population value R(F) with the default quadrature.
pub fn population_value(f: FunctionalId, model: &ModelSpec) -> Result<f64> {
    Ok(AesfEvaluator::new(f, model)?.population())
}

pub fn is_supported(f: FunctionalId, model: &ModelSpec) -> bool {
    AesfEvaluator::new(f, model).is_ok()
}

#[derive(Debug, Clone)]
enum Prepared {
    Mean { mu: f64 },
    Variance { mu: f64, var: f64 },
    PhiLinear { g: Transform, eg: f64, value: f64, slope: f64 },
    UniformMax { theta: f64 },
    KendallGaussian { rho: f64 },
    KendallAdditive { add: Additive, tau: f64 },
    SpearmanGaussian { rho: f64 },
    SpearmanIndependent { x_law: Law, y_law: Law, efx: f64, efy: f64 },
    ChatterjeeAdditive { add: Additive, t1: f64 },
    ChatterjeeIndependent { y_law: Law, t1: f64 },
}

/// AESF for one (functional, model) pair. Point-independent pieces (τ, the
/// double integral of Chatterjee's first term, ...) are computed once here, so
/// grids should reuse one evaluator.
pub struct AesfEvaluator<'q> {
    functional: FunctionalId,
    q: &'q Quadrature,
    /// Legendre rule for bivariate-normal probabilities at |ρ| ≤ 1/√2, where the
    /// integrand is analytic and a quarter of the main order is ample.
    kernel: QuadratureRule,
    prepared: Prepared,
}

impl AesfEvaluator<'static> {
    pub fn new(f: FunctionalId, model: &ModelSpec) -> Result<Self> {
        AesfEvaluator::with_quadrature(f, model, Quadrature::standard())
    }
}

impl<'q> AesfEvaluator<'q> {
    pub fn with_quadrature(f: FunctionalId, model: &ModelSpec, q: &'q Quadrature) -> Result<Self> {
        model.validate()?;
        let kernel = QuadratureRule::legendre((q.order() / 4).max(16), -1.0, 1.0)?;
        let mut ev = AesfEvaluator { functional: f, q, kernel, prepared: Prepared::Mean { mu: 0.0 } };
        ev.prepared = ev.prepare(model)?;
        Ok(ev)
    }

    pub fn functional(&self) -> FunctionalId {
        self.functional
    }

    fn prepare(&self, model: &ModelSpec) -> Result<Prepared> {
        let f = self.functional;
        let prepared = match (f, *model) {
            (FunctionalId::Mean, _) => {
                let (mu, _) = moments(model).ok_or_else(|| unsupported(f, model))?;
                Prepared::Mean { mu }
            }
            (FunctionalId::Variance, _) => {
                let (mu, var) = moments(model).ok_or_else(|| unsupported(f, model))?;
                Prepared::Variance { mu, var }
            }
            (FunctionalId::PhiLinear { g, phi }, _) => {
                let (mu, var) = moments(model).ok_or_else(|| unsupported(f, model))?;
                let eg = match g {
                    Transform::Identity => mu,
                    Transform::Square => var + mu * mu,
                };
                Prepared::PhiLinear { g, eg, value: phi.apply(eg), slope: phi.derivative(eg) }
            }
            (FunctionalId::UniformMax, ModelSpec::UniformMax { theta }) => Prepared::UniformMax { theta },
            (FunctionalId::Kendall, ModelSpec::BivariateGaussian { rho }) => Prepared::KendallGaussian { rho },
            (FunctionalId::Kendall, ModelSpec::AdditiveNoise { .. }) => {
                let add = model.additive().expect("additive");
                Prepared::KendallAdditive { add, tau: self.kendall_tau_additive(&add)? }
            }
            (FunctionalId::Spearman, ModelSpec::BivariateGaussian { rho }) => Prepared::SpearmanGaussian { rho },
            (FunctionalId::Spearman, ModelSpec::IndependentProduct { x_law, y_law }) => {
                let efx = x_law.expect_split(self.q, &[], |t| x_law.cdf(t));
                let efy = y_law.expect_split(self.q, &[], |t| y_law.cdf(t));
                Prepared::SpearmanIndependent { x_law, y_law, efx, efy }
            }
            (FunctionalId::Chatterjee, ModelSpec::BivariateGaussian { .. } | ModelSpec::AdditiveNoise { .. }) => {
                let add = model.additive().expect("additive");
                Prepared::ChatterjeeAdditive { add, t1: self.chatterjee_t1(&add)? }
            }
            (FunctionalId::Chatterjee, ModelSpec::IndependentProduct { y_law, .. }) => {
                let t1 = y_law.expect_split(self.q, &[], |t| {
                    let s = 1.0 - y_law.cdf(t);
                    s * s
                });
                Prepared::ChatterjeeIndependent { y_law, t1 }
            }
            _ => return Err(unsupported(f, model)),
        };
        Ok(prepared)
    }

    /// Φ_{1/2}(a/√2, a/√2) = E_Z[Φ(a − Z)²].
    fn diag(&self, a: f64) -> Result<f64> {
        let h = a / std::f64::consts::SQRT_2;
        bvn_cdf_with(&self.kernel, h, h, 0.5)
    }

    /// τ = 4·E[1(X < X′)·Φ((g(X′) − g(X))/(σ√2))] − 1.
    fn kendall_tau_additive(&self, add: &Additive) -> Result<f64> {
        let scale = add.sigma * std::f64::consts::SQRT_2;
        let law = add.x_law;
        let (lo, _) = law.window();
        let outer = law.expect_split(self.q, &add.structural_breaks(), |xp| {
            let gp = add.link.apply(xp);
            let breaks = add.breaks_near(&[gp], scale);
            law.integrate_split(self.q, lo, xp, &breaks, |x| ncdf((gp - add.link.apply(x)) / scale))
        });
        finite(4.0 * outer - 1.0, "kendall tau")
    }

    /// E_{X′} E_X [Φ_{1/2}(a/√2, a/√2)], a = (g(X) − g(X′))/σ.
    fn chatterjee_t1(&self, add: &Additive) -> Result<f64> {
        let law = add.x_law;
        let mut err = None;
        let v = law.expect_split(self.q, &add.structural_breaks(), |xp| {
            let gp = add.link.apply(xp);
            let breaks = add.breaks_near(&[gp], add.sigma);
            law.expect_split(self.q, &breaks, |x| {
                self.diag((add.link.apply(x) - gp) / add.sigma).unwrap_or_else(|e| {
                    err.get_or_insert(e);
                    f64::NAN
                })
            })
        });
        if let Some(e) = err {
            return Err(e);
        }
        finite(v, "chatterjee first term")
    }

    /// R(F).
    pub fn population(&self) -> f64 {
        match self.prepared {
            Prepared::Mean { mu } => mu,
            Prepared::Variance { var, .. } => var,
            Prepared::PhiLinear { value, .. } => value,
            Prepared::UniformMax { theta } => theta,
            Prepared::KendallGaussian { rho } => 2.0 / PI * rho.asin(),
            Prepared::KendallAdditive { tau, .. } => tau,
            Prepared::SpearmanGaussian { rho } => 6.0 / PI * (rho / 2.0).asin(),
            Prepared::SpearmanIndependent { efx, efy, .. } => 12.0 * efx * efy - 3.0,
            // ∫V(E[1{Y≥t}|X])dF_Y(t) / ∫V(1{Y≥t})dF_Y(t), with ∫F(1−F)dF = 1/6
            // for a continuous marginal; the numerator is T1 − 1/3.
            Prepared::ChatterjeeAdditive { t1, .. } | Prepared::ChatterjeeIndependent { t1, .. } => 6.0 * t1 - 2.0,
        }
    }

    fn expect_arity(&self, point: Point) -> Result<()> {
        if self.functional.is_bivariate() != point.y.is_some() {
            return Err(Error::domain(format!(
                "{} takes a point with {}",
                self.functional,
                if self.functional.is_bivariate() { "x and y" } else { "x only" }
            )));
        }
        if !point.x.is_finite() || point.y.is_some_and(|y| !y.is_finite()) {
            return Err(Error::domain("point must be finite"));
        }
        Ok(())
    }

    pub fn eval(&self, point: Point) -> Result<f64> {
        self.expect_arity(point)?;
        let x = point.x;
        let y = point.y.unwrap_or(f64::NAN);
        let v = match self.prepared {
            Prepared::Mean { mu } => x - mu,
            Prepared::Variance { mu, var } => (x - mu) * (x - mu) - var,
            Prepared::PhiLinear { g, eg, slope, .. } => (g.apply(x) - eg) * slope,
            Prepared::UniformMax { theta } => {
                check_in_support(x, theta)?;
                if x < theta {
                    0.0
                } else {
                    theta
                }
            }
            Prepared::KendallGaussian { rho } => {
                let joint = self.q.bvn(x, y, rho)?;
                8.0 * joint - 4.0 * ncdf(x) - 4.0 * ncdf(y) + 2.0 - 4.0 / PI * rho.asin()
            }
            Prepared::KendallAdditive { add, tau } => {
                let law = add.x_law;
                let (lo, hi) = law.window();
                let mut breaks = add.breaks_near(&[y], add.sigma);
                breaks.push(x);
                let above = law.integrate_split(self.q, x, hi, &breaks, |t| add.survival(y, t));
                let below = law.integrate_split(self.q, lo, x, &breaks, |t| 1.0 - add.survival(y, t));
                4.0 * (above + below) - 2.0 - 2.0 * tau
            }
            Prepared::SpearmanGaussian { rho } => {
                let s = ((1.0 - rho) * (1.0 + rho)).sqrt();
                let ex = self.q.expect_normal(|t| ncdf(t) * ncdf((rho * t - y) / s));
                let ey = self.q.expect_normal(|t| ncdf(t) * ncdf((rho * t - x) / s));
                12.0 * ncdf(x) * ncdf(y) + 12.0 * ex + 12.0 * ey - 18.0 / PI * (rho / 2.0).asin() - 9.0
            }
            Prepared::SpearmanIndependent { x_law, y_law, efx, efy } => {
                let (u, w) = (x_law.cdf(x), y_law.cdf(y));
                // E[F_X(X)1(Y ≥ y)] factorizes under independence; S = 12·E F_X·E F_Y − 3.
                let s = 12.0 * efx * efy - 3.0;
                12.0 * u * w + 12.0 * efx * (1.0 - w) + 12.0 * efy * (1.0 - u) - 3.0 * s - 9.0
            }
            Prepared::ChatterjeeAdditive { add, t1 } => self.chatterjee_additive(&add, t1, x, y)?,
            Prepared::ChatterjeeIndependent { y_law, t1 } => {
                let v = 1.0 - y_law.cdf(y);
                let t4 = y_law.integrate_split(self.q, f64::NEG_INFINITY, y, &[], |t| 1.0 - y_law.cdf(t));
                -12.0 * t1 + 6.0 * v * v - 6.0 * t1 + 12.0 * t4
            }
        };
        finite(v, "AESF")
    }

    fn chatterjee_additive(&self, add: &Additive, t1: f64, x: f64, y: f64) -> Result<f64> {
        let law = add.x_law;
        let sigma = add.sigma;
        let gx = add.link.apply(x);
        let t2 = law.expect_split(self.q, &add.breaks_near(&[y], sigma), |t| {
            let p = add.survival(y, t);
            p * p
        });
        let breaks = add.breaks_near(&[gx, y], sigma);
        let mut err = None;
        let mut keep = |r: Result<f64>| {
            r.unwrap_or_else(|e| {
                err.get_or_insert(e);
                f64::NAN
            })
        };
        let t3 = law.expect_split(self.q, &breaks, |xp| keep(self.diag((gx - add.link.apply(xp)) / sigma)));
        let t4 = law.expect_split(self.q, &breaks, |xp| {
            let gp = add.link.apply(xp);
            let a = (gx - gp) / sigma;
            keep(bvn_cdf_with(
                &self.kernel,
                a / std::f64::consts::SQRT_2,
                (y - gp) / sigma,
                std::f64::consts::FRAC_1_SQRT_2,
            ))
        });
        if let Some(e) = err {
            return Err(e);
        }
        Ok(-12.0 * t1 + 6.0 * t2 - 6.0 * t3 + 12.0 * t4)
    }

    /// AESF over the grid xs × ys, x outer and y inner, evaluated in parallel
    /// with the output in grid order.
    pub fn grid(&self, xs: &[f64], ys: &[f64]) -> Result<Vec<f64>> {
        let points: Vec<Point> = xs
            .iter()
            .flat_map(|&x| ys.iter().map(move |&y| Point::bivariate(x, y)))
            .collect();
        points.par_iter().map(|&p| self.eval(p)).collect()
    }
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("{what} evaluated to {v}")))
    }
}

/// `count` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| {
                if i == count - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}
