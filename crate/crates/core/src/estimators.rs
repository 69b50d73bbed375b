//! Plug-in estimators evaluated on a [`Dataset`].
//!
//! The rank-based estimators (Kendall's τ, Spearman's S, Chatterjee's ξ) assume
//! continuous data and reject ties with [`Error::Tie`] instead of breaking them.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Axis, Error, Result};

/// Paired (or univariate) observations; the empirical distribution F_n.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    xs: Vec<f64>,
    ys: Option<Vec<f64>>,
}

impl Dataset {
    pub fn univariate(xs: Vec<f64>) -> Result<Self> {
        check_finite(&xs, Axis::X)?;
        Ok(Self { xs, ys: None })
    }

    pub fn bivariate(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::domain(format!(
                "x and y columns differ in length ({} vs {})",
                xs.len(),
                ys.len()
            )));
        }
        check_finite(&xs, Axis::X)?;
        check_finite(&ys, Axis::Y)?;
        Ok(Self { xs, ys: Some(ys) })
    }

    /// Construction without validation, for samplers that only emit finite values.
    pub(crate) fn from_parts(xs: Vec<f64>, ys: Option<Vec<f64>>) -> Self {
        debug_assert!(ys.as_ref().is_none_or(|y| y.len() == xs.len()));
        Self { xs, ys }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> Option<&[f64]> {
        self.ys.as_deref()
    }

    pub fn is_bivariate(&self) -> bool {
        self.ys.is_some()
    }

    /// The y column, or a domain error for univariate data.
    pub fn require_ys(&self) -> Result<&[f64]> {
        self.ys
            .as_deref()
            .ok_or_else(|| Error::domain("bivariate estimator needs a y column"))
    }

    /// A copy with one more observation appended. `y` must be given exactly when
    /// the dataset is bivariate.
    pub fn with_point(&self, x: f64, y: Option<f64>) -> Result<Self> {
        if !x.is_finite() || y.is_some_and(|v| !v.is_finite()) {
            return Err(Error::domain("inserted point must be finite"));
        }
        let mut xs = Vec::with_capacity(self.xs.len() + 1);
        xs.extend_from_slice(&self.xs);
        xs.push(x);
        let ys = match (&self.ys, y) {
            (Some(ys), Some(y)) => {
                let mut v = Vec::with_capacity(ys.len() + 1);
                v.extend_from_slice(ys);
                v.push(y);
                Some(v)
            }
            (None, None) => None,
            (Some(_), None) => return Err(Error::domain("bivariate dataset needs a y coordinate")),
            (None, Some(_)) => return Err(Error::domain("univariate dataset takes no y coordinate")),
        };
        Ok(Self { xs, ys })
    }
}

fn check_finite(v: &[f64], axis: Axis) -> Result<()> {
    match v.iter().position(|t| !t.is_finite()) {
        Some(i) => Err(Error::domain(format!("non-finite {axis} value at row {i}"))),
        None => Ok(()),
    }
}

/// Inner transform g of a φ-linear functional φ(∫g dF).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Transform {
    Identity,
    Square,
}

impl Transform {
    pub fn apply(self, t: f64) -> f64 {
        match self {
            Transform::Identity => t,
            Transform::Square => t * t,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Square => "square",
        }
    }
}

/// Outer map φ of a φ-linear functional, with its analytic derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OuterMap {
    Identity,
    Square,
    Sine,
}

impl OuterMap {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            OuterMap::Identity => z,
            OuterMap::Square => z * z,
            OuterMap::Sine => z.sin(),
        }
    }

    pub fn derivative(self, z: f64) -> f64 {
        match self {
            OuterMap::Identity => 1.0,
            OuterMap::Square => 2.0 * z,
            OuterMap::Sine => z.cos(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            OuterMap::Identity => "identity",
            OuterMap::Square => "square",
            OuterMap::Sine => "sine",
        }
    }
}

/// Which estimator is under study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionalId {
    Mean,
    /// Plug-in variance (denominator n).
    Variance,
    /// Sample maximum, the plug-in estimator of a uniform upper endpoint.
    UniformMax,
    Kendall,
    Spearman,
    Chatterjee,
    PhiLinear { g: Transform, phi: OuterMap },
}

impl FunctionalId {
    pub fn is_bivariate(self) -> bool {
        matches!(
            self,
            FunctionalId::Kendall | FunctionalId::Spearman | FunctionalId::Chatterjee
        )
    }
}

impl fmt::Display for FunctionalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionalId::Mean => f.write_str("mean"),
            FunctionalId::Variance => f.write_str("variance"),
            FunctionalId::UniformMax => f.write_str("uniform_max"),
            FunctionalId::Kendall => f.write_str("kendall"),
            FunctionalId::Spearman => f.write_str("spearman"),
            FunctionalId::Chatterjee => f.write_str("chatterjee"),
            FunctionalId::PhiLinear { g, phi } => {
                write!(f, "phi_linear:{}:{}", g.name(), phi.name())
            }
        }
    }
}

impl serde::Serialize for FunctionalId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for FunctionalId {
    type Err = Error;

    /// Accepts `mean`, `variance`, `uniform_max`, `kendall`, `spearman`, `chatterjee`
    /// and `phi_linear:<g>:<phi>` with g ∈ {identity, square}, phi ∈ {identity, square, sine}.
    /// Hyphens and underscores are interchangeable.
    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        let parsed = match norm.as_str() {
            "mean" => FunctionalId::Mean,
            "variance" => FunctionalId::Variance,
            "uniform_max" | "max" => FunctionalId::UniformMax,
            "kendall" | "tau" => FunctionalId::Kendall,
            "spearman" => FunctionalId::Spearman,
            "chatterjee" | "xi" => FunctionalId::Chatterjee,
            other => {
                let parts: Vec<&str> = other.split(':').collect();
                match parts.as_slice() {
                    ["phi_linear", g, phi] => {
                        let g = match *g {
                            "identity" => Transform::Identity,
                            "square" => Transform::Square,
                            _ => return Err(Error::Parse(format!("unknown transform g '{g}'"))),
                        };
                        let phi = match *phi {
                            "identity" => OuterMap::Identity,
                            "square" => OuterMap::Square,
                            "sine" | "sin" => OuterMap::Sine,
                            _ => return Err(Error::Parse(format!("unknown outer map '{phi}'"))),
                        };
                        FunctionalId::PhiLinear { g, phi }
                    }
                    _ => return Err(Error::Parse(format!("unknown functional '{s}'"))),
                }
            }
        };
        Ok(parsed)
    }
}

/// Evaluates the plug-in estimator `f` on `ds`.
pub fn estimate(f: FunctionalId, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::domain("estimator needs at least one observation"));
    }
    let xs = ds.xs();
    let n = xs.len() as f64;
    match f {
        FunctionalId::Mean => Ok(xs.iter().sum::<f64>() / n),
        FunctionalId::Variance => {
            let mean = xs.iter().sum::<f64>() / n;
            let mean_sq = xs.iter().map(|x| x * x).sum::<f64>() / n;
            Ok(mean_sq - mean * mean)
        }
        FunctionalId::UniformMax => Ok(xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        FunctionalId::PhiLinear { g, phi } => {
            let avg = xs.iter().map(|&x| g.apply(x)).sum::<f64>() / n;
            Ok(phi.apply(avg))
        }
        FunctionalId::Kendall => kendall_tau(ds),
        FunctionalId::Spearman => spearman_s(ds),
        FunctionalId::Chatterjee => chatterjee_xi(ds),
    }
}

fn rank_inputs(ds: &Dataset) -> Result<(&[f64], &[f64])> {
    let ys = ds.require_ys()?;
    if ds.len() < 2 {
        return Err(Error::domain("rank correlation needs at least two observations"));
    }
    Ok((ds.xs(), ys))
}

/// Indices that sort `v` ascending; a tie is reported with both row indices (smaller first).
fn argsort_strict(v: &[f64], axis: Axis) -> Result<Vec<usize>> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_unstable_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    for w in idx.windows(2) {
        if v[w[0]] == v[w[1]] {
            return Err(Error::Tie {
                axis,
                first: w[0].min(w[1]),
                second: w[0].max(w[1]),
            });
        }
    }
    Ok(idx)
}

/// r(vᵢ) = #{j : vⱼ ≤ vᵢ}, 1-based, for tie-free data.
fn ranks(v: &[f64], axis: Axis) -> Result<Vec<usize>> {
    let order = argsort_strict(v, axis)?;
    let mut r = vec![0; v.len()];
    for (pos, &i) in order.iter().enumerate() {
        r[i] = pos + 1;
    }
    Ok(r)
}

fn tau_from_sign_sum(sign_sum: i64, n: usize) -> f64 {
    2.0 * sign_sum as f64 / (n as f64 * (n - 1) as f64)
}

/// Kendall's τ = 2/(n(n−1)) Σ_{i<j} sgn[(Xᵢ−Xⱼ)(Yᵢ−Yⱼ)], sgn(0) = +1.
///
/// O(n log n): discordant pairs are the inversions of the y sequence after sorting by x.
pub fn kendall_tau(ds: &Dataset) -> Result<f64> {
    let (xs, ys) = rank_inputs(ds)?;
    let order = argsort_strict(xs, Axis::X)?;
    argsort_strict(ys, Axis::Y)?;
    let mut seq: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
    let mut buf = vec![0.0; seq.len()];
    let discordant = count_inversions(&mut seq, &mut buf) as i64;
    let n = xs.len();
    let pairs = (n * (n - 1) / 2) as i64;
    Ok(tau_from_sign_sum(pairs - 2 * discordant, n))
}

/// O(n²) pairwise definition of Kendall's τ; must agree bit-for-bit with [`kendall_tau`].
pub fn kendall_tau_reference(ds: &Dataset) -> Result<f64> {
    let (xs, ys) = rank_inputs(ds)?;
    argsort_strict(xs, Axis::X)?;
    argsort_strict(ys, Axis::Y)?;
    let n = xs.len();
    let mut sum = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            sum += sgn((xs[i] - xs[j]) * (ys[i] - ys[j]));
        }
    }
    Ok(tau_from_sign_sum(sum, n))
}

/// sgn(t) = 1 for t ≥ 0, −1 otherwise.
fn sgn(t: f64) -> i64 {
    if t >= 0.0 {
        1
    } else {
        -1
    }
}

/// Merge sort that returns the number of strictly inverted pairs.
fn count_inversions(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = {
        let (left, right) = v.split_at_mut(mid);
        let (lb, rb) = buf.split_at_mut(mid);
        count_inversions(left, lb) + count_inversions(right, rb)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[i] <= v[j] {
            buf[k] = v[i];
            i += 1;
        } else {
            buf[k] = v[j];
            j += 1;
            count += (mid - i) as u64;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    count
}

/// Spearman's S = 1 − 6 Σ[r(Xᵢ) − r(Yᵢ)]² / (n(n−1)(n+1)).
pub fn spearman_s(ds: &Dataset) -> Result<f64> {
    let (xs, ys) = rank_inputs(ds)?;
    let rx = ranks(xs, Axis::X)?;
    let ry = ranks(ys, Axis::Y)?;
    let d2: u128 = rx
        .iter()
        .zip(&ry)
        .map(|(&a, &b)| {
            let d = a.abs_diff(b) as u128;
            d * d
        })
        .sum();
    let n = xs.len() as f64;
    Ok(1.0 - 6.0 * d2 as f64 / (n * (n - 1.0) * (n + 1.0)))
}

/// Chatterjee's ξ = 1 − 3 Σ|r_{i+1} − r_i| / (n² − 1), where r_i is the rank of the
/// concomitant of the i-th smallest x.
pub fn chatterjee_xi(ds: &Dataset) -> Result<f64> {
    let (xs, ys) = rank_inputs(ds)?;
    let order = argsort_strict(xs, Axis::X)?;
    let ry = ranks(ys, Axis::Y)?;
    let gaps: u64 = order
        .windows(2)
        .map(|w| ry[w[1]].abs_diff(ry[w[0]]) as u64)
        .sum();
    let n = xs.len() as f64;
    Ok(1.0 - 3.0 * gaps as f64 / (n * n - 1.0))
}
