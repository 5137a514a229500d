//! Bernstein operators and their exact pointwise errors.
//!
//! `B_n[f](x) = Σ C(n,m) f(m/n) x^m (1-x)^(n-m)` is evaluated by direct
//! summation. The binomial weights are anchored at the mode in log domain
//! (saddle-point form), extended outward by the ratio recurrence, cut where
//! they fall below 1e-300, and renormalized with a compensated sum.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Result};
use crate::functions::{BivariateFunction, ScalarFunction};
use crate::numerics::{ln_binomial_pmf, CompensatedSum};

const WEIGHT_FLOOR: f64 = 1e-300;

/// Degree of a Bernstein operator; `Inf` means the coordinate is left exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Degree {
    Finite(usize),
    Inf,
}

impl Degree {
    pub fn finite(n: usize) -> Result<Self> {
        if n == 0 {
            return domain("Bernstein degree must be at least 1");
        }
        Ok(Self::Finite(n))
    }

    pub fn value(&self) -> Option<usize> {
        match self {
            Self::Finite(n) => Some(*n),
            Self::Inf => None,
        }
    }
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(n) => write!(f, "{n}"),
            Self::Inf => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Degree {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Self::Inf);
        }
        let n: usize = s
            .parse()
            .map_err(|_| crate::Error::Config(format!("invalid degree '{s}'")))?;
        Self::finite(n)
    }
}

impl Serialize for Degree {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Finite(n) => serializer.serialize_u64(*n as u64),
            Self::Inf => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Degree {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(usize),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(n) => Degree::finite(n).map_err(serde::de::Error::custom),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Bernstein basis values `b_{n,m}(x)` for `m` in `first .. first + values.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisWeights {
    pub first: usize,
    pub values: Vec<f64>,
}

impl BasisWeights {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &w)| (self.first + i, w))
    }

    /// Sum of the weights before renormalization (partition of unity check).
    pub fn total(&self) -> f64 {
        self.values.iter().copied().collect::<CompensatedSum>().value()
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("{name} must lie in [0, 1], got {x}"));
    }
    Ok(())
}

/// Unnormalized basis weights, anchored in log domain at the mode.
pub fn basis_weights_raw(n: usize, x: f64) -> Result<BasisWeights> {
    check_unit("x", x)?;
    if x == 0.0 || x == 1.0 {
        let first = if x == 0.0 { 0 } else { n };
        return Ok(BasisWeights {
            first,
            values: vec![1.0],
        });
    }
    let mode = (((n + 1) as f64) * x).floor().min(n as f64) as usize;
    let anchor = ln_binomial_pmf(n as u64, mode as u64, x).exp();
    let odds = x / (1.0 - x);

    let mut below = Vec::new();
    let mut w = anchor;
    let mut m = mode;
    while m > 0 {
        w *= m as f64 / ((n - m + 1) as f64 * odds);
        if w < WEIGHT_FLOOR {
            break;
        }
        m -= 1;
        below.push(w);
    }
    let first = mode - below.len();
    below.reverse();
    let mut values = below;
    values.push(anchor);
    let mut w = anchor;
    let mut m = mode;
    while m < n {
        w *= (n - m) as f64 / (m + 1) as f64 * odds;
        if w < WEIGHT_FLOOR {
            break;
        }
        m += 1;
        values.push(w);
    }
    Ok(BasisWeights { first, values })
}

/// Basis weights renormalized to sum to one.
pub fn basis_weights(n: usize, x: f64) -> Result<BasisWeights> {
    let mut w = basis_weights_raw(n, x)?;
    let total = w.total();
    for v in &mut w.values {
        *v /= total;
    }
    Ok(w)
}

/// `Σ_m w_m f(m/n)` for a finite degree.
pub fn bernstein_apply<F: Fn(f64) -> f64>(f: F, n: usize, x: f64) -> Result<f64> {
    if n == 0 {
        return domain("Bernstein degree must be at least 1");
    }
    let w = basis_weights(n, x)?;
    let nf = n as f64;
    Ok(w.iter()
        .map(|(m, wm)| wm * f(m as f64 / nf))
        .collect::<CompensatedSum>()
        .value())
}

/// `B_n[f](x)`; `B_∞[f] = f`.
pub fn bernstein_eval(f: &ScalarFunction, n: Degree, x: f64) -> Result<f64> {
    check_unit("x", x)?;
    match n {
        Degree::Inf => Ok(f.eval(x)),
        Degree::Finite(n) => bernstein_apply(|t| f.eval(t), n, x),
    }
}

/// `Δ_n[f](x) = |B_n[f](x) - f(x)|`.
pub fn error_exact(f: &ScalarFunction, n: Degree, x: f64) -> Result<f64> {
    Ok((bernstein_eval(f, n, x)? - f.eval(x)).abs())
}

/// `B'_n[f](x) = Σ_{j<n} n (f((j+1)/n) - f(j/n)) b_{n-1,j}(x)`.
pub fn bernstein_derivative_apply<F: Fn(f64) -> f64>(f: F, n: usize, x: f64) -> Result<f64> {
    if n < 2 {
        return domain(format!("derivative needs degree n >= 2, got {n}"));
    }
    let w = basis_weights(n - 1, x)?;
    let nf = n as f64;
    Ok(w.iter()
        .map(|(j, wj)| wj * nf * (f((j + 1) as f64 / nf) - f(j as f64 / nf)))
        .collect::<CompensatedSum>()
        .value())
}

pub fn bernstein_derivative_eval(f: &ScalarFunction, n: usize, x: f64) -> Result<f64> {
    check_unit("x", x)?;
    bernstein_derivative_apply(|t| f.eval(t), n, x)
}

/// `B_{n1,n2}[f](x, y)`, with `Inf` leaving that coordinate exact.
pub fn bernstein2_eval(f: &BivariateFunction, n1: Degree, n2: Degree, x: f64, y: f64) -> Result<f64> {
    check_unit("x", x)?;
    check_unit("y", y)?;
    let axis = |n: Degree, t: f64| -> Result<Vec<(f64, f64)>> {
        Ok(match n {
            Degree::Inf => vec![(t, 1.0)],
            Degree::Finite(n) => {
                let nf = n as f64;
                basis_weights(n, t)?.iter().map(|(m, w)| (m as f64 / nf, w)).collect()
            }
        })
    };
    let xs = axis(n1, x)?;
    let ys = axis(n2, y)?;
    let mut acc = CompensatedSum::new();
    for &(u, wu) in &xs {
        for &(v, wv) in &ys {
            acc.add(wu * wv * f.eval(u, v));
        }
    }
    Ok(acc.value())
}

/// `Δ_{n1,n2}[f](x, y) = |B_{n1,n2}[f](x, y) - f(x, y)|`.
pub fn error2_exact(f: &BivariateFunction, n1: Degree, n2: Degree, x: f64, y: f64) -> Result<f64> {
    Ok((bernstein2_eval(f, n1, n2, x, y)? - f.eval(x, y)).abs())
}
