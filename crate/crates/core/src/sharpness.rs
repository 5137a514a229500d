//! Experiments on the constants of the `Δ ≤ 2J` bound: ratio traces over
//! geometric degree sequences, the trial-function asymptote, and the
//! bivariate and derivative variants.

use serde::Serialize;

use crate::bernstein::{bernstein_derivative_eval, error2_exact, error_exact, Degree};
use crate::bounds::{j2_functional, j_functional, UNDEFINED_RATIO};
use crate::error::{config, domain, Error, Result};
use crate::functions::{constant_one, trial_G, trial_g, BivariateFunction, ScalarFunction};
use crate::numerics::QuadratureConfig;

/// One degree of a trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub label: String,
    pub x: f64,
    pub n: usize,
    pub delta: f64,
    pub j: Option<f64>,
    #[serde(serialize_with = "opt_or_marker")]
    pub ratio: Option<f64>,
    pub asymptote: Option<f64>,
    pub residual_times_n: Option<f64>,
}

fn opt_or_marker<S: serde::Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.serialize_f64(*v),
        None => s.serialize_str(UNDEFINED_RATIO),
    }
}

/// Ratios `Δ_n / J_n` along increasing `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioTrace {
    pub label: String,
    pub x: f64,
    pub rows: Vec<TraceRow>,
    /// Richardson limit of the ratios in `h = n^(-1/2)`.
    pub extrapolated_limit: Option<f64>,
}

impl RatioTrace {
    fn new(label: &str, x: f64, rows: Vec<TraceRow>) -> Self {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.ratio.map(|v| (1.0 / (r.n as f64).sqrt(), v)))
            .collect();
        Self {
            label: label.to_string(),
            x,
            extrapolated_limit: richardson_limit(&pts),
            rows,
        }
    }

    pub fn n_values(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.n).collect()
    }

    pub fn ratios(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.ratio).collect()
    }

    pub fn asymptote_residuals(&self) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.residual_times_n).collect()
    }

    /// Largest relative gap between the ratios of two traces over the same
    /// degrees; `None` when the degrees or the defined cells differ.
    pub fn max_relative_gap(&self, other: &RatioTrace) -> Option<f64> {
        if self.n_values() != other.n_values() {
            return None;
        }
        let mut gap: f64 = 0.0;
        for (a, b) in self.rows.iter().zip(&other.rows) {
            match (a.ratio, b.ratio) {
                (Some(u), Some(v)) => gap = gap.max((u - v).abs() / v.abs().max(f64::MIN_POSITIVE)),
                (None, None) => {}
                _ => return None,
            }
        }
        Some(gap)
    }
}

/// Extrapolates `r(h) = L + a h + b h²` to `h = 0` through the last three
/// points (fewer when fewer are available).
pub fn richardson_limit(points: &[(f64, f64)]) -> Option<f64> {
    let tail = &points[points.len().saturating_sub(3)..];
    if tail.is_empty() {
        return None;
    }
    let mut limit = 0.0;
    for (i, &(hi, ri)) in tail.iter().enumerate() {
        let mut w = 1.0;
        for (k, &(hk, _)) in tail.iter().enumerate() {
            if k != i {
                w *= hk / (hk - hi);
            }
        }
        limit += w * ri;
    }
    limit.is_finite().then_some(limit)
}

fn check_open_unit(name: &str, t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return domain(format!("{name} must lie in (0, 1), got {t}"));
    }
    Ok(())
}

fn check_degrees(n_values: &[usize], min: usize) -> Result<()> {
    if n_values.is_empty() {
        return config("degree list is empty");
    }
    if n_values[0] < min {
        return domain(format!("degrees must be at least {min}, got {}", n_values[0]));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return config("degrees must be strictly increasing");
    }
    Ok(())
}

/// `√(2x(1-x)/(πn))`, the leading term of `Δ_n[g_x](x)`.
pub fn trial_asymptote(x: f64, n: usize) -> Result<f64> {
    check_open_unit("x", x)?;
    if n == 0 {
        return domain("asymptote needs n >= 1");
    }
    Ok((2.0 * x * (1.0 - x) / (std::f64::consts::PI * n as f64)).sqrt())
}

fn ratio(delta: f64, j: f64) -> Option<f64> {
    (j > 0.0).then(|| delta / j)
}

/// `Δ_n[g_x](x)` against its leading term, with `n (Δ_n - leading term)`
/// per degree and `J_n` under the default quadrature settings.
pub fn trial_residual_trace(x: f64, n_values: &[usize]) -> Result<RatioTrace> {
    check_open_unit("x", x)?;
    check_degrees(n_values, 1)?;
    let g = trial_g(x)?;
    let m = g.exact_modulus().cloned().expect("trial functions carry a modulus");
    let cfg = QuadratureConfig::default();
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let delta = error_exact(&g, Degree::Finite(n), x)?;
        let j = j_functional(&m, n, x, &cfg)?;
        let a = trial_asymptote(x, n)?;
        rows.push(TraceRow {
            label: g.label().to_string(),
            x,
            n,
            delta,
            j: Some(j),
            ratio: ratio(delta, j),
            asymptote: Some(a),
            residual_times_n: Some(n as f64 * (delta - a)),
        });
    }
    Ok(RatioTrace::new(g.label(), x, rows))
}

/// `Δ_n[f](x) / J_n[f](x)` along `n_values`.
pub fn ratio_trace(f: &ScalarFunction, x: f64, n_values: &[usize], cfg: &QuadratureConfig) -> Result<RatioTrace> {
    check_open_unit("x", x)?;
    check_degrees(n_values, 1)?;
    let m = f
        .exact_modulus()
        .ok_or_else(|| Error::Config(format!("function '{}' carries no modulus of continuity", f.label())))?;
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let delta = error_exact(f, Degree::Finite(n), x)?;
        let j = j_functional(m, n, x, cfg)?;
        rows.push(TraceRow {
            label: f.label().to_string(),
            x,
            n,
            delta,
            j: Some(j),
            ratio: ratio(delta, j),
            asymptote: None,
            residual_times_n: None,
        });
    }
    Ok(RatioTrace::new(f.label(), x, rows))
}

/// Ratios `Δ_{n,∞} / J_{n,∞}` for `f(x, y) = g_t(x) · 1`, which reduce to
/// the univariate ratios of `g_t` at `x`.
pub fn bivariate_ratio_check(
    t1: f64,
    x: f64,
    y: f64,
    n_values: &[usize],
    cfg: &QuadratureConfig,
) -> Result<RatioTrace> {
    check_open_unit("t1", t1)?;
    check_open_unit("x", x)?;
    if !(0.0..=1.0).contains(&y) {
        return domain(format!("y must lie in [0, 1], got {y}"));
    }
    check_degrees(n_values, 1)?;
    let f0 = BivariateFunction::product(&trial_g(t1)?, &constant_one())?;
    let m2 = f0.exact_modulus2().expect("products carry a modulus");
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let delta = error2_exact(&f0, Degree::Finite(n), Degree::Inf, x, y)?;
        let j = j2_functional(m2, Degree::Finite(n), Degree::Inf, x, y, cfg)?;
        rows.push(TraceRow {
            label: f0.label().to_string(),
            x,
            n,
            delta,
            j: Some(j),
            ratio: ratio(delta, j),
            asymptote: None,
            residual_times_n: None,
        });
    }
    Ok(RatioTrace::new(f0.label(), x, rows))
}

/// `|B'_n[G_t](x) - g_t(x)|` against `J_n[g_t](x)`; a ratio of at least 1
/// means the derivative error dominates the functional at that degree.
pub fn derivative_trial_check(t: f64, x: f64, n_values: &[usize], cfg: &QuadratureConfig) -> Result<RatioTrace> {
    check_open_unit("t", t)?;
    check_open_unit("x", x)?;
    check_degrees(n_values, 2)?;
    let big_g = trial_G(t)?;
    let g = trial_g(t)?;
    let m = g.exact_modulus().expect("trial functions carry a modulus");
    let mut rows = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let delta = (bernstein_derivative_eval(&big_g, n, x)? - g.eval(x)).abs();
        let j = j_functional(m, n, x, cfg)?;
        rows.push(TraceRow {
            label: big_g.label().to_string(),
            x,
            n,
            delta,
            j: Some(j),
            ratio: ratio(delta, j),
            asymptote: None,
            residual_times_n: None,
        });
    }
    Ok(RatioTrace::new(big_g.label(), x, rows))
}

/// `2^lo, 2^(lo+1), …, 2^hi`
pub fn powers_of_two(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::corpus_lookup;
    use std::f64::consts::PI;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn asymptote_values() {
        let a = trial_asymptote(0.5, 100).unwrap();
        assert!((a - 0.039_894_228_040_143_27).abs() < 1e-15);
        assert!((trial_asymptote(0.5, 400).unwrap() - 0.5 * a).abs() < 1e-16);
        let (l, r) = (trial_asymptote(0.3, 7).unwrap(), trial_asymptote(0.7, 7).unwrap());
        assert!((l - r).abs() <= 1e-15 * l);
        assert!(trial_asymptote(0.0, 7).is_err());
    }

    #[test]
    fn residual_trace_shrinks() {
        let t = trial_residual_trace(0.5, &[64, 100, 4096]).unwrap();
        let d = &t.rows;
        assert!((d[1].delta - 0.039_794_618_693_589_38).abs() < 1e-12);
        assert!((d[2].delta - d[2].asymptote.unwrap()).abs() < (d[0].delta - d[0].asymptote.unwrap()).abs());
        assert!(t.asymptote_residuals().iter().all(|r| r.unwrap().abs() <= 1.0));
    }

    #[test]
    fn ratio_trace_of_trial_function() {
        let g = trial_g(0.5).unwrap();
        let t = ratio_trace(&g, 0.5, &powers_of_two(4, 12), &cfg()).unwrap();
        for r in t.ratios() {
            let r = r.unwrap();
            assert!((1.0 / PI..=2.0).contains(&r));
        }
        let lim = t.extrapolated_limit.unwrap();
        assert!((lim - 2.0 / PI).abs() < 0.02);

        let id = corpus_lookup("identity").unwrap();
        let t = ratio_trace(&id, 0.3, &[4, 8], &cfg()).unwrap();
        assert!(t.ratios().iter().all(|r| r.unwrap() < 1e-12));
    }

    #[test]
    fn bivariate_trace_matches_univariate() {
        let ns = powers_of_two(2, 8);
        let b = bivariate_ratio_check(0.4, 0.3, 0.6, &ns, &cfg()).unwrap();
        let u = ratio_trace(&trial_g(0.4).unwrap(), 0.3, &ns, &cfg()).unwrap();
        assert!(b.max_relative_gap(&u).unwrap() <= 2.0 * cfg().rel_tol);
        assert!(b.ratios().iter().all(|r| (0.0..=4.0).contains(&r.unwrap())));
    }

    #[test]
    fn derivative_trial_values() {
        let t = derivative_trial_check(0.5, 0.5, &powers_of_two(2, 10), &cfg()).unwrap();
        assert!(t.rows.iter().all(|r| r.delta > 0.0));
        let (first, last) = (&t.rows[0], t.rows.last().unwrap());
        assert!(last.delta < first.delta && last.j.unwrap() < first.j.unwrap());
        assert!(derivative_trial_check(0.5, 0.5, &[1, 2], &cfg()).is_err());
    }

    #[test]
    fn richardson_exact_on_quadratics() {
        let pts: Vec<(f64, f64)> = [0.5, 0.25, 0.125].iter().map(|&h| (h, 3.0 + 2.0 * h - h * h)).collect();
        assert!((richardson_limit(&pts).unwrap() - 3.0).abs() < 1e-13);
        assert_eq!(richardson_limit(&[]), None);
        assert_eq!(richardson_limit(&[(0.1, 7.0)]), Some(7.0));
    }

    #[test]
    fn degree_lists_validated() {
        let g = trial_g(0.5).unwrap();
        assert!(ratio_trace(&g, 0.5, &[], &cfg()).is_err());
        assert!(ratio_trace(&g, 0.5, &[8, 4], &cfg()).is_err());
        assert!(ratio_trace(&g, 1.0, &[4], &cfg()).is_err());
    }
}
