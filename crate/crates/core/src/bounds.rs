//! The error functional `J_n`, its bivariate analogue and the bounds built
//! on them.
//!
//! ```text
//! J_n[f](x) = ∫₀^∞ ω(z θ(x) / √n) z exp(-z²/2) dz,   θ(x) = √(x(1-x))
//! ```
//!
//! The semi-infinite integral is truncated at `cfg.truncation_z`.

use std::cell::Cell;
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::bernstein::{bernstein_derivative_eval, error2_exact, error_exact, Degree};
use crate::error::{config, domain, Error, Result};
use crate::functions::{BivariateFunction, Modulus2, ModulusSpec, ScalarFunction};
use crate::numerics::{gauss_halfline_with_breaks, integrate, ln_gamma_positive, QuadratureConfig};

/// Grid step of the empirical modulus built when a function carries none.
pub const EMPIRICAL_GRID_STEP: f64 = 1e-3;

/// Absolute-plus-relative slack of the pass flag.
pub const PASS_SLACK: f64 = 1e-12;

/// Note attached to a record whose quadrature did not meet its tolerance.
pub const UNCONVERGED: &str = "quadrature-unconverged";

/// `θ(p) = √(p(1-p))`, the standard deviation of one Bernoulli(p) trial.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Theta(f64);

impl Theta {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn theta(p: f64) -> Result<Theta> {
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("theta needs p in [0, 1], got {p}"));
    }
    Ok(Theta((p * (1.0 - p)).sqrt()))
}

/// One cell of a bound sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRecord {
    pub label: String,
    pub x: f64,
    pub y: Option<f64>,
    pub n1: Degree,
    pub n2: Option<Degree>,
    pub delta: f64,
    pub j: f64,
    pub bound: f64,
    /// `delta / j`, or `None` when `j = 0`.
    #[serde(serialize_with = "ratio_or_marker")]
    pub ratio: Option<f64>,
    pub pass: bool,
    /// Set when the quadrature behind `j` stopped short of its tolerance;
    /// `j` then holds the best estimate.
    pub note: Option<&'static str>,
}

/// Text written in place of an undefined ratio.
pub const UNDEFINED_RATIO: &str = "undefined";

fn ratio_or_marker<S: Serializer>(r: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match r {
        Some(v) => s.serialize_f64(*v),
        None => s.serialize_str(UNDEFINED_RATIO),
    }
}

pub fn passes(delta: f64, bound: f64) -> bool {
    delta <= bound + PASS_SLACK * (1.0 + bound)
}

impl BoundRecord {
    fn new(label: &str, x: f64, n1: Degree, delta: f64, j: f64, bound: f64, converged: bool) -> Self {
        Self {
            label: label.to_string(),
            x,
            y: None,
            n1,
            n2: None,
            delta,
            j,
            bound,
            ratio: (j > 0.0).then(|| delta / j),
            pass: passes(delta, bound),
            note: (!converged).then_some(UNCONVERGED),
        }
    }

    /// True when no coordinate sits at an endpoint of `[0, 1]`.
    pub fn is_interior(&self) -> bool {
        let inside = |t: f64| t > 0.0 && t < 1.0;
        inside(self.x) && self.y.is_none_or(inside)
    }

    /// Deterministic report order: label, degrees, then coordinates.
    pub fn report_order(&self, other: &Self) -> Ordering {
        self.label
            .cmp(&other.label)
            .then(self.n1.cmp(&other.n1))
            .then(self.x.total_cmp(&other.x))
            .then(self.y.unwrap_or(0.0).total_cmp(&other.y.unwrap_or(0.0)))
            .then(self.n2.cmp(&other.n2))
    }
}

/// Splits a convergence failure into its best estimate.
fn tolerate(r: Result<f64>) -> Result<(f64, bool)> {
    match r {
        Ok(v) => Ok((v, true)),
        Err(Error::Convergence { estimate, .. }) => Ok((estimate, false)),
        Err(e) => Err(e),
    }
}

/// `∫₀^T z exp(-z²/2) dz`
fn weight_mass(cfg: &QuadratureConfig) -> f64 {
    -(-0.5 * cfg.truncation_z * cfg.truncation_z).exp_m1()
}

/// `∫₀^T ω(s z) z exp(-z²/2) dz`
fn j_scaled(m: &ModulusSpec, s: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if s == 0.0 || m.is_zero() {
        return Ok(0.0);
    }
    let breaks: Vec<f64> = m
        .breakpoints()
        .iter()
        .map(|b| b / s)
        .filter(|&z| z < cfg.truncation_z)
        .collect();
    gauss_halfline_with_breaks(|z| m.eval(s * z) * z * (-0.5 * z * z).exp(), &breaks, cfg)
}

fn scale(x: f64, n: Degree) -> Result<f64> {
    let th = theta(x)?.value();
    Ok(match n {
        Degree::Finite(n) => th / (n as f64).sqrt(),
        Degree::Inf => 0.0,
    })
}

/// `J_n[f](x)` for the modulus `m`; exactly 0 when `θ(x) = 0`.
pub fn j_functional(m: &ModulusSpec, n: usize, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if n == 0 {
        return domain("J_n needs n >= 1");
    }
    j_scaled(m, scale(x, Degree::Finite(n))?, cfg)
}

/// Closed form of `J_n` for `ω(δ) = H δ^α` without the clamp:
/// `H θ^α n^(-α/2) 2^(α/2) Γ(1 + α/2)`.
pub fn j_hoelder_closed_form(alpha: f64, h: f64, n: usize, x: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return domain(format!("Hoelder exponent must lie in (0, 1], got {alpha}"));
    }
    if !(h > 0.0 && h.is_finite()) {
        return domain(format!("Hoelder constant must be positive, got {h}"));
    }
    if n == 0 {
        return domain("J_n needs n >= 1");
    }
    let th = theta(x)?.value();
    if th == 0.0 {
        return Ok(0.0);
    }
    let half = 0.5 * alpha;
    Ok(h * (th * th / n as f64).powf(half) * 2f64.powf(half) * ln_gamma_positive(1.0 + half).exp())
}

/// Side-by-side values for a Hölder modulus at one `(n, x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HoelderComparison {
    pub alpha: f64,
    pub h: f64,
    pub n: usize,
    pub x: f64,
    /// `J_n` by quadrature.
    pub j_quadrature: f64,
    /// `J_n` in closed form.
    pub j_closed: f64,
    /// `2 J_n` in closed form, the bound actually implied.
    pub bound_closed: f64,
    /// `2 H (2θ²/n)^(α/2) Γ(α/2)`
    pub gamma_half_alpha_form: f64,
    /// `2 L (2πθ²/n)^(1/2)`, only for `α = 1`.
    pub lipschitz_root_pi_form: Option<f64>,
}

pub fn hoelder_comparison(alpha: f64, h: f64, n: usize, x: f64, cfg: &QuadratureConfig) -> Result<HoelderComparison> {
    let j_closed = j_hoelder_closed_form(alpha, h, n, x)?;
    let j_quadrature = j_functional(&ModulusSpec::hoelder(alpha, h)?, n, x, cfg)?;
    let v = x * (1.0 - x) / n as f64;
    Ok(HoelderComparison {
        alpha,
        h,
        n,
        x,
        j_quadrature,
        j_closed,
        bound_closed: 2.0 * j_closed,
        gamma_half_alpha_form: 2.0 * h * (2.0 * v).powf(0.5 * alpha) * ln_gamma_positive(0.5 * alpha).exp(),
        lipschitz_root_pi_form: (alpha == 1.0).then(|| 2.0 * h * (2.0 * std::f64::consts::PI * v).sqrt()),
    })
}

fn require_modulus(f: &ScalarFunction) -> Result<&ModulusSpec> {
    f.exact_modulus()
        .ok_or_else(|| Error::Config(format!("function '{}' carries no modulus of continuity", f.label())))
}

/// `Δ_n[f](x) ≤ 2 J_n[f](x)` for the attached modulus of `f`.
pub fn upper_bound(f: &ScalarFunction, n: Degree, x: f64, cfg: &QuadratureConfig) -> Result<BoundRecord> {
    upper_bound_with(f, require_modulus(f)?, n, x, cfg)
}

/// [`upper_bound`] with an explicitly supplied modulus.
pub fn upper_bound_with(
    f: &ScalarFunction,
    m: &ModulusSpec,
    n: Degree,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<BoundRecord> {
    let delta = error_exact(f, n, x)?;
    let (j, converged) = match n {
        Degree::Inf => (0.0, true),
        Degree::Finite(n) => tolerate(j_functional(m, n, x, cfg))?,
    };
    Ok(BoundRecord::new(f.label(), x, n, delta, j, 2.0 * j, converged))
}

/// The uniform estimate `2 ∫₀^∞ ω(y / (2√n)) y exp(-y²) dy`.
pub fn uniform_bound(m: &ModulusSpec, n: usize, cfg: &QuadratureConfig) -> Result<f64> {
    if n == 0 {
        return domain("uniform bound needs n >= 1");
    }
    if m.is_zero() {
        return Ok(0.0);
    }
    cfg.validate()?;
    let s = 0.5 / (n as f64).sqrt();
    let breaks: Vec<f64> = m.breakpoints().iter().map(|b| b / s).collect();
    let q = integrate(
        |y| m.eval(s * y) * y * (-y * y).exp(),
        0.0,
        cfg.truncation_z,
        &breaks,
        cfg,
    )?;
    Ok(2.0 * q.value)
}

/// `2 J_n` evaluated at `θ = 1/2`, the largest value of `θ`.
pub fn uniform_bound_companion(m: &ModulusSpec, n: usize, cfg: &QuadratureConfig) -> Result<f64> {
    if n == 0 {
        return domain("uniform bound needs n >= 1");
    }
    Ok(2.0 * j_scaled(m, 0.5 / (n as f64).sqrt(), cfg)?)
}

/// Modulus of `f'`: the attached one, or a grid estimate.
pub fn derivative_modulus(f: &ScalarFunction) -> Result<(ScalarFunction, ModulusSpec)> {
    let fp = f
        .derivative_function()
        .ok_or_else(|| Error::Config(format!("function '{}' carries no derivative", f.label())))?;
    let m = match fp.exact_modulus() {
        Some(m) => m.clone(),
        None => ModulusSpec::empirical(&fp, EMPIRICAL_GRID_STEP)?,
    };
    Ok((fp, m))
}

/// `|B'_n[f](x) - f'(x)| ≤ (3/2) ω[f'](1/n) + 2 J_{n-1}[f'](x)`.
pub fn derivative_bound(f: &ScalarFunction, n: usize, x: f64, cfg: &QuadratureConfig) -> Result<BoundRecord> {
    if n < 2 {
        return domain(format!("derivative bound needs n >= 2, got {n}"));
    }
    let (fp, m) = derivative_modulus(f)?;
    let delta = (bernstein_derivative_eval(f, n, x)? - fp.eval(x)).abs();
    let (j, converged) = tolerate(j_functional(&m, n - 1, x, cfg))?;
    let bound = 1.5 * m.eval(1.0 / n as f64) + 2.0 * j;
    Ok(BoundRecord::new(
        f.label(),
        x,
        Degree::Finite(n),
        delta,
        j,
        bound,
        converged,
    ))
}

/// `∫₀^T ∫₀^T g(z1, z2) z1 z2 exp(-(z1² + z2²)/2) dz2 dz1`, with kinks of
/// `g` in `z1` given by `b1` and in `z2` (possibly depending on `z1`) by `b2`.
fn nested<G, B>(g: G, b1: &[f64], b2: B, cfg: &QuadratureConfig) -> Result<f64>
where
    G: Fn(f64, f64) -> f64,
    B: Fn(f64) -> Vec<f64>,
{
    cfg.validate()?;
    let t = cfg.truncation_z;
    let unconverged: Cell<Option<f64>> = Cell::new(None);
    let failed = Cell::new(false);
    let inner = |z1: f64| -> f64 {
        let breaks = b2(z1);
        match integrate(|z2| g(z1, z2) * z2 * (-0.5 * z2 * z2).exp(), 0.0, t, &breaks, cfg) {
            Ok(q) => q.value,
            Err(Error::Convergence {
                estimate,
                error_estimate,
            }) => {
                unconverged.set(Some(unconverged.get().unwrap_or(0.0).max(error_estimate)));
                estimate
            }
            Err(_) => {
                failed.set(true);
                f64::NAN
            }
        }
    };
    let outer = integrate(|z1| inner(z1) * z1 * (-0.5 * z1 * z1).exp(), 0.0, t, b1, cfg);
    if failed.get() {
        return domain("bivariate integrand produced a non-finite value");
    }
    let q = outer?;
    if let Some(error_estimate) = unconverged.get() {
        return Err(Error::Convergence {
            estimate: q.value,
            error_estimate: error_estimate.max(q.error),
        });
    }
    Ok(q.value)
}

fn scaled_breaks(points: &[f64], s: f64, cfg: &QuadratureConfig) -> Vec<f64> {
    if s == 0.0 {
        return Vec::new();
    }
    points.iter().map(|b| b / s).filter(|&z| z < cfg.truncation_z).collect()
}

/// `∫∫ ω(s1 z1, s2 z2) z1 z2 exp(-(z1² + z2²)/2) dz1 dz2`
fn j2_scaled(m2: &Modulus2, s1: f64, s2: f64, cfg: &QuadratureConfig) -> Result<f64> {
    let mass = weight_mass(cfg);
    match m2 {
        Modulus2::Sum { first, second } => {
            let mut v = 0.0;
            if first.0 != 0.0 {
                v += first.0 * j_scaled(&first.1, s1, cfg)?;
            }
            if second.0 != 0.0 {
                v += second.0 * j_scaled(&second.1, s2, cfg)?;
            }
            Ok(v * mass)
        }
        Modulus2::Product(a, b) => Ok(j_scaled(a, s1, cfg)? * j_scaled(b, s2, cfg)?),
        _ => {
            let (p1, p2) = m2.breakpoints();
            match (s1 == 0.0, s2 == 0.0) {
                (true, true) => Ok(m2.eval(0.0, 0.0) * mass * mass),
                (true, false) => {
                    let b = scaled_breaks(&p2, s2, cfg);
                    let q = gauss_halfline_with_breaks(|z| m2.eval(0.0, s2 * z) * z * (-0.5 * z * z).exp(), &b, cfg)?;
                    Ok(q * mass)
                }
                (false, true) => {
                    let b = scaled_breaks(&p1, s1, cfg);
                    let q = gauss_halfline_with_breaks(|z| m2.eval(s1 * z, 0.0) * z * (-0.5 * z * z).exp(), &b, cfg)?;
                    Ok(q * mass)
                }
                (false, false) => {
                    let b1 = scaled_breaks(&p1, s1, cfg);
                    let b2 = scaled_breaks(&p2, s2, cfg);
                    nested(|z1, z2| m2.eval(s1 * z1, s2 * z2), &b1, |_| b2.clone(), cfg)
                }
            }
        }
    }
}

/// `J_{n1,n2}[f](x, y)` for the bivariate modulus `m2`. An infinite degree,
/// or `θ = 0`, pins the corresponding modulus argument at 0.
pub fn j2_functional(m2: &Modulus2, n1: Degree, n2: Degree, x: f64, y: f64, cfg: &QuadratureConfig) -> Result<f64> {
    j2_scaled(m2, scale(x, n1)?, scale(y, n2)?, cfg)
}

/// `Δ_{n1,n2}[f](x, y) ≤ 4 J_{n1,n2}[f](x, y)`.
pub fn bivariate_bound(
    f: &BivariateFunction,
    n1: Degree,
    n2: Degree,
    x: f64,
    y: f64,
    cfg: &QuadratureConfig,
) -> Result<BoundRecord> {
    let m2 = f
        .exact_modulus2()
        .ok_or_else(|| Error::Config(format!("function '{}' carries no bivariate modulus", f.label())))?;
    bivariate_bound_with(f, m2, n1, n2, x, y, cfg)
}

/// [`bivariate_bound`] with an explicitly supplied modulus.
pub fn bivariate_bound_with(
    f: &BivariateFunction,
    m2: &Modulus2,
    n1: Degree,
    n2: Degree,
    x: f64,
    y: f64,
    cfg: &QuadratureConfig,
) -> Result<BoundRecord> {
    let delta = error2_exact(f, n1, n2, x, y)?;
    let (j, converged) = tolerate(j2_functional(m2, n1, n2, x, y, cfg))?;
    let mut rec = BoundRecord::new(f.label(), x, n1, delta, j, 4.0 * j, converged);
    rec.y = Some(y);
    rec.n2 = Some(n2);
    Ok(rec)
}

/// Planar norms for [`general_norm_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormId {
    Euclidean,
    Max,
    Sum,
}

impl NormId {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Self::Euclidean => a.hypot(b),
            Self::Max => a.abs().max(b.abs()),
            Self::Sum => a.abs() + b.abs(),
        }
    }
}

impl fmt::Display for NormId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Euclidean => "euclidean",
            Self::Max => "max",
            Self::Sum => "sum",
        })
    }
}

impl FromStr for NormId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "euclidean" => Ok(Self::Euclidean),
            "max" => Ok(Self::Max),
            "sum" => Ok(Self::Sum),
            other => config(format!("unknown norm '{other}'")),
        }
    }
}

/// `4 ∫∫ γ(‖(z1 θ(x)/√n1, z2 θ(y)/√n2)‖) z1 z2 exp(-(z1² + z2²)/2) dz1 dz2`.
///
/// `γ` is applied to the norm without clamping.
pub fn general_norm_bound(
    gamma: &dyn Fn(f64) -> f64,
    norm: NormId,
    n1: usize,
    n2: usize,
    x: f64,
    y: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    if n1 == 0 || n2 == 0 {
        return domain("general norm bound needs n1, n2 >= 1");
    }
    let s1 = scale(x, Degree::Finite(n1))?;
    let s2 = scale(y, Degree::Finite(n2))?;
    let mass = weight_mass(cfg);
    let one_axis = |s: f64| -> Result<f64> {
        gauss_halfline_with_breaks(|z| gamma(norm.apply(s * z, 0.0)) * z * (-0.5 * z * z).exp(), &[], cfg)
    };
    let v = match (s1 == 0.0, s2 == 0.0) {
        (true, true) => gamma(0.0) * mass * mass,
        (true, false) => one_axis(s2)? * mass,
        (false, true) => one_axis(s1)? * mass,
        (false, false) => nested(
            |z1, z2| gamma(norm.apply(s1 * z1, s2 * z2)),
            &[],
            |z1| match norm {
                NormId::Max => vec![s1 * z1 / s2],
                _ => Vec::new(),
            },
            cfg,
        )?,
    };
    Ok(4.0 * v)
}

/// Runs [`upper_bound`] over every function, degree and point, in report order.
pub fn bound_sweep(
    corpus: &[ScalarFunction],
    n_set: &[Degree],
    xs: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<BoundRecord>> {
    let mut out = Vec::with_capacity(corpus.len() * n_set.len() * xs.len());
    for f in corpus {
        for &n in n_set {
            for &x in xs {
                out.push(upper_bound(f, n, x, cfg)?);
            }
        }
    }
    out.sort_by(BoundRecord::report_order);
    Ok(out)
}

/// Aggregate view of a set of records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub cells: usize,
    pub interior_cells: usize,
    pub violations: usize,
    pub unconverged: usize,
    /// Largest ratio over interior cells with a defined ratio.
    pub sup_ratio: Option<f64>,
    /// Record attaining `sup_ratio`.
    pub sup_at: Option<BoundRecord>,
}

pub fn summarize(records: &[BoundRecord]) -> SweepSummary {
    let mut sup: Option<&BoundRecord> = None;
    for r in records.iter().filter(|r| r.is_interior()) {
        if let Some(v) = r.ratio {
            if sup.is_none_or(|s| v > s.ratio.unwrap_or(f64::NEG_INFINITY)) {
                sup = Some(r);
            }
        }
    }
    SweepSummary {
        cells: records.len(),
        interior_cells: records.iter().filter(|r| r.is_interior()).count(),
        violations: records.iter().filter(|r| !r.pass).count(),
        unconverged: records.iter().filter(|r| r.note == Some(UNCONVERGED)).count(),
        sup_ratio: sup.and_then(|r| r.ratio),
        sup_at: sup.cloned(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{corpus_lookup, trial_G, trial_g, trial_g_modulus};
    use std::f64::consts::PI;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn theta_values() {
        assert_eq!(theta(0.5).unwrap().value(), 0.5);
        assert!((theta(0.2).unwrap().value() - 0.4).abs() < 1e-15);
        assert_eq!(theta(0.0).unwrap().value(), 0.0);
        assert!(theta(1.5).is_err());
    }

    #[test]
    fn j_of_zero_modulus_is_zero() {
        assert_eq!(j_functional(&ModulusSpec::zero(), 10, 0.3, &cfg()).unwrap(), 0.0);
        let m = ModulusSpec::lipschitz(1.0).unwrap();
        assert_eq!(j_functional(&m, 10, 0.0, &cfg()).unwrap(), 0.0);
        assert_eq!(j_functional(&m, 10, 1.0, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn j_lipschitz_and_hoelder_oracles() {
        let lip = j_functional(&ModulusSpec::lipschitz(1.0).unwrap(), 100, 0.5, &cfg()).unwrap();
        assert!(close(lip, 0.062_665_706_865_775_01, 1e-10));
        let hol = j_functional(&ModulusSpec::hoelder(0.5, 1.0).unwrap(), 100, 0.5, &cfg()).unwrap();
        assert!(close(hol, 0.241_025_828_735_245_9, 1e-9));
        assert!(close(
            j_hoelder_closed_form(0.5, 1.0, 100, 0.5).unwrap(),
            0.241_025_828_735_245_9,
            1e-13
        ));
        assert!(close(
            j_hoelder_closed_form(1.0, 1.0, 100, 0.5).unwrap(),
            0.062_665_706_865_775_01,
            1e-13
        ));
        assert_eq!(j_hoelder_closed_form(0.3, 2.0, 10, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn hoelder_comparison_forms() {
        let c = hoelder_comparison(1.0, 1.0, 100, 0.5, &cfg()).unwrap();
        assert!(close(c.bound_closed, 2.0 * 0.062_665_706_865_775_01, 1e-13));
        let lip = c.lipschitz_root_pi_form.unwrap();
        assert!(close(lip, 2.0 * (2.0 * PI * 0.0025).sqrt(), 1e-14));
        let c = hoelder_comparison(0.5, 1.0, 100, 0.5, &cfg()).unwrap();
        assert!(c.lipschitz_root_pi_form.is_none());
        // Γ(1/4) = 3.6256099082219083
        let expect = 2.0 * (2.0f64 * 0.0025).powf(0.25) * 3.625_609_908_221_908_3;
        assert!(close(c.gamma_half_alpha_form, expect, 1e-13));
    }

    #[test]
    fn upper_bound_examples() {
        let id = corpus_lookup("identity").unwrap();
        let r = upper_bound(&id, Degree::Finite(50), 0.3, &cfg()).unwrap();
        assert!(r.delta < 1e-15 && r.pass);

        let g = trial_g(0.5).unwrap();
        let r = upper_bound(&g, Degree::Finite(100), 0.5, &cfg()).unwrap();
        assert!(close(r.delta, 0.039_794_618_693_589_38, 1e-12));
        assert!(close(r.bound, 2.0 * 0.062_665_706_865_775_01, 1e-10));
        assert!(r.pass);
        assert!(r.note.is_none());

        let r = upper_bound(&g, Degree::Finite(100), 0.0, &cfg()).unwrap();
        assert_eq!((r.delta, r.j, r.ratio, r.pass), (0.0, 0.0, None, true));
        assert!(!r.is_interior());
    }

    #[test]
    fn upper_bound_needs_modulus() {
        let f = ScalarFunction::new("bare", |x| x);
        assert!(matches!(
            upper_bound(&f, Degree::Finite(4), 0.5, &cfg()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn uniform_bound_examples() {
        assert_eq!(uniform_bound(&ModulusSpec::zero(), 100, &cfg()).unwrap(), 0.0);
        let u = uniform_bound(&ModulusSpec::lipschitz(1.0).unwrap(), 100, &cfg()).unwrap();
        assert!(close(u, 0.044_311_346_272_637_9, 1e-10));
        let a = uniform_bound(&ModulusSpec::lipschitz(1.0).unwrap(), 25, &cfg()).unwrap();
        let b = uniform_bound(&ModulusSpec::hoelder(1.0, 2.0).unwrap(), 25, &cfg()).unwrap();
        assert!(close(b, 2.0 * a, 1e-12));
        let c = uniform_bound_companion(&ModulusSpec::lipschitz(1.0).unwrap(), 100, &cfg()).unwrap();
        assert!(close(c, 2.0 * 0.062_665_706_865_775_01, 1e-10));
    }

    #[test]
    fn derivative_bound_examples() {
        let id = corpus_lookup("identity").unwrap();
        let r = derivative_bound(&id, 10, 0.3, &cfg()).unwrap();
        assert_eq!(r.bound, 0.0);
        assert!(r.pass);

        let sq = corpus_lookup("square").unwrap();
        let r = derivative_bound(&sq, 10, 0.25, &cfg()).unwrap();
        assert!(close(r.delta, 0.05, 1e-12));
        assert!(close(r.bound, 1.023_601_254_558_267_7, 1e-10));
        assert!(r.pass);

        let big_g = trial_G(0.5).unwrap();
        let r = derivative_bound(&big_g, 64, 0.5, &cfg()).unwrap();
        assert!(r.pass && r.delta > 0.0);

        assert!(derivative_bound(&trial_g(0.5).unwrap(), 10, 0.5, &cfg()).is_err());
        assert!(derivative_bound(&sq, 1, 0.5, &cfg()).is_err());
    }

    #[test]
    fn derivative_bound_with_estimated_modulus() {
        let f = ScalarFunction::new("cube", |x: f64| x * x * x)
            .with_derivative(|x| 3.0 * x * x, None)
            .unwrap();
        let r = derivative_bound(&f, 16, 0.4, &cfg()).unwrap();
        assert!(r.pass && r.j > 0.0);
    }

    fn lin_sum() -> Modulus2 {
        let l = ModulusSpec::lipschitz(1.0).unwrap();
        Modulus2::Sum {
            first: (1.0, l.clone()),
            second: (1.0, l),
        }
    }

    #[test]
    fn j2_examples() {
        let zero = Modulus2::Product(ModulusSpec::zero(), ModulusSpec::zero());
        let f = Degree::Finite(100);
        assert_eq!(j2_functional(&zero, f, f, 0.5, 0.5, &cfg()).unwrap(), 0.0);

        let v = j2_functional(&lin_sum(), f, f, 0.5, 0.5, &cfg()).unwrap();
        assert!(close(v, 0.125_331_413_731_550_03, 1e-10));

        // The generic nested rule agrees with the separable shortcuts.
        let general = Modulus2::custom(|a, b| a + b);
        let w = j2_functional(&general, f, f, 0.5, 0.5, &cfg()).unwrap();
        assert!(close(w, v, 2e-10));

        let (a, b) = (ModulusSpec::hoelder(0.5, 1.0).unwrap(), trial_g_modulus(0.3));
        let prod = Modulus2::Product(a.clone(), b.clone());
        let (ja, jb) = (
            j_functional(&a, 16, 0.2, &cfg()).unwrap(),
            j_functional(&b, 9, 0.7, &cfg()).unwrap(),
        );
        let p = j2_functional(&prod, Degree::Finite(16), Degree::Finite(9), 0.2, 0.7, &cfg()).unwrap();
        assert!(close(p, ja * jb, 2e-10));
        let (ac, bc) = (a.clone(), b.clone());
        let custom = Modulus2::custom(move |d1, d2| ac.eval(d1) * bc.eval(d2));
        let q = j2_functional(&custom, Degree::Finite(16), Degree::Finite(9), 0.2, 0.7, &cfg()).unwrap();
        assert!(close(q, ja * jb, 2e-10));
    }

    #[test]
    fn j2_pins_degenerate_coordinate() {
        let m = Modulus2::custom(|a, b| a + b);
        let v = j2_functional(&m, Degree::Finite(100), Degree::Inf, 0.5, 0.3, &cfg()).unwrap();
        assert!(close(v, 0.062_665_706_865_775_01, 1e-10));
        let w = j2_functional(&m, Degree::Finite(100), Degree::Finite(7), 0.5, 1.0, &cfg()).unwrap();
        assert!(close(w, v, 1e-12));
    }

    #[test]
    fn bivariate_bound_examples() {
        let lin = BivariateFunction::new("x+y", |x, y| x + y)
            .with_modulus2(lin_sum())
            .unwrap();
        let r = bivariate_bound(&lin, Degree::Finite(10), Degree::Finite(10), 0.3, 0.6, &cfg()).unwrap();
        assert!(r.delta < 1e-14 && r.pass);
        assert_eq!(r.y, Some(0.6));

        let g = trial_g(0.5).unwrap();
        let f0 = BivariateFunction::new("g*1", move |x, _| g.eval(x))
            .with_modulus2(Modulus2::Sum {
                first: (1.0, trial_g_modulus(0.5)),
                second: (0.0, ModulusSpec::zero()),
            })
            .unwrap();
        let r = bivariate_bound(&f0, Degree::Finite(100), Degree::Finite(4), 0.5, 0.3, &cfg()).unwrap();
        assert!(close(r.delta, 0.039_794_618_693_589_38, 1e-12));
        assert!(r.pass);

        let sq = BivariateFunction::new("x2y2", |x, y| x * x * y * y);
        let emp = sq.empirical_modulus2(1.0 / 32.0).unwrap();
        let r = bivariate_bound_with(&sq, &emp, Degree::Finite(10), Degree::Finite(10), 0.5, 0.5, &cfg()).unwrap();
        assert!(close(r.delta, 0.013_125, 1e-12));
        assert!(r.pass);
    }

    #[test]
    fn general_norm_examples() {
        let c = cfg();
        assert_eq!(
            general_norm_bound(&|_| 0.0, NormId::Sum, 100, 100, 0.5, 0.5, &c).unwrap(),
            0.0
        );
        let sum = general_norm_bound(&|r| r, NormId::Sum, 100, 100, 0.5, 0.5, &c).unwrap();
        let j2 = j2_functional(&lin_sum(), Degree::Finite(100), Degree::Finite(100), 0.5, 0.5, &c).unwrap();
        assert!(close(sum, 4.0 * j2, 2e-10));
        let max = general_norm_bound(&|r| r, NormId::Max, 100, 100, 0.5, 0.5, &c).unwrap();
        let euc = general_norm_bound(&|r| r, NormId::Euclidean, 100, 100, 0.5, 0.5, &c).unwrap();
        assert!(max <= euc && euc <= sum);
        assert!("max".parse::<NormId>().unwrap() == NormId::Max);
        assert!("l3".parse::<NormId>().is_err());
    }

    #[test]
    fn summary_skips_endpoints() {
        let g = trial_g(0.5).unwrap();
        let recs = bound_sweep(
            &[g],
            &[Degree::Finite(4), Degree::Finite(16)],
            &[0.0, 0.25, 0.5, 1.0],
            &cfg(),
        )
        .unwrap();
        let s = summarize(&recs);
        assert_eq!((s.cells, s.interior_cells, s.violations), (8, 4, 0));
        assert!(s.sup_ratio.unwrap() <= 2.0);
        assert!(recs.windows(2).all(|w| w[0].report_order(&w[1]) != Ordering::Greater));
    }
}
