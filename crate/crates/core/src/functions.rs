//! Test functions on `[0, 1]` and `[0, 1]²` together with their moduli of
//! continuity.
//!
//! A modulus is always evaluated with its argument clamped to the domain
//! diameter: `ω(δ) = ω(1)` for `δ > 1`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use crate::error::{config, domain, Error, Result};

pub type RealMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type PlaneMap = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Number of points of the grid used to verify attached moduli.
pub const VERIFY_POINTS: usize = 1001;
const VERIFY_SLACK: f64 = 1e-12;

/// Knots of a tabulated modulus: strictly increasing `δ` in `(0, 1]`,
/// nonnegative nondecreasing `ω`. Interpolated linearly from `(0, 0)`,
/// constant after the last knot.
#[derive(Debug, Clone, PartialEq)]
pub struct Knots(Vec<(f64, f64)>);

impl Knots {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        let points: Vec<(f64, f64)> = points.into_iter().filter(|&(d, w)| !(d == 0.0 && w == 0.0)).collect();
        if points.is_empty() {
            return config("tabulated modulus needs at least one knot");
        }
        let mut prev = (0.0, 0.0);
        for &(d, w) in &points {
            if !(d.is_finite() && w.is_finite()) {
                return config("tabulated modulus knots must be finite");
            }
            if !(d > prev.0) || d > 1.0 {
                return config(format!(
                    "tabulated modulus knots need strictly increasing delta in (0, 1], got {d}"
                ));
            }
            if w < prev.1 {
                return config(format!(
                    "tabulated modulus must be nonnegative and nondecreasing, got {w} at delta {d}"
                ));
            }
            prev = (d, w);
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.0
    }

    fn eval(&self, delta: f64) -> f64 {
        let mut prev = (0.0, 0.0);
        for &(d, w) in &self.0 {
            if delta <= d {
                return prev.1 + (w - prev.1) * (delta - prev.0) / (d - prev.0);
            }
            prev = (d, w);
        }
        prev.1
    }
}

/// Grid-sup estimate of a modulus: `ω(k h) = max |f(x_i) - f(x_j)|` over
/// grid pairs with `|i - j| <= k`. A lower estimate of the true modulus.
pub struct EmpiricalModulus {
    label: String,
    step: f64,
    table: Vec<f64>,
}

impl EmpiricalModulus {
    /// Builds the table on the uniform grid `i / N`, `N = ceil(1 / grid_step)`.
    pub fn from_fn(label: &str, f: &dyn Fn(f64) -> f64, grid_step: f64) -> Result<Self> {
        if !(grid_step > 0.0 && grid_step <= 0.5) {
            return config(format!("empirical grid_step must lie in (0, 0.5], got {grid_step}"));
        }
        let cells = (1.0 / grid_step).ceil() as usize;
        if cells > 200_000 {
            return config(format!("empirical grid_step {grid_step} is too fine"));
        }
        let values: Vec<f64> = (0..=cells).map(|i| f(i as f64 / cells as f64)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return config(format!("function '{label}' is not finite on the grid"));
        }
        let mut table = vec![0.0; cells + 1];
        for d in 1..=cells {
            let widest = values
                .iter()
                .zip(&values[d..])
                .map(|(a, b)| (b - a).abs())
                .fold(0.0, f64::max);
            table[d] = widest.max(table[d - 1]);
        }
        Ok(Self {
            label: label.to_string(),
            step: 1.0 / cells as f64,
            table,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Effective grid step (`1 / N`).
    pub fn grid_step(&self) -> f64 {
        self.step
    }

    fn eval(&self, delta: f64) -> f64 {
        let k = ((delta / self.step) * (1.0 + 1e-12)).floor() as usize;
        self.table[k.min(self.table.len() - 1)]
    }
}

impl fmt::Debug for EmpiricalModulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmpiricalModulus")
            .field("label", &self.label)
            .field("grid_step", &self.step)
            .finish()
    }
}

/// First-order modulus of continuity model.
#[derive(Debug, Clone)]
pub enum ModulusSpec {
    /// `H δ^α`
    Hoelder {
        alpha: f64,
        h: f64,
    },
    /// `L δ`
    Lipschitz {
        l: f64,
    },
    Tabulated(Knots),
    Empirical(Arc<EmpiricalModulus>),
}

impl ModulusSpec {
    pub fn hoelder(alpha: f64, h: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return config(format!("Hoelder exponent must lie in (0, 1], got {alpha}"));
        }
        if !(h > 0.0 && h.is_finite()) {
            return config(format!("Hoelder constant must be positive, got {h}"));
        }
        Ok(Self::Hoelder { alpha, h })
    }

    pub fn lipschitz(l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return config(format!("Lipschitz constant must be positive, got {l}"));
        }
        Ok(Self::Lipschitz { l })
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        Knots::new(points).map(Self::Tabulated)
    }

    /// Modulus of a constant function.
    pub fn zero() -> Self {
        Self::Tabulated(Knots(vec![(1.0, 0.0)]))
    }

    pub fn empirical(source: &ScalarFunction, grid_step: f64) -> Result<Self> {
        let f = source.eval.clone();
        EmpiricalModulus::from_fn(&source.label, &move |x| f(x), grid_step).map(|e| Self::Empirical(Arc::new(e)))
    }

    /// ω(min(δ, 1)); negative arguments are treated as 0.
    #[inline]
    pub fn eval(&self, delta: f64) -> f64 {
        let d = delta.clamp(0.0, 1.0);
        if d == 0.0 {
            return 0.0;
        }
        match self {
            Self::Hoelder { alpha, h } => {
                if *alpha == 1.0 {
                    h * d
                } else {
                    h * d.powf(*alpha)
                }
            }
            Self::Lipschitz { l } => l * d,
            Self::Tabulated(knots) => knots.eval(d),
            Self::Empirical(table) => table.eval(d),
        }
    }

    /// Points of `(0, 1]` where the modulus may have a kink or a jump,
    /// including the clamp at 1.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Hoelder { .. } | Self::Lipschitz { .. } => vec![1.0],
            Self::Tabulated(knots) => {
                let mut pts: Vec<f64> = knots.points().iter().map(|p| p.0).collect();
                if pts.last() != Some(&1.0) {
                    pts.push(1.0);
                }
                pts
            }
            Self::Empirical(table) => (1..table.table.len()).map(|k| k as f64 * table.step).collect(),
        }
    }

    /// True when `ω ≡ 0`.
    pub fn is_zero(&self) -> bool {
        match self {
            Self::Tabulated(knots) => knots.points().iter().all(|p| p.1 == 0.0),
            Self::Empirical(table) => table.table.iter().all(|&v| v == 0.0),
            _ => false,
        }
    }
}

/// `ω(min(δ, 1))` for the given modulus model.
pub fn modulus_eval(m: &ModulusSpec, delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return domain(format!("modulus argument must be >= 0, got {delta}"));
    }
    Ok(m.eval(delta))
}

/// A function on `[0, 1]` with an optional attached modulus and derivative.
#[derive(Clone)]
pub struct ScalarFunction {
    label: String,
    eval: RealMap,
    exact_modulus: Option<ModulusSpec>,
    derivative: Option<RealMap>,
    derivative_modulus: Option<ModulusSpec>,
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFunction")
            .field("label", &self.label)
            .field("exact_modulus", &self.exact_modulus)
            .field("has_derivative", &self.derivative.is_some())
            .field("derivative_modulus", &self.derivative_modulus)
            .finish()
    }
}

impl ScalarFunction {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(f),
            exact_modulus: None,
            derivative: None,
            derivative_modulus: None,
        }
    }

    /// Attaches a modulus after checking it on the verification grid.
    pub fn with_modulus(mut self, modulus: ModulusSpec) -> Result<Self> {
        verify_modulus(&self.label, &*self.eval, &modulus)?;
        self.exact_modulus = Some(modulus);
        Ok(self)
    }

    /// Attaches `f'` and, optionally, a modulus of `f'` (verified like
    /// [`with_modulus`](Self::with_modulus)).
    pub fn with_derivative(
        mut self,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
        modulus: Option<ModulusSpec>,
    ) -> Result<Self> {
        if let Some(m) = &modulus {
            verify_modulus(&format!("{}'", self.label), &derivative, m)?;
        }
        self.derivative = Some(Arc::new(derivative));
        self.derivative_modulus = modulus;
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn map(&self) -> &RealMap {
        &self.eval
    }

    pub fn exact_modulus(&self) -> Option<&ModulusSpec> {
        self.exact_modulus.as_ref()
    }

    pub fn derivative(&self, x: f64) -> Option<f64> {
        self.derivative.as_ref().map(|d| d(x))
    }

    /// `f'` as a standalone function, carrying the derivative modulus if any.
    pub fn derivative_function(&self) -> Option<ScalarFunction> {
        let d = self.derivative.clone()?;
        Some(ScalarFunction {
            label: format!("{}'", self.label),
            eval: d,
            exact_modulus: self.derivative_modulus.clone(),
            derivative: None,
            derivative_modulus: None,
        })
    }

    pub fn derivative_modulus(&self) -> Option<&ModulusSpec> {
        self.derivative_modulus.as_ref()
    }

    /// Maximum of `|f|` over the verification grid.
    pub fn grid_sup_norm(&self) -> f64 {
        (0..VERIFY_POINTS)
            .map(|i| self.eval(i as f64 / (VERIFY_POINTS - 1) as f64).abs())
            .fold(0.0, f64::max)
    }
}

fn verify_modulus(label: &str, f: &dyn Fn(f64) -> f64, m: &ModulusSpec) -> Result<()> {
    let last = (VERIFY_POINTS - 1) as f64;
    let values: Vec<f64> = (0..VERIFY_POINTS).map(|i| f(i as f64 / last)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return config(format!("function '{label}' is not finite on [0, 1]"));
    }
    for d in 1..VERIFY_POINTS {
        let bound = m.eval(d as f64 / last) + VERIFY_SLACK;
        if let Some(i) = (0..VERIFY_POINTS - d).find(|&i| (values[i + d] - values[i]).abs() > bound) {
            return config(format!(
                "modulus rejected for '{label}': |f({}) - f({})| = {} exceeds {}",
                (i + d) as f64 / last,
                i as f64 / last,
                (values[i + d] - values[i]).abs(),
                bound
            ));
        }
    }
    Ok(())
}

/// Trial function `g_t(x) = |t - x|` with `ω(δ) = min(δ, max(t, 1 - t))`.
pub fn trial_g(t: f64) -> Result<ScalarFunction> {
    if !(0.0..=1.0).contains(&t) {
        return domain(format!("trial parameter t must lie in [0, 1], got {t}"));
    }
    ScalarFunction::new(format!("g_{t}"), move |x| (t - x).abs()).with_modulus(trial_g_modulus(t))
}

/// `min(δ, max(t, 1 - t))` as a tabulated modulus.
pub fn trial_g_modulus(t: f64) -> ModulusSpec {
    let c = t.max(1.0 - t);
    if c >= 1.0 {
        ModulusSpec::Tabulated(Knots(vec![(1.0, 1.0)]))
    } else {
        ModulusSpec::Tabulated(Knots(vec![(c, c), (1.0, c)]))
    }
}

/// `G_t(x) = ∫₀ˣ |t - y| dy`, with derivative `g_t`.
#[allow(non_snake_case)]
pub fn trial_G(t: f64) -> Result<ScalarFunction> {
    if !(0.0..=1.0).contains(&t) {
        return domain(format!("trial parameter t must lie in [0, 1], got {t}"));
    }
    let c = t.max(1.0 - t);
    ScalarFunction::new(format!("G_{t}"), move |x| {
        if x <= t {
            t * x - 0.5 * x * x
        } else {
            0.5 * t * t + 0.5 * (x - t) * (x - t)
        }
    })
    .with_modulus(ModulusSpec::lipschitz(c)?)?
    .with_derivative(move |x| (t - x).abs(), Some(trial_g_modulus(t)))
}

/// The labelled corpus used by bound sweeps.
pub fn corpus_standard() -> Vec<ScalarFunction> {
    let build = || -> Result<Vec<ScalarFunction>> {
        use std::f64::consts::PI;
        let mut corpus = vec![
            ScalarFunction::new("identity", |x| x)
                .with_modulus(ModulusSpec::lipschitz(1.0)?)?
                .with_derivative(|_| 1.0, Some(ModulusSpec::zero()))?,
            ScalarFunction::new("square", |x| x * x)
                .with_modulus(ModulusSpec::lipschitz(2.0)?)?
                .with_derivative(|x| 2.0 * x, Some(ModulusSpec::lipschitz(2.0)?))?,
        ];
        for t in [0.25, 0.5, 0.75] {
            corpus.push(trial_g(t)?);
        }
        for alpha in [0.25, 0.5] {
            corpus.push(
                ScalarFunction::new(format!("pow_{alpha}"), move |x: f64| x.powf(alpha))
                    .with_modulus(ModulusSpec::hoelder(alpha, 1.0)?)?,
            );
        }
        corpus.push(
            ScalarFunction::new("sin_pi", |x: f64| (PI * x).sin())
                .with_modulus(ModulusSpec::lipschitz(PI)?)?
                .with_derivative(|x: f64| PI * (PI * x).cos(), Some(ModulusSpec::lipschitz(PI * PI)?))?,
        );
        corpus.push(ScalarFunction::new("sqrt", |x: f64| x.sqrt()).with_modulus(ModulusSpec::hoelder(0.5, 1.0)?)?);
        Ok(corpus)
    };
    build().expect("standard corpus moduli verify")
}

/// Looks up a corpus entry by label.
pub fn corpus_lookup(label: &str) -> Option<ScalarFunction> {
    corpus_standard().into_iter().find(|f| f.label() == label)
}

/// Corpus members with a derivative, plus `G_0.5`.
pub fn corpus_differentiable() -> Vec<ScalarFunction> {
    let mut out: Vec<ScalarFunction> = corpus_standard()
        .into_iter()
        .filter(|f| f.derivative_function().is_some())
        .collect();
    out.push(trial_G(0.5).expect("0.5 is a valid trial parameter"));
    out
}

/// Resolves a corpus label, or `g_<t>` / `G_<t>` for any `t` in `[0, 1]`.
pub fn function_by_label(label: &str) -> Result<ScalarFunction> {
    if let Some(f) = corpus_lookup(label) {
        return Ok(f);
    }
    let parse = |rest: &str| {
        rest.parse::<f64>()
            .map_err(|_| Error::Config(format!("unknown function '{label}'")))
    };
    if let Some(rest) = label.strip_prefix("g_") {
        return trial_g(parse(rest)?);
    }
    if let Some(rest) = label.strip_prefix("G_") {
        return trial_G(parse(rest)?);
    }
    config(format!("unknown function '{label}'"))
}

/// Bivariate modulus `ω(δ1, δ2)`; arguments are clamped to `[0, 1]` each.
#[derive(Clone)]
pub enum Modulus2 {
    /// `w1 ω1(δ1) + w2 ω2(δ2)`
    Sum {
        first: (f64, ModulusSpec),
        second: (f64, ModulusSpec),
    },
    /// `ω1(δ1) ω2(δ2)`
    Product(ModulusSpec, ModulusSpec),
    Empirical(Arc<EmpiricalModulus2>),
    /// Any nondecreasing map with `ω(0, 0) = 0`; no breakpoint information.
    Custom(PlaneMap),
}

impl fmt::Debug for Modulus2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Sum { first, second } => f
                .debug_struct("Sum")
                .field("first", first)
                .field("second", second)
                .finish(),
            Self::Product(a, b) => f.debug_tuple("Product").field(a).field(b).finish(),
            Self::Empirical(e) => f.debug_tuple("Empirical").field(e).finish(),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Modulus2 {
    pub fn custom(m: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom(Arc::new(m))
    }

    #[inline]
    pub fn eval(&self, d1: f64, d2: f64) -> f64 {
        let d1 = d1.clamp(0.0, 1.0);
        let d2 = d2.clamp(0.0, 1.0);
        match self {
            Self::Sum { first, second } => {
                let mut v = 0.0;
                if first.0 != 0.0 {
                    v += first.0 * first.1.eval(d1);
                }
                if second.0 != 0.0 {
                    v += second.0 * second.1.eval(d2);
                }
                v
            }
            Self::Product(a, b) => a.eval(d1) * b.eval(d2),
            Self::Empirical(t) => t.eval(d1, d2),
            Self::Custom(m) => m(d1, d2),
        }
    }

    /// Breakpoints in the first and second argument.
    pub fn breakpoints(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Self::Sum { first, second } => (first.1.breakpoints(), second.1.breakpoints()),
            Self::Product(a, b) => (a.breakpoints(), b.breakpoints()),
            Self::Empirical(t) => {
                let pts: Vec<f64> = (1..=t.cells).map(|k| k as f64 / t.cells as f64).collect();
                (pts.clone(), pts)
            }
            Self::Custom(_) => (vec![1.0], vec![1.0]),
        }
    }
}

/// Grid-sup estimate of a bivariate modulus on the `(N+1)²` grid.
pub struct EmpiricalModulus2 {
    cells: usize,
    table: Vec<f64>,
}

impl EmpiricalModulus2 {
    pub fn from_fn(f: &dyn Fn(f64, f64) -> f64, grid_step: f64) -> Result<Self> {
        if !(grid_step > 0.0 && grid_step <= 0.5) {
            return config(format!("empirical grid_step must lie in (0, 0.5], got {grid_step}"));
        }
        let cells = (1.0 / grid_step).ceil() as usize;
        if cells > 256 {
            return config(format!("bivariate empirical grid_step {grid_step} is too fine"));
        }
        let side = cells + 1;
        let h = 1.0 / cells as f64;
        let values: Vec<f64> = (0..side * side)
            .map(|idx| f((idx / side) as f64 * h, (idx % side) as f64 * h))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return config("bivariate function is not finite on the grid");
        }
        let at = |i: usize, j: usize| values[i * side + j];
        let mut table = vec![0.0; side * side];
        for a in 0..side {
            for b in 0..side {
                let mut widest: f64 = 0.0;
                for i in 0..side - a {
                    for j in 0..side - b {
                        widest = widest
                            .max((at(i + a, j + b) - at(i, j)).abs())
                            .max((at(i + a, j) - at(i, j + b)).abs());
                    }
                }
                table[a * side + b] = widest;
            }
        }
        for a in 0..side {
            for b in 0..side {
                let mut v = table[a * side + b];
                if a > 0 {
                    v = v.max(table[(a - 1) * side + b]);
                }
                if b > 0 {
                    v = v.max(table[a * side + b - 1]);
                }
                table[a * side + b] = v;
            }
        }
        Ok(Self { cells, table })
    }

    pub fn grid_step(&self) -> f64 {
        1.0 / self.cells as f64
    }

    fn eval(&self, d1: f64, d2: f64) -> f64 {
        let n = self.cells as f64;
        let a = ((d1 * n) * (1.0 + 1e-12)).floor() as usize;
        let b = ((d2 * n) * (1.0 + 1e-12)).floor() as usize;
        let side = self.cells + 1;
        self.table[a.min(self.cells) * side + b.min(self.cells)]
    }
}

impl fmt::Debug for EmpiricalModulus2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmpiricalModulus2")
            .field("grid_step", &self.grid_step())
            .finish()
    }
}

/// A function on `[0, 1]²` with an optional bivariate modulus.
#[derive(Clone)]
pub struct BivariateFunction {
    label: String,
    eval: PlaneMap,
    exact_modulus2: Option<Modulus2>,
    factors: Option<(ScalarFunction, ScalarFunction)>,
}

impl fmt::Debug for BivariateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BivariateFunction")
            .field("label", &self.label)
            .field("exact_modulus2", &self.exact_modulus2)
            .finish()
    }
}

const VERIFY_POINTS_2: usize = 33;

impl BivariateFunction {
    pub fn new(label: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(f),
            exact_modulus2: None,
            factors: None,
        }
    }

    /// Attaches a bivariate modulus after checking monotonicity, `ω(0,0) = 0`
    /// and domination of all increments on a 33 × 33 grid.
    pub fn with_modulus2(mut self, m: Modulus2) -> Result<Self> {
        let last = (VERIFY_POINTS_2 - 1) as f64;
        let grid: Vec<f64> = (0..VERIFY_POINTS_2).map(|i| i as f64 / last).collect();
        if m.eval(0.0, 0.0).abs() > VERIFY_SLACK {
            return config(format!("modulus of '{}' is not 0 at (0, 0)", self.label));
        }
        for &a in &grid {
            for w in grid.windows(2) {
                if m.eval(a, w[1]) + VERIFY_SLACK < m.eval(a, w[0]) || m.eval(w[1], a) + VERIFY_SLACK < m.eval(w[0], a)
                {
                    return config(format!("modulus of '{}' is not nondecreasing", self.label));
                }
            }
        }
        let n = VERIFY_POINTS_2;
        let values: Vec<f64> = (0..n * n).map(|idx| self.eval(grid[idx / n], grid[idx % n])).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return config(format!("function '{}' is not finite on [0, 1]²", self.label));
        }
        for a in 0..n {
            for b in 0..n {
                let bound = m.eval(a as f64 / last, b as f64 / last) + VERIFY_SLACK;
                for i in 0..n - a {
                    for j in 0..n - b {
                        let d1 = (values[(i + a) * n + j + b] - values[i * n + j]).abs();
                        let d2 = (values[(i + a) * n + j] - values[i * n + j + b]).abs();
                        if d1.max(d2) > bound {
                            return config(format!(
                                "bivariate modulus rejected for '{}' at offsets ({a}, {b})",
                                self.label
                            ));
                        }
                    }
                }
            }
        }
        self.exact_modulus2 = Some(m);
        Ok(self)
    }

    /// `f(x, y) = g(x) h(y)` with the modulus majorant
    /// `‖h‖∞ ω_g(δ1) + ‖g‖∞ ω_h(δ2)`.
    pub fn product(g: &ScalarFunction, h: &ScalarFunction) -> Result<Self> {
        let (Some(mg), Some(mh)) = (g.exact_modulus(), h.exact_modulus()) else {
            return Err(Error::Config(format!(
                "product '{}*{}' needs moduli on both factors",
                g.label(),
                h.label()
            )));
        };
        let m = Modulus2::Sum {
            first: (h.grid_sup_norm(), mg.clone()),
            second: (g.grid_sup_norm(), mh.clone()),
        };
        let (gf, hf) = (g.eval.clone(), h.eval.clone());
        let mut f = Self::new(format!("{}*{}", g.label(), h.label()), move |x, y| gf(x) * hf(y)).with_modulus2(m)?;
        f.factors = Some((g.clone(), h.clone()));
        Ok(f)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.eval)(x, y)
    }

    pub fn exact_modulus2(&self) -> Option<&Modulus2> {
        self.exact_modulus2.as_ref()
    }

    pub fn factors(&self) -> Option<(&ScalarFunction, &ScalarFunction)> {
        self.factors.as_ref().map(|(g, h)| (g, h))
    }

    /// Grid-sup empirical modulus of this function.
    pub fn empirical_modulus2(&self, grid_step: f64) -> Result<Modulus2> {
        let f = self.eval.clone();
        EmpiricalModulus2::from_fn(&move |x, y| f(x, y), grid_step).map(|e| Modulus2::Empirical(Arc::new(e)))
    }
}

/// The constant function 1.
pub fn constant_one() -> ScalarFunction {
    ScalarFunction::new("one", |_| 1.0)
        .with_modulus(ModulusSpec::zero())
        .expect("zero modulus of a constant")
}

/// Factorable functions `g(x) h(y)` used by bivariate sweeps.
pub fn corpus_factorable() -> Vec<BivariateFunction> {
    let build = || -> Result<Vec<BivariateFunction>> {
        let std = corpus_standard();
        let pick = |label: &str| std.iter().find(|f| f.label() == label).cloned().expect("corpus label");
        let pairs = [
            (pick("identity"), pick("identity")),
            (pick("square"), pick("square")),
            (pick("g_0.5"), constant_one()),
            (pick("sin_pi"), pick("sqrt")),
            (pick("g_0.25"), pick("g_0.75")),
            (pick("pow_0.25"), pick("sin_pi")),
        ];
        pairs.iter().map(|(g, h)| BivariateFunction::product(g, h)).collect()
    };
    build().expect("factorable corpus moduli verify")
}

fn parse_two_columns(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() < 2 {
            return config(format!("{}: row {} has fewer than two columns", path.display(), i + 1));
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        match parsed {
            (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => rows.push((a, b)),
            _ if i == 0 => continue, // header
            _ => {
                return config(format!("{}: row {} is not numeric", path.display(), i + 1));
            }
        }
    }
    if rows.is_empty() {
        return config(format!("{}: no data rows", path.display()));
    }
    if rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return config(format!("{}: first column must be strictly increasing", path.display()));
    }
    Ok(rows)
}

/// Reads a tabulated modulus from a two-column `(δ, ω)` CSV.
pub fn load_tabulated_modulus(path: impl AsRef<Path>) -> Result<ModulusSpec> {
    ModulusSpec::tabulated(parse_two_columns(path.as_ref())?)
}

/// Reads `(x, f(x))` samples covering `[0, 1]` and interpolates linearly.
pub fn load_sampled_function(path: impl AsRef<Path>, label: &str) -> Result<ScalarFunction> {
    let path = path.as_ref();
    let rows = parse_two_columns(path)?;
    let (first, last) = (rows[0].0, rows[rows.len() - 1].0);
    if first.abs() > 1e-12 || (last - 1.0).abs() > 1e-12 || rows.len() < 2 {
        return config(format!(
            "{}: samples must start at x = 0 and end at x = 1",
            path.display()
        ));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(ScalarFunction::new(label, move |x| {
        let i = xs.partition_point(|&p| p <= x).clamp(1, xs.len() - 1);
        let (x0, x1) = (xs[i - 1], xs[i]);
        ys[i - 1] + (ys[i] - ys[i - 1]) * (x - x0) / (x1 - x0)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modulus_eval_examples() {
        let h = ModulusSpec::hoelder(0.5, 1.0).unwrap();
        assert!((modulus_eval(&h, 0.04).unwrap() - 0.2).abs() < 1e-15);
        for m in [
            h.clone(),
            ModulusSpec::lipschitz(3.0).unwrap(),
            trial_g_modulus(0.3),
            ModulusSpec::empirical(&ScalarFunction::new("id", |x| x), 1e-3).unwrap(),
        ] {
            assert_eq!(modulus_eval(&m, 0.0).unwrap(), 0.0);
        }
        assert!(modulus_eval(&h, -1e-3).is_err());
    }

    #[test]
    fn empirical_identity() {
        let m = ModulusSpec::empirical(&ScalarFunction::new("id", |x| x), 1e-3).unwrap();
        assert!((m.eval(0.25) - 0.25).abs() <= 1e-3);
    }

    #[test]
    fn hoelder_one_is_lipschitz() {
        let a = ModulusSpec::hoelder(1.0, 2.5).unwrap();
        let b = ModulusSpec::lipschitz(2.5).unwrap();
        for i in 0..=200 {
            let d = i as f64 / 100.0;
            assert_eq!(a.eval(d), b.eval(d));
        }
    }

    #[test]
    fn tabulated_rejects_bad_knots() {
        assert!(matches!(ModulusSpec::tabulated(vec![]), Err(Error::Config(_))));
        assert!(ModulusSpec::tabulated(vec![(0.5, 0.2), (0.4, 0.3)]).is_err());
        assert!(ModulusSpec::tabulated(vec![(0.5, 0.2), (0.6, 0.1)]).is_err());
        assert!(ModulusSpec::tabulated(vec![(0.5, 0.2), (1.5, 0.3)]).is_err());
        let m = ModulusSpec::tabulated(vec![(0.0, 0.0), (0.5, 0.2), (1.0, 0.3)]).unwrap();
        assert!((m.eval(0.25) - 0.1).abs() < 1e-15);
        assert!((m.eval(0.75) - 0.25).abs() < 1e-15);
        assert_eq!(m.eval(3.0), 0.3);
    }

    #[test]
    fn trial_g_values() {
        let g = trial_g(0.5).unwrap();
        assert_eq!(g.eval(0.5), 0.0);
        assert!((g.eval(0.2) - 0.3).abs() < 1e-15);
        assert!(trial_g(1.2).is_err());
        assert!(trial_g(-0.1).is_err());
    }

    #[test]
    fn trial_g_modulus_matches_brute_force() {
        // sup over a 2001-point grid of pairs
        let t = 0.3;
        let g = trial_g(t).unwrap();
        let pts = 2001;
        let xs: Vec<f64> = (0..pts).map(|i| i as f64 / (pts - 1) as f64).collect();
        let brute = |delta: f64| {
            let mut best: f64 = 0.0;
            for (i, &x) in xs.iter().enumerate() {
                for &y in &xs[i..] {
                    if y - x <= delta + 1e-12 {
                        best = best.max((g.eval(x) - g.eval(y)).abs());
                    }
                }
            }
            best
        };
        assert!((brute(0.9) - 0.7).abs() < 1e-12);
        let m = g.exact_modulus().unwrap();
        assert!((m.eval(0.9) - 0.7).abs() < 1e-15);
        for k in 0..=20 {
            let d = k as f64 / 20.0;
            assert!((m.eval(d) - brute(d)).abs() <= 1.0 / (pts - 1) as f64, "delta {d}");
        }
    }

    #[test]
    fn trial_big_g_values() {
        let g = trial_G(0.5).unwrap();
        assert_eq!(g.eval(0.0), 0.0);
        assert!((g.eval(0.5) - 0.125).abs() < 1e-15);
        // cross-check by midpoint integration of |0.5 - y|
        let steps = 100_000;
        let h = 0.8 / steps as f64;
        let num: f64 = (0..steps).map(|i| (0.5 - (i as f64 + 0.5) * h).abs() * h).sum();
        assert!((g.eval(0.8) - num).abs() < 1e-9);
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert_eq!(g.derivative(x).unwrap(), (0.5 - x).abs());
        }
        assert!(trial_G(2.0).is_err());
    }

    #[test]
    fn corpus_contents() {
        let corpus = corpus_standard();
        assert!(corpus.len() >= 8);
        for f in &corpus {
            assert!(f.exact_modulus().is_some(), "{}", f.label());
        }
        let sqrt = corpus_lookup("sqrt").unwrap();
        let gap = (sqrt.eval(0.25) - sqrt.eval(0.16)).abs();
        assert!((gap - 0.1).abs() < 1e-15);
        assert!(gap <= sqrt.exact_modulus().unwrap().eval(0.09) + 1e-15);
    }

    #[test]
    fn wrong_modulus_is_rejected() {
        let f = ScalarFunction::new("steep", |x| 3.0 * x);
        assert!(matches!(
            f.with_modulus(ModulusSpec::lipschitz(1.0).unwrap()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn empirical_never_exceeds_exact() {
        for f in corpus_standard() {
            let exact = f.exact_modulus().unwrap().clone();
            let emp = ModulusSpec::empirical(&f, 1e-3).unwrap();
            for k in 0..=1000 {
                let d = k as f64 / 1000.0;
                assert!(emp.eval(d) <= exact.eval(d) + 1e-9, "{} at {d}", f.label());
            }
        }
    }

    #[test]
    fn factorable_corpus_builds() {
        let corpus = corpus_factorable();
        assert!(corpus.len() >= 5);
        let f = &corpus[2];
        assert_eq!(f.label(), "g_0.5*one");
        let m = f.exact_modulus2().unwrap();
        assert!((m.eval(0.3, 0.9) - 0.3).abs() < 1e-15);
        assert!((m.eval(0.7, 0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empirical_bivariate_modulus() {
        let f = BivariateFunction::new("x2y2", |x, y| x * x * y * y);
        let m = f.empirical_modulus2(1.0 / 32.0).unwrap();
        // exact value 1 - (1 - d1)^2 (1 - d2)^2 on grid points
        let exact = |a: f64, b: f64| 1.0 - (1.0 - a).powi(2) * (1.0 - b).powi(2);
        for (a, b) in [(0.25, 0.5), (0.0, 0.125), (1.0, 1.0)] {
            assert!((m.eval(a, b) - exact(a, b)).abs() < 1e-12);
        }
        assert_eq!(m.eval(0.0, 0.0), 0.0);
    }

    #[test]
    fn csv_loading() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "delta,omega\n0.25,0.5\n1.0,1.0\n").unwrap();
        let m = load_tabulated_modulus(&path).unwrap();
        assert!((m.eval(0.125) - 0.25).abs() < 1e-15);

        std::fs::write(&path, "0.5,1\n0.25,2\n").unwrap();
        assert!(load_tabulated_modulus(&path).is_err());

        let fpath = dir.path().join("f.csv");
        std::fs::write(&fpath, "x,f\n0,0\n0.5,1\n1,0\n").unwrap();
        let f = load_sampled_function(&fpath, "tent").unwrap();
        assert!((f.eval(0.25) - 0.5).abs() < 1e-15);
        assert!((f.eval(1.0)).abs() < 1e-15);
        std::fs::write(&fpath, "0.1,0\n1,0\n").unwrap();
        assert!(load_sampled_function(&fpath, "short").is_err());
        assert!(load_sampled_function(dir.path().join("missing.csv"), "x").is_err());
    }

    #[test]
    fn labels_resolve() {
        assert_eq!(function_by_label("sin_pi").unwrap().label(), "sin_pi");
        let g = function_by_label("g_0.3").unwrap();
        assert!((g.eval(0.5) - 0.2).abs() < 1e-15);
        assert!(function_by_label("G_0.5").unwrap().derivative(0.2).is_some());
        assert!(function_by_label("g_2").is_err());
        assert!(function_by_label("nope").is_err());
        let labels: Vec<String> = corpus_differentiable().iter().map(|f| f.label().to_string()).collect();
        assert_eq!(labels, ["identity", "square", "sin_pi", "G_0.5"]);
    }
}
