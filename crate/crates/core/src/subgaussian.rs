//! Exact audits of binomial concentration inequalities and of a family of
//! symmetric polynomial densities.
//!
//! Every expectation is a finite sum over the `n + 1` support points, so the
//! audits are deterministic. Each audit returns a [`ViolationReport`] and
//! never aborts on a failed inequality.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{config, domain, Result};
use crate::numerics::{integrate, ln_binomial_pmf, CompensatedSum, QuadratureConfig};

/// A cell violates its inequality when `lhs - rhs > VIOLATION_SLACK (1 + |rhs|)`.
pub const VIOLATION_SLACK: f64 = 1e-12;

/// `μ ~ Binomial(n, p)` and its normalized form `η = (μ - np) / √(np(1-p))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinomialModel {
    n: u64,
    p: f64,
    ln_pmf: Vec<f64>,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let top = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + values.map(|v| (v - top).exp()).collect::<CompensatedSum>().value().ln()
}

/// `ln cosh a` without overflow.
fn ln_cosh(a: f64) -> f64 {
    let a = a.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl BinomialModel {
    pub fn new(n: u64, p: f64) -> Result<Self> {
        if n == 0 {
            return domain("binomial model needs n >= 1");
        }
        if !(p > 0.0 && p < 1.0) {
            return domain(format!("binomial model needs p in (0, 1), got {p}"));
        }
        let ln_pmf = (0..=n).map(|k| ln_binomial_pmf(n, k, p)).collect();
        Ok(Self { n, p, ln_pmf })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.ln_pmf.get(k as usize).map_or(0.0, |v| v.exp())
    }

    pub fn pmf_total(&self) -> f64 {
        self.ln_pmf.iter().map(|v| v.exp()).collect::<CompensatedSum>().value()
    }

    pub fn mean(&self) -> f64 {
        self.n as f64 * self.p
    }

    pub fn variance(&self) -> f64 {
        self.n as f64 * self.p * (1.0 - self.p)
    }

    /// Support of `η`, in increasing order.
    pub fn eta_support(&self) -> Vec<f64> {
        let (m, s) = (self.mean(), self.variance().sqrt());
        (0..=self.n).map(|k| (k as f64 - m) / s).collect()
    }

    /// `E (μ - np)^k` by exact summation.
    pub fn central_moment(&self, k: u32) -> f64 {
        let m = self.mean();
        self.ln_pmf
            .iter()
            .enumerate()
            .map(|(i, lp)| lp.exp() * (i as f64 - m).powi(k as i32))
            .collect::<CompensatedSum>()
            .value()
    }

    /// `ln E exp(t η)`.
    pub fn ln_mgf_eta(&self, t: f64) -> f64 {
        let eta = self.eta_support();
        let lp = self.ln_pmf.iter().copied();
        log_sum_exp(lp.clone().zip(eta.iter()).map(|(l, e)| l + t * e)) - log_sum_exp(lp)
    }

    /// `ln E cosh(λ η)`.
    pub fn ln_cosh_mgf_eta(&self, lambda: f64) -> f64 {
        let eta = self.eta_support();
        let lp = self.ln_pmf.iter().copied();
        log_sum_exp(lp.clone().zip(eta.iter()).map(|(l, e)| l + ln_cosh(lambda * e))) - log_sum_exp(lp)
    }
}

/// `T(u) = max(P(η > u), P(η < -u))` by exact summation.
pub fn tail_function(b: &BinomialModel, u: f64) -> f64 {
    let eta = b.eta_support();
    let mut upper = CompensatedSum::new();
    let mut lower = CompensatedSum::new();
    for (k, e) in eta.iter().enumerate() {
        if *e > u {
            upper.add(b.pmf(k as u64));
        } else if *e < -u {
            lower.add(b.pmf(k as u64));
        }
    }
    upper.value().max(lower.value()).min(1.0)
}

/// One audited cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditCell {
    pub params: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`; positive means the inequality fails.
    pub margin: f64,
}

impl AuditCell {
    pub fn new(params: &[(&str, f64)], lhs: f64, rhs: f64) -> Self {
        Self {
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            lhs,
            rhs,
            margin: lhs - rhs,
        }
    }

    pub fn violates(&self) -> bool {
        !(self.margin <= VIOLATION_SLACK * (1.0 + self.rhs.abs()))
    }
}

/// One swept parameter and its values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridAxis {
    pub name: String,
    pub values: Vec<f64>,
}

impl GridAxis {
    pub fn new(name: &str, values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            name: name.to_string(),
            values: values.into_iter().collect(),
        }
    }
}

/// Outcome of one inequality audit over a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub inequality_id: String,
    pub grid: Vec<GridAxis>,
    pub cells_total: usize,
    pub cells_violating: usize,
    /// Cell with the largest margin (first one on ties).
    pub worst: Option<AuditCell>,
    pub all_margins: Option<Vec<AuditCell>>,
}

impl ViolationReport {
    pub fn from_cells(id: &str, grid: Vec<GridAxis>, cells: Vec<AuditCell>) -> Self {
        let mut worst: Option<&AuditCell> = None;
        for c in &cells {
            if worst.is_none_or(|w| c.margin > w.margin || (w.margin.is_nan() && !c.margin.is_nan())) {
                worst = Some(c);
            }
        }
        Self {
            inequality_id: id.to_string(),
            grid,
            cells_total: cells.len(),
            cells_violating: cells.iter().filter(|c| c.violates()).count(),
            worst: worst.cloned(),
            all_margins: Some(cells),
        }
    }

    /// Concatenates the cells of several reports on the same inequality.
    pub fn combine(id: &str, grid: Vec<GridAxis>, parts: Vec<ViolationReport>) -> Self {
        let cells = parts
            .into_iter()
            .flat_map(|r| r.all_margins.unwrap_or_default())
            .collect();
        Self::from_cells(id, grid, cells)
    }

    /// Drops the per-cell list, keeping counts and the worst cell.
    pub fn without_margins(mut self) -> Self {
        self.all_margins = None;
        self
    }

    pub fn is_clean(&self) -> bool {
        self.cells_violating == 0
    }
}

fn model_params(b: &BinomialModel) -> [(&'static str, f64); 2] {
    [("n", b.n as f64), ("p", b.p)]
}

/// `E cosh(λη) ≤ exp(λ²/2)`, compared on the log scale:
/// `lhs = ln E cosh(λη)`, `rhs = λ²/2`.
pub fn cosh_mgf_check(b: &BinomialModel, lambdas: &[f64]) -> Result<ViolationReport> {
    if let Some(l) = lambdas.iter().find(|l| !l.is_finite()) {
        return domain(format!("lambda must be finite, got {l}"));
    }
    let [pn, pp] = model_params(b);
    let cells = lambdas
        .iter()
        .map(|&l| AuditCell::new(&[pn, pp, ("lambda", l)], b.ln_cosh_mgf_eta(l), 0.5 * l * l))
        .collect();
    Ok(ViolationReport::from_cells(
        "cosh_mgf_log",
        vec![
            GridAxis::new("n", [b.n as f64]),
            GridAxis::new("p", [b.p]),
            GridAxis::new("lambda", lambdas.iter().copied()),
        ],
        cells,
    ))
}

/// `(2m)! / (2^m m!) = (2m - 1)!!`
fn gaussian_even_moment(m: u32) -> f64 {
    (1..=m).map(|i| (2 * i - 1) as f64).product()
}

/// Largest `m` accepted by the moment audits.
pub const MAX_MOMENT_ORDER: u32 = 20;

/// `E η^(2m) ≤ (2m - 1)!!` for `m = 1..=m_max`, with `η` normalized by the
/// summed second central moment (so the `m = 1` margin is exactly 0).
pub fn moment_check(b: &BinomialModel, m_max: u32) -> Result<ViolationReport> {
    if m_max == 0 || m_max > MAX_MOMENT_ORDER {
        return config(format!("moment order must lie in 1..={MAX_MOMENT_ORDER}, got {m_max}"));
    }
    let var = b.central_moment(2);
    let [pn, pp] = model_params(b);
    let cells = (1..=m_max)
        .map(|m| {
            let lhs = if m == 1 {
                1.0
            } else {
                b.central_moment(2 * m) / var.powi(m as i32)
            };
            AuditCell::new(&[pn, pp, ("m", m as f64)], lhs, gaussian_even_moment(m))
        })
        .collect();
    Ok(ViolationReport::from_cells(
        "even_moment_normalized",
        vec![
            GridAxis::new("n", [b.n as f64]),
            GridAxis::new("p", [b.p]),
            GridAxis::new("m", (1..=m_max).map(f64::from)),
        ],
        cells,
    ))
}

/// The unnormalized variant `E (μ - np)^(2m) ≤ n^(-m) (2m - 1)!! θ^m`,
/// `θ = √(p(1-p))`, kept for comparison with [`moment_check`].
pub fn moment_check_unnormalized(b: &BinomialModel, m_max: u32) -> Result<ViolationReport> {
    if m_max == 0 || m_max > MAX_MOMENT_ORDER {
        return config(format!("moment order must lie in 1..={MAX_MOMENT_ORDER}, got {m_max}"));
    }
    let th = (b.p * (1.0 - b.p)).sqrt();
    let nf = b.n as f64;
    let [pn, pp] = model_params(b);
    let cells = (1..=m_max)
        .map(|m| {
            let rhs = gaussian_even_moment(m) * (th / nf).powi(m as i32);
            AuditCell::new(&[pn, pp, ("m", m as f64)], b.central_moment(2 * m), rhs)
        })
        .collect();
    Ok(ViolationReport::from_cells(
        "even_moment_unnormalized",
        vec![
            GridAxis::new("n", [b.n as f64]),
            GridAxis::new("p", [b.p]),
            GridAxis::new("m", (1..=m_max).map(f64::from)),
        ],
        cells,
    ))
}

/// `T(u) ≤ 2 exp(-u²/2)` for the normalized variable.
pub fn tail_bound_check(b: &BinomialModel, u_grid: &[f64]) -> Result<ViolationReport> {
    if let Some(u) = u_grid.iter().find(|u| !(**u >= 0.0 && u.is_finite())) {
        return domain(format!("tail level must be finite and >= 0, got {u}"));
    }
    let [pn, pp] = model_params(b);
    let cells = u_grid
        .iter()
        .map(|&u| AuditCell::new(&[pn, pp, ("u", u)], tail_function(b, u), 2.0 * (-0.5 * u * u).exp()))
        .collect();
    Ok(ViolationReport::from_cells(
        "tail_two_sided",
        vec![
            GridAxis::new("n", [b.n as f64]),
            GridAxis::new("p", [b.p]),
            GridAxis::new("u", u_grid.iter().copied()),
        ],
        cells,
    ))
}

/// `ln[(1-p) e^(-λp) + p e^(λ(1-p))]`
pub fn centered_bernoulli_ln_mgf(p: f64, lambda: f64) -> f64 {
    lambda * (1.0 - p) + (p + (1.0 - p) * (-lambda).exp()).ln()
}

/// `ln[(1-p) e^(-λp) + p e^(λ(1-p))] ≤ p(1-p) λ²/2` for `p ∈ [1/2, 1)`, `λ ≥ 0`.
pub fn bernoulli_check(p: f64, lambdas: &[f64]) -> Result<ViolationReport> {
    if !(0.5..1.0).contains(&p) {
        return domain(format!("inequality holds for p in [1/2, 1), got {p}"));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
        return domain(format!("lambda must be finite and >= 0, got {l}"));
    }
    let cells = lambdas
        .iter()
        .map(|&l| {
            AuditCell::new(
                &[("p", p), ("lambda", l)],
                centered_bernoulli_ln_mgf(p, l),
                0.5 * p * (1.0 - p) * l * l,
            )
        })
        .collect();
    Ok(ViolationReport::from_cells(
        "centered_bernoulli_mgf",
        vec![
            GridAxis::new("p", [p]),
            GridAxis::new("lambda", lambdas.iter().copied()),
        ],
        cells,
    ))
}

/// Grid supremum of `√(2 max(0, ln M(λ))) / |λ|`, a lower estimate of the
/// subgaussian norm.
pub fn sub_norm_estimate(mgf: &dyn Fn(f64) -> f64, lambda_grid: &[f64]) -> Result<f64> {
    let mut pairs = Vec::with_capacity(lambda_grid.len());
    for &l in lambda_grid {
        let v = mgf(l);
        if !(v.is_finite() && v > 0.0) {
            return domain(format!("moment generating function is {v} at lambda = {l}"));
        }
        pairs.push((l, v.ln()));
    }
    sub_norm_sup(pairs)
}

/// [`sub_norm_estimate`] from `ln M(λ)`, for arguments where `M` overflows.
pub fn sub_norm_estimate_ln(ln_mgf: &dyn Fn(f64) -> f64, lambda_grid: &[f64]) -> Result<f64> {
    sub_norm_sup(lambda_grid.iter().map(|&l| (l, ln_mgf(l))).collect())
}

fn sub_norm_sup(pairs: Vec<(f64, f64)>) -> Result<f64> {
    let mut best: f64 = 0.0;
    for (l, v) in pairs {
        if l == 0.0 || !l.is_finite() {
            return domain(format!("lambda grid must be finite and nonzero, got {l}"));
        }
        if !v.is_finite() {
            return domain(format!("log moment generating function is {v} at lambda = {l}"));
        }
        best = best.max((2.0 * v.max(0.0)).sqrt() / l.abs());
    }
    Ok(best)
}

/// Density `((α+1)/(2α)) (1 - |x|^α)` on `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolyDensity {
    pub alpha: f64,
}

impl PolyDensity {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return domain(format!("density exponent must be positive, got {alpha}"));
        }
        Ok(Self { alpha })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x.abs() > 1.0 {
            return 0.0;
        }
        (self.alpha + 1.0) / (2.0 * self.alpha) * (1.0 - x.abs().powf(self.alpha))
    }

    pub fn variance_closed(&self) -> f64 {
        (self.alpha + 1.0) / (3.0 * (self.alpha + 3.0))
    }

    pub fn fourth_moment_closed(&self) -> f64 {
        (self.alpha + 1.0) / (5.0 * (self.alpha + 5.0))
    }

    pub fn excess_kurtosis_closed(&self) -> f64 {
        let v = self.variance_closed();
        self.fourth_moment_closed() / (v * v) - 3.0
    }

    /// `∫ g(x) f(x) dx` over `[-1, 1]`.
    pub fn expect(&self, g: impl Fn(f64) -> f64, cfg: &QuadratureConfig) -> Result<f64> {
        Ok(integrate(|x| g(x) * self.pdf(x), -1.0, 1.0, &[0.0], cfg)?.value)
    }

    /// `E ζ^k` by quadrature.
    pub fn moment(&self, k: i32, cfg: &QuadratureConfig) -> Result<f64> {
        self.expect(|x| x.powi(k), cfg)
    }
}

/// Moments of a [`PolyDensity`] and its strict-subgaussian audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyDensityStats {
    pub alpha: f64,
    pub normalization: f64,
    pub variance: f64,
    pub variance_closed: f64,
    pub excess_kurtosis: f64,
    pub excess_kurtosis_closed: f64,
    /// `ln E exp(λζ) ≤ λ² σ² / 2` on the log scale.
    pub ssub_margin_report: ViolationReport,
}

pub fn poly_density_stats(d: &PolyDensity, lambdas: &[f64], cfg: &QuadratureConfig) -> Result<PolyDensityStats> {
    let normalization = d.expect(|_| 1.0, cfg)?;
    let variance = d.moment(2, cfg)?;
    let fourth = d.moment(4, cfg)?;
    let var = d.variance_closed();
    let mut cells = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        if !l.is_finite() {
            return domain(format!("lambda must be finite, got {l}"));
        }
        let mgf = d.expect(|x| (l * x).exp(), cfg)?;
        cells.push(AuditCell::new(
            &[("alpha", d.alpha), ("lambda", l)],
            mgf.ln(),
            0.5 * l * l * var,
        ));
    }
    Ok(PolyDensityStats {
        alpha: d.alpha,
        normalization,
        variance,
        variance_closed: var,
        excess_kurtosis: fourth / (variance * variance) - 3.0,
        excess_kurtosis_closed: d.excess_kurtosis_closed(),
        ssub_margin_report: ViolationReport::from_cells(
            "strict_subgaussian_log",
            vec![
                GridAxis::new("alpha", [d.alpha]),
                GridAxis::new("lambda", lambdas.iter().copied()),
            ],
            cells,
        ),
    })
}

/// Root of the excess kurtosis in `α`, by bisection on `[lo, hi]`.
pub fn kurtosis_root(lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let k = |a: f64| PolyDensity { alpha: a }.excess_kurtosis_closed();
    let (mut a, mut b) = (lo, hi);
    if !(a > 0.0 && b > a) {
        return domain(format!("bracket [{lo}, {hi}] is invalid"));
    }
    let (ka, kb) = (k(a), k(b));
    if ka.signum() == kb.signum() {
        return domain(format!("excess kurtosis does not change sign on [{lo}, {hi}]"));
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if k(mid).signum() == ka.signum() {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// `1, 2, 4, …, 256`
pub fn default_n_grid() -> Vec<u64> {
    (0..=8).map(|k| 1u64 << k).collect()
}

/// Success probabilities and their mirror images.
pub fn default_p_grid() -> Vec<f64> {
    vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99]
}

/// 201 points on `[-10, 10]`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=200).map(|k| (k as f64 - 100.0) / 10.0).collect()
}

/// Runs `check` for every `(n, p)` and merges the results.
pub fn grid_audit(
    id: &str,
    ns: &[u64],
    ps: &[f64],
    extra: GridAxis,
    check: impl Fn(&BinomialModel) -> Result<ViolationReport>,
) -> Result<ViolationReport> {
    let mut parts = Vec::with_capacity(ns.len() * ps.len());
    for &n in ns {
        for &p in ps {
            parts.push(check(&BinomialModel::new(n, p)?)?);
        }
    }
    let grid = vec![
        GridAxis::new("n", ns.iter().map(|&n| n as f64)),
        GridAxis::new("p", ps.iter().copied()),
        extra,
    ];
    Ok(ViolationReport::combine(id, grid, parts))
}
