//! Finite-sample theory for correlation coefficients under bivariate
//! normality: the exact density of Pearson's r, the expected values of r_p
//! and r_s, closed-form maps between the population Pearson, Spearman and
//! Kendall coefficients, and Fisher-z intervals.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::{ln_gamma, norm_ppf};

/// Relative size of a series term below which summation stops.
pub const SERIES_REL_TOL: f64 = 1e-15;
/// Hard cap on the number of series terms.
pub const SERIES_MAX_TERMS: usize = 1_000_000;

/// Population Pearson coefficient and sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalTheoryParams {
    pub rho: f64,
    pub n: usize,
}

impl NormalTheoryParams {
    pub fn new(rho: f64, n: usize) -> Self {
        Self { rho, n }
    }
}

/// ₂F₁(½, ½; c; x) by direct power series.
///
/// Consecutive terms satisfy t_{i+1} = t_i · (½ + i)² x / ((c + i)(i + 1)),
/// so every term is non-negative for x ≥ 0.
pub fn gauss_2f1_half_half(c: f64, x: f64) -> Result<f64> {
    if !(c > 1.0) {
        return Err(Error::domain(format!("2F1 needs c > 1, got {c}")));
    }
    if !(0.0..1.0).contains(&x) {
        return Err(Error::domain(format!("2F1 series needs 0 <= x < 1, got {x}")));
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 0..SERIES_MAX_TERMS {
        let fi = i as f64;
        term *= (0.5 + fi) * (0.5 + fi) * x / ((c + fi) * (fi + 1.0));
        sum += term;
        if term <= sum * SERIES_REL_TOL {
            return Ok(sum);
        }
    }
    Err(Error::numeric(format!(
        "2F1(1/2, 1/2; {c}; {x}) did not converge in {SERIES_MAX_TERMS} terms"
    )))
}

/// Exact sampling density of Pearson's r for a bivariate normal population.
///
/// The shape is (1−ρ²)^((N−1)/2) (1−r²)^((N−4)/2) (1−ρr)^(−(N−3/2))
/// ₂F₁(½, ½; N−½; (ρr+1)/2); the constant is obtained by integrating the
/// shape to one once at construction. The integral is taken in θ with
/// r = sin θ, which removes the endpoint singularity of (1−r²)^((N−4)/2).
#[derive(Debug, Clone)]
pub struct RpDensity {
    params: NormalTheoryParams,
    log_norm: f64,
}

/// Simpson intervals for the normalizing integral.
const NORMALIZATION_INTERVALS: usize = 8_000;

impl RpDensity {
    pub fn new(params: NormalTheoryParams) -> Result<Self> {
        if params.n < 4 {
            return Err(Error::domain(format!("density of r needs n >= 4, got {}", params.n)));
        }
        if !(params.rho.abs() < 1.0) {
            return Err(Error::domain(format!(
                "density of r needs |rho| < 1, got {}",
                params.rho
            )));
        }
        let mut d = Self {
            params,
            log_norm: 0.0,
        };
        let half = PI / 2.0;
        let log_int = d.log_integral_theta(-half, half, NORMALIZATION_INTERVALS)?;
        d.log_norm = log_int;
        Ok(d)
    }

    pub fn params(&self) -> NormalTheoryParams {
        self.params
    }

    /// Log of the unnormalized density with the (1−r²) factor left out.
    fn log_core(&self, r: f64) -> Result<f64> {
        let NormalTheoryParams { rho, n } = self.params;
        let nf = n as f64;
        let f = gauss_2f1_half_half(nf - 0.5, (rho * r + 1.0) / 2.0)?;
        Ok(0.5 * (nf - 1.0) * (1.0 - rho * rho).ln() - (nf - 1.5) * (1.0 - rho * r).ln() + f.ln())
    }

    fn log_shape(&self, r: f64) -> Result<f64> {
        let nf = self.params.n as f64;
        Ok(self.log_core(r)? + 0.5 * (nf - 4.0) * (1.0 - r * r).ln())
    }

    // log ∫ shape(sin θ) cos θ dθ over [a, b] by composite Simpson,
    // accumulated relative to the largest integrand value.
    fn log_integral_theta(&self, a: f64, b: f64, intervals: usize) -> Result<f64> {
        let m = intervals + intervals % 2;
        let h = (b - a) / m as f64;
        let nf = self.params.n as f64;
        let mut logs = Vec::with_capacity(m + 1);
        for k in 0..=m {
            let theta = a + k as f64 * h;
            let c = theta.cos();
            if c <= 0.0 {
                logs.push(f64::NEG_INFINITY);
                continue;
            }
            let r = theta.sin();
            logs.push(self.log_core(r)? + (nf - 3.0) * c.ln());
        }
        let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        let mut acc = crate::sum::NeumaierSum::new();
        for (k, &l) in logs.iter().enumerate() {
            let w = if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc.add(w * (l - peak).exp());
        }
        Ok(peak + (acc.value() * h / 3.0).ln())
    }

    pub fn log_pdf(&self, r: f64) -> Result<f64> {
        if !(r.abs() < 1.0) {
            return Err(Error::domain(format!("density of r needs |r| < 1, got {r}")));
        }
        Ok(self.log_shape(r)? - self.log_norm)
    }

    pub fn pdf(&self, r: f64) -> Result<f64> {
        self.log_pdf(r).map(f64::exp)
    }

    /// P(lo < r < hi), integrated in θ-space.
    pub fn probability(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || lo < -1.0 || hi > 1.0 {
            return Err(Error::domain(format!("invalid interval ({lo}, {hi})")));
        }
        let (a, b) = (lo.asin(), hi.asin());
        let intervals = ((NORMALIZATION_INTERVALS as f64 * (b - a) / PI).ceil() as usize).max(64);
        let l = self.log_integral_theta(a, b, intervals)?;
        Ok((l - self.log_norm).exp())
    }

    /// Density on `points` equally spaced values spanning (−1 + eps, 1 − eps).
    pub fn curve(&self, points: usize, eps: f64) -> Result<DensityCurve> {
        if points < 2 {
            return Err(Error::input("density curve needs at least 2 points"));
        }
        let lo = -1.0 + eps;
        let hi = 1.0 - eps;
        let step = (hi - lo) / (points - 1) as f64;
        let grid: Vec<f64> = (0..points).map(|i| lo + i as f64 * step).collect();
        let density = grid.iter().map(|&r| self.pdf(r)).collect::<Result<Vec<_>>>()?;
        Ok(DensityCurve { grid, density })
    }
}

/// Density of Pearson's r at a single point. Builds the normalizing constant
/// on every call; hold an [`RpDensity`] to evaluate many points.
pub fn pdf_rp(params: NormalTheoryParams, r: f64) -> Result<f64> {
    if !(r.abs() < 1.0) {
        return Err(Error::domain(format!("density of r needs |r| < 1, got {r}")));
    }
    RpDensity::new(params)?.pdf(r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityCurve {
    pub fn trapezoid_integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
            .sum()
    }

    /// Grid point of maximal density.
    pub fn mode(&self) -> f64 {
        let i = self
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.grid[i]
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::domain(format!("population coefficient must lie in [-1, 1], got {rho}")));
    }
    Ok(())
}

/// E(r_p) = 2Γ(N/2)² / ((N−1) Γ((N−1)/2)²) · ρ · ₂F₁(½, ½; (N+1)/2; ρ²).
pub fn expected_rp(params: NormalTheoryParams) -> Result<f64> {
    let NormalTheoryParams { rho, n } = params;
    check_rho(rho)?;
    if n < 2 {
        return Err(Error::domain(format!("expected r_p needs n >= 2, got {n}")));
    }
    if rho.abs() == 1.0 {
        return Ok(rho);
    }
    let nf = n as f64;
    let log_pre = 2f64.ln() + 2.0 * ln_gamma(nf / 2.0) - (nf - 1.0).ln() - 2.0 * ln_gamma((nf - 1.0) / 2.0);
    Ok(log_pre.exp() * rho * gauss_2f1_half_half((nf + 1.0) / 2.0, rho * rho)?)
}

/// E(r_s) = 6 / (π(N+1)) · (asin ρ + (N−2) asin(ρ/2)).
pub fn expected_rs(params: NormalTheoryParams) -> Result<f64> {
    let NormalTheoryParams { rho, n } = params;
    check_rho(rho)?;
    if n < 2 {
        return Err(Error::domain(format!("expected r_s needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok(6.0 / (PI * (nf + 1.0)) * (rho.asin() + (nf - 2.0) * (rho / 2.0).asin()))
}

/// E(r_s) written as ((N−2) R_s + 3 R_t) / (N+1).
pub fn expected_rs_from_population(params: NormalTheoryParams) -> Result<f64> {
    let NormalTheoryParams { rho, n } = params;
    if n < 2 {
        return Err(Error::domain(format!("expected r_s needs n >= 2, got {n}")));
    }
    let nf = n as f64;
    Ok(((nf - 2.0) * rs_from_rp(rho)? + 3.0 * rt_from_rp(rho)?) / (nf + 1.0))
}

/// Population Spearman coefficient of a bivariate normal: (6/π) asin(ρ/2).
pub fn rs_from_rp(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(6.0 / PI * (rho / 2.0).asin())
}

/// Population Kendall coefficient of a bivariate normal: (2/π) asin ρ.
pub fn rt_from_rp(rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(2.0 / PI * rho.asin())
}

/// Population Spearman coefficient from Kendall's: (6/π) asin(sin(πτ/2)/2).
pub fn rs_from_rt(tau: f64) -> Result<f64> {
    check_rho(tau)?;
    Ok(6.0 / PI * ((0.5 * PI * tau).sin() / 2.0).asin())
}

/// Inverse of [`rs_from_rp`]: 2 sin(π R_s / 6).
pub fn rp_from_rs(rs: f64) -> Result<f64> {
    check_rho(rs)?;
    Ok(2.0 * (PI * rs / 6.0).sin())
}

/// Location and size of the largest R_p − R_s gap on [0, 1].
///
/// d/dρ [ρ − (6/π) asin(ρ/2)] vanishes where √(1 − ρ²/4) = 3/π.
pub fn max_pearson_spearman_gap() -> (f64, f64) {
    let rho = (4.0 * PI * PI - 36.0).sqrt() / PI;
    let rs = 6.0 / PI * (rho / 2.0).asin();
    (rho, rho - rs)
}

pub fn fisher_z(r: f64) -> Result<f64> {
    if !(r.abs() < 1.0) {
        return Err(Error::domain(format!("Fisher z needs |r| < 1, got {r}")));
    }
    Ok(r.atanh())
}

pub fn fisher_z_inverse(z: f64) -> f64 {
    z.tanh()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// True when the standard error is a heuristic rather than exact theory.
    pub approximate: bool,
}

fn z_interval(r: f64, n: usize, level: f64, variance_factor: f64, approximate: bool) -> Result<ConfidenceInterval> {
    if n < 4 {
        return Err(Error::domain(format!("Fisher interval needs n >= 4, got {n}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let z = fisher_z(r)?;
    let crit = norm_ppf(0.5 + level / 2.0)?;
    let se = (variance_factor / (n as f64 - 3.0)).sqrt();
    Ok(ConfidenceInterval {
        estimate: r,
        lower: fisher_z_inverse(z - crit * se),
        upper: fisher_z_inverse(z + crit * se),
        level,
        approximate,
    })
}

/// tanh(atanh r ± z_crit / √(n − 3)).
pub fn fisher_ci(r: f64, n: usize, level: f64) -> Result<ConfidenceInterval> {
    z_interval(r, n, level, 1.0, false)
}

/// Approximate interval for Spearman's r: atanh scale with standard error
/// √(1.06 / (n − 3)).
pub fn spearman_ci_approx(r: f64, n: usize, level: f64) -> Result<ConfidenceInterval> {
    z_interval(r, n, level, 1.06, true)
}
