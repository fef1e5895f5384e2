//! Seeded random generation.
//!
//! Every random stream is addressed by a master seed plus a path of indices
//! (condition, cell, replication, ...). The path is hashed into a ChaCha8
//! key, so a replication draws the same numbers no matter which worker runs
//! it or in what order. Normal variates use the ziggurat sampler from
//! `rand_distr`; bit-level output is stable per build of that crate.
//!
//! Non-normal pairs come from a Gaussian copula: a latent bivariate normal
//! pair is pushed through each marginal's quantile function. The latent
//! correlation is calibrated by bisection so that r_p on a large calibration
//! sample hits the requested population Pearson coefficient.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corr::{kendall_slices, pearson_slices, spearman_slices, KendallVariant, PairedSample};
use crate::error::{Error, Result};
use crate::exact::{rs_from_rp, rt_from_rp};
use crate::special::{ln_gamma, norm_cdf, norm_pdf, norm_ppf, norm_sf, reg_lower_gamma, reg_upper_gamma};

pub type StreamRng = ChaCha8Rng;

/// Address of an independent random stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    master_seed: u64,
    path: Vec<u64>,
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: Vec::new(),
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[u64] {
        &self.path
    }

    /// Child stream with `index` appended to the path.
    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    fn key(&self) -> [u8; 32] {
        let mut state = self.master_seed;
        let mut h = splitmix64(&mut state);
        for (depth, &p) in self.path.iter().enumerate() {
            let mut s = h ^ p.wrapping_mul(0xD6E8_FEB8_6659_FD93) ^ (depth as u64 + 1).rotate_left(32);
            h = splitmix64(&mut s);
        }
        let mut key = [0u8; 32];
        let mut s = h;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
        }
        key
    }

    pub fn rng(&self) -> StreamRng {
        ChaCha8Rng::from_seed(self.key())
    }
}

/// Default cumulative thresholds for the discretized Likert marginal:
/// six ordered categories with most mass on the lowest.
pub const DEFAULT_LIKERT_THRESHOLDS: [f64; 5] = [0.45, 0.75, 0.90, 0.97, 0.99];

/// Marginal distribution of one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalSpec {
    StandardNormal,
    /// Unit-rate exponential (skewness 2, kurtosis 9).
    Exponential,
    ChiSquare { df: f64 },
    /// Uniform on (0, 1).
    Uniform,
    /// Ordered categories 1..=K+1 cut at cumulative probabilities
    /// `thresholds` (strictly increasing, inside (0, 1)).
    DiscretizedLikert { thresholds: Vec<f64> },
}

impl MarginalSpec {
    pub fn likert_default() -> Self {
        MarginalSpec::DiscretizedLikert {
            thresholds: DEFAULT_LIKERT_THRESHOLDS.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MarginalSpec::ChiSquare { df } if !(*df >= 1.0 && df.is_finite()) => {
                Err(Error::input(format!("chi-square needs df >= 1, got {df}")))
            }
            MarginalSpec::DiscretizedLikert { thresholds } => {
                if thresholds.is_empty() {
                    return Err(Error::input("likert marginal needs at least one threshold"));
                }
                if thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
                    return Err(Error::input("likert thresholds must lie strictly inside (0, 1)"));
                }
                if thresholds.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::input("likert thresholds must be strictly increasing"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn is_standard_normal(&self) -> bool {
        matches!(self, MarginalSpec::StandardNormal)
    }

    pub fn is_continuous(&self) -> bool {
        !matches!(self, MarginalSpec::DiscretizedLikert { .. })
    }

    /// Population skewness and kurtosis of the marginal.
    pub fn shape_moments(&self) -> (f64, f64) {
        match self {
            MarginalSpec::StandardNormal => (0.0, 3.0),
            MarginalSpec::Exponential => (2.0, 9.0),
            MarginalSpec::ChiSquare { df } => ((8.0 / df).sqrt(), 3.0 + 12.0 / df),
            MarginalSpec::Uniform => (0.0, 1.8),
            MarginalSpec::DiscretizedLikert { thresholds } => {
                let mut probs = Vec::with_capacity(thresholds.len() + 1);
                let mut prev = 0.0;
                for &t in thresholds.iter().chain(std::iter::once(&1.0)) {
                    probs.push(t - prev);
                    prev = t;
                }
                let mean: f64 = probs.iter().enumerate().map(|(k, p)| (k + 1) as f64 * p).sum();
                let central = |e: i32| -> f64 {
                    probs
                        .iter()
                        .enumerate()
                        .map(|(k, p)| p * ((k + 1) as f64 - mean).powi(e))
                        .sum()
                };
                let m2 = central(2);
                (central(3) / m2.powf(1.5), central(4) / (m2 * m2))
            }
        }
    }
}

impl fmt::Display for MarginalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MarginalSpec::StandardNormal => f.write_str("normal"),
            MarginalSpec::Exponential => f.write_str("exponential"),
            MarginalSpec::ChiSquare { df } => write!(f, "chi2:{df}"),
            MarginalSpec::Uniform => f.write_str("uniform"),
            MarginalSpec::DiscretizedLikert { thresholds } => {
                let t: Vec<String> = thresholds.iter().map(|v| v.to_string()).collect();
                write!(f, "likert:{}", t.join(","))
            }
        }
    }
}

impl FromStr for MarginalSpec {
    type Err = Error;

    /// `normal`, `exponential`, `uniform`, `chi2:<df>`, `likert` or
    /// `likert:<t1>,<t2>,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let spec = match (head.trim().to_ascii_lowercase().as_str(), arg) {
            ("normal" | "standard_normal", None) => MarginalSpec::StandardNormal,
            ("exponential" | "exp", None) => MarginalSpec::Exponential,
            ("uniform", None) => MarginalSpec::Uniform,
            ("chi2" | "chi_square", Some(df)) => MarginalSpec::ChiSquare {
                df: df
                    .trim()
                    .parse()
                    .map_err(|_| Error::input(format!("bad chi-square df `{df}`")))?,
            },
            ("likert", None) => MarginalSpec::likert_default(),
            ("likert", Some(list)) => MarginalSpec::DiscretizedLikert {
                thresholds: list
                    .split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|_| Error::input(format!("bad threshold `{t}`"))))
                    .collect::<Result<_>>()?,
            },
            _ => return Err(Error::input(format!("unknown marginal `{s}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Inverse CDF of a marginal at probability `u`.
pub fn quantile(m: &MarginalSpec, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("quantile needs 0 < u < 1, got {u}")));
    }
    m.validate()?;
    match m {
        MarginalSpec::StandardNormal => norm_ppf(u),
        MarginalSpec::Exponential => Ok(-(-u).ln_1p()),
        MarginalSpec::ChiSquare { df } => chi_square_quantile(*df, u, 1.0 - u),
        MarginalSpec::Uniform => Ok(u),
        MarginalSpec::DiscretizedLikert { thresholds } => {
            Ok(1.0 + thresholds.iter().filter(|&&t| u > t).count() as f64)
        }
    }
}

fn chi_square_ln_pdf(df: f64, x: f64) -> f64 {
    let a = df / 2.0;
    (a - 1.0) * x.ln() - x / 2.0 - a * 2f64.ln() - ln_gamma(a)
}

/// Chi-square quantile by safeguarded Newton iteration on the regularized
/// incomplete gamma. `lower` and `upper` are the two tail probabilities;
/// whichever is smaller drives the iteration so extreme tails keep their
/// precision.
fn chi_square_quantile(df: f64, lower: f64, upper: f64) -> Result<f64> {
    let a = df / 2.0;
    let use_upper = upper < lower;
    let residual = |x: f64| -> Result<f64> {
        // positive when x is too large
        if use_upper {
            Ok(upper - reg_upper_gamma(a, x / 2.0)?)
        } else {
            Ok(reg_lower_gamma(a, x / 2.0)? - lower)
        }
    };
    let z = if use_upper { -norm_ppf(upper)? } else { norm_ppf(lower)? };
    let wh = 2.0 / (9.0 * df);
    let base = 1.0 - wh + z * wh.sqrt();
    let mut x = df * base.powi(3);
    if base <= 0.0 || (lower < 0.05 && df < 10.0) {
        // small-x series: P(a, x/2) ≈ (x/2)^a / Γ(a + 1)
        x = 2.0 * ((lower.ln() + ln_gamma(a + 1.0)) / a).exp();
    }
    let mut x = x.max(1e-300);
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for _ in 0..300 {
        let f = residual(x)?;
        if f == 0.0 {
            return Ok(x);
        }
        if f > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        let step = f / chi_square_ln_pdf(df, x).exp();
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() { 0.5 * (lo + hi) } else { 4.0 * x.max(lo) };
        }
        if (next - x).abs() <= 1e-14 * x.abs() {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::numeric(format!(
        "chi-square quantile did not converge (df = {df}, p = {lower})"
    )))
}

/// Latent-normal-to-marginal map z ↦ Q(Φ(z)).
#[derive(Debug, Clone)]
pub(crate) enum LatentTransform {
    Identity,
    Uniform,
    Exponential,
    ChiSquare(Box<HermiteTable>),
    Likert { cuts: Vec<f64> },
}

/// Cubic Hermite interpolant of the chi-square latent map on [−Z, Z];
/// outside that range the exact quantile is used.
#[derive(Debug, Clone)]
pub(crate) struct HermiteTable {
    df: f64,
    z_max: f64,
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

const TABLE_Z_MAX: f64 = 8.0;
const TABLE_NODES: usize = 16_385;

fn chi_square_from_latent(df: f64, z: f64) -> Result<f64> {
    chi_square_quantile(df, norm_cdf(z), norm_sf(z))
}

impl HermiteTable {
    fn new(df: f64) -> Result<Self> {
        let h = 2.0 * TABLE_Z_MAX / (TABLE_NODES - 1) as f64;
        let mut values = Vec::with_capacity(TABLE_NODES);
        let mut slopes = Vec::with_capacity(TABLE_NODES);
        for i in 0..TABLE_NODES {
            let z = -TABLE_Z_MAX + i as f64 * h;
            let x = chi_square_from_latent(df, z)?;
            values.push(x);
            // d/dz Q(Φ(z)) = φ(z) / f(Q(Φ(z)))
            slopes.push(norm_pdf(z) / chi_square_ln_pdf(df, x).exp());
        }
        Ok(Self {
            df,
            z_max: TABLE_Z_MAX,
            h,
            values,
            slopes,
        })
    }

    fn eval(&self, z: f64) -> f64 {
        if !(z > -self.z_max && z < self.z_max) {
            return chi_square_from_latent(self.df, z).unwrap_or(if z > 0.0 { f64::MAX } else { 0.0 });
        }
        let s = (z + self.z_max) / self.h;
        let i = (s.floor() as usize).min(self.values.len() - 2);
        let t = s - i as f64;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        (h00 * self.values[i] + h10 * self.h * self.slopes[i] + h01 * self.values[i + 1]
            + h11 * self.h * self.slopes[i + 1])
            .max(0.0)
    }
}

impl LatentTransform {
    pub(crate) fn new(m: &MarginalSpec) -> Result<Self> {
        m.validate()?;
        Ok(match m {
            MarginalSpec::StandardNormal => LatentTransform::Identity,
            MarginalSpec::Uniform => LatentTransform::Uniform,
            MarginalSpec::Exponential => LatentTransform::Exponential,
            MarginalSpec::ChiSquare { df } => LatentTransform::ChiSquare(Box::new(HermiteTable::new(*df)?)),
            MarginalSpec::DiscretizedLikert { thresholds } => LatentTransform::Likert {
                cuts: thresholds.iter().map(|&t| norm_ppf(t)).collect::<Result<_>>()?,
            },
        })
    }

    #[inline]
    pub(crate) fn apply(&self, z: f64) -> f64 {
        match self {
            LatentTransform::Identity => z,
            LatentTransform::Uniform => norm_cdf(z),
            // −ln(1 − Φ(z)) through the upper tail
            LatentTransform::Exponential => -norm_sf(z).ln(),
            LatentTransform::ChiSquare(table) => table.eval(z),
            LatentTransform::Likert { cuts } => 1.0 + cuts.iter().filter(|&&c| z > c).count() as f64,
        }
    }

    fn is_identity(&self) -> bool {
        matches!(self, LatentTransform::Identity)
    }
}

/// Draws `n` latent bivariate normal pairs with correlation `rho`:
/// x = z₁, y = ρ z₁ + √(1 − ρ²) z₂, drawn in the order z₁, z₂ per pair.
pub(crate) fn fill_bivariate_normal(rho: f64, n: usize, rng: &mut StreamRng, xs: &mut Vec<f64>, ys: &mut Vec<f64>) {
    xs.clear();
    ys.clear();
    let c = (1.0 - rho * rho).max(0.0).sqrt();
    for _ in 0..n {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        xs.push(z1);
        ys.push(rho * z1 + c * z2);
    }
}

fn check_corr(rho: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::domain(format!("correlation must lie in [-1, 1], got {rho}")));
    }
    Ok(())
}

/// Bivariate standard normal sample with correlation `rho`.
pub fn sample_bivariate_normal(rho: f64, n: usize, stream: &RngStream) -> Result<PairedSample> {
    check_corr(rho)?;
    let mut rng = stream.rng();
    let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
    fill_bivariate_normal(rho, n, &mut rng, &mut xs, &mut ys);
    PairedSample::new(xs, ys)
}

/// A pair of marginals joined by a Gaussian copula, with its calibrated
/// latent correlation and population coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationSpec {
    pub marginal_x: MarginalSpec,
    pub marginal_y: MarginalSpec,
    pub target_rp: f64,
    pub latent_rho: f64,
    pub calibrated_rp: f64,
    pub calibrated_rs: f64,
    pub calibrated_rt: f64,
    /// Calibration sample size; 0 when the values are analytic.
    pub calibration_n: usize,
}

impl PopulationSpec {
    /// Bivariate normal population; population coefficients are analytic.
    pub fn normal(rho: f64) -> Result<Self> {
        check_corr(rho)?;
        Ok(Self {
            marginal_x: MarginalSpec::StandardNormal,
            marginal_y: MarginalSpec::StandardNormal,
            target_rp: rho,
            latent_rho: rho,
            calibrated_rp: rho,
            calibrated_rs: rs_from_rp(rho)?,
            calibrated_rt: rt_from_rp(rho)?,
            calibration_n: 0,
        })
    }

    pub fn is_normal(&self) -> bool {
        self.marginal_x.is_standard_normal() && self.marginal_y.is_standard_normal()
    }

    pub fn validate(&self) -> Result<()> {
        self.marginal_x.validate()?;
        self.marginal_y.validate()?;
        check_corr(self.latent_rho)?;
        check_corr(self.target_rp)
    }

    pub fn sampler(&self) -> Result<PopulationSampler> {
        self.validate()?;
        Ok(PopulationSampler {
            latent_rho: self.latent_rho,
            tx: LatentTransform::new(&self.marginal_x)?,
            ty: LatentTransform::new(&self.marginal_y)?,
        })
    }
}

/// Reusable sampler for a population; holds the precomputed marginal maps.
#[derive(Debug, Clone)]
pub struct PopulationSampler {
    latent_rho: f64,
    tx: LatentTransform,
    ty: LatentTransform,
}

impl PopulationSampler {
    /// Fills `xs`, `ys` with `n` pairs drawn from `rng`.
    pub fn fill(&self, n: usize, rng: &mut StreamRng, xs: &mut Vec<f64>, ys: &mut Vec<f64>) {
        fill_bivariate_normal(self.latent_rho, n, rng, xs, ys);
        if !self.tx.is_identity() {
            xs.iter_mut().for_each(|v| *v = self.tx.apply(*v));
        }
        if !self.ty.is_identity() {
            ys.iter_mut().for_each(|v| *v = self.ty.apply(*v));
        }
    }

    pub fn sample(&self, n: usize, stream: &RngStream) -> Result<PairedSample> {
        let mut rng = stream.rng();
        let (mut xs, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n));
        self.fill(n, &mut rng, &mut xs, &mut ys);
        PairedSample::new(xs, ys)
    }
}

pub fn sample_population(spec: &PopulationSpec, n: usize, stream: &RngStream) -> Result<PairedSample> {
    spec.sampler()?.sample(n, stream)
}

/// Calibration sample size matching the large-sample population convention.
pub const DEFAULT_CALIBRATION_N: usize = 10_000_000;
/// Reduced calibration size for quick runs.
pub const DESK_CALIBRATION_N: usize = 1_000_000;

/// Absolute tolerance on the calibration-sample r_p.
pub const CALIBRATION_TOL: f64 = 1e-7;
const CALIBRATION_MAX_ITER: usize = 100;

/// Finds the latent correlation whose transformed calibration sample has
/// Pearson r equal to `target_rp`.
///
/// One latent sample (z₁, z₂) is drawn and reused for every trial ρ, so the
/// calibrated r_p is a deterministic, nondecreasing function of ρ and plain
/// bisection applies.
pub fn calibrate_copula(
    marginal_x: MarginalSpec,
    marginal_y: MarginalSpec,
    target_rp: f64,
    calibration_n: usize,
    stream: &RngStream,
) -> Result<PopulationSpec> {
    check_corr(target_rp)?;
    if calibration_n < 3 {
        return Err(Error::input("calibration sample needs at least 3 pairs"));
    }
    let calib = CopulaCalibrator::new(&marginal_x, &marginal_y, calibration_n, stream)?;

    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let (f_lo, f_hi) = (calib.pearson_at(lo)?, calib.pearson_at(hi)?);
    if target_rp < f_lo - CALIBRATION_TOL || target_rp > f_hi + CALIBRATION_TOL {
        return Err(Error::Infeasible(format!(
            "target R_p = {target_rp} unattainable for {marginal_x} x {marginal_y}; attainable range [{f_lo:.4}, {f_hi:.4}]"
        )));
    }
    let mut rho = 0.0;
    let mut r = f64::NAN;
    for _ in 0..CALIBRATION_MAX_ITER {
        rho = 0.5 * (lo + hi);
        r = calib.pearson_at(rho)?;
        if (r - target_rp).abs() <= CALIBRATION_TOL {
            break;
        }
        if r < target_rp {
            lo = rho;
        } else {
            hi = rho;
        }
    }
    if !((r - target_rp).abs() <= 1e-3) {
        return Err(Error::numeric(format!(
            "copula calibration stalled at r_p = {r} for target {target_rp}"
        )));
    }
    let ys = calib.transformed_y(rho);
    Ok(PopulationSpec {
        marginal_x,
        marginal_y,
        target_rp,
        latent_rho: rho,
        calibrated_rp: r,
        calibrated_rs: spearman_slices(&calib.tx, &ys)?,
        calibrated_rt: kendall_slices(&calib.tx, &ys, KendallVariant::TauB)?,
        calibration_n,
    })
}

struct CopulaCalibrator {
    z1: Vec<f64>,
    z2: Vec<f64>,
    tx: Vec<f64>,
    ty: LatentTransform,
}

impl CopulaCalibrator {
    fn new(mx: &MarginalSpec, my: &MarginalSpec, n: usize, stream: &RngStream) -> Result<Self> {
        let mut rng = stream.rng();
        let (mut z1, mut z2) = (Vec::with_capacity(n), Vec::with_capacity(n));
        fill_bivariate_normal(0.0, n, &mut rng, &mut z1, &mut z2);
        let tx_map = LatentTransform::new(mx)?;
        let tx = z1.iter().map(|&z| tx_map.apply(z)).collect();
        Ok(Self {
            z1,
            z2,
            tx,
            ty: LatentTransform::new(my)?,
        })
    }

    fn transformed_y(&self, rho: f64) -> Vec<f64> {
        let c = (1.0 - rho * rho).max(0.0).sqrt();
        self.z1
            .iter()
            .zip(&self.z2)
            .map(|(&a, &b)| self.ty.apply(rho * a + c * b))
            .collect()
    }

    fn pearson_at(&self, rho: f64) -> Result<f64> {
        pearson_slices(&self.tx, &self.transformed_y(rho))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::moments;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = RngStream::new(42).child(3).child(7);
        let a: Vec<u64> = (0..5).map({
            let mut r = s.rng();
            move |_| r.gen()
        }).collect();
        let b: Vec<u64> = (0..5).map({
            let mut r = RngStream::new(42).child(3).child(7).rng();
            move |_| r.gen()
        }).collect();
        assert_eq!(a, b);
        let c: u64 = RngStream::new(42).child(7).child(3).rng().gen();
        assert_ne!(a[0], c);
        let d: u64 = RngStream::new(43).child(3).child(7).rng().gen();
        assert_ne!(a[0], d);
        // a child path is not the same stream as its parent
        let p: u64 = RngStream::new(42).child(3).rng().gen();
        assert_ne!(p, RngStream::new(42).child(3).child(0).rng().gen::<u64>());
    }

    #[test]
    fn sibling_streams_are_uncorrelated() {
        let root = RngStream::new(2024);
        let n = 100_000;
        let a = sample_bivariate_normal(0.0, n / 2, &root.child(0)).unwrap();
        let b = sample_bivariate_normal(0.0, n / 2, &root.child(1)).unwrap();
        let xa: Vec<f64> = a.x().iter().chain(a.y()).copied().collect();
        let xb: Vec<f64> = b.x().iter().chain(b.y()).copied().collect();
        assert!(pearson_slices(&xa, &xb).unwrap().abs() < 0.01);
    }

    #[test]
    fn bivariate_normal_rho_one_copies_x() {
        let s = sample_bivariate_normal(1.0, 100, &RngStream::new(1)).unwrap();
        assert_eq!(s.x(), s.y());
        assert!(sample_bivariate_normal(1.5, 10, &RngStream::new(1)).is_err());
    }

    #[test]
    fn bivariate_normal_large_sample() {
        let s = sample_bivariate_normal(0.0, 1_000_000, &RngStream::new(5)).unwrap();
        assert!(pearson_slices(s.x(), s.y()).unwrap().abs() < 0.004);
        let m = moments(s.x());
        assert!(m.mean.abs() < 4.0 / 1000.0);
        assert!((m.kurtosis - 3.0).abs() < 0.05);
        assert!(m.skewness.abs() < 0.01);
    }

    #[test]
    fn quantile_closed_forms() {
        let u = 1.0 - (-1f64).exp();
        assert!((quantile(&MarginalSpec::Exponential, u).unwrap() - 1.0).abs() < 1e-15);
        for &u in &[1e-9, 0.01, 0.3, 0.5, 0.9, 0.999_999] {
            let chi2 = quantile(&MarginalSpec::ChiSquare { df: 2.0 }, u).unwrap();
            let exp = quantile(&MarginalSpec::Exponential, u).unwrap();
            assert!(((chi2 - 2.0 * exp) / (2.0 * exp)).abs() < 1e-12, "u={u}");
        }
        assert!(quantile(&MarginalSpec::Exponential, 0.0).is_err());
        assert!(quantile(&MarginalSpec::Exponential, 1.0).is_err());
    }

    #[test]
    fn chi_square_quantile_round_trips() {
        let x = quantile(&MarginalSpec::ChiSquare { df: 5.0 }, 0.5).unwrap();
        assert!((reg_lower_gamma(2.5, x / 2.0).unwrap() - 0.5).abs() < 1e-10);
        for &df in &[1.0, 3.0, 32.0, 150.0] {
            for &u in &[1e-12, 1e-4, 0.2, 0.7, 0.9999] {
                let x = quantile(&MarginalSpec::ChiSquare { df }, u).unwrap();
                let p = reg_lower_gamma(df / 2.0, x / 2.0).unwrap();
                assert!(((p - u) / u).abs() < 1e-9, "df={df} u={u} p={p}");
            }
        }
    }

    #[test]
    fn hermite_table_tracks_exact_map() {
        for &df in &[1.0, 4.0, 32.0] {
            let t = LatentTransform::new(&MarginalSpec::ChiSquare { df }).unwrap();
            for k in 0..200 {
                let z = -7.9 + k as f64 * 0.0791;
                let exact = chi_square_from_latent(df, z).unwrap();
                let approx = t.apply(z);
                assert!(((approx - exact) / exact).abs() < 1e-7, "df={df} z={z}: {approx} vs {exact}");
            }
        }
    }

    #[test]
    fn likert_quantile_and_moments() {
        let m = MarginalSpec::likert_default();
        assert_eq!(quantile(&m, 0.1).unwrap(), 1.0);
        assert_eq!(quantile(&m, 0.5).unwrap(), 2.0);
        assert_eq!(quantile(&m, 0.995).unwrap(), 6.0);
        let (skew, kurt) = m.shape_moments();
        assert!(skew > 1.0 && kurt > 3.0);
        assert!("likert:0.5,0.4".parse::<MarginalSpec>().is_err());
        assert!("chi2:0.5".parse::<MarginalSpec>().is_err());
        assert_eq!("chi2:32".parse::<MarginalSpec>().unwrap(), MarginalSpec::ChiSquare { df: 32.0 });
    }

    #[test]
    fn normal_population_reduces_to_bivariate_normal() {
        let spec = PopulationSpec::normal(0.3).unwrap();
        let stream = RngStream::new(9).child(1);
        assert_eq!(
            sample_population(&spec, 500, &stream).unwrap(),
            sample_bivariate_normal(0.3, 500, &stream).unwrap()
        );
    }

    #[test]
    fn calibration_normal_marginals() {
        let spec = calibrate_copula(
            MarginalSpec::StandardNormal,
            MarginalSpec::StandardNormal,
            0.4,
            1_000_000,
            &RngStream::new(11),
        )
        .unwrap();
        assert!((spec.latent_rho - 0.4).abs() < 2e-3);
        assert!((spec.calibrated_rp - 0.4).abs() <= 1e-3);
    }

    #[test]
    fn calibration_exponential_marginals() {
        let stream = RngStream::new(12);
        let n = DEFAULT_CALIBRATION_N;
        let spec = calibrate_copula(MarginalSpec::Exponential, MarginalSpec::Exponential, 0.4, n, &stream).unwrap();
        assert!((spec.calibrated_rp - 0.4).abs() <= 1e-3);
        assert!(spec.latent_rho > 0.4);
        // the calibration sample is the stream's first draw
        let calib = CopulaCalibrator::new(&spec.marginal_x, &spec.marginal_y, n, &stream).unwrap();
        for col in [calib.tx.clone(), calib.transformed_y(spec.latent_rho)] {
            let m = moments(&col);
            assert!((m.skewness - 2.0).abs() < 0.01, "skew {}", m.skewness);
            assert!((m.kurtosis - 9.0).abs() < 0.2, "kurt {}", m.kurtosis);
        }
        // large independent sample agrees with the calibrated value
        let s = sample_population(&spec, 1_000_000, &RngStream::new(99)).unwrap();
        assert!((pearson_slices(s.x(), s.y()).unwrap() - spec.calibrated_rp).abs() < 0.005);
    }

    #[test]
    fn calibration_chi_square_32() {
        let stream = RngStream::new(13);
        let m = MarginalSpec::ChiSquare { df: 32.0 };
        let spec = calibrate_copula(m.clone(), m, 0.4, 1_000_000, &stream).unwrap();
        let calib = CopulaCalibrator::new(&spec.marginal_x, &spec.marginal_y, 1_000_000, &stream).unwrap();
        let mm = moments(&calib.transformed_y(spec.latent_rho));
        assert!((mm.skewness - 0.50).abs() < 0.02);
        assert!((mm.kurtosis - 3.38).abs() < 0.1);
    }

    #[test]
    fn calibration_rejects_unattainable_target() {
        let err = calibrate_copula(MarginalSpec::Exponential, MarginalSpec::Exponential, -0.8, 100_000, &RngStream::new(1));
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }

    #[test]
    fn calibrated_rp_nondecreasing_in_latent_rho() {
        let c = CopulaCalibrator::new(&MarginalSpec::Exponential, &MarginalSpec::ChiSquare { df: 3.0 }, 20_000, &RngStream::new(3)).unwrap();
        let mut prev = -1.0;
        for k in 0..=40 {
            let r = c.pearson_at(-1.0 + k as f64 * 0.05).unwrap();
            assert!(r >= prev - 1e-12);
            prev = r;
        }
    }

    #[test]
    fn spearman_invariant_to_marginal_choice() {
        // Same latent draws through different increasing marginals give the same ranks.
        let stream = RngStream::new(77);
        let mut a = PopulationSpec::normal(0.5).unwrap();
        a.marginal_x = MarginalSpec::Exponential;
        let mut b = a.clone();
        b.marginal_x = MarginalSpec::ChiSquare { df: 7.0 };
        let sa = sample_population(&a, 2_000, &stream).unwrap();
        let sb = sample_population(&b, 2_000, &stream).unwrap();
        let ra = spearman_slices(sa.x(), sa.y()).unwrap();
        let rb = spearman_slices(sb.x(), sb.y()).unwrap();
        assert!((ra - rb).abs() < 1e-12);
    }

    #[test]
    fn population_spec_round_trips_through_toml() {
        let spec = calibrate_copula(MarginalSpec::Exponential, MarginalSpec::likert_default(), 0.3, 50_000, &RngStream::new(4)).unwrap();
        let text = toml::to_string(&spec).unwrap();
        let back: PopulationSpec = toml::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }
}
