//! Monte Carlo sampling distributions of correlation coefficients.
//!
//! A plan sweeps sample sizes for one population. Each (n, replication) draws
//! from its own stream `root.child(cell).child(replication)`, so results do
//! not depend on thread count or scheduling. Summaries are reduced in
//! replication order.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corr::{estimate_slices, CorrelationKind};
use crate::error::{Error, Result};
use crate::exact::{rs_from_rp, rt_from_rp};
use crate::randgen::{PopulationSpec, RngStream};
use crate::stats::{percentile_sorted, sample_sd};
use crate::sum::NeumaierSum;

/// Replications per cell at desk scale.
pub const DESK_REPLICATIONS: usize = 20_000;
/// Replications per cell at the full published scale.
pub const FULL_REPLICATIONS: usize = 100_000;
/// Draw attempts allowed per replication before a condition is declared infeasible.
pub const MAX_ATTEMPTS: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    /// Label written to the `condition` column.
    pub condition: String,
    pub population: PopulationSpec,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub kinds: Vec<CorrelationKind>,
    pub master_seed: u64,
}

impl SimulationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.sample_sizes.is_empty() {
            return Err(Error::input("simulation plan needs at least one sample size"));
        }
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n < 2) {
            return Err(Error::input(format!("sample size {n} is below 2")));
        }
        if self.replications < 1 {
            return Err(Error::input("simulation plan needs at least one replication"));
        }
        if self.kinds.is_empty() {
            return Err(Error::input("simulation plan needs at least one coefficient kind"));
        }
        self.population.validate()
    }
}

/// Population value a coefficient is compared against.
///
/// Normal populations use the closed forms; others use the values measured
/// on the calibration sample.
pub fn population_value(pop: &PopulationSpec, kind: CorrelationKind) -> Result<f64> {
    if pop.is_normal() {
        return match kind {
            CorrelationKind::Pearson => Ok(pop.latent_rho),
            CorrelationKind::Spearman => rs_from_rp(pop.latent_rho),
            CorrelationKind::Kendall => rt_from_rp(pop.latent_rho),
        };
    }
    Ok(match kind {
        CorrelationKind::Pearson => pop.calibrated_rp,
        CorrelationKind::Spearman => pop.calibrated_rs,
        CorrelationKind::Kendall => pop.calibrated_rt,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub n: usize,
    pub kind: CorrelationKind,
    pub mean: f64,
    /// Standard deviation over replications; absent for a single replication.
    pub sd: Option<f64>,
    pub p5: f64,
    pub p95: f64,
    pub bias: f64,
    pub rmse: f64,
    pub population_value: f64,
}

impl SummaryStats {
    pub fn from_values(n: usize, kind: CorrelationKind, values: &[f64], population_value: f64) -> Self {
        let mean = crate::sum::mean(values);
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        let mut sq = NeumaierSum::new();
        for &v in values {
            sq.add((v - population_value) * (v - population_value));
        }
        Self {
            n,
            kind,
            mean,
            sd: sample_sd(values),
            p5: percentile_sorted(&sorted, 0.05),
            p95: percentile_sorted(&sorted, 0.95),
            bias: mean - population_value,
            rmse: (sq.value() / values.len() as f64).sqrt(),
            population_value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub n: usize,
    pub stats: Vec<SummaryStats>,
    /// Degenerate samples discarded and redrawn.
    pub redraw_count: usize,
    /// Raw coefficient values per kind, in replication order.
    #[serde(skip)]
    pub values: Vec<Vec<f64>>,
}

impl CellResult {
    pub fn get(&self, kind: CorrelationKind) -> Option<&SummaryStats> {
        self.stats.iter().find(|s| s.kind == kind)
    }
}

/// Simulates one sample size.
pub fn run_cell(plan: &SimulationPlan, n: usize, stream: &RngStream) -> Result<CellResult> {
    plan.validate()?;
    if n < 2 {
        return Err(Error::input(format!("sample size {n} is below 2")));
    }
    let sampler = plan.population.sampler()?;
    let kinds = &plan.kinds;

    let per_rep: Vec<(Vec<f64>, usize)> = (0..plan.replications)
        .into_par_iter()
        .map_init(
            || (Vec::with_capacity(n), Vec::with_capacity(n)),
            |(xs, ys), r| -> Result<(Vec<f64>, usize)> {
                let mut rng = stream.child(r as u64).rng();
                for attempt in 0..MAX_ATTEMPTS {
                    sampler.fill(n, &mut rng, xs, ys);
                    match kinds.iter().map(|&k| estimate_slices(k, xs, ys)).collect::<Result<Vec<_>>>() {
                        Ok(v) => return Ok((v, attempt)),
                        Err(Error::Degenerate { .. }) => continue,
                        Err(e) => return Err(e),
                    }
                }
                Err(Error::Infeasible(format!(
                    "{}: replication {r} at n = {n} stayed degenerate after {MAX_ATTEMPTS} draws",
                    plan.condition
                )))
            },
        )
        .collect::<Result<_>>()?;

    let redraw_count: usize = per_rep.iter().map(|(_, a)| a).sum();
    if redraw_count > plan.replications {
        return Err(Error::Infeasible(format!(
            "{}: {redraw_count} degenerate redraws for {} replications at n = {n}",
            plan.condition, plan.replications
        )));
    }
    let mut values = vec![Vec::with_capacity(plan.replications); kinds.len()];
    for (v, _) in &per_rep {
        for (k, &x) in v.iter().enumerate() {
            values[k].push(x);
        }
    }
    let stats = kinds
        .iter()
        .zip(&values)
        .map(|(&kind, vals)| Ok(SummaryStats::from_values(n, kind, vals, population_value(&plan.population, kind)?)))
        .collect::<Result<_>>()?;
    Ok(CellResult {
        n,
        stats,
        redraw_count,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTable {
    pub condition: String,
    pub cells: Vec<CellResult>,
}

pub const SIMULATION_CSV_HEADER: &str = "condition,kind,n,mean,sd,p5,p95,bias,rmse,redraw_count";
pub const RATIO_CSV_HEADER: &str = "condition,kind,n,sd_ratio_vs_pearson,rmse_ratio_vs_pearson";

impl SimulationTable {
    pub fn cell(&self, n: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.n == n)
    }

    /// sd(numerator) / sd(denominator) at sample size `n`.
    pub fn sd_ratio(&self, n: usize, numerator: CorrelationKind, denominator: CorrelationKind) -> Option<f64> {
        let c = self.cell(n)?;
        Some(c.get(numerator)?.sd? / c.get(denominator)?.sd?)
    }

    /// Long-format rows: one per (n, kind).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{SIMULATION_CSV_HEADER}")?;
        for cell in &self.cells {
            for s in &cell.stats {
                let sd = s.sd.map(|v| v.to_string()).unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{}",
                    self.condition, s.kind, s.n, s.mean, sd, s.p5, s.p95, s.bias, s.rmse, cell.redraw_count
                )?;
            }
        }
        Ok(())
    }

    /// Ratios of every non-Pearson kind against Pearson, per n.
    pub fn write_ratio_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{RATIO_CSV_HEADER}")?;
        for cell in &self.cells {
            let Some(p) = cell.get(CorrelationKind::Pearson) else { continue };
            for s in cell.stats.iter().filter(|s| s.kind != CorrelationKind::Pearson) {
                let sd = match (s.sd, p.sd) {
                    (Some(a), Some(b)) => (a / b).to_string(),
                    _ => String::new(),
                };
                writeln!(w, "{},{},{},{},{}", self.condition, s.kind, s.n, sd, s.rmse / p.rmse)?;
            }
        }
        Ok(())
    }
}

/// Runs every sample size of the plan; cell i uses stream path (i).
pub fn run_plan(plan: &SimulationPlan) -> Result<SimulationTable> {
    plan.validate()?;
    let root = RngStream::new(plan.master_seed);
    let cells = plan
        .sample_sizes
        .iter()
        .enumerate()
        .map(|(i, &n)| run_cell(plan, n, &root.child(i as u64)))
        .collect::<Result<_>>()?;
    Ok(SimulationTable {
        condition: plan.condition.clone(),
        cells,
    })
}

/// `k` integer sample sizes spaced evenly in log between `lo` and `hi`.
///
/// Values are rounded to nearest; collisions after rounding are pushed
/// upward (and then capped from the top) so the result is strictly
/// increasing with exact endpoints.
pub fn logspace_sizes(lo: usize, hi: usize, k: usize) -> Result<Vec<usize>> {
    if lo < 2 || lo >= hi {
        return Err(Error::input(format!("logspace needs 2 <= lo < hi, got lo = {lo}, hi = {hi}")));
    }
    if k < 2 {
        return Err(Error::input("logspace needs at least 2 points"));
    }
    if k > hi - lo + 1 {
        return Err(Error::input(format!("cannot place {k} distinct integers in [{lo}, {hi}]")));
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut sizes: Vec<usize> = (0..k)
        .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp().round() as usize)
        .collect();
    sizes[0] = lo;
    sizes[k - 1] = hi;
    for i in 1..k {
        if sizes[i] <= sizes[i - 1] {
            sizes[i] = sizes[i - 1] + 1;
        }
    }
    for i in (0..k - 1).rev() {
        let cap = hi - (k - 1 - i);
        if sizes[i] > cap {
            sizes[i] = cap;
        }
    }
    Ok(sizes)
}

/// Histogram of simulated r_p and r_s for a bivariate normal population,
/// with bins of width `bin_width` covering [−1, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingHistogram {
    pub edges: Vec<f64>,
    pub pearson_counts: Vec<u64>,
    pub spearman_counts: Vec<u64>,
    pub draws: usize,
}

pub fn sampling_histogram(rho: f64, n: usize, draws: usize, bin_width: f64, stream: &RngStream) -> Result<SamplingHistogram> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(Error::input(format!("bin width must lie in (0, 1], got {bin_width}")));
    }
    let plan = SimulationPlan {
        condition: "histogram".into(),
        population: PopulationSpec::normal(rho)?,
        sample_sizes: vec![n],
        replications: draws,
        kinds: vec![CorrelationKind::Pearson, CorrelationKind::Spearman],
        master_seed: stream.master_seed(),
    };
    let cell = run_cell(&plan, n, stream)?;
    let bins = (2.0 / bin_width).round() as usize;
    let edges: Vec<f64> = (0..=bins).map(|i| -1.0 + i as f64 * 2.0 / bins as f64).collect();
    let count = |vals: &[f64]| {
        let mut c = vec![0u64; bins];
        for &v in vals {
            let i = (((v + 1.0) / 2.0 * bins as f64).floor() as usize).min(bins - 1);
            c[i] += 1;
        }
        c
    };
    Ok(SamplingHistogram {
        pearson_counts: count(&cell.values[0]),
        spearman_counts: count(&cell.values[1]),
        edges,
        draws,
    })
}
