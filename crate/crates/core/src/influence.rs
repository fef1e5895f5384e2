//! Outlier sensitivity maps: the change in r_p and r_s when one point is
//! appended to a sample at every location of a square grid.
//!
//! Ranks of the augmented sample are updated incrementally: appending a
//! value `a` raises the fractional rank of every base value above `a` by
//! one and of every value equal to `a` by one half.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corr::{fractional_rank_unchecked, pearson_slices, spearman_from_ranks, spearman_slices, PairedSample};
use crate::error::{Error, Result};

/// Evenly spaced coordinates lo, lo + step, ..., hi.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for AxisSpec {
    fn default() -> Self {
        Self {
            lo: -5.0,
            hi: 5.0,
            step: 0.05,
        }
    }
}

impl AxisSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) || !(self.hi > self.lo) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::input(format!(
                "axis needs lo < hi and step > 0, got ({}, {}, {})",
                self.lo, self.hi, self.step
            )));
        }
        let k = ((self.hi - self.lo) / self.step).round() as usize;
        if k > 100_000 {
            return Err(Error::input("axis has more than 100000 points"));
        }
        Ok((0..=k).map(|i| self.lo + i as f64 * self.step).collect())
    }
}

/// Signed coefficient changes over the grid. Cells are stored row-major
/// with the x coordinate as the outer index; `None` marks a grid point whose
/// augmented sample was degenerate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceGrid {
    pub axis: Vec<f64>,
    pub base_rp: f64,
    pub base_rs: f64,
    pub delta_rp: Vec<Option<f64>>,
    pub delta_rs: Vec<Option<f64>>,
    /// Outliers already present in every augmented sample.
    pub fixed_points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta {
    Pearson,
    Spearman,
}

impl InfluenceGrid {
    pub fn side(&self) -> usize {
        self.axis.len()
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.axis.len() + iy
    }

    pub fn deltas(&self, which: Delta) -> &[Option<f64>] {
        match which {
            Delta::Pearson => &self.delta_rp,
            Delta::Spearman => &self.delta_rs,
        }
    }

    /// (min, max) over non-missing cells.
    pub fn range(&self, which: Delta) -> Option<(f64, f64)> {
        self.deltas(which).iter().flatten().fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
    }

    pub fn width(&self, which: Delta) -> f64 {
        self.range(which).map(|(lo, hi)| hi - lo).unwrap_or(0.0)
    }

    pub fn missing_cells(&self) -> usize {
        self.delta_rp.iter().filter(|v| v.is_none()).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "gx,gy,delta_rp,delta_rs")?;
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (ix, &gx) in self.axis.iter().enumerate() {
            for (iy, &gy) in self.axis.iter().enumerate() {
                let k = self.index(ix, iy);
                writeln!(w, "{gx},{gy},{},{}", fmt(self.delta_rp[k]), fmt(self.delta_rs[k]))?;
            }
        }
        Ok(())
    }

    pub fn summary(&self, thresholds: &[f64]) -> InfluenceSummary {
        let (rp_lo, rp_hi) = self.range(Delta::Pearson).unwrap_or((f64::NAN, f64::NAN));
        let (rs_lo, rs_hi) = self.range(Delta::Spearman).unwrap_or((f64::NAN, f64::NAN));
        InfluenceSummary {
            base_rp: self.base_rp,
            base_rs: self.base_rs,
            fixed_points: self.fixed_points.clone(),
            grid_side: self.side(),
            missing_cells: self.missing_cells(),
            delta_rp_min: rp_lo,
            delta_rp_max: rp_hi,
            delta_rs_min: rs_lo,
            delta_rs_max: rs_hi,
            rp_min: self.base_rp + rp_lo,
            rp_max: self.base_rp + rp_hi,
            rs_min: self.base_rs + rs_lo,
            rs_max: self.base_rs + rs_hi,
            exceedance: thresholds
                .iter()
                .map(|&t| Exceedance {
                    threshold: t,
                    rp_fraction: exceedance_fraction(self, Delta::Pearson, t),
                    rs_fraction: exceedance_fraction(self, Delta::Spearman, t),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exceedance {
    pub threshold: f64,
    pub rp_fraction: f64,
    pub rs_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfluenceSummary {
    pub base_rp: f64,
    pub base_rs: f64,
    pub fixed_points: Vec<(f64, f64)>,
    pub grid_side: usize,
    pub missing_cells: usize,
    pub delta_rp_min: f64,
    pub delta_rp_max: f64,
    pub delta_rs_min: f64,
    pub delta_rs_max: f64,
    pub rp_min: f64,
    pub rp_max: f64,
    pub rs_min: f64,
    pub rs_max: f64,
    pub exceedance: Vec<Exceedance>,
}

/// Ranks of `base` ∪ {a} for every `a` on the axis; the new point is last.
fn augmented_ranks(base: &[f64], axis: &[f64]) -> Vec<Vec<f64>> {
    let ranks = fractional_rank_unchecked(base).ranks;
    axis.iter()
        .map(|&a| {
            let mut below = 0.0;
            let mut equal = 0.0;
            let mut r: Vec<f64> = base
                .iter()
                .zip(&ranks)
                .map(|(&v, &rv)| {
                    if v < a {
                        below += 1.0;
                        rv
                    } else if v == a {
                        equal += 1.0;
                        rv + 0.5
                    } else {
                        rv + 1.0
                    }
                })
                .collect();
            r.push(below + 1.0 + equal / 2.0);
            r
        })
        .collect()
}

// Pearson of base ∪ {(a, b)} from base moments about the base means.
struct PearsonUpdater {
    n: f64,
    mx: f64,
    my: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl PearsonUpdater {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let mx = crate::sum::mean(x);
        let my = crate::sum::mean(y);
        let mut acc = [crate::sum::NeumaierSum::new(); 3];
        for (&a, &b) in x.iter().zip(y) {
            let (dx, dy) = (a - mx, b - my);
            acc[0].add(dx * dx);
            acc[1].add(dy * dy);
            acc[2].add(dx * dy);
        }
        Self {
            n: x.len() as f64,
            mx,
            my,
            sxx: acc[0].value(),
            syy: acc[1].value(),
            sxy: acc[2].value(),
        }
    }

    fn with_point(&self, a: f64, b: f64) -> Option<f64> {
        // adding d to a set with centered sums S: S' = S + d² n / (n + 1)
        let (dx, dy) = (a - self.mx, b - self.my);
        let w = self.n / (self.n + 1.0);
        let sxx = self.sxx + w * dx * dx;
        let syy = self.syy + w * dy * dy;
        let sxy = self.sxy + w * dx * dy;
        if sxx <= 0.0 || syy <= 0.0 {
            return None;
        }
        Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
    }
}

fn scan(sample: &PairedSample, reference: (f64, f64), axis: &AxisSpec, fixed: Vec<(f64, f64)>) -> Result<InfluenceGrid> {
    let pts = axis.points()?;
    let (x, y) = (sample.x(), sample.y());
    let rx = augmented_ranks(x, &pts);
    let ry = augmented_ranks(y, &pts);
    let pearson = PearsonUpdater::new(x, y);
    let side = pts.len();
    let mut delta_rp = Vec::with_capacity(side * side);
    let mut delta_rs = Vec::with_capacity(side * side);
    for (ix, &gx) in pts.iter().enumerate() {
        for (iy, &gy) in pts.iter().enumerate() {
            let rp = pearson.with_point(gx, gy);
            let rs = spearman_from_ranks(&rx[ix], &ry[iy]).ok();
            match (rp, rs) {
                (Some(p), Some(s)) => {
                    delta_rp.push(Some(p - reference.0));
                    delta_rs.push(Some(s - reference.1));
                }
                _ => {
                    delta_rp.push(None);
                    delta_rs.push(None);
                }
            }
        }
    }
    Ok(InfluenceGrid {
        axis: pts,
        base_rp: reference.0,
        base_rs: reference.1,
        delta_rp,
        delta_rs,
        fixed_points: fixed,
    })
}

fn base_values(base: &PairedSample) -> Result<(f64, f64)> {
    Ok((pearson_slices(base.x(), base.y())?, spearman_slices(base.x(), base.y())?))
}

/// Appends one point at every grid location and records the change in r_p
/// and r_s relative to the base sample.
pub fn scan_single(base: &PairedSample, axis: &AxisSpec) -> Result<InfluenceGrid> {
    let reference = base_values(base)?;
    scan(base, reference, axis, Vec::new())
}

/// As [`scan_single`] with `first_outlier` already appended; deltas are
/// still measured from the original base sample.
pub fn scan_double(base: &PairedSample, first_outlier: (f64, f64), axis: &AxisSpec) -> Result<InfluenceGrid> {
    let reference = base_values(base)?;
    let augmented = base.with_point(first_outlier.0, first_outlier.1)?;
    scan(&augmented, reference, axis, vec![first_outlier])
}

/// Fraction of non-missing cells whose |delta| exceeds `threshold`.
pub fn exceedance_fraction(grid: &InfluenceGrid, which: Delta, threshold: f64) -> f64 {
    let cells: Vec<f64> = grid.deltas(which).iter().flatten().copied().collect();
    if cells.is_empty() {
        return 0.0;
    }
    cells.iter().filter(|v| v.abs() > threshold).count() as f64 / cells.len() as f64
}
