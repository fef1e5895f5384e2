//! Eigenvalues of correlation matrices and their stability under resampling.

use std::io::Write;

use serde::Serialize;

use crate::corr::CorrelationKind;
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::resample::{replicate, PopulationDataset, StudyConfig};
use crate::sum::NeumaierSum;

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 100;
/// Stop once the off-diagonal norm falls below this fraction of its start.
pub const OFF_DIAGONAL_REL_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-8;

fn off_norm2(a: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += a[i * n + j] * a[i * n + j];
        }
    }
    2.0 * s
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, in
/// descending order.
pub fn symmetric_eigenvalues(m: &SquareMatrix) -> Result<Vec<f64>> {
    let n = m.dim();
    if !m.is_symmetric(SYMMETRY_TOL) {
        return Err(Error::input(format!("matrix is not symmetric within {SYMMETRY_TOL}")));
    }
    let mut a: Vec<f64> = (0..n).flat_map(|i| m.row(i).to_vec()).collect();
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("matrix has non-finite entries"));
    }
    let target = off_norm2(&a, n) * OFF_DIAGONAL_REL_TOL * OFF_DIAGONAL_REL_TOL;
    let mut converged = off_norm2(&a, n) <= target || target == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::Numeric(format!("Jacobi did not converge in {MAX_SWEEPS} sweeps")));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
        converged = off_norm2(&a, n) <= target;
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    Ok(ev)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenRow {
    pub index: usize,
    pub mean_rp: f64,
    pub sd_rp: f64,
    pub mean_rs: f64,
    pub sd_rs: f64,
    pub population_rp: f64,
    pub population_rs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSummary {
    pub k: usize,
    pub config: StudyConfig,
    pub redraw_count: u64,
    /// Largest |sum of eigenvalues − dimension| seen over all matrices.
    pub max_trace_error: f64,
    pub rows: Vec<EigenRow>,
}

impl EigenSummary {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,mean_rp,sd_rp,mean_rs,sd_rs,population_rp,population_rs")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.index, r.mean_rp, r.sd_rp, r.mean_rs, r.sd_rs, r.population_rp, r.population_rs
            )?;
        }
        Ok(())
    }
}

fn checked_eigenvalues(m: &SquareMatrix) -> Result<(Vec<f64>, f64)> {
    let ev = symmetric_eigenvalues(m)?;
    let err = (crate::sum::sum(ev.iter().copied()) - m.trace()).abs();
    if err > TRACE_TOL {
        return Err(Error::Numeric(format!("eigenvalue sum misses the trace by {err:e}")));
    }
    Ok((ev, err))
}

struct Moments2 {
    s: NeumaierSum,
    s2: NeumaierSum,
}

impl Moments2 {
    fn new() -> Self {
        Self {
            s: NeumaierSum::new(),
            s2: NeumaierSum::new(),
        }
    }

    fn add(&mut self, v: f64, shift: f64) {
        self.s.add(v - shift);
        self.s2.add((v - shift) * (v - shift));
    }

    fn finish(&self, shift: f64, m: f64) -> (f64, f64) {
        let s1 = self.s.value();
        let var = ((self.s2.value() - s1 * s1 / m) / (m - 1.0)).max(0.0);
        (shift + s1 / m, var.sqrt())
    }
}

/// Means and sds of the `k` leading eigenvalues of bootstrap Pearson and
/// Spearman matrices.
pub fn eigen_study(d: &PopulationDataset, cfg: &StudyConfig, k: usize) -> Result<EigenSummary> {
    cfg.validate()?;
    if k == 0 || k > d.n_cols() {
        return Err(Error::input(format!("k must be in 1..={}, got {k}", d.n_cols())));
    }
    let (pop_p, mut max_err) = checked_eigenvalues(&d.correlation_matrix(CorrelationKind::Pearson)?)?;
    let (pop_s, e) = checked_eigenvalues(&d.correlation_matrix(CorrelationKind::Spearman)?)?;
    max_err = max_err.max(e);
    let mut acc_p: Vec<Moments2> = (0..k).map(|_| Moments2::new()).collect();
    let mut acc_s: Vec<Moments2> = (0..k).map(|_| Moments2::new()).collect();
    let redraw_count = replicate(
        d,
        cfg,
        |m| {
            let (p, ep) = checked_eigenvalues(&m.pearson)?;
            let (s, es) = checked_eigenvalues(&m.spearman)?;
            Ok((p, s, ep.max(es)))
        },
        |(p, s, e)| {
            max_err = max_err.max(e);
            for i in 0..k {
                acc_p[i].add(p[i], pop_p[i]);
                acc_s[i].add(s[i], pop_s[i]);
            }
        },
    )?;
    let m = cfg.n_samples as f64;
    let rows = (0..k)
        .map(|i| {
            let (mean_rp, sd_rp) = acc_p[i].finish(pop_p[i], m);
            let (mean_rs, sd_rs) = acc_s[i].finish(pop_s[i], m);
            EigenRow {
                index: i + 1,
                mean_rp,
                sd_rp,
                mean_rs,
                sd_rs,
                population_rp: pop_p[i],
                population_rs: pop_s[i],
            }
        })
        .collect();
    Ok(EigenSummary {
        k,
        config: *cfg,
        redraw_count,
        max_trace_error: max_err,
        rows,
    })
}
