//! Sample correlation estimators.
//!
//! Pearson's r is the normalized centered cross-product, Spearman's r is the
//! same statistic on fractional (mid-)ranks, and Kendall's tau counts
//! concordant minus discordant pairs. Kendall is computed with Knight's
//! O(n log n) merge-sort algorithm; ties default to the tau-b normalization.
//!
//! Degenerate input (a constant column) is an error, never a NaN.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::sum::NeumaierSum;

/// Two equal-length, finite observation sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl PairedSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::input(format!(
                "paired sample lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::input("paired sample needs at least 2 observations"));
        }
        check_finite(&x, "x")?;
        check_finite(&y, "y")?;
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Returns a copy with one extra observation appended.
    pub fn with_point(&self, px: f64, py: f64) -> Result<Self> {
        let mut x = self.x.clone();
        let mut y = self.y.clone();
        x.push(px);
        y.push(py);
        Self::new(x, y)
    }

    pub fn swapped(&self) -> Self {
        Self {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.x, self.y)
    }
}

fn check_finite(v: &[f64], name: &str) -> Result<()> {
    match v.iter().position(|a| !a.is_finite()) {
        Some(i) => Err(Error::input(format!("{name}[{i}] is not finite"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    Pearson,
    Spearman,
    Kendall,
}

impl CorrelationKind {
    pub const ALL: [CorrelationKind; 3] = [
        CorrelationKind::Pearson,
        CorrelationKind::Spearman,
        CorrelationKind::Kendall,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationKind::Pearson => "pearson",
            CorrelationKind::Spearman => "spearman",
            CorrelationKind::Kendall => "kendall",
        }
    }
}

impl fmt::Display for CorrelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorrelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pearson" | "rp" => Ok(CorrelationKind::Pearson),
            "spearman" | "rs" => Ok(CorrelationKind::Spearman),
            "kendall" | "rt" => Ok(CorrelationKind::Kendall),
            other => Err(Error::input(format!("unknown correlation kind `{other}`"))),
        }
    }
}

/// Tie treatment for Kendall's tau.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KendallVariant {
    /// (C − D) / n(n−1)/2.
    TauA,
    /// (C − D) / √((n0 − n1)(n0 − n2)), penalizing ties in each variable.
    #[default]
    TauB,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientEstimate {
    pub kind: CorrelationKind,
    pub value: f64,
    pub n: usize,
}

/// Fractional ranks of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector {
    pub ranks: Vec<f64>,
    pub had_ties: bool,
}

/// Ranks 1..=n, tied values sharing the mean of the ranks they span.
pub fn fractional_rank(v: &[f64]) -> Result<RankVector> {
    if v.is_empty() {
        return Err(Error::input("cannot rank an empty sequence"));
    }
    check_finite(v, "values")?;
    Ok(fractional_rank_unchecked(v))
}

pub(crate) fn fractional_rank_unchecked(v: &[f64]) -> RankVector {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&a, &b| cmp_f64(v[a], v[b]));
    let mut ranks = vec![0.0; n];
    let mut had_ties = false;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        if j - i > 1 {
            had_ties = true;
        }
        // positions i..j (0-based) carry ranks i+1..=j
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    RankVector { ranks, had_ties }
}

#[inline]
fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).expect("finite values")
}

fn is_constant(v: &[f64]) -> bool {
    v.iter().all(|&a| a == v[0])
}

/// Pearson's r on raw slices. Both slices must be finite and of equal length.
pub fn pearson_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    if is_constant(x) {
        return Err(Error::degenerate("x"));
    }
    if is_constant(y) {
        return Err(Error::degenerate("y"));
    }
    let mx = crate::sum::mean(x);
    let my = crate::sum::mean(y);
    centered_correlation(x, y, mx, my)
}

fn centered_correlation(x: &[f64], y: &[f64], mx: f64, my: f64) -> Result<f64> {
    let mut sxy = NeumaierSum::new();
    let mut sxx = NeumaierSum::new();
    let mut syy = NeumaierSum::new();
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy.add(dx * dy);
        sxx.add(dx * dx);
        syy.add(dy * dy);
    }
    let (sxx, syy) = (sxx.value(), syy.value());
    if sxx <= 0.0 {
        return Err(Error::degenerate("x"));
    }
    if syy <= 0.0 {
        return Err(Error::degenerate("y"));
    }
    Ok((sxy.value() / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's r on raw slices.
pub fn spearman_slices(x: &[f64], y: &[f64]) -> Result<f64> {
    if is_constant(x) {
        return Err(Error::degenerate("x"));
    }
    if is_constant(y) {
        return Err(Error::degenerate("y"));
    }
    let rx = fractional_rank_unchecked(x).ranks;
    let ry = fractional_rank_unchecked(y).ranks;
    spearman_from_ranks(&rx, &ry)
}

/// Pearson on ranks, centering by (n + 1) / 2.
pub(crate) fn spearman_from_ranks(rx: &[f64], ry: &[f64]) -> Result<f64> {
    let n = rx.len() as f64;
    let c = (n + 1.0) / 2.0;
    centered_correlation(rx, ry, c, c)
}

/// Pair counts that determine every Kendall variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KendallCounts {
    /// n(n − 1) / 2
    pub total_pairs: u64,
    pub tied_x: u64,
    pub tied_y: u64,
    pub tied_xy: u64,
    pub discordant: u64,
}

impl KendallCounts {
    /// Concordant minus discordant pairs.
    pub fn score(&self) -> i64 {
        self.total_pairs as i64 - self.tied_x as i64 - self.tied_y as i64 + self.tied_xy as i64
            - 2 * self.discordant as i64
    }
}

/// Knight's algorithm: sort by (x, y), count ties, then count inversions of
/// y with a bottom-up merge sort.
pub fn kendall_counts(x: &[f64], y: &[f64]) -> KendallCounts {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_unstable_by(|&a, &b| cmp_f64(x[a], x[b]).then_with(|| cmp_f64(y[a], y[b])));

    let pairs = |t: usize| (t as u64) * (t as u64).saturating_sub(1) / 2;
    let mut tied_x = 0;
    let mut tied_xy = 0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[idx[j]] == x[idx[i]] {
            j += 1;
        }
        tied_x += pairs(j - i);
        let mut k = i;
        while k < j {
            let mut l = k + 1;
            while l < j && y[idx[l]] == y[idx[k]] {
                l += 1;
            }
            tied_xy += pairs(l - k);
            k = l;
        }
        i = j;
    }

    let mut ys: Vec<f64> = idx.iter().map(|&k| y[k]).collect();
    let discordant = count_inversions(&mut ys);

    let mut tied_y = 0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && ys[j] == ys[i] {
            j += 1;
        }
        tied_y += pairs(j - i);
        i = j;
    }

    KendallCounts {
        total_pairs: pairs(n),
        tied_x,
        tied_y,
        tied_xy,
        discordant,
    }
}

fn count_inversions(v: &mut [f64]) -> u64 {
    let n = v.len();
    let mut buf = vec![0.0; n];
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if v[j] < v[i] {
                    buf[k] = v[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    buf[k] = v[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
            k += mid - i;
            buf[k..k + (hi - j)].copy_from_slice(&v[j..hi]);
            lo = hi;
        }
        v.copy_from_slice(&buf);
        width *= 2;
    }
    swaps
}

/// Kendall's tau on raw slices.
pub fn kendall_slices(x: &[f64], y: &[f64], variant: KendallVariant) -> Result<f64> {
    if is_constant(x) {
        return Err(Error::degenerate("x"));
    }
    if is_constant(y) {
        return Err(Error::degenerate("y"));
    }
    let c = kendall_counts(x, y);
    let score = c.score() as f64;
    let tau = match variant {
        KendallVariant::TauA => score / c.total_pairs as f64,
        KendallVariant::TauB => {
            let dx = (c.total_pairs - c.tied_x) as f64;
            let dy = (c.total_pairs - c.tied_y) as f64;
            score / (dx.sqrt() * dy.sqrt())
        }
    };
    Ok(tau.clamp(-1.0, 1.0))
}

pub fn pearson(s: &PairedSample) -> Result<CoefficientEstimate> {
    Ok(CoefficientEstimate {
        kind: CorrelationKind::Pearson,
        value: pearson_slices(s.x(), s.y())?,
        n: s.len(),
    })
}

pub fn spearman(s: &PairedSample) -> Result<CoefficientEstimate> {
    Ok(CoefficientEstimate {
        kind: CorrelationKind::Spearman,
        value: spearman_slices(s.x(), s.y())?,
        n: s.len(),
    })
}

/// Kendall's tau-b.
pub fn kendall(s: &PairedSample) -> Result<CoefficientEstimate> {
    kendall_with(s, KendallVariant::TauB)
}

pub fn kendall_with(s: &PairedSample, variant: KendallVariant) -> Result<CoefficientEstimate> {
    Ok(CoefficientEstimate {
        kind: CorrelationKind::Kendall,
        value: kendall_slices(s.x(), s.y(), variant)?,
        n: s.len(),
    })
}

/// Dispatch on kind (Kendall uses tau-b).
pub fn estimate(kind: CorrelationKind, s: &PairedSample) -> Result<CoefficientEstimate> {
    match kind {
        CorrelationKind::Pearson => pearson(s),
        CorrelationKind::Spearman => spearman(s),
        CorrelationKind::Kendall => kendall(s),
    }
}

pub(crate) fn estimate_slices(kind: CorrelationKind, x: &[f64], y: &[f64]) -> Result<f64> {
    match kind {
        CorrelationKind::Pearson => pearson_slices(x, y),
        CorrelationKind::Spearman => spearman_slices(x, y),
        CorrelationKind::Kendall => kendall_slices(x, y, KendallVariant::TauB),
    }
}

/// Correlation matrix over columns of a table.
///
/// Every column must have the same length (≥ 2) and be non-constant; a
/// constant column yields [`Error::Degenerate`] naming it.
pub fn correlation_matrix(
    columns: &[Vec<f64>],
    names: &[String],
    kind: CorrelationKind,
) -> Result<SquareMatrix> {
    let p = columns.len();
    if p == 0 {
        return Err(Error::input("correlation matrix needs at least one column"));
    }
    let n = columns[0].len();
    if n < 2 {
        return Err(Error::input("correlation matrix needs at least 2 rows"));
    }
    let name = |j: usize| names.get(j).cloned().unwrap_or_else(|| format!("column {j}"));
    for (j, c) in columns.iter().enumerate() {
        if c.len() != n {
            return Err(Error::input(format!("column `{}` has {} rows, expected {n}", name(j), c.len())));
        }
        if is_constant(c) {
            return Err(Error::degenerate(name(j)));
        }
    }

    let mut m = SquareMatrix::identity(p);
    match kind {
        CorrelationKind::Pearson | CorrelationKind::Spearman => {
            let centered: Vec<Vec<f64>> = columns
                .iter()
                .map(|c| {
                    let (vals, center) = if kind == CorrelationKind::Spearman {
                        (fractional_rank_unchecked(c).ranks, (n as f64 + 1.0) / 2.0)
                    } else {
                        (c.clone(), crate::sum::mean(c))
                    };
                    vals.into_iter().map(|v| v - center).collect()
                })
                .collect();
            let norms: Vec<f64> = centered
                .iter()
                .map(|c| dot(c, c).sqrt())
                .collect();
            for (j, &nrm) in norms.iter().enumerate() {
                if nrm <= 0.0 {
                    return Err(Error::degenerate(name(j)));
                }
            }
            for i in 0..p {
                for j in (i + 1)..p {
                    let r = (dot(&centered[i], &centered[j]) / (norms[i] * norms[j])).clamp(-1.0, 1.0);
                    m.set(i, j, r);
                    m.set(j, i, r);
                }
            }
        }
        CorrelationKind::Kendall => {
            for i in 0..p {
                for j in (i + 1)..p {
                    let r = kendall_slices(&columns[i], &columns[j], KendallVariant::TauB)?;
                    m.set(i, j, r);
                    m.set(j, i, r);
                }
            }
        }
    }
    Ok(m)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = NeumaierSum::new();
    for (&u, &v) in a.iter().zip(b) {
        s.add(u * v);
    }
    s.value()
}

/// Largest n accepted by [`distinct_spearman_values`].
pub const MAX_ENUMERATION_N: usize = 9;

/// Number of distinct values Spearman's r can take for n untied pairs,
/// found by enumerating all n! rank permutations against the identity.
pub fn distinct_spearman_values(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::input("distinct value count needs n >= 2"));
    }
    if n > MAX_ENUMERATION_N {
        return Err(Error::Unsupported(format!(
            "enumeration over {n}! permutations is not supported (max n = {MAX_ENUMERATION_N})"
        )));
    }
    // r_s is a strictly decreasing function of the sum of squared rank
    // differences, so distinct sums are distinct coefficients.
    let mut perm: Vec<i64> = (0..n as i64).collect();
    let mut seen = HashSet::new();
    let sum_sq = |p: &[i64]| p.iter().enumerate().map(|(i, &v)| (i as i64 - v).pow(2)).sum::<i64>();
    seen.insert(sum_sq(&perm));
    // Heap's algorithm, iterative form
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            seen.insert(sum_sq(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(seen.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(x: &[f64], y: &[f64]) -> PairedSample {
        PairedSample::new(x.to_vec(), y.to_vec()).unwrap()
    }

    // O(n^2) pair enumeration, tau-b.
    fn kendall_brute(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut conc, mut disc, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..n {
            for j in (i + 1)..n {
                let a = (x[i] - x[j]).signum() * if x[i] == x[j] { 0.0 } else { 1.0 };
                let b = (y[i] - y[j]).signum() * if y[i] == y[j] { 0.0 } else { 1.0 };
                if a == 0.0 {
                    tx += 1;
                }
                if b == 0.0 {
                    ty += 1;
                }
                if a * b > 0.0 {
                    conc += 1;
                } else if a * b < 0.0 {
                    disc += 1;
                }
            }
        }
        let n0 = (n * (n - 1) / 2) as i64;
        (conc - disc) as f64 / (((n0 - tx) as f64) * ((n0 - ty) as f64)).sqrt()
    }

    // Rank by counting strictly smaller and equal elements.
    fn rank_brute(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|&a| {
                let less = v.iter().filter(|&&b| b < a).count() as f64;
                let eq = v.iter().filter(|&&b| b == a).count() as f64;
                less + (eq + 1.0) / 2.0
            })
            .collect()
    }

    #[test]
    fn fractional_rank_examples() {
        let r = fractional_rank(&[2.0, 2.0, 5.0]).unwrap();
        assert_eq!(r.ranks, vec![1.5, 1.5, 3.0]);
        assert!(r.had_ties);
        assert_eq!(fractional_rank(&[10.0]).unwrap().ranks, vec![1.0]);
        let r = fractional_rank(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(r.ranks, rank_brute(&[3.0, 1.0, 2.0]));
        assert_eq!(r.ranks, vec![3.0, 1.0, 2.0]);
        assert!(!r.had_ties);
    }

    #[test]
    fn fractional_rank_rejects_nan() {
        assert!(matches!(fractional_rank(&[1.0, f64::NAN]), Err(Error::Input(_))));
        assert!(fractional_rank(&[]).is_err());
    }

    #[test]
    fn pearson_examples() {
        assert!((pearson(&sample(&[1., 2., 3.], &[1., 2., 3.])).unwrap().value - 1.0).abs() < 1e-15);
        assert!((pearson(&sample(&[1., 2., 3.], &[3., 2., 1.])).unwrap().value + 1.0).abs() < 1e-15);
        let r = pearson(&sample(&[1., 2., 3., 4.], &[1., 3., 2., 4.])).unwrap();
        assert!((r.value - 0.8).abs() < 1e-15);
        assert_eq!(r.n, 4);
    }

    #[test]
    fn spearman_examples() {
        let r = spearman(&sample(&[1., 2., 3., 4.], &[1., 3., 2., 4.])).unwrap();
        assert!((r.value - 0.8).abs() < 1e-15);
        assert!((spearman(&sample(&[1., 2., 3.], &[2., 4., 6.])).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall(&sample(&[1., 2., 3.], &[1., 2., 3.])).unwrap().value, 1.0);
        assert_eq!(kendall(&sample(&[1., 2., 3.], &[3., 2., 1.])).unwrap().value, -1.0);
        let t = kendall(&sample(&[1., 2., 3., 4.], &[1., 3., 2., 4.])).unwrap().value;
        assert!((t - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kendall_tau_a_vs_b_with_ties() {
        let s = sample(&[1., 1., 2., 3.], &[1., 2., 2., 3.]);
        // pairs: (0,1) tie x; (0,2) C; (0,3) C; (1,2) tie y; (1,3) C; (2,3) C
        let a = kendall_with(&s, KendallVariant::TauA).unwrap().value;
        let b = kendall_with(&s, KendallVariant::TauB).unwrap().value;
        assert!((a - 4.0 / 6.0).abs() < 1e-15);
        assert!((b - 4.0 / 5.0).abs() < 1e-15);
        assert!((b - kendall_brute(s.x(), s.y())).abs() < 1e-15);
    }

    #[test]
    fn constant_columns_are_degenerate() {
        let s = sample(&[1., 1., 1.], &[1., 2., 3.]);
        for kind in CorrelationKind::ALL {
            assert_eq!(estimate(kind, &s), Err(Error::degenerate("x")));
        }
        let s = sample(&[1., 2., 3.], &[4., 4., 4.]);
        assert_eq!(pearson(&s), Err(Error::degenerate("y")));
    }

    #[test]
    fn paired_sample_validation() {
        assert!(PairedSample::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(PairedSample::new(vec![1.0], vec![1.0]).is_err());
        assert!(PairedSample::new(vec![1.0, f64::INFINITY], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn matrix_identical_columns() {
        let cols = vec![vec![1., 2., 3.], vec![1., 2., 3.]];
        for kind in CorrelationKind::ALL {
            let m = correlation_matrix(&cols, &[], kind).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((m.get(i, j) - 1.0).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn matrix_matches_pairwise_calls() {
        let cols = vec![
            vec![1.0, 4.0, 2.0, 8.0, 5.0, 7.0],
            vec![2.0, 3.0, 3.0, 9.0, 1.0, 6.0],
            vec![0.5, -1.0, 2.5, 2.0, 4.0, 1.0],
        ];
        for kind in CorrelationKind::ALL {
            let m = correlation_matrix(&cols, &[], kind).unwrap();
            for i in 0..3 {
                assert_eq!(m.get(i, i), 1.0);
                for j in 0..3 {
                    if i != j {
                        let r = estimate(kind, &sample(&cols[i], &cols[j])).unwrap().value;
                        assert!((m.get(i, j) - r).abs() < 1e-14, "{kind} {i} {j}");
                    }
                }
            }
        }
        // ranking first then Pearson gives the Spearman matrix
        let ranked: Vec<Vec<f64>> = cols.iter().map(|c| fractional_rank(c).unwrap().ranks).collect();
        let a = correlation_matrix(&ranked, &[], CorrelationKind::Pearson).unwrap();
        let b = correlation_matrix(&cols, &[], CorrelationKind::Spearman).unwrap();
        for (i, j, v) in a.upper_pairs() {
            assert!((v - b.get(i, j)).abs() < 1e-14);
        }
    }

    #[test]
    fn matrix_names_constant_column() {
        let cols = vec![vec![1., 2., 3.], vec![5., 5., 5.]];
        let names = vec!["a".to_string(), "b".to_string()];
        assert_eq!(
            correlation_matrix(&cols, &names, CorrelationKind::Spearman),
            Err(Error::degenerate("b"))
        );
    }

    // Enumerate permutations by brute recursion and collect the exact
    // rational value 1 - 6 D / (n (n^2 - 1)) as a reduced fraction.
    fn distinct_brute(n: usize) -> usize {
        fn rec(n: usize, used: &mut Vec<bool>, cur: &mut Vec<i64>, out: &mut HashSet<(i64, i64)>) {
            if cur.len() == n {
                let d: i64 = cur.iter().enumerate().map(|(i, &v)| (i as i64 - v).pow(2)).sum();
                let den = (n * (n * n - 1)) as i64;
                let num = den - 6 * d;
                let g = gcd(num.abs(), den);
                out.insert((num / g, den / g));
                return;
            }
            for v in 0..n {
                if !used[v] {
                    used[v] = true;
                    cur.push(v as i64);
                    rec(n, used, cur, out);
                    cur.pop();
                    used[v] = false;
                }
            }
        }
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 { a.max(1) } else { gcd(b, a % b) }
        }
        let mut out = HashSet::new();
        rec(n, &mut vec![false; n], &mut Vec::new(), &mut out);
        out.len()
    }

    #[test]
    fn distinct_spearman_counts() {
        assert_eq!(distinct_spearman_values(5).unwrap(), 21);
        assert_eq!(distinct_spearman_values(2).unwrap(), 2);
        assert_eq!(distinct_spearman_values(4).unwrap(), distinct_brute(4));
        for n in 2..=7 {
            assert_eq!(distinct_spearman_values(n).unwrap(), distinct_brute(n), "n={n}");
        }
        assert!(matches!(distinct_spearman_values(10), Err(Error::Unsupported(_))));
        assert!(distinct_spearman_values(1).is_err());
    }

    fn finite_pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-1e3f64..1e3, n),
                prop::collection::vec(-1e3f64..1e3, n),
            )
        })
    }

    fn tied_pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec((0i32..5).prop_map(f64::from), n),
                prop::collection::vec((0i32..5).prop_map(f64::from), n),
            )
        })
    }

    proptest! {
        #[test]
        fn ranks_sum_to_triangle((x, _) in tied_pairs()) {
            let r = fractional_rank(&x).unwrap();
            let n = x.len() as f64;
            prop_assert!((r.ranks.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
            prop_assert_eq!(r.ranks, rank_brute(&x));
        }

        #[test]
        fn estimators_are_symmetric_and_bounded((x, y) in finite_pairs()) {
            let s = sample(&x, &y);
            for kind in CorrelationKind::ALL {
                if let Ok(a) = estimate(kind, &s) {
                    let b = estimate(kind, &s.swapped()).unwrap();
                    prop_assert_eq!(a.value, b.value);
                    prop_assert!((-1.0..=1.0).contains(&a.value));
                }
            }
        }

        #[test]
        fn kendall_matches_pair_enumeration((x, y) in tied_pairs()) {
            let s = sample(&x, &y);
            if let Ok(t) = kendall(&s) {
                prop_assert!((t.value - kendall_brute(&x, &y)).abs() < 1e-12);
            }
        }

        #[test]
        fn spearman_invariant_under_monotone_maps(
            (x, y) in finite_pairs(),
            knots in prop::collection::vec(0.01f64..5.0, 8),
        ) {
            // random increasing piecewise-linear map on [-1e3, 1e3]
            let step = 2e3 / knots.len() as f64;
            let f = |v: f64| {
                let mut acc = 0.0;
                let mut lo = -1e3;
                for &slope in &knots {
                    let hi = lo + step;
                    acc += slope * (v.min(hi) - lo).max(0.0);
                    lo = hi;
                }
                acc
            };
            let s = sample(&x, &y);
            let t = sample(&x.iter().map(|&v| f(v)).collect::<Vec<_>>(), &y);
            if let (Ok(a), Ok(b)) = (spearman(&s), spearman(&t)) {
                prop_assert!((a.value - b.value).abs() < 1e-12);
            }
        }

        #[test]
        fn pearson_affine_invariance((x, y) in finite_pairs(), a in 0.1f64..10.0, b in -50.0f64..50.0) {
            let s = sample(&x, &y);
            if let Ok(r) = pearson(&s) {
                let up = sample(&x.iter().map(|v| a * v + b).collect::<Vec<_>>(), &y);
                let down = sample(&x.iter().map(|v| -a * v + b).collect::<Vec<_>>(), &y);
                prop_assert!((pearson(&up).unwrap().value - r.value).abs() < 1e-9);
                prop_assert!((pearson(&down).unwrap().value + r.value).abs() < 1e-9);
            }
        }

        #[test]
        fn no_ties_formulas_agree(perm_seed in prop::collection::vec(0.0f64..1.0, 3..60)) {
            // distinct y values against x = 1..n
            let n = perm_seed.len();
            let x: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            let rx = fractional_rank(&x).unwrap().ranks;
            let ry = fractional_rank(&perm_seed).unwrap();
            prop_assume!(!ry.had_ties);
            let ry = ry.ranks;
            let nf = n as f64;
            let c = (nf + 1.0) / 2.0;
            let xc: Vec<f64> = rx.iter().map(|v| v - c).collect();
            let yc: Vec<f64> = ry.iter().map(|v| v - c).collect();
            let sxx: f64 = xc.iter().map(|v| v * v).sum();
            let d2: f64 = xc.iter().zip(&yc).map(|(a, b)| (a - b).powi(2)).sum();
            let sxy: f64 = xc.iter().zip(&yc).map(|(a, b)| a * b).sum();
            let eq2 = spearman(&sample(&x, &perm_seed)).unwrap().value;
            let f1 = (sxx - 0.5 * d2) / sxx;
            let f2 = 1.0 - d2 / (2.0 * sxx);
            let f3 = 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
            let f4 = 12.0 / (nf * (nf * nf - 1.0)) * sxy;
            for f in [f1, f2, f3, f4] {
                prop_assert!((f - eq2).abs() < 1e-12);
            }
        }
    }
}
