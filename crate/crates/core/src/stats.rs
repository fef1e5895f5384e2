//! Descriptive statistics shared by the study drivers.

use serde::{Deserialize, Serialize};

use crate::sum::NeumaierSum;

/// Population (divide-by-n) moments of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
    /// Third central moment over sd³.
    pub skewness: f64,
    /// Fourth central moment over sd⁴ (3 for a normal distribution).
    pub kurtosis: f64,
}

pub fn moments(v: &[f64]) -> Moments {
    let n = v.len() as f64;
    let mean = crate::sum::mean(v);
    let (mut m2, mut m3, mut m4) = (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
    for &a in v {
        let d = a - mean;
        let d2 = d * d;
        m2.add(d2);
        m3.add(d2 * d);
        m4.add(d2 * d2);
    }
    let (m2, m3, m4) = (m2.value() / n, m3.value() / n, m4.value() / n);
    let sd = m2.sqrt();
    Moments {
        mean,
        sd,
        skewness: m3 / (m2 * sd),
        kurtosis: m4 / (m2 * m2),
    }
}

/// Linear interpolation between order statistics (R type 7) on sorted data.
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample standard deviation (n − 1 denominator); `None` for fewer than two values.
pub fn sample_sd(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = crate::sum::mean(v);
    let ss = crate::sum::sum(v.iter().map(|a| (a - m) * (a - m)));
    Some((ss / (v.len() - 1) as f64).sqrt())
}
