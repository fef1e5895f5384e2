//! Finite-population resampling: draw rows with replacement from a dataset,
//! compute Pearson and Spearman matrices per draw and compare them with the
//! whole-dataset matrices.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corr::{correlation_matrix, CorrelationKind};
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::randgen::{LatentTransform, MarginalSpec, RngStream};
use crate::sim::MAX_ATTEMPTS;
use crate::stats::{moments, Moments};
use crate::sum::NeumaierSum;

/// Numeric table treated as a finite population; rows are subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationDataset {
    column_names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn is_constant(c: &[f64]) -> bool {
    c.iter().all(|&v| v == c[0])
}

impl PopulationDataset {
    pub fn new(column_names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if column_names.len() != columns.len() {
            return Err(Error::input(format!(
                "{} column names for {} columns",
                column_names.len(),
                columns.len()
            )));
        }
        if columns.is_empty() {
            return Err(Error::input("dataset has no columns"));
        }
        let n = columns[0].len();
        if n < 2 {
            return Err(Error::Data(format!("dataset needs at least 2 rows, has {n}")));
        }
        for (name, c) in column_names.iter().zip(&columns) {
            if c.len() != n {
                return Err(Error::input(format!("column `{name}` has {} rows, expected {n}", c.len())));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("column `{name}` contains a non-finite value")));
            }
            if is_constant(c) {
                return Err(Error::degenerate(name.clone()));
            }
        }
        Ok(Self { column_names, columns })
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn correlation_matrix(&self, kind: CorrelationKind) -> Result<SquareMatrix> {
        correlation_matrix(&self.columns, &self.column_names, kind)
    }

    /// Same columns with every value replaced by its fractional rank.
    pub fn rank_transformed(&self) -> Self {
        Self {
            column_names: self.column_names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| crate::corr::fractional_rank_unchecked(c).ranks)
                .collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let data_err = |e: csv::Error| Error::Data(e.to_string());
        out.write_record(&self.column_names).map_err(data_err)?;
        for i in 0..self.n_rows() {
            out.write_record(self.columns.iter().map(|c| c[i].to_string()))
                .map_err(data_err)?;
        }
        out.flush().map_err(|e| Error::Data(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestOptions {
    pub delimiter: u8,
    /// Lines starting with this byte are skipped.
    pub comment: Option<u8>,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            delimiter: b',',
            comment: Some(b'#'),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub dataset: PopulationDataset,
    /// Rows dropped for a missing or non-numeric cell.
    pub dropped_rows: usize,
}

pub fn ingest_csv(path: impl AsRef<Path>, opts: &IngestOptions) -> Result<Ingested> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    ingest_reader(f, opts)
}

pub fn ingest_reader<R: Read>(r: R, opts: &IngestOptions) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .comment(opts.comment)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if names.is_empty() || names.iter().all(String::is_empty) {
        return Err(Error::Data("missing header row".into()));
    }
    let mut columns = vec![Vec::new(); names.len()];
    let mut dropped = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
        let parsed: Option<Vec<f64>> = if rec.len() == names.len() {
            rec.iter()
                .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect()
        } else {
            None
        };
        match parsed {
            Some(vals) => {
                for (c, v) in columns.iter_mut().zip(vals) {
                    c.push(v);
                }
            }
            None => dropped += 1,
        }
    }
    if columns[0].is_empty() {
        return Err(Error::Data(format!("no usable rows ({dropped} dropped)")));
    }
    Ok(Ingested {
        dataset: PopulationDataset::new(names, columns)?,
        dropped_rows: dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnProfile {
    pub name: String,
    #[serde(flatten)]
    pub moments: Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentProfile {
    pub columns: Vec<ColumnProfile>,
}

impl MomentProfile {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "column,mean,sd,skewness,kurtosis")?;
        for c in &self.columns {
            let m = &c.moments;
            writeln!(w, "{},{},{},{},{}", c.name, m.mean, m.sd, m.skewness, m.kurtosis)?;
        }
        Ok(())
    }
}

pub fn moment_profile(d: &PopulationDataset) -> MomentProfile {
    MomentProfile {
        columns: d
            .column_names
            .iter()
            .zip(&d.columns)
            .map(|(name, c)| ColumnProfile {
                name: name.clone(),
                moments: moments(c),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleGroup {
    pub name: String,
    pub columns: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScaleFile {
    scale: Vec<ScaleGroup>,
}

/// Parses `[[scale]]` tables with `name` and `columns` keys.
pub fn parse_scale_groups(text: &str) -> Result<Vec<ScaleGroup>> {
    let f: ScaleFile = toml::from_str(text).map_err(|e| Error::input(format!("scale file: {e}")))?;
    Ok(f.scale)
}

/// Row-wise sums over each group of columns.
pub fn scale_sums(d: &PopulationDataset, groups: &[ScaleGroup]) -> Result<PopulationDataset> {
    if groups.is_empty() {
        return Err(Error::input("no scale groups given"));
    }
    let n = d.n_rows();
    let mut names = Vec::with_capacity(groups.len());
    let mut cols = Vec::with_capacity(groups.len());
    for g in groups {
        if g.columns.is_empty() {
            return Err(Error::input(format!("scale `{}` has no columns", g.name)));
        }
        let idx = g
            .columns
            .iter()
            .map(|c| {
                d.column_index(c)
                    .ok_or_else(|| Error::input(format!("scale `{}` references unknown column `{c}`", g.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        let col = (0..n)
            .map(|i| idx.iter().map(|&j| d.columns[j][i]).sum())
            .collect();
        names.push(g.name.clone());
        cols.push(col);
    }
    PopulationDataset::new(names, cols)
}

/// Statistics for one off-diagonal pair over all replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct PairSummary {
    pub x: String,
    pub y: String,
    pub population_Rp: f64,
    pub population_Rs: f64,
    pub mean_rp: f64,
    pub mean_rs: f64,
    pub sd_rp: f64,
    pub sd_rs: f64,
    pub mad_rp_vs_Rp: f64,
    pub mad_rp_vs_Rs: f64,
    pub mad_rs_vs_Rp: f64,
    pub mad_rs_vs_Rs: f64,
}

/// Unweighted means over pairs of the per-pair statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct GrandSummary {
    pub mean_rp: f64,
    pub mean_rs: f64,
    pub bias_rp: f64,
    pub bias_rs: f64,
    pub sd_rp: f64,
    pub sd_rs: f64,
    pub mad_rp_vs_Rp: f64,
    pub mad_rp_vs_Rs: f64,
    pub mad_rs_vs_Rp: f64,
    pub mad_rs_vs_Rs: f64,
}

impl GrandSummary {
    /// The ten summary rows in reporting order.
    pub fn rows(&self) -> [(&'static str, f64); 10] {
        [
            ("mean_rp", self.mean_rp),
            ("mean_rs", self.mean_rs),
            ("mean_rp_minus_Rp", self.bias_rp),
            ("mean_rs_minus_Rs", self.bias_rs),
            ("sd_rp", self.sd_rp),
            ("sd_rs", self.sd_rs),
            ("mad_rp_vs_Rp", self.mad_rp_vs_Rp),
            ("mad_rp_vs_Rs", self.mad_rp_vs_Rs),
            ("mad_rs_vs_Rp", self.mad_rs_vs_Rp),
            ("mad_rs_vs_Rs", self.mad_rs_vs_Rs),
        ]
    }

    fn from_pairs(pairs: &[PairSummary]) -> Self {
        let avg = |f: fn(&PairSummary) -> f64| crate::sum::sum(pairs.iter().map(f)) / pairs.len() as f64;
        Self {
            mean_rp: avg(|p| p.mean_rp),
            mean_rs: avg(|p| p.mean_rs),
            bias_rp: avg(|p| p.mean_rp - p.population_Rp),
            bias_rs: avg(|p| p.mean_rs - p.population_Rs),
            sd_rp: avg(|p| p.sd_rp),
            sd_rs: avg(|p| p.sd_rs),
            mad_rp_vs_Rp: avg(|p| p.mad_rp_vs_Rp),
            mad_rp_vs_Rs: avg(|p| p.mad_rp_vs_Rs),
            mad_rs_vs_Rp: avg(|p| p.mad_rs_vs_Rp),
            mad_rs_vs_Rs: avg(|p| p.mad_rs_vs_Rs),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub sample_size: usize,
    pub n_samples: usize,
    pub master_seed: u64,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size < 2 {
            return Err(Error::input("sample size must be at least 2"));
        }
        if self.n_samples < 2 {
            return Err(Error::input("need at least 2 samples"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub n_rows: usize,
    pub n_cols: usize,
    pub redraw_count: u64,
    pub grand: GrandSummary,
    pub pairs: Vec<PairSummary>,
}

impl StudyResult {
    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "measure,value")?;
        for (k, v) in self.grand.rows() {
            writeln!(w, "{k},{v}")?;
        }
        Ok(())
    }

    pub fn write_pairs_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "x,y,population_Rp,population_Rs,mean_rp,mean_rs,sd_rp,sd_rs,mad_rp_vs_Rp,mad_rp_vs_Rs,mad_rs_vs_Rp,mad_rs_vs_Rs"
        )?;
        for p in &self.pairs {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                p.x,
                p.y,
                p.population_Rp,
                p.population_Rs,
                p.mean_rp,
                p.mean_rs,
                p.sd_rp,
                p.sd_rs,
                p.mad_rp_vs_Rp,
                p.mad_rp_vs_Rs,
                p.mad_rs_vs_Rp,
                p.mad_rs_vs_Rs
            )?;
        }
        Ok(())
    }
}

/// Pearson and Spearman matrices of one bootstrap draw.
pub(crate) struct DrawnMatrices {
    pub pearson: SquareMatrix,
    pub spearman: SquareMatrix,
}

// Draws rows until no column is constant; returns the matrices and the
// number of rejected draws.
fn draw(d: &PopulationDataset, sample_size: usize, stream: &RngStream) -> Result<(DrawnMatrices, u64)> {
    let mut rng = stream.rng();
    let n_rows = d.n_rows();
    let mut cols = vec![vec![0.0; sample_size]; d.n_cols()];
    let mut constant_hits = vec![0u32; d.n_cols()];
    let mut rows = vec![0usize; sample_size];
    for attempt in 0..MAX_ATTEMPTS {
        for r in rows.iter_mut() {
            *r = rng.gen_range(0..n_rows);
        }
        for (dst, src) in cols.iter_mut().zip(&d.columns) {
            for (v, &r) in dst.iter_mut().zip(&rows) {
                *v = src[r];
            }
        }
        let mut ok = true;
        for (j, c) in cols.iter().enumerate() {
            if is_constant(c) {
                constant_hits[j] += 1;
                ok = false;
            }
        }
        if ok {
            let pearson = correlation_matrix(&cols, &d.column_names, CorrelationKind::Pearson)?;
            let spearman = correlation_matrix(&cols, &d.column_names, CorrelationKind::Spearman)?;
            return Ok((DrawnMatrices { pearson, spearman }, attempt as u64));
        }
    }
    let worst = constant_hits
        .iter()
        .enumerate()
        .max_by_key(|&(_, &h)| h)
        .map(|(j, _)| d.column_names[j].clone())
        .unwrap_or_default();
    Err(Error::Infeasible(format!(
        "no computable correlation matrix in {MAX_ATTEMPTS} draws of {sample_size} rows; column `{worst}` was constant most often"
    )))
}

const CHUNK: usize = 256;

/// Runs `n_samples` bootstrap draws; replication r uses stream child r.
/// `per_draw` runs in parallel, `sink` receives results in replication
/// order. Returns the total redraw count.
pub(crate) fn replicate<T, F, S>(d: &PopulationDataset, cfg: &StudyConfig, per_draw: F, mut sink: S) -> Result<u64>
where
    T: Send,
    F: Fn(DrawnMatrices) -> Result<T> + Sync,
    S: FnMut(T),
{
    cfg.validate()?;
    let root = RngStream::new(cfg.master_seed);
    let mut redraws = 0;
    let mut start = 0;
    while start < cfg.n_samples {
        let end = (start + CHUNK).min(cfg.n_samples);
        let chunk: Vec<Result<(T, u64)>> = (start..end)
            .into_par_iter()
            .map(|r| {
                let (m, k) = draw(d, cfg.sample_size, &root.child(r as u64))?;
                Ok((per_draw(m)?, k))
            })
            .collect();
        for item in chunk {
            let (t, k) = item?;
            redraws += k;
            sink(t);
        }
        start = end;
    }
    Ok(redraws)
}

#[derive(Clone)]
struct PairAccumulator {
    // deviations from the own population value, for a stable variance
    dev: NeumaierSum,
    dev2: NeumaierSum,
    abs_vs_p: NeumaierSum,
    abs_vs_s: NeumaierSum,
}

impl PairAccumulator {
    fn new() -> Self {
        Self {
            dev: NeumaierSum::new(),
            dev2: NeumaierSum::new(),
            abs_vs_p: NeumaierSum::new(),
            abs_vs_s: NeumaierSum::new(),
        }
    }

    fn add(&mut self, r: f64, own: f64, rp: f64, rs: f64) {
        let d = r - own;
        self.dev.add(d);
        self.dev2.add(d * d);
        self.abs_vs_p.add((r - rp).abs());
        self.abs_vs_s.add((r - rs).abs());
    }

    // (mean, sd, mad vs R_p, mad vs R_s)
    fn finish(&self, own: f64, m: f64) -> (f64, f64, f64, f64) {
        let s1 = self.dev.value();
        let var = ((self.dev2.value() - s1 * s1 / m) / (m - 1.0)).max(0.0);
        (own + s1 / m, var.sqrt(), self.abs_vs_p.value() / m, self.abs_vs_s.value() / m)
    }
}

/// Bootstrap study of all off-diagonal Pearson and Spearman coefficients.
#[allow(non_snake_case)]
pub fn run_study(d: &PopulationDataset, cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    if d.n_cols() < 2 {
        return Err(Error::input("resampling study needs at least 2 columns"));
    }
    let pop_p = d.correlation_matrix(CorrelationKind::Pearson)?;
    let pop_s = d.correlation_matrix(CorrelationKind::Spearman)?;
    let pairs: Vec<(usize, usize)> = pop_p.upper_pairs().map(|(i, j, _)| (i, j)).collect();
    let mut acc_p = vec![PairAccumulator::new(); pairs.len()];
    let mut acc_s = vec![PairAccumulator::new(); pairs.len()];
    let redraw_count = replicate(
        d,
        cfg,
        |m| {
            Ok(pairs
                .iter()
                .map(|&(i, j)| (m.pearson.get(i, j), m.spearman.get(i, j)))
                .collect::<Vec<_>>())
        },
        |vals| {
            for (k, ((rp, rs), &(i, j))) in vals.into_iter().zip(&pairs).enumerate() {
                let (pp, ps) = (pop_p.get(i, j), pop_s.get(i, j));
                acc_p[k].add(rp, pp, pp, ps);
                acc_s[k].add(rs, ps, pp, ps);
            }
        },
    )?;
    let m = cfg.n_samples as f64;
    let pair_summaries: Vec<PairSummary> = pairs
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| {
            let (pp, ps) = (pop_p.get(i, j), pop_s.get(i, j));
            let (mean_rp, sd_rp, mad_rp_vs_Rp, mad_rp_vs_Rs) = acc_p[k].finish(pp, m);
            let (mean_rs, sd_rs, mad_rs_vs_Rp, mad_rs_vs_Rs) = acc_s[k].finish(ps, m);
            PairSummary {
                x: d.column_names[i].clone(),
                y: d.column_names[j].clone(),
                population_Rp: pp,
                population_Rs: ps,
                mean_rp,
                mean_rs,
                sd_rp,
                sd_rs,
                mad_rp_vs_Rp,
                mad_rp_vs_Rs,
                mad_rs_vs_Rp,
                mad_rs_vs_Rs,
            }
        })
        .collect();
    Ok(StudyResult {
        config: *cfg,
        n_rows: d.n_rows(),
        n_cols: d.n_cols(),
        redraw_count,
        grand: GrandSummary::from_pairs(&pair_summaries),
        pairs: pair_summaries,
    })
}

/// Deterministic stand-in populations for datasets that cannot be shipped.
pub mod synthetic {
    use super::*;

    pub const ASVAB_LIKE_ROWS: usize = 11_878;
    pub const DBQ_LIKE_ROWS: usize = 9_077;

    fn normals(rng: &mut crate::randgen::StreamRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Ten near-normal, mildly platykurtic test scores driven by one common
    /// factor (loadings .70–.88, intercorrelations roughly .5–.75). The
    /// unique parts are uniform, which pulls kurtosis below 3.
    pub fn asvab_like(n_rows: usize, seed: u64) -> Result<PopulationDataset> {
        let root = RngStream::new(seed).child(0xA5);
        let mut rng = root.child(0).rng();
        let factor = normals(&mut rng, n_rows);
        let sqrt3 = 3f64.sqrt();
        let mut names = Vec::new();
        let mut cols = Vec::new();
        for j in 0..10 {
            let load = 0.70 + 0.02 * j as f64;
            let uniq = (1.0 - load * load).sqrt();
            let mut rng = root.child(1 + j as u64).rng();
            let col = factor
                .iter()
                .map(|&f| load * f + uniq * sqrt3 * (2.0 * rng.gen::<f64>() - 1.0))
                .collect();
            names.push(format!("test{:02}", j + 1));
            cols.push(col);
        }
        PopulationDataset::new(names, cols)
    }

    /// Scale layout of the dbq-like items: (name, item count).
    pub const DBQ_SCALES: [(&str, usize); 5] = [
        ("violations", 6),
        ("errors", 8),
        ("aggressive", 6),
        ("inexperience", 7),
        ("slips", 7),
    ];

    /// 34 six-point items, all heavily right-skewed and leptokurtic.
    ///
    /// A general factor plus one factor per scale drive latent normals that
    /// are cut into categories 1–6. The share answering 1 rises across items
    /// from .40 to .97, and each further category keeps 45% of the remaining
    /// mass, so kurtosis spans roughly 3.5 to 60.
    pub fn dbq_like(n_rows: usize, seed: u64) -> Result<PopulationDataset> {
        let root = RngStream::new(seed).child(0xDB);
        let mut rng = root.child(0).rng();
        let general = normals(&mut rng, n_rows);
        let (lg, ls): (f64, f64) = (0.40, 0.50);
        let lu = (1.0 - lg * lg - ls * ls).sqrt();
        let total: usize = DBQ_SCALES.iter().map(|s| s.1).sum();
        let mut names = Vec::with_capacity(total);
        let mut cols = Vec::with_capacity(total);
        let mut item = 0usize;
        for (s, &(scale, count)) in DBQ_SCALES.iter().enumerate() {
            let mut rng = root.child(100 + s as u64).rng();
            let specific = normals(&mut rng, n_rows);
            for k in 0..count {
                // interleave floor shares so every scale mixes mild and extreme items
                let pos = (item * 13) % total;
                let p1 = 0.40 + 0.57 * pos as f64 / (total - 1) as f64;
                let mut thresholds = Vec::with_capacity(5);
                let mut cum = p1;
                thresholds.push(cum);
                for _ in 0..4 {
                    cum += (1.0 - cum) * 0.55;
                    thresholds.push(cum);
                }
                let t = LatentTransform::new(&MarginalSpec::DiscretizedLikert { thresholds })?;
                let mut rng = root.child(1000 + item as u64).rng();
                let col = general
                    .iter()
                    .zip(&specific)
                    .map(|(&g, &sp)| t.apply(lg * g + ls * sp + lu * rng.sample::<f64, _>(StandardNormal)))
                    .collect();
                names.push(format!("{scale}{}", k + 1));
                cols.push(col);
                item += 1;
            }
        }
        PopulationDataset::new(names, cols)
    }

    /// Sum-scale groups matching the dbq-like item names.
    pub fn dbq_scale_groups() -> Vec<ScaleGroup> {
        DBQ_SCALES
            .iter()
            .map(|&(scale, count)| ScaleGroup {
                name: scale.to_owned(),
                columns: (1..=count).map(|k| format!("{scale}{k}")).collect(),
            })
            .collect()
    }

    /// `p` independent standard normal columns.
    pub fn independent_normal(n_rows: usize, p: usize, seed: u64) -> Result<PopulationDataset> {
        let root = RngStream::new(seed).child(0x1D);
        let cols = (0..p).map(|j| normals(&mut root.child(j as u64).rng(), n_rows)).collect();
        PopulationDataset::new((1..=p).map(|j| format!("x{j}")).collect(), cols)
    }
}
