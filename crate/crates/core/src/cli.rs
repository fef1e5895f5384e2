//! Command-line front end: argument and config-file resolution, figure
//! presets and artifact writing.
//!
//! Every subcommand's parameters live in one struct that is both a clap
//! argument group and a `[subcommand]` table of the TOML config file. File
//! values are read first, flags override them, defaults fill the rest, and
//! the resolved table is echoed to `config.toml` in the output directory.
//! Its SHA-256 (first 16 hex digits) heads every artifact.

use std::ffi::OsString;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corr::CorrelationKind;
use crate::eigen::eigen_study;
use crate::error::Error;
use crate::exact::{self, NormalTheoryParams, RpDensity};
use crate::influence::{scan_double, scan_single, AxisSpec, InfluenceSummary};
use crate::randgen::{
    calibrate_copula, sample_bivariate_normal, sample_population, MarginalSpec, PopulationSpec, RngStream,
    DEFAULT_CALIBRATION_N, DESK_CALIBRATION_N,
};
use crate::resample::{
    ingest_csv, moment_profile, parse_scale_groups, run_study, scale_sums, synthetic, IngestOptions, PopulationDataset,
    StudyConfig,
};
use crate::sim::{logspace_sizes, run_plan, sampling_histogram, SimulationPlan, DESK_REPLICATIONS, FULL_REPLICATIONS};
use crate::PairedSample;

pub const OUT_DIR_ENV: &str = "CORRKIT_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "corrkit-out";
pub const DEFAULT_SEED: u64 = 20_160_501;
pub const CONFIG_ECHO: &str = "config.toml";

// Stream-path roots for the independent random streams of one run.
const CALIBRATION_STREAM: u64 = 0xCA11;
const SCATTER_STREAM: u64 = 0x5CA7;
const BASE_STREAM: u64 = 0xBA5E;
const HISTOGRAM_STREAM: u64 = 0x4157;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
    Io(String),
}

impl CliError {
    /// 2 usage, 3 input data, 4 numeric, 5 infeasible condition.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Core(e) => match e {
                Error::Input(_) | Error::Unsupported(_) => 2,
                Error::Data(_) | Error::Degenerate { .. } => 3,
                Error::Domain(_) | Error::Numeric(_) => 4,
                Error::Infeasible(_) => 5,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

#[derive(Parser, Debug)]
#[command(name = "corrkit", version, about = "Correlation estimators, exact sampling theory and reproducible simulation studies")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output directory (default: $CORRKIT_OUT_DIR, then ./corrkit-out)
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Master seed for every random stream of the run
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism); results do not depend on it
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Replication scale: desk (quick) or full (published study counts)
    #[arg(long, global = true, value_enum)]
    pub scale: Option<Scale>,
}

#[derive(Subcommand, Debug, Clone, PartialEq)]
pub enum Command {
    /// Monte Carlo sampling distributions of r_p, r_s and r_t
    Simulate(SimulateArgs),
    /// Exact density of r_p under bivariate normality
    Density(DensityArgs),
    /// Per-column mean, sd, skewness and kurtosis of a dataset
    Moments(MomentsArgs),
    /// Change in r_p and r_s from appending outliers on a grid
    Influence(InfluenceArgs),
    /// Bootstrap correlation matrices of a finite population
    Resample(ResampleArgs),
    /// Leading-eigenvalue stability of bootstrap correlation matrices
    Eigen(EigenArgs),
    /// Convert between population R_p, R_s and R_t under normality
    Convert(ConvertArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Density(_) => "density",
            Command::Moments(_) => "moments",
            Command::Influence(_) => "influence",
            Command::Resample(_) => "resample",
            Command::Eigen(_) => "eigen",
            Command::Convert(_) => "convert",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    #[default]
    Desk,
    Full,
}

impl Scale {
    fn replications(self) -> usize {
        match self {
            Scale::Desk => DESK_REPLICATIONS,
            Scale::Full => FULL_REPLICATIONS,
        }
    }

    fn calibration_n(self) -> usize {
        match self {
            Scale::Desk => DESK_CALIBRATION_N,
            Scale::Full => DEFAULT_CALIBRATION_N,
        }
    }

    fn histogram_draws(self) -> usize {
        match self {
            Scale::Desk => 1_000_000,
            Scale::Full => 10_000_000,
        }
    }

    fn resample_samples(self) -> usize {
        match self {
            Scale::Desk => 10_000,
            Scale::Full => 50_000,
        }
    }

    fn eigen_samples(self) -> usize {
        match self {
            Scale::Desk => 5_000,
            Scale::Full => 50_000,
        }
    }
}

macro_rules! overlay {
    ($ty:ident { $($f:ident),* $(,)? }) => {
        impl $ty {
            /// Field-wise merge; values set in `over` win.
            pub fn overlay(self, over: Self) -> Self {
                Self { $($f: over.$f.or(self.$f)),* }
            }
        }
    };
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimPreset {
    /// Normal, R_p = .2
    Fig2,
    /// Normal, R_p = .2, desk replications regardless of scale
    Fig2Desk,
    /// Exponential marginals, R_p = .4
    Fig4,
    /// Normal, R_p = 0
    FigS3,
    /// Normal, R_p = .4
    FigS4,
    /// Normal, R_p = .8
    FigS5,
    /// Chi-square marginals with 1, 2 and 32 df, R_p = .4
    FigS6,
    /// 1000 exponential pairs at R_p = .2, no simulation
    FigS10,
    /// Exponential marginals, R_p = .2
    FigS11,
    /// 1000 exponential pairs at R_p = .8, no simulation
    FigS12,
    /// Exponential marginals, R_p = .8
    FigS13,
    /// Normal, R_p = .2, Pearson against Kendall
    FigS16,
}

impl SimPreset {
    // (label, marginal, R_p)
    fn conditions(self) -> Vec<(&'static str, &'static str, f64)> {
        use SimPreset::*;
        match self {
            Fig2 | Fig2Desk => vec![("normal_rp0.2", "normal", 0.2)],
            FigS16 => vec![("normal_rp0.2_kendall", "normal", 0.2)],
            FigS3 => vec![("normal_rp0", "normal", 0.0)],
            FigS4 => vec![("normal_rp0.4", "normal", 0.4)],
            FigS5 => vec![("normal_rp0.8", "normal", 0.8)],
            Fig4 => vec![("exponential_rp0.4", "exponential", 0.4)],
            FigS10 | FigS11 => vec![("exponential_rp0.2", "exponential", 0.2)],
            FigS12 | FigS13 => vec![("exponential_rp0.8", "exponential", 0.8)],
            FigS6 => vec![
                ("chi2_df1_rp0.4", "chi2:1", 0.4),
                ("chi2_df2_rp0.4", "chi2:2", 0.4),
                ("chi2_df32_rp0.4", "chi2:32", 0.4),
            ],
        }
    }

    fn kinds(self) -> Vec<CorrelationKind> {
        match self {
            SimPreset::FigS16 => vec![CorrelationKind::Pearson, CorrelationKind::Kendall],
            _ => vec![CorrelationKind::Pearson, CorrelationKind::Spearman],
        }
    }

    fn replications(self, scale: Scale) -> usize {
        match self {
            SimPreset::FigS10 | SimPreset::FigS12 => 0,
            SimPreset::Fig2Desk => DESK_REPLICATIONS,
            _ => scale.replications(),
        }
    }

    fn scatter(self) -> Option<usize> {
        matches!(self, SimPreset::FigS10 | SimPreset::FigS12).then_some(1000)
    }
}

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    /// Study preset; explicit flags override its settings
    #[arg(long, value_enum)]
    pub preset: Option<SimPreset>,
    /// Target population Pearson correlation
    #[arg(long, allow_hyphen_values = true)]
    pub rp: Option<f64>,
    /// Marginal of both variables: normal, exponential, uniform, chi2:DF, likert[:T1,..,T5]
    #[arg(long)]
    pub marginals: Option<String>,
    /// Marginal of x (overrides --marginals)
    #[arg(long)]
    pub marginal_x: Option<String>,
    /// Marginal of y (overrides --marginals)
    #[arg(long)]
    pub marginal_y: Option<String>,
    /// Comma-separated sample sizes (default: 25 log-spaced sizes from 5 to 1000)
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    /// Replications per sample size; 0 skips the simulation
    #[arg(long)]
    pub replications: Option<usize>,
    /// Comma-separated coefficients: pearson, spearman, kendall
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<CorrelationKind>>,
    /// Pairs used to calibrate non-normal populations
    #[arg(long)]
    pub calibration_n: Option<usize>,
    /// Label for the condition column
    #[arg(long)]
    pub condition: Option<String>,
    /// Also write this many pairs drawn from each population
    #[arg(long)]
    pub scatter: Option<usize>,
}

overlay!(SimulateArgs { preset, rp, marginals, marginal_x, marginal_y, sizes, replications, kinds, calibration_n, condition, scatter });

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityPreset {
    /// R_p ∈ {.2, .4, .8} × N ∈ {5, 50}
    Fig1,
    /// R_p = .2, N = 5 with a Monte Carlo histogram
    FigS2,
}

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityArgs {
    #[arg(long, value_enum)]
    pub preset: Option<DensityPreset>,
    /// Comma-separated population correlations
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub rp: Option<Vec<f64>>,
    /// Comma-separated sample sizes (at least 4)
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Grid points on (−1, 1)
    #[arg(long)]
    pub points: Option<usize>,
    /// Simulated samples for a histogram of r_p and r_s; 0 disables it
    #[arg(long)]
    pub histogram_draws: Option<usize>,
    /// Histogram bin width
    #[arg(long)]
    pub bin_width: Option<f64>,
}

overlay!(DensityArgs { preset, rp, n, points, histogram_draws, bin_width });

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticPopulation {
    /// Ten near-normal, strongly intercorrelated scores
    AsvabLike,
    /// 34 heavy-tailed six-point items
    DbqLike,
    /// Five sum scales over the dbq-like items
    DbqScales,
}

macro_rules! data_args {
    ($(#[$m:meta])* pub struct $name:ident { $($extra:tt)* }) => {
        $(#[$m])*
        #[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $name {
            /// Delimited text file with a header row
            #[arg(long, value_name = "FILE")]
            pub input: Option<PathBuf>,
            /// Built-in synthetic population instead of --input
            #[arg(long, value_enum)]
            pub synthetic: Option<SyntheticPopulation>,
            /// Rows of the synthetic population
            #[arg(long)]
            pub rows: Option<usize>,
            /// Seed of the synthetic population (independent of --seed)
            #[arg(long)]
            pub population_seed: Option<u64>,
            /// TOML file of [[scale]] tables (name, columns) to sum before analysis
            #[arg(long, value_name = "FILE")]
            pub scales: Option<PathBuf>,
            /// Field delimiter of --input
            #[arg(long)]
            pub delimiter: Option<char>,
            $($extra)*
        }
    };
}

data_args!(
    pub struct MomentsArgs {
        /// Also write the analysed dataset
        #[arg(long, num_args = 0..=1, default_missing_value = "true")]
        pub write_data: Option<bool>,
    }
);
overlay!(MomentsArgs { input, synthetic, rows, population_seed, scales, delimiter, write_data });

data_args!(
    pub struct ResampleArgs {
        /// Rows per bootstrap sample
        #[arg(long)]
        pub sample_size: Option<usize>,
        /// Number of bootstrap samples
        #[arg(long)]
        pub samples: Option<usize>,
    }
);
overlay!(ResampleArgs { input, synthetic, rows, population_seed, scales, delimiter, sample_size, samples });

data_args!(
    pub struct EigenArgs {
        /// Rows per bootstrap sample
        #[arg(long)]
        pub sample_size: Option<usize>,
        /// Number of bootstrap samples
        #[arg(long)]
        pub samples: Option<usize>,
        /// Leading eigenvalues to report
        #[arg(long)]
        pub k: Option<usize>,
    }
);
overlay!(EigenArgs { input, synthetic, rows, population_seed, scales, delimiter, sample_size, samples, k });

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfluencePreset {
    /// Normal base sample, R_p = .2, N = 200, one outlier
    Fig5,
}

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfluenceArgs {
    #[arg(long, value_enum)]
    pub preset: Option<InfluencePreset>,
    /// Population correlation of a generated normal base sample
    #[arg(long, allow_hyphen_values = true)]
    pub rp: Option<f64>,
    /// Size of the generated base sample
    #[arg(long)]
    pub n: Option<usize>,
    /// Read the base sample from this file instead
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Column of --input used as x (default: first)
    #[arg(long)]
    pub x: Option<String>,
    /// Column of --input used as y (default: second)
    #[arg(long)]
    pub y: Option<String>,
    /// Grid start
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    /// Grid end
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
    /// Grid spacing
    #[arg(long)]
    pub step: Option<f64>,
    /// Fixed first outlier "X,Y"; the grid then scans a second one
    #[arg(long, allow_hyphen_values = true)]
    pub first_outlier: Option<String>,
    /// Comma-separated |delta| thresholds for exceedance fractions
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
}

overlay!(InfluenceArgs { preset, rp, n, input, x, y, lo, hi, step, first_outlier, thresholds });

#[derive(Args, Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvertArgs {
    /// Population Pearson correlation
    #[arg(long, allow_hyphen_values = true)]
    pub rp: Option<f64>,
    /// Population Spearman correlation
    #[arg(long, allow_hyphen_values = true)]
    pub rs: Option<f64>,
    /// Population Kendall tau
    #[arg(long, allow_hyphen_values = true)]
    pub rt: Option<f64>,
    /// Also print the expected sample r_p and r_s at this N
    #[arg(long)]
    pub n: Option<usize>,
}

overlay!(ConvertArgs { rp, rs, rt, n });

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    out: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
    scale: Option<Scale>,
    simulate: Option<SimulateArgs>,
    density: Option<DensityArgs>,
    moments: Option<MomentsArgs>,
    influence: Option<InfluenceArgs>,
    resample: Option<ResampleArgs>,
    eigen: Option<EigenArgs>,
    convert: Option<ConvertArgs>,
}

fn read_config_file(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e.message())))
}

/// Global settings after merging file, flags and defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub out: PathBuf,
    pub seed: u64,
    pub scale: Scale,
    pub threads: Option<usize>,
    pub command: Command,
}

/// Merges the config file (if any) under the parsed flags.
pub fn resolve(cli: Cli) -> CliResult<Resolved> {
    let file = match &cli.global.config {
        Some(p) => read_config_file(p)?,
        None => FileConfig::default(),
    };
    let g = cli.global;
    let command = match cli.command {
        Command::Simulate(a) => Command::Simulate(file.simulate.unwrap_or_default().overlay(a)),
        Command::Density(a) => Command::Density(file.density.unwrap_or_default().overlay(a)),
        Command::Moments(a) => Command::Moments(file.moments.unwrap_or_default().overlay(a)),
        Command::Influence(a) => Command::Influence(file.influence.unwrap_or_default().overlay(a)),
        Command::Resample(a) => Command::Resample(file.resample.unwrap_or_default().overlay(a)),
        Command::Eigen(a) => Command::Eigen(file.eigen.unwrap_or_default().overlay(a)),
        Command::Convert(a) => Command::Convert(file.convert.unwrap_or_default().overlay(a)),
    };
    let out = g
        .out
        .or(file.out)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    Ok(Resolved {
        out,
        seed: g.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        scale: g.scale.or(file.scale).unwrap_or_default(),
        threads: g.threads.or(file.threads),
        command,
    })
}

/// Files produced by one run, written only after every computation succeeded.
struct Artifacts {
    header: String,
    hash: String,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new(command: &str, echo: &str) -> Self {
        let digest = Sha256::digest(echo.as_bytes());
        let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
        let mut a = Self {
            header: format!("# corrkit {command} config-sha256={hash}\n"),
            hash,
            files: Vec::new(),
        };
        let mut body = a.header.clone().into_bytes();
        body.extend_from_slice(echo.as_bytes());
        a.files.push((CONFIG_ECHO.to_owned(), body));
        a
    }

    fn text(&mut self, name: impl Into<String>, write: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> CliResult<()> {
        let mut body = self.header.clone().into_bytes();
        write(&mut body)?;
        self.files.push((name.into(), body));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, command: &str, value: &T) -> CliResult<()> {
        let doc = serde_json::json!({
            "config_hash": self.hash,
            "command": command,
            "result": value,
        });
        let mut body = serde_json::to_vec_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        body.push(b'\n');
        self.files.push((name.to_owned(), body));
        Ok(())
    }

    fn commit(self, dir: &Path) -> CliResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let mut written = Vec::new();
        for (name, body) in self.files {
            let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
            tmp.write_all(&body)?;
            tmp.as_file().sync_all()?;
            let dest = dir.join(&name);
            tmp.persist(&dest).map_err(|e| CliError::Io(e.to_string()))?;
            written.push(dest);
        }
        Ok(written)
    }
}

/// Resolved-config text; echoed to the output directory and hashed.
fn echo_config<T: Serialize>(section: &str, args: &T, r: &Resolved) -> CliResult<String> {
    let mut table = toml::Table::new();
    table.insert("seed".into(), toml::Value::Integer(r.seed as i64));
    table.insert(
        "scale".into(),
        toml::Value::String(match r.scale {
            Scale::Desk => "desk".into(),
            Scale::Full => "full".into(),
        }),
    );
    let v = toml::Value::try_from(args).map_err(|e| CliError::Io(e.to_string()))?;
    table.insert(section.into(), v);
    toml::to_string(&table).map_err(|e| CliError::Io(e.to_string()))
}

fn check_corr(name: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v.abs() <= 1.0 {
        Ok(())
    } else {
        usage(format!("--{name} must lie in [-1, 1], got {v}"))
    }
}

fn parse_marginal(text: &str) -> CliResult<MarginalSpec> {
    text.parse::<MarginalSpec>()
        .map_err(|e| CliError::Usage(format!("marginal `{text}`: {e}")))
}

struct Condition {
    label: String,
    mx: MarginalSpec,
    my: MarginalSpec,
    rp: f64,
}

fn simulate(mut a: SimulateArgs, r: &Resolved) -> CliResult<Artifacts> {
    let preset = a.preset;
    if preset.is_none() && a.rp.is_none() {
        return usage("simulate needs --rp or --preset");
    }
    if let Some(v) = a.rp {
        check_corr("rp", v)?;
    }
    a.replications
        .get_or_insert(preset.map_or(r.scale.replications(), |p| p.replications(r.scale)));
    a.calibration_n.get_or_insert(r.scale.calibration_n());
    if a.sizes.is_none() {
        a.sizes = Some(logspace_sizes(5, 1000, 25)?);
    }
    if a.kinds.is_none() {
        a.kinds = Some(preset.map_or(vec![CorrelationKind::Pearson, CorrelationKind::Spearman], |p| p.kinds()));
    }
    if a.scatter.is_none() {
        a.scatter = preset.and_then(|p| p.scatter());
    }
    let echo = echo_config("simulate", &a, r)?;

    let base: Vec<(String, String, f64)> = match preset {
        Some(p) => p
            .conditions()
            .into_iter()
            .map(|(l, m, rp)| (l.to_owned(), m.to_owned(), rp))
            .collect(),
        None => vec![(String::new(), "normal".to_owned(), 0.0)],
    };
    let single = base.len() == 1;
    let mut conditions = Vec::new();
    for (label, marg, rp) in base {
        let rp = a.rp.unwrap_or(rp);
        let both = a.marginals.clone().unwrap_or(marg);
        let mx = parse_marginal(a.marginal_x.as_deref().unwrap_or(&both))?;
        let my = parse_marginal(a.marginal_y.as_deref().unwrap_or(&both))?;
        let label = match (&a.condition, single) {
            (Some(c), true) => c.clone(),
            _ if label.is_empty() || a.rp.is_some() || a.marginals.is_some() || a.marginal_x.is_some() || a.marginal_y.is_some() => {
                if mx == my {
                    format!("{mx}_rp{rp}")
                } else {
                    format!("{mx}_{my}_rp{rp}")
                }
            }
            _ => label,
        };
        conditions.push(Condition { label, mx, my, rp });
    }

    let replications = a.replications.unwrap_or_default();
    let calibration_n = a.calibration_n.unwrap_or_default();
    let kinds = a.kinds.clone().unwrap_or_default();
    let sizes = a.sizes.clone().unwrap_or_default();
    if replications == 0 && a.scatter.is_none() {
        return usage("--replications 0 only makes sense with --scatter");
    }

    let mut art = Artifacts::new("simulate", &echo);
    let mut sim_csv = Vec::new();
    let mut ratio_csv = Vec::new();
    let mut populations = Vec::new();
    let root = RngStream::new(r.seed);
    for (i, c) in conditions.iter().enumerate() {
        let pop = if c.mx.is_standard_normal() && c.my.is_standard_normal() {
            PopulationSpec::normal(c.rp)?
        } else {
            calibrate_copula(
                c.mx.clone(),
                c.my.clone(),
                c.rp,
                calibration_n,
                &root.child(CALIBRATION_STREAM).child(i as u64),
            )?
        };
        let mut redraws = 0;
        if replications > 0 {
            let plan = SimulationPlan {
                condition: c.label.clone(),
                population: pop.clone(),
                sample_sizes: sizes.clone(),
                replications,
                kinds: kinds.clone(),
                master_seed: r.seed.wrapping_add(i as u64),
            };
            let table = run_plan(&plan)?;
            redraws = table.cells.iter().map(|c| c.redraw_count as u64).sum::<u64>();
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            append_skipping_header(&mut sim_csv, &buf, i == 0);
            let mut buf = Vec::new();
            table.write_ratio_csv(&mut buf)?;
            append_skipping_header(&mut ratio_csv, &buf, i == 0);
        }
        if let Some(n) = a.scatter {
            let s = sample_population(&pop, n, &root.child(SCATTER_STREAM).child(i as u64))?;
            art.text(format!("scatter_{}.csv", c.label), |w| write_pairs(w, &s))?;
        }
        populations.push(serde_json::json!({
            "condition": c.label,
            "population": pop,
            "redraw_count": redraws,
        }));
    }
    if replications > 0 {
        art.text("simulation.csv", |w| w.write_all(&sim_csv))?;
        art.text("ratios.csv", |w| w.write_all(&ratio_csv))?;
    }
    art.json("summary.json", "simulate", &populations)?;
    Ok(art)
}

fn append_skipping_header(dst: &mut Vec<u8>, src: &[u8], keep_header: bool) {
    if keep_header {
        dst.extend_from_slice(src);
    } else if let Some(pos) = src.iter().position(|&b| b == b'\n') {
        dst.extend_from_slice(&src[pos + 1..]);
    }
}

fn write_pairs(w: &mut Vec<u8>, s: &PairedSample) -> std::io::Result<()> {
    writeln!(w, "x,y")?;
    for (x, y) in s.x().iter().zip(s.y()) {
        writeln!(w, "{x},{y}")?;
    }
    Ok(())
}

const DENSITY_EDGE: f64 = 1e-6;

fn density(mut a: DensityArgs, r: &Resolved) -> CliResult<Artifacts> {
    match a.preset {
        Some(DensityPreset::Fig1) => {
            a.rp.get_or_insert_with(|| vec![0.2, 0.4, 0.8]);
            a.n.get_or_insert_with(|| vec![5, 50]);
        }
        Some(DensityPreset::FigS2) => {
            a.rp.get_or_insert_with(|| vec![0.2]);
            a.n.get_or_insert_with(|| vec![5]);
            a.histogram_draws.get_or_insert(r.scale.histogram_draws());
        }
        None => {}
    }
    let (Some(rps), Some(ns)) = (a.rp.clone(), a.n.clone()) else {
        return usage("density needs --rp and --n (or --preset)");
    };
    for &v in &rps {
        check_corr("rp", v)?;
    }
    let points = *a.points.get_or_insert(2001);
    let bin_width = *a.bin_width.get_or_insert(0.01);
    let draws = *a.histogram_draws.get_or_insert(0);
    let echo = echo_config("density", &a, r)?;
    let mut art = Artifacts::new("density", &echo);
    let mut summary = Vec::new();
    let root = RngStream::new(r.seed).child(HISTOGRAM_STREAM);
    let mut idx = 0u64;
    for &rho in &rps {
        for &n in &ns {
            let params = NormalTheoryParams::new(rho, n);
            let d = RpDensity::new(params)?;
            let curve = d.curve(points, DENSITY_EDGE)?;
            let tag = format!("rp{rho}_n{n}");
            art.text(format!("density_{tag}.csv"), |w| {
                writeln!(w, "r,density")?;
                for (x, y) in curve.grid.iter().zip(&curve.density) {
                    writeln!(w, "{x},{y}")?;
                }
                Ok(())
            })?;
            if draws > 0 {
                let h = sampling_histogram(rho, n, draws, bin_width, &root.child(idx))?;
                let exact_p = h
                    .edges
                    .windows(2)
                    .map(|e| d.probability(e[0], e[1]))
                    .collect::<crate::Result<Vec<_>>>()?;
                art.text(format!("histogram_{tag}.csv"), |w| {
                    writeln!(w, "bin_lo,bin_hi,pearson_fraction,spearman_fraction,exact_rp_probability")?;
                    for (k, e) in h.edges.windows(2).enumerate() {
                        writeln!(
                            w,
                            "{},{},{},{},{}",
                            e[0],
                            e[1],
                            h.pearson_counts[k] as f64 / draws as f64,
                            h.spearman_counts[k] as f64 / draws as f64,
                            exact_p[k]
                        )?;
                    }
                    Ok(())
                })?;
            }
            idx += 1;
            summary.push(serde_json::json!({
                "rp": rho,
                "n": n,
                "integral": curve.trapezoid_integral(),
                "mode": curve.mode(),
                "expected_rp": exact::expected_rp(params)?,
                "expected_rs": exact::expected_rs(params)?,
                "population_rs": exact::rs_from_rp(rho)?,
            }));
        }
    }
    art.json("summary.json", "density", &summary)?;
    Ok(art)
}

struct DataSource<'a> {
    input: &'a Option<PathBuf>,
    synthetic: Option<SyntheticPopulation>,
    rows: Option<usize>,
    population_seed: u64,
    scales: &'a Option<PathBuf>,
    delimiter: Option<char>,
}

fn load_dataset(src: DataSource<'_>) -> CliResult<(PopulationDataset, usize)> {
    let (mut data, dropped) = match (src.input, src.synthetic) {
        (Some(_), Some(_)) => return usage("give either --input or --synthetic, not both"),
        (None, None) => return usage("a dataset is required: --input FILE or --synthetic NAME"),
        (Some(path), None) => {
            let mut opts = IngestOptions::default();
            if let Some(d) = src.delimiter {
                if !d.is_ascii() {
                    return usage("delimiter must be an ASCII character");
                }
                opts.delimiter = d as u8;
            }
            let got = ingest_csv(path, &opts)?;
            (got.dataset, got.dropped_rows)
        }
        (None, Some(kind)) => {
            let d = match kind {
                SyntheticPopulation::AsvabLike => {
                    synthetic::asvab_like(src.rows.unwrap_or(synthetic::ASVAB_LIKE_ROWS), src.population_seed)?
                }
                SyntheticPopulation::DbqLike | SyntheticPopulation::DbqScales => {
                    let items =
                        synthetic::dbq_like(src.rows.unwrap_or(synthetic::DBQ_LIKE_ROWS), src.population_seed)?;
                    if kind == SyntheticPopulation::DbqScales {
                        scale_sums(&items, &synthetic::dbq_scale_groups())?
                    } else {
                        items
                    }
                }
            };
            (d, 0)
        }
    };
    if let Some(path) = src.scales {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        data = scale_sums(&data, &parse_scale_groups(&text)?)?;
    }
    Ok((data, dropped))
}

macro_rules! data_source {
    ($a:expr) => {
        DataSource {
            input: &$a.input,
            synthetic: $a.synthetic,
            rows: $a.rows,
            population_seed: $a.population_seed.unwrap_or(1),
            scales: &$a.scales,
            delimiter: $a.delimiter,
        }
    };
}

fn moments(mut a: MomentsArgs, r: &Resolved) -> CliResult<Artifacts> {
    a.population_seed.get_or_insert(1);
    let write_data = *a.write_data.get_or_insert(false);
    let echo = echo_config("moments", &a, r)?;
    let (data, dropped) = load_dataset(data_source!(a))?;
    let profile = moment_profile(&data);
    let mut art = Artifacts::new("moments", &echo);
    art.text("moments.csv", |w| profile.write_csv(w))?;
    if write_data {
        let mut buf = Vec::new();
        data.write_csv(&mut buf)?;
        art.text("population.csv", |w| w.write_all(&buf))?;
    }
    art.json(
        "summary.json",
        "moments",
        &serde_json::json!({ "rows": data.n_rows(), "dropped_rows": dropped, "profile": profile }),
    )?;
    Ok(art)
}

fn parse_point(text: &str) -> CliResult<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [x, y] => match (x.parse(), y.parse()) {
            (Ok(x), Ok(y)) => Ok((x, y)),
            _ => usage(format!("point `{text}` is not two numbers")),
        },
        _ => usage(format!("point `{text}` must be written X,Y")),
    }
}

fn influence(mut a: InfluenceArgs, r: &Resolved) -> CliResult<Artifacts> {
    if a.preset == Some(InfluencePreset::Fig5) {
        a.rp.get_or_insert(0.2);
        a.n.get_or_insert(200);
    }
    let axis = AxisSpec {
        lo: *a.lo.get_or_insert(-5.0),
        hi: *a.hi.get_or_insert(5.0),
        step: *a.step.get_or_insert(0.05),
    };
    let thresholds = a.thresholds.get_or_insert_with(|| vec![0.05]).clone();
    let base = match (&a.input, a.rp) {
        (Some(_), Some(_)) => return usage("give either --input or --rp, not both"),
        (None, None) => return usage("influence needs --rp (with --n), --input or --preset"),
        (Some(path), None) => {
            let got = ingest_csv(path, &IngestOptions::default())?;
            let d = got.dataset;
            let pick = |name: &Option<String>, default: usize| -> CliResult<usize> {
                match name {
                    Some(n) => d.column_index(n).ok_or_else(|| CliError::Usage(format!("no column `{n}`"))),
                    None if default < d.n_cols() => Ok(default),
                    None => usage("input needs two columns"),
                }
            };
            let (ix, iy) = (pick(&a.x, 0)?, pick(&a.y, 1)?);
            PairedSample::new(d.columns()[ix].clone(), d.columns()[iy].clone())?
        }
        (None, Some(rho)) => {
            check_corr("rp", rho)?;
            let n = *a.n.get_or_insert(200);
            sample_bivariate_normal(rho, n, &RngStream::new(r.seed).child(BASE_STREAM))?
        }
    };
    let echo = echo_config("influence", &a, r)?;
    let grid = match &a.first_outlier {
        Some(p) => scan_double(&base, parse_point(p)?, &axis)?,
        None => scan_single(&base, &axis)?,
    };
    let summary: InfluenceSummary = grid.summary(&thresholds);
    let mut art = Artifacts::new("influence", &echo);
    art.text("influence.csv", |w| grid.write_csv(w))?;
    art.text("base.csv", |w| write_pairs(w, &base))?;
    art.json("summary.json", "influence", &summary)?;
    Ok(art)
}

fn resample(mut a: ResampleArgs, r: &Resolved) -> CliResult<Artifacts> {
    a.population_seed.get_or_insert(1);
    let cfg = StudyConfig {
        sample_size: *a.sample_size.get_or_insert(200),
        n_samples: *a.samples.get_or_insert(r.scale.resample_samples()),
        master_seed: r.seed,
    };
    let echo = echo_config("resample", &a, r)?;
    let (data, dropped) = load_dataset(data_source!(a))?;
    let result = run_study(&data, &cfg)?;
    let mut art = Artifacts::new("resample", &echo);
    art.text("summary.csv", |w| result.write_summary_csv(w))?;
    art.text("pairs.csv", |w| result.write_pairs_csv(w))?;
    art.json(
        "summary.json",
        "resample",
        &serde_json::json!({
            "dropped_rows": dropped,
            "n_rows": result.n_rows,
            "n_cols": result.n_cols,
            "redraw_count": result.redraw_count,
            "grand": result.grand,
        }),
    )?;
    Ok(art)
}

fn eigen(mut a: EigenArgs, r: &Resolved) -> CliResult<Artifacts> {
    a.population_seed.get_or_insert(1);
    let cfg = StudyConfig {
        sample_size: *a.sample_size.get_or_insert(200),
        n_samples: *a.samples.get_or_insert(r.scale.eigen_samples()),
        master_seed: r.seed,
    };
    let k_req = *a.k.get_or_insert(6);
    let echo = echo_config("eigen", &a, r)?;
    let (data, _) = load_dataset(data_source!(a))?;
    let summary = eigen_study(&data, &cfg, k_req.min(data.n_cols()))?;
    let mut art = Artifacts::new("eigen", &echo);
    art.text("eigen.csv", |w| summary.write_csv(w))?;
    art.json("summary.json", "eigen", &summary)?;
    Ok(art)
}

/// Conversion lines printed by `convert`.
pub fn convert_lines(a: &ConvertArgs) -> CliResult<Vec<String>> {
    let given = [a.rp.is_some(), a.rs.is_some(), a.rt.is_some()].iter().filter(|&&b| b).count();
    if given != 1 {
        return usage("convert needs exactly one of --rp, --rs, --rt");
    }
    for (name, v) in [("rp", a.rp), ("rs", a.rs), ("rt", a.rt)] {
        if let Some(v) = v {
            check_corr(name, v)?;
        }
    }
    let rp = if let Some(v) = a.rp {
        v
    } else if let Some(v) = a.rs {
        exact::rp_from_rs(v)?
    } else {
        (std::f64::consts::FRAC_PI_2 * a.rt.unwrap_or_default()).sin()
    };
    let mut lines = vec![
        format!("R_p={rp:.4}"),
        format!("R_s={:.4}", exact::rs_from_rp(rp)?),
        format!("R_t={:.4}", exact::rt_from_rp(rp)?),
    ];
    if let Some(n) = a.n {
        let p = NormalTheoryParams::new(rp, n);
        lines.push(format!("E(r_p)={:.4}", exact::expected_rp(p)?));
        lines.push(format!("E(r_s)={:.4}", exact::expected_rs(p)?));
    }
    Ok(lines)
}

/// Runs a resolved command; returns the files written.
pub fn dispatch(r: Resolved) -> CliResult<Vec<PathBuf>> {
    if let Some(t) = r.threads {
        if t == 0 {
            return usage("--threads must be at least 1");
        }
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let art = match r.command.clone() {
        Command::Convert(a) => {
            for line in convert_lines(&a)? {
                println!("{line}");
            }
            return Ok(Vec::new());
        }
        Command::Simulate(a) => simulate(a, &r)?,
        Command::Density(a) => density(a, &r)?,
        Command::Moments(a) => moments(a, &r)?,
        Command::Influence(a) => influence(a, &r)?,
        Command::Resample(a) => resample(a, &r)?,
        Command::Eigen(a) => eigen(a, &r)?,
    };
    art.commit(&r.out)
}

/// Entry point of the `corrkit` binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match resolve(cli).and_then(dispatch) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("corrkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
