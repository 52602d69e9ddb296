//! Command-line front end.
//!
//! Settings resolve as flags, then the `--manifest` JSON file, then defaults.
//! The resolved manifest is echoed next to the primary artifact
//! (`<out>.resolved.json`) or, without `--out`, to stderr.
//!
//! Sub-seeds come from [`derive_seed`] with the counters below.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bounds::{robust_confidence, BoundResult};
use crate::christoffel::{ChristoffelModel, FitOptions, TransductiveContext};
use crate::conformal::{calibrate, calibrate_robust, transductive_p_value, ReachSetEstimate, Region, SamplePartition, TransductiveRegion};
use crate::error::{Error, Result};
use crate::evaluation::{coverage_trials, derive_seed, export_grid, false_positive_rate, GridKind, TrialConfig, TrialMode};
use crate::monomials::MonomialBasis;
use crate::systems::{read_points_csv, Aabb, BenchmarkSystem, DuffingParams, LabeledDataset};

pub const SEED_DATA: u64 = 0;
pub const SEED_SPLIT: u64 = 1;
pub const SEED_OUTLIERS: u64 = 2;
pub const SEED_EVAL: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SystemChoice {
    FourSquares,
    UnitSquare,
    Star,
    Duffing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModeChoice {
    Split,
    Robust,
    Transductive,
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentManifest {
    pub system: SystemChoice,
    pub duffing: DuffingParams,
    /// M
    pub total_samples: usize,
    /// N
    pub calibration_size: usize,
    pub degree: usize,
    pub mode: ModeChoice,
    pub delta: f64,
    pub epsilon: Option<f64>,
    pub p: Option<usize>,
    pub seed: u64,
    pub rescale: bool,
    pub ridge: f64,
    pub outlier_fraction: f64,
    pub outlier_box: Option<Aabb>,
    /// Evaluation box for false-positive rates and grids.
    pub domain: Option<Aabb>,
    pub repetitions: usize,
    pub eval_samples: usize,
    pub fp_samples: usize,
    pub resolution: usize,
}

impl Default for ExperimentManifest {
    fn default() -> Self {
        Self {
            system: SystemChoice::FourSquares,
            duffing: DuffingParams::default(),
            total_samples: 10_000,
            calibration_size: 2_000,
            degree: 10,
            mode: ModeChoice::Split,
            delta: 0.01,
            epsilon: None,
            p: None,
            seed: 0,
            rescale: true,
            ridge: 0.0,
            outlier_fraction: 0.0,
            outlier_box: None,
            domain: None,
            repetitions: 100,
            eval_samples: 10_000,
            fp_samples: 100_000,
            resolution: 200,
        }
    }
}

impl ExperimentManifest {
    pub fn benchmark(&self) -> BenchmarkSystem {
        match self.system {
            SystemChoice::FourSquares => BenchmarkSystem::four_squares(),
            SystemChoice::UnitSquare => BenchmarkSystem::unit_square(),
            SystemChoice::Star => BenchmarkSystem::star_region(),
            SystemChoice::Duffing => BenchmarkSystem::duffing(self.duffing),
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            rescale: self.rescale,
            ridge: self.ridge,
            ..FitOptions::default()
        }
    }

    pub fn resolved_domain(&self) -> Aabb {
        self.domain.clone().unwrap_or_else(|| match self.system {
            SystemChoice::FourSquares => Aabb::cube(2, -4.0, 4.0),
            SystemChoice::UnitSquare | SystemChoice::Star => Aabb::cube(2, -2.0, 2.0),
            SystemChoice::Duffing => Aabb::cube(2, -3.0, 3.0),
        })
    }

    pub fn resolved_outlier_box(&self) -> Aabb {
        self.outlier_box.clone().unwrap_or_else(|| self.resolved_domain())
    }

    /// Mode-specific checks, run before any computation.
    pub fn validate(&self) -> Result<()> {
        self.benchmark().validate()?;
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidParameter("outlier_fraction must lie in [0,1)".into()));
        }
        if self.ridge < 0.0 || !self.ridge.is_finite() {
            return Err(Error::InvalidParameter("ridge must be finite and non-negative".into()));
        }
        match self.mode {
            ModeChoice::Robust => {
                let p = self.p.ok_or_else(|| Error::InvalidParameter("robust mode needs p".into()))?;
                let eps = self.epsilon.ok_or_else(|| Error::InvalidParameter("robust mode needs epsilon".into()))?;
                robust_confidence(self.calibration_size, p, eps)?;
            }
            ModeChoice::Split | ModeChoice::Transductive => {}
        }
        if self.mode != ModeChoice::Transductive && self.calibration_size >= self.total_samples {
            return Err(Error::InvalidParameter(format!(
                "need total_samples > calibration_size, got M={}, N={}",
                self.total_samples, self.calibration_size
            )));
        }
        self.resolved_domain().validate()?;
        self.resolved_outlier_box().validate()
    }

    pub fn trial_config(&self) -> Result<TrialConfig> {
        let mode = match self.mode {
            ModeChoice::Split => TrialMode::Split { delta: self.delta },
            ModeChoice::Robust => TrialMode::Robust {
                p: self.p.unwrap_or(0),
                epsilon: self.epsilon.unwrap_or(0.0),
                outlier_fraction: self.outlier_fraction,
                outlier_box: self.resolved_outlier_box(),
            },
            ModeChoice::Transductive => {
                return Err(Error::InvalidParameter("coverage trials support split and robust modes".into()))
            }
        };
        Ok(TrialConfig {
            system: self.benchmark(),
            total_samples: self.total_samples,
            calibration_size: self.calibration_size,
            degree: self.degree,
            mode,
            eval_samples: self.eval_samples,
            fit: self.fit_options(),
        })
    }

    /// Sample the dataset, with outliers when the fraction is positive.
    pub fn dataset(&self) -> Result<LabeledDataset> {
        let system = self.benchmark();
        let data = system.sample_reach_set(self.total_samples, derive_seed(self.seed, SEED_DATA))?;
        if self.outlier_fraction > 0.0 {
            data.inject_outliers(
                &system,
                self.outlier_fraction,
                &self.resolved_outlier_box(),
                derive_seed(self.seed, SEED_OUTLIERS),
            )
        } else {
            Ok(data)
        }
    }

    fn basis(&self) -> Result<MonomialBasis> {
        MonomialBasis::new(self.benchmark().dimension(), self.degree)
    }

    fn calibrate_with(&self, model: ChristoffelModel, calibration: &[Vec<f64>]) -> Result<ReachSetEstimate> {
        match self.mode {
            ModeChoice::Robust => calibrate_robust(model, calibration, self.p.unwrap_or(0), self.epsilon.unwrap_or(0.0)),
            _ => calibrate(model, calibration, self.delta),
        }
    }

    /// Split `points`, fit on the training part and calibrate.
    pub fn estimate_from(&self, points: &[Vec<f64>]) -> Result<ReachSetEstimate> {
        let part = SamplePartition::split(points, None, self.calibration_size, derive_seed(self.seed, SEED_SPLIT))?;
        let model = ChristoffelModel::fit(&part.training, self.basis()?, self.fit_options())?;
        self.calibrate_with(model, &part.calibration)
    }

    pub fn transductive_from(&self, points: &[Vec<f64>]) -> Result<TransductiveRegion> {
        let ctx = TransductiveContext::new(points, self.basis()?, self.fit_options())?;
        TransductiveRegion::new(ctx, self.delta)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentFlags {
    /// JSON manifest; flags override its values.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub system: Option<SystemChoice>,
    /// Dataset size M.
    #[arg(long = "M", global = true)]
    pub total_samples: Option<usize>,
    /// Calibration size N.
    #[arg(long = "N", global = true)]
    pub calibration_size: Option<usize>,
    #[arg(long, short = 'd', global = true)]
    pub degree: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeChoice>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Coverage error; `bounds robust-table` takes a comma list.
    #[arg(long = "eps", global = true, value_delimiter = ',')]
    pub epsilon: Vec<f64>,
    #[arg(long, global = true)]
    pub p: Option<usize>,
    #[arg(long, global = true)]
    pub rescale: Option<bool>,
    #[arg(long, global = true)]
    pub ridge: Option<f64>,
    #[arg(long = "outlier-frac", global = true)]
    pub outlier_fraction: Option<f64>,
    /// Outlier box as `lo,hi` per axis, e.g. `-4,4,-4,4`.
    #[arg(long = "outlier-box", global = true)]
    pub outlier_box: Option<String>,
    /// Evaluation box, same format as `--outlier-box`.
    #[arg(long, global = true)]
    pub domain: Option<String>,
    #[arg(long, global = true)]
    pub repetitions: Option<usize>,
    #[arg(long = "eval-samples", global = true)]
    pub eval_samples: Option<usize>,
    #[arg(long = "fp-samples", global = true)]
    pub fp_samples: Option<usize>,
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
}

fn parse_box(text: &str) -> Result<Aabb> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Malformed(format!("bad box value `{v}`"))))
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() || values.len() % 2 != 0 {
        return Err(Error::Malformed("box needs lo,hi pairs".into()));
    }
    let (lower, upper) = values.chunks(2).map(|c| (c[0], c[1])).unzip();
    Aabb::new(lower, upper)
}

impl ExperimentFlags {
    fn single_epsilon(&self) -> Result<Option<f64>> {
        match self.epsilon.as_slice() {
            [] => Ok(None),
            [e] => Ok(Some(*e)),
            _ => Err(Error::InvalidParameter("--eps takes a single value here".into())),
        }
    }

    pub fn resolve(&self) -> Result<ExperimentManifest> {
        let mut m = match &self.manifest {
            Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
            None => ExperimentManifest::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() { m.$field = v; }
            )*};
        }
        take!(seed, system, total_samples, calibration_size, degree, mode, delta, rescale, ridge, outlier_fraction, repetitions, eval_samples, fp_samples, resolution);
        if let Some(eps) = self.single_epsilon()? {
            m.epsilon = Some(eps);
        }
        if self.p.is_some() {
            m.p = self.p;
        }
        if let Some(b) = &self.outlier_box {
            m.outlier_box = Some(parse_box(b)?);
        }
        if let Some(b) = &self.domain {
            m.domain = Some(parse_box(b)?);
        }
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Parser)]
#[command(name = "conformal-reach", version, about = "Conformal reach set estimation with Christoffel polynomials")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub flags: ExperimentFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a labelled dataset (CSV plus manifest).
    Sample {
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a model on every point of a CSV file.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Calibrate a model. With `--model`, `--data` is the calibration set;
    /// otherwise `--data` (or a fresh sample) is split into training and
    /// calibration sets.
    Calibrate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Transductive p-values of query points against a training set.
    Transductive {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coverage-guarantee calculators.
    Bounds {
        #[command(subcommand)]
        which: BoundsCommand,
    },
    /// Repeated coverage trials.
    CoverageTrials {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// False-positive rate over the evaluation box.
    FpRate {
        /// Saved estimate; built from the manifest when absent.
        #[arg(long)]
        estimate: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score or membership grid over the evaluation box.
    Grid {
        #[arg(long)]
        estimate: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "membership")]
        kind: GridKindArg,
        #[arg(long)]
        out: PathBuf,
        /// Also draw the boundary as SVG.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GridKindArg {
    Score,
    Membership,
}

#[derive(Debug, Subcommand)]
pub enum BoundsCommand {
    /// ε from N and δ.
    Split,
    /// Upper coverage-error bound.
    SplitUpper,
    /// Two-sided coverage band.
    TwoSided,
    /// Confidence for N, p, ε.
    Robust,
    /// Baseline ε for N training samples.
    Conjecture {
        /// State dimension.
        #[arg(long = "n", default_value_t = 2)]
        dimension: usize,
    },
    /// Confidence table over `--sizes` and `--eps` with p = ⌊frac·N⌋.
    RobustTable {
        #[arg(long, value_delimiter = ',', default_value = "100,500,1000,2000")]
        sizes: Vec<usize>,
    },
}

#[derive(Debug, Serialize)]
struct Echo<'a> {
    command: &'a str,
    manifest: &'a ExperimentManifest,
}

fn echo(command: &str, manifest: &ExperimentManifest, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&Echo { command, manifest })?;
    match out {
        Some(path) => {
            let mut name = path.as_os_str().to_owned();
            name.push(".resolved.json");
            fs::write(PathBuf::from(name), text + "\n")?;
        }
        None => eprintln!("{text}"),
    }
    Ok(())
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RobustRow {
    n_cal: usize,
    p: usize,
    epsilon: f64,
    confidence: f64,
}

/// Rows of the robust confidence table with `p = ⌊fraction · N⌋`.
pub fn robust_table(fraction: f64, sizes: &[usize], eps: &[f64]) -> Result<Vec<(usize, usize, f64, f64)>> {
    let mut rows = Vec::new();
    for &n in sizes {
        let p = (fraction * n as f64 + 1e-9).floor() as usize;
        for &e in eps {
            rows.push((n, p, e, robust_confidence(n, p, e)?));
        }
    }
    Ok(rows)
}

fn bound_table(b: &BoundResult) -> String {
    let mut s = String::new();
    let mut line = |k: &str, v: String| s.push_str(&format!("{k:<12}{v}\n"));
    line("mode", format!("{:?}", b.mode));
    line("N", b.n_cal.to_string());
    if let Some(p) = b.p {
        line("p", p.to_string());
    }
    line("epsilon", format!("{:.7}", b.epsilon));
    line("delta", format!("{:.7}", b.delta));
    line("confidence", format!("{:.7}", b.confidence()));
    if let Some([lo, hi]) = b.coverage_band {
        line("coverage", format!("[{lo:.7}, {hi:.7}]"));
    }
    s
}

fn run_bounds(which: &BoundsCommand, f: &ExperimentFlags) -> Result<String> {
    let n = || f.calibration_size.ok_or_else(|| Error::InvalidParameter("--N is required".into()));
    let delta = || f.delta.ok_or_else(|| Error::InvalidParameter("--delta is required".into()));
    let result = match which {
        BoundsCommand::Split => BoundResult::split(n()?, delta()?)?,
        BoundsCommand::SplitUpper => BoundResult::split_upper(n()?, delta()?)?,
        BoundsCommand::TwoSided => BoundResult::split_two_sided(n()?, delta()?)?,
        BoundsCommand::Robust => {
            let p = f.p.ok_or_else(|| Error::InvalidParameter("--p is required".into()))?;
            let eps = f
                .single_epsilon()?
                .ok_or_else(|| Error::InvalidParameter("--eps is required".into()))?;
            BoundResult::robust(n()?, p, eps)?
        }
        BoundsCommand::Conjecture { dimension } => {
            let d = f.degree.ok_or_else(|| Error::InvalidParameter("--degree is required".into()))?;
            BoundResult::baseline(n()?, *dimension, d, delta()?)?
        }
        BoundsCommand::RobustTable { sizes } => {
            let frac = f.outlier_fraction.unwrap_or(0.05);
            let eps_list: &[f64] = if f.epsilon.is_empty() { &[0.04, 0.05, 0.06, 0.10] } else { &f.epsilon };
            let rows = robust_table(frac, sizes, eps_list)?;
            let json: Vec<RobustRow> = rows
                .iter()
                .map(|&(n_cal, p, epsilon, confidence)| RobustRow {
                    n_cal,
                    p,
                    epsilon,
                    confidence,
                })
                .collect();
            let mut out = serde_json::to_string(&json)? + "\n";
            out.push_str(&format!("{:>6}", "N"));
            for e in eps_list {
                out.push_str(&format!("{:>10}", format!("eps={e}")));
            }
            out.push('\n');
            for chunk in rows.chunks(eps_list.len().max(1)) {
                out.push_str(&format!("{:>6}", chunk[0].0));
                for r in chunk {
                    out.push_str(&format!("{:>9.2}%", 100.0 * r.3));
                }
                out.push('\n');
            }
            return Ok(out);
        }
    };
    Ok(serde_json::to_string(&result)? + "\n" + &bound_table(&result))
}

fn load_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    Ok(read_points_csv(path)?.0)
}

fn load_estimate(path: &Path) -> Result<ReachSetEstimate> {
    ReachSetEstimate::from_json(&fs::read_to_string(path)?)
}

fn build_region(m: &ExperimentManifest, estimate: Option<&Path>) -> Result<Box<dyn Region + Sync>> {
    if let Some(path) = estimate {
        return Ok(Box::new(load_estimate(path)?));
    }
    let data = m.dataset()?;
    Ok(match m.mode {
        ModeChoice::Transductive => Box::new(m.transductive_from(&data.points)?),
        _ => Box::new(m.estimate_from(&data.points)?),
    })
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        // A second initialisation (e.g. in tests) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    if let Command::Bounds { which } = &cli.command {
        return emit(&run_bounds(which, &cli.flags)?, None);
    }
    let m = cli.flags.resolve()?;
    match &cli.command {
        Command::Bounds { .. } => unreachable!(),
        Command::Sample { out } => {
            echo("sample", &m, Some(out))?;
            m.dataset()?.write(out)
        }
        Command::Fit { data, out } => {
            echo("fit", &m, Some(out))?;
            let points = load_points(data)?;
            let model = ChristoffelModel::fit(&points, m.basis()?, m.fit_options())?;
            emit(&(model.to_json()? + "\n"), Some(out))
        }
        Command::Calibrate { model, data, out } => {
            echo("calibrate", &m, Some(out))?;
            let estimate = match (model, data) {
                (Some(model), Some(data)) => {
                    let model = ChristoffelModel::from_json(&fs::read_to_string(model)?)?;
                    m.calibrate_with(model, &load_points(data)?)?
                }
                (Some(_), None) => {
                    return Err(Error::InvalidParameter("--model needs a calibration --data file".into()))
                }
                (None, Some(data)) => m.estimate_from(&load_points(data)?)?,
                (None, None) => m.estimate_from(&m.dataset()?.points)?,
            };
            emit(&(estimate.to_json()? + "\n"), Some(out))
        }
        Command::Transductive { data, queries, out } => {
            echo("transductive", &m, out.as_deref())?;
            let region = m.transductive_from(&load_points(data)?)?;
            let queries = load_points(queries)?;
            let mut text = String::new();
            let n = region.context().model().dimension();
            for k in 1..=n {
                text.push_str(&format!("x{k},"));
            }
            text.push_str("count,total,p_value,member\n");
            for q in &queries {
                let pv = transductive_p_value(region.context(), q)?;
                for v in q {
                    text.push_str(&format!("{v},"));
                }
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    pv.count,
                    pv.total,
                    pv.value(),
                    u8::from(pv.count >= region.rank())
                ));
            }
            emit(&text, out.as_deref())
        }
        Command::CoverageTrials { out } => {
            echo("coverage-trials", &m, out.as_deref())?;
            let report = coverage_trials(&m.trial_config()?, m.repetitions, m.seed)?;
            emit(&(serde_json::to_string_pretty(&report)? + "\n"), out.as_deref())
        }
        Command::FpRate { estimate, out } => {
            echo("fp-rate", &m, out.as_deref())?;
            let region = build_region(&m, estimate.as_deref())?;
            let domain = m.resolved_domain();
            let rate = false_positive_rate(
                region.as_ref(),
                &m.benchmark(),
                &domain,
                m.fp_samples,
                derive_seed(m.seed, SEED_EVAL),
            )?;
            let json = serde_json::json!({
                "fp_rate": rate,
                "samples": m.fp_samples,
                "domain": domain,
            });
            emit(&(serde_json::to_string_pretty(&json)? + "\n"), out.as_deref())
        }
        Command::Grid { estimate, kind, out, svg } => {
            echo("grid", &m, Some(out))?;
            let est = match estimate {
                Some(path) => load_estimate(path)?,
                None => m.estimate_from(&m.dataset()?.points)?,
            };
            let kind = match kind {
                GridKindArg::Score => GridKind::Score,
                GridKindArg::Membership => GridKind::Membership,
            };
            let field = export_grid(&est, &m.resolved_domain(), m.resolution, kind)?;
            emit(&field.to_csv(), Some(out))?;
            if let Some(svg) = svg {
                let hash = crate::evaluation::config_hash(&m)?;
                fs::write(svg, field.to_svg(&[], &hash)?)?;
            }
            Ok(())
        }
    }
}

/// Exit status for an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        3
    } else {
        2
    }
}

/// Machine-readable error line for stderr.
pub fn error_json(err: &Error) -> String {
    serde_json::json!({ "error": err.kind(), "message": err.to_string() }).to_string()
}
