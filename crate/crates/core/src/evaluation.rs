//! Empirical validation: repeated coverage trials, false-positive rates and
//! grid export for contour figures.
//!
//! Randomness is derived from a single master seed. Trial `i` draws its
//! sub-seeds, in order data / split / outliers / evaluation, from a ChaCha8
//! generator seeded with the master seed on stream `i`, so results do not
//! depend on thread scheduling. Single-shot pipelines use [`derive_seed`],
//! which counts down from the last stream instead.

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::split_epsilon;
use crate::christoffel::{ChristoffelModel, FitOptions};
use crate::conformal::{calibrate, calibrate_robust, ReachSetEstimate, Region, SamplePartition};
use crate::error::{Error, Result};
use crate::monomials::{basis_size, MonomialBasis};
use crate::systems::{Aabb, BenchmarkSystem};

/// Hex SHA-256 of the compact JSON encoding of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(config)?))
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TrialMode {
    /// Rank-1 threshold; ε derived from δ.
    Split { delta: f64 },
    /// Rank-(p+1) threshold with a fraction of the dataset replaced by
    /// outliers drawn from `outlier_box`.
    Robust {
        p: usize,
        epsilon: f64,
        outlier_fraction: f64,
        outlier_box: Aabb,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialConfig {
    pub system: BenchmarkSystem,
    /// M, the dataset size (training + calibration).
    pub total_samples: usize,
    /// N, the calibration set size.
    pub calibration_size: usize,
    pub degree: usize,
    #[serde(flatten)]
    pub mode: TrialMode,
    /// Fresh reach-set samples used to measure coverage.
    pub eval_samples: usize,
    pub fit: FitOptions,
}

impl TrialConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        let m = self.total_samples;
        let n = self.calibration_size;
        if n == 0 || n >= m {
            return Err(Error::InvalidParameter(format!("need M > N ≥ 1, got M={m}, N={n}")));
        }
        let s = basis_size(self.system.dimension(), self.degree)?;
        if m - n < s {
            return Err(Error::InsufficientSamples { required: s, got: m - n });
        }
        if self.eval_samples == 0 {
            return Err(Error::InvalidParameter("eval_samples must be at least 1".into()));
        }
        self.epsilon().map(|_| ())
    }

    /// Coverage error a trial is checked against.
    pub fn epsilon(&self) -> Result<f64> {
        match &self.mode {
            TrialMode::Split { delta } => split_epsilon(self.calibration_size, *delta),
            TrialMode::Robust { epsilon, .. } => Ok(*epsilon),
        }
    }
}

/// Outcome of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    /// Seed of the reach-set sample for this trial.
    pub seed: u64,
    pub empirical_coverage: Option<f64>,
    pub threshold: Option<f64>,
    /// Calibration points that were outliers (robust mode).
    pub calibration_outliers: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialReport {
    pub repetitions: usize,
    pub master_seed: u64,
    pub epsilon: f64,
    /// Trials whose empirical coverage fell below `1 − ε`.
    pub violations: usize,
    /// Trials aborted by an error.
    pub failures: usize,
    pub per_trial: Vec<TrialRecord>,
    pub config: TrialConfig,
    pub config_hash: String,
}

impl TrialReport {
    /// Recount violations against an arbitrary coverage error.
    pub fn violations_at(&self, epsilon: f64) -> usize {
        self.per_trial
            .iter()
            .filter_map(|t| t.empirical_coverage)
            .filter(|&c| c < 1.0 - epsilon)
            .count()
    }

    pub fn max_coverage_error(&self) -> f64 {
        self.per_trial
            .iter()
            .filter_map(|t| t.empirical_coverage)
            .map(|c| 1.0 - c)
            .fold(0.0, f64::max)
    }
}

/// Sub-seed number `counter` of `master`: the first word of ChaCha8 seeded
/// with `master` on stream `u64::MAX - counter`.
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(u64::MAX - counter);
    rng.next_u64()
}

struct TrialSeeds {
    data: u64,
    split: u64,
    outliers: u64,
    eval: u64,
}

fn trial_seeds(master_seed: u64, index: usize) -> TrialSeeds {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    TrialSeeds {
        data: rng.next_u64(),
        split: rng.next_u64(),
        outliers: rng.next_u64(),
        eval: rng.next_u64(),
    }
}

/// Fraction of `points` inside `region`.
pub fn empirical_coverage<R: Region + ?Sized>(region: &R, points: &[Vec<f64>]) -> Result<f64> {
    let mut inside = 0usize;
    for p in points {
        if region.contains(p)? {
            inside += 1;
        }
    }
    Ok(inside as f64 / points.len() as f64)
}

/// Sample, split, fit and calibrate once, returning the estimate and the
/// number of outliers that landed in the calibration set.
pub fn build_estimate(config: &TrialConfig, seeds: (u64, u64, u64)) -> Result<(ReachSetEstimate, Option<usize>)> {
    let (data_seed, split_seed, outlier_seed) = seeds;
    let mut data = config.system.sample_reach_set(config.total_samples, data_seed)?;
    if let TrialMode::Robust {
        outlier_fraction,
        outlier_box,
        ..
    } = &config.mode
    {
        data = data.inject_outliers(&config.system, *outlier_fraction, outlier_box, outlier_seed)?;
    }
    let part = SamplePartition::split(&data.points, Some(&data.labels), config.calibration_size, split_seed)?;
    let basis = MonomialBasis::new(config.system.dimension(), config.degree)?;
    let model = ChristoffelModel::fit(&part.training, basis, config.fit)?;
    match &config.mode {
        TrialMode::Split { delta } => Ok((calibrate(model, &part.calibration, *delta)?, None)),
        TrialMode::Robust { p, epsilon, .. } => {
            let outliers = part
                .calibration_labels
                .as_ref()
                .map(|l| l.iter().filter(|x| !**x).count());
            Ok((calibrate_robust(model, &part.calibration, *p, *epsilon)?, outliers))
        }
    }
}

fn run_trial(config: &TrialConfig, master_seed: u64, index: usize) -> TrialRecord {
    let seeds = trial_seeds(master_seed, index);
    let outcome = (|| {
        let (estimate, outliers) = build_estimate(config, (seeds.data, seeds.split, seeds.outliers))?;
        let fresh = config.system.sample_reach_set(config.eval_samples, seeds.eval)?;
        let coverage = empirical_coverage(&estimate, &fresh.points)?;
        Ok::<_, Error>((coverage, estimate.threshold(), outliers))
    })();
    match outcome {
        Ok((coverage, threshold, outliers)) => TrialRecord {
            index,
            seed: seeds.data,
            empirical_coverage: Some(coverage),
            threshold: Some(threshold),
            calibration_outliers: outliers,
            error: None,
        },
        Err(e) => TrialRecord {
            index,
            seed: seeds.data,
            empirical_coverage: None,
            threshold: None,
            calibration_outliers: None,
            error: Some(e.to_string()),
        },
    }
}

/// Repeat the sample → split → fit → calibrate → measure pipeline
/// `repetitions` times and count coverage violations.
pub fn coverage_trials(config: &TrialConfig, repetitions: usize, master_seed: u64) -> Result<TrialReport> {
    config.validate()?;
    if repetitions == 0 {
        return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
    }
    let epsilon = config.epsilon()?;
    let per_trial: Vec<TrialRecord> = (0..repetitions)
        .into_par_iter()
        .map(|i| run_trial(config, master_seed, i))
        .collect();
    let failures = per_trial.iter().filter(|t| t.error.is_some()).count();
    let mut report = TrialReport {
        repetitions,
        master_seed,
        epsilon,
        violations: 0,
        failures,
        per_trial,
        config: config.clone(),
        // Custom maps cannot be serialized; their debug form stands in.
        config_hash: config_hash(config).unwrap_or_else(|_| sha256_hex(format!("{config:?}").as_bytes())),
    };
    report.violations = report.violations_at(epsilon);
    Ok(report)
}

/// Fraction of `count` uniform samples of `domain` that lie in the region
/// but outside the true reach set.
pub fn false_positive_rate<R: Region + Sync + ?Sized>(
    region: &R,
    system: &BenchmarkSystem,
    domain: &Aabb,
    count: usize,
    seed: u64,
) -> Result<f64> {
    if !system.has_membership_oracle() {
        return Err(Error::UnsupportedOracle {
            system: system.name().to_string(),
        });
    }
    if count == 0 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    domain.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<Vec<f64>> = (0..count).map(|_| domain.sample(&mut rng)).collect();
    let flags = points
        .par_iter()
        .map(|p| Ok(region.contains(p)? && !system.true_membership(p)?))
        .collect::<Result<Vec<bool>>>()?;
    Ok(flags.iter().filter(|f| **f).count() as f64 / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    Score,
    Membership,
}

/// Values on a regular grid. Node `(i_1, …, i_n)` is stored at flat index
/// `i_1 + i_2·r + … + i_n·r^{n−1}` (first coordinate fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub bounding_box: Aabb,
    pub resolution: usize,
    pub kind: GridKind,
    pub threshold: f64,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn dimension(&self) -> usize {
        self.bounding_box.dimension()
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        node_coordinates(&self.bounding_box, self.resolution, flat)
    }

    /// Membership at each node (scores are compared with the threshold).
    pub fn membership(&self) -> Vec<bool> {
        match self.kind {
            GridKind::Membership => self.values.iter().map(|v| *v != 0.0).collect(),
            GridKind::Score => self.values.iter().map(|v| *v <= self.threshold).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let n = self.dimension();
        let mut out = String::new();
        for k in 1..=n {
            let _ = write!(out, "x{k},");
        }
        out.push_str(match self.kind {
            GridKind::Score => "score\n",
            GridKind::Membership => "member\n",
        });
        for (i, v) in self.values.iter().enumerate() {
            for c in self.node(i) {
                let _ = write!(out, "{c},");
            }
            let _ = writeln!(out, "{v}");
        }
        out
    }

    /// Number of 4-connected components of the membership mask (2-D only).
    pub fn count_components(&self) -> Result<usize> {
        self.require_planar()?;
        let r = self.resolution;
        let mask = self.membership();
        let mut seen = vec![false; mask.len()];
        let mut components = 0;
        let mut stack = Vec::new();
        for start in 0..mask.len() {
            if !mask[start] || seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = (i % r, i / r);
                let mut visit = |j: usize| {
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < r {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - r);
                }
                if y + 1 < r {
                    visit(i + r);
                }
            }
        }
        Ok(components)
    }

    fn require_planar(&self) -> Result<()> {
        if self.dimension() == 2 {
            Ok(())
        } else {
            Err(Error::InvalidParameter("operation needs a 2-D grid".into()))
        }
    }

    /// Boundary segments of the membership mask by marching squares, with
    /// crossings at edge midpoints. Saddle cells emit both segments.
    pub fn contour_segments(&self) -> Result<Vec<[[f64; 2]; 2]>> {
        self.require_planar()?;
        let r = self.resolution;
        let mask = self.membership();
        let lo = &self.bounding_box.lower;
        let hi = &self.bounding_box.upper;
        let dx = (hi[0] - lo[0]) / (r - 1) as f64;
        let dy = (hi[1] - lo[1]) / (r - 1) as f64;
        let mut segments = Vec::new();
        for y in 0..r - 1 {
            for x in 0..r - 1 {
                let at = |xx: usize, yy: usize| mask[yy * r + xx];
                // Corner bits: bottom-left 1, bottom-right 2, top-right 4, top-left 8.
                let case = usize::from(at(x, y))
                    | usize::from(at(x + 1, y)) << 1
                    | usize::from(at(x + 1, y + 1)) << 2
                    | usize::from(at(x, y + 1)) << 3;
                let x0 = lo[0] + x as f64 * dx;
                let y0 = lo[1] + y as f64 * dy;
                let bottom = [x0 + 0.5 * dx, y0];
                let right = [x0 + dx, y0 + 0.5 * dy];
                let top = [x0 + 0.5 * dx, y0 + dy];
                let left = [x0, y0 + 0.5 * dy];
                let mut push = |a: [f64; 2], b: [f64; 2]| segments.push([a, b]);
                match case {
                    0 | 15 => {}
                    1 | 14 => push(left, bottom),
                    2 | 13 => push(bottom, right),
                    3 | 12 => push(left, right),
                    4 | 11 => push(right, top),
                    6 | 9 => push(bottom, top),
                    7 | 8 => push(left, top),
                    5 => {
                        push(left, top);
                        push(bottom, right);
                    }
                    10 => {
                        push(left, bottom);
                        push(right, top);
                    }
                    _ => unreachable!(),
                }
            }
        }
        Ok(segments)
    }

    /// SVG rendering of the region boundary, optionally with sample points.
    pub fn to_svg(&self, points: &[Vec<f64>], config_hash: &str) -> Result<String> {
        let segments = self.contour_segments()?;
        let size = 600.0;
        let lo = &self.bounding_box.lower;
        let hi = &self.bounding_box.upper;
        let sx = |v: f64| (v - lo[0]) / (hi[0] - lo[0]) * size;
        let sy = |v: f64| size - (v - lo[1]) / (hi[1] - lo[1]) * size;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
        );
        let _ = writeln!(out, "<!-- config {config_hash} -->");
        let _ = writeln!(out, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
        for p in points.iter().filter(|p| p.len() == 2) {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.3}" cy="{:.3}" r="1" fill="black"/>"#,
                sx(p[0]),
                sy(p[1])
            );
        }
        let mut path = String::new();
        for [a, b] in &segments {
            let _ = write!(path, "M{:.3} {:.3}L{:.3} {:.3}", sx(a[0]), sy(a[1]), sx(b[0]), sy(b[1]));
        }
        let _ = writeln!(out, r#"<path d="{path}" stroke="purple" stroke-width="1.5" fill="none"/>"#);
        out.push_str("</svg>\n");
        Ok(out)
    }
}

fn node_coordinates(domain: &Aabb, resolution: usize, mut flat: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(domain.dimension());
    for (l, u) in domain.lower.iter().zip(&domain.upper) {
        let i = flat % resolution;
        flat /= resolution;
        out.push(l + (u - l) * i as f64 / (resolution - 1) as f64);
    }
    out
}

/// Evaluate the estimate's score or membership at every node of a
/// `resolution^n` grid over `domain`.
pub fn export_grid(estimate: &ReachSetEstimate, domain: &Aabb, resolution: usize, kind: GridKind) -> Result<GridField> {
    if resolution < 2 {
        return Err(Error::InvalidParameter("grid resolution must be at least 2".into()));
    }
    domain.validate()?;
    let n = domain.dimension();
    if n != estimate.model().dimension() {
        return Err(Error::DimensionMismatch {
            expected: estimate.model().dimension(),
            got: n,
        });
    }
    let total = u32::try_from(n)
        .ok()
        .and_then(|e| resolution.checked_pow(e))
        .ok_or_else(|| Error::InvalidParameter("grid too large".into()))?;
    let threshold = estimate.threshold();
    let values = (0..total)
        .into_par_iter()
        .map(|i| {
            let x = node_coordinates(domain, resolution, i);
            let s = estimate.score(&x)?;
            Ok(match kind {
                GridKind::Score => s,
                GridKind::Membership => f64::from(u8::from(s <= threshold)),
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(GridField {
        bounding_box: domain.clone(),
        resolution,
        kind,
        threshold,
        values,
    })
}

/// Convenience: draw a uniform point cloud for FP-style checks.
pub fn uniform_points(domain: &Aabb, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| domain.sample(&mut rng)).collect()
}
