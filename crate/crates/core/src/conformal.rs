//! Conformal calibration of Christoffel sublevel sets.
//!
//! A calibrated region is `{x : score(x) ≤ α}` where `α` is the `(p+1)`-th
//! largest score on a calibration set held out from the fit. `p = 0` gives
//! the plain split-conformal region; `p > 0` tolerates up to `p` outliers
//! in the calibration set.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{check_robust_budget, BoundResult};
use crate::christoffel::{ChristoffelModel, ModelDocument, TransductiveContext};
use crate::error::{Error, Result};

pub const ESTIMATE_FORMAT: &str = "reach-set-estimate/1";

/// A dataset split into disjoint training and calibration sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePartition {
    pub training: Vec<Vec<f64>>,
    pub calibration: Vec<Vec<f64>>,
    /// Source indices of the training points.
    pub training_indices: Vec<usize>,
    /// Source indices of the calibration points.
    pub calibration_indices: Vec<usize>,
    pub seed: u64,
    pub training_labels: Option<Vec<bool>>,
    pub calibration_labels: Option<Vec<bool>>,
}

impl SamplePartition {
    /// Shuffles `points` with `seed`, then takes the first `n_cal` as the
    /// calibration set and the rest as the training set.
    pub fn split(points: &[Vec<f64>], labels: Option<&[bool]>, n_cal: usize, seed: u64) -> Result<Self> {
        if n_cal == 0 || n_cal >= points.len() {
            return Err(Error::InvalidParameter(format!(
                "calibration size must be in [1, {}), got {n_cal}",
                points.len()
            )));
        }
        if let Some(l) = labels {
            if l.len() != points.len() {
                return Err(Error::DimensionMismatch {
                    expected: points.len(),
                    got: l.len(),
                });
            }
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (cal_idx, train_idx) = order.split_at(n_cal);
        let pick = |idx: &[usize]| idx.iter().map(|&i| points[i].clone()).collect::<Vec<_>>();
        let pick_labels = |idx: &[usize]| labels.map(|l| idx.iter().map(|&i| l[i]).collect::<Vec<_>>());
        Ok(Self {
            training: pick(train_idx),
            calibration: pick(cal_idx),
            training_indices: train_idx.to_vec(),
            calibration_indices: cal_idx.to_vec(),
            seed,
            training_labels: pick_labels(train_idx),
            calibration_labels: pick_labels(cal_idx),
        })
    }
}

/// A conformal p-value `count / total`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PValue {
    pub count: usize,
    pub total: usize,
}

impl PValue {
    pub fn value(&self) -> f64 {
        self.count as f64 / self.total as f64
    }
}

/// Fraction of `calibration_scores` that are at least `score` (ties count).
pub fn p_value(calibration_scores: &[f64], score: f64) -> PValue {
    PValue {
        count: calibration_scores.iter().filter(|&&s| s >= score).count(),
        total: calibration_scores.len(),
    }
}

/// Anything that can answer point-membership queries.
pub trait Region {
    fn dimension(&self) -> usize;
    fn contains(&self, x: &[f64]) -> Result<bool>;
}

/// A calibrated sublevel set of a Christoffel polynomial.
#[derive(Debug, Clone)]
pub struct ReachSetEstimate {
    model: ChristoffelModel,
    threshold: f64,
    rank: usize,
    guarantee: BoundResult,
    // Descending.
    calibration_scores: Vec<f64>,
    ties: bool,
}

fn sorted_descending(model: &ChristoffelModel, calibration: &[Vec<f64>]) -> Result<(Vec<f64>, bool)> {
    if calibration.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let mut scores = model.scores(calibration)?;
    scores.sort_by(|a, b| b.total_cmp(a));
    let ties = scores.windows(2).any(|w| w[0] == w[1]);
    if ties {
        log::warn!(
            "duplicate calibration scores detected; the upper coverage bound assumes a continuous measure"
        );
    }
    Ok((scores, ties))
}

/// Rank-1 split conformal calibration. The threshold is the largest
/// calibration score and the attached guarantee is `ε = 1 − δ^{1/N}`.
pub fn calibrate(model: ChristoffelModel, calibration: &[Vec<f64>], delta: f64) -> Result<ReachSetEstimate> {
    let guarantee = BoundResult::split(calibration.len().max(1), delta)?;
    let (scores, ties) = sorted_descending(&model, calibration)?;
    Ok(ReachSetEstimate {
        threshold: scores[0],
        rank: 1,
        model,
        guarantee,
        calibration_scores: scores,
        ties,
    })
}

/// Outlier-robust calibration: the threshold is the `(p+1)`-th largest
/// calibration score. Requires `2p + 1 < N`; the guarantee carries the
/// confidence of coverage `≥ 1 − epsilon`.
pub fn calibrate_robust(
    model: ChristoffelModel,
    calibration: &[Vec<f64>],
    p: usize,
    epsilon: f64,
) -> Result<ReachSetEstimate> {
    if calibration.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    check_robust_budget(calibration.len(), p)?;
    let guarantee = BoundResult::robust(calibration.len(), p, epsilon)?;
    let (scores, ties) = sorted_descending(&model, calibration)?;
    Ok(ReachSetEstimate {
        threshold: scores[p],
        rank: p + 1,
        model,
        guarantee,
        calibration_scores: scores,
        ties,
    })
}

impl ReachSetEstimate {
    pub fn model(&self) -> &ChristoffelModel {
        &self.model
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Order-statistic rank of the threshold (1 = maximum).
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn guarantee(&self) -> &BoundResult {
        &self.guarantee
    }

    /// Calibration scores, largest first.
    pub fn calibration_scores(&self) -> &[f64] {
        &self.calibration_scores
    }

    /// True when two calibration scores coincide exactly.
    pub fn has_tied_scores(&self) -> bool {
        self.ties
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        self.model.score(x)
    }

    /// `score(x) ≤ threshold`, compared exactly.
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.model.score(x)? <= self.threshold)
    }

    pub fn p_value(&self, x: &[f64]) -> Result<PValue> {
        Ok(p_value(&self.calibration_scores, self.model.score(x)?))
    }

    /// Same model and calibration scores with a different threshold rank.
    /// Used to compare nested regions without refitting.
    pub fn with_rank(&self, p: usize, epsilon: f64) -> Result<Self> {
        check_robust_budget(self.calibration_scores.len(), p)?;
        Ok(Self {
            model: self.model.clone(),
            threshold: self.calibration_scores[p],
            rank: p + 1,
            guarantee: BoundResult::robust(self.calibration_scores.len(), p, epsilon)?,
            calibration_scores: self.calibration_scores.clone(),
            ties: self.ties,
        })
    }

    pub fn to_document(&self) -> EstimateDocument {
        EstimateDocument {
            format: ESTIMATE_FORMAT.to_string(),
            model: self.model.to_document(),
            threshold: self.threshold,
            rank: self.rank,
            guarantee: self.guarantee.clone(),
            calibration_scores: self.calibration_scores.clone(),
        }
    }

    pub fn from_document(doc: EstimateDocument) -> Result<Self> {
        if doc.format != ESTIMATE_FORMAT {
            return Err(Error::Malformed(format!("unknown estimate format `{}`", doc.format)));
        }
        let scores = doc.calibration_scores;
        if doc.rank == 0 || doc.rank > scores.len() {
            return Err(Error::Malformed(format!(
                "rank {} out of range for {} calibration scores",
                doc.rank,
                scores.len()
            )));
        }
        if scores.windows(2).any(|w| w[0] < w[1]) || scores[doc.rank - 1] != doc.threshold {
            return Err(Error::Malformed(
                "threshold is not the recorded order statistic".into(),
            ));
        }
        let ties = scores.windows(2).any(|w| w[0] == w[1]);
        Ok(Self {
            model: ChristoffelModel::from_document(doc.model)?,
            threshold: doc.threshold,
            rank: doc.rank,
            guarantee: doc.guarantee,
            calibration_scores: scores,
            ties,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }
}

impl Region for ReachSetEstimate {
    fn dimension(&self) -> usize {
        self.model.dimension()
    }

    fn contains(&self, x: &[f64]) -> Result<bool> {
        ReachSetEstimate::contains(self, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateDocument {
    pub format: String,
    pub model: ModelDocument,
    pub threshold: f64,
    pub rank: usize,
    pub guarantee: BoundResult,
    /// Descending.
    pub calibration_scores: Vec<f64>,
}

/// p-value of `x` when the score function is refitted on the training set
/// plus `x`, and the training set itself serves as the calibration set.
pub fn transductive_p_value(ctx: &TransductiveContext, x: &[f64]) -> Result<PValue> {
    let scores = ctx.scores(x)?;
    Ok(p_value(&scores.augmented, scores.query))
}

/// The transductive conformal region `{x : p_value(x) ≥ rank / N}`.
#[derive(Debug, Clone)]
pub struct TransductiveRegion {
    ctx: TransductiveContext,
    rank: usize,
    guarantee: BoundResult,
}

impl TransductiveRegion {
    /// Rank-1 region (`p_value ≥ 1/N`) with the split guarantee at `delta`.
    pub fn new(ctx: TransductiveContext, delta: f64) -> Result<Self> {
        let guarantee = BoundResult::split(ctx.n_train(), delta)?;
        Ok(Self { ctx, rank: 1, guarantee })
    }

    pub fn context(&self) -> &TransductiveContext {
        &self.ctx
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn guarantee(&self) -> &BoundResult {
        &self.guarantee
    }

    pub fn p_value(&self, x: &[f64]) -> Result<PValue> {
        transductive_p_value(&self.ctx, x)
    }
}

impl Region for TransductiveRegion {
    fn dimension(&self) -> usize {
        self.ctx.model().dimension()
    }

    fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok(self.p_value(x)?.count >= self.rank)
    }
}
