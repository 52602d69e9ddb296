//! Empirical moment matrix and Christoffel polynomial.
//!
//! The score of a point is the quadratic form `v(x)ᵀ M⁻¹ v(x)` where `v` is
//! the monomial vector and `M` the empirical moment matrix of the training
//! samples. It is evaluated as `‖L⁻¹ v(x)‖²` with `M = L Lᵀ` (Cholesky).
//!
//! Two normalizations are supported. [`Normalization::Normalized`] divides the
//! outer-product sum by the sample count (the empirical-measure convention);
//! [`Normalization::Unnormalized`] keeps the raw sum, for which appending one
//! sample is an exact rank-one update. Rescaling `M` by a positive constant
//! scales every score by its inverse, so rankings, p-values and conformal
//! regions do not depend on the choice.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monomials::{BasisDescriptor, MonomialBasis};

/// Format tag for serialized models.
pub const MODEL_FORMAT: &str = "christoffel-model/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// `M = (1/N) Σ v vᵀ`
    #[default]
    Normalized,
    /// `M = Σ v vᵀ`
    Unnormalized,
}

/// Coordinate-wise affine map `y = offset + scale ⊙ x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineRescale {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl AffineRescale {
    /// Maps the bounding box of `samples` onto `[-1, 1]ⁿ`. Degenerate
    /// coordinates (zero width) are only shifted.
    pub fn from_bounding_box(samples: &[Vec<f64>]) -> Self {
        let n = samples[0].len();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for s in samples {
            for k in 0..n {
                lo[k] = lo[k].min(s[k]);
                hi[k] = hi[k].max(s[k]);
            }
        }
        let mut offset = vec![0.0; n];
        let mut scale = vec![1.0; n];
        for k in 0..n {
            let width = hi[k] - lo[k];
            if width > 0.0 {
                scale[k] = 2.0 / width;
                offset[k] = -(hi[k] + lo[k]) / width;
            } else {
                offset[k] = -lo[k];
            }
        }
        Self { offset, scale }
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for k in 0..x.len() {
            out[k] = self.offset[k] + self.scale[k] * x[k];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Rescale inputs to the training bounding box `[-1, 1]ⁿ` first.
    pub rescale: bool,
    /// Added to the moment matrix diagonal before factorization.
    pub ridge: f64,
    pub normalization: Normalization,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            rescale: true,
            ridge: 0.0,
            normalization: Normalization::Normalized,
        }
    }
}

/// A fitted empirical Christoffel polynomial.
#[derive(Debug, Clone)]
pub struct ChristoffelModel {
    basis: MonomialBasis,
    moment: Vec<f64>,
    // Row-major lower Cholesky factor of moment + ridge·I.
    factor: Vec<f64>,
    rescale: Option<AffineRescale>,
    n_train: usize,
    normalization: Normalization,
    ridge: f64,
}

pub(crate) fn check_finite(x: &[f64], context: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: context.to_string(),
        })
    }
}

fn check_dimension(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            got: x.len(),
        })
    }
}

impl ChristoffelModel {
    /// Fit the moment matrix of `samples` in `basis`.
    pub fn fit(samples: &[Vec<f64>], basis: MonomialBasis, options: FitOptions) -> Result<Self> {
        let n = basis.dimension();
        let size = basis.len();
        if !(options.ridge >= 0.0 && options.ridge.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ridge must be a finite non-negative number, got {}",
                options.ridge
            )));
        }
        if samples.len() < size {
            return Err(Error::InsufficientSamples {
                required: size,
                got: samples.len(),
            });
        }
        for s in samples {
            check_dimension(n, s)?;
            check_finite(s, "training sample")?;
        }
        let rescale = options
            .rescale
            .then(|| AffineRescale::from_bounding_box(samples));

        let mut moment = vec![0.0; size * size];
        let mut x = vec![0.0; n];
        let mut v = vec![0.0; size];
        for s in samples {
            map_point(rescale.as_ref(), s, &mut x);
            basis.evaluate_into(&x, &mut v)?;
            for i in 0..size {
                let vi = v[i];
                let row = &mut moment[i * size..i * size + i + 1];
                for (m, &vj) in row.iter_mut().zip(&v[..=i]) {
                    *m += vi * vj;
                }
            }
        }
        let weight = match options.normalization {
            Normalization::Normalized => 1.0 / samples.len() as f64,
            Normalization::Unnormalized => 1.0,
        };
        for i in 0..size {
            for j in 0..=i {
                let m = moment[i * size + j] * weight;
                moment[i * size + j] = m;
                moment[j * size + i] = m;
            }
        }
        Self::from_parts(
            basis,
            moment,
            rescale,
            samples.len(),
            options.normalization,
            options.ridge,
        )
    }

    fn from_parts(
        basis: MonomialBasis,
        moment: Vec<f64>,
        rescale: Option<AffineRescale>,
        n_train: usize,
        normalization: Normalization,
        ridge: f64,
    ) -> Result<Self> {
        let size = basis.len();
        let mut regularized = DMatrix::from_row_slice(size, size, &moment);
        for i in 0..size {
            regularized[(i, i)] += ridge;
        }
        let diagonal: Vec<f64> = (0..size).map(|i| regularized[(i, i)]).collect();
        let cholesky = regularized
            .cholesky()
            .ok_or(Error::SingularMomentMatrix { size })?;
        let l = cholesky.l();
        let mut factor = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..=i {
                factor[i * size + j] = l[(i, j)];
            }
        }
        // Pivots at roundoff level relative to the diagonal mean an exactly
        // degenerate sample (e.g. points on a variety) that survived by noise.
        let tol = size as f64 * f64::EPSILON;
        let degenerate = (0..size).any(|i| {
            let pivot = factor[i * size + i];
            pivot.is_nan() || pivot <= 0.0 || pivot * pivot <= tol * diagonal[i]
        });
        if factor.iter().any(|v| !v.is_finite()) || degenerate {
            return Err(Error::SingularMomentMatrix { size });
        }
        Ok(Self {
            basis,
            moment,
            factor,
            rescale,
            n_train,
            normalization,
            ridge,
        })
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn rescale(&self) -> Option<&AffineRescale> {
        self.rescale.as_ref()
    }

    /// Row-major moment matrix (without ridge).
    pub fn moment_matrix(&self) -> &[f64] {
        &self.moment
    }

    /// Monomial vector of `x` after the stored rescaling.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dimension(self.dimension(), x)?;
        check_finite(x, "query point")?;
        let mut mapped = vec![0.0; x.len()];
        map_point(self.rescale.as_ref(), x, &mut mapped);
        self.basis.evaluate(&mapped)
    }

    /// Solves `L z = v` in place.
    fn forward_solve(&self, v: &mut [f64]) {
        let size = self.basis.len();
        for i in 0..size {
            let row = &self.factor[i * size..i * size + i];
            let dot: f64 = row.iter().zip(&v[..i]).map(|(a, b)| a * b).sum();
            v[i] = (v[i] - dot) / self.factor[i * size + i];
        }
    }

    /// Solves `Lᵀ y = z` in place.
    fn backward_solve(&self, z: &mut [f64]) {
        let size = self.basis.len();
        for i in (0..size).rev() {
            let mut acc = z[i];
            for k in i + 1..size {
                acc -= self.factor[k * size + i] * z[k];
            }
            z[i] = acc / self.factor[i * size + i];
        }
    }

    /// `v(x)ᵀ M⁻¹ v(x)`, the nonconformity score.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        let mut v = self.features(x)?;
        Ok(self.quadratic_form(&mut v))
    }

    fn quadratic_form(&self, v: &mut [f64]) -> f64 {
        self.forward_solve(v);
        v.iter().map(|z| z * z).sum()
    }

    /// Scores of many points, evaluated in parallel.
    pub fn scores(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        points.par_iter().map(|x| self.score(x)).collect()
    }

    /// `M⁻¹ w` for a feature-space vector `w`.
    pub fn solve(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dimension(self.basis.len(), w)?;
        let mut y = w.to_vec();
        self.forward_solve(&mut y);
        self.backward_solve(&mut y);
        Ok(y)
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            format: MODEL_FORMAT.to_string(),
            basis: self.basis.descriptor(),
            rescale: self.rescale.clone(),
            normalization: self.normalization,
            ridge: self.ridge,
            n_train: self.n_train,
            moment_matrix: self.moment.clone(),
        }
    }

    pub fn from_document(doc: ModelDocument) -> Result<Self> {
        if doc.format != MODEL_FORMAT {
            return Err(Error::Malformed(format!("unknown model format `{}`", doc.format)));
        }
        let basis = doc.basis.build()?;
        let size = basis.len();
        if doc.moment_matrix.len() != size * size {
            return Err(Error::Malformed(format!(
                "moment matrix has {} entries, expected {}",
                doc.moment_matrix.len(),
                size * size
            )));
        }
        check_finite(&doc.moment_matrix, "moment matrix")?;
        for i in 0..size {
            for j in 0..i {
                let (a, b) = (doc.moment_matrix[i * size + j], doc.moment_matrix[j * size + i]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) {
                    return Err(Error::Malformed("moment matrix is not symmetric".into()));
                }
            }
        }
        if let Some(r) = &doc.rescale {
            if r.offset.len() != basis.dimension() || r.scale.len() != basis.dimension() {
                return Err(Error::Malformed("rescale dimension mismatch".into()));
            }
        }
        Self::from_parts(
            basis,
            doc.moment_matrix,
            doc.rescale,
            doc.n_train,
            doc.normalization,
            doc.ridge,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }
}

fn map_point(rescale: Option<&AffineRescale>, x: &[f64], out: &mut [f64]) {
    match rescale {
        Some(r) => r.apply_into(x, out),
        None => out.copy_from_slice(x),
    }
}

/// Serialized form of a [`ChristoffelModel`]. The factorization is
/// recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub basis: BasisDescriptor,
    pub rescale: Option<AffineRescale>,
    pub normalization: Normalization,
    pub ridge: f64,
    pub n_train: usize,
    /// Row-major.
    pub moment_matrix: Vec<f64>,
}

/// Precomputed state for transductive scoring, where the query point is
/// appended to the training set before the score function is rebuilt.
///
/// With the raw-sum moment matrix `M`, appending `x` gives
/// `M_x = M + v(x) v(x)ᵀ`, and Sherman–Morrison turns every score under `M_x`
/// into a correction of the score under `M`:
///
/// * `r_x(x) = Λ / (1 + Λ)` with `Λ = v(x)ᵀ M⁻¹ v(x)`
/// * `r_x(xⁱ) = r(xⁱ) − (v(x)ᵀ yⁱ)² / (1 + Λ)` with `yⁱ = M⁻¹ v(xⁱ)`
#[derive(Debug, Clone)]
pub struct TransductiveContext {
    model: ChristoffelModel,
    base_scores: Vec<f64>,
    // N × s(d), row-major.
    precomputed: Vec<f64>,
}

/// Result of one transductive evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransductiveScores {
    pub query: f64,
    pub augmented: Vec<f64>,
}

impl TransductiveContext {
    /// Fits the unnormalized model on `samples` and precomputes `yⁱ` and the
    /// base scores. `options.normalization` is ignored.
    pub fn new(samples: &[Vec<f64>], basis: MonomialBasis, options: FitOptions) -> Result<Self> {
        let options = FitOptions {
            normalization: Normalization::Unnormalized,
            ..options
        };
        let model = ChristoffelModel::fit(samples, basis, options)?;
        let size = model.basis.len();
        let rows: Vec<(f64, Vec<f64>)> = samples
            .par_iter()
            .map(|s| {
                let v = model.features(s)?;
                let mut z = v.clone();
                let base = model.quadratic_form(&mut z);
                let mut y = z;
                model.backward_solve(&mut y);
                Ok((base, y))
            })
            .collect::<Result<_>>()?;
        let mut base_scores = Vec::with_capacity(rows.len());
        let mut precomputed = Vec::with_capacity(rows.len() * size);
        for (base, y) in rows {
            base_scores.push(base);
            precomputed.extend_from_slice(&y);
        }
        Ok(Self {
            model,
            base_scores,
            precomputed,
        })
    }

    pub fn model(&self) -> &ChristoffelModel {
        &self.model
    }

    pub fn n_train(&self) -> usize {
        self.base_scores.len()
    }

    pub fn base_scores(&self) -> &[f64] {
        &self.base_scores
    }

    /// The vector `yⁱ = M⁻¹ v(xⁱ)`.
    pub fn precomputed_vector(&self, i: usize) -> &[f64] {
        let size = self.model.basis.len();
        &self.precomputed[i * size..(i + 1) * size]
    }

    /// Scores of `x` and of every training point under the moment matrix of
    /// the training set augmented with `x`.
    pub fn scores(&self, x: &[f64]) -> Result<TransductiveScores> {
        let v = self.model.features(x)?;
        let mut z = v.clone();
        let lambda = self.model.quadratic_form(&mut z);
        let denom = 1.0 + lambda;
        let size = v.len();
        let augmented = self
            .base_scores
            .iter()
            .zip(self.precomputed.chunks_exact(size))
            .map(|(&base, y)| {
                let dot: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
                base - dot * dot / denom
            })
            .collect();
        Ok(TransductiveScores {
            query: lambda / denom,
            augmented,
        })
    }
}
