//! Closed-form coverage guarantees for calibrated sublevel sets.
//!
//! * Split conformal, rank 1: with probability at least `1 − δ` over the
//!   calibration set, the region covers at least `δ^{1/N}` of the measure
//!   ([`split_epsilon`]), and for continuous measures at most
//!   `(1 − δ)^{1/N}` ([`split_upper_epsilon`]).
//! * Outlier-robust, rank `p + 1`: coverage `≥ 1 − ε` holds with probability
//!   at least `P(Bin(N − p, ε) ≥ p + 1)` ([`robust_confidence`]).
//! * The learning-theoretic sample bound used by earlier work is kept as a
//!   baseline for comparison only ([`conjecture_baseline_epsilon`]); it is
//!   never attached to an estimate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::monomials::basis_size;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMode {
    SplitLower,
    SplitUpper,
    SplitTwoSided,
    Robust,
    BaselineConjecture,
}

/// An evaluated guarantee: with probability `1 − delta`, the coverage error
/// is at most `epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundResult {
    pub mode: BoundMode,
    pub epsilon: f64,
    pub delta: f64,
    pub n_cal: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dimension: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub degree: Option<usize>,
    /// `[lower, upper]` coverage band (two-sided mode only).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub coverage_band: Option<[f64; 2]>,
}

impl BoundResult {
    pub fn confidence(&self) -> f64 {
        1.0 - self.delta
    }

    fn new(mode: BoundMode, epsilon: f64, delta: f64, n_cal: usize) -> Self {
        Self {
            mode,
            epsilon,
            delta,
            n_cal,
            p: None,
            dimension: None,
            degree: None,
            coverage_band: None,
        }
    }

    /// Rank-1 split guarantee at failure probability `delta`.
    pub fn split(n_cal: usize, delta: f64) -> Result<Self> {
        Ok(Self::new(BoundMode::SplitLower, split_epsilon(n_cal, delta)?, delta, n_cal))
    }

    /// Missing-mass floor at failure probability `delta`.
    pub fn split_upper(n_cal: usize, delta: f64) -> Result<Self> {
        Ok(Self::new(BoundMode::SplitUpper, split_upper_epsilon(n_cal, delta)?, delta, n_cal))
    }

    /// Two-sided coverage band holding with probability `1 − 2δ`.
    pub fn split_two_sided(n_cal: usize, delta: f64) -> Result<Self> {
        let [lower, upper] = split_coverage_band(n_cal, delta)?;
        let mut out = Self::new(BoundMode::SplitTwoSided, 1.0 - lower, 2.0 * delta, n_cal);
        out.coverage_band = Some([lower, upper]);
        Ok(out)
    }

    /// Rank-(p+1) guarantee at coverage error `epsilon`.
    pub fn robust(n_cal: usize, p: usize, epsilon: f64) -> Result<Self> {
        let confidence = robust_confidence(n_cal, p, epsilon)?;
        let mut out = Self::new(BoundMode::Robust, epsilon, 1.0 - confidence, n_cal);
        out.p = Some(p);
        Ok(out)
    }

    /// Baseline sample-complexity bound (comparison only).
    pub fn baseline(n_samples: usize, dimension: usize, degree: usize, delta: f64) -> Result<Self> {
        let eps = conjecture_baseline_epsilon(n_samples, dimension, degree, delta)?;
        let mut out = Self::new(BoundMode::BaselineConjecture, eps, delta, n_samples);
        out.dimension = Some(dimension);
        out.degree = Some(degree);
        Ok(out)
    }
}

fn check_unit_open(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {value}")))
    }
}

fn check_positive(name: &str, value: usize) -> Result<()> {
    if value >= 1 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be at least 1")))
    }
}

/// Coverage error `ε = 1 − δ^{1/N}` of the rank-1 split conformal region.
pub fn split_epsilon(n_cal: usize, delta: f64) -> Result<f64> {
    check_positive("N", n_cal)?;
    check_unit_open("delta", delta)?;
    Ok(-(delta.ln() / n_cal as f64).exp_m1())
}

/// Inverse of [`split_epsilon`]: the failure probability `(1 − ε)^N`.
pub fn split_delta(n_cal: usize, epsilon: f64) -> Result<f64> {
    check_positive("N", n_cal)?;
    check_unit_open("epsilon", epsilon)?;
    Ok((n_cal as f64 * (-epsilon).ln_1p()).exp())
}

/// `1 − (1 − δ)^{1/N}`: with probability at least `1 − δ` at least this much
/// mass is missed by the rank-1 region (continuous measures only).
pub fn split_upper_epsilon(n_cal: usize, delta: f64) -> Result<f64> {
    check_positive("N", n_cal)?;
    check_unit_open("delta", delta)?;
    Ok(-((-delta).ln_1p() / n_cal as f64).exp_m1())
}

/// Coverage band `[δ^{1/N}, (1 − δ)^{1/N}]`, valid with probability `1 − 2δ`
/// for `δ < 1/2`.
pub fn split_coverage_band(n_cal: usize, delta: f64) -> Result<[f64; 2]> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "two-sided band needs delta in (0, 1/2), got {delta}"
        )));
    }
    Ok([
        1.0 - split_epsilon(n_cal, delta)?,
        1.0 - split_upper_epsilon(n_cal, delta)?,
    ])
}

/// Streaming `log Σ exp(tᵢ)`.
#[derive(Debug, Clone, Copy)]
struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn add(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t > self.max {
            self.sum = self.sum * (self.max - t).exp() + 1.0;
            self.max = t;
        } else {
            self.sum += (t - self.max).exp();
        }
    }

    fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// `log P(X = i)` for `X ~ Bin(m, ε)`, stepping from `i` to `i + 1`.
fn log_ratio(m: usize, i: usize, log_odds: f64) -> f64 {
    ((m - i) as f64 / (i + 1) as f64).ln() + log_odds
}

/// `P(Bin(m, ε) ≥ k)`.
fn binomial_upper_tail(m: usize, k: usize, epsilon: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > m {
        return 0.0;
    }
    let log_odds = epsilon.ln() - (-epsilon).ln_1p();
    let log_p0 = m as f64 * (-epsilon).ln_1p();
    let mean = m as f64 * epsilon;

    if mean >= k as f64 {
        // Bulk above k: complement of the lower tail, which is small.
        let mut lower = LogSumExp::new();
        let mut t = log_p0;
        for i in 0..k {
            lower.add(t);
            t += log_ratio(m, i, log_odds);
        }
        (-lower.value().exp_m1()).clamp(0.0, 1.0)
    } else {
        let mut t = log_p0;
        for i in 0..k {
            t += log_ratio(m, i, log_odds);
        }
        let mut upper = LogSumExp::new();
        let mut i = k;
        loop {
            upper.add(t);
            if i == m {
                break;
            }
            t += log_ratio(m, i, log_odds);
            i += 1;
            // Terms beyond the mode decay geometrically.
            if t < upper.value() - 50.0 {
                break;
            }
        }
        upper.value().exp().clamp(0.0, 1.0)
    }
}

/// Probability that the rank-(p+1) region covers at least `1 − ε` when the
/// calibration set of size `N` holds at most `p` outliers:
/// `Σ_{i=p+1}^{N−p} C(N−p, i) εⁱ (1−ε)^{N−p−i}`.
pub fn robust_confidence(n_cal: usize, p: usize, epsilon: f64) -> Result<f64> {
    check_robust_budget(n_cal, p)?;
    check_unit_open("epsilon", epsilon)?;
    Ok(binomial_upper_tail(n_cal - p, p + 1, epsilon))
}

/// Smallest coverage error whose [`robust_confidence`] reaches `confidence`.
pub fn robust_epsilon(n_cal: usize, p: usize, confidence: f64) -> Result<f64> {
    check_robust_budget(n_cal, p)?;
    check_unit_open("confidence", confidence)?;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if binomial_upper_tail(n_cal - p, p + 1, mid) >= confidence {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub(crate) fn check_robust_budget(n_cal: usize, p: usize) -> Result<()> {
    if 2 * p + 1 < n_cal {
        Ok(())
    } else {
        Err(Error::OutlierBudget { n_cal, p })
    }
}

/// Right-hand side of the baseline bound,
/// `(5/ε)(log(4/δ) + C(n+2d, n) log(40/ε))`.
pub fn conjecture_required_samples(dimension: usize, degree: usize, delta: f64, epsilon: f64) -> Result<f64> {
    let terms = basis_size(dimension, 2 * degree)? as f64;
    Ok(5.0 / epsilon * ((4.0 / delta).ln() + terms * (40.0 / epsilon).ln()))
}

/// Smallest `ε ∈ (0, 1)` for which `n_samples` meets the baseline
/// sample bound, to absolute tolerance `1e-6`.
///
/// This bound is conjectured for a threshold fitted on the training data
/// itself and is exposed for comparison only.
pub fn conjecture_baseline_epsilon(n_samples: usize, dimension: usize, degree: usize, delta: f64) -> Result<f64> {
    check_positive("N", n_samples)?;
    check_positive("n", dimension)?;
    check_positive("d", degree)?;
    check_unit_open("delta", delta)?;
    let n = n_samples as f64;
    let floor = conjecture_required_samples(dimension, degree, delta, 1.0)?;
    if floor > n {
        return Err(Error::NoRoot { min_samples: floor });
    }
    // The required sample count is strictly decreasing in ε.
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if conjecture_required_samples(dimension, degree, delta, mid)? <= n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct summation with exact binomial coefficients in f64; only usable
    /// for small m.
    fn tail_by_definition(m: usize, k: usize, eps: f64) -> f64 {
        let mut total = 0.0;
        for i in k..=m {
            let c = (1..=i).fold(1.0, |acc, j| acc * (m - i + j) as f64 / j as f64);
            total += c * eps.powi(i as i32) * (1.0 - eps).powi((m - i) as i32);
        }
        total
    }

    #[test]
    fn split_epsilon_examples() {
        assert!((split_epsilon(2000, 0.01).unwrap() - 0.002_299_936_177_446_726).abs() < 1e-15);
        assert!((split_epsilon(200, 0.01).unwrap() - 0.022_762_779_044_189_33).abs() < 1e-15);
        assert!((split_epsilon(1000, 0.01).unwrap() - 0.004_594_582_648_473_011).abs() < 1e-15);
    }

    #[test]
    fn split_epsilon_decreasing_and_inverts() {
        let mut prev = 1.0;
        for n in [1, 2, 10, 100, 1000, 100_000] {
            let eps = split_epsilon(n, 0.05).unwrap();
            assert!(eps < prev);
            prev = eps;
            let back = split_delta(n, eps).unwrap();
            assert!((back - 0.05).abs() < 1e-12 * 0.05);
        }
    }

    #[test]
    fn split_upper_examples() {
        let floor = split_upper_epsilon(1000, 0.01).unwrap();
        assert!((floor / 1.005_028_534_904_525_3e-5 - 1.0).abs() < 1e-12);
        let [lo, hi] = split_coverage_band(1, 0.01).unwrap();
        assert!((lo - 0.01).abs() < 1e-15 && (hi - 0.99).abs() < 1e-15);
        // The band is empty at δ = 1/2.
        assert!(split_coverage_band(10, 0.5).is_err());
        let eps = split_epsilon(10, 0.5).unwrap();
        let up = split_upper_epsilon(10, 0.5).unwrap();
        assert!((eps - up).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(split_epsilon(0, 0.1).is_err());
        assert!(split_epsilon(10, 0.0).is_err());
        assert!(split_epsilon(10, 1.0).is_err());
        assert!(matches!(robust_confidence(10, 5, 0.1), Err(Error::OutlierBudget { .. })));
        assert!(robust_confidence(10, 4, 0.1).is_ok());
        assert!(robust_confidence(10, 1, 1.0).is_err());
    }

    #[test]
    fn binomial_tail_agrees_with_definition() {
        for m in [1usize, 5, 20, 60] {
            for k in 0..=m {
                for eps in [0.01, 0.1, 0.37, 0.8] {
                    let got = binomial_upper_tail(m, k, eps);
                    let want = tail_by_definition(m, k, eps);
                    assert!((got - want).abs() < 1e-12, "m={m} k={k} eps={eps}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn robust_p_zero_is_tight() {
        for n in [3usize, 10, 50, 100, 500, 2000, 100_000] {
            for eps in [1e-4f64, 0.01, 0.05, 0.2, 0.5] {
                let want = -(n as f64 * (-eps).ln_1p()).exp_m1();
                let got = robust_confidence(n, 0, eps).unwrap();
                assert!((got - want).abs() <= 1e-12 * want, "N={n} eps={eps}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn robust_section_example() {
        // N = 500, 10% outlier budget, ε = 0.15.
        let c = robust_confidence(500, 50, 0.15).unwrap();
        assert!((c - 0.989_711_699_683_780_4).abs() < 1e-9);
    }

    #[test]
    fn robust_monotone_grid() {
        let eps_grid = [0.01, 0.02, 0.05, 0.08, 0.1, 0.15, 0.2];
        for n in [50usize, 100, 500] {
            for &eps in &eps_grid {
                let mut prev = f64::INFINITY;
                for p in 0..=10 {
                    let c = robust_confidence(n, p, eps).unwrap();
                    assert!(c <= prev + 1e-15);
                    prev = c;
                }
            }
            for p in 0..=10 {
                let mut prev = 0.0;
                for &eps in &eps_grid {
                    let c = robust_confidence(n, p, eps).unwrap();
                    assert!(c + 1e-15 >= prev);
                    prev = c;
                }
            }
        }
    }

    #[test]
    fn robust_epsilon_inverts() {
        let eps = robust_epsilon(500, 50, 0.989_711_699_683_780_4).unwrap();
        assert!((eps - 0.15).abs() < 1e-8);
    }

    #[test]
    fn baseline_errors_when_too_few_samples() {
        match conjecture_baseline_epsilon(100, 2, 15, 0.01) {
            Err(Error::NoRoot { min_samples }) => assert!(min_samples > 100.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn baseline_monotone_in_n() {
        let a = conjecture_baseline_epsilon(10_000, 2, 6, 0.01).unwrap();
        let b = conjecture_baseline_epsilon(20_000, 2, 6, 0.01).unwrap();
        assert!(b < a);
        let rhs = conjecture_required_samples(2, 6, 0.01, a).unwrap();
        assert!(rhs <= 10_000.0);
    }

    #[test]
    fn bound_result_json() {
        let r = BoundResult::robust(500, 50, 0.15).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        assert!(text.contains("\"mode\":\"robust\""));
        let back: BoundResult = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        let two = BoundResult::split_two_sided(1000, 0.01).unwrap();
        assert!((two.confidence() - 0.98).abs() < 1e-15);
    }
}
