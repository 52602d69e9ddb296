//! Reach set approximation from trajectory samples.
//!
//! A sublevel set of the empirical inverse Christoffel function is fitted on
//! training samples and its level is chosen by conformal calibration, which
//! gives a finite-sample probabilistic coverage guarantee.
//!
//! ```
//! use conformal_reach::{calibrate, BenchmarkSystem, ChristoffelModel, FitOptions, MonomialBasis, Region};
//!
//! # fn main() -> conformal_reach::Result<()> {
//! let system = BenchmarkSystem::four_squares();
//! let data = system.sample_reach_set(10_000, 7)?;
//! let (train, cal) = data.points.split_at(8_000);
//! let model = ChristoffelModel::fit(train, MonomialBasis::new(2, 15)?, FitOptions::default())?;
//! let estimate = calibrate(model, cal, 0.01)?;
//! assert!(!estimate.contains(&[0.0, 0.0])?);
//! assert!(estimate.guarantee().epsilon < 0.0024);
//! # Ok(())
//! # }
//! ```

pub mod bounds;
pub mod christoffel;
pub mod cli;
pub mod conformal;
pub mod error;
pub mod evaluation;
pub mod monomials;
pub mod systems;

pub use bounds::{BoundMode, BoundResult};
pub use christoffel::{ChristoffelModel, FitOptions, Normalization, TransductiveContext};
pub use conformal::{calibrate, calibrate_robust, ReachSetEstimate, Region, TransductiveRegion};
pub use error::{Error, Result};
pub use monomials::{basis_size, MonomialBasis};
pub use systems::{Aabb, BenchmarkSystem, DuffingParams, LabeledDataset};
