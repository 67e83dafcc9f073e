//! Subsample-based VARMA estimation under additive (AO) and innovative (IO)
//! outlier contamination.
//!
//! Residual-based subsample estimators (trimming, Huber-skip, LTS) drop the
//! observations flagged as contaminated, but in a dynamic model a single
//! outlier leaks into every later residual through the filter
//! `pi(L) = theta(L)^-1 phi(L)`. This crate provides
//!
//! - [`lagpoly`]: matrix lag polynomials, `pi`/`psi` expansions, decay bounds
//!   and patch-length suggestions,
//! - [`process`]: seeded VARMA simulation and the conditional residual filter,
//! - [`contaminate`]: AO/IO injection and the exact residual footprint of an
//!   outlier,
//! - [`subsample`]: index sets, the patch removal transform, Huber-skip and
//!   oracle selectors,
//! - [`estimate`]: the log-determinant criterion, a penalised Nelder-Mead
//!   fit, the patch estimator, the iterative feasible procedure and
//!   per-observation AIC model comparison,
//! - [`montecarlo`]: the replication engine with bias/RMSE aggregation,
//! - [`cli`]: the `varma-patch` command-line front-end.
//!
//! Sign conventions are shared by every module:
//! `phi(L) = I - sum Phi_i L^i` and `theta(L) = I + sum Theta_j L^j`.

pub mod cli;
pub mod contaminate;
pub mod error;
pub mod estimate;
pub mod lagpoly;
pub mod montecarlo;
pub mod process;
pub mod subsample;

mod linalg;

pub use contaminate::{ContaminationSpec, OutlierKind};
pub use error::{Error, Result};
pub use estimate::{FitOptions, FitResult, IterationTrace};
pub use lagpoly::{DecayBound, LagPolynomial, PowerSeries};
pub use process::{ResidualSeries, SeriesOrigin, TimeSeries, VarmaModel};
pub use subsample::IndexSet;
