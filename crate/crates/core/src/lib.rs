//! Time-domain fluorescence diffuse optical tomography with a dynamic source.
//!
//! The crate recovers a time-dependent fluorophore absorption coefficient
//! `mu_f(x, t)` on the unit square from boundary flux measurements of the
//! emission field. It bundles:
//!
//! * [`grid`]: finite-difference forward and adjoint solvers for the
//!   parabolic diffusion system with Robin boundary conditions;
//! * [`synth`]: ground-truth sources, semi-discrete source projection and
//!   noisy measurement synthesis;
//! * [`neural`]: a small feed-forward network with a jet-propagating
//!   derivative engine and exact parameter gradients;
//! * [`losses`] and [`train`]: collocation sampling, residual losses and the
//!   Adam-driven excitation / inversion training loops;
//! * [`stability`]: the adjoint-based bilinear functional, the weighted norm
//!   and the Lipschitz stability check;
//! * [`metrics`]: relative errors, time-series errors and lambda sweeps;
//! * [`config`] and [`io`]: experiment configuration, seeded random streams
//!   and CSV/JSON output.

// negated comparisons are used deliberately so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod grid;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod neural;
pub mod rng;
pub mod stability;
pub mod synth;
pub mod train;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use grid::{BoundaryTrace, Coefficients, FieldSeries, SpaceTimeGrid};
pub use neural::{Jet, Mlp};
pub use rng::RngStream;
