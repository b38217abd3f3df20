//! Becker-Doring cluster dynamics: the truncated ODE system, its Lie-Trotter
//! splitting, Fokker-Planck and pure-diffusion continuum approximations, and
//! a Feynman-Kac Monte Carlo oracle.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::excessive_precision
)]

pub mod bd;
pub mod characteristics;
pub mod continuum;
pub mod error;
pub mod experiments;
pub mod ode;
pub mod rates;
pub mod splitting;
pub mod stochastic;
pub mod table;
pub mod util;

pub use error::{Error, Result};
pub use rates::{check_assumptions, AssumptionReport, ExtendedSigma, PhysicalParams, RateKind, RateModel};
