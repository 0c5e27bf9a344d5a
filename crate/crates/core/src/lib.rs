//! Iterative LMMSE multi-user detection for uplink MIMO-NOMA.
//!
//! The crate has three layers:
//!
//! * system model and information-theoretic baselines: [`model`], [`capacity`];
//! * the iterative LMMSE receiver and its achievable-rate machinery:
//!   [`detector`], [`rates`], [`gamma_search`];
//! * a practical coded link: repetition-aided IRA multiuser codes with
//!   EXIT-style threshold analysis in [`coding`], and Monte Carlo bit error
//!   rate sweeps in [`sim`].
//!
//! All rates are in bits per channel use (base-2 logarithms throughout).

pub mod capacity;
pub mod coding;
pub mod detector;
pub mod gamma_search;
pub mod linalg;
pub mod model;
pub mod quad;
pub mod rates;
pub mod rng;
pub mod sim;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
