//! Bayes-error analytics, optimization and Monte Carlo simulation for binary
//! distributed detection with Gaussian sensing noise and noisy reporting
//! channels.
//!
//! Three reporting schemes are covered:
//!
//! * **UDD**: sensors forward their raw observation.
//! * **CDD**: sensors forward an antipodal bit `+-sqrt(E_u)` from a binary quantizer.
//! * **QDD**: sensors forward one of two freely placed levels `m0`/`m1`, chosen
//!   jointly with the quantizer threshold under the UDD average power.

pub mod asymptotics;
pub mod error;
pub mod montecarlo;
pub mod multi_sensor;
pub mod numerics;
pub mod one_sensor;
pub mod optimizer;
pub mod sensor;

pub use error::{Error, Result};
