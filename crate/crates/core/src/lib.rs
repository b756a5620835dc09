//! Simulation and optimization of cascade amplify-and-forward relay networks.
//!
//! * [`model`]: network gains, relay parameters and forward propagation.
//! * [`modem`]: gray-coded multi-user PAM, receiver chains and BER counting.
//! * [`netgen`]: fixture networks and random spatial sector networks.
//! * [`linopt`]: linear-model max-min SNR optimization.
//! * [`deepopt`]: backpropagation training of the nonlinear relays.
//! * [`sim`]: Monte-Carlo BER evaluation.
//! * [`io`]: exact JSON interchange.

// Range checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod deepopt;
pub mod error;
pub mod io;
pub mod linopt;
pub mod model;
pub mod modem;
pub mod netgen;
pub mod sim;

pub use error::{Error, Result};
