//! Linear-model relay optimization.
//!
//! Relays are treated as linear amplifiers with a mean output power cap.
//! Each receiver then sees a scaled copy of the symbol in Gaussian noise, so
//! the max-min BER problem becomes a max-min weighted SNR problem. It is
//! solved one layer at a time: for a target weighted SNR the layer's gains
//! minimizing the largest relay power come from a semidefinite relaxation
//! with a rank penalty, and a bisection finds the largest target that fits
//! the power cap.

pub mod alternating;
pub mod extended;
pub mod penalty;
pub mod sdp;
pub mod subproblem;

pub use alternating::{
    feasible_start, max_eta, optimize, rebalance, user_bers, LayerStep, LinearConfig,
    LinearSolution, ReceiverFit, SweepRecord, POWER_SLACK,
};
pub use extended::{relay_power_closed_form, snr_closed_form, ExtendedLinearModel};
pub use penalty::{evaluate_pv, solve_inner, PenaltySettings, PvResult, Scaling, Target};
pub use subproblem::{assemble_subproblem, SubproblemData};
