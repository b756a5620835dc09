//! Deep-relay optimization: the relay network is trained like a neural
//! network, with exact gradients through every relay saturation, ADAM
//! updates and a noise-variance curriculum.

pub mod adam;
pub mod gradient;
pub mod init;
pub mod loss;
pub mod train;

pub use adam::{adam_step, Adam, AdamConfig};
pub use gradient::{evaluate, gradient, Batch, Evaluation};
pub use init::{initialize, initialize_detailed, InitConfig, InitScaling, Initialization};
pub use loss::{bit_loss, boltzmann, loss, LossConfig, LossValue};
pub use train::{
    train, Curriculum, HistoryRow, SnapshotPolicy, StageSnapshot, StopReason, TrainConfig,
    TrainOutcome, TrainState,
};

use crate::error::Result;
use crate::model::{propagate, Network, NoiseBatch, RelayParams, Topology, Transfer};
use crate::modem::{scale, ModulationSpec};

/// The input grid `-1, -0.999, ..., 1`.
pub fn default_grid() -> Vec<f64> {
    (0..=2000).map(|i| (i as f64 - 1000.0) / 1000.0).collect()
}

/// Noiseless scaled receiver value `rbar_m(s)` of every user at each grid
/// input; one row per grid point.
pub fn transfer_function(
    topology: &Topology,
    params: &RelayParams,
    spec: &ModulationSpec,
    grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    params.validate(topology)?;
    let net = Network::new(topology)?;
    let noise = NoiseBatch::zeros(grid.len(), net.relays(), net.receivers());
    let trace = propagate(
        &net,
        &params.flat_gains(),
        &params.flat_biases(),
        grid,
        &noise,
        Transfer::Tanh,
    )?;
    Ok((0..grid.len())
        .map(|k| {
            trace
                .received(k)
                .iter()
                .enumerate()
                .map(|(m, &r)| scale(r, params.rx_scale[m], params.rx_bias[m]))
                .collect()
        })
        .collect())
}
