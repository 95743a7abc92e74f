//! Configuration-driven experiments on top of `streampca`: trajectories,
//! block-size sweeps, O-U ensembles, bias probes and recorded data.

pub mod commands;
pub mod realdata;
pub mod spec;

pub use commands::{
    cmd_bias_probe, cmd_block_sweep, cmd_ou_ensemble, cmd_trajectory, simulate_bias, simulate_ou, simulate_sweep,
    simulate_trajectories,
};
pub use realdata::cmd_realdata;
pub use spec::{ExperimentKind, ExperimentSpec, RealDataSpec};
