// SPDX-License-Identifier: MIT OR Apache-2.0

//! Simulation designs, rejection-rate experiments and the power envelope.

pub mod dgp;
pub mod envelope;
pub mod experiment;
pub mod presets;

pub use dgp::{
    gen_covariates, gen_dgp, gen_innovations, local_power_break, DgpKind, DgpSpec, InnovationKind,
    InnovationSpec, SimulatedSample,
};
pub use envelope::{power_curve, power_envelope, EnvelopeConfig, PowerCurve};
pub use experiment::{
    config_hash, run_experiment, Cell, CriticalValueSource, ExperimentConfig, ExperimentResult,
    RESULT_CSV_HEADER,
};
pub use presets::{all_presets, find_preset, ExpectedRate, Preset};
