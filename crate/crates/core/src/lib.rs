//! Monte Carlo simulation and analysis of persistence in a random-bond Ising
//! model whose local field is shifted by the absolute global magnetization.
//!
//! The crate is organized bottom-up:
//!
//! * [`lattice`]: periodic hypercubic geometry;
//! * [`disorder`]: quenched ±1 bonds at ferromagnetic concentration `p`;
//! * [`dynamics`]: the heat-bath engine;
//! * [`observables`]: persistence, returns, residual persistence, kurtosis;
//! * [`fitting`]: exponential, power-law and stretched-exponential fits;
//! * [`experiment`]: presets, sample fan-out and aggregation;
//! * [`config`] and [`output`]: TOML configs, CSV series and manifests;
//! * [`oracle`]: the exact three-site chain used to validate the engine.

pub mod config;
pub mod disorder;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod fitting;
pub mod lattice;
pub mod observables;
pub mod oracle;
pub mod output;
pub mod rng;

pub use config::parse_config;
pub use disorder::BondTable;
pub use dynamics::{heatbath_prob, ModelParams, Schedule, SpinState};
pub use error::{Error, Result};
pub use experiment::{
    preset, run_experiment, run_experiment_with, run_sample, AggregateResult, ExperimentConfig,
    RunOptions,
};
pub use fitting::{DecayFit, DecayModel, DecaySeries, Window};
pub use lattice::LatticeGeometry;
pub use observables::{PersistenceTracker, TimeSeriesRecord};
pub use rng::{SampleSeeds, ThermalNoise};
