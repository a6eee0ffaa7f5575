//! Steady state, probe response and PT phase of a levitated nanosphere
//! coupled to a gain/loss cavity pair.

pub mod config;
pub mod error;
pub mod model;
pub mod oracle;
pub mod phase;
pub mod response;
pub mod stability;
pub mod steady;
pub mod sweep;
pub mod table;

pub use error::{Error, Result};
pub use model::{derive, CavityPreset, DerivedQuantities, DriveDetuning, SystemParams, TrapMode};
pub use phase::{classify_phase, Phase, PhaseReport};
pub use response::{absorption, solve_sideband_system, transmission, SidebandSolution};
pub use steady::SteadyState;
pub use sweep::{run_sweep, SweepPreset, SweepSpec};
pub use table::SpectrumTable;
