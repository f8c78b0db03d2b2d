//! Configuration, presets, file formats, the run loop and the command line.

pub mod cli;
pub mod config;
pub mod nondim;
pub mod output;
pub mod presets;
pub mod refine;
pub mod run;

pub use config::RunConfig;
pub use nondim::{nondimensionalize, CharacteristicScales, Dimensionless, PhysicalParams};
pub use presets::make_initial;
pub use refine::{refinement_study, RefinementAxis, RefinementTable};
pub use run::{run, RunSummary, Simulation};
