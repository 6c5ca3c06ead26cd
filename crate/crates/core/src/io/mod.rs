//! Configuration, tabular and field output, checkpoints and run comparison.

pub mod checkpoint;
pub mod compare;
pub mod config;
pub mod table;

pub mod vtk;

pub use config::RunConfig;
