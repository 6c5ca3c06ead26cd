//! Two-scale (FE²) simulation of quasistatic large deformation in
//! fluid-saturated double-porosity media.
//!
//! The crate is organised bottom-up: [`constitutive`] point laws, [`geometry`]
//! meshes and periodic cells, the [`fem`] kernel, the [`micro`] cell problems
//! and [`coefficients`], the [`macroscale`] problem, the [`coupler`] that runs
//! the updating incremental loop, the direct [`reference`] solver and the
//! [`io`] layer (configuration, CSV, VTK, checkpoints, comparison).

pub mod coefficients;
pub mod constitutive;
pub mod coupler;
pub mod driver;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod io;
pub mod macroscale;
pub mod micro;
pub mod reference;
pub mod scenario;

pub use error::{Error, Result};
