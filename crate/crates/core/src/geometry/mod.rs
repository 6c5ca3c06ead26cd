//! Meshes, the periodic representative cell, tiling and the macroscopic
//! sample domain.

pub mod cell;
pub mod macro_domain;
pub mod mesh;
pub mod periodic;
pub mod tiling;

pub use cell::{build_unit_cell, extract_interfaces, CellDomain, CellParams, ChannelStyle, InterfaceFacet};
pub use macro_domain::{MacroDomain, SamplePoint, Sampling};
pub use mesh::{Mesh, TAG_BOTTOM, TAG_LEFT, TAG_RIGHT, TAG_TOP};
pub use periodic::{find_periodic_pairs, PeriodicMap};
pub use tiling::tile_cell;

/// Region label of channel `α` (0-based channel index).
pub const fn channel_label(alpha: usize) -> u8 {
    alpha as u8 + 1
}

pub const MATRIX: u8 = 3;
