use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use crate::error::Result;
use crate::fem::shape;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// One cell per element, evaluated at the element center.
    #[default]
    PerElement,
    /// One cell per quadrature point.
    PerQuadrature,
}

/// Macroscopic location carrying a micro state, in element-parametric
/// coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub element: usize,
    pub xi: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroDomain {
    pub mesh: Mesh,
    pub sampling: Sampling,
    pub sample_points: Vec<SamplePoint>,
}

impl MacroDomain {
    /// Rectangular sample `[0, lx] × [0, ly]` meshed by `nx × ny` quads.
    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize, sampling: Sampling) -> Result<MacroDomain> {
        let mesh = Mesh::rectangle([0.0, 0.0], lx, ly, nx, ny)?;
        Ok(MacroDomain::from_mesh(mesh, sampling))
    }

    pub fn from_mesh(mesh: Mesh, sampling: Sampling) -> MacroDomain {
        let mut sample_points = Vec::new();
        for e in 0..mesh.n_elements() {
            let nn = mesh.elements[e].len();
            match sampling {
                Sampling::PerElement => sample_points.push(SamplePoint {
                    element: e,
                    xi: shape::center(nn),
                }),
                Sampling::PerQuadrature => {
                    for &(xi, _) in shape::quadrature(nn) {
                        sample_points.push(SamplePoint { element: e, xi });
                    }
                }
            }
        }
        MacroDomain {
            mesh,
            sampling,
            sample_points,
        }
    }

    /// Sample point owning quadrature point `q` of element `e`.
    pub fn sample_index(&self, e: usize, q: usize) -> usize {
        match self.sampling {
            Sampling::PerElement => e,
            Sampling::PerQuadrature => {
                // Elements of one kind are laid out contiguously by construction.
                self.sample_points
                    .iter()
                    .position(|s| s.element == e)
                    .map(|first| first + q)
                    .unwrap_or(usize::MAX)
            }
        }
    }

    /// Current position of a sample point.
    pub fn position(&self, s: usize) -> [f64; 2] {
        let sp = self.sample_points[s];
        let (xe, nn) = self.mesh.element_coords(sp.element);
        let (n, _) = shape::shape(nn, sp.xi);
        let mut p = [0.0; 2];
        for a in 0..nn {
            p[0] += n[a] * xe[a][0];
            p[1] += n[a] * xe[a][1];
        }
        p
    }
}
