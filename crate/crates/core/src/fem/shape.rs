//! Linear shape functions and quadrature on 3-node triangles and 4-node
//! quadrilaterals.

use crate::error::{Error, Result};
use crate::geometry::Mesh;

const G: f64 = 0.577_350_269_189_625_8;

static QUAD_RULE: [([f64; 2], f64); 4] = [([-G, -G], 1.0), ([G, -G], 1.0), ([G, G], 1.0), ([-G, G], 1.0)];

static TRI_RULE: [([f64; 2], f64); 3] = [
    ([1.0 / 6.0, 1.0 / 6.0], 1.0 / 6.0),
    ([2.0 / 3.0, 1.0 / 6.0], 1.0 / 6.0),
    ([1.0 / 6.0, 2.0 / 3.0], 1.0 / 6.0),
];

/// Quadrature rule (parametric points, weights) for an element with `nn` nodes.
pub fn quadrature(nn: usize) -> &'static [([f64; 2], f64)] {
    if nn == 4 {
        &QUAD_RULE
    } else {
        &TRI_RULE
    }
}

/// Parametric center of the element.
pub fn center(nn: usize) -> [f64; 2] {
    if nn == 4 {
        [0.0, 0.0]
    } else {
        [1.0 / 3.0, 1.0 / 3.0]
    }
}

/// Shape values and parametric derivatives at `xi`.
pub fn shape(nn: usize, xi: [f64; 2]) -> ([f64; 4], [[f64; 2]; 4]) {
    let [r, s] = xi;
    if nn == 4 {
        let sr = [-1.0, 1.0, 1.0, -1.0];
        let ss = [-1.0, -1.0, 1.0, 1.0];
        let mut n = [0.0; 4];
        let mut d = [[0.0; 2]; 4];
        for a in 0..4 {
            n[a] = 0.25 * (1.0 + sr[a] * r) * (1.0 + ss[a] * s);
            d[a] = [0.25 * sr[a] * (1.0 + ss[a] * s), 0.25 * ss[a] * (1.0 + sr[a] * r)];
        }
        (n, d)
    } else {
        (
            [1.0 - r - s, r, s, 0.0],
            [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
        )
    }
}

/// Shape data at one point of a physical element.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointData {
    pub n: [f64; 4],
    /// Physical gradients `∂N_a/∂x_l`.
    pub grad: [[f64; 2]; 4],
    pub det_j: f64,
    /// Quadrature weight times `det J` (zero when evaluated off-rule).
    pub jxw: f64,
}

/// Shape data at every quadrature point of one element.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ElementData {
    pub nn: usize,
    pub nq: usize,
    pub qp: [PointData; 4],
}

pub fn point_data(xe: &[[f64; 2]; 4], nn: usize, xi: [f64; 2], w: f64) -> PointData {
    let (n, d) = shape(nn, xi);
    let mut jac = [[0.0; 2]; 2];
    for a in 0..nn {
        for i in 0..2 {
            for k in 0..2 {
                jac[i][k] += xe[a][i] * d[a][k];
            }
        }
    }
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
    let mut grad = [[0.0; 2]; 4];
    for a in 0..nn {
        for l in 0..2 {
            grad[a][l] = d[a][0] * inv[0][l] + d[a][1] * inv[1][l];
        }
    }
    PointData {
        n,
        grad,
        det_j: det,
        jxw: w * det,
    }
}

/// Shape data of element `e` at its quadrature points; fails on a
/// non-positive Jacobian.
pub fn element_data(mesh: &Mesh, e: usize) -> Result<ElementData> {
    let (xe, nn) = mesh.element_coords(e);
    let rule = quadrature(nn);
    let mut out = ElementData {
        nn,
        nq: rule.len(),
        ..Default::default()
    };
    for (q, &(xi, w)) in rule.iter().enumerate() {
        let pd = point_data(&xe, nn, xi, w);
        if !(pd.det_j > 0.0) {
            return Err(Error::InvertedElement {
                element: Some(e),
                jacobian: pd.det_j,
            });
        }
        out.qp[q] = pd;
    }
    Ok(out)
}

/// Gradient `g[(k, l)] = ∂u_k/∂x_l` of a nodal vector field (interleaved
/// components) at one point.
pub fn vector_gradient(pd: &PointData, nodes: &[usize], u: &[f64]) -> crate::constitutive::Mat2 {
    let mut g = crate::constitutive::Mat2::zeros();
    for (a, &n) in nodes.iter().enumerate() {
        for k in 0..2 {
            for l in 0..2 {
                g[(k, l)] += u[2 * n + k] * pd.grad[a][l];
            }
        }
    }
    g
}

pub fn scalar_gradient(pd: &PointData, nodes: &[usize], p: &[f64]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for (a, &n) in nodes.iter().enumerate() {
        g[0] += p[n] * pd.grad[a][0];
        g[1] += p[n] * pd.grad[a][1];
    }
    g
}

pub fn scalar_value(pd: &PointData, nodes: &[usize], p: &[f64]) -> f64 {
    nodes.iter().enumerate().map(|(a, &n)| p[n] * pd.n[a]).sum()
}
