//! Element-parallel assembly of the bilinear and linear forms on raw dofs.
//!
//! Vector fields use interleaved raw dofs `2·node + component`, scalar
//! fields one dof per node. Coefficients are supplied per
//! `(element, quadrature point)`. Element contributions are computed in
//! parallel and merged in element order, so results are deterministic.

use rayon::prelude::*;

use super::shape::{element_data, ElementData};
use super::sparse::Csr;
use crate::constitutive::{Mat2, Tensor4};
use crate::error::Result;
use crate::geometry::Mesh;

pub type Include<'a> = &'a (dyn Fn(usize) -> bool + Sync);

/// Shape data for every element, failing on the first inverted one.
pub fn element_table(mesh: &Mesh) -> Result<Vec<ElementData>> {
    (0..mesh.n_elements()).into_par_iter().map(|e| element_data(mesh, e)).collect()
}

fn gather<F>(mesh: &Mesh, include: Include, kernel: F) -> Vec<(usize, usize, f64)>
where
    F: Fn(usize, &mut Vec<(usize, usize, f64)>) + Sync,
{
    let parts: Vec<Vec<(usize, usize, f64)>> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let mut t = Vec::new();
            if include(e) {
                kernel(e, &mut t);
            }
            t
        })
        .collect();
    parts.concat()
}

fn gather_vec<F>(mesh: &Mesh, n: usize, include: Include, kernel: F) -> Vec<f64>
where
    F: Fn(usize, &mut Vec<(usize, f64)>) + Sync,
{
    let parts: Vec<Vec<(usize, f64)>> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| {
            let mut t = Vec::new();
            if include(e) {
                kernel(e, &mut t);
            }
            t
        })
        .collect();
    let mut out = vec![0.0; n];
    for part in parts {
        for (i, v) in part {
            out[i] += v;
        }
    }
    out
}

/// `a(u, v) = scale ∫ (𝔸 ∇u) : ∇v` on vector dofs (rows test `v`).
pub fn assemble_a(
    mesh: &Mesh,
    ed: &[ElementData],
    include: Include,
    tangent: &(dyn Fn(usize, usize) -> Tensor4 + Sync),
    scale: f64,
) -> Csr {
    let n = 2 * mesh.n_nodes();
    let trips = gather(mesh, include, |e, out| {
        let d = &ed[e];
        let nodes = &mesh.elements[e];
        let mut ke = [[0.0; 8]; 8];
        for q in 0..d.nq {
            let pd = &d.qp[q];
            let t = tangent(e, q);
            let w = scale * pd.jxw;
            for a in 0..d.nn {
                for i in 0..2 {
                    for b in 0..d.nn {
                        for k in 0..2 {
                            let mut s = 0.0;
                            for j in 0..2 {
                                for l in 0..2 {
                                    s += t.0[i][j][k][l] * pd.grad[b][l] * pd.grad[a][j];
                                }
                            }
                            ke[2 * a + i][2 * b + k] += w * s;
                        }
                    }
                }
            }
        }
        for a in 0..2 * d.nn {
            for b in 0..2 * d.nn {
                out.push((2 * nodes[a / 2] + a % 2, 2 * nodes[b / 2] + b % 2, ke[a][b]));
            }
        }
    });
    Csr::from_triplets(n, n, &trips)
}

/// `b(q, u) = scale ∫ q M : ∇u` with `M = B(ū) + I` (or any 2×2 field);
/// rows are scalar test dofs, columns vector dofs.
pub fn assemble_b(
    mesh: &Mesh,
    ed: &[ElementData],
    include: Include,
    m: &(dyn Fn(usize, usize) -> Mat2 + Sync),
    scale: f64,
) -> Csr {
    let trips = gather(mesh, include, |e, out| {
        let d = &ed[e];
        let nodes = &mesh.elements[e];
        let mut be = [[0.0; 8]; 4];
        for q in 0..d.nq {
            let pd = &d.qp[q];
            let mq = m(e, q);
            let w = scale * pd.jxw;
            for a in 0..d.nn {
                for b in 0..d.nn {
                    for k in 0..2 {
                        let s = mq[(k, 0)] * pd.grad[b][0] + mq[(k, 1)] * pd.grad[b][1];
                        be[a][2 * b + k] += w * pd.n[a] * s;
                    }
                }
            }
        }
        for a in 0..d.nn {
            for b in 0..2 * d.nn {
                out.push((nodes[a], 2 * nodes[b / 2] + b % 2, be[a][b]));
            }
        }
    });
    Csr::from_triplets(mesh.n_nodes(), 2 * mesh.n_nodes(), &trips)
}

/// `c(p, q) = scale ∫ K ∇p · ∇q` (rows test `q`).
pub fn assemble_c(
    mesh: &Mesh,
    ed: &[ElementData],
    include: Include,
    k: &(dyn Fn(usize, usize) -> Mat2 + Sync),
    scale: f64,
) -> Csr {
    let trips = gather(mesh, include, |e, out| {
        let d = &ed[e];
        let nodes = &mesh.elements[e];
        let mut ce = [[0.0; 4]; 4];
        for q in 0..d.nq {
            let pd = &d.qp[q];
            let kq = k(e, q);
            let w = scale * pd.jxw;
            for a in 0..d.nn {
                for b in 0..d.nn {
                    let kg = [
                        kq[(0, 0)] * pd.grad[b][0] + kq[(0, 1)] * pd.grad[b][1],
                        kq[(1, 0)] * pd.grad[b][0] + kq[(1, 1)] * pd.grad[b][1],
                    ];
                    ce[a][b] += w * (pd.grad[a][0] * kg[0] + pd.grad[a][1] * kg[1]);
                }
            }
        }
        for a in 0..d.nn {
            for b in 0..d.nn {
                out.push((nodes[a], nodes[b], ce[a][b]));
            }
        }
    });
    Csr::from_triplets(mesh.n_nodes(), mesh.n_nodes(), &trips)
}

/// `m(p, q) = scale ∫ g p q` for a scalar coefficient `g`.
pub fn assemble_mass(
    mesh: &Mesh,
    ed: &[ElementData],
    include: Include,
    g: &(dyn Fn(usize, usize) -> f64 + Sync),
    scale: f64,
) -> Csr {
    let trips = gather(mesh, include, |e, out| {
        let d = &ed[e];
        let nodes = &mesh.elements[e];
        let mut me = [[0.0; 4]; 4];
        for q in 0..d.nq {
            let pd = &d.qp[q];
            let w = scale * pd.jxw * g(e, q);
            for a in 0..d.nn {
                for b in 0..d.nn {
                    me[a][b] += w * pd.n[a] * pd.n[b];
                }
            }
        }
        for a in 0..d.nn {
            for b in 0..d.nn {
                out.push((nodes[a], nodes[b], me[a][b]));
            }
        }
    });
    Csr::from_triplets(mesh.n_nodes(), mesh.n_nodes(), &trips)
}

/// `s(p, q) = Σ_e τ_e ∫_e (p − Π_e p)(q − Π_e q)` with `Π_e` the element
/// mean; vanishes on element-wise constant fields.
pub fn assemble_fluctuation_mass(mesh: &Mesh, ed: &[ElementData], include: Include, tau: &(dyn Fn(usize) -> f64 + Sync)) -> Csr {
    let trips = gather(mesh, include, |e, out| {
        let d = &ed[e];
        let nodes = &mesh.elements[e];
        let t = tau(e);
        let mut me = [[0.0; 4]; 4];
        let mut m = [0.0; 4];
        let mut area = 0.0;
        for q in 0..d.nq {
            let pd = &d.qp[q];
            area += pd.jxw;
            for a in 0..d.nn {
                m[a] += pd.jxw * pd.n[a];
                for b in 0..d.nn {
                    me[a][b] += pd.jxw * pd.n[a] * pd.n[b];
                }
            }
        }
        for a in 0..d.nn {
            for b in 0..d.nn {
                out.push((nodes[a], nodes[b], t * (me[a][b] - m[a] * m[b] / area)));
            }
        }
    });
    Csr::from_triplets(mesh.n_nodes(), mesh.n_nodes(), &trips)
}

/// `l(v) = scale ∫ S : ∇v` on vector dofs.
pub fn load_stress(
    mesh: &Mesh,
    ed: &[ElementData],
    include: Include,
    s: &(dyn Fn(usize, usize) -> Mat2 + Sync),
    scale: f64,
) -> Vec<f64> {
    gather_vec(mesh, 2 * mesh.n_nodes(), include, |e, out| {
        let d = &ed[e];
        let nodes = &mesh.elements[e];
        let mut fe = [0.0; 8];
        for q in 0..d.nq {
            let pd = &d.qp[q];
            let sq = s(e, q);
            let w = scale * pd.jxw;
            for a in 0..d.nn {
                for i in 0..2 {
                    fe[2 * a + i] += w * (sq[(i, 0)] * pd.grad[a][0] + sq[(i, 1)] * pd.grad[a][1]);
                }
            }
        }
        for a in 0..2 * d.nn {
            out.push((2 * nodes[a / 2] + a % 2, fe[a]));
        }
    })
}

/// `l(v) = scale ∫ f · v` on vector dofs.
pub fn load_body(
    mesh: &Mesh,
    ed: &[ElementData],
    include: Include,
    f: &(dyn Fn(usize, usize) -> [f64; 2] + Sync),
    scale: f64,
) -> Vec<f64> {
    gather_vec(mesh, 2 * mesh.n_nodes(), include, |e, out| {
        let d = &ed[e];
        let nodes = &mesh.elements[e];
        for q in 0..d.nq {
            let pd = &d.qp[q];
            let fq = f(e, q);
            for a in 0..d.nn {
                for i in 0..2 {
                    out.push((2 * nodes[a] + i, scale * pd.jxw * pd.n[a] * fq[i]));
                }
            }
        }
    })
}

/// `l(q) = scale ∫ f q` on scalar dofs.
pub fn load_scalar(
    mesh: &Mesh,
    ed: &[ElementData],
    include: Include,
    f: &(dyn Fn(usize, usize) -> f64 + Sync),
    scale: f64,
) -> Vec<f64> {
    gather_vec(mesh, mesh.n_nodes(), include, |e, out| {
        let d = &ed[e];
        let nodes = &mesh.elements[e];
        for q in 0..d.nq {
            let pd = &d.qp[q];
            let w = scale * pd.jxw * f(e, q);
            for a in 0..d.nn {
                out.push((nodes[a], w * pd.n[a]));
            }
        }
    })
}

/// `l(q) = scale ∫ g · ∇q` on scalar dofs.
pub fn load_flux(
    mesh: &Mesh,
    ed: &[ElementData],
    include: Include,
    g: &(dyn Fn(usize, usize) -> [f64; 2] + Sync),
    scale: f64,
) -> Vec<f64> {
    gather_vec(mesh, mesh.n_nodes(), include, |e, out| {
        let d = &ed[e];
        let nodes = &mesh.elements[e];
        for q in 0..d.nq {
            let pd = &d.qp[q];
            let gq = g(e, q);
            let w = scale * pd.jxw;
            for a in 0..d.nn {
                out.push((nodes[a], w * (gq[0] * pd.grad[a][0] + gq[1] * pd.grad[a][1])));
            }
        }
    })
}

/// `l(v) = ∫_facets t · v` for a constant traction on boundary facets.
pub fn load_traction(mesh: &Mesh, facets: &[[usize; 2]], t: [f64; 2]) -> Vec<f64> {
    let mut out = vec![0.0; 2 * mesh.n_nodes()];
    for f in facets {
        let (p, q) = (mesh.coords[f[0]], mesh.coords[f[1]]);
        let len = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        for &n in f {
            out[2 * n] += 0.5 * len * t[0];
            out[2 * n + 1] += 0.5 * len * t[1];
        }
    }
    out
}
