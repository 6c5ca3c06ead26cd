use std::collections::HashMap;

use super::cell::CellDomain;
use super::mesh::Mesh;
use crate::error::{Error, Result};

/// Tiles `nx × ny` translated copies of the cell, scaled so one cell spans
/// `scale` in each direction, into a conforming mesh of
/// `[0, nx·scale] × [0, ny·scale]`. Coincident nodes of neighbouring copies
/// are merged within `1e-8·scale`.
pub fn tile_cell(cell: &CellDomain, nx: usize, ny: usize, scale: f64) -> Result<Mesh> {
    if nx == 0 || ny == 0 || !(scale > 0.0) {
        return Err(Error::Tiling(format!("invalid tiling {nx} x {ny} at scale {scale}")));
    }
    let src = &cell.mesh;
    let (lo, hi) = src.bounding_box();
    let period = [hi[0] - lo[0], hi[1] - lo[1]];
    let tol = 1e-8 * scale;
    let h = 4.0 * tol;
    let key = |p: [f64; 2]| ((p[0] / h).floor() as i64, (p[1] / h).floor() as i64);

    let mut coords: Vec<[f64; 2]> = Vec::new();
    let mut bins: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut elements = Vec::with_capacity(nx * ny * src.n_elements());
    let mut regions = Vec::with_capacity(nx * ny * src.n_elements());
    for j in 0..ny {
        for i in 0..nx {
            let mut local = Vec::with_capacity(src.n_nodes());
            for p in &src.coords {
                let q = [
                    scale * ((p[0] - lo[0]) / period[0] + i as f64),
                    scale * ((p[1] - lo[1]) / period[1] + j as f64),
                ];
                let (kx, ky) = key(q);
                let mut found = None;
                'search: for dx in -1..=1 {
                    for dy in -1..=1 {
                        if let Some(cands) = bins.get(&(kx + dx, ky + dy)) {
                            for &c in cands {
                                let r = coords[c];
                                if (r[0] - q[0]).abs() <= tol && (r[1] - q[1]).abs() <= tol {
                                    found = Some(c);
                                    break 'search;
                                }
                            }
                        }
                    }
                }
                let id = found.unwrap_or_else(|| {
                    coords.push(q);
                    bins.entry((kx, ky)).or_default().push(coords.len() - 1);
                    coords.len() - 1
                });
                local.push(id);
            }
            for (e, nodes) in src.elements.iter().enumerate() {
                elements.push(nodes.iter().map(|&n| local[n]).collect());
                regions.push(src.regions[e]);
            }
        }
    }
    let mut mesh = Mesh::new(coords, elements, regions)?;
    let (tlo, thi) = mesh.bounding_box();
    for edge in mesh.boundary_edges() {
        let p = mesh.coords[edge[0]];
        let q = mesh.coords[edge[1]];
        let on_side = (0..2).any(|d| {
            [tlo[d], thi[d]]
                .iter()
                .any(|&v| (p[d] - v).abs() <= tol && (q[d] - v).abs() <= tol)
        });
        if !on_side {
            return Err(Error::Tiling(format!(
                "unmatched facet between ({:.6e}, {:.6e}) and ({:.6e}, {:.6e}) inside the tiled domain",
                p[0], p[1], q[0], q[1]
            )));
        }
    }
    mesh.tag_bounding_box(tol);
    Ok(mesh)
}
