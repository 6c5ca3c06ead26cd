use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use crate::error::{Error, Result};

/// Master/slave identification of nodes on opposite faces of a
/// rectangular periodic mesh.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicMap {
    /// Final master of every node (identity for interior and master nodes).
    pub master_of: Vec<usize>,
    /// Non-corner (left master, right slave) pairs.
    pub pairs_x: Vec<(usize, usize)>,
    /// Non-corner (bottom master, top slave) pairs.
    pub pairs_y: Vec<(usize, usize)>,
    /// Corner nodes `[bottom-left, bottom-right, top-right, top-left]`;
    /// all of them resolve to the bottom-left master.
    pub corners: [usize; 4],
}

impl PeriodicMap {
    pub fn master(&self, node: usize) -> usize {
        self.master_of[node]
    }

    pub fn is_slave(&self, node: usize) -> bool {
        self.master_of[node] != node
    }
}

/// Pairs boundary nodes of `mesh` across opposite faces of its bounding box.
/// `tol` is relative to the box extent.
pub fn find_periodic_pairs(mesh: &Mesh, tol: f64) -> Result<PeriodicMap> {
    let (lo, hi) = mesh.bounding_box();
    let ext = [hi[0] - lo[0], hi[1] - lo[1]];
    let abs_tol = tol * ext[0].max(ext[1]);
    let on = |n: usize, d: usize, v: f64| (mesh.coords[n][d] - v).abs() <= abs_tol;
    let boundary: Vec<usize> = {
        let mut b: Vec<usize> = mesh.boundary_edges().into_iter().flatten().collect();
        b.sort_unstable();
        b.dedup();
        b
    };

    // Matches slaves on face `hi[d]` to masters on face `lo[d]` by the
    // transverse coordinate.
    let match_axis = |d: usize| -> Result<Vec<(usize, usize)>> {
        let t = 1 - d;
        let mut masters: Vec<usize> = boundary.iter().copied().filter(|&n| on(n, d, lo[d])).collect();
        let slaves: Vec<usize> = boundary.iter().copied().filter(|&n| on(n, d, hi[d])).collect();
        masters.sort_by(|&a, &b| mesh.coords[a][t].total_cmp(&mesh.coords[b][t]));
        let mut used = vec![false; masters.len()];
        let mut pairs = Vec::with_capacity(slaves.len());
        for &s in &slaves {
            let y = mesh.coords[s][t];
            let k = masters.partition_point(|&m| mesh.coords[m][t] < y - abs_tol);
            let hit = (k..masters.len())
                .take_while(|&i| mesh.coords[masters[i]][t] <= y + abs_tol)
                .find(|&i| !used[i]);
            match hit {
                Some(i) => {
                    used[i] = true;
                    pairs.push((masters[i], s));
                }
                None => {
                    return Err(Error::Pairing {
                        node: s,
                        x: mesh.coords[s][0],
                        y: mesh.coords[s][1],
                    })
                }
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            let m = masters[i];
            return Err(Error::Pairing {
                node: m,
                x: mesh.coords[m][0],
                y: mesh.coords[m][1],
            });
        }
        Ok(pairs)
    };

    let px = match_axis(0)?;
    let py = match_axis(1)?;

    let mut master_of: Vec<usize> = (0..mesh.n_nodes()).collect();
    for &(m, s) in px.iter().chain(py.iter()) {
        master_of[s] = m;
    }
    for n in 0..master_of.len() {
        let mut m = n;
        while master_of[m] != m {
            m = master_of[m];
        }
        master_of[n] = m;
    }

    let corner = |x: f64, y: f64| {
        boundary
            .iter()
            .copied()
            .find(|&n| on(n, 0, x) && on(n, 1, y))
            .ok_or(Error::Pairing { node: usize::MAX, x, y })
    };
    let corners = [corner(lo[0], lo[1])?, corner(hi[0], lo[1])?, corner(hi[0], hi[1])?, corner(lo[0], hi[1])?];
    let is_corner = |n: usize| corners.contains(&n);
    let pairs_x = px.into_iter().filter(|&(m, s)| !is_corner(m) && !is_corner(s)).collect();
    let pairs_y = py.into_iter().filter(|&(m, s)| !is_corner(m) && !is_corner(s)).collect();

    Ok(PeriodicMap {
        master_of,
        pairs_x,
        pairs_y,
        corners,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(n: usize) -> Mesh {
        Mesh::rectangle([-0.5, -0.5], 1.0, 1.0, n, n).unwrap()
    }

    #[test]
    fn structured_grid_pairs() {
        let mesh = square(4);
        let map = find_periodic_pairs(&mesh, 1e-8).unwrap();
        assert_eq!(map.pairs_x.len(), 3);
        assert_eq!(map.pairs_y.len(), 3);
        let bl = map.corners[0];
        assert!(map.corners.iter().all(|&c| map.master(c) == bl));
        for &(m, s) in &map.pairs_x {
            assert!((mesh.coords[s][0] - mesh.coords[m][0] - 1.0).abs() < 1e-12);
            assert!((mesh.coords[s][1] - mesh.coords[m][1]).abs() < 1e-12);
        }
        let slaves = map.master_of.iter().enumerate().filter(|(n, &m)| *n != m).count();
        assert_eq!(slaves, 3 + 3 + 3);
        for &(m, _) in map.pairs_x.iter().chain(&map.pairs_y) {
            assert!(!map.is_slave(m));
        }
    }

    #[test]
    fn perturbed_node_fails() {
        let mut mesh = square(4);
        let right = mesh.boundary_nodes("right").unwrap();
        let n = right[2];
        mesh.coords[n][1] += 1e-3;
        let err = find_periodic_pairs(&mesh, 1e-8).unwrap_err();
        assert!(matches!(err, Error::Pairing { .. }));
    }

    #[test]
    fn pairing_is_deterministic() {
        let mesh = square(6);
        assert_eq!(find_periodic_pairs(&mesh, 1e-8).unwrap(), find_periodic_pairs(&mesh, 1e-8).unwrap());
    }
}
