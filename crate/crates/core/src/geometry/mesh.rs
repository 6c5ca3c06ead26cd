use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TAG_LEFT: &str = "left";
pub const TAG_RIGHT: &str = "right";
pub const TAG_BOTTOM: &str = "bottom";
pub const TAG_TOP: &str = "top";

/// Unstructured 2D mesh of 3-node triangles and 4-node quadrilaterals.
///
/// Element connectivity is counter-clockwise. `regions` carries one integer
/// label per element; boundary facets are stored per named tag.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct Mesh {
    pub coords: Vec<[f64; 2]>,
    pub elements: Vec<Vec<usize>>,
    pub regions: Vec<u8>,
    pub boundaries: BTreeMap<String, Vec<[usize; 2]>>,
}

impl Mesh {
    pub fn new(coords: Vec<[f64; 2]>, elements: Vec<Vec<usize>>, regions: Vec<u8>) -> Result<Mesh> {
        let mesh = Mesh {
            coords,
            elements,
            regions,
            boundaries: BTreeMap::new(),
        };
        mesh.validate()?;
        Ok(mesh)
    }

    /// Structured `nx` x `ny` quadrilateral mesh of the rectangle
    /// `[x0, x0 + lx] x [y0, y0 + ly]`, with all boundary sides tagged.
    pub fn rectangle(origin: [f64; 2], lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Mesh> {
        if nx == 0 || ny == 0 || lx <= 0.0 || ly <= 0.0 {
            return Err(Error::Geometry(format!(
                "invalid rectangle {lx} x {ly} with {nx} x {ny} elements"
            )));
        }
        let mut coords = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push([
                    origin[0] + lx * i as f64 / nx as f64,
                    origin[1] + ly * j as f64 / ny as f64,
                ]);
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut elements = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                elements.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let mut mesh = Mesh::new(coords, elements, vec![0; nx * ny])?;
        mesh.tag_bounding_box(1e-9 * lx.max(ly));
        Ok(mesh)
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn element_coords(&self, e: usize) -> ([[f64; 2]; 4], usize) {
        let nodes = &self.elements[e];
        let mut out = [[0.0; 2]; 4];
        for (k, &n) in nodes.iter().enumerate() {
            out[k] = self.coords[n];
        }
        (out, nodes.len())
    }

    /// Signed area by the shoelace formula (positive for counter-clockwise).
    pub fn element_area(&self, e: usize) -> f64 {
        let nodes = &self.elements[e];
        let n = nodes.len();
        let mut a = 0.0;
        for k in 0..n {
            let p = self.coords[nodes[k]];
            let q = self.coords[nodes[(k + 1) % n]];
            a += p[0] * q[1] - q[0] * p[1];
        }
        0.5 * a
    }

    pub fn element_centroid(&self, e: usize) -> [f64; 2] {
        let nodes = &self.elements[e];
        let mut c = [0.0; 2];
        for &n in nodes {
            c[0] += self.coords[n][0];
            c[1] += self.coords[n][1];
        }
        let k = nodes.len() as f64;
        [c[0] / k, c[1] / k]
    }

    pub fn area(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.element_area(e)).sum()
    }

    pub fn region_area(&self, label: u8) -> f64 {
        (0..self.n_elements())
            .filter(|&e| self.regions[e] == label)
            .map(|e| self.element_area(e))
            .sum()
    }

    /// Checks connectivity ranges, element kinds and positive element areas.
    pub fn validate(&self) -> Result<()> {
        if self.regions.len() != self.elements.len() {
            return Err(Error::Geometry(format!(
                "{} region labels for {} elements",
                self.regions.len(),
                self.elements.len()
            )));
        }
        for (e, nodes) in self.elements.iter().enumerate() {
            if nodes.len() != 3 && nodes.len() != 4 {
                return Err(Error::Geometry(format!(
                    "element {e} has {} nodes; only 3-node triangles and 4-node quads are supported",
                    nodes.len()
                )));
            }
            if let Some(&n) = nodes.iter().find(|&&n| n >= self.coords.len()) {
                return Err(Error::Geometry(format!("element {e} references missing node {n}")));
            }
        }
        self.check_orientation()
    }

    /// Fails with [`Error::InvertedElement`] on the first element with a
    /// non-positive Jacobian at any corner.
    pub fn check_orientation(&self) -> Result<()> {
        for e in 0..self.n_elements() {
            let j = self.min_corner_jacobian(e);
            if j <= 0.0 {
                return Err(Error::InvertedElement {
                    element: Some(e),
                    jacobian: j,
                });
            }
        }
        Ok(())
    }

    /// Smallest corner cross product; for triangles this is twice the area.
    pub fn min_corner_jacobian(&self, e: usize) -> f64 {
        let nodes = &self.elements[e];
        let n = nodes.len();
        (0..n)
            .map(|k| {
                let p = self.coords[nodes[k]];
                let a = self.coords[nodes[(k + 1) % n]];
                let b = self.coords[nodes[(k + n - 1) % n]];
                (a[0] - p[0]) * (b[1] - p[1]) - (a[1] - p[1]) * (b[0] - p[0])
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Map from undirected edge (keyed through `identify`) to the elements
    /// sharing it, together with the local edge index.
    pub fn edge_map(&self, identify: &dyn Fn(usize) -> usize) -> BTreeMap<(usize, usize), Vec<(usize, usize)>> {
        let mut map: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
        for (e, nodes) in self.elements.iter().enumerate() {
            let n = nodes.len();
            for k in 0..n {
                let a = identify(nodes[k]);
                let b = identify(nodes[(k + 1) % n]);
                map.entry((a.min(b), a.max(b))).or_default().push((e, k));
            }
        }
        map
    }

    /// Boundary edges in element orientation (edges owned by exactly one element).
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        let map = self.edge_map(&|n| n);
        let mut out = Vec::new();
        for owners in map.values() {
            if let [(e, k)] = owners.as_slice() {
                let nodes = &self.elements[*e];
                out.push([nodes[*k], nodes[(*k + 1) % nodes.len()]]);
            }
        }
        out
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.coords {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        (lo, hi)
    }

    /// Tags boundary edges lying on the sides of the bounding box as
    /// left/right/bottom/top. Edges on no side stay untagged.
    pub fn tag_bounding_box(&mut self, tol: f64) {
        let (lo, hi) = self.bounding_box();
        let mut tags: BTreeMap<String, Vec<[usize; 2]>> = BTreeMap::new();
        for edge in self.boundary_edges() {
            let p = self.coords[edge[0]];
            let q = self.coords[edge[1]];
            let on = |d: usize, v: f64| (p[d] - v).abs() <= tol && (q[d] - v).abs() <= tol;
            let tag = if on(0, lo[0]) {
                TAG_LEFT
            } else if on(0, hi[0]) {
                TAG_RIGHT
            } else if on(1, lo[1]) {
                TAG_BOTTOM
            } else if on(1, hi[1]) {
                TAG_TOP
            } else {
                continue;
            };
            tags.entry(tag.to_string()).or_default().push(edge);
        }
        self.boundaries = tags;
    }

    /// Sorted unique nodes of a tagged boundary.
    pub fn boundary_nodes(&self, tag: &str) -> Option<Vec<usize>> {
        let facets = self.boundaries.get(tag)?;
        let mut nodes: Vec<usize> = facets.iter().flat_map(|f| f.iter().copied()).collect();
        nodes.sort_unstable();
        nodes.dedup();
        Some(nodes)
    }

    /// Per-node flag: node belongs to at least one element with the given label.
    pub fn region_nodes(&self, label: u8) -> Vec<bool> {
        let mut flags = vec![false; self.n_nodes()];
        for (e, nodes) in self.elements.iter().enumerate() {
            if self.regions[e] == label {
                for &n in nodes {
                    flags[n] = true;
                }
            }
        }
        flags
    }

    /// Connected components of the elements carrying `label`, where two
    /// elements are adjacent when they share an edge after node
    /// identification through `identify` (e.g. periodic masters).
    pub fn region_components(&self, label: u8, identify: &dyn Fn(usize) -> usize) -> Vec<Vec<usize>> {
        let members: Vec<usize> = (0..self.n_elements()).filter(|&e| self.regions[e] == label).collect();
        let mut parent: Vec<usize> = (0..self.n_elements()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for owners in self.edge_map(identify).values() {
            let inside: Vec<usize> = owners
                .iter()
                .map(|&(e, _)| e)
                .filter(|&e| self.regions[e] == label)
                .collect();
            for w in inside.windows(2) {
                let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for e in members {
            let r = find(&mut parent, e);
            groups.entry(r).or_default().push(e);
        }
        groups.into_values().collect()
    }

    /// Index of the element containing `p` (current coordinates), if any.
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        let tol = 1e-12 * self.characteristic_length();
        (0..self.n_elements()).find(|&e| {
            let nodes = &self.elements[e];
            let n = nodes.len();
            (0..n).all(|k| {
                let a = self.coords[nodes[k]];
                let b = self.coords[nodes[(k + 1) % n]];
                (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= -tol
            })
        })
    }

    pub fn characteristic_length(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi[0] - lo[0]).max(hi[1] - lo[1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_tags_cover_boundary() {
        let mesh = Mesh::rectangle([0.0, 0.0], 0.2, 0.1, 4, 2).unwrap();
        let n_tagged: usize = mesh.boundaries.values().map(|v| v.len()).sum();
        assert_eq!(n_tagged, mesh.boundary_edges().len());
        assert_eq!(mesh.boundaries[TAG_LEFT].len(), 2);
        assert_eq!(mesh.boundaries[TAG_TOP].len(), 4);
        assert!((mesh.area() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn inverted_element_is_rejected() {
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let err = Mesh::new(coords, vec![vec![0, 3, 2, 1]], vec![0]).unwrap_err();
        assert!(matches!(err, Error::InvertedElement { element: Some(0), .. }));
    }

    #[test]
    fn out_of_range_connectivity_is_rejected() {
        let coords = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]];
        assert!(Mesh::new(coords, vec![vec![0, 1, 5]], vec![0]).is_err());
    }

    #[test]
    fn locate_finds_containing_element() {
        let mesh = Mesh::rectangle([0.0, 0.0], 1.0, 1.0, 2, 2).unwrap();
        assert_eq!(mesh.locate([0.75, 0.25]), Some(1));
        assert_eq!(mesh.locate([0.25, 0.75]), Some(2));
        assert_eq!(mesh.locate([1.5, 0.5]), None);
    }
}
