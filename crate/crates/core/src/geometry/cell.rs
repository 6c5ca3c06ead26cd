use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::mesh::Mesh;
use super::periodic::{find_periodic_pairs, PeriodicMap};
use super::{channel_label, MATRIX};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelStyle {
    Straight,
    Curved,
}

/// Two horizontal channel bands crossing the unit cell `]-½,½[²`.
///
/// Channel `α` occupies `|y₂ − c_α(y₁)| < w_α/2` with
/// `c_α(y₁) = center_α + amplitude·sin(2π y₁)` for curved channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellParams {
    pub style: ChannelStyle,
    pub widths: [f64; 2],
    pub centers: [f64; 2],
    #[serde(default)]
    pub amplitude: f64,
    /// Element columns across the cell; also the target number of element
    /// layers per unit height.
    pub density: usize,
}

impl CellParams {
    pub fn straight(widths: [f64; 2], density: usize) -> CellParams {
        CellParams {
            style: ChannelStyle::Straight,
            widths,
            centers: [-0.25, 0.25],
            amplitude: 0.0,
            density,
        }
    }

    pub fn curved(width: f64, amplitude: f64, density: usize) -> CellParams {
        CellParams {
            style: ChannelStyle::Curved,
            widths: [width; 2],
            centers: [-0.25, 0.25],
            amplitude,
            density,
        }
    }

    fn centerline(&self, alpha: usize, x: f64) -> f64 {
        match self.style {
            ChannelStyle::Straight => self.centers[alpha],
            ChannelStyle::Curved => self.centers[alpha] + self.amplitude * (2.0 * PI * x).sin(),
        }
    }

    /// Exact channel area (the sinusoidal offset integrates to zero).
    pub fn channel_area(&self, alpha: usize) -> f64 {
        self.widths[alpha]
    }
}

/// Interface facet between one channel element and one matrix element.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterfaceFacet {
    pub nodes: [usize; 2],
    /// Unit normal pointing out of the matrix into the channel.
    pub normal: [f64; 2],
    pub length: f64,
    pub channel_element: usize,
    pub matrix_element: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellDomain {
    pub mesh: Mesh,
    pub periodic: PeriodicMap,
    pub interfaces: [Vec<InterfaceFacet>; 2],
    /// Cell measure |Y| in the reference configuration.
    pub volume: f64,
    pub params: CellParams,
    pub warnings: Vec<String>,
}

impl CellDomain {
    /// Nodes lying on `Γ_α`, closed under periodic identification.
    pub fn interface_nodes(&self, alpha: usize) -> Vec<bool> {
        let mut flags = vec![false; self.mesh.n_nodes()];
        let mut masters = vec![false; self.mesh.n_nodes()];
        for f in &self.interfaces[alpha] {
            for &n in &f.nodes {
                masters[self.periodic.master(n)] = true;
            }
        }
        for (n, flag) in flags.iter_mut().enumerate() {
            *flag = masters[self.periodic.master(n)];
        }
        flags
    }
}

/// Builds the structured quadrilateral unit cell with two channel bands.
pub fn build_unit_cell(params: &CellParams) -> Result<CellDomain> {
    for (a, &w) in params.widths.iter().enumerate() {
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::Geometry(format!("channel {} width fraction {w} outside (0, 1)", a + 1)));
        }
    }
    if params.density < 2 {
        return Err(Error::Resolution(format!("cell density {} below 2", params.density)));
    }
    let nx = params.density;
    let order: [usize; 2] = if params.centers[0] <= params.centers[1] { [0, 1] } else { [1, 0] };

    // Segments bottom to top: matrix, channel, matrix, channel, matrix.
    let breakpoints = |x: f64| -> Vec<f64> {
        let mut b = vec![-0.5];
        for &a in &order {
            let c = params.centerline(a, x);
            b.push(c - 0.5 * params.widths[a]);
            b.push(c + 0.5 * params.widths[a]);
        }
        b.push(0.5);
        b
    };
    let labels = [MATRIX, channel_label(order[0]), MATRIX, channel_label(order[1]), MATRIX];

    let xs: Vec<f64> = (0..=nx).map(|i| -0.5 + i as f64 / nx as f64).collect();
    for &x in &xs {
        let b = breakpoints(x);
        if b.windows(2).any(|w| !(w[1] - w[0] > 1e-12)) {
            return Err(Error::Geometry(format!(
                "channel bands overlap or leave the cell at y1 = {x:.4} (breakpoints {b:?})"
            )));
        }
    }

    let reference = breakpoints(0.5);
    let mut layers = Vec::with_capacity(5);
    for (s, w) in reference.windows(2).enumerate() {
        let shortest = xs
            .iter()
            .map(|&x| {
                let b = breakpoints(x);
                b[s + 1] - b[s]
            })
            .fold(f64::INFINITY, f64::min);
        let n = ((w[1] - w[0]) * nx as f64).round() as usize;
        let min_layers = if labels[s] == MATRIX { 1 } else { 2 };
        if n < min_layers || (shortest * nx as f64) < 0.5 * min_layers as f64 {
            let what = if labels[s] == MATRIX {
                "matrix segment".to_string()
            } else {
                format!("channel {}", labels[s])
            };
            return Err(Error::Resolution(format!(
                "{what} of height {:.4} gets {n} element layers at density {nx} (need at least {min_layers})",
                w[1] - w[0]
            )));
        }
        layers.push(n);
    }
    let ny: usize = layers.iter().sum();

    let mut coords = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // Locate row j within its segment.
        let (mut s, mut k) = (0, j);
        while s < layers.len() - 1 && k >= layers[s] {
            k -= layers[s];
            s += 1;
        }
        for &x in &xs {
            let b = breakpoints(x);
            let y = if j == ny {
                0.5
            } else {
                b[s] + (b[s + 1] - b[s]) * k as f64 / layers[s] as f64
            };
            coords.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut elements = Vec::with_capacity(nx * ny);
    let mut regions = Vec::with_capacity(nx * ny);
    let mut row_label = Vec::with_capacity(ny);
    for (s, &n) in layers.iter().enumerate() {
        row_label.extend(std::iter::repeat(labels[s]).take(n));
    }
    for (j, &label) in row_label.iter().enumerate() {
        for i in 0..nx {
            elements.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            regions.push(label);
        }
    }
    let mut mesh = Mesh::new(coords, elements, regions)?;
    mesh.tag_bounding_box(1e-9);
    let periodic = find_periodic_pairs(&mesh, 1e-8)?;
    let mut warnings = Vec::new();
    let interfaces = extract_interfaces(&mesh, &periodic, &mut warnings)?;
    let volume = mesh.area();
    Ok(CellDomain {
        mesh,
        periodic,
        interfaces,
        volume,
        params: params.clone(),
        warnings,
    })
}

/// Collects the channel/matrix interface facets `Γ₁`, `Γ₂` (including
/// facets that meet across the periodic boundary) with normals pointing out
/// of the matrix.
pub fn extract_interfaces(
    mesh: &Mesh,
    periodic: &PeriodicMap,
    warnings: &mut Vec<String>,
) -> Result<[Vec<InterfaceFacet>; 2]> {
    let mut out: [Vec<InterfaceFacet>; 2] = [Vec::new(), Vec::new()];
    let edges = mesh.edge_map(&|n| periodic.master(n));
    for owners in edges.values() {
        if owners.len() != 2 {
            continue;
        }
        let (ea, ka) = owners[0];
        let (eb, kb) = owners[1];
        let (ra, rb) = (mesh.regions[ea], mesh.regions[eb]);
        if ra == rb {
            continue;
        }
        if ra != MATRIX && rb != MATRIX {
            return Err(Error::Partition(format!(
                "elements {ea} (region {ra}) and {eb} (region {rb}) share a facet between two channels"
            )));
        }
        let ((em, km), ec, rc) = if ra == MATRIX { ((ea, ka), eb, rb) } else { ((eb, kb), ea, ra) };
        let nodes = &mesh.elements[em];
        let a = nodes[km];
        let b = nodes[(km + 1) % nodes.len()];
        let (p, q) = (mesh.coords[a], mesh.coords[b]);
        let length = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
        out[rc as usize - 1].push(InterfaceFacet {
            nodes: [a, b],
            normal: [(q[1] - p[1]) / length, -(q[0] - p[0]) / length],
            length,
            channel_element: ec,
            matrix_element: em,
        });
    }
    for (alpha, facets) in out.iter().enumerate() {
        if facets.is_empty() {
            warnings.push(format!("channel {} has no interface with the matrix", alpha + 1));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_cell_areas() {
        let cell = build_unit_cell(&CellParams::straight([0.2, 0.2], 32)).unwrap();
        let m = &cell.mesh;
        assert!((m.region_area(1) - 0.2).abs() < 1e-12);
        assert!((m.region_area(2) - 0.2).abs() < 1e-12);
        assert!((m.region_area(3) - 0.6).abs() < 1e-12);
        assert!((cell.volume - 1.0).abs() < 1e-12);
    }

    #[test]
    fn curved_cell_area_partition() {
        let cell = build_unit_cell(&CellParams::curved(0.15, 0.1, 24)).unwrap();
        let m = &cell.mesh;
        let total: f64 = (1..=3).map(|l| m.region_area(l)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Piecewise-linear bands: the sine offset integrates to zero
        // over the symmetric column grid.
        assert!((m.region_area(1) - 0.15).abs() < 1e-12);
    }

    #[test]
    fn zero_width_is_rejected() {
        assert!(matches!(build_unit_cell(&CellParams::straight([0.0, 0.2], 16)), Err(Error::Geometry(_))));
    }

    #[test]
    fn overlapping_bands_are_rejected() {
        let mut p = CellParams::straight([0.4, 0.4], 16);
        p.centers = [0.0, 0.1];
        assert!(matches!(build_unit_cell(&p), Err(Error::Geometry(_))));
    }

    #[test]
    fn coarse_mesh_is_rejected() {
        assert!(matches!(
            build_unit_cell(&CellParams::straight([0.05, 0.2], 16)),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn straight_channels_touch_both_side_faces() {
        let cell = build_unit_cell(&CellParams::straight([0.2, 0.2], 16)).unwrap();
        let m = &cell.mesh;
        for label in [1u8, 2] {
            let nodes = m.region_nodes(label);
            for tag in ["left", "right"] {
                assert!(m.boundary_nodes(tag).unwrap().iter().any(|&n| nodes[n]));
            }
            let comps = m.region_components(label, &|n| cell.periodic.master(n));
            assert_eq!(comps.len(), 1);
        }
    }

    #[test]
    fn interface_normals_and_closure() {
        let cell = build_unit_cell(&CellParams::straight([0.2, 0.2], 16)).unwrap();
        for facets in &cell.interfaces {
            assert_eq!(facets.len(), 2 * 16);
            let mut s = [0.0; 2];
            for f in facets {
                assert!(f.normal[0].abs() < 1e-14 && (f.normal[1].abs() - 1.0).abs() < 1e-14);
                s[0] += f.normal[0] * f.length;
                s[1] += f.normal[1] * f.length;
            }
            assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12);
        }
        // Normal points from the matrix into the channel.
        for f in &cell.interfaces[0] {
            let cm = cell.mesh.element_centroid(f.matrix_element);
            let cc = cell.mesh.element_centroid(f.channel_element);
            assert!((cc[1] - cm[1]) * f.normal[1] > 0.0);
        }
    }

    #[test]
    fn curved_interfaces_close() {
        let cell = build_unit_cell(&CellParams::curved(0.15, 0.1, 16)).unwrap();
        for facets in &cell.interfaces {
            let s = facets.iter().fold([0.0; 2], |s, f| {
                [s[0] + f.normal[0] * f.length, s[1] + f.normal[1] * f.length]
            });
            assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12);
        }
    }

    #[test]
    fn channel_touching_channel_is_a_partition_error() {
        let mut cell = build_unit_cell(&CellParams::straight([0.2, 0.2], 16)).unwrap();
        let n = cell.mesh.regions.len();
        for r in cell.mesh.regions.iter_mut().take(n).filter(|r| **r == 3) {
            *r = 1;
        }
        let mut w = Vec::new();
        assert!(matches!(
            extract_interfaces(&cell.mesh, &cell.periodic, &mut w),
            Err(Error::Partition(_))
        ));
    }

    #[test]
    fn missing_channel_gives_warning() {
        let cell = build_unit_cell(&CellParams::straight([0.2, 0.2], 16)).unwrap();
        let mut mesh = cell.mesh.clone();
        for r in mesh.regions.iter_mut().filter(|r| **r == 2) {
            *r = 3;
        }
        let mut w = Vec::new();
        let f = extract_interfaces(&mesh, &cell.periodic, &mut w).unwrap();
        assert!(f[1].is_empty());
        assert_eq!(w.len(), 1);
    }
}
