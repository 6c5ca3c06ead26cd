//! Macroscopic increment problem for the displacement and the two channel
//! pressures on the current configuration.

use serde::{Deserialize, Serialize};

use crate::coefficients::HomCoeffs;
use crate::constitutive::Mat2;
use crate::error::{Error, Result};
use crate::fem::forms::{self, element_table};
use crate::fem::shape::{point_data, scalar_gradient, scalar_value, vector_gradient, ElementData};
use crate::fem::{BlockSystem, Csr, DofMap, DofMapBuilder, Factorization, Slot};
use crate::geometry::{MacroDomain, Mesh};
use crate::micro::MacroIncrementAt;
use crate::scenario::Scenario;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroState {
    pub domain: MacroDomain,
    /// Accumulated displacement (raw vector dofs).
    pub u: Vec<f64>,
    /// Accumulated channel pressures (per node).
    pub p: [Vec<f64>; 2],
    pub last_du: Vec<f64>,
    pub last_dp: [Vec<f64>; 2],
}

impl MacroState {
    pub fn new(domain: MacroDomain) -> MacroState {
        let n = domain.mesh.n_nodes();
        MacroState {
            domain,
            u: vec![0.0; 2 * n],
            p: [vec![0.0; n], vec![0.0; n]],
            last_du: vec![0.0; 2 * n],
            last_dp: [vec![0.0; n], vec![0.0; n]],
        }
    }
}

/// Increment of the macroscopic fields (raw vectors, prescribed values included).
#[derive(Clone, Debug, PartialEq)]
pub struct MacroIncrement {
    pub du: Vec<f64>,
    pub dp: [Vec<f64>; 2],
}

impl MacroIncrement {
    pub fn max_abs(&self) -> [f64; 3] {
        let m = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        [m(&self.du), m(&self.dp[0]), m(&self.dp[1])]
    }
}

fn tagged_nodes(mesh: &Mesh, tag: &str) -> Result<Vec<usize>> {
    mesh.boundary_nodes(tag)
        .ok_or_else(|| Error::Config(format!("boundary '{tag}' not present on the mesh")))
}

/// Displacement unknowns with the scenario's fixed and tied components.
pub fn displacement_map(mesh: &Mesh, scenario: &Scenario) -> Result<DofMap> {
    let mut b = DofMapBuilder::new(mesh.n_nodes(), 2);
    for d in &scenario.displacement {
        let nodes = tagged_nodes(mesh, &d.boundary)?;
        let c = d.component - 1;
        if d.tied {
            let dofs: Vec<usize> = nodes.iter().map(|&n| 2 * n + c).collect();
            b = b.tie(&dofs);
        } else {
            b = b.fix_nodes(&nodes, c);
        }
    }
    Ok(b.build())
}

/// Prescribed displacement increments at step `k → k+1` (raw vector).
pub fn displacement_increment(mesh: &Mesh, scenario: &Scenario, k: usize) -> Result<Vec<f64>> {
    let mut g = vec![0.0; 2 * mesh.n_nodes()];
    for d in scenario.displacement.iter().filter(|d| !d.tied) {
        let inc = scenario.ramp_increment(&d.ramp, k) * d.value;
        for n in tagged_nodes(mesh, &d.boundary)? {
            g[2 * n + d.component - 1] = inc;
        }
    }
    Ok(g)
}

/// Nodes carrying a pressure condition of `channel` (1-based), optionally
/// restricted to a node mask.
pub fn pressure_nodes(mesh: &Mesh, scenario: &Scenario, channel: usize, mask: Option<&[bool]>) -> Result<Vec<(usize, f64, String)>> {
    let mut out = Vec::new();
    for p in scenario.pressure.iter().filter(|p| p.channel == channel) {
        for n in tagged_nodes(mesh, &p.boundary)? {
            if mask.is_none_or(|m| m[n]) {
                out.push((n, p.value, p.ramp.clone()));
            }
        }
    }
    Ok(out)
}

pub struct MacroSpaces {
    pub u: DofMap,
    pub p: [DofMap; 2],
}

impl MacroSpaces {
    pub fn new(mesh: &Mesh, scenario: &Scenario) -> Result<MacroSpaces> {
        let u = displacement_map(mesh, scenario)?;
        let p = [1, 2].map(|ch| -> Result<DofMap> {
            let nodes: Vec<usize> = pressure_nodes(mesh, scenario, ch, None)?.iter().map(|x| x.0).collect();
            Ok(DofMapBuilder::new(mesh.n_nodes(), 1).fix_nodes(&nodes, 0).build())
        });
        let [p1, p2] = p;
        Ok(MacroSpaces { u, p: [p1?, p2?] })
    }

    /// Channels whose pressure has no prescribed value anywhere.
    pub fn floating_channels(&self) -> Vec<usize> {
        (0..2).filter(|&a| self.p[a].n_fixed_classes() == 0).map(|a| a + 1).collect()
    }
}

/// Raw operators and loads of one macroscopic step.
#[derive(Clone, Debug)]
pub struct MacroAssembly {
    pub k: Csr,
    pub b: [Csr; 2],
    /// `mass[α][β] = ∫ G^α_β p q`.
    pub mass: [[Csr; 2]; 2],
    pub c: [Csr; 2],
    /// Pressure-fluctuation penalty, shared by both channels.
    pub stab: Csr,
    pub load_u: Vec<f64>,
    pub load_p: [Vec<f64>; 2],
}

/// Assembles the operators with coefficients looked up per sample point.
/// `stabilization` scales the pressure-fluctuation penalty, whose element
/// weight is the inverse shear stiffness of the incremental tensor.
pub fn assemble_macro(
    domain: &MacroDomain,
    coeffs: &[HomCoeffs],
    dt: f64,
    scenario: &Scenario,
    k: usize,
    stabilization: f64,
) -> Result<MacroAssembly> {
    if coeffs.len() != domain.sample_points.len() {
        return Err(Error::Assembly(format!(
            "{} coefficient sets for {} sample points",
            coeffs.len(),
            domain.sample_points.len()
        )));
    }
    let mesh = &domain.mesh;
    let ed = element_table(mesh)?;
    let at = |e: usize, q: usize| -> &HomCoeffs { &coeffs[domain.sample_index(e, q)] };
    let all = |_: usize| true;
    let kmat = forms::assemble_a(mesh, &ed, &all, &|e, q| at(e, q).d, 1.0);
    let b = [0, 1].map(|a| forms::assemble_b(mesh, &ed, &all, &|e, q| at(e, q).b[a], 1.0));
    let mass = [0, 1].map(|a| [0, 1].map(|bb| forms::assemble_mass(mesh, &ed, &all, &|e, q| at(e, q).g[a][bb], 1.0)));
    let c = [0, 1].map(|a| forms::assemble_c(mesh, &ed, &all, &|e, q| at(e, q).c[a], 1.0));
    let tau = |e: usize| {
        let nq = ed[e].nq;
        let g = (0..nq).map(|q| at(e, q).d.0[0][1][0][1]).sum::<f64>() / nq as f64;
        if stabilization > 0.0 && g > 0.0 { stabilization / g } else { 0.0 }
    };
    let stab = forms::assemble_fluctuation_mass(mesh, &ed, &all, &tau);

    let mut load_u: Vec<f64> = forms::load_stress(mesh, &ed, &all, &|e, q| -(at(e, q).s + at(e, q).q), 1.0);
    for t in &scenario.traction {
        let facets = mesh
            .boundaries
            .get(&t.boundary)
            .ok_or_else(|| Error::Config(format!("boundary '{}' not present on the mesh", t.boundary)))?;
        let level = scenario.ramp(&t.ramp).eval(scenario.time(k + 1));
        let f = forms::load_traction(mesh, facets, [level * t.value[0], level * t.value[1]]);
        load_u.iter_mut().zip(&f).for_each(|(x, y)| *x += y);
    }
    let load_p = [0, 1].map(|a| {
        let z = forms::load_scalar(mesh, &ed, &all, &|e, q| at(e, q).zeta[a], dt);
        let g = forms::load_flux(mesh, &ed, &all, &|e, q| at(e, q).gamma[a], dt);
        z.iter().zip(&g).map(|(x, y)| x + y).collect()
    });
    Ok(MacroAssembly {
        k: kmat,
        b,
        mass,
        c,
        stab,
        load_u,
        load_p,
    })
}

/// Symmetric block layout
/// `[[K, −B₁ᵀ, −B₂ᵀ], [−B₁, −δt(G₁₁M + C₁), −δt G₁₂M], [−B₂, −δt G₂₁M, −δt(G₂₂M + C₂)]]`.
pub fn solve_macro_increment(
    asm: &MacroAssembly,
    spaces: &MacroSpaces,
    mesh: &Mesh,
    scenario: &Scenario,
    k: usize,
) -> Result<MacroIncrement> {
    let dt = scenario.dt;
    let bt = [asm.b[0].transpose(), asm.b[1].transpose()];
    let mut sys = BlockSystem::new(vec![&spaces.u, &spaces.p[0], &spaces.p[1]]);
    sys.block(0, 0, &asm.k, 1.0);
    for a in 0..2 {
        sys.block(0, a + 1, &bt[a], -1.0).block(a + 1, 0, &asm.b[a], -1.0);
        sys.block(a + 1, a + 1, &asm.c[a], -dt).block(a + 1, a + 1, &asm.stab, -1.0);
        for b in 0..2 {
            sys.block(a + 1, b + 1, &asm.mass[a][b], -dt);
        }
    }
    let floating = spaces.floating_channels();
    let context = if floating.is_empty() {
        "macroscopic increment system".to_string()
    } else {
        let names: Vec<String> = floating.iter().map(|c| format!("channel {c} pressure")).collect();
        format!(
            "macroscopic increment system (all-Neumann field(s) {} fixed only through exchange and coupling)",
            names.join(", ")
        )
    };
    let fact = Factorization::new(sys.matrix(), &context)?;
    let gu = displacement_increment(mesh, scenario, k)?;
    let gp = [1, 2].map(|ch| -> Result<Vec<f64>> {
        let mut g = vec![0.0; mesh.n_nodes()];
        for (n, v, r) in pressure_nodes(mesh, scenario, ch, None)? {
            g[n] = scenario.ramp_increment(&r, k) * v;
        }
        Ok(g)
    });
    let [gp1, gp2] = gp;
    let (gp1, gp2) = (gp1?, gp2?);
    let fixed = [Some(gu.as_slice()), Some(gp1.as_slice()), Some(gp2.as_slice())];
    let rhs = sys.rhs(&[Some(&asm.load_u), Some(&asm.load_p[0]), Some(&asm.load_p[1])], &fixed);
    let x = fact.solve(&[rhs])?.remove(0);
    let mut f = sys.expand(&x, &fixed);
    let dp2 = f.pop().unwrap();
    let dp1 = f.pop().unwrap();
    let du = f.pop().unwrap();
    Ok(MacroIncrement { du, dp: [dp1, dp2] })
}

/// Increment data at every sample point, with increment gradients taken on
/// the configuration before the update and totals after it.
pub fn sample_increments(old: &MacroState, new: &MacroState, inc: &MacroIncrement) -> Vec<MacroIncrementAt> {
    let dom = &old.domain;
    (0..dom.sample_points.len())
        .map(|s| {
            let sp = dom.sample_points[s];
            let nodes = &dom.mesh.elements[sp.element];
            let (xe, nn) = dom.mesh.element_coords(sp.element);
            let pd = point_data(&xe, nn, sp.xi, 0.0);
            let (xn, _) = new.domain.mesh.element_coords(sp.element);
            let pn = point_data(&xn, nn, sp.xi, 0.0);
            MacroIncrementAt {
                grad_du: vector_gradient(&pd, nodes, &inc.du),
                dp: [0, 1].map(|a| scalar_value(&pd, nodes, &inc.dp[a])),
                grad_dp: [0, 1].map(|a| scalar_gradient(&pd, nodes, &inc.dp[a])),
                p0_new: [0, 1].map(|a| scalar_value(&pn, nodes, &new.p[a])),
                grad_p0_new: [0, 1].map(|a| scalar_gradient(&pn, nodes, &new.p[a])),
            }
        })
        .collect()
}

/// Accumulates the increment and moves the mesh to the new configuration.
pub fn apply_increment(state: &MacroState, inc: &MacroIncrement) -> Result<MacroState> {
    let mut next = state.clone();
    for (u, d) in next.u.iter_mut().zip(&inc.du) {
        *u += d;
    }
    for a in 0..2 {
        for (p, d) in next.p[a].iter_mut().zip(&inc.dp[a]) {
            *p += d;
        }
    }
    for (n, c) in next.domain.mesh.coords.iter_mut().enumerate() {
        c[0] += inc.du[2 * n];
        c[1] += inc.du[2 * n + 1];
    }
    next.domain
        .mesh
        .check_orientation()
        .map_err(|e| Error::StepSize(format!("macroscopic element inverted after update ({e})")))?;
    next.last_du = inc.du.clone();
    next.last_dp = inc.dp.clone();
    Ok(next)
}

/// Macroscopic deformation gradient `I + ∇₀u` at a sample point, with the
/// gradient taken on the initial configuration.
pub fn deformation_gradient(initial: &Mesh, state: &MacroState, s: usize) -> Mat2 {
    let sp = state.domain.sample_points[s];
    let (xe, nn) = initial.element_coords(sp.element);
    let pd = point_data(&xe, nn, sp.xi, 0.0);
    Mat2::identity() + vector_gradient(&pd, &initial.elements[sp.element], &state.u)
}

/// Element data and free-slot count, exposed for diagnostics.
pub fn element_data(state: &MacroState) -> Result<Vec<ElementData>> {
    element_table(&state.domain.mesh)
}

pub fn is_prescribed(map: &DofMap, dof: usize) -> bool {
    map.slot(dof) == Slot::Fixed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::Tensor4;
    use crate::geometry::Sampling;

    fn coeff(d: Tensor4, b: [Mat2; 2], c: [Mat2; 2], g: [[f64; 2]; 2]) -> HomCoeffs {
        HomCoeffs {
            d,
            d_alt: d,
            b,
            r: b,
            s: Mat2::zeros(),
            q: Mat2::zeros(),
            c,
            g,
            zeta: [0.0; 2],
            gamma: [[0.0; 2]; 2],
            checks: Default::default(),
        }
    }

    fn iso(lambda: f64, mu: f64) -> Tensor4 {
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        Tensor4::from_fn(|i, j, k, l| lambda * d(i, j) * d(k, l) + mu * (d(i, k) * d(j, l) + d(i, l) * d(j, k)))
    }

    #[test]
    fn zero_data_gives_zero_right_side() {
        let dom = MacroDomain::rectangle(0.2, 0.1, 4, 2, Sampling::PerElement).unwrap();
        let c = coeff(Tensor4::zero(), [Mat2::zeros(); 2], [Mat2::zeros(); 2], [[0.0; 2]; 2]);
        let coeffs = vec![c; dom.sample_points.len()];
        let asm = assemble_macro(&dom, &coeffs, 0.1, &Scenario::validation(0.04), 0, 0.0).unwrap();
        assert!(asm.load_u.iter().chain(&asm.load_p[0]).chain(&asm.load_p[1]).all(|v| *v == 0.0));
    }

    #[test]
    fn missing_coefficients_are_reported() {
        let dom = MacroDomain::rectangle(0.2, 0.1, 4, 2, Sampling::PerElement).unwrap();
        let err = assemble_macro(&dom, &[], 0.1, &Scenario::validation(0.04), 0, 0.0).unwrap_err();
        assert!(matches!(err, Error::Assembly(_)));
    }

    #[test]
    fn single_element_matches_hand_assembly() {
        // Unit square, one element, hand-set coefficients; the reduced
        // operator must equal the explicit 3-field block matrix.
        let dom = MacroDomain::rectangle(1.0, 1.0, 1, 1, Sampling::PerElement).unwrap();
        let d = iso(1.0, 0.5);
        let b = [Mat2::new(0.3, 0.0, 0.0, 0.2), Mat2::new(0.1, 0.05, 0.0, 0.4)];
        let c = [Mat2::identity() * 2.0, Mat2::new(1.0, 0.2, 0.2, 3.0)];
        let g = [[0.7, -0.2], [-0.2, 0.5]];
        let coeffs = vec![coeff(d, b, c, g)];
        let dt = 0.1;
        let asm = assemble_macro(&dom, &coeffs, dt, &Scenario::validation(0.0), 0, 0.0).unwrap();
        // Independent 2×2 Gauss evaluation on the reference square.
        let mesh = &dom.mesh;
        let nodes = &mesh.elements[0];
        let gp = 1.0 / 3f64.sqrt();
        let pts = [[-gp, -gp], [gp, -gp], [gp, gp], [-gp, gp]];
        let corner = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        let local = |a: usize| -> usize {
            let x = mesh.coords[nodes[a]];
            corner.iter().position(|c| ((c[0] + 1.0) / 2.0 - x[0]).abs() < 1e-12 && ((c[1] + 1.0) / 2.0 - x[1]).abs() < 1e-12).unwrap()
        };
        let basis = |a: usize, xi: [f64; 2]| {
            let c = corner[local(a)];
            let n = 0.25 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]);
            // d/dx = 2 d/dxi on the unit square.
            let gx = 0.5 * c[0] * (1.0 + c[1] * xi[1]);
            let gy = 0.5 * c[1] * (1.0 + c[0] * xi[0]);
            (n, [gx, gy])
        };
        let w = 0.25;
        for a in 0..4 {
            for bb in 0..4 {
                let (mut kk, mut mm, mut cc, mut bu) = ([[0.0; 2]; 2], 0.0, [0.0; 2], [[0.0; 2]; 2]);
                for xi in pts {
                    let (na, ga) = basis(a, xi);
                    let (nb, gb) = basis(bb, xi);
                    for i in 0..2 {
                        for k in 0..2 {
                            for j in 0..2 {
                                for l in 0..2 {
                                    kk[i][k] += w * d.get(i, j, k, l) * gb[l] * ga[j];
                                }
                            }
                        }
                    }
                    mm += w * na * nb;
                    for al in 0..2 {
                        let kg = c[al] * nalgebra::Vector2::new(gb[0], gb[1]);
                        cc[al] += w * (ga[0] * kg[0] + ga[1] * kg[1]);
                        for k in 0..2 {
                            bu[al][k] += w * na * (b[al][(k, 0)] * gb[0] + b[al][(k, 1)] * gb[1]);
                        }
                    }
                }
                let (ra, rb) = (nodes[a], nodes[bb]);
                for i in 0..2 {
                    for k in 0..2 {
                        assert!((asm.k.get(2 * ra + i, 2 * rb + k) - kk[i][k]).abs() < 1e-14);
                    }
                }
                for al in 0..2 {
                    assert!((asm.c[al].get(ra, rb) - cc[al]).abs() < 1e-14);
                    for be in 0..2 {
                        assert!((asm.mass[al][be].get(ra, rb) - g[al][be] * mm).abs() < 1e-14);
                    }
                    for k in 0..2 {
                        assert!((asm.b[al].get(ra, 2 * rb + k) - bu[al][k]).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn coupling_blocks_are_transposes() {
        let dom = MacroDomain::rectangle(0.2, 0.1, 4, 2, Sampling::PerElement).unwrap();
        let c = coeff(iso(1e6, 1e6), [Mat2::new(0.3, 0.01, 0.02, 0.2); 2], [Mat2::identity() * 1e-7; 2], [[1e-4, -1e-4], [-1e-4, 1e-4]]);
        let coeffs = vec![c; dom.sample_points.len()];
        let s = Scenario::validation(0.04);
        let asm = assemble_macro(&dom, &coeffs, s.dt, &s, 0, 0.0).unwrap();
        let spaces = MacroSpaces::new(&dom.mesh, &s).unwrap();
        let bt = [asm.b[0].transpose(), asm.b[1].transpose()];
        let mut sys = BlockSystem::new(vec![&spaces.u, &spaces.p[0], &spaces.p[1]]);
        for a in 0..2 {
            sys.block(0, a + 1, &bt[a], -1.0).block(a + 1, 0, &asm.b[a], -1.0);
        }
        assert_eq!(sys.matrix().asymmetry(), 0.0);
    }

    #[test]
    fn inflation_boundary_increments() {
        let dom = MacroDomain::rectangle(0.2, 0.1, 4, 2, Sampling::PerElement).unwrap();
        let c = coeff(iso(1e6, 1e6), [Mat2::identity() * 0.2; 2], [Mat2::identity() * 1e-7; 2], [[1e-4, -1e-4], [-1e-4, 1e-4]]);
        let coeffs = vec![c; dom.sample_points.len()];
        let s = Scenario::inflation(3e5, 1.5e5);
        let asm = assemble_macro(&dom, &coeffs, s.dt, &s, 3, 0.0).unwrap();
        let spaces = MacroSpaces::new(&dom.mesh, &s).unwrap();
        let inc = solve_macro_increment(&asm, &spaces, &dom.mesh, &s, 3).unwrap();
        let expected = (s.ramp("default").eval(0.1) - s.ramp("default").eval(0.075)) * 3e5;
        for n in dom.mesh.boundary_nodes("left").unwrap() {
            assert!((inc.dp[0][n] - expected).abs() < 1e-9 * expected);
        }
    }

    #[test]
    fn uniform_extension_is_homogeneous() {
        let dom = MacroDomain::rectangle(0.2, 0.1, 8, 4, Sampling::PerElement).unwrap();
        let c = coeff(iso(0.0, 1e6), [Mat2::identity() * 0.2; 2], [Mat2::new(1e-7, 0.0, 0.0, 0.0); 2], [[1e-4, -1e-4], [-1e-4, 1e-4]]);
        let coeffs = vec![c; dom.sample_points.len()];
        let s = Scenario::validation(0.04);
        let asm = assemble_macro(&dom, &coeffs, s.dt, &s, 0, 1.0).unwrap();
        let spaces = MacroSpaces::new(&dom.mesh, &s).unwrap();
        let inc = solve_macro_increment(&asm, &spaces, &dom.mesh, &s, 0).unwrap();
        let next = apply_increment(&MacroState::new(dom.clone()), &inc).unwrap();
        let at = sample_increments(&MacroState::new(dom), &next, &inc);
        for a in &at[1..] {
            assert!((a.grad_du - at[0].grad_du).abs().max() < 1e-9);
            for al in 0..2 {
                assert!((a.dp[al] - at[0].dp[al]).abs() <= 1e-9 * at[0].dp[al].abs().max(1e-30));
            }
        }
        assert!(at[0].grad_du[(0, 0)] > 0.0);
    }

    #[test]
    fn fluctuation_penalty_vanishes_on_element_constants() {
        let dom = MacroDomain::rectangle(0.2, 0.1, 4, 2, Sampling::PerElement).unwrap();
        let coeffs = vec![coeff(iso(0.0, 2e6), [Mat2::zeros(); 2], [Mat2::zeros(); 2], [[0.0; 2]; 2]); dom.sample_points.len()];
        let asm = assemble_macro(&dom, &coeffs, 0.1, &Scenario::validation(0.0), 0, 1.0).unwrap();
        assert!(asm.stab.asymmetry() < 1e-24);
        let ones = vec![1.0; dom.mesh.n_nodes()];
        assert!(asm.stab.mul_vec(&ones).iter().all(|v| v.abs() < 1e-20));
        // Row-alternating field: one element of size h×h with values ±1 on
        // its two node rows has fluctuation energy h²/3, weighted by 1/μ.
        let alt: Vec<f64> = dom.mesh.coords.iter().map(|x| if ((x[1] / 0.05).round() as i64) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let h = 0.05;
        let expected = 8.0 * h * h / 3.0 / 2e6;
        assert!((asm.stab.bilinear(&alt, &alt) - expected).abs() < 1e-12 * expected.max(1e-30) + 1e-22);
    }
}
