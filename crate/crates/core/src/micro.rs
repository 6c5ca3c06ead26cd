//! Cell problems on one deformed periodic cell: the coupled
//! displacement/matrix-pressure correctors, the particular response to the
//! reference state, and the channel flow correctors.

use serde::{Deserialize, Serialize};

use crate::constitutive::{
    evaluate_point, push_forward_permeability, tensor_b, tensor_h, MaterialParams, Mat2, PermeabilityUpdate,
    Tensor4,
};
use crate::error::{Error, Result};
use crate::fem::forms::{self, element_table};
use crate::fem::shape::{scalar_value, vector_gradient, ElementData};
use crate::fem::{BlockSystem, Csr, DofMap, DofMapBuilder, Factorization};
use crate::geometry::{channel_label, CellDomain, MATRIX};

/// Quadrature-point storage stride per element.
pub const QP_STRIDE: usize = 4;

/// Index pairs `(i, j)` in storage order `2i + j`: 11, 12, 21, 22.
pub const PAIRS: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];

/// Deformed cell attached to one macroscopic sample point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MicroState {
    pub cell: CellDomain,
    pub material: MaterialParams,
    /// Previous displacement increment on the cell (raw vector dofs).
    pub ubar: Vec<f64>,
    /// Accumulated deformation gradient per quadrature point.
    pub f: Vec<Mat2>,
    pub sigma_eff: Vec<Mat2>,
    pub tangent: Vec<Tensor4>,
    /// Current and incremental permeability per quadrature point.
    pub k: Vec<Mat2>,
    pub dk: Vec<Mat2>,
    /// Matrix pressure at the current time level (per node, zero off `Y₃`).
    pub p3: Vec<f64>,
    /// Macroscopic channel pressures and their gradients at this point.
    pub p0: [f64; 2],
    pub grad_p0: [[f64; 2]; 2],
    /// Channel pressure fluctuations (per node, zero off `Y_α`).
    pub p1: [Vec<f64>; 2],
}

impl MicroState {
    pub fn new(cell: CellDomain, material: MaterialParams) -> Result<MicroState> {
        let ne = cell.mesh.n_elements();
        let nn = cell.mesh.n_nodes();
        let mut k = vec![Mat2::zeros(); ne * QP_STRIDE];
        for e in 0..ne {
            for q in 0..QP_STRIDE {
                k[e * QP_STRIDE + q] = material.permeability_of(cell.mesh.regions[e]);
            }
        }
        let mut state = MicroState {
            ubar: vec![0.0; 2 * nn],
            f: vec![Mat2::identity(); ne * QP_STRIDE],
            sigma_eff: vec![Mat2::zeros(); ne * QP_STRIDE],
            tangent: vec![Tensor4::zero(); ne * QP_STRIDE],
            dk: vec![Mat2::zeros(); ne * QP_STRIDE],
            k,
            p3: vec![0.0; nn],
            p0: [0.0; 2],
            grad_p0: [[0.0; 2]; 2],
            p1: [vec![0.0; nn], vec![0.0; nn]],
            cell,
            material,
        };
        let ed = element_table(&state.cell.mesh)?;
        state.refresh(&ed)?;
        Ok(state)
    }

    pub fn volume(&self) -> f64 {
        self.cell.mesh.area()
    }

    pub fn n_nodes(&self) -> usize {
        self.cell.mesh.n_nodes()
    }

    /// Pore pressure at a quadrature point: `p₃` in the matrix, the
    /// macroscopic channel pressure in the channels.
    pub fn pressure_at(&self, ed: &[ElementData], e: usize, q: usize) -> f64 {
        let region = self.cell.mesh.regions[e];
        if region == MATRIX {
            scalar_value(&ed[e].qp[q], &self.cell.mesh.elements[e], &self.p3)
        } else {
            self.p0[region as usize - 1]
        }
    }

    /// Total Cauchy stress `σ_eff − p I` at a quadrature point.
    pub fn total_stress(&self, ed: &[ElementData], e: usize, q: usize) -> Mat2 {
        self.sigma_eff[e * QP_STRIDE + q] - Mat2::identity() * self.pressure_at(ed, e, q)
    }

    /// Recomputes effective stress, tangent operator and (optionally)
    /// permeabilities from the stored deformation gradients and pressures.
    pub fn refresh(&mut self, ed: &[ElementData]) -> Result<()> {
        let mesh = &self.cell.mesh;
        for e in 0..mesh.n_elements() {
            let region = mesh.regions[e];
            let mu = self.material.mu_of(region);
            for q in 0..ed[e].nq {
                let i = e * QP_STRIDE + q;
                let p = self.pressure_at(ed, e, q);
                let r = evaluate_point(&self.f[i], mu, p).map_err(|err| match err {
                    Error::InvertedElement { jacobian, .. } => Error::InvertedElement {
                        element: Some(e),
                        jacobian,
                    },
                    other => other,
                })?;
                self.sigma_eff[i] = r.sigma_eff;
                self.tangent[i] = r.tangent;
                if self.material.permeability_update == PermeabilityUpdate::PushForward {
                    let k_new = push_forward_permeability(&self.material.permeability_of(region), &self.f[i]);
                    self.dk[i] = k_new - self.k[i];
                    self.k[i] = k_new;
                }
            }
        }
        Ok(())
    }

    /// Coordinates relative to the current cell centroid, as a raw scalar
    /// field per direction.
    pub fn local_coordinates(&self) -> [Vec<f64>; 2] {
        let mesh = &self.cell.mesh;
        let area = mesh.area();
        let mut c = [0.0; 2];
        for e in 0..mesh.n_elements() {
            let a = mesh.element_area(e);
            let m = mesh.element_centroid(e);
            c[0] += a * m[0];
            c[1] += a * m[1];
        }
        c = [c[0] / area, c[1] / area];
        [
            mesh.coords.iter().map(|p| p[0] - c[0]).collect(),
            mesh.coords.iter().map(|p| p[1] - c[1]).collect(),
        ]
    }

    /// Raw vector field `Π^{ij}` with component `i` equal to `y_j`.
    pub fn affine_modes(&self) -> [Vec<f64>; 4] {
        let y = self.local_coordinates();
        PAIRS.map(|(i, j)| {
            let mut v = vec![0.0; 2 * self.n_nodes()];
            for n in 0..self.n_nodes() {
                v[2 * n + i] = y[j][n];
            }
            v
        })
    }

    /// Nodes on `Γ_α` (closed under periodicity).
    pub fn interface_nodes(&self, alpha: usize) -> Vec<bool> {
        self.cell.interface_nodes(alpha)
    }
}

/// Assembled cell forms at the current configuration, all carrying the
/// `1/|Y|` averaging factor.
#[derive(Clone, Debug)]
pub struct CellForms {
    pub ed: Vec<ElementData>,
    pub inv_volume: f64,
    pub a: Csr,
    /// `b_l` for `l = 1, 2, 3` (rows scalar test, columns vector dofs).
    pub b: [Csr; 3],
    /// `c_l` with `K̃ + H(ū)`.
    pub c: [Csr; 3],
    /// `d_l` with `δK̃`.
    pub d: [Csr; 3],
    pub warnings: Vec<String>,
}

impl CellForms {
    pub fn assemble(state: &MicroState) -> Result<CellForms> {
        let mesh = &state.cell.mesh;
        let ed = element_table(mesh)?;
        let inv_volume = 1.0 / mesh.area();
        let ne = mesh.n_elements();
        let mut grad_ubar = vec![Mat2::zeros(); ne * QP_STRIDE];
        let mut warnings = Vec::new();
        for e in 0..ne {
            for q in 0..ed[e].nq {
                let g = vector_gradient(&ed[e].qp[q], &mesh.elements[e], &state.ubar);
                grad_ubar[e * QP_STRIDE + q] = g;
                let k = state.k[e * QP_STRIDE + q];
                let kh = k + tensor_h(&g, &k);
                let (tr, det) = (kh.trace(), kh.determinant());
                if !(tr > 0.0 && det > 0.0) && k.trace() > 0.0 {
                    warnings.push(format!(
                        "effective permeability K + H(u) not positive definite in element {e}, point {q}"
                    ));
                }
            }
        }
        let tangent = |e: usize, q: usize| state.tangent[e * QP_STRIDE + q];
        let bbar = |e: usize, q: usize| tensor_b(&grad_ubar[e * QP_STRIDE + q]) + Mat2::identity();
        let kh = |e: usize, q: usize| {
            let i = e * QP_STRIDE + q;
            state.k[i] + tensor_h(&grad_ubar[i], &state.k[i])
        };
        let dk = |e: usize, q: usize| state.dk[e * QP_STRIDE + q];
        let all = |_: usize| true;
        let a = forms::assemble_a(mesh, &ed, &all, &tangent, inv_volume);
        let region = |l: u8| move |e: usize| mesh.regions[e] == l;
        let labels = [channel_label(0), channel_label(1), MATRIX];
        let b = labels.map(|l| forms::assemble_b(mesh, &ed, &region(l), &bbar, inv_volume));
        let c = labels.map(|l| forms::assemble_c(mesh, &ed, &region(l), &kh, inv_volume));
        let d = labels.map(|l| forms::assemble_c(mesh, &ed, &region(l), &dk, inv_volume));
        Ok(CellForms {
            ed,
            inv_volume,
            a,
            b,
            c,
            d,
            warnings,
        })
    }

    /// `⨍_Y σ : ∇v` for the total stress of the state.
    pub fn stress_load(&self, state: &MicroState) -> Vec<f64> {
        let s = |e: usize, q: usize| state.total_stress(&self.ed, e, q);
        forms::load_stress(&state.cell.mesh, &self.ed, &|_| true, &s, self.inv_volume)
    }
}

/// Characteristic and particular responses of one cell for one step.
/// All fields are raw nodal vectors on the cell mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Responses {
    pub pi_modes: [Vec<f64>; 4],
    pub omega_ij: [Vec<f64>; 4],
    pub pi_ij: [Vec<f64>; 4],
    pub omega_a: [Vec<f64>; 2],
    pub pi_a: [Vec<f64>; 2],
    pub u_p: Vec<f64>,
    pub p3_p: Vec<f64>,
    /// `η_α^i`, indexed `[α][i]`.
    pub eta: [[Vec<f64>; 2]; 2],
    pub p_p: [Vec<f64>; 2],
    /// Channel fields `h_α = y · ∇p⁰_α + p¹_α` of the reference state.
    pub history: [Vec<f64>; 2],
}

/// Unknown layout of the coupled displacement/matrix-pressure problem.
pub struct PoroSpaces {
    pub u: DofMap,
    pub p: DofMap,
    pub mean_rows: [Vec<f64>; 2],
    pub gamma: [Vec<bool>; 2],
}

impl PoroSpaces {
    pub fn new(state: &MicroState, forms: &CellForms) -> PoroSpaces {
        let mesh = &state.cell.mesh;
        let master = &state.cell.periodic.master_of;
        let u = DofMapBuilder::new(mesh.n_nodes(), 2).periodic(master).build();
        let gamma = [state.interface_nodes(0), state.interface_nodes(1)];
        let fixed: Vec<usize> = (0..mesh.n_nodes()).filter(|&n| gamma[0][n] || gamma[1][n]).collect();
        let p = DofMapBuilder::new(mesh.n_nodes(), 1)
            .periodic(master)
            .restrict_nodes(&mesh.region_nodes(MATRIX))
            .fix_nodes(&fixed, 0)
            .build();
        let mean_rows = [0, 1].map(|c| {
            let f = move |_: usize, _: usize| if c == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
            forms::load_body(mesh, &forms.ed, &|_| true, &f, forms.inv_volume)
        });
        PoroSpaces { u, p, mean_rows, gamma }
    }

    /// Raw scalar lift equal to 1 on `Γ_α` and 0 elsewhere.
    pub fn lift(&self, alpha: usize) -> Vec<f64> {
        self.gamma[alpha].iter().map(|&g| if g { 1.0 } else { 0.0 }).collect()
    }
}

/// Solves all cell problems of one step. One factorization of the coupled
/// operator serves the four strain pairs, the two channel-pressure
/// problems and the particular response.
pub fn solve_cell(state: &MicroState, forms: &CellForms, dt: f64) -> Result<Responses> {
    let spaces = PoroSpaces::new(state, forms);
    let b3t = forms.b[2].transpose();
    let mut sys = BlockSystem::new(vec![&spaces.u, &spaces.p]);
    sys.block(0, 0, &forms.a, 1.0)
        .block(0, 1, &b3t, -1.0)
        .block(1, 0, &forms.b[2], 1.0)
        .block(1, 1, &forms.c[2], dt)
        .constraint(0, spaces.mean_rows[0].clone())
        .constraint(0, spaces.mean_rows[1].clone());
    let fact = Factorization::new(
        sys.matrix(),
        "cell displacement/matrix-pressure problem (periodic displacement needs its zero-mean constraints)",
    )?;

    let pi_modes = state.affine_modes();
    let n = state.n_nodes();
    let lifts = [spaces.lift(0), spaces.lift(1)];
    let ones = vec![1.0; n];

    let mut loads: Vec<(Vec<f64>, Vec<f64>, Option<usize>)> = Vec::with_capacity(7);
    for pm in &pi_modes {
        let au = forms.a.mul_vec(pm);
        let bu = forms.b[2].mul_vec(pm);
        loads.push((au.iter().map(|v| -v).collect(), bu.iter().map(|v| -v).collect(), None));
    }
    for alpha in 0..2 {
        loads.push((forms.b[alpha].tmul_vec(&ones), vec![0.0; n], Some(alpha)));
    }
    let sigma_load = forms.stress_load(state);
    let c3p = forms.c[2].mul_vec(&state.p3);
    let d3p = forms.d[2].mul_vec(&state.p3);
    loads.push((
        sigma_load.iter().map(|v| -v).collect(),
        c3p.iter().zip(&d3p).map(|(c, d)| -dt * (c + d)).collect(),
        None,
    ));

    let rhs: Vec<Vec<f64>> = loads
        .iter()
        .map(|(lu, lp, lift)| {
            let fixed = lift.map(|a| lifts[a].as_slice());
            sys.rhs(&[Some(lu), Some(lp)], &[None, fixed])
        })
        .collect();
    let sol = fact.solve(&rhs)?;
    let fields: Vec<Vec<Vec<f64>>> = sol
        .iter()
        .zip(&loads)
        .map(|(x, (_, _, lift))| {
            let fixed = lift.map(|a| lifts[a].as_slice());
            sys.expand(x, &[None, fixed])
        })
        .collect();

    let take = |k: usize, f: usize| fields[k][f].clone();
    let omega_ij = [0, 1, 2, 3].map(|k| take(k, 0));
    let pi_ij = [0, 1, 2, 3].map(|k| take(k, 1));
    let omega_a = [4, 5].map(|k| take(k, 0));
    let pi_a = [4, 5].map(|k| take(k, 1));
    let u_p = take(6, 0);
    let p3_p = take(6, 1);

    let (eta, p_p, history) = solve_channels(state, forms)?;
    Ok(Responses {
        pi_modes,
        omega_ij,
        pi_ij,
        omega_a,
        pi_a,
        u_p,
        p3_p,
        eta,
        p_p,
        history,
    })
}

type ChannelFields = ([[Vec<f64>; 2]; 2], [Vec<f64>; 2], [Vec<f64>; 2]);

/// Channel flow correctors `η_α^i` and particular responses `p_α^P`.
pub fn solve_channels(state: &MicroState, forms: &CellForms) -> Result<ChannelFields> {
    let mesh = &state.cell.mesh;
    let n = mesh.n_nodes();
    let y = state.local_coordinates();
    let mut eta: [[Vec<f64>; 2]; 2] = Default::default();
    let mut p_p: [Vec<f64>; 2] = Default::default();
    let mut history: [Vec<f64>; 2] = Default::default();
    for alpha in 0..2 {
        let label = channel_label(alpha);
        let nodes = mesh.region_nodes(label);
        let h: Vec<f64> = (0..n)
            .map(|i| {
                if nodes[i] {
                    y[0][i] * state.grad_p0[alpha][0] + y[1][i] * state.grad_p0[alpha][1] + state.p1[alpha][i]
                } else {
                    0.0
                }
            })
            .collect();
        history[alpha] = h.clone();
        let comps = mesh.region_components(label, &|m| state.cell.periodic.master(m));
        if comps.is_empty() {
            eta[alpha] = [vec![0.0; n], vec![0.0; n]];
            p_p[alpha] = vec![0.0; n];
            continue;
        }
        let map = DofMapBuilder::new(n, 1)
            .periodic(&state.cell.periodic.master_of)
            .restrict_nodes(&nodes)
            .build();
        let mut sys = BlockSystem::new(vec![&map]);
        sys.block(0, 0, &forms.c[alpha], 1.0);
        for comp in &comps {
            let mut member = vec![false; mesh.n_elements()];
            for &e in comp {
                member[e] = true;
            }
            let row = forms::load_scalar(mesh, &forms.ed, &|e| member[e], &|_, _| 1.0, forms.inv_volume);
            sys.constraint(0, row);
        }
        let fact = Factorization::new(
            sys.matrix(),
            &format!("channel {} flow problem (each channel component needs periodic closure)", alpha + 1),
        )?;
        let ch = forms.c[alpha].mul_vec(&h);
        let dh = forms.d[alpha].mul_vec(&h);
        let mut rhs: Vec<Vec<f64>> = (0..2)
            .map(|i| {
                let cy = forms.c[alpha].mul_vec(&y[i]);
                let l: Vec<f64> = cy.iter().map(|v| -v).collect();
                sys.rhs(&[Some(&l)], &[None])
            })
            .collect();
        let lp: Vec<f64> = ch.iter().zip(&dh).map(|(c, d)| -(c + d)).collect();
        rhs.push(sys.rhs(&[Some(&lp)], &[None]));
        let sol = fact.solve(&rhs)?;
        let mut f: Vec<Vec<f64>> = sol.iter().map(|x| sys.expand(x, &[None]).remove(0)).collect();
        p_p[alpha] = f.pop().unwrap();
        let e1 = f.pop().unwrap();
        let e0 = f.pop().unwrap();
        eta[alpha] = [e0, e1];
    }
    Ok((eta, p_p, history))
}

/// Macroscopic data at a sample point needed to update its cell.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MacroIncrementAt {
    /// `∂_j δu⁰_i` stored as `grad_du[(i, j)]`.
    pub grad_du: Mat2,
    pub dp: [f64; 2],
    pub grad_dp: [[f64; 2]; 2],
    /// Total channel pressures and gradients at the new time level.
    pub p0_new: [f64; 2],
    pub grad_p0_new: [[f64; 2]; 2],
}

/// Reconstructed cell increment: `δu = (Π^{ij} + ω^{ij}) ∂_j δu_i + ω^α δp_α + u^P`.
pub fn cell_displacement_increment(resp: &Responses, inc: &MacroIncrementAt) -> Vec<f64> {
    let mut du = resp.u_p.clone();
    for (k, &(i, j)) in PAIRS.iter().enumerate() {
        let g = inc.grad_du[(i, j)];
        if g != 0.0 {
            for (d, (p, w)) in du.iter_mut().zip(resp.pi_modes[k].iter().zip(&resp.omega_ij[k])) {
                *d += (p + w) * g;
            }
        }
    }
    for alpha in 0..2 {
        let dp = inc.dp[alpha];
        if dp != 0.0 {
            for (d, w) in du.iter_mut().zip(&resp.omega_a[alpha]) {
                *d += w * dp;
            }
        }
    }
    du
}

/// Updates the cell to the next time level: pressures, coordinates,
/// deformation gradients, stored increment and the point responses.
pub fn reconstruct_micro(state: &MicroState, resp: &Responses, inc: &MacroIncrementAt) -> Result<MicroState> {
    let mut next = state.clone();
    let du = cell_displacement_increment(resp, inc);
    let mesh = &state.cell.mesh;
    let ed_old = element_table(mesh)?;

    for (n, p) in next.p3.iter_mut().enumerate() {
        let mut v = resp.p3_p[n];
        for (k, &(i, j)) in PAIRS.iter().enumerate() {
            v += resp.pi_ij[k][n] * inc.grad_du[(i, j)];
        }
        for alpha in 0..2 {
            v += resp.pi_a[alpha][n] * inc.dp[alpha];
        }
        *p += v;
    }
    for alpha in 0..2 {
        for n in 0..mesh.n_nodes() {
            next.p1[alpha][n] += resp.eta[alpha][0][n] * inc.grad_dp[alpha][0]
                + resp.eta[alpha][1][n] * inc.grad_dp[alpha][1]
                + resp.p_p[alpha][n];
        }
    }
    next.p0 = inc.p0_new;
    next.grad_p0 = inc.grad_p0_new;

    for e in 0..mesh.n_elements() {
        for q in 0..ed_old[e].nq {
            let g = vector_gradient(&ed_old[e].qp[q], &mesh.elements[e], &du);
            let i = e * QP_STRIDE + q;
            next.f[i] = (Mat2::identity() + g) * state.f[i];
        }
    }
    for (n, c) in next.cell.mesh.coords.iter_mut().enumerate() {
        c[0] += du[2 * n];
        c[1] += du[2 * n + 1];
    }
    next.cell.mesh.check_orientation().map_err(|err| {
        Error::StepSize(format!("cell element inverted after update ({err})"))
    })?;
    let ed_new = element_table(&next.cell.mesh)?;
    let mut warnings = Vec::new();
    next.cell.interfaces =
        crate::geometry::extract_interfaces(&next.cell.mesh, &next.cell.periodic, &mut warnings)?;
    next.ubar = du;
    next.refresh(&ed_new).map_err(|err| match err {
        Error::InvertedElement { .. } => Error::StepSize(format!("cell deformation gradient inverted ({err})")),
        other => other,
    })?;
    Ok(next)
}
