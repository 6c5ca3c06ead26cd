//! Direct single-scale solver of the heterogeneous problem on the tiled
//! mesh, used as the validation oracle of the two-scale scheme.

use serde::{Deserialize, Serialize};

use crate::constitutive::{evaluate_point, push_forward_permeability, tensor_b, tensor_h, Mat2, MaterialParams, PermeabilityUpdate, Tensor4};
use crate::error::{Error, Result};
use crate::fem::forms::{self, element_table};
use crate::fem::shape::{scalar_value, vector_gradient, ElementData};
use crate::fem::{BlockSystem, DofMapBuilder, Factorization};
use crate::geometry::{channel_label, Mesh, MATRIX};
use crate::macroscale::{displacement_increment, displacement_map, pressure_nodes};
use crate::micro::QP_STRIDE;
use crate::scenario::Scenario;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectState {
    pub mesh: Mesh,
    pub material: MaterialParams,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub ubar: Vec<f64>,
    pub f: Vec<Mat2>,
    pub sigma_eff: Vec<Mat2>,
    pub tangent: Vec<Tensor4>,
    pub k: Vec<Mat2>,
    pub dk: Vec<Mat2>,
    pub step: usize,
    pub time: f64,
}

/// Permeability of a region at the physical scale: channels keep their
/// value, the matrix is scaled by `ε²`.
pub fn scaled_permeability(material: &MaterialParams, region: u8) -> Mat2 {
    let k = material.permeability_of(region);
    if region == MATRIX {
        k * (material.eps * material.eps)
    } else {
        k
    }
}

/// Region-averaged pressures and their spatial spread.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompartmentPressures {
    pub matrix: f64,
    /// Both channels together.
    pub channel: f64,
    pub channels: [f64; 2],
    /// Coefficient of variation (area-weighted standard deviation over |mean|).
    pub cov_matrix: f64,
    pub cov_channels: [f64; 2],
}

impl DirectState {
    pub fn new(mesh: Mesh, material: MaterialParams) -> Result<DirectState> {
        let ne = mesh.n_elements();
        let nn = mesh.n_nodes();
        let mut k = vec![Mat2::zeros(); ne * QP_STRIDE];
        for e in 0..ne {
            for q in 0..QP_STRIDE {
                k[e * QP_STRIDE + q] = scaled_permeability(&material, mesh.regions[e]);
            }
        }
        let mut s = DirectState {
            u: vec![0.0; 2 * nn],
            p: vec![0.0; nn],
            ubar: vec![0.0; 2 * nn],
            f: vec![Mat2::identity(); ne * QP_STRIDE],
            sigma_eff: vec![Mat2::zeros(); ne * QP_STRIDE],
            tangent: vec![Tensor4::zero(); ne * QP_STRIDE],
            dk: vec![Mat2::zeros(); ne * QP_STRIDE],
            k,
            mesh,
            material,
            step: 0,
            time: 0.0,
        };
        let ed = element_table(&s.mesh)?;
        s.refresh(&ed)?;
        Ok(s)
    }

    fn refresh(&mut self, ed: &[ElementData]) -> Result<()> {
        for e in 0..self.mesh.n_elements() {
            let region = self.mesh.regions[e];
            let mu = self.material.mu_of(region);
            for q in 0..ed[e].nq {
                let i = e * QP_STRIDE + q;
                let p = scalar_value(&ed[e].qp[q], &self.mesh.elements[e], &self.p);
                let r = evaluate_point(&self.f[i], mu, p)
                    .map_err(|err| Error::StepSize(format!("deformation gradient inverted in element {e} ({err})")))?;
                self.sigma_eff[i] = r.sigma_eff;
                self.tangent[i] = r.tangent;
                if self.material.permeability_update == PermeabilityUpdate::PushForward {
                    let k_new = push_forward_permeability(&scaled_permeability(&self.material, region), &self.f[i]);
                    self.dk[i] = k_new - self.k[i];
                    self.k[i] = k_new;
                }
            }
        }
        Ok(())
    }

    pub fn total_stress(&self, ed: &[ElementData], e: usize, q: usize) -> Mat2 {
        let p = scalar_value(&ed[e].qp[q], &self.mesh.elements[e], &self.p);
        self.sigma_eff[e * QP_STRIDE + q] - Mat2::identity() * p
    }

    /// Area-weighted compartment means of the pressure over quadrature points.
    pub fn compartments(&self) -> Result<CompartmentPressures> {
        let ed = element_table(&self.mesh)?;
        let mut acc = [[0.0f64; 3]; 3]; // per region: area, ∫p, ∫p²
        for e in 0..self.mesh.n_elements() {
            let r = self.mesh.regions[e] as usize - 1;
            for q in 0..ed[e].nq {
                let pd = &ed[e].qp[q];
                let p = scalar_value(pd, &self.mesh.elements[e], &self.p);
                acc[r][0] += pd.jxw;
                acc[r][1] += pd.jxw * p;
                acc[r][2] += pd.jxw * p * p;
            }
        }
        let mean = |a: &[f64; 3]| if a[0] > 0.0 { a[1] / a[0] } else { 0.0 };
        let cov = |a: &[f64; 3]| {
            if a[0] <= 0.0 {
                return 0.0;
            }
            let m = a[1] / a[0];
            let var = (a[2] / a[0] - m * m).max(0.0);
            if m == 0.0 {
                if var == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                var.sqrt() / m.abs()
            }
        };
        let ch_area = acc[0][0] + acc[1][0];
        Ok(CompartmentPressures {
            matrix: mean(&acc[2]),
            channel: if ch_area > 0.0 { (acc[0][1] + acc[1][1]) / ch_area } else { 0.0 },
            channels: [mean(&acc[0]), mean(&acc[1])],
            cov_matrix: cov(&acc[2]),
            cov_channels: [cov(&acc[0]), cov(&acc[1])],
        })
    }
}

/// Diagnostics of one reference step.
#[derive(Clone, Debug)]
pub struct DirectReport {
    pub step: usize,
    pub time: f64,
    pub pressures: CompartmentPressures,
    pub increment: [f64; 2],
    /// `|∫ (B(ū) + I) : ∇δu|` relative to its absolute integrand.
    pub volume_balance: f64,
}

/// One incremental step:
/// `a(δu, v) − b(δp, v) = L − ∫ σ : ∇v`,
/// `b(q, δu) + δt c(δp, q) = −δt (c + d)(p, q)`.
pub fn step(state: &DirectState, scenario: &Scenario) -> Result<(DirectState, DirectReport)> {
    let dt = scenario.dt;
    let k = state.step;
    let mesh = &state.mesh;
    let ed = element_table(mesh)?;
    let ne = mesh.n_elements();
    let mut grad_ubar = vec![Mat2::zeros(); ne * QP_STRIDE];
    for e in 0..ne {
        for q in 0..ed[e].nq {
            grad_ubar[e * QP_STRIDE + q] = vector_gradient(&ed[e].qp[q], &mesh.elements[e], &state.ubar);
        }
    }
    let all = |_: usize| true;
    let a = forms::assemble_a(mesh, &ed, &all, &|e, q| state.tangent[e * QP_STRIDE + q], 1.0);
    let bbar = |e: usize, q: usize| tensor_b(&grad_ubar[e * QP_STRIDE + q]) + Mat2::identity();
    let b = forms::assemble_b(mesh, &ed, &all, &bbar, 1.0);
    let c = forms::assemble_c(
        mesh,
        &ed,
        &all,
        &|e, q| {
            let i = e * QP_STRIDE + q;
            state.k[i] + tensor_h(&grad_ubar[i], &state.k[i])
        },
        1.0,
    );
    let d = forms::assemble_c(mesh, &ed, &all, &|e, q| state.dk[e * QP_STRIDE + q], 1.0);
    let bt = b.transpose();

    let u_map = displacement_map(mesh, scenario)?;
    let mut fixed_p = Vec::new();
    let mut gp = vec![0.0; mesh.n_nodes()];
    for ch in 1..=2usize {
        let mask = mesh.region_nodes(channel_label(ch - 1));
        for (n, v, r) in pressure_nodes(mesh, scenario, ch, Some(&mask))? {
            fixed_p.push(n);
            gp[n] = scenario.ramp_increment(&r, k) * v;
        }
    }
    let p_map = DofMapBuilder::new(mesh.n_nodes(), 1).fix_nodes(&fixed_p, 0).build();

    let mut sys = BlockSystem::new(vec![&u_map, &p_map]);
    sys.block(0, 0, &a, 1.0).block(0, 1, &bt, -1.0).block(1, 0, &b, 1.0).block(1, 1, &c, dt);
    let fact = Factorization::new(sys.matrix(), "direct reference system")?;

    let mut load_u = forms::load_stress(mesh, &ed, &all, &|e, q| -state.total_stress(&ed, e, q), 1.0);
    for t in &scenario.traction {
        let facets = mesh
            .boundaries
            .get(&t.boundary)
            .ok_or_else(|| Error::Config(format!("boundary '{}' not present on the mesh", t.boundary)))?;
        let level = scenario.ramp(&t.ramp).eval(scenario.time(k + 1));
        let f = forms::load_traction(mesh, facets, [level * t.value[0], level * t.value[1]]);
        load_u.iter_mut().zip(&f).for_each(|(x, y)| *x += y);
    }
    let cp = c.mul_vec(&state.p);
    let dp = d.mul_vec(&state.p);
    let load_p: Vec<f64> = cp.iter().zip(&dp).map(|(x, y)| -dt * (x + y)).collect();
    let gu = displacement_increment(mesh, scenario, k)?;
    let fixed = [Some(gu.as_slice()), Some(gp.as_slice())];
    let rhs = sys.rhs(&[Some(&load_u), Some(&load_p)], &fixed);
    let x = fact.solve(&[rhs])?.remove(0);
    let mut fields = sys.expand(&x, &fixed);
    let delta_p = fields.pop().unwrap();
    let delta_u = fields.pop().unwrap();

    let bdu = b.mul_vec(&delta_u);
    let mut abs = 0.0;
    for e in 0..ne {
        for q in 0..ed[e].nq {
            let g = vector_gradient(&ed[e].qp[q], &mesh.elements[e], &delta_u);
            let m = bbar(e, q);
            abs += ed[e].qp[q].jxw * (m[(0, 0)] * g[(0, 0)] + m[(0, 1)] * g[(0, 1)] + m[(1, 0)] * g[(1, 0)] + m[(1, 1)] * g[(1, 1)]).abs();
        }
    }
    let volume_balance = if abs > 0.0 { bdu.iter().sum::<f64>().abs() / abs } else { 0.0 };

    let mut next = state.clone();
    for e in 0..ne {
        for q in 0..ed[e].nq {
            let g = vector_gradient(&ed[e].qp[q], &mesh.elements[e], &delta_u);
            let i = e * QP_STRIDE + q;
            next.f[i] = (Mat2::identity() + g) * state.f[i];
        }
    }
    for (n, c) in next.mesh.coords.iter_mut().enumerate() {
        c[0] += delta_u[2 * n];
        c[1] += delta_u[2 * n + 1];
    }
    next.mesh
        .check_orientation()
        .map_err(|err| Error::StepSize(format!("reference element inverted after update ({err})")))?;
    next.u.iter_mut().zip(&delta_u).for_each(|(a, b)| *a += b);
    next.p.iter_mut().zip(&delta_p).for_each(|(a, b)| *a += b);
    next.ubar = delta_u.clone();
    next.step = k + 1;
    next.time = scenario.time(k + 1);
    let ed_new = element_table(&next.mesh)?;
    next.refresh(&ed_new)?;
    let m = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let report = DirectReport {
        step: next.step,
        time: next.time,
        pressures: next.compartments()?,
        increment: [m(&delta_u), m(&delta_p)],
        volume_balance,
    };
    Ok((next, report))
}
