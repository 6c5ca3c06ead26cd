//! Homogenized coefficients evaluated from the cell responses, together
//! with the internal identity checks.

use serde::{Deserialize, Serialize};

use crate::constitutive::{Mat2, Tensor4};
use crate::error::{Error, Result};
use crate::micro::{CellForms, MicroState, Responses, PAIRS};

/// Region carrying the permeability-increment term of the channel discharge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DischargeRegion {
    #[default]
    Channel,
    Matrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientOptions {
    pub discharge_region: DischargeRegion,
    /// Tolerance of the runtime identity assertions.
    pub identity_tol: f64,
    /// Scale of the macroscopic pressure-fluctuation penalty; 0 disables it.
    pub pressure_stabilization: f64,
}

impl Default for CoefficientOptions {
    fn default() -> Self {
        CoefficientOptions {
            discharge_region: DischargeRegion::Channel,
            identity_tol: 1e-9,
            pressure_stabilization: 1.0,
        }
    }
}

/// Hard limit on the disagreement of the two expressions of the
/// incremental tensor; beyond it the cell assembly is inconsistent.
pub const CROSS_CHECK_LIMIT: f64 = 1e-7;

/// Residuals of the internal identities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IdentityChecks {
    /// Relative disagreement of the two expressions of the incremental tensor.
    pub d_cross: f64,
    pub d_major: f64,
    /// Reported, not bounded.
    pub d_minor: f64,
    /// `‖B_α − R_α‖_∞ / max(1, ‖B_α‖_∞)`.
    pub biot_adjoint: [f64; 2],
    pub c_asymmetry: [f64; 2],
}

impl IdentityChecks {
    /// Largest bounded residual.
    pub fn worst(&self) -> f64 {
        self.d_cross
            .max(self.d_major)
            .max(self.biot_adjoint[0])
            .max(self.biot_adjoint[1])
    }

    pub fn assert_within(&self, tol: f64) -> Result<()> {
        let named = [
            ("incremental tensor cross-check", self.d_cross),
            ("incremental tensor major symmetry", self.d_major),
            ("Biot/adjoint identity, channel 1", self.biot_adjoint[0]),
            ("Biot/adjoint identity, channel 2", self.biot_adjoint[1]),
        ];
        for (name, v) in named {
            if !(v <= tol) {
                return Err(Error::Consistency(format!("{name} residual {v:.3e} exceeds {tol:.1e}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomCoeffs {
    pub d: Tensor4,
    /// Unsymmetric expression of the incremental tensor, kept for the cross-check.
    pub d_alt: Tensor4,
    pub b: [Mat2; 2],
    pub r: [Mat2; 2],
    pub s: Mat2,
    pub q: Mat2,
    pub c: [Mat2; 2],
    /// `g[α][β]`.
    pub g: [[f64; 2]; 2],
    pub zeta: [f64; 2],
    pub gamma: [[f64; 2]; 2],
    pub checks: IdentityChecks,
}

fn mat_inf(m: &Mat2) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Evaluates every coefficient of one cell. Interface fluxes enter only
/// through the residual forms of the cell problems.
pub fn compute(
    state: &MicroState,
    forms: &CellForms,
    resp: &Responses,
    dt: f64,
    opts: &CoefficientOptions,
) -> Result<HomCoeffs> {
    let a = &forms.a;
    let [b1, b2, b3] = &forms.b;
    let bch = [b1, b2];
    let n = state.n_nodes();
    let ones = vec![1.0; n];
    let pi = &resp.pi_modes;
    let w_plus: Vec<Vec<f64>> = (0..4).map(|k| add(&resp.omega_ij[k], &pi[k])).collect();

    // a(u, v) = vᵀ A u, b(q, u) = qᵀ B u, c(p, q) = qᵀ C p.
    let mut d = Tensor4::zero();
    let mut d_alt = Tensor4::zero();
    for (m, &(i, j)) in PAIRS.iter().enumerate() {
        for (kk, &(k, l)) in PAIRS.iter().enumerate() {
            d_alt.0[i][j][k][l] = a.bilinear(&pi[m], &w_plus[kk]) - b3.bilinear(&resp.pi_ij[kk], &pi[m]);
            d.0[i][j][k][l] =
                a.bilinear(&w_plus[m], &w_plus[kk]) + dt * forms.c[2].bilinear(&resp.pi_ij[m], &resp.pi_ij[kk]);
        }
    }

    let mut b = [Mat2::zeros(); 2];
    let mut r = [Mat2::zeros(); 2];
    for alpha in 0..2 {
        for (m, &(i, j)) in PAIRS.iter().enumerate() {
            b[alpha][(i, j)] = b3.bilinear(&resp.pi_a[alpha], &pi[m]) + bch[alpha].bilinear(&ones, &pi[m])
                - a.bilinear(&pi[m], &resp.omega_a[alpha]);
            r[alpha][(i, j)] = bch[alpha].bilinear(&ones, &w_plus[m])
                + b3.bilinear(&resp.pi_a[alpha], &w_plus[m])
                + dt * forms.c[2].bilinear(&resp.pi_ij[m], &resp.pi_a[alpha]);
        }
    }

    let mut s = Mat2::zeros();
    for e in 0..state.cell.mesh.n_elements() {
        for qd in 0..forms.ed[e].nq {
            s += state.total_stress(&forms.ed, e, qd) * forms.ed[e].qp[qd].jxw;
        }
    }
    s *= forms.inv_volume;

    let mut q = Mat2::zeros();
    for (m, &(i, j)) in PAIRS.iter().enumerate() {
        q[(i, j)] = a.bilinear(&pi[m], &resp.u_p) - b3.bilinear(&resp.p3_p, &pi[m]);
    }

    let y = state.local_coordinates();
    let mut c = [Mat2::zeros(); 2];
    let mut gamma = [[0.0; 2]; 2];
    let mut zeta = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for alpha in 0..2 {
        let ca = &forms.c[alpha];
        let v: Vec<Vec<f64>> = (0..2).map(|i| add(&resp.eta[alpha][i], &y[i])).collect();
        let mask = state.cell.mesh.region_nodes(crate::geometry::channel_label(alpha));
        // Coordinates restricted to the channel so that off-region values never enter.
        let yc: Vec<Vec<f64>> = (0..2)
            .map(|i| (0..n).map(|k| if mask[k] { y[i][k] } else { 0.0 }).collect())
            .collect();
        for i in 0..2 {
            for j in 0..2 {
                c[alpha][(i, j)] = ca.bilinear(&v[j], &v[i]);
            }
        }
        let h = &resp.history[alpha];
        let dform = match opts.discharge_region {
            DischargeRegion::Channel => &forms.d[alpha],
            DischargeRegion::Matrix => &forms.d[2],
        };
        for i in 0..2 {
            gamma[alpha][i] = ca.bilinear(h, &yc[i]) + dform.bilinear(h, &yc[i]) + ca.bilinear(&resp.p_p[alpha], &yc[i]);
        }
        let p3_total = add(&resp.p3_p, &state.p3);
        zeta[alpha] = (bch[alpha].bilinear(&ones, &resp.u_p) + b3.bilinear(&resp.pi_a[alpha], &resp.u_p)) / dt
            + forms.c[2].bilinear(&p3_total, &resp.pi_a[alpha])
            + forms.d[2].bilinear(&state.p3, &resp.pi_a[alpha]);
        for beta in 0..2 {
            g[alpha][beta] = (b3.bilinear(&resp.pi_a[alpha], &resp.omega_a[beta])
                + bch[alpha].bilinear(&ones, &resp.omega_a[beta]))
                / dt
                + forms.c[2].bilinear(&resp.pi_a[beta], &resp.pi_a[alpha]);
        }
    }

    let d_scale = d.max_abs().max(f64::MIN_POSITIVE);
    let cross = d.iter().zip(d_alt.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let checks = IdentityChecks {
        d_cross: cross / d_scale,
        d_major: d.major_asymmetry() / d_scale,
        d_minor: d.minor_asymmetry() / d_scale,
        biot_adjoint: [0, 1].map(|al| mat_inf(&(b[al] - r[al])) / mat_inf(&b[al]).max(1.0)),
        c_asymmetry: [0, 1].map(|al| (c[al][(0, 1)] - c[al][(1, 0)]).abs() / mat_inf(&c[al]).max(f64::MIN_POSITIVE)),
    };
    if !(checks.d_cross <= CROSS_CHECK_LIMIT) {
        return Err(Error::Consistency(format!(
            "the two expressions of the incremental tensor disagree by {:.3e} (relative)",
            checks.d_cross
        )));
    }
    Ok(HomCoeffs {
        d,
        d_alt,
        b,
        r,
        s,
        q,
        c,
        g,
        zeta,
        gamma,
        checks,
    })
}

/// Solves the cell problems of one state and evaluates its coefficients.
pub fn evaluate_cell(
    state: &MicroState,
    dt: f64,
    opts: &CoefficientOptions,
) -> Result<(CellForms, Responses, HomCoeffs)> {
    let forms = CellForms::assemble(state)?;
    let resp = crate::micro::solve_cell(state, &forms, dt)?;
    let coeffs = compute(state, &forms, &resp, dt, opts)?;
    Ok((forms, resp, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{MaterialParams, PermeabilityUpdate};
    use crate::geometry::{build_unit_cell, CellParams};

    fn material(mu: [f64; 3], k: [f64; 3]) -> MaterialParams {
        MaterialParams {
            mu,
            permeability: k.map(|v| Mat2::identity() * v),
            eps: 0.025,
            permeability_update: PermeabilityUpdate::Constant,
        }
    }

    fn coeffs(params: &CellParams, mat: MaterialParams, dt: f64) -> HomCoeffs {
        let cell = build_unit_cell(params).unwrap();
        let state = MicroState::new(cell, mat).unwrap();
        evaluate_cell(&state, dt, &CoefficientOptions::default()).unwrap().2
    }

    fn validation() -> HomCoeffs {
        coeffs(
            &CellParams::straight([0.2, 0.2], 16),
            material([0.6e6, 0.6e6, 1e6], [1e-6, 2e-6, 1e-4]),
            0.025,
        )
    }

    #[test]
    fn identities_hold_on_validation_cell() {
        let c = validation();
        assert!(c.checks.d_cross <= 1e-9, "{:?}", c.checks);
        assert!(c.checks.d_major <= 1e-9, "{:?}", c.checks);
        assert!(c.checks.biot_adjoint[0] <= 1e-9 && c.checks.biot_adjoint[1] <= 1e-9, "{:?}", c.checks);
        c.checks.assert_within(1e-9).unwrap();
    }

    #[test]
    fn straight_band_permeability() {
        let c = validation();
        // Band width 0.2 with isotropic k: C₁₁ = w k, C₂₂ ≈ 0.
        assert!((c.c[0][(0, 0)] - 0.2e-6).abs() < 1e-3 * 0.2e-6);
        assert!((c.c[1][(0, 0)] / c.c[0][(0, 0)] - 2.0).abs() < 1e-12);
        for alpha in 0..2 {
            assert!(c.c[alpha][(1, 1)].abs() < 1e-12 * c.c[alpha][(0, 0)].max(1.0));
            assert!(c.c[alpha][(0, 1)].abs() < 1e-15);
            assert!(c.checks.c_asymmetry[alpha] < 1e-12);
        }
    }

    #[test]
    fn biot_tensor_is_diagonal_on_symmetric_cell() {
        let c = validation();
        for alpha in 0..2 {
            assert!(c.b[alpha][(0, 1)].abs() <= 1e-8 * mat_inf(&c.b[alpha]).max(1.0));
            assert!(c.b[alpha][(1, 0)].abs() <= 1e-8 * mat_inf(&c.b[alpha]).max(1.0));
        }
    }

    #[test]
    fn exchange_matrix_is_symmetric() {
        let c = validation();
        let scale = c.g[0][0].abs().max(c.g[1][1].abs());
        assert!((c.g[0][1] - c.g[1][0]).abs() <= 1e-8 * scale);
    }

    #[test]
    fn zero_history_gives_zero_sources() {
        let c = validation();
        assert_eq!(c.s, Mat2::zeros());
        assert!(mat_inf(&c.q) == 0.0);
        assert_eq!(c.zeta, [0.0; 2]);
        assert_eq!(c.gamma, [[0.0; 2]; 2]);
    }

    #[test]
    fn uniform_cell_shear_stiffness() {
        let mu = 1e6;
        let c = coeffs(&CellParams::straight([0.2, 0.2], 8), material([mu; 3], [1e-6, 2e-6, 1e-4]), 0.025);
        // Uniform stress-free material: 𝔸₁₂₁₂ = μ and no corrector is excited by shear.
        for (i, j, k, l) in [(0, 1, 0, 1), (1, 0, 1, 0), (0, 1, 1, 0), (1, 0, 0, 1)] {
            assert!((c.d.get(i, j, k, l) - mu).abs() < 1e-9 * mu, "{}", c.d.get(i, j, k, l));
        }
    }

    #[test]
    fn drained_limit_matches_independent_elasticity() {
        // For a large step the matrix pressure relaxes to the interface data,
        // so the diagonal stiffness is bounded by the undrained value.
        let mat = material([0.6e6, 0.6e6, 1e6], [1e-6, 2e-6, 1e-4]);
        let p = CellParams::straight([0.2, 0.2], 8);
        let slow = coeffs(&p, mat.clone(), 1e6);
        let fast = coeffs(&p, mat, 1e-6);
        assert!(slow.d.get(1, 1, 1, 1) < fast.d.get(1, 1, 1, 1));
        assert!(slow.d.get(1, 1, 1, 1) > 0.0);
    }

    #[test]
    fn empty_channel_has_vanishing_channel_terms() {
        let mut cell = build_unit_cell(&CellParams::straight([0.2, 0.2], 8)).unwrap();
        for r in cell.mesh.regions.iter_mut() {
            if *r == crate::geometry::channel_label(1) {
                *r = crate::geometry::MATRIX;
            }
        }
        let mut warnings = Vec::new();
        cell.interfaces = crate::geometry::extract_interfaces(&cell.mesh, &cell.periodic, &mut warnings).unwrap();
        assert!(!warnings.is_empty());
        let state = MicroState::new(cell, material([0.6e6, 0.6e6, 1e6], [1e-6, 2e-6, 1e-4])).unwrap();
        let c = evaluate_cell(&state, 0.025, &CoefficientOptions::default()).unwrap().2;
        assert_eq!(c.c[1], Mat2::zeros());
        assert!(mat_inf(&c.b[1]) < 1e-12);
    }
}
