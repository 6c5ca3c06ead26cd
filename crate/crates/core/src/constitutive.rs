//! Neo-Hookean effective stress, its Truesdell-rate tangent and the
//! linearization tensors of the updated Lagrangian formulation.
//!
//! Gradients follow the convention `g[(k, l)] = ∂u_k / ∂x_l`. Fourth-order
//! tensors act on gradients as `(A : g)_ij = A_ijkl g_kl`.

use nalgebra::{Matrix2, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat2 = Matrix2<f64>;

/// In-plane fourth-order tensor, indexed `[i][j][k][l]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tensor4(pub [[[[f64; 2]; 2]; 2]; 2]);

impl Tensor4 {
    pub fn zero() -> Tensor4 {
        Tensor4::default()
    }

    pub fn from_fn(f: impl Fn(usize, usize, usize, usize) -> f64) -> Tensor4 {
        let mut t = Tensor4::zero();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        t.0[i][j][k][l] = f(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.0[i][j][k][l]
    }

    /// `(A : g)_ij = A_ijkl g_kl`.
    pub fn contract(&self, g: &Mat2) -> Mat2 {
        Mat2::from_fn(|i, j| {
            let mut s = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    s += self.0[i][j][k][l] * g[(k, l)];
                }
            }
            s
        })
    }

    /// `h : A : g = h_ij A_ijkl g_kl`.
    pub fn bilinear(&self, h: &Mat2, g: &Mat2) -> f64 {
        self.contract(g).component_mul(h).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().flatten().flatten().flatten().copied()
    }

    pub fn scaled(&self, s: f64) -> Tensor4 {
        Tensor4::from_fn(|i, j, k, l| s * self.0[i][j][k][l])
    }

    pub fn add(&self, other: &Tensor4) -> Tensor4 {
        Tensor4::from_fn(|i, j, k, l| self.0[i][j][k][l] + other.0[i][j][k][l])
    }

    /// Largest `|A_ijkl - A_klij|`.
    pub fn major_asymmetry(&self) -> f64 {
        Tensor4::from_fn(|i, j, k, l| self.0[i][j][k][l] - self.0[k][l][i][j]).max_abs()
    }

    /// Largest `|A_ijkl - A_jikl|`.
    pub fn minor_asymmetry(&self) -> f64 {
        Tensor4::from_fn(|i, j, k, l| self.0[i][j][k][l] - self.0[j][i][k][l]).max_abs()
    }
}

/// Plane-strain kinematics: the in-plane gradient is embedded in 3D with
/// `F33 = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    pub f: Mat2,
    pub j: f64,
    pub b: Matrix3<f64>,
}

impl Kinematics {
    pub fn new(f: Mat2) -> Result<Kinematics> {
        let j = f.determinant();
        if !(j > 0.0) {
            return Err(Error::InvertedElement {
                element: None,
                jacobian: j,
            });
        }
        let b2 = f * f.transpose();
        let mut b = Matrix3::zeros();
        b.fixed_view_mut::<2, 2>(0, 0).copy_from(&b2);
        b[(2, 2)] = 1.0;
        Ok(Kinematics { f, j, b })
    }
}

/// Full 3D effective stress `μ J^{-5/3} dev(b)`.
pub fn neo_hookean_stress_3d(kin: &Kinematics, mu: f64) -> Matrix3<f64> {
    let dev = kin.b - Matrix3::identity() * (kin.b.trace() / 3.0);
    dev * (mu * kin.j.powf(-5.0 / 3.0))
}

/// In-plane block of the effective Cauchy stress.
pub fn neo_hookean_stress(kin: &Kinematics, mu: f64) -> Mat2 {
    neo_hookean_stress_3d(kin, mu).fixed_view::<2, 2>(0, 0).into_owned()
}

/// Tangent `D` of the Truesdell rate of the effective stress with respect
/// to the rate of deformation, in-plane components:
/// `D = μ J^{-5/3} [ ⅔ tr b (𝕀ˢʸᵐ − ⅓ I⊗I) − ⅔ (dev b ⊗ I + I ⊗ dev b) ]`.
pub fn neo_hookean_tangent(kin: &Kinematics, mu: f64) -> Tensor4 {
    let s = mu * kin.j.powf(-5.0 / 3.0);
    let tr = kin.b.trace();
    let dev = kin.b - Matrix3::identity() * (tr / 3.0);
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    Tensor4::from_fn(|i, j, k, l| {
        let isym = 0.5 * (d(i, k) * d(j, l) + d(i, l) * d(j, k));
        s * (2.0 / 3.0 * tr * (isym - d(i, j) * d(k, l) / 3.0)
            - 2.0 / 3.0 * (dev[(i, j)] * d(k, l) + d(i, j) * dev[(k, l)]))
    })
}

/// `B(v) = (∇·v) I − (∇v)ᵀ`.
pub fn tensor_b(grad_v: &Mat2) -> Mat2 {
    Mat2::identity() * grad_v.trace() - grad_v.transpose()
}

/// `H(v) = (∇·v) K − K (∇v)ᵀ − (∇v) Kᵀ`.
pub fn tensor_h(grad_v: &Mat2, k: &Mat2) -> Mat2 {
    let div = grad_v.trace();
    // The two transposed products are summed before subtraction so the
    // result is bitwise symmetric whenever K is.
    Mat2::from_fn(|i, j| {
        let mut kg = 0.0;
        let mut gk = 0.0;
        for m in 0..2 {
            kg += k[(i, m)] * grad_v[(j, m)];
            gk += grad_v[(i, m)] * k[(j, m)];
        }
        div * k[(i, j)] - (kg + gk)
    })
}

/// `𝔸 = D + σ ⊗ I − p (I⊗I − 𝕀)`, i.e.
/// `𝔸_ijkl = D_ijkl + δ_ik σ_jl − p (δ_ij δ_kl − δ_il δ_jk)`,
/// so that `g_v : 𝔸 : g_u` reproduces the linearized virtual power of
/// the effective stress, the geometric stiffness and the pressure terms.
pub fn tangent_operator(d_eff: &Tensor4, sigma_eff: &Mat2, p: f64) -> Tensor4 {
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    Tensor4::from_fn(|i, j, k, l| {
        d_eff.get(i, j, k, l) + d(i, k) * sigma_eff[(j, l)] - p * (d(i, j) * d(k, l) - d(i, l) * d(j, k))
    })
}

/// Push-forward of a reference permeability: `J⁻¹ F K₀ Fᵀ`.
pub fn push_forward_permeability(k0: &Mat2, f: &Mat2) -> Mat2 {
    f * k0 * f.transpose() / f.determinant()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermeabilityUpdate {
    #[default]
    Constant,
    PushForward,
}

/// Material data per region label (1, 2 = channels, 3 = matrix).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub mu: [f64; 3],
    pub permeability: [Mat2; 3],
    pub eps: f64,
    pub permeability_update: PermeabilityUpdate,
}

impl MaterialParams {
    pub fn mu_of(&self, region: u8) -> f64 {
        self.mu[region as usize - 1]
    }

    pub fn permeability_of(&self, region: u8) -> Mat2 {
        self.permeability[region as usize - 1]
    }
}

/// Point state shared by cell and direct solvers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointResponse {
    pub sigma_eff: Mat2,
    pub d_eff: Tensor4,
    pub tangent: Tensor4,
}

pub fn evaluate_point(f: &Mat2, mu: f64, p: f64) -> Result<PointResponse> {
    let kin = Kinematics::new(*f)?;
    let sigma_eff = neo_hookean_stress(&kin, mu);
    let d_eff = neo_hookean_tangent(&kin, mu);
    let tangent = tangent_operator(&d_eff, &sigma_eff, p);
    Ok(PointResponse {
        sigma_eff,
        d_eff,
        tangent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn truesdell_fd(f: &Mat2, l: &Mat2, mu: f64, h: f64) -> Mat2 {
        let s = |t: f64| {
            let ft = (Mat2::identity() + l * t) * f;
            neo_hookean_stress(&Kinematics::new(ft).unwrap(), mu)
        };
        let sig = s(0.0);
        let rate = (s(h) - s(-h)) / (2.0 * h);
        rate - l * sig - sig * l.transpose() + sig * l.trace()
    }

    #[test]
    fn uniaxial_stretch_stress() {
        let f = Mat2::new(2.0, 0.0, 0.0, 1.0);
        let kin = Kinematics::new(f).unwrap();
        let s = neo_hookean_stress_3d(&kin, 1e6);
        let c = 1e6 * 2f64.powf(-5.0 / 3.0);
        assert_relative_eq!(s[(0, 0)], 2.0 * c, max_relative = 1e-14);
        assert_relative_eq!(s[(1, 1)], -c, max_relative = 1e-14);
        assert_relative_eq!(s[(2, 2)], -c, max_relative = 1e-14);
        assert!((s[(0, 0)] - 0.630e6).abs() < 1e3);
    }

    #[test]
    fn identity_and_rotation_are_stress_free() {
        let kin = Kinematics::new(Mat2::identity()).unwrap();
        assert_eq!(neo_hookean_stress(&kin, 1e6), Mat2::zeros());
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let kin = Kinematics::new(Mat2::new(c, -s, s, c)).unwrap();
        assert!(neo_hookean_stress(&kin, 1e6).abs().max() < 1e-9);
    }

    #[test]
    fn inverted_gradient_is_rejected() {
        let err = Kinematics::new(Mat2::new(-1.0, 0.0, 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::InvertedElement { .. }));
    }

    #[test]
    fn tangent_at_identity_is_deviatoric_stiffness() {
        let mu = 2.5;
        let d = neo_hookean_tangent(&Kinematics::new(Mat2::identity()).unwrap(), mu);
        let dl = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        let expected = Tensor4::from_fn(|i, j, k, l| {
            2.0 * mu * (0.5 * (dl(i, k) * dl(j, l) + dl(i, l) * dl(j, k)) - dl(i, j) * dl(k, l) / 3.0)
        });
        for (a, b) in d.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(neo_hookean_tangent(&Kinematics::new(Mat2::identity()).unwrap(), 0.0), Tensor4::zero());
    }

    #[test]
    fn tensor_b_examples() {
        assert_eq!(tensor_b(&Mat2::zeros()), Mat2::zeros());
        assert_eq!(tensor_b(&Mat2::identity()), Mat2::identity());
        let a = 0.7;
        assert_eq!(tensor_b(&Mat2::new(0.0, a, 0.0, 0.0)), Mat2::new(0.0, 0.0, -a, 0.0));
    }

    #[test]
    fn tensor_h_examples() {
        assert_eq!(tensor_h(&Mat2::zeros(), &Mat2::identity()), Mat2::zeros());
        let (a, b) = (0.3, -1.1);
        let h = tensor_h(&Mat2::new(a, 0.0, 0.0, b), &Mat2::identity());
        assert_relative_eq!(h, Mat2::new(b - a, 0.0, 0.0, a - b), epsilon = 1e-15);
    }

    #[test]
    fn pressure_part_of_tangent_operator() {
        let a = tangent_operator(&Tensor4::zero(), &Mat2::zeros(), 1.0);
        let gu = Mat2::new(0.3, -0.2, 0.7, 1.1);
        let gv = Mat2::new(-0.4, 0.5, 0.9, 0.2);
        let expected = -gu.trace() * gv.trace() + gu.component_mul(&gv.transpose()).sum();
        assert_relative_eq!(a.bilinear(&gv, &gu), expected, epsilon = 1e-14);
        let d = Tensor4::from_fn(|i, j, k, l| (i + 2 * j + 3 * k + 5 * l) as f64);
        assert_eq!(tangent_operator(&d, &Mat2::zeros(), 0.0), d);
    }

    fn admissible_f() -> impl Strategy<Value = Mat2> {
        (0.6f64..1.6, -0.4f64..0.4, -0.4f64..0.4, 0.6f64..1.6)
            .prop_map(|(a, b, c, d)| Mat2::new(a, b, c, d))
            .prop_filter("positive J", |f| f.determinant() > 0.2)
    }

    proptest! {
        #[test]
        fn tangent_matches_truesdell_rate(f in admissible_f(),
                                         l in prop::array::uniform4(-1.0f64..1.0),
                                         mu in 0.1f64..3.0) {
            let l = Mat2::new(l[0], l[1], l[2], l[3]);
            let kin = Kinematics::new(f).unwrap();
            let d = neo_hookean_tangent(&kin, mu);
            let exact = d.contract(&((l + l.transpose()) * 0.5));
            let fd = truesdell_fd(&f, &l, mu, 1e-6);
            prop_assert!((fd - exact).norm() <= 1e-5 * exact.norm().max(1e-8 * mu));
        }

        #[test]
        fn stress_is_deviatoric(f in admissible_f(), mu in 0.1f64..3.0) {
            let s = neo_hookean_stress_3d(&Kinematics::new(f).unwrap(), mu);
            prop_assert!(s.trace().abs() <= 1e-14 * mu * s.norm().max(1.0));
        }

        #[test]
        fn tangent_has_major_symmetry(f in admissible_f()) {
            let d = neo_hookean_tangent(&Kinematics::new(f).unwrap(), 1.0);
            prop_assert!(d.major_asymmetry() <= 1e-12 * d.max_abs());
        }

        #[test]
        fn h_is_symmetric_for_symmetric_k(g in prop::array::uniform4(-2.0f64..2.0),
                                          k in prop::array::uniform3(-2.0f64..2.0)) {
            let g = Mat2::new(g[0], g[1], g[2], g[3]);
            let k = Mat2::new(k[0], k[1], k[1], k[2]);
            let h = tensor_h(&g, &k);
            prop_assert_eq!(h, h.transpose());
        }

        #[test]
        fn stress_is_frame_covariant(f in admissible_f(), theta in -3.0f64..3.0) {
            let q = Mat2::new(theta.cos(), -theta.sin(), theta.sin(), theta.cos());
            let s = neo_hookean_stress(&Kinematics::new(f).unwrap(), 1.0);
            let sq = neo_hookean_stress(&Kinematics::new(q * f).unwrap(), 1.0);
            prop_assert!((sq - q * s * q.transpose()).norm() <= 1e-12 * s.norm().max(1.0));
        }

        #[test]
        fn tangent_operator_is_major_symmetric(f in admissible_f(), p in -2.0f64..2.0) {
            let r = evaluate_point(&f, 1.0, p).unwrap();
            prop_assert!(r.tangent.major_asymmetry() <= 1e-12 * r.tangent.max_abs());
        }
    }
}
