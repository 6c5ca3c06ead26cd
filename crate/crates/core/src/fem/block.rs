//! Reduced block systems assembled from raw-dof blocks.

use super::dofs::{push_reduced, DofMap, Slot};
use super::sparse::Csr;

/// A coupled system over several fields plus optional scalar constraints
/// (Lagrange multipliers appended after all field unknowns).
///
/// Each block contributes `scale · Pᵣᵀ A P_c` at field position `(r, c)`.
/// Constraint `k` on field `f` adds row `Mₖ P_f` and its transpose.
pub struct BlockSystem<'a> {
    pub maps: Vec<&'a DofMap>,
    pub blocks: Vec<(usize, usize, &'a Csr, f64)>,
    pub constraints: Vec<(usize, Vec<f64>)>,
}

impl<'a> BlockSystem<'a> {
    pub fn new(maps: Vec<&'a DofMap>) -> BlockSystem<'a> {
        BlockSystem {
            maps,
            blocks: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn block(&mut self, row: usize, col: usize, a: &'a Csr, scale: f64) -> &mut Self {
        self.blocks.push((row, col, a, scale));
        self
    }

    pub fn constraint(&mut self, field: usize, row: Vec<f64>) -> &mut Self {
        self.constraints.push((field, row));
        self
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.maps.len() + 1);
        let mut s = 0;
        for m in &self.maps {
            off.push(s);
            s += m.n_free();
        }
        off.push(s);
        off
    }

    pub fn n(&self) -> usize {
        self.offsets()[self.maps.len()] + self.constraints.len()
    }

    pub fn matrix(&self) -> Csr {
        let off = self.offsets();
        let mut trips = Vec::new();
        for &(r, c, a, s) in &self.blocks {
            push_reduced(a, self.maps[r], self.maps[c], (off[r], off[c]), s, &mut trips);
        }
        let base = off[self.maps.len()];
        for (k, (f, row)) in self.constraints.iter().enumerate() {
            let reduced = self.maps[*f].reduce_vector(row);
            for (j, v) in reduced.into_iter().enumerate() {
                if v != 0.0 {
                    trips.push((base + k, off[*f] + j, v));
                    trips.push((off[*f] + j, base + k, v));
                }
            }
        }
        let n = self.n();
        Csr::from_triplets(n, n, &trips)
    }

    /// Reduced right-hand side from raw loads per field, after moving the
    /// prescribed raw values (`fixed`, read at class representatives) to
    /// the right. Constraint right-hand sides are zero.
    pub fn rhs(&self, loads: &[Option<&[f64]>], fixed: &[Option<&[f64]>]) -> Vec<f64> {
        let nf = self.maps.len();
        let mut raw: Vec<Vec<f64>> = (0..nf)
            .map(|f| match loads.get(f).copied().flatten() {
                Some(l) => l.to_vec(),
                None => vec![0.0; self.maps[f].n_raw()],
            })
            .collect();
        let lifts: Vec<Option<Vec<f64>>> = (0..nf)
            .map(|f| fixed.get(f).copied().flatten().map(|g| self.maps[f].lift(g)))
            .collect();
        for &(r, c, a, s) in &self.blocks {
            if let Some(g) = &lifts[c] {
                let ag = a.mul_vec(g);
                for (x, y) in raw[r].iter_mut().zip(&ag) {
                    *x -= s * y;
                }
            }
        }
        let mut out = Vec::with_capacity(self.n());
        for f in 0..nf {
            out.extend(self.maps[f].reduce_vector(&raw[f]));
        }
        out.resize(self.n(), 0.0);
        out
    }

    /// Raw field vectors (with prescribed values) from a reduced solution.
    pub fn expand(&self, x: &[f64], fixed: &[Option<&[f64]>]) -> Vec<Vec<f64>> {
        let off = self.offsets();
        (0..self.maps.len())
            .map(|f| {
                self.maps[f]
                    .expand(&x[off[f]..off[f + 1]], fixed.get(f).copied().flatten())
            })
            .collect()
    }

    /// Multiplier values from a reduced solution.
    pub fn multipliers<'x>(&self, x: &'x [f64]) -> &'x [f64] {
        &x[self.offsets()[self.maps.len()]..]
    }
}

/// Raw vector with `value` at every dof whose slot is fixed and whose
/// node satisfies `pred`.
pub fn fixed_values(map: &DofMap, pred: impl Fn(usize) -> Option<f64>) -> Vec<f64> {
    (0..map.n_raw())
        .map(|i| if map.slot(i) == Slot::Fixed { pred(i).unwrap_or(0.0) } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::dofs::DofMapBuilder;

    #[test]
    fn lift_and_constraint() {
        // 1D Laplacian on 3 nodes with node 0 fixed to 1 and node 2 free.
        let a = Csr::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0), (1, 2, -1.0), (2, 1, -1.0), (2, 2, 1.0)],
        );
        let map = DofMapBuilder::new(3, 1).fix(0).build();
        let mut sys = BlockSystem::new(vec![&map]);
        sys.block(0, 0, &a, 1.0);
        let g = vec![1.0, 0.0, 0.0];
        let rhs = sys.rhs(&[None], &[Some(&g)]);
        assert_eq!(rhs, vec![1.0, 0.0]);
        let m = sys.matrix();
        let x = crate::fem::solve_sparse(m, &rhs, "t").unwrap();
        let u = sys.expand(&x, &[Some(&g)]);
        for v in &u[0] {
            assert!((v - 1.0).abs() < 1e-14);
        }
        // Pure Neumann problem with a mean constraint.
        let free = DofMapBuilder::new(3, 1).build();
        let mut sys = BlockSystem::new(vec![&free]);
        sys.block(0, 0, &a, 1.0).constraint(0, vec![1.0, 1.0, 1.0]);
        let x = crate::fem::solve_sparse(sys.matrix(), &[1.0, 0.0, -1.0, 0.0], "t").unwrap();
        let u = sys.expand(&x, &[None]);
        assert!((u[0].iter().sum::<f64>()).abs() < 1e-14);
        assert!((u[0][0] - u[0][1] - 1.0).abs() < 1e-14);
    }
}
