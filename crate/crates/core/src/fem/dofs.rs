//! Degree-of-freedom maps with periodic/tie identification, Dirichlet
//! tagging and region restriction.

use super::sparse::Csr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    /// Outside the field's region.
    Inactive,
    /// Prescribed value (lifted to the right-hand side).
    Fixed,
    /// Unknown with its equation index.
    Free(usize),
}

/// Maps raw dofs (`node * ncomp + component`) to reduced unknowns.
#[derive(Clone, Debug, PartialEq)]
pub struct DofMap {
    pub ncomp: usize,
    rep: Vec<usize>,
    slot: Vec<Slot>,
    n_free: usize,
}

#[derive(Clone, Debug)]
pub struct DofMapBuilder {
    ncomp: usize,
    parent: Vec<usize>,
    active: Vec<bool>,
    fixed: Vec<bool>,
}

impl DofMapBuilder {
    pub fn new(n_nodes: usize, ncomp: usize) -> DofMapBuilder {
        let n = n_nodes * ncomp;
        DofMapBuilder {
            ncomp,
            parent: (0..n).collect(),
            active: vec![true; n],
            fixed: vec![false; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }

    /// Identifies every node with its periodic master, component-wise.
    pub fn periodic(mut self, master_of: &[usize]) -> DofMapBuilder {
        for (n, &m) in master_of.iter().enumerate() {
            for c in 0..self.ncomp {
                self.union(n * self.ncomp + c, m * self.ncomp + c);
            }
        }
        self
    }

    /// Forces the listed raw dofs to share one value.
    pub fn tie(mut self, dofs: &[usize]) -> DofMapBuilder {
        for w in dofs.windows(2) {
            self.union(w[0], w[1]);
        }
        self
    }

    /// Restricts the field to nodes flagged in `mask`.
    pub fn restrict_nodes(mut self, mask: &[bool]) -> DofMapBuilder {
        for (n, &on) in mask.iter().enumerate() {
            for c in 0..self.ncomp {
                self.active[n * self.ncomp + c] = on;
            }
        }
        self
    }

    pub fn fix(mut self, dof: usize) -> DofMapBuilder {
        self.fixed[dof] = true;
        self
    }

    pub fn fix_nodes(mut self, nodes: &[usize], comp: usize) -> DofMapBuilder {
        for &n in nodes {
            self.fixed[n * self.ncomp + comp] = true;
        }
        self
    }

    /// A class of identified dofs is active if any member is, and fixed if
    /// any member is. Free unknowns are numbered by smallest member dof.
    pub fn build(mut self) -> DofMap {
        let n = self.parent.len();
        let rep: Vec<usize> = (0..n).map(|i| self.find(i)).collect();
        let mut active = vec![false; n];
        let mut fixed = vec![false; n];
        for i in 0..n {
            active[rep[i]] |= self.active[i];
            fixed[rep[i]] |= self.fixed[i];
        }
        let mut slot = vec![Slot::Inactive; n];
        let mut n_free = 0;
        for i in 0..n {
            if rep[i] == i {
                slot[i] = if !active[i] {
                    Slot::Inactive
                } else if fixed[i] {
                    Slot::Fixed
                } else {
                    n_free += 1;
                    Slot::Free(n_free - 1)
                };
            }
        }
        for i in 0..n {
            slot[i] = slot[rep[i]];
        }
        DofMap {
            ncomp: self.ncomp,
            rep,
            slot,
            n_free,
        }
    }
}

impl DofMap {
    pub fn n_raw(&self) -> usize {
        self.rep.len()
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn slot(&self, dof: usize) -> Slot {
        self.slot[dof]
    }

    pub fn rep(&self, dof: usize) -> usize {
        self.rep[dof]
    }

    pub fn is_free(&self, dof: usize) -> bool {
        matches!(self.slot[dof], Slot::Free(_))
    }

    pub fn n_fixed_classes(&self) -> usize {
        (0..self.n_raw()).filter(|&i| self.rep[i] == i && self.slot[i] == Slot::Fixed).count()
    }

    /// Free values read from a raw vector at each class representative.
    pub fn restrict(&self, raw: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (i, s) in self.slot.iter().enumerate() {
            if let Slot::Free(k) = *s {
                if self.rep[i] == i {
                    out[k] = raw[i];
                }
            }
        }
        out
    }

    /// Raw vector from free values and (optionally) prescribed raw values
    /// read at class representatives; inactive dofs are zero.
    pub fn expand(&self, free: &[f64], fixed: Option<&[f64]>) -> Vec<f64> {
        (0..self.n_raw())
            .map(|i| match self.slot[i] {
                Slot::Free(k) => free[k],
                Slot::Fixed => fixed.map_or(0.0, |g| g[self.rep[i]]),
                Slot::Inactive => 0.0,
            })
            .collect()
    }

    /// Raw vector carrying only the prescribed values (the Dirichlet lift).
    pub fn lift(&self, fixed: &[f64]) -> Vec<f64> {
        (0..self.n_raw())
            .map(|i| if self.slot[i] == Slot::Fixed { fixed[self.rep[i]] } else { 0.0 })
            .collect()
    }

    /// `Pᵀ r`: sums raw residual entries into their free equations.
    pub fn reduce_vector(&self, raw: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (i, &v) in raw.iter().enumerate() {
            if let Slot::Free(k) = self.slot[i] {
                out[k] += v;
            }
        }
        out
    }

    /// Raw basis vector of free unknown `k` (ones on all identified dofs).
    pub fn basis(&self, k: usize) -> Vec<f64> {
        (0..self.n_raw())
            .map(|i| if self.slot[i] == Slot::Free(k) { 1.0 } else { 0.0 })
            .collect()
    }
}

/// Appends the reduced block `P_rowsᵀ A P_cols`, scaled and shifted by
/// the given offsets, to `out`.
pub fn push_reduced(
    a: &Csr,
    rows: &DofMap,
    cols: &DofMap,
    offsets: (usize, usize),
    scale: f64,
    out: &mut Vec<(usize, usize, f64)>,
) {
    for r in 0..a.nrows {
        let Slot::Free(i) = rows.slot(r) else { continue };
        for (c, v) in a.row(r) {
            if let Slot::Free(j) = cols.slot(c) {
                out.push((i + offsets.0, j + offsets.1, scale * v));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_add_up() {
        // 4 nodes, node 3 slave of node 0, node 1 fixed, node 2 inactive.
        let map = DofMapBuilder::new(4, 1)
            .periodic(&[0, 1, 2, 0])
            .fix(1)
            .restrict_nodes(&[true, true, false, true])
            .build();
        assert_eq!(map.n_free(), 1);
        assert_eq!(map.slot(3), Slot::Free(0));
        assert_eq!(map.slot(2), Slot::Inactive);
        assert_eq!(map.expand(&[5.0], Some(&[0.0, 7.0, 0.0, 0.0])), vec![5.0, 7.0, 0.0, 5.0]);
        assert_eq!(map.reduce_vector(&[1.0, 1.0, 1.0, 2.0]), vec![3.0]);
    }

    #[test]
    fn tie_components() {
        let map = DofMapBuilder::new(3, 2).tie(&[1, 3, 5]).fix(0).build();
        assert_eq!(map.n_free(), 3);
        assert_eq!(map.slot(3), map.slot(5));
        assert_ne!(map.slot(2), map.slot(3));
    }
}
