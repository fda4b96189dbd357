//! Sparse global stiffness assembly over free DOFs.
//!
//! The global matrix is stored as the lower triangle (diagonal included) in
//! compressed-column form. The sparsity pattern and the element-to-pattern
//! scatter map depend only on topology and are built once per problem.

use nalgebra::{DMatrix, DVector};

use crate::elements::ElementState;
use crate::model::{DofMap, Model};

/// Where one entry (l, m) of an element matrix lands in the global pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    /// Row or column is a fixed DOF.
    Fixed,
    /// Entry (p, q) with p ≥ q, stored directly.
    Lower(usize),
    /// Entry (p, q) with p < q; index of the mirrored (q, p) position.
    Upper(usize),
}

/// Symmetric sparse matrix, lower triangle in CSC.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseSym {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn index_of(&self, row: usize, col: usize) -> Option<usize> {
        let (r, c) = if row >= col { (row, col) } else { (col, row) };
        let rows = &self.row_idx[self.col_ptr[c]..self.col_ptr[c + 1]];
        rows.binary_search(&r).ok().map(|k| self.col_ptr[c] + k)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.index_of(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                let v = self.values[k];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for c in 0..self.n {
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[k];
                m[(r, c)] = self.values[k];
                m[(c, r)] = self.values[k];
            }
        }
        m
    }
}

/// Adjoint of the global matrix restricted to its pattern. `lower[k]` holds
/// K̄(p, q) and `upper[k]` holds K̄(q, p) for the pattern position k = (p, q), p ≥ q.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBar {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SparseBar {
    /// K̄ = −y uᵀ on the pattern of `k`.
    pub fn outer(k: &SparseSym, y: &[f64], u: &[f64]) -> SparseBar {
        let mut lower = vec![0.0; k.nnz()];
        let mut upper = vec![0.0; k.nnz()];
        for q in 0..k.n {
            for idx in k.col_ptr[q]..k.col_ptr[q + 1] {
                let p = k.row_idx[idx];
                lower[idx] = -y[p] * u[q];
                upper[idx] = -y[q] * u[p];
            }
        }
        SparseBar { lower, upper }
    }
}

/// Topology-only data shared by every analysis of one problem.
#[derive(Debug, Clone)]
pub struct AssemblyPlan {
    pub n_free: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    /// Global DOFs of each element.
    pub element_dofs: Vec<Vec<usize>>,
    /// Row-major slot of each element matrix entry.
    pub slots: Vec<Vec<Slot>>,
}

impl AssemblyPlan {
    pub fn new(model: &Model, dofs: &DofMap) -> AssemblyPlan {
        let n = dofs.n_free();
        let element_dofs: Vec<Vec<usize>> = model
            .elements
            .iter()
            .map(|e| dofs.element_dofs(e))
            .collect();
        let mut columns: Vec<Vec<usize>> = (0..n).map(|c| vec![c]).collect();
        for ed in &element_dofs {
            let free: Vec<usize> = ed.iter().filter_map(|&g| dofs.free_of(g)).collect();
            for &p in &free {
                for &q in &free {
                    if p > q {
                        columns[q].push(p);
                    }
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in &mut columns {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        let find = |r: usize, c: usize| -> usize {
            let rows = &row_idx[col_ptr[c]..col_ptr[c + 1]];
            col_ptr[c] + rows.binary_search(&r).expect("entry in pattern")
        };
        let slots = element_dofs
            .iter()
            .map(|ed| {
                let mut s = Vec::with_capacity(ed.len() * ed.len());
                for &gl in ed {
                    for &gm in ed {
                        s.push(match (dofs.free_of(gl), dofs.free_of(gm)) {
                            (Some(p), Some(q)) if p >= q => Slot::Lower(find(p, q)),
                            (Some(p), Some(q)) => Slot::Upper(find(q, p)),
                            _ => Slot::Fixed,
                        });
                    }
                }
                s
            })
            .collect();
        AssemblyPlan {
            n_free: n,
            col_ptr,
            row_idx,
            element_dofs,
            slots,
        }
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Scatter element stiffnesses into a fresh global matrix, in element order.
    pub fn assemble(&self, states: &[ElementState]) -> SparseSym {
        let mut values = vec![0.0; self.nnz()];
        for (state, slots) in states.iter().zip(&self.slots) {
            let n = state.k.nrows();
            for (i, s) in slots.iter().enumerate() {
                if let Slot::Lower(k) = *s {
                    values[k] += state.k[(i / n, i % n)];
                }
            }
        }
        SparseSym {
            n: self.n_free,
            col_ptr: self.col_ptr.clone(),
            row_idx: self.row_idx.clone(),
            values,
        }
    }

    /// Element-local k̄ gathered from a pattern-restricted K̄.
    pub fn gather(&self, element: usize, bar: &SparseBar) -> DMatrix<f64> {
        let n = self.element_dofs[element].len();
        let mut out = DMatrix::zeros(n, n);
        for (i, s) in self.slots[element].iter().enumerate() {
            out[(i / n, i % n)] = match *s {
                Slot::Fixed => 0.0,
                Slot::Lower(k) => bar.lower[k],
                Slot::Upper(k) => bar.upper[k],
            };
        }
        out
    }

    /// Element displacement vector from a full-length global vector.
    pub fn element_vector(&self, element: usize, global: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.element_dofs[element].len(),
            self.element_dofs[element].iter().map(|&g| global[g]),
        )
    }
}

/// Free-DOF load vector.
pub fn load_vector(model: &Model, dofs: &DofMap) -> Vec<f64> {
    let mut f = vec![0.0; dofs.n_free()];
    for l in &model.loads {
        for a in 0..3 {
            if let Some(p) = dofs.free_of(dofs.global(l.node, a)) {
                f[p] += l.force[a];
            }
            if dofs.dofs_per_node == 6 {
                if let Some(p) = dofs.free_of(dofs.global(l.node, 3 + a)) {
                    f[p] += l.moment[a];
                }
            }
        }
    }
    f
}
