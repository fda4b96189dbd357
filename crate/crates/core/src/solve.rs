//! Sparse LDLᵀ factorization of the symmetric positive definite stiffness
//! matrix with a fill-reducing ordering. The symbolic analysis depends only on
//! the sparsity pattern and is shared across design states.

use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use crate::assembly::SparseSym;
use crate::error::{Error, Result};

/// Relative pivot threshold below which the matrix is reported singular.
pub const PIVOT_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ordering {
    Natural,
    #[default]
    MinimumDegree,
}

/// Minimum-degree ordering of a symmetric pattern given as lower CSC.
/// Vertices with identical closed neighbourhoods are merged first, which
/// collapses the per-node DOF blocks. Ties break on the smallest index.
/// Returns `perm` with `perm[k]` = original index eliminated k-th.
pub fn minimum_degree(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> Vec<usize> {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for c in 0..n {
        for &r in &row_idx[col_ptr[c]..col_ptr[c + 1]] {
            if r != c {
                adj[r].insert(c);
                adj[c].insert(r);
            }
        }
    }

    // supervariables: identical closed neighbourhoods
    let mut key_to_super: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut super_of = vec![0usize; n];
    for v in 0..n {
        let mut key: Vec<usize> = adj[v].iter().copied().collect();
        let pos = key.binary_search(&v).unwrap_err();
        key.insert(pos, v);
        let s = *key_to_super.entry(key).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[s].push(v);
        super_of[v] = s;
    }
    let ns = members.len();
    let weight: Vec<usize> = members.iter().map(|m| m.len()).collect();
    let mut sadj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ns];
    for v in 0..n {
        for &u in &adj[v] {
            let (a, b) = (super_of[v], super_of[u]);
            if a != b {
                sadj[a].insert(b);
            }
        }
    }
    drop(adj);

    let degree = |sadj: &Vec<BTreeSet<usize>>, s: usize| -> usize {
        sadj[s].iter().map(|&t| weight[t]).sum()
    };
    let mut deg: Vec<usize> = (0..ns).map(|s| degree(&sadj, s)).collect();
    // order ties by smallest original index of the supervariable
    let first: Vec<usize> = members.iter().map(|m| m[0]).collect();
    let mut queue: BTreeSet<(usize, usize, usize)> =
        (0..ns).map(|s| (deg[s], first[s], s)).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some(&(d, f, s)) = queue.iter().next() {
        queue.remove(&(d, f, s));
        perm.extend_from_slice(&members[s]);
        let nbrs: Vec<usize> = std::mem::take(&mut sadj[s]).into_iter().collect();
        for &u in &nbrs {
            sadj[u].remove(&s);
            for &w in &nbrs {
                if w != u {
                    sadj[u].insert(w);
                }
            }
        }
        for &u in &nbrs {
            let nd = degree(&sadj, u);
            if nd != deg[u] {
                queue.remove(&(deg[u], first[u], u));
                deg[u] = nd;
                queue.insert((nd, first[u], u));
            }
        }
    }
    perm
}

/// Ordering, elimination tree and column counts of L.
#[derive(Debug, Clone)]
pub struct Symbolic {
    pub n: usize,
    pub perm: Vec<usize>,
    pub pinv: Vec<usize>,
    /// Upper triangle of P K Pᵀ in CSC.
    upper_ptr: Vec<usize>,
    upper_idx: Vec<usize>,
    /// Position in the permuted upper triangle of every stored lower entry of K.
    value_map: Vec<usize>,
    parent: Vec<Option<usize>>,
    lp: Vec<usize>,
}

impl Symbolic {
    pub fn analyze(k: &SparseSym, ordering: Ordering) -> Symbolic {
        let n = k.n;
        let perm = match ordering {
            Ordering::Natural => (0..n).collect(),
            Ordering::MinimumDegree => minimum_degree(n, &k.col_ptr, &k.row_idx),
        };
        let mut pinv = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            pinv[p] = i;
        }

        // permuted upper triangle: column j holds rows i ≤ j
        let mut counts = vec![0usize; n];
        let mut entries = Vec::with_capacity(k.nnz());
        for c in 0..n {
            for &r in &k.row_idx[k.col_ptr[c]..k.col_ptr[c + 1]] {
                let (a, b) = (pinv[r], pinv[c]);
                let (row, col) = if a <= b { (a, b) } else { (b, a) };
                counts[col] += 1;
                entries.push((row, col));
            }
        }
        let mut upper_ptr = vec![0; n + 1];
        for j in 0..n {
            upper_ptr[j + 1] = upper_ptr[j] + counts[j];
        }
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_by_key(|&e| (entries[e].1, entries[e].0));
        let mut upper_idx = vec![0; entries.len()];
        let mut value_map = vec![0; entries.len()];
        for (pos, &e) in order.iter().enumerate() {
            upper_idx[pos] = entries[e].0;
            value_map[e] = pos;
        }

        let mut parent = vec![None; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for kk in 0..n {
            flag[kk] = kk;
            for &i0 in &upper_idx[upper_ptr[kk]..upper_ptr[kk + 1]] {
                let mut i = i0;
                if i < kk {
                    while flag[i] != kk {
                        if parent[i].is_none() {
                            parent[i] = Some(kk);
                        }
                        lnz[i] += 1;
                        flag[i] = kk;
                        i = parent[i].expect("set above");
                    }
                }
            }
        }
        let mut lp = vec![0; n + 1];
        for j in 0..n {
            lp[j + 1] = lp[j] + lnz[j];
        }
        Symbolic {
            n,
            perm,
            pinv,
            upper_ptr,
            upper_idx,
            value_map,
            parent,
            lp,
        }
    }

    /// Nonzeros in the strictly lower factor.
    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// True when `k` has the pattern this analysis was built from.
    pub fn matches(&self, k: &SparseSym) -> bool {
        k.n == self.n && k.nnz() == self.value_map.len()
    }
}

/// Numeric LDLᵀ factor of P K Pᵀ.
#[derive(Debug, Clone)]
pub struct Factor {
    pub symbolic: Arc<Symbolic>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl Factor {
    pub fn factorize(k: &SparseSym, ordering: Ordering) -> Result<Factor> {
        Factor::refactorize(Arc::new(Symbolic::analyze(k, ordering)), k)
    }

    /// Numeric factorization reusing an existing symbolic analysis.
    pub fn refactorize(symbolic: Arc<Symbolic>, k: &SparseSym) -> Result<Factor> {
        let s = &*symbolic;
        if !s.matches(k) {
            return Err(Error::DimensionMismatch {
                expected: s.value_map.len(),
                found: k.nnz(),
            });
        }
        let n = s.n;
        let mut ax = vec![0.0; k.nnz()];
        for (e, &pos) in s.value_map.iter().enumerate() {
            ax[pos] = k.values[e];
        }
        let nnz = s.factor_nnz();
        let mut li = vec![0usize; nnz];
        let mut lx = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        let mut flag = vec![usize::MAX; n];
        let mut lnz = vec![0usize; n];
        for kk in 0..n {
            let mut top = n;
            flag[kk] = kk;
            let mut diag = 0.0;
            for p in s.upper_ptr[kk]..s.upper_ptr[kk + 1] {
                let mut i = s.upper_idx[p];
                y[i] += ax[p];
                if i == kk {
                    diag = ax[p];
                }
                let mut len = 0;
                while flag[i] != kk {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = kk;
                    i = s.parent[i].expect("row below diagonal has a parent");
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[kk] = y[kk];
            y[kk] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let p2 = s.lp[i] + lnz[i];
                for p in s.lp[i]..p2 {
                    y[li[p]] -= lx[p] * yi;
                }
                let l_ki = yi / d[i];
                d[kk] -= l_ki * yi;
                li[p2] = kk;
                lx[p2] = l_ki;
                lnz[i] += 1;
            }
            if !(d[kk] > PIVOT_TOLERANCE * diag.abs()) || !d[kk].is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: s.perm[kk] });
            }
        }
        Ok(Factor {
            symbolic,
            li,
            lx,
            d,
        })
    }

    pub fn n(&self) -> usize {
        self.symbolic.n
    }

    /// Solve K x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let s = &*self.symbolic;
        let n = s.n;
        let mut x: Vec<f64> = (0..n).map(|k| b[s.perm[k]]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in s.lp[j]..s.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut acc = x[j];
            for p in s.lp[j]..s.lp[j + 1] {
                acc -= self.lx[p] * x[self.li[p]];
            }
            x[j] = acc;
        }
        let mut out = vec![0.0; n];
        for k in 0..n {
            out[s.perm[k]] = x[k];
        }
        out
    }

    /// Diagonal of D in elimination order.
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }
}
