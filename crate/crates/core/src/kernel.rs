//! The lazy transition operator and its restriction to a vertex set.

use crate::error::{invalid, Result};
use crate::graph::{Distribution, VertexSet, WeightedGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Lazy,
    /// Rows and columns outside the set are zero; mass leaving the set is lost.
    Restricted,
}

/// Row-indexed sparse stochastic (or substochastic) matrix.
///
/// The sparsity pattern is symmetric, so the same index arrays serve both
/// `P(x, ·)` (`vals`) and `P(·, y)` (`tvals`), which makes both `μP` and `Pf`
/// gather-only loops.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    kind: KernelKind,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    tvals: Vec<f64>,
    support: Option<Vec<bool>>,
}

impl TransitionKernel {
    /// `P(v,v) = 1/2 + c_loop(v)/(2c_v)`, `P(v,u) = c_uv/(2c_v)`.
    pub fn lazy(g: &WeightedGraph) -> Result<Self> {
        g.require_walkable()?;
        let n = g.vertex_count();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut tvals = Vec::new();
        offsets.push(0);
        for x in 0..n {
            let cx = g.vertex_conductance(x);
            let nb = g.neighbors(x);
            let mut diag_done = false;
            let push_diag = |cols: &mut Vec<usize>, vals: &mut Vec<f64>, tvals: &mut Vec<f64>| {
                let p = 0.5 + g.loop_conductance(x) / (2.0 * cx);
                cols.push(x);
                vals.push(p);
                tvals.push(p);
            };
            for &(y, c) in nb {
                if y == x {
                    continue;
                }
                if !diag_done && y > x {
                    push_diag(&mut cols, &mut vals, &mut tvals);
                    diag_done = true;
                }
                cols.push(y);
                vals.push(c / (2.0 * cx));
                tvals.push(c / (2.0 * g.vertex_conductance(y)));
            }
            if !diag_done {
                push_diag(&mut cols, &mut vals, &mut tvals);
            }
            offsets.push(cols.len());
        }
        Ok(Self {
            kind: KernelKind::Lazy,
            offsets,
            cols,
            vals,
            tvals,
            support: None,
        })
    }

    /// The substochastic kernel `P_A`: transitions within `set` only.
    pub fn restricted(&self, set: &VertexSet) -> Result<Self> {
        let n = self.len();
        if set.iter().any(|x| x >= n) {
            return Err(invalid("restriction set out of range"));
        }
        let mask = set.mask(n);
        let mut out = self.clone();
        for x in 0..n {
            for k in self.offsets[x]..self.offsets[x + 1] {
                if !(mask[x] && mask[self.cols[k]]) {
                    out.vals[k] = 0.0;
                    out.tvals[k] = 0.0;
                }
            }
        }
        out.kind = KernelKind::Restricted;
        out.support = Some(mask);
        Ok(out)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn support(&self) -> Option<&[bool]> {
        self.support.as_deref()
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    /// Nonzero entries of row `x` as `(y, P(x,y))`.
    pub fn row(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.offsets[x]..self.offsets[x + 1])
            .map(move |k| (self.cols[k], self.vals[k]))
            .filter(|&(_, p)| p != 0.0)
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        let r = &self.cols[self.offsets[x]..self.offsets[x + 1]];
        match r.binary_search(&y) {
            Ok(i) => self.vals[self.offsets[x] + i],
            Err(_) => 0.0,
        }
    }

    pub fn row_sum(&self, x: usize) -> f64 {
        crate::numeric::neumaier_sum(self.row(x).map(|(_, p)| p))
    }

    /// `out = μP`.
    pub fn apply_left(&self, mu: &[f64], out: &mut [f64]) {
        for (y, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.offsets[y]..self.offsets[y + 1] {
                s += self.tvals[k] * mu[self.cols[k]];
            }
            *o = s;
        }
    }

    /// `out = Pf`.
    pub fn apply_right(&self, f: &[f64], out: &mut [f64]) {
        for (x, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.offsets[x]..self.offsets[x + 1] {
                s += self.vals[k] * f[self.cols[k]];
            }
            *o = s;
        }
    }

    /// `μP^t` by `t` sparse applications.
    pub fn evolve(&self, mu: &Distribution, t: u64) -> Distribution {
        let mut cur = mu.as_slice().to_vec();
        let mut next = vec![0.0; cur.len()];
        for _ in 0..t {
            self.apply_left(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        let sub = mu.is_sub_probability() || self.kind == KernelKind::Restricted;
        Distribution::from_raw(cur, sub)
    }

    /// Largest relative violation of `π(u)P(u,v) = π(v)P(v,u)`.
    pub fn reversibility_defect(&self, pi: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for x in 0..self.len() {
            for k in self.offsets[x]..self.offsets[x + 1] {
                let y = self.cols[k];
                let a = pi[x] * self.vals[k];
                let b = pi[y] * self.entry(y, x);
                let scale = a.abs().max(b.abs());
                if scale > 0.0 {
                    worst = worst.max((a - b).abs() / scale);
                }
            }
        }
        worst
    }

    /// Builds a kernel from explicit rows; used for negative controls.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in &rows {
            let mut r = row.clone();
            r.sort_by_key(|&(y, _)| y);
            for (y, p) in r {
                if y >= n {
                    return Err(invalid("column out of range"));
                }
                cols.push(y);
                vals.push(p);
            }
            offsets.push(cols.len());
        }
        // the pattern may be asymmetric here, so fill tvals by lookup
        let mut k = Self {
            kind: KernelKind::Lazy,
            offsets,
            cols,
            vals,
            tvals: Vec::new(),
            support: None,
        };
        let mut tvals = vec![0.0; k.cols.len()];
        for y in 0..n {
            for idx in k.offsets[y]..k.offsets[y + 1] {
                tvals[idx] = k.entry(k.cols[idx], y);
            }
        }
        k.tvals = tvals;
        Ok(k)
    }
}
