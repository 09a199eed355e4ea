//! Dense and sparse linear algebra behind the spectral and electrical code.
//!
//! Dense routines use `nalgebra`. The sparse side is a compressed-row
//! symmetric matrix with a Jacobi-preconditioned conjugate gradient solver and
//! a Lanczos iteration for extreme eigenvalues.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::numeric::{dot, norm2};

/// Systems up to this order are factorised densely.
pub const DENSE_SOLVE_LIMIT: usize = 2_500;
/// Eigenproblems up to this order are solved densely.
pub const DENSE_EIGEN_LIMIT: usize = 800;

/// `D^{1/2} (I - P) D^{-1/2}` restricted to `rows`, where `D = diag(π)`.
/// For a reversible lazy kernel this is symmetric with the spectrum of `I - P`
/// (or of `(I - P)_{AA}` for a proper subset).
pub fn symmetric_laplacian_block(g: &WeightedGraph, rows: &[usize]) -> DMatrix<f64> {
    let m = rows.len();
    let mut index = vec![usize::MAX; g.vertex_count()];
    for (k, &x) in rows.iter().enumerate() {
        index[x] = k;
    }
    let mut a = DMatrix::<f64>::zeros(m, m);
    for (i, &x) in rows.iter().enumerate() {
        let cx = g.vertex_conductance(x);
        a[(i, i)] = 0.5 - g.loop_conductance(x) / (2.0 * cx);
        for &(y, c) in g.neighbors(x) {
            if y == x || index[y] == usize::MAX {
                continue;
            }
            // sqrt(π(x)/π(y)) · c/(2c_x) = c / (2 sqrt(c_x c_y))
            a[(i, index[y])] = -c / (2.0 * (cx * g.vertex_conductance(y)).sqrt());
        }
    }
    a
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(a: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Ascending eigenpairs; column `k` of the matrix belongs to value `k`.
pub fn symmetric_eigen(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let se = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let vals = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(se.eigenvectors.nrows(), order.len(), |r, c| se.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Symmetric sparse matrix in compressed-row form (both triangles stored).
#[derive(Debug, Clone)]
pub struct SparseSym {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for r in rows {
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            offsets.push(cols.len());
        }
        Self { n, offsets, cols, vals }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.offsets[i]..self.offsets[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *o = s;
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.offsets[i]..self.offsets[i + 1])
                    .find(|&k| self.cols[k] == i)
                    .map(|k| self.vals[k])
                    .unwrap_or(0.0)
            })
            .collect()
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.offsets[i]..self.offsets[i + 1] {
                a[(i, self.cols[k])] += self.vals[k];
            }
        }
        a
    }

    /// Solves `A x = b` for symmetric positive definite `A`, densely for small
    /// orders and with preconditioned conjugate gradients above that.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_spd_multi(&[b.to_vec()]).map(|mut v| v.remove(0))
    }

    /// Several right-hand sides; the dense factorisation is shared.
    pub fn solve_spd_multi(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if self.n == 0 {
            return Ok(rhs.iter().map(|_| Vec::new()).collect());
        }
        if self.n <= DENSE_SOLVE_LIMIT {
            let chol = self.to_dense().cholesky().ok_or(Error::Singular)?;
            return Ok(rhs
                .iter()
                .map(|b| chol.solve(&DVector::from_column_slice(b)).as_slice().to_vec())
                .collect());
        }
        rhs.iter().map(|b| self.pcg(b, 1e-13, 50 * self.n + 1_000)).collect()
    }

    fn pcg(&self, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let n = self.n;
        let diag = self.diagonal();
        if diag.iter().any(|&d| d <= 0.0) {
            return Err(Error::Singular);
        }
        let bnorm = norm2(b);
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = dot(&r, &z);
        for _ in 0..max_iter {
            self.mul(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return Err(Error::Singular);
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if norm2(&r) <= rel_tol * bnorm {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        Err(Error::NoConvergence {
            method: "conjugate gradient",
            iterations: max_iter,
        })
    }
}

/// The weighted Laplacian `D - C` restricted to `interior` (a grounded
/// Laplacian), together with the map from vertex to row.
pub fn grounded_laplacian(g: &WeightedGraph, interior: &[bool]) -> (SparseSym, Vec<usize>) {
    let n = g.vertex_count();
    let mut index = vec![usize::MAX; n];
    let mut k = 0;
    for x in 0..n {
        if interior[x] {
            index[x] = k;
            k += 1;
        }
    }
    let mut rows = Vec::with_capacity(k);
    for x in 0..n {
        if !interior[x] {
            continue;
        }
        let mut r = vec![(index[x], g.vertex_conductance(x) - g.loop_conductance(x))];
        for &(y, c) in g.neighbors(x) {
            if y != x && interior[y] {
                r.push((index[y], -c));
            }
        }
        r.sort_by_key(|&(c, _)| c);
        rows.push(r);
    }
    (SparseSym::from_rows(rows), index)
}

/// Largest eigenvalue of a symmetric operator on the orthogonal complement
/// of the unit vector `deflate`, by Lanczos with full reorthogonalisation
/// and restarts from the current Ritz vector.
pub fn lanczos_largest(
    n: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    deflate: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    lanczos_largest_pair(n, apply, deflate, tol, max_iter).map(|(theta, _)| theta)
}

/// As [`lanczos_largest`], also returning the unit Ritz vector.
pub fn lanczos_largest_pair(
    n: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    deflate: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(f64, Vec<f64>)> {
    let project = |v: &mut [f64]| {
        let c = dot(v, deflate);
        for (vi, di) in v.iter_mut().zip(deflate) {
            *vi -= c * di;
        }
    };
    let mut start: Vec<f64> = (0..n).map(|i| ((i as f64 * 0.618_033_988_75).fract() - 0.5) + 1e-3).collect();
    project(&mut start);
    let mut total = 0;
    let block = n.saturating_sub(1).clamp(1, 200);
    loop {
        let nrm = norm2(&start);
        if nrm == 0.0 {
            return Err(Error::Singular);
        }
        let mut basis: Vec<Vec<f64>> = vec![start.iter().map(|v| v / nrm).collect()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![0.0; n];
        let mut last_beta = 0.0;
        for j in 0..block {
            apply(&basis[j], &mut w);
            project(&mut w);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            // full reorthogonalisation, twice
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(&w, q);
                    for (wi, qi) in w.iter_mut().zip(q) {
                        *wi -= c * qi;
                    }
                }
            }
            total += 1;
            let b = norm2(&w);
            last_beta = b;
            if b <= 1e-14 || j + 1 == block {
                break;
            }
            beta.push(b);
            basis.push(w.iter().map(|v| v / b).collect());
        }
        let m = alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let (vals, vecs) = symmetric_eigen(t);
        let theta = vals[m - 1];
        let resid = (last_beta * vecs[(m - 1, m - 1)]).abs();
        let mut ritz = vec![0.0; n];
        for (k, q) in basis.iter().enumerate().take(m) {
            let c = vecs[(k, m - 1)];
            for (ri, qi) in ritz.iter_mut().zip(q) {
                *ri += c * qi;
            }
        }
        project(&mut ritz);
        if resid <= tol * theta.abs().max(1e-300) || last_beta <= 1e-14 {
            let nrm = norm2(&ritz);
            ritz.iter_mut().for_each(|v| *v /= nrm);
            return Ok((theta, ritz));
        }
        if total >= max_iter {
            return Err(Error::NoConvergence {
                method: "Lanczos",
                iterations: total,
            });
        }
        start = ritz;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pcg_matches_dense() {
        // 1D grounded Laplacian of order 3000 solved both ways on a slice.
        let n = 3_000;
        let rows: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| {
                let mut r = vec![(i, 2.0)];
                if i > 0 {
                    r.insert(0, (i - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.0));
                }
                r
            })
            .collect();
        let a = SparseSym::from_rows(rows);
        let b: Vec<f64> = (0..n).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
        let x = a.solve_spd(&b).unwrap();
        // exact solution: x_i = (n - i) / (n + 1)
        for i in [0, 1, 1500, n - 1] {
            let exact = (n - i) as f64 / (n + 1) as f64;
            assert!((x[i] - exact).abs() < 1e-8, "{i}: {} vs {exact}", x[i]);
        }
    }

    #[test]
    fn lanczos_finds_second_eigenvalue_of_cycle() {
        // lazy walk on C_n: eigenvalues (1 + cos(2πk/n))/2
        let n = 64;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = 0.5 * x[i] + 0.25 * (x[(i + 1) % n] + x[(i + n - 1) % n]);
            }
        };
        let u = vec![1.0 / (n as f64).sqrt(); n];
        let top = lanczos_largest(n, apply, &u, 1e-12, 10_000).unwrap();
        let exact = (1.0 + (2.0 * std::f64::consts::PI / n as f64).cos()) / 2.0;
        assert!((top - exact).abs() < 1e-10);
    }
}
