//! Dense reference computations, written independently of the library's
//! sparse and enumerative code paths.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use robustmix::WeightedGraph;

/// Lazy transition matrix built straight from the adjacency lists.
pub fn dense_kernel(g: &WeightedGraph) -> DMatrix<f64> {
    let n = g.vertex_count();
    let mut p = DMatrix::zeros(n, n);
    for x in 0..n {
        let cx = g.vertex_conductance(x);
        let mut off = 0.0;
        for &(y, c) in g.neighbors(x) {
            if y != x {
                p[(x, y)] += c / (2.0 * cx);
                off += c / (2.0 * cx);
            }
        }
        p[(x, x)] = 1.0 - off;
    }
    p
}

pub fn stationary(g: &WeightedGraph) -> Vec<f64> {
    let total: f64 = (0..g.vertex_count()).map(|x| g.vertex_conductance(x)).sum();
    (0..g.vertex_count()).map(|x| g.vertex_conductance(x) / total).collect()
}

/// Eigenvalues of `I − P` restricted to `rows`, ascending.
fn symmetric_spectrum(p: &DMatrix<f64>, pi: &[f64], rows: &[usize]) -> Vec<f64> {
    let k = rows.len();
    let m = DMatrix::from_fn(k, k, |i, j| {
        let (x, y) = (rows[i], rows[j]);
        let s = p[(x, y)] * (pi[x] / pi[y]).sqrt();
        if i == j {
            1.0 - s
        } else {
            -0.5 * (s + p[(y, x)] * (pi[y] / pi[x]).sqrt())
        }
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn spectrum(g: &WeightedGraph) -> Vec<f64> {
    let rows: Vec<usize> = (0..g.vertex_count()).collect();
    symmetric_spectrum(&dense_kernel(g), &stationary(g), &rows)
}

pub fn gap(g: &WeightedGraph) -> f64 {
    spectrum(g)[1]
}

/// Smallest eigenvalue of `I − P_A`.
pub fn restricted_gap(g: &WeightedGraph, set: &[usize]) -> f64 {
    symmetric_spectrum(&dense_kernel(g), &stationary(g), set)[0]
}

fn q_of(p: &DMatrix<f64>, pi: &[f64], inside: &[bool]) -> f64 {
    let n = pi.len();
    let mut q = 0.0;
    for x in 0..n {
        if inside[x] {
            for y in 0..n {
                if !inside[y] {
                    q += pi[x] * p[(x, y)];
                }
            }
        }
    }
    q
}

/// `min_{π(S) ≤ 1/2} Q(S)/π(S)` over every bitmask.
pub fn cheeger(g: &WeightedGraph) -> f64 {
    let n = g.vertex_count();
    let p = dense_kernel(g);
    let pi = stationary(g);
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << n) - 1 {
        let inside: Vec<bool> = (0..n).map(|x| mask >> x & 1 == 1).collect();
        let m: f64 = (0..n).filter(|&x| inside[x]).map(|x| pi[x]).sum();
        if m <= 0.5 + 1e-12 {
            best = best.min(q_of(&p, &pi, &inside) / m);
        }
    }
    best
}

/// `min_{∅ ≠ S ⊆ A} Q(S)/π(S)` over every subset of `A`.
pub fn restricted_cheeger(g: &WeightedGraph, set: &[usize]) -> f64 {
    let n = g.vertex_count();
    let p = dense_kernel(g);
    let pi = stationary(g);
    let mut best = f64::INFINITY;
    for mask in 1u32..(1u32 << set.len()) {
        let mut inside = vec![false; n];
        for (i, &x) in set.iter().enumerate() {
            inside[x] = mask >> i & 1 == 1;
        }
        let m: f64 = (0..n).filter(|&x| inside[x]).map(|x| pi[x]).sum();
        best = best.min(q_of(&p, &pi, &inside) / m);
    }
    best
}

/// `‖μ − π‖_{p,π}` with `p = ∞` allowed.
pub fn lp(mu: &[f64], pi: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return mu.iter().zip(pi).map(|(m, s)| (m - s).abs() / s).fold(0.0, f64::max);
    }
    mu.iter()
        .zip(pi)
        .map(|(m, s)| s.powf(1.0 - p) * (m - s).abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Row `x` of `P^t`, by repeated dense products.
pub fn row_power(p: &DMatrix<f64>, x: usize, t: u64) -> Vec<f64> {
    let n = p.nrows();
    let mut row = DMatrix::zeros(1, n);
    row[(0, x)] = 1.0;
    for _ in 0..t {
        row = &row * p;
    }
    row.iter().copied().collect()
}

/// `Pr_a[T_A < T_B]` by a dense solve.
pub fn hit_probability(g: &WeightedGraph, a: &[usize], b: &[usize], start: usize) -> f64 {
    let n = g.vertex_count();
    let p = dense_kernel(g);
    let free: Vec<usize> = (0..n).filter(|x| !a.contains(x) && !b.contains(x)).collect();
    if a.contains(&start) {
        return 1.0;
    }
    if b.contains(&start) {
        return 0.0;
    }
    let k = free.len();
    let m = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { 0.0 } - p[(free[i], free[j])]);
    let rhs = DMatrix::from_fn(k, 1, |i, _| a.iter().map(|&y| p[(free[i], y)]).sum());
    let sol = m.lu().solve(&rhs).expect("nonsingular");
    sol[(free.iter().position(|&x| x == start).unwrap(), 0)]
}
