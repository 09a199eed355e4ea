//! Eigenstructure of the lazy walk, Cheeger constants, restricted spectral
//! gaps and the spectral-profile bound `ρ` on the uniform mixing time.
//!
//! All reported spectra are eigenvalues of `I - P`. Where a formula needs
//! powers of the kernel, the eigenvalues of `P` are `1 - λ_i`.
//!
//! Exhaustive searches only visit connected vertex sets. For the Cheeger
//! ratio this loses nothing: `Q` and `π` are additive over the components of
//! a set, so some component does at least as well and has smaller mass. The
//! same block-diagonal argument shows that `λ(A)` of a disconnected `A` is
//! the minimum over its components.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{VertexSet, WeightedGraph};
use crate::kernel::TransitionKernel;
use crate::linalg::{
    lanczos_largest_pair, symmetric_eigen, symmetric_eigenvalues, symmetric_laplacian_block,
    DENSE_EIGEN_LIMIT,
};
use crate::numeric::neumaier_sum;

/// Largest graph handled by [`cheeger`].
pub const CHEEGER_LIMIT: usize = 24;
/// Largest graph handled by [`cheeger_all_subsets`].
pub const ALL_SUBSETS_LIMIT: usize = 14;
/// Largest set handled by [`restricted_cheeger`].
pub const RESTRICTED_CHEEGER_LIMIT: usize = 22;
/// Largest graph handled by [`spectral_profile`].
pub const PROFILE_LIMIT: usize = 20;

const MASS_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    DenseExact,
    Iterative,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Eigenvalues of `I - P`, ascending.
    pub eigenvalues: Vec<f64>,
    pub method: SpectrumMethod,
}

impl SpectrumResult {
    pub fn gap(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }
}

/// Full spectrum of `I - P` by dense symmetric eigendecomposition.
pub fn spectrum(g: &WeightedGraph) -> Result<SpectrumResult> {
    g.require_walkable()?;
    let n = g.vertex_count();
    if n > DENSE_EIGEN_LIMIT {
        return Err(Error::SizeLimit {
            what: "dense spectrum",
            size: n,
            limit: DENSE_EIGEN_LIMIT,
        });
    }
    let rows: Vec<usize> = (0..n).collect();
    let eigenvalues = symmetric_eigenvalues(symmetric_laplacian_block(g, &rows));
    Ok(SpectrumResult {
        eigenvalues,
        method: SpectrumMethod::DenseExact,
    })
}

/// The spectral gap `λ_2` of `I - P`, with the method used.
pub fn spectral_gap_with_method(g: &WeightedGraph) -> Result<(f64, SpectrumMethod)> {
    g.require_walkable()?;
    let n = g.vertex_count();
    if n == 1 {
        return Err(invalid("a single vertex has no spectral gap"));
    }
    if n <= DENSE_EIGEN_LIMIT {
        return Ok((spectrum(g)?.gap(), SpectrumMethod::DenseExact));
    }
    let (top, _) = second_eigenpair_of_kernel(g)?;
    Ok((1.0 - top, SpectrumMethod::Iterative))
}

/// The spectral gap `λ_2` of `I - P`.
pub fn spectral_gap(g: &WeightedGraph) -> Result<f64> {
    spectral_gap_with_method(g).map(|(v, _)| v)
}

/// Second eigenpair of `D^{1/2} P D^{-1/2}` by deflated Lanczos; the
/// eigenvalues of the lazy kernel are nonnegative so the second largest is
/// the largest on the complement of `sqrt(π)`.
fn second_eigenpair_of_kernel(g: &WeightedGraph) -> Result<(f64, Vec<f64>)> {
    let n = g.vertex_count();
    let p = TransitionKernel::lazy(g)?;
    let pi = g.stationary()?;
    let sq: Vec<f64> = pi.as_slice().iter().map(|v| v.sqrt()).collect();
    let apply = |x: &[f64], y: &mut [f64]| {
        // y = D^{1/2} P D^{-1/2} x
        let scaled: Vec<f64> = x.iter().zip(&sq).map(|(a, s)| a / s).collect();
        p.apply_right(&scaled, y);
        for (yi, s) in y.iter_mut().zip(&sq) {
            *yi *= s;
        }
    };
    lanczos_largest_pair(n, apply, &sq, 1e-9, 1_000_000)
}

/// Flow data for evaluating `Q(B) = Σ_{x∈B, y∉B} π(x)P(x,y)` on bitmask
/// subsets of at most 64 local vertices.
struct LocalNet {
    k: usize,
    /// `π` of each local vertex.
    mass: Vec<f64>,
    /// Non-loop conductance leaving each local vertex, over `2c_V`.
    out: Vec<f64>,
    /// Local adjacency (for connectivity) within the allowed region.
    nbr: Vec<u64>,
    /// `(i, j, c / 2c_V)` for local edges `i < j`.
    inner: Vec<Vec<(usize, f64)>>,
    vertices: Vec<usize>,
}

impl LocalNet {
    fn new(g: &WeightedGraph, vertices: &[usize]) -> Self {
        let k = vertices.len();
        let cv = g.total_conductance();
        let mut index = vec![usize::MAX; g.vertex_count()];
        for (i, &x) in vertices.iter().enumerate() {
            index[x] = i;
        }
        let mut nbr = vec![0u64; k];
        let mut inner = vec![Vec::new(); k];
        let mut out = vec![0.0; k];
        for (i, &x) in vertices.iter().enumerate() {
            out[i] = (g.vertex_conductance(x) - g.loop_conductance(x)) / (2.0 * cv);
            for &(y, c) in g.neighbors(x) {
                if y == x || index[y] == usize::MAX {
                    continue;
                }
                let j = index[y];
                nbr[i] |= 1u64 << j;
                if i < j {
                    inner[i].push((j, c / (2.0 * cv)));
                }
            }
        }
        let mass = vertices.iter().map(|&x| g.vertex_conductance(x) / cv).collect();
        Self {
            k,
            mass,
            out,
            nbr,
            inner,
            vertices: vertices.to_vec(),
        }
    }

    fn flow(&self, set: u64) -> f64 {
        let mut q = 0.0;
        let mut bits = set;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            q += self.out[i];
            for &(j, c) in &self.inner[i] {
                if set >> j & 1 == 1 {
                    q -= 2.0 * c;
                }
            }
        }
        q.max(0.0)
    }

    fn mass_of(&self, set: u64) -> f64 {
        let mut bits = set;
        let mut m = 0.0;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            m += self.mass[i];
        }
        m
    }

    fn to_set(&self, set: u64, n: usize) -> VertexSet {
        let mut v = Vec::new();
        let mut bits = set;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            v.push(self.vertices[i]);
        }
        VertexSet::new(v, n).expect("local vertices are valid")
    }

    /// Calls `visit(set, mass)` once for every connected local set with mass
    /// at most `max_mass`, partitioned by smallest member across threads.
    fn connected_sets<T: Send>(
        &self,
        max_mass: f64,
        init: impl Fn() -> T + Sync,
        visit: impl Fn(&mut T, u64, f64) + Sync,
    ) -> Vec<T> {
        (0..self.k)
            .into_par_iter()
            .map(|v| {
                let mut acc = init();
                if self.mass[v] <= max_mass {
                    let forbidden = (1u64 << v) - 1;
                    let ext = self.nbr[v] & !forbidden;
                    self.extend(1u64 << v, self.mass[v], ext, forbidden, max_mass, &mut acc, &visit);
                }
                acc
            })
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn extend<T>(
        &self,
        set: u64,
        mass: f64,
        mut ext: u64,
        mut forbidden: u64,
        max_mass: f64,
        acc: &mut T,
        visit: &impl Fn(&mut T, u64, f64),
    ) {
        visit(acc, set, mass);
        while ext != 0 {
            let x = ext.trailing_zeros() as usize;
            let bit = 1u64 << x;
            ext &= !bit;
            let m = mass + self.mass[x];
            if m <= max_mass {
                let next_ext = (ext | self.nbr[x]) & !set & !forbidden & !bit;
                self.extend(set | bit, m, next_ext, forbidden, max_mass, acc, visit);
            }
            forbidden |= bit;
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheegerResult {
    pub value: f64,
    pub argmin: VertexSet,
}

fn better(a: (f64, u64), b: (f64, u64)) -> (f64, u64) {
    if a.0 < b.0 || (a.0 == b.0 && a.1 < b.1) {
        a
    } else {
        b
    }
}

/// Exact Cheeger constant `Φ = min_{π(A) ≤ 1/2} Q(A)/π(A)` by enumerating
/// connected sets.
pub fn cheeger(g: &WeightedGraph) -> Result<CheegerResult> {
    cheeger_up_to(g, CHEEGER_LIMIT)
}

/// [`cheeger`] for sparse graphs of up to 64 vertices, such as stretches of
/// small graphs. The cost is the number of connected sets of mass at most
/// 1/2, which is modest when the graph is mostly long paths and can be
/// astronomical otherwise.
pub fn cheeger_sparse(g: &WeightedGraph) -> Result<CheegerResult> {
    cheeger_up_to(g, 64)
}

fn cheeger_up_to(g: &WeightedGraph, limit: usize) -> Result<CheegerResult> {
    g.require_walkable()?;
    let n = g.vertex_count();
    if n > limit {
        return Err(Error::SizeLimit {
            what: "exhaustive Cheeger search (use sweep_cut_bound)",
            size: n,
            limit,
        });
    }
    if n < 2 {
        return Err(invalid("Cheeger constant needs at least two vertices"));
    }
    let vertices: Vec<usize> = (0..n).collect();
    let net = LocalNet::new(g, &vertices);
    let best = net
        .connected_sets(
            0.5 + MASS_SLACK,
            || (f64::INFINITY, 0u64),
            |best, set, mass| *best = better((net.flow(set) / mass, set), *best),
        )
        .into_iter()
        .fold((f64::INFINITY, 0u64), better);
    Ok(CheegerResult {
        value: best.0,
        argmin: net.to_set(best.1, n),
    })
}

/// Cheeger constant over all subsets, connected or not. Validation only.
pub fn cheeger_all_subsets(g: &WeightedGraph) -> Result<CheegerResult> {
    g.require_walkable()?;
    let n = g.vertex_count();
    if n > ALL_SUBSETS_LIMIT {
        return Err(Error::SizeLimit {
            what: "all-subsets Cheeger search",
            size: n,
            limit: ALL_SUBSETS_LIMIT,
        });
    }
    let vertices: Vec<usize> = (0..n).collect();
    let net = LocalNet::new(g, &vertices);
    let mut best = (f64::INFINITY, 0u64);
    for set in 1u64..(1u64 << n) - 1 {
        let m = net.mass_of(set);
        if m <= 0.5 + MASS_SLACK {
            best = better((net.flow(set) / m, set), best);
        }
    }
    Ok(CheegerResult {
        value: best.0,
        argmin: net.to_set(best.1, n),
    })
}

/// `Q(A)` for an arbitrary vertex set.
pub fn edge_flow(g: &WeightedGraph, set: &VertexSet) -> f64 {
    let mask = set.mask(g.vertex_count());
    let cv = g.total_conductance();
    let f = neumaier_sum(
        set.iter()
            .flat_map(|x| g.neighbors(x).iter().filter(|&&(y, _)| !mask[y]).map(|&(_, c)| c)),
    );
    f / (2.0 * cv)
}

/// Upper bound on `Φ`: the best ratio over prefixes of the vertices sorted
/// by the second eigenvector (and their complements).
pub fn sweep_cut_bound(g: &WeightedGraph) -> Result<f64> {
    g.require_walkable()?;
    let n = g.vertex_count();
    if n < 2 {
        return Err(invalid("sweep cut needs at least two vertices"));
    }
    let pi = g.stationary()?;
    let fiedler: Vec<f64> = if n <= DENSE_EIGEN_LIMIT {
        let rows: Vec<usize> = (0..n).collect();
        let (_, vecs) = symmetric_eigen(symmetric_laplacian_block(g, &rows));
        (0..n).map(|x| vecs[(x, 1)] / pi[x].sqrt()).collect()
    } else {
        let (_, v) = second_eigenpair_of_kernel(g)?;
        (0..n).map(|x| v[x] / pi[x].sqrt()).collect()
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| fiedler[a].partial_cmp(&fiedler[b]).unwrap().then(a.cmp(&b)));
    let cv = g.total_conductance();
    let mut inside = vec![false; n];
    let mut flow = 0.0;
    let mut mass = 0.0;
    let mut best = f64::INFINITY;
    for &x in &order[..n - 1] {
        // moving x inside: edges to outside add, edges to inside subtract
        for &(y, c) in g.neighbors(x) {
            if y == x {
                continue;
            }
            if inside[y] {
                flow -= c;
            } else {
                flow += c;
            }
        }
        inside[x] = true;
        mass += pi[x];
        let q = flow.max(0.0) / (2.0 * cv);
        let small = mass.min(1.0 - mass);
        if small > 0.0 {
            best = best.min(q / small);
        }
    }
    Ok(best)
}

fn check_proper_subset(g: &WeightedGraph, set: &VertexSet) -> Result<()> {
    let n = g.vertex_count();
    if set.is_empty() {
        return Err(invalid("restriction set is empty"));
    }
    if let Some(x) = set.iter().find(|&x| x >= n) {
        return Err(Error::VertexOutOfRange { vertex: x, n });
    }
    if set.len() == n {
        return Err(invalid("restriction to the whole state space is not substochastic"));
    }
    Ok(())
}

/// `λ(A)`: the smallest eigenvalue of `(I - P)` restricted to `A ⊊ V`.
pub fn restricted_gap(g: &WeightedGraph, set: &VertexSet) -> Result<f64> {
    g.require_walkable()?;
    check_proper_subset(g, set)?;
    if set.len() <= DENSE_EIGEN_LIMIT {
        let ev = symmetric_eigenvalues(symmetric_laplacian_block(g, set.as_slice()));
        return Ok(ev[0]);
    }
    let block_rows = set.as_slice();
    let n = g.vertex_count();
    let mut index = vec![usize::MAX; n];
    for (k, &x) in block_rows.iter().enumerate() {
        index[x] = k;
    }
    let apply = |x: &[f64], y: &mut [f64]| {
        // y = (I - M) x where M is the symmetric Laplacian block
        for (i, &v) in block_rows.iter().enumerate() {
            let cv = g.vertex_conductance(v);
            let mut s = (0.5 + g.loop_conductance(v) / (2.0 * cv)) * x[i];
            for &(w, c) in g.neighbors(v) {
                if w != v && index[w] != usize::MAX {
                    s += c / (2.0 * (cv * g.vertex_conductance(w)).sqrt()) * x[index[w]];
                }
            }
            y[i] = s;
        }
    };
    let zero = vec![0.0; block_rows.len()];
    let (top, _) = lanczos_largest_pair(block_rows.len(), apply, &zero, 1e-10, 1_000_000)?;
    Ok(1.0 - top)
}

/// `Φ(A) = min_{∅ ≠ B ⊆ A} Q(B)/π(B)`, exhaustive over connected `B`.
pub fn restricted_cheeger(g: &WeightedGraph, set: &VertexSet) -> Result<f64> {
    g.require_walkable()?;
    check_proper_subset(g, set)?;
    if set.len() > RESTRICTED_CHEEGER_LIMIT {
        return Err(Error::SizeLimit {
            what: "exhaustive restricted Cheeger search",
            size: set.len(),
            limit: RESTRICTED_CHEEGER_LIMIT,
        });
    }
    let net = LocalNet::new(g, set.as_slice());
    let best = net
        .connected_sets(
            f64::INFINITY,
            || f64::INFINITY,
            |best, s, m| *best = best.min(net.flow(s) / m),
        )
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileMethod {
    BruteForceExact,
    ConnectedSetExact,
}

/// The step function `v ↦ Λ(v) = inf_{π(A) ≤ v} λ(A)` on `(0, 1/2]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralProfileCurve {
    /// `(v_k, Λ(v_k))` with `v_k` increasing and `Λ` strictly decreasing;
    /// `Λ` is constant on `[v_k, v_{k+1})`.
    pub breakpoints: Vec<(f64, f64)>,
    pub method: ProfileMethod,
}

impl SpectralProfileCurve {
    pub fn value_at(&self, v: f64) -> Result<f64> {
        let first = self.breakpoints.first().ok_or(Error::EmptyFeasibleSet(v))?;
        if v < first.0 * (1.0 - 1e-12) {
            return Err(Error::EmptyFeasibleSet(v));
        }
        Ok(self
            .breakpoints
            .iter()
            .take_while(|(vk, _)| *vk <= v * (1.0 + 1e-12))
            .last()
            .map(|&(_, l)| l)
            .unwrap_or(first.1))
    }

    /// `∫_{v_0}^{1/2} 4 dv / (v Λ(v))`, exact for the step function.
    pub fn profile_integral(&self) -> f64 {
        let mut total = 0.0;
        for (k, &(v, lambda)) in self.breakpoints.iter().enumerate() {
            if v >= 0.5 {
                break;
            }
            let end = self.breakpoints.get(k + 1).map(|b| b.0).unwrap_or(0.5).min(0.5);
            total += 4.0 / lambda * (end / v).ln();
        }
        total
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("v,Lambda\n");
        for (v, l) in &self.breakpoints {
            s.push_str(&format!("{v},{l}\n"));
        }
        s
    }
}

fn profile_from_pairs(mut pairs: Vec<(f64, f64)>, method: ProfileMethod) -> SpectralProfileCurve {
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
    let mut breakpoints: Vec<(f64, f64)> = Vec::new();
    for (v, l) in pairs {
        match breakpoints.last_mut() {
            Some(last) if (v - last.0).abs() <= 1e-14 => {
                if l < last.1 {
                    last.1 = l;
                }
            }
            Some(last) if l >= last.1 => {}
            _ => breakpoints.push((v, l)),
        }
    }
    SpectralProfileCurve { breakpoints, method }
}

/// Exact spectral profile on `(0, 1/2]` from all connected sets.
pub fn spectral_profile(g: &WeightedGraph) -> Result<SpectralProfileCurve> {
    g.require_walkable()?;
    let n = g.vertex_count();
    if n > PROFILE_LIMIT {
        return Err(Error::SizeLimit {
            what: "exact spectral profile",
            size: n,
            limit: PROFILE_LIMIT,
        });
    }
    let vertices: Vec<usize> = (0..n).collect();
    let net = LocalNet::new(g, &vertices);
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let pairs: Vec<(f64, f64)> = net
        .connected_sets(0.5 + MASS_SLACK, Vec::new, |acc: &mut Vec<(f64, f64)>, set, mass| {
            if set == full {
                return;
            }
            let rows: Vec<usize> = (0..n).filter(|&i| set >> i & 1 == 1).collect();
            let l = symmetric_eigenvalues(symmetric_laplacian_block(g, &rows))[0];
            acc.push((mass, l));
        })
        .into_iter()
        .flatten()
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyFeasibleSet(0.5));
    }
    Ok(profile_from_pairs(pairs, ProfileMethod::ConnectedSetExact))
}

/// Spectral profile over every subset; validation only (`n ≤ 14`).
pub fn spectral_profile_all_subsets(g: &WeightedGraph) -> Result<SpectralProfileCurve> {
    g.require_walkable()?;
    let n = g.vertex_count();
    if n > ALL_SUBSETS_LIMIT {
        return Err(Error::SizeLimit {
            what: "all-subsets spectral profile",
            size: n,
            limit: ALL_SUBSETS_LIMIT,
        });
    }
    let vertices: Vec<usize> = (0..n).collect();
    let net = LocalNet::new(g, &vertices);
    let mut pairs = Vec::new();
    for set in 1u64..(1u64 << n) - 1 {
        let m = net.mass_of(set);
        if m <= 0.5 + MASS_SLACK {
            let rows: Vec<usize> = (0..n).filter(|&i| set >> i & 1 == 1).collect();
            pairs.push((m, symmetric_eigenvalues(symmetric_laplacian_block(g, &rows))[0]));
        }
    }
    Ok(profile_from_pairs(pairs, ProfileMethod::BruteForceExact))
}

/// `ρ = 8 log 2 / λ + ∫_{min π}^{1/2} 4 dv / (v Λ(v))`.
pub fn rho_bound(g: &WeightedGraph) -> Result<f64> {
    let gap = spectral_gap(g)?;
    let curve = spectral_profile(g)?;
    Ok(rho_from_parts(gap, &curve))
}

pub fn rho_from_parts(gap: f64, curve: &SpectralProfileCurve) -> f64 {
    8.0 * std::f64::consts::LN_2 / gap + curve.profile_integral()
}

/// For a vertex-transitive graph: `max_x ‖Pr_x^{2t} − π‖_{∞,π}` and
/// `Σ_{i≥2} (1 − λ_i)^{2t}`, which agree.
pub fn transitive_l2_identity_check(g: &WeightedGraph, t: u64) -> Result<(f64, f64)> {
    let spec = spectrum(g)?;
    let rhs = neumaier_sum(spec.eigenvalues[1..].iter().map(|l| (1.0 - l).powi((2 * t) as i32)));
    let p = TransitionKernel::lazy(g)?;
    let pi = g.stationary()?;
    let n = g.vertex_count();
    let lhs = (0..n)
        .map(|x| {
            let mu = crate::graph::Distribution::point_mass(x, n).expect("valid vertex");
            let d = p.evolve(&mu, 2 * t);
            crate::mixing::lp_distance(d.as_slice(), pi.as_slice(), pi.as_slice(), f64::INFINITY)
                .expect("stationary law has full support")
        })
        .fold(0.0, f64::max);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cycle(n: usize) -> WeightedGraph {
        WeightedGraph::unweighted(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    fn complete(n: usize) -> WeightedGraph {
        WeightedGraph::unweighted(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))).unwrap()
    }

    #[test]
    fn gaps_of_small_graphs() {
        assert_abs_diff_eq!(spectral_gap(&complete(3)).unwrap(), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(spectral_gap(&cycle(4)).unwrap(), 0.5, epsilon = 1e-12);
        let split = WeightedGraph::unweighted(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(spectral_gap(&split), Err(Error::Disconnected)));
    }

    #[test]
    fn cheeger_examples() {
        let k3 = cheeger(&complete(3)).unwrap();
        assert_abs_diff_eq!(k3.value, 0.5, epsilon = 1e-15);
        assert_eq!(k3.argmin.len(), 1);
        assert_abs_diff_eq!(cheeger(&cycle(4)).unwrap().value, 0.25, epsilon = 1e-15);
        // two triangles joined by the edge 2-3
        let bar = WeightedGraph::unweighted(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]).unwrap();
        let c = cheeger(&bar).unwrap();
        let side = c.argmin.as_slice().to_vec();
        assert!(side == vec![0, 1, 2] || side == vec![3, 4, 5], "{side:?}");
        // Q = 1/(2·14), π = 1/2
        assert_abs_diff_eq!(c.value, 1.0 / 14.0, epsilon = 1e-15);
    }

    #[test]
    fn cheeger_size_limit() {
        let big = cycle(CHEEGER_LIMIT + 1);
        assert!(matches!(cheeger(&big), Err(Error::SizeLimit { .. })));
    }

    #[test]
    fn sweep_examples() {
        assert_abs_diff_eq!(sweep_cut_bound(&cycle(4)).unwrap(), 0.25, epsilon = 1e-12);
        let k4 = complete(4);
        assert_abs_diff_eq!(sweep_cut_bound(&k4).unwrap(), cheeger(&k4).unwrap().value, epsilon = 1e-12);
    }

    #[test]
    fn restricted_gap_examples() {
        let path = WeightedGraph::unweighted(3, [(0, 1), (1, 2)]).unwrap();
        let a = VertexSet::new(vec![0], 3).unwrap();
        assert_abs_diff_eq!(restricted_gap(&path, &a).unwrap(), 0.5, epsilon = 1e-14);
        let c4 = cycle(4);
        let pair = VertexSet::new(vec![0, 1], 4).unwrap();
        assert_abs_diff_eq!(restricted_gap(&c4, &pair).unwrap(), 0.25, epsilon = 1e-14);
        assert!(restricted_gap(&c4, &VertexSet::all(4)).is_err());
        assert!(restricted_gap(&c4, &VertexSet::default()).is_err());
    }

    #[test]
    fn restricted_cheeger_examples() {
        let c4 = cycle(4);
        let pair = VertexSet::new(vec![0, 1], 4).unwrap();
        assert_abs_diff_eq!(restricted_cheeger(&c4, &pair).unwrap(), 0.25, epsilon = 1e-15);
        let single = VertexSet::new(vec![2], 4).unwrap();
        let direct = edge_flow(&c4, &single) / 0.25;
        assert_abs_diff_eq!(restricted_cheeger(&c4, &single).unwrap(), direct, epsilon = 1e-15);
    }

    #[test]
    fn k3_profile_and_rho() {
        let k3 = complete(3);
        let curve = spectral_profile(&k3).unwrap();
        assert_eq!(curve.breakpoints.len(), 1);
        assert_abs_diff_eq!(curve.breakpoints[0].0, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(curve.breakpoints[0].1, 0.5, epsilon = 1e-14);
        assert!(matches!(curve.value_at(0.2), Err(Error::EmptyFeasibleSet(_))));
        let rho = rho_bound(&k3).unwrap();
        let expected = 8.0 * 2f64.ln() / 0.75 + 4.0 / 0.5 * (0.5f64 / (1.0 / 3.0)).ln();
        assert_abs_diff_eq!(rho, expected, epsilon = 1e-12);
    }

    #[test]
    fn constant_profile_closed_form() {
        let curve = SpectralProfileCurve {
            breakpoints: vec![(0.01, 0.2)],
            method: ProfileMethod::ConnectedSetExact,
        };
        let rho = rho_from_parts(0.1, &curve);
        let expected = 8.0 * 2f64.ln() / 0.1 + 4.0 / 0.2 * (1.0f64 / (2.0 * 0.01)).ln();
        assert_abs_diff_eq!(rho, expected, epsilon = 1e-12);
        assert!(rho >= 8.0 * 2f64.ln() / 0.1);
    }

    #[test]
    fn connected_enumeration_matches_all_subsets() {
        let bar = WeightedGraph::from_edges(
            7,
            [(0, 1, 1.0), (1, 2, 2.0), (2, 3, 0.5), (3, 4, 1.0), (4, 5, 3.0), (5, 6, 1.0), (6, 0, 1.0), (1, 4, 0.25)],
        )
        .unwrap();
        assert_abs_diff_eq!(
            cheeger(&bar).unwrap().value,
            cheeger_all_subsets(&bar).unwrap().value,
            epsilon = 1e-14
        );
        let a = spectral_profile(&bar).unwrap();
        let b = spectral_profile_all_subsets(&bar).unwrap();
        assert_eq!(a.breakpoints.len(), b.breakpoints.len());
        for (x, y) in a.breakpoints.iter().zip(&b.breakpoints) {
            assert_abs_diff_eq!(x.0, y.0, epsilon = 1e-14);
            assert_abs_diff_eq!(x.1, y.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn transitive_identity_at_zero_and_on_c4() {
        let c4 = cycle(4);
        let (lhs, rhs) = transitive_l2_identity_check(&c4, 0).unwrap();
        assert_abs_diff_eq!(lhs, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rhs, 3.0, epsilon = 1e-12);
        // lazy C_4 has P-eigenvalues 1, 1/2, 1/2, 0
        let (lhs, rhs) = transitive_l2_identity_check(&c4, 1).unwrap();
        assert_abs_diff_eq!(rhs, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
    }
}
