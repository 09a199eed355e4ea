//! Effective conductance, harmonic measure and stretched binary trees.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{Distribution, VertexSet, WeightedGraph};
use crate::linalg::grounded_laplacian;
use crate::mixing::hit_probability;
use crate::numeric::neumaier_sum;

/// Largest explicit tree built by [`truncated_tree_left_prob`]; deeper trees
/// go through the self-similar reduced network.
pub const EXPLICIT_TREE_VERTEX_LIMIT: usize = 20_000;

/// Effective conductance between `s` and the grounded set `sinks`.
pub fn effective_conductance(g: &WeightedGraph, s: usize, sinks: &VertexSet) -> Result<f64> {
    g.require_walkable()?;
    g.check_vertex(s)?;
    if sinks.is_empty() {
        return Err(invalid("no sinks"));
    }
    if sinks.contains(s) {
        return Err(invalid("source is one of the sinks"));
    }
    let n = g.vertex_count();
    let grounded = sinks.mask(n);
    let interior: Vec<bool> = (0..n).map(|x| x != s && !grounded[x]).collect();
    let (lap, index) = grounded_laplacian(g, &interior);
    let mut rhs = vec![0.0; lap.order()];
    for &(y, c) in g.neighbors(s) {
        if interior[y] {
            rhs[index[y]] += c;
        }
    }
    let v = lap.solve_spd(&rhs)?;
    let voltage = |u: usize| {
        if u == s {
            1.0
        } else if grounded[u] {
            0.0
        } else {
            v[index[u]]
        }
    };
    let ceff = neumaier_sum(
        g.neighbors(s)
            .iter()
            .filter(|&&(u, _)| u != s)
            .map(|&(u, c)| c * (1.0 - voltage(u))),
    );
    if !(ceff > 0.0) || !ceff.is_finite() {
        return Err(Error::Singular);
    }
    Ok(ceff)
}

pub fn effective_resistance(g: &WeightedGraph, s: usize, sinks: &VertexSet) -> Result<f64> {
    effective_conductance(g, s, sinks).map(|c| 1.0 / c)
}

/// Law of `X_{T_boundary}` for the walk started at `start`.
///
/// Uses the Green function of the walk killed on the boundary:
/// `mass(b) = Σ_x u(x) c_{xb}` with `L_II u = e_start`.
pub fn harmonic_measure(g: &WeightedGraph, start: usize, boundary: &VertexSet) -> Result<Distribution> {
    g.require_walkable()?;
    g.check_vertex(start)?;
    let n = g.vertex_count();
    if boundary.is_empty() {
        return Err(invalid("boundary is unreachable: it is empty"));
    }
    if boundary.contains(start) {
        return Distribution::point_mass(start, n);
    }
    let on_boundary = boundary.mask(n);
    let interior: Vec<bool> = on_boundary.iter().map(|&b| !b).collect();
    let (lap, index) = grounded_laplacian(g, &interior);
    let mut rhs = vec![0.0; lap.order()];
    rhs[index[start]] = 1.0;
    let u = lap.solve_spd(&rhs)?;
    let mut mass = vec![0.0; n];
    for b in boundary.iter() {
        mass[b] = neumaier_sum(
            g.neighbors(b)
                .iter()
                .filter(|&&(x, _)| interior[x])
                .map(|&(x, c)| u[index[x]] * c),
        );
    }
    let total = neumaier_sum(mass.iter().copied());
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::NoConvergence {
            method: "harmonic measure (mass not conserved)",
            iterations: 0,
        });
    }
    for m in &mut mass {
        *m /= total;
    }
    Distribution::new(mass)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeFixedPoint {
    pub w: f64,
    pub w_left: f64,
    pub w_right: f64,
}

impl TreeFixedPoint {
    /// Probability that the walk from the root settles in the left subtree.
    pub fn left_fraction(&self) -> f64 {
        self.w_left / self.w
    }
}

/// Solves `w = w_L + w_R`, `1/w_L = q + 1/w`, `1/w_R = 2q + 1/w` for the
/// infinite tree with left edges stretched by `q` and right edges by `2q`.
pub fn tree_fixed_point(q: f64) -> Result<TreeFixedPoint> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(invalid(format!("stretch must be positive, got {q}")));
    }
    let s2 = std::f64::consts::SQRT_2;
    let w = 1.0 / (s2 * q);
    let w_left = 1.0 / ((1.0 + s2) * q);
    Ok(TreeFixedPoint {
        w,
        w_left,
        w_right: w - w_left,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    /// The deepest level is grounded.
    Absorbing,
    /// Nothing is grounded; the walk reflects at the deepest level.
    Reflecting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StretchedTreeSpec {
    pub depth: usize,
    pub left_stretch: usize,
    pub right_stretch: usize,
    pub truncation: Truncation,
}

impl StretchedTreeSpec {
    /// Left edges stretched by `q`, right edges by `2q`, grounded at the bottom.
    pub fn primed(depth: usize, q: usize) -> Self {
        Self {
            depth,
            left_stretch: q,
            right_stretch: 2 * q,
            truncation: Truncation::Absorbing,
        }
    }

    pub fn uniform(depth: usize, q: usize) -> Self {
        Self {
            depth,
            left_stretch: q,
            right_stretch: q,
            truncation: Truncation::Absorbing,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.left_stretch == 0 || self.right_stretch == 0 {
            return Err(invalid("tree depth and stretches must be at least 1"));
        }
        Ok(())
    }

    /// Vertex count of the explicit stretched tree.
    pub fn vertex_count(&self) -> Option<usize> {
        let branch = 1usize.checked_shl(self.depth as u32 + 1)?.checked_sub(1)?;
        let per_pair = self.left_stretch.checked_add(self.right_stretch)? - 2;
        let pairs = (1usize << self.depth).checked_sub(1)?;
        branch.checked_add(pairs.checked_mul(per_pair)?)
    }
}

/// An explicit stretched binary tree. Branch vertices keep heap order
/// (root 0, children of `v` at `2v+1` left and `2v+2` right); path
/// vertices created by stretching follow.
#[derive(Debug, Clone)]
pub struct StretchedTree {
    pub graph: WeightedGraph,
    pub spec: StretchedTreeSpec,
    /// Branch vertices of each level, left to right.
    pub levels: Vec<Vec<usize>>,
}

impl StretchedTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn bottom(&self) -> &[usize] {
        &self.levels[self.levels.len() - 1]
    }

    /// Bottom-level vertices below the left (`true`) or right child of the root.
    pub fn bottom_half(&self, left: bool) -> &[usize] {
        let b = self.bottom();
        let h = b.len() / 2;
        if left {
            &b[..h]
        } else {
            &b[h..]
        }
    }

    /// Number of left steps minus right steps from the root to a branch vertex.
    pub fn g_value(v: usize) -> i64 {
        let mut g = 0i64;
        let mut x = v;
        while x > 0 {
            g += if x % 2 == 1 { 1 } else { -1 };
            x = (x - 1) / 2;
        }
        g
    }
}

pub fn stretched_binary_tree(spec: StretchedTreeSpec) -> Result<StretchedTree> {
    spec.validate()?;
    let size = spec.vertex_count().unwrap_or(usize::MAX);
    if size > EXPLICIT_TREE_VERTEX_LIMIT {
        return Err(Error::SizeLimit {
            what: "explicit stretched tree",
            size,
            limit: EXPLICIT_TREE_VERTEX_LIMIT,
        });
    }
    let branch = (1usize << (spec.depth + 1)) - 1;
    let internal = (1usize << spec.depth) - 1;
    let mut edges = Vec::with_capacity(2 * internal);
    let mut factors = Vec::new();
    for v in 0..internal {
        for (child, k) in [(2 * v + 1, spec.left_stretch), (2 * v + 2, spec.right_stretch)] {
            edges.push((v, child));
            if k > 1 {
                factors.push((v, child, k));
            }
        }
    }
    let base = WeightedGraph::unweighted(branch, edges)?;
    let graph = if factors.is_empty() {
        base
    } else {
        base.stretch_edges(&factors)?
    };
    let levels = (0..=spec.depth)
        .map(|k| ((1usize << k) - 1..(1usize << (k + 1)) - 1).collect())
        .collect();
    Ok(StretchedTree { graph, spec, levels })
}

/// Conductances `(w_L, w_R)` from a branch vertex with `remaining` levels
/// below it into its left and right subtrees, bottom grounded.
pub fn subtree_conductances(left: f64, right: f64, remaining: usize) -> (f64, f64) {
    // 1/w_{L,d} = left + 1/w_{d-1}, with 1/w_0 = 0 at a grounded vertex
    let mut inv_w = 0.0;
    let mut pair = (0.0, 0.0);
    for _ in 0..remaining {
        let wl = 1.0 / (left + inv_w);
        let wr = 1.0 / (right + inv_w);
        pair = (wl, wr);
        inv_w = 1.0 / (wl + wr);
    }
    pair
}

/// How [`truncated_tree_left_prob`] computed its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeSolveMethod {
    ExplicitTree,
    ReducedNetwork,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeLeftProb {
    pub value: f64,
    pub method: TreeSolveMethod,
}

/// Probability that the walk from the root of the stretched tree is absorbed
/// in the left subtree, i.e. reaches the grounded bottom level below the left
/// child. Depth 1 reduces to the two arms alone.
///
/// Small trees are built explicitly and solved with [`hit_probability`].
/// Beyond [`EXPLICIT_TREE_VERTEX_LIMIT`] vertices the tree is replaced by the
/// equivalent network: the two stretched arms out of the root, each ending at
/// a child joined to its own ground by the conductance of the depth − 1
/// subtree below it. The same linear solve is then run on that network.
///
/// With [`Truncation::Reflecting`] nothing is absorbed, and the value is the
/// probability of reaching the left child before the right one.
pub fn truncated_tree_left_prob(spec: StretchedTreeSpec) -> Result<TreeLeftProb> {
    spec.validate()?;
    if spec.truncation == Truncation::Reflecting {
        let (l, r) = (spec.left_stretch as f64, spec.right_stretch as f64);
        return Ok(TreeLeftProb {
            value: (1.0 / l) / (1.0 / l + 1.0 / r),
            method: TreeSolveMethod::ReducedNetwork,
        });
    }
    let explicit = spec
        .vertex_count()
        .is_some_and(|s| s <= EXPLICIT_TREE_VERTEX_LIMIT);
    if explicit {
        explicit_left_prob(spec).map(|value| TreeLeftProb {
            value,
            method: TreeSolveMethod::ExplicitTree,
        })
    } else {
        reduced_left_prob(spec).map(|value| TreeLeftProb {
            value,
            method: TreeSolveMethod::ReducedNetwork,
        })
    }
}

pub(crate) fn explicit_left_prob(spec: StretchedTreeSpec) -> Result<f64> {
    let tree = stretched_binary_tree(spec)?;
    let n = tree.graph.vertex_count();
    let a = VertexSet::new(tree.bottom_half(true).to_vec(), n)?;
    let b = VertexSet::new(tree.bottom_half(false).to_vec(), n)?;
    Ok(hit_probability(&tree.graph, &a, &b)?.values[tree.root()])
}

pub(crate) fn reduced_left_prob(spec: StretchedTreeSpec) -> Result<f64> {
    let (l, r) = (spec.left_stretch, spec.right_stretch);
    // ground conductance below each child: the whole subtree of depth - 1
    let below = if spec.depth > 1 {
        let (wl, wr) = subtree_conductances(l as f64, r as f64, spec.depth - 1);
        Some(wl + wr)
    } else {
        None
    };
    // vertices: 0 root, 1 left child, 2 right child, 3 left ground, 4 right
    // ground, then arm interiors
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut next = 5;
    for (child, k) in [(1usize, l), (2usize, r)] {
        let mut prev = 0;
        for _ in 1..k {
            edges.push((prev, next, 1.0));
            prev = next;
            next += 1;
        }
        edges.push((prev, child, 1.0));
    }
    let (ga, gb) = match below {
        Some(w) => {
            edges.push((1, 3, w));
            edges.push((2, 4, w));
            (3, 4)
        }
        None => (1, 2),
    };
    let mut g = WeightedGraph::from_edges(next, edges)?;
    if below.is_none() {
        // children are the grounded vertices; drop the unused ground slots
        g = g.induced(&VertexSet::new((0..next).filter(|&x| x != 3 && x != 4).collect(), next)?)?;
        let remap = |x: usize| if x > 4 { x - 2 } else { x };
        let a = VertexSet::new(vec![remap(ga)], g.vertex_count())?;
        let b = VertexSet::new(vec![remap(gb)], g.vertex_count())?;
        return Ok(hit_probability(&g, &a, &b)?.values[0]);
    }
    let n = g.vertex_count();
    let a = VertexSet::new(vec![ga], n)?;
    let b = VertexSet::new(vec![gb], n)?;
    Ok(hit_probability(&g, &a, &b)?.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn series_and_parallel() {
        let path = WeightedGraph::unweighted(6, (0..5).map(|i| (i, i + 1))).unwrap();
        let c = effective_conductance(&path, 0, &VertexSet::new(vec![5], 6).unwrap()).unwrap();
        assert_abs_diff_eq!(c, 1.0 / 5.0, epsilon = 1e-12);
        let par = WeightedGraph::from_edges(2, [(0, 1, 1.0), (0, 1, 1.0)]).unwrap();
        let c = effective_conductance(&par, 0, &VertexSet::new(vec![1], 2).unwrap()).unwrap();
        assert_abs_diff_eq!(c, 2.0, epsilon = 1e-12);
        let tri = WeightedGraph::unweighted(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let c = effective_conductance(&tri, 0, &VertexSet::new(vec![1], 3).unwrap()).unwrap();
        assert_abs_diff_eq!(c, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn fixed_point_values() {
        let fp = tree_fixed_point(1.0).unwrap();
        assert_abs_diff_eq!(fp.w, 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(fp.left_fraction(), 0.585_786_437_6, epsilon = 1e-10);
        let fp2 = tree_fixed_point(2.0).unwrap();
        assert_abs_diff_eq!(fp2.w, 1.0 / (2.0 * 2f64.sqrt()), epsilon = 1e-15);
        // the defining system holds
        assert_abs_diff_eq!(1.0 / fp2.w_left, 2.0 + 1.0 / fp2.w, epsilon = 1e-12);
        assert_abs_diff_eq!(1.0 / fp2.w_right, 4.0 + 1.0 / fp2.w, epsilon = 1e-12);
        assert!(tree_fixed_point(0.0).is_err());
    }

    #[test]
    fn depth_one_left_probability() {
        let p = truncated_tree_left_prob(StretchedTreeSpec::primed(1, 1)).unwrap();
        assert_abs_diff_eq!(p.value, 2.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn explicit_and_reduced_agree() {
        for (depth, q) in [(1, 1), (2, 1), (3, 2), (5, 1), (6, 3)] {
            let spec = StretchedTreeSpec::primed(depth, q);
            let a = explicit_left_prob(spec).unwrap();
            let b = reduced_left_prob(spec).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-11);
        }
    }

    #[test]
    fn harmonic_measure_point_mass_and_path() {
        let path = WeightedGraph::unweighted(5, (0..4).map(|i| (i, i + 1))).unwrap();
        let bd = VertexSet::new(vec![0, 4], 5).unwrap();
        let h = harmonic_measure(&path, 1, &bd).unwrap();
        assert_abs_diff_eq!(h[0], 0.75, epsilon = 1e-13);
        assert_abs_diff_eq!(h[4], 0.25, epsilon = 1e-13);
        let h = harmonic_measure(&path, 4, &bd).unwrap();
        assert_eq!(h.as_slice(), &[0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn g_values_of_heap_indices() {
        assert_eq!(StretchedTree::g_value(0), 0);
        assert_eq!(StretchedTree::g_value(1), 1);
        assert_eq!(StretchedTree::g_value(2), -1);
        assert_eq!(StretchedTree::g_value(3), 2);
        assert_eq!(StretchedTree::g_value(6), -2);
    }
}
