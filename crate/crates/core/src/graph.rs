//! Weighted networks and the graph algebra used to assemble every example.
//!
//! A [`WeightedGraph`] stores one record per unordered pair with a strictly
//! positive conductance. Loops are allowed and carry an explicit weight that
//! counts once towards the conductance of their vertex, so that contracting
//! an edge of weight `c` into a loop of weight `2c` preserves the total
//! conductance `c_V`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::Zero;
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

/// One stored conductance record, normalised so that `u <= v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub conductance: f64,
}

impl Edge {
    pub fn is_loop(&self) -> bool {
        self.u == self.v
    }

    pub fn other(&self, x: usize) -> usize {
        if self.u == x {
            self.v
        } else {
            self.u
        }
    }
}

/// Sorted, duplicate-free list of vertex indices of a particular graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct VertexSet(Vec<usize>);

impl VertexSet {
    /// Validates indices against a graph of `n` vertices. Duplicates are an error.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        for w in indices.windows(2) {
            if w[0] == w[1] {
                return Err(invalid(format!("vertex {} listed twice", w[0])));
            }
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::VertexOutOfRange { vertex: last, n });
            }
        }
        Ok(Self(indices))
    }

    /// Builds a set from indices that may repeat; repeats are dropped.
    pub fn from_iter_dedup(indices: impl IntoIterator<Item = usize>, n: usize) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self::new(v, n)
    }

    pub fn singleton(x: usize, n: usize) -> Result<Self> {
        Self::new(vec![x], n)
    }

    pub fn all(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &x in &self.0 {
            m[x] = true;
        }
        m
    }

    pub fn complement(&self, n: usize) -> VertexSet {
        let m = self.mask(n);
        VertexSet((0..n).filter(|&x| !m[x]).collect())
    }

    pub fn is_disjoint(&self, other: &VertexSet) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return false,
            }
        }
        true
    }

    pub fn union(&self, other: &VertexSet) -> VertexSet {
        let mut v: Vec<usize> = self.0.iter().chain(other.0.iter()).copied().collect();
        v.sort_unstable();
        v.dedup();
        VertexSet(v)
    }

    pub fn is_subset(&self, other: &VertexSet) -> bool {
        self.0.iter().all(|&x| other.contains(x))
    }
}

/// Mass per vertex. Probability distributions sum to one; the restricted
/// evolution produces sub-probability vectors which are flagged as such.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    mass: Vec<f64>,
    sub_probability: bool,
}

impl Distribution {
    /// Checks nonnegativity and unit total mass (1e-12).
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(invalid("distribution has a negative or non-finite entry"));
        }
        let total = crate::numeric::neumaier_sum(mass.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("distribution sums to {total}, not 1")));
        }
        Ok(Self {
            mass,
            sub_probability: false,
        })
    }

    /// Nonnegative mass with total at most one.
    pub fn sub_probability(mass: Vec<f64>) -> Result<Self> {
        if mass.iter().any(|&m| !(m >= 0.0) || !m.is_finite()) {
            return Err(invalid("distribution has a negative or non-finite entry"));
        }
        let total = crate::numeric::neumaier_sum(mass.iter().copied());
        if total > 1.0 + 1e-12 {
            return Err(invalid(format!("sub-probability mass {total} exceeds 1")));
        }
        Ok(Self {
            mass,
            sub_probability: true,
        })
    }

    pub(crate) fn from_raw(mass: Vec<f64>, sub_probability: bool) -> Self {
        Self {
            mass,
            sub_probability,
        }
    }

    pub fn point_mass(x: usize, n: usize) -> Result<Self> {
        if x >= n {
            return Err(Error::VertexOutOfRange { vertex: x, n });
        }
        let mut mass = vec![0.0; n];
        mass[x] = 1.0;
        Ok(Self::from_raw(mass, false))
    }

    pub fn uniform(n: usize) -> Self {
        Self::from_raw(vec![1.0 / n as f64; n], false)
    }

    /// Uniform law on a vertex set.
    pub fn uniform_on(set: &VertexSet, n: usize) -> Result<Self> {
        if set.is_empty() {
            return Err(invalid("uniform law on an empty set"));
        }
        let mut mass = vec![0.0; n];
        let w = 1.0 / set.len() as f64;
        for x in set.iter() {
            mass[x] = w;
        }
        Ok(Self::from_raw(mass, false))
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn is_sub_probability(&self) -> bool {
        self.sub_probability
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mass
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.mass
    }

    pub fn total_mass(&self) -> f64 {
        crate::numeric::neumaier_sum(self.mass.iter().copied())
    }

    pub fn mass_of(&self, set: &VertexSet) -> f64 {
        crate::numeric::neumaier_sum(set.iter().map(|x| self.mass[x]))
    }
}

impl std::ops::Index<usize> for Distribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.mass[i]
    }
}

/// Undirected network with symmetric conductances and optional labels.
///
/// Immutable after construction; every operation returns a new graph.
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    n: usize,
    labels: Vec<Option<String>>,
    edges: Vec<Edge>,
    offsets: Vec<usize>,
    adj: Vec<(usize, f64)>,
    vertex_conductance: Vec<f64>,
    connected: bool,
}

impl PartialEq for WeightedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges && self.labels == other.labels
    }
}

impl WeightedGraph {
    /// Builds a graph from `(u, v, c)` triples. Parallel records are merged by
    /// adding conductances; every conductance must be finite and positive.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, c) in edges {
            if u >= n {
                return Err(Error::VertexOutOfRange { vertex: u, n });
            }
            if v >= n {
                return Err(Error::VertexOutOfRange { vertex: v, n });
            }
            if !(c > 0.0) || !c.is_finite() {
                return Err(invalid(format!("conductance {c} on {u}-{v} is not positive")));
            }
            *merged.entry((u.min(v), u.max(v))).or_insert(0.0) += c;
        }
        let edges = merged
            .into_iter()
            .map(|((u, v), conductance)| Edge { u, v, conductance })
            .collect();
        Ok(Self::assemble(n, vec![None; n], edges))
    }

    /// Unit-conductance graph.
    pub fn unweighted(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::from_edges(n, edges.into_iter().map(|(u, v)| (u, v, 1.0)))
    }

    /// Replaces the label table. Length must match the vertex count.
    pub fn with_labels(mut self, labels: Vec<Option<String>>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(invalid(format!(
                "{} labels for {} vertices",
                labels.len(),
                self.n
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    fn assemble(n: usize, labels: Vec<Option<String>>, edges: Vec<Edge>) -> Self {
        let mut deg = vec![0usize; n];
        for e in &edges {
            deg[e.u] += 1;
            if !e.is_loop() {
                deg[e.v] += 1;
            }
        }
        let mut offsets = vec![0usize; n + 1];
        for x in 0..n {
            offsets[x + 1] = offsets[x] + deg[x];
        }
        let mut fill = offsets.clone();
        let mut adj = vec![(0usize, 0.0f64); offsets[n]];
        let mut vertex_conductance = vec![0.0; n];
        for e in &edges {
            adj[fill[e.u]] = (e.v, e.conductance);
            fill[e.u] += 1;
            vertex_conductance[e.u] += e.conductance;
            if !e.is_loop() {
                adj[fill[e.v]] = (e.u, e.conductance);
                fill[e.v] += 1;
                vertex_conductance[e.v] += e.conductance;
            }
        }
        for x in 0..n {
            adj[offsets[x]..offsets[x + 1]].sort_by_key(|&(y, _)| y);
        }
        let mut g = Self {
            n,
            labels,
            edges,
            offsets,
            adj,
            vertex_conductance,
            connected: false,
        };
        g.connected = g.traverse_connected();
        g
    }

    fn traverse_connected(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        self.component_of(0, |_| true).len() == self.n
    }

    /// Vertices reachable from `start` through vertices accepted by `allowed`.
    pub fn component_of(&self, start: usize, allowed: impl Fn(usize) -> bool) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::new();
        let mut out = Vec::new();
        if !allowed(start) {
            return out;
        }
        seen[start] = true;
        queue.push_back(start);
        while let Some(x) = queue.pop_front() {
            out.push(x);
            for &(y, _) in self.neighbors(x) {
                if !seen[y] && allowed(y) {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        out.sort_unstable();
        out
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Number of stored records (loops included).
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_connected(&self) -> bool {
        self.connected
    }

    /// Neighbours with conductances, sorted by index. A loop appears once.
    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adj[self.offsets[x]..self.offsets[x + 1]]
    }

    /// Number of distinct neighbours, loops excluded.
    pub fn degree(&self, x: usize) -> usize {
        self.neighbors(x).iter().filter(|&&(y, _)| y != x).count()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|x| self.degree(x)).max().unwrap_or(0)
    }

    /// `c_x`, the sum of conductances at `x` (a loop counts once).
    pub fn vertex_conductance(&self, x: usize) -> f64 {
        self.vertex_conductance[x]
    }

    pub fn vertex_conductances(&self) -> &[f64] {
        &self.vertex_conductance
    }

    /// `c_V`.
    pub fn total_conductance(&self) -> f64 {
        crate::numeric::neumaier_sum(self.vertex_conductance.iter().copied())
    }

    /// `c_V` in exact rational arithmetic, converting every stored double exactly.
    pub fn total_conductance_exact(&self) -> Result<BigRational> {
        if self.n > 2_000 {
            return Err(Error::SizeLimit {
                what: "exact conductance mode",
                size: self.n,
                limit: 2_000,
            });
        }
        let mut total = BigRational::zero();
        for e in &self.edges {
            let c = BigRational::from_float(e.conductance)
                .ok_or_else(|| invalid("non-finite conductance"))?;
            if e.is_loop() {
                total += c;
            } else {
                total += c.clone() + c;
            }
        }
        Ok(total)
    }

    pub fn conductance(&self, u: usize, v: usize) -> Option<f64> {
        let nb = self.neighbors(u);
        nb.binary_search_by_key(&v, |&(y, _)| y).ok().map(|i| nb[i].1)
    }

    pub fn loop_conductance(&self, x: usize) -> f64 {
        self.conductance(x, x).unwrap_or(0.0)
    }

    pub fn label(&self, x: usize) -> Option<&str> {
        self.labels[x].as_deref()
    }

    /// The label of `x`, or its index when unlabeled.
    pub fn display_name(&self, x: usize) -> String {
        match &self.labels[x] {
            Some(l) => l.clone(),
            None => x.to_string(),
        }
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.labels
    }

    /// Index of the vertex carrying `label`, if any.
    pub fn find_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.as_deref() == Some(label))
    }

    pub(crate) fn check_vertex(&self, x: usize) -> Result<()> {
        if x >= self.n {
            Err(Error::VertexOutOfRange { vertex: x, n: self.n })
        } else {
            Ok(())
        }
    }

    /// Errors unless the graph is connected and every vertex has positive conductance.
    pub fn require_walkable(&self) -> Result<()> {
        if let Some(x) = (0..self.n).find(|&x| self.vertex_conductance[x] <= 0.0) {
            return Err(Error::ZeroDegree(x));
        }
        if !self.connected {
            return Err(Error::Disconnected);
        }
        Ok(())
    }

    /// The stationary law `π(x) = c_x / c_V` of the lazy walk.
    pub fn stationary(&self) -> Result<Distribution> {
        self.require_walkable()?;
        let total = self.total_conductance();
        Ok(Distribution::from_raw(
            self.vertex_conductance.iter().map(|&c| c / total).collect(),
            false,
        ))
    }

    /// Replaces each listed edge `(u, v, k)` by a path of `k` unit-conductance
    /// edges running from `u` to `v`. New vertices are appended in list order
    /// and labelled `(u,v)#j`, `j = 1..k-1`, using the endpoints' display names.
    pub fn stretch_edges(&self, factors: &[(usize, usize, usize)]) -> Result<WeightedGraph> {
        let mut selected: BTreeMap<(usize, usize), (usize, usize, usize)> = BTreeMap::new();
        for &(u, v, k) in factors {
            self.check_vertex(u)?;
            self.check_vertex(v)?;
            if k == 0 {
                return Err(invalid(format!("stretch factor 0 on {u}-{v}")));
            }
            if u == v {
                return Err(invalid(format!("cannot stretch the loop at {u}")));
            }
            if self.conductance(u, v).is_none() {
                return Err(Error::NotAnEdge { u, v });
            }
            if selected.insert((u.min(v), u.max(v)), (u, v, k)).is_some() {
                return Err(invalid(format!("edge {u}-{v} listed twice")));
            }
        }
        let mut labels = self.labels.clone();
        let mut edges = Vec::with_capacity(self.edges.len());
        let mut next = self.n;
        let mut appended = Vec::new();
        for e in &self.edges {
            match selected.get(&(e.u, e.v)) {
                Some(&(_, _, 1)) | None => edges.push((e.u, e.v, e.conductance)),
                Some(_) => {}
            }
        }
        // new vertices follow the caller's order so that indices are reproducible
        for &(u, v, k) in factors {
            if k == 1 {
                continue;
            }
            let (un, vn) = (self.display_name(u), self.display_name(v));
            let mut prev = u;
            for j in 1..k {
                let w = next;
                next += 1;
                appended.push(Some(format!("({un},{vn})#{j}")));
                edges.push((prev, w, 1.0));
                prev = w;
            }
            edges.push((prev, v, 1.0));
        }
        labels.extend(appended);
        let g = WeightedGraph::from_edges(next, edges)?;
        g.with_labels(labels)
    }

    /// Every non-loop edge stretched by the same factor `k`.
    pub fn stretch_all(&self, k: usize) -> Result<WeightedGraph> {
        let f: Vec<_> = self
            .edges
            .iter()
            .filter(|e| !e.is_loop())
            .map(|e| (e.u, e.v, k))
            .collect();
        self.stretch_edges(&f)
    }

    /// Multiplies listed conductances by positive factors.
    pub fn perturb_weights(&self, factors: &[(usize, usize, f64)]) -> Result<WeightedGraph> {
        let mut scale: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(u, v, f) in factors {
            self.check_vertex(u)?;
            self.check_vertex(v)?;
            if !(f > 0.0) || !f.is_finite() {
                return Err(invalid(format!("perturbation factor {f} on {u}-{v} is not positive")));
            }
            if self.conductance(u, v).is_none() {
                return Err(Error::NotAnEdge { u, v });
            }
            *scale.entry((u.min(v), u.max(v))).or_insert(1.0) *= f;
        }
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let f = scale.get(&(e.u, e.v)).copied().unwrap_or(1.0);
                Edge {
                    conductance: e.conductance * f,
                    ..*e
                }
            })
            .collect();
        Ok(Self::assemble(self.n, self.labels.clone(), edges))
    }

    /// Cartesian product; vertex `(u, h)` has index `u * |V(H)| + h`.
    pub fn cartesian_product(&self, other: &WeightedGraph) -> Result<WeightedGraph> {
        if self.n == 0 || other.n == 0 {
            return Err(invalid("cartesian product with an empty factor"));
        }
        let m = other.n;
        let n = self.n * m;
        let mut edges = Vec::with_capacity(self.edges.len() * m + other.edges.len() * self.n);
        for u in 0..self.n {
            for e in &other.edges {
                edges.push((u * m + e.u, u * m + e.v, e.conductance));
            }
        }
        for e in &self.edges {
            for h in 0..m {
                edges.push((e.u * m + h, e.v * m + h, e.conductance));
            }
        }
        let labelled = self.labels.iter().any(Option::is_some) || other.labels.iter().any(Option::is_some);
        let g = WeightedGraph::from_edges(n, edges)?;
        if !labelled {
            return Ok(g);
        }
        let mut labels = Vec::with_capacity(n);
        for u in 0..self.n {
            let un = self.display_name(u);
            for h in 0..m {
                labels.push(Some(format!("({un},{})", other.display_name(h))));
            }
        }
        g.with_labels(labels)
    }

    /// Disjoint union; the vertices of `graphs[k]` follow those of `graphs[k-1]`.
    pub fn disjoint_union(graphs: &[&WeightedGraph]) -> Result<WeightedGraph> {
        let n: usize = graphs.iter().map(|g| g.n).sum();
        let mut edges = Vec::new();
        let mut labels = Vec::with_capacity(n);
        let mut base = 0;
        for g in graphs {
            edges.extend(g.edges.iter().map(|e| (e.u + base, e.v + base, e.conductance)));
            labels.extend(g.labels.iter().cloned());
            base += g.n;
        }
        WeightedGraph::from_edges(n, edges)?.with_labels(labels)
    }

    /// Merges each pair `(u, φ(u))` into one vertex whose incident edges are
    /// the union of both. The two sides must be disjoint and each side
    /// duplicate-free. An edge joining a pair becomes a loop of twice its weight.
    ///
    /// Returns the new graph and the old-to-new index map.
    pub fn identify_vertices(&self, pairs: &[(usize, usize)]) -> Result<(WeightedGraph, Vec<usize>)> {
        let mut role = vec![0u8; self.n];
        for &(a, b) in pairs {
            self.check_vertex(a)?;
            self.check_vertex(b)?;
            if a == b {
                return Err(invalid(format!("vertex {a} paired with itself")));
            }
            for x in [a, b] {
                if role[x] != 0 {
                    return Err(invalid(format!(
                        "vertex {x} appears in more than one pair or on both sides"
                    )));
                }
                role[x] = 1;
            }
        }
        let mut target: Vec<usize> = (0..self.n).collect();
        for &(a, b) in pairs {
            let keep = a.min(b);
            target[a] = keep;
            target[b] = keep;
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(a, b) in pairs {
            groups.insert(a.min(b), vec![a, b]);
        }
        self.quotient(&target, &groups)
    }

    /// Replaces `set` by one vertex. Edges inside the set become a loop of
    /// twice their weight, boundary edges reattach, and `c_V` is preserved.
    pub fn contract_set(&self, set: &VertexSet) -> Result<(WeightedGraph, Vec<usize>)> {
        if set.is_empty() {
            return Err(invalid("cannot contract an empty set"));
        }
        if let Some(x) = set.iter().find(|&x| x >= self.n) {
            return Err(Error::VertexOutOfRange { vertex: x, n: self.n });
        }
        let keep = set.as_slice()[0];
        let mut target: Vec<usize> = (0..self.n).collect();
        for x in set.iter() {
            target[x] = keep;
        }
        let mut groups = BTreeMap::new();
        groups.insert(keep, set.as_slice().to_vec());
        self.quotient(&target, &groups)
    }

    /// Collapses vertices according to `target` (each vertex maps to the
    /// representative of its class, the smallest member).
    fn quotient(
        &self,
        target: &[usize],
        groups: &BTreeMap<usize, Vec<usize>>,
    ) -> Result<(WeightedGraph, Vec<usize>)> {
        let mut new_index = vec![usize::MAX; self.n];
        let mut labels = Vec::new();
        let mut k = 0;
        for x in 0..self.n {
            if target[x] == x {
                new_index[x] = k;
                k += 1;
                let label = match groups.get(&x) {
                    Some(members) if members.len() > 1 => {
                        let names: Vec<String> = members.iter().map(|&m| self.display_name(m)).collect();
                        if members.iter().any(|&m| self.labels[m].is_some()) {
                            Some(names.join("|"))
                        } else {
                            None
                        }
                    }
                    _ => self.labels[x].clone(),
                };
                labels.push(label);
            }
        }
        let map: Vec<usize> = (0..self.n).map(|x| new_index[target[x]]).collect();
        let edges = self.edges.iter().map(|e| {
            let (a, b) = (map[e.u], map[e.v]);
            let c = if a == b && !e.is_loop() {
                2.0 * e.conductance
            } else {
                e.conductance
            };
            (a, b, c)
        });
        let g = WeightedGraph::from_edges(k, edges.collect::<Vec<_>>())?.with_labels(labels)?;
        Ok((g, map))
    }

    /// Adds unit-conductance edges between existing vertices; a pair already
    /// joined gets its conductance increased and `(x, x)` adds a loop of weight 1.
    pub fn overlay_edges(&self, extra: &[(usize, usize)]) -> Result<WeightedGraph> {
        for &(u, v) in extra {
            self.check_vertex(u)?;
            self.check_vertex(v)?;
        }
        let edges = self
            .edges
            .iter()
            .map(|e| (e.u, e.v, e.conductance))
            .chain(extra.iter().map(|&(u, v)| (u, v, 1.0)));
        WeightedGraph::from_edges(self.n, edges.collect::<Vec<_>>())?.with_labels(self.labels.clone())
    }

    /// The subgraph induced on `set`, reindexed in set order.
    pub fn induced(&self, set: &VertexSet) -> Result<WeightedGraph> {
        let mut index = vec![usize::MAX; self.n];
        for (k, x) in set.iter().enumerate() {
            index[x] = k;
        }
        let edges: Vec<_> = self
            .edges
            .iter()
            .filter(|e| index[e.u] != usize::MAX && index[e.v] != usize::MAX)
            .map(|e| (index[e.u], index[e.v], e.conductance))
            .collect();
        let labels = set.iter().map(|x| self.labels[x].clone()).collect();
        WeightedGraph::from_edges(set.len(), edges)?.with_labels(labels)
    }

    /// Text serialisation: `N M`, then one `u v c` line per record.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(16 * (self.edges.len() + 1));
        let _ = writeln!(s, "{} {}", self.n, self.edges.len());
        for e in &self.edges {
            let _ = writeln!(s, "{} {} {}", e.u, e.v, e.conductance);
        }
        s
    }

    /// Label sidecar: one `index<TAB>label` line per labelled vertex.
    pub fn labels_to_text(&self) -> String {
        let mut s = String::new();
        for (x, l) in self.labels.iter().enumerate() {
            if let Some(l) = l {
                let _ = writeln!(s, "{x}\t{l}");
            }
        }
        s
    }

    /// Parses the text format, and optionally a label sidecar.
    pub fn from_text(text: &str, labels: Option<&str>) -> Result<WeightedGraph> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (hl, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let hdr: Vec<&str> = header.split_whitespace().collect();
        if hdr.len() != 2 {
            return Err(Error::Parse {
                line: hl + 1,
                msg: "header must be `N M`".into(),
            });
        }
        let parse_usize = |s: &str, line: usize| {
            s.parse::<usize>().map_err(|e| Error::Parse {
                line,
                msg: format!("{s}: {e}"),
            })
        };
        let n = parse_usize(hdr[0], hl + 1)?;
        let m = parse_usize(hdr[1], hl + 1)?;
        let mut edges = Vec::with_capacity(m);
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse {
                    line: ln + 1,
                    msg: "expected `u v c`".into(),
                });
            }
            let c = f[2].parse::<f64>().map_err(|e| Error::Parse {
                line: ln + 1,
                msg: format!("{}: {e}", f[2]),
            })?;
            edges.push((parse_usize(f[0], ln + 1)?, parse_usize(f[1], ln + 1)?, c));
        }
        if edges.len() != m {
            return Err(Error::Parse {
                line: hl + 1,
                msg: format!("header announces {m} edges, found {}", edges.len()),
            });
        }
        let mut g = WeightedGraph::from_edges(n, edges)?;
        if let Some(text) = labels {
            let mut table = vec![None; n];
            for (ln, line) in text.lines().enumerate() {
                if line.is_empty() {
                    continue;
                }
                let (idx, label) = line.split_once('\t').ok_or(Error::Parse {
                    line: ln + 1,
                    msg: "expected `index<TAB>label`".into(),
                })?;
                let idx = parse_usize(idx, ln + 1)?;
                if idx >= n {
                    return Err(Error::VertexOutOfRange { vertex: idx, n });
                }
                table[idx] = Some(label.to_string());
            }
            g = g.with_labels(table)?;
        }
        Ok(g)
    }

    /// SHA-256 of the text serialisation and label sidecar.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_text().as_bytes());
        h.update(b"\0");
        h.update(self.labels_to_text().as_bytes());
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn triangle() -> WeightedGraph {
        WeightedGraph::unweighted(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn stationary_weighted_path() {
        let g = WeightedGraph::from_edges(3, [(0, 1, 5.0), (1, 2, 1.0)]).unwrap();
        let pi = g.stationary().unwrap();
        assert!((pi[0] - 5.0 / 12.0).abs() < 1e-15);
        assert!((pi[1] - 6.0 / 12.0).abs() < 1e-15);
        assert!((pi[2] - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_cycle_uniform() {
        let g = WeightedGraph::unweighted(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let pi = g.stationary().unwrap();
        for x in 0..4 {
            assert!((pi[x] - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn disconnected_is_rejected() {
        let g = WeightedGraph::unweighted(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!g.is_connected());
        assert!(matches!(g.stationary(), Err(Error::Disconnected)));
        let iso = WeightedGraph::unweighted(3, [(0, 1)]).unwrap();
        assert!(matches!(iso.stationary(), Err(Error::ZeroDegree(2))));
    }

    #[test]
    fn parallel_records_merge() {
        let g = WeightedGraph::from_edges(2, [(0, 1, 1.0), (1, 0, 2.5)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.conductance(1, 0), Some(3.5));
    }

    #[test]
    fn nonpositive_conductance_rejected() {
        assert!(WeightedGraph::from_edges(2, [(0, 1, 0.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 1, -1.0)]).is_err());
        assert!(WeightedGraph::from_edges(2, [(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn stretch_single_edge() {
        let g = WeightedGraph::unweighted(2, [(0, 1)]).unwrap();
        let s = g.stretch_edges(&[(0, 1, 3)]).unwrap();
        assert_eq!(s.vertex_count(), 4);
        assert_eq!(s.edge_count(), 3);
        assert_eq!(s.label(2), Some("(0,1)#1"));
        assert_eq!(s.label(3), Some("(0,1)#2"));
        assert!(s.conductance(0, 2).is_some());
        assert!(s.conductance(3, 1).is_some());
    }

    #[test]
    fn stretch_identity_and_triangle() {
        let t = triangle();
        let same = t.stretch_edges(&[(0, 1, 1), (1, 2, 1)]).unwrap();
        assert_eq!(same.edges(), t.edges());
        let s = t.stretch_edges(&[(0, 1, 2)]).unwrap();
        assert_eq!(s.vertex_count(), 4);
        assert!((0..4).all(|x| s.degree(x) == 2));
    }

    #[test]
    fn stretch_errors() {
        let t = triangle();
        assert!(t.stretch_edges(&[(0, 1, 0)]).is_err());
        let p = WeightedGraph::unweighted(3, [(0, 1), (1, 2)]).unwrap();
        assert!(matches!(p.stretch_edges(&[(0, 2, 2)]), Err(Error::NotAnEdge { .. })));
    }

    #[test]
    fn perturb_cycle_edge() {
        let c4 = WeightedGraph::unweighted(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(c4.perturb_weights(&[(0, 1, 1.0)]).unwrap().edges(), c4.edges());
        let p = c4.perturb_weights(&[(0, 1, 2.0)]).unwrap();
        let pi = p.stationary().unwrap();
        assert!((pi[0] - 0.3).abs() < 1e-15);
        assert!((pi[1] - 0.3).abs() < 1e-15);
        assert!(c4.perturb_weights(&[(0, 2, 2.0)]).is_err());
        assert!(c4.perturb_weights(&[(0, 1, 0.0)]).is_err());
    }

    #[test]
    fn products() {
        let k2 = WeightedGraph::unweighted(2, [(0, 1)]).unwrap();
        let sq = k2.cartesian_product(&k2).unwrap();
        assert_eq!(sq.vertex_count(), 4);
        assert_eq!(sq.edge_count(), 4);
        assert!((0..4).all(|x| sq.degree(x) == 2));
        let p3 = WeightedGraph::unweighted(3, [(0, 1), (1, 2)]).unwrap();
        let ladder = p3.cartesian_product(&k2).unwrap();
        assert_eq!((ladder.vertex_count(), ladder.edge_count()), (6, 7));
        let dot = WeightedGraph::unweighted(1, []).unwrap();
        assert_eq!(p3.cartesian_product(&dot).unwrap().edges(), p3.edges());
        let empty = WeightedGraph::unweighted(0, []).unwrap();
        assert!(p3.cartesian_product(&empty).is_err());
    }

    #[test]
    fn identify_examples() {
        let two = WeightedGraph::unweighted(4, [(0, 1), (2, 3)]).unwrap();
        let (p, map) = two.identify_vertices(&[(1, 2)]).unwrap();
        assert_eq!(p.vertex_count(), 3);
        assert_eq!(map, vec![0, 1, 1, 2]);
        assert_eq!(p.degree(1), 2);
        assert!(p.is_connected());

        let tri2 = WeightedGraph::unweighted(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        let (bowtie, _) = tri2.identify_vertices(&[(0, 3)]).unwrap();
        assert_eq!((bowtie.vertex_count(), bowtie.edge_count()), (5, 6));

        assert!(two.identify_vertices(&[(0, 2), (0, 3)]).is_err());
        assert!(two.identify_vertices(&[(0, 1), (1, 2)]).is_err());
        assert!(two.identify_vertices(&[(1, 1)]).is_err());
    }

    #[test]
    fn contract_triangle_edge() {
        let t = triangle();
        let (c, _) = t.contract_set(&VertexSet::new(vec![0, 1], 3).unwrap()).unwrap();
        assert_eq!(c.vertex_count(), 2);
        assert_eq!(c.conductance(0, 1), Some(2.0));
        assert_eq!(c.loop_conductance(0), 2.0);
        assert_eq!(c.total_conductance(), 6.0);
        let (same, _) = t.contract_set(&VertexSet::new(vec![2], 3).unwrap()).unwrap();
        assert_eq!(same.edges(), t.edges());
        assert!(t.contract_set(&VertexSet::default()).is_err());
    }

    #[test]
    fn overlay_examples() {
        let c4 = WeightedGraph::unweighted(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(c4.overlay_edges(&[]).unwrap().edges(), c4.edges());
        let k4 = c4.overlay_edges(&[(0, 2), (1, 3)]).unwrap();
        assert_eq!(k4.edge_count(), 6);
        let looped = c4.overlay_edges(&[(2, 2)]).unwrap();
        assert_eq!(looped.loop_conductance(2), 1.0);
        let doubled = c4.overlay_edges(&[(0, 1)]).unwrap();
        assert_eq!(doubled.conductance(0, 1), Some(2.0));
        assert!(c4.overlay_edges(&[(0, 9)]).is_err());
    }

    #[test]
    fn text_round_trip_with_labels() {
        let g = WeightedGraph::from_edges(3, [(0, 1, 0.1), (1, 2, 3.0), (2, 2, 2.0)])
            .unwrap()
            .with_labels(vec![Some("a".into()), None, Some("c d".into())])
            .unwrap();
        let back = WeightedGraph::from_text(&g.to_text(), Some(&g.labels_to_text())).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_text(), g.to_text());
        assert_eq!(back.content_hash(), g.content_hash());
    }

    #[test]
    fn vertex_set_validation() {
        assert!(VertexSet::new(vec![1, 1], 3).is_err());
        assert!(VertexSet::new(vec![3], 3).is_err());
        let s = VertexSet::new(vec![2, 0], 3).unwrap();
        assert_eq!(s.as_slice(), &[0, 2]);
        assert_eq!(s.complement(3).as_slice(), &[1]);
    }
}
