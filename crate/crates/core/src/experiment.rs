//! Orchestration: the sensitivity comparison on the family, the bound suite
//! over a seeded corpus, and the robustness probe on tori and hypercubes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::construction::{build_family, hypercube, torus, FamilyParams, LabeledFamily, DEFAULT_BUDGET};
use crate::error::{Error, Result};
use crate::graph::{Distribution, VertexSet, WeightedGraph};
use crate::kernel::TransitionKernel;
use crate::mixing::{
    l2_linfty_relation_check, mixing_time_for_walk, poincare_check, survival_curve, exit_tail, StartSet, Walk,
    DEFAULT_T_CAP,
};
use crate::report::{Record, Report};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartPolicy {
    /// Every vertex; only feasible on small graphs.
    All,
    /// `{o_i}`, two representatives of each `R_i`, and a seeded sample.
    Roots,
    /// `o_n` alone.
    TopRoot,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub ns: Vec<usize>,
    /// Parameter overrides, matched by `n`; other `n` use the desk defaults.
    pub params: Vec<FamilyParams>,
    pub start_policy: StartPolicy,
    pub seed: u64,
    pub budget: usize,
    pub eps: f64,
    pub sample_starts: usize,
    /// Number of points kept on each `Pr[T_Nice > t]` curve.
    pub tail_points: usize,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            ns: vec![2, 3, 4],
            params: Vec::new(),
            start_policy: StartPolicy::Roots,
            seed: 1,
            budget: DEFAULT_BUDGET,
            eps: 0.5,
            sample_starts: 32,
            tail_points: 40,
        }
    }
}

impl ExperimentSpec {
    pub fn params_for(&self, n: usize) -> FamilyParams {
        let mut p = self
            .params
            .iter()
            .find(|p| p.n == n)
            .cloned()
            .unwrap_or_else(|| FamilyParams::desk(n));
        p.seed = self.seed;
        p.budget = self.budget;
        p
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub n: usize,
    pub vertices: usize,
    pub vertices_primed: usize,
    pub graph_hash: String,
    pub graph_hash_primed: String,
    /// Worst `τ_∞(G_n)` over the roots alone: a certified lower bound.
    pub tau_inf_roots: u64,
    /// Worst `τ_∞(G_n)` over roots and sampled starts.
    pub tau_inf_sampled: u64,
    pub tau_inf_worst_start: String,
    pub tau_1_primed_from_top: u64,
    /// Worst `τ_1(G'_n)` over the same start policy.
    pub tau_1_primed_worst: u64,
    /// `τ_1(G'_n)` from `o_n` over the sampled `τ_∞(G_n)`.
    pub ratio: f64,
    pub small_size: usize,
    pub small_stationary_mass: f64,
    /// `15·|Small|/|V(G'_n)|`.
    pub small_bound: f64,
    pub small_bound_holds: bool,
    /// `(t, Pr'_{o_n}[T_Nice > t])`.
    pub nice_tail: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub rows: Vec<SensitivityRow>,
    /// Instances that could not be run, with the reason.
    pub gaps: Vec<String>,
    /// `None` with fewer than two rows of `n ≥ 2`.
    pub ratio_strictly_increasing: Option<bool>,
    pub top_exceeds_everywhere: Option<bool>,
    pub report: Report,
}

impl SensitivityReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "n,vertices,vertices_primed,tau_inf_roots,tau_inf_sampled,tau_1_primed_from_top,tau_1_primed_worst,ratio,small_stationary_mass,small_bound\n",
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.n,
                r.vertices,
                r.vertices_primed,
                r.tau_inf_roots,
                r.tau_inf_sampled,
                r.tau_1_primed_from_top,
                r.tau_1_primed_worst,
                r.ratio,
                r.small_stationary_mass,
                r.small_bound
            ));
        }
        s
    }

    pub fn nice_tail_csv(&self) -> String {
        let mut s = String::from("n,t,survival\n");
        for r in &self.rows {
            for (t, p) in &r.nice_tail {
                s.push_str(&format!("{},{t},{p}\n", r.n));
            }
        }
        s
    }
}

/// Starts under the roots policy: `(certified roots, sampled extras)`.
pub fn roots_policy_starts(fam: &LabeledFamily, samples: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut roots = Vec::new();
    for i in 1..=fam.params.n {
        let r = fam.set(&format!("R_{i}"))?;
        roots.push(fam.root(i));
        roots.push(r.as_slice()[r.len() - 1]);
    }
    roots.sort_unstable();
    roots.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = fam.graph.vertex_count();
    let mut pool: Vec<usize> = (0..n).filter(|x| roots.binary_search(x).is_err()).collect();
    pool.shuffle(&mut rng);
    pool.truncate(samples);
    pool.sort_unstable();
    Ok((roots, pool))
}

fn starts_for(policy: StartPolicy, fam: &LabeledFamily, samples: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    match policy {
        StartPolicy::All => Ok(((0..fam.graph.vertex_count()).collect(), Vec::new())),
        StartPolicy::Roots => roots_policy_starts(fam, samples, seed),
        StartPolicy::TopRoot => Ok((vec![fam.root(fam.params.n)], Vec::new())),
    }
}

fn worst(walk: &Walk, p: f64, eps: f64, starts: &[usize]) -> Result<(u64, usize)> {
    if starts.is_empty() {
        return Ok((0, 0));
    }
    let m = mixing_time_for_walk(walk, p, eps, &StartSet::List(starts.to_vec()), DEFAULT_T_CAP)?;
    Ok((m.tau, m.worst_start))
}

fn sensitivity_row(spec: &ExperimentSpec, n: usize) -> Result<SensitivityRow> {
    let params = spec.params_for(n);
    let g = build_family(&params, false)?;
    let gp = build_family(&params, true)?;
    let walk = Walk::new(&g.graph)?;
    let walk_p = Walk::new(&gp.graph)?;
    let (roots, sampled) = starts_for(spec.start_policy, &g, spec.sample_starts, spec.seed)?;
    let (t_roots, x_roots) = worst(&walk, f64::INFINITY, spec.eps, &roots)?;
    let (t_samp, x_samp) = worst(&walk, f64::INFINITY, spec.eps, &sampled)?;
    let (tau_inf_sampled, worst_x) = if t_samp > t_roots { (t_samp, x_samp) } else { (t_roots, x_roots) };
    let top = gp.root(n);
    let tau_top = walk_p.first_time_within(top, 1.0, spec.eps, DEFAULT_T_CAP)?;
    let (roots_p, sampled_p) = starts_for(spec.start_policy, &gp, spec.sample_starts, spec.seed)?;
    let all_p: Vec<usize> = roots_p.into_iter().chain(sampled_p).collect();
    let (tau_p_worst, _) = worst(&walk_p, 1.0, spec.eps, &all_p)?;

    let small = gp.set("Small")?;
    let small_mass = small.iter().map(|x| walk_p.pi[x]).fold(0.0, |a, b| a + b);
    let small_bound = 15.0 * small.len() as f64 / gp.graph.vertex_count() as f64;
    let horizon = tau_top.max(tau_inf_sampled).max(1);
    let curve = survival_curve(&walk_p, top, gp.set("Nice")?, horizon)?;
    let step = (horizon as usize / spec.tail_points.max(1)).max(1);
    let nice_tail = (0..=horizon as usize)
        .step_by(step)
        .map(|t| (t as u64, curve[t]))
        .collect();
    Ok(SensitivityRow {
        n,
        vertices: g.graph.vertex_count(),
        vertices_primed: gp.graph.vertex_count(),
        graph_hash: g.graph.content_hash(),
        graph_hash_primed: gp.graph.content_hash(),
        tau_inf_roots: t_roots,
        tau_inf_sampled,
        tau_inf_worst_start: g.graph.display_name(worst_x),
        tau_1_primed_from_top: tau_top,
        tau_1_primed_worst: tau_p_worst.max(tau_top),
        ratio: tau_top as f64 / tau_inf_sampled.max(1) as f64,
        small_size: small.len(),
        small_stationary_mass: small_mass,
        small_bound,
        small_bound_holds: small_mass <= small_bound + 1e-12,
        nice_tail,
    })
}

/// Builds `G_n` and `G'_n` for each requested `n` and compares `τ_1(G'_n)`
/// from `o_n` with `τ_∞(G_n)`. Instances that fail (for example over budget)
/// leave a gap entry instead of aborting the run.
pub fn run_sensitivity_experiment(spec: &ExperimentSpec) -> SensitivityReport {
    let mut report = Report::new("sensitivity", spec.seed, spec);
    let mut rows = Vec::new();
    let mut gaps = Vec::new();
    for &n in &spec.ns {
        match sensitivity_row(spec, n) {
            Ok(row) => {
                let h = row.graph_hash.clone();
                let hp = row.graph_hash_primed.clone();
                let method = match spec.start_policy {
                    StartPolicy::All => "exact-all-starts",
                    StartPolicy::Roots => "roots-lower-bound",
                    StartPolicy::TopRoot => "top-root-only",
                };
                report.push(Record::new(format!("tau_inf(G_{n}) roots"), row.tau_inf_roots, method, &h));
                report.push(Record::new(format!("tau_inf(G_{n}) sampled"), row.tau_inf_sampled, "roots+sampled-starts", &h));
                report.push(Record::new(format!("tau_1(G'_{n}) from o_{n}"), row.tau_1_primed_from_top, "exact-evolution", &hp));
                report.push(Record::new(format!("tau_1(G'_{n}) worst"), row.tau_1_primed_worst, "roots+sampled-starts", &hp));
                report.push(Record::new(format!("ratio n={n}"), row.ratio, "tau_1(G')/tau_inf(G)", &hp));
                report.push(Record::new(format!("pi'(Small) n={n}"), row.small_stationary_mass, "exact", &hp));
                report.push(Record::new(format!("15|Small|/|V'| n={n}"), row.small_bound, "exact", &hp));
                if !row.small_bound_holds {
                    report.violations.push(format!("n={n}: pi'(Small) exceeds 15|Small|/|V|"));
                }
                rows.push(row);
            }
            Err(e) => gaps.push(format!("n={n}: {e}")),
        }
    }
    let ordered: Vec<&SensitivityRow> = rows.iter().filter(|r| r.n >= 2).collect();
    let ratio_strictly_increasing = (ordered.len() >= 2).then(|| ordered.windows(2).all(|w| w[1].ratio > w[0].ratio));
    let top_exceeds_everywhere =
        (!ordered.is_empty()).then(|| ordered.iter().all(|r| r.tau_1_primed_from_top > r.tau_inf_sampled));
    for g in &gaps {
        report.warnings.push(g.clone());
    }
    SensitivityReport {
        rows,
        gaps,
        ratio_strictly_increasing,
        top_exceeds_everywhere,
        report,
    }
}

/// Random connected graph: a random recursive tree plus extra edges.
/// With `max_degree`, no vertex exceeds it; with `weighted`, conductances
/// are drawn from `[1/4, 4]` on a log scale.
pub fn random_connected_graph<R: Rng>(n: usize, rng: &mut R, max_degree: Option<usize>, weighted: bool) -> Result<WeightedGraph> {
    let cap = max_degree.unwrap_or(usize::MAX);
    let mut deg = vec![0usize; n];
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for v in 1..n {
        let options: Vec<usize> = (0..v).filter(|&u| deg[u] < cap).collect();
        let u = options[rng.gen_range(0..options.len())];
        edges.push((u, v));
        deg[u] += 1;
        deg[v] += 1;
    }
    let extra = if n > 2 { rng.gen_range(0..=n) } else { 0 };
    for _ in 0..extra {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let (a, b) = (a.min(b), a.max(b));
        if a == b || deg[a] >= cap || deg[b] >= cap || edges.contains(&(a, b)) {
            continue;
        }
        edges.push((a, b));
        deg[a] += 1;
        deg[b] += 1;
    }
    let weighted_edges = edges.into_iter().map(|(a, b)| {
        let c = if weighted { 4f64.powf(rng.gen_range(-1.0..1.0)) } else { 1.0 };
        (a, b, c)
    });
    WeightedGraph::from_edges(n, weighted_edges.collect::<Vec<_>>())
}

/// `count` seeded connected graphs with 2 to `max_n` vertices.
pub fn seeded_corpus(count: usize, max_n: usize, seed: u64) -> Result<Vec<WeightedGraph>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(2..=max_n.max(2));
            random_connected_graph(n, &mut rng, None, true)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundSuiteSpec {
    pub corpus_size: usize,
    pub max_vertices: usize,
    pub seed: u64,
    /// Adds a kernel whose first row sums to 0.9, as a negative control.
    pub inject_faulty_kernel: bool,
    pub tail_t_max: u64,
    pub poincare_t_max: u64,
    pub l2_t_max: u64,
}

impl Default for BoundSuiteSpec {
    fn default() -> Self {
        Self {
            corpus_size: 50,
            max_vertices: 12,
            seed: 1,
            inject_faulty_kernel: false,
            tail_t_max: 200,
            poincare_t_max: 100,
            l2_t_max: 30,
        }
    }
}

/// Row sums and stationarity of a kernel; returns the violations found.
pub fn kernel_sanity(kernel: &TransitionKernel, pi: &[f64], name: &str) -> Vec<String> {
    let mut out = Vec::new();
    for x in 0..kernel.len() {
        let s = kernel.row_sum(x);
        if (s - 1.0).abs() > 1e-12 {
            out.push(format!("{name}: row {x} sums to {s}"));
            break;
        }
    }
    let mut next = vec![0.0; pi.len()];
    kernel.apply_left(pi, &mut next);
    if let Some(x) = (0..pi.len()).find(|&x| (next[x] - pi[x]).abs() > 1e-12) {
        out.push(format!("{name}: πP differs from π at {x}"));
    }
    out
}

/// Runs the Cheeger, restricted-Cheeger, Poincaré, exit-tail, spectral
/// profile and `L_2`/`L_∞` checks over a seeded corpus.
pub fn run_bound_suite(spec: &BoundSuiteSpec) -> Result<Report> {
    let mut report = Report::new("bound-suite", spec.seed, spec);
    let corpus = seeded_corpus(spec.corpus_size, spec.max_vertices, spec.seed)?;
    if corpus.is_empty() {
        report.warnings.push("empty corpus: nothing was checked".to_string());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0xB0B);
    for (k, g) in corpus.iter().enumerate() {
        let h = g.content_hash();
        let name = format!("graph {k}");
        let kernel = TransitionKernel::lazy(g)?;
        let pi = g.stationary()?;
        report.violations.extend(kernel_sanity(&kernel, pi.as_slice(), &name));
        let n = g.vertex_count();

        let gap = spectral::spectral_gap(g)?;
        let phi = spectral::cheeger(g)?.value;
        let ok = phi * phi / 2.0 <= gap + 1e-9 && gap <= 2.0 * phi + 1e-9;
        report.push(Record::new(format!("cheeger sandwich {k}"), ok, "exact-enumeration", &h));
        if !ok {
            report.violations.push(format!("{name}: Φ²/2 ≤ λ ≤ 2Φ fails (Φ={phi}, λ={gap})"));
        }

        if n >= 2 {
            let size = rng.gen_range(1..n);
            let mut vs: Vec<usize> = (0..n).collect();
            vs.shuffle(&mut rng);
            let a = VertexSet::new(vs[..size].to_vec(), n)?;
            let la = spectral::restricted_gap(g, &a)?;
            let pa = spectral::restricted_cheeger(g, &a)?;
            let ok = pa * pa / 4.0 <= la + 1e-9 && la <= pa + 1e-9;
            report.push(Record::new(format!("restricted sandwich {k}"), ok, "exact-enumeration", &h));
            if !ok {
                report.violations.push(format!("{name}: Φ(A)²/4 ≤ λ(A) ≤ Φ(A) fails"));
            }
            let start = a.as_slice()[rng.gen_range(0..a.len())];
            let tail = exit_tail(g, &a, start, spec.tail_t_max)?;
            let excess = tail.worst_excess();
            report.push(Record::new(format!("exit tail excess {k}"), excess, "exact-evolution", &h));
            if excess > 1e-12 {
                report.violations.push(format!("{name}: exit tail exceeds its bound by {excess}"));
            }
        }

        let mut mass: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = mass.iter().sum();
        mass.iter_mut().for_each(|m| *m /= total);
        let pc = poincare_check(g, &Distribution::new(mass)?, spec.poincare_t_max)?;
        report.push(Record::new(format!("poincare violation {k}"), pc.max_violation, "exact-evolution", &h));
        if !pc.holds {
            report.violations.push(format!("{name}: Poincaré decay violated by {}", pc.max_violation));
        }

        if n <= spectral::ALL_SUBSETS_LIMIT {
            let rho = spectral::rho_bound(g)?;
            let tau = crate::mixing::mixing_time(g, f64::INFINITY, 0.5)?;
            report.push(Record::new(format!("rho {k}"), rho, "connected-set-exact", &h));
            if rho < tau as f64 {
                report.violations.push(format!("{name}: ρ = {rho} below τ_∞ = {tau}"));
            }
        }

        let l2 = l2_linfty_relation_check(g, 0.25, spec.l2_t_max)?;
        report.push(Record::new(format!("l2-linf deviation {k}"), l2.max_deviation, "exact-evolution", &h));
        if !l2.holds {
            report.violations.push(format!("{name}: L2/L∞ identity off by {}", l2.max_deviation));
        }
    }
    if spec.inject_faulty_kernel {
        let rows = vec![vec![(0, 0.45), (1, 0.45)], vec![(0, 0.5), (1, 0.5)]];
        let faulty = TransitionKernel::from_rows(rows)?;
        report.violations.extend(kernel_sanity(&faulty, &[0.5, 0.5], "injected kernel"));
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessSpec {
    /// Weight factors are drawn from `[1/C, C]`.
    pub c: f64,
    pub seed: u64,
    pub torus_sides: Vec<usize>,
    pub torus_dim: usize,
    pub cube_dims: Vec<usize>,
    pub eps: f64,
}

impl Default for RobustnessSpec {
    fn default() -> Self {
        Self {
            c: 2.0,
            seed: 1,
            torus_sides: vec![4, 6, 8],
            torus_dim: 2,
            cube_dims: vec![3, 4, 5],
            eps: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub family: String,
    pub perturbation: String,
    pub tau_before: u64,
    pub tau_after: u64,
    pub ratio: f64,
}

fn tau_all(g: &WeightedGraph, eps: f64) -> Result<u64> {
    let walk = Walk::new(g)?;
    Ok(mixing_time_for_walk(&walk, f64::INFINITY, eps, &StartSet::All, DEFAULT_T_CAP)?.tau)
}

/// `τ_∞` before and after the identity perturbation, seeded bounded weight
/// perturbations, and a uniform 2-stretch.
pub fn run_robustness_probe(spec: &RobustnessSpec) -> Result<(Vec<RobustnessRow>, Report)> {
    if !(spec.c >= 1.0) {
        return Err(Error::InvalidArgument("perturbation bound C must be at least 1".into()));
    }
    let mut report = Report::new("robustness", spec.seed, spec);
    let mut graphs = Vec::new();
    for &s in &spec.torus_sides {
        graphs.push((format!("torus({s},{})", spec.torus_dim), torus(s, spec.torus_dim)?));
    }
    for &d in &spec.cube_dims {
        graphs.push((format!("hypercube({d})"), hypercube(d)?));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = Vec::new();
    for (name, g) in graphs {
        let before = tau_all(&g, spec.eps)?;
        let identity: Vec<(usize, usize, f64)> = g.edges().iter().map(|e| (e.u, e.v, 1.0)).collect();
        let factors: Vec<(usize, usize, f64)> = g
            .edges()
            .iter()
            .map(|e| (e.u, e.v, spec.c.powf(rng.gen_range(-1.0..=1.0))))
            .collect();
        let variants = [
            ("identity".to_string(), g.perturb_weights(&identity)?),
            (format!("weights(C={})", spec.c), g.perturb_weights(&factors)?),
            ("stretch(2)".to_string(), g.stretch_all(2)?),
        ];
        for (label, h) in variants {
            let after = tau_all(&h, spec.eps)?;
            let row = RobustnessRow {
                family: name.clone(),
                perturbation: label,
                tau_before: before,
                tau_after: after,
                ratio: after as f64 / before.max(1) as f64,
            };
            report.push(Record::new(
                format!("{} {} ratio", row.family, row.perturbation),
                row.ratio,
                "exact-all-starts",
                &h.content_hash(),
            ));
            rows.push(row);
        }
    }
    Ok((rows, report))
}
