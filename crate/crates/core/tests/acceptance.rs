//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion outside `KNOWN_FAILURES` fails, or if a known
//! failure starts passing (so the list cannot go stale).

mod common;

use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robustmix::construction::{hypercube, paper_size_audit};
use robustmix::electrical::{
    harmonic_measure, stretched_binary_tree, truncated_tree_left_prob, StretchedTree, StretchedTreeSpec,
};
use robustmix::experiment::{random_connected_graph, run_sensitivity_experiment, seeded_corpus, ExperimentSpec};
use robustmix::mixing::{exit_tail, hit_probability, l2_linfty_relation_check, mixing_time, poincare_check};
use robustmix::simulate::estimate_hit_probability;
use robustmix::spectral;
use robustmix::{Distribution, TransitionKernel, VertexSet, WeightedGraph};

/// Criteria expected to fail at desk scale; see the README.
const KNOWN_FAILURES: &[usize] = &[11];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cycle(n: usize) -> WeightedGraph {
    WeightedGraph::unweighted(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
}

fn c1_cheeger_sandwich() -> Outcome {
    let corpus = seeded_corpus(100, 12, 101).unwrap();
    let mut worst_oracle: f64 = 0.0;
    let mut bad = 0;
    for g in &corpus {
        let lambda = spectral::spectral_gap(g).unwrap();
        let phi = spectral::cheeger(g).unwrap().value;
        worst_oracle = worst_oracle.max((phi - common::cheeger(g)).abs()).max((lambda - common::gap(g)).abs());
        if !(phi * phi / 2.0 <= lambda + 1e-9 && lambda <= 2.0 * phi + 1e-9) {
            bad += 1;
        }
    }
    outcome(
        bad == 0 && worst_oracle <= 1e-9,
        format!("100 graphs, {bad} violations, max |lib − dense oracle| = {worst_oracle:.1e}"),
    )
}

fn c2_restricted_sandwich() -> Outcome {
    let corpus = seeded_corpus(20, 8, 202).unwrap();
    let mut sets = 0;
    let mut bad = 0;
    let mut worst_oracle: f64 = 0.0;
    for g in &corpus {
        let n = g.vertex_count();
        for mask in 1u32..(1u32 << n) - 1 {
            let members: Vec<usize> = (0..n).filter(|&x| mask >> x & 1 == 1).collect();
            let a = VertexSet::new(members.clone(), n).unwrap();
            let la = spectral::restricted_gap(g, &a).unwrap();
            let pa = spectral::restricted_cheeger(g, &a).unwrap();
            worst_oracle = worst_oracle
                .max((la - common::restricted_gap(g, &members)).abs())
                .max((pa - common::restricted_cheeger(g, &members)).abs());
            if !(pa * pa / 4.0 <= la + 1e-9 && la <= pa + 1e-9) {
                bad += 1;
            }
            sets += 1;
        }
    }
    outcome(
        bad == 0 && worst_oracle <= 1e-9,
        format!("{sets} sets on 20 graphs, {bad} violations, max |lib − oracle| = {worst_oracle:.1e}"),
    )
}

fn c3_stretch_robustness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst_phi = f64::INFINITY;
    let mut worst_gap = f64::INFINITY;
    let mut checked = 0;
    for _ in 0..50 {
        let n = rng.gen_range(3..=5);
        let h = random_connected_graph(n, &mut rng, Some(4), false).unwrap();
        let phi = spectral::cheeger(&h).unwrap().value;
        let lambda = spectral::spectral_gap(&h).unwrap();
        for k in [2usize, 3, 5] {
            let s = h.stretch_all(k).unwrap();
            let phi_s = spectral::cheeger_sparse(&s).unwrap().value;
            let lambda_s = spectral::spectral_gap(&s).unwrap();
            worst_phi = worst_phi.min(phi_s / (phi / (10.0 * k as f64)));
            worst_gap = worst_gap.min(lambda_s / (lambda / (50.0 * (k * k) as f64)));
            checked += 1;
        }
    }
    outcome(
        worst_phi >= 1.0,
        format!(
            "{checked} (graph, K) pairs; min Φ(stretch)/(Φ/10K) = {worst_phi:.3}, min λ(stretch)/(λ/50K²) = {worst_gap:.3}"
        ),
    )
}

fn c4_l2_linfty() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    let mut oracle_dev: f64 = 0.0;
    let mut times_ok = true;
    for k in 0..10 {
        let n = rng.gen_range(10..=50);
        let g = random_connected_graph(n, &mut rng, None, true).unwrap();
        let r = l2_linfty_relation_check(&g, 0.25, 30).unwrap();
        worst = worst.max(r.max_deviation);
        times_ok &= r.time_contract_holds;
        if k < 3 {
            // dense reference at a few times
            let p = common::dense_kernel(&g);
            let pi = common::stationary(&g);
            for t in [1u64, 7, 15] {
                let l2 = (0..n).map(|x| common::lp(&common::row_power(&p, x, t), &pi, 2.0)).fold(0.0, f64::max);
                let li = (0..n)
                    .map(|x| common::lp(&common::row_power(&p, x, 2 * t), &pi, f64::INFINITY))
                    .fold(0.0, f64::max);
                oracle_dev = oracle_dev.max((li - l2 * l2).abs() / (l2 * l2).max(1.0));
            }
        }
    }
    outcome(
        worst <= 1e-9 && oracle_dev <= 1e-9,
        format!("max relative deviation {worst:.1e} (dense reference {oracle_dev:.1e}); τ_∞(a) vs 2τ_2(√a) within 1: {times_ok}"),
    )
}

fn c5_transitive_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = Vec::new();
    for n in 3..=12 {
        // closed form: 1 − λ_k = (1 + cos 2πk/n)/2
        let ev: Vec<f64> = (1..n)
            .map(|k| (1.0 + (2.0 * std::f64::consts::PI * k as f64 / n as f64).cos()) / 2.0)
            .collect();
        cases.push((cycle(n), ev));
    }
    for d in 1..=4usize {
        // 1 − λ = 1 − j/d with multiplicity C(d, j)
        let mut ev = Vec::new();
        for j in 1..=d {
            let mult = (0..j).fold(1usize, |acc, i| acc * (d - i) / (i + 1));
            ev.extend(std::iter::repeat_n(1.0 - j as f64 / d as f64, mult));
        }
        cases.push((hypercube(d).unwrap(), ev));
    }
    for (g, ev) in &cases {
        for t in 0..=20u64 {
            let (lhs, rhs) = spectral::transitive_l2_identity_check(g, t).unwrap();
            let closed: f64 = ev.iter().map(|e| e.powi(2 * t as i32)).sum();
            worst = worst.max((lhs - rhs).abs()).max((lhs - closed).abs());
        }
    }
    outcome(
        worst <= 1e-9,
        format!("C_3..C_12 and Q_1..Q_4, t ≤ 20: max deviation {worst:.1e}"),
    )
}

fn c6_network_reduction() -> Outcome {
    let v = truncated_tree_left_prob(StretchedTreeSpec::primed(30, 1)).unwrap().value;
    let target = 2f64.sqrt() / (1.0 + 2f64.sqrt());
    let sym = truncated_tree_left_prob(StretchedTreeSpec::uniform(30, 1)).unwrap().value;
    let ok = (v - 0.5857864376).abs() <= 1e-6 && (sym - 0.5).abs() <= 1e-12;
    outcome(
        ok,
        format!("depth 30: {v:.10} (√2/(1+√2) = {target:.10}); symmetric control {sym:.15}"),
    )
}

fn c7_harmonic_uniformity() -> Outcome {
    let q = 3;
    let tree = stretched_binary_tree(StretchedTreeSpec::uniform(4, q)).unwrap();
    let bottom = VertexSet::new(tree.bottom().to_vec(), tree.graph.vertex_count()).unwrap();
    let mu = harmonic_measure(&tree.graph, tree.root(), &bottom).unwrap();
    let uniform_dev = tree
        .bottom()
        .iter()
        .map(|&x| (mu.as_slice()[x] - 1.0 / 16.0).abs())
        .fold(0.0, f64::max);

    let primed = stretched_binary_tree(StretchedTreeSpec::primed(4, q)).unwrap();
    let bottom = VertexSet::new(primed.bottom().to_vec(), primed.graph.vertex_count()).unwrap();
    let mu = harmonic_measure(&primed.graph, primed.root(), &bottom).unwrap();
    let leaf_mass = |v: usize| mu.as_slice()[v];
    // mass below each branch vertex, heap order
    let mut below = vec![0.0; 31];
    for v in (0..31).rev() {
        below[v] = if v >= 15 { leaf_mass(v) } else { below[2 * v + 1] + below[2 * v + 2] };
    }
    // oracle: current splits by branch conductance, arm in series with the
    // subtree conductance below the child
    let mut sub = [f64::INFINITY; 5];
    for r in 1..=4 {
        let inv = if sub[r - 1].is_infinite() { 0.0 } else { 1.0 / sub[r - 1] };
        sub[r] = 1.0 / (q as f64 + inv) + 1.0 / (2.0 * q as f64 + inv);
    }
    let mut split_dev: f64 = 0.0;
    for v in 0..15usize {
        let level = (usize::BITS - (v + 1).leading_zeros() - 1) as usize;
        let rem = 4 - level;
        let inv = if sub[rem - 1].is_infinite() { 0.0 } else { 1.0 / sub[rem - 1] };
        let (wl, wr) = (1.0 / (q as f64 + inv), 1.0 / (2.0 * q as f64 + inv));
        split_dev = split_dev.max((below[2 * v + 1] / below[v] - wl / (wl + wr)).abs());
    }
    // turning any right step of a leaf's path into a left step strictly
    // raises its mass, so mass moves toward high g
    let leaf = |bits: &[bool]| bits.iter().fold(0usize, |v, &left| 2 * v + if left { 1 } else { 2 });
    let mut increasing = true;
    let mut mean_g = 0.0;
    for code in 0..16u32 {
        let bits: Vec<bool> = (0..4).map(|k| code >> k & 1 == 1).collect();
        let v = leaf(&bits);
        mean_g += leaf_mass(v) * StretchedTree::g_value(v) as f64;
        for k in 0..4 {
            if !bits[k] {
                let mut flipped = bits.clone();
                flipped[k] = true;
                increasing &= leaf_mass(leaf(&flipped)) > leaf_mass(v);
            }
        }
    }
    outcome(
        uniform_dev <= 1e-10 && split_dev <= 1e-10 && increasing && mean_g > 0.0,
        format!(
            "uniform tree max deviation {uniform_dev:.1e}; primed split vs conductance oracle {split_dev:.1e}; \
             right→left flips strictly raise leaf mass: {increasing}; mean g {mean_g:.4} (uniform 0)"
        ),
    )
}

fn c8_exit_tail() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut found = 0;
    let mut tried = 0;
    let mut worst = f64::NEG_INFINITY;
    while found < 20 && tried < 10_000 {
        tried += 1;
        let n = rng.gen_range(4..=14);
        let g = random_connected_graph(n, &mut rng, None, true).unwrap();
        let mut vs: Vec<usize> = (0..n).collect();
        vs.shuffle(&mut rng);
        let size = rng.gen_range(1..=n / 2);
        let a = VertexSet::new(vs[..size].to_vec(), n).unwrap();
        let start = vs[rng.gen_range(0..size)];
        let tail = exit_tail(&g, &a, start, 200).unwrap();
        if !tail.bound.iter().any(|&b| b < 1.0) {
            continue;
        }
        worst = worst.max(tail.worst_excess());
        found += 1;
    }
    outcome(
        found == 20 && worst <= 1e-12,
        format!("{found} triples with a nontrivial bound; max (exact − bound) = {worst:.2e}"),
    )
}

fn c9_poincare() -> Outcome {
    let corpus = seeded_corpus(20, 12, 909).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9090);
    let mut worst = f64::NEG_INFINITY;
    let mut runs = 0;
    for g in &corpus {
        let n = g.vertex_count();
        for k in 0..10 {
            let mu = if k < 2 {
                Distribution::point_mass(rng.gen_range(0..n), n).unwrap()
            } else {
                let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0f64).powi(3)).collect();
                let s: f64 = w.iter().sum();
                Distribution::new(w.into_iter().map(|x| x / s).collect()).unwrap()
            };
            worst = worst.max(poincare_check(g, &mu, 100).unwrap().max_violation);
            runs += 1;
        }
    }
    outcome(worst <= 1e-12, format!("{runs} runs to t = 100; max violation {worst:.2e}"))
}

fn c10_profile_ordering() -> Outcome {
    let corpus = seeded_corpus(50, 14, 1010).unwrap();
    let mut worst_ratio = f64::INFINITY;
    for g in &corpus {
        let rho = spectral::rho_bound(g).unwrap();
        let tau = mixing_time(g, f64::INFINITY, 0.5).unwrap();
        worst_ratio = worst_ratio.min(rho / tau.max(1) as f64);
    }
    outcome(
        worst_ratio >= 1.0,
        format!("50 graphs, |V| ≤ 14: min ρ/τ_∞(1/2) = {worst_ratio:.3}"),
    )
}

fn c11_sensitivity_trend() -> Outcome {
    let spec = ExperimentSpec::default();
    let out = run_sensitivity_experiment(&spec);
    if !out.gaps.is_empty() {
        return outcome(false, format!("gaps: {:?}", out.gaps));
    }
    let table: Vec<String> = out
        .rows
        .iter()
        .map(|r| {
            format!(
                "n={}: |V|={} τ_∞(G) roots {} / sampled {}, τ_1(G') from o_n {}, ratio {:.3}",
                r.n, r.vertices, r.tau_inf_roots, r.tau_inf_sampled, r.tau_1_primed_from_top, r.ratio
            )
        })
        .collect();
    let exceeds = out.top_exceeds_everywhere == Some(true);
    let increasing = out.ratio_strictly_increasing == Some(true);
    outcome(
        exceeds && increasing,
        format!("{}; exceeds everywhere: {exceeds}; ratio increasing: {increasing}", table.join("; ")),
    )
}

fn c12_size_audit() -> Outcome {
    let a2 = paper_size_audit(2).unwrap();
    let a3 = paper_size_audit(3).unwrap();
    outcome(
        a2.all_hold && a3.all_hold,
        format!(
            "n=2: log2|V| = {:.1}, all hold {}; n=3: log2|V| = {:.1}, all hold {}",
            a2.log2_vertices, a2.all_hold, a3.log2_vertices, a3.all_hold
        ),
    )
}

fn c13_monte_carlo() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1313);
    let mut instances: Vec<(WeightedGraph, Vec<usize>, Vec<usize>, usize)> = vec![
        (WeightedGraph::unweighted(6, (1..6).map(|i| (i - 1, i))).unwrap(), vec![5], vec![0], 2),
        (cycle(9), vec![4], vec![0, 8], 2),
        (hypercube(3).unwrap(), vec![7], vec![0], 1),
    ];
    for _ in 0..2 {
        let g = random_connected_graph(10, &mut rng, None, true).unwrap();
        instances.push((g, vec![9], vec![0, 1], 5));
    }
    let mut worst_z: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let samples = 100_000u64;
    for (k, (g, a, b, start)) in instances.iter().enumerate() {
        let n = g.vertex_count();
        let av = VertexSet::new(a.clone(), n).unwrap();
        let bv = VertexSet::new(b.clone(), n).unwrap();
        let exact = hit_probability(g, &av, &bv).unwrap().values[*start];
        worst_oracle = worst_oracle.max((exact - common::hit_probability(g, a, b, *start)).abs());
        let kernel = TransitionKernel::lazy(g).unwrap();
        let est = estimate_hit_probability(&kernel, *start, &av, &bv, samples, 77 + k as u64, 1_000_000).unwrap();
        let se = (exact * (1.0 - exact) / samples as f64).sqrt();
        worst_z = worst_z.max((est.p_hat - exact).abs() / se);
    }
    outcome(
        worst_z <= 3.0 && worst_oracle <= 1e-10,
        format!("5 instances × 10^5 runs: max |p̂ − p|/SE = {worst_z:.2}; solve vs dense {worst_oracle:.1e}"),
    )
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 13] = [
        (1, "Cheeger sandwich", c1_cheeger_sandwich),
        (2, "restricted Cheeger sandwich", c2_restricted_sandwich),
        (3, "stretch robustness of Φ", c3_stretch_robustness),
        (4, "L2/L∞ identity", c4_l2_linfty),
        (5, "transitive eigen-identity", c5_transitive_identity),
        (6, "network reduction", c6_network_reduction),
        (7, "harmonic-measure uniformity and bias", c7_harmonic_uniformity),
        (8, "exit-tail bound", c8_exit_tail),
        (9, "Poincaré decay", c9_poincare),
        (10, "spectral-profile ordering", c10_profile_ordering),
        (11, "sensitivity trend", c11_sensitivity_trend),
        (12, "size-formula audit", c12_size_audit),
        (13, "Monte Carlo consistency", c13_monte_carlo),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut out = std::io::stdout().lock();
    let mut unexpected = Vec::new();
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        writeln!(out, "criterion {id:>2} {tag}: {name} [{secs:.1}s] {}", o.detail).unwrap();
        if o.pass == known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        writeln!(out, "unexpected outcomes for criteria {unexpected:?}").unwrap();
        std::process::exit(1);
    }
}
