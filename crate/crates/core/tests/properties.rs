mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use robustmix::electrical::effective_conductance;
use robustmix::experiment::random_connected_graph;
use robustmix::mixing::{exit_tail, mixing_time, StartSet, Walk};
use robustmix::spectral;
use robustmix::{TransitionKernel, VertexSet, WeightedGraph};

fn graph(seed: u64, n: usize) -> WeightedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_connected_graph(n, &mut rng, None, true).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stationary_law_is_reversible(seed in any::<u64>(), n in 2usize..30) {
        let g = graph(seed, n);
        let pi = g.stationary().unwrap();
        prop_assert!((pi.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let k = TransitionKernel::lazy(&g).unwrap();
        prop_assert!(k.reversibility_defect(pi.as_slice()) <= 1e-12);
    }

    #[test]
    fn unit_stretch_and_unit_weights_are_identities(seed in any::<u64>(), n in 2usize..20) {
        let g = graph(seed, n);
        let ones: Vec<_> = g.edges().iter().map(|e| (e.u, e.v, 1usize)).collect();
        prop_assert_eq!(g.stretch_edges(&ones).unwrap().content_hash(), g.content_hash());
        let unit: Vec<_> = g.edges().iter().map(|e| (e.u, e.v, 1.0)).collect();
        prop_assert_eq!(g.perturb_weights(&unit).unwrap().content_hash(), g.content_hash());
    }

    #[test]
    fn stretch_adds_k_minus_one_vertices_per_edge(seed in any::<u64>(), n in 2usize..12, k in 1usize..5) {
        let g = graph(seed, n);
        let s = g.stretch_all(k).unwrap();
        prop_assert_eq!(s.vertex_count(), n + g.edge_count() * (k - 1));
        prop_assert_eq!(s.edge_count(), g.edge_count() * k);
        prop_assert!(s.is_connected());
    }

    #[test]
    fn contraction_preserves_total_conductance(seed in any::<u64>(), n in 3usize..15, cut in 1usize..14) {
        // integer weights: exact; real weights: merged loops round once per edge
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = random_connected_graph(n, &mut rng, None, false).unwrap();
        let g = graph(seed, n);
        let set = VertexSet::new((0..cut.min(n - 1)).collect(), n).unwrap();
        let (h, map) = unit.contract_set(&set).unwrap();
        prop_assert_eq!(h.total_conductance_exact().unwrap(), unit.total_conductance_exact().unwrap());
        prop_assert!(set.iter().all(|x| map[x] == map[set.as_slice()[0]]));
        let (h, _) = g.contract_set(&set).unwrap();
        prop_assert!((h.total_conductance() / g.total_conductance() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn product_degree_law(a in any::<u64>(), b in any::<u64>(), n in 2usize..7, m in 2usize..7) {
        let g = graph(a, n);
        let h = graph(b, m);
        let p = g.cartesian_product(&h).unwrap();
        for u in 0..n {
            for x in 0..m {
                prop_assert_eq!(p.degree(u * m + x), g.degree(u) + h.degree(x));
            }
        }
    }

    #[test]
    fn mixing_times_ordered_in_p(seed in any::<u64>(), n in 2usize..25) {
        let g = graph(seed, n);
        let t1 = mixing_time(&g, 1.0, 0.5).unwrap();
        let t2 = mixing_time(&g, 2.0, 0.5).unwrap();
        let ti = mixing_time(&g, f64::INFINITY, 0.5).unwrap();
        prop_assert!(t1 <= t2 && t2 <= ti, "{t1} {t2} {ti}");
    }

    #[test]
    fn worst_start_curves_nonincreasing(seed in any::<u64>(), n in 2usize..25) {
        let g = graph(seed, n);
        let w = Walk::new(&g).unwrap();
        for p in [2.0, f64::INFINITY] {
            let c = w.worst_start_curve(p, &StartSet::All, 60).unwrap();
            prop_assert!(c.is_nonincreasing(1e-12));
        }
    }

    #[test]
    fn tau_one_is_twice_total_variation(seed in any::<u64>(), n in 2usize..12) {
        let g = graph(seed, n);
        let tau = mixing_time(&g, 1.0, 0.5).unwrap();
        let p = common::dense_kernel(&g);
        let pi = common::stationary(&g);
        let worst_tv = |t: u64| {
            (0..n)
                .map(|x| common::row_power(&p, x, t).iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0)
                .fold(0.0, f64::max)
        };
        prop_assert!(2.0 * worst_tv(tau) <= 0.5 + 1e-12);
        if tau > 0 {
            prop_assert!(2.0 * worst_tv(tau - 1) > 0.5 - 1e-12);
        }
    }

    #[test]
    fn exit_tail_is_self_consistent(seed in any::<u64>(), n in 3usize..15, size in 1usize..8) {
        let g = graph(seed, n);
        let a = VertexSet::new((0..size.min(n - 1)).collect(), n).unwrap();
        let t = exit_tail(&g, &a, 0, 80).unwrap();
        let mut left = 1.0;
        for (k, e) in t.exits.iter().enumerate() {
            left -= e;
            prop_assert!((t.exact[k + 1] - left).abs() <= 1e-12);
        }
    }

    #[test]
    fn rayleigh_monotonicity(seed in any::<u64>(), n in 3usize..15, edge in any::<prop::sample::Index>(), f in 1.0f64..10.0) {
        let g = graph(seed, n);
        let e = g.edges()[edge.index(g.edge_count())];
        let h = g.perturb_weights(&[(e.u, e.v, f)]).unwrap();
        let sinks = VertexSet::new(vec![n - 1], n).unwrap();
        let before = effective_conductance(&g, 0, &sinks).unwrap();
        let after = effective_conductance(&h, 0, &sinks).unwrap();
        prop_assert!(after >= before * (1.0 - 1e-12));
    }

    #[test]
    fn spectral_profile_nonincreasing(seed in any::<u64>(), n in 2usize..11) {
        let g = graph(seed, n);
        let c = spectral::spectral_profile(&g).unwrap();
        prop_assert!(c.breakpoints.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 > w[1].1));
        let brute = spectral::spectral_profile_all_subsets(&g).unwrap();
        for v in [0.1, 0.25, 0.4, 0.5] {
            match (c.value_at(v), brute.value_at(v)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-9),
                (a, b) => prop_assert_eq!(a.is_ok(), b.is_ok()),
            }
        }
    }

    #[test]
    fn series_and_parallel_laws(cs in prop::collection::vec(0.1f64..10.0, 1..8), ds in prop::collection::vec(0.1f64..10.0, 1..8)) {
        // two paths from 0 to 1 in parallel, internal vertices numbered after
        let mut edges = Vec::new();
        let mut next = 2;
        for path in [&cs, &ds] {
            let mut prev = 0;
            for (i, &c) in path.iter().enumerate() {
                let to = if i + 1 == path.len() { 1 } else { next += 1; next - 1 };
                edges.push((prev, to, c));
                prev = to;
            }
        }
        let g = WeightedGraph::from_edges(next, edges).unwrap();
        let series = |p: &[f64]| 1.0 / p.iter().map(|c| 1.0 / c).sum::<f64>();
        let expected = series(&cs) + series(&ds);
        let got = effective_conductance(&g, 0, &VertexSet::new(vec![1], next).unwrap()).unwrap();
        prop_assert!((got - expected).abs() <= 1e-12 * expected.max(1.0));
    }
}
