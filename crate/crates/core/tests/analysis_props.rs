use gasketlab_core::analysis::{
    analyze, boundary_dimension, bounded_neighbors, classify_finite_neighbors, connectedness,
    measure_moments, AnalysisConfig,
};
use gasketlab_core::graph::{build_neighbor_graph, GraphConfig, NeighborGraph};
use gasketlab_core::lattice::{fixtures, Ifs};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture_systems() -> Vec<(&'static str, Ifs)> {
    fixtures::NAMED
        .iter()
        .map(|(n, s)| (*n, s.parse().unwrap()))
        .collect()
}

fn graph(ifs: &Ifs) -> NeighborGraph {
    build_neighbor_graph(ifs, &GraphConfig::default()).unwrap()
}

/// Path counts `p_n(v)` for `n ≤ len`, saturating.
fn path_counts(g: &NeighborGraph, len: usize) -> Vec<Vec<u128>> {
    let mut counts = vec![vec![1u128; g.len()]];
    for _ in 0..len {
        let prev = counts.last().unwrap();
        let next = (0..g.len())
            .map(|v| {
                g.out_edges(v)
                    .iter()
                    .fold(0u128, |acc, e| acc.saturating_add(prev[e.to]))
            })
            .collect();
        counts.push(next);
    }
    counts
}

#[test]
fn bounded_classification_matches_path_counts() {
    for (name, ifs) in fixture_systems() {
        let g = graph(&ifs);
        let spec = boundary_dimension(&g).unwrap();
        let bounded = bounded_neighbors(&g, &spec);
        let n = g.len();
        let counts = path_counts(&g, 2 * n);
        for v in 0..n {
            let early = (0..=n).map(|i| counts[i][v]).max().unwrap();
            let late = (n + 1..=2 * n).map(|i| counts[i][v]).max().unwrap_or(0);
            let stabilized = late <= early && early < u128::MAX;
            assert_eq!(bounded.finite[v], stabilized, "{name}: vertex {}", g.vertices()[v]);
        }
    }
}

#[test]
fn bounded_neighbors_only_see_unit_spectra() {
    for (name, ifs) in fixture_systems() {
        let g = graph(&ifs);
        let spec = boundary_dimension(&g).unwrap();
        let bounded = bounded_neighbors(&g, &spec);
        for v in (0..g.len()).filter(|&v| bounded.finite[v]) {
            let mut stack = vec![spec.component_of(v)];
            let mut seen = vec![false; spec.components.len()];
            while let Some(c) = stack.pop() {
                if std::mem::replace(&mut seen[c], true) {
                    continue;
                }
                let comp = &spec.components[c];
                assert!(comp.lambda <= 1.0 + 1e-12, "{name}: lambda {}", comp.lambda);
                stack.extend_from_slice(spec.component_successors(c));
            }
        }
    }
}

#[test]
fn bounded_neighbors_are_finite_neighbors() {
    for (name, ifs) in fixture_systems() {
        let g = graph(&ifs);
        let spec = boundary_dimension(&g).unwrap();
        let finite = classify_finite_neighbors(&g, &spec);
        let bounded = bounded_neighbors(&g, &spec);
        for v in 0..g.len() {
            assert!(!bounded.finite[v] || finite.finite[v], "{name}");
        }
    }
}

#[test]
fn boundary_dimension_ignores_map_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (name, ifs) in fixture_systems() {
        let base = boundary_dimension(&graph(&ifs)).unwrap().dimension;
        for _ in 0..10 {
            let mut perm = [0usize, 1, 2];
            perm.shuffle(&mut rng);
            let d = boundary_dimension(&graph(&ifs.permuted(&perm))).unwrap().dimension;
            assert!((d - base).abs() < 1e-9, "{name} {perm:?}: {d} vs {base}");
        }
    }
}

#[test]
fn connectivity_matrix_is_symmetric() {
    for (name, ifs) in fixture_systems() {
        let c = connectedness(&graph(&ifs));
        for j in 0..3 {
            for k in 0..3 {
                assert_eq!(c.matrix[j][k], c.matrix[k][j], "{name}");
            }
        }
    }
}

#[test]
fn mean_lies_in_bounding_disk() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..500 {
        let triples: Vec<(u8, i64, i64)> = (0..3)
            .map(|_| (rng.random_range(0..4), rng.random_range(-10..=10), rng.random_range(-10..=10)))
            .collect();
        let ifs = Ifs::from_triples(&triples);
        let (x, y) = measure_moments(&ifs).mean_f64();
        assert!(x * x + y * y <= ifs.bounding_radius_sq() as f64 + 1e-9, "{ifs}");
    }
}

#[test]
fn moments_agree_with_chaos_game() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (name, ifs) in fixture_systems() {
        let exact = measure_moments(&ifs);
        let (mx, my) = exact.mean_f64();
        let var = exact.second_moment_f64();
        let samples = 400_000;
        let mut z = (0.0, 0.0);
        let (mut sx, mut sy, mut s2) = (0.0, 0.0, 0.0);
        for i in 0..samples + 64 {
            let k = rng.random_range(0..ifs.len());
            z = ifs.map(k).apply_f64(z);
            if i >= 64 {
                sx += z.0;
                sy += z.1;
                s2 += (z.0 - mx).powi(2) + (z.1 - my).powi(2);
            }
        }
        let n = samples as f64;
        let sd = var.sqrt();
        // chaos-game samples are correlated; allow a generous multiple of the iid error
        let tol = 20.0 * sd / n.sqrt();
        assert!((sx / n - mx).abs() < tol, "{name}: mean re {} vs {mx}", sx / n);
        assert!((sy / n - my).abs() < tol, "{name}: mean im {} vs {my}", sy / n);
        assert!((s2 / n - var).abs() < 0.05 * var, "{name}: second moment {} vs {var}", s2 / n);
    }
}

#[test]
fn fixture_table() {
    // (proper, finite, bounded, boundary dim, max degree, neighborhoods, connected, intervals)
    let rows = [
        (fixtures::GASKET, 6, 6, 6, 0.0, 3, 6, true, true),
        (fixtures::CROSSINGS, 7, 2, 2, 0.60538, 7, 19, true, true),
        (fixtures::PATCHES, 90, 14, 14, 1.16545, 19, 3183, false, false),
        (fixtures::BUBBLES, 166, 0, 0, 1.11636, 18, 26678, false, false),
        (fixtures::BUBBLES_VARIANT, 84, 0, 0, 1.16560, 22, 7521, false, false),
        (fixtures::FIREWORKS, 36, 17, 12, 1.33312, 21, 954, false, false),
        (fixtures::THICKET, 89, 0, 0, 1.13208, 16, 6456, true, false),
        (fixtures::FOREST, 58, 7, 7, 1.14435, 13, 5938, true, false),
    ];
    for (fx, proper, finite, bounded, dim, degree, nbhd, connected, intervals) in rows {
        let ifs: Ifs = fx.parse().unwrap();
        let a = analyze(&ifs, &AnalysisConfig::default()).unwrap();
        let r = &a.record;
        assert_eq!(r.proper_nbs, proper, "{fx}");
        assert_eq!(r.finite_nbs, finite, "{fx}");
        assert_eq!(a.bounded.finite_count(), bounded, "{fx}");
        assert!((r.boundary_dim - dim).abs() < 1e-4, "{fx}: {}", r.boundary_dim);
        assert_eq!(r.max_degree, degree, "{fx}");
        assert_eq!(r.neighborhoods, nbhd, "{fx}");
        assert!(r.max_degree <= r.proper_nbs);
        assert_eq!(r.connected, connected, "{fx}");
        assert_eq!(r.has_intervals, intervals, "{fx}");
    }
}

