use mhlj::chain::tv_distance;
use mhlj::kernels::{build_levy_matrix, build_levy_matrix_walk_normalized, truncated_geometric_mean, truncated_geometric_weights, LevySampler};
use mhlj::Graph;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Destination law from `start` by enumerating every hop sequence of each
/// length, weighting a sequence by the product of `1 / (deg + 1)` along it.
fn enumerate_paths(g: &Graph, start: usize, p_d: f64, r: usize) -> Vec<f64> {
    fn walk(g: &Graph, v: usize, left: usize, mass: f64, out: &mut [f64]) {
        if left == 0 {
            out[v] += mass;
            return;
        }
        let ns = g.neighbors(v).unwrap();
        let share = mass / (ns.len() + 1) as f64;
        walk(g, v, left - 1, share, out);
        for &u in ns {
            walk(g, u, left - 1, share, out);
        }
    }
    let mut law = vec![0.0; g.n()];
    for (i, w) in truncated_geometric_weights(p_d, r).into_iter().enumerate() {
        walk(g, start, i + 1, w, &mut law);
    }
    law
}

fn small_graphs() -> Vec<Graph> {
    let mut gs = vec![
        Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap(),
        Graph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap(),
        Graph::ring(6).unwrap(),
        Graph::grid2d(2, 4).unwrap(),
        Graph::from_edges(1, &[]).unwrap(),
    ];
    gs.extend((0..6).map(|s| Graph::erdos_renyi(4 + s as usize, 0.45, s).unwrap()));
    gs
}

#[test]
fn matrix_matches_path_enumeration() {
    for g in small_graphs() {
        for p_d in [0.2, 0.5, 0.9] {
            for r in 1..=3 {
                let k = build_levy_matrix(&g, p_d, r).unwrap();
                for v in 0..g.n() {
                    let oracle = enumerate_paths(&g, v, p_d, r);
                    for (u, &o) in oracle.iter().enumerate() {
                        assert!((k.get(v, u) - o).abs() <= 1e-12, "n = {}, p_d = {p_d}, r = {r}, ({v}, {u})", g.n());
                    }
                }
            }
        }
    }
}

#[test]
fn sampler_matches_matrix() {
    let draws = 200_000;
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for g in [Graph::erdos_renyi(12, 0.3, 2).unwrap(), Graph::from_edges(4, &[(0, 1), (1, 2), (1, 3)]).unwrap()] {
        for (p_d, r) in [(0.3, 5), (0.5, 2)] {
            let k = build_levy_matrix(&g, p_d, r).unwrap();
            let sampler = LevySampler::new(&g, p_d, r).unwrap();
            for v in 0..g.n() {
                let mut counts = vec![0.0; g.n()];
                for _ in 0..draws {
                    counts[sampler.jump(v, &mut rng).0] += 1.0 / draws as f64;
                }
                let tv = tv_distance(&counts, k.row(v)).unwrap();
                assert!(tv < 0.01, "row {v}: tv {tv}");
            }
        }
    }
}

#[test]
fn jump_lengths_follow_truncated_geometric() {
    let g = Graph::ring(10).unwrap();
    let sampler = LevySampler::new(&g, 0.3, 6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let draws = 400_000;
    let mut counts = vec![0.0; 6];
    let mut total = 0.0;
    for _ in 0..draws {
        let d = sampler.sample_length(&mut rng);
        assert!((1..=6).contains(&d));
        counts[d - 1] += 1.0 / draws as f64;
        total += d as f64 / draws as f64;
    }
    let w = truncated_geometric_weights(0.3, 6);
    assert!(tv_distance(&counts, &w).unwrap() < 0.005);
    assert!((total - truncated_geometric_mean(0.3, 6)).abs() < 0.02);
}

#[test]
fn hop_law_and_walk_counts_agree_on_regular_graphs() {
    for g in [Graph::ring(9).unwrap(), Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (1, 3)]).unwrap()] {
        let a = build_levy_matrix(&g, 0.35, 5).unwrap();
        let b = build_levy_matrix_walk_normalized(&g, 0.35, 5).unwrap();
        assert!(a.matrix().max_abs_diff(b.matrix()) < 1e-14);
    }
    let star = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
    let a = build_levy_matrix(&star, 0.35, 3).unwrap();
    let b = build_levy_matrix_walk_normalized(&star, 0.35, 3).unwrap();
    assert!(a.matrix().max_abs_diff(b.matrix()) > 1e-3);
}
