use mhlj::chain::{detailed_balance_residual, stationary_distribution, tv_distance};
use mhlj::kernels::{build_mixed_mh, build_uniform_mh, build_weighted_mh, build_mhlj_matrix, mixed_target, weighted_target};
use mhlj::{Graph, JumpParams, PowerOptions, TransitionKernel};
use proptest::prelude::*;

fn graph() -> impl Strategy<Value = Graph> {
    prop_oneof![
        (3usize..30).prop_map(|n| Graph::ring(n).unwrap()),
        (1usize..6, 2usize..6).prop_map(|(r, c)| Graph::grid2d(r, c).unwrap()),
        (2usize..25, 0.15f64..0.9, any::<u64>()).prop_map(|(n, p, s)| Graph::erdos_renyi(n, p, s).unwrap()),
        (6usize..30, 0.0f64..1.0, any::<u64>()).prop_map(|(n, b, s)| Graph::watts_strogatz(n, 4, b, s).unwrap()),
    ]
}

fn graph_with_l() -> impl Strategy<Value = (Graph, Vec<f64>)> {
    graph().prop_flat_map(|g| {
        let n = g.n();
        (Just(g), prop::collection::vec(0.01f64..100.0, n))
    })
}

fn row_sums_ok(k: &TransitionKernel<f64>) -> bool {
    (0..k.n()).all(|v| (k.row(v).iter().sum::<f64>() - 1.0).abs() <= 1e-12 && k.row(v).iter().all(|&p| p >= 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graphs_are_simple_symmetric_and_connected(g in graph()) {
        prop_assert!(g.is_connected());
        for v in 0..g.n() {
            let ns = g.neighbors(v).unwrap();
            prop_assert!(!ns.contains(&v));
            prop_assert!(ns.windows(2).all(|w| w[0] < w[1]));
            for &u in ns {
                prop_assert!(g.has_edge(u, v));
            }
        }
        let degree_sum: usize = (0..g.n()).map(|v| g.degree(v).unwrap()).sum();
        prop_assert_eq!(degree_sum, 2 * g.edge_count());
    }

    #[test]
    fn random_generators_are_deterministic(n in 5usize..40, s in any::<u64>()) {
        let a = Graph::erdos_renyi(n, 0.4, s).unwrap();
        let b = Graph::erdos_renyi(n, 0.4, s).unwrap();
        prop_assert_eq!(a.edges().collect::<Vec<_>>(), b.edges().collect::<Vec<_>>());
        let a = Graph::watts_strogatz(n.max(6), 4, 0.3, s).unwrap();
        let b = Graph::watts_strogatz(n.max(6), 4, 0.3, s).unwrap();
        prop_assert_eq!(a.edges().collect::<Vec<_>>(), b.edges().collect::<Vec<_>>());
    }

    #[test]
    fn edge_list_round_trips(g in graph()) {
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = Graph::read_edge_list(buf.as_slice()).unwrap();
        prop_assert_eq!(back.n(), g.n());
        prop_assert_eq!(back.edges().collect::<Vec<_>>(), g.edges().collect::<Vec<_>>());
    }

    #[test]
    fn mh_kernels_are_stochastic_and_reversible((g, l) in graph_with_l(), lambda in 0.0f64..=1.0) {
        let uniform = vec![1.0 / g.n() as f64; g.n()];
        let cases = [
            (build_uniform_mh::<f64>(&g).unwrap(), uniform),
            (build_weighted_mh(&g, &l).unwrap(), weighted_target(&l)),
            (build_mixed_mh(&g, &l, lambda).unwrap(), mixed_target(&l, lambda)),
        ];
        for (k, pi) in &cases {
            prop_assert!(row_sums_ok(k));
            prop_assert!(detailed_balance_residual(k, pi).unwrap() <= 1e-12);
            let fixed: f64 = k.matrix().left_mul(pi).iter().zip(pi).map(|(a, b)| (a - b).abs()).sum();
            prop_assert!(fixed <= 1e-12);
        }
    }

    #[test]
    fn mh_moves_only_along_edges((g, l) in graph_with_l()) {
        let k = build_weighted_mh(&g, &l).unwrap();
        for v in 0..g.n() {
            for u in 0..g.n() {
                if u != v && !g.has_edge(u, v) {
                    prop_assert_eq!(k.get(v, u), 0.0);
                }
            }
        }
    }

    #[test]
    fn mhlj_is_stochastic_with_a_unique_stationary_law(
        (g, l) in graph_with_l(),
        p_j in 0.0f64..=1.0,
        p_d in 0.05f64..0.99,
        r in 1usize..6,
    ) {
        let k = build_mhlj_matrix(&g, &l, JumpParams::new(p_j, p_d, r).unwrap()).unwrap();
        prop_assert!(row_sums_ok(&k));
        let pi = stationary_distribution(&k, PowerOptions::default()).unwrap();
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let fixed: f64 = k.matrix().left_mul(&pi).iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(fixed <= 1e-10);
    }

    #[test]
    fn tv_is_a_metric(
        raw in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), 1..20),
    ) {
        let norm = |xs: Vec<f64>| {
            let s: f64 = xs.iter().sum::<f64>() + 1e-9;
            xs.into_iter().map(|x| (x + 1e-9 / 20.0) / s).collect::<Vec<_>>()
        };
        let p = norm(raw.iter().map(|t| t.0).collect());
        let q = norm(raw.iter().map(|t| t.1).collect());
        let w = norm(raw.iter().map(|t| t.2).collect());
        let pq = tv_distance(&p, &q).unwrap();
        prop_assert!(tv_distance(&p, &p).unwrap() == 0.0);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
        prop_assert!((pq - tv_distance(&q, &p).unwrap()).abs() < 1e-15);
        prop_assert!(pq <= tv_distance(&p, &w).unwrap() + tv_distance(&w, &q).unwrap() + 1e-12);
    }
}
