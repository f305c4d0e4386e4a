mod common;

use common::*;
use proptest::prelude::*;
use relloc::graph::{build_complete, build_cycle, build_erdos_renyi, Graph};

fn assert_spectrum_invariants(g: &Graph) {
    let s = g.spectrum().unwrap();
    let ev = s.eigenvalues();
    let n = g.node_count();
    assert_eq!(ev[0], 0.0);
    assert!(ev.windows(2).all(|w| w[0] <= w[1]));
    assert!(ev[1] > 0.0);
    assert!(s.max() <= 2.0 * g.max_degree() as f64 + 1e-9);
    let l = g.laplacian();
    let tol = 1e-8 * s.max().max(1.0);
    for k in 0..n {
        let v = s.eigenvectors().column(k);
        let r = (&l * v - v * ev[k]).norm();
        assert!(r <= tol, "eigenpair {k}: residual {r:e}");
    }
}

#[test]
fn gram_of_incidence_is_laplacian_for_every_family() {
    for family in FAMILIES {
        for n in [3, 8, 25] {
            let g = family_graph(family, n, 3);
            assert_eq!(g.incidence_matrix().gram(), g.laplacian_entries(), "{family} n={n}");
            let dense = laplacian_via_incidence(&g);
            let l = g.laplacian();
            for i in 0..g.node_count() {
                for j in 0..g.node_count() {
                    assert_eq!(dense[i][j], l[(i, j)]);
                }
            }
        }
    }
}

#[test]
fn annihilates_constants() {
    for family in FAMILIES {
        let g = family_graph(family, 17, 5);
        let ones = vec![1.0; g.node_count()];
        assert!(g.apply_incidence(&ones).iter().all(|&v| v == 0.0));
        assert!(g.apply_laplacian(&ones).iter().all(|&v| v == 0.0));
        let a = g.incidence_matrix();
        for e in 0..a.rows() {
            assert_eq!(a.row(e).iter().map(|&x| i32::from(x)).sum::<i32>(), 0);
        }
        let l = g.laplacian_entries();
        let n = g.node_count();
        for i in 0..n {
            assert_eq!(l[i * n..(i + 1) * n].iter().sum::<i64>(), 0);
        }
    }
}

#[test]
fn spectrum_invariants_across_families() {
    for family in FAMILIES {
        for n in [4, 30, 90] {
            assert_spectrum_invariants(&family_graph(family, n, 11));
        }
    }
}

#[test]
fn cycle_160_spectrum_matches_cosines() {
    let g = build_cycle(160).unwrap();
    assert_spectrum_invariants(&g);
    let mut want: Vec<f64> = (0..160)
        .map(|k| 2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 / 160.0).cos())
        .collect();
    want.sort_by(f64::total_cmp);
    let got = g.spectrum().unwrap();
    assert!(got.eigenvalues().iter().all(|&l| (0.0..=4.0 + 1e-12).contains(&l)));
    for (a, b) in got.eigenvalues().iter().zip(&want) {
        assert!((a - b).abs() < 1e-11, "{a} vs {b}");
    }
}

#[test]
fn spectrum_agrees_with_jacobi_oracle() {
    for (family, n) in [("complete", 4), ("cycle", 4), ("path", 9), ("torus", 16), ("erdos_renyi", 20)] {
        let g = family_graph(family, n, 2);
        let oracle = jacobi_eigenvalues(laplacian_via_incidence(&g));
        let got = g.spectrum().unwrap();
        for (a, b) in got.eigenvalues().iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "{family}: {a} vs {b}");
        }
    }
    let k4 = jacobi_eigenvalues(laplacian_via_incidence(&build_complete(4).unwrap()));
    for (a, b) in k4.iter().zip([0.0, 4.0, 4.0, 4.0]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn erdos_renyi_seeds_are_stable() {
    let a = build_erdos_renyi(40, 0.15, 123).unwrap();
    assert_eq!(a.edges(), build_erdos_renyi(40, 0.15, 123).unwrap().edges());
    assert_ne!(a.edges(), build_erdos_renyi(40, 0.15, 124).unwrap().edges());
}

proptest! {
    #[test]
    fn edge_list_round_trip(n in 2usize..40, p in 0.05f64..1.0, seed in any::<u64>()) {
        if let Ok(g) = build_erdos_renyi(n, p, seed) {
            let back = Graph::from_edge_list(&g.to_edge_list()).unwrap();
            prop_assert_eq!(back.edges(), g.edges());
            prop_assert_eq!(back.node_count(), g.node_count());
        }
    }

    #[test]
    fn random_graphs_keep_gram_identity(n in 2usize..30, p in 0.2f64..1.0, seed in any::<u64>()) {
        if let Ok(g) = build_erdos_renyi(n, p, seed) {
            prop_assert_eq!(g.incidence_matrix().gram(), g.laplacian_entries());
            let l = g.laplacian_entries();
            for i in 0..n {
                prop_assert_eq!(l[i * n + i], g.degree(i) as i64);
            }
        }
    }
}
