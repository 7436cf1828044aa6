use std::collections::BTreeSet;

use gnnctl::network::{
    build_support, distance_components, generate_geometric_graph, generate_system, knn_graph,
    perturb_system, sample_connected_system, system_distance, DistributedSystem, Graph,
};
use gnnctl::numerics::{inf_norm, spectral_norm, sym_eig};
use gnnctl::{Matrix, RngStream};
use proptest::prelude::*;

/// Edge set from an exhaustive pairwise-distance scan, symmetrized.
fn brute_force_knn(pos: &[[f64; 2]], k: usize) -> BTreeSet<(usize, usize)> {
    let n = pos.len();
    let mut edges = BTreeSet::new();
    for i in 0..n {
        let mut d: Vec<(f64, usize)> = Vec::new();
        for j in 0..n {
            if i != j {
                d.push((
                    (pos[i][0] - pos[j][0]).powi(2) + (pos[i][1] - pos[j][1]).powi(2),
                    j,
                ));
            }
        }
        for _ in 0..k {
            let (at, &(_, j)) = d
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    a.1 .0
                        .partial_cmp(&b.1 .0)
                        .unwrap()
                        .then(a.1 .1.cmp(&b.1 .1))
                })
                .unwrap();
            edges.insert((i.min(j), i.max(j)));
            d.remove(at);
        }
    }
    edges
}

#[test]
fn two_nodes_single_edge() {
    let g = generate_geometric_graph(2, 1, &mut RngStream::new(0, 0)).unwrap();
    assert_eq!(g.edges, vec![(0, 1)]);
    assert!(generate_geometric_graph(3, 3, &mut RngStream::new(0, 0)).is_err());
}

#[test]
fn unit_square_corners() {
    // slightly stretched so every corner has a unique nearest neighbour
    let pos = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.1], [1.0, 1.1]];
    let g = knn_graph(&pos, 1).unwrap();
    assert_eq!(
        g.edges.iter().copied().collect::<BTreeSet<_>>(),
        brute_force_knn(&pos, 1)
    );
    assert_eq!(g.edges, vec![(0, 1), (2, 3)]);
}

#[test]
fn knn_matches_brute_force_on_random_points() {
    let mut rng = RngStream::new(21, 0);
    for &(n, k) in &[(10, 2), (30, 5), (50, 5)] {
        let pos: Vec<[f64; 2]> = (0..n).map(|_| [rng.uniform(), rng.uniform()]).collect();
        let g = knn_graph(&pos, k).unwrap();
        assert_eq!(
            g.edges.iter().copied().collect::<BTreeSet<_>>(),
            brute_force_knn(&pos, k)
        );
        assert!(g.degrees().iter().all(|&d| d >= k));
    }
}

#[test]
fn geometric_graph_is_deterministic() {
    let a = generate_geometric_graph(50, 5, &mut RngStream::new(4, 2)).unwrap();
    let b = generate_geometric_graph(50, 5, &mut RngStream::new(4, 2)).unwrap();
    assert_eq!(a, b);
    assert!(a.degrees().iter().all(|&d| d >= 5));
    let pos = a.positions.as_ref().unwrap();
    assert!(pos
        .iter()
        .all(|p| (0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1])));
}

#[test]
fn support_examples() {
    let path = build_support(&Graph::new(2, [(0, 1)]).unwrap()).unwrap();
    let want = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
    assert!((&path - &want).max_abs() < 1e-12);

    let tri = build_support(&Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap()).unwrap();
    let ev = sym_eig(&tri).unwrap().eigenvalues;
    for (got, want) in ev.iter().zip([-0.5, -0.5, 1.0]) {
        assert!((got - want).abs() < 1e-12);
    }
    assert!((tri[(0, 1)] - 0.5).abs() < 1e-15);

    let disconnected = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
    assert!(build_support(&disconnected).is_err());
}

#[test]
fn support_of_random_graph_has_unit_norm_and_zero_diagonal() {
    let (g, d) = sample_connected_system(50, 5, 0.995, 1.0, &mut RngStream::new(3, 0)).unwrap();
    assert!((spectral_norm(&d.support).unwrap() - 1.0).abs() < 1e-9);
    let n = g.n;
    for i in 0..n {
        assert_eq!(d.support[(i, i)], 0.0);
        for j in 0..n {
            assert_eq!(d.support[(i, j)], d.support[(j, i)]);
        }
    }
    let edges: BTreeSet<_> = g.edges.iter().copied().collect();
    for i in 0..n {
        for j in i + 1..n {
            assert_eq!(
                d.support[(i, j)] != 0.0,
                edges.contains(&(i, j)),
                "sparsity at ({i}, {j})"
            );
        }
    }
    assert!(d.respects_sparsity(&g));
}

fn commutator(a: &Matrix, b: &Matrix) -> f64 {
    (&a.matmul(b).unwrap() - &b.matmul(a).unwrap()).frobenius()
}

#[test]
fn system_norms_and_shared_eigenvectors() {
    let mut rng = RngStream::new(8, 0);
    let g = generate_geometric_graph(30, 5, &mut rng).unwrap();
    let d = generate_system(&g, 0.995, 1.0, 1, 1, &mut rng).unwrap();
    assert!((spectral_norm(&d.sys_graph).unwrap() - 0.995).abs() < 1e-8);
    assert!((spectral_norm(&d.ctrl_graph).unwrap() - 1.0).abs() < 1e-8);
    assert!(commutator(&d.sys_graph, &d.support) < 1e-8);
    assert!(commutator(&d.ctrl_graph, &d.support) < 1e-8);
    assert!(commutator(&d.sys_graph, &d.ctrl_graph) < 1e-8);
    assert_eq!(d.sys_feat, Matrix::identity(1));
    assert_eq!(d.ctrl_feat, Matrix::identity(1));

    let d2 = generate_system(&g, 0.5, 2.0, 2, 3, &mut rng).unwrap();
    assert_eq!((d2.f_dim, d2.g_dim), (2, 3));
    assert!((spectral_norm(&d2.sys_graph).unwrap() - 0.5).abs() < 1e-8);
}

#[test]
fn system_json_round_trip() {
    let (_, d) = sample_connected_system(12, 3, 0.9, 1.0, &mut RngStream::new(1, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sys.json");
    d.to_json_file(&path).unwrap();
    assert_eq!(DistributedSystem::from_json_file(&path).unwrap(), d);
}

#[test]
fn distance_examples() {
    let (_, d) = sample_connected_system(10, 3, 0.9, 1.0, &mut RngStream::new(2, 0)).unwrap();
    assert_eq!(system_distance(&d, &d).unwrap(), 0.0);
    let mut shifted = d.clone();
    shifted.sys_graph = &d.sys_graph + &Matrix::identity(10).scale(0.1);
    assert!((system_distance(&d, &shifted).unwrap() - 0.1).abs() < 1e-12);

    let p = perturb_system(&d, 0.03, &mut RngStream::new(2, 1)).unwrap();
    let oracle = [
        spectral_norm(&(&d.support - &p.support)).unwrap(),
        spectral_norm(&(&d.sys_graph - &p.sys_graph)).unwrap(),
        inf_norm(&(&d.sys_feat - &p.sys_feat)),
        spectral_norm(&(&d.ctrl_graph - &p.ctrl_graph)).unwrap(),
        inf_norm(&(&d.ctrl_feat - &p.ctrl_feat)),
    ];
    assert_eq!(distance_components(&d, &p).unwrap(), oracle);
    assert_eq!(
        system_distance(&d, &p).unwrap(),
        oracle.iter().copied().fold(0.0, f64::max)
    );

    let (_, other) = sample_connected_system(11, 3, 0.9, 1.0, &mut RngStream::new(2, 0)).unwrap();
    assert!(system_distance(&d, &other).is_err());
}

#[test]
fn perturbation_hits_requested_distance() {
    let (_, d) = sample_connected_system(20, 5, 0.995, 1.0, &mut RngStream::new(5, 0)).unwrap();
    for eps in [1e-3, 1e-2, 1e-1] {
        let p = perturb_system(&d, eps, &mut RngStream::new(5, 7)).unwrap();
        assert!((system_distance(&d, &p).unwrap() - eps).abs() < 1e-9);
        assert!(p.support.is_symmetric(1e-12));
        assert_eq!(p.sys_feat, d.sys_feat);
    }
    let same = perturb_system(&d, 0.0, &mut RngStream::new(5, 7)).unwrap();
    assert_eq!(system_distance(&d, &same).unwrap(), 0.0);
    assert!(perturb_system(&d, -1e-3, &mut RngStream::new(5, 7)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distance_is_a_metric(seed in any::<u64>(), e1 in 0.0..0.2f64, e2 in 0.0..0.2f64) {
        let mut rng = RngStream::new(seed, 0);
        let (_, a) = sample_connected_system(8, 3, 0.9, 1.0, &mut rng).unwrap();
        let b = perturb_system(&a, e1, &mut rng).unwrap();
        let c = perturb_system(&b, e2, &mut rng).unwrap();
        let ab = system_distance(&a, &b).unwrap();
        prop_assert!((ab - system_distance(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!(system_distance(&a, &c).unwrap() <= ab + system_distance(&b, &c).unwrap() + 1e-9);
    }
}
