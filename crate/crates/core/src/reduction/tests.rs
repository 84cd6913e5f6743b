use super::*;
use crate::advection::{assemble_graph, courant, FlowField, ThermalGraph};
use crate::network::fixtures::{example_grid, path};
use crate::network::{incidence, laplacian, node_masses, propagate_flows, Attachment, Network, Node, Pipe, Weighting};
use proptest::prelude::*;

fn fig4() -> (Network, Clustering) {
    let net = example_grid();
    let c = spectral_cluster(&net, 2, &ClusterOptions::default()).unwrap();
    (net, c)
}

/// `cut·(1/m₁ + 1/m₂)` for a bisection given as a bitmask.
fn bisection_cost(mass: &[f64], edges: &[(usize, usize)], w: &[f64], mask: u32) -> Option<f64> {
    let side = |i: usize| mask >> i & 1 == 1;
    let (mut m1, mut m2) = (0.0, 0.0);
    for (i, m) in mass.iter().enumerate() {
        if side(i) {
            m1 += m
        } else {
            m2 += m
        }
    }
    if m1 == 0.0 || m2 == 0.0 {
        return None;
    }
    let cut: f64 = edges
        .iter()
        .zip(w)
        .filter(|(&(a, b), _)| side(a) != side(b))
        .map(|(_, w)| w)
        .sum();
    Some(cut / m1 + cut / m2)
}

fn brute_force_best(mass: &[f64], edges: &[(usize, usize)], w: &[f64]) -> (u32, f64) {
    let n = mass.len();
    (1..(1u32 << n) - 1)
        .filter(|mask| mask & 1 == 1)
        .filter_map(|mask| bisection_cost(mass, edges, w, mask).map(|c| (mask, c)))
        .fold((0, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b })
}

#[test]
fn fig4_bisection() {
    let (net, c) = fig4();
    assert_eq!(c.assignment(), &[0, 0, 0, 1, 1]);
    assert_eq!(c.cluster_mass(), &[9.0, 7.0]);
    let red = build_reducers(&c, &net).unwrap();
    assert_eq!(red.edge_count(), 1);
    assert_eq!(red.edges()[0].members, vec![(2, 1.0)]);
    let model = reduce_model(&net, &red, 1.0).unwrap();
    assert!((model.courant_sum(1.0) - (0.3 / 9.0 + 0.3 / 7.0)).abs() < 1e-15);
    assert!((model.courant_sum(1.0) - 0.0762).abs() < 5e-5);

    let m = node_masses(&net).unwrap();
    let w: Vec<f64> = net.pipes().iter().map(|p| p.max_flow).collect();
    let (mask, best) = brute_force_best(&m, &net.edges(), &w);
    assert_eq!(mask, 0b00111);
    assert!((best - model.courant_sum(1.0)).abs() < 1e-15);
}

#[test]
fn fig4_node_matrix() {
    let (net, c) = fig4();
    let pn = build_reducers(&c, &net).unwrap().node_matrix().to_dense();
    assert_eq!(pn[0], vec![1.0, 1.0, 1.0, 0.0, 0.0]);
    assert_eq!(pn[1], vec![0.0, 0.0, 0.0, 1.0, 1.0]);
}

#[test]
fn fig4_reduced_courant() {
    let (net, c) = fig4();
    let model = reduce_model(&net, &build_reducers(&c, &net).unwrap(), 1.0).unwrap();
    // ½·dt·diag(M̃⁻¹L̃): L̃ = [[.3, −.3], [−.3, .3]], M̃ = diag(9, 7).
    let expected = (0.5 * 0.3 / 9.0_f64).max(0.5 * 0.3 / 7.0);
    assert!((reduced_courant_max(&model, 1.0) - expected).abs() < 1e-15);
    assert!((model.courant_max - expected).abs() < 1e-15);
    assert!((reduced_courant_max(&model, 2.0) - 2.0 * expected).abs() < 1e-15);
}

#[test]
fn six_node_path_halves() {
    let net = path(6, 1.0, 1.0);
    let c = spectral_cluster(&net, 2, &ClusterOptions::default()).unwrap();
    assert_eq!(c.assignment(), &[0, 0, 0, 1, 1, 1]);
    let m = node_masses(&net).unwrap();
    let (mask, _) = brute_force_best(&m, &net.edges(), &[1.0; 5]);
    assert_eq!(mask, 0b000111);
}

#[test]
fn identity_clustering() {
    let net = example_grid();
    let c = spectral_cluster(&net, 5, &ClusterOptions::default()).unwrap();
    assert_eq!(c.assignment(), &[0, 1, 2, 3, 4]);
    let red = build_reducers(&c, &net).unwrap();
    assert_eq!(red.edge_count(), net.pipe_count());
    let pe = red.edge_matrix().to_dense();
    for (i, row) in pe.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert_eq!(*v, if i == j { 1.0 } else { 0.0 });
        }
    }
    let model = reduce_model(&net, &red, 1.0).unwrap();
    assert_eq!(model.courant_max, courant(&net, None, 1.0).unwrap().max);
}

#[test]
fn identity_reduction_reproduces_operators() {
    let mut nodes: Vec<Node> = (0..5).map(|i| Node::new(format!("n{i}")).with_mass(2.0 + i as f64)).collect();
    for (i, n) in nodes.iter_mut().enumerate() {
        n.heat_loss_coeff = 10.0 * i as f64;
        n.ambient_temp = 5.0 + i as f64;
    }
    let pipes = vec![
        Pipe::new("a", 0, 1).with_flow(0.5),
        Pipe::new("b", 1, 2).with_flow(0.2),
        Pipe::new("c", 1, 3).with_flow(0.3),
        Pipe::new("d", 3, 4).with_flow(0.1),
    ];
    let net = Network::new(
        nodes,
        pipes,
        vec![Attachment::new(2, "x"), Attachment::new(4, "y")],
        vec![Attachment::new(0, "s")],
    )
    .unwrap();
    let red = build_reducers(&Clustering::identity(&node_masses(&net).unwrap()), &net).unwrap();
    let model = reduce_model(&net, &red, 1.0).unwrap();
    let flows = propagate_flows(&net, &[0.2, 0.1]).unwrap();
    let mut inlet = vec![0.0; 5];
    inlet[0] = 90.0;
    let ff = FlowField::from_edge_flows(5, &net.edges(), flows, inlet);
    let full = assemble_graph(&ThermalGraph::from_network(&net).unwrap(), &ff).unwrap();
    let reduced = assemble_graph(&model.graph, &model.flow_field(&ff).unwrap()).unwrap();
    assert_eq!(full, reduced);
}

#[test]
fn parallel_cut_edges_aggregate() {
    let mass = [1.0, 1.0, 1.0, 1.0];
    let c = Clustering::from_labels(&[0, 0, 1, 1], &mass).unwrap();
    let edges = [(0, 1), (0, 2), (3, 1), (2, 3)];
    let red = build_reducers_for_edges(&c, &edges).unwrap();
    assert_eq!(red.edge_count(), 1);
    // (0→2) aligned, (3→1) reversed; orientation-corrected sum.
    assert_eq!(red.reduce_edge_flows(&[9.0, 0.1, -0.2, 9.0]), vec![0.1 + 0.2]);
}

#[test]
fn reduced_flows_stay_balanced() {
    let (net, c) = fig4();
    let model = reduce_model(&net, &build_reducers(&c, &net).unwrap(), 1.0).unwrap();
    let flows = propagate_flows(&net, &[0.2, 0.2, 0.1]).unwrap();
    let ff = FlowField::from_edge_flows(5, &net.edges(), flows, vec![80.0, 0.0, 0.0, 0.0, 0.0]);
    let rf = model.flow_field(&ff).unwrap();
    rf.check_balance(&model.graph.edges).unwrap();
    assert!((rf.edge_flow[0] - 0.3).abs() < 1e-15);
    assert_eq!(rf.node_inflow, vec![0.5, 0.0]);
    assert_eq!(rf.inlet_temp, vec![80.0, 0.0]);
}

#[test]
fn reduce_and_lift_state() {
    let c = Clustering::from_labels(&[0, 0], &[1.0, 3.0]).unwrap();
    let x = reduce_state(&[100.0, 80.0], &[1.0, 3.0], &c).unwrap();
    assert_eq!(x, vec![85.0]);
    assert_eq!(lift_state(&x, &c).unwrap(), vec![85.0, 85.0]);
    assert!(reduce_state(&[1.0], &[1.0, 3.0], &c).is_err());
    assert!(lift_state(&[1.0, 2.0], &c).is_err());
}

#[test]
fn clustering_table_round_trip() {
    let (net, c) = fig4();
    let meta = ClusterMeta {
        k: 2,
        dt: Some(600.0),
        c_target: None,
        seed: Some(42),
    };
    let table = ClusterTable::from_clustering(&net, &c, meta);
    let text = table.write();
    assert!(text.starts_with("# k=2 dt=600 c_target=none seed=42\nnode,cluster\nn1,0\n"));
    let parsed = ClusterTable::parse(&text).unwrap();
    assert_eq!(parsed, table);
    assert_eq!(parsed.to_clustering(&net).unwrap(), c);
}

#[test]
fn clustering_table_errors() {
    let net = example_grid();
    for bad in [
        "",
        "node,cluster\nn1,0\n",
        "# dt=1\nnode,cluster\n",
        "# k=x\nnode,cluster\n",
        "# k=1 colour=red\nnode,cluster\n",
        "# k=1\nid,cluster\n",
        "# k=1\nnode,cluster\nn1\n",
        "# k=1\nnode,cluster\nn1,-1\n",
    ] {
        assert!(matches!(ClusterTable::parse(bad), Err(crate::Error::Syntax(_))), "{bad:?}");
    }
    let resolve = |t: &str| ClusterTable::parse(t).unwrap().to_clustering(&net);
    assert!(resolve("# k=1\nnode,cluster\nn1,0\nn2,0\nn3,0\nn4,0\n").is_err());
    assert!(resolve("# k=1\nnode,cluster\nn1,0\nn2,0\nn3,0\nn4,0\nn5,0\nn5,0\n").is_err());
    assert!(resolve("# k=1\nnode,cluster\nn1,0\nn2,0\nn3,0\nn4,0\nn9,0\n").is_err());
    assert!(resolve("# k=3\nnode,cluster\nn1,0\nn2,0\nn3,0\nn4,1\nn5,1\n").is_err());
    assert!(resolve("# k=2\nnode,cluster\nn1,0\nn2,0\nn3,0\nn4,1\nn5,1\n").is_ok());
}

#[test]
fn noncontiguous_clusters_are_split() {
    let mass = [1.0; 5];
    let c = Clustering::from_labels(&[0, 1, 0, 1, 1], &mass).unwrap();
    let edges = [(0, 1), (1, 2), (2, 3), (3, 4)];
    assert!(!c.is_contiguous(&edges));
    let s = c.split_disconnected(&edges, &mass);
    assert_eq!(s.assignment(), &[0, 1, 2, 3, 3]);
    assert!(s.is_contiguous(&edges));
}

#[test]
fn choose_k_tiny_step_keeps_every_node() {
    let net = example_grid();
    let choice = choose_k(&net, 1.0, 0.9, None, &ClusterOptions::default()).unwrap();
    assert_eq!(choice.k(), 5);
    assert!(choice.feasible);
    assert_eq!(choice.evaluations.len(), 1);
}

#[test]
fn choose_k_infeasible_step_is_flagged() {
    let net = example_grid();
    // Two clusters give C̃ = ½·0.3·dt/7; dt = 100 puts that above 1.
    let choice = choose_k(&net, 100.0, 0.9, None, &ClusterOptions::default()).unwrap();
    assert!(!choice.feasible);
    assert_eq!(choice.k(), 2);
}

fn random_tree(n: usize, seed: u64) -> Network {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let nodes = (0..n).map(|i| Node::new(format!("n{i}"))).collect();
    let pipes = (1..n)
        .map(|i| {
            Pipe::new(format!("p{i}"), rng.random_range(0..i), i)
                .with_flow(rng.random_range(0.1..5.0))
                .with_water_mass(rng.random_range(50.0..500.0))
        })
        .collect();
    Network::new(nodes, pipes, vec![], vec![Attachment::new(0, "s")]).unwrap()
}

#[test]
fn choose_k_on_synthetic_tree() {
    let net = random_tree(200, 7);
    let full = courant(&net, None, 1.0).unwrap().max;
    // Full model at 3·target, so some reduction is needed.
    let dt = 3.0 * 0.9 / full;
    let choice = choose_k(&net, dt, 0.9, None, &ClusterOptions::default()).unwrap();
    assert!(choice.feasible);
    assert!(choice.k() > 2 && choice.k() < 200, "k = {}", choice.k());
    assert!(choice.model.courant_max <= 0.9);
    let budget = (200f64).log2().ceil() as usize + 5;
    assert!(choice.evaluations.len() <= budget);
    assert!(choice.clustering.is_contiguous(&net.edges()));
}

#[test]
fn spectral_scaling_invariance() {
    let net = random_tree(40, 3);
    let opts = ClusterOptions::default();
    let scaled = {
        let pipes = net.pipes().iter().map(|p| p.clone().with_flow(p.max_flow * 3.5)).collect();
        Network::new(net.nodes().to_vec(), pipes, vec![], net.producers().to_vec()).unwrap()
    };
    let mass = node_masses(&net).unwrap();
    let l1 = laplacian(&incidence(&net, Weighting::Flow));
    let l2 = laplacian(&incidence(&scaled, Weighting::Flow));
    let e1 = generalized_eigs(&l1, &mass, 6).unwrap();
    let e2 = generalized_eigs(&l2, &mass, 6).unwrap();
    for (a, b) in e1.values.iter().zip(&e2.values) {
        assert!((3.5 * a - b).abs() < 1e-10 * b.max(1.0));
    }
    assert_eq!(
        spectral_cluster(&net, 6, &opts).unwrap(),
        spectral_cluster(&scaled, 6, &opts).unwrap()
    );
}

fn small_graph() -> impl Strategy<Value = (Vec<f64>, Vec<(usize, usize)>, Vec<f64>)> {
    (3usize..=10).prop_flat_map(|n| {
        (
            prop::collection::vec(0.5f64..20.0, n),
            prop::collection::vec((0..n, 0.05f64..3.0), n - 1),
            prop::collection::vec((0..n, 0..n, 0.05f64..3.0), 0..4),
        )
            .prop_map(move |(mass, tree, extra)| {
                let mut edges = Vec::new();
                let mut w = Vec::new();
                for (i, (p, f)) in tree.into_iter().enumerate() {
                    edges.push((p % (i + 1), i + 1));
                    w.push(f);
                }
                for (a, b, f) in extra {
                    if a != b {
                        edges.push((a, b));
                        w.push(f);
                    }
                }
                (mass, edges, w)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn centered_indicator_gives_courant_sum((mass, edges, w) in small_graph(), mask in 1u32..512) {
        let n = mass.len();
        let mask = mask & ((1 << n) - 1);
        prop_assume!(mask != 0 && mask != (1 << n) - 1);
        let side = |i: usize| mask >> i & 1 == 1;
        let m1: f64 = (0..n).filter(|&i| side(i)).map(|i| mass[i]).sum();
        let m2: f64 = (0..n).filter(|&i| !side(i)).map(|i| mass[i]).sum();
        let cut: f64 = edges.iter().zip(&w).filter(|(&(a, b), _)| side(a) != side(b)).map(|(_, f)| f).sum();
        let ratio = |v: &[f64]| {
            let num: f64 = edges.iter().zip(&w).map(|(&(a, b), f)| f * (v[a] - v[b]).powi(2)).sum();
            let den: f64 = v.iter().zip(&mass).map(|(x, m)| m * x * x).sum();
            num / den
        };
        let pm: Vec<f64> = (0..n).map(|i| if side(i) { 1.0 } else { -1.0 }).collect();
        prop_assert!((ratio(&pm) - 4.0 * cut / (m1 + m2)).abs() < 1e-10);
        let centered: Vec<f64> = (0..n).map(|i| if side(i) { 1.0 / m1 } else { -1.0 / m2 }).collect();
        prop_assert!((ratio(&centered) - (cut / m1 + cut / m2)).abs() < 1e-10 * (1.0 + cut / m1 + cut / m2));
    }

    #[test]
    fn fiedler_value_bounds_best_bisection((mass, edges, w) in small_graph()) {
        let inc = crate::network::WeightedIncidence::from_edges(mass.len(), &edges, &w, Weighting::Flow);
        let pairs = generalized_eigs(&laplacian(&inc), &mass, 2).unwrap();
        let (_, best) = brute_force_best(&mass, &edges, &w);
        prop_assert!(pairs.values[1] <= best * (1.0 + 1e-12));
    }

    #[test]
    fn reduction_conserves_mass_and_enthalpy(
        labels in prop::collection::vec(0usize..4, 1..30),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = labels.len();
        let mass: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..100.0)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(10.0..100.0)).collect();
        let c = Clustering::from_labels(&labels, &mass).unwrap();
        let total: f64 = mass.iter().sum();
        prop_assert!((c.cluster_mass().iter().sum::<f64>() - total).abs() <= 1e-12 * total);
        let xr = reduce_state(&x, &mass, &c).unwrap();
        let before: f64 = mass.iter().zip(&x).map(|(m, t)| m * t).sum();
        let after: f64 = c.cluster_mass().iter().zip(&xr).map(|(m, t)| m * t).sum();
        prop_assert!((before - after).abs() <= 1e-12 * before);
        let lifted = lift_state(&xr, &c).unwrap();
        let round: f64 = mass.iter().zip(&lifted).map(|(m, t)| m * t).sum();
        prop_assert!((before - round).abs() <= 1e-12 * before);
    }
}
