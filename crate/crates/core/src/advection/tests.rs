use super::*;
use crate::network::fixtures::example_grid;
use crate::network::{incidence, propagate_flows, Attachment, Node, Pipe};
use proptest::prelude::*;

fn example_flow_field(net: &Network, supply: f64) -> FlowField {
    let flows = propagate_flows(net, &[0.2, 0.2, 0.1]).unwrap();
    let mut ff = FlowField::zeros(5, 4);
    ff.edge_flow = flows;
    ff.node_outflow = vec![0.0, 0.0, 0.2, 0.2, 0.1];
    ff.node_inflow[0] = 0.5;
    ff.inlet_temp[0] = supply;
    ff
}

#[test]
fn upwind_selection_follows_flow_sign() {
    let net = example_grid();
    let inc = incidence(&net, Weighting::Unweighted);
    let mo = upwind_incidence(&inc, &[0.5, 0.2, 0.3, 0.1]);
    let ones: Vec<_> = mo.iter().map(|(n, e, _)| (e, n)).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    assert_eq!(ones, vec![(0, 0), (1, 1), (2, 1), (3, 3)]);

    let mo = upwind_incidence(&inc, &[0.5, 0.2, 0.3, -0.1]);
    assert_eq!(mo.get(3, 3), 0.0);
    assert_eq!(mo.get(4, 3), 1.0);

    assert_eq!(upwind_incidence(&inc, &[0.0; 4]).nnz(), 0);
}

#[test]
fn two_node_transport() {
    let (flow, m) = (0.4, 8.0);
    let graph = ThermalGraph {
        mass: vec![m, m],
        edges: vec![(0, 1)],
        heat_loss: vec![0.0; 2],
        ambient: vec![0.0; 2],
    };
    let ff = FlowField {
        edge_flow: vec![flow],
        node_outflow: vec![0.0, flow],
        node_inflow: vec![flow, 0.0],
        inlet_temp: vec![70.0, 0.0],
    };
    let model = assemble_graph(&graph, &ff).unwrap();
    let x = [90.0, 60.0];
    let dx = model.derivative(&x);
    assert!((dx[1] - flow / m * (x[0] - x[1])).abs() < 1e-14);
    assert!((dx[0] - flow / m * (70.0 - x[0])).abs() < 1e-14);
}

#[test]
fn zero_flow_is_pure_cooling() {
    let mut nodes: Vec<Node> = (0..3).map(|i| Node::new(format!("v{i}")).with_mass(100.0)).collect();
    for (i, n) in nodes.iter_mut().enumerate() {
        n.heat_loss_coeff = 50.0 * (i + 1) as f64;
        n.ambient_temp = 5.0;
    }
    let net = Network::new(nodes, vec![Pipe::new("a", 0, 1), Pipe::new("b", 1, 2)], vec![], vec![]).unwrap();
    let model = assemble(&net, &FlowField::zeros(3, 2)).unwrap();
    let x = [80.0, 60.0, 40.0];
    let dx = model.derivative(&x);
    for i in 0..3 {
        let k = 50.0 * (i + 1) as f64 / (WATER_HEAT_CAPACITY * 100.0);
        assert!((dx[i] + k * (x[i] - 5.0)).abs() < 1e-15);
    }
    let lossless = assemble(&net.without_losses(), &FlowField::zeros(3, 2)).unwrap();
    assert!(lossless.sys.iter().all(|(_, _, v)| v == 0.0));
}

#[test]
fn uniform_supply_is_a_fixed_point() {
    let net = example_grid();
    let model = assemble(&net, &example_flow_field(&net, 87.5)).unwrap();
    for d in model.derivative(&[87.5; 5]) {
        assert!(d.abs() < 1e-14, "{d}");
    }
}

#[test]
fn metzler_structure() {
    let net = example_grid();
    let mut ff = example_flow_field(&net, 80.0);
    ff.edge_flow[3] = -0.1;
    ff.node_outflow = vec![0.0, 0.0, 0.2, 0.4, 0.0];
    ff.node_inflow = vec![0.5, 0.0, 0.0, 0.0, 0.1];
    ff.check_balance(&net.edges()).unwrap();
    let model = assemble(&net, &ff).unwrap();
    let adjacency_nnz = 2 * net.pipe_count();
    assert!(model.sys.nnz() <= adjacency_nnz + net.node_count());
    for i in 0..5 {
        let (cols, vals) = model.sys.row(i);
        let mut sum = 0.0;
        for (&c, &v) in cols.iter().zip(vals) {
            if c != i {
                assert!(v >= 0.0);
            }
            sum += v;
        }
        assert!(sum <= 1e-15, "row {i} sums to {sum}");
    }
}

#[test]
fn discretized_pipe_reproduces_upwind_stencil() {
    let segments = 6;
    let (flow, seg_mass) = (2.0, 10.0);
    let nodes = (0..=segments).map(|i| Node::new(format!("z{i}"))).collect();
    let pipes = (0..segments)
        .map(|i| Pipe::new(format!("s{i}"), i, i + 1).with_flow(flow).with_water_mass(seg_mass))
        .collect();
    let net = Network::new(nodes, pipes, vec![], vec![]).unwrap();
    let ff = FlowField::from_edge_flows(
        segments + 1,
        &net.edges(),
        vec![flow; segments],
        vec![50.0; segments + 1],
    );
    let model = assemble(&net, &ff).unwrap();
    // Interior nodes hold one segment of water: v/Δz = ṁ/m.
    let x: Vec<f64> = (0..=segments).map(|i| 100.0 - 3.0 * (i * i) as f64).collect();
    let dx = model.derivative(&x);
    for i in 1..segments {
        let expected = flow / seg_mass * (x[i - 1] - x[i]);
        assert!((dx[i] - expected).abs() < 1e-13);
    }
}

#[test]
fn flow_scaling_scales_advective_part() {
    let net = example_grid().without_losses();
    let ff = example_flow_field(&net, 80.0);
    let base = assemble(&net, &ff).unwrap();
    let alpha = 3.25;
    let mut scaled_ff = ff.clone();
    for v in scaled_ff
        .edge_flow
        .iter_mut()
        .chain(&mut scaled_ff.node_outflow)
        .chain(&mut scaled_ff.node_inflow)
    {
        *v *= alpha;
    }
    let scaled = assemble(&net, &scaled_ff).unwrap();
    for ((_, _, a), (_, _, b)) in base.sys.iter().zip(scaled.sys.iter()) {
        assert!((alpha * a - b).abs() < 1e-14);
    }
}

#[test]
fn energy_balance_identity() {
    let mut nodes: Vec<Node> = (0..5).map(|i| Node::new(format!("n{i}")).with_mass(2.0 + i as f64)).collect();
    for n in nodes.iter_mut() {
        n.heat_loss_coeff = 300.0;
        n.ambient_temp = 8.0;
    }
    let pipes = vec![
        Pipe::new("a", 0, 1).with_water_mass(4.0),
        Pipe::new("b", 1, 2).with_water_mass(4.0),
        Pipe::new("c", 1, 3).with_water_mass(4.0),
        Pipe::new("d", 3, 4).with_water_mass(4.0),
    ];
    let net = Network::new(nodes, pipes, vec![], vec![Attachment::new(0, "s")]).unwrap();
    let ff = FlowField::from_edge_flows(5, &net.edges(), vec![0.5, 0.2, 0.3, 0.1], vec![90.0; 5]);
    let model = assemble(&net, &ff).unwrap();
    let x = [85.0, 80.0, 70.0, 75.0, 60.0];
    let dx = model.derivative(&x);
    let lhs: f64 = model.mass.iter().zip(&dx).map(|(m, d)| m * d).sum();
    let rhs: f64 = (0..5)
        .map(|i| {
            ff.node_inflow[i] * ff.inlet_temp[i] - ff.node_outflow[i] * x[i]
                - 300.0 / WATER_HEAT_CAPACITY * (x[i] - 8.0)
        })
        .sum();
    assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
}

#[test]
fn courant_numbers_of_example_grid() {
    let report = courant(&example_grid(), None, 1.0).unwrap();
    let expected = [0.5 / 6.0, 1.0 / 6.0, 0.2 / 6.0, 0.4 / 12.0, 0.1 / 2.0];
    for (c, e) in report.per_node.iter().zip(expected) {
        assert!((c - e).abs() < 1e-15);
    }
    assert_eq!(report.argmax, 1);
    assert!((report.max - 0.1667).abs() < 1e-4);
    assert!(courant(&example_grid(), None, 0.0).unwrap().per_node.iter().all(|&c| c == 0.0));
}

#[test]
fn single_pipe_courant_is_dt_over_delay() {
    let (flow, water, dt) = (2.0, 500.0, 30.0);
    let net = Network::new(
        vec![Node::new("a"), Node::new("b")],
        vec![Pipe::new("p", 0, 1).with_flow(flow).with_water_mass(water)],
        vec![],
        vec![],
    )
    .unwrap();
    let report = courant(&net, None, dt).unwrap();
    let tau = water / flow;
    for c in report.per_node {
        assert!((c - dt / tau).abs() < 1e-15);
    }
}

#[test]
fn numerical_diffusion_values() {
    assert_eq!(numerical_diffusion(1.5, 3.0, 2.0), 0.0);
    assert_eq!(numerical_diffusion(1.0, 2.0, 0.0), 1.0);
    assert_eq!(numerical_diffusion(2.0, 1.0, 0.25), 0.5);
}

#[test]
fn imbalanced_flow_field_rejected() {
    let net = example_grid();
    let mut ff = example_flow_field(&net, 80.0);
    ff.node_outflow[4] = 0.2;
    assert!(ff.check_balance(&net.edges()).is_err());
    assert!(matches!(assemble(&net, &FlowField::zeros(4, 4)), Err(Error::Dimension { .. })));
}

proptest! {
    #[test]
    fn assembler_matches_literal_assembly(flows in proptest::collection::vec(prop_oneof![Just(0.0), -2.0f64..2.0], 4), steps in 1usize..4) {
        let mut nodes: Vec<Node> = (0..5).map(|i| Node::new(format!("n{i}")).with_mass(1.0 + i as f64)).collect();
        nodes[2].heat_loss_coeff = 1000.0;
        let pipes = vec![Pipe::new("a", 0, 1), Pipe::new("b", 1, 2), Pipe::new("c", 1, 3), Pipe::new("d", 3, 4)];
        let net = Network::new(nodes, pipes, vec![], vec![]).unwrap();
        let graph = ThermalGraph::from_network(&net).unwrap();
        let mut asm = Assembler::new(graph.clone());
        for s in 0..steps {
            let f: Vec<f64> = flows.iter().map(|v| if s % 2 == 1 { -v } else { *v }).collect();
            let ff = FlowField::from_edge_flows(5, &graph.edges, f, vec![60.0; 5]);
            let a = asm.update(&ff).unwrap().clone();
            let b = assemble_graph(&graph, &ff).unwrap();
            prop_assert_eq!(&a.input, &b.input);
            for i in 0..5 {
                for j in 0..5 {
                    prop_assert!((a.sys.get(i, j) - b.sys.get(i, j)).abs() < 1e-14);
                }
            }
        }
    }
}
