use super::Network;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Edge weight used when building an incidence matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    Unweighted,
    /// Maximum mass flow rate of each pipe.
    Flow,
    /// Water mass held in each pipe.
    Mass,
}

/// Node × edge incidence with `+√w` at the target and `−√w` at the source.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedIncidence {
    pub weighting: Weighting,
    matrix: CsrMatrix,
}

impl WeightedIncidence {
    pub fn from_edges(n: usize, edges: &[(usize, usize)], weights: &[f64], weighting: Weighting) -> Self {
        assert_eq!(edges.len(), weights.len());
        let mut triplets = Vec::with_capacity(2 * edges.len());
        for (e, (&(s, t), &w)) in edges.iter().zip(weights).enumerate() {
            let r = w.sqrt();
            triplets.push((t, e, r));
            triplets.push((s, e, -r));
        }
        Self {
            weighting,
            matrix: CsrMatrix::from_triplets(n, edges.len(), &triplets),
        }
    }

    pub fn node_count(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn edge_count(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn entry(&self, node: usize, edge: usize) -> f64 {
        self.matrix.get(node, edge)
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}

pub fn incidence(net: &Network, weighting: Weighting) -> WeightedIncidence {
    let weights: Vec<f64> = net
        .pipes()
        .iter()
        .map(|p| match weighting {
            Weighting::Unweighted => 1.0,
            Weighting::Flow => p.max_flow,
            Weighting::Mass => p.water_mass,
        })
        .collect();
    WeightedIncidence::from_edges(net.node_count(), &net.edges(), &weights, weighting)
}

/// Weighted graph Laplacian `M_w M_wᵀ`.
pub fn laplacian(incidence: &WeightedIncidence) -> CsrMatrix {
    incidence.matrix.mul_transpose(&incidence.matrix)
}

/// Splits a Laplacian into its degree diagonal and off-diagonal part
/// `W = L − D` (the negated weighted adjacency).
pub fn degree_and_adjacency(laplacian: &CsrMatrix) -> (Vec<f64>, CsrMatrix) {
    let degree = laplacian.diagonal();
    let off: Vec<_> = laplacian.iter().filter(|&(r, c, _)| r != c).collect();
    (
        degree,
        CsrMatrix::from_triplets(laplacian.nrows(), laplacian.ncols(), &off),
    )
}

/// Diagonal of the node mass matrix: each node's own mass plus half the
/// water of every incident pipe, i.e. `m_i + ½ L_m,ii`.
pub fn node_masses(net: &Network) -> Result<Vec<f64>> {
    let mut mass: Vec<f64> = net.nodes().iter().map(|n| n.mass).collect();
    for p in net.pipes() {
        mass[p.source] += 0.5 * p.water_mass;
        mass[p.target] += 0.5 * p.water_mass;
    }
    if let Some(i) = mass.iter().position(|&m| m <= 0.0) {
        return Err(Error::validation(
            &net.nodes()[i].id,
            "node has zero total mass (no own mass and no incident pipe water)",
        ));
    }
    Ok(mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::example_grid;
    use crate::network::{Node, Pipe};
    use proptest::prelude::*;

    #[test]
    fn unweighted_incidence_of_example_grid() {
        let m = incidence(&example_grid(), Weighting::Unweighted);
        let expected = [
            [-1.0, 0.0, 0.0, 0.0],
            [1.0, -1.0, -1.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, -1.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        for (i, row) in expected.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_eq!(m.entry(i, j), v, "({i}, {j})");
            }
        }
    }

    #[test]
    fn flow_weighting_takes_square_root() {
        let net = Network::new(
            vec![Node::new("a").with_mass(1.0), Node::new("b").with_mass(1.0)],
            vec![Pipe::new("p", 0, 1).with_flow(4.0)],
            vec![],
            vec![],
        )
        .unwrap();
        let m = incidence(&net, Weighting::Flow);
        assert_eq!((m.entry(0, 0), m.entry(1, 0)), (-2.0, 2.0));
        let l = laplacian(&m);
        assert_eq!(l.to_dense(), vec![vec![4.0, -4.0], vec![-4.0, 4.0]]);
    }

    #[test]
    fn flow_laplacian_degree_of_example_grid() {
        let l = laplacian(&incidence(&example_grid(), Weighting::Flow));
        let expected = [0.5, 1.0, 0.2, 0.4, 0.1];
        for (d, e) in l.diagonal().iter().zip(expected) {
            assert!((d - e).abs() < 1e-15);
        }
        let (_, w) = degree_and_adjacency(&l);
        assert!((w.get(1, 3) + 0.3).abs() < 1e-15);
        assert_eq!(w.get(0, 2), 0.0);
        assert_eq!(w.diagonal(), vec![0.0; 5]);
    }

    #[test]
    fn node_masses_half_incident_pipes() {
        let net = Network::new(
            vec![Node::new("a"), Node::new("hub"), Node::new("c")],
            vec![
                Pipe::new("p", 0, 1).with_water_mass(4.0),
                Pipe::new("q", 1, 2).with_water_mass(6.0),
            ],
            vec![],
            vec![],
        )
        .unwrap();
        let m = node_masses(&net).unwrap();
        assert_eq!(m, vec![2.0, 5.0, 3.0]);
        assert_eq!(m.iter().sum::<f64>(), net.total_water_mass());
    }

    #[test]
    fn node_masses_explicit() {
        assert_eq!(node_masses(&example_grid()).unwrap(), vec![3.0, 3.0, 3.0, 6.0, 1.0]);
    }

    fn random_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>, Vec<f64>)> {
        (2usize..9).prop_flat_map(|n| {
            let tree = proptest::collection::vec((0.0f64..1.0, 0.01f64..5.0), n - 1);
            let extra = proptest::collection::vec((0..n, 0..n, 0.01f64..5.0), 0..4);
            let x = proptest::collection::vec(-10.0f64..10.0, n);
            (Just(n), tree, extra, x).prop_map(|(n, tree, extra, x)| {
                let mut edges: Vec<(usize, usize, f64)> = tree
                    .iter()
                    .enumerate()
                    .map(|(i, &(u, w))| (((u * (i + 1) as f64) as usize).min(i), i + 1, w))
                    .collect();
                edges.extend(extra.into_iter().filter(|(a, b, _)| a != b));
                (n, edges, x)
            })
        })
    }

    proptest! {
        #[test]
        fn laplacian_quadratic_form_matches_edge_sum((n, edges, x) in random_graph()) {
            let pairs: Vec<_> = edges.iter().map(|&(a, b, _)| (a, b)).collect();
            let w: Vec<_> = edges.iter().map(|e| e.2).collect();
            let inc = WeightedIncidence::from_edges(n, &pairs, &w, Weighting::Flow);
            let l = laplacian(&inc);
            prop_assert!(l.is_symmetric(1e-12));
            for r in l.mul_vec(&vec![1.0; n]) {
                prop_assert!(r.abs() < 1e-12);
            }
            let unweighted = WeightedIncidence::from_edges(n, &pairs, &vec![1.0; pairs.len()], Weighting::Unweighted);
            for c in 0..inc.edge_count() {
                let col: f64 = (0..n).map(|i| unweighted.entry(i, c)).sum();
                prop_assert_eq!(col, 0.0);
            }
            let lx = l.mul_vec(&x);
            let form: f64 = x.iter().zip(&lx).map(|(a, b)| a * b).sum();
            let direct: f64 = edges.iter().map(|&(a, b, w)| w * (x[a] - x[b]).powi(2)).sum();
            prop_assert!(form >= -1e-9);
            prop_assert!((form - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
            let (deg, adj) = degree_and_adjacency(&l);
            for (a, b, _) in &edges {
                prop_assert!(adj.get(*a, *b) < 0.0);
            }
            for i in 0..n {
                let incident: f64 = edges.iter().filter(|e| e.0 == i || e.1 == i).map(|e| e.2).sum();
                prop_assert!((deg[i] - incident).abs() < 1e-12);
            }
        }
    }
}
