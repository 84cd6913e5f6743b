//! District-energy network graph: nodes hold water, pipes carry flow.
//!
//! A node's effective thermal mass is its own mass plus half of the water
//! held in every pipe incident to it (see [`node_masses`]).

mod file;
mod flows;
mod matrices;
mod preprocess;

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

pub use file::{parse_network, write_network};
pub use flows::{node_demands, propagate_flows, FlowPropagator};
pub use matrices::{
    degree_and_adjacency, incidence, laplacian, node_masses, Weighting, WeightedIncidence,
};
pub use preprocess::{merge_short_pipes, oversample};

/// Density used to check pipe water mass against its geometry, kg/m³.
pub const WATER_DENSITY: f64 = 1000.0;
/// Relative tolerance between a declared water mass and ρ·A·length.
pub const MASS_GEOMETRY_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    /// Water mass lumped at the node itself, kg. Pipe water is added on top.
    pub mass: f64,
    /// Heat loss coefficient to the surroundings, W/K.
    pub heat_loss_coeff: f64,
    /// Surroundings temperature, °C.
    pub ambient_temp: f64,
}

impl Node {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            mass: 0.0,
            heat_loss_coeff: 0.0,
            ambient_temp: 0.0,
        }
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pipe {
    pub id: String,
    /// Index of the source node; file orientation is the positive-flow direction.
    pub source: usize,
    pub target: usize,
    /// Maximum mass flow rate, kg/s.
    pub max_flow: f64,
    /// Water held in the pipe, kg.
    pub water_mass: f64,
    /// m
    pub length: Option<f64>,
    /// m²
    pub area: Option<f64>,
}

impl Pipe {
    pub fn new(id: impl Into<String>, source: usize, target: usize) -> Self {
        Self {
            id: id.into(),
            source,
            target,
            max_flow: 0.0,
            water_mass: 0.0,
            length: None,
            area: None,
        }
    }

    pub fn with_flow(mut self, max_flow: f64) -> Self {
        self.max_flow = max_flow;
        self
    }

    pub fn with_water_mass(mut self, water_mass: f64) -> Self {
        self.water_mass = water_mass;
        self
    }

    pub fn with_geometry(mut self, length: f64, area: f64) -> Self {
        self.length = Some(length);
        self.area = Some(area);
        self
    }
}

/// A consumer or producer attached to a node, driven by a named schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub node: usize,
    pub schedule: String,
    /// Nominal peak flow, kg/s. Only meaningful for consumers.
    pub design_flow: Option<f64>,
}

impl Attachment {
    pub fn new(node: usize, schedule: impl Into<String>) -> Self {
        Self {
            node,
            schedule: schedule.into(),
            design_flow: None,
        }
    }
}

/// Immutable, validated pipe network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    pipes: Vec<Pipe>,
    consumers: Vec<Attachment>,
    producers: Vec<Attachment>,
}

impl Network {
    /// Validates and builds a network. Parallel pipes between the same pair
    /// of nodes are merged into one (masses, flows and areas summed).
    pub fn new(
        nodes: Vec<Node>,
        pipes: Vec<Pipe>,
        consumers: Vec<Attachment>,
        producers: Vec<Attachment>,
    ) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::validation("network", "no nodes"));
        }
        let mut seen = HashMap::with_capacity(n);
        for (i, node) in nodes.iter().enumerate() {
            if seen.insert(node.id.as_str(), i).is_some() {
                return Err(Error::validation(&node.id, "duplicate node id"));
            }
            check_nonneg(&node.id, "mass", node.mass)?;
            check_nonneg(&node.id, "heat_loss_coeff", node.heat_loss_coeff)?;
            if !node.ambient_temp.is_finite() {
                return Err(Error::validation(&node.id, "ambient_temp is not finite"));
            }
        }
        let mut pipe_ids = HashMap::with_capacity(pipes.len());
        for pipe in &pipes {
            if pipe_ids.insert(pipe.id.as_str(), ()).is_some() {
                return Err(Error::validation(&pipe.id, "duplicate pipe id"));
            }
            validate_pipe(pipe, n)?;
        }
        for (kind, list) in [("consumer", &consumers), ("producer", &producers)] {
            for a in list.iter() {
                if a.node >= n {
                    return Err(Error::validation(
                        format!("{kind} {}", a.schedule),
                        format!("node index {} out of range", a.node),
                    ));
                }
                if let Some(f) = a.design_flow {
                    check_nonneg(&a.schedule, "design_flow", f)?;
                }
            }
        }

        let pipes = merge_parallel(pipes);
        let net = Self {
            nodes,
            pipes,
            consumers,
            producers,
        };

        let labels = net.component_labels();
        if let Some(stray) = labels.iter().position(|&c| c != 0) {
            return Err(Error::validation(
                &net.nodes[stray].id,
                "graph is disconnected (node unreachable from the first node)",
            ));
        }
        node_masses(&net)?;
        Ok(net)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn pipes(&self) -> &[Pipe] {
        &self.pipes
    }

    pub fn consumers(&self) -> &[Attachment] {
        &self.consumers
    }

    pub fn producers(&self) -> &[Attachment] {
        &self.producers
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn pipe_count(&self) -> usize {
        self.pipes.len()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Edge list as (source, target) index pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.pipes.iter().map(|p| (p.source, p.target)).collect()
    }

    /// Own node masses plus all pipe water, kg.
    pub fn total_water_mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.mass).sum::<f64>()
            + self.pipes.iter().map(|p| p.water_mass).sum::<f64>()
    }

    /// Connected-component label per node, numbered in order of first node.
    pub fn component_labels(&self) -> Vec<usize> {
        component_labels(self.nodes.len(), &self.edges())
    }

    /// Node-to-pipe adjacency: for each node, (pipe index, neighbour).
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for (e, p) in self.pipes.iter().enumerate() {
            adj[p.source].push((e, p.target));
            adj[p.target].push((e, p.source));
        }
        adj
    }

    /// Copy with every node's heat loss coefficient set to zero.
    pub fn without_losses(&self) -> Network {
        let mut net = self.clone();
        for node in &mut net.nodes {
            node.heat_loss_coeff = 0.0;
        }
        net
    }
}

/// Connected components of an undirected graph given by an edge list.
pub fn component_labels(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        stack.push(start);
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if label[v] == usize::MAX {
                    label[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    label
}

fn check_nonneg(entity: &str, field: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::validation(
            entity,
            format!("{field} must be finite and non-negative, got {value}"),
        ));
    }
    Ok(())
}

fn validate_pipe(pipe: &Pipe, n: usize) -> Result<()> {
    if pipe.source >= n || pipe.target >= n {
        return Err(Error::validation(&pipe.id, "endpoint index out of range"));
    }
    if pipe.source == pipe.target {
        return Err(Error::validation(&pipe.id, "source and target are the same node"));
    }
    check_nonneg(&pipe.id, "max_flow", pipe.max_flow)?;
    check_nonneg(&pipe.id, "water_mass", pipe.water_mass)?;
    for (field, value) in [("length", pipe.length), ("area", pipe.area)] {
        if let Some(v) = value {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::validation(
                    &pipe.id,
                    format!("{field} must be positive, got {v}"),
                ));
            }
        }
    }
    if let (Some(len), Some(area)) = (pipe.length, pipe.area) {
        let expected = WATER_DENSITY * area * len;
        if (pipe.water_mass - expected).abs() > MASS_GEOMETRY_TOLERANCE * expected {
            return Err(Error::validation(
                &pipe.id,
                format!(
                    "water_mass {} inconsistent with density*area*length = {expected}",
                    pipe.water_mass
                ),
            ));
        }
    }
    Ok(())
}

fn merge_parallel(pipes: Vec<Pipe>) -> Vec<Pipe> {
    let mut slot: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut out: Vec<Pipe> = Vec::with_capacity(pipes.len());
    for pipe in pipes {
        let key = (pipe.source.min(pipe.target), pipe.source.max(pipe.target));
        match slot.get(&key) {
            Some(&i) => {
                let kept = &mut out[i];
                kept.id = format!("{}+{}", kept.id, pipe.id);
                kept.max_flow += pipe.max_flow;
                kept.water_mass += pipe.water_mass;
                kept.area = match (kept.area, pipe.area) {
                    (Some(a), Some(b)) => Some(a + b),
                    _ => None,
                };
                if kept.area.is_none() {
                    kept.length = None;
                }
            }
            None => {
                slot.insert(key, out.len());
                out.push(pipe);
            }
        }
    }
    out
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn parallel_pipes_are_merged() {
        let nodes = vec![Node::new("a"), Node::new("b")];
        let pipes = vec![
            Pipe::new("p", 0, 1).with_flow(0.1).with_water_mass(2.0),
            Pipe::new("q", 1, 0).with_flow(0.2).with_water_mass(3.0),
        ];
        let net = Network::new(nodes, pipes, vec![], vec![]).unwrap();
        assert_eq!(net.pipe_count(), 1);
        let p = &net.pipes()[0];
        assert_eq!((p.source, p.target), (0, 1));
        assert!((p.max_flow - 0.3).abs() < 1e-15);
        assert_eq!(p.water_mass, 5.0);
    }

    #[test]
    fn disconnected_graph_names_a_stray_node() {
        let nodes = vec![
            Node::new("a").with_mass(1.0),
            Node::new("b").with_mass(1.0),
            Node::new("c").with_mass(1.0),
        ];
        let pipes = vec![Pipe::new("p", 0, 1)];
        let err = Network::new(nodes, pipes, vec![], vec![]).unwrap_err();
        assert!(err.to_string().contains("c"), "{err}");
    }

    #[test]
    fn self_loop_rejected() {
        let nodes = vec![Node::new("a").with_mass(1.0)];
        let err = Network::new(nodes, vec![Pipe::new("p", 0, 0)], vec![], vec![]).unwrap_err();
        assert!(matches!(err, Error::Validation { ref entity, .. } if entity == "p"));
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let nodes = vec![Node::new("a"), Node::new("b")];
        let pipe = Pipe::new("p", 0, 1)
            .with_water_mass(50.0)
            .with_geometry(10.0, 0.01);
        assert!(Network::new(nodes.clone(), vec![pipe], vec![], vec![]).is_err());
        let pipe = Pipe::new("p", 0, 1)
            .with_water_mass(100.0)
            .with_geometry(10.0, 0.01);
        assert!(Network::new(nodes, vec![pipe], vec![], vec![]).is_ok());
    }

    #[test]
    fn example_grid_shape() {
        let net = example_grid();
        assert_eq!(net.node_count(), 5);
        assert_eq!(net.pipe_count(), 4);
        assert_eq!(net.component_labels(), vec![0; 5]);
    }

    #[test]
    fn without_losses_zeroes_coefficients() {
        let mut nodes = vec![Node::new("a").with_mass(1.0), Node::new("b").with_mass(1.0)];
        nodes[0].heat_loss_coeff = 3.0;
        let net = Network::new(nodes, vec![Pipe::new("p", 0, 1)], vec![], vec![]).unwrap();
        assert!(net.without_losses().nodes().iter().all(|n| n.heat_loss_coeff == 0.0));
    }
}
