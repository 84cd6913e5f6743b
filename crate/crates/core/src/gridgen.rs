//! Seeded synthetic radial (tree) grids.
//!
//! Nodes are added one at a time; each new node either extends the most
//! recent branch or sprouts from a random earlier node. Every leaf, and a
//! random share of inner nodes, gets a consumer with a random design flow. Pipes are sized for a design velocity
//! from the design flow they carry, and heat loss is proportional to the pipe
//! length lumped at each node.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{Attachment, Network, Node, Pipe, WATER_DENSITY};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub nodes: usize,
    pub seed: u64,
    /// Probability that a new node extends the previous one.
    pub chain_probability: f64,
    /// Probability that a node with children also serves a consumer.
    /// Leaves always do.
    pub interior_consumer_probability: f64,
    /// Pipe length range, m.
    pub length: (f64, f64),
    /// Consumer design flow range, kg/s.
    pub consumer_flow: (f64, f64),
    /// Velocity at design flow, m/s.
    pub design_velocity: f64,
    /// Smallest pipe cross-section, m².
    pub min_area: f64,
    /// Heat loss per metre of pipe, W/(m·K).
    pub loss_per_metre: f64,
    /// °C
    pub ambient_temp: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nodes: 1000,
            seed: 1,
            chain_probability: 0.6,
            interior_consumer_probability: 0.5,
            length: (20.0, 120.0),
            consumer_flow: (0.05, 0.5),
            design_velocity: 1.0,
            min_area: 7.0e-4,
            loss_per_metre: 0.2,
            ambient_temp: 8.0,
        }
    }
}

pub fn generate(spec: &GridSpec) -> Result<Network> {
    let bad = |what: &str| Err(Error::InvalidArgument(format!("grid spec: {what}")));
    if spec.nodes < 2 {
        return bad("at least two nodes are required");
    }
    if !(0.0..=1.0).contains(&spec.chain_probability) || !(0.0..=1.0).contains(&spec.interior_consumer_probability) {
        return bad("probabilities must lie in [0, 1]");
    }
    for (name, (lo, hi)) in [("length", spec.length), ("consumer_flow", spec.consumer_flow)] {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return bad(&format!("{name} range must satisfy 0 < lo ≤ hi"));
        }
    }
    if !(spec.design_velocity > 0.0 && spec.min_area > 0.0 && spec.loss_per_metre >= 0.0) {
        return bad("velocity and area must be positive, loss non-negative");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.nodes;
    let mut parent = vec![usize::MAX; n];
    let mut children = vec![0usize; n];
    for i in 1..n {
        let p = if rng.random_bool(spec.chain_probability) {
            i - 1
        } else {
            rng.random_range(0..i)
        };
        parent[i] = p;
        children[p] += 1;
    }
    let length: Vec<f64> = (0..n)
        .map(|_| rng.random_range(spec.length.0..=spec.length.1))
        .collect();
    let mut consumers = Vec::new();
    let mut design = vec![0.0; n];
    for i in 1..n {
        let serves = children[i] == 0 || rng.random_bool(spec.interior_consumer_probability);
        if serves {
            let flow = rng.random_range(spec.consumer_flow.0..=spec.consumer_flow.1);
            design[i] = flow;
            consumers.push(Attachment {
                node: i,
                schedule: format!("c{i}"),
                design_flow: Some(flow),
            });
        }
    }
    // Children always carry larger indices, so a reverse sweep accumulates subtrees.
    let mut carried = design.clone();
    for i in (1..n).rev() {
        carried[parent[i]] += carried[i];
    }

    let mut loss_length = vec![0.0; n];
    let pipes: Vec<Pipe> = (1..n)
        .map(|i| {
            let area = (carried[i] / (WATER_DENSITY * spec.design_velocity)).max(spec.min_area);
            loss_length[i] += 0.5 * length[i];
            loss_length[parent[i]] += 0.5 * length[i];
            Pipe::new(format!("p{i}"), parent[i], i)
                .with_flow(carried[i])
                .with_water_mass(WATER_DENSITY * area * length[i])
                .with_geometry(length[i], area)
        })
        .collect();
    let nodes = (0..n)
        .map(|i| Node {
            id: format!("n{i}"),
            mass: 0.0,
            heat_loss_coeff: spec.loss_per_metre * loss_length[i],
            ambient_temp: spec.ambient_temp,
        })
        .collect();
    Network::new(nodes, pipes, consumers, vec![Attachment::new(0, "supply")])
}
