//! Mass-balance flow propagation on radial (tree) networks.

use super::Network;
use crate::error::{Error, Result};

/// Precomputed traversal of a tree network rooted at its single producer.
/// Each pipe's flow is the total demand of the subtree below it.
#[derive(Debug, Clone)]
pub struct FlowPropagator {
    root: usize,
    /// Nodes in breadth-first order from the root.
    order: Vec<usize>,
    /// For every non-root node: the pipe to its parent and +1 when the pipe's
    /// nominal direction points away from the root.
    uplink: Vec<Option<(usize, f64)>>,
    parent: Vec<usize>,
    node_count: usize,
}

impl FlowPropagator {
    pub fn new(net: &Network) -> Result<Self> {
        let hint = "supply per-pipe flows explicitly (hydraulic solving is out of scope)";
        let root = match net.producers() {
            [p] => p.node,
            [] => return Err(Error::Topology(format!("network has no producer; {hint}"))),
            _ => {
                return Err(Error::Topology(format!(
                    "network has {} producers; {hint}",
                    net.producers().len()
                )))
            }
        };
        let n = net.node_count();
        if net.pipe_count() != n - 1 {
            return Err(Error::Topology(format!(
                "network contains a cycle ({} pipes for {n} nodes); {hint}",
                net.pipe_count()
            )));
        }
        let adj = net.adjacency();
        let mut uplink = vec![None; n];
        let mut parent = vec![usize::MAX; n];
        let mut visited = vec![false; n];
        let mut order = Vec::with_capacity(n);
        visited[root] = true;
        order.push(root);
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &(e, v) in &adj[u] {
                if !visited[v] {
                    visited[v] = true;
                    parent[v] = u;
                    let sign = if net.pipes()[e].source == u { 1.0 } else { -1.0 };
                    uplink[v] = Some((e, sign));
                    order.push(v);
                }
            }
        }
        Ok(Self {
            root,
            order,
            uplink,
            parent,
            node_count: n,
        })
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Signed per-pipe flow for the given per-node withdrawals, kg/s.
    pub fn edge_flows(&self, node_demand: &[f64], pipe_count: usize) -> Vec<f64> {
        let mut flows = vec![0.0; pipe_count];
        self.edge_flows_into(node_demand, &mut vec![0.0; self.node_count], &mut flows);
        flows
    }

    /// Allocation-free variant; `subtree` is scratch space of node length.
    pub fn edge_flows_into(&self, node_demand: &[f64], subtree: &mut [f64], flows: &mut [f64]) {
        assert_eq!(node_demand.len(), self.node_count);
        subtree.copy_from_slice(node_demand);
        for &v in self.order.iter().rev() {
            if let Some((e, sign)) = self.uplink[v] {
                flows[e] = sign * subtree[v];
                subtree[self.parent[v]] += subtree[v];
            }
        }
    }
}

/// Sums consumer demands onto their nodes.
pub fn node_demands(net: &Network, consumer_demand: &[f64]) -> Result<Vec<f64>> {
    if consumer_demand.len() != net.consumers().len() {
        return Err(Error::Dimension {
            what: "consumer demands",
            expected: net.consumers().len(),
            got: consumer_demand.len(),
        });
    }
    let mut out = vec![0.0; net.node_count()];
    for (c, &d) in net.consumers().iter().zip(consumer_demand) {
        if !(d >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "demand of consumer {} must be non-negative, got {d}",
                c.schedule
            )));
        }
        out[c.node] += d;
    }
    Ok(out)
}

/// Per-pipe flows on a tree network from per-consumer demands (in the order
/// of `net.consumers()`). Positive values follow the pipe's nominal direction.
pub fn propagate_flows(net: &Network, consumer_demand: &[f64]) -> Result<Vec<f64>> {
    let prop = FlowPropagator::new(net)?;
    let demand = node_demands(net, consumer_demand)?;
    Ok(prop.edge_flows(&demand, net.pipe_count()))
}
