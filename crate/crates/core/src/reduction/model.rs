use std::collections::HashMap;

use super::cluster::Clustering;
use crate::advection::{CourantReport, FlowField, ThermalGraph};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::sparse::CsrMatrix;

/// Cluster-level edge: the union of all original edges joining two clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedEdge {
    /// Nominal (source, target) clusters, taken from the first member edge.
    pub clusters: (usize, usize),
    /// Original edges with +1 when aligned with the nominal orientation.
    pub members: Vec<(usize, f64)>,
}

/// Node contraction `P_n` and signed edge aggregation `P_e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reducers {
    clustering: Clustering,
    edges: Vec<ReducedEdge>,
    /// Reduced edge and sign per original edge; `None` for internal edges.
    edge_map: Vec<Option<(usize, f64)>>,
}

/// Builds `P_n` and `P_e` for a clustering of `net`.
pub fn build_reducers(clustering: &Clustering, net: &Network) -> Result<Reducers> {
    build_reducers_for_edges(clustering, &net.edges())
}

pub fn build_reducers_for_edges(clustering: &Clustering, edges: &[(usize, usize)]) -> Result<Reducers> {
    let a = clustering.assignment();
    if let Some(&(s, t)) = edges.iter().find(|&&(s, t)| s.max(t) >= a.len()) {
        return Err(Error::InvalidArgument(format!(
            "edge ({s}, {t}) outside a clustering of {} nodes",
            a.len()
        )));
    }
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut reduced: Vec<ReducedEdge> = Vec::new();
    let mut edge_map = Vec::with_capacity(edges.len());
    for (e, &(s, t)) in edges.iter().enumerate() {
        let (cs, ct) = (a[s], a[t]);
        if cs == ct {
            edge_map.push(None);
            continue;
        }
        let r = *index.entry((cs.min(ct), cs.max(ct))).or_insert_with(|| {
            reduced.push(ReducedEdge {
                clusters: (cs, ct),
                members: Vec::new(),
            });
            reduced.len() - 1
        });
        let sign = if reduced[r].clusters == (cs, ct) { 1.0 } else { -1.0 };
        reduced[r].members.push((e, sign));
        edge_map.push(Some((r, sign)));
    }
    Ok(Reducers {
        clustering: clustering.clone(),
        edges: reduced,
        edge_map,
    })
}

impl Reducers {
    pub fn clustering(&self) -> &Clustering {
        &self.clustering
    }

    pub fn k(&self) -> usize {
        self.clustering.k()
    }

    /// Number of reduced edges `l`.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[ReducedEdge] {
        &self.edges
    }

    pub fn edge_map(&self) -> &[Option<(usize, f64)>] {
        &self.edge_map
    }

    /// Reduced edges as cluster index pairs.
    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| e.clusters).collect()
    }

    /// `P_n`, k × n.
    pub fn node_matrix(&self) -> CsrMatrix {
        let a = self.clustering.assignment();
        let triplets: Vec<_> = a.iter().enumerate().map(|(i, &c)| (c, i, 1.0)).collect();
        CsrMatrix::from_triplets(self.k(), a.len(), &triplets)
    }

    /// `P_e`, l × m.
    pub fn edge_matrix(&self) -> CsrMatrix {
        let triplets: Vec<_> = self
            .edge_map
            .iter()
            .enumerate()
            .filter_map(|(e, m)| m.map(|(r, s)| (r, e, s)))
            .collect();
        CsrMatrix::from_triplets(self.edges.len(), self.edge_map.len(), &triplets)
    }

    /// `P_e u`: signed sum of member flows per reduced edge.
    pub fn reduce_edge_flows(&self, flows: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.edges.len()];
        self.reduce_edge_flows_into(flows, &mut out);
        out
    }

    pub fn reduce_edge_flows_into(&self, flows: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (m, f) in self.edge_map.iter().zip(flows) {
            if let Some((r, s)) = m {
                out[*r] += s * f;
            }
        }
    }

    /// `P_n v`: per-cluster sums.
    pub fn sum_nodes(&self, values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.k()];
        for (&c, v) in self.clustering.assignment().iter().zip(values) {
            out[c] += v;
        }
        out
    }
}

/// Mass-weighted cluster averages `(P_n M_d P_nᵀ)⁻¹ P_n M_d x`.
pub fn reduce_state(x: &[f64], mass: &[f64], clustering: &Clustering) -> Result<Vec<f64>> {
    let n = clustering.node_count();
    for (what, len) in [("state", x.len()), ("node masses", mass.len())] {
        if len != n {
            return Err(Error::Dimension {
                what,
                expected: n,
                got: len,
            });
        }
    }
    let mut acc = vec![0.0; clustering.k()];
    let mut m_acc = vec![0.0; clustering.k()];
    for ((&c, xi), mi) in clustering.assignment().iter().zip(x).zip(mass) {
        acc[c] += mi * xi;
        m_acc[c] += mi;
    }
    Ok(acc.iter().zip(&m_acc).map(|(a, m)| a / m).collect())
}

/// `P_nᵀ x̃`: every node takes its cluster's value.
pub fn lift_state(reduced: &[f64], clustering: &Clustering) -> Result<Vec<f64>> {
    if reduced.len() != clustering.k() {
        return Err(Error::Dimension {
            what: "reduced state",
            expected: clustering.k(),
            got: reduced.len(),
        });
    }
    Ok(clustering.assignment().iter().map(|&c| reduced[c]).collect())
}

/// Aggregated system on the cluster graph.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub reducers: Reducers,
    /// Cluster masses, cut edges, summed heat loss and loss-weighted ambient.
    pub graph: ThermalGraph,
    /// Summed maximum flow per reduced edge, kg/s.
    pub max_flow: Vec<f64>,
    /// Target step, s.
    pub dt: f64,
    pub courant_max: f64,
}

/// Builds the reduced operators of `net` for the given reducers.
pub fn reduce_model(net: &Network, reducers: &Reducers, dt: f64) -> Result<ReducedModel> {
    if reducers.clustering().node_count() != net.node_count() || reducers.edge_map().len() != net.pipe_count() {
        return Err(Error::Dimension {
            what: "clustering nodes",
            expected: net.node_count(),
            got: reducers.clustering().node_count(),
        });
    }
    let full = ThermalGraph::from_network(net)?;
    let mass = reducers.sum_nodes(&full.mass);
    let heat_loss = reducers.sum_nodes(&full.heat_loss);
    let weighted_ambient = reducers.sum_nodes(
        &full.heat_loss.iter().zip(&full.ambient).map(|(h, t)| h * t).collect::<Vec<_>>(),
    );
    let mass_ambient = reducers.sum_nodes(
        &full.mass.iter().zip(&full.ambient).map(|(m, t)| m * t).collect::<Vec<_>>(),
    );
    let ambient = (0..reducers.k())
        .map(|c| {
            if heat_loss[c] > 0.0 {
                weighted_ambient[c] / heat_loss[c]
            } else {
                mass_ambient[c] / mass[c]
            }
        })
        .collect();
    let mut max_flow = vec![0.0; reducers.edge_count()];
    for (m, p) in reducers.edge_map().iter().zip(net.pipes()) {
        if let Some((r, _)) = m {
            max_flow[*r] += p.max_flow.abs();
        }
    }
    let graph = ThermalGraph {
        mass,
        edges: reducers.edge_pairs(),
        heat_loss,
        ambient,
    };
    let courant_max = CourantReport::from_parts(&graph.mass, &graph.edges, &max_flow, dt).max;
    Ok(ReducedModel {
        reducers: reducers.clone(),
        graph,
        max_flow,
        dt,
        courant_max,
    })
}

impl ReducedModel {
    pub fn k(&self) -> usize {
        self.reducers.k()
    }

    /// `max(diag(½·dt·M̃_d⁻¹·L̃_f))` on aggregated maximum flows.
    pub fn courant(&self, dt: f64) -> CourantReport {
        CourantReport::from_parts(&self.graph.mass, &self.graph.edges, &self.max_flow, dt)
    }

    /// Sum over clusters of `dt·(cut flow)/(cluster mass)`.
    pub fn courant_sum(&self, dt: f64) -> f64 {
        2.0 * self.courant(dt).per_node.iter().sum::<f64>()
    }

    /// Aggregates a full-order flow snapshot. Inlet temperatures are
    /// inflow-weighted within each cluster.
    pub fn flow_field(&self, full: &FlowField) -> Result<FlowField> {
        let mut out = FlowField::zeros(self.k(), self.reducers.edge_count());
        self.flow_field_into(full, &mut out)?;
        Ok(out)
    }

    pub fn flow_field_into(&self, full: &FlowField, out: &mut FlowField) -> Result<()> {
        let n = self.reducers.clustering().node_count();
        full.check_dims(n, self.reducers.edge_map().len())?;
        out.check_dims(self.k(), self.reducers.edge_count())?;
        self.reducers.reduce_edge_flows_into(&full.edge_flow, &mut out.edge_flow);
        for v in out
            .node_outflow
            .iter_mut()
            .chain(out.node_inflow.iter_mut())
            .chain(out.inlet_temp.iter_mut())
        {
            *v = 0.0;
        }
        for (i, &c) in self.reducers.clustering().assignment().iter().enumerate() {
            out.node_outflow[c] += full.node_outflow[i];
            out.node_inflow[c] += full.node_inflow[i];
            out.inlet_temp[c] += full.node_inflow[i] * full.inlet_temp[i];
        }
        for (t, &u) in out.inlet_temp.iter_mut().zip(&out.node_inflow) {
            *t = if u > 0.0 { *t / u } else { 0.0 };
        }
        Ok(())
    }

    pub fn reduce_state(&self, x: &[f64], full_mass: &[f64]) -> Result<Vec<f64>> {
        reduce_state(x, full_mass, self.reducers.clustering())
    }

    pub fn lift_state(&self, reduced: &[f64]) -> Result<Vec<f64>> {
        lift_state(reduced, self.reducers.clustering())
    }
}

/// Largest reduced Courant number at step `dt`.
pub fn reduced_courant_max(model: &ReducedModel, dt: f64) -> f64 {
    model.courant(dt).max
}
