//! Upwind advection on a graph as a time-varying linear system
//!
//! ```text
//! ẋ = A(t)·x + B·(u_in ∘ x_in) + k ∘ T_amb
//! A(t) = M_d⁻¹ (M·U_d(t)·M_oᵀ − U_do(t)) − diag(k),   B = M_d⁻¹
//! ```
//!
//! where `M` is the unweighted incidence, `M_o` its upwind selection for the
//! current flow signs, `U_d` the signed edge flows, `U_do` the flows leaving
//! the network at each node and `k_i = h_i / (c_p·m_i)` the heat loss rate.

mod assembler;
mod diagnostics;

use crate::error::{Error, Result};
use crate::network::{node_masses, Network, Weighting, WeightedIncidence};
use crate::sparse::CsrMatrix;

pub use assembler::Assembler;
pub use diagnostics::{courant, numerical_diffusion, CourantReport};

/// Specific heat capacity of water, J/(kg·K).
pub const WATER_HEAT_CAPACITY: f64 = 4186.0;

/// Tolerance on the per-node flow balance, kg/s.
pub const BALANCE_TOLERANCE: f64 = 1e-9;

/// The parts of a network (full or reduced) that the thermal model needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalGraph {
    /// Effective node masses (diagonal of `M_d`), kg.
    pub mass: Vec<f64>,
    /// (source, target) per edge; nominal orientation.
    pub edges: Vec<(usize, usize)>,
    /// Heat loss coefficient per node, W/K.
    pub heat_loss: Vec<f64>,
    /// Ambient temperature per node, °C.
    pub ambient: Vec<f64>,
}

impl ThermalGraph {
    pub fn from_network(net: &Network) -> Result<Self> {
        Ok(Self {
            mass: node_masses(net)?,
            edges: net.edges(),
            heat_loss: net.nodes().iter().map(|n| n.heat_loss_coeff).collect(),
            ambient: net.nodes().iter().map(|n| n.ambient_temp).collect(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.mass.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Heat loss rate `h_i / (c_p·m_i)`, 1/s.
    pub fn loss_rate(&self) -> Vec<f64> {
        self.heat_loss
            .iter()
            .zip(&self.mass)
            .map(|(h, m)| h / (WATER_HEAT_CAPACITY * m))
            .collect()
    }

    pub fn unweighted_incidence(&self) -> WeightedIncidence {
        WeightedIncidence::from_edges(
            self.node_count(),
            &self.edges,
            &vec![1.0; self.edge_count()],
            Weighting::Unweighted,
        )
    }
}

/// Flows at one time instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    /// Signed flow per edge, kg/s (positive along the nominal orientation).
    pub edge_flow: Vec<f64>,
    /// Flow leaving the network at each node (consumer withdrawal), kg/s.
    pub node_outflow: Vec<f64>,
    /// Flow entering the network at each node (producer injection), kg/s.
    pub node_inflow: Vec<f64>,
    /// Temperature of the entering flow, °C.
    pub inlet_temp: Vec<f64>,
}

impl FlowField {
    pub fn zeros(nodes: usize, edges: usize) -> Self {
        Self {
            edge_flow: vec![0.0; edges],
            node_outflow: vec![0.0; nodes],
            node_inflow: vec![0.0; nodes],
            inlet_temp: vec![0.0; nodes],
        }
    }

    /// Derives boundary flows from the edge-flow imbalance at each node: a
    /// surplus leaves the network, a deficit is injected at `inlet_temp`.
    pub fn from_edge_flows(
        nodes: usize,
        edges: &[(usize, usize)],
        edge_flow: Vec<f64>,
        inlet_temp: Vec<f64>,
    ) -> Self {
        let mut net_in = vec![0.0; nodes];
        for (&(s, t), &f) in edges.iter().zip(&edge_flow) {
            net_in[t] += f;
            net_in[s] -= f;
        }
        let node_outflow = net_in.iter().map(|&v| v.max(0.0)).collect();
        let node_inflow = net_in.iter().map(|&v| (-v).max(0.0)).collect();
        Self {
            edge_flow,
            node_outflow,
            node_inflow,
            inlet_temp,
        }
    }

    pub fn check_dims(&self, nodes: usize, edges: usize) -> Result<()> {
        let dims = [
            ("edge flows", edges, self.edge_flow.len()),
            ("node outflows", nodes, self.node_outflow.len()),
            ("node inflows", nodes, self.node_inflow.len()),
            ("inlet temperatures", nodes, self.inlet_temp.len()),
        ];
        for (what, expected, got) in dims {
            if expected != got {
                return Err(Error::Dimension {
                    what,
                    expected,
                    got,
                });
            }
        }
        Ok(())
    }

    /// Per-node residual `Σ in − Σ out` including boundary flows.
    pub fn imbalance(&self, edges: &[(usize, usize)]) -> Vec<f64> {
        let mut r: Vec<f64> = self
            .node_inflow
            .iter()
            .zip(&self.node_outflow)
            .map(|(i, o)| i - o)
            .collect();
        for (&(s, t), &f) in edges.iter().zip(&self.edge_flow) {
            r[t] += f;
            r[s] -= f;
        }
        r
    }

    pub fn check_balance(&self, edges: &[(usize, usize)]) -> Result<()> {
        if let Some(i) = self.node_inflow.iter().chain(&self.node_outflow).position(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "boundary flow {i} is negative or not finite"
            )));
        }
        for (i, r) in self.imbalance(edges).into_iter().enumerate() {
            if r.abs() > BALANCE_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "flow imbalance {r:e} kg/s at node {i}"
                )));
            }
        }
        Ok(())
    }

    /// Boundary input `u_in ∘ x_in`, kg·°C/s.
    pub fn inlet_enthalpy(&self) -> Vec<f64> {
        self.node_inflow
            .iter()
            .zip(&self.inlet_temp)
            .map(|(u, x)| u * x)
            .collect()
    }
}

/// Snapshot of the assembled state-space operators.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvectionModel {
    /// Diagonal of `M_d`, kg.
    pub mass: Vec<f64>,
    /// System matrix `A(t)`, 1/s.
    pub sys: CsrMatrix,
    /// Diagonal of `B = M_d⁻¹`, 1/kg.
    pub input_gain: Vec<f64>,
    /// `h_i / (c_p·m_i)`, 1/s.
    pub loss_coeff: Vec<f64>,
    /// °C
    pub ambient: Vec<f64>,
    /// `u_in ∘ x_in` for this snapshot, kg·°C/s.
    pub input: Vec<f64>,
}

impl AdvectionModel {
    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    /// ẋ for the given state.
    pub fn derivative(&self, x: &[f64]) -> Vec<f64> {
        let mut dx = vec![0.0; x.len()];
        self.derivative_into(x, &mut dx);
        dx
    }

    pub fn derivative_into(&self, x: &[f64], dx: &mut [f64]) {
        self.sys.mul_vec_into(x, dx);
        for i in 0..dx.len() {
            dx[i] += self.input_gain[i] * self.input[i] + self.loss_coeff[i] * self.ambient[i];
        }
    }

    /// Stability number per node for an explicit step `dt`: `dt·|A_ii|`.
    pub fn step_courant(&self, dt: f64) -> Vec<f64> {
        self.sys.diagonal().iter().map(|a| dt * a.abs()).collect()
    }

    /// Largest `dt·|A_ii|` and the node where it occurs.
    pub fn max_step_courant(&self, dt: f64) -> (usize, f64) {
        self.step_courant(dt)
            .into_iter()
            .enumerate()
            .fold((0, 0.0), |best, (i, c)| if c > best.1 { (i, c) } else { best })
    }
}

/// Upwind selection matrix (node × edge): 1 at the upstream end of every edge
/// carrying flow under the current sign, 0 elsewhere.
pub fn upwind_incidence(unweighted: &WeightedIncidence, edge_flow: &[f64]) -> CsrMatrix {
    let m = unweighted.matrix();
    let mut triplets = Vec::new();
    for (node, edge, v) in m.iter() {
        let f = edge_flow[edge];
        let upstream = (f > 0.0 && v < 0.0) || (f < 0.0 && v > 0.0);
        if upstream {
            triplets.push((node, edge, 1.0));
        }
    }
    CsrMatrix::from_triplets(m.nrows(), m.ncols(), &triplets)
}

/// Assembles the model by literal sparse products. The [`Assembler`] builds
/// the same operator incrementally for time stepping.
pub fn assemble_graph(graph: &ThermalGraph, ff: &FlowField) -> Result<AdvectionModel> {
    let (n, m) = (graph.node_count(), graph.edge_count());
    ff.check_dims(n, m)?;
    let inc = graph.unweighted_incidence();
    let upwind = upwind_incidence(&inc, &ff.edge_flow);
    // M·U_d scales column e of M by u_e.
    let scaled: Vec<_> = inc
        .matrix()
        .iter()
        .map(|(r, c, v)| (r, c, v * ff.edge_flow[c]))
        .collect();
    let scaled = CsrMatrix::from_triplets(n, m, &scaled);
    let transport = scaled.mul_transpose(&upwind);
    let loss = graph.loss_rate();
    let mut triplets: Vec<_> = transport
        .iter()
        .map(|(r, c, v)| (r, c, v / graph.mass[r]))
        .collect();
    for i in 0..n {
        triplets.push((i, i, -ff.node_outflow[i] / graph.mass[i] - loss[i]));
    }
    Ok(AdvectionModel {
        mass: graph.mass.clone(),
        sys: CsrMatrix::from_triplets(n, n, &triplets),
        input_gain: graph.mass.iter().map(|m| 1.0 / m).collect(),
        loss_coeff: loss,
        ambient: graph.ambient.clone(),
        input: ff.inlet_enthalpy(),
    })
}

/// Assembles the full-order model of a network for one flow snapshot.
pub fn assemble(net: &Network, ff: &FlowField) -> Result<AdvectionModel> {
    assemble_graph(&ThermalGraph::from_network(net)?, ff)
}

#[cfg(test)]
mod tests;
