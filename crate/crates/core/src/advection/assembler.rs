use super::{AdvectionModel, FlowField, ThermalGraph};
use crate::error::Result;
use crate::sparse::CsrMatrix;

/// Reusable assembly of `A(t)` for a fixed graph.
///
/// The sparsity pattern depends only on the flow sign of each edge; it is
/// rebuilt when a sign changes and otherwise updated in place.
#[derive(Debug, Clone)]
pub struct Assembler {
    graph: ThermalGraph,
    loss: Vec<f64>,
    forward: Vec<bool>,
    /// Slot of A(downstream, upstream) per edge.
    edge_slot: Vec<usize>,
    diag_slot: Vec<usize>,
    model: AdvectionModel,
    rebuilds: usize,
    outflow_acc: Vec<f64>,
}

impl Assembler {
    pub fn new(graph: ThermalGraph) -> Self {
        let n = graph.node_count();
        let loss = graph.loss_rate();
        let model = AdvectionModel {
            mass: graph.mass.clone(),
            sys: CsrMatrix::zeros(n, n),
            input_gain: graph.mass.iter().map(|m| 1.0 / m).collect(),
            loss_coeff: loss.clone(),
            ambient: graph.ambient.clone(),
            input: vec![0.0; n],
        };
        let forward = vec![true; graph.edge_count()];
        let mut asm = Self {
            loss,
            forward,
            edge_slot: Vec::new(),
            diag_slot: Vec::new(),
            model,
            rebuilds: 0,
            outflow_acc: vec![0.0; n],
            graph,
        };
        asm.rebuild_pattern();
        asm
    }

    pub fn graph(&self) -> &ThermalGraph {
        &self.graph
    }

    /// Number of times the sparsity pattern was rebuilt after construction.
    pub fn pattern_rebuilds(&self) -> usize {
        self.rebuilds
    }

    pub fn model(&self) -> &AdvectionModel {
        &self.model
    }

    fn upstream_downstream(&self, e: usize) -> (usize, usize) {
        let (s, t) = self.graph.edges[e];
        if self.forward[e] {
            (s, t)
        } else {
            (t, s)
        }
    }

    fn rebuild_pattern(&mut self) {
        let n = self.graph.node_count();
        let mut triplets: Vec<_> = (0..n).map(|i| (i, i, 0.0)).collect();
        for e in 0..self.graph.edge_count() {
            let (up, down) = self.upstream_downstream(e);
            triplets.push((down, up, 0.0));
        }
        let sys = CsrMatrix::from_triplets(n, n, &triplets);
        let slot = |r: usize, c: usize| {
            let (start, cols) = (sys.indptr()[r], &sys.indices()[sys.indptr()[r]..sys.indptr()[r + 1]]);
            start + cols.binary_search(&c).expect("entry present in pattern")
        };
        self.diag_slot = (0..n).map(|i| slot(i, i)).collect();
        self.edge_slot = (0..self.graph.edge_count())
            .map(|e| {
                let (up, down) = self.upstream_downstream(e);
                slot(down, up)
            })
            .collect();
        self.model.sys = sys;
    }

    /// Refreshes the operator for a new flow snapshot.
    pub fn update(&mut self, ff: &FlowField) -> Result<&AdvectionModel> {
        ff.check_dims(self.graph.node_count(), self.graph.edge_count())?;
        let mut flipped = false;
        for (dir, &f) in self.forward.iter_mut().zip(&ff.edge_flow) {
            // Zero flow keeps the previous orientation.
            let fwd = if f > 0.0 { true } else if f < 0.0 { false } else { *dir };
            flipped |= fwd != *dir;
            *dir = fwd;
        }
        if flipped {
            self.rebuild_pattern();
            self.rebuilds += 1;
        }

        let acc = &mut self.outflow_acc;
        acc.copy_from_slice(&ff.node_outflow);
        let values = self.model.sys.values_mut();
        values.iter_mut().for_each(|v| *v = 0.0);
        for (e, &f) in ff.edge_flow.iter().enumerate() {
            let (s, t) = self.graph.edges[e];
            let (up, down) = if self.forward[e] { (s, t) } else { (t, s) };
            let q = f.abs();
            values[self.edge_slot[e]] += q / self.graph.mass[down];
            acc[up] += q;
        }
        for i in 0..self.graph.node_count() {
            values[self.diag_slot[i]] = -acc[i] / self.graph.mass[i] - self.loss[i];
        }
        for (dst, (u, x)) in self
            .model
            .input
            .iter_mut()
            .zip(ff.node_inflow.iter().zip(&ff.inlet_temp))
        {
            *dst = u * x;
        }
        Ok(&self.model)
    }
}
