use super::integrate::{integrate, FullSource, IntegrateOptions, ModelSource, ReducedSource, SimulationTrace};
use super::metrics::{abs_error, rrmse};
use super::scenario::{FlowDriver, Scenario};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::reduction::{build_reducers, choose_k, reduce_model, ClusterOptions, Clustering, ReducedModel, SpectralEmbedding};

/// How the reduced model is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selection {
    K(usize),
    CourantTarget(f64),
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub dt_fine: f64,
    pub dt_coarse: f64,
    pub selection: Selection,
    pub cluster: ClusterOptions,
    pub integrate: IntegrateOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    /// State dimension.
    pub states: usize,
    pub dt: f64,
    pub steps: usize,
    pub wall_time: f64,
}

/// One row of the k / step / CPU time / rRMSE table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    /// `None` for the unreduced model.
    pub k: Option<usize>,
    pub dt: f64,
    pub cpu_time: f64,
    pub rrmse: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub k: usize,
    pub courant_max: f64,
    pub feasible: bool,
    pub rrmse: f64,
    /// Nodes × coarse instants.
    pub abs_error: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub full: RunStats,
    pub reduced: RunStats,
    /// Reduced model at the fine step, isolating the effect of fewer states.
    pub reduced_fine: RunStats,
    pub clustering: Clustering,
}

impl CompareReport {
    /// Full-model wall time over reduced-model wall time.
    pub fn speedup(&self) -> f64 {
        self.full.wall_time / self.reduced.wall_time
    }

    /// Speedup from fewer states alone (both at the fine step).
    pub fn state_speedup(&self) -> f64 {
        self.full.wall_time / self.reduced_fine.wall_time
    }

    /// Speedup from the longer step alone (both reduced).
    pub fn step_speedup(&self) -> f64 {
        self.reduced_fine.wall_time / self.reduced.wall_time
    }

    pub fn table(&self) -> Vec<TableRow> {
        vec![
            TableRow {
                k: None,
                dt: self.full.dt,
                cpu_time: self.full.wall_time,
                rrmse: None,
            },
            TableRow {
                k: Some(self.k),
                dt: self.reduced.dt,
                cpu_time: self.reduced.wall_time,
                rrmse: Some(self.rrmse),
            },
        ]
    }
}

fn stride_for(dt_fine: f64, dt_coarse: f64) -> Result<usize> {
    let ratio = dt_coarse / dt_fine;
    let stride = ratio.round();
    if !(stride >= 1.0) || (ratio - stride).abs() > 1e-9 * ratio {
        return Err(Error::InvalidArgument(format!(
            "coarse step {dt_coarse} must be a whole multiple of the fine step {dt_fine}"
        )));
    }
    Ok(stride as usize)
}

/// Full-model trace on the fine step, recorded at coarse instants.
pub fn run_full(net: &Network, scenario: &Scenario, opts: &CompareOptions) -> Result<SimulationTrace> {
    let resolved = scenario.resolve(net)?;
    let (horizon, t0) = (resolved.horizon, resolved.initial_temp);
    let mut src = FullSource::new(net, FlowDriver::new(net, resolved)?)?;
    let x0 = src.uniform_state(t0);
    let iopts = IntegrateOptions {
        stride: stride_for(opts.dt_fine, opts.dt_coarse)? * opts.integrate.stride,
        ..opts.integrate.clone()
    };
    integrate(&mut src, &x0, horizon, opts.dt_fine, &iopts)
}

/// Reduced-model trace (lifted to nodes) at output step `dt`, recorded at
/// multiples of `record_every`.
pub fn run_reduced(
    net: &Network,
    scenario: &Scenario,
    model: &ReducedModel,
    dt: f64,
    record_every: f64,
    opts: &IntegrateOptions,
) -> Result<SimulationTrace> {
    let resolved = scenario.resolve(net)?;
    let (horizon, t0) = (resolved.horizon, resolved.initial_temp);
    let mut src = ReducedSource::new(net, model.clone(), FlowDriver::new(net, resolved)?)?;
    let x0 = src.uniform_state(t0);
    let iopts = IntegrateOptions {
        stride: stride_for(dt, record_every)? * opts.stride,
        ..opts.clone()
    };
    integrate(&mut src, &x0, horizon, dt, &iopts)
}

/// Reduced model for a fixed cluster count at `dt`.
pub fn reduced_for_k(net: &Network, k: usize, dt: f64, opts: &ClusterOptions) -> Result<ReducedModel> {
    let clustering = SpectralEmbedding::new(net, opts.eigen.clone())?.cluster(k, &opts.kmeans)?;
    reduce_model(net, &build_reducers(&clustering, net)?, dt)
}

/// Runs the full model at the fine step and the reduced model at the coarse
/// step and compares them at the coarse instants.
pub fn compare(net: &Network, scenario: &Scenario, opts: &CompareOptions) -> Result<CompareReport> {
    let (model, feasible) = match opts.selection {
        Selection::K(k) => (reduced_for_k(net, k, opts.dt_coarse, &opts.cluster)?, true),
        Selection::CourantTarget(c) => {
            let choice = choose_k(net, opts.dt_coarse, c, None, &opts.cluster)?;
            (choice.model, choice.feasible)
        }
    };
    let full = run_full(net, scenario, opts)?;
    let reduced = run_reduced(net, scenario, &model, opts.dt_coarse, opts.dt_coarse, &opts.integrate)?;
    let reduced_fine = run_reduced(net, scenario, &model, opts.dt_fine, opts.dt_coarse, &opts.integrate)?;
    let stats = |tr: &SimulationTrace, states: usize, dt: f64| RunStats {
        states,
        dt,
        steps: tr.steps_taken,
        wall_time: tr.wall_time,
    };
    Ok(CompareReport {
        k: model.k(),
        courant_max: model.courant_max,
        feasible,
        rrmse: rrmse(&full, &reduced)?,
        abs_error: abs_error(&full, &reduced)?,
        times: full.times.clone(),
        full: stats(&full, net.node_count(), opts.dt_fine),
        reduced: stats(&reduced, model.k(), opts.dt_coarse),
        reduced_fine: stats(&reduced_fine, model.k(), opts.dt_fine),
        clustering: model.reducers.clustering().clone(),
    })
}

/// Timing and accuracy of reduced models for several cluster counts at the
/// coarse step, against one full-model reference.
pub fn table_ii(
    net: &Network,
    scenario: &Scenario,
    ks: &[usize],
    opts: &CompareOptions,
) -> Result<Vec<TableRow>> {
    let full = run_full(net, scenario, opts)?;
    let mut rows = vec![TableRow {
        k: None,
        dt: opts.dt_fine,
        cpu_time: full.wall_time,
        rrmse: None,
    }];
    for &k in ks {
        let model = reduced_for_k(net, k, opts.dt_coarse, &opts.cluster)?;
        let reduced = run_reduced(net, scenario, &model, opts.dt_coarse, opts.dt_coarse, &opts.integrate)?;
        rows.push(TableRow {
            k: Some(model.k()),
            dt: opts.dt_coarse,
            cpu_time: reduced.wall_time,
            rrmse: Some(rrmse(&full, &reduced)?),
        });
    }
    Ok(rows)
}
