use std::time::Instant;

use super::scenario::FlowDriver;
use crate::advection::{AdvectionModel, Assembler, FlowField, ThermalGraph, WATER_HEAT_CAPACITY};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::reduction::ReducedModel;

/// Largest step-wise stability number the integrator allows itself.
pub const C_SAFE: f64 = 0.9;

/// Anything that can produce the operator at a given time.
pub trait ModelSource {
    /// State dimension.
    fn dim(&self) -> usize;
    /// Diagonal of `M_d` for the state.
    fn mass(&self) -> &[f64];
    /// Refreshes the operator for time `t`.
    fn model_at(&mut self, t: f64) -> Result<&AdvectionModel>;
    /// Maps a state to node temperatures.
    fn output(&self, x: &[f64]) -> Vec<f64>;
    /// Initial state for a uniform temperature.
    fn uniform_state(&self, temp: f64) -> Vec<f64> {
        vec![temp; self.dim()]
    }
}

/// Full-order model driven by a scenario.
#[derive(Debug, Clone)]
pub struct FullSource {
    driver: FlowDriver,
    assembler: Assembler,
    ff: FlowField,
}

impl FullSource {
    pub fn new(net: &Network, driver: FlowDriver) -> Result<Self> {
        let graph = ThermalGraph::from_network(net)?;
        let ff = FlowField::zeros(graph.node_count(), graph.edge_count());
        Ok(Self {
            driver,
            assembler: Assembler::new(graph),
            ff,
        })
    }

    pub fn pattern_rebuilds(&self) -> usize {
        self.assembler.pattern_rebuilds()
    }
}

impl ModelSource for FullSource {
    fn dim(&self) -> usize {
        self.assembler.graph().node_count()
    }

    fn mass(&self) -> &[f64] {
        &self.assembler.graph().mass
    }

    fn model_at(&mut self, t: f64) -> Result<&AdvectionModel> {
        self.driver.flow_field_at(t, &mut self.ff);
        self.assembler.update(&self.ff)
    }

    fn output(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

/// Reduced model driven by aggregated full-order flows.
#[derive(Debug, Clone)]
pub struct ReducedSource {
    driver: FlowDriver,
    model: ReducedModel,
    assembler: Assembler,
    full_ff: FlowField,
    ff: FlowField,
    full_mass: Vec<f64>,
}

impl ReducedSource {
    pub fn new(net: &Network, model: ReducedModel, driver: FlowDriver) -> Result<Self> {
        let full = ThermalGraph::from_network(net)?;
        let full_ff = FlowField::zeros(full.node_count(), full.edge_count());
        let ff = FlowField::zeros(model.graph.node_count(), model.graph.edge_count());
        Ok(Self {
            driver,
            assembler: Assembler::new(model.graph.clone()),
            model,
            full_ff,
            ff,
            full_mass: full.mass,
        })
    }

    pub fn model(&self) -> &ReducedModel {
        &self.model
    }
}

impl ModelSource for ReducedSource {
    fn dim(&self) -> usize {
        self.model.k()
    }

    fn mass(&self) -> &[f64] {
        &self.model.graph.mass
    }

    fn model_at(&mut self, t: f64) -> Result<&AdvectionModel> {
        self.driver.flow_field_at(t, &mut self.full_ff);
        self.model.flow_field_into(&self.full_ff, &mut self.ff)?;
        self.assembler.update(&self.ff)
    }

    fn output(&self, x: &[f64]) -> Vec<f64> {
        self.model.lift_state(x).expect("state has cluster dimension")
    }

    fn uniform_state(&self, temp: f64) -> Vec<f64> {
        self.model
            .reduce_state(&vec![temp; self.full_mass.len()], &self.full_mass)
            .expect("sizes match")
    }
}

/// One forward-Euler step `x + dt·ẋ`. Fails if `dt·|A_ii|` exceeds one.
pub fn step_explicit(model: &AdvectionModel, x: &[f64], dt: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; x.len()];
    step_explicit_into(model, x, dt, &mut out)?;
    Ok(out)
}

fn step_explicit_into(model: &AdvectionModel, x: &[f64], dt: f64, out: &mut [f64]) -> Result<()> {
    let (node, c) = model.max_step_courant(dt);
    if c > 1.0 + 1e-12 {
        return Err(Error::CourantViolation { node, courant: c });
    }
    model.derivative_into(x, out);
    for (o, xi) in out.iter_mut().zip(x) {
        *o = xi + dt * *o;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Forward Euler.
    #[default]
    Euler,
    /// Heun's second-order method.
    Heun,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Method::Euler),
            "heun" => Ok(Method::Heun),
            _ => Err(Error::InvalidArgument(format!("unknown integrator '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateOptions {
    pub method: Method,
    pub c_safe: f64,
    /// Record every `stride`-th output instant.
    pub stride: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            method: Method::Euler,
            c_safe: C_SAFE,
            stride: 1,
        }
    }
}

/// Time integrals of the boundary terms, kg·°C (multiply by `c_p` for J).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger {
    pub initial: f64,
    pub final_: f64,
    pub inflow: f64,
    pub outflow: f64,
    pub loss: f64,
}

impl EnergyLedger {
    /// `final − initial − (inflow − outflow − loss)`.
    pub fn residual(&self) -> f64 {
        self.final_ - self.initial - (self.inflow - self.outflow - self.loss)
    }

    pub fn joules(v: f64) -> f64 {
        v * WATER_HEAT_CAPACITY
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    /// Node temperatures per recorded instant, °C.
    pub states: Vec<Vec<f64>>,
    pub steps_taken: usize,
    pub wall_time: f64,
    pub energy: EnergyLedger,
}

impl SimulationTrace {
    /// CSV with a `time` column and one column per node.
    pub fn to_csv(&self, node_ids: &[String]) -> String {
        let mut out = String::from("time");
        for id in node_ids {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(&self.states) {
            out.push_str(&t.to_string());
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Integrates from `x0` over `[0, horizon]`, recording at positive multiples
/// of `dt_out`. Each output interval is split into equal sub-steps so that
/// `h·|A_ii| ≤ c_safe`, with flows re-evaluated at every sub-step.
pub fn integrate<S: ModelSource>(
    source: &mut S,
    x0: &[f64],
    horizon: f64,
    dt_out: f64,
    opts: &IntegrateOptions,
) -> Result<SimulationTrace> {
    if !(dt_out > 0.0 && dt_out.is_finite()) {
        return Err(Error::InvalidArgument(format!("output step must be positive, got {dt_out}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be non-negative, got {horizon}")));
    }
    if !(opts.c_safe > 0.0 && opts.c_safe <= 1.0) || opts.stride == 0 {
        return Err(Error::InvalidArgument("c_safe must lie in (0, 1] and stride be positive".into()));
    }
    let n = source.dim();
    if x0.len() != n {
        return Err(Error::Dimension {
            what: "initial state",
            expected: n,
            got: x0.len(),
        });
    }
    let start = Instant::now();
    let mass = source.mass().to_vec();
    let enthalpy = |x: &[f64]| x.iter().zip(&mass).map(|(a, m)| a * m).sum::<f64>();
    let mut energy = EnergyLedger {
        initial: enthalpy(x0),
        ..Default::default()
    };
    let intervals = (horizon / dt_out * (1.0 + 1e-12)).floor() as usize;
    let mut x = x0.to_vec();
    let mut next = vec![0.0; n];
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut trace = SimulationTrace {
        times: Vec::new(),
        states: Vec::new(),
        steps_taken: 0,
        wall_time: 0.0,
        energy,
    };

    let mut t = 0.0;
    for j in 1..=intervals {
        let t_end = j as f64 * dt_out;
        while t < t_end {
            let remaining = t_end - t;
            let model = source.model_at(t)?;
            let (_, c) = model.max_step_courant(remaining);
            let n_sub = ((c / opts.c_safe).ceil() as usize).max(1);
            let h = if n_sub == 1 { remaining } else { remaining / n_sub as f64 };
            match opts.method {
                Method::Euler => {
                    model.derivative_into(&x, &mut k1);
                    book(&mut energy, model, &x, h);
                    for i in 0..n {
                        next[i] = x[i] + h * k1[i];
                    }
                }
                Method::Heun => {
                    model.derivative_into(&x, &mut k1);
                    book(&mut energy, model, &x, 0.5 * h);
                    for i in 0..n {
                        next[i] = x[i] + h * k1[i];
                    }
                    let model = source.model_at(t + h)?;
                    model.derivative_into(&next, &mut k2);
                    book(&mut energy, model, &next, 0.5 * h);
                    for i in 0..n {
                        next[i] = x[i] + 0.5 * h * (k1[i] + k2[i]);
                    }
                }
            }
            std::mem::swap(&mut x, &mut next);
            trace.steps_taken += 1;
            t = if n_sub == 1 { t_end } else { t + h };
            if let Some(node) = x.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { time: t, node });
            }
        }
        t = t_end;
        if j % opts.stride == 0 {
            trace.times.push(t_end);
            trace.states.push(source.output(&x));
        }
    }
    energy.final_ = enthalpy(&x);
    trace.energy = energy;
    trace.wall_time = start.elapsed().as_secs_f64();
    Ok(trace)
}

/// Accumulates boundary terms of `Σ m_i ẋ_i` over a step of length `h`.
fn book(energy: &mut EnergyLedger, model: &AdvectionModel, x: &[f64], h: f64) {
    let diag = model.sys.diagonal();
    let (mut inflow, mut outflow, mut loss) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        inflow += model.input[i];
        let k = model.loss_coeff[i];
        loss += model.mass[i] * k * (x[i] - model.ambient[i]);
        // Withdrawal: what the diagonal removes beyond transport to neighbours and losses.
        let leaving = -(diag[i] + k) * model.mass[i];
        outflow += leaving * x[i];
    }
    // Edge transport moves heat between nodes; subtract it from `outflow`.
    let mut internal = 0.0;
    for (r, c, v) in model.sys.iter() {
        if r != c {
            internal += model.mass[r] * v * x[c];
        }
    }
    energy.inflow += h * inflow;
    energy.outflow += h * (outflow - internal);
    energy.loss += h * loss;
}
