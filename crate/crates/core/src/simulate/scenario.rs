//! Operating scenarios: consumer demands, supply temperatures and
//! (optionally) explicit pipe flows over a time horizon.
//!
//! ```toml
//! horizon = 86400.0        # s
//! initial_temp = 85.0      # optional, °C (default: supply at t = 0)
//!
//! [demand]                 # generated consumer demands (fractions of design flow)
//! seed = 7
//! base = 0.3
//! morning = 0.55
//! afternoon = 0.45
//! width = 7200.0           # s, standard deviation of each peak
//! noise = 0.03
//! sample_period = 600.0    # s
//! scale = 1.0              # kg/s, used when a consumer has no design_flow
//!
//! [supply]                 # linear ramp applied to every producer
//! start = 85.0
//! end = 95.0
//!
//! [[schedules]]            # explicit series; overrides the generators by name
//! name = "c3"
//! times = [0.0, 3600.0]
//! values = [0.1, 0.2]
//!
//! [[pipe_flows]]           # explicit signed flows, required for meshed networks
//! pipe = "e1"
//! times = [0.0]
//! values = [0.5]
//! ```

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::advection::FlowField;
use crate::error::{Error, Result};
use crate::network::{FlowPropagator, Network};

/// Piecewise-linear time series, held constant outside its support.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Schedule {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "schedule needs matching non-empty times and values ({} vs {})",
                times.len(),
                values.len()
            )));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("schedule contains non-finite entries".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("schedule times must be strictly increasing".into()));
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            times: vec![0.0],
            values: vec![value],
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&x| x <= t);
        if i == 0 {
            return self.values[0];
        }
        if i == self.times.len() {
            return self.values[i - 1];
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (v0, v1) = (self.values[i - 1], self.values[i]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

/// Parameters of the generated double-peak demand profile.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemandParams {
    pub seed: u64,
    pub base: f64,
    pub morning: f64,
    pub afternoon: f64,
    pub width: f64,
    pub noise: f64,
    pub sample_period: f64,
    pub scale: f64,
}

impl Default for DemandParams {
    fn default() -> Self {
        Self {
            seed: 7,
            base: 0.3,
            morning: 0.55,
            afternoon: 0.45,
            width: 7200.0,
            noise: 0.03,
            sample_period: 600.0,
            scale: 1.0,
        }
    }
}

const MORNING_PEAK: f64 = 7.0 * 3600.0;
const AFTERNOON_PEAK: f64 = 17.0 * 3600.0;
const DAY: f64 = 86400.0;

impl DemandParams {
    /// Noise-free profile at time `t` (daily period).
    pub fn profile(&self, t: f64) -> f64 {
        let s = t.rem_euclid(DAY);
        let bump = |c: f64| {
            let d = (s - c).abs().min(DAY - (s - c).abs());
            (-0.5 * (d / self.width).powi(2)).exp()
        };
        self.base + self.morning * bump(MORNING_PEAK) + self.afternoon * bump(AFTERNOON_PEAK)
    }

    fn validate(&self) -> Result<()> {
        let ok = [self.base, self.morning, self.afternoon, self.noise, self.scale]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
            && self.width > 0.0
            && self.sample_period > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::validation(
                "demand",
                "amplitudes must be non-negative, width and sample_period positive",
            ))
        }
    }
}

/// Demand fractions for `consumers` consumers over `[0, horizon]`: the
/// double-peak profile plus seeded Gaussian noise, clipped at zero.
pub fn gen_demands(consumers: usize, horizon: f64, params: &DemandParams) -> Result<Vec<Schedule>> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    params.validate()?;
    let steps = (horizon / params.sample_period).ceil() as usize;
    let times: Vec<f64> = (0..=steps)
        .map(|i| (i as f64 * params.sample_period).min(horizon))
        .collect();
    let mut times = times;
    times.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..consumers)
        .map(|_| {
            let values = times
                .iter()
                .map(|&t| (params.profile(t) + params.noise * normal.sample(&mut rng)).max(0.0))
                .collect();
            Schedule::new(times.clone(), values)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampParams {
    pub start: f64,
    pub end: f64,
}

impl Default for RampParams {
    fn default() -> Self {
        Self {
            start: 85.0,
            end: 95.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedSeries {
    #[serde(alias = "pipe")]
    pub name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// A parsed scenario document.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub horizon: f64,
    #[serde(default)]
    pub initial_temp: Option<f64>,
    #[serde(default)]
    pub demand: Option<DemandParams>,
    #[serde(default)]
    pub supply: Option<RampParams>,
    #[serde(default)]
    pub schedules: Vec<NamedSeries>,
    #[serde(default)]
    pub pipe_flows: Vec<NamedSeries>,
}

impl Scenario {
    /// Generated demands and the default supply ramp.
    pub fn generated(horizon: f64, seed: u64) -> Self {
        Self {
            horizon,
            initial_temp: None,
            demand: Some(DemandParams {
                seed,
                ..Default::default()
            }),
            supply: Some(RampParams::default()),
            schedules: Vec::new(),
            pipe_flows: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| Error::Syntax(e.to_string()))?;
        if !(sc.horizon >= 0.0 && sc.horizon.is_finite()) {
            return Err(Error::validation("scenario", "horizon must be finite and non-negative"));
        }
        if let Some(t) = sc.initial_temp {
            if !t.is_finite() {
                return Err(Error::validation("scenario", "initial_temp is not finite"));
            }
        }
        if let Some(d) = &sc.demand {
            d.validate()?;
        }
        if let Some(r) = &sc.supply {
            if !(r.start.is_finite() && r.end.is_finite()) {
                return Err(Error::validation("supply", "ramp end points must be finite"));
            }
        }
        for s in sc.schedules.iter().chain(&sc.pipe_flows) {
            Schedule::new(s.times.clone(), s.values.clone())
                .map_err(|e| Error::validation(&s.name, e.to_string()))?;
        }
        Ok(sc)
    }

    /// Binds the scenario to a network's consumers, producers and pipes.
    pub fn resolve(&self, net: &Network) -> Result<ResolvedScenario> {
        let explicit: HashMap<&str, &NamedSeries> =
            self.schedules.iter().map(|s| (s.name.as_str(), s)).collect();
        if explicit.len() != self.schedules.len() {
            return Err(Error::validation("scenario", "duplicate schedule name"));
        }
        let series = |s: &NamedSeries| Schedule::new(s.times.clone(), s.values.clone());

        let generated = match &self.demand {
            Some(p) if self.horizon > 0.0 => Some(gen_demands(net.consumers().len(), self.horizon, p)?),
            Some(_) => Some(vec![Schedule::constant(0.0); net.consumers().len()]),
            None => None,
        };
        let mut demand = Vec::with_capacity(net.consumers().len());
        for (i, c) in net.consumers().iter().enumerate() {
            let s = if let Some(s) = explicit.get(c.schedule.as_str()) {
                series(s)?
            } else if let Some(g) = &generated {
                let scale = c.design_flow.unwrap_or(self.demand.as_ref().expect("generator present").scale);
                Schedule::new(g[i].times.clone(), g[i].values.iter().map(|v| v * scale).collect())?
            } else {
                return Err(Error::validation(
                    &c.schedule,
                    "consumer schedule not found and no demand generator given",
                ));
            };
            if s.values.iter().any(|&v| v < 0.0) {
                return Err(Error::validation(&c.schedule, "negative demand"));
            }
            demand.push(s);
        }

        let mut supply = Vec::with_capacity(net.producers().len());
        for p in net.producers() {
            let s = if let Some(s) = explicit.get(p.schedule.as_str()) {
                series(s)?
            } else if let Some(r) = &self.supply {
                if self.horizon > 0.0 {
                    Schedule::new(vec![0.0, self.horizon], vec![r.start, r.end])?
                } else {
                    Schedule::constant(r.start)
                }
            } else {
                return Err(Error::validation(
                    &p.schedule,
                    "producer schedule not found and no supply ramp given",
                ));
            };
            supply.push(s);
        }
        if supply.is_empty() {
            return Err(Error::validation("scenario", "network has no producer"));
        }

        let pipe_flows = if self.pipe_flows.is_empty() {
            None
        } else {
            let by_id: HashMap<&str, &NamedSeries> =
                self.pipe_flows.iter().map(|s| (s.name.as_str(), s)).collect();
            let mut flows = Vec::with_capacity(net.pipe_count());
            for p in net.pipes() {
                let s = by_id
                    .get(p.id.as_str())
                    .ok_or_else(|| Error::validation(&p.id, "pipe has no flow schedule"))?;
                flows.push(series(s)?);
            }
            if let Some(extra) = self.pipe_flows.iter().find(|s| net.pipes().iter().all(|p| p.id != s.name)) {
                return Err(Error::validation(&extra.name, "flow schedule for unknown pipe"));
            }
            Some(flows)
        };

        let initial_temp = self.initial_temp.unwrap_or_else(|| supply[0].at(0.0));
        Ok(ResolvedScenario {
            horizon: self.horizon,
            initial_temp,
            demand,
            supply,
            pipe_flows,
        })
    }
}

/// A scenario bound to one network, in the network's attachment order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub horizon: f64,
    pub initial_temp: f64,
    /// Per consumer, kg/s.
    pub demand: Vec<Schedule>,
    /// Per producer, °C.
    pub supply: Vec<Schedule>,
    /// Per pipe, kg/s, when flows are prescribed.
    pub pipe_flows: Option<Vec<Schedule>>,
}

/// Evaluates full-order flow snapshots of a resolved scenario.
#[derive(Debug, Clone)]
pub struct FlowDriver {
    scenario: ResolvedScenario,
    edges: Vec<(usize, usize)>,
    consumer_nodes: Vec<usize>,
    producer_nodes: Vec<usize>,
    propagator: Option<FlowPropagator>,
    node_demand: Vec<f64>,
    subtree: Vec<f64>,
}

impl FlowDriver {
    pub fn new(net: &Network, scenario: ResolvedScenario) -> Result<Self> {
        let propagator = if scenario.pipe_flows.is_some() {
            None
        } else {
            Some(FlowPropagator::new(net)?)
        };
        Ok(Self {
            edges: net.edges(),
            consumer_nodes: net.consumers().iter().map(|c| c.node).collect(),
            producer_nodes: net.producers().iter().map(|p| p.node).collect(),
            propagator,
            node_demand: vec![0.0; net.node_count()],
            subtree: vec![0.0; net.node_count()],
            scenario,
        })
    }

    pub fn scenario(&self) -> &ResolvedScenario {
        &self.scenario
    }

    pub fn node_count(&self) -> usize {
        self.node_demand.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn flow_field_at(&mut self, t: f64, ff: &mut FlowField) {
        let n = self.node_count();
        ff.node_inflow.iter_mut().for_each(|v| *v = 0.0);
        ff.node_outflow.iter_mut().for_each(|v| *v = 0.0);
        ff.inlet_temp.iter_mut().for_each(|v| *v = 0.0);
        if let Some(prop) = &self.propagator {
            self.node_demand.iter_mut().for_each(|v| *v = 0.0);
            for (s, &node) in self.scenario.demand.iter().zip(&self.consumer_nodes) {
                self.node_demand[node] += s.at(t);
            }
            prop.edge_flows_into(&self.node_demand, &mut self.subtree, &mut ff.edge_flow);
            ff.node_outflow.copy_from_slice(&self.node_demand);
            let root = prop.root();
            ff.node_inflow[root] = self.subtree[root];
            ff.inlet_temp[root] = self.scenario.supply[0].at(t);
        } else {
            let flows = self.scenario.pipe_flows.as_ref().expect("explicit flows");
            for (f, s) in ff.edge_flow.iter_mut().zip(flows) {
                *f = s.at(t);
            }
            let net_in = &mut self.node_demand;
            net_in.iter_mut().for_each(|v| *v = 0.0);
            for (&(s, d), &f) in self.edges.iter().zip(ff.edge_flow.iter()) {
                net_in[d] += f;
                net_in[s] -= f;
            }
            let fallback = self.scenario.supply[0].at(t);
            for i in 0..n {
                ff.node_outflow[i] = net_in[i].max(0.0);
                ff.node_inflow[i] = (-net_in[i]).max(0.0);
                ff.inlet_temp[i] = fallback;
            }
            for (s, &node) in self.scenario.supply.iter().zip(&self.producer_nodes) {
                ff.inlet_temp[node] = s.at(t);
            }
        }
    }

    /// Supply temperature of the first producer at `t`.
    pub fn supply_temp(&self, t: f64) -> f64 {
        self.scenario.supply[0].at(t)
    }
}
