//! Scenarios, explicit time integration of full and reduced models, and
//! error metrics.

mod compare;
mod integrate;
mod metrics;
mod scenario;

pub use compare::{
    compare, reduced_for_k, run_full, run_reduced, table_ii, CompareOptions, CompareReport, RunStats, Selection,
    TableRow,
};
pub use integrate::{
    integrate, step_explicit, EnergyLedger, FullSource, IntegrateOptions, Method, ModelSource, ReducedSource,
    SimulationTrace, C_SAFE,
};
pub use metrics::{abs_error, rrmse};
pub use scenario::{
    gen_demands, DemandParams, FlowDriver, NamedSeries, RampParams, ResolvedScenario, Scenario, Schedule,
};
