//! `dhrom` command-line front end.
//!
//! Exit codes: 0 success, 2 parse or validation errors, 3 numerical failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dhrom::advection::courant;
use dhrom::gridgen::{generate, GridSpec};
use dhrom::network::{merge_short_pipes, oversample, parse_network, write_network, Network};
use dhrom::reduction::{
    build_reducers, choose_k, reduce_model, ClusterMeta, ClusterOptions, ClusterTable, Clustering, EigenOptions,
    KMeansOptions, ReducedModel, SpectralEmbedding,
};
use dhrom::simulate::{
    compare, integrate, run_full, run_reduced, CompareOptions, FlowDriver, FullSource, IntegrateOptions, Method,
    ModelSource, ReducedSource, Scenario, Selection, SimulationTrace,
};
use dhrom::Error;

#[derive(Parser)]
#[command(name = "dhrom", version, about = "Thermal simulation and spectral model reduction for district energy networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a network and export the clustering table.
    Cluster(ClusterArgs),
    /// Simulate the full model, or a reduced one when a clustering is given.
    Simulate(SimulateArgs),
    /// Compare a reduced model at the coarse step against the full model at the fine step.
    Compare(CompareArgs),
    /// Write a seeded synthetic radial network.
    GenGrid(GenGridArgs),
}

#[derive(Args)]
struct NetworkArgs {
    /// Network TOML file.
    #[arg(long, short = 'n')]
    network: PathBuf,
    /// Contract pipes shorter than this many metres before anything else.
    #[arg(long, value_name = "METRES")]
    merge_short: Option<f64>,
    /// Split pipes into segments of at most this many metres.
    #[arg(long, value_name = "METRES")]
    oversample: Option<f64>,
    /// Drop heat losses (advection only).
    #[arg(long)]
    no_losses: bool,
}

#[derive(Args)]
#[group(id = "reduction", multiple = false)]
struct ReductionArgs {
    /// Number of clusters.
    #[arg(long, short = 'k', group = "reduction")]
    k: Option<usize>,
    /// Largest reduced Courant number allowed at the reduction step; picks k.
    #[arg(long, group = "reduction")]
    c_target: Option<f64>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Scenario TOML file. Without it, demands and the supply ramp are generated.
    #[arg(long, short = 's')]
    scenario: Option<PathBuf>,
    /// Horizon of the generated scenario, s.
    #[arg(long, default_value_t = 86400.0)]
    horizon: f64,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[command(flatten)]
    reduction: ReductionArgs,
    /// Output time step the reduced model is meant for, s.
    #[arg(long, default_value_t = 600.0)]
    dt: f64,
    /// Seed for k-means.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// k-means restarts.
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, short = 'o', default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    reduction: ReductionArgs,
    /// Clustering table to reduce with (instead of --k / --c-target).
    #[arg(long, conflicts_with = "reduction")]
    clustering: Option<PathBuf>,
    /// Output time step, s.
    #[arg(long, default_value_t = 600.0)]
    dt: f64,
    /// euler or heun.
    #[arg(long, default_value = "euler")]
    method: Method,
    /// Largest per-sub-step stability number.
    #[arg(long, default_value_t = dhrom::simulate::C_SAFE)]
    c_safe: f64,
    /// Seed for generated demands and k-means.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, short = 'o', default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    net: NetworkArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    reduction: ReductionArgs,
    /// Step of the full-model reference, s.
    #[arg(long, default_value_t = 5.0)]
    dt_fine: f64,
    /// Step of the reduced model and of the comparison instants, s.
    #[arg(long, default_value_t = 600.0)]
    dt_coarse: f64,
    #[arg(long, default_value = "euler")]
    method: Method,
    #[arg(long, default_value_t = dhrom::simulate::C_SAFE)]
    c_safe: f64,
    /// Further cluster counts to time against the same reference.
    #[arg(long, value_delimiter = ',')]
    table_k: Vec<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, short = 'o', default_value = ".")]
    output_dir: PathBuf,
}

#[derive(Args)]
struct GenGridArgs {
    #[arg(long, default_value_t = 1000)]
    nodes: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Probability that a new node extends the previous one.
    #[arg(long, default_value_t = 0.6)]
    chain_probability: f64,
    /// Probability that a node with children also serves a consumer.
    #[arg(long, default_value_t = 0.5)]
    interior_consumers: f64,
    /// Pipe length range, m.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [20.0, 120.0])]
    length: Vec<f64>,
    /// Consumer design flow range, kg/s.
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [0.05, 0.5])]
    consumer_flow: Vec<f64>,
    /// Velocity at design flow, m/s.
    #[arg(long, default_value_t = 1.0)]
    design_velocity: f64,
    /// W/(m·K)
    #[arg(long, default_value_t = 0.2)]
    loss_per_metre: f64,
    /// °C
    #[arg(long, default_value_t = 8.0)]
    ambient_temp: f64,
    /// Network TOML to write; stdout when absent.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Cluster(a) => cmd_cluster(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Compare(a) => cmd_compare(a),
        Command::GenGrid(a) => cmd_gen_grid(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))
}

fn write_toml<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let text = toml::to_string(value).map_err(|e| Failure::Input(e.to_string()))?;
    write(dir, name, &text)
}

fn prepare_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("cannot create {}: {e}", dir.display())))
}

fn positive(name: &str, v: f64) -> CliResult<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::Input(format!("--{name} must be positive, got {v}")))
    }
}

fn load_network(a: &NetworkArgs) -> CliResult<Network> {
    let mut net = parse_network(&read(&a.network)?)?;
    if let Some(t) = a.merge_short {
        positive("merge-short", t)?;
        net = merge_short_pipes(&net, t)?;
    }
    if let Some(dz) = a.oversample {
        positive("oversample", dz)?;
        net = oversample(&net, dz)?;
    }
    if a.no_losses {
        net = net.without_losses();
    }
    Ok(net)
}

fn load_scenario(a: &ScenarioArgs, seed: u64) -> CliResult<Scenario> {
    match &a.scenario {
        Some(p) => Ok(Scenario::parse(&read(p)?)?),
        None => {
            if !(a.horizon >= 0.0 && a.horizon.is_finite()) {
                return Err(Failure::Input(format!("--horizon must be non-negative, got {}", a.horizon)));
            }
            Ok(Scenario::generated(a.horizon, seed))
        }
    }
}

fn cluster_options(seed: u64, restarts: usize) -> ClusterOptions {
    ClusterOptions {
        eigen: EigenOptions::default(),
        kmeans: KMeansOptions {
            restarts,
            seed,
            ..Default::default()
        },
    }
}

fn check_k(net: &Network, k: usize) -> CliResult<()> {
    if k == 0 || k > net.node_count() {
        return Err(Failure::Input(format!("--k must lie in 1..={}, got {k}", net.node_count())));
    }
    Ok(())
}

fn check_c_target(c: f64) -> CliResult<()> {
    if c > 0.0 && c <= 1.0 {
        Ok(())
    } else {
        Err(Failure::Input(format!("--c-target must lie in (0, 1], got {c}")))
    }
}

fn require_reduction(r: &ReductionArgs) -> CliResult<()> {
    if r.k.is_none() && r.c_target.is_none() {
        return Err(Failure::Input("exactly one of --k and --c-target is required".into()));
    }
    Ok(())
}

struct Reduced {
    clustering: Clustering,
    model: ReducedModel,
    feasible: bool,
    eigen_seconds: f64,
    kmeans_seconds: f64,
}

fn reduce(net: &Network, r: &ReductionArgs, dt: f64, opts: &ClusterOptions) -> CliResult<Reduced> {
    let start = Instant::now();
    if let Some(c) = r.c_target {
        check_c_target(c)?;
        let choice = choose_k(net, dt, c, None, opts)?;
        let total = start.elapsed().as_secs_f64();
        return Ok(Reduced {
            clustering: choice.clustering,
            model: choice.model,
            feasible: choice.feasible,
            eigen_seconds: choice.eigen_seconds,
            kmeans_seconds: total - choice.eigen_seconds,
        });
    }
    let k = r.k.expect("reduction selected");
    check_k(net, k)?;
    let mut emb = SpectralEmbedding::new(net, opts.eigen.clone())?;
    let clustering = emb.cluster(k, &opts.kmeans)?;
    let total = start.elapsed().as_secs_f64();
    let model = reduce_model(net, &build_reducers(&clustering, net)?, dt)?;
    Ok(Reduced {
        clustering,
        model,
        feasible: true,
        eigen_seconds: emb.eigen_seconds,
        kmeans_seconds: total - emb.eigen_seconds,
    })
}

#[derive(Serialize)]
struct ClusterSummary {
    nodes: usize,
    pipes: usize,
    k: usize,
    dt: f64,
    courant_max: f64,
    feasible: bool,
    seed: u64,
}

#[derive(Serialize)]
struct ClusterTiming {
    eigen_seconds: f64,
    kmeans_seconds: f64,
}

fn cmd_cluster(a: ClusterArgs) -> CliResult<()> {
    require_reduction(&a.reduction)?;
    positive("dt", a.dt)?;
    let net = load_network(&a.net)?;
    let opts = cluster_options(a.seed, a.restarts);
    let red = reduce(&net, &a.reduction, a.dt, &opts)?;
    prepare_dir(&a.output_dir)?;
    let meta = ClusterMeta {
        k: red.clustering.k(),
        dt: Some(a.dt),
        c_target: a.reduction.c_target,
        seed: Some(a.seed),
    };
    write(&a.output_dir, "clustering.csv", &ClusterTable::from_clustering(&net, &red.clustering, meta).write())?;

    let report = courant(&net, None, a.dt)?;
    let mut csv = String::from("node,courant,cluster\n");
    for ((node, c), cl) in net.nodes().iter().zip(&report.per_node).zip(red.clustering.assignment()) {
        csv.push_str(&format!("{},{},{}\n", node.id, c, cl));
    }
    write(&a.output_dir, "courant.csv", &csv)?;

    let summary = ClusterSummary {
        nodes: net.node_count(),
        pipes: net.pipe_count(),
        k: red.clustering.k(),
        dt: a.dt,
        courant_max: red.model.courant_max,
        feasible: red.feasible,
        seed: a.seed,
    };
    write_toml(&a.output_dir, "summary.toml", &summary)?;
    write_toml(
        &a.output_dir,
        "timing.toml",
        &ClusterTiming {
            eigen_seconds: red.eigen_seconds,
            kmeans_seconds: red.kmeans_seconds,
        },
    )?;
    println!("nodes,pipes,k,courant_max,eigen_s,kmeans_s");
    println!(
        "{},{},{},{:.4},{:.3},{:.3}",
        summary.nodes, summary.pipes, summary.k, summary.courant_max, red.eigen_seconds, red.kmeans_seconds
    );
    if !red.feasible {
        eprintln!("warning: even two clusters exceed the Courant target at dt = {}", a.dt);
    }
    Ok(())
}

#[derive(Serialize)]
struct RunMeta {
    seed: u64,
    dt: f64,
    horizon: f64,
    method: String,
    c_safe: f64,
    states: usize,
    k: Option<usize>,
    steps_taken: usize,
    records: usize,
    energy: EnergyMeta,
}

#[derive(Serialize)]
struct EnergyMeta {
    initial_j: f64,
    final_j: f64,
    inflow_j: f64,
    outflow_j: f64,
    loss_j: f64,
    residual_j: f64,
}

#[derive(Serialize)]
struct RunTiming {
    simulate_seconds: f64,
}

fn method_name(m: Method) -> String {
    match m {
        Method::Euler => "euler".into(),
        Method::Heun => "heun".into(),
    }
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<()> {
    positive("dt", a.dt)?;
    let net = load_network(&a.net)?;
    let scenario = load_scenario(&a.scenario, a.seed)?;
    let resolved = scenario.resolve(&net)?;
    let (horizon, t0) = (resolved.horizon, resolved.initial_temp);
    let driver = FlowDriver::new(&net, resolved)?;
    let iopts = IntegrateOptions {
        method: a.method,
        c_safe: a.c_safe,
        stride: 1,
    };

    let model = if let Some(path) = &a.clustering {
        let clustering = ClusterTable::parse(&read(path)?)?.to_clustering(&net)?;
        Some(reduce_model(&net, &build_reducers(&clustering, &net)?, a.dt)?)
    } else if a.reduction.k.is_some() || a.reduction.c_target.is_some() {
        Some(reduce(&net, &a.reduction, a.dt, &cluster_options(a.seed, a.restarts))?.model)
    } else {
        None
    };
    let (trace, states, k): (SimulationTrace, usize, Option<usize>) = match model {
        Some(model) => {
            let k = model.k();
            let mut src = ReducedSource::new(&net, model, driver)?;
            let x0 = src.uniform_state(t0);
            (integrate(&mut src, &x0, horizon, a.dt, &iopts)?, k, Some(k))
        }
        None => {
            let mut src = FullSource::new(&net, driver)?;
            let x0 = src.uniform_state(t0);
            (integrate(&mut src, &x0, horizon, a.dt, &iopts)?, net.node_count(), None)
        }
    };

    prepare_dir(&a.output_dir)?;
    let ids: Vec<String> = net.nodes().iter().map(|n| n.id.clone()).collect();
    write(&a.output_dir, "trace.csv", &trace.to_csv(&ids))?;
    let e = trace.energy;
    let j = dhrom::simulate::EnergyLedger::joules;
    write_toml(
        &a.output_dir,
        "run.toml",
        &RunMeta {
            seed: a.seed,
            dt: a.dt,
            horizon,
            method: method_name(a.method),
            c_safe: a.c_safe,
            states,
            k,
            steps_taken: trace.steps_taken,
            records: trace.times.len(),
            energy: EnergyMeta {
                initial_j: j(e.initial),
                final_j: j(e.final_),
                inflow_j: j(e.inflow),
                outflow_j: j(e.outflow),
                loss_j: j(e.loss),
                residual_j: j(e.residual()),
            },
        },
    )?;
    write_toml(
        &a.output_dir,
        "timing.toml",
        &RunTiming {
            simulate_seconds: trace.wall_time,
        },
    )?;
    println!(
        "simulated {} states over {horizon} s: {} records, {} steps",
        states,
        trace.times.len(),
        trace.steps_taken
    );
    Ok(())
}

#[derive(Serialize)]
struct CompareSummary {
    k: usize,
    courant_max: f64,
    feasible: bool,
    rrmse_percent: f64,
    dt_fine: f64,
    dt_coarse: f64,
    full_steps: usize,
    reduced_steps: usize,
    seed: u64,
}

#[derive(Serialize)]
struct CompareTiming {
    full_seconds: f64,
    reduced_seconds: f64,
    reduced_fine_seconds: f64,
    speedup: f64,
    state_speedup: f64,
    step_speedup: f64,
}

fn opt_to_string<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

fn cmd_compare(a: CompareArgs) -> CliResult<()> {
    require_reduction(&a.reduction)?;
    positive("dt-fine", a.dt_fine)?;
    positive("dt-coarse", a.dt_coarse)?;
    let net = load_network(&a.net)?;
    let scenario = load_scenario(&a.scenario, a.seed)?;
    if let Some(k) = a.reduction.k {
        check_k(&net, k)?;
    }
    if let Some(c) = a.reduction.c_target {
        check_c_target(c)?;
    }
    for &k in &a.table_k {
        check_k(&net, k)?;
    }
    let opts = CompareOptions {
        dt_fine: a.dt_fine,
        dt_coarse: a.dt_coarse,
        selection: match (a.reduction.k, a.reduction.c_target) {
            (Some(k), _) => Selection::K(k),
            (None, Some(c)) => Selection::CourantTarget(c),
            (None, None) => unreachable!("checked above"),
        },
        cluster: cluster_options(a.seed, a.restarts),
        integrate: IntegrateOptions {
            method: a.method,
            c_safe: a.c_safe,
            stride: 1,
        },
    };
    let report = compare(&net, &scenario, &opts)?;
    let mut rows = report.table();
    if !a.table_k.is_empty() {
        let full = run_full(&net, &scenario, &opts)?;
        for &k in &a.table_k {
            let model = dhrom::simulate::reduced_for_k(&net, k, a.dt_coarse, &opts.cluster)?;
            let tr = run_reduced(&net, &scenario, &model, a.dt_coarse, a.dt_coarse, &opts.integrate)?;
            rows.push(dhrom::simulate::TableRow {
                k: Some(model.k()),
                dt: a.dt_coarse,
                cpu_time: tr.wall_time,
                rrmse: Some(dhrom::simulate::rrmse(&full, &tr)?),
            });
        }
    }

    prepare_dir(&a.output_dir)?;
    let mut heat = String::from("node");
    for t in &report.times {
        heat.push_str(&format!(",{t}"));
    }
    heat.push('\n');
    for (node, row) in net.nodes().iter().zip(&report.abs_error) {
        heat.push_str(&node.id);
        for v in row {
            heat.push_str(&format!(",{v}"));
        }
        heat.push('\n');
    }
    write(&a.output_dir, "abs_error.csv", &heat)?;
    let meta = ClusterMeta {
        k: report.k,
        dt: Some(a.dt_coarse),
        c_target: a.reduction.c_target,
        seed: Some(a.seed),
    };
    write(&a.output_dir, "clustering.csv", &ClusterTable::from_clustering(&net, &report.clustering, meta).write())?;
    write_toml(
        &a.output_dir,
        "summary.toml",
        &CompareSummary {
            k: report.k,
            courant_max: report.courant_max,
            feasible: report.feasible,
            rrmse_percent: report.rrmse,
            dt_fine: a.dt_fine,
            dt_coarse: a.dt_coarse,
            full_steps: report.full.steps,
            reduced_steps: report.reduced.steps,
            seed: a.seed,
        },
    )?;
    let mut table = String::from("k,dt,cpu_time,rrmse\n");
    for r in &rows {
        table.push_str(&format!(
            "{},{},{},{}\n",
            opt_to_string(r.k),
            r.dt,
            r.cpu_time,
            opt_to_string(r.rrmse)
        ));
    }
    write(&a.output_dir, "table.csv", &table)?;
    write_toml(
        &a.output_dir,
        "timing.toml",
        &CompareTiming {
            full_seconds: report.full.wall_time,
            reduced_seconds: report.reduced.wall_time,
            reduced_fine_seconds: report.reduced_fine.wall_time,
            speedup: report.speedup(),
            state_speedup: report.state_speedup(),
            step_speedup: report.step_speedup(),
        },
    )?;
    println!(
        "k = {}, C_max = {:.4}, rRMSE = {:.3} %, speedup = {:.1}x",
        report.k,
        report.courant_max,
        report.rrmse,
        report.speedup()
    );
    Ok(())
}

fn cmd_gen_grid(a: GenGridArgs) -> CliResult<()> {
    let spec = GridSpec {
        nodes: a.nodes,
        seed: a.seed,
        chain_probability: a.chain_probability,
        interior_consumer_probability: a.interior_consumers,
        length: (a.length[0], a.length[1]),
        consumer_flow: (a.consumer_flow[0], a.consumer_flow[1]),
        design_velocity: a.design_velocity,
        loss_per_metre: a.loss_per_metre,
        ambient_temp: a.ambient_temp,
        ..Default::default()
    };
    let text = write_network(&generate(&spec)?);
    match &a.output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
