//! Command-line front end. `dispatch` takes argv and a writer so the whole
//! surface is testable without spawning a process.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::bridging::{omega_bound, MwisdSolver, WeightedLink};
use crate::io::{
    parse_schedule, parse_topology, parse_weights, serialize_schedule, serialize_topology,
    serialize_trace,
};
use crate::model::{check_feasible, sinr, PhysicalParams, PowerAssignment, Topology};
use crate::power::{assign_fixed, m_window, power_ceiling, FixedPowerKind, DEFAULT_M};
use crate::schedulers::{algorithm2, run_policy, Policy, SchedulerOptions};
use crate::separation::{lemma1_bound, phi_star};
use crate::simulator::{
    gen_random_topology, lambda_grid, run, sweep, PowerMode, RandomTopologySpec, SimConfig,
};

#[derive(Debug, Parser)]
#[command(
    name = "sinr-sched",
    version,
    about = "Link scheduling under the SINR interference model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random topology.
    Gen(GenArgs),
    /// Print the analytic constants for a parameter set.
    Bounds(BoundsArgs),
    /// Schedule one slot for given link weights.
    Schedule(ScheduleArgs),
    /// Simulate the queueing system at one arrival rate.
    Run(RunArgs),
    /// Simulate a grid of arrival rates and report the largest stable one.
    Sweep(SweepArgs),
    /// Check a schedule file for SINR feasibility.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Args)]
struct PhysArgs {
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 3.0)]
    kappa: f64,
    #[arg(long, default_value_t = 0.01)]
    xi: f64,
    #[arg(long, default_value_t = 10.0)]
    sigma: f64,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
}

impl PhysArgs {
    fn params(&self) -> Result<PhysicalParams> {
        let p = PhysicalParams {
            eta: self.eta,
            kappa: self.kappa,
            xi: self.xi,
            sigma: self.sigma,
            alpha: self.alpha,
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Args)]
struct TopologyArgs {
    /// Topology file; a random topology is generated when omitted.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Seed for the generated topology.
    #[arg(long, default_value_t = 1)]
    topo_seed: u64,
}

impl TopologyArgs {
    fn load(&self) -> Result<Topology> {
        match &self.topology {
            Some(path) => read_topology(path),
            None => Ok(gen_random_topology(
                &RandomTopologySpec::default(),
                self.topo_seed,
            )?),
        }
    }
}

#[derive(Debug, Clone, Args)]
struct PolicyArgs {
    /// alg2, alg3, greedy, weight or exact.
    #[arg(long, default_value = "alg2")]
    policy: Policy,
    /// Fixed power family for policies other than alg2: uniform, linear or mean.
    #[arg(long, default_value = "linear")]
    power: FixedPowerKind,
    /// Fixed power scale; defaults to twice the decodability floor at rMax.
    #[arg(long)]
    power_scale: Option<f64>,
    /// Solve the disk independent set exactly instead of greedily.
    #[arg(long)]
    exact_bridge: bool,
    /// Restrict to the heaviest length group with this base.
    #[arg(long)]
    grouping: Option<f64>,
}

impl PolicyArgs {
    fn options(&self, topology: &Topology) -> SchedulerOptions {
        SchedulerOptions {
            solver: if self.exact_bridge {
                MwisdSolver::Exact {
                    cap: crate::bridging::EXACT_MWISD_CAP,
                }
            } else {
                MwisdSolver::Greedy
            },
            length_grouping: self.grouping,
            r_min: topology.r_min,
            ..SchedulerOptions::default()
        }
    }

    fn power_mode(&self) -> PowerMode {
        if self.policy == Policy::Algorithm2 {
            PowerMode::Adjustable
        } else {
            PowerMode::Fixed {
                kind: self.power,
                scale: self.power_scale,
            }
        }
    }
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, default_value_t = 100)]
    nodes: usize,
    #[arg(long, default_value_t = 20)]
    links: usize,
    #[arg(long, default_value_t = 100.0)]
    area: f64,
    #[arg(long, default_value_t = 1.0)]
    r_min: f64,
    #[arg(long, default_value_t = 5.0)]
    r_max: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[command(flatten)]
    phys: PhysArgs,
    #[arg(long, default_value_t = 1.0)]
    r_min: f64,
    #[arg(long, default_value_t = 5.0)]
    r_max: f64,
    /// Separation level; defaults to the target value for the parameters.
    #[arg(long)]
    phi: Option<f64>,
    /// Sender spacing in units of the longest link; defaults to rMin / rMax.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_M)]
    m: f64,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[command(flatten)]
    topo: TopologyArgs,
    #[command(flatten)]
    phys: PhysArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// Weight file (`<link id> <weight>`); unit weights when omitted.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimArgs {
    #[command(flatten)]
    topo: TopologyArgs,
    #[command(flatten)]
    phys: PhysArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value_t = 100_000)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    y_max: u64,
}

impl SimArgs {
    fn config(&self, topology: &Topology, lambda: f64) -> SimConfig {
        SimConfig {
            horizon: self.horizon,
            lambda,
            seed: self.seed,
            policy: self.policy.policy,
            power: self.policy.power_mode(),
            y_max: self.y_max,
            scheduler: self.policy.options(topology),
            ..SimConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    lambda: f64,
    /// CSV trace output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value_t = 0.05)]
    lambda_min: f64,
    #[arg(long, default_value_t = 0.5)]
    lambda_max: f64,
    #[arg(long, default_value_t = 0.025)]
    step: f64,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    topo: TopologyArgs,
    #[command(flatten)]
    phys: PhysArgs,
    #[arg(long)]
    schedule: PathBuf,
    /// Power family for links without a `P` line.
    #[arg(long, default_value = "linear")]
    power: FixedPowerKind,
    #[arg(long)]
    power_scale: Option<f64>,
}

fn read_topology(path: &Path) -> Result<Topology> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_topology(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(out.write_all(text.as_bytes())?),
    }
}

fn fixed_powers(
    topology: &Topology,
    kind: FixedPowerKind,
    scale: Option<f64>,
    params: &PhysicalParams,
) -> Result<PowerAssignment> {
    let scale = scale.unwrap_or_else(|| kind.scale_for_margin(params, topology.r_max, 2.0));
    Ok(assign_fixed(&topology.links, kind, scale, params)?)
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Help and version requests are written to `out` and count as success.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            write!(out, "{e}")?;
            return Ok(());
        }
        Err(e) => return Err(anyhow!(e.render().to_string())),
    };
    match cli.command {
        Command::Gen(a) => cmd_gen(a, out),
        Command::Bounds(a) => cmd_bounds(a, out),
        Command::Schedule(a) => cmd_schedule(a, out),
        Command::Run(a) => cmd_run(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Check(a) => cmd_check(a, out),
    }
}

fn cmd_gen(a: GenArgs, out: &mut dyn Write) -> Result<()> {
    let spec = RandomTopologySpec {
        n_nodes: a.nodes,
        n_links: a.links,
        area_side: a.area,
        r_min: a.r_min,
        r_max: a.r_max,
    };
    let topology = gen_random_topology(&spec, a.seed)?;
    emit(out, a.output.as_deref(), &serialize_topology(&topology))
}

fn cmd_bounds(a: BoundsArgs, out: &mut dyn Write) -> Result<()> {
    let p = a.phys.params()?;
    if !(a.r_min > 0.0 && a.r_min <= a.r_max) {
        bail!("need 0 < r-min <= r-max");
    }
    let delta = a.r_min / a.r_max;
    let target = phi_star(p.sigma, p.alpha, p.kappa);
    let phi = a.phi.unwrap_or(target);
    writeln!(out, "delta {delta}")?;
    writeln!(
        out,
        "length_diversity {}",
        (a.r_max / a.r_min).log2().ceil().max(1.0)
    )?;
    writeln!(out, "beta {}", p.beta())?;
    writeln!(out, "phi_star {target}")?;
    writeln!(
        out,
        "separation_bound {}",
        lemma1_bound(a.theta.unwrap_or(delta), p.kappa)?
    )?;
    match m_window(phi, p.sigma, p.alpha, p.kappa) {
        Some(w) => writeln!(out, "m_window {} {}", w.lo, w.hi)?,
        None => writeln!(out, "m_window empty")?,
    }
    match power_ceiling(a.m, p.sigma, p.xi, p.eta, a.r_max, p.kappa, phi) {
        Ok(c) => writeln!(out, "power_ceiling {c}")?,
        Err(e) => writeln!(out, "power_ceiling undefined ({e})")?,
    }
    writeln!(
        out,
        "omega {}",
        omega_bound(p.sigma, p.kappa, p.alpha, delta)
    )?;
    Ok(())
}

fn cmd_schedule(a: ScheduleArgs, out: &mut dyn Write) -> Result<()> {
    let topology = a.topo.load()?;
    let params = a.phys.params()?;
    let weights = match &a.weights {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_weights(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => topology.links.iter().map(|l| (l.id, 1.0)).collect(),
    };
    for id in weights.keys() {
        if topology.link(*id).is_none() {
            bail!("weight given for unknown link {id}");
        }
    }
    let weighted: Vec<WeightedLink> = topology
        .links
        .iter()
        .map(|&l| WeightedLink::new(l, weights.get(&l.id).copied().unwrap_or(0.0)))
        .collect();
    let opts = a.policy.options(&topology);
    let schedule = if a.policy.policy == Policy::Algorithm2 {
        algorithm2(&weighted, &params, &opts)?.schedule
    } else {
        let fixed = fixed_powers(&topology, a.policy.power, a.policy.power_scale, &params)?;
        run_policy(a.policy.policy, &weighted, Some(&fixed), &params, &opts)?
    };
    emit(out, a.output.as_deref(), &serialize_schedule(&schedule))
}

fn cmd_run(a: RunArgs, out: &mut dyn Write) -> Result<()> {
    let topology = a.sim.topo.load()?;
    let params = a.sim.phys.params()?;
    let trace = run(&a.sim.config(&topology, a.lambda), &topology, &params)?;
    if let Some(path) = &a.output {
        fs::write(path, serialize_trace(&trace))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    writeln!(
        out,
        "lambda {} verdict {} slope {:.6} mean_backlog {:.3} final_backlog {} max_power {}",
        a.lambda,
        trace.verdict,
        trace.slope,
        trace.mean_backlog(),
        trace.per_slot_total.last().copied().unwrap_or(0),
        trace.max_power()
    )?;
    if let Some(c) = trace.power_ceiling {
        writeln!(out, "power_ceiling {c}")?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs, out: &mut dyn Write) -> Result<()> {
    if !(a.step > 0.0) {
        bail!("step must be positive");
    }
    let topology = a.sim.topo.load()?;
    let params = a.sim.phys.params()?;
    let grid = lambda_grid(a.lambda_min, a.lambda_max, a.step);
    let result = sweep(
        &a.sim.config(&topology, a.lambda_min),
        &topology,
        &params,
        &grid,
    )?;
    writeln!(
        out,
        "lambda,seed,verdict,slope,mean_backlog,final_backlog,max_power"
    )?;
    for r in &result.rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.3},{},{}",
            r.lambda, r.seed, r.verdict, r.slope, r.mean_backlog, r.final_backlog, r.max_power
        )?;
    }
    for (stable, unstable) in &result.inversions {
        writeln!(
            out,
            "# inversion: stable at {stable} but unstable at {unstable}"
        )?;
    }
    match result.capacity {
        Some(c) => writeln!(out, "capacity {c}")?,
        None => writeln!(out, "capacity none")?,
    }
    Ok(())
}

fn cmd_check(a: CheckArgs, out: &mut dyn Write) -> Result<()> {
    let topology = a.topo.load()?;
    let params = a.phys.params()?;
    let text = fs::read_to_string(&a.schedule)
        .with_context(|| format!("reading {}", a.schedule.display()))?;
    let file =
        parse_schedule(&text).with_context(|| format!("parsing {}", a.schedule.display()))?;
    let mut links = Vec::with_capacity(file.ids.len());
    for id in &file.ids {
        links.push(
            *topology
                .link(*id)
                .ok_or_else(|| anyhow!("schedule names unknown link {id}"))?,
        );
    }
    let mut powers = fixed_powers(&topology, a.power, a.power_scale, &params)?
        .restrict(file.ids.iter().copied());
    if !file.powers.is_empty() {
        let mut merged: std::collections::BTreeMap<_, _> = powers.iter().collect();
        merged.extend(file.powers.iter().map(|(&k, &v)| (k, v)));
        powers = PowerAssignment::from_powers(merged);
    }
    let feasible = check_feasible(&links, &powers, &params)?;
    for l in &links {
        writeln!(
            out,
            "link {} sinr {}",
            l.id,
            sinr(l, &links, &powers, &params)?
        )?;
    }
    writeln!(out, "{}", if feasible { "feasible" } else { "infeasible" })?;
    if !feasible {
        bail!("schedule is infeasible");
    }
    Ok(())
}
