//! Time-slotted queue simulation.
//!
//! Each slot the current queue lengths become link weights, the policy picks
//! a schedule, the simulator re-verifies that schedule against the SINR
//! oracle, and queues evolve as `Q(T+1) = max{0, Q(T) - S(T)} + Y(T)` with
//! truncated Poisson arrivals `Y(T)`.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use thiserror::Error;

use crate::bridging::WeightedLink;
use crate::model::{
    check_feasible, ModelError, Node, PhysicalParams, Point, PowerAssignment, Topology,
};
use crate::power::{assign_fixed, power_ceiling, FixedPowerKind, PowerError};
use crate::schedulers::{algorithm2, run_policy, Policy, ScheduleError, SchedulerOptions};
use crate::separation::phi_star;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("slot {slot}: {source}")]
    Policy {
        slot: usize,
        #[source]
        source: ScheduleError,
    },
    #[error("slot {slot}: policy emitted an infeasible schedule {ids:?}")]
    Infeasible { slot: usize, ids: Vec<usize> },
    #[error("slot {slot}: assigned power {power} exceeds ceiling {ceiling}")]
    CeilingExceeded {
        slot: usize,
        power: f64,
        ceiling: f64,
    },
    #[error("stability window of {got} slots is shorter than the required {need}")]
    WindowTooShort { got: usize, need: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Power(#[from] PowerError),
}

/// Queue lengths in packets, one per link in topology order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueState(pub Vec<u64>);

impl QueueState {
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

/// Applies one slot of queue dynamics with unit link capacity.
pub fn step(q: &QueueState, service: &[bool], arrivals: &[u64]) -> QueueState {
    let counts: Vec<u64> = service.iter().map(|&s| u64::from(s)).collect();
    step_counts(q, &counts, arrivals)
}

/// `Q <- max(0, Q - S) + Y` with `S` packets of service per link.
pub fn step_counts(q: &QueueState, service: &[u64], arrivals: &[u64]) -> QueueState {
    assert_eq!(q.0.len(), service.len(), "service vector length mismatch");
    assert_eq!(q.0.len(), arrivals.len(), "arrival vector length mismatch");
    QueueState(
        q.0.iter()
            .zip(service)
            .zip(arrivals)
            .map(|((&qi, &s), &y)| qi.saturating_sub(s) + y)
            .collect(),
    )
}

struct Arrivals {
    dist: Option<Poisson<f64>>,
    y_max: u64,
}

impl Arrivals {
    fn new(lambda: f64, y_max: u64) -> Result<Self, SimError> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(SimError::Config(format!(
                "lambda must be a finite non-negative rate, got {lambda}"
            )));
        }
        let dist = if lambda == 0.0 {
            None
        } else {
            Some(Poisson::new(lambda).map_err(|e| SimError::Config(e.to_string()))?)
        };
        Ok(Self { dist, y_max })
    }

    fn fill<R: Rng + ?Sized>(&self, out: &mut [u64], rng: &mut R) {
        match &self.dist {
            None => out.fill(0),
            Some(d) => out
                .iter_mut()
                .for_each(|y| *y = (d.sample(rng) as u64).min(self.y_max)),
        }
    }
}

/// I.i.d. Poisson(`lambda`) arrivals per link, truncated at `y_max`.
pub fn poisson_arrivals<R: Rng + ?Sized>(
    lambda: f64,
    n_links: usize,
    y_max: u64,
    rng: &mut R,
) -> Result<Vec<u64>, SimError> {
    let mut out = vec![0; n_links];
    Arrivals::new(lambda, y_max)?.fill(&mut out, rng);
    Ok(out)
}

/// Random deployment: senders uniform in a square, each receiver uniform in
/// the disk of radius `r_max` around its sender (resampled until the length
/// is at least `r_min`), then `n_links` of the pairs picked at random.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomTopologySpec {
    pub n_nodes: usize,
    pub n_links: usize,
    pub area_side: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for RandomTopologySpec {
    /// 100 nodes, 20 links, a 100 x 100 plane, lengths in [1, 5].
    fn default() -> Self {
        Self {
            n_nodes: 100,
            n_links: 20,
            area_side: 100.0,
            r_min: 1.0,
            r_max: 5.0,
        }
    }
}

pub fn gen_random_topology(spec: &RandomTopologySpec, seed: u64) -> Result<Topology, SimError> {
    let pairs = spec.n_nodes / 2;
    if spec.n_links > pairs {
        return Err(SimError::Config(format!(
            "{} links need at least {} nodes",
            spec.n_links,
            2 * spec.n_links
        )));
    }
    if !(spec.r_min > 0.0 && spec.r_min <= spec.r_max) {
        return Err(SimError::Config(format!(
            "need 0 < rMin <= rMax, got [{}, {}]",
            spec.r_min, spec.r_max
        )));
    }
    if !(spec.area_side > 0.0) {
        return Err(SimError::Config("area side must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::with_capacity(2 * pairs);
    for k in 0..pairs {
        let s = Point::new(
            rng.random::<f64>() * spec.area_side,
            rng.random::<f64>() * spec.area_side,
        );
        let t = loop {
            let r = spec.r_max * rng.random::<f64>().sqrt();
            let theta = rng.random::<f64>() * std::f64::consts::TAU;
            let t = Point::new(s.x + r * theta.cos(), s.y + r * theta.sin());
            let d = s.distance(&t);
            if d >= spec.r_min && d <= spec.r_max {
                break t;
            }
        };
        nodes.push(Node {
            id: 2 * k,
            position: s,
        });
        nodes.push(Node {
            id: 2 * k + 1,
            position: t,
        });
    }
    let mut picked = sample(&mut rng, pairs, spec.n_links).into_vec();
    picked.sort_unstable();
    let specs: Vec<_> = picked
        .iter()
        .enumerate()
        .map(|(id, &k)| (id, 2 * k, 2 * k + 1))
        .collect();
    Ok(Topology::new(nodes, &specs, spec.r_min, spec.r_max)?
        .with_area(spec.area_side, spec.area_side))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerMode {
    /// Per-slot iterative power control (Algorithm 2 only).
    Adjustable,
    /// A fixed assignment of the given family; `scale: None` picks the scale
    /// at which every link clears twice its decodability floor.
    Fixed {
        kind: FixedPowerKind,
        scale: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConfig {
    /// Trailing fraction of the trace that is evaluated.
    pub window_frac: f64,
    /// Slope (packets / slot) at or below which the backlog counts as flat.
    pub slope_tol: f64,
    pub min_window: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            window_frac: 0.5,
            slope_tol: 0.01,
            min_window: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub horizon: usize,
    pub lambda: f64,
    pub seed: u64,
    pub policy: Policy,
    pub power: PowerMode,
    pub init_queue_range: (u64, u64),
    pub y_max: u64,
    pub scheduler: SchedulerOptions,
    pub stability: StabilityConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 100_000,
            lambda: 0.1,
            seed: 0,
            policy: Policy::Algorithm2,
            power: PowerMode::Adjustable,
            init_queue_range: (100, 300),
            y_max: 50,
            scheduler: SchedulerOptions::default(),
            stability: StabilityConfig::default(),
        }
    }
}

impl SimConfig {
    /// Shorter horizon for CI-sized runs.
    pub const FAST_HORIZON: usize = 20_000;

    pub fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::Config("horizon must be at least one slot".into()));
        }
        if self.init_queue_range.0 > self.init_queue_range.1 {
            return Err(SimError::Config("initial queue range is inverted".into()));
        }
        match (self.policy, self.power) {
            (Policy::Algorithm2, PowerMode::Fixed { .. }) => Err(SimError::Config(
                "alg2 assigns its own powers; use adjustable power".into(),
            )),
            (p, PowerMode::Adjustable) if p != Policy::Algorithm2 => Err(SimError::Config(
                format!("{p} needs a fixed power assignment"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityAssessment {
    pub verdict: Verdict,
    /// Least-squares slope of the total backlog over the window.
    pub slope: f64,
    pub window_mean: f64,
}

/// Classifies a backlog series by the least-squares slope of its trailing
/// window: unstable when the slope reaches `10 * slope_tol`, stable when it is
/// at most `slope_tol` and the final backlog is within ten times the window
/// minimum (a minimum of zero counts as one packet), inconclusive otherwise.
pub fn stability_verdict(
    totals: &[u64],
    cfg: &StabilityConfig,
) -> Result<StabilityAssessment, SimError> {
    let len = ((totals.len() as f64) * cfg.window_frac).floor() as usize;
    if len < cfg.min_window.max(2) {
        return Err(SimError::WindowTooShort {
            got: len,
            need: cfg.min_window.max(2),
        });
    }
    let window = &totals[totals.len() - len..];
    let n = len as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = window.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &v) in window.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (v as f64 - y_mean);
        sxx += dx * dx;
    }
    let slope = sxy / sxx;
    let floor = window.iter().copied().min().unwrap_or(0).max(1);
    let last = *window.last().unwrap_or(&0);
    let verdict = if slope >= 10.0 * cfg.slope_tol {
        Verdict::Unstable
    } else if slope <= cfg.slope_tol && last <= 10 * floor {
        Verdict::Stable
    } else {
        Verdict::Inconclusive
    };
    Ok(StabilityAssessment {
        verdict,
        slope,
        window_mean: y_mean,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacklogTrace {
    pub per_slot_total: Vec<u64>,
    pub scheduled_count: Vec<usize>,
    /// Largest transmit power among the links scheduled in each slot
    /// (0 for an empty slot).
    pub max_power_per_slot: Vec<f64>,
    pub verdict: Verdict,
    pub slope: f64,
    /// Power ceiling for the topology's longest link length and the phi
    /// target; only meaningful for adjustable power.
    pub power_ceiling: Option<f64>,
}

impl BacklogTrace {
    pub fn horizon(&self) -> usize {
        self.per_slot_total.len()
    }

    pub fn mean_backlog(&self) -> f64 {
        if self.per_slot_total.is_empty() {
            return 0.0;
        }
        self.per_slot_total.iter().map(|&v| v as f64).sum::<f64>()
            / self.per_slot_total.len() as f64
    }

    pub fn max_power(&self) -> f64 {
        self.max_power_per_slot.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs one simulation. Deterministic in `(config, topology, params)`.
pub fn run(
    config: &SimConfig,
    topology: &Topology,
    params: &PhysicalParams,
) -> Result<BacklogTrace, SimError> {
    config.validate()?;
    params.validate()?;
    let links = &topology.links;
    let n = links.len();
    let index: HashMap<usize, usize> = links.iter().enumerate().map(|(i, l)| (l.id, i)).collect();
    let fixed: Option<PowerAssignment> = match config.power {
        PowerMode::Adjustable => None,
        PowerMode::Fixed { kind, scale } => {
            let scale = scale.unwrap_or_else(|| kind.scale_for_margin(params, topology.r_max, 2.0));
            Some(assign_fixed(links, kind, scale, params)?)
        }
    };
    let global_ceiling = match config.power {
        PowerMode::Adjustable => Some(power_ceiling(
            config.scheduler.m,
            params.sigma,
            params.xi,
            params.eta,
            topology.r_max,
            params.kappa,
            phi_star(params.sigma, params.alpha, params.kappa),
        )?),
        PowerMode::Fixed { .. } => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (lo, hi) = config.init_queue_range;
    let mut q = QueueState((0..n).map(|_| rng.random_range(lo..=hi)).collect());
    let arrivals = Arrivals::new(config.lambda, config.y_max)?;

    let mut per_slot_total = Vec::with_capacity(config.horizon);
    let mut scheduled_count = Vec::with_capacity(config.horizon);
    let mut max_power_per_slot = Vec::with_capacity(config.horizon);
    let mut service = vec![false; n];
    let mut y = vec![0u64; n];
    let mut weighted: Vec<WeightedLink> =
        links.iter().map(|&l| WeightedLink::new(l, 0.0)).collect();

    for slot in 0..config.horizon {
        for (w, &qi) in weighted.iter_mut().zip(&q.0) {
            w.weight = qi as f64;
        }
        let wrap = |source| SimError::Policy { slot, source };
        let schedule = if config.policy == Policy::Algorithm2 {
            let outcome = algorithm2(&weighted, params, &config.scheduler).map_err(wrap)?;
            let peak = outcome.schedule.powers.p_max();
            if peak > outcome.ceiling * (1.0 + 1e-9) {
                return Err(SimError::CeilingExceeded {
                    slot,
                    power: peak,
                    ceiling: outcome.ceiling,
                });
            }
            outcome.schedule
        } else {
            run_policy(
                config.policy,
                &weighted,
                fixed.as_ref(),
                params,
                &config.scheduler,
            )
            .map_err(wrap)?
        };
        if !check_feasible(&schedule.links, &schedule.powers, params)? {
            return Err(SimError::Infeasible {
                slot,
                ids: schedule.ids(),
            });
        }

        service.fill(false);
        for l in &schedule.links {
            service[index[&l.id]] = true;
        }
        arrivals.fill(&mut y, &mut rng);
        q = step(&q, &service, &y);

        per_slot_total.push(q.total());
        scheduled_count.push(schedule.len());
        max_power_per_slot.push(schedule.powers.p_max());
    }

    let (verdict, slope) = match stability_verdict(&per_slot_total, &config.stability) {
        Ok(a) => (a.verdict, a.slope),
        Err(_) => (Verdict::Inconclusive, f64::NAN),
    };
    Ok(BacklogTrace {
        per_slot_total,
        scheduled_count,
        max_power_per_slot,
        verdict,
        slope,
        power_ceiling: global_ceiling,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub seed: u64,
    pub verdict: Verdict,
    pub slope: f64,
    pub mean_backlog: f64,
    pub final_backlog: u64,
    pub max_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Largest stable rate on the grid, if any.
    pub capacity: Option<f64>,
    pub rows: Vec<SweepRow>,
    /// `(stable rate, smaller unstable rate)` pairs.
    pub inversions: Vec<(f64, f64)>,
}

/// Runs every rate of an ascending grid, in parallel, with seed
/// `template.seed + index`. Rows come back in grid order.
pub fn sweep(
    template: &SimConfig,
    topology: &Topology,
    params: &PhysicalParams,
    grid: &[f64],
) -> Result<SweepResult, SimError> {
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(SimError::Config(
            "lambda grid must be sorted ascending".into(),
        ));
    }
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let cfg = SimConfig {
                lambda,
                seed: template.seed.wrapping_add(i as u64),
                ..template.clone()
            };
            let trace = run(&cfg, topology, params)?;
            Ok(SweepRow {
                lambda,
                seed: cfg.seed,
                verdict: trace.verdict,
                slope: trace.slope,
                mean_backlog: trace.mean_backlog(),
                final_backlog: trace.per_slot_total.last().copied().unwrap_or(0),
                max_power: trace.max_power(),
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let capacity = rows
        .iter()
        .filter(|r| r.verdict == Verdict::Stable)
        .map(|r| r.lambda)
        .fold(None, |acc: Option<f64>, l| {
            Some(acc.map_or(l, |a| a.max(l)))
        });
    let mut inversions = Vec::new();
    for s in rows.iter().filter(|r| r.verdict == Verdict::Stable) {
        for u in rows
            .iter()
            .filter(|r| r.verdict == Verdict::Unstable && r.lambda < s.lambda)
        {
            inversions.push((s.lambda, u.lambda));
        }
    }
    Ok(SweepResult {
        capacity,
        rows,
        inversions,
    })
}

/// `lo, lo + step, ...` up to `hi` inclusive (within half a step).
pub fn lambda_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0, "grid step must be positive");
    let count = ((hi - lo) / step + 0.5).floor().max(0.0) as usize;
    // rounded to 1e-9 so grid points print cleanly
    (0..=count)
        .map(|i| ((lo + step * i as f64) * 1e9).round() / 1e9)
        .collect()
}
