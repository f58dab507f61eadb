//! Per-slot scheduling policies.
//!
//! * [`algorithm2`]: adjustable power. Bridge, refine into phi*-separation
//!   sets, keep the heaviest, assign powers iteratively with m = 2.
//! * [`algorithm3`]: fixed power. Bridge, optionally keep the heaviest dyadic
//!   power band, refine into feasible sets by first fit, keep the heaviest.
//! * [`baseline_greedy`] and [`baseline_weight`]: the comparison policies.
//! * [`exact_mwisl`]: exhaustive oracle for small fixed-power instances.
//!
//! Links with non-positive weight are never scheduled. Every policy returns a
//! [`Schedule`] that is SINR-feasible and node-disjoint.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::bridging::{
    bridge, by_weight_desc, total_weight, BridgingError, MwisdSolver, WeightedLink,
};
use crate::model::{
    check_feasible, FeasibleSetBuilder, Link, LinkId, ModelError, PhysicalParams, PowerAssignment,
};
use crate::power::{iterative_power_assign, power_ceiling, PowerError, DEFAULT_M};
use crate::separation::{
    first_fit_partition, max_length, phi_star, separation_value, SeparationError,
    SeparationOptions, SeparationReport,
};

/// Default instance-size cap for [`exact_mwisl`].
pub const EXACT_MWISL_CAP: usize = 15;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Bridging(#[from] BridgingError),
    #[error(transparent)]
    Separation(#[from] SeparationError),
    #[error(transparent)]
    Power(#[from] PowerError),
    #[error("exact MWISL capped at {cap} links, got {got}")]
    TooLarge { cap: usize, got: usize },
    #[error("policy {0} needs a fixed power assignment")]
    NeedsFixedPower(Policy),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schedule {
    pub links: Vec<Link>,
    pub powers: PowerAssignment,
    pub total_weight: f64,
}

impl Schedule {
    fn from_weighted(chosen: &[WeightedLink], powers: PowerAssignment) -> Self {
        Self {
            links: chosen.iter().map(|w| w.link).collect(),
            powers,
            total_weight: total_weight(chosen),
        }
    }

    fn with_fixed(chosen: &[WeightedLink], powers: &PowerAssignment) -> Self {
        Self::from_weighted(chosen, powers.restrict(chosen.iter().map(|w| w.link.id)))
    }

    pub fn ids(&self) -> Vec<LinkId> {
        self.links.iter().map(|l| l.id).collect()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn is_feasible(&self, params: &PhysicalParams) -> Result<bool, ModelError> {
        check_feasible(&self.links, &self.powers, params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    Algorithm2,
    Algorithm3,
    Greedy,
    Weight,
    Exact,
}

impl Policy {
    pub fn needs_fixed_power(self) -> bool {
        !matches!(self, Policy::Algorithm2)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Algorithm2 => "alg2",
            Policy::Algorithm3 => "alg3",
            Policy::Greedy => "greedy",
            Policy::Weight => "weight",
            Policy::Exact => "exact",
        })
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "alg2" | "algorithm2" => Ok(Policy::Algorithm2),
            "alg3" | "algorithm3" => Ok(Policy::Algorithm3),
            "greedy" => Ok(Policy::Greedy),
            "weight" => Ok(Policy::Weight),
            "exact" => Ok(Policy::Exact),
            other => Err(format!("unknown policy `{other}`")),
        }
    }
}

/// Which length normalizes separation sums.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ReferenceLength {
    /// Longest link of the set being refined.
    #[default]
    SetMax,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerOptions {
    pub solver: MwisdSolver,
    /// Group base for length grouping; `None` disables grouping.
    pub length_grouping: Option<f64>,
    /// Shortest link length used as the grouping origin.
    pub r_min: f64,
    /// Algorithm 3 power banding kicks in when rho exceeds this.
    pub rho_threshold: f64,
    pub m: f64,
    pub reference: ReferenceLength,
    pub separation: SeparationOptions,
    pub exact_cap: usize,
}

impl Default for SchedulerOptions {
    fn default() -> Self {
        Self {
            solver: MwisdSolver::Greedy,
            length_grouping: None,
            r_min: 1.0,
            rho_threshold: 2.0,
            m: DEFAULT_M,
            reference: ReferenceLength::SetMax,
            separation: SeparationOptions::default(),
            exact_cap: EXACT_MWISL_CAP,
        }
    }
}

fn positive(links: &[WeightedLink]) -> Vec<WeightedLink> {
    let mut out: Vec<WeightedLink> = links.iter().filter(|w| w.weight > 0.0).copied().collect();
    out.sort_by(by_weight_desc);
    out
}

/// Index of the heaviest group; ties go to the earliest.
fn heaviest<T>(groups: &[T], weight: impl Fn(&T) -> f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, g) in groups.iter().enumerate() {
        let w = weight(g);
        if best.is_none_or(|(_, bw)| w > bw) {
            best = Some((i, w));
        }
    }
    best.map(|(i, _)| i)
}

/// Groups links by `floor(log_g(length / r_min))`, closing the top group so
/// the longest link never sits alone on a boundary, and returns the heaviest
/// group (ties to the smallest index).
pub fn length_group_preprocess(links: &[WeightedLink], g: f64, r_min: f64) -> Vec<WeightedLink> {
    assert!(g > 1.0, "group base must exceed 1");
    if links.is_empty() {
        return Vec::new();
    }
    let level = |len: f64| ((len / r_min).ln() / g.ln()).max(0.0);
    let longest = links.iter().map(|w| w.link.length).fold(0.0, f64::max);
    let groups_needed = (level(longest).ceil() as usize).max(1);
    let mut groups: Vec<Vec<WeightedLink>> = vec![Vec::new(); groups_needed];
    for w in links {
        let j = (level(w.link.length).floor() as usize).min(groups_needed - 1);
        groups[j].push(*w);
    }
    let best = heaviest(&groups, |g| total_weight(g)).unwrap_or(0);
    std::mem::take(&mut groups[best])
}

/// Intermediate state of an [`algorithm2`] run, kept for verification.
#[derive(Debug, Clone, PartialEq)]
pub struct Algorithm2Outcome {
    pub schedule: Schedule,
    /// Output of the bridging step.
    pub bridged: Vec<WeightedLink>,
    /// Separation of the chosen set before power assignment.
    pub separation: SeparationReport,
    pub phi_target: f64,
    /// Power ceiling for the chosen set's reference length and phi target.
    pub ceiling: f64,
}

/// Adjustable-power scheduling.
pub fn algorithm2(
    links: &[WeightedLink],
    params: &PhysicalParams,
    opts: &SchedulerOptions,
) -> Result<Algorithm2Outcome, ScheduleError> {
    let mut input = positive(links);
    if let Some(g) = opts.length_grouping {
        input = length_group_preprocess(&input, g, opts.r_min);
    }
    let bridged = bridge(&input, params.alpha, opts.solver)?;
    let plain: Vec<Link> = bridged.iter().map(|w| w.link).collect();
    let reference_r = match opts.reference {
        ReferenceLength::SetMax => max_length(&plain),
        ReferenceLength::Fixed(r) => r,
    };
    let phi_target = phi_star(params.sigma, params.alpha, params.kappa);
    if bridged.is_empty() {
        return Ok(Algorithm2Outcome {
            schedule: Schedule::default(),
            bridged,
            separation: SeparationReport {
                phi: 0.0,
                worst_node: None,
                reference_r,
            },
            phi_target,
            ceiling: 0.0,
        });
    }
    let bins = first_fit_partition(
        &plain,
        phi_target,
        reference_r,
        params.kappa,
        opts.separation,
    );
    let weight_of = |bin: &Vec<Link>| -> f64 {
        bin.iter()
            .map(|l| {
                bridged
                    .iter()
                    .find(|w| w.link.id == l.id)
                    .map_or(0.0, |w| w.weight)
            })
            .sum()
    };
    let best = heaviest(&bins, weight_of).unwrap_or(0);
    let mut chosen: Vec<WeightedLink> = bins[best]
        .iter()
        .filter_map(|l| bridged.iter().find(|w| w.link.id == l.id).copied())
        .collect();
    chosen.sort_by(by_weight_desc);
    let ordered: Vec<Link> = chosen.iter().map(|w| w.link).collect();
    let separation = separation_value(&ordered, reference_r, params.kappa, opts.separation)?;
    let powers = iterative_power_assign(&ordered, opts.m, params);
    let ceiling = power_ceiling(
        opts.m,
        params.sigma,
        params.xi,
        params.eta,
        reference_r,
        params.kappa,
        phi_target,
    )?;
    Ok(Algorithm2Outcome {
        schedule: Schedule::from_weighted(&chosen, powers),
        bridged,
        separation,
        phi_target,
        ceiling,
    })
}

/// Result of [`first_fit_isl_refine`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IslRefinement {
    pub bins: Vec<Vec<WeightedLink>>,
    /// Links that cannot decode even alone.
    pub rejected: Vec<LinkId>,
}

/// First-fit refinement into feasible sets, scanning in canonical weight order.
pub fn first_fit_isl_refine(
    links: &[WeightedLink],
    powers: &PowerAssignment,
    params: &PhysicalParams,
) -> Result<IslRefinement, ScheduleError> {
    let mut ordered = links.to_vec();
    ordered.sort_by(by_weight_desc);
    let mut builders: Vec<(FeasibleSetBuilder, Vec<WeightedLink>)> = Vec::new();
    let mut rejected = Vec::new();
    for w in ordered {
        let p = powers.require(w.link.id)?;
        // try_add leaves a builder untouched when it refuses the link
        if let Some(i) = builders
            .iter_mut()
            .position(|(b, _)| b.try_add(&w.link, p, params))
        {
            builders[i].1.push(w);
            continue;
        }
        let mut fresh = FeasibleSetBuilder::new();
        if fresh.try_add(&w.link, p, params) {
            builders.push((fresh, vec![w]));
        } else {
            rejected.push(w.link.id);
        }
    }
    Ok(IslRefinement {
        bins: builders.into_iter().map(|(_, m)| m).collect(),
        rejected,
    })
}

/// Keeps the heaviest dyadic power band `[pMin 2^j, pMin 2^(j+1))`, with
/// `ceil(log2 rho)` bands and the top band closed.
fn heaviest_power_band(
    links: &[WeightedLink],
    powers: &PowerAssignment,
) -> Result<Vec<WeightedLink>, ScheduleError> {
    let ps: Vec<f64> = links
        .iter()
        .map(|w| powers.require(w.link.id))
        .collect::<Result<_, _>>()?;
    let p_min = ps.iter().copied().fold(f64::INFINITY, f64::min);
    let p_max = ps.iter().copied().fold(0.0, f64::max);
    let bands = ((p_max / p_min).log2().ceil() as usize).max(1);
    let mut groups: Vec<Vec<WeightedLink>> = vec![Vec::new(); bands];
    for (w, p) in links.iter().zip(ps) {
        let j = ((p / p_min).log2().floor().max(0.0) as usize).min(bands - 1);
        groups[j].push(*w);
    }
    let best = heaviest(&groups, |g| total_weight(g)).unwrap_or(0);
    Ok(std::mem::take(&mut groups[best]))
}

/// Fixed-power scheduling.
pub fn algorithm3(
    links: &[WeightedLink],
    powers: &PowerAssignment,
    params: &PhysicalParams,
    opts: &SchedulerOptions,
) -> Result<Schedule, ScheduleError> {
    let mut input = positive(links);
    if let Some(g) = opts.length_grouping {
        input = length_group_preprocess(&input, g, opts.r_min);
    }
    let mut candidates = bridge(&input, params.alpha, opts.solver)?;
    if candidates.is_empty() {
        return Ok(Schedule::default());
    }
    if powers.rho() > opts.rho_threshold {
        candidates = heaviest_power_band(&candidates, powers)?;
    }
    let refined = first_fit_isl_refine(&candidates, powers, params)?;
    let best = heaviest(&refined.bins, |b| total_weight(b));
    Ok(match best {
        Some(i) => Schedule::with_fixed(&refined.bins[i], powers),
        None => Schedule::default(),
    })
}

fn greedy_fill<'a>(
    ordered: impl Iterator<Item = &'a WeightedLink>,
    powers: &PowerAssignment,
    params: &PhysicalParams,
) -> Result<Vec<WeightedLink>, ScheduleError> {
    let mut builder = FeasibleSetBuilder::new();
    let mut chosen = Vec::new();
    for w in ordered {
        if builder.try_add(&w.link, powers.require(w.link.id)?, params) {
            chosen.push(*w);
        }
    }
    Ok(chosen)
}

/// Feasibility-checked greedy in decreasing weight.
pub fn baseline_greedy(
    links: &[WeightedLink],
    powers: &PowerAssignment,
    params: &PhysicalParams,
) -> Result<Schedule, ScheduleError> {
    let ordered = positive(links);
    let chosen = greedy_fill(ordered.iter(), powers, params)?;
    Ok(Schedule::with_fixed(&chosen, powers))
}

/// Weight-banded baseline. Links lighter than `W_max / (2 |E|)` are pruned
/// and the survivors split into dyadic weight bands; each band is packed
/// shortest-first and the heaviest packing wins.
pub fn baseline_weight(
    links: &[WeightedLink],
    powers: &PowerAssignment,
    params: &PhysicalParams,
) -> Result<Schedule, ScheduleError> {
    let input = positive(links);
    let Some(w_max) = input.first().map(|w| w.weight) else {
        return Ok(Schedule::default());
    };
    let threshold = w_max / (2.0 * links.len() as f64);
    let survivors: Vec<WeightedLink> = input
        .into_iter()
        .filter(|w| w.weight >= threshold)
        .collect();
    let w_min = survivors
        .iter()
        .map(|w| w.weight)
        .fold(f64::INFINITY, f64::min);
    let bands = ((w_max / w_min).log2().ceil() as usize).max(1);
    let mut groups: Vec<Vec<WeightedLink>> = vec![Vec::new(); bands];
    for w in &survivors {
        let j = ((w.weight / w_min).log2().floor().max(0.0) as usize).min(bands - 1);
        groups[j].push(*w);
    }
    let packs = groups
        .iter_mut()
        .map(|g| {
            g.sort_by(|a, b| {
                a.link
                    .length
                    .total_cmp(&b.link.length)
                    .then(a.link.id.cmp(&b.link.id))
            });
            greedy_fill(g.iter(), powers, params)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let best = heaviest(&packs, |p| total_weight(p)).unwrap_or(0);
    Ok(Schedule::with_fixed(&packs[best], powers))
}

/// Maximum-weight feasible subset under fixed powers, by branch and bound.
/// Ties go to the lexicographically smallest sorted id set.
pub fn exact_mwisl(
    links: &[WeightedLink],
    powers: &PowerAssignment,
    params: &PhysicalParams,
    cap: usize,
) -> Result<Schedule, ScheduleError> {
    if links.len() > cap {
        return Err(ScheduleError::TooLarge {
            cap,
            got: links.len(),
        });
    }
    let ordered = positive(links);
    let ps: Vec<f64> = ordered
        .iter()
        .map(|w| powers.require(w.link.id))
        .collect::<Result<_, _>>()?;
    let mut suffix = vec![0.0; ordered.len() + 1];
    for i in (0..ordered.len()).rev() {
        suffix[i] = suffix[i + 1] + ordered[i].weight;
    }
    struct Search<'a> {
        ordered: &'a [WeightedLink],
        ps: &'a [f64],
        suffix: Vec<f64>,
        params: &'a PhysicalParams,
        best: Vec<usize>,
        best_weight: f64,
    }
    impl Search<'_> {
        fn ids(&self, set: &[usize]) -> Vec<LinkId> {
            let mut v: Vec<_> = set.iter().map(|&i| self.ordered[i].link.id).collect();
            v.sort_unstable();
            v
        }

        fn go(
            &mut self,
            pos: usize,
            current: &mut Vec<usize>,
            builder: &FeasibleSetBuilder,
            weight: f64,
        ) {
            if weight + self.suffix[pos] < self.best_weight {
                return;
            }
            if pos == self.ordered.len() {
                if weight > self.best_weight
                    || (weight == self.best_weight && self.ids(current) < self.ids(&self.best))
                {
                    self.best_weight = weight;
                    self.best = current.clone();
                }
                return;
            }
            let mut with = builder.clone();
            if with.try_add(&self.ordered[pos].link, self.ps[pos], self.params) {
                current.push(pos);
                self.go(pos + 1, current, &with, weight + self.ordered[pos].weight);
                current.pop();
            }
            self.go(pos + 1, current, builder, weight);
        }
    }
    let mut search = Search {
        ordered: &ordered,
        ps: &ps,
        suffix,
        params,
        best: Vec::new(),
        best_weight: 0.0,
    };
    search.go(0, &mut Vec::new(), &FeasibleSetBuilder::new(), 0.0);
    let chosen: Vec<WeightedLink> = search.best.iter().map(|&i| ordered[i]).collect();
    Ok(Schedule::with_fixed(&chosen, powers))
}

/// Runs `policy` on one slot. `fixed` must be present for every policy but
/// Algorithm 2, which ignores it.
pub fn run_policy(
    policy: Policy,
    links: &[WeightedLink],
    fixed: Option<&PowerAssignment>,
    params: &PhysicalParams,
    opts: &SchedulerOptions,
) -> Result<Schedule, ScheduleError> {
    if policy == Policy::Algorithm2 {
        return Ok(algorithm2(links, params, opts)?.schedule);
    }
    let powers = fixed.ok_or(ScheduleError::NeedsFixedPower(policy))?;
    match policy {
        Policy::Algorithm3 => algorithm3(links, powers, params, opts),
        Policy::Greedy => baseline_greedy(links, powers, params),
        Policy::Weight => baseline_weight(links, powers, params),
        Policy::Exact => exact_mwisl(links, powers, params, opts.exact_cap),
        Policy::Algorithm2 => unreachable!(),
    }
}
