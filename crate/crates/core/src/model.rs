//! Geometric and physical primitives of the SINR interference model.
//!
//! Everything here is a pure function of its arguments. The feasibility
//! oracle [`check_feasible`] is the reference every scheduler is tested
//! against; [`FeasibleSetBuilder`] is its incremental counterpart used in
//! the greedy inner loops and produces bit-identical interference sums when
//! links are added in the same order.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

pub type NodeId = usize;
pub type LinkId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("degenerate link: sender and receiver coincide")]
    ZeroDistance,
    #[error("no power assigned to link {0}")]
    MissingPower(LinkId),
    #[error("link {0} cannot decode even in isolation (p*g <= sigma*xi)")]
    Undecodable(LinkId),
    #[error("invalid physical parameter: {0}")]
    InvalidParams(String),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
}

/// `x^kappa`, using exact integer powers when the exponent is integral.
#[inline]
pub fn pow_kappa(x: f64, kappa: f64) -> f64 {
    if kappa.fract() == 0.0 && kappa.abs() < 64.0 {
        x.powi(kappa as i32)
    } else {
        x.powf(kappa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn scaled(&self, factor: f64) -> Point {
        Point::new(self.x * factor, self.y * factor)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub position: Point,
}

/// A directed link. Endpoint positions are carried along so interference
/// sums never need a topology lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub id: LinkId,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub tx: Point,
    pub rx: Point,
    pub length: f64,
}

impl Link {
    pub fn new(id: LinkId, sender: &Node, receiver: &Node) -> Self {
        Self {
            id,
            sender: sender.id,
            receiver: receiver.id,
            tx: sender.position,
            rx: receiver.position,
            length: sender.position.distance(&receiver.position),
        }
    }

    pub fn shares_node(&self, other: &Link) -> bool {
        self.sender == other.sender
            || self.sender == other.receiver
            || self.receiver == other.sender
            || self.receiver == other.receiver
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    pub r_min: f64,
    pub r_max: f64,
    /// Deployment area (width, height), informational only.
    pub area: Option<(f64, f64)>,
}

impl Topology {
    /// Builds and validates a topology from node records and
    /// `(link id, sender id, receiver id)` triples.
    pub fn new(
        nodes: Vec<Node>,
        link_specs: &[(LinkId, NodeId, NodeId)],
        r_min: f64,
        r_max: f64,
    ) -> Result<Self, ModelError> {
        if !(r_min > 0.0) || !(r_min <= r_max) || !r_max.is_finite() {
            return Err(ModelError::InvalidTopology(format!(
                "need 0 < rMin <= rMax, got rMin={r_min}, rMax={r_max}"
            )));
        }
        let mut by_id = BTreeMap::new();
        for n in &nodes {
            if by_id.insert(n.id, *n).is_some() {
                return Err(ModelError::InvalidTopology(format!(
                    "duplicate node id {}",
                    n.id
                )));
            }
        }
        let mut seen = HashSet::new();
        let mut links = Vec::with_capacity(link_specs.len());
        for &(id, s, t) in link_specs {
            if !seen.insert(id) {
                return Err(ModelError::InvalidTopology(format!(
                    "duplicate link id {id}"
                )));
            }
            let sn = by_id.get(&s).ok_or_else(|| {
                ModelError::InvalidTopology(format!("link {id} references missing node {s}"))
            })?;
            let tn = by_id.get(&t).ok_or_else(|| {
                ModelError::InvalidTopology(format!("link {id} references missing node {t}"))
            })?;
            if s == t {
                return Err(ModelError::InvalidTopology(format!(
                    "link {id} has sender == receiver"
                )));
            }
            let link = Link::new(id, sn, tn);
            if link.length < r_min || link.length > r_max {
                return Err(ModelError::InvalidTopology(format!(
                    "link {id} length {} outside [{r_min}, {r_max}]",
                    link.length
                )));
            }
            links.push(link);
        }
        Ok(Self {
            nodes,
            links,
            r_min,
            r_max,
            area: None,
        })
    }

    pub fn with_area(mut self, width: f64, height: f64) -> Self {
        self.area = Some((width, height));
        self
    }

    /// delta = r / R, in (0, 1].
    pub fn delta(&self) -> f64 {
        self.r_min / self.r_max
    }

    /// Length diversity log2(R / r).
    pub fn length_diversity(&self) -> f64 {
        (self.r_max / self.r_min).log2()
    }

    pub fn link(&self, id: LinkId) -> Option<&Link> {
        self.links.iter().find(|l| l.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Reference loss factor.
    pub eta: f64,
    /// Path-loss exponent.
    pub kappa: f64,
    /// Ambient noise power.
    pub xi: f64,
    /// SINR threshold.
    pub sigma: f64,
    /// Disk-scaling factor used by the bridging step.
    pub alpha: f64,
}

impl Default for PhysicalParams {
    /// kappa = 3 and sigma = 10 as in the reference experiments; eta and xi
    /// are not fixed there, so 1 and 0.01 are configuration defaults.
    fn default() -> Self {
        Self {
            eta: 1.0,
            kappa: 3.0,
            xi: 0.01,
            sigma: 10.0,
            alpha: 2.0,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |what: &str| Err(ModelError::InvalidParams(what.to_string()));
        if !(self.kappa > 2.0 && self.kappa < 5.0) {
            return bad("kappa must lie in (2, 5)");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.xi > 0.0) {
            return bad("xi must be positive");
        }
        if !(self.eta > 0.0) {
            return bad("eta must be positive");
        }
        if !(self.alpha > 1.0) {
            return bad("alpha must exceed 1");
        }
        Ok(())
    }

    /// beta = (2 alpha - 1) / (alpha - 1).
    pub fn beta(&self) -> f64 {
        beta(self.alpha)
    }

    /// Minimum power that lets a link of length `r` decode with no
    /// interference: sigma * xi * r^kappa / eta.
    pub fn decodability_floor(&self, r: f64) -> f64 {
        self.sigma * self.xi * pow_kappa(r, self.kappa) / self.eta
    }
}

pub fn beta(alpha: f64) -> f64 {
    (2.0 * alpha - 1.0) / (alpha - 1.0)
}

/// Per-link transmit powers with their extremes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerAssignment {
    powers: BTreeMap<LinkId, f64>,
    p_min: f64,
    p_max: f64,
}

impl PowerAssignment {
    pub fn from_powers(powers: BTreeMap<LinkId, f64>) -> Self {
        let p_min = powers.values().copied().fold(f64::INFINITY, f64::min);
        let p_max = powers.values().copied().fold(0.0, f64::max);
        let p_min = if powers.is_empty() { 0.0 } else { p_min };
        Self {
            powers,
            p_min,
            p_max,
        }
    }

    pub fn uniform(links: &[Link], power: f64) -> Self {
        Self::from_powers(links.iter().map(|l| (l.id, power)).collect())
    }

    #[inline]
    pub fn get(&self, id: LinkId) -> Option<f64> {
        self.powers.get(&id).copied()
    }

    #[inline]
    pub fn require(&self, id: LinkId) -> Result<f64, ModelError> {
        self.get(id).ok_or(ModelError::MissingPower(id))
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    /// rho = pMax / pMin; 1 for an empty assignment.
    pub fn rho(&self) -> f64 {
        if self.powers.is_empty() {
            1.0
        } else {
            self.p_max / self.p_min
        }
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LinkId, f64)> + '_ {
        self.powers.iter().map(|(&k, &v)| (k, v))
    }

    /// Restriction to the given link ids (missing ids are skipped).
    pub fn restrict(&self, ids: impl IntoIterator<Item = LinkId>) -> Self {
        Self::from_powers(
            ids.into_iter()
                .filter_map(|id| self.get(id).map(|p| (id, p)))
                .collect(),
        )
    }

    /// Multiplies every power by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_powers(self.powers.iter().map(|(&k, &v)| (k, v * factor)).collect())
    }
}

/// min{eta d^-kappa, 1}, with d = 0 mapping to the clamp value 1.
#[inline]
fn gain_at(d: f64, params: &PhysicalParams) -> f64 {
    if d == 0.0 {
        return 1.0;
    }
    (params.eta / pow_kappa(d, params.kappa)).min(1.0)
}

/// Path gain min{eta * d(s,t)^-kappa, 1}.
pub fn path_gain(
    sender: Point,
    receiver: Point,
    params: &PhysicalParams,
) -> Result<f64, ModelError> {
    let d = sender.distance(&receiver);
    if d == 0.0 {
        return Err(ModelError::ZeroDistance);
    }
    Ok(gain_at(d, params))
}

#[inline]
fn received(power: f64, from: &Point, at: &Point, params: &PhysicalParams) -> f64 {
    power * gain_at(from.distance(at), params)
}

/// Interference at `link`'s receiver from `active`, excluding the link itself.
fn interference(
    link: &Link,
    active: &[Link],
    powers: &PowerAssignment,
    params: &PhysicalParams,
) -> Result<f64, ModelError> {
    let mut sum = 0.0;
    for other in active {
        if other.id == link.id {
            continue;
        }
        sum += received(powers.require(other.id)?, &other.tx, &link.rx, params);
    }
    Ok(sum)
}

/// SINR of `link` while every link in `active` transmits. The link's own
/// contribution is excluded whether or not it is a member of `active`.
pub fn sinr(
    link: &Link,
    active: &[Link],
    powers: &PowerAssignment,
    params: &PhysicalParams,
) -> Result<f64, ModelError> {
    let signal = received(powers.require(link.id)?, &link.tx, &link.rx, params);
    Ok(signal / (interference(link, active, powers, params)? + params.xi))
}

fn node_disjoint(links: &[Link]) -> bool {
    let mut used = HashSet::with_capacity(links.len() * 2);
    links
        .iter()
        .all(|l| used.insert(l.sender) && used.insert(l.receiver))
}

/// True iff every link meets the SINR threshold with all links active and
/// no two links share an endpoint.
pub fn check_feasible(
    links: &[Link],
    powers: &PowerAssignment,
    params: &PhysicalParams,
) -> Result<bool, ModelError> {
    check_feasible_with(links, powers, params, true)
}

/// [`check_feasible`] with the single-radio (node-disjointness) clause
/// switchable, for pure-SINR experiments.
pub fn check_feasible_with(
    links: &[Link],
    powers: &PowerAssignment,
    params: &PhysicalParams,
    require_node_disjoint: bool,
) -> Result<bool, ModelError> {
    if require_node_disjoint && !node_disjoint(links) {
        return Ok(false);
    }
    for link in links {
        if sinr(link, links, powers, params)? < params.sigma {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Noise factor c_i = sigma / (1 - sigma xi / (p g)).
pub fn noise_factor(
    link: &Link,
    powers: &PowerAssignment,
    params: &PhysicalParams,
) -> Result<f64, ModelError> {
    let signal = received(powers.require(link.id)?, &link.tx, &link.rx, params);
    if signal <= params.sigma * params.xi {
        return Err(ModelError::Undecodable(link.id));
    }
    Ok(params.sigma / (1.0 - params.sigma * params.xi / signal))
}

/// c^up: the largest noise factor over a link set. Callers compare it with
/// their own h * sigma budget.
pub fn max_noise_factor(
    links: &[Link],
    powers: &PowerAssignment,
    params: &PhysicalParams,
) -> Result<f64, ModelError> {
    links
        .iter()
        .map(|l| noise_factor(l, powers, params))
        .try_fold(0.0_f64, |acc, c| Ok(acc.max(c?)))
}

/// Affectance of `others` on `link`: c_i times the summed relative
/// interference, with a link's effect on itself defined as zero.
pub fn affectance(
    link: &Link,
    others: &[Link],
    powers: &PowerAssignment,
    params: &PhysicalParams,
) -> Result<f64, ModelError> {
    let c = noise_factor(link, powers, params)?;
    let signal = received(powers.require(link.id)?, &link.tx, &link.rx, params);
    Ok(c * interference(link, others, powers, params)? / signal)
}

/// Incrementally grown link set that stays SINR-feasible and node-disjoint.
///
/// Interference sums are accumulated in insertion order, which is the same
/// order [`check_feasible`] uses when handed [`FeasibleSetBuilder::links`].
#[derive(Debug, Clone, Default)]
pub struct FeasibleSetBuilder {
    links: Vec<Link>,
    powers: Vec<f64>,
    signal: Vec<f64>,
    interference: Vec<f64>,
    nodes: HashSet<NodeId>,
}

impl FeasibleSetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    /// Adds `link` if the enlarged set remains feasible. Returns whether it
    /// was added.
    pub fn try_add(&mut self, link: &Link, power: f64, params: &PhysicalParams) -> bool {
        if self.nodes.contains(&link.sender) || self.nodes.contains(&link.receiver) {
            return false;
        }
        let signal = received(power, &link.tx, &link.rx, params);
        let mut own = 0.0;
        for (other, &p) in self.links.iter().zip(&self.powers) {
            own += received(p, &other.tx, &link.rx, params);
        }
        if signal / (own + params.xi) < params.sigma {
            return false;
        }
        for (i, other) in self.links.iter().enumerate() {
            let extra = received(power, &link.tx, &other.rx, params);
            if self.signal[i] / (self.interference[i] + extra + params.xi) < params.sigma {
                return false;
            }
        }
        for (i, other) in self.links.iter().enumerate() {
            self.interference[i] += received(power, &link.tx, &other.rx, params);
        }
        self.links.push(*link);
        self.powers.push(power);
        self.signal.push(signal);
        self.interference.push(own);
        self.nodes.insert(link.sender);
        self.nodes.insert(link.receiver);
        true
    }

    pub fn into_links(self) -> Vec<Link> {
        self.links
    }
}
