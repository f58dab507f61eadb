//! Distance-separation calculus.
//!
//! A link set is a phi-separation set when, for every endpoint `v`, the sum
//! of `R^kappa / d(w, v)^kappa` over the other endpoints `w` is at most phi.
//! By default a link's own partner endpoint is left out of the sum (a link
//! does not interfere with itself); `include_own_partner` restores it.

use thiserror::Error;

use crate::model::{pow_kappa, Link, NodeId, Point};

/// Packing constant of the Euclidean plane (doubling dimension 2).
pub const PLANE_PACKING_CONSTANT: f64 = std::f64::consts::PI * 1.732_050_807_568_877_2 / 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeparationError {
    #[error("links {0} and {1} share an endpoint")]
    NotNodeDisjoint(usize, usize),
    #[error("distinct nodes {0} and {1} occupy the same position")]
    CoincidentNodes(NodeId, NodeId),
    #[error("reference length must be positive, got {0}")]
    InvalidReference(f64),
    #[error("kappa must exceed the doubling dimension 2, got {0}")]
    KappaTooSmall(f64),
    #[error("theta must be positive, got {0}")]
    InvalidTheta(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SeparationOptions {
    pub include_own_partner: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationReport {
    /// Largest node sum.
    pub phi: f64,
    /// Endpoint attaining `phi`; `None` for an empty set.
    pub worst_node: Option<NodeId>,
    pub reference_r: f64,
}

#[derive(Clone, Copy)]
struct Endpoint {
    node: NodeId,
    pos: Point,
    owner: usize,
}

fn endpoints(links: &[Link]) -> Vec<Endpoint> {
    links
        .iter()
        .enumerate()
        .flat_map(|(i, l)| {
            [
                Endpoint {
                    node: l.sender,
                    pos: l.tx,
                    owner: i,
                },
                Endpoint {
                    node: l.receiver,
                    pos: l.rx,
                    owner: i,
                },
            ]
        })
        .collect()
}

/// Longest link length in the set (0 for an empty set).
pub fn max_length(links: &[Link]) -> f64 {
    links.iter().map(|l| l.length).fold(0.0, f64::max)
}

/// Separation value of a node-disjoint link set relative to `reference_r`.
pub fn separation_value(
    links: &[Link],
    reference_r: f64,
    kappa: f64,
    opts: SeparationOptions,
) -> Result<SeparationReport, SeparationError> {
    if !(reference_r > 0.0) {
        return Err(SeparationError::InvalidReference(reference_r));
    }
    for (i, a) in links.iter().enumerate() {
        for b in &links[i + 1..] {
            if a.shares_node(b) {
                return Err(SeparationError::NotNodeDisjoint(a.id, b.id));
            }
        }
    }
    let pts = endpoints(links);
    let r_k = pow_kappa(reference_r, kappa);
    let mut phi = 0.0;
    let mut worst = pts.first().map(|e| e.node);
    for (i, v) in pts.iter().enumerate() {
        let mut sum = 0.0;
        for (j, w) in pts.iter().enumerate() {
            if i == j || (w.owner == v.owner && !opts.include_own_partner) {
                continue;
            }
            let d = v.pos.distance(&w.pos);
            if d == 0.0 {
                return Err(SeparationError::CoincidentNodes(v.node, w.node));
            }
            sum += r_k / pow_kappa(d, kappa);
        }
        if sum > phi {
            phi = sum;
            worst = Some(v.node);
        }
    }
    Ok(SeparationReport {
        phi,
        worst_node: worst,
        reference_r,
    })
}

/// Closed-form separation bound for node sets whose pairwise distances are
/// at least `theta * R`: `2^(2k+1) sqrt(3) pi k / (6 (k-2) theta^k)`.
pub fn lemma1_bound(theta: f64, kappa: f64) -> Result<f64, SeparationError> {
    if !(kappa > 2.0) {
        return Err(SeparationError::KappaTooSmall(kappa));
    }
    if !(theta > 0.0) {
        return Err(SeparationError::InvalidTheta(theta));
    }
    Ok(
        2f64.powf(2.0 * kappa + 1.0) * PLANE_PACKING_CONSTANT * kappa
            / ((kappa - 2.0) * pow_kappa(theta, kappa)),
    )
}

/// Target separation phi* = 1 / (4 beta^k sigma (sigma + 1)) under which
/// the iterative power assignment with m = 2 is feasible.
pub fn phi_star(sigma: f64, alpha: f64, kappa: f64) -> f64 {
    let beta_k = pow_kappa(crate::model::beta(alpha), kappa);
    1.0 / (4.0 * beta_k * sigma * (sigma + 1.0))
}

/// Upper bound on the number of sets [`first_fit_partition`] produces for
/// an input of separation `phi1`: `ceil(2 phi1 / phi2)^2`, floored at one
/// set for non-empty inputs.
pub fn partition_count_bound(phi1: f64, phi2: f64) -> usize {
    let per_pass = ((2.0 * phi1 / phi2).ceil() as usize).max(1);
    per_pass * per_pass
}

struct Bin {
    links: Vec<Link>,
    pts: Vec<Point>,
    sums: Vec<f64>,
}

impl Bin {
    fn new() -> Self {
        Self {
            links: Vec::new(),
            pts: Vec::new(),
            sums: Vec::new(),
        }
    }

    fn term(r_k: f64, kappa: f64, a: &Point, b: &Point) -> f64 {
        let d = a.distance(b);
        if d == 0.0 {
            f64::INFINITY
        } else {
            r_k / pow_kappa(d, kappa)
        }
    }

    /// Adds `link` if every node sum of the enlarged bin stays within `budget`.
    fn try_add(&mut self, link: &Link, r_k: f64, kappa: f64, budget: f64, partner: f64) -> bool {
        let mut s_sum = partner;
        let mut t_sum = partner;
        for p in &self.pts {
            s_sum += Self::term(r_k, kappa, p, &link.tx);
            t_sum += Self::term(r_k, kappa, p, &link.rx);
        }
        if !(s_sum <= budget && t_sum <= budget) {
            return false;
        }
        let fits = self.pts.iter().zip(&self.sums).all(|(p, &sum)| {
            sum + Self::term(r_k, kappa, &link.tx, p) + Self::term(r_k, kappa, &link.rx, p)
                <= budget
        });
        if !fits {
            return false;
        }
        for (p, sum) in self.pts.iter().zip(self.sums.iter_mut()) {
            *sum += Self::term(r_k, kappa, &link.tx, p) + Self::term(r_k, kappa, &link.rx, p);
        }
        self.force_add(link, s_sum, t_sum);
        true
    }

    fn force_add(&mut self, link: &Link, s_sum: f64, t_sum: f64) {
        self.links.push(*link);
        self.pts.push(link.tx);
        self.pts.push(link.rx);
        self.sums.push(s_sum);
        self.sums.push(t_sum);
    }
}

fn first_fit_pass<'a>(
    links: impl Iterator<Item = &'a Link>,
    r_k: f64,
    kappa: f64,
    budget: f64,
    opts: SeparationOptions,
) -> Vec<Vec<Link>> {
    let mut bins: Vec<Bin> = Vec::new();
    for link in links {
        let partner = if opts.include_own_partner {
            Bin::term(r_k, kappa, &link.tx, &link.rx)
        } else {
            0.0
        };
        if bins
            .iter_mut()
            .any(|b| b.try_add(link, r_k, kappa, budget, partner))
        {
            continue;
        }
        let mut bin = Bin::new();
        if !bin.try_add(link, r_k, kappa, budget, partner) {
            // over budget on its own partner term; it still needs a home
            bin.force_add(link, partner, partner);
        }
        bins.push(bin);
    }
    bins.into_iter().map(|b| b.links).collect()
}

/// Two-pass first-fit partition into `phi2`-separation sets.
///
/// The forward pass places each link into the first bin where both of its
/// endpoints receive at most `phi2 / 2` from the bin and no node already in
/// the bin is pushed past `phi2 / 2`. Every bin is then re-partitioned by the
/// same rule over its links in reverse order.
pub fn first_fit_partition(
    links: &[Link],
    phi2: f64,
    reference_r: f64,
    kappa: f64,
    opts: SeparationOptions,
) -> Vec<Vec<Link>> {
    let r_k = pow_kappa(reference_r, kappa);
    let budget = phi2 / 2.0;
    first_fit_pass(links.iter(), r_k, kappa, budget, opts)
        .into_iter()
        .flat_map(|bin| first_fit_pass(bin.iter().rev(), r_k, kappa, budget, opts))
        .collect()
}
