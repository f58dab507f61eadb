//! Bridging links to weighted disks.
//!
//! Each link becomes a disk centred at its sender with radius
//! `alpha * length`. An independent set of disks maps back to a link set whose
//! senders are pairwise at least `alpha * (len_i + len_j)` apart.

use std::cmp::Ordering;

use thiserror::Error;

use crate::model::{Link, LinkId, Node, Point};
use crate::separation::PLANE_PACKING_CONSTANT;

/// Default instance-size cap for [`exact_mwisd`].
pub const EXACT_MWISD_CAP: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BridgingError {
    #[error("exact solver capped at {cap} disks, got {got}")]
    TooLarge { cap: usize, got: usize },
    #[error("alpha must exceed 1, got {0}")]
    InvalidAlpha(f64),
}

/// A link together with its scheduling weight (its queue length).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedLink {
    pub link: Link,
    pub weight: f64,
}

impl WeightedLink {
    pub fn new(link: Link, weight: f64) -> Self {
        Self { link, weight }
    }
}

/// Canonical order used throughout: weight descending, then link id ascending.
pub fn by_weight_desc(a: &WeightedLink, b: &WeightedLink) -> Ordering {
    b.weight
        .total_cmp(&a.weight)
        .then_with(|| a.link.id.cmp(&b.link.id))
}

pub fn total_weight(links: &[WeightedLink]) -> f64 {
    links.iter().map(|l| l.weight).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Forward,
    Reverse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedDisk {
    pub center: Point,
    pub radius: f64,
    pub weight: f64,
    pub link: LinkId,
    pub direction: Direction,
}

impl WeightedDisk {
    fn key(&self) -> (LinkId, Direction) {
        (self.link, self.direction)
    }

    /// Disks intersect iff their centres are strictly closer than the sum of
    /// radii; tangent disks are independent.
    pub fn intersects(&self, other: &WeightedDisk) -> bool {
        self.center.distance(&other.center) < self.radius + other.radius
    }
}

fn disk_order(a: &WeightedDisk, b: &WeightedDisk) -> Ordering {
    b.weight
        .total_cmp(&a.weight)
        .then_with(|| a.key().cmp(&b.key()))
}

pub fn links_to_disks(links: &[WeightedLink], alpha: f64) -> Vec<WeightedDisk> {
    links
        .iter()
        .map(|wl| WeightedDisk {
            center: wl.link.tx,
            radius: alpha * wl.link.length,
            weight: wl.weight,
            link: wl.link.id,
            direction: Direction::Forward,
        })
        .collect()
}

/// An undirected link whose endpoints each have traffic for the other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidirectionalLink {
    pub id: LinkId,
    pub u: Node,
    pub v: Node,
    pub weight_u: f64,
    pub weight_v: f64,
}

impl BidirectionalLink {
    /// The two directed links `(u, v)` and `(v, u)`, sharing the link id.
    pub fn directed(&self) -> [WeightedLink; 2] {
        [
            WeightedLink::new(Link::new(self.id, &self.u, &self.v), self.weight_u),
            WeightedLink::new(Link::new(self.id, &self.v, &self.u), self.weight_v),
        ]
    }
}

/// One-to-two mapping: each undirected link yields a disk at each endpoint
/// with the same radius `alpha * length` and that endpoint's weight.
pub fn bidirectional_to_disks(links: &[BidirectionalLink], alpha: f64) -> Vec<WeightedDisk> {
    links
        .iter()
        .flat_map(|b| {
            let radius = alpha * b.u.position.distance(&b.v.position);
            [
                WeightedDisk {
                    center: b.u.position,
                    radius,
                    weight: b.weight_u,
                    link: b.id,
                    direction: Direction::Forward,
                },
                WeightedDisk {
                    center: b.v.position,
                    radius,
                    weight: b.weight_v,
                    link: b.id,
                    direction: Direction::Reverse,
                },
            ]
        })
        .collect()
}

/// Greedy maximal independent set: scan by weight descending (ties by id)
/// and accept each disk disjoint from everything accepted so far. Returns
/// indices into `disks` in acceptance order.
pub fn greedy_mwisd(disks: &[WeightedDisk]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..disks.len()).collect();
    order.sort_by(|&a, &b| disk_order(&disks[a], &disks[b]));
    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        if chosen.iter().all(|&j| !disks[i].intersects(&disks[j])) {
            chosen.push(i);
        }
    }
    chosen
}

struct ExactSearch<'a> {
    disks: &'a [WeightedDisk],
    order: Vec<usize>,
    conflicts: Vec<Vec<bool>>,
    suffix: Vec<f64>,
    best: Vec<usize>,
    best_weight: f64,
    current: Vec<usize>,
}

impl ExactSearch<'_> {
    fn sorted_keys(&self, set: &[usize]) -> Vec<(LinkId, Direction)> {
        let mut keys: Vec<_> = set.iter().map(|&i| self.disks[i].key()).collect();
        keys.sort();
        keys
    }

    fn consider(&mut self, weight: f64) {
        let better = weight > self.best_weight
            || (weight == self.best_weight
                && self.sorted_keys(&self.current) < self.sorted_keys(&self.best));
        if better {
            self.best_weight = weight;
            self.best = self.current.clone();
        }
    }

    fn search(&mut self, pos: usize, weight: f64) {
        if pos == self.order.len() {
            self.consider(weight);
            return;
        }
        // ties must be explored for the lexicographic tie-break
        if weight + self.suffix[pos] < self.best_weight {
            return;
        }
        let idx = self.order[pos];
        if self.current.iter().all(|&j| !self.conflicts[idx][j]) {
            self.current.push(idx);
            self.search(pos + 1, weight + self.disks[idx].weight);
            self.current.pop();
        }
        self.search(pos + 1, weight);
    }
}

/// Maximum-weight independent set by branch and bound. Ties go to the
/// lexicographically smallest set of `(link id, direction)` keys.
pub fn exact_mwisd(disks: &[WeightedDisk], cap: usize) -> Result<Vec<usize>, BridgingError> {
    if disks.len() > cap {
        return Err(BridgingError::TooLarge {
            cap,
            got: disks.len(),
        });
    }
    let mut order: Vec<usize> = (0..disks.len()).collect();
    order.sort_by(|&a, &b| disk_order(&disks[a], &disks[b]));
    let conflicts = (0..disks.len())
        .map(|i| {
            (0..disks.len())
                .map(|j| i != j && disks[i].intersects(&disks[j]))
                .collect()
        })
        .collect();
    let mut suffix = vec![0.0; order.len() + 1];
    for p in (0..order.len()).rev() {
        suffix[p] = suffix[p + 1] + disks[order[p]].weight.max(0.0);
    }
    let mut s = ExactSearch {
        disks,
        order,
        conflicts,
        suffix,
        best: Vec::new(),
        best_weight: 0.0,
        current: Vec::new(),
    };
    s.search(0, 0.0);
    let mut best = s.best;
    best.sort_by(|&a, &b| disk_order(&disks[a], &disks[b]));
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MwisdSolver {
    #[default]
    Greedy,
    Exact {
        cap: usize,
    },
}

/// Bridging: solve an independent set over the link disks and keep the
/// links whose disks were chosen.
/// The result is in canonical weight order.
pub fn bridge(
    links: &[WeightedLink],
    alpha: f64,
    solver: MwisdSolver,
) -> Result<Vec<WeightedLink>, BridgingError> {
    if !(alpha > 1.0) {
        return Err(BridgingError::InvalidAlpha(alpha));
    }
    let disks = links_to_disks(links, alpha);
    let chosen = match solver {
        MwisdSolver::Greedy => greedy_mwisd(&disks),
        MwisdSolver::Exact { cap } => exact_mwisd(&disks, cap)?,
    };
    let mut out: Vec<WeightedLink> = chosen.into_iter().map(|i| links[i]).collect();
    out.sort_by(by_weight_desc);
    Ok(out)
}

/// Number of disk-independent sets an independent link set splits into:
/// `ceil(2 * 3^k / sigma)^2 * ceil(C (4 alpha / delta + 1)^2)`.
pub fn omega_bound(sigma: f64, kappa: f64, alpha: f64, delta: f64) -> u64 {
    let lead = (2.0 * crate::model::pow_kappa(3.0, kappa) / sigma).ceil() as u64;
    let packing = (PLANE_PACKING_CONSTANT * (4.0 * alpha / delta + 1.0).powi(2)).ceil() as u64;
    lead.max(1).pow(2) * packing
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(link: LinkId, x: f64, y: f64, r: f64, w: f64) -> WeightedDisk {
        WeightedDisk {
            center: Point::new(x, y),
            radius: r,
            weight: w,
            link,
            direction: Direction::Forward,
        }
    }

    fn wlink(id: usize, s: (f64, f64), t: (f64, f64), w: f64) -> WeightedLink {
        WeightedLink::new(
            Link::new(
                id,
                &Node {
                    id: 2 * id,
                    position: Point::new(s.0, s.1),
                },
                &Node {
                    id: 2 * id + 1,
                    position: Point::new(t.0, t.1),
                },
            ),
            w,
        )
    }

    /// The 5-disk sits between two mutually disjoint 3-disks.
    fn five_three_three() -> Vec<WeightedDisk> {
        vec![
            disk(0, 0.0, 0.0, 1.0, 5.0),
            disk(1, -1.5, 0.0, 1.0, 3.0),
            disk(2, 1.5, 0.0, 1.0, 3.0),
        ]
    }

    #[test]
    fn disk_mapping() {
        let d = links_to_disks(&[wlink(0, (0.0, 0.0), (1.0, 0.0), 7.0)], 2.0);
        assert_eq!(d[0].center, Point::new(0.0, 0.0));
        assert_eq!(d[0].radius, 2.0);
        assert_eq!(d[0].weight, 7.0);
        let d = links_to_disks(&[wlink(0, (0.0, 0.0), (4.0, 0.0), 1.0)], 1.5);
        assert_eq!(d[0].radius, 6.0);
    }

    #[test]
    fn bidirectional_mapping() {
        let b = BidirectionalLink {
            id: 4,
            u: Node {
                id: 0,
                position: Point::new(0.0, 0.0),
            },
            v: Node {
                id: 1,
                position: Point::new(1.0, 0.0),
            },
            weight_u: 3.0,
            weight_v: 5.0,
        };
        let d = bidirectional_to_disks(&[b], 2.0);
        assert_eq!(d.len(), 2);
        assert_eq!(
            (d[0].center, d[0].radius, d[0].weight),
            (Point::new(0.0, 0.0), 2.0, 3.0)
        );
        assert_eq!(
            (d[1].center, d[1].radius, d[1].weight),
            (Point::new(1.0, 0.0), 2.0, 5.0)
        );
        let [f, r] = b.directed();
        assert_eq!((f.link.sender, r.link.sender), (0, 1));
    }

    #[test]
    fn tangent_disks_are_independent() {
        let a = disk(0, 0.0, 0.0, 1.0, 1.0);
        let b = disk(1, 2.0, 0.0, 1.0, 1.0);
        assert!(!a.intersects(&b));
        assert_eq!(greedy_mwisd(&[a, b]).len(), 2);
    }

    #[test]
    fn greedy_vs_exact_on_counterexample() {
        let d = five_three_three();
        assert_eq!(greedy_mwisd(&d), vec![0]);
        let best = exact_mwisd(&d, EXACT_MWISD_CAP).unwrap();
        let mut links: Vec<_> = best.iter().map(|&i| d[i].link).collect();
        links.sort();
        assert_eq!(links, vec![1, 2]);
    }

    #[test]
    fn exact_small_cases() {
        assert!(exact_mwisd(&[], 20).unwrap().is_empty());
        let clique = vec![
            disk(0, 0.0, 0.0, 1.0, 4.0),
            disk(1, 0.1, 0.0, 1.0, 9.0),
            disk(2, 0.0, 0.1, 1.0, 2.0),
        ];
        assert_eq!(exact_mwisd(&clique, 20).unwrap(), vec![1]);
        let big: Vec<_> = (0..21)
            .map(|i| disk(i, i as f64 * 10.0, 0.0, 1.0, 1.0))
            .collect();
        assert_eq!(
            exact_mwisd(&big, 20),
            Err(BridgingError::TooLarge { cap: 20, got: 21 })
        );
    }

    #[test]
    fn exact_tie_break_prefers_smaller_ids() {
        let d = vec![disk(3, 0.0, 0.0, 1.0, 2.0), disk(1, 0.5, 0.0, 1.0, 2.0)];
        let best = exact_mwisd(&d, 20).unwrap();
        assert_eq!(best.len(), 1);
        assert_eq!(d[best[0]].link, 1);
    }

    #[test]
    fn bridge_cases() {
        let a = wlink(0, (0.0, 0.0), (1.0, 0.0), 2.0);
        assert_eq!(bridge(&[a], 2.0, MwisdSolver::Greedy).unwrap(), vec![a]);
        let b = wlink(1, (3.0, 0.0), (4.0, 0.0), 5.0);
        let out = bridge(&[a, b], 2.0, MwisdSolver::Greedy).unwrap();
        assert_eq!(out, vec![b]);
        assert!(bridge(&[a], 1.0, MwisdSolver::Greedy).is_err());
    }

    #[test]
    fn omega_values() {
        assert_eq!(omega_bound(27.0, 3.0, 2.0, 0.5), 1052);
        assert_eq!(omega_bound(54.0, 3.0, 2.0, 0.5), 263);
        assert_eq!(omega_bound(100.0, 3.0, 2.0, 0.5), 263);
        let full = omega_bound(27.0, 3.0, 2.0, 1.0) as f64;
        let half = omega_bound(27.0, 3.0, 2.0, 0.5) as f64;
        let ratio = ((4.0 * 2.0 + 1.0) / (8.0 * 2.0 + 1.0_f64)).powi(2);
        assert!(full < half);
        assert!((full / half - ratio).abs() < 0.01);
    }
}
