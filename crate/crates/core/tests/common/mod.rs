#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sinr_sched::bridging::{WeightedDisk, WeightedLink};
use sinr_sched::model::{Link, PhysicalParams, PowerAssignment, Topology};
use sinr_sched::power::{assign_fixed, FixedPowerKind};
use sinr_sched::simulator::{gen_random_topology, RandomTopologySpec};

pub fn params() -> PhysicalParams {
    PhysicalParams::default()
}

/// Random topology plus integer weights in [1, 100] and uniform power at
/// twice the decodability floor of the longest allowed link.
pub struct Instance {
    pub topology: Topology,
    pub weighted: Vec<WeightedLink>,
    pub uniform: PowerAssignment,
}

pub fn instance(seed: u64, n_links: usize, side: f64) -> Instance {
    let spec = RandomTopologySpec {
        n_nodes: 2 * n_links,
        n_links,
        area_side: side,
        r_min: 1.0,
        r_max: 5.0,
    };
    let topology = gen_random_topology(&spec, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let weighted = topology
        .links
        .iter()
        .map(|&l| WeightedLink::new(l, rng.random_range(1..=100) as f64))
        .collect();
    let p = params();
    let scale = FixedPowerKind::Uniform.scale_for_margin(&p, spec.r_max, 2.0);
    let uniform = assign_fixed(&topology.links, FixedPowerKind::Uniform, scale, &p).unwrap();
    Instance {
        topology,
        weighted,
        uniform,
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn gain(d: f64, p: &PhysicalParams) -> f64 {
    if d == 0.0 {
        1.0
    } else {
        (p.eta * d.powf(-p.kappa)).min(1.0)
    }
}

/// SINR written out from the definition, without the library's helpers.
pub fn oracle_sinr(
    target: &Link,
    set: &[Link],
    powers: &PowerAssignment,
    p: &PhysicalParams,
) -> f64 {
    let rx = (target.rx.x, target.rx.y);
    let signal = powers.get(target.id).unwrap() * gain(dist((target.tx.x, target.tx.y), rx), p);
    let interference: f64 = set
        .iter()
        .filter(|l| l.id != target.id)
        .map(|l| powers.get(l.id).unwrap() * gain(dist((l.tx.x, l.tx.y), rx), p))
        .sum();
    signal / (interference + p.xi)
}

pub fn oracle_feasible(set: &[Link], powers: &PowerAssignment, p: &PhysicalParams) -> bool {
    for (i, a) in set.iter().enumerate() {
        for b in &set[i + 1..] {
            let nodes_a = [a.sender, a.receiver];
            if nodes_a.contains(&b.sender) || nodes_a.contains(&b.receiver) {
                return false;
            }
        }
    }
    set.iter()
        .all(|l| oracle_sinr(l, set, powers, p) >= p.sigma)
}

/// Maximum feasible weight over all subsets.
pub fn brute_mwisl(links: &[WeightedLink], powers: &PowerAssignment, p: &PhysicalParams) -> f64 {
    let n = links.len();
    assert!(n <= 16);
    let mut best = 0.0;
    for mask in 0u32..(1 << n) {
        let set: Vec<Link> = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| links[i].link)
            .collect();
        let w: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| links[i].weight)
            .sum();
        if w > best && oracle_feasible(&set, powers, p) {
            best = w;
        }
    }
    best
}

/// Maximum weight of pairwise disjoint disks over all subsets.
pub fn brute_mwisd(disks: &[WeightedDisk]) -> f64 {
    let n = disks.len();
    assert!(n <= 20);
    let mut best = 0.0;
    'mask: for mask in 0u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        for (k, &i) in idx.iter().enumerate() {
            for &j in &idx[k + 1..] {
                let c = dist(
                    (disks[i].center.x, disks[i].center.y),
                    (disks[j].center.x, disks[j].center.y),
                );
                if c < disks[i].radius + disks[j].radius {
                    continue 'mask;
                }
            }
        }
        let w: f64 = idx.iter().map(|&i| disks[i].weight).sum();
        best = f64::max(best, w);
    }
    best
}
