mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sinr_sched::bridging::{
    bridge, exact_mwisd, greedy_mwisd, links_to_disks, MwisdSolver, WeightedLink,
};
use sinr_sched::io::{parse_topology, serialize_topology};
use sinr_sched::model::{
    affectance, check_feasible, path_gain, sinr, FeasibleSetBuilder, Link, Node, Point,
    PowerAssignment,
};
use sinr_sched::power::{iterative_power_assign, power_ceiling};
use sinr_sched::schedulers::{algorithm2, run_policy, Policy, Schedule, SchedulerOptions};
use sinr_sched::separation::{separation_value, SeparationOptions};
use sinr_sched::simulator::{gen_random_topology, RandomTopologySpec};

use common::{instance, oracle_feasible, params};

const FIXED: [Policy; 4] = [
    Policy::Algorithm3,
    Policy::Greedy,
    Policy::Weight,
    Policy::Exact,
];

fn schedule(policy: Policy, links: &[WeightedLink], powers: &PowerAssignment) -> Schedule {
    run_policy(
        policy,
        links,
        Some(powers),
        &params(),
        &SchedulerOptions::default(),
    )
    .unwrap()
}

fn subset(links: &[Link], mask: u32) -> Vec<Link> {
    links
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, l)| *l)
        .collect()
}

/// Short links on a coarse jittered grid, far enough apart that several
/// survive bridging and the separation target together.
fn sparse_links(seed: u64) -> Vec<WeightedLink> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(2..=6);
    let mut cells: Vec<usize> = (0..16).collect();
    cells.shuffle(&mut rng);
    cells
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &c)| {
            let s = Point::new(
                (c % 4) as f64 * 100.0 + rng.random_range(0.0..10.0),
                (c / 4) as f64 * 100.0 + rng.random_range(0.0..10.0),
            );
            // at least 1 so the gain stays below its clamp
            let len = rng.random_range(1.0..1.5);
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            let t = Point::new(s.x + len * th.cos(), s.y + len * th.sin());
            let link = Link::new(
                i,
                &Node {
                    id: 2 * i,
                    position: s,
                },
                &Node {
                    id: 2 * i + 1,
                    position: t,
                },
            );
            WeightedLink::new(link, rng.random_range(1..=50) as f64)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gain_never_increases_with_distance(d1 in 0.01f64..200.0, extra in 0.0f64..200.0) {
        let p = params();
        let o = Point::new(0.0, 0.0);
        let g1 = path_gain(o, Point::new(d1, 0.0), &p).unwrap();
        let g2 = path_gain(o, Point::new(d1 + extra, 0.0), &p).unwrap();
        prop_assert!(g2 <= g1);
        prop_assert!(g1 <= 1.0);
    }

    #[test]
    fn affectance_matches_sinr(seed in any::<u64>(), mask in any::<u32>()) {
        let p = params();
        let inst = instance(seed, 8, 20.0);
        let set = subset(&inst.topology.links, mask);
        for l in &set {
            let s = sinr(l, &set, &inst.uniform, &p).unwrap();
            let a = affectance(l, &set, &inst.uniform, &p).unwrap();
            // skip numerically tied cases
            if (s / p.sigma - 1.0).abs() > 1e-9 {
                prop_assert_eq!(a <= 1.0, s >= p.sigma, "sinr {} affectance {}", s, a);
            }
        }
    }

    #[test]
    fn feasibility_survives_removal(seed in any::<u64>(), mask in any::<u32>(), drop in any::<u32>()) {
        let p = params();
        let inst = instance(seed, 10, 25.0);
        let mut b = FeasibleSetBuilder::new();
        for l in subset(&inst.topology.links, mask) {
            b.try_add(&l, inst.uniform.get(l.id).unwrap(), &p);
        }
        let set = b.into_links();
        prop_assert!(check_feasible(&set, &inst.uniform, &p).unwrap());
        let smaller: Vec<Link> = set.iter().enumerate().filter(|(i, _)| drop >> i & 1 == 0).map(|(_, l)| *l).collect();
        prop_assert!(check_feasible(&smaller, &inst.uniform, &p).unwrap());
    }

    #[test]
    fn builder_agrees_with_batch_check(seed in any::<u64>()) {
        let p = params();
        let inst = instance(seed, 10, 20.0);
        let mut b = FeasibleSetBuilder::new();
        for l in &inst.topology.links {
            let added = b.try_add(l, inst.uniform.get(l.id).unwrap(), &p);
            let mut with = b.links().to_vec();
            if !added {
                with.push(*l);
            }
            prop_assert_eq!(added, check_feasible(&with, &inst.uniform, &p).unwrap());
            prop_assert!(oracle_feasible(b.links(), &inst.uniform, &p));
        }
    }

    #[test]
    fn separation_is_scale_free(seed in any::<u64>(), c in 0.1f64..50.0) {
        let links = gen_random_topology(&RandomTopologySpec { n_nodes: 20, n_links: 10, area_side: 30.0, r_min: 1.0, r_max: 5.0 }, seed).unwrap().links;
        let scaled: Vec<Link> = links
            .iter()
            .map(|l| Link::new(
                l.id,
                &Node { id: l.sender, position: l.tx.scaled(c) },
                &Node { id: l.receiver, position: l.rx.scaled(c) },
            ))
            .collect();
        let opts = SeparationOptions::default();
        let a = separation_value(&links, 5.0, 3.0, opts).unwrap().phi;
        let b = separation_value(&scaled, 5.0 * c, 3.0, opts).unwrap().phi;
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn separation_grows_with_union(seed in any::<u64>(), mask in any::<u32>()) {
        let links = gen_random_topology(&RandomTopologySpec { n_nodes: 24, n_links: 12, area_side: 40.0, r_min: 1.0, r_max: 5.0 }, seed).unwrap().links;
        let a = subset(&links, mask);
        let b = subset(&links, !mask);
        let opts = SeparationOptions::default();
        let phi = |s: &[Link]| separation_value(s, 5.0, 3.0, opts).unwrap().phi;
        let all = phi(&links);
        prop_assert!(all >= phi(&a) && all >= phi(&b));
    }

    #[test]
    fn greedy_disks_are_maximal_and_dominated(seed in any::<u64>()) {
        let inst = instance(seed, 12, 30.0);
        let disks = links_to_disks(&inst.weighted, 2.0);
        let greedy = greedy_mwisd(&disks);
        let exact = exact_mwisd(&disks, 20).unwrap();
        let w = |idx: &[usize]| idx.iter().map(|&i| disks[i].weight).sum::<f64>();
        prop_assert!(w(&greedy) <= w(&exact));
        for (i, d) in disks.iter().enumerate() {
            if !greedy.contains(&i) {
                prop_assert!(greedy.iter().any(|&j| disks[j].intersects(d)), "disk {} could be added", i);
            }
        }
    }

    #[test]
    fn bridged_senders_are_separated(seed in any::<u64>(), alpha in 1.1f64..4.0, exact in any::<bool>()) {
        let inst = instance(seed, 15, 40.0);
        let solver = if exact { MwisdSolver::Exact { cap: 20 } } else { MwisdSolver::Greedy };
        let out = bridge(&inst.weighted, alpha, solver).unwrap();
        for (i, a) in out.iter().enumerate() {
            for b in &out[i + 1..] {
                prop_assert!(a.link.tx.distance(&b.link.tx) >= alpha * (a.link.length + b.link.length));
            }
        }
    }

    #[test]
    fn every_policy_emits_valid_schedules(seed in any::<u64>()) {
        let p = params();
        let inst = instance(seed, 12, 25.0);
        let best_single = inst
            .weighted
            .iter()
            .filter(|w| check_feasible(&[w.link], &inst.uniform, &p).unwrap())
            .map(|w| w.weight)
            .fold(0.0, f64::max);
        for policy in FIXED {
            let s = schedule(policy, &inst.weighted, &inst.uniform);
            prop_assert!(oracle_feasible(&s.links, &s.powers, &p), "{} infeasible", policy);
            // weight packs each band shortest-first for cardinality, so a
            // short light link can block the heaviest one
            if policy != Policy::Weight {
                prop_assert!(s.total_weight >= best_single, "{} below heaviest singleton", policy);
            }
        }
        let s = algorithm2(&inst.weighted, &p, &SchedulerOptions::default()).unwrap().schedule;
        prop_assert!(oracle_feasible(&s.links, &s.powers, &p));
        let heaviest = inst.weighted.iter().map(|w| w.weight).fold(0.0, f64::max);
        prop_assert!(s.total_weight >= heaviest);
    }

    // Powers of two keep every weight comparison and log2 band index exact.
    #[test]
    fn scaling_weights_keeps_the_argmax(seed in any::<u64>(), k in -8i32..12) {
        let inst = instance(seed, 12, 25.0);
        let c = 2f64.powi(k);
        let scaled: Vec<WeightedLink> = inst.weighted.iter().map(|w| WeightedLink::new(w.link, w.weight * c)).collect();
        for policy in FIXED {
            prop_assert_eq!(schedule(policy, &inst.weighted, &inst.uniform).ids(), schedule(policy, &scaled, &inst.uniform).ids());
        }
        let p = params();
        let opts = SchedulerOptions::default();
        prop_assert_eq!(
            algorithm2(&inst.weighted, &p, &opts).unwrap().schedule.ids(),
            algorithm2(&scaled, &p, &opts).unwrap().schedule.ids()
        );
    }

    #[test]
    fn far_link_never_lowers_weight(seed in any::<u64>()) {
        let p = params();
        let inst = instance(seed, 10, 25.0);
        let heaviest = inst.weighted.iter().map(|w| w.weight).fold(0.0, f64::max);
        let far = Link::new(
            999,
            &Node { id: 10_000, position: Point::new(1e5, 1e5) },
            &Node { id: 10_001, position: Point::new(1e5 + 3.0, 1e5) },
        );
        let mut more = inst.weighted.clone();
        more.push(WeightedLink::new(far, heaviest));
        let mut powers: std::collections::BTreeMap<_, _> = inst.uniform.iter().collect();
        powers.insert(999, inst.uniform.p_max());
        let powers = PowerAssignment::from_powers(powers);
        // weight prunes below W_max / (2 |E|), so one more link moves its bands
        for policy in FIXED.into_iter().filter(|&p| p != Policy::Weight) {
            let before = schedule(policy, &inst.weighted, &powers).total_weight;
            let after = schedule(policy, &more, &powers).total_weight;
            prop_assert!(after >= before, "{}: {} -> {}", policy, before, after);
        }
        let opts = SchedulerOptions::default();
        let before = algorithm2(&inst.weighted, &p, &opts).unwrap().schedule.total_weight;
        let after = algorithm2(&more, &p, &opts).unwrap().schedule.total_weight;
        prop_assert!(after >= before);
    }

    #[test]
    fn separated_sets_stay_feasible_in_any_order(seed in any::<u64>(), order_seed in any::<u64>()) {
        let p = params();
        let links = sparse_links(seed);
        let out = algorithm2(&links, &p, &SchedulerOptions::default()).unwrap();
        let mut ordered = out.schedule.links.clone();
        prop_assert!(out.separation.phi <= out.phi_target);
        prop_assert!(out.schedule.powers.p_max() <= out.ceiling);
        ordered.shuffle(&mut ChaCha8Rng::seed_from_u64(order_seed));
        let powers = iterative_power_assign(&ordered, 2.0, &p);
        prop_assert!(check_feasible(&ordered, &powers, &p).unwrap());
        prop_assert!(oracle_feasible(&ordered, &powers, &p));
        let r = ordered.iter().map(|l| l.length).fold(0.0, f64::max);
        let ceiling = power_ceiling(2.0, p.sigma, p.xi, p.eta, r, p.kappa, out.phi_target).unwrap();
        prop_assert!(powers.p_max() <= ceiling);
    }
}

#[test]
fn sparse_sets_schedule_several_links() {
    let p = params();
    let multi = (0..50)
        .filter(|&s| {
            algorithm2(&sparse_links(s), &p, &SchedulerOptions::default())
                .unwrap()
                .schedule
                .len()
                > 1
        })
        .count();
    assert!(
        multi > 25,
        "only {multi} of 50 sparse sets kept several links"
    );
}

#[test]
fn topologies_round_trip() {
    for seed in 0..100 {
        let t = gen_random_topology(&RandomTopologySpec::default(), seed).unwrap();
        let text = serialize_topology(&t);
        assert_eq!(parse_topology(&text).unwrap(), t, "seed {seed}");
    }
}
