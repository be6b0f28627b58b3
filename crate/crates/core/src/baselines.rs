//! Reference schedulers: exhaustive search for tiny instances, a
//! centralized greedy over the precedence order, and a periodic single-tree
//! schedule replayed until the sink holds everything.

use std::collections::{HashMap, VecDeque};

use crate::collision::{
    build_extended_collision_graph, build_forwarding_graph, collides, Channel, ConflictKind,
    ExtendedCollisionGraph, Link, PhiLedger, Precedence, TransmissionCandidate,
};
use crate::schedule::{Schedule, ScheduleEntry};
use crate::wsn::{compute_hops, HopMap, NodeId, Wsn};

/// Data held by every node during a centralized run.
#[derive(Clone, Debug)]
pub struct NetworkSnapshot<'a> {
    pub wsn: &'a Wsn,
    pub ledger: PhiLedger,
    pub channels: u32,
}

impl<'a> NetworkSnapshot<'a> {
    pub fn new(wsn: &'a Wsn, alpha: u32, channels: u32) -> Self {
        NetworkSnapshot {
            wsn,
            ledger: PhiLedger::from_wsn(wsn, alpha),
            channels,
        }
    }

    /// Whether every unit has reached the sink.
    pub fn drained(&self) -> bool {
        let sink = self.wsn.sink();
        self.wsn.nodes().all(|v| v == sink || self.ledger.phi(v) == 0)
    }
}

/// Size limits for the exhaustive search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_nodes: usize,
    pub max_total_rho: u64,
    pub max_channels: u32,
    pub max_alpha: u32,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_nodes: 6,
            max_total_rho: 8,
            max_channels: 2,
            max_alpha: 3,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("instance too large for exhaustive search: {what} is {value}, limit {limit}")]
pub struct SizeCapError {
    pub what: &'static str,
    pub value: u64,
    pub limit: u64,
}

#[derive(Clone, Debug)]
pub struct OptimalSchedule {
    pub slots: u32,
    pub witness: Schedule,
}

fn check_limits(w: &Wsn, alpha: u32, channels: u32, l: &SearchLimits) -> Result<(), SizeCapError> {
    let caps = [
        ("node count", w.len() as u64, l.max_nodes as u64),
        ("total generated data", w.total_rho(), l.max_total_rho),
        ("channel count", u64::from(channels), u64::from(l.max_channels)),
        ("packet capacity", u64::from(alpha), u64::from(l.max_alpha)),
    ];
    for (what, value, limit) in caps {
        if value > limit {
            return Err(SizeCapError { what, value, limit });
        }
    }
    Ok(())
}

/// Minimum slot count and one schedule attaining it, by breadth-first
/// search over per-node data vectors. A step schedules any nonempty
/// conflict-free set of candidates whose senders hold data, each with any
/// packet load from 1 to `min(phi, alpha)`.
pub fn brute_force_min_slots(
    w: &Wsn,
    alpha: u32,
    channels: u32,
    limits: &SearchLimits,
) -> Result<OptimalSchedule, SizeCapError> {
    check_limits(w, alpha, channels, limits)?;
    assert!(alpha >= 1 && channels >= 1, "alpha and channels must be at least 1");
    let hops = compute_hops(w);
    let ecg = build_extended_collision_graph(&build_forwarding_graph(w, &hops), w, channels);
    let sink = w.sink().index();

    type State = Vec<u8>;
    let start: State = w.rho_all().iter().map(|&r| r as u8).collect();
    let done = |s: &State| s.iter().enumerate().all(|(i, &p)| i == sink || p == 0);

    let mut parent: HashMap<State, (State, Vec<ScheduleEntry>)> = HashMap::new();
    let mut queue = VecDeque::from([start.clone()]);
    let mut depth: HashMap<State, u32> = HashMap::from([(start.clone(), 0)]);
    let mut goal = None;
    while let Some(s) = queue.pop_front() {
        if done(&s) {
            goal = Some(s);
            break;
        }
        let d = depth[&s];
        for step in slot_choices(&ecg, &s, alpha) {
            let mut next = s.clone();
            for e in &step {
                next[e.sender.index()] -= e.gamma as u8;
                next[e.receiver.index()] += e.gamma as u8;
            }
            if depth.contains_key(&next) {
                continue;
            }
            depth.insert(next.clone(), d + 1);
            parent.insert(next.clone(), (s.clone(), step));
            queue.push_back(next);
        }
    }
    let goal = goal.expect("a connected network always drains");

    let mut slots = Vec::new();
    let mut cur = goal;
    while let Some((prev, step)) = parent.get(&cur) {
        slots.push(step.clone());
        cur = prev.clone();
    }
    slots.reverse();
    let mut witness = Schedule::new();
    for step in slots {
        witness.push_slot(step);
    }
    Ok(OptimalSchedule {
        slots: witness.slots_used(),
        witness,
    })
}

/// Every nonempty independent set of selectable candidates, expanded over
/// all packet loads.
fn slot_choices(ecg: &ExtendedCollisionGraph, phi: &[u8], alpha: u32) -> Vec<Vec<ScheduleEntry>> {
    let live: Vec<TransmissionCandidate> = ecg
        .candidates()
        .filter(|c| phi[c.sender.index()] > 0)
        .collect();
    let mut sets = Vec::new();
    let mut cur = Vec::new();
    independent_sets(ecg, &live, 0, &mut cur, &mut sets);

    let mut out = Vec::new();
    for set in sets {
        let caps: Vec<u32> = set
            .iter()
            .map(|c| u32::from(phi[c.sender.index()]).min(alpha))
            .collect();
        let mut loads = vec![1u32; set.len()];
        loop {
            out.push(
                set.iter()
                    .zip(&loads)
                    .map(|(c, &g)| ScheduleEntry {
                        slot: 0,
                        sender: c.sender,
                        receiver: c.receiver,
                        gamma: g,
                        channel: c.channel,
                    })
                    .collect(),
            );
            // odometer over loads
            let mut i = 0;
            while i < loads.len() && loads[i] == caps[i] {
                loads[i] = 1;
                i += 1;
            }
            if i == loads.len() {
                break;
            }
            loads[i] += 1;
        }
    }
    out
}

fn independent_sets(
    ecg: &ExtendedCollisionGraph,
    live: &[TransmissionCandidate],
    from: usize,
    cur: &mut Vec<usize>,
    out: &mut Vec<Vec<TransmissionCandidate>>,
) {
    for i in from..live.len() {
        let ci = ecg.index_of(&live[i]).expect("candidate of the graph");
        if cur
            .iter()
            .any(|&j| ecg.conflicts(ci, ecg.index_of(&live[j]).expect("candidate of the graph")))
        {
            continue;
        }
        cur.push(i);
        out.push(cur.iter().map(|&j| live[j]).collect());
        independent_sets(ecg, live, i + 1, cur, out);
        cur.pop();
    }
}

/// Centralized analogue of the distributed selection: in each slot keep
/// taking the globally highest-precedence white candidate whose sender
/// holds data, blacken everything it conflicts with, and move the data.
pub fn greedy_centralized_schedule(w: &Wsn, alpha: u32, channels: u32) -> Schedule {
    assert!(alpha >= 1 && channels >= 1, "alpha and channels must be at least 1");
    let hops = compute_hops(w);
    let ecg = build_extended_collision_graph(&build_forwarding_graph(w, &hops), w, channels);
    let mut snap = NetworkSnapshot::new(w, alpha, channels);
    let ch = channels as usize;
    let mut s = Schedule::new();
    let mut black = vec![false; ecg.len()];
    while !snap.drained() {
        black.fill(false);
        let mut picked = Vec::new();
        while let Some(top) = greedy_pick(&ecg, &snap, &hops, &black) {
            let arc = ecg.arc_index(Link::new(top.sender, top.receiver)).expect("arc");
            let gamma = snap.ledger.phi(top.sender).min(alpha);
            snap.ledger.transfer(top.sender, top.receiver, gamma);
            picked.push(ScheduleEntry {
                slot: 0,
                sender: top.sender,
                receiver: top.receiver,
                gamma,
                channel: top.channel,
            });
            let off = top.channel as usize - 1;
            black[arc * ch..(arc + 1) * ch].fill(true);
            for &(j, kind) in ecg.arc_conflicts(arc) {
                let j = j as usize;
                match kind {
                    ConflictKind::Always => black[j * ch..(j + 1) * ch].fill(true),
                    ConflictKind::SameChannel => black[j * ch + off] = true,
                    ConflictKind::None => {}
                }
            }
        }
        assert!(!picked.is_empty(), "undrained network with nothing to schedule");
        s.push_slot(picked);
    }
    s
}

fn greedy_pick(
    ecg: &ExtendedCollisionGraph,
    snap: &NetworkSnapshot<'_>,
    hops: &HopMap,
    black: &[bool],
) -> Option<Precedence> {
    let ch = ecg.channels() as usize;
    let mut best: Option<Precedence> = None;
    for (a, link) in ecg.arcs().iter().enumerate() {
        if snap.ledger.phi(link.sender) == 0 {
            continue;
        }
        let Some(off) = (0..ch).find(|&c| !black[a * ch + c]) else {
            continue;
        };
        let c = TransmissionCandidate::new(link.sender, link.receiver, off as Channel + 1);
        let key = Precedence::new(&c, crate::collision::weights(&c, &snap.ledger, hops));
        if best.is_none_or(|b| key > b) {
            best = Some(key);
        }
    }
    best
}

/// One collection round over a fixed shortest-path tree, built as if
/// packets had no size limit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Template {
    /// `slots[k]` holds the tree links sent in template slot `k + 1`.
    pub slots: Vec<Vec<TransmissionCandidate>>,
}

/// Tree parent: the lowest-hop neighbor, ties to the smallest id.
pub fn tree_parent(w: &Wsn, hops: &HopMap, v: NodeId) -> Option<NodeId> {
    if v == w.sink() {
        return None;
    }
    w.neighbors(v).iter().copied().min_by_key(|&u| (hops.hop(u), u))
}

/// Packs every sensor's tree link into the earliest (slot, channel) after
/// all of its children's slots that conflicts with nothing already there,
/// deepest level first and by id within a level.
pub fn build_template(w: &Wsn, channels: u32) -> Template {
    let hops = compute_hops(w);
    let mut order: Vec<NodeId> = w.nodes().filter(|&v| v != w.sink()).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(hops.hop(v)), v));
    let mut slot_of = vec![0usize; w.len()];
    let mut slots: Vec<Vec<TransmissionCandidate>> = Vec::new();
    for v in order {
        let parent = tree_parent(w, &hops, v).expect("sensor with a neighbor");
        let earliest = w
            .neighbors(v)
            .iter()
            .filter(|&&c| tree_parent(w, &hops, c) == Some(v))
            .map(|c| slot_of[c.index()] + 1)
            .max()
            .unwrap_or(0);
        let mut k = earliest;
        let placed = loop {
            if slots.len() <= k {
                slots.resize_with(k + 1, Vec::new);
            }
            let free = (1..=channels)
                .map(|ch| TransmissionCandidate::new(v, parent, ch))
                .find(|c| slots[k].iter().all(|o| !collides(c, o, w)));
            if let Some(c) = free {
                break c;
            }
            k += 1;
        };
        slots[k].push(placed);
        slot_of[v.index()] = k;
    }
    Template { slots }
}

/// Replays the template round after round under packet capacity `alpha`.
/// Links whose sender holds nothing are dropped and emptied slots removed.
pub fn periodic_reuse_schedule(w: &Wsn, alpha: u32, channels: u32) -> Schedule {
    assert!(alpha >= 1 && channels >= 1, "alpha and channels must be at least 1");
    let template = build_template(w, channels);
    let mut snap = NetworkSnapshot::new(w, alpha, channels);
    let mut s = Schedule::new();
    while !snap.drained() {
        let before = s.slot_count();
        for slot in &template.slots {
            let start = snap.ledger.clone();
            let entries: Vec<ScheduleEntry> = slot
                .iter()
                .filter(|c| start.phi(c.sender) > 0)
                .map(|c| ScheduleEntry {
                    slot: 0,
                    sender: c.sender,
                    receiver: c.receiver,
                    gamma: start.phi(c.sender).min(alpha),
                    channel: c.channel,
                })
                .collect();
            if entries.is_empty() {
                continue;
            }
            for e in &entries {
                snap.ledger.transfer(e.sender, e.receiver, e.gamma);
            }
            s.push_slot(entries);
        }
        assert!(s.slot_count() > before, "replay round made no progress");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dcas::{run, DcasConfig};
    use crate::validator::validate;
    use crate::wsn::tests::seven_sensor;
    use crate::wsn::{random_unit_disk_deployment, DeploymentParams};
    use proptest::prelude::*;

    const S: NodeId = NodeId(0);
    const X: NodeId = NodeId(1);
    const Y: NodeId = NodeId(2);

    fn path(rho: Vec<u32>) -> Wsn {
        let edges: Vec<_> = (1..rho.len()).map(|i| (NodeId(i as u32 - 1), NodeId(i as u32))).collect();
        Wsn::from_edges(S, rho, &edges).unwrap()
    }

    fn valid(w: &Wsn, alpha: u32, channels: u32, s: &Schedule) -> bool {
        validate(w, &compute_hops(w), alpha, channels, s).ok
    }

    fn optimum(w: &Wsn, alpha: u32, channels: u32) -> u32 {
        brute_force_min_slots(w, alpha, channels, &SearchLimits::default()).unwrap().slots
    }

    #[test]
    fn tiny_optima() {
        assert_eq!(optimum(&path(vec![0, 2]), 1, 1), 2);
        assert_eq!(optimum(&path(vec![0, 0, 1]), 1, 1), 2);
        let star = Wsn::from_edges(S, vec![0, 1, 1], &[(S, X), (S, Y)]).unwrap();
        assert_eq!(optimum(&star, 1, 2), 2);
        assert_eq!(optimum(&path(vec![0, 5]), 3, 1), 2);
        assert_eq!(optimum(&path(vec![0, 0]), 3, 1), 0);
    }

    #[test]
    fn caps_enforced() {
        let l = SearchLimits::default();
        let big = path(vec![0, 1, 1, 1, 1, 1, 1]);
        assert_eq!(
            brute_force_min_slots(&big, 1, 1, &l).unwrap_err(),
            SizeCapError { what: "node count", value: 7, limit: 6 }
        );
        assert_eq!(brute_force_min_slots(&path(vec![0, 9]), 1, 1, &l).unwrap_err().what, "total generated data");
        assert_eq!(brute_force_min_slots(&path(vec![0, 1]), 1, 4, &l).unwrap_err().what, "channel count");
        assert_eq!(brute_force_min_slots(&path(vec![0, 1]), 8, 1, &l).unwrap_err().what, "packet capacity");
    }

    #[test]
    fn greedy_seven_sensor_first_slot() {
        let w = seven_sensor();
        let s = greedy_centralized_schedule(&w, 3, 2);
        let first: Vec<_> = s.slot(1).iter().map(|e| (e.sender.0, e.receiver.0, e.gamma, e.channel)).collect();
        assert_eq!(first, vec![(1, 0, 3, 2), (3, 2, 3, 1), (6, 4, 1, 1)]);
        assert!(valid(&w, 3, 2, &s));
        let d = run(&w, &DcasConfig::new(3, 2)).unwrap();
        assert_eq!(d.schedule.slot(1), s.slot(1));
    }

    #[test]
    fn single_link_capacity() {
        let w = path(vec![0, 5]);
        assert_eq!(greedy_centralized_schedule(&w, 3, 1).slots_used(), 2);
        let t = build_template(&w, 1);
        assert_eq!(t.slots.len(), 1);
        assert_eq!(periodic_reuse_schedule(&w, 3, 1).slots_used(), 2);
    }

    #[test]
    fn seven_sensor_template_one_round() {
        let w = seven_sensor();
        let t = build_template(&w, 2);
        // tree depth 3 needs at least three slots
        assert!(t.slots.len() >= 3);
        assert_eq!(t.slots.iter().map(Vec::len).sum::<usize>(), 7);
        let s = periodic_reuse_schedule(&w, 20, 2);
        assert!(valid(&w, 20, 2, &s));
        assert_eq!(s.slots_used() as usize, t.slots.len());
    }

    #[test]
    fn tree_parents() {
        let w = seven_sensor();
        let hops = compute_hops(&w);
        let parents: Vec<_> = w.nodes().map(|v| tree_parent(&w, &hops, v).map(|p| p.0)).collect();
        // e has parents a and b at hop 1 and takes the smaller id
        assert_eq!(parents, vec![None, Some(0), Some(0), Some(2), Some(1), Some(1), Some(4), Some(3)]);
    }

    #[test]
    fn seven_sensor_sink_bound() {
        let w = seven_sensor();
        let greedy = greedy_centralized_schedule(&w, 3, 2).slots_used();
        let periodic = periodic_reuse_schedule(&w, 3, 2).slots_used();
        // 20 units through one sink in packets of 3 need at least 7 slots
        assert!(greedy >= 7 && periodic >= 7);
    }

    #[test]
    fn greedy_extra_channel_can_cost_a_slot() {
        // the optimum never gets worse with more channels, the greedy can
        let side = 5.0 * (10.0 * std::f64::consts::PI / 8.0).sqrt();
        let mut p = DeploymentParams::new(10, side, 5.0, 1);
        p.retry_budget = 10_000;
        let w = random_unit_disk_deployment(&p, 1125).unwrap();
        let one = greedy_centralized_schedule(&w, 1, 1).slots_used();
        let two = greedy_centralized_schedule(&w, 1, 2).slots_used();
        assert_eq!((one, two), (13, 14));
    }

    fn capped_instance() -> impl Strategy<Value = (Wsn, u32, u32)> {
        (2usize..=6, any::<u64>(), 1u32..=3, 1u32..=2).prop_filter_map("needs Σρ ≤ 8", |(n, seed, alpha, ch)| {
            let mut p = DeploymentParams::new(n, 8.0, 5.0, 3);
            p.retry_budget = 10_000;
            let w = random_unit_disk_deployment(&p, seed).ok()?;
            (w.total_rho() <= 8).then_some((w, alpha, ch))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn all_schedulers_bounded_by_optimum((w, alpha, ch) in capped_instance()) {
            let best = brute_force_min_slots(&w, alpha, ch, &SearchLimits::default()).unwrap();
            prop_assert!(valid(&w, alpha, ch, &best.witness));
            let greedy = greedy_centralized_schedule(&w, alpha, ch);
            let periodic = periodic_reuse_schedule(&w, alpha, ch);
            let dcas = run(&w, &DcasConfig::new(alpha, ch)).unwrap().schedule;
            for s in [&greedy, &periodic, &dcas] {
                prop_assert!(valid(&w, alpha, ch, s));
                prop_assert!(s.slots_used() >= best.slots);
            }
        }

        #[test]
        fn optimum_monotone_in_channels((w, alpha, _ch) in capped_instance()) {
            let l = SearchLimits::default();
            let one = brute_force_min_slots(&w, alpha, 1, &l).unwrap().slots;
            let two = brute_force_min_slots(&w, alpha, 2, &l).unwrap().slots;
            prop_assert!(two <= one);
            prop_assert!(greedy_centralized_schedule(&w, alpha, 2).slots_used() >= two);
        }

        #[test]
        fn baselines_valid_on_larger_networks(n in 5usize..60, beta in 1u32..6, alpha in 1u32..9, ch in 1u32..5, seed in any::<u64>()) {
            let side = 5.0 * (n as f64 * std::f64::consts::PI / 8.0).sqrt();
            let mut p = DeploymentParams::new(n, side, 5.0, beta);
            p.retry_budget = 10_000;
            let w = random_unit_disk_deployment(&p, seed).unwrap();
            prop_assert!(valid(&w, alpha, ch, &greedy_centralized_schedule(&w, alpha, ch)));
            prop_assert!(valid(&w, alpha, ch, &periodic_reuse_schedule(&w, alpha, ch)));
        }
    }
}
