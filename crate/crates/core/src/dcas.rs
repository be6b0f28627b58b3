//! Distributed collision-avoidance scheduling.
//!
//! Every sensor runs a [`NodeState`] machine over its 3-hop neighborhood and
//! talks to the others only through [`ControlMessage`]s. A single-threaded
//! driver delivers messages and activates nodes in a fixed or seeded order,
//! and collects the originated decisions into the global [`Schedule`].
//!
//! Control messages are delivered reliably to every live node within 3 hops
//! of the broadcaster. A node drains its whole inbox before it acts.
//!
//! Blackening for a slot a node has not reached yet is held back and applied
//! when the node's clock gets there. Receivers jump their clock forward on a
//! decision, so neighbors can be a slot behind the news they receive.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::collision::{
    build_extended_collision_graph, build_forwarding_graph, delta, Channel, ConflictKind,
    ExtendedCollisionGraph, ForwardingGraph, Link, Precedence, CandidateWeights,
};
use crate::schedule::{Schedule, ScheduleEntry};
use crate::wsn::{compute_hops, k_hop_subgraph, HopMap, NodeId, Wsn};

/// Radius of the neighborhood every sensor maintains.
pub const VIEW_RADIUS: u32 = 3;

const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ControlMessage {
    /// A scheduled transmission; `entry.slot` is the slot it occupies.
    Decision(ScheduleEntry),
    /// `node` schedules nothing in `slot`.
    Skip { node: NodeId, slot: u32 },
    Finished(NodeId),
}

impl fmt::Display for ControlMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlMessage::Decision(e) => write!(
                f,
                "decision slot={} {}->{} gamma={} ch={}",
                e.slot, e.sender, e.receiver, e.gamma, e.channel
            ),
            ControlMessage::Skip { node, slot } => write!(f, "skip node={node} slot={slot}"),
            ControlMessage::Finished(v) => write!(f, "finished node={v}"),
        }
    }
}

/// Read-only network knowledge shared by all node machines: topology, hop
/// counts (flooded from the sink) and the conflict relation.
#[derive(Debug)]
pub struct Context<'a> {
    pub wsn: &'a Wsn,
    pub hops: &'a HopMap,
    pub fg: &'a ForwardingGraph,
    pub ecg: &'a ExtendedCollisionGraph,
    pub alpha: u32,
}

impl Context<'_> {
    fn channels(&self) -> usize {
        self.ecg.channels() as usize
    }
}

#[derive(Clone, Copy, Debug)]
enum Mark {
    Decision { arc: u32, channel: Channel },
    Skip(NodeId),
}

/// What a node did when activated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Action {
    Decided(ScheduleEntry),
    Skipped(u32),
    Waiting,
}

/// Per-sensor DCAS state.
#[derive(Clone, Debug)]
pub struct NodeState {
    me: NodeId,
    t: u32,
    finished: bool,
    is_sink: bool,
    // local node bookkeeping, indexed through `local_of`
    local_of: Vec<u32>,
    view: Vec<NodeId>,
    alive: Vec<bool>,
    believed_t: Vec<u32>,
    phi: Vec<u32>,
    // local candidate bookkeeping, indexed through `arc_local`
    arc_local: Vec<u32>,
    arcs: Vec<u32>,
    arc_live: Vec<bool>,
    // a candidate is black for slot t iff its stamp equals t
    black_arc: Vec<u32>,
    black_ch: Vec<u32>,
    pending: BTreeMap<u32, Vec<Mark>>,
    // slots of the decisions already processed, per sender id
    seen: Vec<Vec<u32>>,
    schedule: Vec<ScheduleEntry>,
    // set when the last scheduling step waited and nothing changed since
    idle: bool,
}

impl NodeState {
    /// Builds the 3-hop local view of `me`. Every local candidate starts
    /// white, clocks at slot 1 and `phi` at the generated amounts.
    pub fn init(ctx: &Context<'_>, me: NodeId) -> NodeState {
        let w = ctx.wsn;
        let sub = k_hop_subgraph(w, me, VIEW_RADIUS);
        let mut local_of = vec![NONE; w.len()];
        let view: Vec<NodeId> = sub.nodes().to_vec();
        for (i, v) in view.iter().enumerate() {
            local_of[v.index()] = i as u32;
        }
        let mut arc_local = vec![NONE; ctx.ecg.arc_count()];
        let mut arcs = Vec::new();
        for (j, l) in ctx.ecg.arcs().iter().enumerate() {
            if sub.contains_edge(l.sender, l.receiver) {
                arc_local[j] = arcs.len() as u32;
                arcs.push(j as u32);
            }
        }
        let ch = ctx.channels();
        NodeState {
            me,
            t: 1,
            finished: false,
            is_sink: me == w.sink(),
            alive: vec![true; view.len()],
            believed_t: vec![1; view.len()],
            phi: view.iter().map(|&v| w.rho(v)).collect(),
            local_of,
            view,
            arc_live: vec![true; arcs.len()],
            black_arc: vec![0; arcs.len()],
            black_ch: vec![0; arcs.len() * ch],
            arc_local,
            arcs,
            pending: BTreeMap::new(),
            seen: vec![Vec::new(); w.len()],
            schedule: Vec::new(),
            idle: false,
        }
    }

    pub fn id(&self) -> NodeId {
        self.me
    }

    /// Slot this node is waiting to schedule.
    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Entries this node takes part in, as sender or receiver.
    pub fn entries(&self) -> &[ScheduleEntry] {
        &self.schedule
    }

    /// Live nodes of the local view, including `me`.
    pub fn view(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.view
            .iter()
            .zip(&self.alive)
            .filter(|(_, &a)| a)
            .map(|(&v, _)| v)
    }

    pub fn phi(&self, v: NodeId) -> Option<u32> {
        self.local(v).map(|i| self.phi[i])
    }

    pub fn believed_t(&self, v: NodeId) -> Option<u32> {
        if v == self.me {
            return Some(self.t);
        }
        self.local(v).filter(|&i| self.alive[i]).map(|i| self.believed_t[i])
    }

    /// Live local candidates.
    pub fn candidates<'a>(&'a self, ctx: &'a Context<'_>) -> impl Iterator<Item = (Link, Channel)> + 'a {
        let ch = ctx.ecg.channels();
        self.arcs
            .iter()
            .zip(&self.arc_live)
            .filter(|(_, &l)| l)
            .flat_map(move |(&j, _)| (1..=ch).map(move |c| (ctx.ecg.arcs()[j as usize], c)))
    }

    pub fn is_white(&self, ctx: &Context<'_>, link: Link, channel: Channel) -> bool {
        let Some(j) = ctx.ecg.arc_index(link) else { return false };
        let a = self.arc_local[j];
        if a == NONE || !self.arc_live[a as usize] {
            return false;
        }
        let ch = ctx.channels();
        self.black_arc[a as usize] != self.t
            && self.black_ch[a as usize * ch + channel as usize - 1] != self.t
    }

    #[inline]
    fn local(&self, v: NodeId) -> Option<usize> {
        let i = self.local_of[v.index()];
        (i != NONE).then_some(i as usize)
    }

    fn set_believed(&mut self, v: NodeId, t: u32) {
        if v == self.me {
            return;
        }
        if let Some(i) = self.local(v) {
            self.believed_t[i] = self.believed_t[i].max(t);
        }
    }

    fn advance_to(&mut self, ctx: &Context<'_>, t: u32) {
        self.idle = false;
        debug_assert!(t > self.t);
        self.t = t;
        // colors are stamped by slot, so moving the clock whitens everything
        let stale: Vec<u32> = self.pending.range(..t).map(|(&k, _)| k).collect();
        for k in stale {
            self.pending.remove(&k);
        }
        if let Some(marks) = self.pending.remove(&t) {
            for m in marks {
                self.apply_mark(ctx, m);
            }
        }
    }

    fn apply_mark(&mut self, ctx: &Context<'_>, m: Mark) {
        let t = self.t;
        let ch = ctx.channels();
        match m {
            Mark::Decision { arc, channel } => {
                let a = self.arc_local[arc as usize];
                if a != NONE {
                    self.black_arc[a as usize] = t;
                }
                for &(j, kind) in ctx.ecg.arc_conflicts(arc as usize) {
                    let b = self.arc_local[j as usize];
                    if b == NONE {
                        continue;
                    }
                    match kind {
                        ConflictKind::Always => self.black_arc[b as usize] = t,
                        ConflictKind::SameChannel => {
                            self.black_ch[b as usize * ch + channel as usize - 1] = t
                        }
                        ConflictKind::None => {}
                    }
                }
            }
            Mark::Skip(v) => {
                for &j in ctx.fg.out_arcs(v).iter().chain(ctx.fg.in_arcs(v)) {
                    let a = self.arc_local[j as usize];
                    if a != NONE {
                        self.black_arc[a as usize] = t;
                    }
                }
            }
        }
    }

    fn mark(&mut self, ctx: &Context<'_>, slot: u32, m: Mark) {
        use std::cmp::Ordering::*;
        match slot.cmp(&self.t) {
            Equal => self.apply_mark(ctx, m),
            Greater => self.pending.entry(slot).or_default().push(m),
            Less => {}
        }
    }

    /// Processes a decision. Returns the message to relay when this node is
    /// the receiver or the decision blackens one of its outgoing links;
    /// duplicates and own decisions are ignored.
    pub fn handle_decision(&mut self, ctx: &Context<'_>, e: ScheduleEntry) -> Option<ControlMessage> {
        if e.sender == self.me || self.seen[e.sender.index()].iter().rev().any(|&k| k == e.slot) {
            return None;
        }
        self.seen[e.sender.index()].push(e.slot);
        self.idle = false;
        if let Some(i) = self.local(e.sender) {
            self.phi[i] = self.phi[i].saturating_sub(e.gamma);
        }
        if let Some(i) = self.local(e.receiver) {
            self.phi[i] += e.gamma;
        }
        let next = e.slot + 1;
        self.set_believed(e.sender, next);
        self.set_believed(e.receiver, next);
        if e.receiver == self.me {
            self.schedule.push(e);
            debug_assert_eq!(self.t, e.slot, "receiver {} was not at slot {}", self.me, e.slot);
            if next > self.t {
                self.advance_to(ctx, next);
            }
            return Some(ControlMessage::Decision(e));
        }
        let arc = ctx
            .ecg
            .arc_index(Link::new(e.sender, e.receiver))
            .expect("decision over an arc of the forwarding graph") as u32;
        self.mark(ctx, e.slot, Mark::Decision { arc, channel: e.channel });
        // nodes holding one of our links may be out of reach of both ends
        let fg_arcs = ctx.ecg.arcs();
        let ours = ctx
            .ecg
            .arc_conflicts(arc as usize)
            .iter()
            .any(|&(j, kind)| kind != ConflictKind::None && fg_arcs[j as usize].sender == self.me);
        ours.then_some(ControlMessage::Decision(e))
    }

    pub fn handle_skip(&mut self, ctx: &Context<'_>, node: NodeId, slot: u32) {
        if node == self.me {
            return;
        }
        self.idle = false;
        self.mark(ctx, slot, Mark::Skip(node));
        self.set_believed(node, slot + 1);
    }

    /// Drops `v` and every candidate touching it from the local view.
    pub fn handle_finished(&mut self, ctx: &Context<'_>, v: NodeId) {
        let Some(i) = self.local(v) else { return };
        if !self.alive[i] {
            return;
        }
        self.idle = false;
        self.alive[i] = false;
        for &j in ctx.fg.out_arcs(v).iter().chain(ctx.fg.in_arcs(v)) {
            let a = self.arc_local[j as usize];
            if a != NONE {
                self.arc_live[a as usize] = false;
            }
        }
    }

    pub fn handle(&mut self, ctx: &Context<'_>, m: &ControlMessage) -> Option<ControlMessage> {
        match *m {
            ControlMessage::Decision(e) => self.handle_decision(ctx, e),
            ControlMessage::Skip { node, slot } => {
                self.handle_skip(ctx, node, slot);
                None
            }
            ControlMessage::Finished(v) => {
                self.handle_finished(ctx, v);
                None
            }
        }
    }

    /// A sensor finishes once it holds no data and no deeper sensor remains
    /// in its view. The sink finishes once all of its neighbors have.
    pub fn check_finish(&mut self, ctx: &Context<'_>) -> Option<ControlMessage> {
        if self.finished {
            return None;
        }
        if self.is_sink {
            let done = ctx
                .wsn
                .neighbors(self.me)
                .iter()
                .all(|&v| self.local(v).is_some_and(|i| !self.alive[i]));
            self.finished = done;
            return None;
        }
        let my_hop = ctx.hops.hop(self.me);
        let me = self.local(self.me).expect("own node in view");
        if self.phi[me] == 0 && self.view().all(|v| ctx.hops.hop(v) <= my_hop) {
            self.finished = true;
            return Some(ControlMessage::Finished(self.me));
        }
        None
    }

    /// Clock gate: no live node of the view lags behind this node.
    pub fn may_act(&self) -> bool {
        self.view
            .iter()
            .enumerate()
            .all(|(i, &v)| v == self.me || !self.alive[i] || self.t <= self.believed_t[i])
    }

    /// Highest-precedence white candidate whose sender holds data.
    pub fn best_candidate(&self, ctx: &Context<'_>) -> Option<Precedence> {
        let t = self.t;
        let ch = ctx.channels();
        let fg_arcs = ctx.ecg.arcs();
        let mut best: Option<Precedence> = None;
        for (a, &j) in self.arcs.iter().enumerate() {
            if !self.arc_live[a] || self.black_arc[a] == t {
                continue;
            }
            let link = fg_arcs[j as usize];
            let phi_x = self.phi[self.local_of[link.sender.index()] as usize];
            if phi_x == 0 {
                continue;
            }
            let Some(off) = (0..ch).find(|&c| self.black_ch[a * ch + c] != t) else {
                continue;
            };
            let weights = self.weights(ctx, link, phi_x);
            let key = Precedence {
                omega: weights.omega,
                eta: weights.eta,
                channel: off as Channel + 1,
                sender: link.sender,
                receiver: link.receiver,
            };
            if best.is_none_or(|b| key > b) {
                best = Some(key);
            }
        }
        best
    }

    fn weights(&self, ctx: &Context<'_>, link: Link, phi_x: u32) -> CandidateWeights {
        let omega = u64::from(delta(phi_x, ctx.alpha)) * u64::from(ctx.hops.hop(link.sender));
        let eta = if ctx.hops.hop(link.receiver) == 0 {
            0
        } else {
            let p = self.phi[self.local_of[link.receiver.index()] as usize];
            ctx.alpha * delta(p, ctx.alpha) - p
        };
        CandidateWeights { omega, eta }
    }

    /// Runs the scheduling step for the current slot. The caller checks the
    /// clock gate first.
    pub fn try_schedule(&mut self, ctx: &Context<'_>) -> (Action, Option<ControlMessage>) {
        if self.idle {
            return (Action::Waiting, None);
        }
        match self.best_candidate(ctx) {
            None => {
                let slot = self.t;
                self.advance_to(ctx, slot + 1);
                (
                    Action::Skipped(slot),
                    Some(ControlMessage::Skip { node: self.me, slot }),
                )
            }
            Some(top) if top.sender == self.me => {
                let me = self.local(self.me).expect("own node in view");
                let y = self.local(top.receiver).expect("receiver in view");
                let gamma = self.phi[me].min(ctx.alpha);
                let entry = ScheduleEntry {
                    slot: self.t,
                    sender: self.me,
                    receiver: top.receiver,
                    gamma,
                    channel: top.channel,
                };
                self.phi[me] -= gamma;
                self.phi[y] += gamma;
                self.schedule.push(entry);
                let next = self.t + 1;
                self.advance_to(ctx, next);
                self.believed_t[y] = self.believed_t[y].max(next);
                (Action::Decided(entry), Some(ControlMessage::Decision(entry)))
            }
            Some(_) => {
                self.idle = true;
                (Action::Waiting, None)
            }
        }
    }
}

/// Order in which the driver activates nodes during a pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interleaving {
    /// Ascending node id every pass.
    Ascending,
    /// A fresh seeded permutation every pass.
    Shuffled { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DcasConfig {
    pub alpha: u32,
    pub channels: u32,
    pub interleaving: Interleaving,
    pub trace: bool,
}

impl DcasConfig {
    pub fn new(alpha: u32, channels: u32) -> Self {
        DcasConfig {
            alpha,
            channels,
            interleaving: Interleaving::Ascending,
            trace: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DcasError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("livelock after {events} driver events at slot {slot}: {reason}")]
    Livelock {
        events: u64,
        slot: u32,
        reason: &'static str,
        transcript: Vec<String>,
    },
    #[error("per-node schedules disagree with the global schedule: {0}")]
    Inconsistent(String),
}

#[derive(Clone, Debug)]
pub struct DcasOutcome {
    pub schedule: Schedule,
    /// `u.S` of every node, indexed by node id.
    pub node_entries: Vec<Vec<ScheduleEntry>>,
    /// Event log; empty unless tracing was requested.
    pub transcript: Vec<String>,
    /// Node activations performed by the driver.
    pub events: u64,
}

struct Driver<'a> {
    ctx: Context<'a>,
    nodes: Vec<NodeState>,
    inbox: Vec<Vec<(NodeId, ControlMessage)>>,
    decisions: Vec<ScheduleEntry>,
    trace: Option<Vec<String>>,
    events: u64,
}

impl Driver<'_> {
    fn log(&mut self, node: NodeId, what: impl FnOnce() -> String) {
        if let Some(tr) = &mut self.trace {
            tr.push(format!("t={} node={} ev={}", self.events, node, what()));
        }
    }

    fn broadcast(&mut self, from: NodeId, m: ControlMessage) {
        let Driver { nodes, inbox, .. } = self;
        for v in nodes[from.index()].view() {
            if v != from && !nodes[v.index()].is_finished() {
                inbox[v.index()].push((from, m));
            }
        }
    }

    /// Activates one node. Returns whether anything happened.
    fn step(&mut self, u: NodeId) -> bool {
        let ui = u.index();
        self.events += 1;
        let mut msgs = std::mem::take(&mut self.inbox[ui]);
        let mut progress = !msgs.is_empty();
        for &(from, m) in &msgs {
            self.log(u, || format!("recv from={from} {m}"));
            if let Some(relay) = self.nodes[ui].handle(&self.ctx, &m) {
                self.broadcast(u, relay);
            }
        }
        // nobody writes to its own inbox, so hand the buffer back for reuse
        msgs.clear();
        self.inbox[ui] = msgs;
        if let Some(fin) = self.nodes[ui].check_finish(&self.ctx) {
            self.log(u, || "finished".to_string());
            self.broadcast(u, fin);
            return true;
        }
        if self.nodes[ui].is_finished() || !self.nodes[ui].may_act() {
            return progress;
        }
        let (action, msg) = self.nodes[ui].try_schedule(&self.ctx);
        match action {
            Action::Decided(e) => {
                self.log(u, || {
                    format!(
                        "decision slot={} {}->{} gamma={} ch={}",
                        e.slot, e.sender, e.receiver, e.gamma, e.channel
                    )
                });
                self.decisions.push(e);
                progress = true;
            }
            Action::Skipped(slot) => {
                self.log(u, || format!("skip slot={slot}"));
                progress = true;
            }
            Action::Waiting => {}
        }
        if let Some(m) = msg {
            self.broadcast(u, m);
        }
        progress
    }
}

/// Runs DCAS on `w` until the sink sees all of its neighbors finished.
pub fn run(w: &Wsn, cfg: &DcasConfig) -> Result<DcasOutcome, DcasError> {
    if cfg.alpha == 0 || cfg.channels == 0 {
        return Err(DcasError::Config("alpha and channels must be at least 1".into()));
    }
    let hops = compute_hops(w);
    let fg = build_forwarding_graph(w, &hops);
    let ecg = build_extended_collision_graph(&fg, w, cfg.channels);
    let ctx = Context {
        wsn: w,
        hops: &hops,
        fg: &fg,
        ecg: &ecg,
        alpha: cfg.alpha,
    };
    let nodes: Vec<NodeState> = w.nodes().map(|v| NodeState::init(&ctx, v)).collect();
    let n = w.len();
    let mut d = Driver {
        ctx,
        inbox: vec![Vec::new(); n],
        nodes,
        decisions: Vec::new(),
        trace: cfg.trace.then(Vec::new),
        events: 0,
    };
    let mut order: Vec<NodeId> = w.nodes().collect();
    let mut rng = match cfg.interleaving {
        Interleaving::Shuffled { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        Interleaving::Ascending => None,
    };
    let sink = w.sink();
    let n2 = (n as u64) * (n as u64);

    loop {
        // the sink's completion check runs on its own activation
        if d.nodes[sink.index()].is_finished() {
            break;
        }
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        let mut progress = false;
        for &u in &order {
            if !d.nodes[u.index()].is_finished() {
                progress |= d.step(u);
            }
        }
        let max_slot = d.nodes.iter().map(NodeState::t).max().unwrap_or(1);
        let livelock = |reason| DcasError::Livelock {
            events: d.events,
            slot: max_slot,
            reason,
            transcript: d.trace.clone().unwrap_or_default(),
        };
        if !progress && !d.nodes[sink.index()].is_finished() {
            return Err(livelock("no node can act and no message is pending"));
        }
        if d.events > 10 * n2 * u64::from(max_slot) {
            return Err(livelock("step budget exhausted"));
        }
    }

    let schedule = Schedule::from_entries(d.decisions.iter().copied());
    let node_entries: Vec<Vec<ScheduleEntry>> = d.nodes.iter().map(|s| s.entries().to_vec()).collect();
    cross_check(&schedule, &node_entries)?;
    Ok(DcasOutcome {
        schedule,
        node_entries,
        transcript: d.trace.unwrap_or_default(),
        events: d.events,
    })
}

fn cross_check(s: &Schedule, per_node: &[Vec<ScheduleEntry>]) -> Result<(), DcasError> {
    for e in s.entries() {
        for v in [e.sender, e.receiver] {
            let hits = per_node[v.index()].iter().filter(|x| *x == e).count();
            if hits != 1 {
                return Err(DcasError::Inconsistent(format!(
                    "{e} appears {hits} time(s) in the list of node {v}"
                )));
            }
        }
    }
    let total: usize = per_node.iter().map(Vec::len).sum();
    if total != 2 * s.len() {
        return Err(DcasError::Inconsistent(format!(
            "{total} per-node entries for {} scheduled transmissions",
            s.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validator::validate;
    use crate::wsn::tests::seven_sensor;
    use crate::wsn::{random_unit_disk_deployment, DeploymentParams};
    use proptest::prelude::*;

    const S: NodeId = NodeId(0);
    const A: NodeId = NodeId(1);
    const B: NodeId = NodeId(2);
    const C: NodeId = NodeId(3);
    const D: NodeId = NodeId(4);
    const E: NodeId = NodeId(5);
    const F: NodeId = NodeId(6);

    fn entry(slot: u32, s: NodeId, r: NodeId, gamma: u32, ch: Channel) -> ScheduleEntry {
        ScheduleEntry { slot, sender: s, receiver: r, gamma, channel: ch }
    }

    struct Fixture {
        w: Wsn,
        hops: HopMap,
        fg: ForwardingGraph,
        ecg: ExtendedCollisionGraph,
    }

    impl Fixture {
        fn seven_sensor() -> Self {
            let w = seven_sensor();
            let hops = compute_hops(&w);
            let fg = build_forwarding_graph(&w, &hops);
            let ecg = build_extended_collision_graph(&fg, &w, 2);
            Fixture { w, hops, fg, ecg }
        }

        fn ctx(&self) -> Context<'_> {
            Context { wsn: &self.w, hops: &self.hops, fg: &self.fg, ecg: &self.ecg, alpha: 3 }
        }
    }

    #[test]
    fn f_local_graph() {
        let fx = Fixture::seven_sensor();
        let ctx = fx.ctx();
        let f = NodeState::init(&ctx, F);
        let mut links: Vec<_> = f.candidates(&ctx).map(|(l, _)| (l.sender, l.receiver)).collect();
        links.dedup();
        assert_eq!(links, vec![(A, S), (D, A), (E, A), (F, D)]);
        assert_eq!(f.candidates(&ctx).count(), 8);
        assert!(f.candidates(&ctx).all(|(l, c)| f.is_white(&ctx, l, c)));
        // induced subgraph of the global graph
        let local: Vec<usize> = f
            .candidates(&ctx)
            .map(|(l, c)| fx.ecg.index_of(&crate::collision::TransmissionCandidate::new(l.sender, l.receiver, c)).unwrap())
            .collect();
        assert_eq!(local.len(), 8);
    }

    #[test]
    fn f_decides_first_slot() {
        let fx = Fixture::seven_sensor();
        let ctx = fx.ctx();
        let mut f = NodeState::init(&ctx, F);
        assert!(f.may_act());
        let (action, msg) = f.try_schedule(&ctx);
        let e = entry(1, F, D, 1, 1);
        assert_eq!(action, Action::Decided(e));
        assert_eq!(msg, Some(ControlMessage::Decision(e)));
        assert_eq!(f.phi(F), Some(0));
        assert_eq!(f.phi(D), Some(3));
        assert_eq!(f.t(), 2);
        assert_eq!(f.believed_t(D), Some(2));
    }

    #[test]
    fn a_after_c_and_f() {
        let fx = Fixture::seven_sensor();
        let ctx = fx.ctx();
        let mut a = NodeState::init(&ctx, A);
        a.handle_decision(&ctx, entry(1, F, D, 1, 1));
        a.handle_decision(&ctx, entry(1, C, B, 3, 1));
        let white: Vec<_> = a.candidates(&ctx).filter(|&(l, c)| a.is_white(&ctx, l, c)).collect();
        assert_eq!(white, vec![(Link::new(A, S), 2), (Link::new(E, A), 2)]);
        let (action, _) = a.try_schedule(&ctx);
        assert_eq!(action, Action::Decided(entry(1, A, S, 3, 2)));
    }

    #[test]
    fn e_skips_after_three_decisions() {
        let fx = Fixture::seven_sensor();
        let ctx = fx.ctx();
        let mut e = NodeState::init(&ctx, E);
        // a -> s and c -> b touch e's own links, f -> d does not
        let relayed: Vec<bool> = [entry(1, A, S, 3, 2), entry(1, C, B, 3, 1), entry(1, F, D, 1, 1)]
            .into_iter()
            .map(|d| e.handle_decision(&ctx, d).is_some())
            .collect();
        assert_eq!(relayed, vec![true, true, false]);
        assert!(e.candidates(&ctx).all(|(l, c)| !e.is_white(&ctx, l, c)));
        assert_eq!(e.try_schedule(&ctx), (Action::Skipped(1), Some(ControlMessage::Skip { node: E, slot: 1 })));
    }

    #[test]
    fn waits_on_foreign_top_candidate() {
        let fx = Fixture::seven_sensor();
        let ctx = fx.ctx();
        let mut a = NodeState::init(&ctx, A);
        // c -> b has the globally highest precedence at slot 1
        assert_eq!(a.try_schedule(&ctx), (Action::Waiting, None));
        assert_eq!(a.t(), 1);
    }

    #[test]
    fn receiver_records_once_and_relays() {
        let fx = Fixture::seven_sensor();
        let ctx = fx.ctx();
        let mut d = NodeState::init(&ctx, D);
        let e = entry(1, F, D, 1, 1);
        assert_eq!(d.handle_decision(&ctx, e), Some(ControlMessage::Decision(e)));
        assert_eq!(d.handle_decision(&ctx, e), None);
        assert_eq!(d.entries(), &[e]);
        assert_eq!(d.t(), 2);
        assert_eq!(d.phi(D), Some(3));
    }

    #[test]
    fn skip_blackens_only_current_slot() {
        let fx = Fixture::seven_sensor();
        let ctx = fx.ctx();
        let mut a = NodeState::init(&ctx, A);
        a.handle_skip(&ctx, E, 1);
        assert!(!a.is_white(&ctx, Link::new(E, A), 1));
        assert!(!a.is_white(&ctx, Link::new(E, A), 2));
        assert_eq!(a.believed_t(E), Some(2));
        let mut b = NodeState::init(&ctx, B);
        b.handle_skip(&ctx, E, 4);
        assert!(b.is_white(&ctx, Link::new(E, B), 1));
        assert_eq!(b.believed_t(E), Some(5));
        // unknown node: clock only
        b.handle_skip(&ctx, F, 1);
        assert_eq!(b.believed_t(F), Some(2));
    }

    #[test]
    fn finished_prunes_view() {
        let fx = Fixture::seven_sensor();
        let ctx = fx.ctx();
        let mut d = NodeState::init(&ctx, D);
        d.handle_finished(&ctx, F);
        assert!(!d.candidates(&ctx).any(|(l, _)| l.touches(F)));
        assert_eq!(d.believed_t(F), None);
        let mut g = NodeState::init(&ctx, NodeId(7));
        g.handle_finished(&ctx, F); // not in g's view
        assert_eq!(g.view().count(), 6);
    }

    #[test]
    fn finish_rules() {
        let fx = Fixture::seven_sensor();
        let ctx = fx.ctx();
        let mut f = NodeState::init(&ctx, F);
        assert_eq!(f.check_finish(&ctx), None);
        f.try_schedule(&ctx);
        assert_eq!(f.check_finish(&ctx), Some(ControlMessage::Finished(F)));
        assert!(f.is_finished());
        // e drains but a deeper node (f) is still in its view
        let mut e = NodeState::init(&ctx, E);
        let me = e.local(E).unwrap();
        e.phi[me] = 0;
        assert_eq!(e.check_finish(&ctx), None);
        e.handle_finished(&ctx, F);
        e.handle_finished(&ctx, NodeId(7));
        assert_eq!(e.check_finish(&ctx), Some(ControlMessage::Finished(E)));
    }

    #[test]
    fn leaf_without_data_finishes_immediately() {
        let w = Wsn::from_edges(S, vec![0, 0], &[(S, A)]).unwrap();
        let out = run(&w, &DcasConfig::new(2, 1)).unwrap();
        assert!(out.schedule.is_empty());
    }

    #[test]
    fn sink_only() {
        let w = Wsn::from_edges(S, vec![0], &[]).unwrap();
        let out = run(&w, &DcasConfig::new(3, 2)).unwrap();
        assert!(out.schedule.is_empty());
        assert_eq!(out.schedule.slots_used(), 0);
    }

    #[test]
    fn seven_sensor_slot_one_and_walkthrough() {
        let w = seven_sensor();
        let mut cfg = DcasConfig::new(3, 2);
        cfg.trace = true;
        let out = run(&w, &cfg).unwrap();
        assert_eq!(
            out.schedule.slot(1),
            &[entry(1, A, S, 3, 2), entry(1, C, B, 3, 1), entry(1, F, D, 1, 1)]
        );
        let tr = &out.transcript;
        assert!(tr.iter().any(|l| l.ends_with("node=5 ev=skip slot=1")));
        let f_fin = tr.iter().position(|l| l.ends_with("node=6 ev=finished")).unwrap();
        let f_dec = tr.iter().position(|l| l.contains("node=6 ev=decision slot=1 6->4")).unwrap();
        assert!(f_dec < f_fin);
        let delivered: u32 = out.schedule.entries().filter(|e| e.receiver == S).map(|e| e.gamma).sum();
        assert_eq!(delivered, 20);
    }

    fn random_instance(n: usize, beta: u32, seed: u64) -> Wsn {
        let side = 5.0 * (n as f64 * std::f64::consts::PI / 8.0).sqrt();
        let mut p = DeploymentParams::new(n, side, 5.0, beta);
        p.retry_budget = 10_000;
        random_unit_disk_deployment(&p, seed).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn schedules_are_valid_and_terminate(
            n in 5usize..61,
            beta in 1u32..6,
            alpha in prop::sample::select(vec![1u32, 2, 3, 8]),
            channels in prop::sample::select(vec![1u32, 2, 4]),
            seed in any::<u64>(),
            shuffled in any::<bool>(),
        ) {
            let w = random_instance(n, beta, seed);
            let mut cfg = DcasConfig::new(alpha, channels);
            if shuffled {
                cfg.interleaving = Interleaving::Shuffled { seed };
            }
            let out = run(&w, &cfg).unwrap();
            let r = validate(&w, &compute_hops(&w), alpha, channels, &out.schedule);
            prop_assert!(r.ok, "{}", r);
            let again = run(&w, &cfg).unwrap();
            prop_assert_eq!(again.schedule, out.schedule);
        }
    }

    #[test]
    fn wait_cycle_through_far_conflict() {
        // 3 -> 18 is blackened by a decision four hops away from node 7,
        // which also holds it; without the sender relaying, 3 and 7 wait on
        // each other forever
        let w = random_instance(26, 3, 6333339505988445086);
        let out = run(&w, &DcasConfig::new(1, 1)).unwrap();
        assert!(validate(&w, &compute_hops(&w), 1, 1, &out.schedule).ok);
    }

    #[test]
    fn zero_config_rejected() {
        assert!(matches!(run(&seven_sensor(), &DcasConfig::new(0, 1)), Err(DcasError::Config(_))));
    }
}
