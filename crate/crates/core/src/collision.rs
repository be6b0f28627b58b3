//! Data-forwarding graph, the extended relative collision graph and the
//! weights and precedence order used to pick transmissions from it.

use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::wsn::{HopMap, NodeId, Wsn};

/// 1-based channel number.
pub type Channel = u32;

/// A directed link `sender -> receiver`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub sender: NodeId,
    pub receiver: NodeId,
}

impl Link {
    pub fn new(sender: NodeId, receiver: NodeId) -> Self {
        Link { sender, receiver }
    }

    pub fn touches(&self, v: NodeId) -> bool {
        self.sender == v || self.receiver == v
    }
}

/// Packets needed to carry `phi` units when `alpha` units fit in one packet.
#[inline]
pub fn delta(phi: u32, alpha: u32) -> u32 {
    debug_assert!(alpha >= 1);
    phi.div_ceil(alpha)
}

/// Arcs `(u, v)` of the network with `hop(u) > hop(v)`, sorted by
/// `(sender, receiver)`.
#[derive(Clone, Debug)]
pub struct ForwardingGraph {
    arcs: Vec<Link>,
    out: Vec<Vec<u32>>,
    inc: Vec<Vec<u32>>,
}

pub fn build_forwarding_graph(w: &Wsn, hops: &HopMap) -> ForwardingGraph {
    let mut arcs = Vec::new();
    let mut out = vec![Vec::new(); w.len()];
    let mut inc = vec![Vec::new(); w.len()];
    for u in w.nodes() {
        for &v in w.neighbors(u) {
            if hops.hop(u) > hops.hop(v) {
                let idx = arcs.len() as u32;
                arcs.push(Link::new(u, v));
                out[u.index()].push(idx);
                inc[v.index()].push(idx);
            }
        }
    }
    ForwardingGraph { arcs, out, inc }
}

impl ForwardingGraph {
    pub fn arcs(&self) -> &[Link] {
        &self.arcs
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn arc_index(&self, sender: NodeId, receiver: NodeId) -> Option<usize> {
        self.arcs.binary_search(&Link::new(sender, receiver)).ok()
    }

    pub fn contains(&self, sender: NodeId, receiver: NodeId) -> bool {
        self.arc_index(sender, receiver).is_some()
    }

    pub fn out_arcs(&self, v: NodeId) -> &[u32] {
        &self.out[v.index()]
    }

    pub fn in_arcs(&self, v: NodeId) -> &[u32] {
        &self.inc[v.index()]
    }
}

/// One vertex of the extended relative collision graph: sending over
/// `sender -> receiver` on `channel`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransmissionCandidate {
    pub sender: NodeId,
    pub receiver: NodeId,
    pub channel: Channel,
}

impl TransmissionCandidate {
    pub fn new(sender: NodeId, receiver: NodeId, channel: Channel) -> Self {
        TransmissionCandidate {
            sender,
            receiver,
            channel,
        }
    }

    pub fn link(&self) -> Link {
        Link::new(self.sender, self.receiver)
    }
}

/// How two links interfere when used in the same slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConflictKind {
    /// Shared sender, shared receiver, or one's sender is the other's
    /// receiver. Collides on every channel pair.
    Always,
    /// A receiver overhears the other sender. Collides only on equal channels.
    SameChannel,
    None,
}

/// Classifies the interference between two links from raw adjacency.
pub fn link_conflict(w: &Wsn, a: Link, b: Link) -> ConflictKind {
    if a.sender == b.sender
        || a.receiver == b.receiver
        || a.sender == b.receiver
        || a.receiver == b.sender
    {
        ConflictKind::Always
    } else if w.adjacent(a.receiver, b.sender) || w.adjacent(b.receiver, a.sender) {
        ConflictKind::SameChannel
    } else {
        ConflictKind::None
    }
}

/// Whether scheduling both candidates in one slot causes a data collision.
pub fn collides(c1: &TransmissionCandidate, c2: &TransmissionCandidate, w: &Wsn) -> bool {
    match link_conflict(w, c1.link(), c2.link()) {
        ConflictKind::Always => true,
        ConflictKind::SameChannel => c1.channel == c2.channel,
        ConflictKind::None => false,
    }
}

/// Conflict graph over every (arc, channel) pair.
///
/// Candidates are indexed `arc * channels + (channel - 1)`. Conflicts are
/// stored per arc and expanded over channels on demand; the relation on
/// one channel is the same for every channel.
#[derive(Clone, Debug)]
pub struct ExtendedCollisionGraph {
    arcs: Vec<Link>,
    channels: u32,
    // sorted by arc index, never contains the arc itself
    conflicts: Vec<Vec<(u32, ConflictKind)>>,
}

pub fn build_extended_collision_graph(
    fg: &ForwardingGraph,
    w: &Wsn,
    channels: u32,
) -> ExtendedCollisionGraph {
    assert!(channels >= 1, "at least one channel is required");
    let mut conflicts = Vec::with_capacity(fg.len());
    let mut seen = vec![u32::MAX; fg.len()];
    for (i, &a) in fg.arcs().iter().enumerate() {
        let mut list = Vec::new();
        // Any interfering arc touches a or has an endpoint next to it.
        let mut consider = |j: u32| {
            if j as usize != i && seen[j as usize] != i as u32 {
                seen[j as usize] = i as u32;
                let kind = link_conflict(w, a, fg.arcs()[j as usize]);
                if kind != ConflictKind::None {
                    list.push((j, kind));
                }
            }
        };
        for v in [a.sender, a.receiver] {
            fg.out_arcs(v).iter().chain(fg.in_arcs(v)).for_each(|&j| consider(j));
        }
        for &n in w.neighbors(a.receiver) {
            fg.out_arcs(n).iter().for_each(|&j| consider(j));
        }
        for &n in w.neighbors(a.sender) {
            fg.in_arcs(n).iter().for_each(|&j| consider(j));
        }
        list.sort_unstable_by_key(|&(j, _)| j);
        conflicts.push(list);
    }
    ExtendedCollisionGraph {
        arcs: fg.arcs().to_vec(),
        channels,
        conflicts,
    }
}

impl ExtendedCollisionGraph {
    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn arcs(&self) -> &[Link] {
        &self.arcs
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn len(&self) -> usize {
        self.arcs.len() * self.channels as usize
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn candidate(&self, idx: usize) -> TransmissionCandidate {
        let link = self.arcs[idx / self.channels as usize];
        TransmissionCandidate::new(
            link.sender,
            link.receiver,
            (idx % self.channels as usize) as Channel + 1,
        )
    }

    pub fn candidates(&self) -> impl Iterator<Item = TransmissionCandidate> + '_ {
        (0..self.len()).map(|i| self.candidate(i))
    }

    pub fn index_of(&self, c: &TransmissionCandidate) -> Option<usize> {
        if c.channel == 0 || c.channel > self.channels {
            return None;
        }
        let arc = self.arcs.binary_search(&c.link()).ok()?;
        Some(arc * self.channels as usize + (c.channel - 1) as usize)
    }

    pub fn arc_index(&self, link: Link) -> Option<usize> {
        self.arcs.binary_search(&link).ok()
    }

    /// Per-arc interference list; see [`ConflictKind`].
    pub fn arc_conflicts(&self, arc: usize) -> &[(u32, ConflictKind)] {
        &self.conflicts[arc]
    }

    pub fn conflicts(&self, i: usize, j: usize) -> bool {
        let ch = self.channels as usize;
        let (ai, aj) = (i / ch, j / ch);
        if i == j {
            return false;
        }
        if ai == aj {
            return true;
        }
        match self.conflicts[ai].binary_search_by_key(&(aj as u32), |&(k, _)| k) {
            Ok(p) => match self.conflicts[ai][p].1 {
                ConflictKind::Always => true,
                ConflictKind::SameChannel => i % ch == j % ch,
                ConflictKind::None => false,
            },
            Err(_) => false,
        }
    }

    /// Candidates adjacent to `idx` in the conflict graph.
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let ch = self.channels as usize;
        let (arc, off) = (idx / ch, idx % ch);
        let same_arc = (0..ch).filter(move |&o| o != off).map(move |o| arc * ch + o);
        let others = self.conflicts[arc].iter().flat_map(move |&(j, kind)| {
            let base = j as usize * ch;
            let range = match kind {
                ConflictKind::Always => 0..ch,
                _ => off..off + 1,
            };
            range.map(move |o| base + o)
        });
        same_arc.chain(others)
    }

    pub fn conflict_count(&self) -> usize {
        (0..self.len()).map(|i| self.neighbors(i).count()).sum::<usize>() / 2
    }

    /// Text listing: one `candidate <sender> <receiver> <channel>` line per
    /// candidate in index order, then `conflict <i> <j>` with `i < j`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for c in self.candidates() {
            let _ = writeln!(out, "candidate {} {} {}", c.sender, c.receiver, c.channel);
        }
        for i in 0..self.len() {
            let mut ns: Vec<usize> = self.neighbors(i).filter(|&j| j > i).collect();
            ns.sort_unstable();
            for j in ns {
                let _ = writeln!(out, "conflict {i} {j}");
            }
        }
        out
    }
}

/// Units of raw data each node currently has to forward.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhiLedger {
    phi: Vec<u32>,
    alpha: u32,
}

impl PhiLedger {
    pub fn new(phi: Vec<u32>, alpha: u32) -> Self {
        assert!(alpha >= 1, "aggregation ratio must be at least 1");
        PhiLedger { phi, alpha }
    }

    /// Initial ledger: every node holds what it generates.
    pub fn from_wsn(w: &Wsn, alpha: u32) -> Self {
        Self::new(w.rho_all().to_vec(), alpha)
    }

    pub fn alpha(&self) -> u32 {
        self.alpha
    }

    pub fn phi(&self, v: NodeId) -> u32 {
        self.phi[v.index()]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.phi
    }

    pub fn delta(&self, v: NodeId) -> u32 {
        delta(self.phi(v), self.alpha)
    }

    /// Moves `gamma` units from `from` to `to`.
    pub fn transfer(&mut self, from: NodeId, to: NodeId, gamma: u32) {
        let src = &mut self.phi[from.index()];
        *src = src
            .checked_sub(gamma)
            .unwrap_or_else(|| panic!("node {from} forwards {gamma} units but holds {src}"));
        self.phi[to.index()] += gamma;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CandidateWeights {
    /// `delta(sender) * hop(sender)`
    pub omega: u64,
    /// Room left in the receiver's last packet.
    pub eta: u32,
}

/// Computes omega and eta from the current ledger. A sink receiver has eta 0.
pub fn weights(c: &TransmissionCandidate, ledger: &PhiLedger, hops: &HopMap) -> CandidateWeights {
    link_weights(c.sender, c.receiver, ledger.as_slice(), ledger.alpha(), hops)
}

#[inline]
pub(crate) fn link_weights(
    sender: NodeId,
    receiver: NodeId,
    phi: &[u32],
    alpha: u32,
    hops: &HopMap,
) -> CandidateWeights {
    let omega = u64::from(delta(phi[sender.index()], alpha)) * u64::from(hops.hop(sender));
    let eta = if hops.hop(receiver) == 0 {
        0
    } else {
        let p = phi[receiver.index()];
        alpha * delta(p, alpha) - p
    };
    CandidateWeights { omega, eta }
}

/// Sort key realizing the precedence order: a greater key has higher
/// precedence. Compares omega, then eta, then the smaller channel, then
/// `(id(sender), id(receiver))` with larger ids winning.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Precedence {
    pub omega: u64,
    pub eta: u32,
    pub channel: Channel,
    pub sender: NodeId,
    pub receiver: NodeId,
}

impl Precedence {
    pub fn new(c: &TransmissionCandidate, w: CandidateWeights) -> Self {
        Precedence {
            omega: w.omega,
            eta: w.eta,
            channel: c.channel,
            sender: c.sender,
            receiver: c.receiver,
        }
    }

    pub fn candidate(&self) -> TransmissionCandidate {
        TransmissionCandidate::new(self.sender, self.receiver, self.channel)
    }
}

impl Ord for Precedence {
    fn cmp(&self, other: &Self) -> Ordering {
        self.omega
            .cmp(&other.omega)
            .then(self.eta.cmp(&other.eta))
            .then(other.channel.cmp(&self.channel))
            .then(self.sender.cmp(&other.sender))
            .then(self.receiver.cmp(&other.receiver))
    }
}

impl PartialOrd for Precedence {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn precedence_higher(a: &Precedence, b: &Precedence) -> bool {
    a > b
}
