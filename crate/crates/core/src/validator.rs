//! Scheduler-agnostic schedule checker.
//!
//! Re-derives every collision clause from raw adjacency and replays the data
//! flow slot by slot. Shares no code with the collision-graph module so the
//! two can be cross-checked against each other.

use std::fmt;

use crate::schedule::{Schedule, ScheduleEntry};
use crate::wsn::{HopMap, NodeId, Wsn};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rule {
    /// A node sends twice in one slot.
    C1,
    /// A node receives twice in one slot.
    C2,
    /// A node sends and receives in one slot.
    C3,
    /// A receiver overhears another sender on its channel.
    C4,
    GammaRange,
    ChannelRange,
    Causality,
    NonDelivery,
    UnknownArc,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::C1 => "C1",
            Rule::C2 => "C2",
            Rule::C3 => "C3",
            Rule::C4 => "C4",
            Rule::GammaRange => "gamma-range",
            Rule::ChannelRange => "channel-range",
            Rule::Causality => "causality",
            Rule::NonDelivery => "non-delivery",
            Rule::UnknownArc => "unknown-arc",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub slot: u32,
    pub rule: Rule,
    pub entries: Vec<ScheduleEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub slots_used: u32,
    /// Units that reached the sink.
    pub delivered: u64,
    /// Units generated by the network.
    pub expected: u64,
}

impl ValidationReport {
    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    /// Machine-readable form: one `violation <slot> <rule> <entries...>`
    /// line per violation, entries written as `<u>-><v>:<gamma>:<ch>`.
    pub fn violation_lines(&self) -> String {
        let mut out = String::new();
        for v in &self.violations {
            out.push_str(&format!("violation {} {}", v.slot, v.rule));
            for e in &v.entries {
                out.push_str(&format!(" {}->{}:{}:{}", e.sender, e.receiver, e.gamma, e.channel));
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{}: {} slot(s), delivered {}/{} units, {} violation(s)",
            if self.ok { "valid" } else { "INVALID" },
            self.slots_used,
            self.delivered,
            self.expected,
            self.violations.len()
        )?;
        f.write_str(&self.violation_lines())
    }
}

/// Collision clauses violated by two transmissions sharing a slot. Ids
/// outside the network only take part in the identity clauses.
pub fn pair_rules(w: &Wsn, a: &ScheduleEntry, b: &ScheduleEntry) -> Vec<Rule> {
    let n = w.len();
    let known = |v: NodeId| v.index() < n;
    let mut out = Vec::new();
    if a.sender == b.sender {
        out.push(Rule::C1);
    }
    if a.receiver == b.receiver {
        out.push(Rule::C2);
    }
    if a.sender == b.receiver || a.receiver == b.sender {
        out.push(Rule::C3);
    }
    if a.channel == b.channel
        && [a.sender, a.receiver, b.sender, b.receiver].into_iter().all(known)
        && (w.adjacent(a.receiver, b.sender) || w.adjacent(b.receiver, a.sender))
    {
        out.push(Rule::C4);
    }
    out
}

pub fn validate(w: &Wsn, hops: &HopMap, alpha: u32, channels: u32, s: &Schedule) -> ValidationReport {
    let n = w.len();
    let known = |v: NodeId| v.index() < n;
    let is_arc = |e: &ScheduleEntry| {
        known(e.sender)
            && known(e.receiver)
            && w.adjacent(e.sender, e.receiver)
            && hops.hop(e.sender) > hops.hop(e.receiver)
    };

    let mut phi: Vec<u64> = w.rho_all().iter().map(|&r| u64::from(r)).collect();
    let mut violations = Vec::new();

    for (k, slot) in s.slots().enumerate() {
        let k = k as u32 + 1;
        let mut flag = |rule, entries: Vec<ScheduleEntry>| {
            violations.push(Violation { slot: k, rule, entries })
        };

        for e in slot {
            if !is_arc(e) {
                flag(Rule::UnknownArc, vec![*e]);
            }
            if e.gamma == 0 || e.gamma > alpha {
                flag(Rule::GammaRange, vec![*e]);
            }
            if e.channel == 0 || e.channel > channels {
                flag(Rule::ChannelRange, vec![*e]);
            }
        }

        for (i, a) in slot.iter().enumerate() {
            for b in &slot[i + 1..] {
                for rule in pair_rules(w, a, b) {
                    flag(rule, vec![*a, *b]);
                }
            }
        }

        // data received in this slot is only forwardable from the next one
        let start = phi.clone();
        let mut senders: Vec<NodeId> = slot.iter().filter(|e| is_arc(e)).map(|e| e.sender).collect();
        senders.sort_unstable();
        senders.dedup();
        for u in senders {
            let mine: Vec<ScheduleEntry> = slot.iter().filter(|e| e.sender == u && is_arc(e)).copied().collect();
            let total: u64 = mine.iter().map(|e| u64::from(e.gamma)).sum();
            if total > start[u.index()] {
                flag(Rule::Causality, mine);
            }
        }
        let mut budget = start;
        for e in slot.iter().filter(|e| is_arc(e)) {
            let moved = u64::from(e.gamma).min(budget[e.sender.index()]);
            budget[e.sender.index()] -= moved;
            phi[e.sender.index()] -= moved;
            phi[e.receiver.index()] += moved;
        }
    }

    let slots_used = s.slots_used();
    let delivered = if n > 0 { phi[w.sink().index()] } else { 0 };
    let expected = w.total_rho();
    if delivered != expected {
        violations.push(Violation {
            slot: slots_used,
            rule: Rule::NonDelivery,
            entries: Vec::new(),
        });
    }
    ValidationReport {
        ok: violations.is_empty(),
        violations,
        slots_used,
        delivered,
        expected,
    }
}
