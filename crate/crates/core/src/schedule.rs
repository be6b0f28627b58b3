//! Slot-indexed transmission schedules and their text form.
//!
//! One line per entry: `slot <k>: <sender> -> <receiver> gamma=<g> ch=<c>`.

use std::fmt;
use std::str::FromStr;

use crate::collision::Channel;
use crate::wsn::NodeId;

/// One unit-size packet carrying `gamma` units over `sender -> receiver`
/// on `channel` in slot `slot` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScheduleEntry {
    pub slot: u32,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub gamma: u32,
    pub channel: Channel,
}

impl fmt::Display for ScheduleEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "slot {}: {} -> {} gamma={} ch={}",
            self.slot, self.sender, self.receiver, self.gamma, self.channel
        )
    }
}

/// Sequence of per-slot transmission sets. `slots[0]` is slot 1.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schedule {
    slots: Vec<Vec<ScheduleEntry>>,
}

impl Schedule {
    pub fn new() -> Self {
        Self::default()
    }

    /// Groups entries by their slot field. Within a slot entries are kept
    /// in canonical `(sender, receiver, channel)` order.
    pub fn from_entries(entries: impl IntoIterator<Item = ScheduleEntry>) -> Self {
        let mut s = Schedule::new();
        for e in entries {
            s.insert(e);
        }
        s.canonicalize();
        s
    }

    fn insert(&mut self, e: ScheduleEntry) {
        assert!(e.slot >= 1, "slots are numbered from 1");
        let k = e.slot as usize;
        if self.slots.len() < k {
            self.slots.resize_with(k, Vec::new);
        }
        self.slots[k - 1].push(e);
    }

    fn canonicalize(&mut self) {
        for slot in &mut self.slots {
            slot.sort_by_key(|e| (e.sender, e.receiver, e.channel, e.gamma));
        }
    }

    /// Appends a slot after the current last one and returns its number.
    pub fn push_slot(&mut self, mut entries: Vec<ScheduleEntry>) -> u32 {
        let k = self.slots.len() as u32 + 1;
        for e in &mut entries {
            e.slot = k;
        }
        entries.sort_by_key(|e| (e.sender, e.receiver, e.channel, e.gamma));
        self.slots.push(entries);
        k
    }

    /// Slot `k` (1-based); empty for slots past the end.
    pub fn slot(&self, k: u32) -> &[ScheduleEntry] {
        k.checked_sub(1)
            .and_then(|i| self.slots.get(i as usize))
            .map_or(&[], Vec::as_slice)
    }

    pub fn slots(&self) -> impl Iterator<Item = &[ScheduleEntry]> {
        self.slots.iter().map(Vec::as_slice)
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Index of the last non-empty slot.
    pub fn slots_used(&self) -> u32 {
        self.slots
            .iter()
            .rposition(|s| !s.is_empty())
            .map_or(0, |i| i as u32 + 1)
    }

    pub fn entries(&self) -> impl Iterator<Item = &ScheduleEntry> {
        self.slots.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.slots.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in self.entries() {
            writeln!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("schedule line {line}: {msg}")]
pub struct ScheduleParseError {
    pub line: usize,
    pub msg: String,
}

impl FromStr for Schedule {
    type Err = ScheduleParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut entries = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            entries.push(parse_entry(line).ok_or_else(|| ScheduleParseError {
                line: i + 1,
                msg: format!("expected `slot <k>: <u> -> <v> gamma=<g> ch=<c>`, got `{line}`"),
            })?);
        }
        Ok(Schedule::from_entries(entries))
    }
}

fn parse_entry(line: &str) -> Option<ScheduleEntry> {
    let rest = line.strip_prefix("slot")?;
    let (slot, rest) = rest.split_once(':')?;
    let tok: Vec<&str> = rest.split_whitespace().collect();
    if tok.len() != 5 || tok[1] != "->" {
        return None;
    }
    let slot: u32 = slot.trim().parse().ok()?;
    if slot == 0 {
        return None;
    }
    Some(ScheduleEntry {
        slot,
        sender: NodeId(tok[0].parse().ok()?),
        receiver: NodeId(tok[2].parse().ok()?),
        gamma: tok[3].strip_prefix("gamma=")?.parse().ok()?,
        channel: tok[4].strip_prefix("ch=")?.parse().ok()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn text_form() {
        let s: Schedule = "slot 2: 5 -> 1 gamma=1 ch=1\nslot 1: 3 -> 2 gamma=3 ch=1\n".parse().unwrap();
        assert_eq!(s.slots_used(), 2);
        assert_eq!(s.to_string(), "slot 1: 3 -> 2 gamma=3 ch=1\nslot 2: 5 -> 1 gamma=1 ch=1\n");
    }

    #[test]
    fn trailing_empty_slots_not_counted() {
        let mut s = Schedule::new();
        s.push_slot(vec![]);
        s.push_slot(vec![ScheduleEntry { slot: 0, sender: NodeId(1), receiver: NodeId(0), gamma: 1, channel: 1 }]);
        s.push_slot(vec![]);
        assert_eq!(s.slot_count(), 3);
        assert_eq!(s.slots_used(), 2);
        assert_eq!(s.slot(2)[0].slot, 2);
        assert!(s.slot(9).is_empty());
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["slot 0: 1 -> 0 gamma=1 ch=1", "slot 1 1 -> 0 gamma=1 ch=1", "slot 1: 1 0 gamma=1 ch=1", "slot 1: 1 -> 0 g=1 ch=1"] {
            assert!(bad.parse::<Schedule>().is_err(), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn text_round_trip(raw in prop::collection::vec((1u32..12, 0u32..20, 0u32..20, 0u32..9, 0u32..5), 0..40)) {
            let s = Schedule::from_entries(raw.into_iter().map(|(slot, a, b, gamma, channel)| ScheduleEntry {
                slot, sender: NodeId(a), receiver: NodeId(b), gamma, channel,
            }));
            let back: Schedule = s.to_string().parse().unwrap();
            prop_assert_eq!(back.to_string(), s.to_string());
            prop_assert_eq!(back.len(), s.len());
        }
    }
}
