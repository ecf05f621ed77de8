//! Pending envelopes and the adversarial-but-fair delivery order.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand_chacha::ChaCha20Rng;
use rand_core::Rng;

use super::scenario::SchedulePolicy;
use super::trace::Channel;
use crate::wire::MsgKind;
use crate::ProcessId;

#[derive(Debug, Clone)]
pub struct Envelope {
    pub id: u64,
    pub channel: Channel,
    pub src: ProcessId,
    pub dst: ProcessId,
    pub bytes: Vec<u8>,
    pub enqueue_step: u64,
    /// Network-wide delivery count at enqueue time.
    pub enqueue_deliveries: u64,
}

impl Envelope {
    pub fn kind(&self) -> MsgKind {
        MsgKind::of(&self.bytes)
    }
}

/// Envelopes in flight. An envelope that has watched `fairness` other
/// deliveries go by is overdue; overdue envelopes go first, oldest first.
#[derive(Debug)]
pub struct Scheduler {
    policy: SchedulePolicy,
    fairness: u64,
    rng: ChaCha20Rng,
    pending: BTreeMap<u64, Envelope>,
    next_id: u64,
    deliveries: u64,
    max_wait: u64,
}

impl Scheduler {
    pub fn new(policy: SchedulePolicy, fairness: u64, rng: ChaCha20Rng) -> Self {
        Scheduler { policy, fairness, rng, pending: BTreeMap::new(), next_id: 0, deliveries: 0, max_wait: 0 }
    }

    pub fn enqueue(&mut self, channel: Channel, src: ProcessId, dst: ProcessId, bytes: Vec<u8>, step: u64) {
        let id = self.next_id;
        self.next_id += 1;
        let e = Envelope { id, channel, src, dst, bytes, enqueue_step: step, enqueue_deliveries: self.deliveries };
        self.pending.insert(id, e);
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn deliveries(&self) -> u64 {
        self.deliveries
    }

    /// Most deliveries any delivered envelope had to wait through.
    pub fn max_wait(&self) -> u64 {
        self.max_wait
    }

    fn delayed(&self, e: &Envelope) -> bool {
        match &self.policy {
            SchedulePolicy::Delay { kinds, from, to } => {
                (kinds.is_empty() || kinds.contains(&e.kind()))
                    && (from.is_empty() || from.contains(&e.src))
                    && (to.is_empty() || to.contains(&e.dst))
            }
            _ => false,
        }
    }

    pub fn next(&mut self) -> Option<Envelope> {
        let (&oldest, first) = self.pending.iter().next()?;
        let id = if self.deliveries - first.enqueue_deliveries >= self.fairness {
            oldest
        } else {
            match &self.policy {
                SchedulePolicy::Fifo => oldest,
                SchedulePolicy::Lifo => *self.pending.keys().next_back().expect("non-empty"),
                SchedulePolicy::Random => self.random_pick(),
                SchedulePolicy::Delay { .. } => {
                    let ids: Vec<u64> = self.pending.values().filter(|e| !self.delayed(e)).map(|e| e.id).collect();
                    if ids.is_empty() {
                        oldest
                    } else {
                        ids[self.rng.next_u64() as usize % ids.len()]
                    }
                }
            }
        };
        let e = self.pending.remove(&id).expect("picked from pending");
        self.max_wait = self.max_wait.max(self.deliveries - e.enqueue_deliveries);
        self.deliveries += 1;
        Some(e)
    }

    fn random_pick(&mut self) -> u64 {
        let idx = (self.rng.next_u64() % self.pending.len() as u64) as usize;
        *self.pending.keys().nth(idx).expect("index below length")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_core::SeedableRng;

    fn fill(s: &mut Scheduler, k: u8) {
        for i in 0..k {
            s.enqueue(Channel::Send, 0, 1, alloc::vec![2, i], 0);
        }
    }

    #[test]
    fn fifo_and_lifo_orders() {
        let mut s = Scheduler::new(SchedulePolicy::Fifo, 100, ChaCha20Rng::seed_from_u64(0));
        fill(&mut s, 3);
        let order: Vec<u8> = core::iter::from_fn(|| s.next()).map(|e| e.bytes[1]).collect();
        assert_eq!(order, [0, 1, 2]);
        let mut s = Scheduler::new(SchedulePolicy::Lifo, 100, ChaCha20Rng::seed_from_u64(0));
        fill(&mut s, 3);
        let order: Vec<u8> = core::iter::from_fn(|| s.next()).map(|e| e.bytes[1]).collect();
        assert_eq!(order, [2, 1, 0]);
    }

    #[test]
    fn overdue_envelope_preempts_lifo() {
        let mut s = Scheduler::new(SchedulePolicy::Lifo, 2, ChaCha20Rng::seed_from_u64(0));
        s.enqueue(Channel::Send, 0, 1, alloc::vec![9], 0);
        let mut got = Vec::new();
        for i in 0..5u8 {
            s.enqueue(Channel::Send, 0, 1, alloc::vec![i], 0);
            got.push(s.next().unwrap().bytes[0]);
        }
        assert!(got[..3].contains(&9));
        assert!(s.max_wait() <= 2);
    }

    #[test]
    fn delay_policy_holds_matching_kinds() {
        let policy = SchedulePolicy::Delay { kinds: alloc::vec![MsgKind::QuorumSig], from: Vec::new(), to: Vec::new() };
        let mut s = Scheduler::new(policy, 1000, ChaCha20Rng::seed_from_u64(1));
        s.enqueue(Channel::Send, 0, 1, alloc::vec![2], 0);
        s.enqueue(Channel::Send, 0, 1, alloc::vec![1], 0);
        s.enqueue(Channel::Send, 0, 1, alloc::vec![3], 0);
        let kinds: Vec<u8> = core::iter::from_fn(|| s.next()).map(|e| e.bytes[0]).collect();
        assert_eq!(kinds[2], 2);
    }
}
