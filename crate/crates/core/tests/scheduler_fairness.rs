use proptest::prelude::*;

use qaat_core::sim::scheduler::Scheduler;
use qaat_core::sim::{derive_rng, Channel, SchedulePolicy};

fn policy(k: u8) -> SchedulePolicy {
    match k % 4 {
        0 => SchedulePolicy::Random,
        1 => SchedulePolicy::Fifo,
        2 => SchedulePolicy::Lifo,
        _ => SchedulePolicy::Delay { kinds: Vec::new(), from: vec![0], to: Vec::new() },
    }
}

/// Per-envelope bookkeeping, indexed by the id written into the payload.
#[derive(Default)]
struct Tracker {
    bound: Vec<u64>,
    sent_at: Vec<u64>,
    seen: Vec<bool>,
    delivered: u64,
}

impl Tracker {
    fn send(&mut self, s: &mut Scheduler, fairness: u64) {
        let i = self.bound.len() as u32;
        self.bound.push(fairness + s.len() as u64);
        self.sent_at.push(self.delivered);
        self.seen.push(false);
        let mut bytes = vec![2];
        bytes.extend_from_slice(&i.to_be_bytes());
        s.enqueue(Channel::Send, i % 3, 1, bytes, 0);
    }

    fn take(&mut self, s: &mut Scheduler) -> Result<(), TestCaseError> {
        if let Some(e) = s.next() {
            let i = u32::from_be_bytes(e.bytes[1..5].try_into().unwrap()) as usize;
            prop_assert!(!self.seen[i]);
            self.seen[i] = true;
            let waited = self.delivered - self.sent_at[i];
            prop_assert!(waited <= self.bound[i], "envelope {} waited {} > {}", i, waited, self.bound[i]);
            self.delivered += 1;
        }
        Ok(())
    }
}

proptest! {
    /// Every envelope is delivered, and none waits longer than the fairness
    /// bound plus the number of envelopes pending when it was sent.
    #[test]
    fn waits_are_bounded(k in 0u8..4, fairness in 1u64..20, script in proptest::collection::vec((0u8..4, any::<bool>()), 1..200), seed in any::<u64>()) {
        let mut s = Scheduler::new(policy(k), fairness, derive_rng(seed, "tests/sched", 0));
        let mut t = Tracker::default();
        for (burst, deliver) in script {
            for _ in 0..burst {
                t.send(&mut s, fairness);
            }
            if deliver {
                t.take(&mut s)?;
            }
        }
        while !s.is_empty() {
            t.take(&mut s)?;
        }
        prop_assert!(t.seen.iter().all(|&x| x));
    }
}
