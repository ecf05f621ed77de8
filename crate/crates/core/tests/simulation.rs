use num_bigint::BigUint;

use qaat_core::history::{check_history, GlobalHistory};
use qaat_core::sim::{run, run_with, ByzScript, EventKind, Outcome, RoleRecord, RunOptions, Scenario, SchedulePolicy};

fn demo(seed: u64) -> Scenario {
    Scenario::new(1, vec![10, 10, 10, 10], seed).transfer(0, 0, 1, 3).transfer(0, 1, 2, 4).transfer(0, 2, 3, 5).balance(0, 3).balance(200, 3)
}

#[test]
fn same_seed_same_run() {
    let a = run(&demo(5)).unwrap();
    let b = run(&demo(5)).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.events, b.events);
    assert_eq!(a.metrics, b.metrics);
    let c = run(&demo(6)).unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn demo_commits_and_balances_add_up() {
    let out = run(&demo(7)).unwrap();
    assert_eq!(out.outcome, Outcome::Quiescent);
    assert_eq!(out.metrics.committed, 3);
    assert_eq!(out.metrics.credited, 3);
    let bals: Vec<BigUint> = out.states.iter().map(|s| s.bal.clone()).collect();
    let expect: Vec<BigUint> = [7u32, 9, 9, 15].into_iter().map(BigUint::from).collect();
    assert_eq!(bals, expect);
    for (p, s) in out.states.iter().enumerate() {
        s.check_invariants(&out.context, &BigUint::from(out.initial_balances[p])).unwrap();
    }
    assert!(check_history(&GlobalHistory::from_run(&out)).passed);
}

#[test]
fn one_transfer_costs_four_n_plus_one_messages() {
    for n in [4usize, 5, 7, 10] {
        let s = Scenario::new((n - 1) / 3, vec![5; n], 1).transfer(0, 0, 1, 2);
        let out = run_with(&s, RunOptions { record_trace: false, primes: None }).unwrap();
        assert_eq!(out.metrics.messages, 4 * n as u64 + 1, "n = {n}");
    }
}

#[test]
fn overdraft_aborts_without_traffic() {
    let s = Scenario::new(1, vec![3, 0, 0, 0], 2).transfer(0, 0, 1, 4);
    let out = run(&s).unwrap();
    assert_eq!(out.metrics.aborted, 1);
    assert_eq!(out.metrics.messages, 0);
    assert_eq!(out.states[0].sn, 0);
}

#[test]
fn silent_byzantine_does_not_block_correct_transfers() {
    for policy in [SchedulePolicy::Random, SchedulePolicy::Fifo, SchedulePolicy::Lifo] {
        let mut s = Scenario::new(1, vec![10; 4], 3).transfer(0, 0, 1, 1).transfer(0, 1, 2, 1).with_byzantine(3, ByzScript::Silent);
        s.schedule = policy;
        let out = run(&s).unwrap();
        assert_eq!(out.outcome, Outcome::Quiescent);
        assert_eq!(out.metrics.committed, 2);
    }
}

#[test]
fn equivocation_credits_at_most_once() {
    for seed in 0..10 {
        for split in [true, false] {
            let s = Scenario::new(1, vec![10; 4], seed).with_byzantine(
                3,
                ByzScript::Equivocate { at_step: 0, amount: 7, receivers: [0, 1], split, send_transfers: true, sign_all: false },
            );
            let out = run(&s).unwrap();
            let credits = out
                .events
                .iter()
                .filter(|e| matches!(&e.kind, EventKind::Installed { pid, update } if *pid < 3 && update.role == RoleRecord::Receiving))
                .count();
            assert!(credits <= 1, "seed {seed} split {split}: {credits} credits");
            assert!(check_history(&GlobalHistory::from_run(&out)).passed);
        }
    }
}

#[test]
fn disabled_gate_lets_double_spend_through() {
    let mut s = Scenario::new(1, vec![10; 4], 1).with_byzantine(
        3,
        ByzScript::Equivocate { at_step: 0, amount: 7, receivers: [0, 1], split: false, send_transfers: true, sign_all: false },
    );
    s.faults.disable_fifo_gate = true;
    let out = run(&s).unwrap();
    assert_eq!(out.metrics.credited, 2);
    let verdict = check_history(&GlobalHistory::from_run(&out));
    assert!(!verdict.passed);
    assert_eq!(verdict.conflicts, [(3, 1)]);
}

#[test]
fn flood_is_ignored() {
    let s = Scenario::new(1, vec![10; 4], 4).transfer(0, 0, 1, 5).with_byzantine(3, ByzScript::Flood { at_step: 0, count: 30, len: 80 });
    let out = run(&s).unwrap();
    assert_eq!(out.outcome, Outcome::Quiescent);
    assert_eq!(out.metrics.committed, 1);
    assert!(out.halted.is_empty());
}

#[test]
fn invalid_scenarios_are_rejected() {
    assert!(run(&Scenario::new(1, vec![1, 1, 1], 0)).is_err());
    assert!(run(&Scenario::new(0, vec![1, 1], 0).transfer(0, 0, 5, 1)).is_err());
    let mut s = Scenario::new(1, vec![1; 4], 0);
    s.fairness = 0;
    assert!(run(&s).is_err());
}
