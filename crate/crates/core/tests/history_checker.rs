use qaat_core::history::{
    brute_force_sequencer, build_mock_history, build_partial_order, check_at_sequence, check_history, GlobalHistory, HistoryError,
    Node,
};
use qaat_core::sim::{run, EventKind, ResultRecord, RoleRecord, Scenario, TauRecord};

fn tau(snd: u32, v: u64, rcv: u32, sn: u64) -> Node {
    Node::Transfer(TauRecord { snd, v, rcv, sn })
}

#[test]
fn sequence_replay_checks_funding_and_reads() {
    let initial = [5, 0];
    assert!(check_at_sequence(&initial, &[tau(0, 3, 1, 1), Node::Balance { pid: 1, index: 0, value: 3 }]).is_ok());
    let overdraft = check_at_sequence(&initial, &[tau(0, 3, 1, 1), tau(0, 3, 1, 2)]).unwrap_err();
    assert_eq!(overdraft.position, 1);
    let stale = check_at_sequence(&initial, &[Node::Balance { pid: 1, index: 0, value: 3 }, tau(0, 3, 1, 1)]).unwrap_err();
    assert_eq!(stale.position, 0);
    // A null transfer moves nothing but still needs the funds.
    assert!(check_at_sequence(&initial, &[tau(0, 5, 0, 1), Node::Balance { pid: 0, index: 0, value: 5 }]).is_ok());
    assert!(check_at_sequence(&initial, &[tau(0, 6, 0, 1)]).is_err());
}

fn history(seed: u64) -> (Scenario, GlobalHistory) {
    let s = Scenario::new(1, vec![6, 2, 0, 0], seed).transfer(0, 0, 1, 4).balance(0, 1).transfer(30, 1, 2, 5).balance(400, 2);
    let out = run(&s).unwrap();
    (s, GlobalHistory::from_run(&out))
}

#[test]
fn constructive_and_brute_force_agree_on_small_runs() {
    for seed in 0..20 {
        let (_, h) = history(seed);
        let verdict = check_history(&h);
        assert!(verdict.passed, "seed {seed}: {verdict:?}");
        let mock = build_mock_history(&h).unwrap();
        for p in 0..4 {
            let order = build_partial_order(&h, &mock, p);
            let sorted = order.topological_sort().unwrap();
            let seq: Vec<Node> = sorted.iter().map(|&k| order.nodes[k].clone()).collect();
            assert!(check_at_sequence(&h.initial, &seq).is_ok());
            for (a, b) in sorted.iter().zip(sorted.iter().skip(1)) {
                assert!(!order.precedes(&order.nodes[*b], &order.nodes[*a]));
            }
            assert!(brute_force_sequencer(&h.initial, &order).unwrap().is_some());
        }
    }
}

#[test]
fn forged_balance_result_is_caught() {
    let (_, mut h) = history(1);
    let read = h.local[2].iter_mut().find(|i| matches!(i.result, Some(ResultRecord::Balance(_)))).unwrap();
    let Some(ResultRecord::Balance(v)) = read.result else { unreachable!() };
    read.result = Some(ResultRecord::Balance(v + 1));
    let verdict = check_history(&h);
    assert!(!verdict.passed);
    assert!(verdict.processes.iter().any(|p| p.process == 2 && p.violation.is_some()));
}

#[test]
fn credit_without_debit_fails_loudly() {
    let s = Scenario::new(1, vec![6, 0, 0, 0], 3).transfer(0, 0, 1, 4);
    let out = run(&s).unwrap();
    let events: Vec<_> = out
        .events
        .into_iter()
        .filter(|e| !matches!(&e.kind, EventKind::Installed { update, .. } if update.role == RoleRecord::Sending))
        .collect();
    let h = GlobalHistory::from_events(out.n, out.byzantine, out.initial_balances, &events);
    let verdict = check_history(&h);
    assert!(!verdict.passed);
    assert!(matches!(verdict.error, Some(HistoryError::MissingSendingUpdate { .. })), "{verdict:?}");
}

#[test]
fn brute_force_refuses_large_ground_sets() {
    let s = (0..5).fold(Scenario::new(1, vec![20; 4], 0), |s, k| s.transfer(0, 0, 1, 1).balance(k, 0));
    let out = run(&s).unwrap();
    let h = GlobalHistory::from_run(&out);
    let mock = build_mock_history(&h).unwrap();
    let order = build_partial_order(&h, &mock, 0);
    assert!(matches!(brute_force_sequencer(&h.initial, &order), Err(HistoryError::TooLarge { size: 10 })));
}
