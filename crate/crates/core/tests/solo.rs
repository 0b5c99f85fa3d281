//! Sequential end-to-end runs of the whole stack over the in-process
//! substrate: splitter -> grafarius -> consensus -> both universal
//! constructions, including recycling behavior across epochs.

use ofuc_core::consensus::{decided, propose, ConsensusId};
use ofuc_core::serial::{Cas, FifoQueue, OpCall, Serial};
use ofuc_core::shm::{block_on, SoloShm};
use ofuc_core::universal::{
    invoke_buniv, invoke_runiv, recycle, Budget, BunivLocal, RunivLocal, UnivId,
};
use ofuc_core::value::V;

#[test]
fn consensus_chain_of_processes() {
    let shm = SoloShm::new();
    let c = ConsensusId("chain".into());
    block_on(async {
        assert_eq!(decided(&shm, &c).await, V::None);
        let first = propose(&shm, &c, &V::Nat(10), 4).await.unwrap();
        assert_eq!(first, V::Nat(10));
        for pid in 1..6 {
            let p = shm.as_pid(pid);
            let got = propose(&p, &c, &V::Nat(100 + u64::from(pid)), 4).await.unwrap();
            assert_eq!(got, V::Nat(10), "every later proposer adopts the decision");
        }
        assert_eq!(decided(&shm, &c).await, V::Nat(10));
    });
}

#[test]
fn runiv_queue_object_sequential() {
    let shm = SoloShm::new();
    let u = UnivId("u".into());
    let q = FifoQueue;
    block_on(async {
        let mut p0 = RunivLocal::default();
        let mut p1 = RunivLocal::default();
        let shm1 = shm.as_pid(1);
        let b = Budget::default();
        invoke_runiv(&shm, &u, &q, &mut p0, &OpCall::new("enq", V::Nat(1)), b).await.unwrap();
        invoke_runiv(&shm1, &u, &q, &mut p1, &OpCall::new("enq", V::Nat(2)), b).await.unwrap();
        let d1 = invoke_runiv(&shm, &u, &q, &mut p0, &OpCall::new("deq", V::None), b).await.unwrap();
        let d2 = invoke_runiv(&shm1, &u, &q, &mut p1, &OpCall::new("deq", V::None), b).await.unwrap();
        let d3 = invoke_runiv(&shm, &u, &q, &mut p0, &OpCall::new("deq", V::None), b).await.unwrap();
        assert_eq!((d1, d2, d3), (V::Nat(1), V::Nat(2), V::None));
    });
}

#[test]
fn buniv_interleaved_processes_share_state() {
    let shm = SoloShm::new();
    let u = UnivId("u".into());
    block_on(async {
        let b = Budget::default();
        let mut locals: Vec<BunivLocal> = (0..3).map(|_| BunivLocal::default()).collect();
        // Round-robin cas chain 0 -> 1 -> 2 -> 0 ... across three processes.
        let mut state = 0u64;
        for round in 0..9 {
            let pid = round % 3;
            let p = shm.as_pid(pid as u32);
            let next = (state + 1) % 3;
            let op = OpCall::new("cas", V::List(vec![V::Nat(state), V::Nat(next)]));
            let got = invoke_buniv(&p, &u, &Cas, &mut locals[pid], &op, b).await.unwrap();
            assert_eq!(got, V::Bool(true), "round {round}");
            state = next;
        }
        let got = invoke_buniv(&shm, &u, &Cas, &mut locals[0], &OpCall::new("read", V::None), b)
            .await
            .unwrap();
        assert_eq!(got, V::Nat(state));
    });
    // Three processes keep at most four pool instances alive.
    let pool: std::collections::BTreeSet<String> = shm
        .register_names()
        .iter()
        .filter_map(|n| n.strip_prefix("u:cons:"))
        .filter_map(|rest| rest.split(':').next())
        .map(str::to_string)
        .collect();
    assert!(pool.len() <= 4, "pool {pool:?}");
}

#[test]
fn recycled_consensus_rounds_are_independent() {
    let shm = SoloShm::new();
    let c = ConsensusId("r".into());
    block_on(async {
        for epoch in 1..=5u64 {
            let h = recycle(&shm, epoch);
            let got = propose(&h, &c, &V::Nat(epoch * 10), 4).await.unwrap();
            assert_eq!(got, V::Nat(epoch * 10), "each epoch decides afresh");
            // Within the epoch the decision is sticky.
            let h2 = recycle(&shm.as_pid(1), epoch);
            assert_eq!(propose(&h2, &c, &V::Nat(999), 4).await.unwrap(), V::Nat(epoch * 10));
        }
    });
    // Recycling reuses the same registers; the register count must not grow
    // with the number of epochs.
    let regs = shm.register_count();
    assert!(regs < 20, "register reuse failed: {regs} registers");
}

#[test]
fn serial_tau_totality_on_builtins() {
    for name in ofuc_core::serial::BUILTIN_NAMES {
        let ser = ofuc_core::serial::builtin(name).unwrap();
        let init = ser.init();
        // Applying a read-like op must not change state for these builtins.
        let probe = match *name {
            "queue" => OpCall::new("deq", V::None),
            _ => OpCall::new("read", V::None),
        };
        let (next, _) = ser.apply(&init, &probe);
        if *name != "queue" {
            assert_eq!(next, init, "{name}: read must be trivial");
        }
    }
}
