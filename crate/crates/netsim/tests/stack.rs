//! The shared-object stack runs unmodified over the quorum-replicated
//! substrate: same algorithm code, message-passing underneath.

use ofuc_netsim::client_fn;
use ofuc_netsim::sim::{NetConfig, Netsim};

use ofuc_core::consensus::{propose, ConsensusId};
use ofuc_core::shm::Shm;
use ofuc_core::serial::{Cas, OpCall};
use ofuc_core::universal::{invoke_buniv, Budget, BunivLocal, UnivId};
use ofuc_core::value::V;

#[test]
fn two_proposers_agree_over_netsim() {
    for seed in 0..20u64 {
        let mk = |val: &'static str, at: u64| {
            client_fn!(move |shm: ofuc_netsim::NetShm| async move {
                shm.sleep_until(at).await;
                let got = propose(&shm, &ConsensusId("c".into()), &V::Str(val.into()), 64).await;
                let got = got.expect("decides");
                assert!(got == V::Str("a".into()) || got == V::Str("b".into()));
                shm.write(&format!("out:{}", shm.pid()), got.encode()).await;
            })
        };
        let clients = vec![mk("a", 0), mk("b", seed % 3_000_000)];
        let mut sim = Netsim::new(NetConfig::new(3, seed), &clients, &[]);
        let report = sim.run();
        assert!(report.all_complete(), "seed {seed}: {report:?}");
        // Agreement: both recorded decisions equal.
        let h = sim.history();
        let outs: Vec<&ofuc_core::Event> =
            h.0.iter().filter(|e| e.obj.starts_with("c") && e.op == "propose" && e.kind == ofuc_core::EventKind::Response).collect();
        assert_eq!(outs.len(), 2);
        assert_eq!(outs[0].res, outs[1].res, "seed {seed}");
    }
}

#[test]
fn bounded_construction_over_netsim_with_crash() {
    let mk = |ops: Vec<OpCall>, at: u64| {
        client_fn!(move |shm: ofuc_netsim::NetShm| {
            let ops = ops.clone();
            async move {
                shm.sleep_until(at).await;
                let u = UnivId("u".into());
                let mut local = BunivLocal::default();
                for op in &ops {
                    let _ = invoke_buniv(&shm, &u, &Cas, &mut local, op, Budget::default()).await;
                }
            }
        })
    };
    let cas = |a: u64, b: u64| OpCall::new("cas", V::List(vec![V::Nat(a), V::Nat(b)]));
    let clients = vec![
        mk(vec![cas(0, 1), cas(1, 2)], 0),
        mk(vec![cas(0, 2), OpCall::new("read", V::None)], 1_000_000),
    ];
    // One crash within the budget for n = 3.
    let mut sim = Netsim::new(NetConfig::new(3, 77), &clients, &[(2_000_000, 1)]);
    let report = sim.run();
    assert!(report.all_complete(), "{report:?}");
}

#[test]
fn netsim_message_kinds_round_trip_under_delay_script() {
    // Scripted delays make the message schedule adversarially lumpy.
    let clients = vec![client_fn!(|shm: ofuc_netsim::NetShm| async move {
        shm.write("k", V::Nat(5).encode()).await;
        let v = shm.read("k").await.expect("written");
        assert_eq!(V::decode(&v), Some(V::Nat(5)));
    })];
    let mut cfg = NetConfig::new(5, 9);
    cfg.scripted_delays = Some(vec![5, 1, 900, 2, 40, 7]);
    let mut sim = Netsim::new(cfg, &clients, &[]);
    assert!(sim.run().all_complete());
}
