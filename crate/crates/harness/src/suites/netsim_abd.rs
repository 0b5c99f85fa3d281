//! Netsim suites: quorum-register linearizability and liveness over seeded
//! schedules with crash injection, the consensus stack running unmodified
//! over the message-passing substrate, and the convoy latency model.

use ofuc_core::consensus::{propose, ConsensusId};
use ofuc_core::record::level;
use ofuc_core::registers::{read_op, write_op, RegisterId};
use ofuc_core::rng::SplitMix64;
use ofuc_core::value::V;

use ofuc_netsim::client_fn;
use ofuc_netsim::convoy::{convoy_mean_latency, ConvoyCfg};
use ofuc_netsim::sim::{ClientFn, NetConfig, Netsim};

use crate::explore::par_map;
use crate::steps::affine_fit;
use crate::suites::consensus::{consensus_history_ok, C_SOLO};
use crate::suites::registers::registers_history_ok;
use crate::suites::{ops_at, SuiteBuilder, SuiteCfg, SuiteReport};

/// One seeded register workload: 2-3 clients, a few ops each over one or
/// two registers, with up to `f_max` crashes at random times.
fn register_workload(seed: u64, n_servers: usize) -> (Vec<ClientFn>, Vec<(u64, usize)>) {
    let mut rng = SplitMix64::new(seed ^ 0xD15C);
    let n_clients = 2 + (rng.below(2) as usize);
    let clients: Vec<ClientFn> = (0..n_clients)
        .map(|_| {
            let n_ops = 2 + rng.below(2);
            let ops: Vec<(bool, String, u64, u64)> = (0..n_ops)
                .map(|_| {
                    let write = rng.below(2) == 0;
                    let reg = if rng.below(2) == 0 { "r" } else { "s" };
                    (write, reg.to_string(), rng.below(9) + 1, rng.below(20_000_000))
                })
                .collect();
            client_fn!(move |shm: ofuc_netsim::NetShm| {
                let ops = ops.clone();
                async move {
                    for (write, reg, val, at) in ops {
                        shm.sleep_until(at).await;
                        let r = RegisterId(reg);
                        if write {
                            write_op(&shm, &r, &V::Nat(val)).await;
                        } else {
                            let _ = read_op(&shm, &r, &V::Nat(0)).await;
                        }
                    }
                }
            })
        })
        .collect();
    let cfg = NetConfig::new(n_servers, seed);
    let n_crashes = rng.below(cfg.f_max() as u64 + 1) as usize;
    let mut crashed = std::collections::BTreeSet::new();
    let mut crashes = Vec::new();
    while crashes.len() < n_crashes {
        let s = rng.below(n_servers as u64) as usize;
        if crashed.insert(s) {
            crashes.push((rng.below(15_000_000), s));
        }
    }
    (clients, crashes)
}

pub fn abd_suite(cfg: &SuiteCfg) -> SuiteReport {
    let mut b = SuiteBuilder::new("abd");

    // Fresh register reads its initial value over the quorum substrate.
    {
        let clients = vec![client_fn!(|shm: ofuc_netsim::NetShm| async move {
            let v = read_op(&shm, &RegisterId::from("fresh"), &V::Nat(0)).await;
            assert_eq!(v, V::Nat(0));
        })];
        let mut sim = Netsim::new(NetConfig::new(3, 1), &clients, &[]);
        let report = sim.run();
        b.check("fresh-register-initial-value", report.all_complete(), format!("{report:?}"));
    }

    // Seeded schedules with crashes within the budget: every operation
    // completes and every register history linearizes.
    for n_servers in [3usize, 5] {
        let seeds: Vec<u64> = (0..cfg.seeds).collect();
        let bad: Vec<String> = par_map(seeds, move |s| {
            let (clients, crashes) = register_workload(s, n_servers);
            let mut sim = Netsim::new(NetConfig::new(n_servers, s), &clients, &crashes);
            let report = sim.run();
            if !report.all_complete() {
                return Some(format!("seed {s}: stuck clients {:?}", report.stuck_clients));
            }
            registers_history_ok(&sim.history()).err().map(|e| format!("seed {s}: {e}"))
        })
        .into_iter()
        .flatten()
        .collect();
        b.check(
            &format!("registers-linearizable-n{n_servers}"),
            bad.is_empty(),
            format!("{} seeds, violations: {:?}", cfg.seeds, &bad[..bad.len().min(4)]),
        );
    }

    // The full consensus stack runs unmodified over netsim: agreement,
    // validity, and the frozen solo step counts.
    {
        let solo = vec![client_fn!(|shm: ofuc_netsim::NetShm| async move {
            let got = propose(&shm, &ConsensusId("c".into()), &V::Str("a".into()), 4).await;
            assert_eq!(got, Ok(V::Str("a".into())));
        })];
        let mut sim = Netsim::new(NetConfig::new(3, 99), &solo, &[]);
        let report = sim.run();
        let h = sim.history();
        let prop = ops_at(&h, level::CONS);
        let split = ops_at(&h, level::SPLITTER);
        let ok = report.all_complete()
            && prop[0].step_cost() == Some(C_SOLO)
            && split[0].step_cost() == Some(4);
        b.check(
            "solo-propose-over-netsim",
            ok,
            format!("steps {:?} splitter {:?}", prop[0].step_cost(), split[0].step_cost()),
        );
    }
    {
        let seeds: Vec<u64> = (0..cfg.seeds.min(100)).collect();
        let bad: Vec<String> = par_map(seeds, move |s| {
            let mut rng = SplitMix64::new(s ^ 0xCAFE);
            let t0 = rng.below(4_000_000);
            let t1 = rng.below(4_000_000);
            let mk = |at: u64, val: &'static str| {
                client_fn!(move |shm: ofuc_netsim::NetShm| async move {
                    shm.sleep_until(at).await;
                    let _ = propose(&shm, &ConsensusId("c".into()), &V::Str(val.into()), 64).await;
                })
            };
            let clients = vec![mk(t0, "a"), mk(t1, "b")];
            let mut sim = Netsim::new(NetConfig::new(3, s), &clients, &[]);
            let report = sim.run();
            if !report.all_complete() {
                return Some(format!("seed {s}: stuck {:?}", report.stuck_clients));
            }
            let props = [V::Str("a".into()), V::Str("b".into())];
            consensus_history_ok(&sim.history(), &props).err().map(|e| format!("seed {s}: {e}"))
        })
        .into_iter()
        .flatten()
        .collect();
        b.check(
            "consensus-stack-over-netsim",
            bad.is_empty(),
            format!("violations: {:?}", &bad[..bad.len().min(4)]),
        );
    }

    b.finish()
}

/// Convoy latency model: fitted slope against the client count matches
/// `lambda_s * rho` within 25% for each interval size, the n = 1 point
/// matches the closed formula, and latency is nondecreasing in n.
pub fn convoy_suite(_cfg: &SuiteCfg) -> SuiteReport {
    let mut b = SuiteBuilder::new("convoy");
    let lambda_s = 40.0;
    let lambda_f = 1.0;
    for m in [10u64, 20, 40] {
        let ns: Vec<usize> = (1..=20).collect();
        let lat: Vec<f64> = par_map(ns.clone(), move |n| {
            convoy_mean_latency(&ConvoyCfg {
                clients: n,
                m,
                lambda_s,
                lambda_f,
                ops_per_client: 4000,
                seed: 7,
            })
        });
        let rho = 1.0 / m as f64;
        let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
        let (slope, _, _) = affine_fit(&xs, &lat);
        let target = lambda_s * rho;
        let rel = (slope - target).abs() / target;
        b.check(
            &format!("slope-within-25pct-M{m}"),
            rel <= 0.25,
            format!("slope {slope:.3} vs lambda_s*rho {target:.3} (rel {rel:.3})"),
        );
        let n1 = lat[0];
        let formula = lambda_f * (1.0 - rho) + lambda_s * rho;
        let rel1 = (n1 - formula).abs() / formula;
        b.check(
            &format!("single-client-formula-M{m}"),
            rel1 <= 0.15,
            format!("sim {n1:.3} vs {formula:.3}"),
        );
        let monotone = lat.windows(2).all(|w| w[1] >= w[0] * 0.98);
        b.check(&format!("nondecreasing-M{m}"), monotone, format!("{lat:?}"));
    }
    b.finish()
}
