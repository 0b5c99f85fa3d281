//! Universal-construction suites: linearizability of replicated objects for
//! both constructions, the trivial-operation fast path, the recycled pool
//! bound, P1 and round-decomposition certification, the reduction oracle
//! from the bounded to the unbounded construction, and the contention-free
//! complexity regressions.

use std::collections::BTreeSet;
use std::sync::Mutex;

use ofuc_core::record::level;
use ofuc_core::rng::SplitMix64;
use ofuc_core::serial::{OpCall, Serial};
use ofuc_core::universal::{invoke_buniv, invoke_runiv, Budget, BunivLocal, RunivLocal, UnivId};
use ofuc_core::value::V;
use ofuc_core::{History, OpRec};

use crate::check::lin::check_linearizable;
use crate::check::p1::check_p1;
use crate::check::rounds::check_rounds;
use crate::check::{check_prop_racing, PropRacing};
use crate::check::autom::ConsensusSpec;
use crate::explore::{explore_check, par_map, run_random, Bounds};
use crate::proc_fn;
use crate::steps::affine_fit;
use crate::world::{HarnessShm, Program, Runner};

use super::{ops_at, SuiteBuilder, SuiteCfg, SuiteReport};

pub const UNIV_MASK: u32 = level::UNIV | level::CONS | level::RACING;

#[derive(Clone, Copy, PartialEq)]
pub enum Kind {
    Runiv,
    Buniv,
}

fn spec_of(name: &str) -> Box<dyn Serial + Send + Sync> {
    ofuc_core::serial::builtin(name).expect("builtin type")
}

/// Program: process `i` performs `ops[i]` through the chosen construction.
/// With `lockstep`, operations run one at a time in a fenced round-robin
/// (a contention-free execution).
pub fn univ_program_masked(
    kind: Kind,
    object: &'static str,
    ops: Vec<Vec<OpCall>>,
    budget: Budget,
    lockstep: bool,
    mask: u32,
) -> Program {
    let n = ops.len();
    let procs = ops
        .into_iter()
        .enumerate()
        .map(|(i, my_ops)| {
            proc_fn!(move |shm: HarnessShm| {
                let my_ops = my_ops.clone();
                async move {
                    let ser = spec_of(object);
                    let u = UnivId("u".into());
                    let mut run_local = RunivLocal::default();
                    let mut bun_local = BunivLocal::default();
                    for (round, op) in my_ops.iter().enumerate() {
                        if lockstep {
                            shm.fence((round * n + i) as u64).await;
                        }
                        let _ = match kind {
                            Kind::Runiv => {
                                invoke_runiv(&shm, &u, ser.as_ref(), &mut run_local, op, budget)
                                    .await
                            }
                            Kind::Buniv => {
                                invoke_buniv(&shm, &u, ser.as_ref(), &mut bun_local, op, budget)
                                    .await
                            }
                        };
                    }
                }
            })
        })
        .collect();
    Program::new(mask, procs)
}

pub fn univ_program(
    kind: Kind,
    object: &'static str,
    ops: Vec<Vec<OpCall>>,
    budget: Budget,
    lockstep: bool,
) -> Program {
    univ_program_masked(kind, object, ops, budget, lockstep, UNIV_MASK)
}

/// Linearizability of the invoke history against the object's automaton.
pub fn univ_history_ok(h: &History, object: &str) -> Result<(), String> {
    let ops = ops_at(h, level::UNIV);
    let ser = spec_of(object);
    let verdict = check_linearizable(&ops, ser.as_ref(), 4_000_000);
    if !verdict.is_ok() {
        return Err(format!("{object} history not linearizable: {verdict:?}"));
    }
    Ok(())
}

/// Among completed cas(0, _) calls, at most one may return true.
fn one_cas_winner(h: &History) -> Result<(), String> {
    let wins = ops_at(h, level::UNIV)
        .iter()
        .filter(|o| o.op == "cas" && o.res == Some(V::Bool(true)))
        .count();
    if wins > 1 {
        return Err(format!("{wins} cas(0, _) calls returned true"));
    }
    Ok(())
}

fn cas_pair_ops() -> Vec<Vec<OpCall>> {
    let read = OpCall::new("read", V::None);
    vec![
        vec![OpCall::new("cas", V::List(vec![V::Nat(0), V::Nat(1)])), read.clone()],
        vec![OpCall::new("cas", V::List(vec![V::Nat(0), V::Nat(2)])), read],
    ]
}

fn counter_pair_ops() -> Vec<Vec<OpCall>> {
    let inc = OpCall::new("inc", V::None);
    let read = OpCall::new("read", V::None);
    vec![vec![inc.clone(), read.clone()], vec![inc, read]]
}

/// Distinct consensus pool indices touched in a history.
pub fn cons_indices(h: &History) -> BTreeSet<u64> {
    let prefix = "u:cons:";
    let mut out = BTreeSet::new();
    for ev in &h.0 {
        if let Some(rest) = ev.obj.strip_prefix(prefix) {
            if let Ok(i) = rest.parse::<u64>() {
                out.insert(i);
            }
        }
    }
    out
}

/// Per-pool-object P1 and round-decomposition verification.
pub fn recycled_objects_ok(h: &History) -> Result<(), String> {
    let ops = h.ops();
    let mut objs: Vec<String> = ops
        .iter()
        .filter(|o| o.obj.starts_with("u:cons:") && !o.obj[7..].contains(':'))
        .map(|o| o.obj.clone())
        .collect();
    objs.sort();
    objs.dedup();
    for obj in objs {
        let mine: Vec<OpRec> = ops.iter().filter(|o| o.obj == obj).cloned().collect();
        check_p1(&mine).map_err(|e| format!("{obj}: {e}"))?;
        let verdict = check_rounds(&mine, &ConsensusSpec, 10);
        if !verdict.is_accept() {
            return Err(format!("{obj}: rounds check failed: {verdict:?}"));
        }
    }
    Ok(())
}

fn drive_to_completion(r: &mut Runner) {
    while !r.all_done() {
        let en = r.enabled();
        r.step(en[0]);
    }
}

/// Outcome signature of a complete run: every op with its response, sorted.
fn outcome_sig(h: &History) -> Option<Vec<(u32, String, V)>> {
    let ops = ops_at(h, level::UNIV);
    let mut sig = Vec::with_capacity(ops.len());
    for o in ops {
        sig.push((o.proc, o.op.clone(), o.res?));
    }
    sig.sort();
    Some(sig)
}

/// Seed-dependent small op mixes over the cas object.
fn seeded_ops(seed: u64, procs: usize, per_proc: usize) -> Vec<Vec<OpCall>> {
    let mut rng = SplitMix64::new(seed.wrapping_mul(0x9E37_79B9) + 1);
    (0..procs)
        .map(|_| {
            (0..per_proc)
                .map(|_| match rng.below(4) {
                    0 => OpCall::new("read", V::None),
                    _ => {
                        let u = rng.below(3);
                        let v = rng.below(3);
                        OpCall::new("cas", V::List(vec![V::Nat(u), V::Nat(v)]))
                    }
                })
                .collect()
        })
        .collect()
}

pub fn runiv_suite(cfg: &SuiteCfg) -> SuiteReport {
    let mut b = SuiteBuilder::new("runiv");
    let budget = Budget { rounds: 24, laps: 8 };

    // Sequential semantics and the trivial-op fast path: read-only
    // operations return without allocating registers for any new consensus
    // instance (allocation measured by the registers that actually exist).
    {
        let allocated = |ops: Vec<Vec<OpCall>>| {
            let mut r = Runner::new(&univ_program(Kind::Runiv, "counter", ops, budget, false));
            drive_to_completion(&mut r);
            let h = r.history();
            let responses: Vec<_> = ops_at(&h, level::UNIV).iter().map(|o| o.res.clone()).collect();
            let names = r.w.borrow().register_names();
            let instances: BTreeSet<String> = names
                .iter()
                .filter_map(|n| n.strip_prefix("u:cons:"))
                .filter_map(|rest| rest.split(':').next())
                .map(str::to_string)
                .collect();
            (responses, instances)
        };
        let inc = OpCall::new("inc", V::None);
        let read = OpCall::new("read", V::None);
        let (_, base) = allocated(vec![vec![inc.clone()]]);
        let (responses, with_reads) = allocated(vec![vec![inc, read.clone(), read]]);
        let expect =
            vec![Some(V::Str("ack".into())), Some(V::Nat(1)), Some(V::Nat(1))];
        b.check(
            "trivial-ops-allocate-nothing",
            responses == expect && base == with_reads,
            format!("responses {responses:?}, instances {base:?} -> {with_reads:?}"),
        );
    }

    // Exhaustive bounded interleavings, cas and counter.
    for (object, ops) in [("cas", cas_pair_ops()), ("counter", counter_pair_ops())] {
        let out = explore_check(
            &univ_program_masked(Kind::Runiv, object, ops, budget, false, level::UNIV),
            &Bounds::steps(cfg.max_steps),
            |h, _| {
                univ_history_ok(h, object)?;
                if object == "cas" {
                    one_cas_winner(h)?;
                }
                Ok(())
            },
        );
        b.check(
            &format!("exhaustive-2proc-{object}"),
            out.ok(),
            format!(
                "{} schedules ({} complete, {} truncated, {} pruned), violations: {:?}",
                out.stats.runs,
                out.stats.complete,
                out.stats.truncated,
                out.stats.pruned,
                out.violations
            ),
        );
    }

    // Seeded random schedules run to completion.
    for (object, ops) in [("cas", cas_pair_ops()), ("counter", counter_pair_ops())] {
        let seeds: Vec<u64> = (0..cfg.seeds).collect();
        let ops2 = ops.clone();
        let bad: Vec<String> = par_map(seeds, move |s| {
            let prog =
                univ_program_masked(Kind::Runiv, object, ops2.clone(), budget, false, level::UNIV);
            let (h, _) = run_random(&prog, s, 100_000);
            univ_history_ok(&h, object).err().map(|e| format!("seed {s}: {e}"))
        })
        .into_iter()
        .flatten()
        .collect();
        b.check(
            &format!("random-2proc-{object}"),
            bad.is_empty(),
            format!("{} seeds, violations: {:?}", cfg.seeds, &bad[..bad.len().min(4)]),
        );
    }

    // The racing proposition holds on universal runs: processes enter a new
    // consensus lap only after their last one decided.
    {
        let seeds: Vec<u64> = (0..cfg.seeds.min(500)).collect();
        let bad: Vec<String> = par_map(seeds, move |s| {
            let prog = univ_program(Kind::Runiv, "cas", cas_pair_ops(), budget, false);
            let (h, complete) = run_random(&prog, s, 100_000);
            if !complete {
                return None;
            }
            let u = UnivId("u".into());
            match check_prop_racing(&h, &u.racing().0, |lap| u.cons(lap).0) {
                PropRacing::Holds => None,
                PropRacing::PremiseUnmet(e) => Some(format!("seed {s}: premise unmet: {e}")),
                PropRacing::Violated(e) => Some(format!("seed {s}: {e}")),
            }
        })
        .into_iter()
        .flatten()
        .collect();
        b.check(
            "prop-racing-holds",
            bad.is_empty(),
            format!("{:?}", &bad[..bad.len().min(4)]),
        );
    }

    b.finish()
}

pub fn buniv_suite(cfg: &SuiteCfg) -> SuiteReport {
    let mut b = SuiteBuilder::new("buniv");
    let budget = Budget { rounds: 32, laps: 8 };

    // Pool bound, P1, and round decomposition across seeded schedules.
    for k in 1..=cfg.procs.min(3) {
        let seeds: Vec<u64> = (0..cfg.seeds).collect();
        let results: Vec<Option<String>> = par_map(seeds, move |s| {
            let ops = seeded_ops(s, k, 4);
            let prog = univ_program(Kind::Buniv, "cas", ops, budget, false);
            let (h, finished) = run_random(&prog, s, 400_000);
            if !finished {
                return Some(format!("seed {s}: hit step bound"));
            }
            let pool = cons_indices(&h);
            if pool.len() > k + 1 {
                return Some(format!("seed {s}: pool {pool:?} exceeds k+1 = {}", k + 1));
            }
            if let Err(e) = recycled_objects_ok(&h) {
                return Some(format!("seed {s}: {e}"));
            }
            if let Err(e) = univ_history_ok(&h, "cas") {
                return Some(format!("seed {s}: {e}"));
            }
            None
        });
        let bad: Vec<String> = results.into_iter().flatten().collect();
        b.check(
            &format!("pool-p1-rounds-lin-k{k}"),
            bad.is_empty(),
            format!("{} seeds, violations: {:?}", cfg.seeds, &bad[..bad.len().min(4)]),
        );
    }

    // Larger workload: 3 processes, about fifty operations in total.
    {
        let seeds: Vec<u64> = (0..cfg.seeds.min(100)).collect();
        let bad: Vec<String> = par_map(seeds, move |s| {
            let ops = seeded_ops(s ^ 0xABCD, 3, 17);
            let prog = univ_program(Kind::Buniv, "cas", ops, budget, false);
            let (h, finished) = run_random(&prog, s, 2_000_000);
            if !finished {
                return Some(format!("seed {s}: hit step bound"));
            }
            let pool = cons_indices(&h);
            if pool.len() > 4 {
                return Some(format!("seed {s}: pool {pool:?}"));
            }
            recycled_objects_ok(&h).err().map(|e| format!("seed {s}: {e}"))
        })
        .into_iter()
        .flatten()
        .collect();
        b.check(
            "pool-p1-rounds-50ops-k3",
            bad.is_empty(),
            format!("violations: {:?}", &bad[..bad.len().min(4)]),
        );
    }

    // Exhaustive bounded interleavings (step-capped) and the explicit cas
    // winner rule.
    {
        let out = explore_check(
            &univ_program(Kind::Buniv, "cas", cas_pair_ops(), budget, false),
            &Bounds::steps(cfg.max_steps),
            |h, _| {
                univ_history_ok(h, "cas")?;
                one_cas_winner(h)?;
                recycled_objects_ok(h)
            },
        );
        b.check(
            "exhaustive-2proc-cas",
            out.ok(),
            format!(
                "{} schedules ({} complete, {} truncated, {} pruned), violations: {:?}",
                out.stats.runs,
                out.stats.complete,
                out.stats.truncated,
                out.stats.pruned,
                out.violations
            ),
        );
    }

    // Reduction oracle: the bounded construction's outcomes match some
    // execution of the unbounded one on the same per-process operations.
    {
        let runiv_outcomes = Mutex::new(BTreeSet::new());
        for s in 0..cfg.seeds.min(400) {
            let prog = univ_program(Kind::Runiv, "cas", cas_pair_ops(), budget, false);
            let (h, complete) = run_random(&prog, s, 100_000);
            if complete {
                if let Some(sig) = outcome_sig(&h) {
                    runiv_outcomes.lock().unwrap().insert(sig);
                }
            }
        }
        explore_check(
            &univ_program(Kind::Runiv, "cas", cas_pair_ops(), budget, false),
            &Bounds::steps(cfg.max_steps),
            |h, complete| {
                if complete {
                    if let Some(sig) = outcome_sig(h) {
                        runiv_outcomes.lock().unwrap().insert(sig);
                    }
                }
                Ok(())
            },
        );
        let known = runiv_outcomes.into_inner().unwrap();
        let seeds: Vec<u64> = (0..cfg.seeds.min(400)).collect();
        let known_ref = &known;
        let bad: Vec<String> = par_map(seeds, move |s| {
            let prog = univ_program(Kind::Buniv, "cas", cas_pair_ops(), budget, false);
            let (h, complete) = run_random(&prog, s, 200_000);
            if !complete {
                return None;
            }
            let sig = outcome_sig(&h)?;
            if known_ref.contains(&sig) {
                None
            } else {
                Some(format!("seed {s}: outcome {sig:?} unreachable by the unbounded construction"))
            }
        })
        .into_iter()
        .flatten()
        .collect();
        b.check(
            "reduces-to-runiv",
            bad.is_empty(),
            format!("{} known outcomes, violations: {:?}", known.len(), &bad[..bad.len().min(3)]),
        );
    }

    b.finish()
}

/// Contention-free step measurement in the worst-case shape the complexity
/// claim is about: `k` processes each perform two state-changing
/// operations in fenced rounds, then a fresh process performs its first
/// invoke — it must retrieve the largest decided consensus, enter the next
/// one, and decide. The same catch-up regime applies at every `k`, so the
/// joiner's cost is an exact affine function of the participant count.
/// Returns (joiner's steps, registers created, pool size).
fn contention_free_cost(kind: Kind, k: usize) -> (u64, usize, usize) {
    let inc = OpCall::new("inc", V::None);
    let warm_rounds = 2;
    let n = k + 1;
    let ops: Vec<Vec<OpCall>> =
        (0..n).map(|i| if i == k { vec![inc.clone()] } else { vec![inc.clone(); warm_rounds] }).collect();
    let procs = ops
        .into_iter()
        .enumerate()
        .map(|(i, my_ops)| {
            proc_fn!(move |shm: HarnessShm| {
                let my_ops = my_ops.clone();
                async move {
                    let ser = spec_of("counter");
                    let u = UnivId("u".into());
                    let mut run_local = RunivLocal::default();
                    let mut bun_local = BunivLocal::default();
                    for (round, op) in my_ops.iter().enumerate() {
                        // The joiner (last process) goes strictly after all
                        // warmup rounds.
                        let slot = if i == n - 1 {
                            (warm_rounds * (n - 1)) as u64
                        } else {
                            (round * (n - 1) + i) as u64
                        };
                        shm.fence(slot).await;
                        let _ = match kind {
                            Kind::Runiv => {
                                invoke_runiv(&shm, &u, ser.as_ref(), &mut run_local, op, Budget { rounds: 64, laps: 8 }).await
                            }
                            Kind::Buniv => {
                                invoke_buniv(&shm, &u, ser.as_ref(), &mut bun_local, op, Budget { rounds: 64, laps: 8 }).await
                            }
                        };
                    }
                }
            })
        })
        .collect();
    let prog = Program::new(UNIV_MASK, procs);
    let mut r = Runner::new(&prog);
    drive_to_completion(&mut r);
    let h = r.history();
    let univ = ops_at(&h, level::UNIV);
    assert_eq!(univ.len(), warm_rounds * k + 1, "all invokes completed");
    let joiner = univ
        .iter()
        .filter(|o| o.proc == k as u32)
        .max_by_key(|o| o.inv_seq)
        .expect("joiner op");
    let steps = joiner.step_cost().expect("joiner completed");
    let (regs, pool) = {
        let w = r.w.borrow();
        let names = w.register_names();
        let pool = names
            .iter()
            .filter_map(|n| n.strip_prefix("u:cons:"))
            .filter_map(|rest| rest.split(':').next())
            .filter_map(|s| s.parse::<u64>().ok())
            .collect::<BTreeSet<u64>>()
            .len();
        (w.register_count(), pool)
    };
    (steps, regs, pool)
}

/// Frozen space-bound constant: registers after a k-process bounded run stay
/// below `C_SPACE * k^2` (measured 8k + 8 across k = 1..8; frozen with
/// headroom).
pub const C_SPACE: usize = 16;

pub fn complexity_suite(_cfg: &SuiteCfg) -> SuiteReport {
    let mut b = SuiteBuilder::new("complexity");
    let ks: Vec<usize> = (1..=8).collect();
    for kind in [Kind::Runiv, Kind::Buniv] {
        let name = if kind == Kind::Runiv { "runiv" } else { "buniv" };
        let measured: Vec<(u64, usize, usize)> =
            par_map(ks.clone(), move |k| contention_free_cost(kind, k));
        let xs: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
        let ys: Vec<f64> = measured.iter().map(|&(s, _, _)| s as f64).collect();
        let (slope, intercept, r2) = affine_fit(&xs, &ys);
        b.check(
            &format!("{name}-invoke-affine-in-k"),
            r2 >= 0.99 && slope > 0.0,
            format!("steps {ys:?}, fit {slope:.2}k + {intercept:.2}, r2 {r2:.4}"),
        );
        if kind == Kind::Buniv {
            let space_ok = measured
                .iter()
                .zip(&ks)
                .all(|(&(_, regs, _), &k)| regs <= C_SPACE * k * k);
            let regs: Vec<usize> = measured.iter().map(|&(_, r, _)| r).collect();
            b.check(
                "buniv-space-quadratic-bound",
                space_ok,
                format!("registers {regs:?} vs {C_SPACE}*k^2"),
            );
            let pool_ok = measured.iter().zip(&ks).all(|(&(_, _, p), &k)| p <= k + 1);
            let pools: Vec<usize> = measured.iter().map(|&(_, _, p)| p).collect();
            b.check("buniv-pool-at-most-k-plus-1", pool_ok, format!("pools {pools:?}"));
        }
    }
    b.finish()
}
