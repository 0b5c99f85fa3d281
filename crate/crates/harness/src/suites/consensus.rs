//! Consensus property suite: agreement and validity over bounded
//! interleavings and seeded schedules, the frozen solo step count, and the
//! exact four-step splitter sub-cost.

use ofuc_core::consensus::{propose, ConsensusId};
use ofuc_core::record::level;
use ofuc_core::value::V;
use ofuc_core::History;

use crate::check::autom::ConsensusSpec;
use crate::check::lin::check_linearizable;
use crate::check::{check_prop_racing, PropRacing};
use crate::explore::{explore_check, par_map, run_random, Bounds};
use crate::proc_fn;
use crate::world::{HarnessShm, Program, Runner};

use super::{ops_at, SuiteBuilder, SuiteCfg, SuiteReport};

pub const CONS_MASK: u32 = level::CONS | level::GRAFARIUS | level::SPLITTER | level::RACING;

/// Frozen solo cost of propose: decision read (1), racing enter (3),
/// grafarius (6), decision write (1).
pub const C_SOLO: u64 = 11;

pub fn consensus_program(proposals: Vec<V>, laps: u64, mask: u32) -> Program {
    let procs = proposals
        .into_iter()
        .map(|u| {
            proc_fn!(move |shm: HarnessShm| {
                let u = u.clone();
                async move {
                    let _ = propose(&shm, &ConsensusId("c".into()), &u, laps).await;
                }
            })
        })
        .collect();
    Program::new(mask, procs)
}

/// Agreement and validity over the recorded propose operations; starved and
/// truncated calls count as pending.
pub fn consensus_history_ok(h: &History, proposals: &[V]) -> Result<(), String> {
    let ops: Vec<_> =
        ops_at(h, level::CONS).into_iter().filter(|o| o.op == "propose").collect();
    let mut decided: Option<&V> = None;
    for o in &ops {
        let Some(res) = &o.res else { continue };
        if !proposals.contains(res) {
            return Err(format!("validity: {res:?} was never proposed"));
        }
        match decided {
            None => decided = Some(res),
            Some(prev) if prev == res => {}
            Some(prev) => return Err(format!("agreement: {prev:?} vs {res:?}")),
        }
    }
    let verdict = check_linearizable(&ops, &ConsensusSpec, 2_000_000);
    if !verdict.is_ok() {
        return Err(format!("not linearizable: {verdict:?}"));
    }
    Ok(())
}

pub fn consensus_suite(cfg: &SuiteCfg) -> SuiteReport {
    let mut b = SuiteBuilder::new("consensus");
    let a = V::Str("a".into());
    let bb = V::Str("b".into());

    // Solo propose: decides own value in exactly C_SOLO register accesses,
    // four of them inside the splitter.
    {
        let mut r = Runner::new(&consensus_program(vec![a.clone()], cfg.laps, CONS_MASK));
        while !r.all_done() {
            let en = r.enabled();
            r.step(en[0]);
        }
        let h = r.history();
        let prop_ops = ops_at(&h, level::CONS);
        let split_ops = ops_at(&h, level::SPLITTER);
        let decided = prop_ops[0].res == Some(a.clone());
        let steps = prop_ops[0].step_cost();
        let split_steps = split_ops[0].step_cost();
        b.check(
            "solo-step-count",
            decided && steps == Some(C_SOLO) && split_steps == Some(4),
            format!("decided={decided} steps={steps:?} splitter={split_steps:?}"),
        );
    }

    // Sequential continuation: the second proposer returns the decided value.
    {
        let prog = Program::new(
            CONS_MASK,
            vec![
                proc_fn!(|shm: HarnessShm| async move {
                    let got = propose(&shm, &ConsensusId("c".into()), &V::Str("a".into()), 3).await;
                    assert_eq!(got, Ok(V::Str("a".into())));
                    shm.fence(1).await;
                }),
                proc_fn!(|shm: HarnessShm| async move {
                    shm.fence(1).await;
                    let got = propose(&shm, &ConsensusId("c".into()), &V::Str("b".into()), 3).await;
                    assert_eq!(got, Ok(V::Str("a".into())));
                }),
            ],
        );
        let mut r = Runner::new(&prog);
        while !r.all_done() {
            let en = r.enabled();
            r.step(en[0]);
        }
        let h = r.history();
        b.check_ok(
            "decided-value-sticks",
            consensus_history_ok(&h, &[a.clone(), bb.clone()]).map(|_| "b adopted a".into()),
        );
    }

    // Exhaustive bounded interleavings: 2 processes, lap budget from cfg,
    // step bound from cfg (runs past the bound are truncated and their
    // completed prefix still checked).
    {
        let props = [a.clone(), bb.clone()];
        let out = explore_check(
            &consensus_program(props.to_vec(), cfg.laps, level::CONS),
            &Bounds::steps(cfg.max_steps),
            |h, _| consensus_history_ok(h, &props),
        );
        b.check(
            "exhaustive-2proc",
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

    // Seeded random schedules at the full lap budget, two and three
    // processes; starved calls are legal pending outcomes but agreement must
    // hold among deciders.
    for n in [2usize, 3] {
        if n > cfg.procs {
            continue;
        }
        let props: Vec<V> =
            (0..n).map(|i| V::Str(if i == 0 { "a".into() } else { "b".into() })).collect();
        let props2 = props.clone();
        let seeds: Vec<u64> = (0..cfg.seeds).collect();
        let laps = cfg.laps;
        let bad: Vec<String> = par_map(seeds, move |s| {
            let (h, _) = run_random(&consensus_program(props2.clone(), laps, level::CONS), s, 4_000);
            consensus_history_ok(&h, &props2).err().map(|e| format!("seed {s}: {e}"))
        })
        .into_iter()
        .flatten()
        .collect();
        b.check(
            &format!("random-{n}proc"),
            bad.is_empty(),
            format!("{} seeds, violations: {:?}", cfg.seeds, &bad[..bad.len().min(4)]),
        );
    }

    // Racing proposition on the consensus run: grafarius laps may be left
    // undecided (adopt paths), so the premise need not hold; it must never
    // be outright violated when it does.
    {
        let seeds: Vec<u64> = (0..cfg.seeds.min(500)).collect();
        let laps = cfg.laps;
        let a2 = a.clone();
        let b2 = bb.clone();
        let bad: Vec<String> = par_map(seeds, move |s| {
            let (h, _) =
                run_random(&consensus_program(vec![a2.clone(), b2.clone()], laps, CONS_MASK), s, 4_000);
            let cons = ConsensusId("c".into());
            match check_prop_racing(&h, &cons.racing().0, |lap| cons.grafarius(lap).0) {
                PropRacing::Violated(e) => Some(format!("seed {s}: {e}")),
                _ => None,
            }
        })
        .into_iter()
        .flatten()
        .collect();
        b.check("prop-racing-never-violated", bad.is_empty(), format!("{:?}", &bad[..bad.len().min(4)]));
    }

    b.finish()
}
