//! Splitter and grafarius property suites: exhaustive interleavings at 2
//! and 3 processes.

use std::collections::BTreeSet;

use ofuc_core::primitives::{adopt_commit, split, GrafariusId, SplitterId};
use ofuc_core::record::level;
use ofuc_core::value::V;
use ofuc_core::History;

use crate::explore::{explore_check, Bounds};
use crate::proc_fn;
use crate::world::{HarnessShm, Program, Runner};

use super::{ops_at, SuiteBuilder, SuiteCfg, SuiteReport};

fn splitter_program(n: usize) -> Program {
    let procs = (0..n)
        .map(|_| {
            proc_fn!(|shm: HarnessShm| async move {
                let _ = split(&shm, &SplitterId("s".into())).await;
            })
        })
        .collect();
    Program::new(level::SPLITTER, procs)
}

fn splitter_history_ok(h: &History) -> Result<(), String> {
    let ops = ops_at(h, level::SPLITTER);
    let winners: Vec<_> = ops.iter().filter(|o| o.res == Some(V::Bool(true))).collect();
    if winners.len() > 1 {
        return Err(format!("{} winners in one splitter history", winners.len()));
    }
    // A call invoked after any response must lose.
    for o in &ops {
        let late = ops.iter().any(|p| p.precedes(o));
        if late && o.res == Some(V::Bool(true)) {
            return Err(format!("late caller p{} won the splitter", o.proc));
        }
    }
    // Solo caller (response before every other invocation) must win.
    for o in &ops {
        let solo = ops.iter().all(|p| {
            p.inv_seq == o.inv_seq || o.resp_seq.is_some_and(|r| r < p.inv_seq)
        });
        if solo && o.res == Some(V::Bool(false)) {
            return Err(format!("solo caller p{} lost the splitter", o.proc));
        }
    }
    Ok(())
}

pub fn splitter_suite(cfg: &SuiteCfg) -> SuiteReport {
    let mut b = SuiteBuilder::new("splitter");

    // Solo call: wins in exactly four register accesses.
    {
        let mut r = Runner::new(&splitter_program(1));
        while !r.all_done() {
            let en = r.enabled();
            r.step(en[0]);
        }
        let h = r.history();
        let ops = ops_at(&h, level::SPLITTER);
        let win = ops[0].res == Some(V::Bool(true));
        let steps = ops[0].step_cost();
        b.check(
            "solo-wins-in-4-steps",
            win && steps == Some(4),
            format!("won={win} steps={steps:?}"),
        );
    }

    // Exhaustive interleavings at 2..=procs processes.
    for n in 2..=cfg.procs.max(2) {
        let mut outcomes: BTreeSet<Vec<bool>> = BTreeSet::new();
        let outcomes_ref = std::sync::Mutex::new(&mut outcomes);
        let out = explore_check(&splitter_program(n), &Bounds::steps(cfg.max_steps), |h, complete| {
            if complete {
                let ops = ops_at(h, level::SPLITTER);
                let mut by_pid: Vec<bool> = vec![false; n];
                for o in &ops {
                    by_pid[o.proc as usize] = o.res == Some(V::Bool(true));
                }
                outcomes_ref.lock().unwrap().insert(by_pid);
            }
            splitter_history_ok(h)
        });
        drop(outcomes_ref);
        b.check(
            &format!("exhaustive-{n}proc"),
            out.ok() && out.stats.truncated == 0,
            format!(
                "{} schedules, {} pruned, violations: {:?}",
                out.stats.runs, out.stats.pruned, out.violations
            ),
        );
        if n == 2 {
            // Frozen outcome set from enumerating the 4-step protocol: at
            // most one winner, and both may lose.
            let expect: BTreeSet<Vec<bool>> = [
                vec![true, false],
                vec![false, true],
                vec![false, false],
            ]
            .into_iter()
            .collect();
            b.check(
                "two-proc-outcome-set",
                outcomes == expect,
                format!("observed {outcomes:?}"),
            );
        }
    }

    // A caller arriving strictly after a completed call always loses.
    {
        let prog = Program::new(
            level::SPLITTER,
            vec![
                proc_fn!(|shm: HarnessShm| async move {
                    let _ = split(&shm, &SplitterId("s".into())).await;
                    shm.fence(1).await;
                }),
                proc_fn!(|shm: HarnessShm| async move {
                    shm.fence(1).await;
                    let won = split(&shm, &SplitterId("s".into())).await;
                    assert!(!won);
                }),
            ],
        );
        let mut r = Runner::new(&prog);
        while !r.all_done() {
            let en = r.enabled();
            r.step(en[0]);
        }
        let h = r.history();
        b.check_ok("late-caller-loses", splitter_history_ok(&h).map(|_| "sequenced pair".into()));
    }

    b.finish()
}

fn grafarius_program(proposals: Vec<V>) -> Program {
    let procs = proposals
        .into_iter()
        .map(|u| {
            proc_fn!(move |shm: HarnessShm| {
                let u = u.clone();
                async move {
                    let _ = adopt_commit(&shm, &GrafariusId("g".into()), &u).await;
                }
            })
        })
        .collect();
    // Record only the grafarius level: fewer events per step widen the
    // commutation pruning.
    Program::new(level::GRAFARIUS, procs)
}

fn flag_val(res: &V) -> Option<(String, V)> {
    match res.list() {
        Some([V::Str(f), v]) => Some((f.clone(), v.clone())),
        _ => None,
    }
}

/// Validity, coherence, solo convergence, continuation, and the wait-free
/// step bound, over one recorded history.
pub fn grafarius_history_ok(h: &History) -> Result<(), String> {
    let ops = ops_at(h, level::GRAFARIUS);
    let mut committed: Option<V> = None;
    for o in &ops {
        let Some(res) = &o.res else { continue };
        let (flag, v) = flag_val(res).ok_or("malformed grafarius response")?;
        if let Some(c) = o.step_cost() {
            if c > 8 {
                return Err(format!("adopt_commit took {c} steps (> 8)"));
            }
        }
        // Validity: the returned value was proposed before this response.
        let resp = o.resp_seq.expect("complete");
        let proposed_before = ops.iter().any(|p| p.args == v && p.inv_seq < resp);
        if !proposed_before {
            return Err(format!("value {v:?} returned but never proposed earlier"));
        }
        if flag == "commit" {
            if let Some(prev) = &committed {
                if prev != &v {
                    return Err(format!("two commits: {prev:?} and {v:?}"));
                }
            }
            committed = Some(v.clone());
        }
        // Solo convergence: response before any other invocation forces a
        // commit of the caller's own value.
        let solo = ops.iter().all(|p| p.inv_seq == o.inv_seq || resp < p.inv_seq);
        if solo && (flag != "commit" || v != o.args) {
            return Err(format!("solo caller p{} got ({flag}, {v:?})", o.proc));
        }
        // Continuation: an invocation after some response adopts or commits
        // a value proposed before that invocation.
        let late = ops.iter().any(|p| p.precedes(o));
        if late {
            let ok = ops.iter().any(|p| p.args == v && p.inv_seq < o.inv_seq);
            if !ok {
                return Err(format!(
                    "late caller p{} returned {v:?}, not proposed before its invocation",
                    o.proc
                ));
            }
        }
    }
    // Coherence: a committed value forces everyone to adopt or commit it.
    if let Some(cv) = committed {
        for o in &ops {
            if let Some(res) = &o.res {
                let (_, v) = flag_val(res).ok_or("malformed")?;
                if v != cv {
                    return Err(format!("coherence: {v:?} returned alongside commit {cv:?}"));
                }
            }
        }
    }
    Ok(())
}

pub fn grafarius_suite(cfg: &SuiteCfg) -> SuiteReport {
    let mut b = SuiteBuilder::new("grafarius");
    let a = || V::Str("a".into());
    let v2 = || V::Str("b".into());

    // Solo: commit own value.
    {
        let mut r = Runner::new(&grafarius_program(vec![a()]));
        while !r.all_done() {
            let en = r.enabled();
            r.step(en[0]);
        }
        let h = r.history();
        let ops = ops_at(&h, level::GRAFARIUS);
        let good = ops[0].res == Some(V::pair(V::Str("commit".into()), a()));
        b.check("solo-commits", good, format!("{:?}", ops[0].res));
    }

    // Sequential continuation: committed value is adopted by a later caller.
    {
        let prog = Program::new(
            level::GRAFARIUS | level::SPLITTER,
            vec![
                proc_fn!(|shm: HarnessShm| async move {
                    let got = adopt_commit(&shm, &GrafariusId("g".into()), &V::Str("a".into())).await;
                    assert_eq!(got.1, V::Str("a".into()));
                    shm.fence(1).await;
                }),
                proc_fn!(|shm: HarnessShm| async move {
                    shm.fence(1).await;
                    let (flag, v) = adopt_commit(&shm, &GrafariusId("g".into()), &V::Str("b".into())).await;
                    assert_eq!(v, V::Str("a".into()));
                    assert_eq!(flag, ofuc_core::Flag::Adopt);
                }),
            ],
        );
        let mut r = Runner::new(&prog);
        while !r.all_done() {
            let en = r.enabled();
            r.step(en[0]);
        }
        b.check_ok(
            "later-caller-adopts-committed",
            grafarius_history_ok(&r.history()).map(|_| "(adopt, a) after commit a".into()),
        );
    }

    // Exhaustive interleavings over proposal assignments from two values.
    // Exploration covers every schedule, so assignments equal up to process
    // renaming are redundant; one mixed and one uniform assignment per
    // process count suffice.
    let mut assignments: Vec<Vec<V>> = vec![vec![a(), v2()], vec![a(), a()]];
    if cfg.procs >= 3 {
        assignments.push(vec![a(), v2(), v2()]);
    }
    for props in assignments {
        let n = props.len();
        let label = format!(
            "exhaustive-{n}proc-{}",
            props.iter().map(|v| match v { V::Str(s) => s.as_str(), _ => "?" }).collect::<String>()
        );
        let out = explore_check(
            &grafarius_program(props),
            &Bounds::steps(cfg.max_steps.max(24)),
            |h, _| grafarius_history_ok(h),
        );
        b.check(
            &label,
            out.ok() && out.stats.truncated == 0,
            format!(
                "{} schedules, {} pruned, violations: {:?}",
                out.stats.runs, out.stats.pruned, out.violations
            ),
        );
    }

    b.finish()
}
