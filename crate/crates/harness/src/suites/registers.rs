//! Register substrate suite: linearizability of raw register histories
//! under exhaustive interleavings, and the stamped-cell epoch invariants.

use ofuc_core::record::level;
use ofuc_core::registers::{read_op, ts_read_op, ts_write_op, write_op, RegisterId};
use ofuc_core::serial::Register;
use ofuc_core::value::V;
use ofuc_core::{History, OpRec};

use crate::check::lin::check_linearizable;
use crate::explore::{explore_check, Bounds};
use crate::proc_fn;
use crate::world::{HarnessShm, Program};

use super::{ops_at, SuiteBuilder, SuiteCfg, SuiteReport};

/// Every register's sub-history must linearize against read/write semantics.
pub fn registers_history_ok(h: &History) -> Result<(), String> {
    let ops = ops_at(h, level::REG);
    let mut regs: Vec<String> = ops.iter().map(|o| o.obj.clone()).collect();
    regs.sort();
    regs.dedup();
    for reg in regs {
        let mine: Vec<OpRec> = ops.iter().filter(|o| o.obj == reg).cloned().collect();
        let verdict = check_linearizable(&mine, &Register, 1_000_000);
        if !verdict.is_ok() {
            return Err(format!("register {reg}: {verdict:?}"));
        }
    }
    Ok(())
}

pub fn registers_suite(cfg: &SuiteCfg) -> SuiteReport {
    let mut b = SuiteBuilder::new("registers");

    // Concurrent write/read on one register: reader sees old or new value,
    // every interleaving linearizes.
    {
        let prog = Program::new(
            level::REG,
            vec![
                proc_fn!(|shm: HarnessShm| async move {
                    write_op(&shm, &RegisterId::from("r"), &V::Nat(5)).await;
                }),
                proc_fn!(|shm: HarnessShm| async move {
                    let v = read_op(&shm, &RegisterId::from("r"), &V::Nat(0)).await;
                    assert!(v == V::Nat(0) || v == V::Nat(5));
                }),
            ],
        );
        let out = explore_check(&prog, &Bounds::steps(cfg.max_steps), |h, _| registers_history_ok(h));
        b.check(
            "concurrent-write-read",
            out.ok() && out.stats.truncated == 0,
            format!("{} schedules, violations: {:?}", out.stats.runs, out.violations),
        );
    }

    // Two concurrent writers and two readers across two registers.
    {
        let prog = Program::new(
            level::REG,
            vec![
                proc_fn!(|shm: HarnessShm| async move {
                    write_op(&shm, &RegisterId::from("r"), &V::Nat(1)).await;
                    let _ = read_op(&shm, &RegisterId::from("s"), &V::Nat(0)).await;
                }),
                proc_fn!(|shm: HarnessShm| async move {
                    write_op(&shm, &RegisterId::from("r"), &V::Nat(2)).await;
                    write_op(&shm, &RegisterId::from("s"), &V::Nat(3)).await;
                }),
                proc_fn!(|shm: HarnessShm| async move {
                    let _ = read_op(&shm, &RegisterId::from("r"), &V::Nat(0)).await;
                    let _ = read_op(&shm, &RegisterId::from("r"), &V::Nat(0)).await;
                }),
            ],
        );
        let out = explore_check(&prog, &Bounds::steps(cfg.max_steps), |h, _| registers_history_ok(h));
        b.check(
            "three-proc-mixed",
            out.ok(),
            format!(
                "{} schedules ({} truncated), violations: {:?}",
                out.stats.runs, out.stats.truncated, out.violations
            ),
        );
    }

    // Stamped cells: initial-read masking and epoch visibility, sequential.
    {
        let shm = ofuc_core::SoloShm::new();
        let init = V::Str("init".into());
        let verdict = ofuc_core::block_on(async {
            let r = RegisterId::from("x");
            // Fresh cell is (0, init): read at stamp 3 masks to init.
            let a = ts_read_op(&shm, &r, 3, &init).await == init;
            ts_write_op(&shm, &r, 3, &V::Nat(7)).await;
            let b1 = ts_read_op(&shm, &r, 3, &init).await == V::Nat(7);
            // Older-stamp reads see newer cells; newer-stamp reads mask old.
            let c = ts_read_op(&shm, &r, 2, &init).await == V::Nat(7);
            let d = ts_read_op(&shm, &r, 5, &init).await == init;
            a && b1 && c && d
        });
        b.check("stamped-cell-masking", verdict, "construction-1 read rule".into());
    }

    // Per-epoch register property: when stamps are used in rounds (no
    // access at stamp t once stamp t+1 begins, which is what the recycling
    // discipline guarantees), restricting the history to a fixed stamp
    // linearizes as a register initialized to the epoch init. The fence
    // enforces the round boundary; epoch-1 interleavings stay concurrent.
    {
        let prog = Program::new(
            level::REG,
            vec![
                proc_fn!(|shm: HarnessShm| async move {
                    let r = RegisterId::from("x");
                    ts_write_op(&shm, &r, 1, &V::Nat(10)).await;
                    let _ = ts_read_op(&shm, &r, 1, &V::Nat(0)).await;
                    shm.fence(1).await;
                    ts_write_op(&shm, &r, 2, &V::Nat(20)).await;
                }),
                proc_fn!(|shm: HarnessShm| async move {
                    let r = RegisterId::from("x");
                    ts_write_op(&shm, &r, 1, &V::Nat(11)).await;
                    let _ = ts_read_op(&shm, &r, 1, &V::Nat(0)).await;
                    shm.fence(1).await;
                    let _ = ts_read_op(&shm, &r, 2, &V::Nat(0)).await;
                }),
            ],
        );
        let out = explore_check(&prog, &Bounds::steps(cfg.max_steps), |h, _| {
            for epoch in [1u64, 2] {
                let mine: Vec<OpRec> = ops_at(h, level::REG)
                    .into_iter()
                    .filter(|o| o.epoch == Some(epoch))
                    .collect();
                let verdict = check_linearizable(&mine, &Register, 1_000_000);
                if !verdict.is_ok() {
                    return Err(format!("epoch {epoch}: {verdict:?}"));
                }
            }
            Ok(())
        });
        b.check(
            "per-epoch-register-histories",
            out.ok(),
            format!("{} schedules, violations: {:?}", out.stats.runs, out.violations),
        );
    }

    // Initial-read property: a stamped read that precedes every write with
    // stamp >= t returns the initial value.
    {
        let prog = Program::new(
            level::REG,
            vec![
                proc_fn!(|shm: HarnessShm| async move {
                    let r = RegisterId::from("y");
                    let _ = ts_read_op(&shm, &r, 4, &V::Str("init".into())).await;
                }),
                proc_fn!(|shm: HarnessShm| async move {
                    let r = RegisterId::from("y");
                    ts_write_op(&shm, &r, 2, &V::Nat(9)).await;
                    ts_write_op(&shm, &r, 4, &V::Nat(10)).await;
                }),
            ],
        );
        let out = explore_check(&prog, &Bounds::steps(cfg.max_steps), |h, _| {
            let ops = ops_at(h, level::REG);
            let Some(read) = ops.iter().find(|o| o.op == "read" && o.res.is_some()) else {
                return Ok(());
            };
            // The read precedes every write with stamp >= its own (4).
            let precedes_all = ops
                .iter()
                .filter(|o| o.op == "write" && o.epoch >= Some(4))
                .all(|w| read.precedes(w));
            if precedes_all && read.res != Some(V::Str("init".into())) {
                return Err(format!("early stamped read saw {:?}", read.res));
            }
            Ok(())
        });
        b.check(
            "initial-read-property",
            out.ok(),
            format!("{} schedules, violations: {:?}", out.stats.runs, out.violations),
        );
    }

    b.finish()
}
