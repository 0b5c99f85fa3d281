//! The P1 recycling invariant: for operations `op` at stamp `t` and `op'`
//! at stamp `t' < t`, if `op'` does not precede `op`, some operation at
//! stamp `t'` that writes the decision register must precede `op'`. This is
//! the condition under which timestamp-masked reuse of a decidable object
//! is a correct recycled object.

use ofuc_core::OpRec;

pub fn check_p1(ops: &[OpRec]) -> Result<(), String> {
    // Completion closure: the invariant is stated over complete histories.
    // A pending call that never wrote the decision register took no effect
    // on it and is dropped; a pending writer is kept, open-ended.
    let ops: Vec<&OpRec> =
        ops.iter().filter(|o| o.res.is_some() || o.meta.wrote_decision).collect();
    for &a in &ops {
        let Some(t) = a.epoch else { continue };
        for &b in &ops {
            let Some(t2) = b.epoch else { continue };
            if t2 >= t || b.precedes(a) {
                continue;
            }
            // b runs at an older stamp and does not precede a: demand an
            // older-stamp decision write that precedes b.
            let witness = ops.iter().any(|c| {
                c.epoch == Some(t2) && c.meta.wrote_decision && c.precedes(b)
            });
            if !witness {
                return Err(format!(
                    "P1 violated: stamp-{t2} op {}:{} (inv {}) overlaps stamp-{t} op {}:{} \
                     with no prior stamp-{t2} decision write",
                    b.proc, b.op, b.inv_seq, a.proc, a.op
                ));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ofuc_core::value::V;
    use ofuc_core::EvMeta;

    fn op(proc: u32, inv: u64, resp: Option<u64>, epoch: u64, wrote: bool) -> OpRec {
        OpRec {
            proc,
            obj: "o".into(),
            op: "propose".into(),
            args: V::Nat(0),
            res: resp.map(|_| V::Nat(0)),
            inv_seq: inv,
            resp_seq: resp,
            inv_steps: 0,
            resp_steps: None,
            epoch: Some(epoch),
            meta: EvMeta { wrote_decision: wrote, ..Default::default() },
        }
    }

    #[test]
    fn single_epoch_vacuously_holds() {
        let ops = vec![op(0, 0, Some(3), 1, true), op(1, 1, Some(2), 1, false)];
        assert!(check_p1(&ops).is_ok());
    }

    #[test]
    fn overlap_without_prior_decision_rejects() {
        // Epoch-2 op concurrent with an epoch-1 op; epoch 1 never wrote.
        let ops = vec![op(0, 0, Some(5), 1, false), op(1, 1, Some(4), 2, true)];
        assert!(check_p1(&ops).is_err());
    }

    #[test]
    fn decision_write_before_the_straggler_satisfies_p1() {
        let ops = vec![
            op(0, 0, Some(1), 1, true),  // epoch-1 decision write, completes early
            op(1, 2, Some(6), 1, false), // epoch-1 straggler, overlaps epoch 2
            op(2, 3, Some(5), 2, true),
        ];
        assert!(check_p1(&ops).is_ok());
    }

    #[test]
    fn ordered_epochs_hold() {
        let ops = vec![op(0, 0, Some(1), 1, true), op(1, 2, Some(3), 2, true)];
        assert!(check_p1(&ops).is_ok());
    }
}
