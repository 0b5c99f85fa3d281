//! Round-decomposition checking for recycled objects.
//!
//! A recycled object is correct during a history when the event sequence
//! factors into consecutive rounds — every invocation complete in the
//! history completes inside its round — and each round is a correct history
//! of the base type. The constructive path groups operations by recycling
//! round (decision writers by their own stamp, short-circuited observers by
//! the stamp they read), verifies the rounds are contiguous in the event
//! order, and checks each round against the type's automaton. If that
//! grouping fails on a small history, an exhaustive search over cut points
//! settles the verdict.

use ofuc_core::serial::Serial;
use ofuc_core::OpRec;

use super::lin::{check_linearizable, Verdict};

#[derive(Debug, Clone, PartialEq)]
pub enum RoundsVerdict {
    Accept { rounds: usize },
    Reject(String),
    /// Constructive grouping failed and the history is too large for the
    /// exhaustive fallback.
    Unknown(String),
}

impl RoundsVerdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, RoundsVerdict::Accept { .. })
    }
}

/// Round label for one operation: observers belong to the round whose
/// decision they read, everything else to its own epoch.
fn round_of(op: &OpRec) -> u64 {
    if !op.meta.wrote_decision {
        if let Some(t) = op.meta.observed_stamp {
            return t;
        }
    }
    op.epoch.unwrap_or(0)
}

fn last_event(op: &OpRec) -> u64 {
    op.resp_seq.unwrap_or(op.inv_seq)
}

fn constructive(ops: &[OpRec], spec: &dyn Serial, budget: u64) -> Result<usize, String> {
    let rounds: Vec<u64> = ops.iter().map(round_of).collect();
    // Contiguity: every event of an earlier round precedes every event of a
    // later one.
    for (i, a) in ops.iter().enumerate() {
        for (j, b) in ops.iter().enumerate() {
            if rounds[i] < rounds[j] && last_event(a) > b.inv_seq {
                return Err(format!(
                    "round {} op {}:{} overlaps round {} op {}:{}",
                    rounds[i], a.proc, a.op, rounds[j], b.proc, b.op
                ));
            }
        }
    }
    let mut labels: Vec<u64> = rounds.clone();
    labels.sort_unstable();
    labels.dedup();
    for &t in &labels {
        let members: Vec<OpRec> =
            ops.iter().zip(&rounds).filter(|(_, &r)| r == t).map(|(o, _)| o.clone()).collect();
        match check_linearizable(&members, spec, budget) {
            Verdict::Ok(_) => {}
            _ => return Err(format!("round {t} is not a correct history for the type")),
        }
    }
    Ok(labels.len())
}

/// Exhaustive fallback: choose round boundaries along the event sequence.
/// Boundary positions are the operations' first events; a cut is legal when
/// no complete operation straddles it.
fn search(ops: &[OpRec], spec: &dyn Serial, budget: u64) -> bool {
    let mut cuts: Vec<u64> = ops.iter().map(|o| o.inv_seq).collect();
    cuts.sort_unstable();
    cuts.dedup();
    search_from(ops, spec, budget, u64::MIN, &cuts)
}

fn search_from(ops: &[OpRec], spec: &dyn Serial, budget: u64, start: u64, cuts: &[u64]) -> bool {
    let remaining: Vec<&OpRec> = ops.iter().filter(|o| o.inv_seq >= start).collect();
    if remaining.is_empty() {
        return true;
    }
    // Candidate next-round ends: after each remaining cut, or the rest.
    let mut ends: Vec<Option<u64>> =
        cuts.iter().filter(|&&c| c > start).map(|&c| Some(c)).collect();
    ends.push(None);
    for end in ends {
        let (members, ok): (Vec<OpRec>, bool) = {
            let mut ms = Vec::new();
            let mut legal = true;
            for o in &remaining {
                let inside = end.map_or(true, |e| o.inv_seq < e);
                if inside {
                    // A complete op must respond before the cut.
                    if let (Some(r), Some(e)) = (o.resp_seq, end) {
                        if r >= e {
                            legal = false;
                            break;
                        }
                    }
                    ms.push((*o).clone());
                }
            }
            (ms, legal)
        };
        if !ok || members.is_empty() {
            continue;
        }
        if !check_linearizable(&members, spec, budget).is_ok() {
            continue;
        }
        match end {
            None => return true,
            Some(e) => {
                if search_from(ops, spec, budget, e, cuts) {
                    return true;
                }
            }
        }
    }
    false
}

pub fn check_rounds(ops: &[OpRec], spec: &dyn Serial, fallback_cap: usize) -> RoundsVerdict {
    if ops.is_empty() {
        return RoundsVerdict::Accept { rounds: 0 };
    }
    let budget = 2_000_000;
    match constructive(ops, spec, budget) {
        Ok(rounds) => RoundsVerdict::Accept { rounds },
        Err(why) => {
            if ops.len() <= fallback_cap {
                if search(ops, spec, budget) {
                    RoundsVerdict::Accept { rounds: usize::MAX }
                } else {
                    RoundsVerdict::Reject(why)
                }
            } else {
                RoundsVerdict::Unknown(why)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::autom::ConsensusSpec;
    use ofuc_core::value::V;
    use ofuc_core::EvMeta;

    fn prop(proc: u32, arg: u64, res: Option<u64>, inv: u64, resp: Option<u64>, epoch: u64, wrote: bool) -> OpRec {
        OpRec {
            proc,
            obj: "o".into(),
            op: "propose".into(),
            args: V::Nat(arg),
            res: res.map(V::Nat),
            inv_seq: inv,
            resp_seq: resp,
            inv_steps: 0,
            resp_steps: None,
            epoch: Some(epoch),
            meta: EvMeta { wrote_decision: wrote, ..Default::default() },
        }
    }

    #[test]
    fn single_decided_round_accepts() {
        let ops = vec![
            prop(0, 1, Some(1), 0, Some(1), 0, true),
            prop(1, 2, Some(1), 2, Some(3), 0, false),
        ];
        assert_eq!(check_rounds(&ops, &ConsensusSpec, 8), RoundsVerdict::Accept { rounds: 1 });
    }

    #[test]
    fn h1_with_disagreeing_proposals_rejects() {
        // inv(p,op) inv(q,op) resp(q,u) resp(p,v) inv(p,op), with u != v:
        // p's and q's calls overlap, so every cut keeps them in one round,
        // where consensus agreement fails.
        let ops = vec![
            prop(0, 7, Some(9), 0, Some(3), 0, true), // p returns v = 9
            prop(1, 8, Some(8), 1, Some(2), 0, true), // q returns u = 8
            prop(0, 7, None, 4, None, 1, false),      // p's second call, pending
        ];
        assert!(!check_rounds(&ops, &ConsensusSpec, 8).is_accept());
    }

    #[test]
    fn h1_shape_with_agreement_accepts() {
        // The same event shape is decomposable when u = v.
        let ops = vec![
            prop(0, 7, Some(8), 0, Some(3), 0, false),
            prop(1, 8, Some(8), 1, Some(2), 0, true),
            prop(0, 7, None, 4, None, 1, false),
        ];
        assert!(check_rounds(&ops, &ConsensusSpec, 8).is_accept());
    }

    #[test]
    fn sequential_disagreeing_rounds_decompose() {
        // Two non-overlapping proposes with different values: a cut between
        // them yields two correct single-op rounds, whatever their stamps.
        let ops = vec![
            prop(0, 5, Some(5), 0, Some(1), 2, true),
            prop(1, 6, Some(6), 2, Some(3), 1, true),
        ];
        assert!(check_rounds(&ops, &ConsensusSpec, 8).is_accept());
    }

    #[test]
    fn overlapping_disagreeing_modifiers_reject() {
        let ops = vec![
            prop(0, 5, Some(5), 0, Some(2), 1, true),
            prop(1, 6, Some(6), 1, Some(3), 2, true),
        ];
        assert!(!check_rounds(&ops, &ConsensusSpec, 8).is_accept());
    }

    #[test]
    fn observer_joins_the_round_it_read() {
        // A straggler whose single visible step lands in round 3 reads the
        // epoch-3 decision; grouping it with round 3 keeps rounds contiguous.
        let mut straggler = prop(1, 6, Some(9), 5, Some(6), 1, false);
        straggler.meta.observed_stamp = Some(3);
        let ops = vec![
            prop(0, 5, Some(5), 0, Some(2), 1, true),
            prop(0, 9, Some(9), 3, Some(4), 3, true),
            straggler,
        ];
        assert_eq!(check_rounds(&ops, &ConsensusSpec, 8), RoundsVerdict::Accept { rounds: 2 });
    }
}
