//! Checker cross-validation: the linearizability and round-decomposition
//! checkers must agree with brute-force permutation oracles on a random
//! corpus of small histories.

use ofuc_core::rng::SplitMix64;
use ofuc_core::serial::{Cas, Counter, OpCall, Register, Serial};
use ofuc_core::value::V;
use ofuc_core::{EvMeta, OpRec};

use crate::check::autom::ConsensusSpec;
use crate::check::lin::{brute_linearizable, check_linearizable};
use crate::check::rounds::{check_rounds, RoundsVerdict};
use crate::explore::par_map;

use super::{SuiteBuilder, SuiteCfg, SuiteReport};

pub fn spec_by_id(id: u64) -> Box<dyn Serial + Send + Sync> {
    match id % 4 {
        0 => Box::new(Register),
        1 => Box::new(Counter),
        2 => Box::new(Cas),
        _ => Box::new(ConsensusSpec2),
    }
}

/// Local copy of the consensus automaton so the corpus covers it without a
/// Send bound change on the checker-side type.
struct ConsensusSpec2;

impl Serial for ConsensusSpec2 {
    fn init(&self) -> V {
        ConsensusSpec.init()
    }
    fn apply(&self, s: &V, op: &OpCall) -> (V, V) {
        ConsensusSpec.apply(s, op)
    }
}

fn random_call(spec_id: u64, rng: &mut SplitMix64) -> OpCall {
    match spec_id % 4 {
        0 => {
            if rng.below(2) == 0 {
                OpCall::new("write", V::Nat(rng.below(3)))
            } else {
                OpCall::new("read", V::None)
            }
        }
        1 => {
            if rng.below(2) == 0 {
                OpCall::new("inc", V::None)
            } else {
                OpCall::new("read", V::None)
            }
        }
        2 => {
            if rng.below(3) == 0 {
                OpCall::new("read", V::None)
            } else {
                OpCall::new("cas", V::List(vec![V::Nat(rng.below(3)), V::Nat(rng.below(3))]))
            }
        }
        _ => {
            if rng.below(4) == 0 {
                OpCall::new("decided", V::None)
            } else {
                OpCall::new("propose", V::Nat(rng.below(3)))
            }
        }
    }
}

fn random_response(spec_id: u64, rng: &mut SplitMix64) -> V {
    match spec_id % 4 {
        0 | 1 => match rng.below(3) {
            0 => V::Str("ack".into()),
            _ => V::Nat(rng.below(4)),
        },
        2 => match rng.below(3) {
            0 => V::Bool(true),
            1 => V::Bool(false),
            _ => V::Nat(rng.below(4)),
        },
        _ => match rng.below(4) {
            0 => V::None,
            _ => V::Nat(rng.below(3)),
        },
    }
}

/// Random history of at most `max_ops` operations over up to three
/// processes. Half the corpus gets responses from a legal serialization (in
/// invocation order, hence linearizable); the other half gets random
/// responses, which may or may not admit a witness.
pub fn random_history(seed: u64, max_ops: usize, with_epochs: bool) -> (Vec<OpRec>, u64) {
    let mut rng = SplitMix64::new(seed.wrapping_mul(0x5851_F42D) + 3);
    let spec_id = if with_epochs { 3 } else { rng.below(4) };
    let n_procs = 1 + rng.below(3) as usize;
    let n_ops = 2 + rng.below(max_ops as u64 - 1) as usize;
    // Assign ops to processes round-robin-ish, then interleave events.
    let mut per_proc: Vec<Vec<usize>> = vec![Vec::new(); n_procs];
    for i in 0..n_ops {
        per_proc[rng.below(n_procs as u64) as usize].push(i);
    }
    let mut inv = vec![0u64; n_ops];
    let mut resp: Vec<Option<u64>> = vec![None; n_ops];
    let mut cursor = vec![0usize; n_procs]; // next event per proc: 2*idx or 2*idx+1
    let mut seq = 0u64;
    loop {
        let live: Vec<usize> =
            (0..n_procs).filter(|&p| cursor[p] < per_proc[p].len() * 2).collect();
        if live.is_empty() {
            break;
        }
        let p = live[rng.below(live.len() as u64) as usize];
        let op = per_proc[p][cursor[p] / 2];
        if cursor[p] % 2 == 0 {
            inv[op] = seq;
        } else {
            resp[op] = Some(seq);
        }
        seq += 1;
        cursor[p] += 1;
    }
    // Leave some tails pending.
    for (p, ops) in per_proc.iter().enumerate() {
        if !ops.is_empty() && rng.below(6) == 0 {
            resp[*ops.last().expect("nonempty")] = None;
            let _ = p;
        }
    }
    let calls: Vec<OpCall> = (0..n_ops).map(|_| random_call(spec_id, &mut rng)).collect();
    let legal_mode = rng.below(2) == 0;
    let spec = spec_by_id(spec_id);
    let mut responses: Vec<V> = Vec::with_capacity(n_ops);
    if legal_mode {
        // Apply in invocation order: always a valid linearization.
        let mut order: Vec<usize> = (0..n_ops).collect();
        order.sort_by_key(|&i| inv[i]);
        let mut state = spec.init();
        let mut out = vec![V::None; n_ops];
        for &i in &order {
            let (next, r) = spec.apply(&state, &calls[i]);
            state = next;
            out[i] = r;
        }
        responses = out;
    } else {
        for _ in 0..n_ops {
            responses.push(random_response(spec_id, &mut rng));
        }
    }
    let mut proc_of = vec![0u32; n_ops];
    for (p, ops) in per_proc.iter().enumerate() {
        for &i in ops {
            proc_of[i] = p as u32;
        }
    }
    let ops: Vec<OpRec> = (0..n_ops)
        .map(|i| {
            let epoch = with_epochs.then(|| rng.below(3));
            let wrote = with_epochs && rng.below(2) == 0;
            let observed = if with_epochs && !wrote && rng.below(3) == 0 {
                Some(rng.below(3))
            } else {
                None
            };
            OpRec {
                proc: proc_of[i],
                obj: "o".into(),
                op: calls[i].name.clone(),
                args: calls[i].arg.clone(),
                res: resp[i].map(|_| responses[i].clone()),
                inv_seq: inv[i],
                resp_seq: resp[i],
                inv_steps: 0,
                resp_steps: None,
                epoch,
                meta: EvMeta {
                    wrote_decision: with_epochs && resp[i].is_some() && {
                        let mut r2 = SplitMix64::new(seed ^ i as u64);
                        r2.below(2) == 0
                    },
                    observed_stamp: observed,
                    ..Default::default()
                },
            }
        })
        .collect();
    (ops, spec_id)
}

/// Independent rounds oracle: enumerate every subset of cut positions along
/// the event sequence; a decomposition is valid when no complete operation
/// straddles a cut and every segment passes the brute-force permutation
/// check for the type.
fn brute_rounds(ops: &[OpRec], spec: &dyn Serial) -> bool {
    let mut events: Vec<u64> = ops
        .iter()
        .flat_map(|o| [Some(o.inv_seq), o.resp_seq])
        .flatten()
        .collect();
    events.sort_unstable();
    events.dedup();
    let gaps = events.len().saturating_sub(1);
    for mask in 0..(1u32 << gaps) {
        // Cut after event position i when bit i is set.
        let mut boundaries: Vec<u64> = Vec::new();
        for i in 0..gaps {
            if mask & (1 << i) != 0 {
                boundaries.push(events[i]);
            }
        }
        let seg_of = |seq: u64| boundaries.iter().filter(|&&b| seq > b).count();
        let n_segs = boundaries.len() + 1;
        let mut valid = true;
        for o in ops {
            if let Some(r) = o.resp_seq {
                if seg_of(o.inv_seq) != seg_of(r) {
                    valid = false;
                    break;
                }
            }
        }
        if !valid {
            continue;
        }
        let mut all = true;
        for s in 0..n_segs {
            let members: Vec<OpRec> =
                ops.iter().filter(|o| seg_of(o.inv_seq) == s).cloned().collect();
            if members.is_empty() {
                continue;
            }
            if !brute_linearizable(&members, spec) {
                all = false;
                break;
            }
        }
        if all {
            return true;
        }
    }
    false
}

pub fn checkers_suite(cfg: &SuiteCfg) -> SuiteReport {
    let mut b = SuiteBuilder::new("checkers");
    let corpus = cfg.seeds.max(1000);

    // Linearizability checker vs the permutation oracle.
    {
        let seeds: Vec<u64> = (0..corpus).collect();
        let disagreements: Vec<String> = par_map(seeds, |s| {
            let (ops, spec_id) = random_history(s, 6, false);
            let spec = spec_by_id(spec_id);
            let fast = check_linearizable(&ops, spec.as_ref(), 10_000_000).is_ok();
            let slow = brute_linearizable(&ops, spec.as_ref());
            (fast != slow).then(|| format!("seed {s}: checker {fast} oracle {slow}"))
        })
        .into_iter()
        .flatten()
        .collect();
        b.check(
            "lin-agrees-with-permutation-oracle",
            disagreements.is_empty(),
            format!("{corpus} histories, disagreements: {:?}", &disagreements[..disagreements.len().min(4)]),
        );
    }

    // Rounds checker vs the cut-enumeration oracle (consensus histories
    // with random epoch annotations).
    {
        let seeds: Vec<u64> = (0..corpus).collect();
        let disagreements: Vec<String> = par_map(seeds, |s| {
            let (ops, _) = random_history(s, 6, true);
            let fast = matches!(
                check_rounds(&ops, &ConsensusSpec, 8),
                RoundsVerdict::Accept { .. }
            );
            let slow = brute_rounds(&ops, &ConsensusSpec);
            (fast != slow).then(|| format!("seed {s}: checker {fast} oracle {slow}"))
        })
        .into_iter()
        .flatten()
        .collect();
        b.check(
            "rounds-agrees-with-cut-oracle",
            disagreements.is_empty(),
            format!("{corpus} histories, disagreements: {:?}", &disagreements[..disagreements.len().min(4)]),
        );
    }

    b.finish()
}
