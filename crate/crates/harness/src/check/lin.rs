//! Linearizability checking.
//!
//! [`check_linearizable`] runs a Wing–Gong style search with memoization on
//! (linearized-set, state) pairs. Pending calls are closed in the standard
//! way: a pending state-changing call may linearize with any legal response
//! or never take effect. [`brute_linearizable`] is the independent
//! permutation oracle the checker is cross-validated against.

use std::collections::HashSet;

use ofuc_core::serial::{OpCall, Serial};
use ofuc_core::value::V;
use ofuc_core::OpRec;

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// Legal sequential witness (indices into the op slice, in order).
    Ok(Vec<usize>),
    /// No witness: the longest linearizable prefix reached and the ops that
    /// could not be placed next.
    Violation { prefix: Vec<usize>, blocked: Vec<usize> },
    /// Search budget exhausted; partial certificate.
    Unknown { prefix: Vec<usize> },
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok(_))
    }
}

struct Search<'a> {
    ops: &'a [OpRec],
    calls: Vec<OpCall>,
    spec: &'a dyn Serial,
    seen: HashSet<(u128, V)>,
    budget: u64,
    nodes: u64,
    best_prefix: Vec<usize>,
    complete_mask: u128,
}

impl<'a> Search<'a> {
    /// Ops with no unlinearized predecessor in real time.
    fn front(&self, done: u128) -> Vec<usize> {
        let n = self.ops.len();
        (0..n)
            .filter(|&i| done & (1 << i) == 0)
            .filter(|&i| {
                (0..n).all(|j| {
                    j == i || done & (1 << j) != 0 || !self.ops[j].precedes(&self.ops[i])
                })
            })
            .collect()
    }

    fn dfs(&mut self, done: u128, state: &V, path: &mut Vec<usize>) -> Option<bool> {
        if done & self.complete_mask == self.complete_mask {
            return Some(true);
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            return None;
        }
        if !self.seen.insert((done, state.clone())) {
            return Some(false);
        }
        if path.len() > self.best_prefix.len() {
            self.best_prefix = path.clone();
        }
        for i in self.front(done) {
            let call = self.calls[i].clone();
            let choices: Vec<V> = match &self.ops[i].res {
                Some(r) => vec![r.clone()],
                None => self.spec.pending_choices(state, &call),
            };
            for resp in choices {
                if let Some(next) = self.spec.step(state, &call, &resp) {
                    path.push(i);
                    match self.dfs(done | (1 << i), &next, path) {
                        Some(true) => return Some(true),
                        Some(false) => {}
                        None => return None,
                    }
                    path.pop();
                }
            }
        }
        Some(false)
    }
}

pub fn check_linearizable(ops: &[OpRec], spec: &dyn Serial, budget: u64) -> Verdict {
    assert!(ops.len() <= 128, "history too large for the checker");
    let complete_mask = ops
        .iter()
        .enumerate()
        .filter(|(_, o)| o.res.is_some())
        .fold(0u128, |m, (i, _)| m | (1 << i));
    let calls = ops.iter().map(|o| OpCall::new(&o.op, o.args.clone())).collect();
    let mut s = Search {
        ops,
        calls,
        spec,
        seen: HashSet::new(),
        budget,
        nodes: 0,
        best_prefix: Vec::new(),
        complete_mask,
    };
    let mut path = Vec::new();
    match s.dfs(0, &spec.init(), &mut path) {
        Some(true) => Verdict::Ok(path),
        Some(false) => {
            let done: u128 = s.best_prefix.iter().fold(0, |m, &i| m | (1 << i));
            let blocked = s.front(done);
            Verdict::Violation { prefix: s.best_prefix, blocked }
        }
        None => Verdict::Unknown { prefix: s.best_prefix },
    }
}

/// Exhaustive permutation oracle: tries every ordering of every completion
/// closure and checks precedence and legality directly. Exponential; for
/// cross-validation on small histories only.
pub fn brute_linearizable(ops: &[OpRec], spec: &dyn Serial) -> bool {
    let n = ops.len();
    assert!(n <= 12, "oracle is factorial");
    let pending: Vec<usize> = (0..n).filter(|&i| ops[i].res.is_none()).collect();
    // Choose which pending ops take effect.
    for subset in 0..(1u32 << pending.len()) {
        let mut included: Vec<usize> = (0..n).filter(|&i| ops[i].res.is_some()).collect();
        for (b, &i) in pending.iter().enumerate() {
            if subset & (1 << b) != 0 {
                included.push(i);
            }
        }
        included.sort_unstable();
        if permute_and_check(&included, ops, spec, &mut Vec::new(), &mut vec![false; n]) {
            return true;
        }
    }
    false
}

fn permute_and_check(
    included: &[usize],
    ops: &[OpRec],
    spec: &dyn Serial,
    order: &mut Vec<usize>,
    used: &mut Vec<bool>,
) -> bool {
    if order.len() == included.len() {
        return check_sequence(order, ops, spec, &spec.init(), 0);
    }
    for &i in included {
        if !used[i] {
            used[i] = true;
            order.push(i);
            let ok = permute_and_check(included, ops, spec, order, used);
            order.pop();
            used[i] = false;
            if ok {
                return true;
            }
        }
    }
    false
}

fn check_sequence(order: &[usize], ops: &[OpRec], spec: &dyn Serial, state: &V, at: usize) -> bool {
    // Real-time order: no later-placed op may precede an earlier-placed one.
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            if ops[j].precedes(&ops[i]) {
                return false;
            }
        }
    }
    if at == order.len() {
        return true;
    }
    let i = order[at];
    let call = OpCall::new(&ops[i].op, ops[i].args.clone());
    let choices = match &ops[i].res {
        Some(r) => vec![r.clone()],
        None => spec.pending_choices(state, &call),
    };
    for resp in choices {
        if let Some(next) = spec.step(state, &call, &resp) {
            if check_sequence(order, ops, spec, &next, at + 1) {
                return true;
            }
        }
    }
    false
}
