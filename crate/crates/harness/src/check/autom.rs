//! Sequential reference automatons for the shared objects under test. These
//! are the checker-side oracles: they specify behavior from the object
//! definitions alone and share no code with the register-based
//! implementations they validate.

use ofuc_core::serial::{OpCall, Serial};
use ofuc_core::value::V;

/// One-shot consensus: the first proposal decides; later calls — and
/// `decided` reads — observe the decision.
pub struct ConsensusSpec;

impl Serial for ConsensusSpec {
    fn init(&self) -> V {
        V::None
    }

    fn apply(&self, state: &V, op: &OpCall) -> (V, V) {
        match op.name.as_str() {
            "propose" => {
                if state.is_none() {
                    (op.arg.clone(), op.arg.clone())
                } else {
                    (state.clone(), state.clone())
                }
            }
            "decided" => (state.clone(), state.clone()),
            other => panic!("consensus spec: unknown op {other}"),
        }
    }
}

/// Racing ordering property as a nondeterministic sequential automaton.
///
/// State: (entered laps, per-process last lap, left laps). An `enter` by
/// process `p` returning lap `l` is legal when either
///   (i) `l` was already left by some process, or
///  (ii) the greatest entered lap below `l` equals `p`'s last lap
///       (its previous lap, or the sentinel 0 for a fresh process).
/// The fixed total order on laps is the numeric index order.
pub struct RacingSpec;

struct RacingState {
    entered: Vec<u64>,
    last: Vec<(u64, u64)>,
    left: Vec<u64>,
}

impl RacingState {
    fn decode(v: &V) -> RacingState {
        let parts = v.list().expect("racing state");
        let nats = |x: &V| x.list().unwrap_or(&[]).iter().filter_map(V::nat).collect::<Vec<_>>();
        let last = parts[1]
            .list()
            .unwrap_or(&[])
            .iter()
            .filter_map(|p| match p.list() {
                Some([V::Nat(a), V::Nat(b)]) => Some((*a, *b)),
                _ => None,
            })
            .collect();
        RacingState { entered: nats(&parts[0]), last, left: nats(&parts[2]) }
    }

    fn encode(&self) -> V {
        let nats = |xs: &[u64]| V::List(xs.iter().map(|&n| V::Nat(n)).collect());
        let last = V::List(
            self.last.iter().map(|&(p, l)| V::List(vec![V::Nat(p), V::Nat(l)])).collect(),
        );
        V::List(vec![nats(&self.entered), last, nats(&self.left)])
    }

    fn last_of(&self, pid: u64) -> u64 {
        self.last.iter().find(|&&(p, _)| p == pid).map_or(0, |&(_, l)| l)
    }
}

impl Serial for RacingSpec {
    fn init(&self) -> V {
        V::List(vec![V::List(vec![]), V::List(vec![]), V::List(vec![])])
    }

    fn apply(&self, _state: &V, _op: &OpCall) -> (V, V) {
        unreachable!("racing spec is nondeterministic; use step/pending_choices")
    }

    fn step(&self, state: &V, op: &OpCall, resp: &V) -> Option<V> {
        assert_eq!(op.name, "enter", "racing spec: unknown op {}", op.name);
        let pid = op.arg.nat()?;
        let lap = resp.nat()?;
        if lap == 0 {
            return None;
        }
        let mut s = RacingState::decode(state);
        let prev = s.last_of(pid);
        let already_left = s.left.contains(&lap);
        let greatest_below = s.entered.iter().copied().filter(|&x| x < lap).max().unwrap_or(0);
        let successor_of_own = greatest_below == prev;
        if !(already_left || successor_of_own) {
            return None;
        }
        if !s.entered.contains(&lap) {
            s.entered.push(lap);
            s.entered.sort_unstable();
        }
        if prev != 0 && prev != lap && !s.left.contains(&prev) {
            s.left.push(prev);
            s.left.sort_unstable();
        }
        match s.last.iter_mut().find(|(p, _)| *p == pid) {
            Some(slot) => slot.1 = lap,
            None => {
                s.last.push((pid, lap));
                s.last.sort_unstable();
            }
        }
        Some(s.encode())
    }

    fn pending_choices(&self, state: &V, _op: &OpCall) -> Vec<V> {
        let s = RacingState::decode(state);
        let hi = s.entered.iter().copied().max().unwrap_or(0) + 1;
        (1..=hi).map(V::Nat).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn enter(pid: u64) -> OpCall {
        OpCall::new("enter", V::Nat(pid))
    }

    #[test]
    fn consensus_first_proposal_sticks() {
        let c = ConsensusSpec;
        let s = c.step(&c.init(), &OpCall::new("propose", V::Nat(3)), &V::Nat(3)).unwrap();
        assert!(c.step(&s, &OpCall::new("propose", V::Nat(9)), &V::Nat(9)).is_none());
        assert!(c.step(&s, &OpCall::new("propose", V::Nat(9)), &V::Nat(3)).is_some());
        assert!(c.step(&c.init(), &OpCall::new("decided", V::None), &V::None).is_some());
    }

    #[test]
    fn racing_solo_sequence_is_legal() {
        let r = RacingSpec;
        let mut s = r.init();
        for lap in 1..=4 {
            s = r.step(&s, &enter(0), &V::Nat(lap)).expect("solo lap");
        }
        // Lap indices need not be dense: 9 is still the successor of p0's
        // last lap in the order on entered laps. A fresh process, however,
        // cannot start there.
        assert!(r.step(&s, &enter(0), &V::Nat(9)).is_some());
        assert!(r.step(&s, &enter(1), &V::Nat(9)).is_none());
    }

    #[test]
    fn racing_fresh_process_joins_left_lap_only() {
        let r = RacingSpec;
        let mut s = r.init();
        for lap in 1..=5 {
            s = r.step(&s, &enter(0), &V::Nat(lap)).unwrap();
        }
        // Laps 1..4 were left by p0; 5 was not. A fresh process may enter a
        // left lap, not the frontier lap it never reached.
        assert!(r.step(&s, &enter(1), &V::Nat(4)).is_some());
        assert!(r.step(&s, &enter(1), &V::Nat(5)).is_none());
    }

    #[test]
    fn racing_two_fresh_processes_may_share_lap_one() {
        let r = RacingSpec;
        let s = r.step(&r.init(), &enter(0), &V::Nat(1)).unwrap();
        // A second fresh process may also land on lap 1; it cannot reach
        // lap 2, which was neither left nor its successor.
        assert!(r.step(&s, &enter(1), &V::Nat(1)).is_some());
        assert!(r.step(&s, &enter(1), &V::Nat(2)).is_none());
        // Once p0 moves on (leaving lap 1), lap 2 opens up for it and lap 1
        // becomes joinable.
        let s2 = r.step(&s, &enter(0), &V::Nat(2)).unwrap();
        assert!(r.step(&s2, &enter(1), &V::Nat(1)).is_some());
    }
}
