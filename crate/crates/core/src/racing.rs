//! Long-lived racing object: orders an unbounded sequence of indexed laps so
//! that a process entering late can skip the laps it missed.
//!
//! The shared state is a store-collect map `L` from processes to lap
//! indices. On `enter`, a process stores its last lap, collects the map,
//! takes the maximum `m` of the codomain, and moves to `m + 1` when it was
//! already at the frontier, or to `m` otherwise.

use crate::primitives::{collect_codomain, collect_store, CollectId};
use crate::record::level;
use crate::shm::{OpMeta, Shm};
use crate::value::V;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RacingId(pub String);

impl RacingId {
    pub fn map(&self) -> CollectId {
        CollectId(format!("{}:L", self.0))
    }

    /// Indexing function: lap `n` names a deterministic sub-object. Index 0
    /// is the sentinel for "no lap entered yet" and is never returned.
    pub fn lap(&self, n: u64) -> String {
        format!("{}:lap:{}", self.0, n)
    }
}

/// Per-process racing state. `lastlap` starts at the sentinel 0.
#[derive(Debug, Clone, Default)]
pub struct RacingLocal {
    pub lastlap: u64,
}

/// Enter the racing; returns the new lap index (use [`RacingId::lap`] to
/// name its object). Cost: `k + 2` register accesses for `k` participants.
pub async fn enter<S: Shm>(shm: &S, r: &RacingId, local: &mut RacingLocal) -> u64 {
    shm.begin_op(level::RACING, &r.0, "enter", V::Nat(local.lastlap));
    collect_store(shm, &r.map(), &V::Nat(local.lastlap)).await;
    let m = collect_codomain(shm, &r.map())
        .await
        .iter()
        .filter_map(V::nat)
        .max()
        .unwrap_or(0);
    local.lastlap = if local.lastlap == m {
        m.checked_add(1).expect("lap index overflow")
    } else {
        m
    };
    shm.end_op(level::RACING, V::Nat(local.lastlap), OpMeta::default());
    local.lastlap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shm::{block_on, SoloShm};

    #[test]
    fn solo_enters_yield_successive_laps() {
        let shm = SoloShm::new();
        let r = RacingId("race".into());
        let mut local = RacingLocal::default();
        block_on(async {
            for expect in 1..=5 {
                assert_eq!(enter(&shm, &r, &mut local).await, expect);
            }
        });
    }

    #[test]
    fn fresh_process_skips_missed_laps() {
        let shm = SoloShm::new();
        let r = RacingId("race".into());
        block_on(async {
            let mut p = RacingLocal::default();
            for _ in 0..5 {
                enter(&shm, &r, &mut p).await;
            }
            assert_eq!(p.lastlap, 5);
            // p's last store announced lap 4, so a newcomer lands on 4,
            // skipping laps 1..3 outright.
            let q_shm = shm.as_pid(1);
            let mut q = RacingLocal::default();
            assert_eq!(enter(&q_shm, &r, &mut q).await, 4);
            // Entering again while p is idle reaches the frontier and moves on.
            assert_eq!(enter(&q_shm, &r, &mut q).await, 5);
            assert_eq!(enter(&q_shm, &r, &mut q).await, 6);
        });
    }

    #[test]
    fn enter_costs_k_plus_two() {
        let shm = SoloShm::new();
        let r = RacingId("race".into());
        let mut p = RacingLocal::default();
        block_on(enter(&shm, &r, &mut p));
        // store + scan + 1 slot read
        assert_eq!(shm.steps_of(0), 3);
        let q_shm = shm.as_pid(1);
        let mut q = RacingLocal::default();
        block_on(enter(&q_shm, &r, &mut q));
        // store + scan + 2 slot reads
        assert_eq!(q_shm.steps_of(1), 4);
    }

    #[test]
    fn lap_names_are_deterministic() {
        let r = RacingId("c0:race".into());
        assert_eq!(r.lap(3), "c0:race:lap:3");
        assert_eq!(r.lap(3), r.lap(3));
    }
}
