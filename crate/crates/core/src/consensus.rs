//! Obstruction-free consensus from a racing on grafarius objects plus a
//! decision register.
//!
//! A proposer repeatedly enters the next grafarius lap, runs adopt-commit
//! with its current proposal, and replaces the proposal with whatever comes
//! back. A committed value is written to the decision register and returned;
//! any call that finds the register decided returns it immediately.

use crate::primitives::{adopt_commit, GrafariusId};
use crate::racing::{enter, RacingId, RacingLocal};
use crate::record::level;
use crate::shm::{read_v, write_v, OpMeta, Shm, Starved};
use crate::value::{Flag, V};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusId(pub String);

impl ConsensusId {
    pub fn decision(&self) -> String {
        format!("{}:d", self.0)
    }

    pub fn racing(&self) -> RacingId {
        RacingId(format!("{}:race", self.0))
    }

    /// Grafarius lap objects are materialized lazily by name.
    pub fn grafarius(&self, lap: u64) -> GrafariusId {
        GrafariusId(format!("{}:grafarius:{}", self.0, lap))
    }
}

/// Propose `u`; returns the decided value, or [`Starved`] once `lap_budget`
/// grafarius laps were exhausted without a decision (obstruction-freedom
/// only promises termination to an eventually-solo caller).
pub async fn propose<S: Shm>(
    shm: &S,
    c: &ConsensusId,
    u: &V,
    lap_budget: u64,
) -> Result<V, Starved> {
    shm.begin_op(level::CONS, &c.0, "propose", u.clone());
    let mut meta = OpMeta::default();
    let mut race = RacingLocal::default();
    let mut val = u.clone();
    let mut laps = 0;
    let out = loop {
        let d = read_v(shm, &c.decision(), &V::None).await;
        if !d.is_none() {
            meta.observed_stamp = shm.last_stamp();
            meta.decisive_seq = Some(shm.last_access_seq());
            break Ok(d);
        }
        if laps == lap_budget {
            meta.starved = true;
            break Err(Starved { laps });
        }
        laps += 1;
        let lap = enter(shm, &c.racing(), &mut race).await;
        let (flag, v) = adopt_commit(shm, &c.grafarius(lap), &val).await;
        val = v;
        if flag == Flag::Commit {
            write_v(shm, &c.decision(), &val).await;
            meta.wrote_decision = true;
            meta.decisive_seq = Some(shm.last_access_seq());
            break Ok(val);
        }
    };
    let res = out.clone().unwrap_or(V::None);
    shm.end_op(level::CONS, res, meta);
    out
}

/// Read the decision register: the decided value, or undecided.
pub async fn decided<S: Shm>(shm: &S, c: &ConsensusId) -> V {
    shm.begin_op(level::CONS, &c.0, "decided", V::None);
    let d = read_v(shm, &c.decision(), &V::None).await;
    let mut meta = OpMeta::default();
    meta.decisive_seq = Some(shm.last_access_seq());
    if !d.is_none() {
        meta.observed_stamp = shm.last_stamp();
    }
    shm.end_op(level::CONS, d.clone(), meta);
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shm::{block_on, SoloShm};

    #[test]
    fn solo_propose_decides_own_value() {
        let shm = SoloShm::new();
        let c = ConsensusId("c".into());
        let got = block_on(propose(&shm, &c, &V::Str("a".into()), 3)).unwrap();
        assert_eq!(got, V::Str("a".into()));
        // Frozen solo step count: decision read (1), racing enter (3),
        // grafarius (6), decision write (1).
        assert_eq!(shm.steps_of(0), 11);
    }

    #[test]
    fn later_proposer_returns_decided_value() {
        let shm = SoloShm::new();
        let c = ConsensusId("c".into());
        assert_eq!(block_on(propose(&shm, &c, &V::Str("a".into()), 3)).unwrap(), V::Str("a".into()));
        let q = shm.as_pid(1);
        assert_eq!(block_on(propose(&q, &c, &V::Str("b".into()), 3)).unwrap(), V::Str("a".into()));
        // One read of the decision register suffices.
        assert_eq!(q.steps_of(1), 1);
    }

    #[test]
    fn decided_tracks_decision_register() {
        let shm = SoloShm::new();
        let c = ConsensusId("c".into());
        assert_eq!(block_on(decided(&shm, &c)), V::None);
        block_on(propose(&shm, &c, &V::Nat(4), 3)).unwrap();
        assert_eq!(block_on(decided(&shm, &c)), V::Nat(4));
    }

    #[test]
    fn zero_budget_starves_when_undecided() {
        let shm = SoloShm::new();
        let c = ConsensusId("c".into());
        assert_eq!(block_on(propose(&shm, &c, &V::Nat(1), 0)), Err(Starved { laps: 0 }));
        // A decided instance still returns despite a zero budget.
        block_on(propose(&shm, &c, &V::Nat(2), 1)).unwrap();
        assert_eq!(block_on(propose(&shm, &c, &V::Nat(3), 0)), Ok(V::Nat(2)));
    }
}
