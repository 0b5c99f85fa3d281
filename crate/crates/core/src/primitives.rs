//! One-shot coordination primitives: splitter, store-collect map, and the
//! grafarius (an adopt-commit object with solo convergence and continuation).

use std::collections::BTreeSet;

use crate::record::level;
use crate::shm::{read_v, write_v, OpMeta, Shm};
use crate::value::{Flag, V};

// ---------------------------------------------------------------------------
// Splitter
// ---------------------------------------------------------------------------

/// One-shot splitter. At most one concurrent caller wins; a solo caller
/// always wins; a caller starting after any call returned always loses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitterId(pub String);

impl SplitterId {
    fn owner(&self) -> String {
        format!("{}:owner", self.0)
    }
    fn door(&self) -> String {
        format!("{}:door", self.0)
    }
}

/// Owner-then-door protocol; a solo call costs exactly four register
/// accesses (write owner, read door, write door, read owner).
pub async fn split<S: Shm>(shm: &S, s: &SplitterId) -> bool {
    shm.begin_op(level::SPLITTER, &s.0, "split", V::None);
    let me = V::Nat(u64::from(shm.pid().0));
    write_v(shm, &s.owner(), &me).await;
    let door_closed = read_v(shm, &s.door(), &V::Bool(false)).await == V::Bool(true);
    let won = if door_closed {
        false
    } else {
        write_v(shm, &s.door(), &V::Bool(true)).await;
        read_v(shm, &s.owner(), &V::None).await == me
    };
    shm.end_op(level::SPLITTER, V::Bool(won), OpMeta::default());
    won
}

// ---------------------------------------------------------------------------
// Store-collect map
// ---------------------------------------------------------------------------

/// Shared map from process ids to values, for an unknown but bounded set of
/// participants. Each process owns one single-writer slot register; the
/// substrate's prefix scan serves as the registration directory, so a store
/// is one access and a collect is `1 + k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectId(pub String);

impl CollectId {
    pub fn slot_prefix(&self) -> String {
        format!("{}:slot:", self.0)
    }
}

pub async fn collect_store<S: Shm>(shm: &S, m: &CollectId, v: &V) {
    let key = format!("{}{}", m.slot_prefix(), shm.pid());
    write_v(shm, &key, v).await;
}

/// Collect every registered slot, one atomic read per slot (a collect, not a
/// snapshot), and return the set of values.
pub async fn collect_codomain<S: Shm>(shm: &S, m: &CollectId) -> BTreeSet<V> {
    let names = shm.scan(&m.slot_prefix()).await;
    let mut out = BTreeSet::new();
    for name in names {
        let v = read_v(shm, &name, &V::None).await;
        if !v.is_none() {
            out.insert(v);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Grafarius
// ---------------------------------------------------------------------------

/// Grafarius state: a splitter, a collision flag `c`, and a decision
/// register `d` (initially undecided).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrafariusId(pub String);

impl GrafariusId {
    pub fn splitter(&self) -> SplitterId {
        SplitterId(format!("{}:s", self.0))
    }
    pub fn collision(&self) -> String {
        format!("{}:c", self.0)
    }
    pub fn decision(&self) -> String {
        format!("{}:d", self.0)
    }
}

/// One-shot adopt-commit with weak (solo) convergence and continuation.
///
/// Losing the splitter raises the collision flag, then adopts the recorded
/// decision if any; finding none, it records and adopts its own value, so
/// the decision register is non-empty after every completed call (the
/// continuation property needs exactly that: a caller arriving after any
/// return must find some earlier proposal in `d`). Winning writes the
/// decision first and only then checks the collision flag; committing
/// requires the flag to still be clear.
pub async fn adopt_commit<S: Shm>(shm: &S, g: &GrafariusId, u: &V) -> (Flag, V) {
    shm.begin_op(level::GRAFARIUS, &g.0, "adopt_commit", u.clone());
    let mut meta = OpMeta::default();
    let out = if !split(shm, &g.splitter()).await {
        write_v(shm, &g.collision(), &V::Bool(true)).await;
        let d = read_v(shm, &g.decision(), &V::None).await;
        meta.decisive_seq = Some(shm.last_access_seq());
        if d.is_none() {
            write_v(shm, &g.decision(), u).await;
            meta.wrote_decision = true;
            meta.decisive_seq = Some(shm.last_access_seq());
            (Flag::Adopt, u.clone())
        } else {
            meta.observed_stamp = shm.last_stamp();
            (Flag::Adopt, d)
        }
    } else {
        write_v(shm, &g.decision(), u).await;
        meta.wrote_decision = true;
        meta.decisive_seq = Some(shm.last_access_seq());
        let collided = read_v(shm, &g.collision(), &V::Bool(false)).await == V::Bool(true);
        if collided {
            (Flag::Adopt, u.clone())
        } else {
            (Flag::Commit, u.clone())
        }
    };
    shm.end_op(level::GRAFARIUS, V::pair(out.0.as_v(), out.1.clone()), meta);
    out
}

/// Read the grafarius decision register. Once decided, `(adopt, d)` is a
/// sound response for any call, which makes the grafarius recyclable.
pub async fn grafarius_decision<S: Shm>(shm: &S, g: &GrafariusId) -> V {
    read_v(shm, &g.decision(), &V::None).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shm::{block_on, SoloShm};

    #[test]
    fn solo_split_wins_in_four_steps() {
        let shm = SoloShm::new();
        let won = block_on(split(&shm, &SplitterId("s".into())));
        assert!(won);
        assert_eq!(shm.steps_of(0), 4);
    }

    #[test]
    fn late_caller_loses() {
        let shm = SoloShm::new();
        let s = SplitterId("s".into());
        assert!(block_on(split(&shm, &s)));
        let q = shm.as_pid(1);
        assert!(!block_on(split(&q, &s)));
    }

    #[test]
    fn store_overwrites_own_slot_only() {
        let shm = SoloShm::new();
        let m = CollectId("L".into());
        block_on(async {
            collect_store(&shm, &m, &V::Nat(0)).await;
            assert_eq!(collect_codomain(&shm, &m).await, BTreeSet::from([V::Nat(0)]));
            collect_store(&shm, &m, &V::Nat(1)).await;
            collect_store(&shm, &m, &V::Nat(4)).await;
            assert_eq!(collect_codomain(&shm, &m).await, BTreeSet::from([V::Nat(4)]));
            let q = shm.as_pid(1);
            collect_store(&q, &m, &V::Nat(7)).await;
            collect_store(&shm, &m, &V::Nat(2)).await;
            assert_eq!(collect_codomain(&shm, &m).await, BTreeSet::from([V::Nat(2), V::Nat(7)]));
        });
    }

    #[test]
    fn empty_collect_is_empty() {
        let shm = SoloShm::new();
        let m = CollectId("L".into());
        assert!(block_on(collect_codomain(&shm, &m)).is_empty());
    }

    #[test]
    fn solo_adopt_commit_commits() {
        let shm = SoloShm::new();
        let g = GrafariusId("g".into());
        let (f, v) = block_on(adopt_commit(&shm, &g, &V::Str("a".into())));
        assert_eq!((f, v), (Flag::Commit, V::Str("a".into())));
        // Splitter 4 + decision write + collision read.
        assert_eq!(shm.steps_of(0), 6);
    }

    #[test]
    fn later_caller_adopts_committed_value() {
        let shm = SoloShm::new();
        let g = GrafariusId("g".into());
        let a = V::Str("a".into());
        let b = V::Str("b".into());
        assert_eq!(block_on(adopt_commit(&shm, &g, &a)), (Flag::Commit, a.clone()));
        let q = shm.as_pid(1);
        // q loses the splitter, sees the decision, adopts it.
        assert_eq!(block_on(adopt_commit(&q, &g, &b)), (Flag::Adopt, a));
    }
}
