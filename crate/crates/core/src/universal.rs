//! Universal constructions: turn any serial data type into a linearizable
//! obstruction-free shared object.
//!
//! [`invoke_runiv`] follows a racing on consensus objects; every state
//! change decides a fresh consensus instance, so memory grows without
//! bound. [`invoke_buniv`] recycles a pool of at most `k + 1` consensus
//! instances: every register of a pool object is a stamped cell, each
//! reuse round runs at the next timestamp, and two collect maps (`L` for
//! in-use indices, `F` for decided frontiers) replace the racing.

use std::collections::BTreeSet;

use crate::consensus::{decided, propose, ConsensusId};
use crate::primitives::{adopt_commit, collect_codomain, collect_store, CollectId, GrafariusId};
use crate::racing::{enter, RacingId, RacingLocal};
use crate::record::level;
use crate::registers::next_epoch;
use crate::serial::{OpCall, Serial};
use crate::shm::{read_v, write_v, OpMeta, Shm, Starved, TsShm};
use crate::value::{Flag, V};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnivId(pub String);

impl UnivId {
    pub fn racing(&self) -> RacingId {
        RacingId(format!("{}:race", self.0))
    }

    pub fn cons(&self, n: u64) -> ConsensusId {
        ConsensusId(format!("{}:cons:{}", self.0, n))
    }

    pub fn in_use(&self) -> CollectId {
        CollectId(format!("{}:L", self.0))
    }

    pub fn frontier(&self) -> CollectId {
        CollectId(format!("{}:F", self.0))
    }

    pub fn gamma(&self) -> String {
        format!("{}:gamma", self.0)
    }
}

/// Loop budgets for the obstruction-free retry paths.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    /// Consensus instances visited per invoke.
    pub rounds: u64,
    /// Grafarius laps per consensus propose.
    pub laps: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { rounds: 16, laps: 8 }
    }
}

// ---------------------------------------------------------------------------
// Unbounded construction (racing on consensus objects).
// ---------------------------------------------------------------------------

/// Per-process view of a replicated object.
#[derive(Debug, Clone)]
pub struct RunivLocal {
    state: Option<V>,
    cur: Option<u64>,
    race: RacingLocal,
}

impl Default for RunivLocal {
    fn default() -> Self {
        RunivLocal { state: None, cur: None, race: RacingLocal::default() }
    }
}

fn runiv_payload(pid: u64, state: &V) -> V {
    V::List(vec![V::Nat(pid), state.clone()])
}

fn runiv_state(dec: &V) -> V {
    match dec.list() {
        Some([V::Nat(_), s]) => s.clone(),
        _ => V::None,
    }
}

/// Invoke an operation through the unbounded construction.
///
/// The caller folds decided consensus instances into its local state,
/// executes the operation tentatively, returns straight away when the state
/// is unchanged, and otherwise proposes `(pid, new_state)` to the current
/// consensus, retrying on the next instance after a loss.
pub async fn invoke_runiv<S: Shm>(
    shm: &S,
    u: &UnivId,
    ser: &(dyn Serial + Sync),
    local: &mut RunivLocal,
    op: &OpCall,
    budget: Budget,
) -> Result<V, Starved> {
    shm.begin_op(level::UNIV, &u.0, &op.name, op.arg.clone());
    if local.state.is_none() {
        local.state = Some(ser.init());
    }
    let me = u64::from(shm.pid().0);
    let mut rounds = 0;
    let out = loop {
        if local.cur.is_none() {
            local.cur = Some(enter(shm, &u.racing(), &mut local.race).await);
        }
        let cons = u.cons(local.cur.expect("current lap"));
        let d = decided(shm, &cons).await;
        if !d.is_none() {
            local.state = Some(runiv_state(&d));
            if rounds == budget.rounds {
                break Err(Starved { laps: rounds });
            }
            rounds += 1;
            local.cur = Some(enter(shm, &u.racing(), &mut local.race).await);
            continue;
        }
        let state = local.state.clone().expect("local state");
        let (next, resp) = ser.apply(&state, op);
        if next == state {
            break Ok(resp);
        }
        if rounds == budget.rounds {
            break Err(Starved { laps: rounds });
        }
        rounds += 1;
        let payload = runiv_payload(me, &next);
        match propose(shm, &cons, &payload, budget.laps).await {
            Err(s) => break Err(s),
            Ok(dec) => {
                // Won only when the decision is this exact payload: a stale
                // proposal from an earlier starved attempt by the same
                // process may also carry its id.
                let won = dec == payload;
                local.state = Some(runiv_state(&dec));
                if won {
                    break Ok(resp);
                }
                local.cur = Some(enter(shm, &u.racing(), &mut local.race).await);
            }
        }
    };
    let meta = OpMeta { starved: out.is_err(), ..Default::default() };
    shm.end_op(level::UNIV, out.clone().unwrap_or(V::None), meta);
    out
}

// ---------------------------------------------------------------------------
// Recycling (Constructions 1 and 2 applied to the pool objects).
// ---------------------------------------------------------------------------

/// View of a decidable consensus object recycled at a timestamp: every
/// register access inside runs over stamped cells, and a decided object
/// answers from its decision register alone.
pub fn recycle<S: Shm>(shm: &S, stamp: u64) -> TsShm<S> {
    TsShm::new(shm.clone(), stamp)
}

/// Adopt-commit on a recycled grafarius: once the decision register holds a
/// value, `(adopt, d)` is a sound response for every later call.
pub async fn adopt_commit_recycled<S: Shm>(
    shm: &S,
    g: &GrafariusId,
    stamp: u64,
    u: &V,
) -> (Flag, V) {
    let h = recycle(shm, stamp);
    h.begin_op(level::GRAFARIUS, &g.0, "adopt_commit", u.clone());
    let d = read_v(&h, &g.decision(), &V::None).await;
    let out;
    let mut meta = OpMeta { decisive_seq: Some(h.last_access_seq()), ..Default::default() };
    if d.is_none() {
        out = adopt_commit(&h, g, u).await;
        meta = OpMeta::default();
    } else {
        meta.observed_stamp = h.last_stamp();
        out = (Flag::Adopt, d);
    }
    h.end_op(level::GRAFARIUS, V::pair(out.0.as_v(), out.1.clone()), meta);
    out
}

// ---------------------------------------------------------------------------
// Bounded construction.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BunivLocal {
    state: Option<V>,
    /// Physical pool index and recycling epoch of the consensus instance
    /// this process believes is current.
    idx: u64,
    epoch: u64,
}

impl Default for BunivLocal {
    fn default() -> Self {
        BunivLocal { state: None, idx: 0, epoch: 0 }
    }
}

fn buniv_payload(pid: u64, state: &V, next_idx: u64, next_epoch: u64) -> V {
    V::List(vec![V::Nat(pid), state.clone(), V::Nat(next_idx), V::Nat(next_epoch)])
}

struct BunivDecision {
    state: V,
    next_idx: u64,
    next_epoch: u64,
}

fn buniv_unpack(dec: &V) -> Option<BunivDecision> {
    match dec.list() {
        Some([V::Nat(_), s, V::Nat(l), V::Nat(t)]) => Some(BunivDecision {
            state: s.clone(),
            next_idx: *l,
            next_epoch: *t,
        }),
        _ => None,
    }
}

/// Smallest consensus index not currently announced as in use. With `gamma`
/// tracking the greatest index accessed so far this is the paper's scan of
/// `[0, gamma]` falling back to `gamma + 1`; since at most `k` indices are
/// announced, the result never exceeds `k`, bounding the pool at `k + 1`.
pub async fn free<S: Shm>(shm: &S, u: &UnivId) -> u64 {
    let busy: BTreeSet<u64> =
        collect_codomain(shm, &u.in_use()).await.iter().filter_map(V::nat).collect();
    let mut i = 0;
    while busy.contains(&i) {
        i += 1;
    }
    i
}

/// Announce the index this process is about to access; keeps `gamma`, the
/// greatest index accessed so far, monotonically up to date.
async fn announce_in_use<S: Shm>(shm: &S, u: &UnivId, idx: u64) {
    collect_store(shm, &u.in_use(), &V::Nat(idx)).await;
    let g = read_v(shm, &u.gamma(), &V::Nat(0)).await.nat().unwrap_or(0);
    if idx > g {
        write_v(shm, &u.gamma(), &V::Nat(idx)).await;
    }
}

/// Catch up through the frontier map: adopt the most advanced announced
/// decision, then resume from its successor. Reading the decision cell at
/// the announced stamp may observe an even newer round; its payload is a
/// decided state either way, so folding it is always sound.
async fn catch_up<S: Shm>(shm: &S, u: &UnivId, local: &mut BunivLocal) {
    let mut best: Option<(u64, u64)> = None;
    for entry in collect_codomain(shm, &u.frontier()).await {
        if let Some([V::Nat(l), V::Nat(t)]) = entry.list() {
            if best.map_or(true, |(_, bt)| *t > bt) {
                best = Some((*l, *t));
            }
        }
    }
    let Some((l_dec, t_dec)) = best else { return };
    if t_dec < local.epoch {
        return;
    }
    let h = recycle(shm, t_dec);
    let d = decided(&h, &u.cons(l_dec)).await;
    if let Some(dec) = buniv_unpack(&d) {
        local.state = Some(dec.state);
        local.idx = dec.next_idx;
        local.epoch = dec.next_epoch;
    }
}

/// Invoke an operation through the bounded-memory construction.
pub async fn invoke_buniv<S: Shm>(
    shm: &S,
    u: &UnivId,
    ser: &(dyn Serial + Sync),
    local: &mut BunivLocal,
    op: &OpCall,
    budget: Budget,
) -> Result<V, Starved> {
    shm.begin_op(level::UNIV, &u.0, &op.name, op.arg.clone());
    if local.state.is_none() {
        local.state = Some(ser.init());
    }
    let me = u64::from(shm.pid().0);
    catch_up(shm, u, local).await;
    let mut rounds = 0;
    let out = loop {
        // In-use announcement must precede every access to the pool object,
        // including the decision probe; recycling safety rests on it.
        announce_in_use(shm, u, local.idx).await;
        let cons = u.cons(local.idx);
        let h = recycle(shm, local.epoch);
        let d = decided(&h, &cons).await;
        if let Some(dec) = buniv_unpack(&d) {
            local.state = Some(dec.state);
            local.idx = dec.next_idx;
            local.epoch = dec.next_epoch;
            if rounds == budget.rounds {
                break Err(Starved { laps: rounds });
            }
            rounds += 1;
            continue;
        }
        let state = local.state.clone().expect("local state");
        let (next, resp) = ser.apply(&state, op);
        if next == state {
            break Ok(resp);
        }
        if rounds == budget.rounds {
            break Err(Starved { laps: rounds });
        }
        rounds += 1;
        let next_idx = free(shm, u).await;
        let payload = buniv_payload(me, &next, next_idx, next_epoch(local.epoch));
        match propose(&h, &cons, &payload, budget.laps).await {
            Err(s) => break Err(s),
            Ok(raw) => {
                // Full-payload comparison: a stale proposal left behind by
                // an earlier starved attempt of this same process can get
                // committed here, and it must count as a loss.
                let won = raw == payload;
                let Some(dec) = buniv_unpack(&raw) else {
                    break Err(Starved { laps: rounds });
                };
                let prev = (local.idx, local.epoch);
                local.state = Some(dec.state);
                local.idx = dec.next_idx;
                local.epoch = dec.next_epoch;
                if won {
                    collect_store(shm, &u.frontier(), &V::List(vec![V::Nat(prev.0), V::Nat(prev.1)]))
                        .await;
                    break Ok(resp);
                }
            }
        }
    };
    let meta = OpMeta { starved: out.is_err(), ..Default::default() };
    shm.end_op(level::UNIV, out.clone().unwrap_or(V::None), meta);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::serial::{Cas, Counter};
    use crate::shm::{block_on, SoloShm};

    fn distinct_cons_indices(shm: &SoloShm, u: &UnivId) -> BTreeSet<u64> {
        let prefix = format!("{}:cons:", u.0);
        shm.register_names()
            .iter()
            .filter_map(|n| {
                let rest = n.strip_prefix(&prefix)?;
                rest.split(':').next()?.parse().ok()
            })
            .collect()
    }

    #[test]
    fn runiv_counter_solo() {
        let shm = SoloShm::new();
        let u = UnivId("u".into());
        let mut local = RunivLocal::default();
        block_on(async {
            let r = invoke_runiv(&shm, &u, &Counter, &mut local, &OpCall::new("inc", V::None), Budget::default())
                .await
                .unwrap();
            assert_eq!(r, V::Str("ack".into()));
            let r = invoke_runiv(&shm, &u, &Counter, &mut local, &OpCall::new("inc", V::None), Budget::default())
                .await
                .unwrap();
            assert_eq!(r, V::Str("ack".into()));
            let r = invoke_runiv(&shm, &u, &Counter, &mut local, &OpCall::new("read", V::None), Budget::default())
                .await
                .unwrap();
            assert_eq!(r, V::Nat(2));
        });
    }

    #[test]
    fn runiv_trivial_op_allocates_no_consensus() {
        let shm = SoloShm::new();
        let u = UnivId("u".into());
        let mut local = RunivLocal::default();
        block_on(async {
            invoke_runiv(&shm, &u, &Counter, &mut local, &OpCall::new("inc", V::None), Budget::default())
                .await
                .unwrap();
            let before = distinct_cons_indices(&shm, &u);
            invoke_runiv(&shm, &u, &Counter, &mut local, &OpCall::new("read", V::None), Budget::default())
                .await
                .unwrap();
            let after = distinct_cons_indices(&shm, &u);
            assert_eq!(before, after);
        });
    }

    #[test]
    fn free_picks_smallest_absent_index() {
        let shm = SoloShm::new();
        let u = UnivId("u".into());
        block_on(async {
            // codomain(L) empty: nothing busy.
            assert_eq!(free(&shm, &u).await, 0);
            // codomain(L) = {0}, gamma = 0: everything in [0, 0] busy.
            announce_in_use(&shm, &u, 0).await;
            assert_eq!(free(&shm, &u).await, 1);
            // codomain(L) = {0, 2}: the hole at 1 is reused.
            let q = shm.as_pid(1);
            announce_in_use(&q, &u, 2).await;
            assert_eq!(free(&shm, &u).await, 1);
            assert_eq!(read_v(&shm, &u.gamma(), &V::Nat(0)).await, V::Nat(2));
        });
    }

    #[test]
    fn buniv_counter_solo_uses_at_most_two_instances() {
        let shm = SoloShm::new();
        let u = UnivId("u".into());
        let mut local = BunivLocal::default();
        block_on(async {
            for _ in 0..6 {
                let r = invoke_buniv(&shm, &u, &Counter, &mut local, &OpCall::new("inc", V::None), Budget::default())
                    .await
                    .unwrap();
                assert_eq!(r, V::Str("ack".into()));
            }
            let r = invoke_buniv(&shm, &u, &Counter, &mut local, &OpCall::new("read", V::None), Budget::default())
                .await
                .unwrap();
            assert_eq!(r, V::Nat(6));
        });
        // k = 1: the pool ping-pongs between two physical instances.
        assert!(distinct_cons_indices(&shm, &u).len() <= 2, "pool exceeded k+1");
    }

    #[test]
    fn buniv_two_processes_sequentially() {
        let shm = SoloShm::new();
        let u = UnivId("u".into());
        let op01 = OpCall::new("cas", V::List(vec![V::Nat(0), V::Nat(1)]));
        let op12 = OpCall::new("cas", V::List(vec![V::Nat(1), V::Nat(2)]));
        block_on(async {
            let mut p = BunivLocal::default();
            let mut q = BunivLocal::default();
            let q_shm = shm.as_pid(1);
            let r1 = invoke_buniv(&shm, &u, &Cas, &mut p, &op01, Budget::default()).await.unwrap();
            assert_eq!(r1, V::Bool(true));
            // q starts fresh, catches up via the frontier map, and applies
            // its cas on the current state.
            let r2 = invoke_buniv(&q_shm, &u, &Cas, &mut q, &op12, Budget::default()).await.unwrap();
            assert_eq!(r2, V::Bool(true));
            let r3 = invoke_buniv(&shm, &u, &Cas, &mut p, &op01, Budget::default()).await.unwrap();
            assert_eq!(r3, V::Bool(false));
        });
        assert!(distinct_cons_indices(&shm, &u).len() <= 3, "pool exceeded k+1");
    }

    #[test]
    fn recycled_grafarius_answers_from_decision() {
        let shm = SoloShm::new();
        let g = GrafariusId("g".into());
        block_on(async {
            // Epoch 1 behaves like a fresh object.
            let (f, v) = adopt_commit_recycled(&shm, &g, 1, &V::Str("a".into())).await;
            assert_eq!((f, v), (Flag::Commit, V::Str("a".into())));
            // Same epoch, later caller: sound response is (adopt, d).
            let q = shm.as_pid(1);
            let (f, v) = adopt_commit_recycled(&q, &g, 1, &V::Str("b".into())).await;
            assert_eq!((f, v), (Flag::Adopt, V::Str("a".into())));
            // Next epoch masks the old round entirely.
            let (f, v) = adopt_commit_recycled(&q, &g, 2, &V::Str("b".into())).await;
            assert_eq!((f, v), (Flag::Commit, V::Str("b".into())));
        });
    }

    #[test]
    fn recycled_consensus_epoch_masking() {
        let shm = SoloShm::new();
        let c = ConsensusId("c".into());
        block_on(async {
            // Epoch 1: fresh consensus decides the proposal.
            let h = recycle(&shm, 1);
            assert_eq!(propose(&h, &c, &V::Str("a".into()), 4).await.unwrap(), V::Str("a".into()));
            // Epoch 1 handle short-circuits to the decision.
            let h2 = recycle(&shm.as_pid(1), 1);
            assert_eq!(propose(&h2, &c, &V::Str("b".into()), 4).await.unwrap(), V::Str("a".into()));
            // Epoch 2 sees an undecided object again.
            let h3 = recycle(&shm.as_pid(1), 2);
            assert_eq!(propose(&h3, &c, &V::Str("b".into()), 4).await.unwrap(), V::Str("b".into()));
        });
    }
}
