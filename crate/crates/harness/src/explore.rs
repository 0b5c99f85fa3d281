//! Schedule exploration: exhaustive interleaving enumeration with replay,
//! commutation pruning, and seeded random scheduling beyond the exhaustive
//! bounds.
//!
//! Exhaustive mode walks the schedule tree depth-first, re-executing the
//! program from scratch for each tree node (futures cannot be snapshotted).
//! A branch is pruned when it merely commutes with the previous step: the
//! two steps are by different processes, touch different registers, and the
//! previous step emitted no history events — the swapped schedule produces a
//! bit-identical history and is enumerated elsewhere. Runs that exceed the
//! step bound are reported as truncated, never dropped silently.

use ofuc_core::rng::SplitMix64;
use ofuc_core::History;

use crate::world::{Program, Runner};

#[derive(Debug, Clone)]
pub struct Bounds {
    /// Total register accesses across all processes.
    pub max_steps: u64,
    pub prune: bool,
}

impl Default for Bounds {
    fn default() -> Self {
        // Exhaustive defaults: up to 3 processes and 24 total steps; larger
        // runs go through seeded random schedules.
        Bounds { max_steps: 24, prune: true }
    }
}

impl Bounds {
    pub fn steps(max_steps: u64) -> Self {
        Bounds { max_steps, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExploreStats {
    /// Leaf runs (complete + truncated).
    pub runs: u64,
    pub complete: u64,
    pub truncated: u64,
    /// Replays performed (tree nodes).
    pub nodes: u64,
    pub pruned: u64,
}

impl ExploreStats {
    fn merge(mut self, o: ExploreStats) -> ExploreStats {
        self.runs += o.runs;
        self.complete += o.complete;
        self.truncated += o.truncated;
        self.nodes += o.nodes;
        self.pruned += o.pruned;
        self
    }
}

fn replay(program: &Program, prefix: &[u16]) -> Runner {
    let mut r = Runner::new(program);
    for &p in prefix {
        r.step(p);
    }
    r
}

/// Branches to explore from the current runner state, commutation-pruned.
fn branches(r: &Runner, bounds: &Bounds) -> (Vec<u16>, u64) {
    let en = r.enabled();
    if !bounds.prune {
        return (en, 0);
    }
    let last = r.w.borrow().last_step.clone();
    let Some(last) = last else { return (en, 0) };
    let Some(last_key) = last.key else { return (en, 0) };
    if last.emitted {
        return (en, 0);
    }
    let mut out = Vec::with_capacity(en.len());
    let mut pruned = 0;
    for p in en {
        let independent = u32::from(p) < last.pid
            && match r.want_step(p) {
                // Different keys always commute; same-key reads commute too.
                Some((Some(k), wr)) => k != last_key || (!wr && !last.wrote),
                _ => false,
            };
        if independent {
            pruned += 1;
        } else {
            out.push(p);
        }
    }
    (out, pruned)
}

/// Depth-first exhaustive exploration; `on_history(history, complete)` is
/// called once per leaf run.
pub fn explore<F>(program: &Program, bounds: &Bounds, mut on_history: F) -> ExploreStats
where
    F: FnMut(&History, bool),
{
    let mut stats = ExploreStats::default();
    let mut stack: Vec<Vec<u16>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        explore_node(program, bounds, &prefix, &mut stats, &mut stack, &mut on_history);
    }
    stats
}

fn explore_node<F>(
    program: &Program,
    bounds: &Bounds,
    prefix: &[u16],
    stats: &mut ExploreStats,
    stack: &mut Vec<Vec<u16>>,
    on_history: &mut F,
) where
    F: FnMut(&History, bool),
{
    let mut r = replay(program, prefix);
    stats.nodes += 1;
    if r.all_done() {
        stats.runs += 1;
        stats.complete += 1;
        on_history(&r.history(), true);
        return;
    }
    if r.total_steps() >= bounds.max_steps {
        stats.runs += 1;
        stats.truncated += 1;
        on_history(&r.history(), false);
        return;
    }
    let (bs, pruned) = branches(&r, bounds);
    stats.pruned += pruned;
    for &b in bs.iter().rev() {
        let mut next = Vec::with_capacity(prefix.len() + 1);
        next.extend_from_slice(prefix);
        next.push(b);
        stack.push(next);
    }
}

/// Exhaustive exploration fanned out over worker threads at the granularity
/// of independent schedule prefixes. Results merge deterministically; the
/// callback observes the same set of leaf histories as [`explore`].
#[cfg(feature = "parallel")]
pub fn explore_par<F>(program: &Program, bounds: &Bounds, on_history: F) -> ExploreStats
where
    F: Fn(&History, bool) + Sync,
{
    use rayon::prelude::*;

    // Subtree sizes are heavily skewed (contended interleavings dominate),
    // so fan out over many prefixes to keep the workers balanced.
    let target = rayon::current_num_threads().max(2) * 4096;
    let mut stats = ExploreStats::default();
    let mut frontier: Vec<Vec<u16>> = vec![Vec::new()];
    // Widen the frontier breadth-first until it is worth fanning out.
    for _ in 0..24 {
        if frontier.len() >= target {
            break;
        }
        let mut next = Vec::new();
        for prefix in frontier.drain(..) {
            let mut r = replay(program, &prefix);
            stats.nodes += 1;
            if r.all_done() {
                stats.runs += 1;
                stats.complete += 1;
                on_history(&r.history(), true);
                continue;
            }
            if r.total_steps() >= bounds.max_steps {
                stats.runs += 1;
                stats.truncated += 1;
                on_history(&r.history(), false);
                continue;
            }
            let (bs, pruned) = branches(&r, bounds);
            stats.pruned += pruned;
            for &b in &bs {
                let mut p = prefix.clone();
                p.push(b);
                next.push(p);
            }
        }
        frontier = next;
        if frontier.is_empty() {
            return stats;
        }
    }
    let sub = frontier
        .par_iter()
        .with_max_len(1)
        .map(|prefix| {
            let mut st = ExploreStats::default();
            let mut stack = vec![prefix.clone()];
            while let Some(p) = stack.pop() {
                let mut f = |h: &History, c: bool| on_history(h, c);
                explore_node(program, bounds, &p, &mut st, &mut stack, &mut f);
            }
            st
        })
        .reduce(ExploreStats::default, ExploreStats::merge);
    stats.merge(sub)
}

#[cfg(not(feature = "parallel"))]
pub fn explore_par<F>(program: &Program, bounds: &Bounds, on_history: F) -> ExploreStats
where
    F: Fn(&History, bool) + Sync,
{
    let mut f = on_history;
    explore(program, bounds, &mut f)
}

/// One seeded random schedule; returns the history and whether it ran to
/// completion within the step bound.
pub fn run_random(program: &Program, seed: u64, max_steps: u64) -> (History, bool) {
    let mut rng = SplitMix64::new(seed);
    let mut r = Runner::new(program);
    loop {
        if r.all_done() {
            return (r.history(), true);
        }
        if r.total_steps() >= max_steps {
            return (r.history(), false);
        }
        let en = r.enabled();
        if en.is_empty() {
            return (r.history(), r.all_done());
        }
        let pick = en[rng.below(en.len() as u64) as usize];
        r.step(pick);
    }
}

/// Replay an explicit schedule (round-robin over its entries when a listed
/// process is disabled, the entry is skipped). Used for determinism checks.
pub fn run_scripted(program: &Program, schedule: &[u16], max_steps: u64) -> (History, bool) {
    let mut r = Runner::new(program);
    for &p in schedule {
        if r.all_done() || r.total_steps() >= max_steps {
            break;
        }
        if r.enabled().contains(&p) {
            r.step(p);
        }
    }
    // Drain deterministically so the run completes if it can.
    while !r.all_done() && r.total_steps() < max_steps {
        let en = r.enabled();
        if en.is_empty() {
            break;
        }
        r.step(en[0]);
    }
    (r.history(), r.all_done())
}

/// Map a list of jobs across worker threads (sequentially without the
/// `parallel` feature); output order matches input order either way.
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Exploration plus a per-history property check; failures are capped.
pub struct CheckOutcome {
    pub stats: ExploreStats,
    pub violations: Vec<String>,
}

impl CheckOutcome {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn explore_check<C>(program: &Program, bounds: &Bounds, check: C) -> CheckOutcome
where
    C: Fn(&History, bool) -> Result<(), String> + Sync,
{
    use std::hash::{Hash, Hasher};
    // Many schedules record the same event sequence; run the property check
    // once per distinct history.
    let seen = std::sync::Mutex::new(std::collections::HashSet::new());
    let violations = std::sync::Mutex::new(Vec::new());
    let stats = explore_par(program, bounds, |h, complete| {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        h.hash(&mut hasher);
        complete.hash(&mut hasher);
        let key = hasher.finish();
        if !seen.lock().expect("seen lock").insert(key) {
            return;
        }
        if let Err(e) = check(h, complete) {
            let mut v = violations.lock().expect("violations lock");
            if v.len() < 8 {
                v.push(e);
            }
        }
    });
    CheckOutcome { stats, violations: violations.into_inner().expect("violations") }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proc_fn;
    use crate::world::HarnessShm;
    use ofuc_core::shm::Shm;
    use ofuc_core::value::V;

    /// Each process performs `k` writes to its own register.
    fn disjoint_writers(n: usize, k: usize) -> Program {
        let procs = (0..n)
            .map(|i| {
                proc_fn!(move |shm: HarnessShm| async move {
                    for j in 0..k {
                        shm.write(&format!("r{i}"), V::Nat(j as u64).encode()).await;
                    }
                })
            })
            .collect();
        Program::new(0, procs)
    }

    #[test]
    fn single_process_has_one_schedule() {
        let prog = disjoint_writers(1, 3);
        let stats = explore(&prog, &Bounds::steps(100), |_, complete| assert!(complete));
        assert_eq!(stats.runs, 1);
        assert_eq!(stats.complete, 1);
    }

    #[test]
    fn two_by_two_gives_six_schedules_before_pruning() {
        let prog = disjoint_writers(2, 2);
        let stats = explore(&prog, &Bounds { max_steps: 100, prune: false }, |_, _| {});
        assert_eq!(stats.complete, 6); // C(4, 2)
    }

    #[test]
    fn pruning_collapses_commuting_schedules() {
        let prog = disjoint_writers(2, 2);
        let mut n = 0;
        let stats = explore(&prog, &Bounds::steps(100), |_, complete| {
            assert!(complete);
            n += 1;
        });
        // All registers are disjoint and no events are recorded, so a single
        // canonical schedule remains.
        assert_eq!(stats.complete, 1);
        assert_eq!(n, 1);
    }

    #[test]
    fn pruned_and_unpruned_agree_on_conflicting_histories() {
        use ofuc_core::record::level;
        use ofuc_core::registers::{read_op, write_op, RegisterId};
        use std::collections::BTreeSet;

        // Two processes race read/write on one register; histories differ.
        let mk = || {
            Program::new(
                level::REG,
                vec![
                    proc_fn!(|shm: HarnessShm| async move {
                        write_op(&shm, &RegisterId::from("r"), &V::Nat(5)).await;
                    }),
                    proc_fn!(|shm: HarnessShm| async move {
                        let _ = read_op(&shm, &RegisterId::from("r"), &V::Nat(0)).await;
                    }),
                ],
            )
        };
        let collect = |prune: bool| {
            let mut set = BTreeSet::new();
            explore(&mk(), &Bounds { max_steps: 100, prune }, |h, _| {
                set.insert(h.to_jsonl());
            });
            set
        };
        assert_eq!(collect(true), collect(false));
    }

    #[test]
    fn truncation_is_reported() {
        let prog = disjoint_writers(1, 10);
        let stats = explore(&prog, &Bounds::steps(4), |_, complete| assert!(!complete));
        assert_eq!(stats.truncated, 1);
    }

    #[test]
    fn scripted_runs_replay_bit_identically() {
        let mk = || disjoint_writers(3, 2);
        let (h1, _) = run_scripted(&mk(), &[0, 1, 2, 2, 1, 0], 100);
        let (h2, _) = run_scripted(&mk(), &[0, 1, 2, 2, 1, 0], 100);
        assert_eq!(h1.to_jsonl(), h2.to_jsonl());
        let (h3, c) = run_random(&mk(), 9, 100);
        let (h4, _) = run_random(&mk(), 9, 100);
        assert!(c);
        assert_eq!(h3.to_jsonl(), h4.to_jsonl());
    }
}
