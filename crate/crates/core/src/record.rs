//! History recording: invocation/response events, JSONL serialization, and
//! the per-run recorder shared by every substrate implementation.
//!
//! The on-disk format is one event per line with exactly the fields
//! `(seq, kind, proc, obj, op, args, res, epoch, steps)`. Checker-only
//! metadata lives in [`EvMeta`] and is never serialized.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::value::V;

/// Recording levels; each shared-object layer records under its own bit so
/// suites pay only for the histories they inspect.
pub mod level {
    pub const REG: u32 = 1;
    pub const SPLITTER: u32 = 1 << 1;
    pub const GRAFARIUS: u32 = 1 << 2;
    pub const RACING: u32 = 1 << 3;
    pub const CONS: u32 = 1 << 4;
    pub const UNIV: u32 = 1 << 5;
    pub const ALL: u32 = u32::MAX;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Invoke,
    Response,
}

/// Checker-facing metadata attached to responses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct EvMeta {
    pub level: u32,
    /// The operation wrote the object's decision register.
    pub wrote_decision: bool,
    /// Stamp of the decision cell this operation observed, when it returned
    /// a short-circuited decision.
    pub observed_stamp: Option<u64>,
    /// Global substrate step at which the operation last touched the
    /// decision register (write, or the read it returned from).
    pub decisive_seq: Option<u64>,
    /// The call hit its loop budget instead of completing.
    pub starved: bool,
}

#[derive(Debug, Clone, PartialEq, Hash, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub kind: EventKind,
    pub proc: u32,
    pub obj: String,
    pub op: String,
    pub args: V,
    pub res: V,
    pub epoch: Option<u64>,
    pub steps: u64,
    #[serde(skip)]
    pub meta: EvMeta,
}

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("line {0}: {1}")]
    Parse(usize, serde_json::Error),
    #[error("seq not strictly increasing at line {0}")]
    SeqOrder(usize),
}

/// A recorded run: the sequence of invocation and response events.
#[derive(Debug, Clone, Default, PartialEq, Hash)]
pub struct History(pub Vec<Event>);

impl History {
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for ev in &self.0 {
            s.push_str(&serde_json::to_string(ev).expect("event serializes"));
            s.push('\n');
        }
        s
    }

    pub fn from_jsonl(text: &str) -> Result<History, HistoryError> {
        let mut events = Vec::new();
        let mut last_seq = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ev: Event = serde_json::from_str(line).map_err(|e| HistoryError::Parse(i + 1, e))?;
            if let Some(prev) = last_seq {
                if ev.seq <= prev {
                    return Err(HistoryError::SeqOrder(i + 1));
                }
            }
            last_seq = Some(ev.seq);
            events.push(ev);
        }
        Ok(History(events))
    }

    /// Pair invocations with responses. Starved responses are reported as
    /// pending operations (no response), matching their logical status.
    pub fn ops(&self) -> Vec<OpRec> {
        let mut open: HashMap<(u32, String), usize> = HashMap::new();
        let mut out: Vec<OpRec> = Vec::new();
        for ev in &self.0 {
            match ev.kind {
                EventKind::Invoke => {
                    let idx = out.len();
                    out.push(OpRec {
                        proc: ev.proc,
                        obj: ev.obj.clone(),
                        op: ev.op.clone(),
                        args: ev.args.clone(),
                        res: None,
                        inv_seq: ev.seq,
                        resp_seq: None,
                        inv_steps: ev.steps,
                        resp_steps: None,
                        epoch: ev.epoch,
                        meta: ev.meta,
                    });
                    let prev = open.insert((ev.proc, ev.obj.clone()), idx);
                    debug_assert!(prev.is_none(), "nested op on one object by one process");
                }
                EventKind::Response => {
                    if let Some(idx) = open.remove(&(ev.proc, ev.obj.clone())) {
                        let rec = &mut out[idx];
                        rec.epoch = rec.epoch.or(ev.epoch);
                        rec.meta = ev.meta;
                        rec.resp_steps = Some(ev.steps);
                        if !ev.meta.starved {
                            rec.res = Some(ev.res.clone());
                            rec.resp_seq = Some(ev.seq);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn ops_on(&self, obj: &str) -> Vec<OpRec> {
        self.ops().into_iter().filter(|o| o.obj == obj).collect()
    }

    /// Object names appearing in the history, in first-seen order.
    pub fn objects(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for ev in &self.0 {
            if !seen.iter().any(|s| s == &ev.obj) {
                seen.push(ev.obj.clone());
            }
        }
        seen
    }
}

/// One paired operation from a history.
#[derive(Debug, Clone, PartialEq)]
pub struct OpRec {
    pub proc: u32,
    pub obj: String,
    pub op: String,
    pub args: V,
    pub res: Option<V>,
    pub inv_seq: u64,
    pub resp_seq: Option<u64>,
    pub inv_steps: u64,
    pub resp_steps: Option<u64>,
    pub epoch: Option<u64>,
    pub meta: EvMeta,
}

impl OpRec {
    /// Real-time precedence: this call returned before `other` was invoked.
    pub fn precedes(&self, other: &OpRec) -> bool {
        match self.resp_seq {
            Some(r) => r < other.inv_seq,
            None => false,
        }
    }

    /// Register accesses spent inside the call, when it completed.
    pub fn step_cost(&self) -> Option<u64> {
        self.resp_steps.map(|r| r - self.inv_steps)
    }
}

struct OpFrame {
    level: u32,
    obj: String,
    op: String,
    args: V,
    epoch: Option<u64>,
}

/// Shared recorder: event log, per-process step counters, and op nesting
/// depth. Substrates call into it from their access paths.
#[derive(Default)]
pub struct Recorder {
    pub mask: u32,
    /// Delay invocation events until the op's first register access, so an
    /// operation's recorded interval spans exactly its shared steps.
    pub defer_invokes: bool,
    events: Vec<Event>,
    next_seq: u64,
    steps: Vec<u64>,
    depth: Vec<u32>,
    frames: Vec<Vec<OpFrame>>,
    pending_inv: Vec<Vec<Event>>,
    global_steps: u64,
    last_access_seq: Vec<u64>,
    pub emitted_in_step: bool,
}

impl Recorder {
    pub fn new(mask: u32, defer_invokes: bool) -> Self {
        Recorder { mask, defer_invokes, ..Default::default() }
    }

    fn ensure(&mut self, pid: usize) {
        if self.steps.len() <= pid {
            self.steps.resize(pid + 1, 0);
            self.depth.resize(pid + 1, 0);
            self.frames.resize_with(pid + 1, Vec::new);
            self.pending_inv.resize_with(pid + 1, Vec::new);
            self.last_access_seq.resize(pid + 1, 0);
        }
    }

    fn push_event(&mut self, mut ev: Event) {
        ev.seq = self.next_seq;
        self.next_seq += 1;
        self.emitted_in_step = true;
        self.events.push(ev);
    }

    pub fn begin_op(&mut self, pid: u32, lvl: u32, obj: &str, op: &str, args: V, epoch: Option<u64>) {
        let p = pid as usize;
        self.ensure(p);
        self.depth[p] += 1;
        if self.mask & lvl == 0 {
            return;
        }
        self.frames[p].push(OpFrame {
            level: lvl,
            obj: obj.to_string(),
            op: op.to_string(),
            args: args.clone(),
            epoch,
        });
        let ev = Event {
            seq: 0,
            kind: EventKind::Invoke,
            proc: pid,
            obj: obj.to_string(),
            op: op.to_string(),
            args,
            res: V::None,
            epoch,
            steps: self.steps[p],
            meta: EvMeta { level: lvl, ..Default::default() },
        };
        if self.defer_invokes {
            self.pending_inv[p].push(ev);
        } else {
            self.push_event(ev);
        }
    }

    pub fn end_op(&mut self, pid: u32, lvl: u32, res: V, epoch: Option<u64>, meta: EvMeta) {
        let p = pid as usize;
        self.ensure(p);
        debug_assert!(self.depth[p] > 0, "end_op without begin_op");
        self.depth[p] = self.depth[p].saturating_sub(1);
        if self.mask & lvl == 0 {
            return;
        }
        self.flush_invokes(p);
        let frame = self.frames[p].pop().expect("op frame");
        let ev = Event {
            seq: 0,
            kind: EventKind::Response,
            proc: pid,
            obj: frame.obj,
            op: frame.op,
            args: frame.args,
            res,
            epoch: epoch.or(frame.epoch),
            steps: self.steps[p],
            meta: EvMeta { level: frame.level, ..meta },
        };
        self.push_event(ev);
    }

    fn flush_invokes(&mut self, p: usize) {
        if self.pending_inv[p].is_empty() {
            return;
        }
        let evs = std::mem::take(&mut self.pending_inv[p]);
        for mut ev in evs {
            ev.steps = self.steps[p];
            self.push_event(ev);
        }
    }

    /// Account one register access by `pid`; returns the global step index.
    pub fn on_access(&mut self, pid: u32) -> u64 {
        let p = pid as usize;
        self.ensure(p);
        self.flush_invokes(p);
        self.steps[p] += 1;
        self.global_steps += 1;
        self.last_access_seq[p] = self.global_steps;
        self.global_steps
    }

    pub fn last_access_seq(&self, pid: u32) -> u64 {
        self.last_access_seq.get(pid as usize).copied().unwrap_or(0)
    }

    pub fn op_depth(&self, pid: u32) -> u32 {
        self.depth.get(pid as usize).copied().unwrap_or(0)
    }

    pub fn steps_of(&self, pid: u32) -> u64 {
        self.steps.get(pid as usize).copied().unwrap_or(0)
    }

    pub fn total_steps(&self) -> u64 {
        self.global_steps
    }

    pub fn history(&self) -> History {
        History(self.events.clone())
    }

    pub fn take_history(&mut self) -> History {
        History(std::mem::take(&mut self.events))
    }
}
