//! The shared-memory substrate interface.
//!
//! Every algorithm in this crate is written against [`Shm`]: linearizable
//! multi-writer multi-reader registers addressed by string keys, created
//! lazily on first write, plus a prefix scan that lists written keys (the
//! directory a store-collect needs when participants are unknown). Each
//! `read`/`write`/`scan` is one atomic step; everything between accesses is
//! process-local.
//!
//! Implementations: the deterministic scheduler world (harness crate), the
//! quorum-replicated message-passing emulation (netsim crate), and the
//! in-process [`SoloShm`] below for sequential runs.

use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;
use std::future::Future;
use std::rc::Rc;

use crate::record::{level, EvMeta, History, Recorder};
use crate::value::{Bytes, V};

/// Process identity. Algorithms use it only for equality tests and for
/// deriving single-writer register names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pid(pub u32);

impl std::fmt::Display for Pid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "p{:03}", self.0)
    }
}

/// Metadata handed to `end_op`; flows into [`EvMeta`] on the response event.
#[derive(Debug, Clone, Copy, Default)]
pub struct OpMeta {
    pub wrote_decision: bool,
    pub observed_stamp: Option<u64>,
    pub decisive_seq: Option<u64>,
    pub starved: bool,
}

impl OpMeta {
    pub fn into_ev(self) -> EvMeta {
        EvMeta {
            level: 0,
            wrote_decision: self.wrote_decision,
            observed_stamp: self.observed_stamp,
            decisive_seq: self.decisive_seq,
            starved: self.starved,
        }
    }
}

/// A call that exceeded its loop budget under contention. Obstruction-free
/// code cannot promise termination, so the harness surfaces this instead of
/// hanging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("starved after {laps} laps")]
pub struct Starved {
    pub laps: u64,
}

#[allow(async_fn_in_trait)]
pub trait Shm: Clone {
    fn pid(&self) -> Pid;

    /// Read a register; `None` means it was never written (callers substitute
    /// their declared initial value).
    async fn read(&self, key: &str) -> Option<Bytes>;

    async fn write(&self, key: &str, val: Bytes);

    /// List written register names with the given prefix, sorted. One step.
    async fn scan(&self, prefix: &str) -> Vec<String>;

    fn begin_op_at(&self, lvl: u32, obj: &str, op: &str, args: V, epoch: Option<u64>);
    fn end_op_at(&self, lvl: u32, res: V, meta: OpMeta, epoch: Option<u64>);

    fn begin_op(&self, lvl: u32, obj: &str, op: &str, args: V) {
        self.begin_op_at(lvl, obj, op, args, None);
    }
    fn end_op(&self, lvl: u32, res: V, meta: OpMeta) {
        self.end_op_at(lvl, res, meta, None);
    }

    /// Global substrate step index of this process's most recent access.
    fn last_access_seq(&self) -> u64;

    /// Stamp of the most recent timestamp-masked read, when running under a
    /// recycling wrapper.
    fn last_stamp(&self) -> Option<u64> {
        None
    }

    /// Recycling epoch this handle operates at, if any.
    fn epoch(&self) -> Option<u64> {
        None
    }
}

/// Typed register helpers.
pub async fn read_v<S: Shm>(shm: &S, key: &str, init: &V) -> V {
    match shm.read(key).await {
        Some(b) => V::decode(&b).unwrap_or(V::None),
        None => init.clone(),
    }
}

pub async fn write_v<S: Shm>(shm: &S, key: &str, v: &V) {
    shm.write(key, v.encode()).await;
}

// ---------------------------------------------------------------------------
// Timestamp recycling wrapper (stamped cells over plain registers).
// ---------------------------------------------------------------------------

/// Encode a stamped cell `(t, payload)`.
pub fn stamp_enc(t: u64, payload: &[u8]) -> Bytes {
    let mut out = Vec::with_capacity(8 + payload.len());
    out.extend_from_slice(&t.to_be_bytes());
    out.extend_from_slice(payload);
    out
}

/// Decode a stamped cell; malformed content reads as stamp 0, empty payload.
pub fn stamp_dec(b: &[u8]) -> (u64, &[u8]) {
    if b.len() < 8 {
        return (0, &[]);
    }
    let t = u64::from_be_bytes(b[..8].try_into().expect("8 bytes"));
    (t, &b[8..])
}

/// Substrate view at a fixed timestamp: writes are stamped, reads mask out
/// strictly older stamps so a reused register looks freshly initialized.
#[derive(Clone)]
pub struct TsShm<S: Shm> {
    inner: S,
    stamp: u64,
    last_seen: Rc<Cell<Option<u64>>>,
}

impl<S: Shm> TsShm<S> {
    pub fn new(inner: S, stamp: u64) -> Self {
        TsShm { inner, stamp, last_seen: Rc::new(Cell::new(None)) }
    }

    pub fn stamp(&self) -> u64 {
        self.stamp
    }
}

impl<S: Shm> Shm for TsShm<S> {
    fn pid(&self) -> Pid {
        self.inner.pid()
    }

    async fn read(&self, key: &str) -> Option<Bytes> {
        match self.inner.read(key).await {
            None => {
                self.last_seen.set(None);
                None
            }
            Some(raw) => {
                let (t, payload) = stamp_dec(&raw);
                self.last_seen.set(Some(t));
                if self.stamp <= t {
                    Some(payload.to_vec())
                } else {
                    None
                }
            }
        }
    }

    async fn write(&self, key: &str, val: Bytes) {
        self.inner.write(key, stamp_enc(self.stamp, &val)).await;
    }

    async fn scan(&self, prefix: &str) -> Vec<String> {
        self.inner.scan(prefix).await
    }

    fn begin_op_at(&self, lvl: u32, obj: &str, op: &str, args: V, epoch: Option<u64>) {
        self.inner.begin_op_at(lvl, obj, op, args, epoch.or(Some(self.stamp)));
    }

    fn end_op_at(&self, lvl: u32, res: V, meta: OpMeta, epoch: Option<u64>) {
        self.inner.end_op_at(lvl, res, meta, epoch.or(Some(self.stamp)));
    }

    fn last_access_seq(&self) -> u64 {
        self.inner.last_access_seq()
    }

    fn last_stamp(&self) -> Option<u64> {
        self.last_seen.get()
    }

    fn epoch(&self) -> Option<u64> {
        Some(self.stamp)
    }
}

// ---------------------------------------------------------------------------
// Sequential in-process substrate.
// ---------------------------------------------------------------------------

struct SoloCore {
    regs: BTreeMap<String, Bytes>,
    rec: Recorder,
}

/// Single-threaded substrate where every access completes immediately.
/// Useful for sequential semantics tests, solo step measurements, and
/// register-count probes.
#[derive(Clone)]
pub struct SoloShm {
    core: Rc<RefCell<SoloCore>>,
    pid: Pid,
}

impl SoloShm {
    pub fn new() -> Self {
        Self::with_mask(level::ALL)
    }

    pub fn with_mask(mask: u32) -> Self {
        SoloShm {
            core: Rc::new(RefCell::new(SoloCore {
                regs: BTreeMap::new(),
                rec: Recorder::new(mask, false),
            })),
            pid: Pid(0),
        }
    }

    pub fn as_pid(&self, pid: u32) -> Self {
        SoloShm { core: Rc::clone(&self.core), pid: Pid(pid) }
    }

    pub fn history(&self) -> History {
        self.core.borrow().rec.history()
    }

    pub fn steps_of(&self, pid: u32) -> u64 {
        self.core.borrow().rec.steps_of(pid)
    }

    /// Number of registers ever created.
    pub fn register_count(&self) -> usize {
        self.core.borrow().regs.len()
    }

    pub fn register_names(&self) -> Vec<String> {
        self.core.borrow().regs.keys().cloned().collect()
    }
}

impl Default for SoloShm {
    fn default() -> Self {
        Self::new()
    }
}

impl Shm for SoloShm {
    fn pid(&self) -> Pid {
        self.pid
    }

    async fn read(&self, key: &str) -> Option<Bytes> {
        let mut c = self.core.borrow_mut();
        c.rec.on_access(self.pid.0);
        c.regs.get(key).cloned()
    }

    async fn write(&self, key: &str, val: Bytes) {
        let mut c = self.core.borrow_mut();
        c.rec.on_access(self.pid.0);
        c.regs.insert(key.to_string(), val);
    }

    async fn scan(&self, prefix: &str) -> Vec<String> {
        let mut c = self.core.borrow_mut();
        c.rec.on_access(self.pid.0);
        c.regs.range(prefix.to_string()..).take_while(|(k, _)| k.starts_with(prefix)).map(|(k, _)| k.clone()).collect()
    }

    fn begin_op_at(&self, lvl: u32, obj: &str, op: &str, args: V, epoch: Option<u64>) {
        self.core.borrow_mut().rec.begin_op(self.pid.0, lvl, obj, op, args, epoch);
    }

    fn end_op_at(&self, lvl: u32, res: V, meta: OpMeta, epoch: Option<u64>) {
        self.core.borrow_mut().rec.end_op(self.pid.0, lvl, res, epoch, meta.into_ev());
    }

    fn last_access_seq(&self) -> u64 {
        self.core.borrow().rec.last_access_seq(self.pid.0)
    }
}

/// Drive a future that never actually suspends (solo substrate).
pub fn block_on<F: Future>(fut: F) -> F::Output {
    let mut fut = std::pin::pin!(fut);
    let waker = std::task::Waker::noop();
    let mut cx = std::task::Context::from_waker(waker);
    loop {
        match fut.as_mut().poll(&mut cx) {
            std::task::Poll::Ready(v) => return v,
            std::task::Poll::Pending => panic!("solo future suspended"),
        }
    }
}
