//! Discrete-event simulation of an asynchronous message-passing system with
//! crash-stop failures, and a majority-quorum emulation of the register
//! substrate on top of it.
//!
//! Reads and writes are two-phase: query every server for the
//! highest-tagged copy, then push the chosen `(tag, value)` to a majority.
//! Tags are `(sequence, writer)` pairs ordered lexicographically. Scans
//! query for key listings and return the union of a majority, which is
//! exactly the collect (not snapshot) directory the store-collect needs:
//! names are never removed, and a completed write intersects every later
//! quorum. The whole loop is single-threaded and deterministic in the seed.

use std::cell::RefCell;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::sync::Arc;
use std::task::{Context, Poll, Waker};

use ofuc_core::record::Recorder;
use ofuc_core::rng::SplitMix64;
use ofuc_core::shm::{OpMeta, Pid, Shm};
use ofuc_core::value::{Bytes, V};
use ofuc_core::History;

#[derive(Debug, Clone)]
pub struct NetConfig {
    pub n_servers: usize,
    pub seed: u64,
    /// Mean one-way message delay (abstract nanoseconds), exponential.
    pub mean_delay: u64,
    /// Scripted per-message delays (cyclic) override the distribution.
    pub scripted_delays: Option<Vec<u64>>,
    /// Recording mask for the shared recorder.
    pub mask: u32,
}

impl NetConfig {
    pub fn new(n_servers: usize, seed: u64) -> Self {
        NetConfig {
            n_servers,
            seed,
            mean_delay: 1_000_000,
            scripted_delays: None,
            mask: ofuc_core::level::ALL,
        }
    }

    /// Crash budget: a minority of servers may fail.
    pub fn f_max(&self) -> usize {
        self.n_servers.div_ceil(2) - 1
    }

    pub fn quorum(&self) -> usize {
        self.n_servers / 2 + 1
    }
}

/// Write tag: lexicographic (sequence, writer id).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Tag {
    pub seq: u64,
    pub wid: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Endpoint {
    Server(usize),
    Client(u32),
}

#[derive(Debug, Clone)]
enum MsgBody {
    ReadQ { key: String },
    ReadR { tag: Tag, val: Option<Bytes> },
    WriteQ { key: String, tag: Tag, val: Bytes },
    WriteAck,
    ScanQ { prefix: String },
    ScanR { names: Vec<String> },
}

#[derive(Debug, Clone)]
struct Message {
    nonce: u64,
    from: Endpoint,
    to: Endpoint,
    body: MsgBody,
}

#[derive(Debug)]
enum Ev {
    Deliver(Message),
    Crash(usize),
    Wake(u32),
}

struct QEntry {
    at: u64,
    id: u64,
    ev: Ev,
}

impl PartialEq for QEntry {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.id) == (other.at, other.id)
    }
}
impl Eq for QEntry {}
impl PartialOrd for QEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.at, self.id).cmp(&(other.at, other.id))
    }
}

#[derive(Default)]
struct ClientSlot {
    /// Replies for the nonce currently awaited.
    replies: Vec<Message>,
    cur_nonce: u64,
}

pub struct NetCore {
    cfg: NetConfig,
    pub time: u64,
    next_id: u64,
    next_nonce: u64,
    queue: BinaryHeap<Reverse<QEntry>>,
    servers: Vec<Option<BTreeMap<String, (Tag, Bytes)>>>,
    clients: Vec<ClientSlot>,
    rng: SplitMix64,
    pub rec: Recorder,
    pub messages_delivered: u64,
}

impl NetCore {
    fn delay(&mut self) -> u64 {
        if let Some(script) = &self.cfg.scripted_delays {
            let i = (self.next_id as usize) % script.len();
            return script[i].max(1);
        }
        (self.rng.exp(self.cfg.mean_delay as f64) as u64).max(1)
    }

    fn push(&mut self, at: u64, ev: Ev) {
        let id = self.next_id;
        self.next_id += 1;
        self.queue.push(Reverse(QEntry { at, id, ev }));
    }

    fn send(&mut self, msg: Message) {
        let d = self.delay();
        let at = self.time + d;
        self.push(at, Ev::Deliver(msg));
    }

    fn broadcast(&mut self, from: u32, nonce: u64, mk: impl Fn(usize) -> MsgBody) {
        for s in 0..self.cfg.n_servers {
            let body = mk(s);
            self.send(Message { nonce, from: Endpoint::Client(from), to: Endpoint::Server(s), body });
        }
    }

    fn serve(&mut self, s: usize, msg: Message) {
        let Some(store) = self.servers[s].as_mut() else { return };
        let reply = match msg.body {
            MsgBody::ReadQ { key } => {
                let (tag, val) = match store.get(&key) {
                    Some((t, v)) => (*t, Some(v.clone())),
                    None => (Tag::default(), None),
                };
                MsgBody::ReadR { tag, val }
            }
            MsgBody::WriteQ { key, tag, val } => {
                let newer = store.get(&key).map_or(true, |(t, _)| tag > *t);
                if newer {
                    store.insert(key, (tag, val));
                }
                MsgBody::WriteAck
            }
            MsgBody::ScanQ { prefix } => MsgBody::ScanR {
                names: store
                    .range(prefix.clone()..)
                    .take_while(|(k, _)| k.starts_with(&prefix))
                    .map(|(k, _)| k.clone())
                    .collect(),
            },
            _ => return,
        };
        let out = Message { nonce: msg.nonce, from: Endpoint::Server(s), to: msg.from, body: reply };
        self.send(out);
    }
}

/// Client-side substrate handle: each register operation is a quorum
/// protocol over the simulated network and counts as one step.
#[derive(Clone)]
pub struct NetShm {
    core: Rc<RefCell<NetCore>>,
    pid: Pid,
}

struct QuorumFut {
    core: Rc<RefCell<NetCore>>,
    pid: u32,
    nonce: u64,
    need: usize,
}

impl Future for QuorumFut {
    type Output = Vec<Message>;

    fn poll(self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<Vec<Message>> {
        let mut core = self.core.borrow_mut();
        let slot = &mut core.clients[self.pid as usize];
        if slot.cur_nonce == self.nonce && slot.replies.len() >= self.need {
            Poll::Ready(std::mem::take(&mut slot.replies))
        } else {
            Poll::Pending
        }
    }
}

struct SleepFut {
    core: Rc<RefCell<NetCore>>,
    pid: u32,
    at: u64,
    registered: bool,
}

impl Future for SleepFut {
    type Output = ();

    fn poll(mut self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<()> {
        let this = &mut *self;
        let mut core = this.core.borrow_mut();
        if core.time >= this.at {
            return Poll::Ready(());
        }
        if !this.registered {
            this.registered = true;
            core.push(this.at, Ev::Wake(this.pid));
        }
        Poll::Pending
    }
}

impl NetShm {
    fn begin_quorum(&self, mk: impl Fn(usize) -> MsgBody) -> QuorumFut {
        let mut core = self.core.borrow_mut();
        core.next_nonce += 1;
        let nonce = core.next_nonce;
        core.clients[self.pid.0 as usize].cur_nonce = nonce;
        core.clients[self.pid.0 as usize].replies.clear();
        core.broadcast(self.pid.0, nonce, mk);
        let need = core.cfg.quorum();
        QuorumFut { core: Rc::clone(&self.core), pid: self.pid.0, nonce, need }
    }

    /// Park until simulated time `at`.
    pub fn sleep_until(&self, at: u64) -> impl Future<Output = ()> {
        SleepFut { core: Rc::clone(&self.core), pid: self.pid.0, at, registered: false }
    }

    pub fn now(&self) -> u64 {
        self.core.borrow().time
    }
}

impl Shm for NetShm {
    fn pid(&self) -> Pid {
        self.pid
    }

    async fn read(&self, key: &str) -> Option<Bytes> {
        self.core.borrow_mut().rec.on_access(self.pid.0);
        let k = key.to_string();
        let replies = self.begin_quorum(|_| MsgBody::ReadQ { key: k.clone() }).await;
        let mut best: (Tag, Option<Bytes>) = (Tag::default(), None);
        for m in replies {
            if let MsgBody::ReadR { tag, val } = m.body {
                if tag >= best.0 {
                    best = (tag, val);
                }
            }
        }
        let (tag, val) = best;
        if let Some(v) = &val {
            // Write-back phase pins the value at a majority before returning.
            let (k2, v2) = (k.clone(), v.clone());
            self.begin_quorum(move |_| MsgBody::WriteQ { key: k2.clone(), tag, val: v2.clone() })
                .await;
        }
        val
    }

    async fn write(&self, key: &str, val: Bytes) {
        self.core.borrow_mut().rec.on_access(self.pid.0);
        let k = key.to_string();
        let replies = self.begin_quorum(|_| MsgBody::ReadQ { key: k.clone() }).await;
        let mut max = Tag::default();
        for m in replies {
            if let MsgBody::ReadR { tag, .. } = m.body {
                max = max.max(tag);
            }
        }
        let tag = Tag { seq: max.seq + 1, wid: u64::from(self.pid.0) };
        let (k2, v2) = (k, val);
        self.begin_quorum(move |_| MsgBody::WriteQ { key: k2.clone(), tag, val: v2.clone() }).await;
    }

    async fn scan(&self, prefix: &str) -> Vec<String> {
        self.core.borrow_mut().rec.on_access(self.pid.0);
        let p = prefix.to_string();
        let replies = self.begin_quorum(|_| MsgBody::ScanQ { prefix: p.clone() }).await;
        let mut names = BTreeSet::new();
        for m in replies {
            if let MsgBody::ScanR { names: ns } = m.body {
                names.extend(ns);
            }
        }
        names.into_iter().collect()
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

pub type ClientFuture = Pin<Box<dyn Future<Output = ()>>>;
pub type ClientFn = Arc<dyn Fn(NetShm) -> ClientFuture + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// Clients whose program did not run to completion (quorum unreachable
    /// or starved): unavailability.
    pub stuck_clients: Vec<u32>,
    pub end_time: u64,
    pub messages_delivered: u64,
}

impl SimReport {
    pub fn all_complete(&self) -> bool {
        self.stuck_clients.is_empty()
    }
}

/// One simulation instance: clients, servers, crash schedule.
pub struct Netsim {
    core: Rc<RefCell<NetCore>>,
    tasks: Vec<Option<ClientFuture>>,
}

impl Netsim {
    pub fn new(cfg: NetConfig, clients: &[ClientFn], crashes: &[(u64, usize)]) -> Netsim {
        let n = cfg.n_servers;
        let mask = cfg.mask;
        let seed = cfg.seed;
        let core = Rc::new(RefCell::new(NetCore {
            cfg,
            time: 0,
            next_id: 0,
            next_nonce: 0,
            queue: BinaryHeap::new(),
            servers: (0..n).map(|_| Some(BTreeMap::new())).collect(),
            clients: (0..clients.len()).map(|_| ClientSlot::default()).collect(),
            rng: SplitMix64::new(seed),
            rec: Recorder::new(mask, true),
            messages_delivered: 0,
        }));
        {
            let mut c = core.borrow_mut();
            for &(at, s) in crashes {
                c.push(at, Ev::Crash(s));
            }
        }
        let tasks = clients
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let shm = NetShm { core: Rc::clone(&core), pid: Pid(i as u32) };
                Some(f(shm))
            })
            .collect();
        Netsim { core, tasks }
    }

    fn poll(&mut self, i: usize) {
        if let Some(task) = self.tasks[i].as_mut() {
            let waker = Waker::noop();
            let mut cx = Context::from_waker(waker);
            if task.as_mut().poll(&mut cx).is_ready() {
                self.tasks[i] = None;
            }
        }
    }

    /// Drive the event loop to quiescence.
    pub fn run(&mut self) -> SimReport {
        for i in 0..self.tasks.len() {
            self.poll(i);
        }
        loop {
            let ev = {
                let mut core = self.core.borrow_mut();
                match core.queue.pop() {
                    Some(Reverse(e)) => {
                        core.time = e.at;
                        Some(e.ev)
                    }
                    None => None,
                }
            };
            let Some(ev) = ev else { break };
            match ev {
                Ev::Crash(s) => {
                    self.core.borrow_mut().servers[s] = None;
                }
                Ev::Wake(c) => self.poll(c as usize),
                Ev::Deliver(msg) => match msg.to {
                    Endpoint::Server(s) => {
                        let mut core = self.core.borrow_mut();
                        core.messages_delivered += 1;
                        core.serve(s, msg);
                    }
                    Endpoint::Client(c) => {
                        let fresh = {
                            let mut core = self.core.borrow_mut();
                            core.messages_delivered += 1;
                            let slot = &mut core.clients[c as usize];
                            if slot.cur_nonce == msg.nonce {
                                slot.replies.push(msg);
                                true
                            } else {
                                false // stale reply from a finished phase
                            }
                        };
                        if fresh {
                            self.poll(c as usize);
                        }
                    }
                },
            }
        }
        let stuck = self
            .tasks
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_some())
            .map(|(i, _)| i as u32)
            .collect();
        let core = self.core.borrow();
        SimReport {
            stuck_clients: stuck,
            end_time: core.time,
            messages_delivered: core.messages_delivered,
        }
    }

    pub fn history(&self) -> History {
        self.core.borrow().rec.history()
    }

    pub fn steps_of(&self, pid: u32) -> u64 {
        self.core.borrow().rec.steps_of(pid)
    }
}

/// Builds one netsim client from a closure returning an async block.
#[macro_export]
macro_rules! client_fn {
    ($body:expr) => {{
        let f = $body;
        std::sync::Arc::new(move |shm: $crate::sim::NetShm| {
            Box::pin(f(shm)) as $crate::sim::ClientFuture
        }) as $crate::sim::ClientFn
    }};
}
