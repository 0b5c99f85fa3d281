//! Deterministic single-threaded execution world.
//!
//! Processes are futures over [`HarnessShm`]; each register access suspends
//! until the scheduler grants that process the next atomic step. One grant
//! performs exactly one register access and then runs the process's local
//! code up to its next access (or completion), so responses are emitted in
//! the same scheduling slot as an operation's final shared step.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::future::Future;
use std::pin::Pin;
use std::rc::Rc;
use std::sync::Arc;
use std::task::{Context, Poll, Waker};

use ofuc_core::record::Recorder;
use ofuc_core::shm::{OpMeta, Pid, Shm};
use ofuc_core::value::{Bytes, V};
use ofuc_core::History;

/// One pending substrate request. Keys are shared `Rc<str>` so scheduling
/// descriptors never copy payloads.
#[derive(Debug, Clone)]
pub enum Access {
    Read(Rc<str>),
    Write(Rc<str>, Bytes),
    Scan(Rc<str>),
    /// Test-program barrier: proceed once the world phase reaches the value.
    /// Not a register access; costs no step.
    Fence(u64),
}

impl Access {
    fn key(&self) -> Option<&Rc<str>> {
        match self {
            Access::Read(k) | Access::Write(k, _) => Some(k),
            _ => None,
        }
    }
}

/// What the scheduler needs to know about a parked process.
#[derive(Debug, Clone)]
pub enum Want {
    /// Register access: key (`None` for scans, which conflict with every
    /// key) and whether it writes.
    Step(Option<Rc<str>>, bool),
    Fence(u64),
}

enum AccessOut {
    Val(Option<Bytes>),
    Unit,
    Names(Vec<String>),
}

/// What the previous granted step did, for commutation pruning.
#[derive(Debug, Clone)]
pub struct LastStep {
    pub pid: u32,
    /// Register touched; `None` for scans, which conflict with everything.
    pub key: Option<Rc<str>>,
    pub wrote: bool,
    pub emitted: bool,
}

pub struct World {
    regs: BTreeMap<Rc<str>, Bytes>,
    pub rec: Recorder,
    want: Vec<Option<Want>>,
    granted: Vec<bool>,
    pub phase: u64,
    staged_step: Option<(u32, Option<Rc<str>>, bool)>,
    pub last_step: Option<LastStep>,
}

impl World {
    fn new(n: usize, mask: u32) -> Self {
        World {
            regs: BTreeMap::new(),
            rec: Recorder::new(mask, true),
            want: vec![None; n],
            granted: vec![false; n],
            phase: 0,
            staged_step: None,
            last_step: None,
        }
    }

    fn perform(&mut self, pid: u32, acc: Access) -> AccessOut {
        let wrote = matches!(acc, Access::Write(..));
        self.staged_step = Some((pid, acc.key().cloned(), wrote));
        self.rec.on_access(pid);
        match acc {
            Access::Read(k) => AccessOut::Val(self.regs.get(&*k).cloned()),
            Access::Write(k, v) => {
                self.regs.insert(k, v);
                AccessOut::Unit
            }
            Access::Scan(p) => AccessOut::Names(
                self.regs
                    .range(p.clone()..)
                    .take_while(|(k, _)| k.starts_with(&*p))
                    .map(|(k, _)| k.to_string())
                    .collect(),
            ),
            Access::Fence(_) => unreachable!("fences are not performed"),
        }
    }

    pub fn register_count(&self) -> usize {
        self.regs.len()
    }

    pub fn register_names(&self) -> Vec<String> {
        self.regs.keys().map(|k| k.to_string()).collect()
    }
}

struct TurnFut {
    w: Rc<RefCell<World>>,
    pid: u32,
    acc: Option<Access>,
    registered: bool,
}

impl Future for TurnFut {
    type Output = AccessOut;

    fn poll(mut self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<AccessOut> {
        let this = &mut *self;
        let mut w = this.w.borrow_mut();
        let p = this.pid as usize;
        if !this.registered {
            this.registered = true;
            let acc = this.acc.as_ref().expect("access present");
            let key = match acc {
                Access::Scan(_) => None,
                a => a.key().cloned(),
            };
            w.want[p] = Some(Want::Step(key, matches!(acc, Access::Write(..))));
            return Poll::Pending;
        }
        if w.granted[p] {
            w.granted[p] = false;
            w.want[p] = None;
            let acc = this.acc.take().expect("access consumed once");
            Poll::Ready(w.perform(this.pid, acc))
        } else {
            Poll::Pending
        }
    }
}

struct FenceFut {
    w: Rc<RefCell<World>>,
    pid: u32,
    at: u64,
    registered: bool,
}

impl Future for FenceFut {
    type Output = ();

    fn poll(mut self: Pin<&mut Self>, _cx: &mut Context<'_>) -> Poll<()> {
        let this = &mut *self;
        let mut w = this.w.borrow_mut();
        let p = this.pid as usize;
        if w.phase >= this.at {
            w.want[p] = None;
            return Poll::Ready(());
        }
        if !this.registered {
            this.registered = true;
            w.want[p] = Some(Want::Fence(this.at));
        }
        Poll::Pending
    }
}

/// Per-process handle onto the world.
#[derive(Clone)]
pub struct HarnessShm {
    w: Rc<RefCell<World>>,
    pid: Pid,
}

impl HarnessShm {
    fn turn(&self, acc: Access) -> TurnFut {
        TurnFut { w: Rc::clone(&self.w), pid: self.pid.0, acc: Some(acc), registered: false }
    }

    /// Park until the world phase reaches `at` (see [`Runner::settle`]).
    pub fn fence(&self, at: u64) -> impl Future<Output = ()> {
        FenceFut { w: Rc::clone(&self.w), pid: self.pid.0, at, registered: false }
    }
}

impl Shm for HarnessShm {
    fn pid(&self) -> Pid {
        self.pid
    }

    async fn read(&self, key: &str) -> Option<Bytes> {
        match self.turn(Access::Read(Rc::from(key))).await {
            AccessOut::Val(v) => v,
            _ => unreachable!(),
        }
    }

    async fn write(&self, key: &str, val: Bytes) {
        self.turn(Access::Write(Rc::from(key), val)).await;
    }

    async fn scan(&self, prefix: &str) -> Vec<String> {
        match self.turn(Access::Scan(Rc::from(prefix))).await {
            AccessOut::Names(ns) => ns,
            _ => unreachable!(),
        }
    }

    fn begin_op_at(&self, lvl: u32, obj: &str, op: &str, args: V, epoch: Option<u64>) {
        self.w.borrow_mut().rec.begin_op(self.pid.0, lvl, obj, op, args, epoch);
    }

    fn end_op_at(&self, lvl: u32, res: V, meta: OpMeta, epoch: Option<u64>) {
        self.w.borrow_mut().rec.end_op(self.pid.0, lvl, res, epoch, meta.into_ev());
    }

    fn last_access_seq(&self) -> u64 {
        self.w.borrow().rec.last_access_seq(self.pid.0)
    }
}

pub type ProcFuture = Pin<Box<dyn Future<Output = ()>>>;
pub type ProcFn = Arc<dyn Fn(HarnessShm) -> ProcFuture + Send + Sync>;

/// A concurrent program: one future per process, plus the recording mask.
#[derive(Clone)]
pub struct Program {
    pub procs: Vec<ProcFn>,
    pub mask: u32,
}

impl Program {
    pub fn new(mask: u32, procs: Vec<ProcFn>) -> Self {
        Program { procs, mask }
    }

    pub fn n(&self) -> usize {
        self.procs.len()
    }
}

/// Builds one program process from a closure returning an async block.
#[macro_export]
macro_rules! proc_fn {
    ($body:expr) => {{
        let f = $body;
        std::sync::Arc::new(move |shm: $crate::world::HarnessShm| {
            Box::pin(f(shm)) as $crate::world::ProcFuture
        }) as $crate::world::ProcFn
    }};
}

/// Drives one instantiation of a program under explicit scheduling.
pub struct Runner {
    pub w: Rc<RefCell<World>>,
    tasks: Vec<Option<ProcFuture>>,
}

impl Runner {
    pub fn new(program: &Program) -> Runner {
        let w = Rc::new(RefCell::new(World::new(program.n(), program.mask)));
        let mut tasks = Vec::with_capacity(program.n());
        for f in &program.procs {
            let i = tasks.len();
            let shm = HarnessShm { w: Rc::clone(&w), pid: Pid(i as u32) };
            tasks.push(Some(f(shm)));
        }
        let mut r = Runner { w, tasks };
        for i in 0..r.tasks.len() {
            r.poll(i);
        }
        r.settle();
        r
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

    /// Release fence-parked processes whose phase arrived; when every live
    /// process is parked on a future fence, advance the phase to the
    /// earliest one. Deterministic and cost-free: released code runs only
    /// process-local instructions up to the next register access.
    pub fn settle(&mut self) {
        loop {
            let mut released = false;
            for i in 0..self.tasks.len() {
                let reached = {
                    let w = self.w.borrow();
                    matches!(w.want[i], Some(Want::Fence(at)) if w.phase >= at)
                };
                if reached {
                    self.poll(i);
                    released = true;
                }
            }
            if released {
                continue;
            }
            let (any_access, min_fence) = {
                let w = self.w.borrow();
                let any = w.want.iter().any(|x| matches!(x, Some(Want::Step(..))));
                let mf = w
                    .want
                    .iter()
                    .filter_map(|x| match x {
                        Some(Want::Fence(at)) => Some(*at),
                        _ => None,
                    })
                    .min();
                (any, mf)
            };
            if any_access {
                return;
            }
            match min_fence {
                Some(at) => self.w.borrow_mut().phase = at,
                None => return,
            }
        }
    }

    /// Processes that can take a register step, ascending.
    pub fn enabled(&self) -> Vec<u16> {
        let w = self.w.borrow();
        w.want
            .iter()
            .enumerate()
            .filter(|(_, x)| matches!(x, Some(Want::Step(..))))
            .map(|(i, _)| i as u16)
            .collect()
    }

    /// Key and write-flag of the process's next step; key `None` means a
    /// scan (treated as conflicting with everything).
    pub fn want_step(&self, pid: u16) -> Option<(Option<Rc<str>>, bool)> {
        let w = self.w.borrow();
        match &w.want[pid as usize] {
            Some(Want::Step(k, wr)) => Some((k.clone(), *wr)),
            _ => None,
        }
    }

    /// Grant `pid` one register access and run it to its next suspension.
    pub fn step(&mut self, pid: u16) {
        {
            let mut w = self.w.borrow_mut();
            debug_assert!(
                matches!(w.want[pid as usize], Some(Want::Step(..))),
                "step on disabled process"
            );
            w.granted[pid as usize] = true;
            w.rec.emitted_in_step = false;
            w.staged_step = None;
        }
        self.poll(pid as usize);
        {
            let mut w = self.w.borrow_mut();
            let emitted = w.rec.emitted_in_step;
            if let Some((p, key, wrote)) = w.staged_step.take() {
                w.last_step = Some(LastStep { pid: p, key, wrote, emitted });
            }
        }
        self.settle();
    }

    pub fn all_done(&self) -> bool {
        self.tasks.iter().all(Option::is_none)
    }

    pub fn total_steps(&self) -> u64 {
        self.w.borrow().rec.total_steps()
    }

    pub fn history(&mut self) -> History {
        self.w.borrow_mut().rec.take_history()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ofuc_core::shm::read_v;

    fn two_writers() -> Program {
        Program::new(
            0,
            vec![
                proc_fn!(|shm: HarnessShm| async move {
                    shm.write("r", V::Nat(1).encode()).await;
                }),
                proc_fn!(|shm: HarnessShm| async move {
                    shm.write("r", V::Nat(2).encode()).await;
                }),
            ],
        )
    }

    #[test]
    fn schedule_order_decides_final_value() {
        let prog = two_writers();
        let mut r = Runner::new(&prog);
        assert_eq!(r.enabled(), vec![0, 1]);
        r.step(0);
        r.step(1);
        assert!(r.all_done());
        let w = r.w.borrow();
        assert_eq!(w.regs.get("r"), Some(&V::Nat(2).encode()));
    }

    #[test]
    fn fences_serialize_processes() {
        let prog = Program::new(
            0,
            vec![
                proc_fn!(|shm: HarnessShm| async move {
                    shm.fence(1).await;
                    let v = read_v(&shm, "r", &V::None).await;
                    shm.write("out", v.encode()).await;
                }),
                proc_fn!(|shm: HarnessShm| async move {
                    shm.write("r", V::Nat(7).encode()).await;
                    shm.fence(2).await;
                }),
            ],
        );
        let mut r = Runner::new(&prog);
        // Only process 1 is enabled until it writes and parks on its fence.
        assert_eq!(r.enabled(), vec![1]);
        r.step(1);
        // Phase advances automatically; process 0 reads 7.
        assert_eq!(r.enabled(), vec![0]);
        r.step(0);
        r.step(0);
        assert!(r.all_done());
        let w = r.w.borrow();
        assert_eq!(w.regs.get("out"), Some(&V::Nat(7).encode()));
    }
}
