//! Shared-object stack over an atomic-register substrate: splitter,
//! grafarius, racing, obstruction-free consensus, and two universal
//! constructions (unbounded, and bounded-memory via timestamped register
//! recycling). Every algorithm is written against the [`shm::Shm`]
//! substrate trait so the same code runs under a deterministic scheduler,
//! sequentially in process, or over a quorum-replicated message-passing
//! emulation.

pub mod consensus;
pub mod primitives;
pub mod racing;
pub mod record;
pub mod registers;
pub mod rng;
pub mod serial;
pub mod shm;
pub mod universal;
pub mod value;

pub use record::{level, EvMeta, Event, EventKind, History, OpRec, Recorder};
pub use shm::{block_on, OpMeta, Pid, Shm, SoloShm, Starved, TsShm};
pub use value::{Bytes, Flag, V};
