//! Register substrate surface: plain MWMR operations and the timestamped
//! recyclable register built from stamped cells.
//!
//! Registers are created lazily on first access; a read of an unwritten
//! register yields the caller-supplied initial value. The `*_op` variants
//! record one history operation per access, for the register property
//! suites.

use crate::record::level;
use crate::shm::{OpMeta, Shm};
use crate::value::V;

/// Register name, unique within one object space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RegisterId(pub String);

impl RegisterId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for RegisterId {
    fn from(s: &str) -> Self {
        RegisterId(s.to_string())
    }
}

/// Totally ordered timestamp with minimum 0. The unbounded timestamp set is
/// truncated to 64 bits; advancing past that panics rather than wrapping.
pub type Timestamp = u64;

pub fn next_epoch(t: Timestamp) -> Timestamp {
    t.checked_add(1).expect("timestamp overflow: recycling epochs exceeded 2^64")
}

pub async fn read<S: Shm>(shm: &S, r: &RegisterId, init: &V) -> V {
    crate::shm::read_v(shm, r.as_str(), init).await
}

pub async fn write<S: Shm>(shm: &S, r: &RegisterId, v: &V) {
    crate::shm::write_v(shm, r.as_str(), v).await
}

/// Stamped read: returns the stored value when its stamp `t'` satisfies
/// `t <= t'`, and `init` otherwise.
pub async fn ts_read<S: Shm>(shm: &S, r: &RegisterId, t: Timestamp, init: &V) -> V {
    match shm.read(r.as_str()).await {
        None => init.clone(),
        Some(raw) => {
            let (t2, payload) = crate::shm::stamp_dec(&raw);
            if t <= t2 {
                V::decode(payload).unwrap_or(V::None)
            } else {
                init.clone()
            }
        }
    }
}

/// Stamped write: the register holds `(t, v)` afterwards.
pub async fn ts_write<S: Shm>(shm: &S, r: &RegisterId, t: Timestamp, v: &V) {
    shm.write(r.as_str(), crate::shm::stamp_enc(t, &v.encode())).await;
}

/// Recording variants, one history operation per register access.
pub async fn read_op<S: Shm>(shm: &S, r: &RegisterId, init: &V) -> V {
    shm.begin_op(level::REG, r.as_str(), "read", V::None);
    let v = read(shm, r, init).await;
    shm.end_op(level::REG, v.clone(), OpMeta::default());
    v
}

pub async fn write_op<S: Shm>(shm: &S, r: &RegisterId, v: &V) {
    shm.begin_op(level::REG, r.as_str(), "write", v.clone());
    write(shm, r, v).await;
    shm.end_op(level::REG, V::Str("ack".into()), OpMeta::default());
}

pub async fn ts_read_op<S: Shm>(shm: &S, r: &RegisterId, t: Timestamp, init: &V) -> V {
    shm.begin_op_at(level::REG, r.as_str(), "read", V::None, Some(t));
    let v = ts_read(shm, r, t, init).await;
    shm.end_op_at(level::REG, v.clone(), OpMeta::default(), Some(t));
    v
}

pub async fn ts_write_op<S: Shm>(shm: &S, r: &RegisterId, t: Timestamp, v: &V) {
    shm.begin_op_at(level::REG, r.as_str(), "write", v.clone(), Some(t));
    ts_write(shm, r, t, v).await;
    shm.end_op_at(level::REG, V::Str("ack".into()), OpMeta::default(), Some(t));
}
