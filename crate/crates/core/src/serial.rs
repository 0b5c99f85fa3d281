//! Serial data types: the automaton `(states, initial, ops, responses, tau)`
//! a universal construction replicates. Also used as the sequential
//! reference by the linearizability checker.

use crate::value::V;

/// One operation call: name plus a single argument (use a list for several).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OpCall {
    pub name: String,
    pub arg: V,
}

impl OpCall {
    pub fn new(name: &str, arg: V) -> Self {
        OpCall { name: name.to_string(), arg }
    }

    pub fn as_v(&self) -> V {
        V::pair(V::Str(self.name.clone()), self.arg.clone())
    }

    pub fn from_v(v: &V) -> Option<OpCall> {
        let xs = v.list()?;
        if xs.len() != 2 {
            return None;
        }
        match &xs[0] {
            V::Str(name) => Some(OpCall { name: name.clone(), arg: xs[1].clone() }),
            _ => None,
        }
    }
}

/// A total transition function over encoded states. `apply` must be defined
/// for every `(state, op)` pair.
pub trait Serial {
    fn init(&self) -> V;

    /// `tau(state, op) -> (state', response)`.
    fn apply(&self, state: &V, op: &OpCall) -> (V, V);

    /// Whether `resp` is a legal response for `op` in `state`; returns the
    /// successor state. Override for nondeterministic specifications.
    fn step(&self, state: &V, op: &OpCall, resp: &V) -> Option<V> {
        let (next, r) = self.apply(state, op);
        (&r == resp).then_some(next)
    }

    /// Candidate responses for completing a pending call, used by the
    /// checker's completion closure. Deterministic types have exactly one.
    fn pending_choices(&self, state: &V, op: &OpCall) -> Vec<V> {
        vec![self.apply(state, op).1]
    }
}

/// Monotone counter: `inc -> "ack"`, `read -> n`.
pub struct Counter;

impl Serial for Counter {
    fn init(&self) -> V {
        V::Nat(0)
    }

    fn apply(&self, state: &V, op: &OpCall) -> (V, V) {
        let n = state.nat().unwrap_or(0);
        match op.name.as_str() {
            "inc" => (V::Nat(n + 1), V::Str("ack".into())),
            "read" => (state.clone(), state.clone()),
            other => panic!("counter: unknown op {other}"),
        }
    }
}

/// Read/write register with initial value 0.
pub struct Register;

impl Serial for Register {
    fn init(&self) -> V {
        V::Nat(0)
    }

    fn apply(&self, state: &V, op: &OpCall) -> (V, V) {
        match op.name.as_str() {
            "write" => (op.arg.clone(), V::Str("ack".into())),
            "read" => (state.clone(), state.clone()),
            other => panic!("register: unknown op {other}"),
        }
    }
}

/// Compare-and-swap cell: `cas [u, v] -> bool`, plus `read`.
pub struct Cas;

impl Serial for Cas {
    fn init(&self) -> V {
        V::Nat(0)
    }

    fn apply(&self, state: &V, op: &OpCall) -> (V, V) {
        match op.name.as_str() {
            "cas" => {
                let xs = op.arg.list().expect("cas arg [u, v]");
                if state == &xs[0] {
                    (xs[1].clone(), V::Bool(true))
                } else {
                    (state.clone(), V::Bool(false))
                }
            }
            "read" => (state.clone(), state.clone()),
            other => panic!("cas: unknown op {other}"),
        }
    }
}

/// FIFO queue: `enq v -> "ack"`, `deq -> front | null`.
pub struct FifoQueue;

impl Serial for FifoQueue {
    fn init(&self) -> V {
        V::List(vec![])
    }

    fn apply(&self, state: &V, op: &OpCall) -> (V, V) {
        let mut xs = state.list().unwrap_or(&[]).to_vec();
        match op.name.as_str() {
            "enq" => {
                xs.push(op.arg.clone());
                (V::List(xs), V::Str("ack".into()))
            }
            "deq" => {
                if xs.is_empty() {
                    (V::List(xs), V::None)
                } else {
                    let front = xs.remove(0);
                    (V::List(xs), front)
                }
            }
            other => panic!("queue: unknown op {other}"),
        }
    }
}

/// Built-in types addressable by name from the CLI.
pub fn builtin(name: &str) -> Option<Box<dyn Serial + Send + Sync>> {
    match name {
        "counter" => Some(Box::new(Counter)),
        "register" => Some(Box::new(Register)),
        "cas" => Some(Box::new(Cas)),
        "queue" => Some(Box::new(FifoQueue)),
        _ => None,
    }
}

pub const BUILTIN_NAMES: &[&str] = &["counter", "register", "cas", "queue"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counter_transitions() {
        let c = Counter;
        let (s1, r1) = c.apply(&c.init(), &OpCall::new("inc", V::None));
        assert_eq!((s1.clone(), r1), (V::Nat(1), V::Str("ack".into())));
        let (s2, _) = c.apply(&s1, &OpCall::new("inc", V::None));
        assert_eq!(s2, V::Nat(2));
        let (_, r) = c.apply(&s2, &OpCall::new("read", V::None));
        assert_eq!(r, V::Nat(2));
    }

    #[test]
    fn cas_succeeds_only_on_match() {
        let c = Cas;
        let op01 = OpCall::new("cas", V::List(vec![V::Nat(0), V::Nat(1)]));
        let op02 = OpCall::new("cas", V::List(vec![V::Nat(0), V::Nat(2)]));
        let (s, r) = c.apply(&c.init(), &op01);
        assert_eq!((s.clone(), r), (V::Nat(1), V::Bool(true)));
        let (s2, r2) = c.apply(&s, &op02);
        assert_eq!((s2, r2), (V::Nat(1), V::Bool(false)));
    }

    #[test]
    fn queue_fifo_order() {
        let q = FifoQueue;
        let mut s = q.init();
        for i in 1..=3 {
            s = q.apply(&s, &OpCall::new("enq", V::Nat(i))).0;
        }
        let (s, front) = q.apply(&s, &OpCall::new("deq", V::None));
        assert_eq!(front, V::Nat(1));
        let (_, front2) = q.apply(&s, &OpCall::new("deq", V::None));
        assert_eq!(front2, V::Nat(2));
    }
}
