//! Values exchanged through the register substrate.
//!
//! The substrate itself stores opaque byte strings; consumers encode and
//! decode [`V`] values with the compact codec below. The JSON mapping is
//! used for history files.

use serde::{Deserialize, Serialize};

/// Raw register content.
pub type Bytes = Vec<u8>;

/// A value from the object domain. `None` doubles as the undecided marker.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum V {
    None,
    Bool(bool),
    Nat(u64),
    Str(String),
    List(Vec<V>),
}

impl V {
    pub fn nat(&self) -> Option<u64> {
        match self {
            V::Nat(n) => Some(*n),
            _ => None,
        }
    }

    pub fn list(&self) -> Option<&[V]> {
        match self {
            V::List(xs) => Some(xs),
            _ => None,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, V::None)
    }

    pub fn pair(a: V, b: V) -> V {
        V::List(vec![a, b])
    }

    /// Compact byte encoding: tag byte plus payload.
    pub fn encode(&self) -> Bytes {
        let mut out = Vec::with_capacity(9);
        self.encode_into(&mut out);
        out
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            V::None => out.push(0),
            V::Bool(b) => {
                out.push(1);
                out.push(u8::from(*b));
            }
            V::Nat(n) => {
                out.push(2);
                out.extend_from_slice(&n.to_be_bytes());
            }
            V::Str(s) => {
                out.push(3);
                out.extend_from_slice(&(s.len() as u32).to_be_bytes());
                out.extend_from_slice(s.as_bytes());
            }
            V::List(xs) => {
                out.push(4);
                out.extend_from_slice(&(xs.len() as u32).to_be_bytes());
                for x in xs {
                    x.encode_into(out);
                }
            }
        }
    }

    pub fn decode(b: &[u8]) -> Option<V> {
        let (v, rest) = Self::decode_prefix(b)?;
        rest.is_empty().then_some(v)
    }

    fn decode_prefix(b: &[u8]) -> Option<(V, &[u8])> {
        let (&tag, rest) = b.split_first()?;
        match tag {
            0 => Some((V::None, rest)),
            1 => {
                let (&x, rest) = rest.split_first()?;
                Some((V::Bool(x != 0), rest))
            }
            2 => {
                let (head, rest) = rest.split_at_checked(8)?;
                Some((V::Nat(u64::from_be_bytes(head.try_into().ok()?)), rest))
            }
            3 => {
                let (head, rest) = rest.split_at_checked(4)?;
                let len = u32::from_be_bytes(head.try_into().ok()?) as usize;
                let (s, rest) = rest.split_at_checked(len)?;
                Some((V::Str(String::from_utf8(s.to_vec()).ok()?), rest))
            }
            4 => {
                let (head, mut rest) = rest.split_at_checked(4)?;
                let len = u32::from_be_bytes(head.try_into().ok()?) as usize;
                let mut xs = Vec::with_capacity(len.min(64));
                for _ in 0..len {
                    let (x, r) = Self::decode_prefix(rest)?;
                    xs.push(x);
                    rest = r;
                }
                Some((V::List(xs), rest))
            }
            _ => None,
        }
    }
}

impl From<u64> for V {
    fn from(n: u64) -> V {
        V::Nat(n)
    }
}

impl From<bool> for V {
    fn from(b: bool) -> V {
        V::Bool(b)
    }
}

impl From<&str> for V {
    fn from(s: &str) -> V {
        V::Str(s.to_string())
    }
}

/// Grafarius response flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flag {
    Adopt,
    Commit,
}

impl Flag {
    pub fn as_v(self) -> V {
        match self {
            Flag::Adopt => V::Str("adopt".into()),
            Flag::Commit => V::Str("commit".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codec_roundtrip() {
        let vals = [
            V::None,
            V::Bool(true),
            V::Nat(0),
            V::Nat(u64::MAX),
            V::Str("consensus:12:grafarius:3".into()),
            V::List(vec![V::Nat(1), V::List(vec![V::None, V::Bool(false)]), V::Str("x".into())]),
        ];
        for v in vals {
            assert_eq!(V::decode(&v.encode()), Some(v.clone()), "roundtrip {v:?}");
        }
    }

    #[test]
    fn decode_rejects_garbage() {
        assert_eq!(V::decode(&[9, 9]), None);
        assert_eq!(V::decode(&[2, 1]), None);
        assert_eq!(V::decode(b""), None);
    }

    #[test]
    fn json_mapping() {
        assert_eq!(serde_json::to_string(&V::None).unwrap(), "null");
        assert_eq!(serde_json::to_string(&V::Nat(7)).unwrap(), "7");
        assert_eq!(
            serde_json::to_string(&V::List(vec![V::Bool(true), V::Str("a".into())])).unwrap(),
            "[true,\"a\"]"
        );
        let v: V = serde_json::from_str("[1,null]").unwrap();
        assert_eq!(v, V::List(vec![V::Nat(1), V::None]));
    }
}
