//! Constant-time primitives over padded strings.
//!
//! A [`CtString`] is a secret length plus a byte buffer whose length is the
//! public size. Bytes past the secret length are always zero. Every routine
//! here loops over public sizes only and never branches on buffer contents
//! or on the secret length; [`CtCounters`] records the work done so that
//! content independence can be checked from tests.

use std::fmt;

/// Operation counts for constant-time routines. A pure function of the
/// public sizes of the operands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct CtCounters {
    pub loop_iterations: u64,
    pub byte_ops: u64,
}

impl CtCounters {
    pub fn add(&mut self, other: CtCounters) {
        self.loop_iterations += other.loop_iterations;
        self.byte_ops += other.byte_ops;
    }
}

/// `1` if `a < b`, else `0`. Both operands must be below 2^63.
#[inline]
pub fn ct_lt(a: u64, b: u64) -> u64 {
    (a.wrapping_sub(b) >> 63) & 1
}

/// `1` if `a == b`, else `0`.
#[inline]
pub fn ct_eq(a: u64, b: u64) -> u64 {
    let x = a ^ b;
    ((x | x.wrapping_neg()) >> 63) ^ 1
}

/// `1` if `a != 0`, else `0`.
#[inline]
pub fn ct_nonzero(a: u64) -> u64 {
    (a | a.wrapping_neg()) >> 63
}

/// Integer select `((1 xor b) * i) lor (b * j)`; `b` must be 0 or 1.
#[inline]
pub fn ct_select_u64(b: u64, i: u64, j: u64) -> u64 {
    ((1 ^ b).wrapping_mul(i)) | b.wrapping_mul(j)
}

#[inline]
pub fn ct_select_i64(b: u64, i: i64, j: i64) -> i64 {
    ct_select_u64(b, i as u64, j as u64) as i64
}

#[inline]
fn ct_min(a: u64, b: u64) -> u64 {
    ct_select_u64(ct_lt(b, a), a, b)
}

#[inline]
fn ct_max(a: u64, b: u64) -> u64 {
    ct_select_u64(ct_lt(a, b), a, b)
}

#[derive(Clone)]
pub struct CtString {
    len: usize,
    buf: Vec<u8>,
}

impl CtString {
    /// Pads `bytes` into a buffer of public size `size`. Returns `None` when
    /// the content does not fit.
    pub fn new(bytes: &[u8], size: usize) -> Option<CtString> {
        if bytes.len() > size {
            return None;
        }
        let mut buf = vec![0u8; size];
        buf[..bytes.len()].copy_from_slice(bytes);
        Some(CtString { len: bytes.len(), buf })
    }

    pub fn from_str_exact(s: &str) -> CtString {
        CtString {
            len: s.len(),
            buf: s.as_bytes().to_vec(),
        }
    }

    /// Secret length.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Public size.
    pub fn size(&self) -> usize {
        self.buf.len()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.buf[..self.len]
    }

    pub fn to_string_lossy(&self) -> String {
        String::from_utf8_lossy(self.as_bytes()).into_owned()
    }

    /// Grows the public size to `size`; shrinking is a no-op.
    pub fn pad_to(&mut self, size: usize, counters: &mut CtCounters) {
        if size > self.buf.len() {
            let extra = size - self.buf.len();
            self.buf.resize(size, 0);
            counters.loop_iterations += extra as u64;
            counters.byte_ops += extra as u64;
        }
    }

    fn padded(&self, size: usize, counters: &mut CtCounters) -> CtString {
        let mut s = self.clone();
        s.pad_to(size, counters);
        s
    }
}

impl PartialEq for CtString {
    /// Semantic equality of contents; public sizes are compared by the
    /// surrounding value type.
    fn eq(&self, other: &Self) -> bool {
        self.as_bytes() == other.as_bytes()
    }
}

impl Eq for CtString {}

impl fmt::Debug for CtString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.to_string_lossy())
    }
}

/// Data-oblivious equality. Operands are first padded to the larger public
/// size. Returns 1 iff the contents are equal.
pub fn safe_eq(a: &CtString, b: &CtString, counters: &mut CtCounters) -> u64 {
    let size = a.size().max(b.size());
    let a = a.padded(size, counters);
    let b = b.padded(size, counters);
    let la = a.len as u64;
    let lb = b.len as u64;
    let mut x = la ^ lb;
    let m = ct_min(la, lb);
    for i in 0..size {
        let in_range = ct_lt(i as u64, m);
        let diff = (a.buf[i] ^ b.buf[i]) as u64;
        x |= in_range.wrapping_neg() & diff;
    }
    counters.loop_iterations += size as u64;
    counters.byte_ops += 2 * size as u64;
    ct_eq(x, 0)
}

/// Data-oblivious selection: `b = 0` yields `a`, `b = 1` yields `c`. The
/// result has public size `max(a.size(), c.size())`.
pub fn safe_select_str(b: u64, a: &CtString, c: &CtString, counters: &mut CtCounters) -> CtString {
    let size = a.size().max(c.size());
    let a = a.padded(size, counters);
    let c = c.padded(size, counters);
    let b = b & 1;
    let mut buf = vec![0u8; size];
    for (i, out) in buf.iter_mut().enumerate() {
        *out = ct_select_u64(b, a.buf[i] as u64, c.buf[i] as u64) as u8;
    }
    counters.loop_iterations += size as u64;
    counters.byte_ops += 3 * size as u64;
    let len = ct_select_u64(b, a.len as u64, c.len as u64) as usize;
    CtString { len, buf }
}

/// Data-oblivious concatenation with public size `a.size() + c.size()`.
/// Quadratic in the public sizes so that the secret length of `a` never
/// selects a memory location.
pub fn safe_concat(a: &CtString, c: &CtString, counters: &mut CtCounters) -> CtString {
    let z1 = a.size();
    let z2 = c.size();
    let z = z1 + z2;
    let l1 = a.len as u64;
    let mut buf = vec![0u8; z];
    for (i, out) in buf.iter_mut().enumerate() {
        let mut acc: u64 = 0;
        for j in 0..z1 {
            let ch = a.buf[j] as u64;
            let bit = ct_eq(i as u64, j as u64) & ct_lt(j as u64, l1);
            acc |= bit.wrapping_mul(ch);
        }
        for j in 0..z2 {
            let ch = c.buf[j] as u64;
            let bit = ct_eq(i as u64, j as u64 + l1);
            acc |= bit.wrapping_mul(ch);
        }
        *out = acc as u8;
    }
    counters.loop_iterations += (z as u64) * (z1 as u64 + z2 as u64);
    counters.byte_ops += (z as u64) * (z1 as u64 + z2 as u64);
    CtString {
        len: a.len + c.len,
        buf,
    }
}

/// `max` over public sizes without branching; exposed for the interpreter.
pub fn size_max(a: usize, b: usize) -> usize {
    ct_max(a as u64, b as u64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(text: &str, size: usize) -> CtString {
        CtString::new(text.as_bytes(), size).unwrap()
    }

    #[test]
    fn helpers() {
        assert_eq!(ct_lt(3, 5), 1);
        assert_eq!(ct_lt(5, 3), 0);
        assert_eq!(ct_lt(4, 4), 0);
        assert_eq!(ct_eq(7, 7), 1);
        assert_eq!(ct_eq(7, 8), 0);
        assert_eq!(ct_nonzero(0), 0);
        assert_eq!(ct_nonzero(u64::MAX), 1);
        assert_eq!(ct_select_i64(0, -5, 9), -5);
        assert_eq!(ct_select_i64(1, -5, 9), 9);
    }

    #[test]
    fn eq_examples() {
        let mut c = CtCounters::default();
        assert_eq!(safe_eq(&s("ab", 4), &s("ab", 4), &mut c), 1);
        assert_eq!(safe_eq(&s("ab", 4), &s("abc", 4), &mut c), 0);
        assert_eq!(safe_eq(&s("", 3), &s("", 3), &mut c), 1);
        assert_eq!(safe_eq(&s("ab", 4), &s("ab", 6), &mut c), 1);
    }

    #[test]
    fn select_examples() {
        let mut c = CtCounters::default();
        let r = safe_select_str(0, &s("xy", 3), &s("ab", 3), &mut c);
        assert_eq!(r.as_bytes(), b"xy");
        assert_eq!(r.size(), 3);
        let r = safe_select_str(1, &s("a", 2), &s("a", 2), &mut c);
        assert_eq!((r.as_bytes(), r.size()), (&b"a"[..], 2));
    }

    #[test]
    fn concat_examples() {
        let mut c = CtCounters::default();
        let r = safe_concat(&s("a", 2), &s("b", 1), &mut c);
        assert_eq!((r.as_bytes(), r.size()), (&b"ab"[..], 3));
        let r = safe_concat(&s("", 0), &s("x", 1), &mut c);
        assert_eq!((r.as_bytes(), r.size()), (&b"x"[..], 1));
        let r = safe_concat(&s("ab", 5), &s("", 4), &mut c);
        assert_eq!((r.as_bytes(), r.size()), (&b"ab"[..], 9));
    }

    #[test]
    fn concat_keeps_padding_zero() {
        let mut c = CtCounters::default();
        let r = safe_concat(&s("ab", 5), &s("cd", 4), &mut c);
        assert_eq!(r.as_bytes(), b"abcd");
        assert!(r.buf[r.len..].iter().all(|&b| b == 0));
    }

    #[test]
    fn concat_counter_shape() {
        let mut c = CtCounters::default();
        safe_concat(&s("a", 2), &s("b", 3), &mut c);
        assert_eq!(c.loop_iterations, 25);
    }
}
