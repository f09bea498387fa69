//! Sized values and the binary operators over them.

use std::fmt;

use serde_json::Value as Json;
use thiserror::Error;

use crate::ct::{self, CtCounters, CtString};

/// Public size of every integer.
pub const INT_SIZE: usize = 8;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseType {
    Int,
    Str,
}

impl fmt::Display for BaseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaseType::Int => "int",
            BaseType::Str => "string",
        })
    }
}

/// A base value: what `size_of` measures.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BaseValue {
    Int(i64),
    Str(String),
}

impl BaseValue {
    pub fn base_type(&self) -> BaseType {
        match self {
            BaseValue::Int(_) => BaseType::Int,
            BaseValue::Str(_) => BaseType::Str,
        }
    }

    pub fn to_json(&self) -> Json {
        match self {
            BaseValue::Int(n) => Json::from(*n),
            BaseValue::Str(s) => Json::from(s.as_str()),
        }
    }

    pub fn from_json(v: &Json) -> Option<BaseValue> {
        match v {
            Json::Number(n) => n.as_i64().map(BaseValue::Int),
            Json::String(s) => Some(BaseValue::Str(s.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for BaseValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseValue::Int(n) => write!(f, "{n}"),
            BaseValue::Str(s) => write!(f, "{s:?}"),
        }
    }
}

/// Integers have a fixed size; strings measure their UTF-8 byte length.
pub fn size_of(v: &BaseValue) -> usize {
    match v {
        BaseValue::Int(_) => INT_SIZE,
        BaseValue::Str(s) => s.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("value of size {actual} does not fit in {bound} bytes")]
    Oversized { actual: usize, bound: usize },
    #[error("cannot pad a value of size {from} down to {to}")]
    Padding { from: usize, to: usize },
    #[error("operator `{op}` is not defined on {left} and {right}")]
    SortMismatch {
        op: &'static str,
        left: BaseType,
        right: BaseType,
    },
}

#[derive(Clone)]
enum Repr {
    Int(i64),
    Str(CtString),
}

/// A base value together with its public size bound `z`.
///
/// Strings are held as a secret length plus a zero-padded buffer of exactly
/// `z` bytes.
#[derive(Clone)]
pub struct SizedValue {
    repr: Repr,
    size: usize,
}

impl SizedValue {
    pub fn int(n: i64) -> SizedValue {
        SizedValue {
            repr: Repr::Int(n),
            size: INT_SIZE,
        }
    }

    pub fn string(s: &str) -> SizedValue {
        SizedValue {
            repr: Repr::Str(CtString::from_str_exact(s)),
            size: s.len(),
        }
    }

    /// Builds `⟨v|z⟩`, failing unless `size_of(v) <= z`.
    pub fn new(base: &BaseValue, size: usize) -> Result<SizedValue, ValueError> {
        let actual = size_of(base);
        if actual > size {
            return Err(ValueError::Oversized { actual, bound: size });
        }
        Ok(match base {
            BaseValue::Int(n) => SizedValue {
                repr: Repr::Int(*n),
                size,
            },
            BaseValue::Str(s) => SizedValue {
                repr: Repr::Str(CtString::new(s.as_bytes(), size).expect("size checked")),
                size,
            },
        })
    }

    /// The value at its natural size.
    pub fn from_base(base: &BaseValue) -> SizedValue {
        SizedValue::new(base, size_of(base)).expect("natural size fits")
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn base_type(&self) -> BaseType {
        match self.repr {
            Repr::Int(_) => BaseType::Int,
            Repr::Str(_) => BaseType::Str,
        }
    }

    pub fn base(&self) -> BaseValue {
        match &self.repr {
            Repr::Int(n) => BaseValue::Int(*n),
            Repr::Str(s) => BaseValue::Str(s.to_string_lossy()),
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self.repr {
            Repr::Int(n) => Some(n),
            Repr::Str(_) => None,
        }
    }

    pub fn as_ct_str(&self) -> Option<&CtString> {
        match &self.repr {
            Repr::Str(s) => Some(s),
            Repr::Int(_) => None,
        }
    }

    /// Base values are equal, sizes ignored.
    pub fn same_base(&self, other: &SizedValue) -> bool {
        match (&self.repr, &other.repr) {
            (Repr::Int(a), Repr::Int(b)) => a == b,
            (Repr::Str(a), Repr::Str(b)) => a == b,
            _ => false,
        }
    }

    /// `⟨v|z⟩` is extended by `⟨v|z'⟩` for every `z' >= z`.
    pub fn extended_by(&self, other: &SizedValue) -> bool {
        self.same_base(other) && self.size <= other.size
    }

    pub fn pad(&self, size: usize) -> Result<SizedValue, ValueError> {
        let mut v = self.clone();
        v.pad_in_place(size, &mut CtCounters::default())?;
        Ok(v)
    }

    pub(crate) fn pad_in_place(&mut self, size: usize, counters: &mut CtCounters) -> Result<(), ValueError> {
        if size < self.size {
            return Err(ValueError::Padding { from: self.size, to: size });
        }
        if let Repr::Str(s) = &mut self.repr {
            s.pad_to(size, counters);
        }
        self.size = size;
        Ok(())
    }

    pub fn is_truthy(&self) -> bool {
        matches!(self.repr, Repr::Int(n) if n != 0)
    }
}

impl PartialEq for SizedValue {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size && self.same_base(other)
    }
}

impl Eq for SizedValue {}

impl fmt::Debug for SizedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}|{}⟩", self.base(), self.size)
    }
}

impl fmt::Display for SizedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{}|{}⟩", self.base(), self.size)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Concat,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Concat => "^",
        }
    }

    /// Operator signature `σ1 × σ2 → σ3`, or `None` when undefined.
    pub fn signature(self, left: BaseType, right: BaseType) -> Option<BaseType> {
        use BaseType::*;
        match (self, left, right) {
            (BinOp::Eq | BinOp::Ne, l, r) if l == r => Some(Int),
            (BinOp::Concat, Str, Str) => Some(Str),
            (BinOp::Concat, _, _) => None,
            (_, Int, Int) => Some(Int),
            _ => None,
        }
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub | BinOp::Concat => 4,
            BinOp::Mul => 5,
        }
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Signed `a < b` over the full `i64` range, without branching.
#[inline]
fn ct_lt_signed(a: i64, b: i64) -> u64 {
    let (a, b) = (a as u64, b as u64);
    let d = a.wrapping_sub(b);
    (d ^ ((a ^ b) & (d ^ a))) >> 63
}

fn int_op(op: BinOp, a: i64, b: i64) -> i64 {
    let r: u64 = match op {
        BinOp::Add => return a.wrapping_add(b),
        BinOp::Sub => return a.wrapping_sub(b),
        BinOp::Mul => return a.wrapping_mul(b),
        BinOp::Eq => ct::ct_eq(a as u64, b as u64),
        BinOp::Ne => ct::ct_eq(a as u64, b as u64) ^ 1,
        BinOp::Lt => ct_lt_signed(a, b),
        BinOp::Le => ct_lt_signed(b, a) ^ 1,
        BinOp::Gt => ct_lt_signed(b, a),
        BinOp::Ge => ct_lt_signed(a, b) ^ 1,
        BinOp::And => ct::ct_nonzero(a as u64) & ct::ct_nonzero(b as u64),
        BinOp::Or => ct::ct_nonzero(a as u64) | ct::ct_nonzero(b as u64),
        BinOp::Concat => unreachable!("concat is not an integer operator"),
    };
    r as i64
}

/// Evaluates `a ⊕ b` together with the size operator. Integer results have
/// size 8; concatenation has size `z1 + z2`.
pub fn apply_binop(
    op: BinOp,
    a: &SizedValue,
    b: &SizedValue,
    counters: &mut CtCounters,
) -> Result<SizedValue, ValueError> {
    let mismatch = || ValueError::SortMismatch {
        op: op.symbol(),
        left: a.base_type(),
        right: b.base_type(),
    };
    match (&a.repr, &b.repr) {
        (Repr::Int(x), Repr::Int(y)) if op != BinOp::Concat => Ok(SizedValue::int(int_op(op, *x, *y))),
        (Repr::Str(x), Repr::Str(y)) => match op {
            BinOp::Eq => Ok(SizedValue::int(ct::safe_eq(x, y, counters) as i64)),
            BinOp::Ne => Ok(SizedValue::int((ct::safe_eq(x, y, counters) ^ 1) as i64)),
            BinOp::Concat => {
                let s = ct::safe_concat(x, y, counters);
                let size = s.size();
                Ok(SizedValue {
                    repr: Repr::Str(s),
                    size,
                })
            }
            _ => Err(mismatch()),
        },
        _ => Err(mismatch()),
    }
}

/// Data-oblivious choice: `bit = false` yields `a`, `bit = true` yields `c`.
/// The result carries size `max(a.size, c.size)`.
pub fn safe_select(
    bit: bool,
    a: &SizedValue,
    c: &SizedValue,
    counters: &mut CtCounters,
) -> Result<SizedValue, ValueError> {
    let b = bit as u64;
    let size = ct::size_max(a.size, c.size);
    match (&a.repr, &c.repr) {
        (Repr::Int(i), Repr::Int(j)) => Ok(SizedValue {
            repr: Repr::Int(ct::ct_select_i64(b, *i, *j)),
            size,
        }),
        (Repr::Str(s1), Repr::Str(s2)) => {
            let s = ct::safe_select_str(b, s1, s2, counters);
            Ok(SizedValue {
                repr: Repr::Str(s),
                size,
            })
        }
        _ => Err(ValueError::SortMismatch {
            op: "select",
            left: a.base_type(),
            right: c.base_type(),
        }),
    }
}
