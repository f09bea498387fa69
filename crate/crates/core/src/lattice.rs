//! Finite security lattices.
//!
//! A lattice is built from a list of strict order pairs `a < b`, closed
//! reflexively and transitively. Construction fails unless the result is a
//! partial order with a unique bottom element and a least upper bound for
//! every pair of levels.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a level inside its [`Lattice`].
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Level(pub(crate) u16);

impl Level {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("lattice order contains a cycle through `{0}`")]
    Cycle(String),
    #[error("lattice has no unique bottom element")]
    NoBottom,
    #[error("levels `{0}` and `{1}` have no least upper bound")]
    NoJoin(String, String),
    #[error("lattice declares no levels")]
    Empty,
    #[error("too many levels")]
    TooLarge,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lattice {
    names: Vec<String>,
    // leq[a][b] <=> a ⊑ b
    leq: Vec<Vec<bool>>,
    join: Vec<Vec<u16>>,
    bottom: Level,
}

impl Default for Lattice {
    /// The two-point lattice `L ⊑ H`.
    fn default() -> Self {
        Lattice::from_pairs(&["L".to_string(), "H".to_string()], &[("L".into(), "H".into())])
            .expect("two-point lattice is well formed")
    }
}

impl Lattice {
    /// Builds a lattice over `names` (plus any names mentioned only in pairs),
    /// where each pair `(a, b)` states `a ⊑ b`.
    pub fn from_pairs(names: &[String], pairs: &[(String, String)]) -> Result<Self, LatticeError> {
        let mut all: Vec<String> = Vec::new();
        let intern = |n: &str, all: &mut Vec<String>| -> usize {
            match all.iter().position(|m| m == n) {
                Some(i) => i,
                None => {
                    all.push(n.to_string());
                    all.len() - 1
                }
            }
        };
        for n in names {
            intern(n, &mut all);
        }
        let mut edges = Vec::new();
        for (a, b) in pairs {
            let ia = intern(a, &mut all);
            let ib = intern(b, &mut all);
            edges.push((ia, ib));
        }
        if all.is_empty() {
            return Err(LatticeError::Empty);
        }
        if all.len() > u16::MAX as usize {
            return Err(LatticeError::TooLarge);
        }
        let n = all.len();
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for (a, b) in edges {
            leq[a][b] = true;
        }
        // Warshall closure.
        for k in 0..n {
            for i in 0..n {
                if leq[i][k] {
                    for j in 0..n {
                        if leq[k][j] {
                            leq[i][j] = true;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && leq[i][j] && leq[j][i] {
                    return Err(LatticeError::Cycle(all[i].clone()));
                }
            }
        }
        let bottoms: Vec<usize> = (0..n).filter(|&b| (0..n).all(|j| leq[b][j])).collect();
        let bottom = match bottoms.as_slice() {
            [b] => *b,
            _ => return Err(LatticeError::NoBottom),
        };
        let mut join = vec![vec![0u16; n]; n];
        for a in 0..n {
            for b in 0..n {
                let uppers: Vec<usize> = (0..n).filter(|&u| leq[a][u] && leq[b][u]).collect();
                let least = uppers
                    .iter()
                    .copied()
                    .find(|&u| uppers.iter().all(|&v| leq[u][v]));
                match least {
                    Some(u) => join[a][b] = u as u16,
                    None => return Err(LatticeError::NoJoin(all[a].clone(), all[b].clone())),
                }
            }
        }
        Ok(Lattice {
            names: all,
            leq,
            join,
            bottom: Level(bottom as u16),
        })
    }

    pub fn bottom(&self) -> Level {
        self.bottom
    }

    pub fn is_bottom(&self, l: Level) -> bool {
        l == self.bottom
    }

    pub fn leq(&self, a: Level, b: Level) -> bool {
        self.leq[a.index()][b.index()]
    }

    pub fn lub(&self, a: Level, b: Level) -> Level {
        Level(self.join[a.index()][b.index()])
    }

    pub fn level(&self, name: &str) -> Option<Level> {
        self.names.iter().position(|n| n == name).map(|i| Level(i as u16))
    }

    pub fn name(&self, l: Level) -> &str {
        &self.names[l.index()]
    }

    pub fn levels(&self) -> impl Iterator<Item = Level> + '_ {
        (0..self.names.len()).map(|i| Level(i as u16))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Same level names with the same order, regardless of declaration order.
    pub fn same_order(&self, other: &Lattice) -> bool {
        self.len() == other.len()
            && self.levels().all(|a| {
                other.level(self.name(a)).is_some_and(|oa| {
                    self.levels().all(|b| {
                        other
                            .level(self.name(b))
                            .is_some_and(|ob| self.leq(a, b) == other.leq(oa, ob))
                    })
                })
            })
    }

    /// Covering pairs `a < b` sufficient to rebuild this lattice.
    pub fn order_pairs(&self) -> Vec<(String, String)> {
        let n = self.names.len();
        let mut out = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a == b || !self.leq[a][b] {
                    continue;
                }
                let covered = (0..n).any(|c| c != a && c != b && self.leq[a][c] && self.leq[c][b]);
                if !covered {
                    out.push((self.names[a].clone(), self.names[b].clone()));
                }
            }
        }
        out
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs = self.order_pairs();
        if pairs.is_empty() {
            write!(f, "lattice {}", self.names.join(", "))
        } else {
            let body: Vec<String> = pairs.iter().map(|(a, b)| format!("{a} < {b}")).collect();
            write!(f, "lattice {}", body.join(", "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diamond() -> Lattice {
        let p = |a: &str, b: &str| (a.to_string(), b.to_string());
        Lattice::from_pairs(&[], &[p("L", "M1"), p("L", "M2"), p("M1", "H"), p("M2", "H")]).unwrap()
    }

    #[test]
    fn default_is_two_point() {
        let l = Lattice::default();
        let lo = l.level("L").unwrap();
        let hi = l.level("H").unwrap();
        assert_eq!(l.bottom(), lo);
        assert!(l.leq(lo, hi));
        assert!(!l.leq(hi, lo));
        assert_eq!(l.lub(lo, hi), hi);
    }

    #[test]
    fn diamond_join() {
        let l = diamond();
        let m1 = l.level("M1").unwrap();
        let m2 = l.level("M2").unwrap();
        assert_eq!(l.name(l.lub(m1, m2)), "H");
        assert_eq!(l.name(l.bottom()), "L");
    }

    #[test]
    fn cycle_rejected() {
        let p = |a: &str, b: &str| (a.to_string(), b.to_string());
        let err = Lattice::from_pairs(&[], &[p("A", "B"), p("B", "A")]).unwrap_err();
        assert!(matches!(err, LatticeError::Cycle(_)));
    }

    #[test]
    fn two_minima_rejected() {
        let p = |a: &str, b: &str| (a.to_string(), b.to_string());
        let err = Lattice::from_pairs(&[], &[p("A", "C"), p("B", "C")]).unwrap_err();
        assert_eq!(err, LatticeError::NoBottom);
    }

    #[test]
    fn missing_join_rejected() {
        let p = |a: &str, b: &str| (a.to_string(), b.to_string());
        // A and B have two incomparable upper bounds.
        let err = Lattice::from_pairs(
            &[],
            &[p("L", "A"), p("L", "B"), p("A", "X"), p("B", "X"), p("A", "Y"), p("B", "Y")],
        )
        .unwrap_err();
        assert!(matches!(err, LatticeError::NoJoin(_, _)));
    }

    #[test]
    fn order_pairs_rebuild() {
        let l = diamond();
        let rebuilt = Lattice::from_pairs(&[], &l.order_pairs()).unwrap();
        assert_eq!(l, rebuilt);
    }

    proptest! {
        #[test]
        fn lattice_laws(a in 0usize..4, b in 0usize..4, c in 0usize..4) {
            let l = diamond();
            let (a, b, c) = (Level(a as u16), Level(b as u16), Level(c as u16));
            prop_assert_eq!(l.lub(a, b), l.lub(b, a));
            prop_assert_eq!(l.lub(l.lub(a, b), c), l.lub(a, l.lub(b, c)));
            prop_assert_eq!(l.lub(a, a), a);
            prop_assert_eq!(l.lub(l.bottom(), a), a);
            prop_assert_eq!(l.leq(a, b), l.lub(a, b) == b);
        }
    }
}
