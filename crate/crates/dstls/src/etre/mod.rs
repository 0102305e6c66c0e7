//! Extended time regular expressions over sampled speed signals.
//!
//! Atoms are speed tubes (|v - center| <= delta, one sample) and a wildcard;
//! combinators are concatenation, union, one-or-more repetition, and a
//! duration constraint. Semantics are discrete: a match is an index interval
//! and durations are sample counts times the sample period.

mod matcher;
mod oracle;
mod parser;

#[doc(hidden)]
pub mod arbitrary;

pub use matcher::{match_all, matches_ending_at};
pub use oracle::brute_force_match;
pub use parser::parse_etre;

use std::collections::BTreeSet;
use std::fmt;

use crate::signal::IndexInterval;
use crate::{Error, Result};

/// ETRE abstract syntax tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// One sample with |v - center| <= delta.
    Tube { center: f64, delta: f64 },
    /// One arbitrary sample. Under a duration constraint (`Within`) the
    /// wildcard instead denotes any sequence, including the empty one.
    Any,
    Concat(Box<Expr>, Box<Expr>),
    Union(Box<Expr>, Box<Expr>),
    Plus(Box<Expr>),
    /// Duration constraint in seconds on the inner expression.
    Within { inner: Box<Expr>, lo: f64, hi: f64 },
}

impl Expr {
    pub fn tube(center: f64, delta: f64) -> Result<Expr> {
        if delta < 0.0 {
            return Err(Error::InvalidArg(format!("negative delta: {delta}")));
        }
        Ok(Expr::Tube { center, delta })
    }

    pub fn within(inner: Expr, lo: f64, hi: f64) -> Result<Expr> {
        if !(0.0 <= lo && lo <= hi) {
            return Err(Error::InvalidArg(format!("bad duration bounds [{lo}, {hi}]")));
        }
        Ok(Expr::Within { inner: Box::new(inner), lo, hi })
    }

    pub fn concat(a: Expr, b: Expr) -> Expr {
        Expr::Concat(Box::new(a), Box::new(b))
    }

    pub fn union(a: Expr, b: Expr) -> Expr {
        Expr::Union(Box::new(a), Box::new(b))
    }

    pub fn plus(a: Expr) -> Expr {
        Expr::Plus(Box::new(a))
    }

    /// Whether zero-length matches of this expression are reported at top
    /// level: only a bare duration-constrained wildcard admitting duration 0.
    pub(crate) fn reports_empty_matches(&self) -> bool {
        matches!(self, Expr::Within { inner, lo, hi } if matches!(**inner, Expr::Any) && *lo <= 0.0 && 0.0 <= *hi)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Union(..) => 1,
            Expr::Concat(..) => 2,
            Expr::Within { .. } => 3,
            Expr::Plus(..) => 4,
            Expr::Tube { .. } | Expr::Any => 5,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let prec = self.precedence();
        let parens = prec < min_prec;
        if parens {
            write!(f, "(")?;
        }
        match self {
            Expr::Tube { center, delta } => write!(f, "tube({center},{delta})")?,
            Expr::Any => write!(f, "any")?,
            Expr::Concat(a, b) => {
                a.fmt_prec(f, 2)?;
                write!(f, " . ")?;
                b.fmt_prec(f, 3)?;
            }
            Expr::Union(a, b) => {
                a.fmt_prec(f, 1)?;
                write!(f, " | ")?;
                b.fmt_prec(f, 2)?;
            }
            Expr::Plus(a) => {
                a.fmt_prec(f, 5)?;
                write!(f, "+")?;
            }
            Expr::Within { inner, lo, hi } => {
                inner.fmt_prec(f, 4)?;
                write!(f, " within [{lo},{hi}]")?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// The combined highway/motorway transition expression:
/// `ph . pt . pm | pm . pt . ph` with `ph`, `pm` exact-duration tube runs and
/// `pt` an unconstrained stretch of at most `d_tmax` seconds.
pub fn build_transition_expr(
    v_h: f64,
    dv_h: f64,
    v_m: f64,
    dv_m: f64,
    d: f64,
    d_tmax: f64,
) -> Result<Expr> {
    for (name, val) in [("v_h", v_h), ("dv_h", dv_h), ("v_m", v_m), ("dv_m", dv_m), ("d", d), ("d_tmax", d_tmax)] {
        if val < 0.0 {
            return Err(Error::InvalidArg(format!("{name} must be >= 0, got {val}")));
        }
    }
    let highway = || Expr::within(Expr::plus(Expr::tube(v_h, dv_h)?), d, d);
    let motorway = || Expr::within(Expr::plus(Expr::tube(v_m, dv_m)?), d, d);
    let gap = || Expr::within(Expr::Any, 0.0, d_tmax);
    let hm = Expr::concat(Expr::concat(highway()?, gap()?), motorway()?);
    let mh = Expr::concat(Expr::concat(motorway()?, gap()?), highway()?);
    Ok(Expr::union(hm, mh))
}

/// The set of matched index intervals, sorted and duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MatchSet {
    intervals: Vec<IndexInterval>,
}

impl MatchSet {
    pub fn from_set(set: BTreeSet<IndexInterval>) -> Self {
        Self { intervals: set.into_iter().collect() }
    }

    pub fn intervals(&self) -> &[IndexInterval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, iv: IndexInterval) -> bool {
        self.intervals.binary_search(&iv).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = IndexInterval> + '_ {
        self.intervals.iter().copied()
    }
}

impl FromIterator<IndexInterval> for MatchSet {
    fn from_iter<T: IntoIterator<Item = IndexInterval>>(iter: T) -> Self {
        Self::from_set(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_expr_shape() {
        let e = build_transition_expr(20.0, 5.0, 34.0, 10.0, 30.0, 60.0).unwrap();
        let expect = parse_etre(
            "(tube(20,5)+ within [30,30]) . (any within [0,60]) . (tube(34,10)+ within [30,30]) \
             | (tube(34,10)+ within [30,30]) . (any within [0,60]) . (tube(20,5)+ within [30,30])",
        )
        .unwrap();
        assert_eq!(e, expect);
    }

    #[test]
    fn transition_expr_symmetric_when_tubes_equal() {
        let e = build_transition_expr(20.0, 0.0, 20.0, 0.0, 30.0, 0.0).unwrap();
        match e {
            Expr::Union(a, b) => assert_eq!(a, b),
            other => panic!("expected union, got {other:?}"),
        }
    }

    #[test]
    fn transition_expr_with_other_d() {
        let e = build_transition_expr(20.0, 5.0, 34.0, 10.0, 10.0, 60.0).unwrap();
        let s = e.to_string();
        assert!(s.contains("within [10,10]"), "{s}");
    }

    #[test]
    fn transition_expr_rejects_negative() {
        assert!(build_transition_expr(20.0, -5.0, 34.0, 10.0, 30.0, 60.0).is_err());
    }
}
