//! Brute-force matching oracle: decides language membership for every
//! interval by memoized recursive descent. Independent of the production
//! matcher; used to cross-check it on small signals.

use std::collections::BTreeSet;

use crate::etre::{Expr, MatchSet};
use crate::signal::{IndexInterval, SampledSignal};
use crate::{Error, Result};

const MAX_ORACLE_LEN: usize = 500;

/// Enumerates all intervals and decides membership recursively.
///
/// Guarded to short signals; the oracle is cubic or worse by design.
pub fn brute_force_match(expr: &Expr, signal: &SampledSignal) -> Result<MatchSet> {
    let n = signal.len();
    if n > MAX_ORACLE_LEN {
        return Err(Error::InvalidArg(format!(
            "signal of {n} samples too long for the brute-force oracle (max {MAX_ORACLE_LEN})"
        )));
    }
    let nodes = NodeTable::build(expr);
    let mut memo = Memo::new(nodes.kinds.len(), n);
    let root = nodes.kinds.len() - 1;
    let report_empty = expr.reports_empty_matches();
    let mut set = BTreeSet::new();
    for b in 0..=n {
        for e in b..=n {
            if (b < e || report_empty) && holds(&nodes, signal, &mut memo, root, b, e) {
                set.insert(IndexInterval::new(b, e));
            }
        }
    }
    Ok(MatchSet::from_set(set))
}

/// Flattened expression tree; children precede parents, root is last.
struct NodeTable {
    kinds: Vec<Kind>,
}

enum Kind {
    Tube { center: f64, delta: f64 },
    Any,
    Concat(usize, usize),
    Union(usize, usize),
    Plus(usize),
    Within { inner: usize, inner_is_any: bool, lo: f64, hi: f64 },
}

impl NodeTable {
    fn build(expr: &Expr) -> NodeTable {
        let mut kinds = Vec::new();
        fn walk(e: &Expr, kinds: &mut Vec<Kind>) -> usize {
            let kind = match e {
                Expr::Tube { center, delta } => Kind::Tube { center: *center, delta: *delta },
                Expr::Any => Kind::Any,
                Expr::Concat(a, b) => {
                    let (ia, ib) = (walk(a, kinds), walk(b, kinds));
                    Kind::Concat(ia, ib)
                }
                Expr::Union(a, b) => {
                    let (ia, ib) = (walk(a, kinds), walk(b, kinds));
                    Kind::Union(ia, ib)
                }
                Expr::Plus(a) => Kind::Plus(walk(a, kinds)),
                Expr::Within { inner, lo, hi } => Kind::Within {
                    inner: walk(inner, kinds),
                    inner_is_any: matches!(**inner, Expr::Any),
                    lo: *lo,
                    hi: *hi,
                },
            };
            kinds.push(kind);
            kinds.len() - 1
        }
        walk(expr, &mut kinds);
        NodeTable { kinds }
    }
}

struct Memo {
    stride: usize,
    cells: Vec<u8>, // 0 unknown, 1 false, 2 true
}

impl Memo {
    fn new(nodes: usize, n: usize) -> Memo {
        let stride = n + 1;
        Memo { stride, cells: vec![0; nodes * stride * stride] }
    }

    #[inline]
    fn idx(&self, node: usize, b: usize, e: usize) -> usize {
        (node * self.stride + b) * self.stride + e
    }
}

fn holds(nodes: &NodeTable, signal: &SampledSignal, memo: &mut Memo, node: usize, b: usize, e: usize) -> bool {
    let cell = memo.idx(node, b, e);
    match memo.cells[cell] {
        1 => return false,
        2 => return true,
        _ => {}
    }
    let result = match &nodes.kinds[node] {
        Kind::Tube { center, delta } => e == b + 1 && (signal.values[b] - center).abs() <= *delta,
        Kind::Any => e == b + 1,
        Kind::Union(x, y) => {
            holds(nodes, signal, memo, *x, b, e) || holds(nodes, signal, memo, *y, b, e)
        }
        Kind::Concat(x, y) => (b..=e).any(|m| {
            holds(nodes, signal, memo, *x, b, m) && holds(nodes, signal, memo, *y, m, e)
        }),
        Kind::Plus(x) => {
            let x = *x;
            holds(nodes, signal, memo, x, b, e)
                || (b + 1..e).any(|m| {
                    holds(nodes, signal, memo, node, b, m) && holds(nodes, signal, memo, x, m, e)
                })
        }
        Kind::Within { inner, inner_is_any, lo, hi } => {
            let dur = (e - b) as f64 * signal.period;
            *lo <= dur && dur <= *hi && (*inner_is_any || holds(nodes, signal, memo, *inner, b, e))
        }
    };
    memo.cells[cell] = if result { 2 } else { 1 };
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::etre::{match_all, parse_etre};

    fn sig(values: Vec<f64>) -> SampledSignal {
        SampledSignal::new(0.0, 1.0, values).unwrap()
    }

    #[test]
    fn pointwise_tube() {
        let e = parse_etre("tube(20,5)").unwrap();
        let m = brute_force_match(&e, &sig(vec![19.0, 26.0])).unwrap();
        let expect: MatchSet = [IndexInterval::new(0, 1)].into_iter().collect();
        assert_eq!(m, expect);
    }

    #[test]
    fn wildcard_zero_duration_positions() {
        let e = parse_etre("any within [0,0]").unwrap();
        let m = brute_force_match(&e, &sig(vec![5.0, 6.0])).unwrap();
        let expect: MatchSet = (0..=2).map(|b| IndexInterval::new(b, b)).collect();
        assert_eq!(m, expect);
    }

    #[test]
    fn agrees_with_matcher_on_small_cases() {
        let cases = [
            ("tube(2,1)+", vec![1.5, 2.0, 9.0, 2.5]),
            ("any . tube(2,1)", vec![1.0, 2.0, 3.0]),
            ("(tube(1,0) | tube(3,0))+ within [2,3]", vec![1.0, 3.0, 1.0, 2.0, 3.0]),
            ("(any within [0,2]) . tube(5,1)", vec![5.0, 4.0, 7.0, 5.5]),
        ];
        for (text, values) in cases {
            let e = parse_etre(text).unwrap();
            let s = sig(values);
            assert_eq!(brute_force_match(&e, &s).unwrap(), match_all(&e, &s), "{text}");
        }
    }

    #[test]
    fn rejects_overlong_signal() {
        let e = parse_etre("any").unwrap();
        assert!(brute_force_match(&e, &sig(vec![0.0; 501])).is_err());
    }
}
