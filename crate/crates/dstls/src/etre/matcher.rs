//! Matching of ETRE expressions against sampled signals.
//!
//! Two evaluation strategies share one semantics: a run-length fast path for
//! the fixed tube-gap-tube transition shape, and a general dynamic program
//! (one boolean interval table per subexpression) for everything else. The
//! observation windows in the pipeline are at most a few hundred samples, so
//! the quadratic tables are acceptable.

use std::collections::BTreeSet;

use crate::etre::{Expr, MatchSet};
use crate::signal::{IndexInterval, SampledSignal};

/// All matched intervals of `expr` over the whole signal.
///
/// Zero-length matches are reported only for a bare duration-constrained
/// wildcard admitting duration zero; a selected data segment must contain
/// samples.
pub fn match_all(expr: &Expr, signal: &SampledSignal) -> MatchSet {
    if let Some(branches) = TransitionBranch::recognize(expr, signal.period) {
        let mut set = BTreeSet::new();
        for b in &branches {
            b.collect_matches(&signal.values, None, &mut set);
        }
        return MatchSet::from_set(set);
    }
    let n = signal.len();
    let grid = eval(expr, signal);
    let report_empty = expr.reports_empty_matches();
    let mut set = BTreeSet::new();
    for b in 0..=n {
        for e in b..=n {
            if grid.get(b, e) && (b < e || report_empty) {
                set.insert(IndexInterval::new(b, e));
            }
        }
    }
    MatchSet::from_set(set)
}

/// Begin indices of matches that end exactly at the last sample of the
/// signal. Equivalent to filtering [`match_all`] on `end == len`, but the
/// fast path skips enumerating earlier endpoints.
pub fn matches_ending_at(expr: &Expr, signal: &SampledSignal) -> Vec<usize> {
    let n = signal.len();
    if n == 0 {
        return Vec::new();
    }
    if let Some(branches) = TransitionBranch::recognize(expr, signal.period) {
        let mut set = BTreeSet::new();
        for b in &branches {
            b.collect_matches(&signal.values, Some(n), &mut set);
        }
        return set.into_iter().map(|iv| iv.begin).collect();
    }
    let grid = eval(expr, signal);
    let report_empty = expr.reports_empty_matches();
    (0..=n)
        .filter(|&b| grid.get(b, n) && (b < n || report_empty))
        .collect()
}

/// Boolean table over index intervals: bit (b, e) set means the samples
/// `b..e` are in the language of a subexpression.
struct Grid {
    words_per_row: usize,
    bits: Vec<u64>,
}

impl Grid {
    fn new(n: usize) -> Self {
        let words_per_row = n / 64 + 1;
        Self { words_per_row, bits: vec![0; (n + 1) * words_per_row] }
    }

    #[inline]
    fn get(&self, b: usize, e: usize) -> bool {
        self.bits[b * self.words_per_row + e / 64] >> (e % 64) & 1 != 0
    }

    #[inline]
    fn set(&mut self, b: usize, e: usize) {
        self.bits[b * self.words_per_row + e / 64] |= 1 << (e % 64);
    }

    fn row(&self, b: usize) -> &[u64] {
        &self.bits[b * self.words_per_row..(b + 1) * self.words_per_row]
    }

    fn or_row_into(&mut self, b: usize, other: &[u64]) {
        let start = b * self.words_per_row;
        for (dst, src) in self.bits[start..start + self.words_per_row].iter_mut().zip(other) {
            *dst |= src;
        }
    }

    fn set_bits_of_row(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        let row = self.row(b);
        row.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(w * 64 + i)
            })
        })
    }
}

fn eval(expr: &Expr, signal: &SampledSignal) -> Grid {
    let n = signal.len();
    let period = signal.period;
    let mut grid = Grid::new(n);
    match expr {
        Expr::Tube { center, delta } => {
            for (i, &v) in signal.values.iter().enumerate() {
                if (v - center).abs() <= *delta {
                    grid.set(i, i + 1);
                }
            }
        }
        Expr::Any => {
            for i in 0..n {
                grid.set(i, i + 1);
            }
        }
        Expr::Union(a, b) => {
            grid = eval(a, signal);
            let gb = eval(b, signal);
            for row in 0..=n {
                grid.or_row_into(row, gb.row(row));
            }
        }
        Expr::Concat(a, b) => {
            let ga = eval(a, signal);
            let gb = eval(b, signal);
            for begin in 0..=n {
                let mids: Vec<usize> = ga.set_bits_of_row(begin).collect();
                for m in mids {
                    let row = gb.row(m).to_vec();
                    grid.or_row_into(begin, &row);
                }
            }
        }
        Expr::Plus(inner) => {
            let gi = eval(inner, signal);
            grid = Grid::new(n);
            for b in 0..=n {
                grid.or_row_into(b, gi.row(b));
            }
            // Closure by increasing interval length; empty inner matches
            // contribute nothing beyond what the inner table already holds.
            for len in 2..=n {
                for b in 0..=n - len {
                    let e = b + len;
                    if grid.get(b, e) {
                        continue;
                    }
                    for m in b + 1..e {
                        if grid.get(b, m) && gi.get(m, e) {
                            grid.set(b, e);
                            break;
                        }
                    }
                }
            }
        }
        Expr::Within { inner, lo, hi } => {
            let duration_ok = |len: usize| {
                let dur = len as f64 * period;
                *lo <= dur && dur <= *hi
            };
            if matches!(**inner, Expr::Any) {
                // Wildcard under a duration bound: any sequence, empty
                // included, of admissible duration.
                for b in 0..=n {
                    for e in b..=n {
                        if duration_ok(e - b) {
                            grid.set(b, e);
                        }
                    }
                }
            } else {
                let gi = eval(inner, signal);
                for b in 0..=n {
                    for e in b..=n {
                        if gi.get(b, e) && duration_ok(e - b) {
                            grid.set(b, e);
                        }
                    }
                }
            }
        }
    }
    grid
}

/// One union branch of the transition shape: an exact-duration run in the
/// first tube, an arbitrary gap of bounded length, an exact-duration run in
/// the second tube.
struct TransitionBranch {
    center1: f64,
    delta1: f64,
    run1: usize,
    gap_min: usize,
    gap_max: usize,
    center2: f64,
    delta2: f64,
    run2: usize,
}

impl TransitionBranch {
    /// Recognizes `branch | branch` or a single branch, where a branch is
    /// `(tube+ within [d,d]) . (any within [glo,ghi]) . (tube+ within [d,d])`
    /// with all durations realizable as whole sample counts.
    fn recognize(expr: &Expr, period: f64) -> Option<Vec<TransitionBranch>> {
        match expr {
            Expr::Union(a, b) => {
                let ba = Self::recognize_branch(a, period)?;
                let bb = Self::recognize_branch(b, period)?;
                Some(vec![ba, bb])
            }
            _ => Self::recognize_branch(expr, period).map(|b| vec![b]),
        }
    }

    fn recognize_branch(expr: &Expr, period: f64) -> Option<TransitionBranch> {
        let Expr::Concat(left, last) = expr else { return None };
        let Expr::Concat(first, mid) = &**left else { return None };
        let (center1, delta1, run1) = Self::tube_run(first, period)?;
        let (center2, delta2, run2) = Self::tube_run(last, period)?;
        let Expr::Within { inner, lo, hi } = &**mid else { return None };
        if !matches!(**inner, Expr::Any) {
            return None;
        }
        let (gap_min, gap_max) = Self::count_range(*lo, *hi, period)?;
        Some(TransitionBranch { center1, delta1, run1, gap_min, gap_max, center2, delta2, run2 })
    }

    fn tube_run(expr: &Expr, period: f64) -> Option<(f64, f64, usize)> {
        let Expr::Within { inner, lo, hi } = expr else { return None };
        let Expr::Plus(atom) = &**inner else { return None };
        let Expr::Tube { center, delta } = **atom else { return None };
        // Exact-duration runs only; the run length must satisfy the same
        // real comparisons the general matcher uses.
        let run = (lo / period).round();
        if !(run >= 1.0 && run <= usize::MAX as f64) {
            return None;
        }
        let run_f = run * period;
        if !(*lo <= run_f && run_f <= *hi && *lo == *hi) {
            return None;
        }
        Some((center, delta, run as usize))
    }

    /// Integer counts g with `lo <= g * period <= hi` under exact f64
    /// comparisons, matching the general matcher's duration test.
    fn count_range(lo: f64, hi: f64, period: f64) -> Option<(usize, usize)> {
        if hi < lo {
            return None;
        }
        let mut gmin = (lo / period).ceil();
        while gmin >= 1.0 && (gmin - 1.0) * period >= lo {
            gmin -= 1.0;
        }
        while gmin * period < lo {
            gmin += 1.0;
        }
        let mut gmax = (hi / period).floor();
        while (gmax + 1.0) * period <= hi {
            gmax += 1.0;
        }
        while gmax >= 0.0 && gmax * period > hi {
            gmax -= 1.0;
        }
        if gmax < gmin.max(0.0) || gmax > usize::MAX as f64 {
            return None;
        }
        Some((gmin.max(0.0) as usize, gmax as usize))
    }

    /// Collects matches into `set`; with `only_end`, only matches ending at
    /// that index.
    fn collect_matches(&self, values: &[f64], only_end: Option<usize>, set: &mut BTreeSet<IndexInterval>) {
        let n = values.len();
        let run_ends = |center: f64, delta: f64| -> Vec<usize> {
            let mut runs = vec![0usize; n];
            let mut acc = 0;
            for (i, &v) in values.iter().enumerate() {
                acc = if (v - center).abs() <= delta { acc + 1 } else { 0 };
                runs[i] = acc;
            }
            runs
        };
        let runs1 = run_ends(self.center1, self.delta1);
        let runs2 = run_ends(self.center2, self.delta2);
        let ends: Box<dyn Iterator<Item = usize>> = match only_end {
            Some(e) => Box::new(std::iter::once(e)),
            None => Box::new(self.run1 + self.gap_min + self.run2..=n),
        };
        for e in ends {
            if e < self.run1 + self.gap_min + self.run2 || e > n {
                continue;
            }
            if runs2[e - 1] < self.run2 {
                continue;
            }
            let mid_end = e - self.run2;
            for g in self.gap_min..=self.gap_max.min(mid_end.saturating_sub(self.run1)) {
                let first_end = mid_end - g;
                if first_end >= self.run1 && runs1[first_end - 1] >= self.run1 {
                    set.insert(IndexInterval::new(first_end - self.run1, e));
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::etre::{brute_force_match, build_transition_expr, parse_etre};
    use crate::SampledSignal;

    fn sig(values: Vec<f64>) -> SampledSignal {
        SampledSignal::new(0.0, 1.0, values).unwrap()
    }

    fn steps(parts: &[(f64, usize)]) -> SampledSignal {
        let mut v = Vec::new();
        for &(value, count) in parts {
            v.extend(std::iter::repeat_n(value, count));
        }
        sig(v)
    }

    #[test]
    fn tube_plus_within_exact_duration() {
        let e = parse_etre("tube(20,5)+ within [3,3]").unwrap();
        let s = sig(vec![20.0, 20.0, 20.0, 20.0]);
        let m = match_all(&e, &s);
        let expect: MatchSet = [IndexInterval::new(0, 3), IndexInterval::new(1, 4)].into_iter().collect();
        assert_eq!(m, expect);
    }

    #[test]
    fn transition_match_set_on_clean_profile() {
        let e = build_transition_expr(20.0, 5.0, 34.0, 10.0, 30.0, 60.0).unwrap();
        let s = steps(&[(20.0, 40), (27.0, 20), (34.0, 40)]);
        let m = match_all(&e, &s);
        let oracle = brute_force_match(&e, &s).unwrap();
        assert_eq!(m, oracle);
        assert!(m.contains(IndexInterval::new(0, 90)));
        assert!(m.contains(IndexInterval::new(10, 100)));
        for iv in m.iter() {
            assert!((60..=120).contains(&iv.len()), "{iv:?}");
        }
    }

    #[test]
    fn transition_with_out_of_tube_gap_too_long() {
        // Middle stretch outside both tubes and longer than d_tmax: no match.
        let e = build_transition_expr(20.0, 5.0, 34.0, 10.0, 30.0, 60.0).unwrap();
        let s = steps(&[(20.0, 40), (50.0, 70), (34.0, 40)]);
        let m = match_all(&e, &s);
        assert_eq!(m, brute_force_match(&e, &s).unwrap());
        assert!(m.is_empty());
    }

    #[test]
    fn transition_overlapping_tubes_admit_middle_speed() {
        // 27 m/s sits inside the motorway tube (34 +- 10), so a long middle
        // stretch at 27 still yields matches whose motorway run starts in it.
        let e = build_transition_expr(20.0, 5.0, 34.0, 10.0, 30.0, 60.0).unwrap();
        let s = steps(&[(20.0, 40), (27.0, 70), (34.0, 40)]);
        let m = match_all(&e, &s);
        assert_eq!(m, brute_force_match(&e, &s).unwrap());
        assert!(m.contains(IndexInterval::new(10, 70)));
    }

    #[test]
    fn wildcard_within_zero_reports_empty_positions() {
        let e = parse_etre("any within [0,0]").unwrap();
        let s = sig(vec![1.0, 2.0, 3.0]);
        let m = match_all(&e, &s);
        let expect: MatchSet = (0..=3).map(|b| IndexInterval::new(b, b)).collect();
        assert_eq!(m, expect);
    }

    #[test]
    fn single_tube_is_pointwise() {
        let e = parse_etre("tube(20,5)").unwrap();
        let m = match_all(&e, &sig(vec![19.0, 26.0]));
        let expect: MatchSet = [IndexInterval::new(0, 1)].into_iter().collect();
        assert_eq!(m, expect);
    }

    #[test]
    fn no_zero_length_matches_for_composites() {
        let e = parse_etre("(any within [0,2]) . (any within [0,2])").unwrap();
        let s = sig(vec![1.0, 2.0]);
        for iv in match_all(&e, &s).iter() {
            assert!(!iv.is_empty());
        }
    }

    #[test]
    fn matches_ending_at_agrees_with_filtered_match_all() {
        let exprs = [
            build_transition_expr(20.0, 5.0, 34.0, 10.0, 3.0, 4.0).unwrap(),
            parse_etre("tube(20,5)+ within [2,2] . any").unwrap(),
            parse_etre("any+ | tube(34,10)").unwrap(),
        ];
        let s = steps(&[(20.0, 6), (29.0, 3), (34.0, 6)]);
        for e in &exprs {
            let all = match_all(e, &s);
            let expect: Vec<usize> =
                all.iter().filter(|iv| iv.end == s.len()).map(|iv| iv.begin).collect();
            assert_eq!(matches_ending_at(e, &s), expect, "{e}");
        }
    }

    #[test]
    fn fast_path_agrees_with_dp_on_transition_expr() {
        // Force the DP path by wrapping the union in a redundant union with
        // an unmatchable branch; compare against the fast-path result.
        let fast = build_transition_expr(20.0, 5.0, 34.0, 10.0, 5.0, 10.0).unwrap();
        let dp = Expr::union(fast.clone(), parse_etre("tube(-1000,0)").unwrap());
        for pattern in [
            vec![(20.0, 8), (27.0, 4), (34.0, 8)],
            vec![(20.0, 5), (34.0, 5)],
            vec![(34.0, 8), (28.0, 2), (20.0, 8), (27.0, 3), (34.0, 9)],
            vec![(20.0, 30)],
        ] {
            let s = steps(&pattern);
            assert_eq!(match_all(&fast, &s), match_all(&dp, &s), "{pattern:?}");
        }
    }

    #[test]
    fn locality_append_preserves_and_prepend_shifts() {
        let e = build_transition_expr(20.0, 5.0, 34.0, 10.0, 3.0, 5.0).unwrap();
        let base = steps(&[(20.0, 5), (27.0, 2), (34.0, 5)]);
        let m = match_all(&e, &base);
        assert!(!m.is_empty());

        let mut appended = base.values.clone();
        appended.extend([50.0, 50.0, 50.0]);
        let ma = match_all(&e, &sig(appended));
        for iv in m.iter() {
            assert!(ma.contains(iv));
        }

        let k = 4;
        let mut prepended = vec![50.0; k];
        prepended.extend(base.values.iter());
        let mp = match_all(&e, &sig(prepended));
        let shifted: MatchSet =
            m.iter().map(|iv| IndexInterval::new(iv.begin + k, iv.end + k)).collect();
        for iv in shifted.iter() {
            assert!(mp.contains(iv), "{iv:?}");
        }
    }

    #[test]
    fn tube_monotone_in_delta() {
        let s = steps(&[(20.0, 6), (24.0, 3), (34.0, 6)]);
        let narrow = build_transition_expr(20.0, 2.0, 34.0, 3.0, 3.0, 6.0).unwrap();
        let wide = build_transition_expr(20.0, 6.0, 34.0, 9.0, 3.0, 6.0).unwrap();
        let mn = match_all(&narrow, &s);
        let mw = match_all(&wide, &s);
        for iv in mn.iter() {
            assert!(mw.contains(iv), "widening delta lost {iv:?}");
        }
    }
}
