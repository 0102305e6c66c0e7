//! Random expression and signal generators for randomized matcher tests.
//! Not part of the public API surface.

use rand::Rng;

use crate::etre::Expr;
use crate::signal::SampledSignal;

/// A random expression with at most `depth` levels of combinators. Values
/// are chosen so that tube predicates hit random signals often enough for
/// matches to exist.
pub fn random_expr(rng: &mut impl Rng, depth: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.3) {
        return if rng.random_bool(0.25) {
            Expr::Any
        } else {
            let center = rng.random_range(0.0..40.0f64);
            let delta = rng.random_range(0.0..10.0f64);
            Expr::tube(center, delta).expect("delta >= 0")
        };
    }
    match rng.random_range(0..4) {
        0 => Expr::concat(random_expr(rng, depth - 1), random_expr(rng, depth - 1)),
        1 => Expr::union(random_expr(rng, depth - 1), random_expr(rng, depth - 1)),
        2 => Expr::plus(random_expr(rng, depth - 1)),
        _ => {
            let lo = rng.random_range(0..6) as f64;
            let hi = lo + rng.random_range(0..8) as f64;
            Expr::within(random_expr(rng, depth - 1), lo, hi).expect("lo <= hi")
        }
    }
}

/// A random step-ish signal at 1 Hz: values cluster around a few levels so
/// tube runs of several samples occur.
pub fn random_signal(rng: &mut impl Rng, max_len: usize) -> SampledSignal {
    let n = rng.random_range(1..=max_len.max(1));
    let mut values = Vec::with_capacity(n);
    let mut level = rng.random_range(0.0..40.0f64);
    for _ in 0..n {
        if rng.random_bool(0.15) {
            level = rng.random_range(0.0..40.0f64);
        }
        values.push(level + rng.random_range(-1.0..1.0f64));
    }
    SampledSignal::new(0.0, 1.0, values).expect("positive period")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::etre::{brute_force_match, match_all};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matcher_equals_oracle_on_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..200 {
            let expr = random_expr(&mut rng, 3);
            let signal = random_signal(&mut rng, 60);
            let fast = match_all(&expr, &signal);
            let oracle = brute_force_match(&expr, &signal).unwrap();
            assert_eq!(fast, oracle, "case {case}: {expr} on {} samples", signal.len());
        }
    }
}
