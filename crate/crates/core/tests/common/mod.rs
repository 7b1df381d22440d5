//! Brute-force path enumeration used as an independent oracle.
#![allow(dead_code)]

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

pub fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `P(T = n)` for `n ≤ max_len`, where `T` is the hitting time of `b` by a
/// simple walk started at `x` that is pushed up at `−a`. Visits every path.
pub fn hitting_pmf(a: i64, x: i64, b: i64, max_len: usize) -> Vec<BigRational> {
    // Counts of absorbed paths by (length, number of fair coin flips).
    let mut counts: HashMap<(usize, u32), u64> = HashMap::new();
    fn dfs(pos: i64, len: usize, flips: u32, a: i64, b: i64, max_len: usize, counts: &mut HashMap<(usize, u32), u64>) {
        if pos == b {
            *counts.entry((len, flips)).or_default() += 1;
            return;
        }
        if len == max_len {
            return;
        }
        if pos == -a {
            dfs(pos + 1, len + 1, flips, a, b, max_len, counts);
        } else {
            dfs(pos + 1, len + 1, flips + 1, a, b, max_len, counts);
            dfs(pos - 1, len + 1, flips + 1, a, b, max_len, counts);
        }
    }
    dfs(x, 0, 0, a, b, max_len, &mut counts);
    let mut pmf = vec![BigRational::zero(); max_len + 1];
    for ((len, flips), n) in counts {
        pmf[len] += BigRational::new(BigInt::from(n), BigInt::one() << flips);
    }
    pmf
}

/// Step weights of a path: fair flips, frontier-up and frontier-down moves.
type Key = (u32, u32, u32);

fn weight(key: Key, c: &BigRational) -> BigRational {
    let one = BigRational::one();
    let up = &one / (&one + c);
    let down = c / (&one + c);
    BigRational::new(BigInt::one(), BigInt::one() << key.0) * pow(&up, key.1) * pow(&down, key.2)
}

fn pow(v: &BigRational, e: u32) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * v)
}

/// Once-reinforced walk paths from `(x, r)`, until the running maximum first
/// reaches `target`: returns `P(T = n)` for `n ≤ max_len` at each `c`.
pub fn orrw_passage_pmf(x: u64, r: u64, target: u64, max_len: usize, cs: &[BigRational]) -> Vec<Vec<BigRational>> {
    let mut hits: HashMap<(usize, Key), u64> = HashMap::new();
    #[allow(clippy::too_many_arguments)]
    fn dfs(x: u64, r: u64, len: usize, key: Key, target: u64, max_len: usize, hits: &mut HashMap<(usize, Key), u64>) {
        if r == target {
            *hits.entry((len, key)).or_default() += 1;
            return;
        }
        if len == max_len {
            return;
        }
        let next = |x: u64| (x, r.max(x));
        if x == 0 {
            let (nx, nr) = next(1);
            dfs(nx, nr, len + 1, key, target, max_len, hits);
        } else if x < r {
            let (nx, nr) = next(x + 1);
            dfs(nx, nr, len + 1, (key.0 + 1, key.1, key.2), target, max_len, hits);
            dfs(x - 1, r, len + 1, (key.0 + 1, key.1, key.2), target, max_len, hits);
        } else {
            let (nx, nr) = next(x + 1);
            dfs(nx, nr, len + 1, (key.0, key.1 + 1, key.2), target, max_len, hits);
            dfs(x - 1, r, len + 1, (key.0, key.1, key.2 + 1), target, max_len, hits);
        }
    }
    dfs(x, r, 0, (0, 0, 0), target, max_len, &mut hits);
    cs.iter()
        .map(|c| {
            let mut pmf = vec![BigRational::zero(); max_len + 1];
            for (&(len, key), &n) in &hits {
                pmf[len] += weight(key, c) * BigRational::from_integer(BigInt::from(n));
            }
            pmf
        })
        .collect()
}

/// `E[R_m]` for `m = 1..=n`, summing the range of every path prefix.
pub fn orrw_mean_range(n: usize, cs: &[BigRational]) -> Vec<Vec<BigRational>> {
    // Sum of ranges over prefixes, keyed by (length, weight class).
    let mut sums: HashMap<(usize, Key), u64> = HashMap::new();
    fn dfs(x: u64, r: u64, len: usize, key: Key, n: usize, sums: &mut HashMap<(usize, Key), u64>) {
        if len > 0 {
            *sums.entry((len, key)).or_default() += r;
        }
        if len == n {
            return;
        }
        if x == 0 {
            dfs(1, r.max(1), len + 1, key, n, sums);
        } else if x < r {
            dfs(x + 1, r, len + 1, (key.0 + 1, key.1, key.2), n, sums);
            dfs(x - 1, r, len + 1, (key.0 + 1, key.1, key.2), n, sums);
        } else {
            dfs(x + 1, r + 1, len + 1, (key.0, key.1 + 1, key.2), n, sums);
            dfs(x - 1, r, len + 1, (key.0, key.1, key.2 + 1), n, sums);
        }
    }
    dfs(0, 0, 0, (0, 0, 0), n, &mut sums);
    cs.iter()
        .map(|c| {
            let mut out = vec![BigRational::zero(); n];
            for (&(len, key), &total) in &sums {
                out[len - 1] += weight(key, c) * BigRational::from_integer(BigInt::from(total));
            }
            out
        })
        .collect()
}

/// `Σ pmf[n] sⁿ` in exact arithmetic.
pub fn partial_gf(pmf: &[BigRational], s: &BigRational) -> BigRational {
    pmf.iter().rev().fold(BigRational::zero(), |acc, p| acc * s + p)
}

pub fn to_f64(v: &BigRational) -> f64 {
    v.to_f64().expect("finite")
}
