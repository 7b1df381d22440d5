//! Generating functions of hitting and first-passage times.
//!
//! Everything is expressed through the larger root `r_s = (1 + √(1−s²))/s` of
//! `r = (s/2)(r² + 1)` and its logarithm `d_s = log r_s`. Powers of `r_s` are
//! always taken with non-positive exponents so nothing overflows for large
//! sites or small `s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::walk::ReinforcementParams;

/// Upper limit on the number of series terms [`h_ell`] will sum.
pub const MAX_SERIES_TERMS: u64 = 50_000_000;

/// A point `s` of the open unit interval.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EvalPoint(f64);

impl EvalPoint {
    pub fn new(s: f64) -> Result<Self> {
        if s > 0.0 && s < 1.0 {
            Ok(Self(s))
        } else {
            Err(Error::invalid("s", format!("must lie in (0, 1), got {s}")))
        }
    }

    pub fn s(self) -> f64 {
        self.0
    }

    /// `√(1 − s²)`, formed as `√((1 − s)(1 + s))`.
    pub fn sqrt_one_minus_sq(self) -> f64 {
        ((1.0 - self.0) * (1.0 + self.0)).sqrt()
    }
}

/// A truncated series together with a bound on the omitted tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
    pub terms_used: u64,
}

impl SeriesValue {
    pub fn contains(&self, v: f64) -> bool {
        (v - self.value).abs() <= self.tail_bound
    }
}

pub fn root_r(s: EvalPoint) -> f64 {
    (1.0 + s.sqrt_one_minus_sq()) / s.s()
}

/// `d_s = log r_s`, via `log1p` of `r_s − 1 = (1 − s + √(1−s²))/s`.
pub fn log_root(s: EvalPoint) -> f64 {
    ((1.0 - s.s() + s.sqrt_one_minus_sq()) / s.s()).ln_1p()
}

/// `f_t = d_{1−t}`, which behaves like `√(2t)` as `t → 0`.
pub fn expansion_f(t: f64) -> Result<f64> {
    Ok(log_root(EvalPoint::new(1.0 - t)?))
}

/// `φ(x) = (eˣ − 1)/(eˣ + 1)`, evaluated as `tanh(x/2)`.
#[inline]
pub fn phi(x: f64) -> f64 {
    (0.5 * x).tanh()
}

#[inline]
fn r_pow_neg(d: f64, k: f64) -> f64 {
    (-k * d).exp()
}

/// `g_x(s) = E[s^τ_x]` from the ratio `(r^{x−1} + r^{1−x})/(r^x + r^{−x})`,
/// rescaled by `r^{−x}`.
pub fn g(x: u64, s: EvalPoint) -> f64 {
    debug_assert!(x >= 1);
    let d = log_root(s);
    let xf = x as f64;
    let val = (r_pow_neg(d, 1.0) + r_pow_neg(d, 2.0 * xf - 1.0)) / (1.0 + r_pow_neg(d, 2.0 * xf));
    debug_assert!(
        (val - g_dual(x, s)).abs() <= 1e-12 * val,
        "g({x}, {}) disagrees with its hyperbolic form",
        s.s()
    );
    val
}

/// `g_x(s) = s⁻¹(1 − φ(2x·d_s)√(1−s²))`.
pub fn g_dual(x: u64, s: EvalPoint) -> f64 {
    let d = log_root(s);
    (1.0 - phi(2.0 * x as f64 * d) * s.sqrt_one_minus_sq()) / s.s()
}

/// `G_x(s) = E[s^T_x] = s / (1 + c − c·s·g_x(s))`.
pub fn big_g(x: u64, s: EvalPoint, params: &ReinforcementParams) -> f64 {
    let c = params.c();
    s.s() / (1.0 + c - c * s.s() * g(x, s))
}

/// `G_x(s) = s / (1 + c·φ(2x·d_s)·√(1−s²))`.
pub fn big_g_dual(x: u64, s: EvalPoint, params: &ReinforcementParams) -> f64 {
    let d = log_root(s);
    s.s() / (1.0 + params.c() * phi(2.0 * x as f64 * d) * s.sqrt_one_minus_sq())
}

/// `log G_x(s)` in the hyperbolic form, accurate when `G_x(s)` is close to 1.
pub fn log_big_g(x: u64, s: EvalPoint, params: &ReinforcementParams) -> f64 {
    let d = log_root(s);
    s.s().ln() - (params.c() * phi(2.0 * x as f64 * d) * s.sqrt_one_minus_sq()).ln_1p()
}

/// `E_x[s^{T_b}]` for a simple symmetric walk on `{−a, −a+1, …}` reflected
/// at `−a`, started at `x`, with `T_b` the hitting time of `b`.
pub fn hitting_gf(a: u64, x: i64, b: i64, s: EvalPoint) -> Result<f64> {
    let a = a as i64;
    if x < -a {
        return Err(Error::invalid("x", format!("start {x} lies below the barrier -{a}")));
    }
    if x > b {
        return Err(Error::invalid("x", format!("start {x} lies above the target {b}")));
    }
    let d = log_root(s);
    // Divide through by r^b; both exponents below are non-negative.
    let num = r_pow_neg(d, (b - x) as f64) + r_pow_neg(d, (2 * a + x + b) as f64);
    let den = 1.0 + r_pow_neg(d, (2 * a + 2 * b) as f64);
    Ok(num / den)
}

/// `E[s^{S_k}] = s ∏_{i<k} G_i(s)`.
pub fn s_k_gf(k: u64, s: EvalPoint, params: &ReinforcementParams) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", "target range must be at least 1"));
    }
    Ok((1..k).fold(s.s(), |acc, i| acc * big_g(i, s, params)))
}

/// Rising factorial `k (k+1) ⋯ (k+ℓ−1)`, equal to 1 for `ℓ = 0`.
pub fn rising_factorial(k: f64, ell: u32) -> f64 {
    (0..ell).fold(1.0, |acc, j| acc * (k + j as f64))
}

/// `Σ_{m≥0} rf(K+m, ℓ)·ρ^m` in closed form for `0 ≤ ρ < 1`:
/// `Σ_{j=0}^{ℓ} (ℓ!/j!)·(K+ℓ−1)^{(j)}·ρ^{ℓ−j} / (1−ρ)^{ℓ−j+1}`, with `N^{(j)}` falling.
pub fn rising_geometric_sum(big_k: f64, ell: u32, rho: f64) -> f64 {
    debug_assert!((0.0..1.0).contains(&rho));
    let n = big_k + ell as f64 - 1.0;
    let one_minus = 1.0 - rho;
    let mut total = 0.0;
    let mut falling = 1.0; // N^{(j)}
    let mut ell_fact_over_j_fact = (1..=ell).fold(1.0, |a, i| a * i as f64);
    for j in 0..=ell {
        let p = (ell - j) as i32;
        total += ell_fact_over_j_fact * falling * rho.powi(p) / one_minus.powi(p + 1);
        falling *= n - j as f64;
        ell_fact_over_j_fact /= (j + 1) as f64;
    }
    total
}

/// `H_ℓ(s) = Σ_{n≥1} sⁿ E[R_n(R_n+1)⋯(R_n+ℓ)]`, summed through the
/// first-passage representation
/// `(ℓ+1)/(1−s) · Σ_{k≥1} rf(k, ℓ) · s ∏_{i<k} G_i(s)`.
///
/// The series stops once the tail is provably below `rel_tol` times the
/// partial sum. Because `G_i(s)` decreases in `i`, every later product is
/// dominated by a geometric sequence of ratio `G_{k+1}(s)`, which sums in
/// closed form by [`rising_geometric_sum`].
pub fn h_ell(ell: u32, s: EvalPoint, params: &ReinforcementParams, rel_tol: f64) -> Result<SeriesValue> {
    if !(rel_tol > 0.0) {
        return Err(Error::invalid("rel_tol", format!("must be positive, got {rel_tol}")));
    }
    let coef = (ell as f64 + 1.0) / (1.0 - s.s()) * s.s();
    let mut prod = 1.0; // ∏_{i<k} G_i
    let mut g_next = big_g(1, s, params);
    let mut sum = 0.0;
    let mut k: u64 = 1;
    loop {
        sum += coef * rising_factorial(k as f64, ell) * prod;
        prod *= g_next;
        g_next = big_g(k + 1, s, params);
        let tail = coef * prod * rising_geometric_sum((k + 1) as f64, ell, g_next);
        if tail <= rel_tol * sum || prod == 0.0 {
            return Ok(SeriesValue {
                value: sum,
                tail_bound: tail,
                terms_used: k,
            });
        }
        if k >= MAX_SERIES_TERMS {
            return Err(Error::Certificate(format!(
                "H_{ell}({}) tail bound {tail:e} still above {rel_tol:e} x partial sum after {k} terms",
                s.s()
            )));
        }
        k += 1;
    }
}

/// Markov bound `P(S_k ≤ n) ≤ E[s^{S_k}] / sⁿ`, in log form.
pub fn log_passage_lower_tail_bound(k: u64, n: u64, s: EvalPoint, params: &ReinforcementParams) -> f64 {
    let log_gf: f64 = s.s().ln() + (1..k).map(|i| log_big_g(i, s, params)).sum::<f64>();
    log_gf - n as f64 * s.s().ln()
}
