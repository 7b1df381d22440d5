//! Limit constants of the range moments and numerical checks of the
//! power-series-to-coefficient transfer.
//!
//! With `J_ℓ(c) = ∫₀^∞ x^{ℓ−1} sech^c(x) dx`,
//!
//! * `E[(R_n/√n)^ℓ] → J_ℓ(c) / (2^{(ℓ−2)/2} Γ(ℓ/2))`,
//! * `H_ℓ(s)(1−s)^{(ℓ+3)/2} → K_ℓ = (ℓ+1) J_{ℓ+1}(c) / 2^{(ℓ+1)/2}` as `s ↑ 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genfun::{self, EvalPoint};
use crate::quadrature;
use crate::walk::ReinforcementParams;

/// Absolute tolerance used when callers do not ask for one.
pub const DEFAULT_ABS_TOL: f64 = 1e-12;

/// `J_ℓ(c)` and its derived coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub c: f64,
    pub ell: u32,
    pub j: f64,
    /// `K_{ℓ−1}`.
    pub k: f64,
    pub m: f64,
    pub quad_error: f64,
}

impl LimitConstants {
    pub fn compute(params: &ReinforcementParams, ell: u32, abs_tol: f64) -> Result<Self> {
        let j = j_ell_with_error(params.c(), ell, abs_tol)?;
        let scale = (ell as f64) / 2f64.powf(ell as f64 / 2.0);
        Ok(Self {
            c: params.c(),
            ell,
            j: j.value,
            k: scale * j.value,
            m: j.value / moment_denominator(ell),
            quad_error: j.error,
        })
    }
}

/// `log sech x`, stable for large `x`.
#[inline]
fn log_sech(x: f64) -> f64 {
    std::f64::consts::LN_2 - x - (-2.0 * x).exp().ln_1p()
}

/// `∫_X^∞ x^{ℓ−1} 2^c e^{−cx} dx = 2^c Γ(ℓ, cX) / c^ℓ`, with the integer-order
/// incomplete gamma `Γ(ℓ, z) = (ℓ−1)! e^{−z} Σ_{j<ℓ} z^j / j!`.
pub fn sech_power_tail_bound(c: f64, ell: u32, cutoff: f64) -> f64 {
    let z = c * cutoff;
    let mut term = 1.0;
    let mut sum = 0.0;
    for j in 0..ell {
        if j > 0 {
            term *= z / j as f64;
        }
        sum += term;
    }
    let fact: f64 = (1..ell).map(|i| i as f64).product();
    (c * std::f64::consts::LN_2 - z).exp() * fact * sum / c.powi(ell as i32)
}

fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid("c", format!("must be a finite positive real, got {c}")))
    }
}

/// `J_ℓ(c)` with a combined quadrature and tail error.
pub fn j_ell_with_error(c: f64, ell: u32, abs_tol: f64) -> Result<quadrature::Quadrature> {
    check_c(c)?;
    if ell == 0 {
        return Err(Error::invalid("ell", "must be at least 1"));
    }
    if !(abs_tol > 0.0) {
        return Err(Error::invalid("abs_tol", format!("must be positive, got {abs_tol}")));
    }
    // sech^c x ≤ 2^c e^{−cx}, so the tail past the cutoff is bounded in closed form.
    let mut cutoff: f64 = 8.0;
    let mut tail = sech_power_tail_bound(c, ell, cutoff);
    while tail > abs_tol / 4.0 {
        cutoff *= 1.25;
        tail = sech_power_tail_bound(c, ell, cutoff);
    }
    let power = ell as i32 - 1;
    let integrand = move |x: f64| {
        if x == 0.0 && power == 0 {
            return 1.0;
        }
        x.powi(power) * (c * log_sech(x)).exp()
    };
    // Split at the unit scale so the bulk near the origin gets its own panels.
    let knot = (4.0 / c).min(cutoff / 2.0);
    let head = quadrature::integrate(integrand, 0.0, knot, abs_tol / 4.0)?;
    let body = quadrature::integrate(integrand, knot, cutoff, abs_tol / 4.0)?;
    Ok(quadrature::Quadrature {
        value: head.value + body.value,
        error: head.error + body.error + tail,
        panels: head.panels + body.panels,
    })
}

/// `J_ℓ(c) = 2^c ∫₀^∞ x^{ℓ−1} (eˣ/(e^{2x}+1))^c dx = ∫₀^∞ x^{ℓ−1} sech^c(x) dx`.
pub fn j_ell(c: f64, ell: u32, abs_tol: f64) -> Result<f64> {
    Ok(j_ell_with_error(c, ell, abs_tol)?.value)
}

/// `K_ℓ = (ℓ+1) J_{ℓ+1}(c) / 2^{(ℓ+1)/2}`.
pub fn k_ell(c: f64, ell: u32, abs_tol: f64) -> Result<f64> {
    let j = j_ell(c, ell + 1, abs_tol)?;
    Ok((ell as f64 + 1.0) * j / 2f64.powf((ell as f64 + 1.0) / 2.0))
}

/// `Γ(m/2)` for `m ≥ 1`, by `Γ(x+1) = xΓ(x)` from `Γ(1/2) = √π` and `Γ(1) = 1`.
pub fn half_integer_gamma(twice_arg: u32) -> Result<f64> {
    if twice_arg == 0 {
        return Err(Error::invalid("twice_arg", "Γ has a pole at 0"));
    }
    let (mut value, mut x) = if twice_arg % 2 == 1 {
        (std::f64::consts::PI.sqrt(), 0.5)
    } else {
        (1.0, 1.0)
    };
    while 2.0 * x < twice_arg as f64 {
        value *= x;
        x += 1.0;
    }
    Ok(value)
}

fn moment_denominator(ell: u32) -> f64 {
    2f64.powf((ell as f64 - 2.0) / 2.0) * half_integer_gamma(ell).expect("ell >= 1")
}

/// `lim E[(R_n/√n)^ℓ] = J_ℓ(c) / (2^{(ℓ−2)/2} Γ(ℓ/2))`.
pub fn moment_limit(c: f64, ell: u32) -> Result<f64> {
    Ok(j_ell(c, ell, DEFAULT_ABS_TOL)? / moment_denominator(ell))
}

/// Catalan's constant `G = Σ_{n≥0} (−1)ⁿ/(2n+1)²`.
///
/// The first terms are summed directly and the remainder goes through Euler's
/// transform. The terms form a completely monotone sequence, so each
/// transformed term is at most half the previous one and the omitted tail is
/// bounded by the last term added.
pub fn catalan(abs_tol: f64) -> Result<f64> {
    if !(abs_tol > 0.0) {
        return Err(Error::invalid("abs_tol", format!("must be positive, got {abs_tol}")));
    }
    const HEAD: usize = 8;
    let a = |n: usize| 1.0 / ((2 * n + 1) as f64).powi(2);
    let head: f64 = (0..HEAD).map(|n| if n % 2 == 0 { a(n) } else { -a(n) }).sum();

    // diffs[j] holds (−1)^k Δ^k a_{HEAD+j} after k rounds of differencing.
    let max_k = 200;
    let mut diffs: Vec<f64> = (0..=max_k).map(|j| a(HEAD + j)).collect();
    let mut tail = 0.0;
    let mut scale = 0.5;
    for k in 0..max_k {
        let term = diffs[0] * scale;
        tail += term;
        if term <= abs_tol / 2.0 {
            let sign = if HEAD % 2 == 0 { 1.0 } else { -1.0 };
            return Ok(head + sign * tail);
        }
        for j in 0..(max_k - k) {
            diffs[j] -= diffs[j + 1];
        }
        scale *= 0.5;
    }
    Err(Error::Certificate(format!("Catalan series did not reach {abs_tol:e}")))
}

/// Ratios from a nonnegative sequence `a_1, a_2, …` against the growth
/// predicted by `Σ aₙ xⁿ ~ A (1−x)^{−α}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauberianReport {
    pub amplitude: f64,
    pub alpha: f64,
    /// `ρ_N = Σ_{k≤N} a_k / (A N^α / Γ(α+1))`.
    pub partial_sum_ratios: Vec<f64>,
    /// `ρ'_N = a_N / (A α N^{α−1} / Γ(α+1))`, when `α > 1` and `a` is nondecreasing.
    pub term_ratios: Option<Vec<f64>>,
}

pub fn tauberian_check(a: &[f64], amplitude: f64, alpha: f64) -> Result<TauberianReport> {
    if let Some((index, &value)) = a.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeEntry { index, value });
    }
    if !(amplitude > 0.0) {
        return Err(Error::invalid("A", format!("must be positive, got {amplitude}")));
    }
    if !(alpha >= 0.0) {
        return Err(Error::invalid("alpha", format!("must be non-negative, got {alpha}")));
    }
    let g = statrs::function::gamma::gamma(alpha + 1.0);
    let mut partial = 0.0;
    let partial_sum_ratios = a
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            partial += v;
            let n = (i + 1) as f64;
            partial / (amplitude * n.powf(alpha) / g)
        })
        .collect();
    let term_ratios = if alpha > 1.0 {
        if let Some(i) = a.windows(2).position(|w| w[1] < w[0]) {
            return Err(Error::invalid(
                "a",
                format!("term ratios need a nondecreasing sequence; a_{} > a_{}", i + 1, i + 2),
            ));
        }
        Some(
            a.iter()
                .enumerate()
                .map(|(i, &v)| {
                    let n = (i + 1) as f64;
                    v / (amplitude * alpha * n.powf(alpha - 1.0) / g)
                })
                .collect(),
        )
    } else {
        None
    };
    Ok(TauberianReport {
        amplitude,
        alpha,
        partial_sum_ratios,
        term_ratios,
    })
}

/// One point of [`blowup_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupRow {
    pub s: f64,
    pub h: f64,
    pub tail_bound: f64,
    pub terms: u64,
    pub ratio: f64,
}

/// `H_ℓ(s)(1−s)^{(ℓ+3)/2} / K_ℓ` along `s_grid`.
pub fn blowup_check(ell: u32, params: &ReinforcementParams, s_grid: &[f64]) -> Result<Vec<BlowupRow>> {
    if s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("s_grid", "must be strictly increasing"));
    }
    let k = k_ell(params.c(), ell, DEFAULT_ABS_TOL)?;
    s_grid
        .iter()
        .map(|&s| {
            let point = EvalPoint::new(s)?;
            let rel_tol = (1e-8 * (1.0 - s)).min(1e-10);
            let h = genfun::h_ell(ell, point, params, rel_tol)?;
            let scale = (1.0 - s).powf((ell as f64 + 3.0) / 2.0);
            Ok(BlowupRow {
                s,
                h: h.value,
                tail_bound: h.tail_bound,
                terms: h.terms_used,
                ratio: h.value * scale / k,
            })
        })
        .collect()
}
