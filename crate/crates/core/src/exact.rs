//! Forward dynamic programming for the joint law of position and running
//! maximum `(X_n, R_n)`.
//!
//! States are stored in bands, one band per value of the running maximum `r`.
//! Within a band only the sites with the parity of `n` can carry mass, so band
//! `r` at time `n` is a dense vector whose slot `j` holds the mass of
//! `x = 2j + (n mod 2)`.
//!
//! The same propagation runs in two arithmetics:
//!
//! * `f64` with pruning and an explicit account of discarded mass,
//! * big integers scaled by `(2(a+b))^n` when `c = a/b`, which is exact and
//!   needs no gcd work; masses are turned into rationals on demand.

use std::ops::{Add, Mul};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genfun::{self, EvalPoint};
use crate::walk::{ReinforcementParams, WalkState};

/// Default threshold below which a band's mass is discarded.
pub const DEFAULT_EPS_PRUNE: f64 = 1e-14;

/// Largest horizon for which rational arithmetic is used automatically.
pub const RATIONAL_MAX_N: u64 = 512;

/// Single-state masses below this are flushed to zero (and accounted) to keep
/// the propagation out of subnormal arithmetic.
const FLUSH: f64 = 1e-280;

pub trait Weight: Clone + Zero + Add<Output = Self> + Mul<Output = Self> {}
impl<T: Clone + Zero + Add<Output = T> + Mul<Output = T>> Weight for T {}

/// Transition weights of the walk in some arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    /// Reflection at the origin.
    pub forced: T,
    /// Either direction in the interior of the range.
    pub half: T,
    /// Onto a new site from the running maximum.
    pub up: T,
    /// Back from the running maximum.
    pub down: T,
}

impl Kernel<f64> {
    pub fn probabilities(params: &ReinforcementParams) -> Self {
        let c = params.c();
        Kernel {
            forced: 1.0,
            half: 0.5,
            up: 1.0 / (1.0 + c),
            down: c / (1.0 + c),
        }
    }
}

impl Kernel<BigInt> {
    /// Integer weights for `c = num/den`, all multiplied by `2(num + den)`.
    /// Returns the kernel and that per-step scale.
    pub fn scaled_integer(num: u64, den: u64) -> (Self, BigInt) {
        let a = BigInt::from(num);
        let b = BigInt::from(den);
        let sum = &a + &b;
        let scale = BigInt::from(2) * &sum;
        (
            Kernel {
                forced: scale.clone(),
                half: sum,
                up: BigInt::from(2) * b,
                down: BigInt::from(2) * a,
            },
            scale,
        )
    }
}

fn slots(r: u64, parity: u64) -> usize {
    if r >= parity {
        ((r - parity) / 2 + 1) as usize
    } else {
        0
    }
}

/// Mass over `(x, r)` pairs at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution<T> {
    n: u64,
    r_lo: u64,
    bands: Vec<Vec<T>>,
    pruned_mass: f64,
}

impl<T: Weight> StateDistribution<T> {
    /// Point mass `weight` at `state`.
    pub fn point(state: WalkState, weight: T) -> Result<Self> {
        if !state.is_valid() {
            return Err(Error::invalid("state", format!("{state:?} is not a reachable state")));
        }
        let parity = state.n % 2;
        let mut band = vec![T::zero(); slots(state.r, parity)];
        band[((state.x - parity) / 2) as usize] = weight;
        Ok(Self {
            n: state.n,
            r_lo: state.r,
            bands: vec![band],
            pruned_mass: 0.0,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    /// Lowest and highest running maximum currently stored.
    pub fn r_bounds(&self) -> (u64, u64) {
        (self.r_lo, self.r_lo + self.bands.len() as u64 - 1)
    }

    fn parity(&self) -> u64 {
        self.n % 2
    }

    pub fn mass(&self, x: u64, r: u64) -> T {
        let p = self.parity();
        if r < self.r_lo || x > r || x % 2 != p {
            return T::zero();
        }
        self.bands
            .get((r - self.r_lo) as usize)
            .and_then(|b| b.get(((x - p) / 2) as usize))
            .cloned()
            .unwrap_or_else(T::zero)
    }

    /// All stored `(x, r, mass)` triples, zero masses included.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64, &T)> + '_ {
        let p = self.parity();
        self.bands.iter().enumerate().flat_map(move |(i, band)| {
            let r = self.r_lo + i as u64;
            band.iter().enumerate().map(move |(j, m)| (2 * j as u64 + p, r, m))
        })
    }

    /// Mass of each running-maximum value, starting at `r_bounds().0`.
    pub fn band_masses(&self) -> Vec<T> {
        self.bands
            .iter()
            .map(|b| b.iter().cloned().fold(T::zero(), |a, v| a + v))
            .collect()
    }

    /// Pushes every band one step through `kernel`; returns the mass entering
    /// the band above the current top, which the caller places or absorbs.
    fn advance_bands(&mut self, kernel: &Kernel<T>, spare: &mut Vec<Vec<T>>) -> T {
        let p_old = self.parity();
        let p_new = 1 - p_old;
        let r_hi = self.r_lo + self.bands.len() as u64 - 1;

        spare.resize_with(self.bands.len(), Vec::new);
        for (i, new) in spare.iter_mut().enumerate() {
            let r = self.r_lo + i as u64;
            let below = if i > 0 { Some(self.bands[i - 1].as_slice()) } else { None };
            step_band(r, &self.bands[i], below, p_new, kernel, new);
        }

        let top = &self.bands[self.bands.len() - 1];
        let inflow = if r_hi % 2 == p_old {
            let w = if r_hi == 0 { &kernel.forced } else { &kernel.up };
            w.clone() * top[top.len() - 1].clone()
        } else {
            T::zero()
        };

        std::mem::swap(&mut self.bands, spare);
        self.n += 1;
        inflow
    }

    fn push_top(&mut self, inflow: T) {
        let r = self.r_lo + self.bands.len() as u64;
        let mut band = vec![T::zero(); slots(r, self.parity())];
        let last = band.len() - 1;
        band[last] = inflow;
        self.bands.push(band);
    }

    /// Drops leading bands whose mass is exactly zero.
    fn drop_empty_bottom(&mut self) {
        let empty = self
            .bands
            .iter()
            .take(self.bands.len() - 1)
            .take_while(|b| b.iter().all(|v| v.is_zero()))
            .count();
        if empty > 0 {
            self.bands.drain(..empty);
            self.r_lo += empty as u64;
        }
    }

    /// One exact step with no pruning.
    pub fn step_exact(&mut self, kernel: &Kernel<T>) {
        let mut spare = Vec::new();
        self.step_exact_with(kernel, &mut spare);
    }

    fn step_exact_with(&mut self, kernel: &Kernel<T>, spare: &mut Vec<Vec<T>>) {
        let inflow = self.advance_bands(kernel, spare);
        if !inflow.is_zero() {
            self.push_top(inflow);
        }
        self.drop_empty_bottom();
    }
}

impl<T: Weight + One> StateDistribution<T> {
    /// Point mass at the origin at time 0.
    pub fn initial() -> Self {
        Self::point(WalkState::ORIGIN, T::one()).expect("origin is valid")
    }
}

/// New contents of band `r` (parity `p_new`) from the old band and the band below.
fn step_band<T: Weight>(r: u64, old: &[T], below: Option<&[T]>, p_new: u64, k: &Kernel<T>, new: &mut Vec<T>) {
    let p_old = 1 - p_new;
    let len = slots(r, p_new);
    new.clear();
    new.resize(len, T::zero());
    if len == 0 {
        return;
    }
    let old_at = |x: u64| -> T {
        old.get(((x - p_old) / 2) as usize).cloned().unwrap_or_else(T::zero)
    };
    let edge = |xn: u64| -> T {
        let mut v = T::zero();
        if xn >= 1 {
            let x = xn - 1;
            let w = if x == 0 { &k.forced } else { &k.half };
            v = v + w.clone() * old_at(x);
        }
        if xn < r {
            let x = xn + 1;
            let w = if x == r { &k.down } else { &k.half };
            v = v + w.clone() * old_at(x);
        }
        if xn == r {
            if let Some(b) = below {
                let x = r - 1;
                let w = if x == 0 { &k.forced } else { &k.up };
                if let Some(m) = b.get(((x - p_old) / 2) as usize) {
                    v = v + w.clone() * m.clone();
                }
            }
        }
        v
    };

    // Interior slots: 2 ≤ x' ≤ r − 2, both neighbours weighted by one half.
    // Slot i of the new band reads old slots i + p_new − 1 and i + p_new.
    let interior_end = if r >= 2 + p_new { ((r - 2 - p_new) / 2) as usize } else { 0 };
    if interior_end >= 1 {
        let off = p_new as usize;
        let dst = &mut new[1..1 + interior_end];
        let prev = &old[off..off + interior_end];
        let next = &old[off + 1..off + 1 + interior_end];
        for ((d, a), b) in dst.iter_mut().zip(prev).zip(next) {
            *d = k.half.clone() * (a.clone() + b.clone());
        }
    }
    new[0] = edge(p_new);
    for (i, slot) in new.iter_mut().enumerate().skip(interior_end + 1) {
        *slot = edge(2 * i as u64 + p_new);
    }
}

/// How the floating-point propagation discards mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruningPolicy {
    /// The lowest band is dropped once its total mass falls below this.
    pub eps_prune: f64,
    /// No band above this running maximum is created; mass reaching it is discarded.
    pub r_cap: u64,
}

impl PruningPolicy {
    /// Policy for a run up to `n_max`, with the band cap chosen so that the
    /// probability of the maximum exceeding it is provably below `eps_prune`.
    pub fn for_horizon(params: &ReinforcementParams, n_max: u64, eps_prune: f64) -> Result<Self> {
        if !(eps_prune >= 0.0) {
            return Err(Error::invalid("eps_prune", format!("must be non-negative, got {eps_prune}")));
        }
        let target = if eps_prune > 0.0 { eps_prune } else { 1e-300 };
        Ok(Self {
            eps_prune,
            r_cap: range_cap(params, n_max, target),
        })
    }
}

impl StateDistribution<f64> {
    pub fn total_mass(&self) -> f64 {
        self.bands.iter().flatten().sum()
    }

    /// One step with pruning; discarded mass is added to `pruned_mass`.
    pub fn step_pruned(&mut self, kernel: &Kernel<f64>, policy: &PruningPolicy, spare: &mut Vec<Vec<f64>>) {
        let inflow = self.advance_bands(kernel, spare);
        let next_r = self.r_lo + self.bands.len() as u64;
        if inflow >= FLUSH && next_r <= policy.r_cap {
            self.push_top(inflow);
        } else {
            self.pruned_mass += inflow;
        }

        let mut flushed = 0.0;
        for band in &mut self.bands {
            for v in band.iter_mut() {
                if *v < FLUSH {
                    flushed += *v;
                    *v = 0.0;
                }
            }
        }
        self.pruned_mass += flushed;

        while self.bands.len() > 1 {
            let m: f64 = self.bands[0].iter().sum();
            if m < policy.eps_prune || m == 0.0 {
                self.pruned_mass += m;
                self.bands.remove(0);
                self.r_lo += 1;
            } else {
                break;
            }
        }
        while self.bands.len() > 1 && self.bands[self.bands.len() - 1].iter().all(|&v| v == 0.0) {
            self.bands.pop();
        }
    }
}

/// Pushes `dist` one step through the kernel of `params` and prunes per `policy`.
pub fn evolve(dist: &StateDistribution<f64>, params: &ReinforcementParams, policy: &PruningPolicy) -> StateDistribution<f64> {
    let mut next = dist.clone();
    next.step_pruned(&Kernel::probabilities(params), policy, &mut Vec::new());
    next
}

/// Smallest `r` with `P(R_n > r)` certified below `target` by the Markov bound
/// `P(S_{r+1} ≤ n) ≤ s^{−n} E[s^{S_{r+1}}]`, minimised over a grid of `s`.
pub fn range_cap(params: &ReinforcementParams, n: u64, target: f64) -> u64 {
    let log_target = target.ln();
    let mut best = n; // R_n ≤ n always
    for i in 0..=160 {
        // t = 1 − s, log-spaced on [1e-10, 0.9]
        let t = 10f64.powf(-10.0 + (0.9f64.log10() + 10.0) * i as f64 / 160.0);
        let Ok(s) = EvalPoint::new(1.0 - t) else { continue };
        let log_s = s.s().ln();
        // log bound for k = 1 is (1 − n) log s
        let mut log_bound = (1.0 - n as f64) * log_s;
        let mut k: u64 = 1;
        while k <= best {
            if log_bound <= log_target {
                best = best.min(k.saturating_sub(1));
                break;
            }
            log_bound += genfun::log_big_g(k, s, params);
            k += 1;
        }
    }
    best
}

/// Drives the pruned floating-point propagation from the origin.
pub struct RangeEvolution {
    dist: StateDistribution<f64>,
    kernel: Kernel<f64>,
    policy: PruningPolicy,
    spare: Vec<Vec<f64>>,
}

impl RangeEvolution {
    pub fn new(params: &ReinforcementParams, policy: PruningPolicy) -> Self {
        Self {
            dist: StateDistribution::initial(),
            kernel: Kernel::probabilities(params),
            policy,
            spare: Vec::new(),
        }
    }

    pub fn step(&mut self) {
        self.dist.step_pruned(&self.kernel, &self.policy, &mut self.spare);
    }

    pub fn distribution(&self) -> &StateDistribution<f64> {
        &self.dist
    }

    pub fn policy(&self) -> &PruningPolicy {
        &self.policy
    }

    /// `Σ_r w(r)·P(R_n = r)` over the live bands.
    pub fn expect(&self, w: impl Fn(f64) -> f64) -> f64 {
        let r_lo = self.dist.r_lo;
        self.dist
            .bands
            .iter()
            .enumerate()
            .map(|(i, b)| w((r_lo + i as u64) as f64) * b.iter().sum::<f64>())
            .sum()
    }
}

/// One row of a [`MomentTable`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub n: u64,
    pub ell: u32,
    pub value: f64,
    pub error_bound: f64,
}

/// `E[R_m^ℓ]` for `1 ≤ m ≤ n_max`, `1 ≤ ℓ ≤ ℓ_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub rows: Vec<MomentRow>,
    pub pruned_mass: f64,
    pub rational: bool,
}

impl MomentTable {
    pub fn get(&self, n: u64, ell: u32) -> Option<&MomentRow> {
        self.rows.iter().find(|r| r.n == n && r.ell == ell)
    }

    pub fn series(&self, ell: u32) -> impl Iterator<Item = &MomentRow> + '_ {
        self.rows.iter().filter(move |r| r.ell == ell)
    }
}

fn check_moment_args(n_max: u64, ell_max: u32) -> Result<()> {
    if n_max == 0 {
        return Err(Error::invalid("n", "horizon must be at least 1"));
    }
    if ell_max == 0 {
        return Err(Error::invalid("ell", "moment order must be at least 1"));
    }
    Ok(())
}

/// Range moments with a certified error per row.
///
/// When `c` was given as a ratio and `n_max ≤ RATIONAL_MAX_N` the values are
/// exact (converted to `f64` at the end) and the bounds are zero. Otherwise
/// the pruned floating-point propagation is used and each row carries
/// `pruned_mass_so_far × n_max^ℓ`, which charges every discarded path the
/// largest range it could have.
pub fn range_moments(params: &ReinforcementParams, n_max: u64, ell_max: u32, eps_prune: f64) -> Result<MomentTable> {
    check_moment_args(n_max, ell_max)?;
    if params.ratio().is_some() && n_max <= RATIONAL_MAX_N {
        let exact = range_moments_rational(params, n_max, ell_max)?;
        let rows = exact
            .iter()
            .enumerate()
            .flat_map(|(i, per_ell)| {
                per_ell.iter().enumerate().map(move |(l, v)| MomentRow {
                    n: i as u64 + 1,
                    ell: l as u32 + 1,
                    value: v.to_f64().unwrap_or(f64::NAN),
                    error_bound: 0.0,
                })
            })
            .collect();
        return Ok(MomentTable {
            rows,
            pruned_mass: 0.0,
            rational: true,
        });
    }
    let policy = PruningPolicy::for_horizon(params, n_max, eps_prune)?;
    let mut evo = RangeEvolution::new(params, policy);
    let mut rows = Vec::with_capacity(n_max as usize * ell_max as usize);
    for m in 1..=n_max {
        evo.step();
        let pruned = evo.distribution().pruned_mass();
        for ell in 1..=ell_max {
            rows.push(MomentRow {
                n: m,
                ell,
                value: evo.expect(|r| r.powi(ell as i32)),
                error_bound: pruned * (n_max as f64).powi(ell as i32),
            });
        }
    }
    Ok(MomentTable {
        rows,
        pruned_mass: evo.distribution().pruned_mass(),
        rational: false,
    })
}

/// `a_m = E[R_m (R_m+1) ⋯ (R_m+ℓ)]` for `m = 1..=n_max`, each with the bound
/// `pruned_mass × rf(n_max, ℓ+1)`.
pub fn rising_factorial_moments(
    params: &ReinforcementParams,
    n_max: u64,
    ell: u32,
    eps_prune: f64,
) -> Result<Vec<(f64, f64)>> {
    check_moment_args(n_max, 1)?;
    let policy = PruningPolicy::for_horizon(params, n_max, eps_prune)?;
    let mut evo = RangeEvolution::new(params, policy);
    let worst = genfun::rising_factorial(n_max as f64, ell + 1);
    let mut out = Vec::with_capacity(n_max as usize);
    for _ in 0..n_max {
        evo.step();
        let v = evo.expect(|r| genfun::rising_factorial(r, ell + 1));
        out.push((v, evo.distribution().pruned_mass() * worst));
    }
    Ok(out)
}

/// `E[R_n (R_n+1) ⋯ (R_n+ℓ)]`; `ℓ = 0` gives `E[R_n]`.
pub fn rising_factorial_moment(params: &ReinforcementParams, n: u64, ell: u32, eps_prune: f64) -> Result<f64> {
    Ok(rising_factorial_moments(params, n, ell, eps_prune)?[n as usize - 1].0)
}

fn require_ratio(params: &ReinforcementParams) -> Result<(u64, u64)> {
    params
        .ratio()
        .ok_or_else(|| Error::invalid("c", "rational mode needs c given as a ratio"))
}

/// Exact propagation for `c = a/b`: integer masses with implied denominator `scale^n`.
pub struct RationalEvolution {
    dist: StateDistribution<BigInt>,
    kernel: Kernel<BigInt>,
    scale: BigInt,
    denom: BigInt,
    spare: Vec<Vec<BigInt>>,
}

impl RationalEvolution {
    pub fn new(params: &ReinforcementParams) -> Result<Self> {
        let (num, den) = require_ratio(params)?;
        let (kernel, scale) = Kernel::scaled_integer(num, den);
        Ok(Self {
            dist: StateDistribution::initial(),
            kernel,
            scale,
            denom: BigInt::one(),
            spare: Vec::new(),
        })
    }

    pub fn step(&mut self) {
        self.dist.step_exact_with(&self.kernel, &mut self.spare);
        self.denom *= &self.scale;
    }

    pub fn n(&self) -> u64 {
        self.dist.n()
    }

    pub fn mass(&self, x: u64, r: u64) -> BigRational {
        BigRational::new(self.dist.mass(x, r), self.denom.clone())
    }

    pub fn total_mass(&self) -> BigRational {
        let num = self.dist.band_masses().into_iter().fold(BigInt::zero(), |a, v| a + v);
        BigRational::new(num, self.denom.clone())
    }

    /// `(r, P(R_n = r))` for every stored band.
    pub fn range_pmf(&self) -> Vec<(u64, BigRational)> {
        let (r_lo, _) = self.dist.r_bounds();
        self.dist
            .band_masses()
            .into_iter()
            .enumerate()
            .map(|(i, m)| (r_lo + i as u64, BigRational::new(m, self.denom.clone())))
            .collect()
    }

    pub fn moment(&self, ell: u32) -> BigRational {
        let (r_lo, _) = self.dist.r_bounds();
        let num = self
            .dist
            .band_masses()
            .into_iter()
            .enumerate()
            .fold(BigInt::zero(), |acc, (i, m)| acc + m * BigInt::from(r_lo + i as u64).pow(ell));
        BigRational::new(num, self.denom.clone())
    }
}

/// Exact `E[R_m^ℓ]`, indexed `[m − 1][ℓ − 1]`. Needs `c` given as a ratio.
pub fn range_moments_rational(
    params: &ReinforcementParams,
    n_max: u64,
    ell_max: u32,
) -> Result<Vec<Vec<BigRational>>> {
    check_moment_args(n_max, ell_max)?;
    let mut evo = RationalEvolution::new(params)?;
    let mut out = Vec::with_capacity(n_max as usize);
    for _ in 0..n_max {
        evo.step();
        out.push((1..=ell_max).map(|l| evo.moment(l)).collect());
    }
    Ok(out)
}

/// `P(S_k = n)` for `n = 0..=n_max`, with the mass not yet absorbed by `n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassagePmf {
    pub k: u64,
    pub pmf: Vec<f64>,
    pub remaining_mass: f64,
}

impl PassagePmf {
    pub fn generating_function(&self, s: f64) -> f64 {
        // Horner from the top keeps the sum monotone in the number of terms.
        self.pmf.iter().rev().fold(0.0, |acc, p| acc * s + p)
    }
}

fn passage_generic<T: Weight + One>(kernel: &Kernel<T>, k: u64, n_max: u64) -> Result<(Vec<T>, StateDistribution<T>)> {
    if k == 0 {
        return Err(Error::invalid("k", "target range must be at least 1"));
    }
    let mut dist = StateDistribution::<T>::initial();
    let mut pmf = vec![T::zero(); n_max as usize + 1];
    let mut spare = Vec::new();
    let mut live = true;
    for n in 1..=n_max {
        if !live {
            break;
        }
        let inflow = dist.advance_bands(kernel, &mut spare);
        let next_r = dist.r_bounds().1 + 1;
        if next_r == k {
            pmf[n as usize] = inflow;
        } else if !inflow.is_zero() {
            dist.push_top(inflow);
        }
        live = !dist.bands.iter().flatten().all(|v| v.is_zero());
    }
    Ok((pmf, dist))
}

/// Law of the first time the running maximum reaches `k`, by propagating the
/// walk absorbed at range `k`.
pub fn first_passage_pmf(params: &ReinforcementParams, k: u64, n_max: u64) -> Result<PassagePmf> {
    let (pmf, dist) = passage_generic(&Kernel::probabilities(params), k, n_max)?;
    Ok(PassagePmf {
        k,
        pmf,
        remaining_mass: dist.bands.iter().flatten().sum(),
    })
}

/// Exact `P(S_k = n)` for `n = 0..=n_max`. Needs `c` given as a ratio.
pub fn first_passage_pmf_rational(params: &ReinforcementParams, k: u64, n_max: u64) -> Result<Vec<BigRational>> {
    let (num, den) = require_ratio(params)?;
    let (kernel, scale) = Kernel::scaled_integer(num, den);
    let (pmf, _) = passage_generic(&kernel, k, n_max)?;
    let mut denom = BigInt::one();
    Ok(pmf
        .into_iter()
        .enumerate()
        .map(|(n, m)| {
            if n > 0 {
                denom *= &scale;
            }
            BigRational::new(m, denom.clone())
        })
        .collect())
}
