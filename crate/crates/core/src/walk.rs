//! Step-level simulation of the once-reinforced walk and sampling of the
//! first time its running maximum reaches a given level.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng(rand_chacha 0.9; seed_from_u64(seed), set_stream(stream))";

/// Default cap on the number of steps a single first-passage sample may take.
pub const DEFAULT_MAX_STEPS: u64 = 1_000_000_000;

/// The reinforcement parameter `c > 0`.
///
/// A non-reinforced edge carries weight 1 and a traversed edge weight `c`, so
/// the walk leaves its running maximum upwards with probability `1/(1+c)`.
/// When built with [`ReinforcementParams::from_ratio`] the exact value is kept
/// for rational-mode dynamic programming.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReinforcementParams {
    c: f64,
    ratio: Option<(u64, u64)>,
}

impl ReinforcementParams {
    pub fn new(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid("c", format!("must be a finite positive real, got {c}")));
        }
        Ok(Self { c, ratio: None })
    }

    /// `c = num / den` with both parts positive.
    pub fn from_ratio(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::invalid("c", format!("ratio {num}/{den} must have positive parts")));
        }
        Ok(Self {
            c: num as f64 / den as f64,
            ratio: Some((num, den)),
        })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn ratio(&self) -> Option<(u64, u64)> {
        self.ratio
    }

    /// Probability of stepping from the running maximum onto a new site.
    pub fn frontier_up(&self) -> f64 {
        1.0 / (1.0 + self.c)
    }
}

/// Time, position and running maximum of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WalkState {
    pub n: u64,
    pub x: u64,
    pub r: u64,
}

impl WalkState {
    pub const ORIGIN: WalkState = WalkState { n: 0, x: 0, r: 0 };

    pub fn new(n: u64, x: u64, r: u64) -> Result<Self> {
        let s = Self { n, x, r };
        if s.is_valid() {
            Ok(s)
        } else {
            Err(Error::invalid(
                "state",
                format!("(n={n}, x={x}, r={r}) violates 0 <= x <= r <= n, x = n mod 2"),
            ))
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x <= self.r && self.r <= self.n && (self.n - self.x) % 2 == 0
    }
}

/// `(seed, stream)` pair selecting an independent generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub seed: u64,
    pub stream: u64,
}

impl SeedSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// The spec for replicate `index` of a batch based at `self`.
    pub fn replicate(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream: self.stream.wrapping_add(index),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    pub fn coins(&self) -> Coins<ChaCha8Rng> {
        Coins::new(self.rng())
    }
}

/// Random source that spends one bit per fair coin and 53 bits per uniform.
pub struct Coins<R> {
    rng: R,
    bits: u64,
    left: u32,
}

impl<R: RngCore> Coins<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, bits: 0, left: 0 }
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        if self.left == 0 {
            self.bits = self.rng.next_u64();
            self.left = 64;
        }
        let b = self.bits & 1 == 1;
        self.bits >>= 1;
        self.left -= 1;
        b
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Probability that the next step goes up.
///
/// At `x = r = 0` the reflection at the origin wins and the walk moves up surely.
#[inline]
pub fn transition_prob_up(state: WalkState, params: &ReinforcementParams) -> f64 {
    if state.x == 0 {
        1.0
    } else if state.x < state.r {
        0.5
    } else {
        params.frontier_up()
    }
}

/// One step of the walk driven by the uniform `u`: up iff `u < transition_prob_up`.
#[inline]
pub fn step(state: WalkState, params: &ReinforcementParams, u: f64) -> WalkState {
    let x = if u < transition_prob_up(state, params) {
        state.x + 1
    } else {
        state.x - 1
    };
    WalkState {
        n: state.n + 1,
        x,
        r: state.r.max(x),
    }
}

/// Draws the uniform fed to [`step`]. Interior steps only need the side of
/// 1/2, so they consume a single bit; reflection at 0 consumes nothing.
#[inline]
fn draw_u<R: RngCore>(state: WalkState, coins: &mut Coins<R>) -> f64 {
    if state.x == 0 {
        0.0
    } else if state.x < state.r {
        if coins.coin() {
            0.25
        } else {
            0.75
        }
    } else {
        coins.uniform()
    }
}

/// Advances `state` by one step using `coins`.
#[inline]
pub fn advance<R: RngCore>(state: WalkState, params: &ReinforcementParams, coins: &mut Coins<R>) -> WalkState {
    let u = draw_u(state, coins);
    step(state, params, u)
}

/// Outcome of [`simulate_range`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeRun {
    pub final_state: WalkState,
    /// `(time, new maximum)` for every time the maximum increased, when requested.
    pub increments: Option<Vec<(u64, u64)>>,
}

impl RangeRun {
    pub fn range(&self) -> u64 {
        self.final_state.r
    }

    /// Expands the recorded increments into `R_0, ..., R_n`.
    pub fn range_sequence(&self) -> Option<Vec<u64>> {
        let incs = self.increments.as_ref()?;
        let n = self.final_state.n as usize;
        let mut seq = vec![0u64; n + 1];
        let mut cur = 0;
        let mut it = incs.iter().peekable();
        for (t, slot) in seq.iter_mut().enumerate() {
            while let Some(&&(time, r)) = it.peek() {
                if time as usize == t {
                    cur = r;
                    it.next();
                } else {
                    break;
                }
            }
            *slot = cur;
        }
        Some(seq)
    }
}

/// Runs one trajectory for `n` steps with a generator drawn from `seed`.
pub fn simulate_range(params: &ReinforcementParams, n: u64, seed: SeedSpec, record: bool) -> RangeRun {
    let mut coins = seed.coins();
    run_with(params, n, &mut coins, record)
}

pub(crate) fn run_with<R: RngCore>(
    params: &ReinforcementParams,
    n: u64,
    coins: &mut Coins<R>,
    record: bool,
) -> RangeRun {
    let mut state = WalkState::ORIGIN;
    let mut increments = record.then(Vec::new);
    for _ in 0..n {
        let next = advance(state, params, coins);
        if let Some(v) = increments.as_mut() {
            if next.r > state.r {
                v.push((next.n, next.r));
            }
        }
        state = next;
    }
    RangeRun {
        final_state: state,
        increments,
    }
}

/// How [`sample_first_passage`] produces `S_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PassageMode {
    /// Run the step kernel until the maximum reaches `k`.
    Direct,
    /// Sum independent inter-record times built from geometric retry counts
    /// and reflected hitting times.
    Decomposition,
}

/// Number of failures before the first success, with success probability `p`,
/// by inversion of `u ∈ (0, 1]`.
pub fn geometric_failures(p: f64, u: f64) -> u64 {
    if p >= 1.0 {
        return 0;
    }
    let y = (u.ln() / (-p).ln_1p()).floor();
    if y >= u64::MAX as f64 {
        u64::MAX
    } else {
        y as u64
    }
}

/// Hitting time of `target` for a simple walk reflected at 0, started at `target - 1`.
pub fn reflected_hitting_time<R: RngCore>(target: u64, coins: &mut Coins<R>, budget: u64) -> Option<u64> {
    debug_assert!(target >= 1);
    let mut pos = target - 1;
    let mut t = 0u64;
    loop {
        pos = if pos == 0 || coins.coin() { pos + 1 } else { pos - 1 };
        t += 1;
        if pos == target {
            return Some(t);
        }
        if t >= budget {
            return None;
        }
    }
}

/// Draws one first-passage time `S_k = inf{n : R_n = k}`.
pub fn sample_first_passage(
    params: &ReinforcementParams,
    k: u64,
    seed: SeedSpec,
    mode: PassageMode,
    max_steps: u64,
) -> Result<u64> {
    let mut coins = seed.coins();
    first_passage_with(params, k, &mut coins, mode, max_steps)
}

pub fn first_passage_with<R: RngCore>(
    params: &ReinforcementParams,
    k: u64,
    coins: &mut Coins<R>,
    mode: PassageMode,
    max_steps: u64,
) -> Result<u64> {
    if k == 0 {
        return Err(Error::invalid("k", "target range must be at least 1"));
    }
    let cap = Error::StepCapExceeded {
        max_steps,
        replicate: None,
    };
    match mode {
        PassageMode::Direct => {
            let mut state = WalkState::ORIGIN;
            while state.r < k {
                if state.n >= max_steps {
                    return Err(cap);
                }
                state = advance(state, params, coins);
            }
            Ok(state.n)
        }
        PassageMode::Decomposition => {
            let p = params.frontier_up();
            let mut total: u64 = 1;
            for i in 1..k {
                let attempts = geometric_failures(p, coins.uniform_open0());
                total = total.saturating_add(1);
                for _ in 0..attempts {
                    let budget = max_steps.saturating_sub(total);
                    let tau = reflected_hitting_time(i, coins, budget).ok_or_else(|| cap.clone())?;
                    total = total.saturating_add(1 + tau);
                }
                if total > max_steps {
                    return Err(cap);
                }
            }
            if total > max_steps {
                return Err(cap);
            }
            Ok(total)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(v: f64) -> ReinforcementParams {
        ReinforcementParams::new(v).unwrap()
    }

    #[test]
    fn kernel_cases() {
        let p = c(3.0);
        assert_eq!(transition_prob_up(WalkState::new(0, 0, 0).unwrap(), &p), 1.0);
        assert_eq!(transition_prob_up(WalkState::new(5, 1, 3).unwrap(), &p), 0.5);
        assert_eq!(transition_prob_up(WalkState::new(5, 5, 5).unwrap(), &p), 0.25);
    }

    #[test]
    fn step_examples() {
        let origin = WalkState::ORIGIN;
        for u in [0.0, 0.5, 0.999_999] {
            assert_eq!(step(origin, &c(2.0), u), WalkState { n: 1, x: 1, r: 1 });
        }
        let s = WalkState::new(2, 2, 2).unwrap();
        assert_eq!(step(s, &c(1.0), 0.4), WalkState { n: 3, x: 3, r: 3 });
        let s = WalkState::new(5, 1, 3).unwrap();
        assert_eq!(step(s, &c(1.0), 0.7), WalkState { n: 6, x: 0, r: 3 });
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ReinforcementParams::new(0.0).is_err());
        assert!(ReinforcementParams::new(-1.0).is_err());
        assert!(ReinforcementParams::new(f64::NAN).is_err());
        assert!(ReinforcementParams::from_ratio(0, 3).is_err());
        assert!(WalkState::new(3, 2, 2).is_err());
        assert!(WalkState::new(2, 2, 1).is_err());
    }

    #[test]
    fn first_step_is_forced() {
        for stream in 0..50 {
            let run = simulate_range(&c(0.7), 1, SeedSpec::new(9, stream), false);
            assert_eq!(run.range(), 1);
        }
    }

    #[test]
    fn recorded_sequence_is_monotone_unit_increments() {
        let run = simulate_range(&c(1.3), 2000, SeedSpec::new(1, 2), true);
        let seq = run.range_sequence().unwrap();
        assert_eq!(seq.len(), 2001);
        assert_eq!(seq[0], 0);
        assert_eq!(*seq.last().unwrap(), run.range());
        for w in seq.windows(2) {
            assert!(w[1] == w[0] || w[1] == w[0] + 1);
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let a = simulate_range(&c(2.0), 5000, SeedSpec::new(42, 7), true);
        let b = simulate_range(&c(2.0), 5000, SeedSpec::new(42, 7), true);
        assert_eq!(a, b);
        let other = simulate_range(&c(2.0), 5000, SeedSpec::new(42, 8), true);
        assert_ne!(a.increments, other.increments);
    }

    #[test]
    fn s1_is_one_in_both_modes() {
        for mode in [PassageMode::Direct, PassageMode::Decomposition] {
            for stream in 0..20 {
                let s = sample_first_passage(&c(1.5), 1, SeedSpec::new(3, stream), mode, 100).unwrap();
                assert_eq!(s, 1);
            }
        }
    }

    #[test]
    fn passage_parity_and_lower_bound() {
        for mode in [PassageMode::Direct, PassageMode::Decomposition] {
            for stream in 0..500 {
                let k = 1 + stream % 7;
                let s = sample_first_passage(&c(0.8), k, SeedSpec::new(5, stream), mode, DEFAULT_MAX_STEPS).unwrap();
                assert!(s >= k);
                assert_eq!(s % 2, k % 2);
            }
        }
    }

    #[test]
    fn step_cap_aborts() {
        let err = sample_first_passage(&c(50.0), 40, SeedSpec::new(1, 1), PassageMode::Direct, 100).unwrap_err();
        assert!(matches!(err, Error::StepCapExceeded { max_steps: 100, .. }));
        let err = sample_first_passage(&c(50.0), 40, SeedSpec::new(1, 1), PassageMode::Decomposition, 100).unwrap_err();
        assert!(matches!(err, Error::StepCapExceeded { max_steps: 100, .. }));
    }

    #[test]
    fn geometric_inversion() {
        assert_eq!(geometric_failures(0.5, 1.0), 0);
        assert_eq!(geometric_failures(0.5, 0.5), 1);
        assert_eq!(geometric_failures(0.5, 0.26), 1);
        assert_eq!(geometric_failures(0.5, 0.25), 2);
        assert_eq!(geometric_failures(1.0, 0.01), 0);
    }

    #[test]
    fn tau_one_is_one() {
        let mut coins = SeedSpec::new(0, 0).coins();
        for _ in 0..100 {
            assert_eq!(reflected_hitting_time(1, &mut coins, 10), Some(1));
        }
    }
}
