//! Replicated estimators with reproducible parallelism.
//!
//! Replicate `i` always draws from stream `seed.stream + i`. Per-replicate
//! results are collected in replicate order and reduced sequentially with
//! compensated summation, so the thread count changes only the schedule,
//! never a single bit of the output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics;
use crate::error::{Error, Result};
use crate::exact::{self, PruningPolicy, RangeEvolution};
use crate::stats::{self, ChiSquareReport};
use crate::walk::{self, PassageMode, ReinforcementParams, SeedSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub mean: f64,
    pub stderr: f64,
    pub reps: u64,
    pub seed: SeedSpec,
    pub ell: u32,
    pub n: u64,
    pub c: f64,
}

/// Estimates `E[(R_n/√n)^ℓ]` from `reps` independent trajectories.
pub fn estimate_moment(
    params: &ReinforcementParams,
    n: u64,
    ell: u32,
    reps: u64,
    seed: SeedSpec,
) -> Result<EstimatorResult> {
    if reps < 2 {
        return Err(Error::invalid("reps", format!("need at least 2 replicates, got {reps}")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "horizon must be at least 1"));
    }
    let norm = (n as f64).sqrt();
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let run = walk::simulate_range(params, n, seed.replicate(i), false);
            (run.range() as f64 / norm).powi(ell as i32)
        })
        .collect();
    let (mean, stderr) = stats::mean_and_stderr(&values);
    Ok(EstimatorResult {
        mean,
        stderr,
        reps,
        seed,
        ell,
        n,
        c: params.c(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorSource {
    Exact,
    Mc,
}

impl std::fmt::Display for ErrorSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ErrorSource::Exact => "exact",
            ErrorSource::Mc => "mc",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u64,
    pub ell: u32,
    pub c: f64,
    pub estimate: f64,
    /// Standard error (mc) or certified pruning bound (exact), on the scale of `estimate`.
    pub stderr: f64,
    pub limit: f64,
    pub ratio: f64,
    pub source: ErrorSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StudyMode {
    Exact { eps_prune: f64 },
    MonteCarlo { reps: u64, seed: SeedSpec },
}

/// `E[(R_n/√n)^ℓ]` against its limit along an increasing grid of horizons.
pub fn convergence_study(
    params: &ReinforcementParams,
    n_grid: &[u64],
    ell: u32,
    mode: StudyMode,
) -> Result<Vec<ConvergenceRow>> {
    if n_grid.is_empty() || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n_grid", "must be a non-empty strictly increasing list of positive horizons"));
    }
    if ell == 0 {
        return Err(Error::invalid("ell", "must be at least 1"));
    }
    let limit = asymptotics::moment_limit(params.c(), ell)?;
    let row = |n: u64, estimate: f64, stderr: f64, source| ConvergenceRow {
        n,
        ell,
        c: params.c(),
        estimate,
        stderr,
        limit,
        ratio: estimate / limit,
        source,
    };
    match mode {
        StudyMode::Exact { eps_prune } => {
            let n_max = *n_grid.last().expect("non-empty");
            let policy = PruningPolicy::for_horizon(params, n_max, eps_prune)?;
            let mut evo = RangeEvolution::new(params, policy);
            let worst = (n_max as f64).powi(ell as i32);
            let mut rows = Vec::with_capacity(n_grid.len());
            let mut next = n_grid.iter().peekable();
            for m in 1..=n_max {
                evo.step();
                if next.peek() == Some(&&m) {
                    next.next();
                    let norm = (m as f64).powf(ell as f64 / 2.0);
                    let value = evo.expect(|r| r.powi(ell as i32));
                    let bound = evo.distribution().pruned_mass() * worst;
                    rows.push(row(m, value / norm, bound / norm, ErrorSource::Exact));
                }
            }
            Ok(rows)
        }
        StudyMode::MonteCarlo { reps, seed } => n_grid
            .iter()
            .map(|&n| {
                let est = estimate_moment(params, n, ell, reps, seed)?;
                Ok(row(n, est.mean, est.stderr, ErrorSource::Mc))
            })
            .collect(),
    }
}

/// Draws `reps` first-passage times in `mode` from streams `base + offset + i`.
pub fn sample_passages(
    params: &ReinforcementParams,
    k: u64,
    reps: u64,
    seed: SeedSpec,
    offset: u64,
    mode: PassageMode,
    max_steps: u64,
) -> Result<Vec<u64>> {
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let spec = seed.replicate(offset + i);
            walk::sample_first_passage(params, k, spec, mode, max_steps).map_err(|e| match e {
                Error::StepCapExceeded { max_steps, .. } => Error::StepCapExceeded {
                    max_steps,
                    replicate: Some(i),
                },
                other => other,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageComparison {
    pub k: u64,
    pub reps: u64,
    pub seed: SeedSpec,
    /// Horizon of the exact law; the mass beyond it is pooled into the last bin.
    pub n_max: u64,
    pub pmf_coverage: f64,
    pub direct: ChiSquareReport,
    pub decomposition: ChiSquareReport,
    pub between_modes: ChiSquareReport,
}

/// Exact-law horizon is grown until the uncovered mass is below this.
const PMF_UNCOVERED: f64 = 1e-9;

/// Chi-square fit of sampled `S_k` (both samplers) against the exact law.
///
/// Direct samples use streams `seed.stream + i`, decomposition samples use
/// `seed.stream + reps + i`, so the two batches are independent.
pub fn compare_first_passage(
    params: &ReinforcementParams,
    k: u64,
    reps: u64,
    seed: SeedSpec,
    max_steps: u64,
) -> Result<FirstPassageComparison> {
    if reps < 2 {
        return Err(Error::invalid("reps", format!("need at least 2 replicates, got {reps}")));
    }
    let mut n_max = 64;
    let pmf = loop {
        let pmf = exact::first_passage_pmf(params, k, n_max)?;
        if pmf.remaining_mass <= PMF_UNCOVERED {
            break pmf;
        }
        if n_max >= 1 << 20 {
            return Err(Error::invalid("k", format!("exact law of S_{k} needs more than {n_max} steps")));
        }
        n_max *= 2;
    };
    let direct = sample_passages(params, k, reps, seed, 0, PassageMode::Direct, max_steps)?;
    let decomposition = sample_passages(params, k, reps, seed, reps, PassageMode::Decomposition, max_steps)?;
    Ok(FirstPassageComparison {
        k,
        reps,
        seed,
        n_max,
        pmf_coverage: 1.0 - pmf.remaining_mass,
        direct: stats::chi_square_against_pmf(&direct, &pmf.pmf, 5.0),
        decomposition: stats::chi_square_against_pmf(&decomposition, &pmf.pmf, 5.0),
        between_modes: stats::two_sample_chi_square(&direct, &decomposition, 10),
    })
}
