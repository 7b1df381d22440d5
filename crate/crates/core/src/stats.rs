//! Compensated summation and chi-square tests.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

/// Mean and standard error of the mean, both summed in index order.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().copied().collect::<CompensatedSum>().value() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .collect::<CompensatedSum>()
        .value();
    (mean, (ss / (n - 1.0) / n).sqrt())
}

/// Upper tail `P(χ²_dof > x)`.
pub fn chi_square_sf(x: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(dof as f64 / 2.0, x / 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Inclusive upper edge of each bin; the last bin is open-ended.
    pub bin_edges: Vec<u64>,
}

impl ChiSquareReport {
    fn from_statistic(statistic: f64, bin_edges: Vec<u64>) -> Self {
        let dof = bin_edges.len().saturating_sub(1);
        Self {
            statistic,
            dof,
            p_value: chi_square_sf(statistic, dof),
            bin_edges,
        }
    }
}

fn bin_index(edges: &[u64], v: u64) -> usize {
    edges.partition_point(|&e| e < v).min(edges.len() - 1)
}

/// Goodness of fit of integer `samples` against `pmf[n] = P(X = n)`.
///
/// Consecutive support points are merged until each bin expects at least
/// `min_expected` samples; everything above the last edge, including mass
/// missing from `pmf`, is pooled into the final bin.
pub fn chi_square_against_pmf(samples: &[u64], pmf: &[f64], min_expected: f64) -> ChiSquareReport {
    let total = samples.len() as f64;
    let mut edges = Vec::new();
    let mut probs = Vec::new();
    let mut acc = 0.0;
    for (n, &p) in pmf.iter().enumerate() {
        acc += p;
        if acc * total >= min_expected {
            edges.push(n as u64);
            probs.push(acc);
            acc = 0.0;
        }
    }
    let tail = (1.0 - probs.iter().sum::<f64>()).max(0.0);
    if tail * total >= min_expected || probs.is_empty() {
        edges.push(u64::MAX);
        probs.push(tail);
    } else {
        *probs.last_mut().expect("non-empty") += tail;
        *edges.last_mut().expect("non-empty") = u64::MAX;
    }
    let mut counts = vec![0u64; edges.len()];
    for &s in samples {
        counts[bin_index(&edges, s)] += 1;
    }
    let statistic = counts
        .iter()
        .zip(&probs)
        .map(|(&o, &p)| {
            let e = p * total;
            if e > 0.0 {
                (o as f64 - e).powi(2) / e
            } else if o > 0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    ChiSquareReport::from_statistic(statistic, edges)
}

/// Two-sample chi-square homogeneity test on integer samples, with bins
/// merged until each holds at least `min_count` pooled observations.
pub fn two_sample_chi_square(a: &[u64], b: &[u64], min_count: u64) -> ChiSquareReport {
    let max = a.iter().chain(b).copied().max().unwrap_or(0) as usize;
    let mut ca = vec![0u64; max + 1];
    let mut cb = vec![0u64; max + 1];
    a.iter().for_each(|&v| ca[v as usize] += 1);
    b.iter().for_each(|&v| cb[v as usize] += 1);

    let mut edges = Vec::new();
    let mut bins: Vec<(u64, u64)> = Vec::new();
    let (mut ra, mut rb) = (0, 0);
    for v in 0..=max {
        ra += ca[v];
        rb += cb[v];
        if ra + rb >= min_count {
            edges.push(v as u64);
            bins.push((ra, rb));
            ra = 0;
            rb = 0;
        }
    }
    if ra + rb > 0 {
        if let Some(last) = bins.last_mut() {
            last.0 += ra;
            last.1 += rb;
            *edges.last_mut().expect("non-empty") = max as u64;
        } else {
            edges.push(max as u64);
            bins.push((ra, rb));
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let statistic = bins
        .iter()
        .map(|&(x, y)| {
            let d = ka * x as f64 - kb * y as f64;
            d * d / (x + y) as f64
        })
        .sum();
    ChiSquareReport::from_statistic(statistic, edges)
}
