//! Acceptance suite: one PASS/FAIL line per criterion, with pinned tolerances
//! and runtime budgets.
//!
//! Two criteria cannot be met as stated and are listed in
//! `EXPECTED_UNATTAINABLE`; they are still evaluated literally and print FAIL,
//! but do not change the exit status. Any other failure exits with status 1.
//!
//! - 2 compares against a finite enumeration; at s = 0.6 and 0.9 the
//!   unenumerated tail alone exceeds the tolerance. The enclosure the
//!   enumeration does certify is printed alongside.
//! - 9 asks for `|ρ'_N − 1|` to be monotone over all `N ≤ 3·10⁴`; the exact
//!   sequence rises at a few small even/odd alternations (`N ≤ 15`). The
//!   range of `N` where it is monotone is printed alongside.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use num_rational::BigRational;
use num_traits::{One, Zero};
use orrw::asymptotics;
use orrw::exact;
use orrw::genfun::{self, EvalPoint};
use orrw::montecarlo;
use orrw::walk::DEFAULT_MAX_STEPS;
use orrw::{ReinforcementParams, SeedSpec};

use common::{hitting_pmf, orrw_mean_range, orrw_passage_pmf, partial_gf, q, to_f64};

const EXPECTED_UNATTAINABLE: &[u32] = &[2, 9];

type Outcome = Result<(bool, String), String>;

fn ratio(num: u64, den: u64) -> ReinforcementParams {
    ReinforcementParams::from_ratio(num, den).unwrap()
}

fn c1_constants() -> Outcome {
    let j1 = asymptotics::j_ell(1.0, 1, 1e-12).map_err(|e| e.to_string())?;
    let j2 = asymptotics::j_ell(1.0, 2, 1e-12).map_err(|e| e.to_string())?;
    let g = asymptotics::catalan(1e-12).map_err(|e| e.to_string())?;
    let d1 = (j1 - std::f64::consts::FRAC_PI_2).abs();
    let d2 = (j2 - 2.0 * g).abs();
    Ok((d1 < 1e-10 && d2 < 1e-10, format!("|J1-pi/2|={d1:.3e} |J2-2G|={d2:.3e} (tol 1e-10)")))
}

fn gf_vs_enumeration() -> Outcome {
    const LEN: usize = 20;
    let grid = [(3, 10), (6, 10), (9, 10)];
    let mut literal = [0.0f64; 3];
    let mut enclosure_ok = true;
    let mut compare = |pmf: &[BigRational], value: &dyn Fn(f64) -> f64| {
        let unabsorbed = BigRational::one() - pmf.iter().fold(BigRational::zero(), |a, p| a + p);
        for (i, &(n, d)) in grid.iter().enumerate() {
            let s = q(n, d);
            let partial = to_f64(&partial_gf(pmf, &s));
            let tail = to_f64(&(unabsorbed.clone() * (0..=LEN).fold(BigRational::one(), |a, _| a * &s)));
            let v = value(n as f64 / d as f64);
            literal[i] = literal[i].max((v - partial).abs());
            enclosure_ok &= v >= partial - 1e-12 && v <= partial + tail + 1e-12;
        }
    };
    for (a, x, b) in [(0, 0, 1), (1, 0, 1), (0, 1, 2), (2, -1, 2)] {
        let pmf = hitting_pmf(a, x, b, LEN);
        compare(&pmf, &|s| genfun::hitting_gf(a as u64, x, b, EvalPoint::new(s).unwrap()).unwrap());
    }
    for x in 1..=3u64 {
        let pmf = hitting_pmf(0, x as i64 - 1, x as i64, LEN);
        compare(&pmf, &|s| genfun::g(x, EvalPoint::new(s).unwrap()));
    }
    let cs = [q(1, 2), q(1, 1), q(2, 1)];
    let cf = [0.5, 1.0, 2.0];
    for x in 1..=2u64 {
        for (pmf, &c) in orrw_passage_pmf(x, x, x + 1, LEN, &cs).iter().zip(&cf) {
            let p = ReinforcementParams::new(c).unwrap();
            compare(pmf, &|s| genfun::big_g(x, EvalPoint::new(s).unwrap(), &p));
        }
    }
    for k in 2..=3u64 {
        for (pmf, &c) in orrw_passage_pmf(0, 0, k, LEN, &cs).iter().zip(&cf) {
            let p = ReinforcementParams::new(c).unwrap();
            compare(pmf, &|s| genfun::s_k_gf(k, EvalPoint::new(s).unwrap(), &p).unwrap());
        }
    }
    Ok((
        literal.iter().all(|&d| d < 1e-12),
        format!(
            "max |gf - enumeration up to length {LEN}| at s=0.3,0.6,0.9: {:.3e}, {:.3e}, {:.3e} (tol 1e-12); \
             enclosure partial <= gf <= partial + s^21 P(T>20): {}",
            literal[0],
            literal[1],
            literal[2],
            if enclosure_ok { "holds" } else { "VIOLATED" }
        ),
    ))
}

fn dual_forms() -> Outcome {
    let mut grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    grid.extend([0.99, 0.999, 0.9999]);
    let params: Vec<_> = [0.5, 1.0, 2.0].iter().map(|&c| ReinforcementParams::new(c).unwrap()).collect();
    let mut worst: f64 = 0.0;
    for &s in &grid {
        let p = EvalPoint::new(s).map_err(|e| e.to_string())?;
        for x in 1..=1000 {
            worst = worst.max((genfun::g(x, p) / genfun::g_dual(x, p) - 1.0).abs());
            for c in &params {
                worst = worst.max((genfun::big_g(x, p, c) / genfun::big_g_dual(x, p, c) - 1.0).abs());
            }
        }
    }
    Ok((worst < 1e-12, format!("max relative gap {worst:.3e} (tol 1e-12)")))
}

fn dp_vs_series() -> Outcome {
    let one = ratio(1, 1);
    let mut worst_slack = f64::NEG_INFINITY;
    for k in 2..=6 {
        let pmf = exact::first_passage_pmf(&one, k, 64).map_err(|e| e.to_string())?;
        for s in [0.3, 0.5] {
            let series = genfun::s_k_gf(k, EvalPoint::new(s).unwrap(), &one).map_err(|e| e.to_string())?;
            let gap = (pmf.generating_function(s) - series).abs();
            worst_slack = worst_slack.max(gap - (s.powi(66) + pmf.remaining_mass));
        }
    }
    let rational = exact::first_passage_pmf_rational(&one, 2, 64).map_err(|e| e.to_string())?;
    let exact_k2 = rational.iter().enumerate().all(|(n, p)| {
        let expected = if n >= 2 && n % 2 == 0 {
            let j = (n - 2) / 2;
            BigRational::new(1.into(), num_bigint::BigInt::one() << (j + 1))
        } else {
            BigRational::zero()
        };
        *p == expected
    });
    Ok((
        worst_slack <= 0.0 && exact_k2,
        format!("max(gap - allowance) = {worst_slack:.3e}; k=2 rational pmf exact: {exact_k2}"),
    ))
}

fn small_n_moments() -> Outcome {
    let cs = [q(1, 2), q(1, 1), q(2, 1)];
    let params = [ratio(1, 2), ratio(1, 1), ratio(2, 1)];
    let enumerated = orrw_mean_range(20, &cs);
    let mut all_equal = true;
    for (p, brute) in params.iter().zip(&enumerated) {
        let dp = exact::range_moments_rational(p, 20, 1).map_err(|e| e.to_string())?;
        all_equal &= dp.iter().zip(brute).all(|(row, b)| row[0] == *b);
    }
    let spot_r2 = cs.iter().zip(&enumerated).all(|(c, e)| e[1] == BigRational::one() + BigRational::one() / (BigRational::one() + c));
    let spot_r3 = enumerated[1][2] == q(7, 4);
    Ok((
        all_equal && spot_r2 && spot_r3,
        format!("E[R_n], n<=20, c in {{1/2,1,2}} equal: {all_equal}; E[R_2]=1+1/(1+c): {spot_r2}; E[R_3]=7/4 at c=1: {spot_r3}"),
    ))
}

fn mc_vs_exact() -> Outcome {
    let c2 = ReinforcementParams::new(2.0).unwrap();
    let n = 1024;
    let table = exact::range_moments(&c2, n, 2, exact::DEFAULT_EPS_PRUNE).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut detail = Vec::new();
    for ell in 1..=2 {
        let est = montecarlo::estimate_moment(&c2, n, ell, 1_000_000, SeedSpec::new(20_240_601, 0)).map_err(|e| e.to_string())?;
        let dp = table.get(n, ell).unwrap().value / (n as f64).powf(ell as f64 / 2.0);
        let z = (est.mean - dp) / est.stderr;
        ok &= z.abs() < 4.0;
        detail.push(format!("ell={ell} mc={:.6} dp={dp:.6} z={z:.2}", est.mean));
    }
    let half = ReinforcementParams::new(0.5).unwrap();
    let cmp = montecarlo::compare_first_passage(&half, 5, 200_000, SeedSpec::new(20_240_601, 1 << 40), DEFAULT_MAX_STEPS)
        .map_err(|e| e.to_string())?;
    ok &= cmp.direct.p_value > 1e-3 && cmp.decomposition.p_value > 1e-3;
    detail.push(format!(
        "S_5 chi-square p: direct={:.4} decomposition={:.4}",
        cmp.direct.p_value, cmp.decomposition.p_value
    ));
    Ok((ok, detail.join("; ")))
}

fn moment_trend() -> Outcome {
    let one = ReinforcementParams::new(1.0).unwrap();
    let rows = montecarlo::convergence_study(
        &one,
        &[1_000, 4_000, 16_000, 64_000],
        1,
        montecarlo::StudyMode::Exact { eps_prune: 1e-14 },
    )
    .map_err(|e| e.to_string())?;
    let gaps: Vec<f64> = rows.iter().map(|r| (r.ratio - 1.0).abs()).collect();
    let bound = rows.iter().map(|r| r.stderr * (r.n as f64).sqrt()).fold(0.0, f64::max);
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = rows.last().unwrap().ratio;
    Ok((
        decreasing && (last - 1.0).abs() < 0.05 && bound < 1e-6,
        format!(
            "ratios {}; certified |E[R_n] error| <= {bound:.3e} (tol 1e-6)",
            rows.iter().map(|r| format!("{:.6}", r.ratio)).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn blowup_trend() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (ell, c) in [(0, 1.0), (1, 2.0)] {
        let p = ReinforcementParams::new(c).unwrap();
        let rows = asymptotics::blowup_check(ell, &p, &[0.9, 0.99, 0.999]).map_err(|e| e.to_string())?;
        let gaps: Vec<f64> = rows.iter().map(|r| (r.ratio - 1.0).abs()).collect();
        ok &= gaps.windows(2).all(|w| w[1] < w[0]) && gaps[2] < 0.1;
        detail.push(format!(
            "(ell={ell}, c={c}): {}",
            rows.iter().map(|r| format!("{:.6}", r.ratio)).collect::<Vec<_>>().join(", ")
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn tauberian() -> Outcome {
    let one = ReinforcementParams::new(1.0).unwrap();
    let n_max = 30_000;
    let a = exact::rising_factorial_moments(&one, n_max, 1, exact::DEFAULT_EPS_PRUNE).map_err(|e| e.to_string())?;
    let values: Vec<f64> = a.iter().map(|v| v.0).collect();
    let k1 = asymptotics::k_ell(1.0, 1, 1e-12).map_err(|e| e.to_string())?;
    let report = asymptotics::tauberian_check(&values, k1, 2.0).map_err(|e| e.to_string())?;
    let rho = report.term_ratios.expect("alpha > 1");
    let gaps: Vec<f64> = rho.iter().map(|r| (r - 1.0).abs()).collect();
    let rises: Vec<usize> = gaps.windows(2).enumerate().filter(|(_, w)| w[1] > w[0]).map(|(i, _)| i + 2).collect();
    let last = *rho.last().unwrap();
    let checkpoints: Vec<String> = [1usize, 10, 100, 1_000, 10_000, 30_000]
        .iter()
        .map(|&n| format!("rho'_{n}={:.6}", rho[n - 1]))
        .collect();
    Ok((
        rises.is_empty() && (last - 1.0).abs() < 0.1,
        format!(
            "{}; |rho'-1| rises at N in {:?}, nonincreasing for N >= {}; worst bound on a_N {:.3e}",
            checkpoints.join(" "),
            rises,
            rises.last().map_or(1, |&n| n),
            a.last().unwrap().1
        ),
    ))
}

fn reproducibility() -> Outcome {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_orrw"))
            .args(["selftest", "--seed", "7"])
            .env("ORRW_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())
    };
    let a = run("1")?;
    let b = run("4")?;
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    Ok((
        same && a.status.success() && b.status.success(),
        format!(
            "{} bytes; identical: {same}; exit codes {:?}/{:?}",
            a.stdout.len(),
            a.status.code(),
            b.status.code()
        ),
    ))
}

fn main() {
    let criteria: Vec<(u32, &str, u64, fn() -> Outcome)> = vec![
        (1, "closed-form constants", 1, c1_constants),
        (2, "generating functions vs path enumeration", 10, gf_vs_enumeration),
        (3, "dual-form identities", 1, dual_forms),
        (4, "DP vs series for S_k", 30, dp_vs_series),
        (5, "small-n exact moments", 60, small_n_moments),
        (6, "Monte Carlo vs exact", 300, mc_vs_exact),
        (7, "moment ratio trend", 600, moment_trend),
        (8, "generating function blow-up trend", 120, blowup_trend),
        (9, "Tauberian transfer", 600, tauberian),
        (10, "selftest reproducibility", 600, reproducibility),
    ];
    let filter: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut unexpected = Vec::new();
    for (id, name, budget, f) in criteria {
        if filter.as_ref().is_some_and(|f| !f.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let in_budget = elapsed <= Duration::from_secs(budget);
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && in_budget, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let note = if !pass && EXPECTED_UNATTAINABLE.contains(&id) { " [expected: unattainable as stated]" } else { "" };
        println!(
            "criterion {id:>2} {}: {name} ({:.2}s / {budget}s) {detail}{note}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        if !pass && !EXPECTED_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
