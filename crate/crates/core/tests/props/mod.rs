//! Property checks shared by this crate's tests and the acceptance suite.
//!
//! Each check is deterministic (fixed seeds) and returns a one-line summary on
//! success or a description of the first violation.

#![allow(dead_code)]

use contra_core::interval::Score;
use contra_core::interval::{nearest_rank, EmpiricalQuantiles};
use contra_core::posterior::{draw_means_given_variances, draw_variances};
use contra_core::{
    credible_interval, draw_relative_dm, rank_entries, score_delta_l, test_meaningful,
    CredibleInterval, Direction, GroupSummary, PosteriorDraws, ThresholdSpec,
};
use contra_oracle as oracle;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;
pub type Suite = (&'static str, fn() -> Check);

fn group(mean: f64, sd: f64, n: u32) -> GroupSummary {
    GroupSummary::new(mean, sd, n).expect("valid group")
}

/// Placebo arm of tpc study 14 and both arms of tpc study 30.
pub const T_MARGINAL_ARMS: [(f64, f64, u32); 4] = [
    (202.0, 28.2, 5),
    (135.2, 14.7, 5),
    (86.0, 20.0, 46),
    (434.0, 129.0, 40),
];

/// Standardized posterior mean draws follow `t_{n−1}`.
pub fn t_marginal(k: usize) -> Check {
    let mut worst = 1.0f64;
    for (i, &(mean, sd, n)) in T_MARGINAL_ARMS.iter().enumerate() {
        let g = group(mean, sd, n);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let v = draw_variances(&g, k, &mut rng).map_err(|e| e.to_string())?;
        let mu = draw_means_given_variances(&g, &v, &mut rng).map_err(|e| e.to_string())?;
        let scale = sd / f64::from(n).sqrt();
        let z: Vec<f64> = mu.iter().map(|m| (m - mean) / scale).collect();
        let p = oracle::ks_student_t(&z, f64::from(n - 1));
        if p <= 0.01 {
            return Err(format!(
                "arm ({mean}, {sd}, {n}): KS p = {p:.4} against t{}",
                n - 1
            ));
        }
        worst = worst.min(p);
    }
    // The composed sampler's control arm as well.
    let draws = draw_relative_dm(&group(86.0, 20.0, 46), &group(434.0, 129.0, 40), k, 77)
        .map_err(|e| e.to_string())?;
    let scale = 20.0 / 46f64.sqrt();
    let z: Vec<f64> = draws.mu_x.iter().map(|m| (m - 86.0) / scale).collect();
    let p = oracle::ks_student_t(&z, 45.0);
    if p <= 0.01 {
        return Err(format!(
            "draw_relative_dm control arm: KS p = {p:.4} against t45"
        ));
    }
    Ok(format!(
        "{} arms, min KS p = {:.3}",
        T_MARGINAL_ARMS.len() + 1,
        worst.min(p)
    ))
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Variance draws against closed-form InvGamma moments. The variance of the
/// sample variance needs a finite fourth moment, i.e. shape > 4 (n > 9), so
/// smaller n only check the mean.
pub fn inverse_gamma_moments(k: usize) -> Check {
    let cases = [
        (6u32, 3.0),
        (8, 0.5),
        (10, 2.0),
        (20, 28.2),
        (46, 20.0),
        (200, 7.5),
    ];
    let mut worst = 0.0f64;
    for (i, &(n, sd)) in cases.iter().enumerate() {
        let g = group(1.0, sd, n);
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + i as u64);
        let draws = draw_variances(&g, k, &mut rng).map_err(|e| e.to_string())?;
        if draws.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(format!("n={n}: non-positive variance draw"));
        }
        let shape = f64::from(n - 1) / 2.0;
        let scale = f64::from(n - 1) * sd * sd / 2.0;
        let (mean, var, mu4) = oracle::inverse_gamma_moments(shape, scale);
        let (m, v) = mean_var(&draws);
        let z_mean = (m - mean) / (var / k as f64).sqrt();
        if z_mean.abs() > 4.0 {
            return Err(format!(
                "n={n}, sd={sd}: mean {m} vs {mean} ({z_mean:.2} SE)"
            ));
        }
        worst = worst.max(z_mean.abs());
        if n > 9 {
            let z_var = (v - var) / ((mu4 - var * var) / k as f64).sqrt();
            if z_var.abs() > 4.0 {
                return Err(format!(
                    "n={n}, sd={sd}: variance {v} vs {var} ({z_var:.2} SE)"
                ));
            }
            worst = worst.max(z_var.abs());
        }
    }
    Ok(format!(
        "{} (n, sd) cases, max |z| = {worst:.2}",
        cases.len()
    ))
}

/// Study 30 control arm at `K`: the mean of the draws lies within 3 SE of
/// `(m−1)s²/(m−3)` and of an independent chi-square sampler's average.
pub fn inverse_gamma_example(k: usize) -> Check {
    let g = group(86.0, 20.0, 46);
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let draws = draw_variances(&g, k, &mut rng).map_err(|e| e.to_string())?;
    let (m, _) = mean_var(&draws);
    let closed = 45.0 * 400.0 / 43.0;
    let (_, var, _) = oracle::inverse_gamma_moments(22.5, 45.0 * 400.0 / 2.0);
    let se = (var / k as f64).sqrt();
    let brute = oracle::brute_inverse_gamma(46, 20.0, k, &mut oracle::SplitMix64::new(46));
    let (bm, _) = mean_var(&brute);
    if (m - closed).abs() > 3.0 * se {
        return Err(format!("mean {m} vs closed form {closed} (SE {se})"));
    }
    if (m - bm).abs() > 3.0 * se * 2f64.sqrt() {
        return Err(format!("mean {m} vs brute-force {bm} (SE {se})"));
    }
    Ok(format!(
        "mean {m:.2}, closed form {closed:.2}, brute force {bm:.2}"
    ))
}

/// Relative draws for `(control, experiment)` scaled by `c` match bit for bit.
pub fn scale_invariant(
    control: (f64, f64, u32),
    experiment: (f64, f64, u32),
    c: f64,
    k: usize,
    seed: u64,
) -> Result<(), String> {
    let base = draw_relative_dm(
        &group(control.0, control.1, control.2),
        &group(experiment.0, experiment.1, experiment.2),
        k,
        seed,
    )
    .map_err(|e| e.to_string())?;
    let scaled = draw_relative_dm(
        &group(c * control.0, c * control.1, control.2),
        &group(c * experiment.0, c * experiment.1, experiment.2),
        k,
        seed,
    )
    .map_err(|e| e.to_string())?;
    if base.discarded != scaled.discarded {
        return Err(format!("c={c}: discard counts differ"));
    }
    match base
        .relative
        .iter()
        .zip(&scaled.relative)
        .position(|(a, b)| a.to_bits() != b.to_bits())
    {
        Some(i) => Err(format!(
            "c={c}: draw {i} differs ({} vs {})",
            base.relative[i], scaled.relative[i]
        )),
        None => Ok(()),
    }
}

/// Integer-valued summaries under integer and power-of-two factors, so every
/// scaled input is exactly representable.
pub fn scale_invariance(trials: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3000);
    let factors = [2.0, 0.5, 0.125, 1024.0, 3.0, 10.0, 1000.0, 7.0];
    scale_invariant((86.0, 20.0, 46), (434.0, 129.0, 40), 10.0, 10_000, 30)?;
    for t in 0..trials {
        let control = (
            rng.random_range(20..2000) as f64,
            rng.random_range(1..400) as f64,
            rng.random_range(2..60),
        );
        let experiment = (
            rng.random_range(20..2000) as f64,
            rng.random_range(1..400) as f64,
            rng.random_range(2..60),
        );
        let c = factors[t % factors.len()];
        // Wide, low-n groups can exceed the discard limit; those are skipped.
        match scale_invariant(control, experiment, c, 2_000, t as u64) {
            Err(e) if e.contains("degenerate") => continue,
            other => other.map_err(|e| format!("{control:?} {experiment:?}: {e}"))?,
        }
    }
    Ok(format!("{trials} random study pairs plus study 30 at x10"))
}

/// `q_p(R′) ≈ 1/(1 + q_{1−p}(R)) − 1`, judged on the probability scale: the
/// ECDF of `R′` at the transformed quantile must be within 5 combined standard
/// errors of `p`.
pub fn swap_symmetry(k: usize) -> Check {
    let studies = [
        ((86.0, 20.0, 46), (434.0, 129.0, 40)),
        ((202.0, 28.2, 5), (135.2, 14.7, 5)),
        ((100.0, 10.0, 10), (100.0, 10.0, 10)),
        ((5.4, 2.1, 8), (3.2, 1.9, 9)),
    ];
    let mut worst = 0.0f64;
    for (i, (x, y)) in studies.iter().enumerate() {
        let gx = group(x.0, x.1, x.2);
        let gy = group(y.0, y.1, y.2);
        let r = draw_relative_dm(&gx, &gy, k, 4000 + i as u64).map_err(|e| e.to_string())?;
        let rs = draw_relative_dm(&gy, &gx, k, 5000 + i as u64).map_err(|e| e.to_string())?;
        for p in [0.025, 0.5, 0.975] {
            let q = oracle::brute_quantile(&r.relative, 1.0 - p);
            let target = 1.0 / (1.0 + q) - 1.0;
            let f = oracle::ecdf(&rs.relative, target);
            let se = (2.0 * p * (1.0 - p) / k as f64).sqrt();
            let z = (f - p) / se;
            if z.abs() > 5.0 {
                let qs = oracle::brute_quantile(&rs.relative, p);
                return Err(format!(
                    "study {i}, p={p}: q_p(R') = {qs}, transformed = {target}, ECDF {f} ({z:.2} SE)"
                ));
            }
            worst = worst.max(z.abs());
        }
    }
    Ok(format!(
        "{} studies x 3 quantiles, max |z| = {worst:.2}",
        studies.len()
    ))
}

fn draws_from(relative: Vec<f64>) -> PosteriorDraws {
    let k = relative.len();
    PosteriorDraws {
        mu_x: vec![1.0; k],
        mu_y: relative.iter().map(|r| 1.0 + r).collect(),
        relative,
        k,
        requested: k,
        discarded: 0,
        seed: 0,
    }
}

const ALPHAS: [f64; 6] = [0.05, 0.05 / 3.0, 0.01, 0.1, 0.05 / 12.0, 0.2];

fn random_vector(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k = rng.random_range(1..3000);
    match rng.random_range(0..3) {
        // Heavy duplication.
        0 => (0..k)
            .map(|_| rng.random_range(-5..5) as f64 / 4.0)
            .collect(),
        1 => (0..k).map(|_| rng.random_range(-1.0..1.0)).collect(),
        _ => (0..k)
            .map(|_| (rng.random_range(-3.0f64..3.0)).exp() - 1.0)
            .collect(),
    }
}

/// `credible_interval` against the sort-and-scan oracle on `vectors` random
/// draw vectors, compared exactly.
pub fn quantile_oracle(vectors: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6000);
    let mut compared = 0;
    for v in 0..vectors {
        let relative = random_vector(&mut rng);
        let k = relative.len();
        let alpha = if v % 2 == 0 {
            ALPHAS[v / 2 % ALPHAS.len()]
        } else {
            rng.random_range(0.001..0.5)
        };
        let q = EmpiricalQuantiles::new(&relative).map_err(|e| e.to_string())?;
        let median = oracle::brute_quantile(&relative, 0.5);
        if q.median() != median {
            return Err(format!(
                "vector {v}: median {} vs oracle {median}",
                q.median()
            ));
        }
        if (k as f64) * alpha / 2.0 < 1.0 {
            if credible_interval(&draws_from(relative), alpha).is_ok() {
                return Err(format!(
                    "vector {v}: K={k}, alpha={alpha} should be rejected"
                ));
            }
            continue;
        }
        let lo = oracle::brute_quantile(&relative, alpha / 2.0);
        let hi = oracle::brute_quantile(&relative, 1.0 - alpha / 2.0);
        let ci = credible_interval(&draws_from(relative), alpha).map_err(|e| e.to_string())?;
        if ci.lo.to_bits() != lo.to_bits() || ci.hi.to_bits() != hi.to_bits() {
            return Err(format!(
                "vector {v} (K={k}, alpha={alpha}): [{}, {}] vs oracle [{lo}, {hi}]",
                ci.lo, ci.hi
            ));
        }
        compared += 1;
    }
    // The rank rule itself at the documented corners.
    if nearest_rank(100, 0.05) != 5 || nearest_rank(100, 0.95) != 95 {
        return Err("nearest_rank grid corners".into());
    }
    Ok(format!(
        "{vectors} vectors, {compared} intervals identical to the oracle"
    ))
}

fn random_interval(rng: &mut ChaCha8Rng) -> CredibleInterval {
    let (mut lo, mut hi) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    match rng.random_range(0..8) {
        0 if hi >= 0.0 => lo = 0.0,
        1 if lo <= 0.0 => hi = 0.0,
        _ => {}
    }
    CredibleInterval {
        lo,
        hi,
        alpha_dm: 0.05,
        k: 1_000,
        seed: 0,
    }
}

/// Rejection at `v` implies rejection at every same-signed `v′` closer to 0.
pub fn threshold_monotonicity(intervals: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7000);
    let mut rejections = 0;
    for i in 0..intervals {
        let ci = random_interval(&mut rng);
        for direction in [
            Direction::Decrease,
            Direction::Increase,
            Direction::TwoSidedMagnitude,
        ] {
            let sign = if direction == Direction::Decrease {
                -1.0
            } else {
                1.0
            };
            let grid: Vec<f64> = (1..=40).map(|j| sign * j as f64 * 0.05).collect();
            for &v in &grid {
                let t = ThresholdSpec::new(v, direction).map_err(|e| e.to_string())?;
                if !test_meaningful(&ci, &t).reject_null {
                    continue;
                }
                rejections += 1;
                for &w in grid.iter().filter(|w| w.abs() <= v.abs()) {
                    let tw = ThresholdSpec::new(w, direction).map_err(|e| e.to_string())?;
                    if !test_meaningful(&ci, &tw).reject_null {
                        return Err(format!(
                            "interval {i} [{}, {}]: rejects at {v} but not at {w} ({direction})",
                            ci.lo, ci.hi
                        ));
                    }
                }
            }
        }
    }
    Ok(format!(
        "{intervals} intervals, {rejections} rejections checked"
    ))
}

/// Smaller alpha on the same draws gives a containing interval and a score no
/// larger in magnitude.
pub fn bonferroni_nesting(vectors: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8000);
    let alphas = [0.2, 0.1, 0.05, 0.025, 0.05 / 3.0, 0.01, 0.05 / 12.0];
    for v in 0..vectors {
        let shift = rng.random_range(-1.0..1.0);
        let relative: Vec<f64> = (0..2_400)
            .map(|_| shift + rng.random_range(-0.6..0.6))
            .collect();
        let draws = draws_from(relative);
        let cis: Vec<CredibleInterval> = alphas
            .iter()
            .map(|a| credible_interval(&draws, *a))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for w in cis.windows(2) {
            let (wide, narrow) = (&w[1], &w[0]);
            if !(wide.lo <= narrow.lo && narrow.hi <= wide.hi) {
                return Err(format!(
                    "vector {v}: alpha {} does not contain alpha {}",
                    wide.alpha_dm, narrow.alpha_dm
                ));
            }
            if score_delta_l(wide).abs() > score_delta_l(narrow).abs() {
                return Err(format!("vector {v}: |delta_l| grew as alpha shrank"));
            }
        }
    }
    Ok(format!("{vectors} vectors x {} alphas", alphas.len()))
}

/// Exactly one score case holds, and a nonzero score shares both bounds' sign.
pub fn delta_l_cases(intervals: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9000);
    for i in 0..intervals {
        let ci = random_interval(&mut rng);
        let d = score_delta_l(&ci);
        let cases = [
            d == 0.0,
            d == ci.lo && ci.lo > 0.0,
            d == ci.hi && ci.hi < 0.0,
        ];
        if cases.iter().filter(|c| **c).count() != 1 {
            return Err(format!(
                "interval {i} [{}, {}]: delta_l {d} matches {cases:?}",
                ci.lo, ci.hi
            ));
        }
        if d != 0.0 && !(d.signum() == ci.lo.signum() && d.signum() == ci.hi.signum()) {
            return Err(format!("interval {i}: sign incoherent"));
        }
        if d == 0.0 && !(ci.lo <= 0.0 && ci.hi >= 0.0) {
            return Err(format!(
                "interval {i}: zero score for an interval excluding 0"
            ));
        }
    }
    Ok(format!("{intervals} intervals"))
}

/// Shuffled inputs rank identically, and ranks follow the declared order.
pub fn ranking_order(trials: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);
    for t in 0..trials {
        let n = rng.random_range(1..60);
        let scores: Vec<Score> = (0..n)
            .map(|id| Score {
                id,
                delta_l: [0.0, 0.0, rng.random_range(-1.0..1.0)][rng.random_range(0..3)],
                median: rng.random_range(-1.0..1.0),
            })
            .collect();
        let reference = rank_entries(scores.clone());
        let mut shuffled = scores;
        shuffled.shuffle(&mut rng);
        let ranked = rank_entries(shuffled);
        if ranked != reference {
            return Err(format!("trial {t}: ranking depends on input order"));
        }
        for w in ranked.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let ordered = a.delta_l < b.delta_l
                || (a.delta_l == b.delta_l
                    && (a.median.abs() < b.median.abs()
                        || (a.median.abs() == b.median.abs() && a.id < b.id)));
            if !ordered {
                return Err(format!("trial {t}: {a:?} before {b:?}"));
            }
        }
    }
    Ok(format!("{trials} shuffled score sets"))
}

/// Study 30 median near the plug-in `(434−86)/86`, and close to an independent
/// sampler's median.
pub fn study_30_median(k: usize) -> Check {
    let draws = draw_relative_dm(&group(86.0, 20.0, 46), &group(434.0, 129.0, 40), k, 30)
        .map_err(|e| e.to_string())?;
    let median = oracle::brute_quantile(&draws.relative, 0.5);
    let plug_in = (434.0 - 86.0) / 86.0;
    let brute = oracle::brute_relative((86.0, 20.0, 46), (434.0, 129.0, 40), k, 30);
    let brute_median = oracle::brute_quantile(&brute, 0.5);
    if (median - plug_in).abs() > 0.1 || (brute_median - plug_in).abs() > 0.1 {
        return Err(format!(
            "median {median}, oracle {brute_median}, plug-in {plug_in}"
        ));
    }
    if (median - brute_median).abs() > 0.02 {
        return Err(format!(
            "median {median} vs independent sampler {brute_median}"
        ));
    }
    Ok(format!(
        "median {median:.4}, independent {brute_median:.4}, plug-in {plug_in:.4}"
    ))
}

/// Every property suite at its acceptance size, in order.
pub fn all() -> Vec<Suite> {
    vec![
        ("t-marginal KS (K = 1e5)", || t_marginal(100_000)),
        ("InvGamma moments (4 SE)", || inverse_gamma_moments(400_000)),
        ("InvGamma mean, study 30 control (K = 1e6)", || {
            inverse_gamma_example(1_000_000)
        }),
        ("exact scale invariance", || scale_invariance(200)),
        ("swap symmetry", || swap_symmetry(200_000)),
        ("quantile oracle, 1000 vectors", || quantile_oracle(1_000)),
        ("threshold monotonicity, 100 intervals", || {
            threshold_monotonicity(100)
        }),
        ("Bonferroni nesting, 100 vectors", || {
            bonferroni_nesting(100)
        }),
        ("delta_l case exhaustiveness", || delta_l_cases(10_000)),
        ("ranking total order and permutation invariance", || {
            ranking_order(200)
        }),
        ("study 30 median (K = 1e6)", || study_30_median(1_000_000)),
    ]
}
