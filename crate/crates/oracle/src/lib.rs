//! Reference computations for tests.
//!
//! Nothing here shares code with `contra-core`: the generator, the normal and
//! chi-square samplers, the quantile rule and the KS test are all written out
//! from first principles so they can check the library rather than echo it.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// SplitMix64, used as a generator that has nothing in common with ChaCha.
#[derive(Debug, Clone)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform on (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    /// Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Chi-square with integer degrees of freedom as a sum of squared normals.
    pub fn chi_square(&mut self, df: u32) -> f64 {
        (0..df).map(|_| self.normal().powi(2)).sum()
    }
}

/// `σ² = (n−1)s² / χ²_{n−1}`, which is `InvGamma((n−1)/2, (n−1)s²/2)`.
pub fn brute_inverse_gamma(n: u32, sd: f64, k: usize, rng: &mut SplitMix64) -> Vec<f64> {
    let df = n - 1;
    (0..k)
        .map(|_| f64::from(df) * sd * sd / rng.chi_square(df))
        .collect()
}

/// Closed-form raw moments `E[X^j]` of `InvGamma(shape, scale)`, `j < shape`.
pub fn inverse_gamma_raw_moment(shape: f64, scale: f64, j: u32) -> f64 {
    (1..=j).fold(1.0, |acc, i| acc * scale / (shape - f64::from(i)))
}

/// Mean, variance and fourth central moment of `InvGamma(shape, scale)`.
pub fn inverse_gamma_moments(shape: f64, scale: f64) -> (f64, f64, f64) {
    let m = |j| inverse_gamma_raw_moment(shape, scale, j);
    let (e1, e2, e3, e4) = (m(1), m(2), m(3), m(4));
    let var = e2 - e1 * e1;
    let mu4 = e4 - 4.0 * e3 * e1 + 6.0 * e2 * e1 * e1 - 3.0 * e1.powi(4);
    (e1, var, mu4)
}

/// Marginal posterior draw of one arm's mean: `x̄ + (s/√n)·t_{n−1}`, with the
/// t variate built from a normal and a chi-square.
pub fn brute_mean_draw(mean: f64, sd: f64, n: u32, rng: &mut SplitMix64) -> f64 {
    let df = n - 1;
    let t = rng.normal() / (rng.chi_square(df) / f64::from(df)).sqrt();
    mean + sd / f64::from(n).sqrt() * t
}

/// Relative-difference draws restricted to positive means in both arms.
pub fn brute_relative(
    control: (f64, f64, u32),
    experiment: (f64, f64, u32),
    k: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let mx = brute_mean_draw(control.0, control.1, control.2, &mut rng);
        let my = brute_mean_draw(experiment.0, experiment.1, experiment.2, &mut rng);
        if mx > 0.0 && my > 0.0 {
            out.push((my - mx) / mx);
        }
    }
    out
}

/// Nearest-rank quantile by full sort and a linear scan of the ECDF:
/// the first order statistic `x_(r)` with `r/K ≥ p`.
pub fn brute_quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let k = sorted.len() as f64;
    let target = p * (1.0 - 1e-12);
    for (i, v) in sorted.iter().enumerate() {
        if (i + 1) as f64 / k >= target {
            return *v;
        }
    }
    *sorted.last().expect("non-empty")
}

/// Fraction of `values` that are `≤ x`.
pub fn ecdf(values: &[f64], x: f64) -> f64 {
    values.iter().filter(|v| **v <= x).count() as f64 / values.len() as f64
}

/// Two-sided one-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic (Stephens' small-sample correction).
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=200 {
        let j = f64::from(j);
        let term = 2.0 * (-1f64).powf(j - 1.0) * (-2.0 * j * j * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// KS p-value of `sample` against Student-t with `df` degrees of freedom.
pub fn ks_student_t(sample: &[f64], df: f64) -> f64 {
    let t = StudentsT::new(0.0, 1.0, df).expect("valid t");
    let d = ks_statistic(sample, |x| t.cdf(x));
    ks_p_value(d, sample.len())
}
