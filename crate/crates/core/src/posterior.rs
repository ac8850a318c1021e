//! Monte Carlo draws from the closed-form posterior of two independent normal
//! populations under the noninformative prior `p(μ, σ²) ∝ 1/σ²`.
//!
//! Per arm, with sample mean `x̄`, sample SD `s` and size `m`:
//!
//! ```text
//! σ²     | data ~ InvGamma((m-1)/2, (m-1)s²/2)
//! μ | σ², data ~ Normal(x̄, σ²/m)
//! ```
//!
//! and the relative difference in means is `(μ_Y - μ_X) / μ_X`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{arm_stream, Arm};

/// Summary statistics of one study arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub mean: f64,
    pub sd: f64,
    pub n: u32,
}

impl GroupSummary {
    pub fn new(mean: f64, sd: f64, n: u32) -> Result<Self> {
        let group = Self { mean, sd, n };
        group.validate()?;
        Ok(group)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || self.mean <= 0.0 {
            return Err(Error::InvalidGroup(format!(
                "mean must be positive and finite, got {}",
                self.mean
            )));
        }
        if !self.sd.is_finite() || self.sd <= 0.0 {
            return Err(Error::InvalidGroup(format!(
                "sd must be positive and finite, got {}",
                self.sd
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidGroup(format!(
                "sample size below 2 (n = {})",
                self.n
            )));
        }
        Ok(())
    }

    fn half_df(&self) -> f64 {
        f64::from(self.n - 1) / 2.0
    }
}

/// Draws from the joint posterior of one study plus the derived relative
/// difference in means.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub mu_x: Vec<f64>,
    pub mu_y: Vec<f64>,
    pub relative: Vec<f64>,
    /// Number of retained draws (length of every vector).
    pub k: usize,
    /// Number of draws requested before truncation.
    pub requested: usize,
    /// Draws dropped because `μ_X ≤ 0` or `μ_Y ≤ 0`.
    pub discarded: usize,
    pub seed: u64,
}

impl PosteriorDraws {
    pub fn discard_fraction(&self) -> f64 {
        self.discarded as f64 / self.requested as f64
    }
}

/// Variance draws standardized to `s = 1`, i.e. `InvGamma(h, h)` with
/// `h = (n-1)/2`. Consumes exactly the gamma variates of `k` draws.
fn draw_unit_variances<R: Rng + ?Sized>(group: &GroupSummary, k: usize, rng: &mut R) -> Vec<f64> {
    let half_df = group.half_df();
    let gamma = Gamma::new(half_df, 1.0).expect("shape is positive for n >= 2");
    (0..k).map(|_| half_df / gamma.sample(rng)).collect()
}

fn draw_standard_normals<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    (0..k).map(|_| StandardNormal.sample(rng)).collect()
}

/// `k` draws of `σ²` from `InvGamma((n-1)/2, (n-1)·sd²/2)`.
///
/// The scale enters as a single multiplication by `sd²`, so rescaling `sd`
/// rescales every draw by the square of the factor under the same generator
/// state.
pub fn draw_variances<R: Rng + ?Sized>(
    group: &GroupSummary,
    k: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    group.validate()?;
    if k == 0 {
        return Err(Error::InvalidArgument(
            "draw count must be at least 1".into(),
        ));
    }
    let sd2 = group.sd * group.sd;
    Ok(draw_unit_variances(group, k, rng)
        .into_iter()
        .map(|w| sd2 * w)
        .collect())
}

/// One draw of `μ ~ Normal(mean, σ²_i / n)` per supplied variance.
pub fn draw_means_given_variances<R: Rng + ?Sized>(
    group: &GroupSummary,
    variances: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if let Some(bad) = variances.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "variances must be positive and finite, got {bad}"
        )));
    }
    let n = f64::from(group.n);
    let z = draw_standard_normals(variances.len(), rng);
    Ok(variances
        .iter()
        .zip(z)
        .map(|(v, z)| group.mean + (v / n).sqrt() * z)
        .collect())
}

/// Largest tolerated fraction of non-positive draws before the study is
/// rejected as degenerate.
pub const MAX_DISCARD_FRACTION: f64 = 0.5;

/// Fraction of discarded draws above which a study is flagged as unstable.
pub const UNSTABLE_DISCARD_FRACTION: f64 = 0.001;

/// Posterior draws of `(μ_X, μ_Y)` and `rμ_DM = (μ_Y − μ_X)/μ_X` for one study.
///
/// Each arm reads the same sequence as `draw_variances` followed by
/// `draw_means_given_variances` on its own stream of `seed`. The relative
/// difference is formed from scale-free ratios of the inputs
/// (`sd_x/x̄`, `ȳ/x̄`, `sd_y/x̄`), so multiplying every mean and SD by a common
/// factor leaves `relative` bit-identical whenever the scaled inputs are exact.
///
/// Draws with a non-positive mean in either arm are dropped (the relative
/// difference is only meaningful for positive means) and counted in
/// `discarded`. More than [`MAX_DISCARD_FRACTION`] dropped is an error.
pub fn draw_relative_dm(
    control: &GroupSummary,
    experiment: &GroupSummary,
    k: usize,
    seed: u64,
) -> Result<PosteriorDraws> {
    control.validate()?;
    experiment.validate()?;
    if k == 0 {
        return Err(Error::InvalidArgument(
            "draw count must be at least 1".into(),
        ));
    }

    let (wx, zx) = {
        let mut rng = arm_stream(seed, Arm::Control);
        let w = draw_unit_variances(control, k, &mut rng);
        (w, draw_standard_normals(k, &mut rng))
    };
    let (wy, zy) = {
        let mut rng = arm_stream(seed, Arm::Experiment);
        let w = draw_unit_variances(experiment, k, &mut rng);
        (w, draw_standard_normals(k, &mut rng))
    };

    let cv_x = control.sd / control.mean;
    let ratio_y = experiment.mean / control.mean;
    let cv_y = experiment.sd / control.mean;
    let nx = f64::from(control.n);
    let ny = f64::from(experiment.n);

    let mut mu_x = Vec::with_capacity(k);
    let mut mu_y = Vec::with_capacity(k);
    let mut relative = Vec::with_capacity(k);
    for i in 0..k {
        // Both means in units of the control sample mean.
        let ux = 1.0 + cv_x * (wx[i] / nx).sqrt() * zx[i];
        let uy = ratio_y + cv_y * (wy[i] / ny).sqrt() * zy[i];
        if ux <= 0.0 || uy <= 0.0 {
            continue;
        }
        mu_x.push(control.mean * ux);
        mu_y.push(control.mean * uy);
        relative.push((uy - ux) / ux);
    }

    let retained = relative.len();
    let discarded = k - retained;
    if discarded as f64 > MAX_DISCARD_FRACTION * k as f64 {
        return Err(Error::DegenerateDraws {
            study: None,
            discarded,
            requested: k,
        });
    }

    Ok(PosteriorDraws {
        mu_x,
        mu_y,
        relative,
        k: retained,
        requested: k,
        discarded,
        seed,
    })
}
