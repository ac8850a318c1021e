//! Credible intervals, the least-difference score `δ_L`, threshold tests and
//! ranking.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::PosteriorDraws;

/// Equal-tailed credible interval of the relative difference in means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub lo: f64,
    pub hi: f64,
    pub alpha_dm: f64,
    pub k: usize,
    pub seed: u64,
}

/// 1-based nearest rank `⌈k·p⌉`, clamped to `1..=k`.
///
/// `k·p` is nudged down by a relative 1e-12 before the ceiling so that
/// products like `100 × 0.95` that land a hair above an integer in binary
/// floating point still resolve to that integer.
pub fn nearest_rank(k: usize, p: f64) -> usize {
    let x = k as f64 * p;
    let rank = (x - x.abs() * 1e-12).ceil();
    (rank.max(1.0) as usize).min(k)
}

/// Sorted copy of a sample, queried with nearest-rank quantiles.
#[derive(Debug, Clone)]
pub struct EmpiricalQuantiles {
    sorted: Vec<f64>,
}

impl EmpiricalQuantiles {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty sample".into()));
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("sample contains NaN".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Smallest sample value whose ECDF reaches `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        self.sorted[nearest_rank(self.sorted.len(), p) - 1]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// `[q(α/2), q(1 − α/2)]`.
    pub fn interval(&self, alpha_dm: f64) -> Result<(f64, f64)> {
        check_alpha(self.sorted.len(), alpha_dm)?;
        Ok((
            self.quantile(alpha_dm / 2.0),
            self.quantile(1.0 - alpha_dm / 2.0),
        ))
    }
}

fn check_alpha(k: usize, alpha_dm: f64) -> Result<()> {
    if !(alpha_dm > 0.0 && alpha_dm < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha_dm must lie in (0, 1), got {alpha_dm}"
        )));
    }
    if (k as f64) * alpha_dm / 2.0 < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "{k} draws cannot resolve a tail of {}; need at least {}",
            alpha_dm / 2.0,
            (2.0 / alpha_dm).ceil()
        )));
    }
    Ok(())
}

/// Credible interval of `draws.relative` at level `1 − alpha_dm`, bounds taken
/// as nearest-rank order statistics.
pub fn credible_interval(draws: &PosteriorDraws, alpha_dm: f64) -> Result<CredibleInterval> {
    check_alpha(draws.relative.len(), alpha_dm)?;
    let quantiles = EmpiricalQuantiles::new(&draws.relative)?;
    interval_from_quantiles(&quantiles, alpha_dm, draws.seed)
}

pub(crate) fn interval_from_quantiles(
    quantiles: &EmpiricalQuantiles,
    alpha_dm: f64,
    seed: u64,
) -> Result<CredibleInterval> {
    let (lo, hi) = quantiles.interval(alpha_dm)?;
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(
            "interval bound is not finite".into(),
        ));
    }
    Ok(CredibleInterval {
        lo,
        hi,
        alpha_dm,
        k: quantiles.len(),
        seed,
    })
}

/// The value inside the interval closest to zero: `0` when the interval
/// touches or encloses zero, otherwise the bound nearest the origin.
pub fn score_delta_l(ci: &CredibleInterval) -> f64 {
    if ci.lo > 0.0 {
        ci.lo
    } else if ci.hi < 0.0 {
        ci.hi
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Decrease,
    Increase,
    TwoSidedMagnitude,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Decrease => "decrease",
            Direction::Increase => "increase",
            Direction::TwoSidedMagnitude => "two-sided-magnitude",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decrease" => Ok(Direction::Decrease),
            "increase" => Ok(Direction::Increase),
            "two-sided-magnitude" | "two-sided" => Ok(Direction::TwoSidedMagnitude),
            other => Err(Error::InvalidArgument(format!(
                "unknown direction `{other}`"
            ))),
        }
    }
}

/// Minimum meaningful effect, signed for the direction it tests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSpec {
    value: f64,
    direction: Direction,
}

impl ThresholdSpec {
    pub fn new(value: f64, direction: Direction) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "threshold must be finite, got {value}"
            )));
        }
        if value == 0.0 {
            return Err(Error::InvalidArgument(
                "threshold must be nonzero: a point null hypothesis is not supported".into(),
            ));
        }
        let sign_ok = match direction {
            Direction::Decrease => value < 0.0,
            Direction::Increase | Direction::TwoSidedMagnitude => value > 0.0,
        };
        if !sign_ok {
            return Err(Error::InvalidArgument(format!(
                "threshold {value} has the wrong sign for a {direction} test"
            )));
        }
        Ok(Self { value, direction })
    }

    /// `δ⁻ < 0`.
    pub fn decrease(value: f64) -> Result<Self> {
        Self::new(value, Direction::Decrease)
    }

    /// `δ⁺ > 0`.
    pub fn increase(value: f64) -> Result<Self> {
        Self::new(value, Direction::Increase)
    }

    /// Direction inferred from the sign of a one-sided threshold.
    pub fn from_signed(value: f64) -> Result<Self> {
        if value < 0.0 {
            Self::decrease(value)
        } else {
            Self::increase(value)
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Strict comparison of a score against the threshold.
    pub fn rejects(&self, delta_l: f64) -> bool {
        match self.direction {
            Direction::Increase => delta_l > self.value,
            Direction::Decrease => delta_l < self.value,
            Direction::TwoSidedMagnitude => delta_l.abs() > self.value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestOutcome {
    pub reject_null: bool,
    pub delta_l: f64,
    pub threshold: ThresholdSpec,
}

/// Tests whether the whole interval lies beyond the threshold. Only the
/// interval is needed, so any number of thresholds can be tried without
/// redrawing.
pub fn test_meaningful(ci: &CredibleInterval, threshold: &ThresholdSpec) -> TestOutcome {
    let delta_l = score_delta_l(ci);
    TestOutcome {
        reject_null: threshold.rejects(delta_l),
        delta_l,
        threshold: *threshold,
    }
}

/// Score of one study for ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Score {
    pub id: u32,
    pub delta_l: f64,
    /// Posterior median of the relative difference, used to break ties.
    pub median: f64,
}

/// Ascending `δ_L`; ties go to the smaller posterior-median magnitude, then
/// the smaller id.
pub fn compare_scores(a: &Score, b: &Score) -> Ordering {
    a.delta_l
        .total_cmp(&b.delta_l)
        .then_with(|| a.median.abs().total_cmp(&b.median.abs()))
        .then_with(|| a.id.cmp(&b.id))
}

/// Sorts scores into rank order (rank 1 first).
pub fn rank_entries(mut scores: Vec<Score>) -> Vec<Score> {
    scores.sort_by(compare_scores);
    scores
}
