//! The shared pipeline: draw → interval → score → rank.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{validate_dataset, Dataset, StudyRecord, Warning};
use crate::error::{Error, Result};
use crate::interval::{
    compare_scores, interval_from_quantiles, score_delta_l, CredibleInterval, Direction,
    EmpiricalQuantiles, Score, ThresholdSpec,
};
use crate::posterior::{draw_relative_dm, UNSTABLE_DISCARD_FRACTION};
use crate::rng::study_seed;

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const MIN_SAMPLES: usize = 1_000;

/// Which sign of effect a contra plot shows. Null results (`δ_L = 0`) appear in
/// both views.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignView {
    Decrease,
    Increase,
}

impl SignView {
    pub fn includes(self, delta_l: f64) -> bool {
        match self {
            SignView::Decrease => delta_l <= 0.0,
            SignView::Increase => delta_l >= 0.0,
        }
    }

    pub fn direction(self) -> Direction {
        match self {
            SignView::Decrease => Direction::Decrease,
            SignView::Increase => Direction::Increase,
        }
    }
}

impl fmt::Display for SignView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignView::Decrease => "decrease",
            SignView::Increase => "increase",
        })
    }
}

impl FromStr for SignView {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decrease" => Ok(SignView::Decrease),
            "increase" => Ok(SignView::Increase),
            other => Err(Error::InvalidArgument(format!(
                "unknown sign view `{other}` (expected decrease or increase)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisConfig {
    pub samples: usize,
    pub seed: u64,
    /// Restrict to one sign view; `None` keeps every study.
    pub sign_view: Option<SignView>,
}

impl AnalysisConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            sign_view: None,
        }
    }

    pub fn with_view(mut self, view: SignView) -> Self {
        self.sign_view = Some(view);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "K below minimum: {} samples requested, at least {MIN_SAMPLES} required",
                self.samples
            )));
        }
        Ok(())
    }
}

/// One row of a contra plot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContraEntry {
    pub record: StudyRecord,
    pub interval: CredibleInterval,
    pub median: f64,
    pub delta_l: f64,
    /// 1-based position in ascending `δ_L` order.
    pub rank: usize,
    pub discarded: usize,
}

impl ContraEntry {
    fn score(&self) -> Score {
        Score {
            id: self.record.id,
            delta_l: self.delta_l,
            median: self.median,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisResult {
    pub dataset: String,
    pub seed: u64,
    pub samples: usize,
    pub sign_view: Option<SignView>,
    /// Sorted by rank.
    pub entries: Vec<ContraEntry>,
    pub warnings: Vec<Warning>,
}

impl AnalysisResult {
    /// Entries whose interval lies entirely beyond the threshold, in rank order.
    pub fn passing(&self, threshold: &ThresholdSpec) -> Vec<&ContraEntry> {
        self.entries
            .iter()
            .filter(|e| threshold.rejects(e.delta_l))
            .collect()
    }

    pub fn entry(&self, id: u32) -> Option<&ContraEntry> {
        self.entries.iter().find(|e| e.record.id == id)
    }

    /// The same entries restricted to one sign view and re-ranked.
    pub fn view(&self, view: SignView) -> AnalysisResult {
        let entries = self
            .entries
            .iter()
            .filter(|e| view.includes(e.delta_l))
            .cloned()
            .collect();
        AnalysisResult {
            dataset: self.dataset.clone(),
            seed: self.seed,
            samples: self.samples,
            sign_view: Some(view),
            entries: assign_ranks(entries),
            warnings: self.warnings.clone(),
        }
    }
}

fn assign_ranks(mut entries: Vec<ContraEntry>) -> Vec<ContraEntry> {
    entries.sort_by(|a, b| compare_scores(&a.score(), &b.score()));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    entries
}

/// Interval, median and score for one study. Its draws depend only on
/// `(record, samples, global seed)`.
pub fn analyze_record(
    record: &StudyRecord,
    samples: usize,
    global_seed: u64,
) -> Result<ContraEntry> {
    let seed = study_seed(global_seed, record.id);
    let draws = draw_relative_dm(&record.control, &record.experiment, samples, seed).map_err(
        |e| match e {
            Error::DegenerateDraws {
                discarded,
                requested,
                ..
            } => Error::DegenerateDraws {
                study: Some(record.id),
                discarded,
                requested,
            },
            other => other,
        },
    )?;
    let quantiles = EmpiricalQuantiles::new(&draws.relative)?;
    let interval = interval_from_quantiles(&quantiles, record.alpha_dm, seed)
        .map_err(|e| Error::InvalidArgument(format!("study {}: {e}", record.id)))?;
    Ok(ContraEntry {
        record: record.clone(),
        median: quantiles.median(),
        delta_l: score_delta_l(&interval),
        interval,
        rank: 0,
        discarded: draws.discarded,
    })
}

/// Runs the full pipeline over a dataset. Studies are processed in parallel;
/// the output does not depend on the thread count.
pub fn analyze(dataset: &Dataset, config: &AnalysisConfig) -> Result<AnalysisResult> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("dataset has no records".into()));
    }
    let entries = dataset
        .records
        .par_iter()
        .map(|r| analyze_record(r, config.samples, config.seed))
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = validate_dataset(dataset);
    for e in &entries {
        if e.discarded as f64 > UNSTABLE_DISCARD_FRACTION * config.samples as f64 {
            warnings.push(Warning::DiscardedDraws {
                id: e.record.id,
                discarded: e.discarded,
                requested: config.samples,
            });
        }
    }

    let all = AnalysisResult {
        dataset: dataset.name.clone(),
        seed: config.seed,
        samples: config.samples,
        sign_view: None,
        entries: assign_ranks(entries),
        warnings,
    };
    Ok(match config.sign_view {
        Some(view) => all.view(view),
        None => all,
    })
}
