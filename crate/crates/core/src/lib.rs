//! Bayesian credible intervals of the relative difference in means for
//! heterogeneous two-group studies, with effect-size scoring, threshold tests
//! and contra plot rendering.
//!
//! The typical flow is `data` (parse or load a dataset) → `analysis`
//! (draw posteriors, form intervals, score and rank) → `render` / `report`.

pub mod analysis;
pub mod data;
pub mod error;
pub mod interval;
pub mod posterior;
pub mod render;
pub mod report;
pub mod rng;

pub use analysis::{analyze, AnalysisConfig, AnalysisResult, ContraEntry, SignView};
pub use data::{bundled_dataset, parse_csv, validate_dataset, Dataset, StudyRecord, Warning};
pub use error::{Error, Result};
pub use interval::{
    credible_interval, rank_entries, score_delta_l, test_meaningful, CredibleInterval, Direction,
    TestOutcome, ThresholdSpec,
};
pub use posterior::{draw_relative_dm, GroupSummary, PosteriorDraws};
