use thiserror::Error;

use crate::data::ParseReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid group summary: {0}")]
    InvalidGroup(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Too many posterior draws fell outside the positive quadrant.
    #[error(
        "degenerate posterior draws{}: {discarded} of {requested} draws had a non-positive mean; \
         the relative difference is unstable for this study",
        study.map(|id| format!(" for study {id}")).unwrap_or_default()
    )]
    DegenerateDraws {
        study: Option<u32>,
        discarded: usize,
        requested: usize,
    },

    #[error("{0}")]
    Parse(#[from] ParseReport),

    #[error("unknown dataset `{0}` (expected one of: tpc, plaque)")]
    UnknownDataset(String),

    #[error("render error: {0}")]
    Render(String),
}
