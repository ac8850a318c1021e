//! Serialized form of an analysis, shared by the CLI and the HTTP service.
//!
//! ```json
//! {"dataset": "tpc", "seed": 42, "samples": 100000,
//!  "entries": [{"id": 17, "lo": -0.64, "hi": -0.47, "median": -0.56,
//!               "delta_l": -0.47, "rank": 1, "alpha_dm": 0.05, "metadata": {...}}]}
//! ```

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisResult, ContraEntry, SignView};

/// Number formatting of reported reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    /// Six significant digits; keeps golden files stable.
    #[default]
    Significant6,
    Full,
}

impl Precision {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Precision::Full => x,
            Precision::Significant6 => round_significant(x, 6),
        }
    }
}

pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub study: String,
    pub year: i32,
    pub group_x: String,
    pub x_mean: f64,
    pub x_sd: f64,
    pub x_n: u32,
    pub group_y: String,
    pub y_mean: f64,
    pub y_sd: f64,
    pub y_n: u32,
    pub units: String,
    pub alpha_text: String,
    pub species: String,
    pub pmid: String,
    pub location: String,
    pub reported_sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub id: u32,
    pub lo: f64,
    pub hi: f64,
    pub median: f64,
    pub delta_l: f64,
    pub rank: usize,
    pub alpha_dm: f64,
    pub discarded: usize,
    pub metadata: Metadata,
}

impl EntryReport {
    pub fn from_entry(e: &ContraEntry, precision: Precision) -> Self {
        let r = &e.record;
        let p = |x| precision.apply(x);
        Self {
            id: r.id,
            lo: p(e.interval.lo),
            hi: p(e.interval.hi),
            median: p(e.median),
            delta_l: p(e.delta_l),
            rank: e.rank,
            alpha_dm: p(r.alpha_dm),
            discarded: e.discarded,
            metadata: Metadata {
                study: r.study.clone(),
                year: r.year,
                group_x: r.group_x_label.clone(),
                x_mean: r.control.mean,
                x_sd: r.control.sd,
                x_n: r.control.n,
                group_y: r.group_y_label.clone(),
                y_mean: r.experiment.mean,
                y_sd: r.experiment.sd,
                y_n: r.experiment.n,
                units: r.units.clone(),
                alpha_text: r.alpha_text.clone(),
                species: r.species.clone(),
                pmid: r.pmid.clone(),
                location: r.location.clone(),
                reported_sign: r.reported_sign,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub dataset: String,
    pub seed: u64,
    pub samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign: Option<SignView>,
    pub entries: Vec<EntryReport>,
}

impl Report {
    pub fn new(result: &AnalysisResult, precision: Precision) -> Self {
        Self {
            dataset: result.dataset.clone(),
            seed: result.seed,
            samples: result.samples,
            sign: result.sign_view,
            entries: result
                .entries
                .iter()
                .map(|e| EntryReport::from_entry(e, precision))
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Flat CSV of the analysis entries in rank order.
pub fn entries_csv(result: &AnalysisResult, precision: Precision) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record([
        "id",
        "rank",
        "lo",
        "hi",
        "median",
        "delta_l",
        "alpha_dm",
        "discarded",
        "study",
        "group_x",
        "group_y",
        "units",
        "species",
        "pmid",
        "location",
        "reported_sign",
    ])
    .expect("write to Vec");
    for e in &result.entries {
        let r = EntryReport::from_entry(e, precision);
        w.write_record([
            r.id.to_string(),
            r.rank.to_string(),
            r.lo.to_string(),
            r.hi.to_string(),
            r.median.to_string(),
            r.delta_l.to_string(),
            r.metadata.alpha_text.clone(),
            r.discarded.to_string(),
            r.metadata.study,
            r.metadata.group_x,
            r.metadata.group_y,
            r.metadata.units,
            r.metadata.species,
            r.metadata.pmid,
            r.metadata.location,
            r.metadata.reported_sign.to_string(),
        ])
        .expect("write to Vec");
    }
    String::from_utf8(w.into_inner().expect("flush Vec")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(round_significant(0.123456789, 6), 0.123457);
        assert_eq!(round_significant(-4.04651162, 6), -4.04651);
        assert_eq!(round_significant(1234567.0, 6), 1234570.0);
        assert_eq!(round_significant(0.0, 6), 0.0);
        assert_eq!(Precision::Full.apply(0.123456789), 0.123456789);
    }
}
