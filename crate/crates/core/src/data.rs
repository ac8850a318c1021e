//! Study records in the supplementary-table CSV schema.
//!
//! ```text
//! id,study,year,group_x,x_mean,x_sd,x_n,group_y,y_mean,y_sd,y_n,units,alpha_dm,species,pmid,location,reported_sign
//! ```
//!
//! `alpha_dm` accepts a decimal or an `a/b` fraction such as `0.05/3`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::posterior::GroupSummary;

pub const COLUMNS: [&str; 17] = [
    "id",
    "study",
    "year",
    "group_x",
    "x_mean",
    "x_sd",
    "x_n",
    "group_y",
    "y_mean",
    "y_sd",
    "y_n",
    "units",
    "alpha_dm",
    "species",
    "pmid",
    "location",
    "reported_sign",
];

/// One row of a study table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub id: u32,
    pub study: String,
    pub year: i32,
    pub group_x_label: String,
    pub control: GroupSummary,
    pub group_y_label: String,
    pub experiment: GroupSummary,
    pub units: String,
    pub alpha_dm: f64,
    /// `alpha_dm` as written in the source, e.g. `0.05/3`.
    pub alpha_text: String,
    pub species: String,
    pub pmid: String,
    pub location: String,
    pub reported_sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub measured_phenomenon: String,
    pub records: Vec<StudyRecord>,
}

impl Dataset {
    pub fn get(&self, id: u32) -> Option<&StudyRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// A single problem found while parsing, located by data row (1-based,
/// header excluded) and column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowError {
    pub row: usize,
    pub field: String,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.row == 0 {
            write!(f, "{}: {}", self.field, self.message)
        } else {
            write!(f, "row {}, {}: {}", self.row, self.field, self.message)
        }
    }
}

/// Every error found in one input, not just the first.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ParseReport {
    pub errors: Vec<RowError>,
}

impl fmt::Display for ParseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error(s) in study table", self.errors.len())?;
        for e in &self.errors {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseReport {}

/// Unvalidated record with every field as text. Deserializes from JSON objects
/// whose values are strings or numbers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    #[serde(deserialize_with = "text_or_number")]
    pub id: String,
    #[serde(default, deserialize_with = "text_or_number")]
    pub study: String,
    #[serde(default, deserialize_with = "text_or_number")]
    pub year: String,
    #[serde(default, deserialize_with = "text_or_number")]
    pub group_x: String,
    #[serde(deserialize_with = "text_or_number")]
    pub x_mean: String,
    #[serde(deserialize_with = "text_or_number")]
    pub x_sd: String,
    #[serde(deserialize_with = "text_or_number")]
    pub x_n: String,
    #[serde(default, deserialize_with = "text_or_number")]
    pub group_y: String,
    #[serde(deserialize_with = "text_or_number")]
    pub y_mean: String,
    #[serde(deserialize_with = "text_or_number")]
    pub y_sd: String,
    #[serde(deserialize_with = "text_or_number")]
    pub y_n: String,
    #[serde(default, deserialize_with = "text_or_number")]
    pub units: String,
    #[serde(deserialize_with = "text_or_number")]
    pub alpha_dm: String,
    #[serde(default, deserialize_with = "text_or_number")]
    pub species: String,
    #[serde(default, deserialize_with = "text_or_number")]
    pub pmid: String,
    #[serde(default, deserialize_with = "text_or_number")]
    pub location: String,
    #[serde(default, deserialize_with = "text_or_number")]
    pub reported_sign: String,
}

fn text_or_number<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Cell {
        Text(String),
        Int(i64),
        Float(f64),
    }
    Ok(match Cell::deserialize(de)? {
        Cell::Text(s) => s,
        Cell::Int(i) => i.to_string(),
        Cell::Float(x) => x.to_string(),
    })
}

impl RawRecord {
    fn from_fields(fields: &[&str]) -> Self {
        let f = |i: usize| {
            fields
                .get(i)
                .map(|s| s.trim().to_string())
                .unwrap_or_default()
        };
        Self {
            id: f(0),
            study: f(1),
            year: f(2),
            group_x: f(3),
            x_mean: f(4),
            x_sd: f(5),
            x_n: f(6),
            group_y: f(7),
            y_mean: f(8),
            y_sd: f(9),
            y_n: f(10),
            units: f(11),
            alpha_dm: f(12),
            species: f(13),
            pmid: f(14),
            location: f(15),
            reported_sign: f(16),
        }
    }

    /// Converts to a validated record, or every field-level error in the row.
    pub fn into_record(self, row: usize) -> std::result::Result<StudyRecord, Vec<RowError>> {
        let mut errors = Vec::new();
        let mut err = |field: &str, message: String| {
            errors.push(RowError {
                row,
                field: field.to_string(),
                message,
            });
        };

        let id = parse_int::<u32>(&self.id, "id", &mut err);
        let year = if self.year.is_empty() {
            Some(0)
        } else {
            parse_int::<i32>(&self.year, "year", &mut err)
        };
        let control = parse_group(&self.x_mean, &self.x_sd, &self.x_n, "x", &mut err);
        let experiment = parse_group(&self.y_mean, &self.y_sd, &self.y_n, "y", &mut err);
        let alpha_dm = match parse_alpha(&self.alpha_dm) {
            Ok(a) => Some(a),
            Err(message) => {
                err("alpha_dm", message);
                None
            }
        };
        let reported_sign = match self.reported_sign.as_str() {
            "" | "0" => Some(0),
            "1" | "+1" => Some(1),
            "-1" => Some(-1),
            other => {
                err(
                    "reported_sign",
                    format!("expected -1, 0 or 1, got `{other}`"),
                );
                None
            }
        };

        match (id, year, control, experiment, alpha_dm, reported_sign) {
            (Some(id), Some(year), Some(control), Some(experiment), Some(alpha_dm), Some(sign))
                if errors.is_empty() =>
            {
                Ok(StudyRecord {
                    id,
                    study: self.study,
                    year,
                    group_x_label: self.group_x,
                    control,
                    group_y_label: self.group_y,
                    experiment,
                    units: self.units,
                    alpha_dm,
                    alpha_text: self.alpha_dm,
                    species: self.species,
                    pmid: self.pmid,
                    location: self.location,
                    reported_sign: sign,
                })
            }
            _ => Err(errors),
        }
    }
}

fn parse_int<T: std::str::FromStr>(
    text: &str,
    field: &str,
    err: &mut impl FnMut(&str, String),
) -> Option<T> {
    match text.parse::<T>() {
        Ok(v) => Some(v),
        Err(_) => {
            err(field, format!("expected an integer, got `{text}`"));
            None
        }
    }
}

fn parse_real(text: &str, field: &str, err: &mut impl FnMut(&str, String)) -> Option<f64> {
    match text.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            err(field, format!("expected a number, got `{text}`"));
            None
        }
    }
}

fn parse_group(
    mean: &str,
    sd: &str,
    n: &str,
    arm: &str,
    err: &mut impl FnMut(&str, String),
) -> Option<GroupSummary> {
    let mean_field = format!("{arm}_mean");
    let sd_field = format!("{arm}_sd");
    let n_field = format!("{arm}_n");
    let mean = parse_real(mean, &mean_field, err);
    let sd = parse_real(sd, &sd_field, err);
    let n = parse_int::<u32>(n, &n_field, err);

    let mut ok = true;
    if let Some(m) = mean {
        if m <= 0.0 {
            err(&mean_field, format!("mean must be positive, got {m}"));
            ok = false;
        }
    }
    if let Some(s) = sd {
        if s <= 0.0 {
            err(
                &sd_field,
                format!("standard deviation must be positive, got {s}"),
            );
            ok = false;
        }
    }
    if let Some(n) = n {
        if n < 2 {
            err(&n_field, format!("sample size below 2 (n = {n})"));
            ok = false;
        }
    }
    match (mean, sd, n) {
        (Some(mean), Some(sd), Some(n)) if ok => Some(GroupSummary { mean, sd, n }),
        _ => None,
    }
}

/// Parses `0.05` or `0.05/3`; the result must lie strictly inside (0, 1).
pub fn parse_alpha(text: &str) -> std::result::Result<f64, String> {
    let value = match text.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num
                .trim()
                .parse()
                .map_err(|_| format!("bad numerator in `{text}`"))?;
            let den: f64 = den
                .trim()
                .parse()
                .map_err(|_| format!("bad denominator in `{text}`"))?;
            if den == 0.0 {
                return Err(format!("division by zero in `{text}`"));
            }
            num / den
        }
        None => text
            .trim()
            .parse()
            .map_err(|_| format!("expected a number or fraction, got `{text}`"))?,
    };
    if !(value > 0.0 && value < 1.0) {
        return Err(format!(
            "alpha_dm must lie in (0, 1), got `{text}`; write the family-wise level divided \
             by the study's number of comparisons, e.g. 0.05 or 0.05/3"
        ));
    }
    Ok(value)
}

/// Validates raw rows into a dataset, collecting every error.
pub fn records_from_raw(
    name: &str,
    rows: impl IntoIterator<Item = RawRecord>,
) -> std::result::Result<Dataset, ParseReport> {
    let mut report = ParseReport::default();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in rows.into_iter().enumerate() {
        let row = i + 1;
        match raw.into_record(row) {
            Ok(rec) => {
                if !seen.insert(rec.id) {
                    report.errors.push(RowError {
                        row,
                        field: "id".into(),
                        message: format!("duplicate id {}", rec.id),
                    });
                } else {
                    records.push(rec);
                }
            }
            Err(errs) => report.errors.extend(errs),
        }
    }
    if report.errors.is_empty() && records.is_empty() {
        report.errors.push(RowError {
            row: 0,
            field: "dataset".into(),
            message: "no records".into(),
        });
    }
    if report.errors.is_empty() {
        Ok(Dataset {
            name: name.to_string(),
            measured_phenomenon: String::new(),
            records,
        })
    } else {
        Err(report)
    }
}

/// Parses a study table. The header row is required; column order is free.
pub fn parse_csv(name: &str, text: &str) -> std::result::Result<Dataset, ParseReport> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());

    let headers = match reader.headers() {
        Ok(h) => h.clone(),
        Err(e) => {
            return Err(ParseReport {
                errors: vec![RowError {
                    row: 0,
                    field: "header".into(),
                    message: e.to_string(),
                }],
            })
        }
    };
    let index: Vec<Option<usize>> = COLUMNS
        .iter()
        .map(|c| headers.iter().position(|h| h.trim() == *c))
        .collect();
    let missing: Vec<RowError> = COLUMNS
        .iter()
        .zip(&index)
        .filter(|(_, i)| i.is_none())
        .map(|(c, _)| RowError {
            row: 0,
            field: (*c).into(),
            message: "missing column".into(),
        })
        .collect();
    if !missing.is_empty() {
        return Err(ParseReport { errors: missing });
    }

    let mut rows = Vec::new();
    let mut io_errors = Vec::new();
    for (i, result) in reader.records().enumerate() {
        match result {
            Ok(rec) => {
                let fields: Vec<&str> = index
                    .iter()
                    .map(|ix| rec.get(ix.expect("checked above")).unwrap_or(""))
                    .collect();
                rows.push(RawRecord::from_fields(&fields));
            }
            Err(e) => io_errors.push(RowError {
                row: i + 1,
                field: "row".into(),
                message: e.to_string(),
            }),
        }
    }
    match records_from_raw(name, rows) {
        Ok(ds) if io_errors.is_empty() => Ok(ds),
        Ok(_) => Err(ParseReport { errors: io_errors }),
        Err(mut report) => {
            report.errors.extend(io_errors);
            report.errors.sort_by_key(|e| e.row);
            Err(report)
        }
    }
}

/// Writes records back in the input schema. `alpha_dm` keeps its source text.
pub fn serialize_csv(dataset: &Dataset) -> String {
    serialize_records(dataset.records.iter())
}

pub(crate) fn serialize_records<'a>(records: impl Iterator<Item = &'a StudyRecord>) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(COLUMNS).expect("write to Vec");
    for r in records {
        writer
            .write_record([
                r.id.to_string(),
                r.study.clone(),
                r.year.to_string(),
                r.group_x_label.clone(),
                r.control.mean.to_string(),
                r.control.sd.to_string(),
                r.control.n.to_string(),
                r.group_y_label.clone(),
                r.experiment.mean.to_string(),
                r.experiment.sd.to_string(),
                r.experiment.n.to_string(),
                r.units.clone(),
                r.alpha_text.clone(),
                r.species.clone(),
                r.pmid.clone(),
                r.location.clone(),
                r.reported_sign.to_string(),
            ])
            .expect("write to Vec");
    }
    String::from_utf8(writer.into_inner().expect("flush Vec")).expect("csv output is UTF-8")
}

/// Non-fatal observations about a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Warning {
    /// More than one unit of measure. Informational: the relative difference
    /// is unit-free.
    MixedUnits { units: Vec<String> },
    /// Control mean within two SDs of zero; the relative difference may be
    /// unstable.
    UnstableControl { id: u32, mean: f64, sd: f64 },
    /// Posterior draws were dropped for a non-positive mean.
    DiscardedDraws {
        id: u32,
        discarded: usize,
        requested: usize,
    },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::MixedUnits { units } => write!(
                f,
                "info: mixed units ({}); the relative difference in means is unit-free",
                units.join(", ")
            ),
            Warning::UnstableControl { id, mean, sd } => write!(
                f,
                "study {id}: control mean {mean} is within 2 SD ({sd}) of zero; \
                 relative difference may be unstable"
            ),
            Warning::DiscardedDraws {
                id,
                discarded,
                requested,
            } => write!(
                f,
                "study {id}: {discarded} of {requested} posterior draws had a non-positive mean \
                 and were discarded"
            ),
        }
    }
}

fn normalize_unit(unit: &str) -> String {
    unit.chars()
        .filter(|c| !c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect()
}

pub fn validate_dataset(dataset: &Dataset) -> Vec<Warning> {
    let mut warnings = Vec::new();
    let mut seen = BTreeSet::new();
    let mut units = Vec::new();
    for r in &dataset.records {
        if !r.units.is_empty() && seen.insert(normalize_unit(&r.units)) {
            units.push(r.units.clone());
        }
    }
    if units.len() > 1 {
        warnings.push(Warning::MixedUnits { units });
    }
    for r in &dataset.records {
        if r.control.mean < 2.0 * r.control.sd {
            warnings.push(Warning::UnstableControl {
                id: r.id,
                mean: r.control.mean,
                sd: r.control.sd,
            });
        }
    }
    warnings
}

pub const BUNDLED_NAMES: [&str; 2] = ["tpc", "plaque"];

const TPC_CSV: &str = include_str!("../data/tpc.csv");
const PLAQUE_CSV: &str = include_str!("../data/plaque.csv");

/// The source table lists `alpha_dm = 0` for plaque study 24, which defines no
/// interval; the bundled copy uses 0.05.
pub const PLAQUE_ROW_24_NOTE: &str =
    "plaque study 24: alpha_dm listed as 0 in the source table; bundled as 0.05";

/// Raw CSV text of a bundled dataset.
pub fn bundled_csv(name: &str) -> Result<&'static str> {
    match name {
        "tpc" => Ok(TPC_CSV),
        "plaque" => Ok(PLAQUE_CSV),
        other => Err(Error::UnknownDataset(other.to_string())),
    }
}

/// Atherosclerosis case-study tables: `tpc` (total plasma cholesterol, 35
/// studies) and `plaque` (plaque size, 28 studies).
pub fn bundled_dataset(name: &str) -> Result<Dataset> {
    let text = bundled_csv(name)?;
    let mut ds = parse_csv(name, text).map_err(Error::Parse)?;
    ds.measured_phenomenon = match name {
        "tpc" => "total plasma cholesterol",
        _ => "plaque size",
    }
    .to_string();
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "id,study,year,group_x,x_mean,x_sd,x_n,group_y,y_mean,y_sd,y_n,units,alpha_dm,species,pmid,location,reported_sign";

    fn one_row(row: &str) -> std::result::Result<Dataset, ParseReport> {
        parse_csv("t", &format!("{HEADER}\n{row}\n"))
    }

    #[test]
    fn bundled_tpc() {
        let ds = bundled_dataset("tpc").unwrap();
        assert_eq!(ds.len(), 35);
        let r = ds.get(30).unwrap();
        assert_eq!(
            r.control,
            GroupSummary {
                mean: 86.0,
                sd: 20.0,
                n: 46
            }
        );
        assert_eq!(
            r.experiment,
            GroupSummary {
                mean: 434.0,
                sd: 129.0,
                n: 40
            }
        );
        assert_eq!(r.alpha_text, "0.05/3");
        assert_eq!(r.alpha_dm, 0.05 / 3.0);
        assert_eq!(r.reported_sign, 1);
        assert_eq!(r.pmid, "1411543");
    }

    #[test]
    fn bundled_plaque() {
        let ds = bundled_dataset("plaque").unwrap();
        assert_eq!(ds.len(), 28);
        assert_eq!(ds.get(24).unwrap().alpha_dm, 0.05);
        assert_eq!(ds.get(2).unwrap().control.mean, 6.7e5);
    }

    #[test]
    fn unknown_bundle() {
        assert!(matches!(
            bundled_dataset("xyz"),
            Err(Error::UnknownDataset(_))
        ));
    }

    #[test]
    fn sample_size_below_two() {
        let report = one_row("1,A,2000,c,10,2,1,e,12,2,5,mg,0.05,ms,1,T1,0").unwrap_err();
        assert_eq!(report.errors.len(), 1);
        assert_eq!(report.errors[0].row, 1);
        assert_eq!(report.errors[0].field, "x_n");
        assert!(report.errors[0].message.contains("sample size below 2"));
    }

    #[test]
    fn zero_alpha_has_hint() {
        let report = one_row("24,Engel.,2019,WT,2.2E+05,6.5E+04,17,CD47-/-,3.4E+05,1.9E+05,17,um,0,ms,31337788,F1C,1")
            .unwrap_err();
        let e = &report.errors[0];
        assert_eq!(e.field, "alpha_dm");
        assert!(e.message.contains("0.05/3"), "{}", e.message);
    }

    #[test]
    fn collects_all_errors() {
        let text = format!(
            "{HEADER}\n1,A,2000,c,abc,2,5,e,12,2,5,mg,0.05,ms,1,T1,0\n\
             2,B,2000,c,10,0,5,e,12,2,5,mg,0.05/0,ms,1,T1,2\n\
             3,C,2000,c,10,2,5,e,12,2,5,mg,0.05,ms,1,T1,0\n\
             3,D,2000,c,10,2,5,e,12,2,5,mg,0.05,ms,1,T1,0\n"
        );
        let report = parse_csv("t", &text).unwrap_err();
        let fields: Vec<(usize, &str)> = report
            .errors
            .iter()
            .map(|e| (e.row, e.field.as_str()))
            .collect();
        assert_eq!(
            fields,
            vec![
                (1, "x_mean"),
                (2, "x_sd"),
                (2, "alpha_dm"),
                (2, "reported_sign"),
                (4, "id")
            ]
        );
    }

    #[test]
    fn missing_column() {
        let report = parse_csv("t", "id,study\n1,A\n").unwrap_err();
        assert!(report
            .errors
            .iter()
            .any(|e| e.field == "x_mean" && e.message == "missing column"));
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(parse_csv("t", &format!("{HEADER}\n")).is_err());
    }

    #[test]
    fn alpha_forms() {
        assert_eq!(parse_alpha("0.05").unwrap(), 0.05);
        assert_eq!(parse_alpha("0.05/12").unwrap(), 0.05 / 12.0);
        assert_eq!(parse_alpha(" 0.05 / 4 ").unwrap(), 0.05 / 4.0);
        assert!(parse_alpha("0").is_err());
        assert!(parse_alpha("1").is_err());
        assert!(parse_alpha("0.05/0").is_err());
        assert!(parse_alpha("x/3").is_err());
    }

    #[test]
    fn json_raw_record_accepts_numbers() {
        let raw: RawRecord = serde_json::from_str(
            r#"{"id":7,"x_mean":10.5,"x_sd":2,"x_n":5,"y_mean":"12","y_sd":2,"y_n":5,"alpha_dm":"0.05/2"}"#,
        )
        .unwrap();
        let rec = raw.into_record(1).unwrap();
        assert_eq!(rec.id, 7);
        assert_eq!(rec.control.mean, 10.5);
        assert_eq!(rec.alpha_dm, 0.025);
    }

    #[test]
    fn tpc_has_mixed_units() {
        let ds = bundled_dataset("tpc").unwrap();
        let warnings = validate_dataset(&ds);
        let units = warnings
            .iter()
            .find_map(|w| match w {
                Warning::MixedUnits { units } => Some(units.clone()),
                _ => None,
            })
            .expect("mixed-units warning");
        assert!(units.contains(&"mg/dl".to_string()));
        assert!(units.contains(&"mmol/L".to_string()));
    }

    #[test]
    fn instability_warning() {
        let ds = one_row("1,A,2000,c,10,8,3,e,12,2,5,mg,0.05,ms,1,T1,0").unwrap();
        assert_eq!(
            validate_dataset(&ds),
            vec![Warning::UnstableControl {
                id: 1,
                mean: 10.0,
                sd: 8.0
            }]
        );
    }

    #[test]
    fn clean_dataset_has_no_warnings() {
        let ds = one_row("1,A,2000,c,100,8,3,e,12,2,5,mg,0.05,ms,1,T1,0").unwrap();
        assert!(validate_dataset(&ds).is_empty());
    }

    #[test]
    fn round_trip_bundled() {
        for name in BUNDLED_NAMES {
            let ds = bundled_dataset(name).unwrap();
            let again = parse_csv(name, &serialize_csv(&ds)).unwrap();
            assert_eq!(again.records, ds.records);
        }
    }
}
