//! Contra plot rendering: an interval chart aligned row by row with a
//! metadata table, written as a standalone SVG 1.1 document.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::analysis::{ContraEntry, SignView};
use crate::data::{serialize_records, StudyRecord, COLUMNS};
use crate::error::{Error, Result};

/// Fixed layout metrics, in SVG user units.
pub mod style {
    pub const MARGIN: f64 = 16.0;
    pub const HEADER_HEIGHT: f64 = 28.0;
    pub const ROW_HEIGHT: f64 = 20.0;
    pub const PLOT_WIDTH: f64 = 380.0;
    pub const TABLE_GAP: f64 = 16.0;
    pub const AXIS_HEIGHT: f64 = 44.0;
    pub const CHAR_WIDTH: f64 = 6.5;
    pub const CELL_PADDING: f64 = 12.0;
    pub const MIN_COLUMN_WIDTH: f64 = 30.0;
    pub const MAX_COLUMN_CHARS: usize = 28;
    pub const END_TICK: f64 = 4.0;
    pub const MEDIAN_RADIUS: f64 = 3.0;
    pub const PADDING_FRACTION: f64 = 0.05;
    pub const GOLD: &str = "#D4A017";
    pub const INK: &str = "#222222";
}

/// Metadata column shown in the table part of the plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Column {
    Id,
    Study,
    Year,
    GroupX,
    GroupY,
    Units,
    AlphaDm,
    Species,
    Pmid,
    Location,
    ReportedSign,
}

impl Column {
    pub fn header(self) -> &'static str {
        match self {
            Column::Id => "ID",
            Column::Study => "Study",
            Column::Year => "Year",
            Column::GroupX => "Ctrl",
            Column::GroupY => "Tx",
            Column::Units => "Units",
            Column::AlphaDm => "αDM",
            Column::Species => "Sp",
            Column::Pmid => "PMID",
            Column::Location => "Loc",
            Column::ReportedSign => "Sgn",
        }
    }

    pub fn cell(self, r: &StudyRecord) -> String {
        match self {
            Column::Id => r.id.to_string(),
            Column::Study => r.study.clone(),
            Column::Year => r.year.to_string(),
            Column::GroupX => r.group_x_label.clone(),
            Column::GroupY => r.group_y_label.clone(),
            Column::Units => r.units.clone(),
            Column::AlphaDm => r.alpha_text.clone(),
            Column::Species => r.species.clone(),
            Column::Pmid => r.pmid.clone(),
            Column::Location => r.location.clone(),
            Column::ReportedSign => r.reported_sign.to_string(),
        }
    }
}

impl FromStr for Column {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "id" => Column::Id,
            "study" => Column::Study,
            "year" => Column::Year,
            "group_x" => Column::GroupX,
            "group_y" => Column::GroupY,
            "units" => Column::Units,
            "alpha_dm" => Column::AlphaDm,
            "species" => Column::Species,
            "pmid" => Column::Pmid,
            "location" => Column::Location,
            "reported_sign" => Column::ReportedSign,
            other => return Err(Error::InvalidArgument(format!("unknown column `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotOptions {
    pub sign_view: SignView,
    /// Illustrative threshold line; its sign must match the view.
    pub threshold: Option<f64>,
    pub columns: Vec<Column>,
    pub axis_limits: Option<(f64, f64)>,
    /// Decimal places of the Ls% column.
    pub percent_format: usize,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            sign_view: SignView::Decrease,
            threshold: None,
            columns: vec![
                Column::Id,
                Column::Study,
                Column::Species,
                Column::GroupX,
                Column::GroupY,
            ],
            axis_limits: None,
            percent_format: 0,
        }
    }
}

impl PlotOptions {
    pub fn new(sign_view: SignView) -> Self {
        Self {
            sign_view,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(t) = self.threshold {
            let ok = t.is_finite()
                && match self.sign_view {
                    SignView::Decrease => t < 0.0,
                    SignView::Increase => t > 0.0,
                };
            if !ok {
                return Err(Error::Render(format!(
                    "threshold {t} does not match the {} view",
                    self.sign_view
                )));
            }
        }
        if let Some((lo, hi)) = self.axis_limits {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Render(format!("invalid axis limits ({lo}, {hi})")));
            }
        }
        Ok(())
    }
}

/// Affine map from relative difference to horizontal SVG coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct XScale {
    pub min: f64,
    pub max: f64,
    pub left: f64,
    pub width: f64,
}

impl XScale {
    pub fn px(&self, v: f64) -> f64 {
        self.left + (v - self.min) / (self.max - self.min) * self.width
    }
}

/// Union of all intervals, zero and the threshold, padded on both sides.
pub fn default_axis_limits(entries: &[ContraEntry], threshold: Option<f64>) -> (f64, f64) {
    let mut lo: f64 = 0.0;
    let mut hi: f64 = 0.0;
    for e in entries {
        lo = lo.min(e.interval.lo);
        hi = hi.max(e.interval.hi);
    }
    if let Some(t) = threshold {
        lo = lo.min(t);
        hi = hi.max(t);
    }
    let span = hi - lo;
    if span <= 0.0 {
        return (-1.0, 1.0);
    }
    let pad = span * style::PADDING_FRACTION;
    (lo - pad, hi + pad)
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let magnitude = 10f64.powf(raw.log10().floor());
    let norm = raw / magnitude;
    let factor = [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .find(|f| *f >= norm)
        .unwrap_or(10.0);
    factor * magnitude
}

fn fmt_percent(v: f64, decimals: usize) -> String {
    let s = format!("{:.*}", decimals, v * 100.0);
    if s.trim_start_matches('-')
        .chars()
        .all(|c| c == '0' || c == '.')
    {
        "0%".to_string()
    } else {
        format!("{s}%")
    }
}

/// Ls% cell text.
pub fn format_ls(delta_l: f64, decimals: usize) -> String {
    fmt_percent(delta_l, decimals)
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn truncate(text: &str) -> String {
    if text.chars().count() <= style::MAX_COLUMN_CHARS {
        text.to_string()
    } else {
        let mut s: String = text.chars().take(style::MAX_COLUMN_CHARS - 1).collect();
        s.push('…');
        s
    }
}

fn column_width(header: &str, cells: impl Iterator<Item = String>) -> f64 {
    let chars = cells
        .map(|c| truncate(&c).chars().count())
        .chain(std::iter::once(header.chars().count()))
        .max()
        .unwrap_or(0);
    (chars as f64 * style::CHAR_WIDTH + style::CELL_PADDING).max(style::MIN_COLUMN_WIDTH)
}

const CSS: &str = "\
.interval,.interval-end{stroke:#222222;stroke-width:1.5}
.median,.clip-marker{fill:#222222}
.zero-line{stroke:#777777;stroke-width:1}
.threshold{stroke-width:2}
.axis{stroke:#222222;stroke-width:1}
.row-band{fill:#f2f2f2}
text{font-family:Helvetica,Arial,sans-serif;font-size:11px;fill:#222222}
.header text,.axis-label{font-weight:bold}
";

/// Renders entries (already in rank order) as a contra plot.
pub fn render_contra_plot(entries: &[ContraEntry], opts: &PlotOptions) -> Result<String> {
    use style::*;

    if entries.is_empty() {
        return Err(Error::Render("no entries to plot".into()));
    }
    opts.validate()?;

    let (min, max) = opts
        .axis_limits
        .unwrap_or_else(|| default_axis_limits(entries, opts.threshold));
    let scale = XScale {
        min,
        max,
        left: MARGIN,
        width: PLOT_WIDTH,
    };

    let ls_cells: Vec<String> = entries
        .iter()
        .map(|e| format_ls(e.delta_l, opts.percent_format))
        .collect();
    let mut widths = vec![column_width("Ls%", ls_cells.iter().cloned())];
    for col in &opts.columns {
        widths.push(column_width(
            col.header(),
            entries.iter().map(|e| col.cell(&e.record)),
        ));
    }
    let table_left = MARGIN + PLOT_WIDTH + TABLE_GAP;
    let table_width: f64 = widths.iter().sum();

    let rows_top = MARGIN + HEADER_HEIGHT;
    let rows_bottom = rows_top + entries.len() as f64 * ROW_HEIGHT;
    let axis_y = rows_bottom + 4.0;
    let width = table_left + table_width + MARGIN;
    let height = axis_y + AXIS_HEIGHT + MARGIN;
    let row_y = |i: usize| rows_top + (i as f64 + 0.5) * ROW_HEIGHT;

    let mut svg = String::new();
    let w = &mut svg;
    let _ = writeln!(w, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.2}" height="{height:.2}" viewBox="0 0 {width:.2} {height:.2}">"#
    );
    let _ = writeln!(w, "<style type=\"text/css\"><![CDATA[\n{CSS}]]></style>");
    let _ = writeln!(
        w,
        r##"<rect x="0" y="0" width="{width:.2}" height="{height:.2}" fill="#ffffff"/>"##
    );

    // alternating row bands across plot and table
    let _ = writeln!(w, r#"<g class="bands">"#);
    for i in (1..entries.len()).step_by(2) {
        let _ = writeln!(
            w,
            r#"<rect class="row-band" x="{MARGIN:.2}" y="{:.2}" width="{:.2}" height="{ROW_HEIGHT:.2}"/>"#,
            rows_top + i as f64 * ROW_HEIGHT,
            width - 2.0 * MARGIN
        );
    }
    let _ = writeln!(w, "</g>");

    // reference lines
    let zero_x = scale.px(0.0);
    if (min..=max).contains(&0.0) {
        let _ = writeln!(
            w,
            r#"<line class="zero-line" x1="{zero_x:.2}" y1="{rows_top:.2}" x2="{zero_x:.2}" y2="{axis_y:.2}"/>"#
        );
    }
    if let Some(t) = opts.threshold {
        let tx = scale.px(t);
        let _ = writeln!(
            w,
            r#"<line class="threshold" stroke="{GOLD}" data-value="{t}" x1="{tx:.2}" y1="{rows_top:.2}" x2="{tx:.2}" y2="{axis_y:.2}"/>"#
        );
        let _ = writeln!(
            w,
            r#"<text class="threshold-label" x="{tx:.2}" y="{:.2}" text-anchor="middle" fill="{GOLD}">{}</text>"#,
            rows_top - 4.0,
            escape(&fmt_percent(t, 1.max(opts.percent_format)))
        );
    }

    // intervals
    let _ = writeln!(w, r#"<g class="intervals">"#);
    for (i, e) in entries.iter().enumerate() {
        let y = row_y(i);
        let id = e.record.id;
        let (lo, hi) = (e.interval.lo, e.interval.hi);
        let clip_lo = lo < min;
        let clip_hi = hi > max;
        let x1 = scale.px(lo.clamp(min, max));
        let x2 = scale.px(hi.clamp(min, max));
        let _ = writeln!(
            w,
            r#"<line class="interval" data-id="{id}" data-lo="{lo}" data-hi="{hi}" x1="{x1:.2}" y1="{y:.2}" x2="{x2:.2}" y2="{y:.2}"/>"#
        );
        for (x, clipped, dir) in [(x1, clip_lo, -1.0), (x2, clip_hi, 1.0)] {
            if clipped {
                let tip = x + dir * END_TICK;
                let _ = writeln!(
                    w,
                    r#"<path class="clip-marker" data-id="{id}" d="M{x:.2},{:.2} L{tip:.2},{y:.2} L{x:.2},{:.2} Z"/>"#,
                    y - END_TICK,
                    y + END_TICK
                );
            } else {
                let _ = writeln!(
                    w,
                    r#"<line class="interval-end" data-id="{id}" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}"/>"#,
                    y - END_TICK,
                    y + END_TICK
                );
            }
        }
        if (min..=max).contains(&e.median) {
            let _ = writeln!(
                w,
                r#"<circle class="median" data-id="{id}" cx="{:.2}" cy="{y:.2}" r="{MEDIAN_RADIUS:.2}"/>"#,
                scale.px(e.median)
            );
        }
    }
    let _ = writeln!(w, "</g>");

    // x axis
    let _ = writeln!(w, r#"<g class="x-axis">"#);
    let _ = writeln!(
        w,
        r#"<line class="axis" x1="{:.2}" y1="{axis_y:.2}" x2="{:.2}" y2="{axis_y:.2}"/>"#,
        scale.px(min),
        scale.px(max)
    );
    let step = nice_step(max - min);
    let decimals = if step * 100.0 >= 1.0 {
        0
    } else {
        (-(step * 100.0).log10()).ceil() as usize
    };
    let mut k = (min / step).ceil() as i64;
    while (k as f64) * step <= max + step * 1e-9 {
        let v = k as f64 * step;
        let x = scale.px(v);
        let _ = writeln!(
            w,
            r#"<line class="axis" x1="{x:.2}" y1="{axis_y:.2}" x2="{x:.2}" y2="{:.2}"/>"#,
            axis_y + 4.0
        );
        let _ = writeln!(
            w,
            r#"<text class="tick-label" x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            axis_y + 16.0,
            fmt_percent(v, decimals)
        );
        k += 1;
    }
    let _ = writeln!(
        w,
        r#"<text class="axis-label" x="{:.2}" y="{:.2}" text-anchor="middle">Relative difference in means</text>"#,
        MARGIN + PLOT_WIDTH / 2.0,
        axis_y + 34.0
    );
    let _ = writeln!(w, "</g>");

    // metadata table
    let mut headers = vec!["Ls%"];
    headers.extend(opts.columns.iter().map(|c| c.header()));
    let _ = writeln!(w, r#"<g class="header">"#);
    let mut x = table_left;
    for (h, cw) in headers.iter().zip(&widths) {
        let _ = writeln!(
            w,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x + CELL_PADDING / 2.0,
            rows_top - 8.0,
            escape(h)
        );
        x += cw;
    }
    let _ = writeln!(w, "</g>");
    for (i, e) in entries.iter().enumerate() {
        let y = row_y(i) + 4.0;
        let _ = writeln!(
            w,
            r#"<g class="table-row" data-id="{}" data-rank="{}">"#,
            e.record.id, e.rank
        );
        let mut cells = vec![(ls_cells[i].clone(), "ls")];
        cells.extend(
            opts.columns
                .iter()
                .map(|c| (truncate(&c.cell(&e.record)), "cell")),
        );
        let mut x = table_left;
        for ((text, class), cw) in cells.iter().zip(&widths) {
            let _ = writeln!(
                w,
                r#"<text class="{class}" x="{:.2}" y="{y:.2}">{}</text>"#,
                x + CELL_PADDING / 2.0,
                escape(text)
            );
            x += cw;
        }
        let _ = writeln!(w, "</g>");
    }
    let _ = writeln!(w, "</svg>");
    Ok(svg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Html,
}

/// Full study records for the plotted entries, ordered by id, so a plot row can
/// be looked up by its ID column.
pub fn render_supplement_table(entries: &[ContraEntry], format: TableFormat) -> String {
    let mut records: Vec<&StudyRecord> = entries.iter().map(|e| &e.record).collect();
    records.sort_by_key(|r| r.id);
    match format {
        TableFormat::Csv => serialize_records(records.into_iter()),
        TableFormat::Html => {
            let mut out = String::from("<table class=\"supplement\">\n<thead><tr>");
            for c in COLUMNS {
                let _ = write!(out, "<th>{c}</th>");
            }
            out.push_str("</tr></thead>\n<tbody>\n");
            for r in records {
                let cells = [
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
                ];
                let _ = write!(out, "<tr data-id=\"{}\">", r.id);
                for c in cells {
                    let _ = write!(out, "<td>{}</td>", escape(&c));
                }
                out.push_str("</tr>\n");
            }
            out.push_str("</tbody>\n</table>\n");
            out
        }
    }
}
