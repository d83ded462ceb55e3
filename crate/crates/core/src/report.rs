//! Comparison tables (articulator rows, RMSE ± std and MEDIAN columns per
//! run) and SVG overlays of predicted against original contours.

use std::fmt::Write as _;

use ndarray::Array1;

use crate::corpus::{Articulator, NormalizationStats, StatsScope, ARTICULATOR_DIM, CONTOUR_DIM, IMAGE_SIZE_PX, N_ARTICULATORS, POINTS_PER_ARTICULATOR};
use crate::error::{Error, Result};
use crate::metrics::{aggregate, compare_runs, rmse_frame_articulator, ErrorSummary, FrameError, TTest};

pub const FOOTNOTE: &str = "* p < 0.05, paired t-test";

/// One evaluated run: a column pair in the table.
#[derive(Debug, Clone, PartialEq)]
pub struct RunErrors {
    pub label: String,
    pub frame_errors: Vec<FrameError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunColumn {
    pub label: String,
    /// Eight articulators, then the mean row.
    pub rows: Vec<ErrorSummary>,
    /// Against the baseline run, same row order; `None` for the baseline
    /// itself or when no baseline was designated.
    pub tests: Option<Vec<TTest>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub columns: Vec<RunColumn>,
    pub baseline: Option<String>,
}

/// Summarizes every run and, with a baseline label, tests the others
/// against it frame by frame.
pub fn build_table(runs: &[RunErrors], baseline: Option<&str>) -> Result<ComparisonTable> {
    if runs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let base = match baseline {
        Some(label) => Some(
            runs.iter()
                .find(|r| r.label == label)
                .ok_or_else(|| Error::MissingBaseline(label.to_string()))?,
        ),
        None => None,
    };
    let columns = runs
        .iter()
        .map(|run| {
            let report = aggregate(&run.frame_errors, "", &run.label)?;
            let mut rows = report.per_articulator.clone();
            rows.push(report.overall);
            let tests = match base {
                Some(b) if b.label != run.label => Some(compare_runs(&run.frame_errors, &b.frame_errors)?),
                _ => None,
            };
            Ok(RunColumn {
                label: run.label.clone(),
                rows,
                tests,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable {
        columns,
        baseline: baseline.map(str::to_string),
    })
}

fn row_names() -> Vec<&'static str> {
    Articulator::ALL
        .iter()
        .map(|a| a.display_name())
        .chain(std::iter::once("Mean"))
        .collect()
}

fn star(col: &RunColumn, row: usize) -> &'static str {
    match &col.tests {
        Some(t) if t[row].significant => "*",
        _ => "",
    }
}

/// Aligned plain-text rendering with two decimals.
pub fn render_text(table: &ComparisonTable) -> String {
    let names = row_names();
    let mut cells: Vec<Vec<String>> = vec![Vec::new(); names.len()];
    for col in &table.columns {
        for (r, s) in col.rows.iter().enumerate() {
            cells[r].push(format!("{:.2}{} ± {:.2}", s.rmse_mean_mm, star(col, r), s.rmse_std_mm));
            cells[r].push(format!("{:.2}", s.median_mm));
        }
    }
    let name_w = names.iter().map(|n| n.chars().count()).max().unwrap_or(0);
    let n_cols = table.columns.len() * 2;
    let mut widths: Vec<usize> = (0..n_cols)
        .map(|c| {
            let header = if c % 2 == 0 { "RMSE" } else { "MEDIAN" };
            cells.iter().map(|row| row[c].chars().count()).chain([header.len()]).max().unwrap()
        })
        .collect();
    // A run label spans its two columns.
    for (i, col) in table.columns.iter().enumerate() {
        let span = widths[2 * i] + 3 + widths[2 * i + 1];
        let label = col.label.chars().count();
        if label > span {
            widths[2 * i] += label - span;
        }
    }
    let pad = |s: &str, w: usize| format!("{}{s}", " ".repeat(w.saturating_sub(s.chars().count())));
    let mut out = String::new();
    let mut line = " ".repeat(name_w);
    for (i, col) in table.columns.iter().enumerate() {
        let span = widths[2 * i] + 3 + widths[2 * i + 1];
        let label = &col.label;
        let left = (span - label.chars().count()) / 2;
        line.push_str(" | ");
        line.push_str(&format!("{}{label}{}", " ".repeat(left), " ".repeat(span - left - label.chars().count())));
    }
    out.push_str(line.trim_end());
    out.push('\n');
    let mut line = " ".repeat(name_w);
    for c in 0..n_cols {
        line.push_str(" | ");
        line.push_str(&pad(if c % 2 == 0 { "RMSE" } else { "MEDIAN" }, widths[c]));
    }
    out.push_str(&line);
    out.push('\n');
    let rule: usize = line.chars().count();
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for (r, name) in names.iter().enumerate() {
        if r == N_ARTICULATORS {
            out.push_str(&"-".repeat(rule));
            out.push('\n');
        }
        let mut line = format!("{name}{}", " ".repeat(name_w - name.chars().count()));
        for (c, cell) in cells[r].iter().enumerate() {
            line.push_str(" | ");
            line.push_str(&pad(cell, widths[c]));
        }
        out.push_str(&line);
        out.push('\n');
    }
    if table.baseline.is_some() {
        writeln!(out, "{FOOTNOTE} (baseline: {})", table.baseline.as_deref().unwrap_or_default()).unwrap();
    }
    out
}

pub const TABLE_CSV_HEADER: &str = "articulator,run,rmse_mean_mm,rmse_std_mm,median_mm,p_value,significant";

pub fn render_csv(table: &ComparisonTable) -> String {
    let mut out = format!("{TABLE_CSV_HEADER}\n");
    let keys: Vec<&str> = Articulator::ALL.iter().map(|a| a.slug()).chain(["mean"]).collect();
    for (r, key) in keys.iter().enumerate() {
        for col in &table.columns {
            let s = &col.rows[r];
            let (p, sig) = match &col.tests {
                Some(t) => (format!("{:.6e}", t[r].p), t[r].significant.to_string()),
                None => (String::new(), String::new()),
            };
            writeln!(
                out,
                "{key},{},{:.6},{:.6},{:.6},{p},{sig}",
                col.label, s.rmse_mean_mm, s.rmse_std_mm, s.median_mm
            )
            .unwrap();
        }
    }
    out
}

/// Plot colors in legend order: arytenoid cartilage, epiglottis, lower lip,
/// vocal folds, soft palate midline, tongue, upper lip, pharyngeal wall.
pub fn articulator_color(a: Articulator) -> &'static str {
    match a {
        Articulator::ArytenoidCartilage => "crimson",
        Articulator::Epiglottis => "darkorange",
        Articulator::LowerLip => "gold",
        Articulator::VocalFolds => "forestgreen",
        Articulator::SoftPalateMidline => "deepskyblue",
        Articulator::Tongue => "mediumblue",
        Articulator::UpperLip => "darkviolet",
        Articulator::PharyngealWall => "saddlebrown",
    }
}

/// Mean over articulators of the per-articulator RMSE between two pixel
/// contours, in millimetres.
pub fn frame_rmse_mm(pred_px: &[f64], truth_px: &[f64], pixel_spacing_mm: f64) -> Result<f64> {
    for len in [pred_px.len(), truth_px.len()] {
        if len != CONTOUR_DIM {
            return Err(Error::ContourLength(len));
        }
    }
    let unit = NormalizationStats {
        mean: Array1::zeros(ARTICULATOR_DIM),
        std: Array1::ones(ARTICULATOR_DIM),
        scope: StatsScope::GlobalMfcc,
    };
    let mut total = 0.0;
    for a in Articulator::ALL {
        total += rmse_frame_articulator(&pred_px[a.range()], &truth_px[a.range()], &unit, pixel_spacing_mm)?;
    }
    Ok(total / N_ARTICULATORS as f64)
}

fn polyline(points: &[f64], color: &str, dashed: bool) -> String {
    let n = POINTS_PER_ARTICULATOR;
    let coords: Vec<String> = (0..n).map(|i| format!("{:.2},{:.2}", points[i], points[n + i])).collect();
    let dash = if dashed { " stroke-dasharray=\"2,1.5\"" } else { "" };
    format!(
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"0.8\"{dash}/>\n",
        coords.join(" ")
    )
}

/// Overlay of one frame: solid original contours, dashed predictions.
pub fn render_overlay_svg(pred_px: &[f64], truth_px: &[f64], frame: usize, pixel_spacing_mm: f64) -> Result<String> {
    let rmse = frame_rmse_mm(pred_px, truth_px, pixel_spacing_mm)?;
    let size = IMAGE_SIZE_PX as usize;
    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 -12 {size} {}\" width=\"{}\" height=\"{}\">",
        size + 12,
        size * 4,
        (size + 12) * 4
    )
    .unwrap();
    writeln!(
        svg,
        "  <text x=\"2\" y=\"-3\" font-family=\"sans-serif\" font-size=\"6\">Frame {frame}: RMSE {rmse:.2} mm</text>"
    )
    .unwrap();
    writeln!(svg, "  <rect x=\"0\" y=\"0\" width=\"{size}\" height=\"{size}\" fill=\"white\" stroke=\"lightgray\"/>").unwrap();
    for a in Articulator::ALL {
        svg.push_str(&polyline(&truth_px[a.range()], articulator_color(a), false));
    }
    for a in Articulator::ALL {
        svg.push_str(&polyline(&pred_px[a.range()], articulator_color(a), true));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
