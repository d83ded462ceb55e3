//! On-disk corpus formats.
//!
//! * contours: CSV `frame_index,articulator,point_index,x_px,y_px`
//! * segmentation: TSV `start_ms  end_ms  phone  sentence_id`
//! * manifest: TOML listing acquisitions, utterances and their files

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::schema::{
    validate_intervals, Articulator, ContourSet, PhoneInterval, PhoneInventory, CONTOUR_DIM,
    POINTS_PER_ARTICULATOR,
};
use crate::error::{Error, Result};

pub fn write_contours_csv(path: &Path, frames: &[ContourSet]) -> Result<()> {
    fs::write(path, contours_to_csv(frames)).map_err(|e| Error::io(path, e))
}

pub fn contours_to_csv(frames: &[ContourSet]) -> String {
    let mut out = String::from("frame_index,articulator,point_index,x_px,y_px\n");
    for frame in frames {
        for a in Articulator::ALL {
            for i in 0..POINTS_PER_ARTICULATOR {
                let (x, y) = frame.point(a, i);
                writeln!(out, "{},{},{},{},{}", frame.frame_index, a, i, x, y).unwrap();
            }
        }
    }
    out
}

/// Reads a contour CSV. Every listed frame must carry all 400 points.
pub fn read_contours_csv(path: &Path) -> Result<Vec<ContourSet>> {
    let bad = |m: String| Error::format("contour CSV", path, m);
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut frames: Vec<(usize, Vec<f64>, usize)> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != 5 {
            return Err(bad(format!("row {}: expected 5 columns", line + 2)));
        }
        let num = |i: usize| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| bad(format!("row {}: {e}", line + 2)))
        };
        let frame_index = num(0)? as usize;
        let articulator: Articulator = record[1].parse()?;
        let point = num(2)? as usize;
        if point >= POINTS_PER_ARTICULATOR {
            return Err(bad(format!("row {}: point index {point} out of range", line + 2)));
        }
        if frames.last().map(|f| f.0) != Some(frame_index) {
            if frames.iter().any(|f| f.0 == frame_index) {
                return Err(bad(format!("frame {frame_index} is not contiguous")));
            }
            frames.push((frame_index, vec![f64::NAN; CONTOUR_DIM], 0));
        }
        let (_, values, filled) = frames.last_mut().unwrap();
        let base = articulator.index() * 2 * POINTS_PER_ARTICULATOR;
        if values[base + point].is_nan() {
            *filled += 1;
        }
        values[base + point] = num(3)?;
        values[base + POINTS_PER_ARTICULATOR + point] = num(4)?;
    }
    frames
        .into_iter()
        .map(|(index, values, filled)| {
            if filled != CONTOUR_DIM / 2 {
                return Err(bad(format!("frame {index} has {filled} of 400 points")));
            }
            ContourSet::from_values(index, values)
        })
        .collect()
}

/// Stacks contour frames into an `N × 800` matrix.
pub fn contours_to_matrix(frames: &[ContourSet]) -> Array2<f64> {
    let mut m = Array2::zeros((frames.len(), CONTOUR_DIM));
    for (mut row, frame) in m.rows_mut().into_iter().zip(frames) {
        row.assign(&ndarray::ArrayView1::from(frame.values()));
    }
    m
}

pub fn matrix_to_contours(m: &Array2<f64>) -> Result<Vec<ContourSet>> {
    m.rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| ContourSet::from_values(i, row.to_vec()))
        .collect()
}

/// One row of a segmentation file before sentence-boundary resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRow {
    pub start_ms: f64,
    pub end_ms: f64,
    pub phone: String,
    pub sentence_id: String,
}

pub fn write_segmentation_tsv(path: &Path, rows: &[SegmentRow]) -> Result<()> {
    let mut out = String::from("start_ms\tend_ms\tphone\tsentence_id\n");
    for r in rows {
        writeln!(out, "{}\t{}\t{}\t{}", r.start_ms, r.end_ms, r.phone, r.sentence_id).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_segmentation_tsv(path: &Path) -> Result<Vec<SegmentRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || (n == 0 && line.starts_with("start_ms")) {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::format(
                "segmentation TSV",
                path,
                format!("line {}: expected 4 tab-separated columns", n + 1),
            ));
        }
        let num = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| {
                Error::format("segmentation TSV", path, format!("line {}: {e}", n + 1))
            })
        };
        rows.push(SegmentRow {
            start_ms: num(cols[0])?,
            end_ms: num(cols[1])?,
            phone: cols[2].trim().to_string(),
            sentence_id: cols[3].trim().to_string(),
        });
    }
    Ok(rows)
}

/// Resolves symbols and marks silences that sit between two phones of the
/// same sentence as sentence-internal. Leading, trailing and
/// between-sentence silences are not.
pub fn resolve_intervals(rows: &[SegmentRow], inventory: &PhoneInventory) -> Result<Vec<PhoneInterval>> {
    let symbols = rows
        .iter()
        .map(|r| inventory.index_of(&r.phone))
        .collect::<Result<Vec<_>>>()?;
    let silence = inventory.silence_index();
    let speech_sentence = |i: usize| (symbols[i] != silence).then(|| rows[i].sentence_id.as_str());
    let intervals: Vec<PhoneInterval> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let internal = symbols[i] == silence && {
                let before = (0..i).rev().find_map(speech_sentence);
                let after = (i + 1..rows.len()).find_map(speech_sentence);
                matches!((before, after), (Some(b), Some(a)) if a == b)
            };
            PhoneInterval {
                start_ms: r.start_ms,
                end_ms: r.end_ms,
                symbol: symbols[i],
                sentence_internal: internal,
            }
        })
        .collect();
    validate_intervals(&intervals, inventory)?;
    Ok(intervals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub pixel_spacing_mm: f64,
    pub contour_fps: u32,
    #[serde(default)]
    pub acquisitions: Vec<AcquisitionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionEntry {
    pub id: String,
    #[serde(default)]
    pub utterances: Vec<UtteranceEntry>,
}

/// Paths are relative to the manifest's directory. Exactly one of
/// `features` (a `VTF1` file) or `wav` must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wav: Option<PathBuf>,
    pub contours: PathBuf,
    pub segmentation: PathBuf,
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format("manifest", path, e))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::format("manifest", path, e))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(start: f64, end: f64, phone: &str, sentence: &str) -> SegmentRow {
        SegmentRow {
            start_ms: start,
            end_ms: end,
            phone: phone.into(),
            sentence_id: sentence.into(),
        }
    }

    #[test]
    fn silence_classification() {
        let inv = PhoneInventory::default();
        let rows = vec![
            seg(0.0, 50.0, "sil", "s1"),
            seg(50.0, 100.0, "a", "s1"),
            seg(100.0, 130.0, "sil", "s1"),
            seg(130.0, 200.0, "t", "s1"),
            seg(200.0, 260.0, "sil", "-"),
            seg(260.0, 300.0, "i", "s2"),
            seg(300.0, 350.0, "sil", "s2"),
        ];
        let ivs = resolve_intervals(&rows, &inv).unwrap();
        let flags: Vec<bool> = ivs.iter().map(|iv| iv.sentence_internal).collect();
        assert_eq!(flags, vec![false, false, true, false, false, false, false]);
        assert!(resolve_intervals(&[seg(0.0, 1.0, "zz", "s")], &inv).is_err());
    }

    #[test]
    fn contour_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let frames: Vec<ContourSet> = (0..3)
            .map(|f| {
                ContourSet::from_values(f, (0..CONTOUR_DIM).map(|i| (i * 3 + f) as f64 * 0.125).collect())
                    .unwrap()
            })
            .collect();
        write_contours_csv(&path, &frames).unwrap();
        assert_eq!(read_contours_csv(&path).unwrap(), frames);
    }

    #[test]
    fn incomplete_frame_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        fs::write(&path, "frame_index,articulator,point_index,x_px,y_px\n0,tongue,0,1.0,2.0\n").unwrap();
        assert!(read_contours_csv(&path).is_err());
    }

    #[test]
    fn segmentation_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tsv");
        let rows = vec![seg(0.0, 12.5, "sil", "-"), seg(12.5, 40.0, "a~", "s1")];
        write_segmentation_tsv(&path, &rows).unwrap();
        assert_eq!(read_segmentation_tsv(&path).unwrap(), rows);
    }

    #[test]
    fn manifest_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.toml");
        let m = Manifest {
            pixel_spacing_mm: 1.62,
            contour_fps: 50,
            acquisitions: vec![AcquisitionEntry {
                id: "a0".into(),
                utterances: vec![UtteranceEntry {
                    id: "a0_u0".into(),
                    features: Some("f.vtf".into()),
                    wav: None,
                    contours: "c.csv".into(),
                    segmentation: "s.tsv".into(),
                }],
            }],
        };
        m.write(&path).unwrap();
        assert_eq!(Manifest::read(&path).unwrap(), m);
    }
}
