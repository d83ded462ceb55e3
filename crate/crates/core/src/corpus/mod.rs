//! Corpus schema, frame alignment, silence policy, normalization and splits.

mod align;
mod dataset;
mod io;
mod normalize;
mod schema;
mod silence;
mod split;

use std::path::{Path, PathBuf};

use ndarray::Array2;

pub use align::upsample_contours;
pub use dataset::{
    align_utterance, AlignedUtterance, Dataset, PrepareOptions, Prepared, PreparedRecord, Sequence,
    TestSplit, CONTOUR_HALF_WINDOW, PREPARED_FILE,
};
pub use io::{
    contours_to_csv, contours_to_matrix, matrix_to_contours, read_contours_csv,
    read_segmentation_tsv, resolve_intervals, write_contours_csv, write_segmentation_tsv,
    AcquisitionEntry, Manifest, SegmentRow, UtteranceEntry,
};
pub use normalize::{
    fit_contour_stats_all, fit_contour_stats_local, fit_mfcc_stats, normalize_mfcc,
    NormalizationStats, StatsScope, STD_FLOOR,
};
pub use schema::{
    one_hot, validate_intervals, Articulator, ContourSet, PhoneInterval, PhoneInventory,
    ARTICULATOR_DIM, CONTOUR_DIM, CONTOUR_FPS, IMAGE_SIZE_PX, N_ARTICULATORS, N_PHONES,
    PIXEL_SPACING_MM, POINTS_PER_ARTICULATOR,
};
pub use silence::{
    aligned_frame_center_ms, apply_silence_policy, frame_labels, FrameSelection, SilenceMode,
};
pub use split::{split_by_acquisition, split_sizes, Split};

use crate::error::{Error, Result};
use crate::features::{self, MfccConfig, FRAME_DIM};

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    /// 39-dim acoustic frames at the 10 ms rate.
    pub features: Array2<f64>,
    /// `N × 800` contour coordinates in pixels at 50 fps.
    pub contours: Array2<f64>,
    pub segments: Vec<SegmentRow>,
    pub intervals: Vec<PhoneInterval>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Acquisition {
    pub id: String,
    pub utterances: Vec<Utterance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub pixel_spacing_mm: f64,
    pub contour_fps: u32,
    pub inventory: PhoneInventory,
    pub acquisitions: Vec<Acquisition>,
}

impl Corpus {
    pub fn n_utterances(&self) -> usize {
        self.acquisitions.iter().map(|a| a.utterances.len()).sum()
    }

    /// Schema checks shared by loaded and generated corpora.
    pub fn validate(&self) -> Result<()> {
        if self.contour_fps != CONTOUR_FPS {
            return Err(Error::Config(format!(
                "contour_fps must be {CONTOUR_FPS}, got {}",
                self.contour_fps
            )));
        }
        if !(self.pixel_spacing_mm > 0.0) {
            return Err(Error::Config("pixel_spacing_mm must be positive".into()));
        }
        for utt in self.acquisitions.iter().flat_map(|a| &a.utterances) {
            if utt.features.ncols() != FRAME_DIM {
                return Err(Error::Dimension {
                    context: "acoustic frame",
                    expected: FRAME_DIM,
                    got: utt.features.ncols(),
                });
            }
            if utt.contours.ncols() != CONTOUR_DIM {
                return Err(Error::Dimension {
                    context: "contour frame",
                    expected: CONTOUR_DIM,
                    got: utt.contours.ncols(),
                });
            }
            validate_intervals(&utt.intervals, &self.inventory)?;
        }
        Ok(())
    }

    /// Loads a corpus from its manifest. Utterances given as WAV are run
    /// through the aligned MFCC front end.
    pub fn load(manifest_path: &Path, mfcc: &MfccConfig) -> Result<Corpus> {
        let manifest = Manifest::read(manifest_path)?;
        let root = manifest_path.parent().unwrap_or(Path::new("."));
        let inventory = PhoneInventory::default();
        let mut acquisitions = Vec::with_capacity(manifest.acquisitions.len());
        for acq in &manifest.acquisitions {
            let mut utterances = Vec::with_capacity(acq.utterances.len());
            for entry in &acq.utterances {
                let features = match (&entry.features, &entry.wav) {
                    (Some(f), None) => features::read_features(&root.join(f))?,
                    (None, Some(w)) => {
                        let wav = features::read_wav(&root.join(w))?;
                        features::aligned_acoustic_frames(&wav, mfcc)?
                    }
                    _ => {
                        return Err(Error::format(
                            "manifest",
                            manifest_path,
                            format!("utterance {} needs exactly one of features/wav", entry.id),
                        ))
                    }
                };
                let contours = contours_to_matrix(&read_contours_csv(&root.join(&entry.contours))?);
                let segments = read_segmentation_tsv(&root.join(&entry.segmentation))?;
                let intervals = resolve_intervals(&segments, &inventory)?;
                utterances.push(Utterance {
                    id: entry.id.clone(),
                    features,
                    contours,
                    segments,
                    intervals,
                });
            }
            acquisitions.push(Acquisition {
                id: acq.id.clone(),
                utterances,
            });
        }
        let corpus = Corpus {
            pixel_spacing_mm: manifest.pixel_spacing_mm,
            contour_fps: manifest.contour_fps,
            inventory,
            acquisitions,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    /// Writes features, contours, segmentation and a manifest under `dir`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        for sub in ["features", "contours", "segmentation"] {
            let p = dir.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        let mut manifest = Manifest {
            pixel_spacing_mm: self.pixel_spacing_mm,
            contour_fps: self.contour_fps,
            acquisitions: Vec::new(),
        };
        for acq in &self.acquisitions {
            let mut entry = AcquisitionEntry {
                id: acq.id.clone(),
                utterances: Vec::new(),
            };
            for utt in &acq.utterances {
                let feat = PathBuf::from("features").join(format!("{}.vtf", utt.id));
                let cont = PathBuf::from("contours").join(format!("{}.csv", utt.id));
                let seg = PathBuf::from("segmentation").join(format!("{}.tsv", utt.id));
                features::write_features(&dir.join(&feat), &utt.features)?;
                write_contours_csv(&dir.join(&cont), &matrix_to_contours(&utt.contours)?)?;
                write_segmentation_tsv(&dir.join(&seg), &utt.segments)?;
                entry.utterances.push(UtteranceEntry {
                    id: utt.id.clone(),
                    features: Some(feat),
                    wav: None,
                    contours: cont,
                    segmentation: seg,
                });
            }
            manifest.acquisitions.push(entry);
        }
        let path = dir.join("manifest.toml");
        manifest.write(&path)?;
        Ok(path)
    }
}
