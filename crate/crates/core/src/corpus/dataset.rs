use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::{concatenate, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::align::upsample_contours;
use super::normalize::{fit_contour_stats_all, fit_mfcc_stats, NormalizationStats};
use super::schema::PhoneInventory;
use super::silence::{apply_silence_policy, frame_labels, SilenceMode};
use super::split::{split_by_acquisition, Split};
use super::{Corpus, Utterance};
use crate::error::{Error, Result};
use crate::features::{build_context_windows, MfccConfig};

/// Recordings on either side of the one being normalized.
pub const CONTOUR_HALF_WINDOW: usize = 50;

/// Acoustic hop of the aligned frame grid.
const HOP_MS: f64 = 10.0;

/// One utterance after contour upsampling and silence removal, unnormalized.
#[derive(Debug, Clone)]
pub struct AlignedUtterance {
    pub inputs: Array2<f64>,
    /// Pixel-space contours paired 1:1 with `inputs`.
    pub targets: Array2<f64>,
    pub labels: Vec<usize>,
    pub eval_mask: Vec<bool>,
    /// Position of each kept frame in the full aligned sequence.
    pub frame_index: Vec<usize>,
}

pub fn align_utterance(utt: &Utterance, inventory: &PhoneInventory) -> Result<AlignedUtterance> {
    let n = utt.features.nrows();
    let contours = upsample_contours(&utt.contours, n)?;
    let selection = apply_silence_policy(n, HOP_MS, &utt.intervals, inventory, SilenceMode::Train)?;
    let labels = frame_labels(n, HOP_MS, &utt.intervals)?;
    Ok(AlignedUtterance {
        inputs: utt.features.select(Axis(0), &selection.kept),
        targets: contours.select(Axis(0), &selection.kept),
        labels: selection.kept.iter().map(|&i| labels[i]).collect(),
        eval_mask: selection.eval_mask,
        frame_index: selection.kept,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepareOptions {
    pub seed: u64,
    /// Context radius applied to the acoustic frames (0 = none, 5 = 11 frames).
    pub context_radius: usize,
    pub half_window: usize,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            seed: 0,
            context_radius: 0,
            half_window: CONTOUR_HALF_WINDOW,
        }
    }
}

/// Everything fitted at the start of a pipeline: the split and the
/// training-set acoustic statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prepared {
    pub options: PrepareOptions,
    pub split: Split,
    pub mfcc_stats: NormalizationStats,
}

impl Prepared {
    pub fn fit(corpus: &Corpus, options: PrepareOptions) -> Result<Prepared> {
        let split = split_by_acquisition(corpus.acquisitions.len(), options.seed)?;
        let mut train_inputs = Vec::new();
        for &a in &split.train {
            for utt in &corpus.acquisitions[a].utterances {
                train_inputs.push(align_utterance(utt, &corpus.inventory)?.inputs);
            }
        }
        let views: Vec<_> = train_inputs.iter().map(|m| m.view()).collect();
        let stacked = concatenate(Axis(0), &views).map_err(|_| Error::EmptySplit("train"))?;
        let mfcc_stats = fit_mfcc_stats(stacked.view())?;
        Ok(Prepared {
            options,
            split,
            mfcc_stats,
        })
    }
}

pub const PREPARED_FILE: &str = "prepared.json";

/// On-disk record of a prepared corpus: where the corpus lives, how its
/// audio is analysed, and the fitted split and statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedRecord {
    pub manifest: PathBuf,
    pub mfcc: MfccConfig,
    pub prepared: Prepared,
}

impl PreparedRecord {
    /// Writes `prepared.json` into `dir` and returns its path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(PREPARED_FILE);
        let json = serde_json::to_string_pretty(self).expect("prepared record serializes");
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    /// Reads a record from a directory or directly from the JSON file.
    pub fn read(path: &Path) -> Result<PreparedRecord> {
        let file = if path.is_dir() { path.join(PREPARED_FILE) } else { path.to_path_buf() };
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format("prepared record", &file, e.to_string()))
    }

    /// Loads the corpus and builds the dataset, optionally overriding the
    /// acoustic context radius.
    pub fn load_dataset(&self, context_radius: Option<usize>) -> Result<Dataset> {
        let corpus = Corpus::load(&self.manifest, &self.mfcc)?;
        let mut prepared = self.prepared.clone();
        if let Some(r) = context_radius {
            prepared.options.context_radius = r;
        }
        Dataset::build(&corpus, &prepared)
    }
}

/// A model-ready utterance: normalized inputs and targets plus everything
/// needed to map predictions back to millimetres.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub id: String,
    pub acquisition: usize,
    pub inputs: Array2<f64>,
    /// Normalized `T × 800` contours.
    pub targets: Array2<f64>,
    pub labels: Vec<usize>,
    pub eval_mask: Vec<bool>,
    pub frame_index: Vec<usize>,
    pub contour_stats: NormalizationStats,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }
}

/// Held-out test sequences. Every read is counted so a pipeline can prove
/// the test set stayed untouched until final evaluation.
#[derive(Debug, Default)]
pub struct TestSplit {
    sequences: Vec<Sequence>,
    reads: AtomicUsize,
}

impl TestSplit {
    pub fn new(sequences: Vec<Sequence>) -> Self {
        TestSplit {
            sequences,
            reads: AtomicUsize::new(0),
        }
    }

    pub fn open(&self) -> &[Sequence] {
        self.reads.fetch_add(1, Ordering::SeqCst);
        &self.sequences
    }

    pub fn reads(&self) -> usize {
        self.reads.load(Ordering::SeqCst)
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

#[derive(Debug)]
pub struct Dataset {
    pub train: Vec<Sequence>,
    pub valid: Vec<Sequence>,
    pub test: TestSplit,
    pub input_dim: usize,
    pub pixel_spacing_mm: f64,
    pub inventory: PhoneInventory,
    pub prepared: Prepared,
}

impl Dataset {
    pub fn build(corpus: &Corpus, prepared: &Prepared) -> Result<Dataset> {
        let build_split = |acqs: &[usize], name: &'static str| -> Result<Vec<Sequence>> {
            let mut aligned = Vec::new();
            for &a in acqs {
                let acq = corpus
                    .acquisitions
                    .get(a)
                    .ok_or_else(|| Error::Config(format!("split refers to acquisition {a}")))?;
                for utt in &acq.utterances {
                    let al = align_utterance(utt, &corpus.inventory)?;
                    if al.inputs.nrows() > 0 {
                        aligned.push((a, utt.id.clone(), al));
                    }
                }
            }
            if aligned.is_empty() {
                return Err(Error::EmptySplit(name));
            }
            let targets: Vec<Array2<f64>> = aligned.iter().map(|(_, _, al)| al.targets.clone()).collect();
            let stats = fit_contour_stats_all(&targets, prepared.options.half_window)?;
            aligned
                .into_iter()
                .zip(stats)
                .map(|((acquisition, id, al), contour_stats)| {
                    let normalized = prepared.mfcc_stats.normalize(&al.inputs)?;
                    let inputs = build_context_windows(&normalized, prepared.options.context_radius)?;
                    Ok(Sequence {
                        id,
                        acquisition,
                        inputs,
                        targets: contour_stats.normalize(&al.targets)?,
                        labels: al.labels,
                        eval_mask: al.eval_mask,
                        frame_index: al.frame_index,
                        contour_stats,
                    })
                })
                .collect()
        };
        let train = build_split(&prepared.split.train, "train")?;
        let valid = build_split(&prepared.split.valid, "valid")?;
        let test = build_split(&prepared.split.test, "test")?;
        Ok(Dataset {
            input_dim: train[0].inputs.ncols(),
            train,
            valid,
            test: TestSplit::new(test),
            pixel_spacing_mm: corpus.pixel_spacing_mm,
            inventory: corpus.inventory.clone(),
            prepared: prepared.clone(),
        })
    }
}
