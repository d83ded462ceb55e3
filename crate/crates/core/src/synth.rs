//! Seeded desk-scale corpus with a known latent mapping between acoustics
//! and contours: a smooth low-dimensional trajectory drives both the
//! articulator shapes (affine) and the acoustic frames (affine + tanh).

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    resolve_intervals, Acquisition, Articulator, Corpus, PhoneInventory, SegmentRow, Sequence, Utterance,
    ARTICULATOR_DIM, CONTOUR_DIM, CONTOUR_FPS, IMAGE_SIZE_PX, N_ARTICULATORS, PIXEL_SPACING_MM,
    POINTS_PER_ARTICULATOR,
};
use crate::error::{Error, Result};
use crate::features::FRAME_DIM;
use crate::metrics::FrameError;
use crate::training::{evaluate_constant, mean_contour_px};

pub const TRUTH_FILE: &str = "truth.json";
/// Shortest run of one phone label, in 10 ms frames.
pub const MIN_DWELL: usize = 3;
const FRAME_MS: f64 = 10.0;
/// Peak displacement scale of the contour loadings, in pixels.
const LOADING_PX: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_acquisitions: usize,
    pub utterances_per_acquisition: usize,
    /// Acoustic frames (10 ms) per utterance; even, so contours at 50 fps
    /// pair up exactly.
    pub frames_per_utterance: usize,
    pub latent_dim: usize,
    pub n_sinusoids: usize,
    /// Standard deviation of the Gaussian noise added to acoustic frames.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_acquisitions: 20,
            utterances_per_acquisition: 10,
            frames_per_utterance: 200,
            latent_dim: 6,
            n_sinusoids: 8,
            noise: 0.05,
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic corpus: {m}")));
        if self.n_acquisitions == 0 || self.utterances_per_acquisition == 0 || self.latent_dim == 0 || self.n_sinusoids == 0 {
            return bad("counts must be positive");
        }
        if self.frames_per_utterance < 40 || self.frames_per_utterance % 2 != 0 {
            return bad("frames_per_utterance must be even and at least 40");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad("noise must be a non-negative number");
        }
        Ok(())
    }
}

/// The generator's fixed mapping, recorded for oracle evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub spec: SynthSpec,
    /// Rest contour in pixels, 800 values.
    pub template: Vec<f64>,
    /// `800 × latent_dim` pixel displacement per unit latent.
    pub loadings: Array2<f64>,
    /// `39 × latent_dim`.
    pub feature_weights: Array2<f64>,
    pub feature_bias: Vec<f64>,
}

pub struct SynthCorpus {
    pub corpus: Corpus,
    pub truth: SynthTruth,
    /// Latent trajectory per utterance at 100 fps, `T × latent_dim`,
    /// indexed like `corpus.acquisitions[a].utterances[u]`.
    pub latents: Vec<Vec<Array2<f64>>>,
}

/// Rest shape of each articulator: an arc `(cx, cy, radius, from, to)` in
/// pixel coordinates, angles in radians (image y grows downwards).
fn template_arc(a: Articulator) -> (f64, f64, f64, f64, f64) {
    match a {
        Articulator::ArytenoidCartilage => (96.0, 112.0, 6.0, -0.5 * PI, 0.5 * PI),
        Articulator::Epiglottis => (84.0, 92.0, 9.0, 0.6 * PI, 1.4 * PI),
        Articulator::LowerLip => (26.0, 84.0, 8.0, -0.5 * PI, 0.5 * PI),
        Articulator::PharyngealWall => (160.0, 80.0, 58.0, 0.85 * PI, 1.15 * PI),
        Articulator::SoftPalateMidline => (76.0, 58.0, 14.0, 1.1 * PI, 1.9 * PI),
        Articulator::Tongue => (64.0, 80.0, 24.0, 1.05 * PI, 1.95 * PI),
        Articulator::UpperLip => (26.0, 60.0, 8.0, -0.5 * PI, 0.5 * PI),
        Articulator::VocalFolds => (96.0, 126.0, 5.0, 0.1 * PI, 0.9 * PI),
    }
}

pub fn template_contour() -> Vec<f64> {
    let mut out = vec![0.0; CONTOUR_DIM];
    let n = POINTS_PER_ARTICULATOR;
    for a in Articulator::ALL {
        let (cx, cy, r, from, to) = template_arc(a);
        let base = a.index() * ARTICULATOR_DIM;
        for i in 0..n {
            let th = from + (to - from) * i as f64 / (n - 1) as f64;
            out[base + i] = (cx + r * th.cos()).clamp(0.0, IMAGE_SIZE_PX as f64);
            out[base + n + i] = (cy + r * th.sin()).clamp(0.0, IMAGE_SIZE_PX as f64);
        }
    }
    out
}

fn build_truth(spec: &SynthSpec) -> SynthTruth {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.latent_dim;
    let n = POINTS_PER_ARTICULATOR;
    // Displacements vary smoothly along each contour: a few cosine modes.
    let mut loadings = Array2::zeros((CONTOUR_DIM, d));
    for a in 0..N_ARTICULATORS {
        for j in 0..d {
            for axis in 0..2 {
                let coeffs: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal) / 3f64.sqrt()).collect();
                for i in 0..n {
                    let u = i as f64 / (n - 1) as f64;
                    let v: f64 = coeffs.iter().enumerate().map(|(k, c)| c * (PI * k as f64 * u).cos()).sum();
                    loadings[[a * ARTICULATOR_DIM + axis * n + i, j]] = LOADING_PX * v;
                }
            }
        }
    }
    let scale = 1.0 / (d as f64).sqrt();
    let feature_weights = Array2::from_shape_fn((FRAME_DIM, d), |_| scale * rng.sample::<f64, _>(StandardNormal));
    let feature_bias = (0..FRAME_DIM).map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal)).collect();
    SynthTruth {
        spec: spec.clone(),
        template: template_contour(),
        loadings,
        feature_weights,
        feature_bias,
    }
}

/// Smooth trajectory in (−1, 1): seeded sinusoids between 0.3 and 6 Hz
/// plus low-pass noise, squashed by tanh.
pub fn latent_trajectory(frames: usize, dim: usize, n_sinusoids: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut z = Array2::zeros((frames, dim));
    for j in 0..dim {
        let waves: Vec<(f64, f64, f64)> = (0..n_sinusoids)
            .map(|_| (rng.random_range(0.2..1.0), rng.random_range(0.3..6.0), rng.random_range(0.0..2.0 * PI)))
            .collect();
        let power: f64 = waves.iter().map(|w| w.0 * w.0 / 2.0).sum();
        // AR(1) at 100 fps with a 0.95 pole: unit variance, ~0.8 Hz corner.
        let rho: f64 = 0.95;
        let mut ar = rng.sample::<f64, _>(StandardNormal);
        for t in 0..frames {
            let secs = t as f64 * FRAME_MS / 1000.0;
            let s: f64 = waves.iter().map(|(a, f, ph)| a * (2.0 * PI * f * secs + ph).sin()).sum();
            if t > 0 {
                ar = rho * ar + (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal);
            }
            z[[t, j]] = (0.8 * (s / power.sqrt() + 0.3 * ar)).tanh();
        }
    }
    z
}

/// Phone label per frame: latent coordinate 0 quantized into the speech
/// bins, with runs shorter than [`MIN_DWELL`] merged into their neighbour.
fn speech_labels(z0: &[f64], n_speech: usize) -> Vec<usize> {
    let mut labels: Vec<usize> = z0
        .iter()
        .map(|&v| (((v + 1.0) / 2.0 * n_speech as f64) as usize).min(n_speech - 1))
        .collect();
    let mut runs: Vec<(usize, usize)> = Vec::new(); // (label, length)
    for &l in &labels {
        match runs.last_mut() {
            Some(r) if r.0 == l => r.1 += 1,
            _ => runs.push((l, 1)),
        }
    }
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (l, len) in runs {
        match merged.last_mut() {
            Some(prev) if len < MIN_DWELL || prev.1 < MIN_DWELL => prev.1 += len,
            _ => merged.push((l, len)),
        }
    }
    labels.clear();
    for (l, len) in merged {
        labels.extend(std::iter::repeat_n(l, len));
    }
    labels
}

/// Frame-level silence layout of an utterance: inter-sentence silence at
/// both ends and between two sentences, and one pause inside the first.
fn segmentation(z0: &[f64], inventory: &PhoneInventory) -> Vec<SegmentRow> {
    let t = z0.len();
    let lead = (t / 20).max(1);
    let gap = (t / 25).max(1);
    let pause = (t / 40).max(1);
    let sentence1_end = lead + (t - 2 * lead - gap) / 2;
    let pause_start = lead + (sentence1_end - lead - pause) / 2;
    let sentence2_start = sentence1_end + gap;
    let sil = inventory.symbol(inventory.silence_index()).expect("silence symbol").to_string();
    let n_speech = inventory.len() - 1;

    // (start, end, label or None for silence, sentence)
    let mut blocks: Vec<(usize, usize, Option<usize>, usize)> = Vec::new();
    let speech = |from: usize, to: usize, sentence: usize, blocks: &mut Vec<_>| {
        let labels = speech_labels(&z0[from..to], n_speech);
        let mut start = from;
        for i in from..to {
            if i + 1 == to || labels[i + 1 - from] != labels[i - from] {
                blocks.push((start, i + 1, Some(labels[i - from]), sentence));
                start = i + 1;
            }
        }
    };
    blocks.push((0, lead, None, 0));
    speech(lead, pause_start, 1, &mut blocks);
    blocks.push((pause_start, pause_start + pause, None, 1));
    speech(pause_start + pause, sentence1_end, 1, &mut blocks);
    blocks.push((sentence1_end, sentence2_start, None, 0));
    speech(sentence2_start, t - lead, 2, &mut blocks);
    blocks.push((t - lead, t, None, 0));

    blocks
        .into_iter()
        .map(|(s, e, label, sentence)| SegmentRow {
            start_ms: s as f64 * FRAME_MS,
            end_ms: e as f64 * FRAME_MS,
            phone: match label {
                Some(l) => inventory.symbol(l).expect("speech symbol").to_string(),
                None => sil.clone(),
            },
            sentence_id: if label.is_some() || sentence != 0 {
                format!("s{sentence}")
            } else {
                "-".to_string()
            },
        })
        .collect()
}

fn utterance_rng(seed: u64, acquisition: usize, utterance: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + (acquisition as u64) * 1_000_003 + utterance as u64);
    rng
}

pub fn generate_corpus(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let truth = build_truth(spec);
    let inventory = PhoneInventory::default();
    let template = Array1::from(truth.template.clone());
    let bias = Array1::from(truth.feature_bias.clone());
    let generated: Vec<Vec<(Utterance, Array2<f64>)>> = (0..spec.n_acquisitions)
        .into_par_iter()
        .map(|a| {
            (0..spec.utterances_per_acquisition)
                .map(|u| {
                    let mut rng = utterance_rng(spec.seed, a, u);
                    let t = spec.frames_per_utterance;
                    let z = latent_trajectory(t, spec.latent_dim, spec.n_sinusoids, &mut rng);
                    let mut features = (z.dot(&truth.feature_weights.t()) + &bias).mapv(f64::tanh);
                    if spec.noise > 0.0 {
                        features.mapv_inplace(|v| v + spec.noise * rng.sample::<f64, _>(StandardNormal));
                    }
                    // Contour frame n sits on acoustic frame 2n.
                    let z_video = z.slice(ndarray::s![..;2, ..]);
                    let contours = z_video.dot(&truth.loadings.t()) + &template;
                    let z0: Vec<f64> = z.column(0).to_vec();
                    let segments = segmentation(&z0, &inventory);
                    let intervals = resolve_intervals(&segments, &inventory)?;
                    let utt = Utterance {
                        id: format!("a{a:03}_u{u:03}"),
                        features,
                        contours,
                        segments,
                        intervals,
                    };
                    Ok((utt, z))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut acquisitions = Vec::with_capacity(spec.n_acquisitions);
    let mut latents = Vec::with_capacity(spec.n_acquisitions);
    for (a, utts) in generated.into_iter().enumerate() {
        let (utterances, zs): (Vec<_>, Vec<_>) = utts.into_iter().unzip();
        acquisitions.push(Acquisition {
            id: format!("a{a:03}"),
            utterances,
        });
        latents.push(zs);
    }
    let corpus = Corpus {
        pixel_spacing_mm: PIXEL_SPACING_MM,
        contour_fps: CONTOUR_FPS,
        inventory,
        acquisitions,
    };
    corpus.validate()?;
    Ok(SynthCorpus { corpus, truth, latents })
}

impl SynthCorpus {
    /// Writes the corpus files and the truth sidecar; returns the manifest path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let manifest = self.corpus.save(dir)?;
        let path = dir.join(TRUTH_FILE);
        let json = serde_json::to_string(&self.truth).expect("truth serializes");
        fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

/// Constant predictor: the training-set mean contour for every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanPredictor {
    pub contour_px: Array1<f64>,
}

pub fn baseline_mean_predictor(train: &[Sequence]) -> Result<MeanPredictor> {
    Ok(MeanPredictor {
        contour_px: mean_contour_px(train)?,
    })
}

impl MeanPredictor {
    pub fn evaluate(&self, test: &[Sequence], pixel_spacing_mm: f64) -> Result<Vec<FrameError>> {
        evaluate_constant(&self.contour_px, test, pixel_spacing_mm)
    }
}

/// Ridge regression `Y ≈ [X 1]·W` with penalty `lambda` on the non-bias
/// weights; returns per-column R² on the fitting data.
pub fn ridge_r2(x: &Array2<f64>, y: &Array2<f64>, lambda: f64) -> Vec<f64> {
    let n = x.nrows();
    let xa = ndarray::concatenate![Axis(1), x.view(), Array2::ones((n, 1)).view()];
    let p = xa.ncols();
    let mut gram = xa.t().dot(&xa);
    for i in 0..p - 1 {
        gram[[i, i]] += lambda;
    }
    let rhs = xa.t().dot(y);
    let w = solve_spd(&gram, &rhs);
    let resid = &xa.dot(&w) - y;
    (0..y.ncols())
        .map(|c| {
            let col = y.column(c);
            let mean = col.mean().unwrap_or(0.0);
            let ss_tot: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
            let ss_res: f64 = resid.column(c).iter().map(|v| v * v).sum();
            1.0 - ss_res / ss_tot
        })
        .collect()
}

/// Cholesky solve of `A X = B` for symmetric positive definite `A`.
fn solve_spd(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[[i, k]] * l[[j, k]]).sum();
            if i == j {
                l[[i, i]] = (a[[i, i]] - s).sqrt();
            } else {
                l[[i, j]] = (a[[i, j]] - s) / l[[j, j]];
            }
        }
    }
    let mut x = b.clone();
    for mut col in x.columns_mut() {
        for i in 0..n {
            let s: f64 = (0..i).map(|k| l[[i, k]] * col[k]).sum();
            col[i] = (col[i] - s) / l[[i, i]];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| l[[k, i]] * col[k]).sum();
            col[i] = (col[i] - s) / l[[i, i]];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{align_utterance, Dataset, PrepareOptions, Prepared};

    fn small(seed: u64, noise: f64) -> SynthSpec {
        SynthSpec {
            n_acquisitions: 4,
            utterances_per_acquisition: 3,
            frames_per_utterance: 80,
            noise,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate_corpus(&small(7, 0.05)).unwrap();
        let b = generate_corpus(&small(7, 0.05)).unwrap();
        assert_eq!(a.corpus, b.corpus);
        let c = generate_corpus(&small(8, 0.05)).unwrap();
        assert_ne!(a.corpus, c.corpus);
    }

    #[test]
    fn schema_and_alignment() {
        let s = generate_corpus(&small(1, 0.05)).unwrap();
        for utt in s.corpus.acquisitions.iter().flat_map(|a| &a.utterances) {
            assert_eq!(utt.features.dim(), (80, 39));
            assert_eq!(utt.contours.dim(), (40, 800));
            let al = align_utterance(utt, &s.corpus.inventory).unwrap();
            assert_eq!(al.inputs.nrows(), al.targets.nrows());
            // Inter-sentence silence dropped, internal pause kept but masked.
            assert!(al.inputs.nrows() < 80);
            assert!(al.eval_mask.iter().any(|m| !m));
        }
        for z in s.latents.iter().flatten() {
            assert!(z.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn labels_respect_dwell() {
        let z0: Vec<f64> = (0..300).map(|t| (t as f64 * 0.05).sin() * 0.9).collect();
        let labels = speech_labels(&z0, 43);
        assert_eq!(labels.len(), 300);
        let mut run = 1;
        for w in labels.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                assert!(run >= MIN_DWELL);
                run = 1;
            }
        }
        assert!(labels.iter().all(|&l| l < 43));
    }

    #[test]
    fn ridge_oracle_recovers_contours_without_noise() {
        let s = generate_corpus(&small(42, 0.0)).unwrap();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for utt in s.corpus.acquisitions.iter().flat_map(|a| &a.utterances) {
            xs.push(utt.features.slice(ndarray::s![..;2, ..]).to_owned());
            ys.push(utt.contours.clone());
        }
        let xv: Vec<_> = xs.iter().map(|m| m.view()).collect();
        let yv: Vec<_> = ys.iter().map(|m| m.view()).collect();
        let x = ndarray::concatenate(Axis(0), &xv).unwrap();
        let y = ndarray::concatenate(Axis(0), &yv).unwrap();
        let r2 = ridge_r2(&x, &y, 1e-6);
        let worst = r2.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(worst > 0.9, "worst per-coordinate R² {worst}");
    }

    #[test]
    fn ridge_solver_exact_on_linear_data() {
        let x = Array2::from_shape_fn((30, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let y = x.dot(&ndarray::arr2(&[[1.0], [-2.0], [0.5]])) + 3.0;
        let r2 = ridge_r2(&x, &y, 0.0);
        assert!((r2[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn baseline_is_zero_on_constant_corpus() {
        let mut s = generate_corpus(&small(3, 0.05)).unwrap();
        let template = Array1::from(template_contour());
        for utt in s.corpus.acquisitions.iter_mut().flat_map(|a| &mut a.utterances) {
            for mut row in utt.contours.rows_mut() {
                row.assign(&template);
            }
        }
        let prepared = Prepared::fit(&s.corpus, PrepareOptions::default()).unwrap();
        let ds = Dataset::build(&s.corpus, &prepared).unwrap();
        let baseline = baseline_mean_predictor(&ds.train).unwrap();
        let errors = baseline.evaluate(ds.test.open(), ds.pixel_spacing_mm).unwrap();
        assert!(errors.iter().all(|e| e.rmse_mm.abs() < 1e-9));
    }

    #[test]
    fn baseline_ignores_feature_noise() {
        let run = |noise| {
            let s = generate_corpus(&small(5, noise)).unwrap();
            let prepared = Prepared::fit(&s.corpus, PrepareOptions::default()).unwrap();
            let ds = Dataset::build(&s.corpus, &prepared).unwrap();
            let b = baseline_mean_predictor(&ds.train).unwrap();
            b.evaluate(ds.test.open(), ds.pixel_spacing_mm).unwrap()
        };
        let quiet = run(0.0);
        let noisy = run(0.5);
        assert_eq!(quiet.len(), noisy.len());
        for (a, b) in quiet.iter().zip(&noisy) {
            assert!((a.rmse_mm - b.rmse_mm).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        for spec in [
            SynthSpec { frames_per_utterance: 81, ..SynthSpec::default() },
            SynthSpec { n_acquisitions: 0, ..SynthSpec::default() },
            SynthSpec { noise: -1.0, ..SynthSpec::default() },
        ] {
            assert!(generate_corpus(&spec).is_err());
        }
    }
}
