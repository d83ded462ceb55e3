use std::f64::consts::PI;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The only sample rate the front end accepts.
pub const SAMPLE_RATE: u32 = 16_000;

/// Mono PCM16 audio at 16 kHz.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Waveform {
    samples: Vec<i16>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<i16>, sample_rate: u32) -> Result<Self> {
        if sample_rate != SAMPLE_RATE {
            return Err(Error::UnsupportedRate(sample_rate));
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[i16] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends `count` zero samples.
    pub fn padded(&self, count: usize) -> Waveform {
        let mut samples = self.samples.clone();
        samples.resize(samples.len() + count, 0);
        Waveform {
            samples,
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfccConfig {
    pub n_coeffs: usize,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub n_mel_filters: usize,
    pub fft_size: usize,
    pub log_floor: f64,
    pub pre_emphasis: f64,
    pub low_hz: f64,
    pub high_hz: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            n_coeffs: 13,
            window_ms: 25.0,
            hop_ms: 10.0,
            n_mel_filters: 26,
            fft_size: 512,
            log_floor: 1e-10,
            pre_emphasis: 0.97,
            low_hz: 0.0,
            high_hz: 8000.0,
        }
    }
}

impl MfccConfig {
    pub fn window_samples(&self) -> usize {
        (self.window_ms * SAMPLE_RATE as f64 / 1000.0).round() as usize
    }

    pub fn hop_samples(&self) -> usize {
        (self.hop_ms * SAMPLE_RATE as f64 / 1000.0).round() as usize
    }

    /// Reads a TOML file of overrides; omitted keys keep their defaults.
    pub fn read(path: &std::path::Path) -> Result<MfccConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: MfccConfig = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_coeffs == 0 || self.n_coeffs > self.n_mel_filters {
            return fail("n_coeffs must be in 1..=n_mel_filters");
        }
        if !(self.hop_ms > 0.0 && self.window_ms > self.hop_ms) {
            return fail("need window_ms > hop_ms > 0");
        }
        if self.log_floor <= 0.0 || !self.log_floor.is_finite() {
            return fail("log_floor must be positive");
        }
        if !(0.0..1.0).contains(&self.pre_emphasis) {
            return fail("pre_emphasis must lie in [0, 1)");
        }
        if self.fft_size < self.window_samples() {
            return fail("fft_size shorter than the analysis window");
        }
        if !(self.low_hz >= 0.0 && self.high_hz > self.low_hz)
            || self.high_hz > SAMPLE_RATE as f64 / 2.0
        {
            return fail("mel band edges must satisfy 0 <= low_hz < high_hz <= 8000");
        }
        Ok(())
    }

    /// Number of frames produced for `len` samples, or `None` when the
    /// signal is shorter than one window.
    pub fn frame_count(&self, len: usize) -> Option<usize> {
        let window = self.window_samples();
        (len >= window).then(|| (len - window) / self.hop_samples() + 1)
    }

    /// Center time of frame `index`, in milliseconds.
    pub fn frame_center_ms(&self, index: usize) -> f64 {
        index as f64 * self.hop_ms + self.window_ms / 2.0
    }
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale, `n_filters × (fft_size/2 + 1)`.
pub fn mel_filterbank(config: &MfccConfig) -> Array2<f64> {
    let n_bins = config.fft_size / 2 + 1;
    let low = hz_to_mel(config.low_hz);
    let high = hz_to_mel(config.high_hz);
    let m = config.n_mel_filters;
    let edges: Vec<f64> = (0..m + 2)
        .map(|i| mel_to_hz(low + (high - low) * i as f64 / (m + 1) as f64))
        .collect();
    let bin_hz = SAMPLE_RATE as f64 / config.fft_size as f64;
    Array2::from_shape_fn((m, n_bins), |(f, k)| {
        let hz = k as f64 * bin_hz;
        let (lo, mid, hi) = (edges[f], edges[f + 1], edges[f + 2]);
        if hz <= lo || hz >= hi {
            0.0
        } else if hz <= mid {
            (hz - lo) / (mid - lo)
        } else {
            (hi - hz) / (hi - mid)
        }
    })
}

/// Orthonormal DCT-II basis, `n_out × n_in`.
fn dct_matrix(n_out: usize, n_in: usize) -> Array2<f64> {
    let n = n_in as f64;
    Array2::from_shape_fn((n_out, n_in), |(k, m)| {
        let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
        scale * (PI * k as f64 * (m as f64 + 0.5) / n).cos()
    })
}

/// Static cepstra, one row of `n_coeffs` per analysis frame.
pub fn extract_mfcc(waveform: &Waveform, config: &MfccConfig) -> Result<Array2<f64>> {
    if waveform.sample_rate() != SAMPLE_RATE {
        return Err(Error::UnsupportedRate(waveform.sample_rate()));
    }
    let signal: Vec<f64> = waveform
        .samples()
        .iter()
        .map(|&s| s as f64 / 32768.0)
        .collect();
    extract_mfcc_f64(&signal, config)
}

/// Same as [`extract_mfcc`] on samples already scaled to floating point.
pub fn extract_mfcc_f64(signal: &[f64], config: &MfccConfig) -> Result<Array2<f64>> {
    config.validate()?;
    let window = config.window_samples();
    let hop = config.hop_samples();
    let n_frames = config
        .frame_count(signal.len())
        .ok_or(Error::InsufficientAudio {
            samples: signal.len(),
            window,
        })?;

    let mut emphasized = Vec::with_capacity(signal.len());
    emphasized.push(signal[0]);
    emphasized.extend(
        signal
            .windows(2)
            .map(|w| w[1] - config.pre_emphasis * w[0]),
    );

    let hamming: Vec<f64> = (0..window)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (window - 1) as f64).cos())
        .collect();
    let filterbank = mel_filterbank(config);
    let dct = dct_matrix(config.n_coeffs, config.n_mel_filters);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(config.fft_size);
    let n_bins = config.fft_size / 2 + 1;

    let mut out = Array2::zeros((n_frames, config.n_coeffs));
    let mut buffer = vec![Complex::new(0.0, 0.0); config.fft_size];
    let mut power = ndarray::Array1::zeros(n_bins);
    for (t, mut row) in out.rows_mut().into_iter().enumerate() {
        let start = t * hop;
        buffer.fill(Complex::new(0.0, 0.0));
        for (slot, (x, w)) in buffer
            .iter_mut()
            .zip(emphasized[start..start + window].iter().zip(&hamming))
        {
            slot.re = x * w;
        }
        fft.process(&mut buffer);
        for (p, c) in power.iter_mut().zip(&buffer[..n_bins]) {
            *p = c.norm_sqr();
        }
        let log_mel = filterbank
            .dot(&power)
            .mapv(|e: f64| e.max(config.log_floor).ln());
        row.assign(&dct.dot(&log_mel));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(len: usize, hz: f64, amp: f64) -> Vec<i16> {
        (0..len)
            .map(|n| (amp * (2.0 * PI * hz * n as f64 / 16000.0).sin()).round() as i16)
            .collect()
    }

    #[test]
    fn one_second_gives_98_frames() {
        let wav = Waveform::new(sine(16_000, 440.0, 3000.0), 16_000).unwrap();
        let mfcc = extract_mfcc(&wav, &MfccConfig::default()).unwrap();
        assert_eq!(mfcc.dim(), (98, 13));
    }

    #[test]
    fn silence_gives_constant_cepstrum() {
        let wav = Waveform::new(vec![0; 16_000], 16_000).unwrap();
        let mfcc = extract_mfcc(&wav, &MfccConfig::default()).unwrap();
        let first = mfcc.row(0).to_owned();
        assert!(first[0].abs() > 1.0);
        for c in first.iter().skip(1) {
            assert!(c.abs() < 1e-9, "{c}");
        }
        for row in mfcc.rows() {
            assert_eq!(row, first);
        }
    }

    #[test]
    fn short_audio_is_rejected() {
        let wav = Waveform::new(vec![0; 399], 16_000).unwrap();
        assert!(matches!(
            extract_mfcc(&wav, &MfccConfig::default()),
            Err(Error::InsufficientAudio { samples: 399, window: 400 })
        ));
        let wav = Waveform::new(vec![0; 400], 16_000).unwrap();
        assert_eq!(extract_mfcc(&wav, &MfccConfig::default()).unwrap().nrows(), 1);
    }

    #[test]
    fn wrong_rate_is_rejected() {
        assert!(matches!(
            Waveform::new(vec![0; 1000], 22_050),
            Err(Error::UnsupportedRate(22_050))
        ));
    }

    #[test]
    fn config_validation() {
        let mut c = MfccConfig::default();
        c.n_coeffs = 30;
        assert!(c.validate().is_err());
        let mut c = MfccConfig::default();
        c.hop_ms = 30.0;
        assert!(c.validate().is_err());
        let mut c = MfccConfig::default();
        c.log_floor = 0.0;
        assert!(c.validate().is_err());
        assert!(MfccConfig::default().validate().is_ok());
    }

    #[test]
    fn filterbank_rows_are_triangles() {
        let fb = mel_filterbank(&MfccConfig::default());
        assert_eq!(fb.dim(), (26, 257));
        for row in fb.rows() {
            let peak = row.iter().cloned().fold(0.0, f64::max);
            assert!(peak > 0.5 && peak <= 1.0);
            assert!(row.iter().all(|&w| w >= 0.0));
        }
    }

    #[test]
    fn integer_gain_only_moves_c0() {
        let config = MfccConfig::default();
        let base = sine(8000, 300.0, 1000.0);
        let a = extract_mfcc(&Waveform::new(base.clone(), 16_000).unwrap(), &config).unwrap();
        let scaled: Vec<i16> = base.iter().map(|s| s * 4).collect();
        let b = extract_mfcc(&Waveform::new(scaled, 16_000).unwrap(), &config).unwrap();
        let shift = 2.0 * 4f64.ln() * (26f64).sqrt();
        for (ra, rb) in a.rows().into_iter().zip(b.rows()) {
            assert!((rb[0] - ra[0] - shift).abs() < 1e-6);
            for k in 1..13 {
                assert!((rb[k] - ra[k]).abs() < 1e-6);
            }
        }
    }
}
