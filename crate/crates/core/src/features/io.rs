//! WAV input and the `VTF1` feature file format.
//!
//! A feature file is the 4-byte magic `VTF1`, the frame count and the
//! dimension as little-endian `u32`, then the matrix as row-major
//! little-endian `f64`.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::mfcc::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"VTF1";

pub fn read_wav(path: &Path) -> Result<Waveform> {
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::UnsupportedRate(spec.sample_rate));
    }
    if spec.channels != 1
        || spec.bits_per_sample != 16
        || spec.sample_format != hound::SampleFormat::Int
    {
        return Err(Error::UnsupportedFormat(format!(
            "{}: need mono 16-bit PCM, got {} channel(s) at {} bits",
            path.display(),
            spec.channels,
            spec.bits_per_sample
        )));
    }
    let samples = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_error(path, e))?;
    Waveform::new(samples, spec.sample_rate)
}

pub fn write_wav(path: &Path, waveform: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: waveform.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &s in waveform.samples() {
        writer.write_sample(s).map_err(|e| wav_error(path, e))?;
    }
    writer.finalize().map_err(|e| wav_error(path, e))
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::format("WAV", path, other),
    }
}

pub fn encode_features(features: &Array2<f64>) -> Vec<u8> {
    let (rows, cols) = features.dim();
    let mut buf = Vec::with_capacity(12 + rows * cols * 8);
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in features.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_features(bytes: &[u8], path: &Path) -> Result<Array2<f64>> {
    let bad = |m: &str| Error::format("feature file", path, m);
    if bytes.len() < 12 || &bytes[..4] != FEATURE_MAGIC {
        return Err(bad("missing VTF1 header"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != rows * cols * 8 {
        return Err(bad("payload length does not match header"));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Array2::from_shape_vec((rows, cols), values).map_err(|e| bad(&e.to_string()))
}

pub fn write_features(path: &Path, features: &Array2<f64>) -> Result<()> {
    fs::write(path, encode_features(features)).map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_features(&bytes, path)
}

/// CSV view of a feature matrix: `frame,f0,f1,...`.
pub fn write_features_csv(path: &Path, features: &Array2<f64>) -> Result<()> {
    let mut out = String::from("frame");
    for d in 0..features.ncols() {
        out.push_str(&format!(",f{d}"));
    }
    out.push('\n');
    for (t, row) in features.rows().into_iter().enumerate() {
        out.push_str(&t.to_string());
        for v in row {
            out.push(',');
            out.push_str(&format!("{v:e}"));
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn feature_file_roundtrip(rows in 0usize..20, cols in 1usize..50, seed in any::<u64>()) {
            let m = Array2::from_shape_fn((rows, cols), |(r, c)| {
                ((seed ^ (r * 131 + c) as u64) as f64).sin() * 1e3
            });
            let back = decode_features(&encode_features(&m), Path::new("mem")).unwrap();
            prop_assert_eq!(back, m);
        }
    }

    #[test]
    fn header_layout() {
        let m = Array2::from_shape_vec((1, 2), vec![1.0, -2.0]).unwrap();
        let bytes = encode_features(&m);
        assert_eq!(&bytes[..4], b"VTF1");
        assert_eq!(&bytes[4..12], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(bytes.len(), 12 + 16);
        assert!(decode_features(&bytes[..20], Path::new("x")).is_err());
        assert!(decode_features(b"VTF0\0\0\0\0\0\0\0\0", Path::new("x")).is_err());
    }

    #[test]
    fn wav_roundtrip_and_rate_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let wav = Waveform::new((0..500).map(|i| (i * 37 % 2000) as i16 - 1000).collect(), 16_000)
            .unwrap();
        write_wav(&path, &wav).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 44 + 1000);
        assert_eq!(read_wav(&path).unwrap(), wav);

        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let other = dir.path().join("b.wav");
        let mut w = hound::WavWriter::create(&other, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&other), Err(Error::UnsupportedRate(8000))));
    }
}
