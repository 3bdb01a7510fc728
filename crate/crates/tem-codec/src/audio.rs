//! WAV ingestion and trace export.
//!
//! Input clips are mono 16-bit PCM (stereo is downmixed). The payload is
//! low-pass filtered to the target band with a Kaiser-windowed sinc FIR
//! (>= 60 dB stopband), and the continuous evaluator interpolates the
//! filtered grid with a windowed sinc kernel.

use std::path::Path;

use crate::error::{CodecError, Result};
use crate::signal::{sinc, BandlimitedSignal, SampledTrace};

/// Zeroth-order modified Bessel function, by series.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_sq = 0.25 * x * x;
    for k in 1..64 {
        term *= half_sq / ((k * k) as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum
}

/// Kaiser-windowed sinc low-pass taps: cutoff and transition in Hz at `fs`.
fn design_lowpass(fs: f64, cutoff: f64, transition: f64, atten_db: f64) -> Vec<f64> {
    let delta_omega = 2.0 * std::f64::consts::PI * transition / fs;
    let n_taps = (((atten_db - 7.95) / (2.285 * delta_omega)).ceil() as usize) | 1;
    let beta = if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    };
    let mid = (n_taps / 2) as f64;
    let i0b = bessel_i0(beta);
    let fc = cutoff / fs;
    (0..n_taps)
        .map(|i| {
            let n = i as f64 - mid;
            let w = bessel_i0(beta * (1.0 - (n / mid).powi(2)).max(0.0).sqrt()) / i0b;
            2.0 * fc * sinc(2.0 * std::f64::consts::PI * fc * n) * w
        })
        .collect()
}

fn convolve_same(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let half = taps.len() / 2;
    let mut out = vec![0.0; x.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &t) in taps.iter().enumerate() {
            let k = i as isize + j as isize - half as isize;
            if k >= 0 && (k as usize) < x.len() {
                acc += x[k as usize] * t;
            }
        }
        *o = acc;
    }
    out
}

/// Read a PCM WAV file into normalized samples.
pub fn read_wav(path: &Path) -> Result<(f64, Vec<f64>)> {
    let reader = hound::WavReader::open(path)
        .map_err(|e| CodecError::Ingestion(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(CodecError::Ingestion(format!(
            "{}: only 16-bit PCM is supported",
            path.display()
        )));
    }
    let channels = spec.channels as usize;
    let samples: Vec<i16> = reader
        .into_samples::<i16>()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CodecError::Ingestion(format!("{}: {e}", path.display())))?;
    if samples.is_empty() {
        return Err(CodecError::Ingestion(format!("{}: empty payload", path.display())));
    }
    let frames = samples.len() / channels;
    let mono: Vec<f64> = (0..frames)
        .map(|i| {
            let mut acc = 0.0;
            for c in 0..channels {
                acc += samples[i * channels + c] as f64;
            }
            acc / (channels as f64 * 32768.0)
        })
        .collect();
    Ok((spec.sample_rate as f64, mono))
}

/// Ingest an audio clip as a bandlimited signal: normalize, low-pass to
/// `target_omega`, and wrap the filtered grid in a sinc interpolator. The
/// reference for distortion is the filtered signal itself.
pub fn load_audio(path: &Path, target_omega: f64) -> Result<BandlimitedSignal> {
    if !(target_omega > 0.0) {
        return Err(CodecError::Parameter("target omega must be positive".into()));
    }
    let (fs, mono) = read_wav(path)?;
    let f_c = target_omega / (2.0 * std::f64::consts::PI);
    if fs < 16.0 * f_c {
        return Err(CodecError::Ingestion(format!(
            "sample rate {fs} Hz too low for a {f_c} Hz band"
        )));
    }
    let taps = design_lowpass(fs, f_c, 0.5 * f_c, 70.0);
    let filtered = convolve_same(&mono, &taps);
    let duration = (filtered.len() - 1) as f64 / fs;

    // Windowed-sinc interpolation of the filtered grid.
    let grid = filtered.clone();
    let half_kernel = 64usize;
    let kaiser_beta = 8.0;
    let i0b = bessel_i0(kaiser_beta);
    let eval = move |t: f64| {
        let pos = t * fs;
        let center = pos.floor() as isize;
        let mut acc = 0.0;
        for k in (center - half_kernel as isize)..=(center + half_kernel as isize) {
            if k < 0 || k as usize >= grid.len() {
                continue;
            }
            let u = pos - k as f64;
            let frac = (u / half_kernel as f64).clamp(-1.0, 1.0);
            let w = bessel_i0(kaiser_beta * (1.0 - frac * frac).sqrt()) / i0b;
            acc += grid[k as usize] * sinc(std::f64::consts::PI * u) * w;
        }
        acc
    };

    let label = format!("audio:{}", path.display());
    BandlimitedSignal::from_fn(target_omega, duration, &label, eval)
}

/// Write a trace as mono PCM-16 WAV. Amplitudes are clamped to [-1, 1].
pub fn write_wav(path: &Path, trace: &SampledTrace) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: trace.sample_rate.round() as u32,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)
        .map_err(|e| CodecError::Io(std::io::Error::other(e.to_string())))?;
    for &s in &trace.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        writer.write_sample(v).map_err(|e| CodecError::Io(std::io::Error::other(e.to_string())))?;
    }
    writer.finalize().map_err(|e| CodecError::Io(std::io::Error::other(e.to_string())))?;
    Ok(())
}

/// Write a trace as two-column CSV (time, amplitude).
pub fn write_csv_trace(path: &Path, trace: &SampledTrace) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "t,amplitude")?;
    for (i, &s) in trace.samples.iter().enumerate() {
        writeln!(out, "{:.9},{:.9}", trace.time_of(i), s)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::TraceOrigin;
    use std::f64::consts::PI;

    fn write_tone(path: &Path, fs: u32, f: f64, seconds: f64, amp: f64) {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: fs,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        let n = (fs as f64 * seconds) as usize;
        for i in 0..n {
            let t = i as f64 / fs as f64;
            let v = (amp * (2.0 * PI * f * t).sin() * 32767.0).round() as i16;
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
    }

    fn grid_energy(s: &BandlimitedSignal, lo: f64, hi: f64) -> f64 {
        let n = 4000;
        let dt = (hi - lo) / n as f64;
        (0..=n).map(|i| s.evaluate(lo + i as f64 * dt).powi(2) * dt).sum()
    }

    #[test]
    fn silence_measures_zero() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("silence.wav");
        write_tone(&path, 1000, 5.0, 1.0, 0.0);
        let s = load_audio(&path, 2.0 * PI * 10.0).unwrap();
        assert_eq!(s.c_max(), 0.0);
        assert_eq!(s.energy(), 0.0);
    }

    #[test]
    fn passband_tone_survives() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tone5.wav");
        write_tone(&path, 1000, 5.0, 2.0, 0.5);
        let s = load_audio(&path, 2.0 * PI * 10.0).unwrap();
        // Interior energy of the filtered signal matches the input tone
        // within 1%.
        let e = grid_energy(&s, 0.5, 1.5);
        let expected = 0.5 * 0.5f64.powi(2) * 1.0;
        assert!((e - expected).abs() <= 0.01 * expected, "{e} vs {expected}");
    }

    #[test]
    fn stopband_tone_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tone50.wav");
        write_tone(&path, 1000, 50.0, 2.0, 0.5);
        let s = load_audio(&path, 2.0 * PI * 10.0).unwrap();
        let e = grid_energy(&s, 0.5, 1.5);
        let input_energy = 0.5 * 0.5f64.powi(2) * 1.0;
        assert!(e <= 1e-3 * input_energy, "stopband leak {e}");
    }

    #[test]
    fn interpolator_reproduces_grid_points() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tone3.wav");
        write_tone(&path, 1000, 3.0, 1.0, 0.7);
        let s = load_audio(&path, 2.0 * PI * 10.0).unwrap();
        // On-grid evaluation against a rerun of the same filter path.
        let (fs, mono) = read_wav(&path).unwrap();
        let taps = design_lowpass(fs, 10.0, 5.0, 70.0);
        let filtered = convolve_same(&mono, &taps);
        for i in (100..900).step_by(50) {
            let t = i as f64 / fs;
            assert!((s.evaluate(t) - filtered[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_missing_and_empty_files() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_audio(&dir.path().join("nope.wav"), 2.0 * PI * 10.0),
            Err(CodecError::Ingestion(_))
        ));
        let path = dir.path().join("empty.wav");
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 1000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        hound::WavWriter::create(&path, spec).unwrap().finalize().unwrap();
        assert!(matches!(load_audio(&path, 2.0 * PI * 10.0), Err(CodecError::Ingestion(_))));
    }

    #[test]
    fn stereo_downmixes_by_averaging() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stereo.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 1000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for i in 0..1000 {
            let t = i as f64 / 1000.0;
            let v = (0.4 * (2.0 * PI * 4.0 * t).sin() * 32767.0).round() as i16;
            w.write_sample(v).unwrap(); // left
            w.write_sample(0i16).unwrap(); // right
        }
        w.finalize().unwrap();
        let (_, mono) = read_wav(&path).unwrap();
        let peak = mono.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!((peak - 0.2).abs() < 0.01, "downmix peak {peak}");
    }

    #[test]
    fn wav_roundtrip_preserves_samples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.wav");
        let trace = SampledTrace {
            sample_rate: 1000.0,
            samples: (0..500).map(|i| 0.8 * (2.0 * PI * 7.0 * i as f64 / 1000.0).sin()).collect(),
            origin: TraceOrigin::Synthetic,
        };
        write_wav(&path, &trace).unwrap();
        let (fs, back) = read_wav(&path).unwrap();
        assert_eq!(fs, 1000.0);
        assert_eq!(back.len(), trace.samples.len());
        // Write scales by 32767 and read divides by 32768, so allow the
        // half-LSB rounding plus the scale skew.
        for (a, b) in back.iter().zip(&trace.samples) {
            assert!((a - b).abs() < 6e-5);
        }
    }
}
