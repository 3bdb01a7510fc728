//! Regenerates the bundled test clip at assets/testclip.wav.
//!
//! The clip is fully synthetic (CC0): a quasi-stationary mix of sub-10 Hz
//! tones with section-level loudness changes and a pause, plus higher-band
//! texture that the ingestion filter must remove. Everything is seeded, so
//! the output is identical on every run.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tem_codec::audio::write_wav;
use tem_codec::signal::{SampledTrace, TraceOrigin};

const FS: f64 = 8000.0;
const SECONDS: f64 = 1.6;

fn envelope(t: f64) -> f64 {
    // Sections: soft intro, swell, pause, loud finish.
    let mut e = 0.0;
    let bump = |t: f64, center: f64, width: f64, height: f64| {
        let u = (t - center) / width;
        height * (-0.5 * u * u).exp()
    };
    e += bump(t, 0.18, 0.10, 0.55);
    e += bump(t, 0.45, 0.12, 0.85);
    e += bump(t, 1.05, 0.14, 1.0);
    e += bump(t, 1.38, 0.09, 0.7);
    e
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7e3c11);
    let n = (FS * SECONDS) as usize;

    // Low-band voices: a few tones under the 10 Hz edge with fixed phases.
    let voices: Vec<(f64, f64, f64)> = [1.3, 2.7, 4.1, 6.5, 8.3]
        .iter()
        .map(|&f| (f, rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.5..1.0)))
        .collect();

    // High-band texture the low-pass filter must reject.
    let texture: Vec<(f64, f64, f64)> = (0..40)
        .map(|_| {
            (
                rng.gen_range(80.0..800.0),
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(0.2..1.0),
            )
        })
        .collect();

    let mut samples: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / FS;
            let env = envelope(t);
            let lo: f64 =
                voices.iter().map(|&(f, p, a)| a * (2.0 * PI * f * t + p).sin()).sum::<f64>();
            let hi: f64 =
                texture.iter().map(|&(f, p, a)| a * (2.0 * PI * f * t + p).sin()).sum::<f64>();
            env * lo * 0.28 + 0.05 * hi / 40.0f64.sqrt()
        })
        .collect();

    let peak = samples.iter().cloned().fold(0.0f64, |m, v| m.max(v.abs()));
    for s in &mut samples {
        *s *= 0.92 / peak;
    }

    let trace = SampledTrace { sample_rate: FS, samples, origin: TraceOrigin::AudioFile };
    let out = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/testclip.wav");
    write_wav(&out, &trace).expect("write clip");
    println!("wrote {} ({:.2} s at {} Hz)", out.display(), SECONDS, FS);
}
