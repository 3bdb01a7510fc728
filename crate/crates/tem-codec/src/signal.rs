use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CodecError, Result};

/// Dense measurement grids use at least this many points per Nyquist interval.
pub const GRID_OVERSAMPLE: f64 = 64.0;

/// Safety factor applied to grid-measured amplitude maxima so that strict
/// bias inequalities hold for the true continuous signal.
pub const C_MAX_SAFETY: f64 = 1.01;

/// sin(x)/x with a series expansion near the origin.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// A continuous-time signal bandlimited to `[-omega, omega]` rad/s with a
/// measured amplitude bound and energy. Immutable and shareable.
#[derive(Clone)]
pub struct BandlimitedSignal {
    omega: f64,
    duration: f64,
    c_max: f64,
    energy: f64,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    label: String,
}

impl std::fmt::Debug for BandlimitedSignal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BandlimitedSignal")
            .field("omega", &self.omega)
            .field("duration", &self.duration)
            .field("c_max", &self.c_max)
            .field("energy", &self.energy)
            .field("label", &self.label)
            .finish()
    }
}

impl BandlimitedSignal {
    /// Wrap an arbitrary evaluator; the amplitude bound and energy are
    /// measured by dense sampling over `[0, duration]`.
    pub fn from_fn<F>(omega: f64, duration: f64, label: &str, eval: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(omega > 0.0) {
            return Err(CodecError::Parameter("omega must be positive".into()));
        }
        if !(duration > 0.0) {
            return Err(CodecError::Parameter("duration must be positive".into()));
        }
        let eval: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(eval);
        let (c_max, energy) = measure(&*eval, omega, 0.0, duration);
        Ok(BandlimitedSignal {
            omega,
            duration,
            c_max: c_max * C_MAX_SAFETY,
            energy,
            eval,
            label: label.to_string(),
        })
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Nyquist rate in samples per second for the `2*omega` band.
    pub fn nyquist_rate(&self) -> f64 {
        self.omega / PI
    }

    /// The amplitude bound can never exceed sqrt(E*omega/pi); equality holds
    /// for a single sinc pulse. Checked with 10% slack on the measured values.
    pub fn amplitude_energy_bound_ok(&self) -> bool {
        self.c_max <= 1.10 * (self.energy * self.omega / PI).sqrt()
    }

    pub(crate) fn with_energy(mut self, energy: f64) -> Self {
        self.energy = energy;
        self
    }
}

/// Max magnitude and trapezoid energy of `eval` over `[lo, hi]`, sampled at
/// `GRID_OVERSAMPLE` times the Nyquist rate with a floor of 10^4 points.
fn measure(eval: &(dyn Fn(f64) -> f64 + Send + Sync), omega: f64, lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    let n = ((GRID_OVERSAMPLE * omega / PI * span).ceil() as usize).max(10_000);
    let dt = span / n as f64;
    let mut c_max = 0.0f64;
    let mut energy = 0.0f64;
    let mut prev = eval(lo);
    c_max = c_max.max(prev.abs());
    for i in 1..=n {
        let x = eval(lo + i as f64 * dt);
        c_max = c_max.max(x.abs());
        energy += 0.5 * (prev * prev + x * x) * dt;
        prev = x;
    }
    (c_max, energy)
}

/// Sum of sinc pulses spaced at the Nyquist interval `pi/omega`, with
/// coefficients either supplied or drawn uniformly from [-1, 1] under a
/// seeded generator. This is the synthetic benchmark ensemble.
pub fn synth_sinc_signal(
    omega: f64,
    m_half_terms: u32,
    coeffs: Option<Vec<f64>>,
    duration: f64,
    seed: u64,
) -> Result<BandlimitedSignal> {
    if !(omega > 0.0) {
        return Err(CodecError::Parameter("omega must be positive".into()));
    }
    if !(duration > 0.0) {
        return Err(CodecError::Parameter("duration must be positive".into()));
    }
    let n_terms = 2 * m_half_terms as usize + 1;
    let coeffs = match coeffs {
        Some(c) => {
            if c.len() != n_terms {
                return Err(CodecError::Parameter(format!(
                    "expected {n_terms} coefficients, got {}",
                    c.len()
                )));
            }
            c
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n_terms).map(|_| rng.gen_range(-1.0..=1.0)).collect()
        }
    };

    let spacing = PI / omega;
    let m = m_half_terms as i64;
    let cs = coeffs.clone();
    let eval = move |t: f64| {
        let mut acc = 0.0;
        for (i, &a) in cs.iter().enumerate() {
            let n = i as i64 - m;
            acc += a * sinc(omega * (t - n as f64 * spacing));
        }
        acc
    };

    let label = format!("sinc(seed={seed},m={m_half_terms})");
    let signal = BandlimitedSignal::from_fn(omega, duration, &label, eval)?;

    // The window energy undershoots the line energy of the pulse train, so
    // re-measure over the full support plus decayed tails.
    let lo = -(m as f64) * spacing - 64.0 * spacing;
    let hi = (m as f64) * spacing + 64.0 * spacing;
    let hi = hi.max(duration);
    let (_, full_energy) = measure(&*signal.eval.clone(), omega, lo, hi);
    Ok(signal.with_energy(full_energy))
}

/// Where a discrete trace came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOrigin {
    Synthetic,
    AudioFile,
}

/// A uniformly sampled amplitude record.
#[derive(Debug, Clone)]
pub struct SampledTrace {
    pub sample_rate: f64,
    pub samples: Vec<f64>,
    pub origin: TraceOrigin,
}

impl SampledTrace {
    pub fn duration(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            (self.samples.len() - 1) as f64 / self.sample_rate
        }
    }

    pub fn time_of(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate
    }
}

/// Sample a signal on a uniform grid over its duration.
pub fn sample_on_grid(signal: &BandlimitedSignal, sample_rate: f64) -> SampledTrace {
    let n = (signal.duration() * sample_rate).floor() as usize + 1;
    let samples = (0..n).map(|i| signal.evaluate(i as f64 / sample_rate)).collect();
    SampledTrace { sample_rate, samples, origin: TraceOrigin::Synthetic }
}

/// Distortion in dB between a reference signal and a reconstructed trace:
/// `20*log10(rms of the difference)` over the guarded interior of the window.
/// `edge_guard` is the fraction excluded at each boundary.
pub fn mse_db(x: &BandlimitedSignal, xhat: &SampledTrace, edge_guard: f64) -> Result<f64> {
    if xhat.samples.len() < 2 {
        return Err(CodecError::Parameter("trace must hold at least two samples".into()));
    }
    if !(0.0..0.5).contains(&edge_guard) {
        return Err(CodecError::Parameter("edge guard must lie in [0, 0.5)".into()));
    }
    let t_total = x.duration();
    if xhat.duration() < t_total - 1.0 / xhat.sample_rate - 1e-12 {
        return Err(CodecError::Parameter(format!(
            "trace spans {:.6}s but the signal lasts {:.6}s",
            xhat.duration(),
            t_total
        )));
    }
    let lo = edge_guard * t_total;
    let hi = (1.0 - edge_guard) * t_total;

    let mut acc = 0.0f64;
    let mut span = 0.0f64;
    let dt = 1.0 / xhat.sample_rate;
    let mut prev: Option<f64> = None;
    for (i, &s) in xhat.samples.iter().enumerate() {
        let t = xhat.time_of(i);
        if t < lo || t > hi {
            prev = None;
            continue;
        }
        let e = x.evaluate(t) - s;
        let e2 = e * e;
        if let Some(p) = prev {
            acc += 0.5 * (p + e2) * dt;
            span += dt;
        }
        prev = Some(e2);
    }
    if span <= 0.0 {
        return Err(CodecError::Parameter("guarded interval holds no samples".into()));
    }
    let mean_sq = acc / span;
    if mean_sq <= 1e-20 {
        return Ok(-200.0);
    }
    Ok((10.0 * mean_sq.log10()).max(-200.0))
}
