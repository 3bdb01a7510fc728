//! Continuous-time integrate-and-fire samplers with fixed and adaptive bias.

pub mod integrator;

use std::f64::consts::PI;

use crate::error::{CodecError, Result};
use crate::params::{CodecParams, Machine};
use crate::signal::BandlimitedSignal;
use crate::stats::Welford;
pub use integrator::{IntegratorGrid, DEFAULT_OVERSAMPLE};

/// One threshold crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiringEvent {
    /// Firing time t_n.
    pub t: f64,
    /// Inter-firing interval T_n = t_n - t_{n-1}.
    pub dt: f64,
    /// Bias in force during the interval.
    pub bias: f64,
    /// Amplitude estimate after this event (zero for fixed-bias machines).
    pub c_hat: f64,
}

/// Output of one encoding pass: exact firing times plus diagnostics.
#[derive(Debug, Clone)]
pub struct FiringSequence {
    pub events: Vec<FiringEvent>,
    pub params: CodecParams,
    pub machine: Machine,
    /// Events whose bias fell below the true windowed amplitude max.
    pub map_failures: u64,
    /// Events where the admissible interval bound reached pi/omega, so the
    /// recovery guarantee did not apply.
    pub recovery_violations: u64,
}

impl FiringSequence {
    pub fn intervals(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|e| e.dt)
    }

    /// Integrals of the input over each inter-firing interval, recovered from
    /// the integrator identity: y_n = kappa*delta - b_n * T_n.
    pub fn measurements(&self) -> Vec<f64> {
        let kd = self.params.kd();
        self.events.iter().map(|e| kd - e.bias * e.dt).collect()
    }
}

/// Online max-amplitude estimator state. The running deviation feeds the
/// prediction margin; the windowed statistics refresh every `m_var` events
/// and drive the bias grid and segment plans.
#[derive(Debug, Clone)]
pub struct MapState {
    c_hat: f64,
    window: std::collections::VecDeque<f64>,
    w_len: usize,
    run: Welford,
    epoch_z: Welford,
    epoch_c: Welford,
    sigma_c: f64,
    mean_c: f64,
    n_events: u64,
    m_var: u32,
}

impl MapState {
    pub fn new(c0: f64, sigma0: f64, mean0: f64, m_var: u32, w_len: u32) -> Self {
        MapState {
            c_hat: c0,
            window: std::collections::VecDeque::with_capacity(w_len.max(1) as usize),
            w_len: w_len.max(1) as usize,
            run: Welford::new(),
            epoch_z: Welford::new(),
            epoch_c: Welford::new(),
            sigma_c: sigma0,
            mean_c: mean0,
            n_events: 0,
            m_var,
        }
    }

    pub fn c_hat(&self) -> f64 {
        self.c_hat
    }

    /// Running standard deviation of the estimate series.
    pub fn s_n(&self) -> f64 {
        self.run.std_dev()
    }

    /// Windowed spread of the raw amplitude measurements. Loud, variable
    /// input widens it, which coarsens the bias grid and shrinks the bias
    /// code; near-constant input tightens it.
    pub fn sigma_c(&self) -> f64 {
        self.sigma_c
    }

    /// Windowed mean of the amplitude estimate.
    pub fn mean_c(&self) -> f64 {
        self.mean_c
    }

    pub fn events_seen(&self) -> u64 {
        self.n_events
    }

    /// Fill the window-max buffer, as if the recent history sat at `value`.
    /// Keeps the conservative start in force until real measurements
    /// displace it, instead of evaporating after one filter step.
    pub fn seed_window(&mut self, value: f64) {
        self.window.clear();
        for _ in 0..self.w_len {
            self.window.push_back(value);
        }
    }

    /// True when the last `update` crossed a window boundary, i.e. the
    /// windowed statistics were just refreshed.
    pub fn at_window_boundary(&self) -> bool {
        self.n_events > 0 && self.n_events % self.m_var as u64 == 0
    }

    /// Fold in one amplitude measurement z_n and return the predicted next
    /// amplitude c_hat + alpha2 * s_n. The estimate targets the max absolute
    /// amplitude over the last `w_len` triggers, so the signed per-interval
    /// mean enters by magnitude and through a running window max; feeding the
    /// raw mean instead lets the bias collapse in every negative excursion
    /// and the converter saturates.
    pub fn update(&mut self, z: f64, alpha1: f64, alpha2: f64) -> f64 {
        if self.window.len() == self.w_len {
            self.window.pop_front();
        }
        self.window.push_back(z.abs());
        let m = self.window.iter().cloned().fold(0.0f64, f64::max);
        self.c_hat = alpha1 * m + (1.0 - alpha1) * self.c_hat;
        self.run.add(self.c_hat);
        self.epoch_z.add(z.abs());
        self.epoch_c.add(self.c_hat);
        self.n_events += 1;
        if self.n_events % self.m_var as u64 == 0 {
            self.sigma_c = self.epoch_z.std_dev();
            self.mean_c = self.epoch_c.mean();
            self.epoch_z.reset();
            self.epoch_c.reset();
        }
        self.c_hat + alpha2 * self.s_n()
    }
}

/// Decode a bias code back to its grid level, saturating at the clamp.
pub fn bias_from_code(code: u32, grid_step: f64, b_min: f64, b_max: f64) -> f64 {
    (b_min + code as f64 * grid_step).min(b_max)
}

/// Round a raw bias up to the next grid level {b_min + k*step}, clamped to
/// b_max. Rounding up preserves the intent that the bias dominate the local
/// amplitude. Returns the quantized bias and its code.
pub fn quantize_bias(b_raw: f64, grid_step: f64, b_min: f64, b_max: f64) -> (f64, u32) {
    let step = if grid_step > 0.0 { grid_step } else { (b_max - b_min).max(1e-12) / 1024.0 };
    let kf = ((b_raw - b_min) / step).max(0.0);
    let mut k = (kf - 1e-9).ceil().max(0.0) as u32;
    let k_clamp = (((b_max - b_min) / step) - 1e-9).ceil().max(0.0) as u32;
    if k > k_clamp {
        k = k_clamp;
    }
    (bias_from_code(k, step, b_min, b_max), k)
}

/// Grid step for the fixed-width bias quantizer: 2^r_b levels spanning
/// [b_min, b_max] inclusive.
pub fn fixed_bias_step(params: &CodecParams) -> f64 {
    (params.b_max - params.b_min) / ((1u64 << params.r_b_aif) - 1) as f64
}

fn firing_tolerance(params: &CodecParams, bias: f64, c_max: f64) -> f64 {
    1e-3 * params.kd() / (bias + c_max)
}

/// Post-hoc checks against the true signal: the windowed amplitude max over
/// the previous `w_map` trigger times must stay below the bias, and the
/// admissible interval bound must stay below pi/omega.
pub(crate) fn attach_diagnostics(
    mut seq: FiringSequence,
    grid: &IntegratorGrid,
    omega: f64,
) -> FiringSequence {
    let (map_failures, recovery_violations) =
        scan_diagnostics(grid, &seq.events, &seq.params, omega);
    seq.map_failures = map_failures;
    seq.recovery_violations = recovery_violations;
    seq
}

fn scan_diagnostics(
    grid: &IntegratorGrid,
    events: &[FiringEvent],
    params: &CodecParams,
    omega: f64,
) -> (u64, u64) {
    let w = params.w_map as usize;
    let kd = params.kd();
    let mut map_failures = 0;
    let mut recovery_violations = 0;
    for (n, e) in events.iter().enumerate() {
        let lo = if n >= w { events[n - w].t } else { 0.0 };
        let c_n = grid.max_abs_in(lo, e.t);
        if e.bias < c_n {
            map_failures += 1;
        }
        let unbounded = e.bias <= c_n;
        if unbounded || kd / (e.bias - c_n) >= PI / omega {
            recovery_violations += 1;
        }
    }
    (map_failures, recovery_violations)
}

/// Run the fixed-bias sampler over the signal window. Requires
/// b_if > c_max so the integrator output strictly increases.
pub fn encode_fixed(signal: &BandlimitedSignal, params: &CodecParams, machine: Machine) -> Result<FiringSequence> {
    if machine.is_adaptive() {
        return Err(CodecError::Parameter(format!("{machine} is not a fixed-bias machine")));
    }
    params.validate(signal.c_max())?;
    let grid = IntegratorGrid::new(signal, DEFAULT_OVERSAMPLE);
    let kd = params.kd();
    let bias = params.b_if;
    let tol = firing_tolerance(params, bias, signal.c_max());

    let mut events = Vec::new();
    let mut t_prev = 0.0;
    while let Some(t) = grid.next_firing(t_prev, bias, kd, tol) {
        events.push(FiringEvent { t, dt: t - t_prev, bias, c_hat: 0.0 });
        t_prev = t;
    }
    let (map_failures, recovery_violations) = scan_diagnostics(&grid, &events, params, signal.omega());
    Ok(FiringSequence { events, params: params.clone(), machine, map_failures, recovery_violations })
}

/// Initial amplitude estimate and windowed statistics. The estimator starts
/// at the amplitude bound so the first bias is conservative; the windowed
/// spread starts at a quarter of the bound until real statistics arrive.
pub fn initial_map_state(c_max: f64, params_m_var: u32, w_map: u32) -> MapState {
    let mut map = MapState::new(c_max, c_max / 4.0, c_max / 2.0, params_m_var, w_map);
    map.seed_window(c_max);
    map
}

/// First bias applied by the adaptive machines, before quantization.
pub fn initial_bias_raw(params: &CodecParams, c_max: f64) -> f64 {
    (c_max + params.beta).min(params.b_max)
}

/// Run the adaptive-bias sampler. The amplitude measurement per event is
/// z_n = -b_n + kappa*delta / T_n; state updates use the quantized bias so a
/// mirroring decoder stays in lockstep. This path feeds exact intervals back
/// into the estimator; the stream codec replays the same loop with
/// quantized intervals.
pub fn encode_adaptive(
    signal: &BandlimitedSignal,
    params: &CodecParams,
    machine: Machine,
) -> Result<FiringSequence> {
    if !machine.is_adaptive() {
        return Err(CodecError::Parameter(format!("{machine} is not an adaptive machine")));
    }
    params.validate(signal.c_max())?;
    let grid = IntegratorGrid::new(signal, DEFAULT_OVERSAMPLE);
    let kd = params.kd();
    let c_max = signal.c_max();

    let mut map = initial_map_state(c_max, params.m_var, params.w_map);
    let fixed_step = fixed_bias_step(params);
    let sigma_floor = c_max / 1024.0;
    let grid_step = |map: &MapState| match machine {
        Machine::Aif => fixed_step,
        _ => map.sigma_c().max(sigma_floor),
    };

    let (mut bias, _) = quantize_bias(initial_bias_raw(params, c_max), grid_step(&map), params.b_min, params.b_max);
    let mut events = Vec::new();
    let mut t_prev = 0.0;
    loop {
        let tol = firing_tolerance(params, bias, c_max);
        let Some(t) = grid.next_firing(t_prev, bias, kd, tol) else { break };
        let dt = t - t_prev;
        let z = -bias + kd / dt;
        let predicted = map.update(z, params.alpha1, params.alpha2);
        events.push(FiringEvent { t, dt, bias, c_hat: map.c_hat() });
        let (b_q, _) = quantize_bias(predicted + params.beta, grid_step(&map), params.b_min, params.b_max);
        bias = b_q;
        t_prev = t;
    }
    let (map_failures, recovery_violations) = scan_diagnostics(&grid, &events, params, signal.omega());
    Ok(FiringSequence { events, params: params.clone(), machine, map_failures, recovery_violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::synth_sinc_signal;
    use approx::assert_abs_diff_eq;

    const OMEGA: f64 = 2.0 * PI * 10.0;

    fn zero_signal(duration: f64) -> BandlimitedSignal {
        BandlimitedSignal::from_fn(OMEGA, duration, "zero", |_| 0.0).unwrap()
    }

    #[test]
    fn zero_signal_fires_uniformly() {
        let params = CodecParams::default();
        let s = zero_signal(0.1);
        let seq = encode_fixed(&s, &params, Machine::If).unwrap();
        let expected = params.kd() / params.b_if; // 1.0958e-3 s
        assert_abs_diff_eq!(expected, 1.0958e-3, epsilon = 1e-7);
        assert_eq!(seq.events.len(), 91);
        for e in &seq.events {
            assert_abs_diff_eq!(e.dt, expected, epsilon = 2e-6);
        }
    }

    #[test]
    fn intervals_respect_firing_bounds() {
        let params = CodecParams::default();
        let s = synth_sinc_signal(OMEGA, 2, None, 0.5, 11).unwrap();
        let seq = encode_fixed(&s, &params, Machine::If).unwrap();
        let lo = params.kd() / (params.b_if + s.c_max());
        let hi = params.kd() / (params.b_if - s.c_max());
        assert!(!seq.events.is_empty());
        for e in &seq.events {
            assert!(e.dt >= lo - 1e-9 && e.dt <= hi + 1e-9, "T_n {} outside [{lo}, {hi}]", e.dt);
        }
        assert_eq!(seq.map_failures, 0);
        assert_eq!(seq.recovery_violations, 0);
    }

    #[test]
    fn paper_parameter_bounds_match_hand_values() {
        let params = CodecParams::default();
        let lo = params.kd() / (params.b_if + 1.0);
        let hi = params.kd() / (params.b_if - 1.0);
        assert_abs_diff_eq!(lo, 8.477e-4, epsilon = 1e-6);
        assert_abs_diff_eq!(hi, 1.5493e-3, epsilon = 1e-6);
    }

    #[test]
    fn map_update_hand_example() {
        let params = CodecParams::default();
        let mut map = MapState::new(0.5, 0.0, 0.0, params.m_var, params.w_map);
        // T_n = kd / b_n with b_n = 1 gives z_n = 0.
        let z = -1.0 + params.kd() / (params.kd() / 1.0);
        assert_abs_diff_eq!(z, 0.0, epsilon = 1e-15);
        map.update(z, 0.98, 0.6);
        assert_abs_diff_eq!(map.c_hat(), 0.01, epsilon = 1e-12);
    }

    #[test]
    fn map_converges_on_constant_input() {
        let c = 0.35;
        let s = BandlimitedSignal::from_fn(OMEGA, 2.0, "const", move |_| c).unwrap();
        let params = CodecParams::default();
        let seq = encode_adaptive(&s, &params, Machine::Acif).unwrap();
        assert!(seq.events.len() > 200, "only {} events", seq.events.len());
        let tail = &seq.events[200..];
        for e in tail {
            assert!((e.c_hat - c).abs() < 0.05, "c_hat {} far from {c}", e.c_hat);
        }
    }

    #[test]
    fn bias_clamps_at_b_max() {
        let (b, _) = quantize_bias(9.0, 0.25, 1.0, 3.4166);
        assert_eq!(b, 3.4166);
    }

    #[test]
    fn quantize_bias_hand_grid() {
        let (b, code) = quantize_bias(1.07, 0.2, 0.5, 10.0);
        assert_abs_diff_eq!(b, 1.1, epsilon = 1e-12);
        assert_eq!(code, 3);
    }

    #[test]
    fn quantize_bias_fixed_point_on_grid() {
        let (b, code) = quantize_bias(0.5 + 3.0 * 0.2, 0.2, 0.5, 10.0);
        assert_abs_diff_eq!(b, 1.1, epsilon = 1e-12);
        assert_eq!(code, 3);
    }

    #[test]
    fn measurements_on_zero_signal_vanish() {
        let params = CodecParams::default();
        let s = zero_signal(0.1);
        let seq = encode_fixed(&s, &params, Machine::If).unwrap();
        for y in seq.measurements() {
            assert!(y.abs() < 1e-5, "y = {y}");
        }
    }

    #[test]
    fn measurements_on_constant_signal() {
        let c = 0.4;
        let s = BandlimitedSignal::from_fn(OMEGA, 0.2, "const", move |_| c).unwrap();
        let params = CodecParams::default();
        let seq = encode_fixed(&s, &params, Machine::If).unwrap();
        for e in &seq.events {
            let y = params.kd() - e.bias * e.dt;
            assert_abs_diff_eq!(y, c * e.dt, epsilon = 2e-5);
        }
    }

    #[test]
    fn measurement_sum_matches_quadrature() {
        let s = synth_sinc_signal(OMEGA, 2, None, 0.5, 5).unwrap();
        let params = CodecParams::default();
        let seq = encode_fixed(&s, &params, Machine::If).unwrap();
        let total: f64 = seq.measurements().iter().sum();
        let t_last = seq.events.last().unwrap().t;
        let grid = IntegratorGrid::new(&s, DEFAULT_OVERSAMPLE);
        let oracle = grid.cum_at(t_last);
        assert!((total - oracle).abs() < 1e-4, "{total} vs {oracle}");
    }

    #[test]
    fn adaptive_fires_less_than_fixed() {
        let s = synth_sinc_signal(OMEGA, 2, None, 0.5, 17).unwrap();
        let params = CodecParams::default();
        let fixed = encode_fixed(&s, &params, Machine::If).unwrap();
        let adaptive = encode_adaptive(&s, &params, Machine::Aif).unwrap();
        assert!(adaptive.events.len() < fixed.events.len());
    }

    #[test]
    fn encoding_is_deterministic() {
        let s = synth_sinc_signal(OMEGA, 2, None, 0.5, 23).unwrap();
        let params = CodecParams::default();
        let a = encode_adaptive(&s, &params, Machine::Acif).unwrap();
        let b = encode_adaptive(&s, &params, Machine::Acif).unwrap();
        assert_eq!(a.events.len(), b.events.len());
        for (x, y) in a.events.iter().zip(&b.events) {
            assert_eq!(x.t.to_bits(), y.t.to_bits());
            assert_eq!(x.bias.to_bits(), y.bias.to_bits());
        }
    }

    #[test]
    fn rejects_machine_mismatch() {
        let s = zero_signal(0.1);
        let params = CodecParams::default();
        assert!(encode_fixed(&s, &params, Machine::Aif).is_err());
        assert!(encode_adaptive(&s, &params, Machine::If).is_err());
    }
}
