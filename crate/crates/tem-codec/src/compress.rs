//! Segment planning and the behavioral two-step pulse-shrinking TDC.
//!
//! The coarse shrinking stages partition the interval dynamic range into the
//! compression segments; the fine stages quantize the residual within a
//! segment. Both stage widths follow the segment plan in force.

use crate::error::{CodecError, Result};
use crate::params::{CodecParams, TdcMode};

/// Largest power of two less than or equal to `x`, at least 1.
fn pow2_floor(x: f64) -> u32 {
    if x < 2.0 {
        1
    } else {
        1 << (x.log2().floor() as u32).min(31)
    }
}

/// Compression-segment plan for one refresh window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPlan {
    /// Segment count; a power of two in [2, K/2].
    pub l: u32,
    /// Bits per segment index, log2(l).
    pub eta: u32,
    /// Ratio linking bias levels to segment count.
    pub phi_m: f64,
    /// Bias bits per sample; zero for machines with fixed or absent bias codes.
    pub rho: u32,
    /// Refresh-window ordinal this plan was computed for.
    pub epoch: u64,
}

/// Segment plan from the interval-spread rule: L = ceil(D / (2 sigma)).
pub fn plan_segments_cif(sigma_tn: f64, d_fixed: f64, k: u32) -> SegmentPlan {
    let sigma = sigma_tn.max(d_fixed / 1024.0);
    let l_raw = (d_fixed / (2.0 * sigma)).ceil();
    let l = pow2_floor(l_raw).clamp(2, k / 2);
    SegmentPlan { l, eta: l.ilog2(), phi_m: 1.0, rho: 0, epoch: 0 }
}

/// Segment plan from the amplitude-spread rule:
/// L = min(phi_m * L_b, K/2) with L_b = ceil(c_max / sigma_c) and
/// phi_m = (2 E[c] + beta)^2 / (2 beta (2 c_max + beta)).
/// The bias width follows as rho = max(1, ceil(eta - log2 phi_m)).
pub fn plan_segments_acif(sigma_c: f64, mean_c: f64, c_max: f64, beta: f64, k: u32) -> SegmentPlan {
    let sigma = sigma_c.max(c_max / 1024.0);
    let l_b = (c_max / sigma).ceil();
    let phi_m = (2.0 * mean_c + beta).powi(2) / (2.0 * beta * (2.0 * c_max + beta));
    let l_raw = (phi_m * l_b).min(k as f64 / 2.0);
    let l = pow2_floor(l_raw).clamp(2, k / 2);
    let eta = l.ilog2();
    let rho = (eta as f64 - phi_m.log2()).ceil().max(1.0) as u32;
    SegmentPlan { l, eta, phi_m, rho, epoch: 0 }
}

/// Admissible interval range under bias `b_n` when the bias sits one margin
/// above the estimated amplitude: [kd/(2 b_n - beta), kd/beta].
pub fn adaptive_range(b_n: f64, beta: f64, kappa: f64, delta: f64) -> Result<(f64, f64, f64)> {
    if b_n < beta {
        return Err(CodecError::Parameter(format!("bias {b_n} below margin {beta}")));
    }
    let kd = kappa * delta;
    let dt_min = kd / (2.0 * b_n - beta);
    let dt_max = kd / beta;
    Ok((dt_min, dt_max, dt_max - dt_min))
}

/// Fixed interval range of the constant-bias machines:
/// [kd/(b_if + c_max), kd/(b_if - c_max)].
pub fn fixed_range(params: &CodecParams, c_max: f64) -> (f64, f64, f64) {
    let kd = params.kd();
    let dt_min = kd / (params.b_if + c_max);
    let dt_max = kd / (params.b_if - c_max);
    (dt_min, dt_max, dt_max - dt_min)
}

/// Widest interval range the adaptive machines can produce under the bias
/// clamp, used by the uncompressed adaptive machine's uniform quantizer.
pub fn adaptive_global_range(params: &CodecParams, c_max: f64) -> (f64, f64, f64) {
    let kd = params.kd();
    let dt_min = kd / (params.b_max + c_max);
    let dt_max = kd / params.beta;
    (dt_min, dt_max, dt_max - dt_min)
}

/// Stage configuration of the two-step pulse-shrinking converter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdcConfig {
    /// Coarse stage count (one per compression segment).
    pub f_stages: u32,
    /// Fine stage count.
    pub g_stages: u32,
    /// Coarse shrink per stage (s).
    pub dt1: f64,
    /// Fine shrink per stage (s).
    pub dt2: f64,
    /// Pre-shrink subtracted before measurement; the range minimum.
    pub offset: f64,
    /// Covered span after the offset (s).
    pub d_range: f64,
    /// True when the requested range degenerated and was raised to a floor.
    pub floored: bool,
}

/// Configure the converter for one plan and range. In `FullResolution` mode
/// the fine stages fill every residual code (G = K/L); in `LogStages` mode
/// the stage count equals the residual bit width (G = log2(K/L)).
pub fn tdc_configure(
    plan: &SegmentPlan,
    range: (f64, f64, f64),
    k: u32,
    mode: TdcMode,
) -> TdcConfig {
    let (dt_min, dt_max, d_raw) = range;
    let floor = (dt_max - dt_min).abs().max(dt_max.abs()) * 1e-9 + f64::MIN_POSITIVE;
    let (d_range, floored) = if d_raw > floor { (d_raw, false) } else { (floor, true) };
    let f_stages = plan.l;
    let dt1 = d_range / f_stages as f64;
    let g_stages = match mode {
        TdcMode::FullResolution => k / plan.l,
        TdcMode::LogStages => (k / plan.l).ilog2().max(1),
    };
    let dt2 = dt1 / g_stages as f64;
    TdcConfig { f_stages, g_stages, dt1, dt2, offset: dt_min, d_range, floored }
}

/// Uniform K-cell quantizer over a range, expressed as a single coarse
/// segment with K fine stages.
pub fn tdc_uniform(range: (f64, f64, f64), k: u32) -> TdcConfig {
    let (dt_min, _, d_raw) = range;
    TdcConfig {
        f_stages: 1,
        g_stages: k,
        dt1: d_raw,
        dt2: d_raw / k as f64,
        offset: dt_min,
        d_range: d_raw,
        floored: false,
    }
}

/// One converted interval: coarse count (the segment index), fine count, and
/// the residual quantization error left after both stages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdcReading {
    pub f: u32,
    pub g: u32,
    /// Diagnostic only; zero when the reading saturated.
    pub q_e: f64,
    /// The interval exceeded the covered range and both counters saturated.
    pub overflow: bool,
}

/// Behavioral model of the shrinking cascade: subtract the range offset,
/// count whole coarse widths, then count whole fine widths of the residue.
/// Counter selection is by the same comparisons the reconstruction identity
/// uses, so `offset + f*dt1 + g*dt2 <= T < offset + f*dt1 + (g+1)*dt2` holds
/// exactly for every in-range interval.
pub fn tdc_measure(t_n: f64, cfg: &TdcConfig) -> TdcReading {
    let overflow = t_n - cfg.offset >= cfg.d_range;
    if overflow {
        return TdcReading { f: cfg.f_stages - 1, g: cfg.g_stages - 1, q_e: 0.0, overflow: true };
    }
    let r = (t_n - cfg.offset).max(0.0);

    let mut f = ((r / cfg.dt1) as u32).min(cfg.f_stages - 1);
    while f + 1 < cfg.f_stages && cfg.offset + (f + 1) as f64 * cfg.dt1 <= t_n {
        f += 1;
    }
    while f > 0 && cfg.offset + f as f64 * cfg.dt1 > t_n {
        f -= 1;
    }

    let base = cfg.offset + f as f64 * cfg.dt1;
    let t_res = (t_n - base).max(0.0);
    let mut g = ((t_res / cfg.dt2) as u32).min(cfg.g_stages - 1);
    while g + 1 < cfg.g_stages && base + (g + 1) as f64 * cfg.dt2 <= t_n {
        g += 1;
    }
    while g > 0 && base + g as f64 * cfg.dt2 > t_n {
        g -= 1;
    }

    let q_e = (t_n - (base + g as f64 * cfg.dt2)).max(0.0);
    TdcReading { f, g, q_e, overflow: false }
}

/// Midpoint dequantization of a reading.
pub fn tdc_dequantize(reading: &TdcReading, cfg: &TdcConfig) -> f64 {
    cfg.offset + reading.f as f64 * cfg.dt1 + (reading.g as f64 + 0.5) * cfg.dt2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cif_plan_hand_example() {
        let plan = plan_segments_cif(1e-4, 1e-3, 256);
        assert_eq!(plan.l, 4);
        assert_eq!(plan.eta, 2);
    }

    #[test]
    fn cif_plan_clamps() {
        // Large spread collapses to the minimum of two segments.
        assert_eq!(plan_segments_cif(5e-4, 1e-3, 256).l, 2);
        // Vanishing spread saturates at K/2.
        assert_eq!(plan_segments_cif(0.0, 1e-3, 256).l, 128);
    }

    #[test]
    fn acif_plan_hand_example() {
        let plan = plan_segments_acif(0.2, 0.6, 1.0, 0.5, 256);
        assert_abs_diff_eq!(plan.phi_m, 1.156, epsilon = 1e-12);
        assert_eq!(plan.l, 4);
        assert_eq!(plan.eta, 2);
        assert_eq!(plan.rho, 2);
    }

    #[test]
    fn acif_phi_simplifies_at_full_amplitude() {
        let c_max = 1.0;
        let beta = 0.5;
        let plan = plan_segments_acif(0.1, c_max, c_max, beta, 256);
        assert_abs_diff_eq!(plan.phi_m, (2.0 * c_max + beta) / (2.0 * beta), epsilon = 1e-12);
    }

    #[test]
    fn acif_plan_clamps_low() {
        let plan = plan_segments_acif(100.0, 0.1, 1.0, 0.5, 256);
        assert_eq!(plan.l, 2);
    }

    #[test]
    fn acif_plan_respects_half_k_cap() {
        for k in [16u32, 64, 256, 1024] {
            let plan = plan_segments_acif(1e-6, 1.0, 1.0, 0.5, k);
            assert!(plan.l <= k / 2);
            assert!(plan.eta >= 1);
            assert!(k.ilog2() - plan.eta >= 1);
        }
    }

    #[test]
    fn adaptive_range_hand_values() {
        let (lo, hi, d) = adaptive_range(1.1, 0.5, 0.24, 0.0156).unwrap();
        assert_abs_diff_eq!(lo, 2.2024e-3, epsilon = 1e-6);
        assert_abs_diff_eq!(hi, 7.488e-3, epsilon = 1e-6);
        assert_abs_diff_eq!(d, 5.2856e-3, epsilon = 1e-6);

        let (_, _, d_if) = adaptive_range(3.4166, 0.5, 0.24, 0.0156).unwrap();
        assert_abs_diff_eq!(d_if, 6.8968e-3, epsilon = 1e-6);
    }

    #[test]
    fn adaptive_range_degenerates_at_margin() {
        let (lo, hi, d) = adaptive_range(0.5, 0.5, 0.24, 0.0156).unwrap();
        assert_abs_diff_eq!(lo, hi, epsilon = 1e-15);
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-15);
        assert!(adaptive_range(0.4, 0.5, 0.24, 0.0156).is_err());
    }

    #[test]
    fn configure_hand_values_full_resolution() {
        let plan = SegmentPlan { l: 4, eta: 2, phi_m: 1.0, rho: 1, epoch: 0 };
        let range = (2.2024e-3, 7.488e-3, 5.2856e-3);
        let cfg = tdc_configure(&plan, range, 256, TdcMode::FullResolution);
        assert_eq!(cfg.f_stages, 4);
        assert_eq!(cfg.g_stages, 64);
        assert_abs_diff_eq!(cfg.dt1, 1.3214e-3, epsilon = 1e-7);
        assert_abs_diff_eq!(cfg.dt2, 2.0647e-5, epsilon = 1e-9);
        assert_abs_diff_eq!(cfg.f_stages as f64 * cfg.dt1, cfg.d_range, epsilon = 1e-12 * cfg.d_range);
        assert_abs_diff_eq!(cfg.g_stages as f64 * cfg.dt2, cfg.dt1, epsilon = 1e-12 * cfg.dt1);
    }

    #[test]
    fn configure_hand_values_log_stages() {
        let plan = SegmentPlan { l: 4, eta: 2, phi_m: 1.0, rho: 1, epoch: 0 };
        let range = (2.2024e-3, 7.488e-3, 5.2856e-3);
        let cfg = tdc_configure(&plan, range, 256, TdcMode::LogStages);
        assert_eq!(cfg.g_stages, 6);
        assert_abs_diff_eq!(cfg.dt2, 2.2023e-4, epsilon = 1e-8);
    }

    #[test]
    fn configure_cap_case_leaves_one_residual_bit() {
        let plan = SegmentPlan { l: 128, eta: 7, phi_m: 1.0, rho: 1, epoch: 0 };
        let cfg = tdc_configure(&plan, (0.0, 1.0, 1.0), 256, TdcMode::FullResolution);
        assert_eq!(cfg.g_stages, 2);
    }

    #[test]
    fn configure_floors_degenerate_range() {
        let plan = SegmentPlan { l: 4, eta: 2, phi_m: 1.0, rho: 1, epoch: 0 };
        let cfg = tdc_configure(&plan, (1e-3, 1e-3, 0.0), 256, TdcMode::FullResolution);
        assert!(cfg.floored);
        assert!(cfg.dt2 > 0.0);
    }

    #[test]
    fn measure_stage_by_stage_hand_example() {
        let cfg = TdcConfig {
            f_stages: 4,
            g_stages: 4,
            dt1: 1e-3,
            dt2: 0.25e-3,
            offset: 0.0,
            d_range: 4e-3,
            floored: false,
        };
        let r = tdc_measure(2.6e-3, &cfg);
        assert_eq!(r.f, 2);
        assert_eq!(r.g, 2);
        assert_abs_diff_eq!(r.q_e, 0.1e-3, epsilon = 1e-12);
        assert!(!r.overflow);
    }

    #[test]
    fn measure_at_origin_and_saturation() {
        let cfg = TdcConfig {
            f_stages: 4,
            g_stages: 8,
            dt1: 1e-3,
            dt2: 0.125e-3,
            offset: 2e-3,
            d_range: 4e-3,
            floored: false,
        };
        let origin = tdc_measure(2e-3, &cfg);
        assert_eq!((origin.f, origin.g), (0, 0));
        assert_abs_diff_eq!(origin.q_e, 0.0, epsilon = 1e-15);

        let sat = tdc_measure(6e-3, &cfg);
        assert!(sat.overflow);
        assert_eq!((sat.f, sat.g), (3, 7));
    }

    #[test]
    fn reconstruction_identity_over_swept_range() {
        let plan = SegmentPlan { l: 8, eta: 3, phi_m: 1.0, rho: 1, epoch: 0 };
        let range = (8.477e-4, 1.5493e-3, 7.016e-4);
        let cfg = tdc_configure(&plan, range, 256, TdcMode::FullResolution);
        let n = 10_000;
        for i in 0..n {
            let t = cfg.offset + cfg.d_range * (i as f64 / n as f64) * (1.0 - 1e-12);
            let r = tdc_measure(t, &cfg);
            let lo = cfg.offset + r.f as f64 * cfg.dt1 + r.g as f64 * cfg.dt2;
            let hi = cfg.offset + r.f as f64 * cfg.dt1 + (r.g + 1) as f64 * cfg.dt2;
            assert!(lo <= t && t < hi, "t={t} outside [{lo}, {hi})");
            assert!(r.q_e >= 0.0 && r.q_e < cfg.dt2 + 1e-18);
        }
    }

    #[test]
    fn dequantize_lands_mid_cell() {
        let cfg = TdcConfig {
            f_stages: 4,
            g_stages: 4,
            dt1: 1e-3,
            dt2: 0.25e-3,
            offset: 1e-3,
            d_range: 4e-3,
            floored: false,
        };
        let t = 3.21e-3;
        let r = tdc_measure(t, &cfg);
        let t_hat = tdc_dequantize(&r, &cfg);
        assert!((t - t_hat).abs() <= 0.5 * cfg.dt2 + 1e-15);
    }
}
