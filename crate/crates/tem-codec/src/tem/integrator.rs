use crate::signal::BandlimitedSignal;

/// Default measurement-grid density relative to the Nyquist rate.
pub const DEFAULT_OVERSAMPLE: f64 = 64.0;

/// Dense cumulative integral of the input signal over its window, used to
/// locate threshold crossings of the biased integrator by bisection.
pub struct IntegratorGrid {
    signal: BandlimitedSignal,
    dt: f64,
    t_end: f64,
    xs: Vec<f64>,
    cum: Vec<f64>,
}

impl IntegratorGrid {
    pub fn new(signal: &BandlimitedSignal, oversample: f64) -> Self {
        let rate = (oversample * signal.nyquist_rate()).max(1000.0);
        let n = (signal.duration() * rate).ceil() as usize;
        let dt = signal.duration() / n as f64;
        let xs: Vec<f64> = (0..=n).map(|i| signal.evaluate(i as f64 * dt)).collect();
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        for i in 1..=n {
            let inc = 0.5 * (xs[i - 1] + xs[i]) * dt;
            cum.push(cum[i - 1] + inc);
        }
        IntegratorGrid { signal: signal.clone(), dt, t_end: signal.duration(), xs, cum }
    }

    pub fn duration(&self) -> f64 {
        self.t_end
    }

    /// Integral of x over [0, t], trapezoid on the grid plus a local
    /// trapezoid correction inside the containing cell.
    pub fn cum_at(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.t_end);
        let i = ((t / self.dt) as usize).min(self.xs.len() - 2);
        let t_i = i as f64 * self.dt;
        self.cum[i] + 0.5 * (self.xs[i] + self.signal.evaluate(t)) * (t - t_i)
    }

    /// First time after `t_prev` at which the integral of (x + bias) since
    /// `t_prev` reaches `kd`. Returns None when the window ends first.
    pub fn next_firing(&self, t_prev: f64, bias: f64, kd: f64, tol: f64) -> Option<f64> {
        let base = self.cum_at(t_prev) + bias * t_prev + kd;
        let g = |t: f64| self.cum_at(t) + bias * t - base;

        // Walk grid nodes to bracket the first crossing; g(t_prev) = -kd < 0.
        let mut lo = t_prev;
        let mut i = (t_prev / self.dt).floor() as usize + 1;
        let hi = loop {
            let t_node = (i as f64 * self.dt).min(self.t_end);
            if g(t_node) >= 0.0 {
                break t_node;
            }
            if t_node >= self.t_end {
                return None;
            }
            lo = t_node;
            i += 1;
        };

        let mut lo = lo;
        let mut hi = hi;
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if g(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    /// Max |x| over [a, b] from the grid nodes plus the exact endpoints.
    pub fn max_abs_in(&self, a: f64, b: f64) -> f64 {
        let a = a.clamp(0.0, self.t_end);
        let b = b.clamp(0.0, self.t_end);
        let mut m = self.signal.evaluate(a).abs().max(self.signal.evaluate(b).abs());
        let i0 = (a / self.dt).ceil() as usize;
        let i1 = ((b / self.dt).floor() as usize).min(self.xs.len() - 1);
        for i in i0..=i1.min(self.xs.len() - 1) {
            m = m.max(self.xs[i].abs());
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::BandlimitedSignal;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn cumulative_integral_of_constant() {
        let s = BandlimitedSignal::from_fn(2.0 * PI * 10.0, 1.0, "const", |_| 0.25).unwrap();
        let grid = IntegratorGrid::new(&s, DEFAULT_OVERSAMPLE);
        assert_abs_diff_eq!(grid.cum_at(0.4), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn firing_on_zero_signal_is_uniform() {
        let s = BandlimitedSignal::from_fn(2.0 * PI * 10.0, 1.0, "zero", |_| 0.0).unwrap();
        let grid = IntegratorGrid::new(&s, DEFAULT_OVERSAMPLE);
        let kd = 0.24 * 0.0156;
        let bias = 3.4166;
        let expected = kd / bias;
        let t1 = grid.next_firing(0.0, bias, kd, 1e-9).unwrap();
        assert_abs_diff_eq!(t1, expected, epsilon = 1e-8);
        let t2 = grid.next_firing(t1, bias, kd, 1e-9).unwrap();
        assert_abs_diff_eq!(t2 - t1, expected, epsilon = 1e-8);
    }

    #[test]
    fn firing_stops_at_window_end() {
        let s = BandlimitedSignal::from_fn(2.0 * PI * 10.0, 0.01, "zero", |_| 0.0).unwrap();
        let grid = IntegratorGrid::new(&s, DEFAULT_OVERSAMPLE);
        // kd/bias = 0.02 > window
        assert!(grid.next_firing(0.0, 1.0, 0.02, 1e-9).is_none());
    }

    #[test]
    fn windowed_max_sees_interior_peak() {
        let s =
            BandlimitedSignal::from_fn(2.0 * PI * 10.0, 1.0, "tone", |t| (2.0 * PI * 5.0 * t).sin())
                .unwrap();
        let grid = IntegratorGrid::new(&s, DEFAULT_OVERSAMPLE);
        // Peak of sin(2*pi*5 t) at t = 0.05 inside [0.02, 0.08].
        assert!(grid.max_abs_in(0.02, 0.08) > 0.999);
        assert!(grid.max_abs_in(0.0, 0.01) < 0.32);
    }
}
