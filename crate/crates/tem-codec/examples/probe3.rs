use std::f64::consts::PI;
use tem_codec::compress::tdc_measure;
use tem_codec::codec::LoopState;
use tem_codec::tem::{IntegratorGrid, DEFAULT_OVERSAMPLE};
use tem_codec::{synth_sinc_signal, CodecParams, Machine};

fn main() {
    let omega = 2.0 * PI * 10.0;
    let s = synth_sinc_signal(omega, 2, None, 1.0, 0).unwrap();
    let params = CodecParams { beta: 0.6, b_min: 0.6, ..CodecParams::default() };
    let kd = params.kd();
    let c_max = s.c_max();
    let grid = IntegratorGrid::new(&s, DEFAULT_OVERSAMPLE);
    let mut st = LoopState::new(Machine::Acif, &params, c_max);
    let mut t_prev = 0.0;
    let (mut n, mut switches, mut bias_changes, mut sw_with_bias) = (0u64, 0u64, 0u64, 0u64);
    let mut prev_bias = st.bias();
    let mut prev_f: Option<u32> = None;
    let mut rho_sum = 0u64;
    let mut eta_sum = 0u64;
    loop {
        let bias = st.bias();
        let tol = 1e-3 * kd / (bias + c_max);
        let Some(t) = grid.next_firing(t_prev, bias, kd, tol) else { break };
        let cfg = st.config().unwrap();
        let reading = tdc_measure(t - t_prev, &cfg);
        let w = st.widths();
        rho_sum += w.rho as u64;
        eta_sum += w.eta as u64;
        let bias_changed = bias != prev_bias;
        if bias_changed { bias_changes += 1; }
        if prev_f != Some(reading.f) {
            switches += 1;
            if bias_changed { sw_with_bias += 1; }
        }
        prev_f = Some(reading.f);
        prev_bias = bias;
        st.apply(reading, &cfg);
        t_prev = t;
        n += 1;
    }
    println!("events={n} switches={switches} bias_changes={bias_changes} switches_with_bias_change={sw_with_bias}");
    println!("mean_rho={:.2} mean_eta={:.2}", rho_sum as f64 / n as f64, eta_sum as f64 / n as f64);
}
