use std::f64::consts::PI;
use tem_codec::compress::{tdc_measure, tdc_dequantize};
use tem_codec::codec::LoopState;
use tem_codec::tem::{IntegratorGrid, DEFAULT_OVERSAMPLE};
use tem_codec::{synth_sinc_signal, CodecParams, Machine};

fn main() {
    let omega = 2.0 * PI * 10.0;
    let s = synth_sinc_signal(omega, 2, None, 0.5, 0).unwrap();
    let params = CodecParams { beta: 0.6, b_min: 0.6, ..CodecParams::default() };
    let kd = params.kd();
    let c_max = s.c_max();
    let grid = IntegratorGrid::new(&s, DEFAULT_OVERSAMPLE);
    let mut st = LoopState::new(Machine::Acif, &params, c_max);
    let mut t_prev = 0.0;
    let mut n = 0;
    let mut drift = 0.0f64;
    loop {
        let bias = st.bias();
        let tol = 1e-3 * kd / (bias + c_max);
        let Some(t) = grid.next_firing(t_prev, bias, kd, tol) else { break };
        let dt = t - t_prev;
        let cfg = st.config().unwrap();
        let reading = tdc_measure(dt, &cfg);
        let t_hat = tdc_dequantize(&reading, &cfg);
        drift += t_hat - dt;
        let under = dt < cfg.offset;
        if reading.overflow || under || n < 5 {
            let xb = s.evaluate(t_prev + 0.5*dt);
            println!(
                "n={n:4} t={t:.4} T={dt:.6} That={t_hat:.6} off={:.6} D={:.6} b={bias:.4} chat={:.4} x_mid={xb:.3} {}{}",
                cfg.offset, cfg.d_range, st.map().c_hat(),
                if reading.overflow {"OVERFLOW "} else {""},
                if under {"UNDER"} else {""}
            );
        }
        st.apply(reading, &cfg);
        t_prev = t;
        n += 1;
    }
    println!("events={n} final_drift={drift:.6}");
}
