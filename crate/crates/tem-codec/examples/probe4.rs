use tem_codec::audio::load_audio;
use tem_codec::compress::tdc_measure;
use tem_codec::codec::LoopState;
use tem_codec::tem::{IntegratorGrid, DEFAULT_OVERSAMPLE};
use tem_codec::{CodecParams, Machine};
use std::path::Path;

fn main() {
    let s = load_audio(Path::new("assets/testclip.wav"), 2.0 * std::f64::consts::PI * 10.0).unwrap();
    println!("c_max={:.3} dur={:.3}", s.c_max(), s.duration());
    let params = CodecParams::default();
    let kd = params.kd();
    let grid = IntegratorGrid::new(&s, DEFAULT_OVERSAMPLE);
    let mut st = LoopState::new(Machine::Acif, &params, s.c_max());
    let mut t_prev = 0.0;
    let mut n = 0;
    loop {
        let bias = st.bias();
        let tol = 1e-3 * kd / (bias + s.c_max());
        let Some(t) = grid.next_firing(t_prev, bias, kd, tol) else { break };
        let dt = t - t_prev;
        let cfg = st.config().unwrap();
        let reading = tdc_measure(dt, &cfg);
        if reading.overflow || dt < cfg.offset - cfg.dt2 {
            println!("n={n} t={t:.4} T={dt:.6} range=[{:.6},{:.6}] b={bias:.3} chat={:.3} x={:.3}",
                cfg.offset, cfg.offset + cfg.d_range, st.map().c_hat(), s.evaluate(t_prev + 0.5*dt));
        }
        st.apply(reading, &cfg);
        t_prev = t;
        n += 1;
    }
    println!("events={n}");
}
