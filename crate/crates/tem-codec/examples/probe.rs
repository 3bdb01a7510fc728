use std::f64::consts::PI;

use tem_codec::decode::{mirror_decode, reconstruct, ReconstructionConfig};
use tem_codec::{
    encode_stream, mse_db, synth_sinc_signal, CodecParams, Machine, SourceTag,
};

fn main() {
    let omega = 2.0 * PI * 10.0;
    let args: Vec<String> = std::env::args().collect();
    let beta: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let b_min: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(beta);
    let k: u32 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(256);
    let seeds: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(6);

    println!("beta={beta} b_min={b_min} K={k}");
    println!(
        "{:>5} {:>6} {:>8} {:>10} {:>10} {:>8} {:>6} {:>6} {:>6}",
        "mach", "events", "bits", "bits/ev", "mse_db", "sat%", "mapf", "recov", "p_sw"
    );
    for machine in [Machine::If, Machine::Aif, Machine::Cif, Machine::Acif] {
        let mut tot_ev = 0.0;
        let mut tot_bits = 0.0;
        let mut tot_mse = 0.0;
        let mut tot_sat = 0.0;
        let mut tot_mapf = 0.0;
        let mut tot_recov = 0.0;
        let mut tot_psw = 0.0;
        for seed in 0..seeds {
            let s = {
                let dur: f64 = std::env::var("DUR").ok().and_then(|d| d.parse().ok()).unwrap_or(0.5);
                let m: u32 = std::env::var("M").ok().and_then(|d| d.parse().ok()).unwrap_or(2);
                synth_sinc_signal(omega, m, None, dur, seed)
            }.unwrap();
            let w_map: u32 = std::env::var("WMAP").ok().and_then(|v| v.parse().ok()).unwrap_or(16);
            let params = CodecParams { beta, b_min, k_levels: k, w_map, ..CodecParams::default() };
            let enc = encode_stream(&s, &params, machine, SourceTag::External).unwrap();
            let (dec, _) = mirror_decode(&enc.bytes).unwrap();
            let trace = reconstruct(&dec, &ReconstructionConfig::default()).unwrap();
            let db = mse_db(&s, &trace, 0.05).unwrap();
            tot_ev += enc.sequence.events.len() as f64;
            tot_bits += enc.account.total_fields as f64;
            tot_mse += db;
            tot_sat += enc.saturations as f64 / enc.sequence.events.len() as f64;
            tot_mapf += enc.sequence.map_failures as f64;
            tot_recov += enc.sequence.recovery_violations as f64;
            tot_psw += enc.account.n_switches as f64 / enc.account.n_samples.max(1) as f64;
        }
        let n = seeds as f64;
        println!(
            "{:>5} {:>6.0} {:>8.0} {:>10.2} {:>10.2} {:>8.3} {:>6.1} {:>6.1} {:>6.3}",
            machine.label(),
            tot_ev / n,
            tot_bits / n,
            tot_bits / tot_ev,
            tot_mse / n,
            100.0 * tot_sat / n,
            tot_mapf / n,
            tot_recov / n,
            tot_psw / n
        );
    }
}
