//! Rate-distortion benchmark harness: quantizer sweeps over machine
//! ensembles, CSV emission, and fixed-distortion comparisons.

pub mod config;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::audio::load_audio;
use crate::bitstream::SourceTag;
use crate::codec::encode_stream;
use crate::decode::{mirror_decode, reconstruct, ReconstructionConfig};
use crate::error::{CodecError, Result};
use crate::params::{CodecParams, Machine};
use crate::signal::{mse_db, synth_sinc_signal, BandlimitedSignal};

/// Everything one experiment needs; resolvable from defaults, flags, and a
/// key=value config file.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub machines: Vec<Machine>,
    pub n_seeds: u64,
    pub base_seed: u64,
    pub duration: f64,
    pub omega: f64,
    pub m_half_terms: u32,
    pub k_list: Vec<u32>,
    pub params: CodecParams,
    pub audio_path: Option<PathBuf>,
    pub edge_guard: f64,
    pub recon: ReconstructionConfig,
    pub out_dir: PathBuf,
    pub target_mse: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let out_dir = std::env::var("TEM_OUT_DIR").map(PathBuf::from).unwrap_or_else(|_| PathBuf::from("."));
        ExperimentConfig {
            machines: vec![Machine::If, Machine::Aif, Machine::Cif, Machine::Acif],
            n_seeds: 200,
            base_seed: 1,
            duration: 1.25,
            omega: 2.0 * std::f64::consts::PI * 10.0,
            m_half_terms: 2,
            k_list: vec![16, 32, 64, 128, 256, 512],
            params: CodecParams::default(),
            audio_path: None,
            edge_guard: 0.05,
            recon: ReconstructionConfig::default(),
            out_dir,
            target_mse: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn signal_for_seed(&self, seed: u64) -> Result<BandlimitedSignal> {
        match &self.audio_path {
            Some(path) => load_audio(path, self.omega),
            None => synth_sinc_signal(self.omega, self.m_half_terms, None, self.duration, seed),
        }
    }

    pub fn source_tag(&self, seed: u64) -> SourceTag {
        if self.audio_path.is_some() {
            SourceTag::External
        } else {
            SourceTag::Synthetic { seed, m_half_terms: self.m_half_terms }
        }
    }
}

/// One sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub machine: Machine,
    pub seed: u64,
    pub k: u32,
    pub n_events: u64,
    pub bits_fields: u64,
    pub bits_stream: u64,
    pub mse_db: f64,
    pub p_switch: f64,
    pub mean_phi: f64,
    pub saturations: u64,
    pub map_failures: u64,
}

/// Encode, decode, reconstruct, and measure one (machine, seed, K) point.
pub fn run_point(
    cfg: &ExperimentConfig,
    signal: &BandlimitedSignal,
    machine: Machine,
    seed: u64,
    k: u32,
) -> Result<ResultRow> {
    let params = CodecParams { k_levels: k, ..cfg.params.clone() };
    let enc = encode_stream(signal, &params, machine, cfg.source_tag(seed))?;
    let (dec, _) = mirror_decode(&enc.bytes)?;
    let trace = reconstruct(&dec, &cfg.recon)?;
    let db = mse_db(signal, &trace, cfg.edge_guard)?;
    Ok(ResultRow {
        machine,
        seed,
        k,
        n_events: enc.account.n_samples,
        bits_fields: enc.account.total_fields,
        bits_stream: enc.account.total_self_delim,
        mse_db: db,
        p_switch: if enc.account.n_samples == 0 {
            0.0
        } else {
            enc.account.n_switches as f64 / enc.account.n_samples as f64
        },
        mean_phi: enc.mean_phi,
        saturations: enc.saturations,
        map_failures: enc.sequence.map_failures,
    })
}

/// Run the full sweep: machines x seeds x quantizer sizes, in a parallel
/// worker pool, gathered into a deterministic row order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let seeds: Vec<u64> = if cfg.audio_path.is_some() {
        vec![0]
    } else {
        (0..cfg.n_seeds).map(|i| cfg.base_seed + i).collect()
    };
    let jobs: Vec<(Machine, u64)> = cfg
        .machines
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();

    let mut rows: Vec<ResultRow> = jobs
        .par_iter()
        .map(|&(machine, seed)| -> Result<Vec<ResultRow>> {
            let signal = cfg.signal_for_seed(seed)?;
            cfg.k_list
                .iter()
                .map(|&k| run_point(cfg, &signal, machine, seed, k))
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by_key(|r| (r.machine.id(), r.seed, r.k));
    Ok(rows)
}

pub const CSV_HEADER: &str = "machine,seed,k,n_events,bits_fields,bits_stream,mse_db,p_switch,mean_phi,saturations,map_failures";

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{},{}",
            r.machine, r.seed, r.k, r.n_events, r.bits_fields, r.bits_stream, r.mse_db,
            r.p_switch, r.mean_phi, r.saturations, r.map_failures
        )?;
    }
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| CodecError::Parameter("empty CSV".into()))?;
    if header.trim() != CSV_HEADER {
        return Err(CodecError::Parameter(format!("unexpected CSV header: {header}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(CodecError::Parameter(format!("row {i}: expected 11 fields")));
        }
        let parse_err = |what: &str| CodecError::Parameter(format!("row {i}: bad {what}"));
        rows.push(ResultRow {
            machine: f[0].parse()?,
            seed: f[1].parse().map_err(|_| parse_err("seed"))?,
            k: f[2].parse().map_err(|_| parse_err("k"))?,
            n_events: f[3].parse().map_err(|_| parse_err("n_events"))?,
            bits_fields: f[4].parse().map_err(|_| parse_err("bits_fields"))?,
            bits_stream: f[5].parse().map_err(|_| parse_err("bits_stream"))?,
            mse_db: f[6].parse().map_err(|_| parse_err("mse_db"))?,
            p_switch: f[7].parse().map_err(|_| parse_err("p_switch"))?,
            mean_phi: f[8].parse().map_err(|_| parse_err("mean_phi"))?,
            saturations: f[9].parse().map_err(|_| parse_err("saturations"))?,
            map_failures: f[10].parse().map_err(|_| parse_err("map_failures"))?,
        });
    }
    Ok(rows)
}

/// Per-machine curve of (mean bits, mean MSE) across the quantizer sweep,
/// ordered by K.
#[derive(Debug, Clone)]
pub struct RdCurve {
    pub machine: Machine,
    pub k: Vec<u32>,
    pub mean_bits: Vec<f64>,
    pub mean_mse: Vec<f64>,
}

pub fn machine_curve(rows: &[ResultRow], machine: Machine) -> Option<RdCurve> {
    let mut ks: Vec<u32> = rows.iter().filter(|r| r.machine == machine).map(|r| r.k).collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        return None;
    }
    let mut curve = RdCurve { machine, k: Vec::new(), mean_bits: Vec::new(), mean_mse: Vec::new() };
    for k in ks {
        let pts: Vec<&ResultRow> =
            rows.iter().filter(|r| r.machine == machine && r.k == k).collect();
        let n = pts.len() as f64;
        curve.k.push(k);
        curve.mean_bits.push(pts.iter().map(|r| r.bits_fields as f64).sum::<f64>() / n);
        curve.mean_mse.push(pts.iter().map(|r| r.mse_db).sum::<f64>() / n);
    }
    Some(curve)
}

impl RdCurve {
    /// Best (lowest) mean distortion achievable within a bit budget:
    /// interpolated along the sweep, +inf below the cheapest point, and flat
    /// at the best value beyond the largest.
    pub fn mse_at_budget(&self, budget: f64) -> f64 {
        let mut pts: Vec<(f64, f64)> =
            self.mean_bits.iter().cloned().zip(self.mean_mse.iter().cloned()).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        if budget < pts[0].0 {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        let mut value = f64::INFINITY;
        for w in pts.windows(2) {
            let (b0, m0) = w[0];
            let (b1, m1) = w[1];
            if budget >= b0 && budget <= b1 && b1 > b0 {
                let t = (budget - b0) / (b1 - b0);
                value = value.min(m0 + t * (m1 - m0));
            }
        }
        for &(b, m) in &pts {
            if b <= budget {
                best = best.min(m);
            }
        }
        value.min(best)
    }

    /// Bits needed to reach a target distortion: bracket the target on the
    /// K-ordered sweep and interpolate bits linearly in MSE. None when the
    /// target is unreachable.
    pub fn bits_at_mse(&self, target: f64) -> Option<f64> {
        for i in 0..self.mean_mse.len() {
            if self.mean_mse[i] <= target {
                if i == 0 {
                    return Some(self.mean_bits[0]);
                }
                let (m0, m1) = (self.mean_mse[i - 1], self.mean_mse[i]);
                let (b0, b1) = (self.mean_bits[i - 1], self.mean_bits[i]);
                if (m0 - m1).abs() < 1e-12 {
                    return Some(b1);
                }
                let t = ((m0 - target) / (m0 - m1)).clamp(0.0, 1.0);
                return Some(b0 + t * (b1 - b0));
            }
        }
        None
    }
}

/// Fixed-distortion savings of one machine over a baseline, in percent.
pub fn savings_percent(rows: &[ResultRow], machine: Machine, baseline: Machine, target: f64) -> Option<f64> {
    let mc = machine_curve(rows, machine)?;
    let bc = machine_curve(rows, baseline)?;
    let mb = mc.bits_at_mse(target)?;
    let bb = bc.bits_at_mse(target)?;
    Some(100.0 * (1.0 - mb / bb))
}

/// Distortion targets every machine in the set can reach: interior points of
/// the common achievable range.
pub fn common_targets(rows: &[ResultRow], machines: &[Machine], n_points: usize) -> Vec<f64> {
    let mut lo = f64::NEG_INFINITY; // best (most negative) commonly reachable
    let mut hi = f64::INFINITY; // worst
    for &m in machines {
        let Some(c) = machine_curve(rows, m) else { return Vec::new() };
        let best = c.mean_mse.iter().cloned().fold(f64::INFINITY, f64::min);
        let worst = c.mean_mse.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        lo = lo.max(best);
        hi = hi.min(worst);
    }
    if !(lo < hi) {
        return Vec::new();
    }
    (1..=n_points)
        .map(|i| hi + (lo - hi) * i as f64 / (n_points + 1) as f64)
        .collect()
}

/// Comparison report: savings at fixed distortion targets.
#[derive(Debug, Clone)]
pub struct CompareReport {
    pub targets: Vec<f64>,
    /// (target, vs-AIF percent, vs-IF percent); None marks unreachable.
    pub rows: Vec<(f64, Option<f64>, Option<f64>)>,
    pub mean_vs_aif: Option<f64>,
    pub mean_vs_if: Option<f64>,
}

pub fn compare(rows: &[ResultRow], targets: &[f64]) -> Result<CompareReport> {
    for needed in [Machine::Acif, Machine::Aif, Machine::If] {
        if machine_curve(rows, needed).is_none() {
            return Err(CodecError::Parameter(format!("baseline {needed} missing from the sweep")));
        }
    }
    let targets: Vec<f64> = if targets.is_empty() {
        common_targets(rows, &[Machine::Acif, Machine::Aif, Machine::If], 3)
    } else {
        targets.to_vec()
    };
    let mut out = Vec::new();
    let (mut sa, mut si, mut na, mut ni) = (0.0, 0.0, 0, 0);
    for &t in &targets {
        let vs_aif = savings_percent(rows, Machine::Acif, Machine::Aif, t);
        let vs_if = savings_percent(rows, Machine::Acif, Machine::If, t);
        if let Some(v) = vs_aif {
            sa += v;
            na += 1;
        }
        if let Some(v) = vs_if {
            si += v;
            ni += 1;
        }
        out.push((t, vs_aif, vs_if));
    }
    Ok(CompareReport {
        targets,
        rows: out,
        mean_vs_aif: (na > 0).then(|| sa / na as f64),
        mean_vs_if: (ni > 0).then(|| si / ni as f64),
    })
}

/// Emit plot-ready rate-distortion columns, one file per machine:
/// `rd_<machine>.dat` with "k mean_bits mean_mse" rows.
pub fn write_plot_data(dir: &Path, rows: &[ResultRow]) -> Result<Vec<PathBuf>> {
    use std::io::Write;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for machine in [Machine::If, Machine::Aif, Machine::Cif, Machine::Acif] {
        let Some(c) = machine_curve(rows, machine) else { continue };
        let path = dir.join(format!("rd_{machine}.dat"));
        let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(out, "# k mean_bits mean_mse_db")?;
        for i in 0..c.k.len() {
            writeln!(out, "{} {:.3} {:.4}", c.k[i], c.mean_bits[i], c.mean_mse[i])?;
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(machine: Machine, seed: u64, k: u32, bits: u64, mse: f64) -> ResultRow {
        ResultRow {
            machine,
            seed,
            k,
            n_events: 100,
            bits_fields: bits,
            bits_stream: bits + 100,
            mse_db: mse,
            p_switch: 0.1,
            mean_phi: 1.2,
            saturations: 0,
            map_failures: 0,
        }
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let rows = vec![
            row(Machine::If, 1, 16, 4000, -30.0),
            row(Machine::Acif, 1, 16, 1000, -35.0),
        ];
        write_csv(&path, &rows).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn curve_interpolation_and_budget_semantics() {
        let rows = vec![
            row(Machine::If, 1, 16, 1000, -20.0),
            row(Machine::If, 1, 32, 2000, -30.0),
            row(Machine::If, 2, 16, 1200, -22.0),
            row(Machine::If, 2, 32, 2200, -32.0),
        ];
        let c = machine_curve(&rows, Machine::If).unwrap();
        assert_eq!(c.mean_bits, vec![1100.0, 2100.0]);
        assert_eq!(c.mean_mse, vec![-21.0, -31.0]);
        // Midpoint budget interpolates the distortion.
        assert!((c.mse_at_budget(1600.0) + 26.0).abs() < 1e-9);
        // Below the cheapest point the budget is unreachable.
        assert!(c.mse_at_budget(500.0).is_infinite());
        // Beyond the most expensive point the best value holds.
        assert!((c.mse_at_budget(99999.0) + 31.0).abs() < 1e-9);
        // Bits at a bracketed target interpolate linearly in MSE.
        let b = c.bits_at_mse(-26.0).unwrap();
        assert!((b - 1600.0).abs() < 1e-9);
        assert!(c.bits_at_mse(-60.0).is_none());
    }

    #[test]
    fn self_comparison_saves_nothing() {
        let rows = vec![
            row(Machine::Acif, 1, 16, 1000, -20.0),
            row(Machine::Acif, 1, 32, 2000, -30.0),
        ];
        let s = savings_percent(&rows, Machine::Acif, Machine::Acif, -25.0).unwrap();
        assert!(s.abs() < 1e-12);
    }

    #[test]
    fn compare_requires_baselines() {
        let rows = vec![row(Machine::Acif, 1, 16, 1000, -20.0)];
        assert!(compare(&rows, &[]).is_err());
    }
}
