use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tem_codec::audio::{write_csv_trace, write_wav};
use tem_codec::bench::{
    self, compare, config, machine_curve, run_sweep, write_csv, write_plot_data, ExperimentConfig,
};
use tem_codec::bitstream::SourceTag;
use tem_codec::decode::{mirror_decode, reconstruct};
use tem_codec::{encode_stream, mse_db, synth_sinc_signal, Machine};

/// Time-encoding codec benchmark: encode and decode signals, sweep
/// rate-distortion curves, and compare machine variants.
#[derive(Parser)]
#[command(name = "tembench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags mirroring the experiment configuration. A config file, when given,
/// overrides flags.
#[derive(Args, Clone)]
struct CommonOpts {
    /// key=value config file; its settings take precedence over flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Machines to run (comma separated: if,aif,cif,acif)
    #[arg(long)]
    machines: Option<String>,
    /// Ensemble size for synthetic sweeps
    #[arg(long)]
    seeds: Option<u64>,
    /// First seed of the ensemble
    #[arg(long)]
    base_seed: Option<u64>,
    /// Signal window length in seconds
    #[arg(long)]
    duration: Option<f64>,
    /// Band edge in Hz (omega = 2*pi*f)
    #[arg(long)]
    omega_hz: Option<f64>,
    /// Half-count of sinc pulses in the synthetic train
    #[arg(long)]
    m_half_terms: Option<u32>,
    /// Quantizer sizes for sweeps (comma separated)
    #[arg(long)]
    k_list: Option<String>,
    /// Quantizer size for single encodes
    #[arg(long)]
    k: Option<u32>,
    /// Bias margin
    #[arg(long)]
    beta: Option<f64>,
    /// Audio clip to encode instead of the synthetic ensemble
    #[arg(long)]
    audio: Option<PathBuf>,
    /// Boundary fraction excluded from distortion measurements
    #[arg(long)]
    edge_guard: Option<f64>,
    /// Output directory (defaults to $TEM_OUT_DIR or .)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Fixed-distortion targets in dB (comma separated)
    #[arg(long)]
    target_mse: Option<String>,
}

impl CommonOpts {
    fn resolve(&self) -> Result<ExperimentConfig, tem_codec::CodecError> {
        let mut cfg = ExperimentConfig::default();
        if let Some(m) = &self.machines {
            cfg.machines = m
                .split(',')
                .map(|s| s.trim().parse::<Machine>())
                .collect::<Result<Vec<_>, _>>()?;
        }
        if let Some(v) = self.seeds {
            cfg.n_seeds = v;
        }
        if let Some(v) = self.base_seed {
            cfg.base_seed = v;
        }
        if let Some(v) = self.duration {
            cfg.duration = v;
        }
        if let Some(v) = self.omega_hz {
            cfg.omega = 2.0 * std::f64::consts::PI * v;
        }
        if let Some(v) = self.m_half_terms {
            cfg.m_half_terms = v;
        }
        if let Some(list) = &self.k_list {
            cfg.k_list = list
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<u32>()
                        .map_err(|_| tem_codec::CodecError::Parameter(format!("bad k value: {v}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
        }
        if let Some(v) = self.k {
            cfg.params.k_levels = v;
        }
        if let Some(v) = self.beta {
            cfg.params.beta = v;
            cfg.params.b_min = cfg.params.b_min.max(v);
        }
        if let Some(p) = &self.audio {
            cfg.audio_path = Some(p.clone());
        }
        if let Some(v) = self.edge_guard {
            cfg.edge_guard = v;
        }
        if let Some(p) = &self.out_dir {
            cfg.out_dir = p.clone();
        }
        if let Some(list) = &self.target_mse {
            cfg.target_mse = list
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| tem_codec::CodecError::Parameter(format!("bad target: {v}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
        }
        if let Some(path) = &self.config {
            config::apply_file(&mut cfg, path)?;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Encode one signal to a .tem stream
    Encode {
        #[command(flatten)]
        common: CommonOpts,
        /// Sampler variant
        #[arg(long, default_value = "acif")]
        machine: Machine,
        /// Seed of the synthetic signal (ignored with --audio)
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output stream path
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Decode a .tem stream and reconstruct the signal
    Decode {
        /// Input stream
        stream: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
        /// Output trace path (.wav or .csv by extension)
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Sweep quantizer sizes across machines and seeds, writing a CSV
    Sweep {
        #[command(flatten)]
        common: CommonOpts,
        /// Output CSV path
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Summarize a sweep CSV: fixed-distortion savings and plot data
    Compare {
        /// Sweep CSV produced by the sweep subcommand
        csv: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), tem_codec::CodecError> {
    match cli.command {
        Command::Encode { common, machine, seed, out } => {
            let cfg = common.resolve()?;
            let signal = cfg.signal_for_seed(seed)?;
            let enc = encode_stream(&signal, &cfg.params, machine, cfg.source_tag(seed))?;
            let path = out.unwrap_or_else(|| {
                cfg.out_dir.join(format!("{machine}_seed{seed}_k{}.tem", cfg.params.k_levels))
            });
            std::fs::write(&path, &enc.bytes)?;
            println!("wrote {} ({} bytes)", path.display(), enc.bytes.len());
            println!(
                "events: {}  field bits: {}  stream bits: {}  switches: {}  saturated: {}",
                enc.account.n_samples,
                enc.account.total_fields,
                enc.account.total_self_delim,
                enc.account.n_switches,
                enc.saturations,
            );
            if enc.sequence.map_failures > 0 || enc.sequence.recovery_violations > 0 {
                eprintln!(
                    "warning: {} estimator misses, {} recovery-condition violations",
                    enc.sequence.map_failures, enc.sequence.recovery_violations
                );
            }
            Ok(())
        }
        Command::Decode { stream, common, out } => {
            let cfg = common.resolve()?;
            let bytes = std::fs::read(&stream)?;
            let (dec, _) = mirror_decode(&bytes)?;
            if !dec.recovery_condition_ok() {
                eprintln!("warning: some intervals exceed the recovery bound pi/omega");
            }
            let trace = reconstruct(&dec, &cfg.recon)?;
            let header = dec.header.as_ref().expect("decoded stream has a header");
            if let SourceTag::Synthetic { seed, m_half_terms } = header.source {
                let reference =
                    synth_sinc_signal(header.omega, m_half_terms, None, header.duration, seed)?;
                let db = mse_db(&reference, &trace, cfg.edge_guard)?;
                println!(
                    "machine: {}  events: {}  mse: {db:.2} dB",
                    header.machine,
                    dec.times.len()
                );
            } else {
                println!("machine: {}  events: {}", header.machine, dec.times.len());
            }
            let path = out.unwrap_or_else(|| cfg.out_dir.join("recon.csv"));
            match path.extension().and_then(|e| e.to_str()) {
                Some("wav") => write_wav(&path, &trace)?,
                _ => write_csv_trace(&path, &trace)?,
            }
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Sweep { common, out } => {
            let cfg = common.resolve()?;
            std::fs::create_dir_all(&cfg.out_dir)?;
            let rows = run_sweep(&cfg)?;
            let path = out.unwrap_or_else(|| cfg.out_dir.join("sweep.csv"));
            write_csv(&path, &rows)?;
            // Embed the resolved configuration next to the results.
            std::fs::write(path.with_extension("config"), config::render(&cfg))?;
            println!("wrote {} ({} rows)", path.display(), rows.len());
            if !cfg.target_mse.is_empty() {
                for &t in &cfg.target_mse {
                    for &m in &cfg.machines {
                        let bits = machine_curve(&rows, m).and_then(|c| c.bits_at_mse(t));
                        match bits {
                            Some(b) => println!("target {t:.1} dB: {m} needs {b:.0} bits"),
                            None => println!("target {t:.1} dB: {m} unreachable"),
                        }
                    }
                }
            }
            Ok(())
        }
        Command::Compare { csv, common } => {
            let cfg = common.resolve()?;
            let rows = bench::read_csv(&csv)?;
            let report = compare(&rows, &cfg.target_mse)?;
            println!("fixed-distortion savings of acif:");
            for (t, vs_aif, vs_if) in &report.rows {
                let fmt = |v: &Option<f64>| {
                    v.map(|p| format!("{p:.1}%")).unwrap_or_else(|| "unreachable".into())
                };
                println!("  target {t:.2} dB: vs aif {}  vs if {}", fmt(vs_aif), fmt(vs_if));
            }
            if let (Some(a), Some(i)) = (report.mean_vs_aif, report.mean_vs_if) {
                println!("mean: vs aif {a:.1}%  vs if {i:.1}%");
            }
            let files = write_plot_data(&cfg.out_dir, &rows)?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
    }
}
