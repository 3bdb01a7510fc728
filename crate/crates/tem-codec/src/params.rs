use crate::error::{CodecError, Result};

/// Which sampler variant drives the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Machine {
    /// Fixed bias, uniform K-level interval quantizer.
    If,
    /// Adaptive bias, uniform K-level quantizer over the global interval range,
    /// fixed-width bias codes.
    Aif,
    /// Fixed bias, segment compression over the fixed interval range.
    Cif,
    /// Adaptive bias, segment compression with per-sample adaptive range and
    /// variability-linked bias coding.
    Acif,
}

impl Machine {
    pub fn is_adaptive(self) -> bool {
        matches!(self, Machine::Aif | Machine::Acif)
    }

    pub fn is_compressed(self) -> bool {
        matches!(self, Machine::Cif | Machine::Acif)
    }

    pub fn id(self) -> u8 {
        match self {
            Machine::If => 0,
            Machine::Aif => 1,
            Machine::Cif => 2,
            Machine::Acif => 3,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Ok(match id {
            0 => Machine::If,
            1 => Machine::Aif,
            2 => Machine::Cif,
            3 => Machine::Acif,
            other => return Err(CodecError::Corrupt(format!("unknown machine id {other}"))),
        })
    }

    pub fn label(self) -> &'static str {
        match self {
            Machine::If => "if",
            Machine::Aif => "aif",
            Machine::Cif => "cif",
            Machine::Acif => "acif",
        }
    }
}

impl std::str::FromStr for Machine {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "if" | "if-tem" => Ok(Machine::If),
            "aif" | "aif-tem" => Ok(Machine::Aif),
            "cif" | "cif-tem" => Ok(Machine::Cif),
            "acif" | "acif-tem" => Ok(Machine::Acif),
            other => Err(CodecError::Parameter(format!("unknown machine '{other}'"))),
        }
    }
}

impl std::fmt::Display for Machine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// How the fine shrinking stage count is derived from the quantizer size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdcMode {
    /// G = K / L: the fine code fills every residual bit.
    FullResolution,
    /// G = log2(K / L): stage count equals the residual bit width. Retained
    /// for replication studies; leaves most residual codes unused.
    LogStages,
}

impl TdcMode {
    pub fn id(self) -> u8 {
        match self {
            TdcMode::FullResolution => 0,
            TdcMode::LogStages => 1,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        Ok(match id {
            0 => TdcMode::FullResolution,
            1 => TdcMode::LogStages,
            other => return Err(CodecError::Corrupt(format!("unknown TDC mode {other}"))),
        })
    }
}

impl std::str::FromStr for TdcMode {
    type Err = CodecError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "full_resolution" => Ok(TdcMode::FullResolution),
            "log" | "log_stages" => Ok(TdcMode::LogStages),
            other => Err(CodecError::Parameter(format!("unknown TDC mode '{other}'"))),
        }
    }
}

/// Sampler and quantizer constants shared by every machine.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecParams {
    /// Integrator scale.
    pub kappa: f64,
    /// Comparator threshold.
    pub delta: f64,
    /// Bias margin above the estimated amplitude.
    pub beta: f64,
    /// Fixed bias for the IF and CIF machines.
    pub b_if: f64,
    /// Lower bias clamp for the adaptive machines.
    pub b_min: f64,
    /// Upper bias clamp for the adaptive machines.
    pub b_max: f64,
    /// Quantizer levels; power of two, at least 4.
    pub k_levels: u32,
    /// Events per variance window; plans refresh on this cadence.
    pub m_var: u32,
    /// Trigger window for the local-max diagnostic.
    pub w_map: u32,
    /// Weight on the newest amplitude measurement in the MAP filter.
    pub alpha1: f64,
    /// Weight on the running deviation in the MAP prediction step.
    pub alpha2: f64,
    /// Fixed bias code width for the AIF machine.
    pub r_b_aif: u32,
    /// Fine-stage derivation rule.
    pub tdc_mode: TdcMode,
}

impl CodecParams {
    /// Integrator charge per firing.
    pub fn kd(&self) -> f64 {
        self.kappa * self.delta
    }

    /// Validate against a signal amplitude bound.
    pub fn validate(&self, c_max: f64) -> Result<()> {
        if !(self.kappa > 0.0) || !(self.delta > 0.0) {
            return Err(CodecError::Parameter("kappa and delta must be positive".into()));
        }
        if !(self.beta > 0.0) {
            return Err(CodecError::Parameter("beta must be positive".into()));
        }
        if self.k_levels < 4 || !self.k_levels.is_power_of_two() {
            return Err(CodecError::Parameter(format!(
                "k_levels must be a power of two >= 4, got {}",
                self.k_levels
            )));
        }
        if self.b_if <= c_max {
            return Err(CodecError::Config(format!(
                "fixed bias {} must exceed the amplitude bound {c_max}; the integrator may stall",
                self.b_if
            )));
        }
        if self.b_min < self.beta {
            return Err(CodecError::Parameter(format!(
                "b_min {} must be at least beta {}",
                self.b_min, self.beta
            )));
        }
        if self.b_max < self.b_min {
            return Err(CodecError::Parameter("b_max must be at least b_min".into()));
        }
        if self.m_var < 2 {
            return Err(CodecError::Parameter("m_var must be at least 2".into()));
        }
        if self.r_b_aif == 0 || self.r_b_aif > 16 {
            return Err(CodecError::Parameter("r_b_aif must be in 1..=16".into()));
        }
        if !(0.0..=1.0).contains(&self.alpha1) || !(0.0..=1.0).contains(&self.alpha2) {
            return Err(CodecError::Parameter("alpha1 and alpha2 must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn residual_width(&self, eta: u32) -> u32 {
        self.k_levels.ilog2() - eta
    }
}

impl Default for CodecParams {
    /// Reference configuration used throughout the benchmark suite.
    fn default() -> Self {
        CodecParams {
            kappa: 0.24,
            delta: 0.0156,
            beta: 0.35,
            b_if: 3.4166,
            b_min: 0.35,
            b_max: 3.4166,
            k_levels: 256,
            m_var: 32,
            w_map: 32,
            alpha1: 0.98,
            alpha2: 0.6,
            r_b_aif: 3,
            tdc_mode: TdcMode::FullResolution,
        }
    }
}
