//! Bit-exact stream container. Layout is documented in FORMAT.md.

pub mod analytic;
pub mod bits;

use crate::error::{CodecError, Result};
use crate::params::{CodecParams, Machine, TdcMode};
pub use bits::{BitReader, BitWriter};

pub const MAGIC: [u8; 4] = *b"TEM1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 148;

/// Where the encoded signal came from; synthetic sources are replayable
/// from the seed alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceTag {
    Synthetic { seed: u64, m_half_terms: u32 },
    External,
}

/// Everything the mirroring decoder needs to replay the encoder state.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamHeader {
    pub machine: Machine,
    pub params: CodecParams,
    pub omega: f64,
    pub duration: f64,
    pub c_max: f64,
    pub energy: f64,
    pub source: SourceTag,
    pub n_events: u64,
    /// Digest of the per-sample plan/width sequence, for mirror verification.
    pub plan_checksum: u64,
}

impl StreamHeader {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.machine.id());
        out.push(self.params.tdc_mode.id());
        let (kind, seed, m_half) = match self.source {
            SourceTag::Synthetic { seed, m_half_terms } => (0u8, seed, m_half_terms),
            SourceTag::External => (1u8, 0, 0),
        };
        out.push(kind);
        out.extend_from_slice(&seed.to_le_bytes());
        out.extend_from_slice(&m_half.to_le_bytes());
        out.extend_from_slice(&self.params.k_levels.to_le_bytes());
        out.extend_from_slice(&self.params.m_var.to_le_bytes());
        out.extend_from_slice(&self.params.w_map.to_le_bytes());
        out.extend_from_slice(&self.params.r_b_aif.to_le_bytes());
        for v in [
            self.params.kappa,
            self.params.delta,
            self.params.beta,
            self.params.b_if,
            self.params.b_min,
            self.params.b_max,
            self.params.alpha1,
            self.params.alpha2,
            self.omega,
            self.duration,
            self.c_max,
            self.energy,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.n_events.to_le_bytes());
        out.extend_from_slice(&self.plan_checksum.to_le_bytes());
        debug_assert_eq!(out.len(), HEADER_LEN);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(CodecError::Corrupt(format!(
                "header needs {HEADER_LEN} bytes, stream holds {}",
                bytes.len()
            )));
        }
        if bytes[0..4] != MAGIC {
            return Err(CodecError::Corrupt("bad magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(CodecError::Corrupt(format!("unsupported version {}", bytes[4])));
        }
        let machine = Machine::from_id(bytes[5])?;
        let tdc_mode = TdcMode::from_id(bytes[6])?;
        let source_kind = bytes[7];
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let seed = u64_at(8);
        let m_half = u32_at(16);
        let source = match source_kind {
            0 => SourceTag::Synthetic { seed, m_half_terms: m_half },
            1 => SourceTag::External,
            other => return Err(CodecError::Corrupt(format!("unknown source kind {other}"))),
        };
        let params = CodecParams {
            k_levels: u32_at(20),
            m_var: u32_at(24),
            w_map: u32_at(28),
            r_b_aif: u32_at(32),
            kappa: f64_at(36),
            delta: f64_at(44),
            beta: f64_at(52),
            b_if: f64_at(60),
            b_min: f64_at(68),
            b_max: f64_at(76),
            alpha1: f64_at(84),
            alpha2: f64_at(92),
            tdc_mode,
        };
        Ok(StreamHeader {
            machine,
            params,
            omega: f64_at(100),
            duration: f64_at(108),
            c_max: f64_at(116),
            energy: f64_at(124),
            source,
            n_events: u64_at(132),
            plan_checksum: u64_at(140),
        })
    }
}

/// Field widths in force for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordWidths {
    pub eta: u32,
    pub residual: u32,
    pub rho: u32,
    pub has_flag: bool,
    pub has_bias: bool,
}

/// One serialized sample: optional change flag, segment index present only
/// when it changed, the residual code, and the bias code for the next
/// interval on adaptive machines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleRecord {
    pub flag: Option<bool>,
    pub segment: Option<u32>,
    pub t_code: u32,
    pub bias_code: Option<u32>,
    pub widths: RecordWidths,
}

/// Bit ledger split by field kind. `total_fields` counts segment, residual,
/// and bias bits only; `total_self_delim` adds the one-bit change flags that
/// make the stream parseable without a side channel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BitAccount {
    pub n_samples: u64,
    /// Segment emissions, counting the initial one.
    pub n_switches: u64,
    pub bits_segments: u64,
    pub bits_residuals: u64,
    pub bits_bias: u64,
    pub bits_flags: u64,
    pub total_fields: u64,
    pub total_self_delim: u64,
}

/// Tally field bits across records.
pub fn count_bits_empirical(records: &[SampleRecord]) -> BitAccount {
    let mut acc = BitAccount::default();
    for r in records {
        acc.n_samples += 1;
        if r.flag == Some(true) {
            acc.n_switches += 1;
            acc.bits_segments += r.widths.eta as u64;
        }
        acc.bits_residuals += r.widths.residual as u64;
        if r.widths.has_bias {
            acc.bits_bias += r.widths.rho as u64;
        }
        if r.widths.has_flag {
            acc.bits_flags += 1;
        }
    }
    acc.total_fields = acc.bits_segments + acc.bits_residuals + acc.bits_bias;
    acc.total_self_delim = acc.total_fields + acc.bits_flags;
    acc
}

/// Pack header and records into the stream layout. Fails if any field value
/// exceeds its declared width.
pub fn serialize(header: &StreamHeader, records: &[SampleRecord]) -> Result<Vec<u8>> {
    let mut out = header.to_bytes();
    let mut w = BitWriter::new();
    for r in records {
        if let Some(flag) = r.flag {
            w.write(flag as u64, 1)?;
            if flag {
                let seg = r.segment.ok_or_else(|| {
                    CodecError::Corrupt("flagged record without a segment".into())
                })?;
                w.write(seg as u64, r.widths.eta)?;
            }
        }
        w.write(r.t_code as u64, r.widths.residual)?;
        if r.widths.has_bias {
            let code = r
                .bias_code
                .ok_or_else(|| CodecError::Corrupt("adaptive record without a bias code".into()))?;
            w.write(code as u64, r.widths.rho)?;
        }
    }
    out.extend_from_slice(&w.into_bytes());
    Ok(out)
}

/// FNV-1a accumulator for the plan/width mirror digest.
#[derive(Debug, Clone, Copy)]
pub struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv64 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn widths_compressed() -> RecordWidths {
        RecordWidths { eta: 2, residual: 6, rho: 2, has_flag: true, has_bias: true }
    }

    fn header_fixture() -> StreamHeader {
        StreamHeader {
            machine: Machine::Acif,
            params: CodecParams::default(),
            omega: 2.0 * std::f64::consts::PI * 10.0,
            duration: 0.5,
            c_max: 1.01,
            energy: 0.21,
            source: SourceTag::Synthetic { seed: 7, m_half_terms: 2 },
            n_events: 3,
            plan_checksum: 0xdead_beef,
        }
    }

    #[test]
    fn header_roundtrips_losslessly() {
        let h = header_fixture();
        let bytes = h.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN);
        let back = StreamHeader::from_bytes(&bytes).unwrap();
        assert_eq!(h, back);
    }

    #[test]
    fn header_rejects_bad_magic_and_truncation() {
        let mut bytes = header_fixture().to_bytes();
        assert!(StreamHeader::from_bytes(&bytes[..100]).is_err());
        bytes[0] = b'X';
        assert!(StreamHeader::from_bytes(&bytes).is_err());
    }

    #[test]
    fn empty_record_list_serializes_to_header_only() {
        let h = header_fixture();
        let bytes = serialize(&h, &[]).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN);
    }

    #[test]
    fn change_only_rule_emits_segment_once() {
        let w = widths_compressed();
        let records = vec![
            SampleRecord { flag: Some(true), segment: Some(1), t_code: 10, bias_code: Some(0), widths: w },
            SampleRecord { flag: Some(false), segment: None, t_code: 11, bias_code: Some(1), widths: w },
            SampleRecord { flag: Some(false), segment: None, t_code: 12, bias_code: Some(2), widths: w },
        ];
        let acc = count_bits_empirical(&records);
        assert_eq!(acc.n_switches, 1);
        assert_eq!(acc.bits_segments, 2);
        assert_eq!(acc.bits_flags, 3);
        assert_eq!(acc.total_self_delim - acc.total_fields, acc.n_samples);

        // Bit-level: 1+2 + 6+2 for the first record, 1 + 6+2 for the rest.
        let bytes = serialize(&header_fixture(), &records).unwrap();
        let payload_bits = (11 + 9 + 9) as usize;
        assert_eq!(bytes.len(), HEADER_LEN + payload_bits.div_ceil(8));
    }

    #[test]
    fn ledger_matches_hand_arithmetic() {
        // 1000 samples at K=256, eta=2, rho=2, 100 segment emissions:
        // fields = 2*100 + 1000*6 + 1000*2 = 8200.
        let w = widths_compressed();
        let mut records = Vec::new();
        for i in 0..1000u32 {
            let switch = i % 10 == 0;
            records.push(SampleRecord {
                flag: Some(switch),
                segment: switch.then_some(1),
                t_code: 3,
                bias_code: Some(1),
                widths: w,
            });
        }
        let acc = count_bits_empirical(&records);
        assert_eq!(acc.n_switches, 100);
        assert_eq!(acc.total_fields, 8200);
        assert_eq!(acc.total_self_delim, 9200);
    }

    #[test]
    fn fixed_machine_pays_no_bias_bits() {
        let w = RecordWidths { eta: 0, residual: 8, rho: 0, has_flag: false, has_bias: false };
        let records = vec![SampleRecord { flag: None, segment: None, t_code: 200, bias_code: None, widths: w }; 10];
        let acc = count_bits_empirical(&records);
        assert_eq!(acc.bits_bias, 0);
        assert_eq!(acc.bits_flags, 0);
        assert_eq!(acc.total_fields, 80);
        assert_eq!(acc.total_self_delim, 80);
    }

    #[test]
    fn serialize_rejects_overflow() {
        let w = widths_compressed();
        let records = vec![SampleRecord {
            flag: Some(true),
            segment: Some(9),
            t_code: 0,
            bias_code: Some(0),
            widths: w,
        }];
        assert!(matches!(
            serialize(&header_fixture(), &records),
            Err(CodecError::WidthOverflow { .. })
        ));
    }
}
