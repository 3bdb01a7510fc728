use crate::error::{CodecError, Result};

/// MSB-first bit packer.
#[derive(Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    /// Free bits remaining in the trailing byte.
    used: u32,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bit_len(&self) -> u64 {
        self.bytes.len() as u64 * 8 - self.used as u64
    }

    pub fn write(&mut self, value: u64, width: u32) -> Result<()> {
        if width == 0 {
            return Ok(());
        }
        if width > 64 || (width < 64 && value >> width != 0) {
            return Err(CodecError::WidthOverflow { value, width });
        }
        for i in (0..width).rev() {
            let bit = ((value >> i) & 1) as u8;
            if self.used == 0 {
                self.bytes.push(0);
                self.used = 8;
            }
            self.used -= 1;
            *self.bytes.last_mut().unwrap() |= bit << self.used;
        }
        Ok(())
    }

    /// Final byte-padded buffer.
    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// MSB-first bit reader over a byte slice.
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    pub fn bits_left(&self) -> u64 {
        self.bytes.len() as u64 * 8 - self.pos
    }

    pub fn read(&mut self, width: u32) -> Result<u64> {
        if width == 0 {
            return Ok(0);
        }
        if self.bits_left() < width as u64 {
            return Err(CodecError::Corrupt(format!(
                "stream truncated: wanted {width} bits, {} left",
                self.bits_left()
            )));
        }
        let mut value = 0u64;
        for _ in 0..width {
            let byte = self.bytes[(self.pos / 8) as usize];
            let bit = (byte >> (7 - (self.pos % 8))) & 1;
            value = (value << 1) | bit as u64;
            self.pos += 1;
        }
        Ok(value)
    }
}
