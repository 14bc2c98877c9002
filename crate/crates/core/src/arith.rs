//! 32-bit binary arithmetic coder with E1/E2/E3 renormalization.
//!
//! Interval arithmetic follows the classic Witten-Neal-Cleary coder:
//! inclusive `[low, high]` registers, bits emitted MSB first, and E3
//! underflow handled by counting pending opposite bits instead of
//! propagating carries.

use crate::prob::{CumFreqTable, FREQ_TOTAL};

const TOP: u64 = 0xFFFF_FFFF;
const HALF: u64 = 0x8000_0000;
const QUARTER: u64 = 0x4000_0000;
const THREE_QUARTERS: u64 = 0xC000_0000;

/// The decoder may read this many zero bits past the end of the payload
/// before the stream counts as exhausted. A well-formed stream never needs
/// more than 30.
const MAX_TRAILING_BITS: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("arithmetic-coded payload exhausted")]
pub struct StreamExhausted;

#[derive(Debug, Default)]
struct BitWriter {
    out: Vec<u8>,
    acc: u8,
    nbits: u8,
}

impl BitWriter {
    #[inline]
    fn put(&mut self, bit: bool) {
        self.acc = (self.acc << 1) | bit as u8;
        self.nbits += 1;
        if self.nbits == 8 {
            self.out.push(self.acc);
            self.acc = 0;
            self.nbits = 0;
        }
    }

    fn bit_len(&self) -> u64 {
        self.out.len() as u64 * 8 + self.nbits as u64
    }

    fn into_bytes(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            self.acc <<= 8 - self.nbits;
            self.out.push(self.acc);
        }
        self.out
    }
}

#[derive(Debug)]
pub struct Encoder {
    low: u64,
    high: u64,
    pending: u64,
    out: BitWriter,
}

impl Default for Encoder {
    fn default() -> Self {
        Self::new()
    }
}

impl Encoder {
    pub fn new() -> Self {
        Encoder {
            low: 0,
            high: TOP,
            pending: 0,
            out: BitWriter::default(),
        }
    }

    #[inline]
    fn emit(&mut self, bit: bool) {
        self.out.put(bit);
        while self.pending > 0 {
            self.out.put(!bit);
            self.pending -= 1;
        }
    }

    pub fn encode(&mut self, table: &CumFreqTable, s: u8) {
        let range = self.high - self.low + 1;
        let total = FREQ_TOTAL as u64;
        self.high = self.low + range * table.high(s) as u64 / total - 1;
        self.low += range * table.low(s) as u64 / total;
        debug_assert!(self.low <= self.high, "range collapse");
        loop {
            if self.high < HALF {
                self.emit(false);
            } else if self.low >= HALF {
                self.emit(true);
                self.low -= HALF;
                self.high -= HALF;
            } else if self.low >= QUARTER && self.high < THREE_QUARTERS {
                self.pending += 1;
                self.low -= QUARTER;
                self.high -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
        }
        debug_assert!(self.high - self.low >= QUARTER);
    }

    /// Bits emitted so far, pending E3 bits excluded.
    pub fn bits_written(&self) -> u64 {
        self.out.bit_len()
    }

    /// Emits two disambiguating bits (plus any pending ones) selecting a
    /// point inside the final interval, then pads to a byte with zeros.
    pub fn finish(mut self) -> Vec<u8> {
        self.pending += 1;
        if self.low < QUARTER {
            self.emit(false);
        } else {
            self.emit(true);
        }
        self.out.into_bytes()
    }
}

#[derive(Debug)]
pub struct Decoder<'a> {
    low: u64,
    high: u64,
    value: u64,
    input: &'a [u8],
    bitpos: u64,
}

impl<'a> Decoder<'a> {
    pub fn new(input: &'a [u8]) -> Result<Self, StreamExhausted> {
        let mut d = Decoder {
            low: 0,
            high: TOP,
            value: 0,
            input,
            bitpos: 0,
        };
        for _ in 0..32 {
            d.value = (d.value << 1) | d.next_bit()? as u64;
        }
        Ok(d)
    }

    #[inline]
    fn next_bit(&mut self) -> Result<bool, StreamExhausted> {
        let byte = (self.bitpos >> 3) as usize;
        let bit = if byte < self.input.len() {
            (self.input[byte] >> (7 - (self.bitpos & 7))) & 1 == 1
        } else {
            if self.bitpos >= self.input.len() as u64 * 8 + MAX_TRAILING_BITS {
                return Err(StreamExhausted);
            }
            false
        };
        self.bitpos += 1;
        Ok(bit)
    }

    pub fn decode(&mut self, table: &CumFreqTable) -> Result<u8, StreamExhausted> {
        let range = self.high - self.low + 1;
        let total = FREQ_TOTAL as u64;
        let target = ((self.value - self.low + 1) * total - 1) / range;
        let s = table.symbol_for(target as u32);
        self.high = self.low + range * table.high(s) as u64 / total - 1;
        self.low += range * table.low(s) as u64 / total;
        loop {
            if self.high < HALF {
            } else if self.low >= HALF {
                self.low -= HALF;
                self.high -= HALF;
                self.value -= HALF;
            } else if self.low >= QUARTER && self.high < THREE_QUARTERS {
                self.low -= QUARTER;
                self.high -= QUARTER;
                self.value -= QUARTER;
            } else {
                break;
            }
            self.low <<= 1;
            self.high = (self.high << 1) | 1;
            self.value = (self.value << 1) | self.next_bit()? as u64;
        }
        Ok(s)
    }
}
