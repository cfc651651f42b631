//! Packed binary strings.
//!
//! `BitString` is the universal payload of the engine: source and destination
//! files, pivots, gaps, syndromes and parity all travel as bit strings. Bits
//! are stored packed, MSB-first within each byte, which makes the on-disk
//! format (see [`BitString::write_packed`]) a plain dump of the storage.

use std::fmt;
use std::io::{Read, Write};
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// A binary string of arbitrary length, packed 8 bits per byte, MSB first.
///
/// Unused trailing bits of the last byte are kept at zero so that derived
/// equality and hashing work on the raw bytes.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitString {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    /// All-zero string of the given length.
    pub fn zeros(len: usize) -> Self {
        BitString {
            bytes: vec![0u8; len.div_ceil(8)],
            len,
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut s = BitString::with_capacity(bits.len());
        for &b in bits {
            s.push(b);
        }
        s
    }

    /// Uniform random bits from the given generator.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut s = BitString::with_capacity(len);
        for _ in 0..len {
            s.push(rng.random::<bool>());
        }
        s
    }

    /// Independent Bernoulli(p) bits; `p` must lie in `[0, 1]`.
    pub fn bernoulli<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Self {
        let mut s = BitString::with_capacity(len);
        for _ in 0..len {
            s.push(rng.random_bool(p));
        }
        s
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range (len {})", self.len);
        (self.bytes[i / 8] >> (7 - (i % 8))) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range (len {})", self.len);
        let mask = 1u8 << (7 - (i % 8));
        if bit {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            let i = self.len;
            self.bytes[i / 8] |= 1u8 << (7 - (i % 8));
        }
        self.len += 1;
    }

    /// Append `width` bits of `value`, most significant first.
    pub fn push_uint(&mut self, value: u64, width: usize) {
        assert!(width <= 64);
        debug_assert!(width == 64 || value < (1u64 << width), "value does not fit width");
        for k in (0..width).rev() {
            self.push((value >> k) & 1 == 1);
        }
    }

    pub fn extend_from(&mut self, other: &BitString) {
        for b in other.iter() {
            self.push(b);
        }
    }

    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a BitString>) -> BitString {
        let mut out = BitString::new();
        for p in parts {
            out.extend_from(p);
        }
        out
    }

    /// Copy of the bits in `range` (half-open, 0-based).
    pub fn slice(&self, range: Range<usize>) -> BitString {
        assert!(range.start <= range.end && range.end <= self.len, "slice out of range");
        let mut out = BitString::with_capacity(range.len());
        for i in range {
            out.push(self.get(i));
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Number of positions where the two strings differ. Lengths must match.
    pub fn hamming(&self, other: &BitString) -> usize {
        assert_eq!(self.len, other.len, "hamming distance needs equal lengths");
        self.bytes
            .iter()
            .zip(&other.bytes)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.len, other.len, "xor needs equal lengths");
        BitString {
            bytes: self.bytes.iter().zip(&other.bytes).map(|(a, b)| a ^ b).collect(),
            len: self.len,
        }
    }

    /// The `width` bits starting at `start`, as an integer (MSB first).
    /// Used as an exact multimap key for occurrence search; `width <= 64`.
    pub fn window_uint(&self, start: usize, width: usize) -> u64 {
        assert!(width <= 64 && start + width <= self.len);
        let mut v = 0u64;
        for i in start..start + width {
            v = (v << 1) | self.get(i) as u64;
        }
        v
    }

    /// Raw packed bytes (MSB-first, trailing pad bits zero).
    pub fn packed_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Packed bit-file format: 8-byte little-endian bit count, then
    /// ceil(len/8) bytes, MSB-first within each byte.
    pub fn write_packed<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&(self.len as u64).to_le_bytes())?;
        w.write_all(&self.bytes)?;
        Ok(())
    }

    pub fn read_packed<R: Read>(r: &mut R) -> Result<BitString> {
        let mut header = [0u8; 8];
        r.read_exact(&mut header)
            .map_err(|e| Error::BadFormat(format!("missing bit-count header: {e}")))?;
        let len = u64::from_le_bytes(header);
        // cap well above any plausible input so a corrupt header cannot
        // demand an absurd allocation
        if len > 1 << 43 {
            return Err(Error::BadFormat(format!("implausible bit count {len}")));
        }
        let len = len as usize;
        let nbytes = len.div_ceil(8);
        let mut bytes = vec![0u8; nbytes];
        r.read_exact(&mut bytes)
            .map_err(|e| Error::BadFormat(format!("truncated payload (want {nbytes} bytes): {e}")))?;
        if !len.is_multiple_of(8) {
            let pad_mask = 0xffu8 >> (len % 8);
            if bytes[nbytes - 1] & pad_mask != 0 {
                return Err(Error::BadFormat("nonzero padding bits".into()));
            }
        }
        Ok(BitString { bytes, len })
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 64 {
            write!(f, "BitString({self})")
        } else {
            write!(f, "BitString(len={}, {}...)", self.len, self.slice(0..64))
        }
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut out = BitString::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => out.push(false),
                '1' => out.push(true),
                _ => return Err(Error::InvalidArgument(format!("bad bit char {c:?}"))),
            }
        }
        Ok(out)
    }
}

/// Sequential reader over a `BitString`, used to parse message payloads.
pub struct BitCursor<'a> {
    bits: &'a BitString,
    pos: usize,
}

impl<'a> BitCursor<'a> {
    pub fn new(bits: &'a BitString) -> Self {
        BitCursor { bits, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_uint(&mut self, width: usize) -> Result<u64> {
        if width > 64 || self.remaining() < width {
            return Err(Error::InvalidArgument(format!(
                "payload underrun: want {width} bits, have {}",
                self.remaining()
            )));
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.bits.get(self.pos) as u64;
            self.pos += 1;
        }
        Ok(v)
    }

    pub fn read_bits(&mut self, count: usize) -> Result<BitString> {
        if self.remaining() < count {
            return Err(Error::InvalidArgument(format!(
                "payload underrun: want {count} bits, have {}",
                self.remaining()
            )));
        }
        let out = self.bits.slice(self.pos..self.pos + count);
        self.pos += count;
        Ok(out)
    }

    pub fn expect_end(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} unexpected trailing payload bits",
                self.remaining()
            )));
        }
        Ok(())
    }
}
