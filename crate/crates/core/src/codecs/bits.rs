//! Packed binary codes and Hamming distance.

use crate::error::{shape, Result};

/// A fixed-length bit string. Bit `i` lives in bit `i % 8` of byte `i / 8`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryCode {
    bytes: Vec<u8>,
    len: usize,
}

impl BinaryCode {
    pub fn zeros(len: usize) -> Self {
        Self {
            bytes: vec![0; len.div_ceil(8)],
            len,
        }
    }

    pub fn from_bits(bits: impl IntoIterator<Item = bool>) -> Self {
        let mut bytes = Vec::new();
        let mut len = 0;
        for bit in bits {
            if len % 8 == 0 {
                bytes.push(0);
            }
            if bit {
                bytes[len / 8] |= 1 << (len % 8);
            }
            len += 1;
        }
        Self { bytes, len }
    }

    /// Wraps packed bytes. Padding bits past `len` must be zero.
    pub fn from_bytes(bytes: Vec<u8>, len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(shape(format!(
                "{len} bits need {} bytes, got {}",
                len.div_ceil(8),
                bytes.len()
            )));
        }
        if !len.is_multiple_of(8) {
            let tail = bytes[bytes.len() - 1] >> (len % 8);
            if tail != 0 {
                return Err(crate::Error::Corruption("non-zero padding bits".into()));
            }
        }
        Ok(Self { bytes, len })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.bytes[i / 8] >> (i % 8) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        if value {
            self.bytes[i / 8] |= 1 << (i % 8);
        } else {
            self.bytes[i / 8] &= !(1 << (i % 8));
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Complement of every bit.
    pub fn not(&self) -> Self {
        let mut out = Self::zeros(self.len);
        for i in 0..self.len {
            out.set(i, !self.get(i));
        }
        out
    }
}

/// Popcount of `a XOR b`.
pub fn hamming_distance(a: &BinaryCode, b: &BinaryCode) -> Result<u32> {
    if a.len != b.len {
        return Err(shape(format!(
            "Hamming distance between codes of {} and {} bits",
            a.len, b.len
        )));
    }
    Ok(hamming_unchecked(&a.bytes, &b.bytes))
}

#[inline]
pub(crate) fn hamming_unchecked(a: &[u8], b: &[u8]) -> u32 {
    let mut chunks_a = a.chunks_exact(8);
    let mut chunks_b = b.chunks_exact(8);
    let mut total = 0;
    for (x, y) in chunks_a.by_ref().zip(chunks_b.by_ref()) {
        let x = u64::from_le_bytes(x.try_into().unwrap());
        let y = u64::from_le_bytes(y.try_into().unwrap());
        total += (x ^ y).count_ones();
    }
    for (x, y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
        total += (x ^ y).count_ones();
    }
    total
}
