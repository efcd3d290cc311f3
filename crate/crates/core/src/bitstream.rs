//! Packed stochastic bit-streams and the measurements taken on them.
//!
//! A [`BitStream`] of length `N` encodes the probability `ones / N`. The same
//! packed type is used for crossbar rows and latch contents, where it is just
//! a bit vector with one bit per column.

use std::fmt;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Ordered sequence of `N >= 1` bits, packed LSB-first into `u64` words.
///
/// Bits past `len` in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitStream {
    words: Vec<u64>,
    len: usize,
}

#[inline]
fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitStream {
    /// All-zero stream. Panics on `len == 0`.
    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "bit-stream length must be positive");
        BitStream {
            words: vec![0; words_for(len)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut bs = BitStream {
            words: vec![!0; words_for(len.max(1))],
            len,
        };
        assert!(len > 0, "bit-stream length must be positive");
        bs.clear_tail();
        bs
    }

    /// Builds a stream from packed words; bits beyond `len` are discarded.
    pub fn from_words(mut words: Vec<u64>, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("bit-stream length must be positive"));
        }
        if words.len() < words_for(len) {
            return Err(Error::LengthMismatch {
                left: words.len() * 64,
                right: len,
            });
        }
        words.truncate(words_for(len));
        let mut bs = BitStream { words, len };
        bs.clear_tail();
        Ok(bs)
    }

    pub fn from_bools(bits: &[bool]) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::invalid("bit-stream length must be positive"));
        }
        let mut bs = BitStream::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            bs.set(i, b);
        }
        Ok(bs)
    }

    /// Builds a stream from `len` calls of `f(j)`.
    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut bs = BitStream::zeros(len);
        for j in 0..len {
            if f(j) {
                bs.words[j / 64] |= 1 << (j % 64);
            }
        }
        bs
    }

    /// Parses an ASCII string of `'0'`/`'1'` characters, first character = bit 0.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Format(format!("unexpected character {other:?} in bit-stream"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bools(&bits)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    /// Always false; kept for API symmetry with collections.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| (self.words[i / 64] >> (i % 64)) & 1 == 1)
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Ones density, the value the stream encodes.
    pub fn value(&self) -> f64 {
        self.count_ones() as f64 / self.len as f64
    }

    /// Mask with ones on every valid bit of the last word.
    #[inline]
    fn tail_mask(&self) -> u64 {
        match self.len % 64 {
            0 => !0,
            r => (1u64 << r) - 1,
        }
    }

    #[inline]
    pub(crate) fn clear_tail(&mut self) {
        let mask = self.tail_mask();
        if let Some(last) = self.words.last_mut() {
            *last &= mask;
        }
    }

    pub fn check_same_len(&self, other: &BitStream) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                left: self.len,
                right: other.len,
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &BitStream, f: impl Fn(u64, u64) -> u64) -> Result<BitStream> {
        self.check_same_len(other)?;
        let words = self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect();
        let mut out = BitStream { words, len: self.len };
        out.clear_tail();
        Ok(out)
    }

    pub fn and(&self, other: &BitStream) -> Result<BitStream> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn or(&self, other: &BitStream) -> Result<BitStream> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn xor(&self, other: &BitStream) -> Result<BitStream> {
        self.zip_with(other, |a, b| a ^ b)
    }

    /// Bitwise 3-input majority.
    pub fn maj3(a: &BitStream, b: &BitStream, c: &BitStream) -> Result<BitStream> {
        a.check_same_len(b)?;
        a.check_same_len(c)?;
        let words = a
            .words
            .iter()
            .zip(&b.words)
            .zip(&c.words)
            .map(|((&x, &y), &z)| (x & y) | (x & z) | (y & z))
            .collect();
        Ok(BitStream { words, len: a.len })
    }

    pub fn not(&self) -> BitStream {
        let mut out = BitStream {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        out.clear_tail();
        out
    }

    /// Copy of bits `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<BitStream> {
        if len == 0 || start + len > self.len {
            return Err(Error::OutOfRange {
                what: "slice end",
                value: (start + len) as u64,
                max: self.len as u64,
            });
        }
        if start % 64 == 0 {
            let w0 = start / 64;
            return BitStream::from_words(self.words[w0..w0 + words_for(len)].to_vec(), len);
        }
        Ok(BitStream::from_fn(len, |j| self.get(start + j)))
    }

    /// ASCII rendering, one character per bit, bit 0 first.
    pub fn to_ascii(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    /// Binary dump: 64-bit little-endian bit count, then the bits packed
    /// little-endian within bytes (bit `j` is bit `j % 8` of byte `j / 8`).
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.len as u64).to_le_bytes())?;
        let nbytes = self.len.div_ceil(8);
        let bytes: Vec<u8> = self
            .words
            .iter()
            .flat_map(|word| word.to_le_bytes())
            .take(nbytes)
            .collect();
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<BitStream> {
        let mut header = [0u8; 8];
        r.read_exact(&mut header)?;
        let len = u64::from_le_bytes(header) as usize;
        if len == 0 {
            return Err(Error::Format("zero-length bit-stream in binary dump".into()));
        }
        let mut bytes = vec![0u8; len.div_ceil(8)];
        r.read_exact(&mut bytes)?;
        let words = bytes
            .chunks(8)
            .map(|chunk| {
                let mut buf = [0u8; 8];
                buf[..chunk.len()].copy_from_slice(chunk);
                u64::from_le_bytes(buf)
            })
            .collect();
        BitStream::from_words(words, len)
    }
}

impl fmt::Debug for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 128 {
            write!(f, "BitStream({})", self.to_ascii())
        } else {
            write!(f, "BitStream(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

impl fmt::Display for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_ascii())
    }
}

/// Estimated value of a stream: ones / N.
pub fn estimate_value(bs: &BitStream) -> f64 {
    bs.value()
}

/// Stochastic computing correlation between two equal-length streams.
///
/// +1 means the ones overlap maximally, -1 minimally, 0 independent-looking.
/// A zero denominator (a constant stream) yields 0.
pub fn scc(a: &BitStream, b: &BitStream) -> Result<f64> {
    a.check_same_len(b)?;
    let n = a.len() as f64;
    let pa = a.value();
    let pb = b.value();
    let pab = a.and(b)?.count_ones() as f64 / n;
    let delta = pab - pa * pb;
    let denom = if delta > 0.0 {
        pa.min(pb) - pa * pb
    } else if delta < 0.0 {
        pa * pb - (pa + pb - 1.0).max(0.0)
    } else {
        return Ok(0.0);
    };
    if denom.abs() < 1e-15 {
        return Ok(0.0);
    }
    Ok((delta / denom).clamp(-1.0, 1.0))
}
