//! Fibonacci LFSR over an arbitrary-degree register.
//!
//! The register holds the window `s[t], s[t+1], .., s[t+n-1]` of the
//! sequence, with `s[t]` in bit 0 of word 0. A step emits `s[t]` and appends
//! `s[t+n] = s[t] ^ s[t+e1] ^ s[t+e2] ..` where `e1, e2, ..` are the
//! non-leading exponents of the characteristic polynomial
//! `x^n + x^e1 + x^e2 + .. + 1`.

use crate::error::{Error, Result};

/// Exponents of `x^256 + x^10 + x^5 + x^2 + 1`, a primitive pentanomial.
/// Primitivity is checked in the crate tests against the full factorisation
/// of `2^256 - 1`.
pub const DEFAULT_TAPS: [usize; 4] = [256, 10, 5, 2];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lfsr {
    degree: usize,
    /// Feedback offsets into the window; always starts with 0.
    offsets: Vec<usize>,
    words: Vec<u64>,
    /// All offsets are at most `degree - 64`, so 64 bits can be produced at once.
    wide: bool,
    steps: u64,
}

impl Lfsr {
    /// Builds an LFSR from tap exponents (leading exponent included, the
    /// implicit constant term excluded) and the initial register contents.
    pub fn new(taps: &[usize], register: impl IntoIterator<Item = bool>) -> Result<Self> {
        let degree = *taps
            .iter()
            .max()
            .ok_or_else(|| Error::InvalidTaps("empty tap list".into()))?;
        if degree < 2 {
            return Err(Error::InvalidTaps(format!("degree {degree} < 2")));
        }
        let mut offsets = vec![0usize];
        for &e in taps {
            if e == degree || e == 0 {
                continue;
            }
            if offsets.contains(&e) {
                return Err(Error::InvalidTaps(format!("duplicate exponent {e}")));
            }
            offsets.push(e);
        }
        offsets.sort_unstable();
        let nwords = degree.div_ceil(64);
        let mut words = vec![0u64; nwords];
        let mut count = 0;
        for (i, bit) in register.into_iter().enumerate() {
            if i >= degree {
                // Fold any surplus seed material back onto the register.
                let j = i % degree;
                words[j / 64] ^= (bit as u64) << (j % 64);
            } else if bit {
                words[i / 64] |= 1 << (i % 64);
            }
            count = i + 1;
        }
        if count < degree {
            return Err(Error::Shape {
                expected: degree,
                got: count,
            });
        }
        if words.iter().all(|&w| w == 0) {
            return Err(Error::DegenerateState);
        }
        let wide = degree >= 64 && offsets.iter().all(|&o| o + 64 <= degree);
        Ok(Self {
            degree,
            offsets,
            words,
            wide,
            steps: 0,
        })
    }

    /// Register from the low `degree` bits of `value` (bit `i` is cell `i`).
    pub fn from_u64(taps: &[usize], value: u64) -> Result<Self> {
        let degree = taps.iter().copied().max().unwrap_or(0);
        if degree > 64 {
            return Err(Error::InvalidTaps(format!(
                "degree {degree} does not fit a u64 register"
            )));
        }
        Self::new(taps, (0..degree).map(|i| (value >> i) & 1 == 1))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of bits emitted so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Low 64 register cells.
    pub fn register_u64(&self) -> u64 {
        self.words[0]
    }

    pub fn register_bits(&self) -> Vec<bool> {
        (0..self.degree).map(|i| self.bit(i)).collect()
    }

    #[inline]
    fn bit(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    /// 64 window bits starting at `offset`; requires `offset + 64 <= degree`.
    #[inline]
    fn window64(&self, offset: usize) -> u64 {
        let (w, b) = (offset / 64, offset % 64);
        if b == 0 {
            self.words[w]
        } else {
            (self.words[w] >> b) | (self.words[w + 1] << (64 - b))
        }
    }

    /// Emits one sequence bit. The feedback always includes `s[t]`, so the
    /// step is invertible and a non-zero register can never reach zero.
    #[inline]
    pub fn next_bit(&mut self) -> bool {
        let out = self.words[0] & 1 == 1;
        let fb = self.offsets.iter().fold(false, |acc, &o| acc ^ self.bit(o));
        let n = self.words.len();
        for i in 0..n - 1 {
            self.words[i] = (self.words[i] >> 1) | (self.words[i + 1] << 63);
        }
        self.words[n - 1] >>= 1;
        let top = self.degree - 1;
        self.words[top / 64] |= (fb as u64) << (top % 64);
        self.steps += 1;
        out
    }

    /// Emits the next 64 sequence bits, first bit in the LSB.
    pub fn next_u64(&mut self) -> u64 {
        if !self.wide {
            let mut word = 0u64;
            for i in 0..64 {
                word |= (self.next_bit() as u64) << i;
            }
            return word;
        }
        let out = self.words[0];
        let fresh = self.offsets.iter().fold(0u64, |acc, &o| acc ^ self.window64(o));
        let n = self.words.len();
        self.words.copy_within(1.., 0);
        self.words[n - 1] = 0;
        let at = self.degree - 64;
        let (w, b) = (at / 64, at % 64);
        self.words[w] |= fresh << b;
        if b != 0 {
            self.words[w + 1] |= fresh >> (64 - b);
        }
        self.steps += 64;
        out
    }
}
