//! Systematic Reed-Solomon code over GF(2^8).
//!
//! Field polynomial `x^8 + x^4 + x^3 + x^2 + 1` (0x11d); generator roots
//! `a^0 .. a^(n-k-1)`. Codeword byte `i` is the coefficient of `x^(n-1-i)`,
//! so the data bytes come first and the parity bytes last.

use crate::error::{Error, Result};

const FIELD_POLY: u16 = 0x11d;

struct Gf256 {
    exp: [u8; 512],
    log: [u8; 256],
}

const GF: Gf256 = {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        log[x as usize] = i as u8;
        x <<= 1;
        if x & 0x100 != 0 {
            x ^= FIELD_POLY;
        }
        i += 1;
    }
    while i < 512 {
        exp[i] = exp[i - 255];
        i += 1;
    }
    Gf256 { exp, log }
};

#[inline]
fn mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        0
    } else {
        GF.exp[GF.log[a as usize] as usize + GF.log[b as usize] as usize]
    }
}

#[inline]
fn div(a: u8, b: u8) -> u8 {
    debug_assert!(b != 0);
    if a == 0 {
        0
    } else {
        GF.exp[GF.log[a as usize] as usize + 255 - GF.log[b as usize] as usize]
    }
}

#[inline]
fn alpha_pow(e: usize) -> u8 {
    GF.exp[e % 255]
}

/// Horner evaluation, coefficients highest degree first.
fn eval_high_first(poly: &[u8], x: u8) -> u8 {
    poly.iter().fold(0, |acc, &c| mul(acc, x) ^ c)
}

/// Evaluation with coefficients lowest degree first.
fn eval_low_first(poly: &[u8], x: u8) -> u8 {
    poly.iter().rev().fold(0, |acc, &c| mul(acc, x) ^ c)
}

#[derive(Debug, Clone)]
pub struct ReedSolomon {
    n: usize,
    k: usize,
    /// Generator polynomial, highest degree first, monic.
    generator: Vec<u8>,
}

/// Result of a successful decode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RsDecoded {
    pub data: Vec<u8>,
    pub corrected: usize,
}

impl ReedSolomon {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n > 255 || k == 0 || k >= n || !(n - k).is_multiple_of(2) {
            return Err(Error::Config(format!("unsupported RS({n},{k})")));
        }
        let mut generator = vec![1u8];
        for i in 0..n - k {
            // multiply by (x - a^i)
            let root = alpha_pow(i);
            let mut next = vec![0u8; generator.len() + 1];
            for (j, &g) in generator.iter().enumerate() {
                next[j] ^= g;
                next[j + 1] ^= mul(g, root);
            }
            generator = next;
        }
        Ok(Self { n, k, generator })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Correctable symbol errors per codeword.
    pub fn t(&self) -> usize {
        (self.n - self.k) / 2
    }

    pub fn encode(&self, data: &[u8]) -> Result<Vec<u8>> {
        if data.len() != self.k {
            return Err(Error::Shape {
                expected: self.k,
                got: data.len(),
            });
        }
        let nparity = self.n - self.k;
        let mut remainder = vec![0u8; nparity];
        for &d in data {
            let factor = d ^ remainder[0];
            remainder.rotate_left(1);
            remainder[nparity - 1] = 0;
            if factor != 0 {
                for (r, &g) in remainder.iter_mut().zip(&self.generator[1..]) {
                    *r ^= mul(g, factor);
                }
            }
        }
        let mut word = data.to_vec();
        word.extend_from_slice(&remainder);
        Ok(word)
    }

    fn syndromes(&self, word: &[u8]) -> Vec<u8> {
        (0..self.n - self.k)
            .map(|j| eval_high_first(word, alpha_pow(j)))
            .collect()
    }

    pub fn decode(&self, word: &[u8]) -> Result<RsDecoded> {
        if word.len() != self.n {
            return Err(Error::Shape {
                expected: self.n,
                got: word.len(),
            });
        }
        let synd = self.syndromes(word);
        if synd.iter().all(|&s| s == 0) {
            return Ok(RsDecoded {
                data: word[..self.k].to_vec(),
                corrected: 0,
            });
        }
        let locator = berlekamp_massey(&synd);
        let nerr = locator.len() - 1;
        if nerr > self.t() {
            return Err(Error::RsDecodeFailure);
        }
        // Chien search over the n codeword positions.
        let mut positions = Vec::with_capacity(nerr);
        for i in 0..self.n {
            let power = self.n - 1 - i;
            let x_inv = alpha_pow(255 - power % 255);
            if eval_low_first(&locator, x_inv) == 0 {
                positions.push(i);
            }
        }
        if positions.len() != nerr {
            return Err(Error::RsDecodeFailure);
        }
        // Forney with first consecutive root a^0: e = X * Omega(X^-1) / Lambda'(X^-1).
        let nsyn = synd.len();
        let mut omega = vec![0u8; nsyn];
        for (i, &s) in synd.iter().enumerate() {
            for (j, &l) in locator.iter().enumerate() {
                if i + j < nsyn {
                    omega[i + j] ^= mul(s, l);
                }
            }
        }
        let derivative: Vec<u8> = locator
            .iter()
            .enumerate()
            .skip(1)
            .map(|(j, &l)| if j % 2 == 1 { l } else { 0 })
            .collect();
        let mut fixed = word.to_vec();
        for &i in &positions {
            let power = self.n - 1 - i;
            let x = alpha_pow(power);
            let x_inv = alpha_pow(255 - power % 255);
            let denom = eval_low_first(&derivative, x_inv);
            if denom == 0 {
                return Err(Error::RsDecodeFailure);
            }
            let magnitude = mul(x, div(eval_low_first(&omega, x_inv), denom));
            fixed[i] ^= magnitude;
        }
        if self.syndromes(&fixed).iter().any(|&s| s != 0) {
            return Err(Error::RsDecodeFailure);
        }
        Ok(RsDecoded {
            data: fixed[..self.k].to_vec(),
            corrected: nerr,
        })
    }
}

/// Error locator polynomial, lowest degree first, trimmed to its degree.
fn berlekamp_massey(synd: &[u8]) -> Vec<u8> {
    let mut c = vec![0u8; synd.len() + 1];
    let mut b = vec![0u8; synd.len() + 1];
    c[0] = 1;
    b[0] = 1;
    let mut len = 0usize;
    let mut shift = 1usize;
    let mut last = 1u8;
    for n in 0..synd.len() {
        let mut d = synd[n];
        for i in 1..=len {
            d ^= mul(c[i], synd[n - i]);
        }
        if d == 0 {
            shift += 1;
            continue;
        }
        let coef = div(d, last);
        let prev = c.clone();
        for i in 0..c.len() - shift {
            c[i + shift] ^= mul(coef, b[i]);
        }
        if 2 * len <= n {
            len = n + 1 - len;
            b = prev;
            last = d;
            shift = 1;
        } else {
            shift += 1;
        }
    }
    c.truncate(len + 1);
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn code() -> ReedSolomon {
        ReedSolomon::new(255, 223).unwrap()
    }

    fn corrupt(word: &mut [u8], count: usize, rng: &mut ChaCha8Rng) {
        for pos in rand::seq::index::sample(rng, word.len(), count) {
            word[pos] ^= rng.random_range(1..=255u8);
        }
    }

    #[test]
    fn field_tables_are_consistent() {
        for a in 1..=255u8 {
            assert_eq!(mul(a, div(1, a)), 1);
        }
        assert_eq!(mul(0x80, 2), (FIELD_POLY & 0xff) as u8);
    }

    #[test]
    fn zero_data_encodes_to_zero_word() {
        assert_eq!(code().encode(&[0u8; 223]).unwrap(), vec![0u8; 255]);
    }

    #[test]
    fn codewords_have_zero_syndrome() {
        let rs = code();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<u8> = (0..223).map(|_| rng.random()).collect();
        let word = rs.encode(&data).unwrap();
        assert_eq!(&word[..223], &data[..]);
        assert!(rs.syndromes(&word).iter().all(|&s| s == 0));
    }

    #[test]
    fn wrong_lengths() {
        assert!(matches!(code().encode(&[0u8; 10]), Err(Error::Shape { .. })));
        assert!(matches!(code().decode(&[0u8; 254]), Err(Error::Shape { .. })));
        assert!(ReedSolomon::new(255, 224).is_err());
    }

    #[test]
    fn clean_and_single_error_words() {
        let rs = code();
        let data: Vec<u8> = (0..223).map(|i| (i * 37 % 251) as u8).collect();
        let word = rs.encode(&data).unwrap();
        assert_eq!(
            rs.decode(&word).unwrap(),
            RsDecoded {
                data: data.clone(),
                corrected: 0
            }
        );
        for pos in [0, 100, 222, 223, 254] {
            let mut bad = word.clone();
            bad[pos] ^= 0x5c;
            let out = rs.decode(&bad).unwrap();
            assert_eq!(out.data, data);
            assert_eq!(out.corrected, 1);
        }
    }

    #[test]
    fn corrects_up_to_sixteen_symbols() {
        let rs = code();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for nerr in [2, 8, 15, 16] {
            for _ in 0..50 {
                let data: Vec<u8> = (0..223).map(|_| rng.random()).collect();
                let mut word = rs.encode(&data).unwrap();
                corrupt(&mut word, nerr, &mut rng);
                let out = rs.decode(&word).unwrap();
                assert_eq!(out.data, data);
                assert_eq!(out.corrected, nerr);
            }
        }
    }

    #[test]
    fn seventeen_errors_are_reported() {
        let rs = code();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut failures = 0;
        for _ in 0..200 {
            let data: Vec<u8> = (0..223).map(|_| rng.random()).collect();
            let mut word = rs.encode(&data).unwrap();
            corrupt(&mut word, 17, &mut rng);
            if let Err(Error::RsDecodeFailure) = rs.decode(&word) {
                failures += 1;
            }
        }
        // Miscorrection of a random 17-error word has probability ~1/16!.
        assert_eq!(failures, 200);
    }
}
