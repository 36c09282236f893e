use num_bigint::BigUint;
use thcdma::prbs::{next_slot_set, BitStream, HopKey, Lfsr, DEFAULT_TAPS};

/// Polynomials over GF(2) modulo a fixed polynomial of degree `n`, stored as
/// little-endian u64 words.
struct Gf2Mod {
    n: usize,
    modulus: Vec<u64>,
}

impl Gf2Mod {
    fn new(exponents: &[usize]) -> Self {
        let n = *exponents.iter().max().unwrap();
        let mut modulus = vec![0u64; n / 64 + 1];
        for &e in exponents.iter().chain(std::iter::once(&0)) {
            modulus[e / 64] |= 1 << (e % 64);
        }
        Self { n, modulus }
    }

    fn words(&self) -> usize {
        self.n / 64 + 1
    }

    fn bit(v: &[u64], i: usize) -> bool {
        (v[i / 64] >> (i % 64)) & 1 == 1
    }

    fn shl1(v: &mut [u64]) {
        let mut carry = 0;
        for w in v.iter_mut() {
            let next = *w >> 63;
            *w = (*w << 1) | carry;
            carry = next;
        }
    }

    fn mul(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        let mut acc = vec![0u64; self.words()];
        let mut shifted = a.to_vec();
        for i in 0..self.n {
            if Self::bit(b, i) {
                acc.iter_mut().zip(&shifted).for_each(|(x, y)| *x ^= y);
            }
            Self::shl1(&mut shifted);
            if Self::bit(&shifted, self.n) {
                shifted.iter_mut().zip(&self.modulus).for_each(|(x, y)| *x ^= y);
            }
        }
        acc
    }

    fn x(&self) -> Vec<u64> {
        let mut v = vec![0u64; self.words()];
        v[0] = 2;
        v
    }

    fn one(&self) -> Vec<u64> {
        let mut v = vec![0u64; self.words()];
        v[0] = 1;
        v
    }

    fn pow_x(&self, e: &BigUint) -> Vec<u64> {
        let mut result = self.one();
        let base = self.x();
        for i in (0..e.bits()).rev() {
            result = self.mul(&result, &result);
            if e.bit(i) {
                result = self.mul(&result, &base);
            }
        }
        result
    }

    /// x^(2^k) mod f by repeated squaring.
    fn x_pow_two_pow(&self, k: usize) -> Vec<u64> {
        let mut v = self.x();
        for _ in 0..k {
            v = self.mul(&v, &v);
        }
        v
    }
}

fn degree(v: &[u64]) -> Option<usize> {
    (0..v.len() * 64).rev().find(|&i| (v[i / 64] >> (i % 64)) & 1 == 1)
}

fn poly_gcd(mut a: Vec<u64>, mut b: Vec<u64>) -> Vec<u64> {
    let len = a.len().max(b.len());
    a.resize(len, 0);
    b.resize(len, 0);
    while let Some(db) = degree(&b) {
        while let Some(da) = degree(&a) {
            if da < db {
                break;
            }
            let shift = da - db;
            let mut s = vec![0u64; len];
            for i in 0..=db {
                if (b[i / 64] >> (i % 64)) & 1 == 1 {
                    let j = i + shift;
                    s[j / 64] |= 1 << (j % 64);
                }
            }
            a.iter_mut().zip(&s).for_each(|(x, y)| *x ^= y);
        }
        std::mem::swap(&mut a, &mut b);
    }
    a
}

#[test]
fn default_polynomial_is_primitive() {
    // 2^256 - 1 = F0 F1 ... F7 (Fermat numbers), fully factored.
    let primes: [&str; 11] = [
        "3",
        "5",
        "17",
        "257",
        "641",
        "65537",
        "274177",
        "6700417",
        "67280421310721",
        "59649589127497217",
        "5704689200685129054721",
    ];
    let order = (BigUint::from(1u8) << 256usize) - 1u8;
    let product = primes
        .iter()
        .map(|p| p.parse::<BigUint>().unwrap())
        .fold(BigUint::from(1u8), |acc, p| acc * p);
    assert_eq!(product, order);

    let field = Gf2Mod::new(&DEFAULT_TAPS);
    // Irreducible: x^(2^256) = x and gcd(x^(2^128) - x, f) = 1.
    assert_eq!(field.x_pow_two_pow(256), field.x());
    let mut h = field.x_pow_two_pow(128);
    h[0] ^= 2;
    let g = poly_gcd(field.modulus.clone(), h);
    assert_eq!(degree(&g), Some(0));
    // Primitive: x^((2^256-1)/r) != 1 for every prime r.
    for p in primes {
        let e = &order / p.parse::<BigUint>().unwrap();
        assert_ne!(field.pow_x(&e), field.one(), "order divides (2^256-1)/{p}");
    }
}

#[test]
fn slot_occupancy_is_uniform() {
    const S: usize = 356;
    const FRAMES: usize = 100_000;
    let key = HopKey::from_hex(&"9e3779b97f4a7c15".repeat(4)).unwrap();
    let mut g = key.generator(&DEFAULT_TAPS).unwrap();
    let mut counts = [0u64; S];
    for _ in 0..FRAMES {
        for s in next_slot_set(&mut g, 4, S).unwrap() {
            counts[s as usize] += 1;
        }
    }
    let expected = (FRAMES * 4) as f64 / S as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // Wilson-Hilferty upper 1% point of chi-square with S-1 dof.
    let df = (S - 1) as f64;
    let z = 2.326_347_874;
    let a = 2.0 / (9.0 * df);
    let critical = df * (1.0 - a + z * a.sqrt()).powi(3);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
}

#[test]
fn identical_keys_replay_identical_slot_sequences() {
    let key = HopKey::from_hex(&"0123456789abcdef".repeat(4)).unwrap();
    let mut a = key.generator(&DEFAULT_TAPS).unwrap();
    let mut b = key.generator(&DEFAULT_TAPS).unwrap();
    for _ in 0..100_000 {
        assert_eq!(
            next_slot_set(&mut a, 4, 356).unwrap(),
            next_slot_set(&mut b, 4, 356).unwrap()
        );
    }
}

#[test]
fn longer_keys_fold_but_still_drive_the_generator() {
    let key = HopKey::from_hex(&"f0".repeat(48)).unwrap();
    assert_eq!(key.keyspace_bits(), 384);
    let mut g = key.generator(&DEFAULT_TAPS).unwrap();
    let ones: u32 = (0..1000).map(|_| g.next_bits(32).count_ones()).sum();
    assert!(ones > 15_000 && ones < 17_000);
}

#[test]
fn raw_lfsr_is_deterministic() {
    let bits: Vec<bool> = (0..256).map(|i| i % 5 == 1).collect();
    let mut a = Lfsr::new(&DEFAULT_TAPS, bits.clone()).unwrap();
    let mut b = Lfsr::new(&DEFAULT_TAPS, bits).unwrap();
    for _ in 0..10_000 {
        assert_eq!(a.next_u64(), b.next_u64());
    }
}
