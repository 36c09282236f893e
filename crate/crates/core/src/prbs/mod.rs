//! Keyed pseudo-random slot hopping.
//!
//! Each ONU owns a [`HopKey`]; the key seeds a self-shrinking generator whose
//! output bits pick the `k` distinct slots a data bit occupies in a frame.

pub mod lfsr;
pub mod ssg;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
pub use lfsr::{Lfsr, DEFAULT_TAPS};
pub use ssg::SelfShrinkingGenerator;

/// Minimum seed length accepted by [`HopKey`].
pub const MIN_KEY_BITS: usize = 256;

/// Consecutive rejected draws after which a bit source is declared stuck.
const MAX_REJECTIONS: usize = 1 << 16;

/// A source of pseudo-random bits.
pub trait BitStream {
    fn next_bit(&mut self) -> bool;

    /// Next `n <= 32` bits, first bit in the LSB.
    fn next_bits(&mut self, n: u32) -> u32 {
        (0..n).fold(0, |acc, i| acc | (self.next_bit() as u32) << i)
    }
}

/// Per-ONU secret seed.
#[derive(Clone, PartialEq, Eq)]
pub struct HopKey {
    seed: Vec<u8>,
}

impl std::fmt::Debug for HopKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "HopKey({} bits)", self.keyspace_bits())
    }
}

impl HopKey {
    pub fn from_bytes(seed: &[u8]) -> Result<Self> {
        let bits = keyspace_bits(seed);
        if bits < MIN_KEY_BITS {
            return Err(Error::KeyTooShort {
                bits,
                min: MIN_KEY_BITS,
            });
        }
        Ok(Self { seed: seed.to_vec() })
    }

    /// Parses a hexadecimal seed; an optional `0x` prefix and `_` separators
    /// are accepted.
    pub fn from_hex(text: &str) -> Result<Self> {
        let digits: String = text
            .trim()
            .trim_start_matches("0x")
            .chars()
            .filter(|&c| c != '_')
            .collect();
        if !digits.len().is_multiple_of(2) {
            return Err(Error::InvalidHex(format!("odd number of digits in {text:?}")));
        }
        let bytes = (0..digits.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&digits[i..i + 2], 16).map_err(|e| Error::InvalidHex(format!("{text:?}: {e}"))))
            .collect::<Result<Vec<u8>>>()?;
        Self::from_bytes(&bytes)
    }

    pub fn random(rng: &mut impl RngCore, bits: usize) -> Result<Self> {
        let mut seed = vec![0u8; bits.div_ceil(8)];
        rng.fill_bytes(&mut seed);
        Self::from_bytes(&seed)
    }

    pub fn to_hex(&self) -> String {
        self.seed.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn keyspace_bits(&self) -> usize {
        keyspace_bits(&self.seed)
    }

    /// Seed bits, LSB of the first byte first.
    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        self.seed.iter().flat_map(|&b| (0..8).map(move |i| (b >> i) & 1 == 1))
    }

    /// Self-shrinking generator over an LFSR with the given taps. Seeds longer
    /// than the register are folded onto it.
    pub fn generator(&self, taps: &[usize]) -> Result<SelfShrinkingGenerator> {
        Ok(SelfShrinkingGenerator::new(Lfsr::new(taps, self.bits())?))
    }

    /// Same generator started from the register XORed with `tweak`. For a
    /// primitive polynomial every non-zero register lies on the one maximal
    /// cycle, so this is the keyed sequence entered at another point.
    pub fn generator_at(&self, taps: &[usize], tweak: u64) -> Result<SelfShrinkingGenerator> {
        let t = tweak;
        let bits = self
            .bits()
            .enumerate()
            .map(move |(i, b)| if i < 64 { b ^ ((t >> i) & 1 == 1) } else { b });
        Ok(SelfShrinkingGenerator::new(Lfsr::new(taps, bits)?))
    }

    /// Block-cipher-style alternative generator keyed by the same seed.
    pub fn cipher_stream(&self) -> CipherStream {
        let mut key = [0u8; 32];
        for (i, b) in self.seed.iter().enumerate() {
            key[i % 32] ^= b;
        }
        CipherStream::new(key)
    }
}

/// Seed length in bits.
pub fn keyspace_bits(seed: &[u8]) -> usize {
    seed.len() * 8
}

/// ChaCha20 keystream exposed as a bit stream.
#[derive(Debug, Clone)]
pub struct CipherStream {
    rng: ChaCha20Rng,
    pending: u64,
    pending_len: u32,
}

impl CipherStream {
    pub fn new(key: [u8; 32]) -> Self {
        Self {
            rng: ChaCha20Rng::from_seed(key),
            pending: 0,
            pending_len: 0,
        }
    }
}

impl BitStream for CipherStream {
    fn next_bit(&mut self) -> bool {
        self.next_bits(1) == 1
    }

    fn next_bits(&mut self, n: u32) -> u32 {
        debug_assert!(n <= 32);
        if self.pending_len < n {
            self.pending |= (self.rng.next_u32() as u64) << self.pending_len;
            self.pending_len += 32;
        }
        let value = if n == 0 {
            0
        } else {
            (self.pending & (u64::MAX >> (64 - n))) as u32
        };
        self.pending = self.pending.checked_shr(n).unwrap_or(0);
        self.pending_len -= n;
        value
    }
}

/// Bits needed to index a frame of `frame_slots` slots.
pub fn index_bits(frame_slots: usize) -> u32 {
    if frame_slots <= 1 {
        0
    } else {
        usize::BITS - (frame_slots - 1).leading_zeros()
    }
}

/// Fills `out` with `out.len()` distinct slot indices in `[0, frame_slots)`.
///
/// Every index is an `index_bits(frame_slots)`-bit draw; draws at or beyond
/// the frame size and repeats within the set are discarded and redrawn.
pub fn draw_slots<B: BitStream + ?Sized>(source: &mut B, frame_slots: usize, out: &mut [u16]) -> Result<()> {
    let k = out.len();
    if k > frame_slots || frame_slots > u16::MAX as usize + 1 {
        return Err(Error::TooManySlots { k, s: frame_slots });
    }
    let width = index_bits(frame_slots);
    for i in 0..k {
        let mut rejected = 0;
        loop {
            let v = source.next_bits(width) as usize;
            if v < frame_slots && !out[..i].contains(&(v as u16)) {
                out[i] = v as u16;
                break;
            }
            rejected += 1;
            if rejected >= MAX_REJECTIONS {
                return Err(Error::DegenerateState);
            }
        }
    }
    Ok(())
}

/// Allocating convenience wrapper over [`draw_slots`].
pub fn next_slot_set<B: BitStream + ?Sized>(source: &mut B, k: usize, frame_slots: usize) -> Result<Vec<u16>> {
    let mut out = vec![0u16; k];
    draw_slots(source, frame_slots, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct Zeros;
    impl BitStream for Zeros {
        fn next_bit(&mut self) -> bool {
            false
        }
    }

    fn key(byte: u8) -> HopKey {
        HopKey::from_bytes(&[byte; 32]).unwrap()
    }

    #[test]
    fn constant_zero_source_picks_slot_zero() {
        assert_eq!(next_slot_set(&mut Zeros, 1, 2).unwrap(), vec![0]);
    }

    #[test]
    fn stuck_source_is_reported() {
        assert_eq!(next_slot_set(&mut Zeros, 2, 4), Err(Error::DegenerateState));
    }

    #[test]
    fn slot_sets_are_distinct_and_in_range() {
        let mut g = key(0x5a).generator(&DEFAULT_TAPS).unwrap();
        for _ in 0..10_000 {
            let set = next_slot_set(&mut g, 4, 356).unwrap();
            assert_eq!(set.len(), 4);
            assert!(set.iter().all(|&s| s < 356));
            let mut sorted = set.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), 4);
        }
    }

    #[test]
    fn too_many_slots_is_an_error() {
        let mut g = key(1).generator(&DEFAULT_TAPS).unwrap();
        assert!(matches!(next_slot_set(&mut g, 9, 8), Err(Error::TooManySlots { .. })));
        // k == s is the full permutation.
        let mut all = next_slot_set(&mut g, 8, 8).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<u16>>());
    }

    #[test]
    fn index_width() {
        assert_eq!(index_bits(1), 0);
        assert_eq!(index_bits(2), 1);
        assert_eq!(index_bits(8), 3);
        assert_eq!(index_bits(9), 4);
        assert_eq!(index_bits(356), 9);
        assert_eq!(index_bits(512), 9);
    }

    #[test]
    fn keyspace_accounting() {
        assert_eq!(keyspace_bits(&[0u8; 32]), 256);
        assert_eq!(keyspace_bits(&[0u8; 48]), 384);
        assert_eq!(keyspace_bits(&[]), 0);
        assert!(matches!(
            HopKey::from_bytes(&[]),
            Err(Error::KeyTooShort { bits: 0, .. })
        ));
        assert_eq!(HopKey::from_bytes(&[1u8; 48]).unwrap().keyspace_bits(), 384);
    }

    #[test]
    fn hex_keys() {
        let k = key(0xab);
        assert_eq!(HopKey::from_hex(&k.to_hex()).unwrap(), k);
        assert_eq!(HopKey::from_hex(&format!("0x{}", k.to_hex())).unwrap(), k);
        assert!(matches!(HopKey::from_hex("abc"), Err(Error::InvalidHex(_))));
        assert!(matches!(HopKey::from_hex(&"zz".repeat(32)), Err(Error::InvalidHex(_))));
        assert!(matches!(HopKey::from_hex("abcd"), Err(Error::KeyTooShort { .. })));
    }

    #[test]
    fn all_zero_key_is_degenerate() {
        assert_eq!(
            HopKey::from_bytes(&[0u8; 32]).unwrap().generator(&DEFAULT_TAPS),
            Err(Error::DegenerateState)
        );
    }

    #[test]
    fn distinct_keys_give_distinct_hopping() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = HopKey::random(&mut rng, 256).unwrap();
        let b = HopKey::random(&mut rng, 256).unwrap();
        let mut ga = a.generator(&DEFAULT_TAPS).unwrap();
        let mut gb = b.generator(&DEFAULT_TAPS).unwrap();
        let same = (0..10_000)
            .filter(|_| {
                let mut x = next_slot_set(&mut ga, 4, 356).unwrap();
                let mut y = next_slot_set(&mut gb, 4, 356).unwrap();
                x.sort_unstable();
                y.sort_unstable();
                x == y
            })
            .count();
        assert_eq!(same, 0);
    }

    #[test]
    fn cipher_stream_is_deterministic_and_keyed() {
        let mut a = key(3).cipher_stream();
        let mut b = key(3).cipher_stream();
        let mut c = key(4).cipher_stream();
        let xa: Vec<u32> = (0..64).map(|_| a.next_bits(9)).collect();
        let xb: Vec<u32> = (0..64).map(|_| b.next_bits(9)).collect();
        let xc: Vec<u32> = (0..64).map(|_| c.next_bits(9)).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
        let set = next_slot_set(&mut a, 4, 356).unwrap();
        assert!(set.iter().all(|&s| s < 356));
    }

    #[test]
    fn tweaked_generator_differs_but_is_deterministic() {
        let k = key(0x42);
        let mut a = k.generator_at(&DEFAULT_TAPS, 5).unwrap();
        let mut b = k.generator_at(&DEFAULT_TAPS, 5).unwrap();
        let mut c = k.generator(&DEFAULT_TAPS).unwrap();
        let xa: Vec<u32> = (0..32).map(|_| a.next_bits(32)).collect();
        let xb: Vec<u32> = (0..32).map(|_| b.next_bits(32)).collect();
        let xc: Vec<u32> = (0..32).map(|_| c.next_bits(32)).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }
}
