//! Self-shrinking generator: LFSR output is read in pairs `(a, b)` and `b`
//! is emitted only when `a = 1`.

use super::lfsr::Lfsr;
use super::BitStream;

/// For each byte of LFSR output (four pairs, first pair in the low bits):
/// the emitted bits packed LSB-first and how many there are.
const SHRINK_TABLE: [(u8, u8); 256] = {
    let mut table = [(0u8, 0u8); 256];
    let mut byte = 0;
    while byte < 256 {
        let mut out = 0u8;
        let mut n = 0u8;
        let mut pair = 0;
        while pair < 4 {
            let a = (byte >> (2 * pair)) & 1;
            let b = (byte >> (2 * pair + 1)) & 1;
            if a == 1 {
                out |= (b as u8) << n;
                n += 1;
            }
            pair += 1;
        }
        table[byte] = (out, n);
        byte += 1;
    }
    table
};

/// Applies the shrinking rule to an explicit bit sequence. A trailing
/// unpaired bit is ignored.
pub fn shrink(bits: &[bool]) -> Vec<bool> {
    bits.chunks_exact(2)
        .filter(|pair| pair[0])
        .map(|pair| pair[1])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelfShrinkingGenerator {
    lfsr: Lfsr,
    pending: u64,
    pending_len: u32,
    emitted: u64,
}

impl SelfShrinkingGenerator {
    pub fn new(lfsr: Lfsr) -> Self {
        Self {
            lfsr,
            pending: 0,
            pending_len: 0,
            emitted: 0,
        }
    }

    pub fn lfsr(&self) -> &Lfsr {
        &self.lfsr
    }

    /// LFSR bits consumed so far (always even).
    pub fn consumed(&self) -> u64 {
        self.lfsr.steps()
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Shrinks one 64-bit LFSR word into `pending`. Needs `pending_len <= 32`.
    fn refill(&mut self) {
        let word = self.lfsr.next_u64();
        for byte in word.to_le_bytes() {
            let (out, n) = SHRINK_TABLE[byte as usize];
            self.pending |= (out as u64) << self.pending_len;
            self.pending_len += n as u32;
        }
    }
}

impl BitStream for SelfShrinkingGenerator {
    fn next_bit(&mut self) -> bool {
        self.next_bits(1) == 1
    }

    fn next_bits(&mut self, n: u32) -> u32 {
        debug_assert!(n <= 32);
        while self.pending_len < n {
            self.refill();
        }
        let value = if n == 0 {
            0
        } else {
            (self.pending & (u64::MAX >> (64 - n))) as u32
        };
        self.pending = self.pending.checked_shr(n).unwrap_or(0);
        self.pending_len -= n;
        self.emitted += n as u64;
        value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prbs::lfsr::DEFAULT_TAPS;

    fn generator(seed: u64) -> SelfShrinkingGenerator {
        let bits = (0..256).map(move |i| (seed.rotate_left(i as u32 % 64) >> (i / 64)) & 1 == 1);
        SelfShrinkingGenerator::new(Lfsr::new(&DEFAULT_TAPS, bits).unwrap())
    }

    #[test]
    fn shrinking_rule_on_explicit_pairs() {
        let pairs = [true, false, false, true, true, true];
        assert_eq!(shrink(&pairs), vec![false, true]);
    }

    #[test]
    fn table_path_matches_reference_rule() {
        let mut g = generator(0x1234_5678_9abc_def1);
        let mut reference = Lfsr::new(&DEFAULT_TAPS, g.lfsr().register_bits()).unwrap();
        let raw: Vec<bool> = (0..64 * 200).map(|_| reference.next_bit()).collect();
        let expected = shrink(&raw);
        let got: Vec<bool> = (0..expected.len()).map(|_| g.next_bit()).collect();
        assert_eq!(got, expected);
        assert_eq!(g.consumed() % 2, 0);
    }

    #[test]
    fn wide_reads_match_single_bits() {
        let mut a = generator(99);
        let mut b = generator(99);
        for n in [9u32, 1, 32, 0, 17, 5, 9, 9] {
            let v = a.next_bits(n);
            let w = (0..n).fold(0u32, |acc, i| acc | (b.next_bit() as u32) << i);
            assert_eq!(v, w);
        }
    }

    #[test]
    fn identical_seeds_give_identical_streams() {
        let mut a = generator(7);
        let mut b = generator(7);
        for _ in 0..10_000 {
            assert_eq!(a.next_bits(32), b.next_bits(32));
        }
    }

    #[test]
    fn output_is_balanced() {
        let mut g = generator(0xdead_beef);
        let ones: u64 = (0..1_000_000 / 32).map(|_| g.next_bits(32).count_ones() as u64).sum();
        let frac = ones as f64 / 1e6;
        assert!((0.49..=0.51).contains(&frac), "fraction of ones {frac}");
    }

    #[test]
    fn consumes_at_least_two_lfsr_bits_per_output() {
        let mut g = generator(3);
        for _ in 0..1000 {
            g.next_bit();
        }
        assert!(g.consumed() >= 2 * g.emitted());
    }
}
