//! Pipeline behaviour on a synthetic Z channel: where post-decoding errors
//! start to appear.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Pipeline, ZChannel};
use crate::error::{domain, Result};

const CHUNK_CODEWORDS: usize = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ZTrial {
    /// Channel bits sent.
    pub channel_bits: u64,
    /// 0s read as 1.
    pub flips: u64,
    pub data_bits: u64,
    pub post_errors: u64,
}

impl ZTrial {
    pub fn pre_ber(&self) -> f64 {
        self.flips as f64 / self.channel_bits.max(1) as f64
    }

    pub fn post_ber(&self) -> f64 {
        self.post_errors as f64 / self.data_bits.max(1) as f64
    }
}

/// Sends at least `data_bits` random data bits through the pipeline over a
/// Z channel with crossover `p`. The decoder is told the true `p`.
///
/// The flip of each channel 0 is `u < p` for a uniform `u` drawn from the
/// seeded stream, so for one seed the error patterns are nested in `p`.
pub fn z_channel_trial(pipeline: &Pipeline, p: f64, data_bits: u64, seed: u64) -> Result<ZTrial> {
    if !(0.0..0.5).contains(&p) {
        return Err(domain("crossover", p, "[0, 0.5)"));
    }
    let channel = ZChannel::new(p, pipeline.config().miss_prob)?;
    let mut data_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut flip_rng = ChaCha8Rng::seed_from_u64(seed);
    flip_rng.set_stream(1);
    let granule = pipeline.granule();
    let codewords = data_bits.div_ceil(granule as u64 * 8);
    let mut trial = ZTrial::default();
    let mut done = 0u64;
    while done < codewords {
        let count = (codewords - done).min(CHUNK_CODEWORDS as u64) as usize;
        done += count as u64;
        let mut data = vec![0u8; count * granule];
        data_rng.fill_bytes(&mut data);
        let mut bits = pipeline.encode(&data)?;
        for b in bits.iter_mut() {
            let u: f64 = flip_rng.random();
            if *b == 0 && u < p {
                *b = 1;
                trial.flips += 1;
            }
        }
        trial.channel_bits += bits.len() as u64;
        let (decoded, _) = pipeline.decode_lossy(&bits, &channel)?;
        trial.data_bits += data.len() as u64 * 8;
        trial.post_errors += data
            .iter()
            .zip(&decoded)
            .map(|(a, b)| (a ^ b).count_ones() as u64)
            .sum::<u64>();
    }
    Ok(trial)
}

/// Result of the threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionThreshold {
    /// Smallest crossover found to produce post-decoding errors.
    pub crossover: f64,
    /// Pre-decoding BER measured at that crossover.
    pub pre_ber: f64,
    /// Largest crossover found error-free.
    pub clean_crossover: f64,
}

/// Bisects the crossover in `[lo, hi]` to `tol` for the point where
/// post-decoding errors first appear within `data_bits` bits.
pub fn correction_threshold(
    pipeline: &Pipeline,
    data_bits: u64,
    seed: u64,
    (mut lo, mut hi): (f64, f64),
    tol: f64,
) -> Result<CorrectionThreshold> {
    if !(0.0 <= lo && lo < hi && hi < 0.5) {
        return Err(domain("threshold bracket", hi - lo, "0 <= lo < hi < 0.5"));
    }
    if z_channel_trial(pipeline, lo, data_bits, seed)?.post_errors > 0 {
        return Err(domain("threshold bracket lower end", lo, "error-free crossover"));
    }
    let mut at_hi = z_channel_trial(pipeline, hi, data_bits, seed)?;
    if at_hi.post_errors == 0 {
        return Err(domain(
            "threshold bracket upper end",
            hi,
            "crossover with decoding errors",
        ));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let t = z_channel_trial(pipeline, mid, data_bits, seed)?;
        if t.post_errors > 0 {
            hi = mid;
            at_hi = t;
        } else {
            lo = mid;
        }
    }
    Ok(CorrectionThreshold {
        crossover: hi,
        pre_ber: at_hi.pre_ber(),
        clean_crossover: lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecc::EccConfig;

    #[test]
    fn clean_and_noisy_ends() {
        let pipeline = Pipeline::new(&EccConfig::default()).unwrap();
        let clean = z_channel_trial(&pipeline, 0.0, 20_000, 1).unwrap();
        assert_eq!((clean.flips, clean.post_errors), (0, 0));
        let bad = z_channel_trial(&pipeline, 0.45, 20_000, 1).unwrap();
        assert!(bad.post_errors > 0);
        assert!((bad.pre_ber() - 0.45 / 2.0).abs() < 0.01);
        assert!(z_channel_trial(&pipeline, 0.5, 10, 1).is_err());
    }

    #[test]
    fn bracket_must_straddle() {
        let pipeline = Pipeline::new(&EccConfig::default()).unwrap();
        assert!(correction_threshold(&pipeline, 20_000, 1, (0.3, 0.4), 0.01).is_err());
        assert!(correction_threshold(&pipeline, 20_000, 1, (0.0, 0.01), 0.001).is_err());
    }
}
