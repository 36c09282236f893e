//! Logical-layer multi-ONU simulation: collisions, BER before and after
//! decoding, throughput and channel utilization.

pub mod analytic;
pub mod sim;

use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub use analytic::{analytic_collision_prob, CollisionProb};
pub use sim::{
    decoder_channel, max_colliding_ones, simulate_layer, simulate_logical, simulate_with, superpose_and_decode,
    sweep_onus, Batch, FrameChannel, FrameTally, HopSchedule, LogicalChannel, Mode,
};

use crate::ecc::{DecodeStats, EccConfig};
use crate::error::{domain, Error, Result};
use crate::hopcode::{DEFAULT_BLOOM_K, DEFAULT_FRAME_SLOTS};
use crate::prbs::{HopKey, DEFAULT_TAPS, MIN_KEY_BITS};

pub const MAX_ONUS: usize = 128;

/// Serializable network parameters; keys are derived separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkParams {
    pub frame_slots: usize,
    pub bloom_k: usize,
    /// Slots per second.
    pub slot_rate: f64,
    /// Probability that a data bit is 1.
    pub p1: f64,
    pub taps: Vec<usize>,
    /// Crossover handed to the LDPC decoder; derived from the load when absent.
    pub decoder_crossover: Option<f64>,
}

impl Default for NetworkParams {
    fn default() -> Self {
        Self {
            frame_slots: DEFAULT_FRAME_SLOTS,
            bloom_k: DEFAULT_BLOOM_K,
            slot_rate: 10e9,
            p1: 0.5,
            taps: DEFAULT_TAPS.to_vec(),
            decoder_crossover: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub n_onus: usize,
    pub params: NetworkParams,
    pub keys: Vec<HopKey>,
    pub ecc: EccConfig,
}

/// Deterministic per-ONU keys; ONU `i` gets the same key whatever `n`.
pub fn derive_keys(seed: u64, n: usize) -> Vec<HopKey> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| HopKey::random(&mut rng, MIN_KEY_BITS).expect("key length is the minimum"))
        .collect()
}

impl NetworkConfig {
    pub fn new(n_onus: usize, params: NetworkParams, ecc: EccConfig, key_seed: u64) -> Result<Self> {
        let config = Self {
            n_onus,
            params,
            keys: derive_keys(key_seed, n_onus),
            ecc,
        };
        config.validate()?;
        Ok(config)
    }

    /// Defaults with `n_onus` keys derived from `key_seed`.
    pub fn with_defaults(n_onus: usize, key_seed: u64) -> Result<Self> {
        Self::new(n_onus, NetworkParams::default(), EccConfig::default(), key_seed)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        if !(1..=MAX_ONUS).contains(&self.n_onus) {
            return Err(Error::Config(format!("n_onus {} outside [1, {MAX_ONUS}]", self.n_onus)));
        }
        if self.keys.len() != self.n_onus {
            return Err(Error::Shape {
                expected: self.n_onus,
                got: self.keys.len(),
            });
        }
        if p.bloom_k == 0 || p.bloom_k > p.frame_slots {
            return Err(Error::TooManySlots {
                k: p.bloom_k,
                s: p.frame_slots,
            });
        }
        if p.frame_slots > u16::MAX as usize {
            return Err(Error::Config(format!("frame_slots {} too large", p.frame_slots)));
        }
        if !(p.slot_rate > 0.0) {
            return Err(domain("slot_rate", p.slot_rate, "(0, inf)"));
        }
        if !(0.0..=1.0).contains(&p.p1) {
            return Err(domain("p1", p.p1, "[0, 1]"));
        }
        if let Some(c) = p.decoder_crossover {
            if !(0.0..0.5).contains(&c) {
                return Err(domain("decoder_crossover", c, "[0, 0.5)"));
            }
        }
        if p.bloom_k != self.ecc.bloom_k {
            return Err(Error::Config(format!(
                "bloom_k differs between network ({}) and ecc ({})",
                p.bloom_k, self.ecc.bloom_k
            )));
        }
        self.ecc.validate()
    }

    /// Same network restricted to its first `n` ONUs.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.keys.len() {
            return Err(Error::Config(format!(
                "{n} ONUs requested, {} keys available",
                self.keys.len()
            )));
        }
        let config = Self {
            n_onus: n,
            params: self.params.clone(),
            keys: self.keys[..n].to_vec(),
            ecc: self.ecc.clone(),
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Throughput {
    /// Data bits per second per ONU.
    pub per_onu_bps: f64,
    /// Aggregate data rate over the slot rate.
    pub utilization: f64,
}

pub fn throughput(config: &NetworkConfig) -> Throughput {
    let per_onu_bps = config.params.slot_rate / config.params.frame_slots as f64 * config.ecc.code_rate();
    Throughput {
        per_onu_bps,
        utilization: config.n_onus as f64 * per_onu_bps / config.params.slot_rate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Logical,
    Physical,
}

impl std::fmt::Display for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Layer::Logical => "logical",
            Layer::Physical => "physical",
        })
    }
}

/// Counters and derived rates for one experiment point.
#[derive(Debug, Clone, PartialEq)]
pub struct BerReport {
    pub layer: Layer,
    pub n_onus: usize,
    /// Data bits sent by each ONU.
    pub bits_per_onu: u64,
    pub frames: u64,
    pub channel: FrameTally,
    /// Decoded data bits over all ONUs; zero when no code is applied.
    pub post_ecc_bits: u64,
    pub post_ecc_errors: u64,
    pub decode: DecodeStats,
    pub utilization: f64,
    pub wall_time: Duration,
}

impl BerReport {
    /// Hop-layer errors over all channel bits.
    pub fn pre_ecc_ber(&self) -> f64 {
        ratio(self.channel.errors(), self.channel.bits)
    }

    /// Probability that a transmitted 0 is read as 1.
    pub fn zero_flip_rate(&self) -> f64 {
        ratio(self.channel.zero_to_one, self.channel.zeros_sent)
    }

    pub fn post_ecc_ber(&self) -> Option<f64> {
        (self.post_ecc_bits > 0).then(|| ratio(self.post_ecc_errors, self.post_ecc_bits))
    }

    pub fn max_collision(&self) -> u32 {
        self.channel.max_collision
    }

    /// Human-readable sample-size note.
    pub fn confidence_note(&self) -> String {
        format!(
            "{} channel bits, {} errors; {} decoded bits, {} errors",
            self.channel.bits,
            self.channel.errors(),
            self.post_ecc_bits,
            self.post_ecc_errors
        )
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}
