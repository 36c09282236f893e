//! Error-correction pipeline: outer Reed-Solomon, inner LDPC decoded with
//! Z-channel likelihoods, and channel capacity formulas.

pub mod capacity;
pub mod ldpc;
pub mod pipeline;
pub mod rs;
pub mod threshold;

use serde::{Deserialize, Serialize};

pub use capacity::{bsc_capacity, z_capacity};
pub use ldpc::{LdpcCode, ParityCheck, ZChannel};
pub use pipeline::{CodedBlock, DecodeStats, Pipeline, Stage};
pub use rs::ReedSolomon;
pub use threshold::{correction_threshold, z_channel_trial, CorrectionThreshold, ZTrial};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EccConfig {
    pub rs_n: usize,
    pub rs_k: usize,
    pub ldpc_rows: usize,
    pub ldpc_cols: usize,
    pub ldpc_col_weight: usize,
    pub ldpc_seed: u64,
    /// Slots per data bit; consumed by the hop layer, kept here for rate accounting.
    pub bloom_k: usize,
    pub max_iter: usize,
    /// P(read 0 | sent 1) assumed by the LDPC decoder.
    pub miss_prob: f64,
    /// RS codewords per byte-interleaving group; 1 disables interleaving.
    pub interleave_depth: usize,
}

impl Default for EccConfig {
    fn default() -> Self {
        Self {
            rs_n: 255,
            rs_k: 223,
            ldpc_rows: 512,
            ldpc_cols: 1024,
            ldpc_col_weight: 3,
            ldpc_seed: 0x5eed_1d9c,
            bloom_k: crate::hopcode::DEFAULT_BLOOM_K,
            max_iter: 50,
            miss_prob: 1e-6,
            interleave_depth: 1,
        }
    }
}

impl EccConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rs_n > 255 || self.rs_k == 0 || self.rs_k >= self.rs_n || !(self.rs_n - self.rs_k).is_multiple_of(2) {
            return Err(Error::Config(format!("unsupported RS({}, {})", self.rs_n, self.rs_k)));
        }
        if self.ldpc_rows == 0 || self.ldpc_cols <= self.ldpc_rows {
            return Err(Error::Config(format!(
                "LDPC matrix {}x{} has no data bits",
                self.ldpc_rows, self.ldpc_cols
            )));
        }
        if self.bloom_k == 0 {
            return Err(Error::Config("bloom_k must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be positive".into()));
        }
        if !(0.0..0.5).contains(&self.miss_prob) {
            return Err(crate::error::domain("miss_prob", self.miss_prob, "[0, 0.5)"));
        }
        if self.interleave_depth == 0 {
            return Err(Error::Config("interleave_depth must be at least 1".into()));
        }
        Ok(())
    }

    /// Correctable RS symbol errors per codeword.
    pub fn rs_t(&self) -> usize {
        (self.rs_n - self.rs_k) / 2
    }

    pub fn ldpc_data_bits(&self) -> usize {
        self.ldpc_cols - self.ldpc_rows
    }

    /// Data fraction of the transmitted bit stream.
    pub fn code_rate(&self) -> f64 {
        (self.rs_k as f64 / self.rs_n as f64) * (self.ldpc_data_bits() as f64 / self.ldpc_cols as f64)
    }
}
