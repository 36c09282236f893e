//! RS (outer) then LDPC (inner) concatenation over byte payloads.
//!
//! RS codewords are serialised MSB first and cut into LDPC data blocks. A
//! short final block is zero-extended before encoding and the padding bits,
//! known to the receiver, are not transmitted.

use super::ldpc::{LdpcCode, ZChannel, MAX_LLR};
use super::rs::ReedSolomon;
use super::EccConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Raw,
    RsCoded,
    LdpcCoded,
}

/// Bits (one per byte, 0 or 1) of a payload at one pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedBlock {
    pub stage: Stage,
    pub bits: Vec<u8>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeStats {
    pub ldpc_blocks: usize,
    pub ldpc_failures: usize,
    pub rs_codewords: usize,
    pub rs_failures: usize,
    pub rs_corrected_symbols: usize,
}

impl DecodeStats {
    pub fn merge(&mut self, other: &DecodeStats) {
        self.ldpc_blocks += other.ldpc_blocks;
        self.ldpc_failures += other.ldpc_failures;
        self.rs_codewords += other.rs_codewords;
        self.rs_failures += other.rs_failures;
        self.rs_corrected_symbols += other.rs_corrected_symbols;
    }
}

#[derive(Debug, Clone)]
pub struct Pipeline {
    config: EccConfig,
    rs: ReedSolomon,
    ldpc: LdpcCode,
}

fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .collect()
}

fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | (b & 1)))
        .collect()
}

impl Pipeline {
    pub fn new(config: &EccConfig) -> Result<Self> {
        config.validate()?;
        let ldpc = LdpcCode::build(
            config.ldpc_rows,
            config.ldpc_cols,
            config.ldpc_col_weight,
            config.ldpc_seed,
        )?;
        Self::with_ldpc(config, ldpc)
    }

    /// Pipeline around an externally supplied LDPC code.
    pub fn with_ldpc(config: &EccConfig, ldpc: LdpcCode) -> Result<Self> {
        config.validate()?;
        if ldpc.n() != config.ldpc_cols || ldpc.k() != config.ldpc_data_bits() {
            return Err(Error::Config(format!(
                "LDPC code is ({}, {}), configuration asks for ({}, {})",
                ldpc.n(),
                ldpc.k(),
                config.ldpc_cols,
                config.ldpc_data_bits()
            )));
        }
        Ok(Self {
            config: config.clone(),
            rs: ReedSolomon::new(config.rs_n, config.rs_k)?,
            ldpc,
        })
    }

    pub fn config(&self) -> &EccConfig {
        &self.config
    }

    pub fn rs(&self) -> &ReedSolomon {
        &self.rs
    }

    pub fn ldpc(&self) -> &LdpcCode {
        &self.ldpc
    }

    /// Payload granule in bytes.
    pub fn granule(&self) -> usize {
        self.config.rs_k
    }

    /// Transmitted bits for `data_bytes` of payload.
    pub fn encoded_len(&self, data_bytes: usize) -> usize {
        let inner = data_bytes / self.config.rs_k * self.config.rs_n * 8;
        inner + inner.div_ceil(self.ldpc.k()) * self.config.ldpc_rows
    }

    fn check_granule(&self, len: usize) -> Result<usize> {
        if !len.is_multiple_of(self.config.rs_k) {
            return Err(Error::Shape {
                expected: len.div_ceil(self.config.rs_k) * self.config.rs_k,
                got: len,
            });
        }
        Ok(len / self.config.rs_k)
    }

    fn interleave(&self, codewords: &[Vec<u8>]) -> Vec<u8> {
        let mut out = Vec::with_capacity(codewords.len() * self.config.rs_n);
        for group in codewords.chunks(self.config.interleave_depth) {
            for i in 0..self.config.rs_n {
                out.extend(group.iter().map(|cw| cw[i]));
            }
        }
        out
    }

    fn deinterleave(&self, bytes: &[u8]) -> Vec<Vec<u8>> {
        let n = self.config.rs_n;
        let mut out = Vec::with_capacity(bytes.len() / n);
        for group in bytes.chunks(self.config.interleave_depth * n) {
            let depth = group.len() / n;
            let base = out.len();
            out.extend((0..depth).map(|_| vec![0u8; n]));
            for (j, &b) in group.iter().enumerate() {
                out[base + j % depth][j / depth] = b;
            }
        }
        out
    }

    /// Payload at every stage, ending with the transmitted bits.
    pub fn encode_stages(&self, data: &[u8]) -> Result<[CodedBlock; 3]> {
        self.check_granule(data.len())?;
        let codewords = data
            .chunks(self.config.rs_k)
            .map(|chunk| self.rs.encode(chunk))
            .collect::<Result<Vec<_>>>()?;
        let rs_bits = bytes_to_bits(&self.interleave(&codewords));
        let k = self.ldpc.k();
        let mut out = Vec::with_capacity(self.encoded_len(data.len()));
        for chunk in rs_bits.chunks(k) {
            let mut block = chunk.to_vec();
            block.resize(k, 0);
            let word = self.ldpc.encode(&block)?;
            out.extend(self.transmitted(chunk.len()).map(|p| word[p]));
        }
        Ok([
            CodedBlock {
                stage: Stage::Raw,
                bits: bytes_to_bits(data),
            },
            CodedBlock {
                stage: Stage::RsCoded,
                bits: rs_bits,
            },
            CodedBlock {
                stage: Stage::LdpcCoded,
                bits: out,
            },
        ])
    }

    pub fn encode(&self, data: &[u8]) -> Result<Vec<u8>> {
        let [_, _, coded] = self.encode_stages(data)?;
        Ok(coded.bits)
    }

    /// Code-bit positions sent for a block carrying `used` data bits.
    fn transmitted(&self, used: usize) -> impl Iterator<Item = usize> + '_ {
        let info = self.ldpc.info_positions();
        let n = self.ldpc.n();
        let mut skip = vec![false; n];
        for &p in &info[used..] {
            skip[p] = true;
        }
        (0..n).filter(move |&p| !skip[p])
    }

    fn split_blocks(&self, received_len: usize) -> Result<(usize, Vec<usize>)> {
        // Solve for the payload size that produces this many channel bits.
        let cw_bits = self.config.rs_n * 8;
        let per_cw_min = cw_bits;
        let max_cw = received_len / per_cw_min + 1;
        for ncw in 0..=max_cw {
            let data_bytes = ncw * self.config.rs_k;
            if self.encoded_len(data_bytes) == received_len {
                let inner = ncw * cw_bits;
                let k = self.ldpc.k();
                let used = (0..inner.div_ceil(k)).map(|b| (inner - b * k).min(k)).collect();
                return Ok((ncw, used));
            }
            if self.encoded_len(data_bytes) > received_len {
                break;
            }
        }
        Err(Error::Shape {
            expected: self.encoded_len(received_len / (2 * cw_bits) * self.config.rs_k),
            got: received_len,
        })
    }

    /// Strict decode: any LDPC or RS failure aborts with its stage and block.
    pub fn decode(&self, received: &[u8], channel: &ZChannel) -> Result<Vec<u8>> {
        let (data, stats, first_failure) = self.decode_inner(received, channel)?;
        if let Some((stage, block, source)) = first_failure {
            return Err(Error::Stage {
                stage,
                block,
                source: Box::new(source),
            });
        }
        debug_assert_eq!(stats.ldpc_failures + stats.rs_failures, 0);
        Ok(data)
    }

    /// Best-effort decode: failed LDPC blocks pass their hard decisions on
    /// and failed RS codewords yield their systematic bytes unchanged.
    pub fn decode_lossy(&self, received: &[u8], channel: &ZChannel) -> Result<(Vec<u8>, DecodeStats)> {
        let (data, stats, _) = self.decode_inner(received, channel)?;
        Ok((data, stats))
    }

    #[allow(clippy::type_complexity)]
    fn decode_inner(
        &self,
        received: &[u8],
        channel: &ZChannel,
    ) -> Result<(Vec<u8>, DecodeStats, Option<(&'static str, usize, Error)>)> {
        let (ncw, used) = self.split_blocks(received.len())?;
        let mut stats = DecodeStats::default();
        let mut first_failure = None;
        let mut rs_bits = Vec::with_capacity(ncw * self.config.rs_n * 8);
        let mut offset = 0;
        let n = self.ldpc.n();
        let info = self.ldpc.info_positions();
        for (block, &u) in used.iter().enumerate() {
            let mut llr = vec![0.0; n];
            let mut known = vec![false; n];
            for &p in &info[u..] {
                known[p] = true;
                llr[p] = MAX_LLR;
            }
            for p in (0..n).filter(|&p| !known[p]) {
                llr[p] = channel.llr(received[offset] & 1 == 1);
                offset += 1;
            }
            let out = self.ldpc.decode_llr(&llr, self.config.max_iter);
            stats.ldpc_blocks += 1;
            if !out.converged {
                stats.ldpc_failures += 1;
                first_failure.get_or_insert((
                    "ldpc",
                    block,
                    Error::LdpcDecodeFailure {
                        iterations: out.iterations,
                    },
                ));
            }
            rs_bits.extend(info[..u].iter().map(|&p| out.codeword[p]));
        }
        let codewords = self.deinterleave(&bits_to_bytes(&rs_bits));
        let mut data = Vec::with_capacity(ncw * self.config.rs_k);
        for (i, cw) in codewords.iter().enumerate() {
            stats.rs_codewords += 1;
            match self.rs.decode(cw) {
                Ok(d) => {
                    stats.rs_corrected_symbols += d.corrected;
                    data.extend_from_slice(&d.data);
                }
                Err(e) => {
                    stats.rs_failures += 1;
                    first_failure.get_or_insert(("rs", i, e));
                    data.extend_from_slice(&cw[..self.config.rs_k]);
                }
            }
        }
        Ok((data, stats, first_failure))
    }
}
