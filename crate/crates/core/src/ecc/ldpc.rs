//! Regular LDPC code: seeded construction, systematic encoding by Gaussian
//! elimination and sum-product decoding with Z-channel likelihoods.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Magnitude cap on every log-likelihood ratio in the decoder.
pub const MAX_LLR: f64 = 30.0;

/// Attempts before the construction gives up.
const MAX_BUILD_ATTEMPTS: u64 = 64;

/// Sparse parity-check matrix stored both by row and by column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheck {
    rows: usize,
    cols: usize,
    row_cols: Vec<Vec<u32>>,
    col_rows: Vec<Vec<u32>>,
}

impl ParityCheck {
    pub fn from_rows(cols: usize, row_cols: Vec<Vec<u32>>) -> Result<Self> {
        let mut col_rows = vec![Vec::new(); cols];
        for (r, row) in row_cols.iter().enumerate() {
            for &c in row {
                let c = c as usize;
                if c >= cols {
                    return Err(Error::Config(format!("row {r}: column {c} >= {cols}")));
                }
                if col_rows[c].contains(&(r as u32)) {
                    return Err(Error::Config(format!("row {r}: column {c} repeated")));
                }
                col_rows[c].push(r as u32);
            }
        }
        Ok(Self {
            rows: row_cols.len(),
            cols,
            row_cols,
            col_rows,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.row_cols[r]
    }

    pub fn col(&self, c: usize) -> &[u32] {
        &self.col_rows[c]
    }

    pub fn row_weights(&self) -> impl Iterator<Item = usize> + '_ {
        self.row_cols.iter().map(Vec::len)
    }

    pub fn col_weights(&self) -> impl Iterator<Item = usize> + '_ {
        self.col_rows.iter().map(Vec::len)
    }

    /// Number of unordered row pairs that share two or more columns.
    pub fn four_cycles(&self) -> usize {
        let mut count = 0;
        let mut shared = vec![0u32; self.rows];
        for r in 0..self.rows {
            shared.iter_mut().for_each(|s| *s = 0);
            for &c in &self.row_cols[r] {
                for &r2 in &self.col_rows[c as usize] {
                    if (r2 as usize) > r {
                        shared[r2 as usize] += 1;
                    }
                }
            }
            count += shared.iter().filter(|&&s| s >= 2).count();
        }
        count
    }

    /// Number of violated checks.
    pub fn syndrome_weight(&self, bits: &[u8]) -> usize {
        self.row_cols
            .iter()
            .filter(|row| row.iter().fold(0u8, |acc, &c| acc ^ bits[c as usize]) & 1 == 1)
            .count()
    }

    pub fn is_codeword(&self, bits: &[u8]) -> bool {
        bits.len() == self.cols && self.syndrome_weight(bits) == 0
    }

    /// One line per row: `row: col col col ...`.
    pub fn to_sparse_text(&self) -> String {
        let mut out = format!("# parity-check {} x {}\n", self.rows, self.cols);
        for (r, row) in self.row_cols.iter().enumerate() {
            let cols: Vec<String> = row.iter().map(u32::to_string).collect();
            out.push_str(&format!("{r}: {}\n", cols.join(" ")));
        }
        out
    }

    pub fn from_sparse_text(text: &str) -> Result<Self> {
        let mut cols = None;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if let Some(header) = line.strip_prefix("# parity-check") {
                let dims: Vec<&str> = header.split('x').map(str::trim).collect();
                if dims.len() == 2 {
                    cols = dims[1].parse::<usize>().ok();
                }
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Config(format!("line {}: {what}", lineno + 1));
            let (index, entries) = line.split_once(':').ok_or_else(|| bad("missing ':'"))?;
            let index: usize = index.trim().parse().map_err(|_| bad("bad row index"))?;
            if index != rows.len() {
                return Err(bad("rows out of order"));
            }
            let entries = entries
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| bad("bad column index")))
                .collect::<Result<Vec<_>>>()?;
            rows.push(entries);
        }
        let cols = cols.ok_or_else(|| Error::Config("missing '# parity-check R x C' header".into()))?;
        Self::from_rows(cols, rows)
    }
}

/// Z-channel seen by the decoder: `crossover` is P(read 1 | sent 0) and
/// `miss` is P(read 0 | sent 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZChannel {
    pub crossover: f64,
    pub miss: f64,
}

impl ZChannel {
    pub fn new(crossover: f64, miss: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&crossover) {
            return Err(crate::error::domain("crossover", crossover, "[0, 0.5)"));
        }
        if !(0.0..0.5).contains(&miss) {
            return Err(crate::error::domain("miss", miss, "[0, 0.5)"));
        }
        Ok(Self { crossover, miss })
    }

    /// ln P(sent 0 | read) - ln P(sent 1 | read) under equiprobable inputs.
    pub fn llr(&self, read_one: bool) -> f64 {
        let v = if read_one {
            (self.crossover / (1.0 - self.miss)).ln()
        } else {
            ((1.0 - self.crossover) / self.miss).ln()
        };
        v.clamp(-MAX_LLR, MAX_LLR)
    }
}

#[derive(Debug, Clone)]
pub struct LdpcDecoded {
    /// Hard decisions on all code bits at exit.
    pub codeword: Vec<u8>,
    pub iterations: usize,
    pub converged: bool,
}

/// LDPC code with a systematic encoder.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    h: ParityCheck,
    info_positions: Vec<usize>,
    parity_positions: Vec<usize>,
    /// For parity bit `i`, the info bits (packed) it sums.
    parity_masks: Vec<Vec<u64>>,
    /// Edge `e` of row `r` is `row_start[r] + i` and touches `edge_var[e]`.
    row_start: Vec<usize>,
    edge_var: Vec<usize>,
    seed: u64,
}

impl LdpcCode {
    /// Deterministic regular code from `seed`. Rank-deficient or
    /// 4-cycle-bearing candidates are rebuilt from derived seeds.
    pub fn build(rows: usize, cols: usize, col_weight: usize, seed: u64) -> Result<Self> {
        if rows == 0 || cols <= rows || !(cols * col_weight).is_multiple_of(rows) || col_weight > rows {
            return Err(Error::Config(format!(
                "no regular {rows}x{cols} matrix with column weight {col_weight}"
            )));
        }
        let row_weight = cols * col_weight / rows;
        let mut fallback = None;
        for attempt in 0..MAX_BUILD_ATTEMPTS {
            let derived = seed.wrapping_add(attempt.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let Some(h) = construct(rows, cols, col_weight, row_weight, derived) else {
                continue;
            };
            let strict = h.four_cycles() == 0;
            match Self::from_parity_check(h) {
                Ok(mut code) if strict => {
                    code.seed = derived;
                    return Ok(code);
                }
                Ok(mut code) => {
                    code.seed = derived;
                    fallback.get_or_insert(code);
                }
                Err(_) => continue,
            }
        }
        fallback.ok_or_else(|| {
            Error::Config(format!(
                "no full-rank {rows}x{cols} code after {MAX_BUILD_ATTEMPTS} attempts"
            ))
        })
    }

    /// Encoder for an arbitrary full-rank parity-check matrix.
    pub fn from_parity_check(h: ParityCheck) -> Result<Self> {
        let (rows, cols) = (h.rows, h.cols);
        let words = cols.div_ceil(64);
        let mut dense: Vec<Vec<u64>> = h
            .row_cols
            .iter()
            .map(|row| {
                let mut v = vec![0u64; words];
                for &c in row {
                    v[c as usize / 64] |= 1 << (c % 64);
                }
                v
            })
            .collect();
        let mut pivots = Vec::with_capacity(rows);
        let mut rank = 0;
        for col in 0..cols {
            if rank == rows {
                break;
            }
            let (w, b) = (col / 64, col % 64);
            let Some(p) = (rank..rows).find(|&r| (dense[r][w] >> b) & 1 == 1) else {
                continue;
            };
            dense.swap(rank, p);
            let pivot_row = dense[rank].clone();
            for (r, row) in dense.iter_mut().enumerate() {
                if r != rank && (row[w] >> b) & 1 == 1 {
                    row.iter_mut().zip(&pivot_row).for_each(|(x, y)| *x ^= y);
                }
            }
            pivots.push(col);
            rank += 1;
        }
        if rank < rows {
            return Err(Error::Config(format!("parity-check rank {rank} < {rows}")));
        }
        let is_pivot = {
            let mut v = vec![false; cols];
            pivots.iter().for_each(|&c| v[c] = true);
            v
        };
        let info_positions: Vec<usize> = (0..cols).filter(|&c| !is_pivot[c]).collect();
        let k = info_positions.len();
        let parity_masks = dense
            .iter()
            .map(|row| {
                let mut mask = vec![0u64; k.div_ceil(64)];
                for (j, &c) in info_positions.iter().enumerate() {
                    if (row[c / 64] >> (c % 64)) & 1 == 1 {
                        mask[j / 64] |= 1 << (j % 64);
                    }
                }
                mask
            })
            .collect();
        let mut row_start = vec![0usize];
        for row in &h.row_cols {
            row_start.push(row_start.last().unwrap() + row.len());
        }
        let edge_var = h.row_cols.iter().flatten().map(|&c| c as usize).collect();
        Ok(Self {
            h,
            info_positions,
            parity_positions: pivots,
            parity_masks,
            row_start,
            edge_var,
            seed: 0,
        })
    }

    pub fn parity_check(&self) -> &ParityCheck {
        &self.h
    }

    /// Seed the accepted matrix was built from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n(&self) -> usize {
        self.h.cols
    }

    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    /// Code-bit positions carrying data bits, in data order.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, data: &[u8]) -> Result<Vec<u8>> {
        if data.len() != self.k() {
            return Err(Error::Shape {
                expected: self.k(),
                got: data.len(),
            });
        }
        let mut packed = vec![0u64; self.k().div_ceil(64)];
        for (j, &b) in data.iter().enumerate() {
            packed[j / 64] |= ((b & 1) as u64) << (j % 64);
        }
        let mut word = vec![0u8; self.n()];
        for (&pos, &b) in self.info_positions.iter().zip(data) {
            word[pos] = b & 1;
        }
        for (&pos, mask) in self.parity_positions.iter().zip(&self.parity_masks) {
            let ones: u32 = mask.iter().zip(&packed).map(|(m, d)| (m & d).count_ones()).sum();
            word[pos] = (ones & 1) as u8;
        }
        Ok(word)
    }

    pub fn extract_data(&self, codeword: &[u8]) -> Vec<u8> {
        self.info_positions.iter().map(|&p| codeword[p]).collect()
    }

    /// Decodes hard Z-channel outputs; fails if the syndrome does not clear.
    pub fn decode(&self, received: &[u8], channel: &ZChannel, max_iter: usize) -> Result<Vec<u8>> {
        if received.len() != self.n() {
            return Err(Error::Shape {
                expected: self.n(),
                got: received.len(),
            });
        }
        let llr: Vec<f64> = received.iter().map(|&b| channel.llr(b & 1 == 1)).collect();
        let out = self.decode_llr(&llr, max_iter);
        if out.converged {
            Ok(self.extract_data(&out.codeword))
        } else {
            Err(Error::LdpcDecodeFailure {
                iterations: out.iterations,
            })
        }
    }

    /// Sum-product decoding from channel LLRs (positive favours 0).
    ///
    /// Check updates use the `phi(x) = ln coth(x/2)` form: the magnitude of
    /// each outgoing message is `phi` of the sum of `phi` over the other
    /// incoming magnitudes.
    pub fn decode_llr(&self, channel_llr: &[f64], max_iter: usize) -> LdpcDecoded {
        let channel: Vec<f64> = channel_llr.iter().map(|l| l.clamp(-MAX_LLR, MAX_LLR)).collect();
        let mut hard: Vec<u8> = channel.iter().map(|&l| (l < 0.0) as u8).collect();
        if self.h.syndrome_weight(&hard) == 0 {
            return LdpcDecoded {
                codeword: hard,
                iterations: 0,
                converged: true,
            };
        }
        let table = phi_table();
        let edges = self.edge_var.len();
        let mut c2v = vec![0.0f64; edges];
        let mut total = channel.clone();
        let mut next_total = vec![0.0f64; channel.len()];
        let mut mags = Vec::new();
        for iter in 1..=max_iter {
            next_total.copy_from_slice(&channel);
            for r in 0..self.h.rows {
                let span = self.row_start[r]..self.row_start[r + 1];
                let mut sum = 0.0;
                let mut negative = false;
                mags.clear();
                for e in span.clone() {
                    let v2c = total[self.edge_var[e]] - c2v[e];
                    negative ^= v2c < 0.0;
                    let m = table.phi(v2c.abs());
                    mags.push(m);
                    sum += m;
                }
                for (e, &m) in span.zip(&mags) {
                    let v = self.edge_var[e];
                    let own_negative = total[v] - c2v[e] < 0.0;
                    let magnitude = table.phi((sum - m).max(0.0)).min(MAX_LLR);
                    let msg = if negative ^ own_negative { -magnitude } else { magnitude };
                    c2v[e] = msg;
                    next_total[v] += msg;
                }
            }
            std::mem::swap(&mut total, &mut next_total);
            for (h, &t) in hard.iter_mut().zip(&total) {
                *h = (t < 0.0) as u8;
            }
            if self.h.syndrome_weight(&hard) == 0 {
                return LdpcDecoded {
                    codeword: hard,
                    iterations: iter,
                    converged: true,
                };
            }
        }
        LdpcDecoded {
            codeword: hard,
            iterations: max_iter,
            converged: false,
        }
    }
}

/// `phi(x) = ln((e^x + 1) / (e^x - 1))`, its own inverse on `x > 0`.
pub fn phi_exact(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    let e = (-x).exp();
    ((1.0 + e) / (1.0 - e)).ln()
}

const PHI_LO: f64 = 0.05;
const PHI_HI: f64 = 32.0;
const PHI_STEPS_PER_UNIT: f64 = 512.0;

const MANTISSA_BITS: u32 = 10;

/// Piecewise-linear `phi` on `[PHI_LO, PHI_HI]`, series below, zero above.
struct PhiTable {
    values: Vec<f64>,
    /// log2 of `1 + i / 2^MANTISSA_BITS`.
    log2_mantissa: Vec<f64>,
}

impl PhiTable {
    fn new() -> Self {
        let n = ((PHI_HI - PHI_LO) * PHI_STEPS_PER_UNIT) as usize + 2;
        let values = (0..n)
            .map(|i| phi_exact(PHI_LO + i as f64 / PHI_STEPS_PER_UNIT))
            .collect();
        let log2_mantissa = (0..=1usize << MANTISSA_BITS)
            .map(|i| (1.0 + i as f64 / (1u64 << MANTISSA_BITS) as f64).log2())
            .collect();
        Self { values, log2_mantissa }
    }

    /// Natural log of a positive normal number from its exponent and an
    /// interpolated mantissa table.
    #[inline]
    fn ln(&self, x: f64) -> f64 {
        let bits = x.to_bits();
        let exponent = ((bits >> 52) & 0x7ff) as i64 - 1023;
        let mantissa = bits & ((1u64 << 52) - 1);
        let shift = 52 - MANTISSA_BITS;
        let i = (mantissa >> shift) as usize;
        let frac = (mantissa & ((1u64 << shift) - 1)) as f64 / (1u64 << shift) as f64;
        let t = &self.log2_mantissa;
        (exponent as f64 + t[i] + frac * (t[i + 1] - t[i])) * std::f64::consts::LN_2
    }

    #[inline]
    fn phi(&self, x: f64) -> f64 {
        if x < PHI_LO {
            if x < 1e-13 {
                return MAX_LLR;
            }
            return std::f64::consts::LN_2 - self.ln(x) + x * x / 12.0;
        }
        if x >= PHI_HI {
            return 0.0;
        }
        let pos = (x - PHI_LO) * PHI_STEPS_PER_UNIT;
        let i = pos as usize;
        let frac = pos - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

fn phi_table() -> &'static PhiTable {
    static TABLE: std::sync::OnceLock<PhiTable> = std::sync::OnceLock::new();
    TABLE.get_or_init(PhiTable::new)
}

/// Column-by-column construction: each column takes its checks from the
/// least-filled rows that do not close a 4-cycle; when no such row is left
/// the cycle is accepted and the candidate is later ranked below strict ones.
fn construct(rows: usize, cols: usize, col_weight: usize, row_weight: usize, seed: u64) -> Option<ParityCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut row_cols: Vec<Vec<u32>> = vec![Vec::with_capacity(row_weight); rows];
    let mut col_rows: Vec<Vec<u32>> = vec![Vec::with_capacity(col_weight); cols];
    let mut order: Vec<usize> = (0..cols).collect();
    order.shuffle(&mut rng);
    let mut blocked = vec![u32::MAX; rows];
    for (stamp, &col) in order.iter().enumerate() {
        let stamp = stamp as u32;
        for _ in 0..col_weight {
            // Rows already on this column, or sharing a column with one of them.
            for &r in &col_rows[col] {
                blocked[r as usize] = stamp;
                for &c in &row_cols[r as usize] {
                    for &r2 in &col_rows[c as usize] {
                        blocked[r2 as usize] = stamp;
                    }
                }
            }
            let pick = |strict: bool, rng: &mut ChaCha8Rng| {
                let open = (0..rows).filter(|&r| {
                    row_cols[r].len() < row_weight
                        && !col_rows[col].contains(&(r as u32))
                        && (!strict || blocked[r] != stamp)
                });
                let min = open.clone().map(|r| row_cols[r].len()).min()?;
                let best: Vec<usize> = open.filter(|&r| row_cols[r].len() == min).collect();
                Some(best[rng.random_range(0..best.len())])
            };
            let r = pick(true, &mut rng).or_else(|| pick(false, &mut rng))?;
            row_cols[r].push(col as u32);
            col_rows[col].push(r as u32);
        }
    }
    for row in &mut row_cols {
        row.sort_unstable();
    }
    ParityCheck::from_rows(cols, row_cols).ok()
}
