//! Frame-synchronous Monte Carlo of N ONUs sharing one slot grid.

use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{analytic_collision_prob, throughput, BerReport, Layer, NetworkConfig};
use crate::ecc::{DecodeStats, Pipeline, ZChannel};
use crate::error::{Error, Result};
use crate::prbs::{draw_slots, SelfShrinkingGenerator};

/// RS codewords per ONU encoded and decoded together.
pub const CHUNK_CODEWORDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Random data bits go straight onto the hop layer.
    Uncoded,
    /// Random payload through the RS/LDPC pipeline.
    Coded,
}

/// Hop-layer counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameTally {
    pub frames: u64,
    pub bits: u64,
    pub zeros_sent: u64,
    pub zero_to_one: u64,
    pub one_to_zero: u64,
    /// Largest number of 1s seen in one slot.
    pub max_collision: u32,
}

impl FrameTally {
    pub fn errors(&self) -> u64 {
        self.zero_to_one + self.one_to_zero
    }

    pub fn merge(&mut self, other: &FrameTally) {
        self.frames += other.frames;
        self.bits += other.bits;
        self.zeros_sent += other.zeros_sent;
        self.zero_to_one += other.zero_to_one;
        self.one_to_zero += other.one_to_zero;
        self.max_collision = self.max_collision.max(other.max_collision);
    }

    /// Books one ONU's decision.
    pub fn record(&mut self, sent: bool, read: bool) {
        self.bits += 1;
        if !sent {
            self.zeros_sent += 1;
        }
        match (sent, read) {
            (false, true) => self.zero_to_one += 1,
            (true, false) => self.one_to_zero += 1,
            _ => {}
        }
    }
}

/// One frame: OR-superposes every ONU's bit over its slot set and decodes
/// each ONU from the merged frame.
///
/// `slot_sets` holds `sent.len()` consecutive sets of equal size. `counts`
/// must be all zero with one entry per slot; it is left all zero.
pub fn superpose_and_decode(
    slot_sets: &[u16],
    sent: &[bool],
    received: &mut [bool],
    counts: &mut [u16],
    tally: &mut FrameTally,
) {
    let n = sent.len();
    debug_assert!(n > 0 && slot_sets.len().is_multiple_of(n) && received.len() == n);
    let k = slot_sets.len() / n;
    for (set, _) in slot_sets.chunks_exact(k).zip(sent).filter(|(_, &b)| b) {
        for &s in set {
            counts[s as usize] += 1;
        }
    }
    for (j, set) in slot_sets.chunks_exact(k).enumerate() {
        received[j] = set.iter().all(|&s| counts[s as usize] > 0);
        tally.record(sent[j], received[j]);
    }
    for &s in slot_sets {
        let c = &mut counts[s as usize];
        tally.max_collision = tally.max_collision.max(*c as u32);
        *c = 0;
    }
    tally.frames += 1;
}

/// Per-ONU slot-set generators for one batch of frames.
pub struct HopSchedule {
    gens: Vec<SelfShrinkingGenerator>,
    k: usize,
    frame_slots: usize,
}

impl HopSchedule {
    /// Batch 0 is each key's own sequence; batch `b` enters it elsewhere.
    pub fn new(config: &NetworkConfig, batch: u64) -> Result<Self> {
        let gens = config
            .keys
            .iter()
            .map(|key| key.generator_at(&config.params.taps, batch))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            gens,
            k: config.params.bloom_k,
            frame_slots: config.params.frame_slots,
        })
    }

    pub fn n_onus(&self) -> usize {
        self.gens.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Draws the next frame's slot sets, ONU by ONU, into `out`.
    pub fn next_frame(&mut self, out: &mut [u16]) -> Result<()> {
        if out.len() != self.gens.len() * self.k {
            return Err(Error::Shape {
                expected: self.gens.len() * self.k,
                got: out.len(),
            });
        }
        for (g, set) in self.gens.iter_mut().zip(out.chunks_exact_mut(self.k)) {
            draw_slots(g, self.frame_slots, set)?;
        }
        Ok(())
    }
}

/// Crossover the LDPC decoder assumes for this load.
pub fn decoder_channel(config: &NetworkConfig) -> Result<ZChannel> {
    let p = match config.params.decoder_crossover {
        Some(p) => p,
        None => {
            analytic_collision_prob(
                config.n_onus,
                config.params.bloom_k,
                config.params.frame_slots,
                config.params.p1,
            )?
            .bit_error_exact
        }
    };
    ZChannel::new(p.min(0.499), config.ecc.miss_prob)
}

pub(crate) fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

/// Splits `total` items into `jobs` contiguous ranges.
pub(crate) fn partition(total: u64, jobs: usize) -> Vec<std::ops::Range<u64>> {
    let jobs = jobs.max(1) as u64;
    (0..jobs)
        .map(|b| (total * b / jobs)..(total * (b + 1) / jobs))
        .collect()
}

/// Anything that turns one frame of slot sets and bits into per-ONU reads.
pub trait FrameChannel {
    fn transmit(
        &mut self,
        slot_sets: &[u16],
        sent: &[bool],
        received: &mut [bool],
        tally: &mut FrameTally,
    ) -> Result<()>;
}

/// Ideal OR channel.
pub struct LogicalChannel {
    counts: Vec<u16>,
}

impl LogicalChannel {
    pub fn new(frame_slots: usize) -> Self {
        Self {
            counts: vec![0; frame_slots],
        }
    }
}

impl FrameChannel for LogicalChannel {
    fn transmit(
        &mut self,
        slot_sets: &[u16],
        sent: &[bool],
        received: &mut [bool],
        tally: &mut FrameTally,
    ) -> Result<()> {
        superpose_and_decode(slot_sets, sent, received, &mut self.counts, tally);
        Ok(())
    }
}

/// State of one Monte Carlo batch.
pub struct Batch<C> {
    pub channel: C,
    pub schedule: HopSchedule,
    /// Data bits.
    pub rng: ChaCha8Rng,
    /// Channel model handed to the LDPC decoder.
    pub decoder: ZChannel,
}

#[derive(Default)]
struct Partial {
    channel: FrameTally,
    post_bits: u64,
    post_errors: u64,
    decode: DecodeStats,
}

impl Partial {
    fn merge(&mut self, o: Partial) {
        self.channel.merge(&o.channel);
        self.post_bits += o.post_bits;
        self.post_errors += o.post_errors;
        self.decode.merge(&o.decode);
    }
}

/// Runs `jobs` batches on scoped threads and merges them in batch order.
pub(crate) fn run_batches<T: Send>(jobs: usize, work: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    if jobs <= 1 {
        return Ok(vec![work(0)?]);
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs as u64)
            .map(|b| {
                let work = &work;
                scope.spawn(move || work(b))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("simulation batch panicked"))
            .collect()
    })
}

fn uncoded_batch<C: FrameChannel>(config: &NetworkConfig, batch: &mut Batch<C>, frames: u64) -> Result<Partial> {
    let n = config.n_onus;
    let mut slots = vec![0u16; n * batch.schedule.k()];
    let mut sent = vec![false; n];
    let mut received = vec![false; n];
    let mut part = Partial::default();
    for _ in 0..frames {
        batch.schedule.next_frame(&mut slots)?;
        sent.iter_mut()
            .for_each(|b| *b = batch.rng.random_bool(config.params.p1));
        batch
            .channel
            .transmit(&slots, &sent, &mut received, &mut part.channel)?;
    }
    Ok(part)
}

fn random_payload(rng: &mut ChaCha8Rng, bytes: usize, p1: f64) -> Vec<u8> {
    if p1 == 0.5 {
        let mut v = vec![0u8; bytes];
        rng.fill_bytes(&mut v);
        v
    } else {
        (0..bytes)
            .map(|_| (0..8).fold(0u8, |acc, _| (acc << 1) | rng.random_bool(p1) as u8))
            .collect()
    }
}

fn coded_batch<C: FrameChannel>(
    config: &NetworkConfig,
    pipeline: &Pipeline,
    batch: &mut Batch<C>,
    codewords: std::ops::Range<u64>,
) -> Result<Partial> {
    let n = config.n_onus;
    let mut slots = vec![0u16; n * batch.schedule.k()];
    let mut sent = vec![false; n];
    let mut received = vec![false; n];
    let mut part = Partial::default();
    let mut start = codewords.start;
    while start < codewords.end {
        let count = (codewords.end - start).min(CHUNK_CODEWORDS as u64) as usize;
        start += count as u64;
        let bytes = count * pipeline.granule();
        let payloads: Vec<Vec<u8>> = (0..n)
            .map(|_| random_payload(&mut batch.rng, bytes, config.params.p1))
            .collect();
        let coded = payloads
            .iter()
            .map(|p| pipeline.encode(p))
            .collect::<Result<Vec<_>>>()?;
        let len = coded[0].len();
        let mut rx = vec![vec![0u8; len]; n];
        for i in 0..len {
            batch.schedule.next_frame(&mut slots)?;
            for (s, c) in sent.iter_mut().zip(&coded) {
                *s = c[i] == 1;
            }
            batch
                .channel
                .transmit(&slots, &sent, &mut received, &mut part.channel)?;
            for (r, &b) in rx.iter_mut().zip(&received) {
                r[i] = b as u8;
            }
        }
        for (payload, r) in payloads.iter().zip(&rx) {
            let (decoded, stats) = pipeline.decode_lossy(r, &batch.decoder)?;
            part.decode.merge(&stats);
            part.post_bits += payload.len() as u64 * 8;
            part.post_errors += payload
                .iter()
                .zip(&decoded)
                .map(|(a, b)| (a ^ b).count_ones() as u64)
                .sum::<u64>();
        }
    }
    Ok(part)
}

/// Monte Carlo of `bits_per_onu` data bits from every ONU at once.
///
/// In coded mode the count is rounded up to whole RS codewords. Results are
/// a function of (config, seed, jobs).
pub fn simulate_logical(
    config: &NetworkConfig,
    bits_per_onu: u64,
    mode: Mode,
    seed: u64,
    jobs: usize,
) -> Result<BerReport> {
    let pipeline = match mode {
        Mode::Coded => Some(Pipeline::new(&config.ecc)?),
        Mode::Uncoded => None,
    };
    simulate_with(config, pipeline.as_ref(), bits_per_onu, seed, jobs)
}

/// Logical simulation with a prebuilt pipeline, or uncoded when `None`.
pub fn simulate_with(
    config: &NetworkConfig,
    pipeline: Option<&Pipeline>,
    bits_per_onu: u64,
    seed: u64,
    jobs: usize,
) -> Result<BerReport> {
    simulate_layer(config, pipeline, bits_per_onu, jobs, Layer::Logical, |b| {
        Ok(Batch {
            channel: LogicalChannel::new(config.params.frame_slots),
            schedule: HopSchedule::new(config, b)?,
            rng: batch_rng(seed, b),
            decoder: decoder_channel(config)?,
        })
    })
}

/// Shared driver: `make` builds the state of batch `b`.
pub fn simulate_layer<C: FrameChannel>(
    config: &NetworkConfig,
    pipeline: Option<&Pipeline>,
    bits_per_onu: u64,
    jobs: usize,
    layer: Layer,
    make: impl Fn(u64) -> Result<Batch<C>> + Sync,
) -> Result<BerReport> {
    config.validate()?;
    if bits_per_onu == 0 {
        return Err(Error::Config("bits per ONU must be positive".into()));
    }
    let started = Instant::now();
    let jobs = jobs.max(1);
    let (parts, bits_sent) = match pipeline {
        None => {
            let ranges = partition(bits_per_onu, jobs);
            let parts = run_batches(jobs, |b| {
                let r = &ranges[b as usize];
                uncoded_batch(config, &mut make(b)?, r.end - r.start)
            })?;
            (parts, bits_per_onu)
        }
        Some(pipeline) => {
            let cw_bits = pipeline.granule() as u64 * 8;
            let codewords = bits_per_onu.div_ceil(cw_bits);
            let ranges = partition(codewords, jobs);
            let parts = run_batches(jobs, |b| {
                coded_batch(config, pipeline, &mut make(b)?, ranges[b as usize].clone())
            })?;
            (parts, codewords * cw_bits)
        }
    };
    let mut total = Partial::default();
    parts.into_iter().for_each(|p| total.merge(p));
    Ok(BerReport {
        layer,
        n_onus: config.n_onus,
        bits_per_onu: bits_sent,
        frames: total.channel.frames,
        channel: total.channel,
        post_ecc_bits: total.post_bits,
        post_ecc_errors: total.post_errors,
        decode: total.decode,
        utilization: throughput(config).utilization,
        wall_time: started.elapsed(),
    })
}

/// One report per ONU count, each using the first `n` keys of `config`.
pub fn sweep_onus(
    config: &NetworkConfig,
    counts: &[usize],
    bits_per_onu: u64,
    mode: Mode,
    seed: u64,
    jobs: usize,
) -> Result<Vec<BerReport>> {
    if counts.is_empty() {
        return Err(Error::Config("empty ONU count list".into()));
    }
    let pipeline = match mode {
        Mode::Coded => Some(Pipeline::new(&config.ecc)?),
        Mode::Uncoded => None,
    };
    counts
        .iter()
        .map(|&n| simulate_with(&config.truncated(n)?, pipeline.as_ref(), bits_per_onu, seed, jobs))
        .collect()
}

/// Largest number of ONUs sending 1 in the same slot over `frames` frames.
pub fn max_colliding_ones(config: &NetworkConfig, frames: u64, seed: u64) -> Result<u32> {
    Ok(simulate_with(config, None, frames, seed, 1)?.max_collision())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hopcode::{decode_bit, encode_bit, superpose, FramePlan};

    #[test]
    fn kernel_agrees_with_frame_level_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut counts = vec![0u16; 40];
        let mut tally = FrameTally::default();
        for _ in 0..500 {
            let n = rng.random_range(1..12);
            let mut slots = Vec::new();
            let plans: Vec<FramePlan> = (0..n)
                .map(|onu| {
                    let set: Vec<u16> = rand::seq::index::sample(&mut rng, 40, 3)
                        .into_iter()
                        .map(|s| s as u16)
                        .collect();
                    slots.extend(&set);
                    FramePlan {
                        onu,
                        frame_index: 0,
                        slot_set: set,
                        data_bit: rng.random(),
                    }
                })
                .collect();
            let frames: Vec<_> = plans.iter().map(|p| encode_bit(p, 40).unwrap()).collect();
            let merged = superpose(&frames).unwrap();
            let sent: Vec<bool> = plans.iter().map(|p| p.data_bit).collect();
            let mut received = vec![false; n];
            superpose_and_decode(&slots, &sent, &mut received, &mut counts, &mut tally);
            for (p, &r) in plans.iter().zip(&received) {
                assert_eq!(decode_bit(&merged, &p.slot_set).unwrap(), r);
            }
            assert!(counts.iter().all(|&c| c == 0));
        }
        assert_eq!(tally.one_to_zero, 0);
    }

    #[test]
    fn single_onu_never_errs() {
        let config = NetworkConfig::with_defaults(1, 3).unwrap();
        let r = simulate_logical(&config, 20_000, Mode::Uncoded, 1, 1).unwrap();
        assert_eq!(r.channel.errors(), 0);
        assert_eq!(r.pre_ecc_ber(), 0.0);
        assert_eq!(r.max_collision(), 1);
        assert_eq!(r.post_ecc_ber(), None);
    }

    #[test]
    fn results_depend_only_on_seed_and_jobs() {
        let config = NetworkConfig::with_defaults(32, 3).unwrap();
        let a = simulate_logical(&config, 30_000, Mode::Uncoded, 9, 2).unwrap();
        let b = simulate_logical(&config, 30_000, Mode::Uncoded, 9, 2).unwrap();
        assert_eq!(a.channel, b.channel);
        assert_eq!(a.frames, 30_000);
        let c = simulate_logical(&config, 30_000, Mode::Uncoded, 10, 2).unwrap();
        assert_ne!(a.channel, c.channel);
    }

    #[test]
    fn coded_light_load_is_error_free() {
        let config = NetworkConfig::with_defaults(8, 3).unwrap();
        let r = simulate_logical(&config, 223 * 8 * 3, Mode::Coded, 2, 1).unwrap();
        assert_eq!(r.post_ecc_bits, 223 * 8 * 3 * 8);
        assert_eq!(r.post_ecc_errors, 0);
        assert_eq!(r.channel.one_to_zero, 0);
        assert_eq!(r.bits_per_onu, 223 * 8 * 3);
    }

    #[test]
    fn partition_covers_range() {
        let parts = partition(10, 3);
        assert_eq!(parts, vec![0..3, 3..6, 6..10]);
        assert_eq!(partition(5, 0), vec![0..5]);
    }

    #[test]
    fn zero_bits_is_a_usage_error() {
        let config = NetworkConfig::with_defaults(2, 3).unwrap();
        assert!(simulate_logical(&config, 0, Mode::Uncoded, 1, 1).is_err());
        assert!(sweep_onus(&config, &[], 10, Mode::Uncoded, 1, 1).is_err());
    }
}
