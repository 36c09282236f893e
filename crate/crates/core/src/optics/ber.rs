//! Slot-level Monte Carlo BER of the optical chain, the extinction-ratio
//! solver and the full coded stack over the physical channel.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::link::PhysicalLink;
use super::OpticalParams;
use crate::ecc::Pipeline;
use crate::error::{Error, Result};
use crate::macsim::sim::{batch_rng, partition, run_batches};
use crate::macsim::{simulate_layer, Batch, BerReport, HopSchedule, Layer, Mode, NetworkConfig};

/// Errors below which an estimate is flagged.
pub const MIN_ERRORS: u64 = 100;
pub const ER_BRACKET_DB: (f64, f64) = (5.0, 40.0);
pub const ER_TOLERANCE_DB: f64 = 0.2;

const NOISE_STREAM: u64 = 1 << 63;
const CALIBRATION_STREAM: u64 = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleStatus {
    Sufficient,
    /// Fewer than `MIN_ERRORS` errors; the interval is wide.
    Insufficient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalBer {
    pub n_onus: usize,
    pub er_db: f64,
    pub slots: u64,
    pub errors: u64,
    /// Dark slots decided lit.
    pub zero_to_one: u64,
    /// Lit slots decided dark.
    pub one_to_zero: u64,
    pub ber: f64,
    /// 95% Wilson score interval.
    pub ci: (f64, f64),
    /// Threshold of batch 0, in amperes.
    pub threshold: f64,
    pub status: SampleStatus,
}

pub fn wilson_interval(errors: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn noise_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    batch_rng(seed, NOISE_STREAM | batch)
}

/// Link of batch `b`, calibrated on frames that the measurement never sees.
fn calibrated_link(net: &NetworkConfig, params: &OpticalParams, seed: u64, batch: u64) -> Result<PhysicalLink> {
    let mut link = PhysicalLink::new(params, net.params.frame_slots, net.n_onus, noise_rng(seed, batch))?;
    let mut schedule = HopSchedule::new(net, CALIBRATION_STREAM | batch)?;
    let mut bits = batch_rng(seed, CALIBRATION_STREAM | batch);
    link.calibrate(
        &mut schedule,
        &mut bits,
        net.params.p1,
        params.calibration_frames,
        net.ecc.miss_prob,
    )?;
    Ok(link)
}

#[derive(Default)]
struct SlotTally {
    slots: u64,
    zero_to_one: u64,
    one_to_zero: u64,
    threshold: f64,
}

/// Slot decision error rate with all `net.n_onus` ONUs online.
///
/// Uses `ceil(n_slots / frame_slots)` frames. The same seed gives the same
/// hop patterns, data and noise draws at every extinction ratio.
pub fn physical_ber(
    net: &NetworkConfig,
    params: &OpticalParams,
    er_db: f64,
    n_slots: u64,
    seed: u64,
    jobs: usize,
) -> Result<PhysicalBer> {
    net.validate()?;
    if n_slots == 0 {
        return Err(Error::Config("slot count must be positive".into()));
    }
    let params = OpticalParams {
        extinction_ratio_db: er_db,
        ..params.clone()
    };
    params.validate()?;
    let jobs = jobs.max(1);
    let s = net.params.frame_slots;
    let ranges = partition(n_slots.div_ceil(s as u64), jobs);
    let parts = run_batches(jobs, |b| {
        let mut link = calibrated_link(net, &params, seed, b)?;
        let mut schedule = HopSchedule::new(net, b)?;
        let mut rng = batch_rng(seed, b);
        let mut slots = vec![0u16; net.n_onus * schedule.k()];
        let mut bits = vec![false; net.n_onus];
        let mut decided = vec![false; s];
        let mut t = SlotTally {
            threshold: link.threshold().map_or(0.0, |t| t.level),
            ..SlotTally::default()
        };
        let r = &ranges[b as usize];
        for _ in r.start..r.end {
            schedule.next_frame(&mut slots)?;
            bits.iter_mut().for_each(|x| *x = rng.random_bool(net.params.p1));
            link.decide(&slots, &bits, &mut decided)?;
            for (&d, &c) in decided.iter().zip(link.multiplicity()) {
                match (c > 0, d) {
                    (false, true) => t.zero_to_one += 1,
                    (true, false) => t.one_to_zero += 1,
                    _ => {}
                }
            }
            t.slots += s as u64;
        }
        Ok(t)
    })?;
    let threshold = parts[0].threshold;
    let (slots, zero_to_one, one_to_zero) = parts.iter().fold((0, 0, 0), |a, t| {
        (a.0 + t.slots, a.1 + t.zero_to_one, a.2 + t.one_to_zero)
    });
    let errors = zero_to_one + one_to_zero;
    Ok(PhysicalBer {
        n_onus: net.n_onus,
        er_db,
        slots,
        errors,
        zero_to_one,
        one_to_zero,
        ber: errors as f64 / slots as f64,
        ci: wilson_interval(errors, slots, 1.96),
        threshold,
        status: if errors < MIN_ERRORS {
            SampleStatus::Insufficient
        } else {
            SampleStatus::Sufficient
        },
    })
}

/// Smallest extinction ratio in `ER_BRACKET_DB` whose slot BER is at most
/// `target`, by bisection to `ER_TOLERANCE_DB`.
pub fn min_extinction_ratio(
    net: &NetworkConfig,
    params: &OpticalParams,
    target: f64,
    n_slots: u64,
    seed: u64,
    jobs: usize,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(crate::error::domain("target", target, "(0, 1)"));
    }
    let (mut lo, mut hi) = ER_BRACKET_DB;
    let ber = |er| physical_ber(net, params, er, n_slots, seed, jobs).map(|r| r.ber);
    let at_hi = ber(hi)?;
    if at_hi > target {
        return Err(Error::BracketExhausted {
            target,
            lo,
            hi,
            ber_at_hi: at_hi,
        });
    }
    if ber(lo)? <= target {
        return Ok(lo);
    }
    while hi - lo > ER_TOLERANCE_DB {
        let mid = 0.5 * (lo + hi);
        if ber(mid)? <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Full stack over the physical channel; uncoded mode skips the pipeline.
///
/// Measurement frames match `simulate_logical` with the same seed, so the
/// two layers form a paired comparison. The LDPC decoder is given the hop
/// error rates observed during calibration.
pub fn run_physical(
    net: &NetworkConfig,
    params: &OpticalParams,
    bits_per_onu: u64,
    mode: Mode,
    seed: u64,
    jobs: usize,
) -> Result<BerReport> {
    let pipeline = match mode {
        Mode::Coded => Some(Pipeline::new(&net.ecc)?),
        Mode::Uncoded => None,
    };
    simulate_layer(net, pipeline.as_ref(), bits_per_onu, jobs, Layer::Physical, |b| {
        let link = calibrated_link(net, params, seed, b)?;
        let decoder = link.decoder_channel().expect("calibrated");
        Ok(Batch {
            channel: link,
            schedule: HopSchedule::new(net, b)?,
            rng: batch_rng(seed, b),
            decoder,
        })
    })
}
