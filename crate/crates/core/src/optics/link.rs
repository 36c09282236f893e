//! Frame-by-frame physical channel: combiner, upstream loss, EDFA,
//! downstream loss, optical filter, photodiode noise, electrical filter,
//! slot sampling and threshold decision.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use super::filter::Biquad;
use super::waveform::{add_pulses, amplify_in_place, pulse_shape};
use super::{db_to_linear, OpticalParams, ELECTRON_CHARGE};
use crate::ecc::ZChannel;
use crate::error::{Error, Result};
use crate::macsim::{FrameChannel, FrameTally, HopSchedule};

const GOLDEN_ITERATIONS: usize = 200;

/// Decision threshold and the calibration statistics it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    /// Photocurrent in amperes.
    pub level: f64,
    /// Per multiplicity (number of coincident 1s): samples, mean, std.
    pub classes: Vec<ClassStats>,
    /// Slot error rate predicted by the Gaussian class model at `level`.
    pub model_ber: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassStats {
    pub count: u64,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Default, Clone)]
struct Accumulator {
    count: u64,
    sum: f64,
    sum_sq: f64,
    min: f64,
    max: f64,
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        if self.count == 0 {
            self.min = x;
            self.max = x;
        }
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
        self.min = self.min.min(x);
        self.max = self.max.max(x);
    }

    fn stats(&self) -> ClassStats {
        if self.count == 0 {
            return ClassStats::default();
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let var = (self.sum_sq / n - mean * mean).max(0.0);
        ClassStats {
            count: self.count,
            mean,
            std: var.sqrt(),
            min: self.min,
            max: self.max,
        }
    }
}

fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Slot error probability of a Gaussian mixture at threshold `th`.
fn model_ber(classes: &[ClassStats], th: f64, sigma_floor: f64) -> f64 {
    let total: u64 = classes.iter().map(|c| c.count).sum();
    classes
        .iter()
        .enumerate()
        .filter(|(_, c)| c.count > 0)
        .map(|(m, c)| {
            let sigma = c.std.max(sigma_floor);
            let weight = c.count as f64 / total as f64;
            if m == 0 {
                weight * q_function((th - c.mean) / sigma)
            } else {
                weight * q_function((c.mean - th) / sigma)
            }
        })
        .sum()
}

fn golden_section(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..GOLDEN_ITERATIONS {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Threshold minimising the Gaussian-model error rate between the empty
/// class and the single-pulse class; when calibration saw no overlap the
/// search stays inside the observed gap.
pub fn place_threshold(classes: &[ClassStats]) -> Result<Threshold> {
    let zero = classes.first().filter(|c| c.count > 0);
    let lit = classes.iter().skip(1).find(|c| c.count > 0);
    let (Some(zero), Some(lit)) = (zero, lit) else {
        return Err(Error::Config("calibration needs both empty and lit slots".into()));
    };
    let min_lit = classes
        .iter()
        .skip(1)
        .filter(|c| c.count > 0)
        .map(|c| c.min)
        .fold(f64::INFINITY, f64::min);
    let (lo, hi) = if zero.max < min_lit {
        (zero.max, min_lit)
    } else {
        (zero.mean.min(lit.mean), lit.mean.max(zero.mean))
    };
    let floor = 1e-9 * (lit.mean - zero.mean).abs().max(f64::MIN_POSITIVE);
    let level = golden_section(lo, hi, |th| model_ber(classes, th, floor));
    Ok(Threshold {
        level,
        classes: classes.to_vec(),
        model_ber: model_ber(classes, level, floor),
    })
}

/// One batch's optical chain. Filter state carries over between frames.
pub struct PhysicalLink {
    frame_slots: usize,
    sps: usize,
    shape: Vec<f64>,
    base: f64,
    peak: f64,
    /// Upstream loss, gain and downstream loss folded per stage.
    up: f64,
    down: f64,
    params: OpticalParams,
    responsivity: f64,
    shot_coeff: f64,
    thermal_var: f64,
    optical: Biquad,
    electrical: Biquad,
    delay: usize,
    settled: bool,
    rng: ChaCha8Rng,
    samples: Vec<f64>,
    counts: Vec<u16>,
    currents: Vec<f64>,
    threshold: Option<Threshold>,
    decoder: Option<ZChannel>,
}

impl PhysicalLink {
    pub fn new(params: &OpticalParams, frame_slots: usize, n_online: usize, noise: ChaCha8Rng) -> Result<Self> {
        params.validate()?;
        let fs = params.sample_rate();
        let optical = Biquad::butterworth_lowpass(params.optical_filter_hz, fs)?;
        let electrical = Biquad::butterworth_lowpass(params.electrical_filter_hz, fs)?;
        let shape = pulse_shape(params);
        let sps = params.samples_per_slot;
        let delay = chain_delay(&shape, &optical, &electrical);
        if sps / 2 + delay >= sps {
            return Err(Error::Config(format!(
                "filter delay of {delay} samples leaves the slot at {sps} samples per slot"
            )));
        }
        let thermal = if params.thermal_noise {
            params.thermal_density()?
        } else {
            0.0
        };
        let p0 = params.p0_watts();
        Ok(Self {
            frame_slots,
            sps,
            shape,
            base: n_online as f64 * p0,
            peak: params.p1_watts() - p0,
            up: 1.0 / db_to_linear(params.stretch_loss_db()),
            down: 1.0 / db_to_linear(params.stretch_loss_db()),
            params: params.clone(),
            responsivity: params.pd_responsivity,
            shot_coeff: if params.shot_noise { ELECTRON_CHARGE * fs } else { 0.0 },
            thermal_var: thermal * thermal * fs / 2.0,
            optical,
            electrical,
            delay,
            settled: false,
            rng: noise,
            samples: vec![0.0; frame_slots * sps],
            counts: vec![0; frame_slots],
            currents: vec![0.0; frame_slots],
            threshold: None,
            decoder: None,
        })
    }

    /// Samples between a slot's pulse centre and the filtered peak.
    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn threshold(&self) -> Option<&Threshold> {
        self.threshold.as_ref()
    }

    /// Z channel seen at the hop layer during calibration.
    pub fn decoder_channel(&self) -> Option<ZChannel> {
        self.decoder
    }

    /// Sampled photocurrent of every slot; also fills per-slot multiplicity.
    pub fn slot_currents(&mut self, slot_sets: &[u16], bits: &[bool]) -> (&[f64], &[u16]) {
        self.samples.iter_mut().for_each(|s| *s = self.base);
        add_pulses(&mut self.samples, &self.shape, self.peak, slot_sets, bits);
        self.counts.iter_mut().for_each(|c| *c = 0);
        if !bits.is_empty() {
            let k = slot_sets.len() / bits.len();
            for (set, _) in slot_sets.chunks_exact(k).zip(bits).filter(|(_, &b)| b) {
                for &s in set {
                    self.counts[s as usize] += 1;
                }
            }
        }
        for s in self.samples.iter_mut() {
            *s *= self.up;
        }
        amplify_in_place(&mut self.samples, &self.params, &mut self.rng);
        if !self.settled {
            self.optical.settle(self.samples[0] * self.down);
            self.electrical.settle(self.samples[0] * self.down * self.responsivity);
            self.settled = true;
        }
        let mid = self.sps / 2 + self.delay;
        for (i, &p) in self.samples.iter().enumerate() {
            let p = self.optical.step(p * self.down);
            let current = self.responsivity * p;
            let var = self.shot_coeff * current.max(0.0) + self.thermal_var;
            let noisy = if var > 0.0 {
                let z: f64 = self.rng.sample(StandardNormal);
                current + var.sqrt() * z
            } else {
                current
            };
            let y = self.electrical.step(noisy);
            if i % self.sps == mid {
                self.currents[i / self.sps] = y;
            }
        }
        (&self.currents, &self.counts)
    }

    /// Places the threshold from `frames` calibration frames and records the
    /// hop-level error rates those frames would have produced.
    pub fn calibrate(
        &mut self,
        schedule: &mut HopSchedule,
        bit_rng: &mut ChaCha8Rng,
        p1: f64,
        frames: usize,
        miss_floor: f64,
    ) -> Result<&Threshold> {
        let n = schedule.n_onus();
        let k = schedule.k();
        let mut slots = vec![0u16; n * k];
        let mut bits = vec![false; n];
        let mut stored = Vec::with_capacity(frames);
        let mut classes: Vec<Accumulator> = Vec::new();
        for _ in 0..frames {
            schedule.next_frame(&mut slots)?;
            bits.iter_mut().for_each(|b| *b = bit_rng.random_bool(p1));
            let (currents, counts) = self.slot_currents(&slots, &bits);
            for (&c, &m) in currents.iter().zip(counts) {
                if classes.len() <= m as usize {
                    classes.resize(m as usize + 1, Accumulator::default());
                }
                classes[m as usize].push(c);
            }
            stored.push((slots.clone(), bits.clone(), currents.to_vec()));
        }
        let stats: Vec<ClassStats> = classes.iter().map(Accumulator::stats).collect();
        let threshold = place_threshold(&stats)?;
        let mut tally = FrameTally::default();
        for (slots, bits, currents) in &stored {
            for (set, &b) in slots.chunks_exact(k).zip(bits) {
                let read = set.iter().all(|&s| currents[s as usize] > threshold.level);
                tally.record(b, read);
            }
        }
        let rate = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let crossover = rate(tally.zero_to_one, tally.zeros_sent).min(0.499);
        let miss = rate(tally.one_to_zero, tally.bits - tally.zeros_sent).clamp(miss_floor, 0.499);
        self.decoder = Some(ZChannel::new(crossover, miss)?);
        self.threshold = Some(threshold);
        Ok(self.threshold.as_ref().expect("just set"))
    }

    /// Slot decisions against the calibrated threshold.
    pub fn decide(&mut self, slot_sets: &[u16], bits: &[bool], decided: &mut [bool]) -> Result<()> {
        let level = self
            .threshold
            .as_ref()
            .ok_or_else(|| Error::Config("link used before calibration".into()))?
            .level;
        let (currents, _) = self.slot_currents(slot_sets, bits);
        for (d, &c) in decided.iter_mut().zip(currents) {
            *d = c > level;
        }
        Ok(())
    }

    /// Number of 1s in each slot of the last frame.
    pub fn multiplicity(&self) -> &[u16] {
        &self.counts
    }

    pub fn frame_slots(&self) -> usize {
        self.frame_slots
    }
}

impl FrameChannel for PhysicalLink {
    fn transmit(
        &mut self,
        slot_sets: &[u16],
        sent: &[bool],
        received: &mut [bool],
        tally: &mut FrameTally,
    ) -> Result<()> {
        let level = self
            .threshold
            .as_ref()
            .ok_or_else(|| Error::Config("link used before calibration".into()))?
            .level;
        let n = sent.len();
        let k = slot_sets.len() / n;
        let (currents, counts) = self.slot_currents(slot_sets, sent);
        for (j, set) in slot_sets.chunks_exact(k).enumerate() {
            received[j] = set.iter().all(|&s| currents[s as usize] > level);
            tally.record(sent[j], received[j]);
        }
        let max = counts.iter().copied().max().unwrap_or(0) as u32;
        tally.max_collision = tally.max_collision.max(max);
        tally.frames += 1;
        Ok(())
    }
}

/// Offset from pulse centre to the peak of the filtered pulse, in samples.
fn chain_delay(shape: &[f64], optical: &Biquad, electrical: &Biquad) -> usize {
    let sps = shape.len();
    let mut o = optical.clone();
    let mut e = electrical.clone();
    o.settle(0.0);
    e.settle(0.0);
    let mut best = (0usize, f64::MIN);
    for i in 0..4 * sps {
        let x = if (sps..2 * sps).contains(&i) {
            shape[i - sps]
        } else {
            0.0
        };
        let y = e.step(o.step(x));
        if y > best.1 {
            best = (i, y);
        }
    }
    best.0.saturating_sub(sps + sps / 2)
}
