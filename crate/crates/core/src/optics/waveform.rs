//! Optical power envelope of one frame and the passive/active stages that
//! act on it before the receiver.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{db_to_linear, OpticalParams};
use crate::error::{Error, Result};
use crate::hopcode::FramePlan;

/// Power samples in watts, `samples_per_slot` per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformFrame {
    pub frame_index: u64,
    pub samples_per_slot: usize,
    pub samples: Vec<f64>,
}

impl WaveformFrame {
    pub fn slots(&self) -> usize {
        self.samples.len() / self.samples_per_slot
    }

    pub fn mean_power(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn slot(&self, s: usize) -> &[f64] {
        &self.samples[s * self.samples_per_slot..(s + 1) * self.samples_per_slot]
    }

    /// Multiplies every sample by `10^(-loss_db/10)`.
    pub fn attenuate(&mut self, loss_db: f64) {
        let g = 1.0 / db_to_linear(loss_db);
        self.samples.iter_mut().for_each(|s| *s *= g);
    }
}

/// Super-Gaussian `exp(-(t/T0)^(2m))` sampled at `j / sps` of a slot and
/// centred on the slot middle, with FWHM equal to `duty_cycle` slots.
pub fn pulse_shape(params: &OpticalParams) -> Vec<f64> {
    let sps = params.samples_per_slot;
    let m = params.pulse_order as f64;
    let t0 = params.duty_cycle / (2.0 * std::f64::consts::LN_2.powf(1.0 / (2.0 * m)));
    (0..sps)
        .map(|j| {
            let t = j as f64 / sps as f64 - 0.5;
            (-(t / t0).powf(2.0 * m)).exp()
        })
        .collect()
}

/// Adds pulses into a frame already holding the base level. `slot_sets`
/// holds one set of equal size per entry of `bits`.
pub(crate) fn add_pulses(samples: &mut [f64], shape: &[f64], peak: f64, slot_sets: &[u16], bits: &[bool]) {
    if bits.is_empty() {
        return;
    }
    let k = slot_sets.len() / bits.len();
    let sps = shape.len();
    for (set, _) in slot_sets.chunks_exact(k).zip(bits).filter(|(_, &b)| b) {
        for &s in set {
            let dst = &mut samples[s as usize * sps..(s as usize + 1) * sps];
            for (d, &p) in dst.iter_mut().zip(shape) {
                *d += peak * p;
            }
        }
    }
}

/// Combined transmitter power of one frame, referred to the transmitters.
///
/// Every online ONU contributes its 0 level `P0` throughout; each 1 adds a
/// pulse of peak `P1 - P0` in each slot of its set.
pub fn synth_frame(
    plans: &[FramePlan],
    params: &OpticalParams,
    frame_slots: usize,
    n_online: usize,
) -> Result<WaveformFrame> {
    params.validate()?;
    if plans.len() > n_online {
        return Err(Error::Config(format!(
            "{} transmitting ONUs but only {n_online} online",
            plans.len()
        )));
    }
    let k = plans.first().map_or(0, |p| p.slot_set.len());
    let mut slot_sets = Vec::with_capacity(plans.len() * k);
    for plan in plans {
        if plan.slot_set.len() != k {
            return Err(Error::Shape {
                expected: k,
                got: plan.slot_set.len(),
            });
        }
        if let Some(&s) = plan.slot_set.iter().find(|&&s| s as usize >= frame_slots) {
            return Err(Error::SlotOutOfRange {
                index: s as usize,
                frame_slots,
            });
        }
        slot_sets.extend(&plan.slot_set);
    }
    let bits: Vec<bool> = plans.iter().map(|p| p.data_bit).collect();
    let p0 = params.p0_watts();
    let mut samples = vec![n_online as f64 * p0; frame_slots * params.samples_per_slot];
    add_pulses(
        &mut samples,
        &pulse_shape(params),
        params.p1_watts() - p0,
        &slot_sets,
        &bits,
    );
    Ok(WaveformFrame {
        frame_index: plans.first().map_or(0, |p| p.frame_index),
        samples_per_slot: params.samples_per_slot,
        samples,
    })
}

/// Per-sample standard deviation of signal-ASE beat noise on power `p`
/// already at the amplifier output: variance `4 p S_sp B`, `B = fs / 2`.
pub(crate) fn beat_sigma_factor(params: &OpticalParams) -> f64 {
    (4.0 * params.ase_psd() * params.sample_rate() / 2.0).sqrt()
}

/// Constant-gain amplification followed by white signal-ASE beat noise.
/// Samples are clipped at zero power.
pub fn edfa_amplify<R: Rng + ?Sized>(frame: &WaveformFrame, params: &OpticalParams, rng: &mut R) -> WaveformFrame {
    let mut out = frame.clone();
    amplify_in_place(&mut out.samples, params, rng);
    out
}

pub(crate) fn amplify_in_place<R: Rng + ?Sized>(samples: &mut [f64], params: &OpticalParams, rng: &mut R) {
    let gain = db_to_linear(params.edfa_gain_db);
    let factor = beat_sigma_factor(params);
    let noisy = params.ase_noise && factor > 0.0;
    for s in samples {
        let p = *s * gain;
        *s = if noisy {
            let z: f64 = rng.sample(StandardNormal);
            (p + factor * p.sqrt() * z).max(0.0)
        } else {
            p
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{dbm_to_watts, watts_to_dbm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plan(onu: usize, slots: &[u16], bit: bool) -> FramePlan {
        FramePlan {
            onu,
            frame_index: 0,
            slot_set: slots.to_vec(),
            data_bit: bit,
        }
    }

    #[test]
    fn pulse_has_requested_width() {
        let p = OpticalParams {
            samples_per_slot: 1200,
            ..OpticalParams::default()
        };
        let shape = pulse_shape(&p);
        assert!((shape[600] - 1.0).abs() < 1e-12);
        let above = shape.iter().filter(|&&v| v >= 0.5).count() as f64 / 1200.0;
        assert!((above - 1.0 / 3.0).abs() < 2.0 / 1200.0);
        assert!(shape[0] < 1e-100);
    }

    #[test]
    fn flat_zero_frame() {
        let p = OpticalParams::default();
        let f = synth_frame(&[plan(0, &[1, 2, 3, 4], false)], &p, 356, 1).unwrap();
        let expected = p.p1_watts() * 10f64.powf(-1.66);
        assert!(f.samples.iter().all(|&s| (s - expected).abs() < 1e-18));
        assert!((expected / p.p1_watts() - 0.0219).abs() < 1e-4);
        assert_eq!(f.slots(), 356);
    }

    #[test]
    fn colliding_pulses_add() {
        let p = OpticalParams::default();
        let one = synth_frame(&[plan(0, &[5, 9], true), plan(1, &[1, 2], false)], &p, 16, 2).unwrap();
        let two = synth_frame(&[plan(0, &[5, 9], true), plan(1, &[5, 7], true)], &p, 16, 2).unwrap();
        let peak = |f: &WaveformFrame| f.slot(5).iter().cloned().fold(0.0, f64::max);
        assert!(peak(&two) > peak(&one));
        let single_peak = 2.0 * p.p0_watts() + p.p1_watts() - p.p0_watts();
        assert!((peak(&one) - single_peak).abs() < 1e-15);
        assert!((peak(&two) - (2.0 * p.p1_watts())).abs() < 1e-15);
    }

    #[test]
    fn nobody_online_is_dark() {
        let f = synth_frame(&[], &OpticalParams::default(), 356, 0).unwrap();
        assert!(f.samples.iter().all(|&s| s == 0.0));
        assert!(synth_frame(&[plan(0, &[400], true)], &OpticalParams::default(), 356, 1).is_err());
        assert!(synth_frame(&[plan(0, &[1], true)], &OpticalParams::default(), 356, 0).is_err());
    }

    #[test]
    fn passive_stage_scales_mean_power() {
        let p = OpticalParams::default();
        let plans: Vec<_> = (0..20)
            .map(|i| plan(i, &[i as u16, 30 + i as u16], i % 2 == 0))
            .collect();
        let mut f = synth_frame(&plans, &p, 64, 20).unwrap();
        let before = f.mean_power();
        f.attenuate(p.stretch_loss_db());
        let change = watts_to_dbm(before) - watts_to_dbm(f.mean_power());
        assert!((change - 28.0).abs() < 0.01);
    }

    #[test]
    fn noiseless_amplifier_is_pure_gain() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [
            OpticalParams {
                edfa_nf_db: f64::NEG_INFINITY,
                ..OpticalParams::default()
            },
            OpticalParams {
                ase_noise: false,
                ..OpticalParams::default()
            },
        ] {
            let f = synth_frame(&[plan(0, &[3], true)], &p, 8, 1).unwrap();
            let out = edfa_amplify(&f, &p, &mut rng);
            for (a, b) in out.samples.iter().zip(&f.samples) {
                assert!((a / b - 10f64.powf(2.7)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn amplified_flat_input_lands_at_plus_one_dbm() {
        let p = OpticalParams::default();
        let frame = WaveformFrame {
            frame_index: 0,
            samples_per_slot: 16,
            samples: vec![dbm_to_watts(-26.0); 16 * 2000],
        };
        let out = edfa_amplify(&frame, &p, &mut ChaCha8Rng::seed_from_u64(2));
        assert!((watts_to_dbm(out.mean_power()) - 1.0).abs() < 0.01);
        assert!(out.samples.iter().any(|&s| (s - dbm_to_watts(1.0)).abs() > 1e-9));
    }

    #[test]
    fn ase_variance_scales_with_simulation_bandwidth() {
        let variance = |sps: usize| {
            let p = OpticalParams {
                samples_per_slot: sps,
                ..OpticalParams::default()
            };
            let frame = WaveformFrame {
                frame_index: 0,
                samples_per_slot: sps,
                samples: vec![dbm_to_watts(-26.0); 400_000],
            };
            let out = edfa_amplify(&frame, &p, &mut ChaCha8Rng::seed_from_u64(3));
            let m = out.mean_power();
            out.samples.iter().map(|s| (s - m).powi(2)).sum::<f64>() / out.samples.len() as f64
        };
        let ratio = variance(16) / variance(8);
        assert!((ratio - 2.0).abs() < 0.03, "{ratio}");
    }
}
