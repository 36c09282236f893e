//! Physical layer of the star network: pulse synthesis, link budget, EDFA
//! with ASE, photodetection with shot and thermal noise, slot decisions and
//! the extinction-ratio solver.

pub mod ber;
pub mod filter;
pub mod link;
pub mod waveform;

use serde::{Deserialize, Serialize};

pub use ber::{min_extinction_ratio, physical_ber, run_physical, PhysicalBer, SampleStatus};
pub use filter::Biquad;
pub use link::{PhysicalLink, Threshold};
pub use waveform::{edfa_amplify, synth_frame, WaveformFrame};

use crate::error::{domain, Result};

pub const PLANCK: f64 = 6.626_070_15e-34;
pub const LIGHT_SPEED: f64 = 299_792_458.0;
pub const ELECTRON_CHARGE: f64 = 1.602_176_634e-19;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * (w / 1e-3).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalParams {
    /// Peak power of a transmitted 1.
    pub tx_power_dbm: f64,
    /// 1-to-0 peak power ratio; `inf` turns the 0 level off.
    pub extinction_ratio_db: f64,
    pub wavelength_m: f64,
    pub slot_rate: f64,
    pub samples_per_slot: usize,
    pub pulse_order: u32,
    pub duty_cycle: f64,
    pub splitter_loss_db: f64,
    pub fiber_loss_db: f64,
    pub insertion_loss_db: f64,
    pub edfa_gain_db: f64,
    pub edfa_nf_db: f64,
    pub optical_filter_hz: f64,
    pub electrical_filter_hz: f64,
    pub pd_responsivity: f64,
    pub pd_sensitivity_dbm: f64,
    pub pd_max_power_dbm: f64,
    /// Receiver thermal noise in A/sqrt(Hz). When absent it is set so that
    /// an isolated pulse at the sensitivity level gives Q = `sensitivity_q`.
    pub thermal_noise_density: Option<f64>,
    pub sensitivity_q: f64,
    pub ase_noise: bool,
    pub shot_noise: bool,
    pub thermal_noise: bool,
    /// Frames used to place the decision threshold before measuring.
    pub calibration_frames: usize,
}

impl Default for OpticalParams {
    fn default() -> Self {
        Self {
            tx_power_dbm: 2.0,
            extinction_ratio_db: 16.6,
            wavelength_m: 1550e-9,
            slot_rate: 10e9,
            samples_per_slot: 16,
            pulse_order: 4,
            duty_cycle: 1.0 / 3.0,
            splitter_loss_db: 25.0,
            fiber_loss_db: 2.0,
            insertion_loss_db: 1.0,
            edfa_gain_db: 27.0,
            edfa_nf_db: 7.0,
            optical_filter_hz: 25e9,
            electrical_filter_hz: 14e9,
            pd_responsivity: 0.9,
            pd_sensitivity_dbm: -28.0,
            pd_max_power_dbm: -5.0,
            thermal_noise_density: None,
            sensitivity_q: 6.0,
            ase_noise: true,
            shot_noise: true,
            thermal_noise: true,
            calibration_frames: 200,
        }
    }
}

impl OpticalParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("splitter_loss_db", self.splitter_loss_db),
            ("fiber_loss_db", self.fiber_loss_db),
            ("insertion_loss_db", self.insertion_loss_db),
            ("edfa_gain_db", self.edfa_gain_db),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(domain(name, v, "[0, inf)"));
            }
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle <= 1.0) {
            return Err(domain("duty_cycle", self.duty_cycle, "(0, 1]"));
        }
        if self.samples_per_slot < 8 {
            return Err(domain("samples_per_slot", self.samples_per_slot as f64, "[8, inf)"));
        }
        if self.pulse_order == 0 {
            return Err(domain("pulse_order", 0.0, "[1, inf)"));
        }
        if !(self.extinction_ratio_db > 0.0) {
            return Err(domain("extinction_ratio_db", self.extinction_ratio_db, "(0, inf]"));
        }
        if !(self.slot_rate > 0.0 && self.wavelength_m > 0.0 && self.pd_responsivity > 0.0) {
            return Err(domain("slot_rate/wavelength/responsivity", f64::NAN, "(0, inf)"));
        }
        if !(self.edfa_nf_db.is_finite() || self.edfa_nf_db == f64::NEG_INFINITY) {
            return Err(domain("edfa_nf_db", self.edfa_nf_db, "[-inf, inf)"));
        }
        let nyquist = self.sample_rate() / 2.0;
        for (name, f) in [
            ("optical_filter_hz", self.optical_filter_hz),
            ("electrical_filter_hz", self.electrical_filter_hz),
        ] {
            if !(f > 0.0 && f < nyquist) {
                return Err(domain(name, f, "(0, sample_rate/2)"));
            }
        }
        if let Some(d) = self.thermal_noise_density {
            if !(d >= 0.0) {
                return Err(domain("thermal_noise_density", d, "[0, inf)"));
            }
        }
        if !(self.sensitivity_q > 0.0) {
            return Err(domain("sensitivity_q", self.sensitivity_q, "(0, inf)"));
        }
        Ok(())
    }

    pub fn sample_rate(&self) -> f64 {
        self.slot_rate * self.samples_per_slot as f64
    }

    pub fn p1_watts(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    pub fn p0_watts(&self) -> f64 {
        self.p1_watts() / db_to_linear(self.extinction_ratio_db)
    }

    /// Fiber + insertion + splitter loss of one stretch.
    pub fn stretch_loss_db(&self) -> f64 {
        self.fiber_loss_db + self.insertion_loss_db + self.splitter_loss_db
    }

    /// One-sided ASE power spectral density per polarization at the EDFA
    /// output, `(NF/2) h nu (G - 1)`.
    pub fn ase_psd(&self) -> f64 {
        let nu = LIGHT_SPEED / self.wavelength_m;
        0.5 * db_to_linear(self.edfa_nf_db) * PLANCK * nu * (db_to_linear(self.edfa_gain_db) - 1.0)
    }

    /// Thermal noise density in use, derived from the sensitivity if unset.
    ///
    /// With `I = R * P_sens` and shot-noise variance `s^2 = 2 q I B`, the
    /// thermal sigma solving `I / (sigma + sqrt(sigma^2 + s^2)) = Q` is
    /// `(a^2 - s^2) / (2a)` with `a = I / Q`.
    pub fn thermal_density(&self) -> Result<f64> {
        if let Some(d) = self.thermal_noise_density {
            return Ok(d);
        }
        let fs = self.sample_rate();
        let bandwidth = Biquad::butterworth_lowpass(self.electrical_filter_hz, fs)?.noise_bandwidth(fs);
        let current = self.pd_responsivity * dbm_to_watts(self.pd_sensitivity_dbm);
        let a = current / self.sensitivity_q;
        let s2 = 2.0 * ELECTRON_CHARGE * current * bandwidth;
        if a * a <= s2 {
            return Err(domain(
                "sensitivity_q",
                self.sensitivity_q,
                "reachable with shot noise alone",
            ));
        }
        Ok((a * a - s2) / (2.0 * a) / bandwidth.sqrt())
    }
}

/// Power levels along the path of one active transmitter.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    pub tx_dbm: f64,
    pub splitter1_out_dbm: f64,
    pub edfa_out_dbm: f64,
    pub splitter2_in_dbm: f64,
    pub receiver_dbm: f64,
    /// Receiver level minus PD sensitivity.
    pub margin_db: f64,
    /// Receiver level when `collisions` 1s overlap in one slot.
    pub worst_case_dbm: f64,
    pub collisions: usize,
    /// Worst case stays at or below the PD maximum input.
    pub within_max: bool,
}

/// dB bookkeeping for a single 1 pulse; `collisions` sets the worst case.
pub fn link_budget(params: &OpticalParams, collisions: usize) -> Result<LinkBudget> {
    params.validate()?;
    let splitter1_out = params.tx_power_dbm - params.stretch_loss_db();
    let edfa_out = splitter1_out + params.edfa_gain_db;
    let receiver = edfa_out - params.stretch_loss_db();
    let worst = receiver + 10.0 * (collisions.max(1) as f64).log10();
    Ok(LinkBudget {
        tx_dbm: params.tx_power_dbm,
        splitter1_out_dbm: splitter1_out,
        edfa_out_dbm: edfa_out,
        splitter2_in_dbm: edfa_out,
        receiver_dbm: receiver,
        margin_db: receiver - params.pd_sensitivity_dbm,
        worst_case_dbm: worst,
        collisions,
        within_max: worst <= params.pd_max_power_dbm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_budget() {
        let b = link_budget(&OpticalParams::default(), 10).unwrap();
        assert_eq!(b.splitter1_out_dbm, -26.0);
        assert_eq!(b.edfa_out_dbm, 1.0);
        assert_eq!(b.splitter2_in_dbm, 1.0);
        assert_eq!(b.receiver_dbm, -27.0);
        assert_eq!(b.margin_db, 1.0);
        assert!((b.worst_case_dbm + 17.0).abs() < 1e-12);
        assert!(b.within_max);
    }

    #[test]
    fn heavier_splitters_fall_below_sensitivity() {
        let p = OpticalParams {
            splitter_loss_db: 30.0,
            ..OpticalParams::default()
        };
        assert!(link_budget(&p, 1).unwrap().margin_db < 0.0);
    }

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((watts_to_dbm(dbm_to_watts(-27.0)) + 27.0).abs() < 1e-12);
        let p = OpticalParams::default();
        assert!((p.p0_watts() / p.p1_watts() - 10f64.powf(-1.66)).abs() < 1e-15);
    }

    #[test]
    fn derived_thermal_density_meets_sensitivity() {
        let p = OpticalParams::default();
        let d = p.thermal_density().unwrap();
        assert!(d > 0.5e-12 && d < 1.0e-12, "{d}");
        let fs = p.sample_rate();
        let b = Biquad::butterworth_lowpass(p.electrical_filter_hz, fs)
            .unwrap()
            .noise_bandwidth(fs);
        let i = p.pd_responsivity * dbm_to_watts(p.pd_sensitivity_dbm);
        let sigma = d * b.sqrt();
        let q = i / (sigma + (sigma * sigma + 2.0 * ELECTRON_CHARGE * i * b).sqrt());
        assert!((q - p.sensitivity_q).abs() < 1e-9);
        let fixed = OpticalParams {
            thermal_noise_density: Some(10e-12),
            ..p
        };
        assert_eq!(fixed.thermal_density().unwrap(), 10e-12);
    }

    #[test]
    fn validation() {
        let bad = OpticalParams {
            samples_per_slot: 4,
            ..OpticalParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = OpticalParams {
            splitter_loss_db: -1.0,
            ..OpticalParams::default()
        };
        assert!(bad.validate().is_err());
        let inf = OpticalParams {
            extinction_ratio_db: f64::INFINITY,
            ..OpticalParams::default()
        };
        assert!(inf.validate().is_ok());
        assert_eq!(inf.p0_watts(), 0.0);
    }
}
