//! Second-order low-pass Butterworth section, bilinear transform with
//! frequency prewarping, transposed direct form II.

use crate::error::{domain, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    z1: f64,
    z2: f64,
}

impl Biquad {
    pub fn butterworth_lowpass(cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if !(cutoff_hz > 0.0 && cutoff_hz < sample_rate_hz / 2.0) {
            return Err(domain("cutoff_hz", cutoff_hz, "(0, fs/2)"));
        }
        let k = (std::f64::consts::PI * cutoff_hz / sample_rate_hz).tan();
        let k2 = k * k;
        let norm = 1.0 + std::f64::consts::SQRT_2 * k + k2;
        let b0 = k2 / norm;
        Ok(Self {
            b: [b0, 2.0 * b0, b0],
            a: [
                2.0 * (k2 - 1.0) / norm,
                (1.0 - std::f64::consts::SQRT_2 * k + k2) / norm,
            ],
            z1: 0.0,
            z2: 0.0,
        })
    }

    pub fn coefficients(&self) -> ([f64; 3], [f64; 2]) {
        (self.b, self.a)
    }

    /// Puts the filter in the steady state of a constant input `x`.
    pub fn settle(&mut self, x: f64) {
        let y = x * self.dc_gain();
        self.z2 = self.b[2] * x - self.a[1] * y;
        self.z1 = self.b[1] * x - self.a[0] * y + self.z2;
    }

    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / (1.0 + self.a[0] + self.a[1])
    }

    #[inline]
    pub fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z1;
        self.z1 = self.b[1] * x - self.a[0] * y + self.z2;
        self.z2 = self.b[2] * x - self.a[1] * y;
        y
    }

    pub fn process(&mut self, samples: &mut [f64]) {
        for s in samples {
            *s = self.step(*s);
        }
    }

    /// Magnitude response at `f` for sample rate `fs`.
    pub fn gain_at(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * f / fs;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (
            self.b[0] + self.b[1] * c1 + self.b[2] * c2,
            self.b[1] * s1 + self.b[2] * s2,
        );
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, self.a[0] * s1 + self.a[1] * s2);
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }

    /// Equivalent noise bandwidth in Hz, summed from the impulse response.
    pub fn noise_bandwidth(&self, fs: f64) -> f64 {
        let mut f = Self {
            z1: 0.0,
            z2: 0.0,
            ..self.clone()
        };
        let mut energy = 0.0;
        let mut x = 1.0;
        for _ in 0..100_000 {
            let y = f.step(x);
            x = 0.0;
            energy += y * y;
        }
        energy * fs / 2.0 / self.dc_gain().powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_reference_design() {
        // Normalised cutoff 0.25 of Nyquist: b = [0.0976, 0.1953, 0.0976], a = [-0.9428, 0.3333].
        let f = Biquad::butterworth_lowpass(1.0, 8.0).unwrap();
        let (b, a) = f.coefficients();
        assert!((b[0] - 0.097_631_072_937_817_5).abs() < 1e-12);
        assert!((a[0] + 0.942_809_041_582_063_4).abs() < 1e-12);
        assert!((a[1] - 0.333_333_333_333_333_3).abs() < 1e-12);
    }

    #[test]
    fn unity_dc_and_half_power_at_cutoff() {
        let fs = 160e9;
        let f = Biquad::butterworth_lowpass(25e9, fs).unwrap();
        assert!((f.dc_gain() - 1.0).abs() < 1e-12);
        assert!((f.gain_at(25e9, fs) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-9);
        assert!(f.gain_at(70e9, fs) < 0.1);
    }

    #[test]
    fn settle_holds_constant_input() {
        let mut f = Biquad::butterworth_lowpass(14e9, 160e9).unwrap();
        f.settle(3.5);
        for _ in 0..50 {
            assert!((f.step(3.5) - 3.5).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_bandwidth_close_to_analog_value() {
        // Analog second-order Butterworth: B = fc * (pi/4) / sin(pi/4).
        let fs = 1e6;
        let f = Biquad::butterworth_lowpass(1e3, fs).unwrap();
        let analog = 1e3 * std::f64::consts::PI / 4.0 / (std::f64::consts::PI / 4.0).sin();
        assert!((f.noise_bandwidth(fs) / analog - 1.0).abs() < 1e-3);
    }

    #[test]
    fn rejects_cutoff_above_nyquist() {
        assert!(Biquad::butterworth_lowpass(90e9, 160e9).is_err());
        assert!(Biquad::butterworth_lowpass(0.0, 160e9).is_err());
    }
}
