//! Capacities of the Z channel and the binary symmetric channel.

use crate::error::{domain, Result};

/// Capacity in bits per use of a Z channel whose 0 input is read as 1 with
/// probability `p`.
pub fn z_capacity(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("p", p, "[0, 1]"));
    }
    if p == 0.0 {
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let c = (1.0 + (1.0 - p) * p.powf(p / (1.0 - p))).log2();
    Ok(c.max(0.0))
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

pub fn bsc_capacity(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain("p", p, "[0, 1]"));
    }
    Ok(1.0 - binary_entropy(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoints_and_midpoint() {
        assert_eq!(z_capacity(0.0).unwrap(), 1.0);
        assert_eq!(z_capacity(1.0).unwrap(), 0.0);
        assert!((z_capacity(0.5).unwrap() - 1.25f64.log2()).abs() < 1e-12);
        assert!(z_capacity(1.0 - 1e-9).unwrap() < 1e-6);
        assert!(z_capacity(-0.1).is_err());
        assert!(z_capacity(f64::NAN).is_err());
        assert_eq!(bsc_capacity(0.5).unwrap(), 0.0);
        assert_eq!(bsc_capacity(0.0).unwrap(), 1.0);
    }

    #[test]
    fn matches_mutual_information_maximum() {
        // Brute-force maximisation of I(X;Y) over the input prior.
        for p in [0.05, 0.2, 0.5, 0.8] {
            let best = (1..100_000)
                .map(|i| {
                    let q1 = i as f64 / 100_000.0;
                    let y1 = q1 + (1.0 - q1) * p;
                    binary_entropy(y1) - (1.0 - q1) * binary_entropy(p)
                })
                .fold(0.0, f64::max);
            assert!((best - z_capacity(p).unwrap()).abs() < 1e-6, "p={p}");
        }
    }

    #[test]
    fn exceeds_bsc_and_decreases() {
        let grid: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        for w in grid.windows(2) {
            assert!(z_capacity(w[1]).unwrap() < z_capacity(w[0]).unwrap());
        }
        for &p in grid.iter().filter(|&&p| p > 0.0 && p < 0.5) {
            assert!(z_capacity(p).unwrap() > bsc_capacity(p).unwrap());
        }
    }
}
