//! Closed-form collision statistics for K-of-S hopping with OR superposition.

use crate::error::{domain, Error, Result};

/// Error statistics for one transmitted 0 among `n` ONUs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionProb {
    /// Probability that a given slot is lit by at least one other ONU.
    pub slot_flip_prob: f64,
    /// `slot_flip_prob^k`: treats the k slots as independently lit.
    pub bit_error_independent: f64,
    /// Exact probability that all k slots are lit by the other ONUs.
    pub bit_error_exact: f64,
}

impl CollisionProb {
    /// Error rate over all bits when a fraction `p1` of them are 1s.
    pub fn average_ber(&self, p1: f64) -> f64 {
        (1.0 - p1) * self.bit_error_exact
    }
}

fn binomial(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Collision probabilities when each of the other `n - 1` ONUs sends a 1
/// with probability `p1` in `k` distinct uniformly chosen slots out of `s`.
///
/// The exact form is inclusion-exclusion over the subset of the victim's
/// slots left dark: an interferer avoids `j` given slots with probability
/// `(1 - p1) + p1 * C(s-j, k) / C(s, k)`.
pub fn analytic_collision_prob(n: usize, k: usize, s: usize, p1: f64) -> Result<CollisionProb> {
    if n == 0 {
        return Err(Error::Config("at least one ONU required".into()));
    }
    if k == 0 || k > s {
        return Err(Error::TooManySlots { k, s });
    }
    if !(0.0..=1.0).contains(&p1) {
        return Err(domain("p1", p1, "[0, 1]"));
    }
    let others = (n - 1) as i32;
    let q = 1.0 - (1.0 - p1 * k as f64 / s as f64).powi(others);
    let total = binomial(s, k);
    let exact: f64 = (0..=k)
        .map(|j| {
            let avoid = (1.0 - p1) + p1 * binomial(s - j, k) / total;
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(k, j) * avoid.powi(others)
        })
        .sum();
    Ok(CollisionProb {
        slot_flip_prob: q,
        bit_error_independent: q.powi(k as i32),
        bit_error_exact: exact.clamp(0.0, 1.0),
    })
}
