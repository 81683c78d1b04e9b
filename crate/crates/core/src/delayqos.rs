//! Joint power and rate control under average-delay constraints.
//!
//! A user whose packets arrive as a Poisson stream and queue FIFO must
//! transmit at least at rate `Ω*` (at SIR `γ*`) to meet its delay bound.
//! Operating at exactly `Ω*` is the Pareto-dominant equilibrium; there the
//! user occupies a "size" `Φ*` of the shared resource, and an equilibrium
//! exists iff the sizes sum to less than one.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosProfile {
    pub packet_size_bits: u32,
    pub arrival_rate_pps: f64,
    pub delay_bound_s: f64,
}

impl QosProfile {
    pub fn new(packet_size_bits: u32, arrival_rate_pps: f64, delay_bound_s: f64) -> Result<Self> {
        if packet_size_bits == 0 || !(arrival_rate_pps >= 0.0) || !(delay_bound_s > 0.0) {
            return Err(Error::InvalidParameter(
                "QoS profile needs M > 0, arrival rate >= 0 and delay bound > 0".into(),
            ));
        }
        Ok(Self {
            packet_size_bits,
            arrival_rate_pps,
            delay_bound_s,
        })
    }
}

/// Smallest rate (bits/s) meeting the delay bound with equality at `γ*`:
///
/// `Ω* = (M/D) [1 + Dλ + sqrt(1 + D²λ² + 2(1 − f*) Dλ)] / (2 f*)`.
pub fn omega_star(profile: &QosProfile, f_at_gamma_star: f64) -> f64 {
    let m = f64::from(profile.packet_size_bits);
    let d = profile.delay_bound_s;
    let dl = d * profile.arrival_rate_pps;
    let root = (1.0 + dl * dl + 2.0 * (1.0 - f_at_gamma_star) * dl).sqrt();
    (m / d) * (1.0 + dl + root) / (2.0 * f_at_gamma_star)
}

/// `Φ* = 1 / (1 + B / (Ω γ*))`.
pub fn user_size(omega: f64, gamma_star: f64, bandwidth: f64) -> f64 {
    1.0 / (1.0 + bandwidth / (omega * gamma_star))
}

pub fn feasible(sizes: &[f64]) -> bool {
    sizes.iter().sum::<f64>() < 1.0
}

/// Largest number of identical users of size `phi` that fit: max K with K·Φ < 1.
pub fn capacity(phi: f64) -> usize {
    if !(phi > 0.0) {
        return usize::MAX;
    }
    if phi >= 1.0 {
        return 0;
    }
    let mut k = (1.0 / phi).floor() as usize;
    while k > 0 && k as f64 * phi >= 1.0 {
        k -= 1;
    }
    while ((k + 1) as f64) * phi < 1.0 {
        k += 1;
    }
    k
}

/// Utility of user `ell` at the Pareto-dominant equilibrium:
/// `(B h f* / (σ² γ*)) (1 − Σ Φ) / (1 − Φ_ell)`.
pub fn ne_utility_delay(
    ell: usize,
    sizes: &[f64],
    gain: f64,
    bandwidth: f64,
    noise: f64,
    f_at_gamma_star: f64,
    gamma_star: f64,
) -> Result<f64> {
    if !feasible(sizes) {
        return Err(Error::Infeasible(format!(
            "user sizes sum to {} >= 1",
            sizes.iter().sum::<f64>()
        )));
    }
    let total: f64 = sizes.iter().sum();
    Ok(bandwidth * gain * f_at_gamma_star / (noise * gamma_star) * (1.0 - total) / (1.0 - sizes[ell]))
}

/// Powers giving every user SIR `γ*` at its own rate, where user `k`'s SIR is
/// `(B/R_k) p_k h_k / (σ² + Σ_{j≠k} p_j h_j)`. Solved as the linear system
/// `(B / (R_k γ*)) h_k p_k − Σ_{j≠k} h_j p_j = σ²`.
///
/// Fails when the system is singular or its solution is not strictly
/// positive, which happens exactly when the user sizes sum to at least one.
pub fn solve_delay_powers(rates: &[f64], gains: &[f64], bandwidth: f64, noise: f64, gamma_star: f64) -> Result<Vec<f64>> {
    let k = rates.len();
    if gains.len() != k || k == 0 {
        return Err(Error::Dimension("rates and gains must be nonempty and equal length".into()));
    }
    let mut a = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] = if i == j {
                bandwidth / (rates[i] * gamma_star) * gains[i]
            } else {
                -gains[j]
            };
        }
    }
    let b = DVector::from_element(k, noise);
    let p = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular("delay-constrained power system is singular".into()))?;
    if p.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Infeasible(
            "no positive power vector reaches the target SIR at these rates".into(),
        ));
    }
    Ok(p.iter().copied().collect())
}
