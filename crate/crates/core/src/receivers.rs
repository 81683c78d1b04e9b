//! Output SIR of the matched filter, decorrelator and linear MMSE receivers,
//! and the large-system equilibrium utility for each of them.
//!
//! Every model here is linear in the user's own power: `γ_k = a_k p_k` where
//! the *own gain* `a_k` depends only on the other users' powers. Best
//! responses are written in terms of `a_k`, so any [`SirModel`] can drive
//! the games.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{SpreadingSet, SystemParams, UserProfile};

/// Smallest reciprocal condition number accepted for `S^T S`.
const DE_MIN_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceiverKind {
    Mf,
    De,
    Mmse,
}

impl ReceiverKind {
    pub const ALL: [ReceiverKind; 3] = [ReceiverKind::Mf, ReceiverKind::De, ReceiverKind::Mmse];

    pub fn name(self) -> &'static str {
        match self {
            ReceiverKind::Mf => "mf",
            ReceiverKind::De => "de",
            ReceiverKind::Mmse => "mmse",
        }
    }
}

impl fmt::Display for ReceiverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReceiverKind::Mf => "MF",
            ReceiverKind::De => "DE",
            ReceiverKind::Mmse => "MMSE",
        })
    }
}

/// An SIR model that is linear in each user's own power.
pub trait SirModel: Send + Sync {
    fn num_users(&self) -> usize;

    /// `a_k` such that `γ_k = a_k p_k` with the other powers held fixed.
    fn own_gain(&self, powers: &[f64], k: usize) -> f64;

    fn own_gains(&self, powers: &[f64]) -> Vec<f64> {
        (0..self.num_users()).map(|k| self.own_gain(powers, k)).collect()
    }

    fn sirs(&self, powers: &[f64]) -> Vec<f64> {
        self.own_gains(powers)
            .into_iter()
            .zip(powers)
            .map(|(a, p)| a * p)
            .collect()
    }
}

/// Matched filter with random spreading in the averaged form
/// `γ_k = p_k h_k / (σ² + (1/N) Σ_{j≠k} p_j h_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpreadingMf {
    pub gains: Vec<f64>,
    pub processing_gain: usize,
    pub noise: f64,
}

impl RandomSpreadingMf {
    pub fn new(gains: Vec<f64>, processing_gain: usize, noise: f64) -> Self {
        Self {
            gains,
            processing_gain,
            noise,
        }
    }

    fn received_total(&self, powers: &[f64]) -> f64 {
        powers.iter().zip(&self.gains).map(|(p, h)| p * h).sum()
    }
}

impl SirModel for RandomSpreadingMf {
    fn num_users(&self) -> usize {
        self.gains.len()
    }

    fn own_gain(&self, powers: &[f64], k: usize) -> f64 {
        let others = self.received_total(powers) - powers[k] * self.gains[k];
        let others = others.max(0.0);
        self.gains[k] / (self.noise + others / self.processing_gain as f64)
    }

    fn own_gains(&self, powers: &[f64]) -> Vec<f64> {
        let total = self.received_total(powers);
        let n = self.processing_gain as f64;
        self.gains
            .iter()
            .zip(powers)
            .map(|(h, p)| h / (self.noise + (total - p * h).max(0.0) / n))
            .collect()
    }
}

pub fn sir_mf(powers: &[f64], gains: &[f64], processing_gain: usize, noise: f64) -> Vec<f64> {
    RandomSpreadingMf::new(gains.to_vec(), processing_gain, noise).sirs(powers)
}

/// Linear receiver acting on explicit spreading sequences.
#[derive(Debug, Clone)]
pub struct LinearReceiver {
    kind: ReceiverKind,
    gains: Vec<f64>,
    noise: f64,
    spreading: SpreadingSet,
    /// `S^T S`.
    correlations: DMatrix<f64>,
    /// `(s_k^T s_j)^2`.
    cross_energy: DMatrix<f64>,
    /// `[(S^T S)^{-1}]_{kk}`, decorrelator only.
    de_diag: Vec<f64>,
}

impl LinearReceiver {
    pub fn new(kind: ReceiverKind, gains: Vec<f64>, spreading: SpreadingSet, noise: f64) -> Result<Self> {
        if gains.len() != spreading.users() {
            return Err(Error::Dimension(format!(
                "{} gains for {} spreading sequences",
                gains.len(),
                spreading.users()
            )));
        }
        if !(noise > 0.0) {
            return Err(Error::InvalidParameter("noise power must be positive".into()));
        }
        let r = spreading.correlations();
        let cross_energy = r.map(|x| x * x);
        let de_diag = if kind == ReceiverKind::De {
            decorrelator_diag(&spreading)?
        } else {
            Vec::new()
        };
        Ok(Self {
            kind,
            gains,
            noise,
            spreading,
            correlations: r,
            cross_energy,
            de_diag,
        })
    }

    pub fn kind(&self) -> ReceiverKind {
        self.kind
    }

    pub fn spreading(&self) -> &SpreadingSet {
        &self.spreading
    }

    /// `σ² I + Σ_{j ∈ users} p_j h_j s_j s_j^T`.
    fn covariance(&self, powers: &[f64], skip: Option<usize>) -> DMatrix<f64> {
        let s = self.spreading.matrix();
        let n = s.nrows();
        let weights = DVector::from_iterator(
            powers.len(),
            powers
                .iter()
                .zip(&self.gains)
                .enumerate()
                .map(|(j, (p, h))| if Some(j) == skip { 0.0 } else { p * h }),
        );
        let mut scaled = s.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= weights[j];
        }
        let mut a = &scaled * s.transpose();
        for i in 0..n {
            a[(i, i)] += self.noise;
        }
        a
    }

    fn mmse_own_gain(&self, powers: &[f64], k: usize) -> f64 {
        let a = self.covariance(powers, Some(k));
        let s_k = self.spreading.matrix().column(k).into_owned();
        let chol = a
            .cholesky()
            .expect("noise-loaded covariance is positive definite");
        let x = chol.solve(&s_k);
        self.gains[k] * s_k.dot(&x)
    }
}

fn decorrelator_diag(spreading: &SpreadingSet) -> Result<Vec<f64>> {
    let svd = spreading.matrix().clone().svd(false, false);
    let sv = &svd.singular_values;
    let max = sv.max();
    let min = sv.min();
    let k = spreading.users();
    let n = spreading.processing_gain();
    if k > n || !(max > 0.0) || (min / max).powi(2) < DE_MIN_RCOND {
        return Err(Error::Singular(format!(
            "decorrelator needs full column rank spreading ({k} users, N = {n})"
        )));
    }
    let inv = spreading
        .correlations()
        .try_inverse()
        .ok_or_else(|| Error::Singular("S^T S is not invertible".into()))?;
    Ok((0..k).map(|i| inv[(i, i)]).collect())
}

impl SirModel for LinearReceiver {
    fn num_users(&self) -> usize {
        self.gains.len()
    }

    fn own_gain(&self, powers: &[f64], k: usize) -> f64 {
        match self.kind {
            ReceiverKind::Mf => {
                let interference: f64 = (0..self.gains.len())
                    .filter(|&j| j != k)
                    .map(|j| powers[j] * self.gains[j] * self.cross_energy[(k, j)])
                    .sum();
                self.gains[k] * self.cross_energy[(k, k)] / (self.noise + interference)
            }
            ReceiverKind::De => self.gains[k] / (self.noise * self.de_diag[k]),
            ReceiverKind::Mmse => self.mmse_own_gain(powers, k),
        }
    }

    fn own_gains(&self, powers: &[f64]) -> Vec<f64> {
        if self.kind != ReceiverKind::Mmse {
            return (0..self.gains.len()).map(|k| self.own_gain(powers, k)).collect();
        }
        // One factorization of the full covariance A serves every user:
        // with β = s^T A^{-1} s, s^T A_{-k}^{-1} s = β / (1 − p_k h_k β).
        let beta = if self.gains.len() < self.spreading.processing_gain() {
            self.mmse_beta_user_space(powers)
        } else {
            self.mmse_beta_signal_space(powers)
        };
        beta.into_iter()
            .enumerate()
            .map(|(k, b)| {
                let q = powers[k] * self.gains[k];
                self.gains[k] * b / (1.0 - q * b)
            })
            .collect()
    }
}

impl LinearReceiver {
    fn mmse_beta_signal_space(&self, powers: &[f64]) -> Vec<f64> {
        let chol = self
            .covariance(powers, None)
            .cholesky()
            .expect("noise-loaded covariance is positive definite");
        // β_k = |L^{-1} s_k|^2 with A = L L^T.
        let mut y = self.spreading.matrix().clone();
        chol.l_dirty().solve_lower_triangular_mut(&mut y);
        y.column_iter().map(|c| c.norm_squared()).collect()
    }

    /// Same quantity through the K × K Woodbury form. With `D = diag(sqrt(q))`
    /// and `G = S^T S`: `σ² β_k = G_kk − [G D (σ² I + D G D)^{-1} D G]_kk`.
    fn mmse_beta_user_space(&self, powers: &[f64]) -> Vec<f64> {
        let k = self.gains.len();
        let d: Vec<f64> = powers
            .iter()
            .zip(&self.gains)
            .map(|(p, h)| (p * h).max(0.0).sqrt())
            .collect();
        let g = &self.correlations;
        let w = DMatrix::from_fn(k, k, |i, j| {
            d[i] * g[(i, j)] * d[j] + if i == j { self.noise } else { 0.0 }
        });
        let chol = w.cholesky().expect("noise-loaded Gram matrix is positive definite");
        let mut y = DMatrix::from_fn(k, k, |i, j| d[i] * g[(i, j)]);
        chol.l_dirty().solve_lower_triangular_mut(&mut y);
        (0..k)
            .map(|j| (g[(j, j)] - y.column(j).norm_squared()) / self.noise)
            .collect()
    }
}

pub fn sir_linear(
    powers: &[f64],
    gains: &[f64],
    spreading: &SpreadingSet,
    noise: f64,
    kind: ReceiverKind,
) -> Result<Vec<f64>> {
    if powers.len() != gains.len() {
        return Err(Error::Dimension("powers and gains differ in length".into()));
    }
    let rx = LinearReceiver::new(kind, gains.to_vec(), spreading.clone(), noise)?;
    Ok(rx.sirs(powers))
}

/// Operating point of the large-system analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeSystemPoint {
    /// Users per degree of freedom, `K/N`.
    pub load: f64,
    pub antennas: usize,
    /// `load / antennas`.
    pub effective_load: f64,
    /// Gain summed over antennas.
    pub combined_gain: f64,
}

impl LargeSystemPoint {
    pub fn new(load: f64, antennas: usize, combined_gain: f64) -> Self {
        Self {
            load,
            antennas,
            effective_load: load / antennas as f64,
            combined_gain,
        }
    }
}

/// Load at or above which the receiver cannot reach the target SIR.
pub fn load_threshold(kind: ReceiverKind, antennas: usize, gamma_star: f64) -> f64 {
    let m = antennas as f64;
    match kind {
        ReceiverKind::Mf => m / gamma_star,
        ReceiverKind::De => 1.0,
        ReceiverKind::Mmse => m * (1.0 + 1.0 / gamma_star),
    }
}

/// Equilibrium interference suppression factor `Γ̄` of the large system.
pub fn large_system_gamma_bar(kind: ReceiverKind, load: f64, antennas: usize, gamma_star: f64) -> Result<f64> {
    if !(load > 0.0) || antennas == 0 || !(gamma_star > 0.0) {
        return Err(Error::InvalidParameter(
            "load and target SIR must be positive, antennas at least 1".into(),
        ));
    }
    let eff = load / antennas as f64;
    let (quantity, value, threshold) = match kind {
        ReceiverKind::Mf => ("effective load", eff, 1.0 / gamma_star),
        ReceiverKind::De => ("load", load, 1.0),
        ReceiverKind::Mmse => ("effective load", eff, 1.0 + 1.0 / gamma_star),
    };
    if value >= threshold {
        return Err(Error::LoadBeyondCapacity {
            receiver: kind,
            quantity,
            load: value,
            threshold,
        });
    }
    Ok(match kind {
        ReceiverKind::Mf => 1.0 - eff * gamma_star,
        ReceiverKind::De => 1.0 - load,
        ReceiverKind::Mmse => 1.0 - eff * gamma_star / (1.0 + gamma_star),
    })
}

/// Equilibrium utility (bits/joule) of `user` in the large-system limit,
/// using the user's first-carrier gains summed over `params.rx_antennas`.
pub fn large_system_utility(
    user: &UserProfile,
    params: &SystemParams,
    gamma_star: f64,
    f_at_gamma_star: f64,
    kind: ReceiverKind,
    load: f64,
) -> Result<f64> {
    if user.gains.antennas() != params.rx_antennas {
        return Err(Error::Dimension(format!(
            "user {} has gains for {} antennas, system has {}",
            user.id,
            user.gains.antennas(),
            params.rx_antennas
        )));
    }
    let gamma_bar = large_system_gamma_bar(kind, load, params.rx_antennas, gamma_star)?;
    Ok(large_system_utility_raw(
        user.rate_bps,
        user.gains.combined(0),
        params.noise_power,
        gamma_star,
        f_at_gamma_star,
        gamma_bar,
    ))
}

pub fn large_system_utility_raw(
    rate: f64,
    combined_gain: f64,
    noise: f64,
    gamma_star: f64,
    f_at_gamma_star: f64,
    gamma_bar: f64,
) -> f64 {
    rate * f_at_gamma_star * combined_gain / (gamma_star * noise) * gamma_bar
}
