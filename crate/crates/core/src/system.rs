//! System parameters, user population, channel gains and spreading codes.
//!
//! All random generation uses ChaCha8 seeded from a 64-bit seed. Gains are
//! drawn users outer, carriers middle, antennas inner, so a given seed yields
//! the same population on every platform.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub bandwidth_hz: f64,
    pub processing_gain: usize,
    /// Background noise power, other-cell interference included.
    pub noise_power: f64,
    pub max_power: f64,
    pub carriers: usize,
    pub rx_antennas: usize,
    pub common_rate_bps: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            bandwidth_hz: 5e6,
            processing_gain: 128,
            noise_power: 5e-16,
            max_power: 1.0,
            carriers: 1,
            rx_antennas: 1,
            common_rate_bps: 1e4,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_power", self.noise_power),
            ("max_power", self.max_power),
            ("common_rate_bps", self.common_rate_bps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "system.{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("processing_gain", self.processing_gain),
            ("carriers", self.carriers),
            ("rx_antennas", self.rx_antennas),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("system.{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Channel power gains of one user, indexed by (carrier, antenna).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct GainMatrix {
    carriers: usize,
    antennas: usize,
    values: Vec<f64>,
}

impl GainMatrix {
    pub fn new(carriers: usize, antennas: usize, values: Vec<f64>) -> Result<Self> {
        if carriers == 0 || antennas == 0 || values.len() != carriers * antennas {
            return Err(Error::Dimension(format!(
                "gain matrix {carriers}x{antennas} needs {} values, got {}",
                carriers * antennas,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|&&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "channel gains must be positive and finite, got {bad}"
            )));
        }
        Ok(Self {
            carriers,
            antennas,
            values,
        })
    }

    /// Single-carrier, single-antenna gain.
    pub fn scalar(h: f64) -> Result<Self> {
        Self::new(1, 1, vec![h])
    }

    pub fn carriers(&self) -> usize {
        self.carriers
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn get(&self, carrier: usize, antenna: usize) -> f64 {
        self.values[carrier * self.antennas + antenna]
    }

    /// Gain summed over receive antennas on one carrier.
    pub fn combined(&self, carrier: usize) -> f64 {
        let start = carrier * self.antennas;
        self.values[start..start + self.antennas].iter().sum()
    }
}

impl TryFrom<Vec<Vec<f64>>> for GainMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let carriers = rows.len();
        let antennas = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != antennas) {
            return Err(Error::Dimension("gain rows must all have the same length".into()));
        }
        Self::new(carriers, antennas, rows.into_iter().flatten().collect())
    }
}

impl From<GainMatrix> for Vec<Vec<f64>> {
    fn from(g: GainMatrix) -> Self {
        g.values.chunks(g.antennas).map(<[f64]>::to_vec).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: usize,
    #[serde(default)]
    pub distance_m: Option<f64>,
    pub gains: GainMatrix,
    pub rate_bps: f64,
    #[serde(default)]
    pub arrival_rate_pps: Option<f64>,
    #[serde(default)]
    pub delay_bound_s: Option<f64>,
    #[serde(default)]
    pub pricing_factor: f64,
}

impl UserProfile {
    /// A user with a single placeholder gain; call [`generate_gains`] to
    /// populate it for a given system.
    pub fn at_distance(id: usize, distance_m: f64, rate_bps: f64) -> Self {
        Self {
            distance_m: Some(distance_m),
            ..Self::with_gains(id, GainMatrix::scalar(1.0).expect("unit gain is valid"), rate_bps)
        }
    }

    /// A user with known gains and no position.
    pub fn with_gains(id: usize, gains: GainMatrix, rate_bps: f64) -> Self {
        Self {
            id,
            distance_m: None,
            gains,
            rate_bps,
            arrival_rate_pps: None,
            delay_bound_s: None,
            pricing_factor: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.distance_m.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "user {}: distance must be positive",
                self.id
            )));
        }
        if !(self.rate_bps > 0.0 && self.rate_bps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "user {}: rate must be positive",
                self.id
            )));
        }
        if !(self.pricing_factor >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "user {}: pricing factor must be nonnegative",
                self.id
            )));
        }
        if let Some(l) = self.arrival_rate_pps {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "user {}: arrival rate must be nonnegative",
                    self.id
                )));
            }
        }
        if let Some(d) = self.delay_bound_s {
            if !(d > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "user {}: delay bound must be positive",
                    self.id
                )));
            }
            if self.arrival_rate_pps.is_none() {
                return Err(Error::InvalidParameter(format!(
                    "user {}: a delay bound requires an arrival rate",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelModel {
    PathLossOnly,
    Rayleigh,
}

/// `h = constant · d^{−exponent} · X` where `X` is the fading draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLoss {
    pub constant: f64,
    pub exponent: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        Self {
            constant: 0.097,
            exponent: 4.0,
        }
    }
}

impl PathLoss {
    pub fn mean_gain(&self, distance_m: f64) -> f64 {
        self.constant * distance_m.powf(-self.exponent)
    }
}

/// Fills in the gains of every template user for `params.carriers` carriers
/// and `params.rx_antennas` antennas.
pub fn generate_gains(
    seed: u64,
    templates: &[UserProfile],
    params: &SystemParams,
    model: ChannelModel,
    path_loss: PathLoss,
) -> Result<Vec<UserProfile>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (carriers, antennas) = (params.carriers, params.rx_antennas);
    templates
        .iter()
        .map(|t| {
            let mean = match t.distance_m {
                Some(d) if d > 0.0 => path_loss.mean_gain(d),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "user {}: a positive distance is needed to draw gains",
                        t.id
                    )))
                }
            };
            let values = (0..carriers * antennas)
                .map(|_| match model {
                    ChannelModel::PathLossOnly => mean,
                    ChannelModel::Rayleigh => {
                        let x: f64 = rng.sample(Exp1);
                        // Exp1 can return exactly 0; keep gains strictly positive.
                        mean * x.max(f64::MIN_POSITIVE)
                    }
                })
                .collect();
            Ok(UserProfile {
                gains: GainMatrix::new(carriers, antennas, values)?,
                ..t.clone()
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadingMode {
    RandomBinary,
    Orthogonal,
}

/// Unit-norm spreading sequences stored as the columns of an `N × K` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingSet {
    sequences: DMatrix<f64>,
}

impl SpreadingSet {
    pub fn from_matrix(sequences: DMatrix<f64>) -> Result<Self> {
        for (k, col) in sequences.column_iter().enumerate() {
            if (col.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "spreading sequence {k} is not unit norm"
                )));
            }
        }
        Ok(Self { sequences })
    }

    pub fn users(&self) -> usize {
        self.sequences.ncols()
    }

    pub fn processing_gain(&self) -> usize {
        self.sequences.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.sequences
    }

    /// `S^T S`.
    pub fn correlations(&self) -> DMatrix<f64> {
        self.sequences.tr_mul(&self.sequences)
    }
}

pub fn generate_spreading(seed: u64, users: usize, n: usize, mode: SpreadingMode) -> Result<SpreadingSet> {
    if n == 0 {
        return Err(Error::Dimension("processing gain must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sequences = match mode {
        SpreadingMode::RandomBinary => {
            let chip = 1.0 / (n as f64).sqrt();
            let mut s = DMatrix::zeros(n, users);
            for k in 0..users {
                for i in 0..n {
                    s[(i, k)] = if rng.random::<bool>() { chip } else { -chip };
                }
            }
            s
        }
        SpreadingMode::Orthogonal => {
            if users > n {
                return Err(Error::Dimension(format!(
                    "{users} orthogonal sequences do not fit in {n} dimensions"
                )));
            }
            let mut s = DMatrix::<f64>::zeros(n, users);
            for k in 0..users {
                let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                // Two Gram–Schmidt passes keep cross products at rounding level.
                for _ in 0..2 {
                    for j in 0..k {
                        let dot: f64 = (0..n).map(|i| s[(i, j)] * v[i]).sum();
                        for (i, vi) in v.iter_mut().enumerate() {
                            *vi -= dot * s[(i, j)];
                        }
                    }
                }
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                for (i, vi) in v.iter().enumerate() {
                    s[(i, k)] = vi / norm;
                }
            }
            s
        }
    };
    SpreadingSet::from_matrix(sequences)
}

/// Effective signatures seen by an `m`-antenna receiver on one carrier.
///
/// User `k` sends its code `s_k` on every antenna; antenna `i` scales it by
/// `±sqrt(h_{k,i} / h̄_k)` with an independent random sign standing in for the
/// channel phase. The stacked length-`mN` columns have unit norm, so a
/// single-antenna linear receiver fed them and the combined gains
/// `h̄_k = Σ_i h_{k,i}` is the multi-antenna receiver.
pub fn antenna_signatures(
    codes: &SpreadingSet,
    users: &[UserProfile],
    carrier: usize,
    phase_seed: u64,
) -> Result<(SpreadingSet, Vec<f64>)> {
    let m = users.first().map_or(1, |u| u.gains.antennas());
    if users.len() != codes.users() {
        return Err(Error::Dimension(format!(
            "{} users for {} spreading codes",
            users.len(),
            codes.users()
        )));
    }
    if users.iter().any(|u| u.gains.antennas() != m || carrier >= u.gains.carriers()) {
        return Err(Error::Dimension("users disagree on antennas or lack the carrier".into()));
    }
    let combined: Vec<f64> = users.iter().map(|u| u.gains.combined(carrier)).collect();
    if m == 1 {
        return Ok((codes.clone(), combined));
    }
    let n = codes.processing_gain();
    let mut rng = ChaCha8Rng::seed_from_u64(phase_seed);
    let mut s = DMatrix::zeros(m * n, users.len());
    for (k, u) in users.iter().enumerate() {
        for i in 0..m {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let amp = sign * (u.gains.get(carrier, i) / combined[k]).sqrt();
            for r in 0..n {
                s[(i * n + r, k)] = amp * codes.matrix()[(r, k)];
            }
        }
    }
    Ok((SpreadingSet::from_matrix(s)?, combined))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn templates(n: usize, d: f64) -> Vec<UserProfile> {
        (0..n).map(|i| UserProfile::at_distance(i, d, 1e4)).collect()
    }

    #[test]
    fn path_loss_gain_at_100m() {
        let params = SystemParams::default();
        let users = generate_gains(
            1,
            &templates(1, 100.0),
            &params,
            ChannelModel::PathLossOnly,
            PathLoss::default(),
        )
        .unwrap();
        // 0.097 · 100^-4
        assert!((users[0].gains.get(0, 0) - 9.7e-10).abs() < 1e-23);
    }

    #[test]
    fn rayleigh_is_deterministic_per_seed() {
        let params = SystemParams {
            carriers: 3,
            rx_antennas: 2,
            ..SystemParams::default()
        };
        let t = templates(5, 80.0);
        let a = generate_gains(7, &t, &params, ChannelModel::Rayleigh, PathLoss::default()).unwrap();
        let b = generate_gains(7, &t, &params, ChannelModel::Rayleigh, PathLoss::default()).unwrap();
        let c = generate_gains(8, &t, &params, ChannelModel::Rayleigh, PathLoss::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a[4].gains.carriers(), 3);
        assert_eq!(a[4].gains.antennas(), 2);
    }

    #[test]
    fn rayleigh_mean_matches_path_loss() {
        let params = SystemParams {
            carriers: 1000,
            rx_antennas: 1000,
            ..SystemParams::default()
        };
        let users = generate_gains(
            3,
            &templates(1, 100.0),
            &params,
            ChannelModel::Rayleigh,
            PathLoss::default(),
        )
        .unwrap();
        let g = &users[0].gains;
        let mean = (0..1000).map(|c| g.combined(c)).sum::<f64>() / 1e6;
        assert!((mean / 9.7e-10 - 1.0).abs() < 0.01, "mean={mean}");
    }

    #[test]
    fn gain_matrix_serde_shape() {
        let g = GainMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let rows: Vec<Vec<f64>> = g.clone().into();
        assert_eq!(rows, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(GainMatrix::try_from(rows).unwrap(), g);
        assert_eq!(g.combined(1), 7.0);
        assert!(GainMatrix::try_from(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(GainMatrix::new(1, 1, vec![0.0]).is_err());
    }

    #[test]
    fn user_validation() {
        let mut u = UserProfile::at_distance(0, 10.0, 1e4);
        assert!(u.validate().is_ok());
        u.delay_bound_s = Some(0.01);
        assert!(u.validate().is_err());
        u.arrival_rate_pps = Some(5.0);
        assert!(u.validate().is_ok());
        u.rate_bps = 0.0;
        assert!(u.validate().is_err());
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::default().validate().is_ok());
        let bad = SystemParams {
            noise_power: 0.0,
            ..SystemParams::default()
        };
        assert!(bad.validate().is_err());
        let bad = SystemParams {
            carriers: 0,
            ..SystemParams::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn spreading_examples() {
        let s = generate_spreading(1, 4, 128, SpreadingMode::RandomBinary).unwrap();
        assert_eq!(s.users(), 4);
        for col in s.matrix().column_iter() {
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
        let o = generate_spreading(1, 2, 2, SpreadingMode::Orthogonal).unwrap();
        assert!(o.correlations()[(0, 1)].abs() < 1e-12);
        assert!(matches!(
            generate_spreading(1, 3, 2, SpreadingMode::Orthogonal),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn orthogonal_sets_are_orthonormal() {
        let o = generate_spreading(9, 40, 64, SpreadingMode::Orthogonal).unwrap();
        let r = o.correlations();
        for i in 0..40 {
            assert!((r[(i, i)] - 1.0).abs() < 1e-12);
            for j in 0..i {
                assert!(r[(i, j)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spreading_is_deterministic() {
        let a = generate_spreading(5, 6, 16, SpreadingMode::RandomBinary).unwrap();
        let b = generate_spreading(5, 6, 16, SpreadingMode::RandomBinary).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_binary_cross_correlation_energy() {
        let n = 32;
        let s = generate_spreading(11, 142, n, SpreadingMode::RandomBinary).unwrap();
        let r = s.correlations();
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..142 {
            for j in 0..i {
                sum += r[(i, j)].powi(2);
                count += 1;
            }
        }
        assert!(count >= 10_000);
        let mean = sum / count as f64;
        assert!((mean * n as f64 - 1.0).abs() < 0.05, "mean={mean}");
    }

    #[test]
    fn antenna_signatures_split_energy_by_gain() {
        let users: Vec<UserProfile> = (0..3)
            .map(|k| {
                let g = GainMatrix::new(1, 2, vec![0.3 + k as f64, 0.1]).unwrap();
                UserProfile::with_gains(k, g, 1e4)
            })
            .collect();
        let codes = generate_spreading(9, 3, 16, SpreadingMode::RandomBinary).unwrap();
        let (s, combined) = antenna_signatures(&codes, &users, 0, 10).unwrap();
        assert_eq!(s.processing_gain(), 32);
        for k in 0..3 {
            assert!((combined[k] - (0.4 + k as f64)).abs() < 1e-15);
            let top = s.matrix().view((0, k), (16, 1)).norm_squared();
            assert!((top - (0.3 + k as f64) / combined[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn antenna_signatures_dilute_cross_correlation() {
        let users: Vec<UserProfile> = (0..40)
            .map(|k| UserProfile::with_gains(k, GainMatrix::new(1, 4, vec![0.25; 4]).unwrap(), 1e4))
            .collect();
        let (mut total, mut pairs) = (0.0, 0.0);
        for seed in 0..50 {
            let codes = generate_spreading(seed, 40, 32, SpreadingMode::RandomBinary).unwrap();
            let (s, _) = antenna_signatures(&codes, &users, 0, seed + 1000).unwrap();
            let r = s.correlations();
            for i in 0..40 {
                for j in 0..i {
                    total += r[(i, j)].powi(2);
                    pairs += 1.0;
                }
            }
        }
        let mean = total / pairs;
        assert!((mean * 128.0 - 1.0).abs() < 0.05, "{mean}");
    }
}
