//! Packet-success-rate ("efficiency") functions and the target SIR.
//!
//! An efficiency function `f` maps the output SIR of a user to the
//! probability that a packet of `M` bits is received without error. The
//! utility `R f(γ) / p` of a user whose SIR is linear in its own power is
//! maximized at the unique positive root `γ*` of `f(γ) = γ f'(γ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default packet size in bits.
pub const DEFAULT_PACKET_SIZE: u32 = 100;

/// Relative step of the central difference used for tabulated derivatives:
/// `h = TABULATED_FD_STEP * max(1, γ)`.
pub const TABULATED_FD_STEP: f64 = 1e-6;

const BRACKET_LIMIT: f64 = 1e6;
const BRACKET_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EfficiencyForm {
    /// `f(γ) = (1 − e^{−γ})^M`.
    ExpM,
    /// Monotone cubic interpolation through user-supplied samples.
    Tabulated(MonotoneCubic),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyModel {
    packet_size_bits: u32,
    form: EfficiencyForm,
}

impl Default for EfficiencyModel {
    fn default() -> Self {
        Self {
            packet_size_bits: DEFAULT_PACKET_SIZE,
            form: EfficiencyForm::ExpM,
        }
    }
}

impl EfficiencyModel {
    pub fn exp_m(packet_size_bits: u32) -> Result<Self> {
        if packet_size_bits == 0 {
            return Err(Error::InvalidParameter(
                "packet size must be a positive number of bits".into(),
            ));
        }
        Ok(Self {
            packet_size_bits,
            form: EfficiencyForm::ExpM,
        })
    }

    /// Builds a tabulated efficiency function from `(γ, f(γ))` samples.
    ///
    /// The samples must start at `(0, 0)`, have strictly increasing SIRs and
    /// nondecreasing values in `[0, 1]`. Past the last sample the function is
    /// held at the last value.
    pub fn tabulated(packet_size_bits: u32, samples: &[(f64, f64)]) -> Result<Self> {
        if packet_size_bits == 0 {
            return Err(Error::InvalidParameter(
                "packet size must be a positive number of bits".into(),
            ));
        }
        let curve = MonotoneCubic::new(samples)?;
        Ok(Self {
            packet_size_bits,
            form: EfficiencyForm::Tabulated(curve),
        })
    }

    pub fn packet_size_bits(&self) -> u32 {
        self.packet_size_bits
    }

    pub fn form(&self) -> &EfficiencyForm {
        &self.form
    }

    pub fn eval(&self, gamma: f64) -> Result<f64> {
        check_domain(gamma)?;
        Ok(self.value(gamma))
    }

    pub fn derivative(&self, gamma: f64) -> Result<f64> {
        check_domain(gamma)?;
        Ok(self.slope(gamma))
    }

    /// `f(γ)` for `γ ≥ 0`; callers must have validated the argument.
    pub(crate) fn value(&self, gamma: f64) -> f64 {
        match &self.form {
            EfficiencyForm::ExpM => {
                if gamma.is_infinite() {
                    return 1.0;
                }
                let base = -(-gamma).exp_m1();
                base.powi(self.packet_size_bits as i32)
            }
            EfficiencyForm::Tabulated(curve) => curve.eval(gamma),
        }
    }

    pub(crate) fn slope(&self, gamma: f64) -> f64 {
        match &self.form {
            EfficiencyForm::ExpM => {
                if gamma.is_infinite() {
                    return 0.0;
                }
                let m = self.packet_size_bits as i32;
                let base = -(-gamma).exp_m1();
                f64::from(m) * (-gamma).exp() * base.powi(m - 1)
            }
            EfficiencyForm::Tabulated(_) => {
                let h = TABULATED_FD_STEP * gamma.max(1.0);
                if gamma < h {
                    (self.value(gamma + h) - self.value(gamma)) / h
                } else {
                    (self.value(gamma + h) - self.value(gamma - h)) / (2.0 * h)
                }
            }
        }
    }

    /// A function with the sign of `γ f'(γ) − f(γ)`: positive below `γ*`,
    /// negative above it.
    fn stationarity(&self, gamma: f64) -> f64 {
        match &self.form {
            // γf' − f = (1−e^{−γ})^{M−1} e^{−γ} (1 + Mγ − e^{γ})
            EfficiencyForm::ExpM => {
                let m = f64::from(self.packet_size_bits);
                m * gamma - gamma.exp_m1()
            }
            EfficiencyForm::Tabulated(_) => gamma * self.slope(gamma) - self.value(gamma),
        }
    }

    /// The SIR that maximizes `f(γ)/γ`: the unique positive root of
    /// `f(γ) = γ f'(γ)`, found by bisection with an expanding upper bracket.
    pub fn gamma_star(&self) -> Result<f64> {
        let g = |x: f64| self.stationarity(x);

        let mut lo = None;
        let mut hi = 1.0;
        while g(hi) > 0.0 {
            lo = Some(hi);
            hi *= 2.0;
            if hi > BRACKET_LIMIT {
                return Err(Error::NoInteriorMaximizer);
            }
        }
        let mut lo = match lo {
            Some(lo) => lo,
            None => {
                let mut x = hi;
                loop {
                    x *= 0.5;
                    if x < BRACKET_FLOOR {
                        return Err(Error::NoInteriorMaximizer);
                    }
                    let gx = g(x);
                    if gx > 0.0 {
                        break x;
                    }
                    if gx < 0.0 {
                        hi = x;
                    }
                }
            }
        };

        for _ in 0..2000 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(if g(hi).abs() < g(lo).abs() { hi } else { lo })
    }
}

fn check_domain(gamma: f64) -> Result<()> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::Domain(format!("SIR must be nonnegative, got {gamma}")));
    }
    Ok(())
}

/// Piecewise cubic Hermite interpolant with Fritsch–Carlson tangents, which
/// preserves monotonicity of the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    tangents: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 3 {
            return Err(Error::InvalidParameter(
                "tabulated efficiency needs at least 3 samples".into(),
            ));
        }
        if samples[0] != (0.0, 0.0) {
            return Err(Error::InvalidParameter(
                "tabulated efficiency must start at (0, 0)".into(),
            ));
        }
        for w in samples.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if !(x1 > x0) || !x1.is_finite() {
                return Err(Error::InvalidParameter(
                    "tabulated SIRs must be finite and strictly increasing".into(),
                ));
            }
            if !(y1 >= y0) || y1 > 1.0 {
                return Err(Error::InvalidParameter(
                    "tabulated efficiencies must be nondecreasing and at most 1".into(),
                ));
            }
        }

        let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let n = xs.len();
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let d: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        let mut tangents = vec![0.0; n];
        for i in 1..n - 1 {
            if d[i - 1] * d[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                tangents[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
            }
        }
        tangents[0] = end_tangent(h[0], h[1], d[0], d[1]);
        tangents[n - 1] = end_tangent(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);

        Ok(Self { xs, ys, tangents })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&xi| xi <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i]
            + h10 * h * self.tangents[i]
            + h01 * self.ys[i + 1]
            + h11 * h * self.tangents[i + 1]
    }
}

// Three-point one-sided end tangent, limited to keep the interpolant monotone.
fn end_tangent(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: bisection on e^x − 1 − Mx, written without the
    // efficiency model.
    fn reduced_root(m: f64) -> f64 {
        let h = |x: f64| x.exp() - 1.0 - m * x;
        let (mut lo, mut hi) = (1e-6, 50.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn eval_examples() {
        let f = EfficiencyModel::exp_m(100).unwrap();
        assert_eq!(f.eval(0.0).unwrap(), 0.0);
        // (1 − e^{−6.4867})^100, evaluated with 40-digit arithmetic.
        assert!((f.eval(6.4867).unwrap() - 0.858_582_048_906_973_9).abs() < 1e-12);
        assert!((f.eval(6.4867).unwrap() - 0.8585).abs() < 1e-3);
        let one = EfficiencyModel::exp_m(1).unwrap();
        assert_eq!(one.eval(f64::INFINITY).unwrap(), 1.0);
        assert!((one.eval(50.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn negative_sir_is_a_domain_error() {
        let f = EfficiencyModel::default();
        assert!(matches!(f.eval(-1e-3), Err(Error::Domain(_))));
        assert!(matches!(f.derivative(-1.0), Err(Error::Domain(_))));
        assert!(f.eval(f64::NAN).is_err());
    }

    #[test]
    fn derivative_examples() {
        let two = EfficiencyModel::exp_m(2).unwrap();
        assert_eq!(two.derivative(0.0).unwrap(), 0.0);
        let one = EfficiencyModel::exp_m(1).unwrap();
        assert_eq!(one.derivative(0.0).unwrap(), 1.0);

        let f = EfficiencyModel::exp_m(100).unwrap();
        for &x in &[0.5, 2.0, 4.0, 6.4867, 9.0, 15.0] {
            let h = 1e-5 * x;
            let fd = (f.eval(x + h).unwrap() - f.eval(x - h).unwrap()) / (2.0 * h);
            let d = f.derivative(x).unwrap();
            assert!((d - fd).abs() <= 1e-6 * d.abs(), "x={x} d={d} fd={fd}");
        }
    }

    #[test]
    fn gamma_star_examples() {
        let g2 = EfficiencyModel::exp_m(2).unwrap().gamma_star().unwrap();
        assert!((g2 - reduced_root(2.0)).abs() < 1e-10);
        assert!((g2 - 1.256_431_208_626_17).abs() < 1e-10);

        let g100 = EfficiencyModel::exp_m(100).unwrap().gamma_star().unwrap();
        assert!((g100 - reduced_root(100.0)).abs() < 1e-10);
        assert!((g100 - 6.474_600_379_589_358).abs() < 1e-10);

        assert_eq!(
            EfficiencyModel::exp_m(1).unwrap().gamma_star(),
            Err(Error::NoInteriorMaximizer)
        );
    }

    #[test]
    fn gamma_star_residual_is_tight() {
        for m in [2u32, 3, 10, 50, 100, 500, 2000] {
            let f = EfficiencyModel::exp_m(m).unwrap();
            let g = f.gamma_star().unwrap();
            let residual = g.exp() - 1.0 - f64::from(m) * g;
            assert!(residual.abs() < 1e-9, "M={m} residual={residual}");
            let fs = f.eval(g).unwrap();
            let stat = fs - g * f.derivative(g).unwrap();
            assert!(stat.abs() < 1e-9 * fs);
        }
    }

    #[test]
    fn utility_grid_maximizer_is_at_gamma_star() {
        let f = EfficiencyModel::exp_m(100).unwrap();
        let gs = f.gamma_star().unwrap();
        for a in [0.3, 1.0, 7.5, 40.0] {
            let p_max = 3.0 * gs / a;
            let n = 100_000;
            let best = (1..=n)
                .map(|i| p_max * i as f64 / n as f64)
                .max_by(|x, y| {
                    let ux = f.eval(a * x).unwrap() / x;
                    let uy = f.eval(a * y).unwrap() / y;
                    ux.partial_cmp(&uy).unwrap()
                })
                .unwrap();
            assert!((a * best - gs).abs() < 0.01 * gs);
        }
    }

    fn tabulated_exp_m(m: u32) -> EfficiencyModel {
        let exact = EfficiencyModel::exp_m(m).unwrap();
        let samples: Vec<(f64, f64)> = (0..=400)
            .map(|i| {
                let x = i as f64 * 0.05;
                (x, exact.eval(x).unwrap())
            })
            .collect();
        EfficiencyModel::tabulated(m, &samples).unwrap()
    }

    #[test]
    fn tabulated_tracks_the_sampled_function() {
        let exact = EfficiencyModel::exp_m(100).unwrap();
        let tab = tabulated_exp_m(100);
        assert_eq!(tab.eval(0.0).unwrap(), 0.0);
        let mut prev = 0.0;
        for i in 0..=4000 {
            let x = i as f64 * 0.005;
            let y = tab.eval(x).unwrap();
            assert!((0.0..=1.0).contains(&y));
            assert!(y >= prev - 1e-15, "not monotone at {x}");
            assert!((y - exact.eval(x).unwrap()).abs() < 2e-4);
            prev = y;
        }
        let gs = tab.gamma_star().unwrap();
        assert!((gs - exact.gamma_star().unwrap()).abs() < 5e-3, "gs={gs}");
    }

    #[test]
    fn tabulated_rejects_bad_samples() {
        assert!(EfficiencyModel::tabulated(10, &[(0.0, 0.0), (1.0, 0.5)]).is_err());
        assert!(EfficiencyModel::tabulated(10, &[(0.1, 0.0), (1.0, 0.5), (2.0, 0.9)]).is_err());
        assert!(EfficiencyModel::tabulated(10, &[(0.0, 0.0), (1.0, 0.5), (2.0, 0.4)]).is_err());
        assert!(EfficiencyModel::tabulated(10, &[(0.0, 0.0), (1.0, 0.5), (1.0, 0.9)]).is_err());
        assert!(EfficiencyModel::tabulated(10, &[(0.0, 0.0), (1.0, 0.5), (2.0, 1.2)]).is_err());
    }

    #[test]
    fn concave_tabulated_has_no_interior_maximizer() {
        let one = EfficiencyModel::exp_m(1).unwrap();
        let samples: Vec<(f64, f64)> = (0..=200)
            .map(|i| {
                let x = i as f64 * 0.1;
                (x, one.eval(x).unwrap())
            })
            .collect();
        let tab = EfficiencyModel::tabulated(1, &samples).unwrap();
        assert_eq!(tab.gamma_star(), Err(Error::NoInteriorMaximizer));
    }
}
