//! Multicarrier power control: each user spreads power over `D` carriers to
//! maximize total throughput per total transmit power.
//!
//! Against fixed interference the best response puts all power on the one
//! carrier needing the least power to reach `γ*`. Equilibria may not exist,
//! so the dynamics here run with cycle detection.

use nalgebra::DMatrix;

use crate::dynamics::{iterate, BestResponse, EquilibriumReport, Game, IterationOptions, Status};
use crate::efficiency::EfficiencyModel;
use crate::error::{Error, Result};
use crate::games::{utility_bpj, Objective, PowerGame};
use crate::receivers::RandomSpreadingMf;
use crate::system::{SystemParams, UserProfile};

/// Multicarrier game with the averaged matched-filter SIR on every carrier,
/// each carrier using the full processing gain.
#[derive(Debug, Clone)]
pub struct MulticarrierGame {
    gains: DMatrix<f64>,
    processing_gain: usize,
    noise: f64,
    max_power: f64,
    rates: Vec<f64>,
    efficiency: EfficiencyModel,
    gamma_star: f64,
}

impl MulticarrierGame {
    /// `gains` is `K × D`.
    pub fn new(
        gains: DMatrix<f64>,
        processing_gain: usize,
        noise: f64,
        max_power: f64,
        rates: Vec<f64>,
        efficiency: EfficiencyModel,
    ) -> Result<Self> {
        if gains.ncols() == 0 {
            return Err(Error::Dimension("at least one carrier is required".into()));
        }
        if rates.len() != gains.nrows() {
            return Err(Error::Dimension(format!(
                "{} rates for {} users",
                rates.len(),
                gains.nrows()
            )));
        }
        if gains.iter().any(|&h| !(h > 0.0)) {
            return Err(Error::InvalidParameter("channel gains must be positive".into()));
        }
        if !(noise > 0.0) || !(max_power > 0.0) || processing_gain == 0 {
            return Err(Error::InvalidParameter(
                "noise, max power and processing gain must be positive".into(),
            ));
        }
        let gamma_star = efficiency.gamma_star()?;
        Ok(Self {
            gains,
            processing_gain,
            noise,
            max_power,
            rates,
            efficiency,
            gamma_star,
        })
    }

    /// Uses each user's antenna-combined gain per carrier.
    pub fn from_users(users: &[UserProfile], params: &SystemParams, efficiency: EfficiencyModel) -> Result<Self> {
        let d = params.carriers;
        let mut gains = DMatrix::zeros(users.len(), d);
        for (k, u) in users.iter().enumerate() {
            if u.gains.carriers() != d {
                return Err(Error::Dimension(format!(
                    "user {} has gains for {} carriers, system has {d}",
                    u.id,
                    u.gains.carriers()
                )));
            }
            for c in 0..d {
                gains[(k, c)] = u.gains.combined(c);
            }
        }
        let rates = users.iter().map(|u| u.rate_bps).collect();
        Self::new(
            gains,
            params.processing_gain,
            params.noise_power,
            params.max_power,
            rates,
            efficiency,
        )
    }

    pub fn gains(&self) -> &DMatrix<f64> {
        &self.gains
    }

    pub fn gamma_star(&self) -> f64 {
        self.gamma_star
    }

    pub fn efficiency(&self) -> &EfficiencyModel {
        &self.efficiency
    }

    /// SIR per unit own power of user `k` on each carrier.
    pub fn own_gains(&self, k: usize, powers: &DMatrix<f64>) -> Vec<f64> {
        let n = self.processing_gain as f64;
        (0..self.gains.ncols())
            .map(|c| {
                let interference: f64 = (0..self.gains.nrows())
                    .filter(|&j| j != k)
                    .map(|j| powers[(j, c)] * self.gains[(j, c)])
                    .sum();
                self.gains[(k, c)] / (self.noise + interference / n)
            })
            .collect()
    }

    fn payoff_with(&self, k: usize, own_gains: &[f64], row: &[f64]) -> f64 {
        let total_power: f64 = row.iter().sum();
        if total_power <= 0.0 {
            return 0.0;
        }
        let throughput: f64 = row
            .iter()
            .zip(own_gains)
            .map(|(&p, &a)| self.rates[k] * self.efficiency.value(a * p))
            .sum();
        throughput / total_power
    }
}

/// Total throughput over total power for one user.
pub fn utility_mc(rate: f64, sirs: &[f64], powers: &[f64], model: &EfficiencyModel) -> f64 {
    let total_power: f64 = powers.iter().sum();
    if total_power <= 0.0 {
        return 0.0;
    }
    sirs.iter().map(|&g| rate * model.value(g.max(0.0))).sum::<f64>() / total_power
}

/// Best response of user `k`: `γ*`-reaching power on the carrier needing the
/// least of it (lowest index on ties), zero elsewhere. When no carrier can
/// reach `γ*`, transmit `P_max` on the carrier maximizing `f(a_ℓ P_max)/P_max`.
pub fn best_response_mc(own_gains: &[f64], gamma_star: f64, max_power: f64, model: &EfficiencyModel) -> BestResponse {
    let d = own_gains.len();
    let mut row = vec![0.0; d];
    let mut best: Option<(usize, f64)> = None;
    for (c, &a) in own_gains.iter().enumerate() {
        let required = gamma_star / a;
        if best.is_none_or(|(_, p)| required < p) {
            best = Some((c, required));
        }
    }
    let (carrier, required) = best.expect("at least one carrier");
    if required <= max_power {
        row[carrier] = required;
        return BestResponse { row, saturated: false };
    }
    let mut choice = (0, f64::NEG_INFINITY);
    for (c, &a) in own_gains.iter().enumerate() {
        let u = utility_bpj(1.0, a * max_power, max_power, model);
        if u > choice.1 {
            choice = (c, u);
        }
    }
    row[choice.0] = max_power;
    BestResponse { row, saturated: true }
}

impl Game for MulticarrierGame {
    fn num_users(&self) -> usize {
        self.gains.nrows()
    }

    fn num_carriers(&self) -> usize {
        self.gains.ncols()
    }

    fn max_power(&self) -> f64 {
        self.max_power
    }

    fn best_response(&self, k: usize, powers: &DMatrix<f64>) -> BestResponse {
        best_response_mc(
            &self.own_gains(k, powers),
            self.gamma_star,
            self.max_power,
            &self.efficiency,
        )
    }

    fn payoff(&self, k: usize, powers: &DMatrix<f64>) -> f64 {
        let row: Vec<f64> = powers.row(k).iter().copied().collect();
        self.payoff_with(k, &self.own_gains(k, powers), &row)
    }

    fn deviation_payoffs(&self, k: usize, powers: &DMatrix<f64>, rows: &[Vec<f64>]) -> Vec<f64> {
        let a = self.own_gains(k, powers);
        rows.iter().map(|row| self.payoff_with(k, &a, row)).collect()
    }

    fn sirs(&self, powers: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.gains.nrows(), self.gains.ncols());
        for k in 0..self.gains.nrows() {
            for (c, a) in self.own_gains(k, powers).into_iter().enumerate() {
                out[(k, c)] = a * powers[(k, c)];
            }
        }
        out
    }
}

/// Sum of every user's utility at `powers`.
pub fn total_utility<G: Game + ?Sized>(game: &G, powers: &DMatrix<f64>) -> f64 {
    (0..game.num_users()).map(|k| game.payoff(k, powers)).sum()
}

/// Users transmitting on each carrier.
pub fn carrier_counts(powers: &DMatrix<f64>) -> Vec<usize> {
    (0..powers.ncols())
        .map(|c| powers.column(c).iter().filter(|&&p| p > 0.0).count())
        .collect()
}

/// Every user transmits on exactly one carrier.
pub fn has_single_carrier_support(powers: &DMatrix<f64>) -> bool {
    powers
        .row_iter()
        .all(|row| row.iter().filter(|&&p| p > 0.0).count() == 1)
}

#[derive(Debug, Clone)]
pub struct McOutcome {
    pub report: EquilibriumReport,
    /// Users per carrier at termination.
    pub carrier_counts: Vec<usize>,
    pub single_carrier_support: bool,
}

impl McOutcome {
    pub fn converged(&self) -> bool {
        self.report.status == Status::Converged
    }
}

/// Best-response dynamics of the multicarrier game from zero power.
pub fn run_mc_game(game: &MulticarrierGame, opts: &IterationOptions) -> McOutcome {
    let initial = DMatrix::zeros(game.num_users(), game.num_carriers());
    let report = iterate(game, &initial, opts);
    let powers = &report.state.powers;
    McOutcome {
        carrier_counts: carrier_counts(powers),
        single_carrier_support: has_single_carrier_support(powers),
        report,
    }
}

#[derive(Debug, Clone)]
pub struct McBaseline {
    /// `K × D`, every user active on every carrier.
    pub powers: DMatrix<f64>,
    /// One single-carrier equilibrium report per carrier.
    pub reports: Vec<EquilibriumReport>,
}

impl McBaseline {
    pub fn all_converged(&self) -> bool {
        self.reports.iter().all(|r| r.status == Status::Converged)
    }
}

/// Maximizes bits per joule on each carrier separately: one single-carrier
/// game per carrier, results assembled into a power matrix.
pub fn independent_per_carrier_baseline(game: &MulticarrierGame, opts: &IterationOptions) -> Result<McBaseline> {
    let (k, d) = (game.num_users(), game.num_carriers());
    let mut powers = DMatrix::zeros(k, d);
    let mut reports = Vec::with_capacity(d);
    for c in 0..d {
        let gains: Vec<f64> = game.gains.column(c).iter().copied().collect();
        let sir = RandomSpreadingMf::new(gains, game.processing_gain, game.noise);
        let single = PowerGame::new(
            Box::new(sir),
            Objective::BitsPerJoule,
            game.efficiency.clone(),
            game.rates.clone(),
            game.max_power,
        )?;
        let report = iterate(&single, &DMatrix::zeros(k, 1), opts);
        powers.set_column(c, &report.state.powers.column(0));
        reports.push(report);
    }
    Ok(McBaseline { powers, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::verify_nash;
    use crate::games::best_response_bpj;

    fn game(gains: DMatrix<f64>, noise: f64) -> MulticarrierGame {
        let k = gains.nrows();
        MulticarrierGame::new(gains, 128, noise, 1.0, vec![1e4; k], EfficiencyModel::default()).unwrap()
    }

    #[test]
    fn utility_examples() {
        let f = EfficiencyModel::default();
        let single = utility_mc(1e4, &[6.0, 0.0], &[0.5, 0.0], &f);
        assert!((single - utility_bpj(1e4, 6.0, 0.5, &f)).abs() < 1e-9);
        let equal = utility_mc(1e4, &[6.0; 3], &[0.5; 3], &f);
        assert!((equal - utility_bpj(1e4, 6.0, 0.5, &f)).abs() < 1e-9);
        // Interpolant passes through its samples: f(1) = 0.4, f(2) = 0.8.
        let tab = EfficiencyModel::tabulated(10, &[(0.0, 0.0), (1.0, 0.4), (2.0, 0.8), (3.0, 0.95)]).unwrap();
        let u = utility_mc(1e4, &[2.0, 1.0], &[1.0, 1.0], &tab);
        assert!((u - 6000.0).abs() < 1e-9);
        assert_eq!(utility_mc(1e4, &[0.0, 0.0], &[0.0, 0.0], &f), 0.0);
    }

    #[test]
    fn single_carrier_reduces_to_bpj() {
        let gs = 6.4867;
        let f = EfficiencyModel::default();
        let br = best_response_mc(&[10.0], gs, 1.0, &f);
        assert_eq!(br.row, vec![best_response_bpj(10.0, gs, 1.0).power]);
    }

    #[test]
    fn picks_cheapest_carrier() {
        let f = EfficiencyModel::default();
        let gs = 6.4867;
        let br = best_response_mc(&[0.1 / 0.01, 0.2 / 0.01], gs, 1.0, &f);
        assert_eq!(br.row[0], 0.0);
        assert!((br.row[1] - 0.324335).abs() < 1e-12);
        let tie = best_response_mc(&[10.0, 10.0], gs, 1.0, &f);
        assert!(tie.row[0] > 0.0 && tie.row[1] == 0.0);
    }

    #[test]
    fn unreachable_target_uses_full_power_on_best_carrier() {
        let f = EfficiencyModel::default();
        let br = best_response_mc(&[2.0, 5.0, 3.0], 6.4867, 1.0, &f);
        assert_eq!(br.row, vec![0.0, 1.0, 0.0]);
        assert!(br.saturated);
    }

    #[test]
    fn best_response_beats_random_rows() {
        use rand::{Rng, SeedableRng};
        let g = game(DMatrix::from_row_slice(3, 2, &[0.1, 0.3, 0.2, 0.15, 0.05, 0.4]), 0.01);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let powers = DMatrix::from_fn(3, 2, |_, _| rng.random::<f64>());
        let rows: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        for k in 0..3 {
            let br = g.best_response(k, &powers);
            let best = g.deviation_payoffs(k, &powers, std::slice::from_ref(&br.row))[0];
            for u in g.deviation_payoffs(k, &powers, &rows) {
                assert!(u <= best * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn asymmetric_users_separate() {
        let g = game(DMatrix::from_row_slice(2, 2, &[1.0, 0.01, 0.01, 1.0]), 0.01);
        let out = run_mc_game(&g, &IterationOptions::default());
        assert!(out.converged());
        assert_eq!(out.carrier_counts, vec![1, 1]);
        assert!(out.report.state.powers[(0, 0)] > 0.0 && out.report.state.powers[(1, 1)] > 0.0);
        assert!(verify_nash(&g, &out.report.state.powers, 101, 1e-9).verified);
    }

    #[test]
    fn single_user_converges_in_one_sweep() {
        let g = game(DMatrix::from_row_slice(1, 2, &[0.2, 0.1]), 0.01);
        let out = run_mc_game(&g, &IterationOptions::default());
        assert!(out.converged());
        // Sweep 1 moves to the best response, sweep 2 confirms it.
        assert_eq!(out.report.iterations, 2);
    }

    #[test]
    fn baseline_with_one_carrier_is_single_carrier_ne() {
        let g = game(DMatrix::from_column_slice(3, 1, &[0.1, 0.2, 0.3]), 0.01);
        let base = independent_per_carrier_baseline(&g, &IterationOptions::default()).unwrap();
        let joint = run_mc_game(&g, &IterationOptions::default());
        for k in 0..3 {
            assert!((base.powers[(k, 0)] - joint.report.state.powers[(k, 0)]).abs() < 1e-8);
        }
    }

    #[test]
    fn symmetric_gains_give_equal_baseline_columns() {
        let g = game(
            DMatrix::from_row_slice(3, 2, &[0.1, 0.1, 0.2, 0.2, 0.3, 0.3]),
            0.01,
        );
        let base = independent_per_carrier_baseline(&g, &IterationOptions::default()).unwrap();
        assert!(base.all_converged());
        assert_eq!(base.powers.column(0), base.powers.column(1));
    }

    #[test]
    fn rejects_bad_shapes() {
        let f = EfficiencyModel::default();
        assert!(MulticarrierGame::new(DMatrix::zeros(2, 0), 128, 0.01, 1.0, vec![1.0; 2], f.clone()).is_err());
        assert!(MulticarrierGame::new(DMatrix::from_element(2, 2, 0.1), 128, 0.01, 1.0, vec![1.0], f).is_err());
    }
}
