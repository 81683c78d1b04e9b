//! Objectives and best responses for the single-carrier power control games,
//! the closed-form SIR-balanced equilibrium, and a pure-strategy Nash finder
//! for two-player matrix games.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::{BestResponse, Game};
use crate::efficiency::EfficiencyModel;
use crate::error::{Error, Result};
use crate::receivers::SirModel;

/// Points of the coarse scan that brackets the priced best response before
/// golden-section refinement.
const PRICED_SCAN_POINTS: usize = 64;
const PRICED_REL_TOL: f64 = 1e-10;

/// What each user maximizes. Vectors are indexed by user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Objective {
    /// `R_k f(γ_k) / p_k`.
    BitsPerJoule,
    /// `R_k f(γ_k) / p_k − c_k p_k`.
    Priced { prices: Vec<f64> },
    /// `ζ_k ln(1 + γ_k) − c_k p_k`.
    LogPriced { weights: Vec<f64>, prices: Vec<f64> },
    /// Minimizes `b_k p_k + c_k (γ_k^tar − γ_k)^2`; the payoff is its negative.
    SirCost {
        power_costs: Vec<f64>,
        sir_costs: Vec<f64>,
        targets: Vec<f64>,
    },
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::BitsPerJoule => "bpj",
            Objective::Priced { .. } => "priced",
            Objective::LogPriced { .. } => "log-priced",
            Objective::SirCost { .. } => "sir-cost",
        }
    }

    fn needs_gamma_star(&self) -> bool {
        matches!(self, Objective::BitsPerJoule | Objective::Priced { .. })
    }

    fn validate(&self, users: usize) -> Result<()> {
        let check = |name: &str, v: &[f64], strict: bool| -> Result<()> {
            if v.len() != users {
                return Err(Error::Dimension(format!(
                    "objective {name}: {} values for {users} users",
                    v.len()
                )));
            }
            let bad = v
                .iter()
                .any(|&x| !x.is_finite() || if strict { x <= 0.0 } else { x < 0.0 });
            if bad {
                let rule = if strict { "positive" } else { "nonnegative" };
                return Err(Error::InvalidParameter(format!("objective {name} must be {rule}")));
            }
            Ok(())
        };
        match self {
            Objective::BitsPerJoule => Ok(()),
            Objective::Priced { prices } => check("prices", prices, false),
            Objective::LogPriced { weights, prices } => {
                check("weights", weights, true)?;
                check("prices", prices, true)
            }
            Objective::SirCost {
                power_costs,
                sir_costs,
                targets,
            } => {
                check("power costs", power_costs, false)?;
                check("SIR costs", sir_costs, true)?;
                check("target SIRs", targets, true)
            }
        }
    }
}

/// Bits per joule, `R f(γ) / p`, continuously extended by 0 at `p = 0`.
pub fn utility_bpj(rate: f64, sir: f64, power: f64, model: &EfficiencyModel) -> f64 {
    if power <= 0.0 {
        return 0.0;
    }
    rate * model.value(sir.max(0.0)) / power
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerResponse {
    pub power: f64,
    /// The unconstrained optimum lay above `max_power`.
    pub saturated: bool,
}

/// Best response under `R f(a p)/p`: the power reaching `γ*`, or `P_max`.
pub fn best_response_bpj(own_gain: f64, gamma_star: f64, max_power: f64) -> PowerResponse {
    let required = gamma_star / own_gain;
    PowerResponse {
        power: required.min(max_power),
        saturated: required > max_power,
    }
}

/// Best response under `R f(a p)/p − c p` on `(0, P_max]`.
///
/// The maximizer lies in `(0, p_bpj]` where `p_bpj` is the unpriced best
/// response. A coarse scan of that interval brackets it. Bisection on the sign
/// of the derivative `R (γ f'(γ) − f(γ)) / p² − c` refines it to full
/// precision; golden-section search on the value is the fallback when the
/// bracket holds no sign change.
pub fn best_response_priced(
    own_gain: f64,
    rate: f64,
    price: f64,
    model: &EfficiencyModel,
    gamma_star: f64,
    max_power: f64,
) -> PowerResponse {
    let unpriced = best_response_bpj(own_gain, gamma_star, max_power);
    if price <= 0.0 {
        return unpriced;
    }
    let hi = unpriced.power;
    let u = |p: f64| utility_bpj(rate, own_gain * p, p, model) - price * p;
    let slope = |p: f64| {
        let g = own_gain * p;
        rate * (g * model.slope(g) - model.value(g)) / (p * p) - price
    };

    let step = hi / PRICED_SCAN_POINTS as f64;
    let (mut best_i, mut best_u) = (PRICED_SCAN_POINTS, u(hi));
    for i in (1..PRICED_SCAN_POINTS).rev() {
        let v = u(step * i as f64);
        if v > best_u {
            best_i = i;
            best_u = v;
        }
    }
    let mut a = step * (best_i as f64 - 1.0);
    let mut b = (step * (best_i as f64 + 1.0)).min(hi);

    // A sign change brackets a local maximum at least as good as the best
    // scan point; near the top the utility is too flat to compare values.
    let power = if a > 0.0 && slope(a) > 0.0 && slope(b) < 0.0 {
        loop {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break mid;
            }
            if slope(mid) > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
    } else {
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = b - inv_phi * (b - a);
        let mut x2 = a + inv_phi * (b - a);
        let (mut u1, mut u2) = (u(x1), u(x2));
        while b - a > PRICED_REL_TOL * b {
            if u1 < u2 {
                a = x1;
                x1 = x2;
                u1 = u2;
                x2 = a + inv_phi * (b - a);
                u2 = u(x2);
            } else {
                b = x2;
                x2 = x1;
                u2 = u1;
                x1 = b - inv_phi * (b - a);
                u1 = u(x1);
            }
        }
        let mid = 0.5 * (a + b);
        if u(mid) >= best_u {
            mid
        } else {
            step * best_i as f64
        }
    };
    PowerResponse {
        power,
        saturated: unpriced.saturated && power >= max_power,
    }
}

/// Best response under `ζ ln(1 + a p) − c p`: `clamp(ζ/c − 1/a, 0, P_max)`.
pub fn best_response_log_priced(own_gain: f64, weight: f64, price: f64, max_power: f64) -> PowerResponse {
    let stationary = weight / price - 1.0 / own_gain;
    PowerResponse {
        power: stationary.clamp(0.0, max_power),
        saturated: stationary > max_power,
    }
}

/// Best response minimizing `b p + c (γ_tar − a p)^2`:
/// `clamp(γ_tar/a − b/(2 c a²), 0, P_max)`.
pub fn best_response_sir_cost(
    own_gain: f64,
    power_cost: f64,
    sir_cost: f64,
    target: f64,
    max_power: f64,
) -> PowerResponse {
    let stationary = target / own_gain - power_cost / (2.0 * sir_cost * own_gain * own_gain);
    PowerResponse {
        power: stationary.clamp(0.0, max_power),
        saturated: stationary > max_power,
    }
}

/// Single-carrier power control game over any own-power-linear SIR model.
pub struct PowerGame {
    sir: Box<dyn SirModel>,
    objective: Objective,
    efficiency: EfficiencyModel,
    rates: Vec<f64>,
    gamma_star: Option<f64>,
    max_power: f64,
}

impl PowerGame {
    pub fn new(
        sir: Box<dyn SirModel>,
        objective: Objective,
        efficiency: EfficiencyModel,
        rates: Vec<f64>,
        max_power: f64,
    ) -> Result<Self> {
        let users = sir.num_users();
        if rates.len() != users {
            return Err(Error::Dimension(format!("{} rates for {users} users", rates.len())));
        }
        if rates.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidParameter("rates must be positive".into()));
        }
        if !(max_power > 0.0) {
            return Err(Error::InvalidParameter("max power must be positive".into()));
        }
        objective.validate(users)?;
        let gamma_star = if objective.needs_gamma_star() {
            Some(efficiency.gamma_star()?)
        } else {
            efficiency.gamma_star().ok()
        };
        Ok(Self {
            sir,
            objective,
            efficiency,
            rates,
            gamma_star,
            max_power,
        })
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn efficiency(&self) -> &EfficiencyModel {
        &self.efficiency
    }

    pub fn gamma_star(&self) -> Option<f64> {
        self.gamma_star
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn sir_model(&self) -> &dyn SirModel {
        self.sir.as_ref()
    }

    /// Same game and SIR model with another objective.
    pub fn with_objective(self, objective: Objective) -> Result<Self> {
        PowerGame::new(self.sir, objective, self.efficiency, self.rates, self.max_power)
    }

    fn respond(&self, k: usize, own_gain: f64) -> PowerResponse {
        let p_max = self.max_power;
        match &self.objective {
            Objective::BitsPerJoule => {
                best_response_bpj(own_gain, self.gamma_star.expect("validated"), p_max)
            }
            Objective::Priced { prices } => best_response_priced(
                own_gain,
                self.rates[k],
                prices[k],
                &self.efficiency,
                self.gamma_star.expect("validated"),
                p_max,
            ),
            Objective::LogPriced { weights, prices } => {
                best_response_log_priced(own_gain, weights[k], prices[k], p_max)
            }
            Objective::SirCost {
                power_costs,
                sir_costs,
                targets,
            } => best_response_sir_cost(own_gain, power_costs[k], sir_costs[k], targets[k], p_max),
        }
    }

    /// Payoff of user `k` at own power `p` when its SIR is `own_gain · p`.
    pub fn payoff_at(&self, k: usize, own_gain: f64, p: f64) -> f64 {
        let sir = own_gain * p;
        match &self.objective {
            Objective::BitsPerJoule => utility_bpj(self.rates[k], sir, p, &self.efficiency),
            Objective::Priced { prices } => {
                utility_bpj(self.rates[k], sir, p, &self.efficiency) - prices[k] * p
            }
            Objective::LogPriced { weights, prices } => weights[k] * sir.ln_1p() - prices[k] * p,
            Objective::SirCost {
                power_costs,
                sir_costs,
                targets,
            } => -(power_costs[k] * p + sir_costs[k] * (targets[k] - sir).powi(2)),
        }
    }

    /// Bits-per-joule utility of every user, whatever the objective.
    pub fn bpj_utilities(&self, powers: &[f64]) -> Vec<f64> {
        self.sir
            .sirs(powers)
            .iter()
            .zip(powers)
            .zip(&self.rates)
            .map(|((&g, &p), &r)| utility_bpj(r, g, p, &self.efficiency))
            .collect()
    }
}

impl Game for PowerGame {
    fn num_users(&self) -> usize {
        self.sir.num_users()
    }

    fn max_power(&self) -> f64 {
        self.max_power
    }

    fn best_response(&self, k: usize, powers: &DMatrix<f64>) -> BestResponse {
        let a = self.sir.own_gain(powers.as_slice(), k);
        let r = self.respond(k, a);
        BestResponse {
            row: vec![r.power],
            saturated: r.saturated,
        }
    }

    fn best_responses(&self, powers: &DMatrix<f64>) -> Vec<BestResponse> {
        self.sir
            .own_gains(powers.as_slice())
            .into_iter()
            .enumerate()
            .map(|(k, a)| {
                let r = self.respond(k, a);
                BestResponse {
                    row: vec![r.power],
                    saturated: r.saturated,
                }
            })
            .collect()
    }

    fn payoff(&self, k: usize, powers: &DMatrix<f64>) -> f64 {
        let a = self.sir.own_gain(powers.as_slice(), k);
        self.payoff_at(k, a, powers[(k, 0)])
    }

    fn deviation_payoffs(&self, k: usize, powers: &DMatrix<f64>, rows: &[Vec<f64>]) -> Vec<f64> {
        let a = self.sir.own_gain(powers.as_slice(), k);
        rows.iter().map(|row| self.payoff_at(k, a, row[0])).collect()
    }

    fn sirs(&self, powers: &DMatrix<f64>) -> DMatrix<f64> {
        let s = self.sir.sirs(powers.as_slice());
        DMatrix::from_vec(s.len(), 1, s)
    }
}

/// Closed-form SIR-balanced equilibrium of the bits-per-joule game under the
/// averaged matched-filter model.
#[derive(Debug, Clone, PartialEq)]
pub enum BalancedNe {
    /// Every user reaches `γ*` within the power limit.
    Interior { powers: Vec<f64>, received_power: f64 },
    /// The balanced profile needs more than `P_max` for some users; the
    /// actual equilibrium has saturated users and must be found by dynamics.
    CapConstrained { powers: Vec<f64>, received_power: f64 },
}

impl BalancedNe {
    pub fn powers(&self) -> &[f64] {
        match self {
            BalancedNe::Interior { powers, .. } | BalancedNe::CapConstrained { powers, .. } => powers,
        }
    }
}

/// Imposing `γ_k = γ*` in the averaged matched-filter SIR gives equal
/// received powers `q = γ* σ² / (1 − (K−1) γ* / N)` and `p_k = q / h_k`.
pub fn sir_balanced_ne_mf(
    gains: &[f64],
    processing_gain: usize,
    noise: f64,
    max_power: f64,
    gamma_star: f64,
) -> Result<BalancedNe> {
    let users = gains.len();
    if users == 0 {
        return Err(Error::Dimension("no users".into()));
    }
    let interference_load = (users - 1) as f64 * gamma_star / processing_gain as f64;
    if interference_load >= 1.0 {
        return Err(Error::Infeasible(format!(
            "(K-1) gamma*/N = {interference_load} >= 1: SIR gamma* is unreachable for all users"
        )));
    }
    let q = gamma_star * noise / (1.0 - interference_load);
    let powers: Vec<f64> = gains.iter().map(|h| q / h).collect();
    if powers.iter().any(|&p| p > max_power) {
        Ok(BalancedNe::CapConstrained {
            powers,
            received_power: q,
        })
    } else {
        Ok(BalancedNe::Interior {
            powers,
            received_power: q,
        })
    }
}

/// Two-player game in matrix form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixGame {
    pub row_actions: Vec<String>,
    pub col_actions: Vec<String>,
    /// `payoffs[i][j]` = (row player, column player) payoffs when the row
    /// player plays `i` and the column player plays `j`.
    pub payoffs: Vec<Vec<(f64, f64)>>,
}

impl MatrixGame {
    pub fn new(row_actions: Vec<String>, col_actions: Vec<String>, payoffs: Vec<Vec<(f64, f64)>>) -> Result<Self> {
        if row_actions.is_empty() || col_actions.is_empty() {
            return Err(Error::Dimension("each player needs at least one action".into()));
        }
        if payoffs.len() != row_actions.len() || payoffs.iter().any(|r| r.len() != col_actions.len()) {
            return Err(Error::Dimension("payoff table must cover every joint action".into()));
        }
        Ok(Self {
            row_actions,
            col_actions,
            payoffs,
        })
    }

    /// Confess (C) / not confess (NC).
    pub fn prisoners_dilemma() -> Self {
        let labels = || vec!["C".to_string(), "NC".to_string()];
        Self::new(
            labels(),
            labels(),
            vec![vec![(-1.0, -1.0), (1.0, -2.0)], vec![(-2.0, 1.0), (0.0, 0.0)]],
        )
        .expect("complete table")
    }

    pub fn payoff(&self, joint: (usize, usize)) -> (f64, f64) {
        self.payoffs[joint.0][joint.1]
    }

    /// Largest gain either player gets by deviating alone from `joint`.
    pub fn deviation_gain(&self, joint: (usize, usize)) -> f64 {
        let (i, j) = joint;
        let (ur, uc) = self.payoffs[i][j];
        let row_best = (0..self.row_actions.len())
            .map(|a| self.payoffs[a][j].0)
            .fold(f64::NEG_INFINITY, f64::max);
        let col_best = (0..self.col_actions.len())
            .map(|b| self.payoffs[i][b].1)
            .fold(f64::NEG_INFINITY, f64::max);
        (row_best - ur).max(col_best - uc)
    }

    pub fn is_nash(&self, joint: (usize, usize)) -> bool {
        self.deviation_gain(joint) <= 0.0
    }
}

/// All pure-strategy Nash equilibria, in row-major order.
pub fn pure_nash_matrix(game: &MatrixGame) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..game.row_actions.len() {
        for j in 0..game.col_actions.len() {
            if game.is_nash((i, j)) {
                out.push((i, j));
            }
        }
    }
    out
}
