//! Best-response dynamics, convergence/cycle detection and Nash checks.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// A user's best response: its new row of per-carrier powers, and whether
/// the unconstrained optimum lay above the power limit.
#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    pub row: Vec<f64>,
    pub saturated: bool,
}

/// A game in which user `k` controls row `k` of a `K × D` power matrix with
/// entries in `[0, max_power]`.
pub trait Game: Sync {
    fn num_users(&self) -> usize;

    fn num_carriers(&self) -> usize {
        1
    }

    fn max_power(&self) -> f64;

    fn best_response(&self, k: usize, powers: &DMatrix<f64>) -> BestResponse;

    /// Best responses of all users against the same profile.
    fn best_responses(&self, powers: &DMatrix<f64>) -> Vec<BestResponse> {
        (0..self.num_users())
            .map(|k| self.best_response(k, powers))
            .collect()
    }

    fn payoff(&self, k: usize, powers: &DMatrix<f64>) -> f64;

    /// Payoff of user `k` for a candidate row, others held at `powers`.
    fn deviation_payoffs(&self, k: usize, powers: &DMatrix<f64>, rows: &[Vec<f64>]) -> Vec<f64> {
        let mut trial = powers.clone();
        rows.iter()
            .map(|row| {
                for (c, &p) in row.iter().enumerate() {
                    trial[(k, c)] = p;
                }
                self.payoff(k, &trial)
            })
            .collect()
    }

    fn sirs(&self, powers: &DMatrix<f64>) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Users update in id order, each seeing the updates made before it.
    GaussSeidel,
    /// All users respond to the previous sweep's profile.
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    InfeasibleAllMaxPower,
    CycleDetected,
    MaxIterations,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::InfeasibleAllMaxPower => "infeasible-all-max-power",
            Status::CycleDetected => "cycle-detected",
            Status::MaxIterations => "max-iterations",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationOptions {
    pub schedule: Schedule,
    /// Convergence when `max |Δp| < tol · P_max` over one sweep.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self {
            schedule: Schedule::GaussSeidel,
            tol: 1e-9,
            max_iters: 100_000,
        }
    }
}

/// Consecutive all-saturated sweeps after which the profile is declared
/// infeasible.
pub const SATURATION_SWEEPS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub powers: DMatrix<f64>,
    pub sirs: DMatrix<f64>,
    pub utilities: Vec<f64>,
}

impl GameState {
    pub fn evaluate<G: Game + ?Sized>(game: &G, powers: DMatrix<f64>) -> Self {
        let sirs = game.sirs(&powers);
        let utilities = (0..game.num_users()).map(|k| game.payoff(k, &powers)).collect();
        Self {
            powers,
            sirs,
            utilities,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport {
    pub state: GameState,
    pub iterations: usize,
    pub status: Status,
    /// Set only by [`EquilibriumReport::verify`].
    pub ne_verified: bool,
    pub worst_deviation_gain: Option<f64>,
}

impl EquilibriumReport {
    pub fn verify<G: Game + ?Sized>(&mut self, game: &G, grid_size: usize, tol: f64) -> NashCheck {
        let check = verify_nash(game, &self.state.powers, grid_size, tol);
        self.ne_verified = check.verified;
        self.worst_deviation_gain = Some(check.worst_gain);
        check
    }
}

fn quantized_hash(powers: &DMatrix<f64>, quantum: f64) -> u64 {
    let mut hasher = DefaultHasher::new();
    for p in powers.iter() {
        ((p / quantum).round() as i64).hash(&mut hasher);
    }
    hasher.finish()
}

/// Runs best-response dynamics from `initial` until the powers settle, a
/// quantized profile repeats, every user stays saturated, or `max_iters`
/// sweeps have run.
pub fn iterate<G: Game + ?Sized>(game: &G, initial: &DMatrix<f64>, opts: &IterationOptions) -> EquilibriumReport {
    let p_max = game.max_power();
    let mut powers = initial.map(|p| p.clamp(0.0, p_max));
    // Quantum below the convergence threshold so a converging sequence is
    // never mistaken for a cycle.
    let quantum = (1e-12_f64).min(opts.tol * 1e-3) * p_max;
    let mut seen = HashSet::new();
    seen.insert(quantized_hash(&powers, quantum));

    let mut saturated_sweeps = 0;
    let mut status = Status::MaxIterations;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        iterations += 1;
        let previous = powers.clone();
        let mut all_saturated = game.num_users() > 0;

        match opts.schedule {
            Schedule::GaussSeidel => {
                for k in 0..game.num_users() {
                    let br = game.best_response(k, &powers);
                    all_saturated &= br.saturated;
                    for (c, p) in br.row.into_iter().enumerate() {
                        powers[(k, c)] = p.clamp(0.0, p_max);
                    }
                }
            }
            Schedule::Jacobi => {
                for (k, br) in game.best_responses(&previous).into_iter().enumerate() {
                    all_saturated &= br.saturated;
                    for (c, p) in br.row.into_iter().enumerate() {
                        powers[(k, c)] = p.clamp(0.0, p_max);
                    }
                }
            }
        }

        saturated_sweeps = if all_saturated { saturated_sweeps + 1 } else { 0 };
        let delta = powers
            .iter()
            .zip(previous.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);

        if delta < opts.tol * p_max {
            status = if all_saturated {
                Status::InfeasibleAllMaxPower
            } else {
                Status::Converged
            };
            break;
        }
        if saturated_sweeps >= SATURATION_SWEEPS {
            status = Status::InfeasibleAllMaxPower;
            break;
        }
        if !seen.insert(quantized_hash(&powers, quantum)) {
            status = Status::CycleDetected;
            break;
        }
    }

    EquilibriumReport {
        state: GameState::evaluate(game, powers),
        iterations,
        status,
        ne_verified: false,
        worst_deviation_gain: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NashCheck {
    pub verified: bool,
    /// Largest improvement any sampled unilateral deviation achieves,
    /// relative to the user's current payoff (absolute when that is zero).
    pub worst_gain: f64,
}

/// Checks the Nash condition by sampling unilateral deviations: for each
/// user, a grid of `grid_size` points per carrier over `[0, P_max]^D` plus
/// the user's own best response.
pub fn verify_nash<G: Game + ?Sized>(game: &G, powers: &DMatrix<f64>, grid_size: usize, tol: f64) -> NashCheck {
    let d = game.num_carriers();
    let p_max = game.max_power();
    let grid: Vec<f64> = match grid_size {
        0 => Vec::new(),
        1 => vec![p_max],
        n => (0..n).map(|i| p_max * i as f64 / (n - 1) as f64).collect(),
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    if !grid.is_empty() {
        let mut idx = vec![0usize; d];
        'outer: loop {
            rows.push(idx.iter().map(|&i| grid[i]).collect());
            for axis in 0..d {
                idx[axis] += 1;
                if idx[axis] < grid.len() {
                    continue 'outer;
                }
                idx[axis] = 0;
            }
            break;
        }
    }

    let mut worst = f64::NEG_INFINITY;
    for k in 0..game.num_users() {
        let current = game.payoff(k, powers);
        let mut candidates = rows.clone();
        candidates.push(game.best_response(k, powers).row);
        for u in game.deviation_payoffs(k, powers, &candidates) {
            let gain = if current.abs() > 0.0 {
                (u - current) / current.abs()
            } else {
                u - current
            };
            worst = worst.max(gain);
        }
    }
    if game.num_users() == 0 {
        worst = 0.0;
    }
    NashCheck {
        verified: worst <= tol,
        worst_gain: worst,
    }
}
