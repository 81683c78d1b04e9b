//! `sweep-load`: equilibrium utility against load, large-system formula next
//! to a finite-system Monte Carlo estimate.
//!
//! Users sit at a common distance with Rayleigh fading on every antenna. A
//! finite trial draws `K = round(αN)` users and fresh random binary codes,
//! runs best-response dynamics from zero power and counts as feasible when it
//! converges with every user at the target SIR. Utilities are reported for a
//! user with the mean combined gain: each user's utility is rescaled by
//! `E[h̄] / h̄_k` before averaging.

use nalgebra::DMatrix;
use powergame::dynamics::{iterate, IterationOptions, Schedule, Status};
use powergame::games::utility_bpj;
use powergame::receivers::{large_system_gamma_bar, large_system_utility_raw};
use powergame::system::{generate_gains, ChannelModel, PathLoss, SystemParams, UserProfile};
use powergame::{EfficiencyModel, EquilibriumReport, Error, Objective, PowerGame, ReceiverKind};
use rayon::prelude::*;

use crate::equilibrium::linear_receiver;
use crate::{Result, RunOptions, Table, Value};

/// Sweeps between saturation checks. Iterates from zero power only grow, so a
/// user pinned at `P_max` below the target stays there.
const CHUNK: usize = 25;

#[derive(Debug, Clone)]
pub struct LoadSweep {
    pub alphas: Vec<f64>,
    pub receivers: Vec<ReceiverKind>,
    pub antennas: Vec<usize>,
    pub trials: usize,
    pub processing_gain: usize,
    pub distance_m: f64,
    pub system: SystemParams,
    pub efficiency: EfficiencyModel,
}

impl Default for LoadSweep {
    fn default() -> Self {
        Self {
            alphas: vec![0.1, 0.3, 0.5],
            receivers: ReceiverKind::ALL.to_vec(),
            antennas: vec![1],
            trials: 20,
            processing_gain: 256,
            distance_m: 100.0,
            system: SystemParams::default(),
            efficiency: EfficiencyModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    pub status: Status,
    pub feasible: bool,
    /// Per-user utilities rescaled to the mean combined gain.
    pub utilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadPoint {
    pub alpha: f64,
    pub receiver: ReceiverKind,
    pub antennas: usize,
    pub users: usize,
    /// `None` beyond the receiver's large-system capacity.
    pub utility_large_system: Option<f64>,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub feasible_fraction: f64,
    pub trials: Vec<TrialOutcome>,
}

impl LoadSweep {
    fn mean_combined_gain(&self, antennas: usize) -> f64 {
        antennas as f64 * PathLoss::default().mean_gain(self.distance_m)
    }

    /// Large-system utility at the load the finite system actually has.
    pub fn large_system(&self, kind: ReceiverKind, users: usize, antennas: usize) -> Result<Option<f64>> {
        let gs = self.efficiency.gamma_star()?;
        let f = self.efficiency.eval(gs)?;
        let load = users as f64 / self.processing_gain as f64;
        match large_system_gamma_bar(kind, load, antennas, gs) {
            Ok(g) => Ok(Some(large_system_utility_raw(
                self.system.common_rate_bps,
                self.mean_combined_gain(antennas),
                self.system.noise_power,
                gs,
                f,
                g,
            ))),
            Err(Error::LoadBeyondCapacity { .. }) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    pub fn trial(&self, kind: ReceiverKind, users: usize, antennas: usize, seed: u64, opts: &RunOptions) -> Result<TrialOutcome> {
        let params = SystemParams {
            rx_antennas: antennas,
            processing_gain: self.processing_gain,
            ..self.system.clone()
        };
        let templates: Vec<UserProfile> = (0..users)
            .map(|k| UserProfile::at_distance(k, self.distance_m, params.common_rate_bps))
            .collect();
        let drawn = generate_gains(seed, &templates, &params, ChannelModel::Rayleigh, PathLoss::default())?;
        let rx = match linear_receiver(kind, &drawn, params.processing_gain, params.noise_power, seed) {
            Ok(rx) => rx,
            Err(crate::CliError::Domain(Error::Singular(_))) => {
                return Ok(TrialOutcome {
                    seed,
                    status: Status::InfeasibleAllMaxPower,
                    feasible: false,
                    utilities: Vec::new(),
                })
            }
            Err(e) => return Err(e),
        };
        let rates = vec![params.common_rate_bps; users];
        let game = PowerGame::new(
            Box::new(rx),
            Objective::BitsPerJoule,
            self.efficiency.clone(),
            rates,
            params.max_power,
        )?;
        let gs = self.efficiency.gamma_star()?;
        let schedule = match kind {
            ReceiverKind::Mmse => Schedule::Jacobi,
            _ => Schedule::GaussSeidel,
        };
        let (report, feasible) = balanced_or_blocked(&game, &opts.iteration(schedule), gs, params.max_power);
        let mean_gain = self.mean_combined_gain(antennas);
        let utilities = if feasible {
            drawn
                .iter()
                .enumerate()
                .map(|(k, u)| {
                    let p = report.state.powers[(k, 0)];
                    let sir = report.state.sirs[(k, 0)];
                    utility_bpj(params.common_rate_bps, sir, p, &self.efficiency) * mean_gain / u.gains.combined(0)
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(TrialOutcome {
            seed,
            status: report.status,
            feasible,
            utilities,
        })
    }

    pub fn run(&self, opts: &RunOptions) -> Result<Vec<LoadPoint>> {
        let mut points = Vec::new();
        for &alpha in &self.alphas {
            let users = ((alpha * self.processing_gain as f64).round() as usize).max(1);
            for &kind in &self.receivers {
                for &antennas in &self.antennas {
                    let trials = (0..self.trials as u64)
                        .into_par_iter()
                        .map(|t| self.trial(kind, users, antennas, opts.seed.wrapping_add(t), opts))
                        .collect::<Result<Vec<_>>>()?;
                    points.push(summarize(
                        alpha,
                        kind,
                        antennas,
                        users,
                        self.large_system(kind, users, antennas)?,
                        trials,
                    ));
                }
            }
        }
        Ok(points)
    }
}

/// Runs dynamics from zero, stopping early once some user is stuck at
/// `P_max` below the target. The flag is true when every user reached it.
pub fn balanced_or_blocked(
    game: &PowerGame,
    opts: &IterationOptions,
    gamma_star: f64,
    max_power: f64,
) -> (EquilibriumReport, bool) {
    let k = powergame::Game::num_users(game);
    let mut powers = DMatrix::zeros(k, 1);
    let mut done = 0;
    loop {
        let chunk = IterationOptions {
            max_iters: CHUNK.min(opts.max_iters - done),
            ..*opts
        };
        let mut report = iterate(game, &powers, &chunk);
        done += report.iterations;
        report.iterations = done;
        let blocked = (0..k).any(|i| {
            report.state.powers[(i, 0)] >= max_power && report.state.sirs[(i, 0)] < gamma_star * (1.0 - 1e-9)
        });
        if report.status != Status::MaxIterations || blocked || done >= opts.max_iters {
            let feasible = report.status == Status::Converged && !blocked;
            return (report, feasible);
        }
        powers = report.state.powers.clone();
    }
}

fn summarize(
    alpha: f64,
    receiver: ReceiverKind,
    antennas: usize,
    users: usize,
    utility_large_system: Option<f64>,
    trials: Vec<TrialOutcome>,
) -> LoadPoint {
    let means: Vec<f64> = trials
        .iter()
        .filter(|t| t.feasible)
        .map(|t| t.utilities.iter().sum::<f64>() / t.utilities.len() as f64)
        .collect();
    let n = means.len() as f64;
    let (mc_mean, mc_stderr) = match means.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (means[0], f64::NAN),
        _ => {
            let mean = means.iter().sum::<f64>() / n;
            let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (mean, (var / n).sqrt())
        }
    };
    LoadPoint {
        alpha,
        receiver,
        antennas,
        users,
        utility_large_system,
        mc_mean,
        mc_stderr,
        feasible_fraction: n / trials.len().max(1) as f64,
        trials,
    }
}

pub fn table(points: &[LoadPoint]) -> Table {
    let mut t = Table::new(&[
        "alpha",
        "receiver",
        "antennas",
        "users",
        "utility_large_system",
        "utility_finite_mc_mean",
        "utility_finite_mc_stderr",
        "finite_feasible_fraction",
        "status",
    ]);
    for p in points {
        t.push(vec![
            Value::from(p.alpha),
            Value::from(p.receiver.name()),
            Value::from(p.antennas),
            Value::from(p.users),
            Value::from(p.utility_large_system.unwrap_or(f64::NAN)),
            Value::from(p.mc_mean),
            Value::from(p.mc_stderr),
            Value::from(p.feasible_fraction),
            Value::from(if p.utility_large_system.is_some() { "feasible" } else { "infeasible" }),
        ]);
    }
    t
}
