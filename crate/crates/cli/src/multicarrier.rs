//! `multicarrier`: joint carrier-and-power choice against maximizing on
//! every carrier separately.
//!
//! Users sit at a common distance with independent Rayleigh fading per
//! carrier. Trial `t` uses seed `base + t` for every user count, so runs with
//! fewer trials reproduce a prefix of larger runs.

use powergame::multicarrier::{
    independent_per_carrier_baseline, run_mc_game, total_utility, McBaseline, McOutcome, MulticarrierGame,
};
use powergame::system::{generate_gains, ChannelModel, PathLoss, SystemParams, UserProfile};
use powergame::EfficiencyModel;
use rayon::prelude::*;

use crate::{Result, RunOptions, Table, Value};
use powergame::dynamics::Schedule;

#[derive(Debug, Clone)]
pub struct McSweep {
    pub users: Vec<usize>,
    pub carriers: usize,
    pub processing_gain: usize,
    pub trials: usize,
    pub distance_m: f64,
    pub system: SystemParams,
    pub efficiency: EfficiencyModel,
}

impl Default for McSweep {
    fn default() -> Self {
        Self {
            users: (1..=16).collect(),
            carriers: 2,
            processing_gain: 128,
            trials: 20,
            distance_m: 100.0,
            system: SystemParams::default(),
            efficiency: EfficiencyModel::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct McTrial {
    pub users: usize,
    pub trial: usize,
    pub joint: McOutcome,
    pub independent: McBaseline,
    pub total_joint: f64,
    pub total_independent: f64,
    /// Per-user utilities at the joint and the independent outcome.
    pub per_user_joint: Vec<f64>,
    pub per_user_independent: Vec<f64>,
}

impl McTrial {
    pub fn converged(&self) -> bool {
        self.joint.converged() && self.independent.all_converged()
    }

    /// Users per carrier, e.g. `8/8`.
    pub fn split(&self) -> String {
        let counts: Vec<String> = self.joint.carrier_counts.iter().map(usize::to_string).collect();
        counts.join("/")
    }
}

impl McSweep {
    pub fn trial(&self, users: usize, trial: usize, opts: &RunOptions) -> Result<McTrial> {
        let params = SystemParams {
            carriers: self.carriers,
            rx_antennas: 1,
            processing_gain: self.processing_gain,
            ..self.system.clone()
        };
        let templates: Vec<UserProfile> = (0..users)
            .map(|k| UserProfile::at_distance(k, self.distance_m, params.common_rate_bps))
            .collect();
        let seed = opts.seed.wrapping_add(trial as u64);
        let drawn = generate_gains(seed, &templates, &params, ChannelModel::Rayleigh, PathLoss::default())?;
        let game = MulticarrierGame::from_users(&drawn, &params, self.efficiency.clone())?;
        let it = opts.iteration(Schedule::GaussSeidel);
        let joint = run_mc_game(&game, &it);
        let independent = independent_per_carrier_baseline(&game, &it)?;
        let per_user = |p| (0..users).map(|k| powergame::Game::payoff(&game, k, p)).collect::<Vec<f64>>();
        Ok(McTrial {
            users,
            trial,
            total_joint: total_utility(&game, &joint.report.state.powers),
            total_independent: total_utility(&game, &independent.powers),
            per_user_joint: per_user(&joint.report.state.powers),
            per_user_independent: per_user(&independent.powers),
            joint,
            independent,
        })
    }

    /// Rows ordered by user count, then trial.
    pub fn run(&self, opts: &RunOptions) -> Result<Vec<McTrial>> {
        let jobs: Vec<(usize, usize)> = self
            .users
            .iter()
            .flat_map(|&k| (0..self.trials).map(move |t| (k, t)))
            .collect();
        jobs.into_par_iter().map(|(k, t)| self.trial(k, t, opts)).collect()
    }
}

pub fn table(trials: &[McTrial]) -> Table {
    let mut t = Table::new(&[
        "K",
        "trial",
        "total_utility_joint",
        "total_utility_independent",
        "converged",
        "split",
    ]);
    for tr in trials {
        t.push(vec![
            Value::from(tr.users),
            Value::from(tr.trial),
            Value::from(tr.total_joint),
            Value::from(tr.total_independent),
            Value::from(tr.converged()),
            Value::from(tr.split()),
        ]);
    }
    t
}
