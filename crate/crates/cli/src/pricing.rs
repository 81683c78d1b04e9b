//! `pricing`: linear pricing of transmit power against the unpriced game.
//!
//! Every instance draws 2 to `max_users` users at uniform distances and plays
//! the matched-filter game with averaged interference. A common price
//! `c = κ · mean_k(u*_k / p*_k)` is swept over a log grid of `κ`, where `u*`
//! and `p*` are the unpriced equilibrium utilities and powers, so the grid is
//! meaningful at any power scale. A price is Pareto-improving when no user's
//! bits-per-joule utility drops and at least one rises.

use nalgebra::DMatrix;
use powergame::dynamics::{iterate, Schedule, Status};
use powergame::receivers::RandomSpreadingMf;
use powergame::system::{PathLoss, SystemParams};
use powergame::{EfficiencyModel, Objective, PowerGame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::{CliError, Result, RunOptions, Table, Value};

/// Relative margin separating a real utility change from rounding.
pub const UTILITY_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct PricingSweep {
    pub instances: usize,
    pub max_users: usize,
    pub price_factors: Vec<f64>,
    pub distance_range_m: (f64, f64),
    pub system: SystemParams,
    pub efficiency: EfficiencyModel,
}

impl Default for PricingSweep {
    fn default() -> Self {
        Self {
            instances: 10,
            max_users: 12,
            price_factors: (0..=120).map(|i| 10f64.powf(-12.0 + i as f64 / 10.0)).collect(),
            distance_range_m: (50.0, 300.0),
            system: SystemParams::default(),
            efficiency: EfficiencyModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricePoint {
    pub factor: f64,
    pub price: f64,
    pub status: Status,
    pub utilities: Vec<f64>,
    pub pareto_improving: bool,
    /// Smallest and largest `u_k / u*_k − 1` over users.
    pub min_gain: f64,
    pub max_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PricingInstance {
    pub index: usize,
    pub gains: Vec<f64>,
    pub unpriced_status: Status,
    pub unpriced_utilities: Vec<f64>,
    pub points: Vec<PricePoint>,
}

impl PricingInstance {
    pub fn has_pareto_price(&self) -> bool {
        self.points.iter().any(|p| p.pareto_improving)
    }
}

impl PricingSweep {
    fn game(&self, gains: &[f64], objective: Objective) -> Result<PowerGame> {
        let s = &self.system;
        Ok(PowerGame::new(
            Box::new(RandomSpreadingMf::new(gains.to_vec(), s.processing_gain, s.noise_power)),
            objective,
            self.efficiency.clone(),
            vec![s.common_rate_bps; gains.len()],
            s.max_power,
        )?)
    }

    pub fn instance(&self, index: usize, opts: &RunOptions) -> Result<PricingInstance> {
        if self.max_users < 2 {
            return Err(CliError::Config("pricing needs at least 2 users".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(index as u64));
        let k = rng.random_range(2..=self.max_users);
        let (lo, hi) = self.distance_range_m;
        let gains: Vec<f64> = (0..k)
            .map(|_| PathLoss::default().mean_gain(rng.random_range(lo..=hi)))
            .collect();

        let unpriced = self.game(&gains, Objective::BitsPerJoule)?;
        let zero = DMatrix::zeros(k, 1);
        let base = iterate(&unpriced, &zero, &opts.iteration(Schedule::GaussSeidel));
        let p_star: Vec<f64> = base.state.powers.iter().copied().collect();
        let u_star = base.state.utilities.clone();
        let p_scale = p_star.iter().cloned().fold(0.0, f64::max);
        let it = powergame::dynamics::IterationOptions {
            tol: opts.tol * p_scale / self.system.max_power,
            ..opts.iteration(Schedule::GaussSeidel)
        };
        let marginal = u_star.iter().zip(&p_star).map(|(u, p)| u / p).sum::<f64>() / k as f64;

        let mut points = Vec::with_capacity(self.price_factors.len());
        for &factor in &self.price_factors {
            let price = factor * marginal;
            let priced = self.game(&gains, Objective::Priced { prices: vec![price; k] })?;
            let report = iterate(&priced, &zero, &it);
            let utilities = unpriced.bpj_utilities(&report.state.powers.iter().copied().collect::<Vec<_>>());
            let rel: Vec<f64> = utilities.iter().zip(&u_star).map(|(u, u0)| u / u0 - 1.0).collect();
            let min_gain = rel.iter().cloned().fold(f64::INFINITY, f64::min);
            let max_gain = rel.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            points.push(PricePoint {
                factor,
                price,
                status: report.status,
                pareto_improving: report.status == Status::Converged
                    && min_gain >= -UTILITY_MARGIN
                    && max_gain > UTILITY_MARGIN,
                utilities,
                min_gain,
                max_gain,
            });
        }
        Ok(PricingInstance {
            index,
            gains,
            unpriced_status: base.status,
            unpriced_utilities: u_star,
            points,
        })
    }

    pub fn run(&self, opts: &RunOptions) -> Result<Vec<PricingInstance>> {
        (0..self.instances)
            .into_par_iter()
            .map(|i| self.instance(i, opts))
            .collect()
    }
}

pub fn table(instances: &[PricingInstance]) -> Table {
    let mut t = Table::new(&[
        "instance",
        "K",
        "price_factor",
        "price",
        "status",
        "pareto_improving",
        "min_relative_gain",
        "max_relative_gain",
    ]);
    for inst in instances {
        for p in &inst.points {
            t.push(vec![
                Value::from(inst.index),
                Value::from(inst.gains.len()),
                Value::from(p.factor),
                Value::from(p.price),
                Value::from(p.status.to_string()),
                Value::from(p.pareto_improving),
                Value::from(p.min_gain),
                Value::from(p.max_gain),
            ]);
        }
    }
    t
}
