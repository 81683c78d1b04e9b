//! `equilibrium`: best-response dynamics on one scenario.

use nalgebra::DMatrix;
use powergame::dynamics::{iterate, Schedule};
use powergame::games::utility_bpj;
use powergame::receivers::{LinearReceiver, RandomSpreadingMf, SirModel};
use powergame::system::{antenna_signatures, generate_spreading, SpreadingMode, UserProfile};
use powergame::{EfficiencyModel, EquilibriumReport, Objective, PowerGame, ReceiverKind};

use crate::scenario::Scenario;
use crate::{CliError, Result, RunOptions, Table, Value};

/// Offset between the gain and spreading-code streams of one seed.
pub(crate) const SPREADING_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReceiverChoice {
    /// Matched filter with random-spreading averaged interference.
    Mf,
    /// Matched filter on drawn spreading sequences.
    MfSeq,
    De,
    Mmse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ObjectiveChoice {
    Bpj,
    Priced,
    LogPriced,
    SirCost,
}

#[derive(Debug)]
pub struct EquilibriumRun {
    pub users: Vec<UserProfile>,
    pub report: EquilibriumReport,
    pub gamma_star: f64,
    pub utilities_bpj: Vec<f64>,
}

impl EquilibriumRun {
    pub fn powers(&self) -> Vec<f64> {
        self.report.state.powers.column(0).iter().copied().collect()
    }

    pub fn sirs(&self) -> Vec<f64> {
        self.report.state.sirs.column(0).iter().copied().collect()
    }
}

/// Builds the SIR model for single-carrier users on carrier 0.
pub fn sir_model(
    receiver: ReceiverChoice,
    users: &[UserProfile],
    processing_gain: usize,
    noise: f64,
    seed: u64,
) -> Result<Box<dyn SirModel>> {
    let kind = match receiver {
        ReceiverChoice::Mf => {
            if users.iter().any(|u| u.gains.antennas() > 1) {
                return Err(CliError::Config(
                    "receiver `mf` models one antenna; use `mf-seq` for several".into(),
                ));
            }
            let gains = users.iter().map(|u| u.gains.combined(0)).collect();
            return Ok(Box::new(RandomSpreadingMf::new(gains, processing_gain, noise)));
        }
        ReceiverChoice::MfSeq => ReceiverKind::Mf,
        ReceiverChoice::De => ReceiverKind::De,
        ReceiverChoice::Mmse => ReceiverKind::Mmse,
    };
    Ok(Box::new(linear_receiver(kind, users, processing_gain, noise, seed)?))
}

/// Random binary codes drawn from `seed`. With several antennas the matched
/// filter and MMSE receiver act on the stacked signatures, while the
/// decorrelator inverts the codes per antenna and combines, which gains
/// power pooling only.
pub fn linear_receiver(
    kind: ReceiverKind,
    users: &[UserProfile],
    processing_gain: usize,
    noise: f64,
    seed: u64,
) -> Result<LinearReceiver> {
    let codes = generate_spreading(
        seed.wrapping_add(SPREADING_STREAM),
        users.len(),
        processing_gain,
        SpreadingMode::RandomBinary,
    )?;
    let (spreading, combined) = if kind == ReceiverKind::De {
        (codes, users.iter().map(|u| u.gains.combined(0)).collect())
    } else {
        antenna_signatures(&codes, users, 0, seed.wrapping_add(SPREADING_STREAM.wrapping_mul(2)))?
    };
    Ok(LinearReceiver::new(kind, combined, spreading, noise)?)
}

fn objective(choice: ObjectiveChoice, users: &[UserProfile], gamma_star: f64) -> Objective {
    let prices: Vec<f64> = users.iter().map(|u| u.pricing_factor).collect();
    let k = users.len();
    match choice {
        ObjectiveChoice::Bpj => Objective::BitsPerJoule,
        ObjectiveChoice::Priced => Objective::Priced { prices },
        ObjectiveChoice::LogPriced => Objective::LogPriced {
            weights: users.iter().map(|u| u.rate_bps).collect(),
            prices,
        },
        ObjectiveChoice::SirCost => Objective::SirCost {
            power_costs: prices,
            sir_costs: vec![1.0; k],
            targets: vec![gamma_star; k],
        },
    }
}

pub fn solve(
    scenario: &Scenario,
    receiver: ReceiverChoice,
    objective_choice: ObjectiveChoice,
    efficiency: EfficiencyModel,
    opts: &RunOptions,
) -> Result<EquilibriumRun> {
    let params = &scenario.system;
    if params.carriers != 1 {
        return Err(CliError::Config(
            "equilibrium runs single-carrier scenarios; use `multicarrier` for several carriers".into(),
        ));
    }
    let users = scenario.users(opts.seed)?;
    let gamma_star = efficiency.gamma_star()?;
    let sir = sir_model(receiver, &users, params.processing_gain, params.noise_power, opts.seed)?;
    let rates: Vec<f64> = users.iter().map(|u| u.rate_bps).collect();
    let obj = objective(objective_choice, &users, gamma_star);
    let game = PowerGame::new(sir, obj, efficiency.clone(), rates.clone(), params.max_power).map_err(|e| match e {
        powergame::Error::InvalidParameter(m) | powergame::Error::Dimension(m) => CliError::Config(m),
        other => CliError::Domain(other),
    })?;
    // The MMSE receiver factors one covariance for all users per sweep.
    let schedule = match receiver {
        ReceiverChoice::Mmse => Schedule::Jacobi,
        _ => Schedule::GaussSeidel,
    };
    let report = iterate(&game, &DMatrix::zeros(users.len(), 1), &opts.iteration(schedule));
    let utilities_bpj = (0..users.len())
        .map(|k| {
            utility_bpj(
                rates[k],
                report.state.sirs[(k, 0)],
                report.state.powers[(k, 0)],
                &efficiency,
            )
        })
        .collect();
    Ok(EquilibriumRun {
        users,
        report,
        gamma_star,
        utilities_bpj,
    })
}

pub fn table(run: &EquilibriumRun) -> Table {
    let mut t = Table::new(&["user_id", "power_w", "sir", "sir_db", "utility_bpj", "status"]);
    let status = run.report.status.to_string();
    for (k, user) in run.users.iter().enumerate() {
        let sir = run.report.state.sirs[(k, 0)];
        t.push(vec![
            Value::from(user.id),
            Value::from(run.report.state.powers[(k, 0)]),
            Value::from(sir),
            Value::from(10.0 * sir.log10()),
            Value::from(run.utilities_bpj[k]),
            Value::from(status.as_str()),
        ]);
    }
    t
}
