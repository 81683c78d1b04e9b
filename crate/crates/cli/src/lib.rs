//! Experiment runner for the power control games in `powergame`.
//!
//! Each subcommand of the `powergame` binary is a function here that returns
//! a [`Table`]; the binary only parses flags and writes the table out.

pub mod delay;
pub mod equilibrium;
pub mod load;
pub mod multicarrier;
pub mod output;
pub mod pricing;
pub mod range;
pub mod scenario;

use powergame::dynamics::{IterationOptions, Schedule};
use powergame::EfficiencyModel;

pub use output::{Format, Table, Value};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Domain(#[from] powergame::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 1 for bad input, 2 for a well-formed request the model cannot satisfy.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Domain(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub seed: u64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        let it = IterationOptions::default();
        Self {
            seed: 1,
            tol: it.tol,
            max_iters: it.max_iters,
        }
    }
}

impl RunOptions {
    pub fn iteration(&self, schedule: Schedule) -> IterationOptions {
        IterationOptions {
            schedule,
            tol: self.tol,
            max_iters: self.max_iters,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(CliError::Config(format!("--tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(CliError::Config("--max-iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Output of `gamma-star`.
pub fn gamma_star_table(packet_size_bits: u32) -> Result<Table> {
    let model = EfficiencyModel::exp_m(packet_size_bits).map_err(|e| CliError::Config(e.to_string()))?;
    let gs = model.gamma_star()?;
    let mut t = Table::new(&["packet_size", "gamma_star", "gamma_star_db", "f_gamma_star"]);
    t.push(vec![
        Value::Int(i64::from(packet_size_bits)),
        Value::Float(gs),
        Value::Float(10.0 * gs.log10()),
        Value::Float(model.eval(gs)?),
    ]);
    Ok(t)
}

pub(crate) fn efficiency(packet_size_bits: u32) -> Result<EfficiencyModel> {
    EfficiencyModel::exp_m(packet_size_bits).map_err(|e| CliError::Config(e.to_string()))
}
