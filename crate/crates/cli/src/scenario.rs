//! Scenario files.
//!
//! ```json
//! {
//!   "system": {"processing_gain": 128, "noise_power": 5e-16},
//!   "users": [{"distance_m": 100}, {"gains": 2.5e-10, "rate_bps": 2e4}],
//!   "seed": 7,
//!   "channel_model": "rayleigh"
//! }
//! ```
//!
//! Omitted system fields take their defaults. Each user gives a distance (its
//! gains are then drawn from the channel model) or explicit gains, either a
//! scalar or a carriers × antennas array.

use std::path::Path;

use powergame::system::{generate_gains, ChannelModel, GainMatrix, PathLoss, SystemParams, UserProfile};
use serde::Deserialize;

use crate::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub system: SystemParams,
    pub users: Vec<UserSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_channel")]
    pub channel_model: ChannelModel,
}

fn default_channel() -> ChannelModel {
    ChannelModel::PathLossOnly
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserSpec {
    pub distance_m: Option<f64>,
    pub gains: Option<GainSpec>,
    pub rate_bps: Option<f64>,
    pub arrival_rate_pps: Option<f64>,
    pub delay_bound_s: Option<f64>,
    #[serde(default)]
    pub pricing_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GainSpec {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates; errors name the source, line, column and field.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            let message = inner.to_string();
            let message = message.rsplit_once(" at line ").map_or(message.as_str(), |(m, _)| m);
            let field = e.path().to_string();
            CliError::Config(format!(
                "{origin}:{}:{}: field `{field}`: {message}",
                inner.line(),
                inner.column()
            ))
        })?;
        scenario
            .system
            .validate()
            .map_err(|e| CliError::Config(format!("{origin}: {e}")))?;
        if scenario.users.is_empty() {
            return Err(CliError::Config(format!("{origin}: field `users`: at least one user is required")));
        }
        for (i, u) in scenario.users.iter().enumerate() {
            if u.distance_m.is_none() && u.gains.is_none() {
                return Err(CliError::Config(format!(
                    "{origin}: field `users[{i}]`: needs `distance_m` or `gains`"
                )));
            }
        }
        Ok(scenario)
    }

    /// Materializes the users, drawing gains for those given by distance.
    pub fn users(&self, seed: u64) -> Result<Vec<UserProfile>> {
        let params = &self.system;
        let mut out = Vec::with_capacity(self.users.len());
        for (i, spec) in self.users.iter().enumerate() {
            let rate = spec.rate_bps.unwrap_or(params.common_rate_bps);
            let gains = match &spec.gains {
                Some(g) => gain_matrix(g, params).map_err(|e| CliError::Config(format!("users[{i}].gains: {e}")))?,
                None => GainMatrix::scalar(1.0)?,
            };
            let mut user = UserProfile::with_gains(i, gains, rate);
            user.distance_m = spec.distance_m;
            user.arrival_rate_pps = spec.arrival_rate_pps;
            user.delay_bound_s = spec.delay_bound_s;
            user.pricing_factor = spec.pricing_factor;
            user.validate().map_err(|e| CliError::Config(format!("users[{i}]: {e}")))?;
            out.push(user);
        }
        let drawn: Vec<usize> = (0..out.len()).filter(|&i| self.users[i].gains.is_none()).collect();
        if !drawn.is_empty() {
            let templates: Vec<UserProfile> = drawn.iter().map(|&i| out[i].clone()).collect();
            let filled = generate_gains(seed, &templates, params, self.channel_model, PathLoss::default())?;
            for (i, user) in drawn.into_iter().zip(filled) {
                out[i] = user;
            }
        }
        Ok(out)
    }
}

fn gain_matrix(spec: &GainSpec, params: &SystemParams) -> powergame::Result<GainMatrix> {
    let (d, m) = (params.carriers, params.rx_antennas);
    match spec {
        GainSpec::Scalar(h) => GainMatrix::new(d, m, vec![*h; d * m]),
        GainSpec::Matrix(rows) => {
            if rows.len() != d || rows.iter().any(|r| r.len() != m) {
                return Err(powergame::Error::Dimension(format!(
                    "expected {d} carriers × {m} antennas"
                )));
            }
            GainMatrix::try_from(rows.clone())
        }
    }
}
