//! `delay-qos`: user size, capacity, rate and goodput against the delay bound.
//!
//! Delays are normalized by `1/B`. Every admitted user has the same source
//! rate and delay bound, and the total goodput is the source bit rate times
//! the capacity.

use powergame::delayqos::{capacity, omega_star, user_size, QosProfile};
use powergame::EfficiencyModel;

use crate::{efficiency, CliError, Result, Table, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct DelaySweep {
    /// Normalized delays `D·B`.
    pub delays: Vec<f64>,
    pub source_rates_pps: Vec<f64>,
    pub bandwidth_hz: f64,
    pub packet_size_bits: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayRow {
    pub normalized_delay: f64,
    pub source_rate_pps: f64,
    pub size_phi: f64,
    pub capacity: usize,
    pub omega_over_b: f64,
    pub goodput_over_b: f64,
}

impl DelaySweep {
    /// Rows ordered by delay, then source rate.
    pub fn run(&self) -> Result<Vec<DelayRow>> {
        if !(self.bandwidth_hz > 0.0) {
            return Err(CliError::Config("--bandwidth must be positive".into()));
        }
        if self.source_rates_pps.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
            return Err(CliError::Config("source rates must be nonnegative".into()));
        }
        let model: EfficiencyModel = efficiency(self.packet_size_bits)?;
        let gs = model.gamma_star()?;
        let f = model.eval(gs)?;
        let m = f64::from(self.packet_size_bits);
        let mut rows = Vec::with_capacity(self.delays.len() * self.source_rates_pps.len());
        for &nd in &self.delays {
            for &lambda in &self.source_rates_pps {
                let profile = QosProfile::new(self.packet_size_bits, lambda, nd / self.bandwidth_hz)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                let omega = omega_star(&profile, f);
                let phi = user_size(omega, gs, self.bandwidth_hz);
                let k = capacity(phi);
                rows.push(DelayRow {
                    normalized_delay: nd,
                    source_rate_pps: lambda,
                    size_phi: phi,
                    capacity: k,
                    omega_over_b: omega / self.bandwidth_hz,
                    goodput_over_b: lambda * m * k as f64 / self.bandwidth_hz,
                });
            }
        }
        Ok(rows)
    }
}

pub fn table(rows: &[DelayRow]) -> Table {
    let mut t = Table::new(&[
        "normalized_delay",
        "source_rate_pps",
        "size_phi",
        "capacity_K",
        "omega_over_B",
        "total_goodput_over_B",
    ]);
    for r in rows {
        t.push(vec![
            Value::from(r.normalized_delay),
            Value::from(r.source_rate_pps),
            Value::from(r.size_phi),
            Value::from(r.capacity),
            Value::from(r.omega_over_b),
            Value::from(r.goodput_over_b),
        ]);
    }
    t
}
