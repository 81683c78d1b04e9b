//! Sweep ranges given on the command line.

use std::str::FromStr;

use crate::CliError;

/// `start:stop:step`, both ends inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl LinearRange {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl FromStr for LinearRange {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let parts = parse_floats(s)?;
        let [start, stop, step] = parts[..] else {
            return Err(CliError::Config(format!("range `{s}` must be start:stop:step")));
        };
        if !(step > 0.0) || !(stop >= start) {
            return Err(CliError::Config(format!(
                "range `{s}` needs step > 0 and stop >= start"
            )));
        }
        Ok(Self { start, stop, step })
    }
}

/// `start:stop`, sampled at a fixed number of points per decade with both
/// ends included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRange {
    pub start: f64,
    pub stop: f64,
}

impl LogRange {
    pub fn values(&self, per_decade: usize) -> Vec<f64> {
        let decades = (self.stop / self.start).log10();
        let n = (decades * per_decade as f64).round().max(1.0) as usize;
        let (a, b) = (self.start.log10(), self.stop.log10());
        (0..=n)
            .map(|i| match i {
                0 => self.start,
                _ if i == n => self.stop,
                _ => 10f64.powf(a + (b - a) * i as f64 / n as f64),
            })
            .collect()
    }
}

impl FromStr for LogRange {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let parts = parse_floats(s)?;
        let [start, stop] = parts[..] else {
            return Err(CliError::Config(format!("range `{s}` must be start:stop")));
        };
        if !(start > 0.0) || !(stop > start) {
            return Err(CliError::Config(format!(
                "log range `{s}` needs 0 < start < stop"
            )));
        }
        Ok(Self { start, stop })
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(':')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Config(format!("`{p}` in range `{s}` is not a finite number")))
        })
        .collect()
}
