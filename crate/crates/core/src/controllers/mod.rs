//! Extremum-seeking controllers.
//!
//! Every scheme is a discrete-time state machine advanced once per plant
//! step with the latest performance sample and returns the PTO coefficient
//! vector to apply over the next step. Controller ODEs use explicit Euler at
//! the plant step; their dynamics are slow by construction.

mod buffered;
mod perturbation;
mod self_driving;
mod sliding_mode;

pub use buffered::{BufferedSeeker, LsqConfig, RelayConfig};
pub use perturbation::{PerturbationConfig, PerturbationSeeker};
pub use self_driving::{SelfDrivingConfig, SelfDrivingSeeker};
pub use sliding_mode::{SlidingModeConfig, SlidingModeSeeker};

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::signals::Performance;

pub trait ExtremumSeeker: Send {
    /// Advances the controller with the performance measured at time `t`.
    fn step(&mut self, perf: Performance, t: f64, dt: f64) -> Result<()>;

    /// Parameters to apply to the plant, dither included.
    fn theta(&self) -> &[f64];

    /// Current estimate of the optimum, without dither.
    fn estimate(&self) -> &[f64];
}

/// Sinusoidal perturbation `a sin(w t)` added to one parameter channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dither {
    pub amplitude: f64,
    /// Angular frequency in rad/s.
    pub frequency: f64,
}

impl Dither {
    pub fn at(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t).sin()
    }

    pub fn carrier(&self, t: f64) -> f64 {
        (self.frequency * t).sin()
    }
}

/// The five schemes, tagged by `scheme` in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum SchemeConfig {
    SlidingMode(SlidingModeConfig),
    Relay(RelayConfig),
    Lsq(LsqConfig),
    SelfDriving(SelfDrivingConfig),
    Perturbation(PerturbationConfig),
}

impl SchemeConfig {
    pub fn name(&self) -> &'static str {
        match self {
            SchemeConfig::SlidingMode(_) => "sliding_mode",
            SchemeConfig::Relay(_) => "relay",
            SchemeConfig::Lsq(_) => "lsq",
            SchemeConfig::SelfDriving(_) => "self_driving",
            SchemeConfig::Perturbation(_) => "perturbation",
        }
    }

    /// Builds a controller for `theta0.len()` channels that stays frozen
    /// until `warmup_end`.
    pub fn build(
        &self,
        theta0: &[f64],
        warmup_end: f64,
        dt: f64,
    ) -> Result<Box<dyn ExtremumSeeker>> {
        if theta0.is_empty() {
            return Err(config_err("controller tunes no parameters"));
        }
        Ok(match self {
            SchemeConfig::SlidingMode(c) => {
                Box::new(SlidingModeSeeker::new(c, theta0, warmup_end)?)
            }
            SchemeConfig::Relay(c) => Box::new(BufferedSeeker::relay(c, theta0, warmup_end, dt)?),
            SchemeConfig::Lsq(c) => Box::new(BufferedSeeker::lsq(c, theta0, warmup_end, dt)?),
            SchemeConfig::SelfDriving(c) => {
                Box::new(SelfDrivingSeeker::new(c, theta0, warmup_end)?)
            }
            SchemeConfig::Perturbation(c) => {
                Box::new(PerturbationSeeker::new(c, theta0, warmup_end)?)
            }
        })
    }

    /// Non-fatal tuning advice, e.g. a band-to-rate ratio far from 100 for
    /// sliding mode.
    pub fn warnings(&self) -> Vec<String> {
        match self {
            SchemeConfig::SlidingMode(c) => c.warnings(),
            _ => Vec::new(),
        }
    }
}

/// Sign with an exact zero.
pub fn signum(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn check_finite(perf: Performance, t: f64) -> Result<()> {
    if perf.j.is_finite() && perf.mu.is_finite() {
        Ok(())
    } else {
        Err(Error::SignalFault {
            what: "performance metric",
            t,
        })
    }
}

pub(crate) fn check_channels<T>(values: &[T], channels: usize, key: &str) -> Result<()> {
    if values.len() == channels {
        Ok(())
    } else {
        Err(config_err(format!(
            "controller.{key} has {} entries for {channels} tuned parameter(s)",
            values.len()
        )))
    }
}

pub(crate) fn check_positive(value: f64, key: &str) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(config_err(format!("controller.{key} must be > 0, got {value}")))
    }
}

pub(crate) fn check_dithers(dithers: &[Dither], channels: usize) -> Result<()> {
    check_channels(dithers, channels, "dither")?;
    for d in dithers {
        check_positive(d.amplitude, "dither.amplitude")?;
        check_positive(d.frequency, "dither.frequency")?;
    }
    for (i, a) in dithers.iter().enumerate() {
        for b in &dithers[i + 1..] {
            if (a.frequency - b.frequency).abs() <= 1e-9 * a.frequency {
                return Err(config_err(
                    "controller.dither frequencies must differ between channels",
                ));
            }
        }
    }
    Ok(())
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signum_is_exact() {
        assert_eq!(signum(3.0), 1.0);
        assert_eq!(signum(-0.1), -1.0);
        assert_eq!(signum(0.0), 0.0);
        assert_eq!(signum(-0.0), 0.0);
    }

    #[test]
    fn equal_dither_frequencies_rejected() {
        let d = Dither {
            amplitude: 1.0,
            frequency: 0.5,
        };
        assert!(check_dithers(&[d, d], 2).is_err());
        assert!(check_dithers(&[d], 2).is_err());
        assert!(check_dithers(&[d], 1).is_ok());
    }
}
