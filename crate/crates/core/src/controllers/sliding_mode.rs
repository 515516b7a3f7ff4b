use serde::{Deserialize, Serialize};

use super::{check_channels, check_finite, check_positive, ExtremumSeeker};
use crate::error::Result;
use crate::signals::Performance;

/// Sliding-mode ES: the performance is forced to follow a reference `q`
/// growing at `rate`, and each parameter moves at `gain * tanh(sin(pi e / band))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlidingModeConfig {
    /// Reference growth rate, 1/s.
    pub rate: f64,
    /// Switching band, same units as J.
    pub band: f64,
    /// Parameter rate per channel.
    pub gains: Vec<f64>,
}

impl SlidingModeConfig {
    pub fn warnings(&self) -> Vec<String> {
        let ratio = self.band / self.rate;
        if (30.0..=300.0).contains(&ratio) {
            Vec::new()
        } else {
            vec![format!(
                "sliding mode band/rate ratio is {ratio:.3e}; values near 1e2 keep the parameter slow"
            )]
        }
    }
}

/// Switching nonlinearity `tanh(sin(pi e / band))`.
pub fn switching(error: f64, band: f64) -> f64 {
    (error * std::f64::consts::PI / band).sin().tanh()
}

#[derive(Debug, Clone)]
pub struct SlidingModeSeeker {
    rate: f64,
    band: f64,
    gains: Vec<f64>,
    /// One reference per channel; `None` until activation.
    reference: Option<Vec<f64>>,
    theta: Vec<f64>,
    warmup_end: f64,
}

impl SlidingModeSeeker {
    pub fn new(config: &SlidingModeConfig, theta0: &[f64], warmup_end: f64) -> Result<Self> {
        check_positive(config.rate, "rate")?;
        check_positive(config.band, "band")?;
        check_channels(&config.gains, theta0.len(), "gains")?;
        for &g in &config.gains {
            check_positive(g, "gains")?;
        }
        for w in config.warnings() {
            log::warn!("{w}");
        }
        Ok(Self {
            rate: config.rate,
            band: config.band,
            gains: config.gains.clone(),
            reference: None,
            theta: theta0.to_vec(),
            warmup_end,
        })
    }

    pub fn reference(&self) -> Option<&[f64]> {
        self.reference.as_deref()
    }
}

impl ExtremumSeeker for SlidingModeSeeker {
    fn step(&mut self, perf: Performance, t: f64, dt: f64) -> Result<()> {
        check_finite(perf, t)?;
        if t < self.warmup_end {
            return Ok(());
        }
        let band = self.band;
        // Channel i starts a quarter switching period behind channel 0 so the
        // channels do not lock onto a common direction.
        let refs = self.reference.get_or_insert_with(|| {
            (0..self.theta.len())
                .map(|i| perf.j + 0.5 * band * i as f64)
                .collect()
        });
        for ((q, theta), gain) in refs.iter_mut().zip(&mut self.theta).zip(&self.gains) {
            let xi = switching(perf.j - *q, band);
            *theta += gain * xi * dt;
            *q += self.rate * dt;
        }
        Ok(())
    }

    fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn estimate(&self) -> &[f64] {
        &self.theta
    }
}
