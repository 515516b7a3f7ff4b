use serde::{Deserialize, Serialize};

use super::{check_channels, check_dithers, check_finite, check_positive, Dither, ExtremumSeeker};
use crate::error::Result;
use crate::signals::Performance;

/// Classic perturbation-based ES: high-pass the metric, demodulate by the
/// dither carrier, low-pass, and integrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub gains: Vec<f64>,
    pub dither: Vec<Dither>,
    /// High-pass cutoff, rad/s.
    pub hpf_cutoff: f64,
    /// Low-pass cutoff of the demodulated signal, rad/s.
    pub lpf_cutoff: f64,
}

#[derive(Debug, Clone)]
pub struct PerturbationSeeker {
    gains: Vec<f64>,
    dither: Vec<Dither>,
    hpf_cutoff: f64,
    lpf_cutoff: f64,
    /// High-pass state, `None` until the first active sample.
    hp: Option<f64>,
    /// Demodulated gradient per channel.
    xi: Vec<f64>,
    estimate: Vec<f64>,
    theta: Vec<f64>,
    warmup_end: f64,
}

impl PerturbationSeeker {
    pub fn new(config: &PerturbationConfig, theta0: &[f64], warmup_end: f64) -> Result<Self> {
        check_channels(&config.gains, theta0.len(), "gains")?;
        for &g in &config.gains {
            check_positive(g, "gains")?;
        }
        check_dithers(&config.dither, theta0.len())?;
        check_positive(config.hpf_cutoff, "hpf_cutoff")?;
        check_positive(config.lpf_cutoff, "lpf_cutoff")?;
        Ok(Self {
            gains: config.gains.clone(),
            dither: config.dither.clone(),
            hpf_cutoff: config.hpf_cutoff,
            lpf_cutoff: config.lpf_cutoff,
            hp: None,
            xi: vec![0.0; theta0.len()],
            estimate: theta0.to_vec(),
            theta: theta0.to_vec(),
            warmup_end,
        })
    }

    /// Low-passed demodulated gradient per channel.
    pub fn gradient(&self) -> &[f64] {
        &self.xi
    }
}

impl ExtremumSeeker for PerturbationSeeker {
    fn step(&mut self, perf: Performance, t: f64, dt: f64) -> Result<()> {
        check_finite(perf, t)?;
        // Filters start at the end of warmup, seeded with the current J, so
        // the start-up transient of the metric never reaches the integrator.
        if t >= self.warmup_end {
            let j = perf.j;
            let eta = *self.hp.get_or_insert(j);
            let hp = j - eta;
            self.hp = Some(eta + self.hpf_cutoff * hp * dt);
            for i in 0..self.theta.len() {
                let xi = self.xi[i];
                self.xi[i] = xi + self.lpf_cutoff * (hp * self.dither[i].carrier(t) - xi) * dt;
                self.estimate[i] += self.gains[i] * xi * dt;
            }
        }
        for i in 0..self.theta.len() {
            self.theta[i] = self.estimate[i] + self.dither[i].at(t);
        }
        Ok(())
    }

    fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn estimate(&self) -> &[f64] {
        &self.estimate
    }
}
