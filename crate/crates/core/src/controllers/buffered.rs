use serde::{Deserialize, Serialize};

use super::{check_channels, check_dithers, check_finite, check_positive, signum, Dither, ExtremumSeeker};
use crate::error::{config_err, Error, Result};
use crate::signals::{Performance, SampleBuffer};

/// Relay ES: moves at a fixed speed in the direction of the least-squares
/// gradient sign, using the pre-log metric `mu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelayConfig {
    /// Drive magnitude per channel (parameter units per second).
    pub drive: Vec<f64>,
    pub dither: Vec<Dither>,
    /// Time span covered by the sample buffer, in seconds.
    pub buffer_span: f64,
    /// Plant steps between buffered samples.
    #[serde(default = "one")]
    pub sample_every: usize,
}

/// LSQ ES: integrates the least-squares gradient of the log metric `J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LsqConfig {
    pub gains: Vec<f64>,
    pub dither: Vec<Dither>,
    pub buffer_span: f64,
    #[serde(default = "one")]
    pub sample_every: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone)]
enum UpdateLaw {
    Relay { drive: Vec<f64> },
    Proportional { gains: Vec<f64> },
}

/// Shared machinery of relay and LSQ ES: a dithered parameter, a buffer of
/// `(t, theta, metric)` samples and a least-squares gradient per channel.
#[derive(Debug, Clone)]
pub struct BufferedSeeker {
    law: UpdateLaw,
    dither: Vec<Dither>,
    buffer: SampleBuffer,
    sample_every: usize,
    steps: usize,
    gradient: Option<Vec<f64>>,
    estimate: Vec<f64>,
    theta: Vec<f64>,
    warmup_end: f64,
    degenerate_warned: bool,
}

impl BufferedSeeker {
    pub fn relay(config: &RelayConfig, theta0: &[f64], warmup_end: f64, dt: f64) -> Result<Self> {
        check_channels(&config.drive, theta0.len(), "drive")?;
        for &d in &config.drive {
            check_positive(d, "drive")?;
        }
        Self::new(
            UpdateLaw::Relay {
                drive: config.drive.clone(),
            },
            &config.dither,
            config.buffer_span,
            config.sample_every,
            theta0,
            warmup_end,
            dt,
        )
    }

    pub fn lsq(config: &LsqConfig, theta0: &[f64], warmup_end: f64, dt: f64) -> Result<Self> {
        check_channels(&config.gains, theta0.len(), "gains")?;
        for &g in &config.gains {
            check_positive(g, "gains")?;
        }
        Self::new(
            UpdateLaw::Proportional {
                gains: config.gains.clone(),
            },
            &config.dither,
            config.buffer_span,
            config.sample_every,
            theta0,
            warmup_end,
            dt,
        )
    }

    fn new(
        law: UpdateLaw,
        dither: &[Dither],
        span: f64,
        sample_every: usize,
        theta0: &[f64],
        warmup_end: f64,
        dt: f64,
    ) -> Result<Self> {
        check_dithers(dither, theta0.len())?;
        check_positive(span, "buffer_span")?;
        if sample_every == 0 {
            return Err(config_err("controller.sample_every must be >= 1"));
        }
        let capacity = (span / (dt * sample_every as f64)).round() as usize;
        if capacity < theta0.len() + 2 {
            return Err(config_err(format!(
                "controller.buffer_span holds only {capacity} samples"
            )));
        }
        Ok(Self {
            law,
            dither: dither.to_vec(),
            buffer: SampleBuffer::new(capacity),
            sample_every,
            steps: 0,
            gradient: None,
            estimate: theta0.to_vec(),
            theta: theta0.to_vec(),
            warmup_end,
            degenerate_warned: false,
        })
    }

    pub fn buffer(&self) -> &SampleBuffer {
        &self.buffer
    }

    pub fn gradient(&self) -> Option<&[f64]> {
        self.gradient.as_deref()
    }

    fn metric(&self, perf: Performance) -> f64 {
        match self.law {
            UpdateLaw::Relay { .. } => perf.mu,
            UpdateLaw::Proportional { .. } => perf.j,
        }
    }
}

impl ExtremumSeeker for BufferedSeeker {
    fn step(&mut self, perf: Performance, t: f64, dt: f64) -> Result<()> {
        check_finite(perf, t)?;
        self.steps += 1;
        if self.steps % self.sample_every == 0 {
            // the metric at t was produced under the parameters applied over the last step
            let y = self.metric(perf);
            self.buffer.push(t, &self.theta, y)?;
            if self.buffer.is_full() {
                match self.buffer.slopes() {
                    Ok(g) => self.gradient = Some(g),
                    Err(Error::DegenerateBuffer) => {
                        if !self.degenerate_warned {
                            log::warn!("degenerate gradient buffer at t = {t:.3} s, holding estimate");
                            self.degenerate_warned = true;
                        }
                        self.gradient = None;
                    }
                    Err(e) => return Err(e),
                }
            }
        }

        if t >= self.warmup_end {
            if let Some(g) = &self.gradient {
                match &self.law {
                    UpdateLaw::Relay { drive } => {
                        for ((est, g), d) in self.estimate.iter_mut().zip(g).zip(drive) {
                            *est += d * signum(*g) * dt;
                        }
                    }
                    UpdateLaw::Proportional { gains } => {
                        for ((est, g), k) in self.estimate.iter_mut().zip(g).zip(gains) {
                            *est += k * g * dt;
                        }
                    }
                }
            }
        }

        for ((theta, est), d) in self.theta.iter_mut().zip(&self.estimate).zip(&self.dither) {
            *theta = est + d.at(t);
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
