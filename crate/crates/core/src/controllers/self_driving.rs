use serde::{Deserialize, Serialize};

use super::{check_finite, check_positive, ExtremumSeeker};
use crate::error::{config_err, Result};
use crate::signals::Performance;

/// Self-driving ES: a recursive observer estimates the performance `m1` and
/// its gradient `m2` from the parameter's own motion, and the parameter
/// follows `lambda * eta * m2`. No dither is injected. Scalar only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfDrivingConfig {
    /// Observer rate, 1/s.
    pub eta: f64,
    /// Optimizer gain.
    pub lambda: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_init")]
    pub m2_init: f64,
    #[serde(default = "default_init")]
    pub q1_init: f64,
    #[serde(default = "default_init")]
    pub q2_init: f64,
    /// Guard on the observer gain `Q2`.
    #[serde(default = "default_q2_max")]
    pub q2_max: f64,
}

fn default_sigma() -> f64 {
    1e-11
}

fn default_init() -> f64 {
    1.0
}

fn default_q2_max() -> f64 {
    1e12
}

impl SelfDrivingConfig {
    pub fn validate(&self, channels: usize) -> Result<()> {
        if channels != 1 {
            return Err(config_err(format!(
                "self-driving ES tunes a single parameter, {channels} requested"
            )));
        }
        check_positive(self.eta, "eta")?;
        check_positive(self.lambda, "lambda")?;
        check_positive(self.q2_max, "q2_max")?;
        check_positive(self.q2_init, "q2_init")?;
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(config_err("controller.sigma must be >= 0"));
        }
        // With m2 = 0 and Q1 = 0 every derivative driving theta vanishes.
        if self.m2_init == 0.0 || self.q1_init == 0.0 {
            return Err(config_err(
                "controller.m2_init and controller.q1_init must both be nonzero or the parameter never moves",
            ));
        }
        if !(self.m2_init.is_finite() && self.q1_init.is_finite()) {
            return Err(config_err("controller.m2_init and q1_init must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SelfDrivingSeeker {
    eta: f64,
    lambda: f64,
    sigma: f64,
    q2_max: f64,
    /// `None` until the first sample, then seeded with J.
    m1: Option<f64>,
    m2: f64,
    q1: f64,
    q2: f64,
    theta: [f64; 1],
    warmup_end: f64,
    clamp_warned: bool,
}

impl SelfDrivingSeeker {
    pub fn new(config: &SelfDrivingConfig, theta0: &[f64], warmup_end: f64) -> Result<Self> {
        config.validate(theta0.len())?;
        Ok(Self {
            eta: config.eta,
            lambda: config.lambda,
            sigma: config.sigma,
            q2_max: config.q2_max,
            m1: None,
            m2: config.m2_init,
            q1: config.q1_init,
            q2: config.q2_init,
            theta: [theta0[0]],
            warmup_end,
            clamp_warned: false,
        })
    }

    /// Observer state `(m1, m2, Q1, Q2)`.
    pub fn observer(&self) -> (Option<f64>, f64, f64, f64) {
        (self.m1, self.m2, self.q1, self.q2)
    }
}

impl ExtremumSeeker for SelfDrivingSeeker {
    fn step(&mut self, perf: Performance, t: f64, dt: f64) -> Result<()> {
        check_finite(perf, t)?;
        let j = perf.j;
        let eta = self.eta;
        let m1 = *self.m1.get_or_insert(j);
        let (m2, q1, q2) = (self.m2, self.q1, self.q2);
        let theta_dot = if t >= self.warmup_end {
            self.lambda * eta * m2
        } else {
            0.0
        };

        let dm1 = eta * (j - m1);
        let dm2 = eta * q1 * q2 * (j - m1 - q1 * m2) - self.sigma * eta * q2 * m2;
        let dq1 = -eta * q1 + theta_dot;
        let dq2 = eta * q2 - eta * q1 * q1 * q2 * q2 - self.sigma * eta * q2 * q2;

        self.m1 = Some(m1 + dm1 * dt);
        self.m2 = m2 + dm2 * dt;
        self.q1 = q1 + dq1 * dt;
        self.q2 = q2 + dq2 * dt;
        if self.q2.abs() > self.q2_max {
            if !self.clamp_warned {
                log::warn!("self-driving observer gain clamped at t = {t:.3} s");
                self.clamp_warned = true;
            }
            self.q2 = self.q2.clamp(-self.q2_max, self.q2_max);
        }
        self.theta[0] += theta_dot * dt;
        Ok(())
    }

    fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn estimate(&self) -> &[f64] {
        &self.theta
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::*;

    fn config(eta: f64, lambda: f64) -> SelfDrivingConfig {
        SelfDrivingConfig {
            eta,
            lambda,
            sigma: default_sigma(),
            m2_init: 1.0,
            q1_init: 1.0,
            q2_init: 1.0,
            q2_max: default_q2_max(),
        }
    }

    #[test]
    fn constant_metric_keeps_m1() {
        let mut s = SelfDrivingSeeker::new(&config(1.0, 1.0), &[0.0], 1e9).unwrap();
        for n in 1..100 {
            s.step(Performance { mu: 1.0, j: 0.7 }, n as f64 * 0.01, 0.01)
                .unwrap();
            assert_eq!(s.observer().0, Some(0.7));
        }
    }

    #[test]
    fn zero_m2_and_q1_rejected() {
        let mut c = config(1.0, 1.0);
        c.m2_init = 0.0;
        c.q1_init = 0.0;
        assert!(SelfDrivingSeeker::new(&c, &[0.0], 0.0).is_err());
    }

    #[test]
    fn zero_m2_and_q1_stalls() {
        // Bypass validation to confirm the stall the check guards against.
        let mut s = SelfDrivingSeeker::new(&config(1.0, 1.0), &[3.0], 0.0).unwrap();
        s.m2 = 0.0;
        s.q1 = 0.0;
        run_static(&mut s, |th| -(th[0] - 2.0).powi(2), 0.01, 10_000);
        assert_eq!(s.theta(), &[3.0]);
    }

    #[test]
    fn miso_rejected() {
        assert!(SelfDrivingSeeker::new(&config(1.0, 1.0), &[0.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn converges_without_oscillation() {
        for theta0 in [0.0, 4.0] {
            let mut s = SelfDrivingSeeker::new(&config(1.0, 0.5), &[theta0], 1.0).unwrap();
            let dt = 0.01;
            let hist = run_static(&mut s, |th| -(th[0] - 2.0).powi(2), dt, 200_000);
            let last = hist.last().unwrap()[0];
            assert!((last - 2.0).abs() < 0.01, "from {theta0}: {last}");
            let initial_rate = 0.5 * 1.0 * 1.0;
            let n = hist.len();
            let terminal_rate = (hist[n - 1][0] - hist[n - 2][0]).abs() / dt;
            assert!(terminal_rate < 1e-4 * initial_rate, "rate {terminal_rate}");
        }
    }
}
