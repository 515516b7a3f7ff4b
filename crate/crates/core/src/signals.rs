//! Performance-function pipeline and buffered least-squares gradient estimation.
//!
//! Instantaneous PTO power is turned into the performance signal in three
//! stages: a first-order low-pass filter `w_L / (s + w_L)`, a moving average
//! over the last few wave periods (the pre-log metric `mu`), and a natural
//! logarithm clamped at a small positive floor (`J`).

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower clamp for the logarithm argument, in watts.
pub const DEFAULT_LOG_FLOOR: f64 = 1e-12;

/// Pre-log metric and log-compressed performance produced at one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Performance {
    pub mu: f64,
    pub j: f64,
}

/// First-order low-pass filter discretized by the exact zero-order-hold step,
/// so it is stable for any `dt`.
#[derive(Debug, Clone)]
pub struct LowPass {
    cutoff: f64,
    state: f64,
}

impl LowPass {
    pub fn new(cutoff: f64, initial: f64) -> Self {
        Self {
            cutoff,
            state: initial,
        }
    }

    pub fn step(&mut self, input: f64, dt: f64) -> f64 {
        let alpha = -(-self.cutoff * dt).exp_m1();
        self.state += alpha * (input - self.state);
        self.state
    }

    pub fn value(&self) -> f64 {
        self.state
    }
}

/// Fixed-length moving average over the most recent samples.
#[derive(Debug, Clone)]
pub struct MovingAverage {
    buf: Vec<f64>,
    head: usize,
    filled: usize,
    sum: f64,
}

impl MovingAverage {
    pub fn new(len: usize) -> Self {
        let len = len.max(1);
        Self {
            buf: vec![0.0; len],
            head: 0,
            filled: 0,
            sum: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.buf.len()
    }

    pub fn push(&mut self, x: f64) -> f64 {
        let old = self.buf[self.head];
        self.buf[self.head] = x;
        self.head += 1;
        if self.filled < self.buf.len() {
            self.filled += 1;
            self.sum += x;
        } else {
            self.sum += x - old;
        }
        if self.head == self.buf.len() {
            self.head = 0;
            // re-sum once per cycle so the running sum cannot drift
            self.sum = self.buf[..self.filled].iter().sum();
        }
        self.mean()
    }

    pub fn mean(&self) -> f64 {
        if self.filled == 0 {
            0.0
        } else {
            self.sum / self.filled as f64
        }
    }

    pub fn window(&self) -> &[f64] {
        &self.buf[..self.filled]
    }
}

/// Settings for [`PerfPipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Low-pass cutoff `w_L` in rad/s.
    pub lpf_cutoff: f64,
    /// Moving-average window length in seconds.
    pub window: f64,
    #[serde(default = "default_log_floor")]
    pub log_floor: f64,
}

fn default_log_floor() -> f64 {
    DEFAULT_LOG_FLOOR
}

impl PipelineConfig {
    /// Two wave periods of averaging with the cutoff at one fifth of the wave
    /// frequency.
    pub fn for_wave_period(period: f64) -> Self {
        let omega = 2.0 * std::f64::consts::PI / period;
        Self {
            lpf_cutoff: omega / 5.0,
            window: 2.0 * period,
            log_floor: DEFAULT_LOG_FLOOR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lpf_cutoff > 0.0 && self.lpf_cutoff.is_finite()) {
            return Err(Error::Config("pipeline.lpf_cutoff must be > 0".into()));
        }
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(Error::Config("pipeline.window must be > 0".into()));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::Config("pipeline.log_floor must be > 0".into()));
        }
        Ok(())
    }
}

/// LPF, moving average and clamped logarithm applied to instantaneous power.
#[derive(Debug, Clone)]
pub struct PerfPipeline {
    lpf: LowPass,
    window: MovingAverage,
    log_floor: f64,
}

impl PerfPipeline {
    /// The averaging window holds `round(window / dt)` samples.
    pub fn new(config: &PipelineConfig, dt: f64) -> Self {
        let samples = (config.window / dt).round().max(1.0) as usize;
        Self {
            lpf: LowPass::new(config.lpf_cutoff, 0.0),
            window: MovingAverage::new(samples),
            log_floor: config.log_floor,
        }
    }

    pub fn window_samples(&self) -> usize {
        self.window.len()
    }

    pub fn step(&mut self, power: f64, dt: f64) -> Result<Performance> {
        if !power.is_finite() {
            return Err(Error::SignalFault {
                what: "PTO power",
                t: f64::NAN,
            });
        }
        let filtered = self.lpf.step(power, dt);
        let mu = self.window.push(filtered);
        Ok(Performance {
            mu,
            j: mu.max(self.log_floor).ln(),
        })
    }
}

/// One buffered observation: parameter vector and metric at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub theta: Vec<f64>,
    pub y: f64,
}

/// Bounded history of `(t, theta, y)` triples, newest last.
#[derive(Debug, Clone)]
pub struct SampleBuffer {
    capacity: usize,
    entries: VecDeque<Sample>,
}

impl SampleBuffer {
    pub fn new(capacity: usize) -> Self {
        let capacity = capacity.max(2);
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.entries.iter()
    }

    pub fn push(&mut self, t: f64, theta: &[f64], y: f64) -> Result<()> {
        if let Some(last) = self.entries.back() {
            if t <= last.t {
                return Err(Error::Config(format!(
                    "sample time {t} not after previous {}",
                    last.t
                )));
            }
            if last.theta.len() != theta.len() {
                return Err(Error::Config("sample dimension changed".into()));
            }
        }
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(Sample {
            t,
            theta: theta.to_vec(),
            y,
        });
        Ok(())
    }

    /// Ordinary least-squares slopes of `y` against every parameter channel,
    /// with an intercept.
    pub fn slopes(&self) -> Result<Vec<f64>> {
        if !self.is_full() {
            return Err(Error::BufferNotFull {
                len: self.len(),
                capacity: self.capacity,
            });
        }
        let dim = self.entries[0].theta.len();
        let xs: Vec<&[f64]> = self.entries.iter().map(|s| s.theta.as_slice()).collect();
        let ys: Vec<f64> = self.entries.iter().map(|s| s.y).collect();
        ols_slopes(&xs, &ys, dim)
    }
}

/// Least-squares slope of `y` against a scalar parameter, both held in the
/// same time-aligned buffer.
pub fn lsq_gradient(buffer: &SampleBuffer) -> Result<f64> {
    let slopes = buffer.slopes()?;
    match slopes.as_slice() {
        [g] => Ok(*g),
        _ => Err(Error::Config(format!(
            "scalar gradient requested from {}-channel buffer",
            slopes.len()
        ))),
    }
}

/// Slope of `ys` against `xs` for a single regressor.
pub fn lsq_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let rows: Vec<&[f64]> = xs.iter().map(std::slice::from_ref).collect();
    Ok(ols_slopes(&rows, ys, 1)?[0])
}

fn ols_slopes(xs: &[&[f64]], ys: &[f64], dim: usize) -> Result<Vec<f64>> {
    let n = ys.len() as f64;
    let mut mean_x = vec![0.0; dim];
    for row in xs {
        for (m, v) in mean_x.iter_mut().zip(row.iter()) {
            *m += v;
        }
    }
    mean_x.iter_mut().for_each(|m| *m /= n);
    let mean_y = ys.iter().sum::<f64>() / n;

    let mut sxx = nalgebra::DMatrix::<f64>::zeros(dim, dim);
    let mut sxy = nalgebra::DVector::<f64>::zeros(dim);
    for (row, &y) in xs.iter().zip(ys) {
        let dy = y - mean_y;
        for i in 0..dim {
            let di = row[i] - mean_x[i];
            sxy[i] += di * dy;
            for j in 0..=i {
                sxx[(i, j)] += di * (row[j] - mean_x[j]);
            }
        }
    }
    for i in 0..dim {
        for j in 0..i {
            sxx[(j, i)] = sxx[(i, j)];
        }
        let var = sxx[(i, i)] / n;
        let scale = mean_x[i].abs().max(f64::MIN_POSITIVE);
        if !(var.sqrt() > 1e-10 * scale) {
            return Err(Error::DegenerateBuffer);
        }
    }
    if dim > 1 {
        // near-collinear channels make the slopes meaningless
        let diag: f64 = (0..dim).map(|i| sxx[(i, i)]).product();
        if !(sxx.determinant() > 1e-9 * diag) {
            return Err(Error::DegenerateBuffer);
        }
    }
    let chol = sxx.cholesky().ok_or(Error::DegenerateBuffer)?;
    Ok(chol.solve(&sxy).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pipeline(cutoff: f64, window: f64, dt: f64) -> PerfPipeline {
        PerfPipeline::new(
            &PipelineConfig {
                lpf_cutoff: cutoff,
                window,
                log_floor: DEFAULT_LOG_FLOOR,
            },
            dt,
        )
    }

    #[test]
    fn constant_e_gives_unit_performance() {
        let dt = 1e-3;
        let mut p = pipeline(3.0, 0.5, dt);
        let mut last = Performance { mu: 0.0, j: 0.0 };
        for _ in 0..20_000 {
            last = p.step(std::f64::consts::E, dt).unwrap();
        }
        assert_relative_eq!(last.j, 1.0, epsilon = 1e-9);
    }

    /// Composite Simpson quadrature of 1 + sin over whole periods.
    fn quadrature_mean(omega: f64, periods: usize) -> f64 {
        let len = periods as f64 * 2.0 * std::f64::consts::PI / omega;
        let n = 2000;
        let h = len / n as f64;
        let f = |t: f64| 1.0 + (omega * t).sin();
        let mut acc = f(0.0) + f(len);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        acc * h / 3.0 / len
    }

    #[test]
    fn fast_sinusoid_averages_to_zero_log() {
        let omega_f = 200.0;
        assert_relative_eq!(quadrature_mean(omega_f, 4), 1.0, epsilon = 1e-10);

        let period = 2.0 * std::f64::consts::PI / omega_f;
        let dt = period / 100.0;
        let mut p = pipeline(2.0, 4.0 * period, dt);
        let mut j = f64::NAN;
        for n in 0..200_000 {
            let t = n as f64 * dt;
            j = p.step(1.0 + (omega_f * t).sin(), dt).unwrap().j;
        }
        assert!(j.abs() < 1e-3, "J = {j}");
    }

    #[test]
    fn zero_power_is_clamped() {
        let dt = 0.01;
        let mut p = pipeline(1.0, 0.1, dt);
        let out = p.step(0.0, dt).unwrap();
        assert_eq!(out.j, DEFAULT_LOG_FLOOR.ln());
        assert!(out.j.is_finite());
    }

    #[test]
    fn non_finite_power_is_a_fault() {
        let mut p = pipeline(1.0, 0.1, 0.01);
        assert!(matches!(
            p.step(f64::NAN, 0.01),
            Err(Error::SignalFault { .. })
        ));
    }

    #[test]
    fn window_length_matches_duration() {
        let p = pipeline(1.0, 2.0 * 0.5, 0.5 / 200.0);
        assert_eq!(p.window_samples(), 400);
    }

    #[test]
    fn lowpass_limits() {
        let mut fast = LowPass::new(1e9, 0.0);
        assert_eq!(fast.step(3.5, 1.0), 3.5);
        let mut frozen = LowPass::new(0.0, 2.0);
        assert_eq!(frozen.step(100.0, 1.0), 2.0);
    }

    #[test]
    fn slope_of_exact_line() {
        let mut b = SampleBuffer::new(8);
        for i in 0..8 {
            let th = (i as f64 * 0.7).sin();
            b.push(i as f64, &[th], 3.0 * th + 1.0).unwrap();
        }
        assert_relative_eq!(lsq_gradient(&b).unwrap(), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_metric_has_zero_slope() {
        let mut b = SampleBuffer::new(5);
        for i in 0..5 {
            b.push(i as f64, &[i as f64], 4.0).unwrap();
        }
        assert_eq!(lsq_gradient(&b).unwrap(), 0.0);
    }

    #[test]
    fn constant_parameter_is_degenerate() {
        let mut b = SampleBuffer::new(5);
        for i in 0..5 {
            b.push(i as f64, &[2729.0], i as f64).unwrap();
        }
        assert_eq!(lsq_gradient(&b), Err(Error::DegenerateBuffer));
    }

    #[test]
    fn gradient_refused_until_full() {
        let mut b = SampleBuffer::new(4);
        b.push(0.0, &[1.0], 1.0).unwrap();
        b.push(1.0, &[2.0], 2.0).unwrap();
        assert!(matches!(
            lsq_gradient(&b),
            Err(Error::BufferNotFull { len: 2, capacity: 4 })
        ));
    }

    #[test]
    fn buffer_rejects_non_increasing_time() {
        let mut b = SampleBuffer::new(4);
        b.push(1.0, &[1.0], 1.0).unwrap();
        assert!(b.push(1.0, &[2.0], 2.0).is_err());
    }

    #[test]
    fn two_channel_slopes() {
        let mut b = SampleBuffer::new(50);
        for i in 0..50 {
            let t = i as f64 * 0.1;
            let a = (1.0 * t).sin();
            let c = (1.414 * t).sin();
            b.push(t, &[a, c], 2.0 * a - 0.5 * c + 7.0).unwrap();
        }
        let g = b.slopes().unwrap();
        assert_relative_eq!(g[0], 2.0, max_relative = 1e-9);
        assert_relative_eq!(g[1], -0.5, max_relative = 1e-9);
    }

    #[test]
    fn collinear_channels_are_degenerate() {
        let mut b = SampleBuffer::new(10);
        for i in 0..10 {
            let a = i as f64;
            b.push(a, &[a, 2.0 * a], a).unwrap();
        }
        assert_eq!(b.slopes(), Err(Error::DegenerateBuffer));
    }

    proptest! {
        #[test]
        fn affine_slope_is_exact(
            slope in -1e3f64..1e3,
            offset in -1e3f64..1e3,
            xs in proptest::collection::vec(-50.0f64..50.0, 3..40),
        ) {
            let spread = xs.iter().cloned().fold(f64::MIN, f64::max)
                - xs.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-3);
            let ys: Vec<f64> = xs.iter().map(|x| slope * x + offset).collect();
            let g = lsq_slope(&xs, &ys).unwrap();
            let tol = 1e-9 * slope.abs().max(1.0);
            prop_assert!((g - slope).abs() <= tol, "{} vs {}", g, slope);
        }

        #[test]
        fn moving_average_ignores_order(mut xs in proptest::collection::vec(-10.0f64..10.0, 1..30)) {
            let mut a = MovingAverage::new(xs.len());
            xs.iter().for_each(|&x| { a.push(x); });
            let forward = a.mean();
            xs.reverse();
            let mut b = MovingAverage::new(xs.len());
            xs.iter().for_each(|&x| { b.push(x); });
            prop_assert!((forward - b.mean()).abs() < 1e-12);
        }

        #[test]
        fn log_metric_shifts_by_log_of_scale(
            k in 0.01f64..100.0,
            amp in proptest::collection::vec(0.1f64..5.0, 4),
        ) {
            let dt = 0.01;
            let mut base = pipeline(2.0, 0.5, dt);
            let mut scaled = pipeline(2.0, 0.5, dt);
            for n in 0..400 {
                let t = n as f64 * dt;
                let p = amp[0] + amp[1] * (amp[2] * t).sin().powi(2) + amp[3];
                let a = base.step(p, dt).unwrap();
                let b = scaled.step(k * p, dt).unwrap();
                if n >= 50 {
                    prop_assert!((b.j - a.j - k.ln()).abs() < 1e-9);
                }
            }
        }
    }
}
