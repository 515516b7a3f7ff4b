//! Fixed-step closed-loop runner.
//!
//! Each step advances the plant by classical RK4 with the PTO coefficients
//! held, then feeds the instantaneous power through the performance pipeline
//! and steps the controller once.

use serde::{Deserialize, Serialize};

use crate::controllers::{ExtremumSeeker, SchemeConfig};
use crate::error::{config_err, Error, Result};
use crate::plants::{Plant, PowerDef, PtoLaw};
use crate::signals::{PerfPipeline, PipelineConfig};
use crate::waves::{Excitation, ExcitationGrid};

/// Which PTO coefficients the controller drives, in channel order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuned {
    #[default]
    K,
    C,
    #[serde(rename = "kc")]
    KC,
}

impl Tuned {
    pub fn channels(self) -> usize {
        match self {
            Tuned::K | Tuned::C => 1,
            Tuned::KC => 2,
        }
    }

    fn theta0(self, k: f64, c: f64) -> Vec<f64> {
        match self {
            Tuned::K => vec![k],
            Tuned::C => vec![c],
            Tuned::KC => vec![k, c],
        }
    }

    fn apply(self, theta: &[f64], fixed_k: f64, fixed_c: f64) -> (f64, f64) {
        match self {
            Tuned::K => (theta[0], fixed_c),
            Tuned::C => (fixed_k, theta[0]),
            Tuned::KC => (theta[0], theta[1]),
        }
    }
}

/// Excitation active from `start` until the next segment begins.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub excitation: Excitation,
    /// Wave (or peak) period, used for averaging windows.
    pub period: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub plant: Plant,
    /// Initial (or fixed) PTO coefficients.
    pub k0: f64,
    pub c0: f64,
    pub power: PowerDef,
    pub tuned: Tuned,
    /// `None` runs with the PTO fixed at `(k0, c0)`.
    pub controller: Option<SchemeConfig>,
    pub pipeline: PipelineConfig,
    pub schedule: Vec<Segment>,
    pub dt: f64,
    pub t_end: f64,
    pub warmup: f64,
    /// Record every n-th step.
    pub decimation: usize,
    /// Initial plant state; zeros when empty.
    pub initial_state: Vec<f64>,
    /// Parameter-rate guard as a fraction of `omega * |theta|`.
    pub rate_guard: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.pipeline.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(config_err("run.dt must be > 0"));
        }
        if !(self.t_end > self.warmup && self.warmup >= 0.0) {
            return Err(config_err(format!(
                "run.t_end ({}) must exceed run.warmup ({})",
                self.t_end, self.warmup
            )));
        }
        if self.decimation == 0 {
            return Err(config_err("run.decimation must be >= 1"));
        }
        if self.schedule.is_empty() {
            return Err(config_err("schedule needs at least one segment"));
        }
        if self.schedule[0].start > 0.0 {
            return Err(config_err("schedule must start at t = 0"));
        }
        if self.schedule.windows(2).any(|w| w[1].start <= w[0].start) {
            return Err(config_err("schedule times must be strictly increasing"));
        }
        if self.schedule.iter().any(|s| !(s.period > 0.0)) {
            return Err(config_err("schedule periods must be > 0"));
        }
        if !self.initial_state.is_empty() && self.initial_state.len() != self.plant.dim() {
            return Err(config_err(format!(
                "initial state has {} entries, plant has {}",
                self.initial_state.len(),
                self.plant.dim()
            )));
        }
        if !(self.k0.is_finite() && self.c0.is_finite()) {
            return Err(config_err("initial PTO coefficients must be finite"));
        }
        // catch controller misconfiguration before any integration
        if let Some(cfg) = &self.controller {
            cfg.build(&self.tuned.theta0(self.k0, self.c0), self.warmup, self.dt)?;
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Decimated time series of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    pub k: Vec<f64>,
    pub c: Vec<f64>,
    /// PTO power averaged over the steps since the previous row.
    pub p: Vec<f64>,
    pub mu: Vec<f64>,
    pub j: Vec<f64>,
    /// Controller estimate without dither, sampled with the rows above.
    /// Not part of the CSV, so empty for records read back from disk.
    pub k_est: Vec<f64>,
    pub c_est: Vec<f64>,
    /// Time between records.
    pub sample_dt: f64,
    pub warmup: f64,
    /// `(start, period)` per schedule segment.
    pub segments: Vec<(f64, f64)>,
    /// Steps on which the parameter rate guard fired.
    pub rate_violations: usize,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Period of the last schedule segment.
    pub fn final_period(&self) -> f64 {
        self.segments.last().map_or(f64::NAN, |s| s.1)
    }

    /// Index range of the trailing `span` seconds, checked against warmup.
    pub fn trailing(&self, span: f64) -> Result<std::ops::Range<usize>> {
        self.window(self.t.last().copied().unwrap_or(0.0), span)
    }

    /// Index range of the `span` seconds ending at record time `end`.
    pub fn window(&self, end: f64, span: f64) -> Result<std::ops::Range<usize>> {
        let count = (span / self.sample_dt).round() as usize;
        let stop = self.t.partition_point(|&t| t <= end + 0.5 * self.sample_dt);
        let after_warmup = self.t[..stop]
            .iter()
            .rev()
            .take_while(|&&t| t > self.warmup)
            .count();
        if count == 0 || count > after_warmup {
            return Err(Error::InsufficientSpan {
                requested: span,
                available: after_warmup as f64 * self.sample_dt,
            });
        }
        Ok(stop - count..stop)
    }

    pub fn mean_over(series: &[f64], range: std::ops::Range<usize>) -> f64 {
        let n = range.len() as f64;
        series[range].iter().sum::<f64>() / n
    }
}

/// Mean `(K, C)` over the trailing `periods` final-segment periods.
pub fn time_avg_params(rec: &RunRecord, periods: f64) -> Result<(f64, f64)> {
    let r = rec.trailing(periods * rec.final_period())?;
    Ok((
        RunRecord::mean_over(&rec.k, r.clone()),
        RunRecord::mean_over(&rec.c, r),
    ))
}

/// Mean power over the trailing `periods` final-segment periods.
pub fn mean_power(rec: &RunRecord, periods: f64) -> Result<f64> {
    let r = rec.trailing(periods * rec.final_period())?;
    Ok(RunRecord::mean_over(&rec.p, r))
}

/// RMS deviation of `K` from its mean over the trailing window.
pub fn k_oscillation(rec: &RunRecord, span: f64) -> Result<f64> {
    rms_about_mean(&rec.k, rec.trailing(span)?)
}

/// Like [`k_oscillation`] but on the estimate, so a deliberate dither does
/// not count as oscillation.
pub fn k_estimate_oscillation(rec: &RunRecord, span: f64) -> Result<f64> {
    if rec.k_est.len() != rec.len() {
        return Err(config_err("record carries no estimate trace"));
    }
    rms_about_mean(&rec.k_est, rec.trailing(span)?)
}

fn rms_about_mean(v: &[f64], r: std::ops::Range<usize>) -> Result<f64> {
    let mean = RunRecord::mean_over(v, r.clone());
    let n = r.len() as f64;
    Ok((v[r].iter().map(|k| (k - mean).powi(2)).sum::<f64>() / n).sqrt())
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step(&mut self, plant: &Plant, pto: &PtoLaw, forces: [f64; 3], dt: f64, y: &mut [f64]) {
        let h = 0.5 * dt;
        plant.deriv(pto, forces[0], y, &mut self.k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h * self.k1[i];
        }
        plant.deriv(pto, forces[1], &self.tmp, &mut self.k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h * self.k2[i];
        }
        plant.deriv(pto, forces[1], &self.tmp, &mut self.k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + dt * self.k3[i];
        }
        plant.deriv(pto, forces[2], &self.tmp, &mut self.k4);
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (self.k1[i] + 2.0 * (self.k2[i] + self.k3[i]) + self.k4[i]);
        }
    }
}

pub fn run(s: &Scenario) -> Result<RunRecord> {
    s.validate()?;
    let mut controller: Option<Box<dyn ExtremumSeeker>> = match &s.controller {
        Some(cfg) => Some(cfg.build(&s.tuned.theta0(s.k0, s.c0), s.warmup, s.dt)?),
        None => None,
    };
    let n_steps = s.steps();
    let dt = s.dt;
    let mut state = if s.initial_state.is_empty() {
        vec![0.0; s.plant.dim()]
    } else {
        s.initial_state.clone()
    };
    let mut pipeline = PerfPipeline::new(&s.pipeline, dt);
    let mut rk = Rk4::new(state.len());
    let cap = n_steps / s.decimation + 1;
    let mut rec = RunRecord {
        sample_dt: dt * s.decimation as f64,
        warmup: s.warmup,
        segments: s.schedule.iter().map(|g| (g.start, g.period)).collect(),
        ..RunRecord::default()
    };
    for v in [
        &mut rec.t, &mut rec.x, &mut rec.xdot, &mut rec.k, &mut rec.c, &mut rec.p, &mut rec.mu,
        &mut rec.j, &mut rec.k_est, &mut rec.c_est,
    ] {
        v.reserve_exact(cap);
    }
    let (mut k, mut c) = (s.k0, s.c0);
    let mut seg = 0;
    let mut grid_seg = None;
    let mut grid = ExcitationGrid::new(&s.schedule[0].excitation, 0.0, 0.5 * dt);
    let mut before = Vec::new();
    let mut power_sum = 0.0;
    let mut guard_warned = false;
    for n in 0..n_steps {
        let t = n as f64 * dt;
        while seg + 1 < s.schedule.len() && t >= s.schedule[seg + 1].start {
            seg += 1;
        }
        let segment = &s.schedule[seg];
        if grid_seg != Some(seg) {
            grid = ExcitationGrid::new(&segment.excitation, t, 0.5 * dt);
            grid_seg = Some(seg);
        }
        let pto = PtoLaw::new(k, c, s.power);
        let f0 = grid.force();
        grid.advance();
        let f_half = grid.force();
        grid.advance();
        let forces = [f0, f_half, grid.force()];
        rk.step(&s.plant, &pto, forces, dt, &mut state);
        let t1 = (n + 1) as f64 * dt;
        if state.iter().any(|v| !v.is_finite() || v.abs() > 1e9) {
            return Err(Error::Diverged {
                t: t1,
                state: state.clone(),
            });
        }
        let power = pto.power(state[0], state[1]);
        let perf = pipeline.step(power, dt).map_err(|e| match e {
            Error::SignalFault { what, .. } => Error::SignalFault { what, t: t1 },
            e => e,
        })?;
        if let Some(ctl) = controller.as_mut() {
            before.clear();
            before.extend_from_slice(ctl.estimate());
            ctl.step(perf, t1, dt)?;
            let omega = 2.0 * std::f64::consts::PI / segment.period;
            let fast = before
                .iter()
                .zip(ctl.estimate())
                .any(|(a, b)| (b - a).abs() / dt > s.rate_guard * omega * a.abs().max(1e-9));
            if fast {
                rec.rate_violations += 1;
                if !guard_warned {
                    log::warn!(
                        "parameter moves faster than {:.1}% of the plant time scale at t = {t1:.3} s",
                        100.0 * s.rate_guard
                    );
                    guard_warned = true;
                }
            }
            (k, c) = s.tuned.apply(ctl.theta(), s.k0, s.c0);
        }
        power_sum += power;
        if (n + 1) % s.decimation == 0 {
            rec.t.push(t1);
            rec.x.push(state[0]);
            rec.xdot.push(state[1]);
            // coefficients that produced this sample
            rec.k.push(pto.k);
            rec.c.push(pto.c);
            // interval mean, so decimation cannot alias the 2w power ripple
            rec.p.push(power_sum / s.decimation as f64);
            power_sum = 0.0;
            rec.mu.push(perf.mu);
            rec.j.push(perf.j);
            let (ke, ce) = match controller.as_ref() {
                Some(ctl) => s.tuned.apply(ctl.estimate(), s.k0, s.c0),
                None => (k, c),
            };
            rec.k_est.push(ke);
            rec.c_est.push(ce);
        }
    }
    Ok(rec)
}
