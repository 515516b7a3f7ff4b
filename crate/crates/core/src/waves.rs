//! Sea states and wave excitation.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::hydro::HydroTable;
use crate::plants::GRAVITY;

pub const JONSWAP_GAMMA: f64 = 3.3;

/// Wavenumber from `w^2 = g k tanh(k d)` by Newton iteration.
pub fn solve_dispersion(omega: f64, depth: f64) -> Result<f64> {
    if !(omega > 0.0 && depth > 0.0) {
        return Err(config_err(format!(
            "dispersion needs omega > 0 and depth > 0, got {omega}, {depth}"
        )));
    }
    let w2 = omega * omega;
    // start from whichever limit is closer so Newton stays monotone
    let deep = w2 / GRAVITY;
    let mut k = if deep * depth > 1.0 {
        deep
    } else {
        omega / (GRAVITY * depth).sqrt()
    };
    for _ in 0..100 {
        let th = (k * depth).tanh();
        let f = GRAVITY * k * th - w2;
        let df = GRAVITY * (th + k * depth * (1.0 - th * th));
        let step = f / df;
        k -= step;
        if step.abs() <= 1e-15 * k {
            return Ok(k);
        }
    }
    let th = (k * depth).tanh();
    if (GRAVITY * k * th - w2).abs() <= 1e-12 * w2 {
        Ok(k)
    } else {
        Err(Error::NoConvergence("dispersion solve"))
    }
}

pub fn dispersion_residual(omega: f64, k: f64, depth: f64) -> f64 {
    (omega * omega - GRAVITY * k * (k * depth).tanh()).abs()
}

fn jonswap_shape(x: f64) -> f64 {
    // x = omega / omega_p
    if x <= 0.0 {
        return 0.0;
    }
    let sigma = if x <= 1.0 { 0.07 } else { 0.09 };
    let r = (-(x - 1.0).powi(2) / (2.0 * sigma * sigma)).exp();
    x.powi(-5) * (-1.25 * x.powi(-4)).exp() * JONSWAP_GAMMA.powf(r)
}

/// Integral of the dimensionless shape over `(0, inf)`.
fn jonswap_norm() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| {
        let (lo, hi, n) = (0.1, 60.0, 200_000usize);
        let h = (hi - lo) / n as f64;
        let mut s = jonswap_shape(lo) + jonswap_shape(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * jonswap_shape(lo + i as f64 * h);
        }
        // below 0.1 the shape is below 1e-5000; above 60 it is x^-5
        s * h / 3.0 + 1.0 / (4.0 * hi.powi(4))
    })
}

/// JONSWAP spectral density (m^2 s) with the scale chosen so that
/// `4 sqrt(m0) = hs` over the whole frequency axis.
pub fn jonswap(omega: f64, peak_period: f64, hs: f64) -> f64 {
    let wp = TAU / peak_period;
    hs * hs / 16.0 / (jonswap_norm() * wp) * jonswap_shape(omega / wp)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveComponent {
    pub amplitude: f64,
    pub omega: f64,
    pub wavenumber: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SeaSpec {
    Regular {
        period: f64,
        height: f64,
    },
    Irregular {
        peak_period: f64,
        hs: f64,
        #[serde(default)]
        seed: u64,
        #[serde(default = "default_components")]
        components: usize,
        /// Frequency band as multiples of the peak frequency.
        #[serde(default = "default_band")]
        band: [f64; 2],
    },
}

fn default_components() -> usize {
    200
}

fn default_band() -> [f64; 2] {
    [0.4, 4.0]
}

impl SeaSpec {
    /// Regular period or spectral peak period.
    pub fn period(&self) -> f64 {
        match self {
            SeaSpec::Regular { period, .. } => *period,
            SeaSpec::Irregular { peak_period, .. } => *peak_period,
        }
    }

    pub fn with_seed(&self, new_seed: u64) -> SeaSpec {
        match self.clone() {
            SeaSpec::Irregular {
                peak_period,
                hs,
                components,
                band,
                ..
            } => SeaSpec::Irregular {
                peak_period,
                hs,
                seed: new_seed,
                components,
                band,
            },
            regular => regular,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeaState {
    pub spec: SeaSpec,
    pub depth: f64,
    pub components: Vec<WaveComponent>,
}

impl SeaState {
    pub fn new(spec: &SeaSpec, depth: f64) -> Result<Self> {
        let components = match *spec {
            SeaSpec::Regular { period, height } => {
                if !(period > 0.0 && height >= 0.0) {
                    return Err(config_err("sea.period must be > 0 and sea.height >= 0"));
                }
                let omega = TAU / period;
                vec![WaveComponent {
                    amplitude: height / 2.0,
                    omega,
                    wavenumber: solve_dispersion(omega, depth)?,
                    phase: 0.0,
                }]
            }
            SeaSpec::Irregular {
                peak_period,
                hs,
                seed,
                components,
                band,
            } => {
                if !(peak_period > 0.0 && hs >= 0.0) {
                    return Err(config_err("sea.peak_period must be > 0 and sea.hs >= 0"));
                }
                if components == 0 {
                    return Err(config_err("sea.components must be >= 1"));
                }
                if !(band[0] > 0.0 && band[1] > band[0]) {
                    return Err(config_err("sea.band must be increasing and positive"));
                }
                let wp = TAU / peak_period;
                let (lo, hi) = (band[0] * wp, band[1] * wp);
                let dw = (hi - lo) / components as f64;
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                (0..components)
                    .map(|i| {
                        let omega = lo + (i as f64 + 0.5) * dw;
                        let phase = rng.random::<f64>() * TAU;
                        Ok(WaveComponent {
                            amplitude: (2.0 * jonswap(omega, peak_period, hs) * dw).sqrt(),
                            omega,
                            wavenumber: solve_dispersion(omega, depth)?,
                            phase,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(Self {
            spec: spec.clone(),
            depth,
            components,
        })
    }

    /// Period after which the difference-frequency content of the sea
    /// repeats, `2 pi / dw` for an irregular sea on its uniform grid.
    pub fn repeat_period(&self) -> Option<f64> {
        match self.spec {
            SeaSpec::Regular { .. } => None,
            SeaSpec::Irregular {
                peak_period,
                components,
                band,
                ..
            } => Some(TAU * components as f64 / ((band[1] - band[0]) * TAU / peak_period)),
        }
    }

    /// `4 sqrt(sum a_i^2 / 2)`.
    pub fn significant_height(&self) -> f64 {
        4.0 * (self.components.iter().map(|c| c.amplitude * c.amplitude / 2.0).sum::<f64>()).sqrt()
    }

    /// Component table as CSV: `omega,amplitude,wavenumber,phase`.
    pub fn phases_csv(&self) -> String {
        let mut s = String::from("omega,amplitude,wavenumber,phase\n");
        for c in &self.components {
            let _ = writeln!(s, "{},{},{},{}", c.omega, c.amplitude, c.wavenumber, c.phase);
        }
        s
    }
}

/// Sum of sinusoids `sum F_i sin(w_i t + theta_i)` giving the excitation force.
#[derive(Debug, Clone, PartialEq)]
pub struct Excitation {
    /// `(force amplitude, omega, phase)`
    terms: Vec<(f64, f64, f64)>,
}

impl Excitation {
    pub fn sinusoid(amplitude: f64, omega: f64) -> Self {
        Self {
            terms: vec![(amplitude, omega, 0.0)],
        }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// Wave force using the table's excitation gain. Range errors surface here,
    /// not during stepping.
    pub fn from_sea(sea: &SeaState, table: &HydroTable) -> Result<Self> {
        let terms = sea
            .components
            .iter()
            .map(|c| {
                let gain = table.interp(c.omega)?.gamma;
                Ok((gain * c.amplitude, c.omega, c.phase))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { terms })
    }

    pub fn force(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(f, w, th)| f * (w * t + th).sin())
            .sum()
    }

    pub fn terms(&self) -> &[(f64, f64, f64)] {
        &self.terms
    }

    /// Long-run variance of the force, `sum F_i^2 / 2`.
    pub fn variance(&self) -> f64 {
        self.terms.iter().map(|t| t.0 * t.0 / 2.0).sum()
    }
}

/// Evaluates an [`Excitation`] on the uniform grid `t0 + n h` by rotating
/// each term's phasor, which avoids one `sin` per term per sample. Phasors
/// are recomputed from the closed form every `RESYNC` samples to bound drift.
#[derive(Debug, Clone)]
pub struct ExcitationGrid<'a> {
    exc: &'a Excitation,
    t0: f64,
    h: f64,
    n: u64,
    /// `(sin, cos)` of each term's phase at the current sample.
    phasors: Vec<(f64, f64)>,
    /// `(sin, cos)` of `w h`.
    steps: Vec<(f64, f64)>,
}

impl<'a> ExcitationGrid<'a> {
    const RESYNC: u64 = 512;

    pub fn new(exc: &'a Excitation, t0: f64, h: f64) -> Self {
        let steps = exc.terms.iter().map(|&(_, w, _)| (w * h).sin_cos()).collect();
        let mut grid = Self {
            exc,
            t0,
            h,
            n: 0,
            phasors: Vec::with_capacity(exc.terms.len()),
            steps,
        };
        grid.resync();
        grid
    }

    fn resync(&mut self) {
        let t = self.t0 + self.n as f64 * self.h;
        self.phasors.clear();
        self.phasors
            .extend(self.exc.terms.iter().map(|&(_, w, th)| (w * t + th).sin_cos()));
    }

    /// Force at the current sample.
    pub fn force(&self) -> f64 {
        self.exc
            .terms
            .iter()
            .zip(&self.phasors)
            .map(|(&(f, _, _), &(s, _))| f * s)
            .sum()
    }

    pub fn advance(&mut self) {
        self.n += 1;
        if self.n % Self::RESYNC == 0 {
            self.resync();
            return;
        }
        for (p, &(sh, ch)) in self.phasors.iter_mut().zip(&self.steps) {
            *p = (p.0 * ch + p.1 * sh, p.1 * ch - p.0 * sh);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn grid_matches_direct_evaluation() {
        let sea = SeaState::new(
            &SeaSpec::Irregular {
                peak_period: 0.625,
                hs: 0.01,
                seed: 3,
                components: 50,
                band: [0.4, 4.0],
            },
            0.65,
        )
        .unwrap();
        let exc = Excitation {
            terms: sea.components.iter().map(|c| (c.amplitude, c.omega, c.phase)).collect(),
        };
        let (t0, h) = (2.5, 0.3e-3);
        let mut grid = ExcitationGrid::new(&exc, t0, h);
        for n in 0..5000u64 {
            let direct = exc.force(t0 + n as f64 * h);
            assert!((grid.force() - direct).abs() < 1e-12, "n = {n}");
            grid.advance();
        }
    }

    #[test]
    fn dispersion_deep_water() {
        let k = solve_dispersion(10.053, 0.65).unwrap();
        // fixed-point oracle k = w^2 / (g tanh(k d))
        let mut kk = 10.053f64.powi(2) / GRAVITY;
        for _ in 0..200 {
            kk = 10.053f64.powi(2) / (GRAVITY * (kk * 0.65).tanh());
        }
        assert_relative_eq!(k, kk, max_relative = 1e-12);
        assert_relative_eq!(k, 10.302, max_relative = 1e-3);
        assert!(dispersion_residual(10.053, k, 0.65) <= 1e-12 * 10.053f64.powi(2));
    }

    #[test]
    fn dispersion_shallow_limit() {
        let d = 1.0;
        // target k d = 1e-3
        let k_target: f64 = 1e-3;
        let omega = (GRAVITY * k_target * (k_target * d).tanh()).sqrt();
        let k = solve_dispersion(omega, d).unwrap();
        assert_relative_eq!(k, omega / (GRAVITY * d).sqrt(), max_relative = 1e-3);
    }

    #[test]
    fn dispersion_rejects_bad_input() {
        assert!(solve_dispersion(0.0, 1.0).is_err());
        assert!(solve_dispersion(1.0, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn dispersion_residual_small(omega in 0.05f64..60.0, depth in 0.05f64..500.0) {
            let k = solve_dispersion(omega, depth).unwrap();
            prop_assert!(dispersion_residual(omega, k, depth) <= 1e-12 * omega * omega);
        }
    }

    #[test]
    fn jonswap_limits_and_peak() {
        let tp = 0.625;
        assert!(jonswap(1e-3, tp, 0.01) < 1e-300);
        assert!(jonswap(1e4, tp, 0.01) < 1e-12 * jonswap(TAU / tp, tp, 0.01));
        let (mut best, mut arg) = (0.0, 0.0);
        for i in 1..100_000 {
            let w = i as f64 * 1e-3;
            let s = jonswap(w, tp, 0.01);
            if s > best {
                best = s;
                arg = w;
            }
        }
        assert!((arg - TAU / tp).abs() <= 2e-3, "peak at {arg}");
    }

    #[test]
    fn jonswap_hs_recovery() {
        for (tp, hs) in [(0.625, 0.01), (0.8, 0.02), (1.0, 0.0075)] {
            let sea = SeaState::new(
                &SeaSpec::Irregular {
                    peak_period: tp,
                    hs,
                    seed: 1,
                    components: 200,
                    band: default_band(),
                },
                0.65,
            )
            .unwrap();
            assert_relative_eq!(sea.significant_height(), hs, max_relative = 0.01);
        }
    }

    #[test]
    fn regular_state_is_one_component() {
        let sea = SeaState::new(&SeaSpec::Regular { period: 0.625, height: 0.01 }, 0.65).unwrap();
        assert_eq!(sea.components.len(), 1);
        assert_eq!(sea.components[0].amplitude, 0.005);
        let c = sea.components[0];
        assert!(dispersion_residual(c.omega, c.wavenumber, 0.65) <= 1e-12 * c.omega * c.omega);
    }

    #[test]
    fn seeded_phases_are_deterministic() {
        let spec = SeaSpec::Irregular {
            peak_period: 0.625,
            hs: 0.01,
            seed: 42,
            components: 50,
            band: default_band(),
        };
        let a = SeaState::new(&spec, 0.65).unwrap();
        let b = SeaState::new(&spec, 0.65).unwrap();
        assert_eq!(a, b);
        let c = SeaState::new(&spec.with_seed(43), 0.65).unwrap();
        assert_ne!(a.components[0].phase, c.components[0].phase);
        assert!(a.components.iter().all(|c| (0.0..TAU).contains(&c.phase)));
        for c in &a.components {
            assert!(dispersion_residual(c.omega, c.wavenumber, 0.65) <= 1e-12 * c.omega * c.omega);
        }
    }

    #[test]
    fn sinusoid_is_periodic_and_zero_amplitude_vanishes() {
        let w = TAU / 0.625;
        let e = Excitation::sinusoid(3.0, w);
        for i in 0..100 {
            let t = i as f64 * 0.0137;
            assert!((e.force(t) - e.force(t + 0.625)).abs() <= 1e-12);
        }
        assert_eq!(Excitation::sinusoid(0.0, w).force(1.234), 0.0);
    }

    #[test]
    fn superposition_is_linear() {
        let a = Excitation {
            terms: vec![(1.0, 3.0, 0.2)],
        };
        let b = Excitation {
            terms: vec![(2.0, 5.0, 1.1)],
        };
        let ab = Excitation {
            terms: vec![(1.0, 3.0, 0.2), (2.0, 5.0, 1.1)],
        };
        for i in 0..50 {
            let t = i as f64 * 0.31;
            assert_relative_eq!(ab.force(t), a.force(t) + b.force(t), epsilon = 1e-15);
        }
    }
}
