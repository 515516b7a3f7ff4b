//! Time-domain plant models: a forced mass-spring-damper oscillator and a
//! fully submerged heaving point absorber with state-space radiation memory.
//!
//! Plant state is a flat slice `[x, xdot, zeta_r...]`; the excitation force
//! is supplied by the caller so that plants stay independent of wave
//! synthesis.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

pub const RHO_WATER: f64 = 1025.0;
pub const GRAVITY: f64 = 9.81;

/// Which power the performance metric sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerDef {
    /// `C xdot^2`, the power dissipated in the resistive element.
    #[default]
    Resistive,
    /// `(K x + C xdot) xdot`, including the reactive exchange.
    Total,
}

/// Linear PTO force `-K x - C xdot`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PtoLaw {
    pub k: f64,
    pub c: f64,
    pub power: PowerDef,
}

impl PtoLaw {
    pub fn new(k: f64, c: f64, power: PowerDef) -> Self {
        Self { k, c, power }
    }

    pub fn force(&self, x: f64, xdot: f64) -> f64 {
        -self.k * x - self.c * xdot
    }

    pub fn power(&self, x: f64, xdot: f64) -> f64 {
        match self.power {
            PowerDef::Resistive => self.c * xdot * xdot,
            PowerDef::Total => (self.k * x + self.c * xdot) * xdot,
        }
    }
}

/// `m xddot + c xdot + k x = f - K x - C xdot`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsdPlant {
    pub m: f64,
    pub c: f64,
    pub k: f64,
}

impl MsdPlant {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > 0.0 && self.m.is_finite()) {
            return Err(config_err(format!("plant.m must be > 0, got {}", self.m)));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(config_err(format!("plant.c must be >= 0, got {}", self.c)));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(config_err(format!("plant.k must be >= 0, got {}", self.k)));
        }
        Ok(())
    }

    pub fn accel(&self, pto: &PtoLaw, force: f64, x: f64, xdot: f64) -> f64 {
        (force - pto.k * x - (self.c + pto.c) * xdot - self.k * x) / self.m
    }

    /// Undamped natural frequency with the PTO spring included.
    pub fn natural_frequency(&self, k_pto: f64) -> f64 {
        ((self.k + k_pto).abs() / self.m).sqrt()
    }
}

/// Radiation memory `zeta' = A zeta + B xdot`, force `C zeta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Radiation {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

impl Radiation {
    pub fn none() -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
            c: DVector::zeros(0),
        }
    }

    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(config_err(format!(
                "radiation matrices have inconsistent sizes ({}x{}, {}, {})",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(config_err("radiation matrices contain non-finite entries"));
        }
        let r = Self { a, b, c };
        if !r.is_stable() {
            return Err(config_err("radiation state matrix is not Hurwitz"));
        }
        Ok(r)
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// All eigenvalues strictly in the left half-plane.
    pub fn is_stable(&self) -> bool {
        if self.order() == 0 {
            return true;
        }
        self.a
            .clone()
            .complex_eigenvalues()
            .iter()
            .all(|l| l.re < 0.0)
    }

    /// `C (j w I - A)^-1 B`, which equals `B(w) + j w (A(w) - A_inf)`.
    pub fn transfer(&self, omega: f64) -> Complex<f64> {
        let n = self.order();
        if n == 0 {
            return Complex::new(0.0, 0.0);
        }
        let m = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { Complex::new(0.0, omega) } else { Complex::new(0.0, 0.0) };
            d - Complex::new(self.a[(i, j)], 0.0)
        });
        let rhs = self.b.map(|v| Complex::new(v, 0.0));
        let x = m.lu().solve(&rhs).expect("stable system has no imaginary-axis poles");
        self.c
            .iter()
            .zip(x.iter())
            .map(|(c, x)| x * *c)
            .sum()
    }
}

/// Submerged heaving body:
/// `(m + A_inf) xddot = f_w - rho C_d S_x |xdot| xdot / 2 - b xdot - K x - C xdot - C_r zeta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PaPlant {
    pub mass: f64,
    pub a_inf: f64,
    pub radiation: Radiation,
    pub drag_coeff: f64,
    /// Projected area (m^2) or width per unit length (m) in 2-D.
    pub area: f64,
    pub rho: f64,
    /// Extra linear damping; zero for a radiating body.
    pub linear_damping: f64,
}

impl PaPlant {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass + self.a_inf > 0.0) {
            return Err(config_err("plant.m plus A_inf must be > 0"));
        }
        if !(self.drag_coeff >= 0.0) {
            return Err(config_err("plant.drag_coeff must be >= 0"));
        }
        if !(self.area > 0.0 && self.rho > 0.0) {
            return Err(config_err("plant.area and plant.rho must be > 0"));
        }
        if !self.radiation.is_stable() {
            return Err(config_err("radiation state matrix is not Hurwitz"));
        }
        Ok(())
    }

    pub fn drag(&self, xdot: f64) -> f64 {
        0.5 * self.rho * self.drag_coeff * self.area * xdot.abs() * xdot
    }

    /// Radiation force `C_r zeta` for the memory part of `state`.
    pub fn radiation_force(&self, state: &[f64]) -> f64 {
        self.radiation
            .c
            .iter()
            .zip(&state[2..])
            .map(|(c, z)| c * z)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plant {
    Msd(MsdPlant),
    PointAbsorber(PaPlant),
}

impl Plant {
    pub fn dim(&self) -> usize {
        match self {
            Plant::Msd(_) => 2,
            Plant::PointAbsorber(p) => 2 + p.radiation.order(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Plant::Msd(p) => p.validate(),
            Plant::PointAbsorber(p) => p.validate(),
        }
    }

    /// Writes `d state / dt` into `out`.
    pub fn deriv(&self, pto: &PtoLaw, force: f64, state: &[f64], out: &mut [f64]) {
        let (x, xdot) = (state[0], state[1]);
        out[0] = xdot;
        match self {
            Plant::Msd(p) => out[1] = p.accel(pto, force, x, xdot),
            Plant::PointAbsorber(p) => {
                let rad = p.radiation_force(state);
                out[1] = (force - p.drag(xdot) - p.linear_damping * xdot + pto.force(x, xdot) - rad)
                    / (p.mass + p.a_inf);
                let a = &p.radiation.a;
                let n = p.radiation.order();
                for i in 0..n {
                    let mut s = p.radiation.b[i] * xdot;
                    for j in 0..n {
                        s += a[(i, j)] * state[2 + j];
                    }
                    out[2 + i] = s;
                }
            }
        }
    }
}
