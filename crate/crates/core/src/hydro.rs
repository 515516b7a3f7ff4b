//! Hydrodynamic coefficient tables, radiation state-space fits and the
//! impedance-matching optimum.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::plants::{Radiation, GRAVITY, RHO_WATER};
use crate::waves::solve_dispersion;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coeffs {
    pub added_mass: f64,
    pub damping: f64,
    /// Excitation force per unit wave amplitude.
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HydroTable {
    omega: Vec<f64>,
    added_mass: Vec<f64>,
    damping: Vec<f64>,
    gamma: Vec<f64>,
    a_inf: f64,
    radiation: Radiation,
}

impl HydroTable {
    pub fn new(
        omega: Vec<f64>,
        added_mass: Vec<f64>,
        damping: Vec<f64>,
        gamma: Vec<f64>,
        a_inf: f64,
        radiation: Radiation,
    ) -> Result<Self> {
        let n = omega.len();
        if n == 0 {
            return Err(Error::Table("no frequency rows".into()));
        }
        if added_mass.len() != n || damping.len() != n || gamma.len() != n {
            return Err(Error::Table("columns have different lengths".into()));
        }
        if let Some(i) = (1..n).find(|&i| omega[i] <= omega[i - 1]) {
            return Err(Error::Table(format!(
                "omega not strictly increasing at row {} ({} after {})",
                i + 1,
                omega[i],
                omega[i - 1]
            )));
        }
        let all = omega.iter().chain(&added_mass).chain(&damping).chain(&gamma);
        if all.clone().any(|v| !v.is_finite()) || !a_inf.is_finite() {
            return Err(Error::Table("non-finite entry".into()));
        }
        if let Some(i) = damping.iter().position(|&b| b < 0.0) {
            return Err(Error::Table(format!(
                "negative radiation damping {} at omega = {}",
                damping[i], omega[i]
            )));
        }
        if !radiation.is_stable() {
            return Err(Error::Table("radiation state matrix is not Hurwitz".into()));
        }
        Ok(Self {
            omega,
            added_mass,
            damping,
            gamma,
            a_inf,
            radiation,
        })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn added_mass(&self) -> &[f64] {
        &self.added_mass
    }

    pub fn damping(&self) -> &[f64] {
        &self.damping
    }

    pub fn a_inf(&self) -> f64 {
        self.a_inf
    }

    pub fn radiation(&self) -> &Radiation {
        &self.radiation
    }

    pub fn range(&self) -> (f64, f64) {
        (self.omega[0], *self.omega.last().unwrap())
    }

    /// Piecewise-linear interpolation; errors outside the grid.
    pub fn interp(&self, omega: f64) -> Result<Coeffs> {
        let (min, max) = self.range();
        if !(omega >= min && omega <= max) {
            return Err(Error::OutOfRange { omega, min, max });
        }
        let i = self.omega.partition_point(|&w| w <= omega);
        if i == 0 || self.omega[i - 1] == omega {
            let j = i.saturating_sub(1);
            return Ok(Coeffs {
                added_mass: self.added_mass[j],
                damping: self.damping[j],
                gamma: self.gamma[j],
            });
        }
        let (lo, hi) = (i - 1, i);
        let s = (omega - self.omega[lo]) / (self.omega[hi] - self.omega[lo]);
        let lerp = |v: &[f64]| v[lo] + s * (v[hi] - v[lo]);
        Ok(Coeffs {
            added_mass: lerp(&self.added_mass),
            damping: lerp(&self.damping),
            gamma: lerp(&self.gamma),
        })
    }

    /// Text form: `#` header with `a_inf`, `n_r` and the radiation matrices,
    /// then rows `omega A B Gamma`.
    pub fn to_text(&self) -> String {
        let r = &self.radiation;
        let n = r.order();
        let mut s = String::new();
        let _ = writeln!(s, "# a_inf {}", self.a_inf);
        let _ = writeln!(s, "# n_r {n}");
        if n > 0 {
            let _ = writeln!(s, "# A_r");
            for i in 0..n {
                let row: Vec<String> = (0..n).map(|j| r.a[(i, j)].to_string()).collect();
                let _ = writeln!(s, "# {}", row.join(" "));
            }
            let join = |v: &DVector<f64>| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
            let _ = writeln!(s, "# B_r\n# {}", join(&r.b));
            let _ = writeln!(s, "# C_r\n# {}", join(&r.c));
        }
        let _ = writeln!(s, "# omega A B Gamma");
        for i in 0..self.omega.len() {
            let _ = writeln!(
                s,
                "{} {} {} {}",
                self.omega[i], self.added_mass[i], self.damping[i], self.gamma[i]
            );
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Table(format!("line {line}: {msg}"));
        let mut a_inf = None;
        let mut n_r = None;
        let mut block: Option<char> = None;
        let (mut a_rows, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
        let mut cols: [Vec<f64>; 4] = Default::default();
        for (k, raw) in text.lines().enumerate() {
            let line_no = k + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let nums = |s: &str| -> Result<Vec<f64>> {
                s.split_whitespace()
                    .map(|t| t.parse::<f64>().map_err(|_| bad(line_no, &format!("bad number {t:?}"))))
                    .collect()
            };
            if let Some(body) = line.strip_prefix('#') {
                let body = body.trim();
                let mut words = body.split_whitespace();
                match words.next() {
                    Some("a_inf") => {
                        a_inf = Some(nums(&body["a_inf".len()..])?.first().copied().ok_or_else(|| bad(line_no, "a_inf without value"))?);
                        block = None;
                    }
                    Some("n_r") => {
                        let v = words.next().ok_or_else(|| bad(line_no, "n_r without value"))?;
                        n_r = Some(v.parse::<usize>().map_err(|_| bad(line_no, "n_r must be an integer"))?);
                        block = None;
                    }
                    Some("A_r") => block = Some('A'),
                    Some("B_r") => block = Some('B'),
                    Some("C_r") => block = Some('C'),
                    _ => match block {
                        Some('A') if body.chars().next().is_some_and(|ch| ch == '-' || ch == '.' || ch.is_ascii_digit()) => a_rows.push(nums(body)?),
                        Some('B') if b.is_empty() => b = nums(body)?,
                        Some('C') if c.is_empty() => c = nums(body)?,
                        _ => block = None,
                    },
                }
                continue;
            }
            let v = nums(line)?;
            if v.len() != 4 {
                return Err(bad(line_no, "expected 4 columns: omega A B Gamma"));
            }
            for (col, x) in cols.iter_mut().zip(v) {
                col.push(x);
            }
        }
        let a_inf = a_inf.ok_or_else(|| Error::Table("missing `# a_inf` header".into()))?;
        let n = n_r.ok_or_else(|| Error::Table("missing `# n_r` header".into()))?;
        let radiation = if n == 0 {
            Radiation::none()
        } else {
            if a_rows.len() != n || a_rows.iter().any(|r| r.len() != n) || b.len() != n || c.len() != n {
                return Err(Error::Table(format!("radiation blocks do not match n_r = {n}")));
            }
            let flat: Vec<f64> = a_rows.into_iter().flatten().collect();
            Radiation::new(
                DMatrix::from_row_slice(n, n, &flat),
                DVector::from_vec(b),
                DVector::from_vec(c),
            )
            .map_err(|e| Error::Table(e.to_string()))?
        };
        let [w, a, bb, g] = cols;
        Self::new(w, a, bb, g, a_inf, radiation)
    }
}

/// Impedance-matched PTO for `m xddot + c xdot + k x = f0 sin(w t)`.
pub fn optimal_msd(m: f64, k: f64, omega: f64, c: f64) -> (f64, f64) {
    (omega * omega * m - k, c)
}

/// Impedance-matched PTO for a submerged body. With drag the true resistive
/// optimum lies above `B(w)`.
pub fn optimal_pa(table: &HydroTable, mass: f64, omega: f64) -> Result<(f64, f64)> {
    let co = table.interp(omega)?;
    Ok((omega * omega * (mass + co.added_mass), co.damping))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub omega: f64,
    pub added_mass: f64,
    pub damping: f64,
}

/// Body and environment needed for the excitation gain `rho g S_x exp(-k d_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Body {
    pub mass: f64,
    pub area: f64,
    pub submergence: f64,
    pub depth: f64,
}

pub const DIAMETER: f64 = 0.16;
pub const SOLID_DENSITY: f64 = 922.5;

impl Body {
    /// 2-D cylinder, per unit length.
    pub fn cylinder() -> Self {
        let r = DIAMETER / 2.0;
        Self {
            mass: 18.55,
            area: DIAMETER,
            submergence: 0.25,
            depth: 0.65,
        }
        .check_mass(SOLID_DENSITY * PI * r * r)
    }

    pub fn sphere() -> Self {
        let r = DIAMETER / 2.0;
        Self {
            mass: 1.978,
            area: PI * r * r,
            submergence: 0.25,
            depth: 0.65,
        }
        .check_mass(SOLID_DENSITY * 4.0 / 3.0 * PI * r.powi(3))
    }

    fn check_mass(self, from_density: f64) -> Self {
        debug_assert!((self.mass - from_density).abs() < 1e-3 * self.mass);
        self
    }

    pub fn excitation_gain(&self, omega: f64) -> Result<f64> {
        let k = solve_dispersion(omega, self.depth)?;
        Ok(RHO_WATER * GRAVITY * self.area * (-k * self.submergence).exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub anchors: Vec<Anchor>,
    /// Radiation order: 0, 2 or 4.
    pub order: usize,
    pub body: Body,
    /// Pins the infinite-frequency added mass instead of fitting it.
    pub a_inf: Option<f64>,
    /// Log-spaced grid `(lo, hi, nodes)`; anchors are added as extra nodes.
    pub grid: (f64, f64, usize),
}

/// Wave periods of the three regular sea states.
pub const REGULAR_PERIODS: [f64; 3] = [0.625, 0.8, 1.0];

impl FixtureSpec {
    /// Cylinder anchors inverted from the analytic optima `(3717, 9)`,
    /// `(2302, 20)` and `(1534, 21)` at the three regular periods.
    pub fn cylinder(order: usize) -> Self {
        let body = Body::cylinder();
        let anchors = REGULAR_PERIODS
            .iter()
            .zip([(3717.0, 9.0), (2302.0, 20.0), (1534.0, 21.0)])
            .map(|(&t, (k, c))| {
                let w = 2.0 * PI / t;
                Anchor {
                    omega: w,
                    added_mass: k / (w * w) - body.mass,
                    damping: c,
                }
            })
            .collect();
        Self {
            anchors,
            order,
            body,
            a_inf: None,
            grid: (1.0, 100.0, 300),
        }
    }

    /// Sphere anchor from a single map optimum `(310, 6)` at the first
    /// regular period; low confidence.
    pub fn sphere(order: usize) -> Self {
        let body = Body::sphere();
        let w = 2.0 * PI / REGULAR_PERIODS[0];
        Self {
            anchors: vec![Anchor {
                omega: w,
                added_mass: 310.0 / (w * w) - body.mass,
                damping: 6.0,
            }],
            order,
            body,
            // one anchor cannot fix A_inf; use the deep-submergence
            // potential-flow value rho V / 2
            a_inf: Some(0.5 * RHO_WATER * body.mass / SOLID_DENSITY),
            grid: (1.0, 100.0, 300),
        }
    }
}

/// Second-order radiation section `c s / (s^2 + 2 zeta w s + w^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub gain: f64,
    pub zeta: f64,
    pub omega: f64,
}

impl Section {
    fn transfer(&self, w: f64) -> Complex<f64> {
        let s = Complex::new(0.0, w);
        s * self.gain / (s * s + s * (2.0 * self.zeta * self.omega) + self.omega * self.omega)
    }
}

/// Minimum damping ratio of fitted sections; lighter sections ring for
/// long times and make the fit degenerate.
pub const MIN_ZETA: f64 = 0.2;
const FIT_TOL: f64 = 0.05;

fn unpack(p: &[f64]) -> (Vec<Section>, f64) {
    let n = (p.len() - 1) / 3;
    let sections = (0..n)
        .map(|i| Section {
            gain: p[3 * i].exp(),
            zeta: MIN_ZETA + p[3 * i + 1].exp(),
            omega: p[3 * i + 2].exp(),
        })
        .collect();
    (sections, p[p.len() - 1])
}

fn fit_residuals(p: &[f64], anchors: &[Anchor], pinned: Option<f64>) -> DVector<f64> {
    let (sections, a_inf) = unpack(p);
    let mut r = DVector::zeros(2 * anchors.len() + usize::from(pinned.is_some()));
    if let Some(a) = pinned {
        r[2 * anchors.len()] = 1e3 * (a_inf - a) / a.abs().max(1.0);
    }
    for (i, an) in anchors.iter().enumerate() {
        let h: Complex<f64> = sections.iter().map(|s| s.transfer(an.omega)).sum();
        r[2 * i] = (h.re - an.damping) / an.damping;
        let a_fit = a_inf + h.im / an.omega;
        r[2 * i + 1] = an.omega * (a_fit - an.added_mass) / an.damping;
    }
    r
}

fn levenberg_marquardt(mut p: Vec<f64>, anchors: &[Anchor], pinned: Option<f64>) -> (Vec<f64>, f64) {
    let residuals = |p: &[f64]| fit_residuals(p, anchors, pinned);
    let cost = |p: &[f64]| residuals(p).norm_squared();
    let mut f = cost(&p);
    let mut lambda = 1e-3;
    let n = p.len();
    for _ in 0..500 {
        let r = residuals(&p);
        let mut jac = DMatrix::zeros(r.len(), n);
        for j in 0..n {
            let h = 1e-6 * (1.0 + p[j].abs());
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[j] += h;
            lo[j] -= h;
            let d = (residuals(&hi) - residuals(&lo)) / (2.0 * h);
            jac.set_column(j, &d);
        }
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..30 {
            let mut m = jtj.clone();
            for j in 0..n {
                m[(j, j)] += lambda * (jtj[(j, j)] + 1e-12);
            }
            let Some(step) = m.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let ft = cost(&trial);
            if ft.is_finite() && ft < f {
                p = trial;
                f = ft;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !improved || f < 1e-24 {
            break;
        }
    }
    (p, f)
}

/// Fits `sections` passive second-order sections, and `A_inf` unless
/// pinned, to the anchors.
pub fn fit_radiation(
    anchors: &[Anchor],
    sections: usize,
    a_inf: Option<f64>,
) -> Result<(Vec<Section>, f64)> {
    if anchors.is_empty() {
        return Err(Error::InfeasibleFit("no anchors".into()));
    }
    if let Some(a) = anchors.iter().find(|a| !(a.damping > 0.0) || !(a.omega > 0.0)) {
        return Err(Error::InfeasibleFit(format!(
            "anchor at omega = {} has damping {}; a passive fit needs B > 0",
            a.omega, a.damping
        )));
    }
    let w_lo = anchors.iter().map(|a| a.omega).fold(f64::MAX, f64::min);
    let w_hi = anchors.iter().map(|a| a.omega).fold(f64::MIN, f64::max);
    let b_mean = anchors.iter().map(|a| a.damping).sum::<f64>() / anchors.len() as f64;
    let a_mean = anchors.iter().map(|a| a.added_mass).sum::<f64>() / anchors.len() as f64;
    let factors = [0.6, 1.0, 1.5];
    let zetas = [0.3, 1.0];
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut starts = Vec::new();
    match sections {
        1 => {
            for f in factors {
                for z in zetas {
                    starts.push(vec![(f * (w_lo * w_hi).sqrt(), z)]);
                }
            }
        }
        2 => {
            for f1 in factors {
                for f2 in factors {
                    for z in zetas {
                        starts.push(vec![(f1 * w_lo, z), (f2 * w_hi, z)]);
                    }
                }
            }
        }
        _ => return Err(Error::InfeasibleFit(format!("{sections} sections unsupported"))),
    }
    for start in starts {
        let mut p = Vec::new();
        for (w, z) in start {
            let gain = 2.0 * z * w * b_mean / sections as f64;
            p.extend([gain.ln(), (z - MIN_ZETA).ln(), w.ln()]);
        }
        p.push(a_inf.unwrap_or(a_mean));
        let (p, f) = levenberg_marquardt(p, anchors, a_inf);
        if best.as_ref().is_none_or(|b| f < b.1) {
            best = Some((p, f));
        }
    }
    let (p, _) = best.expect("at least one start");
    let (secs, a_inf) = unpack(&p);
    for a in anchors {
        let h: Complex<f64> = secs.iter().map(|s| s.transfer(a.omega)).sum();
        let b_err = (h.re - a.damping).abs() / a.damping;
        let target = a.omega * (a.added_mass - a_inf);
        let a_err = (h.im - target).abs() / target.abs().max(1e-12);
        if b_err > FIT_TOL || a_err > FIT_TOL {
            return Err(Error::InfeasibleFit(format!(
                "order-{} fit misses anchor at omega = {:.4} by {:.1}% (B) / {:.1}% (A)",
                2 * sections,
                a.omega,
                100.0 * b_err,
                100.0 * a_err
            )));
        }
    }
    Ok((secs, a_inf))
}

/// Block-diagonal companion realization of the sections.
pub fn realize(sections: &[Section]) -> Result<Radiation> {
    let n = 2 * sections.len();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut c = DVector::zeros(n);
    for (i, s) in sections.iter().enumerate() {
        let k = 2 * i;
        a[(k, k + 1)] = 1.0;
        a[(k + 1, k)] = -s.omega * s.omega;
        a[(k + 1, k + 1)] = -2.0 * s.zeta * s.omega;
        b[k + 1] = 1.0;
        c[k + 1] = s.gain;
    }
    Radiation::new(a, b, c)
}

fn fixture_grid(spec: &FixtureSpec) -> Vec<f64> {
    let (lo, hi, n) = spec.grid;
    let mut w: Vec<f64> = (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1).max(1) as f64))
        .chain(spec.anchors.iter().map(|a| a.omega))
        .collect();
    w.sort_by(f64::total_cmp);
    // drop grid nodes that crowd an anchor, keeping the anchor itself
    let anchors: Vec<f64> = spec.anchors.iter().map(|a| a.omega).collect();
    let mut out: Vec<f64> = Vec::with_capacity(w.len());
    for x in w {
        let is_anchor = anchors.contains(&x);
        if let Some(&last) = out.last() {
            if (x - last).abs() <= 1e-9 * x {
                if is_anchor {
                    out.pop();
                } else {
                    continue;
                }
            }
        }
        out.push(x);
    }
    out
}

/// Builds a smooth table through the anchors with a stable radiation model.
/// Order 0 gives constant-coefficient interpolation and no memory states.
pub fn synth_fixture(spec: &FixtureSpec) -> Result<HydroTable> {
    if spec.anchors.is_empty() {
        return Err(Error::InfeasibleFit("no anchors".into()));
    }
    if let Some(a) = spec.anchors.iter().find(|a| a.damping < 0.0) {
        return Err(Error::InfeasibleFit(format!(
            "negative damping {} at omega = {}",
            a.damping, a.omega
        )));
    }
    let grid = fixture_grid(spec);
    let gamma = grid
        .iter()
        .map(|&w| spec.body.excitation_gain(w))
        .collect::<Result<Vec<_>>>()?;
    match spec.order {
        0 => {
            let mut anchors = spec.anchors.clone();
            anchors.sort_by(|a, b| a.omega.total_cmp(&b.omega));
            let pick = |w: f64, f: fn(&Anchor) -> f64| -> f64 {
                let i = anchors.partition_point(|a| a.omega <= w);
                if i == 0 {
                    f(&anchors[0])
                } else if i == anchors.len() {
                    f(&anchors[i - 1])
                } else {
                    let (a, b) = (&anchors[i - 1], &anchors[i]);
                    let s = (w - a.omega) / (b.omega - a.omega);
                    f(a) + s * (f(b) - f(a))
                }
            };
            let added: Vec<f64> = grid.iter().map(|&w| pick(w, |a| a.added_mass)).collect();
            let damping: Vec<f64> = grid.iter().map(|&w| pick(w, |a| a.damping)).collect();
            let a_inf = *added.last().unwrap();
            HydroTable::new(grid, added, damping, gamma, a_inf, Radiation::none())
        }
        2 | 4 => {
            let (sections, a_inf) = fit_radiation(&spec.anchors, spec.order / 2, spec.a_inf)?;
            let radiation = realize(&sections)?;
            let mut added = Vec::with_capacity(grid.len());
            let mut damping = Vec::with_capacity(grid.len());
            for &w in &grid {
                let h = radiation.transfer(w);
                added.push(a_inf + h.im / w);
                damping.push(h.re.max(0.0));
            }
            HydroTable::new(grid, added, damping, gamma, a_inf, radiation)
        }
        n => Err(Error::InfeasibleFit(format!(
            "radiation order {n} unsupported; use 0, 2 or 4"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn flat_table(a: f64, b: f64) -> HydroTable {
        HydroTable::new(
            vec![0.5, 1.0, 2.0],
            vec![a; 3],
            vec![b; 3],
            vec![1.0; 3],
            a,
            Radiation::none(),
        )
        .unwrap()
    }

    #[test]
    fn interp_at_nodes_and_midpoint() {
        let t = HydroTable::new(
            vec![1.0, 2.0],
            vec![1.0, 3.0],
            vec![4.0, 6.0],
            vec![7.0, 9.0],
            3.0,
            Radiation::none(),
        )
        .unwrap();
        assert_eq!(t.interp(1.0).unwrap().added_mass, 1.0);
        assert_eq!(t.interp(2.0).unwrap().gamma, 9.0);
        let mid = t.interp(1.5).unwrap();
        assert_eq!(mid.added_mass, 2.0);
        assert_eq!(mid.damping, 5.0);
    }

    #[test]
    fn interp_out_of_range_names_bounds() {
        let t = flat_table(1.0, 1.0);
        match t.interp(3.0) {
            Err(Error::OutOfRange { min, max, .. }) => assert_eq!((min, max), (0.5, 2.0)),
            other => panic!("{other:?}"),
        }
        assert!(t.interp(0.1).is_err());
    }

    #[test]
    fn optimal_msd_examples() {
        let w = 2.0 * PI / 0.5;
        let (k, c) = optimal_msd(18.55, 200.0, w, 15.0);
        assert!((k - 2729.0).abs() < 0.5, "{k}");
        assert_eq!(c, 15.0);
        assert_eq!(optimal_msd(2.0, 8.0, 2.0, 1.0).0, 0.0);
        assert_relative_eq!(optimal_msd(1.0, 0.0, 2.0 * PI, 0.0).0, 39.478, max_relative = 1e-4);
    }

    #[test]
    fn optimal_pa_trivial_and_consistent_with_msd() {
        let t = flat_table(0.0, 2.5);
        assert_eq!(optimal_pa(&t, 1.0, 1.0).unwrap(), (1.0, 2.5));
        let (m, w, c) = (3.0, 1.7, 2.5);
        let (k1, c1) = optimal_pa(&t, m, w).unwrap();
        let (k2, c2) = optimal_msd(m, 0.0, w, c);
        assert_relative_eq!(k1, k2, max_relative = 1e-15);
        assert_eq!(c1, c2);
    }

    #[test]
    fn optimal_pa_is_homogeneous() {
        let t = flat_table(2.0, 1.0);
        let s = 3.5;
        let ts = flat_table(2.0 * s, 1.0);
        let (k, _) = optimal_pa(&t, 4.0, 1.3).unwrap();
        let (ks, _) = optimal_pa(&ts, 4.0 * s, 1.3).unwrap();
        assert_relative_eq!(ks, s * k, max_relative = 1e-14);
    }

    #[test]
    fn cylinder_anchor_values() {
        let spec = FixtureSpec::cylinder(4);
        let a: Vec<f64> = spec.anchors.iter().map(|a| a.added_mass).collect();
        assert_relative_eq!(a[0], 18.23, max_relative = 1e-3);
        assert_relative_eq!(a[1], 18.77, max_relative = 1e-3);
        assert_relative_eq!(a[2], 20.31, max_relative = 1e-3);
    }

    #[test]
    fn cylinder_fixture_reproduces_optima() {
        for order in [0, 4] {
            let t = synth_fixture(&FixtureSpec::cylinder(order)).unwrap();
            let (k1, c1) = optimal_pa(&t, 18.55, 2.0 * PI / 0.625).unwrap();
            let (k3, _) = optimal_pa(&t, 18.55, 2.0 * PI / 1.0).unwrap();
            let tol = 1e-6;
            assert_relative_eq!(k1, 3717.0, max_relative = tol);
            assert_relative_eq!(k3, 1534.0, max_relative = tol);
            assert_relative_eq!(c1, 9.0, max_relative = tol);
            assert_relative_eq!(t.interp(10.053).unwrap().added_mass, 18.23, max_relative = tol.max(1e-3));
        }
    }

    #[test]
    fn fitted_transfer_meets_anchors() {
        for spec in [FixtureSpec::cylinder(4), FixtureSpec::sphere(2), FixtureSpec::sphere(4)] {
            let order = spec.order;
            let t = synth_fixture(&spec).unwrap();
            let r = t.radiation();
            assert_eq!(r.order(), order);
            assert!(r.is_stable());
            for a in &spec.anchors {
                let h = r.transfer(a.omega);
                assert!((h.re - a.damping).abs() <= 0.05 * a.damping);
                let target = a.omega * (a.added_mass - t.a_inf());
                assert!((h.im - target).abs() <= 0.05 * target.abs());
            }
            assert!(t.damping().iter().all(|&b| b >= 0.0));
        }
    }

    #[test]
    fn single_section_cannot_hold_three_cylinder_anchors() {
        // best achievable worst-case error for one section is about 12%
        assert!(matches!(
            synth_fixture(&FixtureSpec::cylinder(2)),
            Err(Error::InfeasibleFit(_))
        ));
    }

    #[test]
    fn order_zero_has_no_memory() {
        let t = synth_fixture(&FixtureSpec::cylinder(0)).unwrap();
        assert_eq!(t.radiation().order(), 0);
        assert_eq!(t.radiation().transfer(7.0), Complex::new(0.0, 0.0));
        assert_eq!(t.a_inf(), *t.added_mass().last().unwrap());
    }

    #[test]
    fn sphere_fixture_matches_anchor() {
        let t = synth_fixture(&FixtureSpec::sphere(2)).unwrap();
        let (k, c) = optimal_pa(&t, 1.978, 2.0 * PI / 0.625).unwrap();
        assert_relative_eq!(k, 310.0, max_relative = 1e-3);
        assert_relative_eq!(c, 6.0, max_relative = 1e-3);
    }

    #[test]
    fn negative_damping_rejected() {
        let mut spec = FixtureSpec::cylinder(4);
        spec.anchors[1].damping = -1.0;
        assert!(matches!(synth_fixture(&spec), Err(Error::InfeasibleFit(_))));
    }

    #[test]
    fn text_round_trip() {
        let t = synth_fixture(&FixtureSpec::cylinder(4)).unwrap();
        let back = HydroTable::parse(&t.to_text()).unwrap();
        assert_eq!(back, t);
        let t0 = synth_fixture(&FixtureSpec::cylinder(0)).unwrap();
        assert_eq!(HydroTable::parse(&t0.to_text()).unwrap(), t0);
    }

    #[test]
    fn parse_rejects_non_monotone() {
        let text = "# a_inf 1\n# n_r 0\n1 1 1 1\n3 1 1 1\n2 1 1 1\n";
        let err = HydroTable::parse(text).unwrap_err();
        assert!(err.to_string().contains("strictly increasing"), "{err}");
    }
}
