//! Brute-force power maps over a `(K, C)` grid.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::engine::{mean_power, run, Scenario};
use crate::error::{config_err, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub k_grid: Vec<f64>,
    pub c_grid: Vec<f64>,
    /// Trailing averaging window in final-segment periods.
    pub avg_periods: f64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}

/// Mean power per cell, row-major with `K` as the row index. Failed cells
/// are `None` with a diagnostic in `failures`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSurface {
    pub k: Vec<f64>,
    pub c: Vec<f64>,
    pub power: Vec<Option<f64>>,
    pub failures: Vec<(usize, usize, String)>,
}

impl MapSurface {
    pub fn at(&self, i: usize, j: usize) -> Option<f64> {
        self.power[i * self.c.len() + j]
    }

    /// Cell with the largest finite mean power, first in row-major order on ties.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (idx, p) in self.power.iter().enumerate() {
            if let Some(p) = *p {
                if best.is_none_or(|(_, b)| p > b) {
                    best = Some((idx, p));
                }
            }
        }
        best.map(|(idx, _)| (idx / self.c.len(), idx % self.c.len()))
    }

    /// Header row of C values, then one row per K: `K, P(K, C_1), ...`.
    /// Missing cells are written as `NaN`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("K\\C");
        for c in &self.c {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
        for (i, k) in self.k.iter().enumerate() {
            let _ = write!(s, "{k}");
            for j in 0..self.c.len() {
                match self.at(i, j) {
                    Some(p) => {
                        let _ = write!(s, ",{p}");
                    }
                    None => s.push_str(",NaN"),
                }
            }
            s.push('\n');
        }
        s
    }
}

fn check_grid(grid: &[f64], name: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(config_err(format!("map.{name} grid is empty")));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(config_err(format!("map.{name} grid must be finite and strictly increasing")));
    }
    Ok(())
}

/// Evenly spaced grid of `n` points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Runs `base` with the PTO fixed at every grid cell.
pub fn sweep(base: &Scenario, spec: &MapSpec) -> Result<MapSurface> {
    check_grid(&spec.k_grid, "k")?;
    check_grid(&spec.c_grid, "c")?;
    let period = base.schedule.last().map_or(0.0, |s| s.period);
    if base.t_end < base.warmup + spec.avg_periods * period {
        return Err(config_err(format!(
            "map horizon {} s is shorter than warmup plus {} averaging periods",
            base.t_end, spec.avg_periods
        )));
    }
    base.validate()?;
    let nc = spec.c_grid.len();
    let cells: Vec<(usize, usize)> = (0..spec.k_grid.len())
        .flat_map(|i| (0..nc).map(move |j| (i, j)))
        .collect();
    let eval = |&(i, j): &(usize, usize)| -> std::result::Result<f64, String> {
        let mut s = base.clone();
        s.controller = None;
        s.k0 = spec.k_grid[i];
        s.c0 = spec.c_grid[j];
        run(&s)
            .and_then(|rec| mean_power(&rec, spec.avg_periods))
            .map_err(|e| e.to_string())
    };
    let results: Vec<std::result::Result<f64, String>> = match spec.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| config_err(format!("worker pool: {e}")))?;
            pool.install(|| cells.par_iter().map(eval).collect())
        }
        None => cells.par_iter().map(eval).collect(),
    };
    let mut power = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (&(i, j), r) in cells.iter().zip(results) {
        match r {
            Ok(p) => power.push(Some(p)),
            Err(e) => {
                log::warn!("map cell K = {}, C = {} failed: {e}", spec.k_grid[i], spec.c_grid[j]);
                failures.push((i, j, e));
                power.push(None);
            }
        }
    }
    Ok(MapSurface {
        k: spec.k_grid.clone(),
        c: spec.c_grid.clone(),
        power,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub k: f64,
    pub c: f64,
    /// Set when the cell center is returned instead of a sub-cell optimum.
    pub warning: Option<String>,
}

/// Lagrange basis on three nodes and its first two derivatives at `x`.
fn lagrange3(nodes: [f64; 3], x: f64) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        let (a, b) = ((i + 1) % 3, (i + 2) % 3);
        let den = (nodes[i] - nodes[a]) * (nodes[i] - nodes[b]);
        out[0][i] = (x - nodes[a]) * (x - nodes[b]) / den;
        out[1][i] = (2.0 * x - nodes[a] - nodes[b]) / den;
        out[2][i] = 2.0 / den;
    }
    out
}

/// Sub-cell optimum from the tensor-product quadratic interpolant on the
/// 3x3 stencil around the argmax, located by Newton iteration.
pub fn refine(surface: &MapSurface) -> Refined {
    let Some((i, j)) = surface.argmax() else {
        return Refined {
            k: f64::NAN,
            c: f64::NAN,
            warning: Some("map has no valid cells".into()),
        };
    };
    let center = |warning: String| {
        log::warn!("{warning}");
        Refined {
            k: surface.k[i],
            c: surface.c[j],
            warning: Some(warning),
        }
    };
    if i == 0 || j == 0 || i + 1 >= surface.k.len() || j + 1 >= surface.c.len() {
        return center(format!(
            "map optimum on grid boundary at K = {}, C = {}",
            surface.k[i], surface.c[j]
        ));
    }
    let mut p = [[0.0; 3]; 3];
    for (a, row) in p.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            match surface.at(i + a - 1, j + b - 1) {
                Some(x) => *v = x,
                None => return center("missing cell next to the map optimum".into()),
            }
        }
    }
    let kn = [surface.k[i - 1], surface.k[i], surface.k[i + 1]];
    let cn = [surface.c[j - 1], surface.c[j], surface.c[j + 1]];
    // scale to the unit box for conditioning
    let (k0, ks) = (kn[1], kn[2] - kn[0]);
    let (c0, cs) = (cn[1], cn[2] - cn[0]);
    let kn = kn.map(|v| (v - k0) / ks);
    let cn = cn.map(|v| (v - c0) / cs);
    let derivs = |x: f64, y: f64| {
        let lx = lagrange3(kn, x);
        let ly = lagrange3(cn, y);
        let mut d = [0.0; 5]; // fx, fy, fxx, fxy, fyy
        for a in 0..3 {
            for b in 0..3 {
                d[0] += p[a][b] * lx[1][a] * ly[0][b];
                d[1] += p[a][b] * lx[0][a] * ly[1][b];
                d[2] += p[a][b] * lx[2][a] * ly[0][b];
                d[3] += p[a][b] * lx[1][a] * ly[1][b];
                d[4] += p[a][b] * lx[0][a] * ly[2][b];
            }
        }
        d
    };
    let scale = p.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let (mut x, mut y) = (0.0, 0.0);
    for _ in 0..50 {
        let d = derivs(x, y);
        let det = d[2] * d[4] - d[3] * d[3];
        // need a strict local maximum of the interpolant
        if !(d[2] < 0.0 && det > 0.0) || det.abs() <= 1e-12 * scale * scale {
            return center("degenerate curvature near the map optimum".into());
        }
        let dx = -(d[4] * d[0] - d[3] * d[1]) / det;
        let dy = -(d[2] * d[1] - d[3] * d[0]) / det;
        let nx = (x + dx).clamp(kn[0], kn[2]);
        let ny = (y + dy).clamp(cn[0], cn[2]);
        let done = (nx - x).abs() < 1e-14 && (ny - y).abs() < 1e-14;
        (x, y) = (nx, ny);
        if done {
            break;
        }
    }
    Refined {
        k: k0 + x * ks,
        c: c0 + y * cs,
        warning: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn surface(k: Vec<f64>, c: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> MapSurface {
        let power = k
            .iter()
            .flat_map(|&kk| c.iter().map(move |&cc| (kk, cc)))
            .map(|(kk, cc)| Some(f(kk, cc)))
            .collect();
        MapSurface {
            k,
            c,
            power,
            failures: Vec::new(),
        }
    }

    #[test]
    fn exact_quadratic_vertex() {
        let f = |k: f64, c: f64| {
            5.0 - 2e-6 * (k - 2731.3).powi(2) - 3e-3 * (c - 14.2).powi(2) + 1e-5 * (k - 2731.3) * (c - 14.2)
        };
        let s = surface(linspace(0.0, 5000.0, 41), linspace(1.0, 60.0, 31), f);
        let r = refine(&s);
        assert!(r.warning.is_none());
        assert_relative_eq!(r.k, 2731.3, max_relative = 1e-9);
        assert_relative_eq!(r.c, 14.2, max_relative = 1e-9);
    }

    #[test]
    fn flat_surface_returns_center() {
        let s = surface(linspace(0.0, 4.0, 5), linspace(0.0, 4.0, 5), |_, _| 1.0);
        let r = refine(&s);
        assert!(r.warning.is_some());
        // first maximum in row-major order is the corner, so boundary warning
        assert_eq!((r.k, r.c), (0.0, 0.0));
        let mut s2 = s.clone();
        s2.power[2 * 5 + 2] = Some(1.0 + 1e-14);
        let r2 = refine(&s2);
        assert_eq!((r2.k, r2.c), (2.0, 2.0));
        assert!(r2.warning.unwrap().contains("degenerate"));
    }

    #[test]
    fn boundary_argmax_warns() {
        let s = surface(linspace(0.0, 4.0, 5), linspace(0.0, 4.0, 5), |k, c| k + c);
        let r = refine(&s);
        assert_eq!((r.k, r.c), (4.0, 4.0));
        assert!(r.warning.unwrap().contains("boundary"));
    }

    #[test]
    fn single_cell_argmax() {
        let s = surface(vec![3.0], vec![7.0], |_, _| 0.5);
        assert_eq!(s.argmax(), Some((0, 0)));
    }

    #[test]
    fn csv_layout() {
        let mut s = surface(vec![1.0, 2.0], vec![3.0, 4.0], |k, c| k * c);
        s.power[3] = None;
        assert_eq!(s.to_csv(), "K\\C,3,4\n1,3,4\n2,6,NaN\n");
    }

    #[test]
    fn argmax_skips_missing_cells() {
        let mut s = surface(vec![1.0, 2.0], vec![3.0], |k, _| k);
        s.power[1] = None;
        assert_eq!(s.argmax(), Some((0, 0)));
    }
}
