//! CSV, summary and SVG writers.

use std::fmt::Write as _;
use std::path::Path;

use plotters::prelude::*;
use wecseek::engine::RunRecord;
use wecseek::mapgen::MapSurface;

use crate::CliError;

pub const RUN_COLUMNS: [&str; 8] = ["t", "x", "xdot", "K", "C", "P", "mu", "J"];

/// `t,x,xdot,K,C,P,mu,J`, one row per recorded step. Values use the
/// shortest representation that parses back to the same bits.
pub fn run_csv(rec: &RunRecord) -> String {
    let mut s = RUN_COLUMNS.join(",");
    s.push('\n');
    for i in 0..rec.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            rec.t[i], rec.x[i], rec.xdot[i], rec.k[i], rec.c[i], rec.p[i], rec.mu[i], rec.j[i]
        );
    }
    s
}

/// Parses [`run_csv`] output back into the series of a record; the timing
/// metadata is copied from `meta`.
pub fn read_run_csv(text: &str, meta: &RunRecord) -> Result<RunRecord, CliError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header.split(',').ne(RUN_COLUMNS) {
        return Err(CliError::Config(format!("unexpected run.csv header {header:?}")));
    }
    let mut rec = RunRecord {
        sample_dt: meta.sample_dt,
        warmup: meta.warmup,
        segments: meta.segments.clone(),
        rate_violations: meta.rate_violations,
        ..RunRecord::default()
    };
    for (n, line) in lines.enumerate() {
        let v: Vec<f64> = line
            .split(',')
            .map(|x| x.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("run.csv row {}: {e}", n + 2)))?;
        if v.len() != 8 {
            return Err(CliError::Config(format!("run.csv row {} has {} fields", n + 2, v.len())));
        }
        for (col, x) in [
            &mut rec.t, &mut rec.x, &mut rec.xdot, &mut rec.k, &mut rec.c, &mut rec.p, &mut rec.mu,
            &mut rec.j,
        ]
        .into_iter()
        .zip(v)
        {
            col.push(x);
        }
    }
    Ok(rec)
}

/// `key = value` lines.
pub fn summary(pairs: &[(String, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Reads `key = value` lines.
pub fn parse_summary(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

fn plot_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("plot: {e}"))
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9 * hi.abs().max(1.0));
    (lo - pad, hi + pad)
}

fn line_panel(
    area: &DrawingArea<SVGBackend, plotters::coord::Shift>,
    t: &[f64],
    series: &[(&[f64], &str, RGBColor)],
    y_label: &str,
    targets: &[(f64, RGBColor)],
) -> Result<(), CliError> {
    let (t0, t1) = (t.first().copied().unwrap_or(0.0), t.last().copied().unwrap_or(1.0));
    let all: Vec<f64> = series
        .iter()
        .flat_map(|s| s.0.iter().copied())
        .chain(targets.iter().map(|t| t.0))
        .collect();
    let (y0, y1) = bounds(&all);
    let mut chart = ChartBuilder::on(area)
        .margin(10)
        .x_label_area_size(30)
        .y_label_area_size(60)
        .build_cartesian_2d(t0..t1.max(t0 + 1e-9), y0..y1)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("t [s]")
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;
    for (ys, name, color) in series {
        chart
            .draw_series(LineSeries::new(t.iter().copied().zip(ys.iter().copied()), color))
            .map_err(plot_err)?
            .label(*name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 15, y)], color));
    }
    for &(v, color) in targets {
        chart
            .draw_series(LineSeries::new([(t0, v), (t1, v)], color.stroke_width(1)))
            .map_err(plot_err)?;
    }
    chart
        .configure_series_labels()
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    Ok(())
}

/// Parameter convergence (K and C) and power traces.
pub fn run_svgs(dir: &Path, stem: &str, rec: &RunRecord, targets: &[(f64, f64)]) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}_params.svg"));
    let root = SVGBackend::new(&path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let panels = root.split_evenly((2, 1));
    let kt: Vec<(f64, RGBColor)> = targets.iter().map(|t| (t.0, RED)).collect();
    let ct: Vec<(f64, RGBColor)> = targets.iter().map(|t| (t.1, RED)).collect();
    line_panel(&panels[0], &rec.t, &[(&rec.k, "K", BLUE)], "K [N/m]", &kt)?;
    line_panel(&panels[1], &rec.t, &[(&rec.c, "C", BLUE)], "C [N s/m]", &ct)?;
    root.present().map_err(plot_err)?;

    let path = dir.join(format!("{stem}_power.svg"));
    let root = SVGBackend::new(&path, (900, 600)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let panels = root.split_evenly((2, 1));
    line_panel(
        &panels[0],
        &rec.t,
        &[(&rec.p, "P", BLUE), (&rec.mu, "mu", GREEN)],
        "power [W]",
        &[],
    )?;
    line_panel(&panels[1], &rec.t, &[(&rec.j, "J", BLUE)], "J", &[])?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Heat map of mean power with the argmax marked.
pub fn map_svg(dir: &Path, surface: &MapSurface, mark: (f64, f64)) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("map.svg");
    let root = SVGBackend::new(&path, (800, 640)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let edges = |v: &[f64]| -> Vec<f64> {
        if v.len() == 1 {
            return vec![v[0] - 0.5, v[0] + 0.5];
        }
        let mut e = vec![v[0] - 0.5 * (v[1] - v[0])];
        e.extend(v.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        e.push(v[v.len() - 1] + 0.5 * (v[v.len() - 1] - v[v.len() - 2]));
        e
    };
    let (ke, ce) = (edges(&surface.k), edges(&surface.c));
    let vals: Vec<f64> = surface.power.iter().flatten().copied().collect();
    let (lo, hi) = bounds(&vals);
    let mut chart = ChartBuilder::on(&root)
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(60)
        .build_cartesian_2d(ke[0]..ke[ke.len() - 1], ce[0]..ce[ce.len() - 1])
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("K [N/m]")
        .y_desc("C [N s/m]")
        .disable_mesh()
        .draw()
        .map_err(plot_err)?;
    let mut cells = Vec::new();
    for i in 0..surface.k.len() {
        for j in 0..surface.c.len() {
            let color = match surface.at(i, j) {
                Some(p) => {
                    let s = ((p - lo) / (hi - lo)).clamp(0.0, 1.0);
                    HSLColor(0.66 * (1.0 - s), 0.9, 0.5).filled()
                }
                None => BLACK.filled(),
            };
            cells.push(Rectangle::new([(ke[i], ce[j]), (ke[i + 1], ce[j + 1])], color));
        }
    }
    chart.draw_series(cells).map_err(plot_err)?;
    chart
        .draw_series([Cross::new(mark, 8, BLACK.stroke_width(2))])
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}
