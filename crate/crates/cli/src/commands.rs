//! The four experiment commands.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use wecseek::engine::{mean_power, run, time_avg_params, RunRecord};
use wecseek::mapgen::{refine, sweep, MapSpec, MapSurface, Refined};
use wecseek::plants::PowerDef;

use crate::config::{build, Built, Config};
use crate::output;
use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub svg: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub scheme: String,
    pub k_bar: f64,
    pub c_bar: f64,
    pub p_bar: f64,
    pub k_opt: f64,
    pub c_opt: f64,
    pub avg_periods: f64,
    pub record: RunRecord,
}

impl RunSummary {
    pub fn k_err(&self) -> f64 {
        (self.k_bar - self.k_opt) / self.k_opt
    }

    pub fn c_err(&self) -> f64 {
        (self.c_bar - self.c_opt) / self.c_opt
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        [
            ("scheme", self.scheme.clone()),
            ("avg_periods", self.avg_periods.to_string()),
            ("k_bar", self.k_bar.to_string()),
            ("c_bar", self.c_bar.to_string()),
            ("p_bar", self.p_bar.to_string()),
            ("k_opt", self.k_opt.to_string()),
            ("c_opt", self.c_opt.to_string()),
            ("k_rel_err", self.k_err().to_string()),
            ("c_rel_err", self.c_err().to_string()),
            ("rate_violations", self.record.rate_violations.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Scores a finished record the same way whether it is fresh or re-read
/// from `run.csv`.
pub fn score(rec: &RunRecord, avg_periods: f64) -> Result<(f64, f64, f64), CliError> {
    let (k, c) = time_avg_params(rec, avg_periods)?;
    let p = mean_power(rec, avg_periods)?;
    Ok((k, c, p))
}

fn scheme_name(cfg: &Config) -> String {
    cfg.controller
        .as_ref()
        .map_or("fixed".to_string(), |c| c.name().to_string())
}

fn load(path: &Path, opts: &Options) -> Result<(Config, Built), CliError> {
    let (cfg, base) = Config::load(path)?;
    let built = build(&cfg, &base, opts.seed)?;
    if let Some(ctl) = &cfg.controller {
        for w in ctl.warnings() {
            log::warn!("{w}");
        }
    }
    Ok((cfg, built))
}

/// Runs an already-built configuration and scores it, writing nothing.
pub fn evaluate(cfg: &Config, built: &Built) -> Result<RunSummary, CliError> {
    let rec = run(&built.scenario)?;
    let targets = built.targets(&cfg.plant)?;
    let (k_opt, c_opt) = *targets.last().expect("one segment");
    let (k_bar, c_bar, p_bar) = score(&rec, cfg.run.avg_periods)?;
    Ok(RunSummary {
        scheme: scheme_name(cfg),
        k_bar,
        c_bar,
        p_bar,
        k_opt,
        c_opt,
        avg_periods: cfg.run.avg_periods,
        record: rec,
    })
}

fn emit_run(opts: &Options, stem: &str, s: &RunSummary, targets: &[(f64, f64)]) -> Result<(), CliError> {
    output::write(&opts.out, &format!("{stem}.csv"), &output::run_csv(&s.record))?;
    if opts.svg {
        output::run_svgs(&opts.out, stem, &s.record, targets)?;
    }
    Ok(())
}

pub fn simulate(config: &Path, opts: &Options) -> Result<RunSummary, CliError> {
    let (cfg, built) = load(config, opts)?;
    let s = evaluate(&cfg, &built)?;
    emit_run(opts, "run", &s, &[(s.k_opt, s.c_opt)])?;
    output::write(&opts.out, "summary.txt", &output::summary(&s.pairs()))?;
    for (i, sea) in built.sea_states.iter().enumerate() {
        if let Some(sea) = sea.as_ref().filter(|s| s.components.len() > 1) {
            output::write(&opts.out, &format!("phases_{i}.csv"), &sea.phases_csv())?;
        }
    }
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct MapReport {
    pub surface: MapSurface,
    pub argmax: (f64, f64),
    pub refined: Refined,
    pub k_opt: f64,
    pub c_opt: f64,
}

pub fn map(config: &Path, opts: &Options) -> Result<MapReport, CliError> {
    let (cfg, built) = load(config, opts)?;
    let map_cfg = cfg
        .map
        .as_ref()
        .ok_or_else(|| CliError::Config("missing key `map`".into()))?;
    let spec = MapSpec {
        k_grid: map_cfg.k.values(),
        c_grid: map_cfg.c.values(),
        avg_periods: map_cfg.avg_periods,
        workers: opts.workers,
    };
    let surface = sweep(&built.scenario, &spec)?;
    let (i, j) = surface
        .argmax()
        .ok_or_else(|| CliError::Numeric("every map cell failed".into()))?;
    let argmax = (surface.k[i], surface.c[j]);
    let refined = refine(&surface);
    let (k_opt, c_opt) = *built.targets(&cfg.plant)?.last().expect("one segment");
    let mut pairs = vec![
        ("argmax_k".to_string(), argmax.0.to_string()),
        ("argmax_c".to_string(), argmax.1.to_string()),
        ("argmax_p".to_string(), surface.at(i, j).unwrap_or(f64::NAN).to_string()),
        ("refined_k".to_string(), refined.k.to_string()),
        ("refined_c".to_string(), refined.c.to_string()),
        ("k_opt".to_string(), k_opt.to_string()),
        ("c_opt".to_string(), c_opt.to_string()),
        ("failed_cells".to_string(), surface.failures.len().to_string()),
    ];
    if let Some(w) = &refined.warning {
        pairs.push(("warning".to_string(), w.clone()));
    }
    output::write(&opts.out, "surface.csv", &surface.to_csv())?;
    output::write(&opts.out, "map_summary.txt", &output::summary(&pairs))?;
    if opts.svg {
        output::map_svg(&opts.out, &surface, argmax)?;
    }
    Ok(MapReport {
        surface,
        argmax,
        refined,
        k_opt,
        c_opt,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentScore {
    pub start: f64,
    pub end: f64,
    pub k_bar: f64,
    pub c_bar: f64,
    pub k_opt: f64,
    pub c_opt: f64,
}

#[derive(Debug, Clone)]
pub struct AdaptiveReport {
    pub segments: Vec<SegmentScore>,
    pub record: RunRecord,
}

pub fn adaptive(config: &Path, opts: &Options) -> Result<AdaptiveReport, CliError> {
    let (cfg, built) = load(config, opts)?;
    let rec = run(&built.scenario)?;
    let targets = built.targets(&cfg.plant)?;
    let t_end = built.scenario.t_end;
    let mut segments = Vec::new();
    let mut pairs = vec![("scheme".to_string(), scheme_name(&cfg))];
    for (n, seg) in built.scenario.schedule.iter().enumerate() {
        let end = built.scenario.schedule.get(n + 1).map_or(t_end, |s| s.start);
        let r = rec.window(end, cfg.run.avg_periods * seg.period)?;
        let score = SegmentScore {
            start: seg.start,
            end,
            k_bar: RunRecord::mean_over(&rec.k, r.clone()),
            c_bar: RunRecord::mean_over(&rec.c, r),
            k_opt: targets[n].0,
            c_opt: targets[n].1,
        };
        for (key, v) in [
            ("start", score.start),
            ("end", score.end),
            ("k_bar", score.k_bar),
            ("c_bar", score.c_bar),
            ("k_opt", score.k_opt),
            ("c_opt", score.c_opt),
            ("k_rel_err", (score.k_bar - score.k_opt) / score.k_opt),
        ] {
            pairs.push((format!("segment{n}.{key}"), v.to_string()));
        }
        segments.push(score);
    }
    output::write(&opts.out, "run.csv", &output::run_csv(&rec))?;
    output::write(&opts.out, "summary.txt", &output::summary(&pairs))?;
    if opts.svg {
        output::run_svgs(&opts.out, "run", &rec, &targets)?;
    }
    Ok(AdaptiveReport {
        segments,
        record: rec,
    })
}

#[derive(Debug, Clone)]
pub struct AppendixReport {
    pub resistive: RunSummary,
    pub total: RunSummary,
}

impl AppendixReport {
    /// `|K_res - K_tot| / K_opt`.
    pub fn k_gap(&self) -> f64 {
        (self.resistive.k_bar - self.total.k_bar).abs() / self.resistive.k_opt
    }

    pub fn c_gap(&self) -> f64 {
        (self.resistive.c_bar - self.total.c_bar).abs() / self.resistive.c_opt
    }
}

/// Runs the configuration twice, differing only in the power definition.
pub fn appendix(config: &Path, opts: &Options) -> Result<AppendixReport, CliError> {
    let (cfg, built) = load(config, opts)?;
    let run_with = |power: PowerDef| {
        let mut b = built.clone();
        b.scenario.power = power;
        let mut c = cfg.clone();
        c.pto.power = power;
        evaluate(&c, &b)
    };
    let defs = [PowerDef::Resistive, PowerDef::Total];
    let go = || -> Vec<Result<RunSummary, CliError>> { defs.par_iter().map(|&d| run_with(d)).collect() };
    let results = match opts.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| CliError::Config(format!("worker pool: {e}")))?
            .install(go),
        None => go(),
    };
    let mut it = results.into_iter();
    let resistive = it.next().expect("two runs")?;
    let total = it.next().expect("two runs")?;
    let report = AppendixReport { resistive, total };
    let mut pairs = Vec::new();
    for (tag, s) in [("resistive", &report.resistive), ("total", &report.total)] {
        for (k, v) in s.pairs() {
            pairs.push((format!("{tag}.{k}"), v));
        }
    }
    pairs.push(("k_gap_frac".into(), report.k_gap().to_string()));
    pairs.push(("c_gap_frac".into(), report.c_gap().to_string()));
    let targets = [(report.resistive.k_opt, report.resistive.c_opt)];
    emit_run(opts, "run_resistive", &report.resistive, &targets)?;
    emit_run(opts, "run_total", &report.total, &targets)?;
    output::write(&opts.out, "summary.txt", &output::summary(&pairs))?;
    Ok(report)
}
