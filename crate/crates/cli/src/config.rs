//! Scenario configuration files (TOML).

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wecseek::controllers::SchemeConfig;
use wecseek::engine::{Scenario, Segment, Tuned};
use wecseek::hydro::{optimal_msd, optimal_pa, synth_fixture, Body, FixtureSpec, HydroTable};
use wecseek::plants::{MsdPlant, PaPlant, Plant, PowerDef, RHO_WATER};
use wecseek::signals::PipelineConfig;
use wecseek::waves::{Excitation, SeaSpec, SeaState};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Cylinder,
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantConfig {
    Msd {
        m: f64,
        c: f64,
        k: f64,
    },
    PointAbsorber {
        body: BodyKind,
        /// Quadratic drag coefficient; no default on purpose.
        drag_coeff: f64,
        /// 0, 2 or 4 for the built-in fixtures.
        #[serde(default)]
        radiation_order: Option<usize>,
        /// Table file instead of the built-in fixture, relative to the config.
        #[serde(default)]
        hydro_file: Option<PathBuf>,
        /// Overrides the body mass.
        #[serde(default)]
        mass: Option<f64>,
    },
}

/// One excitation source. `sinusoid` drives the oscillator directly; the
/// wave kinds drive a point absorber through its excitation gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingConfig {
    Sinusoid {
        f0: f64,
        period: f64,
    },
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

impl ForcingConfig {
    pub fn period(&self) -> f64 {
        match self {
            ForcingConfig::Sinusoid { period, .. } | ForcingConfig::Regular { period, .. } => *period,
            ForcingConfig::Irregular { peak_period, .. } => *peak_period,
        }
    }

    fn sea(&self, seed: Option<u64>) -> Option<SeaSpec> {
        match *self {
            ForcingConfig::Sinusoid { .. } => None,
            ForcingConfig::Regular { period, height } => Some(SeaSpec::Regular { period, height }),
            ForcingConfig::Irregular {
                peak_period,
                hs,
                seed: s,
                components,
                band,
            } => Some(SeaSpec::Irregular {
                peak_period,
                hs,
                seed: seed.unwrap_or(s),
                components,
                band,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub start: f64,
    #[serde(flatten)]
    pub forcing: ForcingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PtoConfig {
    pub k: f64,
    pub c: f64,
    #[serde(default)]
    pub power: PowerDef,
    #[serde(default)]
    pub tune: Tuned,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Defaults to the first period / 200.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Defaults to 10 periods of the first segment.
    pub warmup: Option<f64>,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    /// Trailing window for the summary averages, in final-segment periods.
    #[serde(default = "default_avg_periods")]
    pub avg_periods: f64,
    #[serde(default = "default_rate_guard")]
    pub rate_guard: f64,
}

fn default_decimation() -> usize {
    10
}

fn default_avg_periods() -> f64 {
    2.0
}

fn default_rate_guard() -> f64 {
    0.01
}

/// `[lo, hi, n]` or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Range { lo: f64, hi: f64, n: usize },
    Values(Vec<f64>),
}

impl GridConfig {
    pub fn values(&self) -> Vec<f64> {
        match self {
            GridConfig::Range { lo, hi, n } => wecseek::mapgen::linspace(*lo, *hi, *n),
            GridConfig::Values(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub k: GridConfig,
    pub c: GridConfig,
    /// Averaging window in periods; the run horizon comes from `run.t_end`.
    #[serde(default = "default_map_avg")]
    pub avg_periods: f64,
}

fn default_map_avg() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub plant: PlantConfig,
    /// Single excitation; mutually exclusive with `schedule`.
    #[serde(default)]
    pub forcing: Option<ForcingConfig>,
    #[serde(default)]
    pub schedule: Vec<ScheduleEntry>,
    pub pto: PtoConfig,
    #[serde(default)]
    pub controller: Option<SchemeConfig>,
    #[serde(default)]
    pub pipeline: Option<PipelineConfig>,
    pub run: RunConfig,
    #[serde(default)]
    pub map: Option<MapConfig>,
}

/// Turns serde's "missing field `m`" at path `plant` into `plant.m`.
fn describe(err: serde_path_to_error::Error<toml::de::Error>) -> String {
    let path = err.path().to_string();
    let inner = err.inner().message().to_string();
    if let Some(rest) = inner.strip_prefix("missing field `") {
        let field = rest.trim_end_matches('`');
        if path == "." || path.is_empty() {
            return format!("missing key `{field}`");
        }
        return format!("missing key `{path}.{field}`");
    }
    if path == "." || path.is_empty() {
        inner
    } else {
        format!("`{path}`: {inner}")
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| CliError::Config(describe(e)))
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((Self::parse(&text)?, base))
    }

    pub fn segments(&self) -> Result<Vec<ScheduleEntry>, CliError> {
        match (&self.forcing, self.schedule.is_empty()) {
            (Some(f), true) => Ok(vec![ScheduleEntry {
                start: 0.0,
                forcing: f.clone(),
            }]),
            (None, false) => Ok(self.schedule.clone()),
            (Some(_), false) => Err(CliError::Config(
                "give either `forcing` or `schedule`, not both".into(),
            )),
            (None, true) => Err(CliError::Config("missing key `forcing`".into())),
        }
    }
}

/// Everything needed to run and score a configuration.
#[derive(Debug, Clone)]
pub struct Built {
    pub scenario: Scenario,
    pub table: Option<HydroTable>,
    pub mass: f64,
    pub sea_states: Vec<Option<SeaState>>,
    pub entries: Vec<ScheduleEntry>,
}

impl Built {
    /// Analytic `(K_opt, C_opt)` for each segment.
    pub fn targets(&self, plant: &PlantConfig) -> Result<Vec<(f64, f64)>, CliError> {
        self.entries
            .iter()
            .map(|e| {
                let omega = TAU / e.forcing.period();
                match plant {
                    PlantConfig::Msd { m, c, k } => Ok(optimal_msd(*m, *k, omega, *c)),
                    PlantConfig::PointAbsorber { .. } => {
                        let table = self.table.as_ref().expect("point absorber has a table");
                        optimal_pa(table, self.mass, omega).map_err(CliError::from)
                    }
                }
            })
            .collect()
    }
}

fn load_table(
    body: &BodyKind,
    order: Option<usize>,
    file: &Option<PathBuf>,
    base: &Path,
) -> Result<HydroTable, CliError> {
    if let Some(f) = file {
        let path = base.join(f);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        return HydroTable::parse(&text).map_err(CliError::from);
    }
    let spec = match body {
        BodyKind::Cylinder => FixtureSpec::cylinder(order.unwrap_or(4)),
        BodyKind::Sphere => FixtureSpec::sphere(order.unwrap_or(2)),
    };
    synth_fixture(&spec).map_err(CliError::from)
}

pub fn build(cfg: &Config, base: &Path, seed: Option<u64>) -> Result<Built, CliError> {
    let entries = cfg.segments()?;
    let first_period = entries[0].forcing.period();
    if !(first_period > 0.0) {
        return Err(CliError::Config("forcing period must be > 0".into()));
    }
    let (plant, table, mass, depth) = match &cfg.plant {
        PlantConfig::Msd { m, c, k } => (
            Plant::Msd(MsdPlant {
                m: *m,
                c: *c,
                k: *k,
            }),
            None,
            *m,
            f64::NAN,
        ),
        PlantConfig::PointAbsorber {
            body,
            drag_coeff,
            radiation_order,
            hydro_file,
            mass,
        } => {
            let geometry = match body {
                BodyKind::Cylinder => Body::cylinder(),
                BodyKind::Sphere => Body::sphere(),
            };
            let table = load_table(body, *radiation_order, hydro_file, base)?;
            let mass = mass.unwrap_or(geometry.mass);
            let mut p = PaPlant {
                mass,
                a_inf: table.a_inf(),
                radiation: table.radiation().clone(),
                drag_coeff: *drag_coeff,
                area: geometry.area,
                rho: RHO_WATER,
                linear_damping: 0.0,
            };
            if p.radiation.order() == 0 {
                // memoryless table: use the single-frequency equivalent of
                // the first segment
                let co = table.interp(TAU / first_period)?;
                p.a_inf = co.added_mass;
                p.linear_damping = co.damping;
            }
            (Plant::PointAbsorber(p), Some(table), mass, geometry.depth)
        }
    };

    let mut schedule = Vec::with_capacity(entries.len());
    let mut sea_states = Vec::with_capacity(entries.len());
    for (i, e) in entries.iter().enumerate() {
        let period = e.forcing.period();
        let (excitation, sea) = match (&e.forcing, &table) {
            (ForcingConfig::Sinusoid { f0, period }, None) => {
                (Excitation::sinusoid(*f0, TAU / period), None)
            }
            (ForcingConfig::Sinusoid { .. }, Some(_)) => {
                return Err(CliError::Config(format!(
                    "schedule[{i}]: a point absorber needs a regular or irregular sea"
                )))
            }
            (_, None) => {
                return Err(CliError::Config(format!(
                    "schedule[{i}]: the oscillator is driven by kind = \"sinusoid\""
                )))
            }
            (f, Some(table)) => {
                let sea = SeaState::new(&f.sea(seed).expect("wave forcing"), depth)?;
                (Excitation::from_sea(&sea, table)?, Some(sea))
            }
        };
        sea_states.push(sea);
        schedule.push(Segment {
            start: e.start,
            excitation,
            period,
        });
    }

    // An irregular sea on a uniform frequency grid beats with period 2 pi / dw;
    // averaging over exactly that span removes the beating from J.
    let pipeline = cfg.pipeline.unwrap_or_else(|| {
        match sea_states.first().and_then(|s| s.as_ref()?.repeat_period()) {
            Some(window) => PipelineConfig {
                window,
                ..PipelineConfig::for_wave_period(first_period)
            },
            None => PipelineConfig::for_wave_period(first_period),
        }
    });
    let run = &cfg.run;
    let scenario = Scenario {
        plant,
        k0: cfg.pto.k,
        c0: cfg.pto.c,
        power: cfg.pto.power,
        tuned: cfg.pto.tune,
        controller: cfg.controller.clone(),
        pipeline,
        schedule,
        dt: run.dt.unwrap_or(first_period / 200.0),
        t_end: run.t_end,
        warmup: run.warmup.unwrap_or((10.0 * first_period).max(pipeline.window)),
        decimation: run.decimation,
        initial_state: Vec::new(),
        rate_guard: run.rate_guard,
    };
    scenario.validate()?;
    Ok(Built {
        scenario,
        table,
        mass,
        sea_states,
        entries,
    })
}
