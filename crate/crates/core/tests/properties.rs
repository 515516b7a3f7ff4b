use std::f64::consts::TAU;

use proptest::prelude::*;
use wecseek::engine::{mean_power, run, Scenario, Segment, Tuned};
use wecseek::hydro::{synth_fixture, Body, FixtureSpec, HydroTable};
use wecseek::mapgen::{linspace, sweep, MapSpec};
use wecseek::plants::{MsdPlant, PaPlant, Plant, PowerDef, PtoLaw, RHO_WATER};
use wecseek::signals::{PerfPipeline, PipelineConfig};
use wecseek::waves::{Excitation, SeaSpec, SeaState};

const MSD: MsdPlant = MsdPlant {
    m: 18.55,
    c: 15.0,
    k: 200.0,
};

fn scenario(plant: Plant, excitation: Excitation, period: f64, k: f64, c: f64, t_end: f64) -> Scenario {
    Scenario {
        plant,
        k0: k,
        c0: c,
        power: PowerDef::Resistive,
        tuned: Tuned::K,
        controller: None,
        pipeline: PipelineConfig::for_wave_period(period),
        schedule: vec![Segment {
            start: 0.0,
            excitation,
            period,
        }],
        dt: period / 200.0,
        t_end,
        warmup: 10.0 * period,
        decimation: 1,
        initial_state: Vec::new(),
        rate_guard: 0.01,
    }
}

fn msd_scenario(k: f64, c: f64) -> Scenario {
    scenario(
        Plant::Msd(MSD),
        Excitation::sinusoid(10.0, TAU / 0.5),
        0.5,
        k,
        c,
        30.0,
    )
}

fn cylinder() -> HydroTable {
    synth_fixture(&FixtureSpec::cylinder(4)).unwrap()
}

fn pa(table: &HydroTable, drag_coeff: f64) -> PaPlant {
    let body = Body::cylinder();
    PaPlant {
        mass: body.mass,
        a_inf: table.a_inf(),
        radiation: table.radiation().clone(),
        drag_coeff,
        area: body.area,
        rho: RHO_WATER,
        linear_damping: 0.0,
    }
}

fn regular(table: &HydroTable, period: f64, height: f64) -> Excitation {
    let sea = SeaState::new(&SeaSpec::Regular { period, height }, Body::cylinder().depth).unwrap();
    Excitation::from_sea(&sea, table).unwrap()
}

#[test]
fn radiation_fixtures_are_passive() {
    for spec in [FixtureSpec::cylinder(4), FixtureSpec::sphere(2)] {
        let table = synth_fixture(&spec).unwrap();
        let rad = table.radiation();
        assert!(rad.is_stable());
        for w in linspace(0.05, 200.0, 4000) {
            // real part of the radiation kernel is the damping
            assert!(rad.transfer(w).re >= 0.0, "negative damping at {w} rad/s");
        }
        for &b in table.damping() {
            assert!(b >= 0.0);
        }
    }
}

#[test]
fn drag_free_absorber_is_linear_in_wave_height() {
    let table = cylinder();
    let run_h = |h: f64| {
        let s = scenario(
            Plant::PointAbsorber(pa(&table, 0.0)),
            regular(&table, 0.625, h),
            0.625,
            3717.0,
            9.0,
            20.0,
        );
        run(&s).unwrap()
    };
    let a = run_h(0.01);
    let b = run_h(0.02);
    for (xa, xb) in a.x.iter().zip(&b.x) {
        assert!((2.0 * xa - xb).abs() <= 1e-9 * xb.abs().max(1e-9), "{xa} {xb}");
    }
    let (pa_, pb) = (mean_power(&a, 10.0).unwrap(), mean_power(&b, 10.0).unwrap());
    assert!((pb / pa_ - 4.0).abs() < 1e-9);
}

#[test]
fn drag_breaks_linearity() {
    let table = cylinder();
    let run_h = |h: f64| {
        let s = scenario(
            Plant::PointAbsorber(pa(&table, 1.0)),
            regular(&table, 0.625, h),
            0.625,
            3717.0,
            9.0,
            20.0,
        );
        mean_power(&run(&s).unwrap(), 10.0).unwrap()
    };
    assert!((run_h(0.02) / run_h(0.01) - 4.0).abs() > 1e-3);
}

#[test]
fn unforced_oscillator_energy_never_grows() {
    let mut s = msd_scenario(2729.0, 5.0);
    s.schedule[0].excitation = Excitation::zero();
    s.initial_state = vec![0.01, 0.0];
    let rec = run(&s).unwrap();
    let stiffness = MSD.k + 2729.0;
    let energy: Vec<f64> = rec
        .x
        .iter()
        .zip(&rec.xdot)
        .map(|(x, v)| 0.5 * MSD.m * v * v + 0.5 * stiffness * x * x)
        .collect();
    for w in energy.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12), "energy rose {} -> {}", w[0], w[1]);
    }
    assert!(energy.last().unwrap() < &(1e-6 * energy[0]));
}

#[test]
fn unforced_absorber_decays() {
    let table = cylinder();
    let mut s = scenario(
        Plant::PointAbsorber(pa(&table, 1.0)),
        Excitation::zero(),
        0.625,
        3717.0,
        5.0,
        60.0,
    );
    s.initial_state = vec![0.01, 0.0, 0.0, 0.0, 0.0, 0.0];
    let rec = run(&s).unwrap();
    let peak = |from: f64, to: f64| {
        rec.t
            .iter()
            .zip(&rec.x)
            .filter(|(t, _)| **t >= from && **t < to)
            .map(|(_, x)| x.abs())
            .fold(0.0, f64::max)
    };
    let peaks: Vec<f64> = (0..6).map(|i| peak(10.0 * i as f64, 10.0 * (i + 1) as f64)).collect();
    for w in peaks.windows(2) {
        assert!(w[1] < w[0], "{peaks:?}");
    }
    assert!(peaks[5] < 1e-3 * 0.01);
}

#[test]
fn memoryless_absorber_matches_equivalent_oscillator() {
    // With a single-frequency table the absorber is an oscillator of mass
    // m + A(w), damping B(w) and no restoring force.
    let table = cylinder();
    let w = TAU / 0.625;
    let co = table.interp(w).unwrap();
    let exc = regular(&table, 0.625, 0.01);
    let mut plant = pa(&table, 0.0);
    plant.radiation = wecseek::plants::Radiation::none();
    plant.a_inf = co.added_mass;
    plant.linear_damping = co.damping;
    for (k, c) in [(3717.0, 9.0), (3000.0, 15.0), (4500.0, 5.0)] {
        let p_pa = mean_power(
            &run(&scenario(Plant::PointAbsorber(plant.clone()), exc.clone(), 0.625, k, c, 30.0)).unwrap(),
            10.0,
        )
        .unwrap();
        let msd = MsdPlant {
            m: plant.mass + co.added_mass,
            c: co.damping,
            k: 0.0,
        };
        let p_msd = mean_power(
            &run(&scenario(Plant::Msd(msd), exc.clone(), 0.625, k, c, 30.0)).unwrap(),
            10.0,
        )
        .unwrap();
        assert!((p_pa / p_msd - 1.0).abs() < 0.02, "{p_pa} vs {p_msd}");
    }
}

#[test]
fn excitation_variance_adds_over_components() {
    let table = cylinder();
    let spec = SeaSpec::Irregular {
        peak_period: 0.625,
        hs: 0.01,
        seed: 7,
        components: 200,
        band: [0.4, 4.0],
    };
    let sea = SeaState::new(&spec, Body::cylinder().depth).unwrap();
    let exc = Excitation::from_sea(&sea, &table).unwrap();
    let span = 5.0 * sea.repeat_period().unwrap();
    let dt = 0.625 / 200.0;
    let n = (span / dt) as usize;
    let samples: Vec<f64> = (0..n).map(|i| exc.force(i as f64 * dt)).collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / n as f64;
    assert!((var / exc.variance() - 1.0).abs() < 0.02, "{var} vs {}", exc.variance());
}

#[test]
fn msd_power_is_unimodal_along_c() {
    let base = msd_scenario(2729.0, 15.0);
    let surface = sweep(
        &base,
        &MapSpec {
            k_grid: vec![2729.0],
            c_grid: linspace(1.0, 60.0, 60),
            avg_periods: 10.0,
            workers: None,
        },
    )
    .unwrap();
    let p: Vec<f64> = surface.power.iter().map(|p| p.unwrap()).collect();
    let signs: Vec<bool> = p.windows(2).map(|w| w[1] > w[0]).collect();
    let changes = signs.windows(2).filter(|s| s[0] != s[1]).count();
    assert_eq!(changes, 1, "{p:?}");
    assert!(signs[0] && !signs[signs.len() - 1]);
}

#[test]
fn sweep_ignores_worker_count() {
    let base = msd_scenario(2729.0, 15.0);
    let spec = |workers| MapSpec {
        k_grid: linspace(1500.0, 4000.0, 6),
        c_grid: linspace(5.0, 30.0, 5),
        avg_periods: 10.0,
        workers,
    };
    let one = sweep(&base, &spec(Some(1))).unwrap();
    for w in [Some(2), Some(5), None] {
        let other = sweep(&base, &spec(w)).unwrap();
        assert_eq!(one, other);
        assert_eq!(one.to_csv(), other.to_csv());
    }
}

#[test]
fn pto_power_definitions_differ_only_by_reactive_term() {
    let (x, v) = (0.013, -0.21);
    let res = PtoLaw::new(3000.0, 12.0, PowerDef::Resistive).power(x, v);
    let tot = PtoLaw::new(3000.0, 12.0, PowerDef::Total).power(x, v);
    assert!((res - 12.0 * v * v).abs() < 1e-15);
    assert!((tot - res - 3000.0 * x * v).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn metric_shifts_by_log_of_power_scale(scale in 1e-3f64..1e3, phase in 0.0f64..TAU) {
        let cfg = PipelineConfig::for_wave_period(0.5);
        let dt = 0.5 / 200.0;
        let mut a = PerfPipeline::new(&cfg, dt);
        let mut b = PerfPipeline::new(&cfg, dt);
        let fill = a.window_samples();
        for n in 0..3 * fill {
            let p = 1.0 + 0.8 * (TAU / 0.25 * n as f64 * dt + phase).sin();
            let ja = a.step(p, dt).unwrap().j;
            let jb = b.step(scale * p, dt).unwrap().j;
            if n >= fill {
                prop_assert!((jb - ja - scale.ln()).abs() < 1e-9);
            }
        }
    }
}
