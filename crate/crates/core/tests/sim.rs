mod common;

use std::f64::consts::PI;

use common::{rel_change, rel_rms_diff};
use crone_reset::crone::Generation;
use crone_reset::export::{write_sensitivity, write_trace};
use crone_reset::lti::StateSpaceModel;
use crone_reset::plant::Plant;
use crone_reset::reset::{HybridSystem, ResetStrategy};
use crone_reset::sim::scenarios::{self, lag_reset, linear, stage_loop};
use crone_reset::sim::sensitivity::{estimate_sensitivity, linear_sensitivity, SweepSpec};
use crone_reset::sim::{
    feedforward, generate_reference, simulate, simulate_from, SimulationConfig, SineNoise, TriangleProfile,
};
use crone_reset::stability::{build_closed_loop, ClosedLoop};
use crone_reset::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn one(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// A Clegg integrator whose "plant" has no output, so `e = -n`.
fn open_clegg() -> ClosedLoop {
    let h = HybridSystem {
        ss: StateSpaceModel::new(one(0.0), one(1.0), one(1.0), one(0.0)).unwrap(),
        jump: DVector::from_element(1, 0.0),
        reset_states: vec![0],
    };
    let silent = StateSpaceModel::new(one(-1.0), one(1.0), one(0.0), one(0.0)).unwrap();
    build_closed_loop(&h, &silent).unwrap()
}

fn sine_drive(duration: f64, step: f64) -> SimulationConfig {
    SimulationConfig {
        step,
        noise: Some(SineNoise {
            amplitude: 1.0,
            freq_hz: 1.0 / (2.0 * PI),
        }),
        ..SimulationConfig::new(duration)
    }
}

#[test]
fn clegg_state_empties_at_each_crossing() {
    let h = 1e-3;
    let tr = simulate(&open_clegg(), &sine_drive(10.0, h)).unwrap();
    // e = -sin t, so u = -(1 - cos t) within each half cycle
    let before = (PI / h).floor() as usize;
    assert!((tr.u[before] + 2.0).abs() < 1e-5, "{}", tr.u[before]);
    assert!(tr.u[before + 1].abs() < 1e-5, "{}", tr.u[before + 1]);
    assert_eq!(tr.events.len(), 3);
    for (k, t) in tr.events.iter().enumerate() {
        assert!((t - (k + 1) as f64 * PI).abs() < 1e-9);
        assert!(t.sin().abs() < 1e-9);
    }
    assert!(tr.events.windows(2).all(|w| w[0] < w[1]));
    let mid = (1.5 * PI / h).round() as usize;
    let want = 1.0 - (tr.time[mid] - PI).cos();
    assert!((tr.u[mid] - want).abs() < 1e-9);
}

#[test]
fn only_reset_states_jump() {
    let plant = Plant::stage();
    let l = stage_loop(Generation::First, lag_reset(), &plant, true).unwrap();
    let cl = &l.closed_loop;
    let cfg = scenarios::tracking(&plant);
    let tr = simulate(cl, &cfg).unwrap();
    assert!(!tr.events.is_empty());
    let scale = cfg.reference.unwrap().amplitude;
    for (i, j) in cl.jump.iter().enumerate() {
        assert_eq!(*j != 1.0, cl.reset_states.contains(&i));
    }
    assert!(tr.metrics.rms_error < scale);
}

#[test]
fn events_sit_on_error_zeros() {
    let plant = Plant::stage();
    for (generation, strategy) in [
        (Generation::First, lag_reset()),
        (Generation::Second, lag_reset()),
        (Generation::First, ResetStrategy { gamma: 1.0, ..lag_reset() }),
    ] {
        let l = stage_loop(generation, strategy, &plant, true).unwrap();
        for (cfg, scale) in [
            (scenarios::noise(300.0), 1e-6),
            (scenarios::tracking(&plant), 1e-4),
            (scenarios::pulse(), 530e-9),
        ] {
            let tr = simulate(&l.closed_loop, &cfg).unwrap();
            assert_eq!(tr.events.len(), tr.event_errors.len());
            assert!(!tr.events.is_empty());
            let worst = tr.event_errors.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            assert!(worst < 1e-9 * scale, "{generation:?} {strategy:?}: {worst:e}");
        }
    }
}

#[test]
fn unit_jumps_reproduce_the_linear_loop() {
    let plant = Plant::stage();
    let l = stage_loop(Generation::Second, ResetStrategy { gamma: 1.0, ..lag_reset() }, &plant, false).unwrap();
    let base = build_closed_loop(&HybridSystem::linear(l.design.model.base.clone()), &plant.realize().unwrap()).unwrap();
    for cfg in [scenarios::tracking(&plant), scenarios::pulse(), scenarios::noise(500.0)] {
        let a = simulate(&l.closed_loop, &cfg).unwrap();
        let b = simulate(&base, &cfg).unwrap();
        assert!(rel_rms_diff(&a.y, &b.y) < 1e-9);
        assert!(!a.events.is_empty());
    }
}

#[test]
fn free_response_decays() {
    let plant = Plant::stage();
    for generation in [Generation::First, Generation::Second] {
        for strategy in [linear(), lag_reset(), ResetStrategy { gamma: 0.0, p: 0.0, ..lag_reset() }] {
            let l = stage_loop(generation, strategy, &plant, true).unwrap();
            let cl = &l.closed_loop;
            let tau = -1.0 / cl.max_real_part();
            let x0 = DVector::from_fn(cl.n_states(), |i, _| 1e-6 * (1.0 + (i as f64 * 0.7).sin()));
            let cfg = SimulationConfig::new(50.0 * tau);
            let tr = simulate_from(cl, &cfg, Some(&x0)).unwrap();
            assert!(tr.final_state.norm() < 1e-6 * x0.norm(), "{generation:?} {strategy:?}");
        }
    }
}

#[test]
fn divergence_is_reported_with_its_time() {
    let unstable = StateSpaceModel::new(one(200.0), one(1.0), one(1.0), one(0.0)).unwrap();
    let cl = build_closed_loop(&HybridSystem::linear(StateSpaceModel::static_gain(0.0)), &unstable).unwrap();
    let x0 = DVector::from_element(1, 1.0);
    match simulate_from(&cl, &SimulationConfig::new(1.0), Some(&x0)) {
        Err(Error::Divergence { time }) => assert!((time - 30.0 * 10f64.ln() / 200.0).abs() < 0.01, "{time}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn runs_are_bit_identical() {
    let plant = Plant::stage();
    let l = stage_loop(Generation::Second, lag_reset(), &plant, true).unwrap();
    let cfg = scenarios::pulse();
    let a = simulate(&l.closed_loop, &cfg).unwrap();
    let b = simulate(&l.closed_loop, &cfg).unwrap();
    assert_eq!(a, b);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_trace(&a, &mut ca).unwrap();
    write_trace(&b, &mut cb).unwrap();
    assert_eq!(ca, cb);
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with("time,e,u,y,event\n"));
    assert_eq!(text.lines().count(), a.time.len() + 1);
    let marked: u32 = text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<u32>().unwrap()).sum();
    assert_eq!(marked as usize, a.events.len());
}

#[test]
fn halving_the_step_barely_moves_rms() {
    let plant = Plant::stage();
    for generation in [Generation::First, Generation::Second] {
        let l = stage_loop(generation, lag_reset(), &plant, true).unwrap();
        let cfg = scenarios::tracking(&plant);
        let a = simulate(&l.closed_loop, &cfg).unwrap().metrics.rms_error;
        let b = simulate(&l.closed_loop, &cfg.with_step(cfg.step / 2.0)).unwrap().metrics.rms_error;
        assert!(rel_change(b, a) < 1e-3);
    }
}

#[test]
fn reference_profile_properties() {
    let profile = TriangleProfile {
        amplitude: 1e-4,
        period: 0.2,
        snap: 600.0,
    };
    let h = 1e-5;
    let t: Vec<f64> = (0..60_000).map(|k| k as f64 * h).collect();
    let r = generate_reference(&profile, &t).unwrap();
    let vmax = r.velocity.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(vmax >= 2.0 * profile.amplitude / profile.period && vmax <= 4.0 * profile.amplitude / profile.period);
    let pmin = r.position.iter().cloned().fold(f64::INFINITY, f64::min);
    let pmax = r.position.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(pmin.abs() < 1e-12 && (pmax - profile.amplitude).abs() < 1e-12);
    // central differences against the returned derivatives
    for k in (1..t.len() - 1).step_by(97) {
        let dv = (r.position[k + 1] - r.position[k - 1]) / (2.0 * h);
        let da = (r.velocity[k + 1] - r.velocity[k - 1]) / (2.0 * h);
        assert!((dv - r.velocity[k]).abs() <= 1e-6 * vmax);
        assert!((da - r.acceleration[k]).abs() <= 1e-6 * 600.0 * 0.2f64.powi(2));
    }
    let zero = generate_reference(&TriangleProfile { amplitude: 0.0, ..profile }, &t[..100]).unwrap();
    assert!(zero.position.iter().chain(&zero.velocity).chain(&zero.acceleration).all(|v| *v == 0.0));
}

proptest! {
    #[test]
    fn feedforward_is_linear(v in prop::collection::vec(-1.0f64..1.0, 1..20), k in -3.0f64..3.0) {
        let a: Vec<f64> = v.iter().map(|x| x * 0.5 - 0.1).collect();
        let f = feedforward(&v, &a, 0.5718, 0.9).unwrap();
        let scaled_v: Vec<f64> = v.iter().map(|x| k * x).collect();
        let scaled_a: Vec<f64> = a.iter().map(|x| k * x).collect();
        let g = feedforward(&scaled_v, &scaled_a, 0.5718, 0.9).unwrap();
        for (x, y) in f.iter().zip(&g) {
            prop_assert!((k * x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn stepped_sine_recovers_the_linear_loop() {
    let plant = Plant::stage();
    let l = stage_loop(Generation::First, linear(), &plant, true).unwrap();
    let freqs = vec![2.0, 10.0, 50.0, 100.0, 200.0, 500.0, 1000.0, 2000.0];
    let est = estimate_sensitivity(&l.closed_loop, &SweepSpec::new(freqs)).unwrap();
    for p in &est.points {
        assert!(p.settled, "{}", p.freq_hz);
        let (s, t) = linear_sensitivity(&l.closed_loop, 2.0 * PI * p.freq_hz).unwrap();
        assert!((p.s + p.t - 1.0).norm() < 1e-6);
        for (got, want) in [(p.s, s), (p.t, t)] {
            assert!((got.norm() / want.norm() - 1.0).abs() < 0.02, "{} Hz", p.freq_hz);
            assert!((got / want).arg().to_degrees().abs() < 1.0, "{} Hz", p.freq_hz);
        }
    }
    let mut csv = Vec::new();
    write_sensitivity(&est, &mut csv).unwrap();
    assert!(String::from_utf8(csv).unwrap().starts_with("freq_hz,S_re,S_im,T_re,T_im\n"));
}

#[test]
fn reset_lowers_the_complementary_peak() {
    let plant = Plant::stage();
    let freqs: Vec<f64> = (0..14).map(|i| 40.0 * 1.25f64.powi(i)).collect();
    let mut report = Vec::new();
    for generation in [Generation::First, Generation::Second] {
        let peak = |strategy| {
            let l = stage_loop(generation, strategy, &plant, true).unwrap();
            let est = estimate_sensitivity(&l.closed_loop, &SweepSpec::new(freqs.clone())).unwrap();
            est.t().unwrap().values.iter().fold(0.0f64, |m, t| m.max(t.norm()))
        };
        let (lin, rst) = (peak(linear()), peak(lag_reset()));
        report.push(format!("{generation:?}: |T| peak linear {lin:.3}, reset {rst:.3}"));
        assert!(rst < lin, "{}", report.join("; "));
    }
    println!("{}", report.join("; "));
}
