//! Acceptance criteria, one test each. Every test prints a single PASS/FAIL
//! line; run with `--nocapture` to see them.

mod common;

use std::f64::consts::PI;
use std::time::Instant;

use common::{clegg_df, rel_change, rel_rms_diff, verdict};
use crone_reset::crone::{synthesize, CroneDesignSpec, Generation};
use crone_reset::design::{design_pipeline, shaping_plant, PipelineOptions};
use crone_reset::df::{gdf_star, numeric_first_harmonic, theta_d};
use crone_reset::export::write_trace;
use crone_reset::lti::{FrequencyGrid, StateSpaceModel};
use crone_reset::plant::Plant;
use crone_reset::reset::{build, convex_combine, HybridSystem, ResetControllerModel, ResetKind, ResetStrategy};
use crone_reset::sim::scenarios::{self, lag_reset, linear, stage_loop, NOISE_FREQS_HZ};
use crone_reset::sim::{settling_time, simulate, SimulationConfig, SETTLING_FRACTION};
use crone_reset::stability::{
    build_closed_loop, default_spr_grid, h_beta_search, recheck, ClosedLoop, HBetaOutcome, SearchOptions,
};
use nalgebra::{DMatrix, DVector};

const GENS: [Generation; 2] = [Generation::First, Generation::Second];

fn clegg_model() -> ResetControllerModel {
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    ResetControllerModel {
        strategy: ResetStrategy {
            kind: ResetKind::Integrator,
            gamma: 0.0,
            p: 0.0,
        },
        base: StateSpaceModel::new(one(0.0), one(1.0), one(1.0), one(0.0)).unwrap(),
        n_r: 1,
    }
}

#[test]
fn c01_clegg_describing_function() {
    let start = Instant::now();
    let grid = FrequencyGrid::log_points(1e-1, 1e4, 26).unwrap();
    let df = gdf_star(&clegg_model(), &grid).unwrap();
    let mut worst_phase: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for (w, g) in grid.omegas().iter().zip(&df.response.values) {
        worst_phase = worst_phase.max((g.arg().to_degrees() + 38.1508).abs());
        worst_oracle = worst_oracle.max(((g - clegg_df(*w)) / clegg_df(*w)).norm());
    }
    let mag = df.response.magnitude_db();
    let w = grid.omegas();
    let mut worst_slope: f64 = 0.0;
    for i in 1..w.len() {
        let slope = (mag[i] - mag[i - 1]) / (w[i] / w[i - 1]).log10();
        worst_slope = worst_slope.max((slope + 20.0).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst_phase <= 0.1 && worst_slope <= 0.1 && worst_oracle < 1e-9 && elapsed.as_secs_f64() < 1.0;
    verdict(
        1,
        "Clegg DF phase and slope",
        pass,
        &format!("phase err {worst_phase:.2e} deg, slope err {worst_slope:.2e} dB/dec, vs closed form {worst_oracle:.1e}"),
        elapsed,
    );
}

#[test]
fn c02_linear_limit_exactness() {
    let start = Instant::now();
    let plant = Plant::stage();
    let gen1 = CroneDesignSpec::reference(Generation::First);
    let controller = synthesize(&gen1, &plant.zpk().unwrap()).unwrap();
    let model = build(&controller, ResetStrategy { gamma: 1.0, ..lag_reset() }).unwrap();
    let mut theta_norm: f64 = 0.0;
    for &w in FrequencyGrid::log_points(1.0, 1e5, 30).unwrap().omegas() {
        let th = theta_d(&model.base.a, &model.a_rho(), w).unwrap();
        theta_norm = theta_norm.max(th.norm());
    }

    let p_model = realized_plant(&plant);
    let lin = build_closed_loop(&HybridSystem::linear(model.base.clone()), &p_model).unwrap();
    let cfg = scenarios::tracking(&plant);
    let reference = simulate(&lin, &cfg).unwrap();
    let run = |strategy: ResetStrategy, prune: bool| {
        let hybrid = convex_combine(&model.with_strategy(strategy), prune).unwrap();
        let cl = build_closed_loop(&hybrid, &p_model).unwrap();
        let tr = simulate(&cl, &cfg).unwrap();
        let diff = [(&tr.e, &reference.e), (&tr.u, &reference.u), (&tr.y, &reference.y)]
            .into_iter()
            .map(|(a, b)| rel_rms_diff(a, b))
            .fold(0.0, f64::max);
        (diff, tr.events.len())
    };
    // γ = 1 keeps both copies and logs every crossing
    let (gamma_diff, events) = run(ResetStrategy { gamma: 1.0, ..lag_reset() }, true);
    let (p_diff, _) = run(ResetStrategy { p: 1.0, ..lag_reset() }, true);
    // kept zero-weight copy: its resets re-grid the integration, reported only
    let (p_kept_diff, _) = run(ResetStrategy { p: 1.0, ..lag_reset() }, false);
    let worst = gamma_diff.max(p_diff);
    let elapsed = start.elapsed();
    let pass = theta_norm < 1e-12 && worst < 1e-9 && events > 0 && elapsed.as_secs_f64() < 30.0;
    verdict(
        2,
        "linear limit",
        pass,
        &format!(
            "max |Theta_D| {theta_norm:.1e}, rel RMS diff gamma=1 {gamma_diff:.1e} ({events} crossings), p=1 {p_diff:.1e} (unpruned {p_kept_diff:.1e})"
        ),
        elapsed,
    );
}

fn realized_plant(plant: &Plant) -> StateSpaceModel {
    plant.realize().unwrap()
}

#[test]
fn c03_df_matches_simulation() {
    let start = Instant::now();
    let plant = Plant::stage().zpk().unwrap();
    let levels = [0.0, 0.25, 0.5, 1.0];
    let freqs = FrequencyGrid::log_points(2.0 * PI, 2.0 * PI * 5000.0, 12).unwrap();
    let (mut worst_mag, mut worst_phase): (f64, f64) = (0.0, 0.0);
    let mut cases = 0;
    for generation in GENS {
        let controller = synthesize(&CroneDesignSpec::reference(generation), &plant).unwrap();
        for kind in ResetKind::RECOMMENDED {
            for gamma in levels {
                for p in levels {
                    let model = build(&controller, ResetStrategy { kind, gamma, p }).unwrap();
                    let df = gdf_star(&model, &freqs).unwrap();
                    let sys = convex_combine(&model, true).unwrap();
                    for (&w, g) in freqs.omegas().iter().zip(&df.response.values) {
                        let n = numeric_first_harmonic(&sys, w, 16).unwrap();
                        worst_mag = worst_mag.max((n.norm() - g.norm()).abs() / g.norm());
                        worst_phase = worst_phase.max((n / g).arg().to_degrees().abs());
                        cases += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = worst_mag < 0.02 && worst_phase < 1.0 && elapsed.as_secs_f64() < 600.0;
    verdict(
        3,
        "DF vs simulated first harmonic",
        pass,
        &format!("{cases} points, worst magnitude {:.2e} %, worst phase {worst_phase:.2e} deg", 100.0 * worst_mag),
        elapsed,
    );
}

#[test]
fn c04_phase_margin_identity() {
    let start = Instant::now();
    let plant = Plant::stage().zpk().unwrap();
    let target = -125.0;
    let mut lines = Vec::new();
    let mut pass = true;
    for generation in GENS {
        let spec = CroneDesignSpec::reference(generation);
        let w = spec.wcg();
        let shaped = shaping_plant(&spec, &plant);
        let c = synthesize(&spec, &plant).unwrap();
        let exact = c.open_loop_exact(&shaped, w).unwrap();
        let approx = c.open_loop_approx(&shaped, w).unwrap();
        let design = design_pipeline(&spec, &plant, lag_reset(), &PipelineOptions::default()).unwrap();
        let df = design.open_loop_df(&shaped, w).unwrap();
        let (pe, pa, pd) = (exact.arg().to_degrees(), approx.arg().to_degrees(), df.arg().to_degrees());
        pass &= (pe - target).abs() <= 1.0 && (pa - target).abs() <= 2.5 && (pd - target).abs() <= 1.0;
        pass &= (exact.norm() - 1.0).abs() < 1e-9 && (df.norm() - 1.0).abs() < 1e-6;
        lines.push(format!("{generation:?}: exact {pe:.3}, N=4 {pa:.3}, DF reset {pd:.3} deg"));
    }
    let elapsed = start.elapsed();
    pass &= elapsed.as_secs_f64() < 10.0;
    verdict(4, "phase at crossover", pass, &lines.join("; "), elapsed);
}

#[test]
fn c05_nu_and_nu_star() {
    let start = Instant::now();
    let plant = Plant::stage().zpk().unwrap();
    let spec = CroneDesignSpec::reference(Generation::Second);
    let strategy = ResetStrategy {
        kind: ResetKind::Integrator,
        gamma: 0.5,
        p: 0.5,
    };
    let d = design_pipeline(&spec, &plant, strategy, &PipelineOptions::default()).unwrap();
    let (nu, nu_star) = (d.nu(), d.nu_star());
    let elapsed = start.elapsed();
    let pass = (nu - 1.336).abs() <= 0.01 && (nu_star - 1.494).abs() <= 0.01 && nu_star > nu;
    verdict(
        5,
        "CRONE-2 nu and nu*",
        pass,
        &format!("nu {nu:.4}, nu* {nu_star:.4}, phase lead {:.3} deg", d.phi_r.to_degrees()),
        elapsed,
    );
}

#[test]
fn c06_tracking_direction() {
    let start = Instant::now();
    let plant = Plant::stage();
    let cfg = scenarios::tracking(&plant);
    let mut pass = true;
    let mut lines = Vec::new();
    for generation in GENS {
        let lin = stage_loop(generation, linear(), &plant, true).unwrap();
        let rst = stage_loop(generation, lag_reset(), &plant, true).unwrap();
        let a = simulate(&lin.closed_loop, &cfg).unwrap().metrics.rms_error;
        let b = simulate(&rst.closed_loop, &cfg).unwrap().metrics.rms_error;
        let gain = 1.0 - b / a;
        pass &= gain >= 0.05;
        lines.push(format!("{generation:?}: linear {:.2} nm, reset {:.2} nm ({:.1}% lower)", a * 1e9, b * 1e9, 100.0 * gain));
    }
    let elapsed = start.elapsed();
    pass &= elapsed.as_secs_f64() < 300.0;
    verdict(6, "tracking RMS direction", pass, &lines.join("; "), elapsed);
}

#[test]
fn c07_noise_attenuation_direction() {
    let start = Instant::now();
    let plant = Plant::stage();
    let mut pass = true;
    let mut lines = Vec::new();
    for generation in GENS {
        let lin = stage_loop(generation, linear(), &plant, true).unwrap();
        let rst = stage_loop(generation, lag_reset(), &plant, true).unwrap();
        let mut ok = 0;
        let mut db = Vec::new();
        for f in NOISE_FREQS_HZ {
            let cfg = scenarios::noise(f);
            let a = simulate(&lin.closed_loop, &cfg).unwrap().metrics.avg_power;
            let b = simulate(&rst.closed_loop, &cfg).unwrap().metrics.avg_power;
            let r = 10.0 * (a / b).log10();
            if (0.5..=8.0).contains(&r) {
                ok += 1;
            }
            db.push(format!("{r:.2}"));
        }
        pass &= ok >= 7;
        lines.push(format!("{generation:?}: {ok}/8 in band, dB [{}]", db.join(", ")));
    }
    let elapsed = start.elapsed();
    pass &= elapsed.as_secs_f64() < 600.0;
    verdict(7, "noise attenuation direction", pass, &lines.join("; "), elapsed);
}

#[test]
fn c08_settling_metric() {
    let start = Instant::now();
    let (tau, h) = (0.013, 5e-5);
    let t: Vec<f64> = (0..20_000).map(|k| k as f64 * h).collect();
    let y: Vec<f64> = t.iter().map(|t| 4e-7 * (-t / tau).exp()).collect();
    let s = settling_time(&t, &y, SETTLING_FRACTION);
    let synthetic_err = (s.time - tau * (1.0f64 / 0.15).ln()).abs();
    let mut pass = s.settled && synthetic_err <= h;

    let plant = Plant::stage();
    let mut lines = Vec::new();
    for generation in GENS {
        let mut row = Vec::new();
        for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let l = stage_loop(generation, ResetStrategy { p, ..lag_reset() }, &plant, true).unwrap();
            let m = simulate(&l.closed_loop, &scenarios::pulse()).unwrap().metrics;
            pass &= m.peak.is_finite() && m.peak > 0.0;
            if generation == Generation::First && p == 1.0 {
                // fixture calibration
                pass &= (m.peak - 530e-9).abs() < 0.02 * 530e-9;
            }
            let settle = m.settling_time.map_or("never".to_string(), |s| format!("{:.1} ms", s * 1e3));
            row.push(format!("p={p}: {:.0} nm / {settle}", m.peak * 1e9));
        }
        lines.push(format!("{generation:?} [{}]", row.join(", ")));
    }
    let elapsed = start.elapsed();
    pass &= elapsed.as_secs_f64() < 300.0;
    verdict(
        8,
        "settling metric",
        pass,
        &format!("synthetic err {synthetic_err:.1e} s; {}", lines.join("; ")),
        elapsed,
    );
}

fn clegg_first_order_loop() -> ClosedLoop {
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    let h = HybridSystem {
        ss: clegg_model().base,
        jump: DVector::from_element(1, 0.0),
        reset_states: vec![0],
    };
    let plant = StateSpaceModel::new(one(-1.0), one(1.0), one(1.0), one(0.0)).unwrap();
    build_closed_loop(&h, &plant).unwrap()
}

#[test]
fn c09_h_beta_certification() {
    let start = Instant::now();
    let grid = default_spr_grid();
    let fine = grid.refine(10);
    let opts = SearchOptions::default();
    let plant = Plant::stage();
    let p_model = realized_plant(&plant);
    let mut pass = true;
    let mut notes = Vec::new();

    // (a) identity jumps: verdict follows the eigenvalues
    let mut agree = 0;
    let mut total = 0;
    for generation in GENS {
        let c = synthesize(&CroneDesignSpec::reference(generation), &plant.zpk().unwrap()).unwrap();
        for scale in [1.0, 1e3] {
            let model = build(&c.with_c0(c.c0 * scale), ResetStrategy { gamma: 1.0, ..lag_reset() }).unwrap();
            let cl = build_closed_loop(&convex_combine(&model, false).unwrap(), &p_model).unwrap();
            let certified = matches!(h_beta_search(&cl, &grid, &opts), Ok(HBetaOutcome::Certified(_)));
            total += 1;
            if certified == cl.is_hurwitz() {
                agree += 1;
            }
        }
    }
    pass &= agree == total;
    notes.push(format!("(a) {agree}/{total} agree"));

    // (b) Clegg integrator with 1/(s+1)
    let clegg = clegg_first_order_loop();
    let clegg_out = h_beta_search(&clegg, &grid, &opts).unwrap();
    pass &= clegg_out.certificate().is_some();
    notes.push(format!("(b) Clegg {}", if clegg_out.certificate().is_some() { "certified" } else { "not certified" }));

    // (c) every certificate survives a 10x finer grid
    let mut outcomes = vec![clegg_out];
    let mut loops = vec![clegg];
    for generation in GENS {
        for strategy in [lag_reset(), ResetStrategy { gamma: 0.0, p: 0.0, ..lag_reset() }] {
            let l = stage_loop(generation, strategy, &plant, true).unwrap();
            if let Ok(o) = h_beta_search(&l.closed_loop, &grid, &opts) {
                outcomes.push(o);
                loops.push(l.closed_loop);
            }
        }
    }
    let mut rechecked = 0;
    for (cl, o) in loops.iter().zip(&outcomes) {
        if let Some(c) = o.certificate() {
            let again = recheck(cl, c, &fine).unwrap();
            pass &= again.is_valid();
            rechecked += 1;
        }
    }
    notes.push(format!("(c) {rechecked}/{} searches certified, all re-checked", outcomes.len()));
    let elapsed = start.elapsed();
    pass &= elapsed.as_secs_f64() < 120.0;
    verdict(9, "H_beta certification", pass, &notes.join("; "), elapsed);
}

/// Every metric of the scenario runs, at the default step and at half of it.
fn scenario_metrics(step_scale: f64) -> Vec<(String, f64)> {
    let plant = Plant::stage();
    let mut out = Vec::new();
    for generation in GENS {
        for (label, strategy) in [("linear", linear()), ("reset", lag_reset())] {
            let l = stage_loop(generation, strategy, &plant, true).unwrap();
            let mut runs: Vec<(String, SimulationConfig)> = vec![
                ("tracking".into(), scenarios::tracking(&plant)),
                ("pulse".into(), scenarios::pulse()),
            ];
            for f in NOISE_FREQS_HZ {
                runs.push((format!("noise {f} Hz"), scenarios::noise(f)));
            }
            for (name, cfg) in runs {
                let cfg = cfg.with_step(cfg.step * step_scale);
                let m = simulate(&l.closed_loop, &cfg).unwrap().metrics;
                let tag = format!("{generation:?} {label} {name}");
                out.push((format!("{tag} rms"), m.rms_error));
                out.push((format!("{tag} power"), m.avg_power));
                out.push((format!("{tag} peak"), m.peak));
                out.push((format!("{tag} settling"), m.settling_time.unwrap_or(f64::INFINITY)));
            }
        }
    }
    out
}

#[test]
fn c10_numerical_hygiene() {
    let start = Instant::now();
    let full = scenario_metrics(1.0);
    let half = scenario_metrics(0.5);
    let mut worst = (String::new(), 0.0f64);
    for ((name, a), (_, b)) in full.iter().zip(&half) {
        let change = if a == b { 0.0 } else { rel_change(*b, *a) };
        if change > worst.1 || change.is_nan() {
            worst = (name.clone(), change);
        }
    }

    let plant = Plant::stage();
    let l = stage_loop(Generation::First, lag_reset(), &plant, true).unwrap();
    let csv = || {
        let mut buf = Vec::new();
        write_trace(&simulate(&l.closed_loop, &scenarios::tracking(&plant)).unwrap(), &mut buf).unwrap();
        buf
    };
    let identical = csv() == csv();
    let elapsed = start.elapsed();
    let pass = worst.1 < 1e-3 && identical;
    verdict(
        10,
        "step halving and determinism",
        pass,
        &format!(
            "{} metrics, largest change {:.2e} ({}), re-run CSV identical: {identical}",
            full.len(),
            worst.1,
            worst.0
        ),
        elapsed,
    );
}
