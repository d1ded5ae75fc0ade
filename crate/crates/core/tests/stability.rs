use crone_reset::crone::{synthesize, CroneDesignSpec, Generation};
use crone_reset::lti::StateSpaceModel;
use crone_reset::plant::Plant;
use crone_reset::reset::{build, convex_combine, HybridSystem, ResetStrategy};
use crone_reset::sim::scenarios::{lag_reset, stage_loop};
use crone_reset::stability::{
    build_closed_loop, certify, default_spr_grid, h_beta_search, recheck, CertificateReport, ClosedLoop,
    HBetaOutcome, SearchOptions, Verdict,
};
use crone_reset::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn first_order_plant() -> StateSpaceModel {
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    StateSpaceModel::new(one(-1.0), one(1.0), one(1.0), one(0.0)).unwrap()
}

fn stage_loops() -> Vec<ClosedLoop> {
    let plant = Plant::stage();
    let mut out = Vec::new();
    for generation in [Generation::First, Generation::Second] {
        for (gamma, p) in [(0.5, 0.5), (0.0, 0.0), (0.5, 0.9), (0.2, 0.7)] {
            out.push(stage_loop(generation, ResetStrategy { gamma, p, ..lag_reset() }, &plant, true).unwrap().closed_loop);
        }
    }
    out
}

#[test]
fn linear_limit_matches_eigenvalues() {
    let plant = Plant::stage();
    let p_model = plant.realize().unwrap();
    for generation in [Generation::First, Generation::Second] {
        let c = synthesize(&CroneDesignSpec::reference(generation), &plant.zpk().unwrap()).unwrap();
        for scale in [0.01, 1.0, 30.0, 1e4] {
            let model = build(&c.with_c0(c.c0 * scale), ResetStrategy { gamma: 1.0, p: 1.0, ..lag_reset() }).unwrap();
            for prune in [false, true] {
                let cl = build_closed_loop(&convex_combine(&model, prune).unwrap(), &p_model).unwrap();
                let report = certify(&cl, &default_spr_grid(), &SearchOptions::default()).unwrap();
                assert_eq!(report.hurwitz, cl.is_hurwitz());
                assert_eq!(report.verdict == Verdict::Certified, cl.is_hurwitz(), "{generation:?} x{scale}");
            }
        }
    }
}

#[test]
fn certificates_are_sound_and_survive_refinement() {
    let grid = default_spr_grid();
    let fine = grid.refine(10);
    let mut certified = 0;
    for cl in stage_loops() {
        match h_beta_search(&cl, &grid, &SearchOptions::default()) {
            Ok(HBetaOutcome::Certified(c)) => {
                assert!(cl.is_hurwitz() && c.min_real_part > 0.0 && c.high_frequency > 0.0);
                assert!(recheck(&cl, &c, &fine).unwrap().is_valid());
                certified += 1;
            }
            Ok(HBetaOutcome::NotFound(best)) => {
                assert!(!best.is_valid());
                // a finer grid cannot do better than the coarse best
                if let Ok(HBetaOutcome::Certified(c)) = h_beta_search(&cl, &fine, &SearchOptions::default()) {
                    assert!(c.min_real_part > best.min_real_part);
                }
            }
            Err(Error::NotHurwitz { .. }) => assert!(!cl.is_hurwitz()),
            Err(e) => panic!("{e}"),
        }
    }
    assert!(certified > 0);
}

#[test]
fn two_reset_states() {
    let h = HybridSystem {
        ss: StateSpaceModel::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -2.0]),
            DMatrix::from_column_slice(2, 1, &[1.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
            DMatrix::zeros(1, 1),
        )
        .unwrap(),
        jump: DVector::from_element(2, 0.0),
        reset_states: vec![0, 1],
    };
    let cl = build_closed_loop(&h, &first_order_plant()).unwrap();
    assert!(cl.is_hurwitz());
    let grid = default_spr_grid();
    let out = h_beta_search(&cl, &grid, &SearchOptions::default()).unwrap();
    let c = out.candidate();
    assert_eq!((c.beta.len(), c.p_rho.nrows()), (2, 2));
    assert!(c.p_rho.clone().cholesky().is_some());
    if let Some(c) = out.certificate() {
        assert!(recheck(&cl, c, &grid.refine(10)).unwrap().is_valid());
    }
}

#[test]
fn report_round_trips() {
    let cl = build_closed_loop(
        &HybridSystem {
            ss: StateSpaceModel::new(
                DMatrix::zeros(1, 1),
                DMatrix::from_element(1, 1, 1.0),
                DMatrix::from_element(1, 1, 1.0),
                DMatrix::zeros(1, 1),
            )
            .unwrap(),
            jump: DVector::from_element(1, 0.0),
            reset_states: vec![0],
        },
        &first_order_plant(),
    )
    .unwrap();
    let r = certify(&cl, &default_spr_grid(), &SearchOptions::default()).unwrap();
    assert_eq!(r.verdict, Verdict::Certified);
    let json = serde_json::to_value(&r).unwrap();
    for key in ["hurwitz", "beta", "p_rho", "min_real_part", "grid_points", "verdict"] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert_eq!(serde_json::from_value::<CertificateReport>(json).unwrap(), r);
}

proptest! {
    #[test]
    fn jumps_never_raise_the_reset_energy(
        p in prop::collection::vec(0.01f64..100.0, 3),
        x in prop::collection::vec(-10.0f64..10.0, 2),
        gamma in 0.0f64..=1.0,
    ) {
        // any symmetric positive definite P_ρ
        let l = DMatrix::from_row_slice(2, 2, &[p[0], 0.0, p[1] - 50.0, p[2]]);
        let pr = &l * l.transpose();
        let x = DVector::from_vec(x);
        let v = |z: &DVector<f64>| (z.transpose() * &pr * z)[(0, 0)];
        prop_assert!(v(&(&x * gamma)) <= v(&x) + 1e-9 * v(&x).abs());
    }
}
