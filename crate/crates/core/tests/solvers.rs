use cutcd::solvers::{cutcd_update_factor, gcd_update_factor};
use cutcd::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ALL_KINDS: [SolverKind; 5] = [
    SolverKind::CutCd,
    SolverKind::CutCdSc,
    SolverKind::Gcd,
    SolverKind::CcdPp,
    SolverKind::Als,
];

fn planted(dims: (usize, usize, usize, usize), density: f64, rank: usize, seed: u64) -> SynthData {
    synth_generate(&SynthSpec {
        mode_lengths: dims,
        density,
        rank,
        value_mode: ValueMode::Planted,
        noise_sigma: 0.0,
        seed,
    })
    .unwrap()
}

fn random_values(dims: (usize, usize, usize, usize), density: f64, seed: u64) -> SynthData {
    synth_generate(&SynthSpec {
        mode_lengths: dims,
        density,
        rank: 1,
        value_mode: ValueMode::Random,
        noise_sigma: 0.0,
        seed,
    })
    .unwrap()
}

fn cfg_for(kind: SolverKind, rank: usize, iters: usize, seed: u64) -> SolverConfig {
    SolverConfig {
        max_iters: iters,
        tol: 0.0,
        seed,
        lambda: if kind == SolverKind::CutCdSc { 0.3 } else { 0.0 },
        ..SolverConfig::with_rank(rank)
    }
}

fn max_abs_diff(a: &CoupledModel, b: &CoupledModel) -> f64 {
    Factor::ALL
        .iter()
        .flat_map(|&f| {
            a.factor(f)
                .as_slice()
                .iter()
                .zip(b.factor(f).as_slice())
                .map(|(x, y)| (x - y).abs())
                .collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

#[test]
fn exact_model_is_a_fixed_point() {
    let data = planted((9, 8, 7, 6), 1.0, 3, 21);
    let truth = data.planted.clone().unwrap();
    for kind in [SolverKind::CutCd, SolverKind::Gcd, SolverKind::CcdPp, SolverKind::Als] {
        let cfg = cfg_for(kind, 3, 1, 0);
        let fit = fit_from(kind, &data.tensor, &data.matrix, &cfg, truth.clone()).unwrap();
        let d = max_abs_diff(&fit.model, &truth);
        assert!(d <= 1e-8, "{kind}: moved by {d:e}");
    }
}

#[test]
fn gcd_makes_no_updates_at_the_exact_model() {
    let data = planted((9, 8, 7, 6), 1.0, 3, 22);
    let mut m = data.planted.clone().unwrap();
    let cfg = SolverConfig::with_rank(3);
    let mut counters = Counters::default();
    for f in Factor::ALL {
        gcd_update_factor(&data.tensor, &data.matrix, &mut m, f, &cfg, &mut counters).unwrap();
    }
    assert_eq!(counters.total_elements(), 0);
    assert_eq!(counters.total_gradients(), 0);
}

#[test]
fn constant_importance_selects_whole_column_once() {
    // Zero data and a zero model give every element importance 0.
    let x = SparseTensor3::new((4, 3, 2), vec![(0, 0, 0, 0.0), (3, 2, 1, 0.0)]).unwrap();
    let y = Matrix::zeros(4, 3);
    let mut m = CoupledModel::zeros((4, 3, 2, 3), 1);
    let mut counters = Counters::default();
    let mask = cutcd_update_factor(&x, &y, &mut m, Factor::U1, &SolverConfig::with_rank(1), &mut counters).unwrap();
    assert_eq!(mask.columns.len(), 1);
    assert_eq!(mask.columns[0].normalized, vec![1.0; 4]);
    assert_eq!(mask.columns[0].selected, vec![0, 1, 2, 3]);
    assert_eq!(counters.element_updates[Factor::U1.index()], 4);
    assert_eq!(counters.gradient_updates[Factor::U1.index()], 4);
}

#[test]
fn cutcd_selection_matches_brute_force_every_column() {
    let data = random_values((15, 12, 10, 8), 0.2, 23);
    let cfg = SolverConfig::with_rank(4);
    let mut m = CoupledModel::random((15, 12, 10, 8), 4, 1.0, &mut ChaCha8Rng::seed_from_u64(5));
    let mut below_full = 0;
    for _ in 0..5 {
        for f in Factor::ALL {
            let mut counters = Counters::default();
            let mask = cutcd_update_factor(&data.tensor, &data.matrix, &mut m, f, &cfg, &mut counters).unwrap();
            assert_eq!(mask.target, f);
            let rows = m.factor(f).rows();
            for col in &mask.columns {
                let n = &col.normalized;
                assert_eq!(n.len(), rows);
                let mean = n.iter().sum::<f64>() / n.len() as f64;
                let brute: Vec<usize> = (0..rows).filter(|&j| n[j] >= mean).collect();
                assert_eq!(col.selected, brute);
                assert!(col.selected.len() <= rows);
                if col.selected.len() < rows {
                    below_full += 1;
                }
            }
            assert_eq!(counters.element_updates, counters.gradient_updates);
            assert_eq!(counters.total_elements(), mask.total_selected() as u64);
            assert!(counters.element_updates[f.index()] <= (rows * 4) as u64);
        }
    }
    assert!(below_full > 0);
}

#[test]
fn objective_traces_are_monotone_and_factors_nonnegative() {
    let data = random_values((10, 9, 8, 6), 0.3, 24);
    for kind in ALL_KINDS {
        for iters in 1..=4 {
            let fit = fit(kind, &data.tensor, &data.matrix, &cfg_for(kind, 3, iters, 7)).unwrap();
            assert!(fit.model.is_nonnegative(), "{kind} after {iters} iterations");
            assert_eq!(fit.traces.len(), iters + 1);
            if kind != SolverKind::Als {
                for w in fit.traces.windows(2) {
                    assert!(w[1].objective <= w[0].objective + 1e-9, "{kind}");
                }
            }
        }
    }
}

#[test]
fn same_seed_gives_identical_traces() {
    let data = random_values((10, 9, 8, 6), 0.3, 25);
    for kind in ALL_KINDS {
        let cfg = cfg_for(kind, 3, 6, 11);
        let a = fit(kind, &data.tensor, &data.matrix, &cfg).unwrap();
        let b = fit(kind, &data.tensor, &data.matrix, &cfg).unwrap();
        assert_eq!(a.model, b.model, "{kind}");
        for (s, t) in a.traces.iter().zip(&b.traces) {
            assert_eq!(s.objective.to_bits(), t.objective.to_bits(), "{kind}");
            assert_eq!(s.per_factor, t.per_factor, "{kind}");
        }
    }
}

#[test]
fn syn1_style_instance_decreases_strictly_for_ten_iterations() {
    let data = random_values((30, 30, 30, 30), 0.01, 26);
    let fit = fit_cutcd(&data.tensor, &data.matrix, &cfg_for(SolverKind::CutCd, 5, 10, 3)).unwrap();
    for w in fit.traces.windows(2) {
        assert!(w[1].objective < w[0].objective, "iteration {}", w[1].iter);
    }
}

#[test]
fn zero_data_drives_objective_down() {
    let x = SparseTensor3::new((6, 5, 4), vec![(0, 0, 0, 0.0), (5, 4, 3, 0.0), (2, 2, 2, 0.0)]).unwrap();
    let y = Matrix::zeros(6, 3);
    let fit = fit_cutcd(&x, &y, &cfg_for(SolverKind::CutCd, 2, 50, 1)).unwrap();
    for w in fit.traces.windows(2) {
        assert!(w[1].objective <= w[0].objective + 1e-9);
    }
    let f0 = fit.traces[0].objective;
    assert!(fit.final_trace().objective < 1e-3 * f0);
}

#[test]
fn zero_lambda_sc_matches_plain_cutcd() {
    let data = random_values((10, 9, 8, 6), 0.3, 27);
    let cfg = cfg_for(SolverKind::CutCd, 3, 8, 4);
    let a = fit_cutcd(&data.tensor, &data.matrix, &cfg).unwrap();
    let b = fit_cutcd_sc(&data.tensor, &data.matrix, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    for (s, t) in a.traces.iter().zip(&b.traces) {
        assert_eq!(s.objective.to_bits(), t.objective.to_bits());
    }
}

#[test]
fn huge_lambda_collapses_factors() {
    let data = planted((10, 9, 8, 6), 1.0, 2, 28);
    let scale = data.tensor.norm_sq().sqrt();
    let cfg = SolverConfig {
        lambda: 1e3 * scale,
        ..cfg_for(SolverKind::CutCd, 2, 30, 9)
    };
    let fit = fit_cutcd_sc(&data.tensor, &data.matrix, &cfg).unwrap();
    for f in Factor::ALL {
        let max = fit.model.factor(f).as_slice().iter().cloned().fold(0.0, f64::max);
        assert!(max < 1e-6, "{f} max {max:e}");
    }
}

#[test]
fn sc_objective_is_recorded_for_cutcd_sc() {
    let data = random_values((8, 7, 6, 5), 0.4, 29);
    let cfg = cfg_for(SolverKind::CutCdSc, 2, 3, 2);
    let fit = fit_cutcd_sc(&data.tensor, &data.matrix, &cfg).unwrap();
    let p = ScPenalty::with_lambda(cfg.lambda).unwrap();
    let want = objective_sc(&data.tensor, &data.matrix, &fit.model, &p).unwrap();
    assert!((fit.final_trace().objective - want).abs() <= 1e-12 * want);
}

#[test]
fn gcd_counts_r_gradient_updates_per_element() {
    let data = random_values((10, 9, 8, 6), 0.3, 30);
    for rank in [1, 3, 6] {
        let fit = fit_gcd(&data.tensor, &data.matrix, &cfg_for(SolverKind::Gcd, rank, 3, 5)).unwrap();
        for t in &fit.traces[1..] {
            assert_eq!(t.gradient_updates, rank as u64 * t.element_updates);
            for f in Factor::ALL {
                let i = f.index();
                assert_eq!(
                    t.per_factor.gradient_updates[i],
                    rank as u64 * t.per_factor.element_updates[i]
                );
            }
        }
    }
}

#[test]
fn gcd_inner_cap_is_respected() {
    let data = random_values((10, 9, 8, 6), 0.3, 31);
    let cfg = SolverConfig {
        gcd_max_inner: Some(1),
        ..cfg_for(SolverKind::Gcd, 4, 2, 5)
    };
    let fit = fit_gcd(&data.tensor, &data.matrix, &cfg).unwrap();
    let rows = [10u64, 9, 8, 6];
    for t in &fit.traces[1..] {
        for f in Factor::ALL {
            assert!(t.per_factor.element_updates[f.index()] <= rows[f.index()]);
        }
    }
}

#[test]
fn gcd_reaches_nrv_close_to_cutcd() {
    let data = planted((15, 15, 15, 8), 1.0, 3, 32);
    let cut = fit_cutcd(&data.tensor, &data.matrix, &cfg_for(SolverKind::CutCd, 3, 150, 40)).unwrap();
    let gcd = fit_gcd(&data.tensor, &data.matrix, &cfg_for(SolverKind::Gcd, 3, 150, 40)).unwrap();
    let (c, g) = (cut.final_trace().nrv, gcd.final_trace().nrv);
    assert!(g <= 2.0 * c.max(1e-8), "gcd {g:e} vs cut-cd {c:e}");
}

#[test]
fn ccdpp_inner_iterations_scale_element_updates() {
    let data = random_values((10, 9, 8, 6), 0.3, 33);
    let one = fit_ccdpp(&data.tensor, &data.matrix, &cfg_for(SolverKind::CcdPp, 3, 3, 6)).unwrap();
    let three = fit_ccdpp(
        &data.tensor,
        &data.matrix,
        &SolverConfig {
            ccd_inner_iters: 3,
            ..cfg_for(SolverKind::CcdPp, 3, 3, 6)
        },
    )
    .unwrap();
    let per_iter = (10 + 9 + 8 + 6) * 3;
    for (a, b) in one.traces[1..].iter().zip(&three.traces[1..]) {
        assert_eq!(a.element_updates, per_iter);
        assert_eq!(b.element_updates, 3 * a.element_updates);
    }
}

#[test]
fn ccdpp_recovers_planted_instance() {
    let data = planted((15, 15, 15, 8), 1.0, 3, 34);
    let fit = fit_ccdpp(&data.tensor, &data.matrix, &cfg_for(SolverKind::CcdPp, 3, 200, 41)).unwrap();
    assert!(fit.final_trace().nrv <= 1e-2);
}

#[test]
fn als_recovers_rank_one_instance() {
    let data = planted((12, 11, 10, 9), 1.0, 1, 35);
    let fit = fit_als(&data.tensor, &data.matrix, &cfg_for(SolverKind::Als, 1, 50, 42)).unwrap();
    assert!(fit.final_trace().nrv <= 1e-4, "nrv {:e}", fit.final_trace().nrv);
}

#[test]
fn tolerance_stops_early() {
    let data = planted((10, 9, 8, 6), 1.0, 2, 36);
    let cfg = SolverConfig {
        tol: 1e-3,
        ..cfg_for(SolverKind::CutCd, 2, 500, 1)
    };
    let fit = fit_cutcd(&data.tensor, &data.matrix, &cfg).unwrap();
    assert!(fit.traces.len() < 501);
    let n = fit.traces.len();
    let (a, b) = (fit.traces[n - 2].objective, fit.traces[n - 1].objective);
    assert!((a - b).abs() / a.max(1e-30) < 1e-3);
}

#[test]
fn trace_timing_splits_add_up() {
    let data = random_values((10, 9, 8, 6), 0.3, 37);
    for kind in ALL_KINDS {
        let fit = fit(kind, &data.tensor, &data.matrix, &cfg_for(kind, 2, 3, 1)).unwrap();
        let t0 = &fit.traces[0];
        assert_eq!((t0.iter, t0.element_updates, t0.gradient_updates), (0, 0, 0));
        for t in &fit.traces[1..] {
            assert!(t.mttkrp_seconds >= 0.0 && t.update_seconds >= 0.0);
            assert!(t.mttkrp_seconds <= t.wall_seconds + 1e-12);
        }
    }
}

#[test]
fn bad_inputs_are_rejected() {
    let data = random_values((6, 5, 4, 3), 0.5, 38);
    let wrong_y = Matrix::zeros(5, 3);
    assert!(matches!(
        fit_cutcd(&data.tensor, &wrong_y, &SolverConfig::with_rank(2)),
        Err(Error::Dimension(_))
    ));
    assert!(fit_cutcd(&data.tensor, &data.matrix, &SolverConfig::with_rank(0)).is_err());
    let wrong_rank = CoupledModel::zeros((6, 5, 4, 3), 3);
    assert!(fit_from(
        SolverKind::CutCd,
        &data.tensor,
        &data.matrix,
        &SolverConfig::with_rank(2),
        wrong_rank
    )
    .is_err());
}
