mod planted;

use cs_scan_core::bpfa::{
    init_state, run_from_state, run_inference, BatchSchedule, BpfaHyperparams, InferenceConfig, Mode, PatchData,
    SupportUpdate,
};
use cs_scan_core::imaging::psnr;
use cs_scan_core::phantom::{lattice_phantom, PhantomParams};
use cs_scan_core::rng::derived_rng;
use cs_scan_core::sampling::uds_plan;
use cs_scan_core::{Image, Mask, PatchGrid};
use planted::planted;

fn small_problem(seed: u64) -> (Image, Mask, PatchGrid, PatchData) {
    let truth = lattice_phantom(&PhantomParams::new(32, 32)).unwrap();
    let mask = uds_plan(32, 32, 0.5, 1.0, seed).unwrap().mask().unwrap();
    let obs = mask.apply(&truth).unwrap();
    let grid = PatchGrid::new(32, 32, 6, 2).unwrap();
    let data = PatchData::from_observation(&obs, &mask, &grid, false).unwrap();
    (truth, mask, grid, data)
}

fn config(support: SupportUpdate, epochs: usize, seed: u64) -> InferenceConfig {
    InferenceConfig {
        hyper: BpfaHyperparams::with_atoms(12),
        schedule: BatchSchedule {
            epochs,
            seed,
            ..Default::default()
        },
        support,
        seed,
        ..Default::default()
    }
}

#[test]
fn full_batch_em_never_decreases_the_objective() {
    let (_, _, _, data) = small_problem(1);
    for support in [SupportUpdate::Greedy, SupportUpdate::Collapsed, SupportUpdate::SingleSite] {
        let result = run_inference(&data, &config(support, 15, 4)).unwrap();
        for pair in result.trace.windows(2) {
            let (a, b) = (pair[0].objective, pair[1].objective);
            assert!(b >= a - 1e-8 * a.abs(), "{support}: objective fell from {a} to {b} at epoch {}", pair[1].epoch);
        }
    }
}

#[test]
fn same_seed_same_result() {
    let (_, _, _, data) = small_problem(2);
    for mode in [Mode::Em, Mode::Gibbs] {
        let cfg = InferenceConfig {
            mode,
            schedule: BatchSchedule {
                batch_size: Some(50),
                epochs: 3,
                seed: 8,
            },
            ..config(SupportUpdate::Greedy, 3, 8)
        };
        let a = run_inference(&data, &cfg).unwrap();
        let b = run_inference(&data, &cfg).unwrap();
        assert_eq!(a.state.dictionary(), b.state.dictionary());
        assert_eq!(a.state.pi(), b.state.pi());
        assert_eq!(a.trace, b.trace);
        let c = run_inference(&data, &InferenceConfig { seed: 9, ..cfg }).unwrap();
        assert_ne!(a.state.dictionary(), c.state.dictionary());
    }
}

#[test]
fn unobserved_values_never_reach_the_model() {
    let (truth, mask, grid, clean) = small_problem(3);
    let garbage = Image::from_fn(32, 32, |r, c| {
        if mask.is_sampled(r, c) { truth.get(r, c) } else { 1e3 * ((r * 31 + c * 17) % 7) as f64 - 2e3 }
    });
    let dirty = PatchData::from_observation(&garbage, &mask, &grid, false).unwrap();
    for mode in [Mode::Em, Mode::Gibbs] {
        let cfg = InferenceConfig {
            mode,
            ..config(SupportUpdate::Greedy, 4, 5)
        };
        let a = run_inference(&clean, &cfg).unwrap();
        let b = run_inference(&dirty, &cfg).unwrap();
        assert_eq!(a.state.dictionary(), b.state.dictionary());
        assert_eq!(a.trace, b.trace);
    }
}

#[test]
fn relabelling_atoms_commutes_with_inference() {
    let (_, _, _, data) = small_problem(4);
    let cfg = config(SupportUpdate::Greedy, 4, 6);
    let state = init_state(&data, &cfg.hyper, 6).unwrap();
    let perm: Vec<usize> = (0..12).map(|j| (j * 5 + 3) % 12).collect();
    let mut permuted = state.clone();
    permuted.permute_atoms(&perm).unwrap();

    let a = run_from_state(&data, state, &cfg).unwrap().state;
    let b = run_from_state(&data, permuted, &cfg).unwrap().state;
    let p = a.patch_len();
    for (new, &old) in perm.iter().enumerate() {
        for (x, y) in a.atom(old).iter().zip(b.atom(new)) {
            assert!((x - y).abs() < 1e-9, "atom {old} -> {new}: {x} vs {y}");
        }
        assert!((a.pi()[old] - b.pi()[new]).abs() < 1e-12);
        for i in 0..a.patch_count() {
            assert_eq!(a.z(i, old), b.z(i, new));
        }
    }
    assert_eq!(p, b.patch_len());
    assert!((a.gamma_n() - b.gamma_n()).abs() < 1e-9 * a.gamma_n());
}

#[test]
fn planted_dictionary_is_recovered() {
    let img = planted(64, 0, 0.0);
    let grid = PatchGrid::new(64, 64, 8, 8).unwrap();
    let data = PatchData::from_observation(&img, &Mask::full(64, 64), &grid, true).unwrap();
    let cfg = InferenceConfig {
        hyper: BpfaHyperparams::with_atoms(16),
        schedule: BatchSchedule {
            epochs: 100,
            ..Default::default()
        },
        restarts: 5,
        ..Default::default()
    };
    let result = run_inference(&data, &cfg).unwrap();
    let rec = result.state.reconstruct(&data, &grid).unwrap();
    assert!(psnr(&img, &rec, 1.0).unwrap() > 40.0);
    assert_eq!(result.state.pi().iter().filter(|&&p| p > 0.5).count(), 3);
}

#[test]
fn noise_precision_is_recovered() {
    // sigma = 0.05 gives gamma_n = 400.
    let img = planted(256, 1, 0.05);
    let grid = PatchGrid::new(256, 256, 8, 8).unwrap();
    let data = PatchData::from_observation(&img, &Mask::full(256, 256), &grid, true).unwrap();
    let cfg = InferenceConfig {
        hyper: BpfaHyperparams::with_atoms(16),
        schedule: BatchSchedule {
            epochs: 60,
            ..Default::default()
        },
        restarts: 3,
        ..Default::default()
    };
    let gn = run_inference(&data, &cfg).unwrap().state.gamma_n();
    assert!((gn / 400.0 - 1.0).abs() < 0.15, "gamma_n = {gn}");
}

#[test]
fn support_update_limits() {
    // One fully observed 2x2 patch equal to atom 0.
    let img = Image::new(2, 2, vec![0.5, -0.5, 0.5, -0.5]).unwrap();
    let grid = PatchGrid::new(2, 2, 2, 1).unwrap();
    let data = PatchData::from_observation(&img, &Mask::full(2, 2), &grid, false).unwrap();
    let hyper = BpfaHyperparams::with_atoms(2);
    let mut base = init_state(&data, &hyper, 0).unwrap();
    base.set_dictionary(&[0.5, -0.5, 0.5, -0.5, 0.5, 0.5, -0.5, -0.5]).unwrap();
    base.set_precisions(1e4, 1.0).unwrap();
    base.refresh_all_residuals(&data);
    let mut rng = derived_rng(0, &[1]);

    // Strong evidence switches atom 0 on with weight ~1; the orthogonal atom stays off.
    let mut s = base.clone();
    s.set_pi(&[0.5, 0.5]).unwrap();
    s.update_support_weight(&data, 0, 0, Mode::Em, &mut rng).unwrap();
    s.update_support_weight(&data, 0, 1, Mode::Em, &mut rng).unwrap();
    assert!(s.z(0, 0) && !s.z(0, 1));
    assert!((s.w(0, 0) - 1.0).abs() < 1e-3);

    // A vanishing prior probability overrides the evidence.
    let mut s = base.clone();
    s.set_precisions(10.0, 1.0).unwrap();
    s.set_pi(&[1e-30, 0.5]).unwrap();
    s.update_support_weight(&data, 0, 0, Mode::Em, &mut rng).unwrap();
    assert!(!s.z(0, 0));

    // Zero noise precision leaves only prior odds: pi above 1/2 turns the atom on
    // with a zero-mean weight.
    let mut s = base.clone();
    s.set_precisions(1e-12, 1.0).unwrap();
    s.set_pi(&[0.9, 0.1]).unwrap();
    s.update_support_weight(&data, 0, 0, Mode::Em, &mut rng).unwrap();
    s.update_support_weight(&data, 0, 1, Mode::Em, &mut rng).unwrap();
    assert!(s.z(0, 0) && !s.z(0, 1));
    assert!(s.w(0, 0).abs() < 1e-6);
}

#[test]
fn mini_batches_cover_every_patch() {
    let (truth, _, grid, data) = small_problem(5);
    let cfg = InferenceConfig {
        schedule: BatchSchedule {
            batch_size: Some(37),
            epochs: 6,
            seed: 1,
        },
        ..config(SupportUpdate::Greedy, 6, 1)
    };
    let result = run_inference(&data, &cfg).unwrap();
    assert_eq!(result.batch_size, 37);
    assert_eq!(result.trace.len(), 6);
    let rec = result.state.reconstruct(&data, &grid).unwrap();
    let zero_fill = PatchData::from_observation(&Image::zeros(32, 32), &Mask::full(32, 32), &grid, false).unwrap();
    assert_eq!(zero_fill.len(), data.len());
    assert!(psnr(&truth, &rec, 1.0).unwrap() > 15.0);
}
