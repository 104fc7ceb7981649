use std::collections::HashSet;

use cs_scan_core::acquisition::{acquire, constrained_dose_series, NoiseSpec, SeriesConfig};
use cs_scan_core::imaging::{extract_patches, psnr, reassemble};
use cs_scan_core::sampling::{
    auto_hop_amplitude, constrained_dwell, line_base_rows, linehop_plan, plan_metrics, uds_plan, DoseBudget,
    LineHopConfig, LineHopParams, SamplingPlan,
};
use cs_scan_core::{Image, Mask};
use proptest::prelude::*;

fn image(h: usize, w: usize, salt: u64) -> Image {
    Image::from_fn(h, w, |r, c| {
        let x = (r as u64 * 2654435761 + c as u64 * 40503 + salt * 97) % 1000;
        x as f64 / 1000.0
    })
}

fn is_walk(plan: &SamplingPlan, width: usize) -> bool {
    plan.positions.chunks(width).all(|line| {
        line.windows(2)
            .all(|w| w[0].0.abs_diff(w[1].0) <= 1 && w[0].1.abs_diff(w[1].1) == 1)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn patch_count_law(side in 1usize..40, b in 1usize..12) {
        prop_assume!(b <= side);
        let img = image(side, side, 0);
        let (grid, patches) = extract_patches(&img, &Mask::full(side, side), b, 1).unwrap();
        prop_assert_eq!(patches.len(), (side - b + 1).pow(2));
        prop_assert_eq!(grid.patch_len(), b * b);
    }

    #[test]
    fn full_patches_reassemble_exactly(h in 1usize..30, w in 1usize..30, b in 1usize..8, stride in 1usize..4, salt in 0u64..100) {
        prop_assume!(b <= h && b <= w);
        let img = image(h, w, salt);
        let (grid, patches) = extract_patches(&img, &Mask::full(h, w), b, stride).unwrap();
        let tiles = stride <= b && (h - b) % stride == 0 && (w - b) % stride == 0;
        match reassemble(&patches, &grid, h, w) {
            Ok(back) => {
                prop_assert!(tiles);
                for (x, y) in img.data().iter().zip(back.data()) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
            Err(_) => prop_assert!(!tiles),
        }
    }

    #[test]
    fn masking_is_idempotent(h in 2usize..24, w in 2usize..24, ratio in 0.05f64..1.0, seed in 0u64..1000) {
        let img = image(h, w, seed);
        let plan = uds_plan(h, w, ratio, 1.0, seed).unwrap();
        let once = acquire(&img, &plan, &NoiseSpec::none()).unwrap();
        let twice = acquire(&once.image, &plan, &NoiseSpec::none()).unwrap();
        prop_assert_eq!(&once.image, &twice.image);
        for r in 0..h {
            for c in 0..w {
                if !once.mask.is_sampled(r, c) {
                    prop_assert_eq!(once.image.get(r, c), 0.0);
                }
            }
        }
    }

    #[test]
    fn uds_draws_distinct_pixels(h in 1usize..40, w in 1usize..40, ratio in 0.01f64..1.0, seed in 0u64..1000) {
        let m = (ratio * (h * w) as f64).round() as usize;
        let Ok(plan) = uds_plan(h, w, ratio, 1.0, seed) else {
            prop_assert_eq!(m, 0);
            return Ok(());
        };
        prop_assert_eq!(plan.len(), m);
        let set: HashSet<_> = plan.positions.iter().copied().collect();
        prop_assert_eq!(set.len(), plan.len());
        prop_assert!(plan.positions.iter().all(|&(r, c)| r < h && c < w));
    }

    #[test]
    fn linehop_invariants(h in 8usize..96, w in 2usize..64, ratio in 0.05f64..0.6, prob in 0.0f64..=1.0, seed in 0u64..1000) {
        let lines = (ratio * h as f64).round() as usize;
        prop_assume!(lines >= 1);
        let amp = auto_hop_amplitude(h, lines);
        let params = LineHopParams::new(amp, prob, seed);
        let plan = linehop_plan(h, w, ratio, &params, 1.0).unwrap();
        prop_assert_eq!(plan.len(), lines * w);
        let set: HashSet<_> = plan.positions.iter().copied().collect();
        prop_assert_eq!(set.len(), plan.len());
        prop_assert!(is_walk(&plan, w));
        let bases = line_base_rows(h, lines);
        for (line, chunk) in plan.positions.chunks(w).enumerate() {
            let cols: HashSet<usize> = chunk.iter().map(|p| p.1).collect();
            prop_assert_eq!(cols.len(), w);
            for &(r, _) in chunk {
                prop_assert!(r.abs_diff(bases[line]) <= amp.max(1), "row {} base {} h {}", r, bases[line], amp);
            }
        }
        prop_assert_eq!(plan_metrics(&plan).unwrap().overlap_count, 0);
    }

    #[test]
    fn explicit_amplitude_is_respected(h in 16usize..80, amp in 0usize..4, seed in 0u64..1000) {
        let lines = (h / (2 * amp + 3)).max(1);
        let ratio = lines as f64 / h as f64;
        prop_assume!((ratio * h as f64).round() as usize == lines);
        let plan = linehop_plan(h, 20, ratio, &LineHopParams::new(amp, 1.0, seed), 1.0).unwrap();
        let bases = line_base_rows(h, lines);
        for (line, chunk) in plan.positions.chunks(20).enumerate() {
            prop_assert!(chunk.iter().all(|&(r, _)| r.abs_diff(bases[line]) <= amp));
        }
    }

    #[test]
    fn dose_is_constant_across_a_series(side in 16usize..48, dwell in 0.5f64..20.0, seed in 0u64..200) {
        let truth = image(side, side, seed);
        let budget = DoseBudget::new(dwell, side * side).unwrap();
        let ratios = [0.5, 0.4, 0.3, 0.2, 0.1];
        let config = SeriesConfig {
            linehop: LineHopConfig::default(),
            noise: NoiseSpec::none(),
            max_drift: 0,
            seed,
        };
        let series = constrained_dose_series(&truth, &ratios, &budget, &config).unwrap();
        for el in &series {
            let plan = &el.observation.plan;
            prop_assert_eq!(el.dwell, constrained_dwell(&budget, plan.len() as f64).unwrap());
            prop_assert!((plan.dose() / budget.budget - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn psnr_is_symmetric_and_infinite_at_zero(h in 1usize..16, w in 1usize..16, a in 0u64..50, b in 0u64..50) {
        let x = image(h, w, a);
        let y = image(h, w, b);
        let p = psnr(&x, &y, 1.0).unwrap();
        prop_assert_eq!(p, psnr(&y, &x, 1.0).unwrap());
        prop_assert_eq!(psnr(&x, &x, 1.0).unwrap(), f64::INFINITY);
    }
}
