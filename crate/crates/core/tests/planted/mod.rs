//! Images drawn from the BPFA model with a small planted dictionary.

use cs_scan_core::rng::derived_rng;
use cs_scan_core::Image;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// `n`x`n` image of 8x8 tiles, each `0.5 + D0 alpha` with three planted atoms
/// drawn from the atom prior.
pub fn planted(n: usize, seed: u64, noise: f64) -> Image {
    let mut rng = derived_rng(seed, &[99]);
    let p = 64;
    let atom = Normal::new(0.0, 1.0 / 8.0).unwrap();
    let d0: Vec<f64> = (0..3 * p).map(|_| atom.sample(&mut rng)).collect();
    let weight = Normal::new(0.0, 0.4).unwrap();
    let mut img = Image::zeros(n, n);
    for ty in 0..n / 8 {
        for tx in 0..n / 8 {
            let tile = loop {
                let w: Vec<f64> = (0..3)
                    .map(|_| if rng.random::<f64>() < 0.8 { weight.sample(&mut rng) } else { 0.0 })
                    .collect();
                let tile: Vec<f64> =
                    (0..p).map(|j| 0.5 + (0..3).map(|k| d0[k * p + j] * w[k]).sum::<f64>()).collect();
                if tile.iter().all(|v| (0.0..=1.0).contains(v)) {
                    break tile;
                }
            };
            for (j, v) in tile.into_iter().enumerate() {
                img.set(ty * 8 + j / 8, tx * 8 + j % 8, v);
            }
        }
    }
    if noise == 0.0 {
        return img;
    }
    let noise = Normal::new(0.0, noise).unwrap();
    let mut rng = derived_rng(seed, &[100]);
    Image::from_fn(n, n, |r, c| img.get(r, c) + noise.sample(&mut rng))
}
