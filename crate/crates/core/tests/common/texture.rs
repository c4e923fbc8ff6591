//! Synthetic two-phase "grain pack" slices: bright disks on a dark pore
//! background with partial-volume edges, similar in character to a
//! sandstone micro-CT slice.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rocksr::imaging::{gaussian_blur, GrayImage};

pub fn grain_slice(size: usize, seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut img = GrayImage::filled(size, size, 0.22);
    let grains = size * size / 300;
    for _ in 0..grains {
        let cx = rng.gen_range(0.0..size as f64);
        let cy = rng.gen_range(0.0..size as f64);
        let r = rng.gen_range(4.0..14.0f64);
        let level = rng.gen_range(0.68..0.8);
        let (x0, x1) = (
            (cx - r).floor().max(0.0) as usize,
            ((cx + r).ceil() as usize).min(size - 1),
        );
        let (y0, y1) = (
            (cy - r).floor().max(0.0) as usize,
            ((cy + r).ceil() as usize).min(size - 1),
        );
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
                if d <= r {
                    img.set(x, y, level);
                }
            }
        }
    }
    let mut img = gaussian_blur(&img, 0.8);
    // Faint acquisition texture.
    for v in img.pixels_mut() {
        *v = (*v + rng.gen_range(-0.01..0.01)).clamp(0.0, 1.0);
    }
    img
}
