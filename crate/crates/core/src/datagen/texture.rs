//! Procedural root images: smooth value noise under random flat shapes, with
//! a little per-pixel grain. Integer arithmetic only.

use rand::Rng;

use crate::Raster;

/// Bilinear value noise over a `cell`-pixel lattice, values in `0..=amp`.
fn value_noise(rng: &mut impl Rng, w: u32, h: u32, cell: u32, amp: u32) -> Vec<u32> {
    let gw = w / cell + 2;
    let gh = h / cell + 2;
    let grid: Vec<u32> = (0..gw * gh).map(|_| rng.gen_range(0..=amp)).collect();
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        let (gy, fy) = (y / cell, y % cell);
        for x in 0..w {
            let (gx, fx) = (x / cell, x % cell);
            let at = |i: u32, j: u32| grid[(j * gw + i) as usize];
            let top = at(gx, gy) * (cell - fx) + at(gx + 1, gy) * fx;
            let bottom = at(gx, gy + 1) * (cell - fx) + at(gx + 1, gy + 1) * fx;
            out.push((top * (cell - fy) + bottom * fy) / (cell * cell));
        }
    }
    out
}

pub fn texture(rng: &mut impl Rng, width: u32, height: u32) -> Raster {
    let base = rng.gen_range(40..120);
    let noise = value_noise(rng, width, height, 24, 90);
    let mut px: Vec<u8> = noise.iter().map(|&v| (base + v).min(255) as u8).collect();

    let shapes = rng.gen_range(50..90);
    for _ in 0..shapes {
        let value: u8 = rng.gen();
        let cx = rng.gen_range(0..width) as i64;
        let cy = rng.gen_range(0..height) as i64;
        if rng.gen_bool(0.7) {
            let hw = rng.gen_range(4..28) as i64;
            let hh = rng.gen_range(4..28) as i64;
            for y in (cy - hh).max(0)..(cy + hh).min(height as i64) {
                for x in (cx - hw).max(0)..(cx + hw).min(width as i64) {
                    px[(y * width as i64 + x) as usize] = value;
                }
            }
        } else {
            // right triangle: corners at three distinct angles
            let s = rng.gen_range(8..40) as i64;
            for dy in 0..s {
                for dx in 0..(s - dy) {
                    let (x, y) = (cx + dx, cy + dy);
                    if x < width as i64 && y < height as i64 {
                        px[(y * width as i64 + x) as usize] = value;
                    }
                }
            }
        }
    }
    for p in &mut px {
        *p = (*p as i32 + rng.gen_range(-3..=3)).clamp(0, 255) as u8;
    }
    Raster::new(width, height, px).expect("dimensions match the buffer")
}
