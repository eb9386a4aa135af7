//! Segment-test corners with steered binary descriptors.
//!
//! A pixel is tested against the 16-pixel Bresenham circle of radius 3. Each
//! circle pixel is labelled brighter, darker, or similar relative to the
//! center with the configured threshold. The pixel is a corner when a
//! circular run of at least 9 equal labels exists (convex corners), or when
//! two separate runs of the same polarity each span at least 3 pixels
//! (junctions, where two contrasting wedges meet).
//!
//! Descriptors compare 256 point pairs on a 5x5 box-smoothed image. The
//! sampling pattern is steered by the intensity-centroid orientation,
//! quantized to 32 bins; bins 8..32 are exact quarter-turn rotations of bins
//! 0..8, so quarter-turn image rotations reproduce descriptors bit for bit.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DetectorConfig, Keypoint, VisualError};
use crate::raster::Raster;

/// Circle offsets, clockwise from twelve o'clock.
pub const CIRCLE: [(i32, i32); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

const ARC_LEN: usize = 9;
const JUNCTION_RUN: usize = 3;
const NMS_RADIUS: i32 = 3;
const ORIENT_RADIUS: i32 = 13;
const PATTERN_RADIUS: f64 = 13.0;
const SMOOTH_RADIUS: i32 = 2;
const BINS: usize = 32;
const PATTERN_SEED: u64 = 0x5eed_0b1e_f00d_cafe;

/// Keypoints closer than this to any border are not reported.
pub const BORDER_MARGIN: u32 = 16;

pub type Descriptor = [u64; 4];

/// Segment-test response at `(x, y)`; zero when the pixel is not a corner.
/// The caller guarantees the circle lies inside the raster.
pub fn segment_score(img: &Raster, x: u32, y: u32, threshold: u8) -> u32 {
    let c = img.get(x, y) as i32;
    let t = threshold as i32;
    let mut labels = [0i8; 16];
    let mut diffs = [0i32; 16];
    for (k, &(dx, dy)) in CIRCLE.iter().enumerate() {
        let p = img.get((x as i32 + dx) as u32, (y as i32 + dy) as u32) as i32;
        diffs[k] = (p - c).abs();
        labels[k] = if p > c + t {
            1
        } else if p < c - t {
            -1
        } else {
            0
        };
    }
    if !is_corner(&labels) {
        return 0;
    }
    labels
        .iter()
        .zip(diffs)
        .filter(|(l, _)| **l != 0)
        .map(|(_, d)| (d - t) as u32)
        .sum()
}

/// Runs of equal nonzero labels around the circle, as (label, length).
fn runs(labels: &[i8; 16]) -> Vec<(i8, usize)> {
    // Rotate so we start right after a label change; a constant ring is one run.
    let Some(start) = (0..16).find(|&k| labels[k] != labels[(k + 15) % 16]) else {
        return if labels[0] != 0 { vec![(labels[0], 16)] } else { vec![] };
    };
    let mut out: Vec<(i8, usize)> = Vec::new();
    for i in 0..16 {
        let l = labels[(start + i) % 16];
        match out.last_mut() {
            Some((pl, len)) if *pl == l && i > 0 => *len += 1,
            _ => out.push((l, 1)),
        }
    }
    out.retain(|&(l, _)| l != 0);
    out
}

fn is_corner(labels: &[i8; 16]) -> bool {
    let r = runs(labels);
    if r.iter().any(|&(_, len)| len >= ARC_LEN) {
        return true;
    }
    [-1i8, 1].iter().any(|&pol| {
        r.iter()
            .filter(|&&(l, len)| l == pol && len >= JUNCTION_RUN)
            .count()
            >= 2
    })
}

struct Pattern {
    /// Per orientation bin, 256 pairs of offsets.
    bins: Vec<[[(i32, i32); 2]; 256]>,
}

fn pattern() -> &'static Pattern {
    static PATTERN: OnceLock<Pattern> = OnceLock::new();
    PATTERN.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(PATTERN_SEED);
        let sigma = 31.0 / 5.0;
        let mut sample = || loop {
            // Box-Muller
            let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
            let u2: f64 = rng.gen();
            let r = (-2.0 * u1.ln()).sqrt() * sigma;
            let (x, y) = (r * (2.0 * PI * u2).cos(), r * (2.0 * PI * u2).sin());
            if x * x + y * y <= PATTERN_RADIUS * PATTERN_RADIUS {
                return (x, y);
            }
        };
        let base: Vec<[(f64, f64); 2]> = (0..256).map(|_| [sample(), sample()]).collect();

        let step = 2.0 * PI / BINS as f64;
        let quarter = BINS / 4;
        let mut bins = Vec::with_capacity(BINS);
        for b in 0..quarter {
            let (s, c) = (b as f64 * step).sin_cos();
            let rot = |(x, y): (f64, f64)| ((c * x - s * y).round() as i32, (s * x + c * y).round() as i32);
            let mut pairs = [[(0, 0); 2]; 256];
            for (dst, src) in pairs.iter_mut().zip(&base) {
                *dst = [rot(src[0]), rot(src[1])];
            }
            bins.push(pairs);
        }
        for b in quarter..BINS {
            let prev = bins[b - quarter];
            let mut pairs = [[(0, 0); 2]; 256];
            for (dst, src) in pairs.iter_mut().zip(prev.iter()) {
                *dst = [(-src[0].1, src[0].0), (-src[1].1, src[1].0)];
            }
            bins.push(pairs);
        }
        Pattern { bins }
    })
}

/// Summed-area table for box sums.
struct Integral {
    w: usize,
    sums: Vec<u32>,
}

impl Integral {
    fn new(img: &Raster) -> Self {
        let (w, h) = (img.width() as usize, img.height() as usize);
        let mut sums = vec![0u32; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0u32;
            for x in 0..w {
                row += img.pixels()[y * w + x] as u32;
                sums[(y + 1) * (w + 1) + x + 1] = sums[y * (w + 1) + x + 1] + row;
            }
        }
        Self { w, sums }
    }

    /// Sum over the (2r+1)^2 box centered at (x, y).
    fn box_sum(&self, x: i32, y: i32, r: i32) -> u32 {
        let stride = self.w + 1;
        let (x0, y0) = ((x - r) as usize, (y - r) as usize);
        let (x1, y1) = ((x + r + 1) as usize, (y + r + 1) as usize);
        self.sums[y1 * stride + x1] + self.sums[y0 * stride + x0]
            - self.sums[y0 * stride + x1]
            - self.sums[y1 * stride + x0]
    }
}

fn orientation_bin(img: &Raster, x: u32, y: u32) -> u8 {
    let (mut m10, mut m01) = (0i64, 0i64);
    for dy in -ORIENT_RADIUS..=ORIENT_RADIUS {
        for dx in -ORIENT_RADIUS..=ORIENT_RADIUS {
            if dx * dx + dy * dy > ORIENT_RADIUS * ORIENT_RADIUS {
                continue;
            }
            let v = img.get((x as i32 + dx) as u32, (y as i32 + dy) as u32) as i64;
            m10 += dx as i64 * v;
            m01 += dy as i64 * v;
        }
    }
    if m10 == 0 && m01 == 0 {
        return 0;
    }
    let angle = (m01 as f64).atan2(m10 as f64);
    ((angle / (2.0 * PI / BINS as f64)).round() as i64).rem_euclid(BINS as i64) as u8
}

fn describe(integral: &Integral, x: u32, y: u32, bin: u8) -> Descriptor {
    let pairs = &pattern().bins[bin as usize];
    let mut d = [0u64; 4];
    let (x, y) = (x as i32, y as i32);
    for (k, [p, q]) in pairs.iter().enumerate() {
        let a = integral.box_sum(x + p.0, y + p.1, SMOOTH_RADIUS);
        let b = integral.box_sum(x + q.0, y + q.1, SMOOTH_RADIUS);
        if a < b {
            d[k / 64] |= 1 << (k % 64);
        }
    }
    d
}

/// Detects at most `cfg.max_keypoints` corners, strongest first
/// (ties in raster order).
pub fn detect(img: &Raster, cfg: &DetectorConfig) -> Result<Vec<Keypoint>, VisualError> {
    let (w, h) = (img.width(), img.height());
    if w < 32 || h < 32 {
        return Err(VisualError::ImageTooSmall { width: w, height: h });
    }
    let m = BORDER_MARGIN;
    let mut scores = vec![0u32; (w * h) as usize];
    for y in m..h - m {
        for x in m..w - m {
            scores[(y * w + x) as usize] = segment_score(img, x, y, cfg.corner_threshold);
        }
    }

    let mut found: Vec<(u32, u32, u32)> = Vec::new();
    for y in m..h - m {
        for x in m..w - m {
            let s = scores[(y * w + x) as usize];
            if s > 0 && is_local_max(&scores, w, h, x, y) {
                found.push((s, x, y));
            }
        }
    }
    found.sort_by(|a, b| b.0.cmp(&a.0).then((a.2, a.1).cmp(&(b.2, b.1))));
    found.truncate(cfg.max_keypoints);

    let integral = Integral::new(img);
    Ok(found
        .into_iter()
        .map(|(response, x, y)| {
            let orientation = orientation_bin(img, x, y);
            Keypoint {
                x,
                y,
                response,
                orientation,
                descriptor: describe(&integral, x, y, orientation),
            }
        })
        .collect())
}

/// Strict maximum in the NMS window; equal scores resolve to the first in raster order.
fn is_local_max(scores: &[u32], w: u32, h: u32, x: u32, y: u32) -> bool {
    let here = (y * w + x) as usize;
    let s = scores[here];
    for dy in -NMS_RADIUS..=NMS_RADIUS {
        for dx in -NMS_RADIUS..=NMS_RADIUS {
            let (nx, ny) = (x as i32 + dx, y as i32 + dy);
            if (dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                continue;
            }
            let idx = (ny as u32 * w + nx as u32) as usize;
            let o = scores[idx];
            if o > s || (o == s && idx < here) {
                return false;
            }
        }
    }
    true
}
