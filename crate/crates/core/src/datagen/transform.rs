//! Pixel transforms. Each is exact integer arithmetic so generated corpora
//! are bit-identical across platforms.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Crop,
    Resize,
    Brightness,
    Blur,
    Rotate,
    Splice,
}

impl Transform {
    pub const ALL: [Transform; 6] = [
        Transform::Crop,
        Transform::Resize,
        Transform::Brightness,
        Transform::Blur,
        Transform::Rotate,
        Transform::Splice,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Transform::Crop => "crop",
            Transform::Resize => "resize",
            Transform::Brightness => "brightness",
            Transform::Blur => "blur",
            Transform::Rotate => "rotate",
            Transform::Splice => "splice",
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| format!("unknown transform {s:?}"))
    }
}

/// Adds `offset` to every pixel, clamping to `0..=255`.
pub fn brightness(r: &Raster, offset: i32) -> Raster {
    Raster::from_fn(r.width(), r.height(), |x, y| {
        (r.get(x, y) as i32 + offset).clamp(0, 255) as u8
    })
}

/// 3x3 box filter with clamped borders, rounded to nearest.
pub fn box_blur(r: &Raster) -> Raster {
    let (w, h) = (r.width() as i64, r.height() as i64);
    Raster::from_fn(r.width(), r.height(), |x, y| {
        let mut sum = 0u32;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let sx = (x as i64 + dx).clamp(0, w - 1) as u32;
                let sy = (y as i64 + dy).clamp(0, h - 1) as u32;
                sum += r.get(sx, sy) as u32;
            }
        }
        ((sum + 4) / 9) as u8
    })
}

/// Clockwise rotation by `quarter_turns * 90` degrees.
pub fn rotate(r: &Raster, quarter_turns: u32) -> Raster {
    let (w, h) = (r.width(), r.height());
    match quarter_turns % 4 {
        0 => r.clone(),
        1 => Raster::from_fn(h, w, |x, y| r.get(y, h - 1 - x)),
        2 => Raster::from_fn(w, h, |x, y| r.get(w - 1 - x, h - 1 - y)),
        _ => Raster::from_fn(h, w, |x, y| r.get(w - 1 - y, x)),
    }
}

/// Nearest-neighbour resampling to `width x height`.
pub fn resize(r: &Raster, width: u32, height: u32) -> Raster {
    let (sw, sh) = (r.width() as u64, r.height() as u64);
    Raster::from_fn(width, height, |x, y| {
        let sx = ((2 * x as u64 + 1) * sw / (2 * width as u64)).min(sw - 1);
        let sy = ((2 * y as u64 + 1) * sh / (2 * height as u64)).min(sh - 1);
        r.get(sx as u32, sy as u32)
    })
}

/// Copies `patch` onto `host` with its top-left corner at `(x0, y0)`;
/// whatever falls outside the host is dropped.
pub fn paste(host: &Raster, patch: &Raster, x0: u32, y0: u32) -> Raster {
    let mut out = host.clone();
    for y in 0..patch.height() {
        for x in 0..patch.width() {
            let (tx, ty) = (x0 + x, y0 + y);
            if tx < host.width() && ty < host.height() {
                out.set(tx, ty, patch.get(x, y));
            }
        }
    }
    out
}

/// Box-averaged downsample to at most `side` pixels on the long edge, as a
/// binary PGM. Used as the embedded thumbnail.
pub fn thumbnail(r: &Raster, side: u32) -> Vec<u8> {
    let scale = r.width().max(r.height()).div_ceil(side).max(1);
    let (tw, th) = (r.width() / scale, r.height() / scale);
    Raster::from_fn(tw.max(1), th.max(1), |x, y| {
        let mut sum = 0u32;
        for dy in 0..scale {
            for dx in 0..scale {
                sum += r.get((x * scale + dx).min(r.width() - 1), (y * scale + dy).min(r.height() - 1)) as u32;
            }
        }
        (sum / (scale * scale)) as u8
    })
    .to_pgm()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> Raster {
        Raster::from_fn(5, 3, |x, y| (10 * x + 100 * y) as u8)
    }

    #[test]
    fn rotations_compose() {
        let r = ramp();
        assert_eq!(rotate(&r, 1).width(), 3);
        assert_eq!(rotate(&r, 1).get(2, 0), r.get(0, 0));
        assert_eq!(rotate(&rotate(&r, 1), 3), r);
        assert_eq!(rotate(&rotate(&r, 1), 1), rotate(&r, 2));
    }

    #[test]
    fn brightness_clamps() {
        let r = ramp();
        assert_eq!(brightness(&r, 200).get(4, 2), 255);
        assert_eq!(brightness(&r, -50).get(0, 0), 0);
        assert_eq!(brightness(&r, 5).get(1, 0), 15);
    }

    #[test]
    fn blur_of_constant_is_constant() {
        let r = Raster::filled(6, 6, 77);
        assert_eq!(box_blur(&r), r);
        let mut spike = Raster::filled(5, 5, 0);
        spike.set(2, 2, 90);
        assert_eq!(box_blur(&spike).get(1, 1), 10);
    }

    #[test]
    fn resize_identity_and_paste() {
        let r = ramp();
        assert_eq!(resize(&r, 5, 3), r);
        let p = paste(&r, &Raster::filled(2, 2, 1), 4, 2);
        assert_eq!(p.get(4, 2), 1);
        assert_eq!(p.get(3, 2), r.get(3, 2));
        assert_eq!("blur".parse::<Transform>().unwrap(), Transform::Blur);
        assert!("warp".parse::<Transform>().is_err());
    }

    #[test]
    fn thumbnail_is_small_pgm() {
        let r = Raster::from_fn(200, 100, |x, _| x as u8);
        let t = thumbnail(&r, 32);
        assert!(t.starts_with(b"P5"));
        let back = Raster::decode(&t).unwrap();
        assert!(back.width() <= 32 && back.height() <= 32);
    }
}
