//! Affine consensus over putative matches.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DetectorConfig, Keypoint};
use crate::scalar::Scalar;

/// Fewest inliers for a pair to count as geometrically consistent.
pub const MIN_CONSENSUS: usize = 4;

/// `(x, y) -> (a0 x + a1 y + a2, a3 x + a4 y + a5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Affine<T> {
    pub coeffs: [T; 6],
}

impl<T: Scalar> Affine<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self { coeffs: [o, z, z, z, o, z] }
    }

    pub fn translation(dx: T, dy: T) -> Self {
        let (o, z) = (T::one(), T::zero());
        Self { coeffs: [o, z, dx, z, o, dy] }
    }

    pub fn apply(&self, x: T, y: T) -> (T, T) {
        let c = &self.coeffs;
        (c[0] * x + c[1] * y + c[2], c[3] * x + c[4] * y + c[5])
    }

    /// Least-squares fit of `dst ~ A(src)`; `None` when the sources are
    /// collinear or fewer than three.
    pub fn fit(src: &[(T, T)], dst: &[(T, T)]) -> Option<Self> {
        if src.len() < 3 || src.len() != dst.len() {
            return None;
        }
        // Normal equations share the matrix sum(p p^T) with p = (x, y, 1).
        let mut m = [[T::zero(); 3]; 3];
        let mut bx = [T::zero(); 3];
        let mut by = [T::zero(); 3];
        for (&(x, y), &(u, v)) in src.iter().zip(dst) {
            let p = [x, y, T::one()];
            for r in 0..3 {
                for c in 0..3 {
                    m[r][c] += p[r] * p[c];
                }
                bx[r] += p[r] * u;
                by[r] += p[r] * v;
            }
        }
        let rx = solve3(m, bx)?;
        let ry = solve3(m, by)?;
        Some(Self {
            coeffs: [rx[0], rx[1], rx[2], ry[0], ry[1], ry[2]],
        })
    }
}

/// Gaussian elimination with partial pivoting.
fn solve3<T: Scalar>(mut m: [[T; 3]; 3], mut b: [T; 3]) -> Option<[T; 3]> {
    let scale = m
        .iter()
        .flatten()
        .fold(T::zero(), |acc, v| acc.max(v.abs()));
    if scale == T::zero() {
        return None;
    }
    let eps = scale * T::epsilon() * T::of(64.0);
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if m[pivot][col].abs() <= eps {
            return None;
        }
        m.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..3 {
            let f = m[r][col] / m[col][col];
            for c in col..3 {
                let t = m[col][c];
                m[r][c] -= f * t;
            }
            let t = b[col];
            b[r] -= f * t;
        }
    }
    let mut x = [T::zero(); 3];
    for r in (0..3).rev() {
        let mut s = b[r];
        for c in r + 1..3 {
            s -= m[r][c] * x[c];
        }
        x[r] = s / m[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometricResult {
    pub inliers: Vec<(usize, usize)>,
    pub consistent: bool,
    pub model: Option<Affine<f64>>,
}

fn point(k: &Keypoint) -> (f64, f64) {
    (k.x as f64, k.y as f64)
}

fn inliers_of(
    model: &Affine<f64>,
    a: &[Keypoint],
    b: &[Keypoint],
    matches: &[(usize, usize)],
    tol: f64,
) -> Vec<(usize, usize)> {
    let tol2 = tol * tol;
    matches
        .iter()
        .copied()
        .filter(|&(i, j)| {
            let (x, y) = point(&a[i]);
            let (u, v) = model.apply(x, y);
            let (bx, by) = point(&b[j]);
            (u - bx).powi(2) + (v - by).powi(2) <= tol2
        })
        .collect()
}

/// RANSAC affine fit from `a` to `b`.
///
/// With fewer than [`MIN_CONSENSUS`] matches there is nothing to verify; the
/// matches come back unchanged and flagged inconsistent. Otherwise the best
/// minimal-sample model is refit on its inliers; a consensus smaller than
/// [`MIN_CONSENSUS`] yields no inliers.
pub fn filter_geometric(
    a: &[Keypoint],
    b: &[Keypoint],
    matches: &[(usize, usize)],
    cfg: &DetectorConfig,
    seed: u64,
) -> GeometricResult {
    if matches.len() < MIN_CONSENSUS {
        return GeometricResult {
            inliers: matches.to_vec(),
            consistent: false,
            model: None,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Affine<f64>, Vec<(usize, usize)>)> = None;
    for _ in 0..cfg.ransac_iterations {
        let pick = sample(&mut rng, matches.len(), 3);
        let src: Vec<_> = pick.iter().map(|k| point(&a[matches[k].0])).collect();
        let dst: Vec<_> = pick.iter().map(|k| point(&b[matches[k].1])).collect();
        let Some(model) = Affine::fit(&src, &dst) else { continue };
        let found = inliers_of(&model, a, b, matches, cfg.inlier_px);
        if best.as_ref().is_none_or(|(_, cur)| found.len() > cur.len()) {
            let all = found.len() == matches.len();
            best = Some((model, found));
            if all {
                break;
            }
        }
    }

    let Some((mut model, mut inliers)) = best else {
        return GeometricResult {
            inliers: Vec::new(),
            consistent: false,
            model: None,
        };
    };
    let src: Vec<_> = inliers.iter().map(|&(i, _)| point(&a[i])).collect();
    let dst: Vec<_> = inliers.iter().map(|&(_, j)| point(&b[j])).collect();
    if let Some(refit) = Affine::fit(&src, &dst) {
        let again = inliers_of(&refit, a, b, matches, cfg.inlier_px);
        if again.len() >= inliers.len() {
            model = refit;
            inliers = again;
        }
    }
    if inliers.len() < MIN_CONSENSUS {
        return GeometricResult {
            inliers: Vec::new(),
            consistent: false,
            model: None,
        };
    }
    GeometricResult {
        inliers,
        consistent: true,
        model: Some(model),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn kp(x: u32, y: u32) -> Keypoint {
        Keypoint {
            x,
            y,
            response: 1,
            orientation: 0,
            descriptor: [0; 4],
        }
    }

    #[test]
    fn exact_fit_recovers_affine() {
        let truth: Affine<f64> = Affine {
            coeffs: [0.9, -0.2, 5.0, 0.3, 1.1, -7.0],
        };
        let src = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0), (4.0, 7.0)];
        let dst: Vec<_> = src.iter().map(|&(x, y)| truth.apply(x, y)).collect();
        let fit = Affine::fit(&src, &dst).unwrap();
        for (f, t) in fit.coeffs.iter().zip(truth.coeffs) {
            assert!((f - t).abs() < 1e-9);
        }
        assert!(Affine::<f64>::fit(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], &src[..3]).is_none());
    }

    #[test]
    fn translation_only_matches_all_survive() {
        let a: Vec<_> = (0..12).map(|i| kp(40 + 7 * i, 30 + (i * i) % 50)).collect();
        let b: Vec<_> = a.iter().map(|k| kp(k.x + 13, k.y + 4)).collect();
        let matches: Vec<_> = (0..12).map(|i| (i, i)).collect();
        let r = filter_geometric(&a, &b, &matches, &DetectorConfig::default(), 1);
        assert!(r.consistent);
        assert_eq!(r.inliers, matches);
        let m = r.model.unwrap();
        assert!((m.coeffs[2] - 13.0).abs() < 1e-6 && (m.coeffs[5] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn outliers_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<_> = (0..30).map(|_| kp(rng.gen_range(20..300), rng.gen_range(20..300))).collect();
        let shift = Affine::translation(25.0, -10.0);
        let b: Vec<_> = a
            .iter()
            .enumerate()
            .map(|(i, k)| {
                if i < 20 {
                    let (u, v) = shift.apply(k.x as f64, k.y as f64);
                    kp(u as u32, v as u32)
                } else {
                    kp(rng.gen_range(0..400), rng.gen_range(0..400))
                }
            })
            .collect();
        let matches: Vec<_> = (0..30).map(|i| (i, i)).collect();
        let r = filter_geometric(&a, &b, &matches, &DetectorConfig::default(), 9);
        assert!(r.consistent);
        assert_eq!(r.inliers, (0..20).map(|i| (i, i)).collect::<Vec<_>>());
    }

    #[test]
    fn three_matches_pass_through_unverified() {
        let a = vec![kp(1, 1), kp(50, 2), kp(3, 60)];
        let m = vec![(0, 0), (1, 1), (2, 2)];
        let r = filter_geometric(&a, &a, &m, &DetectorConfig::default(), 0);
        assert!(!r.consistent);
        assert_eq!(r.inliers, m);
    }

    #[test]
    fn same_seed_same_result() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<_> = (0..40).map(|_| kp(rng.gen_range(0..200), rng.gen_range(0..200))).collect();
        let b: Vec<_> = (0..40).map(|_| kp(rng.gen_range(0..200), rng.gen_range(0..200))).collect();
        let m: Vec<_> = (0..40).map(|i| (i, i)).collect();
        let cfg = DetectorConfig::default();
        assert_eq!(filter_geometric(&a, &b, &m, &cfg, 5), filter_geometric(&a, &b, &m, &cfg, 5));
    }

    proptest! {
        #[test]
        fn inliers_never_exceed_matches(seed in any::<u64>(), n in 0usize..25) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<_> = (0..n).map(|_| kp(rng.gen_range(0..100), rng.gen_range(0..100))).collect();
            let b: Vec<_> = (0..n).map(|_| kp(rng.gen_range(0..100), rng.gen_range(0..100))).collect();
            let m: Vec<_> = (0..n).map(|i| (i, i)).collect();
            let cfg = DetectorConfig { ransac_iterations: 50, ..DetectorConfig::default() };
            let r = filter_geometric(&a, &b, &m, &cfg, seed);
            prop_assert!(r.inliers.len() <= n);
            prop_assert!(r.inliers.iter().all(|p| m.contains(p)));
            prop_assert_eq!(r.consistent, r.inliers.len() >= MIN_CONSENSUS && n >= MIN_CONSENSUS);
        }
    }
}
