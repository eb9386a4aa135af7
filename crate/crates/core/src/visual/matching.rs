use super::{Descriptor, DetectorConfig, Keypoint, VisualError};

#[inline]
pub fn hamming(a: &Descriptor, b: &Descriptor) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Nearest and second-nearest distance with the nearest index (first on ties).
fn two_nearest<'a>(q: &Descriptor, pool: impl Iterator<Item = &'a Descriptor>) -> (usize, u32, u32) {
    let (mut best, mut d1, mut d2) = (0, u32::MAX, u32::MAX);
    for (j, d) in pool.enumerate() {
        let dist = hamming(q, d);
        if dist < d1 {
            d2 = d1;
            d1 = dist;
            best = j;
        } else if dist < d2 {
            d2 = dist;
        }
    }
    (best, d1, d2)
}

/// Brute-force Hamming matching with ratio test and mutual-best check.
///
/// Returns `(index_in_a, index_in_b)` pairs in ascending `a` order.
pub fn match_pair(
    a: &[Keypoint],
    b: &[Keypoint],
    cfg: &DetectorConfig,
) -> Result<Vec<(usize, usize)>, VisualError> {
    if a.is_empty() || b.is_empty() {
        return Err(VisualError::EmptyKeypoints);
    }
    // A lone candidate has no runner-up; treat the runner-up as beyond any real distance.
    let beyond = 257u32;
    let mut out = Vec::new();
    for (i, ka) in a.iter().enumerate() {
        let (j, d1, d2) = two_nearest(&ka.descriptor, b.iter().map(|k| &k.descriptor));
        let d2 = d2.min(beyond);
        if !((d1 as f64) < cfg.match_ratio * d2 as f64) {
            continue;
        }
        let (back, _, _) = two_nearest(&b[j].descriptor, a.iter().map(|k| &k.descriptor));
        if back == i {
            out.push((i, j));
        }
    }
    Ok(out)
}
