//! k-means codebooks over 0/1 vectors packed as bytes.
//!
//! Centroids are real-valued; the squared distance from a binary point `x`
//! is `|x| - 2 <x, c> + |c|^2`, where `<x, c>` is summed from per-byte lookup
//! tables so one distance costs one lookup per byte.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<T> {
    nbytes: usize,
    centroids: Vec<T>,
    norms: Vec<T>,
    /// `k * nbytes * 256` partial dot products.
    luts: Vec<T>,
}

fn popcount(x: &[u8]) -> u32 {
    x.iter().map(|b| b.count_ones()).sum()
}

fn hamming(a: &[u8], b: &[u8]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

impl<T: Scalar> Codebook<T> {
    pub fn from_centroids(nbytes: usize, centroids: Vec<T>) -> Self {
        let dims = nbytes * 8;
        assert!(dims > 0 && centroids.len() % dims == 0);
        let k = centroids.len() / dims;
        let norms = centroids
            .chunks(dims)
            .map(|c| c.iter().fold(T::zero(), |s, &v| s + v * v))
            .collect();
        let mut luts = vec![T::zero(); k * nbytes * 256];
        for (ci, c) in centroids.chunks(dims).enumerate() {
            for b in 0..nbytes {
                let lut = &mut luts[(ci * nbytes + b) * 256..][..256];
                for v in 1..256usize {
                    lut[v] = lut[v & (v - 1)] + c[8 * b + v.trailing_zeros() as usize];
                }
            }
        }
        Self {
            nbytes,
            centroids,
            norms,
            luts,
        }
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn nbytes(&self) -> usize {
        self.nbytes
    }

    pub fn centroids(&self) -> &[T] {
        &self.centroids
    }

    /// Squared Euclidean distance from binary `x` to centroid `c`.
    #[inline]
    pub fn distance(&self, c: usize, x: &[u8]) -> T {
        let base = c * self.nbytes * 256;
        let mut dot = T::zero();
        for (b, &v) in x.iter().enumerate() {
            dot += self.luts[base + b * 256 + v as usize];
        }
        let d = T::of(popcount(x) as f64) - (dot + dot) + self.norms[c];
        d.max(T::zero())
    }

    /// Nearest centroid; the lowest index wins ties.
    pub fn nearest(&self, x: &[u8]) -> usize {
        let mut best = (0, T::infinity());
        for c in 0..self.len() {
            let d = self.distance(c, x);
            if d < best.1 {
                best = (c, d);
            }
        }
        best.0
    }

    /// The `n` nearest centroids ordered by `(distance, index)`.
    pub fn nearest_n(&self, x: &[u8], n: usize) -> Vec<usize> {
        let mut all: Vec<(T, usize)> = (0..self.len()).map(|c| (self.distance(c, x), c)).collect();
        let n = n.min(all.len());
        let cmp = |a: &(T, usize), b: &(T, usize)| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1));
        if n < all.len() {
            all.select_nth_unstable_by(n, cmp);
            all.truncate(n);
        }
        all.sort_by(cmp);
        all.into_iter().map(|(_, c)| c).collect()
    }

    /// k-means++ seeding followed by a fixed number of Lloyd iterations.
    ///
    /// `points` holds `nbytes`-byte records back to back. With fewer distinct
    /// points than `k`, the surplus centroids duplicate existing points.
    pub fn train(points: &[u8], nbytes: usize, k: usize, iterations: usize, rng: &mut impl Rng) -> Self {
        let n = points.len() / nbytes;
        assert!(n > 0 && k > 0);
        let point = |i: usize| &points[i * nbytes..(i + 1) * nbytes];

        // Seeding only involves data points, so exact Hamming distances suffice.
        let mut centers = vec![rng.gen_range(0..n)];
        let mut nearest_d2: Vec<f64> = (0..n)
            .map(|i| f64::from(hamming(point(i), point(centers[0]))))
            .collect();
        while centers.len() < k {
            let next = match WeightedIndex::new(&nearest_d2) {
                Ok(w) => w.sample(rng),
                Err(_) => rng.gen_range(0..n),
            };
            centers.push(next);
            let c = point(next);
            nearest_d2
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, d)| *d = d.min(f64::from(hamming(point(i), c))));
        }

        let dims = nbytes * 8;
        let unpack = |x: &[u8]| -> Vec<T> {
            (0..dims)
                .map(|d| if x[d / 8] >> (d % 8) & 1 == 1 { T::one() } else { T::zero() })
                .collect()
        };
        let mut book = Self::from_centroids(nbytes, centers.iter().flat_map(|&c| unpack(point(c))).collect());

        for _ in 0..iterations {
            let assign: Vec<usize> = (0..n).into_par_iter().map(|i| book.nearest(point(i))).collect();
            let mut counts = vec![0u32; k];
            let mut ones = vec![0u32; k * dims];
            for (i, &c) in assign.iter().enumerate() {
                counts[c] += 1;
                let x = point(i);
                for d in 0..dims {
                    ones[c * dims + d] += u32::from(x[d / 8] >> (d % 8) & 1);
                }
            }
            let mut centroids = book.centroids.clone();
            for c in 0..k {
                // an empty cluster keeps its previous centroid
                if counts[c] > 0 {
                    let inv = 1.0 / f64::from(counts[c]);
                    for d in 0..dims {
                        centroids[c * dims + d] = T::of(f64::from(ones[c * dims + d]) * inv);
                    }
                }
            }
            if centroids == book.centroids {
                break;
            }
            book = Self::from_centroids(nbytes, centroids);
        }
        book
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lut_distance_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let centroids: Vec<f64> = (0..3 * 16).map(|_| rng.gen::<f64>()).collect();
        let book = Codebook::from_centroids(2, centroids.clone());
        for _ in 0..50 {
            let x = [rng.gen::<u8>(), rng.gen::<u8>()];
            for c in 0..3 {
                let direct: f64 = (0..16)
                    .map(|d| {
                        let bit = f64::from(x[d / 8] >> (d % 8) & 1);
                        (bit - centroids[c * 16 + d]).powi(2)
                    })
                    .sum();
                assert!((book.distance(c, &x) - direct).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn separated_clusters_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bases = [[0x00u8; 4], [0xff; 4], [0x0f; 4], [0xf0; 4]];
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for i in 0..400 {
            let mut p = bases[i % 4];
            let bit = rng.gen_range(0..32);
            p[bit / 8] ^= 1 << (bit % 8);
            points.extend_from_slice(&p);
            labels.push(i % 4);
        }
        let book: Codebook<f32> = Codebook::train(&points, 4, 4, 10, &mut rng);
        // same label <=> same cell
        let cells: Vec<usize> = points.chunks(4).map(|p| book.nearest(p)).collect();
        for i in 0..400 {
            for j in 0..4 {
                assert_eq!(cells[i] == cells[j], labels[i] == labels[j]);
            }
        }
    }

    #[test]
    fn more_centroids_than_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let points = [1u8, 2, 3];
        let book: Codebook<f64> = Codebook::train(&points, 1, 8, 3, &mut rng);
        assert_eq!(book.len(), 8);
        for p in points.chunks(1) {
            assert_eq!(book.distance(book.nearest(p), p), 0.0);
        }
    }
}
