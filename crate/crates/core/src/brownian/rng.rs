//! Reproducible random streams keyed by `(seed, stream_id)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::C64;

/// Identifies an independent random stream. Equal keys reproduce identical
/// sample sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    /// Generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream_id);
        r
    }

    /// A stream for path `i` of a fan-out rooted at this stream.
    pub fn path(&self, i: u64) -> RngStream {
        RngStream { seed: mix(self.seed ^ mix(self.stream_id.wrapping_add(0x9e37_79b9_7f4a_7c15))), stream_id: i }
    }

    /// A stream derived from this one and a label, for independent sub-tasks.
    pub fn derive(&self, label: &str) -> RngStream {
        RngStream { seed: mix(self.seed ^ hash_str(label)), stream_id: self.stream_id }
    }
}

/// SplitMix64 finaliser.
pub fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// 64-bit FNV-1a hash, stable across platforms and releases.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Uniform point on the unit circle without trigonometric calls.
#[inline]
pub fn unit_circle<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    loop {
        let u: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let v: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s <= 1.0 {
            return C64::new((u * u - v * v) / s, 2.0 * u * v / s);
        }
    }
}

/// Standard complex Gaussian increment with variance `dt` per coordinate.
#[inline]
pub fn gaussian_step<R: Rng + ?Sized>(rng: &mut R, dt: f64) -> C64 {
    let s = dt.sqrt();
    let a: f64 = rng.sample(StandardNormal);
    let b: f64 = rng.sample(StandardNormal);
    C64::new(a * s, b * s)
}

/// Point of the disk of radius `r` about 0 distributed with density
/// proportional to the disk's Green's function with pole at 0.
#[inline]
pub fn green_ball_point<R: Rng + ?Sized>(rng: &mut R, r: f64) -> C64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    unit_circle(rng) * (r * (u1 * u2).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_key_same_sequence() {
        let a: Vec<u64> = {
            let mut r = RngStream::new(7, 3).rng();
            (0..5).map(|_| r.random()).collect()
        };
        let b: Vec<u64> = {
            let mut r = RngStream::new(7, 3).rng();
            (0..5).map(|_| r.random()).collect()
        };
        let c: Vec<u64> = {
            let mut r = RngStream::new(7, 4).rng();
            (0..5).map(|_| r.random()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unit_circle_is_uniform() {
        let mut r = RngStream::new(1, 0).rng();
        let angles: Vec<f64> = (0..20000)
            .map(|_| {
                let z = unit_circle(&mut r);
                assert!((z.norm() - 1.0).abs() < 1e-12);
                z.arg().rem_euclid(std::f64::consts::TAU)
            })
            .collect();
        let (_, p) = crate::stats::ks_test(&angles, |a| a / std::f64::consts::TAU);
        assert!(p > 0.001, "p = {p}");
    }

    #[test]
    fn green_ball_mean_square_radius() {
        let mut r = RngStream::new(2, 0).rng();
        let n = 100000;
        let m: f64 = (0..n).map(|_| green_ball_point(&mut r, 1.0).norm_sqr()).sum::<f64>() / n as f64;
        // E|w|^2 under the normalised Green density of the unit disk is 1/4.
        assert!((m - 0.25).abs() < 0.005, "{m}");
    }
}
