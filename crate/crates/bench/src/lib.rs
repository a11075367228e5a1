//! Fixed inputs for the kernel benchmarks.

use gaugeforge::phi_crystal::{self as pc, PhiGauge, VirtualCrystal};
use gaugeforge::{Mat, WittRing};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(2024)
}

pub fn ring(p: u32, d: u32, n: usize) -> Arc<WittRing> {
    WittRing::new(p, d, n).expect("small Witt ring")
}

/// A random square matrix over `W_n(F_{p^d})`.
pub fn square(r: &WittRing, m: usize) -> Mat {
    Mat::random(r, m, m, &mut rng())
}

/// A random crystal over `W_5(F_p)` with Hodge valuations in `[0, 2]`.
pub fn crystal(p: u32, rank: usize) -> VirtualCrystal {
    pc::random_crystal(&ring(p, 1, 5), rank, 2, 0, &mut rng())
}

pub fn free_phi_gauge(r: &Arc<WittRing>, rank: usize, len: i64) -> PhiGauge {
    pc::random_free_phi_gauge(r, rank, 0, len, &mut rng())
}
