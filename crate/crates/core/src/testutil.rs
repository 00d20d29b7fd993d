//! Seeded fixtures for unit tests.

use crate::numkernel::{CMatrix, HermMatrix};
use crate::C64;

/// 64-bit LCG (Knuth MMIX constants).
pub struct Lcg(u64);

impl Lcg {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }
}

pub fn seeded_hermitian(rng: &mut Lcg, n: usize, scale: f64) -> HermMatrix {
    let a = CMatrix::from_fn(n, n, |_, _| C64::new(rng.uniform(-scale, scale), rng.uniform(-scale, scale)));
    HermMatrix::new(&a + a.adjoint()).unwrap().scale(0.5)
}

/// PSD matrix of the given rank.
pub fn seeded_psd(rng: &mut Lcg, n: usize, rank: usize) -> HermMatrix {
    let b = CMatrix::from_fn(n, rank, |_, _| C64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)));
    HermMatrix::new(&b * b.adjoint()).unwrap()
}
