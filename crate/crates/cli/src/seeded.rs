//! Reproducible random models. Seeds drive a PCG-64 (XSL-RR 128/64)
//! generator.

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;

use ssf_core::models::{build_finite, build_lattice, CouplingPath, RiggedModel};
use ssf_core::numkernel::{CMatrix, HermMatrix};
use ssf_core::C64;

pub struct Seeded(Pcg64);

impl Seeded {
    pub fn new(seed: u64) -> Self {
        Seeded(Pcg64::seed_from_u64(seed))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.0.random_range(lo..hi)
    }

    pub fn hermitian(&mut self, k: usize, scale: f64) -> HermMatrix {
        let a = CMatrix::from_fn(k, k, |_, _| C64::new(self.uniform(-1.0, 1.0), self.uniform(-1.0, 1.0)));
        HermMatrix::new((&a + a.adjoint()) * C64::new(0.5 * scale, 0.0)).unwrap()
    }

    /// Window of `k` distinct sites in `[-3, 3]`, weights in `[0.7, 1.3]`, a
    /// small background and a straight coupling of size `j_scale`.
    pub fn lattice(&mut self, k: usize, j_scale: f64) -> RiggedModel {
        let mut sites: Vec<i64> = Vec::with_capacity(k);
        while sites.len() < k {
            let s = self.0.random_range(-3i64..4);
            if !sites.contains(&s) {
                sites.push(s);
            }
        }
        sites.sort_unstable();
        let w: Vec<f64> = (0..k).map(|_| self.uniform(0.7, 1.3)).collect();
        let bg = self.hermitian(k, 0.3);
        let j = self.hermitian(k, j_scale);
        build_lattice(sites, w, bg, CouplingPath::straight(j)).unwrap()
    }

    pub fn finite(&mut self, n: usize, j_scale: f64) -> RiggedModel {
        let h0 = self.hermitian(n, 1.0);
        let j = self.hermitian(n, j_scale);
        build_finite(h0, CMatrix::identity(n, n), CouplingPath::straight(j)).unwrap()
    }
}
