//! Globally adaptive Gauss–Kronrod (7/15) quadrature for real or complex
//! integrands that may fail.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};
use crate::C64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl QuadOptions {
    pub fn new(abs_tol: f64) -> Self {
        Self { abs_tol, rel_tol: 0.0, max_intervals: 4000 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
    /// Bisections in this segment's ancestry that left the value settled but
    /// the error not shrinking.
    stalls: u8,
}

const NOISE_STALLS: u8 = 4;

impl<T> Segment<T> {
    /// Error dominated by evaluation noise; no longer refined.
    fn noisy(&self) -> bool {
        self.stalls >= NOISE_STALLS
    }
}

fn gk15<T: QuadValue, F: FnMut(f64) -> Result<T>>(f: &mut F, a: f64, b: f64) -> Result<Segment<T>> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x)?;
        let f2 = f(c + x)?;
        k = k + (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            g = g + (f1 + f2) * WG[j / 2];
        }
    }
    let value = k * h;
    let error = ((k - g) * h).magnitude();
    Ok(Segment { a, b, value, error, stalls: 0 })
}

/// Integrates `f` over `[a, b]`, first splitting at the supplied interior
/// `breakpoints` (points outside `(a, b)` are ignored).
///
/// Segments limited by evaluation noise stop being refined. Their error still
/// counts in the returned `error`, which may then exceed the tolerance.
pub fn integrate<T: QuadValue, F: FnMut(f64) -> Result<T>>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult<T>> {
    if a == b {
        return Ok(QuadResult { value: T::zero(), error: 0.0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    pts.push(lo);
    pts.extend(breakpoints.iter().copied().filter(|&p| p > lo && p < hi));
    pts.push(hi);
    pts.sort_by(|x, y| x.total_cmp(y));
    pts.dedup();

    let mut segs: Vec<Segment<T>> = Vec::new();
    for w in pts.windows(2) {
        if w[1] > w[0] {
            segs.push(gk15(&mut f, w[0], w[1])?);
        }
    }
    loop {
        let total: T = segs.iter().fold(T::zero(), |acc, s| acc + s.value);
        let err: f64 = segs.iter().map(|s| s.error).sum();
        let active: f64 = segs.iter().filter(|s| !s.noisy()).map(|s| s.error).sum();
        let tol = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        if active <= tol {
            return Ok(QuadResult { value: total * sign, error: err });
        }
        if segs.len() >= opts.max_intervals {
            return Err(Error::Quadrature { achieved: err, requested: tol });
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.noisy())
            .fold((0usize, -1.0), |(bi, be), (i, s)| if s.error > be { (i, s.error) } else { (bi, be) });
        let s = segs.swap_remove(worst);
        let mid = 0.5 * (s.a + s.b);
        if !(mid > s.a && mid < s.b) {
            // interval exhausted at machine resolution
            return Err(Error::Quadrature { achieved: err, requested: tol });
        }
        let mut left = gk15(&mut f, s.a, mid)?;
        let mut right = gk15(&mut f, mid, s.b)?;
        // roundoff test of QUADPACK's qags, required over several generations
        let sum = left.value + right.value;
        let stalled = left.error + right.error >= 0.99 * s.error && (sum - s.value).magnitude() <= 1e-5 * sum.magnitude();
        left.stalls = s.stalls + stalled as u8;
        right.stalls = s.stalls + stalled as u8;
        segs.push(left);
        segs.push(right);
    }
}
