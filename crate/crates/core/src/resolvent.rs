//! Sandwiched resolvents `T_z(H_r) = F (H_r - z)^{-1} F*`, their imaginary
//! parts, boundary values at `lambda +- i0`, regularity and resonance sets.

use alloc::format;
use alloc::vec::Vec;



#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use crate::error::{Error, Result};
use crate::models::{Backend, CouplingPath, RiggedModel};
use crate::numerics::Numerics;
use crate::numkernel::{eig_general, im_part, max_abs, solve, CMatrix, CVector, HermMatrix};
use crate::C64;

const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
        }
    }
}

/// `z = lambda + i*sign*y`; `y = 0` denotes the boundary value `lambda +- i0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPoint {
    pub lambda: f64,
    pub y: f64,
    pub side: Side,
}

impl SpectralPoint {
    pub fn new(lambda: f64, y: f64, side: Side) -> Result<Self> {
        if !(y >= 0.0) || !lambda.is_finite() || !y.is_finite() {
            return Err(Error::Parameter(format!("invalid spectral point lambda = {lambda}, y = {y}")));
        }
        Ok(Self { lambda, y, side })
    }

    pub fn boundary(lambda: f64, side: Side) -> Self {
        Self { lambda, y: 0.0, side }
    }

    /// `lambda + i y` in the upper half-plane.
    pub fn upper(lambda: f64, y: f64) -> Self {
        Self { lambda, y, side: Side::Plus }
    }

    pub fn z(&self) -> C64 {
        C64::new(self.lambda, self.side.sign() * self.y)
    }

    pub fn conj(&self) -> Self {
        Self { side: self.side.flip(), ..*self }
    }

    pub fn is_boundary(&self) -> bool {
        self.y == 0.0
    }
}

/// Root `zeta` of `zeta^2 - z zeta + 1 = 0` with `|zeta| < 1` (or its
/// boundary value on the band).
fn zeta_at(at: &SpectralPoint) -> Result<C64> {
    let l = at.lambda;
    if at.y == 0.0 {
        if l.abs() == 2.0 {
            return Err(Error::BoundaryUndefined { lambda: l, reason: "band edge of the free lattice" });
        }
        if l.abs() < 2.0 {
            // zeta = e^{-+ i theta}, lambda = 2 cos theta
            let s = (4.0 - l * l).sqrt() / 2.0;
            return Ok(C64::new(l / 2.0, -at.side.sign() * s));
        }
        let w = (l * l - 4.0).sqrt();
        return Ok(C64::new(2.0 / (l + l.signum() * w), 0.0));
    }
    let z = at.z();
    let w = (z - 2.0).sqrt() * (z + 2.0).sqrt();
    Ok(ONE * 2.0 / (z + w))
}

fn green_from_zeta(zeta: C64, m: i64, n: i64) -> C64 {
    let d = (m - n).unsigned_abs();
    let mut p = ONE;
    for _ in 0..d {
        p *= zeta;
    }
    p / (zeta - zeta.inv())
}

/// Kernel `G_z(m, n)` of `(Delta - z)^{-1}` for the free Jacobi operator
/// `(Delta u)(n) = u(n+1) + u(n-1)`.
pub fn green_free_lattice(at: &SpectralPoint, m: i64, n: i64) -> Result<C64> {
    Ok(green_from_zeta(zeta_at(at)?, m, n))
}

/// Same kernel at a complex `z`; real `z` must lie outside `[-2, 2]`.
pub fn green_free_lattice_z(z: C64, m: i64, n: i64) -> Result<C64> {
    if z.im == 0.0 && z.re.abs() <= 2.0 {
        return Err(Error::BoundaryUndefined { lambda: z.re, reason: "real z on the band needs a side" });
    }
    let side = if z.im < 0.0 { Side::Minus } else { Side::Plus };
    green_free_lattice(&SpectralPoint { lambda: z.re, y: z.im.abs(), side }, m, n)
}

#[derive(Clone, Debug)]
pub struct SandwichedResolvent {
    pub at: SpectralPoint,
    pub r: f64,
    pub t: CMatrix,
    pub im_t: HermMatrix,
}

/// Data at a fixed spectral point that every `r` reuses: `T_z(H_base)` and
/// its imaginary part.
#[derive(Clone, Debug)]
pub struct BaseResolvent {
    at: SpectralPoint,
    t0: CMatrix,
    im_t0: HermMatrix,
    /// Imaginary part vanishes identically (finite backend on the axis, or
    /// lattice outside the band on the axis).
    im_zero: bool,
}

fn invertible(m: &CMatrix) -> bool {
    if m.is_empty() {
        return true;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    let smin = sv.iter().fold(f64::INFINITY, |a: f64, &s| a.min(s));
    smin.is_finite() && smin > 1e-12 * smax
}

/// `(1 + T0 J)^{-1} T0` and `(1 + T0* J)^{-1} Im T0 (1 + J T0)^{-1}`.
fn perturb(t0: &CMatrix, im_t0: Option<&CMatrix>, j: &CMatrix, r: C64) -> Result<(CMatrix, Option<CMatrix>)> {
    let k = t0.nrows();
    let id = CMatrix::identity(k, k);
    let m = &id + t0 * j;
    if !invertible(&m) {
        return Err(Error::ResonanceHit { r });
    }
    let t = solve(&m, t0).map_err(|_| Error::ResonanceHit { r })?;
    let im = match im_t0 {
        None => None,
        Some(im0) => {
            let a = &id + t0.adjoint() * j;
            if !invertible(&a) {
                return Err(Error::ResonanceHit { r });
            }
            let left = solve(&a, im0).map_err(|_| Error::ResonanceHit { r })?;
            let b = &id + j * t0;
            // left * b^{-1} = (b^{-T} left^T)^T
            let right = solve(&b.transpose(), &left.transpose()).map_err(|_| Error::ResonanceHit { r })?;
            Some(right.transpose())
        }
    };
    Ok((t, im))
}

impl BaseResolvent {
    pub fn new(model: &RiggedModel, at: SpectralPoint) -> Result<Self> {
        match model.backend() {
            Backend::Finite(fb) => {
                let spec = fb.h0_spectrum();
                let z = at.z();
                if at.y == 0.0 {
                    let scale = 1.0 + spec.eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
                    if spec.eigenvalues.iter().any(|e| (e - at.lambda).abs() <= 1e-10 * scale) {
                        return Err(Error::BoundaryUndefined { lambda: at.lambda, reason: "eigenvalue of the base operator" });
                    }
                }
                let n = spec.eigenvalues.len();
                let fv = &fb.f * &spec.eigenvectors;
                let d = CVector::from_iterator(n, spec.eigenvalues.iter().map(|&e| ONE / (C64::new(e, 0.0) - z)));
                let t0 = &fv * CMatrix::from_diagonal(&d) * fv.adjoint();
                let (im_t0, im_zero) = if at.y == 0.0 {
                    (HermMatrix::zeros(n), true)
                } else {
                    let di = CVector::from_iterator(n, d.iter().map(|v| C64::new(v.im, 0.0)));
                    (HermMatrix::new(&fv * CMatrix::from_diagonal(&di) * fv.adjoint())?, false)
                };
                Ok(Self { at, t0, im_t0, im_zero })
            }
            Backend::Lattice(lb) => {
                let zeta = zeta_at(&at)?;
                let k = lb.sites.len();
                let tf = CMatrix::from_fn(k, k, |i, j| {
                    green_from_zeta(zeta, lb.sites[i], lb.sites[j]) * (lb.weights[i] * lb.weights[j])
                });
                let im_zero = at.y == 0.0 && at.lambda.abs() > 2.0;
                let im_f = if im_zero { CMatrix::zeros(k, k) } else { im_part(&tf).into_matrix() };
                let jbg = lb.j_bg.as_matrix();
                if max_abs(jbg) == 0.0 {
                    return Ok(Self { at, t0: tf, im_t0: HermMatrix::new(im_f)?, im_zero });
                }
                let (t0, im0) = perturb(&tf, (!im_zero).then_some(&im_f), jbg, C64::new(0.0, 0.0)).map_err(|e| match e {
                    Error::ResonanceHit { .. } => {
                        Error::BoundaryUndefined { lambda: at.lambda, reason: "background coupling is resonant here" }
                    }
                    other => other,
                })?;
                let im_t0 = match im0 {
                    Some(m) => HermMatrix::new(m)?,
                    None => HermMatrix::zeros(k),
                };
                Ok(Self { at, t0, im_t0, im_zero })
            }
        }
    }

    pub fn at(&self) -> SpectralPoint {
        self.at
    }

    pub fn t(&self) -> &CMatrix {
        &self.t0
    }

    pub fn im_t(&self) -> &HermMatrix {
        &self.im_t0
    }

    /// Whether `Im T` vanishes identically at this point for every `r`.
    pub fn im_vanishes(&self) -> bool {
        self.im_zero
    }

    pub fn k(&self) -> usize {
        self.t0.nrows()
    }

    /// `T_z(H_r)` for a real coupling parameter.
    pub fn at_r(&self, path: &CouplingPath, r: f64) -> Result<SandwichedResolvent> {
        self.with_coupling(&path.j_at(r), r)
    }

    /// `T_z` of `H_base + F* j F` for an explicit self-adjoint coupling `j`.
    pub fn with_coupling(&self, j: &CMatrix, r: f64) -> Result<SandwichedResolvent> {
        let im0 = (!self.im_zero).then(|| self.im_t0.as_matrix());
        let (t, im) = perturb(&self.t0, im0, j, C64::new(r, 0.0))?;
        let im_t = match im {
            Some(m) => HermMatrix::new(m)?,
            None => HermMatrix::zeros(self.k()),
        };
        Ok(SandwichedResolvent { at: self.at, r, t, im_t })
    }

    /// Meromorphic continuation in `r`: `T_z(H_r)` and
    /// `(T_z(H_r) - T_zbar(H_r)) / 2i` for complex `r`.
    pub fn at_complex(&self, path: &CouplingPath, r: C64) -> Result<(CMatrix, CMatrix)> {
        let j = path.j_at_complex(r);
        let (t, im) = perturb(&self.t0, Some(self.im_t0.as_matrix()), &j, r)?;
        Ok((t, im.unwrap()))
    }
}

pub fn t_base(model: &RiggedModel, at: SpectralPoint) -> Result<SandwichedResolvent> {
    let b = BaseResolvent::new(model, at)?;
    Ok(SandwichedResolvent { at, r: 0.0, t: b.t0, im_t: b.im_t0 })
}

pub fn t_at(model: &RiggedModel, r: f64, at: SpectralPoint) -> Result<SandwichedResolvent> {
    BaseResolvent::new(model, at)?.at_r(model.path(), r)
}

/// Complex coupling parameter: returns `T` and the continued imaginary part.
pub fn t_at_complex(model: &RiggedModel, r: C64, at: SpectralPoint) -> Result<(CMatrix, CMatrix)> {
    BaseResolvent::new(model, at)?.at_complex(model.path(), r)
}

pub fn im_t_at(model: &RiggedModel, r: f64, at: SpectralPoint) -> Result<HermMatrix> {
    Ok(t_at(model, r, at)?.im_t)
}

pub fn is_regular(model: &RiggedModel, r: f64, lambda: f64, side: Side) -> bool {
    t_at(model, r, SpectralPoint::boundary(lambda, side)).is_ok()
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegularityInfo {
    pub lambda: f64,
    pub regular_base: bool,
    pub resonance_r_values: Vec<f64>,
    /// Schatten class index of the boundary values; always 1 for finite rank.
    pub p_class: u32,
}

/// Eigenvalues `sigma` of `J T_z(H_base)`; poles of the straight path sit at
/// `r = -1/sigma`.
pub fn straight_poles(base: &BaseResolvent, j: &HermMatrix) -> Result<Vec<C64>> {
    let sig = eig_general(&(j.as_matrix() * base.t()))?;
    let mut out: Vec<C64> = sig.into_iter().filter(|s| s.norm() >= 1e-14).map(|s| -s.inv()).collect();
    out.sort_by(crate::numkernel::complex_order);
    Ok(out)
}

/// Breakpoints for coupling-constant quadratures at a fixed spectral point:
/// real parts of the poles of `r -> T_z(H_r)` on linear pieces (plus a few
/// pole widths on either side) and the path breakpoints, restricted to
/// `(lo, hi)`.
pub fn pole_breakpoints(base: &BaseResolvent, path: &CouplingPath, lo: f64, hi: f64) -> Vec<f64> {
    let k = base.k();
    let mut out: Vec<f64> = path.breakpoints();
    for piece in path.pieces() {
        if piece.coeffs.len() > 2 {
            continue;
        }
        let m0 = CMatrix::identity(k, k) + base.t() * piece.coeffs[0].as_matrix();
        let Some(c1) = piece.coeffs.get(1) else { continue };
        let Ok(a) = solve(&m0, &(base.t() * c1.as_matrix())) else { continue };
        let Ok(sig) = eig_general(&a) else { continue };
        for s in sig.into_iter().filter(|s| s.norm() >= 1e-14) {
            let r = -s.inv();
            if r.re < piece.start - 1e-9 || r.re > piece.end + 1e-9 {
                continue;
            }
            out.push(r.re);
            let w = r.im.abs();
            for f in [1.0, 10.0, 100.0] {
                out.push(r.re - f * w);
                out.push(r.re + f * w);
            }
        }
    }
    out.retain(|&x| x > lo && x < hi && x.is_finite());
    dedupe_sorted(out, 0.0)
}

fn smallest_sv(base: &BaseResolvent, path: &CouplingPath, r: f64) -> f64 {
    let k = base.k();
    let m = CMatrix::identity(k, k) + base.t() * path.j_at(r);
    m.svd(false, false).singular_values.iter().fold(f64::INFINITY, |a: f64, &s| a.min(s))
}

fn dedupe_sorted(mut v: Vec<f64>, tol: f64) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        if out.last().is_none_or(|&l| x - l > tol) {
            out.push(x);
        }
    }
    out
}

/// Real poles of `r -> T_{lambda+i0}(H_r)` in `[lo, hi]`.
pub fn resonance_set(model: &RiggedModel, lambda: f64, interval: (f64, f64), numerics: &Numerics) -> Result<RegularityInfo> {
    let (lo, hi) = interval;
    let base = BaseResolvent::new(model, SpectralPoint::boundary(lambda, Side::Plus))?;
    let values = if let Some(j) = model.path().straight_direction() {
        let poles = straight_poles(&base, j)?;
        poles
            .into_iter()
            .filter(|r| r.im.abs() <= numerics.res_real_tol && r.re >= lo && r.re <= hi)
            .map(|r| r.re)
            .collect()
    } else {
        scan_resonances(&base, model.path(), lo, hi, numerics.res_real_tol)
    };
    Ok(RegularityInfo { lambda, regular_base: true, resonance_r_values: dedupe_sorted(values, 1e-8), p_class: 1 })
}

fn scan_resonances(base: &BaseResolvent, path: &CouplingPath, lo: f64, hi: f64, real_tol: f64) -> Vec<f64> {
    const N: usize = 400;
    let mut found = Vec::new();
    let mut edges: Vec<f64> = Vec::new();
    edges.push(lo);
    edges.extend(path.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
    edges.push(hi);
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = (b - a) / N as f64;
        let grid: Vec<f64> = (0..=N).map(|i| a + h * i as f64).collect();
        let vals: Vec<f64> = grid.iter().map(|&r| smallest_sv(base, path, r)).collect();
        for i in 0..=N {
            let left = if i > 0 { vals[i - 1] } else { f64::INFINITY };
            let right = if i < N { vals[i + 1] } else { f64::INFINITY };
            if !(vals[i] <= left && vals[i] < right) {
                continue;
            }
            let (mut x0, mut x1) = (grid[i.saturating_sub(1)], grid[(i + 1).min(N)]);
            let g = 0.5 * (5.0f64.sqrt() - 1.0);
            let mut c = x1 - g * (x1 - x0);
            let mut d = x0 + g * (x1 - x0);
            let (mut fc, mut fd) = (smallest_sv(base, path, c), smallest_sv(base, path, d));
            while x1 - x0 > 1e-12 * (1.0 + x0.abs()) {
                if fc < fd {
                    x1 = d;
                    d = c;
                    fd = fc;
                    c = x1 - g * (x1 - x0);
                    fc = smallest_sv(base, path, c);
                } else {
                    x0 = c;
                    c = d;
                    fc = fd;
                    d = x0 + g * (x1 - x0);
                    fd = smallest_sv(base, path, d);
                }
            }
            let r = 0.5 * (x0 + x1);
            let m = smallest_sv(base, path, r);
            let hs = 1e-6;
            let slope = 0.5 * (smallest_sv(base, path, r + hs) + smallest_sv(base, path, r - hs) - 2.0 * m) / hs;
            // distance of the nearest pole to the real axis, from the V-shaped minimum
            if slope > 0.0 && m / slope <= real_tol {
                found.push(r);
            }
        }
    }
    found
}
