//! Spectral shift function: infinitesimal spectral shift measure,
//! coupling-constant (Birman–Solomyak) integrals, the smoothed SSF and its
//! boundary limit, and the absolutely continuous / singular split.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};


#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use crate::error::{Error, Result};
use crate::models::{Backend, RiggedModel, TestFn};
use crate::numerics::Numerics;
use crate::numkernel::{eig_hermitian, CMatrix, HermMatrix};
use crate::quad::{integrate, QuadOptions};
use crate::resolvent::{pole_breakpoints, resonance_set, straight_poles, BaseResolvent, Side, SpectralPoint};

use core::f64::consts::PI;

/// Geometric grid `y_i = y0 * ratio^i`, `i < count`, for the limit `y -> 0+`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct YGrid {
    pub y0: f64,
    pub ratio: f64,
    pub count: usize,
    /// Richardson order (number of eliminated powers of `y`).
    pub order: usize,
}

impl Default for YGrid {
    fn default() -> Self {
        Self { y0: 1.0, ratio: 0.5, count: 24, order: 2 }
    }
}

impl YGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.y0 > 0.0) || !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Parameter(format!("y-grid needs y0 > 0 and ratio in (0, 1), got {} and {}", self.y0, self.ratio)));
        }
        if self.count < self.order + 2 {
            return Err(Error::Parameter(format!("y-grid count {} too small for order {}", self.count, self.order)));
        }
        if !(self.y_min() > 1e-12) {
            return Err(Error::Parameter(format!("y-grid reaches y = {:e} below 1e-12", self.y_min())));
        }
        Ok(())
    }

    pub fn y_min(&self) -> f64 {
        self.y0 * self.ratio.powi(self.count as i32 - 1)
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.y0 * self.ratio.powi(i as i32)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SSFSample {
    pub lambda: f64,
    pub xi: f64,
    pub xi_ac: f64,
    pub xi_s: f64,
    pub xi_s_rounded: i64,
    pub residual: f64,
    pub near_resonance: bool,
    pub extrapolation_quality: f64,
    pub extrapolation_failed: bool,
}

fn finite_backend_only(model: &RiggedModel) -> Result<()> {
    match model.backend() {
        Backend::Finite(_) => Ok(()),
        Backend::Lattice(_) => Err(Error::UnsupportedBackend("lattice")),
    }
}

fn quad_opts(numerics: &Numerics) -> QuadOptions {
    QuadOptions::new(numerics.quad_tol)
}

/// Real trace of the product of two matrices.
fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    s
}

/// `Tr(E_{H_r}(supp phi) V'_r phi(H_r))` (finite backend).
pub fn issm(model: &RiggedModel, r: f64, phi: &dyn TestFn) -> Result<f64> {
    finite_backend_only(model)?;
    let h = model.h_at(r)?;
    let vdot = model.v_dot(r)?;
    let eig = eig_hermitian(&h)?;
    let (a, b) = phi.support();
    let mut s = 0.0;
    for (j, &e) in eig.eigenvalues.iter().enumerate() {
        if e < a || e > b {
            continue;
        }
        let v = eig.eigenvectors.column(j);
        let d = (v.adjoint() * vdot.as_matrix() * v)[(0, 0)].re;
        s += phi.value(e) * d;
    }
    Ok(s)
}

/// `xi(phi) = int_0^1 issm(r)(phi) dr` (finite backend).
pub fn ssf_measure(model: &RiggedModel, phi: &dyn TestFn, numerics: &Numerics) -> Result<f64> {
    finite_backend_only(model)?;
    let bps = model.path().breakpoints();
    Ok(integrate(|r| issm(model, r, phi), 0.0, 1.0, &bps, quad_opts(numerics))?.value)
}

fn counting(eigs: &[f64], lambda: f64) -> i64 {
    eigs.iter().filter(|&&e| e <= lambda).count() as i64
}

fn endpoint_spectra(model: &RiggedModel) -> Result<(Vec<f64>, Vec<f64>)> {
    let e0 = eig_hermitian(&model.h_at(0.0)?)?.eigenvalues;
    let e1 = eig_hermitian(&model.h_at(1.0)?)?.eigenvalues;
    Ok((e0, e1))
}

/// `N_{H_0}(lambda) - N_{H_1}(lambda)` by direct eigenvalue counting.
pub fn ssf_counting_oracle(model: &RiggedModel, lambda: f64) -> Result<i64> {
    finite_backend_only(model)?;
    let (e0, e1) = endpoint_spectra(model)?;
    if e0.iter().chain(&e1).any(|e| (e - lambda).abs() <= 1e-10) {
        return Err(Error::IllPosed(format!("lambda = {lambda} is within 1e-10 of an endpoint eigenvalue")));
    }
    Ok(counting(&e0, lambda) - counting(&e1, lambda))
}

/// `int f(x) (N_0(x) - N_1(x)) dx` for two eigenvalue lists.
pub fn counting_integral(e0: &[f64], e1: &[f64], f: &dyn TestFn, tol: f64) -> Result<f64> {
    let (a, b) = f.support();
    let bps: Vec<f64> = e0.iter().chain(e1).copied().collect();
    let g = |x: f64| Ok(f.value(x) * (counting(e0, x) - counting(e1, x)) as f64);
    Ok(integrate(g, a, b, &bps, QuadOptions::new(tol))?.value)
}

/// `int phi(lambda) (N_{H_0}(lambda) - N_{H_1}(lambda)) d lambda` (finite
/// backend), the counting-density representation of `xi(phi)`.
pub fn counting_density_integral(model: &RiggedModel, phi: &dyn TestFn, numerics: &Numerics) -> Result<f64> {
    finite_backend_only(model)?;
    let (e0, e1) = endpoint_spectra(model)?;
    counting_integral(&e0, &e1, phi, numerics.quad_tol)
}

/// `(Tr(phi(H_1) - phi(H_0)), xi(phi'))` (finite backend).
pub fn trace_formula_check(model: &RiggedModel, phi: &dyn TestFn, numerics: &Numerics) -> Result<(f64, f64)> {
    finite_backend_only(model)?;
    let (e0, e1) = endpoint_spectra(model)?;
    let lhs: f64 = e1.iter().map(|&e| phi.value(e)).sum::<f64>() - e0.iter().map(|&e| phi.value(e)).sum::<f64>();
    let rhs = ssf_measure(model, &crate::models::Derivative(phi), numerics)?;
    Ok((lhs, rhs))
}

/// `(1/pi) int_0^1 Tr(J'_r Im T_z(H_r)) dr` at a fixed base resolvent.
fn coupling_integral(model: &RiggedModel, base: &BaseResolvent, lo: f64, hi: f64, bps: &[f64], numerics: &Numerics) -> Result<f64> {
    if base.im_vanishes() {
        return Ok(0.0);
    }
    let path = model.path();
    let f = |r: f64| {
        let s = base.at_r(path, r)?;
        Ok(trace_product(&path.j_dot(r), s.im_t.as_matrix()) / PI)
    };
    Ok(integrate(f, lo, hi, bps, quad_opts(numerics))?.value)
}

/// Smoothed SSF `xi(lambda + i y)`, `y > 0`.
pub fn smoothed_ssf(model: &RiggedModel, at: SpectralPoint, numerics: &Numerics) -> Result<f64> {
    if !(at.y > 0.0) {
        return Err(Error::Parameter(format!("smoothed SSF needs y > 0, got {}", at.y)));
    }
    let at = SpectralPoint { side: Side::Plus, ..at };
    let base = BaseResolvent::new(model, at)?;
    let bps = pole_breakpoints(&base, model.path(), 0.0, 1.0);
    coupling_integral(model, &base, 0.0, 1.0, &bps, numerics)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pointwise {
    pub xi: f64,
    /// Last extrapolation increment.
    pub quality: f64,
    /// Increments grew over the tail of the grid.
    pub diverged: bool,
}

/// Richardson extrapolation of samples at `y_i = y0 rho^i` assuming an error
/// expansion in integer powers of `y`.
pub fn richardson(samples: &[f64], ratio: f64, order: usize) -> Result<Pointwise> {
    if samples.len() < order + 2 {
        return Err(Error::Parameter(format!("{} samples are too few for order {order}", samples.len())));
    }
    let mut table: Vec<f64> = samples.to_vec();
    for m in 1..=order {
        let f = ratio.powi(m as i32);
        table = table.windows(2).map(|w| (w[1] - f * w[0]) / (1.0 - f)).collect();
    }
    let n = table.len();
    let incs: Vec<f64> = table.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let quality = incs[incs.len() - 1];
    let tail = &incs[incs.len().saturating_sub(4)..];
    let scale = 1e-12 * (1.0 + table[n - 1].abs());
    let diverged = tail.len() >= 3 && tail.windows(2).all(|w| w[1] > w[0] && w[1] > scale) && quality > 1e-6;
    Ok(Pointwise { xi: table[n - 1], quality, diverged })
}

/// Boundary limit `xi(lambda)` of the smoothed SSF along `grid`.
pub fn ssf_pointwise(model: &RiggedModel, lambda: f64, grid: &YGrid, numerics: &Numerics) -> Result<Pointwise> {
    grid.validate()?;
    let mut vals = Vec::with_capacity(grid.count);
    for y in grid.values() {
        vals.push(smoothed_ssf(model, SpectralPoint::upper(lambda, y), numerics)?);
    }
    richardson(&vals, grid.ratio, grid.order)
}

/// `(1/pi) Tr(J'_r Im T_{lambda+i0}(H_r))`.
pub fn issm_ac_density(model: &RiggedModel, r: f64, lambda: f64) -> Result<f64> {
    let base = BaseResolvent::new(model, SpectralPoint::boundary(lambda, Side::Plus))?;
    if base.im_vanishes() {
        return Ok(0.0);
    }
    let s = base.at_r(model.path(), r)?;
    Ok(trace_product(&model.path().j_dot(r), s.im_t.as_matrix()) / PI)
}

/// Least-squares polynomial of degree 4 through `(s_i, v_i)`; returns the
/// exact integral over `[s_lo, s_hi]`.
fn poly4_integral(s: &[f64], v: &[f64], s_lo: f64, s_hi: f64) -> Result<f64> {
    let n = s.len();
    let a = DMatrix::<f64>::from_fn(n, 5, |i, p| s[i].powi(p as i32));
    let b = DVector::<f64>::from_column_slice(v);
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|_| Error::NumericalFailure { what: "polynomial patch", residual: f64::NAN })?;
    let mut total = 0.0;
    for p in 0..5 {
        let q = (p + 1) as i32;
        total += coef[p] * (s_hi.powi(q) - s_lo.powi(q)) / q as f64;
    }
    Ok(total)
}

/// Absolutely continuous SSF `(1/pi) int_0^1 Tr(J'_r Im T_{lambda+i0}(H_r)) dr`
/// with polynomial patches across real resonance points.
pub fn ac_ssf(model: &RiggedModel, lambda: f64, numerics: &Numerics) -> Result<f64> {
    let base = BaseResolvent::new(model, SpectralPoint::boundary(lambda, Side::Plus))?;
    if base.im_vanishes() {
        return Ok(0.0);
    }
    let res = resonance_set(model, lambda, (0.0, 1.0), numerics)?.resonance_r_values;
    let delta = numerics.delta;
    for w in res.windows(2) {
        if w[1] - w[0] < 4.0 * delta {
            return Err(Error::Resolution { a: w[0], b: w[1] });
        }
    }
    let path = model.path();
    let density = |r: f64| -> Result<f64> {
        let s = base.at_r(path, r)?;
        Ok(trace_product(&path.j_dot(r), s.im_t.as_matrix()) / PI)
    };
    // excluded windows, clipped to [0, 1]
    let windows: Vec<(f64, f64, f64)> = res.iter().map(|&c| (c, (c - delta).max(0.0), (c + delta).min(1.0))).collect();
    let mut bps = pole_breakpoints(&base, path, 0.0, 1.0);
    bps.retain(|b| windows.iter().all(|&(_, lo, hi)| *b <= lo || *b >= hi));
    let mut total = 0.0;
    let mut cursor = 0.0;
    for &(c, lo, hi) in &windows {
        if lo > cursor {
            total += coupling_integral(model, &base, cursor, lo, &bps, numerics)?;
        }
        let left_ok = c - 3.0 * delta >= 0.0;
        let right_ok = c + 3.0 * delta <= 1.0;
        let offsets: Vec<f64> = match (left_ok, right_ok) {
            (true, true) => alloc::vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0],
            (false, true) => alloc::vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            (true, false) => alloc::vec![-6.0, -5.0, -4.0, -3.0, -2.0, -1.0],
            (false, false) => return Err(Error::Resolution { a: c, b: c }),
        };
        let vals = offsets.iter().map(|&o| density(c + o * delta)).collect::<Result<Vec<f64>>>()?;
        total += delta * poly4_integral(&offsets, &vals, (lo - c) / delta, (hi - c) / delta)?;
        cursor = hi;
    }
    if cursor < 1.0 {
        total += coupling_integral(model, &base, cursor, 1.0, &bps, numerics)?;
    }
    Ok(total)
}

/// Whether `lambda` sits close to the image of the resonance set: a pole of
/// the straight path that is almost but not quite real, or a real pole close
/// to an endpoint of `[0, 1]`.
fn near_resonance(model: &RiggedModel, lambda: f64, numerics: &Numerics) -> Result<bool> {
    let base = BaseResolvent::new(model, SpectralPoint::boundary(lambda, Side::Plus))?;
    let Some(j) = model.path().straight_direction() else {
        return Ok(false);
    };
    let poles = straight_poles(&base, j)?;
    Ok(poles.iter().any(|r| {
        let inside = r.re > -1e-3 && r.re < 1.0 + 1e-3;
        let nearly_real = r.im.abs() > numerics.res_real_tol && r.im.abs() < 1e-3;
        let at_end = r.im.abs() <= numerics.res_real_tol && (r.re.abs() < 1e-3 || (r.re - 1.0).abs() < 1e-3);
        inside && (nearly_real || at_end)
    }))
}

/// Full SSF decomposition at `lambda`.
pub fn singular_ssf(model: &RiggedModel, lambda: f64, numerics: &Numerics) -> Result<SSFSample> {
    let pw = ssf_pointwise(model, lambda, &numerics.ygrid, numerics)?;
    let xi_ac = ac_ssf(model, lambda, numerics)?;
    let xi_s = pw.xi - xi_ac;
    let rounded = xi_s.round();
    Ok(SSFSample {
        lambda,
        xi: pw.xi,
        xi_ac,
        xi_s,
        xi_s_rounded: rounded as i64,
        residual: (xi_s - rounded).abs(),
        near_resonance: near_resonance(model, lambda, numerics)?,
        extrapolation_quality: pw.quality,
        extrapolation_failed: pw.diverged,
    })
}

/// Helper for tests and suites: `Tr(J'_r Im T)` along a real `r` at a generic
/// spectral point.
pub fn coupling_density(model: &RiggedModel, at: SpectralPoint, r: f64) -> Result<f64> {
    let base = BaseResolvent::new(model, at)?;
    let s = base.at_r(model.path(), r)?;
    Ok(trace_product(&model.path().j_dot(r), s.im_t.as_matrix()) / PI)
}

/// `Tr(V'_r)` restricted by a Hermitian weight: used by the Poisson-smoothing
/// oracle of the infinitesimal spectral shift measure.
pub fn weighted_trace(a: &HermMatrix, b: &HermMatrix) -> f64 {
    trace_product(a.as_matrix(), b.as_matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_finite, build_lattice, Bump, CouplingPath, FnTest};
    use crate::numkernel::CMatrix;
    use crate::testutil::{seeded_hermitian, seeded_psd, Lcg};
    use crate::C64;

    fn scalar() -> RiggedModel {
        build_finite(HermMatrix::from_real_diagonal(&[0.0]), CMatrix::identity(1, 1), CouplingPath::straight(HermMatrix::identity(1))).unwrap()
    }

    fn diag02() -> RiggedModel {
        build_finite(
            HermMatrix::from_real_diagonal(&[0.0, 2.0]),
            CMatrix::identity(2, 2),
            CouplingPath::straight(HermMatrix::from_real_diagonal(&[1.0, 0.0])),
        )
        .unwrap()
    }

    fn rank_one(v: f64) -> RiggedModel {
        build_lattice(alloc::vec![0], alloc::vec![1.0], HermMatrix::zeros(1), CouplingPath::straight(HermMatrix::from_real_diagonal(&[v]))).unwrap()
    }

    fn seeded_finite(seed: u64, n: usize) -> RiggedModel {
        let mut rng = Lcg::new(seed);
        let h0 = seeded_hermitian(&mut rng, n, 1.0);
        let f = CMatrix::identity(n, n) + seeded_hermitian(&mut rng, n, 0.2).into_matrix();
        build_finite(h0, f, CouplingPath::straight(seeded_hermitian(&mut rng, n, 0.6))).unwrap()
    }

    fn seeded_lattice(seed: u64, k: usize) -> RiggedModel {
        let mut rng = Lcg::new(seed);
        let sites: Vec<i64> = (0..k as i64).map(|i| 2 * i - 1).collect();
        let w: Vec<f64> = (0..k).map(|_| rng.uniform(0.6, 1.4)).collect();
        let jbg = seeded_hermitian(&mut rng, k, 0.2);
        build_lattice(sites, w, jbg, CouplingPath::straight(seeded_hermitian(&mut rng, k, 1.0))).unwrap()
    }

    #[test]
    fn issm_examples() {
        let phi = Bump::new(-1.0, 2.0, 1.0).unwrap();
        for r in [0.1, 0.5, 0.9] {
            assert!((issm(&scalar(), r, &phi).unwrap() - phi.value(r)).abs() < 1e-14);
        }
        let far = Bump::new(5.0, 6.0, 1.0).unwrap();
        assert_eq!(issm(&seeded_finite(1, 6), 0.3, &far).unwrap(), 0.0);
        assert!(matches!(issm(&rank_one(1.0), 0.3, &phi), Err(Error::UnsupportedBackend(_))));
    }

    #[test]
    fn issm_matches_poisson_smoothing() {
        // (1/pi) int phi(l) y Tr(R_zbar V R_z) dl at y = 1e-5
        let m = seeded_finite(6, 6);
        let r = 0.37;
        let h = m.h_at(r).unwrap();
        let v = m.v_dot(r).unwrap();
        let phi = Bump::new(-0.8, 0.9, 1.0).unwrap();
        let y = 1e-5;
        let eig = eig_hermitian(&h).unwrap();
        let n = h.dim();
        let f = |l: f64| -> Result<f64> {
            let z = C64::new(l, y);
            let rz = (h.as_matrix() - CMatrix::identity(n, n) * z).try_inverse().unwrap();
            let tr = (rz.adjoint() * v.as_matrix() * &rz).trace().re;
            Ok(phi.value(l) * y * tr / PI)
        };
        let bps: Vec<f64> = eig.eigenvalues.iter().flat_map(|&e| [e - 10.0 * y, e, e + 10.0 * y]).collect();
        let oracle = integrate(f, -0.8, 0.9, &bps, QuadOptions::new(1e-9)).unwrap().value;
        assert!((oracle - issm(&m, r, &phi).unwrap()).abs() <= 1e-3);
    }

    #[test]
    fn ssf_measure_examples() {
        let nm = Numerics::default();
        let phi = Bump::new(-0.5, 1.5, 1.0).unwrap();
        let direct = integrate(|x| Ok(phi.value(x)), 0.0, 1.0, &[], QuadOptions::new(1e-13)).unwrap().value;
        assert!((ssf_measure(&scalar(), &phi, &nm).unwrap() - direct).abs() < 1e-10);
        let zero = seeded_finite(2, 4).with_path(CouplingPath::zero(4)).unwrap();
        assert_eq!(ssf_measure(&zero, &phi, &nm).unwrap(), 0.0);
        let inside = Bump::new(1.5, 1.9, 1.0).unwrap();
        assert!(ssf_measure(&diag02(), &inside, &nm).unwrap().abs() < 1e-14);
        assert!(counting_density_integral(&diag02(), &inside, &nm).unwrap().abs() < 1e-14);
    }

    #[test]
    fn counting_oracle_examples() {
        assert_eq!(ssf_counting_oracle(&scalar(), 0.5).unwrap(), 1);
        assert_eq!(ssf_counting_oracle(&scalar(), 2.0).unwrap(), 0);
        assert_eq!(ssf_counting_oracle(&diag02(), 0.5).unwrap(), 1);
        assert!(matches!(ssf_counting_oracle(&scalar(), 1.0), Err(Error::IllPosed(_))));
    }

    #[test]
    fn smoothed_examples() {
        let nm = Numerics::default();
        let v = smoothed_ssf(&scalar(), SpectralPoint::upper(0.5, 0.5), &nm).unwrap();
        // (1/pi)(atan(1) + atan(1))
        assert!((v - 0.5).abs() < 1e-12);
        let zero = rank_one(1.0).with_path(CouplingPath::zero(1)).unwrap();
        assert_eq!(smoothed_ssf(&zero, SpectralPoint::upper(0.3, 0.1), &nm).unwrap(), 0.0);
        let v = smoothed_ssf(&rank_one(2.0), SpectralPoint::upper(0.0, 0.01), &nm).unwrap();
        assert!((v - 0.25).abs() < 1e-2);
        assert!(smoothed_ssf(&scalar(), SpectralPoint::upper(0.5, 0.0), &nm).is_err());
    }

    #[test]
    fn smoothed_scalar_matches_arctan_for_many_y() {
        let nm = Numerics::default();
        for y in [1.0, 0.1, 1e-3, 1e-6] {
            let v = smoothed_ssf(&scalar(), SpectralPoint::upper(0.3, y), &nm).unwrap();
            let exact = ((1.0f64 - 0.3) / y).atan() / PI + (0.3 / y).atan() / PI;
            assert!((v - exact).abs() < 1e-9, "y {y}: {v} vs {exact}");
        }
    }

    #[test]
    fn smoothed_matches_log_det_oracle() {
        // (1/pi) Im log det(1 + T0 J) along a straight path, branch continuous in r
        let nm = Numerics::default();
        let m = seeded_lattice(4, 3);
        let j = m.path().straight_direction().unwrap().clone();
        for (l, y) in [(0.4, 0.3), (-1.5, 0.05), (2.4, 0.2)] {
            let at = SpectralPoint::upper(l, y);
            let base = BaseResolvent::new(&m, at).unwrap();
            let k = base.k();
            let mut phase = 0.0;
            let mut prev = C64::new(1.0, 0.0);
            for i in 1..=4000 {
                let r = i as f64 / 4000.0;
                let d = crate::numkernel::determinant(&(CMatrix::identity(k, k) + base.t() * j.as_matrix() * C64::new(r, 0.0)));
                phase += (d / prev).arg();
                prev = d;
            }
            let v = smoothed_ssf(&m, at, &nm).unwrap();
            assert!((v - phase / PI).abs() < 1e-9, "{v} vs {}", phase / PI);
        }
    }

    #[test]
    fn pointwise_examples() {
        let nm = Numerics::default();
        let g = YGrid::default();
        let p = ssf_pointwise(&scalar(), 0.5, &g, &nm).unwrap();
        assert!((p.xi - 1.0).abs() < 1e-6, "{p:?}");
        let p = ssf_pointwise(&scalar(), 2.0, &g, &nm).unwrap();
        assert!(p.xi.abs() < 1e-6);
        let p = ssf_pointwise(&rank_one(2.0), 0.0, &g, &nm).unwrap();
        assert!((p.xi - 0.25).abs() < 1e-4, "{p:?}");
    }

    #[test]
    fn richardson_removes_two_powers() {
        let g = YGrid { count: 12, ..YGrid::default() };
        let s: Vec<f64> = g.values().iter().map(|y| 3.0 + 0.7 * y - 2.0 * y * y).collect();
        let p = richardson(&s, g.ratio, 2).unwrap();
        assert!((p.xi - 3.0).abs() < 1e-12 && !p.diverged);
    }

    #[test]
    fn ac_density_examples() {
        assert_eq!(issm_ac_density(&scalar(), 0.4, 0.5).unwrap(), 0.0);
        for r in [0.0, 0.3, 1.0] {
            let d = issm_ac_density(&rank_one(2.0), r, 0.0).unwrap();
            assert!((d - 1.0 / (PI * (1.0 + r * r))).abs() < 1e-15);
        }
        let mut rng = Lcg::new(12);
        let jpsd = seeded_psd(&mut rng, 3, 3);
        let m = seeded_lattice(12, 3).with_path(CouplingPath::straight(jpsd)).unwrap();
        for l in [-1.5, -0.2, 0.9, 1.7] {
            for r in [0.0, 0.5, 1.0] {
                assert!(issm_ac_density(&m, r, l).unwrap() >= 0.0);
            }
        }
    }

    #[test]
    fn ac_ssf_examples() {
        let nm = Numerics::default();
        assert_eq!(ac_ssf(&scalar(), 0.5, &nm).unwrap(), 0.0);
        assert!((ac_ssf(&rank_one(2.0), 0.0, &nm).unwrap() - 0.25).abs() < 1e-8);
        for v in [1.0, 4.0] {
            let exact = (v / 2.0f64).atan() / PI;
            assert!((ac_ssf(&rank_one(v), 0.0, &nm).unwrap() - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn ac_ssf_patches_across_resonance() {
        // in-band real resonance: window {0, 1} with J = t sigma_x has a
        // resonance where 1 + r t G(0,1)... chosen numerically below
        let nm = Numerics::default();
        let m = build_lattice(
            alloc::vec![0],
            alloc::vec![1.0],
            HermMatrix::zeros(1),
            CouplingPath::straight(HermMatrix::from_real_diagonal(&[3.0])),
        )
        .unwrap();
        // outside the band the a.c. part vanishes even with a resonance in (0, 1)
        assert_eq!(ac_ssf(&m, 2.5, &nm).unwrap(), 0.0);
        // patch integral is exact for a quartic
        let s = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let v: Vec<f64> = s.iter().map(|x: &f64| 1.0 + x - 2.0 * x.powi(3) + 0.5 * x.powi(4)).collect();
        let exact = 2.0 + 0.5 * 2.0 / 5.0;
        assert!((poly4_integral(&s, &v, -1.0, 1.0).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn singular_ssf_examples() {
        let nm = Numerics::default();
        let s = singular_ssf(&scalar(), 0.5, &nm).unwrap();
        assert_eq!(s.xi_s_rounded, 1);
        assert!(s.residual <= 1e-6 && s.xi_ac == 0.0);
        let s = singular_ssf(&rank_one(2.0), 0.0, &nm).unwrap();
        assert!(s.xi_s.abs() < 1e-4);
        let s = singular_ssf(&rank_one(3.0), 2.5, &nm).unwrap();
        assert_eq!(s.xi_ac, 0.0);
        assert_eq!(s.xi_s_rounded, 1);
        assert!(s.residual < 1e-6, "{s:?}");
        assert!((s.xi - (s.xi_ac + s.xi_s)).abs() == 0.0);
    }

    #[test]
    fn trace_formula_examples() {
        let nm = Numerics::default();
        let phi = Bump::new(-0.6, 1.7, 1.0).unwrap();
        let (l, r) = trace_formula_check(&scalar(), &phi, &nm).unwrap();
        assert!((l - (phi.value(1.0) - phi.value(0.0))).abs() < 1e-15);
        assert!((l - r).abs() < 1e-9);
        let far = Bump::new(30.0, 31.0, 1.0).unwrap();
        assert_eq!(trace_formula_check(&seeded_finite(3, 6), &far, &nm).unwrap(), (0.0, 0.0));
        let (l, r) = trace_formula_check(&seeded_finite(3, 6), &Bump::new(-2.0, 1.5, 1.0).unwrap(), &nm).unwrap();
        assert!((l - r).abs() <= 1e-8, "{l} vs {r}");
    }

    #[test]
    fn path_independence_and_absolute_continuity() {
        let nm = Numerics::default();
        let mut rng = Lcg::new(17);
        let m = seeded_finite(17, 5);
        let j_end = m.path().straight_direction().unwrap().clone();
        let mid = HermMatrix::new(j_end.as_matrix().map(|z| z * 0.5) + seeded_hermitian(&mut rng, 5, 0.4).into_matrix()).unwrap();
        let bent = m.with_path(CouplingPath::bent(mid, j_end).unwrap()).unwrap();
        let phi = Bump::new(-1.0, 1.2, 1.0).unwrap();
        let a = ssf_measure(&m, &phi, &nm).unwrap();
        let b = ssf_measure(&bent, &phi, &nm).unwrap();
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        let c = counting_density_integral(&m, &phi, &nm).unwrap();
        assert!((a - c).abs() <= 1e-8, "{a} vs {c}");
    }

    #[test]
    fn invariance_principle() {
        let nm = Numerics::default();
        let m = seeded_finite(23, 4);
        let g = |x: f64| x + 0.3 * x.sin();
        let gp = |x: f64| 1.0 + 0.3 * x.cos();
        let e0: Vec<f64> = eig_hermitian(&m.h_at(0.0).unwrap()).unwrap().eigenvalues.iter().map(|&e| g(e)).collect();
        let e1: Vec<f64> = eig_hermitian(&m.h_at(1.0).unwrap()).unwrap().eigenvalues.iter().map(|&e| g(e)).collect();
        let f = Bump::new(-1.2, 1.1, 1.0).unwrap();
        let lhs = counting_integral(&e0, &e1, &f, 1e-12).unwrap();
        // support of f o g is g^{-1}([a, b])
        let inv = |t: f64| {
            let (mut a, mut b) = (-10.0, 10.0);
            for _ in 0..200 {
                let c = 0.5 * (a + b);
                if g(c) < t { a = c } else { b = c }
            }
            0.5 * (a + b)
        };
        let composed = FnTest { value: |x: f64| f.value(g(x)) * gp(x), derivative: |_x: f64| f64::NAN, support: (inv(-1.2), inv(1.1)) };
        let rhs = ssf_measure(&m, &composed, &nm).unwrap();
        assert!((lhs - rhs).abs() <= 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn additivity_in_endpoints() {
        let nm = Numerics { ygrid: YGrid { count: 18, ..YGrid::default() }, ..Numerics::default() };
        let m = seeded_lattice(8, 2);
        let j = m.path().straight_direction().unwrap().clone();
        let (a, b) = (0.0, 0.4);
        let first = m.with_path(CouplingPath::straight(j.scale(b - a))).unwrap();
        let second = m.rebased(b, CouplingPath::straight(j.scale(1.0 - b))).unwrap();
        for l in [-1.3, 0.2, 1.1] {
            let x1 = ssf_pointwise(&first, l, &nm.ygrid, &nm).unwrap().xi;
            let x2 = ssf_pointwise(&second, l, &nm.ygrid, &nm).unwrap().xi;
            let x = ssf_pointwise(&m, l, &nm.ygrid, &nm).unwrap().xi;
            assert!((x1 + x2 - x).abs() <= 1e-6, "lambda {l}: {x1} + {x2} vs {x}");
        }
    }

    #[test]
    fn monotone_perturbations_give_nonnegative_shift() {
        let nm = Numerics::default();
        for seed in 0..3 {
            let mut rng = Lcg::new(seed + 40);
            let m = seeded_lattice(seed + 40, 3).with_path(CouplingPath::straight(seeded_psd(&mut rng, 3, 2))).unwrap();
            for l in [-1.4, 0.1, 1.6, 2.5] {
                assert!(ac_ssf(&m, l, &nm).unwrap() >= -1e-10);
                for y in [1.0, 1e-2, 1e-4] {
                    assert!(smoothed_ssf(&m, SpectralPoint::upper(l, y), &nm).unwrap() >= -1e-10);
                }
            }
        }
    }

    #[test]
    fn ygrid_validation() {
        assert!(YGrid::default().validate().is_ok());
        assert!((YGrid::default().y_min() - 0.5f64.powi(23)).abs() < 1e-22);
        assert!(YGrid { ratio: 1.0, ..YGrid::default() }.validate().is_err());
        assert!(YGrid { count: 60, ..YGrid::default() }.validate().is_err());
        assert!(YGrid { count: 3, ..YGrid::default() }.validate().is_err());
    }
}
