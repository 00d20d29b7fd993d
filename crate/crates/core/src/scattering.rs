//! Fibre spaces, evaluation operators, wave matrices, scattering matrices and
//! the coupling-constant ordered exponential.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::models::RiggedModel;
use crate::numerics::Numerics;
use crate::numkernel::{determinant, eig_hermitian, max_abs, op_norm, CMatrix, CVector, HermMatrix};
use crate::quad::{integrate, QuadOptions};
use crate::resolvent::{resonance_set, BaseResolvent, SandwichedResolvent, Side, SpectralPoint};
use crate::ssf::{ac_ssf, smoothed_ssf, ssf_pointwise};
use crate::C64;

use core::f64::consts::PI;

const I: C64 = C64::new(0.0, 1.0);

/// Orthonormal basis of the range of `Im T_{lambda+i0}(H_r)`.
#[derive(Clone, Debug)]
pub struct FibreBasis {
    pub lambda: f64,
    pub r: f64,
    /// `k x d`, orthonormal columns.
    pub basis: CMatrix,
    /// Retained eigenvalues of `Im T`, descending.
    pub values: Vec<f64>,
}

impl FibreBasis {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn k(&self) -> usize {
        self.basis.nrows()
    }

    /// `B diag(sqrt s)`, so that `sqrt(Im T) = sqrt_cols() B*`.
    fn sqrt_cols(&self) -> CMatrix {
        scale_cols(&self.basis, self.values.iter().map(|s| s.sqrt()))
    }

    /// `B diag(1/sqrt s)`: the pseudo-inverse of `sqrt(Im T)` on the fibre.
    fn inv_sqrt_cols(&self) -> CMatrix {
        scale_cols(&self.basis, self.values.iter().map(|s| 1.0 / s.sqrt()))
    }

    pub fn sqrt_im_t(&self) -> CMatrix {
        self.sqrt_cols() * self.basis.adjoint()
    }

    /// `B S B* + (1 - B B*)`.
    pub fn embed(&self, s: &CMatrix) -> CMatrix {
        let k = self.k();
        let p = &self.basis * self.basis.adjoint();
        CMatrix::identity(k, k) - p + &self.basis * s * self.basis.adjoint()
    }
}

fn scale_cols(b: &CMatrix, f: impl Iterator<Item = f64>) -> CMatrix {
    let mut out = b.clone();
    for (j, s) in f.enumerate() {
        out.column_mut(j).scale_mut(s);
    }
    out
}

fn fibre_from(lambda: f64, r: f64, im_t: &HermMatrix, rank_tol: f64) -> Result<FibreBasis> {
    let k = im_t.dim();
    let eig = eig_hermitian(im_t)?;
    let smax = eig.eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let mut idx: Vec<usize> = (0..k).filter(|&i| smax > 0.0 && eig.eigenvalues[i] > rank_tol * smax).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut basis = CMatrix::zeros(k, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        let v = eig.eigenvectors.column(i);
        let pivot = (0..k).fold(0, |p, j| if v[j].norm() > v[p].norm() + 1e-12 { j } else { p });
        let phase = v[pivot].conj() / v[pivot].norm();
        basis.set_column(c, &(v * phase));
    }
    Ok(FibreBasis { lambda, r, basis, values: idx.iter().map(|&i| eig.eigenvalues[i]).collect() })
}

/// `T_{lambda+i0}(H_r)` together with its fibre.
struct OnShell {
    res: SandwichedResolvent,
    fibre: FibreBasis,
}

struct Shell<'a> {
    model: &'a RiggedModel,
    base: BaseResolvent,
    rank_tol: f64,
}

impl<'a> Shell<'a> {
    fn new(model: &'a RiggedModel, lambda: f64, numerics: &Numerics) -> Result<Self> {
        let base = BaseResolvent::new(model, SpectralPoint::boundary(lambda, Side::Plus))?;
        Ok(Self { model, base, rank_tol: numerics.rank_tol })
    }

    fn lambda(&self) -> f64 {
        self.base.at().lambda
    }

    fn at(&self, r: f64) -> Result<OnShell> {
        let res = self.base.at_r(self.model.path(), r)?;
        let fibre = fibre_from(self.lambda(), r, &res.im_t, self.rank_tol)?;
        Ok(OnShell { res, fibre })
    }

    /// `w_side(lambda; r1, r0)` in fibre coordinates.
    fn wave(&self, s1: &OnShell, s0: &OnShell, side: Side) -> Result<CMatrix> {
        let (d1, d0) = (s1.fibre.dim(), s0.fibre.dim());
        if d1 != d0 {
            return Err(Error::RankMismatch { target: d1, source_dim: d0 });
        }
        let k = self.base.k();
        let path = self.model.path();
        let dj = path.j_at(s1.res.r) - path.j_at(s0.res.r);
        let t0 = match side {
            Side::Plus => s0.res.t.clone(),
            Side::Minus => s0.res.t.adjoint(),
        };
        let middle = CMatrix::identity(k, k) + dj * t0;
        Ok(s1.fibre.sqrt_cols().adjoint() * middle * s0.fibre.inv_sqrt_cols())
    }

    /// `S(lambda; H_r, H_0)` on the fibre of `H_0`.
    fn s_matrix(&self, r: f64) -> Result<CMatrix> {
        let s0 = self.at(0.0)?;
        let j = self.model.path().j_at(r);
        let s = stationary(&s0.res.t, &s0.fibre.sqrt_im_t(), &j, r)?;
        Ok(s0.fibre.basis.adjoint() * s * &s0.fibre.basis)
    }

    /// `-2i w(0,r) a(r) w(r,0)` on the fibre of `H_0`.
    fn ode_generator(&self, s0: &OnShell, r: f64) -> Result<CMatrix> {
        let sr = self.at(r)?;
        let w_r0 = self.wave(&sr, s0, Side::Plus)?;
        let w_0r = self.wave(s0, &sr, Side::Plus)?;
        let jdot = self.model.path().j_dot(r);
        let c = sr.fibre.sqrt_cols();
        let a = c.adjoint() * jdot * &c;
        Ok(w_0r * a * w_r0 * C64::new(0.0, -2.0))
    }
}

/// `1 - 2i sqrt(Im T0) J (1 + T0 J)^{-1} sqrt(Im T0)`, full `k x k`.
fn stationary(t0: &CMatrix, sqrt_im: &CMatrix, j: &CMatrix, r: f64) -> Result<CMatrix> {
    let k = t0.nrows();
    let id = CMatrix::identity(k, k);
    let m = &id + t0 * j;
    let inv = m.try_inverse().ok_or(Error::ResonanceHit { r: C64::new(r, 0.0) })?;
    if !inv.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::ResonanceHit { r: C64::new(r, 0.0) });
    }
    Ok(id - sqrt_im * j * inv * sqrt_im * (I * 2.0))
}

pub fn fibre_basis(model: &RiggedModel, r: f64, lambda: f64, numerics: &Numerics) -> Result<FibreBasis> {
    Ok(Shell::new(model, lambda, numerics)?.at(r)?.fibre)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationVector {
    pub lambda: f64,
    pub coords: CVector,
}

impl EvaluationVector {
    pub fn norm_sqr(&self) -> f64 {
        self.coords.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Fibre coordinates of `sqrt(Im T_{lambda+i0}(H_r) / pi) phi`, the value of
/// the evaluation operator at `f = F* phi`.
pub fn evaluation_operator(model: &RiggedModel, r: f64, lambda: f64, phi: &CVector, numerics: &Numerics) -> Result<EvaluationVector> {
    if phi.len() != model.k() {
        return Err(Error::Shape(format!("phi has length {}, expected {}", phi.len(), model.k())));
    }
    let fibre = fibre_basis(model, r, lambda, numerics)?;
    let coords = fibre.sqrt_cols().adjoint() * phi * C64::new(1.0 / PI.sqrt(), 0.0);
    Ok(EvaluationVector { lambda, coords })
}

/// `int ||E_lambda F* phi||^2 dlambda` over the band of a lattice model,
/// using `lambda = 2 cos t` to absorb the edge singularities.
pub fn spectral_mass(model: &RiggedModel, r: f64, phi: &CVector, numerics: &Numerics) -> Result<f64> {
    let Some((a, b)) = model.essential_spectrum() else {
        return Ok(0.0);
    };
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let v = integrate(
        |t: f64| {
            let lambda = mid + half * t.cos();
            Ok(evaluation_operator(model, r, lambda, phi, numerics)?.norm_sqr() * half * t.sin())
        },
        1e-9,
        PI - 1e-9,
        &[],
        QuadOptions::new(numerics.quad_tol),
    )?;
    Ok(v.value)
}

#[derive(Clone, Debug)]
pub struct WaveMatrix {
    pub lambda: f64,
    pub side: Side,
    pub r1: f64,
    pub r0: f64,
    /// `d1 x d0` in the fibre bases at `r1` and `r0`.
    pub matrix: CMatrix,
}

impl WaveMatrix {
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }
}

/// `max(||W*W - 1||, ||WW* - 1||)` in operator norm.
pub fn unitarity_defect(w: &CMatrix) -> f64 {
    let (m, n) = (w.nrows(), w.ncols());
    let a = op_norm(&(w.adjoint() * w - CMatrix::identity(n, n)));
    let b = op_norm(&(w * w.adjoint() - CMatrix::identity(m, m)));
    a.max(b)
}

pub fn wave_matrix(model: &RiggedModel, lambda: f64, r1: f64, r0: f64, side: Side, numerics: &Numerics) -> Result<WaveMatrix> {
    let shell = Shell::new(model, lambda, numerics)?;
    let (s1, s0) = (shell.at(r1)?, shell.at(r0)?);
    Ok(WaveMatrix { lambda, side, r1, r0, matrix: shell.wave(&s1, &s0, side)? })
}

#[derive(Clone, Debug)]
pub struct ScatteringMatrix {
    pub lambda: f64,
    /// `0` on-shell.
    pub y: f64,
    pub r: f64,
    /// Fibre block on-shell, full `k x k` off-axis.
    pub s: CMatrix,
    /// Full `k x k` operator; on-shell this is `S (+) 1`.
    pub full: CMatrix,
    pub det: C64,
    pub phase: f64,
}

impl ScatteringMatrix {
    fn new(lambda: f64, y: f64, r: f64, s: CMatrix, full: CMatrix) -> Self {
        let det = if s.nrows() == 0 { C64::new(1.0, 0.0) } else { determinant(&s) };
        Self { lambda, y, r, s, full, det, phase: det.arg() }
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.s)
    }
}

/// `S(lambda + iy; H_r, H_0)`; `at.y == 0` gives the on-shell matrix.
pub fn scattering_matrix(model: &RiggedModel, at: SpectralPoint, r: f64, numerics: &Numerics) -> Result<ScatteringMatrix> {
    let at = SpectralPoint::new(at.lambda, at.y, Side::Plus)?;
    let base = BaseResolvent::new(model, at)?;
    let j = model.path().j_at(r);
    let hit = |e: Error| match e {
        Error::ResonanceHit { .. } if at.y == 0.0 => match resonance_set(model, at.lambda, (r - 1e-3, r + 1e-3), numerics) {
            Ok(info) if !info.resonance_r_values.is_empty() => Error::ResonanceInPath { r: info.resonance_r_values[0] },
            _ => e,
        },
        other => other,
    };
    if at.y > 0.0 {
        let sq = crate::numkernel::sqrt_psd(base.im_t(), 1e-14)?;
        let full = stationary(base.t(), sq.as_matrix(), &j, r).map_err(hit)?;
        return Ok(ScatteringMatrix::new(at.lambda, at.y, r, full.clone(), full));
    }
    let fibre = fibre_from(at.lambda, 0.0, base.im_t(), numerics.rank_tol)?;
    let full = stationary(base.t(), &fibre.sqrt_im_t(), &j, r).map_err(hit)?;
    let s = fibre.basis.adjoint() * &full * &fibre.basis;
    Ok(ScatteringMatrix::new(at.lambda, 0.0, r, s, full))
}

/// `||w_+(r,0)* w_-(r,0) - S||` with `S` from the stationary formula.
pub fn cross_check_s(model: &RiggedModel, lambda: f64, r: f64, numerics: &Numerics) -> Result<f64> {
    let shell = Shell::new(model, lambda, numerics)?;
    let (sr, s0) = (shell.at(r)?, shell.at(0.0)?);
    let wp = shell.wave(&sr, &s0, Side::Plus)?;
    let wm = shell.wave(&sr, &s0, Side::Minus)?;
    let s = shell.s_matrix(r)?;
    Ok(op_norm(&(wp.adjoint() * wm - s)))
}

/// `dS(lambda; H_r, H_0)/dr` on the fibre of `H_0`.
pub fn scattering_ode_rhs(model: &RiggedModel, lambda: f64, r: f64, numerics: &Numerics) -> Result<CMatrix> {
    let shell = Shell::new(model, lambda, numerics)?;
    let s0 = shell.at(0.0)?;
    Ok(shell.ode_generator(&s0, r)? * shell.s_matrix(r)?)
}

#[derive(Clone, Debug)]
pub struct OrderedExp {
    pub s: ScatteringMatrix,
    pub unitarity_defect: f64,
    pub steps: usize,
    pub rejected: usize,
}

/// Integrates `S' = A(r) S`, `S(0) = 1` along `r_grid` (increasing, starting
/// at 0) with classical RK4 and step doubling.
pub fn ordered_exp_s(model: &RiggedModel, lambda: f64, r_grid: &[f64], numerics: &Numerics) -> Result<OrderedExp> {
    if r_grid.len() < 2 || r_grid[0] != 0.0 || r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Parameter("r_grid must increase strictly from 0".into()));
    }
    let r_end = *r_grid.last().unwrap();
    let res = resonance_set(model, lambda, (0.0, r_end), numerics)?;
    if let Some(&r) = res.resonance_r_values.first() {
        return Err(Error::ResonanceInPath { r });
    }
    let shell = Shell::new(model, lambda, numerics)?;
    let s0 = shell.at(0.0)?;
    let d = s0.fibre.dim();
    let gen = |r: f64| shell.ode_generator(&s0, r);
    let rk4 = |s: &CMatrix, a0: &CMatrix, r: f64, h: f64| -> Result<CMatrix> {
        let k1 = a0 * s;
        let am = gen(r + 0.5 * h)?;
        let k2 = &am * (s + &k1 * C64::new(0.5 * h, 0.0));
        let k3 = &am * (s + &k2 * C64::new(0.5 * h, 0.0));
        let k4 = gen(r + h)? * (s + &k3 * C64::new(h, 0.0));
        Ok(s + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(h / 6.0, 0.0))
    };
    let mut s = CMatrix::identity(d, d);
    let (mut steps, mut rejected) = (0usize, 0usize);
    if d > 0 {
        for w in r_grid.windows(2) {
            let (mut r, b) = (w[0], w[1]);
            let mut h = numerics.ode_step.min(b - r);
            while r < b {
                h = h.min(b - r);
                let a0 = gen(r)?;
                let big = rk4(&s, &a0, r, h)?;
                let half = rk4(&s, &a0, r, 0.5 * h)?;
                let fine = rk4(&half, &gen(r + 0.5 * h)?, r + 0.5 * h, 0.5 * h)?;
                let err = max_abs(&(&big - &fine));
                if err > numerics.ode_tol {
                    rejected += 1;
                    h *= 0.5;
                    if h < 1e-10 * (1.0 + b.abs()) {
                        return Err(Error::NumericalFailure { what: "ordered_exp_s step control", residual: err });
                    }
                    continue;
                }
                s = fine;
                r = if b - r <= h { b } else { r + h };
                steps += 1;
                if err < numerics.ode_tol / 64.0 {
                    h = (2.0 * h).min(numerics.ode_step);
                }
            }
        }
    }
    let defect = unitarity_defect(&s);
    let full = s0.fibre.embed(&s);
    Ok(OrderedExp { s: ScatteringMatrix::new(lambda, 0.0, r_end, s, full), unitarity_defect: defect, steps, rejected })
}

/// `(|det S - e^{-2 pi i xi}|, |det S - e^{-2 pi i xi_a}|)` at `r = 1`.
pub fn birman_krein_residuals(model: &RiggedModel, lambda: f64, numerics: &Numerics) -> Result<(f64, f64)> {
    let det = scattering_matrix(model, SpectralPoint::boundary(lambda, Side::Plus), 1.0, numerics)?.det;
    let xi = ssf_pointwise(model, lambda, &numerics.ygrid, numerics)?.xi;
    let xi_a = ac_ssf(model, lambda, numerics)?;
    let e = |x: f64| C64::new(0.0, -2.0 * PI * x).exp();
    Ok(((det - e(xi)).norm(), (det - e(xi_a)).norm()))
}

/// `|det S(z) - e^{-2 pi i xi(z)}|` with the full off-axis determinant.
pub fn bk_offaxis_residual(model: &RiggedModel, at: SpectralPoint, numerics: &Numerics) -> Result<f64> {
    if !(at.y > 0.0) {
        return Err(Error::Parameter(format!("off-axis residual needs y > 0, got {}", at.y)));
    }
    let s = scattering_matrix(model, at, 1.0, numerics)?;
    let det = determinant(&s.full);
    let xi = smoothed_ssf(model, SpectralPoint::upper(at.lambda, at.y), numerics)?;
    Ok((det - C64::new(0.0, -2.0 * PI * xi).exp()).norm())
}

/// `||S(lambda + iy) - S(lambda) (+) 1||` in operator norm.
pub fn embedding_residual(model: &RiggedModel, lambda: f64, y: f64, r: f64, numerics: &Numerics) -> Result<f64> {
    let off = scattering_matrix(model, SpectralPoint::upper(lambda, y), r, numerics)?;
    let on = scattering_matrix(model, SpectralPoint::boundary(lambda, Side::Plus), r, numerics)?;
    Ok(op_norm(&(off.full - on.full)))
}
