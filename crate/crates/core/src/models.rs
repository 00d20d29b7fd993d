//! Rigged operator families `H_r = H_base + F* J_r F`.
//!
//! Two backends carry an exactly computable sandwiched resolvent:
//! a finite Hermitian matrix with an invertible rigging, and the free Jacobi
//! operator on `l2(Z)` rigged by point evaluations at a finite window of
//! sites. Discretized 1D Schrödinger operators reduce to the finite backend.

use alloc::format;
use alloc::vec::Vec;



#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use crate::error::{Error, Result};
use crate::numkernel::{eig_hermitian, max_abs, min_singular_value, op_norm, CMatrix, HermMatrix, SpectralDecomposition};
use crate::C64;

/// Maximum polynomial degree of a coupling-path piece.
pub const MAX_PATH_DEGREE: usize = 4;

/// One polynomial piece `J_r = sum_p coeffs[p] r^p` valid on `[start, end]`
/// (global coupling parameter `r`).
#[derive(Clone, Debug)]
pub struct PathPiece {
    pub start: f64,
    pub end: f64,
    pub coeffs: Vec<HermMatrix>,
}

impl PathPiece {
    fn eval(&self, r: C64) -> CMatrix {
        let k = self.coeffs[0].dim();
        let mut acc = CMatrix::zeros(k, k);
        for c in self.coeffs.iter().rev() {
            acc = acc * r + c.as_matrix();
        }
        acc
    }

    fn eval_dot(&self, r: f64) -> CMatrix {
        let k = self.coeffs[0].dim();
        let mut acc = CMatrix::zeros(k, k);
        for (p, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * C64::new(r, 0.0) + c.as_matrix().map(|z| z * p as f64);
        }
        acc
    }
}

/// Piecewise polynomial path of self-adjoint couplings with `J_0 = 0`.
#[derive(Clone, Debug)]
pub struct CouplingPath {
    pieces: Vec<PathPiece>,
    dim: usize,
}

impl CouplingPath {
    /// `J_r = r J`.
    pub fn straight(j: HermMatrix) -> Self {
        let k = j.dim();
        Self { pieces: alloc::vec![PathPiece { start: 0.0, end: 1.0, coeffs: alloc::vec![HermMatrix::zeros(k), j] }], dim: k }
    }

    pub fn zero(k: usize) -> Self {
        Self::straight(HermMatrix::zeros(k))
    }

    /// Two straight segments `0 -> j_mid` on `[0, 1/2]` and `j_mid -> j_end`
    /// on `[1/2, 1]`.
    pub fn bent(j_mid: HermMatrix, j_end: HermMatrix) -> Result<Self> {
        let k = j_mid.dim();
        let slope2 = HermMatrix::new((j_end.as_matrix() - j_mid.as_matrix()).map(|z| z * 2.0))?;
        let c0 = HermMatrix::new(j_mid.as_matrix().map(|z| z * 2.0) - j_end.as_matrix())?;
        Self::piecewise(alloc::vec![
            PathPiece { start: 0.0, end: 0.5, coeffs: alloc::vec![HermMatrix::zeros(k), j_mid.scale(2.0)] },
            PathPiece { start: 0.5, end: 1.0, coeffs: alloc::vec![c0, slope2] },
        ])
    }

    pub fn piecewise(pieces: Vec<PathPiece>) -> Result<Self> {
        let first = pieces.first().ok_or_else(|| Error::Parameter("coupling path has no pieces".into()))?;
        let k = first.coeffs.first().map(|c| c.dim()).ok_or_else(|| Error::Parameter("empty piece".into()))?;
        if first.start != 0.0 || pieces.last().map(|p| p.end) != Some(1.0) {
            return Err(Error::Parameter("coupling path pieces must cover [0, 1]".into()));
        }
        for (i, p) in pieces.iter().enumerate() {
            if p.coeffs.is_empty() || p.coeffs.len() > MAX_PATH_DEGREE + 1 {
                return Err(Error::Parameter(format!("piece {i}: degree must be between 0 and {MAX_PATH_DEGREE}")));
            }
            if p.coeffs.iter().any(|c| c.dim() != k) {
                return Err(Error::Shape(format!("piece {i}: coefficient dimension differs from {k}")));
            }
            if !(p.end > p.start) {
                return Err(Error::Parameter(format!("piece {i}: empty parameter interval")));
            }
            if i > 0 {
                let prev = &pieces[i - 1];
                if prev.end != p.start {
                    return Err(Error::Parameter(format!("piece {i} does not start where piece {} ends", i - 1)));
                }
                let at = C64::new(p.start, 0.0);
                let jump = max_abs(&(prev.eval(at) - p.eval(at)));
                if jump > 1e-12 * (1.0 + max_abs(&p.eval(at))) {
                    return Err(Error::Parameter(format!("path is discontinuous at r = {}", p.start)));
                }
            }
        }
        if max_abs(&first.eval(C64::new(0.0, 0.0))) > 1e-14 {
            return Err(Error::Parameter("coupling path must satisfy J_0 = 0".into()));
        }
        Ok(Self { pieces, dim: k })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[PathPiece] {
        &self.pieces
    }

    fn piece_for(&self, r: f64) -> &PathPiece {
        self.pieces.iter().find(|p| r <= p.end).unwrap_or_else(|| self.pieces.last().unwrap())
    }

    pub fn j_at(&self, r: f64) -> CMatrix {
        self.piece_for(r).eval(C64::new(r, 0.0))
    }

    /// Meromorphic continuation in `r`, using the piece containing `Re r`.
    pub fn j_at_complex(&self, r: C64) -> CMatrix {
        self.piece_for(r.re).eval(r)
    }

    pub fn j_dot(&self, r: f64) -> CMatrix {
        self.piece_for(r).eval_dot(r)
    }

    /// Interior breakpoints of the piecewise description.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces.iter().skip(1).map(|p| p.start).collect()
    }

    /// `Some(J)` when `J_r = r J` on all of `[0, 1]`.
    pub fn straight_direction(&self) -> Option<&HermMatrix> {
        match self.pieces.as_slice() {
            [p] if p.coeffs.len() <= 2 => p.coeffs.get(1),
            _ => None,
        }
    }

    pub fn is_straight(&self) -> bool {
        self.pieces.len() == 1 && self.pieces[0].coeffs.len() <= 2
    }
}

#[derive(Clone, Debug)]
pub struct FiniteBackend {
    pub h0: HermMatrix,
    pub f: CMatrix,
    h0_spectrum: SpectralDecomposition,
}

impl FiniteBackend {
    pub fn h0_spectrum(&self) -> &SpectralDecomposition {
        &self.h0_spectrum
    }
}

#[derive(Clone, Debug)]
pub struct LatticeBackend {
    pub sites: Vec<i64>,
    pub weights: Vec<f64>,
    pub j_bg: HermMatrix,
}

#[derive(Clone, Debug)]
pub enum Backend {
    Finite(FiniteBackend),
    Lattice(LatticeBackend),
}

/// An operator family with exactly computable sandwiched resolvent.
#[derive(Clone, Debug)]
pub struct RiggedModel {
    backend: Backend,
    path: CouplingPath,
}

impl RiggedModel {
    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn path(&self) -> &CouplingPath {
        &self.path
    }

    /// Dimension of the auxiliary space.
    pub fn k(&self) -> usize {
        self.path.dim()
    }

    pub fn backend_name(&self) -> &'static str {
        match self.backend {
            Backend::Finite(_) => "finite",
            Backend::Lattice(_) => "lattice",
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.backend, Backend::Finite(_))
    }

    /// Common essential spectrum of the family, if nonempty.
    pub fn essential_spectrum(&self) -> Option<(f64, f64)> {
        match self.backend {
            Backend::Finite(_) => None,
            Backend::Lattice(_) => Some((-2.0, 2.0)),
        }
    }

    pub fn in_essential_spectrum(&self, lambda: f64) -> bool {
        self.essential_spectrum().is_some_and(|(a, b)| lambda >= a && lambda <= b)
    }

    /// Same base operator, different coupling path.
    pub fn with_path(&self, path: CouplingPath) -> Result<Self> {
        if path.dim() != self.k() {
            return Err(Error::Shape(format!("path dimension {} differs from K_dim {}", path.dim(), self.k())));
        }
        Ok(Self { backend: self.backend.clone(), path })
    }

    /// Model whose base operator is `H_s` of this family, with a new path.
    pub fn rebased(&self, s: f64, path: CouplingPath) -> Result<Self> {
        let js = self.path.j_at(s);
        let backend = match &self.backend {
            Backend::Finite(fb) => {
                let h = HermMatrix::new(fb.h0.as_matrix() + fb.f.adjoint() * &js * &fb.f)?;
                return build_finite(h, fb.f.clone(), path);
            }
            Backend::Lattice(lb) => Backend::Lattice(LatticeBackend {
                sites: lb.sites.clone(),
                weights: lb.weights.clone(),
                j_bg: HermMatrix::new(lb.j_bg.as_matrix() + js)?,
            }),
        };
        Self { backend, path: self.path.clone() }.with_path(path)
    }

    /// `H_r` as an explicit matrix (finite backend only).
    pub fn h_at(&self, r: f64) -> Result<HermMatrix> {
        match &self.backend {
            Backend::Finite(fb) => HermMatrix::new(fb.h0.as_matrix() + fb.f.adjoint() * self.path.j_at(r) * &fb.f),
            Backend::Lattice(_) => Err(Error::UnsupportedBackend("lattice")),
        }
    }

    /// `dH_r/dr = F* J'_r F` (finite backend only).
    pub fn v_dot(&self, r: f64) -> Result<HermMatrix> {
        match &self.backend {
            Backend::Finite(fb) => HermMatrix::new(fb.f.adjoint() * self.path.j_dot(r) * &fb.f),
            Backend::Lattice(_) => Err(Error::UnsupportedBackend("lattice")),
        }
    }

    /// Lattice `H_r` restricted to sites `[-half, half)` with the window
    /// coupling placed on the window sites.
    pub fn truncated_lattice(&self, r: f64, half: i64) -> Result<HermMatrix> {
        let Backend::Lattice(lb) = &self.backend else {
            return Err(Error::UnsupportedBackend("finite"));
        };
        if lb.sites.iter().any(|&s| s < -half || s >= half) {
            return Err(Error::Parameter(format!("window does not fit inside [-{half}, {half})")));
        }
        let n = (2 * half) as usize;
        let mut h = CMatrix::zeros(n, n);
        for i in 0..n - 1 {
            h[(i, i + 1)] = C64::new(1.0, 0.0);
            h[(i + 1, i)] = C64::new(1.0, 0.0);
        }
        let j = lb.j_bg.as_matrix() + self.path.j_at(r);
        for (a, &sa) in lb.sites.iter().enumerate() {
            for (b, &sb) in lb.sites.iter().enumerate() {
                let (ia, ib) = ((sa + half) as usize, (sb + half) as usize);
                h[(ia, ib)] += j[(a, b)] * (lb.weights[a] * lb.weights[b]);
            }
        }
        HermMatrix::new(h)
    }
}

pub fn build_finite(h0: HermMatrix, f: CMatrix, path: CouplingPath) -> Result<RiggedModel> {
    let n = h0.dim();
    if f.nrows() != n || f.ncols() != n || path.dim() != n {
        return Err(Error::Shape(format!(
            "H0 is {n}x{n}, F is {}x{}, path acts on dimension {}",
            f.nrows(),
            f.ncols(),
            path.dim()
        )));
    }
    let smin = min_singular_value(&f);
    if !(smin > 1e-12 * op_norm(&f).max(f64::MIN_POSITIVE)) {
        return Err(Error::InvalidRigging(format!("F is singular (smallest singular value {smin:e})")));
    }
    let h0_spectrum = eig_hermitian(&h0)?;
    Ok(RiggedModel { backend: Backend::Finite(FiniteBackend { h0, f, h0_spectrum }), path })
}

pub fn build_lattice(sites: Vec<i64>, weights: Vec<f64>, j_bg: HermMatrix, path: CouplingPath) -> Result<RiggedModel> {
    let k = sites.len();
    if k == 0 {
        return Err(Error::InvalidWindow("window must contain at least one site".into()));
    }
    if weights.len() != k || j_bg.dim() != k || path.dim() != k {
        return Err(Error::Shape(format!(
            "window has {k} sites but {} weights, J_bg of dimension {}, path of dimension {}",
            weights.len(),
            j_bg.dim(),
            path.dim()
        )));
    }
    for (i, s) in sites.iter().enumerate() {
        if sites[..i].contains(s) {
            return Err(Error::InvalidWindow(format!("duplicate site {s}")));
        }
    }
    if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
        return Err(Error::InvalidWindow(format!("weights must be positive, got {w}")));
    }
    Ok(RiggedModel { backend: Backend::Lattice(LatticeBackend { sites, weights, j_bg }), path })
}

/// 1D Schrödinger operator `-u'' + V0 u` on a uniform grid with Dirichlet
/// walls, perturbed along `H_r = H0 + r V`.
///
/// Rigging: `F = diag(sqrt|V_i|)` on the support of `V` and `epsilon` on its
/// kernel, `J = diag(sign V_i)`, so `F* J F = diag(V)`.
pub fn discretize_schrodinger(v0: &[f64], v: &[f64], h: f64, epsilon: f64) -> Result<RiggedModel> {
    if !(h > 0.0) || !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("grid step and regularizer must be positive (h = {h}, epsilon = {epsilon})")));
    }
    if v0.len() != v.len() || v.is_empty() {
        return Err(Error::Shape(format!("V0 has {} samples, V has {}", v0.len(), v.len())));
    }
    if v0.iter().chain(v).any(|x| !x.is_finite()) {
        return Err(Error::Parameter("potential samples must be finite".into()));
    }
    let n = v.len();
    let inv_h2 = 1.0 / (h * h);
    let mut h0 = CMatrix::zeros(n, n);
    for i in 0..n {
        h0[(i, i)] = C64::new(2.0 * inv_h2 + v0[i], 0.0);
        if i + 1 < n {
            h0[(i, i + 1)] = C64::new(-inv_h2, 0.0);
            h0[(i + 1, i)] = C64::new(-inv_h2, 0.0);
        }
    }
    let f_diag: Vec<f64> = v.iter().map(|&x| if x != 0.0 { x.abs().sqrt() } else { epsilon }).collect();
    let j_diag: Vec<f64> = v.iter().map(|&x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 }).collect();
    let f = HermMatrix::from_real_diagonal(&f_diag).into_matrix();
    build_finite(HermMatrix::new(h0)?, f, CouplingPath::straight(HermMatrix::from_real_diagonal(&j_diag)))
}

/// A compactly supported test function with its derivative.
pub trait TestFn {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    /// Closed support interval.
    fn support(&self) -> (f64, f64);
}

/// Smooth bump `height * e * exp(-1 / (1 - t^2))` on `[a, b]`, `t` the affine
/// coordinate mapping `[a, b]` to `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Bump {
    pub a: f64,
    pub b: f64,
    pub height: f64,
}

impl Bump {
    pub fn new(a: f64, b: f64, height: f64) -> Result<Self> {
        if !(b > a) {
            return Err(Error::Parameter(format!("bump support [{a}, {b}] is empty")));
        }
        Ok(Self { a, b, height })
    }

    fn coord(&self, x: f64) -> f64 {
        (2.0 * x - self.a - self.b) / (self.b - self.a)
    }
}

impl TestFn for Bump {
    fn value(&self, x: f64) -> f64 {
        let t = self.coord(x);
        if t.abs() >= 1.0 {
            return 0.0;
        }
        self.height * (1.0 - 1.0 / (1.0 - t * t)).exp()
    }

    fn derivative(&self, x: f64) -> f64 {
        let t = self.coord(x);
        if t.abs() >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - t * t;
        self.value(x) * (-2.0 * t / (s * s)) * (2.0 / (self.b - self.a))
    }

    fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }
}

/// Test function built from closures (used for derivatives and compositions).
pub struct FnTest<V, D> {
    pub value: V,
    pub derivative: D,
    pub support: (f64, f64),
}

impl<V: Fn(f64) -> f64, D: Fn(f64) -> f64> TestFn for FnTest<V, D> {
    fn value(&self, x: f64) -> f64 {
        if x < self.support.0 || x > self.support.1 {
            return 0.0;
        }
        (self.value)(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        if x < self.support.0 || x > self.support.1 {
            return 0.0;
        }
        (self.derivative)(x)
    }
    fn support(&self) -> (f64, f64) {
        self.support
    }
}

/// `phi'` viewed as a test function of its own (derivative not provided).
pub struct Derivative<'a, T: TestFn + ?Sized>(pub &'a T);

impl<T: TestFn + ?Sized> TestFn for Derivative<'_, T> {
    fn value(&self, x: f64) -> f64 {
        self.0.derivative(x)
    }
    fn derivative(&self, _x: f64) -> f64 {
        f64::NAN
    }
    fn support(&self) -> (f64, f64) {
        self.0.support()
    }
}

pub fn eval_test_function<T: TestFn + ?Sized>(phi: &T, x: f64) -> (f64, f64) {
    (phi.value(x), phi.derivative(x))
}
