//! Dense complex linear algebra used throughout the crate.
//!
//! Every auxiliary space in the supported models is small (k <= 64), so all
//! kernels are dense and backed by `nalgebra`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};


#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use crate::error::{Error, Result};
use crate::C64;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default relative threshold separating genuine rank from roundoff.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

const I: C64 = C64::new(0.0, 1.0);

/// A Hermitian matrix, symmetrized on construction.
///
/// `residual` records how far the input was from Hermitian before
/// symmetrization (max-entry norm).
#[derive(Clone, Debug, PartialEq)]
pub struct HermMatrix {
    m: CMatrix,
    residual: f64,
}

impl HermMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Shape(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let adj = m.adjoint();
        let residual = max_abs(&(&m - &adj));
        let sym = (&m + &adj).map(|z| z * 0.5);
        Ok(Self { m: sym, residual })
    }

    pub fn zeros(n: usize) -> Self {
        Self { m: CMatrix::zeros(n, n), residual: 0.0 }
    }

    pub fn identity(n: usize) -> Self {
        Self { m: CMatrix::identity(n, n), residual: 0.0 }
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let m = CMatrix::from_diagonal(&CVector::from_iterator(d.len(), d.iter().map(|&x| C64::new(x, 0.0))));
        Self { m, residual: 0.0 }
    }

    pub fn from_real_rows(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Shape(format!("expected {} entries, got {}", n * n, entries.len())));
        }
        Self::new(CMatrix::from_row_iterator(n, n, entries.iter().map(|&x| C64::new(x, 0.0))))
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: self.m.map(|z| z * s), residual: self.residual * s.abs() }
    }

    /// Sum of the diagonal; real for a Hermitian matrix.
    pub fn trace(&self) -> f64 {
        self.m.trace().re
    }
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// as columns.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl SpectralDecomposition {
    pub fn reconstruct(&self) -> CMatrix {
        let d = CVector::from_iterator(self.eigenvalues.len(), self.eigenvalues.iter().map(|&e| C64::new(e, 0.0)));
        &self.eigenvectors * CMatrix::from_diagonal(&d) * self.eigenvectors.adjoint()
    }

    /// `V f(Λ) V*` for a real function of the eigenvalues.
    pub fn apply<G: Fn(f64) -> f64>(&self, g: G) -> CMatrix {
        let d = CVector::from_iterator(self.eigenvalues.len(), self.eigenvalues.iter().map(|&e| C64::new(g(e), 0.0)));
        &self.eigenvectors * CMatrix::from_diagonal(&d) * self.eigenvectors.adjoint()
    }
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Spectral (operator 2-) norm.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().fold(0.0, |a: f64, &s| a.max(s))
}

pub fn min_singular_value(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().fold(f64::INFINITY, |a: f64, &s| a.min(s))
}

/// Trace norm (sum of singular values).
pub fn trace_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().sum()
}

/// `(T - T*) / 2i`, the imaginary part of an operator.
pub fn im_part(t: &CMatrix) -> HermMatrix {
    let d = (t - t.adjoint()).map(|z| z / (I * 2.0));
    HermMatrix { m: (&d + d.adjoint()).map(|z| z * 0.5), residual: 0.0 }
}

pub fn determinant(m: &CMatrix) -> C64 {
    if m.is_empty() {
        return C64::new(1.0, 0.0);
    }
    m.clone().determinant()
}

pub fn eig_hermitian(a: &HermMatrix) -> Result<SpectralDecomposition> {
    let n = a.dim();
    if n == 0 {
        return Ok(SpectralDecomposition { eigenvalues: Vec::new(), eigenvectors: CMatrix::zeros(0, 0) });
    }
    let eig = SymmetricEigen::try_new(a.m.clone(), f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::NumericalFailure { what: "eig_hermitian", residual: f64::NAN })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    let out = SpectralDecomposition { eigenvalues, eigenvectors };
    let scale = max_abs(&a.m).max(f64::MIN_POSITIVE);
    let residual = max_abs(&(&a.m * &out.eigenvectors - &out.eigenvectors * diag_c(&out.eigenvalues)));
    if residual > 1e-10 * scale * (n as f64) {
        return Err(Error::NumericalFailure { what: "eig_hermitian", residual });
    }
    Ok(out)
}

fn diag_c(d: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(d.len(), d.iter().map(|&x| C64::new(x, 0.0))))
}

/// Orders complex numbers ascending by real part, ties by imaginary part.
pub fn complex_order(a: &C64, b: &C64) -> core::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Eigenvalue multiset of a general square matrix via the complex Schur form.
pub fn eig_general(a: &CMatrix) -> Result<Vec<C64>> {
    if !a.is_square() {
        return Err(Error::Shape(format!("eig_general needs a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur_eigs = |m: CMatrix| Schur::try_new(m, f64::EPSILON, 1000 * n.max(10)).and_then(|s| s.eigenvalues());
    let mut out: Vec<C64> = match schur_eigs(a.clone()) {
        Some(ev) => ev.iter().copied().collect(),
        None => {
            // tight clusters (e.g. unitaries near 1) can stall the QR sweep;
            // centring and rescaling spreads them out
            let shift = a.trace() / C64::new(n as f64, 0.0);
            let centred = a - CMatrix::identity(n, n) * shift;
            let scale = op_norm(&centred);
            if scale == 0.0 {
                alloc::vec![shift; n]
            } else {
                let ev = schur_eigs(centred * C64::new(1.0 / scale, 0.0))
                    .ok_or(Error::NumericalFailure { what: "eig_general", residual: f64::NAN })?;
                ev.iter().map(|e| e * scale + shift).collect()
            }
        }
    };
    out.sort_by(complex_order);
    let sum: C64 = out.iter().sum();
    let residual = (sum - a.trace()).norm();
    if residual > 1e-8 * (1.0 + op_norm(a)) * (n as f64) {
        return Err(Error::NumericalFailure { what: "eig_general", residual });
    }
    Ok(out)
}

/// PSD square root; eigenvalues with `|e| <= rank_tol * ||A||` are clipped to 0.
pub fn sqrt_psd(a: &HermMatrix, rank_tol: f64) -> Result<HermMatrix> {
    let eig = eig_hermitian(a)?;
    let scale = eig.eigenvalues.iter().fold(0.0, |m: f64, e| m.max(e.abs()));
    if let Some(&min) = eig.eigenvalues.first() {
        if min < -rank_tol * scale {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    let cut = rank_tol * scale;
    HermMatrix::new(eig.apply(|e| if e > cut { e.sqrt() } else { 0.0 }))
}

/// Pseudo-inverse of a Hermitian PSD matrix restricted to its range, with the
/// numerical rank `#{sigma_j > rank_tol * sigma_max}`.
pub fn pinv_on_range(a: &HermMatrix, rank_tol: f64) -> Result<(CMatrix, usize)> {
    let n = a.dim();
    let eig = eig_hermitian(a)?;
    let smax = eig.eigenvalues.iter().fold(0.0, |m: f64, e| m.max(e.abs()));
    if smax == 0.0 {
        return Ok((CMatrix::zeros(n, n), 0));
    }
    let cut = rank_tol * smax;
    let rank = eig.eigenvalues.iter().filter(|e| e.abs() > cut).count();
    let pinv = eig.apply(|e| if e.abs() > cut { 1.0 / e } else { 0.0 });
    Ok((pinv, rank))
}

/// Solves `A X = B` by LU; fails when `A` is numerically singular.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or(Error::NumericalFailure { what: "solve", residual: f64::INFINITY })
}

/// Minimum-total-distance assignment: `perm[i]` is the index in `next` matched
/// with `prev[i]`. Hungarian algorithm, O(n^3).
pub fn match_spectra(prev: &[C64], next: &[C64]) -> Result<Vec<usize>> {
    if prev.len() != next.len() {
        return Err(Error::Shape(format!("match_spectra: {} vs {} points", prev.len(), next.len())));
    }
    let n = prev.len();
    let cost = |i: usize, j: usize| (prev[i] - next[j]).norm();
    Ok(hungarian(n, cost))
}

// Shortest augmenting path formulation with potentials; rows and columns are
// 1-based internally, 0 is the virtual source.
fn hungarian<F: Fn(usize, usize) -> f64>(n: usize, cost: F) -> Vec<usize> {
    let mut u = alloc::vec![0.0; n + 1];
    let mut v = alloc::vec![0.0; n + 1];
    let mut p = alloc::vec![0usize; n + 1];
    let mut way = alloc::vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = alloc::vec![f64::INFINITY; n + 1];
        let mut used = alloc::vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = alloc::vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            perm[p[j] - 1] = j - 1;
        }
    }
    perm
}
