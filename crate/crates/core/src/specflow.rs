//! Continuous eigenphases of unitary paths, the crossing count `mu`, and the
//! Pushnitski, absolutely continuous and singular mu-invariants.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::models::RiggedModel;
use crate::numerics::Numerics;
use crate::numkernel::{eig_general, match_spectra, trace_norm, CMatrix};
use crate::resolvent::{resonance_set, BaseResolvent, Side, SpectralPoint};
use crate::scattering::{scattering_matrix, unitarity_defect};
use crate::C64;

use core::f64::consts::PI;

const TAU: f64 = 2.0 * PI;

/// A sampled path `t -> U(t)` of `k x k` unitaries on `[t_0, t_N]`.
pub struct UnitaryPath<'a> {
    grid: Vec<f64>,
    sampler: Box<dyn Fn(f64) -> Result<CMatrix> + 'a>,
    /// Maximal number of inserted midpoints.
    pub budget: usize,
}

impl<'a> UnitaryPath<'a> {
    pub fn new(grid: Vec<f64>, sampler: impl Fn(f64) -> Result<CMatrix> + 'a) -> Result<Self> {
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Parameter("unitary path grid must be strictly increasing with >= 2 points".into()));
        }
        Ok(Self { grid, sampler: Box::new(sampler), budget: 4096 })
    }

    pub fn uniform(a: f64, b: f64, n: usize, sampler: impl Fn(f64) -> Result<CMatrix> + 'a) -> Result<Self> {
        let n = n.max(1);
        Self::new((0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect(), sampler)
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    fn sample(&self, t: f64) -> Result<Vec<C64>> {
        let u = (self.sampler)(t)?;
        let defect = unitarity_defect(&u);
        if defect > 1e-8 {
            return Err(Error::NumericalFailure { what: "unitary path sample", residual: defect });
        }
        eig_general(&u)
    }
}

/// `theta[j][i]` is the unwrapped phase of track `j` at `t[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenphaseTracks {
    pub t: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
}

impl EigenphaseTracks {
    pub fn final_phases(&self) -> Vec<f64> {
        self.theta.iter().map(|t| *t.last().unwrap()).collect()
    }

    /// Net number of eigenvalue crossings of `e^{i theta}` in the positive
    /// direction between samples `a` and `b`.
    pub fn crossings(&self, theta: f64, a: usize, b: usize) -> i64 {
        self.theta
            .iter()
            .map(|tr| ((tr[b] - theta) / TAU).floor() as i64 - ((tr[a] - theta) / TAU).floor() as i64)
            .sum()
    }
}

const PIN_TOL: f64 = 1e-10;
/// Largest admissible distance of the initial eigenvalues from 1.
const START_TOL: f64 = 1e-4;

/// Matched, unwrapped eigenphases starting from the principal arguments at
/// `t_0` (close to 0); steps with a phase jump of `pi/2` or more are bisected.
pub fn track_eigenphases(path: &UnitaryPath) -> Result<EigenphaseTracks> {
    let first = path.sample(path.grid[0])?;
    if first.iter().any(|e| (e - C64::new(1.0, 0.0)).norm() > START_TOL) {
        return Err(Error::Parameter("unitary path must start at the identity".into()));
    }
    let k = first.len();
    let mut ts = alloc::vec![path.grid[0]];
    let mut theta: Vec<Vec<f64>> = first.iter().map(|e| alloc::vec![e.arg()]).collect();
    let mut moved: Vec<bool> = first.iter().map(|e| (e - C64::new(1.0, 0.0)).norm() > PIN_TOL).collect();
    let mut budget = path.budget;
    let mut pending: Vec<f64> = path.grid[1..].iter().rev().copied().collect();
    while let Some(t_next) = pending.pop() {
        let next = path.sample(t_next)?;
        let n = ts.len();
        let t_cur = ts[n - 1];
        // linear extrapolation of each phase separates tracks through crossings
        let predicted: Vec<f64> = theta
            .iter()
            .map(|tr| {
                if n < 2 {
                    tr[n - 1]
                } else {
                    tr[n - 1] + (tr[n - 1] - tr[n - 2]) * (t_next - t_cur) / (t_cur - ts[n - 2])
                }
            })
            .collect();
        let anchors: Vec<C64> = predicted.iter().map(|&p| C64::new(0.0, p).exp()).collect();
        let perm = match_spectra(&anchors, &next)?;
        let steps: Vec<f64> =
            (0..k).map(|j| predicted[j] - theta[j][n - 1] + (next[perm[j]] / anchors[j]).arg()).collect();
        if steps.iter().any(|d| d.abs() >= 0.5 * PI) {
            if budget == 0 {
                return Err(Error::TrackingFailure(format!(
                    "eigenphase refinement budget exhausted near t = {t_next}"
                )));
            }
            budget -= 1;
            pending.push(t_next);
            pending.push(0.5 * (t_cur + t_next));
            continue;
        }
        for j in 0..k {
            let last = theta[j][n - 1];
            theta[j].push(last + steps[j]);
            if (next[perm[j]] - C64::new(1.0, 0.0)).norm() > PIN_TOL {
                moved[j] = true;
            }
        }
        ts.push(t_next);
    }
    for j in 0..k {
        if !moved[j] {
            theta[j].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    Ok(EigenphaseTracks { t: ts, theta })
}

/// Signed number of times the eigenvalues cross `e^{i theta}`:
/// `sum_j (floor((theta_j(1) - theta) / 2 pi) + 1)`.
pub fn mu(theta: f64, tracks: &EigenphaseTracks, guard: f64) -> Result<i64> {
    if !(theta > 0.0 && theta < TAU) {
        return Err(Error::Parameter(format!("theta must lie in (0, 2 pi), got {theta}")));
    }
    for p in tracks.final_phases() {
        let x = (p - theta) / TAU;
        if (x - x.round()).abs() * TAU < guard {
            return Err(Error::AmbiguousTheta { theta });
        }
    }
    Ok(tracks.crossings(theta, 0, tracks.t.len() - 1))
}

/// `-(1/2 pi) sum_j theta_j(1)`.
pub fn xi_of_path(tracks: &EigenphaseTracks) -> f64 {
    -tracks.final_phases().iter().sum::<f64>() / TAU
}

const Y_FLOOR: f64 = 1e-10;

fn start_deviation(model: &RiggedModel, lambda: f64, y: f64, numerics: &Numerics) -> Result<f64> {
    let s = scattering_matrix(model, SpectralPoint::upper(lambda, y), 1.0, numerics)?;
    let k = s.full.nrows();
    Ok(trace_norm(&(s.full - CMatrix::identity(k, k))))
}

/// Smallest power-of-two `Y >= 1` with `||S(lambda + iY) - 1||_1 <= start_tol`.
pub fn choose_y_max(model: &RiggedModel, lambda: f64, numerics: &Numerics) -> Result<f64> {
    let mut y = 1.0;
    for _ in 0..80 {
        if start_deviation(model, lambda, y, numerics)? <= numerics.start_tol {
            return Ok(y);
        }
        y *= 2.0;
    }
    Err(Error::StartTolerance { y_max: y, deviation: start_deviation(model, lambda, y, numerics)? })
}

/// Eigenphases of `y -> S(lambda + iy) (k x k)` from `Y_max` down to the
/// on-shell `S(lambda) (+) 1`.
pub fn pushnitski_tracks(model: &RiggedModel, lambda: f64, y_max: Option<f64>, numerics: &Numerics) -> Result<EigenphaseTracks> {
    scattering_matrix(model, SpectralPoint::boundary(lambda, Side::Plus), 1.0, numerics)?;
    let y_max = match y_max {
        Some(y) => {
            let dev = start_deviation(model, lambda, y, numerics)?;
            if dev > numerics.start_tol {
                return Err(Error::StartTolerance { y_max: y, deviation: dev });
            }
            y
        }
        None => choose_y_max(model, lambda, numerics)?,
    };
    // y(u) = Y (rho^u - rho) / (1 - rho) runs from Y to 0; nodes at Y 2^-i
    let rho = Y_FLOOR / y_max;
    let y_of = move |u: f64| if u >= 1.0 { 0.0 } else { y_max * (rho.powf(u) - rho) / (1.0 - rho) };
    let n = (y_max / Y_FLOOR).log2().ceil() as usize;
    let mut grid: Vec<f64> = (0..n).map(|i| i as f64 * 0.5f64.ln() / rho.ln()).filter(|&u| u < 1.0).collect();
    grid.push(1.0);
    let path = UnitaryPath::new(grid, move |u| {
        let y = y_of(u);
        let at = if y > 0.0 { SpectralPoint::upper(lambda, y) } else { SpectralPoint::boundary(lambda, Side::Plus) };
        Ok(scattering_matrix(model, at, 1.0, numerics)?.full)
    })?;
    track_eigenphases(&path)
}

pub fn mu_pushnitski(model: &RiggedModel, lambda: f64, theta: f64, y_max: Option<f64>, numerics: &Numerics) -> Result<i64> {
    mu(theta, &pushnitski_tracks(model, lambda, y_max, numerics)?, numerics.mu_guard)
}

/// Eigenphases of `r -> S(lambda; H_r, H_0) (+) 1` on `[0, 1]`. Windows of
/// half-width `delta` around resonance points are stepped over; the flag
/// reports whether that happened on a nontrivial fibre.
pub fn ac_tracks(model: &RiggedModel, lambda: f64, numerics: &Numerics) -> Result<(EigenphaseTracks, bool)> {
    let res = resonance_set(model, lambda, (0.0, 1.0), numerics)?.resonance_r_values;
    let delta = numerics.delta;
    if let Some(&r) = res.iter().find(|&&r| r > 1.0 - delta) {
        return Err(Error::ResonanceInPath { r });
    }
    // allowed segments of [0, 1], concatenated into a parameter of length `total`
    let mut segs: Vec<(f64, f64)> = Vec::new();
    let mut lo = 0.0;
    for &r in &res {
        if r - delta > lo {
            segs.push((lo, r - delta));
        }
        lo = lo.max(r + delta);
    }
    segs.push((lo, 1.0));
    let total: f64 = segs.iter().map(|(a, b)| b - a).sum();
    let r_of = move |t: f64| {
        let mut s = t * total;
        for &(a, b) in &segs {
            if s <= b - a {
                return a + s;
            }
            s -= b - a;
        }
        1.0
    };
    let path = UnitaryPath::uniform(0.0, 1.0, 64, move |t| {
        Ok(scattering_matrix(model, SpectralPoint::boundary(lambda, Side::Plus), r_of(t), numerics)?.full)
    })?;
    let empty_fibre = BaseResolvent::new(model, SpectralPoint::boundary(lambda, Side::Plus))?.im_vanishes();
    Ok((track_eigenphases(&path)?, !res.is_empty() && !empty_fibre))
}

pub fn mu_ac(model: &RiggedModel, lambda: f64, theta: f64, numerics: &Numerics) -> Result<i64> {
    mu(theta, &ac_tracks(model, lambda, numerics)?.0, numerics.mu_guard)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MuSample {
    pub theta: f64,
    pub mu: i64,
    pub mu_ac: i64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MuSingular {
    pub lambda: f64,
    pub value: i64,
    pub samples: Vec<MuSample>,
    pub xi_pushnitski: f64,
    pub xi_ac_path: f64,
    pub interpolated: bool,
}

/// `mu(theta; U_1) - mu(theta; U_2)` on `n_theta >= 8` probe angles; fails if
/// the difference depends on theta.
pub fn mu_singular(model: &RiggedModel, lambda: f64, n_theta: usize, numerics: &Numerics) -> Result<MuSingular> {
    let n = n_theta.max(8);
    let u1 = pushnitski_tracks(model, lambda, None, numerics)?;
    let (u2, interpolated) = ac_tracks(model, lambda, numerics)?;
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let mut found = None;
        for shift in [0.0, 0.1, 0.2, 0.3, 0.4] {
            let theta = TAU * (i as f64 + 0.5 + shift) / n as f64;
            match (mu(theta, &u1, numerics.mu_guard), mu(theta, &u2, numerics.mu_guard)) {
                (Ok(a), Ok(b)) => {
                    found = Some(MuSample { theta, mu: a, mu_ac: b });
                    break;
                }
                (Err(Error::AmbiguousTheta { .. }), _) | (_, Err(Error::AmbiguousTheta { .. })) => continue,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
        samples.push(found.ok_or(Error::AmbiguousTheta { theta: TAU * (i as f64 + 0.5) / n as f64 })?);
    }
    let value = samples[0].mu - samples[0].mu_ac;
    if samples.iter().any(|s| s.mu - s.mu_ac != value) {
        let list: Vec<(f64, i64)> = samples.iter().map(|s| (s.theta, s.mu - s.mu_ac)).collect();
        return Err(Error::Inconsistent(format!("singular mu depends on theta: {list:?}")));
    }
    Ok(MuSingular { lambda, value, samples, xi_pushnitski: xi_of_path(&u1), xi_ac_path: xi_of_path(&u2), interpolated })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build_finite, build_lattice, CouplingPath};
    use crate::numkernel::HermMatrix;
    use crate::ssf::{ac_ssf, singular_ssf, ssf_pointwise};
    use crate::testutil::{seeded_hermitian, Lcg};

    fn nm() -> Numerics {
        Numerics::default()
    }

    fn phase(x: f64) -> C64 {
        C64::new(0.0, x).exp()
    }

    fn diag_path(w: &'static [f64]) -> UnitaryPath<'static> {
        UnitaryPath::uniform(0.0, 1.0, 16, move |t| {
            Ok(CMatrix::from_diagonal(&crate::numkernel::CVector::from_iterator(w.len(), w.iter().map(|&a| phase(TAU * a * t)))))
        })
        .unwrap()
    }

    fn rank_one(v: f64) -> RiggedModel {
        build_lattice(alloc::vec![0], alloc::vec![1.0], HermMatrix::zeros(1), CouplingPath::straight(HermMatrix::from_real_diagonal(&[v]))).unwrap()
    }

    fn scalar_finite() -> RiggedModel {
        build_finite(HermMatrix::from_real_diagonal(&[0.0]), CMatrix::identity(1, 1), CouplingPath::straight(HermMatrix::identity(1))).unwrap()
    }

    fn thetas() -> Vec<f64> {
        (0..16).map(|i| TAU * (i as f64 + 0.37) / 16.0).collect()
    }

    #[test]
    fn tracking_examples() {
        let t = track_eigenphases(&diag_path(&[0.0, 0.0])).unwrap();
        assert!(t.theta.iter().flatten().all(|&v| v == 0.0));
        let t = track_eigenphases(&diag_path(&[1.0])).unwrap();
        assert!((t.final_phases()[0] - TAU).abs() < 1e-12);
        let t = track_eigenphases(&diag_path(&[1.0, -1.0])).unwrap();
        let mut f = t.final_phases();
        f.sort_by(|a, b| a.total_cmp(b));
        assert!((f[0] + TAU).abs() < 1e-12 && (f[1] - TAU).abs() < 1e-12);
    }

    #[test]
    fn tracking_refines_coarse_grids() {
        let p = UnitaryPath::new(alloc::vec![0.0, 1.0], |t| Ok(CMatrix::from_element(1, 1, phase(2.4 * t)))).unwrap();
        let t = track_eigenphases(&p).unwrap();
        assert!(t.t.len() > 2);
        assert!((t.final_phases()[0] - 2.4).abs() < 1e-12);
        let p = UnitaryPath::new(alloc::vec![0.0, 1.0], |t| Ok(CMatrix::from_element(1, 1, phase(2.4 * t)))).unwrap().with_budget(0);
        assert!(matches!(track_eigenphases(&p), Err(Error::TrackingFailure(_))));
    }

    #[test]
    fn mu_examples() {
        let one = track_eigenphases(&diag_path(&[0.0])).unwrap();
        let loop1 = track_eigenphases(&diag_path(&[1.0])).unwrap();
        for th in thetas() {
            assert_eq!(mu(th, &one, 1e-6).unwrap(), 0);
            assert_eq!(mu(th, &loop1, 1e-6).unwrap(), 1);
        }
        let t = EigenphaseTracks { t: alloc::vec![0.0, 1.0], theta: alloc::vec![alloc::vec![0.0, 3.0 * PI], alloc::vec![0.0, -PI]] };
        // one crossing of e^{i pi/2} upward by the first track, none net by the second
        assert_eq!(mu(PI / 2.0, &t, 1e-6).unwrap(), 2 + 0);
        assert!(matches!(mu(PI, &t, 1e-6), Err(Error::AmbiguousTheta { .. })));
    }

    #[test]
    fn xi_examples() {
        assert_eq!(xi_of_path(&track_eigenphases(&diag_path(&[0.0])).unwrap()), 0.0);
        assert!((xi_of_path(&track_eigenphases(&diag_path(&[1.0])).unwrap()) + 1.0).abs() < 1e-12);
        assert!(xi_of_path(&track_eigenphases(&diag_path(&[1.0, -1.0])).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn mu_averages_to_minus_xi() {
        let t = track_eigenphases(&diag_path(&[0.3, -1.7, 2.2])).unwrap();
        let n = 4000;
        let avg: f64 = (0..n).map(|i| mu(TAU * (i as f64 + 0.5) / n as f64, &t, 0.0).unwrap() as f64).sum::<f64>() / n as f64;
        assert!((avg + xi_of_path(&t)).abs() < 2e-3 * 3.0);
    }

    #[test]
    fn closed_loops_are_theta_independent_and_additive() {
        let a = track_eigenphases(&diag_path(&[2.0, -1.0, 0.0])).unwrap();
        let b = track_eigenphases(&diag_path(&[-1.0, 0.0, 3.0])).unwrap();
        let ab = track_eigenphases(&diag_path(&[1.0, -1.0, 3.0])).unwrap();
        for th in thetas() {
            assert_eq!(mu(th, &a, 1e-6).unwrap(), 1);
            assert_eq!(mu(th, &ab, 1e-6).unwrap(), mu(th, &a, 1e-6).unwrap() + mu(th, &b, 1e-6).unwrap());
        }
        // concatenation sampled as one path
        let cat = UnitaryPath::uniform(0.0, 2.0, 40, |t| {
            let w: [f64; 3] = if t <= 1.0 { [2.0 * t, -t, 0.0] } else { [2.0 - (t - 1.0), -1.0, 3.0 * (t - 1.0)] };
            Ok(CMatrix::from_diagonal(&crate::numkernel::CVector::from_iterator(3, w.iter().map(|&x| phase(TAU * x)))))
        })
        .unwrap();
        let cat = track_eigenphases(&cat).unwrap();
        for th in thetas() {
            assert_eq!(mu(th, &cat, 1e-6).unwrap(), mu(th, &a, 1e-6).unwrap() + mu(th, &b, 1e-6).unwrap());
        }
    }

    #[test]
    fn pushnitski_examples() {
        let z = rank_one(2.0).with_path(CouplingPath::zero(1)).unwrap();
        let fin = pushnitski_tracks(&scalar_finite(), 0.5, None, &nm()).unwrap();
        let r1 = pushnitski_tracks(&rank_one(2.0), 0.0, None, &nm()).unwrap();
        assert!((fin.final_phases()[0] + TAU).abs() < 1e-6);
        assert!((r1.final_phases()[0] + PI / 2.0).abs() < 1e-8);
        for th in thetas() {
            assert_eq!(mu_pushnitski(&z, 0.0, th, None, &nm()).unwrap(), 0);
            assert_eq!(mu(th, &fin, 1e-6).unwrap(), -1);
            let want = if th > 1.5 * PI { -1 } else { 0 };
            assert_eq!(mu(th, &r1, 1e-6).unwrap(), want, "theta {th}");
        }
        assert!(matches!(mu_pushnitski(&rank_one(2.0), 0.0, 1.0, Some(1.0), &nm()), Err(Error::StartTolerance { .. })));
    }

    #[test]
    fn ac_examples() {
        let z = rank_one(2.0).with_path(CouplingPath::zero(1)).unwrap();
        let (r1, flagged) = ac_tracks(&rank_one(2.0), 0.0, &nm()).unwrap();
        assert!(!flagged);
        let (fin, _) = ac_tracks(&scalar_finite(), 0.5, &nm()).unwrap();
        let p = pushnitski_tracks(&rank_one(2.0), 0.0, None, &nm()).unwrap();
        for th in thetas() {
            assert_eq!(mu_ac(&z, 0.0, th, &nm()).unwrap(), 0);
            assert_eq!(mu(th, &fin, 1e-6).unwrap(), 0);
            assert_eq!(mu(th, &r1, 1e-6).unwrap(), mu(th, &p, 1e-6).unwrap());
        }
    }

    #[test]
    fn singular_examples() {
        assert_eq!(mu_singular(&rank_one(2.0), 0.0, 8, &nm()).unwrap().value, 0);
        assert_eq!(mu_singular(&scalar_finite(), 0.5, 8, &nm()).unwrap().value, -1);
        let s = mu_singular(&rank_one(3.0), 2.5, 8, &nm()).unwrap();
        assert_eq!(s.value, -1);
        // the skipped window lies off the band, where the fibre is empty
        assert!(!s.interpolated);
    }

    #[test]
    fn singular_mu_is_minus_singular_ssf_on_seeded_models() {
        let mut rng = Lcg::new(23);
        let h0 = seeded_hermitian(&mut rng, 4, 1.0);
        let j = seeded_hermitian(&mut rng, 4, 1.5);
        let fin = build_finite(h0, CMatrix::identity(4, 4), CouplingPath::straight(j)).unwrap();
        let lat = build_lattice(alloc::vec![0, 2], alloc::vec![1.0, 0.8], seeded_hermitian(&mut rng, 2, 0.3), CouplingPath::straight(seeded_hermitian(&mut rng, 2, 2.5))).unwrap();
        let mut checked = 0;
        for (m, ls) in [(&fin, [-1.3, -0.2, 0.6, 1.4]), (&lat, [-2.7, -0.9, 0.7, 2.4])] {
            for l in ls {
                let s = match singular_ssf(m, l, &nm()) {
                    Ok(s) => s,
                    Err(_) => continue,
                };
                let ms = mu_singular(m, l, 8, &nm()).unwrap();
                assert_eq!(ms.value, -s.xi_s_rounded, "lambda {l}");
                assert!((ms.xi_ac_path - ac_ssf(m, l, &nm()).unwrap()).abs() <= 1e-6);
                let xi = ssf_pointwise(m, l, &nm().ygrid, &nm()).unwrap().xi;
                assert!((ms.xi_pushnitski - xi).abs() <= 5e-3, "lambda {l}: {} vs {xi}", ms.xi_pushnitski);
                checked += 1;
            }
        }
        assert!(checked >= 6, "only {checked} regular samples");
    }

    #[test]
    fn mu_is_stable_under_grid_refinement() {
        let m = rank_one(2.0);
        let s = |t: f64| Ok(scattering_matrix(&m, SpectralPoint::boundary(0.0, Side::Plus), t, &nm())?.full);
        let coarse = track_eigenphases(&UnitaryPath::uniform(0.0, 1.0, 4, s).unwrap()).unwrap();
        let fine = track_eigenphases(&UnitaryPath::uniform(0.0, 1.0, 128, s).unwrap()).unwrap();
        for th in thetas() {
            assert_eq!(mu(th, &coarse, 1e-6).unwrap(), mu(th, &fine, 1e-6).unwrap());
        }
    }
}
