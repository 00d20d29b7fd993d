//! Pole trajectories of `r -> T_{lambda+iy}(H_r)`, resonance groups and the
//! resonance index by sign counting and by contour integration.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::models::{CouplingPath, RiggedModel};
use crate::numerics::Numerics;
use crate::numkernel::{eig_general, match_spectra, CMatrix};
use crate::quad::{integrate, QuadOptions};
use crate::resolvent::{resonance_set, straight_poles, BaseResolvent, Side, SpectralPoint};
use crate::C64;

use core::f64::consts::PI;

fn straight_j(model: &RiggedModel) -> Result<CMatrix> {
    model
        .path()
        .straight_direction()
        .map(|j| j.as_matrix().clone())
        .ok_or(Error::UnsupportedPath("pole computations need a straight path"))
}

/// Poles `r = -1/sigma` over the eigenvalues `sigma != 0` of `J T_z(H_base)`.
pub fn poles_at(model: &RiggedModel, lambda: f64, y: f64, side: Side) -> Result<Vec<C64>> {
    let j = model.path().straight_direction().ok_or(Error::UnsupportedPath("pole computations need a straight path"))?;
    let base = BaseResolvent::new(model, SpectralPoint::new(lambda, y, side)?)?;
    straight_poles(&base, j)
}

fn sigma_at(model: &RiggedModel, j: &CMatrix, lambda: f64, y: f64, side: Side) -> Result<Vec<C64>> {
    let base = BaseResolvent::new(model, SpectralPoint::new(lambda, y, side)?)?;
    eig_general(&(j * base.t()))
}

/// Continuous pole curves `r_j(y)` on a decreasing `y`-grid. Tracks are
/// matched in the eigenvalue variable `sigma = -1/r`, which stays bounded as
/// poles escape to infinity; `None` marks `sigma = 0`.
#[derive(Clone, Debug)]
pub struct PoleTrajectory {
    pub y: Vec<f64>,
    /// `sigma[j][i]` is track `j` at `y[i]`.
    pub sigma: Vec<Vec<C64>>,
}

impl PoleTrajectory {
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn r(&self, track: usize, i: usize) -> Option<C64> {
        let s = self.sigma[track][i];
        (s.norm() >= 1e-14).then(|| -s.inv())
    }

    /// Poles at the last (smallest) `y`.
    pub fn r_final(&self) -> Vec<Option<C64>> {
        let last = self.y.len() - 1;
        (0..self.len()).map(|j| self.r(j, last)).collect()
    }
}

const MAX_REFINE: usize = 30;

/// Tracks poles along `ygrid` (strictly decreasing, positive), inserting
/// geometric midpoints when a matched step is large against the local scale.
pub fn track_poles(model: &RiggedModel, lambda: f64, ygrid: &[f64], side: Side) -> Result<PoleTrajectory> {
    let j = straight_j(model)?;
    if ygrid.is_empty() || ygrid.windows(2).any(|w| !(w[1] < w[0])) || ygrid.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::Parameter("pole tracking needs a strictly decreasing positive y-grid".into()));
    }
    let k = j.nrows();
    let mut ys = alloc::vec![ygrid[0]];
    let mut cur = sigma_at(model, &j, lambda, ygrid[0], side)?;
    let mut tracks: Vec<Vec<C64>> = cur.iter().map(|&s| alloc::vec![s]).collect();
    for &target in &ygrid[1..] {
        let mut y_prev = *ys.last().unwrap();
        let mut y_next = target;
        let mut refinements = 0;
        loop {
            let next = sigma_at(model, &j, lambda, y_next, side)?;
            let perm = match_spectra(&cur, &next)?;
            let scale = 1.0 + cur.iter().fold(0.0f64, |a, s| a.max(s.norm()));
            let jump = (0..k).fold(0.0f64, |a, i| a.max((cur[i] - next[perm[i]]).norm()));
            if jump > 0.1 * scale {
                refinements += 1;
                if refinements > MAX_REFINE {
                    return Err(Error::TrackingFailure(format!(
                        "pole matching at lambda = {lambda} did not settle between y = {y_prev:e} and {y_next:e}"
                    )));
                }
                y_next = (y_prev * y_next).sqrt();
                continue;
            }
            let ordered: Vec<C64> = perm.iter().map(|&p| next[p]).collect();
            for (t, &s) in tracks.iter_mut().zip(&ordered) {
                t.push(s);
            }
            ys.push(y_next);
            cur = ordered;
            if y_next == target {
                break;
            }
            y_prev = y_next;
            y_next = target;
        }
    }
    Ok(PoleTrajectory { y: ys, sigma: tracks })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResonanceGroup {
    pub r_lambda: f64,
    /// Track indices of the members.
    pub members: Vec<usize>,
    /// Member poles at the smallest `y` (side +).
    pub endpoints: Vec<(f64, f64)>,
    pub n_plus: i64,
    pub n_minus: i64,
    pub index: i64,
    /// Another resonance point lies within `2 group_tol`.
    pub merged: bool,
    pub y_min: f64,
}

/// `N_+ - N_-` of a group.
pub fn resonance_index_counting(group: &ResonanceGroup) -> Result<i64> {
    for &(re, im) in &group.endpoints {
        if im.abs() < 1e-12 * (1.0 + re.abs()) {
            return Err(Error::AmbiguousSign { r: C64::new(re, im) });
        }
    }
    let n_plus = group.endpoints.iter().filter(|e| e.1 > 0.0).count() as i64;
    let n_minus = group.endpoints.iter().filter(|e| e.1 < 0.0).count() as i64;
    Ok(n_plus - n_minus)
}

fn geometric_down(y0: f64, y_min: f64, ratio: f64) -> Vec<f64> {
    let mut v = alloc::vec![y0];
    while *v.last().unwrap() * ratio > y_min {
        let n = *v.last().unwrap() * ratio;
        v.push(n);
    }
    v.push(y_min);
    v
}

/// Groups the tracked poles around each real resonance point in `interval`.
pub fn resonance_groups(model: &RiggedModel, lambda: f64, interval: (f64, f64), numerics: &Numerics) -> Result<Vec<ResonanceGroup>> {
    straight_j(model)?;
    let res = resonance_set(model, lambda, interval, numerics)?.resonance_r_values;
    if res.is_empty() {
        return Ok(Vec::new());
    }
    let mut y_min = numerics.y_min;
    for _attempt in 0..5 {
        let traj = track_poles(model, lambda, &geometric_down(1.0, y_min, 0.5), Side::Plus)?;
        let finals = traj.r_final();
        let mut groups = Vec::new();
        let mut ambiguous = false;
        for (g, &c) in res.iter().enumerate() {
            let merged = res.iter().enumerate().any(|(h, &o)| h != g && (o - c).abs() < 2.0 * numerics.group_tol);
            let members: Vec<usize> = (0..traj.len()).filter(|&j| finals[j].is_some_and(|r| (r - C64::new(c, 0.0)).norm() <= numerics.group_tol)).collect();
            if members.is_empty() {
                return Err(Error::TrackingFailure(format!(
                    "no pole within group_tol = {} of resonance point {c} at y = {y_min:e}",
                    numerics.group_tol
                )));
            }
            let endpoints: Vec<(f64, f64)> = members.iter().map(|&j| finals[j].map(|r| (r.re, r.im)).unwrap()).collect();
            let mut group = ResonanceGroup { r_lambda: c, members, endpoints, n_plus: 0, n_minus: 0, index: 0, merged, y_min };
            match resonance_index_counting(&group) {
                Ok(idx) => {
                    group.n_plus = group.endpoints.iter().filter(|e| e.1 > 0.0).count() as i64;
                    group.n_minus = group.endpoints.iter().filter(|e| e.1 < 0.0).count() as i64;
                    group.index = idx;
                }
                Err(Error::AmbiguousSign { .. }) => ambiguous = true,
                Err(e) => return Err(e),
            }
            groups.push(group);
        }
        if !ambiguous {
            return Ok(groups);
        }
        y_min *= 0.5;
    }
    Err(Error::AmbiguousSign { r: C64::new(res[0], 0.0) })
}

/// Sum of group indices over resonance points in `[0, 1]`.
pub fn total_resonance_index(model: &RiggedModel, lambda: f64, numerics: &Numerics) -> Result<i64> {
    let res = resonance_set(model, lambda, (-1e-8, 1.0 + 1e-8), numerics)?.resonance_r_values;
    if let Some(r) = res.iter().find(|r| r.abs() <= 1e-8 || (**r - 1.0).abs() <= 1e-8) {
        return Err(Error::IllPosed(format!("resonance point r = {r} sits at an end of the coupling interval")));
    }
    if model.path().is_straight() {
        return Ok(resonance_groups(model, lambda, (0.0, 1.0), numerics)?.iter().map(|g| g.index).sum());
    }
    // general paths: linearize at each resonance point
    let mut total = 0;
    for (i, &c) in res.iter().enumerate() {
        let mut eta: f64 = 1e-3;
        if i > 0 {
            eta = eta.min(0.25 * (c - res[i - 1]));
        }
        if i + 1 < res.len() {
            eta = eta.min(0.25 * (res[i + 1] - c));
        }
        eta = eta.min(0.5 * c).min(0.5 * (1.0 - c));
        let jdot = crate::numkernel::HermMatrix::new(model.path().j_dot(c))?;
        let local = model.rebased(c - eta, CouplingPath::straight(jdot.scale(2.0 * eta)))?;
        total += resonance_groups(&local, lambda, (0.0, 1.0), numerics)?.iter().map(|g| g.index).sum::<i64>();
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourIndex {
    pub value: f64,
    pub imag: f64,
}

/// `(1/pi) \oint Tr(J Im T_{lambda+iy}(H_r)) dr` over the boundary of the
/// upper half-disk of the given radius around `r_lambda`, counterclockwise.
pub fn resonance_index_contour(
    model: &RiggedModel,
    lambda: f64,
    r_lambda: f64,
    radius: f64,
    y: f64,
    numerics: &Numerics,
) -> Result<ContourIndex> {
    if !(radius > 0.0) || !(y > 0.0) {
        return Err(Error::Parameter(format!("contour needs radius > 0 and y > 0, got {radius} and {y}")));
    }
    let j = straight_j(model)?;
    let path = model.path();
    let base = BaseResolvent::new(model, SpectralPoint::upper(lambda, y))?;
    let poles = straight_poles(&base, model.path().straight_direction().unwrap())?;
    let eps = 10.0 * f64::EPSILON * (1.0 + r_lambda.abs() + radius);
    for p in &poles {
        let on_arc = p.im >= 0.0 && ((*p - C64::new(r_lambda, 0.0)).norm() - radius).abs() <= eps;
        let on_diam = p.im.abs() <= eps && (p.re - r_lambda).abs() <= radius;
        if on_arc || on_diam {
            return Err(Error::ContourCollision { r: *p });
        }
    }
    let integrand = |r: C64| -> Result<C64> {
        let (_, im) = base.at_complex(path, r)?;
        Ok((&j * im).trace())
    };
    let opts = QuadOptions { rel_tol: 0.0, ..QuadOptions::new(numerics.quad_tol) };
    let arc = integrate(
        |phi: f64| {
            let e = C64::new(phi.cos(), phi.sin());
            Ok(integrand(C64::new(r_lambda, 0.0) + e * radius)? * (C64::new(0.0, radius) * e))
        },
        0.0,
        PI,
        &[],
        opts,
    )?;
    let (lo, hi) = (r_lambda - radius, r_lambda + radius);
    let mut bps: Vec<f64> = Vec::new();
    for p in poles.iter().filter(|p| p.re > lo && p.re < hi) {
        bps.push(p.re);
        for f in [1.0, 10.0, 100.0] {
            bps.push(p.re - f * p.im.abs());
            bps.push(p.re + f * p.im.abs());
        }
    }
    let diam = integrate(|t: f64| integrand(C64::new(t, 0.0)), lo, hi, &bps, opts)?;
    let total = (arc.value + diam.value) / PI;
    Ok(ContourIndex { value: total.re, imag: total.im })
}

/// `(1/pi) int Tr(J Im T) dr` from `r_lambda - radius` to `r_lambda + radius`
/// along the upper semicircle (clockwise), avoiding the group.
pub fn avoided_line_integral(model: &RiggedModel, lambda: f64, r_lambda: f64, radius: f64, y: f64, numerics: &Numerics) -> Result<f64> {
    let j = straight_j(model)?;
    let path = model.path();
    let base = BaseResolvent::new(model, SpectralPoint::upper(lambda, y))?;
    let v = integrate(
        |phi: f64| {
            let e = C64::new(phi.cos(), phi.sin());
            let r = C64::new(r_lambda, 0.0) + e * radius;
            let (_, im) = base.at_complex(path, r)?;
            Ok((&j * im).trace() * (C64::new(0.0, radius) * e))
        },
        PI,
        0.0,
        &[],
        QuadOptions::new(numerics.quad_tol),
    )?;
    Ok(v.value.re / PI)
}
