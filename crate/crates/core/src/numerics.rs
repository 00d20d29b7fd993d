//! Tolerances and grids shared by the spectral-shift, resonance, scattering
//! and spectral-flow engines.

use alloc::format;

use crate::error::{Error, Result};
use crate::ssf::YGrid;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Numerics {
    /// Relative eigenvalue threshold separating fibre rank from roundoff.
    pub rank_tol: f64,
    /// Absolute tolerance of coupling-constant quadratures.
    pub quad_tol: f64,
    pub ygrid: YGrid,
    /// `|Im r|` below which a pole counts as real.
    pub res_real_tol: f64,
    /// Convergence radius of a resonance group at `y_min`.
    pub group_tol: f64,
    /// Exclusion half-width around resonance points in coupling integrals.
    pub delta: f64,
    pub wave_tol: f64,
    /// Local error target of the ordered-exponential integrator.
    pub ode_tol: f64,
    /// Nominal step of the ordered-exponential integrator.
    pub ode_step: f64,
    /// Minimal distance between a probe angle and a final eigenphase.
    pub mu_guard: f64,
    /// Smallest imaginary part used for pole sign counting.
    pub y_min: f64,
    /// `||S(lambda + i Y_max) - 1||_1` required at the start of the y-path.
    pub start_tol: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            quad_tol: 1e-10,
            ygrid: YGrid::default(),
            res_real_tol: 1e-8,
            group_tol: 1e-3,
            delta: 1e-4,
            wave_tol: 1e-8,
            ode_tol: 1e-10,
            ode_step: 1e-3,
            mu_guard: 1e-6,
            y_min: 1e-6,
            start_tol: 1e-6,
        }
    }
}

impl Numerics {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rank_tol", self.rank_tol),
            ("quad_tol", self.quad_tol),
            ("res_real_tol", self.res_real_tol),
            ("group_tol", self.group_tol),
            ("delta", self.delta),
            ("wave_tol", self.wave_tol),
            ("ode_tol", self.ode_tol),
            ("ode_step", self.ode_step),
            ("mu_guard", self.mu_guard),
            ("y_min", self.y_min),
            ("start_tol", self.start_tol),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.ode_step > 0.5 || self.delta >= 0.1 {
            return Err(Error::Parameter("ode_step must be <= 0.5 and delta < 0.1".into()));
        }
        self.ygrid.validate()
    }
}
