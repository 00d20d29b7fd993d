//! JSON run configuration (`schema: 1`).

use serde::Deserialize;

use ssf_core::models::{build_finite, build_lattice, discretize_schrodinger, CouplingPath, PathPiece, RiggedModel};
use ssf_core::numerics::Numerics;
use ssf_core::numkernel::{CMatrix, HermMatrix};
use ssf_core::C64;

use crate::error::{CliError, CliResult};

pub const SCHEMA: u32 = 1;

/// Dense matrix as row-major real and (optional) imaginary parts.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixSpec {
    pub fn to_matrix(&self) -> CliResult<CMatrix> {
        let n = self.re.len();
        let m = self.re.first().map_or(0, |r| r.len());
        if self.re.iter().any(|r| r.len() != m) {
            return Err(CliError::Config("matrix rows have different lengths".into()));
        }
        if let Some(im) = &self.im {
            if im.len() != n || im.iter().any(|r| r.len() != m) {
                return Err(CliError::Config("imaginary part does not match the real part's shape".into()));
            }
        }
        Ok(CMatrix::from_fn(n, m, |i, j| C64::new(self.re[i][j], self.im.as_ref().map_or(0.0, |im| im[i][j]))))
    }

    pub fn to_herm(&self) -> CliResult<HermMatrix> {
        Ok(HermMatrix::new(self.to_matrix()?)?)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Finite {
        h0: MatrixSpec,
        #[serde(default)]
        f: Option<MatrixSpec>,
    },
    Lattice {
        sites: Vec<i64>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
        #[serde(default)]
        j_bg: Option<MatrixSpec>,
    },
    Schrodinger {
        v0: Vec<f64>,
        v: Vec<f64>,
        h: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
    },
}

fn default_epsilon() -> f64 {
    1e-6
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceSpec {
    pub start: f64,
    pub end: f64,
    pub coeffs: Vec<MatrixSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    Zero,
    Straight { j: MatrixSpec },
    Bent { mid: MatrixSpec, end: MatrixSpec },
    Piecewise { pieces: Vec<PieceSpec> },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub count: usize,
    /// Distance kept from the band edges `+-2` on lattice models.
    pub edge_margin: f64,
    pub theta_count: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { lambda_min: -1.9, lambda_max: 1.9, count: 39, edge_margin: 1e-3, theta_count: 8 }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: Option<String>,
    pub json: Option<String>,
    pub svg: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub path: Option<PathSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema != SCHEMA {
            return Err(CliError::Config(format!("unsupported schema {}, expected {SCHEMA}", self.schema)));
        }
        self.numerics.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let g = &self.grid;
        if g.count == 0 || !(g.lambda_max >= g.lambda_min) || !g.lambda_min.is_finite() || !g.lambda_max.is_finite() {
            return Err(CliError::Config("grid needs count >= 1 and lambda_min <= lambda_max".into()));
        }
        if !(g.edge_margin > 0.0) || g.theta_count == 0 {
            return Err(CliError::Config("grid needs edge_margin > 0 and theta_count >= 1".into()));
        }
        if matches!(self.model, ModelSpec::Schrodinger { .. }) && self.path.is_some() {
            return Err(CliError::Config("schrodinger models carry their own path; remove `path`".into()));
        }
        Ok(())
    }

    pub fn build_model(&self) -> CliResult<RiggedModel> {
        let cfg_err = |e: ssf_core::Error| CliError::Config(e.to_string());
        let k = match &self.model {
            ModelSpec::Finite { h0, .. } => h0.re.len(),
            ModelSpec::Lattice { sites, .. } => sites.len(),
            ModelSpec::Schrodinger { v0, v, h, epsilon } => {
                return discretize_schrodinger(v0, v, *h, *epsilon).map_err(cfg_err);
            }
        };
        let path = match &self.path {
            None | Some(PathSpec::Zero) => CouplingPath::zero(k),
            Some(PathSpec::Straight { j }) => CouplingPath::straight(j.to_herm()?),
            Some(PathSpec::Bent { mid, end }) => CouplingPath::bent(mid.to_herm()?, end.to_herm()?).map_err(cfg_err)?,
            Some(PathSpec::Piecewise { pieces }) => {
                let mut out = Vec::with_capacity(pieces.len());
                for p in pieces {
                    let coeffs = p.coeffs.iter().map(|c| c.to_herm()).collect::<CliResult<Vec<_>>>()?;
                    out.push(PathPiece { start: p.start, end: p.end, coeffs });
                }
                CouplingPath::piecewise(out).map_err(cfg_err)?
            }
        };
        match &self.model {
            ModelSpec::Finite { h0, f } => {
                let f = match f {
                    Some(f) => f.to_matrix()?,
                    None => CMatrix::identity(k, k),
                };
                build_finite(h0.to_herm()?, f, path).map_err(cfg_err)
            }
            ModelSpec::Lattice { sites, weights, j_bg } => {
                let w = weights.clone().unwrap_or_else(|| vec![1.0; k]);
                let bg = match j_bg {
                    Some(m) => m.to_herm()?,
                    None => HermMatrix::zeros(k),
                };
                build_lattice(sites.clone(), w, bg, path).map_err(cfg_err)
            }
            ModelSpec::Schrodinger { .. } => unreachable!(),
        }
    }

    /// Evenly spaced lambda values, minus those within `edge_margin` of the
    /// edges of the essential spectrum.
    pub fn lambda_grid(&self, model: &RiggedModel) -> Vec<f64> {
        let g = &self.grid;
        let pts: Vec<f64> = if g.count == 1 {
            vec![g.lambda_min]
        } else {
            (0..g.count).map(|i| g.lambda_min + (g.lambda_max - g.lambda_min) * i as f64 / (g.count - 1) as f64).collect()
        };
        match model.essential_spectrum() {
            Some((a, b)) => pts.into_iter().filter(|l| (l - a).abs() > g.edge_margin && (l - b).abs() > g.edge_margin).collect(),
            None => pts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RANK_ONE: &str = r#"{"schema": 1, "model": {"kind": "lattice", "sites": [0]},
        "path": {"kind": "straight", "j": {"re": [[2.0]]}}}"#;

    #[test]
    fn parses_minimal_lattice() {
        let cfg = RunConfig::parse(RANK_ONE).unwrap();
        let m = cfg.build_model().unwrap();
        assert_eq!(m.k(), 1);
        assert_eq!(cfg.numerics, Numerics::default());
    }

    #[test]
    fn rejects_bad_documents() {
        for bad in [
            r#"{"schema": 2, "model": {"kind": "lattice", "sites": [0]}}"#,
            r#"{"schema": 1, "model": {"kind": "lattice", "sites": [0]}, "numerics": {"quad_tol": -1.0}}"#,
            r#"{"schema": 1, "model": {"kind": "lattice", "sites": [0]}, "extra": 1}"#,
            r#"{"schema": 1, "model": {"kind": "torus"}}"#,
            r#"{"schema": 1, "model": {"kind": "lattice", "sites": [0]}, "grid": {"count": 0}}"#,
        ] {
            assert!(matches!(RunConfig::parse(bad), Err(CliError::Config(_))), "{bad}");
        }
        let dup = RunConfig::parse(r#"{"schema": 1, "model": {"kind": "lattice", "sites": [0, 0]}}"#).unwrap();
        assert!(matches!(dup.build_model(), Err(CliError::Config(_))));
    }

    #[test]
    fn grid_skips_band_edges() {
        let mut cfg = RunConfig::parse(RANK_ONE).unwrap();
        cfg.grid = GridSpec { lambda_min: -2.0, lambda_max: 2.0, count: 5, ..GridSpec::default() };
        let m = cfg.build_model().unwrap();
        assert_eq!(cfg.lambda_grid(&m), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn finite_and_schrodinger_models() {
        let fin = RunConfig::parse(
            r#"{"schema": 1, "model": {"kind": "finite", "h0": {"re": [[0.0, 0.0], [0.0, 2.0]]}},
                "path": {"kind": "bent", "mid": {"re": [[0.2, 0.0], [0.0, 0.1]]}, "end": {"re": [[1.0, 0.0], [0.0, 0.0]]}}}"#,
        )
        .unwrap();
        assert!(fin.build_model().unwrap().is_finite());
        let s = RunConfig::parse(r#"{"schema": 1, "model": {"kind": "schrodinger", "v0": [0, 0, 0], "v": [1, 0, -1], "h": 0.5}}"#).unwrap();
        assert_eq!(s.build_model().unwrap().k(), 3);
    }
}
