//! Subcommand implementations. Each returns the artifacts as text; `main`
//! decides where they go.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use ssf_core::models::RiggedModel;
use ssf_core::numerics::Numerics;
use ssf_core::resolvent::{Side, SpectralPoint};
use ssf_core::resonance::{resonance_groups, resonance_index_contour, track_poles, ResonanceGroup};
use ssf_core::scattering::{bk_offaxis_residual, birman_krein_residuals, cross_check_s, scattering_matrix};
use ssf_core::specflow::mu_singular;
use ssf_core::ssf::{singular_ssf, SSFSample};

use crate::config::RunConfig;
use crate::emit::{csv_string, Column, Field};
use crate::error::{CliError, CliResult};
use crate::suites::{run_suite, Report, Suite};

/// Environment variable that relocates relative output paths.
pub const OUT_DIR_VAR: &str = "SSF_OUT_DIR";

pub fn resolve_output(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_VAR) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    RunConfig::parse(&text)
}

pub const SSF_COLUMNS: [Column; 8] = [
    Column::real("lambda"),
    Column::real("xi"),
    Column::real("xi_ac"),
    Column::real("xi_s"),
    Column::real("xi_s_rounded"),
    Column::real("residual"),
    Column::real("near_resonance"),
    Column::real("extrapolation_quality"),
];

pub fn ssf_row(s: &SSFSample) -> Vec<Field> {
    vec![
        Field::Real(s.lambda),
        Field::Real(s.xi),
        Field::Real(s.xi_ac),
        Field::Real(s.xi_s),
        Field::Int(s.xi_s_rounded),
        Field::Real(s.residual),
        Field::Flag(s.near_resonance),
        Field::Real(s.extrapolation_quality),
    ]
}

/// SSF rows over `lambdas`, evaluated in parallel and kept in input order.
pub fn ssf_rows(model: &RiggedModel, lambdas: &[f64], nm: &Numerics) -> CliResult<Vec<Vec<Field>>> {
    let samples: Vec<ssf_core::Result<SSFSample>> = lambdas.par_iter().map(|&l| singular_ssf(model, l, nm)).collect();
    samples
        .into_iter()
        .zip(lambdas)
        .map(|(s, l)| s.map(|s| ssf_row(&s)).map_err(|e| CliError::Verification(format!("lambda = {l}: {e}"))))
        .collect()
}

pub fn cmd_ssf(cfg: &RunConfig) -> CliResult<String> {
    let model = cfg.build_model()?;
    let lambdas = cfg.lambda_grid(&model);
    csv_string(&SSF_COLUMNS, &ssf_rows(&model, &lambdas, &cfg.numerics)?)
}

const GROUP_COLUMNS: [Column; 8] = [
    Column::real("r_lambda"),
    Column::real("n_plus"),
    Column::real("n_minus"),
    Column::real("index"),
    Column::real("contour"),
    Column::real("merged"),
    Column::real("members"),
    Column::real("y_min"),
];

pub struct ResonanceOutput {
    pub groups: String,
    pub trajectory: String,
}

fn contour_radius(groups: &[ResonanceGroup], g: &ResonanceGroup) -> f64 {
    let gap = groups.iter().filter(|o| o.r_lambda != g.r_lambda).map(|o| (o.r_lambda - g.r_lambda).abs()).fold(1.0f64, f64::min);
    0.4 * gap.min(0.5)
}

/// Group table over `[0, 1]` plus the wide trajectory table of the tracked
/// `sigma` (poles at `r = -1/sigma`).
pub fn cmd_resonance(cfg: &RunConfig, lambda: f64) -> CliResult<ResonanceOutput> {
    let model = cfg.build_model()?;
    let nm = &cfg.numerics;
    let groups = resonance_groups(&model, lambda, (0.0, 1.0), nm)?;
    let mut rows = Vec::with_capacity(groups.len());
    for g in &groups {
        let c = resonance_index_contour(&model, lambda, g.r_lambda, contour_radius(&groups, g), 1e-3, nm)?;
        rows.push(vec![
            Field::Real(g.r_lambda),
            Field::Int(g.n_plus),
            Field::Int(g.n_minus),
            Field::Int(g.index),
            Field::Real(c.value),
            Field::Flag(g.merged),
            Field::Int(g.members.len() as i64),
            Field::Real(g.y_min),
        ]);
    }
    let groups_csv = csv_string(&GROUP_COLUMNS, &rows)?;

    let mut ys = vec![1.0];
    while *ys.last().unwrap() * 0.5 > nm.y_min {
        ys.push(ys.last().unwrap() * 0.5);
    }
    ys.push(nm.y_min);
    let traj = track_poles(&model, lambda, &ys, Side::Plus)?;
    let mut cols = vec![Column::real("y")];
    cols.extend((0..traj.len()).map(|j| Column::complex_owned(format!("sigma{j}"))));
    let traj_rows: Vec<Vec<Field>> = traj
        .y
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let mut row = vec![Field::Real(y)];
            row.extend(traj.sigma.iter().map(|track| Field::Complex(track[i])));
            row
        })
        .collect();
    Ok(ResonanceOutput { groups: groups_csv, trajectory: csv_string(&cols, &traj_rows)? })
}

#[derive(Serialize)]
struct ScatteringJson {
    lambda: f64,
    y: f64,
    r: f64,
    dim: usize,
    /// Row-major `[re, im]` pairs.
    s: Vec<Vec<[f64; 2]>>,
    det: [f64; 2],
    phase: f64,
    residuals: ScatteringResiduals,
}

#[derive(Serialize)]
struct ScatteringResiduals {
    unitarity: f64,
    birman_krein: f64,
    /// On-shell only.
    birman_krein_ac: Option<f64>,
    /// On-shell only.
    wave_matrix_cross_check: Option<f64>,
}

pub fn cmd_scattering(cfg: &RunConfig, lambda: f64, y: f64) -> CliResult<String> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(CliError::Config(format!("--y must be >= 0, got {y}")));
    }
    let model = cfg.build_model()?;
    let nm = &cfg.numerics;
    let at = if y > 0.0 { SpectralPoint::upper(lambda, y) } else { SpectralPoint::boundary(lambda, Side::Plus) };
    let s = scattering_matrix(&model, at, 1.0, nm)?;
    let residuals = if y > 0.0 {
        ScatteringResiduals {
            unitarity: s.unitarity_defect(),
            birman_krein: bk_offaxis_residual(&model, at, nm)?,
            birman_krein_ac: None,
            wave_matrix_cross_check: None,
        }
    } else {
        let (bk, bka) = birman_krein_residuals(&model, lambda, nm)?;
        ScatteringResiduals {
            unitarity: s.unitarity_defect(),
            birman_krein: bk,
            birman_krein_ac: Some(bka),
            wave_matrix_cross_check: Some(cross_check_s(&model, lambda, 1.0, nm)?),
        }
    };
    let entries = (0..s.s.nrows()).map(|i| (0..s.s.ncols()).map(|j| [s.s[(i, j)].re, s.s[(i, j)].im]).collect()).collect();
    let doc = ScatteringJson { lambda, y, r: 1.0, dim: s.s.nrows(), s: entries, det: [s.det.re, s.det.im], phase: s.phase, residuals };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Format(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

const MU_COLUMNS: [Column; 6] = [
    Column::real("lambda"),
    Column::real("theta"),
    Column::real("mu"),
    Column::real("mu_ac"),
    Column::real("mu_s"),
    Column::real("minus_xi_s"),
];

pub fn cmd_mu(cfg: &RunConfig, lambda: f64) -> CliResult<String> {
    let model = cfg.build_model()?;
    let nm = &cfg.numerics;
    let ms = mu_singular(&model, lambda, cfg.grid.theta_count, nm)?;
    let xi = singular_ssf(&model, lambda, nm)?;
    let rows: Vec<Vec<Field>> = ms
        .samples
        .iter()
        .map(|s| {
            vec![
                Field::Real(lambda),
                Field::Real(s.theta),
                Field::Int(s.mu),
                Field::Int(s.mu_ac),
                Field::Int(s.mu - s.mu_ac),
                Field::Int(-xi.xi_s_rounded),
            ]
        })
        .collect();
    csv_string(&MU_COLUMNS, &rows)
}

pub fn cmd_verify(suite: Suite, seed: u64, nm: &Numerics) -> Report {
    run_suite(suite, seed, nm)
}
