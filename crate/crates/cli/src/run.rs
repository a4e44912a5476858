//! Mode dispatch. Everything is computed in memory first so the caller can
//! write files (or compare them) afterwards.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use hg_compton_core::{
    angular_scan, compton_line_energy, count_nodes, energy_grid, energy_spectrum,
    klein_nishina_reference, natural_area_to_barn, CellOutcome, PhysicalConstants,
    RegularizationParams,
};
use thiserror::Error;

use crate::config::{Format, Mode, RunConfig, Units};
use crate::output::{render_csv, render_json, Cell, Table};
use crate::validate::{run_cases, sample_cases};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    /// The inputs are well-formed but describe an impossible computation.
    #[error("invalid request: {0}")]
    Request(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<hg_compton_core::Error> for RunError {
    fn from(e: hg_compton_core::Error) -> Self {
        match e {
            hg_compton_core::Error::Domain(m) => Self::Request(m),
            other => Self::Numerical(other.to_string()),
        }
    }
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Request(_) => 2,
            Self::Numerical(_) => 3,
            Self::Io { .. } => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) | Self::Request(_) => "config",
            Self::Numerical(_) => "numerical",
            Self::Io { .. } => "io",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// Output files and their full contents, in a fixed order.
    pub files: Vec<(PathBuf, String)>,
    /// Human-readable lines for stdout.
    pub summary: Vec<String>,
    /// Set when the run completed but failed a numerical check.
    pub failure: Option<String>,
}

impl RunReport {
    pub fn write(&self) -> Result<(), RunError> {
        for (path, text) in &self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|source| RunError::Io {
                    path: dir.to_path_buf(),
                    source,
                })?;
            }
            std::fs::write(path, text).map_err(|source| RunError::Io {
                path: path.clone(),
                source,
            })?;
        }
        Ok(())
    }
}

const BASE_COLUMNS: [&str; 6] = [
    "theta_q_over_pi",
    "phi_q_over_pi",
    "E_q_keV",
    "delta_E_keV",
    "value",
    "error_estimate",
];

fn unit_factor(cfg: &RunConfig, c: &PhysicalConstants) -> Result<f64, RunError> {
    Ok(match cfg.output.units {
        Units::Natural => 1.0,
        Units::Barn => natural_area_to_barn(1.0, c)?,
    })
}

fn outcome_cells(o: &CellOutcome, f: f64) -> [Cell; 2] {
    match o.value() {
        Some(v) => [Cell::Num(v.value * f), Cell::Num(v.error * f)],
        None => [Cell::Num(f64::NAN), Cell::Num(f64::NAN)],
    }
}

fn sort_rows(rows: &mut [Vec<Cell>]) {
    let key = |r: &Vec<Cell>, i: usize| match r[i] {
        Cell::Num(v) => v,
        _ => f64::NAN,
    };
    rows.sort_by(|a, b| {
        (0..3)
            .map(|i| key(a, i).total_cmp(&key(b, i)))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    });
}

fn with_suffix(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "hg-compton".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn emit(
    cfg: &RunConfig,
    c: &PhysicalConstants,
    suffix: &str,
    table: &Table,
    files: &mut Vec<(PathBuf, String)>,
) {
    let path = &cfg.output.path;
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned());
    match cfg.output.format {
        Format::Csv => files.push((
            with_suffix(path, suffix, ext.as_deref().unwrap_or("csv")),
            render_csv(cfg, c, table),
        )),
        Format::Json => files.push((
            with_suffix(path, suffix, ext.as_deref().unwrap_or("json")),
            render_json(cfg, c, table),
        )),
        Format::Both => {
            files.push((with_suffix(path, suffix, "csv"), render_csv(cfg, c, table)));
            files.push((
                with_suffix(path, suffix, "json"),
                render_json(cfg, c, table),
            ));
        }
    }
}

fn common_meta(cfg: &RunConfig, c: &PhysicalConstants) -> Vec<(String, String)> {
    let mut meta = Vec::new();
    if let Some(w) = cfg.beam.paraxial_warning(c) {
        meta.push(("warning".into(), w));
    }
    meta
}

/// Runs the configured mode on the current rayon pool.
pub fn execute(cfg: &RunConfig) -> Result<RunReport, RunError> {
    let c = PhysicalConstants::default();
    match cfg.scan.mode {
        Mode::Angular => angular(cfg, &c),
        Mode::Spectrum => spectrum(cfg, &c),
        Mode::Validate => validate(cfg, &c),
        Mode::KnReference => kn_reference(cfg, &c),
    }
}

fn angular(cfg: &RunConfig, c: &PhysicalConstants) -> Result<RunReport, RunError> {
    let sc = &cfg.scan;
    let thetas: Vec<f64> = sc.theta_pi.iter().map(|t| t * PI).collect();
    let phis: Vec<f64> = sc.phi_pi.iter().map(|p| p * PI).collect();
    let table = angular_scan(&cfg.beam, &thetas, &phis, &sc.delta_e_kev, &cfg.quad, c)?;
    let f = unit_factor(cfg, c)?;
    // Cells follow (delta_e, theta, phi) in list order.
    let labels = sc.delta_e_kev.iter().flat_map(|_| {
        sc.theta_pi
            .iter()
            .flat_map(|&t| sc.phi_pi.iter().map(move |&p| (t, p)))
    });
    let mut rows: Vec<Vec<Cell>> = table
        .cells
        .iter()
        .zip(labels)
        .map(|(cell, (t, p))| {
            let [v, e] = outcome_cells(&cell.outcome, f);
            vec![
                Cell::Num(t),
                Cell::Num(p),
                Cell::Num(cell.e_q),
                Cell::Num(cell.delta_e),
                v,
                e,
                Cell::Text(cell.outcome.status().into()),
            ]
        })
        .collect();
    sort_rows(&mut rows);
    let failed = table
        .cells
        .iter()
        .filter(|c| matches!(c.outcome, CellOutcome::Failed(_)))
        .count();
    let mut columns = BASE_COLUMNS.to_vec();
    columns.push("status");
    let out = Table {
        columns,
        rows,
        meta: common_meta(cfg, c),
    };
    let mut files = Vec::new();
    emit(cfg, c, "", &out, &mut files);
    Ok(RunReport {
        summary: vec![format!(
            "angular: {} cells, {failed} failed",
            table.cells.len()
        )],
        files,
        failure: None,
    })
}

fn label(x: f64) -> String {
    format!("{x}")
}

fn spectrum(cfg: &RunConfig, c: &PhysicalConstants) -> Result<RunReport, RunError> {
    let sc = &cfg.scan;
    let f = unit_factor(cfg, c)?;
    let many = sc.theta_pi.len() * sc.phi_pi.len() > 1;
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for &t in &sc.theta_pi {
        for &p in &sc.phi_pi {
            let (theta, phi) = (t * PI, p * PI);
            let e0 = compton_line_energy(cfg.beam.k, theta, c)?;
            let grid = energy_grid(e0, cfg.beam.k, sc.de_min_kev, sc.de_max_kev, sc.de_step_kev)?;
            let spec = energy_spectrum(&cfg.beam, theta, phi, &grid, &cfg.quad, c)?;
            let nodes = match count_nodes(&spec, sc.node_floor) {
                Ok(n) => n.to_string(),
                Err(e) => format!("unavailable ({e})"),
            };
            let integral = spec.integrate();
            let kn = klein_nishina_reference(cfg.beam.k, theta, c)?;
            let rows = spec
                .rows
                .iter()
                .map(|r| {
                    let [v, e] = outcome_cells(&r.outcome, f);
                    vec![
                        Cell::Num(t),
                        Cell::Num(p),
                        Cell::Num(r.e_q),
                        Cell::Num(r.delta_e),
                        v,
                        e,
                        Cell::Text(r.outcome.status().into()),
                    ]
                })
                .collect();
            let mut meta = common_meta(cfg, c);
            meta.extend([
                ("theta_q_over_pi".into(), format!("{t:?}")),
                ("phi_q_over_pi".into(), format!("{p:?}")),
                ("compton_line_keV".into(), format!("{e0:.16e}")),
                ("nodes".into(), nodes.clone()),
                ("energy_integral".into(), format!("{:.16e}", integral * f)),
                ("klein_nishina".into(), format!("{:.16e}", kn * f)),
            ]);
            let mut columns = BASE_COLUMNS.to_vec();
            columns.push("status");
            let table = Table {
                columns,
                rows,
                meta,
            };
            let suffix = if many {
                format!("_theta{}_phi{}", label(t), label(p))
            } else {
                String::new()
            };
            emit(cfg, c, &suffix, &table, &mut files);
            summary.push(format!(
                "spectrum theta={t}pi phi={p}pi: {} points, nodes={nodes}, integral/KN={:.6}",
                spec.rows.len(),
                integral / kn
            ));
        }
    }
    Ok(RunReport {
        files,
        summary,
        failure: None,
    })
}

fn validate(cfg: &RunConfig, c: &PhysicalConstants) -> Result<RunReport, RunError> {
    let sc = &cfg.scan;
    let thetas: Vec<f64> = sc.theta_pi.iter().map(|t| t * PI).collect();
    let cases = sample_cases(&[cfg.beam], &thetas, sc.samples, sc.seed, &cfg.quad, c)?;
    let reg = match (cfg.oracle.eta_e_kev, cfg.oracle.eta_q_kev) {
        (Some(eta_e), Some(eta_q)) => Some(RegularizationParams {
            eta_e,
            eta_q,
            rel_tol: cfg.oracle.rel_tol,
        }),
        _ => None,
    };
    let outcomes = run_cases(&cases, reg, cfg.oracle.rel_tol, &cfg.quad, c);
    let f = unit_factor(cfg, c)?;
    let num = |r: &hg_compton_core::Result<hg_compton_core::CrossSectionValue>| match r {
        Ok(v) => [Cell::Num(v.value * f), Cell::Num(v.error * f)],
        Err(_) => [Cell::Num(f64::NAN), Cell::Num(f64::NAN)],
    };
    let mut rows: Vec<Vec<Cell>> = outcomes
        .iter()
        .map(|o| {
            let [v, e] = num(&o.reduced);
            let [ov, oe] = num(&o.oracle);
            vec![
                Cell::Num(o.case.theta_q / PI),
                Cell::Num(o.case.phi_q / PI),
                Cell::Num(o.case.e_q),
                Cell::Num(o.case.delta_e),
                v,
                e,
                ov,
                oe,
                Cell::Num(o.deviation().unwrap_or(f64::NAN)),
                Cell::Text(o.status().into()),
            ]
        })
        .collect();
    sort_rows(&mut rows);
    let failures = outcomes.iter().filter(|o| o.deviation().is_none()).count();
    let max_dev = outcomes
        .iter()
        .filter_map(|o| o.deviation())
        .fold(0.0, f64::max);
    let mut meta = common_meta(cfg, c);
    meta.push(("max_relative_deviation".into(), format!("{max_dev:.16e}")));
    meta.push(("failed_cases".into(), failures.to_string()));
    let mut columns = BASE_COLUMNS.to_vec();
    columns.extend([
        "oracle_value",
        "oracle_error",
        "relative_deviation",
        "status",
    ]);
    let table = Table {
        columns,
        rows,
        meta,
    };
    let mut files = Vec::new();
    emit(cfg, c, "", &table, &mut files);
    let failure = if failures > 0 {
        Some(format!(
            "{failures} of {} validation cases failed to evaluate",
            outcomes.len()
        ))
    } else if max_dev > cfg.oracle.max_deviation {
        Some(format!(
            "max relative deviation {max_dev:.3e} exceeds {:.3e}",
            cfg.oracle.max_deviation
        ))
    } else {
        None
    };
    Ok(RunReport {
        files,
        summary: vec![format!(
            "validate: {} cases, max relative deviation {max_dev:.3e}, {failures} failed",
            outcomes.len()
        )],
        failure,
    })
}

fn kn_reference(cfg: &RunConfig, c: &PhysicalConstants) -> Result<RunReport, RunError> {
    let f = unit_factor(cfg, c)?;
    let k = cfg.beam.k;
    let mut rows = Vec::new();
    for &t in &cfg.scan.theta_pi {
        let theta = t * PI;
        let e0 = compton_line_energy(k, theta, c)?;
        let kn = klein_nishina_reference(k, theta, c)?;
        rows.push(vec![
            Cell::Num(t),
            Cell::Num(0.0),
            Cell::Num(e0),
            Cell::Num(0.0),
            Cell::Num(kn * f),
            Cell::Num(0.0),
            Cell::Text("ok".into()),
        ]);
    }
    sort_rows(&mut rows);
    let mut columns = BASE_COLUMNS.to_vec();
    columns.push("status");
    let n = rows.len();
    let table = Table {
        columns,
        rows,
        meta: Vec::new(),
    };
    let mut files = Vec::new();
    emit(cfg, c, "", &table, &mut files);
    Ok(RunReport {
        files,
        summary: vec![format!("kn-reference: {n} angles")],
        failure: None,
    })
}
