//! The triple-differential cross section `d^3 sigma / dOmega dE_q` and the
//! angular and spectral scans built on it.
//!
//! With the energy delta fixing `P` and the on-shell delta fixing `u` for each
//! electron azimuth, the cross section reduces to
//!
//! ```text
//! N alpha^2 w0^2 E_q / (2 m k) * P * Int dphi_p  Sum_roots  W_if F^2 / |g'(u)|
//! ```
//!
//! where `F` is the transverse profile and `N` the plane-wave normalisation
//! (see [`PLANE_WAVE_NORMALIZATION`]). The azimuthal integral is split at the
//! tangent meridians, where the root weight has an inverse square-root
//! singularity, and each piece is mapped through `phi = a + (b - a)(1 - cos pi t)/2`
//! so the integrand in `t` is bounded.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::{profile_scaled, w_if_unchecked};
use crate::constants::PhysicalConstants;
use crate::error::{domain, Error, Result};
use crate::kinematics::{
    compton_line_energy, delta_roots, electron_momentum, tangent_azimuths, BeamParams, ScatterPoint,
};
use crate::quadrature::{integrate_adaptive, AdaptiveOptions};

/// Overall factor applied to the closed-form prefactor `alpha^2 w0^2 E_q / (2 m k)`.
///
/// Taken literally, that prefactor together with `W_if` reproduces eight times
/// the unpolarised Klein-Nishina cross section in the plane-wave limit
/// (`w0 -> infinity`, `n_x = n_y = 0`, integrated over `E_q`). The factor
/// fixes the absolute scale to Klein-Nishina.
pub const PLANE_WAVE_NORMALIZATION: f64 = 0.125;

/// Tolerances for the azimuthal quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Relative tolerance on each cross-section value.
    pub tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_subdivisions: 4000,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return domain(format!(
                "quadrature tolerance must lie in (0, 1), got {}",
                self.tol
            ));
        }
        if self.max_subdivisions == 0 {
            return domain("max_subdivisions must be positive");
        }
        Ok(())
    }
}

/// A cross-section value in keV^-3 sr^-1 with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossSectionValue {
    pub value: f64,
    pub error: f64,
}

impl CrossSectionValue {
    pub const ZERO: Self = Self {
        value: 0.0,
        error: 0.0,
    };

    /// The same value in barn keV^-1 sr^-1.
    pub fn to_barn(self, c: &PhysicalConstants) -> Result<Self> {
        Ok(Self {
            value: c.natural_area_to_barn(self.value)?,
            error: c.natural_area_to_barn(self.error)?,
        })
    }
}

/// `N alpha^2 w0^2 E_q / (2 m k)` in keV^-3.
pub fn prefactor(beam: &BeamParams, e_q: f64, c: &PhysicalConstants) -> f64 {
    let w0 = beam.w0_natural(c);
    PLANE_WAVE_NORMALIZATION * c.alpha() * c.alpha() * w0 * w0 * e_q / (2.0 * c.m_e() * beam.k)
}

/// Evaluates `d^3 sigma / dOmega dE_q` at `pt`.
pub fn dcs(
    beam: &BeamParams,
    pt: &ScatterPoint,
    cfg: &QuadratureConfig,
    c: &PhysicalConstants,
) -> Result<CrossSectionValue> {
    cfg.validate()?;
    let k = beam.k;
    if pt.e_q > k {
        return Err(Error::KinematicallyForbidden { e_q: pt.e_q, k });
    }
    if pt.e_q == k {
        return domain("E_q = k has no electron recoil; the spectrum is evaluated on E_q < k only");
    }
    let es = electron_momentum(k, pt.e_q, c)?;
    let q = pt.momentum();
    let scale = beam.w0_natural(c) * std::f64::consts::FRAC_1_SQRT_2;

    // Segments of the relative azimuth delta = phi_p - phi_q.
    let mut cuts = vec![-PI, 0.0, PI];
    cuts.extend(tangent_azimuths(&es, pt, k));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let segments: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();

    let integrand = |delta: f64| -> Result<f64> {
        let roots = delta_roots(&es, pt, pt.phi_q + delta, k)?;
        let mut s = 0.0;
        for r in roots.iter() {
            let w = w_if_unchecked(r.p_f, q, k);
            debug_assert!(w > -1e-9, "W_if = {w} < 0 on the constraint surface");
            let f = profile_scaled(beam, scale, r.q_transfer.x, r.q_transfer.y);
            s += w * f * f * r.jacobian_weight;
        }
        Ok(s)
    };

    // t in [i, i + 1] covers segment i with a cosine map.
    let mapped = |t: f64| -> Result<f64> {
        let i = (t.floor() as usize).min(segments.len() - 1);
        let (a, b) = segments[i];
        let local = t - i as f64;
        let (s, cs) = (PI * local).sin_cos();
        let delta = a + 0.5 * (b - a) * (1.0 - cs);
        let jac = 0.5 * PI * (b - a) * s;
        if jac == 0.0 {
            return Ok(0.0);
        }
        Ok(integrand(delta)? * jac)
    };

    let norm = prefactor(beam, pt.e_q, c) * es.p;
    let breaks: Vec<f64> = (1..segments.len()).map(|i| i as f64).collect();
    let opts = AdaptiveOptions {
        rel_tol: cfg.tol,
        abs_floor: absolute_floor(beam, pt.theta_q, c)? / norm,
        max_subdivisions: cfg.max_subdivisions,
        initial_panels: 8,
        min_width: 1e-6,
    };
    let est = integrate_adaptive(mapped, 0.0, segments.len() as f64, &breaks, &opts)?;
    Ok(CrossSectionValue {
        value: (norm * est.value).max(0.0),
        error: norm * est.error,
    })
}

/// Values below this are numerically zero: `1e-12` of a rough spectral peak
/// height, Klein-Nishina divided by the width `E_0 / (k w0)`.
pub fn absolute_floor(beam: &BeamParams, theta_q: f64, c: &PhysicalConstants) -> Result<f64> {
    let e0 = compton_line_energy(beam.k, theta_q, c)?;
    let kn = klein_nishina_reference(beam.k, theta_q, c)?;
    Ok(1e-12 * kn * beam.paraxial_parameter(c) / e0)
}

/// Unpolarised Klein-Nishina `dsigma/dOmega` in keV^-2 sr^-1.
pub fn klein_nishina_reference(k: f64, theta_q: f64, c: &PhysicalConstants) -> Result<f64> {
    let e0 = compton_line_energy(k, theta_q, c)?;
    let r = e0 / k;
    let a = c.alpha() / c.m_e();
    Ok(0.5 * a * a * r * r * (r + 1.0 / r - theta_q.sin().powi(2)))
}

/// Outcome of one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Value(CrossSectionValue),
    /// `E_q` outside `(0, k)`; nothing evaluated.
    OutOfRange,
    Failed(Error),
}

impl CellOutcome {
    fn from_result(r: Result<CrossSectionValue>) -> Self {
        match r {
            Ok(v) => Self::Value(v),
            Err(e) => Self::Failed(e),
        }
    }

    pub fn value(&self) -> Option<CrossSectionValue> {
        match self {
            Self::Value(v) => Some(*v),
            _ => None,
        }
    }

    /// Short machine-readable status tag.
    pub fn status(&self) -> &'static str {
        match self {
            Self::Value(_) => "ok",
            Self::OutOfRange => "out_of_range",
            Self::Failed(Error::KinematicallyForbidden { .. }) => "forbidden",
            Self::Failed(Error::QuadratureFailure { .. }) => "quadrature_failure",
            Self::Failed(Error::DegenerateRoot { .. }) => "degenerate_root",
            Self::Failed(_) => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub e_q: f64,
    /// `E_q - E_0`.
    pub delta_e: f64,
    pub outcome: CellOutcome,
}

/// Scattered-photon spectrum at fixed angles.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub beam: BeamParams,
    pub theta_q: f64,
    pub phi_q: f64,
    /// Compton line at `theta_q`.
    pub e0: f64,
    pub rows: Vec<SpectrumRow>,
    pub constants: PhysicalConstants,
    pub quadrature: QuadratureConfig,
    pub version: &'static str,
}

impl SpectrumTable {
    /// Values in grid order, zero for cells without a value.
    pub fn values(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.outcome.value().map_or(0.0, |v| v.value))
            .collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.e_q).collect()
    }

    pub fn all_ok(&self) -> bool {
        self.rows
            .iter()
            .all(|r| matches!(r.outcome, CellOutcome::Value(_)))
    }

    pub fn peak(&self) -> f64 {
        self.values().into_iter().fold(0.0, f64::max)
    }

    /// Trapezoidal integral over `E_q` (keV^-2 sr^-1).
    pub fn integrate(&self) -> f64 {
        let e = self.energies();
        let v = self.values();
        e.windows(2)
            .zip(v.windows(2))
            .map(|(e, v)| 0.5 * (e[1] - e[0]) * (v[0] + v[1]))
            .sum()
    }

    /// Lowest and highest `E_q` whose value reaches `rel * peak`.
    pub fn support(&self, rel: f64) -> Option<(f64, f64)> {
        let floor = rel * self.peak();
        if floor <= 0.0 {
            return None;
        }
        let mut hits = self
            .rows
            .iter()
            .filter(|r| r.outcome.value().is_some_and(|v| v.value >= floor))
            .map(|r| r.e_q);
        let lo = hits.next()?;
        let hi = hits.next_back().unwrap_or(lo);
        Some((lo, hi))
    }

    /// Full width of [`SpectrumTable::support`].
    pub fn support_width(&self, rel: f64) -> Option<f64> {
        self.support(rel).map(|(lo, hi)| hi - lo)
    }
}

/// Energies `E_0 + dE` for `dE` from `lo` to `hi` in steps of `step`, keeping
/// only those inside `(0, k)`.
pub fn energy_grid(e0: f64, k: f64, lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && hi >= lo) {
        return domain(format!("bad energy grid [{lo}, {hi}] step {step}"));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| e0 + lo + i as f64 * step)
        .filter(|&e| e > 0.0 && e < k)
        .collect())
}

/// The default grid, `E_0 +- 5 keV` in 0.02 keV steps.
pub fn default_energy_grid(k: f64, theta_q: f64, c: &PhysicalConstants) -> Result<Vec<f64>> {
    let e0 = compton_line_energy(k, theta_q, c)?;
    energy_grid(e0, k, -5.0, 5.0, 0.02)
}

/// Evaluates the spectrum on `e_grid` (strictly increasing, inside `(0, k)`).
pub fn energy_spectrum(
    beam: &BeamParams,
    theta_q: f64,
    phi_q: f64,
    e_grid: &[f64],
    cfg: &QuadratureConfig,
    c: &PhysicalConstants,
) -> Result<SpectrumTable> {
    cfg.validate()?;
    if e_grid.is_empty() {
        return domain("energy grid is empty");
    }
    if e_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return domain("energy grid must be strictly increasing");
    }
    if e_grid.iter().any(|&e| !(e > 0.0 && e < beam.k)) {
        return domain(format!("energy grid must lie inside (0, {}) keV", beam.k));
    }
    let e0 = compton_line_energy(beam.k, theta_q, c)?;
    // Validates the angles once for the whole grid.
    ScatterPoint::new(theta_q, phi_q, e_grid[0])?;
    let rows = e_grid
        .par_iter()
        .map(|&e_q| {
            let outcome = CellOutcome::from_result(
                ScatterPoint::new(theta_q, phi_q, e_q).and_then(|pt| dcs(beam, &pt, cfg, c)),
            );
            SpectrumRow {
                e_q,
                delta_e: e_q - e0,
                outcome,
            }
        })
        .collect();
    Ok(SpectrumTable {
        beam: *beam,
        theta_q,
        phi_q,
        e0,
        rows,
        constants: *c,
        quadrature: *cfg,
        version: crate::VERSION,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngularCell {
    pub theta_q: f64,
    pub phi_q: f64,
    pub delta_e: f64,
    pub e_q: f64,
    pub outcome: CellOutcome,
}

/// Cross sections over `(theta_q, phi_q)` at fixed energy offsets from the
/// Compton line. Cells are ordered by `(delta_e, theta_q, phi_q)` following
/// the input list orders.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularTable {
    pub beam: BeamParams,
    pub delta_e: Vec<f64>,
    pub cells: Vec<AngularCell>,
    pub constants: PhysicalConstants,
    pub quadrature: QuadratureConfig,
    pub version: &'static str,
}

impl AngularTable {
    pub fn get(&self, delta_e: f64, theta_q: f64, phi_q: f64) -> Option<&AngularCell> {
        self.cells
            .iter()
            .find(|c| c.delta_e == delta_e && c.theta_q == theta_q && c.phi_q == phi_q)
    }
}

/// Evaluates the cross section at `E_q = E_0(theta_q) + dE` for every
/// combination of the three lists.
pub fn angular_scan(
    beam: &BeamParams,
    theta_grid: &[f64],
    phi_list: &[f64],
    delta_e_list: &[f64],
    cfg: &QuadratureConfig,
    c: &PhysicalConstants,
) -> Result<AngularTable> {
    cfg.validate()?;
    if theta_grid.is_empty() || phi_list.is_empty() || delta_e_list.is_empty() {
        return domain("angular scan grids must be non-empty");
    }
    if theta_grid.iter().any(|&t| !(t > 0.0 && t < PI)) {
        return domain("theta grid must lie inside (0, pi)");
    }
    let mut jobs = Vec::with_capacity(theta_grid.len() * phi_list.len() * delta_e_list.len());
    for &de in delta_e_list {
        for &t in theta_grid {
            for &p in phi_list {
                jobs.push((de, t, p));
            }
        }
    }
    let cells = jobs
        .into_par_iter()
        .map(|(de, t, p)| {
            let e_q = compton_line_energy(beam.k, t, c).map_or(f64::NAN, |e0| e0 + de);
            let outcome = if !(e_q > 0.0 && e_q < beam.k) {
                CellOutcome::OutOfRange
            } else {
                CellOutcome::from_result(
                    ScatterPoint::new(t, p, e_q).and_then(|pt| dcs(beam, &pt, cfg, c)),
                )
            };
            AngularCell {
                theta_q: t,
                phi_q: p,
                delta_e: de,
                e_q,
                outcome,
            }
        })
        .collect();
    Ok(AngularTable {
        beam: *beam,
        delta_e: delta_e_list.to_vec(),
        cells,
        constants: *c,
        quadrature: *cfg,
        version: crate::VERSION,
    })
}

/// Counts interior spectral nodes: runs of samples below `rel_floor * peak`
/// that are bounded on both sides by samples above the floor.
pub fn count_nodes(spec: &SpectrumTable, rel_floor: f64) -> Result<usize> {
    if spec.rows.is_empty() {
        return domain("spectrum is empty");
    }
    if !(rel_floor > 0.0 && rel_floor < 0.5) {
        return domain(format!("rel_floor must lie in (0, 0.5), got {rel_floor}"));
    }
    if let Some(r) = spec.rows.iter().find(|r| r.outcome.value().is_none()) {
        return domain(format!("spectrum cell at E_q = {} has no value", r.e_q));
    }
    let e = spec.energies();
    let v = spec.values();
    let floor = rel_floor * spec.peak();
    if floor <= 0.0 {
        return Ok(0);
    }

    let mut minima = Vec::new();
    let mut seen_above = false;
    let mut run: Option<usize> = None; // index of the lowest sample in the current run
    for i in 0..v.len() {
        if v[i] < floor {
            if seen_above {
                run = Some(match run {
                    Some(j) if v[j] <= v[i] => j,
                    _ => i,
                });
            }
        } else {
            if let Some(j) = run.take() {
                minima.push(e[j]);
            }
            seen_above = true;
        }
    }

    if minima.len() >= 2 {
        let step = e.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let spacing = minima
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        if step > 0.1 * spacing {
            return Err(Error::InsufficientResolution { step, spacing });
        }
    }
    Ok(minima.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    fn synthetic(values: &[f64]) -> SpectrumTable {
        let beam = BeamParams::new(500.0, 75.0, 0, 0).unwrap();
        SpectrumTable {
            beam,
            theta_q: 0.1 * PI,
            phi_q: 0.0,
            e0: 0.0,
            rows: values
                .iter()
                .enumerate()
                .map(|(i, &v)| SpectrumRow {
                    e_q: 400.0 + 0.01 * i as f64,
                    delta_e: 0.0,
                    outcome: CellOutcome::Value(CrossSectionValue {
                        value: v,
                        error: 0.0,
                    }),
                })
                .collect(),
            constants: consts(),
            quadrature: QuadratureConfig::default(),
            version: crate::VERSION,
        }
    }

    #[test]
    fn klein_nishina_forward_limit() {
        let c = consts();
        let v = klein_nishina_reference(500.0, 0.0, &c).unwrap();
        let a = c.alpha() / c.m_e();
        assert!((v - a * a).abs() < 1e-15 * v);
    }

    #[test]
    fn klein_nishina_right_angle_pin() {
        let c = consts();
        let v = klein_nishina_reference(500.0, 0.5 * PI, &c).unwrap();
        let e0 = 500.0 / (1.0 + 500.0 / 510.998_95);
        let r = e0 / 500.0;
        let a = (1.0 / 137.035_999) / 510.998_95;
        let by_hand = 0.5 * a * a * r * r * (r + 1.0 / r - 1.0);
        assert!((v - by_hand).abs() < 1e-14 * v);
    }

    #[test]
    fn thomson_limit_total() {
        // Integrate over the sphere at k = 0.1 keV with Gauss-Legendre in cos(theta).
        let c = consts();
        let (x, w) = crate::quadrature::gauss_legendre(64);
        let total: f64 = x
            .iter()
            .zip(&w)
            .map(|(&ct, &wt)| 2.0 * PI * wt * klein_nishina_reference(0.1, ct.acos(), &c).unwrap())
            .sum();
        let a = c.alpha() / c.m_e();
        let thomson = 8.0 * PI / 3.0 * a * a;
        // Leading correction is -2k/m.
        assert!(
            (total / thomson - 1.0).abs() < 2.5 * 0.1 / c.m_e(),
            "{}",
            total / thomson
        );
    }

    #[test]
    fn nodes_in_synthetic_spectra() {
        assert_eq!(count_nodes(&synthetic(&[1.0; 50]), 0.02).unwrap(), 0);
        // sin^2 with two interior zeros over 3 half-periods.
        let v: Vec<f64> = (0..300)
            .map(|i| (3.0 * PI * (i as f64 + 0.5) / 300.0).sin().powi(2))
            .collect();
        assert_eq!(count_nodes(&synthetic(&v), 0.02).unwrap(), 2);
        // Tails below the floor at the grid ends are not nodes.
        let v: Vec<f64> = (0..300)
            .map(|i| (-(i as f64 - 150.0).powi(2) / 400.0).exp())
            .collect();
        assert_eq!(count_nodes(&synthetic(&v), 0.02).unwrap(), 0);
    }

    #[test]
    fn coarse_grids_are_rejected() {
        let v = [1.0, 0.0, 1.0, 0.0, 1.0];
        assert!(matches!(
            count_nodes(&synthetic(&v), 0.02),
            Err(Error::InsufficientResolution { .. })
        ));
        assert!(count_nodes(&synthetic(&[1.0]), 0.7).is_err());
    }

    #[test]
    fn empty_root_set_gives_zero() {
        let c = consts();
        let beam = BeamParams::new(500.0, 25.0, 1, 0).unwrap();
        // 150 keV below the line: no azimuth reaches |Q| = k near the axis
        // with Q_z > 0 and non-negligible profile.
        let e0 = compton_line_energy(500.0, 0.1 * PI, &c).unwrap();
        let pt = ScatterPoint::new(0.1 * PI, 0.3, e0 - 150.0).unwrap();
        let v = dcs(&beam, &pt, &QuadratureConfig::default(), &c).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn forbidden_energies() {
        let c = consts();
        let beam = BeamParams::new(500.0, 25.0, 1, 0).unwrap();
        let cfg = QuadratureConfig::default();
        let pt = ScatterPoint::new(0.3, 0.0, 501.0).unwrap();
        assert!(matches!(
            dcs(&beam, &pt, &cfg, &c),
            Err(Error::KinematicallyForbidden { .. })
        ));
        let pt = ScatterPoint::new(0.3, 0.0, 500.0).unwrap();
        assert!(dcs(&beam, &pt, &cfg, &c).is_err());
    }

    #[test]
    fn scans_record_out_of_range_cells() {
        let c = consts();
        let beam = BeamParams::new(500.0, 25.0, 1, 0).unwrap();
        let t = angular_scan(
            &beam,
            &[0.1 * PI],
            &[0.0],
            &[0.0, 40.0],
            &QuadratureConfig::default(),
            &c,
        )
        .unwrap();
        assert!(matches!(t.cells[0].outcome, CellOutcome::Value(_)));
        assert_eq!(t.cells[1].outcome, CellOutcome::OutOfRange);
    }

    #[test]
    fn energy_grid_rejects_bad_input() {
        let c = consts();
        let beam = BeamParams::new(500.0, 25.0, 1, 0).unwrap();
        let cfg = QuadratureConfig::default();
        assert!(energy_spectrum(&beam, 0.3, 0.0, &[], &cfg, &c).is_err());
        assert!(energy_spectrum(&beam, 0.3, 0.0, &[480.0, 470.0], &cfg, &c).is_err());
        assert!(energy_spectrum(&beam, 0.3, 0.0, &[480.0, 500.0], &cfg, &c).is_err());
        let g = default_energy_grid(500.0, 0.1 * PI, &c).unwrap();
        assert_eq!(g.len(), 501);
        let e0 = compton_line_energy(500.0, 0.1 * PI, &c).unwrap();
        assert!((g[250] - e0).abs() < 1e-12);
    }
}
