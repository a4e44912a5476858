//! Randomised comparison of the reduced cross section against the
//! regularised brute-force oracle.

use std::f64::consts::PI;

use hg_compton_core::{
    compton_line_energy, dcs, dcs_regularized, energy_grid, energy_spectrum, BeamParams,
    CrossSectionValue, PhysicalConstants, QuadratureConfig, RegularizationParams, ScatterPoint,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Points are only drawn where the spectrum is at least this fraction of its
/// peak; relative deviations are meaningless next to a node.
pub const MIN_RELATIVE_HEIGHT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationCase {
    pub beam: BeamParams,
    pub theta_q: f64,
    pub phi_q: f64,
    pub e_q: f64,
    pub delta_e: f64,
}

#[derive(Debug, Clone)]
pub struct ValidationOutcome {
    pub case: ValidationCase,
    pub reduced: hg_compton_core::Result<CrossSectionValue>,
    pub oracle: hg_compton_core::Result<CrossSectionValue>,
}

impl ValidationOutcome {
    /// `|oracle - reduced| / |reduced|`, if both evaluations succeeded.
    pub fn deviation(&self) -> Option<f64> {
        match (&self.reduced, &self.oracle) {
            (Ok(r), Ok(o)) if r.value != 0.0 => Some((o.value - r.value).abs() / r.value.abs()),
            (Ok(r), Ok(o)) if r.value == o.value => Some(0.0),
            _ => None,
        }
    }

    pub fn status(&self) -> &'static str {
        match (&self.reduced, &self.oracle) {
            (Err(_), _) => "reduced_failed",
            (_, Err(_)) => "oracle_failed",
            _ => "ok",
        }
    }
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, v: &[T]) -> T {
    v[rng.gen_range(0..v.len())]
}

/// Draws `n` points deterministically from `seed`. Each point picks a beam and
/// polar angle from the lists, a uniform azimuth, and an energy inside the
/// part of the spectrum above [`MIN_RELATIVE_HEIGHT`] of its peak.
pub fn sample_cases(
    beams: &[BeamParams],
    thetas: &[f64],
    n: usize,
    seed: u64,
    cfg: &QuadratureConfig,
    c: &PhysicalConstants,
) -> hg_compton_core::Result<Vec<ValidationCase>> {
    if beams.is_empty() || thetas.is_empty() {
        return Err(hg_compton_core::Error::Domain(
            "validation needs at least one beam and angle".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > 50 * n + 50 {
            return Err(hg_compton_core::Error::Domain(
                "could not find enough sample points away from nodes".into(),
            ));
        }
        let beam = pick(&mut rng, beams);
        let theta_q = pick(&mut rng, thetas);
        let phi_q = rng.gen_range(0.0..2.0 * PI);
        let e0 = compton_line_energy(beam.k, theta_q, c)?;
        // Coarse survey, then a finer one over the 1% support.
        let coarse = energy_spectrum(
            &beam,
            theta_q,
            phi_q,
            &energy_grid(e0, beam.k, -40.0, 40.0, 0.5)?,
            cfg,
            c,
        )?;
        let Some((lo, hi)) = coarse.support(0.01) else {
            continue;
        };
        let (lo, hi) = (lo - 0.5, hi + 0.5);
        let fine_grid = energy_grid(0.0, beam.k, lo, hi, (hi - lo) / 160.0)?;
        let fine = energy_spectrum(&beam, theta_q, phi_q, &fine_grid, cfg, c)?;
        let peak = fine.peak();
        if !(peak > 0.0) {
            continue;
        }
        for _ in 0..20 {
            let e_q = rng.gen_range(lo..hi);
            if !(e_q > 0.0 && e_q < beam.k) {
                continue;
            }
            let pt = ScatterPoint::new(theta_q, phi_q, e_q)?;
            let v = match dcs(&beam, &pt, cfg, c) {
                Ok(v) => v.value,
                Err(_) => continue,
            };
            if v >= MIN_RELATIVE_HEIGHT * peak {
                out.push(ValidationCase {
                    beam,
                    theta_q,
                    phi_q,
                    e_q,
                    delta_e: e_q - e0,
                });
                break;
            }
        }
    }
    Ok(out)
}

/// Evaluates both paths at every case, in parallel; `reg` fixes the oracle
/// widths, otherwise they are chosen per point.
pub fn run_cases(
    cases: &[ValidationCase],
    reg: Option<RegularizationParams>,
    rel_tol: f64,
    cfg: &QuadratureConfig,
    c: &PhysicalConstants,
) -> Vec<ValidationOutcome> {
    cases
        .par_iter()
        .map(|case| {
            let pt = ScatterPoint::new(case.theta_q, case.phi_q, case.e_q);
            let reduced = pt.clone().and_then(|pt| dcs(&case.beam, &pt, cfg, c));
            let oracle = pt.and_then(|pt| {
                let reg = match reg {
                    Some(r) => r,
                    None => RegularizationParams::for_point(&case.beam, case.theta_q, c)?,
                };
                dcs_regularized(&case.beam, &pt, &RegularizationParams { rel_tol, ..reg }, c)
            });
            ValidationOutcome {
                case: *case,
                reduced,
                oracle,
            }
        })
        .collect()
}
