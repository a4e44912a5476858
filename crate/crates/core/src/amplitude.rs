//! Spin- and polarisation-summed squared amplitude and the transverse
//! momentum profile of the Hermite-Gaussian photon.

use crate::constants::PhysicalConstants;
use crate::error::{domain, Result};
use crate::hermite;
use crate::kinematics::BeamParams;
use crate::vector::Vec3;

/// Momentum transfer `Q = p_f + q` and its transverse magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumTransfer {
    pub q: Vec3,
    pub q_t: f64,
}

impl MomentumTransfer {
    pub fn new(q: Vec3) -> Self {
        Self {
            q,
            q_t: q.transverse_sqr().sqrt(),
        }
    }
}

/// `W_if = 4|q|/k + 4k/|q| - (4/k^2) [|p_f|^2 - (p_f . q)^2 / |q|^2]`.
pub fn w_if(p_f: Vec3, q: Vec3, k: f64) -> Result<f64> {
    let q2 = q.norm_sqr();
    if !(q2 > 0.0) {
        return domain("scattered photon momentum must be non-zero");
    }
    if !(k > 0.0) {
        return domain(format!("beam energy must be positive, got {k}"));
    }
    Ok(w_if_unchecked(p_f, q, k))
}

#[inline]
pub(crate) fn w_if_unchecked(p_f: Vec3, q: Vec3, k: f64) -> f64 {
    let q2 = q.norm_sqr();
    let qn = q2.sqrt();
    // |p_f|^2 - (p_f.q)^2/|q|^2 = |p_f x q|^2 / |q|^2, which cannot go negative.
    let perp = p_f.cross(q).norm_sqr() / q2;
    4.0 * qn / k + 4.0 * k / qn - 4.0 * perp / (k * k)
}

/// Bare product `f_nx(w0 Q_x / sqrt 2) f_ny(w0 Q_y / sqrt 2)`, with `w0` in
/// natural units. Normalisation prefactors live in the cross section.
pub fn transverse_profile(beam: &BeamParams, q_x: f64, q_y: f64, c: &PhysicalConstants) -> f64 {
    let s = beam.w0_natural(c) * std::f64::consts::FRAC_1_SQRT_2;
    profile_scaled(beam, s, q_x, q_y)
}

/// As [`transverse_profile`] with the argument scale `w0/sqrt 2` precomputed.
#[inline]
pub(crate) fn profile_scaled(beam: &BeamParams, scale: f64, q_x: f64, q_y: f64) -> f64 {
    hermite::eval(beam.n_x.get(), scale * q_x) * hermite::eval(beam.n_y.get(), scale * q_y)
}
