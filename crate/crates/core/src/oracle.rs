//! Brute-force evaluation of the cross section with both delta functions
//! replaced by narrow unit-area Gaussians.
//!
//! This path shares nothing with the analytic reduction in
//! [`crate::cross_section`] beyond the closed-form amplitude and the Hermite
//! functions: it integrates over the full three-dimensional electron momentum
//! (written as the momentum transfer `Q = p_f + q`, unit Jacobian) with its own
//! Gauss-Kronrod cubature, and removes the `O(eta^2)` smoothing bias by
//! Richardson extrapolation over `eta -> eta/2`.
//!
//! The transverse plane is rotated so the outer variable runs along the
//! constraint ridge and the middle variable crosses it. Everything further than
//! eight widths from either constraint is dropped. `|p_f| <= |Q| + |q| <= 2k`
//! holds automatically, so the momentum box never clips the support.

use serde::{Deserialize, Serialize};

use crate::amplitude::{profile_scaled, w_if_unchecked};
use crate::constants::PhysicalConstants;
use crate::cross_section::{prefactor, CrossSectionValue};
use crate::error::{domain, Error, Result};
use crate::kinematics::{compton_line_energy, BeamParams, ScatterPoint};
use crate::vector::Vec3;

/// Gaussian widths standing in for the two delta functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationParams {
    /// Width of the energy-conservation Gaussian (keV).
    pub eta_e: f64,
    /// Width of the on-shell Gaussian (keV).
    pub eta_q: f64,
    /// Relative tolerance of the outermost cubature layer.
    pub rel_tol: f64,
}

impl Default for RegularizationParams {
    fn default() -> Self {
        Self {
            eta_e: 0.05,
            eta_q: 0.05,
            rel_tol: 1e-6,
        }
    }
}

/// Maximum relative gap between the `eta/2` result and the extrapolation.
pub const CONVERGENCE_LIMIT: f64 = 5e-3;

/// Window half-width in units of the Gaussian width.
const WINDOW: f64 = 8.0;

impl RegularizationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_e > 0.0 && self.eta_q > 0.0) {
            return domain("regularisation widths must be positive");
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1e-2) {
            return domain(format!(
                "oracle tolerance must lie in (0, 1e-2), got {}",
                self.rel_tol
            ));
        }
        Ok(())
    }

    /// Widths scaled to the finest spectral structure expected for `beam` at
    /// `theta_q`, capped at the 0.05 keV default.
    ///
    /// The structure scale is the Hermite zero spacing in momentum,
    /// `sqrt(2) / (w0 sqrt(2 n + 1))`, carried into energy by
    /// `dE/dangle = E_0^2 sin(theta) / m`.
    pub fn for_point(beam: &BeamParams, theta_q: f64, c: &PhysicalConstants) -> Result<Self> {
        let e0 = compton_line_energy(beam.k, theta_q, c)?;
        let n = beam.n_x.get().max(beam.n_y.get()) as f64;
        let s_q = std::f64::consts::SQRT_2 / (beam.w0_natural(c) * (2.0 * n + 1.0).sqrt());
        let s_e = s_q * e0 * e0 * theta_q.sin() / (c.m_e() * beam.k);
        let eta = (s_q.min(s_e) / 40.0).min(0.05);
        Ok(Self {
            eta_e: eta,
            eta_q: eta,
            ..Self::default()
        })
    }

    pub fn halved(&self) -> Self {
        Self {
            eta_e: 0.5 * self.eta_e,
            eta_q: 0.5 * self.eta_q,
            ..*self
        }
    }
}

/// Result of one regularised evaluation, before extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularizedValue {
    pub value: f64,
    /// Cubature error estimate.
    pub error: f64,
    /// False if some cubature layer ran out of subdivisions.
    pub converged: bool,
}

/// Richardson-extrapolated cross section; the error estimate is
/// `|I(eta/2) - I(eta)| / 3` plus the cubature errors.
pub fn dcs_regularized(
    beam: &BeamParams,
    pt: &ScatterPoint,
    reg: &RegularizationParams,
    c: &PhysicalConstants,
) -> Result<CrossSectionValue> {
    reg.validate()?;
    if pt.e_q >= beam.k {
        return Err(Error::KinematicallyForbidden {
            e_q: pt.e_q,
            k: beam.k,
        });
    }
    let coarse = regularized_integral(beam, pt, reg, c);
    let fine = regularized_integral(beam, pt, &reg.halved(), c);
    let value = (4.0 * fine.value - coarse.value) / 3.0;
    let error = (fine.value - coarse.value).abs() / 3.0 + fine.error + coarse.error;
    if value != 0.0 {
        let relative_change = (value - fine.value).abs() / value.abs();
        if relative_change > CONVERGENCE_LIMIT || !(coarse.converged && fine.converged) {
            return Err(Error::OracleUnconverged { relative_change });
        }
    }
    Ok(CrossSectionValue {
        value: value.max(0.0),
        error,
    })
}

fn gauss(x: f64, eta: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    let t = x / eta;
    INV_SQRT_2PI / eta * (-0.5 * t * t).exp()
}

/// The regularised integral at fixed widths, prefactor included.
pub fn regularized_integral(
    beam: &BeamParams,
    pt: &ScatterPoint,
    reg: &RegularizationParams,
    c: &PhysicalConstants,
) -> RegularizedValue {
    let k = beam.k;
    let m = c.m_e();
    let q = pt.momentum();
    let (sin_phi, cos_phi) = pt.phi_q.sin_cos();
    // Rotated transverse frame: `par` along q's transverse direction.
    let q_par = q.x * cos_phi + q.y * sin_phi;
    let to_cartesian = |par: f64, perp: f64| {
        (
            par * cos_phi - perp * sin_phi,
            par * sin_phi + perp * cos_phi,
        )
    };
    let scale = beam.w0_natural(c) * std::f64::consts::FRAC_1_SQRT_2;
    let n_max = beam.n_x.get().max(beam.n_y.get()) as f64;
    let half_box = (((2.0 * n_max + 1.0).sqrt() + 7.0) / scale).min(0.7 * k);
    let target = m + k - pt.e_q;
    let (eta_e, eta_q) = (reg.eta_e, reg.eta_q);
    let window = WINDOW * (eta_e + eta_q);

    let mut converged = true;
    let mut flag = |ok: bool| converged &= ok;

    // On-shell height of Q_z for a transverse point.
    let shell = |par: f64, perp: f64| (k * k - par * par - perp * perp).max(0.0).sqrt();
    // Energy mismatch on the shell, monotone in Q.q.
    let mismatch = |par: f64, perp: f64| {
        let qz = shell(par, perp);
        let p2 = (par - q_par).powi(2) + perp * perp + (qz - q.z).powi(2);
        (p2 + m * m).sqrt() - target
    };

    let inner = |x: f64, y: f64, par: f64, perp: f64| -> (f64, bool) {
        let s = shell(par, perp);
        let f = |qz: f64| {
            let big_q = Vec3::new(x, y, qz);
            let p_f = big_q - q;
            let e_f = (p_f.norm_sqr() + m * m).sqrt();
            let ge = gauss(e_f - target, eta_e);
            let gq = gauss(qz - s, eta_q);
            if ge == 0.0 || gq == 0.0 {
                return 0.0;
            }
            ge * gq * w_if_unchecked(p_f, q, k) / e_f
        };
        let r = gauss_kronrod(
            &f,
            s - WINDOW * eta_q,
            s + WINDOW * eta_q,
            9,
            1e-9,
            0.0,
            200,
        );
        (r.value, r.converged)
    };

    let outer_value = {
        let middle = |perp: f64| -> (f64, bool) {
            let limit2 = k * k * (1.0 - 1e-9) - perp * perp;
            if limit2 <= 0.0 {
                return (0.0, true);
            }
            let lim = half_box.min(limit2.sqrt());
            let e = |par: f64| mismatch(par, perp);
            let mut total = 0.0;
            let mut ok = true;
            for (a, b) in windows(&e, -lim, lim, window) {
                let g = |par: f64| {
                    let (x, y) = to_cartesian(par, perp);
                    let f = profile_scaled(beam, scale, x, y);
                    let f2 = f * f;
                    if f2 == 0.0 {
                        return 0.0;
                    }
                    let (v, inner_ok) = inner(x, y, par, perp);
                    if !inner_ok {
                        // Reported through the middle layer's own flag below.
                        return f64::NAN;
                    }
                    f2 * v
                };
                let r = gauss_kronrod(&g, a, b, 9, 1e-8, 0.0, 500);
                if r.value.is_nan() {
                    ok = false;
                    continue;
                }
                total += r.value;
                ok &= r.converged;
            }
            (total, ok)
        };
        let mut ok = true;
        let f = |perp: f64| {
            let (v, o) = middle(perp);
            if o {
                v
            } else {
                f64::NAN
            }
        };
        let r = gauss_kronrod(&f, -half_box, half_box, 16, reg.rel_tol, 0.0, 2000);
        if r.value.is_nan() {
            ok = false;
        }
        flag(ok && r.converged);
        r
    };

    let pref = prefactor(beam, pt.e_q, c);
    RegularizedValue {
        value: pref * outer_value.value,
        error: pref * outer_value.error,
        converged,
    }
}

/// Sub-intervals of `[lo, hi]` where `|e| <= w`, for a unimodal `e`.
fn windows<F: Fn(f64) -> f64>(e: &F, lo: f64, hi: f64, w: f64) -> Vec<(f64, f64)> {
    // Golden-section search for the extremum of e; try both senses and keep
    // the one that lands inside the interval.
    let ext = {
        let find = |sign: f64| golden(|x| sign * e(x), lo, hi);
        let a = find(1.0);
        let b = find(-1.0);
        let interior = |x: f64| x > lo + 1e-12 * (hi - lo) && x < hi - 1e-12 * (hi - lo);
        if interior(a) {
            a
        } else {
            b
        }
    };
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in [(lo, ext), (ext, hi)] {
        if b <= a {
            continue;
        }
        let (ea, eb) = (e(a), e(b));
        let (emin, emax) = (ea.min(eb), ea.max(eb));
        if emax < -w || emin > w {
            continue;
        }
        // Monotone branch: locate the end points of |e| <= w.
        let cross = |level: f64| -> f64 {
            let (mut x0, mut x1) = (a, b);
            let s0 = (e(x0) - level).signum();
            for _ in 0..200 {
                let mid = 0.5 * (x0 + x1);
                if (e(mid) - level).signum() == s0 {
                    x0 = mid;
                } else {
                    x1 = mid;
                }
                if x1 - x0 <= 1e-15 * (x0.abs() + x1.abs()) {
                    break;
                }
            }
            0.5 * (x0 + x1)
        };
        let p = if emin < -w {
            cross(-w)
        } else if ea < eb {
            a
        } else {
            b
        };
        let r = if emax > w {
            cross(w)
        } else if ea > eb {
            a
        } else {
            b
        };
        let (s, t) = if p < r { (p, r) } else { (r, p) };
        out.push((s, t));
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in out {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    merged
}

fn golden<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    // Minimises f.
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-13 * (a.abs() + b.abs() + 1.0) {
            break;
        }
    }
    0.5 * (a + b)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
/// 7-point Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One G7-K15 pair on `[a, b]`: Kronrod value and `|K - G|`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct GkResult {
    value: f64,
    error: f64,
    converged: bool,
}

/// Globally adaptive Gauss-Kronrod over `[a, b]` starting from `panels`
/// equal pieces.
fn gauss_kronrod<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    panels: usize,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> GkResult {
    if !(b > a) {
        return GkResult {
            value: 0.0,
            error: 0.0,
            converged: true,
        };
    }
    let h = (b - a) / panels as f64;
    let mut list: Vec<(f64, f64, f64, f64)> = (0..panels)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == panels { b } else { lo + h };
            let (v, e) = gk15(f, lo, hi);
            (lo, hi, v, e)
        })
        .collect();
    loop {
        let value: f64 = list.iter().map(|p| p.2).sum();
        let error: f64 = list.iter().map(|p| p.3).sum();
        if value.is_nan() {
            return GkResult {
                value,
                error,
                converged: false,
            };
        }
        if error <= (rel_tol * value.abs()).max(abs_tol) {
            return GkResult {
                value,
                error,
                converged: true,
            };
        }
        if list.len() >= max_intervals {
            return GkResult {
                value,
                error,
                converged: false,
            };
        }
        let (idx, _) = list
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = list.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        list.push((lo, mid, v1, e1));
        list.push((mid, hi, v2, e2));
    }
}
