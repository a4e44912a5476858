//! Root finding against a brute-force sign-change scan in `u = cos(theta_p)`.

use std::f64::consts::PI;

use hg_compton_core::{
    compton_line_energy, delta_roots, electron_momentum, Error, PhysicalConstants, ScatterPoint,
    Vec3,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const K: f64 = 500.0;
// Bisection refines each bracket, so the step only limits pair resolution.
const STEPS: usize = 50_000;

fn scan(p: f64, q: Vec3, phi_p: f64) -> Vec<f64> {
    let h = |u: f64| {
        let s = (1.0 - u * u).max(0.0).sqrt();
        (Vec3::from_polar(p, u, s, phi_p) + q).norm() - K
    };
    let mut out = Vec::new();
    let (mut u0, mut h0) = (-1.0, h(-1.0));
    for i in 1..=STEPS {
        let u1 = -1.0 + 2.0 * i as f64 / STEPS as f64;
        let h1 = h(u1);
        if h0 == 0.0 || h0.signum() != h1.signum() {
            let (mut lo, mut hi) = (u0, u1);
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                if h(m).signum() == h(lo).signum() {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            let u = 0.5 * (lo + hi);
            let s = (1.0 - u * u).sqrt();
            if (Vec3::from_polar(p, u, s, phi_p) + q).z > 0.0 {
                out.push(u);
            }
        }
        u0 = u1;
        h0 = h1;
    }
    out
}

#[test]
fn root_counts_match_dense_scan_on_ten_thousand_instances() {
    let c = PhysicalConstants::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let instances: Vec<(f64, f64, f64, f64)> = (0..10_000)
        .map(|_| {
            (
                rng.gen_range(0.02..0.98) * PI,
                rng.gen_range(0.0..2.0 * PI),
                rng.gen_range(-PI..PI),
                rng.gen_range(-20.0..20.0),
            )
        })
        .collect();
    let mismatches: Vec<String> = instances
        .par_iter()
        .filter_map(|&(theta, phi, delta, de)| {
            let e_q = compton_line_energy(K, theta, &c).unwrap() + de;
            let es = electron_momentum(K, e_q, &c).ok()?;
            let pt = ScatterPoint::new(theta, phi, e_q).unwrap();
            let roots = match delta_roots(&es, &pt, phi + delta, K) {
                Ok(r) => r,
                Err(Error::DegenerateRoot { .. }) => return None,
                Err(e) => return Some(format!("{theta} {phi} {delta} {de}: {e}")),
            };
            // A near-tangent pair may fall between two scan nodes.
            if roots.len() == 2 && (roots[0].u - roots[1].u).abs() < 1e-4 {
                return None;
            }
            let found = scan(es.p, pt.momentum(), phi + delta);
            let agree = roots.len() == found.len()
                && roots
                    .iter()
                    .all(|r| found.iter().any(|u| (u - r.u).abs() < 1e-6));
            (!agree).then(|| {
                format!(
                    "{theta} {phi} {delta} {de}: {:?} vs {found:?}",
                    roots.as_slice()
                )
            })
        })
        .collect();
    assert!(
        mismatches.is_empty(),
        "{} mismatches, first: {}",
        mismatches.len(),
        mismatches[0]
    );
}
