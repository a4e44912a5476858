//! Reflection and exchange symmetries of the reduced cross section.

use std::f64::consts::PI;

use hg_compton_core::cross_section::absolute_floor;
use hg_compton_core::{
    compton_line_energy, dcs, energy_grid, energy_spectrum, BeamParams, PhysicalConstants,
    QuadratureConfig, ScatterPoint,
};

fn at(beam: &BeamParams, theta: f64, phi: f64, de: f64) -> f64 {
    let c = PhysicalConstants::default();
    let e0 = compton_line_energy(beam.k, theta, &c).unwrap();
    let pt = ScatterPoint::new(theta, phi, e0 + de).unwrap();
    dcs(beam, &pt, &QuadratureConfig::default(), &c)
        .unwrap()
        .value
}

fn asym(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[test]
fn mirrors_in_azimuth() {
    let c = PhysicalConstants::default();
    for (w0, nx, ny) in [(25.0, 1, 0), (75.0, 2, 1), (250.0, 3, 3)] {
        let beam = BeamParams::new(500.0, w0, nx, ny).unwrap();
        for theta in [0.15 * PI, 0.55 * PI, 0.85 * PI] {
            let floor = absolute_floor(&beam, theta, &c).unwrap();
            for de in [0.0, 0.7] {
                for phi in [0.2, 1.1, 2.5] {
                    let v = at(&beam, theta, phi, de);
                    assert!(v >= 0.0);
                    let minus = at(&beam, theta, -phi, de);
                    let supp = at(&beam, theta, PI - phi, de);
                    assert!(
                        asym(v, minus, floor) < 1e-5,
                        "{w0} {theta} {phi}: {v} vs {minus}"
                    );
                    assert!(
                        asym(v, supp, floor) < 1e-5,
                        "{w0} {theta} {phi}: {v} vs {supp}"
                    );
                }
            }
        }
    }
}

#[test]
fn exchanging_orders_rotates_by_a_quarter_turn() {
    let c = PhysicalConstants::default();
    let beam = BeamParams::new(500.0, 75.0, 2, 1).unwrap();
    let swapped = beam.swapped();
    assert_eq!((swapped.n_x.get(), swapped.n_y.get()), (1, 2));
    for theta in [0.1 * PI, 0.6 * PI] {
        let floor = absolute_floor(&beam, theta, &c).unwrap();
        for phi in [0.0, 0.3, 1.0, 2.2, 4.0] {
            for de in [-0.5, 0.0, 1.0] {
                let a = at(&beam, theta, phi, de);
                let b = at(&swapped, theta, 0.5 * PI - phi, de);
                assert!(asym(a, b, floor) < 1e-5, "{theta} {phi} {de}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn first_order_mode_has_period_pi_with_minima_on_the_x_axis() {
    let beam = BeamParams::new(500.0, 25.0, 1, 0).unwrap();
    let theta = 0.1 * PI;
    let phis: Vec<f64> = (0..16).map(|j| j as f64 * PI / 8.0).collect();
    let v: Vec<f64> = phis.iter().map(|&p| at(&beam, theta, p, 0.0)).collect();
    let max = v.iter().cloned().fold(0.0, f64::max);
    for j in 0..8 {
        assert!((v[j] - v[j + 8]).abs() <= 1e-5 * max, "period at {j}");
    }
    let min_j = (0..16).min_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    assert!(min_j == 0 || min_j == 8, "minimum at index {min_j}");
    let max_j = (0..16).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    assert!(max_j == 4 || max_j == 12, "maximum at index {max_j}");
    assert!(v[0] < 0.5 * max);
}

#[test]
fn wide_gaussian_backscatter_recovers_klein_nishina() {
    let c = PhysicalConstants::default();
    let beam = BeamParams::new(500.0, 250.0, 0, 0).unwrap();
    let theta = 0.9 * PI;
    let e0 = compton_line_energy(beam.k, theta, &c).unwrap();
    let grid = energy_grid(e0, beam.k, -2.0, 2.0, 0.01).unwrap();
    let spec = energy_spectrum(&beam, theta, 0.4, &grid, &QuadratureConfig::default(), &c).unwrap();
    let kn = hg_compton_core::klein_nishina_reference(beam.k, theta, &c).unwrap();
    let ratio = spec.integrate() / kn;
    assert!((ratio - 1.0).abs() < 0.02, "{ratio}");
}
