//! Benchmark fixtures shared by the criterion targets.

use hg_compton_core::{compton_line_energy, BeamParams, PhysicalConstants, ScatterPoint};

/// A representative point near the Compton line for a first-order mode.
pub fn fixture(w0_pm: f64, theta_pi: f64) -> (BeamParams, ScatterPoint) {
    let c = PhysicalConstants::default();
    let beam = BeamParams::new(500.0, w0_pm, 1, 0).expect("valid beam");
    let theta = theta_pi * std::f64::consts::PI;
    let e0 = compton_line_energy(beam.k, theta, &c).expect("valid angle");
    let pt = ScatterPoint::new(theta, 0.3, e0 + 0.5).expect("valid point");
    (beam, pt)
}
