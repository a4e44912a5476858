//! Compton scattering of Hermite-Gaussian gamma-ray photons on electrons at
//! rest: the triple-differential cross section, angular and spectral scans,
//! and an independent brute-force evaluator used to check it.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amplitude;
pub mod constants;
pub mod cross_section;
pub mod error;
pub mod hermite;
pub mod kinematics;
pub mod oracle;
pub mod quadrature;
pub mod vector;

pub use amplitude::{transverse_profile, w_if, MomentumTransfer};
pub use constants::{length_to_inverse_energy, natural_area_to_barn, PhysicalConstants};
pub use cross_section::{
    angular_scan, count_nodes, dcs, default_energy_grid, energy_grid, energy_spectrum,
    klein_nishina_reference, AngularCell, AngularTable, CellOutcome, CrossSectionValue,
    QuadratureConfig, SpectrumRow, SpectrumTable,
};
pub use error::{Error, Result};
pub use hermite::{hermite_function, HermiteOrder};
pub use kinematics::{
    compton_line_energy, delta_roots, electron_momentum, BeamParams, ElectronState, KinematicRoot,
    ScatterPoint,
};
pub use oracle::{dcs_regularized, RegularizationParams};
pub use vector::Vec3;

/// Library version, echoed into every output table.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
