//! Mode solver for a dielectric microcavity built from crossed anisotropic
//! layers: two perpendicular stacks of low-index vertical slabs confine the
//! field in `x` and `y`, a periodic stack of horizontal slabs with one defect
//! layer confines it in `z`.  In the thin-layer limit the geometry reduces to
//! three effective susceptibilities (χ for the vertical layers, ξ for the
//! horizontal lattice, α for the central layer), a closed dispersion relation
//! for the resonance wave vectors, and closed forms for linewidths, emission
//! spectra, β factors and threshold gain.
//!
//! Everything internal is expressed in units of the lattice period `a`:
//! wave vectors are exported as `k·a`, rates as ratios to the background
//! emission rate.
//!
//! Module map:
//! * [`model`] — cavity geometry/material types, effective susceptibilities,
//!   feasibility checks.
//! * [`config`] — plain-text `key=value` run configuration.
//! * [`dispersion`] — thin-layer wave-vector relations, dispersion residual,
//!   perturbative seeds, quasi-momentum, band-gap membership.
//! * [`rootfind`] — bisection, complex Newton (with deflation) and homotopy
//!   continuation in the loss parameters.
//! * [`modes`] — mode profiles, full vector field, central intensity,
//!   finite-size leakage, and the solve driver producing [`modes::ModeSolution`].
//! * [`emission`] — background rate, linewidths, Lorentzian spectra, β factor
//!   and threshold gain.
//! * [`finitewidth`] — independent finite-width oracle: square-well bound
//!   states in `x`/`y` and transfer matrices / defect modes for the `z`
//!   lattice.

pub mod config;
pub mod csvfmt;
pub mod dispersion;
pub mod emission;
pub mod finitewidth;
pub mod model;
pub mod modes;
pub mod rootfind;

pub use num_complex::Complex64;

pub use config::RunConfig;
pub use model::{CavitySpec, EffectiveParams};
pub use modes::ModeSolution;
