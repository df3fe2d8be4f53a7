//! Domain types and the mapping from geometry/materials to the effective
//! thin-layer susceptibilities.
//!
//! The cavity is described by the period `a`, the horizontal-layer width `b`,
//! the vertical-layer width `d` and three dielectric constants: `eps1` for the
//! isotropic background (real), `eps2` for the layers and `eps3` for the
//! central layer (both possibly complex).  The thin-layer model only ever sees
//! the combinations
//!
//! ```text
//! chi   = (eps2 - eps1) d / eps1      (vertical layers)
//! xi    = (eps2 - eps1) b / eps1      (horizontal lattice)
//! alpha = (eps3 - eps1) b / eps1      (central layer)
//! ```
//!
//! all of which carry units of length.  Dissipation enters through positive
//! imaginary parts of `chi` and `xi` (written χ+iη, ξ+iζ), gain through a
//! negative imaginary part of `alpha`.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("background dielectric constant must be positive, got {0}")]
    InvalidBackground(f64),
    #[error("loss fraction must be non-negative, got {0}")]
    InvalidLossFraction(f64),
    #[error("dissipative imaginary parts must satisfy Im chi >= 0, Im xi >= 0")]
    NegativeLoss,
    #[error("gain layer requires Im alpha <= 0, got {0}")]
    PositiveImAlpha(f64),
}

/// Geometry and material constants of the cavity, the user-facing input.
///
/// Lengths may be in any unit; [`CavitySpec::normalized`] rescales everything
/// so that the period is 1, which is the convention used by the rest of the
/// crate (the physics is scale-free).
#[derive(Debug, Clone, PartialEq)]
pub struct CavitySpec {
    /// Layer-to-layer separation (lattice period).
    pub a: f64,
    /// Horizontal-layer width.
    pub b: f64,
    /// Vertical-layer width.
    pub d: f64,
    /// Background dielectric constant (real, positive).
    pub eps1: f64,
    /// Layer dielectric constant.
    pub eps2: Complex64,
    /// Central-layer dielectric constant.
    pub eps3: Complex64,
    /// Optional lateral/vertical cell count, used by leakage estimates.
    pub cells: Option<u32>,
}

impl CavitySpec {
    pub fn new(
        a: f64,
        b: f64,
        d: f64,
        eps1: f64,
        eps2: Complex64,
        eps3: Complex64,
        cells: Option<u32>,
    ) -> Result<Self, ModelError> {
        if a <= 0.0 || !a.is_finite() {
            return Err(ModelError::InvalidGeometry(format!("period a = {a}")));
        }
        let b_fits = b > 0.0 && b < a;
        if !b_fits {
            return Err(ModelError::InvalidGeometry(format!(
                "horizontal width b = {b} must satisfy 0 < b < a = {a}"
            )));
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(ModelError::InvalidGeometry(format!(
                "vertical width d = {d}"
            )));
        }
        if eps1 <= 0.0 || !eps1.is_finite() {
            return Err(ModelError::InvalidBackground(eps1));
        }
        Ok(Self {
            a,
            b,
            d,
            eps1,
            eps2,
            eps3,
            cells,
        })
    }

    /// Same cavity with all lengths divided by the period.
    pub fn normalized(&self) -> CavitySpec {
        CavitySpec {
            a: 1.0,
            b: self.b / self.a,
            d: self.d / self.a,
            eps1: self.eps1,
            eps2: self.eps2,
            eps3: self.eps3,
            cells: self.cells,
        }
    }
}

/// Complex effective 2-d susceptibilities of the thin-layer model.
///
/// `chi` and `xi` carry the layer loss in their imaginary parts
/// (η = Im chi ≥ 0, ζ = Im xi ≥ 0); `alpha` carries gain in a non-positive
/// imaginary part.  All three have units of length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveParams {
    pub chi: Complex64,
    pub xi: Complex64,
    pub alpha: Complex64,
}

impl EffectiveParams {
    pub fn new(chi: Complex64, xi: Complex64, alpha: Complex64) -> Result<Self, ModelError> {
        if chi.im < 0.0 || xi.im < 0.0 {
            return Err(ModelError::NegativeLoss);
        }
        if alpha.im > 0.0 {
            return Err(ModelError::PositiveImAlpha(alpha.im));
        }
        Ok(Self { chi, xi, alpha })
    }

    pub fn chi_r(&self) -> f64 {
        self.chi.re
    }

    /// Dissipative part of the vertical-layer susceptibility.
    pub fn eta(&self) -> f64 {
        self.chi.im
    }

    pub fn xi_r(&self) -> f64 {
        self.xi.re
    }

    /// Dissipative part of the horizontal-layer susceptibility.
    pub fn zeta(&self) -> f64 {
        self.xi.im
    }

    /// Replace the dissipative parts by the loss-fraction convention
    /// η = f·|Re chi|, ζ = f·|Re xi| with f ≥ 0.
    ///
    /// The fractions are taken of the magnitudes so that loss stays a
    /// positive imaginary part even though Re chi and Re xi are negative for
    /// low-index layers.
    pub fn with_loss_fraction(self, f: f64) -> Result<Self, ModelError> {
        if f < 0.0 || !f.is_finite() {
            return Err(ModelError::InvalidLossFraction(f));
        }
        Ok(Self {
            chi: Complex64::new(self.chi.re, f * self.chi.re.abs()),
            xi: Complex64::new(self.xi.re, f * self.xi.re.abs()),
            alpha: self.alpha,
        })
    }

    /// Drop all imaginary parts (the passive, lossless cavity).
    pub fn lossless(self) -> Self {
        Self {
            chi: Complex64::new(self.chi.re, 0.0),
            xi: Complex64::new(self.xi.re, 0.0),
            alpha: Complex64::new(self.alpha.re, 0.0),
        }
    }

    /// Recover the dielectric constants that produced these parameters.
    pub fn recover_eps(&self, spec: &CavitySpec) -> (Complex64, Complex64) {
        let eps2 = spec.eps1 * (self.chi / spec.d + 1.0);
        let eps3 = spec.eps1 * (self.alpha / spec.b + 1.0);
        (eps2, eps3)
    }
}

/// Map geometry and materials to the effective susceptibilities.
pub fn effective_params(spec: &CavitySpec) -> Result<EffectiveParams, ModelError> {
    if spec.eps1 <= 0.0 || spec.eps1.is_nan() {
        return Err(ModelError::InvalidBackground(spec.eps1));
    }
    let geometry_ok = spec.a > 0.0 && spec.b > 0.0 && spec.d > 0.0;
    if !geometry_ok {
        return Err(ModelError::InvalidGeometry(format!(
            "a = {}, b = {}, d = {}",
            spec.a, spec.b, spec.d
        )));
    }
    let contrast2 = (spec.eps2 - spec.eps1) / spec.eps1;
    let contrast3 = (spec.eps3 - spec.eps1) / spec.eps1;
    EffectiveParams::new(contrast2 * spec.d, contrast2 * spec.b, contrast3 * spec.b)
}

/// Outcome of the bound-mode feasibility check.
///
/// A 3-d bound state needs the vertical wells deep enough that the transverse
/// wave vector is evanescent (`U = chi/d < -1/2`, equivalently
/// `-2 chi - d > 0`) and a horizontal lattice able to open band gaps
/// (`xi != 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    /// Well depth U = Re(chi)/d of the vertical layers.
    pub well_depth: f64,
    /// Transverse confinement criterion U < -1/2.
    pub transverse_binding: bool,
    /// True exactly at U = -1/2 where the transverse wave vector diverges.
    pub degenerate: bool,
    /// The z lattice can open gaps (Re(xi) != 0).
    pub lattice_gaps: bool,
    pub feasible: bool,
}

/// Threshold below which `|2 chi + d|` counts as the degenerate pole of the
/// transverse wave-vector relation.
const DEGENERACY_TOL: f64 = 1e-12;

pub fn bound_mode_feasible(params: &EffectiveParams, spec: &CavitySpec) -> Feasibility {
    let u = params.chi.re / spec.d;
    let denom = -2.0 * params.chi.re - spec.d;
    let degenerate = denom.abs() <= DEGENERACY_TOL * spec.d;
    let transverse_binding = !degenerate && u < -0.5;
    let lattice_gaps = params.xi.re != 0.0;
    Feasibility {
        well_depth: u,
        transverse_binding,
        degenerate,
        lattice_gaps,
        feasible: transverse_binding && lattice_gaps,
    }
}

/// Unit conventions of the exported quantities.
///
/// Internally all lengths are in units of the period, so every exported wave
/// vector is the dimensionless `k·a` and every exported rate is a ratio to
/// the background emission rate.  Physical constants (ħ, dipole moment, c)
/// only enter absolute rates and cancel in all ratios; `omega = c k / sqrt(eps1)`
/// converts wave vectors to frequencies when needed.
#[derive(Debug, Clone, Copy)]
pub struct UnitSystem {
    /// Physical value of the period `a` in user units.
    pub period: f64,
}

impl UnitSystem {
    pub fn new(period: f64) -> Self {
        Self { period }
    }

    /// Dimensionless `k·a` for a wave vector given in user units.
    pub fn wavevector_dimensionless(&self, k: f64) -> f64 {
        k * self.period
    }

    /// Wave vector in user units from the dimensionless `k·a`.
    pub fn wavevector_physical(&self, ka: f64) -> f64 {
        ka / self.period
    }
}
