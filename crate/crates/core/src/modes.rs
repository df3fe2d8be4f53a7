//! Mode profiles, the full vector field, the normalized central intensity
//! and the finite-size leakage estimate, together with the driver that turns
//! dispersion roots into [`ModeSolution`]s.
//!
//! Outside the thin layers the separable scalar profiles are
//!
//! ```text
//! f(x) = e^{i kx |x|},   g(y) = e^{i ky |y|},
//! h(z) = e^{i(l+1)pa} sin kz(|z| - la) + e^{ilpa} sin kz(la + a - |z|)
//! ```
//!
//! with `l = int(|z|/a)` the number of layers between the point and the
//! origin, and the electric field is
//! `E = (kz^2 ∇ / k^2 - ẑ d/dz) f g h`.

use std::io::Write;

use num_complex::Complex64;
use thiserror::Error;

use crate::csvfmt::g17;
use crate::dispersion::{self, DispersionError, DispersionPoint, SeedMode};
use crate::model::{CavitySpec, EffectiveParams};
use crate::rootfind::{self, RootfindError};

#[derive(Debug, Error)]
pub enum ModesError {
    #[error("central intensity R = {0} is not positive; outside the bound-mode regime")]
    NonPositiveIntensity(f64),
    #[error("central intensity undefined: {0}")]
    IntensityUndefined(String),
    #[error(
        "leakage estimate needs a bound mode (q > 0 and Im kx > 0), got q = {q}, Im kx = {im_kx}"
    )]
    NotBound { q: f64, im_kx: f64 },
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
    #[error(transparent)]
    Rootfind(#[from] RootfindError),
}

/// One resonance of the cavity.
///
/// For a lossless cavity `kz` and `k` are real (a true 3-d bound state); with
/// dissipation they pick up small negative imaginary parts.  `gamma` is the
/// first-order passive linewidth, filled in by the emission module.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    pub n: usize,
    pub kz: Complex64,
    pub k: Complex64,
    pub kx: Complex64,
    pub ky: Complex64,
    pub p: Complex64,
    /// Bloch multiplier `e^{ipa}` of the z-envelope.
    pub bloch: Complex64,
    /// Decay per period, `q = Im p`.
    pub q: f64,
    /// Passive linewidth from the first-order expansion; zero until filled.
    pub gamma: f64,
    /// Dispersion residual at `kz`.
    pub residual: f64,
    pub seed_mode: SeedMode,
    pub in_gap: bool,
    pub gap_margin: f64,
    /// Set when loss continuation pushed the root's real part out of the
    /// bulk gap (reported instead of failing).
    pub band_edge_degenerate: bool,
}

fn assemble(
    n: usize,
    kz: Complex64,
    residual: f64,
    seed_mode: SeedMode,
    params: &EffectiveParams,
    spec: &CavitySpec,
) -> Result<ModeSolution, ModesError> {
    let pt = DispersionPoint::from_kz(kz, params, spec)?;
    let gap = dispersion::in_gap(kz.re, params.xi.re, spec.a);
    Ok(ModeSolution {
        n,
        kz: pt.kz,
        k: pt.k,
        kx: pt.kx,
        ky: pt.ky,
        p: pt.p,
        bloch: pt.bloch,
        q: pt.p.im,
        gamma: 0.0,
        residual,
        seed_mode,
        in_gap: gap.in_gap,
        gap_margin: gap.margin,
        band_edge_degenerate: !gap.in_gap,
    })
}

/// Solve the passive lossless cavity for resonances 1..=n_max.
pub fn solve_lossless(
    params: &EffectiveParams,
    spec: &CavitySpec,
    n_max: usize,
) -> Result<Vec<ModeSolution>, ModesError> {
    let lossless = params.lossless();
    let roots = dispersion::lossless_roots(&lossless, spec, n_max)?;
    roots
        .iter()
        .map(|r| {
            assemble(
                r.n,
                Complex64::new(r.kz, 0.0),
                r.residual,
                r.seed_mode,
                &lossless,
                spec,
            )
        })
        .collect()
}

/// Per-resonance outcomes of a lossy solve, keyed by the resonance index.
pub type SolveOutcomes = Vec<(usize, Result<ModeSolution, ModesError>)>;

/// Solve the dissipative cavity: every lossless root is continued into the
/// complex plane by switching the loss on over `steps` geometric increments.
///
/// Failures are per-resonance; the run continues.
pub fn solve_modes(
    params: &EffectiveParams,
    spec: &CavitySpec,
    n_max: usize,
    steps: usize,
) -> Result<SolveOutcomes, ModesError> {
    let roots = dispersion::lossless_roots(&params.lossless(), spec, n_max)?;
    Ok(roots
        .iter()
        .map(|r| {
            let outcome = rootfind::continue_in_loss(r.n, params, spec, steps)
                .map_err(ModesError::from)
                .and_then(|rep| {
                    assemble(r.n, rep.root, rep.residual_norm, r.seed_mode, params, spec)
                });
            (r.n, outcome)
        })
        .collect())
}

/// Transverse profile `f(x) = e^{i kx |x|}`; even, equal to 1 at the origin,
/// exponentially decaying for bound modes.
pub fn profile_f(x: f64, mode: &ModeSolution) -> Complex64 {
    (Complex64::new(0.0, 1.0) * mode.kx * x.abs()).exp()
}

/// Transverse profile `g(y) = e^{i ky |y|}`.
pub fn profile_g(y: f64, mode: &ModeSolution) -> Complex64 {
    (Complex64::new(0.0, 1.0) * mode.ky * y.abs()).exp()
}

/// z-envelope of the mode: piecewise sinusoid with Bloch factors, even in z,
/// satisfying `h(z + a) = e^{ipa} h(z)` outside the central layer.
pub fn profile_h(z: f64, mode: &ModeSolution, a: f64) -> Complex64 {
    let za = z.abs();
    let l = (za / a).floor() as i32;
    let w = mode.bloch;
    let kz = mode.kz;
    w.powi(l + 1) * (kz * (za - l as f64 * a)).sin()
        + w.powi(l) * (kz * (l as f64 * a + a - za)).sin()
}

/// d/dz of [`profile_h`], one-sided from above in |z|; odd in z, zero at the
/// origin in the symmetric-limit sense.
fn profile_h_prime(z: f64, mode: &ModeSolution, a: f64) -> Complex64 {
    if z == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let za = z.abs();
    let l = (za / a).floor() as i32;
    let w = mode.bloch;
    let kz = mode.kz;
    let inner = kz
        * (w.powi(l + 1) * (kz * (za - l as f64 * a)).cos()
            - w.powi(l) * (kz * (l as f64 * a + a - za)).cos());
    inner * z.signum()
}

/// A sampled electric field value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub position: [f64; 3],
    /// Cartesian components (Ex, Ey, Ez), arbitrary normalization.
    pub e: [Complex64; 3],
    /// Set when the sample sits on a symmetry plane or a layer plane where
    /// the |·| profiles have a cusp; derivatives there are the symmetric
    /// limit (zero on the coordinate planes, one-sided at layer planes).
    pub cusp: bool,
}

/// Vector field `E = (kz^2 ∇/k^2 - ẑ d/dz) f g h` at one point.
pub fn field_e(position: [f64; 3], mode: &ModeSolution, spec: &CavitySpec) -> FieldSample {
    let [x, y, z] = position;
    let a = spec.a;
    let i = Complex64::new(0.0, 1.0);
    let f = profile_f(x, mode);
    let g = profile_g(y, mode);
    let h = profile_h(z, mode, a);
    let fp = if x == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        i * mode.kx * x.signum() * f
    };
    let gp = if y == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        i * mode.ky * y.signum() * g
    };
    let hp = profile_h_prime(z, mode, a);
    let kz2_over_k2 = mode.kz * mode.kz / (mode.k * mode.k);
    let on_layer_plane = (z.abs() / a - (z.abs() / a).round()).abs() < 1e-12;
    FieldSample {
        position,
        e: [
            kz2_over_k2 * fp * g * h,
            kz2_over_k2 * f * gp * h,
            (kz2_over_k2 - 1.0) * f * g * hp,
        ],
        cusp: x == 0.0 || y == 0.0 || z == 0.0 || on_layer_plane,
    }
}

/// Intensity of the normalized bound state at the origin,
/// `R_n = (1/ξ + kz² a / sin² kz a)(4χ² - d²)(k/kz)⁴`, evaluated with the
/// lossless (real) values.
pub fn central_intensity_r(
    mode: &ModeSolution,
    params: &EffectiveParams,
    spec: &CavitySpec,
) -> Result<f64, ModesError> {
    let xi = params.xi.re;
    let chi = params.chi.re;
    if xi == 0.0 {
        return Err(ModesError::IntensityUndefined("xi = 0".into()));
    }
    let kz = mode.kz.re;
    let k = mode.k.re;
    let s = (kz * spec.a).sin();
    if s.abs() < 1e-300 {
        return Err(ModesError::IntensityUndefined(format!(
            "sin(kz a) = {s} at kz = {kz}"
        )));
    }
    let r = (1.0 / xi + kz * kz * spec.a / (s * s))
        * (4.0 * chi * chi - spec.d * spec.d)
        * (k / kz).powi(4);
    if r <= 0.0 {
        return Err(ModesError::NonPositiveIntensity(r));
    }
    Ok(r)
}

/// Fraction of mode volume outside a cubic system of `n_cells` layers per
/// side: `exp(-2N |kx| d - N q a)`.
pub fn leakage_fraction(
    n_cells: u32,
    mode: &ModeSolution,
    spec: &CavitySpec,
) -> Result<f64, ModesError> {
    if mode.q <= 0.0 || mode.kx.im <= 0.0 {
        return Err(ModesError::NotBound {
            q: mode.q,
            im_kx: mode.kx.im,
        });
    }
    Ok(leakage_fraction_parts(
        n_cells, mode.kx.im, spec.d, mode.q, spec.a,
    ))
}

/// Leakage estimate from explicit decay constants; used directly when
/// comparing against externally quoted `q` values.
pub fn leakage_fraction_parts(n_cells: u32, abs_kx: f64, d: f64, q: f64, a: f64) -> f64 {
    let n = n_cells as f64;
    (-2.0 * n * abs_kx * d - n * q * a).exp()
}

/// Write field samples as CSV with the
/// `x,y,z,Re(Ex),Im(Ex),Re(Ey),Im(Ey),Re(Ez),Im(Ez)` schema.
pub fn write_field_csv<W: Write>(w: &mut W, samples: &[FieldSample]) -> std::io::Result<()> {
    writeln!(w, "x,y,z,Re(Ex),Im(Ex),Re(Ey),Im(Ey),Re(Ez),Im(Ez)")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            g17(s.position[0]),
            g17(s.position[1]),
            g17(s.position[2]),
            g17(s.e[0].re),
            g17(s.e[0].im),
            g17(s.e[1].re),
            g17(s.e[1].im),
            g17(s.e[2].re),
            g17(s.e[2].im),
        )?;
    }
    Ok(())
}
