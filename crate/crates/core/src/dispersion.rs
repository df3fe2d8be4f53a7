//! Thin-layer dispersion relations.
//!
//! With the effective susceptibilities χ, ξ, α the transverse wave vectors,
//! total wave vector and Bloch multiplier of a separable mode follow from the
//! resonance component `kz` alone:
//!
//! ```text
//! kx = ky   = 2i / (-2 chi - d)
//! k^2       = kz^2 - 8 / (2 chi + d)^2
//! e^{i p a} = cos(kz a) - (kz alpha / 2) sin(kz a)
//! ```
//!
//! and `kz` itself solves the closed dispersion equation
//!
//! ```text
//! (2/kz)^2 [1 + xi kz cot(kz a)] = xi^2 - (xi - alpha)^2 .
//! ```
//!
//! For a passive cavity (real ξ, α = 0) the right-hand side vanishes, the
//! roots are real and sit inside the band gaps of the fully periodic lattice,
//! whose half-trace uses the same closed form with strength ξ:
//! `cos(p a) = cos(kz a) - (kz xi / 2) sin(kz a)`.

use num_complex::Complex64;
use thiserror::Error;

use crate::model::{CavitySpec, EffectiveParams};
use crate::rootfind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DispersionError {
    #[error("degenerate transverse denominator: |2 chi + d| = {0:.3e} (chi = -d/2 pole)")]
    DegenerateDenominator(f64),
    #[error("cotangent pole: |sin(kz a)| = {0:.3e} < 1e-12")]
    CotangentPole(f64),
    #[error("kz too close to zero for the dispersion residual")]
    ZeroWaveVector,
    #[error("degenerate Bloch multiplier |e^(ipa)| = {0:.3e}; quasi-momentum undefined")]
    DegenerateBloch(f64),
    #[error("growing Bloch envelope |e^(ipa)| = {0} > 1; not a bound/outgoing solution")]
    GrowingEnvelope(f64),
    #[error("lossless root scan failed: {0}")]
    ScanFailed(String),
}

/// Pole exclusion zone for the cotangent in the dispersion residual.
const SIN_POLE_TOL: f64 = 1e-12;
/// Below this modulus the Bloch multiplier is treated as degenerate.
const BLOCH_DEGENERATE_TOL: f64 = 1e-14;

/// One point on the dispersion surface: all wave-vector components derived
/// from a resonance `kz`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionPoint {
    pub kz: Complex64,
    pub k: Complex64,
    pub kx: Complex64,
    pub ky: Complex64,
    pub p: Complex64,
    /// Bloch multiplier e^{i p a}; `h(z + a) = bloch * h(z)` outside the
    /// central layer.
    pub bloch: Complex64,
}

impl DispersionPoint {
    /// Assemble every wave-vector component from `kz`.
    pub fn from_kz(
        kz: Complex64,
        params: &EffectiveParams,
        spec: &CavitySpec,
    ) -> Result<Self, DispersionError> {
        let kx = transverse_k(params, spec)?;
        let k = total_k(kz, params, spec)?;
        let qm = quasi_momentum(kz, params.alpha, spec.a)?;
        Ok(Self {
            kz,
            k,
            kx,
            ky: kx,
            p: qm.p,
            bloch: qm.bloch,
        })
    }
}

/// Perturbative starting guess for resonance `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Seed {
    pub n: usize,
    pub kz0: f64,
    pub q0: f64,
}

/// How a root was located.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedMode {
    /// Newton from the lowest-order perturbative seed converges to this root.
    Perturbative,
    /// Found only by interval scanning (seed unreliable, e.g. |ξ| ≳ a).
    Scan,
}

impl std::fmt::Display for SeedMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SeedMode::Perturbative => write!(f, "perturbative"),
            SeedMode::Scan => write!(f, "scan"),
        }
    }
}

/// A converged lossless dispersion root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosslessRoot {
    /// 1-based index, ascending in `kz`.
    pub n: usize,
    pub kz: f64,
    pub residual: f64,
    pub seed_mode: SeedMode,
}

/// Transverse wave vector `kx = ky = 2i / (-2 chi - d)`.
///
/// For real χ < -d/2 the result is purely imaginary with positive imaginary
/// part: an evanescent profile decaying away from the crossed layers.
pub fn transverse_k(
    params: &EffectiveParams,
    spec: &CavitySpec,
) -> Result<Complex64, DispersionError> {
    let denom = -2.0 * params.chi - spec.d;
    if denom.norm() <= 1e-12 * spec.d {
        return Err(DispersionError::DegenerateDenominator(denom.norm()));
    }
    Ok(Complex64::new(0.0, 2.0) / denom)
}

/// Total wave vector `k = sqrt(kz^2 - 8/(2 chi + d)^2)`, principal branch
/// (`Re k >= 0`).
pub fn total_k(
    kz: Complex64,
    params: &EffectiveParams,
    spec: &CavitySpec,
) -> Result<Complex64, DispersionError> {
    let denom = 2.0 * params.chi + spec.d;
    if denom.norm() <= 1e-12 * spec.d {
        return Err(DispersionError::DegenerateDenominator(denom.norm()));
    }
    Ok((kz * kz - 8.0 / (denom * denom)).sqrt())
}

/// Half-trace of the fully periodic thin lattice with strength `s`:
/// `cos(kz a) - (kz s / 2) sin(kz a)`.
///
/// The same closed form doubles as the Bloch multiplier of the defect
/// problem when evaluated with the central-layer strength α, which is how
/// [`quasi_momentum`] uses it.
pub fn bulk_half_trace(kz: Complex64, s: Complex64, a: f64) -> Complex64 {
    let ka = kz * a;
    ka.cos() - (kz * s / 2.0) * ka.sin()
}

/// Quasi-momentum of the z-envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiMomentum {
    /// `p` with `Re(p a)` folded into `[0, 2π)` and `Im p = q ≥ 0` the decay
    /// per period.  Lossless gap states land exactly on `Re(p a) ∈ {0, π}`,
    /// i.e. the `p_n = nπ/a + i q_n` form with `nπ` reduced to the band edge.
    pub p: Complex64,
    /// Exact Bloch multiplier `e^{i p a}`.
    pub bloch: Complex64,
}

/// Quasi-momentum from `e^{i p a} = cos(kz a) - (kz α / 2) sin(kz a)`.
///
/// Errors on a degenerate multiplier (`e^{ipa} ≈ 0`, where the logarithm
/// branch is undefined) and on a growing envelope (`|e^{ipa}| > 1`, not an
/// admissible bound or outgoing solution).
pub fn quasi_momentum(
    kz: Complex64,
    alpha: Complex64,
    a: f64,
) -> Result<QuasiMomentum, DispersionError> {
    let w = bulk_half_trace(kz, alpha, a);
    let modulus = w.norm();
    if modulus < BLOCH_DEGENERATE_TOL {
        return Err(DispersionError::DegenerateBloch(modulus));
    }
    if modulus > 1.0 + 1e-12 {
        return Err(DispersionError::GrowingEnvelope(modulus));
    }
    let mut theta = w.arg();
    if theta < 0.0 {
        theta += 2.0 * std::f64::consts::PI;
    }
    let p = Complex64::new(theta, -modulus.ln()) / a;
    Ok(QuasiMomentum { p, bloch: w })
}

/// Dispersion residual `F(kz)` and its analytic derivative:
///
/// ```text
/// F(kz) = (2/kz)^2 [1 + xi kz cot(kz a)] - xi^2 + (xi - alpha)^2
/// ```
///
/// Guarded against the cotangent poles (`|sin(kz a)| < 1e-12`) and `kz ≈ 0`.
pub fn dispersion_residual(
    kz: Complex64,
    params: &EffectiveParams,
    a: f64,
) -> Result<(Complex64, Complex64), DispersionError> {
    if kz.norm() < 1e-12 {
        return Err(DispersionError::ZeroWaveVector);
    }
    let xi = params.xi;
    let alpha = params.alpha;
    let ka = kz * a;
    let sin = ka.sin();
    if sin.norm() < SIN_POLE_TOL {
        return Err(DispersionError::CotangentPole(sin.norm()));
    }
    let cot = ka.cos() / sin;
    let g = 1.0 + xi * kz * cot;
    let kz2 = kz * kz;
    let f = 4.0 / kz2 * g - xi * xi + (xi - alpha) * (xi - alpha);
    let dg = xi * (cot - kz * a / (sin * sin));
    let df = -8.0 / (kz2 * kz) * g + 4.0 / kz2 * dg;
    Ok((f, df))
}

/// Lowest-order perturbative solution for resonance `n`:
/// `kz0 = nπ(a - ξ)/a²`, `q0 = (nπξ)²/(2a³)`, with ξ the real part.
///
/// Reliable for |ξ| ≪ a; for strong lattices the scan in
/// [`lossless_roots`] takes over.
pub fn perturbative_seed(n: usize, params: &EffectiveParams, a: f64) -> Seed {
    let xi = params.xi.re;
    let npi = n as f64 * std::f64::consts::PI;
    Seed {
        n,
        kz0: npi * (a - xi) / (a * a),
        q0: (npi * xi).powi(2) / (2.0 * a * a * a),
    }
}

/// Band-gap membership of a real `kz` for the fully periodic lattice
/// (central layer identical to the rest, strength ξ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapCheck {
    pub in_gap: bool,
    /// `|cos(p a)| - 1`; positive inside a gap.
    pub margin: f64,
}

pub fn in_gap(kz: f64, xi: f64, a: f64) -> GapCheck {
    let ht = bulk_half_trace(Complex64::new(kz, 0.0), Complex64::new(xi, 0.0), a);
    let margin = ht.re.abs() - 1.0;
    GapCheck {
        in_gap: margin > 0.0,
        margin,
    }
}

/// Number of scan points per (mπ, (m+1)π) interval.
const SCAN_POINTS: usize = 256;
/// Offset (in kz·a) keeping scan brackets away from the cotangent poles.
const SCAN_EDGE: f64 = 1e-9;

/// All lossless dispersion roots up to index `n_max`, ordered by ascending
/// `kz` and labeled 1, 2, ….
///
/// Roots are enumerated by scanning sign changes of the pole-free residual
/// `1 + ξ kz cot(kz a) - kz²(2ξα - α²)/4` on every interval
/// `(mπ + ε, (m+1)π - ε)/a`, bisecting each bracket and Newton-polishing the
/// result.  Each root is then tagged [`SeedMode::Perturbative`] if Newton
/// started from the lowest-order seed converges back to it, [`SeedMode::Scan`]
/// otherwise.  Imaginary parts of the parameters are ignored.
pub fn lossless_roots(
    params: &EffectiveParams,
    spec: &CavitySpec,
    n_max: usize,
) -> Result<Vec<LosslessRoot>, DispersionError> {
    let a = spec.a;
    let xi = params.xi.re;
    let alpha = params.alpha.re;
    if n_max == 0 || (xi == 0.0 && alpha == 0.0) {
        return Ok(Vec::new());
    }
    let real_params = params.lossless();

    // residual with the (2/kz)^2 prefactor divided out: same roots, no pole
    // at kz = 0
    let rhs_coeff = (2.0 * xi * alpha - alpha * alpha) / 4.0;
    let scan_fn = |kz: f64| {
        let ka = kz * a;
        1.0 + xi * kz * ka.cos() / ka.sin() - kz * kz * rhs_coeff
    };

    let mut roots: Vec<f64> = Vec::new();
    let max_intervals = 2 * n_max + 16;
    'intervals: for m in 0..max_intervals {
        let lo = (m as f64 * std::f64::consts::PI + SCAN_EDGE) / a;
        let hi = ((m as f64 + 1.0) * std::f64::consts::PI - SCAN_EDGE) / a;
        let step = (hi - lo) / SCAN_POINTS as f64;
        let mut x_prev = lo;
        let mut f_prev = scan_fn(x_prev);
        for i in 1..=SCAN_POINTS {
            let x = if i == SCAN_POINTS {
                hi
            } else {
                lo + i as f64 * step
            };
            let fx = scan_fn(x);
            if f_prev.is_finite() && fx.is_finite() && f_prev.signum() != fx.signum() {
                let bracket_root = rootfind::bisect(scan_fn, x_prev, x, 1e-13)
                    .map_err(|e| DispersionError::ScanFailed(e.to_string()))?;
                let polished = rootfind::newton_complex(
                    |z| Ok(dispersion_residual(z, &real_params, a)?),
                    Complex64::new(bracket_root, 0.0),
                    rootfind::RESIDUAL_TOL,
                    rootfind::MAX_NEWTON_ITER,
                )
                .map_err(|e| DispersionError::ScanFailed(e.to_string()))?;
                let r = polished.root.re;
                if roots.iter().all(|other| (other - r).abs() > 1e-8) {
                    roots.push(r);
                }
                if roots.len() >= n_max {
                    break 'intervals;
                }
            }
            x_prev = x;
            f_prev = fx;
        }
    }
    roots.sort_by(|x, y| x.partial_cmp(y).expect("roots are finite"));

    let labeled = roots
        .iter()
        .enumerate()
        .map(|(i, &kz)| {
            let n = i + 1;
            let residual = dispersion_residual(Complex64::new(kz, 0.0), &real_params, a)
                .map(|(f, _)| f.norm())
                .unwrap_or(f64::NAN);
            let seed = perturbative_seed(n, params, a);
            let seed_mode = if seed.kz0 > 0.0 {
                match rootfind::newton_complex(
                    |z| Ok(dispersion_residual(z, &real_params, a)?),
                    Complex64::new(seed.kz0, 0.0),
                    rootfind::RESIDUAL_TOL,
                    rootfind::MAX_NEWTON_ITER,
                ) {
                    Ok(rep) if (rep.root.re - kz).abs() < 1e-6 && rep.root.im.abs() < 1e-9 => {
                        SeedMode::Perturbative
                    }
                    _ => SeedMode::Scan,
                }
            } else {
                SeedMode::Scan
            };
            LosslessRoot {
                n,
                kz,
                residual,
                seed_mode,
            }
        })
        .collect();
    Ok(labeled)
}
