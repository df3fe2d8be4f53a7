//! Spontaneous emission from a dipole at the cavity center: background rate,
//! first-order resonance linewidths, Lorentzian partial rates, β factor and
//! the threshold gain that closes a resonance linewidth.
//!
//! With the small-loss notation χ+iη, ξ+iζ and k_n - iγ_n the linewidth of
//! resonance n is
//!
//! ```text
//! γ_n = (kzn² - kn²)^{3/2} η / (kn √2)
//!     + (kzn² ζ - i kzn⁴ ξ² α / 2) / [(ξ + a + kzn² ξ² a) kn]
//! ```
//!
//! the partial rate into resonance n is the Lorentzian
//! `Γ_n(k) = (6πΓ/R_n) γ_n / [(k - k_n)² + γ_n²]`, and the gain needed to
//! reach threshold (γ_n = 0) is
//!
//! ```text
//! α = (-2i/β_n) [ ζ/(kzn²ξ²) + (kzn² - kn²)^{3/2} (η/√2) (ξ + a + kzn²ξ²a)/(kzn⁴ξ²) ]
//! ```
//!
//! All exported rates are ratios to the background rate Γ, so ħ and the
//! dipole moment cancel.

use std::io::Write;

use num_complex::Complex64;
use thiserror::Error;

use crate::csvfmt::g17;
use crate::model::{CavitySpec, EffectiveParams};
use crate::modes::{self, ModeSolution, ModesError};

#[derive(Debug, Error)]
pub enum EmissionError {
    #[error("linewidth expansion needs kzn^2 > kn^2 (bound regime), got kzn = {kzn}, kn = {kn}")]
    NotBelowCutoff { kzn: f64, kn: f64 },
    #[error("resonance is below the transverse cutoff (k^2 <= 0); no propagating frequency")]
    BelowCutoff,
    #[error("Lorentzian peak unbounded: gamma_n = 0 exactly at k = k_n (true bound state)")]
    UnboundedPeak,
    #[error("beta_n must lie in (0, 1], got {0}")]
    BetaOutOfRange(f64),
    #[error("threshold gain undefined for xi = 0")]
    XiZero,
    #[error("gamma_prop table must be non-empty and sorted by k")]
    BadPropTable,
    #[error(transparent)]
    Modes(#[from] ModesError),
}

/// Emission rate of the dipole in the bare background medium, in natural
/// units (ħ = μ = 1): `Γ = 12 k³ ε₁^{5/2} / (2 + ε₁)²`.
pub fn background_rate(k: f64, eps1: f64) -> f64 {
    12.0 * k.powi(3) * eps1.powf(2.5) / ((2.0 + eps1) * (2.0 + eps1))
}

/// First-order linewidth of resonance `n` for central-layer parameter
/// `alpha`.  Real for real `alpha = 0` (the passive width); an imaginary part
/// of `alpha` (gain) reduces the real part, a real part of `alpha` shifts the
/// line.
pub fn linewidth(
    mode: &ModeSolution,
    params: &EffectiveParams,
    spec: &CavitySpec,
    alpha: Complex64,
) -> Result<Complex64, EmissionError> {
    let kzn = mode.kz.re;
    let kn = mode.k.re;
    if kn <= 0.0 || kn.is_nan() {
        return Err(EmissionError::BelowCutoff);
    }
    if kzn * kzn <= kn * kn {
        return Err(EmissionError::NotBelowCutoff { kzn, kn });
    }
    let a = spec.a;
    let eta = params.eta();
    let zeta = params.zeta();
    let xi = params.xi.re;
    let diff = kzn * kzn - kn * kn;
    let term1 = diff.powf(1.5) * eta / (kn * std::f64::consts::SQRT_2);
    let denom = (xi + a + kzn * kzn * xi * xi * a) * kn;
    let numer = Complex64::new(kzn * kzn * zeta, 0.0)
        - Complex64::new(0.0, 0.5) * kzn.powi(4) * xi * xi * alpha;
    Ok(Complex64::new(term1, 0.0) + numer / denom)
}

/// Fill the passive (`alpha = 0`) linewidths into a set of solved modes.
pub fn fill_linewidths(
    modes: &mut [ModeSolution],
    params: &EffectiveParams,
    spec: &CavitySpec,
) -> Result<(), EmissionError> {
    for m in modes.iter_mut() {
        m.gamma = linewidth(m, params, spec, Complex64::new(0.0, 0.0))?.re;
    }
    Ok(())
}

/// Partial emission rate into resonance `n` at wave vector `k`:
/// `Γ_n(k) = (6π Γ / R_n) γ_n / [(k - k_n)² + γ_n²]`.
///
/// Pass `big_gamma = 1` for the rate in units of Γ.  A vanishing width is the
/// true bound state: off resonance the rate is zero, exactly at `k = k_n` it
/// is a delta spike and the call errors so the caller can emit a marker
/// instead of an infinity.
pub fn lorentzian_rate(
    k: f64,
    k_n: f64,
    r_n: f64,
    gamma_n: f64,
    big_gamma: f64,
) -> Result<f64, EmissionError> {
    if gamma_n == 0.0 {
        if k == k_n {
            return Err(EmissionError::UnboundedPeak);
        }
        return Ok(0.0);
    }
    let d = k - k_n;
    Ok((6.0 * std::f64::consts::PI * big_gamma / r_n) * gamma_n / (d * d + gamma_n * gamma_n))
}

/// β from a set of resonance rates and the propagating-mode rate, all in the
/// same units: `β = ΣΓ_n / (ΣΓ_n + Γ_prop)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta {
    pub value: f64,
    /// Set when both numerator and denominator vanish; the ratio is defined
    /// as 0 in that case.
    pub degenerate: bool,
}

pub fn beta_factor(resonance_rates: &[f64], gamma_prop: f64) -> Beta {
    let total: f64 = resonance_rates.iter().sum();
    let denom = total + gamma_prop;
    if denom == 0.0 {
        return Beta {
            value: 0.0,
            degenerate: true,
        };
    }
    Beta {
        value: total / denom,
        degenerate: false,
    }
}

/// Model for the propagating-mode rate Γ_prop, everywhere expressed as a
/// ratio to the background rate Γ(k).  There is no closed form for the true
/// frequency-dependent Γ_prop, so it is pluggable: the default pins it to the
/// background rate, a constant or a tabulated curve can be supplied instead.
#[derive(Debug, Clone, PartialEq)]
pub enum GammaPropModel {
    /// Γ_prop(k) = Γ(k).
    Background,
    /// Γ_prop(k) = c · Γ(k).
    Constant(f64),
    /// Piecewise-linear interpolation of (k·a, Γ_prop/Γ) pairs, clamped at
    /// the ends.
    Table(Vec<(f64, f64)>),
}

impl GammaPropModel {
    /// Γ_prop/Γ at wave vector `k`.
    pub fn ratio(&self, k: f64) -> Result<f64, EmissionError> {
        match self {
            GammaPropModel::Background => Ok(1.0),
            GammaPropModel::Constant(c) => Ok(*c),
            GammaPropModel::Table(rows) => {
                if rows.is_empty() || rows.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(EmissionError::BadPropTable);
                }
                if k <= rows[0].0 {
                    return Ok(rows[0].1);
                }
                if k >= rows[rows.len() - 1].0 {
                    return Ok(rows[rows.len() - 1].1);
                }
                let idx = rows.partition_point(|(kk, _)| *kk <= k);
                let (k0, v0) = rows[idx - 1];
                let (k1, v1) = rows[idx];
                Ok(v0 + (v1 - v0) * (k - k0) / (k1 - k0))
            }
        }
    }

    /// Stable description recorded next to every β output.
    pub fn describe(&self) -> String {
        match self {
            GammaPropModel::Background => "background".to_string(),
            GammaPropModel::Constant(c) => format!("constant:{c}"),
            GammaPropModel::Table(rows) => format!("table:{} points", rows.len()),
        }
    }
}

/// A true bound state on the spectrum grid: zero width, finite integrated
/// weight `∫ Γ_n/Γ dk = 6π²/R_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaMarker {
    pub n: usize,
    pub k_n: f64,
    pub integrated_weight: f64,
}

/// Spontaneous-emission spectrum on a wave-vector grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionSpectrum {
    pub k_grid: Vec<f64>,
    /// Passive linewidth per resonance.
    pub gamma_n: Vec<f64>,
    /// Central intensity per resonance.
    pub r_n: Vec<f64>,
    /// `rates[n][i]` = Γ_{n+1}(k_i)/Γ.
    pub rates: Vec<Vec<f64>>,
    /// Γ_prop/Γ per grid point.
    pub gamma_prop: Vec<f64>,
    /// Pointwise β = ΣΓ_n/(ΣΓ_n + Γ_prop).
    pub beta: Vec<f64>,
    /// Bound states (γ_n = 0) excluded from the Lorentzian columns.
    pub deltas: Vec<DeltaMarker>,
    /// Which Γ_prop model produced the β column.
    pub prop_model: String,
}

/// Assemble the emission spectrum of the solved modes over `k_grid`.
///
/// Modes must carry their passive linewidths (see [`fill_linewidths`]).
pub fn spectrum(
    modes_in: &[ModeSolution],
    params: &EffectiveParams,
    spec: &CavitySpec,
    k_grid: &[f64],
    prop_model: &GammaPropModel,
) -> Result<EmissionSpectrum, EmissionError> {
    let mut gamma_n = Vec::with_capacity(modes_in.len());
    let mut r_n = Vec::with_capacity(modes_in.len());
    let mut deltas = Vec::new();
    for m in modes_in {
        gamma_n.push(m.gamma);
        let r = modes::central_intensity_r(m, params, spec)?;
        r_n.push(r);
        if m.gamma == 0.0 {
            deltas.push(DeltaMarker {
                n: m.n,
                k_n: m.k.re,
                integrated_weight: 6.0 * std::f64::consts::PI * std::f64::consts::PI / r,
            });
        }
    }
    let mut rates: Vec<Vec<f64>> = vec![Vec::with_capacity(k_grid.len()); modes_in.len()];
    let mut gamma_prop = Vec::with_capacity(k_grid.len());
    let mut beta = Vec::with_capacity(k_grid.len());
    for &k in k_grid {
        let mut row = Vec::with_capacity(modes_in.len());
        for (j, m) in modes_in.iter().enumerate() {
            // grid points never sit exactly on a zero-width peak; those are
            // reported through the delta markers
            let rate = if m.gamma == 0.0 && k == m.k.re {
                0.0
            } else {
                lorentzian_rate(k, m.k.re, r_n[j], m.gamma, 1.0)?
            };
            rates[j].push(rate);
            row.push(rate);
        }
        let prop = prop_model.ratio(k)?;
        gamma_prop.push(prop);
        beta.push(beta_factor(&row, prop).value);
    }
    Ok(EmissionSpectrum {
        k_grid: k_grid.to_vec(),
        gamma_n,
        r_n,
        rates,
        gamma_prop,
        beta,
        deltas,
        prop_model: prop_model.describe(),
    })
}

/// Gain parameter that closes the linewidth of one resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    /// Required central-layer parameter; purely imaginary and negative for
    /// real loss constants.
    pub alpha_threshold: Complex64,
    pub n: usize,
    pub beta_used: f64,
}

/// Threshold gain of resonance `n`:
/// `α = (-2i/β_n)[ζ/(kzn²ξ²) + (kzn²-kn²)^{3/2}(η/√2)(ξ+a+kzn²ξ²a)/(kzn⁴ξ²)]`.
///
/// Substituted back into the linewidth with `β_n = 1` this closes γ_n
/// exactly (first-order identity).
pub fn threshold_gain(
    mode: &ModeSolution,
    params: &EffectiveParams,
    spec: &CavitySpec,
    beta_n: f64,
) -> Result<ThresholdResult, EmissionError> {
    let beta_valid = beta_n > 0.0 && beta_n <= 1.0;
    if !beta_valid {
        return Err(EmissionError::BetaOutOfRange(beta_n));
    }
    let xi = params.xi.re;
    if xi == 0.0 {
        return Err(EmissionError::XiZero);
    }
    let kzn = mode.kz.re;
    let kn = mode.k.re;
    if kn <= 0.0 || kn.is_nan() {
        return Err(EmissionError::BelowCutoff);
    }
    if kzn * kzn <= kn * kn {
        return Err(EmissionError::NotBelowCutoff { kzn, kn });
    }
    let a = spec.a;
    let eta = params.eta();
    let zeta = params.zeta();
    let kzn2 = kzn * kzn;
    let bracket = zeta / (kzn2 * xi * xi)
        + (kzn2 - kn * kn).powf(1.5)
            * (eta / std::f64::consts::SQRT_2)
            * (xi + a + kzn2 * xi * xi * a)
            / (kzn2 * kzn2 * xi * xi);
    Ok(ThresholdResult {
        alpha_threshold: Complex64::new(0.0, -2.0 * bracket / beta_n),
        n: mode.n,
        beta_used: beta_n,
    })
}

/// Spectrum CSV: `k_a`, one `Gamma_n_over_Gamma` column per resonance,
/// `Gamma_prop_over_Gamma`, `beta`.
pub fn write_spectrum_csv<W: Write>(w: &mut W, s: &EmissionSpectrum) -> std::io::Result<()> {
    write!(w, "k_a")?;
    for j in 0..s.rates.len() {
        write!(w, ",Gamma_{}_over_Gamma", j + 1)?;
    }
    writeln!(w, ",Gamma_prop_over_Gamma,beta")?;
    for (i, &k) in s.k_grid.iter().enumerate() {
        write!(w, "{}", g17(k))?;
        for rate in &s.rates {
            write!(w, ",{}", g17(rate[i]))?;
        }
        writeln!(w, ",{},{}", g17(s.gamma_prop[i]), g17(s.beta[i]))?;
    }
    Ok(())
}

/// Sidecar CSV for true bound states: `n,k_a,integrated_weight_over_Gamma`.
pub fn write_delta_csv<W: Write>(w: &mut W, deltas: &[DeltaMarker]) -> std::io::Result<()> {
    writeln!(w, "n,k_a,integrated_weight_over_Gamma")?;
    for d in deltas {
        writeln!(w, "{},{},{}", d.n, g17(d.k_n), g17(d.integrated_weight))?;
    }
    Ok(())
}

/// One row of a threshold sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRow {
    pub eps2: f64,
    pub n: usize,
    pub alpha: Complex64,
    pub beta_used: f64,
}

/// Threshold CSV: `eps2,n,re_alpha_a,im_alpha_a,beta_used`.
pub fn write_threshold_csv<W: Write>(w: &mut W, rows: &[ThresholdRow]) -> std::io::Result<()> {
    writeln!(w, "eps2,n,re_alpha_a,im_alpha_a,beta_used")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            g17(r.eps2),
            r.n,
            g17(r.alpha.re),
            g17(r.alpha.im),
            g17(r.beta_used)
        )?;
    }
    Ok(())
}
