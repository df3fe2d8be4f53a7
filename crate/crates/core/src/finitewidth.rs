//! Independent finite-width oracle for the thin-layer formulas.
//!
//! Instead of delta layers, the scalar problems are solved with the actual
//! square potentials: the z lattice (slabs of width `b`, strength `ξ/b`,
//! period `a`, central slab `α/b`) through 2×2 transfer matrices, and the
//! x/y confinement (slab of width `d`, strength `χ/d`) as an even square-well
//! bound state.  Everything here is lossless (real ξ, α, χ); losses are
//! handled perturbatively elsewhere.

use std::io::Write;

use num_complex::Complex64;
use thiserror::Error;

use crate::csvfmt::g17;
use crate::rootfind::{self, RootfindError};

#[derive(Debug, Error)]
pub enum FiniteWidthError {
    #[error("invalid slab geometry: {0}")]
    BadGeometry(String),
    #[error("kz must be nonzero for the unit-cell transfer matrix")]
    ZeroWaveVector,
    #[error("requested gap {index} but only {found} gaps in the scanned range")]
    NoGap { index: usize, found: usize },
    #[error("no defect root strictly inside gap {0}")]
    NoRootInGap(usize),
    #[error("square well needs an attractive layer (chi < 0), got chi = {0}")]
    NotAttractive(f64),
    #[error("square well needs a binding prefactor (k^2 - kz^2 < 0), got {0}")]
    NotBinding(f64),
    #[error("no transverse bound state: well depth U = {u} is not below -1/2")]
    NoBoundState { u: f64 },
    #[error(transparent)]
    Rootfind(#[from] RootfindError),
}

/// One square slab of the piecewise-constant potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabPotential {
    pub width: f64,
    /// Amplitude of the potential inside the slab (χ/d, ξ/b or α/b style).
    pub strength: Complex64,
    /// Lattice period when the slab repeats.
    pub period: Option<f64>,
}

impl SlabPotential {
    pub fn new(
        width: f64,
        strength: Complex64,
        period: Option<f64>,
    ) -> Result<Self, FiniteWidthError> {
        if width <= 0.0 || width.is_nan() {
            return Err(FiniteWidthError::BadGeometry(format!("width = {width}")));
        }
        if let Some(p) = period {
            if width >= p || p.is_nan() {
                return Err(FiniteWidthError::BadGeometry(format!(
                    "width = {width} must be smaller than period = {p}"
                )));
            }
        }
        Ok(Self {
            width,
            strength,
            period,
        })
    }
}

/// 2×2 transfer matrix acting on the column (h, h').
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transfer2 {
    pub m: [[Complex64; 2]; 2],
}

impl Transfer2 {
    /// Propagation over a uniform region of length `len` with wavenumber
    /// `kappa` (imaginary kappa propagates evanescently).
    pub fn propagation(kappa: Complex64, len: f64) -> Self {
        let c = (kappa * len).cos();
        let s_over = if kappa.norm() < 1e-300 {
            Complex64::new(len, 0.0)
        } else {
            (kappa * len).sin() / kappa
        };
        let ks = -kappa * (kappa * len).sin();
        Transfer2 {
            m: [[c, s_over], [ks, c]],
        }
    }

    /// Composition "self first, then other" (matrix product other · self).
    pub fn then(&self, other: &Transfer2) -> Self {
        let a = &other.m;
        let b = &self.m;
        Transfer2 {
            m: [
                [
                    a[0][0] * b[0][0] + a[0][1] * b[1][0],
                    a[0][0] * b[0][1] + a[0][1] * b[1][1],
                ],
                [
                    a[1][0] * b[0][0] + a[1][1] * b[1][0],
                    a[1][0] * b[0][1] + a[1][1] * b[1][1],
                ],
            ],
        }
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn half_trace(&self) -> Complex64 {
        0.5 * (self.m[0][0] + self.m[1][1])
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }
}

/// Wavenumber inside a slab of strength `s` (per-width amplitude `s/width`
/// already folded in): `kz sqrt(1 + s)` with the principal branch, imaginary
/// for an evanescent interior (1 + s < 0).
fn slab_wavenumber(kz: f64, strength_over_width: f64) -> Complex64 {
    Complex64::new(kz, 0.0) * Complex64::new(1.0 + strength_over_width, 0.0).sqrt()
}

/// True when the slab interior is evanescent (1 + ξ/b < 0), i.e. the
/// transfer matrix runs on an imaginary interior wavenumber.
pub fn slab_interior_evanescent(xi: f64, b: f64) -> bool {
    1.0 + xi / b < 0.0
}

/// Transfer matrix over one unit cell of the z lattice, starting at a slab
/// entry face: slab of width `b` (wavenumber `kz sqrt(1 + ξ/b)`), then
/// background of width `a - b`.  Unimodular by Wronskian conservation.
pub fn unit_cell_transfer(kz: f64, xi: f64, b: f64, a: f64) -> Result<Transfer2, FiniteWidthError> {
    if kz == 0.0 {
        return Err(FiniteWidthError::ZeroWaveVector);
    }
    let slab_fits = b > 0.0 && b < a;
    if !slab_fits {
        return Err(FiniteWidthError::BadGeometry(format!("b = {b}, a = {a}")));
    }
    let inner = Transfer2::propagation(slab_wavenumber(kz, xi / b), b);
    let outer = Transfer2::propagation(Complex64::new(kz, 0.0), a - b);
    Ok(inner.then(&outer))
}

/// Same unit cell but starting at a slab exit face (background first, then
/// slab); this is the cell seen from the edge of the central layer at
/// `z = b/2`, which is where the defect matching happens.
fn unit_cell_from_slab_edge(
    kz: f64,
    xi: f64,
    b: f64,
    a: f64,
) -> Result<Transfer2, FiniteWidthError> {
    if kz == 0.0 {
        return Err(FiniteWidthError::ZeroWaveVector);
    }
    let outer = Transfer2::propagation(Complex64::new(kz, 0.0), a - b);
    let inner = Transfer2::propagation(slab_wavenumber(kz, xi / b), b);
    Ok(outer.then(&inner))
}

fn real_half_trace(kz: f64, xi: f64, b: f64, a: f64) -> Result<f64, FiniteWidthError> {
    let t = unit_cell_transfer(kz, xi, b, a)?.half_trace();
    debug_assert!(t.im.abs() <= 1e-10 * t.re.abs().max(1.0));
    Ok(t.re)
}

/// Band structure of the periodic z lattice on a refined `kz` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BandStructure {
    pub kz_grid: Vec<f64>,
    /// cos(p a) of the Bloch problem; |value| > 1 inside a gap.
    pub half_trace: Vec<f64>,
    /// Disjoint gap intervals, ascending.
    pub gaps: Vec<(f64, f64)>,
}

/// Largest half-trace change allowed between adjacent grid samples before
/// the grid is refined.
const TRACE_STEP_LIMIT: f64 = 0.1;

/// Scan the lattice half-trace over `[kz_lo, kz_hi]` and locate the band
/// gaps.  The grid auto-refines until the half-trace changes by less than
/// 0.1 between samples; gap edges are bisection-polished onto |cos(pa)| = 1.
pub fn band_structure(
    kz_lo: f64,
    kz_hi: f64,
    xi: f64,
    b: f64,
    a: f64,
) -> Result<BandStructure, FiniteWidthError> {
    let range_ok = kz_lo > 0.0 && kz_hi > kz_lo;
    if !range_ok {
        return Err(FiniteWidthError::BadGeometry(format!(
            "kz range ({kz_lo}, {kz_hi}) must be positive and increasing"
        )));
    }
    let n0 = 512;
    let mut grid: Vec<f64> = (0..=n0)
        .map(|i| kz_lo + (kz_hi - kz_lo) * i as f64 / n0 as f64)
        .collect();
    let mut trace: Vec<f64> = grid
        .iter()
        .map(|&kz| real_half_trace(kz, xi, b, a))
        .collect::<Result<_, _>>()?;

    for _round in 0..16 {
        let mut refined_grid = Vec::with_capacity(grid.len() * 2);
        let mut refined_trace = Vec::with_capacity(grid.len() * 2);
        let mut changed = false;
        for i in 0..grid.len() - 1 {
            refined_grid.push(grid[i]);
            refined_trace.push(trace[i]);
            if (trace[i + 1] - trace[i]).abs() > TRACE_STEP_LIMIT {
                let mid = 0.5 * (grid[i] + grid[i + 1]);
                refined_grid.push(mid);
                refined_trace.push(real_half_trace(mid, xi, b, a)?);
                changed = true;
            }
        }
        refined_grid.push(*grid.last().expect("grid non-empty"));
        refined_trace.push(*trace.last().expect("trace non-empty"));
        grid = refined_grid;
        trace = refined_trace;
        if !changed || grid.len() > 200_000 {
            break;
        }
    }

    let mut gaps = Vec::new();
    let in_gap = |t: f64| t.abs() > 1.0;
    let mut i = 0;
    while i < grid.len() {
        if in_gap(trace[i]) {
            let start_idx = i;
            while i + 1 < grid.len() && in_gap(trace[i + 1]) {
                i += 1;
            }
            let lo = if start_idx == 0 {
                grid[0]
            } else {
                rootfind::bisect(
                    |kz| {
                        real_half_trace(kz, xi, b, a)
                            .map(|t| t.abs() - 1.0)
                            .unwrap_or(f64::NAN)
                    },
                    grid[start_idx - 1],
                    grid[start_idx],
                    1e-13,
                )?
            };
            let hi = if i == grid.len() - 1 {
                grid[i]
            } else {
                rootfind::bisect(
                    |kz| {
                        real_half_trace(kz, xi, b, a)
                            .map(|t| t.abs() - 1.0)
                            .unwrap_or(f64::NAN)
                    },
                    grid[i],
                    grid[i + 1],
                    1e-13,
                )?
            };
            gaps.push((lo, hi));
        }
        i += 1;
    }
    Ok(BandStructure {
        kz_grid: grid,
        half_trace: trace,
        gaps,
    })
}

/// A localized defect state of the finite-width lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefectMode {
    pub kz: f64,
    /// Per-period decay of the Bloch envelope, q = -ln|λ|/a.
    pub q: f64,
    /// Modulus of the decaying unit-cell eigenvalue at the root.
    pub eigenvalue_modulus: f64,
    /// The gap that hosts the state.
    pub gap: (f64, f64),
}

/// Decaying Bloch eigenvector of the unit cell starting at z = b/2, as
/// (value, derivative, eigenvalue).  Only valid strictly inside a gap.
fn decaying_bloch_vector(
    kz: f64,
    xi: f64,
    b: f64,
    a: f64,
) -> Result<Option<([f64; 2], f64)>, FiniteWidthError> {
    let cell = unit_cell_from_slab_edge(kz, xi, b, a)?;
    let t = cell.half_trace().re;
    if t.abs() <= 1.0 {
        return Ok(None);
    }
    let disc = (t * t - 1.0).sqrt();
    let lambda = t - t.signum() * disc;
    let m = &cell.m;
    // fixed eigenvector representative (M01, lambda - M00): continuous in kz
    // across the gap, so the matching determinant scans without sign flips
    let v1 = [m[0][1].re, lambda - m[0][0].re];
    if v1[0] == 0.0 && v1[1] == 0.0 {
        return Ok(Some(([lambda - m[1][1].re, m[1][0].re], lambda)));
    }
    Ok(Some((v1, lambda)))
}

/// Matching determinant between the even interior solution of the central
/// slab (strength α/b) and the decaying Bloch envelope at z = b/2.
fn defect_determinant(kz: f64, xi: f64, alpha: f64, b: f64, a: f64) -> f64 {
    match decaying_bloch_vector(kz, xi, b, a) {
        Ok(Some(([vh, vdh], _))) => {
            let kc = slab_wavenumber(kz, alpha / b);
            let h_in = (kc * (b / 2.0)).cos();
            let dh_in = -kc * (kc * (b / 2.0)).sin();
            debug_assert!(h_in.im.abs() <= 1e-10 * h_in.re.abs().max(1.0));
            dh_in.re * vh - h_in.re * vdh
        }
        _ => f64::NAN,
    }
}

/// Localized defect state in gap `gap_index` (1-based, gaps ordered by
/// ascending kz) for a central slab of strength `alpha/b` embedded in the
/// ξ lattice.  `alpha = xi` is the unperturbed crystal and hosts no defect.
pub fn defect_mode(
    gap_index: usize,
    xi: f64,
    alpha: f64,
    b: f64,
    a: f64,
) -> Result<DefectMode, FiniteWidthError> {
    if gap_index == 0 {
        return Err(FiniteWidthError::NoGap { index: 0, found: 0 });
    }
    let hi = (gap_index as f64 + 3.0) * std::f64::consts::PI / a;
    let bands = band_structure(1e-3 / a, hi, xi, b, a)?;
    if bands.gaps.len() < gap_index {
        return Err(FiniteWidthError::NoGap {
            index: gap_index,
            found: bands.gaps.len(),
        });
    }
    let (lo, hi) = bands.gaps[gap_index - 1];
    let width = hi - lo;
    let inner_lo = lo + 1e-6 * width;
    let inner_hi = hi - 1e-6 * width;

    let det = |kz: f64| defect_determinant(kz, xi, alpha, b, a);
    let n_scan = 800;
    let mut prev_x = inner_lo;
    let mut prev_f = det(prev_x);
    let mut root = None;
    for i in 1..=n_scan {
        let x = inner_lo + (inner_hi - inner_lo) * i as f64 / n_scan as f64;
        let fx = det(x);
        if prev_f.is_finite() && fx.is_finite() && prev_f.signum() != fx.signum() {
            root = Some(rootfind::bisect(det, prev_x, x, 1e-13)?);
            break;
        }
        prev_x = x;
        prev_f = fx;
    }
    let kz = root.ok_or(FiniteWidthError::NoRootInGap(gap_index))?;
    let (_, lambda) =
        decaying_bloch_vector(kz, xi, b, a)?.expect("defect root lies strictly inside the gap");
    Ok(DefectMode {
        kz,
        q: -lambda.abs().ln() / a,
        eigenvalue_modulus: lambda.abs(),
        gap: (lo, hi),
    })
}

/// Even bound state of the finite square well in x (or y): potential
/// `prefactor · chi/d` inside `|x| < d/2`, cosine interior matched to a
/// decaying exponential.  Returns the transverse wave vector `i·κ` (purely
/// imaginary, decaying).
///
/// `prefactor` is the factor `k² - kz²` multiplying the potential; binding
/// requires it negative with `chi < 0`.
pub fn well_mode_x(chi: f64, d: f64, prefactor: f64) -> Result<Complex64, FiniteWidthError> {
    if d <= 0.0 || d.is_nan() {
        return Err(FiniteWidthError::BadGeometry(format!("d = {d}")));
    }
    if chi >= 0.0 {
        return Err(FiniteWidthError::NotAttractive(chi));
    }
    if prefactor >= 0.0 {
        return Err(FiniteWidthError::NotBinding(prefactor));
    }
    let depth = prefactor.abs() * chi.abs() / d;
    // bisect on the decay constant itself; the interior-wavenumber
    // parametrization is ill-conditioned for shallow wells.  The even ground
    // state keeps the interior phase kin*d/2 below pi/2, which bounds kappa
    // from below when the well is deep.
    let match_fn = |kappa: f64| {
        let kin = (depth - kappa * kappa).max(0.0).sqrt();
        kin * (kin * d / 2.0).tan() - kappa
    };
    let kappa_hi = depth.sqrt();
    let kappa_lo = (depth - (std::f64::consts::PI / d).powi(2)).max(0.0).sqrt();
    let kappa = rootfind::bisect(match_fn, kappa_lo, kappa_hi, 1e-15 * kappa_hi)?;
    Ok(Complex64::new(0.0, kappa))
}

/// Self-consistent transverse mode: the prefactor is `k² - kz² = -2κ²` of
/// the solution itself (both transverse directions bind identically), so the
/// well is solved at a fixed point.  Exists only for well depth
/// `U = chi/d < -1/2`.
pub fn well_mode_x_self_consistent(chi: f64, d: f64) -> Result<Complex64, FiniteWidthError> {
    if d <= 0.0 || d.is_nan() {
        return Err(FiniteWidthError::BadGeometry(format!("d = {d}")));
    }
    if chi >= 0.0 {
        return Err(FiniteWidthError::NotAttractive(chi));
    }
    let u = chi / d;
    if u >= -0.5 {
        return Err(FiniteWidthError::NoBoundState { u });
    }
    let mismatch = |kappa: f64| match well_mode_x(chi, d, -2.0 * kappa * kappa) {
        Ok(kx) => kx.im - kappa,
        Err(_) => f64::NAN,
    };
    let thin = 2.0 / (2.0 * chi.abs() - d);
    let lo = (1e-6 * thin).min(0.01 / chi.abs());
    let mut hi = 2.0 * thin;
    let mut expansions = 0;
    while mismatch(hi) <= 0.0 {
        hi *= 2.0;
        expansions += 1;
        if expansions > 60 {
            return Err(FiniteWidthError::NoBoundState { u });
        }
    }
    let kappa = rootfind::bisect(mismatch, lo, hi, 1e-13)?;
    Ok(Complex64::new(0.0, kappa))
}

/// Band CSV: `kz_a,cos_pa`.
pub fn write_band_csv<W: Write>(w: &mut W, bands: &BandStructure, a: f64) -> std::io::Result<()> {
    writeln!(w, "kz_a,cos_pa")?;
    for (kz, t) in bands.kz_grid.iter().zip(&bands.half_trace) {
        writeln!(w, "{},{}", g17(kz * a), g17(*t))?;
    }
    Ok(())
}

/// Gaps CSV: `n,kz_lo_a,kz_hi_a`.
pub fn write_gaps_csv<W: Write>(w: &mut W, bands: &BandStructure, a: f64) -> std::io::Result<()> {
    writeln!(w, "n,kz_lo_a,kz_hi_a")?;
    for (i, (lo, hi)) in bands.gaps.iter().enumerate() {
        writeln!(w, "{},{},{}", i + 1, g17(lo * a), g17(hi * a))?;
    }
    Ok(())
}
