//! Numerical machinery for the dispersion solves: real bracketing bisection,
//! complex Newton iteration with optional deflation, and homotopy
//! continuation in the loss parameters.
//!
//! Everything here is deterministic: identical inputs produce bit-identical
//! results.

use num_complex::Complex64;
use thiserror::Error;

use crate::dispersion::{self, DispersionError};
use crate::model::{CavitySpec, EffectiveParams};

/// Residual tolerance used by the dispersion solves (period = 1 units).
pub const RESIDUAL_TOL: f64 = 1e-12;
/// Newton iteration cap.
pub const MAX_NEWTON_ITER: usize = 50;
/// Default number of geometric continuation steps from the lossless cavity.
pub const DEFAULT_CONTINUATION_STEPS: usize = 8;

#[derive(Debug, Error)]
pub enum RootfindError {
    #[error("function does not change sign on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("non-finite function value at {at} (pole inside bracket?)")]
    PoleInBracket { at: f64 },
    #[error("Newton did not converge in {max_iter} iterations (last residual {residual:.3e})")]
    MaxIterations { max_iter: usize, residual: f64 },
    #[error("Newton derivative underflow at {0}")]
    DerivativeUnderflow(Complex64),
    #[error(
        "continuation path jump at step {step}: root moved {moved:.3e}, \
         more than half the distance {guard:.3e} to the nearest other root"
    )]
    PathJump { step: usize, moved: f64, guard: f64 },
    #[error("no lossless root with index {0}")]
    MissingLosslessRoot(usize),
    #[error(transparent)]
    Dispersion(#[from] DispersionError),
}

/// Result of a complex solve, including the continuation waypoints that led
/// to it.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub root: Complex64,
    pub iterations: usize,
    pub residual_norm: f64,
    pub path: Vec<Complex64>,
    pub converged: bool,
}

/// Bracketing bisection for a real root.  Requires a sign change on the
/// bracket and finite values at every probe; runs until the bracket is
/// narrower than `tol`.
pub fn bisect<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64, RootfindError> {
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut flo = f(lo);
    let fhi = f(hi);
    if !flo.is_finite() {
        return Err(RootfindError::PoleInBracket { at: lo });
    }
    if !fhi.is_finite() {
        return Err(RootfindError::PoleInBracket { at: hi });
    }
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(RootfindError::NoSignChange { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break; // bracket narrower than f64 spacing
        }
        let fmid = f(mid);
        if !fmid.is_finite() {
            return Err(RootfindError::PoleInBracket { at: mid });
        }
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Complex Newton iteration on `f` with analytic derivative.  Converges when
/// `|f| < tol`; the seed is checked first, so a seed that already satisfies
/// the tolerance is returned unchanged.  Evaluation failures (e.g. a pole
/// exclusion zone) propagate instead of being iterated over.
pub fn newton_complex<F>(
    f: F,
    z0: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport, RootfindError>
where
    F: Fn(Complex64) -> Result<(Complex64, Complex64), RootfindError>,
{
    let mut z = z0;
    for iter in 0..=max_iter {
        let (fz, dfz) = f(z)?;
        let residual = fz.norm();
        if residual < tol {
            return Ok(SolveReport {
                root: z,
                iterations: iter,
                residual_norm: residual,
                path: vec![z],
                converged: true,
            });
        }
        if iter == max_iter {
            return Err(RootfindError::MaxIterations { max_iter, residual });
        }
        if dfz.norm() < 1e-300 {
            return Err(RootfindError::DerivativeUnderflow(z));
        }
        z -= fz / dfz;
    }
    unreachable!()
}

/// Newton iteration on `f(z) / prod_i (z - known_i)`.  Dividing out already
/// located roots steers the iteration away from them, so repeated searches
/// return pairwise distinct roots.
pub fn newton_complex_deflated<F>(
    f: F,
    known: &[Complex64],
    z0: Complex64,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport, RootfindError>
where
    F: Fn(Complex64) -> Result<(Complex64, Complex64), RootfindError>,
{
    let deflated = |z: Complex64| {
        let (fz, dfz) = f(z)?;
        let mut prod = Complex64::new(1.0, 0.0);
        let mut sum = Complex64::new(0.0, 0.0);
        for r in known {
            let dz = z - r;
            prod *= dz;
            sum += 1.0 / dz;
        }
        Ok((fz / prod, (dfz - fz * sum) / prod))
    };
    let mut report = newton_complex(deflated, z0, tol, max_iter)?;
    // report the raw residual, not the deflated one
    report.residual_norm = f(report.root)?.0.norm();
    Ok(report)
}

/// Generic homotopy over a one-parameter residual family.  `family(t)` yields
/// the residual/derivative closure at continuation parameter `t`; waypoints
/// run over the given `ts` in order.  A step whose converged root moves
/// further than `guard` aborts with [`RootfindError::PathJump`].
pub fn continue_path<F, G>(
    family: F,
    start: Complex64,
    ts: &[f64],
    guard: f64,
    tol: f64,
) -> Result<SolveReport, RootfindError>
where
    F: Fn(f64) -> G,
    G: Fn(Complex64) -> Result<(Complex64, Complex64), RootfindError>,
{
    let mut path = vec![start];
    let mut total_iter = 0usize;
    let mut residual = f64::NAN;
    for (i, t) in ts.iter().enumerate() {
        let prev = *path.last().expect("path is non-empty");
        let report = newton_complex(family(*t), prev, tol, MAX_NEWTON_ITER)?;
        let moved = (report.root - prev).norm();
        if moved > guard {
            return Err(RootfindError::PathJump {
                step: i + 1,
                moved,
                guard,
            });
        }
        total_iter += report.iterations;
        residual = report.residual_norm;
        path.push(report.root);
    }
    Ok(SolveReport {
        root: *path.last().expect("path is non-empty"),
        iterations: total_iter,
        residual_norm: residual,
        path,
        converged: true,
    })
}

/// Continue the lossless bound state with index `n` (1-based, roots ordered
/// by ascending `Re kz`) into the dissipative cavity described by `target`.
///
/// The imaginary parts (η, ζ, Im α) are switched on over `steps` geometric
/// increments t = 2^(i-steps), Newton-polishing the dispersion root at each
/// waypoint; the final root is labeled `n` by continuity.  With `steps = 0`
/// (or a lossless target) the path has length 1 and the lossless root is
/// returned as-is.
pub fn continue_in_loss(
    n: usize,
    target: &EffectiveParams,
    spec: &CavitySpec,
    steps: usize,
) -> Result<SolveReport, RootfindError> {
    let lossless = target.lossless();
    let roots = dispersion::lossless_roots(&lossless, spec, n.max(1))?;
    let root0 = roots
        .get(n - 1)
        .ok_or(RootfindError::MissingLosslessRoot(n))?
        .kz;
    let guard = roots
        .iter()
        .map(|r| (r.kz - root0).abs())
        .filter(|d| *d > 0.0)
        .fold(f64::INFINITY, f64::min)
        / 2.0;

    let no_imag = target.chi.im == 0.0 && target.xi.im == 0.0 && target.alpha.im == 0.0;
    let start = Complex64::new(root0, 0.0);
    if steps == 0 || no_imag {
        let residual = dispersion::dispersion_residual(start, &lossless, spec.a)?
            .0
            .norm();
        return Ok(SolveReport {
            root: start,
            iterations: 0,
            residual_norm: residual,
            path: vec![start],
            converged: true,
        });
    }

    let ts: Vec<f64> = (1..=steps)
        .map(|i| (2.0f64).powi(i as i32 - steps as i32))
        .collect();
    let family = |t: f64| {
        let at = EffectiveParams {
            chi: Complex64::new(target.chi.re, t * target.chi.im),
            xi: Complex64::new(target.xi.re, t * target.xi.im),
            alpha: Complex64::new(target.alpha.re, t * target.alpha.im),
        };
        let a = spec.a;
        move |z: Complex64| Ok(dispersion::dispersion_residual(z, &at, a)?)
    };
    continue_path(family, start, &ts, guard, RESIDUAL_TOL)
}
