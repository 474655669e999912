//! Classical Fisher information of ideal, spatially resolved direct imaging.
//!
//! The photon arrival density is the mean intensity
//! Λ(x,y) = ½[|ψ₁(x,y)|² + |ψ₂(x,y)|²] and the information on the separation
//! η = (d_X, d_Y) is N ∫∫ (∂Λ/∂η_μ)(∂Λ/∂η_ν)/Λ. Both the exact quadrature and
//! the second-order small-separation expansion are provided.

use crate::error::Result;
use crate::fisher::{FisherMatrix, ETA_LABELS};
use crate::psf::{Psf, PsfDerivs};
use crate::qbound::{qcr_bound, SourceConfig, VarianceBounds};
use crate::quad::UniformGrid;
use crate::scalar::{lit, Real};

/// Λ below this contributes nothing to the FI integrand.
pub const INTENSITY_FLOOR: f64 = 1e-300;
/// |d| / σ_eff up to which the expansion is flagged as valid.
pub const EXPANSION_VALID_SIGMAS: f64 = 0.3;

/// Intensity |ψ|² and its first and second derivatives at a point.
#[derive(Debug, Clone, Copy)]
struct IntensityDerivs<T> {
    i: T,
    ix: T,
    iy: T,
    ixx: T,
    ixy: T,
    iyy: T,
}

impl<T: Real> IntensityDerivs<T> {
    fn from_psf(d: PsfDerivs<T>) -> Self {
        let two = lit::<T>(2.0);
        let re = |a: num_complex::Complex<T>, b: num_complex::Complex<T>| (a.conj() * b).re;
        Self {
            i: d.value.norm_sqr(),
            ix: two * re(d.value, d.dx),
            iy: two * re(d.value, d.dy),
            ixx: two * re(d.value, d.dxx) + two * d.dx.norm_sqr(),
            ixy: two * re(d.value, d.dxy) + two * re(d.dx, d.dy),
            iyy: two * re(d.value, d.dyy) + two * d.dy.norm_sqr(),
        }
    }
}

/// Fourth-order intensity moments T_abcd = ∫∫ I_ab I_cd / I.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntensityMoments<T> {
    pub xxxx: T,
    pub yyyy: T,
    pub xyxy: T,
    pub xxyy: T,
    pub xxxy: T,
    pub xyyy: T,
}

/// Direct-imaging FI in the small-separation expansion, with its constants.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectFI<T> {
    pub fi: FisherMatrix<T>,
    /// κ₁ = ∫∫ (∂²I/∂x²)² / I
    pub kappa1: T,
    /// κ₂ = ∫∫ (∂²I/∂x∂y)² / I
    pub kappa2: T,
    /// |d| ≤ 0.3 σ_eff; an empirical threshold, not an error bound.
    pub expansion_valid: bool,
}

impl<T: Real> DirectFI<T> {
    /// CR bounds from the expanded FI; singular at zero separation.
    pub fn bounds(&self) -> Result<VarianceBounds<T>> {
        qcr_bound(&self.fi)
    }
}

/// Λ(x, y) for equal-strength sources placed symmetrically about the centroid.
pub fn intensity<T: Real>(psf: &Psf<T>, cfg: &SourceConfig<T>, x: T, y: T) -> T {
    let (xr, yr) = (x - cfg.centroid.0, y - cfg.centroid.1);
    let (hx, hy) = half(cfg.separation);
    let a = psf.eval(xr + hx, yr + hy).norm_sqr();
    let b = psf.eval(xr - hx, yr - hy).norm_sqr();
    (a + b) / lit(2.0)
}

fn half<T: Real>(d: (T, T)) -> (T, T) {
    (d.0 / lit(2.0), d.1 / lit(2.0))
}

/// Exact direct-imaging FI over η = (d_X, d_Y) by quadrature.
///
/// Zero separation returns the zero matrix.
pub fn cfi_direct<T: Real>(psf: &Psf<T>, cfg: &SourceConfig<T>) -> Result<FisherMatrix<T>> {
    cfg.validate()?;
    let (dx, dy) = cfg.separation;
    if dx == T::zero() && dy == T::zero() {
        return Ok(FisherMatrix::zeros(&ETA_LABELS));
    }
    let (hx, hy) = half(cfg.separation);
    let grid = UniformGrid::for_shift(psf.rms_width(), dx, dy);
    let quarter = lit::<T>(0.25);
    let floor = lit::<T>(INTENSITY_FLOOR);
    let mut sums = [T::zero(); 3];
    for (k, sum) in sums.iter_mut().enumerate() {
        *sum = grid.integrate(|x, y| {
            let a = IntensityDerivs::from_psf(psf.derivs(x + hx, y + hy));
            let b = IntensityDerivs::from_psf(psf.derivs(x - hx, y - hy));
            let lam = (a.i + b.i) / lit(2.0);
            if lam < floor {
                return T::zero();
            }
            let gx = quarter * (a.ix - b.ix);
            let gy = quarter * (a.iy - b.iy);
            match k {
                0 => gx * gx / lam,
                1 => gx * gy / lam,
                _ => gy * gy / lam,
            }
        });
    }
    let n = cfg.mean_photons();
    Ok(FisherMatrix::new(
        &ETA_LABELS,
        vec![n * sums[0], n * sums[1], n * sums[1], n * sums[2]],
    ))
}

/// Fourth-order moments of the intensity PSF by quadrature.
pub fn intensity_moments<T: Real>(psf: &Psf<T>) -> IntensityMoments<T> {
    let grid = UniformGrid::for_shift(psf.rms_width(), T::zero(), T::zero());
    let floor = lit::<T>(INTENSITY_FLOOR);
    let moment = |f: &dyn Fn(&IntensityDerivs<T>) -> T| {
        grid.integrate(|x, y| {
            let d = IntensityDerivs::from_psf(psf.derivs(x, y));
            if d.i < floor {
                T::zero()
            } else {
                f(&d) / d.i
            }
        })
    };
    IntensityMoments {
        xxxx: moment(&|d| d.ixx * d.ixx),
        yyyy: moment(&|d| d.iyy * d.iyy),
        xyxy: moment(&|d| d.ixy * d.ixy),
        xxyy: moment(&|d| d.ixx * d.iyy),
        xxxy: moment(&|d| d.ixx * d.ixy),
        xyyy: moment(&|d| d.ixy * d.iyy),
    }
}

/// Direct-imaging FI to second order in the separation.
///
/// Substituting Λ ≈ I + (d_X²/8) I_xx + (d_X d_Y/4) I_xy + (d_Y²/8) I_yy gives
/// ∂Λ/∂d_X ≈ (d_X I_xx + d_Y I_xy)/4 and ∂Λ/∂d_Y ≈ (d_X I_xy + d_Y I_yy)/4, so
/// every entry is N/16 times a quadratic form in (d_X, d_Y) over the moments
/// T_abcd. For a circularly symmetric PSF this reduces to
/// J₁₁ = N/16 (d_X²κ₁ + d_Y²κ₂), J₂₂ = N/16 (d_X²κ₂ + d_Y²κ₁) and
/// J₁₂ = N/16 d_X d_Y (κ₁ − κ₂).
pub fn cfi_direct_small<T: Real>(psf: &Psf<T>, cfg: &SourceConfig<T>) -> Result<DirectFI<T>> {
    cfg.validate()?;
    let m = intensity_moments(psf);
    let (dx, dy) = cfg.separation;
    let c = cfg.mean_photons() / lit(16.0);
    let two = lit::<T>(2.0);
    let j11 = c * (dx * dx * m.xxxx + two * dx * dy * m.xxxy + dy * dy * m.xyxy);
    let j22 = c * (dx * dx * m.xyxy + two * dx * dy * m.xyyy + dy * dy * m.yyyy);
    let j12 = c * (dx * dx * m.xxxy + dx * dy * (m.xxyy + m.xyxy) + dy * dy * m.xyyy);
    let r = (dx * dx + dy * dy).sqrt();
    Ok(DirectFI {
        fi: FisherMatrix::new(&ETA_LABELS, vec![j11, j12, j12, j22]),
        kappa1: m.xxxx,
        kappa2: m.xyxy,
        expansion_valid: r <= lit::<T>(EXPANSION_VALID_SIGMAS) * psf.rms_width(),
    })
}
