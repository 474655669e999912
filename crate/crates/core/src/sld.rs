//! Numerical QFI from symmetric logarithmic derivatives.
//!
//! An independent route to the four-parameter QFI: the density operator is
//! projected onto an orthonormalized basis spanning the two source states and
//! their position derivatives (plus vacuum), diagonalized numerically, and the
//! SLDs are assembled from finite-difference derivatives of ρ. Nothing here
//! uses the closed-form functionals. Runs in `f64` regardless of `T`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fisher::{FisherMatrix, THETA_LABELS};
use crate::psf::Psf;
use crate::qbound::SourceConfig;
use crate::quad::UniformGrid;
use crate::scalar::Real;

/// Finite-difference step for ∂ρ/∂θ, in units of the PSF width.
pub const FD_STEP_SIGMAS: f64 = 1e-4;
/// Eigenvalue pairs with D_m + D_n at or below this are skipped.
pub const EIGEN_CUTOFF: f64 = 1e-14;
/// Largest Gram-matrix condition number tolerated for the retained basis.
pub const MAX_GRAM_CONDITION: f64 = 1e12;
/// Largest basis accepted (one-photon vectors).
pub const MAX_BASIS: usize = 64;
/// Number of analytic vectors: ψ₁, ψ₂ and their x/y position derivatives.
pub const ANALYTIC_BASIS: usize = 6;

/// Residual norms (relative, squared) below this are exact linear dependence.
const DEPENDENT_RTOL: f64 = 1e-14;

/// QFI over θ = (X̄, Ȳ, d_X, d_Y) computed from numerically built SLDs.
///
/// `basis_size` counts one-photon basis vectors: the six analytic vectors
/// first, then Hermite-Gaussian modes about the centroid. Vectors beyond the
/// analytic six lie outside the support of ρ and ∂ρ, so they must leave the
/// result unchanged; they exist as a convergence check.
pub fn qfi_numeric_oracle<T: Real>(
    cfg: &SourceConfig<T>,
    psf: &Psf<T>,
    basis_size: usize,
) -> Result<FisherMatrix<T>> {
    cfg.validate()?;
    if !(ANALYTIC_BASIS..=MAX_BASIS).contains(&basis_size) {
        return Err(Error::InvalidConfig(format!(
            "basis_size must be in {ANALYTIC_BASIS}..={MAX_BASIS}, got {basis_size}"
        )));
    }
    let theta = [
        cfg.centroid.0.as_f64(),
        cfg.centroid.1.as_f64(),
        cfg.separation.0.as_f64(),
        cfg.separation.1.as_f64(),
    ];
    let eps = [cfg.eps1.as_f64(), cfg.eps2.as_f64()];
    let sigma = psf.rms_width().as_f64();
    let grid =
        UniformGrid::<f64>::for_shift(sigma, theta[2], theta[3]).centered_at(theta[0], theta[1]);
    let ctx = Context { psf, grid };

    let basis = ctx.orthonormal_basis(theta, basis_size, sigma)?;
    let rho0 = ctx.density(&basis, theta, eps);
    let step = FD_STEP_SIGMAS * sigma;
    let drho: Vec<DMatrix<Complex64>> = (0..4)
        .map(|mu| {
            let mut plus = theta;
            let mut minus = theta;
            plus[mu] += step;
            minus[mu] -= step;
            (ctx.density(&basis, plus, eps) - ctx.density(&basis, minus, eps)) / Complex64::new(2.0 * step, 0.0)
        })
        .collect();

    let eig = rho0.symmetric_eigen();
    let d = eig.eigenvalues;
    let u = eig.eigenvectors;
    let dim = d.len();
    let slds: Vec<DMatrix<Complex64>> = drho
        .iter()
        .map(|dr| {
            let a = u.adjoint() * dr * &u;
            DMatrix::from_fn(dim, dim, |m, n| {
                let s = d[m] + d[n];
                if s > EIGEN_CUTOFF {
                    a[(m, n)] * (2.0 / s)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
        })
        .collect();

    let trials = cfg.trials as f64;
    let mut k = vec![T::zero(); 16];
    for mu in 0..4 {
        for nu in mu..4 {
            let prod = &slds[mu] * &slds[nu] + &slds[nu] * &slds[mu];
            let tr: f64 = (0..dim).map(|m| d[m] * prod[(m, m)].re).sum::<f64>() / 2.0;
            let v = T::lit(trials * tr);
            k[mu * 4 + nu] = v;
            k[nu * 4 + mu] = v;
        }
    }
    Ok(FisherMatrix::new(&THETA_LABELS, k))
}

struct Context<'a, T> {
    psf: &'a Psf<T>,
    grid: UniformGrid<f64>,
}

type Field = Vec<Complex64>;

impl<T: Real> Context<'_, T> {
    fn points(&self) -> usize {
        self.grid.n * self.grid.n
    }

    fn inner(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        let n = self.grid.n;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let wy = self.grid.weight(j);
            let mut row = Complex64::new(0.0, 0.0);
            for i in 0..n {
                row += a[j * n + i].conj() * b[j * n + i] * self.grid.weight(i);
            }
            acc += row * wy;
        }
        acc
    }

    fn to_c64(z: num_complex::Complex<T>) -> Complex64 {
        Complex64::new(z.re.as_f64(), z.im.as_f64())
    }

    /// ψ(r − p) on the grid.
    fn source_field(&self, p: (f64, f64)) -> Field {
        let n = self.grid.n;
        let mut out = Vec::with_capacity(self.points());
        for j in 0..n {
            let y = self.grid.y(j) - p.1;
            for i in 0..n {
                let x = self.grid.x(i) - p.0;
                out.push(Self::to_c64(self.psf.eval(T::lit(x), T::lit(y))));
            }
        }
        out
    }

    /// (ψ, ∂ψ/∂X_s, ∂ψ/∂Y_s) for a source at `p`; the position derivatives are −∇ψ.
    fn source_vectors(&self, p: (f64, f64)) -> [Field; 3] {
        let n = self.grid.n;
        let mut v = Vec::with_capacity(self.points());
        let mut gx = Vec::with_capacity(self.points());
        let mut gy = Vec::with_capacity(self.points());
        for j in 0..n {
            let y = self.grid.y(j) - p.1;
            for i in 0..n {
                let x = self.grid.x(i) - p.0;
                let d = self.psf.derivs(T::lit(x), T::lit(y));
                v.push(Self::to_c64(d.value));
                gx.push(-Self::to_c64(d.dx));
                gy.push(-Self::to_c64(d.dy));
            }
        }
        [v, gx, gy]
    }

    fn hermite_gauss(&self, q: usize, r: usize, sigma: f64) -> Field {
        let n = self.grid.n;
        let hx: Vec<f64> = (0..n)
            .map(|i| hermite_function(q, (self.grid.x(i) - self.grid.center.0) / (std::f64::consts::SQRT_2 * sigma)))
            .collect();
        let hy: Vec<f64> = (0..n)
            .map(|j| hermite_function(r, (self.grid.y(j) - self.grid.center.1) / (std::f64::consts::SQRT_2 * sigma)))
            .collect();
        let mut out = Vec::with_capacity(self.points());
        for yj in &hy {
            for xi in &hx {
                out.push(Complex64::new(xi * yj, 0.0));
            }
        }
        out
    }

    /// Modified Gram-Schmidt (with one re-orthogonalization pass).
    ///
    /// Exactly dependent vectors (e.g. ψ₁ = ψ₂ at zero separation) are dropped;
    /// nearly dependent ones make the basis ill-conditioned and are an error.
    fn orthonormal_basis(&self, theta: [f64; 4], size: usize, sigma: f64) -> Result<Vec<Field>> {
        let (p1, p2) = positions(theta);
        let [a0, a1, a2] = self.source_vectors(p1);
        let [b0, b1, b2] = self.source_vectors(p2);
        let mut raw = vec![a0, b0, a1, a2, b1, b2];
        let mut order = 0;
        while raw.len() < size {
            for q in 0..=order {
                if raw.len() < size {
                    raw.push(self.hermite_gauss(q, order - q, sigma));
                }
            }
            order += 1;
        }

        let mut basis: Vec<Field> = Vec::with_capacity(size);
        let mut worst = 1.0_f64;
        for mut v in raw {
            let norm0 = self.inner(&v, &v).re;
            if norm0 <= 0.0 {
                continue;
            }
            for _pass in 0..2 {
                for b in &basis {
                    let c = self.inner(b, &v);
                    for (vi, bi) in v.iter_mut().zip(b) {
                        *vi -= c * bi;
                    }
                }
            }
            let rel = self.inner(&v, &v).re / norm0;
            if rel < DEPENDENT_RTOL {
                continue;
            }
            worst = worst.min(rel);
            if 1.0 / rel > MAX_GRAM_CONDITION {
                return Err(Error::IllConditionedBasis { condition: 1.0 / rel });
            }
            let scale = 1.0 / self.inner(&v, &v).re.sqrt();
            for vi in v.iter_mut() {
                *vi *= scale;
            }
            basis.push(v);
        }
        debug_assert!(1.0 / worst <= MAX_GRAM_CONDITION);
        Ok(basis)
    }

    /// ρ(θ) in the basis {vac} ∪ basis.
    fn density(&self, basis: &[Field], theta: [f64; 4], eps: [f64; 2]) -> DMatrix<Complex64> {
        let (p1, p2) = positions(theta);
        let dim = basis.len() + 1;
        let mut rho = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        rho[(0, 0)] = Complex64::new(1.0 - eps[0] - eps[1], 0.0);
        for (p, e) in [(p1, eps[0]), (p2, eps[1])] {
            let field = self.source_field(p);
            let c: Vec<Complex64> = basis.iter().map(|b| self.inner(b, &field)).collect();
            for m in 0..basis.len() {
                for n in 0..basis.len() {
                    rho[(m + 1, n + 1)] += c[m] * c[n].conj() * e;
                }
            }
        }
        rho
    }
}

fn positions(theta: [f64; 4]) -> ((f64, f64), (f64, f64)) {
    let [xb, yb, dx, dy] = theta;
    ((xb - dx / 2.0, yb - dy / 2.0), (xb + dx / 2.0, yb + dy / 2.0))
}

/// Normalized Hermite function h_q(ξ) (orthonormal under dξ).
fn hermite_function(q: usize, xi: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-xi * xi / 2.0).exp();
    for k in 0..q {
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * xi * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_functions_orthonormal() {
        let h = 0.01;
        let xs: Vec<f64> = (-1200..=1200).map(|i| i as f64 * h).collect();
        for p in 0..5 {
            for q in 0..5 {
                let s: f64 = xs.iter().map(|&x| hermite_function(p, x) * hermite_function(q, x)).sum::<f64>() * h;
                let want = if p == q { 1.0 } else { 0.0 };
                assert!((s - want).abs() < 1e-10, "{p},{q}: {s}");
            }
        }
    }

    #[test]
    fn zero_photons_gives_zero_matrix() {
        let psf = Psf::gaussian(1.0).unwrap();
        let cfg = SourceConfig::centered(0.6, 0.4, 0.0, 1000);
        let k = qfi_numeric_oracle(&cfg, &psf, 6).unwrap();
        assert_eq!(k.max_abs(), 0.0);
    }

    #[test]
    fn basis_size_limits() {
        let psf = Psf::gaussian(1.0).unwrap();
        let cfg = SourceConfig::centered(0.6, 0.4, 1e-3, 1000);
        assert!(qfi_numeric_oracle(&cfg, &psf, 5).is_err());
        assert!(qfi_numeric_oracle(&cfg, &psf, 65).is_err());
    }
}

