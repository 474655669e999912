//! Four-parameter quantum Fisher information and quantum Cramér-Rao bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{FisherMatrix, THETA_LABELS};
use crate::psf::PsfFunctionals;
use crate::scalar::{lit, Real};

/// Two weak sources: centroid, separation and per-source arrival probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig<T> {
    /// (X̄, Ȳ)
    pub centroid: (T, T),
    /// (d_X, d_Y) = (X₂, Y₂) − (X₁, Y₁)
    pub separation: (T, T),
    pub eps1: T,
    pub eps2: T,
    /// Number of trials M.
    pub trials: u64,
}

impl<T: Real> SourceConfig<T> {
    /// Equal-strength sources centred on the origin.
    pub fn centered(dx: T, dy: T, eps_tot: T, trials: u64) -> Self {
        let half = eps_tot / lit(2.0);
        Self {
            centroid: (T::zero(), T::zero()),
            separation: (dx, dy),
            eps1: half,
            eps2: half,
            trials,
        }
    }

    pub fn eps_tot(&self) -> T {
        self.eps1 + self.eps2
    }

    /// N = M·ε_tot.
    pub fn mean_photons(&self) -> T {
        T::from_count(self.trials) * self.eps_tot()
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.centroid.0,
            self.centroid.1,
            self.separation.0,
            self.separation.1,
            self.eps1,
            self.eps2,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidConfig("non-finite source parameter".into()));
        }
        if self.eps1 < T::zero() || self.eps2 < T::zero() {
            return Err(Error::InvalidConfig("arrival probabilities must be non-negative".into()));
        }
        if self.eps_tot() > T::one() + T::epsilon() {
            return Err(Error::InvalidConfig(format!(
                "eps1 + eps2 = {} exceeds 1",
                self.eps_tot()
            )));
        }
        Ok(())
    }

    pub fn equal_strengths(&self) -> bool {
        let scale = self.eps1.abs().max(self.eps2.abs());
        (self.eps1 - self.eps2).abs() <= lit::<T>(1e-12) * scale
    }
}

/// Quantum Fisher information matrix over θ = (X̄, Ȳ, d_X, d_Y).
///
/// ```text
/// K = N [ 4(Δk_X² − γ_X²)   4(α − γ_Xγ_Y)      0      0     ]
///       [ 4(α − γ_Xγ_Y)     4(Δk_Y² − γ_Y²)    0      0     ]
///       [ 0                 0                  Δk_X²  α     ]
///       [ 0                 0                  α      Δk_Y² ]
/// ```
///
/// Only derived for equal source strengths; unequal ε₁, ε₂ are refused.
/// `f` must be evaluated at `cfg.separation`.
pub fn qfi<T: Real>(cfg: &SourceConfig<T>, f: &PsfFunctionals<T>) -> Result<FisherMatrix<T>> {
    cfg.validate()?;
    if !cfg.equal_strengths() {
        return Err(Error::UnequalStrengths {
            eps1: cfg.eps1.as_f64(),
            eps2: cfg.eps2.as_f64(),
        });
    }
    Ok(qfi_per_photon(f).scaled(cfg.mean_photons()))
}

/// QFI scaled by an explicit mean photon number.
pub fn qfi_photons<T: Real>(photons: T, f: &PsfFunctionals<T>) -> FisherMatrix<T> {
    qfi_per_photon(f).scaled(photons)
}

fn qfi_per_photon<T: Real>(f: &PsfFunctionals<T>) -> FisherMatrix<T> {
    let four = lit::<T>(4.0);
    let gx = f.gamma_x.re;
    let gy = f.gamma_y.re;
    let z = T::zero();
    let k11 = four * (f.dkx2 - gx * gx);
    let k12 = four * (f.alpha - gx * gy);
    let k22 = four * (f.dky2 - gy * gy);
    #[rustfmt::skip]
    let v = vec![
        k11, k12, z,      z,
        k12, k22, z,      z,
        z,   z,   f.dkx2, f.alpha,
        z,   z,   f.alpha, f.dky2,
    ];
    FisherMatrix::new(&THETA_LABELS, v)
}

/// Per-parameter variance lower bounds (the diagonal of an inverse information matrix).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceBounds<T> {
    pub labels: Vec<String>,
    pub variances: Vec<T>,
}

impl<T: Real> VarianceBounds<T> {
    pub fn get(&self, label: &str) -> Option<T> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.variances[i])
    }
}

/// diag(K⁻¹).
///
/// For a 4×4 matrix whose centroid block is singular but whose separation
/// block is not, only the separation bounds are returned (the blocks decouple).
pub fn qcr_bound<T: Real>(k: &FisherMatrix<T>) -> Result<VarianceBounds<T>> {
    let bounds = |m: &FisherMatrix<T>| -> Result<VarianceBounds<T>> {
        let inv = m.inverse()?;
        Ok(VarianceBounds {
            labels: m.labels().to_vec(),
            variances: inv.diagonal(),
        })
    };
    match bounds(k) {
        Ok(b) => Ok(b),
        Err(e) if k.dim() == 4 => {
            let decoupled = (0..2).all(|i| (2..4).all(|j| k.get(i, j) == T::zero()));
            let centroid_singular = k.sub_block(&[0, 1]).inverse().is_err();
            if decoupled && centroid_singular {
                bounds(&k.sub_block(&[2, 3]))
            } else {
                Err(e)
            }
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psf::Psf;

    fn gaussian_qfi(sigma: f64, dx: f64, dy: f64, n: f64) -> FisherMatrix<f64> {
        let psf = Psf::gaussian(sigma).unwrap();
        let f = psf.functionals(dx, dy).unwrap();
        qfi_photons(n, &f)
    }

    #[test]
    fn zero_separation_diag() {
        let k = gaussian_qfi(1.0, 0.0, 0.0, 1.0);
        assert_eq!(k.diagonal(), vec![1.0, 1.0, 0.25, 0.25]);
        assert_eq!(k.get(0, 2), 0.0);
    }

    #[test]
    fn zero_photons_zero_matrix() {
        let psf = Psf::gaussian(1.0).unwrap();
        let f = psf.functionals(0.4, 0.2).unwrap();
        let cfg = SourceConfig::centered(0.4, 0.2, 0.0, 1000);
        assert_eq!(qfi(&cfg, &f).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn unequal_strengths_refused() {
        let psf = Psf::gaussian(1.0).unwrap();
        let f = psf.functionals(0.4, 0.2).unwrap();
        let mut cfg = SourceConfig::centered(0.4, 0.2, 1e-3, 1000);
        cfg.eps1 = 2e-4;
        assert!(matches!(qfi(&cfg, &f), Err(Error::UnequalStrengths { .. })));
    }

    #[test]
    fn invalid_probabilities() {
        let mut cfg = SourceConfig::centered(0.0, 0.0, 1.0, 1);
        cfg.eps1 = 0.8;
        assert!(cfg.validate().is_err());
        cfg.eps1 = -0.1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mean_photons() {
        let cfg = SourceConfig::centered(0.0_f64, 0.0, 1e-3, 1000);
        assert!((cfg.mean_photons() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn separation_bounds_are_four_sigma_squared_over_n() {
        for &(s, n) in &[(1.0, 1.0), (0.7, 25.0), (2.0, 3.5)] {
            let b = qcr_bound(&gaussian_qfi(s, 0.9 * s, -0.3 * s, n)).unwrap();
            let want = 4.0 * s * s / n;
            assert!((b.get("dx").unwrap() - want).abs() < 1e-12 * want);
            assert!((b.get("dy").unwrap() - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn diagonal_bounds() {
        let k = FisherMatrix::from_diagonal(&THETA_LABELS, &[1.0, 1.0, 0.25, 0.25]);
        assert_eq!(qcr_bound(&k).unwrap().variances, vec![1.0, 1.0, 4.0, 4.0]);
    }

    #[test]
    fn singular_centroid_block_falls_back_to_separation() {
        let k = FisherMatrix::from_diagonal(&THETA_LABELS, &[0.0, 0.0, 0.5, 0.25]);
        let b = qcr_bound(&k).unwrap();
        assert_eq!(b.labels, vec!["dx".to_string(), "dy".to_string()]);
        assert_eq!(b.variances, vec![2.0, 4.0]);
    }

    #[test]
    fn singular_separation_block_is_an_error() {
        let k = FisherMatrix::from_diagonal(&THETA_LABELS, &[1.0, 1.0, 0.0, 0.25]);
        assert!(matches!(qcr_bound(&k), Err(Error::Singular { .. })));
    }

    #[test]
    fn f32_qfi() {
        let psf = Psf::<f32>::gaussian(1.0).unwrap();
        let k = qfi_photons(1.0f32, &psf.functionals(0.0, 0.0).unwrap());
        assert_eq!(k.diagonal(), vec![1.0f32, 1.0, 0.25, 0.25]);
    }
}
