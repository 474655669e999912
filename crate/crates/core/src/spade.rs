//! Hermite-Gaussian mode sorting (SPADE) for the circular Gaussian PSF.
//!
//! A detected photon lands in mode (q, r) with probability
//! Poisson(q; Q)·Poisson(r; R), Q = d_X²/16σ², R = d_Y²/16σ².

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::fisher::{FisherMatrix, ETA_LABELS};
use crate::scalar::{lit, Real};

/// Mode indices above this use log-gamma.
pub const DIRECT_FACTORIAL_MAX: u64 = 20;

/// Mode indices of every detected photon plus their sums H_X, H_Y.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpadeRecord {
    pub modes: Vec<(u64, u64)>,
    pub hx: u64,
    pub hy: u64,
}

impl SpadeRecord {
    pub fn from_modes(modes: Vec<(u64, u64)>) -> Self {
        let hx = modes.iter().map(|m| m.0).sum();
        let hy = modes.iter().map(|m| m.1).sum();
        Self { modes, hx, hy }
    }

    pub fn photons(&self) -> u64 {
        self.modes.len() as u64
    }
}

/// Mean mode index Q = d²/16σ² along one axis.
pub fn mode_mean<T: Real>(d: T, sigma: T) -> T {
    d * d / (lit::<T>(16.0) * sigma * sigma)
}

/// Poisson(k; λ), with λ = 0 giving the point mass at 0.
pub fn poisson_pmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k <= DIRECT_FACTORIAL_MAX {
        let mut term = (-lambda).exp();
        for i in 1..=k {
            term *= lambda / i as f64;
        }
        term
    } else {
        (k as f64 * lambda.ln() - lambda - libm::lgamma(k as f64 + 1.0)).exp()
    }
}

/// P(q, r) = ε_tot Poisson(q; Q) Poisson(r; R).
pub fn spade_prob<T: Real>(q: u64, r: u64, d: (T, T), sigma: T, eps_tot: T) -> T {
    let qm = mode_mean(d.0, sigma).as_f64();
    let rm = mode_mean(d.1, sigma).as_f64();
    eps_tot * T::lit(poisson_pmf(q, qm) * poisson_pmf(r, rm))
}

/// diag(ε_tot/4σ², ε_tot/4σ²), whatever the separation.
pub fn spade_fi<T: Real>(sigma: T, eps_tot: T) -> FisherMatrix<T> {
    let v = eps_tot / (lit::<T>(4.0) * sigma * sigma);
    FisherMatrix::from_diagonal(&ETA_LABELS, &[v, v])
}

fn poisson_draw<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(lambda).expect("finite positive Poisson mean");
    dist.sample(rng) as u64
}

/// Sorts `photons` detections into modes, one Poisson pair per photon.
pub fn spade_sample<T: Real, R: Rng + ?Sized>(
    d: (T, T),
    sigma: T,
    photons: u64,
    rng: &mut R,
) -> SpadeRecord {
    let qm = mode_mean(d.0, sigma).as_f64();
    let rm = mode_mean(d.1, sigma).as_f64();
    let modes = (0..photons)
        .map(|_| {
            let q = poisson_draw(qm, rng);
            let r = poisson_draw(rm, rng);
            (q, r)
        })
        .collect();
    SpadeRecord::from_modes(modes)
}

/// Draws only (H_X, H_Y), which are Poisson(L·Q) and Poisson(L·R).
pub fn spade_sample_totals<T: Real, R: Rng + ?Sized>(
    d: (T, T),
    sigma: T,
    photons: u64,
    rng: &mut R,
) -> (u64, u64) {
    let l = photons as f64;
    let hx = poisson_draw(l * mode_mean(d.0, sigma).as_f64(), rng);
    let hy = poisson_draw(l * mode_mean(d.1, sigma).as_f64(), rng);
    (hx, hy)
}

/// (4σ√(H_X/L), 4σ√(H_Y/L)) from the mode sums.
pub fn spade_ml_totals<T: Real>(hx: u64, hy: u64, photons: u64, sigma: T) -> (T, T) {
    let four_sigma = lit::<T>(4.0) * sigma;
    let l = T::from_count(photons);
    (
        four_sigma * (T::from_count(hx) / l).sqrt(),
        four_sigma * (T::from_count(hy) / l).sqrt(),
    )
}

/// Maximum-likelihood (d̂_X, d̂_Y).
pub fn spade_ml<T: Real>(rec: &SpadeRecord, sigma: T) -> (T, T) {
    spade_ml_totals(rec.hx, rec.hy, rec.photons(), sigma)
}
