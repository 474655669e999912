//! Two-stage SLIVER interferometer: port probabilities, Fisher information,
//! conditional outcome sampling and the maximum-likelihood estimator.
//!
//! Port 1 is antisymmetric about the y axis, port 2 symmetric about y and
//! antisymmetric about x, port 3 symmetric about both. For equal or unequal
//! strengths the per-source contributions coincide because the sources are
//! mirror images through the centroid, so only ε_tot = ε₁ + ε₂ enters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{FisherMatrix, ETA_LABELS};
use crate::psf::{OverlapGradients, Psf};
use crate::qbound::SourceConfig;
use crate::scalar::{lit, Real};

/// Port probabilities below this fraction of ε_tot drop out of the FI sum.
pub const ZERO_GUARD: f64 = 1e-15;

/// Outcome probabilities of one trial: no click, then ports 1 to 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliverProbs<T> {
    pub p0: T,
    pub p1: T,
    pub p2: T,
    pub p3: T,
}

impl<T: Real> SliverProbs<T> {
    /// p1 + p2 + p3.
    pub fn detected(&self) -> T {
        self.p1 + self.p2 + self.p3
    }
}

/// Click counts G⁽¹⁾, G⁽²⁾, G⁽³⁾ over L detected photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliverRecord {
    pub g1: u64,
    pub g2: u64,
    pub g3: u64,
    pub photons: u64,
}

impl SliverRecord {
    pub fn new(g1: u64, g2: u64, g3: u64) -> Self {
        Self {
            g1,
            g2,
            g3,
            photons: g1 + g2 + g3,
        }
    }
}

fn check_inputs<T: Real>(psf: &Psf<T>, cfg: &SourceConfig<T>) -> Result<()> {
    cfg.validate()?;
    psf.check_reflection_symmetry()?;
    if cfg.centroid.0 != T::zero() || cfg.centroid.1 != T::zero() {
        return Err(Error::InvalidConfig(
            "SLIVER requires the centroid on the interferometer axis".into(),
        ));
    }
    Ok(())
}

fn probs_from<T: Real>(eps: T, g: &OverlapGradients<T>) -> SliverProbs<T> {
    let one = T::one();
    let half = eps / lit(2.0);
    let quarter = eps / lit(4.0);
    let p1 = (half * (one - g.delta_x)).max(T::zero());
    let p2 = (quarter * (one + g.delta_x - g.delta_y - g.delta)).max(T::zero());
    let p3 = (quarter * (one + g.delta_x + g.delta_y + g.delta)).max(T::zero());
    SliverProbs {
        p0: one - eps,
        p1,
        p2,
        p3,
    }
}

/// Port probabilities for the configured source pair.
pub fn sliver_probs<T: Real>(psf: &Psf<T>, cfg: &SourceConfig<T>) -> Result<SliverProbs<T>> {
    check_inputs(psf, cfg)?;
    let (dx, dy) = cfg.separation;
    Ok(probs_from(cfg.eps_tot(), &psf.overlap_gradients(dx, dy)?))
}

/// Fisher information over η = (d_X, d_Y).
///
/// The circular Gaussian uses the closed form
/// J₁₁ = ε (∂δ_x/∂d_X)²/(1 − δ_x²), J₂₂ = ε (1 + δ_x)/2 (∂δ_y/∂d_Y)²/(1 − δ_y²),
/// J₁₂ = 0, continued to its limit ε/4σ² on the axes. Other PSFs go through
/// [`sliver_fi_general`].
pub fn sliver_fi<T: Real>(psf: &Psf<T>, cfg: &SourceConfig<T>) -> Result<FisherMatrix<T>> {
    check_inputs(psf, cfg)?;
    let Some(sigma) = psf.gaussian_sigma() else {
        return sliver_fi_general(psf, cfg);
    };
    let eps = cfg.eps_tot();
    let four_s2 = lit::<T>(4.0) * sigma * sigma;
    let (dx, dy) = cfg.separation;
    // (∂δ/∂d)²/(1 − δ²) = (1/4σ²) u/(eᵘ − 1), u = d²/4σ²
    let ratio = |d: T| {
        let u = d * d / four_s2;
        let r = if u == T::zero() { T::one() } else { u / u.exp_m1() };
        r / four_s2
    };
    let delta_x = (-dx * dx / (lit::<T>(2.0) * four_s2)).exp();
    let j11 = eps * ratio(dx);
    let j22 = eps * (T::one() + delta_x) / lit(2.0) * ratio(dy);
    Ok(FisherMatrix::from_diagonal(&ETA_LABELS, &[j11, j22]))
}

/// Fisher information from the port probabilities and overlap derivatives,
/// valid for any PSF with both reflection symmetries:
///
/// ```text
/// J₁₁ = (ε/2)(δ_x′)²/(1 − δ_x) + (ε/4)(δ_x′ − ∂_Xδ)²/(1 + δ_x − δ_y − δ)
///                              + (ε/4)(δ_x′ + ∂_Xδ)²/(1 + δ_x + δ_y + δ)
/// J₂₂ = (ε/4)(δ_y′ + ∂_Yδ)² [1/(1 + δ_x − δ_y − δ) + 1/(1 + δ_x + δ_y + δ)]
/// ```
///
/// Ports with probability below [`ZERO_GUARD`]·ε contribute nothing, so the
/// matrix is exactly zero in a component whose separation is exactly zero.
pub fn sliver_fi_general<T: Real>(
    psf: &Psf<T>,
    cfg: &SourceConfig<T>,
) -> Result<FisherMatrix<T>> {
    check_inputs(psf, cfg)?;
    let eps = cfg.eps_tot();
    let (dx, dy) = cfg.separation;
    let g = psf.overlap_gradients(dx, dy)?;
    let p = probs_from(eps, &g);
    let half = eps / lit(2.0);
    let quarter = eps / lit(4.0);
    // (∂p/∂d_X, ∂p/∂d_Y) per port
    let grads = [
        (p.p1, -half * g.ddelta_x_ddx, T::zero()),
        (
            p.p2,
            quarter * (g.ddelta_x_ddx - g.ddelta_ddx),
            -quarter * (g.ddelta_y_ddy + g.ddelta_ddy),
        ),
        (
            p.p3,
            quarter * (g.ddelta_x_ddx + g.ddelta_ddx),
            quarter * (g.ddelta_y_ddy + g.ddelta_ddy),
        ),
    ];
    let guard = lit::<T>(ZERO_GUARD) * eps;
    let (mut j11, mut j12, mut j22) = (T::zero(), T::zero(), T::zero());
    for &(pr, ax, ay) in &grads {
        if pr <= guard {
            continue;
        }
        j11 = j11 + ax * ax / pr;
        j12 = j12 + ax * ay / pr;
        j22 = j22 + ay * ay / pr;
    }
    Ok(FisherMatrix::new(&ETA_LABELS, vec![j11, j12, j12, j22]))
}

/// Draws `photons` detections from (p1, p2, p3)/ε_tot.
///
/// Each photon consumes one 64-bit word, mapped to [0, 1) and inverted
/// through the cumulative distribution.
pub fn sliver_sample<T: Real, R: Rng + ?Sized>(
    probs: &SliverProbs<T>,
    photons: u64,
    rng: &mut R,
) -> Result<SliverRecord> {
    let p = [probs.p1.as_f64(), probs.p2.as_f64(), probs.p3.as_f64()];
    let total: f64 = p.iter().sum();
    if !(total > 0.0) || p.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::ZeroConditionalMass);
    }
    let c1 = p[0] / total;
    let c2 = (p[0] + p[1]) / total;
    let last = if p[2] > 0.0 {
        2
    } else if p[1] > 0.0 {
        1
    } else {
        0
    };
    let mut g = [0u64; 3];
    for _ in 0..photons {
        let u = unit_interval(rng.next_u64());
        let k = if u < c1 {
            0
        } else if u < c2 {
            1
        } else {
            2
        };
        g[k.min(last)] += 1;
    }
    Ok(SliverRecord::new(g[0], g[1], g[2]))
}

/// Top 53 bits of `bits` as a double in [0, 1).
pub(crate) fn unit_interval(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Maximum-likelihood (d̂_X, d̂_Y) for the circular Gaussian PSF.
///
/// An estimate whose logarithm argument is not positive is set to 2σ, as is
/// d̂_Y when every photon went to port 1.
pub fn sliver_ml<T: Real>(rec: &SliverRecord, sigma: T) -> (T, T) {
    let two_sigma = lit::<T>(2.0) * sigma;
    let invert = |g: u64, n: u64| -> T {
        if n == 0 {
            return two_sigma;
        }
        let r = lit::<T>(2.0) * T::from_count(g) / T::from_count(n);
        if r < T::one() {
            two_sigma * (lit::<T>(-2.0) * (-r).ln_1p()).sqrt()
        } else {
            two_sigma
        }
    };
    let dx = invert(rec.g1, rec.photons);
    let dy = invert(rec.g2, rec.photons - rec.g1.min(rec.photons));
    (dx, dy)
}
