//! Conditioned Monte-Carlo MSE sweeps for the SLIVER and SPADE estimators.
//!
//! Each experiment fixes the number L of detected photons. Runs are split
//! into fixed-size chunks that are processed in parallel and then reduced in
//! chunk order with compensated sums, so results do not depend on the number
//! of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psf::Psf;
use crate::qbound::SourceConfig;
use crate::rng::substream;
use crate::scalar::{lit, KahanSum, Real};
use crate::sliver::{sliver_fi_general, sliver_ml, sliver_probs, sliver_sample};
use crate::spade::{spade_ml_totals, spade_sample_totals};

/// Runs per parallel work item.
pub const CHUNK_RUNS: u64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Sliver,
    Spade,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCConfig<T> {
    pub scheme: Scheme,
    pub sigma: T,
    pub grid_dx: Vec<T>,
    pub grid_dy: Vec<T>,
    /// Detected photons per experiment (L).
    pub photons: u64,
    pub runs: u64,
    pub seed: u64,
}

impl<T: Real> MCConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > T::zero()) || !self.sigma.is_finite() {
            return Err(Error::InvalidConfig("sigma must be positive and finite".into()));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if self.photons == 0 {
            return Err(Error::InvalidConfig("photon count L must be at least 1".into()));
        }
        if self.grid_dx.is_empty() || self.grid_dy.is_empty() {
            return Err(Error::InvalidConfig("separation grid is empty".into()));
        }
        let bad = self
            .grid_dx
            .iter()
            .chain(&self.grid_dy)
            .any(|v| !(*v >= T::zero()) || !v.is_finite());
        if bad {
            return Err(Error::InvalidConfig(
                "grid separations must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Grid points, d_X outer and d_Y inner.
    pub fn points(&self) -> Vec<(T, T)> {
        self.grid_dx
            .iter()
            .flat_map(|&dx| self.grid_dy.iter().map(move |&dy| (dx, dy)))
            .collect()
    }
}

/// Classical bounds of the scheme and the quantum bound, all at L photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrbReference<T> {
    pub crb_dx: T,
    pub crb_dy: T,
    pub qcrb: T,
}

/// Statistics at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCRow<T> {
    pub dx: T,
    pub dy: T,
    pub mse_dx: T,
    pub mse_dy: T,
    pub bias_dx: T,
    pub bias_dy: T,
    /// Standard error of `mse_dx`.
    pub stderr_mse_dx: T,
    pub stderr_mse_dy: T,
    pub crb_dx: T,
    pub crb_dy: T,
    pub qcrb: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCResult<T> {
    pub scheme: Scheme,
    pub sigma: T,
    pub photons: u64,
    pub runs: u64,
    pub seed: u64,
    pub rows: Vec<MCRow<T>>,
}

/// Compensated sums of e, e², e⁴ for both components.
#[derive(Debug, Clone, Copy, Default)]
struct Moments<T> {
    e: [KahanSum<T>; 2],
    e2: [KahanSum<T>; 2],
    e4: [KahanSum<T>; 2],
}

impl<T: Real> Moments<T> {
    fn push(&mut self, err: [T; 2]) {
        for (k, &e) in err.iter().enumerate() {
            let sq = e * e;
            self.e[k].add(e);
            self.e2[k].add(sq);
            self.e4[k].add(sq * sq);
        }
    }

    fn merge(&mut self, other: &Self) {
        for k in 0..2 {
            self.e[k].merge(&other.e[k]);
            self.e2[k].merge(&other.e2[k]);
            self.e4[k].merge(&other.e4[k]);
        }
    }

    /// (mse, bias, stderr of mse) for component `k`.
    fn summary(&self, k: usize, runs: u64) -> (T, T, T) {
        let n = T::from_count(runs);
        let mse = self.e2[k].value() / n;
        let bias = self.e[k].value() / n;
        let var_sq = (self.e4[k].value() / n - mse * mse).max(T::zero());
        let stderr = if runs > 1 {
            (var_sq * n / (n - T::one())).sqrt() / n.sqrt()
        } else {
            T::zero()
        };
        (mse, bias, stderr)
    }
}

/// Classical and quantum bounds at `point` for L detected photons.
///
/// The conditional information is the single-photon information times L.
/// A SLIVER component carries no information where its separation is
/// exactly zero; its bound is then `+∞`.
pub fn crb_reference<T: Real>(cfg: &MCConfig<T>, point: (T, T)) -> Result<CrbReference<T>> {
    let l = T::from_count(cfg.photons);
    let qcrb = lit::<T>(4.0) * cfg.sigma * cfg.sigma / l;
    match cfg.scheme {
        Scheme::Spade => Ok(CrbReference {
            crb_dx: qcrb,
            crb_dy: qcrb,
            qcrb,
        }),
        Scheme::Sliver => {
            let psf = Psf::gaussian(cfg.sigma)?;
            let src = SourceConfig::centered(point.0, point.1, T::one(), 1);
            let j = sliver_fi_general(&psf, &src)?.scaled(l);
            let (a, b, c) = (j.get(0, 0), j.get(1, 1), j.get(0, 1));
            let det = a * b - c * c;
            let tiny = lit::<T>(crate::fisher::SINGULAR_RTOL) * (a + b) * (a + b);
            let (crb_dx, crb_dy) = if a > T::zero() && b > T::zero() && det > tiny {
                (b / det, a / det)
            } else {
                let inv = |v: T| if v > T::zero() { T::one() / v } else { T::infinity() };
                (inv(a), inv(b))
            };
            Ok(CrbReference {
                crb_dx,
                crb_dy,
                qcrb,
            })
        }
    }
}

fn run_chunk<T: Real>(
    cfg: &MCConfig<T>,
    psf: &Psf<T>,
    point_index: u64,
    point: (T, T),
    runs: std::ops::Range<u64>,
) -> Result<Moments<T>> {
    let mut m = Moments::default();
    match cfg.scheme {
        Scheme::Sliver => {
            let probs = sliver_probs(psf, &SourceConfig::centered(point.0, point.1, T::one(), 1))?;
            for run in runs {
                let mut rng = substream(cfg.seed, point_index, run);
                let rec = sliver_sample(&probs, cfg.photons, &mut rng)?;
                let (ex, ey) = sliver_ml(&rec, cfg.sigma);
                m.push([ex - point.0, ey - point.1]);
            }
        }
        Scheme::Spade => {
            for run in runs {
                let mut rng = substream(cfg.seed, point_index, run);
                let (hx, hy) = spade_sample_totals(point, cfg.sigma, cfg.photons, &mut rng);
                let (ex, ey) = spade_ml_totals(hx, hy, cfg.photons, cfg.sigma);
                m.push([ex - point.0, ey - point.1]);
            }
        }
    }
    Ok(m)
}

/// Runs the sweep over every grid point.
pub fn run_mc<T: Real>(cfg: &MCConfig<T>) -> Result<MCResult<T>> {
    cfg.validate()?;
    let psf = Psf::gaussian(cfg.sigma)?;
    let points = cfg.points();
    let chunks_per_point = cfg.runs.div_ceil(CHUNK_RUNS);
    let tasks: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..chunks_per_point).map(move |c| (p, c)))
        .collect();
    let partial: Vec<Moments<T>> = tasks
        .par_iter()
        .map(|&(p, c)| {
            let start = c * CHUNK_RUNS;
            let end = (start + CHUNK_RUNS).min(cfg.runs);
            run_chunk(cfg, &psf, p as u64, points[p], start..end)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(points.len());
    for (p, chunk) in partial.chunks(chunks_per_point as usize).enumerate() {
        let mut m = Moments::default();
        for part in chunk {
            m.merge(part);
        }
        let (mse_dx, bias_dx, stderr_mse_dx) = m.summary(0, cfg.runs);
        let (mse_dy, bias_dy, stderr_mse_dy) = m.summary(1, cfg.runs);
        let crb = crb_reference(cfg, points[p])?;
        rows.push(MCRow {
            dx: points[p].0,
            dy: points[p].1,
            mse_dx,
            mse_dy,
            bias_dx,
            bias_dy,
            stderr_mse_dx,
            stderr_mse_dy,
            crb_dx: crb.crb_dx,
            crb_dy: crb.crb_dy,
            qcrb: crb.qcrb,
        });
    }
    Ok(MCResult {
        scheme: cfg.scheme,
        sigma: cfg.sigma,
        photons: cfg.photons,
        runs: cfg.runs,
        seed: cfg.seed,
        rows,
    })
}
