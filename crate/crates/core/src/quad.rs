//! Tensor-product trapezoidal quadrature on square uniform grids.

use crate::scalar::{lit, KahanSum, Real};

/// Default number of grid points per axis.
pub const DEFAULT_POINTS: usize = 513;

/// Half-width of the default grid in units of the PSF's RMS width.
pub const DEFAULT_HALF_WIDTH_SIGMAS: f64 = 8.0;

/// Square grid `[-W, W]²` (optionally shifted) with `n` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid<T> {
    pub center: (T, T),
    pub half_width: T,
    pub n: usize,
}

impl<T: Real> UniformGrid<T> {
    pub fn new(half_width: T, n: usize) -> Self {
        assert!(n >= 2, "grid needs at least two points per axis");
        Self {
            center: (T::zero(), T::zero()),
            half_width,
            n,
        }
    }

    /// Grid covering a PSF of RMS width `sigma_eff` displaced by up to `±shift/2`.
    pub fn for_shift(sigma_eff: T, dx: T, dy: T) -> Self {
        let w = lit::<T>(DEFAULT_HALF_WIDTH_SIGMAS) * sigma_eff + dx.abs().max(dy.abs()) / lit(2.0);
        Self::new(w, DEFAULT_POINTS)
    }

    pub fn centered_at(mut self, x: T, y: T) -> Self {
        self.center = (x, y);
        self
    }

    #[inline]
    pub fn spacing(&self) -> T {
        lit::<T>(2.0) * self.half_width / T::from_count((self.n - 1) as u64)
    }

    /// Coordinate of the `i`-th node along an axis, relative to the center.
    #[inline]
    pub fn node(&self, i: usize) -> T {
        -self.half_width + T::from_count(i as u64) * self.spacing()
    }

    #[inline]
    pub fn x(&self, i: usize) -> T {
        self.center.0 + self.node(i)
    }

    #[inline]
    pub fn y(&self, j: usize) -> T {
        self.center.1 + self.node(j)
    }

    /// One-dimensional trapezoid weight of node `i` (including the spacing).
    #[inline]
    pub fn weight(&self, i: usize) -> T {
        let h = self.spacing();
        if i == 0 || i + 1 == self.n {
            h / lit(2.0)
        } else {
            h
        }
    }

    /// Integrates `f(x, y)` over the grid. Rows are summed with compensation.
    pub fn integrate<F>(&self, mut f: F) -> T
    where
        F: FnMut(T, T) -> T,
    {
        let mut total = KahanSum::new();
        for j in 0..self.n {
            let y = self.y(j);
            let wy = self.weight(j);
            let mut row = KahanSum::new();
            for i in 0..self.n {
                row.add(self.weight(i) * f(self.x(i), y));
            }
            total.add(wy * row.value());
        }
        total.value()
    }

    /// Integrates a function already sampled on the grid (row-major, y outer).
    pub fn integrate_samples(&self, values: &[T]) -> T {
        debug_assert_eq!(values.len(), self.n * self.n);
        let mut total = KahanSum::new();
        for j in 0..self.n {
            let mut row = KahanSum::new();
            for i in 0..self.n {
                row.add(self.weight(i) * values[j * self.n + i]);
            }
            total.add(self.weight(j) * row.value());
        }
        total.value()
    }
}
