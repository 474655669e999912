//! Point-spread functions and the overlap/derivative functionals built from them.
//!
//! Two kinds are supported: the circular Gaussian, for which every functional
//! has a closed form, and a sampled complex amplitude on a uniform square
//! grid. Sampled PSFs are interpolated with a six-point Lagrange stencil per
//! axis; node derivatives use sixth-order central differences.

use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::quad::UniformGrid;
use crate::scalar::{lit, KahanSum, Real};

/// Relative deviation tolerated before a sampled PSF is treated as asymmetric.
pub const SYMMETRY_RTOL: f64 = 1e-6;
/// Normalization error above which a sampled PSF is rejected outright.
pub const NORMALIZATION_REJECT: f64 = 1e-3;
/// Quadrature tolerance for sampled-PSF overlaps (interpolation and truncation).
pub const QUADRATURE_TOL: f64 = 1e-6;
/// Imaginary parts of overlaps/γ below this are treated as zero.
pub const IMAG_ATOL: f64 = 1e-8;

/// Complex amplitude and its first and second partial derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsfDerivs<T> {
    pub value: Complex<T>,
    pub dx: Complex<T>,
    pub dy: Complex<T>,
    pub dxx: Complex<T>,
    pub dxy: Complex<T>,
    pub dyy: Complex<T>,
}

/// Overlaps and derivative moments entering the Fisher-information formulas.
///
/// `delta*` and `gamma_*` are kept complex; for inversion-symmetric PSFs they
/// are real up to quadrature error (γ is the gradient of the real function δ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsfFunctionals<T> {
    /// ∫∫ |∂ψ/∂x|²
    pub dkx2: T,
    /// ∫∫ |∂ψ/∂y|²
    pub dky2: T,
    /// ∫∫ ψ*(x − d_X, y − d_Y) ∂ψ/∂x
    pub gamma_x: Complex<T>,
    /// ∫∫ ψ*(x − d_X, y − d_Y) ∂ψ/∂y
    pub gamma_y: Complex<T>,
    /// Re ∫∫ ∂ψ*/∂x ∂ψ/∂y
    pub alpha: T,
    /// ⟨ψ₁|ψ₂⟩ at separation (d_X, d_Y)
    pub delta: Complex<T>,
    /// overlap at separation (d_X, 0)
    pub delta_x: Complex<T>,
    /// overlap at separation (0, d_Y)
    pub delta_y: Complex<T>,
}

/// The three overlaps used by SLIVER and their separation derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapGradients<T> {
    pub delta: T,
    pub delta_x: T,
    pub delta_y: T,
    /// ∂δ/∂d_X
    pub ddelta_ddx: T,
    /// ∂δ/∂d_Y
    pub ddelta_ddy: T,
    /// ∂δ_x/∂d_X
    pub ddelta_x_ddx: T,
    /// ∂δ_y/∂d_Y
    pub ddelta_y_ddy: T,
}

/// Inversion-symmetric point-spread function.
#[derive(Debug, Clone, PartialEq)]
pub enum Psf<T> {
    /// ψ(x,y) = (2πσ²)^{-1/2} exp(−(x²+y²)/4σ²)
    GaussianCircular { sigma: T },
    Sampled(SampledPsf<T>),
}

impl<T: Real> Psf<T> {
    pub fn gaussian(sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Psf::GaussianCircular { sigma })
    }

    pub fn sampled(half_width: T, n: usize, values: Vec<Complex<T>>) -> Result<Self> {
        SampledPsf::new(half_width, n, values).map(Psf::Sampled)
    }

    /// Samples `f` on a `n × n` grid over `[-half_width, half_width]²`.
    pub fn sampled_from_fn<F>(half_width: T, n: usize, f: F) -> Result<Self>
    where
        F: Fn(T, T) -> Complex<T>,
    {
        let grid = UniformGrid::new(half_width, n);
        let mut values = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self::sampled(half_width, n, values)
    }

    /// Gaussian width when this is the closed-form kind.
    pub fn gaussian_sigma(&self) -> Option<T> {
        match self {
            Psf::GaussianCircular { sigma } => Some(*sigma),
            Psf::Sampled(_) => None,
        }
    }

    /// RMS width of the intensity |ψ|², taking the larger of the two axes.
    pub fn rms_width(&self) -> T {
        match self {
            Psf::GaussianCircular { sigma } => *sigma,
            Psf::Sampled(s) => s.rms_width,
        }
    }

    pub fn eval(&self, x: T, y: T) -> Complex<T> {
        match self {
            Psf::GaussianCircular { sigma } => Complex::new(gaussian_amp(*sigma, x, y), T::zero()),
            Psf::Sampled(s) => s.interpolate(x, y).value,
        }
    }

    pub fn derivs(&self, x: T, y: T) -> PsfDerivs<T> {
        match self {
            Psf::GaussianCircular { sigma } => {
                let s2 = *sigma * *sigma;
                let v = gaussian_amp(*sigma, x, y);
                let two = lit::<T>(2.0);
                let four = lit::<T>(4.0);
                let re = |r: T| Complex::new(r, T::zero());
                PsfDerivs {
                    value: re(v),
                    dx: re(-x / (two * s2) * v),
                    dy: re(-y / (two * s2) * v),
                    dxx: re((x * x / (four * s2 * s2) - T::one() / (two * s2)) * v),
                    dxy: re(x * y / (four * s2 * s2) * v),
                    dyy: re((y * y / (four * s2 * s2) - T::one() / (two * s2)) * v),
                }
            }
            Psf::Sampled(s) => s.interpolate(x, y),
        }
    }

    /// Fails when ψ(x,y) ≠ ψ(−x,−y) beyond [`SYMMETRY_RTOL`].
    pub fn check_inversion_symmetry(&self) -> Result<()> {
        match self {
            Psf::GaussianCircular { .. } => Ok(()),
            Psf::Sampled(s) => check_sym("inversion", s.inversion_asymmetry),
        }
    }

    /// Fails unless ψ is reflection-symmetric about both axes.
    pub fn check_reflection_symmetry(&self) -> Result<()> {
        match self {
            Psf::GaussianCircular { .. } => Ok(()),
            Psf::Sampled(s) => check_sym("reflection", s.reflection_asymmetry),
        }
    }

    /// δ(dx, dy) = ∫∫ ψ*(x,y) ψ(x − dx, y − dy).
    pub fn overlap_delta(&self, dx: T, dy: T) -> Result<Complex<T>> {
        match self {
            Psf::GaussianCircular { sigma } => {
                Ok(Complex::new(gaussian_delta(*sigma, dx) * gaussian_delta(*sigma, dy), T::zero()))
            }
            Psf::Sampled(s) => {
                s.check_resolution()?;
                let shifted = s.shifted(dx, dy)?;
                Ok(s.inner(&s.values, &shifted))
            }
        }
    }

    /// All eight functionals at separation `(dx, dy)`.
    pub fn functionals(&self, dx: T, dy: T) -> Result<PsfFunctionals<T>> {
        self.check_inversion_symmetry()?;
        match self {
            Psf::GaussianCircular { sigma } => {
                let s2 = *sigma * *sigma;
                let dxn = gaussian_delta(*sigma, dx);
                let dyn_ = gaussian_delta(*sigma, dy);
                let delta = dxn * dyn_;
                let four = lit::<T>(4.0);
                let c = |r: T| Complex::new(r, T::zero());
                Ok(PsfFunctionals {
                    dkx2: T::one() / (four * s2),
                    dky2: T::one() / (four * s2),
                    gamma_x: c(-dx / (four * s2) * delta),
                    gamma_y: c(-dy / (four * s2) * delta),
                    alpha: T::zero(),
                    delta: c(delta),
                    delta_x: c(dxn),
                    delta_y: c(dyn_),
                })
            }
            Psf::Sampled(s) => {
                s.check_resolution()?;
                let shifted = s.shifted(dx, dy)?;
                let delta = s.inner(&s.values, &shifted);
                let gamma_x = s.inner(&shifted, &s.grad_x);
                let gamma_y = s.inner(&shifted, &s.grad_y);
                let delta_x = s.inner(&s.values, &s.shifted(dx, T::zero())?);
                let delta_y = s.inner(&s.values, &s.shifted(T::zero(), dy)?);
                Ok(PsfFunctionals {
                    dkx2: s.dkx2,
                    dky2: s.dky2,
                    gamma_x,
                    gamma_y,
                    alpha: s.alpha,
                    delta,
                    delta_x,
                    delta_y,
                })
            }
        }
    }

    /// δ, δ_x, δ_y and their derivatives with respect to the separation.
    ///
    /// Uses ∂δ/∂d = γ(d), which holds for every inversion-symmetric PSF.
    pub fn overlap_gradients(&self, dx: T, dy: T) -> Result<OverlapGradients<T>> {
        match self {
            Psf::GaussianCircular { sigma } => {
                let s2 = *sigma * *sigma;
                let four = lit::<T>(4.0);
                let ex = gaussian_delta(*sigma, dx);
                let ey = gaussian_delta(*sigma, dy);
                let dex = -dx / (four * s2) * ex;
                let dey = -dy / (four * s2) * ey;
                Ok(OverlapGradients {
                    delta: ex * ey,
                    delta_x: ex,
                    delta_y: ey,
                    ddelta_ddx: ey * dex,
                    ddelta_ddy: ex * dey,
                    ddelta_x_ddx: dex,
                    ddelta_y_ddy: dey,
                })
            }
            Psf::Sampled(_) => {
                let full = self.functionals(dx, dy)?;
                let fx = self.functionals(dx, T::zero())?;
                let fy = self.functionals(T::zero(), dy)?;
                Ok(OverlapGradients {
                    delta: full.delta.re,
                    delta_x: full.delta_x.re,
                    delta_y: full.delta_y.re,
                    ddelta_ddx: full.gamma_x.re,
                    ddelta_ddy: full.gamma_y.re,
                    ddelta_x_ddx: fx.gamma_x.re,
                    ddelta_y_ddy: fy.gamma_y.re,
                })
            }
        }
    }

    /// Reads a sampled PSF: `# half_width=<w> n=<n>` then `n²` rows `re,im`
    /// (y outer, x inner).
    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let (half_width, n) = loop {
            let (no, line) = lines.next().ok_or(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })?;
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            break parse_header::<T>(t).map_err(|message| Error::Parse { line: no + 1, message })?;
        };
        let mut values = Vec::with_capacity(n * n);
        for (no, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let mut parts = t.split(',');
            let mut field = |name: &str| -> Result<T> {
                let s = parts.next().ok_or_else(|| Error::Parse {
                    line: no + 1,
                    message: format!("missing {name} column"),
                })?;
                s.trim()
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| Error::Parse {
                        line: no + 1,
                        message: format!("bad {name} value {s:?}: {e}"),
                    })
            };
            let re = field("re")?;
            let im = field("im")?;
            values.push(Complex::new(re, im));
        }
        if values.len() != n * n {
            return Err(Error::Parse {
                line: 0,
                message: format!("expected {} samples, found {}", n * n, values.len()),
            });
        }
        Self::sampled(half_width, n, values)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }

    /// Writes the sampled grid in the format accepted by [`Psf::read_csv`].
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let Psf::Sampled(s) = self else {
            return Err(Error::InvalidConfig("only sampled PSFs can be written".into()));
        };
        writeln!(w, "# half_width={} n={}", s.half_width, s.n)?;
        for v in &s.values {
            writeln!(w, "{},{}", v.re, v.im)?;
        }
        Ok(())
    }
}

fn parse_header<T: Real>(line: &str) -> std::result::Result<(T, usize), String> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| "header must start with '#'".to_string())?;
    let mut half_width = None;
    let mut n = None;
    for tok in body.split_whitespace() {
        if let Some(v) = tok.strip_prefix("half_width=") {
            half_width = Some(v.parse::<f64>().map_err(|e| format!("half_width: {e}"))?);
        } else if let Some(v) = tok.strip_prefix("n=") {
            n = Some(v.parse::<usize>().map_err(|e| format!("n: {e}"))?);
        }
    }
    match (half_width, n) {
        (Some(w), Some(n)) => Ok((T::lit(w), n)),
        _ => Err("header needs half_width=<float> and n=<int>".into()),
    }
}

fn check_sym<T: Real>(symmetry: &'static str, deviation: T) -> Result<()> {
    if deviation > lit(SYMMETRY_RTOL) {
        Err(Error::Symmetry {
            symmetry,
            deviation: deviation.as_f64(),
        })
    } else {
        Ok(())
    }
}

#[inline]
fn gaussian_amp<T: Real>(sigma: T, x: T, y: T) -> T {
    let s2 = sigma * sigma;
    let norm = (T::one() / (lit::<T>(2.0) * T::PI() * s2)).sqrt();
    norm * (-(x * x + y * y) / (lit::<T>(4.0) * s2)).exp()
}

/// One-axis Gaussian overlap exp(−d²/8σ²).
#[inline]
pub(crate) fn gaussian_delta<T: Real>(sigma: T, d: T) -> T {
    (-(d * d) / (lit::<T>(8.0) * sigma * sigma)).exp()
}

/// Complex amplitude sampled on a uniform square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPsf<T> {
    half_width: T,
    n: usize,
    values: Vec<Complex<T>>,
    grad_x: Vec<Complex<T>>,
    grad_y: Vec<Complex<T>>,
    dkx2: T,
    dky2: T,
    alpha: T,
    rms_width: T,
    inversion_asymmetry: T,
    reflection_asymmetry: T,
    resolution_error: T,
}

const STENCIL: [i64; 6] = [-2, -1, 0, 1, 2, 3];
const CENTRAL_D1: [f64; 7] = [-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0];

impl<T: Real> SampledPsf<T> {
    /// Validates, renormalizes and precomputes derivative data.
    pub fn new(half_width: T, n: usize, mut values: Vec<Complex<T>>) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidConfig(format!("sampled PSF needs n >= 8, got {n}")));
        }
        if !(half_width > T::zero()) {
            return Err(Error::InvalidConfig("half_width must be positive".into()));
        }
        if values.len() != n * n {
            return Err(Error::InvalidConfig(format!(
                "expected {} samples, got {}",
                n * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidConfig("non-finite PSF sample".into()));
        }
        let grid = UniformGrid::new(half_width, n);
        let norm = grid.integrate_samples(&values.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>());
        if (norm - T::one()).abs() > lit(NORMALIZATION_REJECT) {
            return Err(Error::Normalization {
                norm: norm.as_f64(),
                tolerance: NORMALIZATION_REJECT,
            });
        }
        let scale = T::one() / norm.sqrt();
        for v in values.iter_mut() {
            *v = *v * scale;
        }

        let peak = values.iter().fold(T::zero(), |m, v| m.max(v.norm()));
        let at = |i: usize, j: usize| values[j * n + i];
        let mut inv = T::zero();
        let mut refl = T::zero();
        for j in 0..n {
            for i in 0..n {
                let v = at(i, j);
                inv = inv.max((v - at(n - 1 - i, n - 1 - j)).norm());
                refl = refl
                    .max((v - at(n - 1 - i, j)).norm())
                    .max((v - at(i, n - 1 - j)).norm());
            }
        }

        let mut s = Self {
            half_width,
            n,
            values,
            grad_x: Vec::new(),
            grad_y: Vec::new(),
            dkx2: T::zero(),
            dky2: T::zero(),
            alpha: T::zero(),
            rms_width: T::zero(),
            inversion_asymmetry: inv / peak,
            reflection_asymmetry: refl / peak,
            resolution_error: T::zero(),
        };
        s.grad_x = s.central_derivative(true);
        s.grad_y = s.central_derivative(false);
        s.dkx2 = grid.integrate_samples(&s.grad_x.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>());
        s.dky2 = grid.integrate_samples(&s.grad_y.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>());
        s.alpha = s.inner(&s.grad_x, &s.grad_y).re;

        let mut mx = KahanSum::new();
        let mut my = KahanSum::new();
        for j in 0..n {
            for i in 0..n {
                let w = grid.weight(i) * grid.weight(j) * s.values[j * n + i].norm_sqr();
                mx.add(w * grid.x(i) * grid.x(i));
                my.add(w * grid.y(j) * grid.y(j));
            }
        }
        s.rms_width = mx.value().max(my.value()).sqrt();

        // Interpolation accuracy probe: the norm of the half-cell-shifted field.
        let h = grid.spacing();
        let half = s.shifted_unchecked(h / lit(2.0), h / lit(2.0));
        s.resolution_error = (s.inner(&half, &half).re - T::one()).abs();
        Ok(s)
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    /// Estimated interpolation error (deviation of the half-cell-shifted norm from 1).
    pub fn resolution_error(&self) -> T {
        self.resolution_error
    }

    fn grid(&self) -> UniformGrid<T> {
        UniformGrid::new(self.half_width, self.n)
    }

    fn check_resolution(&self) -> Result<()> {
        if self.resolution_error > lit(QUADRATURE_TOL) {
            return Err(Error::Quadrature {
                what: "sampled PSF grid too coarse for interpolation",
                estimate: self.resolution_error.as_f64(),
                tolerance: QUADRATURE_TOL,
            });
        }
        Ok(())
    }

    #[inline]
    fn node(&self, i: i64, j: i64) -> Complex<T> {
        let n = self.n as i64;
        if i < 0 || j < 0 || i >= n || j >= n {
            Complex::new(T::zero(), T::zero())
        } else {
            self.values[(j * n + i) as usize]
        }
    }

    /// ∫∫ a* b over the grid.
    fn inner(&self, a: &[Complex<T>], b: &[Complex<T>]) -> Complex<T> {
        let grid = self.grid();
        let n = self.n;
        let mut re = KahanSum::new();
        let mut im = KahanSum::new();
        for j in 0..n {
            let wy = grid.weight(j);
            for i in 0..n {
                let w = wy * grid.weight(i);
                let p = a[j * n + i].conj() * b[j * n + i];
                re.add(w * p.re);
                im.add(w * p.im);
            }
        }
        Complex::new(re.value(), im.value())
    }

    fn central_derivative(&self, along_x: bool) -> Vec<Complex<T>> {
        let n = self.n;
        let h = self.grid().spacing();
        let denom = lit::<T>(60.0) * h;
        let mut out = vec![Complex::new(T::zero(), T::zero()); n * n];
        for j in 0..n as i64 {
            for i in 0..n as i64 {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (k, c) in CENTRAL_D1.iter().enumerate() {
                    if *c == 0.0 {
                        continue;
                    }
                    let o = k as i64 - 3;
                    let v = if along_x { self.node(i + o, j) } else { self.node(i, j + o) };
                    acc = acc + v * lit::<T>(*c);
                }
                out[(j as usize) * n + i as usize] = acc / denom;
            }
        }
        out
    }

    /// ψ(x − dx, y − dy) on the grid nodes; fails if the shift pushes mass off the grid.
    fn shifted(&self, dx: T, dy: T) -> Result<Vec<Complex<T>>> {
        let out = self.shifted_unchecked(dx, dy);
        let mass = self.inner(&out, &out).re;
        let lost = (T::one() - mass).abs();
        if lost > lit(QUADRATURE_TOL) {
            return Err(Error::Quadrature {
                what: "shifted PSF leaves the sampled grid",
                estimate: lost.as_f64(),
                tolerance: QUADRATURE_TOL,
            });
        }
        Ok(out)
    }

    fn shifted_unchecked(&self, dx: T, dy: T) -> Vec<Complex<T>> {
        let n = self.n;
        let h = self.grid().spacing();
        // Node i maps to fractional index i − dx/h for the source sample.
        let (ox, wx) = shift_stencil(-dx / h);
        let (oy, wy) = shift_stencil(-dy / h);
        let zero = Complex::new(T::zero(), T::zero());
        let mut tmp = vec![zero; n * n];
        for j in 0..n as i64 {
            for i in 0..n as i64 {
                let mut acc = zero;
                for (k, s) in STENCIL.iter().enumerate() {
                    acc = acc + self.node(i + ox + s, j) * wx[k];
                }
                tmp[(j as usize) * n + i as usize] = acc;
            }
        }
        let tnode = |i: i64, j: i64| -> Complex<T> {
            if j < 0 || j >= n as i64 {
                zero
            } else {
                tmp[(j as usize) * n + i as usize]
            }
        };
        let mut out = vec![zero; n * n];
        for j in 0..n as i64 {
            for i in 0..n as i64 {
                let mut acc = zero;
                for (k, s) in STENCIL.iter().enumerate() {
                    acc = acc + tnode(i, j + oy + s) * wy[k];
                }
                out[(j as usize) * n + i as usize] = acc;
            }
        }
        out
    }

    /// Interpolated value and derivatives; zero outside the grid.
    fn interpolate(&self, x: T, y: T) -> PsfDerivs<T> {
        let zero = Complex::new(T::zero(), T::zero());
        let w = self.half_width;
        if !(x >= -w && x <= w && y >= -w && y <= w) {
            return PsfDerivs {
                value: zero,
                dx: zero,
                dy: zero,
                dxx: zero,
                dxy: zero,
                dyy: zero,
            };
        }
        let h = self.grid().spacing();
        let (ix, (vx, d1x, d2x)) = axis_weights((x + w) / h);
        let (iy, (vy, d1y, d2y)) = axis_weights((y + w) / h);
        let mut out = [zero; 6];
        for (b, sb) in STENCIL.iter().enumerate() {
            for (a, sa) in STENCIL.iter().enumerate() {
                let p = self.node(ix + sa, iy + sb);
                out[0] = out[0] + p * (vx[a] * vy[b]);
                out[1] = out[1] + p * (d1x[a] * vy[b]);
                out[2] = out[2] + p * (vx[a] * d1y[b]);
                out[3] = out[3] + p * (d2x[a] * vy[b]);
                out[4] = out[4] + p * (d1x[a] * d1y[b]);
                out[5] = out[5] + p * (vx[a] * d2y[b]);
            }
        }
        PsfDerivs {
            value: out[0],
            dx: out[1] / h,
            dy: out[2] / h,
            dxx: out[3] / (h * h),
            dxy: out[4] / (h * h),
            dyy: out[5] / (h * h),
        }
    }
}

/// Integer offset and interpolation weights for a constant fractional shift `u` (in cells).
fn shift_stencil<T: Real>(u: T) -> (i64, [T; 6]) {
    let base = u.floor();
    let t = u - base;
    let (v, _, _) = lagrange_weights(t);
    (base.to_i64().unwrap_or(0), v)
}

/// Base node and (value, d/du, d²/du²) weights at fractional index `u`.
fn axis_weights<T: Real>(u: T) -> (i64, ([T; 6], [T; 6], [T; 6])) {
    let base = u.floor();
    (base.to_i64().unwrap_or(0), lagrange_weights(u - base))
}

/// Six-point Lagrange basis on nodes −2..=3 evaluated at `t`, with first and
/// second derivatives.
fn lagrange_weights<T: Real>(t: T) -> ([T; 6], [T; 6], [T; 6]) {
    let mut v = [T::zero(); 6];
    let mut d1 = [T::zero(); 6];
    let mut d2 = [T::zero(); 6];
    for j in 0..6 {
        // Build the basis polynomial's coefficients (ascending powers).
        let mut coeffs = [T::zero(); 6];
        coeffs[0] = T::one();
        let mut deg = 0;
        let mut denom = T::one();
        for k in 0..6 {
            if k == j {
                continue;
            }
            let sk = T::from_i64(STENCIL[k]).unwrap();
            let sj = T::from_i64(STENCIL[j]).unwrap();
            denom = denom * (sj - sk);
            for p in (0..=deg).rev() {
                coeffs[p + 1] = coeffs[p + 1] + coeffs[p];
                coeffs[p] = -coeffs[p] * sk;
            }
            deg += 1;
        }
        let mut pv = T::zero();
        let mut p1 = T::zero();
        let mut p2 = T::zero();
        for p in (0..6).rev() {
            pv = pv * t + coeffs[p];
        }
        for p in (1..6).rev() {
            p1 = p1 * t + coeffs[p] * T::from_usize(p).unwrap();
        }
        for p in (2..6).rev() {
            p2 = p2 * t + coeffs[p] * T::from_usize(p * (p - 1)).unwrap();
        }
        v[j] = pv / denom;
        d1[j] = p1 / denom;
        d2[j] = p2 / denom;
    }
    (v, d1, d2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sampled_gaussian(sigma: f64) -> Psf<f64> {
        let g = Psf::gaussian(sigma).unwrap();
        Psf::sampled_from_fn(8.0 * sigma, 513, |x, y| g.eval(x, y)).unwrap()
    }

    #[test]
    fn lagrange_weights_partition_unity_and_reproduce_polynomials() {
        for &t in &[0.0, 0.3, 0.5, 0.99] {
            let (v, d1, d2) = lagrange_weights::<f64>(t);
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            assert!(d1.iter().sum::<f64>().abs() < 1e-13);
            assert!(d2.iter().sum::<f64>().abs() < 1e-12);
            // f(s) = s^3 → f(t) = t^3, f' = 3t^2, f'' = 6t
            let f = |s: i64| (s as f64).powi(3);
            let val: f64 = (0..6).map(|k| v[k] * f(STENCIL[k])).sum();
            let der: f64 = (0..6).map(|k| d1[k] * f(STENCIL[k])).sum();
            let dd: f64 = (0..6).map(|k| d2[k] * f(STENCIL[k])).sum();
            assert!((val - t.powi(3)).abs() < 1e-12);
            assert!((der - 3.0 * t * t).abs() < 1e-12);
            assert!((dd - 6.0 * t).abs() < 1e-11);
        }
    }

    #[test]
    fn gaussian_peak_value() {
        let g = Psf::gaussian(1.0).unwrap();
        let v = g.eval(0.0, 0.0);
        assert!((v.re - (2.0 * std::f64::consts::PI).powf(-0.5)).abs() < 1e-15);
        assert!((v.re - 0.398942).abs() < 1e-6);
    }

    #[test]
    fn gaussian_inversion_symmetric() {
        let g = Psf::gaussian(1.3).unwrap();
        for &(x, y) in &[(0.4, -1.2), (2.0, 0.1), (-0.7, -0.7)] {
            assert_eq!(g.eval(x, y), g.eval(-x, -y));
        }
    }

    #[test]
    fn sampled_matches_closed_form_off_grid() {
        let g = Psf::gaussian(1.0).unwrap();
        let s = sampled_gaussian(1.0);
        let (a, b) = (g.eval(0.5, -0.3).re, s.eval(0.5, -0.3).re);
        assert!(((a - b) / a).abs() < 1e-6, "{a} vs {b}");
        assert_eq!(s.eval(9.0, 0.0), Complex::new(0.0, 0.0));
    }

    #[test]
    fn sampled_derivatives_match_closed_form() {
        let g = Psf::gaussian(1.0).unwrap();
        let s = sampled_gaussian(1.0);
        let (x, y) = (0.37, -0.81);
        let a = g.derivs(x, y);
        let b = s.derivs(x, y);
        assert!((a.dx - b.dx).norm() < 1e-6);
        assert!((a.dy - b.dy).norm() < 1e-6);
        assert!((a.dxx - b.dxx).norm() < 1e-5);
        assert!((a.dxy - b.dxy).norm() < 1e-5);
    }

    #[test]
    fn gaussian_overlap_values() {
        let g = Psf::gaussian(1.0).unwrap();
        assert_eq!(g.overlap_delta(0.0, 0.0).unwrap().re, 1.0);
        let d = g.overlap_delta(2.0, 0.0).unwrap().re;
        assert!((d - (-0.5f64).exp()).abs() < 1e-15);
        assert!((d - 0.606531).abs() < 1e-6);
    }

    #[test]
    fn sampled_overlap_matches_closed_form() {
        let s = sampled_gaussian(1.0);
        let d = s.overlap_delta(1.0, 1.0).unwrap();
        // exp(-1/8) per axis
        let want = (-0.25f64).exp();
        assert!(((d.re - want) / want).abs() < 1e-6, "{}", d.re);
        assert!(d.im.abs() < 1e-8);
    }

    #[test]
    fn gaussian_functionals_closed_form() {
        let g = Psf::gaussian(0.5_f64).unwrap();
        let f = g.functionals(0.3, -1.1).unwrap();
        assert!((f.dkx2 - 1.0).abs() < 1e-15);
        assert!((f.dky2 - 1.0).abs() < 1e-15);
        assert_eq!(f.alpha, 0.0);
        let f0 = g.functionals(0.0, 0.0).unwrap();
        assert_eq!(f0.gamma_x.re, 0.0);
        assert_eq!(f0.gamma_y.re, 0.0);
        assert_eq!(f0.delta.re, 1.0);
        assert_eq!(f0.delta_x.re, 1.0);
        assert_eq!(f0.delta_y.re, 1.0);
    }

    #[test]
    fn sampled_gamma_matches_finite_difference_of_overlap() {
        let s = sampled_gaussian(1.0);
        let f = s.functionals(0.8, 0.0).unwrap();
        let want = -(0.8 / 4.0) * (-0.64f64 / 8.0).exp();
        assert!(((f.gamma_x.re - want) / want).abs() < 1e-4, "{}", f.gamma_x.re);
        // independent route: central difference of the overlap
        let h = 1e-4;
        let fd = (s.overlap_delta(0.8 + h, 0.0).unwrap().re - s.overlap_delta(0.8 - h, 0.0).unwrap().re)
            / (2.0 * h);
        assert!(((f.gamma_x.re - fd) / fd).abs() < 1e-3);
    }

    #[test]
    fn sampled_functionals_zero_separation() {
        let s = sampled_gaussian(1.0);
        let f = s.functionals(0.0, 0.0).unwrap();
        assert!(f.gamma_x.norm() < 1e-12);
        assert!(f.gamma_y.norm() < 1e-12);
        assert!((f.delta.re - 1.0).abs() < 1e-12);
        assert!((f.dkx2 - 0.25).abs() < 1e-8);
        assert!(f.alpha.abs() < 1e-12);
    }

    #[test]
    fn rejects_unnormalized() {
        let r = Psf::sampled_from_fn(8.0, 65, |x: f64, y: f64| Complex::new(2.0 * (-(x * x + y * y) / 4.0).exp(), 0.0));
        assert!(matches!(r, Err(Error::Normalization { .. })));
    }

    #[test]
    fn renormalizes_small_deviation() {
        let g = Psf::gaussian(1.0_f64).unwrap();
        let s = Psf::sampled_from_fn(8.0, 257, |x, y| g.eval(x, y) * 1.0002).unwrap();
        let Psf::Sampled(inner) = &s else { unreachable!() };
        let norm = inner.inner(&inner.values, &inner.values).re;
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn asymmetric_psf_rejected_by_functionals() {
        let s = Psf::sampled_from_fn(8.0, 257, |x: f64, y: f64| {
            let a = (-((x - 0.5).powi(2) + y * y) / 4.0).exp();
            Complex::new(a / (2.0 * std::f64::consts::PI).sqrt(), 0.0)
        })
        .unwrap();
        assert!(matches!(s.functionals(0.5, 0.0), Err(Error::Symmetry { .. })));
        assert!(s.check_reflection_symmetry().is_err());
    }

    #[test]
    fn coarse_grid_signals_quadrature_error() {
        let g = Psf::gaussian(1.0).unwrap();
        let s = Psf::sampled_from_fn(8.0, 17, |x, y| g.eval(x, y)).unwrap();
        assert!(matches!(s.overlap_delta(0.5, 0.0), Err(Error::Quadrature { .. })));
    }

    #[test]
    fn shift_off_grid_signals_quadrature_error() {
        let s = sampled_gaussian(1.0);
        assert!(matches!(s.overlap_delta(12.0, 0.0), Err(Error::Quadrature { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let g = Psf::gaussian(1.0).unwrap();
        let s = Psf::sampled_from_fn(6.0, 33, |x, y| g.eval(x, y)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# half_width=6 n=33\n"));
        let back = Psf::<f64>::read_csv(&buf[..]).unwrap();
        let (Psf::Sampled(a), Psf::Sampled(b)) = (&s, &back) else { unreachable!() };
        for (u, v) in a.values.iter().zip(&b.values) {
            assert!((u - v).norm() < 1e-15);
        }
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(Psf::<f64>::read_csv(&b"1,0\n"[..]), Err(Error::Parse { .. })));
        assert!(matches!(
            Psf::<f64>::read_csv(&b"# half_width=1 n=8\n1,0\n"[..]),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            Psf::<f64>::read_csv(&b"# half_width=1 n=8\n1,x\n"[..]),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn f32_gaussian_functionals() {
        let g = Psf::<f32>::gaussian(1.0).unwrap();
        let f = g.functionals(2.0, 0.0).unwrap();
        assert!((f.delta_x.re - (-0.5f32).exp()).abs() < 1e-6);
        assert!((f.dkx2 - 0.25).abs() < 1e-7);
    }
}
