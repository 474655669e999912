//! Command-line front end: bound tables, Fisher-information tables and
//! Monte-Carlo sweeps, written as CSV or JSON.
//!
//! Separation grids are given in units of the PSF width σ (the RMS width of
//! |ψ|² along x, which is σ for the circular Gaussian).

pub mod table;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use twosource::direct::{cfi_direct, cfi_direct_small};
use twosource::mc::{run_mc, MCConfig, Scheme};
use twosource::qbound::{qcr_bound, qfi, SourceConfig};
use twosource::sliver::sliver_fi;
use twosource::spade::spade_fi;
use twosource::{Psf64, Psf};

pub use table::{Cell, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] twosource::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Format(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// `gaussian:sigma=<f>` or `file:<path>`.
#[derive(Debug, Clone, PartialEq)]
pub enum PsfSource {
    Gaussian { sigma: f64 },
    File(PathBuf),
}

impl FromStr for PsfSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(rest) = s.strip_prefix("gaussian:") {
            let v = rest
                .strip_prefix("sigma=")
                .ok_or_else(|| format!("expected gaussian:sigma=<float>, got {s:?}"))?;
            let sigma: f64 = v.parse().map_err(|_| format!("bad sigma {v:?}"))?;
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(format!("sigma must be positive, got {sigma}"));
            }
            return Ok(PsfSource::Gaussian { sigma });
        }
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err("file: needs a path".into());
            }
            return Ok(PsfSource::File(PathBuf::from(path)));
        }
        Err(format!("unknown PSF source {s:?}; use gaussian:sigma=<f> or file:<path>"))
    }
}

impl std::fmt::Display for PsfSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PsfSource::Gaussian { sigma } => write!(f, "gaussian:sigma={sigma}"),
            PsfSource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl PsfSource {
    pub fn load(&self) -> Result<Psf64, CliError> {
        Ok(match self {
            PsfSource::Gaussian { sigma } => Psf::gaussian(*sigma)?,
            PsfSource::File(p) => Psf::load_csv(p)?,
        })
    }
}

/// `start:stop:count` (inclusive, evenly spaced) or a single value.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("bad number {t:?} in grid {s:?}"))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                Ok(GridSpec { start: v, stop: v, count: 1 })
            }
            [a, b, n] => Ok(GridSpec {
                start: num(a)?,
                stop: num(b)?,
                count: n.trim().parse().map_err(|_| format!("bad count {n:?} in grid {s:?}"))?,
            }),
            _ => Err(format!("grid must be start:stop:count, got {s:?}")),
        }
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => {
                let span = self.stop - self.start;
                (0..n)
                    .map(|i| self.start + span * i as f64 / (n - 1) as f64)
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Sliver,
    Spade,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Sliver => Scheme::Sliver,
            SchemeArg::Spade => Scheme::Spade,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// PSF: gaussian:sigma=<float> or file:<path>
    #[arg(long, default_value = "gaussian:sigma=1")]
    pub psf: PsfSource,
    /// d_X/σ grid, start:stop:count
    #[arg(long = "grid-dx", default_value = "0:5:51")]
    pub grid_dx: GridSpec,
    /// d_Y/σ grid, start:stop:count
    #[arg(long = "grid-dy", default_value = "0")]
    pub grid_dy: GridSpec,
    /// Output file; standard output when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: Common,
    /// Mean detected photon number N
    #[arg(long, default_value_t = 1)]
    pub n: u64,
}

#[derive(Debug, Clone, Args)]
pub struct FiArgs {
    #[command(flatten)]
    pub common: Common,
    /// Total arrival probability ε_tot per trial
    #[arg(long = "eps-tot", default_value_t = 1.0)]
    pub eps_tot: f64,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum, default_value = "sliver")]
    pub scheme: SchemeArg,
    /// Detected photons per experiment
    #[arg(long = "l", default_value_t = 100)]
    pub photons: u64,
    #[arg(long, default_value_t = 100_000)]
    pub runs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Quantum and direct-imaging CR bounds normalized by 4σ²/N
    Bounds(BoundsArgs),
    /// SLIVER Fisher information normalized by ε_tot Δk²
    SliverFi(FiArgs),
    /// SPADE Fisher information normalized by ε_tot Δk²
    SpadeFi(FiArgs),
    /// Monte-Carlo MSE of the ML estimators, normalized by 4σ²/L
    Mc(McArgs),
}

#[derive(Debug, Clone, Parser)]
#[command(name = "twosource", version, about = "Resolution bounds and estimator sweeps for two point sources")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Bounds(a) => &a.common,
            Command::SliverFi(a) | Command::SpadeFi(a) => &a.common,
            Command::Mc(a) => &a.common,
        }
    }
}

fn grids(common: &Common) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let gx = common.grid_dx.values();
    let gy = common.grid_dy.values();
    if gx.is_empty() || gy.is_empty() {
        return Err(CliError::Usage("separation grid is empty".into()));
    }
    Ok((gx, gy))
}

fn nonnegative(values: &[f64]) -> Result<(), CliError> {
    if values.iter().any(|v| *v < 0.0) {
        return Err(CliError::Usage("grid separations must be non-negative".into()));
    }
    Ok(())
}

fn gaussian_only(common: &Common, what: &str) -> Result<f64, CliError> {
    match common.psf {
        PsfSource::Gaussian { sigma } => Ok(sigma),
        PsfSource::File(_) => Err(CliError::Usage(format!("{what} is defined for the Gaussian PSF only"))),
    }
}

fn common_meta(t: &mut Table, c: &Common) {
    t.meta("psf", &c.psf);
    t.meta("grid_dx", &c.grid_dx);
    t.meta("grid_dy", &c.grid_dy);
}

fn bound_or_inf(r: twosource::Result<twosource::VarianceBounds64>, label: &str) -> Result<f64, CliError> {
    match r {
        Ok(b) => Ok(b.get(label).unwrap_or(f64::INFINITY)),
        Err(twosource::Error::Singular { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e.into()),
    }
}

/// Quantum bound and direct-imaging bounds on d_X, d_Y over the grid.
pub fn cmd_bounds(args: &BoundsArgs) -> Result<Table, CliError> {
    let (gx, gy) = grids(&args.common)?;
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let psf = args.common.psf.load()?;
    let sigma = psf.rms_width();
    let norm = 4.0 * sigma * sigma / args.n as f64;
    let mut t = Table::new(
        "bounds",
        &[
            ("dx_over_sigma", "d_X/σ"),
            ("dy_over_sigma", "d_Y/σ"),
            ("qcrb_norm", "quantum bound on d_X over 4σ²/N"),
            ("qcrb_dy_norm", "quantum bound on d_Y over 4σ²/N"),
            ("direct_crb_norm", "direct-imaging bound on d_X (exact quadrature) over 4σ²/N"),
            ("direct_crb_dy_norm", "direct-imaging bound on d_Y (exact quadrature) over 4σ²/N"),
            ("direct_crb_expansion_norm", "direct-imaging bound on d_X (second-order expansion) over 4σ²/N"),
        ],
    );
    common_meta(&mut t, &args.common);
    t.meta("n", args.n);
    for &x in &gx {
        for &y in &gy {
            let (dx, dy) = (x * sigma, y * sigma);
            let cfg = SourceConfig::centered(dx, dy, 1.0, args.n);
            let k = qfi(&cfg, &psf.functionals(dx, dy)?)?;
            let sep = k.sub_block(&[2, 3]);
            let qx = bound_or_inf(qcr_bound(&sep), "dx")?;
            let qy = bound_or_inf(qcr_bound(&sep), "dy")?;
            let exact = cfi_direct(&psf, &cfg)?.inverse().map(|inv| (inv.get(0, 0), inv.get(1, 1)));
            let (ex, ey) = match exact {
                Ok(v) => v,
                Err(twosource::Error::Singular { .. }) => (f64::INFINITY, f64::INFINITY),
                Err(e) => return Err(e.into()),
            };
            let small = bound_or_inf(cfi_direct_small(&psf, &cfg)?.bounds(), "dx")?;
            t.push(
                [x, y, qx / norm, qy / norm, ex / norm, ey / norm, small / norm]
                    .map(Cell::Float)
                    .to_vec(),
            );
        }
    }
    Ok(t)
}

/// SLIVER or SPADE Fisher information over the grid, normalized by ε_tot Δk².
pub fn cmd_fi(args: &FiArgs, scheme: Scheme) -> Result<Table, CliError> {
    let (gx, gy) = grids(&args.common)?;
    nonnegative(&gx)?;
    nonnegative(&gy)?;
    if !(args.eps_tot > 0.0 && args.eps_tot <= 1.0) {
        return Err(CliError::Usage("--eps-tot must lie in (0, 1]".into()));
    }
    let (name, psf) = match scheme {
        Scheme::Sliver => ("sliver-fi", args.common.psf.load()?),
        Scheme::Spade => {
            let sigma = gaussian_only(&args.common, "SPADE")?;
            ("spade-fi", Psf::gaussian(sigma)?)
        }
    };
    let sigma = psf.rms_width();
    let f0 = psf.functionals(0.0, 0.0)?;
    let (nx, ny) = (args.eps_tot * f0.dkx2, args.eps_tot * f0.dky2);
    let mut t = Table::new(
        name,
        &[
            ("dx_over_sigma", "d_X/σ"),
            ("dy_over_sigma", "d_Y/σ"),
            ("j11_norm", "J_11 over ε_tot Δk_X²"),
            ("j22_norm", "J_22 over ε_tot Δk_Y²"),
            ("j12_norm", "J_12 over ε_tot (Δk_X² Δk_Y²)^½"),
        ],
    );
    common_meta(&mut t, &args.common);
    t.meta("eps_tot", args.eps_tot);
    for &x in &gx {
        for &y in &gy {
            let j = match scheme {
                Scheme::Sliver => {
                    sliver_fi(&psf, &SourceConfig::centered(x * sigma, y * sigma, args.eps_tot, 1))?
                }
                Scheme::Spade => spade_fi(sigma, args.eps_tot),
            };
            t.push(
                [x, y, j.get(0, 0) / nx, j.get(1, 1) / ny, j.get(0, 1) / (nx * ny).sqrt()]
                    .map(Cell::Float)
                    .to_vec(),
            );
        }
    }
    Ok(t)
}

/// Monte-Carlo MSE sweep.
pub fn cmd_mc(args: &McArgs) -> Result<Table, CliError> {
    let (gx, gy) = grids(&args.common)?;
    nonnegative(&gx)?;
    nonnegative(&gy)?;
    let sigma = gaussian_only(&args.common, "the ML estimators")?;
    if args.photons == 0 || args.runs == 0 {
        return Err(CliError::Usage("--l and --runs must be at least 1".into()));
    }
    let cfg = MCConfig {
        scheme: args.scheme.into(),
        sigma,
        grid_dx: gx.iter().map(|v| v * sigma).collect(),
        grid_dy: gy.iter().map(|v| v * sigma).collect(),
        photons: args.photons,
        runs: args.runs,
        seed: args.seed,
    };
    let res = run_mc(&cfg)?;
    let mut t = Table::new(
        "mc",
        &[
            ("dx_over_sigma", "d_X/σ"),
            ("dy_over_sigma", "d_Y/σ"),
            ("mse_dx_norm", "MSE of d̂_X over 4σ²/L"),
            ("mse_dy_norm", "MSE of d̂_Y over 4σ²/L"),
            ("mse_dx", "MSE of d̂_X"),
            ("mse_dy", "MSE of d̂_Y"),
            ("bias_dx", "mean of d̂_X − d_X (supplementary)"),
            ("bias_dy", "mean of d̂_Y − d_Y (supplementary)"),
            ("stderr_mse_dx", "standard error of mse_dx"),
            ("stderr_mse_dy", "standard error of mse_dy"),
            ("crb_dx", "classical bound on d_X at L photons (inf: no information)"),
            ("crb_dy", "classical bound on d_Y at L photons (inf: no information)"),
            ("qcrb", "quantum bound 4σ²/L"),
            ("l", "detected photons per experiment"),
            ("runs", "experiments per grid point"),
            ("seed", "master seed"),
        ],
    );
    t.meta("scheme", format!("{:?}", args.scheme).to_lowercase());
    common_meta(&mut t, &args.common);
    t.meta("l", args.photons);
    t.meta("runs", args.runs);
    t.meta("seed", args.seed);
    for (row, (&x, &y)) in res
        .rows
        .iter()
        .zip(gx.iter().flat_map(|x| gy.iter().map(move |y| (x, y))))
    {
        let f = Cell::Float;
        t.push(vec![
            f(x),
            f(y),
            f(row.mse_dx / row.qcrb),
            f(row.mse_dy / row.qcrb),
            f(row.mse_dx),
            f(row.mse_dy),
            f(row.bias_dx),
            f(row.bias_dy),
            f(row.stderr_mse_dx),
            f(row.stderr_mse_dy),
            f(row.crb_dx),
            f(row.crb_dy),
            f(row.qcrb),
            Cell::Count(res.photons),
            Cell::Count(res.runs),
            Cell::Count(res.seed),
        ]);
    }
    Ok(t)
}

pub fn execute(cmd: &Command) -> Result<Table, CliError> {
    match cmd {
        Command::Bounds(a) => cmd_bounds(a),
        Command::SliverFi(a) => cmd_fi(a, Scheme::Sliver),
        Command::SpadeFi(a) => cmd_fi(a, Scheme::Spade),
        Command::Mc(a) => cmd_mc(a),
    }
}

pub fn write_table(t: &Table, common: &Common) -> Result<(), CliError> {
    let mut out: Box<dyn Write> = match &common.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    match common.format {
        Format::Csv => t.write_csv(&mut out)?,
        Format::Json => t.write_json(&mut out)?,
    }
    out.flush()?;
    Ok(())
}

/// Parses `args`, runs the command and writes its table; returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command).and_then(|t| write_table(&t, cli.command.common())) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("twosource: {e}");
            e.exit_code()
        }
    }
}
