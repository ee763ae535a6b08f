//! Run settings from the command line and an optional key=value file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use maryland::{Precision, SpectralParams};

pub const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    Double,
    Extended,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::Extended => Precision::Extended,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanParam {
    Omega,
    Theta,
    Eta,
    L,
}

/// Every setting is optional here; command-line values override the file,
/// the file overrides the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Settings {
    /// key=value file; keys are the long flag names without dashes.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub omega: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub eta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub l: Option<f64>,
    /// With --lambda, replaces --eta and --l.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Number of cocycle steps.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub n: Option<i64>,
    /// Maximal number of renormalization levels.
    #[arg(long, global = true)]
    pub depth: Option<usize>,
    /// verify: tolerance scale; renorm: error budget; scan: pass threshold.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub precision: Option<PrecisionArg>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// renorm: refuse chains over the error budget instead of truncating.
    #[arg(long, global = true)]
    pub strict: bool,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub re_min: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub re_max: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub im_min: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub im_max: Option<f64>,
    #[arg(long, global = true)]
    pub nx: Option<usize>,
    #[arg(long, global = true)]
    pub ny: Option<usize>,
    /// Parameter varied by `scan`.
    #[arg(long, global = true, value_enum)]
    pub scan: Option<ScanParam>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub from: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub to: Option<f64>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
}

/// A rectangular grid in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    /// Points in row-major order, imaginary part outermost.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let at = |(a, b): (f64, f64), i: usize, n: usize| {
            if n == 1 {
                a
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        };
        let mut pts = Vec::with_capacity(self.nx * self.ny);
        for j in 0..self.ny {
            for i in 0..self.nx {
                pts.push((at(self.re, i, self.nx), at(self.im, j, self.ny)));
            }
        }
        pts
    }
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: SpectralParams,
    pub n: i64,
    pub depth: Option<usize>,
    pub tol: Option<f64>,
    pub precision: Precision,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub strict: bool,
    pub grid: Grid,
    pub scan: ScanParam,
    pub range: (f64, f64),
    pub steps: usize,
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Settings, String> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value, got {raw:?}", i + 1))?;
        let key = k.trim().replace('-', "_");
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key {key}", i + 1));
        }
    }
    let mut s = Settings::default();
    for (k, v) in &map {
        let f = || v.parse::<f64>().map_err(|e| format!("{k}: {e}"));
        let u = || v.parse::<usize>().map_err(|e| format!("{k}: {e}"));
        let choice = |name: &str| format!("{k}: unknown value {v:?} for {name}");
        match k.as_str() {
            "omega" => s.omega = Some(f()?),
            "theta" => s.theta = Some(f()?),
            "eta" => s.eta = Some(f()?),
            "l" => s.l = Some(f()?),
            "energy" => s.energy = Some(f()?),
            "lambda" => s.lambda = Some(f()?),
            "n" => s.n = Some(v.parse().map_err(|e| format!("{k}: {e}"))?),
            "depth" => s.depth = Some(u()?),
            "tol" => s.tol = Some(f()?),
            "precision" => s.precision = Some(PrecisionArg::from_str(v, true).map_err(|_| choice("precision"))?),
            "out" => s.out = Some(PathBuf::from(v)),
            "format" => s.format = Some(Format::from_str(v, true).map_err(|_| choice("format"))?),
            "strict" => s.strict = v.parse().map_err(|e| format!("{k}: {e}"))?,
            "re_min" => s.re_min = Some(f()?),
            "re_max" => s.re_max = Some(f()?),
            "im_min" => s.im_min = Some(f()?),
            "im_max" => s.im_max = Some(f()?),
            "nx" => s.nx = Some(u()?),
            "ny" => s.ny = Some(u()?),
            "scan" => s.scan = Some(ScanParam::from_str(v, true).map_err(|_| choice("scan"))?),
            "from" => s.from = Some(f()?),
            "to" => s.to = Some(f()?),
            "steps" => s.steps = Some(u()?),
            _ => return Err(format!("unknown key {k:?}")),
        }
    }
    Ok(s)
}

pub fn read_config(path: &Path) -> Result<Settings, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_config_text(&text).map_err(|e| format!("{}: {e}", path.display()))
}

impl Settings {
    /// `self` with gaps filled from `base`.
    pub fn over(self, base: Settings) -> Settings {
        Settings {
            config: self.config,
            omega: self.omega.or(base.omega),
            theta: self.theta.or(base.theta),
            eta: self.eta.or(base.eta),
            l: self.l.or(base.l),
            energy: self.energy.or(base.energy),
            lambda: self.lambda.or(base.lambda),
            n: self.n.or(base.n),
            depth: self.depth.or(base.depth),
            tol: self.tol.or(base.tol),
            precision: self.precision.or(base.precision),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
            strict: self.strict || base.strict,
            re_min: self.re_min.or(base.re_min),
            re_max: self.re_max.or(base.re_max),
            im_min: self.im_min.or(base.im_min),
            im_max: self.im_max.or(base.im_max),
            nx: self.nx.or(base.nx),
            ny: self.ny.or(base.ny),
            scan: self.scan.or(base.scan),
            from: self.from.or(base.from),
            to: self.to.or(base.to),
            steps: self.steps.or(base.steps),
        }
    }

    /// Applies defaults and the preconditions of the core library.
    pub fn resolve(self, default_format: Format) -> Result<RunConfig, String> {
        let s = match &self.config {
            Some(path) => {
                let file = read_config(path)?;
                self.over(file)
            }
            None => self,
        };
        let omega = s.omega.unwrap_or(GOLDEN);
        let theta = s.theta.unwrap_or(0.3);
        let params = match (s.energy, s.lambda) {
            (None, None) => SpectralParams::new(omega, theta, s.eta.unwrap_or(1.0), s.l.unwrap_or(0.5)),
            (Some(e), Some(lam)) => {
                if s.eta.is_some() || s.l.is_some() {
                    return Err("give either eta and l or energy and lambda, not both".into());
                }
                SpectralParams::from_energy(omega, theta, e, lam)
            }
            _ => return Err("energy and lambda must be given together".into()),
        }
        .map_err(|e| e.to_string())?;
        let grid = Grid {
            re: (s.re_min.unwrap_or(-2.0), s.re_max.unwrap_or(2.0)),
            im: (s.im_min.unwrap_or(-2.0), s.im_max.unwrap_or(2.0)),
            nx: s.nx.unwrap_or(21),
            ny: s.ny.unwrap_or(21),
        };
        let finite = [grid.re.0, grid.re.1, grid.im.0, grid.im.1].iter().all(|x| x.is_finite());
        if !finite || grid.nx == 0 || grid.ny == 0 {
            return Err("grid needs finite bounds and nx, ny >= 1".into());
        }
        if let Some(t) = s.tol {
            if !(t > 0.0) || !t.is_finite() {
                return Err(format!("tol = {t} must be positive and finite"));
            }
        }
        let scan = s.scan.unwrap_or(ScanParam::Theta);
        let range = (s.from.unwrap_or(0.05), s.to.unwrap_or(0.95));
        let steps = s.steps.unwrap_or(19);
        if steps == 0 || !range.0.is_finite() || !range.1.is_finite() {
            return Err("scan needs finite from, to and steps >= 1".into());
        }
        Ok(RunConfig {
            params,
            n: s.n.unwrap_or(50),
            depth: s.depth,
            tol: s.tol,
            precision: s.precision.unwrap_or(PrecisionArg::Double).into(),
            out: s.out,
            format: s.format.unwrap_or(default_format),
            strict: s.strict,
            grid,
            scan,
            range,
            steps,
        })
    }
}
