//! Run configuration: a TOML file with `[potential]`, `[box]`, `[sweep]`,
//! `[landscape]`, `[oracle]`, `[lyapunov]`, `[run]` and `[fault]` sections.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use metastab::grid::Bounds;
use metastab::{parse_potential, Potential};
use serde::Deserialize;
use toml::Spanned;

pub const DEFAULT_EPSILONS: [f64; 4] = [0.2, 0.1, 0.07, 0.05];
/// First patch scale `a` of the dyadic drift search; balls of radius
/// `a√ε` must leave part of the box uncovered.
pub const DEFAULT_PATCH_SCALE: f64 = 0.75;
pub const MIN_GRID: usize = 1 << 6;
pub const MAX_GRID: usize = 1 << 14;

/// A configuration problem located in its source file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: PathBuf,
    /// 1-based; 0 when no position is known.
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}: {}", self.path.display(), self.message)
        } else {
            write!(f, "{}:{}:{}: {}", self.path.display(), self.line, self.column, self.message)
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    potential: RawPotential,
    #[serde(rename = "box")]
    bbox: Option<Spanned<RawBox>>,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    landscape: RawLandscape,
    #[serde(default)]
    oracle: RawOracle,
    #[serde(default)]
    lyapunov: RawLyapunov,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    fault: RawFault,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPotential {
    expr: Spanned<String>,
    dim: Spanned<usize>,
    name: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Edge {
    Scalar(f64),
    List(Vec<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    lo: Edge,
    hi: Edge,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    epsilon: Option<Spanned<Vec<f64>>>,
    grid: Option<Spanned<usize>>,
    saddle_grid: Option<Spanned<usize>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawLandscape {
    /// Approximate saddle locations; required above two dimensions.
    saddles: Option<Spanned<Vec<Vec<f64>>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    enabled: bool,
}

impl Default for RawOracle {
    fn default() -> Self {
        RawOracle { enabled: true }
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawLyapunov {
    a: Option<Spanned<f64>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRun {
    seed: Option<u64>,
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawFault {
    /// Test fixture: store the unstable saddle eigenvalue with the wrong sign.
    #[serde(default)]
    flip_lambda_minus: bool,
}

/// Validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub path: PathBuf,
    pub source: String,
    pub potential: Potential,
    pub dim: usize,
    pub bbox: Bounds,
    pub epsilons: Vec<f64>,
    /// Cells per axis of the finite-difference oracle.
    pub grid: usize,
    /// Resolution of the saddle search.
    pub saddle_grid: usize,
    /// Replaces grid minimax when present.
    pub saddle_guesses: Option<Vec<Vec<f64>>>,
    pub oracle: bool,
    /// First patch scale of the Lyapunov search.
    pub lyapunov_a: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub flip_lambda_minus: bool,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub epsilons: Option<Vec<f64>>,
    pub grid: Option<usize>,
    pub no_oracle: bool,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.chars().count(), |p| before[p + 1..].chars().count()) + 1;
    (line, column)
}

struct Locator<'a> {
    path: &'a Path,
    text: &'a str,
}

impl Locator<'_> {
    fn at(&self, span: Option<Range<usize>>, message: impl Into<String>) -> ConfigError {
        let (line, column) = span.map_or((0, 0), |s| line_col(self.text, s.start));
        ConfigError { path: self.path.to_path_buf(), line, column, message: message.into() }
    }
}

pub fn default_grid(dim: usize) -> usize {
    if dim == 1 {
        1 << 12
    } else {
        1 << 8
    }
}

fn check_grid(n: usize) -> std::result::Result<(), String> {
    if n.is_power_of_two() && (MIN_GRID..=MAX_GRID).contains(&n) {
        Ok(())
    } else {
        Err(format!("grid resolution {n} must be a power of two between {MIN_GRID} and {MAX_GRID}"))
    }
}

fn check_epsilons(eps: &[f64]) -> std::result::Result<(), String> {
    if eps.is_empty() {
        return Err("epsilon list is empty".into());
    }
    match eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        Some(e) => Err(format!("epsilon {e} must be positive")),
        None => Ok(()),
    }
}

/// Parses a comma-separated ε list such as `0.2,0.1`.
pub fn parse_eps_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    let eps = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("invalid epsilon {t:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    check_epsilons(&eps)?;
    Ok(eps)
}

pub fn parse_config(path: &Path, text: &str, ov: &Overrides) -> Result<RunConfig, ConfigError> {
    let loc = Locator { path, text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| loc.at(e.span(), e.message().to_string()))?;

    let dim = *raw.potential.dim.get_ref();
    if dim == 0 {
        return Err(loc.at(Some(raw.potential.dim.span()), "dim must be at least 1"));
    }
    let source = raw.potential.expr.get_ref().clone();
    let mut potential =
        parse_potential(&source, dim).map_err(|e| loc.at(Some(raw.potential.expr.span()), e.to_string()))?;
    if let Some(name) = raw.potential.name {
        potential = potential.with_name(name);
    }

    let bbox = match raw.bbox {
        None => Bounds::cube(-2.5, 2.5, dim).expect("valid cube"),
        Some(b) => {
            let span = b.span();
            let expand = |e: &Edge| match e {
                Edge::Scalar(v) => vec![*v; dim],
                Edge::List(v) => v.clone(),
            };
            let (lo, hi) = (expand(&b.get_ref().lo), expand(&b.get_ref().hi));
            if lo.len() != dim || hi.len() != dim {
                return Err(loc.at(Some(span), format!("box corners must have {dim} coordinates")));
            }
            Bounds::new(lo, hi).map_err(|e| loc.at(Some(span), e.to_string()))?
        }
    };

    let epsilons = match (&ov.epsilons, &raw.sweep.epsilon) {
        (Some(e), _) => e.clone(),
        (None, Some(e)) => {
            check_epsilons(e.get_ref()).map_err(|m| loc.at(Some(e.span()), m))?;
            e.get_ref().clone()
        }
        (None, None) => DEFAULT_EPSILONS.to_vec(),
    };
    let grid = match (ov.grid, &raw.sweep.grid) {
        (Some(n), _) => n,
        (None, Some(n)) => {
            check_grid(*n.get_ref()).map_err(|m| loc.at(Some(n.span()), m))?;
            *n.get_ref()
        }
        (None, None) => default_grid(dim),
    };
    let saddle_grid = match &raw.sweep.saddle_grid {
        Some(n) => {
            check_grid(*n.get_ref()).map_err(|m| loc.at(Some(n.span()), m))?;
            *n.get_ref()
        }
        None => 128,
    };
    let saddle_guesses = match &raw.landscape.saddles {
        Some(g) if g.get_ref().iter().any(|x| x.len() != dim) => {
            return Err(loc.at(Some(g.span()), format!("saddle locations must have {dim} coordinates")))
        }
        Some(g) => Some(g.get_ref().clone()),
        None if dim > 2 => {
            return Err(loc.at(
                Some(raw.potential.dim.span()),
                "dim > 2 needs approximate saddle locations in [landscape] saddles",
            ))
        }
        None => None,
    };
    let lyapunov_a = match &raw.lyapunov.a {
        Some(a) if !(*a.get_ref() > 0.0) => return Err(loc.at(Some(a.span()), "lyapunov.a must be positive")),
        Some(a) => *a.get_ref(),
        None => DEFAULT_PATCH_SCALE,
    };

    Ok(RunConfig {
        path: path.to_path_buf(),
        source,
        potential,
        dim,
        bbox,
        epsilons,
        grid,
        saddle_grid,
        saddle_guesses,
        oracle: raw.oracle.enabled && !ov.no_oracle,
        lyapunov_a,
        seed: ov.seed.or(raw.run.seed).unwrap_or(0),
        out: ov.out.clone().or(raw.run.out).unwrap_or_else(|| PathBuf::from(".")),
        flip_lambda_minus: raw.fault.flip_lambda_minus,
    })
}

pub fn load_config(path: &Path, ov: &Overrides) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        path: path.to_path_buf(),
        line: 0,
        column: 0,
        message: format!("cannot read config: {e}"),
    })?;
    parse_config(path, &text, ov)
}

/// Validates a grid given on the command line.
pub fn parse_grid(s: &str) -> std::result::Result<usize, String> {
    let n: usize = s.parse().map_err(|e| format!("invalid grid {s:?}: {e}"))?;
    check_grid(n)?;
    Ok(n)
}
