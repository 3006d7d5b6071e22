//! Sectioned key=value experiment configuration.
//!
//! The format is deliberately dumb: `[section]` headers, `key = value`
//! lines, `#` comments, blank lines ignored. Values are whitespace-separated
//! tokens. Unknown sections or keys are rejected so that typos fail loudly
//! instead of silently running with defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use aplab_core::blowup::rho_constant;
use aplab_core::fieldio::read_field_path;
use aplab_core::grid::{CoefficientPair, GridSpec, ScalarField};
use aplab_core::minimize::SolverParams;
use aplab_core::suite::{holder_bump_gamma, profile_datum};
use aplab_core::{ApError, Result};
use sha2::{Digest, Sha256};

fn parse_err(msg: impl Into<String>) -> ApError {
    ApError::Parse(msg.into())
}

// ---------------------------------------------------------------------------
// Raw key=value layer.

struct RawConfig {
    entries: BTreeMap<(String, String), Vec<String>>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(k) => &raw[..k],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| parse_err(format!("line {}: unterminated section header", lineno + 1)))?;
                section = name.trim().to_ascii_lowercase();
                if section.is_empty() {
                    return Err(parse_err(format!("line {}: empty section name", lineno + 1)));
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(format!("line {}: expected `key = value`", lineno + 1)))?;
            if section.is_empty() {
                return Err(parse_err(format!("line {}: key outside any [section]", lineno + 1)));
            }
            let key = key.trim().to_ascii_lowercase();
            let tokens: Vec<String> = value.split_whitespace().map(str::to_owned).collect();
            if tokens.is_empty() {
                return Err(parse_err(format!("line {}: `{key}` has no value", lineno + 1)));
            }
            if entries.insert((section.clone(), key.clone()), tokens).is_some() {
                return Err(parse_err(format!("line {}: duplicate key `{section}.{key}`", lineno + 1)));
            }
        }
        Ok(RawConfig { entries })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Vec<String>> {
        self.entries.remove(&(section.to_owned(), key.to_owned()))
    }

    /// Error out on anything nobody consumed.
    fn finish(self) -> Result<()> {
        if let Some(((s, k), _)) = self.entries.into_iter().next() {
            return Err(parse_err(format!("unknown key `{s}.{k}`")));
        }
        Ok(())
    }
}

fn floats(section: &str, key: &str, tokens: &[String], want: usize) -> Result<Vec<f64>> {
    if tokens.len() != want {
        return Err(parse_err(format!(
            "`{section}.{key}` wants {want} number(s), got {}",
            tokens.len()
        )));
    }
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse_err(format!("`{section}.{key}`: `{t}` is not a number")))
        })
        .collect()
}

fn one_f64(section: &str, key: &str, tokens: &[String]) -> Result<f64> {
    Ok(floats(section, key, tokens, 1)?[0])
}

fn one_usize(section: &str, key: &str, tokens: &[String]) -> Result<usize> {
    if tokens.len() != 1 {
        return Err(parse_err(format!("`{section}.{key}` wants one integer")));
    }
    tokens[0]
        .parse::<usize>()
        .map_err(|_| parse_err(format!("`{section}.{key}`: `{}` is not a nonnegative integer", tokens[0])))
}

fn one_bool(section: &str, key: &str, tokens: &[String]) -> Result<bool> {
    if tokens.len() == 1 {
        match tokens[0].as_str() {
            "true" | "yes" | "1" => return Ok(true),
            "false" | "no" | "0" => return Ok(false),
            _ => {}
        }
    }
    Err(parse_err(format!("`{section}.{key}` wants true or false")))
}

// ---------------------------------------------------------------------------
// Coefficient families.

/// A scalar coefficient over the domain, parameterized along the first
/// coordinate. Exponent fields are clamped into [0.05, 1]; weight fields
/// are clamped from below at 0.05 so the energy stays well posed for any
/// parameter choice.
#[derive(Debug, Clone)]
pub enum Family {
    Constant(f64),
    /// `a + b·x₁`.
    Affine(f64, f64),
    /// `base + a·|x₁ − x₀|^μ`.
    HolderBump { base: f64, a: f64, mu: f64, x0: f64 },
    /// `mean + amp·sin(freq·x₁)`.
    Sinusoid { mean: f64, amp: f64, freq: f64 },
}

impl Family {
    fn parse(section: &str, raw: &mut RawConfig) -> Result<Family> {
        let fam = raw
            .take(section, "family")
            .ok_or_else(|| parse_err(format!("missing `{section}.family`")))?;
        if fam.len() != 1 {
            return Err(parse_err(format!("`{section}.family` wants one name")));
        }
        let params = raw
            .take(section, "params")
            .ok_or_else(|| parse_err(format!("missing `{section}.params`")))?;
        match fam[0].as_str() {
            "constant" => Ok(Family::Constant(one_f64(section, "params", &params)?)),
            "affine" => {
                let p = floats(section, "params", &params, 2)?;
                Ok(Family::Affine(p[0], p[1]))
            }
            "holder_bump" => {
                let p = floats(section, "params", &params, 4)?;
                if !(p[2] > 0.0) {
                    return Err(parse_err(format!("`{section}.params`: bump exponent must be positive")));
                }
                Ok(Family::HolderBump { base: p[0], a: p[1], mu: p[2], x0: p[3] })
            }
            "sinusoid" => {
                let p = floats(section, "params", &params, 3)?;
                Ok(Family::Sinusoid { mean: p[0], amp: p[1], freq: p[2] })
            }
            other => Err(parse_err(format!(
                "`{section}.family`: unknown family `{other}` (constant, affine, holder_bump, sinusoid)"
            ))),
        }
    }

    fn raw_value(&self, x1: f64) -> f64 {
        match *self {
            Family::Constant(c) => c,
            Family::Affine(a, b) => a + b * x1,
            Family::HolderBump { base, a, mu, x0 } => base + a * (x1 - x0).abs().powf(mu),
            Family::Sinusoid { mean, amp, freq } => mean + amp * (freq * x1).sin(),
        }
    }

    /// Exponent field, clamped into [0.05, 1].
    pub fn build_exponent(&self, grid: &GridSpec) -> Result<ScalarField> {
        if let Family::HolderBump { base, a, mu, x0 } = *self {
            return holder_bump_gamma(grid, base, a, mu, x0);
        }
        ScalarField::from_fn(grid.clone(), |p| self.raw_value(p[0]).clamp(0.05, 1.0))
    }

    /// Weight field, clamped from below at 0.05.
    pub fn build_weight(&self, grid: &GridSpec) -> Result<ScalarField> {
        ScalarField::from_fn(grid.clone(), |p| self.raw_value(p[0]).max(0.05))
    }

    /// Default exponent-modulus metadata `(μ, seminorm)` when none is given
    /// explicitly: the family's own modulus where it has one, otherwise its
    /// Lipschitz constant over the axis range.
    fn default_holder(&self, grid: &GridSpec) -> Option<(f64, f64)> {
        match *self {
            Family::Constant(_) => None,
            Family::Affine(_, b) => Some((1.0, b.abs())),
            Family::Sinusoid { amp, freq, .. } => Some((1.0, (amp * freq).abs())),
            Family::HolderBump { a, mu, x0, .. } => {
                if mu <= 1.0 {
                    Some((mu, a.abs()))
                } else {
                    let reach = (grid.origin(0) - x0).abs().max((grid.upper(0) - x0).abs());
                    Some((1.0, (a * mu).abs() * reach.powf(mu - 1.0)))
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Boundary data.

#[derive(Debug, Clone)]
pub enum BoundarySpec {
    Constant(f64),
    /// The one-sided power profile for constant `(γ₀, δ₀)`, direction ν,
    /// front offset along ν.
    ProfileTrace { gamma0: f64, delta0: f64, nu: [f64; 2], offset: f64 },
    /// A stored field; only its boundary trace constrains the solve.
    FieldFile(PathBuf),
}

impl BoundarySpec {
    fn parse(raw: &mut RawConfig, dim: usize, config_dir: &Path) -> Result<BoundarySpec> {
        let fam = raw
            .take("boundary", "family")
            .ok_or_else(|| parse_err("missing `boundary.family`".to_string()))?;
        if fam.len() != 1 {
            return Err(parse_err("`boundary.family` wants one name"));
        }
        match fam[0].as_str() {
            "constant" => {
                let params = raw
                    .take("boundary", "params")
                    .ok_or_else(|| parse_err("missing `boundary.params`"))?;
                Ok(BoundarySpec::Constant(one_f64("boundary", "params", &params)?))
            }
            "profile_trace" => {
                let params = raw
                    .take("boundary", "params")
                    .ok_or_else(|| parse_err("missing `boundary.params`"))?;
                // γ₀ δ₀ ν (dim components) offset
                let p = floats("boundary", "params", &params, 3 + dim)?;
                let nu = if dim == 1 { [p[2], 0.0] } else { [p[2], p[3]] };
                Ok(BoundarySpec::ProfileTrace { gamma0: p[0], delta0: p[1], nu, offset: p[2 + dim] })
            }
            "field_file" => {
                let path = raw
                    .take("boundary", "path")
                    .ok_or_else(|| parse_err("missing `boundary.path`"))?;
                if path.len() != 1 {
                    return Err(parse_err("`boundary.path` wants one path"));
                }
                Ok(BoundarySpec::FieldFile(config_dir.join(&path[0])))
            }
            other => Err(parse_err(format!(
                "`boundary.family`: unknown family `{other}` (constant, profile_trace, field_file)"
            ))),
        }
    }

    pub fn build(&self, grid: &GridSpec) -> Result<ScalarField> {
        match self {
            BoundarySpec::Constant(c) => ScalarField::constant(grid.clone(), *c),
            BoundarySpec::ProfileTrace { gamma0, delta0, nu, offset } => {
                // Surface the parameter errors early (γ₀ outside (0, 1] etc).
                rho_constant(*gamma0, *delta0)?;
                profile_datum(grid, *gamma0, *delta0, *nu, *offset)
            }
            BoundarySpec::FieldFile(path) => {
                let f = read_field_path(path)?;
                if f.grid() != grid {
                    return Err(ApError::GridMismatch(format!(
                        "field file {} lives on a different grid than the [grid] section",
                        path.display()
                    )));
                }
                Ok(f)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Solver / analysis / output sections.

#[derive(Debug, Clone)]
pub struct SolverSection {
    /// Multilevel driver (coarse-to-fine warm starts). On by default; the
    /// remaining knobs configure the single-level solver and require
    /// `cascade = false`.
    pub cascade: bool,
    pub epsilon: Option<Vec<f64>>,
    pub max_iters: Option<usize>,
    pub pg_tol: Option<f64>,
    pub stall_patience: Option<usize>,
}

impl SolverSection {
    fn parse(raw: &mut RawConfig) -> Result<SolverSection> {
        let cascade = match raw.take("solver", "cascade") {
            Some(t) => one_bool("solver", "cascade", &t)?,
            None => true,
        };
        let epsilon = match raw.take("solver", "epsilon") {
            Some(t) => Some(
                t.iter()
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| parse_err(format!("`solver.epsilon`: `{s}` is not a number")))
                    })
                    .collect::<Result<Vec<f64>>>()?,
            ),
            None => None,
        };
        let max_iters = raw.take("solver", "max_iters").map(|t| one_usize("solver", "max_iters", &t)).transpose()?;
        let pg_tol = raw.take("solver", "pg_tol").map(|t| one_f64("solver", "pg_tol", &t)).transpose()?;
        let stall_patience = raw
            .take("solver", "stall_patience")
            .map(|t| one_usize("solver", "stall_patience", &t))
            .transpose()?;
        let s = SolverSection { cascade, epsilon, max_iters, pg_tol, stall_patience };
        if s.cascade && (s.epsilon.is_some() || s.max_iters.is_some() || s.pg_tol.is_some() || s.stall_patience.is_some())
        {
            return Err(parse_err(
                "the multilevel driver fixes its own schedule; set `solver.cascade = false` to override knobs",
            ));
        }
        Ok(s)
    }

    pub fn params(&self, grid: &GridSpec) -> SolverParams {
        let mut p = SolverParams::for_grid(grid);
        if let Some(eps) = &self.epsilon {
            p.epsilon_schedule = eps.clone();
        }
        if let Some(n) = self.max_iters {
            p.max_iters = n;
        }
        if let Some(t) = self.pg_tol {
            p.pg_tol = t;
        }
        if let Some(n) = self.stall_patience {
            p.stall_patience = n;
        }
        p
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisSection {
    /// Inner fit/series radius; default 8·h.
    pub r_min: Option<f64>,
    pub r_max: f64,
    pub count: usize,
    /// Positivity floor; default from the grid and exponent bound.
    pub floor: Option<f64>,
    pub angular_samples: usize,
    /// Monotonicity slack for the boundary-energy series.
    pub slack: f64,
    /// Sup-gap tolerance for the rescaling family.
    pub cauchy_tol: f64,
}

impl AnalysisSection {
    fn parse(raw: &mut RawConfig) -> Result<AnalysisSection> {
        let r_min = raw.take("analysis", "r_min").map(|t| one_f64("analysis", "r_min", &t)).transpose()?;
        let r_max = match raw.take("analysis", "r_max") {
            Some(t) => one_f64("analysis", "r_max", &t)?,
            None => 0.25,
        };
        let count = match raw.take("analysis", "count") {
            Some(t) => one_usize("analysis", "count", &t)?,
            None => 6,
        };
        let floor = raw.take("analysis", "floor").map(|t| one_f64("analysis", "floor", &t)).transpose()?;
        let angular_samples = match raw.take("analysis", "angular_samples") {
            Some(t) => one_usize("analysis", "angular_samples", &t)?,
            None => 512,
        };
        let slack = match raw.take("analysis", "slack") {
            Some(t) => one_f64("analysis", "slack", &t)?,
            None => 0.02,
        };
        let cauchy_tol = match raw.take("analysis", "cauchy_tol") {
            Some(t) => one_f64("analysis", "cauchy_tol", &t)?,
            None => 0.05,
        };
        if count < 3 {
            return Err(parse_err("`analysis.count`: need at least 3 radii"));
        }
        Ok(AnalysisSection { r_min, r_max, count, floor, angular_samples, slack, cauchy_tol })
    }

    pub fn resolved_r_min(&self, grid: &GridSpec) -> f64 {
        self.r_min.unwrap_or(8.0 * grid.h_min())
    }

    /// Strictly increasing geometric ladder `r_min … r_max`.
    pub fn radii_up(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        let lo = self.resolved_r_min(grid);
        if !(lo > 0.0 && self.r_max > lo) {
            return Err(ApError::InvalidParam(format!(
                "analysis radii must satisfy 0 < r_min < r_max (got {lo} .. {})",
                self.r_max
            )));
        }
        let q = (self.r_max / lo).powf(1.0 / (self.count as f64 - 1.0));
        Ok((0..self.count).map(|k| lo * q.powi(k as i32)).collect())
    }

    pub fn radii_down(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        let mut r = self.radii_up(grid)?;
        r.reverse();
        Ok(r)
    }
}

#[derive(Debug, Clone)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub emit_plots: bool,
}

impl OutputSection {
    fn parse(raw: &mut RawConfig) -> Result<OutputSection> {
        let dir = match raw.take("output", "dir") {
            Some(t) => {
                if t.len() != 1 {
                    return Err(parse_err("`output.dir` wants one path"));
                }
                PathBuf::from(&t[0])
            }
            None => PathBuf::from("out"),
        };
        let emit_plots = match raw.take("output", "emit_plots") {
            Some(t) => one_bool("output", "emit_plots", &t)?,
            None => false,
        };
        Ok(OutputSection { dir, emit_plots })
    }
}

// ---------------------------------------------------------------------------
// The whole experiment.

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub gamma: Family,
    pub delta: Family,
    /// Exponent modulus metadata `(μ, seminorm)` fed to the analysis layer.
    pub holder: Option<(f64, f64)>,
    pub boundary: BoundarySpec,
    pub solver: SolverSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
    /// SHA-256 of the config file bytes, for output manifests.
    pub hash: String,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let bytes = std::fs::read(path)?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|_| parse_err(format!("{} is not UTF-8", path.display())))?;
        let hash = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect::<String>();
        let dir = path.parent().unwrap_or_else(|| Path::new(".")).to_owned();
        Self::parse(&text, &dir, hash)
    }

    fn parse(text: &str, config_dir: &Path, hash: String) -> Result<ExperimentConfig> {
        let mut raw = RawConfig::parse(text)?;

        let dim = {
            let t = raw.take("grid", "dim").ok_or_else(|| parse_err("missing `grid.dim`"))?;
            let d = one_usize("grid", "dim", &t)?;
            if d != 1 && d != 2 {
                return Err(parse_err("`grid.dim` must be 1 or 2"));
            }
            d
        };
        let cells = {
            let t = raw.take("grid", "cells").ok_or_else(|| parse_err("missing `grid.cells`"))?;
            if t.len() != dim {
                return Err(parse_err(format!("`grid.cells` wants {dim} integer(s)")));
            }
            let mut c = [0usize; 2];
            for (k, tok) in t.iter().enumerate() {
                c[k] = tok
                    .parse()
                    .map_err(|_| parse_err(format!("`grid.cells`: `{tok}` is not an integer")))?;
            }
            c
        };
        let lo = match raw.take("grid", "lo") {
            Some(t) => {
                let v = floats("grid", "lo", &t, dim)?;
                [v[0], *v.get(1).unwrap_or(&0.0)]
            }
            None => [-1.0, -1.0],
        };
        let hi = match raw.take("grid", "hi") {
            Some(t) => {
                let v = floats("grid", "hi", &t, dim)?;
                [v[0], *v.get(1).unwrap_or(&0.0)]
            }
            None => [1.0, 1.0],
        };
        let grid = if dim == 1 {
            GridSpec::interval(cells[0], lo[0], hi[0])?
        } else {
            GridSpec::square(cells, lo, hi)?
        };

        let gamma = Family::parse("gamma", &mut raw)?;
        let delta = Family::parse("delta", &mut raw)?;
        let holder = {
            let mu = raw.take("gamma", "holder_mu").map(|t| one_f64("gamma", "holder_mu", &t)).transpose()?;
            let sn = raw
                .take("gamma", "holder_seminorm")
                .map(|t| one_f64("gamma", "holder_seminorm", &t))
                .transpose()?;
            match (mu, sn) {
                (Some(m), Some(s)) => Some((m, s)),
                (None, None) => gamma.default_holder(&grid),
                _ => {
                    return Err(parse_err(
                        "`gamma.holder_mu` and `gamma.holder_seminorm` must be given together",
                    ))
                }
            }
        };

        let boundary = BoundarySpec::parse(&mut raw, dim, config_dir)?;
        let solver = SolverSection::parse(&mut raw)?;
        let analysis = AnalysisSection::parse(&mut raw)?;
        let output = OutputSection::parse(&mut raw)?;
        raw.finish()?;

        Ok(ExperimentConfig { grid, gamma, delta, holder, boundary, solver, analysis, output, hash })
    }

    pub fn coefficients(&self) -> Result<CoefficientPair> {
        let g = self.gamma.build_exponent(&self.grid)?;
        let d = self.delta.build_weight(&self.grid)?;
        let mut pair = CoefficientPair::new(g, d)?;
        if let Some((mu, seminorm)) = self.holder {
            pair = pair.with_holder(mu, seminorm)?;
        }
        Ok(pair)
    }

    pub fn datum(&self) -> Result<ScalarField> {
        self.boundary.build(&self.grid)
    }
}
