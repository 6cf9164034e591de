//! Flat `key = value` run configuration.
//!
//! Lines starting with `#` are comments. Keys carry a section prefix:
//!
//! ```text
//! problem.a1 = 0        problem.b1 = 1      problem.a2 = 0   problem.b2 = 1
//! problem.T = 1         problem.c = 1       problem.S = 1
//! problem.compat_tol = 1e-9
//! problem.init1.kind = constant | sinusoid | bump | csv   (also init2..4, inflow1..4)
//! problem.default.kind = ...     fallback for fields that are not set
//!   constant: .value
//!   sinusoid: .offset .amplitude .ka .kb .pa .pb
//!   bump:     .offset .amplitude .center_a .center_b .width
//!   csv:      .path   (relative to the config file)
//! solver.grid.n = 32    or solver.grid.n1 / n2 / n3
//! solver.max_iters = 100          solver.abs_tol = 1e-10
//! solver.sigma.enabled = false    solver.sigma.value = 2cS
//! solver.guess = free_streaming | zero | constant    solver.guess.value = 0
//! solver.quad.rule = trapezoid | simpson             solver.quad.max_step = h
//! oracle.nx / oracle.ny / oracle.nt   oracle.tolerance = 0.05
//! output.dir = out   output.nx = 33   output.ny = 33   output.moments = false
//! output.slices = 0,0.5,1
//! ```
//!
//! Numbers may be written as fractions such as `1/432`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::domain_data::{inflow_rect, Bump, DataField, ProblemData, Rect, Sinusoid, SpaceTimeBox, DEFAULT_COMPAT_TOL};
use crate::error::{Error, Result};
use crate::mild_operator::{QuadratureConfig, QuadratureRule};
use crate::model::ModelParams;
use crate::solver::{InitialGuess, SolverConfig};

const FIELD_NAMES: [&str; 8] = [
    "init1", "init2", "init3", "init4", "inflow1", "inflow2", "inflow3", "inflow4",
];

const FIELD_PARAMS: [&str; 11] = [
    "value",
    "offset",
    "amplitude",
    "ka",
    "kb",
    "pa",
    "pb",
    "center_a",
    "center_b",
    "width",
    "path",
];

const PLAIN_KEYS: [&str; 29] = [
    "problem.a1",
    "problem.b1",
    "problem.a2",
    "problem.b2",
    "problem.T",
    "problem.c",
    "problem.S",
    "problem.compat_tol",
    "solver.grid.n",
    "solver.grid.n1",
    "solver.grid.n2",
    "solver.grid.n3",
    "solver.max_iters",
    "solver.abs_tol",
    "solver.sigma.enabled",
    "solver.sigma.value",
    "solver.guess",
    "solver.guess.value",
    "solver.quad.rule",
    "solver.quad.max_step",
    "oracle.nx",
    "oracle.ny",
    "oracle.nt",
    "oracle.tolerance",
    "output.dir",
    "output.nx",
    "output.ny",
    "output.moments",
    "output.slices",
];

#[derive(Debug, Clone, PartialEq)]
pub struct OracleConfig {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub nt: Option<usize>,
    /// Largest accepted relative sup error against the upwind solution.
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub nx: usize,
    pub ny: usize,
    pub moments: bool,
    pub slices: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub path: PathBuf,
    pub data: ProblemData,
    pub compat_tol: f64,
    pub solver: SolverConfig,
    pub oracle: OracleConfig,
    pub output: OutputConfig,
}

struct Entry {
    value: String,
    line: usize,
}

struct Parsed<'a> {
    path: &'a Path,
    entries: BTreeMap<String, Entry>,
}

impl Parsed<'_> {
    fn err(&self, line: Option<usize>, msg: impl Into<String>) -> Error {
        Error::Config {
            path: self.path.to_path_buf(),
            line,
            msg: msg.into(),
        }
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        parse_number(&e.value)
            .map(Some)
            .ok_or_else(|| self.err(Some(e.line), format!("{key}: expected a number, got {:?}", e.value)))
    }

    fn number_or(&self, key: &str, default: f64) -> Result<f64> {
        Ok(self.number(key)?.unwrap_or(default))
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.number(key)?
            .ok_or_else(|| self.err(None, format!("missing required key {key}")))
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value.parse::<usize>().map(Some).map_err(|_| {
            self.err(
                Some(e.line),
                format!("{key}: expected a non-negative integer, got {:?}", e.value),
            )
        })
    }

    fn flag(&self, key: &str) -> Result<Option<bool>> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        match e.value.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" | "on" => Ok(Some(true)),
            "false" | "no" | "0" | "off" => Ok(Some(false)),
            other => Err(self.err(Some(e.line), format!("{key}: expected true or false, got {other:?}"))),
        }
    }
}

/// `1.5`, `-2e-3` or a fraction `1/432`.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().ok()? / b.trim().parse::<f64>().ok()?,
        None => s.parse::<f64>().ok()?,
    };
    v.is_finite().then_some(v)
}

/// Comma-separated list of time slices.
pub fn parse_slices(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(parse_number).collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            line: None,
            msg: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    /// Parses configuration text; `path` anchors errors and relative CSV paths.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut p = Parsed {
            path,
            entries: BTreeMap::new(),
        };
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(p.err(Some(line), format!("expected key = value, got {content:?}")));
            };
            let key = key.trim();
            let value = value.trim();
            if !known_key(key) {
                return Err(p.err(Some(line), format!("unknown key {key}")));
            }
            if let Some(prev) = p.entries.get(key) {
                return Err(p.err(
                    Some(line),
                    format!("duplicate key {key} (first set on line {})", prev.line),
                ));
            }
            p.entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line,
                },
            );
        }

        let bx = SpaceTimeBox::new(
            p.required("problem.a1")?,
            p.required("problem.b1")?,
            p.required("problem.a2")?,
            p.required("problem.b2")?,
            p.required("problem.T")?,
        )
        .map_err(|e| p.err(p.line("problem.T"), e.to_string()))?;
        let params = ModelParams::axis_aligned(p.required("problem.c")?, p.required("problem.S")?)
            .map_err(|e| p.err(p.line("problem.S"), e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut fields: Vec<DataField> = Vec::with_capacity(8);
        for (k, name) in FIELD_NAMES.iter().enumerate() {
            let rect = if k < 4 { bx.space() } else { inflow_rect(&bx, k - 4) };
            fields.push(field(&p, name, rect, base)?);
        }
        let inflow: [DataField; 4] = std::array::from_fn(|k| fields[k + 4].clone());
        let init: [DataField; 4] = std::array::from_fn(|k| fields[k].clone());
        let data = ProblemData::new(bx, params, init, inflow).map_err(|e| p.err(None, e.to_string()))?;

        let compat_tol = p.number_or("problem.compat_tol", DEFAULT_COMPAT_TOL)?;
        let solver = solver_config(&p, &params)?;
        let oracle = OracleConfig {
            nx: p.count("oracle.nx")?,
            ny: p.count("oracle.ny")?,
            nt: p.count("oracle.nt")?,
            tolerance: p.number_or("oracle.tolerance", 0.05)?,
        };
        let slices = match p.raw("output.slices") {
            Some(s) => {
                Some(parse_slices(s).ok_or_else(|| p.err(p.line("output.slices"), format!("bad slice list {s:?}")))?)
            }
            None => None,
        };
        let output = OutputConfig {
            dir: base.join(p.raw("output.dir").unwrap_or("out")),
            nx: p.count("output.nx")?.unwrap_or(33).max(2),
            ny: p.count("output.ny")?.unwrap_or(33).max(2),
            moments: p.flag("output.moments")?.unwrap_or(false),
            slices,
        };
        Ok(Self {
            path: path.to_path_buf(),
            data,
            compat_tol,
            solver,
            oracle,
            output,
        })
    }
}

fn known_key(key: &str) -> bool {
    if PLAIN_KEYS.contains(&key) {
        return true;
    }
    let Some(rest) = key.strip_prefix("problem.") else {
        return false;
    };
    let Some((name, param)) = rest.split_once('.') else {
        return false;
    };
    (FIELD_NAMES.contains(&name) || name == "default") && (param == "kind" || FIELD_PARAMS.contains(&param))
}

fn field(p: &Parsed, name: &str, rect: Rect, base: &Path) -> Result<DataField> {
    let own = format!("problem.{name}.kind");
    let prefix = if p.raw(&own).is_some() {
        format!("problem.{name}")
    } else {
        "problem.default".to_string()
    };
    let kind_key = format!("{prefix}.kind");
    let Some(kind) = p.raw(&kind_key) else {
        return Err(p.err(None, format!("no data for {name}: set {own} or problem.default.kind")));
    };
    let line = p.line(&kind_key);
    let num = |param: &str, default: Option<f64>| -> Result<f64> {
        let key = format!("{prefix}.{param}");
        match (p.number(&key)?, default) {
            (Some(v), _) => Ok(v),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(p.err(line, format!("{kind} field {name} needs {key}"))),
        }
    };
    let f = match kind {
        "constant" => DataField::constant(rect, num("value", None)?),
        "sinusoid" => DataField::sinusoid(
            rect,
            Sinusoid {
                offset: num("offset", Some(0.0))?,
                amplitude: num("amplitude", None)?,
                ka: num("ka", Some(0.0))?,
                kb: num("kb", Some(0.0))?,
                pa: num("pa", Some(0.0))?,
                pb: num("pb", Some(0.0))?,
            },
        ),
        "bump" => DataField::bump(
            rect,
            Bump {
                offset: num("offset", Some(0.0))?,
                amplitude: num("amplitude", None)?,
                center_a: num("center_a", None)?,
                center_b: num("center_b", None)?,
                width: num("width", None)?,
            },
        )
        .map_err(|e| p.err(line, format!("{name}: {e}")))?,
        "csv" => {
            let key = format!("{prefix}.path");
            let rel = p
                .raw(&key)
                .ok_or_else(|| p.err(line, format!("csv field {name} needs {key}")))?;
            DataField::from_csv(&base.join(rel)).map_err(|e| p.err(p.line(&key), format!("{name}: {e}")))?
        }
        other => {
            return Err(p.err(
                line,
                format!("{kind_key}: unknown kind {other:?} (expected constant, sinusoid, bump or csv)"),
            ))
        }
    };
    let (lo, _) = f.value_range();
    if lo < 0.0 {
        return Err(p.err(line, format!("{name} takes negative value {lo}")));
    }
    Ok(f)
}

fn solver_config(p: &Parsed, params: &ModelParams) -> Result<SolverConfig> {
    let defaults = SolverConfig::default();
    let n = p.count("solver.grid.n")?.unwrap_or(defaults.grid[0]);
    let grid = [
        p.count("solver.grid.n1")?.unwrap_or(n),
        p.count("solver.grid.n2")?.unwrap_or(n),
        p.count("solver.grid.n3")?.unwrap_or(n),
    ];
    if grid.iter().any(|&k| k < 3) {
        return Err(p.err(
            p.line("solver.grid.n"),
            format!("grid needs at least 3 nodes per axis, got {grid:?}"),
        ));
    }
    let max_iters = p.count("solver.max_iters")?.unwrap_or(defaults.max_iters);
    if max_iters < 1 {
        return Err(p.err(p.line("solver.max_iters"), "solver.max_iters must be >= 1"));
    }
    let abs_tol = p.number_or("solver.abs_tol", defaults.abs_tol)?;
    if !(abs_tol > 0.0) {
        return Err(p.err(p.line("solver.abs_tol"), "solver.abs_tol must be > 0"));
    }
    let use_sigma = p.flag("solver.sigma.enabled")?.unwrap_or(false);
    let sigma = p.number("solver.sigma.value")?;
    if let Some(s) = sigma {
        if s < params.collision_rate() {
            return Err(p.err(
                p.line("solver.sigma.value"),
                format!("solver.sigma.value = {s} is below 2cS = {}", params.collision_rate()),
            ));
        }
    }
    let initial_guess = match p.raw("solver.guess").unwrap_or("free_streaming") {
        "zero" => InitialGuess::Zero,
        "free_streaming" => InitialGuess::FreeStreaming,
        "constant" => InitialGuess::Constant(p.number_or("solver.guess.value", 0.0)?),
        other => {
            return Err(p.err(
                p.line("solver.guess"),
                format!("unknown guess {other:?} (expected zero, free_streaming or constant)"),
            ))
        }
    };
    let rule = match p.raw("solver.quad.rule").unwrap_or("trapezoid") {
        "trapezoid" => QuadratureRule::Trapezoid,
        "simpson" => QuadratureRule::Simpson,
        other => {
            return Err(p.err(
                p.line("solver.quad.rule"),
                format!("unknown rule {other:?} (expected trapezoid or simpson)"),
            ))
        }
    };
    let max_step = p.number("solver.quad.max_step")?;
    if let Some(h) = max_step {
        if !(h > 0.0) {
            return Err(p.err(p.line("solver.quad.max_step"), "solver.quad.max_step must be > 0"));
        }
    }
    Ok(SolverConfig {
        max_iters,
        abs_tol,
        use_sigma,
        sigma,
        initial_guess,
        grid,
        quad: QuadratureConfig { rule, max_step },
        override_gate: false,
    })
}
