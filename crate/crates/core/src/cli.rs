//! Command-line front end: `check-gate`, `solve`, `verify` and
//! `compare-oracle`, all driven by a [`RunConfig`] file.
//!
//! Exit codes: 0 success, 1 check or gate failure, 2 usage or parse error,
//! 3 internal error.

use std::ffi::OsString;
use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::config::{parse_slices, RunConfig};
use crate::domain_data::{check_compatibility, gate_report, DataField, GateReport, ProblemData};
use crate::error::{Error, Result};
use crate::grid::sup_distance;
use crate::model::{moments, Species};
use crate::oracle::{compare, free_streaming_exact, upwind_solve, FDGrid, OracleDiff};
use crate::solver::{
    derivative_bound_check, mass_balance, residual, solve, InitialGuess, Solution, SolverConfig, Status,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Relative slack on `‖N‖ ≤ bound_B`.
const BOUND_SLACK: f64 = 1.05;
/// Slack on the derivative bounds.
const DERIVATIVE_SLACK: f64 = 1.1;
/// Slack on the Picard ratio against `κ`.
const RATIO_SLACK: f64 = 1.1;
/// Largest accepted relative mass and momentum balance defect.
const BALANCE_TOL: f64 = 1e-3;
/// Negative values down to `−POSITIVITY_TOL·‖N‖` count as round-off.
const POSITIVITY_TOL: f64 = 1e-8;
/// Default upwind resolution per space axis.
const ORACLE_DEFAULT_N: usize = 64;
/// Time levels used for the mass balance.
const BALANCE_SLICES: usize = 17;
/// Trapezoid nodes per space axis for the mass balance.
const BALANCE_SPACE: usize = 65;

#[derive(Debug, Parser)]
#[command(name = "broadwell", version, about = "Broadwell model mild-solution solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report the smallness gate and the a-priori bounds.
    CheckGate(CommonArgs),
    /// Run the Picard iteration and write fields and a summary.
    Solve(SolveArgs),
    /// Run the property checks and print a pass/fail table.
    Verify(CommonArgs),
    /// Compare the fixed-point solution with the upwind scheme.
    CompareOracle(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Suppress standard output.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Iterate even when the gate fails.
    #[arg(long)]
    pub override_gate: bool,
    /// Output time slices, comma separated.
    #[arg(long, value_name = "T0,T1,...", value_parser = slice_list)]
    pub slices: Option<SliceList>,
}

#[derive(Debug, Clone)]
pub struct SliceList(pub Vec<f64>);

fn slice_list(s: &str) -> std::result::Result<SliceList, String> {
    parse_slices(s)
        .map(SliceList)
        .ok_or_else(|| format!("expected comma-separated numbers, got {s:?}"))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{e}");
                    EXIT_USAGE
                }
            };
        }
    };
    let quiet = match &cli.command {
        Command::CheckGate(a) | Command::Verify(a) | Command::CompareOracle(a) => a.quiet,
        Command::Solve(a) => a.common.quiet,
    };
    let mut sink = Report { w: out, quiet };
    let result = match &cli.command {
        Command::CheckGate(a) => cmd_check_gate(&a.config, &mut sink),
        Command::Solve(a) => cmd_solve(a, &mut sink),
        Command::Verify(a) => cmd_verify(&a.config, &mut sink),
        Command::CompareOracle(a) => cmd_compare_oracle(&a.config, &mut sink),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Exit code for an error that aborted a command.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => EXIT_USAGE,
        Error::GateViolation { .. } | Error::Diverged(_) | Error::NotContractive(_) => EXIT_CHECK_FAILED,
        _ => EXIT_INTERNAL,
    }
}

struct Report<'a> {
    w: &'a mut dyn Write,
    quiet: bool,
}

impl Report<'_> {
    fn kv(&mut self, key: &str, value: impl Display) {
        if !self.quiet {
            let _ = writeln!(self.w, "{key}: {value}");
        }
    }

    fn line(&mut self, text: impl Display) {
        if !self.quiet {
            let _ = writeln!(self.w, "{text}");
        }
    }
}

fn gate_lines(g: &GateReport) -> Vec<(&'static str, String)> {
    vec![
        ("p", fmt(g.p)),
        ("p_prime", fmt(g.p_prime)),
        ("q", fmt(g.q)),
        ("pq", fmt(g.pq)),
        ("gate", if g.gate_ok { "ok".into() } else { "violated".into() }),
        ("r_lo", fmt(g.r_lo)),
        ("r_hi", fmt(g.r_hi)),
        ("bound_B", fmt(g.bound_b)),
        ("bound_full", fmt(g.bound_full)),
        ("max_scale", fmt(g.max_scale)),
    ]
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "undefined".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

fn compat_summary(cfg: &RunConfig) -> (bool, String) {
    let v = check_compatibility(&cfg.data, cfg.compat_tol);
    match v.iter().max_by(|a, b| a.mismatch.total_cmp(&b.mismatch)) {
        None => (true, "ok".into()),
        Some(worst) => (
            false,
            format!(
                "{} violations, worst {:.3e} for species {} at {}",
                v.len(),
                worst.mismatch,
                worst.species.number(),
                worst.coord
            ),
        ),
    }
}

fn cmd_check_gate(path: &Path, out: &mut Report) -> Result<i32> {
    let cfg = RunConfig::load(path)?;
    let gate = gate_report(&cfg.data)?;
    for (k, v) in gate_lines(&gate) {
        out.kv(k, v);
    }
    out.kv("compatibility", compat_summary(&cfg).1);
    Ok(if gate.gate_ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_solve(args: &SolveArgs, out: &mut Report) -> Result<i32> {
    let cfg = RunConfig::load(&args.common.config)?;
    let bx = cfg.data.bx;
    let slices = args
        .slices
        .as_ref()
        .map(|s| s.0.clone())
        .or_else(|| cfg.output.slices.clone())
        .unwrap_or_else(|| vec![0.0, 0.5 * bx.t, bx.t]);
    if let Some(t) = slices.iter().find(|&&t| !(0.0..=bx.t).contains(&t)) {
        return Err(Error::Config {
            path: cfg.path.clone(),
            line: None,
            msg: format!("slice t = {t} lies outside [0, {}]", bx.t),
        });
    }
    let mut solver = cfg.solver.clone();
    solver.override_gate = args.override_gate;
    let gate = gate_report(&cfg.data)?;
    if !gate.gate_ok && !args.override_gate {
        out.kv("pq", fmt(gate.pq));
        out.kv("max_scale", fmt(gate.max_scale));
        return Err(Error::GateViolation { pq: gate.pq });
    }
    let sol = solve(&cfg.data, &solver)?;
    std::fs::create_dir_all(&cfg.output.dir).map_err(|e| write_err(&cfg.output.dir, e))?;
    for (k, &t) in slices.iter().enumerate() {
        write_slice(&cfg, &sol, k, t)?;
    }
    let summary = summary_lines(&cfg, &sol, &slices);
    let path = cfg.output.dir.join("summary.txt");
    let mut f = BufWriter::new(File::create(&path).map_err(|e| write_err(&path, e))?);
    for (k, v) in &summary {
        writeln!(f, "{k}: {v}").map_err(|e| write_err(&path, e))?;
    }
    f.flush().map_err(|e| write_err(&path, e))?;
    for (k, v) in &summary {
        out.kv(k, v);
    }
    out.kv("output", cfg.output.dir.display());
    Ok(match sol.status() {
        Status::Converged => EXIT_OK,
        _ => EXIT_CHECK_FAILED,
    })
}

fn write_err(path: &Path, source: std::io::Error) -> Error {
    Error::Write {
        path: path.to_path_buf(),
        source,
    }
}

/// `fields_tK.csv`, `nI_tK.csv` and optionally `moments_tK.csv` for slice `k`.
fn write_slice(cfg: &RunConfig, sol: &Solution, k: usize, t: f64) -> Result<()> {
    let bx = cfg.data.bx;
    let (nx, ny) = (cfg.output.nx, cfg.output.ny);
    let at = |i: usize, n: usize, lo: f64, hi: f64| {
        if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let mut values = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            let (x, y) = (at(i, nx, bx.a1, bx.b1), at(j, ny, bx.a2, bx.b2));
            values.push((x, y, sol.density(t, x, y)));
        }
    }
    let dir = &cfg.output.dir;
    let path = dir.join(format!("fields_t{k}.csv"));
    let mut f = BufWriter::new(File::create(&path).map_err(|e| write_err(&path, e))?);
    let mut body = String::from("t,x,y,n1,n2,n3,n4\n");
    for (x, y, n) in &values {
        body.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt(t),
            fmt(*x),
            fmt(*y),
            fmt(n.n1),
            fmt(n.n2),
            fmt(n.n3),
            fmt(n.n4)
        ));
    }
    f.write_all(body.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|e| write_err(&path, e))?;

    for s in Species::ALL {
        let grid: Vec<f64> = values.iter().map(|(_, _, n)| n.to_array()[s.index()]).collect();
        let field = DataField::grid(bx.space(), nx, ny, grid)?;
        field.write_csv(&dir.join(format!("n{}_t{k}.csv", s.number())), nx, ny)?;
    }

    if cfg.output.moments {
        let path = dir.join(format!("moments_t{k}.csv"));
        let mut body = String::from("t,x,y,rho,u,v\n");
        for (x, y, n) in &values {
            let (rho, u, v) = match moments(n, &cfg.data.params) {
                Ok(m) => (m.rho, m.u, m.v),
                Err(_) => (0.0, f64::NAN, f64::NAN),
            };
            body.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt(t),
                fmt(*x),
                fmt(*y),
                fmt(rho),
                fmt(u),
                fmt(v)
            ));
        }
        std::fs::write(&path, body).map_err(|e| write_err(&path, e))?;
    }
    Ok(())
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Converged => "converged",
        Status::MaxIters => "max_iters",
        Status::Diverged => "diverged",
    }
}

/// Largest node deviation from the exact collisionless solution.
pub fn free_streaming_deviation(sol: &Solution, data: &ProblemData) -> f64 {
    let grid = sol.grid();
    let mut worst = 0.0f64;
    for &idx in grid.inside_nodes() {
        let (t, x, y) = grid.physical(idx);
        let got = sol.field.node(idx);
        for s in Species::ALL {
            worst = worst.max((got[s.index()] - free_streaming_exact(data, t, x, y, s)).abs());
        }
    }
    worst
}

fn summary_lines(cfg: &RunConfig, sol: &Solution, slices: &[f64]) -> Vec<(String, String)> {
    let data = &cfg.data;
    let mut s: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: String| s.push((k.to_string(), v));
    let g = sol.gate;
    push("status", status_name(sol.status()).into());
    push("iterations", sol.trace.iterations().to_string());
    push("final_delta", sol.trace.last_delta().map_or("none".into(), fmt));
    push("kappa", sol.kappa.map_or("none".into(), fmt));
    push("error_estimate", sol.error_bound().map_or("none".into(), fmt));
    push("operator", if sol.sigma.is_some() { "T_sigma" } else { "T" }.into());
    push("sigma", sol.sigma.map_or("none".into(), fmt));
    let [n1, n2, n3] = sol.grid().resolution();
    push("grid", format!("{n1}x{n2}x{n3}"));
    push("gate_overridden", sol.gate_overridden.to_string());
    for (k, v) in gate_lines(&g) {
        push(k, v);
    }
    let sup = sol.field.sup_norm();
    push("sup_norm", fmt(sup));
    push("within_bound_B", (sup <= g.bound_b * BOUND_SLACK).to_string());
    push("min_node", fmt(sol.field.min_value()));
    let res = residual(sol, data);
    for sp in Species::ALL {
        push(&format!("residual_n{}", sp.number()), fmt(res.per_species[sp.index()]));
    }
    push("residual_nodes", res.nodes.to_string());
    let d = derivative_bound_check(sol, &g);
    for (k, axis) in ["t", "x", "y"].iter().enumerate() {
        push(&format!("derivative_{axis}"), fmt(d.measured[k]));
        push(&format!("derivative_{axis}_bound"), fmt(d.bounds[k]));
        push(&format!("derivative_{axis}_margin"), fmt(d.margins()[k]));
    }
    let m = mass_balance(sol, data, BALANCE_SLICES, BALANCE_SPACE);
    push("mass_balance_defect", fmt(m.mass.relative(data.bx.t)));
    push("momentum_x_balance_defect", fmt(m.momentum_x.relative(data.bx.t)));
    push("momentum_y_balance_defect", fmt(m.momentum_y.relative(data.bx.t)));
    if data.params.s == 0.0 {
        push("free_streaming_max_deviation", fmt(free_streaming_deviation(sol, data)));
    }
    push(
        "slices",
        slices.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(","),
    );
    for r in &sol.trace.records {
        let ratio = r.ratio.map_or("none".into(), fmt);
        push(
            &format!("iter_{}", r.k),
            format!(
                "delta={} ratio={} ms={:.3}",
                fmt(r.delta),
                ratio,
                r.elapsed.as_secs_f64() * 1e3
            ),
        );
    }
    s
}

/// Outcome of one row of the `verify` table.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
}

impl Check {
    fn new(name: &'static str, ok: bool, detail: impl Into<String>) -> Self {
        let verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        Self {
            name,
            verdict,
            detail: detail.into(),
        }
    }

    fn skip(name: &'static str, why: &str) -> Self {
        Self {
            name,
            verdict: Verdict::Skip,
            detail: why.into(),
        }
    }
}

fn positivity(sol: &Solution) -> (bool, String) {
    let min = sol.field.min_value();
    let sup = sol.field.sup_norm();
    (min >= -POSITIVITY_TOL * sup, format!("min {min:.3e}, sup {sup:.3e}"))
}

/// Runs the full property suite behind `verify`.
pub fn verify_checks(cfg: &RunConfig) -> Result<Vec<Check>> {
    let data = &cfg.data;
    let mut checks = Vec::new();
    let (compat_ok, compat) = compat_summary(cfg);
    checks.push(Check::new("compatibility", compat_ok, compat));
    let gate = gate_report(data)?;
    checks.push(Check::new("gate", gate.gate_ok, format!("pq {:.6e}", gate.pq)));
    const SOLVED: [&str; 9] = [
        "convergence",
        "positivity_T",
        "positivity_T_sigma",
        "bound",
        "contraction",
        "derivatives",
        "mass_balance",
        "guess_independence",
        "oracle",
    ];
    if !gate.gate_ok {
        checks.extend(SOLVED.iter().map(|n| Check::skip(n, "gate violated")));
        return Ok(checks);
    }
    let base = SolverConfig {
        use_sigma: false,
        ..cfg.solver.clone()
    };
    let sol = match solve(data, &base) {
        Ok(sol) => sol,
        Err(Error::Diverged(trace)) => {
            checks.push(Check::new(
                "convergence",
                false,
                format!("diverged after {} steps", trace.iterations()),
            ));
            checks.extend(SOLVED[1..].iter().map(|n| Check::skip(n, "no solution")));
            return Ok(checks);
        }
        Err(e) => return Err(e),
    };
    checks.push(Check::new(
        "convergence",
        sol.status() == Status::Converged,
        format!(
            "{} after {} steps, delta {:.3e}",
            status_name(sol.status()),
            sol.trace.iterations(),
            sol.trace.last_delta().unwrap_or(0.0)
        ),
    ));
    let (ok, detail) = positivity(&sol);
    checks.push(Check::new("positivity_T", ok, detail));

    let sigma_cfg = SolverConfig {
        use_sigma: true,
        ..cfg.solver.clone()
    };
    checks.push(match solve(data, &sigma_cfg) {
        Ok(s) => {
            let (ok, detail) = positivity(&s);
            Check::new("positivity_T_sigma", ok && s.status() == Status::Converged, detail)
        }
        Err(Error::Diverged(_)) => Check::new("positivity_T_sigma", false, "diverged"),
        Err(e) => return Err(e),
    });

    let sup = sol.field.sup_norm();
    checks.push(Check::new(
        "bound",
        sup <= gate.bound_b * BOUND_SLACK,
        format!("sup {sup:.6e} vs bound_B {:.6e}", gate.bound_b),
    ));

    let kappa = sol.kappa.unwrap_or(0.0);
    let floor = 1e-9 * sup;
    checks.push(match sol.trace.settled_ratio(floor) {
        Some(r) => Check::new(
            "contraction",
            r <= kappa * RATIO_SLACK,
            format!("ratio {r:.4e} vs kappa {kappa:.4e}"),
        ),
        None => Check::new(
            "contraction",
            true,
            format!("converged before ratios settled, kappa {kappa:.4e}"),
        ),
    });

    let d = derivative_bound_check(&sol, &gate);
    checks.push(Check::new(
        "derivatives",
        d.within(DERIVATIVE_SLACK),
        format!(
            "t {:.3e}/{:.3e}, x {:.3e}/{:.3e}, y {:.3e}/{:.3e} on {} nodes",
            d.measured[0], d.bounds[0], d.measured[1], d.bounds[1], d.measured[2], d.bounds[2], d.nodes
        ),
    ));

    let m = mass_balance(&sol, data, BALANCE_SLICES, BALANCE_SPACE);
    let defects = [
        m.mass.relative(data.bx.t),
        m.momentum_x.relative(data.bx.t),
        m.momentum_y.relative(data.bx.t),
    ];
    checks.push(Check::new(
        "mass_balance",
        defects.iter().all(|&d| d <= BALANCE_TOL),
        format!(
            "mass {:.3e}, mom_x {:.3e}, mom_y {:.3e}",
            defects[0], defects[1], defects[2]
        ),
    ));

    let guess = |g: InitialGuess| {
        solve(
            data,
            &SolverConfig {
                initial_guess: g,
                ..base.clone()
            },
        )
    };
    checks.push(
        match (guess(InitialGuess::Zero), guess(InitialGuess::Constant(gate.r_lo))) {
            (Ok(a), Ok(b)) => {
                let dist = sup_distance(&a.field, &b.field)?;
                Check::new(
                    "guess_independence",
                    dist <= 10.0 * base.abs_tol,
                    format!("zero vs constant {:.3e}: {dist:.3e}", gate.r_lo),
                )
            }
            (Err(Error::Diverged(_)), _) | (_, Err(Error::Diverged(_))) => {
                Check::new("guess_independence", false, "diverged")
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        },
    );

    let (diff, fd) = oracle_diff(cfg, &sol)?;
    checks.push(Check::new(
        "oracle",
        diff.relative() <= cfg.oracle.tolerance,
        format!(
            "relative {:.3e} (tolerance {}) on {}x{}x{}",
            diff.relative(),
            cfg.oracle.tolerance,
            fd.nx,
            fd.ny,
            fd.nt
        ),
    ));
    Ok(checks)
}

fn oracle_grid(cfg: &RunConfig) -> Result<FDGrid> {
    let o = &cfg.oracle;
    let bx = &cfg.data.bx;
    let c = cfg.data.params.c;
    let nx = o.nx.unwrap_or(ORACLE_DEFAULT_N);
    let ny = o.ny.unwrap_or(ORACLE_DEFAULT_N);
    match o.nt {
        Some(nt) => FDGrid::new(bx, c, nx, ny, nt),
        None => FDGrid::with_cfl_limit(bx, c, nx, ny),
    }
}

fn oracle_diff(cfg: &RunConfig, sol: &Solution) -> Result<(OracleDiff, FDGrid)> {
    let grid = oracle_grid(cfg)?;
    let fd = upwind_solve(&cfg.data, grid)?;
    Ok((compare(sol, &fd), grid))
}

fn cmd_verify(path: &Path, out: &mut Report) -> Result<i32> {
    let cfg = RunConfig::load(path)?;
    let checks = verify_checks(&cfg)?;
    out.line(format!("{:<20} {:<6} detail", "check", "result"));
    for c in &checks {
        let v = match c.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Skip => "SKIP",
        };
        out.line(format!("{:<20} {:<6} {}", c.name, v, c.detail));
    }
    let ok = checks.iter().all(|c| c.verdict == Verdict::Pass);
    out.kv("overall", if ok { "pass" } else { "fail" });
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_compare_oracle(path: &Path, out: &mut Report) -> Result<i32> {
    let cfg = RunConfig::load(path)?;
    let sol = solve(&cfg.data, &cfg.solver)?;
    let (diff, grid) = oracle_diff(&cfg, &sol)?;
    let rel = diff.relative();
    out.kv("oracle_grid", format!("{}x{}x{}", grid.nx, grid.ny, grid.nt));
    out.kv("cfl", fmt(grid.cfl(cfg.data.params.c)));
    let [n1, n2, n3] = sol.grid().resolution();
    out.kv("solver_grid", format!("{n1}x{n2}x{n3}"));
    out.kv("abs_error", fmt(diff.abs));
    out.kv("scale", fmt(diff.scale));
    out.kv("relative_error", fmt(rel));
    out.kv("tolerance", cfg.oracle.tolerance);
    let ok = rel <= cfg.oracle.tolerance;
    out.kv("result", if ok { "pass" } else { "fail" });
    Ok(if ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}
