//! Command-line front end.
//!
//! Every command except `lorentz` reads a flat `key = value` configuration
//! (file given by `--config`, then `--seed`, then trailing `key=value`
//! arguments; later settings win). The whole configuration is validated
//! before anything is computed or written, and every run records its fully
//! resolved configuration next to its outputs so it can be replayed.
//!
//! Exit statuses: 0 success, 1 unexpected runtime failure (e.g. an output
//! file could not be written), 2 configuration or input error, 3 solver
//! non-convergence, 4 estimate verification flagged a configuration. When a
//! run both fails to converge and raises a flag, 3 wins.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::{BoxDomain, EdgeField};
use crate::harness::{
    self, format_float, EstimateReport, SolverOverrides, SourceFamily, SweepSpec,
};
use crate::lorentz::{lorentz_norm, lp_norm, Exponent, MeasuredSample};
use crate::solver::{self, Init, SolveResult, SolveStatus, SolverConfig};
use crate::{calculus, dump};

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_FLAGGED: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "pcurl",
    version,
    about = "Numerical lab for the steady p-curl system"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem and write fields, summary and trace.
    Solve(RunArgs),
    /// Check both curl estimates over a sweep and flag refinement growth.
    Verify(RunArgs),
    /// Run a parameter sweep and write its report table.
    Sweep(RunArgs),
    /// Manufactured-solution convergence table at p = 2.
    Convergence(RunArgs),
    /// Lorentz quasi-norm of a weighted sample read from a file.
    Lorentz(LorentzArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, default_value = "pcurl-out")]
    out: PathBuf,
    /// Worker threads (1 gives bitwise reproducible runs)
    #[arg(long)]
    threads: Option<usize>,
    /// Source seed; same as `seed=<n>`
    #[arg(long)]
    seed: Option<u64>,
    /// Configuration overrides `key=value`
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct LorentzArgs {
    /// Rows of `value weight` (comma or whitespace separated)
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 3.0)]
    m: f64,
    /// Second index, a number >= 1 or `inf`
    #[arg(long, default_value = "1")]
    p: String,
}

// ---------------------------------------------------------------------------
// configuration

/// Keys understood by the run commands.
pub const KNOWN_KEYS: &[&str] = &[
    "lx",
    "ly",
    "lz",
    "n",
    "nx",
    "ny",
    "nz",
    "p",
    "grad_tol",
    "stage_tol",
    "max_iters",
    "poisson_tol",
    "restart_every",
    "eps_schedule",
    "init",
    "init_seed",
    "trials",
    "residual_seed",
    "source",
    "seed",
    "amplitude",
    "smoothness",
    "source_file",
    "p_values",
    "resolutions",
    "seeds",
    "lambdas",
];

/// Flat `key = value` configuration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parse configuration text: one `key = value` per line, `#` starts a
    /// comment, blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("line {}: expected key = value", n + 1)))?;
            c.set(k.trim(), v.trim())?;
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::invalid(format!(
                "unknown configuration key \"{key}\""
            )));
        }
        if value.is_empty() {
            return Err(Error::invalid(format!("key \"{key}\" has an empty value")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Apply `key=value` overrides in order.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("override \"{o}\" is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    /// Canonical text form, readable by [`RunConfig::parse`].
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::invalid(format!("missing required key \"{key}\"")))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| {
                Error::invalid(format!("key \"{key}\": expected {what}, got \"{v}\""))
            }),
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        self.parse_as(key, "a number")
    }

    fn uint(&self, key: &str) -> Result<Option<usize>> {
        self.parse_as(key, "a nonnegative integer")
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.parse_as(key, "a nonnegative integer")
    }

    fn list<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<Vec<T>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| {
                        Error::invalid(format!(
                            "key \"{key}\": expected a list of {what}, got \"{v}\""
                        ))
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn join_f(v: &[f64]) -> String {
    v.iter()
        .map(|x| format_float(*x))
        .collect::<Vec<_>>()
        .join(",")
}

fn lengths(c: &RunConfig) -> Result<[f64; 3]> {
    Ok([
        c.float("lx")?.unwrap_or(1.0),
        c.float("ly")?.unwrap_or(1.0),
        c.float("lz")?.unwrap_or(1.0),
    ])
}

fn source_family(c: &RunConfig) -> Result<SourceFamily> {
    let kind = c.require("source")?;
    Ok(match kind {
        "zero" => SourceFamily::Zero,
        "manufactured" => SourceFamily::Manufactured,
        "random" => SourceFamily::RandomDivFree {
            smoothness: c.uint("smoothness")?.unwrap_or(2),
            amplitude: c.float("amplitude")?.unwrap_or(1.0),
        },
        "file" => SourceFamily::File(PathBuf::from(c.require("source_file")?)),
        other => {
            return Err(Error::invalid(format!(
                "unknown source \"{other}\" (expected zero, manufactured, random or file)"
            )))
        }
    })
}

fn family_entries(f: &SourceFamily, out: &mut RunConfig) {
    let (kind, extra): (&str, Vec<(&str, String)>) = match f {
        SourceFamily::Zero => ("zero", vec![]),
        SourceFamily::Manufactured => ("manufactured", vec![]),
        SourceFamily::RandomDivFree {
            smoothness,
            amplitude,
        } => (
            "random",
            vec![
                ("smoothness", smoothness.to_string()),
                ("amplitude", format_float(*amplitude)),
            ],
        ),
        SourceFamily::File(p) => ("file", vec![("source_file", p.display().to_string())]),
    };
    out.entries.insert("source".into(), kind.into());
    for (k, v) in extra {
        out.entries.insert(k.into(), v);
    }
}

fn overrides(c: &RunConfig) -> Result<SolverOverrides> {
    Ok(SolverOverrides {
        grad_tol: c.float("grad_tol")?,
        max_iters: c.uint("max_iters")?,
        poisson_tol: c.float("poisson_tol")?,
        restart_every: c.uint("restart_every")?,
        eps_schedule: c.list("eps_schedule", "numbers")?,
        residual_trials: c.uint("trials")?,
    })
}

fn overrides_entries(o: &SolverOverrides, out: &mut RunConfig) {
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            out.entries.insert(k.into(), v);
        }
    };
    put("grad_tol", o.grad_tol.map(format_float));
    put("max_iters", o.max_iters.map(|v| v.to_string()));
    put("poisson_tol", o.poisson_tol.map(format_float));
    put("restart_every", o.restart_every.map(|v| v.to_string()));
    put("eps_schedule", o.eps_schedule.as_ref().map(|v| join_f(v)));
    put("trials", o.residual_trials.map(|v| v.to_string()));
}

/// A validated `solve` configuration.
#[derive(Clone, Debug)]
pub struct SolvePlan {
    pub grid: BoxDomain,
    pub solver: SolverConfig,
    pub source: SourceFamily,
    pub seed: u64,
}

impl SolvePlan {
    pub fn from_config(c: &RunConfig) -> Result<Self> {
        let p = c
            .float("p")?
            .ok_or_else(|| Error::invalid("missing required key \"p\""))?;
        let n = c.uint("n")?;
        let axis = |key: &str| -> Result<usize> {
            c.uint(key)?
                .or(n)
                .ok_or_else(|| Error::invalid(format!("missing required key \"n\" (or \"{key}\")")))
        };
        let grid = BoxDomain::new(lengths(c)?, [axis("nx")?, axis("ny")?, axis("nz")?])?;
        let mut solver = SolverConfig::new(p);
        if let Some(v) = c.float("grad_tol")? {
            solver.grad_tol = v;
        }
        if let Some(v) = c.float("stage_tol")? {
            solver.stage_tol = v;
        }
        if let Some(v) = c.uint("max_iters")? {
            solver.max_iters = v;
        }
        if let Some(v) = c.float("poisson_tol")? {
            solver.poisson_tol = v;
        }
        if let Some(v) = c.uint("restart_every")? {
            solver.restart_every = v;
        }
        if let Some(v) = c.list("eps_schedule", "numbers")? {
            solver.eps_schedule = v;
        }
        if let Some(v) = c.uint("trials")? {
            solver.residual_trials = v;
        }
        if let Some(v) = c.u64("residual_seed")? {
            solver.residual_seed = v;
        }
        solver.init = match c.get("init").unwrap_or("zero") {
            "zero" => Init::Zero,
            "random" => Init::Random(c.u64("init_seed")?.unwrap_or(0)),
            other => {
                return Err(Error::invalid(format!(
                    "unknown init \"{other}\" (expected zero or random)"
                )))
            }
        };
        solver.validate()?;
        let source = source_family(c)?;
        Ok(SolvePlan {
            grid,
            solver,
            source,
            seed: c.u64("seed")?.unwrap_or(0),
        })
    }

    /// Every setting spelled out.
    pub fn resolved(&self) -> RunConfig {
        let mut r = RunConfig::default();
        let s = &self.solver;
        let [lx, ly, lz] = self.grid.lengths();
        let [nx, ny, nz] = self.grid.cells();
        for (k, v) in [
            ("lx", format_float(lx)),
            ("ly", format_float(ly)),
            ("lz", format_float(lz)),
            ("nx", nx.to_string()),
            ("ny", ny.to_string()),
            ("nz", nz.to_string()),
            ("p", format_float(s.p)),
            ("grad_tol", format_float(s.grad_tol)),
            ("stage_tol", format_float(s.stage_tol)),
            ("max_iters", s.max_iters.to_string()),
            ("poisson_tol", format_float(s.poisson_tol)),
            ("restart_every", s.restart_every.to_string()),
            ("eps_schedule", join_f(&s.eps_schedule)),
            ("trials", s.residual_trials.to_string()),
            ("residual_seed", s.residual_seed.to_string()),
            ("seed", self.seed.to_string()),
        ] {
            r.entries.insert(k.into(), v);
        }
        match s.init {
            Init::Zero => {
                r.entries.insert("init".into(), "zero".into());
            }
            Init::Random(seed) => {
                r.entries.insert("init".into(), "random".into());
                r.entries.insert("init_seed".into(), seed.to_string());
            }
        }
        family_entries(&self.source, &mut r);
        r
    }
}

/// Sweep settings shared by `verify` and `sweep`.
pub fn sweep_from_config(c: &RunConfig) -> Result<SweepSpec> {
    let p_values = c
        .list("p_values", "numbers")?
        .ok_or_else(|| Error::invalid("missing required key \"p_values\""))?;
    let resolutions = c
        .list("resolutions", "integers")?
        .ok_or_else(|| Error::invalid("missing required key \"resolutions\""))?;
    let seeds = match c.list("seeds", "integers")? {
        Some(s) => s,
        None => vec![c.u64("seed")?.unwrap_or(0)],
    };
    let spec = SweepSpec {
        p_values,
        resolutions,
        lengths: lengths(c)?,
        source: source_family(c)?,
        seeds,
        lambdas: c.list("lambdas", "numbers")?.unwrap_or_else(|| vec![1.0]),
        solver: overrides(c)?,
    };
    spec.validate()?;
    if let SourceFamily::File(p) = &spec.source {
        for &n in &spec.resolutions {
            let g = BoxDomain::new(spec.lengths, [n; 3])?;
            spec.source
                .build(&g, 0)
                .map_err(|e| Error::invalid(format!("{}: {e}", p.display())))?;
        }
    }
    Ok(spec)
}

fn sweep_resolved(s: &SweepSpec) -> RunConfig {
    let mut r = RunConfig::default();
    for (k, v) in [
        ("lx", format_float(s.lengths[0])),
        ("ly", format_float(s.lengths[1])),
        ("lz", format_float(s.lengths[2])),
        ("p_values", join_f(&s.p_values)),
        ("resolutions", join(&s.resolutions)),
        ("seeds", join(&s.seeds)),
        ("lambdas", join_f(&s.lambdas)),
    ] {
        r.entries.insert(k.into(), v);
    }
    family_entries(&s.source, &mut r);
    overrides_entries(&s.solver, &mut r);
    r
}

/// Settings of `convergence`.
#[derive(Clone, Debug)]
pub struct ConvergencePlan {
    pub resolutions: Vec<usize>,
    pub lengths: [f64; 3],
    pub solver: SolverOverrides,
}

impl ConvergencePlan {
    pub fn from_config(c: &RunConfig) -> Result<Self> {
        let resolutions: Vec<usize> = c
            .list("resolutions", "integers")?
            .ok_or_else(|| Error::invalid("missing required key \"resolutions\""))?;
        if resolutions.is_empty() || resolutions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("resolutions must be strictly ascending"));
        }
        let plan = ConvergencePlan {
            resolutions,
            lengths: lengths(c)?,
            solver: overrides(c)?,
        };
        for &n in &plan.resolutions {
            BoxDomain::new(plan.lengths, [n; 3])?;
        }
        plan.solver.config(2.0).validate()?;
        Ok(plan)
    }

    fn resolved(&self) -> RunConfig {
        let mut r = RunConfig::default();
        r.entries.insert("lx".into(), format_float(self.lengths[0]));
        r.entries.insert("ly".into(), format_float(self.lengths[1]));
        r.entries.insert("lz".into(), format_float(self.lengths[2]));
        r.entries
            .insert("resolutions".into(), join(&self.resolutions));
        overrides_entries(&self.solver, &mut r);
        r
    }
}

// ---------------------------------------------------------------------------
// output helpers

/// Format with `digits` significant digits in positional notation
/// (scientific outside `1e-5 ..= 1e15`).
pub fn format_significant(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let mag = x.abs().log10().floor() as i64;
    if !(-5..=15).contains(&mag) {
        return format!("{:.*e}", digits.saturating_sub(1), x);
    }
    let decimals = (digits as i64 - 1 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding may have carried into a new leading digit (9.99.. -> 10.0)
    let carried = s.parse::<f64>().map_or(false, |v| v.abs() >= 10f64.powi(mag as i32 + 1));
    if carried && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

fn json_f64(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn config_json(c: &RunConfig) -> Value {
    Value::Object(
        c.entries
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect(),
    )
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn prepare_out(dir: &Path, resolved: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.cfg"), resolved.to_text())?;
    Ok(())
}

fn status_code(converged: bool, flagged: bool) -> u8 {
    if !converged {
        EXIT_NOT_CONVERGED
    } else if flagged {
        EXIT_FLAGGED
    } else {
        EXIT_OK
    }
}

/// Failure of a command, carrying the exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn config(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: e.to_string(),
        }
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_RUNTIME,
            message: e.to_string(),
        }
    }
}

fn load_config(args: &RunArgs) -> std::result::Result<RunConfig, Failure> {
    let mut c = match &args.config {
        Some(p) => RunConfig::load(p).map_err(Failure::config)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        c.set("seed", &s.to_string()).map_err(Failure::config)?;
    }
    c.apply_overrides(&args.overrides)
        .map_err(Failure::config)?;
    Ok(c)
}

// ---------------------------------------------------------------------------
// commands

/// Run `solve`; returns the exit status.
pub fn cmd_solve(c: &RunConfig, out: &Path) -> std::result::Result<u8, Failure> {
    let plan = SolvePlan::from_config(c).map_err(Failure::config)?;
    let g = plan.grid;
    let src = plan
        .source
        .build_projected(&g, plan.seed)
        .map_err(Failure::config)?;
    if let Some(w) = &src.warning {
        eprintln!("warning: {w}");
    }
    let f = src.field;
    let (result, failure) = match solver::solve(&f, &plan.solver, &g) {
        Ok(r) => (r, None),
        Err(Error::NotConverged { reason, result }) => (*result, Some(reason)),
        Err(e) => return Err(Failure::runtime(e)),
    };
    let resolved = plan.resolved();
    write_solve(
        out,
        &resolved,
        &plan,
        &g,
        &f,
        &result,
        src.discarded_norm,
        failure.as_deref(),
    )
    .map_err(Failure::runtime)?;
    if let Some(reason) = &failure {
        eprintln!("solver did not converge: {reason}");
    }
    Ok(status_code(failure.is_none(), false))
}

#[allow(clippy::too_many_arguments)]
fn write_solve(
    out: &Path,
    resolved: &RunConfig,
    plan: &SolvePlan,
    g: &BoxDomain,
    f: &EdgeField,
    r: &SolveResult,
    discarded: f64,
    failure: Option<&str>,
) -> Result<()> {
    let m = harness::measure(r, f, plan.solver.p, g)?;
    let mag = calculus::cell_magnitude(&r.curl_u, g)?;
    let l2 = lp_norm(&MeasuredSample::from_cells(&mag, g)?, Exponent::Finite(2.0))?;
    prepare_out(out, resolved)?;
    dump::write_edge_field(&out.join("u.field"), g, &r.u)?;
    dump::write_face_field(&out.join("curl_u.field"), g, &r.curl_u)?;
    let status = match r.status {
        SolveStatus::Converged => "converged",
        SolveStatus::IterationCap => "iteration_cap",
        SolveStatus::LineSearchFailed => "line_search_failed",
    };
    let summary = json!({
        "command": "solve",
        "status": status,
        "failure": failure,
        "energy": json_f64(r.energy),
        "norm_curl_inf": json_f64(m.norm_curl_inf),
        "norm_curl_inf_faces": json_f64(m.norm_curl_inf_faces),
        "norm_curl_p": json_f64(m.norm_curl_p),
        "norm_curl_l2": json_f64(l2),
        "norm_f_31": json_f64(m.norm_f_31),
        "c_emp_inf": m.c_emp_inf.map(json_f64),
        "c_emp_p": m.c_emp_p.map(json_f64),
        "norm_u_l2": json_f64(r.u.norm(g)),
        "iterations": r.iterations,
        "total_iterations": r.total_iterations(),
        "projected_grad_norm": json_f64(r.projected_grad_norm),
        "weak_residual": json_f64(r.weak_residual),
        "terminal_eps": json_f64(r.terminal_eps),
        "source_discarded_norm": json_f64(discarded),
        "config": config_json(resolved),
    });
    write_json(&out.join("summary.json"), &summary)?;
    let mut trace = String::from("stage,eps,iter,energy,grad_norm\n");
    for t in &r.trace {
        trace.push_str(&format!(
            "{},{},{},{},{}\n",
            t.stage,
            format_float(t.eps),
            t.iter,
            format_float(t.energy),
            format_float(t.grad_norm)
        ));
    }
    fs::write(out.join("trace.csv"), trace)?;
    Ok(())
}

fn run_verification(c: &RunConfig, out: &Path, command: &str) -> std::result::Result<u8, Failure> {
    let spec = sweep_from_config(c).map_err(Failure::config)?;
    let resolved = sweep_resolved(&spec);
    let v = harness::verify_estimates(&spec).map_err(Failure::runtime)?;
    let comparison_failures = v
        .reports
        .iter()
        .filter(|r| r.converged() && !r.norm_comparison_ok)
        .count();
    write_reports(
        out,
        &resolved,
        command,
        &v.reports,
        &v.flags,
        comparison_failures,
    )
    .map_err(Failure::runtime)?;
    let converged = v.all_converged();
    let flagged = !v.flags.is_empty() || comparison_failures > 0;
    for r in v.reports.iter().filter(|r| !r.converged()) {
        eprintln!(
            "not converged: p={} N={} seed={} lambda={}: {}",
            r.p,
            r.cells[0],
            r.seed,
            r.lambda,
            r.error.as_deref().unwrap_or(&r.status)
        );
    }
    for f in &v.flags {
        eprintln!(
            "flagged: {} grew by {:.1}% from N={} to N={} (p={}, seed={}, lambda={})",
            f.ratio,
            100.0 * f.growth,
            f.coarse,
            f.fine,
            f.p,
            f.seed,
            f.lambda
        );
    }
    Ok(status_code(converged, flagged))
}

fn write_reports(
    out: &Path,
    resolved: &RunConfig,
    command: &str,
    reports: &[EstimateReport],
    flags: &[harness::RefinementFlag],
    comparison_failures: usize,
) -> Result<()> {
    prepare_out(out, resolved)?;
    fs::write(out.join("reports.csv"), harness::reports_csv(reports))?;
    let mut jl = fs::File::create(out.join("reports.jsonl"))?;
    for r in reports {
        let line = serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(jl, "{line}")?;
    }
    let summary = json!({
        "command": command,
        "configurations": reports.len(),
        "converged": reports.iter().filter(|r| r.converged()).count(),
        "flags": flags,
        "norm_comparison_failures": comparison_failures,
        "config": config_json(resolved),
    });
    write_json(&out.join("summary.json"), &summary)
}

pub fn cmd_verify(c: &RunConfig, out: &Path) -> std::result::Result<u8, Failure> {
    run_verification(c, out, "verify")
}

pub fn cmd_sweep(c: &RunConfig, out: &Path) -> std::result::Result<u8, Failure> {
    run_verification(c, out, "sweep")
}

pub fn cmd_convergence(c: &RunConfig, out: &Path) -> std::result::Result<u8, Failure> {
    let plan = ConvergencePlan::from_config(c).map_err(Failure::config)?;
    let resolved = plan.resolved();
    let table = match harness::convergence_study(&plan.resolutions, plan.lengths, &plan.solver) {
        Ok(t) => t,
        Err(Error::NotConverged { reason, .. }) => {
            eprintln!("solver did not converge: {reason}");
            return Ok(EXIT_NOT_CONVERGED);
        }
        Err(e) => return Err(Failure::runtime(e)),
    };
    (|| -> Result<()> {
        prepare_out(out, &resolved)?;
        fs::write(out.join("convergence.csv"), table.csv())?;
        write_json(
            &out.join("summary.json"),
            &json!({
                "command": "convergence",
                "rows": table.rows,
                "config": config_json(&resolved),
            }),
        )
    })()
    .map_err(Failure::runtime)?;
    print!("{}", table.csv());
    Ok(EXIT_OK)
}

/// Parse a `value weight` table. Errors name the offending 1-based row.
pub fn parse_sample(text: &str) -> Result<MeasuredSample> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let row = || {
            Error::invalid(format!(
                "row {}: expected `value weight`, got \"{}\"",
                n + 1,
                raw.trim()
            ))
        };
        if fields.len() != 2 {
            return Err(row());
        }
        let v: f64 = fields[0].parse().map_err(|_| row())?;
        let w: f64 = fields[1].parse().map_err(|_| row())?;
        if !(v.is_finite() && v >= 0.0 && w.is_finite() && w > 0.0) {
            return Err(Error::invalid(format!(
                "row {}: need a finite value >= 0 and a finite weight > 0",
                n + 1
            )));
        }
        pairs.push((v, w));
    }
    if pairs.is_empty() {
        return Err(Error::EmptySample);
    }
    MeasuredSample::new(pairs)
}

fn cmd_lorentz(args: &LorentzArgs) -> std::result::Result<u8, Failure> {
    let text = fs::read_to_string(&args.data)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", args.data.display())))?;
    let sample = parse_sample(&text).map_err(Failure::config)?;
    let p: Exponent = args.p.parse().map_err(Failure::config)?;
    let v = match p {
        Exponent::Finite(p) => lorentz_norm(&sample, args.m, p),
        Exponent::Inf => crate::lorentz::lorentz_norm_inf(&sample, args.m),
    }
    .map_err(Failure::config)?;
    println!("{}", format_significant(v, 12));
    Ok(EXIT_OK)
}

fn set_threads(n: Option<usize>) -> std::result::Result<(), Failure> {
    match n {
        Some(0) => Err(Failure::config("--threads must be at least 1")),
        #[cfg(feature = "parallel")]
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::runtime),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> std::result::Result<u8, Failure> {
    match cli.command {
        Command::Lorentz(a) => cmd_lorentz(&a),
        Command::Solve(a) => {
            let c = load_config(&a)?;
            set_threads(a.threads)?;
            cmd_solve(&c, &a.out)
        }
        Command::Verify(a) => {
            let c = load_config(&a)?;
            set_threads(a.threads)?;
            cmd_verify(&c, &a.out)
        }
        Command::Sweep(a) => {
            let c = load_config(&a)?;
            set_threads(a.threads)?;
            cmd_sweep(&c, &a.out)
        }
        Command::Convergence(a) => {
            let c = load_config(&a)?;
            set_threads(a.threads)?;
            cmd_convergence(&c, &a.out)
        }
    }
}

/// Entry point of the `pcurl` binary.
pub fn main() -> ExitCode {
    main_from(std::env::args_os())
}

pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(format_significant(9.0, 12), "9.00000000000");
        assert_eq!(format_significant(6.0, 12), "6.00000000000");
        assert_eq!(format_significant(0.5, 3), "0.500");
        assert_eq!(format_significant(123.456, 4), "123.5");
        assert_eq!(format_significant(9.99996, 4), "10.00");
        assert_eq!(format_significant(0.0, 3), "0.00");
    }

    #[test]
    fn config_parsing_and_overrides() {
        let mut c =
            RunConfig::parse("# header\np = 3\n n=16 # trailing\n\nsource = zero\n").unwrap();
        c.apply_overrides(&["p=2".into()]).unwrap();
        assert_eq!(c.get("p"), Some("2"));
        assert_eq!(c.get("n"), Some("16"));
        assert!(RunConfig::parse("bogus = 1").is_err());
        assert!(RunConfig::parse("p 3").is_err());
        assert!(c.clone().apply_overrides(&["p".into()]).is_err());
        let again = RunConfig::parse(&c.to_text()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn solve_plan_round_trips() {
        let c = RunConfig::parse("p = 3\nn = 6\nsource = random\nseed = 4\nlx = 2\n").unwrap();
        let plan = SolvePlan::from_config(&c).unwrap();
        assert_eq!(plan.grid.cells(), [6, 6, 6]);
        assert_eq!(plan.grid.lengths(), [2.0, 1.0, 1.0]);
        let r = plan.resolved();
        let plan2 = SolvePlan::from_config(&r).unwrap();
        assert_eq!(plan2.resolved(), r);
        assert_eq!(plan2.solver, plan.solver);
    }

    #[test]
    fn solve_plan_names_missing_keys() {
        let e =
            SolvePlan::from_config(&RunConfig::parse("n = 4\nsource = zero").unwrap()).unwrap_err();
        assert!(e.to_string().contains("\"p\""), "{e}");
        let e =
            SolvePlan::from_config(&RunConfig::parse("p = 2\nsource = zero").unwrap()).unwrap_err();
        assert!(e.to_string().contains("\"n\""), "{e}");
        let e = SolvePlan::from_config(&RunConfig::parse("p = 2\nn = 4").unwrap()).unwrap_err();
        assert!(e.to_string().contains("\"source\""), "{e}");
        let e =
            SolvePlan::from_config(&RunConfig::parse("p = 1.01\nn = 4\nsource = zero").unwrap())
                .unwrap_err();
        assert!(e.to_string().contains("exponent"), "{e}");
    }

    #[test]
    fn sample_parsing_reports_rows() {
        let s = parse_sample("2 1\n# comment\n1, 7\n").unwrap();
        assert_eq!(s.len(), 2);
        let e = parse_sample("2 1\n\n1 x\n").unwrap_err();
        assert!(e.to_string().contains("row 3"), "{e}");
        assert!(matches!(
            parse_sample("\n# nothing\n"),
            Err(Error::EmptySample)
        ));
        assert!(parse_sample("1 0\n")
            .unwrap_err()
            .to_string()
            .contains("row 1"));
    }

    #[test]
    fn worst_status_wins() {
        assert_eq!(status_code(true, false), EXIT_OK);
        assert_eq!(status_code(true, true), EXIT_FLAGGED);
        assert_eq!(status_code(false, true), EXIT_NOT_CONVERGED);
    }
}
