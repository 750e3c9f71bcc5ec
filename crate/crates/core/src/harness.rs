//! Estimate verification and experiment orchestration.
//!
//! For every configuration the harness solves the discrete problem and
//! measures both sides of
//!
//! ```text
//! ‖curl u‖_{L∞}  ≤ C ‖f‖_{L^{3,1}}^{1/(p−1)}
//! ‖curl u‖_{L^p} ≤ C ‖f‖_{L^{3,1}}^{1/(p−1)}
//! ```
//!
//! The ratios `C_emp` are only meaningful through their behaviour under grid
//! refinement and source scaling, which is what the sweeps record.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{cell_magnitude, edge_cell_magnitude};
use crate::dump;
use crate::error::{Error, Result};
use crate::grid::{BoxDomain, EdgeField, FaceField};
use crate::lorentz::{lorentz_norm, lp_norm, Exponent, MeasuredSample};
use crate::par;
use crate::solver::{
    self, project_source, ProjectedSource, SolveResult, SolveStatus, SolverConfig,
};

/// Refinement growth of `C_emp` above which a configuration is flagged.
pub const REFINEMENT_FLAG: f64 = 0.10;

/// Slack of the norm comparison `C_emp_p ≤ C_emp_inf |Ω|^{1/p}`.
pub const COMPARISON_SLACK: f64 = 1e-12;

// ---------------------------------------------------------------------------
// sources

/// `u* = (0, 0, sin(πx/Lx) sin(πy/Ly))`, a z-invariant field with vanishing
/// tangential trace.
pub fn manufactured_solution(g: &BoxDomain) -> EdgeField {
    let [lx, ly, _] = g.lengths();
    EdgeField::sample(g, |q| {
        [0.0, 0.0, (PI * q[0] / lx).sin() * (PI * q[1] / ly).sin()]
    })
}

/// `curl u*` sampled at face centres.
pub fn manufactured_curl(g: &BoxDomain) -> FaceField {
    let [lx, ly, _] = g.lengths();
    FaceField::sample(g, |q| {
        let (sx, cx) = (PI * q[0] / lx).sin_cos();
        let (sy, cy) = (PI * q[1] / ly).sin_cos();
        [PI / ly * sx * cy, -PI / lx * cx * sy, 0.0]
    })
}

/// Source of the p = 2 manufactured problem: `curl curl u* = −Δu*`.
pub fn manufactured_source(g: &BoxDomain) -> EdgeField {
    let [lx, ly, _] = g.lengths();
    let k2 = PI * PI * (lx.powi(-2) + ly.powi(-2));
    let mut f = EdgeField::sample(g, |q| {
        [
            0.0,
            0.0,
            k2 * (PI * q[0] / lx).sin() * (PI * q[1] / ly).sin(),
        ]
    });
    f.apply_constraint();
    f
}

struct Mode {
    wave: [f64; 3],
    coef: f64,
    phase: f64,
}

/// Smooth random divergence-free source.
///
/// `f = curl A` with `A = b(x) g(x)`, where the bump
/// `b = Π sin²(π x_l / L_l)` vanishes to second order on ∂Ω and each
/// component of `g` is a random trigonometric sum over wave numbers
/// `0..=smoothness` per axis. The curl is evaluated analytically at edge
/// midpoints; the sampled field is then projected so that it is discretely
/// divergence-free.
pub fn make_random_divfree_source(
    g: &BoxDomain,
    seed: u64,
    smoothness: usize,
    amplitude: f64,
) -> Result<EdgeField> {
    Ok(project_source(
        &random_curl_sample(g, seed, smoothness, amplitude)?,
        g,
        SOURCE_TOL,
    )?
    .field)
}

/// Projection tolerance applied to generated and loaded sources.
pub const SOURCE_TOL: f64 = 1e-12;

fn random_curl_sample(
    g: &BoxDomain,
    seed: u64,
    smoothness: usize,
    amplitude: f64,
) -> Result<EdgeField> {
    if smoothness == 0 {
        return Err(Error::invalid("smoothness must be at least 1"));
    }
    if !amplitude.is_finite() {
        return Err(Error::invalid("amplitude must be finite"));
    }
    let l = g.lengths();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<Vec<Mode>> = (0..3)
        .map(|_| {
            let mut v = Vec::new();
            for a in 0..=smoothness {
                for b in 0..=smoothness {
                    for c in 0..=smoothness {
                        v.push(Mode {
                            wave: [
                                2.0 * PI * a as f64 / l[0],
                                2.0 * PI * b as f64 / l[1],
                                2.0 * PI * c as f64 / l[2],
                            ],
                            coef: rng.gen_range(-1.0..1.0),
                            phase: rng.gen_range(0.0..2.0 * PI),
                        });
                    }
                }
            }
            v
        })
        .collect();

    // ∂_j A_i at a point
    let jacobian = |q: [f64; 3]| -> [[f64; 3]; 3] {
        let s: [f64; 3] = std::array::from_fn(|d| (PI * q[d] / l[d]).sin());
        let bump = s.iter().map(|v| v * v).product::<f64>();
        let dbump: [f64; 3] = std::array::from_fn(|d| {
            let others: f64 = (0..3).filter(|&e| e != d).map(|e| s[e] * s[e]).product();
            PI / l[d] * (2.0 * PI * q[d] / l[d]).sin() * others
        });
        std::array::from_fn(|i| {
            let mut gi = 0.0;
            let mut dgi = [0.0; 3];
            for m in &modes[i] {
                let arg = m.wave[0] * q[0] + m.wave[1] * q[1] + m.wave[2] * q[2] + m.phase;
                let (sn, cs) = arg.sin_cos();
                gi += m.coef * cs;
                for d in 0..3 {
                    dgi[d] -= m.coef * m.wave[d] * sn;
                }
            }
            std::array::from_fn(|j| dbump[j] * gi + bump * dgi[j])
        })
    };
    let mut f = EdgeField::sample(g, |q| {
        let d = jacobian(q);
        [
            amplitude * (d[2][1] - d[1][2]),
            amplitude * (d[0][2] - d[2][0]),
            amplitude * (d[1][0] - d[0][1]),
        ]
    });
    f.apply_constraint();
    Ok(f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SourceFamily {
    Zero,
    Manufactured,
    RandomDivFree { smoothness: usize, amplitude: f64 },
    File(PathBuf),
}

impl SourceFamily {
    pub fn describe(&self) -> String {
        match self {
            SourceFamily::Zero => "zero".into(),
            SourceFamily::Manufactured => "manufactured".into(),
            SourceFamily::RandomDivFree {
                smoothness,
                amplitude,
            } => {
                format!("random(smoothness={smoothness},amplitude={amplitude})")
            }
            SourceFamily::File(p) => format!("file({})", p.display()),
        }
    }

    /// Source on `g`; `seed` only matters for the random family.
    pub fn build(&self, g: &BoxDomain, seed: u64) -> Result<EdgeField> {
        Ok(self.build_projected(g, seed)?.field)
    }

    /// As [`SourceFamily::build`], also reporting what the projection removed.
    pub fn build_projected(&self, g: &BoxDomain, seed: u64) -> Result<ProjectedSource> {
        let exact = |field| ProjectedSource {
            field,
            discarded_norm: 0.0,
            warning: None,
        };
        match self {
            SourceFamily::Zero => Ok(exact(EdgeField::zeros(g))),
            SourceFamily::Manufactured => Ok(exact(manufactured_source(g))),
            SourceFamily::RandomDivFree {
                smoothness,
                amplitude,
            } => project_source(
                &random_curl_sample(g, seed, *smoothness, *amplitude)?,
                g,
                SOURCE_TOL,
            ),
            SourceFamily::File(path) => {
                let (dg, mut f) = dump::read_edge_field(path).map_err(|e| match e {
                    Error::Io(io) => Error::Io(std::io::Error::new(
                        io.kind(),
                        format!("{}: {io}", path.display()),
                    )),
                    other => other,
                })?;
                if dg.cells() != g.cells() || dg.lengths() != g.lengths() {
                    return Err(Error::shape(format!(
                        "source file grid {:?}/{:?} does not match {:?}/{:?}",
                        dg.cells(),
                        dg.lengths(),
                        g.cells(),
                        g.lengths()
                    )));
                }
                if !f.is_finite() {
                    return Err(Error::invalid("source file contains non-finite values"));
                }
                f.apply_constraint();
                project_source(&f, g, SOURCE_TOL)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// reports

/// Optional solver settings applied on top of [`SolverConfig::new`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverOverrides {
    pub grad_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub poisson_tol: Option<f64>,
    pub restart_every: Option<usize>,
    pub eps_schedule: Option<Vec<f64>>,
    pub residual_trials: Option<usize>,
}

impl SolverOverrides {
    pub fn config(&self, p: f64) -> SolverConfig {
        let mut c = SolverConfig::new(p);
        if let Some(v) = self.grad_tol {
            c.grad_tol = v;
        }
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = self.poisson_tol {
            c.poisson_tol = v;
        }
        if let Some(v) = self.restart_every {
            c.restart_every = v;
        }
        if let Some(v) = &self.eps_schedule {
            c.eps_schedule = v.clone();
        }
        if let Some(v) = self.residual_trials {
            c.residual_trials = v;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub p_values: Vec<f64>,
    /// Cells per axis.
    pub resolutions: Vec<usize>,
    pub lengths: [f64; 3],
    pub source: SourceFamily,
    /// One configuration per seed (only the random family uses it).
    pub seeds: Vec<u64>,
    pub lambdas: Vec<f64>,
    pub solver: SolverOverrides,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p_values.is_empty()
            || self.resolutions.is_empty()
            || self.seeds.is_empty()
            || self.lambdas.is_empty()
        {
            return Err(Error::invalid("sweep lists must be nonempty"));
        }
        if self.p_values.iter().any(|p| !(*p > 1.0)) {
            return Err(Error::invalid("sweep exponents must be > 1"));
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::invalid("scaling factors must be positive"));
        }
        for &n in &self.resolutions {
            BoxDomain::new(self.lengths, [n; 3])?;
        }
        for &p in &self.p_values {
            self.solver.config(p).validate()?;
        }
        Ok(())
    }

    /// Configurations in report order.
    fn jobs(&self) -> Vec<Job> {
        let mut jobs = Vec::new();
        for &seed in &self.seeds {
            for &p in &self.p_values {
                for &lambda in &self.lambdas {
                    for &n in &self.resolutions {
                        jobs.push(Job { p, n, seed, lambda });
                    }
                }
            }
        }
        jobs
    }
}

#[derive(Clone, Copy, Debug)]
struct Job {
    p: f64,
    n: usize,
    seed: u64,
    lambda: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub p: f64,
    pub cells: [usize; 3],
    pub lengths: [f64; 3],
    pub source: String,
    pub seed: u64,
    pub lambda: f64,
    /// max over cells of |curl u|
    pub norm_curl_inf: f64,
    /// max over faces of |curl u| component (diagnostic)
    pub norm_curl_inf_faces: f64,
    pub norm_curl_p: f64,
    pub norm_f_31: f64,
    /// `None` when the source vanishes.
    pub c_emp_inf: Option<f64>,
    pub c_emp_p: Option<f64>,
    pub norm_comparison_ok: bool,
    pub flagged_inf: bool,
    pub flagged_p: bool,
    pub status: String,
    pub error: Option<String>,
    pub iterations: usize,
    pub stage_iterations: Vec<usize>,
    pub energy: f64,
    pub projected_grad_norm: f64,
    pub weak_residual: f64,
    pub terminal_eps: f64,
}

impl EstimateReport {
    pub fn converged(&self) -> bool {
        self.status == "converged"
    }

    fn key(&self) -> (String, u64, u64, u64, usize) {
        (
            self.source.clone(),
            self.seed,
            self.p.to_bits(),
            self.lambda.to_bits(),
            self.cells[0],
        )
    }
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Converged => "converged",
        SolveStatus::IterationCap => "iteration_cap",
        SolveStatus::LineSearchFailed => "line_search_failed",
    }
}

/// ‖|f|‖_{L^{3,1}} of the cell-sampled source magnitude.
pub fn source_lorentz_norm(f: &EdgeField, g: &BoxDomain) -> Result<f64> {
    let mag = edge_cell_magnitude(f, g)?;
    let s = MeasuredSample::from_cells(&mag, g)?;
    lorentz_norm(&s, 3.0, 1.0)
}

/// Both sides of the two curl estimates for a solved problem.
pub fn measure(result: &SolveResult, f: &EdgeField, p: f64, g: &BoxDomain) -> Result<Measured> {
    let mag = cell_magnitude(&result.curl_u, g)?;
    let sample = MeasuredSample::from_cells(&mag, g)?;
    let norm_curl_inf = lp_norm(&sample, Exponent::Inf)?;
    let norm_curl_p = lp_norm(&sample, Exponent::Finite(p))?;
    let norm_f_31 = source_lorentz_norm(f, g)?;
    let (c_inf, c_p) = if norm_f_31 > 0.0 {
        let d = norm_f_31.powf(1.0 / (p - 1.0));
        (Some(norm_curl_inf / d), Some(norm_curl_p / d))
    } else {
        (None, None)
    };
    let comparison = match (c_inf, c_p) {
        (Some(ci), Some(cp)) => cp <= ci * g.measure().powf(1.0 / p) * (1.0 + COMPARISON_SLACK),
        _ => norm_curl_p <= norm_curl_inf * g.measure().powf(1.0 / p) * (1.0 + COMPARISON_SLACK),
    };
    Ok(Measured {
        norm_curl_inf,
        norm_curl_inf_faces: result.curl_u.max_abs(),
        norm_curl_p,
        norm_f_31,
        c_emp_inf: c_inf,
        c_emp_p: c_p,
        norm_comparison_ok: comparison,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measured {
    pub norm_curl_inf: f64,
    pub norm_curl_inf_faces: f64,
    pub norm_curl_p: f64,
    pub norm_f_31: f64,
    pub c_emp_inf: Option<f64>,
    pub c_emp_p: Option<f64>,
    pub norm_comparison_ok: bool,
}

/// Solve one configuration and assemble its report. Failures are recorded
/// inside the report rather than returned.
pub fn estimate_report(
    p: f64,
    g: &BoxDomain,
    source: &SourceFamily,
    seed: u64,
    lambda: f64,
    overrides: &SolverOverrides,
) -> EstimateReport {
    let mut rep = EstimateReport {
        p,
        cells: g.cells(),
        lengths: g.lengths(),
        source: source.describe(),
        seed,
        lambda,
        norm_curl_inf: f64::NAN,
        norm_curl_inf_faces: f64::NAN,
        norm_curl_p: f64::NAN,
        norm_f_31: f64::NAN,
        c_emp_inf: None,
        c_emp_p: None,
        norm_comparison_ok: false,
        flagged_inf: false,
        flagged_p: false,
        status: "error".into(),
        error: None,
        iterations: 0,
        stage_iterations: vec![],
        energy: f64::NAN,
        projected_grad_norm: f64::NAN,
        weak_residual: f64::NAN,
        terminal_eps: f64::NAN,
    };
    let cfg = overrides.config(p);
    let f = match source.build(g, seed) {
        Ok(mut f) => {
            f.scale(lambda);
            f
        }
        Err(e) => {
            rep.error = Some(e.to_string());
            return rep;
        }
    };
    let (result, err) = match solver::solve(&f, &cfg, g) {
        Ok(r) => (r, None),
        Err(Error::NotConverged { reason, result }) => (*result, Some(reason)),
        Err(e) => {
            rep.error = Some(e.to_string());
            return rep;
        }
    };
    rep.status = status_name(result.status).into();
    rep.error = err;
    rep.iterations = result.total_iterations();
    rep.stage_iterations = result.iterations.clone();
    rep.energy = result.energy;
    rep.projected_grad_norm = result.projected_grad_norm;
    rep.weak_residual = result.weak_residual;
    rep.terminal_eps = result.terminal_eps;
    match measure(&result, &f, p, g) {
        Ok(m) => {
            rep.norm_curl_inf = m.norm_curl_inf;
            rep.norm_curl_inf_faces = m.norm_curl_inf_faces;
            rep.norm_curl_p = m.norm_curl_p;
            rep.norm_f_31 = m.norm_f_31;
            rep.c_emp_inf = m.c_emp_inf;
            rep.c_emp_p = m.c_emp_p;
            rep.norm_comparison_ok = m.norm_comparison_ok;
        }
        Err(e) => rep.error = Some(e.to_string()),
    }
    rep
}

/// Every configuration of the sweep, sorted by (source, seed, p, λ, N).
/// Configurations run concurrently when the `parallel` feature is on.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<EstimateReport>> {
    spec.validate()?;
    let mut reports = par::map_jobs(spec.jobs(), |job| {
        let g = BoxDomain::new(spec.lengths, [job.n; 3]).expect("validated");
        estimate_report(job.p, &g, &spec.source, job.seed, job.lambda, &spec.solver)
    });
    reports.sort_by(|a, b| {
        a.key()
            .0
            .cmp(&b.key().0)
            .then(a.seed.cmp(&b.seed))
            .then(a.p.total_cmp(&b.p))
            .then(a.lambda.total_cmp(&b.lambda))
            .then(a.cells[0].cmp(&b.cells[0]))
    });
    Ok(reports)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ratio {
    Inf,
    Lp,
}

/// A configuration whose `C_emp` grew by more than [`REFINEMENT_FLAG`]
/// between its two finest resolutions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementFlag {
    pub ratio: String,
    pub p: f64,
    pub source: String,
    pub seed: u64,
    pub lambda: f64,
    pub coarse: usize,
    pub fine: usize,
    pub growth: f64,
}

/// Mark refinement growth on the finest report of each configuration group.
pub fn flag_refinement(reports: &mut [EstimateReport], which: Ratio) -> Vec<RefinementFlag> {
    let mut groups: BTreeMap<(String, u64, u64, u64), Vec<usize>> = BTreeMap::new();
    for (n, r) in reports.iter().enumerate() {
        let k = r.key();
        groups.entry((k.0, k.1, k.2, k.3)).or_default().push(n);
    }
    let mut flags = Vec::new();
    for idx in groups.values() {
        let mut idx = idx.clone();
        idx.sort_by_key(|&n| reports[n].cells[0]);
        if idx.len() < 2 {
            continue;
        }
        let (c, f) = (idx[idx.len() - 2], idx[idx.len() - 1]);
        let pick = |r: &EstimateReport| match which {
            Ratio::Inf => r.c_emp_inf,
            Ratio::Lp => r.c_emp_p,
        };
        if let (Some(a), Some(b)) = (pick(&reports[c]), pick(&reports[f])) {
            let growth = b / a - 1.0;
            if !(growth <= REFINEMENT_FLAG) {
                match which {
                    Ratio::Inf => reports[f].flagged_inf = true,
                    Ratio::Lp => reports[f].flagged_p = true,
                }
                flags.push(RefinementFlag {
                    ratio: match which {
                        Ratio::Inf => "c_emp_inf".into(),
                        Ratio::Lp => "c_emp_p".into(),
                    },
                    p: reports[f].p,
                    source: reports[f].source.clone(),
                    seed: reports[f].seed,
                    lambda: reports[f].lambda,
                    coarse: reports[c].cells[0],
                    fine: reports[f].cells[0],
                    growth,
                });
            }
        }
    }
    flags
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub reports: Vec<EstimateReport>,
    pub flags: Vec<RefinementFlag>,
}

impl Verification {
    pub fn all_converged(&self) -> bool {
        self.reports.iter().all(EstimateReport::converged)
    }
}

/// Sweep and flag growth of `C_emp_inf` under refinement.
pub fn verify_linfty_estimate(spec: &SweepSpec) -> Result<Verification> {
    let mut reports = run_sweep(spec)?;
    let flags = flag_refinement(&mut reports, Ratio::Inf);
    Ok(Verification { reports, flags })
}

/// Sweep and flag growth of `C_emp_p` under refinement; each report also
/// carries the check `C_emp_p ≤ C_emp_inf |Ω|^{1/p}`.
pub fn verify_lp_estimate(spec: &SweepSpec) -> Result<Verification> {
    let mut reports = run_sweep(spec)?;
    let flags = flag_refinement(&mut reports, Ratio::Lp);
    Ok(Verification { reports, flags })
}

/// Both estimates from a single sweep.
pub fn verify_estimates(spec: &SweepSpec) -> Result<Verification> {
    let mut reports = run_sweep(spec)?;
    let mut flags = flag_refinement(&mut reports, Ratio::Inf);
    flags.extend(flag_refinement(&mut reports, Ratio::Lp));
    Ok(Verification { reports, flags })
}

/// Fixed column order of the tabular output.
pub const CSV_HEADER: &str =
    "p,Nx,Ny,Nz,seed,lambda,norm_curl_inf,norm_curl_p,norm_f_31,c_emp_inf,c_emp_p,iters,resid";

/// Shortest decimal text that parses back to exactly `x`, in exponent form
/// for very small or very large magnitudes.
pub fn format_float(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), format_float)
}

pub fn reports_csv(reports: &[EstimateReport]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            format_float(r.p),
            r.cells[0],
            r.cells[1],
            r.cells[2],
            r.seed,
            format_float(r.lambda),
            format_float(r.norm_curl_inf),
            format_float(r.norm_curl_p),
            format_float(r.norm_f_31),
            opt(r.c_emp_inf),
            opt(r.c_emp_p),
            r.iterations,
            format_float(r.weak_residual)
        ));
    }
    s
}

// ---------------------------------------------------------------------------
// manufactured convergence

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub err_u_max: f64,
    pub err_u_l2: f64,
    pub err_curl_max: f64,
    pub err_curl_l2: f64,
    pub order_u_max: Option<f64>,
    pub order_u_l2: Option<f64>,
    pub order_curl_max: Option<f64>,
    pub order_curl_l2: Option<f64>,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn csv(&self) -> String {
        let mut s = String::from(
            "N,err_u_max,err_u_l2,err_curl_max,err_curl_l2,order_u_max,order_u_l2,order_curl_max,order_curl_l2,iters\n",
        );
        let o = |v: Option<f64>| v.map_or(String::new(), format_float);
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.n,
                format_float(r.err_u_max),
                format_float(r.err_u_l2),
                format_float(r.err_curl_max),
                format_float(r.err_curl_l2),
                o(r.order_u_max),
                o(r.order_u_l2),
                o(r.order_curl_max),
                o(r.order_curl_l2),
                r.iterations
            ));
        }
        s
    }

    /// Rows that carry observed orders.
    pub fn order_rows(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.order_curl_max.is_some())
            .count()
    }
}

/// Errors of the p = 2 manufactured problem and observed orders between
/// consecutive resolutions.
pub fn convergence_study(
    resolutions: &[usize],
    lengths: [f64; 3],
    overrides: &SolverOverrides,
) -> Result<ConvergenceTable> {
    if resolutions.is_empty() {
        return Err(Error::invalid("no resolutions given"));
    }
    if resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("resolutions must be strictly ascending"));
    }
    let cfg = overrides.config(2.0);
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in resolutions {
        let g = BoxDomain::new(lengths, [n; 3])?;
        let f = manufactured_source(&g);
        let r = solver::solve(&f, &cfg, &g)?;
        let mut du = r.u.clone();
        du.axpy(-1.0, &manufactured_solution(&g));
        let mut dw = r.curl_u.clone();
        dw.axpy(-1.0, &manufactured_curl(&g));
        let mut row = ConvergenceRow {
            n,
            err_u_max: du.max_abs(),
            err_u_l2: du.norm(&g),
            err_curl_max: dw.max_abs(),
            err_curl_l2: dw.norm(&g),
            order_u_max: None,
            order_u_l2: None,
            order_curl_max: None,
            order_curl_l2: None,
            iterations: r.total_iterations(),
        };
        if let Some(prev) = rows.last() {
            let h = (n as f64 / prev.n as f64).ln();
            let ord = |a: f64, b: f64| Some((a / b).ln() / h);
            row.order_u_max = ord(prev.err_u_max, row.err_u_max);
            row.order_u_l2 = ord(prev.err_u_l2, row.err_u_l2);
            row.order_curl_max = ord(prev.err_curl_max, row.err_curl_max);
            row.order_curl_l2 = ord(prev.err_curl_l2, row.err_curl_l2);
        }
        rows.push(row);
    }
    Ok(ConvergenceTable { rows })
}
