//! Minimisation of the discrete p-curl energy over tangentially constrained,
//! discretely divergence-free edge fields.
//!
//! The minimiser is found by projected nonlinear conjugate gradients
//! (Polak–Ribière+, periodic restart) with a continuation in the
//! regularisation `ε` of `|curl u|`. The search direction always stays in the
//! constrained subspace: the energy gradient `curl_adjoint(W ω) − f` is
//! divergence-free whenever `f` is, so feasibility is preserved without
//! projecting inside the line search.

mod energy;
mod poisson;

pub use energy::{energy, energy_gradient};
pub use poisson::{
    divergence_scale, leray_project, poisson_solve, project_source, PoissonSolution,
    ProjectedSource,
};

pub(crate) use energy::{energy_from_curl, gradient_from_curl, weighted_curl, LineModel};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{cell_magnitude, curl_unchecked, divergence_unchecked};
use crate::error::{Error, Result};
use crate::grid::{BoxDomain, CellField, EdgeField, FaceField, AXES};

/// Smallest exponent accepted; continuation is unreliable closer to 1.
pub const MIN_EXPONENT: f64 = 1.05;

/// Starting point of the minimisation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Init {
    Zero,
    /// Random feasible field drawn from the given seed.
    Random(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub p: f64,
    pub eps_schedule: Vec<f64>,
    /// Relative projected-gradient tolerance of the final stage.
    pub grad_tol: f64,
    /// Tolerance used for intermediate continuation stages (never tighter than `grad_tol`).
    pub stage_tol: f64,
    pub max_iters: usize,
    pub backtrack: f64,
    pub armijo: f64,
    pub poisson_tol: f64,
    pub restart_every: usize,
    pub init: Init,
    /// Random test fields used for the weak residual.
    pub residual_trials: usize,
    pub residual_seed: u64,
}

impl SolverConfig {
    pub fn new(p: f64) -> Self {
        SolverConfig {
            p,
            eps_schedule: Self::default_schedule(p),
            grad_tol: 1e-8,
            stage_tol: 1e-5,
            max_iters: 20_000,
            backtrack: 0.5,
            armijo: 1e-4,
            poisson_tol: 1e-10,
            restart_every: 50,
            init: Init::Zero,
            residual_trials: 4,
            residual_seed: 0x5eed,
        }
    }

    pub fn default_schedule(p: f64) -> Vec<f64> {
        if p >= 2.0 {
            vec![1e-2, 1e-4, 1e-8, 0.0]
        } else {
            vec![1e-2, 1e-4, 1e-6]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p;
        if !(p.is_finite() && p >= MIN_EXPONENT) {
            return Err(Error::invalid(format!(
                "exponent p must be finite and >= {MIN_EXPONENT}, got {p}"
            )));
        }
        if self.eps_schedule.is_empty() {
            return Err(Error::invalid("eps schedule is empty"));
        }
        if self
            .eps_schedule
            .iter()
            .any(|e| !(e.is_finite() && *e >= 0.0))
        {
            return Err(Error::invalid(
                "eps schedule entries must be finite and >= 0",
            ));
        }
        if self.eps_schedule.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("eps schedule must be non-increasing"));
        }
        if p < 2.0 && self.terminal_eps() == 0.0 {
            return Err(Error::invalid("p < 2 needs a positive terminal eps"));
        }
        for (name, v) in [
            ("grad_tol", self.grad_tol),
            ("stage_tol", self.stage_tol),
            ("poisson_tol", self.poisson_tol),
            ("armijo", self.armijo),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::invalid("backtrack factor must lie in (0, 1)"));
        }
        if self.armijo >= 1.0 {
            return Err(Error::invalid("armijo constant must lie in (0, 1)"));
        }
        if self.max_iters == 0 || self.restart_every == 0 {
            return Err(Error::invalid(
                "max_iters and restart_every must be positive",
            ));
        }
        Ok(())
    }

    pub fn terminal_eps(&self) -> f64 {
        self.eps_schedule.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    IterationCap,
    LineSearchFailed,
}

/// One line of the convergence trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub stage: usize,
    pub eps: f64,
    pub iter: usize,
    pub energy: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub u: EdgeField,
    pub curl_u: FaceField,
    pub curl_mag: CellField,
    pub energy: f64,
    pub projected_grad_norm: f64,
    pub weak_residual: f64,
    /// Iterations spent in each ε stage.
    pub iterations: Vec<usize>,
    pub terminal_eps: f64,
    pub status: SolveStatus,
    pub trace: Vec<TraceRow>,
}

impl SolveResult {
    pub fn total_iterations(&self) -> usize {
        self.iterations.iter().sum()
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Uniform random field on interior edges, zero on the boundary.
pub fn random_constrained(g: &BoxDomain, seed: u64) -> EdgeField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = EdgeField::zeros(g);
    for a in AXES {
        u.comp_mut(a)
            .data_mut()
            .iter_mut()
            .for_each(|v| *v = rng.gen_range(-1.0..1.0));
    }
    u.apply_constraint();
    u
}

/// Random feasible field (constrained and divergence-free).
pub fn random_feasible(g: &BoxDomain, seed: u64, tol: f64) -> Result<EdgeField> {
    leray_project(&random_constrained(g, seed), g, tol)
}

fn check_source(f: &EdgeField, g: &BoxDomain) -> Result<()> {
    f.check(g)?;
    if !f.is_finite() {
        return Err(Error::invalid("source contains non-finite values"));
    }
    if !f.is_constrained() {
        return Err(Error::invalid("source must vanish on boundary edges"));
    }
    let div = divergence_unchecked(f, g).interior_max_abs();
    if div > 1e-9 * divergence_scale(f, g) {
        return Err(Error::invalid(format!(
            "source is not discretely divergence-free (max interior divergence {div:.3e}); use project_source"
        )));
    }
    Ok(())
}

/// Safeguarded Newton search for a minimiser along the line, followed by an
/// Armijo check with backtracking. Returns the step and the energy change.
fn line_search(
    model: &LineModel,
    slope: f64,
    guess: f64,
    cfg: &SolverConfig,
) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut alpha = 0.0;
    let mut best = None;
    for _ in 0..50 {
        let (d1, d2) = model.derivatives(alpha);
        if alpha > 0.0 && d1.abs() <= 1e-6 * slope.abs() {
            best = Some(alpha);
            break;
        }
        if d1 < 0.0 {
            lo = alpha;
        } else {
            hi = alpha;
        }
        let newton = alpha - d1 / d2;
        alpha = if d2 > 0.0 && newton.is_finite() && newton > lo && newton < hi {
            newton
        } else if hi.is_finite() {
            0.5 * (lo + hi)
        } else if lo > 0.0 {
            2.0 * lo
        } else {
            guess
        };
        best = Some(alpha);
        if hi.is_finite() && hi - lo <= 1e-14 * hi {
            break;
        }
    }
    let mut alpha = best.filter(|a| *a > 0.0 && a.is_finite()).unwrap_or(guess);
    for _ in 0..60 {
        let delta = model.delta(alpha);
        if delta <= cfg.armijo * alpha * slope {
            return Some((alpha, delta));
        }
        alpha *= cfg.backtrack;
    }
    None
}

/// Minimise the discrete energy for a divergence-free, constrained source.
///
/// Non-convergence is reported as [`Error::NotConverged`] carrying the best
/// iterate.
pub fn solve(f: &EdgeField, cfg: &SolverConfig, g: &BoxDomain) -> Result<SolveResult> {
    cfg.validate()?;
    check_source(f, g)?;
    let p = cfg.p;

    let mut u = match cfg.init {
        Init::Zero => EdgeField::zeros(g),
        Init::Random(seed) => {
            let mut u = random_feasible(g, seed, cfg.poisson_tol)?;
            // put the start on the scale of the solution
            let [lx, ly, lz] = g.lengths();
            let lambda = std::f64::consts::PI.powi(2) * (lx.powi(-2) + ly.powi(-2) + lz.powi(-2));
            let target = (f.norm(g) / lambda).max(1e-3);
            u.scale(target / u.norm(g).max(f64::MIN_POSITIVE));
            u
        }
    };
    let fnorm = f.norm(g);
    let tol_final = cfg.grad_tol * fnorm.max(1.0);
    let tol_stage = cfg.stage_tol.max(cfg.grad_tol) * fnorm.max(1.0);

    let mut w = curl_unchecked(&u, g);
    let mut trace = Vec::new();
    let mut iterations = Vec::with_capacity(cfg.eps_schedule.len());
    let mut status = SolveStatus::Converged;
    let mut grad_norm = 0.0;
    let mut guess = 1.0;

    let stages = cfg.eps_schedule.len();
    'stages: for (stage, &eps) in cfg.eps_schedule.iter().enumerate() {
        let last = stage + 1 == stages;
        let tol = if last { tol_final } else { tol_stage };
        let mut j = energy_from_curl(&w, p, eps, g) - f.inner_unchecked(&u, g);
        let mut grad = gradient_from_curl(&w, f, p, eps, g);
        let mut gg = grad.inner_unchecked(&grad, g);
        grad_norm = gg.sqrt();
        let mut dir = grad.scaled(-1.0);
        let mut steepest = true;
        let mut it = 0;
        trace.push(TraceRow {
            stage,
            eps,
            iter: 0,
            energy: j,
            grad_norm,
        });

        while grad_norm > tol {
            if it >= cfg.max_iters {
                status = SolveStatus::IterationCap;
                iterations.push(it);
                break 'stages;
            }
            let mut slope = grad.inner_unchecked(&dir, g);
            if !(slope < 0.0) {
                dir = grad.scaled(-1.0);
                slope = -gg;
                steepest = true;
            }
            let dw = curl_unchecked(&dir, g);
            let model = LineModel::new(&w, &dw, f.inner_unchecked(&dir, g), p, eps, g);
            let Some((alpha, delta)) = line_search(&model, slope, guess, cfg) else {
                if steepest {
                    status = SolveStatus::LineSearchFailed;
                    iterations.push(it);
                    break 'stages;
                }
                dir = grad.scaled(-1.0);
                steepest = true;
                continue;
            };
            guess = alpha;
            u.axpy(alpha, &dir);
            w.axpy(alpha, &dw);
            j += delta;
            it += 1;

            let new_grad = gradient_from_curl(&w, f, p, eps, g);
            let new_gg = new_grad.inner_unchecked(&new_grad, g);
            let beta = if it % cfg.restart_every == 0 {
                0.0
            } else {
                let cross = new_grad.inner_unchecked(&grad, g);
                ((new_gg - cross) / gg).max(0.0)
            };
            grad = new_grad;
            gg = new_gg;
            grad_norm = gg.sqrt();
            dir.scale(beta);
            dir.axpy(-1.0, &grad);
            steepest = beta == 0.0;
            trace.push(TraceRow {
                stage,
                eps,
                iter: it,
                energy: j,
                grad_norm,
            });
        }
        iterations.push(it);
        // drop accumulated drift in ω before the next stage
        w = curl_unchecked(&u, g);
    }

    // clear round-off divergence; gradients do not change the curl
    if cfg.init != Init::Zero || fnorm > 0.0 {
        u = leray_project(&u, g, cfg.poisson_tol)?;
    }
    let eps = cfg.terminal_eps();
    let curl_u = curl_unchecked(&u, g);
    let energy = energy_from_curl(&curl_u, p, eps, g) - f.inner_unchecked(&u, g);
    let final_grad = gradient_from_curl(&curl_u, f, p, eps, g);
    let projected_grad_norm = if status == SolveStatus::Converged {
        final_grad.norm(g)
    } else {
        grad_norm.max(final_grad.norm(g))
    };
    let weak = weak_residual(&u, f, p, eps, g, cfg.residual_trials, cfg.residual_seed)?;
    let curl_mag = cell_magnitude(&curl_u, g)?;
    let result = SolveResult {
        u,
        curl_u,
        curl_mag,
        energy,
        projected_grad_norm,
        weak_residual: weak,
        iterations,
        terminal_eps: eps,
        status,
        trace,
    };
    match status {
        SolveStatus::Converged => Ok(result),
        SolveStatus::IterationCap => Err(Error::NotConverged {
            reason: format!("iteration cap of {} reached", cfg.max_iters),
            result: Box::new(result),
        }),
        SolveStatus::LineSearchFailed => Err(Error::NotConverged {
            reason: "line search failed along the steepest-descent direction".into(),
            result: Box::new(result),
        }),
    }
}

/// Largest defect of the weak formulation over random unit test fields `Φ`
/// from the constrained divergence-free space:
/// `max |⟨W(u) ω, curl Φ⟩ − ⟨f, Φ⟩|`.
pub fn weak_residual(
    u: &EdgeField,
    f: &EdgeField,
    p: f64,
    eps: f64,
    g: &BoxDomain,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    energy::check_params(p, eps)?;
    u.check(g)?;
    f.check(g)?;
    let w = curl_unchecked(u, g);
    let flux = weighted_curl(&w, p, eps, g);
    let mut worst = 0.0_f64;
    for t in 0..trials {
        let mut phi = random_feasible(g, seed.wrapping_add(t as u64), 1e-10)?;
        let n = phi.norm(g);
        if n == 0.0 {
            continue;
        }
        phi.scale(1.0 / n);
        let lhs = flux.inner_unchecked(&curl_unchecked(&phi, g), g);
        let rhs = f.inner_unchecked(&phi, g);
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(2.0).validate().is_ok());
        assert!(SolverConfig::new(1.5).validate().is_ok());
        assert!(SolverConfig::new(1.01).validate().is_err());
        assert!(SolverConfig::new(f64::NAN).validate().is_err());
        let mut c = SolverConfig::new(3.0);
        c.eps_schedule = vec![1e-4, 1e-2];
        assert!(c.validate().is_err());
        c.eps_schedule = vec![];
        assert!(c.validate().is_err());
        let mut c = SolverConfig::new(1.5);
        c.eps_schedule = vec![1e-2, 0.0];
        assert!(c.validate().is_err());
        let mut c = SolverConfig::new(2.0);
        c.grad_tol = 0.0;
        assert!(c.validate().is_err());
        assert_eq!(
            SolverConfig::new(2.0).eps_schedule,
            vec![1e-2, 1e-4, 1e-8, 0.0]
        );
        assert_eq!(SolverConfig::new(1.5).eps_schedule, vec![1e-2, 1e-4, 1e-6]);
    }

    #[test]
    fn zero_source_terminates_immediately() {
        let g = BoxDomain::unit_cube(6).unwrap();
        let r = solve(&EdgeField::zeros(&g), &SolverConfig::new(3.0), &g).unwrap();
        assert_eq!(r.total_iterations(), 0);
        assert_eq!(r.u.max_abs(), 0.0);
        assert_eq!(r.energy, 0.0);
    }

    #[test]
    fn rejects_divergent_source() {
        let g = BoxDomain::unit_cube(6).unwrap();
        let f = random_constrained(&g, 3);
        assert!(matches!(
            solve(&f, &SolverConfig::new(2.0), &g),
            Err(Error::InvalidArgument(_))
        ));
        let f = EdgeField::sample(&g, |_| [1.0, 0.0, 0.0]);
        assert!(solve(&f, &SolverConfig::new(2.0), &g).is_err());
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        let g = BoxDomain::unit_cube(6).unwrap();
        let f = random_feasible(&g, 1, 1e-12).unwrap();
        let mut cfg = SolverConfig::new(3.0);
        cfg.max_iters = 3;
        match solve(&f, &cfg, &g) {
            Err(Error::NotConverged { result, .. }) => {
                assert_eq!(result.status, SolveStatus::IterationCap);
                assert!(result.energy < 0.0);
                assert!(result.u.is_constrained());
            }
            other => panic!(
                "expected non-convergence, got {:?}",
                other.map(|r| r.status)
            ),
        }
    }
}
