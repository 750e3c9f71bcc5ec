//! Dirichlet Poisson solves and the discrete Leray projection.

use crate::calculus::{divergence_unchecked, gradient_unchecked, laplacian_unchecked};
use crate::error::{Error, Result};
use crate::grid::{BoxDomain, EdgeField, NodeField, Staggering};
use crate::par;

#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub phi: NodeField,
    pub iterations: usize,
    /// ‖Δ_h φ − rhs‖ / ‖rhs‖ over interior nodes.
    pub relative_residual: f64,
    /// Quadratic energy `½ φ·Aφ − b·φ` after each iteration (non-increasing).
    pub energy_trace: Vec<f64>,
}

fn interior_mask(g: &BoxDomain) -> Vec<bool> {
    let e = g.node_extent();
    let s = Staggering::node();
    (0..e.len())
        .map(|n| {
            let (i, j, k) = e.unravel(n);
            !s.on_boundary(&e, i, j, k)
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    par::sum_by(a.len(), |n| a[n] * b[n])
}

/// Solve `Δ_h φ = rhs` on interior nodes with `φ = 0` on boundary nodes by
/// conjugate gradients on `−Δ_h`. Boundary entries of `rhs` are ignored.
pub fn poisson_solve(rhs: &NodeField, g: &BoxDomain, tol: f64) -> Result<PoissonSolution> {
    let [nx, ny, nz] = g.cells();
    poisson_solve_capped(rhs, g, tol, 1000 + 20 * (nx + ny + nz))
}

pub(crate) fn poisson_solve_capped(
    rhs: &NodeField,
    g: &BoxDomain,
    tol: f64,
    cap: usize,
) -> Result<PoissonSolution> {
    rhs.check(g)?;
    if !(tol > 0.0) {
        return Err(Error::invalid(format!(
            "poisson tolerance must be > 0, got {tol}"
        )));
    }
    if !rhs.values.is_finite() {
        return Err(Error::invalid("poisson right-hand side is not finite"));
    }
    let mask = interior_mask(g);
    let e = g.node_extent();
    let n = e.len();
    // b = −rhs on the interior
    let b: Vec<f64> = (0..n)
        .map(|m| if mask[m] { -rhs.values.data()[m] } else { 0.0 })
        .collect();
    let bnorm = dot(&b, &b).sqrt();
    let mut x = NodeField::zeros(g);
    if bnorm == 0.0 {
        return Ok(PoissonSolution {
            phi: x,
            iterations: 0,
            relative_residual: 0.0,
            energy_trace: vec![0.0],
        });
    }

    let mut r = b.clone();
    let mut p = NodeField::zeros(g);
    p.values.data_mut().copy_from_slice(&r);
    let mut rr = dot(&r, &r);
    let mut trace = vec![0.0];
    let mut it = 0;
    while rr.sqrt() > tol * bnorm {
        if it >= cap {
            return Err(Error::PoissonNotConverged {
                iterations: it,
                residual: rr.sqrt() / bnorm,
            });
        }
        let mut ap = laplacian_unchecked(&p, g);
        ap.values.scale(-1.0);
        let pap = dot(p.values.data(), ap.values.data());
        let alpha = rr / pap;
        x.values.axpy(alpha, &p.values);
        {
            let a = ap.values.data();
            par::update(&mut r, |m, v| v - alpha * a[m]);
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        {
            let rv = &r;
            par::update(p.values.data_mut(), |m, v| rv[m] + beta * v);
        }
        let xd = x.values.data();
        trace.push(-0.5 * par::sum_by(n, |m| xd[m] * (b[m] + r[m])));
        it += 1;
    }

    // report the true residual rather than the recurrence
    let lap = laplacian_unchecked(&x, g);
    let (l, rh) = (lap.values.data(), rhs.values.data());
    let res = par::sum_by(n, |m| if mask[m] { (l[m] - rh[m]).powi(2) } else { 0.0 }).sqrt();
    Ok(PoissonSolution {
        phi: x,
        iterations: it,
        relative_residual: res / bnorm,
        energy_trace: trace,
    })
}

/// Characteristic divergence magnitude of an edge field: `max|v| / min h`.
pub fn divergence_scale(v: &EdgeField, g: &BoxDomain) -> f64 {
    v.max_abs() / g.min_spacing()
}

/// Remove the discrete gradient part of a tangentially constrained field.
/// Returns `v − gradient(φ)` with `Δ_h φ = divergence(v)`, `φ = 0` on ∂Ω.
pub fn leray_project(v: &EdgeField, g: &BoxDomain, tol: f64) -> Result<EdgeField> {
    Ok(leray_project_with_potential(v, g, tol)?.0)
}

pub(crate) fn leray_project_with_potential(
    v: &EdgeField,
    g: &BoxDomain,
    tol: f64,
) -> Result<(EdgeField, Option<NodeField>)> {
    v.check(g)?;
    if !v.is_constrained() {
        return Err(Error::invalid(
            "leray_project needs a tangentially constrained field",
        ));
    }
    let div = divergence_unchecked(v, g);
    if div.interior_max_abs() <= tol * divergence_scale(v, g) {
        return Ok((v.clone(), None));
    }
    let sol = poisson_solve(&div, g, tol)?;
    let mut out = v.clone();
    out.axpy(-1.0, &gradient_unchecked(&sol.phi, g));
    Ok((out, Some(sol.phi)))
}

/// A divergence-free source and what was removed to make it so.
#[derive(Clone, Debug)]
pub struct ProjectedSource {
    pub field: EdgeField,
    /// Norm of the discarded gradient part.
    pub discarded_norm: f64,
    pub warning: Option<String>,
}

/// Enforce `div f = 0` on a tangentially constrained source.
pub fn project_source(f_raw: &EdgeField, g: &BoxDomain, tol: f64) -> Result<ProjectedSource> {
    let (field, _) = leray_project_with_potential(f_raw, g, tol)?;
    let mut removed = f_raw.clone();
    removed.axpy(-1.0, &field);
    let discarded_norm = removed.norm(g);
    let raw_norm = f_raw.norm(g);
    let warning = if raw_norm > 0.0 && field.norm(g) <= 1e-6 * raw_norm {
        Some(format!(
            "source is (numerically) a pure gradient: {:.3e} of {:.3e} discarded",
            discarded_norm, raw_norm
        ))
    } else {
        None
    };
    Ok(ProjectedSource {
        field,
        discarded_norm,
        warning,
    })
}
