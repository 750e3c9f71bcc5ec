//! Independent planar p-Laplace solver used to cross-check the 3D solver.
//!
//! A z-invariant field `u = (0, 0, φ(x, y))` reduces the p-curl system to
//! `−div(|∇φ|^{p−2} ∇φ) = f_z` with `φ = 0` on the boundary. This module
//! solves that problem with nothing borrowed from the 3D code: piecewise
//! linear elements on a structured triangulation (each cell split along its
//! (i, j)–(i+1, j+1) diagonal), a lumped load, and Barzilai–Borwein gradient
//! descent in the discrete H¹₀ metric safeguarded by a nonmonotone Armijo
//! rule.
//!
//! At p = 2 the triangle energy coincides with the staggered 3D energy of a
//! z-invariant field; for other exponents the two discretisations differ at
//! O(h²), so agreement between them is evidence rather than tautology.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::SolveResult;
use crate::BoxDomain;

/// Rectangle `[0, Lx] x [0, Ly]` with `Nx x Ny` cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    lengths: [f64; 2],
    cells: [usize; 2],
}

impl Grid2D {
    pub fn new(lengths: [f64; 2], cells: [usize; 2]) -> Result<Self> {
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::invalid(format!("bad rectangle lengths {lengths:?}")));
        }
        if cells.iter().any(|&n| n < 2) {
            return Err(Error::invalid(format!(
                "need at least 2 cells per axis, got {cells:?}"
            )));
        }
        Ok(Grid2D { lengths, cells })
    }

    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new([1.0, 1.0], [n, n])
    }

    pub fn lengths(&self) -> [f64; 2] {
        self.lengths
    }

    pub fn cells(&self) -> [usize; 2] {
        self.cells
    }

    pub fn spacing(&self) -> [f64; 2] {
        [
            self.lengths[0] / self.cells[0] as f64,
            self.lengths[1] / self.cells[1] as f64,
        ]
    }

    pub fn nodes(&self) -> [usize; 2] {
        [self.cells[0] + 1, self.cells[1] + 1]
    }

    pub fn node_count(&self) -> usize {
        let [a, b] = self.nodes();
        a * b
    }

    fn at(&self, i: usize, j: usize) -> usize {
        i + (self.cells[0] + 1) * j
    }

    fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.cells[0] || j == self.cells[1]
    }
}

/// Nodal values with zero Dirichlet data, stored x-fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Scalar2DField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl Scalar2DField {
    pub fn zeros(grid: Grid2D) -> Self {
        Scalar2DField {
            grid,
            values: vec![0.0; grid.node_count()],
        }
    }

    /// Sample `f` at interior nodes; boundary values are set to zero.
    pub fn sample(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let [hx, hy] = grid.spacing();
        let [mx, my] = grid.nodes();
        let mut values = vec![0.0; grid.node_count()];
        for j in 0..my {
            for i in 0..mx {
                if !grid.is_boundary(i, j) {
                    values[grid.at(i, j)] = f(i as f64 * hx, j as f64 * hy);
                }
            }
        }
        Scalar2DField { grid, values }
    }

    /// Boundary entries of `values` are zeroed.
    pub fn from_values(grid: Grid2D, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::shape(format!(
                "expected {} nodal values, found {}",
                grid.node_count(),
                values.len()
            )));
        }
        let [mx, my] = grid.nodes();
        for j in 0..my {
            for i in 0..mx {
                if grid.is_boundary(i, j) {
                    values[grid.at(i, j)] = 0.0;
                }
            }
        }
        Ok(Scalar2DField { grid, values })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.at(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Lumped L² norm.
    pub fn norm(&self) -> f64 {
        let [hx, hy] = self.grid.spacing();
        (hx * hy * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Root mean square over the two triangles of each cell of `|∇φ|`,
    /// cell-ordered x-fastest.
    pub fn cell_gradient_magnitude(&self) -> Vec<f64> {
        let [nx, ny] = self.grid.cells;
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let [l, u] = triangle_gradients(self, i, j);
                out.push((0.5 * (dot(l, l) + dot(u, u))).sqrt());
            }
        }
        out
    }

    /// Largest triangle gradient magnitude.
    pub fn max_triangle_gradient(&self) -> f64 {
        let [nx, ny] = self.grid.cells;
        let mut m: f64 = 0.0;
        for j in 0..ny {
            for i in 0..nx {
                for g in triangle_gradients(self, i, j) {
                    m = m.max(dot(g, g).sqrt());
                }
            }
        }
        m
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

// Lower triangle (i,j),(i+1,j),(i+1,j+1) and upper triangle
// (i,j),(i,j+1),(i+1,j+1) of cell (i, j).
fn triangle_gradients(phi: &Scalar2DField, i: usize, j: usize) -> [[f64; 2]; 2] {
    let [hx, hy] = phi.grid.spacing();
    let a = phi.get(i, j);
    let b = phi.get(i + 1, j);
    let c = phi.get(i + 1, j + 1);
    let d = phi.get(i, j + 1);
    [[(b - a) / hx, (c - b) / hy], [(c - d) / hx, (d - a) / hy]]
}

fn check_pair(phi: &Scalar2DField, f: &Scalar2DField, p: f64) -> Result<()> {
    if phi.grid != f.grid {
        return Err(Error::shape("oracle fields live on different grids"));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("exponent must be > 1, got {p}")));
    }
    Ok(())
}

/// `Σ_T |T|/p |∇φ_T|^p − Σ_n hx hy f_n φ_n`.
pub fn energy2d(phi: &Scalar2DField, f: &Scalar2DField, p: f64) -> Result<f64> {
    check_pair(phi, f, p)?;
    let [hx, hy] = phi.grid.spacing();
    let [nx, ny] = phi.grid.cells;
    let area = 0.5 * hx * hy;
    let mut e = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            for g in triangle_gradients(phi, i, j) {
                e += area / p * dot(g, g).powf(0.5 * p);
            }
        }
    }
    let load: f64 = phi.values.iter().zip(&f.values).map(|(a, b)| a * b).sum();
    Ok(e - hx * hy * load)
}

/// Partial derivatives of [`energy2d`] with respect to the interior nodal
/// values (boundary entries are zero).
pub fn gradient2d(phi: &Scalar2DField, f: &Scalar2DField, p: f64) -> Result<Vec<f64>> {
    check_pair(phi, f, p)?;
    let grid = phi.grid;
    let [hx, hy] = grid.spacing();
    let [nx, ny] = grid.cells;
    let area = 0.5 * hx * hy;
    let mut out = vec![0.0; grid.node_count()];
    let weight = |g: [f64; 2]| {
        let s = dot(g, g);
        if s == 0.0 {
            0.0
        } else {
            area * s.powf(0.5 * p - 1.0)
        }
    };
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (
                grid.at(i, j),
                grid.at(i + 1, j),
                grid.at(i + 1, j + 1),
                grid.at(i, j + 1),
            );
            let [l, u] = triangle_gradients(phi, i, j);
            let wl = weight(l);
            let (fx, fy) = (wl * l[0] / hx, wl * l[1] / hy);
            out[a] -= fx;
            out[b] += fx - fy;
            out[c] += fy;
            let wu = weight(u);
            let (fx, fy) = (wu * u[0] / hx, wu * u[1] / hy);
            out[c] += fx;
            out[d] += fy - fx;
            out[a] -= fy;
        }
    }
    for n in 0..out.len() {
        out[n] -= hx * hy * f.values[n];
    }
    let [mx, my] = grid.nodes();
    for jj in 0..my {
        for ii in 0..mx {
            if grid.is_boundary(ii, jj) {
                out[grid.at(ii, jj)] = 0.0;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub phi: Scalar2DField,
    pub energy: f64,
    /// Lumped L² norm of the Riesz representative of the gradient.
    pub grad_norm: f64,
    pub iterations: usize,
}

/// Iteration cap of [`solve_plaplace`].
pub const ORACLE_MAX_ITERS: usize = 20_000;

const MEMORY: usize = 10;

// P1 stiffness of the triangulation (the 5-point Laplacian) applied to
// interior values; boundary entries stay zero.
fn stiffness(grid: &Grid2D, v: &[f64], out: &mut [f64]) {
    let [hx, hy] = grid.spacing();
    let (ax, ay) = (hy / hx, hx / hy);
    let [nx, ny] = grid.cells;
    for j in 0..=ny {
        for i in 0..=nx {
            let n = grid.at(i, j);
            out[n] = if grid.is_boundary(i, j) {
                0.0
            } else {
                ax * (2.0 * v[n] - v[n - 1] - v[n + 1])
                    + ay * (2.0 * v[n] - v[n - nx - 1] - v[n + nx + 1])
            };
        }
    }
}

fn dot_all(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// Solve K x = b by conjugate gradients.
fn stiffness_solve(grid: &Grid2D, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut d = r.clone();
    let mut kd = vec![0.0; n];
    let mut rr = dot_all(&r, &r);
    let stop = 1e-28 * rr;
    for _ in 0..10 * n {
        if rr <= stop || rr == 0.0 {
            break;
        }
        stiffness(grid, &d, &mut kd);
        let a = rr / dot_all(&d, &kd);
        for k in 0..n {
            x[k] += a * d[k];
            r[k] -= a * kd[k];
        }
        let rn = dot_all(&r, &r);
        let beta = rn / rr;
        rr = rn;
        for k in 0..n {
            d[k] = r[k] + beta * d[k];
        }
    }
    x
}

/// Minimise [`energy2d`] until the lumped L² norm of the gradient's Riesz
/// representative drops below `tol · max(1, ‖f‖)`.
///
/// Steps follow the Sobolev gradient `K⁻¹ ∇J`, `K` the P1 stiffness matrix,
/// with Barzilai–Borwein lengths measured in the `K` inner product, so the
/// iteration count does not grow with the resolution.
pub fn solve_plaplace_detailed(f: &Scalar2DField, p: f64, tol: f64) -> Result<OracleSolution> {
    if !(tol > 0.0) {
        return Err(Error::invalid("oracle tolerance must be positive"));
    }
    let grid = f.grid;
    let [hx, hy] = grid.spacing();
    let mass = hx * hy;
    let target = tol * f.norm().max(1.0);
    let lumped = |g: &[f64]| (dot_all(g, g) / mass).sqrt();

    let mut phi = Scalar2DField::zeros(grid);
    let mut e = energy2d(&phi, f, p)?;
    let mut grad = gradient2d(&phi, f, p)?;
    let mut history = vec![e];
    let mut step = 1.0;
    let mut ks = vec![0.0; grad.len()];
    for it in 0..ORACLE_MAX_ITERS {
        let gnorm = lumped(&grad);
        if gnorm <= target {
            return Ok(OracleSolution {
                phi,
                energy: e,
                grad_norm: gnorm,
                iterations: it,
            });
        }
        let dir = stiffness_solve(&grid, &grad);
        let slope = -dot_all(&grad, &dir);
        let reference = history.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut alpha = step;
        let trial = loop {
            let vals: Vec<f64> = phi
                .values
                .iter()
                .zip(&dir)
                .map(|(v, d)| v - alpha * d)
                .collect();
            let cand = Scalar2DField { grid, values: vals };
            let ec = energy2d(&cand, f, p)?;
            if ec <= reference + 1e-4 * alpha * slope {
                break Some((cand, ec));
            }
            alpha *= 0.5;
            if alpha < 1e-20 {
                break None;
            }
        };
        let Some((next, en)) = trial else {
            return Err(Error::OracleNotConverged {
                iterations: it,
                grad_norm: gnorm,
            });
        };
        let gn = gradient2d(&next, f, p)?;
        let s: Vec<f64> = next
            .values
            .iter()
            .zip(&phi.values)
            .map(|(a, b)| a - b)
            .collect();
        let y: Vec<f64> = gn.iter().zip(&grad).map(|(a, b)| a - b).collect();
        stiffness(&grid, &s, &mut ks);
        let sy = dot_all(&s, &y);
        step = if sy > 0.0 {
            (dot_all(&s, &ks) / sy).clamp(1e-10, 1e10)
        } else {
            2.0 * alpha
        };
        phi = next;
        grad = gn;
        e = en;
        history.push(e);
        if history.len() > MEMORY {
            history.remove(0);
        }
    }
    Err(Error::OracleNotConverged {
        iterations: ORACLE_MAX_ITERS,
        grad_norm: lumped(&grad),
    })
}

/// Minimiser of the planar p-Laplace energy with source `f2d` on `g2d`.
pub fn solve_plaplace(
    f2d: &Scalar2DField,
    p: f64,
    tol: f64,
    g2d: &Grid2D,
) -> Result<Scalar2DField> {
    if f2d.grid != *g2d {
        return Err(Error::shape("source is not sampled on the given grid"));
    }
    if !f2d.values.iter().all(|v| v.is_finite()) {
        return Err(Error::invalid("source must be finite"));
    }
    check_pair(f2d, f2d, p)?;
    Ok(solve_plaplace_detailed(f2d, p, tol)?.phi)
}

/// Discrepancy between a z-invariant 3D solution and the planar oracle:
/// the larger of `max|ū_z − φ| / max|φ|`, with `ū_z` the z-average of the
/// z-component, and the relative difference between the largest cell
/// magnitude of `curl u` and the largest cell gradient magnitude of `φ`.
pub fn compare_reduction(
    result3d: &SolveResult,
    g3: &BoxDomain,
    phi: &Scalar2DField,
) -> Result<f64> {
    let g2 = phi.grid;
    let [nx, ny, nz] = g3.cells();
    let [lx, ly, _] = g3.lengths();
    if g2.cells != [nx, ny] || g2.lengths != [lx, ly] {
        return Err(Error::shape(format!(
            "3D grid {:?}/{:?} does not match planar grid {:?}/{:?}",
            g3.cells(),
            g3.lengths(),
            g2.cells,
            g2.lengths
        )));
    }
    let uz = &result3d.u.z;
    let mut num: f64 = 0.0;
    for j in 0..=ny {
        for i in 0..=nx {
            let avg = (0..nz).map(|k| uz.get(i, j, k)).sum::<f64>() / nz as f64;
            num = num.max((avg - phi.get(i, j)).abs());
        }
    }
    let den = phi.max_abs();
    let field = if den > 0.0 { num / den } else { num };
    let m3 = result3d.curl_mag.max_abs();
    let m2 = phi
        .cell_gradient_magnitude()
        .into_iter()
        .fold(0.0, f64::max);
    let mag = if m2 > 0.0 { (m3 - m2).abs() / m2 } else { m3 };
    Ok(field.max(mag))
}
