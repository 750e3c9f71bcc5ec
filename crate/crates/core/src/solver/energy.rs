//! Discrete p-curl energy
//!
//! `J(u) = Σ_cells V/p ((|ω|² + ε²)^{p/2} − ε^p) − ⟨f, u⟩`, `ω = curl u`,
//! with `|ω|` the cell magnitude from [`crate::calculus::cell_magnitude`].

use crate::calculus::{cell_magnitude_sq, curl_adjoint_unchecked, curl_unchecked};
use crate::error::{Error, Result};
use crate::grid::{Array3, Axis, BoxDomain, EdgeField, FaceField};
use crate::par;

pub(crate) fn check_params(p: f64, eps: f64) -> Result<()> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::invalid(format!("exponent p must be > 1, got {p}")));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::invalid(format!(
            "regularisation eps must be >= 0, got {eps}"
        )));
    }
    Ok(())
}

/// Regularised coefficient `(s + ε²)^{(p−2)/2}` for squared magnitude `s`.
#[inline]
fn coefficient(s: f64, p: f64, eps2: f64) -> f64 {
    let y = s + eps2;
    if y > 0.0 {
        y.powf(0.5 * (p - 2.0))
    } else if p == 2.0 {
        1.0
    } else {
        // every face of such a cell carries zero, so the value is never used
        0.0
    }
}

pub(crate) fn energy_from_curl(w: &FaceField, p: f64, eps: f64, g: &BoxDomain) -> f64 {
    let sq = cell_magnitude_sq(w, g);
    let s = sq.data();
    let eps2 = eps * eps;
    let offset = eps.powf(p);
    let v = g.cell_volume();
    par::sum_by(s.len(), |n| v / p * ((s[n] + eps2).powf(0.5 * p) - offset))
}

/// Value of the discrete functional.
pub fn energy(u: &EdgeField, f: &EdgeField, p: f64, eps: f64, g: &BoxDomain) -> Result<f64> {
    check_params(p, eps)?;
    u.check(g)?;
    f.check(g)?;
    let w = curl_unchecked(u, g);
    Ok(energy_from_curl(&w, p, eps, g) - f.inner_unchecked(u, g))
}

/// `W(u) ⊙ ω`: each face value times the mean coefficient of the cells it bounds.
pub(crate) fn weighted_curl(w: &FaceField, p: f64, eps: f64, g: &BoxDomain) -> FaceField {
    let mut coef = cell_magnitude_sq(w, g);
    let eps2 = eps * eps;
    par::update(coef.data_mut(), |_, s| coefficient(s, p, eps2));
    let c = &coef;
    let ce = g.cell_extent();
    let mut out = FaceField::zeros(g);

    let cell = |i: usize, j: usize, k: usize| c.get(i, j, k);
    // mean over the (one or two) cells adjacent to a face along `axis`
    let mean = |axis: Axis, i: usize, j: usize, k: usize| -> f64 {
        let (idx, n) = match axis {
            Axis::X => (i, ce.nx),
            Axis::Y => (j, ce.ny),
            Axis::Z => (k, ce.nz),
        };
        let lower = |d: usize| match axis {
            Axis::X => cell(d, j, k),
            Axis::Y => cell(i, d, k),
            Axis::Z => cell(i, j, d),
        };
        if idx == 0 {
            lower(0)
        } else if idx == n {
            lower(n - 1)
        } else {
            0.5 * (lower(idx - 1) + lower(idx))
        }
    };

    for axis in [Axis::X, Axis::Y, Axis::Z] {
        let src: &Array3 = w.comp(axis);
        let e = src.extent();
        par::for_each_slab(out.comp_mut(axis).data_mut(), e.slab(), |k, s| {
            for j in 0..e.ny {
                for i in 0..e.nx {
                    let v = src.get(i, j, k);
                    s[i + e.nx * j] = if v == 0.0 {
                        0.0
                    } else {
                        v * mean(axis, i, j, k)
                    };
                }
            }
        });
    }
    out
}

/// Riesz representative of `dJ` in the edge inner product:
/// `curl_adjoint(W(u) ⊙ curl u) − f`.
pub fn energy_gradient(
    u: &EdgeField,
    f: &EdgeField,
    p: f64,
    eps: f64,
    g: &BoxDomain,
) -> Result<EdgeField> {
    check_params(p, eps)?;
    u.check(g)?;
    f.check(g)?;
    let w = curl_unchecked(u, g);
    Ok(gradient_from_curl(&w, f, p, eps, g))
}

pub(crate) fn gradient_from_curl(
    w: &FaceField,
    f: &EdgeField,
    p: f64,
    eps: f64,
    g: &BoxDomain,
) -> EdgeField {
    let mut grad = curl_adjoint_unchecked(&weighted_curl(w, p, eps, g), g);
    grad.axpy(-1.0, f);
    grad
}

/// Energy along `u + α d`, reduced to per-cell quadratics
/// `|ω + α δω|² = a + 2αb + α²c`.
pub(crate) struct LineModel {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    volume: f64,
    p: f64,
    eps2: f64,
    /// ⟨f, d⟩
    load: f64,
}

impl LineModel {
    pub(crate) fn new(
        w: &FaceField,
        dw: &FaceField,
        load: f64,
        p: f64,
        eps: f64,
        g: &BoxDomain,
    ) -> Self {
        let e = g.cell_extent();
        let len = e.len();
        let mut a = vec![0.0; len];
        let mut b = vec![0.0; len];
        let mut c = vec![0.0; len];
        let pairs = |i: usize, j: usize, k: usize| {
            [
                (w.x.get(i, j, k), dw.x.get(i, j, k)),
                (w.x.get(i + 1, j, k), dw.x.get(i + 1, j, k)),
                (w.y.get(i, j, k), dw.y.get(i, j, k)),
                (w.y.get(i, j + 1, k), dw.y.get(i, j + 1, k)),
                (w.z.get(i, j, k), dw.z.get(i, j, k)),
                (w.z.get(i, j, k + 1), dw.z.get(i, j, k + 1)),
            ]
        };
        let fill = |out: &mut Vec<f64>, f: &(dyn Fn(f64, f64) -> f64 + Sync)| {
            par::for_each_slab(out, e.slab(), |k, s| {
                for j in 0..e.ny {
                    for i in 0..e.nx {
                        s[i + e.nx * j] =
                            0.5 * pairs(i, j, k).iter().map(|&(x, y)| f(x, y)).sum::<f64>();
                    }
                }
            });
        };
        fill(&mut a, &|x, _| x * x);
        fill(&mut b, &|x, y| x * y);
        fill(&mut c, &|_, y| y * y);
        LineModel {
            a,
            b,
            c,
            volume: g.cell_volume(),
            p,
            eps2: eps * eps,
            load,
        }
    }

    /// `J(u + α d) − J(u)`, evaluated per cell without cancellation.
    pub(crate) fn delta(&self, alpha: f64) -> f64 {
        let (p, e2) = (self.p, self.eps2);
        let half_p = 0.5 * p;
        let curl_part = par::sum_by(self.a.len(), |n| {
            let y0 = self.a[n] + e2;
            let inc = alpha * (2.0 * self.b[n] + alpha * self.c[n]);
            if inc == 0.0 {
                0.0
            } else if y0 > 0.0 {
                let r = inc / y0;
                if r <= -1.0 {
                    -y0.powf(half_p)
                } else {
                    y0.powf(half_p) * (half_p * r.ln_1p()).exp_m1()
                }
            } else {
                inc.max(0.0).powf(half_p)
            }
        });
        self.volume / p * curl_part - alpha * self.load
    }

    /// First and second derivatives of the energy along the line at `α`.
    pub(crate) fn derivatives(&self, alpha: f64) -> (f64, f64) {
        let (p, e2) = (self.p, self.eps2);
        let n = self.a.len();
        let d1 = par::sum_by(n, |m| {
            let y = (self.a[m] + e2 + alpha * (2.0 * self.b[m] + alpha * self.c[m])).max(0.0);
            let t = self.b[m] + alpha * self.c[m];
            if t == 0.0 {
                0.0
            } else {
                coefficient(y - e2, p, e2) * t
            }
        });
        let d2 = par::sum_by(n, |m| {
            let y = (self.a[m] + e2 + alpha * (2.0 * self.b[m] + alpha * self.c[m])).max(0.0);
            let t = self.b[m] + alpha * self.c[m];
            let mut v = coefficient(y - e2, p, e2) * self.c[m];
            if y > 0.0 && t != 0.0 {
                v += (p - 2.0) * y.powf(0.5 * (p - 4.0)) * t * t;
            }
            v
        });
        (self.volume * d1 - self.load, self.volume * d2)
    }
}
