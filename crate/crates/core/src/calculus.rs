//! Discrete curl, divergence and gradient on the staggered grid.
//!
//! With `φ = 0` on boundary nodes and `u` tangentially constrained the
//! operators satisfy `curl ∘ gradient = 0` and `div ∘ curl = 0` exactly, and
//! `curl_adjoint` is the transpose of `curl` for the measure-weighted inner
//! products of [`EdgeField`] and [`FaceField`].

use crate::error::Result;
use crate::grid::{Array3, Axis, BoxDomain, CellField, EdgeField, FaceField, NodeField};
use crate::par;

/// Circulation per unit area around every face.
pub fn curl(u: &EdgeField, g: &BoxDomain) -> Result<FaceField> {
    u.check(g)?;
    Ok(curl_unchecked(u, g))
}

pub(crate) fn curl_unchecked(u: &EdgeField, g: &BoxDomain) -> FaceField {
    let [hx, hy, hz] = g.spacing();
    let (ux, uy, uz) = (&u.x, &u.y, &u.z);
    let mut w = FaceField::zeros(g);

    let e = g.face_extent(Axis::X);
    par::for_each_slab(w.x.data_mut(), e.slab(), |k, s| {
        for j in 0..e.ny {
            for i in 0..e.nx {
                s[i + e.nx * j] = (uz.get(i, j + 1, k) - uz.get(i, j, k)) / hy
                    - (uy.get(i, j, k + 1) - uy.get(i, j, k)) / hz;
            }
        }
    });
    let e = g.face_extent(Axis::Y);
    par::for_each_slab(w.y.data_mut(), e.slab(), |k, s| {
        for j in 0..e.ny {
            for i in 0..e.nx {
                s[i + e.nx * j] = (ux.get(i, j, k + 1) - ux.get(i, j, k)) / hz
                    - (uz.get(i + 1, j, k) - uz.get(i, j, k)) / hx;
            }
        }
    });
    let e = g.face_extent(Axis::Z);
    par::for_each_slab(w.z.data_mut(), e.slab(), |k, s| {
        for j in 0..e.ny {
            for i in 0..e.nx {
                s[i + e.nx * j] = (uy.get(i + 1, j, k) - uy.get(i, j, k)) / hx
                    - (ux.get(i, j + 1, k) - ux.get(i, j, k)) / hy;
            }
        }
    });
    w
}

/// Transpose of [`curl`] with respect to the weighted inner products.
/// Boundary-edge rows are zero, so the output is tangentially constrained.
pub fn curl_adjoint(w: &FaceField, g: &BoxDomain) -> Result<EdgeField> {
    w.check(g)?;
    Ok(curl_adjoint_unchecked(w, g))
}

pub(crate) fn curl_adjoint_unchecked(w: &FaceField, g: &BoxDomain) -> EdgeField {
    let [hx, hy, hz] = g.spacing();
    let (wx, wy, wz) = (&w.x, &w.y, &w.z);
    let mut u = EdgeField::zeros(g);

    // Interior edges meet only faces of full volume share, so the weights
    // cancel and the adjoint reduces to the transposed stencil.
    let e = g.edge_extent(Axis::X);
    par::for_each_slab(u.x.data_mut(), e.slab(), |k, s| {
        if k == 0 || k + 1 == e.nz {
            return;
        }
        for j in 1..e.ny - 1 {
            for i in 0..e.nx {
                s[i + e.nx * j] = (wy.get(i, j, k - 1) - wy.get(i, j, k)) / hz
                    + (wz.get(i, j, k) - wz.get(i, j - 1, k)) / hy;
            }
        }
    });
    let e = g.edge_extent(Axis::Y);
    par::for_each_slab(u.y.data_mut(), e.slab(), |k, s| {
        if k == 0 || k + 1 == e.nz {
            return;
        }
        for j in 0..e.ny {
            for i in 1..e.nx - 1 {
                s[i + e.nx * j] = (wx.get(i, j, k) - wx.get(i, j, k - 1)) / hz
                    + (wz.get(i - 1, j, k) - wz.get(i, j, k)) / hx;
            }
        }
    });
    let e = g.edge_extent(Axis::Z);
    par::for_each_slab(u.z.data_mut(), e.slab(), |k, s| {
        for j in 1..e.ny - 1 {
            for i in 1..e.nx - 1 {
                s[i + e.nx * j] = (wx.get(i, j - 1, k) - wx.get(i, j, k)) / hy
                    + (wy.get(i, j, k) - wy.get(i - 1, j, k)) / hx;
            }
        }
    });
    u
}

/// Net outward flux per unit volume at every node. Edges missing at the
/// boundary contribute nothing; only interior nodes carry the constraint.
pub fn divergence(u: &EdgeField, g: &BoxDomain) -> Result<NodeField> {
    u.check(g)?;
    Ok(divergence_unchecked(u, g))
}

pub(crate) fn divergence_unchecked(u: &EdgeField, g: &BoxDomain) -> NodeField {
    let [hx, hy, hz] = g.spacing();
    let (ux, uy, uz) = (&u.x, &u.y, &u.z);
    let mut d = NodeField::zeros(g);
    let e = g.node_extent();
    par::for_each_slab(d.values.data_mut(), e.slab(), |k, s| {
        for j in 0..e.ny {
            for i in 0..e.nx {
                let mut v = 0.0;
                if i + 1 < e.nx {
                    v += ux.get(i, j, k) / hx;
                }
                if i > 0 {
                    v -= ux.get(i - 1, j, k) / hx;
                }
                if j + 1 < e.ny {
                    v += uy.get(i, j, k) / hy;
                }
                if j > 0 {
                    v -= uy.get(i, j - 1, k) / hy;
                }
                if k + 1 < e.nz {
                    v += uz.get(i, j, k) / hz;
                }
                if k > 0 {
                    v -= uz.get(i, j, k - 1) / hz;
                }
                s[i + e.nx * j] = v;
            }
        }
    });
    d
}

/// Largest |divergence| over interior nodes.
pub fn interior_divergence_max(u: &EdgeField, g: &BoxDomain) -> Result<f64> {
    Ok(divergence(u, g)?.interior_max_abs())
}

/// Edge differences of a node potential.
pub fn gradient(phi: &NodeField, g: &BoxDomain) -> Result<EdgeField> {
    phi.check(g)?;
    Ok(gradient_unchecked(phi, g))
}

pub(crate) fn gradient_unchecked(phi: &NodeField, g: &BoxDomain) -> EdgeField {
    let [hx, hy, hz] = g.spacing();
    let p = &phi.values;
    let mut u = EdgeField::zeros(g);
    let e = g.edge_extent(Axis::X);
    par::for_each_slab(u.x.data_mut(), e.slab(), |k, s| {
        for j in 0..e.ny {
            for i in 0..e.nx {
                s[i + e.nx * j] = (p.get(i + 1, j, k) - p.get(i, j, k)) / hx;
            }
        }
    });
    let e = g.edge_extent(Axis::Y);
    par::for_each_slab(u.y.data_mut(), e.slab(), |k, s| {
        for j in 0..e.ny {
            for i in 0..e.nx {
                s[i + e.nx * j] = (p.get(i, j + 1, k) - p.get(i, j, k)) / hy;
            }
        }
    });
    let e = g.edge_extent(Axis::Z);
    par::for_each_slab(u.z.data_mut(), e.slab(), |k, s| {
        for j in 0..e.ny {
            for i in 0..e.nx {
                s[i + e.nx * j] = (p.get(i, j, k + 1) - p.get(i, j, k)) / hz;
            }
        }
    });
    u
}

/// Squared cell magnitude of a face field: per component, the mean of the
/// squares on the two faces bounding the cell, summed over components.
pub(crate) fn cell_magnitude_sq(w: &FaceField, g: &BoxDomain) -> Array3 {
    let e = g.cell_extent();
    let (wx, wy, wz) = (&w.x, &w.y, &w.z);
    let mut out = Array3::zeros(e);
    par::for_each_slab(out.data_mut(), e.slab(), |k, s| {
        for j in 0..e.ny {
            for i in 0..e.nx {
                let (a, b) = (wx.get(i, j, k), wx.get(i + 1, j, k));
                let (c, d) = (wy.get(i, j, k), wy.get(i, j + 1, k));
                let (f, h) = (wz.get(i, j, k), wz.get(i, j, k + 1));
                s[i + e.nx * j] = 0.5 * (a * a + b * b + c * c + d * d + f * f + h * h);
            }
        }
    });
    out
}

/// |ω| at cell centres.
pub fn cell_magnitude(w: &FaceField, g: &BoxDomain) -> Result<CellField> {
    w.check(g)?;
    let mut sq = cell_magnitude_sq(w, g);
    par::update(sq.data_mut(), |_, v| v.sqrt());
    Ok(CellField { values: sq })
}

/// |u| at cell centres for an edge field: per component, the mean of the
/// squares on the four cell edges parallel to it, summed, then the root.
pub fn edge_cell_magnitude(u: &EdgeField, g: &BoxDomain) -> Result<CellField> {
    u.check(g)?;
    let e = g.cell_extent();
    let (ux, uy, uz) = (&u.x, &u.y, &u.z);
    let mut out = Array3::zeros(e);
    let sq = |v: f64| v * v;
    par::for_each_slab(out.data_mut(), e.slab(), |k, s| {
        for j in 0..e.ny {
            for i in 0..e.nx {
                let x = sq(ux.get(i, j, k))
                    + sq(ux.get(i, j + 1, k))
                    + sq(ux.get(i, j, k + 1))
                    + sq(ux.get(i, j + 1, k + 1));
                let y = sq(uy.get(i, j, k))
                    + sq(uy.get(i + 1, j, k))
                    + sq(uy.get(i, j, k + 1))
                    + sq(uy.get(i + 1, j, k + 1));
                let z = sq(uz.get(i, j, k))
                    + sq(uz.get(i + 1, j, k))
                    + sq(uz.get(i, j + 1, k))
                    + sq(uz.get(i + 1, j + 1, k));
                s[i + e.nx * j] = (0.25 * (x + y + z)).sqrt();
            }
        }
    });
    Ok(CellField { values: out })
}

/// 7-point Laplacian of a node field; boundary nodes are left at zero.
pub fn laplacian(phi: &NodeField, g: &BoxDomain) -> Result<NodeField> {
    phi.check(g)?;
    Ok(laplacian_unchecked(phi, g))
}

pub(crate) fn laplacian_unchecked(phi: &NodeField, g: &BoxDomain) -> NodeField {
    let [hx, hy, hz] = g.spacing();
    let (cx, cy, cz) = (1.0 / (hx * hx), 1.0 / (hy * hy), 1.0 / (hz * hz));
    let p = &phi.values;
    let e = g.node_extent();
    let mut out = NodeField::zeros(g);
    par::for_each_slab(out.values.data_mut(), e.slab(), |k, s| {
        if k == 0 || k + 1 == e.nz {
            return;
        }
        for j in 1..e.ny - 1 {
            for i in 1..e.nx - 1 {
                let c = p.get(i, j, k);
                s[i + e.nx * j] = cx * (p.get(i + 1, j, k) - 2.0 * c + p.get(i - 1, j, k))
                    + cy * (p.get(i, j + 1, k) - 2.0 * c + p.get(i, j - 1, k))
                    + cz * (p.get(i, j, k + 1) - 2.0 * c + p.get(i, j, k - 1));
            }
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::AXES;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_edges(g: &BoxDomain, rng: &mut ChaCha8Rng) -> EdgeField {
        let mut u = EdgeField::zeros(g);
        for a in AXES {
            u.comp_mut(a)
                .data_mut()
                .iter_mut()
                .for_each(|v| *v = rng.gen_range(-1.0..1.0));
        }
        u
    }

    fn random_nodes(g: &BoxDomain, rng: &mut ChaCha8Rng, zero_boundary: bool) -> NodeField {
        let e = g.node_extent();
        NodeField {
            values: Array3::from_fn(e, |i, j, k| {
                let b =
                    i == 0 || j == 0 || k == 0 || i + 1 == e.nx || j + 1 == e.ny || k + 1 == e.nz;
                let v = rng.gen_range(-1.0..1.0);
                if zero_boundary && b {
                    0.0
                } else {
                    v
                }
            }),
        }
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        let g = BoxDomain::new([1.0, 0.7, 1.3], [5, 6, 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = random_nodes(&g, &mut rng, false);
        let w = curl(&gradient(&phi, &g).unwrap(), &g).unwrap();
        assert!(w.max_abs() < 1e-12, "{}", w.max_abs());
    }

    #[test]
    fn constant_field_has_no_interior_curl() {
        let g = BoxDomain::unit_cube(6).unwrap();
        let mut u = EdgeField::sample(&g, |_| [0.3, -1.2, 2.5]);
        u.apply_constraint();
        let w = curl(&u, &g).unwrap();
        // interior faces: every bounding edge is interior and carries the constant
        let e = g.face_extent(Axis::X);
        for k in 1..e.nz - 1 {
            for j in 1..e.ny - 1 {
                for i in 1..e.nx - 1 {
                    assert!(w.x.get(i, j, k).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn manufactured_curl_second_order() {
        let err = |n: usize| {
            let g = BoxDomain::unit_cube(n).unwrap();
            let u = EdgeField::sample(&g, |p| [0.0, 0.0, (PI * p[0]).sin() * (PI * p[1]).sin()]);
            let w = curl(&u, &g).unwrap();
            let exact = FaceField::sample(&g, |p| {
                [
                    PI * (PI * p[0]).sin() * (PI * p[1]).cos(),
                    -PI * (PI * p[0]).cos() * (PI * p[1]).sin(),
                    0.0,
                ]
            });
            let mut d = w.clone();
            d.axpy(-1.0, &exact);
            d.max_abs()
        };
        let (e16, e32) = (err(16), err(32));
        assert!(e32 < 0.02, "{e32}");
        let order = (e16 / e32).log2();
        assert!(order > 1.8, "order {order}");
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        let g = BoxDomain::new([1.0, 2.0, 1.5], [4, 5, 6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let phi = random_nodes(&g, &mut rng, false);
        let d = divergence(&gradient(&phi, &g).unwrap(), &g).unwrap();
        let l = laplacian(&phi, &g).unwrap();
        let e = g.node_extent();
        for k in 1..e.nz - 1 {
            for j in 1..e.ny - 1 {
                for i in 1..e.nx - 1 {
                    let (a, b) = (d.values.get(i, j, k), l.values.get(i, j, k));
                    assert!((a - b).abs() < 1e-11 * (1.0 + b.abs()));
                }
            }
        }
    }

    #[test]
    fn linear_field_is_divergence_free() {
        let g = BoxDomain::unit_cube(7).unwrap();
        let u = EdgeField::sample(&g, |p| [p[0], -p[1], 0.0]);
        assert!(interior_divergence_max(&u, &g).unwrap() < 1e-12);
        assert_eq!(
            divergence(&EdgeField::zeros(&g), &g).unwrap().max_abs(),
            0.0
        );
    }

    #[test]
    fn gradient_examples() {
        let g = BoxDomain::unit_cube(4).unwrap();
        let c = NodeField::sample(&g, |_| 3.5);
        assert_eq!(gradient(&c, &g).unwrap().max_abs(), 0.0);
        let x = NodeField::sample(&g, |p| p[0]);
        let u = gradient(&x, &g).unwrap();
        assert!(u.x.data().iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(u.y.max_abs(), 0.0);
        assert_eq!(u.z.max_abs(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let phi = random_nodes(&g, &mut rng, true);
        let gp = gradient(&phi, &g).unwrap();
        assert!(gp.is_constrained());
    }

    #[test]
    fn adjoint_identity() {
        let g = BoxDomain::new([1.0, 0.5, 2.0], [4, 5, 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let mut u = random_edges(&g, &mut rng);
            u.apply_constraint();
            let mut w = FaceField::zeros(&g);
            for a in AXES {
                w.comp_mut(a)
                    .data_mut()
                    .iter_mut()
                    .for_each(|v| *v = rng.gen_range(-1.0..1.0));
            }
            let lhs = curl(&u, &g).unwrap().inner(&w, &g).unwrap();
            let rhs = u.inner(&curl_adjoint(&w, &g).unwrap(), &g).unwrap();
            let scale = u.norm(&g) * w.norm(&g);
            assert!((lhs - rhs).abs() <= 1e-12 * scale, "{lhs} vs {rhs}");
        }
        assert_eq!(
            curl_adjoint(&FaceField::zeros(&g), &g).unwrap().max_abs(),
            0.0
        );
    }

    #[test]
    fn adjoint_output_is_constrained() {
        let g = BoxDomain::unit_cube(5).unwrap();
        let w = FaceField::sample(&g, |p| [p[1], p[2] * p[0], 1.0 + p[0]]);
        assert!(curl_adjoint(&w, &g).unwrap().is_constrained());
    }

    #[test]
    fn cell_magnitude_examples() {
        let g = BoxDomain::unit_cube(5).unwrap();
        assert_eq!(
            cell_magnitude(&FaceField::zeros(&g), &g).unwrap().max_abs(),
            0.0
        );
        let w = FaceField::sample(&g, |_| [3.0, 0.0, 0.0]);
        let m = cell_magnitude(&w, &g).unwrap();
        assert!(m.values.data().iter().all(|v| (v - 3.0).abs() < 1e-14));

        let g = BoxDomain::unit_cube(32).unwrap();
        let u = EdgeField::sample(&g, |p| [0.0, 0.0, (PI * p[0]).sin() * (PI * p[1]).sin()]);
        let m = cell_magnitude(&curl(&u, &g).unwrap(), &g).unwrap();
        assert!((m.max_abs() - PI).abs() < 0.02 * PI, "{}", m.max_abs());
    }

    #[test]
    fn edge_cell_magnitude_of_constant() {
        let g = BoxDomain::unit_cube(3).unwrap();
        let u = EdgeField::sample(&g, |_| [3.0, 0.0, 4.0]);
        let m = edge_cell_magnitude(&u, &g).unwrap();
        assert!(m.values.data().iter().all(|v| (v - 5.0).abs() < 1e-14));
    }

    #[test]
    fn shape_errors() {
        let g = BoxDomain::unit_cube(4).unwrap();
        let h = BoxDomain::unit_cube(3).unwrap();
        assert!(curl(&EdgeField::zeros(&h), &g).is_err());
        assert!(curl_adjoint(&FaceField::zeros(&h), &g).is_err());
        assert!(divergence(&EdgeField::zeros(&h), &g).is_err());
        assert!(gradient(&NodeField::zeros(&h), &g).is_err());
        assert!(cell_magnitude(&FaceField::zeros(&h), &g).is_err());
    }
}
