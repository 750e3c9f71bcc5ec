//! Box domains and staggered degree-of-freedom containers.
//!
//! Layout follows the usual Yee arrangement: vector fields live on cell edges
//! (component along the edge), their curls on faces (component normal to the
//! face), scalar potentials on nodes and magnitudes at cell centres. Every
//! array is stored x-fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

pub const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// Array dimensions, x-fastest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Extent {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Extent {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Extent { nx, ny, nz }
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline(always)]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    #[inline(always)]
    pub fn unravel(&self, n: usize) -> (usize, usize, usize) {
        let i = n % self.nx;
        let r = n / self.nx;
        (i, r % self.ny, r / self.ny)
    }

    /// Size of one constant-z slab.
    pub fn slab(&self) -> usize {
        self.nx * self.ny
    }
}

/// Dense 3D array of reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Array3 {
    extent: Extent,
    data: Vec<f64>,
}

impl Array3 {
    pub fn zeros(extent: Extent) -> Self {
        Array3 {
            extent,
            data: vec![0.0; extent.len()],
        }
    }

    pub fn from_vec(extent: Extent, data: Vec<f64>) -> Result<Self> {
        if data.len() != extent.len() {
            return Err(Error::shape(format!(
                "array of length {} does not fit extent {:?}",
                data.len(),
                extent
            )));
        }
        Ok(Array3 { extent, data })
    }

    pub fn from_fn(extent: Extent, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(extent.len());
        for k in 0..extent.nz {
            for j in 0..extent.ny {
                for i in 0..extent.nx {
                    data.push(f(i, j, k));
                }
            }
        }
        Array3 { extent, data }
    }

    pub fn extent(&self) -> Extent {
        self.extent
    }

    #[inline(always)]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.extent.idx(i, j, k)]
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let n = self.extent.idx(i, j, k);
        self.data[n] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn max_abs(&self) -> f64 {
        par::max_by(self.data.len(), |n| self.data[n].abs())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn scale(&mut self, s: f64) {
        par::update(&mut self.data, |_, v| v * s);
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &Array3) {
        debug_assert_eq!(self.extent, other.extent);
        let o = &other.data;
        par::update(&mut self.data, |n, v| v + a * o[n]);
    }

    fn ensure(&self, extent: Extent, what: &str) -> Result<()> {
        if self.extent != extent || self.data.len() != extent.len() {
            return Err(Error::shape(format!(
                "{what}: expected {:?}, found {:?}",
                extent, self.extent
            )));
        }
        Ok(())
    }
}

/// Axis-aligned box `[0, Lx] x [0, Ly] x [0, Lz]` split into `Nx x Ny x Nz` cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lengths: [f64; 3],
    cells: [usize; 3],
}

impl BoxDomain {
    pub fn new(lengths: [f64; 3], cells: [usize; 3]) -> Result<Self> {
        if lengths.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::invalid(format!(
                "box lengths must be positive and finite, got {lengths:?}"
            )));
        }
        if cells.iter().any(|&n| n < 2) {
            return Err(Error::invalid(format!(
                "every axis needs at least 2 cells, got {cells:?}"
            )));
        }
        Ok(BoxDomain { lengths, cells })
    }

    pub fn unit_cube(n: usize) -> Result<Self> {
        Self::new([1.0; 3], [n; 3])
    }

    pub fn lengths(&self) -> [f64; 3] {
        self.lengths
    }

    pub fn cells(&self) -> [usize; 3] {
        self.cells
    }

    pub fn spacing(&self) -> [f64; 3] {
        [
            self.lengths[0] / self.cells[0] as f64,
            self.lengths[1] / self.cells[1] as f64,
            self.lengths[2] / self.cells[2] as f64,
        ]
    }

    pub fn min_spacing(&self) -> f64 {
        let h = self.spacing();
        h[0].min(h[1]).min(h[2])
    }

    pub fn cell_volume(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1] * h[2]
    }

    /// |Ω|
    pub fn measure(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn node_extent(&self) -> Extent {
        let [nx, ny, nz] = self.cells;
        Extent::new(nx + 1, ny + 1, nz + 1)
    }

    pub fn cell_extent(&self) -> Extent {
        let [nx, ny, nz] = self.cells;
        Extent::new(nx, ny, nz)
    }

    /// Edges parallel to `axis`: cell-count along it, node-count across.
    pub fn edge_extent(&self, axis: Axis) -> Extent {
        let mut d = self.node_extent().dims();
        d[axis.index()] -= 1;
        Extent::new(d[0], d[1], d[2])
    }

    /// Faces normal to `axis`: node-count along it, cell-count across.
    pub fn face_extent(&self, axis: Axis) -> Extent {
        let mut d = self.cells;
        d[axis.index()] += 1;
        Extent::new(d[0], d[1], d[2])
    }

    /// Physical position of grid index `(i, j, k)` with per-axis offsets
    /// (0 for node-aligned, 0.5 for cell-centred).
    pub fn position(&self, idx: [usize; 3], offset: [f64; 3]) -> [f64; 3] {
        let h = self.spacing();
        [
            (idx[0] as f64 + offset[0]) * h[0],
            (idx[1] as f64 + offset[1]) * h[1],
            (idx[2] as f64 + offset[2]) * h[2],
        ]
    }
}

/// Which axes of a staggered location are node-aligned.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Staggering {
    node_aligned: [bool; 3],
}

impl Staggering {
    pub(crate) fn edge(axis: Axis) -> Self {
        let mut node_aligned = [true; 3];
        node_aligned[axis.index()] = false;
        Staggering { node_aligned }
    }

    pub(crate) fn face(axis: Axis) -> Self {
        let mut node_aligned = [false; 3];
        node_aligned[axis.index()] = true;
        Staggering { node_aligned }
    }

    pub(crate) fn node() -> Self {
        Staggering {
            node_aligned: [true; 3],
        }
    }

    pub(crate) fn cell() -> Self {
        Staggering {
            node_aligned: [false; 3],
        }
    }

    pub(crate) fn offsets(&self) -> [f64; 3] {
        self.node_aligned.map(|n| if n { 0.0 } else { 0.5 })
    }

    /// Volume share of a degree of freedom: the cell volume, halved once per
    /// node-aligned axis on which it sits at the domain boundary.
    #[inline]
    pub(crate) fn weight(&self, volume: f64, e: &Extent, i: usize, j: usize, k: usize) -> f64 {
        let idx = [i, j, k];
        let dims = e.dims();
        let mut w = volume;
        for a in 0..3 {
            if self.node_aligned[a] && (idx[a] == 0 || idx[a] + 1 == dims[a]) {
                w *= 0.5;
            }
        }
        w
    }

    /// True when the location lies in a boundary plane normal to a node-aligned axis.
    #[inline]
    pub(crate) fn on_boundary(&self, e: &Extent, i: usize, j: usize, k: usize) -> bool {
        let idx = [i, j, k];
        let dims = e.dims();
        (0..3).any(|a| self.node_aligned[a] && (idx[a] == 0 || idx[a] + 1 == dims[a]))
    }
}

pub(crate) fn weighted_inner(a: &Array3, b: &Array3, s: Staggering, volume: f64) -> f64 {
    let e = a.extent();
    let (x, y) = (a.data(), b.data());
    par::sum_by(e.len(), |n| {
        let (i, j, k) = e.unravel(n);
        s.weight(volume, &e, i, j, k) * x[n] * y[n]
    })
}

pub(crate) fn weighted_sum(a: &Array3, s: Staggering, volume: f64) -> f64 {
    let e = a.extent();
    let x = a.data();
    par::sum_by(e.len(), |n| {
        let (i, j, k) = e.unravel(n);
        s.weight(volume, &e, i, j, k) * x[n]
    })
}

macro_rules! vector_field {
    ($name:ident, $extent:ident, $stagger:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            pub x: Array3,
            pub y: Array3,
            pub z: Array3,
        }

        impl $name {
            pub fn zeros(g: &BoxDomain) -> Self {
                $name {
                    x: Array3::zeros(g.$extent(Axis::X)),
                    y: Array3::zeros(g.$extent(Axis::Y)),
                    z: Array3::zeros(g.$extent(Axis::Z)),
                }
            }

            /// Build from per-component arrays, checking shapes against `g`.
            pub fn from_components(g: &BoxDomain, x: Array3, y: Array3, z: Array3) -> Result<Self> {
                let f = $name { x, y, z };
                f.check(g)?;
                Ok(f)
            }

            /// Sample a vector function at the staggered locations, keeping
            /// the component that belongs to each location.
            pub fn sample(g: &BoxDomain, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
                let comp = |axis: Axis| {
                    let off = Staggering::$stagger(axis).offsets();
                    Array3::from_fn(g.$extent(axis), |i, j, k| {
                        f(g.position([i, j, k], off))[axis.index()]
                    })
                };
                $name {
                    x: comp(Axis::X),
                    y: comp(Axis::Y),
                    z: comp(Axis::Z),
                }
            }

            pub fn comp(&self, axis: Axis) -> &Array3 {
                match axis {
                    Axis::X => &self.x,
                    Axis::Y => &self.y,
                    Axis::Z => &self.z,
                }
            }

            pub fn comp_mut(&mut self, axis: Axis) -> &mut Array3 {
                match axis {
                    Axis::X => &mut self.x,
                    Axis::Y => &mut self.y,
                    Axis::Z => &mut self.z,
                }
            }

            pub fn comps(&self) -> [&Array3; 3] {
                [&self.x, &self.y, &self.z]
            }

            pub fn check(&self, g: &BoxDomain) -> Result<()> {
                for axis in AXES {
                    self.comp(axis)
                        .ensure(g.$extent(axis), concat!(stringify!($name), " component"))?;
                }
                Ok(())
            }

            pub fn max_abs(&self) -> f64 {
                self.x.max_abs().max(self.y.max_abs()).max(self.z.max_abs())
            }

            pub fn is_finite(&self) -> bool {
                self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
            }

            pub fn scale(&mut self, s: f64) {
                self.x.scale(s);
                self.y.scale(s);
                self.z.scale(s);
            }

            pub fn scaled(&self, s: f64) -> Self {
                let mut out = self.clone();
                out.scale(s);
                out
            }

            /// `self += a * other`
            pub fn axpy(&mut self, a: f64, other: &Self) {
                self.x.axpy(a, &other.x);
                self.y.axpy(a, &other.y);
                self.z.axpy(a, &other.z);
            }

            /// Measure-weighted inner product.
            pub fn inner(&self, other: &Self, g: &BoxDomain) -> Result<f64> {
                self.check(g)?;
                other.check(g)?;
                Ok(self.inner_unchecked(other, g))
            }

            pub(crate) fn inner_unchecked(&self, other: &Self, g: &BoxDomain) -> f64 {
                let v = g.cell_volume();
                AXES.iter()
                    .map(|&a| {
                        weighted_inner(self.comp(a), other.comp(a), Staggering::$stagger(a), v)
                    })
                    .sum()
            }

            /// Measure-weighted L2 norm.
            pub fn norm(&self, g: &BoxDomain) -> f64 {
                self.inner_unchecked(self, g).sqrt()
            }

            /// Componentwise integral.
            pub fn integrate(&self, g: &BoxDomain) -> Result<[f64; 3]> {
                self.check(g)?;
                let v = g.cell_volume();
                Ok(AXES.map(|a| weighted_sum(self.comp(a), Staggering::$stagger(a), v)))
            }
        }
    };
}

vector_field!(
    EdgeField,
    edge_extent,
    edge,
    "Edge-based vector field; each value is the component along its edge."
);
vector_field!(
    FaceField,
    face_extent,
    face,
    "Face-based vector field; each value is the component normal to its face."
);

impl EdgeField {
    /// Zero every edge lying in the boundary, which realises `u × ν = 0`.
    pub fn apply_constraint(&mut self) {
        for axis in AXES {
            let s = Staggering::edge(axis);
            let a = self.comp_mut(axis);
            let e = a.extent();
            par::update(a.data_mut(), |n, v| {
                let (i, j, k) = e.unravel(n);
                if s.on_boundary(&e, i, j, k) {
                    0.0
                } else {
                    v
                }
            });
        }
    }

    pub fn is_constrained(&self) -> bool {
        AXES.iter().all(|&axis| {
            let s = Staggering::edge(axis);
            let a = self.comp(axis);
            let e = a.extent();
            a.data().iter().enumerate().all(|(n, &v)| {
                let (i, j, k) = e.unravel(n);
                v == 0.0 || !s.on_boundary(&e, i, j, k)
            })
        })
    }

    /// Largest magnitude on boundary edges (0 for a constrained field).
    pub fn boundary_max_abs(&self) -> f64 {
        AXES.iter()
            .map(|&axis| {
                let s = Staggering::edge(axis);
                let a = self.comp(axis);
                let e = a.extent();
                a.data()
                    .iter()
                    .enumerate()
                    .filter(|(n, _)| {
                        let (i, j, k) = e.unravel(*n);
                        s.on_boundary(&e, i, j, k)
                    })
                    .fold(0.0_f64, |m, (_, v)| m.max(v.abs()))
            })
            .fold(0.0, f64::max)
    }
}

macro_rules! scalar_field {
    ($name:ident, $extent:ident, $stagger:ident, $doc:literal) => {
        #[doc = $doc]
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            pub values: Array3,
        }

        impl $name {
            pub fn zeros(g: &BoxDomain) -> Self {
                $name {
                    values: Array3::zeros(g.$extent()),
                }
            }

            pub fn from_array(g: &BoxDomain, values: Array3) -> Result<Self> {
                values.ensure(g.$extent(), stringify!($name))?;
                Ok($name { values })
            }

            pub fn sample(g: &BoxDomain, f: impl Fn([f64; 3]) -> f64) -> Self {
                let off = Staggering::$stagger().offsets();
                $name {
                    values: Array3::from_fn(g.$extent(), |i, j, k| f(g.position([i, j, k], off))),
                }
            }

            pub fn check(&self, g: &BoxDomain) -> Result<()> {
                self.values.ensure(g.$extent(), stringify!($name))
            }

            pub fn max_abs(&self) -> f64 {
                self.values.max_abs()
            }

            pub fn inner(&self, other: &Self, g: &BoxDomain) -> Result<f64> {
                self.check(g)?;
                other.check(g)?;
                Ok(weighted_inner(
                    &self.values,
                    &other.values,
                    Staggering::$stagger(),
                    g.cell_volume(),
                ))
            }

            pub fn integrate(&self, g: &BoxDomain) -> Result<f64> {
                self.check(g)?;
                Ok(weighted_sum(
                    &self.values,
                    Staggering::$stagger(),
                    g.cell_volume(),
                ))
            }

            pub fn norm(&self, g: &BoxDomain) -> f64 {
                weighted_inner(
                    &self.values,
                    &self.values,
                    Staggering::$stagger(),
                    g.cell_volume(),
                )
                .sqrt()
            }
        }
    };
}

scalar_field!(NodeField, node_extent, node, "Scalar field on grid nodes.");
scalar_field!(
    CellField,
    cell_extent,
    cell,
    "Scalar field at cell centres."
);

impl NodeField {
    /// True if every interior-adjacent boundary node value is zero.
    pub fn boundary_max_abs(&self) -> f64 {
        let e = self.values.extent();
        let s = Staggering::node();
        self.values
            .data()
            .iter()
            .enumerate()
            .filter(|(n, _)| {
                let (i, j, k) = e.unravel(*n);
                s.on_boundary(&e, i, j, k)
            })
            .fold(0.0_f64, |m, (_, v)| m.max(v.abs()))
    }

    /// Largest magnitude over interior nodes.
    pub fn interior_max_abs(&self) -> f64 {
        let e = self.values.extent();
        let s = Staggering::node();
        let d = self.values.data();
        par::max_by(e.len(), |n| {
            let (i, j, k) = e.unravel(n);
            if s.on_boundary(&e, i, j, k) {
                0.0
            } else {
                d[n].abs()
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_validation() {
        assert!(BoxDomain::new([1.0, 1.0, 0.0], [4, 4, 4]).is_err());
        assert!(BoxDomain::new([1.0, -1.0, 1.0], [4, 4, 4]).is_err());
        assert!(BoxDomain::new([1.0; 3], [4, 1, 4]).is_err());
        let g = BoxDomain::new([2.0, 1.0, 0.5], [4, 2, 5]).unwrap();
        assert_eq!(g.measure(), 1.0);
        assert!((g.cell_volume() - 0.5 * 0.5 * 0.1).abs() < 1e-15);
    }

    #[test]
    fn extents() {
        let g = BoxDomain::new([1.0; 3], [3, 4, 5]).unwrap();
        assert_eq!(g.edge_extent(Axis::X), Extent::new(3, 5, 6));
        assert_eq!(g.edge_extent(Axis::Y), Extent::new(4, 4, 6));
        assert_eq!(g.edge_extent(Axis::Z), Extent::new(4, 5, 5));
        assert_eq!(g.face_extent(Axis::X), Extent::new(4, 4, 5));
        assert_eq!(g.face_extent(Axis::Z), Extent::new(3, 4, 6));
    }

    #[test]
    fn constant_fields_integrate_to_measure() {
        let g = BoxDomain::new([1.0, 2.0, 3.0], [3, 4, 5]).unwrap();
        let one = |_: [f64; 3]| [1.0; 3];
        for v in EdgeField::sample(&g, one).integrate(&g).unwrap() {
            assert!((v - 6.0).abs() < 1e-12);
        }
        for v in FaceField::sample(&g, one).integrate(&g).unwrap() {
            assert!((v - 6.0).abs() < 1e-12);
        }
        let c = CellField::sample(&g, |_| 1.0).integrate(&g).unwrap();
        let n = NodeField::sample(&g, |_| 1.0).integrate(&g).unwrap();
        assert!((c - 6.0).abs() < 1e-12);
        assert!((n - 6.0).abs() < 1e-12);
    }

    #[test]
    fn constraint_zeroes_boundary_edges_only() {
        let g = BoxDomain::unit_cube(4).unwrap();
        let mut u = EdgeField::sample(&g, |_| [1.0, 2.0, 3.0]);
        assert!(!u.is_constrained());
        u.apply_constraint();
        assert!(u.is_constrained());
        assert_eq!(u.boundary_max_abs(), 0.0);
        // x-edge at (1, 2, 2) is interior; (1, 0, 2) lies in the y = 0 plane.
        assert_eq!(u.x.get(1, 2, 2), 1.0);
        assert_eq!(u.x.get(1, 0, 2), 0.0);
        // z-edges ending on z = 0 are normal to that face and stay free.
        assert_eq!(u.z.get(2, 2, 0), 3.0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let g = BoxDomain::unit_cube(4).unwrap();
        let h = BoxDomain::unit_cube(5).unwrap();
        let u = EdgeField::zeros(&g);
        assert!(matches!(u.check(&h), Err(Error::ShapeMismatch(_))));
        assert!(u.inner(&EdgeField::zeros(&h), &g).is_err());
    }
}
