//! Binary field dumps.
//!
//! A dump is one line of JSON describing the layout followed by the raw
//! little-endian `f64` values of each component in turn (x, y, z), each array
//! stored x-fastest. The header alone is enough to reshape the data with any
//! array library, e.g. in numpy
//! `np.frombuffer(buf[off:], '<f8')[:nx*ny*nz].reshape(nz, ny, nx)`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Array3, BoxDomain, CellField, EdgeField, Extent, FaceField, NodeField, AXES};

pub const FORMAT: &str = "pcurl-field-v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format: String,
    /// `edge`, `face`, `node`, `cell` or `node2d`.
    pub kind: String,
    pub cells: Vec<usize>,
    pub lengths: Vec<f64>,
    pub components: Vec<String>,
    /// Per component, `[nx, ny, nz]` (or `[nx, ny]` in 2D).
    pub shapes: Vec<Vec<usize>>,
    pub order: String,
    pub dtype: String,
}

impl Header {
    fn new(
        kind: &str,
        cells: Vec<usize>,
        lengths: Vec<f64>,
        comps: &[&str],
        shapes: Vec<Vec<usize>>,
    ) -> Self {
        Header {
            format: FORMAT.into(),
            kind: kind.into(),
            cells,
            lengths,
            components: comps.iter().map(|s| s.to_string()).collect(),
            shapes,
            order: "x-fastest".into(),
            dtype: "f64le".into(),
        }
    }

    fn domain(&self) -> Result<BoxDomain> {
        if self.cells.len() != 3 || self.lengths.len() != 3 {
            return Err(Error::Format(format!(
                "{} dump is not three-dimensional",
                self.kind
            )));
        }
        BoxDomain::new(
            [self.lengths[0], self.lengths[1], self.lengths[2]],
            [self.cells[0], self.cells[1], self.cells[2]],
        )
    }
}

/// Write a header and its component arrays.
pub fn write_raw(path: &Path, header: &Header, data: &[&[f64]]) -> Result<()> {
    if data.len() != header.shapes.len() {
        return Err(Error::Format(
            "component count does not match header".into(),
        ));
    }
    for (d, s) in data.iter().zip(&header.shapes) {
        if d.len() != s.iter().product::<usize>() {
            return Err(Error::Format(
                "component length does not match header".into(),
            ));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, header).map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    for d in data {
        for v in d.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Read any dump: header plus one vector per component.
pub fn read_raw(path: &Path) -> Result<(Header, Vec<Vec<f64>>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Format(format!("bad dump header: {e}")))?;
    if header.format != FORMAT || header.dtype != "f64le" || header.order != "x-fastest" {
        return Err(Error::Format(format!(
            "unsupported dump format {:?}",
            header.format
        )));
    }
    let mut out = Vec::with_capacity(header.shapes.len());
    for s in &header.shapes {
        let n: usize = s.iter().product();
        let mut buf = vec![0u8; 8 * n];
        r.read_exact(&mut buf)
            .map_err(|_| Error::Format("dump data is truncated".into()))?;
        out.push(
            buf.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after dump data".into()));
    }
    Ok((header, out))
}

fn shape(e: Extent) -> Vec<usize> {
    e.dims().to_vec()
}

fn write3(path: &Path, kind: &str, g: &BoxDomain, arrays: &[&Array3]) -> Result<()> {
    let names: &[&str] = if arrays.len() == 3 {
        &["x", "y", "z"]
    } else {
        &["value"]
    };
    let h = Header::new(
        kind,
        g.cells().to_vec(),
        g.lengths().to_vec(),
        names,
        arrays.iter().map(|a| shape(a.extent())).collect(),
    );
    let data: Vec<&[f64]> = arrays.iter().map(|a| a.data()).collect();
    write_raw(path, &h, &data)
}

fn read3(
    path: &Path,
    kind: &str,
    expected: impl Fn(&BoxDomain) -> Vec<Extent>,
) -> Result<(BoxDomain, Vec<Array3>)> {
    let (h, data) = read_raw(path)?;
    if h.kind != kind {
        return Err(Error::Format(format!(
            "expected a {kind} dump, found {}",
            h.kind
        )));
    }
    let g = h.domain()?;
    let ext = expected(&g);
    if ext.len() != data.len() {
        return Err(Error::Format("wrong number of components".into()));
    }
    let arrays = ext
        .into_iter()
        .zip(data)
        .map(|(e, d)| Array3::from_vec(e, d))
        .collect::<Result<Vec<_>>>()?;
    Ok((g, arrays))
}

pub fn write_edge_field(path: &Path, g: &BoxDomain, u: &EdgeField) -> Result<()> {
    u.check(g)?;
    write3(path, "edge", g, &u.comps())
}

pub fn write_face_field(path: &Path, g: &BoxDomain, w: &FaceField) -> Result<()> {
    w.check(g)?;
    write3(path, "face", g, &w.comps())
}

pub fn write_node_field(path: &Path, g: &BoxDomain, v: &NodeField) -> Result<()> {
    v.check(g)?;
    write3(path, "node", g, &[&v.values])
}

pub fn write_cell_field(path: &Path, g: &BoxDomain, v: &CellField) -> Result<()> {
    v.check(g)?;
    write3(path, "cell", g, &[&v.values])
}

pub fn read_edge_field(path: &Path) -> Result<(BoxDomain, EdgeField)> {
    let (g, mut a) = read3(path, "edge", |g| {
        AXES.iter().map(|&ax| g.edge_extent(ax)).collect()
    })?;
    let (z, y, x) = (a.pop().unwrap(), a.pop().unwrap(), a.pop().unwrap());
    Ok((g, EdgeField::from_components(&g, x, y, z)?))
}

pub fn read_face_field(path: &Path) -> Result<(BoxDomain, FaceField)> {
    let (g, mut a) = read3(path, "face", |g| {
        AXES.iter().map(|&ax| g.face_extent(ax)).collect()
    })?;
    let (z, y, x) = (a.pop().unwrap(), a.pop().unwrap(), a.pop().unwrap());
    Ok((g, FaceField::from_components(&g, x, y, z)?))
}

pub fn read_cell_field(path: &Path) -> Result<(BoxDomain, CellField)> {
    let (g, mut a) = read3(path, "cell", |g| vec![g.cell_extent()])?;
    Ok((g, CellField::from_array(&g, a.pop().unwrap())?))
}

/// Nodal values of a planar problem on `[0, Lx] x [0, Ly]`.
pub fn write_node2d(
    path: &Path,
    lengths: [f64; 2],
    cells: [usize; 2],
    values: &[f64],
) -> Result<()> {
    let h = Header::new(
        "node2d",
        cells.to_vec(),
        lengths.to_vec(),
        &["value"],
        vec![vec![cells[0] + 1, cells[1] + 1]],
    );
    write_raw(path, &h, &[values])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_round_trip_is_bitwise() {
        let g = BoxDomain::new([1.0, 2.0, 0.5], [3, 4, 2]).unwrap();
        let u = EdgeField::sample(&g, |q| [q[0].sin(), q[1] * q[2], -q[0] / 3.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.field");
        write_edge_field(&p, &g, &u).unwrap();
        let (g2, u2) = read_edge_field(&p).unwrap();
        assert_eq!(g, g2);
        for (a, b) in u.comps().iter().zip(u2.comps()) {
            assert!(a
                .data()
                .iter()
                .zip(b.data())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert!(read_face_field(&p).is_err());
    }

    #[test]
    fn header_describes_layout() {
        let g = BoxDomain::new([1.0; 3], [2, 3, 4]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.field");
        write_face_field(&p, &g, &FaceField::zeros(&g)).unwrap();
        let (h, data) = read_raw(&p).unwrap();
        assert_eq!(h.kind, "face");
        assert_eq!(h.shapes, vec![vec![3, 3, 4], vec![2, 4, 4], vec![2, 3, 5]]);
        assert_eq!(
            data.iter().map(Vec::len).collect::<Vec<_>>(),
            vec![36, 32, 30]
        );
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let g = BoxDomain::unit_cube(2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.field");
        write_cell_field(&p, &g, &CellField::zeros(&g)).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(read_raw(&p), Err(Error::Format(_))));
    }
}
