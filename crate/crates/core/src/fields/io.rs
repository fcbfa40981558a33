//! Field snapshots on disk: long-format CSV and a flat little-endian binary.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::field::{ScalarField, VectorField};
use super::grid::SpaceTimeGrid;
use crate::error::{Error, Result};

pub const BINARY_VERSION: u64 = 1;

/// Write `ix, iy, it, component, value` rows, one per node and component.
pub fn write_csv(path: &Path, comps: &[&ScalarField]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    w.write_record(["ix", "iy", "it", "component", "value"])
        .map_err(|e| Error::format(path, e))?;
    for (c, f) in comps.iter().enumerate() {
        let g = f.grid();
        for (i, v) in f.values().iter().enumerate() {
            let (ix, iy, it) = g.unravel(i);
            w.write_record(&[
                ix.to_string(),
                iy.to_string(),
                it.to_string(),
                c.to_string(),
                format!("{v:e}"),
            ])
            .map_err(|e| Error::format(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a CSV written by [`write_csv`] back onto `grid`.
pub fn read_csv(path: &Path, grid: SpaceTimeGrid) -> Result<Vec<ScalarField>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e))?;
    let mut comps: Vec<Vec<f64>> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::format(path, e))?;
        let num = |k: usize| -> Result<usize> {
            rec.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::format(path, format!("bad column {k} in {rec:?}")))
        };
        let (ix, iy, it, c) = (num(0)?, num(1)?, num(2)?, num(3)?);
        let value: f64 = rec
            .get(4)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::format(path, format!("bad value in {rec:?}")))?;
        if ix >= grid.nx() || iy >= grid.ny() || it >= grid.nt() {
            return Err(Error::format(path, format!("node ({ix},{iy},{it}) off grid")));
        }
        while comps.len() <= c {
            comps.push(vec![f64::NAN; grid.n_nodes()]);
        }
        comps[c][grid.index(ix, iy, it)] = value;
    }
    comps
        .into_iter()
        .map(|v| ScalarField::from_values(grid, v).map_err(|e| Error::format(path, e)))
        .collect()
}

/// Header `(nx, ny, nt, components, version)` as u64 LE, then the values of
/// each component in node order as f64 LE.
pub fn write_binary(path: &Path, comps: &[&ScalarField]) -> Result<()> {
    let first = comps
        .first()
        .ok_or_else(|| Error::Shape("no components to write".into()))?;
    let g = first.grid();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = [
        g.nx() as u64,
        g.ny() as u64,
        g.nt() as u64,
        comps.len() as u64,
        BINARY_VERSION,
    ];
    for h in header {
        w.write_all(&h.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    for f in comps {
        f.check_grid(g)?;
        for v in f.values() {
            w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read a binary snapshot. Extents are not stored, so the caller supplies
/// a grid whose node counts must match the header.
pub fn read_binary(path: &Path, grid: SpaceTimeGrid) -> Result<Vec<ScalarField>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut buf = [0u8; 8];
    let mut header = [0u64; 5];
    for h in header.iter_mut() {
        r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        *h = u64::from_le_bytes(buf);
    }
    let [nx, ny, nt, nc, version] = header;
    if version != BINARY_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    if (nx, ny, nt) != (grid.nx() as u64, grid.ny() as u64, grid.nt() as u64) {
        return Err(Error::format(
            path,
            format!("header grid {nx}x{ny}x{nt} does not match expected grid"),
        ));
    }
    let mut out = Vec::with_capacity(nc as usize);
    for _ in 0..nc {
        let mut vals = Vec::with_capacity(grid.n_nodes());
        for _ in 0..grid.n_nodes() {
            r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
            vals.push(f64::from_le_bytes(buf));
        }
        out.push(ScalarField::from_values(grid, vals).map_err(|e| Error::format(path, e))?);
    }
    Ok(out)
}

pub fn vector_components(v: &VectorField) -> Vec<&ScalarField> {
    v.components().iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (SpaceTimeGrid, ScalarField, ScalarField) {
        let g = SpaceTimeGrid::new(4, 3, 5, 2.0, 1.0, 0.5).unwrap();
        let a = ScalarField::from_fn(g, |x, y, t| x - 2.0 * y + t.sin());
        let b = ScalarField::from_fn(g, |x, y, t| (x * y).exp() * t);
        (g, a, b)
    }

    #[test]
    fn binary_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let (g, a, b) = sample();
        write_binary(&path, &[&a, &b]).unwrap();
        let back = read_binary(&path, g).unwrap();
        assert_eq!(back, vec![a, b]);
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, 5 * 8 + 2 * 8 * g.n_nodes() as u64);
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let (g, a, b) = sample();
        write_csv(&path, &[&a, &b]).unwrap();
        let back = read_csv(&path, g).unwrap();
        assert_eq!(back, vec![a, b]);
    }

    #[test]
    fn binary_rejects_wrong_grid() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.bin");
        let (_, a, _) = sample();
        write_binary(&path, &[&a]).unwrap();
        let other = SpaceTimeGrid::unit(5, 5, 5).unwrap();
        assert!(read_binary(&path, other).is_err());
    }
}
