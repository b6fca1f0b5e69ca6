//! On-disk formats: diagnostics CSV, raw field snapshots, and PGM images.
//!
//! Snapshot = a text header at `<path>.hdr` next to the raw payload at
//! `<path>`: little-endian f64, row-major with x fastest. The PGM writer
//! emits binary P5 with maxval 255, mapping `[min, max]` linearly onto
//! `[0, 255]`; a constant field maps to 128 everywhere.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::diagnostics::ConvergenceTable;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::integrators::Trajectory;

/// Pinned diagnostics schema; single-variable runs leave `mass_v` empty.
pub const ENERGY_CSV_HEADER: &str =
    "step,t,dt,eta,energy,modified_energy,mass_u,mass_v,newton_iters,accepted";

pub fn write_energy_csv(trajectory: &Trajectory, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    writeln!(w, "{ENERGY_CSV_HEADER}").map_err(io_err)?;
    for r in &trajectory.records {
        let mass_v = r.mass_v.map(|m| format!("{m:.16e}")).unwrap_or_default();
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
            r.step,
            r.t,
            r.dt,
            r.eta,
            r.energy,
            r.modified_energy,
            r.mass_u,
            mass_v,
            r.newton_iters,
            r.accepted
        )
        .map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn write_convergence_csv(table: &ConvergenceTable, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    let mut header = String::from("dt");
    for v in &table.variables {
        header.push_str(&format!(",{v}_linf,{v}_order"));
    }
    writeln!(w, "{header}").map_err(io_err)?;
    for row in &table.rows {
        let mut line = format!("{:.16e}", row.dt);
        for (err, order) in row.errors.iter().zip(&row.orders) {
            line.push_str(&format!(",{err:.6e}"));
            match order {
                Some(o) => line.push_str(&format!(",{o:.3}")),
                None => line.push(','),
            }
        }
        writeln!(w, "{line}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Header metadata of a raw snapshot.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub t: f64,
    pub variable: String,
}

fn header_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".hdr");
    PathBuf::from(p)
}

/// Writes the payload to `path` and the text header to `<path>.hdr`.
pub fn write_snapshot(field: &Field, header: &SnapshotHeader, path: &Path) -> Result<()> {
    assert_eq!(
        (header.nx, header.ny),
        (field.grid().nx(), field.grid().ny()),
        "header must match the field's grid"
    );
    let hp = header_path(path);
    let mut h = BufWriter::new(File::create(&hp).map_err(|e| Error::io(&hp, e))?);
    let hdr_err = |e| Error::io(&hp, e);
    writeln!(h, "nx = {}", header.nx).map_err(hdr_err)?;
    writeln!(h, "ny = {}", header.ny).map_err(hdr_err)?;
    writeln!(h, "lx = {:.17e}", header.lx).map_err(hdr_err)?;
    writeln!(h, "ly = {:.17e}", header.ly).map_err(hdr_err)?;
    writeln!(h, "t = {:.17e}", header.t).map_err(hdr_err)?;
    writeln!(h, "variable = {}", header.variable).map_err(hdr_err)?;
    writeln!(h, "byte_order = little-endian").map_err(hdr_err)?;
    writeln!(h, "element = f64").map_err(hdr_err)?;
    writeln!(h, "layout = row-major-x-fastest").map_err(hdr_err)?;
    h.flush().map_err(hdr_err)?;

    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    for &v in field.values() {
        w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a snapshot back; the payload length must match the header.
pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, Field)> {
    let hp = header_path(path);
    let h = File::open(&hp).map_err(|e| Error::io(&hp, e))?;
    let mut fields = std::collections::HashMap::new();
    for line in BufReader::new(h).lines() {
        let line = line.map_err(|e| Error::io(&hp, e))?;
        if let Some((k, v)) = line.split_once('=') {
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let get = |k: &str| -> Result<String> {
        fields.get(k).cloned().ok_or_else(|| Error::SnapshotFormat {
            path: hp.clone(),
            reason: format!("missing header key `{k}`"),
        })
    };
    let parse_err = |k: &str| Error::SnapshotFormat {
        path: hp.clone(),
        reason: format!("bad value for `{k}`"),
    };
    let header = SnapshotHeader {
        nx: get("nx")?.parse().map_err(|_| parse_err("nx"))?,
        ny: get("ny")?.parse().map_err(|_| parse_err("ny"))?,
        lx: get("lx")?.parse().map_err(|_| parse_err("lx"))?,
        ly: get("ly")?.parse().map_err(|_| parse_err("ly"))?,
        t: get("t")?.parse().map_err(|_| parse_err("t"))?,
        variable: get("variable")?,
    };
    if get("byte_order")? != "little-endian" || get("element")? != "f64" {
        return Err(Error::SnapshotFormat {
            path: hp,
            reason: "unsupported byte order or element type".into(),
        });
    }

    let mut payload = Vec::new();
    File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut payload)
        .map_err(|e| Error::io(path, e))?;
    let expect = header.nx * header.ny * 8;
    if payload.len() != expect {
        return Err(Error::SnapshotFormat {
            path: path.to_path_buf(),
            reason: format!("payload is {} bytes, expected {expect}", payload.len()),
        });
    }
    let grid = Grid::new(header.nx, header.ny, header.lx, header.ly)?;
    let values = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    Ok((header, Field::from_values(&grid, values)))
}

/// Binary P5 with values mapped linearly from `[min, max]`; constant fields
/// map to mid-gray.
pub fn write_pgm(field: &Field, path: &Path) -> Result<()> {
    let (nx, ny) = (field.grid().nx(), field.grid().ny());
    let (lo, hi) = (field.min(), field.max());
    let span = hi - lo;
    let mut bytes = Vec::with_capacity(nx * ny);
    for &v in field.values() {
        let b = if span <= 0.0 {
            128u8
        } else {
            ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
        };
        bytes.push(b);
    }
    let mut w = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let io_err = |e| Error::io(path, e);
    write!(w, "P5\n{nx} {ny}\n255\n").map_err(io_err)?;
    w.write_all(&bytes).map_err(io_err)?;
    w.flush().map_err(io_err)
}

/// Field loader for `ic = file` runs: payload grid must match `grid`.
pub fn read_snapshot_on_grid(path: &Path, grid: &Arc<Grid>) -> Result<Field> {
    let (header, field) = read_snapshot(path)?;
    if !field.grid().same_as(grid) {
        return Err(Error::SnapshotFormat {
            path: path.to_path_buf(),
            reason: format!(
                "snapshot grid {}x{} does not match run grid {}x{}",
                header.nx,
                header.ny,
                grid.nx(),
                grid.ny()
            ),
        });
    }
    Ok(Field::from_values(grid, field.values().to_vec()))
}
