//! Field serialization.
//!
//! CSV: a header line, then one row per grid point with the coordinates
//! followed by the value. Space-time fields prepend a `t` column and list
//! nodes in time order.
//!
//! Binary (little-endian):
//!
//! | bytes          | content                                   |
//! |----------------|-------------------------------------------|
//! | 4              | `u32` dimension m                         |
//! | 4              | `u32` points per axis N                   |
//! | 4              | `u32` node count (0 for a field without t) |
//! | 8 × nodes      | `f64` time nodes                          |
//! | 8 × max(1,nodes)·Nᵐ | `f64` samples, node-major, row-major  |

use std::io::{BufRead, BufReader, BufWriter, Read, Write};

use crate::error::{Error, Result};
use crate::grid::{GridField, SpaceTimeField, TorusGrid};

fn header(dim: usize, with_t: bool) -> String {
    let mut cols: Vec<String> = Vec::new();
    if with_t {
        cols.push("t".into());
    }
    cols.extend((1..=dim).map(|i| format!("x{i}")));
    cols.push("value".into());
    cols.join(",")
}

fn write_rows(w: &mut impl Write, f: &GridField, t: Option<f64>) -> Result<()> {
    let grid = f.grid();
    for (flat, v) in f.samples().iter().enumerate() {
        if let Some(t) = t {
            write!(w, "{t:e},")?;
        }
        for x in grid.coords(flat) {
            write!(w, "{x:e},")?;
        }
        writeln!(w, "{v:e}")?;
    }
    Ok(())
}

pub fn write_grid_csv(f: &GridField, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "{}", header(f.grid().dim(), false))?;
    write_rows(&mut w, f, None)?;
    w.flush()?;
    Ok(())
}

pub fn write_spacetime_csv(u: &SpaceTimeField, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "{}", header(u.grid().dim(), true))?;
    for (t, node) in u.times().iter().zip(u.nodes()) {
        write_rows(&mut w, node, Some(*t))?;
    }
    w.flush()?;
    Ok(())
}

struct CsvTable {
    with_t: bool,
    dim: usize,
    rows: Vec<Vec<f64>>,
}

fn read_table(r: impl Read) -> Result<CsvTable> {
    let mut lines = BufReader::new(r).lines();
    let head = lines
        .next()
        .ok_or_else(|| Error::Parse("empty CSV".into()))??;
    let cols: Vec<&str> = head.split(',').map(str::trim).collect();
    if cols.last() != Some(&"value") || cols.len() < 2 {
        return Err(Error::Parse(format!("unrecognized CSV header `{head}`")));
    }
    let with_t = cols[0] == "t";
    let dim = cols.len() - 1 - usize::from(with_t);
    if dim == 0 {
        return Err(Error::Parse("CSV has no coordinate columns".into()));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))?;
        if row.len() != cols.len() {
            return Err(Error::Parse(format!(
                "line {}: expected {} columns, found {}",
                lineno + 2,
                cols.len(),
                row.len()
            )));
        }
        rows.push(row);
    }
    Ok(CsvTable { with_t, dim, rows })
}

fn infer_grid(dim: usize, points: usize) -> Result<TorusGrid> {
    let n = (points as f64).powf(1.0 / dim as f64).round() as usize;
    if n.pow(dim as u32) != points {
        return Err(Error::Parse(format!(
            "{points} rows do not form a {dim}-dimensional cube"
        )));
    }
    TorusGrid::new(dim, n)
}

/// Values are read in file order; coordinate columns are checked against
/// the inferred grid.
fn field_from_rows(rows: &[Vec<f64>], offset: usize, dim: usize) -> Result<GridField> {
    let grid = infer_grid(dim, rows.len())?;
    let tol = 1e-9 * grid.spacing();
    for (flat, row) in rows.iter().enumerate() {
        let expected = grid.coords(flat);
        if expected
            .iter()
            .zip(&row[offset..offset + dim])
            .any(|(a, b)| (a - b).abs() > tol)
        {
            return Err(Error::Parse(format!(
                "row {flat} has coordinates out of row-major grid order"
            )));
        }
    }
    GridField::new(grid, rows.iter().map(|r| r[offset + dim]).collect())
}

pub fn read_grid_csv(r: impl Read) -> Result<GridField> {
    let table = read_table(r)?;
    if table.with_t {
        return Err(Error::Parse("CSV has a t column; read it as a space-time field".into()));
    }
    field_from_rows(&table.rows, 0, table.dim)
}

pub fn read_spacetime_csv(r: impl Read) -> Result<SpaceTimeField> {
    let table = read_table(r)?;
    if !table.with_t {
        return Err(Error::Parse("CSV has no t column".into()));
    }
    let mut times = Vec::new();
    let mut nodes = Vec::new();
    let mut start = 0;
    while start < table.rows.len() {
        let t = table.rows[start][0];
        let mut end = start;
        while end < table.rows.len() && table.rows[end][0] == t {
            end += 1;
        }
        times.push(t);
        nodes.push(field_from_rows(&table.rows[start..end], 1, table.dim)?);
        start = end;
    }
    SpaceTimeField::new(times, nodes)
}

fn put_u32(w: &mut impl Write, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Parse(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64s(w: &mut impl Write, vs: &[f64]) -> Result<()> {
    for v in vs {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn get_u32(r: &mut impl Read) -> Result<usize> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b) as usize)
}

fn get_f64s(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut b = [0u8; 8];
    for _ in 0..count {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

pub fn write_grid_binary(f: &GridField, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    put_u32(&mut w, f.grid().dim())?;
    put_u32(&mut w, f.grid().points_per_axis())?;
    put_u32(&mut w, 0)?;
    put_f64s(&mut w, f.samples())?;
    w.flush()?;
    Ok(())
}

pub fn write_spacetime_binary(u: &SpaceTimeField, w: impl Write) -> Result<()> {
    let mut w = BufWriter::new(w);
    put_u32(&mut w, u.grid().dim())?;
    put_u32(&mut w, u.grid().points_per_axis())?;
    put_u32(&mut w, u.len_time())?;
    put_f64s(&mut w, u.times())?;
    for node in u.nodes() {
        put_f64s(&mut w, node.samples())?;
    }
    w.flush()?;
    Ok(())
}

/// Either kind of field, as found in a binary file.
#[derive(Clone, Debug, PartialEq)]
pub enum StoredField {
    Grid(GridField),
    SpaceTime(SpaceTimeField),
}

pub fn read_binary(r: impl Read) -> Result<StoredField> {
    let mut r = BufReader::new(r);
    let dim = get_u32(&mut r)?;
    let n = get_u32(&mut r)?;
    let nodes = get_u32(&mut r)?;
    let grid = TorusGrid::new(dim, n)?;
    if nodes == 0 {
        return Ok(StoredField::Grid(GridField::new(
            grid,
            get_f64s(&mut r, grid.len())?,
        )?));
    }
    let times = get_f64s(&mut r, nodes)?;
    let fields = (0..nodes)
        .map(|_| GridField::new(grid, get_f64s(&mut r, grid.len())?))
        .collect::<Result<Vec<_>>>()?;
    Ok(StoredField::SpaceTime(SpaceTimeField::new(times, fields)?))
}

/// Read a space-time field from either format, chosen by extension
/// (`.csv` or anything else for binary).
pub fn load_spacetime(path: &std::path::Path) -> Result<SpaceTimeField> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e == "csv") {
        return read_spacetime_csv(file);
    }
    match read_binary(file)? {
        StoredField::SpaceTime(u) => Ok(u),
        StoredField::Grid(_) => Err(Error::Parse(format!(
            "{} holds a field without a time axis",
            path.display()
        ))),
    }
}

pub fn load_grid(path: &std::path::Path) -> Result<GridField> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e == "csv") {
        return read_grid_csv(file);
    }
    match read_binary(file)? {
        StoredField::Grid(f) => Ok(f),
        StoredField::SpaceTime(_) => Err(Error::Parse(format!(
            "{} holds a space-time field",
            path.display()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SpaceTimeField {
        let grid = TorusGrid::new(2, 4).unwrap();
        let times = SpaceTimeField::uniform_times(0.0, 0.5, 3);
        SpaceTimeField::from_fn(grid, times, |x, t| x[0].sin() * (x[1] + t).cos() + 1e-17).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let u = sample();
        let mut buf = Vec::new();
        write_spacetime_csv(&u, &mut buf).unwrap();
        let back = read_spacetime_csv(buf.as_slice()).unwrap();
        assert_eq!(back, u);

        let f = u.node(1).clone();
        let mut buf = Vec::new();
        write_grid_csv(&f, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x1,x2,value\n"));
        assert_eq!(read_grid_csv(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn binary_round_trip() {
        let u = sample();
        let mut buf = Vec::new();
        write_spacetime_binary(&u, &mut buf).unwrap();
        assert_eq!(buf.len(), 12 + 8 * 3 + 8 * 3 * 16);
        assert_eq!(&buf[0..4], &2u32.to_le_bytes());
        assert_eq!(read_binary(buf.as_slice()).unwrap(), StoredField::SpaceTime(u.clone()));

        let mut buf = Vec::new();
        write_grid_binary(u.node(0), &mut buf).unwrap();
        assert_eq!(read_binary(buf.as_slice()).unwrap(), StoredField::Grid(u.node(0).clone()));
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(read_grid_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_grid_csv("x1,value\n0,1\n1,2\n2,3\n".as_bytes()).is_err());
        assert!(read_binary([1u8, 0, 0].as_slice()).is_err());
    }
}
