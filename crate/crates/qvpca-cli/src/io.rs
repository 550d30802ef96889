//! CSV ingestion and emission.
//!
//! Panel layout (UTF-8, comma separator, decimal point, no thousands
//! separators): the header row is `t` followed by the spatial grid
//! values; each subsequent row is a time point followed by one value per
//! grid point. Multivariate paths use the same layout with component
//! indices `1..d` as the header "grid".
//!
//! Floats are emitted with Rust's shortest round-trip formatting, so a
//! written file re-ingests bit-identically.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use qvpca::{MultiPath, SpaceTimePanel};

use crate::CliError;

fn parse_cell(raw: &str, row: usize, col: usize) -> Result<f64, CliError> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Parse(format!("row {row}, column {col}: unparsable cell {raw:?}")))?;
    if !v.is_finite() {
        return Err(CliError::Parse(format!(
            "row {row}, column {col}: non-finite cell {raw:?}"
        )));
    }
    Ok(v)
}

/// Reads a panel file; `phi` optionally attaches parametrization samples
/// from a second file with identical grids.
pub fn ingest_panel(path: &Path, phi: Option<&Path>) -> Result<SpaceTimePanel, CliError> {
    let (t_grid, x_grid, values) = read_grid_csv(path)?;
    let phi_samples = match phi {
        None => None,
        Some(p) => {
            let (pt, px, pv) = read_grid_csv(p)?;
            if pt != t_grid || px != x_grid {
                return Err(CliError::Shape(format!(
                    "parametrization file {} has different grids than the panel",
                    p.display()
                )));
            }
            Some(pv)
        }
    };
    SpaceTimePanel::new(t_grid, x_grid, values, phi_samples).map_err(CliError::from)
}

/// Reads a multivariate path file (header columns are component labels).
pub fn ingest_path(path: &Path) -> Result<MultiPath, CliError> {
    let (t_grid, _, values) = read_grid_csv(path)?;
    MultiPath::new(t_grid, values).map_err(CliError::from)
}

type GridCsv = (DVector<f64>, DVector<f64>, DMatrix<f64>);

fn read_grid_csv(path: &Path) -> Result<GridCsv, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::Parse(format!("{}: empty file", path.display())))?;
    let mut fields = header.split(',');
    let first = fields.next().unwrap_or("").trim();
    if first != "t" {
        return Err(CliError::Parse(format!(
            "header must start with 't', found {first:?}"
        )));
    }
    let mut xs = Vec::new();
    for (col, f) in fields.enumerate() {
        xs.push(parse_cell(f, 0, col + 1)?);
    }
    if xs.len() < 2 {
        return Err(CliError::Shape("need at least two value columns".into()));
    }
    for j in 1..xs.len() {
        if !(xs[j] > xs[j - 1]) {
            return Err(CliError::Parse(format!(
                "header grid not strictly increasing at column {}",
                j + 1
            )));
        }
    }
    let n_cols = xs.len();
    let mut times = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in lines {
        let mut fields = line.split(',');
        let t = parse_cell(fields.next().unwrap_or(""), line_no, 0)?;
        let mut row = Vec::with_capacity(n_cols);
        for (col, f) in fields.enumerate() {
            row.push(parse_cell(f, line_no, col + 1)?);
        }
        if row.len() != n_cols {
            return Err(CliError::Shape(format!(
                "row {line_no} has {} values, expected {n_cols}",
                row.len()
            )));
        }
        times.push(t);
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(CliError::Shape("need at least two data rows".into()));
    }
    let values = DMatrix::from_fn(rows.len(), n_cols, |i, j| rows[i][j]);
    Ok((
        DVector::from_vec(times),
        DVector::from_vec(xs),
        values,
    ))
}

fn fmt_row(out: &mut String, label: f64, values: impl Iterator<Item = f64>) {
    let _ = write!(out, "{label}");
    for v in values {
        let _ = write!(out, ",{v}");
    }
    out.push('\n');
}

/// Writes a panel (or any time-by-grid matrix) in the standard layout.
pub fn write_grid_csv(
    path: &Path,
    t_grid: &DVector<f64>,
    x_grid: &DVector<f64>,
    values: &DMatrix<f64>,
) -> Result<(), CliError> {
    let mut out = String::from("t");
    for x in x_grid.iter() {
        let _ = write!(out, ",{x}");
    }
    out.push('\n');
    for i in 0..values.nrows() {
        fmt_row(&mut out, t_grid[i], values.row(i).iter().copied());
    }
    std::fs::write(path, out).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Writes a path with component indices `1..=d` as the header grid.
pub fn write_path_csv(path: &Path, mp: &MultiPath) -> Result<(), CliError> {
    let ids = DVector::from_fn(mp.dim(), |j, _| (j + 1) as f64);
    write_grid_csv(path, &mp.t_grid, &ids, &mp.values)
}

/// Writes a generic table with a text header and float rows.
pub fn write_table_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
