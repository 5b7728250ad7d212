//! Legacy ASCII VTK output of a state and a reader for the arrays it writes.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, VmsError};
use crate::solver::{Discretization, StarState};

/// Point and cell arrays read back from a file written by [`write_fields`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VtkArrays {
    pub n_points: usize,
    pub n_cells: usize,
    pub velocity: Vec<[f64; 3]>,
    pub pressure: Vec<f64>,
    pub subscale: Vec<f64>,
}

/// Velocity and pressure at the mesh vertices, subscale magnitude per cell.
pub fn fields_to_vtk(disc: &Discretization, state: &StarState) -> String {
    let mesh = disc.velocity.mesh();
    let nv = mesh.n_vertices();
    let mut s = String::new();
    mesh.vtk_geometry(&mut s, &format!("vmsns state t={:e}", state.t));
    // vertices are the first nodes of every space
    let vel = disc.velocity.node_values(&state.u);
    let pres = disc.pressure.node_values(&state.p);
    let _ = writeln!(s, "POINT_DATA {nv}");
    let _ = writeln!(s, "VECTORS velocity double");
    for v in vel.iter().take(nv) {
        let _ = writeln!(s, "{:e} {:e} {:e}", v[0], v[1], v[2]);
    }
    let _ = writeln!(s, "SCALARS pressure double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for v in pres.iter().take(nv) {
        let _ = writeln!(s, "{:e}", v[0]);
    }
    let mags = state.tilde.values.cell_mean_magnitude(disc.projector.rule());
    let _ = writeln!(s, "CELL_DATA {}", mesh.n_cells());
    let _ = writeln!(s, "SCALARS subscale_magnitude double 1");
    let _ = writeln!(s, "LOOKUP_TABLE default");
    for m in mags {
        let _ = writeln!(s, "{m:e}");
    }
    s
}

pub fn write_fields(disc: &Discretization, state: &StarState, path: &Path) -> Result<()> {
    std::fs::write(path, fields_to_vtk(disc, state)).map_err(|e| VmsError::io(path, e))
}

pub fn read_fields(path: &Path) -> Result<VtkArrays> {
    let text = std::fs::read_to_string(path).map_err(|e| VmsError::io(path, e))?;
    parse_fields(&text, path)
}

pub fn parse_fields(text: &str, path: &Path) -> Result<VtkArrays> {
    let err = |line: usize, msg: &str| VmsError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.to_string(),
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut out = VtkArrays::default();
    let mut i = 0;
    let read_numbers = |start: usize, count: usize| -> Result<(Vec<f64>, usize)> {
        let mut vals = Vec::with_capacity(count);
        let mut j = start;
        while vals.len() < count {
            let line = lines.get(j).ok_or_else(|| err(j + 1, "unexpected end of file"))?;
            for tok in line.split_whitespace() {
                vals.push(tok.parse::<f64>().map_err(|_| err(j + 1, "expected a number"))?);
            }
            j += 1;
        }
        if vals.len() != count {
            return Err(err(j, "array length mismatch"));
        }
        Ok((vals, j))
    };
    while i < lines.len() {
        let words: Vec<&str> = lines[i].split_whitespace().collect();
        let count = |k: usize| -> Result<usize> {
            words
                .get(k)
                .and_then(|w| w.parse().ok())
                .ok_or_else(|| err(i + 1, "expected a count"))
        };
        match words.first().copied() {
            Some("POINTS") => out.n_points = count(1)?,
            Some("CELLS") => out.n_cells = count(1)?,
            Some("VECTORS") if words.get(1) == Some(&"velocity") => {
                let (v, next) = read_numbers(i + 1, 3 * out.n_points)?;
                out.velocity = v.chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
                i = next;
                continue;
            }
            Some("SCALARS") => {
                let name = words.get(1).copied().unwrap_or("");
                let n = if name == "pressure" { out.n_points } else { out.n_cells };
                let (v, next) = read_numbers(i + 2, n)?;
                match name {
                    "pressure" => out.pressure = v,
                    "subscale_magnitude" => out.subscale = v,
                    _ => {}
                }
                i = next;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    Ok(out)
}
