//! Legacy ASCII VTK unstructured grids with nodal `u` and `w`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::solver::StateField;

/// Render one frame. Values use the shortest round-trip representation.
pub fn vtk_string(mesh: &TriMesh, state: &StateField) -> Result<String> {
    let n = mesh.num_vertices();
    if state.u.len() != n || state.w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: state.u.len().min(state.w.len()),
        });
    }
    let m = mesh.num_triangles();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "monodomain t = {:e}", state.time);
    let _ = writeln!(s, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for x in mesh.vertices() {
        let _ = writeln!(s, "{:e} {:e} 0", x[0], x[1]);
    }
    let _ = writeln!(s, "CELLS {m} {}", 4 * m);
    for t in mesh.triangles() {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    for _ in 0..m {
        let _ = writeln!(s, "5");
    }
    let _ = writeln!(s, "POINT_DATA {n}");
    for (name, field) in [("u", &state.u), ("w", &state.w)] {
        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in field.iter() {
            let _ = writeln!(s, "{v:e}");
        }
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, mesh: &TriMesh, state: &StateField) -> Result<()> {
    std::fs::write(path, vtk_string(mesh, state)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_mesh;

    #[test]
    fn frame_layout() {
        let mesh = unit_square_mesh(1).unwrap();
        let state = StateField {
            u: vec![0.0, 0.5, 1.0, 0.25],
            w: vec![0.0; 4],
            time: 0.1,
        };
        let s = vtk_string(&mesh, &state).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# vtk DataFile Version 3.0");
        assert!(lines.contains(&"POINTS 4 double"));
        assert!(lines.contains(&"CELLS 2 8"));
        assert_eq!(lines.iter().filter(|l| **l == "5").count(), 2);
        let u_at = lines
            .iter()
            .position(|l| *l == "SCALARS u double 1")
            .unwrap();
        let values: Vec<f64> = lines[u_at + 2..u_at + 6]
            .iter()
            .map(|l| l.parse().unwrap())
            .collect();
        assert_eq!(values, state.u);
        assert!(vtk_string(&mesh, &StateField::zeros(3, 0.0)).is_err());
    }
}
