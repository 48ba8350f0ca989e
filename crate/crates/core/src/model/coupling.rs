use nalgebra::DMatrix;

use super::cavity::{CavityConfig, CavityLayout};
use super::plate::LateralGrid;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Signed interface-area matrix `R` (rows: top then back plate DOFs,
/// columns: fluid DOFs).
///
/// A top-plate node faces the top cell layer with `+Δx·Δy`, a back-plate node
/// faces the bottom layer with `−Δx·Δy`. Zero-pressure cells have no column.
pub fn build_coupling<T: Real>(
    top: &LateralGrid<T>,
    back: &LateralGrid<T>,
    cavity: &CavityConfig<T>,
) -> Result<DMatrix<T>> {
    if !top.matches(back) {
        return Err(Error::Config(format!(
            "top plate grid {}x{} does not match back plate grid {}x{}",
            top.nx, top.ny, back.nx, back.ny
        )));
    }
    cavity.validate(top)?;
    let layout = CavityLayout::new(top.nx, top.ny, cavity.nz, &cavity.hole_patch);
    let n_top = (top.nx - 2) * (top.ny - 2);
    let n_back = (back.nx - 2) * (back.ny - 2);
    let area = top.cell_area();
    let mut r = DMatrix::zeros(n_top + n_back, layout.len());
    for j in 1..top.ny - 1 {
        for i in 1..top.nx - 1 {
            let s = top.interior_index(i, j).unwrap();
            if let Some(f) = layout.dof(i, j, cavity.nz - 1) {
                r[(s, f)] = area;
            }
            if let Some(f) = layout.dof(i, j, 0) {
                r[(n_top + s, f)] = -area;
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(nz: usize, hole: Vec<(usize, usize)>) -> CavityConfig<f64> {
        CavityConfig {
            nz,
            lz: 0.2,
            rho_f: 1.2,
            c0: 343.0,
            hole_patch: hole,
        }
    }

    #[test]
    fn single_face_area() {
        let g = LateralGrid { nx: 3, ny: 3, dx: 0.5, dy: 0.5 };
        let r = build_coupling(&g, &g, &cfg(2, vec![(0, 0)])).unwrap();
        let layout = CavityLayout::new(3, 3, 2, &[(0, 0)]);
        let f = layout.dof(1, 1, 1).unwrap();
        assert_eq!(r[(0, f)], 0.25);
        let b = layout.dof(1, 1, 0).unwrap();
        assert_eq!(r[(1, b)], -0.25);
    }

    #[test]
    fn hole_columns_are_absent() {
        let g = LateralGrid { nx: 4, ny: 4, dx: 0.1, dy: 0.1 };
        let c = cfg(3, vec![(1, 1), (2, 2)]);
        let r = build_coupling(&g, &g, &c).unwrap();
        assert_eq!(r.ncols(), 4 * 4 * 3 - 2);
        // the top-plate nodes above the hole couple to nothing
        let s = g.interior_index(1, 1).unwrap();
        assert_eq!(r.row(s).iter().filter(|v| **v != 0.0).count(), 0);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = LateralGrid { nx: 4, ny: 4, dx: 0.1, dy: 0.1 };
        let b = LateralGrid { nx: 5, ny: 4, dx: 0.1, dy: 0.1 };
        assert!(matches!(
            build_coupling(&a, &b, &cfg(2, vec![(0, 0)])),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn total_area_equals_face_count() {
        let g = LateralGrid { nx: 6, ny: 5, dx: 0.08, dy: 0.07 };
        let hole = vec![(2, 2), (3, 2), (0, 0)];
        let r = build_coupling(&g, &g, &cfg(3, hole.clone())).unwrap();
        let mut faces = 0;
        for j in 1..4 {
            for i in 1..5 {
                faces += 1; // back plate face, never a hole
                if !hole.contains(&(i, j)) {
                    faces += 1;
                }
            }
        }
        let total: f64 = r.iter().map(|v| v.abs()).sum();
        assert!((total - faces as f64 * 0.08 * 0.07).abs() < 1e-12);
        for row in r.row_iter() {
            assert!(row.iter().filter(|v| **v != 0.0).count() <= 1);
        }
    }
}
