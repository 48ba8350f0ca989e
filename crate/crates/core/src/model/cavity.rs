use nalgebra::DMatrix;

use super::plate::LateralGrid;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Cuboid air cavity discretized with one cell column per lateral grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityConfig<T> {
    /// Cell layers between back plate (layer 0) and top plate (layer `nz − 1`).
    pub nz: usize,
    /// Cavity depth (m).
    pub lz: T,
    /// Fluid density ρ_F (kg/m³).
    pub rho_f: T,
    /// Speed of sound c₀ (m/s).
    pub c0: T,
    /// Top-layer cells `(i, j)` held at zero pressure (the sound hole).
    pub hole_patch: Vec<(usize, usize)>,
}

impl<T: Real> CavityConfig<T> {
    pub fn validate(&self, grid: &LateralGrid<T>) -> Result<()> {
        if self.nz < 2 {
            return Err(Error::Config("cavity needs at least two cell layers".into()));
        }
        if !(self.lz > T::zero() && self.rho_f > T::zero() && self.c0 > T::zero()) {
            return Err(Error::Config("cavity depth, density and sound speed must be positive".into()));
        }
        if self.hole_patch.is_empty() {
            return Err(Error::Config(
                "empty sound-hole patch leaves the pure Neumann cavity singular".into(),
            ));
        }
        for &(i, j) in &self.hole_patch {
            if i >= grid.nx || j >= grid.ny {
                return Err(Error::Config(format!(
                    "hole cell ({i}, {j}) lies outside the {}x{} top face",
                    grid.nx, grid.ny
                )));
            }
        }
        Ok(())
    }

    pub fn dz(&self) -> T {
        self.lz / T::from_usize(self.nz).unwrap()
    }
}

/// Top-face cells whose centres lie within `radius` of `(cx, cy)`; falls back
/// to the single nearest cell when the disc misses every centre.
pub fn disc_hole<T: Real>(grid: &LateralGrid<T>, cx: T, cy: T, radius: T) -> Vec<(usize, usize)> {
    let mut cells = Vec::new();
    let mut nearest = (0, 0);
    let mut nearest_d = T::max_value().unwrap();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let x = grid.dx * T::from_usize(i).unwrap() - cx;
            let y = grid.dy * T::from_usize(j).unwrap() - cy;
            let d = (x * x + y * y).sqrt();
            if d <= radius {
                cells.push((i, j));
            }
            if d < nearest_d {
                nearest_d = d;
                nearest = (i, j);
            }
        }
    }
    if cells.is_empty() {
        cells.push(nearest);
    }
    cells
}

/// Cell bookkeeping of the cavity after removing the hole cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityLayout {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Fluid DOF of cell `(i, j, k)`, `None` for zero-pressure cells.
    dof: Vec<Option<usize>>,
    /// Cell coordinates of each fluid DOF.
    pub cells: Vec<(usize, usize, usize)>,
}

impl CavityLayout {
    pub fn new(nx: usize, ny: usize, nz: usize, hole: &[(usize, usize)]) -> Self {
        let mut dof = vec![None; nx * ny * nz];
        let mut cells = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let eliminated = k + 1 == nz && hole.contains(&(i, j));
                    if !eliminated {
                        dof[(k * ny + j) * nx + i] = Some(cells.len());
                        cells.push((i, j, k));
                    }
                }
            }
        }
        Self { nx, ny, nz, dof, cells }
    }

    pub fn dof(&self, i: usize, j: usize, k: usize) -> Option<usize> {
        self.dof[(k * self.ny + j) * self.nx + i]
    }

    pub fn is_hole(&self, i: usize, j: usize) -> bool {
        self.dof(i, j, self.nz - 1).is_none()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Fluid DOFs sharing a face with a zero-pressure cell.
    pub fn hole_neighbours(&self) -> Vec<usize> {
        let top = self.nz - 1;
        let mut out = Vec::new();
        for (d, &(i, j, k)) in self.cells.iter().enumerate() {
            let mut touches = false;
            if k == top {
                let lateral = [
                    (i.wrapping_sub(1), j),
                    (i + 1, j),
                    (i, j.wrapping_sub(1)),
                    (i, j + 1),
                ];
                touches = lateral
                    .iter()
                    .any(|&(a, b)| a < self.nx && b < self.ny && self.is_hole(a, b));
            }
            if k + 1 == top && self.is_hole(i, j) {
                touches = true;
            }
            if touches {
                out.push(d);
            }
        }
        out
    }
}

/// Cavity mass/stiffness pair together with its cell layout.
#[derive(Debug, Clone)]
pub struct CavityMatrices<T: Real> {
    pub mass: DMatrix<T>,
    pub stiffness: DMatrix<T>,
    pub layout: CavityLayout,
    pub cell_volume: T,
}

/// Volume-weighted 7-point Laplacian on every cell with mirror (zero-flux)
/// walls, before any zero-pressure elimination.
pub fn neumann_laplacian<T: Real>(grid: &LateralGrid<T>, cfg: &CavityConfig<T>) -> DMatrix<T> {
    let (nx, ny, nz) = (grid.nx, grid.ny, cfg.nz);
    let dz = cfg.dz();
    let vol = grid.dx * grid.dy * dz;
    let wx = vol / (grid.dx * grid.dx);
    let wy = vol / (grid.dy * grid.dy);
    let wz = vol / (dz * dz);
    let idx = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
    let n = nx * ny * nz;
    let mut l = DMatrix::zeros(n, n);
    let mut link = |a: usize, b: usize, w: T| {
        l[(a, a)] += w;
        l[(b, b)] += w;
        l[(a, b)] -= w;
        l[(b, a)] -= w;
    };
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let a = idx(i, j, k);
                if i + 1 < nx {
                    link(a, idx(i + 1, j, k), wx);
                }
                if j + 1 < ny {
                    link(a, idx(i, j + 1, k), wy);
                }
                if k + 1 < nz {
                    link(a, idx(i, j, k + 1), wz);
                }
            }
        }
    }
    l
}

/// Lumped acoustic mass `V/c₀²·I` and volume-weighted stiffness with the
/// hole cells eliminated (zero pressure).
pub fn build_cavity<T: Real>(grid: &LateralGrid<T>, cfg: &CavityConfig<T>) -> Result<CavityMatrices<T>> {
    cfg.validate(grid)?;
    let layout = CavityLayout::new(grid.nx, grid.ny, cfg.nz, &cfg.hole_patch);
    let full = neumann_laplacian(grid, cfg);
    let (nx, ny) = (grid.nx, grid.ny);
    let full_index: Vec<usize> = layout
        .cells
        .iter()
        .map(|&(i, j, k)| (k * ny + j) * nx + i)
        .collect();
    let n = layout.len();
    let stiffness = DMatrix::from_fn(n, n, |a, b| full[(full_index[a], full_index[b])]);
    let vol = grid.cell_area() * cfg.dz();
    let mass = DMatrix::from_diagonal_element(n, n, vol / (cfg.c0 * cfg.c0));
    Ok(CavityMatrices {
        mass,
        stiffness,
        layout,
        cell_volume: vol,
    })
}
