use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Finite-difference membrane standing in for a thin plate.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateConfig<T> {
    /// Grid points along x, rim included.
    pub nx: usize,
    /// Grid points along y, rim included.
    pub ny: usize,
    /// Side length along x (m).
    pub lx: T,
    /// Side length along y (m).
    pub ly: T,
    /// Mass per unit area ρ_S·h (kg/m²).
    pub surface_density: T,
    /// Membrane tension (N/m).
    pub tension: T,
    /// Rayleigh mass coefficient (1/s).
    pub alpha: T,
    /// Rayleigh stiffness coefficient (s).
    pub beta: T,
}

impl<T: Real> PlateConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 3 || self.ny < 3 {
            return Err(Error::Config(format!(
                "plate grid {}x{} is too small, need at least 3x3",
                self.nx, self.ny
            )));
        }
        let positive = [
            ("lx", self.lx),
            ("ly", self.ly),
            ("surface_density", self.surface_density),
            ("tension", self.tension),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) {
                return Err(Error::Config(format!("plate {name} must be positive")));
            }
        }
        if self.alpha < T::zero() || self.beta < T::zero() {
            return Err(Error::Config("Rayleigh coefficients must be non-negative".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> LateralGrid<T> {
        LateralGrid {
            nx: self.nx,
            ny: self.ny,
            dx: self.lx / T::from_usize(self.nx - 1).unwrap(),
            dy: self.ly / T::from_usize(self.ny - 1).unwrap(),
        }
    }

    /// Number of interior (free) nodes.
    pub fn interior_nodes(&self) -> usize {
        (self.nx - 2) * (self.ny - 2)
    }
}

/// Lateral node grid shared by a plate and the cavity faces it covers.
///
/// The cavity has one cell column per grid node; rim nodes sit against a
/// rigid wall and carry no structural DOF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralGrid<T> {
    pub nx: usize,
    pub ny: usize,
    pub dx: T,
    pub dy: T,
}

impl<T: Real> LateralGrid<T> {
    pub fn cell_area(&self) -> T {
        self.dx * self.dy
    }

    /// Structural DOF index of grid node `(i, j)`, `None` on the rim.
    pub fn interior_index(&self, i: usize, j: usize) -> Option<usize> {
        if i == 0 || j == 0 || i + 1 >= self.nx || j + 1 >= self.ny {
            return None;
        }
        Some((j - 1) * (self.nx - 2) + (i - 1))
    }

    /// Interior node nearest to the point `(x, y)`.
    pub fn nearest_interior(&self, x: T, y: T) -> Option<(usize, usize)> {
        let mut best = None;
        let mut best_d = T::max_value().unwrap();
        for j in 1..self.ny.saturating_sub(1) {
            for i in 1..self.nx.saturating_sub(1) {
                let px = self.dx * T::from_usize(i).unwrap() - x;
                let py = self.dy * T::from_usize(j).unwrap() - y;
                let d = px * px + py * py;
                if d < best_d {
                    best_d = d;
                    best = Some((i, j));
                }
            }
        }
        best
    }

    pub fn matches(&self, other: &LateralGrid<T>) -> bool {
        let tol = T::lit(1e-12);
        self.nx == other.nx
            && self.ny == other.ny
            && (self.dx - other.dx).abs() <= tol * self.dx
            && (self.dy - other.dy).abs() <= tol * self.dy
    }
}

/// Lumped mass and stiffness of a membrane over its interior nodes.
///
/// `M = ρ_S h·Δx·Δy·I`; `K = −T·Δx·Δy·Δ_h` with the 5-point Laplacian `Δ_h`
/// and homogeneous Dirichlet conditions on the rim, so that `M⁻¹K` is the
/// discrete membrane operator `−(T/ρ_S h)·Δ_h`.
pub fn build_plate<T: Real>(cfg: &PlateConfig<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    cfg.validate()?;
    let grid = cfg.grid();
    let n = cfg.interior_nodes();
    let area = grid.cell_area();
    let mass = DMatrix::from_diagonal_element(n, n, cfg.surface_density * area);

    let cx = cfg.tension * area / (grid.dx * grid.dx);
    let cy = cfg.tension * area / (grid.dy * grid.dy);
    let two = T::lit(2.0);
    let mut stiff = DMatrix::zeros(n, n);
    for j in 1..cfg.ny - 1 {
        for i in 1..cfg.nx - 1 {
            let row = grid.interior_index(i, j).unwrap();
            stiff[(row, row)] = two * (cx + cy);
            let neighbours = [
                (i - 1, j, cx),
                (i + 1, j, cx),
                (i, j - 1, cy),
                (i, j + 1, cy),
            ];
            for (ni, nj, c) in neighbours {
                if let Some(col) = grid.interior_index(ni, nj) {
                    stiff[(row, col)] = -c;
                }
            }
        }
    }
    Ok((mass, stiff))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_plate(n: usize) -> PlateConfig<f64> {
        PlateConfig {
            nx: n,
            ny: n,
            lx: 1.0,
            ly: 1.0,
            surface_density: 1.0,
            tension: 1.0,
            alpha: 0.0,
            beta: 0.0,
        }
    }

    #[test]
    fn single_interior_node() {
        let (m, k) = build_plate(&unit_plate(3)).unwrap();
        assert_eq!(m.shape(), (1, 1));
        assert!((m[(0, 0)] - 0.25).abs() < 1e-15);
        // 4T/h² = 16, times the nodal area 0.25
        assert!((k[(0, 0)] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn too_small_grid_is_rejected() {
        let mut cfg = unit_plate(3);
        cfg.nx = 2;
        assert!(matches!(build_plate(&cfg), Err(Error::Config(_))));
        let mut cfg = unit_plate(4);
        cfg.tension = 0.0;
        assert!(build_plate(&cfg).is_err());
    }

    #[test]
    fn stiffness_is_symmetric_positive_definite() {
        let mut cfg = unit_plate(6);
        cfg.ny = 5;
        cfg.ly = 0.7;
        let (_, k) = build_plate(&cfg).unwrap();
        assert_eq!((&k - k.transpose()).norm(), 0.0);
        let eig = k.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&l| l > 0.0));
    }

    #[test]
    fn fundamental_matches_discrete_membrane_eigenvalue() {
        // 5x5 grid, h = 1/4: λ_min = (2T/(ρ h²))·(2 − 2 cos(π/4))
        let (m, k) = build_plate(&unit_plate(5)).unwrap();
        let minv_k = m.clone().try_inverse().unwrap() * &k;
        let sym = (&minv_k + minv_k.transpose()) * 0.5;
        let lmin = sym.symmetric_eigen().eigenvalues.min();
        let h2 = 1.0 / 16.0;
        let expected = 2.0 / h2 * (2.0 - 2.0 * (std::f64::consts::PI / 4.0).cos());
        assert!((lmin - expected).abs() < 1e-10 * expected, "{lmin} vs {expected}");
    }
}
