//! Desk-scale plate–cavity–plate model.

mod cavity;
mod coupling;
mod plate;

pub use cavity::{build_cavity, disc_hole, neumann_laplacian, CavityConfig, CavityLayout, CavityMatrices};
pub use coupling::build_coupling;
pub use plate::{build_plate, LateralGrid, PlateConfig};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Rayleigh mass-proportional coefficient α (1/s).
pub const RAYLEIGH_ALPHA: f64 = 15.958;
/// Rayleigh stiffness-proportional coefficient β (s).
pub const RAYLEIGH_BETA: f64 = 2.821e-6;

/// `D = α·M + β·K`.
pub fn rayleigh_damping<T: Real>(m: &DMatrix<T>, k: &DMatrix<T>, alpha: T, beta: T) -> Result<DMatrix<T>> {
    if !m.is_square() || m.shape() != k.shape() {
        return Err(Error::Dimension(format!(
            "Rayleigh damping needs square M and K of equal size, got {:?} and {:?}",
            m.shape(),
            k.shape()
        )));
    }
    Ok(m * alpha + k * beta)
}

fn default_alpha() -> f64 {
    RAYLEIGH_ALPHA
}

fn default_beta() -> f64 {
    RAYLEIGH_BETA
}

/// Plate section of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlateParams {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub surface_density: f64,
    pub tension: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

impl PlateParams {
    pub fn to_config<T: Real>(&self) -> PlateConfig<T> {
        PlateConfig {
            nx: self.nx,
            ny: self.ny,
            lx: T::lit(self.lx),
            ly: T::lit(self.ly),
            surface_density: T::lit(self.surface_density),
            tension: T::lit(self.tension),
            alpha: T::lit(self.alpha),
            beta: T::lit(self.beta),
        }
    }
}

fn default_hole_radius() -> f64 {
    0.2
}

/// Cavity section of a model file. The hole is a centred disc of top-face
/// cells with radius `hole_radius·min(lx, ly)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityParams {
    pub nz: usize,
    pub lz: f64,
    pub rho_f: f64,
    pub c0: f64,
    #[serde(default = "default_hole_radius")]
    pub hole_radius: f64,
}

/// Everything needed to assemble a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub top: PlateParams,
    pub back: PlateParams,
    pub cavity: CavityParams,
    /// Excitation point as fractions of `(lx, ly)`.
    pub excitation: [f64; 2],
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            top: PlateParams {
                nx: 9,
                ny: 9,
                lx: 0.40,
                ly: 0.30,
                surface_density: 1.05,
                tension: 3000.0,
                alpha: RAYLEIGH_ALPHA,
                beta: RAYLEIGH_BETA,
            },
            back: PlateParams {
                nx: 9,
                ny: 9,
                lx: 0.40,
                ly: 0.30,
                surface_density: 1.4,
                tension: 5000.0,
                alpha: RAYLEIGH_ALPHA,
                beta: RAYLEIGH_BETA,
            },
            cavity: CavityParams {
                nz: 5,
                lz: 0.10,
                rho_f: 1.2,
                c0: 343.0,
                hole_radius: 0.2,
            },
            excitation: [0.3, 0.3],
        }
    }
}

impl ModelParams {
    /// A smaller model with the same topology, handy for tests.
    pub fn small() -> Self {
        let mut p = Self::default();
        p.top.nx = 5;
        p.top.ny = 5;
        p.back.nx = 5;
        p.back.ny = 5;
        p.cavity.nz = 3;
        p
    }

    pub fn undamped(mut self) -> Self {
        self.top.alpha = 0.0;
        self.top.beta = 0.0;
        self.back.alpha = 0.0;
        self.back.beta = 0.0;
        self
    }

    pub fn build<T: Real>(&self) -> Result<CoupledSecondOrderSystem<T>> {
        build_model(self)
    }
}

/// Index bookkeeping of an assembled model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelLayout {
    pub n_top: usize,
    pub n_back: usize,
    /// Structural DOF receiving the point force.
    pub excitation_dof: usize,
    /// Structural DOF closest to the back-plate centre.
    pub back_center_dof: usize,
    /// Fluid DOFs adjacent to the sound hole.
    pub hole_neighbours: Vec<usize>,
    pub cavity: CavityLayout,
}

/// Coupled second-order plate–cavity–plate system in `(z, p)` variables.
#[derive(Debug, Clone)]
pub struct CoupledSecondOrderSystem<T: Real> {
    pub m_s: DMatrix<T>,
    pub d_s: DMatrix<T>,
    pub k_s: DMatrix<T>,
    pub m_f: DMatrix<T>,
    pub k_f: DMatrix<T>,
    pub r: DMatrix<T>,
    pub rho_f: T,
    /// `N_S × m` map from inputs to structural forces `f_S`.
    pub input_map: DMatrix<T>,
    /// `3 × N̂` observation rows over `(z, p)`: excitation-node displacement,
    /// hole pressure integral, back-plate centre displacement.
    pub output_map: DMatrix<T>,
    pub layout: ModelLayout,
}

/// Generic `M ẍ + D ẋ + K x = F u` system.
#[derive(Debug, Clone)]
pub struct SecondOrderSystem<T: Real> {
    pub mass: DMatrix<T>,
    pub damping: DMatrix<T>,
    pub stiffness: DMatrix<T>,
    pub input: DMatrix<T>,
}

impl<T: Real> CoupledSecondOrderSystem<T> {
    pub fn n_s(&self) -> usize {
        self.m_s.nrows()
    }

    pub fn n_f(&self) -> usize {
        self.m_f.nrows()
    }

    /// `N̂ = N_S + N_F`.
    pub fn n_hat(&self) -> usize {
        self.n_s() + self.n_f()
    }

    pub fn n_inputs(&self) -> usize {
        self.input_map.ncols()
    }

    /// Copy with `R = 0`.
    pub fn decoupled(&self) -> Self {
        let mut s = self.clone();
        s.r.fill(T::zero());
        s
    }

    /// Checks symmetry, definiteness and block sizes.
    pub fn validate(&self) -> Result<()> {
        let (ns, nf) = (self.n_s(), self.n_f());
        let shapes = [
            ("M_S", self.m_s.shape(), (ns, ns)),
            ("D_S", self.d_s.shape(), (ns, ns)),
            ("K_S", self.k_s.shape(), (ns, ns)),
            ("M_F", self.m_f.shape(), (nf, nf)),
            ("K_F", self.k_f.shape(), (nf, nf)),
            ("R", self.r.shape(), (ns, nf)),
        ];
        for (name, got, want) in shapes {
            if got != want {
                return Err(Error::Dimension(format!("{name} is {got:?}, expected {want:?}")));
            }
        }
        if self.input_map.nrows() != ns || self.output_map.ncols() != ns + nf {
            return Err(Error::Dimension("input/output map sizes do not match the model".into()));
        }
        let tol = T::lit(1e-12);
        for (name, m) in [("M_S", &self.m_s), ("K_S", &self.k_s), ("M_F", &self.m_f), ("K_F", &self.k_f)] {
            if crate::linalg::hermitian_residual(m) > tol {
                return Err(Error::Config(format!("{name} is not symmetric")));
            }
            if !crate::linalg::is_positive_definite(m) {
                return Err(Error::Config(format!("{name} is not positive definite")));
            }
        }
        if !(self.rho_f > T::zero()) {
            return Err(Error::Config("fluid density must be positive".into()));
        }
        Ok(())
    }

    /// `(z, p)` form with unsymmetric mass and stiffness.
    pub fn assemble_unsymmetric(&self) -> SecondOrderSystem<T> {
        let (ns, nf) = (self.n_s(), self.n_f());
        let n = ns + nf;
        let mut mass = DMatrix::zeros(n, n);
        mass.view_mut((0, 0), (ns, ns)).copy_from(&self.m_s);
        mass.view_mut((ns, 0), (nf, ns)).copy_from(&(self.r.transpose() * self.rho_f));
        mass.view_mut((ns, ns), (nf, nf)).copy_from(&self.m_f);
        let mut damping = DMatrix::zeros(n, n);
        damping.view_mut((0, 0), (ns, ns)).copy_from(&self.d_s);
        let mut stiffness = DMatrix::zeros(n, n);
        stiffness.view_mut((0, 0), (ns, ns)).copy_from(&self.k_s);
        stiffness.view_mut((0, ns), (ns, nf)).copy_from(&(-&self.r));
        stiffness.view_mut((ns, ns), (nf, nf)).copy_from(&self.k_f);
        SecondOrderSystem {
            mass,
            damping,
            stiffness,
            input: self.force_map(),
        }
    }

    /// `(z, q)` form with `p = q̇`; the fluid row is integrated once in time
    /// and divided by `ρ_F`, so mass and stiffness are symmetric and the
    /// damping matrix is `diag(D_S, 0)` plus the skew coupling
    /// `[[0, −R], [Rᵀ, 0]]`.
    ///
    /// With structural forcing only, the integrated fluid forcing vanishes.
    pub fn assemble_symmetric(&self) -> SecondOrderSystem<T> {
        let (ns, nf) = (self.n_s(), self.n_f());
        let n = ns + nf;
        let inv_rho = T::one() / self.rho_f;
        let mut mass = DMatrix::zeros(n, n);
        mass.view_mut((0, 0), (ns, ns)).copy_from(&self.m_s);
        mass.view_mut((ns, ns), (nf, nf)).copy_from(&(&self.m_f * inv_rho));
        let mut damping = DMatrix::zeros(n, n);
        damping.view_mut((0, 0), (ns, ns)).copy_from(&self.d_s);
        damping.view_mut((0, ns), (ns, nf)).copy_from(&(-&self.r));
        damping.view_mut((ns, 0), (nf, ns)).copy_from(&self.r.transpose());
        let mut stiffness = DMatrix::zeros(n, n);
        stiffness.view_mut((0, 0), (ns, ns)).copy_from(&self.k_s);
        stiffness.view_mut((ns, ns), (nf, nf)).copy_from(&(&self.k_f * inv_rho));
        SecondOrderSystem {
            mass,
            damping,
            stiffness,
            input: self.force_map(),
        }
    }

    /// `N̂ × m` forcing map: structural forces on top, no fluid sources.
    fn force_map(&self) -> DMatrix<T> {
        let mut f = DMatrix::zeros(self.n_hat(), self.n_inputs());
        f.view_mut((0, 0), (self.n_s(), self.n_inputs())).copy_from(&self.input_map);
        f
    }
}

/// Assembles the full model from file parameters.
pub fn build_model<T: Real>(params: &ModelParams) -> Result<CoupledSecondOrderSystem<T>> {
    let top_cfg = params.top.to_config::<T>();
    let back_cfg = params.back.to_config::<T>();
    top_cfg.validate()?;
    back_cfg.validate()?;
    let grid = top_cfg.grid();
    let back_grid = back_cfg.grid();
    if !grid.matches(&back_grid) {
        return Err(Error::Config("top and back plates must share the lateral grid".into()));
    }
    let [ex, ey] = params.excitation;
    if !(0.0..=1.0).contains(&ex) || !(0.0..=1.0).contains(&ey) {
        return Err(Error::Config("excitation position must lie within the plate".into()));
    }
    if !(params.cavity.hole_radius >= 0.0) {
        return Err(Error::Config("hole radius must be non-negative".into()));
    }

    let lx = top_cfg.lx;
    let ly = top_cfg.ly;
    let half = T::lit(0.5);
    let hole = disc_hole(
        &grid,
        lx * half,
        ly * half,
        T::lit(params.cavity.hole_radius) * lx.min(ly),
    );
    let cav_cfg = CavityConfig {
        nz: params.cavity.nz,
        lz: T::lit(params.cavity.lz),
        rho_f: T::lit(params.cavity.rho_f),
        c0: T::lit(params.cavity.c0),
        hole_patch: hole,
    };

    let (m_top, k_top) = build_plate(&top_cfg)?;
    let (m_back, k_back) = build_plate(&back_cfg)?;
    let d_top = rayleigh_damping(&m_top, &k_top, top_cfg.alpha, top_cfg.beta)?;
    let d_back = rayleigh_damping(&m_back, &k_back, back_cfg.alpha, back_cfg.beta)?;
    let cav = build_cavity(&grid, &cav_cfg)?;
    let r = build_coupling(&grid, &back_grid, &cav_cfg)?;

    let n_top = m_top.nrows();
    let n_back = m_back.nrows();
    let ns = n_top + n_back;
    let nf = cav.layout.len();
    let bd = crate::linalg::block_diag;

    let (ei, ej) = grid
        .nearest_interior(lx * T::lit(ex), ly * T::lit(ey))
        .ok_or_else(|| Error::Config("plate has no interior node".into()))?;
    let excitation_dof = grid.interior_index(ei, ej).unwrap();
    let (bi, bj) = grid.nearest_interior(lx * half, ly * half).unwrap();
    let back_center_dof = n_top + grid.interior_index(bi, bj).unwrap();
    let hole_neighbours = cav.layout.hole_neighbours();

    let mut input_map = DMatrix::zeros(ns, 1);
    input_map[(excitation_dof, 0)] = T::one();
    let mut output_map = DMatrix::zeros(3, ns + nf);
    output_map[(0, excitation_dof)] = T::one();
    for &d in &hole_neighbours {
        output_map[(1, ns + d)] = cav.cell_volume;
    }
    output_map[(2, back_center_dof)] = T::one();

    let sys = CoupledSecondOrderSystem {
        m_s: bd(&[&m_top, &m_back]),
        d_s: bd(&[&d_top, &d_back]),
        k_s: bd(&[&k_top, &k_back]),
        m_f: cav.mass,
        k_f: cav.stiffness,
        r,
        rho_f: cav_cfg.rho_f,
        input_map,
        output_map,
        layout: ModelLayout {
            n_top,
            n_back,
            excitation_dof,
            back_center_dof,
            hole_neighbours,
            cavity: cav.layout,
        },
    };
    sys.validate()?;
    Ok(sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rayleigh_with_reference_coefficients() {
        let i = DMatrix::<f64>::identity(3, 3);
        let d = rayleigh_damping(&i, &i, RAYLEIGH_ALPHA, RAYLEIGH_BETA).unwrap();
        assert!((d - &i * 15.958002821).norm() < 1e-12);
        let d0 = rayleigh_damping(&i, &i, 0.0, 0.0).unwrap();
        assert_eq!(d0.norm(), 0.0);
        let k = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(rayleigh_damping(&i, &k, 1.0, 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn rayleigh_of_spd_pair_is_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = DMatrix::<f64>::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
            let b = DMatrix::<f64>::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
            let m = &a * a.transpose() + DMatrix::identity(5, 5) * 0.1;
            let k = &b * b.transpose() + DMatrix::identity(5, 5) * 0.1;
            let d = rayleigh_damping(&m, &k, 2.0, 0.3).unwrap();
            assert_eq!(d.clone(), d.transpose());
            assert!(d.symmetric_eigen().eigenvalues.min() >= 0.0);
        }
    }

    #[test]
    fn default_model_dimensions() {
        let sys: CoupledSecondOrderSystem<f64> = ModelParams::default().build().unwrap();
        assert_eq!(sys.n_s(), 98);
        assert!(sys.n_f() > 390 && sys.n_f() < 405, "N_F = {}", sys.n_f());
        assert!(!sys.layout.hole_neighbours.is_empty());
        let expected = rayleigh_damping(&sys.m_s, &sys.k_s, RAYLEIGH_ALPHA, RAYLEIGH_BETA).unwrap();
        assert_eq!((&sys.d_s - expected).amax(), 0.0);
    }

    #[test]
    fn unsymmetric_mass_block_carries_scaled_coupling() {
        let sys: CoupledSecondOrderSystem<f64> = ModelParams::small().build().unwrap();
        let u = sys.assemble_unsymmetric();
        let ns = sys.n_s();
        let lower = u.mass.view((ns, 0), (sys.n_f(), ns));
        assert_eq!(lower.into_owned(), sys.r.transpose() * sys.rho_f);
        let dec = sys.decoupled().assemble_unsymmetric();
        assert_eq!(dec.mass.clone(), dec.mass.transpose());
        assert_eq!(dec.stiffness.clone(), dec.stiffness.transpose());
    }

    #[test]
    fn symmetric_damping_splits_into_psd_and_skew_parts() {
        let sys: CoupledSecondOrderSystem<f64> = ModelParams::small().build().unwrap();
        let s = sys.assemble_symmetric();
        let ns = sys.n_s();
        let sym = (&s.damping + s.damping.transpose()) * 0.5;
        let skew = (&s.damping - s.damping.transpose()) * 0.5;
        assert_eq!(sym.view((0, 0), (ns, ns)).into_owned(), sys.d_s);
        assert_eq!(sym.view((0, ns), (ns, sys.n_f())).amax(), 0.0);
        assert_eq!(skew.view((0, ns), (ns, sys.n_f())).into_owned(), -&sys.r);
        // structural forcing only
        assert_eq!(s.input.rows(ns, sys.n_f()).amax(), 0.0);
    }

    #[test]
    fn unsymmetric_and_symmetric_pencils_share_spectra() {
        let sys: CoupledSecondOrderSystem<f64> = ModelParams::small().build().unwrap();
        // Diagonal similarity on the fluid unknowns balances the blocks; the
        // unsymmetric form is otherwise too non-normal for a dense eigensolver.
        let ns = sys.n_s();
        let d = (sys.rho_f / sys.m_f[(0, 0)]).sqrt();
        let first_order = |s: &SecondOrderSystem<f64>| {
            let n = s.mass.nrows();
            let minv = s.mass.clone().try_inverse().unwrap();
            let mut a = DMatrix::<f64>::zeros(2 * n, 2 * n);
            a.view_mut((0, n), (n, n)).fill_with_identity();
            a.view_mut((n, 0), (n, n)).copy_from(&(-&minv * &s.stiffness));
            a.view_mut((n, n), (n, n)).copy_from(&(-&minv * &s.damping));
            let w = |i: usize| if i % n >= ns { d } else { 1.0 };
            DMatrix::from_fn(2 * n, 2 * n, |i, j| a[(i, j)] * w(j) / w(i))
        };
        let sorted = |a: &DMatrix<f64>| {
            let (vals, _) = <f64 as crate::scalar::backend::DenseEigen>::general_eigen(a).unwrap();
            let mut ev: Vec<(f64, f64)> = vals.iter().map(|c| (c.re, c.im)).collect();
            ev.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then(x.0.partial_cmp(&y.0).unwrap()));
            ev
        };
        let eu = sorted(&first_order(&sys.assemble_unsymmetric()));
        let es = sorted(&first_order(&sys.assemble_symmetric()));
        assert_eq!(eu.len(), es.len());
        let scale = eu.iter().map(|e| e.0.hypot(e.1)).fold(0.0, f64::max);
        let matched = |x: &(f64, f64), list: &[(f64, f64)]| {
            list.iter().any(|y| (x.0 - y.0).hypot(x.1 - y.1) < 1e-7 * scale)
        };
        for e in &eu {
            assert!(matched(e, &es), "eigenvalue {e:?} missing in the symmetric pencil");
        }
        for e in &es {
            assert!(matched(e, &eu), "eigenvalue {e:?} missing in the unsymmetric pencil");
        }
    }
}
