//! Projection of port-Hamiltonian descriptor systems onto reduced bases.

use std::fmt;
use std::str::FromStr;

use nalgebra::{ComplexField, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{simulate_with, Descriptor, InputSignal, SimOptions, TimeGrid, Trajectory};
use crate::linalg::{eye, lift, norm_inf, require_full_rank};
use crate::ph::{check_ph_matrices, Formulation, PhDescriptorSystem, PhReport, StateTransform};
use crate::scalar::Real;

/// Projection method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Projection {
    Galerkin,
    #[serde(rename = "quasi-Galerkin")]
    QuasiGalerkin,
    #[serde(rename = "pH")]
    PhPreserving,
    #[serde(rename = "energy-stable")]
    EnergyStable,
}

impl Projection {
    pub const ALL: [Projection; 4] = [
        Projection::Galerkin,
        Projection::QuasiGalerkin,
        Projection::PhPreserving,
        Projection::EnergyStable,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Projection::Galerkin => "Galerkin",
            Projection::QuasiGalerkin => "quasi-Galerkin",
            Projection::PhPreserving => "pH",
            Projection::EnergyStable => "energy-stable",
        }
    }
}

impl fmt::Display for Projection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Projection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Projection::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown projection '{s}'")))
    }
}

/// Reduced `(J_r, D_r, Q_r)` of the structured projections.
#[derive(Debug, Clone)]
pub struct ReducedPh<C: ComplexField> {
    pub j: DMatrix<C>,
    pub d: DMatrix<C>,
    pub q: DMatrix<C>,
}

/// Reduced descriptor model `E_r ẋ_r = A_r x_r + B_r u`, `y = C_r x_r`.
#[derive(Debug, Clone)]
pub struct ReducedSystem<C: ComplexField> {
    pub e: DMatrix<C>,
    pub a: DMatrix<C>,
    pub b: DMatrix<C>,
    /// Port output map `BᵀQV`.
    pub c: DMatrix<C>,
    /// Observation rows composed with `V`.
    pub observation: DMatrix<C>,
    pub structure: Option<ReducedPh<C>>,
    /// Reconstruction `x ≈ V x_r` in the full formulation's coordinates.
    pub v: DMatrix<C>,
    pub projection: Projection,
    pub formulation: Formulation,
}

impl<C> ReducedSystem<C>
where
    C: ComplexField,
    C::RealField: Real,
{
    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    pub fn descriptor(&self) -> Descriptor<C> {
        Descriptor {
            e: self.e.clone(),
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
        }
    }

    /// pH residuals of the reduced operators; `None` without structure.
    pub fn check(&self, tol: f64) -> Option<PhReport> {
        self.structure
            .as_ref()
            .map(|s| check_ph_matrices(&self.e, &s.j, &s.d, &s.q, tol))
    }

    /// `½ x_rᴴE_rᴴQ_r x_r` (real part); `None` without structure.
    pub fn hamiltonian(&self, xr: &DVector<C>) -> Option<C::RealField> {
        let s = self.structure.as_ref()?;
        let ex = &self.e * xr;
        let qx = &s.q * xr;
        Some(ex.dotc(&qx).real() * <C::RealField as Real>::lit(0.5))
    }

    /// The model obtained from the sub-basis `V[:, cols]`.
    ///
    /// Every projection here reduces an operator `M` to `W(V)ᴴMV` with `W`
    /// acting column by column, so the sub-model is a principal submatrix.
    pub fn restrict(&self, cols: &[usize]) -> Result<Self> {
        let n = self.n();
        if let Some(&bad) = cols.iter().find(|&&c| c >= n) {
            return Err(Error::Dimension(format!("column {bad} out of range for a model of size {n}")));
        }
        let sq = |m: &DMatrix<C>| m.select_rows(cols).select_columns(cols);
        let structure = self.structure.as_ref().map(|s| ReducedPh {
            j: sq(&s.j),
            d: sq(&s.d),
            q: sq(&s.q),
        });
        let a = match (&structure, self.projection) {
            (Some(s), Projection::QuasiGalerkin) => (&s.j - &s.d) * &s.q,
            _ => sq(&self.a),
        };
        Ok(Self {
            e: sq(&self.e),
            a,
            b: self.b.select_rows(cols),
            c: self.c.select_columns(cols),
            observation: self.observation.select_columns(cols),
            structure,
            v: self.v.select_columns(cols),
            projection: self.projection,
            formulation: self.formulation,
        })
    }

    /// `V X_r`.
    pub fn reconstruct(&self, xr: &DMatrix<C>) -> DMatrix<C> {
        &self.v * xr
    }
}

struct Lifted<C: ComplexField> {
    e: DMatrix<C>,
    j: DMatrix<C>,
    d: DMatrix<C>,
    q: DMatrix<C>,
    b: DMatrix<C>,
    observation: DMatrix<C>,
}

fn lifted<T: Real, C: ComplexField<RealField = T>>(ph: &PhDescriptorSystem<T>) -> Lifted<C> {
    Lifted {
        e: lift(&ph.e),
        j: lift(&ph.j),
        d: lift(&ph.d),
        q: lift(&ph.q),
        b: lift(&ph.b),
        observation: lift(&ph.observation),
    }
}

fn check_basis<T: Real, C: ComplexField<RealField = T>>(ph: &PhDescriptorSystem<T>, v: &DMatrix<C>) -> Result<()> {
    if v.nrows() != ph.n() {
        return Err(Error::Dimension(format!(
            "basis has {} rows, system has N = {}",
            v.nrows(),
            ph.n()
        )));
    }
    if v.ncols() == 0 {
        return Err(Error::Config("basis has no columns".into()));
    }
    require_full_rank(v, "V")
}

/// `W = V`: `E_r = VᴴEV`, `A_r = VᴴAV`, `B_r = VᴴB`.
pub fn galerkin<T: Real, C: ComplexField<RealField = T>>(
    ph: &PhDescriptorSystem<T>,
    v: &DMatrix<C>,
) -> Result<ReducedSystem<C>> {
    check_basis(ph, v)?;
    let m = lifted::<T, C>(ph);
    let vh = v.adjoint();
    let qv = &m.q * v;
    Ok(ReducedSystem {
        e: &vh * &m.e * v,
        a: &vh * ((&m.j - &m.d) * &qv),
        b: &vh * &m.b,
        c: m.b.adjoint() * &qv,
        observation: &m.observation * v,
        structure: None,
        v: v.clone(),
        projection: Projection::Galerkin,
        formulation: ph.formulation,
    })
}

/// Galerkin with `Q ≈ VVᴴQ`: `A_r = (J_r − D_r)Q_r` with congruence-reduced
/// `J_r, D_r, Q_r`.
pub fn quasi_galerkin<T: Real, C: ComplexField<RealField = T>>(
    ph: &PhDescriptorSystem<T>,
    v: &DMatrix<C>,
) -> Result<ReducedSystem<C>> {
    check_basis(ph, v)?;
    let m = lifted::<T, C>(ph);
    let vh = v.adjoint();
    let j = &vh * &m.j * v;
    let d = &vh * &m.d * v;
    let q = &vh * &m.q * v;
    Ok(ReducedSystem {
        e: &vh * &m.e * v,
        a: (&j - &d) * &q,
        b: &vh * &m.b,
        c: m.b.adjoint() * (&m.q * v),
        observation: &m.observation * v,
        structure: Some(ReducedPh { j, d, q }),
        v: v.clone(),
        projection: Projection::QuasiGalerkin,
        formulation: ph.formulation,
    })
}

/// `W = QV`: `E_r = VᴴQᴴEV`, `J_r = VᴴQᴴJQV`, `D_r = VᴴQᴴDQV`, `Q_r = I`.
pub fn ph_projection<T: Real, C: ComplexField<RealField = T>>(
    ph: &PhDescriptorSystem<T>,
    v: &DMatrix<C>,
) -> Result<ReducedSystem<C>> {
    check_basis(ph, v)?;
    let m = lifted::<T, C>(ph);
    let qv = &m.q * v;
    require_full_rank(&qv, "QV")?;
    let w = qv.adjoint();
    let j = &w * &m.j * &qv;
    let d = &w * &m.d * &qv;
    let n = v.ncols();
    Ok(ReducedSystem {
        e: &w * &m.e * v,
        a: &j - &d,
        b: &w * &m.b,
        c: m.b.adjoint() * &qv,
        observation: &m.observation * v,
        structure: Some(ReducedPh { j, d, q: eye(n) }),
        v: v.clone(),
        projection: Projection::PhPreserving,
        formulation: ph.formulation,
    })
}

/// How `(J − D)⁻¹` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InverseRoute {
    /// `Tᵀ Pᵀ(J − D)P T`.
    ClosedForm,
    /// `P T Pᵀ(J − D)P T Pᵀ`.
    TransformedClosedForm,
    /// Dense LU.
    DirectSolve,
}

impl fmt::Display for InverseRoute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InverseRoute::ClosedForm => "closed form",
            InverseRoute::TransformedClosedForm => "transformed closed form",
            InverseRoute::DirectSolve => "direct solve",
        })
    }
}

/// Residual bound a closed-form inverse must meet.
pub const INVERSE_RESIDUAL_TOL: f64 = 1e-8;

/// `‖(J − D)G − I‖` in the max-row-sum norm.
pub fn inverse_residual<T: Real>(jd: &DMatrix<T>, g: &DMatrix<T>) -> T {
    norm_inf(&(jd * g - eye::<T>(jd.nrows())))
}

/// `(J − D)⁻¹` with the route taken.
///
/// For the velocity form the block-swap identities are tried first and
/// accepted only if their residual is below [`INVERSE_RESIDUAL_TOL`].
pub fn jd_inverse<T: Real>(ph: &PhDescriptorSystem<T>) -> Result<(DMatrix<T>, InverseRoute)> {
    let jd = &ph.j - &ph.d;
    if ph.formulation == Formulation::Velocity {
        let (ns, nf) = (ph.partition.n_s, ph.partition.n_f);
        let nh = ns + nf;
        let r = ph.j.view((nh, nh + ns), (ns, nf)).into_owned();
        let x = StateTransform::from_coupling(&r);
        let core = x.p.transpose() * &jd * &x.p;
        let g = &x.t * &core * &x.t;
        let tol = T::lit(INVERSE_RESIDUAL_TOL);
        if inverse_residual(&jd, &g) <= tol {
            return Ok((g, InverseRoute::ClosedForm));
        }
        let g = &x.p * g * x.p.transpose();
        if inverse_residual(&jd, &g) <= tol {
            return Ok((g, InverseRoute::TransformedClosedForm));
        }
        log::warn!("closed-form (J − D)⁻¹ failed its residual check, using a direct solve");
    }
    let g = jd
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Factorization("J − D is singular".into()))?;
    Ok((g, InverseRoute::DirectSolve))
}

/// Energy-stable projection:
/// `VᴴEᴴGEV ẋ_r = VᴴEᴴQV x_r + VᴴEᴴGB u` with `G = (J − D)⁻¹`.
pub fn energy_stable<T: Real, C: ComplexField<RealField = T>>(
    ph: &PhDescriptorSystem<T>,
    v: &DMatrix<C>,
) -> Result<ReducedSystem<C>> {
    let (g, _) = jd_inverse(ph)?;
    energy_stable_with(ph, &g, v)
}

/// Energy-stable projection with a precomputed `G = (J − D)⁻¹`.
pub fn energy_stable_with<T: Real, C: ComplexField<RealField = T>>(
    ph: &PhDescriptorSystem<T>,
    g: &DMatrix<T>,
    v: &DMatrix<C>,
) -> Result<ReducedSystem<C>> {
    check_basis(ph, v)?;
    let m = lifted::<T, C>(ph);
    let gc: DMatrix<C> = lift(g);
    let ev = &m.e * v;
    let w = ev.adjoint();
    let qv = &m.q * v;
    Ok(ReducedSystem {
        e: &w * (&gc * &ev),
        a: &w * &qv,
        b: &w * (&gc * &m.b),
        c: m.b.adjoint() * &qv,
        observation: &m.observation * v,
        structure: None,
        v: v.clone(),
        projection: Projection::EnergyStable,
        formulation: ph.formulation,
    })
}

/// Dispatches on `method`.
pub fn project<T: Real, C: ComplexField<RealField = T>>(
    method: Projection,
    ph: &PhDescriptorSystem<T>,
    v: &DMatrix<C>,
) -> Result<ReducedSystem<C>> {
    match method {
        Projection::Galerkin => galerkin(ph, v),
        Projection::QuasiGalerkin => quasi_galerkin(ph, v),
        Projection::PhPreserving => ph_projection(ph, v),
        Projection::EnergyStable => energy_stable(ph, v),
    }
}

/// `Π_{V,H} X = V(VᴴHV)⁻¹VᴴHX`.
pub fn best_approximation<C>(v: &DMatrix<C>, h: &DMatrix<C>, x: &DMatrix<C>) -> Result<DMatrix<C>>
where
    C: ComplexField,
    C::RealField: Real,
{
    if h.nrows() != v.nrows() || x.nrows() != v.nrows() {
        return Err(Error::Dimension("basis, energy matrix and states disagree in size".into()));
    }
    let hv = h * v;
    let gram = v.adjoint() * &hv;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Rank("VᴴHV is not positive definite (H not SPD or V rank deficient)".into()))?;
    let coeff = chol.solve(&(hv.adjoint() * x));
    Ok(v * coeff)
}

/// IMR run of a reduced model.
pub fn simulate_reduced<C>(
    rs: &ReducedSystem<C>,
    input: &dyn InputSignal,
    x0: &DVector<C>,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory<C>>
where
    C: ComplexField,
    C::RealField: Real,
{
    simulate_with(&rs.descriptor(), input, x0, TimeGrid::new(dt, t_end)?, SimOptions::default())
}
