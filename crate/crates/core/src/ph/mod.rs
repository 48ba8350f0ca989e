//! Port-Hamiltonian descriptor systems `E ẋ = (J − D) Q x + B u`, `y = BᵀQx`.

mod check;
mod transform;

pub use check::{
    check_dissipation, check_ph_matrices, check_ph_properties, hamiltonian, DissipationReport, PhReport,
};
pub use transform::{canonical_transform, to_momentum, StateTransform};

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_diag, eye};
use crate::model::CoupledSecondOrderSystem;
use crate::scalar::Real;

/// State parameterization of the pH system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    /// `x = (z, q, ż, q̇)`.
    Velocity,
    /// `x_m = E x`.
    Momentum,
    /// `x_c = P⁻¹ x`.
    CanonicalVelocity,
    /// `x_mc = P⁻¹ E x`.
    CanonicalMomentum,
}

impl Formulation {
    pub const ALL: [Formulation; 4] = [
        Formulation::Velocity,
        Formulation::Momentum,
        Formulation::CanonicalVelocity,
        Formulation::CanonicalMomentum,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Formulation::Velocity => "velocity",
            Formulation::Momentum => "momentum",
            Formulation::CanonicalVelocity => "canonical-velocity",
            Formulation::CanonicalMomentum => "canonical-momentum",
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Formulation::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown formulation '{s}'")))
    }
}

/// Sizes of the structural and fluid blocks; `N = 2·(N_S + N_F)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Partition {
    pub n_s: usize,
    pub n_f: usize,
}

impl Partition {
    pub fn n_hat(&self) -> usize {
        self.n_s + self.n_f
    }

    pub fn n(&self) -> usize {
        2 * self.n_hat()
    }

    /// Row ranges of the blocks `z`, `q`, `ż`, `q̇` as `(start, len)`.
    pub fn blocks(&self) -> [(usize, usize); 4] {
        let nh = self.n_hat();
        [
            (0, self.n_s),
            (self.n_s, self.n_f),
            (nh, self.n_s),
            (nh + self.n_s, self.n_f),
        ]
    }
}

/// Port-Hamiltonian descriptor system in one of the four formulations.
#[derive(Debug, Clone)]
pub struct PhDescriptorSystem<T: Real> {
    pub e: DMatrix<T>,
    pub j: DMatrix<T>,
    pub d: DMatrix<T>,
    pub q: DMatrix<T>,
    pub b: DMatrix<T>,
    pub formulation: Formulation,
    pub partition: Partition,
    /// Observation rows (quantities of interest) acting on this formulation's state.
    pub observation: DMatrix<T>,
    /// `T_f` with `x_velocity = T_f x`; `None` for the velocity formulation.
    pub velocity_map: Option<DMatrix<T>>,
}

impl<T: Real> PhDescriptorSystem<T> {
    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    /// `A = (J − D) Q`.
    pub fn a(&self) -> DMatrix<T> {
        (&self.j - &self.d) * &self.q
    }

    /// Port output map `BᵀQ`.
    pub fn output_map(&self) -> DMatrix<T> {
        self.b.transpose() * &self.q
    }

    /// Energy matrix `H = EᵀQ`, symmetrized.
    pub fn energy_matrix(&self) -> DMatrix<T> {
        let h = self.e.transpose() * &self.q;
        (&h + h.transpose()) * T::lit(0.5)
    }

    /// Maps states of this formulation to velocity coordinates.
    pub fn to_velocity_states(&self, x: &DMatrix<T>) -> DMatrix<T> {
        match &self.velocity_map {
            Some(t) => t * x,
            None => x.clone(),
        }
    }

    /// `T_f` as a dense matrix.
    pub fn velocity_map_dense(&self) -> DMatrix<T> {
        self.velocity_map.clone().unwrap_or_else(|| eye(self.n()))
    }

    /// Builds the requested formulation directly from the second-order model.
    pub fn from_model(css: &CoupledSecondOrderSystem<T>, formulation: Formulation) -> Result<Self> {
        let vel = to_ph_velocity(css)?;
        match formulation {
            Formulation::Velocity => Ok(vel),
            Formulation::Momentum => to_momentum(&vel),
            Formulation::CanonicalVelocity => {
                canonical_transform(&vel, &StateTransform::from_coupling(&css.r))
            }
            Formulation::CanonicalMomentum => {
                canonical_transform(&to_momentum(&vel)?, &StateTransform::from_coupling(&css.r))
            }
        }
    }

    /// Zero state of matching dimension.
    pub fn zero_state(&self) -> DVector<T> {
        DVector::zeros(self.n())
    }
}

/// Velocity formulation with state `x = (z, q, ż, q̇)`:
/// `E = diag(I, I, M_S, M_F/ρ_F)`, `Q = diag(K_S, K_F/ρ_F, I, I)`,
/// `D = diag(0, 0, D_S, 0)` and `J` with identity and `±R` blocks.
pub fn to_ph_velocity<T: Real>(css: &CoupledSecondOrderSystem<T>) -> Result<PhDescriptorSystem<T>> {
    css.validate()?;
    let (ns, nf) = (css.n_s(), css.n_f());
    let part = Partition { n_s: ns, n_f: nf };
    let nh = part.n_hat();
    let n = part.n();
    let inv_rho = T::one() / css.rho_f;

    let i_s = eye::<T>(ns);
    let i_f = eye::<T>(nf);
    let m_f = &css.m_f * inv_rho;
    let k_f = &css.k_f * inv_rho;
    let e = block_diag(&[&i_s, &i_f, &css.m_s, &m_f]);
    let q = block_diag(&[&css.k_s, &k_f, &i_s, &i_f]);
    let zs = DMatrix::zeros(ns, ns);
    let zf = DMatrix::zeros(nf, nf);
    let d = block_diag(&[&zs, &zf, &css.d_s, &zf]);

    let mut j = DMatrix::zeros(n, n);
    j.view_mut((0, nh), (nh, nh)).fill_with_identity();
    j.view_mut((nh, 0), (nh, nh)).copy_from(&(-eye::<T>(nh)));
    j.view_mut((nh, nh + ns), (ns, nf)).copy_from(&css.r);
    j.view_mut((nh + ns, nh), (nf, ns)).copy_from(&(-css.r.transpose()));

    let m = css.n_inputs();
    let mut b = DMatrix::zeros(n, m);
    b.view_mut((nh, 0), (ns, m)).copy_from(&css.input_map);

    // observation acts on (z, p) with p = q̇
    let rows = css.output_map.nrows();
    let mut observation = DMatrix::zeros(rows, n);
    observation
        .view_mut((0, 0), (rows, ns))
        .copy_from(&css.output_map.columns(0, ns));
    observation
        .view_mut((0, nh + ns), (rows, nf))
        .copy_from(&css.output_map.columns(ns, nf));

    Ok(PhDescriptorSystem {
        e,
        j,
        d,
        q,
        b,
        formulation: Formulation::Velocity,
        partition: part,
        observation,
        velocity_map: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{poisson, skew_residual};
    use crate::model::ModelParams;

    #[test]
    fn decoupled_undamped_j_is_poisson() {
        let css: CoupledSecondOrderSystem<f64> = ModelParams::small().undamped().build().unwrap();
        let ph = to_ph_velocity(&css.decoupled()).unwrap();
        assert_eq!(ph.j, poisson::<f64>(css.n_hat()));
        assert_eq!(skew_residual(&ph.j), 0.0);
        assert_eq!(ph.d.amax(), 0.0);
    }

    #[test]
    fn zero_state_has_zero_energy() {
        let css: CoupledSecondOrderSystem<f64> = ModelParams::small().build().unwrap();
        let ph = to_ph_velocity(&css).unwrap();
        assert_eq!(hamiltonian(&ph, &ph.zero_state()), 0.0);
    }

    #[test]
    fn formulation_names_round_trip() {
        for f in Formulation::ALL {
            assert_eq!(f.name().parse::<Formulation>().unwrap(), f);
        }
        assert!("symplectic".parse::<Formulation>().is_err());
    }
}
