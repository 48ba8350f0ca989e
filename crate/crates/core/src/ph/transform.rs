use nalgebra::DMatrix;

use super::{Formulation, PhDescriptorSystem};
use crate::error::{Error, Result};
use crate::linalg::{eye, right_solve_spd};
use crate::scalar::Real;

/// Coupling-dependent change of variables `x = P x_c` and the block swap `T`.
#[derive(Debug, Clone)]
pub struct StateTransform<T: Real> {
    pub p: DMatrix<T>,
    pub p_inv: DMatrix<T>,
    /// `[[0, I], [I, 0]]`.
    pub t: DMatrix<T>,
}

impl<T: Real> StateTransform<T> {
    /// `P = [[I, 0, 0, R/2], [0, I, −Rᵀ/2, 0], [0, 0, I, 0], [0, 0, 0, I]]`;
    /// `P⁻¹` flips the signs of the `R` blocks.
    pub fn from_coupling(r: &DMatrix<T>) -> Self {
        let (ns, nf) = r.shape();
        let nh = ns + nf;
        let n = 2 * nh;
        let half = T::lit(0.5);
        let rh = r * half;
        let rth = r.transpose() * half;
        let mut p = eye::<T>(n);
        let mut p_inv = eye::<T>(n);
        p.view_mut((0, nh + ns), (ns, nf)).copy_from(&rh);
        p.view_mut((ns, nh), (nf, ns)).copy_from(&(-&rth));
        p_inv.view_mut((0, nh + ns), (ns, nf)).copy_from(&(-&rh));
        p_inv.view_mut((ns, nh), (nf, ns)).copy_from(&rth);
        let mut t = DMatrix::zeros(n, n);
        t.view_mut((0, nh), (nh, nh)).fill_with_identity();
        t.view_mut((nh, 0), (nh, nh)).fill_with_identity();
        Self { p, p_inv, t }
    }

    /// `‖P·P⁻¹ − I‖ / ‖P‖` in the max-row-sum norm.
    pub fn inverse_residual(&self) -> T {
        let n = self.p.nrows();
        let r = &self.p * &self.p_inv - eye::<T>(n);
        crate::linalg::norm_inf(&r) / crate::linalg::norm_inf(&self.p)
    }
}

/// Momentum formulation `x_m = E x`: `E' = I`, `Q' = Q E⁻¹`, `J`, `D`, `B`
/// unchanged.
pub fn to_momentum<T: Real>(ph: &PhDescriptorSystem<T>) -> Result<PhDescriptorSystem<T>> {
    if ph.formulation != Formulation::Velocity {
        return Err(Error::Config(format!(
            "momentum form is built from the velocity form, got {}",
            ph.formulation
        )));
    }
    let n = ph.n();
    let q = right_solve_spd(&ph.q, &ph.e)?;
    let e_inv = ph
        .e
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization("E is not symmetric positive definite".into()))?
        .inverse();
    let observation = right_solve_spd(&ph.observation, &ph.e)?;
    Ok(PhDescriptorSystem {
        e: eye(n),
        j: ph.j.clone(),
        d: ph.d.clone(),
        q,
        b: ph.b.clone(),
        formulation: Formulation::Momentum,
        partition: ph.partition,
        observation,
        velocity_map: Some(e_inv),
    })
}

/// Canonical variant `x = P x_c`:
/// `PᵀEP ẋ_c = Pᵀ(J − D)P · P⁻¹QP x_c + PᵀB u`.
pub fn canonical_transform<T: Real>(
    ph: &PhDescriptorSystem<T>,
    xform: &StateTransform<T>,
) -> Result<PhDescriptorSystem<T>> {
    let formulation = match ph.formulation {
        Formulation::Velocity => Formulation::CanonicalVelocity,
        Formulation::Momentum => Formulation::CanonicalMomentum,
        other => {
            return Err(Error::Config(format!(
                "canonical transform expects the velocity or momentum form, got {other}"
            )))
        }
    };
    if xform.p.nrows() != ph.n() {
        return Err(Error::Dimension(format!(
            "transform of size {} applied to a system of size {}",
            xform.p.nrows(),
            ph.n()
        )));
    }
    let p = &xform.p;
    let pt = p.transpose();
    Ok(PhDescriptorSystem {
        e: &pt * &ph.e * p,
        j: &pt * &ph.j * p,
        d: &pt * &ph.d * p,
        q: &xform.p_inv * &ph.q * p,
        b: &pt * &ph.b,
        formulation,
        partition: ph.partition,
        observation: &ph.observation * p,
        velocity_map: Some(ph.velocity_map_dense() * p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::poisson;
    use crate::model::{CoupledSecondOrderSystem, ModelParams};
    use crate::ph::to_ph_velocity;

    fn small() -> CoupledSecondOrderSystem<f64> {
        ModelParams::small().build().unwrap()
    }

    #[test]
    fn p_inverse_is_exact() {
        let css = small();
        let x = StateTransform::from_coupling(&css.r);
        assert!(x.inverse_residual() <= 1e-12);
    }

    #[test]
    fn decoupled_transform_is_identity() {
        let css = small().decoupled();
        let x = StateTransform::from_coupling(&css.r);
        assert_eq!(x.p, eye::<f64>(2 * css.n_hat()));
        let ph = to_ph_velocity(&css).unwrap();
        let c = canonical_transform(&ph, &x).unwrap();
        assert_eq!(c.e, ph.e);
        assert_eq!(c.j, ph.j);
        assert_eq!(c.q, ph.q);
    }

    #[test]
    fn transformed_interconnection_is_poisson() {
        let css = small();
        let ph = to_ph_velocity(&css).unwrap();
        let x = StateTransform::from_coupling(&css.r);
        let c = canonical_transform(&ph, &x).unwrap();
        let diff = &c.j - poisson::<f64>(css.n_hat());
        assert!(diff.amax() <= 1e-12, "max deviation {}", diff.amax());
    }

    #[test]
    fn momentum_of_identity_mass_keeps_operators() {
        let css = small();
        let mut ph = to_ph_velocity(&css).unwrap();
        ph.e = eye(ph.n());
        let m = to_momentum(&ph).unwrap();
        assert_eq!(m.q, ph.q);
        assert_eq!(m.j, ph.j);
        assert_eq!(m.b, ph.b);
    }

    #[test]
    fn wrong_source_formulation_is_rejected() {
        let css = small();
        let ph = to_ph_velocity(&css).unwrap();
        let m = to_momentum(&ph).unwrap();
        assert!(to_momentum(&m).is_err());
        let x = StateTransform::from_coupling(&css.r);
        let c = canonical_transform(&ph, &x).unwrap();
        assert!(canonical_transform(&c, &x).is_err());
    }
}
