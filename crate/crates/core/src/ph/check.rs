use nalgebra::{ComplexField, DMatrix, DVector};

use super::PhDescriptorSystem;
use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::linalg::{hermitian_residual, min_hermitian_eigenvalue, norm_inf, skew_residual};
use crate::scalar::Real;

/// Relative residuals of the three structural properties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhReport {
    /// `‖J + Jᴴ‖ / ‖J‖`.
    pub ph1: f64,
    /// `max(‖D − Dᴴ‖, −λ_min(D)) / ‖D‖`.
    pub ph2: f64,
    /// `‖EᴴQ − QᴴE‖ / ‖EᴴQ‖`.
    pub ph3: f64,
    /// Whether `EᴴQ` admits a Cholesky factorization.
    pub energy_definite: bool,
    pub tol: f64,
    pub pass: bool,
}

impl std::fmt::Display for PhReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "pH1 (J skew)          {:.3e}", self.ph1)?;
        writeln!(f, "pH2 (D sym psd)       {:.3e}", self.ph2)?;
        writeln!(f, "pH3 (E^T Q sym)       {:.3e}", self.ph3)?;
        writeln!(f, "E^T Q positive def.   {}", self.energy_definite)?;
        write!(
            f,
            "result at tol {:.1e}   {}",
            self.tol,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

/// Structural residuals of a (possibly complex) quadruple `(E, J, D, Q)`.
pub fn check_ph_matrices<C: ComplexField>(
    e: &DMatrix<C>,
    j: &DMatrix<C>,
    d: &DMatrix<C>,
    q: &DMatrix<C>,
    tol: f64,
) -> PhReport
where
    C::RealField: Real,
{
    let ph1 = skew_residual(j).as_f64();
    let d_norm = norm_inf(d).as_f64();
    let ph2 = if d_norm == 0.0 {
        0.0
    } else {
        let sym = hermitian_residual(d).as_f64();
        let neg = (-min_hermitian_eigenvalue(d).as_f64()).max(0.0) / d_norm;
        sym.max(neg)
    };
    let eq = e.adjoint() * q;
    let ph3 = hermitian_residual(&eq).as_f64();
    let half: C = C::from_real(nalgebra::convert(0.5));
    let sym = (&eq + eq.adjoint()) * half;
    let energy_definite = sym.cholesky().is_some();
    let pass = ph1 <= tol && ph2 <= tol && ph3 <= tol && energy_definite;
    PhReport {
        ph1,
        ph2,
        ph3,
        energy_definite,
        tol,
        pass,
    }
}

pub fn check_ph_properties<T: Real>(ph: &PhDescriptorSystem<T>, tol: f64) -> PhReport {
    check_ph_matrices(&ph.e, &ph.j, &ph.d, &ph.q, tol)
}

/// `H(x) = ½ xᵀEᵀQx`.
pub fn hamiltonian<T: Real>(ph: &PhDescriptorSystem<T>, x: &DVector<T>) -> T {
    let ex = &ph.e * x;
    let qx = &ph.q * x;
    ex.dot(&qx) * T::lit(0.5)
}

/// Largest violation of `H(t₁) − H(t₀) ≤ ∫ yᵀu dt` over all subintervals of
/// the time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipationReport {
    /// Worst `ΔH − ∫yᵀu` over any run of consecutive steps (≤ 0 is fine).
    pub max_violation: f64,
    pub max_abs_energy: f64,
    /// `max(max_violation, 0) / max|H|`.
    pub relative_violation: f64,
    pub steps: usize,
}

/// Checks the dissipation inequality along an IMR trajectory with midpoint
/// quadrature `∫ yᵀu ≈ Δt·ȳᵀu(t_k + Δt/2)`, `ȳ = (y_k + y_{k+1})/2`.
pub fn check_dissipation<T: Real>(traj: &Trajectory<T>, ph: &PhDescriptorSystem<T>) -> Result<DissipationReport> {
    let k = traj.steps();
    if traj.x.nrows() != ph.n() {
        return Err(Error::Dimension(format!(
            "trajectory has {} states, system has {}",
            traj.x.nrows(),
            ph.n()
        )));
    }
    if traj.u_mid.ncols() != k || traj.y.ncols() != k + 1 {
        return Err(Error::Dimension("input/output records do not match the time grid".into()));
    }
    let h = ph.energy_matrix();
    let energy: Vec<f64> = (0..=k)
        .map(|i| {
            let x = traj.x.column(i);
            (x.dot(&(&h * x)) * T::lit(0.5)).as_f64()
        })
        .collect();
    let half = T::lit(0.5);
    let mut best = f64::NEG_INFINITY;
    let mut run = 0.0;
    for i in 0..k {
        let ybar = (traj.y.column(i) + traj.y.column(i + 1)) * half;
        let supply = ybar.dot(&traj.u_mid.column(i)).as_f64() * traj.dt;
        let v = energy[i + 1] - energy[i] - supply;
        run = if run > 0.0 { run + v } else { v };
        best = best.max(run);
    }
    let max_abs = energy.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let rel = if max_abs > 0.0 { best.max(0.0) / max_abs } else { best.max(0.0) };
    Ok(DissipationReport {
        max_violation: if k == 0 { 0.0 } else { best },
        max_abs_energy: max_abs,
        relative_violation: rel,
        steps: k,
    })
}
