use nalgebra::{ComplexField, DMatrix};
use phfsi_core::integrate::Trajectory;

use crate::error::{BenchError, Result};

/// Trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dt * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Euclidean norm of every column.
pub fn column_norms(m: &DMatrix<f64>) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

/// `∫‖e‖ dt / ∫‖x‖ dt` from sampled norms.
pub fn integrated_ratio(err: &[f64], reference: &[f64], dt: f64) -> Result<f64> {
    if err.len() != reference.len() {
        return Err(BenchError::Grid(format!("{} error samples vs {} reference samples", err.len(), reference.len())));
    }
    let den = trapezoid(reference, dt);
    if !(den > 0.0) {
        return Err(BenchError::Config("reference trajectory has zero energy norm".into()));
    }
    Ok(trapezoid(err, dt) / den)
}

/// `‖x‖_H = ‖Lᵀx‖₂` with `H = LLᵀ`.
#[derive(Debug, Clone)]
pub struct EnergyNorm {
    /// Transposed Cholesky factor `Lᵀ`.
    pub lt: DMatrix<f64>,
}

impl EnergyNorm {
    pub fn new(h: &DMatrix<f64>) -> Result<Self> {
        let chol = h
            .clone()
            .cholesky()
            .ok_or_else(|| phfsi_core::Error::Factorization("energy matrix is not positive definite".into()))?;
        Ok(Self { lt: chol.l().transpose() })
    }

    /// `Lᵀ X`; Euclidean norms of the result are energy norms of `X`.
    pub fn weigh(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.lt * x
    }

    pub fn norms(&self, x: &DMatrix<f64>) -> Vec<f64> {
        column_norms(&self.weigh(x))
    }
}

/// Relative error `∫‖x − Vx_r‖_H dt / ∫‖x‖_H dt` with the real part of the
/// reconstruction. `v` must map reduced states into the coordinates of
/// `full` (for other formulations, compose with the velocity map first).
pub fn relative_error<C>(full: &Trajectory<f64>, v: &DMatrix<C>, reduced: &Trajectory<C>, h: &DMatrix<f64>) -> Result<f64>
where
    C: ComplexField<RealField = f64>,
{
    if full.x.ncols() != reduced.x.ncols() || (full.dt - reduced.dt).abs() > 1e-12 * full.dt {
        return Err(BenchError::Grid(format!(
            "{} samples at dt = {:e} vs {} samples at dt = {:e}",
            full.x.ncols(),
            full.dt,
            reduced.x.ncols(),
            reduced.dt
        )));
    }
    if v.nrows() != full.x.nrows() || v.ncols() != reduced.x.nrows() {
        return Err(BenchError::Grid(format!(
            "basis is {}x{} for {} full and {} reduced states",
            v.nrows(),
            v.ncols(),
            full.x.nrows(),
            reduced.x.nrows()
        )));
    }
    let norm = EnergyNorm::new(h)?;
    let recon = (v * &reduced.x).map(|c| c.real());
    let err = norm.norms(&(&full.x - recon));
    integrated_ratio(&err, &norm.norms(&full.x), full.dt)
}
