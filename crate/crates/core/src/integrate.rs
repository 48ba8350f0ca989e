//! Fixed-step implicit midpoint integration of `E ẋ = A x + B u`.

use std::time::{Duration, Instant};

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::basis::{Provenance, SnapshotMatrix};
use crate::error::{Error, Result};
use crate::ph::PhDescriptorSystem;
use crate::scalar::Real;

/// Time-dependent input `u(t) ∈ ℝᵐ`.
pub trait InputSignal: Sync {
    fn n_inputs(&self) -> usize;
    fn eval(&self, t: f64, out: &mut [f64]);
}

/// `u(t) = û·sin(2πft)` on a single input channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineInput {
    pub amplitude: f64,
    pub frequency: f64,
}

impl SineInput {
    /// Frequency band of the benchmark excitations (Hz).
    pub const BAND: (f64, f64) = (82.0, 320.0);

    pub fn new(amplitude: f64, frequency: f64) -> Result<Self> {
        if !(amplitude > 0.0) || !(frequency > 0.0) || !frequency.is_finite() {
            return Err(Error::Config(format!(
                "sine input needs positive amplitude and frequency, got {amplitude} and {frequency}"
            )));
        }
        Ok(Self { amplitude, frequency })
    }

    pub fn in_band(&self) -> bool {
        (Self::BAND.0..=Self::BAND.1).contains(&self.frequency)
    }
}

impl InputSignal for SineInput {
    fn n_inputs(&self) -> usize {
        1
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        out[0] = self.amplitude * (2.0 * std::f64::consts::PI * self.frequency * t).sin();
    }
}

/// `u ≡ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZeroInput(pub usize);

impl InputSignal for ZeroInput {
    fn n_inputs(&self) -> usize {
        self.0
    }

    fn eval(&self, _t: f64, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Input given by a closure.
pub struct FnInput<F> {
    pub m: usize,
    pub f: F,
}

impl<F: Fn(f64, &mut [f64]) + Sync> InputSignal for FnInput<F> {
    fn n_inputs(&self) -> usize {
        self.m
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        (self.f)(t, out)
    }
}

/// Uniform grid `t_k = k·Δt`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub dt: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t_end >= 0.0) || !dt.is_finite() || !t_end.is_finite() {
            return Err(Error::Integration {
                dt,
                reason: format!("invalid step or horizon (t_end = {t_end})"),
            });
        }
        let steps = (t_end / dt).round() as usize;
        if (steps as f64 * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
            return Err(Error::Integration {
                dt,
                reason: format!("horizon {t_end} is not a multiple of the step"),
            });
        }
        Ok(Self { dt, steps })
    }

    pub fn t_end(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        self.dt * k as f64
    }

    /// `m × steps` matrix of `u(t_k + Δt/2)`.
    pub fn midpoint_inputs<T: Real>(&self, input: &dyn InputSignal) -> DMatrix<T> {
        self.sample(input, 0.5)
    }

    /// `m × (steps + 1)` matrix of `u(t_k)`.
    pub fn grid_inputs<T: Real>(&self, input: &dyn InputSignal) -> DMatrix<T> {
        let m = input.n_inputs();
        let mut buf = vec![0.0; m];
        DMatrix::from_fn(m, self.steps + 1, |i, k| {
            if i == 0 {
                input.eval(self.time(k), &mut buf);
            }
            T::lit(buf[i])
        })
    }

    fn sample<T: Real>(&self, input: &dyn InputSignal, offset: f64) -> DMatrix<T> {
        let m = input.n_inputs();
        let mut out = DMatrix::zeros(m, self.steps);
        let mut buf = vec![0.0; m];
        for k in 0..self.steps {
            input.eval(self.dt * (k as f64 + offset), &mut buf);
            for i in 0..m {
                out[(i, k)] = T::lit(buf[i]);
            }
        }
        out
    }
}

/// Linear descriptor system `E ẋ = A x + B u`, `y = C x`.
#[derive(Debug, Clone)]
pub struct Descriptor<C: ComplexField> {
    pub e: DMatrix<C>,
    pub a: DMatrix<C>,
    pub b: DMatrix<C>,
    pub c: DMatrix<C>,
}

impl<C: ComplexField> Descriptor<C> {
    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.e.shape() != (n, n) || self.a.shape() != (n, n) || self.b.nrows() != n || self.c.ncols() != n {
            return Err(Error::Dimension("descriptor operators have inconsistent sizes".into()));
        }
        Ok(())
    }
}

impl<T: Real> PhDescriptorSystem<T> {
    /// `(E, (J − D)Q, B, BᵀQ)`.
    pub fn descriptor(&self) -> Descriptor<T> {
        Descriptor {
            e: self.e.clone(),
            a: self.a(),
            b: self.b.clone(),
            c: self.output_map(),
        }
    }
}

/// Recorded IMR solution.
#[derive(Debug, Clone)]
pub struct Trajectory<C: ComplexField> {
    pub dt: f64,
    pub t_end: f64,
    /// States, one column per grid point; column 0 is the initial condition.
    pub x: DMatrix<C>,
    /// Inputs at the grid points.
    pub u: DMatrix<C::RealField>,
    /// Inputs at the step midpoints used by the integrator.
    pub u_mid: DMatrix<C::RealField>,
    /// Outputs `y_k = C x_k`.
    pub y: DMatrix<C>,
    pub wall_time: Duration,
}

impl<C: ComplexField> Trajectory<C> {
    pub fn steps(&self) -> usize {
        self.x.ncols().saturating_sub(1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.x.ncols()).map(|k| self.dt * k as f64).collect()
    }
}

/// Divergence guard for long runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Abort once `‖x_k‖₂` exceeds this value.
    pub divergence_limit: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            divergence_limit: Some(1e12),
        }
    }
}

/// Implicit midpoint rule
/// `(E − Δt/2·A) x_{k+1} = (E + Δt/2·A) x_k + Δt·B·u(t_k + Δt/2)`.
///
/// The left operator is LU-factorized once.
pub fn simulate<C>(
    sys: &Descriptor<C>,
    input: &dyn InputSignal,
    x0: &DVector<C>,
    dt: f64,
    t_end: f64,
) -> Result<Trajectory<C>>
where
    C: ComplexField,
    C::RealField: Real,
{
    simulate_with(sys, input, x0, TimeGrid::new(dt, t_end)?, SimOptions::default())
}

pub fn simulate_with<C>(
    sys: &Descriptor<C>,
    input: &dyn InputSignal,
    x0: &DVector<C>,
    grid: TimeGrid,
    opts: SimOptions,
) -> Result<Trajectory<C>>
where
    C: ComplexField,
    C::RealField: Real,
{
    sys.validate()?;
    let n = sys.n();
    if x0.len() != n || input.n_inputs() != sys.b.ncols() {
        return Err(Error::Dimension(format!(
            "initial state of length {} / {} inputs for a system with N = {} and m = {}",
            x0.len(),
            input.n_inputs(),
            n,
            sys.b.ncols()
        )));
    }
    let start = Instant::now();
    let stepper = Stepper::new(sys, grid.dt)?;
    let u_mid: DMatrix<C::RealField> = grid.midpoint_inputs(input);
    let u: DMatrix<C::RealField> = grid.grid_inputs(input);
    let mut x = DMatrix::zeros(n, grid.steps + 1);
    x.set_column(0, x0);
    let mut cur = x0.clone();
    let mut rhs = DVector::zeros(n);
    let u_c: DMatrix<C> = u_mid.map(C::from_real);
    let limit = opts.divergence_limit.unwrap_or(f64::INFINITY);
    for k in 0..grid.steps {
        stepper.step(&cur, &u_c.column(k).into_owned(), &mut rhs);
        std::mem::swap(&mut cur, &mut rhs);
        let norm = cur.norm().as_f64();
        if !(norm <= limit) {
            return Err(Error::Diverged { step: k + 1, norm });
        }
        x.set_column(k + 1, &cur);
    }
    let y = &sys.c * &x;
    Ok(Trajectory {
        dt: grid.dt,
        t_end: grid.t_end(),
        x,
        u,
        u_mid,
        y,
        wall_time: start.elapsed(),
    })
}

/// Factorized IMR step.
struct Stepper<C: ComplexField> {
    lu: nalgebra::LU<C, nalgebra::Dyn, nalgebra::Dyn>,
    plus: DMatrix<C>,
    input: DMatrix<C>,
}

impl<C> Stepper<C>
where
    C: ComplexField,
    C::RealField: Real,
{
    fn new(sys: &Descriptor<C>, dt: f64) -> Result<Self> {
        let h = C::from_real(<C::RealField as Real>::lit(0.5 * dt));
        let scaled = &sys.a * h.clone();
        let minus = &sys.e - &scaled;
        let plus = &sys.e + &scaled;
        let lu = minus.lu();
        if !lu.is_invertible() {
            return Err(Error::Integration {
                dt,
                reason: "E − Δt/2·A is singular: 2/Δt is an eigenvalue of the pencil (A, E)".into(),
            });
        }
        let input = &sys.b * C::from_real(<C::RealField as Real>::lit(dt));
        Ok(Self { lu, plus, input })
    }

    fn step(&self, x: &DVector<C>, u: &DVector<C>, out: &mut DVector<C>) {
        out.gemv(C::one(), &self.plus, x, C::zero());
        out.gemv(C::one(), &self.input, u, C::one());
        self.lu.solve_mut(out);
    }
}

/// Explicit one-step map `x_{k+1} = S x_k + G u_{k+½}` of the IMR, for
/// propagating many trajectories at once with matrix–matrix products.
#[derive(Debug, Clone)]
pub struct StepMap<C: ComplexField> {
    pub s: DMatrix<C>,
    pub g: DMatrix<C>,
    pub dt: f64,
}

impl<C> StepMap<C>
where
    C: ComplexField,
    C::RealField: Real,
{
    pub fn new(sys: &Descriptor<C>, dt: f64) -> Result<Self> {
        sys.validate()?;
        let st = Stepper::new(sys, dt)?;
        let mut s = st.plus.clone();
        st.lu.solve_mut(&mut s);
        let mut g = st.input.clone();
        st.lu.solve_mut(&mut g);
        Ok(Self { s, g, dt })
    }

    /// Advances every column of `x` by one step; `u` holds one input column
    /// per trajectory.
    pub fn advance(&self, x: &DMatrix<C>, u: &DMatrix<C>) -> DMatrix<C> {
        let mut next = &self.s * x;
        next.gemm(C::one(), &self.g, u, C::one());
        next
    }
}

/// States of all given sine trajectories (zero initial state) concatenated
/// column-wise, with per-column provenance.
pub fn snapshot_set<T: Real>(
    ph: &PhDescriptorSystem<T>,
    frequencies: &[f64],
    amplitude: f64,
    dt: f64,
    t_end: f64,
) -> Result<SnapshotMatrix<T>> {
    if frequencies.is_empty() {
        return Err(Error::Config("snapshot set needs at least one frequency".into()));
    }
    let grid = TimeGrid::new(dt, t_end)?;
    let desc = ph.descriptor();
    let cols = grid.steps + 1;
    let mut x = DMatrix::zeros(ph.n(), cols * frequencies.len());
    let mut provenance = Vec::with_capacity(x.ncols());
    for (i, &f) in frequencies.iter().enumerate() {
        let input = SineInput::new(amplitude, f)?;
        if !input.in_band() {
            log::warn!("snapshot frequency {f} Hz lies outside the benchmark band");
        }
        let traj = simulate_with(&desc, &input, &ph.zero_state(), grid, SimOptions::default())?;
        x.columns_mut(i * cols, cols).copy_from(&traj.x);
        provenance.extend((0..cols).map(|k| Provenance { frequency: f, step: k }));
    }
    SnapshotMatrix::new(x, provenance, ph.partition)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eye;

    fn scalar(lambda: f64) -> Descriptor<f64> {
        Descriptor {
            e: eye(1),
            a: DMatrix::from_element(1, 1, lambda),
            b: DMatrix::zeros(1, 1),
            c: eye(1),
        }
    }

    #[test]
    fn scalar_step_matches_closed_form() {
        let tr = simulate(&scalar(-1.0), &ZeroInput(1), &DVector::from_element(1, 1.0), 0.1, 0.1).unwrap();
        assert_eq!(tr.x.ncols(), 2);
        assert!((tr.x[(0, 1)] - 0.95 / 1.05).abs() < 1e-15);
    }

    #[test]
    fn frozen_dynamics_stay_put() {
        let sys = Descriptor {
            e: eye::<f64>(3),
            a: DMatrix::zeros(3, 3),
            b: DMatrix::zeros(3, 1),
            c: eye(3),
        };
        let x0 = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let tr = simulate(&sys, &ZeroInput(1), &x0, 1e-3, 0.05).unwrap();
        for k in 0..tr.x.ncols() {
            assert_eq!(tr.x.column(k), x0.column(0));
        }
    }

    #[test]
    fn singular_step_operator_is_reported() {
        // E − Δt/2·A = 1 − 0.5·2 = 0
        let err = simulate(&scalar(2.0), &ZeroInput(1), &DVector::from_element(1, 1.0), 1.0, 1.0);
        assert!(matches!(err, Err(Error::Integration { .. })));
    }

    #[test]
    fn horizon_must_be_a_step_multiple() {
        assert!(TimeGrid::new(1e-4, 0.1).is_ok());
        assert_eq!(TimeGrid::new(1e-4, 0.1).unwrap().steps, 1000);
        assert!(TimeGrid::new(0.3, 1.0).is_err());
        assert!(TimeGrid::new(0.0, 1.0).is_err());
    }

    #[test]
    fn divergence_is_flagged() {
        let tr = simulate(&scalar(50.0), &ZeroInput(1), &DVector::from_element(1, 1.0), 1e-2, 20.0);
        assert!(matches!(tr, Err(Error::Diverged { .. })));
    }

    #[test]
    fn step_map_agrees_with_factorized_steps() {
        let sys = Descriptor {
            e: DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]),
            a: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -3.0, -0.2]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            c: eye(2),
        };
        let input = SineInput::new(1.0, 5.0).unwrap();
        let tr = simulate(&sys, &input, &DVector::zeros(2), 1e-2, 0.5).unwrap();
        let map = StepMap::new(&sys, 1e-2).unwrap();
        let mut x = DMatrix::zeros(2, 1);
        for k in 0..tr.steps() {
            x = map.advance(&x, &tr.u_mid.columns(k, 1).into_owned());
        }
        assert!((x.column(0) - tr.x.column(tr.steps())).norm() < 1e-12);
    }
}
