use nalgebra::DMatrix;
use phfsi_core::basis::SnapshotMatrix;
use phfsi_core::integrate::{SineInput, StepMap, TimeGrid};
use phfsi_core::ph::{Formulation, PhDescriptorSystem};

use crate::config::{Frequencies, SweepConfig};
use crate::error::{BenchError, Result};

/// Steps stacked per correlation update.
const GRAM_BATCH: usize = 32;

/// Full-order data shared by every combination: evaluation trajectories and
/// snapshot correlations, all in velocity coordinates.
#[derive(Debug, Clone)]
pub struct FomData {
    pub grid: TimeGrid,
    pub frequencies: Frequencies,
    /// One block of `steps + 1` columns per evaluation frequency.
    pub eval_states: DMatrix<f64>,
    /// `X̂X̂ᵀ` of the first `c` snapshot trajectories, keyed by `c` ascending.
    pub grams: Vec<(usize, DMatrix<f64>)>,
    /// Midpoint inputs of the evaluation runs, one row per frequency.
    pub eval_inputs: DMatrix<f64>,
}

/// `(trajectories × steps)` midpoint inputs of sine excitations.
pub fn midpoint_inputs(grid: &TimeGrid, amplitude: f64, frequencies: &[f64]) -> Result<DMatrix<f64>> {
    let mut u = DMatrix::zeros(frequencies.len(), grid.steps);
    for (i, &f) in frequencies.iter().enumerate() {
        let row: DMatrix<f64> = grid.midpoint_inputs(&SineInput::new(amplitude, f)?);
        u.row_mut(i).copy_from(&row.row(0));
    }
    Ok(u)
}

impl FomData {
    /// Integrates all snapshot and evaluation runs together from rest.
    pub fn generate(ph: &PhDescriptorSystem<f64>, cfg: &SweepConfig, frequencies: Frequencies) -> Result<Self> {
        if ph.formulation != Formulation::Velocity || ph.n_inputs() != 1 {
            return Err(BenchError::Config("full-order data needs the single-input velocity formulation".into()));
        }
        let grid = TimeGrid::new(cfg.dt, cfg.t_end)?;
        let counts = cfg.sorted_counts();
        let n_snap = *counts.last().unwrap_or(&0);
        if frequencies.snapshot.len() < n_snap {
            return Err(BenchError::Config(format!(
                "{} snapshot frequencies for a trajectory count of {n_snap}",
                frequencies.snapshot.len()
            )));
        }
        let all: Vec<f64> = frequencies.snapshot[..n_snap].iter().chain(&frequencies.eval).copied().collect();
        let u = midpoint_inputs(&grid, cfg.amplitude, &all)?;
        let step = StepMap::new(&ph.descriptor(), grid.dt)?;

        let n = ph.n();
        let n_eval = frequencies.eval.len();
        let k1 = grid.steps + 1;
        let mut eval_states = DMatrix::zeros(n, n_eval * k1);

        let mut bounds = vec![0];
        bounds.extend(counts.iter().copied());
        let groups: Vec<(usize, usize)> = bounds.windows(2).map(|w| (w[0], w[1] - w[0])).collect();
        let mut partial = vec![DMatrix::<f64>::zeros(n, n); groups.len()];
        let mut pending: Vec<DMatrix<f64>> = Vec::with_capacity(GRAM_BATCH);

        let flush = |pending: &mut Vec<DMatrix<f64>>, partial: &mut [DMatrix<f64>]| {
            if pending.is_empty() {
                return;
            }
            for (g, &(start, width)) in groups.iter().enumerate() {
                if width == 0 {
                    continue;
                }
                let mut buf = DMatrix::zeros(n, width * pending.len());
                for (b, x) in pending.iter().enumerate() {
                    buf.columns_mut(b * width, width).copy_from(&x.columns(start, width));
                }
                partial[g].gemm(1.0, &buf, &buf.transpose(), 1.0);
            }
            pending.clear();
        };

        let mut x = DMatrix::zeros(n, all.len());
        for k in 0..=grid.steps {
            if k > 0 {
                let uk = DMatrix::from_iterator(1, u.nrows(), u.column(k - 1).iter().copied());
                x = step.advance(&x, &uk);
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(phfsi_core::Error::Diverged { step: k, norm: f64::INFINITY }.into());
                }
            }
            for j in 0..n_eval {
                eval_states.set_column(j * k1 + k, &x.column(n_snap + j));
            }
            // the rest state adds nothing to the correlation
            if k > 0 && n_snap > 0 {
                pending.push(x.columns(0, n_snap).into_owned());
                if pending.len() == GRAM_BATCH {
                    flush(&mut pending, &mut partial);
                }
            }
        }
        flush(&mut pending, &mut partial);

        let mut grams = Vec::with_capacity(counts.len());
        let mut acc = DMatrix::<f64>::zeros(n, n);
        for (c, g) in counts.iter().zip(partial) {
            acc += g;
            grams.push((*c, acc.clone()));
        }
        Ok(Self {
            grid,
            eval_inputs: u.rows(n_snap, n_eval).into_owned(),
            frequencies,
            eval_states,
            grams,
        })
    }

    pub fn samples(&self) -> usize {
        self.grid.steps + 1
    }

    /// Snapshot set of `count` trajectories in the coordinates `x_f = T⁻¹x`,
    /// given `T⁻¹` (`None` for velocity coordinates).
    pub fn snapshots(&self, count: usize, to_formulation: Option<&DMatrix<f64>>, ph: &PhDescriptorSystem<f64>) -> Result<SnapshotMatrix<f64>> {
        let g = self
            .grams
            .iter()
            .find(|(c, _)| *c == count)
            .map(|(_, g)| g)
            .ok_or_else(|| BenchError::Config(format!("no snapshot data for {count} trajectories")))?;
        let g = match to_formulation {
            Some(t) => t * g * t.transpose(),
            None => g.clone(),
        };
        Ok(SnapshotMatrix::from_gram(g, count * self.samples(), ph.partition)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use phfsi_core::integrate::{simulate, snapshot_set};
    use phfsi_core::model::ModelParams;

    fn small_cfg() -> SweepConfig {
        SweepConfig {
            trajectory_counts: vec![1, 3],
            eval_count: 2,
            t_end: 0.01,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn batched_runs_match_single_runs_and_grams_are_prefix_sums() {
        let css = ModelParams::small().build::<f64>().unwrap();
        let ph = PhDescriptorSystem::from_model(&css, Formulation::Velocity).unwrap();
        let cfg = small_cfg();
        let freqs = Frequencies::draw(3, 3, 2);
        let fom = FomData::generate(&ph, &cfg, freqs.clone()).unwrap();

        let k1 = fom.samples();
        for (j, &f) in freqs.eval.iter().enumerate() {
            let tr = simulate(&ph.descriptor(), &SineInput::new(1.0, f).unwrap(), &ph.zero_state(), 1e-4, 0.01).unwrap();
            let got = fom.eval_states.columns(j * k1, k1);
            assert!((got - &tr.x).amax() <= 1e-10 * tr.x.amax());
        }
        for (c, g) in &fom.grams {
            let s = snapshot_set(&ph, &freqs.snapshot[..*c], 1.0, 1e-4, 0.01).unwrap();
            let x = s.matrix().unwrap();
            let oracle = x * x.transpose();
            assert!((g - &oracle).amax() <= 1e-10 * oracle.amax(), "count {c}");
        }
        let snaps = fom.snapshots(3, None, &ph).unwrap();
        assert_eq!(snaps.columns(), 3 * k1);
        assert!(fom.snapshots(2, None, &ph).is_err());
    }
}
