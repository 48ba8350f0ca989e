use phfsi_core::basis::{BasisMethod, DEFAULT_EXPANSION_HZ};
use phfsi_core::integrate::SineInput;
use phfsi_core::ph::Formulation;
use phfsi_core::reduce::Projection;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

/// Minimum distance in Hz between an evaluation frequency and every other
/// drawn frequency.
pub const MIN_FREQUENCY_GAP: f64 = 0.5;

/// What the sweep evaluates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub formulations: Vec<Formulation>,
    pub projections: Vec<Projection>,
    pub methods: Vec<BasisMethod>,
    pub sizes: Vec<usize>,
    pub trajectory_counts: Vec<usize>,
    /// Number of evaluation frequencies.
    pub eval_count: usize,
    pub seed: u64,
    pub amplitude: f64,
    pub dt: f64,
    pub t_end: f64,
    pub krylov_expansion_hz: Vec<f64>,
    /// Timing repetitions per speed-up measurement.
    pub speedup_reps: usize,
    /// Formulation whose pH ROMs are timed.
    pub speedup_formulation: Formulation,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            formulations: Formulation::ALL.to_vec(),
            projections: Projection::ALL.to_vec(),
            methods: BasisMethod::ALL.to_vec(),
            sizes: vec![4, 8, 12, 16, 24, 32, 48, 64, 96, 128, 160],
            trajectory_counts: vec![5, 10, 25, 50, 75, 100],
            eval_count: 5,
            seed: 20_211_104,
            amplitude: 1.0,
            dt: 1e-4,
            t_end: 0.1,
            krylov_expansion_hz: DEFAULT_EXPANSION_HZ.to_vec(),
            speedup_reps: 5,
            speedup_formulation: Formulation::Momentum,
        }
    }
}

impl SweepConfig {
    /// A single combination; handy for smoke runs.
    pub fn singleton(formulation: Formulation, projection: Projection, method: BasisMethod, n: usize, count: usize) -> Self {
        Self {
            formulations: vec![formulation],
            projections: vec![projection],
            methods: vec![method],
            sizes: vec![n],
            trajectory_counts: vec![count],
            ..Self::default()
        }
    }

    /// Checks the invariants against a full model of size `n_full`.
    pub fn validate(&self, n_full: usize) -> Result<()> {
        let bad = |msg: String| Err(BenchError::Config(msg));
        if self.formulations.is_empty() || self.projections.is_empty() || self.methods.is_empty() {
            return bad("formulations, projections and methods must be non-empty".into());
        }
        if self.sizes.is_empty() || self.trajectory_counts.is_empty() {
            return bad("sizes and trajectory counts must be non-empty".into());
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| n == 0 || n > n_full) {
            return bad(format!("reduced size {n} outside 1..={n_full}"));
        }
        if self.trajectory_counts.contains(&0) {
            return bad("trajectory counts must be at least 1".into());
        }
        if self.eval_count == 0 {
            return bad("need at least one evaluation frequency".into());
        }
        if self.speedup_reps < 3 {
            return bad(format!("speed-up needs at least 3 repetitions, got {}", self.speedup_reps));
        }
        if !(self.amplitude.is_finite() && self.dt > 0.0 && self.t_end > 0.0) {
            return bad("amplitude, dt and t_end must be finite and positive".into());
        }
        if self.krylov_expansion_hz.is_empty() {
            return bad("Krylov needs at least one expansion frequency".into());
        }
        Ok(())
    }

    /// Sizes ascending without duplicates.
    pub fn sorted_sizes(&self) -> Vec<usize> {
        let mut s = self.sizes.clone();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Trajectory counts ascending without duplicates.
    pub fn sorted_counts(&self) -> Vec<usize> {
        let mut c = self.trajectory_counts.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Middle entry of the size list.
    pub fn mid_size(&self) -> usize {
        let s = self.sorted_sizes();
        s[s.len() / 2]
    }

    pub fn max_count(&self) -> usize {
        self.trajectory_counts.iter().copied().max().unwrap_or(0)
    }
}

/// Excitation frequencies of one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Frequencies {
    /// Snapshot trajectories; a count `c` uses the first `c`.
    pub snapshot: Vec<f64>,
    pub eval: Vec<f64>,
}

impl Frequencies {
    /// Uniform draws from the tuning band. Evaluation frequencies are redrawn
    /// until they keep [`MIN_FREQUENCY_GAP`] to every other frequency.
    pub fn draw(seed: u64, snapshots: usize, eval: usize) -> Self {
        let (lo, hi) = SineInput::BAND;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let snapshot: Vec<f64> = (0..snapshots).map(|_| rng.gen_range(lo..hi)).collect();
        let mut picked: Vec<f64> = Vec::with_capacity(eval);
        while picked.len() < eval {
            let f = rng.gen_range(lo..hi);
            let clear = snapshot.iter().chain(&picked).all(|g| (f - g).abs() >= MIN_FREQUENCY_GAP);
            if clear {
                picked.push(f);
            }
        }
        Self { snapshot, eval: picked }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = SweepConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert!(text.contains("\"POD-State\"") && text.contains("\"energy-stable\""));
        let back: SweepConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.mid_size(), 32);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<SweepConfig>("sizez = [4]").is_err());
        let partial: SweepConfig = toml::from_str("sizes = [8, 4]").unwrap();
        assert_eq!(partial.sorted_sizes(), vec![4, 8]);
        assert_eq!(partial.eval_count, 5);
    }

    #[test]
    fn validation_catches_bad_values() {
        let mut cfg = SweepConfig::default();
        assert!(cfg.validate(996).is_ok());
        assert!(cfg.validate(100).is_err());
        cfg.trajectory_counts.push(0);
        assert!(cfg.validate(996).is_err());
        let mut cfg = SweepConfig::default();
        cfg.speedup_reps = 2;
        assert!(cfg.validate(996).is_err());
    }

    #[test]
    fn evaluation_frequencies_avoid_snapshot_frequencies() {
        let f = Frequencies::draw(7, 100, 5);
        assert_eq!(f.snapshot.len(), 100);
        assert_eq!(f.eval.len(), 5);
        for e in &f.eval {
            assert!((82.0..320.0).contains(e));
            assert!(f.snapshot.iter().all(|s| (s - e).abs() >= MIN_FREQUENCY_GAP));
        }
        assert_eq!(f, Frequencies::draw(7, 100, 5));
        assert_ne!(f, Frequencies::draw(8, 100, 5));
    }
}
