use phfsi_core::integrate::{simulate, SineInput};
use phfsi_core::ph::Formulation;
use phfsi_core::reduce::simulate_reduced;

use crate::error::{BenchError, Result};
use crate::sweep::{Sweep, TimedRom};

/// Runs shorter than this are at the mercy of timer resolution.
const TIMER_FLOOR_S: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRow {
    pub n: usize,
    pub fom_median_s: f64,
    /// Mean over methods of the median reduced run time.
    pub rom_median_s: f64,
    /// Mean over methods of `median FOM / median ROM`.
    pub speedup: f64,
    pub methods: usize,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Speed-up table from raw wall times in seconds: `rom_times` holds, per
/// reduced size, one list of repetitions per basis method.
pub fn measure_speedup(fom_times: &[f64], rom_times: &[(usize, Vec<Vec<f64>>)]) -> Result<Vec<SpeedupRow>> {
    if fom_times.len() < 3 {
        return Err(BenchError::Config(format!("need at least 3 full-order timings, got {}", fom_times.len())));
    }
    let fom = median(fom_times);
    let mut rows = Vec::with_capacity(rom_times.len());
    for (n, per_method) in rom_times {
        if per_method.is_empty() {
            continue;
        }
        let mut rom_sum = 0.0;
        let mut speed_sum = 0.0;
        for reps in per_method {
            if reps.len() < 3 {
                return Err(BenchError::Config(format!("need at least 3 timings at n = {n}, got {}", reps.len())));
            }
            if reps.iter().any(|&t| t < TIMER_FLOOR_S) {
                log::warn!("reduced runs at n = {n} take under 1 ms; timings are near the timer resolution");
            }
            let m = median(reps);
            rom_sum += m;
            speed_sum += fom / m;
        }
        let k = per_method.len() as f64;
        rows.push(SpeedupRow {
            n: *n,
            fom_median_s: fom,
            rom_median_s: rom_sum / k,
            speedup: speed_sum / k,
            methods: per_method.len(),
        });
    }
    Ok(rows)
}

/// Times full-order and pH-projected reduced runs of `formulation` at the
/// first evaluation frequency. Methods that cannot deliver a size are
/// skipped for that size.
pub fn time_speedup(sweep: &Sweep, formulation: Formulation, count: usize, sizes: &[usize], reps: usize) -> Result<Vec<SpeedupRow>> {
    let ph = sweep
        .system(formulation)
        .ok_or_else(|| BenchError::Config(format!("formulation {formulation} is not part of the sweep")))?;
    let cfg = &sweep.cfg;
    let input = SineInput::new(cfg.amplitude, sweep.fom.frequencies.eval[0])?;
    let desc = ph.descriptor();
    let mut fom = Vec::with_capacity(reps);
    for _ in 0..reps {
        fom.push(simulate(&desc, &input, &ph.zero_state(), cfg.dt, cfg.t_end)?.wall_time.as_secs_f64());
    }
    let mut rom_times = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut per_method = Vec::new();
        for &method in &cfg.methods {
            let rom = match sweep.ph_rom(formulation, method, count, n) {
                Ok(r) => r,
                Err(e) => {
                    log::info!("no timing for {method} at n = {n}: {e}");
                    continue;
                }
            };
            let mut reps_s = Vec::with_capacity(reps);
            for _ in 0..reps {
                let t = match &rom {
                    TimedRom::Real(r) => simulate_reduced(r, &input, &nalgebra::DVector::zeros(n), cfg.dt, cfg.t_end)?.wall_time,
                    TimedRom::Complex(r) => {
                        simulate_reduced(r, &input, &nalgebra::DVector::zeros(r.n()), cfg.dt, cfg.t_end)?.wall_time
                    }
                };
                reps_s.push(t.as_secs_f64());
            }
            per_method.push(reps_s);
        }
        rom_times.push((n, per_method));
    }
    measure_speedup(&fom, &rom_times)
}
