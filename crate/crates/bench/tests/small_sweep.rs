use std::fs;

use phfsi_bench::report::{parse_records, record_rows};
use phfsi_bench::{emit_reports, findings, Frequencies, Manifest, RunOptions, Sweep, SweepConfig};
use phfsi_core::basis::BasisMethod;
use phfsi_core::model::ModelParams;
use phfsi_core::ph::Formulation;
use phfsi_core::reduce::Projection;

fn small_cfg() -> SweepConfig {
    SweepConfig {
        formulations: vec![Formulation::Velocity, Formulation::Momentum],
        sizes: vec![4, 8],
        trajectory_counts: vec![2, 4],
        eval_count: 2,
        t_end: 0.01,
        speedup_reps: 3,
        ..SweepConfig::default()
    }
}

#[test]
fn singleton_sweep_gives_one_record() {
    let mut cfg = SweepConfig::singleton(Formulation::Momentum, Projection::PhPreserving, BasisMethod::PodState, 8, 3);
    cfg.t_end = 0.01;
    cfg.eval_count = 2;
    let sweep = Sweep::prepare(&ModelParams::small(), &cfg).unwrap();
    let records = sweep.run(&RunOptions { workers: 1, checkpoint: None }).unwrap();
    assert_eq!(records.len(), 1);
    let r = &records[0];
    assert!(r.eps.unwrap() >= r.best.unwrap() - 1e-12);
}

#[test]
fn sweep_covers_the_grid_resumes_and_repeats_exactly() {
    let params = ModelParams::small();
    let cfg = small_cfg();
    let sweep = Sweep::prepare(&params, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("ckpt");
    let opts = RunOptions { workers: 2, checkpoint: Some(ckpt.clone()) };
    let first = sweep.run(&opts).unwrap();

    let expected = cfg.formulations.len() * cfg.projections.len() * cfg.methods.len() * cfg.sizes.len() * cfg.trajectory_counts.len();
    assert_eq!(first.len(), expected);
    assert!(findings::best_approximation_dominates(&first, 1e-12).pass);
    assert_eq!(record_rows(&parse_records(&record_rows(&first)).unwrap()), record_rows(&first));

    // a corrupted unit file is recomputed, the rest are reused
    let victim = fs::read_dir(&ckpt).unwrap().next().unwrap().unwrap().path();
    fs::write(&victim, "# stale\n").unwrap();
    let resumed = sweep.run(&opts).unwrap();
    assert_eq!(record_rows(&resumed), record_rows(&first));

    let fresh = Sweep::prepare(&params, &cfg).unwrap().run(&RunOptions { workers: 3, checkpoint: None }).unwrap();
    assert_eq!(record_rows(&fresh), record_rows(&first));

    let freqs = Frequencies::draw(cfg.seed, cfg.max_count(), cfg.eval_count);
    let manifest = Manifest {
        seed: cfg.seed,
        config_hash: sweep.hash.clone(),
        dims: sweep.dims,
        dt: cfg.dt,
        t_end: cfg.t_end,
        snapshot_hz: freqs.snapshot,
        eval_hz: freqs.eval,
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let files = emit_reports(&a, &first, None, &manifest).unwrap();
    emit_reports(&b, &fresh, None, &manifest).unwrap();
    for f in files {
        let name = f.file_name().unwrap();
        if name == "timings.csv" {
            continue;
        }
        assert_eq!(fs::read(&f).unwrap(), fs::read(b.join(name)).unwrap(), "{name:?}");
    }
}
