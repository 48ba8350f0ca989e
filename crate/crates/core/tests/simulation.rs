use nalgebra::{DMatrix, DVector};
use phfsi_core::integrate::{simulate, snapshot_set, Descriptor, SineInput, ZeroInput};
use phfsi_core::model::ModelParams;
use phfsi_core::ph::{check_dissipation, hamiltonian, Formulation, PhDescriptorSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn system(p: &ModelParams, f: Formulation) -> PhDescriptorSystem<f64> {
    PhDescriptorSystem::from_model(&p.build::<f64>().unwrap(), f).unwrap()
}

fn random_state(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.gen_range(-1e-3..1e-3))
}

#[test]
fn undamped_energy_is_conserved() {
    let ph = system(&ModelParams::small().undamped(), Formulation::Velocity);
    let x0 = random_state(ph.n(), 1);
    let tr = simulate(&ph.descriptor(), &ZeroInput(1), &x0, 1e-4, 0.1).unwrap();
    let h0 = hamiltonian(&ph, &x0);
    let drift = (0..tr.x.ncols())
        .map(|k| (hamiltonian(&ph, &tr.x.column(k).into_owned()) - h0).abs())
        .fold(0.0, f64::max);
    assert!(drift <= 1e-9 * h0, "drift {drift:e} vs H0 {h0:e}");
}

#[test]
fn damped_energy_never_increases() {
    let ph = system(&ModelParams::small(), Formulation::Velocity);
    let x0 = random_state(ph.n(), 2);
    let tr = simulate(&ph.descriptor(), &ZeroInput(1), &x0, 1e-4, 0.02).unwrap();
    let h0 = hamiltonian(&ph, &x0);
    let energy: Vec<f64> = (0..tr.x.ncols())
        .map(|k| hamiltonian(&ph, &tr.x.column(k).into_owned()))
        .collect();
    for w in energy.windows(2) {
        assert!(w[1] <= w[0] + 1e-10 * h0);
    }
    assert!(energy.last().unwrap() < &h0);
}

#[test]
fn forced_run_respects_dissipation_inequality() {
    let ph = system(&ModelParams::small(), Formulation::Velocity);
    let input = SineInput::new(1.0, 100.0).unwrap();
    let tr = simulate(&ph.descriptor(), &input, &ph.zero_state(), 1e-4, 0.05).unwrap();
    let rep = check_dissipation(&tr, &ph).unwrap();
    assert!(rep.max_violation <= 1e-8 * rep.max_abs_energy, "{rep:?}");
    assert!(rep.max_abs_energy > 0.0);
}

#[test]
fn momentum_states_are_mass_weighted_velocity_states() {
    let p = ModelParams::small();
    let vel = system(&p, Formulation::Velocity);
    let mom = system(&p, Formulation::Momentum);
    let input = SineInput::new(1.0, 140.0).unwrap();
    let a = simulate(&vel.descriptor(), &input, &vel.zero_state(), 1e-4, 0.02).unwrap();
    let b = simulate(&mom.descriptor(), &input, &mom.zero_state(), 1e-4, 0.02).unwrap();
    let ex = &vel.e * &a.x;
    assert!((&ex - &b.x).amax() <= 1e-8 * ex.amax());
}

#[test]
fn all_formulations_share_outputs_and_energy() {
    let p = ModelParams::small();
    let vel = system(&p, Formulation::Velocity);
    let input = SineInput::new(1.0, 210.0).unwrap();
    let reference = simulate(&vel.descriptor(), &input, &vel.zero_state(), 1e-4, 0.02).unwrap();
    let obs_ref = &vel.observation * &reference.x;
    for f in Formulation::ALL {
        let ph = system(&p, f);
        let tr = simulate(&ph.descriptor(), &input, &ph.zero_state(), 1e-4, 0.02).unwrap();
        let err = (&tr.y - &reference.y).amax();
        assert!(err <= 1e-8 * reference.y.amax(), "{f}: port output {err:e}");
        let obs = &ph.observation * &tr.x;
        assert!((&obs - &obs_ref).amax() <= 1e-8 * obs_ref.amax(), "{f}: observation");
        let back = ph.to_velocity_states(&tr.x);
        assert!((&back - &reference.x).amax() <= 1e-8 * reference.x.amax(), "{f}: states");
        let k = tr.x.ncols() - 1;
        let h = hamiltonian(&ph, &tr.x.column(k).into_owned());
        let h_ref = hamiltonian(&vel, &reference.x.column(k).into_owned());
        assert!((h - h_ref).abs() <= 1e-8 * h_ref, "{f}: energy");
    }
}

#[test]
fn superposition_holds() {
    let ph = system(&ModelParams::small(), Formulation::Velocity);
    let desc = ph.descriptor();
    let a = SineInput::new(1.0, 90.0).unwrap();
    let b = SineInput::new(2.0, 300.0).unwrap();
    let both = phfsi_core::integrate::FnInput {
        m: 1,
        f: |t: f64, out: &mut [f64]| {
            out[0] = (2.0 * std::f64::consts::PI * 90.0 * t).sin() + 2.0 * (2.0 * std::f64::consts::PI * 300.0 * t).sin();
        },
    };
    let ta = simulate(&desc, &a, &ph.zero_state(), 1e-4, 0.01).unwrap();
    let tb = simulate(&desc, &b, &ph.zero_state(), 1e-4, 0.01).unwrap();
    let tab = simulate(&desc, &both, &ph.zero_state(), 1e-4, 0.01).unwrap();
    let sum = &ta.x + &tb.x;
    assert!((&tab.x - &sum).amax() <= 1e-10 * sum.amax());
}

#[test]
fn steady_state_oscillates_at_the_drive_frequency() {
    let ph = system(&ModelParams::small(), Formulation::Velocity);
    let f = 160.0;
    let tr = simulate(&ph.descriptor(), &SineInput::new(1.0, f).unwrap(), &ph.zero_state(), 1e-4, 0.1).unwrap();
    let y: Vec<f64> = tr.y.row(0).iter().copied().collect();
    let tail = &y[y.len() / 2..];
    let dt = 1e-4;
    let power = |freq: f64| {
        let (mut c, mut s) = (0.0, 0.0);
        for (k, v) in tail.iter().enumerate() {
            let ph = 2.0 * std::f64::consts::PI * freq * k as f64 * dt;
            c += v * ph.cos();
            s += v * ph.sin();
        }
        c * c + s * s
    };
    // DFT bins of the 0.05 s window are 20 Hz apart
    let peak = (1..100).map(|b| b as f64 * 20.0).max_by(|a, b| power(*a).total_cmp(&power(*b))).unwrap();
    assert_eq!(peak, f);
}

#[test]
fn decoupled_structure_ignores_fluid_initial_data() {
    let css = ModelParams::small().build::<f64>().unwrap().decoupled();
    let ph = PhDescriptorSystem::from_model(&css, Formulation::Velocity).unwrap();
    let (ns, nf) = (css.n_s(), css.n_f());
    let nh = ns + nf;
    let mut x1 = random_state(ph.n(), 3);
    let mut x2 = x1.clone();
    for i in 0..nf {
        x2[ns + i] = 0.0;
        x2[nh + ns + i] = 0.0;
        x1[ns + i] *= 5.0;
    }
    let input = SineInput::new(1.0, 120.0).unwrap();
    let a = simulate(&ph.descriptor(), &input, &x1, 1e-4, 0.01).unwrap();
    let b = simulate(&ph.descriptor(), &input, &x2, 1e-4, 0.01).unwrap();
    for rows in [(0, ns), (nh, ns)] {
        let da = a.x.rows(rows.0, rows.1);
        let db = b.x.rows(rows.0, rows.1);
        assert_eq!(da, db);
    }
}

#[test]
fn symmetric_form_recovers_unsymmetric_pressure() {
    let css = ModelParams::small().build::<f64>().unwrap();
    let un = css.assemble_unsymmetric();
    let nhat = css.n_hat();
    let (ns, nf) = (css.n_s(), css.n_f());
    let mut e = DMatrix::<f64>::identity(2 * nhat, 2 * nhat);
    e.view_mut((nhat, nhat), (nhat, nhat)).copy_from(&un.mass);
    let mut a = DMatrix::<f64>::zeros(2 * nhat, 2 * nhat);
    a.view_mut((0, nhat), (nhat, nhat)).fill_with_identity();
    a.view_mut((nhat, 0), (nhat, nhat)).copy_from(&(-&un.stiffness));
    a.view_mut((nhat, nhat), (nhat, nhat)).copy_from(&(-&un.damping));
    let mut b = DMatrix::<f64>::zeros(2 * nhat, 1);
    b.view_mut((nhat, 0), (nhat, 1)).copy_from(&un.input);
    let desc = Descriptor {
        e,
        a,
        b,
        c: DMatrix::zeros(1, 2 * nhat),
    };
    let input = SineInput::new(1.0, 100.0).unwrap();
    let dt = 1e-5;
    let p = simulate(&desc, &input, &DVector::zeros(2 * nhat), dt, 0.01).unwrap();
    let ph = PhDescriptorSystem::from_model(&css, Formulation::Velocity).unwrap();
    let q = simulate(&ph.descriptor(), &input, &ph.zero_state(), dt, 0.01).unwrap();
    let pressure = p.x.rows(ns, nf);
    let qdot = q.x.rows(nhat + ns, nf);
    let err = (&pressure - &qdot).amax();
    assert!(err <= 1e-3 * qdot.amax(), "{err:e} vs {:e}", qdot.amax());
}

#[test]
fn snapshot_set_counts_and_labels_columns() {
    let ph = system(&ModelParams::small(), Formulation::Velocity);
    let s = snapshot_set(&ph, &[100.0, 200.0], 1.0, 1e-4, 0.01).unwrap();
    assert_eq!(s.columns(), 2 * 101);
    assert_eq!(s.provenance[101].frequency, 200.0);
    assert_eq!(s.provenance[101].step, 0);
    let x = s.matrix().unwrap();
    assert!(x.column(0).amax() == 0.0 && x.column(101).amax() == 0.0);
    // energies stay below the supplied work
    let tr = simulate(&ph.descriptor(), &SineInput::new(1.0, 100.0).unwrap(), &ph.zero_state(), 1e-4, 0.01).unwrap();
    let mut work = 0.0;
    for k in 0..tr.steps() {
        let ybar = 0.5 * (tr.y[(0, k)] + tr.y[(0, k + 1)]);
        work += 1e-4 * ybar * tr.u_mid[(0, k)];
        let h = hamiltonian(&ph, &x.column(k + 1).into_owned());
        assert!(h.is_finite() && h <= work + 1e-8 * h.abs().max(1e-30));
    }
}
