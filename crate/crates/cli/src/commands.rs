use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Complex, ComplexField, DMatrix};
use phfsi_bench::report::{emit_reports, Manifest};
use phfsi_bench::sweep::krylov_blocks;
use phfsi_bench::{findings, time_speedup, FomData, Frequencies, RunOptions, Sweep, SweepConfig};
use phfsi_core::basis::{
    BasisMatrix, BasisMethod, BasisSource, ComplexSvdDecomposition, KrylovDecomposition, ModalDecomposition,
    PodSource, PodVariant, ReducedBasis, SvdLikeDecomposition,
};
use phfsi_core::integrate::{simulate, SineInput};
use phfsi_core::mtx::{read_matrix, write_matrix};
use phfsi_core::ph::{check_ph_matrices, check_ph_properties, Formulation, PhDescriptorSystem};
use phfsi_core::reduce::{project, Projection, ReducedSystem};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::workspace::{ModelState, Workspace};

/// Tolerance of the structural checks.
pub const PH_TOL: f64 = 1e-10;
/// Magic line of binary state dumps.
pub const STATES_MAGIC: &str = "PHFSI-STATES-F64LE";

fn io(p: &Path) -> impl FnOnce(std::io::Error) -> CliError {
    CliError::io(p.display().to_string())
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Assembles the model into the workspace and describes it.
pub fn cmd_model(root: &Path, config: RunConfig) -> Result<String> {
    let (ws, css, state) = Workspace::create(root, config)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{}: {}",
        ws.root.display(),
        match state {
            ModelState::Written => "model written",
            ModelState::UpToDate => "model up to date",
        }
    );
    let _ = writeln!(out, "config_hash {}", ws.hash);
    let _ = writeln!(out, "N_S {}  N_F {}  N^ {}  N {}", css.n_s(), css.n_f(), css.n_hat(), 2 * css.n_hat());
    for (name, m) in crate::workspace::model_files(&css) {
        let _ = writeln!(out, "{name:<6} {:>4}x{:<4} |.|_F {:.6e}", m.nrows(), m.ncols(), m.norm());
    }
    Ok(out)
}

fn formulation_system(ws: &Workspace, f: Formulation) -> Result<PhDescriptorSystem<f64>> {
    let css = ws.config.model().build::<f64>()?;
    Ok(PhDescriptorSystem::from_model(&css, f)?)
}

/// Structural residuals of the full model (all formulations) or of a
/// stored reduced model. The flag is the overall verdict.
pub fn cmd_check(ws: &Workspace, rom: Option<&str>) -> Result<(String, bool)> {
    let mut out = String::new();
    let mut pass = true;
    match rom {
        None => {
            let css = ws.config.model().build::<f64>()?;
            for f in Formulation::ALL {
                let ph = PhDescriptorSystem::from_model(&css, f)?;
                let r = check_ph_properties(&ph, PH_TOL);
                pass &= r.pass;
                let _ = writeln!(out, "[{f}] N = {}\n{r}\n", ph.n());
            }
        }
        Some(id) => {
            let dir = ws.dir("roms").join(id);
            let report = read_rom_report(&dir)?;
            ws.require_hash(&format!("reduced model {id}"), Some(&report.config_hash))?;
            if !report.structured {
                return Err(CliError::Missing(format!("reduced model {id} ({}) has no pH structure to check", report.projection)));
            }
            let r = if report.complex {
                let [e, j, d, q] = read_ops::<Complex<f64>>(&dir, ["E", "J", "D", "Q"])?;
                check_ph_matrices(&e, &j, &d, &q, PH_TOL)
            } else {
                let [e, j, d, q] = read_ops::<f64>(&dir, ["E", "J", "D", "Q"])?;
                check_ph_matrices(&e, &j, &d, &q, PH_TOL)
            };
            pass = r.pass;
            let _ = writeln!(out, "[{id}] n = {}\n{r}", report.n);
        }
    }
    Ok((out, pass))
}

fn read_ops<C>(dir: &Path, names: [&str; 4]) -> Result<[DMatrix<C>; 4]>
where
    C: nalgebra_sparse::io::MatrixMarketScalar + nalgebra::Scalar + num_traits::Zero + std::ops::AddAssign,
{
    let load = |n: &str| -> Result<DMatrix<C>> {
        let p = dir.join(format!("{n}.mtx"));
        if !p.exists() {
            return Err(CliError::Missing(format!("{} is missing", p.display())));
        }
        read_matrix(&p).map_err(|e| CliError::Integrity(e.to_string()))
    };
    Ok([load(names[0])?, load(names[1])?, load(names[2])?, load(names[3])?])
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub frequency: f64,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub formulation: Formulation,
    pub states: bool,
}

/// Runs one sine excitation and writes `t, y₁..y_m` (and optionally the
/// full states). Returns the written paths.
pub fn cmd_simulate(ws: &Workspace, args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let ph = formulation_system(ws, args.formulation)?;
    let input = SineInput::new(ws.config.input.amplitude, args.frequency)?;
    let dt = args.dt.unwrap_or(ws.config.input.dt);
    let t_end = args.t_end.unwrap_or(ws.config.input.t_end);
    let tr = simulate(&ph.descriptor(), &input, &ph.zero_state(), dt, t_end)?;

    let stem = format!("{}_f{}", args.formulation, args.frequency);
    let dir = ws.dir("trajectories");
    let csv = dir.join(format!("{stem}.csv"));
    let mut text = format!("# config_hash = {}\nt", ws.hash);
    for i in 0..tr.y.nrows() {
        let _ = write!(text, ",y{}", i + 1);
    }
    text.push('\n');
    for (k, t) in tr.times().iter().enumerate() {
        let _ = write!(text, "{t:e}");
        for i in 0..tr.y.nrows() {
            let _ = write!(text, ",{:e}", tr.y[(i, k)]);
        }
        text.push('\n');
    }
    fs::write(&csv, text).map_err(io(&csv))?;
    let mut written = vec![csv];

    if args.states {
        let bin = dir.join(format!("{stem}.states"));
        let mut bytes = format!("{STATES_MAGIC}\n{}\n{}\n{:e}\n", tr.x.nrows(), tr.x.ncols(), dt).into_bytes();
        bytes.reserve(8 * tr.x.len());
        // nalgebra storage is column-major already
        for v in tr.x.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = fs::File::create(&bin).map_err(io(&bin))?;
        f.write_all(&bytes).map_err(io(&bin))?;
        written.push(bin);
    }
    Ok(written)
}

/// Reads a binary state dump back: `(states, dt)`.
pub fn read_states(path: &Path) -> Result<(DMatrix<f64>, f64)> {
    let bytes = fs::read(path).map_err(io(path))?;
    let bad = |why: &str| CliError::Integrity(format!("{}: {why}", path.display()));
    let mut header = Vec::with_capacity(4);
    let mut pos = 0;
    for _ in 0..4 {
        let end = bytes[pos..].iter().position(|&b| b == b'\n').ok_or_else(|| bad("truncated header"))?;
        header.push(String::from_utf8_lossy(&bytes[pos..pos + end]).into_owned());
        pos += end + 1;
    }
    if header[0] != STATES_MAGIC {
        return Err(bad("wrong magic line"));
    }
    let n: usize = header[1].parse().map_err(|_| bad("bad row count"))?;
    let k: usize = header[2].parse().map_err(|_| bad("bad column count"))?;
    let dt: f64 = header[3].parse().map_err(|_| bad("bad time step"))?;
    let body = &bytes[pos..];
    if body.len() != 8 * n * k {
        return Err(bad("payload size does not match the header"));
    }
    let values = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    Ok((DMatrix::from_iterator(n, k, values), dt))
}

/// Sidecar of a stored basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisMeta {
    pub config_hash: String,
    pub formulation: Formulation,
    pub method: BasisMethod,
    pub n: usize,
    /// Snapshot trajectories used (0 for model-based methods).
    pub trajectories: usize,
    pub complex: bool,
    pub orthonormal: bool,
    pub symplectic: bool,
    pub block_diagonal: bool,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BasisArgs {
    pub method: BasisMethod,
    pub n: usize,
    pub count: usize,
    pub formulation: Formulation,
}

pub fn basis_id(args: &BasisArgs) -> String {
    let count = if args.method.is_data_based() { args.count } else { 0 };
    format!("{}_{}_n{}_c{count}", args.formulation, args.method, args.n)
}

fn build_basis(ws: &Workspace, ph: &PhDescriptorSystem<f64>, args: &BasisArgs) -> Result<ReducedBasis<f64>> {
    let cfg = &ws.config.sweep;
    let basis = match args.method {
        BasisMethod::Modal => ModalDecomposition::new(ph)?.basis(args.n)?,
        BasisMethod::Krylov => {
            let blocks = krylov_blocks(args.n, cfg.krylov_expansion_hz.len(), ph.n_inputs());
            KrylovDecomposition::new(ph, &cfg.krylov_expansion_hz, blocks)?.basis(args.n)?
        }
        method => {
            if args.count == 0 {
                return Err(CliError::Config(format!("{method} needs at least one snapshot trajectory")));
            }
            let velocity = formulation_system(ws, Formulation::Velocity)?;
            let sweep = SweepConfig {
                trajectory_counts: vec![args.count],
                eval_count: 0,
                ..cfg.clone()
            };
            // same frequencies as the first `count` trajectories of the sweep
            let freqs = Frequencies::draw(cfg.seed, args.count, 0);
            let fom = FomData::generate(&velocity, &sweep, freqs)?;
            let to_f = match &ph.velocity_map {
                None => None,
                Some(t) => Some(t.clone().lu().try_inverse().ok_or_else(|| {
                    CliError::Numerical(format!("velocity map of the {} form is singular", ph.formulation))
                })?),
            };
            let snaps = fom.snapshots(args.count, to_f.as_ref(), ph)?;
            match method {
                BasisMethod::PodState => PodSource::new(&snaps, PodVariant::State).basis(args.n)?,
                BasisMethod::PodDisp => PodSource::new(&snaps, PodVariant::Disp).basis(args.n)?,
                BasisMethod::PodIndividual => PodSource::new(&snaps, PodVariant::Individual).basis(args.n)?,
                BasisMethod::ComplexSvd => ComplexSvdDecomposition::new(&snaps).basis(args.n)?,
                _ => SvdLikeDecomposition::new(&snaps).basis(args.n)?,
            }
        }
    };
    Ok(basis)
}

/// Builds a basis and stores `bases/<id>.mtx` plus `bases/<id>.toml`.
pub fn cmd_basis(ws: &Workspace, args: &BasisArgs) -> Result<(String, BasisMeta)> {
    let ph = formulation_system(ws, args.formulation)?;
    let basis = build_basis(ws, &ph, args)?;
    let id = basis_id(args);
    let dir = ws.dir("bases");
    let mtx = dir.join(format!("{id}.mtx"));
    match &basis.v {
        BasisMatrix::Real(v) => write_matrix(&mtx, v)?,
        BasisMatrix::Complex(v) => write_matrix(&mtx, v)?,
    }
    let meta = BasisMeta {
        config_hash: ws.hash.clone(),
        formulation: args.formulation,
        method: args.method,
        n: basis.n(),
        trajectories: if args.method.is_data_based() { args.count } else { 0 },
        complex: basis.v.is_complex(),
        orthonormal: basis.orthonormal,
        symplectic: basis.symplectic,
        block_diagonal: basis.block_diagonal,
        weights: basis.weights.clone(),
    };
    let side = dir.join(format!("{id}.toml"));
    fs::write(&side, toml::to_string(&meta).expect("basis metadata serializes")).map_err(io(&side))?;
    Ok((id, meta))
}

pub fn read_basis_meta(ws: &Workspace, id: &str) -> Result<BasisMeta> {
    let side = ws.dir("bases").join(format!("{id}.toml"));
    let text = fs::read_to_string(&side)
        .map_err(|_| CliError::Missing(format!("basis {id} not found; run `phfsi basis` first")))?;
    toml::from_str(&text).map_err(|e| CliError::Integrity(format!("{}: {e}", side.display())))
}

/// Structure flags and residuals of a stored reduced model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RomReport {
    pub config_hash: String,
    pub basis: String,
    pub formulation: Formulation,
    pub method: BasisMethod,
    pub projection: Projection,
    pub n: usize,
    pub complex: bool,
    pub structured: bool,
    pub ph1: Option<f64>,
    pub ph2: Option<f64>,
    pub ph3: Option<f64>,
    pub energy_definite: Option<bool>,
    pub ph_pass: Option<bool>,
}

fn read_rom_report(dir: &Path) -> Result<RomReport> {
    let p = dir.join("report.json");
    let text = fs::read_to_string(&p).map_err(|_| CliError::Missing(format!("{} not found; run `phfsi reduce` first", p.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Integrity(format!("{}: {e}", p.display())))
}

fn store_rom<C>(dir: &Path, rom: &ReducedSystem<C>) -> Result<()>
where
    C: ComplexField + nalgebra_sparse::io::MatrixMarketScalar + num_traits::Zero,
    C::RealField: phfsi_core::Real,
{
    let mut ops: Vec<(&str, &DMatrix<C>)> = vec![("E", &rom.e), ("A", &rom.a), ("B", &rom.b), ("C", &rom.c)];
    if let Some(s) = &rom.structure {
        ops.extend([("J", &s.j), ("D", &s.d), ("Q", &s.q)]);
    }
    for (name, m) in ops {
        write_matrix(dir.join(format!("{name}.mtx")), m)?;
    }
    Ok(())
}

/// Projects the full model onto a stored basis; writes `roms/<id>/`.
pub fn cmd_reduce(ws: &Workspace, basis: &str, projection: Projection) -> Result<(String, RomReport)> {
    let meta = read_basis_meta(ws, basis)?;
    ws.require_hash(&format!("basis {basis}"), Some(&meta.config_hash))?;
    let ph = formulation_system(ws, meta.formulation)?;
    let mtx = ws.dir("bases").join(format!("{basis}.mtx"));
    if !mtx.exists() {
        return Err(CliError::Missing(format!("{} not found", mtx.display())));
    }
    let id = format!("{basis}_{projection}");
    let dir = ws.dir("roms").join(&id);
    fs::create_dir_all(&dir).map_err(io(&dir))?;
    let check = if meta.complex {
        let v: DMatrix<Complex<f64>> = read_matrix(&mtx).map_err(|e| CliError::Integrity(e.to_string()))?;
        let rom = project(projection, &ph, &v)?;
        store_rom(&dir, &rom)?;
        rom.check(PH_TOL)
    } else {
        let v: DMatrix<f64> = read_matrix(&mtx).map_err(|e| CliError::Integrity(e.to_string()))?;
        let rom = project(projection, &ph, &v)?;
        store_rom(&dir, &rom)?;
        rom.check(PH_TOL)
    };
    let report = RomReport {
        config_hash: ws.hash.clone(),
        basis: basis.to_string(),
        formulation: meta.formulation,
        method: meta.method,
        projection,
        n: meta.n,
        complex: meta.complex,
        structured: check.is_some(),
        ph1: check.map(|r| r.ph1),
        ph2: check.map(|r| r.ph2),
        ph3: check.map(|r| r.ph3),
        energy_definite: check.map(|r| r.energy_definite),
        ph_pass: check.map(|r| r.pass),
    };
    let p = dir.join("report.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&p, text + "\n").map_err(io(&p))?;
    Ok((id, report))
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub out: PathBuf,
    pub workers: usize,
    pub speedup: bool,
}

/// Full sweep with checkpointing under `<out>/checkpoints`; returns a
/// summary of the reports and findings.
pub fn cmd_bench(config: &RunConfig, args: &BenchArgs) -> Result<String> {
    let params = config.model();
    let cfg = &config.sweep;
    let sweep = Sweep::prepare(&params, cfg)?;
    let opts = RunOptions {
        workers: args.workers.max(1),
        checkpoint: Some(args.out.join("checkpoints")),
    };
    let records = sweep.run(&opts)?;
    let speedup = if args.speedup {
        Some(time_speedup(&sweep, cfg.speedup_formulation, cfg.max_count(), &cfg.sorted_sizes(), cfg.speedup_reps)?)
    } else {
        None
    };
    let manifest = Manifest {
        seed: cfg.seed,
        config_hash: sweep.hash.clone(),
        dims: sweep.dims,
        dt: cfg.dt,
        t_end: cfg.t_end,
        snapshot_hz: sweep.fom.frequencies.snapshot.clone(),
        eval_hz: sweep.fom.frequencies.eval.clone(),
    };
    let files = emit_reports(&args.out, &records, speedup.as_deref(), &manifest)?;

    let mut out = String::new();
    let _ = writeln!(out, "{} records, {} files in {}", records.len(), files.len(), args.out.display());
    let mid = cfg.mid_size();
    let mut checks = vec![
        ("best approximation dominance", findings::best_approximation_dominates(&records, 1e-12)),
        ("structured projections survive", findings::structured_projections_survive(&records)),
        ("momentum POD-Disp blank", findings::momentum_pod_disp_fails(&records, mid, 0.1)),
        ("SVD-like smallest", findings::svd_like_is_best(&records, mid)),
        (
            "errors decay with n",
            findings::errors_decay(
                &records,
                &[BasisMethod::PodState, BasisMethod::PodIndividual, BasisMethod::SvdLike],
                mid,
                0.1,
            ),
        ),
    ];
    if let Some(rows) = &speedup {
        checks.push(("speed-up shape", findings::speedup_shape(rows, 16, 5.0)));
    }
    for (name, f) in checks {
        let _ = writeln!(out, "{} {name}: {}", if f.pass { "ok  " } else { "FAIL" }, f.detail);
    }
    Ok(out)
}
