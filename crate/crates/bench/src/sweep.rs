use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{Complex, ComplexField, DMatrix};
use phfsi_core::basis::{
    BasisMatrix, BasisMethod, BasisSource, ComplexSvdDecomposition, KrylovDecomposition, ModalDecomposition,
    PodSource, PodVariant, ReducedBasis, SvdLikeDecomposition,
};
use phfsi_core::integrate::StepMap;
use phfsi_core::linalg::{lift, orthonormalize};
use phfsi_core::model::ModelParams;
use phfsi_core::ph::{Formulation, PhDescriptorSystem};
use phfsi_core::reduce::{energy_stable_with, jd_inverse, project, Projection, ReducedSystem};
use rayon::prelude::*;

use crate::config::{Frequencies, SweepConfig};
use crate::error::{BenchError, Result};
use crate::fom::FomData;
use crate::metric::{integrated_ratio, EnergyNorm};
use crate::report::{config_hash, parse_records, record_rows};

/// Reduced states beyond this norm count as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Column drop tolerance when orthonormalizing bases for the best
/// approximation.
const SPAN_TOL: f64 = 1e-10;

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComboKey {
    pub formulation: Formulation,
    pub count: usize,
    pub projection: Projection,
    pub method: BasisMethod,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    /// Reduced state norm exceeded [`DIVERGENCE_LIMIT`] or became non-finite.
    Diverged,
    /// The basis method cannot deliver this size.
    Unavailable,
    Failed(String),
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Status::Ok => f.write_str("ok"),
            Status::Diverged => f.write_str("diverged"),
            Status::Unavailable => f.write_str("unavailable"),
            Status::Failed(why) => write!(f, "failed: {why}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub key: ComboKey,
    /// Mean relative energy-norm error over the evaluation frequencies.
    pub eps: Option<f64>,
    /// Same measure for the best approximation in the basis span.
    pub best: Option<f64>,
    pub status: Status,
    /// Wall time of the batched reduced simulation (not persisted in the
    /// error table, which must be reproducible).
    pub rom_seconds: f64,
}

impl ErrorRecord {
    /// Left blank in tables: `ε_r > 1` or no value at all.
    pub fn blank(&self) -> bool {
        !matches!(self.eps, Some(e) if e <= 1.0)
    }

    pub fn diverged(&self) -> bool {
        self.status == Status::Diverged
    }
}

/// Work item: one basis decomposition, evaluated for every projection and
/// size. Model-based methods do not depend on the snapshots and cover all
/// trajectory counts at once.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub formulation: Formulation,
    pub method: BasisMethod,
    pub counts: Vec<usize>,
}

impl Unit {
    pub fn file_name(&self) -> String {
        let counts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        format!("{}_{}_{}.csv", self.formulation, self.method, counts.join("-"))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 picks the machine's parallelism.
    pub workers: usize,
    /// Directory with one file per finished unit; existing files whose hash
    /// matches are reused instead of recomputed.
    pub checkpoint: Option<PathBuf>,
}

/// Model dimensions reported with every run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub n_s: usize,
    pub n_f: usize,
    pub n: usize,
}

struct FormContext {
    ph: PhDescriptorSystem<f64>,
    /// `T_f⁻¹`, absent for the velocity form.
    from_velocity: Option<DMatrix<f64>>,
    /// `LᵀT_f`: energy-weighted velocity coordinates of a state.
    weighted: DMatrix<f64>,
    /// `(J − D)⁻¹`.
    jd_inv: Option<DMatrix<f64>>,
    modal: Option<std::result::Result<ModalDecomposition<f64>, String>>,
    krylov: Option<std::result::Result<KrylovDecomposition<f64>, String>>,
}

/// Everything that is shared by the combinations of a sweep.
pub struct Sweep {
    pub cfg: SweepConfig,
    pub params: ModelParams,
    pub fom: FomData,
    pub dims: ModelDims,
    pub hash: String,
    /// `LᵀX` of the evaluation runs.
    reference: DMatrix<f64>,
    contexts: Vec<FormContext>,
}

/// Krylov blocks needed for `n` real columns.
pub fn krylov_blocks(n: usize, points: usize, inputs: usize) -> usize {
    n.div_ceil(2 * points * inputs) + 2
}

fn failed(e: impl fmt::Display) -> String {
    // keep the text on one CSV field
    e.to_string().replace([',', '\n', '"'], ";")
}

impl Sweep {
    /// Builds the model, runs the full-order simulations and factorizes what
    /// every combination needs.
    pub fn prepare(params: &ModelParams, cfg: &SweepConfig) -> Result<Self> {
        let css = params.build::<f64>()?;
        let velocity = PhDescriptorSystem::from_model(&css, Formulation::Velocity)?;
        cfg.validate(velocity.n())?;
        let dims = ModelDims {
            n_s: css.n_s(),
            n_f: css.n_f(),
            n: velocity.n(),
        };
        let freqs = Frequencies::draw(cfg.seed, cfg.max_count(), cfg.eval_count);
        let start = Instant::now();
        let fom = FomData::generate(&velocity, cfg, freqs)?;
        log::info!("full-order runs and correlations took {:.2?}", start.elapsed());
        let norm = EnergyNorm::new(&velocity.energy_matrix())?;
        let reference = norm.weigh(&fom.eval_states);

        let n_max = cfg.sorted_sizes().last().copied().unwrap_or(0);
        let mut contexts = Vec::with_capacity(cfg.formulations.len());
        for &f in &cfg.formulations {
            let ph = PhDescriptorSystem::from_model(&css, f)?;
            let t = ph.velocity_map_dense();
            let from_velocity = match f {
                Formulation::Velocity => None,
                _ => Some(
                    t.clone()
                        .lu()
                        .try_inverse()
                        .ok_or_else(|| phfsi_core::Error::Factorization(format!("velocity map of the {f} form is singular")))?,
                ),
            };
            let jd_inv = if cfg.projections.contains(&Projection::EnergyStable) {
                let (g, route) = jd_inverse(&ph)?;
                log::info!("{f}: (J − D)⁻¹ by {route}");
                Some(g)
            } else {
                None
            };
            let modal = cfg
                .methods
                .contains(&BasisMethod::Modal)
                .then(|| ModalDecomposition::new(&ph).map_err(failed));
            let krylov = cfg.methods.contains(&BasisMethod::Krylov).then(|| {
                let blocks = krylov_blocks(n_max, cfg.krylov_expansion_hz.len(), ph.n_inputs());
                KrylovDecomposition::new(&ph, &cfg.krylov_expansion_hz, blocks).map_err(failed)
            });
            contexts.push(FormContext {
                weighted: &norm.lt * &t,
                ph,
                from_velocity,
                jd_inv,
                modal,
                krylov,
            });
        }
        Ok(Self {
            hash: config_hash(params, cfg),
            cfg: cfg.clone(),
            params: params.clone(),
            fom,
            dims,
            reference,
            contexts,
        })
    }

    /// Work items in report order.
    pub fn units(&self) -> Vec<Unit> {
        let counts = self.cfg.sorted_counts();
        let mut out = Vec::new();
        for &formulation in &self.cfg.formulations {
            for &method in &self.cfg.methods {
                if method.is_data_based() {
                    out.extend(counts.iter().map(|&c| Unit {
                        formulation,
                        method,
                        counts: vec![c],
                    }));
                } else {
                    out.push(Unit {
                        formulation,
                        method,
                        counts: counts.clone(),
                    });
                }
            }
        }
        out
    }

    /// Runs every unit, reusing finished ones from the checkpoint directory.
    /// Records come back sorted by key.
    pub fn run(&self, opts: &RunOptions) -> Result<Vec<ErrorRecord>> {
        if let Some(dir) = &opts.checkpoint {
            fs::create_dir_all(dir)?;
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| BenchError::Config(format!("worker pool: {e}")))?;
        let units = self.units();
        let results: Vec<Result<Vec<ErrorRecord>>> = pool.install(|| {
            units
                .par_iter()
                .map(|u| self.run_unit_checkpointed(u, opts.checkpoint.as_deref()))
                .collect()
        });
        let mut records = Vec::new();
        for r in results {
            records.extend(r?);
        }
        records.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(records)
    }

    fn run_unit_checkpointed(&self, unit: &Unit, dir: Option<&Path>) -> Result<Vec<ErrorRecord>> {
        let Some(dir) = dir else {
            return Ok(self.run_unit(unit));
        };
        let path = dir.join(unit.file_name());
        if let Ok(text) = fs::read_to_string(&path) {
            let mut lines = text.lines();
            if lines.next() == Some(&format!("# {}", self.hash)) {
                let body: String = lines.map(|l| format!("{l}\n")).collect();
                match parse_records(&body) {
                    Ok(records) => {
                        log::info!("reusing {}", path.display());
                        return Ok(records);
                    }
                    Err(e) => log::warn!("recomputing {}: {e}", path.display()),
                }
            }
        }
        let start = Instant::now();
        let records = self.run_unit(unit);
        log::info!("{} done in {:.2?}", unit.file_name(), start.elapsed());
        let text = format!("# {}\n{}", self.hash, record_rows(&records));
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, text)?;
        fs::rename(&tmp, &path)?;
        Ok(records)
    }

    fn context(&self, f: Formulation) -> &FormContext {
        let i = self.cfg.formulations.iter().position(|&g| g == f).expect("unit formulation is configured");
        &self.contexts[i]
    }

    /// All records of one unit; failures become records, never errors.
    pub fn run_unit(&self, unit: &Unit) -> Vec<ErrorRecord> {
        let ctx = self.context(unit.formulation);
        let sizes = self.cfg.sorted_sizes();
        let mut records = Vec::new();
        for &count in &unit.counts {
            let key = |projection, n| ComboKey {
                formulation: unit.formulation,
                count,
                projection,
                method: unit.method,
                n,
            };
            // model-based bases are identical for every count
            if count != unit.counts[0] {
                let first = unit.counts[0];
                let copies: Vec<ErrorRecord> = records
                    .iter()
                    .filter(|r: &&ErrorRecord| r.key.count == first)
                    .map(|r| ErrorRecord {
                        key: ComboKey { count, ..r.key },
                        ..r.clone()
                    })
                    .collect();
                records.extend(copies);
                continue;
            }
            let outcome = self.largest_basis(ctx, unit.method, count, &sizes);
            match outcome {
                Err(why) => {
                    for &p in &self.cfg.projections {
                        for &n in &sizes {
                            records.push(ErrorRecord {
                                key: key(p, n),
                                eps: None,
                                best: None,
                                status: Status::Failed(why.clone()),
                                rom_seconds: 0.0,
                            });
                        }
                    }
                }
                Ok((basis, admissible)) => {
                    let evaluated = match basis.as_ref().map(|b| &b.v) {
                        Some(BasisMatrix::Real(v)) => self.evaluate(ctx, v, basis.as_ref().unwrap(), &admissible),
                        Some(BasisMatrix::Complex(v)) => self.evaluate(ctx, v, basis.as_ref().unwrap(), &admissible),
                        None => Vec::new(),
                    };
                    for &p in &self.cfg.projections {
                        for &n in &sizes {
                            let found = evaluated.iter().find(|(q, m, _)| *q == p && *m == n);
                            records.push(match found {
                                Some((_, _, r)) => ErrorRecord { key: key(p, n), ..r.clone() },
                                None => ErrorRecord {
                                    key: key(p, n),
                                    eps: None,
                                    best: None,
                                    status: Status::Unavailable,
                                    rom_seconds: 0.0,
                                },
                            });
                        }
                    }
                }
            }
        }
        records
    }

    /// The basis of the largest admissible size plus the admissible sizes.
    fn largest_basis(
        &self,
        ctx: &FormContext,
        method: BasisMethod,
        count: usize,
        sizes: &[usize],
    ) -> std::result::Result<(Option<ReducedBasis<f64>>, Vec<usize>), String> {
        let source: Box<dyn BasisSource<f64> + '_>;
        let borrowed: &dyn BasisSource<f64> = match method {
            BasisMethod::Modal => match ctx.modal.as_ref().expect("modal decomposition prepared") {
                Ok(d) => d,
                Err(e) => return Err(e.clone()),
            },
            BasisMethod::Krylov => match ctx.krylov.as_ref().expect("Krylov decomposition prepared") {
                Ok(d) => d,
                Err(e) => return Err(e.clone()),
            },
            _ => {
                let snaps = self
                    .fom
                    .snapshots(count, ctx.from_velocity.as_ref(), &ctx.ph)
                    .map_err(failed)?;
                source = match method {
                    BasisMethod::PodState => Box::new(PodSource::new(&snaps, PodVariant::State)),
                    BasisMethod::PodDisp => Box::new(PodSource::new(&snaps, PodVariant::Disp)),
                    BasisMethod::PodIndividual => Box::new(PodSource::new(&snaps, PodVariant::Individual)),
                    BasisMethod::ComplexSvd => Box::new(ComplexSvdDecomposition::new(&snaps)),
                    _ => Box::new(SvdLikeDecomposition::new(&snaps)),
                };
                source.as_ref()
            }
        };
        let groups = method.column_groups();
        let max = borrowed.max_size();
        let admissible: Vec<usize> = sizes
            .iter()
            .copied()
            // a modal basis must not split a conjugate pair
            .filter(|&n| n <= max && n % groups == 0 && !(method == BasisMethod::Modal && n % 2 == 1))
            .collect();
        let Some(&largest) = admissible.last() else {
            return Ok((None, admissible));
        };
        let basis = borrowed.basis(largest).map_err(failed)?;
        Ok((Some(basis), admissible))
    }

    /// Records `(projection, n, record)` for one basis; keys are filled in by
    /// the caller.
    fn evaluate<C>(&self, ctx: &FormContext, v: &DMatrix<C>, basis: &ReducedBasis<f64>, sizes: &[usize]) -> Vec<(Projection, usize, ErrorRecord)>
    where
        C: ComplexField<RealField = f64>,
    {
        let w = lift::<f64, C>(&ctx.weighted) * v;
        let (w_re, w_im) = split(&w);
        let blank_key = ComboKey {
            formulation: ctx.ph.formulation,
            count: 0,
            projection: Projection::Galerkin,
            method: basis.method,
            n: 0,
        };
        let mut columns = Vec::with_capacity(sizes.len());
        let mut best = Vec::with_capacity(sizes.len());
        for &n in sizes {
            let cols = basis.sub_columns(n).expect("admissible size");
            let span = match &w_im {
                Some(im) => {
                    let mut both = DMatrix::zeros(w_re.nrows(), 2 * cols.len());
                    both.columns_mut(0, cols.len()).copy_from(&w_re.select_columns(&cols));
                    both.columns_mut(cols.len(), cols.len()).copy_from(&im.select_columns(&cols));
                    both
                }
                None => w_re.select_columns(&cols),
            };
            let q = orthonormalize(&span, SPAN_TOL);
            let resid = &self.reference - &q * (q.transpose() * &self.reference);
            best.push(self.mean_ratio(&resid).ok());
            columns.push(cols);
        }

        let mut out = Vec::new();
        for &p in &self.cfg.projections {
            let reduce = |v: &DMatrix<C>| match (p, &ctx.jd_inv) {
                (Projection::EnergyStable, Some(g)) => energy_stable_with(&ctx.ph, g, v),
                _ => project(p, &ctx.ph, v),
            };
            let full = reduce(v);
            for (i, &n) in sizes.iter().enumerate() {
                let mut rec = ErrorRecord {
                    key: blank_key,
                    eps: None,
                    best: best[i],
                    status: Status::Ok,
                    rom_seconds: 0.0,
                };
                // a failure of the largest basis need not carry over to its sub-bases
                let rom = match &full {
                    Ok(rom) => rom.restrict(&columns[i]),
                    Err(_) => reduce(&v.select_columns(&columns[i])),
                };
                match rom.map_err(failed).and_then(|rom| self.simulate(&rom)) {
                    Ok(Some((xr, secs))) => {
                        rec.rom_seconds = secs;
                        let (x_re, x_im) = split(&xr);
                        let wn_re = w_re.select_columns(&columns[i]);
                        let mut recon = &wn_re * x_re;
                        if let (Some(wi), Some(xi)) = (&w_im, x_im) {
                            recon -= wi.select_columns(&columns[i]) * xi;
                        }
                        match self.mean_ratio(&(&self.reference - recon)) {
                            Ok(e) if e.is_finite() => rec.eps = Some(e),
                            Ok(_) => rec.status = Status::Diverged,
                            Err(e) => rec.status = Status::Failed(failed(e)),
                        }
                    }
                    Ok(None) => rec.status = Status::Diverged,
                    Err(why) => rec.status = Status::Failed(why),
                }
                out.push((p, n, rec));
            }
        }
        out
    }

    /// Batched reduced runs for every evaluation frequency; `None` on
    /// divergence.
    fn simulate<C>(&self, rom: &ReducedSystem<C>) -> std::result::Result<Option<(DMatrix<C>, f64)>, String>
    where
        C: ComplexField<RealField = f64>,
    {
        let start = Instant::now();
        let step = StepMap::new(&rom.descriptor(), self.fom.grid.dt).map_err(failed)?;
        let k1 = self.fom.samples();
        let n_eval = self.fom.eval_inputs.nrows();
        let u: DMatrix<C> = lift(&self.fom.eval_inputs);
        let mut out = DMatrix::zeros(rom.n(), n_eval * k1);
        let mut x = DMatrix::zeros(rom.n(), n_eval);
        for k in 1..k1 {
            let uk = DMatrix::from_iterator(1, n_eval, u.column(k - 1).iter().cloned());
            x = step.advance(&x, &uk);
            for j in 0..n_eval {
                let c = x.column(j);
                if !(c.norm() <= DIVERGENCE_LIMIT) {
                    return Ok(None);
                }
                out.set_column(j * k1 + k, &c);
            }
        }
        Ok(Some((out, start.elapsed().as_secs_f64())))
    }

    /// Mean over evaluation runs of `∫‖r‖ / ∫‖y‖` for weighted residuals `r`.
    fn mean_ratio(&self, resid: &DMatrix<f64>) -> Result<f64> {
        let k1 = self.fom.samples();
        let n_eval = self.fom.eval_inputs.nrows();
        let mut sum = 0.0;
        for j in 0..n_eval {
            let err: Vec<f64> = resid.columns(j * k1, k1).column_iter().map(|c| c.norm()).collect();
            let reference: Vec<f64> = self.reference.columns(j * k1, k1).column_iter().map(|c| c.norm()).collect();
            sum += integrated_ratio(&err, &reference, self.fom.grid.dt)?;
        }
        Ok(sum / n_eval as f64)
    }

    /// The pH ROM of `method` at size `n` for the given formulation and
    /// trajectory count, as used for timing.
    pub fn ph_rom(&self, formulation: Formulation, method: BasisMethod, count: usize, n: usize) -> Result<TimedRom> {
        let ctx = self
            .cfg
            .formulations
            .iter()
            .position(|&g| g == formulation)
            .map(|i| &self.contexts[i])
            .ok_or_else(|| BenchError::Config(format!("formulation {formulation} is not part of the sweep")))?;
        let (basis, sizes) = self
            .largest_basis(ctx, method, count, &[n])
            .map_err(BenchError::Config)?;
        let basis = match basis {
            Some(b) if sizes == [n] => b,
            _ => return Err(BenchError::Config(format!("{method} cannot deliver size {n}"))),
        };
        Ok(match &basis.v {
            BasisMatrix::Real(v) => TimedRom::Real(project(Projection::PhPreserving, &ctx.ph, v)?),
            BasisMatrix::Complex(v) => TimedRom::Complex(project(Projection::PhPreserving, &ctx.ph, v)?),
        })
    }

    /// The full-order system of a formulation in the sweep.
    pub fn system(&self, formulation: Formulation) -> Option<&PhDescriptorSystem<f64>> {
        self.cfg
            .formulations
            .iter()
            .position(|&g| g == formulation)
            .map(|i| &self.contexts[i].ph)
    }
}

/// A reduced model for timing runs.
pub enum TimedRom {
    Real(ReducedSystem<f64>),
    Complex(ReducedSystem<Complex<f64>>),
}

/// Real and (if any entry is non-real) imaginary parts.
fn split<C: ComplexField<RealField = f64>>(m: &DMatrix<C>) -> (DMatrix<f64>, Option<DMatrix<f64>>) {
    let re = m.map(|c| c.real());
    let im = m.map(|c| c.imaginary());
    let complex = im.iter().any(|&v| v != 0.0);
    (re, complex.then_some(im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_follows_the_error_threshold() {
        let key = ComboKey {
            formulation: Formulation::Velocity,
            count: 5,
            projection: Projection::PhPreserving,
            method: BasisMethod::PodState,
            n: 8,
        };
        let rec = |eps, status| ErrorRecord {
            key,
            eps,
            best: Some(0.01),
            status,
            rom_seconds: 0.0,
        };
        assert!(!rec(Some(0.5), Status::Ok).blank());
        assert!(!rec(Some(1.0), Status::Ok).blank());
        assert!(rec(Some(1.01), Status::Ok).blank());
        assert!(rec(None, Status::Diverged).blank());
        assert!(rec(None, Status::Diverged).diverged());
    }

    #[test]
    fn krylov_block_count_covers_the_largest_size() {
        // two points, one input: four real columns per block level
        assert!(4 * krylov_blocks(160, 2, 1) >= 160);
        assert!(2 * krylov_blocks(7, 1, 1) >= 7);
    }

    #[test]
    fn unit_file_names_are_distinct() {
        let a = Unit {
            formulation: Formulation::Momentum,
            method: BasisMethod::SvdLike,
            counts: vec![5],
        };
        let b = Unit {
            counts: vec![5, 10],
            ..a.clone()
        };
        assert_eq!(a.file_name(), "momentum_SVD-like_5.csv");
        assert_ne!(a.file_name(), b.file_name());
    }
}
