use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use phfsi_core::basis::BasisMethod;
use phfsi_core::model::ModelParams;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::SweepConfig;
use crate::error::{BenchError, Result};
use crate::speedup::SpeedupRow;
use crate::sweep::{ComboKey, ErrorRecord, ModelDims, Status};

pub const RECORD_HEADER: &str = "formulation,trajectories,projection,basis,n,eps_r,best_eps_r,status,blank";

#[derive(Serialize)]
struct Hashed<'a> {
    model: &'a ModelParams,
    sweep: &'a SweepConfig,
}

/// SHA-256 of the canonical TOML rendering of model and sweep settings.
pub fn config_hash(params: &ModelParams, cfg: &SweepConfig) -> String {
    let text = toml::to_string(&Hashed { model: params, sweep: cfg }).expect("settings serialize to TOML");
    hex(&Sha256::digest(text.as_bytes()))
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn number(v: Option<f64>) -> String {
    // `{:e}` is the shortest representation that parses back to the same bits
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Header plus one line per record.
pub fn record_rows(records: &[ErrorRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        let k = &r.key;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            k.formulation,
            k.count,
            k.projection,
            k.method,
            k.n,
            number(r.eps),
            number(r.best),
            r.status,
            u8::from(r.blank())
        );
    }
    out
}

/// Inverse of [`record_rows`]; wall times are not stored and come back as 0.
pub fn parse_records(text: &str) -> Result<Vec<ErrorRecord>> {
    let bad = |line: usize, reason: String| BenchError::Format {
        path: format!("line {}", line + 1),
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == RECORD_HEADER => {}
        _ => return Err(bad(0, "missing record header".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad(i, format!("expected 9 fields, found {}", f.len())));
        }
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| bad(i, format!("{s}: {e}")))
            }
        };
        let status = match f[7] {
            "ok" => Status::Ok,
            "diverged" => Status::Diverged,
            "unavailable" => Status::Unavailable,
            s => match s.strip_prefix("failed: ") {
                Some(why) => Status::Failed(why.to_string()),
                None => return Err(bad(i, format!("unknown status '{s}'"))),
            },
        };
        out.push(ErrorRecord {
            key: ComboKey {
                formulation: f[0].parse().map_err(|e| bad(i, format!("{e}")))?,
                count: f[1].parse().map_err(|e| bad(i, format!("{e}")))?,
                projection: f[2].parse().map_err(|e| bad(i, format!("{e}")))?,
                method: f[3].parse().map_err(|e| bad(i, format!("{e}")))?,
                n: f[4].parse().map_err(|e| bad(i, format!("{e}")))?,
            },
            eps: opt(f[5])?,
            best: opt(f[6])?,
            status,
            rom_seconds: 0.0,
        });
    }
    Ok(out)
}

/// One `(projection × basis)` matrix per formulation and trajectory count,
/// all at size `n`. Blank entries are empty cells.
pub fn heatmap(records: &[ErrorRecord], n: usize) -> String {
    let methods: Vec<BasisMethod> = BasisMethod::ALL
        .into_iter()
        .filter(|m| records.iter().any(|r| r.key.method == *m))
        .collect();
    let mut out = String::from("formulation,trajectories,projection");
    for m in &methods {
        out.push(',');
        out.push_str(m.name());
    }
    out.push('\n');
    let mut rows: Vec<(ComboKey, Vec<String>)> = Vec::new();
    for r in records.iter().filter(|r| r.key.n == n) {
        let row_key = ComboKey {
            method: BasisMethod::Modal,
            ..r.key
        };
        let col = methods.iter().position(|m| *m == r.key.method).expect("method listed");
        let cell = if r.blank() { String::new() } else { number(r.eps) };
        match rows.iter_mut().find(|(k, _)| *k == row_key) {
            Some((_, cells)) => cells[col] = cell,
            None => {
                let mut cells = vec![String::new(); methods.len()];
                cells[col] = cell;
                rows.push((row_key, cells));
            }
        }
    }
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    for (k, cells) in rows {
        let _ = writeln!(out, "{},{},{},{}", k.formulation, k.count, k.projection, cells.join(","));
    }
    out
}

/// Provenance of a sweep.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub seed: u64,
    pub config_hash: String,
    pub dims: ModelDims,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_hz: Vec<f64>,
    pub eval_hz: Vec<f64>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "config_hash = {}", self.config_hash);
        let _ = writeln!(s, "n_s = {}", self.dims.n_s);
        let _ = writeln!(s, "n_f = {}", self.dims.n_f);
        let _ = writeln!(s, "n = {}", self.dims.n);
        let _ = writeln!(s, "dt = {:e}", self.dt);
        let _ = writeln!(s, "t_end = {:e}", self.t_end);
        let _ = writeln!(s, "snapshot_hz = {}", list(&self.snapshot_hz));
        let _ = writeln!(s, "eval_hz = {}", list(&self.eval_hz));
        let _ = writeln!(s, "error_norm = velocity-form energy norm, trapezoid in time, mean over eval_hz");
        let _ = writeln!(
            s,
            "speedup = median of repeated online runs (FOM and pH ROM, basis construction excluded), averaged over basis methods"
        );
        s
    }

    /// Reads `seed` and `config_hash` back from a rendered manifest.
    pub fn parse_seed_and_hash(text: &str) -> Option<(u64, String)> {
        let mut seed = None;
        let mut hash = None;
        for line in text.lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                match k {
                    "seed" => seed = v.parse().ok(),
                    "config_hash" => hash = Some(v.to_string()),
                    _ => {}
                }
            }
        }
        Some((seed?, hash?))
    }
}

/// Speed-up table.
pub fn speedup_csv(rows: &[SpeedupRow]) -> String {
    let mut out = String::from("n,fom_median_s,rom_median_s,speedup,methods\n");
    for r in rows {
        let _ = writeln!(out, "{},{:e},{:e},{:e},{}", r.n, r.fom_median_s, r.rom_median_s, r.speedup, r.methods);
    }
    out
}

/// Wall times of the batched reduced runs.
pub fn timings_csv(records: &[ErrorRecord]) -> String {
    let mut out = String::from("formulation,trajectories,projection,basis,n,rom_seconds\n");
    for r in records.iter().filter(|r| r.status == Status::Ok) {
        let k = &r.key;
        let _ = writeln!(out, "{},{},{},{},{},{:e}", k.formulation, k.count, k.projection, k.method, k.n, r.rom_seconds);
    }
    out
}

/// Writes `errors_long.csv`, `heatmap_n<k>.csv`, `timings.csv`,
/// `speedup.csv` (if given) and `manifest.txt`; returns the paths.
pub fn emit_reports(dir: &Path, records: &[ErrorRecord], speedup: Option<&[SpeedupRow]>, manifest: &Manifest) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        let p = dir.join(name);
        fs::write(&p, text)?;
        written.push(p);
        Ok(())
    };
    put("errors_long.csv".into(), record_rows(records))?;
    let mut sizes: Vec<usize> = records.iter().map(|r| r.key.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    for n in sizes {
        put(format!("heatmap_n{n}.csv"), heatmap(records, n))?;
    }
    put("timings.csv".into(), timings_csv(records))?;
    if let Some(rows) = speedup {
        put("speedup.csv".into(), speedup_csv(rows))?;
    }
    put("manifest.txt".into(), manifest.render())?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use phfsi_core::ph::Formulation;
    use phfsi_core::reduce::Projection;

    fn rec(p: Projection, m: BasisMethod, eps: Option<f64>, status: Status) -> ErrorRecord {
        ErrorRecord {
            key: ComboKey {
                formulation: Formulation::Momentum,
                count: 10,
                projection: p,
                method: m,
                n: 16,
            },
            eps,
            best: Some(1.0 / 3.0),
            status,
            rom_seconds: 0.25,
        }
    }

    #[test]
    fn records_round_trip_bit_for_bit() {
        let records = vec![
            rec(Projection::PhPreserving, BasisMethod::SvdLike, Some(0.1 + 0.2), Status::Ok),
            rec(Projection::Galerkin, BasisMethod::Krylov, None, Status::Diverged),
            rec(Projection::EnergyStable, BasisMethod::Modal, None, Status::Failed("singular; really".into())),
            rec(Projection::QuasiGalerkin, BasisMethod::PodDisp, None, Status::Unavailable),
        ];
        let text = record_rows(&records);
        let back = parse_records(&text).unwrap();
        let zeroed: Vec<ErrorRecord> = records
            .iter()
            .map(|r| ErrorRecord {
                rom_seconds: 0.0,
                ..r.clone()
            })
            .collect();
        assert_eq!(back, zeroed);
        assert_eq!(record_rows(&back), text);
        assert!(parse_records("nonsense\n").is_err());
    }

    #[test]
    fn heatmap_has_one_empty_cell_per_blank() {
        let mut records = Vec::new();
        for p in Projection::ALL {
            for m in BasisMethod::ALL {
                records.push(rec(p, m, Some(0.05), Status::Ok));
            }
        }
        records[9].eps = Some(3.0);
        let text = heatmap(&records, 16);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "formulation,trajectories,projection,Modal,Krylov,POD-State,POD-Disp,POD-Indiv,C-SVD,SVD-like"
        );
        assert_eq!(lines.len(), 5);
        let empty: usize = lines[1..]
            .iter()
            .map(|l| l.split(',').skip(3).filter(|c| c.is_empty()).count())
            .sum();
        assert_eq!(empty, 1);
    }

    #[test]
    fn hash_tracks_settings() {
        let p = ModelParams::default();
        let cfg = SweepConfig::default();
        let h = config_hash(&p, &cfg);
        assert_eq!(h.len(), 64);
        assert_eq!(h, config_hash(&p, &cfg));
        let other = SweepConfig { seed: 1, ..cfg };
        assert_ne!(h, config_hash(&p, &other));
    }

    #[test]
    fn manifest_exposes_seed_and_hash() {
        let m = Manifest {
            seed: 42,
            config_hash: "ab".into(),
            dims: ModelDims { n_s: 1, n_f: 2, n: 6 },
            dt: 1e-4,
            t_end: 0.1,
            snapshot_hz: vec![100.0],
            eval_hz: vec![200.5],
        };
        assert_eq!(Manifest::parse_seed_and_hash(&m.render()), Some((42, "ab".to_string())));
    }
}
