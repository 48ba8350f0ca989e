//! On-disk workspace: `model/`, `trajectories/`, `bases/`, `roms/`,
//! `reports/`, the configuration copy and a manifest holding its hash.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use phfsi_bench::report::{config_hash, hex};
use phfsi_core::model::CoupledSecondOrderSystem;
use phfsi_core::mtx::write_matrix;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const SUBDIRS: [&str; 5] = ["model", "trajectories", "bases", "roms", "reports"];
const MANIFEST: &str = "manifest.txt";
const CONFIG: &str = "config.toml";
const CHECKSUMS: &str = "model/checksums.txt";

#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
    pub config: RunConfig,
    pub hash: String,
}

/// Outcome of `Workspace::create`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelState {
    Written,
    UpToDate,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(CliError::io(path.display().to_string()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(CliError::io(path.display().to_string()))
}

fn manifest_hash(text: &str) -> Option<&str> {
    text.lines().find_map(|l| l.strip_prefix("config_hash = "))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(CliError::io(path.display().to_string()))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

impl Workspace {
    /// Assembles the model into `root` unless the workspace already holds
    /// an intact copy for the same configuration hash.
    pub fn create(root: &Path, config: RunConfig) -> Result<(Self, CoupledSecondOrderSystem<f64>, ModelState)> {
        let hash = config_hash(&config.model(), &config.sweep);
        let ws = Self {
            root: root.to_path_buf(),
            config,
            hash,
        };
        let existing = fs::read_to_string(ws.root.join(MANIFEST)).ok();
        let css = ws.config.model().build::<f64>()?;
        if existing.as_deref().and_then(manifest_hash) == Some(ws.hash.as_str()) && ws.verify().is_ok() {
            return Ok((ws, css, ModelState::UpToDate));
        }
        for d in SUBDIRS {
            let p = ws.root.join(d);
            fs::create_dir_all(&p).map_err(CliError::io(p.display().to_string()))?;
        }
        write(&ws.root.join(CONFIG), &ws.config.render())?;
        let mut sums = String::new();
        for (name, m) in model_files(&css) {
            let rel = format!("model/{name}.mtx");
            let p = ws.root.join(&rel);
            write_matrix(&p, m)?;
            sums.push_str(&format!("{}  {rel}\n", sha256_file(&p)?));
        }
        write(&ws.root.join(CHECKSUMS), &sums)?;
        let manifest = format!(
            "config_hash = {}\nseed = {}\nn_s = {}\nn_f = {}\nn = {}\n",
            ws.hash,
            ws.config.sweep.seed,
            css.n_s(),
            css.n_f(),
            2 * css.n_hat()
        );
        // the manifest goes last so an interrupted run is not mistaken for a finished one
        write(&ws.root.join(MANIFEST), &manifest)?;
        Ok((ws, css, ModelState::Written))
    }

    /// Opens an existing workspace, checking the configuration against the
    /// manifest and the model files against their checksums.
    pub fn open(root: &Path) -> Result<Self> {
        let manifest_path = root.join(MANIFEST);
        let manifest = fs::read_to_string(&manifest_path).map_err(|_| {
            CliError::Missing(format!("no workspace manifest at {}; run `phfsi model` first", manifest_path.display()))
        })?;
        let recorded = manifest_hash(&manifest)
            .ok_or_else(|| CliError::Integrity(format!("{} has no config_hash line", manifest_path.display())))?
            .to_string();
        let config = RunConfig::parse(&read(&root.join(CONFIG))?)?;
        let hash = config_hash(&config.model(), &config.sweep);
        if hash != recorded {
            return Err(CliError::Integrity(format!(
                "{CONFIG} hashes to {hash} but the manifest records {recorded}"
            )));
        }
        let ws = Self {
            root: root.to_path_buf(),
            config,
            hash,
        };
        ws.verify()?;
        Ok(ws)
    }

    /// Compares every model file against its recorded checksum.
    pub fn verify(&self) -> Result<()> {
        let sums = read(&self.root.join(CHECKSUMS))
            .map_err(|_| CliError::Missing(format!("{CHECKSUMS} is missing; run `phfsi model` again")))?;
        for line in sums.lines() {
            let (want, rel) = line
                .split_once("  ")
                .ok_or_else(|| CliError::Integrity(format!("malformed checksum line '{line}'")))?;
            let p = self.root.join(rel);
            if !p.exists() {
                return Err(CliError::Missing(format!("{rel} is missing; run `phfsi model` again")));
            }
            if sha256_file(&p)? != want {
                return Err(CliError::Integrity(format!("checksum mismatch for {rel}")));
            }
        }
        Ok(())
    }

    pub fn dir(&self, sub: &str) -> PathBuf {
        self.root.join(sub)
    }

    /// Fails unless `stamp` is this workspace's configuration hash.
    pub fn require_hash(&self, what: &str, stamp: Option<&str>) -> Result<()> {
        match stamp {
            Some(h) if h == self.hash => Ok(()),
            Some(h) => Err(CliError::Integrity(format!(
                "{what} was produced under config hash {h}, the workspace is at {}",
                self.hash
            ))),
            None => Err(CliError::Integrity(format!("{what} carries no config hash"))),
        }
    }
}

/// Assembled blocks written to `model/`.
pub fn model_files(css: &CoupledSecondOrderSystem<f64>) -> [(&'static str, &DMatrix<f64>); 8] {
    [
        ("M_S", &css.m_s),
        ("D_S", &css.d_s),
        ("K_S", &css.k_s),
        ("M_F", &css.m_f),
        ("K_F", &css.k_f),
        ("R", &css.r),
        ("F", &css.input_map),
        ("C_obs", &css.output_map),
    ]
}
