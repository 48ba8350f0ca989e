//! Reduced-order bases from system matrices (modal, Krylov) and from
//! snapshots (POD variants, complex SVD, SVD-like).

mod krylov;
mod modal;
mod pod;
mod symplectic;

pub use krylov::{krylov_basis, KrylovDecomposition, DEFAULT_EXPANSION_HZ};
pub use modal::{modal_basis, ModalDecomposition};
pub use pod::{pod, pod_disp, pod_individual, pod_state, PodDecomposition, PodSource, PodVariant};
pub use symplectic::{
    psd_complex_svd, svd_like_basis, symplectic_inverse, ComplexSvdDecomposition, SvdLikeDecomposition,
};

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, ComplexField, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lift, orthonormality_residual, symplectic_residual};
use crate::ph::Partition;
use crate::scalar::Real;

/// Origin of one snapshot column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub frequency: f64,
    pub step: usize,
}

#[derive(Debug, Clone)]
enum SnapshotData<T: Real> {
    Columns(DMatrix<T>),
    /// Correlation matrix `X̂X̂ᵀ` of `columns` snapshots.
    Gram { gram: DMatrix<T>, columns: usize },
}

/// Snapshot data `X̂` (or only its correlation matrix `X̂X̂ᵀ`).
#[derive(Debug, Clone)]
pub struct SnapshotMatrix<T: Real> {
    data: SnapshotData<T>,
    pub provenance: Vec<Provenance>,
    pub partition: Partition,
}

impl<T: Real> SnapshotMatrix<T> {
    pub fn new(x: DMatrix<T>, provenance: Vec<Provenance>, partition: Partition) -> Result<Self> {
        if x.ncols() == 0 {
            return Err(Error::Config("snapshot matrix needs at least one column".into()));
        }
        if x.nrows() != partition.n() {
            return Err(Error::Dimension(format!(
                "snapshots have {} rows, partition implies {}",
                x.nrows(),
                partition.n()
            )));
        }
        if !provenance.is_empty() && provenance.len() != x.ncols() {
            return Err(Error::Dimension("provenance does not cover every column".into()));
        }
        Ok(Self {
            data: SnapshotData::Columns(x),
            provenance,
            partition,
        })
    }

    /// Snapshot set known only through `X̂X̂ᵀ`.
    pub fn from_gram(gram: DMatrix<T>, columns: usize, partition: Partition) -> Result<Self> {
        if columns == 0 {
            return Err(Error::Config("snapshot matrix needs at least one column".into()));
        }
        if gram.shape() != (partition.n(), partition.n()) {
            return Err(Error::Dimension(format!(
                "correlation matrix is {:?}, partition implies N = {}",
                gram.shape(),
                partition.n()
            )));
        }
        Ok(Self {
            data: SnapshotData::Gram { gram, columns },
            provenance: Vec::new(),
            partition,
        })
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    /// Number of snapshot columns `m`.
    pub fn columns(&self) -> usize {
        match &self.data {
            SnapshotData::Columns(x) => x.ncols(),
            SnapshotData::Gram { columns, .. } => *columns,
        }
    }

    /// Raw snapshots, if stored.
    pub fn matrix(&self) -> Option<&DMatrix<T>> {
        match &self.data {
            SnapshotData::Columns(x) => Some(x),
            SnapshotData::Gram { .. } => None,
        }
    }

    /// `X̂X̂ᵀ`.
    pub fn gram(&self) -> DMatrix<T> {
        match &self.data {
            SnapshotData::Columns(x) => x * x.transpose(),
            SnapshotData::Gram { gram, .. } => gram.clone(),
        }
    }

    /// A matrix `X̃` with `X̃X̃ᵀ = X̂X̂ᵀ` and at most `min(N, m)` columns.
    ///
    /// Every basis in this module depends on the snapshots only through
    /// `X̂X̂ᵀ`, so `X̃` yields the same bases as `X̂`.
    pub fn factor(&self) -> DMatrix<T> {
        match &self.data {
            SnapshotData::Columns(x) if x.ncols() <= x.nrows() => x.clone(),
            _ => {
                let (values, vectors) = sorted_symmetric_eigen(&self.gram());
                let lmax = values.first().copied().unwrap_or(T::zero());
                let keep: Vec<usize> = (0..values.len())
                    .filter(|&i| values[i] > lmax * T::lit(f64::EPSILON))
                    .collect();
                DMatrix::from_fn(self.n(), keep.len(), |r, c| {
                    vectors[(r, keep[c])] * values[keep[c]].sqrt()
                })
            }
        }
    }

    /// Rows `start..start+len` of the snapshot data (as a snapshot set of the
    /// sub-block).
    fn block_gram(&self, start: usize, len: usize) -> DMatrix<T> {
        match &self.data {
            SnapshotData::Columns(x) => {
                let b = x.rows(start, len);
                &b * b.transpose()
            }
            SnapshotData::Gram { gram, .. } => gram.view((start, start), (len, len)).into_owned(),
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending;
/// equal eigenvalues keep the solver's order.
pub(crate) fn sorted_symmetric_eigen<C: ComplexField>(m: &DMatrix<C>) -> (Vec<C::RealField>, DMatrix<C>)
where
    C::RealField: Real,
{
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])].clone());
    (values, vectors)
}

/// Basis-generation technique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BasisMethod {
    Modal,
    Krylov,
    #[serde(rename = "POD-State")]
    PodState,
    #[serde(rename = "POD-Disp")]
    PodDisp,
    #[serde(rename = "POD-Indiv")]
    PodIndividual,
    #[serde(rename = "C-SVD")]
    ComplexSvd,
    #[serde(rename = "SVD-like")]
    SvdLike,
}

impl BasisMethod {
    /// Report order.
    pub const ALL: [BasisMethod; 7] = [
        BasisMethod::Modal,
        BasisMethod::Krylov,
        BasisMethod::PodState,
        BasisMethod::PodDisp,
        BasisMethod::PodIndividual,
        BasisMethod::ComplexSvd,
        BasisMethod::SvdLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BasisMethod::Modal => "Modal",
            BasisMethod::Krylov => "Krylov",
            BasisMethod::PodState => "POD-State",
            BasisMethod::PodDisp => "POD-Disp",
            BasisMethod::PodIndividual => "POD-Indiv",
            BasisMethod::ComplexSvd => "C-SVD",
            BasisMethod::SvdLike => "SVD-like",
        }
    }

    /// Number of equally sized column groups the basis is assembled from;
    /// a basis of size `n` takes the leading `n/k` columns of each group.
    pub fn column_groups(self) -> usize {
        match self {
            BasisMethod::Modal | BasisMethod::Krylov | BasisMethod::PodState => 1,
            BasisMethod::PodDisp | BasisMethod::ComplexSvd | BasisMethod::SvdLike => 2,
            BasisMethod::PodIndividual => 4,
        }
    }

    /// Whether the method needs snapshots.
    pub fn is_data_based(self) -> bool {
        !matches!(self, BasisMethod::Modal | BasisMethod::Krylov)
    }
}

impl fmt::Display for BasisMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BasisMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BasisMethod::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown basis method '{s}'")))
    }
}

/// Real or complex basis matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum BasisMatrix<T: Real> {
    Real(DMatrix<T>),
    Complex(DMatrix<Complex<T>>),
}

impl<T: Real> BasisMatrix<T> {
    pub fn nrows(&self) -> usize {
        match self {
            BasisMatrix::Real(v) => v.nrows(),
            BasisMatrix::Complex(v) => v.nrows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            BasisMatrix::Real(v) => v.ncols(),
            BasisMatrix::Complex(v) => v.ncols(),
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, BasisMatrix::Complex(_))
    }

    /// The basis as a complex matrix.
    pub fn to_complex(&self) -> DMatrix<Complex<T>> {
        match self {
            BasisMatrix::Real(v) => lift(v),
            BasisMatrix::Complex(v) => v.clone(),
        }
    }

    pub fn as_real(&self) -> Option<&DMatrix<T>> {
        match self {
            BasisMatrix::Real(v) => Some(v),
            BasisMatrix::Complex(_) => None,
        }
    }

    /// First `n` columns.
    pub fn truncate(&self, n: usize) -> Self {
        match self {
            BasisMatrix::Real(v) => BasisMatrix::Real(v.columns(0, n).into_owned()),
            BasisMatrix::Complex(v) => BasisMatrix::Complex(v.columns(0, n).into_owned()),
        }
    }

    /// `T·V` for a real left factor.
    pub fn left_mul(&self, t: &DMatrix<T>) -> Self {
        match self {
            BasisMatrix::Real(v) => BasisMatrix::Real(t * v),
            BasisMatrix::Complex(v) => BasisMatrix::Complex(lift::<T, Complex<T>>(t) * v),
        }
    }
}

/// Basis `V` with structure flags.
#[derive(Debug, Clone)]
pub struct ReducedBasis<T: Real> {
    pub v: BasisMatrix<T>,
    pub method: BasisMethod,
    pub orthonormal: bool,
    pub symplectic: bool,
    pub block_diagonal: bool,
    /// Weighted symplectic singular values (SVD-like) or singular values
    /// (POD variants), in selection order.
    pub weights: Vec<T>,
}

impl<T: Real> ReducedBasis<T> {
    pub fn n(&self) -> usize {
        self.v.ncols()
    }

    /// Columns of this basis that form the basis of size `n` from the same
    /// decomposition.
    pub fn sub_columns(&self, n: usize) -> Result<Vec<usize>> {
        let k = self.method.column_groups();
        let total = self.n();
        if n > total || n % k != 0 || total % k != 0 {
            return Err(Error::Config(format!(
                "cannot take {n} columns from a {} basis of size {total}",
                self.method
            )));
        }
        let (group, per) = (total / k, n / k);
        Ok((0..k).flat_map(|g| g * group..g * group + per).collect())
    }

    /// The basis of size `n` from the same decomposition.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let cols = self.sub_columns(n)?;
        let v = match &self.v {
            BasisMatrix::Real(v) => BasisMatrix::Real(v.select_columns(&cols)),
            BasisMatrix::Complex(v) => BasisMatrix::Complex(v.select_columns(&cols)),
        };
        // weights come one per column or one per column pair
        let weights = if self.weights.len() == self.n() {
            cols.iter().map(|&c| self.weights[c]).collect()
        } else {
            self.weights.iter().copied().take(n / self.method.column_groups()).collect()
        };
        Ok(Self {
            v,
            weights,
            ..self.clone()
        })
    }

    /// `‖VᴴV − I‖_F`.
    pub fn orthonormality_residual(&self) -> T {
        match &self.v {
            BasisMatrix::Real(v) => orthonormality_residual(v),
            BasisMatrix::Complex(v) => orthonormality_residual(v),
        }
    }

    /// `‖Vᵀ𝕁V − 𝕁‖_F`, or `∞` for complex bases.
    pub fn symplectic_residual(&self) -> T {
        match &self.v {
            BasisMatrix::Real(v) => symplectic_residual(v),
            BasisMatrix::Complex(_) => T::max_value().unwrap(),
        }
    }

    /// Checks the claimed flags at tolerance `tol`.
    pub fn verify_flags(&self, tol: f64) -> Result<()> {
        let tol = T::lit(tol);
        if self.orthonormal && self.orthonormality_residual() > tol {
            return Err(Error::Rank(format!(
                "{} basis claims orthonormality but has residual {:e}",
                self.method,
                self.orthonormality_residual().as_f64()
            )));
        }
        if self.symplectic && self.symplectic_residual() > tol {
            return Err(Error::Rank(format!(
                "{} basis claims symplecticity but has residual {:e}",
                self.method,
                self.symplectic_residual().as_f64()
            )));
        }
        Ok(())
    }
}

/// Anything that yields bases of any admissible size from one decomposition.
pub trait BasisSource<T: Real> {
    fn method(&self) -> BasisMethod;
    /// Largest size this source can deliver.
    fn max_size(&self) -> usize;
    fn basis(&self, n: usize) -> Result<ReducedBasis<T>>;
}
