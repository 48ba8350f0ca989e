use nalgebra::DMatrix;

use super::{sorted_symmetric_eigen, BasisMatrix, BasisMethod, BasisSource, ReducedBasis, SnapshotData, SnapshotMatrix};
use crate::error::{Error, Result};
use crate::linalg::{block_diag, orthonormalize};
use crate::ph::Partition;
use crate::scalar::Real;

/// Relative cut-off below which POD eigenvalues count as zero.
const POD_CUTOFF: f64 = 1e-12;

/// Left singular directions of a snapshot block, descending.
#[derive(Debug, Clone)]
pub struct PodDecomposition<T: Real> {
    pub modes: DMatrix<T>,
    /// Eigenvalues `λᵢ = σᵢ²` of the correlation matrix.
    pub values: Vec<T>,
}

impl<T: Real> PodDecomposition<T> {
    /// Method of snapshots: eigenpairs of `X̂ᵀX̂`, modes `X̂v̂ᵢ/√λᵢ`.
    pub fn method_of_snapshots(x: &DMatrix<T>) -> Self {
        let (values, vectors) = sorted_symmetric_eigen(&(x.transpose() * x));
        let lmax = values.first().copied().unwrap_or(T::zero());
        let keep: Vec<usize> = (0..values.len())
            .filter(|&i| values[i] > T::zero() && values[i] >= lmax * T::lit(POD_CUTOFF))
            .collect();
        let mut modes = DMatrix::zeros(x.nrows(), keep.len());
        for (c, &i) in keep.iter().enumerate() {
            let u = x * vectors.column(i) / values[i].sqrt();
            modes.set_column(c, &u);
        }
        // one more Gram-Schmidt sweep restores orthonormality lost for small λ
        let modes = orthonormalize(&modes, T::lit(1e-8));
        let values = keep.iter().take(modes.ncols()).map(|&i| values[i]).collect();
        Self { modes, values }
    }

    /// Eigenpairs of the correlation matrix `X̂X̂ᵀ` itself.
    pub fn from_gram(gram: &DMatrix<T>) -> Self {
        let (values, vectors) = sorted_symmetric_eigen(gram);
        let lmax = values.first().copied().unwrap_or(T::zero());
        let keep: Vec<usize> = (0..values.len())
            .filter(|&i| values[i] > T::zero() && values[i] >= lmax * T::lit(POD_CUTOFF))
            .collect();
        let modes = DMatrix::from_fn(gram.nrows(), keep.len(), |r, c| vectors[(r, keep[c])]);
        Self {
            modes,
            values: keep.iter().map(|&i| values[i]).collect(),
        }
    }

    /// Picks the cheaper route: snapshots when `m ≤ rows`, else correlation.
    pub fn new(x: &DMatrix<T>) -> Self {
        if x.ncols() <= x.nrows() {
            Self::method_of_snapshots(x)
        } else {
            Self::from_gram(&(x * x.transpose()))
        }
    }

    pub fn rank(&self) -> usize {
        self.modes.ncols()
    }

    pub fn modes(&self, n: usize) -> Result<DMatrix<T>> {
        if n > self.rank() {
            return Err(Error::InsufficientRank {
                requested: n,
                rank: self.rank(),
            });
        }
        Ok(self.modes.columns(0, n).into_owned())
    }

    fn singular_values(&self, n: usize) -> Vec<T> {
        self.values.iter().take(n).map(|v| v.sqrt()).collect()
    }
}

/// First `n` POD modes of `X̂`.
pub fn pod<T: Real>(x: &DMatrix<T>, n: usize) -> Result<DMatrix<T>> {
    PodDecomposition::new(x).modes(n)
}

impl<T: Real> SnapshotMatrix<T> {
    fn pod_block(&self, start: usize, len: usize) -> PodDecomposition<T> {
        match &self.data {
            SnapshotData::Columns(x) if x.ncols() <= len => {
                PodDecomposition::method_of_snapshots(&x.rows(start, len).into_owned())
            }
            _ => PodDecomposition::from_gram(&self.block_gram(start, len)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PodVariant {
    /// Full state.
    State,
    /// `(z, q)` rows, duplicated on the diagonal.
    Disp,
    /// Each of `z`, `q`, `ż`, `q̇` separately.
    Individual,
}

/// POD decompositions for one variant, truncated on demand.
#[derive(Debug, Clone)]
pub struct PodSource<T: Real> {
    variant: PodVariant,
    parts: Vec<PodDecomposition<T>>,
    partition: Partition,
}

impl<T: Real> PodSource<T> {
    pub fn new(snapshots: &SnapshotMatrix<T>, variant: PodVariant) -> Self {
        let p = snapshots.partition;
        let parts = match variant {
            PodVariant::State => vec![snapshots.pod_block(0, p.n())],
            PodVariant::Disp => vec![snapshots.pod_block(0, p.n_hat())],
            PodVariant::Individual => p
                .blocks()
                .iter()
                .map(|&(s, l)| snapshots.pod_block(s, l))
                .collect(),
        };
        Self {
            variant,
            parts,
            partition: p,
        }
    }
}

impl<T: Real> BasisSource<T> for PodSource<T> {
    fn method(&self) -> BasisMethod {
        match self.variant {
            PodVariant::State => BasisMethod::PodState,
            PodVariant::Disp => BasisMethod::PodDisp,
            PodVariant::Individual => BasisMethod::PodIndividual,
        }
    }

    fn max_size(&self) -> usize {
        let min_rank = self.parts.iter().map(|p| p.rank()).min().unwrap_or(0);
        match self.variant {
            PodVariant::State => min_rank,
            PodVariant::Disp => 2 * min_rank,
            PodVariant::Individual => 4 * min_rank,
        }
    }

    fn basis(&self, n: usize) -> Result<ReducedBasis<T>> {
        let k = match self.variant {
            PodVariant::State => 1,
            PodVariant::Disp => 2,
            PodVariant::Individual => 4,
        };
        if n % k != 0 {
            return Err(Error::Config(format!(
                "{} needs a size divisible by {k}, got {n}",
                self.method()
            )));
        }
        let per = n / k;
        let (v, weights) = match self.variant {
            PodVariant::State => (self.parts[0].modes(n)?, self.parts[0].singular_values(n)),
            PodVariant::Disp => {
                let u = self.parts[0].modes(per)?;
                (block_diag(&[&u, &u]), self.parts[0].singular_values(per))
            }
            PodVariant::Individual => {
                let blocks = self
                    .parts
                    .iter()
                    .map(|p| p.modes(per))
                    .collect::<Result<Vec<_>>>()?;
                let refs: Vec<&DMatrix<T>> = blocks.iter().collect();
                let w = self.parts.iter().flat_map(|p| p.singular_values(per)).collect();
                (block_diag(&refs), w)
            }
        };
        debug_assert_eq!(v.nrows(), self.partition.n());
        Ok(ReducedBasis {
            v: BasisMatrix::Real(v),
            method: self.method(),
            orthonormal: true,
            symplectic: false,
            block_diagonal: self.variant != PodVariant::State,
            weights,
        })
    }
}

pub fn pod_state<T: Real>(snapshots: &SnapshotMatrix<T>, n: usize) -> Result<ReducedBasis<T>> {
    PodSource::new(snapshots, PodVariant::State).basis(n)
}

pub fn pod_disp<T: Real>(snapshots: &SnapshotMatrix<T>, n: usize) -> Result<ReducedBasis<T>> {
    PodSource::new(snapshots, PodVariant::Disp).basis(n)
}

pub fn pod_individual<T: Real>(snapshots: &SnapshotMatrix<T>, n: usize) -> Result<ReducedBasis<T>> {
    PodSource::new(snapshots, PodVariant::Individual).basis(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_principal_angle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn orthogonal_columns_are_recovered_in_order() {
        let mut x = DMatrix::<f64>::zeros(5, 3);
        x[(0, 0)] = 2.0;
        x[(1, 1)] = 3.0;
        x[(2, 2)] = 1.0;
        let v = pod(&x, 2).unwrap();
        let expected = DMatrix::from_fn(5, 2, |i, j| if (i, j) == (1, 0) || (i, j) == (0, 1) { 1.0 } else { 0.0 });
        assert!(max_principal_angle(&v, &expected) < 1e-12);
        assert!(v[(1, 0)].abs() > 0.999);
    }

    #[test]
    fn matches_dense_svd() {
        let x = random(50, 20, 3);
        let v = pod(&x, 8).unwrap();
        let svd = x.clone().svd(true, false);
        let mut idx: Vec<usize> = (0..20).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
        let u = svd.u.unwrap();
        for (c, &i) in idx.iter().take(8).enumerate() {
            let dot = v.column(c).dot(&u.column(i)).abs();
            assert!((dot - 1.0).abs() < 1e-10, "mode {c}: |cos| = {dot}");
        }
    }

    #[test]
    fn tail_sum_equals_reconstruction_error() {
        let x = random(30, 12, 9);
        let dec = PodDecomposition::new(&x);
        for n in [1, 4, 11] {
            let v = dec.modes(n).unwrap();
            let err = (&x - &v * (v.transpose() * &x)).norm_squared();
            let tail: f64 = dec.values[n..].iter().sum();
            assert!((err - tail).abs() <= 1e-8 * tail.max(1e-300), "n = {n}: {err} vs {tail}");
        }
    }

    #[test]
    fn rank_limit_is_reported() {
        let x = random(10, 3, 1);
        match pod(&x, 4) {
            Err(Error::InsufficientRank { requested: 4, rank: 3 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gram_and_snapshot_routes_agree() {
        let x = random(12, 40, 5);
        let a = PodDecomposition::method_of_snapshots(&x);
        let b = PodDecomposition::from_gram(&(&x * x.transpose()));
        assert!(max_principal_angle(&a.modes(6).unwrap(), &b.modes(6).unwrap()) < 1e-8);
    }

    #[test]
    fn variants_have_their_block_structure() {
        let part = Partition { n_s: 3, n_f: 4 };
        let x = random(14, 30, 11);
        let s = SnapshotMatrix::new(x.clone(), vec![], part).unwrap();
        let disp = pod_disp(&s, 4).unwrap();
        let v = disp.v.as_real().unwrap();
        assert!(v.view((0, 2), (7, 2)).amax() == 0.0 && v.view((7, 0), (7, 2)).amax() == 0.0);
        assert_eq!(v.view((0, 0), (7, 2)), v.view((7, 2), (7, 2)));
        let ind = pod_individual(&s, 4).unwrap();
        let v = ind.v.as_real().unwrap();
        for (b, &(start, len)) in part.blocks().iter().enumerate() {
            let oracle = pod(&x.rows(start, len).into_owned(), 1).unwrap();
            let col = v.column(b);
            assert!((col.rows(start, len).dot(&oracle.column(0)).abs() - 1.0).abs() < 1e-10);
            assert!((col.norm() - 1.0).abs() < 1e-12);
        }
        for b in [pod_state(&s, 6).unwrap(), disp, ind] {
            assert!(b.orthonormality_residual() < 1e-10);
        }
        assert!(pod_disp(&s, 3).is_err());
        assert!(pod_individual(&s, 6).is_err());
    }
}
