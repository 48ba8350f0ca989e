use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use super::{BasisMatrix, BasisMethod, BasisSource, ReducedBasis};
use crate::error::{Error, Result};
use crate::ph::PhDescriptorSystem;
use crate::scalar::Real;

/// Eigenpairs of the pencil `(A, E)`, ordered for modal truncation.
///
/// Oscillatory modes come first as conjugate pairs `(λ, λ̄)` with `Im λ > 0`
/// ascending; real (overdamped) eigenvalues follow, ascending in modulus.
#[derive(Debug, Clone)]
pub struct ModalDecomposition<T: Real> {
    pub values: Vec<Complex<T>>,
    /// Unit-norm eigenvectors, one column per entry of `values`.
    pub vectors: DMatrix<Complex<T>>,
    /// Number of leading columns that belong to conjugate pairs.
    pub paired: usize,
}

impl<T: Real> ModalDecomposition<T> {
    pub fn new(ph: &PhDescriptorSystem<T>) -> Result<Self> {
        let n = ph.n();
        let lu = ph.e.clone().lu();
        let ea = lu
            .solve(&ph.a())
            .ok_or_else(|| Error::Factorization("E is singular".into()))?;
        let (lambda, vecs) = T::general_eigen(&ea)
            .ok_or_else(|| Error::Eigen("nonsymmetric eigensolver did not converge".into()))?;

        let mut pairs: Vec<usize> = (0..n).filter(|&i| lambda[i].im > T::zero()).collect();
        pairs.sort_by(|&a, &b| {
            lambda[a]
                .im
                .partial_cmp(&lambda[b].im)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut reals: Vec<usize> = (0..n).filter(|&i| lambda[i].im == T::zero()).collect();
        reals.sort_by(|&a, &b| {
            lambda[a]
                .modulus()
                .partial_cmp(&lambda[b].modulus())
                .unwrap_or(std::cmp::Ordering::Equal)
        });

        let mut values = Vec::with_capacity(2 * pairs.len() + reals.len());
        let mut cols: Vec<DVector<Complex<T>>> = Vec::with_capacity(values.capacity());
        for &i in &pairs {
            let v = unit(vecs.column(i).into_owned());
            values.push(lambda[i]);
            values.push(lambda[i].conj());
            let vc = v.conjugate();
            cols.push(v);
            cols.push(vc);
        }
        let paired = cols.len();
        for &i in &reals {
            values.push(lambda[i]);
            cols.push(unit(vecs.column(i).into_owned()));
        }
        let mut vectors = DMatrix::zeros(n, cols.len());
        for (c, v) in cols.iter().enumerate() {
            vectors.set_column(c, v);
        }
        Ok(Self {
            values,
            vectors,
            paired,
        })
    }

    /// Largest column residual `‖Avᵢ − λᵢEvᵢ‖ / (‖A‖ + |λᵢ|‖E‖)` over the
    /// first `n` modes.
    pub fn residual(&self, ph: &PhDescriptorSystem<T>, n: usize) -> T {
        let a = ph.a().map(Complex::from_real);
        let e = ph.e.map(Complex::from_real);
        let (na, ne) = (a.norm(), e.norm());
        (0..n.min(self.values.len()))
            .map(|i| {
                let v = self.vectors.column(i);
                let r = &a * v - (&e * v) * self.values[i];
                r.norm() / (na + self.values[i].modulus() * ne)
            })
            .fold(T::zero(), |acc, x| acc.max(x))
    }
}

fn unit<T: Real>(v: DVector<Complex<T>>) -> DVector<Complex<T>> {
    let n = v.norm();
    if n > T::zero() {
        v.unscale(n)
    } else {
        v
    }
}

impl<T: Real> BasisSource<T> for ModalDecomposition<T> {
    fn method(&self) -> BasisMethod {
        BasisMethod::Modal
    }

    fn max_size(&self) -> usize {
        self.values.len()
    }

    /// Leading `n` modes; an odd `n` inside the oscillatory range is rounded
    /// up so that no conjugate pair is split.
    fn basis(&self, n: usize) -> Result<ReducedBasis<T>> {
        let mut n = n;
        if n % 2 == 1 && n <= self.paired {
            log::warn!("modal basis size {n} splits a conjugate pair, using {}", n + 1);
            n += 1;
        }
        if n > self.max_size() {
            return Err(Error::InsufficientRank {
                requested: n,
                rank: self.max_size(),
            });
        }
        Ok(ReducedBasis {
            v: BasisMatrix::Complex(self.vectors.columns(0, n).into_owned()),
            method: BasisMethod::Modal,
            orthonormal: false,
            symplectic: false,
            block_diagonal: false,
            weights: Vec::new(),
        })
    }
}

pub fn modal_basis<T: Real>(ph: &PhDescriptorSystem<T>, n: usize) -> Result<ReducedBasis<T>> {
    ModalDecomposition::new(ph)?.basis(n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{block_diag, eye};
    use crate::model::ModelParams;
    use crate::ph::{Formulation, Partition};

    fn rotation_system(freqs: &[f64]) -> PhDescriptorSystem<f64> {
        let blocks: Vec<DMatrix<f64>> = freqs
            .iter()
            .map(|&w| DMatrix::from_row_slice(2, 2, &[0.0, w, -w, 0.0]))
            .collect();
        let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
        let j = block_diag(&refs);
        let n = j.nrows();
        PhDescriptorSystem {
            e: eye(n),
            d: DMatrix::zeros(n, n),
            q: eye(n),
            b: DMatrix::zeros(n, 1),
            j,
            formulation: Formulation::Velocity,
            partition: Partition { n_s: n / 2, n_f: 0 },
            observation: DMatrix::zeros(1, n),
            velocity_map: None,
        }
    }

    #[test]
    fn lowest_pair_comes_first() {
        let ph = rotation_system(&[3.0, 1.0, 2.0]);
        let dec = ModalDecomposition::new(&ph).unwrap();
        assert!((dec.values[0] - Complex::new(0.0, 1.0)).norm() < 1e-12);
        assert!((dec.values[1] - Complex::new(0.0, -1.0)).norm() < 1e-12);
        assert!((dec.values[2].im - 2.0).abs() < 1e-12);
        let v = dec.basis(2).unwrap();
        let vc = match &v.v {
            BasisMatrix::Complex(m) => m.clone(),
            _ => unreachable!(),
        };
        // support lies in the second rotation block
        let outside: f64 = [0, 1, 4, 5].iter().map(|&r| vc.row(r).norm()).sum();
        assert!(outside < 1e-12);
        assert_eq!(dec.basis(3).unwrap().n(), 4);
    }

    #[test]
    fn decoupled_frequencies_match_block_eigenvalues() {
        let mut p = ModelParams::small().undamped();
        p.top.nx = 4;
        p.top.ny = 4;
        p.back.nx = 4;
        p.back.ny = 4;
        p.cavity.nz = 2;
        let css = p.build::<f64>().unwrap().decoupled();
        let ph = PhDescriptorSystem::from_model(&css, Formulation::Velocity).unwrap();
        let dec = ModalDecomposition::new(&ph).unwrap();

        let mut oracle: Vec<f64> = Vec::new();
        for (m, k) in [(&css.m_s, &css.k_s), (&css.m_f, &css.k_f)] {
            let minv = m.map_diagonal(|x| 1.0 / x.sqrt());
            let s = DMatrix::from_fn(k.nrows(), k.ncols(), |i, j| minv[i] * k[(i, j)] * minv[j]);
            oracle.extend(s.symmetric_eigen().eigenvalues.iter().map(|l| l.sqrt()));
        }
        oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let got: Vec<f64> = dec.values.iter().step_by(2).map(|l| l.im).collect();
        assert_eq!(got.len(), oracle.len());
        for (g, o) in got.iter().zip(&oracle) {
            assert!((g - o).abs() <= 1e-8 * o, "{g} vs {o}");
        }
    }

    #[test]
    fn eigen_residual_is_small() {
        let css = ModelParams::small().build::<f64>().unwrap();
        let ph = PhDescriptorSystem::from_model(&css, Formulation::Velocity).unwrap();
        let dec = ModalDecomposition::new(&ph).unwrap();
        assert!(dec.residual(&ph, 40) <= 1e-8);
        let b = dec.basis(20).unwrap();
        assert!(b.v.is_complex() && b.n() == 20);
    }
}
