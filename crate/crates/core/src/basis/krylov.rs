use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use super::{BasisMatrix, BasisMethod, BasisSource, ReducedBasis};
use crate::error::{Error, Result};
use crate::linalg::{columns_to_matrix, lift, orthogonalize_against};
use crate::ph::PhDescriptorSystem;
use crate::scalar::Real;

/// Default expansion frequencies in Hz; `s₀ = 2πi·f`.
pub const DEFAULT_EXPANSION_HZ: [f64; 2] = [100.0, 250.0];

const DEFLATION_TOL: f64 = 1e-10;

/// Realified union of block Krylov spaces
/// `𝒦_{J_b}((A − s₀E)⁻¹E, (A − s₀E)⁻¹B)` over several expansion points.
///
/// Columns are ordered by block level, interleaving the expansion points, so
/// that truncation keeps the lowest moments at every point.
#[derive(Debug, Clone)]
pub struct KrylovDecomposition<T: Real> {
    pub v: DMatrix<T>,
    pub expansion_hz: Vec<f64>,
}

struct PointArnoldi<T: Real> {
    lu: nalgebra::LU<Complex<T>, nalgebra::Dyn, nalgebra::Dyn>,
    q: Vec<DVector<Complex<T>>>,
    last: Vec<DVector<Complex<T>>>,
}

impl<T: Real> PointArnoldi<T> {
    fn new(a: &DMatrix<Complex<T>>, e: &DMatrix<Complex<T>>, b: &DMatrix<Complex<T>>, f: f64) -> Result<Self> {
        let s0 = Complex::new(T::zero(), T::lit(2.0 * std::f64::consts::PI * f));
        let shifted = a - e * s0;
        let scale = shifted.camax();
        let lu = shifted.lu();
        let u = lu.u();
        let min_pivot = u.diagonal().iter().map(|c| c.modulus()).fold(T::max_value().unwrap(), |m, x| m.min(x));
        if !(min_pivot > scale * T::lit(f64::EPSILON)) {
            return Err(Error::SingularShift {
                re: 0.0,
                im: 2.0 * std::f64::consts::PI * f,
            });
        }
        let start = lu
            .solve(b)
            .ok_or(Error::SingularShift {
                re: 0.0,
                im: 2.0 * std::f64::consts::PI * f,
            })?;
        let mut s = Self {
            lu,
            q: Vec::new(),
            last: Vec::new(),
        };
        s.absorb(&start);
        Ok(s)
    }

    /// Orthonormalizes the columns of `w` against the current space and
    /// stores the survivors as the newest block.
    fn absorb(&mut self, w: &DMatrix<Complex<T>>) {
        let mut block = Vec::new();
        for c in w.column_iter() {
            if let Some(qc) = orthogonalize_against(&self.q, &c.into_owned(), T::lit(DEFLATION_TOL)) {
                self.q.push(qc.clone());
                block.push(qc);
            }
        }
        self.last = block;
    }

    fn advance(&mut self, e: &DMatrix<Complex<T>>) {
        if self.last.is_empty() {
            return;
        }
        let w = columns_to_matrix(e.nrows(), &self.last);
        let next = self.lu.solve(&(e * w)).expect("factorization checked at construction");
        self.absorb(&next);
    }
}

impl<T: Real> KrylovDecomposition<T> {
    /// Runs `block_count` block Arnoldi steps at each expansion point.
    pub fn new(ph: &PhDescriptorSystem<T>, expansion_hz: &[f64], block_count: usize) -> Result<Self> {
        if expansion_hz.is_empty() || block_count == 0 {
            return Err(Error::Config("Krylov basis needs an expansion point and a block count".into()));
        }
        let a: DMatrix<Complex<T>> = lift(&ph.a());
        let e: DMatrix<Complex<T>> = lift(&ph.e);
        let b: DMatrix<Complex<T>> = lift(&ph.b);
        let mut points = expansion_hz
            .iter()
            .map(|&f| PointArnoldi::new(&a, &e, &b, f))
            .collect::<Result<Vec<_>>>()?;

        let n = ph.n();
        let tol = T::lit(DEFLATION_TOL);
        let mut real: Vec<DVector<T>> = Vec::new();
        for level in 0..block_count {
            if level > 0 {
                for p in points.iter_mut() {
                    p.advance(&e);
                }
            }
            for p in &points {
                for c in &p.last {
                    for part in [c.map(|z| z.re), c.map(|z| z.im)] {
                        if real.len() == n {
                            break;
                        }
                        if let Some(q) = orthogonalize_against(&real, &part, tol) {
                            real.push(q);
                        }
                    }
                }
            }
        }
        Ok(Self {
            v: columns_to_matrix(n, &real),
            expansion_hz: expansion_hz.to_vec(),
        })
    }
}

impl<T: Real> BasisSource<T> for KrylovDecomposition<T> {
    fn method(&self) -> BasisMethod {
        BasisMethod::Krylov
    }

    fn max_size(&self) -> usize {
        self.v.ncols()
    }

    fn basis(&self, n: usize) -> Result<ReducedBasis<T>> {
        if n > self.max_size() {
            return Err(Error::InsufficientRank {
                requested: n,
                rank: self.max_size(),
            });
        }
        Ok(ReducedBasis {
            v: BasisMatrix::Real(self.v.columns(0, n).into_owned()),
            method: BasisMethod::Krylov,
            orthonormal: true,
            symplectic: false,
            block_diagonal: false,
            weights: Vec::new(),
        })
    }
}

/// Full realified Krylov basis with `block_count` blocks per expansion point.
pub fn krylov_basis<T: Real>(
    ph: &PhDescriptorSystem<T>,
    expansion_hz: &[f64],
    block_count: usize,
) -> Result<ReducedBasis<T>> {
    let dec = KrylovDecomposition::new(ph, expansion_hz, block_count)?;
    dec.basis(dec.max_size())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::ph::Formulation;

    fn transfer(e: &DMatrix<f64>, a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, f: f64) -> Complex<f64> {
        let s = Complex::new(0.0, 2.0 * std::f64::consts::PI * f);
        let k: DMatrix<Complex<f64>> = lift::<f64, Complex<f64>>(e) * s - lift::<f64, Complex<f64>>(a);
        let x = k.lu().solve(&lift::<f64, Complex<f64>>(b)).unwrap();
        (lift::<f64, Complex<f64>>(c) * x)[(0, 0)]
    }

    #[test]
    fn first_block_spans_shifted_solve() {
        let css = ModelParams::small().build::<f64>().unwrap();
        let ph = PhDescriptorSystem::from_model(&css, Formulation::Velocity).unwrap();
        let b = krylov_basis(&ph, &[100.0], 1).unwrap();
        assert_eq!(b.n(), 2);
        let v = b.v.as_real().unwrap();
        let s = Complex::new(0.0, 2.0 * std::f64::consts::PI * 100.0);
        let k = lift::<f64, Complex<f64>>(&ph.a()) - lift::<f64, Complex<f64>>(&ph.e) * s;
        let x = k.lu().solve(&lift::<f64, Complex<f64>>(&ph.b)).unwrap();
        let vc = lift::<f64, Complex<f64>>(v);
        let resid = &x - &vc * (vc.adjoint() * &x);
        assert!(resid.norm() <= 1e-10 * x.norm());
        assert!(b.orthonormality_residual() < 1e-10);
    }

    #[test]
    fn galerkin_in_energy_inner_product_matches_moments() {
        let css = ModelParams::small().build::<f64>().unwrap();
        let ph = PhDescriptorSystem::from_model(&css, Formulation::Velocity).unwrap();
        let v = krylov_basis(&ph, &DEFAULT_EXPANSION_HZ, 3).unwrap();
        let v = v.v.as_real().unwrap();
        // W = QV test space
        let w = &ph.q * v;
        let (a, e) = (ph.a(), ph.e.clone());
        let c = ph.output_map();
        let er = w.transpose() * &e * v;
        let ar = w.transpose() * &a * v;
        let br = w.transpose() * &ph.b;
        let cr = &c * v;
        for f in DEFAULT_EXPANSION_HZ {
            let full = transfer(&e, &a, &ph.b, &c, f);
            let red = transfer(&er, &ar, &br, &cr, f);
            assert!((full - red).norm() <= 1e-6 * full.norm(), "{f} Hz: {full} vs {red}");
        }
    }

    #[test]
    fn truncation_keeps_leading_columns() {
        let css = ModelParams::small().build::<f64>().unwrap();
        let ph = PhDescriptorSystem::from_model(&css, Formulation::Velocity).unwrap();
        let dec = KrylovDecomposition::new(&ph, &DEFAULT_EXPANSION_HZ, 4).unwrap();
        assert_eq!(dec.max_size(), 16);
        let b = dec.basis(6).unwrap();
        assert_eq!(b.v.as_real().unwrap(), &dec.v.columns(0, 6).into_owned());
        assert!(dec.basis(17).is_err());
    }
}
