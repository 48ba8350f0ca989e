use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use super::{sorted_symmetric_eigen, BasisMatrix, BasisMethod, BasisSource, ReducedBasis, SnapshotMatrix};
use crate::error::{Error, Result};
use crate::linalg::apply_poisson;
use crate::scalar::Real;

const RANK_CUTOFF: f64 = 1e-12;

/// Rotates `v` so that its largest-modulus entry is real and positive.
fn phase_normalize<T: Real>(mut v: DVector<Complex<T>>) -> DVector<Complex<T>> {
    let mut best = 0;
    let mut best_mod = T::zero();
    for (i, c) in v.iter().enumerate() {
        let m = c.modulus();
        if m > best_mod {
            best_mod = m;
            best = i;
        }
    }
    if best_mod > T::zero() {
        let phase = v[best].unscale(best_mod).conj();
        v *= phase;
        v[best] = Complex::new(v[best].re, T::zero());
    }
    v
}

/// Complex SVD of `C_s = [x̃ⱼ + i·x̃˙ⱼ]` through the Hermitian matrix `C_sC_sᴴ`.
#[derive(Debug, Clone)]
pub struct ComplexSvdDecomposition<T: Real> {
    /// Left singular vectors of `C_s`, descending.
    pub u: DMatrix<Complex<T>>,
    pub values: Vec<T>,
}

impl<T: Real> ComplexSvdDecomposition<T> {
    pub fn new(snapshots: &SnapshotMatrix<T>) -> Self {
        let nh = snapshots.partition.n_hat();
        let g = snapshots.gram();
        let tt = g.view((0, 0), (nh, nh));
        let bb = g.view((nh, nh), (nh, nh));
        let bt = g.view((nh, 0), (nh, nh));
        let tb = g.view((0, nh), (nh, nh));
        // C_s C_sᴴ = XtXtᵀ + XbXbᵀ + i(XbXtᵀ − XtXbᵀ)
        let h = DMatrix::from_fn(nh, nh, |r, c| {
            Complex::new(tt[(r, c)] + bb[(r, c)], bt[(r, c)] - tb[(r, c)])
        });
        let (values, vectors) = sorted_symmetric_eigen(&h);
        let lmax = values.first().copied().unwrap_or(T::zero());
        let keep: Vec<usize> = (0..values.len())
            .filter(|&i| values[i] > T::zero() && values[i] >= lmax * T::lit(RANK_CUTOFF))
            .collect();
        let mut u = DMatrix::zeros(nh, keep.len());
        for (c, &i) in keep.iter().enumerate() {
            u.set_column(c, &phase_normalize(vectors.column(i).into_owned()));
        }
        Self {
            u,
            values: keep.iter().map(|&i| values[i]).collect(),
        }
    }

    pub fn rank(&self) -> usize {
        self.u.ncols()
    }
}

impl<T: Real> BasisSource<T> for ComplexSvdDecomposition<T> {
    fn method(&self) -> BasisMethod {
        BasisMethod::ComplexSvd
    }

    fn max_size(&self) -> usize {
        2 * self.rank()
    }

    /// `V = [Ẽ, 𝕁ᵀẼ]`, `Ẽ = [Re U; Im U]` with `n/2` columns of `U`.
    fn basis(&self, n: usize) -> Result<ReducedBasis<T>> {
        if n % 2 != 0 {
            return Err(Error::Config(format!("C-SVD needs an even size, got {n}")));
        }
        let k = n / 2;
        if k > self.rank() {
            return Err(Error::InsufficientRank {
                requested: k,
                rank: self.rank(),
            });
        }
        let nh = self.u.nrows();
        let u = self.u.columns(0, k);
        let mut e = DMatrix::zeros(2 * nh, k);
        e.view_mut((0, 0), (nh, k)).copy_from(&u.map(|c| c.re));
        e.view_mut((nh, 0), (nh, k)).copy_from(&u.map(|c| c.im));
        let je = -apply_poisson(&e);
        let mut v = DMatrix::zeros(2 * nh, n);
        v.columns_mut(0, k).copy_from(&e);
        v.columns_mut(k, k).copy_from(&je);
        let block_diagonal = u.iter().all(|c| c.im == T::zero());
        Ok(ReducedBasis {
            v: BasisMatrix::Real(v),
            method: BasisMethod::ComplexSvd,
            orthonormal: true,
            symplectic: true,
            block_diagonal,
            weights: self.values.iter().take(k).map(|v| v.sqrt()).collect(),
        })
    }
}

pub fn psd_complex_svd<T: Real>(snapshots: &SnapshotMatrix<T>, n: usize) -> Result<ReducedBasis<T>> {
    ComplexSvdDecomposition::new(snapshots).basis(n)
}

/// Symplectic column pairs `(sᵢ, tᵢ)` with `sᵢᵀ𝕁tᵢ = 1` from the
/// eigendecomposition of the skew matrix `X̂ᵀ𝕁X̂`, ordered by weighted
/// symplectic singular value `wᵢ`.
#[derive(Debug, Clone)]
pub struct SvdLikeDecomposition<T: Real> {
    pub s: DMatrix<T>,
    pub t: DMatrix<T>,
    pub weights: Vec<T>,
    /// Positive `θᵢ` in the same order.
    pub theta: Vec<T>,
}

impl<T: Real> SvdLikeDecomposition<T> {
    pub fn new(snapshots: &SnapshotMatrix<T>) -> Self {
        Self::from_factor(&snapshots.factor())
    }

    /// Same decomposition for a raw snapshot matrix.
    pub fn from_factor(x: &DMatrix<T>) -> Self {
        let n = x.nrows();
        let g = x.transpose() * apply_poisson(x);
        // iG is Hermitian; eigenvalue θ > 0 of iG ⇔ Gv = −iθv
        let ig = g.map(|v| Complex::new(T::zero(), v));
        let (values, vectors) = sorted_symmetric_eigen(&ig);
        let tmax = values.first().copied().unwrap_or(T::zero());
        let sqrt2 = T::lit(2.0).sqrt();
        let mut pairs = Vec::new();
        for (i, &theta) in values.iter().enumerate() {
            if !(theta > T::zero() && theta > tmax * T::lit(RANK_CUTOFF)) {
                continue;
            }
            let v = phase_normalize(vectors.column(i).into_owned());
            let a = v.map(|c| c.re * sqrt2);
            let b = v.map(|c| c.im * sqrt2);
            let xa = x * &a;
            let xb = x * &b;
            let w = (xa.norm_squared() + xb.norm_squared()).sqrt();
            let scale = theta.sqrt();
            pairs.push((w, theta, xb / scale, xa / scale));
        }
        // stable: equal weights keep eigenvalue order
        pairs.sort_by(|p, q| q.0.partial_cmp(&p.0).unwrap_or(std::cmp::Ordering::Equal));
        let p = pairs.len();
        let mut s = DMatrix::zeros(n, p);
        let mut t = DMatrix::zeros(n, p);
        let mut weights = Vec::with_capacity(p);
        let mut theta = Vec::with_capacity(p);
        for (c, (w, th, sc, tc)) in pairs.into_iter().enumerate() {
            s.set_column(c, &sc);
            t.set_column(c, &tc);
            weights.push(w);
            theta.push(th);
        }
        Self { s, t, weights, theta }
    }

    /// Number of available pairs `p`.
    pub fn pairs(&self) -> usize {
        self.s.ncols()
    }
}

/// `ω(x, y) = xᵀ𝕁y`.
fn omega<T: Real>(x: &DVector<T>, jy: &DVector<T>) -> T {
    x.dot(jy)
}

fn poisson_vec<T: Real>(x: &DVector<T>) -> DVector<T> {
    let h = x.len() / 2;
    let mut out = DVector::zeros(x.len());
    out.rows_mut(0, h).copy_from(&x.rows(h, h));
    out.rows_mut(h, h).copy_from(&(-x.rows(0, h)));
    out
}

impl<T: Real> BasisSource<T> for SvdLikeDecomposition<T> {
    fn method(&self) -> BasisMethod {
        BasisMethod::SvdLike
    }

    fn max_size(&self) -> usize {
        2 * self.pairs()
    }

    /// `V = [s₁ … s_k, t₁ … t_k]` for the `k = n/2` pairs of largest `wᵢ`.
    ///
    /// A symplectic Gram–Schmidt sweep removes rounding drift in `Vᵀ𝕁V`.
    fn basis(&self, n: usize) -> Result<ReducedBasis<T>> {
        if n % 2 != 0 {
            return Err(Error::Config(format!("SVD-like basis needs an even size, got {n}")));
        }
        let k = n / 2;
        if k > self.pairs() {
            return Err(Error::InsufficientRank {
                requested: k,
                rank: self.pairs(),
            });
        }
        let mut es: Vec<DVector<T>> = Vec::with_capacity(k);
        let mut fs: Vec<DVector<T>> = Vec::with_capacity(k);
        for i in 0..k {
            let mut e = self.s.column(i).into_owned();
            let mut f = self.t.column(i).into_owned();
            for _ in 0..2 {
                for (ej, fj) in es.iter().zip(&fs) {
                    let (jej, jfj) = (poisson_vec(ej), poisson_vec(fj));
                    let e_f = omega(&e, &jfj);
                    let e_e = omega(&e, &jej);
                    e = e - ej * e_f + fj * e_e;
                    let f_f = omega(&f, &jfj);
                    let f_e = omega(&f, &jej);
                    f = f - ej * f_f + fj * f_e;
                }
            }
            let pair = omega(&e, &poisson_vec(&f));
            f /= pair;
            es.push(e);
            fs.push(f);
        }
        let nrows = self.s.nrows();
        let mut v = DMatrix::zeros(nrows, n);
        for i in 0..k {
            v.set_column(i, &es[i]);
            v.set_column(k + i, &fs[i]);
        }
        Ok(ReducedBasis {
            v: BasisMatrix::Real(v),
            method: BasisMethod::SvdLike,
            orthonormal: false,
            symplectic: true,
            block_diagonal: false,
            weights: self.weights[..k].to_vec(),
        })
    }
}

pub fn svd_like_basis<T: Real>(snapshots: &SnapshotMatrix<T>, k: usize) -> Result<ReducedBasis<T>> {
    SvdLikeDecomposition::new(snapshots).basis(2 * k)
}

/// `V⁺ = 𝕁ᵀ_{2n} Vᵀ 𝕁_{2N}`.
pub fn symplectic_inverse<T: Real>(v: &DMatrix<T>) -> DMatrix<T> {
    let vt_j = apply_poisson(v).transpose() * -T::one(); // Vᵀ𝕁 = −(𝕁V)ᵀ
    let k = v.ncols() / 2;
    // 𝕁ᵀ_{2k} M = [−M_bottom; M_top]
    let mut out = DMatrix::zeros(v.ncols(), v.nrows());
    out.rows_mut(0, k).copy_from(&(-vt_j.rows(k, k)));
    out.rows_mut(k, k).copy_from(&vt_j.rows(0, k));
    out
}
