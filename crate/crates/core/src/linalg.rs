//! Dense linear-algebra helpers used across the crate.

use nalgebra::{ComplexField, DMatrix, DVector, RealField};
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Max row 1-norm, the operator-norm proxy used for relative residuals.
pub fn norm_inf<C: ComplexField>(m: &DMatrix<C>) -> C::RealField {
    let mut best = C::RealField::zero();
    for i in 0..m.nrows() {
        let mut s = C::RealField::zero();
        for j in 0..m.ncols() {
            s += m[(i, j)].clone().modulus();
        }
        if s > best {
            best = s;
        }
    }
    best
}

/// `num / den`, returning `num` unscaled when `den` vanishes.
fn relative<R: RealField>(num: R, den: R) -> R {
    if den > R::zero() {
        num / den
    } else {
        num
    }
}

/// `‖M + Mᴴ‖ / ‖M‖`.
pub fn skew_residual<C: ComplexField>(m: &DMatrix<C>) -> C::RealField {
    let r = m + m.adjoint();
    relative(norm_inf(&r), norm_inf(m))
}

/// `‖M − Mᴴ‖ / ‖M‖`.
pub fn hermitian_residual<C: ComplexField>(m: &DMatrix<C>) -> C::RealField {
    let r = m - m.adjoint();
    relative(norm_inf(&r), norm_inf(m))
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_hermitian_eigenvalue<C: ComplexField>(m: &DMatrix<C>) -> C::RealField {
    if m.nrows() == 0 {
        return C::RealField::zero();
    }
    let half = nalgebra::convert::<f64, C::RealField>(0.5);
    let h = (m + m.adjoint()).map(|x| x.scale(half.clone()));
    let eig = h.symmetric_eigen();
    eig.eigenvalues.iter().cloned().fold(C::RealField::max_value().unwrap(), |a, b| a.min(b))
}

/// Poisson matrix `[[0, I], [-I, 0]]` of size `2·half`.
pub fn poisson<T: Real>(half: usize) -> DMatrix<T> {
    let mut j = DMatrix::zeros(2 * half, 2 * half);
    for i in 0..half {
        j[(i, half + i)] = T::one();
        j[(half + i, i)] = -T::one();
    }
    j
}

/// Applies the Poisson matrix to every column: `(top, bottom) -> (bottom, -top)`.
pub fn apply_poisson<C: ComplexField>(x: &DMatrix<C>) -> DMatrix<C> {
    let n = x.nrows();
    assert!(n % 2 == 0, "Poisson matrix needs an even row count");
    let h = n / 2;
    let mut out = DMatrix::zeros(n, x.ncols());
    out.rows_mut(0, h).copy_from(&x.rows(h, h));
    out.rows_mut(h, h).copy_from(&(-x.rows(0, h)));
    out
}

/// `‖Vᵀ 𝕁 V − 𝕁‖_F` for a real basis with paired columns.
pub fn symplectic_residual<T: Real>(v: &DMatrix<T>) -> T {
    let k = v.ncols();
    if k % 2 != 0 {
        return T::max_value().unwrap();
    }
    let g = v.transpose() * apply_poisson(v);
    (g - poisson::<T>(k / 2)).norm()
}

/// `‖Vᴴ V − I‖_F`.
pub fn orthonormality_residual<C: ComplexField>(v: &DMatrix<C>) -> C::RealField {
    let g = v.adjoint() * v;
    (g - DMatrix::identity(v.ncols(), v.ncols())).norm()
}

/// Block-diagonal assembly.
pub fn block_diag<C: ComplexField>(blocks: &[&DMatrix<C>]) -> DMatrix<C> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Numerical column rank via column-pivoted QR with tolerance `rel_tol·‖V‖_F`.
pub fn column_rank<C: ComplexField>(v: &DMatrix<C>, rel_tol: C::RealField) -> usize {
    if v.ncols() == 0 || v.nrows() == 0 {
        return 0;
    }
    let scale = v.norm();
    if scale == C::RealField::zero() {
        return 0;
    }
    let qr = v.clone().col_piv_qr();
    let r = qr.r();
    let tol = rel_tol * scale;
    (0..r.nrows().min(r.ncols()))
        .filter(|&i| r[(i, i)].clone().modulus() > tol)
        .count()
}

/// Fails unless `v` has full column rank.
///
/// Columns are scaled to unit norm first. That leaves the rank unchanged
/// but stops independent columns of very different magnitude (e.g. `QV`
/// with an ill-conditioned `Q`) from falling under the tolerance.
pub fn require_full_rank<C: ComplexField>(v: &DMatrix<C>, what: &str) -> Result<()> {
    let tol = nalgebra::convert::<f64, C::RealField>(1e-10);
    let mut scaled = v.clone();
    for mut c in scaled.column_iter_mut() {
        let n = c.norm();
        if n > C::RealField::zero() {
            c.unscale_mut(n);
        }
    }
    let rank = column_rank(&scaled, tol);
    if rank < v.ncols() {
        return Err(Error::Rank(format!(
            "{what} has rank {rank} < {} columns",
            v.ncols()
        )));
    }
    Ok(())
}

/// Orthonormalizes `cand` against `basis` (modified Gram–Schmidt, two passes).
///
/// Returns `None` when the remaining component falls below `drop_tol` times
/// the candidate's original norm.
pub fn orthogonalize_against<C: ComplexField>(
    basis: &[DVector<C>],
    cand: &DVector<C>,
    drop_tol: C::RealField,
) -> Option<DVector<C>> {
    let original = cand.norm();
    if original == C::RealField::zero() {
        return None;
    }
    let mut w = cand.clone();
    for _ in 0..2 {
        for q in basis {
            let proj = q.dotc(&w);
            w.axpy(-proj, q, C::one());
        }
    }
    let nw = w.norm();
    if nw <= drop_tol * original {
        return None;
    }
    Some(w.unscale(nw))
}

/// Orthonormal basis for the column span of `v`, keeping column order.
pub fn orthonormalize<C: ComplexField>(v: &DMatrix<C>, drop_tol: C::RealField) -> DMatrix<C> {
    let mut cols: Vec<DVector<C>> = Vec::with_capacity(v.ncols());
    for j in 0..v.ncols() {
        let c: DVector<C> = v.column(j).into_owned();
        if let Some(q) = orthogonalize_against(&cols, &c, drop_tol.clone()) {
            cols.push(q);
        }
    }
    columns_to_matrix(v.nrows(), &cols)
}

pub fn columns_to_matrix<C: ComplexField>(rows: usize, cols: &[DVector<C>]) -> DMatrix<C> {
    let mut m = DMatrix::zeros(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Factor `V = W·R` with `Wᴴ H W = I`, `H` Hermitian positive definite.
///
/// Uses the Cholesky factor of the Gram matrix `Vᴴ H V`; a second pass
/// tidies up the loss of orthogonality for ill-conditioned `V`.
pub fn h_orthonormalize<C: ComplexField>(
    v: &DMatrix<C>,
    h: &DMatrix<C>,
) -> Result<(DMatrix<C>, DMatrix<C>)> {
    let hv = h * v;
    let gram = v.adjoint() * &hv;
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Rank("basis is rank deficient in the energy inner product".into()))?;
    let l = chol.l();
    // W = V L^{-H}
    let r1 = l.adjoint();
    let w1 = solve_right_upper(v, &r1)?;
    let gram2 = w1.adjoint() * h * &w1;
    let chol2 = gram2
        .cholesky()
        .ok_or_else(|| Error::Rank("energy re-orthonormalization failed".into()))?;
    let r2 = chol2.l().adjoint();
    let w = solve_right_upper(&w1, &r2)?;
    Ok((w, r2 * r1))
}

/// Solves `X·U = B` for upper-triangular `U`.
fn solve_right_upper<C: ComplexField>(b: &DMatrix<C>, u: &DMatrix<C>) -> Result<DMatrix<C>> {
    // X U = B  <=>  Uᴴ Xᴴ = Bᴴ
    let ut = u.adjoint();
    let mut xt = b.adjoint();
    if !ut.solve_lower_triangular_mut(&mut xt) {
        return Err(Error::Factorization("singular triangular factor".into()));
    }
    Ok(xt.adjoint())
}

/// Principal angles between `colsp(a)` and `colsp(b)` in radians, ascending.
///
/// Small angles come from the sines, large ones from the cosines, so both
/// ends are resolved to rounding level instead of the √ε floor of `acos`.
pub fn principal_angles<C: ComplexField>(a: &DMatrix<C>, b: &DMatrix<C>) -> Vec<C::RealField> {
    let tol = nalgebra::convert::<f64, C::RealField>(1e-12);
    let qa = orthonormalize(a, tol.clone());
    let qb = orthonormalize(b, tol);
    let m = qa.adjoint() * &qb;
    let residual = &qb - &qa * &m;
    let desc = |v: nalgebra::DVector<C::RealField>| {
        let mut v: Vec<C::RealField> = v.iter().cloned().collect();
        v.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
        v
    };
    let cos = desc(m.singular_values());
    let mut sin = desc(residual.singular_values());
    sin.reverse();
    let half = nalgebra::convert::<f64, C::RealField>(0.5);
    let one = C::RealField::one();
    let mut angles: Vec<C::RealField> = cos
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let c = c.min(one.clone());
            match sin.get(i) {
                Some(s) if c.clone() * c.clone() >= half => s.clone().min(one.clone()).asin(),
                _ => c.acos(),
            }
        })
        .collect();
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    angles
}

/// Largest principal angle, or π/2 when the spans have different dimension.
pub fn max_principal_angle<C: ComplexField>(a: &DMatrix<C>, b: &DMatrix<C>) -> C::RealField {
    let tol = nalgebra::convert::<f64, C::RealField>(1e-12);
    let ra = column_rank(a, tol.clone());
    let rb = column_rank(b, tol);
    if ra != rb {
        return C::RealField::frac_pi_2();
    }
    principal_angles(a, b)
        .into_iter()
        .fold(C::RealField::zero(), |acc, x| acc.max(x))
}

/// Lifts a real matrix into the complex field `C`.
pub fn lift<T: Real, C: ComplexField<RealField = T>>(m: &DMatrix<T>) -> DMatrix<C> {
    m.map(C::from_real)
}

/// Cholesky-based positive-definiteness test.
pub fn is_positive_definite<T: Real>(m: &DMatrix<T>) -> bool {
    m.clone().cholesky().is_some()
}

/// Inverse of a block diagonal SPD matrix given as a dense matrix, applied
/// from the right: returns `A · M⁻¹` using a Cholesky factorization of `M`.
pub fn right_solve_spd<T: Real>(a: &DMatrix<T>, m: &DMatrix<T>) -> Result<DMatrix<T>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization("matrix is not symmetric positive definite".into()))?;
    // A M^{-1} = (M^{-1} Aᵀ)ᵀ since M is symmetric
    Ok(chol.solve(&a.transpose()).transpose())
}

/// Dynamic-size identity shorthand.
pub fn eye<C: ComplexField>(n: usize) -> DMatrix<C> {
    DMatrix::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_is_skew_and_orthogonal() {
        let j = poisson::<f64>(3);
        assert_eq!(skew_residual(&j), 0.0);
        let jj = &j * &j;
        assert!((jj + DMatrix::<f64>::identity(6, 6)).norm() < 1e-15);
    }

    #[test]
    fn apply_poisson_matches_dense_product() {
        let x = DMatrix::<f64>::from_fn(6, 2, |i, j| (i * 3 + j) as f64 - 2.5);
        let dense = poisson::<f64>(3) * &x;
        assert!((dense - apply_poisson(&x)).norm() < 1e-15);
    }

    #[test]
    fn h_orthonormal_factor_reproduces_basis() {
        let v = DMatrix::<f64>::from_fn(5, 3, |i, j| ((i + 3 * j) % 5) as f64 + 0.1 * i as f64);
        let h = DMatrix::<f64>::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0]));
        let (w, r) = h_orthonormalize(&v, &h).unwrap();
        assert!((w.transpose() * &h * &w - DMatrix::<f64>::identity(3, 3)).norm() < 1e-12);
        assert!((&w * r - v).norm() < 1e-12);
    }

    #[test]
    fn rank_detects_dependent_columns() {
        let mut v = DMatrix::<f64>::from_fn(4, 3, |i, j| (i + j * j) as f64);
        let c0 = v.column(0).into_owned();
        v.set_column(2, &(c0 * 2.0));
        assert_eq!(column_rank(&v, 1e-10), 2);
        assert!(require_full_rank(&v, "V").is_err());
    }

    #[test]
    fn rank_check_ignores_column_scaling() {
        let mut v = DMatrix::<f64>::from_fn(4, 3, |i, j| ((i + 1) * (j + 2) % 5) as f64 + i as f64);
        assert!(require_full_rank(&v, "V").is_ok());
        v.column_mut(1).scale_mut(1e-14);
        assert!(require_full_rank(&v, "V").is_ok());
        v.column_mut(2).fill(0.0);
        assert!(require_full_rank(&v, "V").is_err());
    }

    #[test]
    fn principal_angles_of_identical_spans_vanish() {
        let a = DMatrix::<f64>::from_fn(6, 2, |i, j| (i as f64 + 1.0).powi(j as i32));
        let b = &a * DMatrix::<f64>::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]);
        assert!(max_principal_angle(&a, &b) < 1e-7);
    }

    #[test]
    fn tiny_principal_angles_are_resolved() {
        let a = DMatrix::<f64>::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
        for theta in [1e-12, 1e-9, 0.3, 1.2] {
            let b = DMatrix::<f64>::from_row_slice(3, 1, &[theta.cos(), theta.sin(), 0.0]);
            let got = max_principal_angle(&a, &b);
            assert!((got - theta).abs() <= 1e-15 * (1.0 + theta), "{theta}: {got}");
        }
        let b = DMatrix::<f64>::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        assert!((max_principal_angle(&a, &b) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
