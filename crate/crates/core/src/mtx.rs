//! Matrix Market coordinate files for dense operators (real or complex).

use std::path::Path;

use nalgebra::{DMatrix, Scalar};
use nalgebra_sparse::io::{load_coo_from_matrix_market_file, save_to_matrix_market_file, MatrixMarketScalar};
use nalgebra_sparse::CooMatrix;
use num_traits::Zero;

use crate::error::{Error, Result};

/// Writes the nonzero entries of `m` in coordinate format.
pub fn write_matrix<T, P>(path: P, m: &DMatrix<T>) -> Result<()>
where
    T: MatrixMarketScalar + Scalar + Zero,
    P: AsRef<Path>,
{
    let mut coo = CooMatrix::new(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)].clone();
            if !v.is_zero() {
                coo.push(i, j, v);
            }
        }
    }
    save_to_matrix_market_file(&coo, path)?;
    Ok(())
}

/// Reads a Matrix Market file into a dense matrix (duplicates are summed,
/// symmetric storage is expanded).
pub fn read_matrix<T, P>(path: P) -> Result<DMatrix<T>>
where
    T: MatrixMarketScalar + Scalar + Zero + std::ops::AddAssign,
    P: AsRef<Path>,
{
    let coo: CooMatrix<T> = load_coo_from_matrix_market_file(path.as_ref())
        .map_err(|e| Error::MatrixMarket(format!("{}: {e}", path.as_ref().display())))?;
    let mut m = DMatrix::zeros(coo.nrows(), coo.ncols());
    for (i, j, v) in coo.triplet_iter() {
        m[(i, j)] += v.clone();
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Complex;

    #[test]
    fn real_round_trip_is_exact() {
        let dir = std::env::temp_dir().join(format!("mtx-real-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("a.mtx");
        let a = DMatrix::from_row_slice(2, 3, &[1.0 / 3.0, 0.0, -2.5e-300, 0.0, std::f64::consts::PI, 7.0]);
        write_matrix(&p, &a).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("%%matrixmarket matrix coordinate real general"));
        assert_eq!(text.lines().filter(|l| !l.starts_with('%')).count(), 1 + 4);
        let b: DMatrix<f64> = read_matrix(&p).unwrap();
        assert_eq!(a, b);
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn complex_and_symmetric_inputs() {
        let dir = std::env::temp_dir().join(format!("mtx-cplx-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("c.mtx");
        let a = DMatrix::from_fn(3, 2, |i, j| Complex::new(i as f64 - 0.5, j as f64 * 0.25));
        write_matrix(&p, &a).unwrap();
        let b: DMatrix<Complex<f64>> = read_matrix(&p).unwrap();
        assert_eq!(a, b);
        let s = dir.join("s.mtx");
        std::fs::write(&s, "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 4.0\n2 1 -1.0\n").unwrap();
        let m: DMatrix<f64> = read_matrix(&s).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[4.0, -1.0, -1.0, 0.0]));
        std::fs::write(&s, "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").unwrap();
        assert!(matches!(read_matrix::<f64, _>(&s), Err(Error::MatrixMarket(_))));
        std::fs::remove_dir_all(dir).unwrap();
    }
}
