use crate::densela::matrix::{axpy, DenseMatrix};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Thin QR factorisation by Householder reflections.
///
/// For an `m x n` input with `m >= n` returns `Q` (`m x n`, orthonormal
/// columns) and `R` (`n x n`, upper triangular with a non-negative diagonal).
/// Rank-deficient input is fine: a zero pivot column leaves its reflector as
/// the identity and the matching column of `Q` still completes an
/// orthonormal set.
pub fn qr_orthonormalize<T: Real>(a: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::InvalidArgument(format!(
            "QR needs rows >= cols, got {m}x{n}"
        )));
    }

    let mut work = a.clone();
    let mut reflectors: Vec<Option<(Vec<T>, T)>> = Vec::with_capacity(n);
    let mut proj = vec![T::zero(); n];

    for j in 0..n {
        let mut v: Vec<T> = (j..m).map(|i| work.get(i, j)).collect();
        let scale = v.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
        if scale == T::zero() {
            reflectors.push(None);
            continue;
        }
        let norm = scale * v.iter().map(|&x| (x / scale) * (x / scale)).sum::<T>().sqrt();
        let alpha = if v[0] >= T::zero() { -norm } else { norm };
        v[0] -= alpha;
        let vv: T = v.iter().map(|&x| x * x).sum();
        if vv == T::zero() {
            reflectors.push(None);
            continue;
        }
        let tau = T::of(2.0) / vv;
        apply_reflector(&mut work, &v, tau, j, j, &mut proj);
        // Exact zeros below the diagonal.
        work.set(j, j, alpha);
        for i in j + 1..m {
            work.set(i, j, T::zero());
        }
        reflectors.push(Some((v, tau)));
    }

    let mut r = DenseMatrix::from_fn(n, n, |i, j| if j >= i { work.get(i, j) } else { T::zero() })?;

    let mut q = DenseMatrix::zeros(m, n)?;
    for j in 0..n {
        q.set(j, j, T::one());
    }
    for (j, refl) in reflectors.iter().enumerate().rev() {
        if let Some((v, tau)) = refl {
            apply_reflector(&mut q, v, *tau, j, j, &mut proj);
        }
    }

    for j in 0..n {
        if r.get(j, j) < T::zero() {
            for c in j..n {
                r.set(j, c, -r.get(j, c));
            }
            for i in 0..m {
                q.set(i, j, -q.get(i, j));
            }
        }
    }
    Ok((q, r))
}

/// Applies `I - tau v vᵀ` to the block `target[row0.., col0..]`.
fn apply_reflector<T: Real>(
    target: &mut DenseMatrix<T>,
    v: &[T],
    tau: T,
    row0: usize,
    col0: usize,
    proj: &mut [T],
) {
    let width = target.cols() - col0;
    let proj = &mut proj[..width];
    proj.iter_mut().for_each(|p| *p = T::zero());
    for (k, &vk) in v.iter().enumerate() {
        axpy(vk, &target.row(row0 + k)[col0..], proj);
    }
    for (k, &vk) in v.iter().enumerate() {
        axpy(-tau * vk, proj, &mut target.row_mut(row0 + k)[col0..]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::rng::{gaussian_matrix, RngStream};

    type M = DenseMatrix<f64>;

    fn reconstruction_error(a: &M, q: &M, r: &M) -> f64 {
        q.matmul(r).unwrap().sub(a).unwrap().frobenius_norm() / a.frobenius_norm()
    }

    #[test]
    fn identity_input() {
        let a = M::identity(4).unwrap();
        let (q, r) = qr_orthonormalize(&a).unwrap();
        assert!(q.sub(&a).unwrap().max_abs() < 1e-15);
        assert!(r.sub(&a).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn single_column() {
        let a = M::from_rows(&[[3.0], [4.0]]).unwrap();
        let (q, r) = qr_orthonormalize(&a).unwrap();
        assert!((q.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((q.get(1, 0) - 0.8).abs() < 1e-15);
        assert!((r.get(0, 0) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn random_tall_matrix() {
        let mut rng = RngStream::new(11);
        let a = gaussian_matrix::<f64>(50, 8, &mut rng).unwrap();
        let (q, r) = qr_orthonormalize(&a).unwrap();
        assert!(q.orthonormality_defect() < 1e-10);
        assert!(reconstruction_error(&a, &q, &r) < 1e-10);
        for i in 0..8 {
            for j in 0..i {
                assert_eq!(r.get(i, j), 0.0);
            }
            assert!(r.get(i, i) >= 0.0);
        }
    }

    #[test]
    fn rank_deficient_still_orthonormal() {
        let u = [1.0, 2.0, 3.0, 4.0, 5.0];
        let v = [1.0, -1.0, 0.5];
        let a = M::outer(&u, &v).unwrap();
        let (q, r) = qr_orthonormalize(&a).unwrap();
        assert!(q.orthonormality_defect() < 1e-12);
        assert!(reconstruction_error(&a, &q, &r) < 1e-12);

        let z = M::zeros(6, 3).unwrap();
        let (qz, rz) = qr_orthonormalize(&z).unwrap();
        assert!(qz.orthonormality_defect() < 1e-15);
        assert_eq!(rz.max_abs(), 0.0);
    }

    #[test]
    fn wide_matrix_rejected() {
        let a = M::zeros(2, 3).unwrap();
        assert!(qr_orthonormalize(&a).is_err());
    }
}
