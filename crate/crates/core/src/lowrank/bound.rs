use crate::densela::{gaussian_matrix, qr_orthonormalize, DenseMatrix, RngStream};
use crate::error::{invalid, Result};
use crate::lowrank::factors::SingularSpectrum;
use crate::scalar::Real;

/// Expected-error bound of randomized subspace iteration:
///
/// ```text
/// [ (1 + sqrt(k/(p−1)))^(2l+1) σ_{k+1}^(2l+1)
///   + (e sqrt(k+p) / p) sqrt(Σ_{j>k} σ_j^(2(2l+1))) ]^(1/(2l+1))
/// ```
///
/// Evaluated on the spectrum normalised by `σ_1` and rescaled, since the
/// expression is positively homogeneous of degree one.
pub fn error_bound<T: Real>(spectrum: &SingularSpectrum<T>, k: usize, p: usize, l: usize) -> Result<T> {
    if p < 2 {
        return Err(invalid(format!("bound needs oversampling p >= 2, got {p}")));
    }
    if k == 0 || k + p > spectrum.len() {
        return Err(invalid(format!(
            "bound needs 1 <= k and k + p <= {}, got k={k}, p={p}",
            spectrum.len()
        )));
    }
    let sigma: Vec<f64> = spectrum.values().iter().map(|s| s.as_f64()).collect();
    let scale = sigma[0];
    if scale == 0.0 {
        return Ok(T::zero());
    }
    let q = (2 * l + 1) as f64;
    let (kf, pf) = (k as f64, p as f64);

    let lead = ((1.0 + (kf / (pf - 1.0)).sqrt()) * sigma[k] / scale).powf(q);
    let tail: f64 = sigma[k..].iter().map(|s| (s / scale).powf(2.0 * q)).sum();
    let mix = std::f64::consts::E * (kf + pf).sqrt() / pf * tail.sqrt();
    Ok(T::of(scale * (lead + mix).powf(1.0 / q)))
}

/// Draws `k` Gaussian vectors `uᵢ`, forms `qᵢ = A uᵢ` and reports whether
/// they are numerically independent: the smallest `|R_ii|` of their QR must
/// exceed `1e-8` times the largest.
pub fn linear_independence_check<T: Real>(a: &DenseMatrix<T>, k: usize, rng: &mut RngStream) -> Result<bool> {
    if k == 0 || k > a.rows().min(a.cols()) {
        return Err(invalid(format!(
            "need 1 <= k <= min{:?}, got {k}",
            a.shape()
        )));
    }
    let omega = gaussian_matrix(a.cols(), k, rng)?;
    let (_, r) = qr_orthonormalize(&a.matmul(&omega)?)?;
    let diag: Vec<T> = (0..k).map(|i| r.get(i, i).abs()).collect();
    let largest = diag.iter().fold(T::zero(), |acc, &d| acc.max(d));
    let smallest = diag.iter().fold(T::infinity(), |acc, &d| acc.min(d));
    Ok(largest > T::zero() && smallest > T::of(1e-8) * largest)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The same expression written out directly, without normalisation.
    fn bound_reference(sigma: &[f64], k: usize, p: usize, l: usize) -> f64 {
        let e = 2 * l + 1;
        let a = (1.0 + (k as f64 / (p as f64 - 1.0)).sqrt()).powi(e as i32) * sigma[k].powi(e as i32);
        let mut s = 0.0;
        for &x in &sigma[k..] {
            s += x.powi(2 * e as i32);
        }
        let b = std::f64::consts::E * ((k + p) as f64).sqrt() / p as f64 * s.sqrt();
        (a + b).powf(1.0 / e as f64)
    }

    #[test]
    fn vanishing_tail_gives_zero() {
        let s = SingularSpectrum::new(vec![2.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(error_bound(&s, 2, 5, 5).unwrap(), 0.0);
    }

    #[test]
    fn matches_direct_evaluation() {
        let sigma: Vec<f64> = (0..20).map(|i| 0.5f64.powi(i)).collect();
        let s = SingularSpectrum::new(sigma.clone()).unwrap();
        for (k, p, l) in [(2, 5, 5), (2, 5, 1), (4, 2, 3), (1, 3, 0)] {
            let got = error_bound(&s, k, p, l).unwrap();
            let want = bound_reference(&sigma, k, p, l);
            assert!((got - want).abs() <= 1e-12 * want, "({k},{p},{l}) {got} vs {want}");
            assert!(got >= sigma[k]);
        }
    }

    #[test]
    fn argument_checks() {
        let s = SingularSpectrum::new(vec![1.0; 6]).unwrap();
        assert!(error_bound(&s, 2, 1, 3).is_err());
        assert!(error_bound(&s, 2, 5, 3).is_err());
        assert!(error_bound(&s, 0, 2, 3).is_err());
    }

    #[test]
    fn independence_of_gaussian_images() {
        let eye = DenseMatrix::<f64>::identity(10).unwrap();
        let mut rng = RngStream::new(1);
        assert!((0..200).all(|_| linear_independence_check(&eye, 5, &mut rng).unwrap()));

        let rank1 = DenseMatrix::<f64>::outer(&[1.0, 2.0, 3.0, 4.0], &[1.0, 1.0, -2.0, 0.5]).unwrap();
        assert!(!linear_independence_check(&rank1, 2, &mut rng).unwrap());
    }
}
