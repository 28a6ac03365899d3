use crate::bench::problem::Problem;
use crate::densela::RngStream;
use crate::error::{invalid, Result};
use crate::Matrix;

/// Minimum number of coordinates probed per check.
pub const MIN_COORDINATES: usize = 100;

/// Gradient magnitudes below this are compared absolutely.
const FLOOR: f64 = 1e-6;

/// Largest relative disagreement between the analytic gradient at `point`
/// and central differences `(f(x + h) − f(x − h)) / 2h`.
///
/// Probes every coordinate when there are at most `samples` of them,
/// otherwise `samples` distinct coordinates drawn from `rng`. The error of a
/// coordinate is `|a − d| / max(|a|, |d|, 1e-6)`.
pub fn finite_diff_check(
    problem: &dyn Problem,
    point: &[Matrix],
    h: f64,
    samples: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let samples = samples.max(MIN_COORDINATES);
    let (_, grads) = problem.loss_grad(point, None)?;
    let mut coords: Vec<(usize, usize)> = point
        .iter()
        .enumerate()
        .flat_map(|(p, m)| (0..m.len()).map(move |i| (p, i)))
        .collect();
    if coords.len() > samples {
        rng.shuffle(&mut coords);
        coords.truncate(samples);
    }
    let mut probe = point.to_vec();
    let mut worst: f64 = 0.0;
    for (p, i) in coords {
        let x0 = probe[p].as_slice()[i];
        probe[p].as_mut_slice()[i] = x0 + h;
        let up = problem.loss(&probe, None)?;
        probe[p].as_mut_slice()[i] = x0 - h;
        let down = problem.loss(&probe, None)?;
        probe[p].as_mut_slice()[i] = x0;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grads[p].as_slice()[i];
        let scale = numeric.abs().max(analytic.abs()).max(FLOOR);
        worst = worst.max((numeric - analytic).abs() / scale);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::quadratic::{Curvature, Offset, Quadratic, QuadraticSpec};

    struct Corrupted(Quadratic);

    impl Problem for Corrupted {
        fn name(&self) -> &str {
            "corrupted"
        }

        fn shapes(&self) -> Vec<(usize, usize)> {
            self.0.shapes()
        }

        fn init(&self) -> Vec<Matrix> {
            self.0.init()
        }

        fn loss_grad(&self, params: &[Matrix], batch: Option<&[usize]>) -> Result<(f64, Vec<Matrix>)> {
            let (loss, mut g) = self.0.loss_grad(params, batch)?;
            g[0].as_mut_slice()[5] *= 1.1;
            Ok((loss, g))
        }
    }

    fn quad() -> Quadratic {
        Quadratic::new(&QuadraticSpec {
            rows: 8,
            cols: 8,
            curvature: Curvature::Stiff { cond: 10.0 },
            offset: Offset::Gaussian(1.0),
            target_scale: 1.0,
            seed: 6,
        })
        .unwrap()
    }

    #[test]
    fn quadratic_is_exact() {
        let q = quad();
        let err = finite_diff_check(&q, &q.init(), 1e-6, 100, &mut RngStream::new(1)).unwrap();
        assert!(err < 1e-7, "{err}");
    }

    #[test]
    fn detects_corruption() {
        let c = Corrupted(quad());
        let err = finite_diff_check(&c, &c.init(), 1e-6, 100, &mut RngStream::new(1)).unwrap();
        assert!(err > 0.05, "{err}");
    }

    #[test]
    fn rejects_bad_step() {
        let q = quad();
        assert!(finite_diff_check(&q, &q.init(), 0.0, 100, &mut RngStream::new(1)).is_err());
    }
}
