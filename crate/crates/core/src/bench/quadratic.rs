use crate::bench::problem::{check_params, Problem};
use crate::densela::{gaussian_matrix, RngStream};
use crate::error::{invalid, Result};
use crate::Matrix;

/// Layout of the per-entry curvature `s` of the quadratic.
///
/// The gradient is `s ⊙ (W − W*)`, so with a uniform offset `W − W*` the
/// squared gradients, and hence every second-moment estimate, inherit the
/// structure of `s²`.
#[derive(Clone, Debug, PartialEq)]
pub enum Curvature {
    /// Outer product of two positive random vectors.
    RankOne,
    /// `count` diagonal blocks of ones over a constant `floor`, giving
    /// `count` equal dominant singular values.
    Blocks { count: usize, floor: f64 },
    /// Log-uniform entries in `[1/√cond, √cond]`, with the two extremes
    /// placed at the first two entries so the ratio is exactly `cond`.
    Stiff { cond: f64 },
}

/// How the starting offset `W₀ − W*` is drawn.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Offset {
    /// Every entry equal to the given value.
    Uniform(f64),
    /// Independent normals with the given standard deviation.
    Gaussian(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSpec {
    pub rows: usize,
    pub cols: usize,
    pub curvature: Curvature,
    pub offset: Offset,
    /// Standard deviation of the minimiser `W*`; zero puts it at the origin.
    pub target_scale: f64,
    pub seed: u64,
}

/// `f(W) = ½ Σ sᵢⱼ (Wᵢⱼ − W*ᵢⱼ)²`, trained full batch.
#[derive(Clone, Debug)]
pub struct Quadratic {
    name: String,
    curvature: Matrix,
    target: Matrix,
    start: Matrix,
}

impl Quadratic {
    pub fn new(spec: &QuadraticSpec) -> Result<Self> {
        let (m, n) = (spec.rows, spec.cols);
        let mut rng = RngStream::new(spec.seed);
        let curvature = match &spec.curvature {
            Curvature::RankOne => {
                let a: Vec<f64> = (0..m).map(|_| 0.5 + rng.uniform()).collect();
                let b: Vec<f64> = (0..n).map(|_| 0.5 + rng.uniform()).collect();
                Matrix::outer(&a, &b)?
            }
            Curvature::Blocks { count, floor } => {
                if *count == 0 || *count > m.min(n) {
                    return Err(invalid(format!("cannot place {count} blocks in {m}x{n}")));
                }
                Matrix::from_fn(m, n, |i, j| {
                    if i * count / m == j * count / n {
                        1.0 + floor
                    } else {
                        *floor
                    }
                })?
            }
            Curvature::Stiff { cond } => {
                if !(*cond >= 1.0) {
                    return Err(invalid("condition number must be at least 1"));
                }
                if m * n < 2 {
                    return Err(invalid("a stiff quadratic needs at least two entries"));
                }
                let half = cond.ln() / 2.0;
                let mut s = Matrix::from_fn(m, n, |_, _| (half * (2.0 * rng.uniform() - 1.0)).exp())?;
                s.as_mut_slice()[0] = half.exp();
                s.as_mut_slice()[1] = (-half).exp();
                s
            }
        };
        if curvature.as_slice().iter().any(|&s| !(s > 0.0)) {
            return Err(invalid("curvature must be positive"));
        }
        let target = gaussian_matrix::<f64>(m, n, &mut rng)?.scale(spec.target_scale);
        let offset = match spec.offset {
            Offset::Uniform(c) => Matrix::filled(m, n, c)?,
            Offset::Gaussian(sd) => gaussian_matrix::<f64>(m, n, &mut rng)?.scale(sd),
        };
        let start = target.add(&offset)?;
        let name = format!("quadratic{m}x{n}");
        Ok(Self {
            name,
            curvature,
            target,
            start,
        })
    }

    pub fn curvature(&self) -> &Matrix {
        &self.curvature
    }

    pub fn target(&self) -> &Matrix {
        &self.target
    }

    /// Ratio of the largest to the smallest curvature entry.
    pub fn condition(&self) -> f64 {
        let s = self.curvature.as_slice();
        let hi = s.iter().copied().fold(f64::MIN, f64::max);
        let lo = s.iter().copied().fold(f64::MAX, f64::min);
        hi / lo
    }
}

impl Problem for Quadratic {
    fn name(&self) -> &str {
        &self.name
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![self.target.shape()]
    }

    fn init(&self) -> Vec<Matrix> {
        vec![self.start.clone()]
    }

    fn loss_grad(&self, params: &[Matrix], _batch: Option<&[usize]>) -> Result<(f64, Vec<Matrix>)> {
        check_params(&self.name, &self.shapes(), params)?;
        let diff = params[0].sub(&self.target)?;
        let grad = diff.mul_elem(&self.curvature)?;
        let loss = 0.5 * grad.inner(&diff)?;
        Ok((loss, vec![grad]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(curvature: Curvature) -> QuadraticSpec {
        QuadraticSpec {
            rows: 12,
            cols: 10,
            curvature,
            offset: Offset::Gaussian(1.0),
            target_scale: 1.0,
            seed: 4,
        }
    }

    #[test]
    fn minimum_at_target() {
        let q = Quadratic::new(&spec(Curvature::Stiff { cond: 1e4 })).unwrap();
        let (loss, g) = q.loss_grad(&[q.target().clone()], None).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(g[0].max_abs(), 0.0);
        assert!((q.condition() / 1e4 - 1.0).abs() < 1e-12);
        assert!(q.loss(&q.init(), None).unwrap() > 0.0);
    }

    #[test]
    fn block_curvature_layout() {
        let q = Quadratic::new(&spec(Curvature::Blocks { count: 2, floor: 0.0 }).clone()).unwrap_err();
        assert!(q.to_string().contains("positive"));
        let q = Quadratic::new(&spec(Curvature::Blocks { count: 2, floor: 1e-3 })).unwrap();
        assert_eq!(q.curvature().get(0, 0), 1.0 + 1e-3);
        assert_eq!(q.curvature().get(0, 9), 1e-3);
        assert_eq!(q.curvature().get(11, 9), 1.0 + 1e-3);
    }

    #[test]
    fn wrong_shapes_rejected() {
        let q = Quadratic::new(&spec(Curvature::RankOne)).unwrap();
        assert!(q.loss(&[Matrix::zeros(3, 3).unwrap()], None).is_err());
        assert!(q.loss(&[], None).is_err());
    }
}
