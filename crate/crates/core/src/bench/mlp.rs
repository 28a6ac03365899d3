use crate::bench::problem::{add_row, check_params, select_rows, Problem};
use crate::densela::{gaussian_matrix, RngStream};
use crate::error::{invalid, Result};
use crate::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct MlpSpec {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
    pub n_samples: usize,
    /// Hidden width of the teacher network; zero makes the teacher output
    /// identically zero.
    pub teacher_hidden: usize,
    /// Standard deviation of additive target noise.
    pub noise: f64,
    /// Scale of the student's initial weights relative to `1/√fan_in`.
    pub init_scale: f64,
    pub batch: Option<usize>,
    pub seed: u64,
}

impl MlpSpec {
    pub fn new(n_in: usize, n_hidden: usize, n_out: usize, n_samples: usize, seed: u64) -> Self {
        Self {
            n_in,
            n_hidden,
            n_out,
            n_samples,
            teacher_hidden: 16,
            noise: 0.1,
            init_scale: 1.0,
            batch: None,
            seed,
        }
    }
}

/// One-hidden-layer tanh network `Ŷ = tanh(X W1 + b1) W2` fitted to a
/// noisy tanh teacher with loss `(1 / 2N) Σ ‖Ŷ − Y‖²`.
#[derive(Clone, Debug)]
pub struct Mlp {
    name: String,
    x: Matrix,
    y: Matrix,
    n_hidden: usize,
    start: Vec<Matrix>,
    batch: Option<usize>,
}

impl Mlp {
    pub fn new(spec: &MlpSpec) -> Result<Self> {
        if spec.n_in < 2 || spec.n_hidden < 2 || spec.n_out < 2 || spec.n_samples < 2 {
            return Err(invalid("mlp sizes must be at least 2"));
        }
        if spec.batch.is_some_and(|b| b == 0 || b > spec.n_samples) {
            return Err(invalid("batch size must lie in [1, n_samples]"));
        }
        let mut rng = RngStream::new(spec.seed);
        let x = gaussian_matrix::<f64>(spec.n_samples, spec.n_in, &mut rng)?;
        let mut y = if spec.teacher_hidden == 0 {
            Matrix::zeros(spec.n_samples, spec.n_out)?
        } else {
            let w1 = gaussian_matrix::<f64>(spec.n_in, spec.teacher_hidden, &mut rng)?
                .scale(1.0 / (spec.n_in as f64).sqrt());
            let w2 = gaussian_matrix::<f64>(spec.teacher_hidden, spec.n_out, &mut rng)?
                .scale(1.0 / (spec.teacher_hidden as f64).sqrt());
            x.matmul(&w1)?.map(f64::tanh).matmul(&w2)?
        };
        if spec.noise > 0.0 {
            y.add_scaled_inplace(spec.noise, &gaussian_matrix(spec.n_samples, spec.n_out, &mut rng)?)?;
        }
        let s1 = spec.init_scale / (spec.n_in as f64).sqrt();
        let s2 = spec.init_scale / (spec.n_hidden as f64).sqrt();
        let start = vec![
            gaussian_matrix::<f64>(spec.n_in, spec.n_hidden, &mut rng)?.scale(s1),
            Matrix::zeros(1, spec.n_hidden)?,
            gaussian_matrix::<f64>(spec.n_hidden, spec.n_out, &mut rng)?.scale(s2),
        ];
        Ok(Self {
            name: format!("mlp{}-{}-{}", spec.n_in, spec.n_hidden, spec.n_out),
            x,
            y,
            n_hidden: spec.n_hidden,
            start,
            batch: spec.batch,
        })
    }
}

impl Problem for Mlp {
    fn name(&self) -> &str {
        &self.name
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![
            (self.x.cols(), self.n_hidden),
            (1, self.n_hidden),
            (self.n_hidden, self.y.cols()),
        ]
    }

    fn init(&self) -> Vec<Matrix> {
        self.start.clone()
    }

    fn loss_grad(&self, params: &[Matrix], batch: Option<&[usize]>) -> Result<(f64, Vec<Matrix>)> {
        check_params(&self.name, &self.shapes(), params)?;
        let x = select_rows(&self.x, batch)?;
        let y = select_rows(&self.y, batch)?;
        let n = x.rows() as f64;
        let mut h = x.matmul(&params[0])?;
        add_row(&mut h, &params[1]);
        h.map_inplace(f64::tanh);
        let resid = h.matmul(&params[2])?.sub(&y)?;
        let loss = resid.squared_norm() / (2.0 * n);
        let r = resid.scale(1.0 / n);
        let dw2 = h.matmul_tn(&r)?;
        let mut dz = r.matmul_nt(&params[2])?;
        for (d, &a) in dz.as_mut_slice().iter_mut().zip(h.as_slice()) {
            *d *= 1.0 - a * a;
        }
        let dw1 = x.matmul_tn(&dz)?;
        let db1 = Matrix::from_vec(1, self.n_hidden, dz.col_sums())?;
        Ok((loss, vec![dw1, db1, dw2]))
    }

    fn n_samples(&self) -> usize {
        self.x.rows()
    }

    fn batch_size(&self) -> Option<usize> {
        self.batch
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_teacher_zero_init() {
        let spec = MlpSpec {
            teacher_hidden: 0,
            noise: 0.0,
            init_scale: 0.0,
            ..MlpSpec::new(4, 6, 3, 10, 1)
        };
        let p = Mlp::new(&spec).unwrap();
        let (loss, grads) = p.loss_grad(&p.init(), None).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|g| g.max_abs() == 0.0));
    }

    #[test]
    fn shapes_and_positive_loss() {
        let p = Mlp::new(&MlpSpec::new(5, 8, 3, 20, 2)).unwrap();
        assert_eq!(p.shapes(), vec![(5, 8), (1, 8), (8, 3)]);
        let (loss, grads) = p.loss_grad(&p.init(), Some(&[0, 3, 3, 7])).unwrap();
        assert!(loss > 0.0);
        assert_eq!(grads.len(), 3);
    }
}
