use crate::bench::problem::{add_row, check_params, select_rows, Problem};
use crate::densela::{gaussian_matrix, RngStream};
use crate::error::{invalid, Result};
use crate::Matrix;

#[derive(Clone, Debug, PartialEq)]
pub struct LogregSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    /// Spread of the class means relative to the unit within-class noise.
    pub separation: f64,
    /// Fraction of labels replaced by a uniformly random class.
    pub label_noise: f64,
    /// Mini-batch size; `None` trains on the full data set.
    pub batch: Option<usize>,
    pub seed: u64,
}

impl LogregSpec {
    pub fn new(n_samples: usize, n_features: usize, n_classes: usize, seed: u64) -> Self {
        Self {
            n_samples,
            n_features,
            n_classes,
            separation: 0.5,
            label_noise: 0.02,
            batch: None,
            seed,
        }
    }
}

/// Multinomial logistic regression with a weight matrix and a bias row.
///
/// Each sample's class is drawn uniformly and its features are the class
/// mean plus unit Gaussian noise; class means are Gaussian with standard
/// deviation `separation`. A fraction `label_noise` of the labels is then
/// replaced by a random class.
#[derive(Clone, Debug)]
pub struct Logreg {
    name: String,
    x: Matrix,
    labels: Vec<usize>,
    n_classes: usize,
    batch: Option<usize>,
}

impl Logreg {
    pub fn new(spec: &LogregSpec) -> Result<Self> {
        if spec.n_samples < 2 || spec.n_features < 2 || spec.n_classes < 2 {
            return Err(invalid("logreg sizes must be at least 2"));
        }
        if !(0.0..=1.0).contains(&spec.label_noise) {
            return Err(invalid("label noise must lie in [0, 1]"));
        }
        if spec.batch.is_some_and(|b| b == 0 || b > spec.n_samples) {
            return Err(invalid("batch size must lie in [1, n_samples]"));
        }
        if !(spec.separation >= 0.0) {
            return Err(invalid("class separation must be non-negative"));
        }
        let mut rng = RngStream::new(spec.seed);
        let means = gaussian_matrix::<f64>(spec.n_classes, spec.n_features, &mut rng)?.scale(spec.separation);
        let classes: Vec<usize> = (0..spec.n_samples).map(|_| rng.below(spec.n_classes)).collect();
        let mut x = gaussian_matrix::<f64>(spec.n_samples, spec.n_features, &mut rng)?;
        for (i, &c) in classes.iter().enumerate() {
            for (v, &mu) in x.row_mut(i).iter_mut().zip(means.row(c)) {
                *v += mu;
            }
        }
        let labels = classes
            .iter()
            .map(|&c| {
                let flip = rng.uniform() < spec.label_noise;
                let random = rng.below(spec.n_classes);
                if flip {
                    random
                } else {
                    c
                }
            })
            .collect();
        Ok(Self {
            name: format!("logreg{}x{}", spec.n_features, spec.n_classes),
            x,
            labels,
            n_classes: spec.n_classes,
            batch: spec.batch,
        })
    }

    /// Logreg on explicit data.
    pub fn from_data(x: Matrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != x.rows() || labels.iter().any(|&y| y >= n_classes) {
            return Err(invalid("labels do not match the data"));
        }
        Ok(Self {
            name: format!("logreg{}x{}", x.cols(), n_classes),
            x,
            labels,
            n_classes,
            batch: None,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Fraction of samples whose highest-scoring class is the label.
    pub fn accuracy(&self, params: &[Matrix]) -> Result<f64> {
        check_params(&self.name, &self.shapes(), params)?;
        let mut z = self.x.matmul(&params[0])?;
        add_row(&mut z, &params[1]);
        let hits = (0..z.rows()).filter(|&i| argmax(z.row(i)) == self.labels[i]).count();
        Ok(hits as f64 / z.rows() as f64)
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

impl Problem for Logreg {
    fn name(&self) -> &str {
        &self.name
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        vec![(self.x.cols(), self.n_classes), (1, self.n_classes)]
    }

    fn init(&self) -> Vec<Matrix> {
        self.shapes()
            .into_iter()
            .map(|(m, n)| Matrix::zeros(m, n).expect("positive shape"))
            .collect()
    }

    fn loss_grad(&self, params: &[Matrix], batch: Option<&[usize]>) -> Result<(f64, Vec<Matrix>)> {
        check_params(&self.name, &self.shapes(), params)?;
        let x = select_rows(&self.x, batch)?;
        let labels: Vec<usize> = match batch {
            Some(idx) => idx.iter().map(|&i| self.labels[i]).collect(),
            None => self.labels.clone(),
        };
        let n = x.rows() as f64;
        let mut z = x.matmul(&params[0])?;
        add_row(&mut z, &params[1]);
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let row = z.row_mut(i);
            let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - top).exp();
                total += *v;
            }
            loss += total.ln() - row[y].ln();
            for v in row.iter_mut() {
                *v /= total * n;
            }
            row[y] -= 1.0 / n;
        }
        let dw = x.matmul_tn(&z)?;
        let db = Matrix::from_vec(1, self.n_classes, z.col_sums())?;
        Ok((loss / n, vec![dw, db]))
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
    fn zero_weights_give_log_classes() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.5], [0.3, -2.0]]).unwrap();
        let p = Logreg::from_data(x, vec![0, 1, 0, 1], 2).unwrap();
        let loss = p.loss(&p.init(), None).unwrap();
        assert!((loss - 2f64.ln()).abs() < 1e-15);

        let q = Logreg::new(&LogregSpec::new(50, 4, 5, 1)).unwrap();
        assert!((q.loss(&q.init(), None).unwrap() - 5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn batch_matches_full_when_covering_everything() {
        let p = Logreg::new(&LogregSpec::new(30, 5, 3, 2)).unwrap();
        let mut rng = RngStream::new(3);
        let params = vec![gaussian_matrix(5, 3, &mut rng).unwrap(), gaussian_matrix(1, 3, &mut rng).unwrap()];
        let all: Vec<usize> = (0..30).collect();
        let (a, ga) = p.loss_grad(&params, None).unwrap();
        let (b, gb) = p.loss_grad(&params, Some(&all)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
        assert!(p.loss(&params, Some(&[31])).is_err());
    }

    #[test]
    fn label_noise_rate() {
        let clean = Logreg::new(&LogregSpec { label_noise: 0.0, ..LogregSpec::new(4000, 6, 4, 9) }).unwrap();
        let noisy = Logreg::new(&LogregSpec { label_noise: 0.2, ..LogregSpec::new(4000, 6, 4, 9) }).unwrap();
        let changed = clean.labels().iter().zip(noisy.labels()).filter(|(a, b)| a != b).count();
        // A flipped label keeps its class with probability 1/4.
        let rate = changed as f64 / 4000.0;
        assert!((rate - 0.15).abs() < 0.02, "{rate}");
    }
}
