use std::fmt;
use std::str::FromStr;

use crate::adam::{AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tape::Tape;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classifier {
    Knn,
    Logistic,
}

impl Classifier {
    pub fn name(self) -> &'static str {
        match self {
            Classifier::Knn => "knn",
            Classifier::Logistic => "logistic",
        }
    }

    /// Fits on `train_x`/`train_y` and predicts `test_x` with default
    /// settings (5 neighbours; 200 full-batch Adam epochs).
    pub fn predict(self, train_x: &Matrix, train_y: &[usize], test_x: &Matrix) -> Result<Vec<usize>> {
        match self {
            Classifier::Knn => knn_classify(train_x, train_y, test_x, 5),
            Classifier::Logistic => logistic_classify(train_x, train_y, test_x, &LogisticConfig::default()),
        }
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Classifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(Classifier::Knn),
            "logistic" => Ok(Classifier::Logistic),
            _ => Err(Error::Config(format!(
                "unknown classifier {s:?} (expected knn or logistic)"
            ))),
        }
    }
}

fn check_training(train_x: &Matrix, train_y: &[usize], test_x: &Matrix) -> Result<()> {
    if train_x.rows() == 0 {
        return Err(Error::Contract("empty training set".into()));
    }
    if train_x.cols() == 0 {
        return Err(Error::Contract("no features selected".into()));
    }
    if train_y.len() != train_x.rows() {
        return Err(Error::Contract(format!(
            "{} labels for {} training rows",
            train_y.len(),
            train_x.rows()
        )));
    }
    if test_x.cols() != train_x.cols() {
        return Err(Error::Shape {
            op: "classify",
            lhs: train_x.shape(),
            rhs: test_x.shape(),
        });
    }
    Ok(())
}

/// Majority vote of the `k_neighbors` nearest training rows in Euclidean
/// distance. Equal distances keep training order; tied votes go to the
/// smallest label.
pub fn knn_classify(train_x: &Matrix, train_y: &[usize], test_x: &Matrix, k_neighbors: usize) -> Result<Vec<usize>> {
    check_training(train_x, train_y, test_x)?;
    if k_neighbors == 0 || k_neighbors > train_x.rows() {
        return Err(Error::Contract(format!(
            "k_neighbors = {k_neighbors} must lie in 1..={}",
            train_x.rows()
        )));
    }
    let classes = train_y.iter().max().map_or(0, |m| m + 1);
    // squared distances via ‖a‖² − 2a·b + ‖b‖²
    let cross = test_x.matmul_t(train_x)?;
    let norm = |m: &Matrix, r: usize| m.row(r).iter().map(|v| v * v).sum::<f64>();
    let train_norms: Vec<f64> = (0..train_x.rows()).map(|r| norm(train_x, r)).collect();
    let mut preds = Vec::with_capacity(test_x.rows());
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(train_x.rows());
    for t in 0..test_x.rows() {
        let tn = norm(test_x, t);
        order.clear();
        order.extend(
            cross
                .row(t)
                .iter()
                .zip(&train_norms)
                .enumerate()
                .map(|(i, (c, n))| ((tn - 2.0 * c + n).max(0.0), i)),
        );
        order.select_nth_unstable_by(k_neighbors - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; classes];
        for &(_, i) in &order[..k_neighbors] {
            votes[train_y[i]] += 1;
        }
        let best = votes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c)
            .expect("at least one class");
        preds.push(best);
    }
    Ok(preds)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticConfig {
    pub epochs: usize,
    pub lr: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self { epochs: 200, lr: 1e-2 }
    }
}

/// Multinomial logistic regression on standardized features (training-set
/// mean and standard deviation; constant columns are zeroed), fitted with
/// full-batch Adam from zero weights.
pub fn logistic_classify(
    train_x: &Matrix,
    train_y: &[usize],
    test_x: &Matrix,
    cfg: &LogisticConfig,
) -> Result<Vec<usize>> {
    check_training(train_x, train_y, test_x)?;
    let classes = train_y.iter().max().map_or(0, |m| m + 1);
    let first = train_y[0];
    if train_y.iter().all(|&y| y == first) {
        return Err(Error::Contract("logistic regression needs at least two classes".into()));
    }
    let (mean, scale) = standardizer(train_x);
    let xs = standardize(train_x, &mean, &scale);
    let ts = standardize(test_x, &mean, &scale);
    let d = xs.cols();
    let mut w = Matrix::zeros(d, classes);
    let mut b = Matrix::zeros(1, classes);
    let mut adam = AdamState::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        [&w, &b],
    );
    for _ in 0..cfg.epochs {
        let mut tape = Tape::new();
        let x = tape.constant(xs.clone());
        let wv = tape.leaf(w.clone());
        let bv = tape.leaf(b.clone());
        let xw = tape.matmul(x, wv)?;
        let logits = tape.add_row(xw, bv)?;
        let loss = tape.softmax_cross_entropy(logits, train_y.to_vec())?;
        let grads = tape.backward(loss)?;
        adam.step(&mut [&mut w, &mut b], &[grads.wrt(wv), grads.wrt(bv)])?;
    }
    let logits = ts.matmul(&w)?.add_row(&b)?;
    Ok((0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (c, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

fn standardizer(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = x.rows() as f64;
    let mean = x.col_means().into_vec();
    let scale = (0..x.cols())
        .map(|c| {
            let var = (0..x.rows()).map(|r| (x.get(r, c) - mean[c]).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd > 1e-12 {
                1.0 / sd
            } else {
                0.0
            }
        })
        .collect();
    (mean, scale)
}

fn standardize(x: &Matrix, mean: &[f64], scale: &[f64]) -> Matrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            *v = (*v - mean[c]) * scale[c];
        }
    }
    out
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Contract("accuracy of an empty prediction set".into()));
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Mean and standard error `s/√n`, with `s` the sample standard deviation.
pub fn mean_stderr(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::Contract(format!(
            "standard error needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt() / n.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn blobs(n: usize, rng: &mut Rng) -> (Matrix, Vec<usize>) {
        let mut data = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = i % 2;
            data.push(if y == 0 { -5.0 } else { 5.0 } + rng.normal());
            labels.push(y);
        }
        (Matrix::from_vec(n, 1, data).unwrap(), labels)
    }

    #[test]
    fn exact_match_with_one_neighbour() {
        let train = Matrix::from_rows(&[&[0.0, 0.0], &[1.0, 1.0], &[5.0, 5.0]]);
        let test = Matrix::from_rows(&[&[1.0, 1.0]]);
        assert_eq!(knn_classify(&train, &[0, 7, 2], &test, 1).unwrap(), vec![7]);
    }

    #[test]
    fn vote_ties_go_to_smallest_label() {
        let train = Matrix::from_rows(&[&[1.0], &[-1.0]]);
        let test = Matrix::from_rows(&[&[0.0]]);
        assert_eq!(knn_classify(&train, &[3, 1], &test, 2).unwrap(), vec![1]);
    }

    #[test]
    fn too_many_neighbours() {
        let train = Matrix::from_rows(&[&[1.0]]);
        assert!(knn_classify(&train, &[0], &train, 2).is_err());
    }

    #[test]
    fn separated_blobs() {
        let mut rng = Rng::new(3);
        let (tx, ty) = blobs(400, &mut rng);
        let (sx, sy) = blobs(400, &mut rng);
        let knn = accuracy(&knn_classify(&tx, &ty, &sx, 5).unwrap(), &sy).unwrap();
        let lr = accuracy(
            &logistic_classify(&tx, &ty, &sx, &LogisticConfig::default()).unwrap(),
            &sy,
        )
        .unwrap();
        assert!(knn >= 0.99, "{knn}");
        assert!((knn - lr).abs() <= 0.05, "{knn} vs {lr}");
    }

    #[test]
    fn shuffled_labels_are_chance() {
        let mut rng = Rng::new(4);
        let x = rng.normal_matrix(1000, 3, 1.0);
        let y: Vec<usize> = (0..1000).map(|_| rng.below(4)).collect();
        let t = rng.normal_matrix(1000, 3, 1.0);
        let ty: Vec<usize> = (0..1000).map(|_| rng.below(4)).collect();
        let acc = accuracy(&knn_classify(&x, &y, &t, 5).unwrap(), &ty).unwrap();
        assert!((acc - 0.25).abs() <= 0.1, "{acc}");
    }

    #[test]
    fn logistic_separable_and_constant() {
        let x = Matrix::from_rows(&[&[-2.0], &[-1.0], &[1.0], &[2.0]]);
        let y = [0, 0, 1, 1];
        let p = logistic_classify(&x, &y, &x, &LogisticConfig::default()).unwrap();
        assert_eq!(accuracy(&p, &y).unwrap(), 1.0);

        let c = Matrix::filled(5, 2, 3.0);
        let y = [1, 1, 1, 0, 0];
        let p = logistic_classify(&c, &y, &c, &LogisticConfig::default()).unwrap();
        assert_eq!(accuracy(&p, &y).unwrap(), 0.6);

        assert!(logistic_classify(&x, &[1, 1, 1, 1], &x, &LogisticConfig::default()).is_err());
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert!(accuracy(&[1], &[1, 2]).is_err());
        let (m, se) = mean_stderr(&[0.0, 1.0]).unwrap();
        assert_eq!(m, 0.5);
        assert!((se - 0.5).abs() < 1e-15);
        assert_eq!(mean_stderr(&[0.3, 0.3, 0.3]).unwrap().1, 0.0);
        assert!(mean_stderr(&[1.0]).is_err());
    }
}
