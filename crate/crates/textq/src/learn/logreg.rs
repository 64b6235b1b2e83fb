//! L2-regularized logistic regression trained by full-batch gradient
//! descent. Zero initialization makes training deterministic; the
//! gradient touches only stored nonzeros, which keeps raw TF-IDF (a
//! million-plus columns) tractable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Features;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub max_epochs: usize,
    /// Converged once the loss moves less than this between epochs.
    pub tol: f64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            learning_rate: 0.1,
            l2: 1e-4,
            max_epochs: 500,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: LogRegConfig,
    pub epochs_run: usize,
    pub final_loss: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 35.0 {
        z
    } else if z < -35.0 {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean cross-entropy plus `l2/2 * ||w||^2`.
pub fn logreg_loss(
    features: &Features,
    labels: &[u8],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> f64 {
    let n = labels.len() as f64;
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let z = features.row_dot(i, weights) + bias;
        loss += softplus(z) - f64::from(y) * z;
    }
    loss / n + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`logreg_loss`] in the weights and bias.
pub fn logreg_gradient(
    features: &Features,
    labels: &[u8],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> (Vec<f64>, f64) {
    let n = labels.len() as f64;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let z = features.row_dot(i, weights) + bias;
        let residual = sigmoid(z) - f64::from(y);
        for (col, value) in features.row_nonzeros(i) {
            grad_w[col as usize] += residual * value;
        }
        grad_b += residual;
    }
    for (g, w) in grad_w.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    (grad_w, grad_b / n)
}

pub fn train_logreg(
    features: &Features,
    labels: &[u8],
    config: &LogRegConfig,
) -> Result<LogRegModel> {
    let n = features.n_rows();
    if n != labels.len() {
        return Err(Error::Invalid(format!("{n} rows for {} labels", labels.len())));
    }
    if n < 2 {
        return Err(Error::Invalid("need at least two training rows".into()));
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(Error::Invalid("both labels are required for training".into()));
    }
    let mut weights = vec![0.0; features.n_cols()];
    let mut bias = 0.0;
    let mut prev_loss = f64::INFINITY;
    let mut epochs_run = 0;
    let mut final_loss = f64::INFINITY;
    for epoch in 0..config.max_epochs {
        let loss = logreg_loss(features, labels, &weights, bias, config.l2);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        let (grad_w, grad_b) = logreg_gradient(features, labels, &weights, bias, config.l2);
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= config.learning_rate * g;
        }
        bias -= config.learning_rate * grad_b;
        epochs_run = epoch + 1;
        final_loss = loss;
        if (prev_loss - loss).abs() < config.tol {
            break;
        }
        prev_loss = loss;
    }
    Ok(LogRegModel {
        weights,
        bias,
        config: *config,
        epochs_run,
        final_loss,
    })
}

impl LogRegModel {
    /// Predicted probability, strictly inside (0, 1).
    pub fn predict_proba(&self, features: &Features, row: usize) -> f64 {
        let z = features.row_dot(row, &self.weights) + self.bias;
        sigmoid(z.clamp(-36.0, 36.0))
    }

    pub fn scores(&self, features: &Features) -> Vec<f64> {
        (0..features.n_rows()).map(|i| self.predict_proba(features, i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{DenseMatrix, Features, SparseMatrix};

    fn dense(rows: &[&[f64]]) -> Features {
        let mut m = DenseMatrix::new(rows[0].len());
        for r in rows {
            m.push_row(r);
        }
        Features::Dense(m)
    }

    #[test]
    fn zero_weights_predict_half() {
        let features = dense(&[&[1.0, -2.0], &[0.3, 4.0]]);
        let model = LogRegModel {
            weights: vec![0.0, 0.0],
            bias: 0.0,
            config: LogRegConfig::default(),
            epochs_run: 0,
            final_loss: 0.0,
        };
        assert_eq!(model.predict_proba(&features, 0), 0.5);
        assert_eq!(model.predict_proba(&features, 1), 0.5);
    }

    #[test]
    fn separable_points_drive_loss_down_monotonically() {
        let features = dense(&[&[-1.0], &[1.0]]);
        let labels = [0u8, 1u8];
        let config = LogRegConfig {
            l2: 0.0,
            ..Default::default()
        };
        let mut weights = vec![0.0];
        let mut bias = 0.0;
        let mut last = logreg_loss(&features, &labels, &weights, bias, 0.0);
        for _ in 0..50 {
            let (gw, gb) = logreg_gradient(&features, &labels, &weights, bias, 0.0);
            for (w, g) in weights.iter_mut().zip(&gw) {
                *w -= config.learning_rate * g;
            }
            bias -= config.learning_rate * gb;
            let loss = logreg_loss(&features, &labels, &weights, bias, 0.0);
            assert!(loss <= last + 1e-12);
            last = loss;
        }
        assert!(last < 0.5);
    }

    #[test]
    fn training_separates_trivial_data() {
        let features = dense(&[&[-2.0], &[-1.5], &[1.5], &[2.0]]);
        let labels = [0, 0, 1, 1];
        let model = train_logreg(&features, &labels, &LogRegConfig::default()).unwrap();
        assert!(model.predict_proba(&features, 0) < 0.5);
        assert!(model.predict_proba(&features, 3) > 0.5);
        for i in 0..4 {
            let p = model.predict_proba(&features, i);
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn single_label_rejected() {
        let features = dense(&[&[1.0], &[2.0]]);
        assert!(train_logreg(&features, &[1, 1], &LogRegConfig::default()).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let features = dense(&[&[0.2, 1.0], &[0.9, -0.3], &[-0.4, 0.8], &[0.1, -1.2]]);
        let labels = [1, 0, 1, 0];
        let a = train_logreg(&features, &labels, &LogRegConfig::default()).unwrap();
        let b = train_logreg(&features, &labels, &LogRegConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    // Central finite-difference oracle for the analytic gradient.
    #[test]
    fn gradient_matches_finite_differences() {
        use rand::Rng;
        let mut rng = crate::rng::stream(21, "logreg-fd");
        for _ in 0..20 {
            let (n, d) = (5usize, 8usize);
            let mut m = DenseMatrix::new(d);
            for _ in 0..n {
                let row: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                m.push_row(&row);
            }
            let features = Features::Dense(m);
            let labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
            let weights: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let bias: f64 = rng.random_range(-1.0..1.0);
            let l2 = 0.01;
            let (grad_w, grad_b) = logreg_gradient(&features, &labels, &weights, bias, l2);
            let h = 1e-5;
            for k in 0..d {
                let mut up = weights.clone();
                let mut dn = weights.clone();
                up[k] += h;
                dn[k] -= h;
                let fd = (logreg_loss(&features, &labels, &up, bias, l2)
                    - logreg_loss(&features, &labels, &dn, bias, l2))
                    / (2.0 * h);
                let denom = fd.abs().max(grad_w[k].abs()).max(1e-8);
                assert!(
                    ((grad_w[k] - fd) / denom).abs() < 1e-4,
                    "w[{k}]: analytic {} vs fd {fd}",
                    grad_w[k]
                );
            }
            let fd_b = (logreg_loss(&features, &labels, &weights, bias + h, l2)
                - logreg_loss(&features, &labels, &weights, bias - h, l2))
                / (2.0 * h);
            let denom = fd_b.abs().max(grad_b.abs()).max(1e-8);
            assert!(((grad_b - fd_b) / denom).abs() < 1e-4);
        }
    }

    #[test]
    fn sparse_and_dense_agree() {
        let rows: Vec<Vec<(u32, f64)>> = vec![
            vec![(0, 0.5), (3, 1.0)],
            vec![(1, 0.2)],
            vec![],
            vec![(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)],
        ];
        let mut sparse = SparseMatrix::new(4);
        let mut dense_m = DenseMatrix::new(4);
        for r in &rows {
            sparse.push_row(r);
            let mut d = vec![0.0; 4];
            for &(c, v) in r {
                d[c as usize] = v;
            }
            dense_m.push_row(&d);
        }
        let labels = [1, 0, 0, 1];
        let cfg = LogRegConfig::default();
        let a = train_logreg(&Features::Sparse(sparse), &labels, &cfg).unwrap();
        let b = train_logreg(&Features::Dense(dense_m), &labels, &cfg).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.bias - b.bias).abs() < 1e-12);
    }
}
