//! Logistic regression over the fixed seven-feature rows, trained by
//! full-batch gradient descent on binary cross-entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub weights: [f64; FeatureVector::ARITY],
    pub bias: f64,
}

impl Default for LrModel {
    fn default() -> Self {
        LrModel {
            weights: [0.0; FeatureVector::ARITY],
            bias: 0.0,
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn lr_predict(model: &LrModel, features: &FeatureVector) -> f64 {
    let x = features.to_array();
    let z: f64 = model
        .weights
        .iter()
        .zip(x.iter())
        .map(|(w, v)| w * v)
        .sum::<f64>()
        + model.bias;
    sigmoid(z)
}

pub fn lr_train(
    rows: &[FeatureVector],
    labels: &[bool],
    learning_rate: f64,
    iterations: usize,
) -> Result<LrModel> {
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(Error::validation(format!(
            "logistic regression needs matching non-empty rows and labels ({} vs {})",
            rows.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::validation(
            "logistic regression training input is single-class",
        ));
    }
    let n = rows.len() as f64;
    let xs: Vec<[f64; FeatureVector::ARITY]> = rows.iter().map(|r| r.to_array()).collect();
    let mut model = LrModel::default();
    for _ in 0..iterations {
        let mut grad_w = [0.0f64; FeatureVector::ARITY];
        let mut grad_b = 0.0f64;
        for (x, &label) in xs.iter().zip(labels) {
            let z: f64 = model
                .weights
                .iter()
                .zip(x.iter())
                .map(|(w, v)| w * v)
                .sum::<f64>()
                + model.bias;
            let err = sigmoid(z) - if label { 1.0 } else { 0.0 };
            for (gw, v) in grad_w.iter_mut().zip(x.iter()) {
                *gw += err * v;
            }
            grad_b += err;
        }
        for (w, gw) in model.weights.iter_mut().zip(grad_w) {
            *w -= learning_rate * gw / n;
        }
        model.bias -= learning_rate * grad_b / n;
        if !model.bias.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite { op: "lr_train" });
        }
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(values: [f64; 7]) -> FeatureVector {
        FeatureVector {
            cnn_score: values[0],
            overlap_count: values[1],
            overlap_idf: values[2],
            q_len: values[3],
            s_parent: values[4],
            s_sibling: values[5],
            s_child: values[6],
        }
    }

    #[test]
    fn zero_model_predicts_half() {
        let m = LrModel::default();
        assert_eq!(lr_predict(&m, &row([3.0, -1.0, 0.5, 7.0, 0.0, 2.0, 1.0])), 0.5);
    }

    #[test]
    fn separable_fixture_reaches_full_accuracy() {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let v = i as f64 / 10.0;
            rows.push(row([v + 1.0, v, 0.0, 0.0, 0.0, 0.0, 0.0]));
            labels.push(true);
            rows.push(row([v - 1.0, -v, 0.0, 0.0, 0.0, 0.0, 0.0]));
            labels.push(false);
        }
        let m = lr_train(&rows, &labels, 0.5, 4000).unwrap();
        for (r, &l) in rows.iter().zip(&labels) {
            assert_eq!(lr_predict(&m, r) > 0.5, l);
        }
    }

    #[test]
    fn single_class_rejected() {
        let rows = vec![row([1.0; 7]); 3];
        assert!(lr_train(&rows, &[true, true, true], 0.1, 10).is_err());
        assert!(lr_train(&[], &[], 0.1, 10).is_err());
    }

    /// Newton/IRLS oracle: an independent convex optimizer for the same
    /// objective (with a whisper of ridge regularization for stability).
    fn irls_oracle(xs: &[[f64; 8]], ys: &[f64], iters: usize) -> [f64; 8] {
        let n = xs.len();
        let d = 8;
        let mut w = [0.0f64; 8];
        for _ in 0..iters {
            let mut grad = [0.0f64; 8];
            let mut hess = vec![vec![0.0f64; d]; d];
            for (x, &y) in xs.iter().zip(ys) {
                let z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                let p = 1.0 / (1.0 + (-z).exp());
                let s = p * (1.0 - p);
                for i in 0..d {
                    grad[i] += (p - y) * x[i] / n as f64;
                    for j in 0..d {
                        hess[i][j] += s * x[i] * x[j] / n as f64;
                    }
                }
            }
            for (i, row) in hess.iter_mut().enumerate() {
                row[i] += 1e-9;
            }
            // Solve hess * step = grad by Gaussian elimination.
            let mut a = hess;
            let mut b = grad;
            for col in 0..d {
                let pivot = (col..d)
                    .max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())
                    .unwrap();
                a.swap(col, pivot);
                b.swap(col, pivot);
                let diag = a[col][col];
                for r in col + 1..d {
                    let f = a[r][col] / diag;
                    for c in col..d {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
            let mut step = [0.0f64; 8];
            for col in (0..d).rev() {
                let mut v = b[col];
                for c in col + 1..d {
                    v -= a[col][c] * step[c];
                }
                step[col] = v / a[col][col];
            }
            for i in 0..d {
                w[i] -= step[i];
            }
        }
        w
    }

    #[test]
    fn gradient_descent_matches_convex_oracle() {
        // 20 rows with O(1) feature scales and both classes present.
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 19.0;
            let noise = ((i * 7919) % 13) as f64 / 13.0 - 0.5;
            let label = i % 2 == 0;
            let base = if label { 0.8 } else { 0.2 };
            rows.push(row([
                base + 0.1 * noise,
                t,
                1.0 - t,
                0.5 * noise + 0.5,
                t * t,
                0.3,
                base * t,
            ]));
            labels.push(label);
        }
        let m = lr_train(&rows, &labels, 0.8, 60000).unwrap();

        let xs: Vec<[f64; 8]> = rows
            .iter()
            .map(|r| {
                let a = r.to_array();
                [a[0], a[1], a[2], a[3], a[4], a[5], a[6], 1.0]
            })
            .collect();
        let ys: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        let w = irls_oracle(&xs, &ys, 50);
        let oracle = LrModel {
            weights: [w[0], w[1], w[2], w[3], w[4], w[5], w[6]],
            bias: w[7],
        };
        for r in &rows {
            let got = lr_predict(&m, r);
            let want = lr_predict(&oracle, r);
            assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        }
    }
}
