//! Central-difference gradient verification on the f64 shadow path.

use crate::error::{Error, Result};

use super::array::Array;
use super::graph::{Graph, NodeId};

pub const GRAD_CHECK_H: f64 = 1e-3;
pub const GRAD_CHECK_TOL: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct GradCheckFailure {
    pub param: usize,
    pub coord: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub coords_checked: usize,
    pub failures: Vec<GradCheckFailure>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compare the tape's gradients of `build`'s scalar output against central
/// differences, coordinate by coordinate. The relative error is
/// |g - g_fd| / (|g| + |g_fd| + 1e-8); non-finite values fail with the
/// offending coordinate.
pub fn grad_check<F>(params: &[Array<f64>], build: F, h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[NodeId]) -> Result<NodeId>,
{
    let eval = |arrays: &[Array<f64>]| -> Result<(f64, Vec<Array<f64>>)> {
        let mut g = Graph::<f64>::new();
        let leaves: Vec<NodeId> = arrays.iter().map(|a| g.leaf(a.clone())).collect();
        let loss = build(&mut g, &leaves)?;
        if !g.value(loss).is_scalar() {
            return Err(Error::Shape {
                op: "grad_check",
                details: format!("loss must be scalar, got {:?}", g.value(loss).shape()),
            });
        }
        let value = g.value(loss).scalar_value();
        g.backward(loss)?;
        let grads = leaves.iter().map(|&id| g.grad(id)).collect();
        Ok((value, grads))
    };

    let (_, analytic) = eval(params)?;

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        coords_checked: 0,
        failures: Vec::new(),
    };
    let mut work: Vec<Array<f64>> = params.to_vec();
    for (pi, param) in params.iter().enumerate() {
        for ci in 0..param.numel() {
            let orig = param.data()[ci];
            work[pi].data_mut()[ci] = orig + h;
            let (plus, _) = eval(&work)?;
            work[pi].data_mut()[ci] = orig - h;
            let (minus, _) = eval(&work)?;
            work[pi].data_mut()[ci] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let g = analytic[pi].data()[ci];
            let rel = (g - numeric).abs() / (g.abs() + numeric.abs() + 1e-8);
            report.coords_checked += 1;
            report.max_rel_err = report.max_rel_err.max(rel);
            if !g.is_finite() || !numeric.is_finite() || rel >= tol {
                report.failures.push(GradCheckFailure {
                    param: pi,
                    coord: ci,
                    analytic: g,
                    numeric,
                    rel_err: rel,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_is_2w() {
        let w = Array::<f64>::vector(vec![0.3, -1.2, 2.0]);
        let report = grad_check(
            &[w.clone()],
            |g, leaves| {
                let sq = g.mul(leaves[0], leaves[0])?;
                g.sum(sq)
            },
            1e-4,
            1e-6,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");

        // The analytic gradient itself is exactly 2w.
        let mut g = Graph::<f64>::new();
        let leaf = g.leaf(w.clone());
        let sq = g.mul(leaf, leaf).unwrap();
        let loss = g.sum(sq).unwrap();
        g.backward(loss).unwrap();
        for (got, want) in g.grad(leaf).data().iter().zip(w.data()) {
            assert!((got - 2.0 * want).abs() < 1e-12);
        }
    }

    #[test]
    fn sigmoid_dot_binary_cross_entropy() {
        let w = Array::<f64>::vector(vec![0.5, -0.25, 0.75]);
        let x = vec![1.0, 2.0, -0.5];
        let report = grad_check(
            &[w],
            |g, leaves| {
                let xs = g.leaf(Array::vector(x.clone()));
                let z = g.dot(leaves[0], xs)?;
                g.bce_with_logits(z, 1.0)
            },
            GRAD_CHECK_H,
            GRAD_CHECK_TOL,
        )
        .unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn disconnected_parameter_gets_zero_gradient() {
        let w = Array::<f64>::vector(vec![1.0, 2.0]);
        let unused = Array::<f64>::vector(vec![5.0]);
        let mut g = Graph::<f64>::new();
        let lw = g.leaf(w);
        let lu = g.leaf(unused);
        let loss = g.sum(lw).unwrap();
        g.backward(loss).unwrap();
        assert_eq!(g.grad(lw).data(), &[1.0, 1.0]);
        assert_eq!(g.grad(lu).data(), &[0.0]);
    }

    #[test]
    fn broken_backward_rule_is_caught() {
        let w = Array::<f64>::vector(vec![0.7, -0.3]);
        let report = grad_check(
            &[w],
            |g, leaves| {
                let y = g.broken_scale(leaves[0])?;
                g.sum(y)
            },
            GRAD_CHECK_H,
            GRAD_CHECK_TOL,
        )
        .unwrap();
        assert!(!report.passed());
        assert_eq!(report.failures.len(), 2);
        assert_eq!(report.failures[0].param, 0);
    }
}
