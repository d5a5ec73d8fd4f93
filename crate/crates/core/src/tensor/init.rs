//! Seeded parameter initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::array::Array;

/// Orthogonal initialization: a seeded Gaussian matrix orthonormalized by
/// modified Gram-Schmidt in f64. For rows <= cols the rows are orthonormal
/// (M Mt = I), otherwise the columns are (Mt M = I). Deterministic per seed.
pub fn orthogonal_init(rows: usize, cols: usize, seed: u64) -> Array<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wide = rows <= cols;
    let (n_vecs, dim) = if wide { (rows, cols) } else { (cols, rows) };
    let mut vecs: Vec<Vec<f64>> = Vec::with_capacity(n_vecs);
    while vecs.len() < n_vecs {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        for prev in &vecs {
            let proj: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
            for (x, p) in v.iter_mut().zip(prev) {
                *x -= proj * p;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-10 {
            // Degenerate draw: discard and sample again from the same stream.
            continue;
        }
        for x in &mut v {
            *x /= norm;
        }
        vecs.push(v);
    }
    let mut data = vec![0.0f32; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            let v = if wide { vecs[i][j] } else { vecs[j][i] };
            data[i * cols + j] = v as f32;
        }
    }
    Array::matrix(rows, cols, data).expect("orthogonal shape")
}

/// Seeded Gaussian matrix scaled by `scale`, for synthetic embeddings.
pub fn gaussian_matrix(rows: usize, cols: usize, scale: f64, seed: u64) -> Array<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            (v * scale) as f32
        })
        .collect();
    Array::matrix(rows, cols, data).expect("gaussian shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram(m: &Array<f32>, by_rows: bool) -> Vec<Vec<f64>> {
        let (r, c) = (m.rows(), m.cols());
        let n = if by_rows { r } else { c };
        let dim = if by_rows { c } else { r };
        let get = |i: usize, k: usize| {
            if by_rows {
                m.at2(i, k) as f64
            } else {
                m.at2(k, i) as f64
            }
        };
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..dim).map(|k| get(i, k) * get(j, k)).sum())
                    .collect()
            })
            .collect()
    }

    fn assert_identity(g: &[Vec<f64>], tol: f64) {
        for (i, row) in g.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < tol, "gram[{i}][{j}] = {v}");
            }
        }
    }

    #[test]
    fn square_is_orthogonal() {
        let m = orthogonal_init(4, 4, 7);
        assert_identity(&gram(&m, true), 1e-5);
        assert_identity(&gram(&m, false), 1e-5);
    }

    #[test]
    fn wide_rows_orthonormal() {
        let m = orthogonal_init(2, 5, 11);
        assert_identity(&gram(&m, true), 1e-5);
    }

    #[test]
    fn tall_cols_orthonormal() {
        let m = orthogonal_init(5, 2, 11);
        assert_identity(&gram(&m, false), 1e-5);
    }

    #[test]
    fn seeded_and_deterministic() {
        assert_eq!(orthogonal_init(3, 6, 42), orthogonal_init(3, 6, 42));
        assert_ne!(orthogonal_init(3, 6, 42), orthogonal_init(3, 6, 43));
        assert_eq!(gaussian_matrix(4, 4, 0.1, 9), gaussian_matrix(4, 4, 0.1, 9));
    }
}
