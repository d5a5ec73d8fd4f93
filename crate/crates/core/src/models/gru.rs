//! Bidirectional GRU encoder. Each direction runs the standard gate
//! equations (update and reset via sigmoid, candidate via tanh, reset
//! applied to the recurrent term); the encoder output concatenates the
//! forward and backward states per position into rows of width c = 2h.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::tensor::{orthogonal_init, Array, Graph, NodeId, ParamStore, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GruConfig {
    /// Hidden units per direction.
    pub h: usize,
    pub emb_dim: usize,
    /// Hinge margin for pairwise ranking training.
    pub margin: f64,
    /// l2 penalty on all parameters except embeddings.
    pub l2: f64,
}

impl Default for GruConfig {
    fn default() -> Self {
        GruConfig {
            h: 141,
            emb_dim: 300,
            margin: 0.5,
            l2: 1e-4,
        }
    }
}

impl GruConfig {
    /// Encoder output dimensionality: both directions concatenated.
    pub fn c(&self) -> usize {
        2 * self.h
    }
}

/// Names of one direction's nine parameter arrays, in a fixed order.
pub const GRU_PARTS: [&str; 9] = ["wz", "wr", "wn", "uz", "ur", "un", "bz", "br", "bn"];

/// Insert one direction's parameters into a store: input and recurrent
/// matrices get orthogonal initialization, biases start at zero.
pub fn init_direction(store: &mut ParamStore, prefix: &str, config: &GruConfig, seed: u64) {
    let h = config.h;
    let d = config.emb_dim;
    for (i, part) in GRU_PARTS.iter().enumerate() {
        let name = format!("{prefix}_{part}");
        let value = match *part {
            "wz" | "wr" | "wn" => orthogonal_init(h, d, seed.wrapping_add(i as u64)),
            "uz" | "ur" | "un" => orthogonal_init(h, h, seed.wrapping_add(i as u64)),
            _ => Array::zeros(&[h]),
        };
        store.insert(name, value, false);
    }
}

/// Graph-side handles for one direction.
#[derive(Debug, Clone, Copy)]
pub struct GruDirNodes {
    pub wz: NodeId,
    pub wr: NodeId,
    pub wn: NodeId,
    pub uz: NodeId,
    pub ur: NodeId,
    pub un: NodeId,
    pub bz: NodeId,
    pub br: NodeId,
    pub bn: NodeId,
}

impl GruDirNodes {
    /// Nine node ids in `GRU_PARTS` order.
    pub fn from_slice(ids: &[NodeId]) -> Self {
        assert_eq!(ids.len(), 9);
        GruDirNodes {
            wz: ids[0],
            wr: ids[1],
            wn: ids[2],
            uz: ids[3],
            ur: ids[4],
            un: ids[5],
            bz: ids[6],
            br: ids[7],
            bn: ids[8],
        }
    }
}

pub fn insert_direction<T: Scalar>(
    g: &mut Graph<T>,
    store: &ParamStore,
    prefix: &str,
) -> GruDirNodes {
    let mut ids = [NodeId(0); 9];
    for (i, part) in GRU_PARTS.iter().enumerate() {
        let arr = store
            .get(&format!("{prefix}_{part}"))
            .expect("direction parameters present");
        ids[i] = g.leaf(Array::from_f64(&arr.to_f64()));
    }
    GruDirNodes {
        wz: ids[0],
        wr: ids[1],
        wn: ids[2],
        uz: ids[3],
        ur: ids[4],
        un: ids[5],
        bz: ids[6],
        br: ids[7],
        bn: ids[8],
    }
}

fn gru_step<T: Scalar>(
    g: &mut Graph<T>,
    p: &GruDirNodes,
    x: NodeId,
    h_prev: NodeId,
) -> Result<NodeId> {
    let zx = g.matvec(p.wz, x)?;
    let zh = g.matvec(p.uz, h_prev)?;
    let z_pre = g.add(zx, zh)?;
    let z_pre = g.add(z_pre, p.bz)?;
    let z = g.sigmoid(z_pre)?;

    let rx = g.matvec(p.wr, x)?;
    let rh = g.matvec(p.ur, h_prev)?;
    let r_pre = g.add(rx, rh)?;
    let r_pre = g.add(r_pre, p.br)?;
    let r = g.sigmoid(r_pre)?;

    let gated = g.mul(r, h_prev)?;
    let nx = g.matvec(p.wn, x)?;
    let nh = g.matvec(p.un, gated)?;
    let n_pre = g.add(nx, nh)?;
    let n_pre = g.add(n_pre, p.bn)?;
    let n = g.tanh(n_pre)?;

    let keep = g.mul(z, h_prev)?;
    let one_minus_z = g.affine(z, -1.0, 1.0)?;
    let update = g.mul(one_minus_z, n)?;
    g.add(update, keep)
}

/// Encode a token sequence: row i is the forward state at i concatenated
/// with the backward state at i. `xs` holds one embedding leaf per token.
pub fn encode<T: Scalar>(
    g: &mut Graph<T>,
    fwd: &GruDirNodes,
    bwd: &GruDirNodes,
    xs: &[NodeId],
    h: usize,
) -> Result<NodeId> {
    assert!(!xs.is_empty(), "encode requires a non-empty token sequence");
    let mut fwd_states = Vec::with_capacity(xs.len());
    let mut state = g.leaf(Array::zeros(&[h]));
    for &x in xs {
        state = gru_step(g, fwd, x, state)?;
        fwd_states.push(state);
    }
    let mut bwd_states = vec![NodeId(0); xs.len()];
    let mut state = g.leaf(Array::zeros(&[h]));
    for (i, &x) in xs.iter().enumerate().rev() {
        state = gru_step(g, bwd, x, state)?;
        bwd_states[i] = state;
    }
    let mut rows = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        rows.push(g.concat0(&[fwd_states[i], bwd_states[i]])?);
    }
    g.stack_rows(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> GruConfig {
        GruConfig {
            h: 3,
            emb_dim: 2,
            margin: 0.5,
            l2: 0.0,
        }
    }

    fn encode_rows(store: &ParamStore, config: &GruConfig, xs: &[Vec<f32>]) -> Array<f32> {
        let mut g = Graph::<f32>::new();
        let fwd = insert_direction(&mut g, store, "fwd");
        let bwd = insert_direction(&mut g, store, "bwd");
        let leaves: Vec<NodeId> = xs.iter().map(|x| g.leaf(Array::vector(x.clone()))).collect();
        let q = encode(&mut g, &fwd, &bwd, &leaves, config.h).unwrap();
        g.value(q).clone()
    }

    #[test]
    fn single_token_shape() {
        let config = tiny_config();
        let mut store = ParamStore::new();
        init_direction(&mut store, "fwd", &config, 1);
        init_direction(&mut store, "bwd", &config, 100);
        let out = encode_rows(&store, &config, &[vec![0.5, -0.5]]);
        assert_eq!(out.shape(), &[1, 6]);
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let config = tiny_config();
        let mut store = ParamStore::new();
        for prefix in ["fwd", "bwd"] {
            for part in GRU_PARTS {
                let shape = match part {
                    "wz" | "wr" | "wn" => vec![config.h, config.emb_dim],
                    "uz" | "ur" | "un" => vec![config.h, config.h],
                    _ => vec![config.h],
                };
                store.insert(format!("{prefix}_{part}"), Array::zeros(&shape), false);
            }
        }
        let out = encode_rows(&store, &config, &[vec![1.0, 2.0], vec![-3.0, 4.0]]);
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    /// Independent straight-line recurrence in plain f64 vectors.
    fn oracle_direction(
        store: &ParamStore,
        prefix: &str,
        config: &GruConfig,
        xs: &[Vec<f32>],
    ) -> Vec<Vec<f64>> {
        let h = config.h;
        let get = |part: &str| store.get(&format!("{prefix}_{part}")).unwrap();
        let matvec = |m: &Array<f32>, v: &[f64]| -> Vec<f64> {
            (0..m.rows())
                .map(|i| (0..m.cols()).map(|j| m.at2(i, j) as f64 * v[j]).sum())
                .collect()
        };
        let mut state = vec![0.0f64; h];
        let mut out = Vec::new();
        for x in xs {
            let xv: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let lin = |w: &str, u: &str, b: &str, s: &[f64]| -> Vec<f64> {
                let a = matvec(get(w), &xv);
                let c = matvec(get(u), s);
                let bias = get(b);
                (0..h).map(|i| a[i] + c[i] + bias.data()[i] as f64).collect()
            };
            let z: Vec<f64> = lin("wz", "uz", "bz", &state)
                .into_iter()
                .map(|v| 1.0 / (1.0 + (-v).exp()))
                .collect();
            let r: Vec<f64> = lin("wr", "ur", "br", &state)
                .into_iter()
                .map(|v| 1.0 / (1.0 + (-v).exp()))
                .collect();
            let gated: Vec<f64> = (0..h).map(|i| r[i] * state[i]).collect();
            let n: Vec<f64> = {
                let a = matvec(get("wn"), &xv);
                let c = matvec(get("un"), &gated);
                let bias = get("bn");
                (0..h)
                    .map(|i| (a[i] + c[i] + bias.data()[i] as f64).tanh())
                    .collect()
            };
            state = (0..h).map(|i| (1.0 - z[i]) * n[i] + z[i] * state[i]).collect();
            out.push(state.clone());
        }
        out
    }

    #[test]
    fn matches_hand_unrolled_recurrence() {
        let config = tiny_config();
        let mut store = ParamStore::new();
        init_direction(&mut store, "fwd", &config, 21);
        init_direction(&mut store, "bwd", &config, 22);
        let xs = vec![vec![0.3, -0.1], vec![0.7, 0.2], vec![-0.4, 0.9]];
        let got = encode_rows(&store, &config, &xs);

        let fwd = oracle_direction(&store, "fwd", &config, &xs);
        let mut rev = xs.clone();
        rev.reverse();
        let mut bwd = oracle_direction(&store, "bwd", &config, &rev);
        bwd.reverse();
        for (i, (f, b)) in fwd.iter().zip(&bwd).enumerate() {
            for (j, want) in f.iter().chain(b.iter()).enumerate() {
                let have = got.at2(i, j) as f64;
                assert!(
                    (have - want).abs() < 1e-5,
                    "row {i} col {j}: {have} vs {want}"
                );
            }
        }
    }
}
