//! Embedding, 1-D convolution with max-pooling, and dense layers.
//!
//! Layers only hold [`ParamId`]s and dimensions; the numbers live in a
//! [`ParamSet`], and gradients accumulate into a second set of the same
//! layout.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{axpy, dot, ParamId, ParamSet, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        vocab: usize,
        dim: usize,
        rng: &mut R,
    ) -> Self {
        let table = params.add(name, Tensor::xavier(vocab, dim, rng));
        Embedding { table, vocab, dim }
    }

    pub fn bind(params: &ParamSet, name: &str) -> Result<Self> {
        let table = params.id(name)?;
        let t = &params[table];
        Ok(Embedding {
            table,
            vocab: t.rows(),
            dim: t.cols(),
        })
    }

    /// One row per id, copied from the table.
    pub fn forward(&self, params: &ParamSet, ids: &[usize]) -> Result<Tensor> {
        let table = &params[self.table];
        let mut out = Tensor::zeros(ids.len(), self.dim);
        for (i, &id) in ids.iter().enumerate() {
            if id >= self.vocab {
                return Err(Error::invalid(format!(
                    "token id {id} outside vocabulary of {}",
                    self.vocab
                )));
            }
            out.row_mut(i).copy_from_slice(table.row(id));
        }
        Ok(out)
    }

    pub fn backward(&self, grads: &mut ParamSet, ids: &[usize], d_out: &Tensor) {
        let g = &mut grads[self.table];
        for (i, &id) in ids.iter().enumerate() {
            axpy(1.0, d_out.row(i), g.row_mut(id));
        }
    }
}

/// Convolution over token positions followed by rectifier and max-over-time.
#[derive(Debug, Clone, Copy)]
pub struct Conv1d {
    pub weight: ParamId,
    pub bias: ParamId,
    pub filters: usize,
    pub width: usize,
    pub input_dim: usize,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    input: Tensor,
    orig_rows: usize,
    argmax: Vec<usize>,
    pre: Vec<f64>,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        filters: usize,
        width: usize,
        input_dim: usize,
        rng: &mut R,
    ) -> Self {
        let weight = params.add(
            format!("{name}.weight"),
            Tensor::xavier_with_fans(filters, width * input_dim, width * input_dim, filters, rng),
        );
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(1, filters));
        Conv1d {
            weight,
            bias,
            filters,
            width,
            input_dim,
        }
    }

    pub fn bind(params: &ParamSet, name: &str, width: usize) -> Result<Self> {
        let weight = params.id(&format!("{name}.weight"))?;
        let filters = params[weight].rows();
        let cols = params[weight].cols();
        if width == 0 || cols % width != 0 {
            return Err(Error::Shape(format!(
                "{name}: weight cols {cols} not divisible by width {width}"
            )));
        }
        let bias = params.id_with_shape(&format!("{name}.bias"), 1, filters)?;
        Ok(Conv1d {
            weight,
            bias,
            filters,
            width,
            input_dim: cols / width,
        })
    }

    /// Inputs shorter than the window are padded with zero rows.
    pub fn forward(&self, params: &ParamSet, x: &Tensor) -> Result<(Vec<f64>, ConvCache)> {
        if x.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "conv expects {} input cols, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        let orig_rows = x.rows();
        let input = if orig_rows < self.width {
            let mut padded = Tensor::zeros(self.width, self.input_dim);
            padded.data_mut()[..x.len()].copy_from_slice(x.data());
            padded
        } else {
            x.clone()
        };
        let w = &params[self.weight];
        let b = params[self.bias].data();
        let span = self.width * self.input_dim;
        let positions = input.rows() - self.width + 1;
        let mut pre = vec![f64::NEG_INFINITY; self.filters];
        let mut argmax = vec![0; self.filters];
        for p in 0..positions {
            let window = &input.data()[p * self.input_dim..p * self.input_dim + span];
            for f in 0..self.filters {
                let z = dot(w.row(f), window) + b[f];
                if z > pre[f] {
                    pre[f] = z;
                    argmax[f] = p;
                }
            }
        }
        let out = pre.iter().map(|&z| z.max(0.0)).collect();
        Ok((
            out,
            ConvCache {
                input,
                orig_rows,
                argmax,
                pre,
            },
        ))
    }

    pub fn backward(
        &self,
        params: &ParamSet,
        grads: &mut ParamSet,
        cache: &ConvCache,
        d_out: &[f64],
    ) -> Tensor {
        let w = &params[self.weight];
        let span = self.width * self.input_dim;
        let mut d_in = Tensor::zeros(cache.input.rows(), self.input_dim);
        for f in 0..self.filters {
            if cache.pre[f] <= 0.0 || d_out[f] == 0.0 {
                continue;
            }
            let start = cache.argmax[f] * self.input_dim;
            let window = &cache.input.data()[start..start + span];
            axpy(d_out[f], window, grads[self.weight].row_mut(f));
            grads[self.bias].data_mut()[f] += d_out[f];
            axpy(d_out[f], w.row(f), &mut d_in.data_mut()[start..start + span]);
        }
        if cache.orig_rows < d_in.rows() {
            let mut trimmed = Tensor::zeros(cache.orig_rows, self.input_dim);
            let n = trimmed.len();
            trimmed.data_mut().copy_from_slice(&d_in.data()[..n]);
            trimmed
        } else {
            d_in
        }
    }
}

/// Affine map `W x + b`.
#[derive(Debug, Clone, Copy)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input: usize,
    pub output: usize,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        input: usize,
        output: usize,
        rng: &mut R,
    ) -> Self {
        let weight = params.add(format!("{name}.weight"), Tensor::xavier(output, input, rng));
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(1, output));
        Dense {
            weight,
            bias,
            input,
            output,
        }
    }

    pub fn bind(params: &ParamSet, name: &str) -> Result<Self> {
        let weight = params.id(&format!("{name}.weight"))?;
        let (output, input) = (params[weight].rows(), params[weight].cols());
        let bias = params.id_with_shape(&format!("{name}.bias"), 1, output)?;
        Ok(Dense {
            weight,
            bias,
            input,
            output,
        })
    }

    pub fn forward(&self, params: &ParamSet, x: &[f64]) -> Vec<f64> {
        let mut y = params[self.weight].matvec(x);
        axpy(1.0, params[self.bias].data(), &mut y);
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&self, params: &ParamSet, grads: &mut ParamSet, x: &[f64], dy: &[f64]) -> Vec<f64> {
        grads[self.weight].add_outer(dy, x, 1.0);
        axpy(1.0, dy, grads[self.bias].data_mut());
        let mut dx = vec![0.0; self.input];
        params[self.weight].matvec_t_acc(dy, &mut dx);
        dx
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn tanh_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.tanh());
}

/// Backprop through `y = tanh(x)` given the activated output.
pub fn tanh_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    y.iter().zip(dy).map(|(y, d)| d * (1.0 - y * y)).collect()
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_pcg::Pcg64;

    use super::*;

    #[test]
    fn identity_embedding_yields_unit_rows() {
        let mut params = ParamSet::new();
        let table = params.add("emb", Tensor::identity(3));
        let emb = Embedding {
            table,
            vocab: 3,
            dim: 3,
        };
        let out = emb.forward(&params, &[2, 0]).unwrap();
        assert_eq!(out.row(0), &[0.0, 0.0, 1.0]);
        assert_eq!(out.row(1), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_embedding_is_zero() {
        let mut params = ParamSet::new();
        let table = params.add("emb", Tensor::zeros(4, 2));
        let emb = Embedding {
            table,
            vocab: 4,
            dim: 2,
        };
        let out = emb.forward(&params, &[3, 1, 2]).unwrap();
        assert!(out.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn embedding_lookup_matches_table_rows() {
        let mut rng = Pcg64::seed_from_u64(3);
        let mut params = ParamSet::new();
        let emb = Embedding::new(&mut params, "emb", 5, 3, &mut rng);
        let out = emb.forward(&params, &[4, 4]).unwrap();
        let table = &params[emb.table];
        assert_eq!(out.row(0), table.row(4));
        assert_eq!(out.row(1), table.row(4));
    }

    #[test]
    fn embedding_rejects_out_of_range_id() {
        let mut rng = Pcg64::seed_from_u64(3);
        let mut params = ParamSet::new();
        let emb = Embedding::new(&mut params, "emb", 5, 3, &mut rng);
        assert!(matches!(
            emb.forward(&params, &[5]),
            Err(Error::InvalidInput(_))
        ));
    }

    fn single_filter_conv(params: &mut ParamSet, weights: Vec<f64>, dim: usize) -> Conv1d {
        let weight = params.add("c.weight", Tensor::from_vec(1, 3 * dim, weights).unwrap());
        let bias = params.add("c.bias", Tensor::zeros(1, 1));
        Conv1d {
            weight,
            bias,
            filters: 1,
            width: 3,
            input_dim: dim,
        }
    }

    #[test]
    fn averaging_kernel_on_constant_input() {
        let mut params = ParamSet::new();
        let conv = single_filter_conv(&mut params, vec![1.0 / 3.0; 3], 1);
        let x = Tensor::from_vec(5, 1, vec![2.5; 5]).unwrap();
        let (out, _) = conv.forward(&params, &x).unwrap();
        assert!((out[0] - 2.5).abs() < 1e-12);
        // negative constant is rectified away
        let x = Tensor::from_vec(5, 1, vec![-2.5; 5]).unwrap();
        assert_eq!(conv.forward(&params, &x).unwrap().0, vec![0.0]);
    }

    #[test]
    fn short_input_is_padded() {
        let mut rng = Pcg64::seed_from_u64(9);
        let mut params = ParamSet::new();
        let conv = Conv1d::new(&mut params, "c", 4, 3, 2, &mut rng);
        let x = Tensor::from_vec(1, 2, vec![0.3, -0.7]).unwrap();
        let (out, cache) = conv.forward(&params, &x).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|v| v.is_finite() && *v >= 0.0));
        let d = conv.backward(&params, &mut params.zeros_like(), &cache, &[1.0; 4]);
        assert_eq!((d.rows(), d.cols()), (1, 2));
    }

    /// Naive sliding-window oracle, written independently of `Conv1d`.
    fn brute_conv(w: &[Vec<f64>], b: &[f64], x: &[Vec<f64>]) -> Vec<f64> {
        let width = 3;
        w.iter()
            .zip(b)
            .map(|(wf, bf)| {
                let mut best = f64::NEG_INFINITY;
                for p in 0..=x.len() - width {
                    let mut z = *bf;
                    for k in 0..width {
                        for (d, xv) in x[p + k].iter().enumerate() {
                            z += wf[k * x[0].len() + d] * xv;
                        }
                    }
                    best = best.max(z.max(0.0));
                }
                best
            })
            .collect()
    }

    #[test]
    fn conv_matches_brute_force_sliding_window() {
        let mut rng = Pcg64::seed_from_u64(17);
        for _ in 0..20 {
            let mut params = ParamSet::new();
            let conv = Conv1d::new(&mut params, "c", 2, 3, 3, &mut rng);
            params[conv.bias]
                .data_mut()
                .iter_mut()
                .for_each(|b| *b = rng.random_range(-0.5..0.5));
            let rows: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let x = Tensor::from_rows(&rows).unwrap();
            let (out, _) = conv.forward(&params, &x).unwrap();
            let w: Vec<Vec<f64>> = (0..2).map(|f| params[conv.weight].row(f).to_vec()).collect();
            let expected = brute_conv(&w, params[conv.bias].data(), &rows);
            for (a, e) in out.iter().zip(&expected) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_filter_is_reversal_invariant() {
        let mut rng = Pcg64::seed_from_u64(5);
        let mut params = ParamSet::new();
        // window [a, b, a] over 2-dim rows
        let a: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
        let weights = [a.clone(), b, a].concat();
        let conv = single_filter_conv(&mut params, weights, 2);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let fwd = conv.forward(&params, &x).unwrap().0;
        let rev = conv.forward(&params, &x.reversed_rows()).unwrap().0;
        assert!((fwd[0] - rev[0]).abs() < 1e-12);
    }

    #[test]
    fn dense_forward_backward_shapes() {
        let mut rng = Pcg64::seed_from_u64(1);
        let mut params = ParamSet::new();
        let d = Dense::new(&mut params, "d", 3, 2, &mut rng);
        let y = d.forward(&params, &[1.0, 2.0, 3.0]);
        assert_eq!(y.len(), 2);
        let mut grads = params.zeros_like();
        let dx = d.backward(&params, &mut grads, &[1.0, 2.0, 3.0], &[1.0, 0.0]);
        assert_eq!(dx, params[d.weight].row(0).to_vec());
        assert_eq!(grads[d.bias].data(), &[1.0, 0.0]);
    }
}
