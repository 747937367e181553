//! Standard LSTM cell (input, forget, output gates plus candidate) with
//! hand-written backpropagation through time.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::layers::sigmoid;
use crate::nn::{axpy, ParamId, ParamSet, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct Lstm {
    /// `4H x D`, gate order i, f, g, o.
    pub wx: ParamId,
    /// `4H x H`
    pub wh: ParamId,
    /// `1 x 4H`
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// Everything the backward pass needs from one forward sweep.
#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Tensor,
    /// `T + 1` states, index 0 is the initial state.
    states: Vec<LstmState>,
    /// Activated gates per step, `4H` each.
    gates: Vec<Vec<f64>>,
}

impl LstmCache {
    pub fn final_state(&self) -> &LstmState {
        self.states.last().expect("cache always holds the initial state")
    }

    pub fn steps(&self) -> usize {
        self.gates.len()
    }
}

impl Lstm {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        let wx = params.add(
            format!("{name}.wx"),
            Tensor::xavier_with_fans(4 * hidden, input_dim, input_dim, hidden, rng),
        );
        let wh = params.add(
            format!("{name}.wh"),
            Tensor::xavier_with_fans(4 * hidden, hidden, hidden, hidden, rng),
        );
        let mut b = Tensor::zeros(1, 4 * hidden);
        // forget gate starts open
        b.data_mut()[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
        let bias = params.add(format!("{name}.bias"), b);
        Lstm {
            wx,
            wh,
            bias,
            input_dim,
            hidden,
        }
    }

    pub fn bind(params: &ParamSet, name: &str) -> Result<Self> {
        let wx = params.id(&format!("{name}.wx"))?;
        let rows = params[wx].rows();
        if rows % 4 != 0 {
            return Err(Error::Shape(format!("{name}.wx has {rows} rows")));
        }
        let hidden = rows / 4;
        let input_dim = params[wx].cols();
        let wh = params.id_with_shape(&format!("{name}.wh"), 4 * hidden, hidden)?;
        let bias = params.id_with_shape(&format!("{name}.bias"), 1, 4 * hidden)?;
        Ok(Lstm {
            wx,
            wh,
            bias,
            input_dim,
            hidden,
        })
    }

    fn gates(&self, params: &ParamSet, x: &[f64], prev: &LstmState) -> Vec<f64> {
        let h = self.hidden;
        let mut a = params[self.bias].data().to_vec();
        let wx = &params[self.wx];
        let wh = &params[self.wh];
        for (r, ar) in a.iter_mut().enumerate() {
            *ar += crate::nn::dot(wx.row(r), x) + crate::nn::dot(wh.row(r), &prev.h);
        }
        for (k, v) in a.iter_mut().enumerate() {
            *v = if (2 * h..3 * h).contains(&k) {
                v.tanh()
            } else {
                sigmoid(*v)
            };
        }
        a
    }

    fn advance(&self, gates: &[f64], prev: &LstmState) -> LstmState {
        let h = self.hidden;
        let mut next = LstmState::zeros(h);
        for k in 0..h {
            let (i, f, g, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            next.c[k] = f * prev.c[k] + i * g;
            next.h[k] = o * next.c[k].tanh();
        }
        next
    }

    /// Single inference step without caching.
    pub fn step(&self, params: &ParamSet, x: &[f64], prev: &LstmState) -> LstmState {
        let g = self.gates(params, x, prev);
        self.advance(&g, prev)
    }

    /// Runs the cell over every row of `x`; returns hidden states `T x H`.
    pub fn forward(
        &self,
        params: &ParamSet,
        x: &Tensor,
        init: Option<&LstmState>,
    ) -> Result<(Tensor, LstmCache)> {
        if x.cols() != self.input_dim {
            return Err(Error::Shape(format!(
                "lstm expects {} input cols, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        let mut states = Vec::with_capacity(x.rows() + 1);
        states.push(init.cloned().unwrap_or_else(|| LstmState::zeros(self.hidden)));
        let mut gates = Vec::with_capacity(x.rows());
        let mut out = Tensor::zeros(x.rows(), self.hidden);
        for t in 0..x.rows() {
            let g = self.gates(params, x.row(t), &states[t]);
            let next = self.advance(&g, &states[t]);
            out.row_mut(t).copy_from_slice(&next.h);
            gates.push(g);
            states.push(next);
        }
        Ok((
            out,
            LstmCache {
                x: x.clone(),
                states,
                gates,
            },
        ))
    }

    /// Backpropagation through time.
    ///
    /// `d_out` holds `dL/dh_t` for every step; `d_final` adds gradient on the
    /// final `(h, c)`. Returns `dL/dx` and the gradient on the initial state.
    pub fn backward(
        &self,
        params: &ParamSet,
        grads: &mut ParamSet,
        cache: &LstmCache,
        d_out: Option<&Tensor>,
        d_final: Option<&LstmState>,
    ) -> (Tensor, LstmState) {
        let h = self.hidden;
        let steps = cache.steps();
        let mut d_x = Tensor::zeros(steps, self.input_dim);
        let mut dh_next = d_final.map_or_else(|| vec![0.0; h], |s| s.h.clone());
        let mut dc_next = d_final.map_or_else(|| vec![0.0; h], |s| s.c.clone());
        let mut da = vec![0.0; 4 * h];
        for t in (0..steps).rev() {
            let g = &cache.gates[t];
            let prev = &cache.states[t];
            let cur = &cache.states[t + 1];
            let mut dc_prev = vec![0.0; h];
            for k in 0..h {
                let dh = dh_next[k] + d_out.map_or(0.0, |d| d.get(t, k));
                let (i, f, gg, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let tc = cur.c[k].tanh();
                let d_o = dh * tc;
                let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                let d_i = dc * gg;
                let d_g = dc * i;
                let d_f = dc * prev.c[k];
                dc_prev[k] = dc * f;
                da[k] = d_i * i * (1.0 - i);
                da[h + k] = d_f * f * (1.0 - f);
                da[2 * h + k] = d_g * (1.0 - gg * gg);
                da[3 * h + k] = d_o * o * (1.0 - o);
            }
            grads[self.wx].add_outer(&da, cache.x.row(t), 1.0);
            grads[self.wh].add_outer(&da, &prev.h, 1.0);
            axpy(1.0, &da, grads[self.bias].data_mut());
            params[self.wx].matvec_t_acc(&da, d_x.row_mut(t));
            let mut dh_prev = vec![0.0; h];
            params[self.wh].matvec_t_acc(&da, &mut dh_prev);
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        (
            d_x,
            LstmState {
                h: dh_next,
                c: dc_next,
            },
        )
    }
}

/// Forward and backward LSTMs over the same input, outputs concatenated
/// per position (`T x 2H`).
#[derive(Debug, Clone, Copy)]
pub struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
}

impl BiLstm {
    pub fn new<R: Rng + ?Sized>(
        params: &mut ParamSet,
        name: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Self {
        BiLstm {
            fwd: Lstm::new(params, &format!("{name}.fwd"), input_dim, hidden, rng),
            bwd: Lstm::new(params, &format!("{name}.bwd"), input_dim, hidden, rng),
        }
    }

    pub fn bind(params: &ParamSet, name: &str) -> Result<Self> {
        Ok(BiLstm {
            fwd: Lstm::bind(params, &format!("{name}.fwd"))?,
            bwd: Lstm::bind(params, &format!("{name}.bwd"))?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden
    }

    pub fn forward(&self, params: &ParamSet, x: &Tensor) -> Result<(Tensor, BiLstmCache)> {
        let (hf, cf) = self.fwd.forward(params, x, None)?;
        let (hb_rev, cb) = self.bwd.forward(params, &x.reversed_rows(), None)?;
        let hidden = self.hidden();
        let n = x.rows();
        let mut out = Tensor::zeros(n, 2 * hidden);
        for t in 0..n {
            out.row_mut(t)[..hidden].copy_from_slice(hf.row(t));
            out.row_mut(t)[hidden..].copy_from_slice(hb_rev.row(n - 1 - t));
        }
        Ok((out, BiLstmCache { fwd: cf, bwd: cb }))
    }

    pub fn backward(
        &self,
        params: &ParamSet,
        grads: &mut ParamSet,
        cache: &BiLstmCache,
        d_out: &Tensor,
    ) -> Tensor {
        let hidden = self.hidden();
        let n = d_out.rows();
        let mut df = Tensor::zeros(n, hidden);
        let mut db = Tensor::zeros(n, hidden);
        for t in 0..n {
            df.row_mut(t).copy_from_slice(&d_out.row(t)[..hidden]);
            db.row_mut(n - 1 - t).copy_from_slice(&d_out.row(t)[hidden..]);
        }
        let (mut dx, _) = self.fwd.backward(params, grads, &cache.fwd, Some(&df), None);
        let (dx_rev, _) = self.bwd.backward(params, grads, &cache.bwd, Some(&db), None);
        dx.add_assign(&dx_rev.reversed_rows());
        dx
    }
}
