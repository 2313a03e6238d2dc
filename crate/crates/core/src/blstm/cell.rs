use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{ensure_dims, Result};

/// Parameters of one LSTM direction. The four gate blocks are stacked in
/// the order input, forget, cell candidate, output: rows `k*H..(k+1)*H` of
/// `w_x`, `w_h` and `b` belong to gate `k`. Peepholes are diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirectionParams {
    pub w_x: Array2<f64>,
    pub w_h: Array2<f64>,
    pub b: Array1<f64>,
    pub w_ci: Array1<f64>,
    pub w_cf: Array1<f64>,
    pub w_co: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TensorRole {
    Weight,
    Bias,
    Peephole,
}

impl LstmDirectionParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Array2::zeros((4 * hidden, input)),
            w_h: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
            w_ci: Array1::zeros(hidden),
            w_cf: Array1::zeros(hidden),
            w_co: Array1::zeros(hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.ncols()
    }

    pub fn input(&self) -> usize {
        self.w_x.ncols()
    }

    /// Tensors in serialization order: per gate (i, f, c, o) the input
    /// matrix, recurrent matrix and bias, then the three peepholes.
    pub(crate) fn tensors(&self) -> Vec<(TensorRole, &[f64])> {
        let h = self.hidden();
        let wx = self.w_x.as_slice().expect("standard layout");
        let wh = self.w_h.as_slice().expect("standard layout");
        let b = self.b.as_slice().expect("standard layout");
        let mut out = Vec::with_capacity(15);
        for ((x, r), bias) in wx
            .chunks_exact(h * self.input())
            .zip(wh.chunks_exact(h * h))
            .zip(b.chunks_exact(h))
        {
            out.push((TensorRole::Weight, x));
            out.push((TensorRole::Weight, r));
            out.push((TensorRole::Bias, bias));
        }
        for p in [&self.w_ci, &self.w_cf, &self.w_co] {
            out.push((TensorRole::Peephole, p.as_slice().expect("standard layout")));
        }
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<(TensorRole, &mut [f64])> {
        let h = self.hidden();
        let i = self.input();
        let wx = self.w_x.as_slice_mut().expect("standard layout");
        let wh = self.w_h.as_slice_mut().expect("standard layout");
        let b = self.b.as_slice_mut().expect("standard layout");
        let mut out = Vec::with_capacity(15);
        for ((x, r), bias) in wx
            .chunks_exact_mut(h * i)
            .zip(wh.chunks_exact_mut(h * h))
            .zip(b.chunks_exact_mut(h))
        {
            out.push((TensorRole::Weight, x));
            out.push((TensorRole::Weight, r));
            out.push((TensorRole::Bias, bias));
        }
        for p in [&mut self.w_ci, &mut self.w_cf, &mut self.w_co] {
            out.push((
                TensorRole::Peephole,
                p.as_slice_mut().expect("standard layout"),
            ));
        }
        out
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += m · v` for a row-major `rows × v.len()` matrix.
#[inline]
pub(crate) fn gemv_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = v.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(cols)) {
        *o += row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += mᵀ · v` for a row-major `v.len() × out.len()` matrix.
#[inline]
pub(crate) fn gemv_t_acc(m: &[f64], v: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (&s, row) in v.iter().zip(m.chunks_exact(cols)) {
        for (o, w) in out.iter_mut().zip(row) {
            *o += s * w;
        }
    }
}

/// Gate nonlinearities and cell update. `pre` holds the stacked
/// pre-activations without peephole terms and is overwritten with the
/// activated gates (i, f, g, o).
#[inline]
pub(crate) fn cell_update(
    p: &LstmDirectionParams,
    pre: &mut [f64],
    c_prev: &[f64],
    c_out: &mut [f64],
    tanh_c: &mut [f64],
    h_out: &mut [f64],
) {
    let h = c_prev.len();
    let (ig, rest) = pre.split_at_mut(h);
    let (fg, rest) = rest.split_at_mut(h);
    let (gg, og) = rest.split_at_mut(h);
    let wci = p.w_ci.as_slice().unwrap();
    let wcf = p.w_cf.as_slice().unwrap();
    let wco = p.w_co.as_slice().unwrap();
    for k in 0..h {
        let i = sigmoid(ig[k] + wci[k] * c_prev[k]);
        let f = sigmoid(fg[k] + wcf[k] * c_prev[k]);
        let g = gg[k].tanh();
        let c = f * c_prev[k] + i * g;
        let o = sigmoid(og[k] + wco[k] * c);
        let tc = c.tanh();
        ig[k] = i;
        fg[k] = f;
        gg[k] = g;
        og[k] = o;
        c_out[k] = c;
        tanh_c[k] = tc;
        h_out[k] = o * tc;
    }
}

/// One peephole LSTM step. Returns `(h_t, c_t)`.
pub fn lstm_cell_step(
    p: &LstmDirectionParams,
    x: ArrayView1<'_, f64>,
    h_prev: ArrayView1<'_, f64>,
    c_prev: ArrayView1<'_, f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let hidden = p.hidden();
    ensure_dims("cell input", p.input(), x.len())?;
    ensure_dims("previous hidden state", hidden, h_prev.len())?;
    ensure_dims("previous cell state", hidden, c_prev.len())?;
    let mut pre = p.w_x.dot(&x) + &p.b;
    let h_prev = h_prev.to_vec();
    gemv_acc(
        p.w_h.as_slice().unwrap(),
        &h_prev,
        pre.as_slice_mut().unwrap(),
    );
    let mut c = vec![0.0; hidden];
    let mut tc = vec![0.0; hidden];
    let mut h = vec![0.0; hidden];
    cell_update(
        p,
        pre.as_slice_mut().unwrap(),
        &c_prev.to_vec(),
        &mut c,
        &mut tc,
        &mut h,
    );
    Ok((Array1::from(h), Array1::from(c)))
}

/// Everything the backward pass needs from one direction, indexed by
/// processing step (reversed time for the backward direction).
#[derive(Debug, Clone)]
pub(crate) struct DirectionTrace {
    /// Activated gates (i, f, g, o), T × 4H.
    pub gates: Array2<f64>,
    pub cells: Array2<f64>,
    pub tanh_cells: Array2<f64>,
    pub hidden: Array2<f64>,
}

/// Runs one direction over `xs` in row order from zero initial state.
pub(crate) fn run_direction(p: &LstmDirectionParams, xs: ArrayView2<'_, f64>) -> DirectionTrace {
    let t_len = xs.nrows();
    let h = p.hidden();
    let mut gates = xs.dot(&p.w_x.t()).as_standard_layout().into_owned();
    gates += &p.b;
    let mut cells = Array2::zeros((t_len, h));
    let mut tanh_cells = Array2::zeros((t_len, h));
    let mut hidden = Array2::zeros((t_len, h));
    let wh = p.w_h.as_slice().unwrap();
    let mut c_prev = vec![0.0; h];
    let mut h_prev = vec![0.0; h];
    let mut c = vec![0.0; h];
    let mut tc = vec![0.0; h];
    let mut hv = vec![0.0; h];
    for t in 0..t_len {
        let mut row = gates.row_mut(t);
        let pre = row.as_slice_mut().unwrap();
        gemv_acc(wh, &h_prev, pre);
        cell_update(p, pre, &c_prev, &mut c, &mut tc, &mut hv);
        cells.row_mut(t).assign(&ArrayView1::from(&c[..]));
        tanh_cells.row_mut(t).assign(&ArrayView1::from(&tc[..]));
        hidden.row_mut(t).assign(&ArrayView1::from(&hv[..]));
        std::mem::swap(&mut c_prev, &mut c);
        std::mem::swap(&mut h_prev, &mut hv);
    }
    DirectionTrace {
        gates,
        cells,
        tanh_cells,
        hidden,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_params_zero_state_is_fixed_point() {
        let p = LstmDirectionParams::zeros(2, 3);
        let (h, c) = lstm_cell_step(
            &p,
            array![0.3, -0.7].view(),
            Array1::zeros(3).view(),
            Array1::zeros(3).view(),
        )
        .unwrap();
        assert_eq!(h, Array1::<f64>::zeros(3));
        assert_eq!(c, Array1::<f64>::zeros(3));
    }

    #[test]
    fn zero_params_unit_cell() {
        let p = LstmDirectionParams::zeros(1, 1);
        let (h, c) = lstm_cell_step(
            &p,
            array![0.0].view(),
            array![0.0].view(),
            array![1.0].view(),
        )
        .unwrap();
        assert_eq!(c[0], 0.5);
        assert!((h[0] - 0.5 * 0.5f64.tanh()).abs() < 1e-15);
        assert!((h[0] - 0.2310586).abs() < 1e-7);
    }

    #[test]
    fn dimension_mismatch() {
        let p = LstmDirectionParams::zeros(2, 3);
        let r = lstm_cell_step(
            &p,
            array![0.0].view(),
            Array1::zeros(3).view(),
            Array1::zeros(3).view(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn tensors_cover_every_parameter() {
        let p = LstmDirectionParams::zeros(3, 2);
        let n: usize = p.tensors().iter().map(|(_, t)| t.len()).sum();
        assert_eq!(n, 4 * 2 * 3 + 4 * 2 * 2 + 4 * 2 + 3 * 2);
        assert_eq!(p.tensors().len(), 15);
    }
}
