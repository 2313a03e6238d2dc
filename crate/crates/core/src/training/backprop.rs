use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use crate::blstm::{
    gemv_t_acc, reversed, BlstmModel, BlstmParams, DirectionTrace, LstmDirectionParams,
};
use crate::error::{ensure_dims, Error, Result};
use crate::features::FeatureSequence;

/// One gradient tensor per model parameter tensor, same shapes and
/// serialization order as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(BlstmParams);

impl Gradients {
    pub fn zeros_like(model: &BlstmModel) -> Self {
        let mut p = model.params().clone();
        p.fill(0.0);
        Self(p)
    }

    pub fn params(&self) -> &BlstmParams {
        &self.0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.0.to_flat()
    }

    pub fn l2_norm(&self) -> f64 {
        self.to_flat().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Mean squared error over all T·D entries.
pub fn mse_loss(pred: &FeatureSequence, target: &FeatureSequence) -> Result<f64> {
    if pred.frames().dim() != target.frames().dim() {
        return Err(Error::DimensionMismatch(format!(
            "loss operands are {:?} and {:?}",
            pred.frames().dim(),
            target.frames().dim()
        )));
    }
    let n = pred.frames().len() as f64;
    let sum: f64 = pred
        .frames()
        .iter()
        .zip(target.frames().iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / n)
}

/// Backward pass through one direction. `xs` and `dh` are in processing
/// order; returns the gradient with respect to `xs`.
fn backprop_direction(
    p: &LstmDirectionParams,
    tr: &DirectionTrace,
    xs: ArrayView2<'_, f64>,
    dh: ArrayView2<'_, f64>,
    g: &mut LstmDirectionParams,
) -> Array2<f64> {
    let (t_len, h) = tr.hidden.dim();
    let mut da = Array2::<f64>::zeros((t_len, 4 * h));
    let mut dh_next = vec![0.0; h];
    let mut dc_next = vec![0.0; h];
    let mut dc_prev = vec![0.0; h];
    let zeros = vec![0.0; h];
    let wh = p.w_h.as_slice().unwrap();
    let (wci, wcf, wco) = (
        p.w_ci.as_slice().unwrap(),
        p.w_cf.as_slice().unwrap(),
        p.w_co.as_slice().unwrap(),
    );
    let gci = g.w_ci.as_slice_mut().unwrap();
    let gcf = g.w_cf.as_slice_mut().unwrap();
    let gco = g.w_co.as_slice_mut().unwrap();

    for t in (0..t_len).rev() {
        let gates = tr.gates.row(t);
        let gates = gates.as_slice().unwrap();
        let c = tr.cells.row(t);
        let c = c.as_slice().unwrap();
        let tc = tr.tanh_cells.row(t);
        let tc = tc.as_slice().unwrap();
        let c_prev_row = (t > 0).then(|| tr.cells.row(t - 1));
        let c_prev = c_prev_row
            .as_ref()
            .map_or(&zeros[..], |r| r.as_slice().unwrap());
        let mut da_row = da.row_mut(t);
        let da_t = da_row.as_slice_mut().unwrap();
        for k in 0..h {
            let (i, f, gg, o) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
            let dh_k = dh[[t, k]] + dh_next[k];
            let da_o = dh_k * tc[k] * o * (1.0 - o);
            let dc = dc_next[k] + dh_k * o * (1.0 - tc[k] * tc[k]) + da_o * wco[k];
            let da_f = dc * c_prev[k] * f * (1.0 - f);
            let da_i = dc * gg * i * (1.0 - i);
            let da_g = dc * i * (1.0 - gg * gg);
            gco[k] += da_o * c[k];
            gci[k] += da_i * c_prev[k];
            gcf[k] += da_f * c_prev[k];
            dc_prev[k] = dc * f + da_i * wci[k] + da_f * wcf[k];
            da_t[k] = da_i;
            da_t[h + k] = da_f;
            da_t[2 * h + k] = da_g;
            da_t[3 * h + k] = da_o;
        }
        dh_next.fill(0.0);
        gemv_t_acc(wh, da_t, &mut dh_next);
        std::mem::swap(&mut dc_next, &mut dc_prev);
    }

    g.w_x += &da.t().dot(&xs);
    if t_len > 1 {
        let da_tail = da.slice(s![1.., ..]);
        let h_head = tr.hidden.slice(s![..t_len - 1, ..]);
        g.w_h += &da_tail.t().dot(&h_head);
    }
    g.b += &da.sum_axis(Axis(0));
    da.dot(&p.w_x)
}

/// Loss of the denormalized prediction against `target` and its exact
/// gradient with respect to every parameter, by backpropagation through
/// time over the whole sequence in both directions.
pub fn backprop_sequence(
    model: &BlstmModel,
    input: &FeatureSequence,
    target: &FeatureSequence,
) -> Result<(f64, Gradients)> {
    ensure_dims("model input", model.input_dim(), input.dim())?;
    ensure_dims("target dimension", model.output_dim(), target.dim())?;
    ensure_dims("target length", input.len(), target.len())?;

    let tr = model.trace(input.frames().view());
    let out_std = model.output_norm().std();
    let pred = model.output_norm().denormalize_frames(&tr.y_norm);
    let resid = &pred - target.frames();
    let n = resid.len() as f64;
    let loss = resid.iter().map(|r| r * r).sum::<f64>() / n;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss {loss}")));
    }
    // dL/dy_norm = 2/(T·D) · residual · std
    let dy: Array2<f64> = &resid * &(out_std * (2.0 / n));

    let mut grads = Gradients::zeros_like(model);
    let params = model.params();
    let top = tr.layers.last().unwrap();
    let top_back = reversed(top.backward.hidden.view());
    grads.0.output.w_fwd = dy
        .t()
        .dot(&top.forward.hidden)
        .as_standard_layout()
        .into_owned();
    grads.0.output.w_bwd = dy.t().dot(&top_back).as_standard_layout().into_owned();
    grads.0.output.b = dy.sum_axis(Axis(0));

    let mut d_fwd = dy.dot(&params.output.w_fwd);
    let mut d_bwd = dy.dot(&params.output.w_bwd);

    for (l, (layer, ltr)) in params.layers.iter().zip(&tr.layers).enumerate().rev() {
        let x = &tr.layer_inputs[l];
        let g = &mut grads.0.layers[l];
        let dx_f = backprop_direction(
            &layer.forward,
            &ltr.forward,
            x.view(),
            d_fwd.view(),
            &mut g.forward,
        );
        let x_rev = reversed(x.view());
        let d_rev = reversed(d_bwd.view());
        let dx_b = backprop_direction(
            &layer.backward,
            &ltr.backward,
            x_rev.view(),
            d_rev.view(),
            &mut g.backward,
        );
        if l == 0 {
            break;
        }
        let dx = dx_f + reversed(dx_b.view());
        let h_below = params.layers[l - 1].hidden();
        d_fwd = dx.slice(s![.., ..h_below]).to_owned();
        d_bwd = dx.slice(s![.., h_below..]).to_owned();
    }

    if grads.0.to_flat().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    Ok((loss, grads))
}

/// ∂L/∂b_y computed directly from the residual, without the backward pass.
pub fn output_bias_gradient(
    model: &BlstmModel,
    input: &FeatureSequence,
    target: &FeatureSequence,
) -> Result<Array1<f64>> {
    let pred = model.forward(input)?;
    ensure_dims("target length", pred.len(), target.len())?;
    let n = pred.frames().len() as f64;
    let resid = pred.frames() - target.frames();
    Ok(resid.sum_axis(Axis(0)) * model.output_norm().std() * (2.0 / n))
}
