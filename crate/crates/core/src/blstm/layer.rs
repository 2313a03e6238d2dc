use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

use super::cell::{run_direction, DirectionTrace, LstmDirectionParams};
use crate::error::{ensure_dims, Error, Result};

/// A bidirectional layer: two independent LSTM directions over the same input.
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmLayer {
    pub forward: LstmDirectionParams,
    pub backward: LstmDirectionParams,
}

impl BlstmLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            forward: LstmDirectionParams::zeros(input, hidden),
            backward: LstmDirectionParams::zeros(input, hidden),
        }
    }

    pub fn input(&self) -> usize {
        self.forward.input()
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }
}

pub(crate) fn reversed(x: ArrayView2<'_, f64>) -> Array2<f64> {
    x.slice(s![..;-1, ..]).to_owned()
}

/// Forward trace in time order; backward trace in processing order
/// (row 0 is the last frame).
pub(crate) struct LayerTrace {
    pub forward: DirectionTrace,
    pub backward: DirectionTrace,
}

impl LayerTrace {
    /// T × 2H: forward state then backward state for every frame.
    pub fn output(&self) -> Array2<f64> {
        let back = reversed(self.backward.hidden.view());
        concatenate![Axis(1), self.forward.hidden, back]
    }
}

pub(crate) fn run_layer(layer: &BlstmLayer, input: ArrayView2<'_, f64>) -> LayerTrace {
    let forward = run_direction(&layer.forward, input);
    let backward = run_direction(&layer.backward, reversed(input).view());
    LayerTrace { forward, backward }
}

/// Runs both directions from zero initial state and concatenates
/// `[forward h_t ; backward h_t]` per frame.
pub fn blstm_layer_forward(layer: &BlstmLayer, input: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if input.nrows() == 0 {
        return Err(Error::EmptyInput("layer input has no frames".into()));
    }
    ensure_dims("layer input", layer.input(), input.ncols())?;
    if layer.backward.input() != layer.input() || layer.backward.hidden() != layer.hidden() {
        return Err(Error::DimensionMismatch(
            "forward and backward directions differ in shape".into(),
        ));
    }
    Ok(run_layer(layer, input).output())
}
