use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::cell::TensorRole;
use super::layer::{run_layer, BlstmLayer, LayerTrace};
use crate::error::{ensure_dims, Error, Result};
use crate::features::{FeatureKind, FeatureSequence, NormStats};

/// Half-width of the uniform weight initialization interval.
pub const INIT_RANGE: f64 = 0.1;

/// `y_t = W_fy h→_t + W_by h←_t + b_y` over the top layer's two streams.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputProjection {
    pub w_fwd: Array2<f64>,
    pub w_bwd: Array2<f64>,
    pub b: Array1<f64>,
}

impl OutputProjection {
    pub fn zeros(hidden: usize, output: usize) -> Self {
        Self {
            w_fwd: Array2::zeros((output, hidden)),
            w_bwd: Array2::zeros((output, hidden)),
            b: Array1::zeros(output),
        }
    }

    pub(crate) fn tensors(&self) -> Vec<(TensorRole, &[f64])> {
        vec![
            (TensorRole::Weight, self.w_fwd.as_slice().unwrap()),
            (TensorRole::Weight, self.w_bwd.as_slice().unwrap()),
            (TensorRole::Bias, self.b.as_slice().unwrap()),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<(TensorRole, &mut [f64])> {
        vec![
            (TensorRole::Weight, self.w_fwd.as_slice_mut().unwrap()),
            (TensorRole::Weight, self.w_bwd.as_slice_mut().unwrap()),
            (TensorRole::Bias, self.b.as_slice_mut().unwrap()),
        ]
    }
}

/// Parameter container shaped by an architecture `[I, H_1, …, H_L, O]`.
/// Shared by models and their gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmParams {
    pub layers: Vec<BlstmLayer>,
    pub output: OutputProjection,
}

impl BlstmParams {
    pub fn zeros(arch: &[usize]) -> Result<Self> {
        validate_arch(arch)?;
        let n = arch.len();
        let mut layers = Vec::with_capacity(n - 2);
        let mut width = arch[0];
        for &h in &arch[1..n - 1] {
            layers.push(BlstmLayer::zeros(width, h));
            width = 2 * h;
        }
        Ok(Self {
            layers,
            output: OutputProjection::zeros(arch[n - 2], arch[n - 1]),
        })
    }

    pub(crate) fn tensors(&self) -> Vec<(TensorRole, &[f64])> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend(l.forward.tensors());
            out.extend(l.backward.tensors());
        }
        out.extend(self.output.tensors());
        out
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<(TensorRole, &mut [f64])> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.extend(l.forward.tensors_mut());
            out.extend(l.backward.tensors_mut());
        }
        out.extend(self.output.tensors_mut());
        out
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All parameters in serialization order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for (_, t) in self.tensors() {
            out.extend_from_slice(t);
        }
        out
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        ensure_dims("flat parameter vector", self.len(), values.len())?;
        let mut rest = values;
        for (_, t) in self.tensors_mut() {
            let (head, tail) = rest.split_at(t.len());
            t.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn fill(&mut self, v: f64) {
        for (_, t) in self.tensors_mut() {
            t.fill(v);
        }
    }
}

pub(crate) fn validate_arch(arch: &[usize]) -> Result<()> {
    if arch.len() < 3 {
        return Err(Error::Validation(format!(
            "architecture needs input, at least one hidden layer and output, got {arch:?}"
        )));
    }
    if arch.contains(&0) {
        return Err(Error::Validation(format!(
            "architecture sizes must be positive, got {arch:?}"
        )));
    }
    Ok(())
}

/// Stacked bidirectional LSTM with an affine output layer. Layer sizes in
/// `arch` are per direction, so layer `k > 1` consumes `2·H_{k−1}` inputs.
/// Carries the z-score statistics for its inputs and outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct BlstmModel {
    arch: Vec<usize>,
    params: BlstmParams,
    input_norm: NormStats,
    output_norm: NormStats,
}

pub(crate) struct ForwardTrace {
    /// Normalized model input followed by the output of every layer but the last.
    pub layer_inputs: Vec<Array2<f64>>,
    pub layers: Vec<LayerTrace>,
    /// Normalized prediction, T × O.
    pub y_norm: Array2<f64>,
}

impl BlstmModel {
    pub fn from_parts(
        arch: Vec<usize>,
        params: BlstmParams,
        input_norm: NormStats,
        output_norm: NormStats,
    ) -> Result<Self> {
        let expected = BlstmParams::zeros(&arch)?;
        let shapes_match = expected.layers.len() == params.layers.len()
            && expected
                .tensors()
                .iter()
                .zip(params.tensors())
                .all(|((_, a), (_, b))| a.len() == b.len())
            && expected.output.w_fwd.dim() == params.output.w_fwd.dim()
            && expected.layers.iter().zip(&params.layers).all(|(a, b)| {
                a.forward.w_x.dim() == b.forward.w_x.dim()
                    && a.backward.w_x.dim() == b.backward.w_x.dim()
            });
        if !shapes_match {
            return Err(Error::DimensionMismatch(format!(
                "parameters do not match architecture {arch:?}"
            )));
        }
        ensure_dims("input norm", arch[0], input_norm.dim())?;
        ensure_dims("output norm", *arch.last().unwrap(), output_norm.dim())?;
        if params.to_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("model parameters must be finite".into()));
        }
        Ok(Self {
            arch,
            params,
            input_norm,
            output_norm,
        })
    }

    /// All-zero weights and identity normalization.
    pub fn zeros(arch: &[usize]) -> Result<Self> {
        let params = BlstmParams::zeros(arch)?;
        Ok(Self {
            arch: arch.to_vec(),
            params,
            input_norm: NormStats::identity(arch[0]),
            output_norm: NormStats::identity(*arch.last().unwrap()),
        })
    }

    pub fn arch(&self) -> &[usize] {
        &self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.arch[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.arch.last().unwrap()
    }

    pub fn params(&self) -> &BlstmParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut BlstmParams {
        &mut self.params
    }

    pub fn input_norm(&self) -> &NormStats {
        &self.input_norm
    }

    pub fn output_norm(&self) -> &NormStats {
        &self.output_norm
    }

    pub fn set_input_norm(&mut self, stats: NormStats) -> Result<()> {
        ensure_dims("input norm", self.input_dim(), stats.dim())?;
        self.input_norm = stats;
        Ok(())
    }

    pub fn set_output_norm(&mut self, stats: NormStats) -> Result<()> {
        ensure_dims("output norm", self.output_dim(), stats.dim())?;
        self.output_norm = stats;
        Ok(())
    }

    /// Same architecture and normalization, every weight and bias zero.
    pub fn zero_weights(&self) -> Self {
        let mut m = self.clone();
        m.params.fill(0.0);
        m
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn trace(&self, input: ArrayView2<'_, f64>) -> ForwardTrace {
        let mut layer_inputs = Vec::with_capacity(self.params.layers.len());
        let mut traces = Vec::with_capacity(self.params.layers.len());
        let mut x = self.input_norm.normalize_frames(&input.to_owned());
        for layer in &self.params.layers {
            let tr = run_layer(layer, x.view());
            let next = tr.output();
            layer_inputs.push(x);
            traces.push(tr);
            x = next;
        }
        let top = traces.last().expect("at least one layer");
        let out = &self.params.output;
        let mut y_norm = top.forward.hidden.dot(&out.w_fwd.t());
        let back = super::layer::reversed(top.backward.hidden.view());
        y_norm += &back.dot(&out.w_bwd.t());
        y_norm += &out.b;
        ForwardTrace {
            layer_inputs,
            layers: traces,
            y_norm,
        }
    }

    /// Normalize, run every layer, project, denormalize.
    pub fn forward(&self, input: &FeatureSequence) -> Result<FeatureSequence> {
        ensure_dims("model input", self.input_dim(), input.dim())?;
        let tr = self.trace(input.frames().view());
        let y = self.output_norm.denormalize_frames(&tr.y_norm);
        FeatureSequence::new(y, FeatureKind::Mcep)
            .map_err(|e| Error::Numeric(format!("forward pass produced invalid output: {e}")))
    }
}

/// Convenience alias for [`BlstmModel::forward`].
pub fn stack_forward(model: &BlstmModel, input: &FeatureSequence) -> Result<FeatureSequence> {
    model.forward(input)
}

/// Weights uniform in `[-INIT_RANGE, INIT_RANGE]` from `ChaCha8Rng` seeded
/// with `seed`, drawn in serialization order; biases and peepholes zero;
/// identity normalization.
pub fn init_params(arch: &[usize], seed: u64) -> Result<BlstmModel> {
    let mut model = BlstmModel::zeros(arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (role, t) in model.params.tensors_mut() {
        if role == TensorRole::Weight {
            for v in t.iter_mut() {
                *v = rng.random_range(-INIT_RANGE..=INIT_RANGE);
            }
        }
    }
    Ok(model)
}
