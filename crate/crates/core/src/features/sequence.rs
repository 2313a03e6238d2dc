use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{ensure_dims, Error, Result};

/// Default one-hot label dimension for phoneme posteriors.
pub const DEFAULT_LABEL_DIM: usize = 171;

/// Standard deviations below this are treated as constant dimensions.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureKind {
    Mcep,
    LogF0,
    Aperiodicity,
    Label,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FeatureKind::Mcep => "mcep",
            FeatureKind::LogF0 => "logf0",
            FeatureKind::Aperiodicity => "aperiodicity",
            FeatureKind::Label => "label",
        };
        f.write_str(s)
    }
}

/// A T×D matrix of frames. Immutable once constructed; every constructor
/// validates the kind-specific invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    frames: Array2<f64>,
    kind: FeatureKind,
}

impl FeatureSequence {
    pub fn new(frames: Array2<f64>, kind: FeatureKind) -> Result<Self> {
        let (t, d) = frames.dim();
        if t == 0 || d == 0 {
            return Err(Error::Validation(format!(
                "{kind} sequence must have at least one frame and one dimension, got {t}x{d}"
            )));
        }
        if let Some(((ti, di), v)) = frames.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "{kind} sequence has non-finite value {v} at frame {ti}, dim {di}"
            )));
        }
        match kind {
            FeatureKind::LogF0 if d != 1 => {
                return Err(Error::Validation(format!(
                    "logf0 sequence must be one-dimensional, got {d}"
                )));
            }
            FeatureKind::Label => {
                for (ti, row) in frames.outer_iter().enumerate() {
                    let ones = row.iter().filter(|&&v| v == 1.0).count();
                    let zeros = row.iter().filter(|&&v| v == 0.0).count();
                    if ones != 1 || ones + zeros != d {
                        return Err(Error::Validation(format!(
                            "label frame {ti} is not one-hot"
                        )));
                    }
                }
            }
            _ => {}
        }
        Ok(Self { frames, kind })
    }

    pub fn from_rows(rows: &[Vec<f64>], kind: FeatureKind) -> Result<Self> {
        let t = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let frames =
            Array2::from_shape_vec((t, d), flat).map_err(|e| Error::Validation(e.to_string()))?;
        Self::new(frames, kind)
    }

    /// One-hot label sequence from class indices.
    pub fn one_hot(classes: &[usize], label_dim: usize) -> Result<Self> {
        let mut frames = Array2::zeros((classes.len(), label_dim));
        for (t, &c) in classes.iter().enumerate() {
            if c >= label_dim {
                return Err(Error::Validation(format!(
                    "label class {c} out of range for dimension {label_dim}"
                )));
            }
            frames[[t, c]] = 1.0;
        }
        Self::new(frames, FeatureKind::Label)
    }

    pub fn frames(&self) -> &Array2<f64> {
        &self.frames
    }

    pub fn into_frames(self) -> Array2<f64> {
        self.frames
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    /// Number of frames T.
    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    /// Frame dimension D.
    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    pub fn frame(&self, t: usize) -> ArrayView1<'_, f64> {
        self.frames.row(t)
    }

    /// Reinterpret the frames under another kind, re-validating.
    pub fn with_kind(self, kind: FeatureKind) -> Result<Self> {
        Self::new(self.frames, kind)
    }

    pub fn ensure_label_dim(&self, label_dim: usize) -> Result<()> {
        if self.kind != FeatureKind::Label {
            return Err(Error::Validation(format!(
                "expected a label sequence, got {}",
                self.kind
            )));
        }
        ensure_dims("label dimension", label_dim, self.dim())
    }

    /// Rows selected by index, in order. Indices must be in range.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.len()) {
            return Err(Error::InvalidPath(format!(
                "row {bad} out of range for {} frames",
                self.len()
            )));
        }
        Self::new(self.frames.select(Axis(0), rows), self.kind)
    }
}

/// Per-dimension z-score statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    mean: Array1<f64>,
    std: Array1<f64>,
}

impl NormStats {
    pub fn new(mean: Array1<f64>, std: Array1<f64>) -> Result<Self> {
        ensure_dims("norm stats std length", mean.len(), std.len())?;
        if mean.is_empty() {
            return Err(Error::Validation("norm stats must be non-empty".into()));
        }
        if std.iter().any(|&s| !s.is_finite() || s <= 0.0) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Validation(
                "norm stats need finite means and positive finite stds".into(),
            ));
        }
        Ok(Self { mean, std })
    }

    /// Zero mean, unit std: normalization is a no-op.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: Array1::zeros(dim),
            std: Array1::ones(dim),
        }
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn std(&self) -> &Array1<f64> {
        &self.std
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub(crate) fn normalize_frames(&self, frames: &Array2<f64>) -> Array2<f64> {
        let mut out = frames.clone();
        for mut row in out.outer_iter_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        out
    }

    pub(crate) fn denormalize_frames(&self, frames: &Array2<f64>) -> Array2<f64> {
        let mut out = frames.clone();
        for mut row in out.outer_iter_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = *v * s + m;
            }
        }
        out
    }
}

/// Per-dimension mean and population standard deviation over every frame of
/// every sequence. Dimensions with std below [`STD_FLOOR`] get std 1.0.
pub fn compute_norm_stats(seqs: &[&FeatureSequence]) -> Result<NormStats> {
    let first = seqs
        .first()
        .ok_or_else(|| Error::EmptyInput("no sequences for norm stats".into()))?;
    let dim = first.dim();
    let mut n = 0usize;
    let mut sum = Array1::<f64>::zeros(dim);
    for s in seqs {
        ensure_dims("norm stats input dimension", dim, s.dim())?;
        for row in s.frames().outer_iter() {
            sum += &row;
            n += 1;
        }
    }
    let mean = sum / n as f64;
    let mut sq = Array1::<f64>::zeros(dim);
    for s in seqs {
        for row in s.frames().outer_iter() {
            for ((acc, v), m) in sq.iter_mut().zip(row).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
    }
    let std = sq.mapv(|v| {
        let s = (v / n as f64).sqrt();
        if s < STD_FLOOR {
            1.0
        } else {
            s
        }
    });
    NormStats::new(mean, std)
}

pub fn normalize(seq: &FeatureSequence, stats: &NormStats) -> Result<FeatureSequence> {
    ensure_dims("normalize", stats.dim(), seq.dim())?;
    // normalized labels are no longer one-hot
    let kind = if seq.kind() == FeatureKind::Label {
        FeatureKind::Mcep
    } else {
        seq.kind()
    };
    FeatureSequence::new(stats.normalize_frames(seq.frames()), kind)
}

pub fn denormalize(seq: &FeatureSequence, stats: &NormStats) -> Result<FeatureSequence> {
    ensure_dims("denormalize", stats.dim(), seq.dim())?;
    FeatureSequence::new(stats.denormalize_frames(seq.frames()), seq.kind())
}

/// Concatenate each frame with `left` preceding and `right` following frames,
/// replicating the first/last frame past the edges. Output dim is
/// `(left + 1 + right) * D`.
pub fn stack_context(seq: &FeatureSequence, left: usize, right: usize) -> Result<FeatureSequence> {
    if seq.kind() != FeatureKind::Mcep {
        return Err(Error::Validation(format!(
            "context stacking expects an mcep sequence, got {}",
            seq.kind()
        )));
    }
    let (t_len, d) = seq.frames().dim();
    let width = left + 1 + right;
    let mut out = Array2::zeros((t_len, width * d));
    let last = t_len as isize - 1;
    for t in 0..t_len {
        for k in 0..width {
            let src = (t as isize + k as isize - left as isize).clamp(0, last) as usize;
            out.row_mut(t)
                .slice_mut(ndarray::s![k * d..(k + 1) * d])
                .assign(&seq.frames().row(src));
        }
    }
    FeatureSequence::new(out, FeatureKind::Mcep)
}
