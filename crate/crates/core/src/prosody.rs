//! Log-F0 statistics conversion and mel-cepstral distortion.

use std::f64::consts::LN_10;
use std::fmt::Write as _;

use crate::alignment::{dtw_align, pair_frames};
use crate::error::{ensure_dims, Error, Result};
use crate::features::{FeatureKind, FeatureSequence, STD_FLOOR};

/// Voiced-frame log-F0 mean and standard deviation of one speaker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProsodyStats {
    pub mean: f64,
    pub std: f64,
}

impl ProsodyStats {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !mean.is_finite() || !(std > 0.0 && std.is_finite()) {
            return Err(Error::Validation(format!(
                "prosody stats need a finite mean and positive std, got ({mean}, {std})"
            )));
        }
        Ok(Self { mean, std })
    }
}

fn is_voiced(v: f64) -> bool {
    v != 0.0
}

fn ensure_logf0(seq: &FeatureSequence) -> Result<()> {
    if seq.kind() != FeatureKind::LogF0 {
        return Err(Error::Validation(format!(
            "expected logf0, got {}",
            seq.kind()
        )));
    }
    Ok(())
}

/// Statistics over voiced (non-zero) frames of all inputs, population std.
pub fn estimate_prosody(seqs: &[&FeatureSequence]) -> Result<ProsodyStats> {
    let mut voiced = Vec::new();
    for s in seqs {
        ensure_logf0(s)?;
        voiced.extend(s.frames().iter().copied().filter(|&v| is_voiced(v)));
    }
    if voiced.is_empty() {
        return Err(Error::Estimation("no voiced frames".into()));
    }
    let n = voiced.len() as f64;
    let mean = voiced.iter().sum::<f64>() / n;
    let var = voiced.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    ProsodyStats::new(mean, if std < STD_FLOOR { 1.0 } else { std })
}

/// Maps voiced frames through `(x − μ_src)/σ_src · σ_tgt + μ_tgt`;
/// unvoiced zeros pass through.
pub fn logf0_convert(
    seq: &FeatureSequence,
    src: &ProsodyStats,
    tgt: &ProsodyStats,
) -> Result<FeatureSequence> {
    ensure_logf0(seq)?;
    let out = seq.frames().mapv(|x| {
        if is_voiced(x) {
            (x - src.mean) / src.std * tgt.std + tgt.mean
        } else {
            x
        }
    });
    FeatureSequence::new(out, FeatureKind::LogF0)
}

/// 10 / ln 10 · √2, the per-frame scale of the distortion.
pub fn mcd_scale() -> f64 {
    10.0 / LN_10 * 2f64.sqrt()
}

/// Mean over frames of `10/ln10 · sqrt(2 Σ_d (ref_d − conv_d)²)`, in dB.
/// Sequences must already be time-aligned.
pub fn mcd(
    reference: &FeatureSequence,
    converted: &FeatureSequence,
    exclude_first_dim: bool,
) -> Result<f64> {
    ensure_dims("mcd frame dimension", reference.dim(), converted.dim())?;
    ensure_dims("mcd frame count", reference.len(), converted.len())?;
    let start = usize::from(exclude_first_dim);
    if start >= reference.dim() {
        return Err(Error::DimensionMismatch(
            "no dimensions left after excluding the first".into(),
        ));
    }
    let k = 10.0 / LN_10;
    let total: f64 = reference
        .frames()
        .outer_iter()
        .zip(converted.frames().outer_iter())
        .map(|(r, c)| {
            let sq: f64 = r
                .iter()
                .zip(c)
                .skip(start)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            k * (2.0 * sq).sqrt()
        })
        .sum();
    Ok(total / reference.len() as f64)
}

/// DTW-aligns `converted` to `reference`, then takes [`mcd`] over the
/// aligned frame pairs.
pub fn mcd_aligned(
    reference: &FeatureSequence,
    converted: &FeatureSequence,
    exclude_first_dim: bool,
) -> Result<f64> {
    let path = dtw_align(reference, converted)?;
    let (r, c) = pair_frames(&path, reference, converted)?;
    mcd(&r, &c, exclude_first_dim)
}

/// Per-utterance distortions plus their mean.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub utterances: Vec<(String, f64)>,
}

impl EvalReport {
    pub fn mean(&self) -> f64 {
        if self.utterances.is_empty() {
            return 0.0;
        }
        self.utterances.iter().map(|(_, v)| v).sum::<f64>() / self.utterances.len() as f64
    }

    /// `utt_id<TAB>mcd_db` per line, then `mean=<value>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, v) in &self.utterances {
            let _ = writeln!(out, "{id}\t{v}");
        }
        let _ = writeln!(out, "mean={}", self.mean());
        out
    }
}
