use std::fs;
use std::path::Path;

use super::phases::ERN_CONTEXT;
use crate::blstm::BlstmModel;
use crate::error::{ensure_dims, Error, Result};
use crate::features::{stack_context, FeatureKind, FeatureSequence};
use crate::prosody::{logf0_convert, ProsodyStats};

/// A trained conversion system: adapted labels→MCEP model, error reduction
/// network, and the log-F0 statistics of both speakers.
#[derive(Debug, Clone, PartialEq)]
pub struct VcSystem {
    pub adapted: BlstmModel,
    pub ern: BlstmModel,
    pub source_prosody: ProsodyStats,
    pub target_prosody: ProsodyStats,
}

/// The three converted streams of one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Converted {
    pub mcep: FeatureSequence,
    pub logf0: FeatureSequence,
    pub ap: FeatureSequence,
}

impl VcSystem {
    pub fn new(
        adapted: BlstmModel,
        ern: BlstmModel,
        source_prosody: ProsodyStats,
        target_prosody: ProsodyStats,
    ) -> Result<Self> {
        let width = ERN_CONTEXT * 2 + 1;
        ensure_dims(
            "error reduction input",
            width * adapted.output_dim(),
            ern.input_dim(),
        )?;
        ensure_dims(
            "error reduction output",
            adapted.output_dim(),
            ern.output_dim(),
        )?;
        Ok(Self {
            adapted,
            ern,
            source_prosody,
            target_prosody,
        })
    }

    /// Adapted model output, before error reduction.
    pub fn convert_spectrum_adapted(&self, labels: &FeatureSequence) -> Result<FeatureSequence> {
        labels.ensure_label_dim(self.adapted.input_dim())?;
        self.adapted.forward(labels)
    }

    pub fn refine(&self, converted: &FeatureSequence) -> Result<FeatureSequence> {
        self.ern
            .forward(&stack_context(converted, ERN_CONTEXT, ERN_CONTEXT)?)
    }

    pub fn convert(
        &self,
        labels: &FeatureSequence,
        logf0: &FeatureSequence,
        ap: &FeatureSequence,
    ) -> Result<Converted> {
        convert(self, labels, logf0, ap)
    }
}

/// Labels → adapted model → error reduction network for the spectrum,
/// statistics matching for log-F0, aperiodicity copied unchanged.
pub fn convert(
    sys: &VcSystem,
    labels: &FeatureSequence,
    logf0: &FeatureSequence,
    ap: &FeatureSequence,
) -> Result<Converted> {
    ensure_dims("logf0 length", labels.len(), logf0.len())?;
    ensure_dims("aperiodicity length", labels.len(), ap.len())?;
    if ap.kind() != FeatureKind::Aperiodicity {
        return Err(Error::Validation(format!(
            "expected aperiodicity, got {}",
            ap.kind()
        )));
    }
    let mcep = sys.refine(&sys.convert_spectrum_adapted(labels)?)?;
    let logf0 = logf0_convert(logf0, &sys.source_prosody, &sys.target_prosody)?;
    Ok(Converted {
        mcep,
        logf0,
        ap: ap.clone(),
    })
}

/// Four lines: source mean, source std, target mean, target std.
pub fn prosody_to_text(src: &ProsodyStats, tgt: &ProsodyStats) -> String {
    format!("{}\n{}\n{}\n{}\n", src.mean, src.std, tgt.mean, tgt.std)
}

pub fn prosody_from_text(text: &str) -> Result<(ProsodyStats, ProsodyStats)> {
    let vals: Vec<f64> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("prosody value {l:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != 4 {
        return Err(Error::Format(format!(
            "prosody file needs 4 values, found {}",
            vals.len()
        )));
    }
    Ok((
        ProsodyStats::new(vals[0], vals[1])?,
        ProsodyStats::new(vals[2], vals[3])?,
    ))
}

pub fn save_prosody(path: impl AsRef<Path>, src: &ProsodyStats, tgt: &ProsodyStats) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, prosody_to_text(src, tgt)).map_err(|e| Error::io(path, e))
}

pub fn load_prosody(path: impl AsRef<Path>) -> Result<(ProsodyStats, ProsodyStats)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    prosody_from_text(&text)
}
