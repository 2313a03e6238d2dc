//! End-to-end comparison on a synthetic corpus: average model, adaptation,
//! error reduction, and a parallel baseline, scored by DTW-aligned MCD on
//! held-out parallel sentences.

use std::path::Path;

use super::phases::{
    adapt_model, build_ern_dataset, load_parallel, train_average_model, train_ern,
    train_parallel_baseline,
};
use super::system::VcSystem;
use crate::error::{Error, Result};
use crate::features::synthetic::{speaker_id, utterance_id};
use crate::features::{gen_synthetic_corpus, SyntheticCorpusConfig};
use crate::prosody::{estimate_prosody, mcd_aligned};
use crate::training::{TrainConfig, TrainReport};

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub corpus: SyntheticCorpusConfig,
    /// Speakers `0..average_speakers` train the average model; the next two
    /// are source and target.
    pub average_speakers: usize,
    /// Target sentences used for adaptation, and with the source speaker's
    /// renditions, for the error reduction network.
    pub adapt_utts: usize,
    /// Held-out parallel sentences that follow the adaptation ones.
    pub test_utts: usize,
    pub average_hidden: Vec<usize>,
    pub ern_hidden: Vec<usize>,
    pub baseline_hidden: Vec<usize>,
    pub average_cfg: TrainConfig,
    pub adapt_cfg: TrainConfig,
    pub ern_cfg: TrainConfig,
    pub baseline_cfg: TrainConfig,
    pub run_baseline: bool,
}

impl ExperimentConfig {
    /// Desk-scale setup: 5 average speakers, 10 adaptation/parallel and 10
    /// test sentences, reduced hidden sizes. Adaptation gets a deliberately
    /// small budget of two epochs; the mapping networks are a single
    /// bidirectional layer, which trains reliably on ~300 frames.
    pub fn desk_scale(seed: u64) -> Self {
        let corpus = SyntheticCorpusConfig {
            n_speakers: 7,
            n_utterances_per_speaker: 20,
            frame_range: (20, 36),
            label_dim: 10,
            mcep_dim: 6,
            noise_std: 0.05,
            seed,
            speaker_spread: 0.4,
            ap_dim: 1,
        };
        let base = TrainConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            max_epochs: 60,
            patience: 10,
            batch_size: 1,
            seed,
            gradient_clip: 5.0,
            shuffle: true,
        };
        Self {
            corpus,
            average_speakers: 5,
            adapt_utts: 10,
            test_utts: 10,
            average_hidden: vec![16, 32, 16],
            ern_hidden: vec![32],
            baseline_hidden: vec![32],
            average_cfg: base.clone(),
            adapt_cfg: TrainConfig {
                max_epochs: 2,
                ..base.clone()
            },
            ern_cfg: TrainConfig {
                learning_rate: 0.2,
                ..base.clone()
            },
            baseline_cfg: TrainConfig {
                learning_rate: 0.2,
                ..base
            },
            run_baseline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    /// Unconverted source against target.
    pub mcd_source_target: f64,
    /// Adapted architecture with all weights zero (predicts the target mean).
    pub mcd_zero: f64,
    pub mcd_adapted: f64,
    pub mcd_full: f64,
    pub mcd_baseline: Option<f64>,
    /// Training report of every phase that ran, by phase name.
    pub reports: Vec<(String, TrainReport)>,
}

pub fn run_ordering_experiment(
    cfg: &ExperimentConfig,
    work_dir: &Path,
) -> Result<ExperimentResult> {
    let needed_speakers = cfg.average_speakers + 2;
    let needed_utts = cfg.adapt_utts + cfg.test_utts;
    if cfg.corpus.n_speakers < needed_speakers || cfg.corpus.n_utterances_per_speaker < needed_utts
    {
        return Err(Error::Config(format!(
            "corpus needs {needed_speakers} speakers with {needed_utts} utterances each"
        )));
    }
    let manifest = gen_synthetic_corpus(&cfg.corpus, work_dir)?;
    let source = speaker_id(cfg.average_speakers);
    let target = speaker_id(cfg.average_speakers + 1);
    let adapt_ids: Vec<String> = (0..cfg.adapt_utts).map(utterance_id).collect();
    let test_ids: Vec<String> = (cfg.adapt_utts..needed_utts).map(utterance_id).collect();

    let avg_manifest =
        manifest.filter(|r| speaker_index(&r.speaker_id).is_some_and(|s| s < cfg.average_speakers));
    let mut reports = Vec::new();
    let (average, rep) = train_average_model(
        &avg_manifest,
        &[&source, &target],
        &cfg.average_hidden,
        &cfg.average_cfg,
    )?;
    reports.push(("average".to_string(), rep));

    let target_manifest =
        manifest.filter(|r| r.speaker_id == target && adapt_ids.contains(&r.utterance_id));
    let (adapted, rep) = adapt_model(&average, &target_manifest, &cfg.adapt_cfg)?;
    reports.push(("adapted".to_string(), rep));

    let train_manifest = manifest.filter(|r| adapt_ids.contains(&r.utterance_id));
    let parallel = load_parallel(&train_manifest, &source, &target)?;
    let ds = build_ern_dataset(&adapted, &parallel)?;
    let (ern, rep) = train_ern(&ds, &cfg.ern_hidden, &cfg.ern_cfg)?;
    reports.push(("ern".to_string(), rep));

    let src_f0: Vec<_> = parallel.iter().map(|p| &p.source.logf0).collect();
    let tgt_f0: Vec<_> = parallel.iter().map(|p| &p.target.logf0).collect();
    let system = VcSystem::new(
        adapted.clone(),
        ern,
        estimate_prosody(&src_f0)?,
        estimate_prosody(&tgt_f0)?,
    )?;
    let zero = adapted.zero_weights();

    let baseline = if cfg.run_baseline {
        let (b, rep) = train_parallel_baseline(&parallel, &cfg.baseline_hidden, &cfg.baseline_cfg)?;
        reports.push(("baseline".to_string(), rep));
        Some(b)
    } else {
        None
    };

    let test_manifest = manifest.filter(|r| test_ids.contains(&r.utterance_id));
    let test = load_parallel(&test_manifest, &source, &target)?;
    let mut sums = [0.0f64; 5];
    for p in &test {
        let reference = &p.target.mcep;
        let adapted_out = system.convert_spectrum_adapted(&p.source.labels)?;
        let full = system.refine(&adapted_out)?;
        sums[0] += mcd_aligned(reference, &p.source.mcep, false)?;
        sums[1] += mcd_aligned(reference, &zero.forward(&p.source.labels)?, false)?;
        sums[2] += mcd_aligned(reference, &adapted_out, false)?;
        sums[3] += mcd_aligned(reference, &full, false)?;
        if let Some(b) = &baseline {
            sums[4] += mcd_aligned(reference, &b.forward(&p.source.mcep)?, false)?;
        }
    }
    let n = test.len() as f64;
    Ok(ExperimentResult {
        mcd_source_target: sums[0] / n,
        mcd_zero: sums[1] / n,
        mcd_adapted: sums[2] / n,
        mcd_full: sums[3] / n,
        mcd_baseline: baseline.map(|_| sums[4] / n),
        reports,
    })
}

fn speaker_index(id: &str) -> Option<usize> {
    id.strip_prefix("spk")?.parse().ok()
}
