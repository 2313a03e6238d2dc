use crate::alignment::{dtw_align, pair_frames};
use crate::blstm::{init_params, BlstmModel};
use crate::error::{ensure_dims, Error, Result};
use crate::features::{
    compute_norm_stats, stack_context, CorpusManifest, FeatureSequence, NormStats, Utterance,
};
use crate::training::{train, SeqPair, TrainConfig, TrainReport};

/// Context frames on each side of the error reduction network input.
pub const ERN_CONTEXT: usize = 1;

/// Every `VALID_EVERY`-th utterance is held out for validation.
pub const VALID_EVERY: usize = 10;

/// Deterministic train/validation split. Sets with fewer than two items are
/// used for both.
pub fn split_validation<T: Clone>(items: &[T]) -> (Vec<T>, Vec<T>) {
    if items.len() < 2 {
        return (items.to_vec(), items.to_vec());
    }
    let mut train_part = Vec::new();
    let mut valid = Vec::new();
    for (k, it) in items.iter().enumerate() {
        if k % VALID_EVERY == VALID_EVERY - 1 {
            valid.push(it.clone());
        } else {
            train_part.push(it.clone());
        }
    }
    if valid.is_empty() {
        valid.push(train_part.pop().expect("at least two items"));
    }
    (train_part, valid)
}

fn output_stats(pairs: &[SeqPair]) -> Result<NormStats> {
    let targets: Vec<&FeatureSequence> = pairs.iter().map(|(_, y)| y).collect();
    compute_norm_stats(&targets)
}

fn input_stats(pairs: &[SeqPair]) -> Result<NormStats> {
    let inputs: Vec<&FeatureSequence> = pairs.iter().map(|(x, _)| x).collect();
    compute_norm_stats(&inputs)
}

fn arch_for(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut arch = Vec::with_capacity(hidden.len() + 2);
    arch.push(input);
    arch.extend_from_slice(hidden);
    arch.push(output);
    arch
}

fn label_mcep_pairs(utts: &[Utterance]) -> Result<Vec<SeqPair>> {
    let first = utts
        .first()
        .ok_or_else(|| Error::EmptyInput("no utterances".into()))?;
    let (ld, md) = (first.labels.dim(), first.mcep.dim());
    utts.iter()
        .map(|u| {
            u.labels.ensure_label_dim(ld)?;
            ensure_dims("mcep dimension", md, u.mcep.dim())?;
            Ok((u.labels.clone(), u.mcep.clone()))
        })
        .collect()
}

/// Phase 1: labels→MCEP model over every speaker except `excluded`.
/// Labels pass through unnormalized; MCEPs are z-scored with statistics of
/// the training split.
pub fn train_average_model(
    manifest: &CorpusManifest,
    excluded: &[&str],
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<(BlstmModel, TrainReport)> {
    if let Some(r) = manifest
        .records()
        .iter()
        .find(|r| excluded.contains(&r.speaker_id.as_str()))
    {
        return Err(Error::Validation(format!(
            "average-model manifest contains excluded speaker {}",
            r.speaker_id
        )));
    }
    if manifest.is_empty() {
        return Err(Error::EmptyInput("average-model manifest is empty".into()));
    }
    let pairs = label_mcep_pairs(&manifest.load_all()?)?;
    let (train_set, valid_set) = split_validation(&pairs);
    let arch = arch_for(pairs[0].0.dim(), hidden, pairs[0].1.dim());
    let mut model = init_params(&arch, cfg.seed)?;
    model.set_output_norm(output_stats(&train_set)?)?;
    train(&model, &train_set, &valid_set, cfg)
}

/// Phase 2: warm-start fine-tuning of the whole average model on one target
/// speaker. Output statistics are recomputed from the target data; the
/// optimizer starts with zero velocity.
pub fn adapt_model(
    avg: &BlstmModel,
    target_manifest: &CorpusManifest,
    cfg: &TrainConfig,
) -> Result<(BlstmModel, TrainReport)> {
    let speakers = target_manifest.speakers();
    if speakers.len() != 1 {
        return Err(Error::Validation(format!(
            "adaptation needs exactly one speaker, manifest has {}",
            speakers.len()
        )));
    }
    let pairs = label_mcep_pairs(&target_manifest.load_all()?)?;
    ensure_dims("label dimension", avg.input_dim(), pairs[0].0.dim())?;
    ensure_dims("mcep dimension", avg.output_dim(), pairs[0].1.dim())?;
    let (train_set, valid_set) = split_validation(&pairs);
    let mut model = avg.clone();
    model.set_output_norm(output_stats(&train_set)?)?;
    train(&model, &train_set, &valid_set, cfg)
}

/// Source and target renditions of the same sentence.
#[derive(Debug, Clone)]
pub struct ParallelUtterance {
    pub source: Utterance,
    pub target: Utterance,
}

/// Utterances present for both speakers, in the source speaker's order.
pub fn load_parallel(
    manifest: &CorpusManifest,
    source: &str,
    target: &str,
) -> Result<Vec<ParallelUtterance>> {
    let mut out = Vec::new();
    for r in manifest.records().iter().filter(|r| r.speaker_id == source) {
        if let Some(t) = manifest.find(target, &r.utterance_id) {
            out.push(ParallelUtterance {
                source: manifest.load_utterance(r)?,
                target: manifest.load_utterance(t)?,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!(
            "no parallel utterances between {source} and {target}"
        )));
    }
    Ok(out)
}

/// Converted/target MCEP pairs, length-matched per utterance.
#[derive(Debug, Clone, Default)]
pub struct ErnTrainingSet {
    pub ids: Vec<String>,
    pub pairs: Vec<SeqPair>,
}

impl ErnTrainingSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Phase 3 data: align source MCEPs (reference axis) with target MCEPs,
/// warp the target labels and MCEPs onto the path, and run the adapted model
/// on the warped labels.
pub fn build_ern_dataset(
    adapted: &BlstmModel,
    parallel: &[ParallelUtterance],
) -> Result<ErnTrainingSet> {
    let mut ds = ErnTrainingSet::default();
    for p in parallel {
        let (src, tgt) = (&p.source, &p.target);
        ensure_dims("target label length", tgt.mcep.len(), tgt.labels.len())?;
        let path = dtw_align(&src.mcep, &tgt.mcep)?;
        path.validate(src.mcep.len(), tgt.mcep.len())?;
        let (_, warped_labels) = pair_frames(&path, &src.mcep, &tgt.labels)?;
        let (_, warped_target) = pair_frames(&path, &src.mcep, &tgt.mcep)?;
        let converted = adapted.forward(&warped_labels)?;
        debug_assert_eq!(converted.len(), warped_target.len());
        ds.ids.push(src.id.clone());
        ds.pairs.push((converted, warped_target));
    }
    Ok(ds)
}

/// Phase 3: the error reduction network maps context-stacked converted
/// MCEPs to target MCEPs.
pub fn train_ern(
    ds: &ErnTrainingSet,
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<(BlstmModel, TrainReport)> {
    if ds.is_empty() {
        return Err(Error::EmptyInput("error reduction dataset is empty".into()));
    }
    let pairs: Vec<SeqPair> = ds
        .pairs
        .iter()
        .map(|(x, y)| Ok((stack_context(x, ERN_CONTEXT, ERN_CONTEXT)?, y.clone())))
        .collect::<Result<_>>()?;
    train_mapping(&pairs, hidden, cfg)
}

/// Fresh MCEP→MCEP model with its own input and output statistics.
fn train_mapping(
    pairs: &[SeqPair],
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<(BlstmModel, TrainReport)> {
    let (train_set, valid_set) = split_validation(pairs);
    let arch = arch_for(pairs[0].0.dim(), hidden, pairs[0].1.dim());
    let mut model = init_params(&arch, cfg.seed)?;
    model.set_input_norm(input_stats(&train_set)?)?;
    model.set_output_norm(output_stats(&train_set)?)?;
    train(&model, &train_set, &valid_set, cfg)
}

/// Conventional parallel system: DTW-paired source MCEPs → target MCEPs.
pub fn train_parallel_baseline(
    parallel: &[ParallelUtterance],
    hidden: &[usize],
    cfg: &TrainConfig,
) -> Result<(BlstmModel, TrainReport)> {
    if parallel.is_empty() {
        return Err(Error::EmptyInput(
            "baseline needs parallel utterances".into(),
        ));
    }
    let pairs: Vec<SeqPair> = parallel
        .iter()
        .map(|p| {
            let path = dtw_align(&p.source.mcep, &p.target.mcep)?;
            pair_frames(&path, &p.source.mcep, &p.target.mcep)
        })
        .collect::<Result<_>>()?;
    train_mapping(&pairs, hidden, cfg)
}
