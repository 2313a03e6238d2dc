mod common;

use std::path::Path;

use dblstm_vc::alignment::dtw_align;
use dblstm_vc::blstm::{encode_model, init_params};
use dblstm_vc::features::synthetic::{speaker_id, utterance_id};
use dblstm_vc::features::{
    gen_synthetic_corpus, stack_context, write_feature_file, CorpusManifest, FeatureKind,
    FeatureSequence, SyntheticCorpusConfig,
};
use dblstm_vc::pipeline::{
    adapt_model, build_ern_dataset, convert, load_parallel, load_prosody, save_prosody,
    split_validation, train_average_model, train_ern, train_parallel_baseline, ErnTrainingSet,
    ParallelUtterance, VcSystem,
};
use dblstm_vc::prosody::{estimate_prosody, mcd, ProsodyStats};
use dblstm_vc::training::{mean_loss, TrainConfig};
use dblstm_vc::Error;

fn corpus(dir: &Path, speakers: usize, utts: usize, noise: f64) -> CorpusManifest {
    let cfg = SyntheticCorpusConfig {
        n_speakers: speakers,
        n_utterances_per_speaker: utts,
        frame_range: (12, 20),
        label_dim: 6,
        mcep_dim: 4,
        noise_std: noise,
        seed: 21,
        speaker_spread: 0.4,
        ..SyntheticCorpusConfig::default()
    };
    gen_synthetic_corpus(&cfg, dir).unwrap()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: 0.05,
        max_epochs: epochs,
        patience: 10,
        seed: 3,
        ..TrainConfig::default()
    }
}

fn speakers(m: &CorpusManifest, keep: &[usize]) -> CorpusManifest {
    let ids: Vec<String> = keep.iter().map(|&s| speaker_id(s)).collect();
    m.filter(|r| ids.contains(&r.speaker_id))
}

fn pairs_of(m: &CorpusManifest) -> Vec<(FeatureSequence, FeatureSequence)> {
    m.load_all()
        .unwrap()
        .into_iter()
        .map(|u| (u.labels, u.mcep))
        .collect()
}

#[test]
fn average_model_beats_mean_predictor() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 4, 10, 0.0);
    // labels cannot tell speakers apart, so part of the variance is irreducible
    let (model, report) = train_average_model(&m, &[], &[16], &quick(40)).unwrap();
    let (_, valid) = split_validation(&pairs_of(&m));
    let trained = mean_loss(&model, &valid).unwrap();
    let zero = mean_loss(&model.zero_weights(), &valid).unwrap();
    assert!(
        trained < 0.9 * zero,
        "valid loss {trained} vs zero-weight {zero}"
    );
    assert_eq!(report.best().unwrap().valid_loss, trained);

    let one = speakers(&m, &[0]);
    let (model, _) = train_average_model(&one, &[], &[16], &quick(40)).unwrap();
    let (_, valid) = split_validation(&pairs_of(&one));
    let trained = mean_loss(&model, &valid).unwrap();
    let zero = mean_loss(&model.zero_weights(), &valid).unwrap();
    assert!(trained < 0.25 * zero, "single speaker {trained} vs {zero}");
}

#[test]
fn average_model_is_deterministic_and_checks_exclusions() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 3, 4, 0.05);
    let a = train_average_model(&m, &[], &[4], &quick(2)).unwrap();
    let b = train_average_model(&m, &[], &[4], &quick(2)).unwrap();
    assert_eq!(encode_model(&a.0), encode_model(&b.0));
    assert_eq!(a.1, b.1);
    let err = train_average_model(&m, &[&speaker_id(1)], &[4], &quick(2)).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
    assert!(train_average_model(&m.filter(|_| false), &[], &[4], &quick(2)).is_err());
}

#[test]
fn mismatched_lengths_rejected_before_training() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 2, 2, 0.05);
    let r = &m.records()[1];
    let short = FeatureSequence::one_hot(&[0, 1, 2], 6).unwrap();
    write_feature_file(&short, m.resolve(&r.label_path)).unwrap();
    let err = train_average_model(&m, &[], &[4], &quick(1)).unwrap_err();
    assert!(matches!(err, Error::Validation(_)), "{err}");
}

#[test]
fn zero_epoch_adaptation_keeps_weights() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 3, 4, 0.05);
    let (avg, _) = train_average_model(&speakers(&m, &[0, 1]), &[], &[4], &quick(2)).unwrap();
    let target = speakers(&m, &[2]);
    let (adapted, report) = adapt_model(&avg, &target, &quick(0)).unwrap();
    assert_eq!(adapted.params().to_flat(), avg.params().to_flat());
    assert_eq!(adapted.arch(), avg.arch());
    assert_eq!(report.best_epoch, 0);
    // only the output statistics move to the target speaker
    assert_ne!(adapted.output_norm(), avg.output_norm());
    assert_eq!(adapted.input_norm(), avg.input_norm());
}

#[test]
fn adaptation_needs_exactly_one_speaker() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 3, 2, 0.05);
    let avg = init_params(&[6, 4, 4], 0).unwrap();
    let err = adapt_model(&avg, &speakers(&m, &[1, 2]), &quick(1)).unwrap_err();
    assert!(matches!(err, Error::Validation(_)));
    let wrong_arch = init_params(&[7, 4, 4], 0).unwrap();
    assert!(adapt_model(&wrong_arch, &speakers(&m, &[1]), &quick(1)).is_err());
}

#[test]
fn adaptation_helps_on_unseen_speaker() {
    let dir = tempfile::tempdir().unwrap();
    let m = corpus(dir.path(), 5, 12, 0.05);
    let (avg, _) =
        train_average_model(&speakers(&m, &[0, 1, 2, 3]), &[], &[16], &quick(30)).unwrap();
    let target = speakers(&m, &[4]);
    let adapt_ids: Vec<String> = (0..8).map(utterance_id).collect();
    let adapt_set = target.filter(|r| adapt_ids.contains(&r.utterance_id));
    let held_out = pairs_of(&target.filter(|r| !adapt_ids.contains(&r.utterance_id)));
    let (adapted, _) = adapt_model(&avg, &adapt_set, &quick(10)).unwrap();
    let before = mean_loss(&avg, &held_out).unwrap();
    let after = mean_loss(&adapted, &held_out).unwrap();
    assert!(after < before, "held-out loss {before} → {after}");
}

fn parallel(dir: &Path) -> (CorpusManifest, Vec<ParallelUtterance>) {
    let m = corpus(dir, 2, 4, 0.05);
    let p = load_parallel(&m, &speaker_id(0), &speaker_id(1)).unwrap();
    (m, p)
}

#[test]
fn parallel_loading_pairs_same_sentences() {
    let dir = tempfile::tempdir().unwrap();
    let (m, p) = parallel(dir.path());
    assert_eq!(p.len(), 4);
    for q in &p {
        assert_eq!(q.source.id, q.target.id);
        assert_eq!(
            (q.source.speaker.as_str(), q.target.speaker.as_str()),
            ("spk00", "spk01")
        );
    }
    assert!(load_parallel(&m, &speaker_id(0), "nobody").is_err());
}

#[test]
fn self_pairing_is_diagonal() {
    let dir = tempfile::tempdir().unwrap();
    let (_, p) = parallel(dir.path());
    let same: Vec<ParallelUtterance> = p
        .iter()
        .map(|q| ParallelUtterance {
            source: q.source.clone(),
            target: q.source.clone(),
        })
        .collect();
    let adapted = init_params(&[6, 3, 4], 1).unwrap();
    let ds = build_ern_dataset(&adapted, &same).unwrap();
    for (q, (conv, tgt)) in same.iter().zip(&ds.pairs) {
        assert_eq!(tgt, &q.source.mcep);
        assert_eq!(conv, &adapted.forward(&q.source.labels).unwrap());
    }
}

#[test]
fn ern_pairs_follow_dtw_path() {
    let dir = tempfile::tempdir().unwrap();
    let (_, p) = parallel(dir.path());
    let adapted = init_params(&[6, 3, 4], 1).unwrap();
    let ds = build_ern_dataset(&adapted, &p).unwrap();
    assert_eq!(ds.len(), p.len());
    for (q, (conv, tgt)) in p.iter().zip(&ds.pairs) {
        let path = dtw_align(&q.source.mcep, &q.target.mcep).unwrap();
        assert_eq!(conv.len(), path.len());
        assert_eq!(tgt.len(), path.len());
        assert_eq!(conv.dim(), tgt.dim());
        // converted MCEPs differ from the target before any error reduction
        assert!(mcd(tgt, conv, false).unwrap() > 0.0);
    }
}

#[test]
fn ern_learns_identity_on_degenerate_set() {
    let dir = tempfile::tempdir().unwrap();
    let (_, p) = parallel(dir.path());
    let ds = ErnTrainingSet {
        ids: p.iter().map(|q| q.source.id.clone()).collect(),
        pairs: p
            .iter()
            .map(|q| (q.target.mcep.clone(), q.target.mcep.clone()))
            .collect(),
    };
    let cfg = TrainConfig {
        learning_rate: 0.2,
        ..quick(40)
    };
    let (ern, report) = train_ern(&ds, &[16], &cfg).unwrap();
    assert_eq!(ern.input_dim(), 12);
    assert!(report.best_epoch > 0);
    let zero = ern.zero_weights();
    let (mut trained, mut baseline) = (0.0, 0.0);
    for (x, _) in &ds.pairs {
        let stacked = stack_context(x, 1, 1).unwrap();
        trained += mcd(x, &ern.forward(&stacked).unwrap(), false).unwrap();
        baseline += mcd(x, &zero.forward(&stacked).unwrap(), false).unwrap();
    }
    assert!(trained < baseline, "{trained} vs {baseline}");
    assert!(train_ern(&ErnTrainingSet::default(), &[4], &cfg).is_err());
}

#[test]
fn baseline_learns_identity_when_speakers_match() {
    let dir = tempfile::tempdir().unwrap();
    let (_, p) = parallel(dir.path());
    let same: Vec<ParallelUtterance> = p
        .iter()
        .map(|q| ParallelUtterance {
            source: q.target.clone(),
            target: q.target.clone(),
        })
        .collect();
    let cfg = TrainConfig {
        learning_rate: 0.2,
        ..quick(40)
    };
    let (model, _) = train_parallel_baseline(&same, &[16], &cfg).unwrap();
    let zero = model.zero_weights();
    let (mut trained, mut baseline) = (0.0, 0.0);
    for q in &same {
        let x = &q.source.mcep;
        trained += mcd(x, &model.forward(x).unwrap(), false).unwrap();
        baseline += mcd(x, &zero.forward(x).unwrap(), false).unwrap();
    }
    assert!(trained < baseline);
    let a = train_parallel_baseline(&same, &[4], &quick(2)).unwrap();
    let b = train_parallel_baseline(&same, &[4], &quick(2)).unwrap();
    assert_eq!(a, b);
    assert!(train_parallel_baseline(&[], &[4], &quick(2)).is_err());
}

fn system(dir: &Path) -> (VcSystem, Vec<ParallelUtterance>) {
    let (_, p) = parallel(dir);
    let adapted = init_params(&[6, 3, 4], 1).unwrap();
    let ern = init_params(&[12, 3, 4], 2).unwrap();
    let src: Vec<_> = p.iter().map(|q| &q.source.logf0).collect();
    let tgt: Vec<_> = p.iter().map(|q| &q.target.logf0).collect();
    let sys = VcSystem::new(
        adapted,
        ern,
        estimate_prosody(&src).unwrap(),
        estimate_prosody(&tgt).unwrap(),
    )
    .unwrap();
    (sys, p)
}

#[test]
fn convert_chains_the_three_stages() {
    let dir = tempfile::tempdir().unwrap();
    let (sys, p) = system(dir.path());
    let u = &p[0].source;
    let out = convert(&sys, &u.labels, &u.logf0, &u.ap).unwrap();
    let t = u.labels.len();
    assert_eq!(out.mcep.frames().dim(), (t, 4));
    assert_eq!(out.logf0.frames().dim(), (t, 1));
    assert_eq!(
        out.ap
            .frames()
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>(),
        u.ap.frames()
            .iter()
            .map(|v| v.to_bits())
            .collect::<Vec<_>>()
    );
    let manual = sys
        .ern
        .forward(&stack_context(&sys.adapted.forward(&u.labels).unwrap(), 1, 1).unwrap())
        .unwrap();
    assert_eq!(out.mcep, manual);
    assert_eq!(out, sys.convert(&u.labels, &u.logf0, &u.ap).unwrap());
    // the unvoiced mask survives
    for (a, b) in u.logf0.frames().iter().zip(out.logf0.frames()) {
        assert_eq!(*a == 0.0, *b == 0.0);
    }
}

#[test]
fn convert_rejects_mismatched_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let (sys, p) = system(dir.path());
    let (u, v) = (&p[0].source, &p[1].source);
    if u.labels.len() != v.labels.len() {
        assert!(convert(&sys, &u.labels, &v.logf0, &u.ap).is_err());
    }
    assert!(convert(
        &sys,
        &u.labels,
        &u.logf0,
        &u.mcep.clone().with_kind(FeatureKind::Mcep).unwrap()
    )
    .is_err());
    let wrong = init_params(&[11, 3, 4], 2).unwrap();
    assert!(VcSystem::new(
        sys.adapted.clone(),
        wrong,
        sys.source_prosody,
        sys.target_prosody
    )
    .is_err());
}

#[test]
fn prosody_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prosody.txt");
    let (a, b) = (
        ProsodyStats::new(4.9, 0.13).unwrap(),
        ProsodyStats::new(5.2, 0.21).unwrap(),
    );
    save_prosody(&path, &a, &b).unwrap();
    assert_eq!(load_prosody(&path).unwrap(), (a, b));
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 4);
}
