mod common;

use common::{labels, random_seq, rng};
use dblstm_vc::blstm::{init_params, BlstmModel};
use dblstm_vc::features::{
    gen_synthetic_corpus, FeatureKind, FeatureSequence, SyntheticCorpusConfig,
};
use dblstm_vc::training::{
    clip_global_norm, l2_norm, mean_loss, sgd_momentum_step, train, MomentumSgd, SeqPair,
    StopReason, TrainConfig,
};
use dblstm_vc::Error;
use ndarray::Array2;
use proptest::prelude::*;

fn constant(t: usize, d: usize, v: f64) -> FeatureSequence {
    FeatureSequence::new(Array2::from_elem((t, d), v), FeatureKind::Mcep).unwrap()
}

fn cfg(lr: f64, epochs: usize) -> TrainConfig {
    TrainConfig {
        learning_rate: lr,
        max_epochs: epochs,
        ..TrainConfig::default()
    }
}

/// Two short (6–9 frame) synthetic utterances as (labels, mcep) pairs.
fn two_utterances() -> Vec<SeqPair> {
    let dir = tempfile::tempdir().unwrap();
    let corpus = SyntheticCorpusConfig {
        n_speakers: 1,
        n_utterances_per_speaker: 2,
        frame_range: (6, 9),
        label_dim: 5,
        mcep_dim: 3,
        seed: 4,
        ..SyntheticCorpusConfig::default()
    };
    let m = gen_synthetic_corpus(&corpus, dir.path()).unwrap();
    m.load_all()
        .unwrap()
        .into_iter()
        .map(|u| (u.labels, u.mcep))
        .collect()
}

#[test]
fn momentum_hand_examples() {
    let mut p = vec![1.0];
    let mut v = vec![0.0];
    sgd_momentum_step(&mut p, &[0.5], &mut v, 0.1, 0.9).unwrap();
    assert!((v[0] + 0.05).abs() < 1e-15 && (p[0] - 0.95).abs() < 1e-15);
    sgd_momentum_step(&mut p, &[0.5], &mut v, 0.1, 0.9).unwrap();
    assert!((v[0] + 0.095).abs() < 1e-15 && (p[0] - 0.855).abs() < 1e-15);
    assert!(sgd_momentum_step(&mut p, &[0.5, 1.0], &mut v, 0.1, 0.9).is_err());
}

#[test]
fn optimizer_clips_before_stepping() {
    let mut opt = MomentumSgd::new(2, 1.0, 0.0, 1.0);
    let mut p = vec![0.0, 0.0];
    let mut g = vec![30.0, 40.0];
    opt.step(&mut p, &mut g).unwrap();
    assert!(l2_norm(&p) <= 1.0);
    assert!((p[0] + 0.6).abs() < 1e-12 && (p[1] + 0.8).abs() < 1e-12);
}

proptest! {
    #[test]
    fn clipping_caps_norm_exactly(v in proptest::collection::vec(-1e3f64..1e3, 1..40), cap in 1e-3f64..50.0) {
        let mut g = v.clone();
        let before = clip_global_norm(&mut g, cap);
        prop_assert_eq!(before, l2_norm(&v));
        prop_assert!(l2_norm(&g) <= cap);
        if before <= cap {
            prop_assert_eq!(g, v);
        }
    }
}

#[test]
fn overfits_two_utterances() {
    let pairs = two_utterances();
    let arch = [pairs[0].0.dim(), 16, pairs[0].1.dim()];
    let model = init_params(&arch, 1).unwrap();
    let c = TrainConfig {
        patience: 500,
        ..cfg(1e-2, 500)
    };
    let (_, report) = train(&model, &pairs, &pairs, &c).unwrap();
    let first = report.epochs[0].train_loss;
    let last = report.epochs.last().unwrap().train_loss;
    assert!(last < 0.01 * first, "loss {first} → {last}");
}

#[test]
fn returns_epoch_one_snapshot_when_validation_only_worsens() {
    // training pulls the output towards 10 while validation wants 0
    let mut r = rng(3);
    let x = random_seq(&mut r, 4, 2);
    let model = BlstmModel::zeros(&[2, 3, 1]).unwrap();
    let train_set = vec![(x.clone(), constant(4, 1, 10.0))];
    let valid_set = vec![(x, constant(4, 1, 0.0))];
    let c = TrainConfig {
        momentum: 0.0,
        patience: 3,
        ..cfg(0.1, 50)
    };
    let (best, report) = train(&model, &train_set, &valid_set, &c).unwrap();
    assert_eq!(report.best_epoch, 1);
    assert_eq!(report.stopped, StopReason::Patience);
    assert_eq!(report.epochs.len(), 4);
    assert!(report
        .epochs
        .windows(2)
        .all(|w| w[1].valid_loss > w[0].valid_loss));
    let (one, _) = train(
        &model,
        &train_set,
        &valid_set,
        &TrainConfig { max_epochs: 1, ..c },
    )
    .unwrap();
    assert_eq!(best, one);
    assert!(report.to_text().ends_with("best_epoch=1\n"));
}

#[test]
fn zero_epochs_returns_input() {
    let pairs = two_utterances();
    let model = init_params(&[5, 4, 3], 2).unwrap();
    let (out, report) = train(&model, &pairs, &pairs, &cfg(0.1, 0)).unwrap();
    assert_eq!(out, model);
    assert_eq!(report.best_epoch, 0);
    assert!(report.epochs.is_empty());
    assert_eq!(report.to_text(), "best_epoch=0\n");
}

#[test]
fn deterministic_including_shuffle_and_batches() {
    let pairs = two_utterances();
    let model = init_params(&[5, 4, 3], 2).unwrap();
    let c = TrainConfig {
        shuffle: true,
        batch_size: 2,
        seed: 9,
        ..cfg(0.05, 5)
    };
    let a = train(&model, &pairs, &pairs, &c).unwrap();
    let b = train(&model, &pairs, &pairs, &c).unwrap();
    assert_eq!(a, b);
    let c2 = TrainConfig {
        seed: 10,
        batch_size: 1,
        ..c
    };
    assert_ne!(train(&model, &pairs, &pairs, &c2).unwrap().0, a.0);
}

#[test]
fn training_lowers_validation_loss() {
    let pairs = two_utterances();
    let model = init_params(&[5, 8, 3], 5).unwrap();
    let before = mean_loss(&model, &pairs).unwrap();
    let (trained, report) = train(&model, &pairs, &pairs, &cfg(0.05, 20)).unwrap();
    assert!(mean_loss(&trained, &pairs).unwrap() < before);
    assert_eq!(
        report.best().unwrap().valid_loss,
        mean_loss(&trained, &pairs).unwrap()
    );
}

#[test]
fn divergence_is_reported_as_numeric() {
    let mut r = rng(1);
    let x = random_seq(&mut r, 3, 2);
    let model = init_params(&[2, 3, 1], 0).unwrap();
    let set = vec![(x, constant(3, 1, 1e200))];
    let err = train(&model, &set, &set, &cfg(1.0, 3)).unwrap_err();
    assert!(matches!(err, Error::Numeric(_)), "{err}");
}

#[test]
fn bad_inputs_rejected() {
    let mut r = rng(2);
    let model = init_params(&[4, 3, 2], 0).unwrap();
    let pair = vec![(labels(&mut r, 5, 4), random_seq(&mut r, 5, 2))];
    assert!(train(&model, &[], &pair, &cfg(0.1, 1)).is_err());
    assert!(train(&model, &pair, &[], &cfg(0.1, 1)).is_err());
    assert!(train(&model, &pair, &pair, &cfg(-0.1, 1)).is_err());
    assert!(train(
        &model,
        &pair,
        &pair,
        &TrainConfig {
            momentum: 1.0,
            ..cfg(0.1, 1)
        }
    )
    .is_err());
    let short = (labels(&mut r, 4, 4), random_seq(&mut r, 5, 2));
    assert!(train(&model, &[short], &pair, &cfg(0.1, 1)).is_err());
}
