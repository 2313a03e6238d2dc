#![allow(dead_code)]

use dblstm_vc::blstm::{init_params, BlstmModel};
use dblstm_vc::features::{FeatureKind, FeatureSequence, NormStats};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_seq(rng: &mut ChaCha8Rng, t: usize, d: usize) -> FeatureSequence {
    let frames = Array2::from_shape_fn((t, d), |_| rng.random_range(-1.0..1.0));
    FeatureSequence::new(frames, FeatureKind::Mcep).unwrap()
}

/// Every parameter uniform in ±`scale`, with non-trivial normalization on
/// both ends.
pub fn random_model(rng: &mut ChaCha8Rng, arch: &[usize], scale: f64) -> BlstmModel {
    let mut m = init_params(arch, rng.random()).unwrap();
    let flat: Vec<f64> = (0..m.param_count())
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    m.params_mut().set_flat(&flat).unwrap();
    let mut stats = |d: usize| {
        NormStats::new(
            Array1::from_shape_fn(d, |_| rng.random_range(-0.5..0.5)),
            Array1::from_shape_fn(d, |_| rng.random_range(0.5..1.5)),
        )
        .unwrap()
    };
    let s_in = stats(arch[0]);
    let s_out = stats(*arch.last().unwrap());
    m.set_input_norm(s_in).unwrap();
    m.set_output_norm(s_out).unwrap();
    m
}

pub fn labels(rng: &mut ChaCha8Rng, t: usize, classes: usize) -> FeatureSequence {
    let idx: Vec<usize> = (0..t).map(|_| rng.random_range(0..classes)).collect();
    FeatureSequence::one_hot(&idx, classes).unwrap()
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn cli(args: &[&str]) -> Run {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_dblstm-vc"))
        .args(args)
        .output()
        .unwrap();
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn cli_ok(args: &[&str]) -> Run {
    let r = cli(args);
    assert_eq!(r.code, 0, "{args:?}\n{}", r.stderr);
    r
}

/// Tiny-network config so the whole pipeline runs in seconds.
pub const SMALL_CONFIG: &str = "\
seed = 5
average.learning_rate = 0.05
average.max_epochs = 3
average.hidden = 4,6
adapt.learning_rate = 0.05
adapt.max_epochs = 2
ern.learning_rate = 0.1
ern.max_epochs = 3
ern.hidden = 6
baseline.learning_rate = 0.1
baseline.max_epochs = 3
baseline.hidden = 6
";

/// Synthetic corpus of four speakers in `dir/corpus`; returns the manifest path.
pub fn small_corpus(dir: &std::path::Path) -> String {
    let corpus = dir.join("corpus");
    let c = corpus.to_str().unwrap();
    cli_ok(&[
        "gen-synthetic",
        "--out",
        c,
        "--speakers",
        "4",
        "--utts",
        "6",
        "--min-frames",
        "8",
        "--max-frames",
        "12",
        "--label-dim",
        "5",
        "--mcep-dim",
        "3",
        "--seed",
        "2",
    ]);
    corpus.join("manifest.tsv").to_str().unwrap().to_owned()
}

/// average → adapt → ern into `run`, with spk00 as source and spk01 as target.
pub fn three_phase(manifest: &str, config: &str, run: &str, extra: &[&str]) {
    let with = |args: &[&str]| {
        let mut v: Vec<&str> = args.to_vec();
        v.extend_from_slice(&["--manifest", manifest, "--config", config, "--out", run]);
        v.extend_from_slice(extra);
        cli_ok(&v);
    };
    with(&["train-average", "--exclude", "spk00,spk01"]);
    with(&["adapt", "--speaker", "spk01", "--limit", "4"]);
    with(&[
        "train-ern",
        "--source",
        "spk00",
        "--target",
        "spk01",
        "--limit",
        "4",
    ]);
}
