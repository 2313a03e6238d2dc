//! Deterministic multi-speaker corpus for desk-scale experiments.
//!
//! Generation model: one embedding matrix `E` (label_dim × mcep_dim) shared by
//! every speaker; speaker `s` applies an affine distortion `A_s x + b_s` close
//! to the identity. Utterance `k` has the same phoneme string for every
//! speaker, but each speaker draws its own run lengths (≥ 3 frames per
//! phoneme), so parallel utterances differ in timing. MCEP frames are the
//! speaker-distorted embeddings, smoothed by a 3-frame moving average, plus
//! Gaussian noise. Log-F0 is per-speaker Gaussian with about 20% unvoiced
//! (zero) frames; aperiodicity is a per-speaker constant.
//!
//! All randomness comes from one `ChaCha8Rng` seeded with `seed`, consumed in
//! a fixed order, so output files are byte-identical for a given config.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::io::write_feature_file;
use super::manifest::{CorpusManifest, UtteranceRecord};
use super::sequence::{FeatureKind, FeatureSequence};
use crate::error::{Error, Result};

pub const MIN_RUN: usize = 3;
const UNVOICED_RATE: f64 = 0.2;
const MEAN_RUN: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpusConfig {
    pub n_speakers: usize,
    pub n_utterances_per_speaker: usize,
    /// Inclusive (min, max) frame count per utterance.
    pub frame_range: (usize, usize),
    pub label_dim: usize,
    pub mcep_dim: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// Scale of the per-speaker affine distortion; 0 gives identical speakers.
    pub speaker_spread: f64,
    pub ap_dim: usize,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        Self {
            n_speakers: 7,
            n_utterances_per_speaker: 30,
            frame_range: (20, 40),
            label_dim: 12,
            mcep_dim: 8,
            noise_std: 0.05,
            seed: 0,
            speaker_spread: 0.3,
            ap_dim: 1,
        }
    }
}

impl SyntheticCorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_speakers", self.n_speakers),
            ("n_utterances_per_speaker", self.n_utterances_per_speaker),
            ("label_dim", self.label_dim),
            ("mcep_dim", self.mcep_dim),
            ("ap_dim", self.ap_dim),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Validation(format!("{name} must be at least 1")));
        }
        let (lo, hi) = self.frame_range;
        if lo < 1 || lo > hi {
            return Err(Error::Validation(format!(
                "invalid frame range ({lo}, {hi})"
            )));
        }
        if hi < MIN_RUN {
            return Err(Error::Validation(format!(
                "frame range max {hi} is below the minimum run length {MIN_RUN}"
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Validation(
                "noise_std must be finite and >= 0".into(),
            ));
        }
        if !(self.speaker_spread >= 0.0 && self.speaker_spread.is_finite()) {
            return Err(Error::Validation(
                "speaker_spread must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

pub fn speaker_id(s: usize) -> String {
    format!("spk{s:02}")
}

pub fn utterance_id(k: usize) -> String {
    format!("utt{k:04}")
}

struct Speaker {
    transform: Array2<f64>,
    offset: Array1<f64>,
    f0_mean: f64,
    f0_std: f64,
    ap: Array1<f64>,
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

fn phoneme_string(rng: &mut ChaCha8Rng, cfg: &SyntheticCorpusConfig) -> Vec<usize> {
    let (lo, hi) = cfg.frame_range;
    let nominal = rng.random_range(lo..=hi);
    let n_runs = (nominal / MEAN_RUN).clamp(1, hi / MIN_RUN);
    let mut out: Vec<usize> = Vec::with_capacity(n_runs);
    for _ in 0..n_runs {
        let mut p = rng.random_range(0..cfg.label_dim);
        if cfg.label_dim > 1 {
            while out.last() == Some(&p) {
                p = rng.random_range(0..cfg.label_dim);
            }
        }
        out.push(p);
    }
    out
}

/// Spread `total` frames over `n` runs, each getting at least `MIN_RUN`.
fn run_lengths(rng: &mut ChaCha8Rng, n: usize, total: usize) -> Vec<usize> {
    let mut lens = vec![MIN_RUN; n];
    for _ in 0..total - MIN_RUN * n {
        let k = rng.random_range(0..n);
        lens[k] += 1;
    }
    lens
}

fn smooth3(x: &Array2<f64>) -> Array2<f64> {
    let t = x.nrows();
    let mut out = x.clone();
    for i in 0..t {
        let prev = x.row(i.saturating_sub(1));
        let next = x.row((i + 1).min(t - 1));
        let cur = x.row(i);
        #[allow(clippy::op_ref)] // no owned + view impl; the order fixes the rounding
        out.row_mut(i).assign(&((&prev + &cur + &next) / 3.0));
    }
    out
}

/// Writes the corpus under `out_dir` (`<speaker>/<utt>.{lab,mcep,lf0,ap}` plus
/// `manifest.tsv`) and returns the manifest.
pub fn gen_synthetic_corpus(cfg: &SyntheticCorpusConfig, out_dir: &Path) -> Result<CorpusManifest> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let dim = cfg.mcep_dim;
    let embedding = normal_matrix(&mut rng, cfg.label_dim, dim, 1.0);

    let scripts: Vec<Vec<usize>> = (0..cfg.n_utterances_per_speaker)
        .map(|_| phoneme_string(&mut rng, cfg))
        .collect();

    let speakers: Vec<Speaker> = (0..cfg.n_speakers)
        .map(|_| {
            let transform = Array2::eye(dim)
                + normal_matrix(&mut rng, dim, dim, cfg.speaker_spread / (dim as f64).sqrt());
            let offset = normal_matrix(&mut rng, 1, dim, cfg.speaker_spread)
                .row(0)
                .to_owned();
            let f0_mean = rng.random_range(4.6..5.4);
            let f0_std = rng.random_range(0.1..0.25);
            let ap = Array1::from_shape_fn(cfg.ap_dim, |_| rng.random_range(0.1..0.9));
            Speaker {
                transform,
                offset,
                f0_mean,
                f0_std,
                ap,
            }
        })
        .collect();

    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::Validation(e.to_string()))?;
    let mut records = Vec::new();
    for (s, spk) in speakers.iter().enumerate() {
        let sid = speaker_id(s);
        let spk_dir = out_dir.join(&sid);
        fs::create_dir_all(&spk_dir).map_err(|e| Error::io(&spk_dir, e))?;
        let f0 =
            Normal::new(spk.f0_mean, spk.f0_std).map_err(|e| Error::Validation(e.to_string()))?;
        for (k, script) in scripts.iter().enumerate() {
            let (lo, hi) = cfg.frame_range;
            let t_len = rng.random_range(lo.max(MIN_RUN * script.len())..=hi);
            let lens = run_lengths(&mut rng, script.len(), t_len);
            let classes: Vec<usize> = script
                .iter()
                .zip(&lens)
                .flat_map(|(&p, &n)| std::iter::repeat_n(p, n))
                .collect();

            let mut clean = Array2::zeros((t_len, dim));
            for (t, &c) in classes.iter().enumerate() {
                let v = spk.transform.dot(&embedding.row(c)) + &spk.offset;
                clean.row_mut(t).assign(&v);
            }
            let mut mcep = smooth3(&clean);
            if cfg.noise_std > 0.0 {
                mcep.mapv_inplace(|v| v + noise.sample(&mut rng));
            }
            let logf0 = Array2::from_shape_fn((t_len, 1), |_| {
                if rng.random::<f64>() < UNVOICED_RATE {
                    0.0
                } else {
                    f0.sample(&mut rng)
                }
            });
            let ap = Array2::from_shape_fn((t_len, cfg.ap_dim), |(_, d)| spk.ap[d]);

            let uid = utterance_id(k);
            let rel = |ext: &str| PathBuf::from(&sid).join(format!("{uid}.{ext}"));
            let streams = [
                (
                    rel("lab"),
                    FeatureSequence::one_hot(&classes, cfg.label_dim)?,
                ),
                (rel("mcep"), FeatureSequence::new(mcep, FeatureKind::Mcep)?),
                (rel("lf0"), FeatureSequence::new(logf0, FeatureKind::LogF0)?),
                (
                    rel("ap"),
                    FeatureSequence::new(ap, FeatureKind::Aperiodicity)?,
                ),
            ];
            for (path, seq) in &streams {
                write_feature_file(seq, out_dir.join(path))?;
            }
            let [lab, mc, lf, ap] = streams.map(|(p, _)| p);
            records.push(UtteranceRecord {
                utterance_id: uid,
                speaker_id: sid.clone(),
                label_path: lab,
                mcep_path: mc,
                logf0_path: lf,
                ap_path: ap,
            });
        }
    }
    let manifest = CorpusManifest::new(out_dir, records)?;
    manifest.save(out_dir.join("manifest.tsv"))?;
    Ok(manifest)
}
