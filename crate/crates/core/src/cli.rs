//! The `dblstm-vc` command line. Exit codes: 0 success, 2 invalid flags,
//! config or inputs, 3 I/O failure or refusal to overwrite, 4 training
//! divergence.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::blstm::{load_model, save_model, BlstmModel};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::{
    gen_synthetic_corpus, stack_context, write_feature_file, CorpusManifest, SyntheticCorpusConfig,
    UtteranceRecord,
};
use crate::pipeline::{
    adapt_model, build_ern_dataset, load_parallel, load_prosody, save_prosody, train_average_model,
    train_ern, train_parallel_baseline, ParallelUtterance, ERN_CONTEXT,
};
use crate::prosody::{estimate_prosody, logf0_convert, mcd_aligned, EvalReport, ProsodyStats};
use crate::training::TrainReport;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "dblstm-vc",
    version,
    about = "DBLSTM voice conversion with limited target data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// key = value settings file; flags take precedence.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output (run) directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct ManifestArg {
    #[arg(long, value_name = "PATH")]
    manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PairArgs {
    #[arg(long, value_name = "SPEAKER")]
    source: String,
    #[arg(long, value_name = "SPEAKER")]
    target: String,
    /// Use only the first N parallel utterances.
    #[arg(long, value_name = "N")]
    limit: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Full,
    AdaptedOnly,
    Baseline,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic multi-speaker corpus and its manifest.
    GenSynthetic {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u64).range(1..))]
        speakers: u64,
        #[arg(long, default_value_t = 30, value_parser = clap::value_parser!(u64).range(1..))]
        utts: u64,
        #[arg(long, default_value_t = 20)]
        min_frames: usize,
        #[arg(long, default_value_t = 40)]
        max_frames: usize,
        #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u64).range(1..))]
        label_dim: u64,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
        mcep_dim: u64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 0.3)]
        spread: f64,
    },
    /// Phase 1: labels→MCEP average model over all non-excluded speakers.
    TrainAverage {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        manifest: ManifestArg,
        /// Speakers left out (normally the source and target).
        #[arg(long, value_delimiter = ',', value_name = "SPEAKER,...")]
        exclude: Vec<String>,
    },
    /// Phase 2: fine-tune the average model on one target speaker.
    Adapt {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        manifest: ManifestArg,
        /// Restrict the manifest to this speaker.
        #[arg(long)]
        speaker: Option<String>,
        /// Use only the first N utterances.
        #[arg(long, value_name = "N")]
        limit: Option<usize>,
    },
    /// Phase 3: error reduction network on parallel source/target sentences.
    TrainErn {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        manifest: ManifestArg,
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Conventional parallel source→target MCEP mapping, for comparison.
    TrainBaseline {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        manifest: ManifestArg,
        #[command(flatten)]
        pair: PairArgs,
    },
    /// Convert source utterances with a trained run directory.
    Convert {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        manifest: ManifestArg,
        /// Run directory holding the trained models.
        #[arg(long, value_name = "DIR")]
        run: PathBuf,
        /// Source speaker whose utterances are converted.
        #[arg(long)]
        speaker: String,
        /// Convert only these utterance ids.
        #[arg(long, value_delimiter = ',', value_name = "ID,...")]
        utts: Vec<String>,
        #[arg(long, value_enum, default_value_t = Mode::Full)]
        mode: Mode,
    },
    /// DTW-aligned MCD of converted utterances against reference ones.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Reference corpus manifest.
        #[command(flatten)]
        manifest: ManifestArg,
        /// Reference speaker.
        #[arg(long)]
        speaker: String,
        /// Directory written by `convert`.
        #[arg(long, value_name = "DIR")]
        converted: PathBuf,
        /// Leave the energy coefficient out of the distance.
        #[arg(long)]
        exclude_c0: bool,
    },
}

/// Failure with its exit code; the message names the offending flag/path.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Format(_) | Error::Corrupt(_) => EXIT_IO,
            Error::Numeric(_) => EXIT_DIVERGED,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_INVALID,
        message: message.into(),
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// File config with flag overrides applied.
fn resolve_config(common: &Common, manifest: Option<&ManifestArg>) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => {
            if !p.is_file() {
                return Err(invalid(format!("--config: {} does not exist", p.display())));
            }
            RunConfig::load(p).map_err(|e| invalid(format!("--config {}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    if let Some(m) = manifest.and_then(|m| m.manifest.clone()) {
        cfg.manifest = Some(m);
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    cfg.out
        .clone()
        .ok_or_else(|| invalid("--out is required (or `out` in the config)"))
}

fn load_manifest(cfg: &RunConfig) -> CliResult<CorpusManifest> {
    let path = cfg
        .manifest
        .as_ref()
        .ok_or_else(|| invalid("--manifest is required (or `manifest` in the config)"))?;
    if !path.is_file() {
        return Err(invalid(format!(
            "--manifest: {} does not exist",
            path.display()
        )));
    }
    Ok(CorpusManifest::load(path)?)
}

fn require_artifact(dir: &Path, name: &str) -> CliResult<PathBuf> {
    let p = dir.join(name);
    if !p.is_file() {
        return Err(invalid(format!("missing artifact {}", p.display())));
    }
    Ok(p)
}

/// Refuses to touch existing outputs unless `force`; creates `dir`.
fn prepare_outputs(dir: &Path, names: &[&str], force: bool) -> CliResult<()> {
    if !force {
        if let Some(existing) = names.iter().map(|n| dir.join(n)).find(|p| p.exists()) {
            return Err(Failure {
                code: EXIT_IO,
                message: format!("{} exists; pass --force to overwrite", existing.display()),
            });
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

/// Model, report and echoed config of one training phase.
fn save_phase(
    dir: &Path,
    phase: &str,
    model_file: &str,
    model: &BlstmModel,
    report: &TrainReport,
    cfg: &RunConfig,
) -> CliResult<()> {
    save_model(model, dir.join(model_file))?;
    write_text(&dir.join(format!("{phase}_report.txt")), &report.to_text())?;
    write_text(&dir.join(format!("{phase}_config.txt")), &cfg.to_text())?;
    let best = report.best().map_or(f64::NAN, |r| r.valid_loss);
    println!(
        "{phase}: {} epochs, best epoch {} (validation loss {best:.6}), wrote {}",
        report.epochs.len(),
        report.best_epoch,
        dir.join(model_file).display()
    );
    Ok(())
}

fn phase_outputs(phase: &str, model_file: &'static str) -> [String; 3] {
    [
        model_file.to_string(),
        format!("{phase}_report.txt"),
        format!("{phase}_config.txt"),
    ]
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::GenSynthetic {
            common,
            speakers,
            utts,
            min_frames,
            max_frames,
            label_dim,
            mcep_dim,
            noise,
            spread,
        } => {
            let cfg = resolve_config(&common, None)?;
            let dir = out_dir(&cfg)?;
            let corpus = SyntheticCorpusConfig {
                n_speakers: speakers as usize,
                n_utterances_per_speaker: utts as usize,
                frame_range: (min_frames, max_frames),
                label_dim: label_dim as usize,
                mcep_dim: mcep_dim as usize,
                noise_std: noise,
                seed: cfg.seed,
                speaker_spread: spread,
                ..SyntheticCorpusConfig::default()
            };
            corpus.validate()?;
            prepare_outputs(&dir, &["manifest.tsv"], common.force)?;
            let m = gen_synthetic_corpus(&corpus, &dir)?;
            println!(
                "wrote {} utterances from {} speakers ({} label classes, {} MCEP dims) to {}",
                m.len(),
                m.speakers().len(),
                corpus.label_dim,
                corpus.mcep_dim,
                dir.join("manifest.tsv").display()
            );
            Ok(())
        }
        Command::TrainAverage {
            common,
            manifest,
            exclude,
        } => {
            let cfg = resolve_config(&common, Some(&manifest))?;
            let train_cfg = cfg.train_config("average")?;
            let dir = out_dir(&cfg)?;
            let m = load_manifest(&cfg)?;
            for s in &exclude {
                if !m.speakers().contains(&s.as_str()) {
                    return Err(invalid(format!(
                        "--exclude: speaker {s} is not in the manifest"
                    )));
                }
            }
            let outs = phase_outputs("average", "average.vcml");
            prepare_outputs(&dir, &outs.each_ref().map(String::as_str), common.force)?;
            let m = m.filter(|r| !exclude.contains(&r.speaker_id));
            let excluded: Vec<&str> = exclude.iter().map(String::as_str).collect();
            let (model, report) =
                train_average_model(&m, &excluded, &cfg.average.hidden, &train_cfg)?;
            save_phase(&dir, "average", "average.vcml", &model, &report, &cfg)
        }
        Command::Adapt {
            common,
            manifest,
            speaker,
            limit,
        } => {
            let cfg = resolve_config(&common, Some(&manifest))?;
            let train_cfg = cfg.train_config("adapt")?;
            let dir = out_dir(&cfg)?;
            let mut m = load_manifest(&cfg)?;
            if let Some(s) = &speaker {
                m = m.for_speaker(s);
                if m.is_empty() {
                    return Err(invalid(format!("--speaker: no utterances for {s}")));
                }
            }
            if let Some(n) = limit {
                let mut k = 0;
                m = m.filter(|_| {
                    k += 1;
                    k <= n
                });
            }
            let avg = load_model(require_artifact(&dir, "average.vcml")?)?;
            let outs = phase_outputs("adapt", "adapted.vcml");
            prepare_outputs(&dir, &outs.each_ref().map(String::as_str), common.force)?;
            let (model, report) = adapt_model(&avg, &m, &train_cfg)?;
            save_phase(&dir, "adapt", "adapted.vcml", &model, &report, &cfg)
        }
        Command::TrainErn {
            common,
            manifest,
            pair,
        } => {
            let cfg = resolve_config(&common, Some(&manifest))?;
            let train_cfg = cfg.train_config("ern")?;
            let dir = out_dir(&cfg)?;
            let parallel = parallel_set(&load_manifest(&cfg)?, &pair)?;
            let adapted = load_model(require_artifact(&dir, "adapted.vcml")?)?;
            let outs = phase_outputs("ern", "ern.vcml");
            let mut names: Vec<&str> = outs.iter().map(String::as_str).collect();
            names.push("prosody.txt");
            prepare_outputs(&dir, &names, common.force)?;
            let ds = build_ern_dataset(&adapted, &parallel)?;
            let (model, report) = train_ern(&ds, &cfg.ern.hidden, &train_cfg)?;
            save_phase(&dir, "ern", "ern.vcml", &model, &report, &cfg)?;
            let (src, tgt) = pair_prosody(&parallel)?;
            save_prosody(dir.join("prosody.txt"), &src, &tgt)?;
            Ok(())
        }
        Command::TrainBaseline {
            common,
            manifest,
            pair,
        } => {
            let cfg = resolve_config(&common, Some(&manifest))?;
            let train_cfg = cfg.train_config("baseline")?;
            let dir = out_dir(&cfg)?;
            let parallel = parallel_set(&load_manifest(&cfg)?, &pair)?;
            let outs = phase_outputs("baseline", "baseline.vcml");
            let mut names: Vec<&str> = outs.iter().map(String::as_str).collect();
            names.push("baseline_prosody.txt");
            prepare_outputs(&dir, &names, common.force)?;
            let (model, report) =
                train_parallel_baseline(&parallel, &cfg.baseline.hidden, &train_cfg)?;
            save_phase(&dir, "baseline", "baseline.vcml", &model, &report, &cfg)?;
            let (src, tgt) = pair_prosody(&parallel)?;
            save_prosody(dir.join("baseline_prosody.txt"), &src, &tgt)?;
            Ok(())
        }
        Command::Convert {
            common,
            manifest,
            run,
            speaker,
            utts,
            mode,
        } => {
            let cfg = resolve_config(&common, Some(&manifest))?;
            let dir = out_dir(&cfg)?;
            convert_cmd(&cfg, &dir, &run, &speaker, &utts, mode, common.force)
        }
        Command::Evaluate {
            common,
            manifest,
            speaker,
            converted,
            exclude_c0,
        } => {
            let cfg = resolve_config(&common, Some(&manifest))?;
            let dir = out_dir(&cfg)?;
            let reference = load_manifest(&cfg)?.for_speaker(&speaker);
            if reference.is_empty() {
                return Err(invalid(format!("--speaker: no utterances for {speaker}")));
            }
            let conv_path = converted.join("manifest.tsv");
            if !conv_path.is_file() {
                return Err(invalid(format!(
                    "--converted: {} does not exist",
                    conv_path.display()
                )));
            }
            let conv = CorpusManifest::load(&conv_path)?;
            prepare_outputs(&dir, &["evaluation.txt"], common.force)?;
            let mut report = EvalReport::default();
            for r in conv.records() {
                let refr = reference.find(&speaker, &r.utterance_id).ok_or_else(|| {
                    invalid(format!(
                        "no reference utterance {} for {speaker}",
                        r.utterance_id
                    ))
                })?;
                let a = reference.load_utterance(refr)?;
                let b = conv.load_utterance(r)?;
                report.utterances.push((
                    r.utterance_id.clone(),
                    mcd_aligned(&a.mcep, &b.mcep, exclude_c0)?,
                ));
            }
            if report.utterances.is_empty() {
                return Err(invalid("--converted: manifest lists no utterances"));
            }
            write_text(&dir.join("evaluation.txt"), &report.to_text())?;
            println!(
                "{} utterances, mean MCD {:.4} dB",
                report.utterances.len(),
                report.mean()
            );
            Ok(())
        }
    }
}

fn parallel_set(m: &CorpusManifest, pair: &PairArgs) -> CliResult<Vec<ParallelUtterance>> {
    for (flag, s) in [("--source", &pair.source), ("--target", &pair.target)] {
        if !m.speakers().contains(&s.as_str()) {
            return Err(invalid(format!(
                "{flag}: speaker {s} is not in the manifest"
            )));
        }
    }
    if pair.source == pair.target {
        return Err(invalid("--source and --target must differ"));
    }
    let mut parallel = load_parallel(m, &pair.source, &pair.target)?;
    if let Some(n) = pair.limit {
        if n == 0 {
            return Err(invalid("--limit must be at least 1"));
        }
        parallel.truncate(n);
    }
    Ok(parallel)
}

fn pair_prosody(parallel: &[ParallelUtterance]) -> Result<(ProsodyStats, ProsodyStats)> {
    let src: Vec<_> = parallel.iter().map(|p| &p.source.logf0).collect();
    let tgt: Vec<_> = parallel.iter().map(|p| &p.target.logf0).collect();
    Ok((estimate_prosody(&src)?, estimate_prosody(&tgt)?))
}

fn convert_cmd(
    cfg: &RunConfig,
    dir: &Path,
    run: &Path,
    speaker: &str,
    utts: &[String],
    mode: Mode,
    force: bool,
) -> CliResult<()> {
    let m = load_manifest(cfg)?.for_speaker(speaker);
    if m.is_empty() {
        return Err(invalid(format!("--speaker: no utterances for {speaker}")));
    }
    for u in utts {
        if m.find(speaker, u).is_none() {
            return Err(invalid(format!("--utts: no utterance {u} for {speaker}")));
        }
    }
    let m = if utts.is_empty() {
        m
    } else {
        m.filter(|r| utts.contains(&r.utterance_id))
    };

    let (models, prosody_file) = match mode {
        Mode::Full => (vec!["adapted.vcml", "ern.vcml"], "prosody.txt"),
        Mode::AdaptedOnly => (vec!["adapted.vcml"], "prosody.txt"),
        Mode::Baseline => (vec!["baseline.vcml"], "baseline_prosody.txt"),
    };
    let paths = models
        .iter()
        .map(|n| require_artifact(run, n))
        .collect::<CliResult<Vec<_>>>()?;
    let prosody_path = require_artifact(run, prosody_file)?;
    let models = paths.iter().map(load_model).collect::<Result<Vec<_>>>()?;
    let (src_f0, tgt_f0) = load_prosody(prosody_path)?;
    if mode == Mode::Full {
        let width = 2 * ERN_CONTEXT + 1;
        if models[1].input_dim() != width * models[0].output_dim() {
            return Err(invalid(
                "ern.vcml does not match adapted.vcml's output dimension",
            ));
        }
    }

    prepare_outputs(dir, &["manifest.tsv"], force)?;
    let mut records = Vec::new();
    for r in m.records() {
        let u = m.load_utterance(r)?;
        let mcep = match mode {
            Mode::Full => {
                let adapted = models[0].forward(&u.labels)?;
                models[1].forward(&stack_context(&adapted, ERN_CONTEXT, ERN_CONTEXT)?)?
            }
            Mode::AdaptedOnly => models[0].forward(&u.labels)?,
            Mode::Baseline => models[0].forward(&u.mcep)?,
        };
        let logf0 = logf0_convert(&u.logf0, &src_f0, &tgt_f0)?;
        let id = &r.utterance_id;
        let rec = UtteranceRecord {
            utterance_id: id.clone(),
            speaker_id: format!("{speaker}-converted"),
            label_path: format!("{id}.lab").into(),
            mcep_path: format!("{id}.mcep").into(),
            logf0_path: format!("{id}.lf0").into(),
            ap_path: format!("{id}.ap").into(),
        };
        write_feature_file(&u.labels, dir.join(&rec.label_path))?;
        write_feature_file(&mcep, dir.join(&rec.mcep_path))?;
        write_feature_file(&logf0, dir.join(&rec.logf0_path))?;
        write_feature_file(&u.ap, dir.join(&rec.ap_path))?;
        records.push(rec);
    }
    let out = CorpusManifest::new(dir, records)?;
    out.save(dir.join("manifest.tsv"))?;
    println!("converted {} utterances into {}", out.len(), dir.display());
    Ok(())
}
