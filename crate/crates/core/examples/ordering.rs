//! Runs the synthetic three-system comparison for a few seeds.

use std::time::Instant;

use dblstm_vc::pipeline::experiment::{run_ordering_experiment, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: Vec<u64> = std::env::args()
        .skip(1)
        .map(|s| s.parse())
        .collect::<Result<_, _>>()?;
    let seeds = if seeds.is_empty() {
        vec![1, 2, 3, 4, 5]
    } else {
        seeds
    };
    for seed in seeds {
        let dir = tempfile::tempdir()?;
        let mut cfg = ExperimentConfig::desk_scale(seed);
        cfg.run_baseline = true;
        let env = |k: &str| std::env::var(k).ok();
        let hidden = |v: String| {
            v.split(',')
                .map(|x| x.parse().unwrap())
                .collect::<Vec<usize>>()
        };
        if let Some(v) = env("ADAPT_EPOCHS") {
            cfg.adapt_cfg.max_epochs = v.parse()?;
        }
        if let Some(v) = env("ERN_EPOCHS") {
            cfg.ern_cfg.max_epochs = v.parse()?;
        }
        if let Some(v) = env("AVG_EPOCHS") {
            cfg.average_cfg.max_epochs = v.parse()?;
        }
        if let Some(v) = env("LR") {
            let lr: f64 = v.parse()?;
            cfg.average_cfg.learning_rate = lr;
            cfg.adapt_cfg.learning_rate = lr;
            cfg.ern_cfg.learning_rate = lr;
            cfg.baseline_cfg.learning_rate = lr;
        }
        if let Some(v) = env("ERN_LR") {
            cfg.ern_cfg.learning_rate = v.parse()?;
            cfg.baseline_cfg.learning_rate = v.parse()?;
        }
        if let Some(v) = env("MOM") {
            let m: f64 = v.parse()?;
            cfg.average_cfg.momentum = m;
            cfg.adapt_cfg.momentum = m;
            cfg.ern_cfg.momentum = m;
            cfg.baseline_cfg.momentum = m;
        }
        if let Some(v) = env("PATIENCE") {
            let p: usize = v.parse()?;
            cfg.average_cfg.patience = p;
            cfg.ern_cfg.patience = p;
            cfg.baseline_cfg.patience = p;
            cfg.adapt_cfg.patience = p;
        }
        if let Some(v) = env("ERN_HIDDEN") {
            cfg.ern_hidden = hidden(v.clone());
            cfg.baseline_hidden = hidden(v);
        }
        if let Some(v) = env("AVG_HIDDEN") {
            cfg.average_hidden = hidden(v);
        }
        if let Some(v) = env("NOISE") {
            cfg.corpus.noise_std = v.parse()?;
        }
        if let Some(v) = env("SPREAD") {
            cfg.corpus.speaker_spread = v.parse()?;
        }
        if let Some(v) = env("BATCH") {
            let b: usize = v.parse()?;
            cfg.average_cfg.batch_size = b;
            cfg.ern_cfg.batch_size = b;
            cfg.baseline_cfg.batch_size = b;
            cfg.adapt_cfg.batch_size = b;
        }
        let start = Instant::now();
        let r = run_ordering_experiment(&cfg, dir.path())?;
        println!(
            "seed {seed}: src-tgt {:.3} zero {:.3} adapted {:.3} full {:.3} baseline {:.3} ({:.1}s)",
            r.mcd_source_target,
            r.mcd_zero,
            r.mcd_adapted,
            r.mcd_full,
            r.mcd_baseline.unwrap_or(f64::NAN),
            start.elapsed().as_secs_f64()
        );
        if std::env::var_os("VERBOSE").is_some() {
            for (name, rep) in &r.reports {
                let first = rep.epochs.first().map(|e| (e.train_loss, e.valid_loss));
                let best = rep.best().map(|e| (e.train_loss, e.valid_loss));
                println!(
                    "  {name}: {} epochs, best {} {:?}, first {:?}",
                    rep.epochs.len(),
                    rep.best_epoch,
                    best,
                    first
                );
            }
        }
    }
    Ok(())
}
