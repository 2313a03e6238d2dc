//! Run configuration: `key = value` text, `#` comments, unknown keys
//! rejected. Training keys are namespaced by phase, e.g.
//! `ern.learning_rate = 0.01` or `average.hidden = 32,64,32`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::training::TrainConfig;

/// Phases whose training settings the config carries, in file order.
pub const PHASES: [&str; 4] = ["average", "adapt", "ern", "baseline"];

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSettings {
    pub train: TrainConfig,
    /// Hidden layer sizes per direction. Unused for `adapt`, which inherits
    /// the average model's architecture.
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub average: PhaseSettings,
    pub adapt: PhaseSettings,
    pub ern: PhaseSettings,
    pub baseline: PhaseSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let phase = |hidden: &[usize], max_epochs| PhaseSettings {
            train: TrainConfig {
                max_epochs,
                ..TrainConfig::default()
            },
            hidden: hidden.to_vec(),
        };
        Self {
            seed: 0,
            manifest: None,
            out: None,
            average: phase(&[128, 256, 256, 128], 100),
            adapt: phase(&[], 20),
            ern: phase(&[128, 256, 128], 100),
            baseline: phase(&[128, 256, 256, 128], 100),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    let sizes = value
        .split(',')
        .map(|v| parse_value::<usize>(key, v.trim()))
        .collect::<Result<Vec<_>>>()?;
    if sizes.contains(&0) {
        return Err(Error::Config(format!(
            "{key}: layer sizes must be positive"
        )));
    }
    Ok(sizes)
}

fn join(sizes: &[usize]) -> String {
    sizes
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    pub fn phase(&self, name: &str) -> Option<&PhaseSettings> {
        match name {
            "average" => Some(&self.average),
            "adapt" => Some(&self.adapt),
            "ern" => Some(&self.ern),
            "baseline" => Some(&self.baseline),
            _ => None,
        }
    }

    fn phase_mut(&mut self, name: &str) -> Option<&mut PhaseSettings> {
        match name {
            "average" => Some(&mut self.average),
            "adapt" => Some(&mut self.adapt),
            "ern" => Some(&mut self.ern),
            "baseline" => Some(&mut self.baseline),
            _ => None,
        }
    }

    /// Training settings of `phase` with the run seed applied.
    pub fn train_config(&self, phase: &str) -> Result<TrainConfig> {
        let p = self
            .phase(phase)
            .ok_or_else(|| Error::Config(format!("unknown phase {phase:?}")))?;
        let cfg = TrainConfig {
            seed: self.seed,
            ..p.train.clone()
        };
        cfg.validate()
            .map_err(|e| Error::Config(format!("{phase}: {e}")))?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "manifest" => self.manifest = Some(value.into()),
            "out" => self.out = Some(value.into()),
            _ => {
                let unknown = || Error::Config(format!("unknown key {key:?}"));
                let (phase, field) = key.split_once('.').ok_or_else(unknown)?;
                let is_adapt = phase == "adapt";
                let p = self.phase_mut(phase).ok_or_else(unknown)?;
                let t = &mut p.train;
                match field {
                    "learning_rate" => t.learning_rate = parse_value(key, value)?,
                    "momentum" => t.momentum = parse_value(key, value)?,
                    "max_epochs" => t.max_epochs = parse_value(key, value)?,
                    "patience" => t.patience = parse_value(key, value)?,
                    "batch_size" => t.batch_size = parse_value(key, value)?,
                    "gradient_clip" => t.gradient_clip = parse_value(key, value)?,
                    "shuffle" => t.shuffle = parse_value(key, value)?,
                    "hidden" if !is_adapt => p.hidden = parse_list(key, value)?,
                    _ => return Err(unknown()),
                }
            }
        }
        Ok(())
    }

    /// Applies `text` on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected key = value, got {line:?}",
                    lineno + 1
                ))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Every setting, in a fixed order; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "seed = {}", self.seed).unwrap();
        if let Some(m) = &self.manifest {
            writeln!(out, "manifest = {}", m.display()).unwrap();
        }
        if let Some(o) = &self.out {
            writeln!(out, "out = {}", o.display()).unwrap();
        }
        for name in PHASES {
            let p = self.phase(name).expect("known phase");
            let t = &p.train;
            writeln!(out, "{name}.learning_rate = {:?}", t.learning_rate).unwrap();
            writeln!(out, "{name}.momentum = {:?}", t.momentum).unwrap();
            writeln!(out, "{name}.max_epochs = {}", t.max_epochs).unwrap();
            writeln!(out, "{name}.patience = {}", t.patience).unwrap();
            writeln!(out, "{name}.batch_size = {}", t.batch_size).unwrap();
            writeln!(out, "{name}.gradient_clip = {:?}", t.gradient_clip).unwrap();
            writeln!(out, "{name}.shuffle = {}", t.shuffle).unwrap();
            if name != "adapt" {
                writeln!(out, "{name}.hidden = {}", join(&p.hidden)).unwrap();
            }
        }
        out
    }
}
