//! Run configuration: one flat TOML table plus an optional `[synthetic]`
//! section, with `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::ControllerConfig;
use crate::error::{ErasError, Result};
use crate::evaluator::TieRule;
use crate::kg_store::{PatternThresholds, SyntheticSpec};
use crate::search_engine::{CandidateMode, SearchConfig};
use crate::search_space::ConstraintScope;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Directory with `train.txt`, `valid.txt` and `test.txt`.
    pub dataset: Option<PathBuf>,
    pub output: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,

    pub dim: usize,
    pub blocks: usize,

    pub batch_size: usize,
    pub samples: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub decay_rate: f64,
    pub epochs: usize,
    pub eval_every: usize,
    pub patience: usize,

    pub groups: usize,
    pub search_epochs: usize,
    pub derive_samples: usize,
    pub reward_batch: usize,
    pub reward_candidates: CandidateMode,
    pub single_level: bool,
    pub freeze_groups: bool,
    /// Relation embedding blob used to form frozen groups.
    pub group_embeddings: Option<PathBuf>,
    pub pretrain_epochs: usize,
    pub constraint: ConstraintScope,

    pub controller_hidden: usize,
    pub controller_embed: usize,
    pub controller_lr: f64,
    pub baseline_decay: f64,
    pub entropy_weight: f64,
    pub controller_init_scale: f64,

    pub tie: TieRule,
    pub classify: bool,
    /// `relation_id<TAB>group` file for multi-group `train --arch`.
    pub assignment: Option<PathBuf>,
    pub pattern_symmetric: f64,
    pub pattern_anti_symmetric: f64,
    pub pattern_inverse: f64,

    pub synthetic: Option<SyntheticSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let s = SearchConfig::default();
        let c = ControllerConfig::default();
        let p = PatternThresholds::default();
        RunConfig {
            dataset: None,
            output: PathBuf::from("eras-out"),
            seed: 0,
            workers: 0,
            dim: s.dim,
            blocks: s.blocks,
            batch_size: t.batch_size,
            samples: t.samples,
            learning_rate: t.learning_rate,
            l2: t.l2,
            decay_rate: t.decay_rate,
            epochs: t.epochs,
            eval_every: t.eval_every,
            patience: t.patience,
            groups: s.groups,
            search_epochs: s.epochs,
            derive_samples: s.derive_samples,
            reward_batch: s.reward_batch,
            reward_candidates: s.reward_candidates,
            single_level: s.single_level,
            freeze_groups: s.freeze_groups,
            group_embeddings: None,
            pretrain_epochs: s.pretrain_epochs,
            constraint: s.constraint,
            controller_hidden: c.hidden,
            controller_embed: c.embed,
            controller_lr: c.learning_rate,
            baseline_decay: c.baseline_decay,
            entropy_weight: c.entropy_weight,
            controller_init_scale: c.init_scale,
            tie: TieRule::Mean,
            classify: false,
            assignment: None,
            pattern_symmetric: p.symmetric,
            pattern_anti_symmetric: p.anti_symmetric,
            pattern_inverse: p.inverse,
            synthetic: None,
        }
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_owned())),
        Err(_) => toml::Value::String(raw.to_owned()),
    }
}

/// Applies `key=value` pairs; dotted keys address nested tables.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[(String, String)]) -> Result<()> {
    for (key, raw) in overrides {
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(ErasError::Config(format!("malformed override key `{key}`")));
        }
        let mut cur = &mut *table;
        for p in &parts[..parts.len() - 1] {
            let entry = cur
                .entry((*p).to_owned())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            cur = entry
                .as_table_mut()
                .ok_or_else(|| ErasError::Config(format!("`{p}` in `{key}` is not a table")))?;
        }
        cur.insert(parts[parts.len() - 1].to_owned(), parse_value(raw));
    }
    Ok(())
}

/// Splits `--key=value` or `key=value` into its parts.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    let arg = arg.strip_prefix("--").unwrap_or(arg);
    let (k, v) = arg
        .split_once('=')
        .ok_or_else(|| ErasError::Config(format!("override `{arg}` must look like key=value")))?;
    Ok((k.trim().replace('-', "_"), v.trim().to_owned()))
}

impl RunConfig {
    /// Reads `path` (if any), applies overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| ErasError::io(p, e))?;
                text.parse::<toml::Table>()
                    .map_err(|e| ErasError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        apply_overrides(&mut table, overrides)?;
        Self::from_table(table)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ErasError::Config(e.message().to_owned()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table = text
            .parse::<toml::Table>()
            .map_err(|e| ErasError::Config(e.to_string()))?;
        Self::from_table(table)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.search_config().validate()?;
        for (name, v) in [
            ("pattern_symmetric", self.pattern_symmetric),
            ("pattern_anti_symmetric", self.pattern_anti_symmetric),
            ("pattern_inverse", self.pattern_inverse),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ErasError::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.controller_hidden == 0 || self.controller_embed == 0 {
            return Err(ErasError::Config("controller sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.baseline_decay) {
            return Err(ErasError::Config("baseline_decay must lie in [0, 1)".into()));
        }
        if self.controller_lr < 0.0 || self.entropy_weight < 0.0 || self.controller_init_scale < 0.0 {
            return Err(ErasError::Config(
                "controller_lr, entropy_weight and controller_init_scale must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            samples: self.samples,
            learning_rate: self.learning_rate,
            l2: self.l2,
            decay_rate: self.decay_rate,
            epochs: self.epochs,
            eval_every: self.eval_every,
            patience: self.patience,
            seed: self.seed,
        }
    }

    pub fn controller_config(&self) -> ControllerConfig {
        ControllerConfig {
            hidden: self.controller_hidden,
            embed: self.controller_embed,
            learning_rate: self.controller_lr,
            baseline_decay: self.baseline_decay,
            entropy_weight: self.entropy_weight,
            init_scale: self.controller_init_scale,
        }
    }

    pub fn search_config(&self) -> SearchConfig {
        SearchConfig {
            groups: self.groups,
            blocks: self.blocks,
            dim: self.dim,
            derive_samples: self.derive_samples,
            epochs: self.search_epochs,
            reward_batch: self.reward_batch,
            reward_candidates: self.reward_candidates,
            single_level: self.single_level,
            freeze_groups: self.freeze_groups,
            pretrain_epochs: self.pretrain_epochs,
            constraint: self.constraint,
            seed: self.seed,
            train: self.train_config(),
            controller: self.controller_config(),
        }
    }

    pub fn pattern_thresholds(&self) -> PatternThresholds {
        PatternThresholds {
            symmetric: self.pattern_symmetric,
            anti_symmetric: self.pattern_anti_symmetric,
            inverse: self.pattern_inverse,
        }
    }
}
