//! One flat `key = value` file covering every encoder, context, training
//! and evaluation setting.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::context::ContextConfig;
use super::train::TrainingConfig;
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::harness::EvalConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub encoder: EncoderConfig,
    pub context: ContextConfig,
    pub training: TrainingConfig,
    pub eval: EvalConfig,
    pub min_freq: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            encoder: EncoderConfig::desk(),
            context: ContextConfig::default(),
            training: TrainingConfig::desk(),
            eval: EvalConfig::default(),
            min_freq: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for {key}")))
}

macro_rules! fields {
    ($mac:ident, $self:expr, $($arg:expr),*) => {
        $mac!($self, $($arg),*;
            encoder.num_layers => "num_layers",
            encoder.num_heads => "num_heads",
            encoder.embed_dim => "embed_dim",
            encoder.ffn_dim => "ffn_dim",
            encoder.max_seq_len => "max_seq_len",
            encoder.dropout => "dropout",
            encoder.attention_dropout => "attention_dropout",
            encoder.tie_towers => "tie_towers",
            encoder.right_align_positions => "right_align_positions",
            context.n_last_turns => "n_last_turns",
            context.n_history_chunks => "n_history_chunks",
            context.include_summary => "include_summary",
            context.include_relations => "include_relations",
            training.lambda_rank => "lambda_rank",
            training.lambda_cls => "lambda_cls",
            training.learning_rate => "learning_rate",
            training.warmup_steps => "warmup_steps",
            training.lr_decay => "lr_decay",
            training.epochs => "epochs",
            training.batch_size => "batch_size",
            training.seed => "seed",
            eval.num_candidates => "num_candidates",
            eval.seed => "eval_seed"
        )
    };
}

macro_rules! set_field {
    ($self:expr, $key:expr, $value:expr; $($group:ident . $field:ident => $name:expr),*) => {
        match $key {
            $( $name => { $self.$group.$field = parse($key, $value)?; } )*
            "min_freq" => $self.min_freq = parse($key, $value)?,
            "hits_levels" => {
                $self.eval.hits_levels = $value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse($key, s))
                    .collect::<Result<_>>()?;
            }
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
    };
}

macro_rules! write_fields {
    ($self:expr, $out:expr; $($group:ident . $field:ident => $name:expr),*) => {
        $( let _ = writeln!($out, "{} = {}", $name, $self.$group.$field); )*
    };
}

macro_rules! key_list {
    ($self:expr, $out:expr; $($group:ident . $field:ident => $name:expr),*) => {
        $out.extend([$($name),*]);
    };
}

impl RunConfig {
    /// Every recognised key, in file order.
    pub fn keys() -> Vec<&'static str> {
        let mut out = Vec::new();
        fields!(key_list, (), out);
        out.push("min_freq");
        out.push("hits_levels");
        out
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let key = key.as_str();
        fields!(set_field, self, key, value);
        Ok(())
    }

    /// Applies a `key = value` file on top of `self`. Blank lines and `#`
    /// comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        fields!(write_fields, self, out);
        let _ = writeln!(out, "min_freq = {}", self.min_freq);
        let levels: Vec<String> = self.eval.hits_levels.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(out, "hits_levels = {}", levels.join(","));
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.context.validate()?;
        self.training.validate()?;
        self.eval.validate()?;
        if self.min_freq == 0 {
            return Err(Error::Config("min_freq must be >= 1".into()));
        }
        Ok(())
    }
}
