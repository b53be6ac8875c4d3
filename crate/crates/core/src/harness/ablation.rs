//! The history-length and multi-task ablation grids.

use serde::{Deserialize, Serialize};

use super::evaluate::EvalResult;
use super::report::ResultTable;
use crate::corpus::Corpus;
use crate::encoder::{build_vocab, Vocab};
use crate::error::{Error, Result};
use crate::multitask::{train, EpochMetrics, RunConfig, TrainData, TrainedModel};
use crate::relations::RelationTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InputVariant {
    Base,
    BaseSummary,
    BaseRelations,
    BaseSummaryRelations,
}

impl InputVariant {
    pub const ALL: [InputVariant; 4] = [
        InputVariant::Base,
        InputVariant::BaseSummary,
        InputVariant::BaseRelations,
        InputVariant::BaseSummaryRelations,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InputVariant::Base => "base",
            InputVariant::BaseSummary => "base+summary",
            InputVariant::BaseRelations => "base+relations",
            InputVariant::BaseSummaryRelations => "base+summary+relations",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown input variant `{s}`")))
    }

    pub fn summary(self) -> bool {
        matches!(self, InputVariant::BaseSummary | InputVariant::BaseSummaryRelations)
    }

    pub fn relations(self) -> bool {
        matches!(self, InputVariant::BaseRelations | InputVariant::BaseSummaryRelations)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrainingMode {
    Single,
    Multi,
}

impl TrainingMode {
    pub const ALL: [TrainingMode; 2] = [TrainingMode::Single, TrainingMode::Multi];

    pub fn as_str(self) -> &'static str {
        match self {
            TrainingMode::Single => "single",
            TrainingMode::Multi => "multi",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown training mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationGrid {
    pub input_variants: Vec<InputVariant>,
    pub training_modes: Vec<TrainingMode>,
    pub history_lengths: Vec<usize>,
}

impl Default for AblationGrid {
    fn default() -> Self {
        AblationGrid {
            input_variants: InputVariant::ALL.to_vec(),
            training_modes: TrainingMode::ALL.to_vec(),
            history_lengths: vec![1, 2, 5, 10],
        }
    }
}

impl AblationGrid {
    pub fn validate(&self) -> Result<()> {
        if self.input_variants.is_empty() || self.training_modes.is_empty() || self.history_lengths.is_empty() {
            return Err(Error::Config("ablation grid selections must be non-empty".into()));
        }
        Ok(())
    }
}

/// Corpora, relations and base configuration shared by every grid cell.
pub struct Experiment<'a> {
    pub train: &'a Corpus,
    pub valid: &'a Corpus,
    pub test: &'a Corpus,
    pub relations: &'a RelationTable,
    pub config: RunConfig,
}

/// One trained model inside an ablation, with its log and test result.
#[derive(Debug, Clone)]
pub struct AblationRun {
    pub name: String,
    pub config: RunConfig,
    pub log: Vec<EpochMetrics>,
    pub result: EvalResult,
    pub model: TrainedModel,
}

#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub table: ResultTable,
    pub runs: Vec<AblationRun>,
}

impl<'a> Experiment<'a> {
    pub fn vocab(&self) -> Result<Vocab> {
        build_vocab(self.train, self.config.min_freq)
    }

    /// Trains with `config` and evaluates on the test split.
    pub fn run(&self, name: String, config: RunConfig, vocab: &Vocab) -> Result<AblationRun> {
        config.validate()?;
        let data = TrainData {
            train: self.train,
            valid: self.valid,
            relations: self.relations,
            vocab,
        };
        let out = train(&data, &config.context, &config.encoder, &config.training, &config.eval)?;
        let result = out.model.evaluate(self.test, self.relations, &config.eval)?;
        Ok(AblationRun {
            name,
            config,
            log: out.log,
            result,
            model: out.model,
        })
    }
}

fn hits_column(n: usize, m: usize) -> String {
    format!("hits@{n}/{m}")
}

/// Retrains the jointly supervised model once per history length and
/// reports weighted F1 and Hits@1 on the test split.
pub fn run_history_ablation(exp: &Experiment, lengths: &[usize]) -> Result<AblationOutcome> {
    if lengths.is_empty() {
        return Err(Error::Config("no history lengths given".into()));
    }
    let t = &exp.config.training;
    if t.lambda_rank <= 0.0 || t.lambda_cls <= 0.0 {
        return Err(Error::Config(
            "the history ablation needs both loss weights positive".into(),
        ));
    }
    let vocab = exp.vocab()?;
    let m = exp.config.eval.num_candidates;
    let mut table = ResultTable::new(
        vec!["history".into()],
        vec!["weighted_f1".into(), hits_column(1, m)],
    );
    let mut runs = Vec::with_capacity(lengths.len());
    for &len in lengths {
        let mut cfg = exp.config.clone();
        cfg.context.n_history_chunks = len;
        cfg.context.include_summary = true;
        let run = exp.run(format!("history-{len}"), cfg, &vocab)?;
        table.push(
            vec![len.to_string()],
            vec![run.result.weighted_f1, run.result.hits(1)],
        );
        runs.push(run);
    }
    Ok(AblationOutcome { table, runs })
}

/// Trains every (input variant, training mode) cell. A single-task cell
/// trains two models: ranking only for the continuation metrics and
/// classification only for F1. Rows follow grid order.
pub fn run_multitask_ablation(exp: &Experiment, grid: &AblationGrid) -> Result<AblationOutcome> {
    grid.validate()?;
    let vocab = exp.vocab()?;
    let levels = &exp.config.eval.hits_levels;
    let m = exp.config.eval.num_candidates;
    let mut metrics = vec!["weighted_f1".to_string()];
    metrics.extend(levels.iter().map(|&n| hits_column(n, m)));
    let mut table = ResultTable::new(vec!["input".into(), "training".into()], metrics);
    let mut runs = Vec::new();

    for &variant in &grid.input_variants {
        let mut base = exp.config.clone();
        base.context.include_summary = variant.summary();
        base.context.include_relations = variant.relations();
        for &mode in &grid.training_modes {
            let name = format!("{}.{}", variant.as_str(), mode.as_str());
            let (f1, hits) = match mode {
                TrainingMode::Multi => {
                    let run = exp.run(name, base.clone(), &vocab)?;
                    let hits: Vec<f64> = levels.iter().map(|&n| run.result.hits(n)).collect();
                    let f1 = run.result.weighted_f1;
                    runs.push(run);
                    (f1, hits)
                }
                TrainingMode::Single => {
                    let mut rank = base.clone();
                    rank.training.lambda_rank = 1.0;
                    rank.training.lambda_cls = 0.0;
                    let mut cls = base.clone();
                    cls.training.lambda_rank = 0.0;
                    cls.training.lambda_cls = 1.0;
                    let rank_run = exp.run(format!("{name}.rank"), rank, &vocab)?;
                    let cls_run = exp.run(format!("{name}.cls"), cls, &vocab)?;
                    let hits: Vec<f64> = levels.iter().map(|&n| rank_run.result.hits(n)).collect();
                    let f1 = cls_run.result.weighted_f1;
                    runs.push(rank_run);
                    runs.push(cls_run);
                    (f1, hits)
                }
            };
            let mut values = vec![f1];
            values.extend(hits);
            table.push(vec![variant.as_str().into(), mode.as_str().into()], values);
        }
    }
    Ok(AblationOutcome { table, runs })
}

/// The long multi-task table regrouped as one row per input variant with
/// columns ordered eval task, metric, training mode.
pub fn multitask_pivot(table: &ResultTable) -> Result<ResultTable> {
    if table.key_columns != ["input", "training"] {
        return Err(Error::invalid("not a multi-task ablation table"));
    }
    let mut modes: Vec<&str> = Vec::new();
    let mut inputs: Vec<&str> = Vec::new();
    for r in &table.rows {
        if !inputs.contains(&r.keys[0].as_str()) {
            inputs.push(&r.keys[0]);
        }
        if !modes.contains(&r.keys[1].as_str()) {
            modes.push(&r.keys[1]);
        }
    }
    let mut columns = Vec::new();
    for metric in &table.metric_columns {
        let task = if metric == "weighted_f1" {
            "character_prediction"
        } else {
            "story_continuation"
        };
        for mode in &modes {
            columns.push((format!("{task}/{metric}/{mode}"), metric.as_str(), *mode));
        }
    }
    let mut out = ResultTable::new(
        vec!["input".into()],
        columns.iter().map(|(c, _, _)| c.clone()).collect(),
    );
    for input in inputs {
        let values = columns
            .iter()
            .map(|(_, metric, mode)| table.get(&[input, mode], metric).unwrap_or(f64::NAN))
            .collect();
        out.push(vec![input.to_string()], values);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names() {
        for v in InputVariant::ALL {
            assert_eq!(InputVariant::parse(v.as_str()).unwrap(), v);
        }
        assert!(InputVariant::BaseSummaryRelations.summary() && InputVariant::BaseSummaryRelations.relations());
        assert!(!InputVariant::Base.summary() && !InputVariant::Base.relations());
        assert!(TrainingMode::parse("multi").is_ok());
        assert!(TrainingMode::parse("both").is_err());
    }

    #[test]
    fn grid_validation() {
        assert!(AblationGrid::default().validate().is_ok());
        let g = AblationGrid {
            training_modes: vec![],
            ..AblationGrid::default()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn pivot_layout() {
        let mut t = ResultTable::new(
            vec!["input".into(), "training".into()],
            vec!["weighted_f1".into(), "hits@1/10".into(), "hits@5/10".into()],
        );
        for v in InputVariant::ALL {
            for (i, m) in TrainingMode::ALL.iter().enumerate() {
                t.push(vec![v.as_str().into(), m.as_str().into()], vec![0.1 * i as f64, 0.2, 0.3]);
            }
        }
        let p = multitask_pivot(&t).unwrap();
        assert_eq!(p.rows.len(), 4);
        assert_eq!(
            p.metric_columns,
            [
                "character_prediction/weighted_f1/single",
                "character_prediction/weighted_f1/multi",
                "story_continuation/hits@1/10/single",
                "story_continuation/hits@1/10/multi",
                "story_continuation/hits@5/10/single",
                "story_continuation/hits@5/10/multi",
            ]
        );
        assert_eq!(p.rows[0].values[1], 0.1);
    }
}
