use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use storyloom_core::corpus::{
    corpus_stats, generate_synthetic_corpus, load_corpus, load_relation_descriptions, save_corpus,
    save_relation_descriptions, split_corpus, SplitRatios, SynthParams,
};
use storyloom_core::encoder::{build_vocab, EncoderConfig};
use storyloom_core::harness::{
    emit_report, multitask_pivot, run_history_ablation, run_multitask_ablation, AblationGrid, AblationOutcome,
    Experiment, InputVariant, ReportFormat, ResultTable, TrainingMode,
};
use storyloom_core::multitask::{
    grad_check, load_checkpoint, metrics_tsv, save_checkpoint, train_with_progress, LossKind, RunConfig, TrainData,
};
use storyloom_core::relations::{
    cluster_report, load_relation_table, mine_relations, SentimentLexicon, DEFAULT_ALPHA, DEFAULT_CLUSTERS,
};

#[derive(Parser)]
#[command(name = "storyloom", version, about = "Relation mining, bi-encoder training and ablations for story dialogue")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a JSONL corpus and write it back in canonical form.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print corpus statistics.
    Stats { corpus: PathBuf },
    /// Split a corpus by episode into train/valid/test files.
    Split {
        corpus: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        train: f64,
        #[arg(long, default_value_t = 0.1)]
        valid: f64,
        #[arg(long, default_value_t = 0.1)]
        test: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate a synthetic corpus and relation descriptions.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        chunks_per_episode: Option<usize>,
        #[arg(long)]
        characters: Option<usize>,
        #[arg(long)]
        vocab_size: Option<usize>,
    },
    /// Cluster relation descriptions and label the clusters.
    MineRelations {
        descriptions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CLUSTERS)]
        clusters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Tab-separated `token<TAB>valence` file replacing the bundled lexicon.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// Per-description cluster report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build a vocabulary from a corpus.
    BuildVocab {
        corpus: PathBuf,
        #[arg(long, default_value_t = 1)]
        min_freq: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write its checkpoint and metrics log.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate a checkpoint on a corpus.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        relations: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        num_candidates: Option<usize>,
        #[arg(long)]
        eval_seed: Option<u64>,
        #[arg(long)]
        hits_levels: Option<String>,
    },
    /// Retrain per history length and report F1 and Hits@1.
    AblateHistory {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value = "1,2,5,10")]
        lengths: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train every input variant × training mode cell.
    AblateMultitask {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value = "base,base+summary,base+relations,base+summary+relations")]
        variants: String,
        #[arg(long, default_value = "single,multi")]
        modes: String,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Finite-difference gradient check on a toy model.
    Gradcheck {
        #[arg(long, default_value = "all")]
        loss: String,
        #[arg(long, default_value_t = 1e-4)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Re-render a report from its raw TSV.
    Report {
        raw: PathBuf,
        /// Number of leading key columns.
        #[arg(long, default_value_t = 1)]
        keys: usize,
        #[arg(long, default_value = "markdown")]
        format: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    valid: PathBuf,
    /// Relation table from `mine-relations`; without it every pair is neutral.
    #[arg(long)]
    relations: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// Flat `key = value` file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    num_layers: Option<usize>,
    #[arg(long)]
    num_heads: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    ffn_dim: Option<usize>,
    #[arg(long)]
    max_seq_len: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    attention_dropout: Option<f64>,
    #[arg(long)]
    tie_towers: Option<bool>,
    #[arg(long)]
    right_align_positions: Option<bool>,
    #[arg(long)]
    n_last_turns: Option<usize>,
    #[arg(long)]
    n_history_chunks: Option<usize>,
    #[arg(long)]
    include_summary: Option<bool>,
    #[arg(long)]
    include_relations: Option<bool>,
    #[arg(long)]
    lambda_rank: Option<f64>,
    #[arg(long)]
    lambda_cls: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    warmup_steps: Option<usize>,
    #[arg(long)]
    lr_decay: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    num_candidates: Option<usize>,
    #[arg(long)]
    eval_seed: Option<u64>,
    #[arg(long)]
    min_freq: Option<usize>,
    #[arg(long)]
    hits_levels: Option<String>,
    /// Start from the published encoder and optimizer settings instead of
    /// the desk-scale defaults.
    #[arg(long)]
    published_preset: bool,
}

macro_rules! overrides {
    ($args:expr, $cfg:expr, $($field:ident),*) => {
        $( if let Some(v) = &$args.$field { $cfg.set(stringify!($field), &v.to_string())?; } )*
    };
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if self.published_preset {
            cfg.encoder = EncoderConfig::published();
            cfg.training = storyloom_core::multitask::TrainingConfig::published();
        }
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_text(&text)?;
        }
        overrides!(
            self, cfg, num_layers, num_heads, embed_dim, ffn_dim, max_seq_len, dropout, attention_dropout,
            tie_towers, right_align_positions, n_last_turns, n_history_chunks, include_summary, include_relations,
            lambda_rank, lambda_cls, learning_rate, warmup_steps, lr_decay, epochs, batch_size, seed,
            num_candidates, eval_seed, min_freq, hits_levels
        );
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> storyloom_core::Result<T>) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| f(p).map_err(Into::into))
        .collect()
}

fn relation_table(path: &Option<PathBuf>) -> Result<storyloom_core::relations::RelationTable> {
    Ok(match path {
        Some(p) => load_relation_table(p)?,
        None => Default::default(),
    })
}

fn write_ablation(out_dir: &Path, stem: &str, outcome: &AblationOutcome, cfg: &RunConfig) -> Result<()> {
    create_dir(out_dir)?;
    cfg.save(out_dir.join("config.txt"))?;
    emit_report(&outcome.table, out_dir.join(format!("{stem}.tsv")), ReportFormat::Tsv)?;
    emit_report(&outcome.table, out_dir.join(format!("{stem}.md")), ReportFormat::Markdown)?;
    let logs = out_dir.join("logs");
    create_dir(&logs)?;
    for run in &outcome.runs {
        write(&logs.join(format!("{}.metrics.tsv", run.name)), metrics_tsv(&run.log))?;
        run.config.save(logs.join(format!("{}.config.txt", run.name)))?;
    }
    print!("{}", outcome.table.to_markdown());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { input, out } => {
            let corpus = load_corpus(&input)?;
            println!(
                "{} chunks, {} turns, {} characters, {} episodes",
                corpus.len(),
                corpus.total_turns(),
                corpus.registry().len(),
                corpus.episodes().len()
            );
            if let Some(out) = out {
                save_corpus(&corpus, &out)?;
            }
        }
        Command::Stats { corpus } => {
            let corpus = load_corpus(&corpus)?;
            let s = corpus_stats(&corpus)?;
            println!("chunks\t{}", s.num_chunks);
            println!("turns\t{}", s.total_turns);
            println!("characters\t{}", corpus.registry().len());
            println!("avg_turns_per_chunk\t{}", s.avg_turns_per_chunk);
            println!("avg_characters_per_chunk\t{}", s.avg_characters_per_chunk);
        }
        Command::Split {
            corpus,
            out_dir,
            train,
            valid,
            test,
            seed,
        } => {
            let corpus = load_corpus(&corpus)?;
            let parts = split_corpus(&corpus, SplitRatios::new(train, valid, test), seed)?;
            create_dir(&out_dir)?;
            for (name, part) in ["train", "valid", "test"].iter().zip(&parts) {
                save_corpus(part, out_dir.join(format!("{name}.jsonl")))?;
                println!("{name}\t{} chunks", part.len());
            }
        }
        Command::Synth {
            out_dir,
            seed,
            episodes,
            chunks_per_episode,
            characters,
            vocab_size,
        } => {
            let d = SynthParams::default();
            let params = SynthParams {
                num_episodes: episodes.unwrap_or(d.num_episodes),
                chunks_per_episode: chunks_per_episode.unwrap_or(d.chunks_per_episode),
                characters: characters.unwrap_or(d.characters),
                vocab_size: vocab_size.unwrap_or(d.vocab_size),
            };
            let synth = generate_synthetic_corpus(seed, params)?;
            create_dir(&out_dir)?;
            save_corpus(&synth.corpus, out_dir.join("corpus.jsonl"))?;
            save_relation_descriptions(&synth.descriptions, out_dir.join("relations.jsonl"))?;
            println!("{} chunks, {} descriptions", synth.corpus.len(), synth.descriptions.len());
        }
        Command::MineRelations {
            descriptions,
            out,
            clusters,
            seed,
            lexicon,
            alpha,
            report,
        } => {
            let descs = load_relation_descriptions(&descriptions)?;
            let lex = match lexicon {
                Some(p) => SentimentLexicon::load(p, alpha)?,
                None if alpha == DEFAULT_ALPHA => SentimentLexicon::bundled(),
                None => bail!("--alpha needs --lexicon"),
            };
            let mined = mine_relations(&descs, &lex, clusters, seed)?;
            mined.table.save(&out)?;
            if let Some(r) = report {
                write(&r, cluster_report(&descs, &mined))?;
            }
            for triple in mined.table.iter() {
                println!("{triple}");
            }
        }
        Command::BuildVocab { corpus, min_freq, out } => {
            let vocab = build_vocab(&load_corpus(&corpus)?, min_freq)?;
            vocab.save(&out)?;
            println!("{} tokens", vocab.len());
        }
        Command::Train { data, out_dir, config } => {
            let cfg = config.resolve()?;
            let train = load_corpus(&data.train)?;
            let valid = load_corpus(&data.valid)?;
            let table = relation_table(&data.relations)?;
            let vocab = build_vocab(&train, cfg.min_freq)?;
            create_dir(&out_dir)?;
            cfg.save(out_dir.join("config.txt"))?;
            let td = TrainData {
                train: &train,
                valid: &valid,
                relations: &table,
                vocab: &vocab,
            };
            let out = train_with_progress(&td, &cfg.context, &cfg.encoder, &cfg.training, &cfg.eval, |m| {
                eprintln!(
                    "epoch {} l_total {:.4} val_hits1 {:.3} val_f1 {:.3} lr {:.2e}",
                    m.epoch, m.l_total, m.val_hits1, m.val_f1, m.lr
                )
            })?;
            write(&out_dir.join("metrics.tsv"), metrics_tsv(&out.log))?;
            vocab.save(out_dir.join("vocab.txt"))?;
            save_checkpoint(&out.model, out_dir.join("model.ckpt"))?;
        }
        Command::Evaluate {
            model,
            corpus,
            relations,
            out,
            num_candidates,
            eval_seed,
            hits_levels,
        } => {
            let model = load_checkpoint(&model)?;
            let corpus = load_corpus(&corpus)?;
            let table = relation_table(&relations)?;
            let mut cfg = RunConfig::default();
            if let Some(n) = num_candidates {
                cfg.set("num_candidates", &n.to_string())?;
            }
            if let Some(s) = eval_seed {
                cfg.set("eval_seed", &s.to_string())?;
            }
            if let Some(h) = hits_levels {
                cfg.set("hits_levels", &h)?;
            }
            cfg.eval.validate()?;
            let res = model.evaluate(&corpus, &table, &cfg.eval)?;
            let m = cfg.eval.num_candidates;
            let mut t = ResultTable::new(vec!["examples".into()], vec!["weighted_f1".into()]);
            let mut values = vec![res.weighted_f1];
            for &n in &cfg.eval.hits_levels {
                t.metric_columns.push(format!("hits@{n}/{m}"));
                values.push(res.hits(n));
            }
            t.push(vec![res.num_examples.to_string()], values);
            print!("{}", t.to_markdown());
            if let Some(out) = out {
                emit_report(&t, &out, ReportFormat::Tsv)?;
            }
        }
        Command::AblateHistory {
            data,
            test,
            lengths,
            out_dir,
            config,
        } => {
            let cfg = config.resolve()?;
            let lengths = parse_list(&lengths, |s| {
                s.parse::<usize>()
                    .map_err(|_| storyloom_core::Error::InvalidArgument(format!("bad length `{s}`")))
            })?;
            let (train, valid, test) = (load_corpus(&data.train)?, load_corpus(&data.valid)?, load_corpus(&test)?);
            let table = relation_table(&data.relations)?;
            let exp = Experiment {
                train: &train,
                valid: &valid,
                test: &test,
                relations: &table,
                config: cfg.clone(),
            };
            let outcome = run_history_ablation(&exp, &lengths)?;
            write_ablation(&out_dir, "history", &outcome, &cfg)?;
        }
        Command::AblateMultitask {
            data,
            test,
            variants,
            modes,
            out_dir,
            config,
        } => {
            let cfg = config.resolve()?;
            let grid = AblationGrid {
                input_variants: parse_list(&variants, InputVariant::parse)?,
                training_modes: parse_list(&modes, TrainingMode::parse)?,
                ..AblationGrid::default()
            };
            let (train, valid, test) = (load_corpus(&data.train)?, load_corpus(&data.valid)?, load_corpus(&test)?);
            let table = relation_table(&data.relations)?;
            let exp = Experiment {
                train: &train,
                valid: &valid,
                test: &test,
                relations: &table,
                config: cfg.clone(),
            };
            let outcome = run_multitask_ablation(&exp, &grid)?;
            write_ablation(&out_dir, "multitask", &outcome, &cfg)?;
            let pivot = multitask_pivot(&outcome.table)?;
            emit_report(&pivot, out_dir.join("multitask_pivot.md"), ReportFormat::Markdown)?;
        }
        Command::Gradcheck {
            loss,
            epsilon,
            seed,
            tolerance,
        } => {
            let kinds = if loss == "all" {
                LossKind::ALL.to_vec()
            } else {
                vec![LossKind::parse(&loss)?]
            };
            let mut failed = false;
            for kind in kinds {
                let r = grad_check(&EncoderConfig::toy(), kind, epsilon, seed)?;
                let ok = r.max_rel_error < tolerance;
                failed |= !ok;
                println!(
                    "{}\t{}\tmax_rel_error={:.3e}\tsamples={}",
                    if ok { "PASS" } else { "FAIL" },
                    kind.as_str(),
                    r.max_rel_error,
                    r.samples
                );
            }
            if failed {
                bail!("gradient check above tolerance {tolerance:e}");
            }
        }
        Command::Report { raw, keys, format, out } => {
            let text = fs::read_to_string(&raw).with_context(|| format!("reading {}", raw.display()))?;
            let table = ResultTable::parse_raw_tsv(&text, keys)?;
            emit_report(&table, &out, ReportFormat::parse(&format)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
