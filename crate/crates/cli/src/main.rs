mod commands;
mod config;
mod error;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{load_config, parse_override};
use crate::error::CliError;

/// Behavior Alignment evaluation for conversational recommender systems.
///
/// Settings resolve as defaults, then --config, then --set, then flags.
#[derive(Parser, Debug)]
#[command(name = "behalign", version)]
struct Cli {
    /// Flat TOML file of settings.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one setting; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Print the resolved config as TOML and exit.
    #[arg(long, global = true)]
    show_config: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// json, csv or markdown.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Report path; standard output when absent.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Corpus {
    #[arg(long, value_name = "FILE")]
    dialogues: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    responses: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and cross-check input files.
    Validate {
        #[command(flatten)]
        corpus: Corpus,
        #[arg(long, value_name = "FILE")]
        preferences: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        pairs: Option<PathBuf>,
    },
    /// Behavior Alignment of one system.
    Ba {
        #[command(flatten)]
        corpus: Corpus,
        #[arg(long)]
        system: Option<String>,
        /// scored_turns or paper_literal.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Entropy-weighted Behavior Alignment.
    WeightedBa {
        #[command(flatten)]
        corpus: Corpus,
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        markov_t: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        h_min: Option<f64>,
    },
    /// BLEU@k and DIST@k of one system.
    Textmetrics {
        #[command(flatten)]
        corpus: Corpus,
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        bleu_k: Option<usize>,
        #[arg(long)]
        dist_k: Option<usize>,
        /// corpus or per_response.
        #[arg(long)]
        dist_scope: Option<String>,
    },
    /// Cohen's kappa between metric and human preferences.
    Agreement {
        #[command(flatten)]
        corpus: Corpus,
        #[arg(long, value_name = "FILE")]
        preferences: Option<PathBuf>,
        #[arg(long)]
        system_a: Option<String>,
        #[arg(long)]
        system_b: Option<String>,
        /// Comma-separated metric names.
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        /// Pair classifier for the implicit metric.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        #[arg(long)]
        tie_eps: Option<f64>,
        /// Bootstrap resamples.
        #[arg(long)]
        b: Option<usize>,
    },
    /// Build same/different-behavior sentence pairs.
    BuildPairs {
        #[arg(long, value_name = "FILE")]
        dialogues: Option<PathBuf>,
        /// Report of a previous mine-hard run; mined afresh when absent.
        #[arg(long, value_name = "FILE")]
        hard_pairs: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        n_pos: Option<usize>,
        #[arg(long)]
        n_neg: Option<usize>,
        #[arg(long)]
        n_hard: Option<usize>,
    },
    /// Find classes a behavior classifier confuses.
    MineHard {
        #[arg(long, value_name = "FILE")]
        dialogues: Option<PathBuf>,
        #[arg(long)]
        accuracy_threshold: Option<f64>,
        #[arg(long)]
        test_fraction: Option<f64>,
    },
    /// Train the pair classifier and save it.
    TrainPairs {
        #[arg(long, value_name = "FILE")]
        pairs: Option<PathBuf>,
        /// Where the model is written.
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        eval_pairs: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// K-fold accuracy of the pair classifier.
    CrossValidate {
        #[arg(long, value_name = "FILE")]
        pairs: Option<PathBuf>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Behavior Alignment judged by a pair classifier instead of labels.
    ImplicitBa {
        #[command(flatten)]
        corpus: Corpus,
        #[arg(long)]
        system: Option<String>,
        #[arg(long, value_name = "FILE")]
        model: Option<PathBuf>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Metric curves over synthetic systems blending preferred and rejected responses.
    Synth {
        #[command(flatten)]
        corpus: Corpus,
        #[arg(long, value_name = "FILE")]
        preferences: Option<PathBuf>,
        #[arg(long)]
        pool_size: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        metrics: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        ratios: Vec<f64>,
    },
    /// Dialogue and recommendation statistics.
    Stats {
        #[arg(long, value_name = "FILE")]
        dialogues: Option<PathBuf>,
        /// first or any.
        #[arg(long)]
        success_definition: Option<String>,
    },
}

type Overrides = Vec<(String, toml::Value)>;

fn push<T: Serialize>(out: &mut Overrides, key: &str, v: Option<&T>) {
    if let Some(v) = v {
        out.push((key.to_string(), toml::Value::try_from(v).expect("flag value serializes")));
    }
}

fn push_list<T: Serialize>(out: &mut Overrides, key: &str, v: &[T]) {
    if !v.is_empty() {
        push(out, key, Some(&v));
    }
}

impl Corpus {
    fn push(&self, out: &mut Overrides) {
        push(out, "dialogues", self.dialogues.as_ref());
        push(out, "responses", self.responses.as_ref());
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Ba { .. } => "ba",
            Command::WeightedBa { .. } => "weighted-ba",
            Command::Textmetrics { .. } => "textmetrics",
            Command::Agreement { .. } => "agreement",
            Command::BuildPairs { .. } => "build-pairs",
            Command::MineHard { .. } => "mine-hard",
            Command::TrainPairs { .. } => "train-pairs",
            Command::CrossValidate { .. } => "cross-validate",
            Command::ImplicitBa { .. } => "implicit-ba",
            Command::Synth { .. } => "synth",
            Command::Stats { .. } => "stats",
        }
    }

    fn overrides(&self) -> Overrides {
        let mut o = Vec::new();
        match self {
            Command::Validate { corpus, preferences, pairs } => {
                corpus.push(&mut o);
                push(&mut o, "preferences", preferences.as_ref());
                push(&mut o, "pairs", pairs.as_ref());
            }
            Command::Ba { corpus, system, mode } => {
                corpus.push(&mut o);
                push(&mut o, "system", system.as_ref());
                push(&mut o, "normalization_mode", mode.as_ref());
            }
            Command::WeightedBa { corpus, system, markov_t, alpha, h_min } => {
                corpus.push(&mut o);
                push(&mut o, "system", system.as_ref());
                push(&mut o, "markov_t", markov_t.as_ref());
                push(&mut o, "alpha", alpha.as_ref());
                push(&mut o, "h_min", h_min.as_ref());
            }
            Command::Textmetrics { corpus, system, bleu_k, dist_k, dist_scope } => {
                corpus.push(&mut o);
                push(&mut o, "system", system.as_ref());
                push(&mut o, "bleu_k", bleu_k.as_ref());
                push(&mut o, "dist_k", dist_k.as_ref());
                push(&mut o, "dist_scope", dist_scope.as_ref());
            }
            Command::Agreement { corpus, preferences, system_a, system_b, metrics, model, tie_eps, b } => {
                corpus.push(&mut o);
                push(&mut o, "preferences", preferences.as_ref());
                push(&mut o, "system_a", system_a.as_ref());
                push(&mut o, "system_b", system_b.as_ref());
                push_list(&mut o, "metrics", metrics);
                push(&mut o, "model", model.as_ref());
                push(&mut o, "tie_eps", tie_eps.as_ref());
                push(&mut o, "b", b.as_ref());
            }
            Command::BuildPairs { dialogues, hard_pairs, out_dir, n_pos, n_neg, n_hard } => {
                push(&mut o, "dialogues", dialogues.as_ref());
                push(&mut o, "hard_pairs", hard_pairs.as_ref());
                push(&mut o, "out_dir", out_dir.as_ref());
                push(&mut o, "n_pos", n_pos.as_ref());
                push(&mut o, "n_neg", n_neg.as_ref());
                push(&mut o, "n_hard", n_hard.as_ref());
            }
            Command::MineHard { dialogues, accuracy_threshold, test_fraction } => {
                push(&mut o, "dialogues", dialogues.as_ref());
                push(&mut o, "accuracy_threshold", accuracy_threshold.as_ref());
                push(&mut o, "test_fraction", test_fraction.as_ref());
            }
            Command::TrainPairs { pairs, model, eval_pairs, threshold } => {
                push(&mut o, "pairs", pairs.as_ref());
                push(&mut o, "model", model.as_ref());
                push(&mut o, "eval_pairs", eval_pairs.as_ref());
                push(&mut o, "threshold", threshold.as_ref());
            }
            Command::CrossValidate { pairs, folds, threshold } => {
                push(&mut o, "pairs", pairs.as_ref());
                push(&mut o, "folds", folds.as_ref());
                push(&mut o, "threshold", threshold.as_ref());
            }
            Command::ImplicitBa { corpus, system, model, mode, threshold } => {
                corpus.push(&mut o);
                push(&mut o, "system", system.as_ref());
                push(&mut o, "model", model.as_ref());
                push(&mut o, "normalization_mode", mode.as_ref());
                push(&mut o, "threshold", threshold.as_ref());
            }
            Command::Synth { corpus, preferences, pool_size, metrics, ratios } => {
                corpus.push(&mut o);
                push(&mut o, "preferences", preferences.as_ref());
                push(&mut o, "pool_size", pool_size.as_ref());
                push_list(&mut o, "metrics", metrics);
                push_list(&mut o, "ratios", ratios);
            }
            Command::Stats { dialogues, success_definition } => {
                push(&mut o, "dialogues", dialogues.as_ref());
                push(&mut o, "success_definition", success_definition.as_ref());
            }
        }
        o
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut overrides = cli.set.iter().map(|s| parse_override(s)).collect::<Result<Overrides, _>>()?;
    push(&mut overrides, "seed", cli.seed.as_ref());
    push(&mut overrides, "format", cli.format.as_ref());
    push(&mut overrides, "out", cli.out.as_ref());
    overrides.extend(cli.command.overrides());
    let config = load_config(cli.config.as_deref(), &overrides)?;

    if cli.show_config {
        print!("{}", config.to_toml());
        return Ok(());
    }

    let command = cli.command.name();
    let (inputs, outcome) = commands::dispatch(command, &config)?;
    let text = report::render(command, &config, &inputs, &outcome)?;
    match &config.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    return Err(CliError::Data(format!("stdout: {e}")));
                }
                _ => {}
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_become_overrides() {
        let cli = Cli::try_parse_from([
            "behalign", "synth", "--metrics", "ba,bleu@4", "--ratios", "0,0.5,1", "--pool-size", "10",
        ])
        .unwrap();
        let o = cli.command.overrides();
        let keys: Vec<&str> = o.iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, ["pool_size", "metrics", "ratios"]);
        assert_eq!(o[1].1.as_array().unwrap().len(), 2);
    }
}
