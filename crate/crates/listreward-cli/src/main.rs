use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use listreward_cli::convert::{cmd_convert, ConvertOptions};
use listreward_cli::eval::{cmd_eval, EvalOptions, EvalReport};
use listreward_cli::report::render_table;
use listreward_cli::reval::{cmd_reval_multi, RevalOptions};
use listreward_cli::score::{cmd_score, CommandError, ScoreOptions};
use listreward_cli::service::{serve, ServiceState};
use listreward_core::data::load_records;
use listreward_core::judge::{JudgeClient, JudgeClientConfig, OpenAiBackend, RankJudge};
use listreward_core::reward::{RewardConfig, RewardKind};

#[derive(Parser)]
#[command(name = "listreward", version, about = "Verifiable rewards and evaluation for ranked-list answers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct JudgeArgs {
    /// OpenAI-compatible chat-completions endpoint for the judge.
    #[arg(long)]
    judge_endpoint: Option<String>,
    /// Judge model name.
    #[arg(long)]
    judge_model: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    judge_temperature: f64,
    #[arg(long, default_value_t = 3)]
    judge_max_retries: u32,
    #[arg(long, default_value_t = 8)]
    judge_max_in_flight: usize,
}

impl JudgeArgs {
    fn build(&self) -> Result<Option<Arc<dyn RankJudge>>, CommandError> {
        let Some(endpoint) = &self.judge_endpoint else {
            return Ok(None);
        };
        let config = JudgeClientConfig {
            endpoint: endpoint.clone(),
            model_name: self.judge_model.clone().unwrap_or_default(),
            temperature: self.judge_temperature,
            max_retries: self.judge_max_retries,
            max_in_flight: self.judge_max_in_flight,
            timeout: Duration::from_secs(60),
            memoize: false,
        };
        let backend = OpenAiBackend::from_config(&config)
            .map_err(|e| CommandError::JudgeUnavailable(e.to_string()))?;
        Ok(Some(Arc::new(JudgeClient::new(backend, config))))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Score a responses file against a dataset with a reward function.
    Score {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long, value_enum)]
        reward: RewardArg,
        #[arg(long)]
        lambda: Option<f64>,
        /// Include the think-tag format reward component.
        #[arg(long)]
        format_reward: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Compute per-benchmark and aggregate metric reports.
    Eval {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        /// Also compute the judge-based metric columns.
        #[arg(long)]
        judge: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        judge_args: JudgeArgs,
    },
    /// Convert an MCQ dataset to open-ended QA.
    Convert {
        #[arg(long)]
        dataset: PathBuf,
        /// Minimum conversion confidence to keep a record.
        #[arg(long, default_value_t = 0.7)]
        threshold: f64,
        /// Continue from an interrupted run without re-calling finished ids.
        #[arg(long)]
        resume: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Re-evaluate list responses against multi-valid-answer metadata.
    RevalMulti {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the batch-scoring HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8780")]
        bind: String,
        /// Optional dataset for record_id resolution.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        judge: JudgeArgs,
    },
    /// Re-render a report.json as an aligned text table.
    Report {
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum RewardArg {
    Mcq,
    Qa,
    ListAcc,
    ListMrr,
    ListJudgeMrr,
}

impl From<RewardArg> for RewardKind {
    fn from(arg: RewardArg) -> Self {
        match arg {
            RewardArg::Mcq => RewardKind::Mcq,
            RewardArg::Qa => RewardKind::Qa,
            RewardArg::ListAcc => RewardKind::ListAcc,
            RewardArg::ListMrr => RewardKind::ListMrr,
            RewardArg::ListJudgeMrr => RewardKind::ListJudgeMrr,
        }
    }
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Score {
            dataset,
            responses,
            reward,
            lambda,
            format_reward,
            out,
            judge,
        } => {
            let config = RewardConfig {
                kind: reward.into(),
                use_format_reward: format_reward,
                lambda,
            };
            let judge = judge.build()?;
            let run = cmd_score(
                &ScoreOptions {
                    dataset,
                    responses,
                    out_dir: out,
                    config,
                },
                judge.as_deref(),
            )?;
            println!("{}", serde_json::to_string_pretty(&run.summary).unwrap());
        }
        Command::Eval {
            dataset,
            responses,
            judge,
            out,
            judge_args,
        } => {
            let judge_client = judge_args.build()?;
            if judge && judge_client.is_none() {
                return Err(CommandError::Schema(
                    "--judge requires --judge-endpoint".into(),
                ));
            }
            let report = cmd_eval(
                &EvalOptions {
                    dataset,
                    responses,
                    out_dir: out,
                    with_judge: judge,
                },
                judge_client.as_deref(),
            )?;
            print!("{}", render_table(&report));
        }
        Command::Convert {
            dataset,
            threshold,
            resume,
            out,
            judge,
        } => {
            let endpoint = judge.judge_endpoint.clone().ok_or_else(|| {
                CommandError::Schema("convert requires --judge-endpoint".into())
            })?;
            let config = JudgeClientConfig {
                endpoint,
                model_name: judge.judge_model.clone().unwrap_or_default(),
                temperature: 0.1,
                ..Default::default()
            };
            let backend = OpenAiBackend::from_config(&config)
                .map_err(|e| CommandError::JudgeUnavailable(e.to_string()))?;
            let run = cmd_convert(
                &ConvertOptions {
                    dataset,
                    out_dir: out,
                    threshold,
                    resume,
                },
                &backend,
            )?;
            println!(
                "converted {}, skipped {}, resumed {}",
                run.converted, run.skipped, run.resumed
            );
        }
        Command::RevalMulti {
            dataset,
            responses,
            out,
        } => {
            let run = cmd_reval_multi(&RevalOptions {
                dataset,
                responses,
                out_dir: out,
            })?;
            println!("{}", serde_json::to_string_pretty(&run.tallies).unwrap());
        }
        Command::Serve {
            bind,
            dataset,
            judge,
        } => {
            let records = match dataset {
                Some(path) => Some(
                    load_records(path, None)
                        .map_err(|e| CommandError::Schema(e.to_string()))?
                        .into_iter()
                        .map(|r| (r.id.clone(), r))
                        .collect::<HashMap<_, _>>(),
                ),
                None => None,
            };
            let state = Arc::new(ServiceState {
                dataset: records,
                judge: judge.build()?,
            });
            let runtime = tokio::runtime::Runtime::new().map_err(anyhow::Error::from)?;
            runtime.block_on(serve(&bind, state)).map_err(CommandError::Other)?;
        }
        Command::Report { report } => {
            let content = std::fs::read_to_string(report).map_err(anyhow::Error::from)?;
            let parsed: EvalReport =
                serde_json::from_str(&content).map_err(|e| CommandError::Schema(e.to_string()))?;
            print!("{}", render_table(&parsed));
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
