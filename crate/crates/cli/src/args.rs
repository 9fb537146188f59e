use std::path::PathBuf;

use annolingo::corpus::Task;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "annolingo",
    about = "Multilingual data annotation with a chat-completion model as the annotator",
    disable_version_flag = true
)]
pub struct Cli {
    /// Print the tool version and the built-in template ids.
    #[arg(short = 'V', long)]
    pub version: bool,

    /// More log output on standard error (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate silver annotations for a corpus.
    Annotate(AnnotateArgs),
    /// Cut a dataset into train/validation/test files.
    Split(SplitArgs),
    /// Compare human-only and assisted annotation cost.
    Cost(CostArgs),
    /// Score candidates against references.
    Evaluate(EvaluateArgs),
    /// Check a corpus, dataset or exclusion log.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    /// Run config (JSON or TOML); flags given here override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_task)]
    pub task: Option<Task>,
    /// Target language code, e.g. ko.
    #[arg(long = "target-lang")]
    pub target_lang: Option<String>,
    /// Template id or path to a template file.
    #[arg(long)]
    pub template: Option<String>,
    #[arg(long = "n-paraphrases")]
    pub n_paraphrases: Option<usize>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub exclusions: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Concurrent requests.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Attempts per item before it is excluded.
    #[arg(long)]
    pub patience: Option<u32>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long = "api-base")]
    pub api_base: Option<String>,
    /// Name of the environment variable holding the API key.
    #[arg(long = "api-key-env")]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long = "requests-per-minute")]
    pub requests_per_minute: Option<u32>,
    /// Replay a mock script instead of calling an endpoint.
    #[arg(long)]
    pub mock: Option<PathBuf>,
    /// Re-attempt only the items in the exclusion log.
    #[arg(long)]
    pub resume: bool,
    /// Fixed dataset timestamp (RFC 3339).
    #[arg(long = "created-at")]
    pub created_at: Option<String>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Three ratios, e.g. 8:1:1 or 0.70:0.24:0.06.
    #[arg(long)]
    pub ratios: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub input: PathBuf,
    /// Output files are <prefix>train.json, <prefix>validation.json and
    /// <prefix>test.json.
    #[arg(long = "out-prefix")]
    pub out_prefix: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// Items to annotate.
    #[arg(long, default_value_t = 1)]
    pub items: u64,
    /// Also report how many items each mode covers under this budget.
    #[arg(long)]
    pub budget: Option<String>,
    #[arg(long = "human-per-gold")]
    pub human_per_gold: Option<String>,
    #[arg(long = "golds-human")]
    pub golds_human: Option<u32>,
    #[arg(long = "golds-assisted")]
    pub golds_assisted: Option<u32>,
    /// Blended price per 1,000 tokens.
    #[arg(long = "price-1k", conflicts_with = "split_pricing")]
    pub price_1k: Option<String>,
    /// Prompt and completion prices per 1,000 tokens, as P:C.
    #[arg(long = "split-pricing")]
    pub split_pricing: Option<String>,
    #[arg(long = "tokens-per-item")]
    pub tokens_per_item: Option<u64>,
    /// Completion share of --tokens-per-item; needed with --split-pricing.
    #[arg(long = "completion-tokens")]
    pub completion_tokens: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// JSON array of {"id", "text"}.
    #[arg(long)]
    pub candidates: PathBuf,
    /// JSON array of {"id", "references": [...]}.
    #[arg(long)]
    pub references: PathBuf,
    /// Comma-separated: bleu, rouge_l, meteor_lite (default: all).
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<String>,
    /// Add-one smoothing for BLEU orders 2-4.
    #[arg(long)]
    pub smooth: bool,
    #[arg(long = "per-sentence")]
    pub per_sentence: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub path: PathBuf,
    /// Treat the file as an input corpus of this task instead of guessing.
    #[arg(long, value_parser = parse_task)]
    pub task: Option<Task>,
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse()
}
