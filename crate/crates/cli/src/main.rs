//! `esim`: extract stable-semantic graphs from EVM runtime bytecode, train
//! and apply the similarity embedding, and query an indexed corpus.
//!
//! Exit codes: 0 success, 1 partial failure (some inputs skipped), 2
//! invalid input or configuration.

mod commands;
mod files;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "esim", version, about = "EVM bytecode similarity toolkit")]
struct Cli {
    /// Seed for every random choice (split, pairs, init, shuffle).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for extraction; 0 means one per core.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Emit log lines as JSON objects.
    #[arg(long, global = true)]
    json_logs: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract one SSG JSON file per (contract, function) from hex inputs.
    Extract {
        /// A hex file or a directory of hex files (runtime bytecode).
        #[arg(long)]
        input: String,
        /// Output directory for <origin>_<selector>.ssg.json files.
        #[arg(long)]
        out: String,
    },
    /// Render a contract's function CFGs or SSGs as Graphviz files.
    ExportDot {
        /// A hex file (runtime bytecode) or an .ssg.json file.
        #[arg(long)]
        input: String,
        #[arg(long)]
        out: String,
        /// What to render for hex inputs: "cfg" or "ssg".
        #[arg(long, default_value = "ssg")]
        what: String,
    },
    /// Generate the synthetic labeled corpus: bytecode, SSGs and manifest.
    Synth {
        #[arg(long, default_value_t = 60)]
        classes: usize,
        #[arg(long, default_value_t = 6)]
        variants: usize,
        /// Output directory (bytecode/, ssg/, manifest.json).
        #[arg(long)]
        out: String,
    },
    /// Split a corpus manifest into class-disjoint train/val/test manifests.
    Split {
        #[arg(long)]
        corpus: String,
        /// Directory receiving train.json, val.json, test.json.
        #[arg(long)]
        out: String,
    },
    /// Sample labeled pairs from a corpus manifest.
    Pairs {
        #[arg(long)]
        corpus: String,
        #[arg(long)]
        pos: usize,
        #[arg(long)]
        neg: usize,
        /// Output pairs file (JSON lines).
        #[arg(long)]
        out: String,
    },
    /// Train the embedding model on labeled pairs.
    Train {
        #[arg(long)]
        corpus: String,
        #[arg(long)]
        pairs: String,
        /// Validation pairs; entry ids must resolve in the same corpus.
        #[arg(long)]
        val_pairs: Option<String>,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 0.001)]
        lr: f64,
        #[arg(long, default_value_t = 100)]
        batch: usize,
        #[arg(long, default_value_t = 64)]
        embed_size: usize,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        /// Model output path (JSON).
        #[arg(long)]
        out: String,
        /// Training log CSV (epoch, train loss, val loss, val AUC);
        /// defaults to <out>.log.csv.
        #[arg(long)]
        log_out: Option<String>,
    },
    /// Embed corpus functions into vectors (CSV: origin_id,selector,v0..).
    Embed {
        /// A corpus manifest, an .ssg.json file, or a directory of them.
        #[arg(long)]
        input: String,
        #[arg(long)]
        model: String,
        #[arg(long)]
        out: String,
    },
    /// Add embedding CSV rows to a vector index file.
    IndexAdd {
        #[arg(long)]
        db: String,
        /// Embeddings CSV produced by `embed`.
        #[arg(long)]
        vectors: String,
    },
    /// Top-k similarity search over an index.
    Search {
        #[arg(long)]
        db: String,
        #[arg(long)]
        model: String,
        /// An .ssg.json file or a hex bytecode file.
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        /// "text" or "json".
        #[arg(long, default_value = "text")]
        format: String,
    },
    /// Score labeled pairs with a model and report AUC.
    Eval {
        #[arg(long)]
        corpus: String,
        #[arg(long)]
        pairs: String,
        #[arg(long)]
        model: String,
        /// Per-pair scores CSV; defaults to no file.
        #[arg(long)]
        scores_out: Option<String>,
    },
}

fn init_logging(quiet: bool, json: bool) {
    let level = if quiet { "error" } else { "info" };
    let env = env_logger::Env::default().default_filter_or(level);
    let mut builder = env_logger::Builder::from_env(env);
    if json {
        builder.format(|buf, record| {
            let line = serde_json::json!({
                "level": record.level().to_string().to_lowercase(),
                "msg": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        });
    } else {
        builder.format(|buf, record| writeln!(buf, "{}: {}", record.level(), record.args()));
    }
    builder.init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.quiet, cli.json_logs);
    if cli.jobs != 1 {
        let threads = if cli.jobs == 0 { num_threads() } else { cli.jobs };
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("thread pool already initialized: {e}");
        }
    }
    let outcome = match cli.command {
        Command::Extract { input, out } => commands::extract(&input, &out),
        Command::ExportDot { input, out, what } => commands::export_dot(&input, &out, &what),
        Command::Synth { classes, variants, out } => {
            commands::synth(classes, variants, cli.seed, &out)
        }
        Command::Split { corpus, out } => commands::split(&corpus, cli.seed, &out),
        Command::Pairs { corpus, pos, neg, out } => {
            commands::pairs(&corpus, pos, neg, cli.seed, &out)
        }
        Command::Train {
            corpus,
            pairs,
            val_pairs,
            epochs,
            lr,
            batch,
            embed_size,
            depth,
            out,
            log_out,
        } => commands::train(commands::TrainArgs {
            corpus,
            pairs,
            val_pairs,
            epochs,
            lr,
            batch,
            embed_size,
            depth,
            seed: cli.seed,
            out,
            log_out,
        }),
        Command::Embed { input, model, out } => commands::embed(&input, &model, &out),
        Command::IndexAdd { db, vectors } => commands::index_add(&db, &vectors),
        Command::Search { db, model, query, top_k, format } => {
            commands::search(&db, &model, &query, top_k, &format)
        }
        Command::Eval { corpus, pairs, model, scores_out } => {
            commands::eval(&corpus, &pairs, &model, scores_out.as_deref())
        }
    };
    match outcome {
        Ok(commands::Outcome::Ok) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Partial) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(2)
        }
    }
}

fn num_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}
