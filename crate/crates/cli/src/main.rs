use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use webreorg::log_ingest::generate_synthetic_logs;
use webreorg::pipeline::{
    self, bench_compare, demo_site, files, ErrorKind, PipelineConfig, PipelineError, RunSummary, Stage,
};

#[derive(Parser)]
#[command(name = "webreorg", version, about = "Propose site link changes from access logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// key=value configuration file; absent keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides a single key, e.g. `--set k_clusters=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage from raw log to plan.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        log: PathBuf,
        /// Site graph file; inferred from referrers when omitted.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse a raw log into the working directory.
    Ingest {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sessions, path completion, page features and transactions.
    Preprocess {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Defaults to the ingested records in the working directory.
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Outlier filtering and clustering of the page features.
    Cluster {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Frequent itemsets and association rules.
    Mine {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reorganization plan under the out-degree cap.
    Plan {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare farthest-first and k-means on random points.
    Bench {
        #[arg(long, default_value_t = 6000)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 3)]
        t_min: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic Combined-format log from random walks.
    Gen {
        /// Walk this graph instead of a generated demo site.
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long, default_value_t = 15)]
        pages: usize,
        #[arg(long, default_value_t = 50)]
        users: usize,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Destination log file.
        #[arg(long)]
        out: PathBuf,
        /// Also write the walked graph here.
        #[arg(long)]
        write_graph: Option<PathBuf>,
    },
}

fn load_config(args: &ConfigArgs) -> Result<PipelineConfig, PipelineError> {
    let usage = |e: &dyn std::fmt::Display| PipelineError::new(Stage::Config, ErrorKind::Usage, e);
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| PipelineError::new(Stage::Config, ErrorKind::Input, format!("{}: {e}", path.display())))?;
            PipelineConfig::from_text(&text).map_err(|e| usage(&format!("{}: {e}", path.display())))?
        }
        None => PipelineConfig::default(),
    };
    for pair in &args.overrides {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| usage(&format!("--set expects KEY=VALUE, got {pair:?}")))?;
        config.set(key.trim(), value.trim()).map_err(|e| usage(&e))?;
    }
    if let Some(seed) = args.seed {
        config.rng_seed = seed;
    }
    config.validate().map_err(|e| usage(&e))?;
    Ok(config)
}

fn ensure_dir(path: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(path).map_err(|e| {
        PipelineError::new(Stage::Config, ErrorKind::Input, format!("cannot create {}: {e}", path.display()))
    })
}

fn write_file(stage: Stage, path: &Path, text: &str) -> Result<(), PipelineError> {
    fs::write(path, text)
        .map_err(|e| PipelineError::new(stage, ErrorKind::Input, format!("{}: {e}", path.display())))
}

fn execute(command: Command) -> Result<RunSummary, PipelineError> {
    match command {
        Command::Run { cfg, log, graph, out } => {
            let config = load_config(&cfg)?;
            pipeline::run_pipeline(&config, &log, graph.as_deref(), &out)
        }
        Command::Ingest { log, out } => {
            ensure_dir(&out)?;
            pipeline::ingest_stage(&log, &out)
        }
        Command::Preprocess { cfg, log, graph, out } => {
            let config = load_config(&cfg)?;
            ensure_dir(&out)?;
            let records = log.unwrap_or_else(|| out.join(files::RECORDS));
            pipeline::preprocess_stage(&config, &records, graph.as_deref(), &out)
        }
        Command::Cluster { cfg, out } => pipeline::cluster_stage(&load_config(&cfg)?, &out),
        Command::Mine { cfg, out } => pipeline::mine_stage(&load_config(&cfg)?, &out),
        Command::Plan { cfg, out } => pipeline::plan_stage(&load_config(&cfg)?, &out),
        Command::Bench { n, k, t_min, seed } => {
            let result = bench_compare(n, k, t_min, seed)?;
            print!("{}", result.to_text());
            Ok(RunSummary::default())
        }
        Command::Gen {
            graph,
            pages,
            users,
            steps,
            seed,
            out,
            write_graph,
        } => {
            let site = match graph {
                Some(path) => pipeline::load_graph(Stage::Generate, &path)?,
                None => demo_site(pages, seed),
            };
            let mut text = generate_synthetic_logs(&site, users, steps, seed).join("\n");
            if !text.is_empty() {
                text.push('\n');
            }
            write_file(Stage::Generate, &out, &text)?;
            if let Some(path) = write_graph {
                write_file(Stage::Generate, &path, &site.to_text())?;
            }
            let mut summary = RunSummary::default();
            summary.push("pages", site.len());
            summary.push("lines", text.lines().count());
            Ok(summary)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(summary) => {
            print!("{}", summary.to_text());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(overrides: &[&str], seed: Option<u64>) -> ConfigArgs {
        ConfigArgs {
            config: None,
            seed,
            overrides: overrides.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn overrides_and_seed_apply_on_defaults() {
        let c = load_config(&args(&["k_clusters=5", "metric = manhattan"], Some(9))).unwrap();
        assert_eq!(c.k_clusters, 5);
        assert_eq!(c.metric.to_string(), "manhattan");
        assert_eq!(c.rng_seed, 9);
    }

    #[test]
    fn malformed_overrides_are_usage_errors() {
        for bad in [&["k_clusters"][..], &["nope=1"], &["k_clusters=0"]] {
            let err = load_config(&args(bad, None)).unwrap_err();
            assert_eq!((err.stage, err.exit_code()), (Stage::Config, 1), "{bad:?}");
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
