//! End-to-end orchestration. Every stage reads its inputs from and writes its
//! outputs to a working directory, so stages can run one at a time or chained
//! by [`run_pipeline`].

mod bench;
mod config;
mod demo;
mod reports;

use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::Path;

use thiserror::Error;

pub use bench::{bench_compare, BenchResult};
pub use config::{ConfigError, PipelineConfig};
pub use demo::demo_site;
pub use reports::files;

use crate::apriori::{extract_candidate_links, generate_rules, mine_frequent};
use crate::clustering::{iqr_outliers, min_max_normalize, ClusterRegistry, FeaturePoint, OutlierClass};
use crate::log_ingest::{format_record, parse_stream, LogRecord};
use crate::preprocess::{
    clean, complete_paths, identify_users, page_stats, sessionize, to_transactions,
};
use crate::reorganizer::{build_plan, match_links};
use crate::sitegraph::SiteGraph;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Preprocess,
    Cluster,
    Mine,
    Plan,
    Bench,
    Generate,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Preprocess => "preprocess",
            Stage::Cluster => "cluster",
            Stage::Mine => "mine",
            Stage::Plan => "plan",
            Stage::Bench => "bench",
            Stage::Generate => "gen",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments or configuration.
    Usage,
    /// Unreadable or inconsistent input data.
    Input,
    /// Internal invariant broken, e.g. a stale intermediate file.
    Consistency,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("[{stage}] {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, kind: ErrorKind, message: impl fmt::Display) -> Self {
        Self {
            stage,
            kind,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Usage => 1,
            ErrorKind::Input => 2,
            ErrorKind::Consistency => 3,
        }
    }
}

pub type Result<T, E = PipelineError> = std::result::Result<T, E>;

/// Ordered `key=value` counters reported by the stages.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub entries: Vec<(String, String)>,
}

impl RunSummary {
    pub fn push(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn extend(&mut self, other: RunSummary) {
        self.entries.extend(other.entries);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

fn read_log(stage: Stage, path: &Path) -> Result<(Vec<LogRecord>, crate::log_ingest::IngestReport)> {
    let file = fs::File::open(path).map_err(|e| {
        PipelineError::new(stage, ErrorKind::Input, format!("cannot read {}: {e}", path.display()))
    })?;
    parse_stream(BufReader::new(file)).map_err(|e| {
        PipelineError::new(stage, ErrorKind::Input, format!("cannot read {}: {e}", path.display()))
    })
}

pub fn load_graph(stage: Stage, path: &Path) -> Result<SiteGraph> {
    let text = reports::read_text(stage, path)?;
    text.parse().map_err(|e| {
        PipelineError::new(stage, ErrorKind::Input, format!("{}: {e}", path.display()))
    })
}

/// Parses a raw log and writes the accepted records, re-serialized, to
/// `records.log`.
pub fn ingest_stage(log_path: &Path, out_dir: &Path) -> Result<RunSummary> {
    let (records, report) = read_log(Stage::Ingest, log_path)?;
    let text: String = records.iter().map(|r| format_record(r) + "\n").collect();
    reports::write(Stage::Ingest, &out_dir.join(files::RECORDS), &text)?;
    let mut summary = RunSummary::default();
    summary.push("records_parsed", report.parsed_count);
    summary.push("records_skipped", report.skipped_count);
    summary.push(
        "first_error_line",
        report.first_error_line.map_or("NA".to_string(), |l| l.to_string()),
    );
    Ok(summary)
}

/// Cleaning, user and session identification, graph loading or inference,
/// path completion, then the page feature table and transactions.
pub fn preprocess_stage(
    config: &PipelineConfig,
    records_path: &Path,
    graph_path: Option<&Path>,
    out_dir: &Path,
) -> Result<RunSummary> {
    let stage = Stage::Preprocess;
    let (records, _) = read_log(stage, records_path)?;
    let cleaned = clean(&records);

    let graph = match graph_path {
        Some(path) => {
            let graph = load_graph(stage, path)?;
            if let Some(missing) = cleaned.iter().find(|r| graph.pages().id(&r.url_path).is_none()) {
                return Err(PipelineError::new(
                    stage,
                    ErrorKind::Input,
                    format!("log references page {:?} absent from graph {}", missing.url_path, path.display()),
                ));
            }
            graph
        }
        None => SiteGraph::infer_from_records(&cleaned),
    };

    let users = identify_users(&cleaned, config.user_id_mode);
    let sessions = sessionize(&users, graph.pages(), config.session_timeout_seconds)
        .map_err(|e| PipelineError::new(stage, ErrorKind::Input, e))?;
    let completed: Vec<_> = sessions.iter().map(|s| complete_paths(s, &graph)).collect();
    let stats = page_stats(
        &completed,
        graph.pages(),
        config.alpha_seconds,
        config.beta_clicks,
    );
    let transactions = to_transactions(&completed);

    reports::write(stage, &out_dir.join(files::GRAPH), &graph.to_text())?;
    reports::write_page_stats(stage, &out_dir.join(files::PAGE_STATS), &stats)?;
    reports::write_transactions(stage, out_dir, &transactions)?;

    let distinct_users: std::collections::BTreeSet<_> = users.iter().map(|(u, _)| u).collect();
    let mut summary = RunSummary::default();
    summary.push("records_cleaned", cleaned.len());
    summary.push("users", distinct_users.len());
    summary.push("sessions", completed.len());
    summary.push("incomplete_sessions", completed.iter().filter(|s| s.incomplete).count());
    summary.push(
        "inferred_visits",
        completed.iter().flat_map(|s| &s.visits).filter(|v| v.inferred).count(),
    );
    summary.push("pages", graph.len());
    summary.push("graph_edges", graph.edge_count());
    summary.push("pages_after_thresholds", stats.len());
    Ok(summary)
}

/// IQR flagging on both features, optional removal of extremes, then the
/// configured clustering algorithm.
pub fn cluster_stage(config: &PipelineConfig, out_dir: &Path) -> Result<RunSummary> {
    let stage = Stage::Cluster;
    let stats = reports::read_page_stats(stage, &out_dir.join(files::PAGE_STATS))?;
    let points: Vec<FeaturePoint> = stats
        .iter()
        .map(|p| FeaturePoint::new(p.page_id, p.s, p.c as f64))
        .collect();

    let classes: Vec<OutlierClass> = if points.is_empty() {
        Vec::new()
    } else {
        let flag = |values: Vec<f64>| {
            iqr_outliers(&values, config.outlier_factor, config.extreme_factor)
                .map_err(|e| PipelineError::new(stage, ErrorKind::Usage, e))
        };
        let by_s = flag(points.iter().map(|p| p.s).collect())?;
        let by_c = flag(points.iter().map(|p| p.c).collect())?;
        by_s.into_iter().zip(by_c).map(|(a, b)| a.max(b)).collect()
    };
    reports::write_outliers(stage, &out_dir.join(files::OUTLIERS), &points, &classes)?;

    let kept: Vec<FeaturePoint> = points
        .iter()
        .zip(&classes)
        .filter(|(_, &c)| !(config.drop_extremes && c == OutlierClass::Extreme))
        .map(|(p, _)| *p)
        .collect();
    let features = if config.normalize_features {
        min_max_normalize(&kept)
    } else {
        kept.clone()
    };

    let model = if features.is_empty() {
        None
    } else {
        let algorithm = ClusterRegistry::with_builtins()
            .create(&config.cluster_algorithm, &config.algorithm_options())
            .map_err(|e| PipelineError::new(stage, ErrorKind::Usage, e))?;
        Some(
            algorithm
                .fit(&features, config.k_clusters, config.metric)
                .map_err(|e| PipelineError::new(stage, ErrorKind::Consistency, e))?,
        )
    };
    let extremes_removed = points.len() - kept.len();
    reports::write_clusters(stage, out_dir, model.as_ref(), &kept)?;

    let mut summary = RunSummary::default();
    summary.push("outliers_flagged", classes.iter().filter(|&&c| c != OutlierClass::Normal).count());
    summary.push("extremes_removed", extremes_removed);
    summary.push("clustered_points", kept.len());
    summary.push("clusters", model.as_ref().map_or(0, |m| m.centers.len()));
    summary.push("cluster_algorithm", &config.cluster_algorithm);
    summary.push("distance_evals", model.as_ref().map_or(0, |m| m.distance_evals));
    summary.push("cluster_iterations", model.as_ref().map_or(0, |m| m.iterations));
    Ok(summary)
}

/// Apriori with the delta support schedule, then association rules.
pub fn mine_stage(config: &PipelineConfig, out_dir: &Path) -> Result<RunSummary> {
    let stage = Stage::Mine;
    let transactions = reports::read_sequences(stage, &out_dir.join(files::SEQUENCES))?;
    let mut summary = RunSummary::default();
    summary.push("transactions", transactions.len());
    if transactions.is_empty() {
        reports::write_itemsets(stage, &out_dir.join(files::ITEMSETS), &[])?;
        reports::write_rules(stage, &out_dir.join(files::RULES), &[])?;
        summary.push("support_threshold", "NA");
        summary.push("frequent_itemsets", 0);
        summary.push("rules", 0);
        return Ok(summary);
    }
    let found = mine_frequent(&transactions, &config.mining_params())
        .map_err(|e| PipelineError::new(stage, ErrorKind::Usage, e))?;
    let rules = generate_rules(&found.itemsets, config.min_confidence);
    reports::write_itemsets(stage, &out_dir.join(files::ITEMSETS), &found.itemsets)?;
    reports::write_rules(stage, &out_dir.join(files::RULES), &rules)?;
    summary.push("support_threshold", found.support);
    summary.push("min_support_count", found.min_support_count);
    summary.push("support_rounds", found.rounds);
    summary.push("frequent_itemsets", found.itemsets.len());
    summary.push("rules", rules.len());
    Ok(summary)
}

/// Candidate links from the rules, cluster matching, out-degree constrained
/// plan and its report.
pub fn plan_stage(config: &PipelineConfig, out_dir: &Path) -> Result<RunSummary> {
    let stage = Stage::Plan;
    let graph = load_graph(stage, &out_dir.join(files::GRAPH))?;
    let transactions = reports::read_sequences(stage, &out_dir.join(files::SEQUENCES))?;
    let rules = reports::read_rules(stage, &out_dir.join(files::RULES))?;
    let model = reports::read_clusters(stage, out_dir, config.metric)?;

    let links = extract_candidate_links(&rules, &transactions);
    if let Some(bad) = links.iter().find(|l| l.src >= graph.len() || l.dst >= graph.len()) {
        return Err(PipelineError::new(
            stage,
            ErrorKind::Consistency,
            format!("rule page {} outside graph of {} pages", bad.src.max(bad.dst), graph.len()),
        ));
    }
    let matched = match &model {
        Some(m) => match_links(&links, m, config.rank_limit),
        None => Vec::new(),
    };
    let plan = build_plan(&matched, &graph, config.outdeg_threshold)
        .map_err(|e| PipelineError::new(stage, ErrorKind::Consistency, e))?;
    reports::write_plan(stage, &out_dir.join(files::PLAN), &plan, &graph)?;

    let mut summary = RunSummary::default();
    summary.push("rule_links", links.len());
    summary.push("candidates", matched.len());
    summary.push("accepted", plan.proposals.len());
    summary.push("rejected", plan.rejected.len());
    summary.push(
        "mean_improved_efficiency_pct",
        plan.mean_efficiency().map_or("NA".to_string(), |e| format!("{e:.4}")),
    );
    Ok(summary)
}

/// Runs every stage in order and writes `summary.txt` and `config.txt`.
pub fn run_pipeline(
    config: &PipelineConfig,
    log_path: &Path,
    graph_path: Option<&Path>,
    out_dir: &Path,
) -> Result<RunSummary> {
    config
        .validate()
        .map_err(|e| PipelineError::new(Stage::Config, ErrorKind::Usage, e))?;
    fs::create_dir_all(out_dir).map_err(|e| {
        PipelineError::new(Stage::Config, ErrorKind::Input, format!("cannot create {}: {e}", out_dir.display()))
    })?;
    reports::write(Stage::Config, &out_dir.join(files::CONFIG), &config.to_text())?;

    let mut summary = ingest_stage(log_path, out_dir)?;
    summary.extend(preprocess_stage(config, &out_dir.join(files::RECORDS), graph_path, out_dir)?);
    summary.extend(cluster_stage(config, out_dir)?);
    summary.extend(mine_stage(config, out_dir)?);
    summary.extend(plan_stage(config, out_dir)?);
    reports::write(Stage::Plan, &out_dir.join(files::SUMMARY), &summary.to_text())?;
    Ok(summary)
}
