//! Reading and writing the delimiter-separated intermediate files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ErrorKind, PipelineError, Result, Stage};
use crate::apriori::{Confidence, Itemset, Rule};
use crate::clustering::{Centroid, ClusterModel, FeaturePoint, Metric, OutlierClass};
use crate::preprocess::{PageStats, Transaction};
use crate::reorganizer::ReorgPlan;
use crate::sitegraph::SiteGraph;

pub mod files {
    pub const CONFIG: &str = "config.txt";
    pub const RECORDS: &str = "records.log";
    pub const GRAPH: &str = "graph.txt";
    pub const PAGE_STATS: &str = "page_stats.csv";
    pub const TRANSACTIONS: &str = "transactions.txt";
    pub const SEQUENCES: &str = "sequences.txt";
    pub const OUTLIERS: &str = "outliers.csv";
    pub const CLUSTERS: &str = "clusters.csv";
    pub const CENTERS: &str = "centers.csv";
    pub const ITEMSETS: &str = "itemsets.txt";
    pub const RULES: &str = "rules.txt";
    pub const PLAN: &str = "plan.csv";
    pub const SUMMARY: &str = "summary.txt";

    /// Every report a full run leaves behind.
    pub const ALL: [&str; 13] = [
        CONFIG,
        RECORDS,
        GRAPH,
        PAGE_STATS,
        TRANSACTIONS,
        SEQUENCES,
        OUTLIERS,
        CLUSTERS,
        CENTERS,
        ITEMSETS,
        RULES,
        PLAN,
        SUMMARY,
    ];
}

fn input_error(stage: Stage, path: &Path, detail: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(stage, ErrorKind::Input, format!("{}: {detail}", path.display()))
}

pub(super) fn read_text(stage: Stage, path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| input_error(stage, path, e))
}

pub(super) fn write(stage: Stage, path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| input_error(stage, path, e))
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut out = |record: &[String]| writer.write_record(record).expect("in-memory csv write");
    out(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    for row in rows {
        out(&row);
    }
    String::from_utf8(writer.into_inner().expect("in-memory csv flush")).expect("utf-8 csv")
}

fn csv_rows(stage: Stage, path: &Path, body: &str, width: usize) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut rows = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| input_error(stage, path, e))?;
        if row.len() != width {
            return Err(input_error(stage, path, format!("expected {width} columns, got {}", row.len())));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(stage: Stage, path: &Path, raw: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| input_error(stage, path, format!("bad value {raw:?}")))
}

pub(super) fn write_page_stats(stage: Stage, path: &Path, stats: &[PageStats]) -> Result<()> {
    let rows = stats
        .iter()
        .map(|p| vec![p.page_id.to_string(), p.url.clone(), p.s.to_string(), p.c.to_string()]);
    write(stage, path, &csv_text(&["page_id", "url", "S", "C"], rows))
}

pub(super) fn read_page_stats(stage: Stage, path: &Path) -> Result<Vec<PageStats>> {
    let text = read_text(stage, path)?;
    csv_rows(stage, path, &text, 4)?
        .iter()
        .map(|row| {
            Ok(PageStats {
                page_id: field(stage, path, &row[0])?,
                url: row[1].to_string(),
                s: field(stage, path, &row[2])?,
                c: field(stage, path, &row[3])?,
            })
        })
        .collect()
}

fn join(ids: impl IntoIterator<Item = usize>) -> String {
    ids.into_iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_ids(stage: Stage, path: &Path, text: &str) -> Result<Vec<usize>> {
    text.split_whitespace()
        .map(|t| field(stage, path, t))
        .collect()
}

/// `transactions.txt` holds the page set of each session and
/// `sequences.txt` the full visit order.
pub(super) fn write_transactions(stage: Stage, out_dir: &Path, transactions: &[Transaction]) -> Result<()> {
    let mut sets = String::from("items\n");
    let mut sequences = String::from("sequence\n");
    for t in transactions {
        let _ = writeln!(sets, "{}", join(t.items.iter().copied()));
        let _ = writeln!(sequences, "{}", join(t.sequence.iter().copied()));
    }
    write(stage, &out_dir.join(files::TRANSACTIONS), &sets)?;
    write(stage, &out_dir.join(files::SEQUENCES), &sequences)
}

pub(super) fn read_sequences(stage: Stage, path: &Path) -> Result<Vec<Transaction>> {
    let text = read_text(stage, path)?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(Transaction::from_sequence(parse_ids(stage, path, l)?)))
        .collect()
}

pub(super) fn write_outliers(
    stage: Stage,
    path: &Path,
    points: &[FeaturePoint],
    classes: &[OutlierClass],
) -> Result<()> {
    let rows = points.iter().zip(classes).map(|(p, c)| {
        vec![p.page_id.to_string(), p.s.to_string(), p.c.to_string(), c.to_string()]
    });
    write(stage, path, &csv_text(&["page_id", "s", "c", "class"], rows))
}

/// `clusters.csv` labels each clustered page; `centers.csv` lists the
/// centers with their rank by descending dwell.
pub(super) fn write_clusters(
    stage: Stage,
    out_dir: &Path,
    model: Option<&ClusterModel>,
    points: &[FeaturePoint],
) -> Result<()> {
    let (members, centers): (Vec<Vec<String>>, Vec<Vec<String>>) = match model {
        Some(m) => (
            points
                .iter()
                .zip(&m.labels)
                .map(|(p, l)| vec![p.page_id.to_string(), p.s.to_string(), p.c.to_string(), l.to_string()])
                .collect(),
            m.centers
                .iter()
                .zip(m.cluster_ranks())
                .enumerate()
                .map(|(i, (c, rank))| vec![i.to_string(), c.s.to_string(), c.c.to_string(), rank.to_string()])
                .collect(),
        ),
        None => (Vec::new(), Vec::new()),
    };
    write(
        stage,
        &out_dir.join(files::CLUSTERS),
        &csv_text(&["page_id", "s", "c", "cluster_index"], members),
    )?;
    write(
        stage,
        &out_dir.join(files::CENTERS),
        &csv_text(&["cluster_index", "s", "c", "rank"], centers),
    )
}

/// Rebuilds enough of a model (centers and labels) for cluster matching.
/// Returns `None` when nothing was clustered.
pub(super) fn read_clusters(stage: Stage, out_dir: &Path, metric: Metric) -> Result<Option<ClusterModel>> {
    let centers_path = out_dir.join(files::CENTERS);
    let mut centers = Vec::new();
    for (i, row) in csv_rows(stage, &centers_path, &read_text(stage, &centers_path)?, 4)?
        .iter()
        .enumerate()
    {
        if field::<usize>(stage, &centers_path, &row[0])? != i {
            return Err(input_error(stage, &centers_path, "centers out of order"));
        }
        centers.push(Centroid {
            s: field(stage, &centers_path, &row[1])?,
            c: field(stage, &centers_path, &row[2])?,
        });
    }
    let path = out_dir.join(files::CLUSTERS);
    let rows = csv_rows(stage, &path, &read_text(stage, &path)?, 4)?;
    if centers.is_empty() {
        return Ok(None);
    }
    let mut page_ids = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for row in &rows {
        page_ids.push(field(stage, &path, &row[0])?);
        let label: usize = field(stage, &path, &row[3])?;
        if label >= centers.len() {
            return Err(PipelineError::new(
                stage,
                ErrorKind::Consistency,
                format!("{}: label {label} without a center", path.display()),
            ));
        }
        labels.push(label);
    }
    Ok(Some(ClusterModel {
        algorithm: String::new(),
        k: centers.len(),
        centers,
        center_indices: Vec::new(),
        page_ids,
        labels,
        metric,
        distance_evals: 0,
        iterations: 0,
    }))
}

pub(super) fn write_itemsets(stage: Stage, path: &Path, itemsets: &[Itemset]) -> Result<()> {
    let mut text = String::from("items\tsupport_count\n");
    for set in itemsets {
        let _ = writeln!(text, "{}\t{}", join(set.items.iter().copied()), set.support_count);
    }
    write(stage, path, &text)
}

/// One rule per line: `a b -> c <tab> support <tab> union/antecedent`.
pub(super) fn write_rules(stage: Stage, path: &Path, rules: &[Rule]) -> Result<()> {
    let mut text = String::from("rule\tsupport\tconfidence\n");
    for r in rules {
        let _ = writeln!(
            text,
            "{} -> {}\t{}\t{}",
            join(r.antecedent.iter().copied()),
            join(r.consequent.iter().copied()),
            r.support_count,
            r.confidence
        );
    }
    write(stage, path, &text)
}

pub(super) fn read_rules(stage: Stage, path: &Path) -> Result<Vec<Rule>> {
    let text = read_text(stage, path)?;
    let mut rules = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let bad = || input_error(stage, path, format!("malformed rule line {line:?}"));
        let mut cols = line.split('\t');
        let (Some(rule), Some(support), Some(conf), None) =
            (cols.next(), cols.next(), cols.next(), cols.next())
        else {
            return Err(bad());
        };
        let (lhs, rhs) = rule.split_once("->").ok_or_else(bad)?;
        let (union, antecedent) = conf.split_once('/').ok_or_else(bad)?;
        let confidence = Confidence {
            union_count: field(stage, path, union)?,
            antecedent_count: field(stage, path, antecedent)?,
        };
        let support_count: usize = field(stage, path, support)?;
        if confidence.union_count != support_count || confidence.antecedent_count == 0 {
            return Err(bad());
        }
        rules.push(Rule {
            antecedent: parse_ids(stage, path, lhs)?,
            consequent: parse_ids(stage, path, rhs)?,
            support_count,
            confidence,
        });
    }
    Ok(rules)
}

pub(super) fn write_plan(stage: Stage, path: &Path, plan: &ReorgPlan, graph: &SiteGraph) -> Result<()> {
    let url = |p: usize| graph.url(p).unwrap_or("").to_string();
    let opt = |v: Option<String>| v.unwrap_or_else(|| "NA".to_string());
    let accepted = plan.proposals.iter().map(|p| {
        vec![
            p.src.to_string(),
            p.dst.to_string(),
            url(p.src),
            url(p.dst),
            p.support_count.to_string(),
            p.confidence.to_string(),
            p.cluster_rank.to_string(),
            opt(p.t_p.map(|t| t.to_string())),
            opt(p.efficiency_pct.map(|e| format!("{e:.4}"))),
            "accepted".to_string(),
        ]
    });
    let rejected = plan.rejected.iter().map(|(m, reason)| {
        let l = m.link;
        vec![
            l.src.to_string(),
            l.dst.to_string(),
            url(l.src),
            url(l.dst),
            l.support_count.to_string(),
            l.confidence.to_string(),
            m.cluster_rank.to_string(),
            "NA".to_string(),
            "NA".to_string(),
            reason.to_string(),
        ]
    });
    let header = [
        "src",
        "dst",
        "src_url",
        "dst_url",
        "support",
        "confidence",
        "cluster_rank",
        "t_p",
        "efficiency_pct",
        "status",
    ];
    write(stage, path, &csv_text(&header, accepted.chain(rejected)))
}
