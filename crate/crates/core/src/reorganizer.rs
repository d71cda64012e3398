//! Matches mined links against cluster membership, builds a link-insertion
//! plan under an out-degree cap and scores it by Improved Efficiency.

use std::fmt;

use thiserror::Error;

use crate::apriori::{CandidateLink, Confidence};
use crate::clustering::ClusterModel;
use crate::sitegraph::{GraphError, SiteGraph};

pub const DEFAULT_OUTDEG_THRESHOLD: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReorgError {
    #[error("efficiency needs 1 <= p_t <= t_p (got t_p={t_p}, p_t={p_t})")]
    BadPathLengths { t_p: usize, p_t: usize },
    #[error("stale plan: link {src} -> {dst} already exists")]
    StalePlan { src: usize, dst: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// A candidate link whose endpoints both sit in retained clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchedLink {
    pub link: CandidateLink,
    /// Better (lower) rank of the clusters holding src and dst.
    pub cluster_rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkProposal {
    pub src: usize,
    pub dst: usize,
    pub support_count: usize,
    pub confidence: Confidence,
    pub cluster_rank: usize,
    /// Shortest path length before the change, `None` if unreachable.
    pub t_p: Option<usize>,
    pub efficiency_pct: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    Exists,
    OutdegFull,
    SelfLoop,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::Exists => "exists",
            RejectReason::OutdegFull => "outdeg_full",
            RejectReason::SelfLoop => "self_loop",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReorgPlan {
    pub proposals: Vec<LinkProposal>,
    pub outdeg_threshold: usize,
    pub rejected: Vec<(MatchedLink, RejectReason)>,
}

impl ReorgPlan {
    /// Unweighted mean efficiency over scored proposals.
    pub fn mean_efficiency(&self) -> Option<f64> {
        let scored: Vec<f64> = self.proposals.iter().filter_map(|p| p.efficiency_pct).collect();
        (!scored.is_empty()).then(|| scored.iter().sum::<f64>() / scored.len() as f64)
    }
}

/// `(t_p - p_t) / t_p * 100`.
pub fn improved_efficiency(t_p: usize, p_t: usize) -> Result<f64, ReorgError> {
    if t_p == 0 || p_t == 0 || p_t > t_p {
        return Err(ReorgError::BadPathLengths { t_p, p_t });
    }
    Ok((t_p - p_t) as f64 / t_p as f64 * 100.0)
}

/// Keeps candidates whose pages were both clustered into clusters ranked
/// below `rank_limit`.
pub fn match_links(
    candidates: &[CandidateLink],
    model: &ClusterModel,
    rank_limit: usize,
) -> Vec<MatchedLink> {
    let ranks = model.cluster_ranks();
    let rank_of = |page: usize| model.label_of(page).map(|label| ranks[label]);
    candidates
        .iter()
        .filter_map(|&link| {
            let a = rank_of(link.src)?;
            let b = rank_of(link.dst)?;
            (a < rank_limit && b < rank_limit).then_some(MatchedLink {
                link,
                cluster_rank: a.min(b),
            })
        })
        .collect()
}

/// Accepts candidates in order while the source page stays under the
/// out-degree cap, counting links accepted earlier in the same plan.
pub fn build_plan(
    matched: &[MatchedLink],
    graph: &SiteGraph,
    outdeg_threshold: usize,
) -> Result<ReorgPlan, ReorgError> {
    let mut working_degree: Vec<usize> = (0..graph.len())
        .map(|i| graph.out_degree(i))
        .collect::<Result<_, _>>()?;
    let mut accepted: Vec<(usize, usize)> = Vec::new();
    let mut proposals = Vec::new();
    let mut rejected = Vec::new();

    for &m in matched {
        let (src, dst) = (m.link.src, m.link.dst);
        let reason = if src == dst {
            Some(RejectReason::SelfLoop)
        } else if graph.has_link(src, dst)? || accepted.contains(&(src, dst)) {
            Some(RejectReason::Exists)
        } else if working_degree[src] >= outdeg_threshold {
            Some(RejectReason::OutdegFull)
        } else {
            None
        };
        if let Some(reason) = reason {
            rejected.push((m, reason));
            continue;
        }
        working_degree[src] += 1;
        accepted.push((src, dst));
        let t_p = graph.shortest_path_len(src, dst)?;
        let efficiency_pct = t_p.map(|t| improved_efficiency(t, 1)).transpose()?;
        proposals.push(LinkProposal {
            src,
            dst,
            support_count: m.link.support_count,
            confidence: m.link.confidence,
            cluster_rank: m.cluster_rank,
            t_p,
            efficiency_pct,
        });
    }
    Ok(ReorgPlan {
        proposals,
        outdeg_threshold,
        rejected,
    })
}

/// Returns a new graph with every proposed link added.
pub fn apply_plan(plan: &ReorgPlan, graph: &SiteGraph) -> Result<SiteGraph, ReorgError> {
    let mut links = Vec::with_capacity(plan.proposals.len());
    for p in &plan.proposals {
        if graph.has_link(p.src, p.dst)? {
            return Err(ReorgError::StalePlan {
                src: p.src,
                dst: p.dst,
            });
        }
        links.push((p.src, p.dst));
    }
    Ok(graph.with_links(&links)?)
}
