//! Log preprocessing: cleaning, user identification, sessionization, path
//! completion and formatting into clustering and mining inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::log_ingest::LogRecord;
use crate::sitegraph::{PageIndex, SiteGraph};

pub const DEFAULT_SESSION_TIMEOUT: i64 = 1800;

const ASSET_EXTENSIONS: [&str; 7] = [".gif", ".jpg", ".jpeg", ".png", ".css", ".js", ".ico"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PreprocessError {
    #[error("page {0:?} is not part of the site graph")]
    UnknownPage(String),
    #[error("unknown user id mode {0:?} (expected ip_only or ip_and_agent)")]
    BadMode(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UserId(pub String);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UserIdMode {
    IpOnly,
    #[default]
    IpAndAgent,
}

impl FromStr for UserIdMode {
    type Err = PreprocessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ip_only" => Ok(Self::IpOnly),
            "ip_and_agent" => Ok(Self::IpAndAgent),
            other => Err(PreprocessError::BadMode(other.to_string())),
        }
    }
}

impl fmt::Display for UserIdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::IpOnly => "ip_only",
            Self::IpAndAgent => "ip_and_agent",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Visit {
    pub page: usize,
    pub entry_time: i64,
    /// Seconds spent on the page.
    pub dwell: f64,
    /// Referring page, when the log named a known one.
    pub referrer: Option<usize>,
    /// Inserted by path completion rather than logged.
    pub inferred: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub user: UserId,
    pub visits: Vec<Visit>,
    /// Set when path completion found a gap it could not bridge.
    pub incomplete: bool,
}

impl Session {
    pub fn duration(&self) -> f64 {
        self.visits.iter().map(|v| v.dwell).sum()
    }

    pub fn pages(&self) -> Vec<usize> {
        self.visits.iter().map(|v| v.page).collect()
    }
}

/// Per-page clustering features: mean dwell `s` and click count `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct PageStats {
    pub page_id: usize,
    pub url: String,
    pub s: f64,
    pub c: usize,
}

/// A session reduced to its page set, with the visit order kept alongside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub items: BTreeSet<usize>,
    pub sequence: Vec<usize>,
}

impl Transaction {
    pub fn from_sequence(sequence: Vec<usize>) -> Self {
        Self {
            items: sequence.iter().copied().collect(),
            sequence,
        }
    }
}

fn is_asset(path: &str) -> bool {
    let lower = path.to_ascii_lowercase();
    ASSET_EXTENSIONS.iter().any(|ext| lower.ends_with(ext))
}

/// Drops asset requests and anything other than 200/304 responses.
pub fn clean(records: &[LogRecord]) -> Vec<LogRecord> {
    records
        .iter()
        .filter(|r| matches!(r.status, 200 | 304) && !is_asset(&r.url_path))
        .cloned()
        .collect()
}

pub fn identify_users(records: &[LogRecord], mode: UserIdMode) -> Vec<(UserId, LogRecord)> {
    records
        .iter()
        .map(|r| {
            let key = match mode {
                UserIdMode::IpOnly => r.ip.clone(),
                UserIdMode::IpAndAgent => {
                    format!("{}|{}", r.ip, r.user_agent.as_deref().unwrap_or("-"))
                }
            };
            (UserId(key), r.clone())
        })
        .collect()
}

/// Splits each user's visit stream at gaps longer than `timeout`. The final
/// visit of a session gets the mean dwell of the session's other visits, or
/// the mean of all observed gaps when the session is a single visit.
pub fn sessionize(
    records: &[(UserId, LogRecord)],
    pages: &PageIndex,
    timeout: i64,
) -> Result<Vec<Session>, PreprocessError> {
    sessionize_inner(records, pages, timeout, None)
}

/// As [`sessionize`], but single-visit sessions get `global_mean_dwell`.
pub fn sessionize_with_global_dwell(
    records: &[(UserId, LogRecord)],
    pages: &PageIndex,
    timeout: i64,
    global_mean_dwell: f64,
) -> Result<Vec<Session>, PreprocessError> {
    sessionize_inner(records, pages, timeout, Some(global_mean_dwell))
}

fn sessionize_inner(
    records: &[(UserId, LogRecord)],
    pages: &PageIndex,
    timeout: i64,
    global_override: Option<f64>,
) -> Result<Vec<Session>, PreprocessError> {
    let mut by_user: BTreeMap<&UserId, Vec<&LogRecord>> = BTreeMap::new();
    for (user, record) in records {
        by_user.entry(user).or_default().push(record);
    }

    let mut sessions = Vec::new();
    for (user, mut stream) in by_user {
        stream.sort_by_key(|r| r.timestamp);
        let mut current: Vec<Visit> = Vec::new();
        let mut last_time: Option<i64> = None;
        for record in stream {
            let page = pages
                .id(&record.url_path)
                .ok_or_else(|| PreprocessError::UnknownPage(record.url_path.clone()))?;
            if let Some(t) = last_time {
                if record.timestamp - t > timeout {
                    sessions.push(Session {
                        user: user.clone(),
                        visits: std::mem::take(&mut current),
                        incomplete: false,
                    });
                }
            }
            if let Some(prev) = current.last_mut() {
                prev.dwell = (record.timestamp - prev.entry_time) as f64;
            }
            current.push(Visit {
                page,
                entry_time: record.timestamp,
                dwell: 0.0,
                referrer: record.referrer.as_deref().and_then(|r| pages.id(r)),
                inferred: false,
            });
            last_time = Some(record.timestamp);
        }
        if !current.is_empty() {
            sessions.push(Session {
                user: user.clone(),
                visits: current,
                incomplete: false,
            });
        }
    }

    let (gap_sum, gap_count) = sessions
        .iter()
        .flat_map(|s| s.visits.iter().rev().skip(1))
        .fold((0.0, 0usize), |(sum, n), v| (sum + v.dwell, n + 1));
    let global = global_override.unwrap_or(if gap_count == 0 {
        0.0
    } else {
        gap_sum / gap_count as f64
    });

    for session in &mut sessions {
        let others = session.visits.len() - 1;
        let fill = if others == 0 {
            global
        } else {
            session.visits[..others].iter().map(|v| v.dwell).sum::<f64>() / others as f64
        };
        if let Some(last) = session.visits.last_mut() {
            last.dwell = fill;
        }
    }
    Ok(sessions)
}

/// Bridges gaps between consecutive visits that have no link in `graph` by
/// inserting the back-button path to a page that does link to the target.
pub fn complete_paths(session: &Session, graph: &SiteGraph) -> Session {
    let mut out: Vec<Visit> = Vec::with_capacity(session.visits.len());
    let mut incomplete = session.incomplete;
    for visit in &session.visits {
        let Some(prev) = out.last() else {
            out.push(visit.clone());
            continue;
        };
        let (p, q) = (prev.page, visit.page);
        if p == q || graph.linked(p, q) {
            out.push(visit.clone());
            continue;
        }
        let via_referrer = visit
            .referrer
            .filter(|&r| graph.linked(r, q))
            .and_then(|r| out.iter().rposition(|v| v.page == r));
        let anchor =
            via_referrer.or_else(|| out.iter().rposition(|v| graph.linked(v.page, q)));
        match anchor {
            Some(pos) => {
                let backtrack: Vec<usize> =
                    out[pos..out.len() - 1].iter().rev().map(|v| v.page).collect();
                for page in backtrack {
                    out.push(Visit {
                        page,
                        entry_time: visit.entry_time,
                        dwell: 0.0,
                        referrer: None,
                        inferred: true,
                    });
                }
            }
            None => incomplete = true,
        }
        out.push(visit.clone());
    }
    Session {
        user: session.user.clone(),
        visits: out,
        incomplete,
    }
}

/// Aggregates mean dwell and visit count per page, keeping pages with
/// `s >= alpha` and `c >= beta`. Output is ordered by page id.
pub fn page_stats(sessions: &[Session], pages: &PageIndex, alpha: f64, beta: usize) -> Vec<PageStats> {
    let mut totals: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for visit in sessions.iter().flat_map(|s| &s.visits) {
        let entry = totals.entry(visit.page).or_default();
        entry.0 += visit.dwell;
        entry.1 += 1;
    }
    totals
        .into_iter()
        .map(|(page_id, (dwell, c))| PageStats {
            page_id,
            url: pages
                .url(page_id)
                .map_or_else(|| crate::sitegraph::default_url(page_id), str::to_string),
            s: dwell / c as f64,
            c,
        })
        .filter(|p| p.s >= alpha && p.c >= beta)
        .collect()
}

pub fn to_transactions(sessions: &[Session]) -> Vec<Transaction> {
    sessions
        .iter()
        .map(|s| Transaction::from_sequence(s.pages()))
        .collect()
}
