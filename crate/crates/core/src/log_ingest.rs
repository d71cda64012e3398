//! Common / Combined Log Format parsing and a seeded synthetic log generator.

use std::io::BufRead;

use chrono::{DateTime, FixedOffset, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sitegraph::SiteGraph;

const TIMESTAMP_FORMAT: &str = "%d/%b/%Y:%H:%M:%S %z";

/// One parsed access-log line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub ip: String,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub method: String,
    /// Normalized path: no query string, no trailing slash except for `/`.
    pub url_path: String,
    pub status: u16,
    pub bytes: Option<u64>,
    pub referrer: Option<String>,
    pub user_agent: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub parsed_count: usize,
    pub skipped_count: usize,
    /// 1-based line number of the first malformed line.
    pub first_error_line: Option<usize>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed log line ({reason}): {line:?}")]
pub struct ParseError {
    pub reason: &'static str,
    pub line: String,
}

/// Parses one Common or Combined Log Format line.
pub fn parse_line(line: &str) -> Result<LogRecord, ParseError> {
    let fail = |reason| ParseError {
        reason,
        line: line.to_string(),
    };
    let mut cursor = Fields::new(line.trim_end_matches(['\r', '\n']));

    let ip = cursor.bare().ok_or_else(|| fail("missing host"))?;
    let _ident = cursor.bare().ok_or_else(|| fail("missing ident"))?;
    let _user = cursor.bare().ok_or_else(|| fail("missing user"))?;
    let stamp = cursor.bracketed().ok_or_else(|| fail("missing timestamp"))?;
    let request = cursor.quoted().ok_or_else(|| fail("missing request"))?;
    let status = cursor.bare().ok_or_else(|| fail("missing status"))?;
    let bytes = cursor.bare().ok_or_else(|| fail("missing size"))?;

    let (referrer, user_agent) = if cursor.at_end() {
        (None, None)
    } else {
        let referrer = cursor.quoted().ok_or_else(|| fail("bad referrer"))?;
        let agent = cursor.quoted().ok_or_else(|| fail("bad user agent"))?;
        (Some(referrer), Some(agent))
    };
    if !cursor.at_end() {
        return Err(fail("trailing fields"));
    }

    let timestamp = DateTime::parse_from_str(&stamp, TIMESTAMP_FORMAT)
        .map_err(|_| fail("unparseable timestamp"))?
        .timestamp();
    if timestamp <= 0 {
        return Err(fail("timestamp before epoch"));
    }

    let mut parts = request.split_whitespace();
    let method = parts.next().ok_or_else(|| fail("empty request"))?;
    let target = parts.next().ok_or_else(|| fail("request without target"))?;
    let url_path = normalize_url(target).ok_or_else(|| fail("bad request target"))?;

    let status: u16 = status.parse().map_err(|_| fail("non-numeric status"))?;
    if !(100..=599).contains(&status) {
        return Err(fail("status out of range"));
    }
    let bytes = match bytes {
        "-" => None,
        b => Some(b.parse().map_err(|_| fail("non-numeric size"))?),
    };

    let referrer = match referrer.as_deref() {
        None | Some("-") | Some("") => None,
        Some(r) => normalize_url(r),
    };
    let user_agent = user_agent.filter(|a| a != "-" && !a.is_empty());

    Ok(LogRecord {
        ip: ip.to_string(),
        timestamp,
        method: method.to_string(),
        url_path,
        status,
        bytes,
        referrer,
        user_agent,
    })
}

/// Reduces an absolute URL or a request target to a normalized path.
/// Returns `None` for targets that are neither.
pub fn normalize_url(raw: &str) -> Option<String> {
    let path = if let Some(scheme_end) = raw.find("://") {
        let rest = &raw[scheme_end + 3..];
        match rest.find(['/', '?', '#']) {
            Some(i) => &rest[i..],
            None => "/",
        }
    } else {
        raw
    };
    let path = path.split(['?', '#']).next().unwrap_or("");
    if path.is_empty() && raw.contains("://") {
        return Some("/".to_string());
    }
    if !path.starts_with('/') {
        return None;
    }
    let trimmed = path.trim_end_matches('/');
    Some(if trimmed.is_empty() { "/" } else { trimmed }.to_string())
}

/// Renders a record as a Combined Log Format line (UTC).
pub fn format_record(record: &LogRecord) -> String {
    let stamp = Utc
        .timestamp_opt(record.timestamp, 0)
        .single()
        .map(|t| t.with_timezone(&FixedOffset::east_opt(0).unwrap()))
        .map(|t| t.format(TIMESTAMP_FORMAT).to_string())
        .unwrap_or_default();
    let bytes = record
        .bytes
        .map_or_else(|| "-".to_string(), |b| b.to_string());
    format!(
        "{} - - [{}] \"{} {} HTTP/1.1\" {} {} \"{}\" \"{}\"",
        record.ip,
        stamp,
        record.method,
        record.url_path,
        record.status,
        bytes,
        record.referrer.as_deref().unwrap_or("-"),
        escape(record.user_agent.as_deref().unwrap_or("-")),
    )
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Parses every line, skipping and counting malformed ones.
pub fn parse_lines<I, S>(lines: I) -> (Vec<LogRecord>, IngestReport)
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut records = Vec::new();
    let mut report = IngestReport::default();
    for (idx, line) in lines.into_iter().enumerate() {
        match parse_line(line.as_ref()) {
            Ok(record) => {
                records.push(record);
                report.parsed_count += 1;
            }
            Err(_) => {
                report.skipped_count += 1;
                report.first_error_line.get_or_insert(idx + 1);
            }
        }
    }
    (records, report)
}

/// Reads and parses a whole log stream. Only I/O failures are errors.
pub fn parse_stream<R: BufRead>(reader: R) -> std::io::Result<(Vec<LogRecord>, IngestReport)> {
    let lines = reader.lines().collect::<Result<Vec<_>, _>>()?;
    Ok(parse_lines(lines))
}

/// 2000-10-10T00:00:00Z
const SYNTHETIC_EPOCH: i64 = 971_136_000;
const SYNTHETIC_HOST: &str = "http://www.example.com";

/// Emits `n_users * steps_per_user` Combined-format lines from seeded random
/// walks over `graph`, starting at page 0.
///
/// Each step dwells on a page for a page-dependent time. Occasionally a user
/// takes a long break (longer than the default session timeout) and re-enters
/// at page 0. At a dead end the user presses back (served from cache, so
/// unlogged) until a page with links is reached and follows one of them;
/// with nowhere to go back to they restart at page 0. Entries carry no
/// referrer, every other step names the page the link was followed from.
pub fn generate_synthetic_logs(
    graph: &SiteGraph,
    n_users: usize,
    steps_per_user: usize,
    rng_seed: u64,
) -> Vec<String> {
    let mut lines = Vec::with_capacity(n_users * steps_per_user);
    if graph.is_empty() {
        return lines;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let page_dwell: Vec<i64> = (0..graph.len())
        .map(|_| rng.gen_range(5..=240))
        .collect();
    let adjacency: Vec<Vec<usize>> = (0..graph.len())
        .map(|i| graph.out_links(i).unwrap_or_default())
        .collect();

    for user in 0..n_users {
        let ip = format!("10.{}.{}.{}", (user >> 16) & 0xff, (user >> 8) & 0xff, user & 0xff);
        let agent = format!("Mozilla/5.0 (synthetic; user {user})");
        let mut time = SYNTHETIC_EPOCH + rng.gen_range(0..86_400);
        let mut page = 0usize;
        let mut previous: Option<usize> = None;
        let mut history: Vec<usize> = Vec::new();
        for _ in 0..steps_per_user {
            let record = LogRecord {
                ip: ip.clone(),
                timestamp: time,
                method: "GET".into(),
                url_path: graph.url(page).unwrap_or("/").to_string(),
                status: 200,
                bytes: Some(rng.gen_range(200..20_000)),
                referrer: previous.map(|p| format!("{SYNTHETIC_HOST}{}", graph.url(p).unwrap_or("/"))),
                user_agent: Some(agent.clone()),
            };
            lines.push(format_record(&record));

            let base = page_dwell[page];
            time += (base + rng.gen_range(-base / 2..=base / 2)).max(1);
            if rng.gen_ratio(1, 15) {
                time += rng.gen_range(1_900..7_200);
                page = 0;
                previous = None;
                history.clear();
                continue;
            }
            let mut from = page;
            while adjacency[from].is_empty() {
                match history.pop() {
                    Some(back) => {
                        from = back;
                        time += rng.gen_range(1..=5);
                    }
                    None => break,
                }
            }
            let links = &adjacency[from];
            if links.is_empty() {
                page = 0;
                previous = None;
            } else {
                if from == page {
                    history.push(page);
                }
                previous = Some(from);
                page = links[rng.gen_range(0..links.len())];
            }
        }
    }
    lines
}

/// Whitespace-separated field scanner understanding `[..]` and `".."`
/// (with backslash escapes).
struct Fields<'a> {
    rest: &'a str,
}

impl<'a> Fields<'a> {
    fn new(line: &'a str) -> Self {
        Self { rest: line }
    }

    fn skip_space(&mut self) {
        self.rest = self.rest.trim_start_matches(' ');
    }

    fn at_end(&mut self) -> bool {
        self.skip_space();
        self.rest.is_empty()
    }

    fn bare(&mut self) -> Option<&'a str> {
        self.skip_space();
        if self.rest.is_empty() || self.rest.starts_with(['"', '[']) {
            return None;
        }
        let end = self.rest.find(' ').unwrap_or(self.rest.len());
        let (field, rest) = self.rest.split_at(end);
        self.rest = rest;
        Some(field)
    }

    fn bracketed(&mut self) -> Option<String> {
        self.skip_space();
        let body = self.rest.strip_prefix('[')?;
        let end = body.find(']')?;
        self.rest = &body[end + 1..];
        Some(body[..end].to_string())
    }

    fn quoted(&mut self) -> Option<String> {
        self.skip_space();
        let body = self.rest.strip_prefix('"')?;
        let mut out = String::new();
        let mut chars = body.char_indices();
        while let Some((i, ch)) = chars.next() {
            match ch {
                '\\' => out.push(chars.next()?.1),
                '"' => {
                    self.rest = &body[i + 1..];
                    if !self.rest.is_empty() && !self.rest.starts_with(' ') {
                        return None;
                    }
                    return Some(out);
                }
                c => out.push(c),
            }
        }
        None
    }
}
