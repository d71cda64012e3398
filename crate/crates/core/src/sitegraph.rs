//! Website link structure as a directed graph with a dense binary adjacency
//! matrix. Entry `(i, j)` is 1 when page `i` links to page `j`.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::log_ingest::LogRecord;

/// Errors raised while building, loading or querying a [`SiteGraph`].
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("page index {index} out of range for graph with {n} pages")]
    OutOfRange { index: usize, n: usize },
    #[error("self-loop edge on page {0}")]
    SelfLoop(usize),
    #[error("duplicate url {url:?} for pages {first} and {second}")]
    DuplicateUrl {
        url: String,
        first: usize,
        second: usize,
    },
    #[error("graph file line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Bidirectional mapping between page ids and normalized url paths.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PageIndex {
    urls: Vec<String>,
    ids: HashMap<String, usize>,
}

impl PageIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `url`, assigning the next free id on first sight.
    pub fn intern(&mut self, url: &str) -> usize {
        if let Some(&id) = self.ids.get(url) {
            return id;
        }
        let id = self.urls.len();
        self.urls.push(url.to_string());
        self.ids.insert(url.to_string(), id);
        id
    }

    pub fn id(&self, url: &str) -> Option<usize> {
        self.ids.get(url).copied()
    }

    pub fn url(&self, id: usize) -> Option<&str> {
        self.urls.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.urls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.urls.is_empty()
    }

    pub fn urls(&self) -> &[String] {
        &self.urls
    }
}

/// Url assigned to a page that has no explicit mapping.
pub fn default_url(page: usize) -> String {
    format!("/p{page}.html")
}

/// Directed site graph. Immutable once built; link insertion returns a new value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteGraph {
    n: usize,
    adjacency: Vec<bool>,
    pages: PageIndex,
}

impl SiteGraph {
    /// Builds a graph over `n` pages. Pages missing from `urls` get
    /// [`default_url`]. Duplicate edges collapse.
    pub fn build(
        n: usize,
        edges: &[(usize, usize)],
        urls: &BTreeMap<usize, String>,
    ) -> Result<Self, GraphError> {
        for &i in urls.keys() {
            if i >= n {
                return Err(GraphError::OutOfRange { index: i, n });
            }
        }
        let mut pages = PageIndex::new();
        for i in 0..n {
            let url = urls.get(&i).cloned().unwrap_or_else(|| default_url(i));
            if let Some(first) = pages.id(&url) {
                return Err(GraphError::DuplicateUrl {
                    url,
                    first,
                    second: i,
                });
            }
            pages.intern(&url);
        }
        Self::with_pages(pages, edges)
    }

    /// Builds a graph whose pages are exactly those of `pages`.
    pub fn with_pages(pages: PageIndex, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let n = pages.len();
        let mut adjacency = vec![false; n * n];
        for &(i, j) in edges {
            check(i, n)?;
            check(j, n)?;
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            adjacency[i * n + j] = true;
        }
        Ok(Self {
            n,
            adjacency,
            pages,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn pages(&self) -> &PageIndex {
        &self.pages
    }

    pub fn url(&self, page: usize) -> Option<&str> {
        self.pages.url(page)
    }

    pub fn has_link(&self, i: usize, j: usize) -> Result<bool, GraphError> {
        check(i, self.n)?;
        check(j, self.n)?;
        Ok(self.adjacency[i * self.n + j])
    }

    /// Unchecked variant for callers that already validated indices;
    /// out-of-range pages simply have no links.
    pub(crate) fn linked(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.adjacency[i * self.n + j]
    }

    pub fn out_degree(&self, i: usize) -> Result<usize, GraphError> {
        check(i, self.n)?;
        Ok(self.row(i).iter().filter(|&&x| x).count())
    }

    pub fn out_links(&self, i: usize) -> Result<Vec<usize>, GraphError> {
        check(i, self.n)?;
        Ok(self.successors(i).collect())
    }

    fn row(&self, i: usize) -> &[bool] {
        &self.adjacency[i * self.n..(i + 1) * self.n]
    }

    fn successors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i)
            .iter()
            .enumerate()
            .filter_map(|(j, &x)| x.then_some(j))
    }

    /// All edges in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| self.successors(i).map(move |j| (i, j)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&x| x).count()
    }

    /// Hop count of the shortest directed path, `None` when `j` is unreachable.
    pub fn shortest_path_len(&self, i: usize, j: usize) -> Result<Option<usize>, GraphError> {
        check(i, self.n)?;
        check(j, self.n)?;
        Ok(self.bfs(i)[j])
    }

    /// Hop counts from `source` to every page.
    pub fn bfs(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        if source >= self.n {
            return dist;
        }
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap_or(0) + 1;
            for v in self.successors(u) {
                if dist[v].is_none() {
                    dist[v] = Some(d);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn all_pairs_shortest(&self) -> Vec<Vec<Option<usize>>> {
        (0..self.n).map(|i| self.bfs(i)).collect()
    }

    /// Returns a copy of this graph with the extra edges set.
    pub fn with_links(&self, links: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut next = self.clone();
        for &(i, j) in links {
            check(i, self.n)?;
            check(j, self.n)?;
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            next.adjacency[i * self.n + j] = true;
        }
        Ok(next)
    }

    /// Infers the structure from logs. Pages are the requested paths in order
    /// of first appearance; an edge `r -> q` exists when some request for `q`
    /// names the known page `r` as referrer.
    pub fn infer_from_records(records: &[LogRecord]) -> Self {
        let mut pages = PageIndex::new();
        for r in records {
            pages.intern(&r.url_path);
        }
        let edges: Vec<(usize, usize)> = records
            .iter()
            .filter_map(|r| {
                let src = pages.id(r.referrer.as_deref()?)?;
                let dst = pages.id(&r.url_path)?;
                (src != dst).then_some((src, dst))
            })
            .collect();
        Self::with_pages(pages, &edges).expect("inferred edges are in range and loop-free")
    }

    /// Serializes to the plain-text graph format: page count, one `# url`
    /// line per page, then one `i j` line per edge.
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for (i, url) in self.pages.urls().iter().enumerate() {
            let _ = writeln!(out, "# url {i} {url}");
        }
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }
}

impl FromStr for SiteGraph {
    type Err = GraphError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let syntax = |line: usize, message: String| GraphError::Syntax { line, message };
        let mut n = None;
        let mut edges = Vec::new();
        let mut urls = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                let mut parts = comment.split_whitespace();
                if parts.next() == Some("url") {
                    let (Some(id), Some(path), None) = (parts.next(), parts.next(), parts.next())
                    else {
                        return Err(syntax(line_no, "expected `# url <i> <path>`".into()));
                    };
                    let id: usize = id
                        .parse()
                        .map_err(|_| syntax(line_no, format!("bad page index {id:?}")))?;
                    urls.insert(id, path.to_string());
                }
                continue;
            }
            if n.is_none() {
                n = Some(
                    line.parse::<usize>()
                        .map_err(|_| syntax(line_no, format!("bad page count {line:?}")))?,
                );
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(syntax(line_no, format!("expected `i j`, got {line:?}")));
            };
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| syntax(line_no, format!("bad page index {s:?}")))
            };
            edges.push((parse(a)?, parse(b)?));
        }
        let n = n.ok_or_else(|| syntax(0, "missing page count".into()))?;
        SiteGraph::build(n, &edges, &urls)
    }
}

fn check(index: usize, n: usize) -> Result<(), GraphError> {
    if index < n {
        Ok(())
    } else {
        Err(GraphError::OutOfRange { index, n })
    }
}
