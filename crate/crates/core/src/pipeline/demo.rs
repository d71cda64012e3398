use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sitegraph::SiteGraph;

/// A seeded site of `n_pages` pages: a random tree rooted at page 0 plus a
/// few extra cross links, so every page is reachable from the home page.
pub fn demo_site(n_pages: usize, seed: u64) -> SiteGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for child in 1..n_pages {
        edges.push((rng.gen_range(0..child), child));
    }
    if n_pages > 2 {
        for _ in 0..n_pages / 2 {
            let a = rng.gen_range(0..n_pages);
            let b = rng.gen_range(0..n_pages);
            if a != b {
                edges.push((a, b));
            }
        }
    }
    SiteGraph::build(n_pages, &edges, &Default::default()).expect("demo edges are in range")
}
