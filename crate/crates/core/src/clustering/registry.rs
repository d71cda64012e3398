use std::collections::BTreeMap;

use super::{ClusterAlgorithm, ClusterError, FarthestFirst, KMeans, KMeansParams};

/// Settings shared by algorithm factories. Deterministic algorithms ignore them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AlgorithmOptions {
    pub kmeans: KMeansParams,
}

type Factory = fn(&AlgorithmOptions) -> Box<dyn ClusterAlgorithm>;

/// Name-keyed table of clustering strategies.
pub struct ClusterRegistry {
    entries: BTreeMap<&'static str, Factory>,
}

impl ClusterRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Registry holding `farthest_first` and `kmeans`.
    pub fn with_builtins() -> Self {
        let mut registry = Self::empty();
        registry.register(FarthestFirst::NAME, |_| Box::new(FarthestFirst));
        registry.register(KMeans::NAME, |opts| Box::new(KMeans::new(opts.kmeans)));
        registry
    }

    /// Adds or replaces a strategy.
    pub fn register(&mut self, name: &'static str, factory: Factory) {
        self.entries.insert(name, factory);
    }

    pub fn create(
        &self,
        name: &str,
        options: &AlgorithmOptions,
    ) -> Result<Box<dyn ClusterAlgorithm>, ClusterError> {
        self.entries
            .get(name)
            .map(|factory| factory(options))
            .ok_or_else(|| ClusterError::UnknownAlgorithm(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }
}

impl Default for ClusterRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}
