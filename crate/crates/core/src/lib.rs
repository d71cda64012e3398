//! Web usage mining toolkit: parses access logs, clusters pages by dwell
//! time and clicks, mines frequent traversal itemsets and proposes new links
//! under an out-degree cap.

pub mod apriori;
pub mod clustering;
pub mod log_ingest;
pub mod pipeline;
pub mod preprocess;
pub mod reorganizer;
pub mod sitegraph;
