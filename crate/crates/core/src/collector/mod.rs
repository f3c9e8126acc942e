//! Data collection: crawling, state graphs, page distance, input
//! derivation and manual-script ingestion.

pub mod crawl;
pub mod distance;
pub mod graph;
pub mod html;
pub mod script;

pub use crawl::{collect, collect_with, crawl, crawl_with};
pub use distance::{bodies_similar, levenshtein, pages_equal};
pub use graph::{Edge, StateGraph, StateNode};
pub use script::{ingest, ScriptIngest};
