//! JSON output with reproducibility metadata.

use serde::{Deserialize, Serialize};

use multivariance_core::structure::{DependencyGraph, Edge, GraphMetadata, Node};
use multivariance_core::{Dataset, Error, Psi, Result};

use crate::ingest::describe_groups;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Version of the graph JSON layout.
pub const GRAPH_SCHEMA_VERSION: u32 = 1;

/// Fields present in every JSON document written by the tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool_version: String,
    pub seed: Option<u64>,
    /// Distance function spellings, one global or one per variable.
    pub psi: Vec<String>,
    /// Group layout in `name:first-last` form.
    pub groups: String,
}

impl Metadata {
    pub fn new(data: &Dataset, psis: &[Psi], seed: Option<u64>) -> Self {
        Metadata {
            tool_version: TOOL_VERSION.to_string(),
            seed,
            psi: psis.iter().map(Psi::to_string).collect(),
            groups: describe_groups(data),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report<'a, T: Serialize> {
    #[serde(flatten)]
    pub metadata: &'a Metadata,
    pub result: &'a T,
}

pub fn report_json<T: Serialize>(metadata: &Metadata, result: &T) -> String {
    serde_json::to_string_pretty(&Report { metadata, result }).expect("serializable report")
}

/// Graph JSON layout: `schema_version`, the common metadata, `nodes`,
/// `edges` and `detection` (options, sample size, variable count, tests,
/// clusters, warnings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub schema_version: u32,
    #[serde(flatten)]
    pub metadata: Metadata,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub detection: GraphMetadata,
}

pub fn to_json(graph: &DependencyGraph, metadata: &Metadata) -> String {
    let doc = GraphDocument {
        schema_version: GRAPH_SCHEMA_VERSION,
        metadata: metadata.clone(),
        nodes: graph.nodes.clone(),
        edges: graph.edges.clone(),
        detection: graph.metadata.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("serializable graph")
}

pub fn parse_graph(text: &str) -> Result<(DependencyGraph, Metadata)> {
    let doc: GraphDocument =
        serde_json::from_str(text).map_err(|e| Error::Data(format!("invalid graph JSON: {e}")))?;
    if doc.schema_version != GRAPH_SCHEMA_VERSION {
        return Err(Error::Data(format!("unsupported graph schema version {}", doc.schema_version)));
    }
    let graph = DependencyGraph { nodes: doc.nodes, edges: doc.edges, metadata: doc.detection };
    Ok((graph, doc.metadata))
}
