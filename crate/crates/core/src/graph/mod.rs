//! Knowledge-graph construction over class descriptors.
//!
//! Nodes carry a feature vector (a phrase embedding, a verb or noun
//! embedding, or a mean visual feature). Each node is joined to its `top_n`
//! most cosine-similar peers, the edge set is made symmetric by union, and
//! the propagation operator is the symmetrically normalised `I + A`.

mod build;
mod edgelist;
mod normalize;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numerics::{DenseMatrix, NumericsError, SparseMatrix};

pub use build::{build_bipartite_adjacency, build_fc_adjacency, cosine_similarity};
pub use edgelist::{read_edge_list, write_edge_list, EdgeList};
pub use normalize::{normalize_adjacency, NormalizedAdjacency};

pub type Result<T> = std::result::Result<T, GraphError>;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("node `{node}` has a zero-norm feature vector")]
    ZeroNorm { node: String },

    #[error("top_n = {top_n} but only {available} candidate neighbours exist")]
    TopNTooLarge { top_n: usize, available: usize },

    #[error("top_n must be at least 1")]
    ZeroTopN,

    #[error("graph needs at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },

    #[error("bipartite graph has an empty partition")]
    EmptyPartition,

    #[error("adjacency is not symmetric at ({row}, {col})")]
    Asymmetric { row: usize, col: usize },

    #[error("adjacency has a diagonal entry at node {0}; self-loops come from normalisation only")]
    DiagonalEntry(usize),

    #[error("node {node} has weighted degree {degree} in I + A; normalisation needs positive degrees")]
    NonPositiveDegree { node: usize, degree: f64 },

    #[error("duplicate node label `{0}`")]
    DuplicateLabel(String),

    #[error("{what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("edge list line {line}: {message}")]
    Format { line: usize, message: String },

    #[error(transparent)]
    Numerics(#[from] NumericsError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRole {
    Train,
    Test,
    /// Classes appended from an external dataset.
    Auxiliary,
}

impl NodeRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeRole::Train => "train",
            NodeRole::Test => "test",
            NodeRole::Auxiliary => "auxiliary",
        }
    }
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeRole {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "train" => Ok(NodeRole::Train),
            "test" => Ok(NodeRole::Test),
            "auxiliary" => Ok(NodeRole::Auxiliary),
            other => Err(format!("unknown node role `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphMode {
    FullyConnected,
    /// Edges only between auxiliary nodes and the rest.
    Bipartite,
}

impl FromStr for GraphMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fc" | "fully-connected" => Ok(GraphMode::FullyConnected),
            "bipartite" => Ok(GraphMode::Bipartite),
            other => Err(format!("unknown graph mode `{other}` (expected fc or bipartite)")),
        }
    }
}

impl fmt::Display for GraphMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphMode::FullyConnected => "fc",
            GraphMode::Bipartite => "bipartite",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstructionMeta {
    pub top_n: usize,
    pub mode: GraphMode,
}

/// Labelled nodes, their descriptors and the symmetric cosine adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    labels: Vec<String>,
    roles: Vec<NodeRole>,
    features: DenseMatrix,
    adjacency: SparseMatrix,
    meta: ConstructionMeta,
    index: HashMap<String, usize>,
}

impl KnowledgeGraph {
    /// Builds the adjacency from `features`. In bipartite mode the two sides
    /// are the auxiliary nodes and everything else.
    pub fn build(
        labels: Vec<String>,
        roles: Vec<NodeRole>,
        features: DenseMatrix,
        meta: ConstructionMeta,
    ) -> Result<Self> {
        let n = labels.len();
        if roles.len() != n {
            return Err(GraphError::LengthMismatch {
                what: "node roles",
                expected: n,
                got: roles.len(),
            });
        }
        if features.rows() != n {
            return Err(GraphError::LengthMismatch {
                what: "feature rows",
                expected: n,
                got: features.rows(),
            });
        }
        let mut index = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(GraphError::DuplicateLabel(l.clone()));
            }
        }
        let adjacency = match meta.mode {
            GraphMode::FullyConnected => build_fc_adjacency(&features, meta.top_n),
            GraphMode::Bipartite => {
                let side: Vec<bool> = roles.iter().map(|r| *r == NodeRole::Auxiliary).collect();
                build_bipartite_adjacency(&features, &side, meta.top_n)
            }
        }
        .map_err(|e| match e {
            GraphError::ZeroNorm { node } => GraphError::ZeroNorm {
                node: node
                    .strip_prefix("row ")
                    .and_then(|r| r.parse::<usize>().ok())
                    .map_or(node.clone(), |r| labels[r].clone()),
            },
            other => other,
        })?;
        Ok(Self {
            labels,
            roles,
            features,
            adjacency,
            meta,
            index,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn roles(&self) -> &[NodeRole] {
        &self.roles
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    pub fn meta(&self) -> ConstructionMeta {
        self.meta
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn node_index(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn nodes_with_role(&self, role: NodeRole) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.roles[i] == role).collect()
    }

    pub fn role_counts(&self) -> [(NodeRole, usize); 3] {
        [NodeRole::Train, NodeRole::Test, NodeRole::Auxiliary].map(|r| (r, self.nodes_with_role(r).len()))
    }

    /// `(degree, node count)` pairs in ascending degree order.
    pub fn degree_histogram(&self) -> Vec<(usize, usize)> {
        let mut hist = std::collections::BTreeMap::new();
        for i in 0..self.node_count() {
            *hist.entry(self.adjacency.row_nnz(i)).or_insert(0) += 1;
        }
        hist.into_iter().collect()
    }

    /// New graph with extra nodes; the adjacency is rebuilt over all nodes
    /// with the same construction settings.
    pub fn append_nodes(&self, labels: Vec<String>, roles: Vec<NodeRole>, features: &DenseMatrix) -> Result<Self> {
        if labels.is_empty() {
            return Ok(self.clone());
        }
        if features.cols() != self.features.cols() {
            return Err(GraphError::LengthMismatch {
                what: "appended feature dimension",
                expected: self.features.cols(),
                got: features.cols(),
            });
        }
        if features.rows() != labels.len() {
            return Err(GraphError::LengthMismatch {
                what: "appended feature rows",
                expected: labels.len(),
                got: features.rows(),
            });
        }
        let mut all_labels = self.labels.clone();
        all_labels.extend(labels);
        let mut all_roles = self.roles.clone();
        all_roles.extend(roles);
        let mut data = self.features.as_slice().to_vec();
        data.extend_from_slice(features.as_slice());
        let all_features = DenseMatrix::from_vec(all_labels.len(), self.features.cols(), data)?;
        Self::build(all_labels, all_roles, all_features, self.meta)
    }

    /// Content digest over labels, roles, features and adjacency.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (l, r) in self.labels.iter().zip(&self.roles) {
            h.update(l.as_bytes());
            h.update([0u8]);
            h.update(r.as_str().as_bytes());
            h.update([0u8]);
        }
        h.update(self.features.to_binary_bytes());
        hash_sparse(&mut h, &self.adjacency);
        hex::encode(h.finalize())
    }

    pub fn normalized(&self) -> Result<NormalizedAdjacency> {
        let mut norm = normalize_adjacency(&self.adjacency)?;
        norm.source_fingerprint = self.fingerprint();
        Ok(norm)
    }
}

pub(crate) fn hash_sparse(h: &mut Sha256, s: &SparseMatrix) {
    h.update((s.dim() as u64).to_le_bytes());
    for (i, j, v) in s.triplets() {
        h.update((i as u64).to_le_bytes());
        h.update((j as u64).to_le_bytes());
        h.update(v.to_le_bytes());
    }
}
