use std::io::{BufRead, Write};

use super::{GraphError, KnowledgeGraph, NodeRole, Result};
use crate::numerics::SparseMatrix;

/// Node block and adjacency, as read back from an edge-list file.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub labels: Vec<String>,
    pub roles: Vec<NodeRole>,
    pub adjacency: SparseMatrix,
}

impl From<&KnowledgeGraph> for EdgeList {
    fn from(g: &KnowledgeGraph) -> Self {
        EdgeList {
            labels: g.labels().to_vec(),
            roles: g.roles().to_vec(),
            adjacency: g.adjacency().clone(),
        }
    }
}

/// Writes `node<TAB>label<TAB>role` lines, then one `src<TAB>dst<TAB>weight`
/// line per stored entry in row-major order.
pub fn write_edge_list<W: Write>(list: &EdgeList, mut w: W) -> Result<()> {
    for (label, role) in list.labels.iter().zip(&list.roles) {
        if label.contains(['\t', '\n']) {
            return Err(GraphError::Format {
                line: 0,
                message: format!("label `{label}` contains a tab or newline"),
            });
        }
        writeln!(w, "node\t{label}\t{role}")?;
    }
    for (i, j, v) in list.adjacency.triplets() {
        writeln!(w, "{}\t{}\t{v:?}", list.labels[i], list.labels[j])?;
    }
    Ok(())
}

pub fn read_edge_list<R: BufRead>(r: R) -> Result<EdgeList> {
    let mut labels = Vec::new();
    let mut roles = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut triplets = Vec::new();
    let mut in_nodes = true;
    for (n, line) in r.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let err = |message: String| GraphError::Format { line: line_no, message };
        if fields.len() != 3 {
            return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        if in_nodes && fields[0] == "node" {
            let role: NodeRole = fields[2].parse().map_err(err)?;
            if index.insert(fields[1].to_string(), labels.len()).is_some() {
                return Err(GraphError::DuplicateLabel(fields[1].to_string()));
            }
            labels.push(fields[1].to_string());
            roles.push(role);
            continue;
        }
        in_nodes = false;
        let lookup = |l: &str| index.get(l).copied().ok_or_else(|| err(format!("unknown node `{l}`")));
        let src = lookup(fields[0])?;
        let dst = lookup(fields[1])?;
        let w: f64 = fields[2]
            .parse()
            .map_err(|_| err(format!("bad weight `{}`", fields[2])))?;
        triplets.push((src, dst, w));
    }
    let adjacency = SparseMatrix::from_triplets(labels.len(), triplets)?;
    Ok(EdgeList {
        labels,
        roles,
        adjacency,
    })
}
