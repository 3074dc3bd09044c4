use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{OrientedEdge, QuotientGraph, Vertex};
use crate::error::{Error, Result};

/// Vertex reference in a definition file: position in `vertices` or its id.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum VertexRef {
    Index(usize),
    Id(String),
}

impl VertexRef {
    pub(crate) fn resolve(&self, ids: &[String], field: &str) -> Result<usize> {
        match self {
            VertexRef::Index(i) if *i < ids.len() => Ok(*i),
            VertexRef::Index(i) => Err(Error::InvalidCrystal(vec![format!(
                "{field}: vertex index {i} out of range"
            )])),
            VertexRef::Id(id) => ids.iter().position(|v| v == id).ok_or_else(|| {
                Error::InvalidCrystal(vec![format!("{field}: unknown vertex id `{id}`")])
            }),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexRecord {
    id: String,
    m0: f64,
    #[serde(default)]
    r0: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    from: VertexRef,
    to: VertexRef,
    index: Vec<i64>,
    m0: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CrystalDocument {
    dimension: usize,
    vertices: Vec<VertexRecord>,
    edges: Vec<EdgeRecord>,
}

/// Parses a crystal definition document listing one representative per
/// unoriented edge, and materializes both orientations.
pub fn load_crystal(text: &str) -> Result<QuotientGraph> {
    let doc: CrystalDocument = serde_json::from_str(text)?;
    let ids: Vec<String> = doc.vertices.iter().map(|v| v.id.clone()).collect();
    let vertices = doc
        .vertices
        .into_iter()
        .map(|v| Vertex {
            id: v.id,
            m0: v.m0,
            r0: v.r0,
        })
        .collect();
    let mut reps = Vec::with_capacity(doc.edges.len());
    for (k, e) in doc.edges.into_iter().enumerate() {
        let origin = e.from.resolve(&ids, &format!("edges[{k}].from"))?;
        let terminus = e.to.resolve(&ids, &format!("edges[{k}].to"))?;
        reps.push(OrientedEdge::new(origin, terminus, e.index, e.m0));
    }
    QuotientGraph::from_unoriented(doc.dimension, vertices, reps)
}

pub fn load_crystal_file(path: impl AsRef<Path>) -> Result<QuotientGraph> {
    let text = std::fs::read_to_string(path)?;
    load_crystal(&text)
}

/// Inverse of [`load_crystal`]: writes the representative orientation of
/// every unoriented edge.
pub fn serialize_crystal(g: &QuotientGraph) -> String {
    let doc = CrystalDocument {
        dimension: g.dimension(),
        vertices: g
            .vertices()
            .iter()
            .map(|v| VertexRecord {
                id: v.id.clone(),
                m0: v.m0,
                r0: v.r0,
            })
            .collect(),
        edges: g
            .edges()
            .iter()
            .step_by(2)
            .map(|e| EdgeRecord {
                from: VertexRef::Id(g.vertex(e.origin).id.clone()),
                to: VertexRef::Id(g.vertex(e.terminus).id.clone()),
                index: e.index.clone(),
                m0: e.m0,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("crystal document serializes")
}
