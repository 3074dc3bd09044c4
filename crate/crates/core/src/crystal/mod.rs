//! Topological crystals described by a finite quotient graph.
//!
//! A crystal is stored as its quotient graph: `n` orbit representatives
//! `x_1, ..., x_n` (the vertex order fixes the identification of
//! `l^2` on the quotient with `C^n`) and a list of oriented edges, each carrying
//! the lattice index `eta(e) = [t(e)] - [o(e)]` of the cell it jumps to.
//!
//! Oriented edges are kept in reversal pairs: position `2k` holds the
//! representative of unoriented edge `k` and position `2k + 1` its reversal.

mod builtin;
mod io;
mod perturbation;

pub use builtin::{builtin, BUILTIN_NAMES};
pub use io::{load_crystal, load_crystal_file, serialize_crystal};
pub use perturbation::{
    load_perturbation, load_perturbation_file, EdgeEntry, EdgeField, PerturbationSpec, PowerLaw,
    SiteEntry, SiteField,
};

use crate::error::{Error, Result};

/// Lattice cell `mu` in `Z^d`.
pub type Cell = Vec<i64>;

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: String,
    /// Periodic vertex measure `m0(x_j)`.
    pub m0: f64,
    /// Periodic potential `R0(x_j)`.
    pub r0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrientedEdge {
    pub origin: usize,
    pub terminus: usize,
    /// Lattice index `eta(e)`.
    pub index: Vec<i64>,
    pub m0: f64,
}

impl OrientedEdge {
    pub fn new(origin: usize, terminus: usize, index: Vec<i64>, m0: f64) -> Self {
        Self {
            origin,
            terminus,
            index,
            m0,
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            origin: self.terminus,
            terminus: self.origin,
            index: self.index.iter().map(|c| -c).collect(),
            m0: self.m0,
        }
    }

    fn label(&self) -> String {
        let index: Vec<String> = self.index.iter().map(|c| c.to_string()).collect();
        format!(
            "({},{},({}))",
            self.origin + 1,
            self.terminus + 1,
            index.join(",")
        )
    }
}

/// Unvalidated crystal data. Anything can be expressed here, including
/// graphs that violate the crystal invariants; [`validate`] reports them.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphData {
    pub dimension: usize,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<OrientedEdge>,
}

/// Validated quotient graph of a `d`-dimensional topological crystal.
///
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientGraph {
    dimension: usize,
    vertices: Vec<Vertex>,
    edges: Vec<OrientedEdge>,
    outgoing: Vec<Vec<usize>>,
}

impl QuotientGraph {
    /// Builds a graph from a full oriented edge list, checking every invariant.
    ///
    /// The stored edge order is normalized into reversal pairs, in order of
    /// first appearance.
    pub fn new(dimension: usize, vertices: Vec<Vertex>, edges: Vec<OrientedEdge>) -> Result<Self> {
        let data = GraphData {
            dimension,
            vertices,
            edges,
        };
        let diagnostics = validate(&data);
        if !diagnostics.is_empty() {
            return Err(Error::InvalidCrystal(diagnostics));
        }
        let pairs = pair_reversals(&data.edges).0;
        let mut edges = Vec::with_capacity(data.edges.len());
        for (a, b) in pairs {
            edges.push(data.edges[a].clone());
            edges.push(data.edges[b].clone());
        }
        Ok(Self::assemble(dimension, data.vertices, edges))
    }

    /// Builds a graph from one representative per unoriented edge; the
    /// reversals are generated.
    pub fn from_unoriented(
        dimension: usize,
        vertices: Vec<Vertex>,
        representatives: Vec<OrientedEdge>,
    ) -> Result<Self> {
        let mut edges = Vec::with_capacity(2 * representatives.len());
        for e in representatives {
            let rev = e.reversed();
            edges.push(e);
            edges.push(rev);
        }
        Self::new(dimension, vertices, edges)
    }

    fn assemble(dimension: usize, vertices: Vec<Vertex>, edges: Vec<OrientedEdge>) -> Self {
        let mut outgoing = vec![Vec::new(); vertices.len()];
        for (i, e) in edges.iter().enumerate() {
            outgoing[e.origin].push(i);
        }
        Self {
            dimension,
            vertices,
            edges,
            outgoing,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of orbit representatives `n`.
    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, j: usize) -> &Vertex {
        &self.vertices[j]
    }

    /// All oriented edges, in reversal pairs.
    pub fn edges(&self) -> &[OrientedEdge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &OrientedEdge {
        &self.edges[e]
    }

    pub fn num_unoriented_edges(&self) -> usize {
        self.edges.len() / 2
    }

    /// Index of the reversal of oriented edge `e`.
    pub fn reversal(&self, e: usize) -> usize {
        e ^ 1
    }

    /// Unoriented edge that oriented edge `e` belongs to.
    pub fn unoriented(&self, e: usize) -> usize {
        e / 2
    }

    /// Whether `e` is the representative orientation of its unoriented edge.
    pub fn is_representative(&self, e: usize) -> bool {
        e % 2 == 0
    }

    /// Oriented edges leaving vertex `j`.
    pub fn outgoing(&self, j: usize) -> &[usize] {
        &self.outgoing[j]
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    /// `deg_{m0}(x_j) = sum_{e in A_{x_j}} m0(e) / m0(x_j)`.
    pub fn degree(&self, j: usize) -> f64 {
        let m = self.vertices[j].m0;
        self.outgoing[j]
            .iter()
            .map(|&e| self.edges[e].m0 / m)
            .sum()
    }

    pub fn max_degree(&self) -> f64 {
        (0..self.num_vertices())
            .map(|j| self.degree(j))
            .fold(0.0, f64::max)
    }

    pub fn data(&self) -> GraphData {
        GraphData {
            dimension: self.dimension,
            vertices: self.vertices.clone(),
            edges: self.edges.clone(),
        }
    }

    /// Diagnostics for this graph; always empty for a constructed graph.
    pub fn validate(&self) -> Vec<String> {
        validate(&self.data())
    }

    /// Same graph with a different periodic measure and potential.
    pub fn with_measures(&self, vertex_m0: &[f64], edge_m0: &[f64], r0: &[f64]) -> Result<Self> {
        if vertex_m0.len() != self.num_vertices()
            || r0.len() != self.num_vertices()
            || edge_m0.len() != self.num_unoriented_edges()
        {
            return Err(Error::InvalidArgument(
                "measure/potential arrays do not match the graph".into(),
            ));
        }
        let vertices = self
            .vertices
            .iter()
            .zip(vertex_m0.iter().zip(r0))
            .map(|(v, (&m0, &r0))| Vertex {
                id: v.id.clone(),
                m0,
                r0,
            })
            .collect();
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(i, e)| OrientedEdge {
                m0: edge_m0[i / 2],
                ..e.clone()
            })
            .collect();
        Self::new(self.dimension, vertices, edges)
    }
}

/// Greedy pairing of each oriented edge with an unused reversal. Returns the
/// pairs (first appearance first) and the edges left without a partner.
fn pair_reversals(edges: &[OrientedEdge]) -> (Vec<(usize, usize)>, Vec<usize>) {
    let mut partner: Vec<Option<usize>> = vec![None; edges.len()];
    let mut pairs = Vec::new();
    let mut orphans = Vec::new();
    for i in 0..edges.len() {
        if partner[i].is_some() {
            continue;
        }
        let want = edges[i].reversed();
        let found = (0..edges.len())
            .find(|&j| j != i && partner[j].is_none() && edges[j] == want);
        match found {
            Some(j) => {
                partner[i] = Some(j);
                partner[j] = Some(i);
                pairs.push((i, j));
            }
            None => orphans.push(i),
        }
    }
    (pairs, orphans)
}

/// One diagnostic per violated invariant; empty iff the data describes a
/// valid crystal.
pub fn validate(data: &GraphData) -> Vec<String> {
    let mut out = Vec::new();
    if data.dimension == 0 {
        out.push("dimension must be at least 1".to_string());
    }
    if data.vertices.is_empty() {
        out.push("graph must have at least one vertex".to_string());
    }
    for (k, v) in data.vertices.iter().enumerate() {
        if data.vertices[..k].iter().any(|w| w.id == v.id) {
            out.push(format!("duplicate vertex id {}", v.id));
        }
        if !(v.m0 > 0.0) || !v.m0.is_finite() {
            out.push(format!("vertex {}: measure must be strictly positive", v.id));
        }
        if !v.r0.is_finite() {
            out.push(format!("vertex {}: potential must be finite", v.id));
        }
    }
    let n = data.vertices.len();
    let mut structurally_ok = true;
    for (k, e) in data.edges.iter().enumerate() {
        if e.origin >= n || e.terminus >= n {
            out.push(format!("edge {}: vertex index out of range", k + 1));
            structurally_ok = false;
            continue;
        }
        if e.index.len() != data.dimension {
            out.push(format!(
                "edge {}: index has length {}, expected {}",
                e.label(),
                e.index.len(),
                data.dimension
            ));
            structurally_ok = false;
        }
        if !(e.m0 > 0.0) || !e.m0.is_finite() {
            out.push(format!("edge {}: measure must be strictly positive", e.label()));
        }
    }
    if structurally_ok {
        let (_, orphans) = pair_reversals(&data.edges);
        for i in orphans {
            let e = &data.edges[i];
            let rev = e.reversed();
            let near = data.edges.iter().any(|f| {
                f.origin == rev.origin && f.terminus == rev.terminus && f.index == rev.index
            });
            if near {
                out.push(format!(
                    "edge {}: reversal has a different measure",
                    e.label()
                ));
            } else {
                out.push(format!("edge {} has no reversal", e.label()));
            }
        }
    }
    out
}
