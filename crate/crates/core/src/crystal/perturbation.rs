//! Decaying perturbations of the periodic measure and potential.
//!
//! Every field is a finite table plus an optional power-law envelope; where
//! both are present their values add. Power laws are `A (1 + |mu|)^(-alpha)`
//! with the Euclidean norm of the cell, optionally scaled per vertex (or per
//! unoriented edge).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::io::VertexRef;
use super::{Cell, QuotientGraph};
use crate::error::{Error, Result};

pub(crate) fn cell_norm(cell: &[i64]) -> f64 {
    cell.iter()
        .map(|&c| (c as f64) * (c as f64))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub amplitude: f64,
    pub exponent: f64,
    /// Per-vertex (or per-edge) scale factors; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

impl PowerLaw {
    pub fn new(amplitude: f64, exponent: f64) -> Self {
        Self {
            amplitude,
            exponent,
            coefficients: None,
        }
    }

    pub fn radial(&self, cell: &[i64]) -> f64 {
        self.amplitude * (1.0 + cell_norm(cell)).powf(-self.exponent)
    }

    pub fn coefficient(&self, k: usize) -> f64 {
        self.coefficients
            .as_ref()
            .map_or(1.0, |c| c.get(k).copied().unwrap_or(0.0))
    }

    pub fn eval(&self, cell: &[i64], k: usize) -> f64 {
        self.radial(cell) * self.coefficient(k)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.coefficients
            .as_ref()
            .map_or(1.0, |c| c.iter().fold(0.0, |m, x| f64::max(m, x.abs())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteEntry {
    pub cell: Cell,
    pub vertex: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeEntry {
    pub cell: Cell,
    /// Unoriented edge, numbered as in the crystal definition.
    pub edge: usize,
    pub value: f64,
}

/// Function on vertices `mu x_j`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiteField {
    pub table: Vec<SiteEntry>,
    pub envelope: Option<PowerLaw>,
}

impl SiteField {
    pub fn table(entries: Vec<SiteEntry>) -> Self {
        Self {
            table: entries,
            envelope: None,
        }
    }

    pub fn envelope(law: PowerLaw) -> Self {
        Self {
            table: Vec::new(),
            envelope: Some(law),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty() && self.envelope.is_none()
    }

    pub fn value(&self, cell: &[i64], vertex: usize) -> f64 {
        let tab: f64 = self
            .table
            .iter()
            .filter(|e| e.vertex == vertex && e.cell == cell)
            .map(|e| e.value)
            .sum();
        tab + self.envelope.as_ref().map_or(0.0, |p| p.eval(cell, vertex))
    }
}

/// Function on unoriented edge instances. An instance is named by the
/// unoriented edge `k` and the cell of the origin of its representative
/// orientation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeField {
    pub table: Vec<EdgeEntry>,
    pub envelope: Option<PowerLaw>,
}

impl EdgeField {
    pub fn table(entries: Vec<EdgeEntry>) -> Self {
        Self {
            table: entries,
            envelope: None,
        }
    }

    pub fn envelope(law: PowerLaw) -> Self {
        Self {
            table: Vec::new(),
            envelope: Some(law),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty() && self.envelope.is_none()
    }

    pub fn value(&self, cell: &[i64], edge: usize) -> f64 {
        let tab: f64 = self
            .table
            .iter()
            .filter(|e| e.edge == edge && e.cell == cell)
            .map(|e| e.value)
            .sum();
        tab + self.envelope.as_ref().map_or(0.0, |p| p.eval(cell, edge))
    }
}

/// Perturbation `(m, R)` of a periodic crystal `(m0, R0)`:
/// `m = m0 + deltas`, `R = R0 + R_s + R_l`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerturbationSpec {
    pub potential_short: SiteField,
    /// Long-range radial profile `R_l`.
    pub potential_long: Option<PowerLaw>,
    pub vertex_measure_delta: SiteField,
    pub edge_measure_delta: EdgeField,
}

impl PerturbationSpec {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.potential_short.is_empty()
            && self.potential_long.is_none()
            && self.vertex_measure_delta.is_empty()
            && self.edge_measure_delta.is_empty()
    }

    pub fn has_measure_perturbation(&self) -> bool {
        !(self.vertex_measure_delta.is_empty() && self.edge_measure_delta.is_empty())
    }

    pub fn has_potential_perturbation(&self) -> bool {
        !self.potential_short.is_empty() || self.potential_long.is_some()
    }

    /// The measure part alone (potential removed).
    pub fn measure_part(&self) -> Self {
        Self {
            vertex_measure_delta: self.vertex_measure_delta.clone(),
            edge_measure_delta: self.edge_measure_delta.clone(),
            ..Self::default()
        }
    }

    pub fn with_short_potential(mut self, field: SiteField) -> Self {
        self.potential_short = field;
        self
    }

    pub fn with_long_potential(mut self, law: PowerLaw) -> Self {
        self.potential_long = Some(law);
        self
    }

    pub fn with_vertex_measure(mut self, field: SiteField) -> Self {
        self.vertex_measure_delta = field;
        self
    }

    pub fn with_edge_measure(mut self, field: EdgeField) -> Self {
        self.edge_measure_delta = field;
        self
    }

    /// `R_s(mu x_j)`.
    pub fn r_short(&self, cell: &[i64], j: usize) -> f64 {
        self.potential_short.value(cell, j)
    }

    /// `R_l(mu x_j)`.
    pub fn r_long(&self, cell: &[i64], j: usize) -> f64 {
        self.potential_long
            .as_ref()
            .map_or(0.0, |p| p.eval(cell, j))
    }

    /// Perturbed potential `R(mu x_j)`.
    pub fn potential(&self, g: &QuotientGraph, cell: &[i64], j: usize) -> f64 {
        g.vertex(j).r0 + self.r_short(cell, j) + self.r_long(cell, j)
    }

    /// Perturbed vertex measure `m(mu x_j)`.
    pub fn vertex_measure(&self, g: &QuotientGraph, cell: &[i64], j: usize) -> f64 {
        g.vertex(j).m0 + self.vertex_measure_delta.value(cell, j)
    }

    /// Perturbed measure of the lift of oriented edge `e` whose origin lies
    /// in `cell`. Both orientations of an instance read the same value.
    pub fn edge_measure(&self, g: &QuotientGraph, e: usize, origin_cell: &[i64]) -> f64 {
        let edge = g.edge(e);
        let k = g.unoriented(e);
        let delta = if g.is_representative(e) {
            self.edge_measure_delta.value(origin_cell, k)
        } else {
            let key: Cell = origin_cell
                .iter()
                .zip(&edge.index)
                .map(|(c, h)| c + h)
                .collect();
            self.edge_measure_delta.value(&key, k)
        };
        edge.m0 + delta
    }

    /// Structural checks against the crystal; measure positivity on the
    /// tabulated cells. Positivity elsewhere is checked where measures are
    /// materialized.
    pub fn validate_for(&self, g: &QuotientGraph) -> Result<()> {
        let d = g.dimension();
        let n = g.num_vertices();
        let ne = g.num_unoriented_edges();
        let bad = |msg: String| Err(Error::InvalidPerturbation(msg));
        let check_law = |name: &str, law: &PowerLaw, min_exp: f64, count: usize| -> Result<()> {
            if !law.amplitude.is_finite() || !law.exponent.is_finite() {
                return bad(format!("{name}: envelope parameters must be finite"));
            }
            if law.exponent <= min_exp {
                return bad(format!(
                    "{name}: envelope exponent {} must exceed {min_exp}",
                    law.exponent
                ));
            }
            if let Some(c) = &law.coefficients {
                if c.len() != count {
                    return bad(format!(
                        "{name}: expected {count} coefficients, found {}",
                        c.len()
                    ));
                }
                if c.iter().any(|x| !x.is_finite()) {
                    return bad(format!("{name}: coefficients must be finite"));
                }
            }
            Ok(())
        };
        let check_sites = |name: &str, field: &SiteField| -> Result<()> {
            for e in &field.table {
                if e.cell.len() != d {
                    return bad(format!("{name}: cell {:?} has wrong dimension", e.cell));
                }
                if e.vertex >= n {
                    return bad(format!("{name}: vertex {} out of range", e.vertex));
                }
                if !e.value.is_finite() {
                    return bad(format!("{name}: non-finite value"));
                }
            }
            Ok(())
        };
        check_sites("potential_short", &self.potential_short)?;
        if let Some(law) = &self.potential_short.envelope {
            check_law("potential_short", law, 1.0, n)?;
        }
        if let Some(law) = &self.potential_long {
            check_law("potential_long", law, 0.0, n)?;
        }
        check_sites("vertex_measure_delta", &self.vertex_measure_delta)?;
        if let Some(law) = &self.vertex_measure_delta.envelope {
            check_law("vertex_measure_delta", law, 1.0, n)?;
        }
        for e in &self.edge_measure_delta.table {
            if e.cell.len() != d {
                return bad(format!(
                    "edge_measure_delta: cell {:?} has wrong dimension",
                    e.cell
                ));
            }
            if e.edge >= ne {
                return bad(format!("edge_measure_delta: edge {} out of range", e.edge));
            }
            if !e.value.is_finite() {
                return bad("edge_measure_delta: non-finite value".into());
            }
        }
        if let Some(law) = &self.edge_measure_delta.envelope {
            check_law("edge_measure_delta", law, 1.0, ne)?;
        }
        // off the tables the envelope alone acts, and it is largest at mu = 0
        if let Some(law) = &self.vertex_measure_delta.envelope {
            for (j, v) in g.vertices().iter().enumerate() {
                if !(v.m0 + (law.amplitude * law.coefficient(j)).min(0.0) > 0.0) {
                    return bad(format!(
                        "vertex_measure_delta: envelope makes the measure of {} nonpositive",
                        v.id
                    ));
                }
            }
        }
        if let Some(law) = &self.edge_measure_delta.envelope {
            for k in 0..ne {
                if !(g.edge(2 * k).m0 + (law.amplitude * law.coefficient(k)).min(0.0) > 0.0) {
                    return bad(format!(
                        "edge_measure_delta: envelope makes the measure of edge {k} nonpositive"
                    ));
                }
            }
        }
        for e in &self.vertex_measure_delta.table {
            let m = self.vertex_measure(g, &e.cell, e.vertex);
            if !(m > 0.0) {
                return bad(format!(
                    "vertex measure at cell {:?}, vertex {} must be strictly positive (got {m})",
                    e.cell,
                    g.vertex(e.vertex).id
                ));
            }
        }
        for e in &self.edge_measure_delta.table {
            let m = self.edge_measure(g, 2 * e.edge, &e.cell);
            if !(m > 0.0) {
                return bad(format!(
                    "edge measure at cell {:?}, edge {} must be strictly positive (got {m})",
                    e.cell, e.edge
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteEntryDoc {
    cell: Vec<i64>,
    vertex: VertexRef,
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeEntryDoc {
    cell: Vec<i64>,
    edge: usize,
    value: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeDoc<E> {
    #[serde(default)]
    envelope: Option<String>,
    amplitude: f64,
    exponent: f64,
    #[serde(default)]
    coefficients: Option<Vec<f64>>,
    #[serde(default = "Vec::new")]
    table: Vec<E>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FieldDoc<E> {
    Table(Vec<E>),
    Envelope(EnvelopeDoc<E>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PerturbationDocument {
    #[serde(default)]
    potential_short: Option<FieldDoc<SiteEntryDoc>>,
    #[serde(default)]
    potential_long: Option<EnvelopeDoc<SiteEntryDoc>>,
    #[serde(default)]
    vertex_measure_delta: Option<FieldDoc<SiteEntryDoc>>,
    #[serde(default)]
    edge_measure_delta: Option<FieldDoc<EdgeEntryDoc>>,
}

fn envelope_law<E>(name: &str, doc: &EnvelopeDoc<E>) -> Result<PowerLaw> {
    match doc.envelope.as_deref() {
        None | Some("power-law") => Ok(PowerLaw {
            amplitude: doc.amplitude,
            exponent: doc.exponent,
            coefficients: doc.coefficients.clone(),
        }),
        Some(other) => Err(Error::InvalidPerturbation(format!(
            "{name}: unsupported envelope `{other}`"
        ))),
    }
}

fn site_field(name: &str, doc: Option<FieldDoc<SiteEntryDoc>>, ids: &[String]) -> Result<SiteField> {
    let resolve = |entries: Vec<SiteEntryDoc>| -> Result<Vec<SiteEntry>> {
        entries
            .into_iter()
            .map(|e| {
                Ok(SiteEntry {
                    vertex: e.vertex.resolve(ids, name).map_err(|err| {
                        Error::InvalidPerturbation(err.to_string())
                    })?,
                    cell: e.cell,
                    value: e.value,
                })
            })
            .collect()
    };
    Ok(match doc {
        None => SiteField::default(),
        Some(FieldDoc::Table(entries)) => SiteField::table(resolve(entries)?),
        Some(FieldDoc::Envelope(env)) => {
            let law = envelope_law(name, &env)?;
            SiteField {
                table: resolve(env.table)?,
                envelope: Some(law),
            }
        }
    })
}

fn edge_field(doc: Option<FieldDoc<EdgeEntryDoc>>) -> Result<EdgeField> {
    let convert = |entries: Vec<EdgeEntryDoc>| -> Vec<EdgeEntry> {
        entries
            .into_iter()
            .map(|e| EdgeEntry {
                cell: e.cell,
                edge: e.edge,
                value: e.value,
            })
            .collect()
    };
    Ok(match doc {
        None => EdgeField::default(),
        Some(FieldDoc::Table(entries)) => EdgeField::table(convert(entries)),
        Some(FieldDoc::Envelope(env)) => {
            let law = envelope_law("edge_measure_delta", &env)?;
            EdgeField {
                table: convert(env.table),
                envelope: Some(law),
            }
        }
    })
}

/// Parses a perturbation document against the crystal it perturbs.
pub fn load_perturbation(text: &str, g: &QuotientGraph) -> Result<PerturbationSpec> {
    let doc: PerturbationDocument = serde_json::from_str(text)?;
    let ids: Vec<String> = g.vertices().iter().map(|v| v.id.clone()).collect();
    let potential_long = match doc.potential_long {
        None => None,
        Some(env) => {
            if !env.table.is_empty() {
                return Err(Error::InvalidPerturbation(
                    "potential_long: tables are not supported for the radial profile".into(),
                ));
            }
            Some(envelope_law("potential_long", &env)?)
        }
    };
    let spec = PerturbationSpec {
        potential_short: site_field("potential_short", doc.potential_short, &ids)?,
        potential_long,
        vertex_measure_delta: site_field("vertex_measure_delta", doc.vertex_measure_delta, &ids)?,
        edge_measure_delta: edge_field(doc.edge_measure_delta)?,
    };
    spec.validate_for(g)?;
    Ok(spec)
}

pub fn load_perturbation_file(path: impl AsRef<Path>, g: &QuotientGraph) -> Result<PerturbationSpec> {
    let text = std::fs::read_to_string(path)?;
    load_perturbation(&text, g)
}
