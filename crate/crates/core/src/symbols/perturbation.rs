//! Symbols of the measure perturbation and of the two potential parts.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use num_complex::Complex64;

use super::{Coefficient, SymbolTerm, ToroidalSymbol};
use crate::crystal::{Cell, PerturbationSpec, QuotientGraph};
use crate::linalg::CMatrix;
use crate::{Error, Result};

fn add(a: &[i64], b: &[i64]) -> Cell {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[i64], b: &[i64]) -> Cell {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Everything the measure coefficients need, shared by the closures.
struct MeasureData {
    g: QuotientGraph,
    p: PerturbationSpec,
}

impl MeasureData {
    /// Hopping defect of the instance of `e` ending in cell `mu`:
    /// `m(e)/sqrt(m(origin) m(terminus)) - m0(e)/sqrt(m0_o m0_t)`.
    fn k_entry(&self, e: usize, mu: &[i64]) -> f64 {
        let edge = self.g.edge(e);
        let origin = sub(mu, &edge.index);
        let me = self.p.edge_measure(&self.g, e, &origin);
        let mo = self.p.vertex_measure(&self.g, &origin, edge.origin);
        let mt = self.p.vertex_measure(&self.g, mu, edge.terminus);
        let m0o = self.g.vertex(edge.origin).m0;
        let m0t = self.g.vertex(edge.terminus).m0;
        me / (mo * mt).sqrt() - edge.m0 / (m0o * m0t).sqrt()
    }

    /// Degree defect of the instance of `e` leaving cell `mu`.
    fn t_entry(&self, e: usize, mu: &[i64]) -> f64 {
        let edge = self.g.edge(e);
        let me = self.p.edge_measure(&self.g, e, mu);
        let mo = self.p.vertex_measure(&self.g, mu, edge.origin);
        me / mo - edge.m0 / self.g.vertex(edge.origin).m0
    }

    fn coefficient(&self, nu: &[i64], mu: &[i64]) -> CMatrix {
        let n = self.g.num_vertices();
        let mut m = CMatrix::zeros(n, n);
        let edges = self.g.edges();
        if nu.iter().all(|&v| v == 0) {
            for (e, edge) in edges.iter().enumerate() {
                m[(edge.origin, edge.origin)] += Complex64::new(self.t_entry(e, mu), 0.0);
            }
        }
        for (e, edge) in edges.iter().enumerate() {
            if edge.index.as_slice() == nu {
                m[(edge.origin, edge.terminus)] -= Complex64::new(0.5 * self.k_entry(e, mu), 0.0);
            }
            if edge.index.iter().zip(nu).all(|(h, v)| -h == *v) {
                let k = self.k_entry(e, &add(mu, &edge.index));
                m[(edge.terminus, edge.origin)] -= Complex64::new(0.5 * k, 0.0);
            }
        }
        m
    }
}

/// Symbol `b` of `H - H0` coming from the measures, in the orthonormal
/// coordinates of `l^2(X, m0)`:
/// `b = sum_e T(e) - (K(e)_eta + K(e)^dagger_eta) / 2`.
///
/// Only the measure part of `p` is read; potentials go through
/// [`potential_symbols`]. Tabulated perturbations give finite symbols;
/// envelopes give closure coefficients.
pub fn perturbation_symbol(g: &QuotientGraph, p: &PerturbationSpec) -> Result<ToroidalSymbol> {
    p.validate_for(g)?;
    let d = g.dimension();
    let n = g.num_vertices();
    let data = Arc::new(MeasureData {
        g: g.clone(),
        p: p.measure_part(),
    });
    let mut shifts: BTreeSet<Cell> = BTreeSet::new();
    shifts.insert(vec![0; d]);
    for e in g.edges() {
        shifts.insert(e.index.clone());
        shifts.insert(e.index.iter().map(|h| -h).collect());
    }
    let finite = p.vertex_measure_delta.envelope.is_none() && p.edge_measure_delta.envelope.is_none();
    let terms = if finite {
        // every nonzero coefficient sits within one edge index of a table cell
        let mut seeds: BTreeSet<Cell> = p.vertex_measure_delta.table.iter().map(|e| e.cell.clone()).collect();
        seeds.extend(p.edge_measure_delta.table.iter().map(|e| e.cell.clone()));
        let mut candidates = BTreeSet::new();
        for c in &seeds {
            candidates.insert(c.clone());
            for e in g.edges() {
                candidates.insert(add(c, &e.index));
                candidates.insert(sub(c, &e.index));
            }
        }
        shifts
            .into_iter()
            .map(|nu| {
                let mut table = BTreeMap::new();
                for mu in &candidates {
                    let c = data.coefficient(&nu, mu);
                    if c.iter().any(|z| *z != Complex64::new(0.0, 0.0)) {
                        table.insert(mu.clone(), c);
                    }
                }
                SymbolTerm::table(nu, table)
            })
            .collect()
    } else {
        shifts
            .into_iter()
            .map(|nu| {
                let data = Arc::clone(&data);
                let key = nu.clone();
                SymbolTerm::envelope(nu, Arc::new(move |mu: &[i64]| data.coefficient(&key, mu)) as Coefficient)
            })
            .collect()
    };
    ToroidalSymbol::new(d, n, terms)
}

/// Paths in the lift used to split the long-range potential: one from
/// `x_1` in cell 0 to each `x_j` in cell 0, one from `x_1` to `x_1` in cell
/// `e_k` per axis. Entries are oriented-edge lists; `None` when unreachable.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    pub vertex_paths: Vec<Option<Vec<usize>>>,
    pub generator_paths: Vec<Option<Vec<usize>>>,
}

/// Where a path starting at `x_1` in cell 0 ends, or `None` if consecutive
/// edges do not join.
pub fn path_endpoint(g: &QuotientGraph, path: &[usize]) -> Option<(Cell, usize)> {
    let mut cell = vec![0; g.dimension()];
    let mut at = 0;
    for &e in path {
        let edge = g.edges().get(e)?;
        if edge.origin != at {
            return None;
        }
        cell = add(&cell, &edge.index);
        at = edge.terminus;
    }
    Some((cell, at))
}

/// Shortest paths by breadth-first search in the lift from `x_1` in cell 0,
/// exploring edges in index order.
pub fn default_paths(g: &QuotientGraph) -> PathTable {
    const VISIT_LIMIT: usize = 1 << 20;
    let d = g.dimension();
    let n = g.num_vertices();
    let unit = |k: usize| -> Cell { (0..d).map(|i| i64::from(i == k)).collect() };
    let mut wanted: BTreeSet<(Cell, usize)> = (1..n).map(|j| (vec![0; d], j)).collect();
    wanted.extend((0..d).map(|k| (unit(k), 0)));
    let start = (vec![0; d], 0usize);
    let mut parent: BTreeMap<(Cell, usize), Option<((Cell, usize), usize)>> = BTreeMap::new();
    parent.insert(start.clone(), None);
    let mut queue = VecDeque::from([start]);
    let mut remaining = wanted.clone();
    while let Some(node) = queue.pop_front() {
        if remaining.is_empty() || parent.len() > VISIT_LIMIT {
            break;
        }
        for &e in g.outgoing(node.1) {
            let edge = g.edge(e);
            let next = (add(&node.0, &edge.index), edge.terminus);
            if parent.contains_key(&next) {
                continue;
            }
            parent.insert(next.clone(), Some((node.clone(), e)));
            remaining.remove(&next);
            queue.push_back(next);
        }
    }
    let trace = |target: (Cell, usize)| -> Option<Vec<usize>> {
        let mut path = Vec::new();
        let mut at = target;
        loop {
            match parent.get(&at)? {
                None => break,
                Some((prev, e)) => {
                    path.push(*e);
                    at = prev.clone();
                }
            }
        }
        path.reverse();
        Some(path)
    };
    PathTable {
        vertex_paths: (0..n).map(|j| trace((vec![0; d], j))).collect(),
        generator_paths: (0..d).map(|k| trace((unit(k), 0))).collect(),
    }
}

/// Increments of `R_l` along `path` translated to start in cell `mu`; they
/// sum to `R_l(end) - R_l(mu x_1)`.
pub fn telescoping_increments(g: &QuotientGraph, p: &PerturbationSpec, path: &[usize], mu: &[i64]) -> Vec<f64> {
    let mut cell = mu.to_vec();
    let mut at = 0;
    let mut out = Vec::with_capacity(path.len());
    for &e in path {
        let edge = g.edge(e);
        let next = add(&cell, &edge.index);
        out.push(p.r_long(&next, edge.terminus) - p.r_long(&cell, at));
        cell = next;
        at = edge.terminus;
    }
    out
}

/// `r_s` and `r_l` with `R = R_s + R_l`:
/// `r_s(mu)_jj = R_s(mu x_j) + R_l(mu x_j) - R_l(mu x_1)` and
/// `r_l(mu) = R_l(mu x_1) Id`.
#[derive(Debug, Clone)]
pub struct PotentialSymbols {
    pub short: ToroidalSymbol,
    pub long: ToroidalSymbol,
    pub paths: PathTable,
}

/// Splits the potential. `paths` defaults to [`default_paths`]; supplied
/// paths are checked for their endpoints. A missing vertex path is an error
/// when a long-range part is present and there is more than one vertex.
pub fn potential_symbols(
    g: &QuotientGraph,
    p: &PerturbationSpec,
    paths: Option<&PathTable>,
) -> Result<PotentialSymbols> {
    p.validate_for(g)?;
    let d = g.dimension();
    let n = g.num_vertices();
    let paths = paths.cloned().unwrap_or_else(|| default_paths(g));
    if paths.vertex_paths.len() != n || paths.generator_paths.len() != d {
        return Err(Error::InvalidArgument("path table does not match the crystal".into()));
    }
    for (j, path) in paths.vertex_paths.iter().enumerate() {
        match path {
            Some(path) if path_endpoint(g, path) != Some((vec![0; d], j)) => {
                return Err(Error::InvalidArgument(format!(
                    "path for vertex {} does not end at it in cell 0",
                    g.vertex(j).id
                )));
            }
            None if j > 0 && p.potential_long.is_some() => {
                return Err(Error::InvalidArgument(format!(
                    "no path from {} to {}; the long-range split needs one",
                    g.vertex(0).id,
                    g.vertex(j).id
                )));
            }
            _ => {}
        }
    }
    for (k, path) in paths.generator_paths.iter().enumerate() {
        if let Some(path) = path {
            let mut unit = vec![0; d];
            unit[k] = 1;
            if path_endpoint(g, path) != Some((unit, 0)) {
                return Err(Error::InvalidArgument(format!("generator path for axis {k} is not closed")));
            }
        }
    }

    let zero = vec![0; d];
    let short = if p.potential_long.is_none() && p.potential_short.envelope.is_none() {
        let mut table: BTreeMap<Cell, CMatrix> = BTreeMap::new();
        for e in &p.potential_short.table {
            table.entry(e.cell.clone()).or_insert_with(|| {
                CMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |j, _| {
                    Complex64::new(p.r_short(&e.cell, j), 0.0)
                }))
            });
        }
        vec![SymbolTerm::table(zero.clone(), table)]
    } else {
        let p = p.clone();
        let f = move |mu: &[i64]| {
            let base = p.r_long(mu, 0);
            CMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |j, _| {
                Complex64::new(p.r_short(mu, j) + p.r_long(mu, j) - base, 0.0)
            }))
        };
        vec![SymbolTerm::envelope(zero.clone(), Arc::new(f) as Coefficient)]
    };
    let long = match &p.potential_long {
        None => Vec::new(),
        Some(_) => {
            let p = p.clone();
            let f = move |mu: &[i64]| CMatrix::identity(n, n) * Complex64::new(p.r_long(mu, 0), 0.0);
            vec![SymbolTerm::envelope(zero, Arc::new(f) as Coefficient)]
        }
    };
    Ok(PotentialSymbols {
        short: ToroidalSymbol::new(d, n, short)?,
        long: ToroidalSymbol::new(d, n, long)?,
        paths,
    })
}
