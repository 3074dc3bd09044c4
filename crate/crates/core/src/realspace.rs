//! `H0 = -Delta(X, m0) + R0` and `H = -Delta(X, m) + R` on finite windows of
//! the infinite crystal, the unitary `J`, dense/iterative spectra and the
//! finite-torus Floquet-Bloch oracle.
//!
//! Sites are enumerated as `(cell, vertex)` with cells in lexicographic order
//! (first axis slowest) and linear index `cell_index * n + j`. Matrices are
//! stored in the orthonormal basis `delta_x / m(x)^(1/2)` of `l^2(X, m)`, so
//! they are real symmetric.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::bands::fiber_eigenvalues;
use crate::crystal::{Cell, PerturbationSpec, QuotientGraph, SiteField};
use crate::error::{Error, Result};
use crate::linalg::{self, CsrMatrix, DENSE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxSpec {
    /// Cells `Z^d / N Z^d`; edges wrap around.
    Torus(usize),
    /// Cells with `|mu|_inf <= L`; edges leaving the window are dropped.
    Truncated(usize),
}

impl BoxSpec {
    /// Number of cells per axis.
    pub fn side(&self) -> usize {
        match *self {
            BoxSpec::Torus(n) => n,
            BoxSpec::Truncated(l) => 2 * l + 1,
        }
    }

    fn offset(&self) -> i64 {
        match *self {
            BoxSpec::Torus(_) => 0,
            BoxSpec::Truncated(l) => l as i64,
        }
    }

    pub fn num_cells(&self, dimension: usize) -> usize {
        self.side().pow(dimension as u32)
    }

    /// Cells of the window in lexicographic order.
    pub fn cells(&self, dimension: usize) -> Vec<Cell> {
        let side = self.side();
        let off = self.offset();
        (0..self.num_cells(dimension))
            .map(|mut i| {
                let mut c = vec![0i64; dimension];
                for k in (0..dimension).rev() {
                    c[k] = (i % side) as i64 - off;
                    i /= side;
                }
                c
            })
            .collect()
    }

    /// Index of `cell` in the window; torus cells are reduced first,
    /// truncated cells outside the window give `None`.
    pub fn cell_index(&self, cell: &[i64]) -> Option<usize> {
        let side = self.side() as i64;
        let mut idx = 0usize;
        for &c in cell {
            let local = match *self {
                BoxSpec::Torus(_) => c.rem_euclid(side),
                BoxSpec::Truncated(_) => c + self.offset(),
            };
            if local < 0 || local >= side {
                return None;
            }
            idx = idx * side as usize + local as usize;
        }
        Some(idx)
    }

    fn validate(&self) -> Result<()> {
        if let BoxSpec::Torus(0) = self {
            return Err(Error::InvalidArgument("torus size must be at least 1".into()));
        }
        Ok(())
    }
}

impl fmt::Display for BoxSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoxSpec::Torus(n) => write!(f, "torus:{n}"),
            BoxSpec::Truncated(l) => write!(f, "truncated:{l}"),
        }
    }
}

impl FromStr for BoxSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("box `{s}` must be torus:N or truncated:L"));
        let (mode, size) = s.split_once(':').ok_or_else(bad)?;
        let size: usize = size.trim().parse().map_err(|_| bad())?;
        let spec = match mode.trim() {
            "torus" => BoxSpec::Torus(size),
            "truncated" => BoxSpec::Truncated(size),
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Sparse real-symmetric operator on a window of the crystal.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSpaceOperator {
    dimension: usize,
    num_vertices: usize,
    box_spec: BoxSpec,
    cells: Vec<Cell>,
    matrix: CsrMatrix,
    weights: Vec<f64>,
    is_perturbed: bool,
    uses_j: bool,
}

impl RealSpaceOperator {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn box_spec(&self) -> BoxSpec {
        self.box_spec
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Measure of each site for the inner product of the underlying space.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn is_perturbed(&self) -> bool {
        self.is_perturbed
    }

    pub fn uses_j(&self) -> bool {
        self.uses_j
    }

    pub fn index(&self, cell: &[i64], j: usize) -> Option<usize> {
        self.box_spec
            .cell_index(cell)
            .map(|c| c * self.num_vertices + j)
    }

    /// `(cell, vertex)` of a linear index.
    pub fn site(&self, idx: usize) -> (&Cell, usize) {
        (&self.cells[idx / self.num_vertices], idx % self.num_vertices)
    }

    /// Linear indices of sites whose cell lies within `width` cells of the
    /// truncation boundary; empty on a torus.
    pub fn boundary_sites(&self, width: usize) -> Vec<usize> {
        let BoxSpec::Truncated(l) = self.box_spec else {
            return Vec::new();
        };
        (0..self.dim())
            .filter(|&i| {
                let cell = self.site(i).0;
                let r = cell.iter().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0);
                l - r < width
            })
            .collect()
    }
}

/// Values of the perturbation on the window. On a torus, tables are reduced
/// mod `N` and envelopes are read at the centered representative of a cell.
struct Window<'a> {
    g: &'a QuotientGraph,
    p: &'a PerturbationSpec,
    modulus: Option<i64>,
}

impl Window<'_> {
    fn canonical(&self, cell: &[i64]) -> Cell {
        match self.modulus {
            None => cell.to_vec(),
            Some(n) => cell.iter().map(|c| c.rem_euclid(n)).collect(),
        }
    }

    fn centered(&self, cell: &[i64]) -> Cell {
        match self.modulus {
            None => cell.to_vec(),
            Some(n) => cell
                .iter()
                .map(|c| {
                    let r = c.rem_euclid(n);
                    if 2 * r > n {
                        r - n
                    } else {
                        r
                    }
                })
                .collect(),
        }
    }

    fn site(&self, field: &SiteField, cell: &[i64], j: usize) -> f64 {
        if self.modulus.is_none() {
            return field.value(cell, j);
        }
        let key = self.canonical(cell);
        let tab: f64 = field
            .table
            .iter()
            .filter(|e| e.vertex == j && self.canonical(&e.cell) == key)
            .map(|e| e.value)
            .sum();
        tab + field
            .envelope
            .as_ref()
            .map_or(0.0, |law| law.eval(&self.centered(cell), j))
    }

    fn vertex_measure(&self, cell: &[i64], j: usize) -> f64 {
        self.g.vertex(j).m0 + self.site(&self.p.vertex_measure_delta, cell, j)
    }

    fn potential(&self, cell: &[i64], j: usize) -> f64 {
        let long = self
            .p
            .potential_long
            .as_ref()
            .map_or(0.0, |law| law.eval(&self.centered(cell), j));
        self.g.vertex(j).r0 + self.site(&self.p.potential_short, cell, j) + long
    }

    fn edge_measure(&self, e: usize, origin_cell: &[i64]) -> f64 {
        if self.modulus.is_none() {
            return self.p.edge_measure(self.g, e, origin_cell);
        }
        let edge = self.g.edge(e);
        let k = self.g.unoriented(e);
        let key: Cell = if self.g.is_representative(e) {
            origin_cell.to_vec()
        } else {
            origin_cell.iter().zip(&edge.index).map(|(c, h)| c + h).collect()
        };
        let key = self.canonical(&key);
        let field = &self.p.edge_measure_delta;
        let tab: f64 = field
            .table
            .iter()
            .filter(|t| t.edge == k && self.canonical(&t.cell) == key)
            .map(|t| t.value)
            .sum();
        let env = field
            .envelope
            .as_ref()
            .map_or(0.0, |law| law.eval(&self.centered(&key), k));
        edge.m0 + tab + env
    }
}

fn window<'a>(g: &'a QuotientGraph, p: &'a PerturbationSpec, box_spec: BoxSpec) -> Window<'a> {
    Window {
        g,
        p,
        modulus: match box_spec {
            BoxSpec::Torus(n) => Some(n as i64),
            BoxSpec::Truncated(_) => None,
        },
    }
}

fn site_measures(w: &Window<'_>, cells: &[Cell]) -> Result<Vec<f64>> {
    let n = w.g.num_vertices();
    let mut out = Vec::with_capacity(cells.len() * n);
    for cell in cells {
        for j in 0..n {
            let m = w.vertex_measure(cell, j);
            if !(m > 0.0) {
                return Err(Error::InvalidPerturbation(format!(
                    "vertex measure at cell {cell:?}, vertex {} is {m}; must be strictly positive",
                    w.g.vertex(j).id
                )));
            }
            out.push(m);
        }
    }
    Ok(out)
}

/// `-Delta(X, m) + R` on the window, in the orthonormal basis of `l^2(X, m)`.
pub fn build_h(g: &QuotientGraph, p: &PerturbationSpec, box_spec: BoxSpec) -> Result<RealSpaceOperator> {
    box_spec.validate()?;
    p.validate_for(g)?;
    let d = g.dimension();
    let n = g.num_vertices();
    let w = window(g, p, box_spec);
    let cells = box_spec.cells(d);
    let weights = site_measures(&w, &cells)?;
    let mut triplets = Vec::new();
    for (ci, cell) in cells.iter().enumerate() {
        for j in 0..n {
            let x = ci * n + j;
            let mx = weights[x];
            let mut deg = 0.0;
            for &e in g.outgoing(j) {
                let edge = g.edge(e);
                let me = w.edge_measure(e, cell);
                if !(me > 0.0) {
                    return Err(Error::InvalidPerturbation(format!(
                        "edge measure at cell {cell:?}, edge {} is {me}; must be strictly positive",
                        g.unoriented(e)
                    )));
                }
                deg += me / mx;
                let target: Cell = cell.iter().zip(&edge.index).map(|(c, h)| c + h).collect();
                let Some(tc) = box_spec.cell_index(&target) else {
                    continue;
                };
                let y = tc * n + edge.terminus;
                triplets.push((x, y, -me / (mx.sqrt() * weights[y].sqrt())));
            }
            triplets.push((x, x, deg + w.potential(cell, j)));
        }
    }
    Ok(RealSpaceOperator {
        dimension: d,
        num_vertices: n,
        box_spec,
        cells,
        matrix: CsrMatrix::from_triplets(weights.len(), &triplets),
        weights,
        is_perturbed: !p.is_empty(),
        uses_j: false,
    })
}

/// The periodic operator; bit-identical to [`build_h`] with an empty
/// perturbation.
pub fn build_h0(g: &QuotientGraph, box_spec: BoxSpec) -> Result<RealSpaceOperator> {
    build_h(g, &PerturbationSpec::empty(), box_spec)
}

/// `J H J*` acting in `l^2(X, m0)`, in its orthonormal basis.
///
/// The stencil is formed in function coordinates of `l^2(X, m0)`, where `J`
/// multiplies by `(m / m0)^(1/2)`, then rescaled to the orthonormal basis.
pub fn conjugate_j(hop: &RealSpaceOperator, g: &QuotientGraph, p: &PerturbationSpec) -> Result<RealSpaceOperator> {
    if hop.uses_j {
        return Err(Error::ProvenanceMismatch("operator is already J-conjugated".into()));
    }
    if hop.dimension != g.dimension() || hop.num_vertices != g.num_vertices() {
        return Err(Error::ProvenanceMismatch("crystal shape differs".into()));
    }
    let w = window(g, p, hop.box_spec);
    let m = site_measures(&w, &hop.cells)?;
    if m != hop.weights {
        return Err(Error::ProvenanceMismatch(
            "site measures differ from those of the perturbation".into(),
        ));
    }
    let n = g.num_vertices();
    let m0: Vec<f64> = (0..hop.dim()).map(|x| g.vertex(x % n).m0).collect();
    let mut triplets = Vec::with_capacity(hop.matrix.nnz());
    for x in 0..hop.dim() {
        for (y, v) in hop.matrix.row(x) {
            // orthonormal l2(m) -> function coordinates of l2(m)
            let k_m = v * m[y].sqrt() / m[x].sqrt();
            // J K J* in function coordinates of l2(m0)
            let k = (m[x] / m0[x]).sqrt() * k_m * (m0[y] / m[y]).sqrt();
            // function coordinates -> orthonormal l2(m0)
            triplets.push((x, y, k * m0[x].sqrt() / m0[y].sqrt()));
        }
    }
    Ok(RealSpaceOperator {
        matrix: CsrMatrix::from_triplets(hop.dim(), &triplets),
        weights: m0,
        uses_j: true,
        ..hop.clone()
    })
}

/// Ascending eigenvalues: the full spectrum by dense diagonalization up to
/// the dense limit (the lowest `k` when `k` is given), otherwise the lowest
/// `k` by Lanczos.
pub fn spectrum(op: &RealSpaceOperator, k: Option<usize>) -> Result<Vec<f64>> {
    let dim = op.dim();
    if dim <= DENSE_LIMIT {
        let eig = linalg::symmetric_eigen(&op.matrix.to_dense())
            .ok_or_else(|| Error::SolverNonConvergence("dense symmetric eigensolver".into()))?;
        let mut values = eig.values;
        if let Some(k) = k {
            values.truncate(k);
        }
        return Ok(values);
    }
    match k {
        Some(k) => linalg::lanczos_lowest(&op.matrix, k, 1e-10),
        None => Err(Error::TooLarge {
            what: "a full spectrum (pass an eigenvalue count)",
            dimension: dim,
            limit: DENSE_LIMIT,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRecord {
    pub grid: usize,
    pub eigenvalues: usize,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub const ORACLE_TOLERANCE: f64 = 1e-9;

/// Compares the torus spectrum of `H0` with the union of the fiber spectra
/// at `xi = mu / N`.
pub fn torus_oracle(g: &QuotientGraph, grid: usize) -> Result<OracleRecord> {
    let op = build_h0(g, BoxSpec::Torus(grid))?;
    let a = spectrum(&op, None)?;
    let d = g.dimension();
    let mut b = Vec::with_capacity(a.len());
    for cell in BoxSpec::Torus(grid).cells(d) {
        let xi: Vec<f64> = cell.iter().map(|&c| c as f64 / grid as f64).collect();
        b.extend(fiber_eigenvalues(g, &xi)?);
    }
    b.sort_by(f64::total_cmp);
    let deviation = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    Ok(OracleRecord {
        grid,
        eigenvalues: a.len(),
        deviation,
        tolerance: ORACLE_TOLERANCE,
        pass: deviation <= ORACLE_TOLERANCE,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapCount {
    pub size: usize,
    pub dimension: usize,
    pub count: usize,
}

/// Relative slack on the interval ends when counting eigenvalues.
pub const COUNT_SLACK: f64 = 1e-12;

/// Eigenvalue counts of the truncated `H` in the closed interval for each
/// window half-width. Eigenvalues within `COUNT_SLACK * max(1, |H|)` of an
/// end count as inside: an exact eigenvalue on the end would otherwise be
/// counted or not depending on rounding.
pub fn gap_count_scan(
    g: &QuotientGraph,
    p: &PerturbationSpec,
    interval: (f64, f64),
    sizes: &[usize],
) -> Result<Vec<GapCount>> {
    let (a, b) = interval;
    if !(a <= b) {
        return Err(Error::InvalidArgument(format!("interval [{a}, {b}] is not ordered")));
    }
    sizes
        .iter()
        .map(|&l| {
            let op = build_h(g, p, BoxSpec::Truncated(l))?;
            if op.dim() > DENSE_LIMIT {
                return Err(Error::TooLarge {
                    what: "eigenvalue counting",
                    dimension: op.dim(),
                    limit: DENSE_LIMIT,
                });
            }
            let (lo, hi) = op.matrix.gershgorin();
            let slack = COUNT_SLACK * lo.abs().max(hi.abs()).max(1.0);
            let count = spectrum(&op, None)?
                .into_iter()
                .filter(|&x| x >= a - slack && x <= b + slack)
                .count();
            Ok(GapCount {
                size: l,
                dimension: op.dim(),
                count,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{builtin, EdgeEntry, EdgeField, SiteEntry, BUILTIN_NAMES};
    use crate::floquet::assemble_fiber;
    use approx::assert_abs_diff_eq;

    fn bump(cell: Vec<i64>, value: f64) -> SiteField {
        SiteField::table(vec![SiteEntry {
            cell,
            vertex: 0,
            value,
        }])
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn zd1_torus_four_is_circulant() {
        let g = builtin("zd:1").unwrap();
        let op = build_h0(&g, BoxSpec::Torus(4)).unwrap();
        let m = op.matrix().to_dense();
        for i in 0..4 {
            assert_eq!(m[(i, i)], 2.0);
            assert_eq!(m[(i, (i + 1) % 4)], -1.0);
            assert_eq!(m[(i, (i + 2) % 4)], 0.0);
        }
        assert_close(&spectrum(&op, None).unwrap(), &[0.0, 2.0, 2.0, 4.0], 1e-12);
    }

    #[test]
    fn zd1_truncated_three_sites() {
        let g = builtin("zd:1").unwrap();
        let op = build_h0(&g, BoxSpec::Truncated(1)).unwrap();
        let s2 = 2f64.sqrt();
        assert_close(&spectrum(&op, None).unwrap(), &[2.0 - s2, 2.0, 2.0 + s2], 1e-12);
    }

    #[test]
    fn single_cell_torus_is_fiber_at_zero() {
        for name in BUILTIN_NAMES {
            let g = builtin(name).unwrap();
            let op = build_h0(&g, BoxSpec::Torus(1)).unwrap();
            let f = assemble_fiber(&g, &vec![0.0; g.dimension()]).matrix;
            let m = op.matrix().to_dense();
            for i in 0..g.num_vertices() {
                for j in 0..g.num_vertices() {
                    assert_abs_diff_eq!(m[(i, j)], f[(i, j)].re, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn empty_perturbation_is_bit_identical() {
        let g = builtin("kagome").unwrap();
        let a = build_h0(&g, BoxSpec::Truncated(2)).unwrap();
        let b = build_h(&g, &PerturbationSpec::empty(), BoxSpec::Truncated(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn short_potential_is_a_diagonal_bump() {
        let g = builtin("zd:1").unwrap();
        let p = PerturbationSpec::empty().with_short_potential(bump(vec![0], 3.0));
        let h = build_h(&g, &p, BoxSpec::Truncated(2)).unwrap().matrix().to_dense();
        let h0 = build_h0(&g, BoxSpec::Truncated(2)).unwrap().matrix().to_dense();
        let diff = h - h0;
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == 2 && j == 2 { 3.0 } else { 0.0 };
                assert_eq!(diff[(i, j)], expect);
            }
        }
    }

    #[test]
    fn vertex_measure_bump_changes_spectrum() {
        let g = builtin("zd:1").unwrap();
        let p = PerturbationSpec::empty().with_vertex_measure(bump(vec![0], 1.0));
        let op = build_h(&g, &p, BoxSpec::Torus(4)).unwrap();
        assert!(op.matrix().symmetry_defect() <= 1e-12);
        let s = spectrum(&op, None).unwrap();
        let dev = s
            .iter()
            .zip([0.0, 2.0, 2.0, 4.0])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev > 1e-3);
    }

    #[test]
    fn j_conjugation_preserves_spectrum() {
        let g = builtin("hexagonal").unwrap();
        let p = PerturbationSpec::empty()
            .with_vertex_measure(bump(vec![1, 0], 3.0))
            .with_edge_measure(EdgeField::table(vec![EdgeEntry {
                cell: vec![0, 0],
                edge: 1,
                value: 0.5,
            }]));
        let h = build_h(&g, &p, BoxSpec::Torus(4)).unwrap();
        let jh = conjugate_j(&h, &g, &p).unwrap();
        assert!(jh.uses_j());
        assert_close(&spectrum(&h, None).unwrap(), &spectrum(&jh, None).unwrap(), 1e-10);
    }

    #[test]
    fn j_is_identity_without_measure_change() {
        let g = builtin("zd:2").unwrap();
        let p = PerturbationSpec::empty().with_short_potential(bump(vec![0, 0], 1.0));
        let h = build_h(&g, &p, BoxSpec::Truncated(2)).unwrap();
        let jh = conjugate_j(&h, &g, &p).unwrap();
        assert_eq!(jh.matrix(), h.matrix());
        assert_eq!(jh.weights(), h.weights());
    }

    #[test]
    fn j_rejects_foreign_operator() {
        let g = builtin("zd:1").unwrap();
        let p = PerturbationSpec::empty().with_vertex_measure(bump(vec![0], 3.0));
        let h0 = build_h0(&g, BoxSpec::Torus(4)).unwrap();
        assert!(matches!(conjugate_j(&h0, &g, &p), Err(Error::ProvenanceMismatch(_))));
    }

    #[test]
    fn single_site_measure_scales_coordinate() {
        // m(x0) = 4: J maps f to (m/m0)^(1/2) f, doubling the x0 value
        let g = builtin("zd:1").unwrap();
        let p = PerturbationSpec::empty().with_vertex_measure(bump(vec![0], 3.0));
        let h = build_h(&g, &p, BoxSpec::Truncated(3)).unwrap();
        let x0 = h.index(&[0], 0).unwrap();
        assert_eq!(h.weights()[x0], 4.0);
        assert_eq!((h.weights()[x0] / g.vertex(0).m0).sqrt(), 2.0);
    }

    #[test]
    fn oracle_small_cases() {
        let z = builtin("zd:1").unwrap();
        let r = torus_oracle(&z, 4).unwrap();
        assert!(r.pass && r.deviation <= 1e-12);
        let hex = builtin("hexagonal").unwrap();
        let r = torus_oracle(&hex, 2).unwrap();
        assert_eq!(r.eigenvalues, 8);
        assert!(r.deviation <= 1e-10);
    }

    #[test]
    fn bound_state_count() {
        let g = builtin("zd:1").unwrap();
        let p = PerturbationSpec::empty().with_short_potential(bump(vec![0], -1.0));
        let counts = gap_count_scan(&g, &p, (-0.6, -0.1), &[4, 8, 16]).unwrap();
        assert!(counts.iter().all(|c| c.count == 1), "{counts:?}");
    }

    #[test]
    fn eigenvalues_on_the_ends_are_counted() {
        // the free 5-site chain has eigenvalues 2 - 2cos(pi k / 6): 1, 2 and 3 lie in [1, 3]
        let g = builtin("zd:1").unwrap();
        let counts = gap_count_scan(&g, &PerturbationSpec::empty(), (1.0, 3.0), &[2, 17]).unwrap();
        assert_eq!(counts[0].count, 3);
        // 36 modes: k = 12..=24 give cos in [-1/2, 1/2]
        assert_eq!(counts[1].count, 13);
    }

    #[test]
    fn box_parsing_and_indexing() {
        assert_eq!("torus:4".parse::<BoxSpec>().unwrap(), BoxSpec::Torus(4));
        assert_eq!("truncated:0".parse::<BoxSpec>().unwrap(), BoxSpec::Truncated(0));
        assert!("torus:0".parse::<BoxSpec>().is_err());
        assert!("sphere:3".parse::<BoxSpec>().is_err());
        let b = BoxSpec::Truncated(2);
        let cells = b.cells(2);
        for (i, c) in cells.iter().enumerate() {
            assert_eq!(b.cell_index(c), Some(i));
        }
        assert_eq!(b.cell_index(&[3, 0]), None);
        assert_eq!(BoxSpec::Torus(3).cell_index(&[-1, 4]), Some(2 * 3 + 1));
    }

    #[test]
    fn lanczos_path_for_large_windows() {
        // three well separated wells: each binds one state at 2 - (4 + V^2)^(1/2)
        let g = builtin("zd:1").unwrap();
        let wells = [(-100, -5.0), (0, -4.0), (100, -3.0)];
        let field = SiteField::table(
            wells
                .iter()
                .map(|&(c, v)| SiteEntry { cell: vec![c], vertex: 0, value: v })
                .collect(),
        );
        let p = PerturbationSpec::empty().with_short_potential(field);
        let op = build_h(&g, &p, BoxSpec::Truncated(2500)).unwrap();
        assert!(op.dim() > DENSE_LIMIT);
        assert!(spectrum(&op, None).is_err());
        let low = spectrum(&op, Some(3)).unwrap();
        for (v, (_, depth)) in low.iter().zip(wells) {
            let exact = 2.0 - (4.0 + depth * depth as f64).sqrt();
            assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
        }
    }
}
