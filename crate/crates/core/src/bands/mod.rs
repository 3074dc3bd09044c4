//! Band structure over the torus: grid sampling, spectral projections,
//! multiplicities, flat bands and band gradients.

mod mourre;
mod thresholds;

pub use mourre::{mourre_constant, MourreReport};
pub use thresholds::{
    estimate_thresholds, estimate_thresholds_with, ThresholdEntry, ThresholdKind, ThresholdOptions,
    ThresholdReport,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::crystal::QuotientGraph;
use crate::error::{Error, Result};
use crate::floquet::{assemble_fiber, fiber_gradient, reduce_torus};
use crate::linalg::{self, CMatrix, Eigen};

/// Crude bound on the spectral radius of the fibers, used to scale tolerances.
pub fn spectral_scale(g: &QuotientGraph) -> f64 {
    let r = g.vertices().iter().fold(0.0, |m: f64, v| m.max(v.r0.abs()));
    2.0 * g.max_degree() + r
}

/// Default cluster tolerance: `1e-8` relative to the spectral scale.
pub fn default_degeneracy_tol(g: &QuotientGraph) -> f64 {
    1e-8 * spectral_scale(g).max(1.0)
}

pub fn fiber_eigen(g: &QuotientGraph, xi: &[f64]) -> Result<Eigen<Complex64>> {
    let f = assemble_fiber(g, xi);
    linalg::hermitian_eigen(&f.matrix).ok_or(Error::EigenNonConvergence { xi: f.xi })
}

pub fn fiber_eigenvalues(g: &QuotientGraph, xi: &[f64]) -> Result<Vec<f64>> {
    fiber_eigen(g, xi).map(|e| e.values)
}

/// Grid point `mu / N` for the node with multi-index `mu`.
pub fn grid_point(mu: &[usize], grid: usize) -> Vec<f64> {
    mu.iter().map(|&m| m as f64 / grid as f64).collect()
}

/// Multi-index of a node; lexicographic order with the first axis slowest.
pub fn node_multi_index(mut node: usize, grid: usize, dimension: usize) -> Vec<usize> {
    let mut mu = vec![0; dimension];
    for k in (0..dimension).rev() {
        mu[k] = node % grid;
        node /= grid;
    }
    mu
}

pub fn node_linear_index(mu: &[usize], grid: usize) -> usize {
    mu.iter().fold(0, |acc, &m| acc * grid + m)
}

/// Sampled Bloch variety on the grid `{mu / N}`.
#[derive(Debug, Clone)]
pub struct BandSample {
    pub grid: usize,
    pub dimension: usize,
    /// Node coordinates in lexicographic order.
    pub xi: Vec<Vec<f64>>,
    /// Ascending eigenvalues per node.
    pub values: Vec<Vec<f64>>,
    /// Orthonormal eigenvectors (columns) per node, when requested.
    pub vectors: Option<Vec<CMatrix>>,
}

impl BandSample {
    pub fn num_nodes(&self) -> usize {
        self.values.len()
    }

    pub fn num_bands(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Periodic neighbor of `node` one step along `axis` (`forward` or back).
    pub fn neighbor(&self, node: usize, axis: usize, forward: bool) -> usize {
        let mut mu = node_multi_index(node, self.grid, self.dimension);
        mu[axis] = if forward {
            (mu[axis] + 1) % self.grid
        } else {
            (mu[axis] + self.grid - 1) % self.grid
        };
        node_linear_index(&mu, self.grid)
    }

    pub fn band(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(move |v| v[j])
    }

    /// `(min, max)` of band `j` over the grid.
    pub fn band_range(&self, j: usize) -> (f64, f64) {
        self.band(j)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
    }
}

pub fn sample_bands(g: &QuotientGraph, grid: usize, want_vectors: bool) -> Result<BandSample> {
    if grid == 0 {
        return Err(Error::InvalidArgument("grid resolution must be at least 1".into()));
    }
    let d = g.dimension();
    let count = grid
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidArgument(format!("grid {grid}^{d} is too large")))?;
    let nodes: Vec<(Vec<f64>, Eigen<Complex64>)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let xi = grid_point(&node_multi_index(i, grid, d), grid);
            fiber_eigen(g, &xi).map(|e| (xi, e))
        })
        .collect::<Result<_>>()?;
    let mut xi = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    let mut vectors = want_vectors.then(|| Vec::with_capacity(count));
    for (x, e) in nodes {
        xi.push(x);
        values.push(e.values);
        if let Some(v) = vectors.as_mut() {
            v.push(e.vectors);
        }
    }
    Ok(BandSample {
        grid,
        dimension: d,
        xi,
        values,
        vectors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMethod {
    Eigen,
    Riesz,
}

/// Riesz contour parameters.
pub const RIESZ_MARGIN: f64 = 1e-4;
pub const RIESZ_NODES: usize = 256;
const CONTOUR_CLEARANCE: f64 = 1e-8;

fn check_interval(interval: (f64, f64)) -> Result<()> {
    let (a, b) = interval;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::InvalidArgument(format!(
            "interval [{a}, {b}] must be finite and ordered"
        )));
    }
    Ok(())
}

/// `E_{h0(xi)}(I)` for the closed interval `I`.
pub fn spectral_projection(
    g: &QuotientGraph,
    xi: &[f64],
    interval: (f64, f64),
    method: ProjectionMethod,
) -> Result<CMatrix> {
    check_interval(interval)?;
    let (a, b) = interval;
    let eig = fiber_eigen(g, xi)?;
    let n = g.num_vertices();
    match method {
        ProjectionMethod::Eigen => {
            let mut p = CMatrix::zeros(n, n);
            for (k, &lam) in eig.values.iter().enumerate() {
                if lam >= a && lam <= b {
                    let v = eig.vectors.column(k);
                    p += v * v.adjoint();
                }
            }
            Ok(p)
        }
        ProjectionMethod::Riesz => {
            let center = 0.5 * (a + b);
            let radius = 0.5 * (b - a) + RIESZ_MARGIN;
            for &lam in &eig.values {
                let to_circle = ((lam - center).abs() - radius).abs();
                let to_end = (lam - a).abs().min((lam - b).abs());
                let in_margin = (lam - center).abs() < radius && (lam < a || lam > b);
                if to_circle <= CONTOUR_CLEARANCE || to_end <= CONTOUR_CLEARANCE || in_margin {
                    return Err(Error::ContourTooClose {
                        eigenvalue: lam,
                        distance: to_circle.min(to_end),
                    });
                }
            }
            let h = assemble_fiber(g, xi).matrix;
            let mut p = CMatrix::zeros(n, n);
            for k in 0..RIESZ_NODES {
                let theta = 2.0 * PI * k as f64 / RIESZ_NODES as f64;
                let w = Complex64::from_polar(radius, theta);
                let z = Complex64::new(center, 0.0) + w;
                let resolvent = (CMatrix::identity(n, n) * z - &h)
                    .try_inverse()
                    .ok_or_else(|| Error::SolverNonConvergence("singular resolvent".into()))?;
                p += resolvent * w;
            }
            Ok(p / Complex64::new(RIESZ_NODES as f64, 0.0))
        }
    }
}

/// Number of eigenvalues of `h0(xi)` within `tol` of `lambda`.
pub fn multiplicity(g: &QuotientGraph, xi: &[f64], lambda: f64, tol: f64) -> Result<usize> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    Ok(fiber_eigenvalues(g, xi)?
        .iter()
        .filter(|&&x| (x - lambda).abs() <= tol)
        .count())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatBand {
    pub band: usize,
    pub energy: f64,
    pub variance: f64,
}

/// Bands whose range over the grid is below `tol`.
pub fn flat_bands(s: &BandSample, tol: f64) -> Vec<FlatBand> {
    (0..s.num_bands())
        .filter_map(|j| {
            let (lo, hi) = s.band_range(j);
            (hi - lo < tol).then(|| {
                let count = s.num_nodes() as f64;
                let mean = s.band(j).sum::<f64>() / count;
                let variance = s.band(j).map(|x| (x - mean).powi(2)).sum::<f64>() / count;
                FlatBand {
                    band: j,
                    energy: mean,
                    variance,
                }
            })
        })
        .collect()
}

/// Distinct flat-band energies (bands closer than `tol` are reported once).
pub fn detect_flat_bands(s: &BandSample, tol: f64) -> Vec<f64> {
    let mut energies: Vec<f64> = Vec::new();
    for fb in flat_bands(s, tol) {
        if !energies.iter().any(|e| (e - fb.energy).abs() < tol) {
            energies.push(fb.energy);
        }
    }
    energies
}

/// Maximal runs of eigenvalues whose consecutive gaps are at most `tol`,
/// as inclusive index ranges.
pub fn clusters(values: &[f64], tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=values.len() {
        if k == values.len() || values[k] - values[k - 1] > tol {
            if !values.is_empty() {
                out.push((start, k - 1));
            }
            start = k;
        }
    }
    out
}

#[derive(Debug, Clone)]
pub enum BandGradient {
    /// Feynman-Hellmann gradient of a simple band.
    Simple { value: f64, gradient: Vec<f64> },
    /// Cluster `lo..=hi` and the matrices `<v_a, d_k h0 v_b>` on it.
    Degenerate {
        value: f64,
        cluster: (usize, usize),
        matrices: Vec<CMatrix>,
    },
}

impl BandGradient {
    pub fn value(&self) -> f64 {
        match self {
            BandGradient::Simple { value, .. } | BandGradient::Degenerate { value, .. } => *value,
        }
    }

    pub fn simple(&self) -> Option<&[f64]> {
        match self {
            BandGradient::Simple { gradient, .. } => Some(gradient),
            BandGradient::Degenerate { .. } => None,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, BandGradient::Degenerate { .. })
    }
}

/// Derivative matrices in the eigenbasis: `V* d_k h0 V`.
pub(crate) fn eigenbasis_derivatives(g: &QuotientGraph, xi: &[f64], eig: &Eigen<Complex64>) -> Vec<CMatrix> {
    fiber_gradient(g, xi)
        .into_iter()
        .map(|d| eig.vectors.adjoint() * d * &eig.vectors)
        .collect()
}

pub fn band_gradient(
    g: &QuotientGraph,
    xi: &[f64],
    j: usize,
    degeneracy_tol: f64,
) -> Result<BandGradient> {
    let n = g.num_vertices();
    if j >= n {
        return Err(Error::InvalidArgument(format!(
            "band index {j} out of range for {n} bands"
        )));
    }
    let xi = reduce_torus(xi);
    let eig = fiber_eigen(g, &xi)?;
    let mut lo = j;
    while lo > 0 && eig.values[lo] - eig.values[lo - 1] <= degeneracy_tol {
        lo -= 1;
    }
    let mut hi = j;
    while hi + 1 < n && eig.values[hi + 1] - eig.values[hi] <= degeneracy_tol {
        hi += 1;
    }
    let derivs = eigenbasis_derivatives(g, &xi, &eig);
    let value = eig.values[j];
    if lo == hi {
        Ok(BandGradient::Simple {
            value,
            gradient: derivs.iter().map(|m| m[(j, j)].re).collect(),
        })
    } else {
        let size = hi - lo + 1;
        Ok(BandGradient::Degenerate {
            value,
            cluster: (lo, hi),
            matrices: derivs
                .iter()
                .map(|m| m.view((lo, lo), (size, size)).into_owned())
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{builtin, BUILTIN_NAMES};
    use approx::assert_abs_diff_eq;

    #[test]
    fn zd1_grid_four() {
        let g = builtin("zd:1").unwrap();
        let s = sample_bands(&g, 4, false).unwrap();
        let got: Vec<f64> = s.band(0).collect();
        for (x, y) in got.iter().zip([0.0, 2.0, 4.0, 2.0]) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-14);
        }
    }

    #[test]
    fn hexagonal_single_node() {
        let g = builtin("hexagonal").unwrap();
        let s = sample_bands(&g, 1, true).unwrap();
        assert_eq!(s.num_nodes(), 1);
        assert_abs_diff_eq!(s.values[0][0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.values[0][1], 6.0, epsilon = 1e-14);
    }

    #[test]
    fn ground_state_is_constant_per_orbit() {
        for name in BUILTIN_NAMES {
            let g = builtin(name).unwrap();
            let s = sample_bands(&g, 1, true).unwrap();
            assert_abs_diff_eq!(s.values[0][0], 0.0, epsilon = 1e-12);
            let v = s.vectors.as_ref().unwrap()[0].column(0).into_owned();
            for k in 1..v.len() {
                assert_abs_diff_eq!((v[k] - v[0]).norm(), 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn stored_vectors_have_small_residuals() {
        let g = builtin("kagome").unwrap();
        let s = sample_bands(&g, 6, true).unwrap();
        for (node, v) in s.vectors.as_ref().unwrap().iter().enumerate() {
            let h = assemble_fiber(&g, &s.xi[node]).matrix;
            for k in 0..3 {
                let col = v.column(k);
                let r = &h * col - col * Complex64::new(s.values[node][k], 0.0);
                assert!(r.norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn hexagonal_projection_methods_agree() {
        let g = builtin("hexagonal").unwrap();
        let p = spectral_projection(&g, &[0.0, 0.0], (-0.5, 0.5), ProjectionMethod::Eigen).unwrap();
        let q = spectral_projection(&g, &[0.0, 0.0], (-0.5, 0.5), ProjectionMethod::Riesz).unwrap();
        assert!(linalg::max_abs(&(&p - &q)) < 1e-8);
        let half = Complex64::new(0.5, 0.0);
        for j in 0..2 {
            for l in 0..2 {
                assert_abs_diff_eq!((p[(j, l)] - half).norm(), 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn total_and_empty_projections() {
        let g = builtin("kagome").unwrap();
        let xi = [0.1, 0.2];
        for method in [ProjectionMethod::Eigen, ProjectionMethod::Riesz] {
            let p = spectral_projection(&g, &xi, (-1.0, 7.0), method).unwrap();
            assert!(linalg::max_abs(&(p - CMatrix::identity(3, 3))) < 1e-10);
            let z = spectral_projection(&g, &xi, (10.0, 11.0), method).unwrap();
            assert!(linalg::max_abs(&z) < 1e-10);
        }
    }

    #[test]
    fn riesz_refuses_eigenvalue_on_contour() {
        let g = builtin("zd:1").unwrap();
        let err = spectral_projection(&g, &[0.25], (1.0, 2.0), ProjectionMethod::Riesz).unwrap_err();
        assert!(matches!(err, Error::ContourTooClose { .. }), "{err}");
    }

    #[test]
    fn multiplicities() {
        let hex = builtin("hexagonal").unwrap();
        assert_eq!(multiplicity(&hex, &[1.0 / 3.0, 2.0 / 3.0], 3.0, 1e-8).unwrap(), 2);
        let z = builtin("zd:1").unwrap();
        assert_eq!(multiplicity(&z, &[0.25], 2.0, 1e-8).unwrap(), 1);
        assert_eq!(multiplicity(&z, &[0.25], 100.0, 1e-8).unwrap(), 0);
    }

    #[test]
    fn flat_band_detection() {
        let z = builtin("zd:1").unwrap();
        assert!(detect_flat_bands(&sample_bands(&z, 16, false).unwrap(), 1e-8).is_empty());
        let k = builtin("kagome").unwrap();
        let flat = detect_flat_bands(&sample_bands(&k, 32, false).unwrap(), 1e-8);
        assert_eq!(flat.len(), 1);
    }

    #[test]
    fn decoupled_vertex_gives_flat_band() {
        use crate::crystal::{OrientedEdge, Vertex};
        let g = QuotientGraph::from_unoriented(
            1,
            vec![
                Vertex { id: "a".into(), m0: 1.0, r0: 0.0 },
                Vertex { id: "b".into(), m0: 1.0, r0: -0.75 },
            ],
            vec![
                OrientedEdge::new(0, 0, vec![1], 1.0),
                OrientedEdge::new(1, 1, vec![0], 1.0),
            ],
        )
        .unwrap();
        // the zero-index loop at b contributes deg 2 and -2 to the diagonal;
        // the level sits below the dispersive band so the sorted band is flat
        let flat = detect_flat_bands(&sample_bands(&g, 16, false).unwrap(), 1e-8);
        assert_eq!(flat.len(), 1);
        assert_abs_diff_eq!(flat[0], -0.75, epsilon = 1e-14);
    }

    #[test]
    fn gradients() {
        let z = builtin("zd:1").unwrap();
        let gr = band_gradient(&z, &[0.25], 0, 1e-8).unwrap();
        assert_abs_diff_eq!(gr.simple().unwrap()[0], 4.0 * PI, epsilon = 1e-12);
        let hex = builtin("hexagonal").unwrap();
        for j in 0..2 {
            match band_gradient(&hex, &[1.0 / 3.0, 2.0 / 3.0], j, 1e-8).unwrap() {
                BandGradient::Degenerate { cluster, matrices, .. } => {
                    assert_eq!(cluster, (0, 1));
                    assert_eq!(matrices.len(), 2);
                    assert_eq!(matrices[0].shape(), (2, 2));
                }
                other => panic!("expected a degenerate marker, got {other:?}"),
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = 1e-5;
        for name in BUILTIN_NAMES {
            let g = builtin(name).unwrap();
            let d = g.dimension();
            let xi: Vec<f64> = (0..d).map(|k| 0.113 + 0.217 * k as f64).collect();
            for j in 0..g.num_vertices() {
                let gr = band_gradient(&g, &xi, j, 1e-8).unwrap();
                let Some(grad) = gr.simple() else { continue };
                for k in 0..d {
                    let mut p = xi.clone();
                    let mut m = xi.clone();
                    p[k] += h;
                    m[k] -= h;
                    let fd = (fiber_eigenvalues(&g, &p).unwrap()[j]
                        - fiber_eigenvalues(&g, &m).unwrap()[j])
                        / (2.0 * h);
                    assert!((fd - grad[k]).abs() < 1e-6, "{name} band {j} axis {k}");
                }
            }
        }
    }

    #[test]
    fn cluster_runs() {
        assert_eq!(clusters(&[0.0, 1.0, 1.0, 2.0], 1e-9), vec![(0, 0), (1, 2), (3, 3)]);
        assert!(clusters(&[], 1e-9).is_empty());
    }

    #[test]
    fn node_indexing_round_trips() {
        for node in 0..27 {
            let mu = node_multi_index(node, 3, 3);
            assert_eq!(node_linear_index(&mu, 3), node);
        }
        assert_eq!(node_multi_index(1, 4, 2), vec![0, 1]);
    }
}
