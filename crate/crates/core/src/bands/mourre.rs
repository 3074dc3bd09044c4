//! Numerical Mourre constants from the commutator fiber
//! `pi_I(xi) |grad lambda|^2 pi_I(xi)`.

use rayon::prelude::*;
use serde::Serialize;

use super::{
    clusters, default_degeneracy_tol, eigenbasis_derivatives, estimate_thresholds, fiber_eigen,
    grid_point, node_multi_index,
};
use crate::crystal::QuotientGraph;
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MourreReport {
    pub interval: [f64; 2],
    pub grid: usize,
    /// Lower bound `a_I`; `None` when no sampled fiber has spectrum in `I`.
    pub a_i: Option<f64>,
    /// Whether `I` meets the estimated thresholds; the bound is advisory then.
    pub threshold_flag: bool,
    pub thresholds_in_interval: Vec<f64>,
    /// Grid nodes where a degenerate cluster meets `I`.
    pub degenerate_nodes: Vec<Vec<f64>>,
    pub contributing_nodes: usize,
    pub degeneracy_tol: f64,
}

/// Threshold-scan resolution used for the flag: the Mourre grid, capped so
/// the scan stays cheap in three dimensions.
fn threshold_grid(grid: usize, dimension: usize) -> usize {
    let cap = if dimension <= 2 { 128 } else { 32 };
    grid.clamp(8, cap)
}

struct NodeResult {
    contribution: Option<f64>,
    degenerate: bool,
}

fn node_contribution(g: &QuotientGraph, xi: &[f64], interval: (f64, f64), tol: f64) -> Result<NodeResult> {
    let eig = fiber_eigen(g, xi)?;
    let in_interval = |v: f64| v >= interval.0 && v <= interval.1;
    let groups: Vec<(usize, usize)> = clusters(&eig.values, tol)
        .into_iter()
        .filter(|&(lo, hi)| (lo..=hi).any(|k| in_interval(eig.values[k])))
        .collect();
    if groups.is_empty() {
        return Ok(NodeResult {
            contribution: None,
            degenerate: false,
        });
    }
    let derivs = eigenbasis_derivatives(g, xi, &eig);
    let mut best = f64::INFINITY;
    let mut degenerate = false;
    for (lo, hi) in groups {
        let value = if lo == hi {
            derivs.iter().map(|m| m[(lo, lo)].re.powi(2)).sum::<f64>()
        } else {
            degenerate = true;
            let size = hi - lo + 1;
            let mut s = CMatrix::zeros(size, size);
            for m in &derivs {
                let c = m.view((lo, lo), (size, size));
                s += c * c;
            }
            let ev = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&s))
                .ok_or(Error::EigenNonConvergence { xi: xi.to_vec() })?;
            ev[0].max(0.0)
        };
        best = best.min(value);
    }
    Ok(NodeResult {
        contribution: Some(best),
        degenerate,
    })
}

pub fn mourre_constant(
    g: &QuotientGraph,
    interval: (f64, f64),
    grid: usize,
    degeneracy_tol: Option<f64>,
) -> Result<MourreReport> {
    let (a, b) = interval;
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::InvalidArgument(format!(
            "interval [{a}, {b}] must be finite and ordered"
        )));
    }
    if grid == 0 {
        return Err(Error::InvalidArgument("grid resolution must be at least 1".into()));
    }
    let tol = degeneracy_tol.unwrap_or_else(|| default_degeneracy_tol(g));
    let d = g.dimension();
    let count = grid.pow(d as u32);
    let results: Vec<(Vec<f64>, NodeResult)> = (0..count)
        .into_par_iter()
        .map(|i| {
            let xi = grid_point(&node_multi_index(i, grid, d), grid);
            node_contribution(g, &xi, interval, tol).map(|r| (xi, r))
        })
        .collect::<Result<_>>()?;

    let mut a_i: Option<f64> = None;
    let mut degenerate_nodes = Vec::new();
    let mut contributing = 0;
    for (xi, r) in results {
        if let Some(c) = r.contribution {
            contributing += 1;
            a_i = Some(a_i.map_or(c, |m| m.min(c)));
        }
        if r.degenerate {
            degenerate_nodes.push(xi);
        }
    }

    let thresholds = estimate_thresholds(g, threshold_grid(grid, d), 40)?;
    let inside = thresholds.meets(interval, thresholds.merge_tolerance);
    Ok(MourreReport {
        interval: [a, b],
        grid,
        a_i,
        threshold_flag: !inside.is_empty(),
        thresholds_in_interval: inside,
        degenerate_nodes,
        contributing_nodes: contributing,
        degeneracy_tol: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::builtin;
    use std::f64::consts::PI;

    #[test]
    fn zd1_interior_interval() {
        let g = builtin("zd:1").unwrap();
        let r = mourre_constant(&g, (1.0, 3.0), 1024, None).unwrap();
        let expect = 12.0 * PI * PI;
        let got = r.a_i.unwrap();
        assert!((got - expect).abs() < 0.01 * expect, "{got}");
        assert!(!r.threshold_flag);
    }

    #[test]
    fn zd1_band_top() {
        let g = builtin("zd:1").unwrap();
        let r = mourre_constant(&g, (3.5, 4.5), 256, None).unwrap();
        assert!(r.threshold_flag);
        assert!(r.a_i.unwrap() < 1e-2);
    }

    #[test]
    fn empty_interval_has_no_bound() {
        let g = builtin("zd:1").unwrap();
        let r = mourre_constant(&g, (10.0, 11.0), 64, None).unwrap();
        assert_eq!(r.a_i, None);
        assert_eq!(r.contributing_nodes, 0);
    }

    #[test]
    fn hexagonal_away_from_thresholds() {
        let g = builtin("hexagonal").unwrap();
        let r = mourre_constant(&g, (0.5, 1.5), 128, None).unwrap();
        assert!(r.a_i.unwrap() > 0.0);
        assert!(!r.threshold_flag, "{:?}", r.thresholds_in_interval);
    }
}
