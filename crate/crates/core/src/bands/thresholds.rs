//! Numerical estimate of the threshold set: critical values of the sorted
//! band functions, band-crossing values and flat-band energies.
//!
//! Candidates come from a periodic grid scan. Extrema are refined by a
//! compass pattern search on `+-lambda_j` followed by a Newton polish on the
//! gradient; saddles go straight to Newton. The result is an estimate, not a
//! certificate.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{band_gradient, flat_bands, sample_bands, spectral_scale, BandGradient, BandSample};
use crate::crystal::QuotientGraph;
use crate::error::{Error, Result};
use crate::floquet::reduce_torus;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdKind {
    BandMin,
    BandMax,
    Saddle,
    Crossing,
    FlatBand,
}

impl ThresholdKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdKind::BandMin => "band-min",
            ThresholdKind::BandMax => "band-max",
            ThresholdKind::Saddle => "saddle",
            ThresholdKind::Crossing => "crossing",
            ThresholdKind::FlatBand => "flat-band",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdEntry {
    pub value: f64,
    pub kind: ThresholdKind,
    /// Witness point on the torus.
    pub xi: Vec<f64>,
    /// Zero-based band indices involved.
    pub bands: Vec<usize>,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_norm: Option<f64>,
    /// Grid variance, for flat-band entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub grid: usize,
    pub refine_iters: usize,
    /// Gradient norm below which a refinement counts as converged.
    pub tolerance: f64,
    pub merge_tolerance: f64,
    pub entries: Vec<ThresholdEntry>,
}

impl ThresholdReport {
    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    /// Entry closest to `value`, if within `tol`.
    pub fn find(&self, value: f64, tol: f64) -> Option<&ThresholdEntry> {
        self.entries
            .iter()
            .filter(|e| (e.value - value).abs() <= tol)
            .min_by(|a, b| (a.value - value).abs().total_cmp(&(b.value - value).abs()))
    }

    pub fn meets(&self, interval: (f64, f64), slack: f64) -> Vec<f64> {
        self.entries
            .iter()
            .map(|e| e.value)
            .filter(|&v| v >= interval.0 - slack && v <= interval.1 + slack)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ThresholdOptions {
    pub grid: usize,
    pub refine_iters: usize,
    pub merge_tol: f64,
    /// Band range below which a band is flat.
    pub flat_tol: f64,
    /// Gap below which two bands are considered crossing.
    pub crossing_tol: f64,
    pub gradient_tol: f64,
    /// Pattern-search evaluation budget per candidate.
    pub max_evals: usize,
}

impl ThresholdOptions {
    pub fn new(grid: usize, refine_iters: usize) -> Self {
        Self {
            grid,
            refine_iters,
            merge_tol: 1e-6,
            flat_tol: 1e-8,
            crossing_tol: 1e-6,
            gradient_tol: 1e-6,
            max_evals: 20_000,
        }
    }
}

pub fn estimate_thresholds(g: &QuotientGraph, grid: usize, refine_iters: usize) -> Result<ThresholdReport> {
    estimate_thresholds_with(g, &ThresholdOptions::new(grid, refine_iters))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Target {
    Min,
    Max,
    Saddle,
    Gap,
}

#[derive(Debug, Clone)]
struct Candidate {
    band: usize,
    target: Target,
    xi: Vec<f64>,
}

pub fn estimate_thresholds_with(g: &QuotientGraph, opts: &ThresholdOptions) -> Result<ThresholdReport> {
    if opts.grid < 3 {
        return Err(Error::InvalidArgument(
            "threshold scan needs a grid of at least 3 nodes per axis".into(),
        ));
    }
    let sample = sample_bands(g, opts.grid, false)?;
    let zero = 1e-12 * spectral_scale(g).max(1.0);
    let mut entries = Vec::new();

    let flat = flat_bands(&sample, opts.flat_tol);
    for fb in &flat {
        entries.push(ThresholdEntry {
            value: fb.energy,
            kind: ThresholdKind::FlatBand,
            xi: sample.xi[0].clone(),
            bands: vec![fb.band],
            converged: true,
            gradient_norm: None,
            variance: Some(fb.variance),
        });
    }

    let mut candidates = Vec::new();
    for j in 0..sample.num_bands() {
        if flat.iter().any(|f| f.band == j) {
            continue;
        }
        candidates.extend(scan_band(&sample, j, zero));
    }
    for j in 0..sample.num_bands().saturating_sub(1) {
        candidates.extend(scan_gap(&sample, j, zero, opts.crossing_tol));
    }

    let refined: Vec<Option<ThresholdEntry>> = candidates
        .par_iter()
        .map(|c| refine(g, c, opts))
        .collect::<Result<_>>()?;
    entries.extend(refined.into_iter().flatten());

    Ok(ThresholdReport {
        grid: opts.grid,
        refine_iters: opts.refine_iters,
        tolerance: opts.gradient_tol,
        merge_tolerance: opts.merge_tol,
        entries: merge(entries, opts.merge_tol),
    })
}

/// Grid nodes where every axis shows a sign change of the discrete gradient.
/// Candidates with the same kind and grid value are kept once.
fn scan_band(s: &BandSample, j: usize, zero: f64) -> Vec<Candidate> {
    let mut seen: Vec<(Target, f64)> = Vec::new();
    let mut out = Vec::new();
    for node in 0..s.num_nodes() {
        let v = s.values[node][j];
        let mut all_min = true;
        let mut all_max = true;
        let mut critical = true;
        for k in 0..s.dimension {
            let p = s.values[s.neighbor(node, k, true)][j] - v;
            let m = s.values[s.neighbor(node, k, false)][j] - v;
            let is_min = p >= -zero && m >= -zero;
            let is_max = p <= zero && m <= zero;
            if !is_min && !is_max {
                critical = false;
                break;
            }
            all_min &= is_min;
            all_max &= is_max;
        }
        if !critical {
            continue;
        }
        let target = if all_min {
            Target::Min
        } else if all_max {
            Target::Max
        } else {
            Target::Saddle
        };
        if seen.iter().any(|&(t, x)| t == target && (x - v).abs() <= zero) {
            continue;
        }
        seen.push((target, v));
        out.push(Candidate {
            band: j,
            target,
            xi: s.xi[node].clone(),
        });
    }
    out
}

/// Local minima of the gap `lambda_{j+1} - lambda_j` on the grid.
fn scan_gap(s: &BandSample, j: usize, zero: f64, crossing_tol: f64) -> Vec<Candidate> {
    let gap = |node: usize| s.values[node][j + 1] - s.values[node][j];
    let max_gap = (0..s.num_nodes()).map(gap).fold(0.0, f64::max);
    if max_gap < crossing_tol {
        // the pair is degenerate everywhere: no isolated crossing
        return Vec::new();
    }
    let mut seen: Vec<(f64, f64)> = Vec::new();
    let mut out = Vec::new();
    for node in 0..s.num_nodes() {
        let g0 = gap(node);
        let is_min = (0..s.dimension).all(|k| {
            gap(s.neighbor(node, k, true)) >= g0 - zero && gap(s.neighbor(node, k, false)) >= g0 - zero
        });
        if !is_min {
            continue;
        }
        let level = s.values[node][j];
        if seen
            .iter()
            .any(|&(a, b)| (a - g0).abs() <= zero && (b - level).abs() <= zero)
        {
            continue;
        }
        seen.push((g0, level));
        out.push(Candidate {
            band: j,
            target: Target::Gap,
            xi: s.xi[node].clone(),
        });
    }
    out
}

fn eigenvalues(g: &QuotientGraph, xi: &[f64]) -> Result<Vec<f64>> {
    super::fiber_eigenvalues(g, xi)
}

/// Compass search minimizing `f` from `x` with initial step `step`, halving
/// the step `halvings` times.
fn pattern_search<F>(mut f: F, x: &mut Vec<f64>, step: f64, halvings: usize, max_evals: usize) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut fx = f(x)?;
    let mut evals = 1;
    let mut step = step;
    for _ in 0..=halvings {
        loop {
            let mut improved = false;
            'poll: for k in 0..x.len() {
                for sign in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[k] += sign * step;
                    let fy = f(&y)?;
                    evals += 1;
                    if fy < fx {
                        *x = y;
                        fx = fy;
                        improved = true;
                        break 'poll;
                    }
                }
            }
            if !improved || evals >= max_evals {
                break;
            }
        }
        if evals >= max_evals {
            break;
        }
        step *= 0.5;
    }
    Ok(fx)
}

fn simple_gradient(g: &QuotientGraph, xi: &[f64], j: usize, tol: f64) -> Result<Option<Vec<f64>>> {
    Ok(band_gradient(g, xi, j, tol)?.simple().map(<[f64]>::to_vec))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

const HESSIAN_STEP: f64 = 1e-5;

/// Hessian of a simple band by central differences of the analytic gradient.
fn hessian(g: &QuotientGraph, xi: &[f64], j: usize, tol: f64) -> Result<Option<DMatrix<f64>>> {
    let d = xi.len();
    let mut h = DMatrix::zeros(d, d);
    for k in 0..d {
        let mut p = xi.to_vec();
        let mut m = xi.to_vec();
        p[k] += HESSIAN_STEP;
        m[k] -= HESSIAN_STEP;
        let (Some(gp), Some(gm)) = (simple_gradient(g, &p, j, tol)?, simple_gradient(g, &m, j, tol)?)
        else {
            return Ok(None);
        };
        for l in 0..d {
            h[(l, k)] = (gp[l] - gm[l]) / (2.0 * HESSIAN_STEP);
        }
    }
    Ok(Some((&h + h.transpose()) * 0.5))
}

/// Newton iteration on the band gradient with a pseudo-inverse Hessian and
/// backtracking on the gradient norm.
fn newton(g: &QuotientGraph, x: &mut Vec<f64>, j: usize, tol: f64) -> Result<()> {
    let Some(mut grad) = simple_gradient(g, x, j, tol)? else {
        return Ok(());
    };
    for _ in 0..50 {
        let gn = norm(&grad);
        if gn < 1e-12 {
            break;
        }
        let Some(h) = hessian(g, x, j, tol)? else { break };
        let Some(eig) = linalg::symmetric_eigen(&h) else { break };
        let scale = eig.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        let d = x.len();
        let mut delta = vec![0.0; d];
        for (i, &ev) in eig.values.iter().enumerate() {
            if ev.abs() <= 1e-10 * scale {
                continue;
            }
            let v = eig.vectors.column(i);
            let c: f64 = (0..d).map(|k| v[k] * grad[k]).sum::<f64>() / ev;
            for k in 0..d {
                delta[k] -= c * v[k];
            }
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let y: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + t * b).collect();
            if let Some(gy) = simple_gradient(g, &y, j, tol)? {
                if norm(&gy) < gn {
                    *x = y;
                    grad = gy;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(())
}

fn refine(g: &QuotientGraph, c: &Candidate, opts: &ThresholdOptions) -> Result<Option<ThresholdEntry>> {
    let tol = super::default_degeneracy_tol(g);
    let step = 1.0 / opts.grid as f64;
    let j = c.band;
    let mut x = c.xi.clone();

    if c.target == Target::Gap {
        let gap = pattern_search(
            |y| eigenvalues(g, y).map(|e| e[j + 1] - e[j]),
            &mut x,
            step,
            opts.refine_iters,
            opts.max_evals,
        )?;
        if gap >= opts.crossing_tol {
            return Ok(None);
        }
        let e = eigenvalues(g, &x)?;
        return Ok(Some(ThresholdEntry {
            value: 0.5 * (e[j] + e[j + 1]),
            kind: ThresholdKind::Crossing,
            xi: reduce_torus(&x),
            bands: vec![j, j + 1],
            converged: true,
            gradient_norm: None,
            variance: None,
        }));
    }

    match c.target {
        Target::Min | Target::Max => {
            let sign = if c.target == Target::Min { 1.0 } else { -1.0 };
            pattern_search(
                |y| eigenvalues(g, y).map(|e| sign * e[j]),
                &mut x,
                step,
                opts.refine_iters,
                opts.max_evals,
            )?;
            newton(g, &mut x, j, tol)?;
        }
        _ => newton(g, &mut x, j, tol)?,
    }

    let e = eigenvalues(g, &x)?;
    let below = (j > 0).then(|| e[j] - e[j - 1]);
    let above = (j + 1 < e.len()).then(|| e[j + 1] - e[j]);
    if let Some((gap, other)) = [(below, j.wrapping_sub(1)), (above, j + 1)]
        .into_iter()
        .filter_map(|(gap, o)| gap.map(|v| (v, o)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
    {
        if gap < opts.crossing_tol {
            let mut bands = vec![j.min(other), j.max(other)];
            bands.dedup();
            return Ok(Some(ThresholdEntry {
                value: 0.5 * (e[j] + e[other]),
                kind: ThresholdKind::Crossing,
                xi: reduce_torus(&x),
                bands,
                converged: true,
                gradient_norm: None,
                variance: None,
            }));
        }
    }

    let grad = band_gradient(g, &x, j, tol)?;
    let gn = match &grad {
        BandGradient::Simple { gradient, .. } => norm(gradient),
        BandGradient::Degenerate { .. } => f64::INFINITY,
    };
    let converged = gn < opts.gradient_tol;
    let mut kind = match c.target {
        Target::Min => ThresholdKind::BandMin,
        Target::Max => ThresholdKind::BandMax,
        _ => ThresholdKind::Saddle,
    };
    if converged {
        if let Some(h) = hessian(g, &x, j, tol)? {
            if let Some(eig) = linalg::symmetric_eigen(&h) {
                let scale = eig.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
                let cut = 1e-6 * scale.max(1.0);
                let pos = eig.values.iter().any(|&v| v > cut);
                let neg = eig.values.iter().any(|&v| v < -cut);
                kind = match (pos, neg) {
                    (true, false) => ThresholdKind::BandMin,
                    (false, true) => ThresholdKind::BandMax,
                    (true, true) => ThresholdKind::Saddle,
                    (false, false) => kind,
                };
            }
        }
    }
    Ok(Some(ThresholdEntry {
        value: e[j],
        kind,
        xi: reduce_torus(&x),
        bands: vec![j],
        converged,
        gradient_norm: gn.is_finite().then_some(gn),
        variance: None,
    }))
}

fn priority(e: &ThresholdEntry) -> u8 {
    match (e.kind, e.converged) {
        (ThresholdKind::FlatBand, _) => 3,
        (ThresholdKind::Crossing, _) => 2,
        (_, true) => 1,
        (_, false) => 0,
    }
}

/// Sorts by value and keeps one entry per cluster of values closer than
/// `tol`, preferring flat bands, then crossings, then converged points.
fn merge(mut entries: Vec<ThresholdEntry>, tol: f64) -> Vec<ThresholdEntry> {
    entries.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut out: Vec<ThresholdEntry> = Vec::new();
    let mut last_value = f64::NEG_INFINITY;
    for e in entries {
        let joins = e.value - last_value <= tol;
        last_value = e.value;
        match out.last_mut() {
            Some(best) if joins => {
                if priority(&e) > priority(best) {
                    *best = e;
                }
            }
            _ => out.push(e),
        }
    }
    out
}
