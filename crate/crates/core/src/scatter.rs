//! Time evolution `e^{-itH}` on real-space operators, spectral filters and
//! finite-time probes of the wave operators `W = s-lim e^{itH} J* e^{-itH0} E_{H0}(I)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::crystal::{PerturbationSpec, QuotientGraph};
use crate::linalg::{self, CsrMatrix, DENSE_LIMIT};
use crate::realspace::{build_h, build_h0, BoxSpec, RealSpaceOperator};
use crate::{Error, Result};

/// Largest dimension accepted by [`Method::DenseExp`].
pub const DENSE_EXP_LIMIT: usize = 2048;

/// Chebyshev degree of the polynomial spectral filter above the dense limit.
pub const FILTER_DEGREE: usize = 2048;

/// Cells from the truncation boundary counted as escaped.
pub const ESCAPE_WIDTH: usize = 5;

/// Escape fraction above which a probe result is flagged.
pub const ESCAPE_WARNING: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Chebyshev,
    DenseExp,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chebyshev" => Ok(Method::Chebyshev),
            "dense-exp" => Ok(Method::DenseExp),
            _ => Err(Error::InvalidArgument(format!("unknown method {s:?}"))),
        }
    }
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// `J_0(x), ..., J_kmax(x)` by Miller's backward recurrence, normalized
/// with `J_0 + 2 sum_k J_2k = 1`.
pub fn bessel_j(kmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let mut start = kmax.max(ax.ceil() as usize) + 40 + (ax.sqrt() as usize) * 4;
    start += start % 2;
    let mut next = 0.0;
    let mut cur = 1e-300;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / ax * cur - next;
        next = cur;
        cur = prev;
        let j = k - 1;
        if j <= kmax {
            out[j] = cur;
        }
        if j % 2 == 0 && j > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            // rescale everything seen so far
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
            for v in out.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    // cur now holds J_0
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (k, v) in out.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// Degree used for a propagation of length `t` on spectral half-width `r`.
pub fn chebyshev_degree(r: f64, t: f64) -> usize {
    (1.1 * r * t.abs()).ceil() as usize + 40
}

fn chebyshev_propagate(h: &CsrMatrix, psi: &[Complex64], t: f64) -> Vec<Complex64> {
    let (a, b) = h.gershgorin();
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let global = Complex64::from_polar(1.0, -c * t);
    if r == 0.0 || t == 0.0 {
        return psi.iter().map(|z| z * global).collect();
    }
    let degree = chebyshev_degree(r, t);
    let bessel = bessel_j(degree, r * t);
    let dim = psi.len();
    // H~ = (H - c) / r
    let apply = |x: &[Complex64], out: &mut [Complex64]| {
        h.mul_complex(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = (*o - xi * c) / r;
        }
    };
    let mut prev = psi.to_vec();
    let mut cur = vec![Complex64::new(0.0, 0.0); dim];
    apply(&prev, &mut cur);
    let mut acc: Vec<Complex64> = prev.iter().map(|z| z * bessel[0]).collect();
    let mut phase = Complex64::new(0.0, -1.0);
    for (s, z) in acc.iter_mut().zip(&cur) {
        *s += z * (phase * 2.0 * bessel[1]);
    }
    let mut next = vec![Complex64::new(0.0, 0.0); dim];
    for &jk in &bessel[2..] {
        apply(&cur, &mut next);
        for (n, p) in next.iter_mut().zip(&prev) {
            *n = *n * 2.0 - p;
        }
        phase *= Complex64::new(0.0, -1.0);
        let w = phase * 2.0 * jk;
        for (s, z) in acc.iter_mut().zip(&next) {
            *s += z * w;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    acc.iter().map(|z| z * global).collect()
}

fn dense_exp(h: &CsrMatrix, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
    let dim = h.dim();
    if dim > DENSE_EXP_LIMIT {
        return Err(Error::TooLarge {
            what: "dense matrix exponential",
            dimension: dim,
            limit: DENSE_EXP_LIMIT,
        });
    }
    let m: DMatrix<Complex64> = h.to_dense().map(|v| Complex64::new(0.0, -t * v));
    let u = m.exp();
    let v = u * nalgebra::DVector::from_column_slice(psi);
    Ok(v.iter().copied().collect())
}

/// `e^{-itH} psi` for a real symmetric sparse `H`.
pub fn propagate(h: &CsrMatrix, psi: &[Complex64], t: f64, method: Method) -> Result<Vec<Complex64>> {
    if psi.len() != h.dim() {
        return Err(Error::InvalidArgument(format!(
            "vector has length {}, operator dimension is {}",
            psi.len(),
            h.dim()
        )));
    }
    if !(norm(psi) > 0.0) {
        return Err(Error::InvalidArgument("initial vector must be nonzero".into()));
    }
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time {t} is not finite")));
    }
    match method {
        Method::Chebyshev => Ok(chebyshev_propagate(h, psi, t)),
        Method::DenseExp => dense_exp(h, psi, t),
    }
}

/// `e^{-it op} psi` in the orthonormal basis of the operator.
pub fn evolve(op: &RealSpaceOperator, psi: &[Complex64], t: f64, method: Method) -> Result<Vec<Complex64>> {
    propagate(op.matrix(), psi, t, method)
}

/// A state carried along `e^{-itH}`.
#[derive(Debug, Clone)]
pub struct EvolutionState<'a> {
    pub op: &'a RealSpaceOperator,
    pub values: Vec<Complex64>,
    pub time: f64,
    pub initial_norm: f64,
}

impl<'a> EvolutionState<'a> {
    pub fn new(op: &'a RealSpaceOperator, psi: Vec<Complex64>) -> Result<Self> {
        let initial_norm = norm(&psi);
        if psi.len() != op.dim() || !(initial_norm > 0.0) {
            return Err(Error::InvalidArgument("initial state must be nonzero and match the operator".into()));
        }
        Ok(Self {
            op,
            values: psi,
            time: 0.0,
            initial_norm,
        })
    }

    pub fn advance(&mut self, dt: f64, method: Method) -> Result<()> {
        self.values = evolve(self.op, &self.values, dt, method)?;
        self.time += dt;
        Ok(())
    }

    /// `| |state| / |initial| - 1 |`.
    pub fn norm_drift(&self) -> f64 {
        (norm(&self.values) / self.initial_norm - 1.0).abs()
    }
}

fn check_interval(interval: (f64, f64)) -> Result<()> {
    if !(interval.0 <= interval.1) || !interval.0.is_finite() || !interval.1.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "interval [{}, {}] is not well ordered",
            interval.0, interval.1
        )));
    }
    Ok(())
}

/// `E_H(I) psi` for the closed interval `I`. Exact through a dense
/// eigendecomposition up to the dense limit; above it a Jackson-damped
/// Chebyshev approximation of the indicator, which is only approximately
/// idempotent.
pub fn spectral_filter(op: &RealSpaceOperator, interval: (f64, f64), psi: &[Complex64]) -> Result<Vec<Complex64>> {
    filter_matrix(op.matrix(), interval, psi)
}

pub fn filter_matrix(h: &CsrMatrix, interval: (f64, f64), psi: &[Complex64]) -> Result<Vec<Complex64>> {
    check_interval(interval)?;
    if psi.len() != h.dim() {
        return Err(Error::InvalidArgument("vector does not match the operator".into()));
    }
    if h.dim() <= DENSE_LIMIT {
        let eig = linalg::symmetric_eigen(&h.to_dense())
            .ok_or_else(|| Error::SolverNonConvergence("dense symmetric eigensolver".into()))?;
        let mut out = vec![Complex64::new(0.0, 0.0); psi.len()];
        for (k, &lambda) in eig.values.iter().enumerate() {
            if lambda < interval.0 || lambda > interval.1 {
                continue;
            }
            let col = eig.vectors.column(k);
            let coef: Complex64 = col.iter().zip(psi).map(|(v, z)| z * *v).sum();
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o += coef * *v;
            }
        }
        return Ok(out);
    }
    Ok(jackson_filter(h, interval, psi, FILTER_DEGREE))
}

fn jackson_filter(h: &CsrMatrix, interval: (f64, f64), psi: &[Complex64], degree: usize) -> Vec<Complex64> {
    use std::f64::consts::PI;
    let (a, b) = h.gershgorin();
    let c = 0.5 * (a + b);
    let r = (0.5 * (b - a)).max(f64::MIN_POSITIVE);
    let lo = ((interval.0 - c) / r).clamp(-1.0, 1.0);
    let hi = ((interval.1 - c) / r).clamp(-1.0, 1.0);
    let (ta, tb) = (lo.acos(), hi.acos());
    let m = degree as f64 + 2.0;
    let coef = |k: usize| -> f64 {
        let base = if k == 0 {
            (ta - tb) / PI
        } else {
            2.0 * ((k as f64 * ta).sin() - (k as f64 * tb).sin()) / (k as f64 * PI)
        };
        let jackson = ((m - k as f64) * (PI * k as f64 / m).cos() + (PI * k as f64 / m).sin() / (PI / m).tan()) / m;
        base * jackson
    };
    let dim = psi.len();
    let apply = |x: &[Complex64], out: &mut [Complex64]| {
        h.mul_complex(x, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = (*o - xi * c) / r;
        }
    };
    let mut prev = psi.to_vec();
    let mut cur = vec![Complex64::new(0.0, 0.0); dim];
    apply(&prev, &mut cur);
    let mut acc: Vec<Complex64> = prev.iter().zip(&cur).map(|(p, q)| p * coef(0) + q * coef(1)).collect();
    let mut next = vec![Complex64::new(0.0, 0.0); dim];
    for k in 2..=degree {
        apply(&cur, &mut next);
        for (n, p) in next.iter_mut().zip(&prev) {
            *n = *n * 2.0 - p;
        }
        let w = coef(k);
        for (s, z) in acc.iter_mut().zip(&next) {
            *s += z * w;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    acc
}

/// Normalized Gaussian `exp(-|mu - center|^2 / (4 sigma^2) + i k . mu)` on
/// one vertex of every cell of the window.
pub fn gaussian_packet(
    op: &RealSpaceOperator,
    center: &[f64],
    sigma: f64,
    momentum: &[f64],
    vertex: usize,
) -> Result<Vec<Complex64>> {
    let d = op.dimension();
    if center.len() != d || momentum.len() != d || vertex >= op.num_vertices() || !(sigma > 0.0) {
        return Err(Error::InvalidArgument("packet parameters do not match the window".into()));
    }
    let mut v = vec![Complex64::new(0.0, 0.0); op.dim()];
    for (i, z) in v.iter_mut().enumerate() {
        let (cell, j) = op.site(i);
        if j != vertex {
            continue;
        }
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for k in 0..d {
            let x = cell[k] as f64;
            r2 += (x - center[k]).powi(2);
            phase += momentum[k] * x;
        }
        *z = Complex64::from_polar((-r2 / (4.0 * sigma * sigma)).exp(), phase);
    }
    let nv = norm(&v);
    if !(nv > 0.0) {
        return Err(Error::InvalidArgument("packet vanishes on the window".into()));
    }
    Ok(v.into_iter().map(|z| z / nv).collect())
}

/// One time direction of a probe.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeBranch {
    /// `|w(t_{k+1}) - w(t_k)|`.
    pub cauchy_increments: Vec<f64>,
    /// `| |w(t)| - |E_{H0}(I) psi| |`.
    pub isometry_gaps: Vec<f64>,
    /// Fraction of `|e^{-itH0} E psi|^2` within the escape width of the
    /// truncation boundary.
    pub escape_mass: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord {
    pub times: Vec<f64>,
    pub cauchy_increments: Vec<f64>,
    pub isometry_gaps: Vec<f64>,
    pub escape_mass: Vec<f64>,
    /// The same observables at `-t`.
    pub mirrored: ProbeBranch,
    pub projected_norm: f64,
    pub warnings: Vec<String>,
}

/// Finite-time approximants `w(t) = e^{itH} J* e^{-itH0} E_{H0}(I) psi` on
/// a window. Requires a short-range perturbation.
pub fn wave_operator_probe(
    g: &QuotientGraph,
    p: &PerturbationSpec,
    interval: (f64, f64),
    psi: &[Complex64],
    times: &[f64],
    box_spec: BoxSpec,
) -> Result<ProbeRecord> {
    if p.potential_long.is_some() {
        return Err(Error::InvalidPerturbation(
            "wave-operator probe needs a short-range perturbation; remove potential_long".into(),
        ));
    }
    check_interval(interval)?;
    if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::InvalidArgument("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("times must be strictly increasing".into()));
    }
    let h0 = build_h0(g, box_spec)?;
    let h = build_h(g, p, box_spec)?;
    if psi.len() != h0.dim() {
        return Err(Error::InvalidArgument(format!(
            "vector has length {}, window dimension is {}",
            psi.len(),
            h0.dim()
        )));
    }
    let phi = spectral_filter(&h0, interval, psi)?;
    let projected_norm = norm(&phi);
    let mut warnings = Vec::new();
    if !(projected_norm > 0.0) {
        warnings.push("E_H0(I) psi vanishes; every observable is zero".into());
    }
    let unperturbed = h.matrix() == h0.matrix() && h.weights() == h0.weights();
    // J* from orthonormal l2(m0) to orthonormal l2(m): through function
    // coordinates, where it multiplies by (m0 / m)^(1/2)
    let scale: Vec<f64> = h
        .weights()
        .iter()
        .zip(h0.weights())
        .map(|(m, m0)| m.sqrt() * (m0 / m).sqrt() / m0.sqrt())
        .collect();
    let boundary = h0.boundary_sites(ESCAPE_WIDTH);
    let branch = |sign: f64| -> Result<ProbeBranch> {
        let mut ws: Vec<Vec<Complex64>> = Vec::with_capacity(times.len());
        let mut escape = Vec::with_capacity(times.len());
        for &t in times {
            let tau = sign * t;
            if projected_norm == 0.0 {
                ws.push(phi.clone());
                escape.push(0.0);
                continue;
            }
            let free = evolve(&h0, &phi, tau, Method::Chebyshev)?;
            let out: f64 = boundary.iter().map(|&i| free[i].norm_sqr()).sum();
            escape.push(out / (projected_norm * projected_norm));
            if unperturbed {
                ws.push(phi.clone());
                continue;
            }
            let pulled: Vec<Complex64> = free.iter().zip(&scale).map(|(z, s)| z * *s).collect();
            ws.push(evolve(&h, &pulled, -tau, Method::Chebyshev)?);
        }
        Ok(ProbeBranch {
            cauchy_increments: ws.windows(2).map(|w| distance(&w[1], &w[0])).collect(),
            isometry_gaps: ws.iter().map(|w| (norm(w) - projected_norm).abs()).collect(),
            escape_mass: escape,
        })
    };
    let forward = branch(1.0)?;
    let mirrored = branch(-1.0)?;
    for (label, b) in [("t", &forward), ("-t", &mirrored)] {
        if let Some(k) = b.escape_mass.iter().position(|&e| e > ESCAPE_WARNING) {
            warnings.push(format!(
                "escape mass {:.3e} at {label} = {} exceeds {ESCAPE_WARNING:e}; the window boundary dominates from here on",
                b.escape_mass[k], times[k]
            ));
        }
    }
    Ok(ProbeRecord {
        times: times.to_vec(),
        cauchy_increments: forward.cauchy_increments,
        isometry_gaps: forward.isometry_gaps,
        escape_mass: forward.escape_mass,
        mirrored,
        projected_norm,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::{builtin, SiteEntry, SiteField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut ChaCha8Rng, dim: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..dim {
            for j in i..dim {
                let v: f64 = rng.random_range(-1.0..1.0);
                t.push((i, j, v));
                if i != j {
                    t.push((j, i, v));
                }
            }
        }
        CsrMatrix::from_triplets(dim, &t)
    }

    fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<Complex64> {
        (0..dim)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    /// Series `sum_m (-1)^m (x/2)^{2m+k} / (m! (m+k)!)` for small arguments.
    fn bessel_series(k: usize, x: f64) -> f64 {
        let mut term = (0.5 * x).powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
        let mut sum = term;
        for m in 1..60 {
            term *= -(0.25 * x * x) / (m as f64 * (m + k) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn bessel_matches_series() {
        for &x in &[0.3, 1.0, 2.5, 7.0, -3.0] {
            let j = bessel_j(12, x);
            for k in 0..=12 {
                assert!((j[k] - bessel_series(k, x)).abs() < 1e-13, "k={k} x={x}");
            }
        }
    }

    #[test]
    fn bessel_large_argument_sums_to_one() {
        let x = 900.0;
        let j = bessel_j(chebyshev_degree(1.0, x), x);
        let s: f64 = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
        assert!((s - 1.0).abs() < 1e-12);
        // J_0(900) from the asymptotic expansion
        let asym = (2.0 / (std::f64::consts::PI * x)).sqrt()
            * ((x - std::f64::consts::FRAC_PI_4).cos() + (x - std::f64::consts::FRAC_PI_4).sin() / (8.0 * x));
        assert!((j[0] - asym).abs() < 1e-7);
    }

    #[test]
    fn zero_time_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_symmetric(&mut rng, 10);
        let v = random_vector(&mut rng, 10);
        assert_eq!(propagate(&h, &v, 0.0, Method::Chebyshev).unwrap(), v);
    }

    #[test]
    fn diagonal_gives_phases() {
        let h = CsrMatrix::from_triplets(3, &[(0, 0, -1.0), (1, 1, 0.5), (2, 2, 2.0)]);
        let v = vec![Complex64::new(1.0, 0.0); 3];
        let out = propagate(&h, &v, 3.0, Method::Chebyshev).unwrap();
        for (k, d) in [-1.0f64, 0.5, 2.0].iter().enumerate() {
            assert!((out[k] - Complex64::from_polar(1.0, -d * 3.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn chebyshev_matches_dense_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = random_symmetric(&mut rng, 64);
        let v = random_vector(&mut rng, 64);
        for t in [10.0, -4.0] {
            let a = propagate(&h, &v, t, Method::Chebyshev).unwrap();
            let b = propagate(&h, &v, t, Method::DenseExp).unwrap();
            assert!(distance(&a, &b) < 1e-9 * norm(&v), "t = {t}: {}", distance(&a, &b));
        }
    }

    #[test]
    fn norm_and_reversibility() {
        let g = builtin("hexagonal").unwrap();
        let op = build_h0(&g, BoxSpec::Torus(8)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = random_vector(&mut rng, op.dim());
        let mut state = EvolutionState::new(&op, v.clone()).unwrap();
        state.advance(150.0, Method::Chebyshev).unwrap();
        assert!(state.norm_drift() < 1e-9);
        state.advance(-150.0, Method::Chebyshev).unwrap();
        assert!(distance(&state.values, &v) < 1e-9 * norm(&v));
    }

    #[test]
    fn dense_exp_is_capped() {
        let g = builtin("zd:1").unwrap();
        let op = build_h0(&g, BoxSpec::Torus(2100)).unwrap();
        let v = vec![Complex64::new(1.0, 0.0); op.dim()];
        assert!(matches!(evolve(&op, &v, 1.0, Method::DenseExp), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn filter_on_small_torus() {
        // circulant eigenvalues 2 - 2cos(2 pi k / 4) = 0, 2, 4, 2
        let g = builtin("zd:1").unwrap();
        let op = build_h0(&g, BoxSpec::Torus(4)).unwrap();
        let mut v = vec![Complex64::new(0.0, 0.0); 4];
        v[0] = Complex64::new(1.0, 0.0);
        let f = spectral_filter(&op, (1.0, 3.0), &v).unwrap();
        assert!((norm(&f).powi(2) - 0.5).abs() < 1e-14);
        let twice = spectral_filter(&op, (1.0, 3.0), &f).unwrap();
        assert!(distance(&twice, &f) < 1e-14);
        let all = spectral_filter(&op, (-1.0, 5.0), &v).unwrap();
        assert!(distance(&all, &v) < 1e-14);
        let none = spectral_filter(&op, (5.0, 6.0), &v).unwrap();
        assert_eq!(norm(&none), 0.0);
    }

    #[test]
    fn filter_commutes_with_evolution() {
        let g = builtin("kagome").unwrap();
        let op = build_h0(&g, BoxSpec::Torus(5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = random_vector(&mut rng, op.dim());
        let a = spectral_filter(&op, (1.0, 4.0), &evolve(&op, &v, 7.0, Method::Chebyshev).unwrap()).unwrap();
        let b = evolve(&op, &spectral_filter(&op, (1.0, 4.0), &v).unwrap(), 7.0, Method::Chebyshev).unwrap();
        assert!(distance(&a, &b) < 1e-9);
    }

    #[test]
    fn jackson_filter_approximates_projection() {
        let g = builtin("zd:1").unwrap();
        let op = build_h0(&g, BoxSpec::Torus(400)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_vector(&mut rng, op.dim());
        // interval edges 1 and 3 fall in gaps of the torus spectrum
        let (lo, hi) = (1.0 - 1e-3, 3.0 + 1e-3);
        let exact = spectral_filter(&op, (lo, hi), &v).unwrap();
        let approx = jackson_filter(op.matrix(), (lo, hi), &v, FILTER_DEGREE);
        let rel = distance(&exact, &approx) / norm(&v);
        assert!(rel < 0.05, "{rel}");
    }

    #[test]
    fn empty_perturbation_probe_is_exactly_stationary() {
        let g = builtin("zd:1").unwrap();
        let bs = BoxSpec::Truncated(60);
        let h0 = build_h0(&g, bs).unwrap();
        let psi = gaussian_packet(&h0, &[0.0], 5.0, &[std::f64::consts::FRAC_PI_2], 0).unwrap();
        let rec = wave_operator_probe(&g, &PerturbationSpec::empty(), (1.0, 3.0), &psi, &[1.0, 2.0, 4.0], bs).unwrap();
        assert!(rec.cauchy_increments.iter().all(|&x| x == 0.0));
        assert!(rec.mirrored.cauchy_increments.iter().all(|&x| x == 0.0));
        assert!(rec.isometry_gaps.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn short_range_probe_is_isometric() {
        let g = builtin("zd:1").unwrap();
        let bs = BoxSpec::Truncated(80);
        let p = PerturbationSpec::empty()
            .with_short_potential(SiteField::table(vec![SiteEntry { cell: vec![0], vertex: 0, value: 3.0 }]));
        let h0 = build_h0(&g, bs).unwrap();
        let psi = gaussian_packet(&h0, &[0.0], 6.0, &[std::f64::consts::FRAC_PI_2], 0).unwrap();
        let rec = wave_operator_probe(&g, &p, (1.0, 3.0), &psi, &[2.0, 4.0, 8.0], bs).unwrap();
        assert!(rec.isometry_gaps.iter().all(|&x| x < 1e-9), "{:?}", rec.isometry_gaps);
        assert!(rec.cauchy_increments.iter().all(|&x| x > 0.0));
        let json = serde_json::to_value(&rec).unwrap();
        assert!(json["mirrored"]["escape_mass"].is_array());
    }

    #[test]
    fn long_range_probe_is_refused() {
        let g = builtin("zd:1").unwrap();
        let p = PerturbationSpec::empty().with_long_potential(crate::crystal::PowerLaw::new(1.0, 0.5));
        let psi = vec![Complex64::new(1.0, 0.0); 21];
        let err = wave_operator_probe(&g, &p, (1.0, 3.0), &psi, &[1.0], BoxSpec::Truncated(10)).unwrap_err();
        assert!(err.is_validation());
    }
}
