//! Floquet-Bloch fibers of the periodic operator `H0 = -Delta(X, m0) + R0`.
//!
//! With the vertex order of the quotient graph fixing `l^2` on the quotient
//! as `C^n` (orthonormal coordinates, scaled by `m0(x_j)^(1/2)`), the fiber
//! at quasi-momentum `xi` is
//!
//! ```text
//! h0(xi)_{jl} = -sum_{e = (x_j, x_l)} m0(e) / (m0(x_j) m0(x_l))^(1/2) e^{2 pi i xi.eta(e)}
//!               + (deg(x_j) + R0(x_j)) delta_{jl}
//! ```

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::crystal::QuotientGraph;
use crate::linalg::{self, CMatrix};

/// Reduces every component to `[0, 1)`.
pub fn reduce_torus(xi: &[f64]) -> Vec<f64> {
    xi.iter()
        .map(|&x| {
            let r = x.rem_euclid(1.0);
            // rem_euclid can round up to exactly 1 for tiny negative inputs
            if r >= 1.0 {
                0.0
            } else {
                r
            }
        })
        .collect()
}

/// `e^{2 pi i xi.eta}` with the phase reduced to `[-1/2, 1/2]` turns before
/// the trigonometric evaluation.
pub fn character(xi: &[f64], eta: &[i64]) -> Complex64 {
    let t: f64 = xi.iter().zip(eta).map(|(x, &h)| x * h as f64).sum();
    let t = t - t.round();
    let (s, c) = (2.0 * PI * t).sin_cos();
    Complex64::new(c, s)
}

/// Hermitian fiber matrix `h0(xi)` together with its (reduced) base point.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberMatrix {
    pub xi: Vec<f64>,
    pub matrix: CMatrix,
}

impl FiberMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.matrix)
    }
}

fn check_point(g: &QuotientGraph, xi: &[f64]) {
    assert_eq!(
        xi.len(),
        g.dimension(),
        "torus point has {} components, crystal dimension is {}",
        xi.len(),
        g.dimension()
    );
}

pub fn assemble_fiber(g: &QuotientGraph, xi: &[f64]) -> FiberMatrix {
    check_point(g, xi);
    let xi = reduce_torus(xi);
    let n = g.num_vertices();
    let sqrt_m: Vec<f64> = g.vertices().iter().map(|v| v.m0.sqrt()).collect();
    let mut m = CMatrix::zeros(n, n);
    for e in g.edges() {
        let w = e.m0 / (sqrt_m[e.origin] * sqrt_m[e.terminus]);
        m[(e.origin, e.terminus)] -= character(&xi, &e.index) * w;
    }
    for j in 0..n {
        m[(j, j)] += Complex64::new(g.degree(j) + g.vertex(j).r0, 0.0);
    }
    FiberMatrix {
        xi,
        matrix: linalg::hermitian_part(&m),
    }
}

/// `d h0 / d xi_axis` (axis is zero-based).
pub fn fiber_derivative(g: &QuotientGraph, xi: &[f64], axis: usize) -> CMatrix {
    check_point(g, xi);
    assert!(axis < g.dimension(), "axis {axis} out of range");
    let xi = reduce_torus(xi);
    let n = g.num_vertices();
    let sqrt_m: Vec<f64> = g.vertices().iter().map(|v| v.m0.sqrt()).collect();
    let mut m = CMatrix::zeros(n, n);
    for e in g.edges() {
        let h = e.index[axis];
        if h == 0 {
            continue;
        }
        let w = e.m0 / (sqrt_m[e.origin] * sqrt_m[e.terminus]);
        let factor = Complex64::new(0.0, 2.0 * PI * h as f64);
        m[(e.origin, e.terminus)] -= character(&xi, &e.index) * factor * w;
    }
    linalg::hermitian_part(&m)
}

/// All `d` partial derivatives.
pub fn fiber_gradient(g: &QuotientGraph, xi: &[f64]) -> Vec<CMatrix> {
    (0..g.dimension()).map(|k| fiber_derivative(g, xi, k)).collect()
}

/// Matrix of the magnetic Laplacian `Delta_theta` with `theta(e) = xi.eta(e)`
/// acting on functions on the quotient (vertex basis, before rescaling):
/// `(Delta_theta f)(x) = sum_{e in A_x} m0(e)/m0(x) (e^{i theta(e)} f(t(e)) - f(x))`.
///
/// `assemble_fiber = D (-M + R0) D^{-1}` with `D = diag(m0(x_j)^(1/2))`.
pub fn magnetic_laplacian(g: &QuotientGraph, xi: &[f64]) -> CMatrix {
    check_point(g, xi);
    let xi = reduce_torus(xi);
    let n = g.num_vertices();
    let mut m = CMatrix::zeros(n, n);
    for e in g.edges() {
        let w = e.m0 / g.vertex(e.origin).m0;
        m[(e.origin, e.terminus)] += character(&xi, &e.index) * w;
        m[(e.origin, e.origin)] -= Complex64::new(w, 0.0);
    }
    m
}
