//! Lattice differences `Delta_nu f (mu) = f(mu + nu) - f(mu)` and their
//! reduction to unit steps along the axes.

use std::ops::{Add, Sub};

use crate::crystal::Cell;

pub fn difference_op<T, F>(f: F, nu: Cell) -> impl Fn(&[i64]) -> T
where
    F: Fn(&[i64]) -> T,
    T: Sub<Output = T>,
{
    move |mu: &[i64]| {
        let shifted: Cell = mu.iter().zip(&nu).map(|(m, v)| m + v).collect();
        f(&shifted) - f(mu)
    }
}

/// `S_shift Delta_{sign e_axis}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AxisStep {
    pub shift: Cell,
    pub axis: usize,
    pub sign: i64,
}

/// Unit steps whose shifted differences sum to `Delta_nu`: walk the axes in
/// order, one unit at a time. For `nu = (1, 1)` this gives
/// `Delta_{e1} + S_{e1} Delta_{e2}`.
pub fn telescoping_steps(nu: &[i64]) -> Vec<AxisStep> {
    let mut at = vec![0i64; nu.len()];
    let mut steps = Vec::new();
    for (axis, &v) in nu.iter().enumerate() {
        let sign = v.signum();
        for _ in 0..v.abs() {
            steps.push(AxisStep {
                shift: at.clone(),
                axis,
                sign,
            });
            at[axis] += sign;
        }
    }
    steps
}

/// `Delta_nu f (mu)` evaluated through [`telescoping_steps`].
pub fn telescoped_difference<T, F>(f: &F, nu: &[i64], mu: &[i64]) -> T
where
    F: Fn(&[i64]) -> T,
    T: Add<Output = T> + Sub<Output = T>,
{
    let step_value = |s: &AxisStep| {
        let base: Cell = mu.iter().zip(&s.shift).map(|(m, g)| m + g).collect();
        let mut next = base.clone();
        next[s.axis] += s.sign;
        f(&next) - f(&base)
    };
    let steps = telescoping_steps(nu);
    match steps.split_first() {
        None => f(mu) - f(mu),
        Some((first, rest)) => rest.iter().fold(step_value(first), |acc, s| acc + step_value(s)),
    }
}
