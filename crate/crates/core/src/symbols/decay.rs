//! Dyadic-shell evidence for summability of `sup_{|mu| >= lambda} |f(mu)|`
//! along `lambda = 2^k`.
//!
//! For shells `lambda <= |mu| < 2 lambda` with sup `s_k`, the integral
//! `int_1^inf sup_{|mu| >= lambda} |f| d lambda` is comparable to
//! `sum_k s_k 2^k`. The partial sums and the slope of `log s_k` against
//! `log(1 + 2^k)` on the upper half of the shells are the evidence.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::crystal::Cell;
use crate::{Error, Result};

/// Largest number of lattice points enumerated for one shell.
pub const LATTICE_LIMIT: usize = 1 << 23;

#[derive(Clone)]
pub enum DecayProfile {
    Zero,
    /// `|A| (1 + |mu|)^-alpha`, continuous in `|mu|`.
    PowerLaw { amplitude: f64, exponent: f64 },
    /// Bound `|A| eps (1 + max(|mu| - 1, 0))^{-eps-1}` for unit differences
    /// of `A (1 + |mu|)^-eps`, from the mean value theorem.
    AxisDifference { amplitude: f64, exponent: f64 },
    /// Finitely supported values.
    Table(Vec<(Cell, f64)>),
    /// Arbitrary function, enumerated shell by shell.
    Lattice {
        dimension: usize,
        f: Arc<dyn Fn(&[i64]) -> f64 + Send + Sync>,
    },
    /// `mu -> f(|mu|)` with `f` non-increasing. Every shell holds a lattice
    /// point of norm exactly `lambda` (a multiple of a unit vector), so the
    /// shell sup is `f(lambda)` in any dimension.
    Radial(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// Pointwise sum; shell sups add, which is an upper bound.
    Sum(Vec<DecayProfile>),
}

impl fmt::Debug for DecayProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::PowerLaw { amplitude, exponent } => write!(f, "PowerLaw({amplitude}, {exponent})"),
            Self::AxisDifference { amplitude, exponent } => write!(f, "AxisDifference({amplitude}, {exponent})"),
            Self::Table(t) => write!(f, "Table({} cells)", t.len()),
            Self::Lattice { dimension, .. } => write!(f, "Lattice(d = {dimension})"),
            Self::Radial(_) => write!(f, "Radial"),
            Self::Sum(parts) => f.debug_tuple("Sum").field(parts).finish(),
        }
    }
}

fn norm(mu: &[i64]) -> f64 {
    mu.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

impl DecayProfile {
    pub fn lattice(dimension: usize, f: impl Fn(&[i64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::Lattice {
            dimension,
            f: Arc::new(f),
        }
    }

    pub fn radial(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Radial(Arc::new(f))
    }

    /// `sup { |f(mu)| : lambda <= |mu| < 2 lambda }`.
    pub fn shell_sup(&self, lambda: f64) -> Result<f64> {
        Ok(match self {
            Self::Zero => 0.0,
            Self::PowerLaw { amplitude, exponent } => amplitude.abs() * (1.0 + lambda).powf(-exponent),
            Self::AxisDifference { amplitude, exponent } => {
                amplitude.abs() * exponent * (1.0 + (lambda - 1.0).max(0.0)).powf(-exponent - 1.0)
            }
            Self::Table(entries) => entries
                .iter()
                .filter(|(mu, _)| {
                    let r = norm(mu);
                    r >= lambda && r < 2.0 * lambda
                })
                .fold(0.0, |m, (_, v)| m.max(v.abs())),
            Self::Lattice { dimension, f } => {
                let reach = (2.0 * lambda).ceil() as i64;
                let side = (2 * reach + 1) as f64;
                let count = side.powi(*dimension as i32);
                if count > LATTICE_LIMIT as f64 {
                    return Err(Error::TooLarge {
                        what: "decay shell enumeration",
                        dimension: count as usize,
                        limit: LATTICE_LIMIT,
                    });
                }
                let mut best = 0.0f64;
                let mut mu = vec![-reach; *dimension];
                loop {
                    let r = norm(&mu);
                    if r >= lambda && r < 2.0 * lambda {
                        best = best.max(f(&mu).abs());
                    }
                    // odometer over the box
                    let mut k = 0;
                    while k < mu.len() {
                        mu[k] += 1;
                        if mu[k] <= reach {
                            break;
                        }
                        mu[k] = -reach;
                        k += 1;
                    }
                    if k == mu.len() {
                        break;
                    }
                }
                best
            }
            Self::Radial(f) => f(lambda).abs(),
            Self::Sum(parts) => {
                let mut s = 0.0;
                for p in parts {
                    s += p.shell_sup(lambda)?;
                }
                s
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayMode {
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    ConvergentEvidence,
    DivergentEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shell {
    pub lambda: f64,
    pub sup: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub mode: DecayMode,
    pub shells: Vec<Shell>,
    pub partial_sums: Vec<f64>,
    pub fitted_exponent: Option<f64>,
    pub classification: Classification,
}

const SLOPE_MARGIN: f64 = 1e-3;
const FAST_TAIL: f64 = 1e-6;

fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in points {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

fn classify(sups: &[f64], sums: &[f64], slope: Option<f64>) -> Classification {
    let k_max = sups.len() - 1;
    let lo = k_max.div_ceil(2);
    let tail = &sups[lo..];
    if tail.iter().all(|&s| s == 0.0) {
        return Classification::ConvergentEvidence;
    }
    let total = sums[k_max];
    let inc = |k: usize| sups[k] * 2f64.powi(k as i32);
    if total > 0.0 && inc(k_max) / total < FAST_TAIL {
        return Classification::ConvergentEvidence;
    }
    let Some(slope) = slope else {
        return Classification::Inconclusive;
    };
    let growing = inc(k_max) >= inc(lo);
    if slope >= -1.0 + SLOPE_MARGIN || growing {
        Classification::DivergentEvidence
    } else if slope < -1.0 - SLOPE_MARGIN {
        Classification::ConvergentEvidence
    } else {
        Classification::Inconclusive
    }
}

/// Shells `k = 0..=levels` at `lambda = 2^k`. Shells are evaluated in
/// parallel and collected in order.
pub fn check_decay(profile: &DecayProfile, mode: DecayMode, levels: usize) -> Result<DecayReport> {
    if levels < 2 || levels > 60 {
        return Err(Error::InvalidArgument(format!("levels must lie in 2..=60, got {levels}")));
    }
    let sups = (0..=levels)
        .into_par_iter()
        .map(|k| profile.shell_sup(2f64.powi(k as i32)))
        .collect::<Result<Vec<f64>>>()?;
    let mut sums = Vec::with_capacity(sups.len());
    let mut acc = 0.0;
    for (k, s) in sups.iter().enumerate() {
        acc += s * 2f64.powi(k as i32);
        sums.push(acc);
    }
    let points: Vec<(f64, f64)> = (levels.div_ceil(2)..=levels)
        .filter(|&k| sups[k] > 0.0)
        .map(|k| ((1.0 + 2f64.powi(k as i32)).ln(), sups[k].ln()))
        .collect();
    let slope = fit_slope(&points);
    Ok(DecayReport {
        mode,
        shells: sups
            .iter()
            .enumerate()
            .map(|(k, &sup)| Shell {
                lambda: 2f64.powi(k as i32),
                sup,
            })
            .collect(),
        classification: classify(&sups, &sums, slope),
        partial_sums: sums,
        fitted_exponent: slope,
    })
}

/// Long-range evidence: each axis difference must be summable and the
/// values themselves must fade.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongRangeReport {
    pub axes: Vec<DecayReport>,
    /// Sup of the values on the outermost shell.
    pub tail_sup: f64,
    pub vanishing: bool,
    pub classification: Classification,
}

pub fn check_long_range(values: &DecayProfile, differences: &[DecayProfile], levels: usize) -> Result<LongRangeReport> {
    let axes = differences
        .iter()
        .map(|p| check_decay(p, DecayMode::Long, levels))
        .collect::<Result<Vec<_>>>()?;
    let first = values.shell_sup(1.0)?;
    let tail_sup = values.shell_sup(2f64.powi(levels as i32))?;
    // fading: the outermost shell is a small fraction of the innermost
    let vanishing = tail_sup == 0.0 || tail_sup <= 0.01 * first;
    let classification = if axes.iter().any(|a| a.classification == Classification::DivergentEvidence) || !vanishing {
        Classification::DivergentEvidence
    } else if axes.iter().all(|a| a.classification == Classification::ConvergentEvidence) {
        Classification::ConvergentEvidence
    } else {
        Classification::Inconclusive
    };
    Ok(LongRangeReport {
        axes,
        tail_sup,
        vanishing,
        classification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Classification::*;

    fn power(alpha: f64) -> Classification {
        let p = DecayProfile::PowerLaw {
            amplitude: 1.0,
            exponent: alpha,
        };
        check_decay(&p, DecayMode::Short, 20).unwrap().classification
    }

    #[test]
    fn power_laws_straddle_one() {
        assert_eq!(power(0.5), DivergentEvidence);
        assert_eq!(power(1.0), DivergentEvidence);
        assert_eq!(power(1.05), ConvergentEvidence);
        assert_eq!(power(1.5), ConvergentEvidence);
        assert_eq!(power(3.0), ConvergentEvidence);
    }

    #[test]
    fn fitted_exponent_tracks_alpha() {
        let p = DecayProfile::PowerLaw {
            amplitude: 2.0,
            exponent: 1.7,
        };
        let r = check_decay(&p, DecayMode::Short, 20).unwrap();
        assert!((r.fitted_exponent.unwrap() + 1.7).abs() < 1e-9);
        assert_eq!(r.shells.len(), 21);
        assert_eq!(r.partial_sums.len(), 21);
    }

    #[test]
    fn compact_table_converges() {
        let p = DecayProfile::Table(vec![(vec![0, 0], 5.0), (vec![3, -1], 2.0)]);
        let r = check_decay(&p, DecayMode::Short, 12).unwrap();
        assert_eq!(r.classification, ConvergentEvidence);
        assert_eq!(r.shells[0].sup, 0.0);
        assert_eq!(r.shells[1].sup, 2.0);
    }

    #[test]
    fn lattice_matches_closed_form_on_axis() {
        // on Z^1 the shell sup is attained at |mu| = lambda exactly
        let lattice = DecayProfile::lattice(1, |mu| (1.0 + mu[0].abs() as f64).powf(-1.5));
        let closed = DecayProfile::PowerLaw {
            amplitude: 1.0,
            exponent: 1.5,
        };
        let a = check_decay(&lattice, DecayMode::Short, 12).unwrap();
        let b = check_decay(&closed, DecayMode::Short, 12).unwrap();
        for (x, y) in a.shells.iter().zip(&b.shells) {
            assert!((x.sup - y.sup).abs() < 1e-15);
        }
        assert_eq!(a.classification, b.classification);
    }

    #[test]
    fn radial_shortcut_matches_enumeration_in_2d() {
        for alpha in [0.95, 1.05, 1.5] {
            let radial = DecayProfile::radial(move |r| (1.0 + r).powf(-alpha));
            let lattice = DecayProfile::lattice(2, move |mu| (1.0 + norm(mu)).powf(-alpha));
            for k in 0..=9 {
                let lambda = 2f64.powi(k);
                assert_eq!(radial.shell_sup(lambda).unwrap(), lattice.shell_sup(lambda).unwrap());
            }
        }
    }

    #[test]
    fn lattice_enumeration_is_capped() {
        let p = DecayProfile::lattice(3, |_| 1.0);
        assert!(matches!(
            check_decay(&p, DecayMode::Short, 20),
            Err(Error::TooLarge { .. })
        ));
    }

    #[test]
    fn slow_long_range_potential() {
        let values = DecayProfile::PowerLaw {
            amplitude: 1.0,
            exponent: 0.5,
        };
        let short = check_decay(&values, DecayMode::Short, 20).unwrap();
        assert_eq!(short.classification, DivergentEvidence);
        let diff = DecayProfile::AxisDifference {
            amplitude: 1.0,
            exponent: 0.5,
        };
        let long = check_long_range(&values, &[diff], 20).unwrap();
        assert_eq!(long.classification, ConvergentEvidence);
        assert!(long.vanishing);
    }

    #[test]
    fn axis_difference_bounds_true_difference() {
        for mu in 0..2000i64 {
            let f = |m: i64| (1.0 + m.abs() as f64).powf(-0.5);
            let true_diff = (f(mu + 1) - f(mu)).abs().max((f(mu - 1) - f(mu)).abs());
            let r = mu.abs() as f64;
            let bound = 0.5 * (1.0 + (r - 1.0).max(0.0)).powf(-1.5);
            assert!(true_diff <= bound * (1.0 + 1e-12), "{mu}");
        }
    }

    #[test]
    fn report_serializes() {
        let r = check_decay(&DecayProfile::Zero, DecayMode::Long, 4).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["mode"], "long");
        assert_eq!(v["classification"], "convergent-evidence");
        assert_eq!(v["shells"].as_array().unwrap().len(), 5);
    }
}
