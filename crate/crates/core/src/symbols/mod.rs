//! Toroidal symbols: finite sums `a(xi, mu) = sum_nu e^{2 pi i xi . nu} a_nu(mu)`
//! of shift terms with matrix-valued coefficients on the lattice.
//!
//! The attached operator is `Op(a) c (mu) = sum_nu a_nu(mu + nu) c(mu + nu)`,
//! which is the lattice form of
//! `Op(a) u(xi) = sum_mu e^{-2 pi i xi . mu} a(xi, mu) u^(mu)`
//! under `(F c)(xi) = sum_mu c(mu) e^{-2 pi i xi . mu}`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::crystal::Cell;
use crate::linalg::{CMatrix, CVector};
use crate::{Error, Result};

pub mod decay;
pub mod difference;
pub mod perturbation;

pub use decay::{
    check_decay, check_long_range, Classification, DecayMode, DecayProfile, DecayReport, LongRangeReport, Shell,
};
pub use difference::{difference_op, telescoped_difference, telescoping_steps, AxisStep};
pub use perturbation::{
    default_paths, path_endpoint, perturbation_symbol, potential_symbols, telescoping_increments, PathTable,
    PotentialSymbols,
};

/// Coefficient closure `mu -> a_nu(mu)`.
pub type Coefficient = Arc<dyn Fn(&[i64]) -> CMatrix + Send + Sync>;

/// Lattice vector field `mu -> c(mu)`, stored sparsely.
pub type LatticeVector = BTreeMap<Cell, CVector>;

/// One shift term. Table entries take precedence; elsewhere the envelope
/// is used, and without one the coefficient is zero.
#[derive(Clone)]
pub struct SymbolTerm {
    pub nu: Cell,
    pub table: BTreeMap<Cell, CMatrix>,
    pub envelope: Option<Coefficient>,
}

impl SymbolTerm {
    pub fn table(nu: Cell, table: BTreeMap<Cell, CMatrix>) -> Self {
        Self {
            nu,
            table,
            envelope: None,
        }
    }

    pub fn envelope(nu: Cell, f: Coefficient) -> Self {
        Self {
            nu,
            table: BTreeMap::new(),
            envelope: Some(f),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.envelope.is_none()
    }

    pub fn eval(&self, mu: &[i64], size: usize) -> CMatrix {
        if let Some(m) = self.table.get(mu) {
            return m.clone();
        }
        match &self.envelope {
            Some(f) => f(mu),
            None => CMatrix::zeros(size, size),
        }
    }
}

impl fmt::Debug for SymbolTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolTerm")
            .field("nu", &self.nu)
            .field("table_cells", &self.table.len())
            .field("envelope", &self.envelope.is_some())
            .finish()
    }
}

#[derive(Clone, Debug)]
pub struct ToroidalSymbol {
    dimension: usize,
    size: usize,
    terms: Vec<SymbolTerm>,
}

impl ToroidalSymbol {
    /// Terms are sorted by `nu`; repeated shifts and mis-shaped tables are
    /// rejected.
    pub fn new(dimension: usize, size: usize, mut terms: Vec<SymbolTerm>) -> Result<Self> {
        terms.sort_by(|a, b| a.nu.cmp(&b.nu));
        for w in terms.windows(2) {
            if w[0].nu == w[1].nu {
                return Err(Error::InvalidArgument(format!("repeated shift {:?} in symbol", w[0].nu)));
            }
        }
        for t in &terms {
            if t.nu.len() != dimension {
                return Err(Error::InvalidArgument(format!(
                    "shift {:?} does not have {dimension} components",
                    t.nu
                )));
            }
            for (mu, m) in &t.table {
                if mu.len() != dimension || m.nrows() != size || m.ncols() != size {
                    return Err(Error::InvalidArgument(format!(
                        "coefficient of shift {:?} at {mu:?} has the wrong shape",
                        t.nu
                    )));
                }
            }
        }
        Ok(Self { dimension, size, terms })
    }

    pub fn zero(dimension: usize, size: usize) -> Self {
        Self {
            dimension,
            size,
            terms: Vec::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Matrix size `n` of the coefficients.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn terms(&self) -> &[SymbolTerm] {
        &self.terms
    }

    pub fn term(&self, nu: &[i64]) -> Option<&SymbolTerm> {
        self.terms
            .binary_search_by(|t| t.nu.as_slice().cmp(nu))
            .ok()
            .map(|i| &self.terms[i])
    }

    pub fn shifts(&self) -> Vec<Cell> {
        self.terms.iter().map(|t| t.nu.clone()).collect()
    }

    /// All coefficients tabulated, none given by closures.
    pub fn is_finite(&self) -> bool {
        self.terms.iter().all(SymbolTerm::is_finite)
    }

    /// `a_nu(mu)`, zero for absent shifts.
    pub fn coefficient(&self, nu: &[i64], mu: &[i64]) -> CMatrix {
        match self.term(nu) {
            Some(t) => t.eval(mu, self.size),
            None => CMatrix::zeros(self.size, self.size),
        }
    }

    /// `a(xi, mu)`.
    pub fn eval(&self, xi: &[f64], mu: &[i64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.size, self.size);
        for t in &self.terms {
            let phase: f64 = xi.iter().zip(&t.nu).map(|(x, v)| x * *v as f64).sum();
            out += t.eval(mu, self.size) * Complex64::from_polar(1.0, 2.0 * PI * phase);
        }
        out
    }

    /// Cells carrying a table entry in some term.
    pub fn table_cells(&self) -> BTreeSet<Cell> {
        self.terms.iter().flat_map(|t| t.table.keys().cloned()).collect()
    }

    /// `mu -> max_nu |a_nu(mu)|_F`, as a decay profile.
    pub fn norm_profile(&self) -> DecayProfile {
        let frob = |m: &CMatrix| m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if self.is_finite() {
            let mut best: BTreeMap<Cell, f64> = BTreeMap::new();
            for t in &self.terms {
                for (mu, m) in &t.table {
                    let v = best.entry(mu.clone()).or_insert(0.0);
                    *v = v.max(frob(m));
                }
            }
            DecayProfile::Table(best.into_iter().collect())
        } else {
            let s = self.clone();
            DecayProfile::lattice(self.dimension, move |mu| {
                s.terms.iter().map(|t| frob(&t.eval(mu, s.size))).fold(0.0, f64::max)
            })
        }
    }
}

fn add_cells(a: &[i64], b: &[i64]) -> Cell {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub_cells(a: &[i64], b: &[i64]) -> Cell {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `Op(a) c`. Input entries map to `mu_in - nu` for every shift, so the
/// output support is the input support moved by the shifts.
pub fn apply_op(a: &ToroidalSymbol, c: &LatticeVector) -> Result<LatticeVector> {
    let n = a.size;
    let mut out = LatticeVector::new();
    for (mu_in, v) in c {
        if mu_in.len() != a.dimension || v.len() != n {
            return Err(Error::InvalidArgument(format!(
                "lattice vector entry at {mu_in:?} does not match the symbol shape"
            )));
        }
        for t in &a.terms {
            let w = t.eval(mu_in, n) * v;
            out.entry(sub_cells(mu_in, &t.nu))
                .and_modify(|acc: &mut CVector| *acc += &w)
                .or_insert(w);
        }
    }
    Ok(out)
}

/// Symbol of `Op(a)*`: the term `(nu, a_nu)` becomes `(-nu, mu -> a_nu(mu + nu)*)`.
pub fn adjoint_symbol(a: &ToroidalSymbol) -> ToroidalSymbol {
    let terms = a
        .terms
        .iter()
        .map(|t| {
            let nu = t.nu.clone();
            let table = t
                .table
                .iter()
                .map(|(mu, m)| (sub_cells(mu, &nu), m.adjoint()))
                .collect();
            let envelope = t.envelope.clone().map(|f| {
                let nu = nu.clone();
                Arc::new(move |mu: &[i64]| f(&add_cells(mu, &nu)).adjoint()) as Coefficient
            });
            SymbolTerm {
                nu: nu.iter().map(|x| -x).collect(),
                table,
                envelope,
            }
        })
        .collect();
    ToroidalSymbol::new(a.dimension, a.size, terms).expect("negated shifts stay distinct")
}

/// The cells of the box `[lo, hi)^d`, in lexicographic order.
pub fn window_cells(dimension: usize, lo: i64, hi: i64) -> Vec<Cell> {
    let mut cells = vec![Vec::new()];
    for _ in 0..dimension {
        cells = cells
            .into_iter()
            .flat_map(|c| {
                (lo..hi).map(move |x| {
                    let mut c = c.clone();
                    c.push(x);
                    c
                })
            })
            .collect();
    }
    cells
}

/// Sparse matrix of `Op(a)` compressed to a window: entry `((row, col), value)`
/// with index `cell_position * n + component`. Built column by column through
/// [`apply_op`]; exact zeros are dropped.
pub fn operator_entries(a: &ToroidalSymbol, window: &[Cell]) -> Result<BTreeMap<(usize, usize), Complex64>> {
    let n = a.size;
    let pos: BTreeMap<&Cell, usize> = window.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut out = BTreeMap::new();
    for (ci, cell) in window.iter().enumerate() {
        for j in 0..n {
            let mut v = CVector::zeros(n);
            v[j] = Complex64::new(1.0, 0.0);
            let col = ci * n + j;
            let image = apply_op(a, &LatticeVector::from([(cell.clone(), v)]))?;
            for (mu, w) in image {
                let Some(&ri) = pos.get(&mu) else { continue };
                for (i, z) in w.iter().enumerate() {
                    if *z != Complex64::new(0.0, 0.0) {
                        out.insert((ri * n + i, col), *z);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Dense form of [`operator_entries`].
pub fn operator_matrix(a: &ToroidalSymbol, window: &[Cell]) -> Result<CMatrix> {
    let dim = window.len() * a.size;
    let mut m = CMatrix::zeros(dim, dim);
    for ((r, c), z) in operator_entries(a, window)? {
        m[(r, c)] = z;
    }
    Ok(m)
}
