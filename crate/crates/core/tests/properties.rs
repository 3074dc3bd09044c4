use crystal_spectra::bands::{fiber_eigenvalues, spectral_projection, ProjectionMethod};
use crystal_spectra::crystal::{
    builtin, load_crystal, serialize_crystal, EdgeEntry, EdgeField, PerturbationSpec, SiteEntry, SiteField,
    BUILTIN_NAMES,
};
use crystal_spectra::floquet::assemble_fiber;
use crystal_spectra::linalg::{max_abs, CMatrix, CVector};
use crystal_spectra::realspace::{build_h0, BoxSpec};
use crystal_spectra::scatter::{evolve, norm, Method};
use crystal_spectra::symbols::{
    adjoint_symbol, apply_op, operator_matrix, perturbation_symbol, window_cells, LatticeVector, SymbolTerm,
    ToroidalSymbol,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn any_builtin() -> impl Strategy<Value = &'static str> {
    prop::sample::select(BUILTIN_NAMES.to_vec())
}

// dyadic points keep xi + e_k exactly representable
fn dyadic(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-64i32..64).prop_map(|k| k as f64 / 64.0), d)
}

fn small_complex() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn symbol(d: usize, n: usize) -> impl Strategy<Value = ToroidalSymbol> {
    let entry = (prop::collection::vec(-2i64..=2, d), prop::collection::vec(small_complex(), n * n));
    let table = prop::collection::vec(entry, 1..4);
    prop::collection::btree_map(prop::collection::vec(-2i64..=2, d), table, 1..4).prop_map(move |terms| {
        let terms = terms
            .into_iter()
            .map(|(nu, entries)| {
                let table = entries
                    .into_iter()
                    .map(|(mu, vals): (Vec<i64>, Vec<Complex64>)| (mu, CMatrix::from_row_slice(n, n, &vals)))
                    .collect();
                SymbolTerm::table(nu, table)
            })
            .collect();
        ToroidalSymbol::new(d, n, terms).unwrap()
    })
}

fn lattice_vector(d: usize, n: usize) -> impl Strategy<Value = LatticeVector> {
    prop::collection::btree_map(
        prop::collection::vec(-3i64..=3, d),
        prop::collection::vec(small_complex(), n).prop_map(CVector::from_vec),
        0..6,
    )
}

fn add(a: &LatticeVector, b: &LatticeVector, s: Complex64) -> LatticeVector {
    let mut out = a.clone();
    for (mu, v) in b {
        let e = out.entry(mu.clone()).or_insert_with(|| CVector::zeros(v.len()));
        *e += v * s;
    }
    out
}

fn max_diff(a: &LatticeVector, b: &LatticeVector) -> f64 {
    a.keys()
        .chain(b.keys())
        .map(|mu| match (a.get(mu), b.get(mu)) {
            (Some(x), Some(y)) => (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max),
            (Some(x), None) | (None, Some(x)) => x.iter().map(|z| z.norm()).fold(0.0, f64::max),
            (None, None) => 0.0,
        })
        .fold(0.0, f64::max)
}

fn random_measure(name: &str, values: &[f64]) -> PerturbationSpec {
    let g = builtin(name).unwrap();
    let d = g.dimension();
    let n = g.num_vertices();
    let m = g.num_unoriented_edges();
    let mut sites = Vec::new();
    let mut edges = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        let cell: Vec<i64> = (0..d).map(|k| ((i + k) % 3) as i64 - 1).collect();
        if i % 2 == 0 {
            sites.push(SiteEntry { cell, vertex: i % n, value: v });
        } else {
            edges.push(EdgeEntry { cell, edge: i % m, value: v });
        }
    }
    PerturbationSpec::empty()
        .with_vertex_measure(SiteField::table(sites))
        .with_edge_measure(EdgeField::table(edges))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fiber_is_hermitian_and_periodic(name in any_builtin(), seed in dyadic(3), axis in 0usize..3) {
        let g = builtin(name).unwrap();
        let d = g.dimension();
        let xi = &seed[..d];
        let h = assemble_fiber(&g, xi).matrix;
        prop_assert!(max_abs(&(&h - h.adjoint())) < 1e-14);
        let mut shifted = xi.to_vec();
        shifted[axis % d] += 1.0;
        let h1 = assemble_fiber(&g, &shifted).matrix;
        prop_assert!(max_abs(&(&h - &h1)) < 1e-12);
    }

    #[test]
    fn fiber_eigenvalues_obey_gershgorin(name in any_builtin(), seed in dyadic(3)) {
        let g = builtin(name).unwrap();
        let xi = &seed[..g.dimension()];
        let values = fiber_eigenvalues(&g, xi).unwrap();
        let bound = 2.0 * g.max_degree();
        for w in values.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        prop_assert!(values[0] >= -1e-12 && *values.last().unwrap() <= bound + 1e-12);
    }

    #[test]
    fn crystal_round_trips(name in any_builtin()) {
        let g = builtin(name).unwrap();
        let back = load_crystal(&serialize_crystal(&g)).unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn projection_is_an_orthogonal_idempotent(name in any_builtin(), seed in dyadic(3), a in -1.0f64..6.0, w in 0.0f64..4.0) {
        let g = builtin(name).unwrap();
        let xi = &seed[..g.dimension()];
        let p = spectral_projection(&g, xi, (a, a + w), ProjectionMethod::Eigen).unwrap();
        prop_assert!(max_abs(&(&p * &p - &p)) < 1e-12);
        prop_assert!(max_abs(&(&p - p.adjoint())) < 1e-12);
        let h = assemble_fiber(&g, xi).matrix;
        prop_assert!(max_abs(&(&h * &p - &p * &h)) < 1e-11);
    }

    #[test]
    fn adjoint_is_an_involution(a in symbol(2, 2)) {
        let window = window_cells(2, -3, 3);
        let m = operator_matrix(&a, &window).unwrap();
        let mm = operator_matrix(&adjoint_symbol(&adjoint_symbol(&a)), &window).unwrap();
        prop_assert!(max_abs(&(&m - &mm)) < 1e-14);
    }

    #[test]
    fn op_is_linear(a in symbol(1, 3), c1 in lattice_vector(1, 3), c2 in lattice_vector(1, 3), s in small_complex()) {
        let lhs = apply_op(&a, &add(&c1, &c2, s)).unwrap();
        let rhs = add(&apply_op(&a, &c1).unwrap(), &apply_op(&a, &c2).unwrap(), s);
        prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn measure_symbol_is_self_adjoint(
        name in prop::sample::select(vec!["zd:1", "zd:2", "hexagonal", "diamond-chain"]),
        values in prop::collection::vec(-0.4f64..0.4, 1..6),
    ) {
        let g = builtin(name).unwrap();
        let b = perturbation_symbol(&g, &random_measure(name, &values)).unwrap();
        let window = window_cells(g.dimension(), -3, 3);
        let m = operator_matrix(&b, &window).unwrap();
        prop_assert!(max_abs(&(&m - m.adjoint())) < 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn evolution_preserves_norm_and_reverses(
        name in prop::sample::select(vec!["zd:1", "hexagonal", "kagome"]),
        values in prop::collection::vec(small_complex(), 8),
        t in -8.0f64..8.0,
    ) {
        let g = builtin(name).unwrap();
        let op = build_h0(&g, BoxSpec::Truncated(6)).unwrap();
        let mut psi = vec![Complex64::new(0.0, 0.0); op.dim()];
        for (i, z) in values.into_iter().enumerate() {
            psi[(i * 7) % op.dim()] += z;
        }
        let n0 = norm(&psi);
        prop_assume!(n0 > 1e-3);
        let forward = evolve(&op, &psi, t, Method::Chebyshev).unwrap();
        prop_assert!((norm(&forward) - n0).abs() < 1e-10 * n0);
        let back = evolve(&op, &forward, -t, Method::Chebyshev).unwrap();
        let err = back.iter().zip(&psi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10 * n0);
    }
}
