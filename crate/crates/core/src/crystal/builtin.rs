use super::{OrientedEdge, QuotientGraph, Vertex};
use crate::error::{Error, Result};

pub const BUILTIN_NAMES: &[&str] = &["zd:1", "zd:2", "zd:3", "hexagonal", "kagome", "diamond-chain"];

/// Canonical example crystals with `m0 = 1` and `R0 = 0`.
///
/// Edge-index conventions (vertex order as listed):
///
/// * `zd:d`: one vertex `x1`, one loop per axis `k` with index `e_k`.
/// * `hexagonal`: vertices `x1, x2`; edges `x1 -> x2` with indices
///   `(0,0)`, `(1,0)`, `(0,1)`.
/// * `kagome`: vertices `a, b, c`; edges `a -> b` with `(0,0)` and `(-1,0)`,
///   `a -> c` with `(0,0)` and `(0,-1)`, `b -> c` with `(0,0)` and `(1,-1)`.
/// * `diamond-chain`: vertices `a, b, c` with `d = 1`; edges `a -> b` and
///   `a -> c` with index `0`, `b -> a` and `c -> a` with index `1`.
pub fn builtin(name: &str) -> Result<QuotientGraph> {
    let (dimension, ids, reps): (usize, &[&str], Vec<(usize, usize, Vec<i64>)>) = match name {
        "zd:1" | "zd:2" | "zd:3" => {
            let d: usize = name[3..].parse().unwrap();
            let loops = (0..d)
                .map(|k| {
                    let mut index = vec![0; d];
                    index[k] = 1;
                    (0, 0, index)
                })
                .collect();
            (d, &["x1"], loops)
        }
        "hexagonal" => (
            2,
            &["x1", "x2"],
            vec![(0, 1, vec![0, 0]), (0, 1, vec![1, 0]), (0, 1, vec![0, 1])],
        ),
        "kagome" => (
            2,
            &["a", "b", "c"],
            vec![
                (0, 1, vec![0, 0]),
                (0, 1, vec![-1, 0]),
                (0, 2, vec![0, 0]),
                (0, 2, vec![0, -1]),
                (1, 2, vec![0, 0]),
                (1, 2, vec![1, -1]),
            ],
        ),
        "diamond-chain" => (
            1,
            &["a", "b", "c"],
            vec![
                (0, 1, vec![0]),
                (0, 2, vec![0]),
                (1, 0, vec![1]),
                (2, 0, vec![1]),
            ],
        ),
        other => return Err(Error::UnknownBuiltin(other.to_string())),
    };
    let vertices = ids
        .iter()
        .map(|id| Vertex {
            id: (*id).to_string(),
            m0: 1.0,
            r0: 0.0,
        })
        .collect();
    let edges = reps
        .into_iter()
        .map(|(o, t, index)| OrientedEdge::new(o, t, index, 1.0))
        .collect();
    QuotientGraph::from_unoriented(dimension, vertices, edges)
}
