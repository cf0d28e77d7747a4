use crate::error::{Error, Result};
use crate::graph::{num_pairs, pair_from_index_unchecked, SparseGraph};

use super::Prediction;

pub(crate) const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    /// summed node cross-entropy
    pub node: f64,
    /// rescaled summed query-edge cross-entropy
    pub edge: f64,
    /// probabilities raised to the floor before taking the log
    pub clamped: usize,
}

/// Weight on the summed query cross-entropy: `c / λ_q` with
/// `λ_q = |E_q| / (n(n-1)/2)` the realised query fraction.
///
/// `λ_q` equals the requested `λ` whenever `λ·n(n-1)/2` is an integer; using
/// the realised fraction keeps the estimate unbiased when the count is
/// rounded up.
pub fn edge_scale(n: usize, queries: usize, c: f64) -> f64 {
    if queries == 0 {
        0.0
    } else {
        c * num_pairs(n) as f64 / queries as f64
    }
}

/// `Σ_i CE(x_i) + (c/λ) Σ_{E_q} CE(y_ij)`, natural log.
pub fn loss(pred: &Prediction, clean: &SparseGraph, c: f64) -> Result<LossBreakdown> {
    let n = clean.n();
    if pred.node.rows != n || pred.edge.rows != pred.queries.len() {
        return Err(Error::arg(
            "prediction shape does not match the clean graph",
        ));
    }
    if c.is_nan() || c < 0.0 {
        return Err(Error::arg("edge weight must be nonnegative"));
    }
    let mut clamped = 0;
    let mut nll = |p: f64| {
        if p < PROB_FLOOR {
            clamped += 1;
        }
        -p.max(PROB_FLOOR).ln()
    };
    let node: f64 = clean
        .node_labels()
        .iter()
        .enumerate()
        .map(|(v, &x)| nll(pred.node.get(v, x)))
        .sum();
    let edge_ce: f64 = pred
        .queries
        .iter()
        .enumerate()
        .map(|(r, &idx)| {
            let (i, j) = pair_from_index_unchecked(idx, n);
            nll(pred.edge.get(r, clean.edge_label(i, j)))
        })
        .sum();
    let edge = edge_scale(n, pred.queries.len(), c) * edge_ce;
    if clamped > 0 {
        log::warn!("{clamped} predicted probabilities clamped to {PROB_FLOOR:e}");
    }
    Ok(LossBreakdown {
        total: node + edge,
        node,
        edge,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Matrix;

    #[test]
    fn uniform_two_node_loss() {
        let g = SparseGraph::from_parts(2, vec![0, 1], vec![(0, 1)], vec![1]).unwrap();
        let pred = Prediction {
            node: Matrix::from_vec(2, 2, vec![0.5; 4]),
            edge: Matrix::from_vec(1, 2, vec![0.5; 2]),
            queries: vec![0],
        };
        let l = loss(&pred, &g, 5.0).unwrap();
        let ln2 = 2f64.ln();
        assert!((l.total - (2.0 * ln2 + 5.0 * ln2)).abs() < 1e-15);
        assert!((l.node - 2.0 * ln2).abs() < 1e-15);
    }

    #[test]
    fn perfect_prediction_is_zero() {
        let g = SparseGraph::from_parts(3, vec![0, 1, 0], vec![(1, 2)], vec![1]).unwrap();
        let pred = Prediction {
            node: Matrix::from_vec(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 0.0]),
            edge: Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]),
            queries: vec![0, 2],
        };
        assert_eq!(loss(&pred, &g, 5.0).unwrap().total, 0.0);
    }

    #[test]
    fn zero_probability_is_clamped() {
        let g = SparseGraph::from_parts(2, vec![0, 0], vec![(0, 1)], vec![1]).unwrap();
        let pred = Prediction {
            node: Matrix::from_vec(2, 1, vec![1.0, 1.0]),
            edge: Matrix::from_vec(1, 2, vec![1.0, 0.0]),
            queries: vec![0],
        };
        let l = loss(&pred, &g, 1.0).unwrap();
        assert_eq!(l.clamped, 1);
        assert!((l.edge + PROB_FLOOR.ln()).abs() < 1e-9);
    }

    #[test]
    fn realised_fraction_scale() {
        // 15 pairs, 3 queries: λ = 0.2 exactly
        assert!((edge_scale(6, 3, 5.0) - 25.0).abs() < 1e-12);
        assert_eq!(edge_scale(6, 0, 5.0), 0.0);
    }
}
