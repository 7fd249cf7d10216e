//! Transform distance, dynamic time warping and NN-DTW classification.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `1 - cos` of two matrices under the Frobenius inner product.
pub fn transform_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: b.nrows(),
        });
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((1.0 - a.dot(b) / (na * nb)).clamp(0.0, 2.0))
}

/// DTW with steps (1,0), (0,1), (1,1), anchored at both ends.
pub fn dtw_cost(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("dtw needs non-empty sequences"));
    }
    let (n, m) = (a.len(), b.len());
    let mut cost = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            cost[i][j] = transform_distance(&a[i], &b[j])?;
        }
    }
    Ok(dtw_from_costs(&cost))
}

/// DTW over a precomputed cell-cost table.
pub fn dtw_from_costs(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let m = cost[0].len();
    let mut acc = vec![vec![f64::INFINITY; m]; n];
    for i in 0..n {
        for j in 0..m {
            let prev = if i == 0 && j == 0 {
                0.0
            } else {
                let mut p = f64::INFINITY;
                if i > 0 {
                    p = p.min(acc[i - 1][j]);
                }
                if j > 0 {
                    p = p.min(acc[i][j - 1]);
                }
                if i > 0 && j > 0 {
                    p = p.min(acc[i - 1][j - 1]);
                }
                p
            };
            acc[i][j] = prev + cost[i][j];
        }
    }
    acc[n - 1][m - 1]
}

/// Label of the training sequence nearest in DTW cost; first wins on ties.
pub fn nn_dtw_classify<L: Clone>(train: &[(Vec<DMatrix<f64>>, L)], test: &[DMatrix<f64>]) -> Result<L> {
    let mut best: Option<(f64, &L)> = None;
    for (seq, label) in train {
        let c = dtw_cost(seq, test)?;
        if best.is_none_or(|(b, _)| c < b) {
            best = Some((c, label));
        }
    }
    best.map(|(_, l)| l.clone())
        .ok_or_else(|| Error::invalid("classifier needs at least one training sequence"))
}
