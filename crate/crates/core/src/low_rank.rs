//! Rank-penalized approximation of matched-group matrices via singular value
//! hard thresholding.

use crate::error::{Error, Result};
use crate::scalar::Pixel;
use nalgebra::DMatrix;

/// Singular values within this distance of the threshold are kept.
pub const THRESHOLD_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LowRankApproximant<T: Pixel> {
    pub matrix: DMatrix<T>,
    pub retained_rank: usize,
    /// Non-increasing.
    pub singular_values: Vec<f64>,
}

/// A rank-`r` approximant kept as `left (n x r) * right (r x cols)`, so the
/// per-group storage scales with the retained rank.
#[derive(Debug, Clone)]
pub struct LowRankFactors<T: Pixel> {
    pub rows: usize,
    pub cols: usize,
    pub left: DMatrix<T>,
    pub right: DMatrix<T>,
}

impl<T: Pixel> LowRankFactors<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        LowRankFactors {
            rows,
            cols,
            left: DMatrix::zeros(rows, 0),
            right: DMatrix::zeros(0, cols),
        }
    }

    pub fn rank(&self) -> usize {
        self.left.ncols()
    }

    pub fn to_matrix(&self) -> DMatrix<T> {
        if self.rank() == 0 {
            DMatrix::zeros(self.rows, self.cols)
        } else {
            T::matmul(&self.left, &self.right)
        }
    }
}

/// Thresholded SVD in factored form plus the sorted singular values.
pub fn low_rank_factors<T: Pixel>(u: &DMatrix<T>, theta: f64) -> Result<(LowRankFactors<T>, Vec<f64>)> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidConfig(format!("rank threshold {theta} must be >= 0")));
    }
    if u.iter().any(|v| !v.finite()) {
        return Err(Error::NonFinite("low-rank input"));
    }
    let (rows, cols) = u.shape();
    if rows == 0 || cols == 0 {
        return Ok((LowRankFactors::zeros(rows, cols), Vec::new()));
    }
    let frob_sq: f64 = u.iter().map(|v| v.abs_sq()).sum();
    // sigma_max <= ||U||_F; skip the decomposition when nothing can survive.
    if frob_sq == 0.0 || (theta > 0.0 && frob_sq.sqrt() < theta - THRESHOLD_SLACK) {
        return Ok((LowRankFactors::zeros(rows, cols), Vec::new()));
    }

    let svd = T::thin_svd(u).ok_or(Error::NonFinite("singular value decomposition did not converge"))?;
    let (left, right_t, mut singular_values) = (svd.u, svd.v_t, svd.singular_values);

    let keep: Vec<usize> = (0..singular_values.len())
        .filter(|&r| singular_values[r] > 0.0 && singular_values[r] >= theta - THRESHOLD_SLACK)
        .collect();
    let rank = keep.len();
    let mut scaled_left = DMatrix::zeros(rows, rank);
    let mut right = DMatrix::zeros(rank, cols);
    for (k, &r) in keep.iter().enumerate() {
        let s = T::from_re(singular_values[r]);
        for i in 0..rows {
            scaled_left[(i, k)] = left[(i, r)] * s;
        }
        right.row_mut(k).copy_from(&right_t.row(r));
    }
    singular_values.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((
        LowRankFactors {
            rows,
            cols,
            left: scaled_left,
            right,
        },
        singular_values,
    ))
}

/// Minimizes `||U - D||_F^2 + theta^2 rank(D)`: singular values below `theta`
/// are zeroed, the rest kept unchanged.
pub fn low_rank_approx<T: Pixel>(u: &DMatrix<T>, theta: f64) -> Result<LowRankApproximant<T>> {
    let (factors, singular_values) = low_rank_factors(u, theta)?;
    let matrix = if theta == 0.0 { u.clone() } else { factors.to_matrix() };
    Ok(LowRankApproximant {
        matrix,
        retained_rank: factors.rank(),
        singular_values,
    })
}
