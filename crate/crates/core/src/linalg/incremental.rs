use super::matrix::axpy;
use super::{
    classify_reduced, reduce_in_place, rref_with_transform, LinalgError, Matrix, RrefResult,
    SolveOutcome,
};
use crate::field::Field;

/// How an [`IncrementalReducer::update`] was carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePath {
    /// Only the new lower-right block was row reduced.
    Block,
    /// The accumulated block had deficient column rank; the whole matrix
    /// was reduced from scratch.
    BatchFallback,
}

/// Row reduction of a matrix that grows by a block row and a block column
/// at a time, reusing the transform of the previous stage.
///
/// With the accumulated matrix partitioned as `[[A, C], [B, D]]` and
/// `R * A = [I; 0]` already known, the new transform is the product of
/// four factors: apply `R` to the top rows, cancel `B` with the identity
/// block, reduce what remains in the new columns (the old zero rows of
/// `R * A` stacked over `D - B * (R*C)_top`), then clear `(R*C)_top` above
/// the new pivots. Rows are finally ordered so the identity blocks sit on
/// top, which makes the result equal to the batch RREF.
#[derive(Debug, Clone)]
pub struct IncrementalReducer<F> {
    matrix: Matrix<F>,
    state: RrefResult<F>,
    block_updates: usize,
    batch_fallbacks: usize,
}

impl<F: Field> IncrementalReducer<F> {
    pub fn new(initial: Matrix<F>) -> Self {
        let state = rref_with_transform(&initial);
        IncrementalReducer {
            matrix: initial,
            state,
            block_updates: 0,
            batch_fallbacks: 0,
        }
    }

    /// The full accumulated matrix `[[A, C], [B, D]]`.
    pub fn matrix(&self) -> &Matrix<F> {
        &self.matrix
    }

    pub fn result(&self) -> &RrefResult<F> {
        &self.state
    }

    pub fn rank(&self) -> usize {
        self.state.rank
    }

    pub fn block_updates(&self) -> usize {
        self.block_updates
    }

    pub fn batch_fallbacks(&self) -> usize {
        self.batch_fallbacks
    }

    /// Solves `matrix * x = rhs` from the maintained reduction.
    pub fn solve(&self, rhs: &Matrix<F>) -> Result<SolveOutcome<F>, LinalgError> {
        if rhs.rows() != self.matrix.rows() {
            return Err(LinalgError::DimensionMismatch {
                op: "IncrementalReducer::solve",
                left: self.matrix.shape(),
                right: rhs.shape(),
            });
        }
        let reduced_rhs = self.state.transform.mul(rhs)?;
        Ok(classify_reduced(
            self.matrix.cols(),
            &self.state.pivot_cols,
            &reduced_rhs,
        ))
    }

    /// Grows the matrix to `[[A, C], [B, D]]` where `A` is the current one.
    pub fn update(
        &mut self,
        b: &Matrix<F>,
        c: &Matrix<F>,
        d: &Matrix<F>,
    ) -> Result<UpdatePath, LinalgError> {
        let (m, k) = self.matrix.shape();
        let (mn, kn) = d.shape();
        if b.shape() != (mn, k) || c.shape() != (m, kn) {
            return Err(LinalgError::DimensionMismatch {
                op: "incremental_update",
                left: (m, k),
                right: (b.rows(), c.cols()),
            });
        }
        let top = Matrix::hstack(&[&self.matrix, c])?;
        let bottom = Matrix::hstack(&[b, d])?;
        let full = Matrix::vstack(&[&top, &bottom])?;

        if self.state.rank != k {
            self.state = rref_with_transform(&full);
            self.matrix = full;
            self.batch_fallbacks += 1;
            return Ok(UpdatePath::BatchFallback);
        }

        let r = &self.state.transform;
        let rc = r.mul(c)?;
        let r_top = r.block(0, 0, k, m);
        let r_bot = r.block(k, 0, m - k, m);
        let mut rc_top = rc.block(0, 0, k, kn);
        let rc_bot = rc.block(k, 0, m - k, kn);

        // Cancel B against the identity block of R*A.
        let lower = d.sub(&b.mul(&rc_top)?)?;
        let lower_tr = Matrix::hstack(&[&b.mul(&r_top)?.scale(-F::ONE), &Matrix::identity(mn)])?;

        // Reduce the remaining rows restricted to the new columns, carrying
        // their rows of the transform along.
        let mut s = Matrix::vstack(&[&rc_bot, &lower])?;
        let mut s_tr = Matrix::vstack(&[&Matrix::hstack(&[&r_bot, &Matrix::zeros(m - k, mn)])?, &lower_tr])?;
        let s_pivots = reduce_in_place(&mut s, Some(&mut s_tr), kn);

        // Clear the upper-right block above the new pivots.
        let mut top_tr = Matrix::hstack(&[&r_top, &Matrix::zeros(k, mn)])?;
        for (i, &p) in s_pivots.iter().enumerate() {
            for t in 0..k {
                let f = rc_top[(t, p)];
                if !f.is_zero() {
                    axpy(rc_top.row_mut(t), s.row(i), -f);
                    axpy(top_tr.row_mut(t), s_tr.row(i), -f);
                }
            }
        }

        let upper = Matrix::hstack(&[&Matrix::identity(k), &rc_top])?;
        let rest = Matrix::hstack(&[&Matrix::zeros(m - k + mn, k), &s])?;
        let reduced = Matrix::vstack(&[&upper, &rest])?;
        let transform = Matrix::vstack(&[&top_tr, &s_tr])?;
        let pivot_cols: Vec<usize> = (0..k).chain(s_pivots.iter().map(|&p| k + p)).collect();

        self.state = RrefResult {
            rank: pivot_cols.len(),
            reduced,
            transform,
            pivot_cols,
        };
        self.matrix = full;
        self.block_updates += 1;
        Ok(UpdatePath::Block)
    }
}
