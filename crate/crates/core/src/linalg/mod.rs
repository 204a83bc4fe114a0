//! Dense linear algebra over a [`Field`]: row reduction with a recorded
//! transform, linear solving with uniqueness classification, Vandermonde
//! construction, and incremental block row reduction.

mod incremental;
mod matrix;

pub use incremental::{IncrementalReducer, UpdatePath};
pub use matrix::Matrix;

use thiserror::Error;

use crate::field::Field;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("data length {len} does not match a {rows}x{cols} matrix")]
    BadData { rows: usize, cols: usize, len: usize },
}

/// Reduced row-echelon form together with the transform that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RrefResult<F> {
    pub reduced: Matrix<F>,
    /// Square, invertible; `transform * input == reduced`.
    pub transform: Matrix<F>,
    pub pivot_cols: Vec<usize>,
    pub rank: usize,
}

/// Outcome of solving a linear system exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome<F> {
    Unique(Matrix<F>),
    NoSolution,
    /// Consistent but underdetermined; `particular` is one solution and
    /// `nullity` the dimension of the solution space's direction.
    Multiple {
        particular: Matrix<F>,
        nullity: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Unique,
    NoSolution,
    Multiple,
}

impl<F> SolveOutcome<F> {
    pub fn status(&self) -> SolveStatus {
        match self {
            SolveOutcome::Unique(_) => SolveStatus::Unique,
            SolveOutcome::NoSolution => SolveStatus::NoSolution,
            SolveOutcome::Multiple { .. } => SolveStatus::Multiple,
        }
    }

    pub fn unique(self) -> Option<Matrix<F>> {
        match self {
            SolveOutcome::Unique(m) => Some(m),
            _ => None,
        }
    }
}

pub fn mat_mul<F: Field>(a: &Matrix<F>, b: &Matrix<F>) -> Result<Matrix<F>, LinalgError> {
    a.mul(b)
}

/// Gauss-Jordan elimination of `m` in place. Pivots are searched only in
/// columns `< pivot_limit`; for each column the first nonzero entry at or
/// below the current pivot row is used. Every row operation is mirrored on
/// `aux`, which must have the same number of rows.
pub(crate) fn reduce_in_place<F: Field>(
    m: &mut Matrix<F>,
    mut aux: Option<&mut Matrix<F>>,
    pivot_limit: usize,
) -> Vec<usize> {
    if let Some(a) = aux.as_deref() {
        assert_eq!(a.rows(), m.rows());
    }
    let rows = m.rows();
    let mut pivots = Vec::new();
    let mut next = 0;
    for col in 0..pivot_limit.min(m.cols()) {
        if next == rows {
            break;
        }
        let Some(p) = (next..rows).find(|&r| !m[(r, col)].is_zero()) else {
            continue;
        };
        m.swap_rows(p, next);
        if let Some(a) = aux.as_deref_mut() {
            a.swap_rows(p, next);
        }
        let inv = m[(next, col)].inv().expect("pivot is nonzero");
        m.scale_row(next, inv);
        if let Some(a) = aux.as_deref_mut() {
            a.scale_row(next, inv);
        }
        for r in 0..rows {
            if r == next {
                continue;
            }
            let factor = m[(r, col)];
            if !factor.is_zero() {
                m.add_row_multiple(r, next, -factor);
                if let Some(a) = aux.as_deref_mut() {
                    a.add_row_multiple(r, next, -factor);
                }
            }
        }
        pivots.push(col);
        next += 1;
    }
    pivots
}

pub fn rref_with_transform<F: Field>(a: &Matrix<F>) -> RrefResult<F> {
    let mut reduced = a.clone();
    let mut transform = Matrix::identity(a.rows());
    let pivot_cols = reduce_in_place(&mut reduced, Some(&mut transform), a.cols());
    RrefResult {
        rank: pivot_cols.len(),
        reduced,
        transform,
        pivot_cols,
    }
}

/// Reads the solution set of `a * x = rhs` off an already reduced system.
/// `reduced` is the RREF of `a` (pivots listed in `pivots`) and
/// `reduced_rhs` is `transform * rhs`.
pub(crate) fn classify_reduced<F: Field>(
    cols: usize,
    pivots: &[usize],
    reduced_rhs: &Matrix<F>,
) -> SolveOutcome<F> {
    let rank = pivots.len();
    if (rank..reduced_rhs.rows()).any(|r| reduced_rhs.row(r).iter().any(|x| !x.is_zero())) {
        return SolveOutcome::NoSolution;
    }
    let mut x = Matrix::zeros(cols, reduced_rhs.cols());
    for (i, &p) in pivots.iter().enumerate() {
        x.row_mut(p).copy_from_slice(reduced_rhs.row(i));
    }
    if rank == cols {
        SolveOutcome::Unique(x)
    } else {
        SolveOutcome::Multiple {
            particular: x,
            nullity: cols - rank,
        }
    }
}

/// Solves `a * x = rhs` for `x` (possibly with several right-hand columns).
pub fn solve_linear<F: Field>(
    a: &Matrix<F>,
    rhs: &Matrix<F>,
) -> Result<SolveOutcome<F>, LinalgError> {
    if a.rows() != rhs.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "solve_linear",
            left: a.shape(),
            right: rhs.shape(),
        });
    }
    let mut aug = Matrix::hstack(&[a, rhs])?;
    let pivots = reduce_in_place(&mut aug, None, a.cols());
    let reduced_rhs = aug.block(0, a.cols(), a.rows(), rhs.cols());
    Ok(classify_reduced(a.cols(), &pivots, &reduced_rhs))
}

/// Right null space of `a`, one basis vector per column.
pub fn null_space<F: Field>(a: &Matrix<F>) -> Matrix<F> {
    let mut red = a.clone();
    let pivots = reduce_in_place(&mut red, None, a.cols());
    let free: Vec<usize> = (0..a.cols()).filter(|c| !pivots.contains(c)).collect();
    let mut basis = Matrix::zeros(a.cols(), free.len());
    for (j, &f) in free.iter().enumerate() {
        basis[(f, j)] = F::ONE;
        for (i, &p) in pivots.iter().enumerate() {
            basis[(p, j)] = -red[(i, f)];
        }
    }
    basis
}

/// Solves `xs * (y * dm) = h` for `xs`.
///
/// `Multiple` is reported whenever `y * dm` has a nontrivial left null
/// space and `h` is consistent, i.e. when `xs` itself is not determined.
pub fn solve_in_row_space<F: Field>(
    y: &Matrix<F>,
    dm: &Matrix<F>,
    h: &Matrix<F>,
) -> Result<SolveOutcome<F>, LinalgError> {
    if h.cols() != dm.cols() {
        return Err(LinalgError::DimensionMismatch {
            op: "solve_in_row_space",
            left: dm.shape(),
            right: h.shape(),
        });
    }
    let coeff = y.mul(dm)?;
    Ok(match solve_linear(&coeff.transpose(), &h.transpose())? {
        SolveOutcome::Unique(x) => SolveOutcome::Unique(x.transpose()),
        SolveOutcome::NoSolution => SolveOutcome::NoSolution,
        SolveOutcome::Multiple {
            particular,
            nullity,
        } => SolveOutcome::Multiple {
            particular: particular.transpose(),
            nullity,
        },
    })
}

/// `num_rows x points.len()` matrix with entry `(k, j) = points[j]^(k+1)`.
pub fn vandermonde<F: Field>(points: &[F], num_rows: usize) -> Matrix<F> {
    let mut m = Matrix::zeros(num_rows, points.len());
    for (j, &p) in points.iter().enumerate() {
        let mut acc = F::ONE;
        for k in 0..num_rows {
            acc *= p;
            m[(k, j)] = acc;
        }
    }
    m
}

pub fn vectorize<F: Field>(m: &Matrix<F>) -> Matrix<F> {
    m.vectorize()
}

pub fn devectorize<F: Field>(
    v: &[F],
    rows: usize,
    cols: usize,
) -> Result<Matrix<F>, LinalgError> {
    Matrix::devectorize(v, rows, cols)
}

/// Greedy basis of a growing row set.
///
/// Rows are offered one at a time and kept only if they are independent
/// of the rows already kept.
#[derive(Debug, Clone)]
pub struct RowBasis<F> {
    width: usize,
    echelon: Vec<(usize, Vec<F>)>,
    kept: Vec<Vec<F>>,
}

impl<F: Field> RowBasis<F> {
    pub fn new(width: usize) -> Self {
        RowBasis {
            width,
            echelon: Vec::new(),
            kept: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.kept.len()
    }

    /// Offers a row; returns whether it was independent (and kept).
    pub fn insert(&mut self, row: &[F]) -> bool {
        assert_eq!(row.len(), self.width);
        let mut v = row.to_vec();
        for (p, e) in &self.echelon {
            let f = v[*p];
            if !f.is_zero() {
                matrix::axpy(&mut v, e, -f);
            }
        }
        let Some(p) = v.iter().position(|x| !x.is_zero()) else {
            return false;
        };
        let inv = v[p].inv().expect("nonzero");
        for x in &mut v {
            *x *= inv;
        }
        self.echelon.push((p, v));
        self.kept.push(row.to_vec());
        true
    }

    /// The kept rows, in insertion order.
    pub fn to_matrix(&self) -> Matrix<F> {
        let data = self.kept.iter().flatten().copied().collect();
        Matrix::new(self.kept.len(), self.width, data).expect("consistent widths")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{Fp251, Fp7, Gf65536};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type M7 = Matrix<Fp7>;

    fn is_rref<F: Field>(m: &Matrix<F>, pivots: &[usize]) -> bool {
        for (i, &p) in pivots.iter().enumerate() {
            if m[(i, p)] != F::ONE {
                return false;
            }
            if (0..p).any(|c| !m[(i, c)].is_zero()) {
                return false;
            }
            if (0..m.rows()).any(|r| r != i && !m[(r, p)].is_zero()) {
                return false;
            }
        }
        pivots.windows(2).all(|w| w[0] < w[1])
            && (pivots.len()..m.rows()).all(|r| m.row(r).iter().all(|x| x.is_zero()))
    }

    /// Rank by brute-force search for the largest nonzero minor.
    fn minor_rank(m: &Matrix<Fp251>) -> usize {
        fn det(m: &Matrix<Fp251>) -> Fp251 {
            let n = m.rows();
            if n == 1 {
                return m[(0, 0)];
            }
            let mut acc = Fp251::ZERO;
            for c in 0..n {
                let rows: Vec<usize> = (1..n).collect();
                let cols: Vec<usize> = (0..n).filter(|&x| x != c).collect();
                let sub = m.select_rows(&rows).select_cols(&cols);
                let term = m[(0, c)] * det(&sub);
                acc = if c % 2 == 0 { acc + term } else { acc - term };
            }
            acc
        }
        fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
            if k == 0 {
                return vec![vec![]];
            }
            if n < k {
                return vec![];
            }
            let mut out = subsets(n - 1, k);
            for mut s in subsets(n - 1, k - 1) {
                s.push(n - 1);
                out.push(s);
            }
            out
        }
        let max = m.rows().min(m.cols());
        for k in (1..=max).rev() {
            for rs in subsets(m.rows(), k) {
                for cs in subsets(m.cols(), k) {
                    if !det(&m.select_rows(&rs).select_cols(&cs)).is_zero() {
                        return k;
                    }
                }
            }
        }
        0
    }

    #[test]
    fn gf7_product_hand_example() {
        let a = M7::from_u32_rows(&[&[1, 2], &[3, 4]]);
        let b = M7::from_u32_rows(&[&[5], &[6]]);
        assert_eq!(mat_mul(&a, &b).unwrap(), M7::from_u32_rows(&[&[3], &[4]]));
        assert!(mat_mul(&b, &b).is_err());
    }

    #[test]
    fn identity_and_associativity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Matrix::<Gf65536>::random(4, 5, &mut rng);
        let b = Matrix::random(5, 3, &mut rng);
        let c = Matrix::random(3, 6, &mut rng);
        assert_eq!(a.mul(&Matrix::identity(5)).unwrap(), a);
        let left = a.mul(&b).unwrap().mul(&c).unwrap();
        let right = a.mul(&b.mul(&c).unwrap()).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn rref_of_identity_and_zero() {
        let id = Matrix::<Fp251>::identity(5);
        let r = rref_with_transform(&id);
        assert_eq!(r.reduced, id);
        assert_eq!(r.rank, 5);
        let z = Matrix::<Fp251>::zeros(3, 4);
        let r = rref_with_transform(&z);
        assert_eq!(r.rank, 0);
        assert_eq!(r.transform, Matrix::identity(3));
    }

    #[test]
    fn rank_of_low_rank_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut hits = 0;
        for _ in 0..20 {
            let a = Matrix::<Fp251>::random(8, 3, &mut rng)
                .mul(&Matrix::random(3, 5, &mut rng))
                .unwrap();
            let r = rref_with_transform(&a);
            assert!(r.rank <= 3);
            assert_eq!(r.transform.mul(&a).unwrap(), r.reduced);
            assert!(is_rref(&r.reduced, &r.pivot_cols));
            hits += usize::from(r.rank == 3);
        }
        assert!(hits >= 18);
    }

    #[test]
    fn rank_matches_minor_oracle_on_small_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let rows = rng.random_range(1..5);
            let cols = rng.random_range(1..5);
            let inner = rng.random_range(1..4);
            let m = Matrix::<Fp251>::random(rows, inner, &mut rng)
                .mul(&Matrix::random(inner, cols, &mut rng))
                .unwrap();
            assert_eq!(m.rank(), minor_rank(&m));
        }
    }

    #[test]
    fn solve_identity_row_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dm = Matrix::<Gf65536>::random(4, 6, &mut rng);
        let out = solve_in_row_space(&Matrix::identity(4), &dm, &dm).unwrap();
        assert_eq!(out, SolveOutcome::Unique(Matrix::identity(4)));
    }

    #[test]
    fn solve_inconsistent_hash() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = Matrix::<Fp251>::random(2, 5, &mut rng);
        let dm = Matrix::random(5, 4, &mut rng);
        // A 1x4 target outside the row space of y*dm (rank 2 in a 4-dim space).
        let coeff = y.mul(&dm).unwrap();
        let mut h = Matrix::random(1, 4, &mut rng);
        while solve_linear(&coeff.transpose(), &h.transpose()).unwrap() != SolveOutcome::NoSolution
        {
            h = Matrix::random(1, 4, &mut rng);
        }
        assert_eq!(
            solve_in_row_space(&y, &dm, &h).unwrap(),
            SolveOutcome::NoSolution
        );
    }

    #[test]
    fn duplicated_row_gives_multiple_solutions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = Matrix::<Fp251>::random(2, 6, &mut rng);
        let y = Matrix::vstack(&[&base, &base.select_rows(&[0])]).unwrap();
        let dm = Matrix::random(6, 5, &mut rng);
        let truth = Matrix::random(1, 3, &mut rng);
        let h = truth.mul(&y).unwrap().mul(&dm).unwrap();
        let SolveOutcome::Multiple {
            particular,
            nullity,
        } = solve_in_row_space(&y, &dm, &h).unwrap()
        else {
            panic!("expected multiple solutions");
        };
        assert_eq!(nullity, 1);
        let coeff = y.mul(&dm).unwrap();
        let kernel = null_space(&coeff.transpose()).transpose();
        let other = particular.add(&kernel.select_rows(&[0])).unwrap();
        assert_ne!(particular, other);
        for s in [&particular, &other] {
            assert_eq!(s.mul(&coeff).unwrap(), h);
        }
    }

    #[test]
    fn solve_dimension_mismatch() {
        let a = M7::zeros(2, 3);
        assert!(solve_linear(&a, &M7::zeros(3, 1)).is_err());
        assert!(solve_in_row_space(&a, &M7::zeros(3, 2), &M7::zeros(1, 3)).is_err());
    }

    #[test]
    fn vandermonde_examples() {
        let v = vandermonde(&[Fp7::from_u32(2)], 3);
        assert_eq!(v, M7::from_u32_rows(&[&[2], &[4], &[1]]));
        let ones = vandermonde(&[Fp7::ONE, Fp7::ONE], 3);
        assert!(ones.data().iter().all(|&x| x == Fp7::ONE));
        let pts: Vec<Fp251> = (1..=6).map(Fp251::from_u32).collect();
        assert_eq!(vandermonde(&pts, 6).rank(), 6);
        assert_eq!(vandermonde(&pts, 9).rank(), 6);
    }

    #[test]
    fn vectorize_examples() {
        let m = M7::from_u32_rows(&[&[1, 2], &[3, 4]]);
        assert_eq!(
            vectorize(&m),
            Matrix::column_vector([1, 3, 2, 4].map(Fp7::from_u32).to_vec())
        );
        let row = M7::from_u32_rows(&[&[1, 2, 3]]);
        assert_eq!(row.vectorize(), row.transpose());
    }

    #[test]
    fn row_basis_keeps_independent_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let gen = Matrix::<Fp251>::random(3, 7, &mut rng);
        let mixed = Matrix::<Fp251>::random(6, 3, &mut rng).mul(&gen).unwrap();
        let mut basis = RowBasis::new(7);
        for r in 0..6 {
            basis.insert(mixed.row(r));
        }
        assert_eq!(basis.rank(), 3);
        assert_eq!(basis.to_matrix().rank(), 3);
        assert!(!basis.insert(gen.row(1)));
        assert!(!basis.insert(&[Fp251::ZERO; 7]));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        fn matrix_strategy(max: usize) -> impl Strategy<Value = Matrix<Fp251>> {
            (1..=max, 1..=max).prop_flat_map(|(r, c)| {
                proptest::collection::vec(0u32..251, r * c).prop_map(move |d| {
                    Matrix::new(r, c, d.into_iter().map(Fp251::from_u32).collect()).unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn transform_is_invertible_and_exact(a in matrix_strategy(8)) {
                let r = rref_with_transform(&a);
                prop_assert_eq!(r.transform.rank(), a.rows());
                prop_assert_eq!(r.transform.mul(&a).unwrap(), r.reduced.clone());
                prop_assert!(is_rref(&r.reduced, &r.pivot_cols));
            }

            #[test]
            fn vectorize_round_trips(a in matrix_strategy(6)) {
                let v = a.vectorize();
                prop_assert_eq!(Matrix::devectorize(v.data(), a.rows(), a.cols()).unwrap(), a);
            }

            #[test]
            fn rank_of_product_is_bounded(a in matrix_strategy(6), seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let b = Matrix::<Fp251>::random(a.cols(), rng.random_range(1..7), &mut rng);
                let ab = a.mul(&b).unwrap();
                prop_assert!(ab.rank() <= a.rank().min(b.rank()));
            }

            #[test]
            fn unique_solutions_satisfy_the_system(seed in any::<u64>()) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let r = rng.random_range(1..5);
                let y = Matrix::<Fp251>::random(r, 8, &mut rng);
                let dm = Matrix::random(8, rng.random_range(1..10), &mut rng);
                let h = if rng.random_bool(0.5) {
                    Matrix::random(2, r, &mut rng).mul(&y).unwrap().mul(&dm).unwrap()
                } else {
                    Matrix::random(2, dm.cols(), &mut rng)
                };
                if let SolveOutcome::Unique(xs) = solve_in_row_space(&y, &dm, &h).unwrap() {
                    prop_assert_eq!(xs.mul(&y.mul(&dm).unwrap()).unwrap(), h);
                }
            }

            #[test]
            fn vandermonde_with_distinct_points_has_full_rank(
                pts in proptest::collection::btree_set(1u32..251, 1..8),
                extra in 0usize..4,
            ) {
                let pts: Vec<Fp251> = pts.into_iter().map(Fp251::from_u32).collect();
                prop_assert_eq!(vandermonde(&pts, pts.len() + extra).rank(), pts.len());
            }
        }
    }
}
