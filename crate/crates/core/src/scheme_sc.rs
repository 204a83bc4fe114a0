//! Rateless coding with a secret side channel.
//!
//! The source sends `X_0 = (W | I_b)` mixed by a fresh random `K_i` at
//! every stage, and over the secret channel a batch of Vandermonde hashes
//! `H_i = X_0 D_i`. The sink keeps every observation and hash; once exactly
//! one combination of its received packets reproduces all hashes it
//! recovers `X_0` as that combination.

use rand::Rng;

use crate::channel::{Channel, StageParams};
use crate::field::Field;
use crate::linalg::{
    solve_in_row_space, vandermonde, IncrementalReducer, Matrix, RowBasis, SolveOutcome,
};
use crate::session::{Audit, SchemeError, SessionReport, TrialRecord};

pub use crate::session::DecodeStatus;

/// The message batch of one session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceMessage<F> {
    w: Matrix<F>,
    x0: Matrix<F>,
}

impl<F: Field> SourceMessage<F> {
    pub fn new(w: Matrix<F>) -> Result<Self, SchemeError> {
        let (b, n) = w.shape();
        if b == 0 || n == 0 {
            return Err(SchemeError::InvalidParams(format!(
                "message must be at least 1x1, got {b}x{n}"
            )));
        }
        if (n + b) as u64 >= F::ORDER as u64 {
            return Err(SchemeError::InvalidParams(format!(
                "n + b < q violated (n + b = {}, q = {})",
                n + b,
                F::ORDER
            )));
        }
        let x0 = Matrix::hstack(&[&w, &Matrix::identity(b)])?;
        Ok(SourceMessage { w, x0 })
    }

    pub fn random<R: Rng + ?Sized>(b: usize, n: usize, rng: &mut R) -> Result<Self, SchemeError> {
        Self::new(Matrix::random(b, n, rng))
    }

    pub fn w(&self) -> &Matrix<F> {
        &self.w
    }

    /// `(W | I_b)`.
    pub fn x0(&self) -> &Matrix<F> {
        &self.x0
    }

    pub fn b(&self) -> usize {
        self.w.rows()
    }

    pub fn n(&self) -> usize {
        self.w.cols()
    }

    /// Packet length `n + b`.
    pub fn width(&self) -> usize {
        self.x0.cols()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScOptions {
    /// Send `b c_i + 1` hash points at every stage instead of only at the
    /// first.
    pub extra_point_every_stage: bool,
}

/// Hash points sent at `stage` (1-based) when the source has `c_i`
/// transmission opportunities.
pub fn hash_point_count(b: usize, c_i: usize, stage: usize, opts: ScOptions) -> usize {
    let alpha = b * c_i;
    if stage == 1 || opts.extra_point_every_stage {
        alpha + 1
    } else {
        alpha
    }
}

/// What travels over the secret channel at one stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretStagePayload<F> {
    pub points: Vec<F>,
    /// `X_0 D`, with `D = vandermonde(points, n + b)`.
    pub h: Matrix<F>,
}

impl<F: Field> SecretStagePayload<F> {
    pub fn new(msg: &SourceMessage<F>, points: Vec<F>) -> Self {
        let d = vandermonde(&points, msg.width());
        let h = msg.x0().mul(&d).expect("X0 and D are conformable");
        SecretStagePayload { points, h }
    }

    /// Symbols on the secret channel: each point plus its `b` hash values.
    pub fn symbol_count(&self) -> usize {
        self.points.len() * (self.h.rows() + 1)
    }
}

/// Encodes one stage: `c_i` packets `K_i X_0` and the stage's hash batch.
pub fn encode_stage<F: Field, R: Rng + ?Sized>(
    msg: &SourceMessage<F>,
    stage: usize,
    c_i: usize,
    opts: ScOptions,
    rng: &mut R,
) -> Result<(Matrix<F>, SecretStagePayload<F>), SchemeError> {
    if stage == 0 || c_i == 0 {
        return Err(SchemeError::InvalidParams(format!(
            "stage and c_i must be positive (stage = {stage}, c_i = {c_i})"
        )));
    }
    let k = Matrix::random(c_i, msg.b(), rng);
    let points = (0..hash_point_count(msg.b(), c_i, stage, opts))
        .map(|_| F::random(rng))
        .collect();
    encode_stage_with(msg, &k, points)
}

/// [`encode_stage`] with a caller-chosen mixing matrix and hash points.
pub fn encode_stage_with<F: Field>(
    msg: &SourceMessage<F>,
    k: &Matrix<F>,
    points: Vec<F>,
) -> Result<(Matrix<F>, SecretStagePayload<F>), SchemeError> {
    let x = k.mul(msg.x0())?;
    Ok((x, SecretStagePayload::new(msg, points)))
}

/// Everything the sink has accumulated.
///
/// Decoding works on a greedy basis of the received rows: with `Y_B` that
/// basis, the sink solves `X_s (Y_B D) = H` for `X_s`. The transposed
/// coefficient matrix `(Y_B D)^T` grows by a block row (new hash points)
/// and a block column (new independent packets) per stage and is kept row
/// reduced incrementally.
#[derive(Debug, Clone)]
pub struct SinkStateSC<F> {
    b: usize,
    n: usize,
    y: Matrix<F>,
    d: Matrix<F>,
    h: Matrix<F>,
    stage: usize,
    basis: RowBasis<F>,
    basis_rows: Matrix<F>,
    reducer: Option<IncrementalReducer<F>>,
}

impl<F: Field> SinkStateSC<F> {
    pub fn new(b: usize, n: usize) -> Self {
        SinkStateSC {
            b,
            n,
            y: Matrix::zeros(0, n + b),
            d: Matrix::zeros(n + b, 0),
            h: Matrix::zeros(b, 0),
            stage: 0,
            basis: RowBasis::new(n + b),
            basis_rows: Matrix::zeros(0, n + b),
            reducer: None,
        }
    }

    /// Stacked observations `Y^(i)`.
    pub fn y(&self) -> &Matrix<F> {
        &self.y
    }

    /// Concatenated Vandermonde matrices `D^(i)`.
    pub fn d(&self) -> &Matrix<F> {
        &self.d
    }

    /// Concatenated hashes `H^(i)`.
    pub fn h(&self) -> &Matrix<F> {
        &self.h
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    /// Rank of `Y^(i)`.
    pub fn rank(&self) -> usize {
        self.basis.rank()
    }

    pub fn reducer(&self) -> Option<&IncrementalReducer<F>> {
        self.reducer.as_ref()
    }

    pub fn ingest(
        &mut self,
        y_i: &Matrix<F>,
        secret: &SecretStagePayload<F>,
    ) -> Result<(), SchemeError> {
        let width = self.n + self.b;
        if y_i.cols() != width
            || secret.h.rows() != self.b
            || secret.h.cols() != secret.points.len()
        {
            return Err(SchemeError::InvalidParams(format!(
                "stage shapes disagree with an {}x{} message (Y_i is {}x{}, H_i is {}x{})",
                self.b,
                self.n,
                y_i.rows(),
                y_i.cols(),
                secret.h.rows(),
                secret.h.cols()
            )));
        }
        let new_rows: Vec<usize> = (0..y_i.rows())
            .filter(|&r| self.basis.insert(y_i.row(r)))
            .collect();
        let y_new = y_i.select_rows(&new_rows);
        let d_new = vandermonde(&secret.points, width);

        match &mut self.reducer {
            None => {
                let g = y_new.mul(&d_new)?.transpose();
                self.reducer = Some(IncrementalReducer::new(g));
            }
            Some(red) => {
                let c = y_new.mul(&self.d)?.transpose();
                let b = self.basis_rows.mul(&d_new)?.transpose();
                let d = y_new.mul(&d_new)?.transpose();
                red.update(&b, &c, &d)?;
            }
        }

        self.basis_rows = Matrix::vstack(&[&self.basis_rows, &y_new])?;
        self.y = Matrix::vstack(&[&self.y, y_i])?;
        self.d = Matrix::hstack(&[&self.d, &d_new])?;
        self.h = Matrix::hstack(&[&self.h, &secret.h])?;
        self.stage += 1;
        Ok(())
    }

    pub fn try_decode(&self) -> Result<DecodeStatus<F>, SchemeError> {
        let Some(reducer) = &self.reducer else {
            return Ok(DecodeStatus::NeedMore);
        };
        if self.basis.rank() < self.b {
            return Ok(DecodeStatus::NeedMore);
        }
        let outcome = reducer.solve(&self.h.transpose())?;
        debug_assert!(self.agrees_with_batch(&outcome));
        let xs = match outcome {
            SolveOutcome::NoSolution => return Ok(DecodeStatus::NeedMore),
            SolveOutcome::Multiple { .. } => return Ok(DecodeStatus::Failure),
            SolveOutcome::Unique(xt) => xt.transpose(),
        };
        let x0 = xs.mul(&self.basis_rows)?;
        if x0.block(0, self.n, self.b, self.b) != Matrix::identity(self.b) {
            return Ok(DecodeStatus::Failure);
        }
        Ok(DecodeStatus::Decoded(x0.block(0, 0, self.b, self.n)))
    }

    fn agrees_with_batch(&self, outcome: &SolveOutcome<F>) -> bool {
        let Ok(batch) = solve_in_row_space(&self.basis_rows, &self.d, &self.h) else {
            return false;
        };
        match (outcome, batch) {
            (SolveOutcome::Unique(a), SolveOutcome::Unique(b)) => a.transpose() == b,
            (a, b) => a.status() == b.status(),
        }
    }
}

/// Runs one session: encode, transmit, ingest and try to decode stage by
/// stage until a decision or the end of `schedule`.
pub fn run_session<F, C, R>(
    msg: &SourceMessage<F>,
    schedule: &[StageParams],
    channel: &C,
    opts: ScOptions,
    trial: u64,
    rng: &mut R,
) -> Result<SessionReport, SchemeError>
where
    F: Field,
    C: Channel<F>,
    R: Rng + ?Sized,
{
    let b = msg.b();
    let mut state = SinkStateSC::new(b, msg.n());
    let mut record = TrialRecord::new(trial);
    let mut audit = Audit::default();
    for (idx, params) in schedule.iter().enumerate() {
        let stage = idx + 1;
        let (x, secret) = encode_stage(msg, stage, params.opportunities, opts, rng)?;
        let out = channel.transmit(params, &x, b, rng)?;
        audit.check("Y = T X + Q Z", stage, out.decomposes(&x));
        audit.check(
            "X0 D_i = H_i",
            stage,
            msg.x0().mul(&vandermonde(&secret.points, msg.width()))? == secret.h,
        );
        state.ingest(&out.y, &secret)?;
        audit.check("X0 D^(i) = H^(i)", stage, msg.x0().mul(state.d())? == *state.h());

        let z = if channel.adversary_active() { params.adversary } else { 0 };
        record.stage_trace.push((params.capacity, z));
        let status = state.try_decode()?;
        record.statuses.push(status.kind());
        let correct = matches!(&status, DecodeStatus::Decoded(w) if w == msg.w());
        if record.finish(status.kind(), b, correct) {
            break;
        }
    }
    record.stages = record.statuses.len();
    Ok(SessionReport { record, audit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{AdversaryStrategy, MatrixChannel};
    use crate::field::{Fp7, Gf65536};
    use crate::session::Outcome;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type G = Gf65536;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn x0_appends_identity() {
        let w = Matrix::<Fp7>::from_u32_rows(&[&[1, 2, 3], &[4, 5, 6]]);
        let msg = SourceMessage::new(w).unwrap();
        assert_eq!(
            msg.x0().to_u32_rows(),
            vec![vec![1, 2, 3, 1, 0], vec![4, 5, 6, 0, 1]]
        );
    }

    #[test]
    fn message_shape_rules() {
        assert!(SourceMessage::new(Matrix::<Fp7>::zeros(3, 4)).is_err());
        assert!(SourceMessage::new(Matrix::<Fp7>::zeros(0, 3)).is_err());
        assert!(SourceMessage::new(Matrix::<Fp7>::zeros(2, 4)).is_ok());
    }

    #[test]
    fn identity_mixing_sends_x0() {
        let msg = SourceMessage::<G>::random(1, 5, &mut rng(1)).unwrap();
        let (x, _) = encode_stage_with(&msg, &Matrix::identity(1), vec![]).unwrap();
        assert_eq!(&x, msg.x0());
    }

    #[test]
    fn stage_rows_lie_in_message_row_space() {
        let mut r = rng(2);
        let msg = SourceMessage::<G>::random(3, 6, &mut r).unwrap();
        let (x, _) = encode_stage(&msg, 1, 5, ScOptions::default(), &mut r).unwrap();
        let stacked = Matrix::vstack(&[msg.x0(), &x]).unwrap();
        assert_eq!(stacked.rank(), 3);
    }

    #[test]
    fn hash_matches_polynomial_evaluation_gf7() {
        let mut r = rng(3);
        let msg = SourceMessage::<Fp7>::random(2, 2, &mut r).unwrap();
        let (_, secret) = encode_stage(&msg, 1, 2, ScOptions::default(), &mut r).unwrap();
        assert_eq!(secret.points.len(), 2 * 2 + 1);
        for row in 0..2 {
            let x: Vec<u64> = msg.x0().row(row).iter().map(|v| v.value() as u64).collect();
            for (j, p) in secret.points.iter().enumerate() {
                let p = p.value() as u64;
                // sum_k x_k p^(k+1), by Horner on the reversed coefficients.
                let eval = x.iter().rev().fold(0u64, |acc, &c| (acc * p + c) % 7) * p % 7;
                assert_eq!(secret.h[(row, j)].value() as u64, eval);
            }
        }
    }

    #[test]
    fn secret_sizes_per_stage() {
        let mut r = rng(4);
        let msg = SourceMessage::<G>::random(3, 8, &mut r).unwrap();
        let opts = ScOptions::default();
        let (_, s1) = encode_stage(&msg, 1, 4, opts, &mut r).unwrap();
        let (_, s2) = encode_stage(&msg, 2, 2, opts, &mut r).unwrap();
        assert_eq!(s1.symbol_count(), (3 * 4 + 1) * 4);
        assert_eq!(s2.symbol_count(), 3 * 2 * 4);
        let every = ScOptions {
            extra_point_every_stage: true,
        };
        assert_eq!(hash_point_count(3, 2, 2, every), 7);
    }

    #[test]
    fn ingest_stacks_observations() {
        let mut r = rng(5);
        let (b, n) = (2, 6);
        let msg = SourceMessage::<G>::random(b, n, &mut r).unwrap();
        let mut state = SinkStateSC::new(b, n);
        let (x1, s1) = encode_stage(&msg, 1, 3, ScOptions::default(), &mut r).unwrap();
        state.ingest(&x1, &s1).unwrap();
        assert_eq!(state.y(), &x1);
        let (x2, s2) = encode_stage(&msg, 2, 2, ScOptions::default(), &mut r).unwrap();
        state.ingest(&x2, &s2).unwrap();
        assert_eq!(state.y().rows(), 5);
        assert_eq!(state.d().cols(), (b * 3 + 1) + b * 2);
        assert_eq!(&msg.x0().mul(state.d()).unwrap(), state.h());
        assert!(state.ingest(&Matrix::zeros(1, n), &s2).is_err());
    }

    #[test]
    fn noiseless_single_stage_decodes() {
        let mut r = rng(6);
        let msg = SourceMessage::<G>::random(3, 10, &mut r).unwrap();
        let schedule = [StageParams::new(3, 0, 3)];
        let report = run_session(
            &msg,
            &schedule,
            &MatrixChannel::new(AdversaryStrategy::UniformRandom),
            ScOptions::default(),
            0,
            &mut r,
        )
        .unwrap();
        assert_eq!(report.record.outcome, Outcome::Decoded);
        assert!(report.record.correct);
        assert_eq!(report.record.rate, 3.0);
        assert!(report.audit.is_clean());
    }

    #[test]
    fn cutset_violation_needs_more() {
        let mut need_more = 0;
        for seed in 0..200 {
            let mut r = rng(seed);
            let msg = SourceMessage::<G>::random(3, 10, &mut r).unwrap();
            let params = StageParams::new(3, 1, 3);
            let (x, s) = encode_stage(&msg, 1, 3, ScOptions::default(), &mut r).unwrap();
            let out = MatrixChannel::new(AdversaryStrategy::UniformRandom)
                .transmit(&params, &x, 3, &mut r)
                .unwrap();
            let mut state = SinkStateSC::new(3, 10);
            state.ingest(&out.y, &s).unwrap();
            need_more += usize::from(state.try_decode().unwrap() == DecodeStatus::NeedMore);
        }
        assert!(need_more >= 198, "{need_more}");
    }

    #[test]
    fn decodes_once_cutset_holds() {
        let mut at_two = 0;
        for seed in 0..200 {
            let mut r = rng(1000 + seed);
            let msg = SourceMessage::<G>::random(4, 16, &mut r).unwrap();
            let schedule = [StageParams::new(3, 1, 3); 3];
            let report = run_session(
                &msg,
                &schedule,
                &MatrixChannel::new(AdversaryStrategy::UniformRandom),
                ScOptions::default(),
                seed,
                &mut r,
            )
            .unwrap();
            assert!(!report.record.silent_corruption());
            assert!(report.audit.is_clean(), "{:?}", report.audit.violations);
            at_two += usize::from(report.record.outcome == Outcome::Decoded && report.record.stages == 2);
        }
        assert!(at_two >= 198, "{at_two}");
    }

    #[test]
    fn decoding_is_monotone() {
        let mut r = rng(7);
        let msg = SourceMessage::<G>::random(2, 8, &mut r).unwrap();
        let channel = MatrixChannel::new(AdversaryStrategy::UniformRandom);
        let mut state = SinkStateSC::new(2, 8);
        let mut decoded = None;
        for stage in 1..=4 {
            let params = StageParams::new(3, 1, 3);
            let (x, s) = encode_stage(&msg, stage, 3, ScOptions::default(), &mut r).unwrap();
            let out = channel.transmit(&params, &x, 2, &mut r).unwrap();
            state.ingest(&out.y, &s).unwrap();
            match (state.try_decode().unwrap(), &decoded) {
                (DecodeStatus::Decoded(w), None) => decoded = Some(w),
                (DecodeStatus::Decoded(w), Some(prev)) => assert_eq!(&w, prev),
                (_, Some(_)) => panic!("lost a decoded message at stage {stage}"),
                _ => {}
            }
        }
        assert_eq!(decoded.as_ref(), Some(msg.w()));
        let red = state.reducer().unwrap();
        assert_eq!(red.block_updates() + red.batch_fallbacks(), 3);
    }

    #[test]
    fn stacked_transfer_has_full_column_rank() {
        // [T^(i) K^(i) | blockdiag(Q_j)] once b + sum z <= sum M.
        let mut full = 0;
        for seed in 0..200 {
            let mut r = rng(5000 + seed);
            let (b, stages) = (4, 2);
            let params = StageParams::new(3, 1, 3);
            let mut tk = Vec::new();
            let mut qs = Vec::new();
            for _ in 0..stages {
                let k = Matrix::<G>::random(3, b, &mut r);
                let (t, q) = crate::channel::sample_transfer::<G, _>(&params, &mut r).unwrap();
                tk.push(t.mul(&k).unwrap());
                qs.push(q);
            }
            let tk = Matrix::vstack(&tk.iter().collect::<Vec<_>>()).unwrap();
            let mut qd = Matrix::zeros(6, 2);
            qd.set_block(0, 0, &qs[0]);
            qd.set_block(3, 1, &qs[1]);
            let that = Matrix::hstack(&[&tk, &qd]).unwrap();
            full += usize::from(that.rank() == b + 2);
        }
        assert!(full >= 198, "{full}");
    }
}
