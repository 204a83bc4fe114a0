//! Rateless coding with a small shared random secret.
//!
//! Without a secret channel the hash has to travel over the network too.
//! At stage `k` the source and sink share `alpha_k` parity points `d` and
//! targets `h`; the source solves the suffix `l_k = h_k - D_k w` so that
//! `[D_k I] (w; l_k) = h_k`, where `w` is `W` stacked column by column. The
//! message goes out as long packets `K_i X_0`; the suffixes go out as short
//! packets `G_i L^(i)`, where `L^(i)` stacks the blocks
//! `L_j = (script L_j | 0_D | 0_j | I_sigma)` in a staircase.
//!
//! The sink expands both observation matrices over a column basis whose
//! last columns come from the identity headers, turns the expansions into
//! linear constraints on `w` and the suffixes, appends the parity rows and
//! solves the resulting key equation.

use rand::Rng;

use crate::channel::{Channel, StageParams};
use crate::field::Field;
use crate::linalg::{solve_linear, Matrix, RowBasis, SolveOutcome};
use crate::scheme_sc::SourceMessage;
use crate::session::{Audit, DecodeStatus, SchemeError, SessionReport, TrialRecord};

/// Code parameters of the random-secret scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RsParams {
    pub b: usize,
    pub n: usize,
    /// Short-packet rank margin per stage.
    pub sigma: usize,
    /// Hash block width.
    pub m: usize,
    /// Bound on long-packet opportunities per stage.
    pub c_bar: usize,
    /// Skip the `sigma m` sizing rule. Only for experiments that probe what
    /// happens below it.
    pub relaxed: bool,
}

impl RsParams {
    /// Builds validated parameters; `m = None` picks the smallest `m`
    /// satisfying the sizing rule.
    pub fn new<F: Field>(
        b: usize,
        n: usize,
        sigma: usize,
        m: Option<usize>,
        c_bar: usize,
    ) -> Result<Self, SchemeError> {
        if sigma == 0 {
            return Err(SchemeError::InvalidParams("sigma must be at least 1".into()));
        }
        let p = RsParams {
            b,
            n,
            sigma,
            m: m.unwrap_or_else(|| Self::auto_m(b, sigma, c_bar)),
            c_bar,
            relaxed: false,
        };
        p.validate::<F>()?;
        Ok(p)
    }

    /// Smallest `m` with `sigma m >= 2 b c_bar + 2 sigma c_bar + 1`.
    pub fn auto_m(b: usize, sigma: usize, c_bar: usize) -> usize {
        (Self::min_hash_symbols(b, sigma, c_bar)).div_ceil(sigma)
    }

    fn min_hash_symbols(b: usize, sigma: usize, c_bar: usize) -> usize {
        2 * b * c_bar + 2 * sigma * c_bar + 1
    }

    pub fn validate<F: Field>(&self) -> Result<(), SchemeError> {
        self.validate_for_order(F::ORDER as u64)
    }

    /// [`RsParams::validate`] for a field of order `q`.
    pub fn validate_for_order(&self, q: u64) -> Result<(), SchemeError> {
        let bad = |msg: String| Err(SchemeError::InvalidParams(msg));
        if self.b == 0 || self.n == 0 || self.sigma == 0 || self.m == 0 || self.c_bar == 0 {
            return bad("b, n, sigma, m and c_bar must all be positive".into());
        }
        let need = Self::min_hash_symbols(self.b, self.sigma, self.c_bar);
        if !self.relaxed && self.sigma * self.m < need {
            return bad(format!(
                "sigma m >= 2 b c_bar + 2 sigma c_bar + 1 violated ({} < {need})",
                self.sigma * self.m
            ));
        }
        if (self.n * self.b) as u64 >= q {
            return bad(format!(
                "n b < q violated (n b = {}, q = {q})",
                self.n * self.b
            ));
        }
        if (self.n + self.b) as u64 >= q {
            return bad(format!("n + b < q violated (n + b = {})", self.n + self.b));
        }
        Ok(())
    }

    /// Parity checks added at stage `k`: `alpha_k = k sigma m`.
    pub fn alpha(&self, k: usize) -> usize {
        k * self.sigma * self.m
    }

    /// Short packet length at stage `i`.
    pub fn short_width(&self, i: usize) -> usize {
        i * (self.m + self.sigma)
    }
}

/// Secret symbols shared ahead of time, drawn independently of the message.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SharedSecret<F> {
    /// Per stage: parity points `d^(k)` and hash targets `h^(k)`.
    stages: Vec<(Vec<F>, Vec<F>)>,
}

impl<F: Field> SharedSecret<F> {
    pub fn new() -> Self {
        SharedSecret { stages: Vec::new() }
    }

    /// Draws the symbols of every stage up to `i` not drawn yet.
    pub fn extend_to<R: Rng + ?Sized>(&mut self, params: &RsParams, i: usize, rng: &mut R) {
        while self.stages.len() < i {
            let alpha = params.alpha(self.stages.len() + 1);
            let d = (0..alpha).map(|_| F::random(rng)).collect();
            let h = (0..alpha).map(|_| F::random(rng)).collect();
            self.stages.push((d, h));
        }
    }

    pub fn stages(&self) -> usize {
        self.stages.len()
    }

    pub fn points(&self, k: usize) -> &[F] {
        &self.stages[k - 1].0
    }

    pub fn targets(&self, k: usize) -> &[F] {
        &self.stages[k - 1].1
    }

    /// Symbols (points plus targets) used by stages `1..=i`.
    pub fn symbols_through(&self, i: usize) -> usize {
        self.stages[..i].iter().map(|(d, h)| d.len() + h.len()).sum()
    }

    /// `alpha_k x nb` parity matrix with entry `(p, j) = d_p^(j+1)`.
    pub fn parity_matrix(&self, k: usize, nb: usize) -> Matrix<F> {
        let d = self.points(k);
        let mut out = Matrix::zeros(d.len(), nb);
        for (p, &x) in d.iter().enumerate() {
            let mut acc = F::ONE;
            for j in 0..nb {
                acc *= x;
                out[(p, j)] = acc;
            }
        }
        out
    }
}

/// The stage-`k` suffix and its row block of `L^(i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixBlock<F> {
    pub k: usize,
    /// `l_k = h_k - D_k w`.
    pub ell: Vec<F>,
    /// `l_k` reshaped column-major to `sigma x k m`.
    pub script_l: Matrix<F>,
}

impl<F: Field> SuffixBlock<F> {
    /// Row block `L_k` laid out for stage `i >= k`: width `i (m + sigma)`.
    pub fn row_block(&self, params: &RsParams, i: usize) -> Matrix<F> {
        let (s, m) = (params.sigma, params.m);
        let mut out = Matrix::zeros(s, params.short_width(i));
        out.set_block(0, 0, &self.script_l);
        out.set_block(0, i * m + (self.k - 1) * s, &Matrix::identity(s));
        out
    }
}

/// Solves the stage-`k` suffix for the column-stacked message `w`.
pub fn make_suffix<F: Field>(
    w: &[F],
    secret: &SharedSecret<F>,
    params: &RsParams,
    k: usize,
) -> Result<SuffixBlock<F>, SchemeError> {
    let nb = params.n * params.b;
    if w.len() != nb || k == 0 || secret.stages() < k {
        return Err(SchemeError::InvalidParams(format!(
            "suffix for stage {k} needs |w| = {nb} and {k} secret stages"
        )));
    }
    let d = secret.parity_matrix(k, nb);
    let dw = d.mul(&Matrix::column_vector(w.to_vec()))?;
    let ell: Vec<F> = secret
        .targets(k)
        .iter()
        .zip(dw.data())
        .map(|(&h, &x)| h - x)
        .collect();
    let script_l = Matrix::devectorize(&ell, params.sigma, k * params.m)?;
    Ok(SuffixBlock { k, ell, script_l })
}

/// Position bookkeeping of the stage-`i` staircase `L^(i)`.
///
/// Column `c < i m` of `L^(i)` holds data in row blocks `k > c / m` and
/// dummy zeros in the earlier blocks; the last `i sigma` columns hold the
/// identity headers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaircaseLayout {
    pub stage: usize,
    pub sigma: usize,
    pub m: usize,
}

impl StaircaseLayout {
    pub fn new(params: &RsParams, stage: usize) -> Self {
        StaircaseLayout {
            stage,
            sigma: params.sigma,
            m: params.m,
        }
    }

    pub fn rows(&self) -> usize {
        self.stage * self.sigma
    }

    pub fn width(&self) -> usize {
        self.stage * (self.m + self.sigma)
    }

    /// Columns carrying suffix data (`i m`).
    pub fn data_cols(&self) -> usize {
        self.stage * self.m
    }

    /// First non-dummy row of data column `c`.
    pub fn first_live_row(&self, c: usize) -> usize {
        (c / self.m) * self.sigma
    }

    pub fn is_dummy(&self, row: usize, col: usize) -> bool {
        col < self.data_cols() && row < self.first_live_row(col)
    }

    /// Number of non-dummy data entries: `sigma m i (i + 1) / 2`.
    pub fn live_entries(&self) -> usize {
        (0..self.data_cols())
            .map(|c| self.rows() - self.first_live_row(c))
            .sum()
    }

    /// Places the stage-`k` short observation block (width `k (m + sigma)`)
    /// into the stage-`i` staircase width, padding with dummy zeros.
    pub fn pad_block<F: Field>(&self, k: usize, block: &Matrix<F>) -> Matrix<F> {
        let (km, ks) = (k * self.m, k * self.sigma);
        let mut out = Matrix::zeros(block.rows(), self.width());
        out.set_block(0, 0, &block.block(0, 0, block.rows(), km));
        out.set_block(0, self.data_cols(), &block.block(0, km, block.rows(), ks));
        out
    }
}

/// `L^(i)` built from the suffix blocks of stages `1..=i`.
pub fn suffix_staircase<F: Field>(blocks: &[SuffixBlock<F>], params: &RsParams) -> Matrix<F> {
    let i = blocks.len();
    let parts: Vec<Matrix<F>> = blocks.iter().map(|b| b.row_block(params, i)).collect();
    Matrix::vstack(&parts.iter().collect::<Vec<_>>()).expect("equal widths")
}

/// Encodes stage `i`: long packets `K_i X_0` and short packets `G_i L^(i)`.
#[allow(clippy::too_many_arguments)]
pub fn encode_stage<F: Field, R: Rng + ?Sized>(
    msg: &SourceMessage<F>,
    secret: &SharedSecret<F>,
    params: &RsParams,
    stage: usize,
    c_i: usize,
    c_short: usize,
    rng: &mut R,
) -> Result<(Matrix<F>, Matrix<F>), SchemeError> {
    params.validate::<F>()?;
    if msg.b() != params.b || msg.n() != params.n {
        return Err(SchemeError::InvalidParams(format!(
            "message is {}x{} but parameters say {}x{}",
            msg.b(),
            msg.n(),
            params.b,
            params.n
        )));
    }
    if stage == 0 || c_i == 0 || c_short == 0 {
        return Err(SchemeError::InvalidParams(
            "stage, c_i and the short opportunity count must be positive".into(),
        ));
    }
    let w = msg.w().vectorize().into_data();
    let blocks = (1..=stage)
        .map(|k| make_suffix(&w, secret, params, k))
        .collect::<Result<Vec<_>, _>>()?;
    let l = suffix_staircase(&blocks, params);
    let x = Matrix::random(c_i, params.b, rng).mul(msg.x0())?;
    let a = Matrix::random(c_short, stage * params.sigma, rng).mul(&l)?;
    Ok((x, a))
}

/// Column-basis expansion of a full-row-rank observation matrix.
///
/// The basis is `[T'' | T_hat]` where `T_hat` are the last `header`
/// columns and `T''` further columns picked greedily. In the permuted
/// column order `chosen ++ rest ++ header`, the observations equal
/// `[T'' T_hat] [[I, f_top, 0], [0, f_bot, I]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisExpansion<F> {
    pub rank: usize,
    pub header: usize,
    /// Indices of the `T''` columns, in basis order.
    pub chosen: Vec<usize>,
    /// Remaining non-header columns, in order.
    pub rest: Vec<usize>,
    pub t_pp: Matrix<F>,
    pub t_hat: Matrix<F>,
    /// `F^Z` (long) or `F^E` (short): `(rank - header) x rest.len()`.
    pub f_top: Matrix<F>,
    /// `F^X` (long) or `F^A` (short): `header x rest.len()`.
    pub f_bot: Matrix<F>,
}

impl<F: Field> BasisExpansion<F> {
    /// Recomputes the observations from the expansion, in original column
    /// order.
    pub fn reconstruct(&self) -> Matrix<F> {
        let r = self.rank;
        let width = self.chosen.len() + self.rest.len() + self.header;
        let basis = Matrix::hstack(&[&self.t_pp, &self.t_hat]).expect("same rows");
        let coeff = Matrix::vstack(&[&self.f_top, &self.f_bot]).expect("same cols");
        let rest_cols = basis.mul(&coeff).expect("conformable");
        let mut out = Matrix::zeros(r, width);
        for (t, &c) in self.chosen.iter().enumerate() {
            for row in 0..r {
                out[(row, c)] = self.t_pp[(row, t)];
            }
        }
        for (u, &c) in self.rest.iter().enumerate() {
            for row in 0..r {
                out[(row, c)] = rest_cols[(row, u)];
            }
        }
        out.set_block(0, width - self.header, &self.t_hat);
        out
    }
}

/// Independent rows of `m`, in order of first appearance.
pub fn independent_rows<F: Field>(m: &Matrix<F>) -> Matrix<F> {
    let mut basis = RowBasis::new(m.cols());
    for r in 0..m.rows() {
        basis.insert(m.row(r));
    }
    basis.to_matrix()
}

/// Expands `y` (full row rank) over a basis made of its last `header`
/// columns plus columns taken greedily from `candidates`. Returns `None`
/// when the header columns are dependent or no basis can be completed.
pub fn extract_basis<F: Field>(
    y: &Matrix<F>,
    header: usize,
    candidates: &[usize],
) -> Result<Option<BasisExpansion<F>>, SchemeError> {
    let (r, width) = y.shape();
    if r < header || header > width {
        return Ok(None);
    }
    let head_start = width - header;
    let mut cols = RowBasis::new(r);
    for c in head_start..width {
        if !cols.insert(&y.column(c)) {
            return Ok(None);
        }
    }
    let mut chosen = Vec::with_capacity(r - header);
    for &c in candidates {
        if cols.rank() == r {
            break;
        }
        if cols.insert(&y.column(c)) {
            chosen.push(c);
        }
    }
    if cols.rank() < r {
        return Ok(None);
    }
    let rest: Vec<usize> = (0..head_start).filter(|c| !chosen.contains(c)).collect();
    let t_pp = y.select_cols(&chosen);
    let t_hat = y.block(0, head_start, r, header);
    let basis = Matrix::hstack(&[&t_pp, &t_hat])?;
    let f = match solve_linear(&basis, &y.select_cols(&rest))? {
        SolveOutcome::Unique(f) => f,
        _ => return Ok(None),
    };
    let split = r - header;
    Ok(Some(BasisExpansion {
        rank: r,
        header,
        f_top: f.block(0, 0, split, rest.len()),
        f_bot: f.block(split, 0, header, rest.len()),
        chosen,
        rest,
        t_pp,
        t_hat,
    }))
}

/// The assembled key equation `B v = rhs` with the position map of the
/// unknowns `v = (x_a, x_b, l_a, l_b)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyEquation<F> {
    pub b_mat: Matrix<F>,
    pub rhs: Matrix<F>,
    /// Rows contributed by the long, short and parity blocks.
    pub block_rows: (usize, usize, usize),
    /// `x_index[col * b + row]` = position of `W[row, col]` in `v`.
    pub x_index: Vec<usize>,
    /// Position of non-dummy `L^(i)[row, col]` in `v`, indexed
    /// `row * data_cols + col`.
    pub l_index: Vec<Option<usize>>,
    pub layout: StaircaseLayout,
}

impl<F: Field> KeyEquation<F> {
    /// Unknown vector of a candidate message and staircase.
    pub fn unknowns(&self, w: &Matrix<F>, l: &Matrix<F>) -> Matrix<F> {
        let mut v = vec![F::ZERO; self.b_mat.cols()];
        let b = w.rows();
        for col in 0..w.cols() {
            for row in 0..b {
                v[self.x_index[col * b + row]] = w[(row, col)];
            }
        }
        let dc = self.layout.data_cols();
        for (pos, idx) in self.l_index.iter().enumerate() {
            if let Some(idx) = idx {
                v[*idx] = l[(pos / dc, pos % dc)];
            }
        }
        Matrix::column_vector(v)
    }

    pub fn satisfied_by(&self, v: &Matrix<F>) -> bool {
        self.b_mat.mul(v).map(|bv| bv == self.rhs).unwrap_or(false)
    }

    /// Reads `W` back out of a solution vector.
    pub fn message(&self, v: &Matrix<F>, b: usize, n: usize) -> Matrix<F> {
        Matrix::from_fn(b, n, |row, col| v[(self.x_index[col * b + row], 0)])
    }
}

/// Builds the key equation from both basis expansions and the secret.
pub fn build_key_equation<F: Field>(
    long: &BasisExpansion<F>,
    short: &BasisExpansion<F>,
    secret: &SharedSecret<F>,
    params: &RsParams,
    stage: usize,
) -> Result<KeyEquation<F>, SchemeError> {
    let (b, n) = (params.b, params.n);
    let nb = n * b;
    let layout = StaircaseLayout::new(params, stage);
    let dc = layout.data_cols();
    if long.header != b
        || long.chosen.len() + long.rest.len() != n
        || short.header != layout.rows()
        || short.chosen.len() + short.rest.len() != dc
        || secret.stages() < stage
    {
        return Err(SchemeError::InvalidParams(
            "basis expansions do not match the stage layout".into(),
        ));
    }

    let mut x_index = vec![0; nb];
    for (pos, &col) in long.chosen.iter().chain(&long.rest).enumerate() {
        for row in 0..b {
            x_index[col * b + row] = pos * b + row;
        }
    }
    let mut l_index = vec![None; layout.rows() * dc];
    let mut next = nb;
    for &col in short.chosen.iter().chain(&short.rest) {
        for row in layout.first_live_row(col)..layout.rows() {
            l_index[row * dc + col] = Some(next);
            next += 1;
        }
    }
    let unknowns = next;

    let (r, rb) = (long.rank, short.rank);
    let top_rows = long.rest.len() * r;
    let mid_rows = short.rest.len() * rb;
    let bot_rows: usize = (1..=stage).map(|k| params.alpha(k)).sum();
    let mut bm = Matrix::zeros(top_rows + mid_rows + bot_rows, unknowns);
    let mut rhs = Matrix::zeros(bm.rows(), 1);

    // Long expansion: T_hat (x_rest_u - X_chosen f^Z_u) = T_hat f^X_u.
    let t_hat = &long.t_hat;
    let rhs_top = t_hat.mul(&long.f_bot)?;
    for u in 0..long.rest.len() {
        let base = u * r;
        let mut put = |col: usize, coeff: F| {
            if coeff.is_zero() {
                return;
            }
            for row in 0..b {
                let v = x_index[col * b + row];
                for i in 0..r {
                    bm[(base + i, v)] += coeff * t_hat[(i, row)];
                }
            }
        };
        for (t, &col) in long.chosen.iter().enumerate() {
            put(col, -long.f_top[(t, u)]);
        }
        put(long.rest[u], F::ONE);
        for i in 0..r {
            rhs[(base + i, 0)] = rhs_top[(i, u)];
        }
    }

    // Short expansion, same pattern; dummy rows are known zeros and have
    // no column.
    let tb_hat = &short.t_hat;
    let rhs_mid = tb_hat.mul(&short.f_bot)?;
    for u in 0..short.rest.len() {
        let base = top_rows + u * rb;
        let mut put = |col: usize, coeff: F| {
            if coeff.is_zero() {
                return;
            }
            for row in layout.first_live_row(col)..layout.rows() {
                let v = l_index[row * dc + col].expect("live entry");
                for i in 0..rb {
                    bm[(base + i, v)] += coeff * tb_hat[(i, row)];
                }
            }
        };
        for (t, &col) in short.chosen.iter().enumerate() {
            put(col, -short.f_top[(t, u)]);
        }
        put(short.rest[u], F::ONE);
        for i in 0..rb {
            rhs[(base + i, 0)] = rhs_mid[(i, u)];
        }
    }

    // Parity rows: D_k w + l_k = h_k.
    let s = params.sigma;
    let mut row = top_rows + mid_rows;
    for k in 1..=stage {
        let d = secret.parity_matrix(k, nb);
        for (p, &h) in secret.targets(k).iter().enumerate() {
            for j in 0..nb {
                bm[(row, x_index[j])] = d[(p, j)];
            }
            let (lr, lc) = ((k - 1) * s + p % s, p / s);
            let v = l_index[lr * dc + lc].expect("suffix entries are live");
            bm[(row, v)] = F::ONE;
            rhs[(row, 0)] = h;
            row += 1;
        }
    }

    Ok(KeyEquation {
        b_mat: bm,
        rhs,
        block_rows: (top_rows, mid_rows, bot_rows),
        x_index,
        l_index,
        layout,
    })
}

/// Everything the sink has received.
#[derive(Debug, Clone)]
pub struct RsSinkState<F> {
    params: RsParams,
    y: Matrix<F>,
    short_blocks: Vec<Matrix<F>>,
}

/// Intermediate products of one decoding attempt.
#[derive(Debug, Clone)]
pub struct RsAttempt<F> {
    pub status: DecodeStatus<F>,
    pub long: Option<BasisExpansion<F>>,
    pub short: Option<BasisExpansion<F>>,
    pub key: Option<KeyEquation<F>>,
    /// Independent long and short rows the expansions were taken over.
    pub long_rows: Matrix<F>,
    pub short_rows: Matrix<F>,
}

impl<F: Field> RsSinkState<F> {
    pub fn new(params: RsParams) -> Self {
        RsSinkState {
            y: Matrix::zeros(0, params.n + params.b),
            params,
            short_blocks: Vec::new(),
        }
    }

    pub fn stage(&self) -> usize {
        self.short_blocks.len()
    }

    /// Stacked long observations `Y^(i)`.
    pub fn y(&self) -> &Matrix<F> {
        &self.y
    }

    pub fn ingest(&mut self, y_i: &Matrix<F>, j_i: &Matrix<F>) -> Result<(), SchemeError> {
        let k = self.stage() + 1;
        if y_i.cols() != self.params.n + self.params.b || j_i.cols() != self.params.short_width(k)
        {
            return Err(SchemeError::InvalidParams(format!(
                "stage {k} packets have widths {} and {}",
                y_i.cols(),
                j_i.cols()
            )));
        }
        self.y = Matrix::vstack(&[&self.y, y_i])?;
        self.short_blocks.push(j_i.clone());
        Ok(())
    }

    /// Stacked short observations `J^(i)` with dummy padding.
    pub fn j_staircase(&self) -> Matrix<F> {
        let layout = StaircaseLayout::new(&self.params, self.stage());
        let parts: Vec<Matrix<F>> = self
            .short_blocks
            .iter()
            .enumerate()
            .map(|(k, blk)| layout.pad_block(k + 1, blk))
            .collect();
        Matrix::vstack(&parts.iter().collect::<Vec<_>>())
            .unwrap_or_else(|_| Matrix::zeros(0, layout.width()))
    }

    pub fn try_decode(&self, secret: &SharedSecret<F>) -> Result<DecodeStatus<F>, SchemeError> {
        Ok(self.attempt(secret, None)?.status)
    }

    /// Runs a decoding attempt and keeps its intermediate products.
    /// `long_order` overrides the left-to-right candidate order of the long
    /// basis selection.
    pub fn attempt(
        &self,
        secret: &SharedSecret<F>,
        long_order: Option<&[usize]>,
    ) -> Result<RsAttempt<F>, SchemeError> {
        let p = &self.params;
        let i = self.stage();
        let layout = StaircaseLayout::new(p, i);
        let long_rows = independent_rows(&self.y);
        let short_rows = independent_rows(&self.j_staircase());
        let mut out = RsAttempt {
            status: DecodeStatus::NeedMore,
            long: None,
            short: None,
            key: None,
            long_rows,
            short_rows,
        };
        if i == 0 || out.long_rows.rows() < p.b || out.short_rows.rows() < layout.rows() {
            return Ok(out);
        }
        let default_order: Vec<usize> = (0..p.n).collect();
        let long = extract_basis(&out.long_rows, p.b, long_order.unwrap_or(&default_order))?;
        let short_order: Vec<usize> = (0..layout.data_cols()).collect();
        let short = extract_basis(&out.short_rows, layout.rows(), &short_order)?;
        let (Some(long), Some(short)) = (long, short) else {
            return Ok(out);
        };
        let key = build_key_equation(&long, &short, secret, p, i)?;
        out.status = match solve_linear(&key.b_mat, &key.rhs)? {
            SolveOutcome::Unique(v) => DecodeStatus::Decoded(key.message(&v, p.b, p.n)),
            SolveOutcome::NoSolution => DecodeStatus::NeedMore,
            SolveOutcome::Multiple { .. } => DecodeStatus::Failure,
        };
        out.long = Some(long);
        out.short = Some(short);
        out.key = Some(key);
        Ok(out)
    }
}

/// Runs one session. Long and short packets cross separate channel
/// instances with their own schedules; only long packets count toward the
/// rate.
#[allow(clippy::too_many_arguments)]
pub fn run_session<F, C, R>(
    msg: &SourceMessage<F>,
    params: &RsParams,
    long_schedule: &[StageParams],
    short_schedule: &[StageParams],
    long_channel: &C,
    short_channel: &C,
    trial: u64,
    rng: &mut R,
) -> Result<SessionReport, SchemeError>
where
    F: Field,
    C: Channel<F>,
    R: Rng + ?Sized,
{
    let stages = long_schedule.len().min(short_schedule.len());
    let mut secret = SharedSecret::new();
    let mut state = RsSinkState::new(*params);
    let mut record = TrialRecord::new(trial);
    let mut audit = Audit::default();
    let w_vec = msg.w().vectorize().into_data();
    let (mut sum_m, mut sum_z) = (0, 0);
    let (mut sum_ms, mut sum_zs) = (0, 0);
    for idx in 0..stages {
        let i = idx + 1;
        let (lp, sp) = (&long_schedule[idx], &short_schedule[idx]);
        secret.extend_to(params, i, rng);
        let (x, a) = encode_stage(msg, &secret, params, i, lp.opportunities, sp.opportunities, rng)?;
        let out_long = long_channel.transmit(lp, &x, params.b, rng)?;
        let out_short = short_channel.transmit(sp, &a, i * params.sigma, rng)?;
        state.ingest(&out_long.y, &out_short.y)?;

        let z = if long_channel.adversary_active() { lp.adversary } else { 0 };
        let zs = if short_channel.adversary_active() { sp.adversary } else { 0 };
        sum_m += lp.capacity;
        sum_z += z;
        sum_ms += sp.capacity;
        sum_zs += zs;
        record.stage_trace.push((lp.capacity, z));

        audit.check("Y = T X + Q Z", i, out_long.decomposes(&x));
        audit.check("J = T A + Q E", i, out_short.decomposes(&a));
        let blocks = (1..=i)
            .map(|k| make_suffix(&w_vec, &secret, params, k))
            .collect::<Result<Vec<_>, _>>()?;
        audit.check("parity staircase", i, parity_staircase_holds(&w_vec, &blocks, &secret, params));

        let attempt = state.attempt(&secret, None)?;
        if let Some(long) = &attempt.long {
            audit.check("long basis expansion", i, long.reconstruct() == attempt.long_rows);
        }
        if let Some(short) = &attempt.short {
            audit.check("short basis expansion", i, short.reconstruct() == attempt.short_rows);
        }
        let cutset = params.b + sum_z <= sum_m && i * params.sigma + sum_zs <= sum_ms;
        if let (Some(key), true) = (&attempt.key, cutset) {
            let l = suffix_staircase(&blocks, params);
            audit.check("key equation holds for the true message", i, key.satisfied_by(&key.unknowns(msg.w(), &l)));
        }

        let status = attempt.status;
        record.statuses.push(status.kind());
        let correct = matches!(&status, DecodeStatus::Decoded(w) if w == msg.w());
        if record.finish(status.kind(), params.b, correct) {
            break;
        }
    }
    record.stages = record.statuses.len();
    Ok(SessionReport { record, audit })
}

/// Checks `D_k w + l_k = h_k` for every stage, as one stacked identity.
pub fn parity_staircase_holds<F: Field>(
    w: &[F],
    blocks: &[SuffixBlock<F>],
    secret: &SharedSecret<F>,
    params: &RsParams,
) -> bool {
    let nb = w.len();
    let wv = Matrix::column_vector(w.to_vec());
    blocks.iter().all(|blk| {
        let Ok(dw) = secret.parity_matrix(blk.k, nb).mul(&wv) else {
            return false;
        };
        blk.ell.len() == params.alpha(blk.k)
            && dw
                .data()
                .iter()
                .zip(&blk.ell)
                .zip(secret.targets(blk.k))
                .all(|((&x, &l), &h)| x + l == h)
    })
}
