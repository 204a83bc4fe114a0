//! One stage of adversarial random linear network coding.
//!
//! The sink observes `Y = T X + Q Z`, where `X` holds the source packets,
//! `Z` the packets injected by the adversary, and `T`, `Q` are the transfer
//! matrices induced by random coding at the intermediate nodes. The default
//! [`MatrixChannel`] draws `T` and `Q` directly; [`HypergraphChannel`]
//! derives them by running random linear coding over an explicit topology.

mod hypergraph;

pub use hypergraph::{hypergraph_transfer, Hypergraph, HypergraphChannel, NodeRole};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::Field;
use crate::linalg::{LinalgError, Matrix};

/// Resampling cap for drawing a full-rank transfer matrix.
pub const TRANSFER_RETRY_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("invalid stage parameters: {0}")]
    InvalidParams(String),
    #[error("no rank-{rank} transfer matrix after {attempts} draws")]
    RankCapExceeded { rank: usize, attempts: usize },
    #[error("topology line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("sink is not reachable from the source")]
    DisconnectedSink,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Per-stage network parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StageParams {
    /// Min cut from source to sink (`M`).
    pub capacity: usize,
    /// Min cut from the adversary to the sink (`z`).
    pub adversary: usize,
    /// Transmission opportunities at the source (`c`).
    pub opportunities: usize,
}

impl StageParams {
    pub fn new(capacity: usize, adversary: usize, opportunities: usize) -> Self {
        StageParams {
            capacity,
            adversary,
            opportunities,
        }
    }

    /// Checks `z < M <= c <= c_bar`.
    pub fn validate(&self, c_bar: usize) -> Result<(), ChannelError> {
        if self.adversary >= self.capacity {
            return Err(ChannelError::InvalidParams(format!(
                "z_i < M_i violated (z = {}, M = {})",
                self.adversary, self.capacity
            )));
        }
        if self.capacity > self.opportunities {
            return Err(ChannelError::InvalidParams(format!(
                "M_i <= c_i violated (M = {}, c = {})",
                self.capacity, self.opportunities
            )));
        }
        if self.opportunities > c_bar {
            return Err(ChannelError::InvalidParams(format!(
                "c_i <= c_bar violated (c = {}, c_bar = {})",
                self.opportunities, c_bar
            )));
        }
        Ok(())
    }
}

/// How the adversary builds its injected packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryStrategy {
    /// No injection; the stage behaves as if `z = 0`.
    None,
    /// Every injected symbol is uniform.
    #[default]
    UniformRandom,
    /// Each injected packet is a random combination of the observed honest
    /// packets with a random nonzero offset on the payload columns. The
    /// trailing coefficient-header columns stay consistent with an honest
    /// combination, so the packet looks like legitimate coded traffic.
    AdditiveTargeted,
}

impl AdversaryStrategy {
    pub fn is_active(self) -> bool {
        self != AdversaryStrategy::None
    }
}

/// The sink's view of one stage, with the ground truth that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageOutcome<F> {
    /// Received packets.
    pub y: Matrix<F>,
    /// Source-to-sink transfer matrix.
    pub t: Matrix<F>,
    /// Adversary-to-sink transfer matrix.
    pub q: Matrix<F>,
    /// Injected packets.
    pub z: Matrix<F>,
}

impl<F: Field> StageOutcome<F> {
    /// Checks `Y - T X - Q Z = 0`.
    pub fn decomposes(&self, x: &Matrix<F>) -> bool {
        let honest = match self.t.mul(x) {
            Ok(m) => m,
            Err(_) => return false,
        };
        let injected = match self.q.mul(&self.z) {
            Ok(m) => m,
            Err(_) => return false,
        };
        honest.add(&injected).map(|s| s == self.y).unwrap_or(false)
    }
}

/// Draws `T` (`M x c`, forced to rank `M`) and `Q` (`M x z`, uniform).
pub fn sample_transfer<F: Field, R: Rng + ?Sized>(
    params: &StageParams,
    rng: &mut R,
) -> Result<(Matrix<F>, Matrix<F>), ChannelError> {
    let (m, c) = (params.capacity, params.opportunities);
    if m > c {
        return Err(ChannelError::InvalidParams(format!(
            "M_i <= c_i violated (M = {m}, c = {c})"
        )));
    }
    let mut t = None;
    for _ in 0..TRANSFER_RETRY_CAP {
        let candidate = Matrix::random(m, c, rng);
        if candidate.rank() == m {
            t = Some(candidate);
            break;
        }
    }
    let t = t.ok_or(ChannelError::RankCapExceeded {
        rank: m,
        attempts: TRANSFER_RETRY_CAP,
    })?;
    let q = Matrix::random(m, params.adversary, rng);
    Ok((t, q))
}

/// Builds the adversary's `z x packet_len` injection.
///
/// `header` is the number of trailing columns that carry coding
/// coefficients; only [`AdversaryStrategy::AdditiveTargeted`] uses it.
/// `observed` are the honest packets the adversary can overhear.
pub fn make_errors<F: Field, R: Rng + ?Sized>(
    strategy: AdversaryStrategy,
    z: usize,
    packet_len: usize,
    header: usize,
    observed: Option<&Matrix<F>>,
    rng: &mut R,
) -> Matrix<F> {
    match strategy {
        AdversaryStrategy::None => Matrix::zeros(0, packet_len),
        AdversaryStrategy::UniformRandom => Matrix::random(z, packet_len, rng),
        AdversaryStrategy::AdditiveTargeted => {
            let payload = packet_len.saturating_sub(header);
            let mut out = Matrix::zeros(z, packet_len);
            for r in 0..z {
                if let Some(obs) = observed.filter(|o| o.rows() > 0 && o.cols() == packet_len) {
                    let mix = Matrix::random(1, obs.rows(), rng);
                    let base = mix.mul(obs).expect("conformable");
                    out.row_mut(r).copy_from_slice(base.row(0));
                }
                if payload == 0 {
                    continue;
                }
                let offset = loop {
                    let v: Vec<F> = (0..payload).map(|_| F::random(rng)).collect();
                    if v.iter().any(|x| !x.is_zero()) {
                        break v;
                    }
                };
                for (dst, o) in out.row_mut(r)[..payload].iter_mut().zip(offset) {
                    *dst += o;
                }
            }
            out
        }
    }
}

/// A network that carries one stage of packets to the sink.
pub trait Channel<F: Field> {
    /// Sends the rows of `x` through the network for one stage. `header`
    /// is the count of trailing coefficient columns of each packet.
    fn transmit<R: Rng + ?Sized>(
        &self,
        params: &StageParams,
        x: &Matrix<F>,
        header: usize,
        rng: &mut R,
    ) -> Result<StageOutcome<F>, ChannelError>;

    /// Whether injected packets reach the sink at all.
    fn adversary_active(&self) -> bool;
}

/// Transfer-matrix-level channel: `T` and `Q` are drawn directly.
#[derive(Debug, Clone, Copy)]
pub struct MatrixChannel {
    pub strategy: AdversaryStrategy,
}

impl MatrixChannel {
    pub fn new(strategy: AdversaryStrategy) -> Self {
        MatrixChannel { strategy }
    }
}

impl<F: Field> Channel<F> for MatrixChannel {
    fn adversary_active(&self) -> bool {
        self.strategy.is_active()
    }

    fn transmit<R: Rng + ?Sized>(
        &self,
        params: &StageParams,
        x: &Matrix<F>,
        header: usize,
        rng: &mut R,
    ) -> Result<StageOutcome<F>, ChannelError> {
        if x.rows() != params.opportunities {
            return Err(ChannelError::InvalidParams(format!(
                "source sent {} packets but c_i = {}",
                x.rows(),
                params.opportunities
            )));
        }
        let effective = StageParams {
            adversary: if self.strategy.is_active() {
                params.adversary
            } else {
                0
            },
            ..*params
        };
        let (t, q) = sample_transfer(&effective, rng)?;
        let z = make_errors(self.strategy, effective.adversary, x.cols(), header, Some(x), rng);
        let y = t.mul(x)?.add(&q.mul(&z)?)?;
        Ok(StageOutcome { y, t, q, z })
    }
}
