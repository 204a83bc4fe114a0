//! Records shared by the session loops of both schemes.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ChannelError;
use crate::linalg::{LinalgError, Matrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemeError {
    #[error("invalid scheme parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Result of one decoding attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeStatus<F> {
    /// The unique message consistent with everything observed so far.
    Decoded(Matrix<F>),
    /// Observations are inconsistent with every candidate; wait for more.
    NeedMore,
    /// Consistent but ambiguous, or the recovered header is corrupt.
    Failure,
}

impl<F> DecodeStatus<F> {
    pub fn kind(&self) -> StageStatus {
        match self {
            DecodeStatus::Decoded(_) => StageStatus::Decoded,
            DecodeStatus::NeedMore => StageStatus::NeedMore,
            DecodeStatus::Failure => StageStatus::Failure,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageStatus {
    Decoded,
    NeedMore,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Decoded,
    Failure,
    /// Stage cap reached without a decision.
    Exhausted,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Decoded => "decoded",
            Outcome::Failure => "failure",
            Outcome::Exhausted => "exhausted",
        })
    }
}

/// One session's result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// Stages used (`N`).
    pub stages: usize,
    pub outcome: Outcome,
    /// Decoded message equals the transmitted one. Always false unless
    /// `outcome` is `Decoded`.
    pub correct: bool,
    /// `b / N` for decoded trials, 0 otherwise.
    pub rate: f64,
    /// `(M, z)` per stage as seen on the message-carrying packets.
    pub stage_trace: Vec<(usize, usize)>,
    /// Decoder verdict after each stage.
    pub statuses: Vec<StageStatus>,
}

impl TrialRecord {
    pub(crate) fn new(trial: u64) -> Self {
        TrialRecord {
            trial,
            stages: 0,
            outcome: Outcome::Exhausted,
            correct: false,
            rate: 0.0,
            stage_trace: Vec::new(),
            statuses: Vec::new(),
        }
    }

    pub(crate) fn finish(&mut self, status: StageStatus, b: usize, correct: bool) -> bool {
        self.stages = self.statuses.len();
        match status {
            StageStatus::Decoded => {
                self.outcome = Outcome::Decoded;
                self.correct = correct;
                self.rate = b as f64 / self.stages as f64;
                true
            }
            StageStatus::Failure => {
                self.outcome = Outcome::Failure;
                true
            }
            StageStatus::NeedMore => false,
        }
    }

    /// Trace as `M:z;M:z;...`.
    pub fn format_trace(&self) -> String {
        self.stage_trace
            .iter()
            .map(|(m, z)| format!("{m}:{z}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// First stage `i` with `b + sum z <= sum M`, if the trace reaches one.
    pub fn cutset_stage(&self, b: usize) -> Option<usize> {
        let (mut sm, mut sz) = (0, 0);
        for (i, &(m, z)) in self.stage_trace.iter().enumerate() {
            sm += m;
            sz += z;
            if b + sz <= sm {
                return Some(i + 1);
            }
        }
        None
    }

    pub fn silent_corruption(&self) -> bool {
        self.outcome == Outcome::Decoded && !self.correct
    }
}

/// Exact identity checks collected while a session runs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Audit {
    pub checks: u64,
    pub violations: Vec<String>,
}

impl Audit {
    pub fn check(&mut self, what: &str, stage: usize, ok: bool) {
        self.checks += 1;
        if !ok {
            self.violations.push(format!("stage {stage}: {what}"));
        }
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn merge(&mut self, other: &Audit) {
        self.checks += other.checks;
        self.violations.extend(other.violations.iter().cloned());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub record: TrialRecord,
    pub audit: Audit,
}
