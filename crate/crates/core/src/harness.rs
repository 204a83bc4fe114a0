//! Experiment driver: configuration loading, Monte Carlo trials over either
//! scheme, and CSV/JSON output.
//!
//! A configuration is a TOML document:
//!
//! ```toml
//! scheme = "sc"            # or "rs"
//! field = "gf2_16"
//! b = 4
//! n = 32
//! trials = 200
//! seed = 7
//!
//! [long]
//! model = "fixed"          # or "iid"
//! M = [3, 3, 3]
//! z = [1, 1, 1]
//! ```
//!
//! With `model = "iid"` the lists are the supports of independent discrete
//! distributions, optionally weighted by `M_probs`, `z_probs`, `c_probs`.
//! When `c` is omitted the source has exactly `M` opportunities.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{
    AdversaryStrategy, Channel, ChannelError, Hypergraph, HypergraphChannel, MatrixChannel,
    StageOutcome, StageParams,
};
use crate::field::{Field, FieldSpec, Fp251, Fp65521, Fp7, Gf256, Gf65536};
use crate::linalg::Matrix;
use crate::scheme_rs::{self, RsParams};
use crate::scheme_sc::{self, ScOptions, SourceMessage};
use crate::session::{Audit, Outcome, SchemeError, SessionReport};

pub use crate::session::TrialRecord;

pub const DEFAULT_STAGE_CAP: usize = 64;
const MAX_REPORTED_VIOLATIONS: usize = 20;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config rejected: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Config(_))
    }
}

fn reject<T>(msg: impl Into<String>) -> Result<T, HarnessError> {
    Err(HarnessError::Config(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    #[serde(rename = "sc", alias = "secret-channel")]
    SecretChannel,
    #[serde(rename = "rs", alias = "random-secret")]
    RandomSecret,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::SecretChannel => "sc",
            SchemeKind::RandomSecret => "rs",
        }
    }
}

impl FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sc" | "secret-channel" => Ok(SchemeKind::SecretChannel),
            "rs" | "random-secret" => Ok(SchemeKind::RandomSecret),
            other => Err(format!("unknown scheme `{other}` (expected sc or rs)")),
        }
    }
}

/// Finite distribution over nonnegative integers.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrete {
    pub values: Vec<usize>,
    pub probs: Vec<f64>,
    index: WeightedIndex<f64>,
}

impl Discrete {
    pub fn new(values: Vec<usize>, probs: Option<Vec<f64>>) -> Result<Self, String> {
        if values.is_empty() {
            return Err("empty support".into());
        }
        let probs = probs.unwrap_or_else(|| vec![1.0 / values.len() as f64; values.len()]);
        if probs.len() != values.len() {
            return Err(format!(
                "{} probabilities for {} values",
                probs.len(),
                values.len()
            ));
        }
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err("probabilities must be nonnegative and sum to 1".into());
        }
        let index = WeightedIndex::new(&probs).map_err(|e| e.to_string())?;
        Ok(Discrete {
            values,
            probs,
            index,
        })
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(&v, &p)| v as f64 * p)
            .sum()
    }

    /// Smallest value with positive probability.
    pub fn min(&self) -> usize {
        self.support().min().unwrap_or(0)
    }

    pub fn max(&self) -> usize {
        self.support().max().unwrap_or(0)
    }

    fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.values
            .iter()
            .zip(&self.probs)
            .filter(|(_, &p)| p > 0.0)
            .map(|(&v, _)| v)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.values[self.index.sample(rng)]
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum StageModel {
    /// Listed stages; the last entry repeats once the list runs out.
    Fixed(Vec<StageParams>),
    /// Independent draws per stage; `c = M` when `c` is `None`.
    Iid {
        m: Discrete,
        z: Discrete,
        c: Option<Discrete>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    pub model: StageModel,
    pub c_bar: usize,
}

impl StageSpec {
    /// Stage parameters for `cap` stages.
    pub fn schedule<R: Rng + ?Sized>(&self, cap: usize, rng: &mut R) -> Vec<StageParams> {
        match &self.model {
            StageModel::Fixed(list) => (0..cap)
                .map(|i| list[i.min(list.len() - 1)])
                .collect(),
            StageModel::Iid { m, z, c } => (0..cap)
                .map(|_| {
                    let cap_m = m.sample(rng);
                    let adv = z.sample(rng);
                    let opp = c.as_ref().map_or(cap_m, |c| c.sample(rng));
                    StageParams::new(cap_m, adv, opp)
                })
                .collect(),
        }
    }

    pub fn expected_capacity(&self) -> f64 {
        match &self.model {
            StageModel::Fixed(list) => {
                list.iter().map(|p| p.capacity as f64).sum::<f64>() / list.len() as f64
            }
            StageModel::Iid { m, .. } => m.mean(),
        }
    }

    pub fn expected_adversary(&self) -> f64 {
        match &self.model {
            StageModel::Fixed(list) => {
                list.iter().map(|p| p.adversary as f64).sum::<f64>() / list.len() as f64
            }
            StageModel::Iid { z, .. } => z.mean(),
        }
    }

    /// Smallest `M - z` any stage can have.
    pub fn min_margin(&self) -> usize {
        match &self.model {
            StageModel::Fixed(list) => list
                .iter()
                .map(|p| p.capacity - p.adversary)
                .min()
                .unwrap_or(0),
            StageModel::Iid { m, z, .. } => m.min() - z.max(),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ChannelMode {
    Matrix,
    Hypergraph(Hypergraph),
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub scheme: Option<SchemeKind>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scheme: SchemeKind,
    pub field: FieldSpec,
    pub b: usize,
    pub n: usize,
    pub trials: u64,
    pub seed: u64,
    pub stage_cap: usize,
    pub adversary: AdversaryStrategy,
    pub sc: ScOptions,
    /// Present for the random-secret scheme.
    pub rs: Option<RsParams>,
    pub long: StageSpec,
    /// Short-packet model, random-secret scheme only.
    pub short: Option<StageSpec>,
    pub channel: ChannelMode,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scheme: SchemeKind,
    #[serde(default)]
    field: FieldSpec,
    b: usize,
    n: usize,
    trials: Option<u64>,
    seed: Option<u64>,
    stage_cap: Option<usize>,
    #[serde(default)]
    adversary: AdversaryStrategy,
    #[serde(default)]
    extra_hash_point: bool,
    sigma: Option<usize>,
    m: Option<MSetting>,
    /// Accept an `m` below the sizing rule (rs only).
    #[serde(default)]
    undersized_m: bool,
    long: Option<RawStageModel>,
    short: Option<RawStageModel>,
    channel: Option<RawChannel>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MSetting {
    Value(usize),
    Word(String),
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum ModelKind {
    Fixed,
    Iid,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStageModel {
    model: ModelKind,
    #[serde(rename = "M")]
    m: Vec<usize>,
    #[serde(rename = "M_probs")]
    m_probs: Option<Vec<f64>>,
    z: Vec<usize>,
    z_probs: Option<Vec<f64>>,
    c: Option<Vec<usize>>,
    c_probs: Option<Vec<f64>>,
    c_bar: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum ModeKind {
    Matrix,
    Hypergraph,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    mode: ModeKind,
    topology: Option<PathBuf>,
    edges: Option<String>,
}

/// Reads and validates a configuration file. Relative topology paths are
/// resolved against the file's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    load_config_with(path, &Overrides::default())
}

pub fn load_config_with(
    path: &Path,
    overrides: &Overrides,
) -> Result<ExperimentConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentConfig::from_toml(&text, path.parent(), overrides)
}

impl ExperimentConfig {
    pub fn from_toml(
        text: &str,
        base_dir: Option<&Path>,
        overrides: &Overrides,
    ) -> Result<Self, HarnessError> {
        let mut raw: RawConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if let Some(s) = overrides.scheme {
            raw.scheme = s;
        }
        if let Some(t) = overrides.trials {
            raw.trials = Some(t);
        }
        if let Some(s) = overrides.seed {
            raw.seed = Some(s);
        }
        Self::resolve(raw, base_dir)
    }

    fn resolve(raw: RawConfig, base_dir: Option<&Path>) -> Result<Self, HarnessError> {
        let q = raw.field.order() as u64;
        let (b, n) = (raw.b, raw.n);
        if b == 0 || n == 0 {
            return reject("b and n must be positive");
        }
        if (n + b) as u64 >= q {
            return reject(format!("n + b < q violated (n + b = {}, q = {q})", n + b));
        }
        let stage_cap = raw.stage_cap.unwrap_or(DEFAULT_STAGE_CAP);
        if stage_cap == 0 {
            return reject("stage_cap must be positive");
        }

        let channel = match &raw.channel {
            None => ChannelMode::Matrix,
            Some(ch) => match ch.mode {
                ModeKind::Matrix => ChannelMode::Matrix,
                ModeKind::Hypergraph => {
                    let text = match (&ch.edges, &ch.topology) {
                        (Some(edges), None) => edges.clone(),
                        (None, Some(file)) => {
                            let path = base_dir.map_or(file.clone(), |d| d.join(file));
                            fs::read_to_string(&path).map_err(|source| HarnessError::Io {
                                path: path.clone(),
                                source,
                            })?
                        }
                        _ => {
                            return reject(
                                "hypergraph mode needs exactly one of `topology` or `edges`",
                            )
                        }
                    };
                    ChannelMode::Hypergraph(Hypergraph::parse(&text).map_err(config_err)?)
                }
            },
        };

        let (long, short) = match &channel {
            ChannelMode::Hypergraph(g) => {
                if raw.long.is_some() || raw.short.is_some() {
                    return reject("stage models are derived from the topology in hypergraph mode; remove [long]/[short]");
                }
                let p = g.stage_params();
                let spec = StageSpec {
                    model: StageModel::Fixed(vec![p]),
                    c_bar: p.opportunities,
                };
                p.validate(spec.c_bar).map_err(config_err)?;
                let short = (raw.scheme == SchemeKind::RandomSecret).then(|| spec.clone());
                (spec, short)
            }
            ChannelMode::Matrix => {
                let Some(long) = &raw.long else {
                    return reject("missing [long] stage model");
                };
                let long = stage_spec(long, "long")?;
                let short = match (&raw.short, raw.scheme) {
                    (Some(s), SchemeKind::RandomSecret) => Some(stage_spec(s, "short")?),
                    (None, SchemeKind::RandomSecret) => {
                        return reject("scheme rs needs a [short] stage model")
                    }
                    (_, SchemeKind::SecretChannel) => None,
                };
                (long, short)
            }
        };

        let rs = match raw.scheme {
            SchemeKind::SecretChannel => None,
            SchemeKind::RandomSecret => {
                let sigma = raw.sigma.unwrap_or(1);
                if sigma == 0 {
                    return reject("sigma must be at least 1");
                }
                let m = match &raw.m {
                    None => RsParams::auto_m(b, sigma, long.c_bar),
                    Some(MSetting::Word(w)) if w == "auto" => RsParams::auto_m(b, sigma, long.c_bar),
                    Some(MSetting::Word(w)) => {
                        return reject(format!("m must be an integer or \"auto\", got `{w}`"))
                    }
                    Some(MSetting::Value(v)) => *v,
                };
                let params = RsParams {
                    b,
                    n,
                    sigma,
                    m,
                    c_bar: long.c_bar,
                    relaxed: raw.undersized_m,
                };
                params.validate_for_order(q).map_err(config_err)?;
                let margin = short.as_ref().map_or(0, StageSpec::min_margin);
                if sigma > margin {
                    return reject(format!(
                        "sigma <= M_bar_i - z_bar_i violated (sigma = {sigma}, smallest short margin = {margin})"
                    ));
                }
                Some(params)
            }
        };

        Ok(ExperimentConfig {
            scheme: raw.scheme,
            field: raw.field,
            b,
            n,
            trials: raw.trials.unwrap_or(1),
            seed: raw.seed.unwrap_or(0),
            stage_cap,
            adversary: raw.adversary,
            sc: ScOptions {
                extra_point_every_stage: raw.extra_hash_point,
            },
            rs,
            long,
            short,
            channel,
        })
    }

    /// `E[M]` and `E[z]` of the long-packet model, with `z = 0` when the
    /// adversary is disabled.
    pub fn expected_cut(&self) -> (f64, f64) {
        let z = if self.adversary.is_active() {
            self.long.expected_adversary()
        } else {
            0.0
        };
        (self.long.expected_capacity(), z)
    }

    /// Rate lower bound `b / (b + c_bar - 1) (E[M] - E[z])`.
    pub fn theoretical_bound(&self) -> f64 {
        let (m, z) = self.expected_cut();
        self.b as f64 / (self.b + self.long.c_bar - 1) as f64 * (m - z)
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Config(e.to_string())
}

fn stage_spec(raw: &RawStageModel, which: &str) -> Result<StageSpec, HarnessError> {
    let ctx = |e: String| HarnessError::Config(format!("[{which}] {e}"));
    let (model, c_max) = match raw.model {
        ModelKind::Fixed => {
            let len = raw.m.len();
            if len == 0 || raw.z.len() != len || raw.c.as_ref().is_some_and(|c| c.len() != len) {
                return Err(ctx("fixed model needs equally long, non-empty M, z (and c) lists".into()));
            }
            let list: Vec<StageParams> = (0..len)
                .map(|i| {
                    let c = raw.c.as_ref().map_or(raw.m[i], |c| c[i]);
                    StageParams::new(raw.m[i], raw.z[i], c)
                })
                .collect();
            let c_max = list.iter().map(|p| p.opportunities).max().unwrap_or(0);
            (StageModel::Fixed(list), c_max)
        }
        ModelKind::Iid => {
            let m = Discrete::new(raw.m.clone(), raw.m_probs.clone()).map_err(|e| ctx(format!("M: {e}")))?;
            let z = Discrete::new(raw.z.clone(), raw.z_probs.clone()).map_err(|e| ctx(format!("z: {e}")))?;
            let c = raw
                .c
                .as_ref()
                .map(|c| Discrete::new(c.clone(), raw.c_probs.clone()))
                .transpose()
                .map_err(|e| ctx(format!("c: {e}")))?;
            let c_max = c.as_ref().map_or(m.max(), Discrete::max);
            (StageModel::Iid { m, z, c }, c_max)
        }
    };
    let c_bar = raw.c_bar.unwrap_or(c_max);
    // Every stage the model can produce must be admissible; for iid models
    // the extreme combinations decide.
    let corners: Vec<StageParams> = match &model {
        StageModel::Fixed(list) => list.clone(),
        StageModel::Iid { m, z, c } => {
            let (c_lo, c_hi) = c.as_ref().map_or((None, None), |c| (Some(c.min()), Some(c.max())));
            vec![
                StageParams::new(m.min(), z.max(), c_lo.unwrap_or(m.min())),
                StageParams::new(m.max(), z.max(), c_lo.unwrap_or(m.max())),
                StageParams::new(m.max(), z.min(), c_hi.unwrap_or(m.max())),
            ]
        }
    };
    for p in &corners {
        p.validate(c_bar).map_err(|e| ctx(e.to_string()))?;
    }
    Ok(StageSpec { model, c_bar })
}

/// Either channel mode behind one type.
#[derive(Debug, Clone)]
pub enum AnyChannel {
    Matrix(MatrixChannel),
    Hypergraph(HypergraphChannel),
}

impl AnyChannel {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        match &cfg.channel {
            ChannelMode::Matrix => AnyChannel::Matrix(MatrixChannel::new(cfg.adversary)),
            ChannelMode::Hypergraph(g) => {
                AnyChannel::Hypergraph(HypergraphChannel::new(g.clone(), cfg.adversary))
            }
        }
    }
}

impl<F: Field> Channel<F> for AnyChannel {
    fn transmit<R: Rng + ?Sized>(
        &self,
        params: &StageParams,
        x: &Matrix<F>,
        header: usize,
        rng: &mut R,
    ) -> Result<StageOutcome<F>, ChannelError> {
        match self {
            AnyChannel::Matrix(c) => c.transmit(params, x, header, rng),
            AnyChannel::Hypergraph(c) => c.transmit(params, x, header, rng),
        }
    }

    fn adversary_active(&self) -> bool {
        match self {
            AnyChannel::Matrix(c) => Channel::<F>::adversary_active(c),
            AnyChannel::Hypergraph(c) => Channel::<F>::adversary_active(c),
        }
    }
}

/// Aggregate statistics of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scheme: String,
    pub field: String,
    pub b: usize,
    pub n: usize,
    pub trials: u64,
    pub decoded: u64,
    pub failures: u64,
    pub exhausted: u64,
    pub correct: u64,
    /// Mean of `b / N`, counting failed and exhausted trials as 0.
    pub mean_rate: f64,
    /// Fraction of trials decoding exactly at the first stage where
    /// `b + sum z <= sum M`.
    pub decode_at_cutset_frequency: f64,
    /// Decoded trials whose `N` is below the cut-set stage.
    pub decoded_before_cutset: u64,
    pub silent_corruptions: u64,
    pub silent_corruption_flag: bool,
    pub expected_capacity: f64,
    pub expected_adversary: f64,
    pub c_bar: usize,
    pub theoretical_bound: f64,
    pub audit_checks: u64,
    pub audit_violations: Vec<String>,
    pub flags: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl Summary {
    pub fn new(cfg: &ExperimentConfig, records: &[TrialRecord], audit: &Audit, wall: f64) -> Self {
        let count = |o: Outcome| records.iter().filter(|r| r.outcome == o).count() as u64;
        let trials = records.len() as u64;
        let mean = |sum: f64| if trials == 0 { 0.0 } else { sum / trials as f64 };
        let silent = records.iter().filter(|r| r.silent_corruption()).count() as u64;
        let at_cutset = records
            .iter()
            .filter(|r| r.outcome == Outcome::Decoded && r.cutset_stage(cfg.b) == Some(r.stages))
            .count();
        let early = records
            .iter()
            .filter(|r| {
                r.outcome == Outcome::Decoded && r.cutset_stage(cfg.b).is_none_or(|c| r.stages < c)
            })
            .count() as u64;
        let mut flags = Vec::new();
        if trials == 0 {
            flags.push("zero-trials".to_string());
        }
        if silent > 0 {
            flags.push("silent-corruption".to_string());
        }
        if !audit.is_clean() {
            flags.push("audit-violations".to_string());
        }
        let (em, ez) = cfg.expected_cut();
        Summary {
            scheme: cfg.scheme.name().to_string(),
            field: cfg.field.name().to_string(),
            b: cfg.b,
            n: cfg.n,
            trials,
            decoded: count(Outcome::Decoded),
            failures: count(Outcome::Failure),
            exhausted: count(Outcome::Exhausted),
            correct: records.iter().filter(|r| r.correct).count() as u64,
            mean_rate: mean(records.iter().map(|r| r.rate).sum()),
            decode_at_cutset_frequency: mean(at_cutset as f64),
            decoded_before_cutset: early,
            silent_corruptions: silent,
            silent_corruption_flag: silent > 0,
            expected_capacity: em,
            expected_adversary: ez,
            c_bar: cfg.long.c_bar,
            theoretical_bound: cfg.theoretical_bound(),
            audit_checks: audit.checks,
            audit_violations: audit
                .violations
                .iter()
                .take(MAX_REPORTED_VIOLATIONS)
                .cloned()
                .collect(),
            flags,
            wall_clock_seconds: wall,
        }
    }
}

/// Trials in id order, their summary, and the merged identity audit.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<TrialRecord>,
    pub summary: Summary,
    pub audit: Audit,
}

/// Per-trial generator: the config seed picks the key, the trial id the
/// stream, so trials are independent and order-free.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs a single trial of the configured experiment.
pub fn run_trial(cfg: &ExperimentConfig, trial: u64) -> Result<SessionReport, HarnessError> {
    match cfg.field {
        FieldSpec::Gf2_16 => run_trial_in::<Gf65536>(cfg, trial),
        FieldSpec::Gf2_8 => run_trial_in::<Gf256>(cfg, trial),
        FieldSpec::Prime65521 => run_trial_in::<Fp65521>(cfg, trial),
        FieldSpec::Prime251 => run_trial_in::<Fp251>(cfg, trial),
        FieldSpec::Prime7 => run_trial_in::<Fp7>(cfg, trial),
    }
}

fn run_trial_in<F: Field>(cfg: &ExperimentConfig, trial: u64) -> Result<SessionReport, HarnessError> {
    let mut rng = trial_rng(cfg.seed, trial);
    let long = cfg.long.schedule(cfg.stage_cap, &mut rng);
    let msg = SourceMessage::<F>::random(cfg.b, cfg.n, &mut rng)?;
    let channel = AnyChannel::for_config(cfg);
    let report = match (cfg.scheme, &cfg.rs, &cfg.short) {
        (SchemeKind::SecretChannel, _, _) => {
            scheme_sc::run_session(&msg, &long, &channel, cfg.sc, trial, &mut rng)?
        }
        (SchemeKind::RandomSecret, Some(params), Some(short)) => {
            let short = short.schedule(cfg.stage_cap, &mut rng);
            scheme_rs::run_session(&msg, params, &long, &short, &channel, &channel, trial, &mut rng)?
        }
        _ => return reject("random-secret scheme without its parameters"),
    };
    Ok(report)
}

/// Runs every trial (in parallel when the `parallel` feature is on) and
/// summarizes them.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    let clock = Stopwatch::start();
    let reports = run_trials(cfg)?;
    let mut audit = Audit::default();
    let mut records = Vec::with_capacity(reports.len());
    for rep in reports {
        audit.merge(&rep.audit);
        records.push(rep.record);
    }
    let summary = Summary::new(cfg, &records, &audit, clock.seconds());
    Ok(ExperimentResult {
        records,
        summary,
        audit,
    })
}

#[cfg(feature = "parallel")]
fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<SessionReport>, HarnessError> {
    use rayon::prelude::*;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, t))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<SessionReport>, HarnessError> {
    (0..cfg.trials).map(|t| run_trial(cfg, t)).collect()
}

#[cfg(not(target_arch = "wasm32"))]
struct Stopwatch(std::time::Instant);

#[cfg(not(target_arch = "wasm32"))]
impl Stopwatch {
    fn start() -> Self {
        Stopwatch(std::time::Instant::now())
    }

    fn seconds(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

// No monotonic clock on bare wasm; timings read as zero there.
#[cfg(target_arch = "wasm32")]
struct Stopwatch;

#[cfg(target_arch = "wasm32")]
impl Stopwatch {
    fn start() -> Self {
        Stopwatch
    }

    fn seconds(&self) -> f64 {
        0.0
    }
}

pub const CSV_HEADER: [&str; 6] = ["trial", "N", "outcome", "correct", "rate", "stage_trace"];

/// Serializes trial records as CSV.
pub fn write_trials_csv<W: std::io::Write>(records: &[TrialRecord], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.stages.to_string(),
            r.outcome.to_string(),
            r.correct.to_string(),
            format!("{:?}", r.rate),
            r.format_trace(),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::Csv(e.into()))?;
    Ok(())
}

/// Writes `trials.csv` and `summary.json` into `out_dir`, creating it if
/// needed.
pub fn emit_outputs(
    records: &[TrialRecord],
    summary: &Summary,
    out_dir: &Path,
) -> Result<(), HarnessError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let csv_path = out_dir.join("trials.csv");
    let file = fs::File::create(&csv_path).map_err(io(&csv_path))?;
    write_trials_csv(records, std::io::BufWriter::new(file))?;
    let json_path = out_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(&json_path, text).map_err(io(&json_path))?;
    Ok(())
}
