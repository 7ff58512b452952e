//! TOML experiment configuration and its resolution into core types.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dualguide_core::backends::{uniform_probs, zipf_probs};
use dualguide_core::diffusion::ScheduleKind;
use dualguide_core::guidance::{DEFAULT_ETA, DEFAULT_LAMBDA0, DEFAULT_LAMBDA_MAX};
use dualguide_core::oracle::CorrectionParams;
use dualguide_core::scorers::{
    additive_property_scores, cluster_fraction_from_counts, frontload_weights, lexical_count_scores,
    SubsequenceScorer,
};
use dualguide_core::{
    BackendSpec, Constraint, MaskSchedule, MultiplierScope, RunConfig, ScoreSource, SlackMode,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};
use crate::io;

/// Environment variable overriding `[output] dir`.
pub const OUT_DIR_ENV: &str = "DUALGUIDE_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub backend: BackendConfig,
    #[serde(default)]
    pub constraints: Vec<ConstraintConfig>,
    #[serde(default)]
    pub baselines: BaselineConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seq_len: usize,
    pub steps: usize,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "linear")]
    pub schedule: ScheduleKind,
}

fn one() -> usize {
    1
}

fn linear() -> ScheduleKind {
    ScheduleKind::Linear
}

/// Base distribution: explicit `probs`, a Zipf law over `vocab` tokens, or uniform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    Unigram {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vocab: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        probs: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zipf: Option<f64>,
    },
    Markov {
        initial: Vec<f64>,
        transitions: Vec<Vec<f64>>,
    },
    Drifting {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        vocab: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        probs: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        zipf: Option<f64>,
        #[serde(default)]
        mu_bar: f64,
        sigma: f64,
        #[serde(default)]
        rho: f64,
    },
    /// Replays a recorded logit trace.
    Trace { path: PathBuf },
}

fn base_probs(vocab: Option<usize>, probs: &Option<Vec<f64>>, zipf: Option<f64>) -> AppResult<Vec<f64>> {
    match (probs, vocab, zipf) {
        (Some(p), None, None) => Ok(p.clone()),
        (Some(p), Some(v), None) if p.len() == v => Ok(p.clone()),
        (Some(p), Some(v), None) => Err(AppError::config(format!(
            "backend: probs has {} entries but vocab = {v}",
            p.len()
        ))),
        (None, Some(v), Some(s)) => {
            if !(s.is_finite() && s >= 0.0) {
                return Err(AppError::config(format!("backend: zipf exponent {s} must be ≥ 0")));
            }
            Ok(zipf_probs(v, s))
        }
        (None, Some(v), None) => Ok(uniform_probs(v)),
        (Some(_), _, Some(_)) => Err(AppError::config("backend: give either probs or zipf, not both")),
        (None, None, _) => Err(AppError::config("backend: needs probs or vocab")),
    }
}

impl BackendConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            BackendConfig::Unigram { .. } => "unigram",
            BackendConfig::Markov { .. } => "markov",
            BackendConfig::Drifting { .. } => "drifting",
            BackendConfig::Trace { .. } => "trace",
        }
    }

    pub fn resolve(&self, base_dir: &Path) -> AppResult<BackendSpec> {
        Ok(match self {
            BackendConfig::Unigram { vocab, probs, zipf } => BackendSpec::Unigram {
                probs: base_probs(*vocab, probs, *zipf)?,
            },
            BackendConfig::Markov {
                initial,
                transitions,
            } => BackendSpec::Markov {
                initial: initial.clone(),
                transitions: transitions.clone(),
            },
            BackendConfig::Drifting {
                vocab,
                probs,
                zipf,
                mu_bar,
                sigma,
                rho,
            } => BackendSpec::Drifting {
                probs: base_probs(*vocab, probs, *zipf)?,
                mu_bar: *mu_bar,
                sigma: *sigma,
                rho: *rho,
            },
            BackendConfig::Trace { path } => {
                let trace = io::read_logit_trace(&base_dir.join(path)).map_err(as_config)?;
                BackendSpec::Trace(Arc::new(trace))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScorerConfig {
    /// Indicator of a target token set.
    Lexical { tokens: Vec<u32> },
    /// Per-token values, inline (one per token) or from a `token value` file.
    Additive {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        values: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        file: Option<PathBuf>,
    },
    /// Tag fraction from a `token members tagged` file.
    Cluster { file: PathBuf },
    /// Steers toward a contiguous token pattern; rescored every step.
    Subsequence { pattern: Vec<u32> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintConfig {
    pub name: String,
    pub target: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_lambda0")]
    pub lambda0: f64,
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
    #[serde(default = "default_slack")]
    pub slack: SlackMode,
    #[serde(default)]
    pub scope: MultiplierScope,
    /// Front-load weight κ; 0 leaves the scores unchanged.
    #[serde(default)]
    pub frontload: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rescale: Option<bool>,
    pub scorer: ScorerConfig,
}

fn default_eta() -> f64 {
    DEFAULT_ETA
}

fn default_lambda0() -> f64 {
    DEFAULT_LAMBDA0
}

fn default_lambda_max() -> f64 {
    DEFAULT_LAMBDA_MAX
}

fn default_slack() -> SlackMode {
    SlackMode::Accumulated
}

impl ConstraintConfig {
    pub fn resolve(&self, vocab: usize, len: usize, base_dir: &Path) -> AppResult<Constraint> {
        let ctx = |e: AppError| AppError::config(format!("constraint '{}': {e}", self.name));
        let scores: ScoreSource = match &self.scorer {
            ScorerConfig::Lexical { tokens } => lexical_count_scores(vocab, tokens)?.into(),
            ScorerConfig::Additive { values, file } => {
                let pairs: Vec<(u32, f64)> = match (values, file) {
                    (Some(v), None) => v.iter().enumerate().map(|(j, &x)| (j as u32, x)).collect(),
                    (None, Some(f)) => io::read_score_file(&base_dir.join(f)).map_err(ctx)?,
                    _ => return Err(ctx(AppError::config("additive scorer needs exactly one of values, file"))),
                };
                additive_property_scores(vocab, pairs)?.into()
            }
            ScorerConfig::Cluster { file } => {
                let counts = io::read_cluster_file(&base_dir.join(file)).map_err(ctx)?;
                if counts.len() != vocab {
                    return Err(ctx(AppError::config(format!(
                        "cluster file lists {} tokens, vocabulary is {vocab}",
                        counts.len()
                    ))));
                }
                cluster_fraction_from_counts(&counts)?.into()
            }
            ScorerConfig::Subsequence { pattern } => {
                ScoreSource::Subsequence(SubsequenceScorer::new(pattern.clone(), vocab)?)
            }
        };
        let scores = match (scores, self.frontload) {
            (s, k) if k == 0.0 => s,
            (ScoreSource::Static(t), k) => frontload_weights(&t, k, len)?.into(),
            (ScoreSource::Subsequence(_), _) => {
                return Err(ctx(AppError::config("front-loading needs a static scorer")))
            }
        };
        let mut c = Constraint::new(self.name.clone(), scores, self.target)
            .with_eta(self.eta)
            .with_lambda0(self.lambda0)
            .with_lambda_max(self.lambda_max)
            .with_slack(self.slack)
            .with_scope(self.scope);
        c.rescale = self.rescale;
        c.validate().map_err(|e| ctx(e.into()))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    #[serde(default = "yes")]
    pub unconstrained: bool,
    /// Fixed-λ runs: each constraint frozen at `λ = α` (`η = 0`).
    #[serde(default)]
    pub static_alpha: Vec<f64>,
}

fn yes() -> bool {
    true
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            unconstrained: true,
            static_alpha: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// KL smoothing ε; `0.5 / N` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
    #[serde(default)]
    pub jaccard: bool,
    /// Record per-step reward and bound.
    #[serde(default)]
    pub bound: bool,
    /// Confidence δ of the stochastic bound correction on drifting backends; none disables it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correction_delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Write per-chain run traces.
    #[serde(default = "yes")]
    pub traces: bool,
    /// Write per-chain logit traces.
    #[serde(default)]
    pub record_logits: bool,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out(),
            traces: true,
            record_logits: false,
        }
    }
}

fn as_config(e: AppError) -> AppError {
    match e {
        AppError::Config(_) => e,
        other => AppError::Config(other.to_string()),
    }
}

/// Everything a run needs, built from an [`ExperimentConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub backend: BackendSpec,
    pub constraints: Vec<Constraint>,
    pub run: RunConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> AppResult<Self> {
        toml::from_str(text).map_err(|e| AppError::config(e.to_string()))
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        toml::from_str(&text).map_err(|e| AppError::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> AppResult<String> {
        toml::to_string(self).map_err(|e| AppError::config(e.to_string()))
    }

    /// SHA-256 of the serialised config, hex encoded.
    pub fn hash(&self) -> AppResult<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn resolve(&self, base_dir: &Path) -> AppResult<Resolved> {
        let r = &self.run;
        if r.chains == 0 {
            return Err(AppError::config("run.chains must be ≥ 1"));
        }
        if r.seed > i64::MAX as u64 {
            return Err(AppError::config(format!("run.seed = {} does not fit a TOML integer", r.seed)));
        }
        let backend = self.backend.resolve(base_dir)?;
        let vocab = backend.vocab();
        let mut run = RunConfig::new(r.seq_len, r.steps)?;
        run.schedule = MaskSchedule::new(r.schedule.clone(), r.steps)?;
        run.track_bound = self.metrics.bound;
        if let (true, Some(delta), BackendSpec::Drifting { mu_bar, sigma, rho, .. }) =
            (self.metrics.bound, self.metrics.correction_delta, &backend)
        {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(AppError::config(format!("metrics.correction_delta = {delta} must lie in (0, 1)")));
            }
            run.correction = Some(CorrectionParams {
                mu_bar: *mu_bar,
                sigma: *sigma,
                rho: *rho,
                delta,
            });
        }
        let constraints = self
            .constraints
            .iter()
            .map(|c| c.resolve(vocab, r.seq_len, base_dir))
            .collect::<AppResult<Vec<_>>>()?;
        // Build once so backend parameter errors surface as config errors.
        backend.build(r.seq_len)?;
        Ok(Resolved {
            backend,
            constraints,
            run,
        })
    }
}
