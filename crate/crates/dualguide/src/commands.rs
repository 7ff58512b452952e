//! The `sample`, `sweep`, `oracle` and `analyze` subcommands.

use std::path::{Path, PathBuf};

use dualguide_core::metrics::{self, kl_divergence, temporal_consistency, total_variation, MetricReport};
use dualguide_core::oracle::{exact_tilt_projection, sampler_distribution, sequence_totals, BoundTrace};
use dualguide_core::{BackendSpec, Constraint, RunTrace, ScoreSource};

use crate::config::{ExperimentConfig, Resolved};
use crate::error::{AppError, AppResult};
use crate::grid::{self, Setting};
use crate::io;
use crate::report::{self, Report, METRIC_COLUMNS};
use crate::runner::{run_chains, sample_sequences, static_constraints, ChainOutput};

/// A loaded config with its file locations.
#[derive(Debug, Clone)]
pub struct Job {
    pub config: ExperimentConfig,
    /// Directory that relative paths inside the config are resolved against.
    pub base_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Job {
    pub fn new(config: ExperimentConfig, base_dir: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            config,
            base_dir: base_dir.into(),
            out_dir: out_dir.into(),
        }
    }

    /// Hash of everything except the output section.
    pub fn config_hash(config: &ExperimentConfig) -> AppResult<String> {
        let mut c = config.clone();
        c.output = Default::default();
        c.hash()
    }
}

/// Per-sample contribution of a finished sequence to `c`.
///
/// Context-aware scorers count the best partial match of their pattern.
pub fn constraint_totals(c: &Constraint, samples: &[Vec<u32>]) -> Vec<f64> {
    match &c.scores {
        ScoreSource::Static(t) => metrics::totals(samples, t),
        ScoreSource::Subsequence(s) => samples.iter().map(|x| s.best_match(x) as f64).collect(),
    }
}

/// Fraction of samples meeting every constraint.
pub fn joint_pass_rate(constraints: &[Constraint], samples: &[Vec<u32>]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let totals: Vec<Vec<f64>> = constraints.iter().map(|c| constraint_totals(c, samples)).collect();
    let pass = (0..samples.len())
        .filter(|&i| constraints.iter().zip(&totals).all(|(c, t)| t[i] >= c.target))
        .count();
    pass as f64 / samples.len() as f64
}

fn lambda_mean(traces: &[RunTrace], k: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for t in traces {
        for r in &t.records {
            sum += *r.lambda.get(k)?;
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

fn metric_report(
    job: &Job,
    c: &Constraint,
    samples: &[Vec<u32>],
    vocab: usize,
    reference: &[Vec<u32>],
) -> MetricReport {
    let totals = constraint_totals(c, samples);
    let m = &job.config.metrics;
    MetricReport::from_totals(samples, &totals, c.target, vocab, Some(reference), m.smoothing, m.jaccard)
}

fn warn_infeasible(resolved: &Resolved) {
    for c in &resolved.constraints {
        if let ScoreSource::Static(t) = &c.scores {
            let max = t.max_total(resolved.run.seq_len);
            if max < c.target {
                eprintln!(
                    "warning: constraint '{}' cannot be met: largest contribution {max} < target {}",
                    c.name, c.target
                );
            }
        }
    }
}

struct Variant {
    name: String,
    constraints: Vec<Constraint>,
    guided: bool,
}

fn variants(job: &Job, resolved: &Resolved) -> Vec<Variant> {
    let mut out = vec![Variant {
        name: "guided".into(),
        constraints: resolved.constraints.clone(),
        guided: true,
    }];
    if job.config.baselines.unconstrained {
        out.push(Variant {
            name: "unconstrained".into(),
            constraints: Vec::new(),
            guided: false,
        });
    }
    for &a in &job.config.baselines.static_alpha {
        out.push(Variant {
            name: format!("static_{a}"),
            constraints: static_constraints(&resolved.constraints, a),
            guided: true,
        });
    }
    out
}

/// Runs every variant, writes sequences, traces, `metrics.csv` and `report.txt`.
pub fn cmd_sample(job: &Job) -> AppResult<Report> {
    let cfg = &job.config;
    let resolved = cfg.resolve(&job.base_dir)?;
    warn_infeasible(&resolved);
    let hash = Job::config_hash(cfg)?;
    let (chains, seed) = (cfg.run.chains, cfg.run.seed);
    let vocab = resolved.backend.vocab();
    let out = &job.out_dir;

    let reference = sample_sequences(&resolved.backend, &[], &resolved.run.clone().with_guidance(false), chains, seed)?;
    let mut header: Vec<String> = ["config_hash", "variant", "constraint", "target", "joint_pass_rate"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
    let mut rows = Vec::new();
    let mut report = Report::new();
    report
        .push("config_hash", &hash)
        .push("chains", chains)
        .push("seed", seed);

    for variant in variants(job, &resolved) {
        let run = resolved.run.clone().with_guidance(variant.guided);
        let record = variant.name == "guided" && cfg.output.record_logits;
        let outputs: Vec<ChainOutput> = if variant.name == "unconstrained" {
            Vec::new()
        } else {
            run_chains(&resolved.backend, &variant.constraints, &run, chains, seed, record)?
        };
        let (samples, traces): (Vec<Vec<u32>>, Vec<RunTrace>) = if variant.name == "unconstrained" {
            (reference.clone(), Vec::new())
        } else {
            outputs.iter().map(|o| (o.trace.tokens.clone(), o.trace.clone())).unzip()
        };
        io::write_sequences(&out.join(format!("sequences_{}.jsonl", variant.name)), &samples)?;
        if variant.name == "guided" {
            if cfg.output.traces {
                io::write_run_traces(&out.join("traces.jsonl"), &traces)?;
            }
            for (i, o) in outputs.iter().enumerate() {
                if let Some(l) = &o.logits {
                    io::write_logit_trace(&out.join("logits").join(format!("chain_{i:06}.jsonl")), l)?;
                }
            }
            if cfg.metrics.bound {
                let mut b = BoundTrace::default();
                for t in &traces {
                    b.extend(t)?;
                }
                for (k, v) in Report::bound(&b).entries() {
                    report.push(format!("bound.{k}"), v);
                }
            }
        }
        // Static baselines are scored against the configured constraints.
        let scored = &resolved.constraints;
        let joint = joint_pass_rate(scored, &samples);
        report.push(format!("{}.joint_pass_rate", variant.name), joint);
        for (k, c) in scored.iter().enumerate() {
            let m = metric_report(job, c, &samples, vocab, &reference);
            let lm = if variant.constraints.is_empty() {
                None
            } else {
                lambda_mean(&traces, k)
            };
            let mut row = vec![
                hash.clone(),
                variant.name.clone(),
                c.name.clone(),
                c.target.to_string(),
                joint.to_string(),
            ];
            row.extend(report::metric_cells(&m, lm));
            for (col, v) in METRIC_COLUMNS.iter().zip(&row[5..]) {
                report.push(format!("{}.{}.{col}", variant.name, c.name), v);
            }
            rows.push(row);
        }
    }
    report::write_csv(&out.join("metrics.csv"), &header, &rows)?;
    std::fs::write(out.join("config.toml"), cfg.to_toml()?).map_err(|e| AppError::io(out, e))?;
    report.write(&out.join("report.txt"))?;
    Ok(report)
}

/// One row per grid cell for the first constraint, all cells sharing the base seed.
pub fn cmd_sweep(job: &Job, grid_spec: &str) -> AppResult<Vec<Vec<String>>> {
    let axes = grid::parse_grid(grid_spec)?;
    let cells = grid::cells(&axes);
    let base = job.config.resolve(&job.base_dir)?;
    let (chains, seed) = (job.config.run.chains, job.config.run.seed);
    let vocab = base.backend.vocab();
    let reference = sample_sequences(&base.backend, &[], &base.run.clone().with_guidance(false), chains, seed)?;

    let mut header: Vec<String> = ["config_hash", "cell", "constraint", "eta", "slack", "target", "lambda0", "scope"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
    let mut rows = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        let cfg = grid::apply(&job.config, cell)?;
        let resolved = cfg.resolve(&job.base_dir)?;
        let hash = Job::config_hash(&cfg)?;
        let outputs = run_chains(&resolved.backend, &resolved.constraints, &resolved.run, chains, seed, false)?;
        let traces: Vec<RunTrace> = outputs.into_iter().map(|o| o.trace).collect();
        let samples: Vec<Vec<u32>> = traces.iter().map(|t| t.tokens.clone()).collect();
        let c = &resolved.constraints[0];
        let cc = &cfg.constraints[0];
        let m = metric_report(job, c, &samples, vocab, &reference);
        let mut row = vec![
            hash,
            i.to_string(),
            c.name.clone(),
            cc.eta.to_string(),
            cc.slack.to_string(),
            cc.target.to_string(),
            cc.lambda0.to_string(),
            Setting::Scope(cc.scope).value(),
        ];
        row.extend(report::metric_cells(&m, lambda_mean(&traces, 0)));
        rows.push(row);
    }
    report::write_csv(&job.out_dir.join("sweep.csv"), &header, &rows)?;
    Ok(rows)
}

fn encode(tokens: &[u32], vocab: usize) -> usize {
    tokens.iter().fold(0, |acc, &t| acc * vocab + t as usize)
}

/// Exact tilt of the unguided sampler's law against the guided sampler's empirical law.
pub fn cmd_oracle(job: &Job) -> AppResult<Report> {
    let cfg = &job.config;
    let resolved = cfg.resolve(&job.base_dir)?;
    if matches!(resolved.backend, BackendSpec::Drifting { .. } | BackendSpec::Trace(_)) {
        return Err(AppError::config("oracle needs a unigram or markov backend"));
    }
    let [c] = resolved.constraints.as_slice() else {
        return Err(AppError::config("oracle needs exactly one constraint"));
    };
    let ScoreSource::Static(table) = &c.scores else {
        return Err(AppError::config("oracle needs a static scorer"));
    };
    let (v, len) = (resolved.backend.vocab(), resolved.run.seq_len);
    let totals = sequence_totals(table, v, len)?;
    let q = sampler_distribution(&resolved.backend, len, &resolved.run.schedule)?;
    let sol = exact_tilt_projection(&q, &totals, c.target)?;

    let (chains, seed) = (cfg.run.chains, cfg.run.seed);
    let samples = sample_sequences(&resolved.backend, &resolved.constraints, &resolved.run, chains, seed)?;
    let mut emp = vec![0.0; q.len()];
    for s in &samples {
        emp[encode(s, v)] += 1.0 / chains as f64;
    }
    let mean_b: f64 = emp.iter().zip(&totals).map(|(p, b)| p * b).sum();
    let kl_emp = kl_divergence(&emp, &q);
    let mut r = Report::new();
    r.push("config_hash", Job::config_hash(cfg)?)
        .push("chains", chains)
        .push("lambda_star", sol.lambda)
        .push("kl_star", sol.kl)
        .push("expectation_star", sol.expectation)
        .push("iterations", sol.iterations)
        .push("empirical_expectation", mean_b)
        .push("expectation_gap", (mean_b - c.target).abs())
        .push("tv_to_tilt", total_variation(&emp, &sol.probs))
        .push("tv_to_base", total_variation(&emp, &q))
        .push("empirical_kl", kl_emp)
        .push(
            "kl_gap_relative",
            if sol.kl > 0.0 { kl_emp / sol.kl - 1.0 } else { f64::NAN },
        );
    r.write(&job.out_dir.join("oracle.txt"))?;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyzeMode {
    Consistency,
    Bound,
}

impl std::str::FromStr for AnalyzeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "consistency" => Ok(AnalyzeMode::Consistency),
            "bound" => Ok(AnalyzeMode::Bound),
            other => Err(format!("unknown analysis mode '{other}' (consistency | bound)")),
        }
    }
}

fn analysis_input(e: AppError) -> AppError {
    match e {
        AppError::Io { .. } | AppError::Parse { .. } => AppError::Analysis(e.to_string()),
        other => other,
    }
}

/// Consistency mode reads logit traces; bound mode reads run-trace JSONL files.
pub fn cmd_analyze(mode: AnalyzeMode, paths: &[PathBuf]) -> AppResult<Report> {
    if paths.is_empty() {
        return Err(AppError::Analysis("no trace files given".into()));
    }
    match mode {
        AnalyzeMode::Consistency => {
            let traces = paths
                .iter()
                .map(|p| io::read_logit_trace(p).map_err(analysis_input))
                .collect::<AppResult<Vec<_>>>()?;
            Ok(Report::consistency(&temporal_consistency(&traces)?))
        }
        AnalyzeMode::Bound => {
            let mut b = BoundTrace::default();
            for p in paths {
                for t in io::read_run_traces(p).map_err(analysis_input)? {
                    b.extend(&t)
                        .map_err(|e| AppError::Analysis(format!("{}: {e}", p.display())))?;
                }
            }
            Ok(Report::bound(&b))
        }
    }
}

/// Output directory: the flag wins, then the environment override, then the config.
pub fn output_dir(flag: Option<&Path>, env: Option<PathBuf>, config: &ExperimentConfig, base_dir: &Path) -> PathBuf {
    match (flag, env) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(p)) => p,
        (None, None) => base_dir.join(&config.output.dir),
    }
}
