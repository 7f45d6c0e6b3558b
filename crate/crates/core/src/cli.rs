//! Seeded experiment runner.
//!
//! A validated config runs once per seed; seeds are independent jobs on a
//! rayon pool and results are written in seed-list order by a single
//! collector, so output is byte-identical for identical configs whatever the
//! job count. Every output directory gets:
//!
//! - `config.json`: the canonical config whose SHA-256 is the `config_hash`
//!   column,
//! - `runs.csv`: one [`RunRecord`] per seed,
//! - `timing.csv`: wall time per seed (kept apart so the other files stay
//!   reproducible),
//!
//! plus kind-specific tables (`curve.csv`, `transfer.csv`, `nfce.csv`,
//! `concentration.csv`, `mass.csv`, `summary.csv`).

pub mod config;

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learners::{self_play_with, LearnerKind, StrategyPool};
use crate::lowerbound::{check_concentration, sample_embedding};
use crate::reduction::{run_pipeline, PipelineConfig, PipelineOutcome};
use crate::regret::io::write_transcript_dir;
use crate::regret::{external_regret, nfce_gap, swap_regret, NPlayerGame, Transcript};
use crate::seed::{rng, Purpose};
use crate::treeform::{UtilityVector, DEFAULT_ENUMERATION_CAP};

pub use config::{
    validate, DynamicsAdversary, DynamicsPlan, EmbeddingPlan, ExperimentKind, GameSource, LearnerSettings, LemmaCheck,
    LemmaPlan, LowerBoundPlan, NfcePlan, Plan, RunConfig, ValidatedConfig,
};

/// Slack allowed on the correlated-equilibrium gap versus swap regret (the
/// two are equal up to rounding).
pub const NFCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    pub swap_regret: Option<f64>,
    pub external_regret: Option<f64>,
    pub w: Option<f64>,
    pub f_holds: Option<bool>,
    pub checks_ok: bool,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub records: Vec<RunRecord>,
    /// Human-readable description of every failed check.
    pub failures: Vec<String>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Validation,
    Runtime,
}

#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct RunError {
    pub stage: Stage,
    pub error: Error,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self.stage {
            Stage::Validation => EXIT_VALIDATION,
            Stage::Runtime => EXIT_RUNTIME,
        }
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    Ok(csv::Writer::from_writer(File::create(path)?))
}

fn pool_for(settings: &LearnerSettings, problem: Arc<crate::TreeFormProblem>, seed: u64) -> Result<StrategyPool> {
    let pool = match settings.pool_size {
        Some(size) => StrategyPool::sampled(problem, size, &mut rng(seed, Purpose::LearnerPool))?,
        None => StrategyPool::enumerated(problem, DEFAULT_ENUMERATION_CAP)?,
    };
    Ok(if settings.pool_growth { pool.with_growth() } else { pool })
}

fn parallel<T: Send>(seeds: &[u64], jobs: usize, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| seeds.par_iter().map(|&s| f(s)).collect())
}

/// Runs a validated config with `jobs` workers and writes all outputs.
pub fn run(v: &ValidatedConfig, jobs: usize) -> Result<RunSummary> {
    fs::create_dir_all(&v.out)?;
    fs::write(v.out.join("config.json"), v.config.canonical_json())?;
    let summary = match &v.plan {
        Plan::Dynamics(p) => run_dynamics(v, p, jobs)?,
        Plan::Lowerbound(p) => run_lowerbound(v, p, jobs)?,
        Plan::Lemmas(p) => run_lemma_campaign(v, p, jobs)?,
        Plan::Nfce(p) => run_nfce(v, p, jobs)?,
    };
    let mut runs = csv_writer(&v.out.join("runs.csv"))?;
    runs.write_record(["config_hash", "seed", "swap_regret", "external_regret", "W", "F_holds", "checks_ok"])?;
    let mut timing = csv_writer(&v.out.join("timing.csv"))?;
    timing.write_record(["seed", "wall_ms"])?;
    for r in &summary.records {
        runs.write_record([
            r.config_hash.clone(),
            r.seed.to_string(),
            opt(r.swap_regret),
            opt(r.external_regret),
            opt(r.w),
            opt(r.f_holds),
            r.checks_ok.to_string(),
        ])?;
        timing.write_record([r.seed.to_string(), format!("{:.3}", r.wall_time.as_secs_f64() * 1e3)])?;
    }
    runs.flush()?;
    timing.flush()?;
    Ok(summary)
}

/// Loads, validates and runs a config file. Relative paths in the config are
/// resolved against the file's directory.
pub fn run_file(path: &Path, seeds: Option<&str>, out: Option<&Path>, jobs: usize) -> std::result::Result<RunSummary, RunError> {
    let v = validate_file(path, seeds, out)?;
    run(&v, jobs).map_err(|error| RunError {
        stage: Stage::Runtime,
        error,
    })
}

pub fn validate_file(path: &Path, seeds: Option<&str>, out: Option<&Path>) -> std::result::Result<ValidatedConfig, RunError> {
    let base = path.parent().unwrap_or(Path::new("."));
    RunConfig::load(path)
        .and_then(|cfg| validate(&cfg, base, seeds, out))
        .map_err(|error| RunError {
            stage: Stage::Validation,
            error,
        })
}

fn dynamics_utilities(p: &DynamicsPlan, seed: u64) -> Result<Vec<UtilityVector>> {
    let m = p.problem.terminal_count();
    let mut r = rng(seed, Purpose::Utilities);
    (0..p.horizon)
        .map(|_| match p.adversary {
            DynamicsAdversary::UniformBasis => {
                let mut u = vec![0.0; m];
                u[r.gen_range(0..m)] = 1.0;
                UtilityVector::new(u)
            }
            DynamicsAdversary::Uniform => UtilityVector::new((0..m).map(|_| r.gen_range(-1.0..=1.0)).collect()),
            DynamicsAdversary::Constant => UtilityVector::new(p.utility.clone().expect("validated")),
        })
        .collect()
}

/// Round counts at which the regret curve is sampled.
fn checkpoints(horizon: usize, points: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=points).map(|k| (k * horizon).div_ceil(points)).collect();
    out.dedup();
    out
}

fn prefix(tr: &Transcript, t: usize) -> Result<Transcript> {
    Transcript::from_rounds(tr.problem().clone(), tr.rounds()[..t].to_vec())
}

struct DynamicsRun {
    swap: f64,
    external: f64,
    curve: Vec<(usize, f64, f64)>,
    wall: Duration,
}

pub fn run_dynamics(v: &ValidatedConfig, p: &DynamicsPlan, jobs: usize) -> Result<RunSummary> {
    let runs = parallel(&v.seeds, jobs, |seed| {
        let start = Instant::now();
        let utilities = dynamics_utilities(p, seed)?;
        let mut learner = p.learner.kind.build(pool_for(&p.learner, p.problem.clone(), seed)?, p.learner.rate);
        let tr = crate::learners::play(learner.as_mut(), p.problem.clone(), &utilities)?;
        if p.write_transcripts {
            write_transcript_dir(&tr, &v.out.join("transcripts").join(format!("seed-{seed}")))?;
        }
        let mut curve = Vec::new();
        for t in checkpoints(p.horizon, p.curve_points) {
            let pre = prefix(&tr, t)?;
            curve.push((t, swap_regret(&pre)?.0, external_regret(&pre)?));
        }
        let &(_, swap, external) = curve.last().expect("at least one checkpoint");
        Ok(DynamicsRun {
            swap,
            external,
            curve,
            wall: start.elapsed(),
        })
    })?;
    let mut out = csv_writer(&v.out.join("curve.csv"))?;
    out.write_record(["seed", "t", "swap_regret", "external_regret"])?;
    let mut summary = RunSummary::default();
    for (&seed, r) in v.seeds.iter().zip(&runs) {
        for (t, s, e) in &r.curve {
            out.write_record([seed.to_string(), t.to_string(), s.to_string(), e.to_string()])?;
        }
        summary.records.push(RunRecord {
            config_hash: v.hash.clone(),
            seed,
            swap_regret: Some(r.swap),
            external_regret: Some(r.external),
            w: None,
            f_holds: None,
            checks_ok: true,
            wall_time: r.wall,
        });
    }
    out.flush()?;
    Ok(summary)
}

fn pipeline_config(e: &EmbeddingPlan, horizon: usize, learner: &LearnerSettings) -> PipelineConfig {
    PipelineConfig {
        spec: e.spec.clone(),
        n: e.n,
        horizon,
        eps: e.eps,
        delta: e.delta,
        learner: learner.kind,
        rate: Some(learner.rate),
        pool_size: learner.pool_size.unwrap_or(DEFAULT_POOL_SIZE),
        pool_growth: learner.pool_growth,
        advance_prob: e.advance_prob,
    }
}

/// Initial pool size for lower-bound runs when `pool_size` is not set.
pub const DEFAULT_POOL_SIZE: usize = 64;

pub const TRANSFER_HEADER: [&str; 23] = [
    "seed",
    "d",
    "n",
    "M",
    "T",
    "eps",
    "delta",
    "W",
    "F_holds",
    "V_id",
    "Vbar_id",
    "V_phi",
    "Vbar_phibar",
    "swap_regret",
    "chain_i_ok",
    "chain_ii_ok",
    "chain_iii_ok",
    "slack_i",
    "slack_ii",
    "slack_iii",
    "eps_violations",
    "normal_form_regret",
    "order_violations",
];

pub fn transfer_row(o: &PipelineOutcome, e: &EmbeddingPlan) -> Vec<String> {
    let r = &o.report;
    vec![
        o.seed.to_string(),
        e.d.to_string(),
        e.n.to_string(),
        e.spec.action_count().to_string(),
        o.actions.len().to_string(),
        r.eps.to_string(),
        r.delta.to_string(),
        r.w.to_string(),
        r.f_holds.to_string(),
        r.v_id.to_string(),
        r.vbar_id.to_string(),
        r.v_phi.to_string(),
        r.vbar_phibar.to_string(),
        r.swap_regret.to_string(),
        r.chain_i.ok().to_string(),
        r.chain_ii.ok().to_string(),
        r.chain_iii.ok().to_string(),
        r.chain_i.slack.to_string(),
        r.chain_ii.slack.to_string(),
        r.chain_iii.slack.to_string(),
        r.epsilon_violations.to_string(),
        r.normal_form_regret().to_string(),
        (o.scan.order_violations + o.scan.reserved_uses + o.scan.out_of_range).to_string(),
    ]
}

pub fn run_lowerbound(v: &ValidatedConfig, p: &LowerBoundPlan, jobs: usize) -> Result<RunSummary> {
    let cfg = pipeline_config(&p.embedding, p.horizon, &p.learner);
    let runs = parallel(&v.seeds, jobs, |seed| {
        let start = Instant::now();
        let o = run_pipeline(&cfg, seed)?;
        Ok((o, start.elapsed()))
    })?;
    if p.export_embedding {
        let dir = v.out.join("embeddings");
        fs::create_dir_all(&dir)?;
        for &seed in &v.seeds {
            let emb = sample_embedding(&p.embedding.spec, p.embedding.d, p.embedding.n, seed)?;
            emb.write_csv(File::create(dir.join(format!("seed-{seed}.csv")))?)?;
        }
    }
    let mut out = csv_writer(&v.out.join("transfer.csv"))?;
    out.write_record(TRANSFER_HEADER)?;
    let mut summary = RunSummary::default();
    for (o, wall) in &runs {
        out.write_record(transfer_row(o, &p.embedding))?;
        let mut ok = o.report.passed();
        for f in o.report.failures() {
            summary.failures.push(format!("seed {}: {f}", o.seed));
        }
        if !o.scan.is_clean() {
            ok = false;
            summary.failures.push(format!("seed {}: adversary sequence {:?}", o.seed, o.scan));
        }
        summary.records.push(RunRecord {
            config_hash: v.hash.clone(),
            seed: o.seed,
            swap_regret: Some(o.report.swap_regret),
            external_regret: Some(o.external_regret),
            w: Some(o.report.w),
            f_holds: Some(o.report.f_holds),
            checks_ok: ok,
            wall_time: *wall,
        });
    }
    out.flush()?;
    Ok(summary)
}

/// Monte-Carlo estimate compared against a bound.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaSummary {
    pub metric: &'static str,
    pub runs: usize,
    pub estimate: f64,
    pub std_error: f64,
    pub bound: f64,
    pub ok: bool,
}

impl LemmaSummary {
    /// Failure frequency of event F against `delta`, with the binomial
    /// standard deviation at `delta`.
    pub fn concentration(failures: usize, runs: usize, delta: f64) -> Self {
        let p = delta.clamp(0.0, 1.0);
        let sd = (p * (1.0 - p) / runs as f64).sqrt();
        let estimate = failures as f64 / runs as f64;
        Self {
            metric: "concentration_failure_rate",
            runs,
            estimate,
            std_error: sd,
            bound: delta,
            ok: estimate <= delta + 3.0 * sd,
        }
    }

    /// Mean of `w` against `delta`, with the sample standard error.
    pub fn mass(w: &[f64], delta: f64) -> Self {
        let k = w.len() as f64;
        let mean = w.iter().sum::<f64>() / k;
        let var = if w.len() > 1 {
            w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)
        } else {
            0.0
        };
        let se = (var / k).sqrt();
        Self {
            metric: "mean_mass_before_reveal",
            runs: w.len(),
            estimate: mean,
            std_error: se,
            bound: delta,
            ok: mean <= delta + 3.0 * se,
        }
    }
}

struct LemmaRun {
    f_holds: Option<bool>,
    violations: usize,
    w: Option<f64>,
    wall: Duration,
}

pub fn run_lemma_campaign(v: &ValidatedConfig, p: &LemmaPlan, jobs: usize) -> Result<RunSummary> {
    let e = &p.embedding;
    let concentration = p.checks.contains(&LemmaCheck::Concentration);
    let mass = p.checks.contains(&LemmaCheck::Mass);
    let cfg = p.horizon.map(|t| pipeline_config(e, t, &p.learner));
    let runs = parallel(&v.seeds, jobs, |seed| {
        let start = Instant::now();
        let (f_holds, violations) = if concentration {
            let emb = sample_embedding(&e.spec, e.d, e.n, seed)?;
            let c = check_concentration(&emb, e.eps);
            (Some(c.holds), c.violations.len())
        } else {
            (None, 0)
        };
        let w = if mass {
            Some(run_pipeline(cfg.as_ref().expect("validated"), seed)?.report.w)
        } else {
            None
        };
        Ok(LemmaRun {
            f_holds,
            violations,
            w,
            wall: start.elapsed(),
        })
    })?;

    let mut summary = RunSummary::default();
    let mut lemmas = Vec::new();
    if concentration {
        let mut out = csv_writer(&v.out.join("concentration.csv"))?;
        out.write_record(["seed", "d", "n", "M", "eps", "F_holds", "violating_pairs"])?;
        for (&seed, r) in v.seeds.iter().zip(&runs) {
            out.write_record([
                seed.to_string(),
                e.d.to_string(),
                e.n.to_string(),
                e.spec.action_count().to_string(),
                e.eps.to_string(),
                opt(r.f_holds),
                r.violations.to_string(),
            ])?;
        }
        out.flush()?;
        let failures = runs.iter().filter(|r| r.f_holds == Some(false)).count();
        lemmas.push(LemmaSummary::concentration(failures, runs.len(), e.delta));
    }
    if mass {
        let mut out = csv_writer(&v.out.join("mass.csv"))?;
        out.write_record(["seed", "W"])?;
        for (&seed, r) in v.seeds.iter().zip(&runs) {
            out.write_record([seed.to_string(), opt(r.w)])?;
        }
        out.flush()?;
        let w: Vec<f64> = runs.iter().filter_map(|r| r.w).collect();
        lemmas.push(LemmaSummary::mass(&w, e.delta));
    }
    let mut out = csv_writer(&v.out.join("summary.csv"))?;
    out.write_record(["metric", "runs", "estimate", "std_error", "bound", "bound_plus_3se", "ok"])?;
    for s in &lemmas {
        out.write_record([
            s.metric.to_string(),
            s.runs.to_string(),
            s.estimate.to_string(),
            s.std_error.to_string(),
            s.bound.to_string(),
            (s.bound + 3.0 * s.std_error).to_string(),
            s.ok.to_string(),
        ])?;
        if !s.ok {
            summary.failures.push(format!(
                "{}: {} exceeds {} + 3 * {}",
                s.metric, s.estimate, s.bound, s.std_error
            ));
        }
    }
    out.flush()?;
    for (&seed, r) in v.seeds.iter().zip(&runs) {
        summary.records.push(RunRecord {
            config_hash: v.hash.clone(),
            seed,
            swap_regret: None,
            external_regret: None,
            w: r.w,
            f_holds: r.f_holds,
            checks_ok: lemmas.iter().all(|s| s.ok),
            wall_time: r.wall,
        });
    }
    Ok(summary)
}

/// Two-player game with payoffs uniform in `[-1, 1]`.
pub fn random_bimatrix(rows: usize, cols: usize, seed: u64) -> Result<NPlayerGame> {
    let mut r = rng(seed, Purpose::Game);
    let mut draw = || -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| (0..cols).map(|_| r.gen_range(-1.0..=1.0)).collect())
            .collect()
    };
    let a = draw();
    let b = draw();
    NPlayerGame::bimatrix(&a, &b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NfceRun {
    pub gaps: Vec<f64>,
    pub worst_gap: f64,
    pub swap_regrets: Vec<f64>,
    pub external_regrets: Vec<f64>,
}

impl NfceRun {
    pub fn max_swap_regret(&self) -> f64 {
        self.swap_regrets.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The gap of the empirical joint play is at most the largest swap regret.
    pub fn holds(&self) -> bool {
        self.worst_gap <= self.max_swap_regret() + NFCE_TOL
    }
}

/// One self-play run and its correlated-equilibrium accounting.
pub fn nfce_run(game: &NPlayerGame, learners: &[LearnerKind], rate: crate::learners::LearningRate, horizon: usize) -> Result<NfceRun> {
    let outcome = self_play_with(game, learners, rate, horizon)?;
    let report = nfce_gap(game, &outcome.joint)?;
    let mut swap_regrets = Vec::new();
    let mut external_regrets = Vec::new();
    for tr in &outcome.transcripts {
        swap_regrets.push(swap_regret(tr)?.0);
        external_regrets.push(external_regret(tr)?);
    }
    Ok(NfceRun {
        gaps: report.gap_per_player,
        worst_gap: report.worst_gap,
        swap_regrets,
        external_regrets,
    })
}

pub fn run_nfce(v: &ValidatedConfig, p: &NfcePlan, jobs: usize) -> Result<RunSummary> {
    let runs = parallel(&v.seeds, jobs, |seed| {
        let start = Instant::now();
        let game = match &p.game {
            GameSource::Random { rows, cols } => random_bimatrix(*rows, *cols, seed)?,
            GameSource::Fixed { a, b } => NPlayerGame::bimatrix(a, b)?,
        };
        Ok((nfce_run(&game, &p.learners, p.rate, p.horizon)?, start.elapsed()))
    })?;
    let mut out = csv_writer(&v.out.join("nfce.csv"))?;
    out.write_record([
        "seed",
        "gap_p1",
        "gap_p2",
        "worst_gap",
        "swap_regret_p1",
        "swap_regret_p2",
        "max_swap_regret",
        "gap_le_swap_regret",
    ])?;
    let mut summary = RunSummary::default();
    for (&seed, (r, wall)) in v.seeds.iter().zip(&runs) {
        out.write_record([
            seed.to_string(),
            r.gaps[0].to_string(),
            r.gaps[1].to_string(),
            r.worst_gap.to_string(),
            r.swap_regrets[0].to_string(),
            r.swap_regrets[1].to_string(),
            r.max_swap_regret().to_string(),
            r.holds().to_string(),
        ])?;
        if !r.holds() {
            summary.failures.push(format!(
                "seed {seed}: gap {} exceeds max swap regret {}",
                r.worst_gap,
                r.max_swap_regret()
            ));
        }
        summary.records.push(RunRecord {
            config_hash: v.hash.clone(),
            seed,
            swap_regret: Some(r.max_swap_regret()),
            external_regret: r.external_regrets.iter().copied().reduce(f64::max),
            w: None,
            f_holds: None,
            checks_ok: r.holds(),
            wall_time: *wall,
        });
    }
    out.flush()?;
    Ok(summary)
}

/// Prints a one-line summary per failure to `w`.
pub fn report_failures(summary: &RunSummary, mut w: impl Write) -> std::io::Result<()> {
    for f in &summary.failures {
        writeln!(w, "check failed: {f}")?;
    }
    Ok(())
}
