//! Run configuration files.
//!
//! A config is a TOML table of flat keys:
//!
//! ```toml
//! schema_version = 1
//! kind = "lowerbound"          # dynamics | lowerbound | lemmas | nfce
//! T = 200
//! seeds = "0..100"             # or a list [1, 2, 3], or `seed = 7`
//! learner = "hedge"            # blum_mansour | hedge | uniform
//! d = 3
//! n = 64                       # or auto_n = true
//! M = 16                       # or group_sizes = [5, 5, 5]
//! ```
//!
//! Unknown keys are rejected while parsing; keys that the chosen kind does
//! not use are rejected by [`validate`]. The full key list is in the README.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::learners::{LearnerKind, LearningRate};
use crate::lowerbound::{failure_bound, select_parameters, NormalFormAdversarySpec, DEFAULT_N_CAP};
use crate::treeform::format::parse_problem;
use crate::treeform::TreeFormProblem;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Dynamics,
    Lowerbound,
    Lemmas,
    Nfce,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    /// Half-open `"a..b"`.
    Range(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub kind: Option<ExperimentKind>,
    #[serde(rename = "T")]
    pub horizon: Option<usize>,
    pub seeds: Option<Seeds>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,

    pub learner: Option<String>,
    pub learners: Option<Vec<String>>,
    pub eta: Option<f64>,
    pub rate: Option<String>,
    pub pool_size: Option<usize>,
    pub pool_growth: Option<bool>,

    pub problem: Option<String>,
    pub problem_file: Option<PathBuf>,
    pub adversary: Option<String>,
    pub utility: Option<Vec<f64>>,
    pub curve_points: Option<usize>,
    pub write_transcripts: Option<bool>,

    pub d: Option<usize>,
    pub n: Option<usize>,
    pub auto_n: Option<bool>,
    #[serde(rename = "M")]
    pub actions: Option<usize>,
    pub group_sizes: Option<Vec<usize>>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub eps: Option<f64>,
    pub n_cap: Option<u64>,
    pub advance_prob: Option<f64>,
    pub export_embedding: Option<bool>,
    pub checks: Option<Vec<String>>,

    pub game: Option<String>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub payoff_a: Option<Vec<Vec<f64>>>,
    pub payoff_b: Option<Vec<Vec<f64>>>,
}

const COMMON_KEYS: &[&str] = &["schema_version", "kind", "T", "seeds", "seed", "out"];
const LEARNER_KEYS: &[&str] = &["learner", "eta", "rate", "pool_size", "pool_growth"];
const DYNAMICS_KEYS: &[&str] = &["problem", "problem_file", "adversary", "utility", "curve_points", "write_transcripts"];
const EMBEDDING_KEYS: &[&str] = &[
    "d", "n", "auto_n", "M", "group_sizes", "C", "eps", "n_cap", "adversary", "advance_prob",
];
const NFCE_KEYS: &[&str] = &["learner", "learners", "eta", "rate", "game", "rows", "cols", "payoff_a", "payoff_b"];

fn allowed_keys(kind: ExperimentKind) -> BTreeSet<&'static str> {
    let mut keys: BTreeSet<&str> = COMMON_KEYS.iter().copied().collect();
    let extra: &[&[&str]] = match kind {
        ExperimentKind::Dynamics => &[LEARNER_KEYS, DYNAMICS_KEYS],
        ExperimentKind::Lowerbound => &[LEARNER_KEYS, EMBEDDING_KEYS, &["export_embedding"]],
        ExperimentKind::Lemmas => &[LEARNER_KEYS, EMBEDDING_KEYS, &["checks"]],
        ExperimentKind::Nfce => &[NFCE_KEYS],
    };
    keys.extend(extra.iter().flat_map(|k| k.iter().copied()));
    keys
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Canonical JSON form: fixed key order, `null` for absent keys, output
    /// path dropped.
    pub fn canonical_json(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_string(&c).expect("config serializes")
    }

    /// SHA-256 of [`Self::canonical_json`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    fn set_keys(&self) -> Vec<String> {
        let value = serde_json::to_value(self).expect("config serializes");
        value
            .as_object()
            .expect("config is a table")
            .iter()
            .filter(|(_, v)| !v.is_null())
            .map(|(k, _)| k.clone())
            .collect()
    }
}

/// Parses `"a..b"` (half-open).
pub fn parse_seed_range(s: &str) -> Result<Vec<u64>> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::Config(format!("seed range {s:?} is not of the form a..b")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("bad seed bound {v:?} in {s:?}")))
    };
    let (a, b) = (parse(a)?, parse(b)?);
    if a >= b {
        return Err(Error::Config(format!("empty seed range {s:?}")));
    }
    Ok((a..b).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsAdversary {
    /// A uniformly random basis vector `e_z` each round.
    UniformBasis,
    /// Independent uniform entries in `[-1, 1]`.
    Uniform,
    /// The `utility` vector every round.
    Constant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSettings {
    pub kind: LearnerKind,
    pub rate: LearningRate,
    pub pool_size: Option<usize>,
    pub pool_growth: bool,
}

#[derive(Debug, Clone)]
pub struct DynamicsPlan {
    pub problem: Arc<TreeFormProblem>,
    pub horizon: usize,
    pub learner: LearnerSettings,
    pub adversary: DynamicsAdversary,
    pub utility: Option<Vec<f64>>,
    pub curve_points: usize,
    pub write_transcripts: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPlan {
    pub spec: NormalFormAdversarySpec,
    pub d: usize,
    pub n: usize,
    pub c: f64,
    pub eps: f64,
    pub delta: f64,
    pub advance_prob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundPlan {
    pub embedding: EmbeddingPlan,
    pub horizon: usize,
    pub learner: LearnerSettings,
    pub export_embedding: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaCheck {
    Concentration,
    Mass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaPlan {
    pub embedding: EmbeddingPlan,
    pub checks: Vec<LemmaCheck>,
    /// Needed for the mass check only.
    pub horizon: Option<usize>,
    pub learner: LearnerSettings,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GameSource {
    /// Payoffs uniform in `[-1, 1]`, drawn per seed.
    Random { rows: usize, cols: usize },
    Fixed { a: Vec<Vec<f64>>, b: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NfcePlan {
    pub game: GameSource,
    pub horizon: usize,
    pub learners: Vec<LearnerKind>,
    pub rate: LearningRate,
}

#[derive(Debug, Clone)]
pub enum Plan {
    Dynamics(DynamicsPlan),
    Lowerbound(LowerBoundPlan),
    Lemmas(LemmaPlan),
    Nfce(NfcePlan),
}

/// A config that passed validation, with everything resolved.
#[derive(Debug, Clone)]
pub struct ValidatedConfig {
    pub config: RunConfig,
    pub hash: String,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub plan: Plan,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn require<T: Clone>(v: &Option<T>, key: &str) -> Result<T> {
    v.clone().ok_or_else(|| invalid(format!("missing key `{key}`")))
}

fn positive(v: usize, key: &str) -> Result<usize> {
    if v == 0 {
        return Err(invalid(format!("`{key}` must be positive")));
    }
    Ok(v)
}

fn learner_settings(cfg: &RunConfig, horizon: usize) -> Result<LearnerSettings> {
    let kind: LearnerKind = cfg.learner.as_deref().unwrap_or("blum_mansour").parse()?;
    let rate = learning_rate(cfg, horizon)?;
    if let Some(0) = cfg.pool_size {
        return Err(invalid("`pool_size` must be positive"));
    }
    Ok(LearnerSettings {
        kind,
        rate,
        pool_size: cfg.pool_size,
        pool_growth: cfg.pool_growth.unwrap_or(false),
    })
}

fn learning_rate(cfg: &RunConfig, horizon: usize) -> Result<LearningRate> {
    match (cfg.eta, cfg.rate.as_deref()) {
        (Some(_), Some(_)) => Err(invalid("set either `eta` or `rate`, not both")),
        (Some(eta), None) if eta > 0.0 && eta.is_finite() => Ok(LearningRate::Fixed(eta)),
        (Some(eta), None) => Err(invalid(format!("`eta` must be positive, got {eta}"))),
        (None, None | Some("horizon")) => Ok(LearningRate::Horizon(horizon.max(1))),
        (None, Some("doubling")) => Ok(LearningRate::Doubling),
        (None, Some(other)) => Err(invalid(format!("unknown rate {other:?} (expected horizon | doubling)"))),
    }
}

fn embedding_plan(cfg: &RunConfig) -> Result<EmbeddingPlan> {
    let spec = match (&cfg.group_sizes, cfg.actions, cfg.d) {
        (Some(sizes), m, d) => {
            let spec = NormalFormAdversarySpec::new(sizes.clone())?;
            if m.is_some_and(|m| m != spec.action_count()) {
                return Err(invalid("`M` must equal sum(group_sizes) + 1"));
            }
            if d.is_some_and(|d| d != spec.groups()) {
                return Err(invalid("`d` must equal the number of groups"));
            }
            spec
        }
        (None, Some(m), Some(d)) => NormalFormAdversarySpec::even(d, m)?,
        _ => return Err(invalid("set `d` and `M`, or `group_sizes`")),
    };
    let d = spec.groups();
    let c = cfg.c.unwrap_or(1.0);
    if !(c >= 1.0 && c.is_finite()) {
        return Err(invalid(format!("`C` must be >= 1, got {c}")));
    }
    let n_cap = cfg.n_cap.unwrap_or(DEFAULT_N_CAP);
    let m = spec.action_count();
    let (n, eps, delta) = match (cfg.n, cfg.auto_n.unwrap_or(false)) {
        (Some(_), true) => return Err(invalid("set either `n` or `auto_n = true`, not both")),
        (None, false) => return Err(invalid("missing key `n` (or `auto_n = true`)")),
        (None, true) => {
            if cfg.eps.is_some() {
                return Err(invalid("`eps` is chosen by `auto_n`; remove it or set `n`"));
            }
            let p = select_parameters(c, d, m, n_cap)?;
            (p.n, p.eps, p.delta)
        }
        (Some(n), false) => {
            positive(n, "n")?;
            if n as u64 > n_cap {
                return Err(Error::Capacity {
                    what: "embedding dimension n".into(),
                    count: n as u128,
                    cap: n_cap as u128,
                });
            }
            let eps = cfg.eps.unwrap_or(1.0 / (4.0 * c * (d as f64).powi(6)));
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(invalid(format!("`eps` must be positive, got {eps}")));
            }
            (n, eps, failure_bound(m, n, eps))
        }
    };
    if let Some(adv) = cfg.adversary.as_deref() {
        if adv != "staircase" {
            return Err(invalid(format!("unknown embedded adversary {adv:?} (expected staircase)")));
        }
    }
    if let Some(p) = cfg.advance_prob {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("`advance_prob` must lie in [0, 1], got {p}")));
        }
    }
    Ok(EmbeddingPlan {
        spec,
        d,
        n,
        c,
        eps,
        delta,
        advance_prob: cfg.advance_prob,
    })
}

fn load_problem(cfg: &RunConfig, base: &Path) -> Result<TreeFormProblem> {
    match (&cfg.problem, &cfg.problem_file) {
        (Some(text), None) => parse_problem(text),
        (None, Some(path)) => parse_problem(&std::fs::read_to_string(base.join(path))?),
        _ => Err(invalid("set exactly one of `problem` and `problem_file`")),
    }
}

fn dynamics_plan(cfg: &RunConfig, base: &Path) -> Result<DynamicsPlan> {
    let horizon = positive(require(&cfg.horizon, "T")?, "T")?;
    let problem = Arc::new(load_problem(cfg, base)?);
    let adversary = match cfg.adversary.as_deref().unwrap_or("uniform_basis") {
        "uniform_basis" => DynamicsAdversary::UniformBasis,
        "uniform" => DynamicsAdversary::Uniform,
        "constant" => DynamicsAdversary::Constant,
        other => {
            return Err(invalid(format!(
                "unknown adversary {other:?} (expected uniform_basis | uniform | constant)"
            )))
        }
    };
    match (adversary, &cfg.utility) {
        (DynamicsAdversary::Constant, Some(u)) => {
            if u.len() != problem.terminal_count() {
                return Err(Error::Dimension {
                    expected: problem.terminal_count(),
                    got: u.len(),
                });
            }
            if u.iter().any(|v| !(v.abs() <= 1.0)) {
                return Err(invalid("`utility` entries must lie in [-1, 1]"));
            }
        }
        (DynamicsAdversary::Constant, None) => return Err(invalid("adversary `constant` needs `utility`")),
        (_, Some(_)) => return Err(invalid("`utility` is only used by adversary `constant`")),
        (_, None) => {}
    }
    Ok(DynamicsPlan {
        problem,
        horizon,
        learner: learner_settings(cfg, horizon)?,
        adversary,
        utility: cfg.utility.clone(),
        curve_points: positive(cfg.curve_points.unwrap_or(20), "curve_points")?,
        write_transcripts: cfg.write_transcripts.unwrap_or(false),
    })
}

fn lowerbound_plan(cfg: &RunConfig) -> Result<LowerBoundPlan> {
    let horizon = positive(require(&cfg.horizon, "T")?, "T")?;
    Ok(LowerBoundPlan {
        embedding: embedding_plan(cfg)?,
        horizon,
        learner: learner_settings(cfg, horizon)?,
        export_embedding: cfg.export_embedding.unwrap_or(false),
    })
}

fn lemma_plan(cfg: &RunConfig) -> Result<LemmaPlan> {
    let names = cfg
        .checks
        .clone()
        .unwrap_or_else(|| vec!["concentration".into(), "mass".into()]);
    let mut checks = Vec::new();
    for name in &names {
        let check = match name.as_str() {
            "concentration" => LemmaCheck::Concentration,
            "mass" => LemmaCheck::Mass,
            other => return Err(invalid(format!("unknown check {other:?} (expected concentration | mass)"))),
        };
        if !checks.contains(&check) {
            checks.push(check);
        }
    }
    if checks.is_empty() {
        return Err(invalid("`checks` is empty"));
    }
    let horizon = if checks.contains(&LemmaCheck::Mass) {
        Some(positive(require(&cfg.horizon, "T")?, "T")?)
    } else {
        cfg.horizon
    };
    Ok(LemmaPlan {
        embedding: embedding_plan(cfg)?,
        checks,
        horizon,
        learner: learner_settings(cfg, horizon.unwrap_or(1))?,
    })
}

fn matrix_shape(m: &[Vec<f64>], key: &str) -> Result<(usize, usize)> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(invalid(format!("`{key}` must be a nonempty rectangular matrix")));
    }
    if m.iter().flatten().any(|v| !(v.abs() <= 1.0)) {
        return Err(invalid(format!("`{key}` entries must lie in [-1, 1]")));
    }
    Ok((rows, cols))
}

fn nfce_plan(cfg: &RunConfig) -> Result<NfcePlan> {
    let horizon = positive(require(&cfg.horizon, "T")?, "T")?;
    let game = match cfg.game.as_deref() {
        Some("random") | None if cfg.payoff_a.is_none() && cfg.payoff_b.is_none() => GameSource::Random {
            rows: positive(cfg.rows.unwrap_or(3), "rows")?,
            cols: positive(cfg.cols.unwrap_or(3), "cols")?,
        },
        Some("matrix") | None => {
            let a = require(&cfg.payoff_a, "payoff_a")?;
            let b = require(&cfg.payoff_b, "payoff_b")?;
            if matrix_shape(&a, "payoff_a")? != matrix_shape(&b, "payoff_b")? {
                return Err(invalid("`payoff_a` and `payoff_b` differ in shape"));
            }
            if cfg.rows.is_some() || cfg.cols.is_some() {
                return Err(invalid("`rows`/`cols` are only used by game = \"random\""));
            }
            GameSource::Fixed { a, b }
        }
        Some("random") => return Err(invalid("game = \"random\" does not take payoff matrices")),
        Some(other) => return Err(invalid(format!("unknown game {other:?} (expected random | matrix)"))),
    };
    let learners = match (&cfg.learners, &cfg.learner) {
        (Some(_), Some(_)) => return Err(invalid("set either `learner` or `learners`, not both")),
        (Some(list), None) => list.iter().map(|s| s.parse()).collect::<Result<Vec<LearnerKind>>>()?,
        (None, single) => vec![single.as_deref().unwrap_or("blum_mansour").parse()?; 2],
    };
    if learners.len() != 2 {
        return Err(invalid("`learners` needs one entry per player (2)"));
    }
    Ok(NfcePlan {
        game,
        horizon,
        learners,
        rate: learning_rate(cfg, horizon)?,
    })
}

/// Checks every key and resolves the run plan. `base` is the directory
/// relative paths are resolved against; `seeds` and `out` override the
/// config's values.
pub fn validate(config: &RunConfig, base: &Path, seeds: Option<&str>, out: Option<&Path>) -> Result<ValidatedConfig> {
    if config.schema_version != SCHEMA_VERSION {
        return Err(invalid(format!(
            "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
            config.schema_version
        )));
    }
    let kind = require(&config.kind, "kind")?;
    let allowed = allowed_keys(kind);
    for key in config.set_keys() {
        if !allowed.contains(key.as_str()) {
            return Err(invalid(format!("key `{key}` is not used by kind {kind:?}")));
        }
    }

    let mut config = config.clone();
    if let Some(range) = seeds {
        config.seeds = Some(Seeds::Range(range.to_string()));
        config.seed = None;
    }
    let seed_list = match (&config.seeds, config.seed) {
        (Some(_), Some(_)) => return Err(invalid("set either `seeds` or `seed`, not both")),
        (Some(Seeds::List(v)), None) if !v.is_empty() => v.clone(),
        (Some(Seeds::List(_)), None) => return Err(invalid("`seeds` is empty")),
        (Some(Seeds::Range(r)), None) => parse_seed_range(r)?,
        (None, Some(s)) => vec![s],
        (None, None) => vec![0],
    };
    let out = out
        .map(Path::to_path_buf)
        .or_else(|| config.out.clone().map(|p| base.join(p)))
        .unwrap_or_else(|| PathBuf::from("swapreg-out"));

    let plan = match kind {
        ExperimentKind::Dynamics => Plan::Dynamics(dynamics_plan(&config, base)?),
        ExperimentKind::Lowerbound => Plan::Lowerbound(lowerbound_plan(&config)?),
        ExperimentKind::Lemmas => Plan::Lemmas(lemma_plan(&config)?),
        ExperimentKind::Nfce => Plan::Nfce(nfce_plan(&config)?),
    };
    Ok(ValidatedConfig {
        hash: config.hash(),
        config,
        seeds: seed_list,
        out,
        plan,
    })
}
