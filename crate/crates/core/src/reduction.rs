//! Transfer of regret from the embedded tree-form problem back to the
//! normal-form problem, as per-run checks.
//!
//! Every tree-form strategy `x` is projected to a distribution `p_x` over
//! normal-form actions: a point mass on `a*` when `x` correlates with no
//! codeword by more than `eps`, otherwise `a_{ij}` with probability
//! `beta = <x, psi(a_{ij})>` for the largest such `j` and `a*` with the rest.
//! Playing `p_x` whenever the tree-form learner plays `x` gives a normal-form
//! learner; its best swap deviation lifts back to a tree-form deviation. The
//! per-run inequalities
//!
//! - (i)   `V(Id) <= Vbar(Id) + eps + 2W` (always),
//! - (ii)  `V(phi) >= Vbar(phibar) - eps - 2W` (when event F holds),
//! - (iii) `SwapRegret >= Vbar(phibar) - Vbar(Id) - 2 eps - 4W` (when F holds)
//!
//! are checked with the realized mass-before-reveal `W`.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::learners::{play, LearnerKind, LearningRate, StrategyPool};
use crate::lowerbound::{
    check_concentration, embedded_adversary, sample_embedding, scan_sequence, EmbeddingInstance,
    NormalFormAdversary, NormalFormAdversarySpec, SequenceScan, Staircase,
};
use crate::regret::{external_regret, realized_value, swap_regret, value_of_deviation, DeviationFunction, Transcript};
use crate::seed::{rng, Purpose};
use crate::treeform::{MixedStrategy, PureStrategy, PROB_TOL};

/// Slack below zero tolerated before an inequality is reported as failed
/// (floating-point accumulation over `T` rounds).
pub const CHAIN_TOL: f64 = 1e-9;
/// Tolerance on the per-round utility-transfer bound. Both sides are exact
/// multiples of `1/n` up to rounding.
pub const EPSILON_BOUND_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionCase {
    NoMatch,
    /// Group `i`, position `j` (0-based), `beta = <x, psi(a_{ij})>`.
    Match { i: usize, j: usize, beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedStrategy {
    pub case: ProjectionCase,
    /// `p_x` as `(action, probability)`, zero-probability actions omitted.
    pub dist: Vec<(usize, f64)>,
}

impl ProjectedStrategy {
    /// `p_x(a)`.
    pub fn prob(&self, a: usize) -> f64 {
        self.dist.iter().filter(|(b, _)| *b == a).map(|(_, p)| p).sum()
    }
}

pub type Projections = HashMap<PureStrategy, ProjectedStrategy>;

pub fn project_strategy(x: &PureStrategy, emb: &EmbeddingInstance, eps: f64) -> Result<ProjectedStrategy> {
    let scaled = emb.scaled(x)?;
    let spec = emb.spec();
    let reserved = spec.reserved();
    let i = scaled.row();
    // codewords of other rows are orthogonal to x, so only row i can match
    let matched = (0..spec.group_sizes()[i])
        .rev()
        .map(|j| (j, scaled.dot(emb.psi(spec.action(i, j)))))
        .find(|&(_, ip)| ip > eps);
    Ok(match matched {
        None => ProjectedStrategy {
            case: ProjectionCase::NoMatch,
            dist: vec![(reserved, 1.0)],
        },
        Some((j, beta)) => {
            assert!(beta <= 1.0, "inner product of unit vectors exceeds one: {beta}");
            let a = spec.action(i, j);
            let dist = if beta == 1.0 {
                vec![(a, 1.0)]
            } else {
                vec![(reserved, 1.0 - beta), (a, beta)]
            };
            ProjectedStrategy {
                case: ProjectionCase::Match { i, j, beta },
                dist,
            }
        }
    })
}

/// Projections of every strategy in the transcript's supports.
pub fn project_supports(tr: &Transcript, emb: &EmbeddingInstance, eps: f64) -> Result<Projections> {
    tr.supported_strategies()
        .into_iter()
        .map(|x| project_strategy(&x, emb, eps).map(|p| (x, p)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstPlayTimes {
    /// 1-based first round each non-reserved action is played, `T` if never.
    pub t_action: Vec<usize>,
    /// `0` for unmatched strategies, else the first-play time of the matched
    /// action.
    pub t_x: HashMap<PureStrategy, usize>,
}

impl FirstPlayTimes {
    pub fn of_action(&self, a: usize) -> usize {
        self.t_action[a]
    }

    pub fn of_strategy(&self, x: &PureStrategy) -> Option<usize> {
        self.t_x.get(x).copied()
    }
}

pub fn compute_first_play_times(emb: &EmbeddingInstance, actions: &[usize], projections: &Projections) -> FirstPlayTimes {
    let horizon = actions.len();
    let spec = emb.spec();
    let mut t_action = vec![horizon; spec.reserved()];
    let mut seen = vec![false; spec.reserved()];
    for (t, &a) in actions.iter().enumerate() {
        if a < spec.reserved() && !seen[a] {
            seen[a] = true;
            t_action[a] = t + 1;
        }
    }
    let t_x = projections
        .iter()
        .map(|(x, p)| {
            let t = match p.case {
                ProjectionCase::NoMatch => 0,
                ProjectionCase::Match { i, j, .. } => t_action[spec.action(i, j)],
            };
            (x.clone(), t)
        })
        .collect();
    FirstPlayTimes { t_action, t_x }
}

fn projection<'p>(projections: &'p Projections, x: &PureStrategy) -> Result<&'p ProjectedStrategy> {
    projections
        .get(x)
        .ok_or_else(|| Error::Contract(format!("no projection for supported strategy {x:?}")))
}

/// `pibar^t = sum_x pi^t(x) p_x`, one dense distribution over the `M`
/// actions per round.
pub fn simulate_normalform_learner(tr: &Transcript, projections: &Projections, action_count: usize) -> Result<Vec<Vec<f64>>> {
    tr.rounds()
        .iter()
        .map(|(pi, _)| {
            let mut bar = vec![0.0; action_count];
            for (x, p) in pi.entries() {
                for &(a, q) in &projection(projections, x)?.dist {
                    bar[a] += p * q;
                }
            }
            Ok(bar)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonViolation {
    pub strategy: PureStrategy,
    /// 1-based round.
    pub round: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Every `(x, t)` with `t > t_x` and `<x, u~^t> > p_x(u^t) + eps`.
pub fn check_epsilon_bound(
    tr: &Transcript,
    actions: &[usize],
    eps: f64,
    projections: &Projections,
    times: &FirstPlayTimes,
) -> Result<Vec<EpsilonViolation>> {
    check_dim(tr.len(), actions.len())?;
    let mut out = Vec::new();
    for (k, ((pi, u), &a)) in tr.rounds().iter().zip(actions).enumerate() {
        let t = k + 1;
        for (x, _) in pi.entries() {
            let tx = times
                .of_strategy(x)
                .ok_or_else(|| Error::Contract(format!("no reveal time for {x:?}")))?;
            if t <= tx {
                continue;
            }
            let lhs = x.dot(u);
            let rhs = projection(projections, x)?.prob(a) + eps;
            if lhs > rhs + EPSILON_BOUND_TOL {
                out.push(EpsilonViolation {
                    strategy: x.clone(),
                    round: t,
                    lhs,
                    rhs,
                });
            }
        }
    }
    Ok(out)
}

/// `W = (1/T) sum_x sum_{t <= t_x} pi^t(x)`.
pub fn mass_before_reveal(tr: &Transcript, times: &FirstPlayTimes) -> Result<f64> {
    if tr.is_empty() {
        return Err(Error::InvalidDistribution("empty transcript".into()));
    }
    let mut total = 0.0;
    for (k, (pi, _)) in tr.rounds().iter().enumerate() {
        for (x, p) in pi.entries() {
            let tx = times
                .of_strategy(x)
                .ok_or_else(|| Error::Contract(format!("no reveal time for {x:?}")))?;
            if k < tx {
                total += p;
            }
        }
    }
    Ok(total / tr.len() as f64)
}

/// `Vbar(phi) = (1/T) sum_t sum_a pibar^t(a) 1{phi(a) = u^t}`.
pub fn normal_form_value(pibar: &[Vec<f64>], actions: &[usize], phi: &[usize]) -> f64 {
    let total: f64 = pibar
        .iter()
        .zip(actions)
        .map(|(bar, &u)| {
            bar.iter()
                .zip(phi)
                .filter(|(_, &target)| target == u)
                .map(|(p, _)| p)
                .sum::<f64>()
        })
        .sum();
    total / actions.len().max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormDeviation {
    /// `phibar(a)` for every action.
    pub map: Vec<usize>,
    pub value: f64,
    pub identity_value: f64,
}

/// Best swap deviation of the normal-form learner, per action: each `a` goes
/// to the action it was most often paired with as the adversary's play,
/// weighted by `pibar^t(a)`. Ties go to the lowest action index.
pub fn best_normalform_deviation(pibar: &[Vec<f64>], actions: &[usize]) -> Result<NormalFormDeviation> {
    check_dim(pibar.len(), actions.len())?;
    let m = pibar.first().map_or(0, Vec::len);
    let mut score = vec![vec![0.0; m]; m];
    for (bar, &u) in pibar.iter().zip(actions) {
        check_dim(m, bar.len())?;
        if u >= m {
            return Err(Error::Contract(format!("action {u} out of range")));
        }
        for (a, &p) in bar.iter().enumerate() {
            score[a][u] += p;
        }
    }
    let horizon = actions.len().max(1) as f64;
    let mut map = Vec::with_capacity(m);
    let (mut value, mut identity_value) = (0.0, 0.0);
    for (a, row) in score.iter().enumerate() {
        let mut best = 0;
        for b in 1..m {
            if row[b] > row[best] {
                best = b;
            }
        }
        map.push(best);
        value += row[best];
        identity_value += row[a];
    }
    Ok(NormalFormDeviation {
        map,
        value: value / horizon,
        identity_value: identity_value / horizon,
    })
}

/// `phi(x) = E_{a ~ p_x} psi(phibar(a))`, as a convex combination of pure
/// strategies of the tree-form problem.
pub fn lift_deviation(phibar: &[usize], emb: &EmbeddingInstance, projections: &Projections) -> Result<DeviationFunction> {
    check_dim(emb.spec().action_count(), phibar.len())?;
    let mut phi = DeviationFunction::new();
    for (x, p) in projections {
        let image = p
            .dist
            .iter()
            .map(|&(a, q)| (emb.realization(phibar[a]), q))
            .collect();
        phi.set(x.clone(), MixedStrategy::new(image)?);
    }
    Ok(phi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityCheck {
    /// Right side minus left side; nonnegative when the inequality holds.
    pub slack: f64,
    /// Whether the inequality is asserted for this run.
    pub required: bool,
}

impl InequalityCheck {
    pub fn holds(&self) -> bool {
        self.slack >= -CHAIN_TOL
    }

    /// Holds, or is not required.
    pub fn ok(&self) -> bool {
        self.holds() || !self.required
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub v_id: f64,
    pub vbar_id: f64,
    pub v_phi: f64,
    pub vbar_phibar: f64,
    pub w: f64,
    pub eps: f64,
    pub delta: f64,
    pub f_holds: bool,
    pub swap_regret: f64,
    pub chain_i: InequalityCheck,
    pub chain_ii: InequalityCheck,
    pub chain_iii: InequalityCheck,
    pub epsilon_violations: usize,
    pub phibar: Vec<usize>,
}

impl TransferReport {
    pub fn passed(&self) -> bool {
        self.chain_i.ok() && self.chain_ii.ok() && self.chain_iii.ok() && self.epsilon_violations == 0
    }

    /// `Vbar(phibar) - Vbar(Id)`: swap regret of the simulated normal-form
    /// learner.
    pub fn normal_form_regret(&self) -> f64 {
        self.vbar_phibar - self.vbar_id
    }

    /// Names of the inequalities that failed, with slacks.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, c) in [("i", self.chain_i), ("ii", self.chain_ii), ("iii", self.chain_iii)] {
            if !c.ok() {
                out.push(format!("chain ({name}) slack {:e}", c.slack));
            }
        }
        if self.epsilon_violations > 0 {
            out.push(format!("{} utility-transfer violations", self.epsilon_violations));
        }
        out
    }
}

/// Runs the whole reduction for one transcript played against the embedded
/// sequence `actions`.
pub fn transfer_report(tr: &Transcript, emb: &EmbeddingInstance, actions: &[usize], eps: f64, delta: f64) -> Result<TransferReport> {
    check_dim(tr.len(), actions.len())?;
    if tr.problem().as_ref() != emb.problem().as_ref() {
        return Err(Error::Contract("transcript was not played on the embedding's problem".into()));
    }
    let expected = embedded_adversary(emb, actions)?;
    if tr.rounds().iter().zip(&expected).any(|((_, u), e)| u != e) {
        return Err(Error::Contract("transcript utilities differ from the embedded sequence".into()));
    }

    let projections = project_supports(tr, emb, eps)?;
    let times = compute_first_play_times(emb, actions, &projections);
    let pibar = simulate_normalform_learner(tr, &projections, emb.spec().action_count())?;
    for bar in &pibar {
        let s: f64 = bar.iter().sum();
        debug_assert!((s - 1.0).abs() <= PROB_TOL, "pibar mass {s}");
    }
    let nf = best_normalform_deviation(&pibar, actions)?;
    let lifted = lift_deviation(&nf.map, emb, &projections)?;

    let v_id = realized_value(tr)?;
    let v_phi = value_of_deviation(tr, &lifted)?;
    let w = mass_before_reveal(tr, &times)?;
    let f_holds = check_concentration(emb, eps).holds;
    let (swap, _) = swap_regret(tr)?;
    let violations = check_epsilon_bound(tr, actions, eps, &projections, &times)?;

    let chain_i = InequalityCheck {
        slack: nf.identity_value + eps + 2.0 * w - v_id,
        required: true,
    };
    let chain_ii = InequalityCheck {
        slack: v_phi - (nf.value - eps - 2.0 * w),
        required: f_holds,
    };
    let chain_iii = InequalityCheck {
        slack: swap - (nf.value - nf.identity_value - 2.0 * eps - 4.0 * w),
        required: f_holds,
    };
    Ok(TransferReport {
        v_id,
        vbar_id: nf.identity_value,
        v_phi,
        vbar_phibar: nf.value,
        w,
        eps,
        delta,
        f_holds,
        swap_regret: swap,
        chain_i,
        chain_ii,
        chain_iii,
        epsilon_violations: violations.len(),
        phibar: nf.map,
    })
}

/// Everything needed to run learner-vs-embedded-adversary once per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub spec: NormalFormAdversarySpec,
    pub n: usize,
    pub horizon: usize,
    pub eps: f64,
    pub delta: f64,
    pub learner: LearnerKind,
    /// `None`: horizon-tuned.
    pub rate: Option<LearningRate>,
    /// Random strategies in the learner's initial pool.
    pub pool_size: usize,
    /// Add the best response to each observed utility to the pool.
    pub pool_growth: bool,
    /// `None`: [`Staircase::default_advance_prob`].
    pub advance_prob: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub seed: u64,
    pub report: TransferReport,
    pub scan: SequenceScan,
    pub saturations: usize,
    pub external_regret: f64,
    pub transcript: Transcript,
    pub actions: Vec<usize>,
}

/// Samples the embedding and the staircase sequence, runs the learner on a
/// seeded pool and produces the transfer report.
pub fn run_pipeline(cfg: &PipelineConfig, seed: u64) -> Result<PipelineOutcome> {
    let d = cfg.spec.groups();
    let emb = sample_embedding(&cfg.spec, d, cfg.n, seed)?;
    let p = cfg
        .advance_prob
        .unwrap_or_else(|| Staircase::default_advance_prob(&cfg.spec, cfg.horizon));
    let sample = Staircase::new(p)?.sample(&cfg.spec, cfg.horizon, &mut rng(seed, Purpose::Adversary));
    let scan = scan_sequence(&cfg.spec, &sample.actions);
    let utilities = embedded_adversary(&emb, &sample.actions)?;

    let problem = Arc::clone(emb.problem());
    let mut pool = StrategyPool::sampled(problem.clone(), cfg.pool_size, &mut rng(seed, Purpose::LearnerPool))?;
    if cfg.pool_growth {
        pool = pool.with_growth();
    }
    let rate = cfg.rate.unwrap_or(LearningRate::Horizon(cfg.horizon));
    let mut learner = cfg.learner.build(pool, rate);
    let tr = play(learner.as_mut(), problem, &utilities)?;

    let report = transfer_report(&tr, &emb, &sample.actions, cfg.eps, cfg.delta)?;
    Ok(PipelineOutcome {
        seed,
        external_regret: external_regret(&tr)?,
        report,
        scan,
        saturations: sample.saturations,
        transcript: tr,
        actions: sample.actions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lowerbound::ScaledStrategy;
    use crate::treeform::UtilityVector;

    fn signs(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == '+').collect()
    }

    /// d = 1, n = 4, two actions in the group plus a*.
    fn toy() -> EmbeddingInstance {
        let spec = NormalFormAdversarySpec::new(vec![2]).unwrap();
        EmbeddingInstance::from_codewords(
            spec,
            4,
            vec![
                ScaledStrategy::new(0, signs("++--")),
                ScaledStrategy::new(0, signs("+++-")),
            ],
            ScaledStrategy::new(0, signs("+-+-")),
        )
        .unwrap()
    }

    fn all_plus() -> PureStrategy {
        ScaledStrategy::new(0, signs("++++")).to_realization(1)
    }

    #[test]
    fn projection_cases() {
        let emb = toy();
        let p = project_strategy(&all_plus(), &emb, 0.25).unwrap();
        assert_eq!(p.case, ProjectionCase::Match { i: 0, j: 1, beta: 0.5 });
        assert_eq!(p.dist, vec![(2, 0.5), (1, 0.5)]);

        let exact = project_strategy(&emb.realization(1), &emb, 0.25).unwrap();
        assert_eq!(exact.case, ProjectionCase::Match { i: 0, j: 1, beta: 1.0 });
        assert_eq!(exact.dist, vec![(1, 1.0)]);

        let x = ScaledStrategy::new(0, signs("-+-+")).to_realization(1);
        // <x, a_1> = 0, <x, a_2> = -0.5
        let p = project_strategy(&x, &emb, 0.25).unwrap();
        assert_eq!(p.case, ProjectionCase::NoMatch);
        assert_eq!(p.dist, vec![(2, 1.0)]);
    }

    #[test]
    fn first_play_times_by_scan() {
        let spec = NormalFormAdversarySpec::new(vec![2, 1]).unwrap();
        let emb = sample_embedding(&spec, 2, 4, 0).unwrap();
        let times = compute_first_play_times(&emb, &[0, 0, 1], &Projections::new());
        assert_eq!(times.t_action, vec![1, 3, 3]);
        let times = compute_first_play_times(&emb, &[2], &Projections::new());
        assert_eq!(times.t_action, vec![1, 1, 1]);
    }

    fn toy_transcript(emb: &EmbeddingInstance, rounds: &[(Vec<(PureStrategy, f64)>, usize)]) -> Transcript {
        Transcript::from_rounds(
            emb.problem().clone(),
            rounds
                .iter()
                .map(|(pi, a)| (MixedStrategy::new(pi.clone()).unwrap(), emb.utility(*a).unwrap()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn simulated_learner_is_linear() {
        let emb = toy();
        let nomatch = ScaledStrategy::new(0, signs("-+-+")).to_realization(1);
        let tr = toy_transcript(
            &emb,
            &[
                (vec![(nomatch.clone(), 1.0)], 0),
                (vec![(all_plus(), 1.0)], 0),
                (vec![(nomatch, 0.4), (all_plus(), 0.6)], 0),
            ],
        );
        let proj = project_supports(&tr, &emb, 0.25).unwrap();
        let bar = simulate_normalform_learner(&tr, &proj, 3).unwrap();
        assert_eq!(bar[0], vec![0.0, 0.0, 1.0]);
        assert_eq!(bar[1], vec![0.0, 0.5, 0.5]);
        assert!((bar[2][2] - 0.7).abs() < 1e-15 && (bar[2][1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn mass_before_reveal_examples() {
        let emb = toy();
        // the matched action (index 1) is played at t = 1
        let tr = toy_transcript(&emb, &[(vec![(all_plus(), 1.0)], 1), (vec![(all_plus(), 1.0)], 1)]);
        let proj = project_supports(&tr, &emb, 0.25).unwrap();
        let times = compute_first_play_times(&emb, &[1, 1], &proj);
        assert_eq!(times.of_strategy(&all_plus()), Some(1));
        assert_eq!(mass_before_reveal(&tr, &times).unwrap(), 0.5);

        let nomatch = ScaledStrategy::new(0, signs("-+-+")).to_realization(1);
        let tr = toy_transcript(&emb, &[(vec![(nomatch, 1.0)], 1)]);
        let proj = project_supports(&tr, &emb, 0.25).unwrap();
        let times = compute_first_play_times(&emb, &[1], &proj);
        assert_eq!(mass_before_reveal(&tr, &times).unwrap(), 0.0);
    }

    #[test]
    fn epsilon_bound_on_matching_round() {
        let emb = toy();
        let tr = toy_transcript(
            &emb,
            &[(vec![(all_plus(), 1.0)], 1), (vec![(all_plus(), 1.0)], 1), (vec![(all_plus(), 1.0)], 1)],
        );
        let proj = project_supports(&tr, &emb, 0.25).unwrap();
        let times = compute_first_play_times(&emb, &[1, 1, 1], &proj);
        assert!(check_epsilon_bound(&tr, &[1, 1, 1], 0.25, &proj, &times).unwrap().is_empty());
        // lhs = beta = p_x(u^t) on those rounds
        let (_, u) = &tr.rounds()[2];
        assert_eq!(all_plus().dot(u), 0.5);
        assert_eq!(proj[&all_plus()].prob(1), 0.5);
    }

    #[test]
    fn epsilon_bound_flags_order_violations() {
        // after a_2 is revealed, replaying a_1 breaks the increasing order;
        // x matching only a_1 (largest matched index 0) then sees utility 1
        // while p_x(a_1) = 1 too, so use x matching both codewords instead.
        let spec = NormalFormAdversarySpec::new(vec![2]).unwrap();
        let emb = EmbeddingInstance::from_codewords(
            spec,
            4,
            vec![ScaledStrategy::new(0, signs("++++")), ScaledStrategy::new(0, signs("+++-"))],
            ScaledStrategy::new(0, signs("+-+-")),
        )
        .unwrap();
        let x = emb.realization(0);
        // <x, a_1> = 1, <x, a_2> = 0.5 -> matched j = 2 (index 1), beta 0.5
        let actions = [1, 0];
        let tr = toy_transcript(&emb, &[(vec![(x.clone(), 1.0)], 1), (vec![(x.clone(), 1.0)], 0)]);
        let proj = project_supports(&tr, &emb, 0.25).unwrap();
        let times = compute_first_play_times(&emb, &actions, &proj);
        let v = check_epsilon_bound(&tr, &actions, 0.25, &proj, &times).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].round, 2);
        assert_eq!(v[0].lhs, 1.0);
    }

    #[test]
    fn best_deviation_examples() {
        // pibar on a* every round, adversary plays action 0 -> phibar(a*) = 0
        let pibar = vec![vec![0.0, 0.0, 1.0]; 4];
        let nf = best_normalform_deviation(&pibar, &[0, 0, 0, 0]).unwrap();
        assert_eq!(nf.map[2], 0);
        assert_eq!(nf.value, 1.0);
        assert_eq!(nf.identity_value, 0.0);
        // learner already matches the adversary
        let pibar = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let nf = best_normalform_deviation(&pibar, &[0, 1]).unwrap();
        assert_eq!(nf.value, nf.identity_value);
    }

    #[test]
    fn best_deviation_matches_exhaustive_search() {
        use rand::{Rng, SeedableRng};
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let m = r.gen_range(1..=4);
            let t = r.gen_range(1..=5);
            let pibar: Vec<Vec<f64>> = (0..t)
                .map(|_| {
                    let w: Vec<f64> = (0..m).map(|_| r.gen_range(0..4) as f64).collect();
                    let s: f64 = w.iter().sum::<f64>().max(1.0);
                    let mut w: Vec<f64> = w.iter().map(|v| v / s).collect();
                    if w.iter().sum::<f64>() == 0.0 {
                        w[0] = 1.0;
                    }
                    w
                })
                .collect();
            let actions: Vec<usize> = (0..t).map(|_| r.gen_range(0..m)).collect();
            let nf = best_normalform_deviation(&pibar, &actions).unwrap();
            let mut best = f64::NEG_INFINITY;
            for code in 0..m.pow(m as u32) {
                let phi: Vec<usize> = (0..m).map(|a| (code / m.pow(a as u32)) % m).collect();
                best = best.max(normal_form_value(&pibar, &actions, &phi));
            }
            assert!((nf.value - best).abs() <= 1e-12, "{} vs {}", nf.value, best);
            assert!((normal_form_value(&pibar, &actions, &nf.map) - nf.value).abs() <= 1e-12);
        }
    }

    #[test]
    fn lift_examples() {
        let emb = toy();
        let mut proj = Projections::new();
        let x = all_plus();
        proj.insert(x.clone(), project_strategy(&x, &emb, 0.25).unwrap());
        // both a* and a_2 go to a_1: the image is psi(a_1)
        let phi = lift_deviation(&[0, 0, 0], &emb, &proj).unwrap();
        assert_eq!(phi.image(&x).unwrap(), &MixedStrategy::point(emb.realization(0)));
        // identity on a point mass
        let y = emb.realization(1);
        proj.insert(y.clone(), project_strategy(&y, &emb, 0.25).unwrap());
        let phi = lift_deviation(&[0, 1, 2], &emb, &proj).unwrap();
        assert_eq!(phi.image(&y).unwrap(), &MixedStrategy::point(y.clone()));
    }

    #[test]
    fn lifted_value_matches_hand_expansion() {
        let emb = toy();
        let nomatch = ScaledStrategy::new(0, signs("-+-+")).to_realization(1);
        let tr = toy_transcript(
            &emb,
            &[
                (vec![(all_plus(), 0.3), (nomatch.clone(), 0.7)], 0),
                (vec![(all_plus(), 0.6), (nomatch.clone(), 0.4)], 1),
            ],
        );
        let proj = project_supports(&tr, &emb, 0.25).unwrap();
        let phibar = [1, 0, 1];
        let phi = lift_deviation(&phibar, &emb, &proj).unwrap();
        // V(phi) = 1/T sum_t sum_x pi^t(x) sum_a p_x(a) <psi(phibar(a)), psi(u^t)>
        // with the scaled inner products <psi(1), psi(0)> = 0.5, <psi(0), psi(1)> = 0.5:
        // all_plus: p = {a*: .5, a_2: .5} -> phibar: a* -> a_2, a_2 -> a_1
        // nomatch:  p = {a*: 1}           -> a_2
        let ip = |a: usize, b: usize| emb.psi(a).dot(emb.psi(b));
        let t1 = 0.3 * (0.5 * ip(1, 0) + 0.5 * ip(0, 0)) + 0.7 * ip(1, 0);
        let t2 = 0.6 * (0.5 * ip(1, 1) + 0.5 * ip(0, 1)) + 0.4 * ip(1, 1);
        let hand = (t1 + t2) / 2.0;
        assert!((value_of_deviation(&tr, &phi).unwrap() - hand).abs() < 1e-15);
        assert!((hand - (0.3 * 0.75 + 0.7 * 0.5 + 0.6 * 0.75 + 0.4) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn single_round_report_by_hand() {
        let emb = toy();
        let tr = toy_transcript(&emb, &[(vec![(all_plus(), 1.0)], 0)]);
        let r = transfer_report(&tr, &emb, &[0], 0.25, 0.0).unwrap();
        assert_eq!(r.v_id, 0.0);
        assert_eq!(r.vbar_id, 0.0);
        assert_eq!(r.vbar_phibar, 1.0);
        assert_eq!(r.v_phi, 1.0);
        assert_eq!(r.w, 1.0);
        assert_eq!(r.swap_regret, 1.0);
        assert!(!r.f_holds);
        assert_eq!(r.chain_i.slack, 2.25);
        assert_eq!(r.chain_ii.slack, 2.25);
        assert_eq!(r.chain_iii.slack, 4.5);
        assert!(r.passed());
    }

    #[test]
    fn unmatched_play_keeps_chain_i_with_zero_mass() {
        let spec = NormalFormAdversarySpec::new(vec![3, 3]).unwrap();
        let emb = sample_embedding(&spec, 2, 16, 8).unwrap();
        let eps = 0.3;
        let nomatch: Vec<PureStrategy> = emb
            .problem()
            .enumerate_pure_strategies(1 << 20)
            .unwrap()
            .into_iter()
            .filter(|x| project_strategy(x, &emb, eps).unwrap().case == ProjectionCase::NoMatch)
            .take(5)
            .collect();
        assert_eq!(nomatch.len(), 5);
        let actions = [0, 3, 1, 4, 4, 2];
        let pi = MixedStrategy::uniform(&nomatch).unwrap();
        let tr = Transcript::from_rounds(
            emb.problem().clone(),
            actions.iter().map(|&a| (pi.clone(), emb.utility(a).unwrap())).collect(),
        )
        .unwrap();
        let r = transfer_report(&tr, &emb, &actions, eps, 0.0).unwrap();
        assert_eq!(r.w, 0.0);
        assert_eq!(r.vbar_id, 0.0);
        assert!(r.v_id <= eps);
        assert!(r.chain_i.holds());
    }

    #[test]
    fn report_rejects_mismatched_utilities() {
        let emb = toy();
        let tr = toy_transcript(&emb, &[(vec![(all_plus(), 1.0)], 0)]);
        assert!(transfer_report(&tr, &emb, &[1], 0.25, 0.0).is_err());
        let other = Transcript::from_rounds(
            emb.problem().clone(),
            vec![(MixedStrategy::point(all_plus()), UtilityVector::zeros(8))],
        )
        .unwrap();
        assert!(transfer_report(&other, &emb, &[0], 0.25, 0.0).is_err());
    }
}
