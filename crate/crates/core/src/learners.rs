//! Reference no-regret learners and self-play.
//!
//! Learners treat each pure strategy of a [`StrategyPool`] as one action.
//! For small problems the pool is the full enumeration. For problems too
//! large to enumerate, a pool can be sampled and can grow by adding the best
//! response to each observed utility vector.

pub mod stationary;

use std::collections::HashMap;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::regret::{JointDistribution, NPlayerGame, Transcript};
use crate::treeform::{MixedStrategy, Node, NodeId, PureStrategy, TreeFormProblem, UtilityVector};

/// A full-information online learner.
pub trait Learner {
    /// Distribution for the upcoming round.
    fn next_distribution(&self) -> MixedStrategy;
    /// Feed the utility vector of the round just played.
    fn observe(&mut self, u: &UtilityVector) -> Result<()>;
}

/// The finite action set a learner works over.
#[derive(Debug, Clone)]
pub struct StrategyPool {
    problem: Arc<TreeFormProblem>,
    strategies: Vec<PureStrategy>,
    index: HashMap<PureStrategy, usize>,
    grow: bool,
}

impl StrategyPool {
    pub fn enumerated(problem: Arc<TreeFormProblem>, cap: usize) -> Result<Self> {
        let xs = problem.enumerate_pure_strategies(cap)?;
        Self::fixed(problem, xs)
    }

    /// A given list of strategies (deduplicated, order kept).
    pub fn fixed(problem: Arc<TreeFormProblem>, strategies: Vec<PureStrategy>) -> Result<Self> {
        let mut pool = Self {
            problem,
            strategies: Vec::new(),
            index: HashMap::new(),
            grow: false,
        };
        for x in strategies {
            check_dim(pool.problem.terminal_count(), x.dim())?;
            pool.insert(x);
        }
        if pool.strategies.is_empty() {
            return Err(Error::InvalidDistribution("empty strategy pool".into()));
        }
        Ok(pool)
    }

    /// `size` strategies drawn uniformly from all pure strategies (with
    /// duplicates removed, so the pool may come out smaller).
    pub fn sampled(problem: Arc<TreeFormProblem>, size: usize, rng: &mut impl Rng) -> Result<Self> {
        let xs = (0..size.max(1))
            .map(|_| sample_uniform_strategy(&problem, rng))
            .collect();
        Self::fixed(problem, xs)
    }

    /// Also add the best response to every observed utility vector.
    pub fn with_growth(mut self) -> Self {
        self.grow = true;
        self
    }

    pub fn problem(&self) -> &Arc<TreeFormProblem> {
        &self.problem
    }

    pub fn strategies(&self) -> &[PureStrategy] {
        &self.strategies
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    fn insert(&mut self, x: PureStrategy) -> Option<usize> {
        if self.index.contains_key(&x) {
            return None;
        }
        self.index.insert(x.clone(), self.strategies.len());
        self.strategies.push(x);
        Some(self.strategies.len() - 1)
    }

    /// Grows the pool after observing `u`; returns the new strategy if any.
    fn grow_with(&mut self, u: &UtilityVector) -> Result<Option<PureStrategy>> {
        if !self.grow {
            return Ok(None);
        }
        let (x, _) = self.problem.best_response(u)?;
        Ok(self.insert(x.clone()).map(|_| x))
    }

    fn utilities(&self, u: &[f64]) -> Vec<f64> {
        self.strategies.iter().map(|x| x.dot(u)).collect()
    }

    fn mixed(&self, probs: &[f64]) -> MixedStrategy {
        let entries = self
            .strategies
            .iter()
            .zip(probs)
            .filter(|(_, &p)| p > 0.0)
            .map(|(x, &p)| (x.clone(), p))
            .collect();
        MixedStrategy::new(entries).expect("learner produced an invalid distribution")
    }
}

/// Uniformly random pure strategy: decision points pick a child with
/// probability proportional to its number of sub-strategies.
pub fn sample_uniform_strategy(problem: &TreeFormProblem, rng: &mut impl Rng) -> PureStrategy {
    fn count(p: &TreeFormProblem, id: NodeId) -> f64 {
        match &p.nodes()[id] {
            Node::Terminal { .. } => 1.0,
            Node::Decision { children } => children.iter().map(|&c| count(p, c)).sum(),
            Node::Observation { children } => children.iter().map(|&c| count(p, c)).product(),
        }
    }
    fn walk(p: &TreeFormProblem, id: NodeId, rng: &mut impl Rng, out: &mut Vec<u32>) {
        match &p.nodes()[id] {
            Node::Terminal { index } => out.push(*index as u32),
            Node::Observation { children } => {
                for &c in children {
                    walk(p, c, rng, out);
                }
            }
            Node::Decision { children } => {
                let weights: Vec<f64> = children.iter().map(|&c| count(p, c)).collect();
                let mut r = rng.gen::<f64>() * weights.iter().sum::<f64>();
                let mut pick = children[children.len() - 1];
                for (&c, w) in children.iter().zip(&weights) {
                    if r < *w {
                        pick = c;
                        break;
                    }
                    r -= w;
                }
                walk(p, pick, rng, out);
            }
        }
    }
    let mut support = Vec::new();
    walk(problem, problem.root(), rng, &mut support);
    support.sort_unstable();
    PureStrategy::from_sorted(problem.terminal_count(), support)
}

/// Learning-rate schedule shared by Hedge and the Blum–Mansour sub-learners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Fixed(f64),
    /// `sqrt(8 ln K / T)` for a known horizon `T`.
    Horizon(usize),
    /// Doubling trick: epochs of length 1, 2, 4, ...; the learner restarts at
    /// each epoch with the horizon-tuned rate for that epoch length.
    Doubling,
}

impl LearningRate {
    fn eta(&self, actions: usize, round: usize) -> f64 {
        let tuned = |t: usize| (8.0 * (actions as f64).ln() / t.max(1) as f64).sqrt();
        match *self {
            Self::Fixed(eta) => eta,
            Self::Horizon(t) => tuned(t),
            Self::Doubling => tuned(epoch_start(round).max(1)),
        }
    }

    /// Whether round `round` (0-based count of observed rounds) starts a new
    /// epoch, i.e. learner state must be reset before it.
    fn restarts_at(&self, round: usize) -> bool {
        matches!(self, Self::Doubling) && round > 0 && round.is_power_of_two()
    }
}

fn epoch_start(round: usize) -> usize {
    if round == 0 {
        1
    } else {
        1 << (usize::BITS - 1 - round.leading_zeros())
    }
}

/// Exponential weights over the pool. Scores are cumulative (scaled)
/// utilities; the aggregate utility vector lets scores be filled in for
/// strategies added to the pool later.
#[derive(Debug, Clone)]
struct ExpWeights {
    scores: Vec<f64>,
    aggregate: Vec<f64>,
}

impl ExpWeights {
    fn new(actions: usize, m: usize) -> Self {
        Self {
            scores: vec![0.0; actions],
            aggregate: vec![0.0; m],
        }
    }

    fn update(&mut self, scale: f64, action_utils: &[f64], u: &[f64]) {
        if scale == 0.0 {
            return;
        }
        for (s, v) in self.scores.iter_mut().zip(action_utils) {
            *s += scale * v;
        }
        for (a, v) in self.aggregate.iter_mut().zip(u) {
            *a += scale * v;
        }
    }

    fn add_action(&mut self, x: &PureStrategy) {
        self.scores.push(x.dot(&self.aggregate));
    }

    fn reset(&mut self) {
        self.scores.iter_mut().for_each(|s| *s = 0.0);
        self.aggregate.iter_mut().for_each(|a| *a = 0.0);
    }

    fn weights(&self, eta: f64) -> Vec<f64> {
        let top = self.scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = self.scores.iter().map(|s| (eta * (s - top)).exp()).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        w
    }
}

/// Hedge (multiplicative weights) external-regret learner.
#[derive(Debug, Clone)]
pub struct Hedge {
    pool: StrategyPool,
    rate: LearningRate,
    state: ExpWeights,
    rounds: usize,
    probs: Vec<f64>,
}

impl Hedge {
    pub fn new(pool: StrategyPool, rate: LearningRate) -> Self {
        let k = pool.len();
        let m = pool.problem().terminal_count();
        Self {
            pool,
            rate,
            state: ExpWeights::new(k, m),
            rounds: 0,
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn pool(&self) -> &StrategyPool {
        &self.pool
    }

    /// Probabilities aligned with `pool().strategies()`.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// Observe `u` and return the next distribution.
    pub fn step(&mut self, u: &UtilityVector) -> Result<MixedStrategy> {
        self.observe(u)?;
        Ok(self.next_distribution())
    }
}

impl Learner for Hedge {
    fn next_distribution(&self) -> MixedStrategy {
        self.pool.mixed(&self.probs)
    }

    fn observe(&mut self, u: &UtilityVector) -> Result<()> {
        check_dim(self.pool.problem().terminal_count(), u.len())?;
        let utils = self.pool.utilities(u);
        self.state.update(1.0, &utils, u);
        if let Some(x) = self.pool.grow_with(u)? {
            self.state.add_action(&x);
        }
        self.rounds += 1;
        if self.rate.restarts_at(self.rounds) {
            self.state.reset();
        }
        let eta = self.rate.eta(self.pool.len(), self.rounds);
        self.probs = self.state.weights(eta);
        Ok(())
    }
}

/// Blum–Mansour swap-regret learner: one exponential-weights sub-learner per
/// pool strategy `y`, fed `pi(y) u`; the played distribution is the
/// stationary distribution of the matrix whose row `y` is sub-learner `y`'s
/// distribution.
#[derive(Debug, Clone)]
pub struct BlumMansour {
    pool: StrategyPool,
    rate: LearningRate,
    subs: Vec<ExpWeights>,
    rounds: usize,
    q: Vec<Vec<f64>>,
    probs: Vec<f64>,
    diagnostics: stationary::Diagnostics,
}

impl BlumMansour {
    pub fn new(pool: StrategyPool, rate: LearningRate) -> Self {
        let k = pool.len();
        let m = pool.problem().terminal_count();
        let row = vec![1.0 / k as f64; k];
        Self {
            pool,
            rate,
            subs: vec![ExpWeights::new(k, m); k],
            rounds: 0,
            q: vec![row.clone(); k],
            probs: row,
            diagnostics: stationary::Diagnostics {
                iterations: 0,
                residual: 0.0,
                used_fallback: false,
            },
        }
    }

    pub fn pool(&self) -> &StrategyPool {
        &self.pool
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    /// The current row-stochastic matrix `Q`.
    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.q
    }

    /// `||pi Q - pi||_1` for the current distribution.
    pub fn fixed_point_residual(&self) -> f64 {
        stationary::residual(&self.q, &self.probs)
    }

    pub fn diagnostics(&self) -> stationary::Diagnostics {
        self.diagnostics
    }

    pub fn step(&mut self, u: &UtilityVector) -> Result<MixedStrategy> {
        self.observe(u)?;
        Ok(self.next_distribution())
    }
}

impl Learner for BlumMansour {
    fn next_distribution(&self) -> MixedStrategy {
        self.pool.mixed(&self.probs)
    }

    fn observe(&mut self, u: &UtilityVector) -> Result<()> {
        let m = self.pool.problem().terminal_count();
        check_dim(m, u.len())?;
        let utils = self.pool.utilities(u);
        for (sub, &p) in self.subs.iter_mut().zip(&self.probs) {
            sub.update(p, &utils, u);
        }
        let mut start = self.probs.clone();
        if let Some(x) = self.pool.grow_with(u)? {
            for sub in &mut self.subs {
                sub.add_action(&x);
            }
            self.subs.push(ExpWeights::new(self.pool.len(), m));
            start.push(0.0);
        }
        self.rounds += 1;
        if self.rate.restarts_at(self.rounds) {
            self.subs.iter_mut().for_each(ExpWeights::reset);
        }
        let eta = self.rate.eta(self.pool.len(), self.rounds);
        self.q = self.subs.iter().map(|s| s.weights(eta)).collect();
        let (pi, diag) = stationary::stationary_distribution(&self.q, Some(&start))?;
        self.probs = pi;
        self.diagnostics = diag;
        Ok(())
    }
}

/// Plays the uniform distribution over its pool forever.
#[derive(Debug, Clone)]
pub struct UniformLearner {
    pool: StrategyPool,
}

impl UniformLearner {
    pub fn new(pool: StrategyPool) -> Self {
        Self { pool }
    }
}

impl Learner for UniformLearner {
    fn next_distribution(&self) -> MixedStrategy {
        let k = self.pool.len();
        self.pool.mixed(&vec![1.0 / k as f64; k])
    }

    fn observe(&mut self, u: &UtilityVector) -> Result<()> {
        check_dim(self.pool.problem().terminal_count(), u.len())?;
        self.pool.grow_with(u)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LearnerKind {
    BlumMansour,
    Hedge,
    Uniform,
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blum_mansour" => Ok(Self::BlumMansour),
            "hedge" => Ok(Self::Hedge),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::Config(format!(
                "unknown learner {other:?} (expected blum_mansour | hedge | uniform)"
            ))),
        }
    }
}

impl LearnerKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BlumMansour => "blum_mansour",
            Self::Hedge => "hedge",
            Self::Uniform => "uniform",
        }
    }

    pub fn build(&self, pool: StrategyPool, rate: LearningRate) -> Box<dyn Learner + Send> {
        match self {
            Self::BlumMansour => Box::new(BlumMansour::new(pool, rate)),
            Self::Hedge => Box::new(Hedge::new(pool, rate)),
            Self::Uniform => Box::new(UniformLearner::new(pool)),
        }
    }
}

/// Runs `learner` against a fixed utility sequence and records the transcript.
pub fn play(learner: &mut dyn Learner, problem: Arc<TreeFormProblem>, utilities: &[UtilityVector]) -> Result<Transcript> {
    let mut tr = Transcript::new(problem);
    for u in utilities {
        tr.push(learner.next_distribution(), u.clone())?;
        learner.observe(u)?;
    }
    Ok(tr)
}

#[derive(Debug, Clone)]
pub struct SelfPlayOutcome {
    /// Per-player transcripts over the simplex of that player's pure
    /// strategies (action `k` is the `k`-th enumerated strategy).
    pub transcripts: Vec<Transcript>,
    /// `(1/T) sum_t prod_i pi_i^t` over the game's pure strategies.
    pub joint: JointDistribution,
}

/// Simplex problems on which self-play learners run, one per player.
pub fn self_play_problems(game: &NPlayerGame) -> Result<Vec<Arc<TreeFormProblem>>> {
    (0..game.player_count())
        .map(|i| TreeFormProblem::simplex(game.strategies(i).len()).map(Arc::new))
        .collect()
}

/// Repeated play where each player's utility is its expected payoff against
/// the others' current mixed strategies. `learners[i]` must act on
/// `self_play_problems(game)[i]`.
pub fn self_play(
    game: &NPlayerGame,
    learners: &mut [Box<dyn Learner + Send>],
    rounds: usize,
) -> Result<SelfPlayOutcome> {
    let n = game.player_count();
    check_dim(n, learners.len())?;
    let problems = self_play_problems(game)?;
    let mut transcripts: Vec<Transcript> = problems.iter().cloned().map(Transcript::new).collect();
    let mut joint = JointDistribution::default();
    let w = 1.0 / rounds.max(1) as f64;
    for _ in 0..rounds {
        let dists: Vec<MixedStrategy> = learners.iter().map(|l| l.next_distribution()).collect();
        let mut indexed = Vec::with_capacity(n);
        for (i, pi) in dists.iter().enumerate() {
            check_dim(problems[i].terminal_count(), pi.dim())?;
            indexed.push(
                pi.entries()
                    .iter()
                    .map(|(x, p)| (x.support()[0] as usize, *p))
                    .collect::<Vec<_>>(),
            );
        }
        let mut profile = Vec::with_capacity(n);
        for i in 0..n {
            let u = UtilityVector::new(game.induced_utility(i, &indexed))?;
            transcripts[i].push(dists[i].clone(), u.clone())?;
            learners[i].observe(&u)?;
            let entries = indexed[i]
                .iter()
                .map(|&(k, p)| (game.strategies(i)[k].clone(), p))
                .collect();
            profile.push(MixedStrategy::new(entries)?);
        }
        joint.terms.push((w, profile));
    }
    Ok(SelfPlayOutcome { transcripts, joint })
}

/// Self-play with one learner of the given kind per player.
pub fn self_play_with(
    game: &NPlayerGame,
    kinds: &[LearnerKind],
    rate: LearningRate,
    rounds: usize,
) -> Result<SelfPlayOutcome> {
    check_dim(game.player_count(), kinds.len())?;
    let mut learners = self_play_problems(game)?
        .into_iter()
        .zip(kinds)
        .map(|(p, kind)| Ok(kind.build(StrategyPool::enumerated(p, usize::MAX)?, rate)))
        .collect::<Result<Vec<_>>>()?;
    self_play(game, &mut learners, rounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regret::{external_regret, nfce_gap, swap_regret};
    use crate::seed::{rng, Purpose};
    use crate::treeform::DEFAULT_ENUMERATION_CAP;

    fn simplex_pool(k: usize) -> StrategyPool {
        StrategyPool::enumerated(Arc::new(TreeFormProblem::simplex(k).unwrap()), 64).unwrap()
    }

    fn u(v: &[f64]) -> UtilityVector {
        UtilityVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn hedge_closed_form_update() {
        let mut h = Hedge::new(simplex_pool(2), LearningRate::Fixed(2f64.ln()));
        h.step(&u(&[1.0, 0.0])).unwrap();
        let p = h.probabilities();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn hedge_zero_utility_and_zero_rate() {
        let mut h = Hedge::new(simplex_pool(3), LearningRate::Fixed(0.5));
        h.step(&u(&[0.3, -0.2, 0.1])).unwrap();
        let before = h.probabilities().to_vec();
        h.step(&u(&[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(h.probabilities(), &before[..]);

        let mut h = Hedge::new(simplex_pool(3), LearningRate::Fixed(0.0));
        for _ in 0..5 {
            h.step(&u(&[1.0, -1.0, 0.5])).unwrap();
            assert_eq!(h.probabilities(), &[1.0 / 3.0; 3]);
        }
    }

    #[test]
    fn doubling_epochs() {
        assert_eq!(epoch_start(1), 1);
        assert_eq!(epoch_start(5), 4);
        assert_eq!(epoch_start(8), 8);
        let r = LearningRate::Doubling;
        assert!(r.restarts_at(4) && !r.restarts_at(5));
    }

    #[test]
    fn blum_mansour_first_round_is_uniform() {
        let bm = BlumMansour::new(simplex_pool(4), LearningRate::Horizon(100));
        assert_eq!(bm.probabilities(), &[0.25; 4]);
    }

    #[test]
    fn blum_mansour_fixed_point_every_round() {
        let mut bm = BlumMansour::new(simplex_pool(4), LearningRate::Horizon(500));
        let mut r = rng(3, Purpose::Utilities);
        for _ in 0..500 {
            let mut v = vec![0.0; 4];
            v[r.gen_range(0..4)] = 1.0;
            bm.step(&u(&v)).unwrap();
            assert!(bm.fixed_point_residual() <= 1e-8);
            let s: f64 = bm.probabilities().iter().sum();
            assert!((s - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn hedge_external_regret_shrinks_with_horizon() {
        // fixed oblivious sequence, action 0 slightly better on average; the
        // rate is tuned to each horizon
        let mut r = rng(11, Purpose::Utilities);
        let seq: Vec<UtilityVector> = (0..4000)
            .map(|_| {
                let v: Vec<f64> = (0..3)
                    .map(|k| r.gen_range(-0.5..0.5) + if k == 0 { 0.2 } else { 0.0 })
                    .collect();
                u(&v)
            })
            .collect();
        let problem = Arc::new(TreeFormProblem::simplex(3).unwrap());
        let regret_at = |t: usize| {
            let mut h = Hedge::new(simplex_pool(3), LearningRate::Horizon(t));
            let tr = play(&mut h, problem.clone(), &seq[..t]).unwrap();
            external_regret(&tr).unwrap()
        };
        let rs: Vec<f64> = [250, 1000, 4000].iter().map(|&t| regret_at(t)).collect();
        assert!(rs[0] > rs[1] && rs[1] > rs[2], "{rs:?}");
        for (&t, r) in [250usize, 1000, 4000].iter().zip(&rs) {
            assert!(*r <= (2.0 * 3f64.ln() / t as f64).sqrt() * 2.0, "t={t} r={r}");
        }
    }

    #[test]
    fn pool_growth_adds_best_responses() {
        let problem = Arc::new(TreeFormProblem::fig1(2, 3).unwrap());
        let mut r = rng(1, Purpose::LearnerPool);
        let pool = StrategyPool::sampled(problem.clone(), 2, &mut r).unwrap().with_growth();
        let before = pool.len();
        let mut h = Hedge::new(pool, LearningRate::Fixed(1.0));
        let util = u(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, -0.2, -0.2, 0.2, 0.2, -0.2]);
        let (br, _) = problem.best_response(&util).unwrap();
        h.observe(&util).unwrap();
        assert!(h.pool().strategies().contains(&br));
        assert!(h.pool().len() <= before + 1);
        // the added strategy is scored with the utility already seen
        let k = h.pool().strategies().iter().position(|x| *x == br).unwrap();
        assert!(h.probabilities()[k] >= h.probabilities().iter().copied().fold(0.0, f64::max) - 1e-15);
    }

    #[test]
    fn blum_mansour_with_growing_pool_stays_stationary() {
        let problem = Arc::new(TreeFormProblem::fig1(2, 4).unwrap());
        let pool = StrategyPool::sampled(problem.clone(), 3, &mut rng(2, Purpose::LearnerPool))
            .unwrap()
            .with_growth();
        let mut bm = BlumMansour::new(pool, LearningRate::Horizon(50));
        let all = problem.enumerate_pure_strategies(DEFAULT_ENUMERATION_CAP).unwrap();
        let mut r = rng(2, Purpose::Utilities);
        for _ in 0..50 {
            let target = &all[r.gen_range(0..all.len())];
            let mut v = vec![0.0; 16];
            for &z in target.support() {
                v[z as usize] = 0.25;
            }
            bm.step(&u(&v)).unwrap();
            assert!(bm.fixed_point_residual() <= 1e-8);
            assert_eq!(bm.matrix().len(), bm.pool().len());
        }
    }

    #[test]
    fn sampled_strategies_are_valid_and_cover_rows() {
        let problem = TreeFormProblem::fig1(3, 5).unwrap();
        let mut r = rng(5, Purpose::LearnerPool);
        let mut rows = [0usize; 3];
        for _ in 0..3000 {
            let x = sample_uniform_strategy(&problem, &mut r);
            assert!(problem.validate_realization(&x.realization()).unwrap());
            rows[x.support()[0] as usize / 10] += 1;
        }
        for c in rows {
            assert!((c as f64 - 1000.0).abs() < 150.0, "{rows:?}");
        }
    }

    #[test]
    fn self_play_fixed_profile() {
        let a = vec![vec![0.5, -0.5], vec![1.0, 0.0]];
        let game = NPlayerGame::bimatrix(&a, &a).unwrap();
        let out = self_play_with(&game, &[LearnerKind::Uniform, LearnerKind::Uniform], LearningRate::Fixed(0.0), 3).unwrap();
        for tr in &out.transcripts {
            let first = &tr.rounds()[0];
            assert!(tr.rounds().iter().all(|r| r == first));
        }
        assert_eq!(out.joint.terms.len(), 3);
    }

    #[test]
    fn self_play_single_round_joint_is_product() {
        let a = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let b = vec![vec![-1.0, 1.0], vec![1.0, -1.0]];
        let game = NPlayerGame::bimatrix(&a, &b).unwrap();
        let out = self_play_with(&game, &[LearnerKind::Hedge, LearnerKind::Hedge], LearningRate::Fixed(0.1), 1).unwrap();
        assert_eq!(out.joint.terms.len(), 1);
        assert_eq!(out.joint.terms[0].0, 1.0);
        assert_eq!(out.joint.terms[0].1[0], MixedStrategy::uniform(game.strategies(0)).unwrap());
    }

    #[test]
    fn matching_pennies_blum_mansour_self_play() {
        let a = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let b = vec![vec![-1.0, 1.0], vec![1.0, -1.0]];
        let game = NPlayerGame::bimatrix(&a, &b).unwrap();
        let t = 5000;
        let out = self_play_with(
            &game,
            &[LearnerKind::BlumMansour, LearnerKind::BlumMansour],
            LearningRate::Horizon(t),
            t,
        )
        .unwrap();
        let regrets: Vec<f64> = out.transcripts.iter().map(|tr| swap_regret(tr).unwrap().0).collect();
        let worst = regrets.iter().copied().fold(0.0, f64::max);
        assert!(worst <= 0.1, "{regrets:?}");
        let gap = nfce_gap(&game, &out.joint).unwrap().worst_gap;
        assert!(gap <= worst + 1e-9, "gap {gap} > {worst}");
    }
}
