//! Transcripts, swap/external regret and correlated-equilibrium gaps.
//!
//! All regrets are averages over rounds. Swap regret is computed by the
//! per-strategy decomposition: a deviation only matters on strategies that
//! were actually played, and for each such `x` the best image is the best
//! response to `g_x = sum_t pi^t(x) u^t`.

pub mod io;

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};
use crate::treeform::{
    MixedStrategy, PureStrategy, TreeFormProblem, UtilityVector, DEFAULT_ENUMERATION_CAP,
    PROB_TOL,
};

/// Round-by-round history of learner distributions and utilities.
#[derive(Debug, Clone)]
pub struct Transcript {
    problem: Arc<TreeFormProblem>,
    rounds: Vec<(MixedStrategy, UtilityVector)>,
}

impl Transcript {
    pub fn new(problem: Arc<TreeFormProblem>) -> Self {
        Self {
            problem,
            rounds: Vec::new(),
        }
    }

    pub fn from_rounds(
        problem: Arc<TreeFormProblem>,
        rounds: Vec<(MixedStrategy, UtilityVector)>,
    ) -> Result<Self> {
        let mut tr = Self::new(problem);
        for (pi, u) in rounds {
            tr.push(pi, u)?;
        }
        Ok(tr)
    }

    pub fn push(&mut self, pi: MixedStrategy, u: UtilityVector) -> Result<()> {
        let m = self.problem.terminal_count();
        check_dim(m, pi.dim())?;
        check_dim(m, u.len())?;
        self.rounds.push((pi, u));
        Ok(())
    }

    pub fn problem(&self) -> &Arc<TreeFormProblem> {
        &self.problem
    }

    pub fn rounds(&self) -> &[(MixedStrategy, UtilityVector)] {
        &self.rounds
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    fn horizon(&self) -> Result<f64> {
        if self.rounds.is_empty() {
            return Err(Error::InvalidDistribution("empty transcript".into()));
        }
        Ok(self.rounds.len() as f64)
    }

    /// Union of all round supports, in order of first appearance.
    pub fn supported_strategies(&self) -> Vec<PureStrategy> {
        self.aggregated_utilities().into_iter().map(|(x, _)| x).collect()
    }

    /// `g_x = sum_t pi^t(x) u^t` for every supported `x`, in order of first
    /// appearance. Accumulation runs in round order.
    pub fn aggregated_utilities(&self) -> Vec<(PureStrategy, Vec<f64>)> {
        let m = self.problem.terminal_count();
        let mut index: HashMap<PureStrategy, usize> = HashMap::new();
        let mut out: Vec<(PureStrategy, Vec<f64>)> = Vec::new();
        for (pi, u) in &self.rounds {
            for (x, p) in pi.entries() {
                let k = *index.entry(x.clone()).or_insert_with(|| {
                    out.push((x.clone(), vec![0.0; m]));
                    out.len() - 1
                });
                for (g, &uz) in out[k].1.iter_mut().zip(u.iter()) {
                    *g += p * uz;
                }
            }
        }
        out
    }
}

/// A deviation `phi`, tabulated on the strategies that matter. Each image is a
/// point of the convex hull of `X`, stored with its witness weights.
#[derive(Debug, Clone, Default)]
pub struct DeviationFunction {
    images: HashMap<PureStrategy, MixedStrategy>,
}

impl DeviationFunction {
    pub fn new() -> Self {
        Self::default()
    }

    /// The identity on every strategy played in `tr`.
    pub fn identity(tr: &Transcript) -> Self {
        let mut phi = Self::new();
        for x in tr.supported_strategies() {
            phi.set(x.clone(), MixedStrategy::point(x));
        }
        phi
    }

    pub fn set(&mut self, x: PureStrategy, image: MixedStrategy) {
        self.images.insert(x, image);
    }

    pub fn image(&self, x: &PureStrategy) -> Option<&MixedStrategy> {
        self.images.get(x)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PureStrategy, &MixedStrategy)> {
        self.images.iter()
    }
}

/// `V(phi) = (1/T) sum_t E_{x ~ pi^t} <u^t, phi(x)>`.
pub fn value_of_deviation(tr: &Transcript, phi: &DeviationFunction) -> Result<f64> {
    let horizon = tr.horizon()?;
    let mut total = 0.0;
    for (t, (pi, u)) in tr.rounds().iter().enumerate() {
        for (x, p) in pi.entries() {
            if *p == 0.0 {
                continue;
            }
            let image = phi
                .image(x)
                .ok_or(Error::MissingDeviation { round: t + 1 })?;
            let value: f64 = image.entries().iter().map(|(y, q)| q * y.dot(u)).sum();
            total += p * value;
        }
    }
    Ok(total / horizon)
}

/// `V(Id)`: the learner's average realized utility.
pub fn realized_value(tr: &Transcript) -> Result<f64> {
    let horizon = tr.horizon()?;
    let total: f64 = tr
        .rounds()
        .iter()
        .map(|(pi, u)| pi.entries().iter().map(|(x, p)| p * x.dot(u)).sum::<f64>())
        .sum();
    Ok(total / horizon)
}

/// Average swap regret and an optimal deviation (pure images).
pub fn swap_regret(tr: &Transcript) -> Result<(f64, DeviationFunction)> {
    let horizon = tr.horizon()?;
    let problem = tr.problem();
    let mut phi = DeviationFunction::new();
    let mut total = 0.0;
    for (x, g) in tr.aggregated_utilities() {
        let own = x.dot(&g);
        let (best, value) = problem.best_response(&g)?;
        if value > own {
            total += value - own;
            phi.set(x, MixedStrategy::point(best));
        } else {
            phi.set(x.clone(), MixedStrategy::point(x));
        }
    }
    Ok((total / horizon, phi))
}

/// Best fixed strategy in hindsight minus the realized value. Can be negative.
pub fn external_regret(tr: &Transcript) -> Result<f64> {
    let horizon = tr.horizon()?;
    let m = tr.problem().terminal_count();
    let mut mean = vec![0.0; m];
    for (_, u) in tr.rounds() {
        for (a, &v) in mean.iter_mut().zip(u.iter()) {
            *a += v;
        }
    }
    for a in &mut mean {
        *a /= horizon;
    }
    let (_, best) = tr.problem().best_response(&mean)?;
    Ok(best - realized_value(tr)?)
}

/// Finite game where player `i` chooses among the pure strategies of
/// `problems[i]`. Payoffs are tabulated over pure profiles.
#[derive(Debug, Clone)]
pub struct NPlayerGame {
    problems: Vec<Arc<TreeFormProblem>>,
    strategies: Vec<Vec<PureStrategy>>,
    index: Vec<HashMap<PureStrategy, usize>>,
    /// Row-major over profiles (player 0 slowest), one payoff per player.
    payoffs: Vec<Vec<f64>>,
}

impl NPlayerGame {
    /// Builds the payoff table by calling `payoff(profile)` with per-player
    /// strategy indices into the enumerations.
    pub fn new(
        problems: Vec<Arc<TreeFormProblem>>,
        mut payoff: impl FnMut(&[usize]) -> Vec<f64>,
    ) -> Result<Self> {
        if problems.is_empty() {
            return Err(Error::InvalidProblem("a game needs at least one player".into()));
        }
        let strategies = problems
            .iter()
            .map(|p| p.enumerate_pure_strategies(DEFAULT_ENUMERATION_CAP))
            .collect::<Result<Vec<_>>>()?;
        let sizes: Vec<usize> = strategies.iter().map(Vec::len).collect();
        let total: usize = sizes.iter().product();
        let mut payoffs = Vec::with_capacity(total);
        let mut profile = vec![0usize; sizes.len()];
        for _ in 0..total {
            let row = payoff(&profile);
            check_dim(sizes.len(), row.len())?;
            if let Some(v) = row.iter().find(|v| !(v.abs() <= 1.0)) {
                return Err(Error::InvalidProblem(format!("payoff {v} outside [-1, 1]")));
            }
            payoffs.push(row);
            for k in (0..sizes.len()).rev() {
                profile[k] += 1;
                if profile[k] < sizes[k] {
                    break;
                }
                profile[k] = 0;
            }
        }
        let index = strategies
            .iter()
            .map(|xs| xs.iter().cloned().enumerate().map(|(k, x)| (x, k)).collect())
            .collect();
        Ok(Self {
            problems,
            strategies,
            index,
            payoffs,
        })
    }

    /// Two-player normal-form game from payoff matrices `a` (row player) and
    /// `b` (column player).
    pub fn bimatrix(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Self> {
        let rows = a.len();
        let cols = a.first().map_or(0, Vec::len);
        if b.len() != rows || a.iter().chain(b).any(|r| r.len() != cols) {
            return Err(Error::InvalidProblem("payoff matrices must have equal shape".into()));
        }
        let problems = vec![
            Arc::new(TreeFormProblem::simplex(rows)?),
            Arc::new(TreeFormProblem::simplex(cols)?),
        ];
        Self::new(problems, |p| vec![a[p[0]][p[1]], b[p[0]][p[1]]])
    }

    pub fn player_count(&self) -> usize {
        self.problems.len()
    }

    pub fn problem(&self, player: usize) -> &Arc<TreeFormProblem> {
        &self.problems[player]
    }

    pub fn strategies(&self, player: usize) -> &[PureStrategy] {
        &self.strategies[player]
    }

    pub fn strategy_index(&self, player: usize, x: &PureStrategy) -> Option<usize> {
        self.index[player].get(x).copied()
    }

    pub fn payoff(&self, profile: &[usize]) -> &[f64] {
        let mut flat = 0;
        for (k, &s) in profile.iter().enumerate() {
            flat = flat * self.strategies[k].len() + s;
        }
        &self.payoffs[flat]
    }

    /// Expected payoff to `player` of each of its pure strategies when the
    /// other players independently play `dists` (indexed over enumerations).
    pub fn induced_utility(&self, player: usize, dists: &[Vec<(usize, f64)>]) -> Vec<f64> {
        let k = self.strategies[player].len();
        let mut out = vec![0.0; k];
        let mut profile = vec![0usize; self.player_count()];
        self.induce_rec(player, dists, 0, 1.0, &mut profile, &mut out);
        out
    }

    fn induce_rec(
        &self,
        player: usize,
        dists: &[Vec<(usize, f64)>],
        pos: usize,
        weight: f64,
        profile: &mut Vec<usize>,
        out: &mut [f64],
    ) {
        if pos == self.player_count() {
            for (s, o) in out.iter_mut().enumerate() {
                profile[player] = s;
                *o += weight * self.payoff(profile)[player];
            }
            return;
        }
        if pos == player {
            return self.induce_rec(player, dists, pos + 1, weight, profile, out);
        }
        for &(s, q) in &dists[pos] {
            if q == 0.0 {
                continue;
            }
            profile[pos] = s;
            self.induce_rec(player, dists, pos + 1, weight * q, profile, out);
        }
    }
}

/// Mixture of product distributions over pure profiles:
/// `sum_k w_k * prod_i pi_{k,i}`.
#[derive(Debug, Clone, Default)]
pub struct JointDistribution {
    pub terms: Vec<(f64, Vec<MixedStrategy>)>,
}

impl JointDistribution {
    /// A single pure profile with probability one.
    pub fn point(game: &NPlayerGame, profile: &[usize]) -> Self {
        let mix = profile
            .iter()
            .enumerate()
            .map(|(i, &s)| MixedStrategy::point(game.strategies(i)[s].clone()))
            .collect();
        Self {
            terms: vec![(1.0, mix)],
        }
    }
}

#[derive(Debug, Clone)]
pub struct NfceReport {
    pub gap_per_player: Vec<f64>,
    pub worst_gap: f64,
    pub witnesses: Vec<DeviationFunction>,
}

/// Largest gain any player gets from a swap deviation under `joint`.
pub fn nfce_gap(game: &NPlayerGame, joint: &JointDistribution) -> Result<NfceReport> {
    let n = game.player_count();
    let mut weight_sum = 0.0;
    // per term, per player: (strategy index, prob)
    let mut indexed: Vec<(f64, Vec<Vec<(usize, f64)>>)> = Vec::with_capacity(joint.terms.len());
    for (w, mix) in &joint.terms {
        if !(*w >= 0.0) {
            return Err(Error::InvalidDistribution(format!("mixture weight {w} < 0")));
        }
        check_dim(n, mix.len())?;
        weight_sum += w;
        let mut per_player = Vec::with_capacity(n);
        for (i, pi) in mix.iter().enumerate() {
            let entries = pi
                .entries()
                .iter()
                .map(|(x, p)| {
                    game.strategy_index(i, x).map(|k| (k, *p)).ok_or_else(|| {
                        Error::InvalidDistribution(format!("player {i} strategy {x:?} not in game"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            per_player.push(entries);
        }
        indexed.push((*w, per_player));
    }
    if (weight_sum - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidDistribution(format!(
            "joint weights sum to {weight_sum}"
        )));
    }

    let mut gaps = Vec::with_capacity(n);
    let mut witnesses = Vec::with_capacity(n);
    for i in 0..n {
        let xs = game.strategies(i);
        let k = xs.len();
        // g[s][s'] = E[ 1{x_i = s} u_i(s', x_-i) ]
        let mut g = vec![vec![0.0; k]; k];
        let mut touched = vec![false; k];
        for (w, dists) in &indexed {
            let v = game.induced_utility(i, dists);
            for &(s, p) in &dists[i] {
                if p == 0.0 || *w == 0.0 {
                    continue;
                }
                touched[s] = true;
                for (gs, vs) in g[s].iter_mut().zip(&v) {
                    *gs += w * p * vs;
                }
            }
        }
        let mut gap = 0.0;
        let mut phi = DeviationFunction::new();
        for s in (0..k).filter(|&s| touched[s]) {
            let mut best = s;
            for t in 0..k {
                if g[s][t] > g[s][best] {
                    best = t;
                }
            }
            gap += g[s][best] - g[s][s];
            phi.set(xs[s].clone(), MixedStrategy::point(xs[best].clone()));
        }
        gaps.push(gap);
        witnesses.push(phi);
    }
    let worst_gap = gaps.iter().copied().fold(0.0, f64::max);
    Ok(NfceReport {
        gap_per_player: gaps,
        worst_gap,
        witnesses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex(k: usize) -> Arc<TreeFormProblem> {
        Arc::new(TreeFormProblem::simplex(k).unwrap())
    }

    fn e(k: usize, m: usize) -> PureStrategy {
        PureStrategy::basis(m, k)
    }

    fn u(v: &[f64]) -> UtilityVector {
        UtilityVector::new(v.to_vec()).unwrap()
    }

    fn point_transcript(plays: &[(usize, &[f64])]) -> Transcript {
        let m = plays[0].1.len();
        Transcript::from_rounds(
            simplex(m),
            plays
                .iter()
                .map(|(k, util)| (MixedStrategy::point(e(*k, m)), u(util)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn value_of_deviation_examples() {
        let tr = point_transcript(&[(0, &[0.0, 1.0]), (0, &[0.0, 1.0])]);
        let mut phi = DeviationFunction::new();
        phi.set(e(0, 2), MixedStrategy::point(e(1, 2)));
        assert_eq!(value_of_deviation(&tr, &phi).unwrap(), 1.0);

        let id = DeviationFunction::identity(&tr);
        assert_eq!(value_of_deviation(&tr, &id).unwrap(), realized_value(&tr).unwrap());
        assert!(matches!(
            value_of_deviation(&tr, &DeviationFunction::new()),
            Err(Error::MissingDeviation { round: 1 })
        ));
    }

    #[test]
    fn swap_regret_by_hand() {
        let tr = point_transcript(&[(0, &[0.0, 1.0]), (0, &[0.0, 1.0])]);
        let (r, phi) = swap_regret(&tr).unwrap();
        assert_eq!(r, 1.0);
        assert_eq!(phi.image(&e(0, 2)).unwrap(), &MixedStrategy::point(e(1, 2)));
        assert_eq!(external_regret(&tr).unwrap(), 1.0);
    }

    #[test]
    fn best_responding_learner_has_no_swap_regret() {
        let util = [0.2, -0.4, 0.9];
        let tr = point_transcript(&[(2, &util), (2, &util), (2, &util)]);
        assert_eq!(swap_regret(&tr).unwrap().0, 0.0);
    }

    #[test]
    fn alternating_orderings() {
        // aligned: the learner always collects the available unit of utility
        let aligned = point_transcript(&[(0, &[1.0, 0.0]), (1, &[0.0, 1.0])]);
        assert_eq!(swap_regret(&aligned).unwrap().0, 0.0);
        assert_eq!(external_regret(&aligned).unwrap(), -0.5);
        // anti-aligned: swapping e1 <-> e2 recovers both units
        let anti = point_transcript(&[(0, &[0.0, 1.0]), (1, &[1.0, 0.0])]);
        assert_eq!(swap_regret(&anti).unwrap().0, 1.0);
        assert_eq!(external_regret(&anti).unwrap(), 0.5);
    }

    #[test]
    fn empty_transcript_is_an_error() {
        let tr = Transcript::new(simplex(2));
        assert!(swap_regret(&tr).is_err());
        assert!(external_regret(&tr).is_err());
    }

    fn coordination() -> NPlayerGame {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        NPlayerGame::bimatrix(&a, &a).unwrap()
    }

    #[test]
    fn nfce_pure_nash_has_zero_gap() {
        let g = coordination();
        let r = nfce_gap(&g, &JointDistribution::point(&g, &[1, 1])).unwrap();
        assert_eq!(r.worst_gap, 0.0);
    }

    #[test]
    fn nfce_off_diagonal_has_unit_gap() {
        let g = coordination();
        let r = nfce_gap(&g, &JointDistribution::point(&g, &[0, 1])).unwrap();
        assert_eq!(r.gap_per_player, vec![1.0, 1.0]);
        assert_eq!(r.worst_gap, 1.0);
        let w = &r.witnesses[0];
        assert_eq!(
            w.image(&g.strategies(0)[0]).unwrap(),
            &MixedStrategy::point(g.strategies(0)[1].clone())
        );
    }

    #[test]
    fn nfce_matching_pennies_uniform() {
        let a = vec![vec![1.0, -1.0], vec![-1.0, 1.0]];
        let b = vec![vec![-1.0, 1.0], vec![1.0, -1.0]];
        let g = NPlayerGame::bimatrix(&a, &b).unwrap();
        let half = |i| MixedStrategy::uniform(g.strategies(i)).unwrap();
        let joint = JointDistribution {
            terms: vec![(1.0, vec![half(0), half(1)])],
        };
        assert_eq!(nfce_gap(&g, &joint).unwrap().worst_gap, 0.0);
    }

    #[test]
    fn nfce_rejects_unnormalized_joint() {
        let g = coordination();
        let mut joint = JointDistribution::point(&g, &[0, 0]);
        joint.terms[0].0 = 0.5;
        assert!(matches!(nfce_gap(&g, &joint), Err(Error::InvalidDistribution(_))));
    }

    #[test]
    fn three_player_payoff_indexing() {
        let problems = vec![simplex(2), simplex(3), simplex(2)];
        let g = NPlayerGame::new(problems, |p| {
            let v = (p[0] * 6 + p[1] * 2 + p[2]) as f64 / 12.0;
            vec![v, -v, 0.0]
        })
        .unwrap();
        assert_eq!(g.payoff(&[1, 2, 1])[0], 11.0 / 12.0);
        assert_eq!(g.payoff(&[0, 1, 0])[1], -2.0 / 12.0);
        // player 1 against point masses on (1, *, 0)
        let v = g.induced_utility(1, &[vec![(1, 1.0)], vec![], vec![(0, 1.0)]]);
        assert_eq!(v, vec![-6.0 / 12.0, -8.0 / 12.0, -10.0 / 12.0]);
    }
}
