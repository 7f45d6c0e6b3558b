//! The random-codeword embedding of a normal-form adversary into the
//! two-level tree-form family ([`TreeFormProblem::fig1`]).
//!
//! Normal-form actions are indexed `0..M`: group-major `a_{ij}` first (group
//! `i`, position `j`, both 0-based), then the reserved action `a*` last. Each
//! `a_{ij}` gets a uniformly random pure strategy of row `i` as codeword; the
//! adversary's action sequence is replayed as the codewords' utility vectors.
//!
//! Scaled coordinates: a pure strategy of row `i` is the `d x n` matrix whose
//! only nonzero row is `i`, with entries `+-1/sqrt(n)`. The map from
//! realization vectors is `x_s[i, j] = (x[(i,j,+)] - x[(i,j,-)]) / sqrt(n)`;
//! utilities go through the adjoint so inner products are preserved.

use std::sync::Arc;

use rand::{Rng, RngCore};

use crate::error::{check_dim, Error, Result};
use crate::seed::{rng, Purpose};
use crate::treeform::{fig1_terminal, PureStrategy, TreeFormProblem, UtilityVector};

/// Action partition of the normal-form adversary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalFormAdversarySpec {
    group_sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl NormalFormAdversarySpec {
    /// Groups of the given sizes plus the reserved action; `M = sum + 1`.
    pub fn new(group_sizes: Vec<usize>) -> Result<Self> {
        if group_sizes.is_empty() || group_sizes.contains(&0) {
            return Err(Error::Config("group sizes must be nonempty and positive".into()));
        }
        let offsets = group_sizes
            .iter()
            .scan(0, |acc, &s| {
                let o = *acc;
                *acc += s;
                Some(o)
            })
            .collect();
        Ok(Self {
            group_sizes,
            offsets,
        })
    }

    /// `M - 1` non-reserved actions split into `d` groups as evenly as
    /// possible (earlier groups get the remainder).
    pub fn even(d: usize, action_count: usize) -> Result<Self> {
        if d == 0 || action_count < d + 1 {
            return Err(Error::Config(format!(
                "need M >= d + 1 actions (d = {d}, M = {action_count})"
            )));
        }
        let free = action_count - 1;
        Self::new((0..d).map(|i| free / d + usize::from(i < free % d)).collect())
    }

    pub fn groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    /// `M`, including the reserved action.
    pub fn action_count(&self) -> usize {
        self.group_sizes.iter().sum::<usize>() + 1
    }

    pub fn reserved(&self) -> usize {
        self.action_count() - 1
    }

    /// Index of `a_{ij}`.
    pub fn action(&self, i: usize, j: usize) -> usize {
        assert!(j < self.group_sizes[i]);
        self.offsets[i] + j
    }

    /// `(i, j)` of an action, `None` for `a*`.
    pub fn group_of(&self, a: usize) -> Option<(usize, usize)> {
        if a >= self.reserved() {
            return None;
        }
        let i = self.offsets.partition_point(|&o| o <= a) - 1;
        Some((i, a - self.offsets[i]))
    }
}

/// A source of oblivious action sequences. Implementations see only the
/// partition, the horizon and their own randomness, never the learner.
pub trait NormalFormAdversary {
    fn sample(&self, spec: &NormalFormAdversarySpec, horizon: usize, rng: &mut dyn RngCore) -> AdversarySample;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarySample {
    pub actions: Vec<usize>,
    /// Rounds where an advance was drawn but the group was already at its
    /// last action.
    pub saturations: usize,
}

/// Stand-in adversary satisfying the structural properties: each round picks
/// a group uniformly; the first visit to a group plays its first action, and
/// every later visit advances to the next action with probability `p`
/// (staying at the last action once reached).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Staircase {
    pub advance_prob: f64,
}

impl Staircase {
    pub fn new(advance_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&advance_prob) {
            return Err(Error::Config(format!("advance_prob {advance_prob} not in [0, 1]")));
        }
        Ok(Self { advance_prob })
    }

    /// `min(1, (M - 1) / T)`: about one full pass through each group.
    pub fn default_advance_prob(spec: &NormalFormAdversarySpec, horizon: usize) -> f64 {
        ((spec.action_count() - 1) as f64 / horizon.max(1) as f64).min(1.0)
    }
}

impl NormalFormAdversary for Staircase {
    fn sample(&self, spec: &NormalFormAdversarySpec, horizon: usize, rng: &mut dyn RngCore) -> AdversarySample {
        let d = spec.groups();
        let mut position: Vec<Option<usize>> = vec![None; d];
        let mut actions = Vec::with_capacity(horizon);
        let mut saturations = 0;
        for _ in 0..horizon {
            let i = rng.gen_range(0..d);
            let j = match position[i] {
                None => 0,
                Some(j) => {
                    if self.advance_prob > 0.0 && rng.gen_bool(self.advance_prob) {
                        if j + 1 < spec.group_sizes()[i] {
                            j + 1
                        } else {
                            saturations += 1;
                            j
                        }
                    } else {
                        j
                    }
                }
            };
            position[i] = Some(j);
            actions.push(spec.action(i, j));
        }
        if saturations > 0 {
            log::debug!("staircase walk saturated {saturations} times");
        }
        AdversarySample {
            actions,
            saturations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SequenceScan {
    /// Pairs of rounds `t < t'` in the same group with `j > j'`, counted
    /// once per offending round.
    pub order_violations: usize,
    pub reserved_uses: usize,
    pub out_of_range: usize,
}

impl SequenceScan {
    pub fn is_clean(&self) -> bool {
        *self == Self::default()
    }
}

/// Checks the reserved-action and increasing-order properties of a sequence.
pub fn scan_sequence(spec: &NormalFormAdversarySpec, actions: &[usize]) -> SequenceScan {
    let mut scan = SequenceScan::default();
    let mut highest: Vec<Option<usize>> = vec![None; spec.groups()];
    for &a in actions {
        if a == spec.reserved() {
            scan.reserved_uses += 1;
            continue;
        }
        let Some((i, j)) = spec.group_of(a) else {
            scan.out_of_range += 1;
            continue;
        };
        match highest[i] {
            Some(h) if j < h => scan.order_violations += 1,
            _ => highest[i] = Some(j),
        }
    }
    scan
}

/// Pure strategy of the two-level family in scaled form: a row and a sign
/// pattern (`true` is `+`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScaledStrategy {
    row: usize,
    signs: Vec<bool>,
}

impl ScaledStrategy {
    pub fn new(row: usize, signs: Vec<bool>) -> Self {
        Self { row, signs }
    }

    pub fn random(row: usize, n: usize, rng: &mut impl Rng) -> Self {
        Self {
            row,
            signs: (0..n).map(|_| rng.gen::<bool>()).collect(),
        }
    }

    pub fn row(&self) -> usize {
        self.row
    }

    pub fn signs(&self) -> &[bool] {
        &self.signs
    }

    pub fn n(&self) -> usize {
        self.signs.len()
    }

    /// Agreements minus disagreements; zero across rows.
    pub fn agreement(&self, other: &Self) -> i64 {
        if self.row != other.row {
            return 0;
        }
        self.signs
            .iter()
            .zip(&other.signs)
            .map(|(a, b)| if a == b { 1 } else { -1 })
            .sum()
    }

    /// `<x, y>` in scaled coordinates, computed exactly as `agreement / n`.
    pub fn dot(&self, other: &Self) -> f64 {
        self.agreement(other) as f64 / self.n() as f64
    }

    /// Dense `d x n` matrix, row-major.
    pub fn matrix(&self, d: usize) -> Vec<f64> {
        let n = self.n();
        let s = 1.0 / (n as f64).sqrt();
        let mut out = vec![0.0; d * n];
        for (j, &plus) in self.signs.iter().enumerate() {
            out[self.row * n + j] = if plus { s } else { -s };
        }
        out
    }

    pub fn bitstring(&self) -> String {
        self.signs.iter().map(|&p| if p { '1' } else { '0' }).collect()
    }

    pub fn to_realization(&self, d: usize) -> PureStrategy {
        let n = self.n();
        let support = self
            .signs
            .iter()
            .enumerate()
            .map(|(j, &plus)| fig1_terminal(n, self.row, j, plus) as u32)
            .collect();
        PureStrategy::from_sorted(2 * d * n, support)
    }

    /// Inverse of [`Self::to_realization`]; fails for non-strategies.
    pub fn from_realization(x: &PureStrategy, d: usize, n: usize) -> Result<Self> {
        check_dim(2 * d * n, x.dim())?;
        let s = x.support();
        let bad = || Error::InvalidDistribution(format!("{x:?} is not a pure strategy of fig1 d={d} n={n}"));
        if s.len() != n {
            return Err(bad());
        }
        let row = s[0] as usize / (2 * n);
        let mut signs = Vec::with_capacity(n);
        for (j, &z) in s.iter().enumerate() {
            let z = z as usize;
            if z / (2 * n) != row || (z / 2) % n != j {
                return Err(bad());
            }
            signs.push(z.is_multiple_of(2));
        }
        Ok(Self { row, signs })
    }
}

/// Shape of the two-level family and the linear map between realization and
/// scaled coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fig1Geometry {
    pub d: usize,
    pub n: usize,
}

impl Fig1Geometry {
    /// Realization vectors (any real vector of length `2dn`) to scaled.
    pub fn to_scaled(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(2 * self.d * self.n, x.len())?;
        let s = 1.0 / (self.n as f64).sqrt();
        Ok((0..self.d * self.n)
            .map(|k| (x[2 * k] - x[2 * k + 1]) * s)
            .collect())
    }

    /// Adjoint of [`Self::to_scaled`]: scaled utilities to realization
    /// utilities with `<adjoint(u), x> = <u, to_scaled(x)>`.
    pub fn utility_to_realization(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d * self.n, u.len())?;
        let s = 1.0 / (self.n as f64).sqrt();
        Ok(u.iter().flat_map(|&v| [v * s, -v * s]).collect())
    }
}

/// Codeword table and the tree-form problem it lives in.
#[derive(Debug, Clone)]
pub struct EmbeddingInstance {
    geometry: Fig1Geometry,
    spec: NormalFormAdversarySpec,
    codewords: Vec<ScaledStrategy>,
    reserved: ScaledStrategy,
    problem: Arc<TreeFormProblem>,
}

/// Draws one codeword per non-reserved action (row = its group), then the
/// reserved action's strategy from row 0, all from the seed's embedding
/// stream.
pub fn sample_embedding(spec: &NormalFormAdversarySpec, d: usize, n: usize, seed: u64) -> Result<EmbeddingInstance> {
    if spec.groups() != d {
        return Err(Error::Config(format!(
            "partition has {} groups but d = {d}",
            spec.groups()
        )));
    }
    let mut r = rng(seed, Purpose::Embedding);
    let codewords = (0..spec.reserved())
        .map(|a| {
            let (i, _) = spec.group_of(a).expect("non-reserved action");
            ScaledStrategy::random(i, n, &mut r)
        })
        .collect();
    let reserved = ScaledStrategy::random(0, n, &mut r);
    Ok(EmbeddingInstance {
        geometry: Fig1Geometry { d, n },
        spec: spec.clone(),
        codewords,
        reserved,
        problem: Arc::new(TreeFormProblem::fig1(d, n)?),
    })
}

impl EmbeddingInstance {
    /// Assembles an instance from explicit codewords (one per non-reserved
    /// action, in action order).
    pub fn from_codewords(
        spec: NormalFormAdversarySpec,
        n: usize,
        codewords: Vec<ScaledStrategy>,
        reserved: ScaledStrategy,
    ) -> Result<Self> {
        let d = spec.groups();
        check_dim(spec.reserved(), codewords.len())?;
        for (a, c) in codewords.iter().enumerate() {
            let (i, _) = spec.group_of(a).expect("non-reserved action");
            if c.row() != i || c.n() != n {
                return Err(Error::Config(format!("codeword for action {a} has wrong shape")));
            }
        }
        if reserved.n() != n || reserved.row() >= d {
            return Err(Error::Config("reserved strategy has wrong shape".into()));
        }
        Ok(Self {
            geometry: Fig1Geometry { d, n },
            spec,
            codewords,
            reserved,
            problem: Arc::new(TreeFormProblem::fig1(d, n)?),
        })
    }

    pub fn d(&self) -> usize {
        self.geometry.d
    }

    pub fn n(&self) -> usize {
        self.geometry.n
    }

    pub fn geometry(&self) -> Fig1Geometry {
        self.geometry
    }

    pub fn spec(&self) -> &NormalFormAdversarySpec {
        &self.spec
    }

    pub fn problem(&self) -> &Arc<TreeFormProblem> {
        &self.problem
    }

    /// Codewords of the non-reserved actions, in action order.
    pub fn codewords(&self) -> &[ScaledStrategy] {
        &self.codewords
    }

    /// `psi(a)`; for `a*` the reserved strategy.
    pub fn psi(&self, a: usize) -> &ScaledStrategy {
        if a == self.spec.reserved() {
            &self.reserved
        } else {
            &self.codewords[a]
        }
    }

    pub fn realization(&self, a: usize) -> PureStrategy {
        self.psi(a).to_realization(self.d())
    }

    /// Realization-space utility vector of action `a`; `a*` is rejected.
    pub fn utility(&self, a: usize) -> Result<UtilityVector> {
        if a >= self.spec.reserved() {
            return Err(Error::Contract(format!("action {a} has no utility (reserved or out of range)")));
        }
        let u = self
            .geometry
            .utility_to_realization(&self.codewords[a].matrix(self.d()))?;
        UtilityVector::new(u)
    }

    /// Scaled form of a pure strategy of the problem.
    pub fn scaled(&self, x: &PureStrategy) -> Result<ScaledStrategy> {
        ScaledStrategy::from_realization(x, self.d(), self.n())
    }

    /// CSV export: `action,i,j,sign_pattern` with 1-based `i, j`; the
    /// reserved action is written with `j = 0`.
    pub fn write_csv(&self, out: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["action", "i", "j", "sign_pattern"])?;
        for (a, c) in self.codewords.iter().enumerate() {
            let (i, j) = self.spec.group_of(a).expect("non-reserved action");
            w.write_record([a.to_string(), (i + 1).to_string(), (j + 1).to_string(), c.bitstring()])?;
        }
        w.write_record([
            self.spec.reserved().to_string(),
            (self.reserved.row() + 1).to_string(),
            "0".into(),
            self.reserved.bitstring(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Replays a normal-form action sequence as realization-space utilities.
pub fn embedded_adversary(emb: &EmbeddingInstance, actions: &[usize]) -> Result<Vec<UtilityVector>> {
    let mut cache: Vec<Option<UtilityVector>> = vec![None; emb.spec().reserved()];
    actions
        .iter()
        .map(|&a| {
            if a >= emb.spec().reserved() {
                return Err(Error::Contract(format!(
                    "adversary played action {a}, which is reserved or out of range"
                )));
            }
            if cache[a].is_none() {
                cache[a] = Some(emb.utility(a)?);
            }
            Ok(cache[a].clone().expect("filled above"))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationCheck {
    /// Event F: every pair of distinct actions has `|<psi(a), psi(a')>| <= eps`.
    pub holds: bool,
    /// Offending pairs `(a, a', inner product)` with `a < a'`.
    pub violations: Vec<(usize, usize, f64)>,
}

/// Checks event F over all pairs of distinct actions, the reserved one
/// included. Cross-row pairs are orthogonal and skipped.
pub fn check_concentration(emb: &EmbeddingInstance, eps: f64) -> ConcentrationCheck {
    let m = emb.spec().action_count();
    let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); emb.d()];
    for a in 0..m {
        by_row[emb.psi(a).row()].push(a);
    }
    let mut violations = Vec::new();
    for row in &by_row {
        for (k, &a) in row.iter().enumerate() {
            for &b in &row[k + 1..] {
                let ip = emb.psi(a).dot(emb.psi(b));
                if ip.abs() > eps {
                    violations.push((a.min(b), a.max(b), ip));
                }
            }
        }
    }
    violations.sort_by_key(|v| (v.0, v.1));
    ConcentrationCheck {
        holds: violations.is_empty(),
        violations,
    }
}

/// Default cap on the embedding dimension `n` chosen by
/// [`select_parameters`].
pub const DEFAULT_N_CAP: u64 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundParameters {
    pub c: f64,
    pub d: usize,
    /// Number of normal-form actions `M`.
    pub actions: usize,
    pub eps: f64,
    pub n: usize,
    pub delta: f64,
}

impl LowerBoundParameters {
    /// Dimension `d * n` of the scaled strategy space.
    pub fn dimension(&self) -> usize {
        self.d * self.n
    }
}

/// `M^2 exp(-n eps^2 / 2)`.
pub fn failure_bound(actions: usize, n: usize, eps: f64) -> f64 {
    (actions as f64).powi(2) * (-(n as f64) * eps * eps / 2.0).exp()
}

/// `eps = 1/(4 C d^6)`, `n = ceil(2 ln(20 C M^2 d^6) / eps^2)`,
/// `delta = M^2 exp(-n eps^2 / 2)`.
pub fn select_parameters(c: f64, d: usize, actions: usize, n_cap: u64) -> Result<LowerBoundParameters> {
    if !(c >= 1.0) || d == 0 || actions < 2 {
        return Err(Error::Config(format!(
            "select_parameters needs C >= 1, d >= 1, M >= 2 (got C={c}, d={d}, M={actions})"
        )));
    }
    let d6 = (d as f64).powi(6);
    let m = actions as f64;
    let eps = 1.0 / (4.0 * c * d6);
    let n_real = (2.0 * (20.0 * c * m * m * d6).ln() / (eps * eps)).ceil();
    if !(n_real <= n_cap as f64) {
        return Err(Error::Capacity {
            what: format!("embedding dimension n for C={c}, d={d}, M={actions}"),
            count: if n_real.is_finite() { n_real as u128 } else { u128::MAX },
            cap: n_cap as u128,
        });
    }
    let n = n_real as usize;
    let delta = failure_bound(actions, n, eps);
    debug_assert!(5.0 * delta <= eps * (1.0 + 1e-12));
    Ok(LowerBoundParameters {
        c,
        d,
        actions,
        eps,
        n,
        delta,
    })
}
