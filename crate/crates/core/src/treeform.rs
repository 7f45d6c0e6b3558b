//! Tree-form decision problems and realization-form strategies.
//!
//! A problem is a rooted tree of decision points (the agent picks one child),
//! observation points (the environment picks one child, so a strategy must
//! cover all of them) and terminals. A pure strategy is represented by its
//! realization vector over terminals: `x[z] = 1` iff every action on the
//! root-to-`z` path is selected.
//!
//! Terminal indices are 0-based in code. The text problem format (see
//! [`format`]) writes them 1-based.

pub mod format;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{check_dim, Error, Result};

/// Default guardrail for [`TreeFormProblem::enumerate_pure_strategies`].
pub const DEFAULT_ENUMERATION_CAP: usize = 1 << 20;

/// Tolerance for "sums to one" checks on probability vectors.
pub const PROB_TOL: f64 = 1e-9;

pub type NodeId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Decision { children: Vec<NodeId> },
    Observation { children: Vec<NodeId> },
    Terminal { index: usize },
}

/// A single-agent tree-form decision problem. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeFormProblem {
    nodes: Vec<Node>,
    root: NodeId,
    terminal_count: usize,
}

impl TreeFormProblem {
    /// Builds a problem from an arena of nodes, checking that it is a rooted
    /// tree whose terminal indices are exactly `0..m`.
    pub fn new(nodes: Vec<Node>, root: NodeId) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        if root >= nodes.len() {
            return bad(format!("root {root} out of range"));
        }
        let mut parent_count = vec![0usize; nodes.len()];
        let mut terminals = Vec::new();
        for (id, node) in nodes.iter().enumerate() {
            match node {
                Node::Decision { children } | Node::Observation { children } => {
                    if children.is_empty() {
                        return bad(format!("node {id} has no children"));
                    }
                    for &c in children {
                        if c >= nodes.len() {
                            return bad(format!("node {id} references missing child {c}"));
                        }
                        parent_count[c] += 1;
                    }
                }
                Node::Terminal { index } => terminals.push(*index),
            }
        }
        if parent_count[root] != 0 {
            return bad("root has a parent".into());
        }
        for (id, &count) in parent_count.iter().enumerate() {
            if id != root && count != 1 {
                return bad(format!("node {id} has {count} parents"));
            }
        }
        // Every node has one parent and the root has none: the graph is a tree
        // iff every node is reachable from the root.
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            if std::mem::replace(&mut seen[id], true) {
                return bad(format!("cycle through node {id}"));
            }
            if let Node::Decision { children } | Node::Observation { children } = &nodes[id] {
                stack.extend(children.iter().copied());
            }
        }
        if let Some(id) = seen.iter().position(|s| !s) {
            return bad(format!("node {id} is unreachable from the root"));
        }
        let m = terminals.len();
        let mut hit = vec![false; m];
        for z in terminals {
            if z >= m || std::mem::replace(&mut hit[z], true) {
                return bad(format!("terminal indices are not a bijection onto 1..={m}"));
            }
        }
        Ok(Self {
            nodes,
            root,
            terminal_count: m,
        })
    }

    /// One decision point with `k` terminal children: the `k`-simplex.
    pub fn simplex(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidProblem("simplex needs at least one action".into()));
        }
        let mut nodes = vec![Node::Decision {
            children: (1..=k).collect(),
        }];
        nodes.extend((0..k).map(|index| Node::Terminal { index }));
        Self::new(nodes, 0)
    }

    /// The two-level embedding family: the agent picks a row `i in 0..d`, the
    /// environment picks a column `j in 0..n`, then the agent picks a sign.
    ///
    /// Terminals are ordered row-major, see [`fig1_terminal`].
    pub fn fig1(d: usize, n: usize) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(Error::InvalidProblem("fig1 needs d >= 1 and n >= 1".into()));
        }
        let mut nodes = Vec::with_capacity(1 + d * (1 + 3 * n));
        nodes.push(Node::Decision { children: vec![] });
        let mut root_children = Vec::with_capacity(d);
        for i in 0..d {
            let obs = nodes.len();
            root_children.push(obs);
            nodes.push(Node::Observation { children: vec![] });
            let mut obs_children = Vec::with_capacity(n);
            for j in 0..n {
                let dec = nodes.len();
                obs_children.push(dec);
                nodes.push(Node::Decision {
                    children: vec![dec + 1, dec + 2],
                });
                nodes.push(Node::Terminal {
                    index: fig1_terminal(n, i, j, true),
                });
                nodes.push(Node::Terminal {
                    index: fig1_terminal(n, i, j, false),
                });
            }
            nodes[obs] = Node::Observation {
                children: obs_children,
            };
        }
        nodes[0] = Node::Decision {
            children: root_children,
        };
        Self::new(nodes, 0)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Number of terminals `m`; the dimension of realization vectors.
    pub fn terminal_count(&self) -> usize {
        self.terminal_count
    }

    /// Number of distinct pure strategies (realization vectors), saturating.
    pub fn strategy_count(&self) -> u128 {
        self.count_from(self.root)
    }

    fn count_from(&self, id: NodeId) -> u128 {
        match &self.nodes[id] {
            Node::Terminal { .. } => 1,
            Node::Decision { children } => children
                .iter()
                .fold(0u128, |acc, &c| acc.saturating_add(self.count_from(c))),
            Node::Observation { children } => children
                .iter()
                .fold(1u128, |acc, &c| acc.saturating_mul(self.count_from(c))),
        }
    }

    /// Whether `x` is the realization vector of some pure strategy.
    pub fn validate_realization(&self, x: &[u8]) -> Result<bool> {
        check_dim(self.terminal_count, x.len())?;
        if x.iter().any(|&v| v > 1) {
            return Ok(false);
        }
        Ok(self.consistent(self.root, true, x))
    }

    fn any_set(&self, id: NodeId, x: &[u8]) -> bool {
        match &self.nodes[id] {
            Node::Terminal { index } => x[*index] == 1,
            Node::Decision { children } | Node::Observation { children } => {
                children.iter().any(|&c| self.any_set(c, x))
            }
        }
    }

    fn consistent(&self, id: NodeId, reached: bool, x: &[u8]) -> bool {
        match &self.nodes[id] {
            Node::Terminal { index } => (x[*index] == 1) == reached,
            Node::Observation { children } => {
                children.iter().all(|&c| self.consistent(c, reached, x))
            }
            Node::Decision { children } => {
                if !reached {
                    return !self.any_set(id, x);
                }
                let mut selected = children.iter().filter(|&&c| self.any_set(c, x));
                match (selected.next(), selected.next()) {
                    (Some(&chosen), None) => children
                        .iter()
                        .all(|&c| self.consistent(c, c == chosen, x)),
                    _ => false,
                }
            }
        }
    }

    /// All pure strategies in depth-first, action order. Fails with a
    /// capacity error when there are more than `cap`.
    pub fn enumerate_pure_strategies(&self, cap: usize) -> Result<Vec<PureStrategy>> {
        let count = self.strategy_count();
        if count > cap as u128 {
            return Err(Error::Capacity {
                what: "pure strategies".into(),
                count,
                cap: cap as u128,
            });
        }
        Ok(self
            .supports_from(self.root)
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                PureStrategy::from_sorted(self.terminal_count, s)
            })
            .collect())
    }

    fn supports_from(&self, id: NodeId) -> Vec<Vec<u32>> {
        match &self.nodes[id] {
            Node::Terminal { index } => vec![vec![*index as u32]],
            Node::Decision { children } => children
                .iter()
                .flat_map(|&c| self.supports_from(c))
                .collect(),
            Node::Observation { children } => {
                let mut acc: Vec<Vec<u32>> = vec![vec![]];
                for &c in children {
                    let sub = self.supports_from(c);
                    acc = acc
                        .iter()
                        .flat_map(|prefix| {
                            sub.iter().map(move |s| {
                                let mut v = prefix.clone();
                                v.extend_from_slice(s);
                                v
                            })
                        })
                        .collect();
                }
                acc
            }
        }
    }

    /// Maximizes `<g, x>` over pure strategies by dynamic programming.
    ///
    /// Ties at a decision point go to the lowest action index. The returned
    /// value is `<g, x>` for the returned `x`, summed in terminal order.
    pub fn best_response(&self, g: &[f64]) -> Result<(PureStrategy, f64)> {
        check_dim(self.terminal_count, g.len())?;
        let mut support = Vec::new();
        self.best_from(self.root, g, &mut support);
        support.sort_unstable();
        let x = PureStrategy::from_sorted(self.terminal_count, support);
        let value = x.dot(g);
        Ok((x, value))
    }

    fn value_from(&self, id: NodeId, g: &[f64]) -> f64 {
        match &self.nodes[id] {
            Node::Terminal { index } => g[*index],
            Node::Observation { children } => children.iter().map(|&c| self.value_from(c, g)).sum(),
            Node::Decision { children } => self.best_child(children, g).1,
        }
    }

    fn best_child(&self, children: &[NodeId], g: &[f64]) -> (NodeId, f64) {
        let mut best = (children[0], self.value_from(children[0], g));
        for &c in &children[1..] {
            let v = self.value_from(c, g);
            if v > best.1 {
                best = (c, v);
            }
        }
        best
    }

    fn best_from(&self, id: NodeId, g: &[f64], support: &mut Vec<u32>) {
        match &self.nodes[id] {
            Node::Terminal { index } => support.push(*index as u32),
            Node::Observation { children } => {
                for &c in children {
                    self.best_from(c, g, support);
                }
            }
            Node::Decision { children } => {
                let (c, _) = self.best_child(children, g);
                self.best_from(c, g, support);
            }
        }
    }
}

/// Terminal index of `(row i, column j, sign)` in [`TreeFormProblem::fig1`]:
/// row-major in `i`, then `j`, then `+` before `-`.
pub fn fig1_terminal(n: usize, i: usize, j: usize, plus: bool) -> usize {
    (i * n + j) * 2 + usize::from(!plus)
}

/// Realization-form pure strategy, stored as the sorted list of terminals set
/// to one. Cheap to clone.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PureStrategy {
    dim: usize,
    support: Arc<[u32]>,
}

impl PureStrategy {
    pub(crate) fn from_sorted(dim: usize, support: Vec<u32>) -> Self {
        debug_assert!(support.windows(2).all(|w| w[0] < w[1]));
        Self {
            dim,
            support: support.into(),
        }
    }

    /// From a 0/1 realization vector. Does not check tree consistency; see
    /// [`TreeFormProblem::validate_realization`].
    pub fn from_realization(x: &[u8]) -> Result<Self> {
        if let Some(&v) = x.iter().find(|&&v| v > 1) {
            return Err(Error::InvalidDistribution(format!(
                "realization entry {v} is not 0 or 1"
            )));
        }
        let support = x
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(z, _)| z as u32)
            .collect();
        Ok(Self::from_sorted(x.len(), support))
    }

    /// Basis vector `e_k` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        assert!(k < dim);
        Self::from_sorted(dim, vec![k as u32])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Terminals set to one, ascending.
    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn realization(&self) -> Vec<u8> {
        let mut x = vec![0u8; self.dim];
        for &z in self.support.iter() {
            x[z as usize] = 1;
        }
        x
    }

    /// `<g, x>`, summed in ascending terminal order.
    pub fn dot(&self, g: &[f64]) -> f64 {
        self.support.iter().map(|&z| g[z as usize]).sum()
    }
}

impl fmt::Debug for PureStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bits: String = self
            .realization()
            .iter()
            .map(|&b| if b == 1 { '1' } else { '0' })
            .collect();
        write!(f, "PureStrategy({bits})")
    }
}

/// Finite distribution over pure strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedStrategy {
    dim: usize,
    entries: Vec<(PureStrategy, f64)>,
}

impl MixedStrategy {
    /// Weights must be nonnegative and sum to one within [`PROB_TOL`].
    /// Duplicate strategies are merged; zero weights are kept.
    pub fn new(entries: Vec<(PureStrategy, f64)>) -> Result<Self> {
        let Some(dim) = entries.first().map(|(x, _)| x.dim()) else {
            return Err(Error::InvalidDistribution("empty support".into()));
        };
        let mut merged: Vec<(PureStrategy, f64)> = Vec::with_capacity(entries.len());
        let mut index: HashMap<PureStrategy, usize> = HashMap::new();
        let mut total = 0.0;
        for (x, p) in entries {
            check_dim(dim, x.dim())?;
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidDistribution(format!("weight {p} is not >= 0")));
            }
            total += p;
            match index.get(&x) {
                Some(&k) => merged[k].1 += p,
                None => {
                    index.insert(x.clone(), merged.len());
                    merged.push((x, p));
                }
            }
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Ok(Self {
            dim,
            entries: merged,
        })
    }

    pub fn point(x: PureStrategy) -> Self {
        Self {
            dim: x.dim(),
            entries: vec![(x, 1.0)],
        }
    }

    pub fn uniform(xs: &[PureStrategy]) -> Result<Self> {
        let p = 1.0 / xs.len() as f64;
        Self::new(xs.iter().map(|x| (x.clone(), p)).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(PureStrategy, f64)] {
        &self.entries
    }

    pub fn prob(&self, x: &PureStrategy) -> f64 {
        self.entries
            .iter()
            .filter(|(y, _)| y == x)
            .map(|(_, p)| p)
            .sum()
    }

    /// The point `sum_x pi(x) x` of the convex hull.
    pub fn mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (x, p) in &self.entries {
            for &z in x.support() {
                out[z as usize] += p;
            }
        }
        out
    }
}

/// Utility vector over terminals with entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityVector(Vec<f64>);

impl UtilityVector {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if let Some(v) = u.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(Error::InvalidDistribution(format!(
                "utility entry {v} outside [-1, 1]"
            )));
        }
        Ok(Self(u))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for UtilityVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `E_{x ~ pi} <u, x>`.
pub fn expected_utility(pi: &MixedStrategy, u: &UtilityVector) -> Result<f64> {
    check_dim(pi.dim(), u.len())?;
    Ok(pi.entries().iter().map(|(x, p)| p * x.dot(u)).sum())
}
