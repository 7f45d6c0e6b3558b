#![allow(dead_code)]

use rand::Rng;
use swapreg::treeform::Node;
use swapreg::{MixedStrategy, PureStrategy, TreeFormProblem, UtilityVector};

struct Builder {
    nodes: Vec<Node>,
    terminals: usize,
}

impl Builder {
    fn leaf(&mut self) -> usize {
        self.nodes.push(Node::Terminal { index: self.terminals });
        self.terminals += 1;
        self.nodes.len() - 1
    }

    fn grow(&mut self, decision: bool, depth: usize, rng: &mut impl Rng) -> usize {
        let width = rng.gen_range(1..=3);
        let children = (0..width)
            .map(|_| {
                if depth == 0 || rng.gen_bool(0.5) {
                    self.leaf()
                } else {
                    self.grow(!decision, depth - 1, rng)
                }
            })
            .collect();
        self.nodes.push(if decision {
            Node::Decision { children }
        } else {
            Node::Observation { children }
        });
        self.nodes.len() - 1
    }
}

/// Random tree with terminal indices shuffled, rejecting until it has at most
/// `max_strategies` pure strategies.
pub fn random_problem(max_strategies: u128, rng: &mut impl Rng) -> TreeFormProblem {
    loop {
        let mut b = Builder {
            nodes: Vec::new(),
            terminals: 0,
        };
        let root = b.grow(rng.gen_bool(0.7), 3, rng);
        let mut perm: Vec<usize> = (0..b.terminals).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        for node in &mut b.nodes {
            if let Node::Terminal { index } = node {
                *index = perm[*index];
            }
        }
        let p = TreeFormProblem::new(b.nodes, root).expect("generated tree is valid");
        if p.strategy_count() <= max_strategies {
            return p;
        }
    }
}

pub fn random_utility(m: usize, rng: &mut impl Rng) -> UtilityVector {
    UtilityVector::new((0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect()).unwrap()
}

/// Random distribution over a random nonempty subset of `xs`.
pub fn random_mixed(xs: &[PureStrategy], rng: &mut impl Rng) -> MixedStrategy {
    let mut entries = Vec::new();
    while entries.is_empty() {
        for x in xs {
            if rng.gen_bool(0.6) {
                entries.push((x.clone(), rng.gen_range(0.05..1.0)));
            }
        }
    }
    let s: f64 = entries.iter().map(|(_, w)| w).sum();
    for e in &mut entries {
        e.1 /= s;
    }
    MixedStrategy::new(entries).unwrap()
}
