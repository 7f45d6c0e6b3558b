//! Plain-text problem files.
//!
//! ```text
//! file      := line*
//! line      := blank | comment | header | root | node | shortcut
//! comment   := '#' any*
//! header    := 'treeform' version          (optional, version = 1)
//! root      := 'root' id
//! node      := id kind
//! kind      := 'decision' id+ | 'observation' id+ | 'terminal' z
//! shortcut  := 'fig1' 'd=' int 'n=' int | 'simplex' 'k=' int
//! ```
//!
//! `id` is any whitespace-free token; `z` is a 1-based terminal index. A
//! shortcut line must be the only non-comment line in the file. Without a
//! `root` line the first declared node is the root.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{Node, TreeFormProblem};
use crate::error::{Error, Result};

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn keyed(line: usize, tok: Option<&str>, key: &str) -> Result<usize> {
    tok.and_then(|t| t.strip_prefix(key))
        .and_then(|v| v.strip_prefix('='))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| parse_err(line, format!("expected {key}=<int>")))
}

/// Parses a problem file. See the module docs for the grammar.
pub fn parse_problem(text: &str) -> Result<TreeFormProblem> {
    let lines: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.split('#').next().unwrap_or("")))
        .map(|(k, l)| (k, l.split_whitespace().collect::<Vec<_>>()))
        .filter(|(_, toks)| !toks.is_empty())
        .collect();

    if let Some((line, toks)) = lines.iter().find(|(_, t)| t[0] == "fig1" || t[0] == "simplex") {
        if lines.len() != 1 {
            return Err(parse_err(*line, "a shortcut must be the only statement"));
        }
        if toks[0] == "fig1" {
            if toks.len() != 3 {
                return Err(parse_err(*line, "usage: fig1 d=<d> n=<n>"));
            }
            let d = keyed(*line, toks.get(1).copied(), "d")?;
            let n = keyed(*line, toks.get(2).copied(), "n")?;
            return TreeFormProblem::fig1(d, n);
        }
        if toks.len() != 2 {
            return Err(parse_err(*line, "usage: simplex k=<k>"));
        }
        return TreeFormProblem::simplex(keyed(*line, toks.get(1).copied(), "k")?);
    }

    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut decls: Vec<(usize, &str, &[&str])> = Vec::new();
    let mut root: Option<(usize, &str)> = None;
    for (line, toks) in &lines {
        match toks[0] {
            "treeform" => {
                if toks.get(1) != Some(&"1") || toks.len() != 2 {
                    return Err(parse_err(*line, "unsupported header, expected `treeform 1`"));
                }
            }
            "root" => {
                if toks.len() != 2 || root.is_some() {
                    return Err(parse_err(*line, "expected a single `root <id>`"));
                }
                root = Some((*line, toks[1]));
            }
            id => {
                if toks.len() < 3 {
                    return Err(parse_err(*line, "expected `<id> <kind> <args>`"));
                }
                if ids.insert(id, decls.len()).is_some() {
                    return Err(parse_err(*line, format!("duplicate node id {id}")));
                }
                decls.push((*line, toks[1], &toks[2..]));
            }
        }
    }
    if decls.is_empty() {
        return Err(parse_err(0, "no nodes declared"));
    }

    let lookup = |line: usize, id: &str| {
        ids.get(id)
            .copied()
            .ok_or_else(|| parse_err(line, format!("unknown node id {id}")))
    };
    let mut nodes = Vec::with_capacity(decls.len());
    for (line, kind, args) in &decls {
        let node = match *kind {
            "decision" | "observation" => {
                let children = args
                    .iter()
                    .map(|c| lookup(*line, c))
                    .collect::<Result<Vec<_>>>()?;
                if *kind == "decision" {
                    Node::Decision { children }
                } else {
                    Node::Observation { children }
                }
            }
            "terminal" => {
                let z: usize = match args {
                    [z] => z.parse().map_err(|_| parse_err(*line, "bad terminal index"))?,
                    _ => return Err(parse_err(*line, "terminal takes one index")),
                };
                if z == 0 {
                    return Err(parse_err(*line, "terminal indices are 1-based"));
                }
                Node::Terminal { index: z - 1 }
            }
            other => return Err(parse_err(*line, format!("unknown node kind {other}"))),
        };
        nodes.push(node);
    }
    let root = match root {
        Some((line, id)) => lookup(line, id)?,
        None => 0,
    };
    TreeFormProblem::new(nodes, root)
}

/// Writes a problem in the explicit node-list form, ids = arena indices.
pub fn write_problem(problem: &TreeFormProblem) -> String {
    let mut out = String::from("treeform 1\n");
    let _ = writeln!(out, "root {}", problem.root());
    for (id, node) in problem.nodes().iter().enumerate() {
        let _ = match node {
            Node::Decision { children } => writeln!(out, "{id} decision {}", join(children)),
            Node::Observation { children } => writeln!(out, "{id} observation {}", join(children)),
            Node::Terminal { index } => writeln!(out, "{id} terminal {}", index + 1),
        };
    }
    out
}

fn join(ids: &[usize]) -> String {
    ids.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortcuts() {
        let p = parse_problem("# the family\nfig1 d=2 n=3\n").unwrap();
        assert_eq!(p, TreeFormProblem::fig1(2, 3).unwrap());
        let p = parse_problem("simplex k=4").unwrap();
        assert_eq!(p, TreeFormProblem::simplex(4).unwrap());
        assert!(parse_problem("fig1 d=2").is_err());
        assert!(parse_problem("fig1 d=2 n=2\nroot a").is_err());
    }

    #[test]
    fn explicit_nodes() {
        let text = "treeform 1\nroot r\nr decision a b\na terminal 2\nb terminal 1\n";
        let p = parse_problem(text).unwrap();
        assert_eq!(p.terminal_count(), 2);
        let (x, _) = p.best_response(&[0.0, 1.0]).unwrap();
        assert_eq!(x.realization(), vec![0, 1]);
    }

    #[test]
    fn written_form_parses_back() {
        let p = TreeFormProblem::fig1(3, 2).unwrap();
        assert_eq!(parse_problem(&write_problem(&p)).unwrap(), p);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_problem("r decision a\na terminal 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_problem("r decision zz\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }
}
