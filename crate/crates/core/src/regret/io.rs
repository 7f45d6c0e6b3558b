//! CSV export/import of transcripts.
//!
//! Three tables:
//! - strategies: `strategy_id,realization` (realization as a 0/1 bitstring)
//! - probabilities: `t,strategy_id,probability`
//! - utilities: `t,terminal_index,utility`
//!
//! Rounds `t` and terminal indices are 1-based. Missing utility entries read
//! back as zero.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::Transcript;
use crate::error::{Error, Result};
use crate::treeform::{MixedStrategy, PureStrategy, TreeFormProblem, UtilityVector};

pub const STRATEGIES_FILE: &str = "strategies.csv";
pub const PROBABILITIES_FILE: &str = "probabilities.csv";
pub const UTILITIES_FILE: &str = "utilities.csv";

pub fn bitstring(x: &PureStrategy) -> String {
    x.realization().iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
}

fn parse_bits(s: &str) -> Result<Vec<u8>> {
    s.bytes()
        .map(|b| match b {
            b'0' => Ok(0),
            b'1' => Ok(1),
            _ => Err(Error::Config(format!("bad realization bitstring {s:?}"))),
        })
        .collect()
}

pub fn write_transcript(
    tr: &Transcript,
    strategies: impl Write,
    probabilities: impl Write,
    utilities: impl Write,
) -> Result<()> {
    let mut ids: HashMap<PureStrategy, usize> = HashMap::new();
    let mut sw = csv::Writer::from_writer(strategies);
    let mut pw = csv::Writer::from_writer(probabilities);
    let mut uw = csv::Writer::from_writer(utilities);
    sw.write_record(["strategy_id", "realization"])?;
    pw.write_record(["t", "strategy_id", "probability"])?;
    uw.write_record(["t", "terminal_index", "utility"])?;
    for (t, (pi, u)) in tr.rounds().iter().enumerate() {
        let t = (t + 1).to_string();
        for (x, p) in pi.entries() {
            let id = match ids.get(x) {
                Some(&id) => id,
                None => {
                    let id = ids.len();
                    sw.write_record([id.to_string(), bitstring(x)])?;
                    ids.insert(x.clone(), id);
                    id
                }
            };
            pw.write_record([t.clone(), id.to_string(), p.to_string()])?;
        }
        for (z, v) in u.iter().enumerate() {
            uw.write_record([t.clone(), (z + 1).to_string(), v.to_string()])?;
        }
    }
    sw.flush()?;
    pw.flush()?;
    uw.flush()?;
    Ok(())
}

pub fn read_transcript(
    problem: Arc<TreeFormProblem>,
    strategies: impl Read,
    probabilities: impl Read,
    utilities: impl Read,
) -> Result<Transcript> {
    let m = problem.terminal_count();
    let mut table: HashMap<String, PureStrategy> = HashMap::new();
    for rec in csv::Reader::from_reader(strategies).records() {
        let rec = rec?;
        let bits = parse_bits(&rec[1])?;
        if !problem.validate_realization(&bits)? {
            return Err(Error::Config(format!("strategy {} is not a valid realization", &rec[0])));
        }
        table.insert(rec[0].to_string(), PureStrategy::from_realization(&bits)?);
    }

    let parse_t = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| Error::Config(format!("bad round index {s:?}")))
    };
    let parse_f = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad number {s:?}")))
    };

    let mut dists: Vec<Vec<(PureStrategy, f64)>> = Vec::new();
    for rec in csv::Reader::from_reader(probabilities).records() {
        let rec = rec?;
        let t = parse_t(&rec[0])?;
        let x = table
            .get(&rec[1])
            .ok_or_else(|| Error::Config(format!("unknown strategy id {}", &rec[1])))?;
        if dists.len() < t {
            dists.resize(t, Vec::new());
        }
        dists[t - 1].push((x.clone(), parse_f(&rec[2])?));
    }
    let mut utils: Vec<Vec<f64>> = vec![vec![0.0; m]; dists.len()];
    for rec in csv::Reader::from_reader(utilities).records() {
        let rec = rec?;
        let t = parse_t(&rec[0])?;
        let z = parse_t(&rec[1])?;
        if t > utils.len() || z > m {
            return Err(Error::Config(format!("utility entry ({t}, {z}) out of range")));
        }
        utils[t - 1][z - 1] = parse_f(&rec[2])?;
    }
    let rounds = dists
        .into_iter()
        .zip(utils)
        .map(|(d, u)| Ok((MixedStrategy::new(d)?, UtilityVector::new(u)?)))
        .collect::<Result<Vec<_>>>()?;
    Transcript::from_rounds(problem, rounds)
}

/// Writes the three tables into `dir` under their standard names.
pub fn write_transcript_dir(tr: &Transcript, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_transcript(
        tr,
        File::create(dir.join(STRATEGIES_FILE))?,
        File::create(dir.join(PROBABILITIES_FILE))?,
        File::create(dir.join(UTILITIES_FILE))?,
    )
}

pub fn read_transcript_dir(problem: Arc<TreeFormProblem>, dir: &Path) -> Result<Transcript> {
    read_transcript(
        problem,
        File::open(dir.join(STRATEGIES_FILE))?,
        File::open(dir.join(PROBABILITIES_FILE))?,
        File::open(dir.join(UTILITIES_FILE))?,
    )
}
