use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use swapreg::cli::{self, RunConfig};
use swapreg::regret::io::read_transcript_dir;
use swapreg::treeform::format::parse_problem;
use swapreg::TreeFormProblem;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swapreg"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const DYNAMICS: &str = r#"
schema_version = 1
kind = "dynamics"
T = 300
seeds = [7, 7]
learner = "hedge"
problem = "fig1 d=2 n=2"
adversary = "uniform"
curve_points = 5
write_transcripts = true
"#;

#[test]
fn repeated_seed_gives_identical_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "dyn.toml", DYNAMICS);
    let summary = cli::run_file(&cfg, None, Some(&dir.path().join("out")), 2).unwrap();
    let [a, b] = &summary.records[..] else { panic!() };
    assert_eq!((a.seed, a.swap_regret, a.external_regret), (b.seed, b.swap_regret, b.external_regret));

    let runs = fs::read_to_string(dir.path().join("out/runs.csv")).unwrap();
    let lines: Vec<&str> = runs.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], lines[2]);
    let curve = fs::read_to_string(dir.path().join("out/curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 1 + 2 * 5);

    let problem = Arc::new(TreeFormProblem::fig1(2, 2).unwrap());
    let tr = read_transcript_dir(problem, &dir.path().join("out/transcripts/seed-7")).unwrap();
    assert_eq!(tr.len(), 300);
    assert_eq!(swapreg::regret::swap_regret(&tr).unwrap().0, a.swap_regret.unwrap());
}

#[test]
fn output_is_byte_identical_and_hash_matches_stored_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "lb.toml",
        "schema_version = 1\nkind = \"lowerbound\"\nT = 60\nseeds = \"0..4\"\nlearner = \"blum_mansour\"\n\
         pool_size = 16\npool_growth = true\nd = 2\nn = 32\nM = 7\neps = 0.3\nexport_embedding = true\n",
    );
    for (out, jobs) in [("a", "1"), ("b", "3")] {
        let status = bin()
            .args(["run", cfg.to_str().unwrap(), "--out", dir.path().join(out).to_str().unwrap(), "--jobs", jobs])
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    for f in ["runs.csv", "transfer.csv", "config.json", "embeddings/seed-2.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    let stored = fs::read(dir.path().join("a/config.json")).unwrap();
    let rehash = hex::encode(Sha256::digest(&stored));
    let runs = fs::read_to_string(dir.path().join("a/runs.csv")).unwrap();
    for line in runs.lines().skip(1) {
        assert!(line.starts_with(&rehash), "{line}");
    }
    let reparsed: RunConfig = serde_json::from_slice(&stored).unwrap();
    assert_eq!(reparsed.hash(), rehash);

    let transfer = fs::read_to_string(dir.path().join("a/transfer.csv")).unwrap();
    assert!(transfer.starts_with(
        "seed,d,n,M,T,eps,delta,W,F_holds,V_id,Vbar_id,V_phi,Vbar_phibar,swap_regret,chain_i_ok,chain_ii_ok,chain_iii_ok"
    ));
    assert_eq!(transfer.lines().count(), 5);
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", "schema_version = 1\nkind = \"lowerbound\"\nT = 10\nd = 1\nM = 4\nauto_n = true\n");
    let out = bin().args(["validate", good.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("n = 185"), "{stdout}");

    let unknown = write(dir.path(), "bad.toml", "schema_version = 1\nkind = \"dynamics\"\ncolour = 3\n");
    assert_eq!(bin().args(["validate", unknown.to_str().unwrap()]).status().unwrap().code(), Some(1));
    assert_eq!(bin().args(["run", unknown.to_str().unwrap()]).status().unwrap().code(), Some(1));
    let too_big = write(dir.path(), "big.toml", "schema_version = 1\nkind = \"lemmas\"\nchecks = [\"concentration\"]\nd = 3\nM = 16\nauto_n = true\n");
    assert_eq!(bin().args(["validate", too_big.to_str().unwrap()]).status().unwrap().code(), Some(1));
}

#[test]
fn runtime_capacity_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // 2^30 strategies cannot be enumerated for a full-pool learner
    let cfg = write(
        dir.path(),
        "cap.toml",
        "schema_version = 1\nkind = \"dynamics\"\nT = 5\nproblem = \"fig1 d=1 n=30\"\n",
    );
    let out = bin()
        .args(["run", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("capacity exceeded"), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn fig1_emits_parseable_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.tree");
    let status = bin()
        .args(["fig1", "--d", "3", "--n", "4", "--emit", path.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let parsed = parse_problem(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(parsed, TreeFormProblem::fig1(3, 4).unwrap());

    let cfg = write(
        dir.path(),
        "dyn.toml",
        "schema_version = 1\nkind = \"dynamics\"\nT = 50\nproblem_file = \"p.tree\"\nlearner = \"uniform\"\n",
    );
    let v = cli::validate_file(&cfg, None, None).unwrap();
    assert_eq!(v.seeds, vec![0]);
}

#[test]
fn lemma_campaign_and_nfce_write_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "lem.toml",
        "schema_version = 1\nkind = \"lemmas\"\nT = 40\nseeds = \"0..20\"\nlearner = \"hedge\"\npool_size = 8\n\
         d = 1\nM = 8\nn = 16\neps = 1.0\n",
    );
    let s = cli::run_file(&cfg, None, Some(&dir.path().join("lem")), 2).unwrap();
    assert!(s.passed());
    // |<a, a'>| <= 1 always, so F cannot fail at eps = 1
    let conc = fs::read_to_string(dir.path().join("lem/concentration.csv")).unwrap();
    assert!(conc.lines().skip(1).all(|l| l.contains(",true,0")));
    let summary = fs::read_to_string(dir.path().join("lem/summary.csv")).unwrap();
    assert!(summary.contains("concentration_failure_rate,20,0,"));
    assert!(summary.contains("mean_mass_before_reveal,20,"));

    let cfg = write(
        dir.path(),
        "nfce.toml",
        "schema_version = 1\nkind = \"nfce\"\nT = 200\nseeds = \"0..3\"\npayoff_a = [[1.0, -1.0], [-1.0, 1.0]]\n\
         payoff_b = [[-1.0, 1.0], [1.0, -1.0]]\n",
    );
    let s = cli::run_file(&cfg, None, Some(&dir.path().join("nfce")), 1).unwrap();
    assert!(s.passed());
    assert_eq!(fs::read_to_string(dir.path().join("nfce/nfce.csv")).unwrap().lines().count(), 4);
}
