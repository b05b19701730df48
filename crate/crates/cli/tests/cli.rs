use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bss_core::benchtable::{load_table, oracle, regret};
use bss_core::hsi::OA;
use bss_core::stats::top_count;
use bss_core::BandCombination;
use tempfile::TempDir;

fn bss(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bss"))
        .args(args)
        .current_dir(dir)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = bss(dir, args);
    assert!(
        out.status.success(),
        "bss {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Summary line fields as `key=value` pairs.
fn field<'a>(line: &'a str, key: &str) -> &'a str {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in {line:?}"))
}

/// A generated 16-band classification scene and its exhaustive table.
fn scene(seed: u64) -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let s = seed.to_string();
    ok(dir.path(), &["gen", "--task", "cls", "--bands", "16", "--seed", &s, "--out", "d"]);
    ok(
        dir.path(),
        &["bench", "build", "--cube", "d/cube.bssc", "--labels", "d/labels.bssl", "--out", "t.jsonl"],
    );
    let table = dir.path().join("t.jsonl");
    (dir, table)
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    for out in ["a", "b"] {
        ok(dir.path(), &["gen", "--task", "cls", "--bands", "16", "--seed", "7", "--out", out]);
    }
    for file in ["cube.bssc", "labels.bssl", "truth.txt"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn gen_without_task_is_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&bss(dir.path(), &["gen", "--bands", "16"])), 2);
}

#[test]
fn gen_sidecar_records_rank() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["gen", "--task", "rec", "--rank", "3", "--out", "r"]);
    let truth = fs::read_to_string(dir.path().join("r/truth.txt")).unwrap();
    assert!(truth.lines().any(|l| l == "rank=3"), "{truth}");
    assert!(!dir.path().join("r/labels.bssl").exists());
}

#[test]
fn gen_rejects_bad_config() {
    let dir = TempDir::new().unwrap();
    let out = bss(dir.path(), &["gen", "--task", "cls", "--bands", "4", "--informative", "4"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn oracle_matches_exhaustive_search() {
    let (dir, _) = scene(0);
    let oracle_line = ok(dir.path(), &["bench", "oracle", "--table", "t.jsonl"]);
    let search_line = ok(dir.path(), &["search", "--algo", "exhaustive", "--table", "t.jsonl", "--out", "r"]);
    assert_eq!(oracle_line.lines().count(), 1);
    assert_eq!(field(&oracle_line, "bands"), field(&search_line, "bands"));
    assert_eq!(field(&oracle_line, "OA"), field(&search_line, "score"));
    assert_eq!(field(&search_line, "regret"), "0");
    assert_eq!(field(&search_line, "evals"), "560");
}

#[test]
fn query_prints_every_metric_and_misses_exit_3() {
    let (dir, _) = scene(1);
    let out = ok(dir.path(), &["bench", "query", "--table", "t.jsonl", "--bands", "2-5-11"]);
    let metrics: Vec<(&str, f64)> = out
        .lines()
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k, v.parse().unwrap())
        })
        .collect();
    assert_eq!(metrics.iter().map(|m| m.0).collect::<Vec<_>>(), ["AA", "Kappa", "OA"]);
    assert!(metrics.iter().all(|m| m.1.is_finite()));

    let miss = bss(dir.path(), &["bench", "query", "--table", "t.jsonl", "--bands", "2-5-16"]);
    assert_eq!(code(&miss), 3);
    assert!(String::from_utf8_lossy(&miss.stderr).contains("2-5-16"));
    assert_eq!(code(&bss(dir.path(), &["bench", "query", "--table", "missing.jsonl", "--bands", "0-1-2"])), 1);
}

#[test]
fn exhaustive_on_tiny_space_has_zero_regret() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["gen", "--task", "rec", "--bands", "5", "--side", "8", "--out", "d"]);
    ok(dir.path(), &["bench", "build", "--cube", "d/cube.bssc", "--k", "2", "--out", "t.jsonl"]);
    let line = ok(dir.path(), &["search", "--algo", "exhaustive", "--table", "t.jsonl", "--out", "r"]);
    assert_eq!(field(&line, "evals"), "10");
    assert_eq!(field(&line, "regret"), "0");
}

#[test]
fn random_search_result_files_are_reproducible() {
    let (dir, _) = scene(2);
    for out in ["a", "b"] {
        ok(dir.path(), &["search", "--algo", "random", "--table", "t.jsonl", "--M", "100", "--seed", "5", "--out", out]);
    }
    for file in ["random-s5.toml", "random-s5-trace.csv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let trace = fs::read_to_string(dir.path().join("a/random-s5-trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("bands,score"));
    assert_eq!(trace.lines().count(), 101);
}

#[test]
fn ga_regret_matches_table() {
    let (dir, table_path) = scene(3);
    let line = ok(dir.path(), &["search", "--algo", "ga", "--table", "t.jsonl", "--seed", "4", "--out", "r"]);
    let table = load_table(&table_path).unwrap();
    let bands: BandCombination = field(&line, "bands").parse().unwrap();
    let expected = regret(&table, &bands, OA).unwrap();
    let reported: f64 = field(&line, "regret").parse().unwrap();
    assert_eq!(reported, expected);
    let score: f64 = field(&line, "score").parse().unwrap();
    assert_eq!(score, table.value(&bands, OA).unwrap());
}

#[test]
fn live_search_scores_with_the_evaluator() {
    let (dir, table_path) = scene(4);
    let line = ok(
        dir.path(),
        &[
            "search", "--algo", "sffs", "--cube", "d/cube.bssc", "--labels", "d/labels.bssl", "--truth", "t.jsonl",
            "--out", "r",
        ],
    );
    let table = load_table(&table_path).unwrap();
    let bands: BandCombination = field(&line, "bands").parse().unwrap();
    let reported: f64 = field(&line, "regret").parse().unwrap();
    assert_eq!(reported, regret(&table, &bands, OA).unwrap());
}

#[test]
fn every_algorithm_runs_and_unknown_names_are_listed() {
    let (dir, _) = scene(5);
    for algo in ["exhaustive", "random", "sffs", "ga", "predictor"] {
        ok(dir.path(), &["search", "--algo", algo, "--table", "t.jsonl", "--out", "r"]);
    }
    ok(dir.path(), &["search", "--algo", "stats", "--table", "t.jsonl", "--cube", "d/cube.bssc", "--out", "r"]);
    let no_cube = bss(dir.path(), &["search", "--algo", "stats", "--table", "t.jsonl"]);
    assert_eq!(code(&no_cube), 2);

    let out = bss(dir.path(), &["search", "--algo", "annealing", "--table", "t.jsonl"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    for name in ["exhaustive", "random", "sffs", "ga", "predictor", "stats"] {
        assert!(err.contains(name), "{err}");
    }
}

fn train(dir: &Path, iterations: &str) {
    ok(
        dir,
        &[
            "scos", "train", "--cube", "d/cube.bssc", "--labels", "d/labels.bssl", "--iterations", iterations, "--out",
            "sn.json", "--log", "log.csv",
        ],
    );
}

fn scos_search(dir: &Path, m: &str, out: &str) -> Output {
    bss(
        dir,
        &[
            "scos", "search", "--cube", "d/cube.bssc", "--labels", "d/labels.bssl", "--params", "sn.json", "--table",
            "t.jsonl", "--M", m, "--out", out,
        ],
    )
}

#[test]
fn scos_train_and_search_are_reproducible() {
    let (dir, _) = scene(6);
    train(dir.path(), "300");
    let first = fs::read(dir.path().join("sn.json")).unwrap();
    train(dir.path(), "300");
    assert_eq!(first, fs::read(dir.path().join("sn.json")).unwrap());
    let log = fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("step,loss,bands"));
    assert_eq!(log.lines().count(), 301);

    let a = scos_search(dir.path(), "50", "a");
    let b = scos_search(dir.path(), "50", "b");
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(
        fs::read(dir.path().join("a/scos-s0.toml")).unwrap(),
        fs::read(dir.path().join("b/scos-s0.toml")).unwrap()
    );
    assert!(String::from_utf8_lossy(&a.stdout).starts_with("algo=scos "));
}

#[test]
fn scos_search_clips_m_to_the_space() {
    let (dir, _) = scene(7);
    train(dir.path(), "50");
    let out = scos_search(dir.path(), "5000", "r");
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("clipped to 560"));
    assert_eq!(field(&String::from_utf8_lossy(&out.stdout), "evals"), "560");
}

#[test]
fn scos_rejects_incompatible_data() {
    let (dir, _) = scene(8);
    train(dir.path(), "20");
    ok(dir.path(), &["gen", "--task", "rec", "--out", "rec"]);
    let task = bss(dir.path(), &["scos", "search", "--cube", "rec/cube.bssc", "--params", "sn.json"]);
    assert_eq!(code(&task), 2);
    ok(dir.path(), &["gen", "--task", "cls", "--bands", "12", "--out", "small"]);
    let bands = bss(
        dir.path(),
        &["scos", "search", "--cube", "small/cube.bssc", "--labels", "small/labels.bssl", "--params", "sn.json"],
    );
    assert_eq!(code(&bands), 2);
}

#[test]
fn scos_finetune_reports_a_score() {
    let (dir, _) = scene(9);
    train(dir.path(), "50");
    let line = ok(
        dir.path(),
        &[
            "scos", "finetune", "--cube", "d/cube.bssc", "--labels", "d/labels.bssl", "--params", "sn.json", "--bands",
            "1-2-3", "--iterations", "20",
        ],
    );
    assert_eq!(field(&line, "bands"), "1-2-3");
    let score: f64 = field(&line, "score").parse().unwrap();
    assert!((0.0..=1.0).contains(&score));
}

#[test]
fn scos_end_to_end_lands_in_top_decile() {
    let hits: Vec<bool> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..10u64)
            .map(|seed| {
                s.spawn(move || {
                    let (dir, table_path) = scene(seed);
                    let seed = seed.to_string();
                    ok(
                        dir.path(),
                        &[
                            "scos", "train", "--cube", "d/cube.bssc", "--labels", "d/labels.bssl", "--seed", &seed,
                            "--out", "sn.json",
                        ],
                    );
                    let line = ok(
                        dir.path(),
                        &[
                            "scos", "search", "--cube", "d/cube.bssc", "--labels", "d/labels.bssl", "--params",
                            "sn.json", "--seed", &seed, "--out", "r",
                        ],
                    );
                    let table = load_table(&table_path).unwrap();
                    let bands: BandCombination = field(&line, "bands").parse().unwrap();
                    table.strictly_better_count(&bands, OA).unwrap() < top_count(560, 0.10)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let count = hits.iter().filter(|&&h| h).count();
    assert!(count >= 7, "top-10% hits {count}/10: {hits:?}");
}

#[test]
fn regret_report_has_one_row_per_result() {
    let (dir, table_path) = scene(10);
    ok(dir.path(), &["search", "--algo", "ga", "--table", "t.jsonl", "--out", "r"]);
    ok(dir.path(), &["report", "regret", "--table", "t.jsonl", "--results", "r/ga-s0.toml", "--out", "reg.csv"]);
    let csv = fs::read_to_string(dir.path().join("reg.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "algorithm,seed,bands,score,evaluations,metric,true_value,regret");
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells[0], "ga");
    let table = load_table(&table_path).unwrap();
    let bands: BandCombination = cells[2].parse().unwrap();
    assert_eq!(cells[7].parse::<f64>().unwrap(), regret(&table, &bands, OA).unwrap());

    ok(dir.path(), &["gen", "--task", "rec", "--bands", "16", "--side", "8", "--out", "rec"]);
    ok(dir.path(), &["bench", "build", "--cube", "rec/cube.bssc", "--out", "rec.jsonl", "--seeds", "0"]);
    let mixed = bss(dir.path(), &["report", "regret", "--table", "rec.jsonl", "--results", "r/ga-s0.toml"]);
    assert_eq!(code(&mixed), 2);
}

#[test]
fn cross_report_of_a_table_with_itself() {
    let (dir, _) = scene(11);
    let out = ok(dir.path(), &["report", "cross", "--a", "t.jsonl", "--b", "t.jsonl", "--out", "x.csv"]);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row, ["OA", "0.05", "1", "1"]);
    assert_eq!(fs::read_to_string(dir.path().join("x.csv")).unwrap(), out);
}

#[test]
fn cross_report_of_disjoint_targets() {
    let dir = TempDir::new().unwrap();
    for (name, bands) in [("a", "1-4-7-10"), ("b", "2-5-12-14")] {
        ok(
            dir.path(),
            &["gen", "--task", "cls", "--seed", "3", "--informative-bands", bands, "--out", name],
        );
        let cube = format!("{name}/cube.bssc");
        let labels = format!("{name}/labels.bssl");
        let table = format!("{name}.jsonl");
        ok(dir.path(), &["bench", "build", "--cube", &cube, "--labels", &labels, "--out", &table]);
    }
    let out = ok(dir.path(), &["report", "cross", "--a", "a.jsonl", "--b", "b.jsonl"]);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let jaccard: f64 = row[2].parse().unwrap();
    assert!(jaccard < 0.5, "{out}");
}

#[test]
fn scatter_report_flags_the_top_rows() {
    let (dir, table_path) = scene(12);
    ok(dir.path(), &["report", "scatter", "--cube", "d/cube.bssc", "--table", "t.jsonl", "--out", "s.csv"]);
    let csv = fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 560);
    assert_eq!(rows.iter().filter(|r| r.ends_with(",true")).count(), top_count(560, 0.05));
    let (best, _) = oracle(&load_table(&table_path).unwrap(), OA).unwrap();
    assert!(rows[0].starts_with(&format!("{best},")));
}

const CONFIG: &str = r#"
output = "exp"

[data]
task = "cls"
bands = 12
seed = 2

[bench]
seeds = [0, 1]

[[search]]
algo = "ga"
seeds = [0, 1]
[search.options]
population = 10
generations = 5

[[search]]
algo = "random"
[search.options]
M = 50

[scos]
M = 100
[scos.train]
iterations = 200
"#;

#[test]
fn run_config_is_reproducible() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    for copy in ["one", "two"] {
        ok(dir.path(), &["run", "--config", "run.toml"]);
        fs::rename(dir.path().join("exp"), dir.path().join(copy)).unwrap();
    }
    let results = fs::read_dir(dir.path().join("one/results")).unwrap();
    let mut names: Vec<String> = results.map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    assert_eq!(names.len(), 8, "{names:?}");
    for name in names.iter().map(|n| format!("results/{n}")).chain(["regret.csv".into(), "supernet.json".into()]) {
        assert_eq!(
            fs::read(dir.path().join("one").join(&name)).unwrap(),
            fs::read(dir.path().join("two").join(&name)).unwrap(),
            "{name} differs"
        );
    }
    let regret = fs::read_to_string(dir.path().join("one/regret.csv")).unwrap();
    assert_eq!(regret.lines().count(), 5);
}

#[test]
fn run_config_errors_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.toml"), "output = \"x\"\n[data]\ntask = \"cls\"\nunknown_flag = 3\n").unwrap();
    assert_eq!(code(&bss(dir.path(), &["run", "--config", "bad.toml"])), 2);
    fs::write(dir.path().join("typo.toml"), "outptu = \"x\"\n[data]\n").unwrap();
    assert_eq!(code(&bss(dir.path(), &["run", "--config", "typo.toml"])), 2);
    assert_eq!(code(&bss(dir.path(), &["run", "--config", "absent.toml"])), 1);
}

#[test]
fn thread_cap_does_not_change_results() {
    let (dir, _) = scene(13);
    let capped = Command::new(env!("CARGO_BIN_EXE_bss"))
        .args(["bench", "build", "--cube", "d/cube.bssc", "--labels", "d/labels.bssl", "--out", "t1.jsonl"])
        .current_dir(dir.path())
        .env("BSS_THREADS", "1")
        .output()
        .unwrap();
    assert!(capped.status.success());
    let values = |p: &str| {
        let t = load_table(dir.path().join(p)).unwrap();
        t.values(OA).unwrap()
    };
    assert_eq!(values("t.jsonl"), values("t1.jsonl"));
}
