use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bss_core::benchtable::{regret, BenchTable};
use bss_core::search::SearchResult;
use bss_core::{BandCombination, TaskKind};
use serde::{Deserialize, Serialize};

use crate::common::{usage, write_file};

/// The structured-text record of one search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub algorithm: String,
    pub seed: u64,
    pub task: TaskKind,
    pub dataset: String,
    pub backbone: String,
    pub metric: String,
    pub best: String,
    pub score: f64,
    pub evaluations: usize,
    /// Trace CSV, relative to the result file.
    pub trace: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regret: Option<f64>,
    #[serde(default)]
    pub config: BTreeMap<String, toml::Value>,
}

impl ResultFile {
    pub fn bands(&self) -> Result<BandCombination> {
        self.best.parse().map_err(|e: bss_core::Error| usage(format!("result file best bands: {e}")))
    }

    pub fn summary(&self) -> String {
        let mut line = format!(
            "algo={} bands={} score={} evals={}",
            self.algorithm, self.best, self.score, self.evaluations
        );
        if let Some(r) = self.regret {
            line.push_str(&format!(" regret={r}"));
        }
        line
    }
}

pub struct Outcome<'a> {
    pub result: &'a SearchResult,
    pub seed: u64,
    pub task: TaskKind,
    pub dataset: &'a str,
    pub backbone: &'a str,
    pub metric: &'a str,
    pub truth: Option<&'a BenchTable>,
    pub config: BTreeMap<String, toml::Value>,
}

/// Writes `<dir>/<name>.toml` and `<dir>/<name>-trace.csv`, prints the
/// summary line and returns the result file's path.
pub fn write_outcome(dir: &Path, name: &str, outcome: Outcome<'_>) -> Result<PathBuf> {
    let best = &outcome.result.best;
    let regret = match outcome.truth {
        Some(table) => Some(
            regret(table, best, outcome.metric)
                .map_err(|e| usage(format!("cannot score {best} against the table: {e}")))?,
        ),
        None => None,
    };
    let trace_name = format!("{name}-trace.csv");
    let file = ResultFile {
        algorithm: outcome.result.algorithm.clone(),
        seed: outcome.seed,
        task: outcome.task,
        dataset: outcome.dataset.to_string(),
        backbone: outcome.backbone.to_string(),
        metric: outcome.metric.to_string(),
        best: best.to_string(),
        score: outcome.result.score,
        evaluations: outcome.result.evaluations,
        trace: trace_name.clone(),
        regret,
        config: outcome.config,
    };
    write_file(&dir.join(&trace_name), outcome.result.trace_csv())?;
    let path = dir.join(format!("{name}.toml"));
    write_file(&path, toml::to_string(&file).context("serializing result")?)?;
    log::info!("{} took {:.3}s", outcome.result.algorithm, outcome.result.seconds);
    println!("{}", file.summary());
    Ok(path)
}

pub fn read_result(path: &Path) -> Result<ResultFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Config entries for a result file.
pub fn config<const N: usize>(entries: [(&str, toml::Value); N]) -> BTreeMap<String, toml::Value> {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
