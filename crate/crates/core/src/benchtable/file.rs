//! Line-delimited JSON table files: one record object per line.
//!
//! Non-finite metric values (a perfect reconstruction has infinite PSNR) are
//! written as the strings `"inf"`, `"-inf"` or `"nan"`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{BenchKey, BenchRecord, BenchTable};
use crate::error::{Error, Result};
use crate::hsi::{BandCombination, MetricMap, TaskKind};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    task: TaskKind,
    dataset_id: String,
    backbone_id: String,
    bands: Vec<usize>,
    seeds: BTreeMap<u64, BTreeMap<String, Value>>,
    cost_seconds: f64,
}

fn encode_value(v: f64) -> Value {
    match serde_json::Number::from_f64(v) {
        Some(n) => Value::Number(n),
        None if v.is_nan() => Value::String("nan".into()),
        None if v > 0.0 => Value::String("inf".into()),
        None => Value::String("-inf".into()),
    }
}

fn decode_value(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => match s.as_str() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}

/// Renders the table in band order, one JSON object per line.
pub fn render_table(table: &BenchTable) -> String {
    let mut out = String::new();
    for r in table.records() {
        let line = RecordLine {
            task: r.key.task,
            dataset_id: r.key.dataset_id.clone(),
            backbone_id: r.key.backbone_id.clone(),
            bands: r.key.bands.indices().to_vec(),
            seeds: r
                .seeds
                .iter()
                .map(|(s, m)| (*s, m.iter().map(|(k, v)| (k.clone(), encode_value(*v))).collect()))
                .collect(),
            cost_seconds: r.cost_seconds,
        };
        out.push_str(&serde_json::to_string(&line).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn save_table(table: &BenchTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_table(table)).map_err(|e| Error::io(path, e))
}

/// Parses table text; `path` is only used in error messages.
pub fn parse_table(text: &str, path: &Path) -> Result<BenchTable> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut records = Vec::new();
    let mut seen = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let line: RecordLine = serde_json::from_str(raw).map_err(|e| err(line_no, e.to_string()))?;
        let bands = BandCombination::new(line.bands).map_err(|e| err(line_no, e.to_string()))?;
        let task = crate::hsi::TaskSpec::new(line.task);
        if line.seeds.is_empty() {
            return Err(err(line_no, "field \"seeds\" is empty".into()));
        }
        let mut seeds = BTreeMap::new();
        for (seed, metrics) in line.seeds {
            if let Some(missing) = task.metrics().find(|m| !metrics.contains_key(*m)) {
                return Err(err(line_no, format!("seed {seed} is missing metric field {missing:?}")));
            }
            let mut values = MetricMap::new();
            for (name, v) in metrics {
                if task.direction(&name).is_err() {
                    return Err(err(line_no, format!("seed {seed} has unknown metric field {name:?}")));
                }
                let v = decode_value(&v).ok_or_else(|| err(line_no, format!("metric field {name:?} is not a number")))?;
                values.insert(name, v);
            }
            seeds.insert(seed, values);
        }
        if let Some(prev) = seen.insert(bands.clone(), line_no) {
            return Err(err(line_no, format!("duplicate bands {bands} (first on line {prev})")));
        }
        records.push(BenchRecord {
            key: BenchKey {
                task: line.task,
                dataset_id: line.dataset_id,
                backbone_id: line.backbone_id,
                bands,
            },
            seeds,
            cost_seconds: line.cost_seconds,
        });
    }
    if records.is_empty() {
        return Err(err(0, "table file contains no records".into()));
    }
    BenchTable::from_records(records).map_err(|e| err(0, e.to_string()))
}

pub fn load_table(path: impl AsRef<Path>) -> Result<BenchTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, path)
}
