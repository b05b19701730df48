//! `run --config`: a whole experiment from one TOML file. Each section is
//! turned into the equivalent command line, so every option a section
//! accepts is the flag of the same name.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser};
use serde::Deserialize;
use toml::{Table, Value};

use crate::common::usage;
use crate::gen::{CUBE_FILE, LABELS_FILE};
use crate::{report, Cli, Command};

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory, relative to the config file.
    pub output: PathBuf,
    /// Either `cube` (and `labels`) paths, or `gen` options.
    pub data: Table,
    #[serde(default)]
    pub bench: Table,
    #[serde(default)]
    pub search: Vec<SearchSection>,
    pub scos: Option<ScosSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub algo: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub options: Table,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScosSection {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(rename = "M", default = "default_scos_m")]
    pub m: u64,
    #[serde(default)]
    pub train: Table,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_scos_m() -> u64 {
    200
}

fn flag_value(key: &str, value: &Value) -> Result<Option<String>> {
    Ok(match value {
        Value::String(s) => Some(s.clone()),
        Value::Integer(i) => Some(i.to_string()),
        Value::Float(f) => Some(f.to_string()),
        Value::Boolean(_) => None,
        Value::Array(items) => Some(
            items
                .iter()
                .map(|v| flag_value(key, v)?.ok_or_else(|| usage(format!("option {key}: unsupported list item"))))
                .collect::<Result<Vec<_>>>()?
                .join(","),
        ),
        _ => return Err(usage(format!("option {key}: unsupported value {value}"))),
    })
}

fn push_options(argv: &mut Vec<String>, options: &Table) -> Result<()> {
    for (key, value) in options {
        let flag = if key.len() == 1 && key.chars().all(|c| c.is_ascii_uppercase()) {
            format!("--{key}")
        } else {
            format!("--{}", key.replace('_', "-"))
        };
        match (value, flag_value(key, value)?) {
            (Value::Boolean(true), _) => argv.push(flag),
            (Value::Boolean(false), _) => {}
            (_, Some(v)) => {
                argv.push(flag);
                argv.push(v);
            }
            (_, None) => {}
        }
    }
    Ok(())
}

fn invoke(argv: Vec<String>) -> Result<()> {
    log::info!("bss {}", argv[1..].join(" "));
    let cli = Cli::try_parse_from(&argv).map_err(|e| usage(format!("in config: {e}")))?;
    match cli.command {
        Command::Run(_) => Err(usage("run cannot be nested")),
        cmd => crate::dispatch(cmd),
    }
}

fn argv(parts: &[&str]) -> Vec<String> {
    std::iter::once("bss").chain(parts.iter().copied()).map(String::from).collect()
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn take_path(table: &mut Table, key: &str, base: &Path) -> Result<Option<PathBuf>> {
    match table.remove(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(base.join(s))),
        Some(other) => Err(usage(format!("data.{key} must be a path string, got {other}"))),
    }
}

pub fn run(args: &RunArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let cfg: RunConfig = toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", args.config.display())))?;
    let base = args.config.parent().unwrap_or(Path::new("")).to_path_buf();
    let out = base.join(&cfg.output);
    let results_dir = out.join("results");

    let mut data = cfg.data.clone();
    let (cube, labels) = match take_path(&mut data, "cube", &base)? {
        Some(cube) => {
            let labels = take_path(&mut data, "labels", &base)?;
            if !data.is_empty() {
                let keys: Vec<&String> = data.keys().collect();
                return Err(usage(format!("data with a cube path takes no generator options, got {keys:?}")));
            }
            (cube, labels)
        }
        None => {
            let dir = out.join("data");
            let mut a = argv(&["gen", "--out", &path_str(&dir)]);
            push_options(&mut a, &data)?;
            invoke(a)?;
            let labels = dir.join(LABELS_FILE);
            (dir.join(CUBE_FILE), labels.exists().then_some(labels))
        }
    };
    let mut scene = vec!["--cube".to_string(), path_str(&cube)];
    if let Some(l) = &labels {
        scene.extend(["--labels".to_string(), path_str(l)]);
    }

    let table = out.join("table.jsonl");
    let mut a = argv(&["bench", "build", "--out", &path_str(&table)]);
    a.extend(scene.iter().cloned());
    push_options(&mut a, &cfg.bench)?;
    invoke(a)?;

    let mut results = Vec::new();
    for section in &cfg.search {
        for seed in &section.seeds {
            let name = format!("{}-s{seed}", section.algo);
            let mut a = argv(&["search", "--algo", &section.algo, "--table", &path_str(&table)]);
            a.extend(["--cube".to_string(), path_str(&cube)]);
            a.extend(["--seed".into(), seed.to_string(), "--out".into(), path_str(&results_dir), "--name".into(), name.clone()]);
            push_options(&mut a, &section.options)?;
            invoke(a)?;
            results.push(results_dir.join(format!("{name}.toml")));
        }
    }

    if let Some(scos) = &cfg.scos {
        let params = out.join("supernet.json");
        let mut a = argv(&["scos", "train", "--out", &path_str(&params), "--log", &path_str(&out.join("train-log.csv"))]);
        a.extend(scene.iter().cloned());
        push_options(&mut a, &scos.train)?;
        invoke(a)?;
        let val_fraction = scos.train.get("val_fraction").map(|v| flag_value("val_fraction", v)).transpose()?.flatten();
        for seed in &scos.seeds {
            let name = format!("scos-s{seed}");
            let mut a = argv(&["scos", "search", "--params", &path_str(&params), "--table", &path_str(&table)]);
            a.extend(scene.iter().cloned());
            a.extend(["--M".into(), scos.m.to_string(), "--seed".into(), seed.to_string()]);
            a.extend(["--out".into(), path_str(&results_dir), "--name".into(), name.clone()]);
            if let Some(v) = &val_fraction {
                a.extend(["--val-fraction".into(), v.clone()]);
            }
            invoke(a)?;
            results.push(results_dir.join(format!("{name}.toml")));
        }
    }

    if !results.is_empty() {
        report::regret_report(&table, &results, &out.join("regret.csv"))?;
    }
    println!("run complete: {}", out.display());
    Ok(())
}
