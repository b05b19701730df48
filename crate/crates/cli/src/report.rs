use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use bss_core::benchtable::{rank_correlation, regret, top_overlap, BenchTable};
use bss_core::stats::{scatter_csv, stats_scatter};
use bss_core::BandCombination;
use clap::{Args, Subcommand};

use crate::common::{read_cube, read_table, usage, write_file};
use crate::result::read_result;

#[derive(Subcommand, Debug, Clone)]
pub enum ReportCommand {
    /// One row per result file: found bands, true value and regret.
    Regret(RegretArgs),
    /// Entropy and spectral angle of every table entry next to its metric.
    Scatter(ScatterArgs),
    /// Top-set overlap and rank correlation of two tables.
    Cross(CrossArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RegretArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Result files written by `search` or `scos search`.
    #[arg(long, num_args = 1.., required = true)]
    pub results: Vec<PathBuf>,
    #[arg(long, default_value = "regret.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ScatterArgs {
    #[arg(long)]
    pub cube: PathBuf,
    #[arg(long)]
    pub table: PathBuf,
    /// Defaults to the task's primary metric.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub top: f64,
    #[arg(long, default_value = "scatter.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct CrossArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Defaults to the primary metric shared by both tables.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub top: f64,
    #[arg(long, default_value = "cross.csv")]
    pub out: PathBuf,
}

pub fn run(cmd: &ReportCommand) -> Result<()> {
    match cmd {
        ReportCommand::Regret(a) => regret_report(&a.table, &a.results, &a.out),
        ReportCommand::Scatter(a) => scatter(a),
        ReportCommand::Cross(a) => cross(a),
    }
}

fn metric_for(table: &BenchTable, metric: Option<&str>) -> Result<String> {
    let metric = metric.unwrap_or(table.task().primary_metric).to_string();
    table.task().direction(&metric).map_err(|e| usage(e.to_string()))?;
    Ok(metric)
}

pub fn regret_report(table_path: &Path, results: &[PathBuf], out: &Path) -> Result<()> {
    let table = read_table(table_path)?;
    let mut csv = String::from("algorithm,seed,bands,score,evaluations,metric,true_value,regret\n");
    for path in results {
        let r = read_result(path)?;
        if r.task != table.task().kind {
            return Err(usage(format!("{} is a {} result, the table is {}", path.display(), r.task, table.task().kind)));
        }
        let bands: BandCombination = r.bands()?;
        let value = table
            .value(&bands, &r.metric)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let gap = regret(&table, &bands, &r.metric)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            r.algorithm, r.seed, bands, r.score, r.evaluations, r.metric, value, gap
        );
    }
    write_file(out, csv)?;
    println!("wrote {} rows to {}", results.len(), out.display());
    Ok(())
}

fn scatter(args: &ScatterArgs) -> Result<()> {
    let cube = read_cube(&args.cube)?;
    let table = read_table(&args.table)?;
    let metric = metric_for(&table, args.metric.as_deref())?;
    let bcs: Vec<BandCombination> = table.band_combinations().cloned().collect();
    if let Some(bad) = bcs.iter().find(|bc| bc.check_bands(cube.num_bands()).is_err()) {
        return Err(usage(format!("table entry {bad} does not fit a {}-band cube", cube.num_bands())));
    }
    let rows = stats_scatter(&cube, &bcs, &table, &metric, args.top)?;
    write_file(&args.out, scatter_csv(&rows))?;
    println!("wrote {} rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn cross(args: &CrossArgs) -> Result<()> {
    let a = read_table(&args.a)?;
    let b = read_table(&args.b)?;
    if a.task().kind != b.task().kind {
        return Err(usage("tables are for different tasks"));
    }
    let metric = metric_for(&a, args.metric.as_deref())?;
    let jaccard = top_overlap(&a, &b, &metric, args.top).map_err(|e| usage(e.to_string()))?;
    let same_keys = a.len() == b.len() && a.band_combinations().all(|bc| b.record(bc).is_some());
    let rho = if same_keys {
        match rank_correlation(&a, &b, &metric) {
            Ok(r) => r.to_string(),
            Err(e) => {
                log::warn!("rank correlation undefined: {e}");
                String::new()
            }
        }
    } else {
        log::warn!("tables cover different combinations; rank correlation left empty");
        String::new()
    };
    let csv = format!("metric,top_frac,jaccard,rank_correlation\n{metric},{},{jaccard},{rho}\n", args.top);
    write_file(&args.out, &csv)?;
    print!("{csv}");
    Ok(())
}
