use std::path::PathBuf;

use anyhow::Result;
use bss_core::benchtable::{build_table, oracle, predict_and_expand, render_table, ExpandConfig};
use bss_core::search::SearchSpace;
use bss_core::stats::BandStats;
use bss_core::BandCombination;
use clap::{Args, Subcommand};

use crate::common::{live_evaluator, not_found, read_table, usage, write_file, LiveArgs, SceneArgs};

#[derive(Subcommand, Debug, Clone)]
pub enum BenchCommand {
    /// Evaluate combinations with a live evaluator and write a table.
    Build(BuildArgs),
    /// Print the seed-averaged metrics of one combination.
    Query(QueryArgs),
    /// Print the best combination in a table.
    Oracle(OracleArgs),
}

#[derive(Args, Debug, Clone)]
pub struct BuildArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub live: LiveArgs,
    /// Combination size.
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    /// Comma-separated evaluation seeds.
    #[arg(long, value_delimiter = ',', default_values_t = [0u64, 1])]
    pub seeds: Vec<u64>,
    /// Evaluate only a predict-and-expand subset of this size instead of
    /// the whole space.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Random initial set of the predict-and-expand subset.
    #[arg(long, default_value_t = 50)]
    pub n0: usize,
    /// Seed of the predict-and-expand subset.
    #[arg(long, default_value_t = 0)]
    pub subset_seed: u64,
    #[arg(long, default_value = "table.jsonl")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct QueryArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Combination such as 0-7-9.
    #[arg(long)]
    pub bands: BandCombination,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Defaults to the task's primary metric.
    #[arg(long)]
    pub metric: Option<String>,
}

pub fn run(cmd: &BenchCommand) -> Result<()> {
    match cmd {
        BenchCommand::Build(a) => build(a),
        BenchCommand::Query(a) => query(a),
        BenchCommand::Oracle(a) => print_oracle(a),
    }
}

fn build(args: &BuildArgs) -> Result<()> {
    let scene = args.scene.require()?;
    let evaluator = live_evaluator(&scene, &args.live)?;
    let bcs = match args.budget {
        None => SearchSpace::new(scene.cube.num_bands(), args.k)?.all()?,
        Some(budget) => {
            let stats = BandStats::compute(&scene.cube)?;
            let cfg = ExpandConfig {
                n0: args.n0,
                budget,
                ..ExpandConfig::desk(args.k, args.subset_seed)
            };
            predict_and_expand(&*evaluator, Some(&stats), &cfg)?
        }
    };
    let table = build_table(&*evaluator, &bcs, &args.seeds)?;
    write_file(&args.out, render_table(&table))?;
    println!("wrote {} records to {}", table.len(), args.out.display());
    Ok(())
}

fn query(args: &QueryArgs) -> Result<()> {
    let table = read_table(&args.table)?;
    let Some(record) = table.record(&args.bands) else {
        return Err(not_found(format!("bands {} not in {}", args.bands, args.table.display())));
    };
    for (metric, value) in record.mean() {
        println!("{metric}={value}");
    }
    Ok(())
}

fn print_oracle(args: &OracleArgs) -> Result<()> {
    let table = read_table(&args.table)?;
    let metric = args.metric.clone().unwrap_or_else(|| table.task().primary_metric.to_string());
    table.task().direction(&metric).map_err(|e| usage(e.to_string()))?;
    let (bands, value) = oracle(&table, &metric)?;
    println!("bands={bands} {metric}={value}");
    Ok(())
}
