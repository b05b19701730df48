use std::path::PathBuf;

use anyhow::Result;
use bss_core::hsi::count_combinations;
use bss_core::scos::{
    check_compatible, finetune, load_params, log_csv, save_params, scos_search, train_one_shot, FinetuneConfig, PeKind,
    ScosData, ScosTrainConfig, SupernetParams,
};
use bss_core::search::SearchSpace;
use bss_core::{BandCombination, TaskKind};
use clap::{Args, Subcommand};
use toml::Value;

use crate::common::{read_table, usage, write_file, Scene, SceneArgs};
use crate::result::{config, write_outcome, Outcome};

#[derive(Subcommand, Debug, Clone)]
pub enum ScosCommand {
    /// Train a one-shot supernet on random band combinations.
    Train(TrainArgs),
    /// Score random combinations with a trained supernet.
    Search(ScosSearchArgs),
    /// Train a model on one combination and report its validation score.
    Finetune(FinetuneArgs),
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Start from the full-size schedule instead of the desk defaults;
    /// explicit flags still override it.
    #[arg(long)]
    pub full_scale: bool,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub patch_size: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Position embedding: ape, clpe, slpe or nope.
    #[arg(long)]
    pub pe: Option<PeKind>,
    /// Global gradient-norm cap; 0 disables clipping.
    #[arg(long)]
    pub grad_clip: Option<f64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    /// Seeds the initialization, the data split and the sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "supernet.json")]
    pub out: PathBuf,
    /// Training log CSV (step,loss,bands).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub val_fraction: f64,
    /// Seed of the data split; defaults to the training seed stored in the
    /// parameters, which reproduces the training split.
    #[arg(long)]
    pub data_seed: Option<u64>,
}

#[derive(Args, Debug, Clone)]
pub struct ScosSearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Combinations to score. Full-size runs used 1,000 for classification
    /// and 10,000 for reconstruction.
    #[arg(long = "M", default_value_t = 200)]
    pub m: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Benchmark table for regret.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Result file stem; defaults to scos-s<seed>.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct FinetuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub bands: BandCombination,
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 5.0)]
    pub grad_clip: f64,
    /// Start from the supernet's weights.
    #[arg(long)]
    pub warm_start: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the fine-tuned parameters.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cmd: &ScosCommand) -> Result<()> {
    match cmd {
        ScosCommand::Train(a) => train(a),
        ScosCommand::Search(a) => search(a).map(|_| ()),
        ScosCommand::Finetune(a) => tune(a),
    }
}

fn patches(scene: &Scene, patch_size: usize, val_fraction: f64, seed: u64) -> Result<ScosData> {
    let data = match &scene.labels {
        Some(labels) => ScosData::classification(&scene.cube, labels, patch_size, val_fraction, seed),
        None => ScosData::reconstruction(&scene.cube, patch_size, val_fraction, seed),
    };
    data.map_err(|e| usage(e.to_string()))
}

fn train(args: &TrainArgs) -> Result<()> {
    let scene = args.scene.require()?;
    let base = if args.full_scale {
        ScosTrainConfig::full_scale(scene.task())
    } else {
        ScosTrainConfig::default()
    };
    let cfg = ScosTrainConfig {
        iterations: args.iterations.unwrap_or(base.iterations),
        batch_size: args.batch_size.unwrap_or(base.batch_size),
        learning_rate: args.learning_rate.unwrap_or(base.learning_rate),
        patch_size: args.patch_size.unwrap_or(base.patch_size),
        k: args.k.unwrap_or(base.k),
        val_fraction: args.val_fraction.unwrap_or(base.val_fraction),
        hidden: args.hidden.unwrap_or(base.hidden),
        pe_kind: args.pe.unwrap_or(base.pe_kind),
        grad_clip: args.grad_clip.unwrap_or(base.grad_clip),
        seed: args.seed,
    };
    cfg.validate(scene.cube.num_bands()).map_err(|e| usage(e.to_string()))?;
    let data = patches(&scene, cfg.patch_size, cfg.val_fraction, cfg.seed)?;
    let trained = train_one_shot(&data, &cfg)?;
    save_params(&trained.params, &args.out)?;
    if let Some(log) = &args.log {
        write_file(log, log_csv(&trained.log))?;
    }
    let last = trained.log.last().map_or(f64::NAN, |e| e.loss);
    println!("wrote {} after {} steps, final loss {last}", args.out.display(), trained.params.steps);
    Ok(())
}

fn load(args: &DataArgs) -> Result<(SupernetParams, ScosData, Scene)> {
    let scene = args.scene.require()?;
    let params = load_params(&args.params)?;
    let side = (params.sites as f64).sqrt().round() as usize;
    if side * side != params.sites {
        return Err(usage(format!("parameters have {} sites, not a square patch", params.sites)));
    }
    let data = patches(&scene, side, args.val_fraction, args.data_seed.unwrap_or(params.seed))?;
    check_compatible(&params, &data).map_err(|e| usage(e.to_string()))?;
    Ok((params, data, scene))
}

pub fn search(args: &ScosSearchArgs) -> Result<PathBuf> {
    let (params, data, scene) = load(&args.data)?;
    let table = args.table.as_deref().map(read_table).transpose()?;
    if args.m == 0 {
        return Err(usage("--M must be at least 1"));
    }
    let size = count_combinations(params.num_bands as u64, params.k as u64)?;
    let m = if args.m > size {
        log::warn!("--M {} exceeds the {size} combinations in the space; clipped to {size}", args.m);
        size
    } else {
        args.m
    };
    let space = SearchSpace::new(params.num_bands, params.k)?;
    let result = scos_search(&params, &data, &space, m, args.seed)?;
    let metric = match params.task {
        TaskKind::Classification => bss_core::hsi::OA,
        TaskKind::Reconstruction => bss_core::hsi::PSNR,
    };
    let backbone = format!("scos-{}", params.pe_kind);
    let name = args.name.clone().unwrap_or_else(|| format!("scos-s{}", args.seed));
    write_outcome(
        &args.out,
        &name,
        Outcome {
            result: &result,
            seed: args.seed,
            task: params.task,
            dataset: &scene.id,
            backbone: &backbone,
            metric,
            truth: table.as_ref(),
            config: config([
                ("M", Value::from(m as i64)),
                ("k", Value::from(params.k as i64)),
                ("pe", Value::from(params.pe_kind.name())),
                ("params", Value::from(args.data.params.display().to_string())),
            ]),
        },
    )
}

fn tune(args: &FinetuneArgs) -> Result<()> {
    let (params, data, _) = load(&args.data)?;
    args.bands.check_bands(params.num_bands).map_err(|e| usage(e.to_string()))?;
    if args.bands.len() != params.k {
        return Err(usage(format!("--bands has {} bands, the supernet selects {}", args.bands.len(), params.k)));
    }
    let cfg = FinetuneConfig {
        iterations: args.iterations,
        batch_size: args.batch_size,
        learning_rate: args.learning_rate,
        grad_clip: args.grad_clip,
        warm_start: args.warm_start,
        seed: args.seed,
    };
    let (tuned, score) = finetune(&params, &data, &args.bands, &cfg)?;
    if let Some(out) = &args.out {
        save_params(&tuned, out)?;
    }
    println!("bands={} score={score}", args.bands);
    Ok(())
}
