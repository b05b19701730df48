use std::path::PathBuf;

use anyhow::Result;
use bss_core::benchtable::Evaluator;
use bss_core::search::{
    exhaustive, genetic, predictor_search, random_search, sffs, stats_ranked_search, GeneticConfig, Objective,
    PredictorConfig, SearchSpace, SffsConfig, DEFAULT_EXHAUSTIVE_CAP,
};
use bss_core::stats::BandStats;
use bss_core::surrogate::{SurrogateConfig, SurrogateKind};
use clap::{Args, ValueEnum};
use toml::Value;

use crate::common::{live_evaluator, read_table, table_evaluator, table_k, usage, LiveArgs, SceneArgs};
use crate::result::{config, write_outcome, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Exhaustive,
    Random,
    Sffs,
    Ga,
    Predictor,
    Stats,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Exhaustive => "exhaustive",
            Algo::Random => "random",
            Algo::Sffs => "sffs",
            Algo::Ga => "ga",
            Algo::Predictor => "predictor",
            Algo::Stats => "stats",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SurrogateArg {
    Ridge,
    Mlp,
}

/// Runs one search algorithm against a benchmark table (`--table`) or a live
/// evaluator built from `--cube` and `--labels`.
#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// Table-backed evaluator; also used for regret.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Table used only for regret when searching with a live evaluator.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// With --table, the cube only supplies band statistics.
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub live: LiveArgs,
    /// Band count of a table-backed space; inferred from the table.
    #[arg(long)]
    pub bands: Option<usize>,
    /// Combination size; inferred from the table.
    #[arg(long)]
    pub k: Option<usize>,
    /// Defaults to the task's primary metric.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed passed to the evaluator.
    #[arg(long, default_value_t = 0)]
    pub eval_seed: u64,
    /// Evaluations for random and stats search.
    #[arg(long = "M", default_value_t = 100)]
    pub m: u64,
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_CAP)]
    pub cap: u64,
    #[arg(long, default_value_t = 8)]
    pub completions: usize,
    #[arg(long, default_value_t = 20)]
    pub population: usize,
    #[arg(long, default_value_t = 20)]
    pub generations: usize,
    #[arg(long, default_value_t = 3)]
    pub tournament: usize,
    #[arg(long, default_value_t = 0.3)]
    pub mutation_rate: f64,
    #[arg(long, default_value_t = 100)]
    pub n_train: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_rank: usize,
    #[arg(long, default_value_t = 20)]
    pub top_t: usize,
    #[arg(long, value_enum, default_value_t = SurrogateArg::Ridge)]
    pub surrogate: SurrogateArg,
    /// Entropy weight of the stats ranking; the spectral angle gets 1 - alpha.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value = "results")]
    pub out: PathBuf,
    /// Result file stem; defaults to <algo>-s<seed>.
    #[arg(long)]
    pub name: Option<String>,
}

pub fn run(args: &SearchArgs) -> Result<PathBuf> {
    if args.table.is_some() && args.truth.is_some() {
        return Err(usage("--truth only applies to live searches; --table already gives regret"));
    }
    let scene = args.scene.load()?;
    let table = args.table.as_deref().map(read_table).transpose()?;
    let truth = args.truth.as_deref().map(read_table).transpose()?;
    let table_ev;
    let live_ev: Box<dyn Evaluator>;
    let evaluator: &dyn Evaluator = match (&table, &scene) {
        (Some(t), _) => {
            table_ev = table_evaluator(t, args.bands.or(scene.as_ref().map(|s| s.cube.num_bands())))?;
            &table_ev
        }
        (None, Some(s)) => {
            live_ev = live_evaluator(s, &args.live)?;
            &*live_ev
        }
        (None, None) => return Err(usage("give --table or --cube")),
    };
    let k = match (args.k, table.as_ref().and_then(table_k)) {
        (Some(k), Some(tk)) if k != tk => return Err(usage(format!("--k {k} differs from the table's {tk}"))),
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => 3,
    };
    let space = SearchSpace::new(evaluator.num_bands(), k)?;
    let metric = args.metric.clone().unwrap_or_else(|| evaluator.task().primary_metric.to_string());
    let objective = Objective::new(evaluator, &metric, args.eval_seed).map_err(|e| usage(e.to_string()))?;
    let stats = match &scene {
        Some(s) if s.cube.num_bands() == space.num_bands() => Some(BandStats::compute(&s.cube)?),
        Some(_) => return Err(usage("cube band count differs from the search space")),
        None => None,
    };

    let mut cfg = config([("k", Value::from(k as i64)), ("eval_seed", Value::from(args.eval_seed as i64))]);
    let result = match args.algo {
        Algo::Exhaustive => {
            cfg.insert("cap".into(), Value::from(args.cap as i64));
            exhaustive(objective, &space, args.cap)?
        }
        Algo::Random => {
            cfg.insert("M".into(), Value::from(args.m as i64));
            random_search(objective, &space, args.m, args.seed)?
        }
        Algo::Sffs => {
            cfg.insert("completions".into(), Value::from(args.completions as i64));
            sffs(objective, &space, &SffsConfig { completions: args.completions, seed: args.seed })?
        }
        Algo::Ga => {
            let ga = GeneticConfig {
                population: args.population,
                generations: args.generations,
                tournament: args.tournament,
                mutation_rate: args.mutation_rate,
                seed: args.seed,
            };
            ga.validate().map_err(|e| usage(e.to_string()))?;
            cfg.extend(config([
                ("population", Value::from(ga.population as i64)),
                ("generations", Value::from(ga.generations as i64)),
                ("tournament", Value::from(ga.tournament as i64)),
                ("mutation_rate", Value::from(ga.mutation_rate)),
            ]));
            genetic(objective, &space, &ga)?
        }
        Algo::Predictor => {
            let kind = match args.surrogate {
                SurrogateArg::Ridge => SurrogateKind::Ridge,
                SurrogateArg::Mlp => SurrogateKind::Mlp,
            };
            let pc = PredictorConfig {
                n_train: args.n_train,
                n_rank: args.n_rank,
                top_t: args.top_t,
                surrogate: SurrogateConfig { kind, seed: args.seed, ..SurrogateConfig::default() },
                seed: args.seed,
            };
            cfg.extend(config([
                ("n_train", Value::from(pc.n_train as i64)),
                ("n_rank", Value::from(pc.n_rank as i64)),
                ("top_t", Value::from(pc.top_t as i64)),
                ("surrogate", Value::from(args.surrogate.to_possible_value().unwrap().get_name())),
                ("band_stats", Value::from(stats.is_some())),
            ]));
            predictor_search(objective, &space, &pc, stats.as_ref())?
        }
        Algo::Stats => {
            let Some(stats) = &stats else {
                return Err(usage("stats search needs --cube for band statistics"));
            };
            cfg.extend(config([("M", Value::from(args.m as i64)), ("alpha", Value::from(args.alpha))]));
            stats_ranked_search(objective, stats, &space, args.m, args.alpha)?
        }
    };
    let name = args.name.clone().unwrap_or_else(|| format!("{}-s{}", args.algo.name(), args.seed));
    write_outcome(
        &args.out,
        &name,
        Outcome {
            result: &result,
            seed: args.seed,
            task: evaluator.task().kind,
            dataset: evaluator.dataset_id(),
            backbone: evaluator.backbone_id(),
            metric: &metric,
            truth: table.as_ref().or(truth.as_ref()),
            config: cfg,
        },
    )
}
