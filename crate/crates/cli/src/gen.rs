use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Result;
use bss_core::hsi::io::{encode_cube, encode_labels};
use bss_core::hsi::synth::{gen_synth_classification, gen_synth_reconstruction, SynthConfig};
use bss_core::BandCombination;
use clap::Args;

use crate::common::{usage, write_file, TaskArg};

pub const CUBE_FILE: &str = "cube.bssc";
pub const LABELS_FILE: &str = "labels.bssl";
pub const TRUTH_FILE: &str = "truth.txt";

/// Writes a synthetic scene: `cube.bssc`, `labels.bssl` (classification) and
/// a `truth.txt` sidecar with the generator's ground truth.
#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub task: TaskArg,
    #[arg(long, default_value_t = 16)]
    pub bands: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Side length of the square scene.
    #[arg(long, default_value_t = 32)]
    pub side: usize,
    /// Number of classes (classification).
    #[arg(long, default_value_t = 3)]
    pub classes: u16,
    /// Number of basis spectra (reconstruction).
    #[arg(long, default_value_t = 3)]
    pub rank: usize,
    /// Size of the informative band subset (classification).
    #[arg(long, default_value_t = 4)]
    pub informative: usize,
    /// Explicit informative bands, e.g. 1-4-7-10 (classification).
    #[arg(long)]
    pub informative_bands: Option<BandCombination>,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value = "data")]
    pub out: PathBuf,
}

pub fn run(args: &GenArgs) -> Result<()> {
    let cfg = SynthConfig {
        num_bands: args.bands,
        side: args.side,
        num_classes: args.classes,
        basis_rank: args.rank,
        informative: args.informative_bands.as_ref().map_or(args.informative, |b| b.len()),
        informative_bands: args.informative_bands.as_ref().map(|b| b.indices().to_vec()),
        noise_std: args.noise,
        seed: args.seed,
    };
    let mut truth = String::new();
    match args.task {
        TaskArg::Cls => {
            let (cube, labels, informative) = gen_synth_classification(&cfg).map_err(|e| usage(e.to_string()))?;
            write_file(&args.out.join(CUBE_FILE), encode_cube(&cube))?;
            write_file(&args.out.join(LABELS_FILE), encode_labels(&labels))?;
            let _ = writeln!(truth, "task=classification");
            let _ = writeln!(truth, "informative={informative}");
            let _ = writeln!(truth, "classes={}", cfg.num_classes);
        }
        TaskArg::Rec => {
            let cube = gen_synth_reconstruction(&cfg).map_err(|e| usage(e.to_string()))?;
            write_file(&args.out.join(CUBE_FILE), encode_cube(&cube))?;
            let _ = writeln!(truth, "task=reconstruction");
            let _ = writeln!(truth, "rank={}", cfg.basis_rank);
        }
    }
    let _ = writeln!(truth, "bands={}", cfg.num_bands);
    let _ = writeln!(truth, "side={}", cfg.side);
    let _ = writeln!(truth, "noise={}", cfg.noise_std);
    let _ = writeln!(truth, "seed={}", cfg.seed);
    write_file(&args.out.join(TRUTH_FILE), truth)?;
    println!("wrote {}", args.out.display());
    Ok(())
}
