use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bss_core::benchtable::{
    load_table, BenchTable, Classifier, ClassificationEvaluator, Evaluator, ReconstructionEvaluator, TableEvaluator,
    DEFAULT_VAL_FRACTION,
};
use bss_core::hsi::io::{load_cube, load_labels};
use bss_core::{Error, HsiCube, LabelMap, TaskKind};
use clap::{Args, ValueEnum};

/// An error that carries its own exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NOT_FOUND: u8 = 3;

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    Exit { code: EXIT_USAGE, message: message.into() }.into()
}

pub fn not_found(message: impl Into<String>) -> anyhow::Error {
    Exit { code: EXIT_NOT_FOUND, message: message.into() }.into()
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Exit>() {
            return e.code;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Io { .. } | Error::Format { .. } | Error::Parse { .. } => EXIT_IO,
                Error::NotFound(_) => EXIT_NOT_FOUND,
                Error::Invalid(_)
                | Error::Shape(_)
                | Error::BandOutOfRange { .. }
                | Error::Overflow { .. }
                | Error::Duplicate(_)
                | Error::SpaceTooLarge { .. } => EXIT_USAGE,
                _ => EXIT_IO,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() {
            return EXIT_USAGE;
        }
    }
    EXIT_IO
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn read_cube(path: &Path) -> Result<HsiCube> {
    let loaded = load_cube(path)?;
    if loaded.normalized {
        log::warn!("{}: values outside [0, 1] were min-max normalized", path.display());
    }
    Ok(loaded.cube)
}

pub fn read_labels(path: &Path) -> Result<LabelMap> {
    Ok(load_labels(path)?)
}

pub fn read_table(path: &Path) -> Result<BenchTable> {
    Ok(load_table(path)?)
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Cls,
    Rec,
}

impl From<TaskArg> for TaskKind {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Cls => TaskKind::Classification,
            TaskArg::Rec => TaskKind::Reconstruction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClassifierArg {
    /// Nearest centroid.
    Nc,
    /// One-vs-rest ridge regression.
    Ridge,
}

/// A scene on disk: a cube, plus labels for classification.
#[derive(Args, Debug, Clone, Default)]
pub struct SceneArgs {
    /// BSSC cube file.
    #[arg(long)]
    pub cube: Option<PathBuf>,
    /// BSSL label file; its presence makes the task classification.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

pub struct Scene {
    pub cube: HsiCube,
    pub labels: Option<LabelMap>,
    pub id: String,
}

impl Scene {
    pub fn task(&self) -> TaskKind {
        if self.labels.is_some() {
            TaskKind::Classification
        } else {
            TaskKind::Reconstruction
        }
    }
}

impl SceneArgs {
    pub fn load(&self) -> Result<Option<Scene>> {
        let Some(cube_path) = &self.cube else {
            if self.labels.is_some() {
                return Err(usage("--labels needs --cube"));
            }
            return Ok(None);
        };
        let cube = read_cube(cube_path)?;
        let labels = self.labels.as_deref().map(read_labels).transpose()?;
        if let Some(l) = &labels {
            if !l.matches(&cube) {
                return Err(usage("label map does not match the cube"));
            }
        }
        Ok(Some(Scene { cube, labels, id: stem(cube_path) }))
    }

    pub fn require(&self) -> Result<Scene> {
        self.load()?.ok_or_else(|| usage("--cube is required"))
    }
}

/// How a live evaluator is built from a scene.
#[derive(Args, Debug, Clone)]
pub struct LiveArgs {
    #[arg(long, value_enum, default_value_t = ClassifierArg::Nc)]
    pub classifier: ClassifierArg,
    /// Ridge penalty of the ridge classifier.
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    /// Fraction of pixels held out for validation.
    #[arg(long, default_value_t = DEFAULT_VAL_FRACTION)]
    pub val_fraction: f64,
    /// Dataset id recorded in tables; defaults to the cube file stem.
    #[arg(long)]
    pub dataset_id: Option<String>,
}

pub fn live_evaluator(scene: &Scene, live: &LiveArgs) -> Result<Box<dyn Evaluator>> {
    if !(live.val_fraction > 0.0 && live.val_fraction < 1.0) {
        return Err(usage(format!("--val-fraction {} must be in (0, 1)", live.val_fraction)));
    }
    let id = live.dataset_id.clone().unwrap_or_else(|| scene.id.clone());
    Ok(match &scene.labels {
        Some(labels) => {
            let classifier = match live.classifier {
                ClassifierArg::Nc => Classifier::NearestCentroid,
                ClassifierArg::Ridge => Classifier::Ridge { lambda: live.lambda },
            };
            Box::new(ClassificationEvaluator::new(&scene.cube, labels, classifier, id)?.with_val_fraction(live.val_fraction))
        }
        None => Box::new(ReconstructionEvaluator::new(&scene.cube, id)?.with_val_fraction(live.val_fraction)),
    })
}

/// One more than the largest band index in the table.
pub fn table_bands(table: &BenchTable) -> usize {
    table.band_combinations().filter_map(|bc| bc.indices().last()).max().map_or(0, |&b| b + 1)
}

pub fn table_k(table: &BenchTable) -> Option<usize> {
    table.band_combinations().next().map(|bc| bc.len())
}

pub fn table_evaluator(table: &BenchTable, bands: Option<usize>) -> Result<TableEvaluator<'_>> {
    let inferred = table_bands(table);
    let n = bands.unwrap_or(inferred);
    if n < inferred {
        return Err(usage(format!("--bands {n} is below the table's largest band index {}", inferred - 1)));
    }
    Ok(TableEvaluator::new(table, n))
}
