//! Experiment configuration files.
//!
//! Configs are TOML documents with a mandatory `version = 1` key and a
//! mandatory top-level `seed`. Unknown keys are rejected everywhere. Task
//! seeds may be given explicitly; a task without one is seeded from the
//! top-level seed and its position in the task list.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use taskinfo::annealing::AnnealSchedule;
use taskinfo::bounds::ValidationConfig;
use taskinfo::distance::DistanceConfig;
use taskinfo::oracle::{FamilySpec, Hypothesis};
use taskinfo::rng::derive_seed;
use taskinfo::tasks::{
    apply_transform, bit_width, generate_planted_task, generate_random_label_task, Dataset,
    Encoding, InputDomain, TaskTransform, Teacher,
};
use taskinfo::variational::VariationalConfig;

use crate::error::{CliError, CliResult};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskEntry {
    pub name: String,
    pub source: TaskSource,
    /// Applied in order after generation or loading.
    #[serde(default)]
    pub transforms: Vec<TaskTransform>,
    /// Re-encoding of discrete inputs for the network engines.
    #[serde(default)]
    pub encoding: Option<Encoding>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSource {
    RandomLabel {
        n: usize,
        /// `discrete:M` or `real:d`.
        domain: String,
        labels: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Planted {
        n: usize,
        domain_size: usize,
        labels: usize,
        rule: PlantedRule,
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
    Teacher {
        n: usize,
        dim: usize,
        labels: usize,
        #[serde(default)]
        noise: f64,
        teacher_seed: u64,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// A dataset CSV, relative to the config file.
    File { path: PathBuf },
}

/// A deterministic labelling of a discrete domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantedRule {
    Constant { label: usize },
    /// `map[bit b of x]`.
    Feature { bit: u32, map: [usize; 2] },
    /// `map[parity of the listed bits of x]`.
    Parity { bits: Vec<u32>, map: [usize; 2] },
}

impl PlantedRule {
    fn label(&self, x: usize) -> usize {
        match self {
            PlantedRule::Constant { label } => *label,
            PlantedRule::Feature { bit, map } => map[(x >> bit) & 1],
            PlantedRule::Parity { bits, map } => {
                let ones = bits.iter().filter(|&&b| (x >> b) & 1 == 1).count();
                map[ones & 1]
            }
        }
    }

    fn hypothesis(&self, m: usize, k: usize) -> CliResult<Hypothesis> {
        let width = bit_width(m) as u32;
        let labels: Vec<usize> = match self {
            PlantedRule::Constant { label } => vec![*label],
            PlantedRule::Feature { map, .. } | PlantedRule::Parity { map, .. } => map.to_vec(),
        };
        if labels.iter().any(|&y| y >= k) {
            return Err(CliError::config(format!("planted rule uses a label outside 0..{k}")));
        }
        let bits: Vec<u32> = match self {
            PlantedRule::Constant { .. } => Vec::new(),
            PlantedRule::Feature { bit, .. } => vec![*bit],
            PlantedRule::Parity { bits, .. } => bits.clone(),
        };
        if bits.iter().any(|&b| b >= width) {
            return Err(CliError::config(format!("planted rule reads a bit beyond the {width}-bit domain")));
        }
        let mut table = vec![0.0; m * k];
        for x in 0..m {
            table[x * k + self.label(x)] = 1.0;
        }
        Ok(Hypothesis::from_table(table, k, 0.0, "planted")?)
    }
}

impl TaskEntry {
    /// Builds the dataset. `base` resolves relative paths and `index`
    /// seeds tasks that lack an explicit seed.
    pub fn build(&self, base: &Path, seed: u64, index: usize) -> CliResult<Dataset> {
        let task_seed = |s: &Option<u64>| s.unwrap_or_else(|| derive_seed(seed, index as u64));
        let mut d = match &self.source {
            TaskSource::RandomLabel { n, domain, labels, seed } => {
                let domain: InputDomain = domain.parse()?;
                generate_random_label_task(*n, domain, *labels, task_seed(seed))?
            }
            TaskSource::Planted { n, domain_size, labels, rule, noise, seed } => {
                let h = rule.hypothesis(*domain_size, *labels)?;
                generate_planted_task(*n, &h, *noise, task_seed(seed))?
            }
            TaskSource::Teacher { n, dim, labels, noise, teacher_seed, seed } => {
                Teacher::random(*dim, *labels, *teacher_seed)?.sample(*n, *noise, task_seed(seed))?
            }
            TaskSource::File { path } => {
                let full = base.join(path);
                let file = fs::File::open(&full)
                    .map_err(|e| CliError::config(format!("task `{}`: cannot open {}: {e}", self.name, full.display())))?;
                Dataset::read_csv(BufReader::new(file))?
            }
        };
        for t in &self.transforms {
            d = apply_transform(&d, t)?;
        }
        if let Some(enc) = self.encoding {
            d = d.encode(enc);
        }
        Ok(d)
    }
}

/// Builds every task before any work starts, so a bad entry fails early.
pub fn build_tasks(tasks: &[TaskEntry], base: &Path, seed: u64) -> CliResult<Vec<(String, Dataset)>> {
    let mut names: Vec<&str> = tasks.iter().map(|t| t.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::config("task names must be unique"));
    }
    for t in tasks {
        let safe = !t.name.is_empty()
            && t.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
        if !safe {
            return Err(CliError::config(format!(
                "task name `{}` must be nonempty and use only letters, digits, `-` or `_`",
                t.name
            )));
        }
    }
    tasks
        .iter()
        .enumerate()
        .map(|(i, t)| Ok((t.name.clone(), t.build(base, seed, i)?)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Oracle,
    Variational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSettings {
    pub prior_scale: f64,
    #[serde(default)]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub posterior: VariationalConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureFnConfig {
    pub version: u32,
    pub seed: u64,
    pub engine: Engine,
    pub task: TaskEntry,
    /// Budgets for the oracle engine.
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
    /// Strictly decreasing levels for the variational engine.
    #[serde(default)]
    pub betas: Option<Vec<f64>>,
    #[serde(default)]
    pub family: Option<FamilySpec>,
    /// A family text file, relative to the config; excludes `family`.
    #[serde(default)]
    pub family_file: Option<PathBuf>,
    #[serde(default)]
    pub network: Option<NetworkSettings>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaSweepConfig {
    pub version: u32,
    pub seed: u64,
    pub tasks: Vec<TaskEntry>,
    pub betas: Vec<f64>,
    pub network: NetworkSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceMatrixConfig {
    pub version: u32,
    pub seed: u64,
    pub tasks: Vec<TaskEntry>,
    pub distance: DistanceConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundRequest {
    /// Summed clipped and rescaled training loss, in `[0, n]`.
    pub train_loss_total: f64,
    pub kl: f64,
    pub n: usize,
    pub beta: f64,
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TeacherTrials {
    pub dim: usize,
    pub labels: usize,
    pub train_n: usize,
    pub test_n: usize,
    #[serde(default)]
    pub noise: f64,
    pub teacher_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationRequest {
    pub beta: f64,
    pub delta: f64,
    pub trials: usize,
    pub teacher: TeacherTrials,
    #[serde(default)]
    pub hidden: Vec<usize>,
    pub fit: ValidationConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacBayesConfig {
    pub version: u32,
    pub seed: u64,
    #[serde(default)]
    pub bound: Option<BoundRequest>,
    #[serde(default)]
    pub validation: Option<ValidationRequest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GridSource {
    /// Node and metric files, relative to the config.
    File { nodes: PathBuf, metric: PathBuf },
    /// A random instance whose global minimizers are epsilon-connected.
    Connected { chain: usize, distractors: usize },
    /// A fixed instance where greedy annealing is stranded.
    Disconnected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealConfig {
    pub version: u32,
    pub seed: u64,
    pub grid: GridSource,
    /// Required for file grids; generated grids bring their own.
    #[serde(default)]
    pub schedule: Option<AnnealSchedule>,
    #[serde(default)]
    pub start: Option<usize>,
    /// When set, static transition weights from the start node are written.
    #[serde(default)]
    pub temperature: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenTaskConfig {
    pub version: u32,
    pub seed: u64,
    pub tasks: Vec<TaskEntry>,
}

/// Common handling for every config type.
pub trait Versioned: Serialize + DeserializeOwned {
    fn version(&self) -> u32;
    fn seed_mut(&mut self) -> &mut u64;
}

macro_rules! versioned {
    ($($t:ty),*) => {$(
        impl Versioned for $t {
            fn version(&self) -> u32 {
                self.version
            }
            fn seed_mut(&mut self) -> &mut u64 {
                &mut self.seed
            }
        }
    )*};
}

versioned!(StructureFnConfig, BetaSweepConfig, DistanceMatrixConfig, PacBayesConfig, AnnealConfig, GenTaskConfig);

/// A parsed config together with its hash and directory.
pub struct Loaded<C> {
    pub config: C,
    pub hash: String,
    pub base: PathBuf,
}

pub fn parse<C: Versioned>(text: &str, seed_override: Option<u64>) -> CliResult<(C, String)> {
    let mut config: C = toml::from_str(text).map_err(|e| CliError::config(e.to_string()))?;
    if config.version() != CONFIG_VERSION {
        return Err(CliError::config(format!(
            "unsupported config version {}, expected {CONFIG_VERSION}",
            config.version()
        )));
    }
    if let Some(s) = seed_override {
        *config.seed_mut() = s;
    }
    let hash = config_hash(&config)?;
    Ok((config, hash))
}

pub fn load<C: Versioned>(path: &Path, seed_override: Option<u64>) -> CliResult<Loaded<C>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    let (config, hash) = parse(&text, seed_override)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, hash, base })
}

/// SHA-256 of the canonical JSON form, so formatting and comments in the
/// source file do not change it.
pub fn config_hash<C: Serialize>(config: &C) -> CliResult<String> {
    let json = serde_json::to_string(config).map_err(|e| CliError::config(e.to_string()))?;
    let digest = Sha256::digest(json.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}
