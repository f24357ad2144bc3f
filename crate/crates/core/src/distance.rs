//! Asymmetric task distances measured with variational posteriors.
//!
//! `d(D1 -> D2)` is the extra information a minimal posterior of the union
//! `D1 ⊔ D2` carries over a minimal posterior of `D1`. Minimal posteriors are
//! approximated by replicated fits: replicates whose Lagrangian lies within
//! a slack of the best one form the sufficient set, and the distance is the
//! max over source replicates of the min over union replicates of the KL
//! difference.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{self, sgd_train, Architecture, MlpParams, SgdConfig};
use crate::rng::derive_seed;
use crate::tasks::{disjoint_union, Dataset};
use crate::variational::{
    expected_loss_estimate, kl_gaussian, optimize_objective, GaussianPosterior, IsotropicPrior,
    NetworkObjective, VariationalConfig,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceConfig {
    pub beta: f64,
    pub prior_scale: f64,
    /// Hidden widths; input and output widths come from each dataset.
    #[serde(default)]
    pub hidden: Vec<usize>,
    pub replicates: usize,
    pub posterior: VariationalConfig,
    /// Replicates within this many NATS of the best Lagrangian are kept.
    #[serde(default)]
    pub lagrangian_slack: f64,
    /// `tau_d` as a fraction of the larger KL involved.
    #[serde(default = "default_tolerance")]
    pub tolerance_fraction: f64,
}

fn default_tolerance() -> f64 {
    0.05
}

impl DistanceConfig {
    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::param("need at least one replicate"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::param("beta must be positive"));
        }
        if !(self.lagrangian_slack >= 0.0) || !(self.tolerance_fraction >= 0.0) {
            return Err(Error::param("slack and tolerance must be nonnegative"));
        }
        Ok(())
    }

    /// Replicate seeds derived from the posterior seed.
    pub fn replicate_seeds(&self) -> Vec<u64> {
        (0..self.replicates)
            .map(|r| derive_seed(self.posterior.seed, r as u64))
            .collect()
    }

    pub fn architecture_for(&self, d: &Dataset) -> Result<Architecture> {
        let mut widths = vec![d.domain().feature_dim()];
        widths.extend(&self.hidden);
        widths.push(d.num_labels());
        Architecture::new(widths)
    }
}

/// One replicated fit of a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Replicate {
    pub seed: u64,
    pub lagrangian: f64,
    pub kl: f64,
}

/// The replicates that survived plus warnings for dropped ones.
#[derive(Clone, Debug, PartialEq)]
pub struct Fits {
    pub replicates: Vec<Replicate>,
    pub warnings: Vec<String>,
}

impl Fits {
    /// Replicates in the sufficient set, best Lagrangian first and ties by KL.
    pub fn sufficient(&self, slack: f64) -> Vec<&Replicate> {
        let mut reps: Vec<&Replicate> = self.replicates.iter().collect();
        reps.sort_by(|a, b| a.lagrangian.total_cmp(&b.lagrangian).then(a.kl.total_cmp(&b.kl)));
        let best = match reps.first() {
            Some(r) => r.lagrangian,
            None => return reps,
        };
        reps.retain(|r| r.lagrangian <= best + slack);
        reps
    }
}

/// Fits `d` once per seed at level `cfg.beta`. Diverged replicates are dropped.
pub fn fit_replicates(d: &Dataset, cfg: &DistanceConfig, seeds: &[u64]) -> Result<Fits> {
    cfg.validate()?;
    let arch = cfg.architecture_for(d)?;
    let prior = IsotropicPrior::new(cfg.prior_scale)?;
    let obj = NetworkObjective::new(&arch, d)?;
    let results = crate::par::map_indexed(seeds.len(), |r| -> Result<Option<Replicate>> {
        let seed = seeds[r];
        let pcfg = VariationalConfig {
            seed,
            ..cfg.posterior.clone()
        };
        let init = GaussianPosterior::around(&MlpParams::init(&arch, seed), pcfg.init_log_var)?;
        match optimize_objective(&obj, cfg.beta, &prior, &pcfg, init) {
            Ok(fit) => {
                let q = fit.posterior;
                let kl = kl_gaussian(&q, &prior);
                let loss = expected_loss_estimate(&obj, &q, pcfg.report_mc_samples, derive_seed(seed, 7))?;
                Ok(Some(Replicate {
                    seed,
                    lagrangian: loss.mean + cfg.beta * kl,
                    kl,
                }))
            }
            Err(Error::PosteriorDiverged { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut fits = Fits {
        replicates: Vec::new(),
        warnings: Vec::new(),
    };
    for (r, res) in results.into_iter().enumerate() {
        match res? {
            Some(rep) => fits.replicates.push(rep),
            None => fits.warnings.push(format!("replicate with seed {} diverged and was dropped", seeds[r])),
        }
    }
    Ok(fits)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    /// Floored at zero.
    pub distance: f64,
    /// Before flooring.
    pub raw: f64,
    /// KL of the union posterior attaining the max-min.
    pub kl_union: f64,
    /// KL of the source posterior attaining the max-min.
    pub kl_source: f64,
    /// `tau_d`.
    pub tolerance: f64,
    /// Max minus min KL difference over all surviving replicate pairs.
    pub spread: f64,
    pub warnings: Vec<String>,
}

/// Combines source and union fits into a distance.
pub fn combine(source: &Fits, union: &Fits, cfg: &DistanceConfig) -> Result<DistanceEstimate> {
    let s = source.sufficient(cfg.lagrangian_slack);
    let u = union.sufficient(cfg.lagrangian_slack);
    if s.is_empty() || u.is_empty() {
        return Err(Error::DistanceUndefined);
    }
    let mut best: Option<(f64, f64, f64)> = None;
    for q1 in &s {
        let (kl_u, diff) = u
            .iter()
            .map(|q12| (q12.kl, q12.kl - q1.kl))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if best.is_none_or(|b| diff > b.0) {
            best = Some((diff, kl_u, q1.kl));
        }
    }
    let (raw, kl_union, kl_source) = best.expect("nonempty");
    let diffs = source
        .replicates
        .iter()
        .flat_map(|a| union.replicates.iter().map(move |b| b.kl - a.kl));
    let (lo, hi) = diffs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let mut warnings = source.warnings.clone();
    warnings.extend(union.warnings.iter().cloned());
    Ok(DistanceEstimate {
        distance: raw.max(0.0),
        raw,
        kl_union,
        kl_source,
        tolerance: cfg.tolerance_fraction * kl_union.max(kl_source),
        spread: hi - lo,
        warnings,
    })
}

/// `d(d1 -> d2)` with replicates seeded by `seeds`.
pub fn task_distance(d1: &Dataset, d2: &Dataset, cfg: &DistanceConfig, seeds: &[u64]) -> Result<DistanceEstimate> {
    if seeds.is_empty() {
        return Err(Error::param("need at least one replicate seed"));
    }
    let source = fit_replicates(d1, cfg, seeds)?;
    let union = fit_replicates(&disjoint_union(d1, d2)?, cfg, seeds)?;
    combine(&source, &union, cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub names: Vec<String>,
    pub beta: f64,
    /// `entries[i][j] = d(task_j -> task_i)`; `None` where undefined.
    pub entries: Vec<Vec<Option<DistanceEstimate>>>,
}

impl DistanceMatrix {
    pub fn value(&self, target: usize, source: usize) -> Option<f64> {
        self.entries[target][source].as_ref().map(|e| e.distance)
    }

    pub fn values(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.names.len())
            .map(|i| (0..self.names.len()).map(|j| self.value(i, j)).collect())
            .collect()
    }

    /// Rows are targets, columns are sources; undefined entries are empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "target,{}", self.names.join(","))?;
        for (i, name) in self.names.iter().enumerate() {
            let row: Vec<String> = (0..self.names.len())
                .map(|j| self.value(i, j).map(|v| v.to_string()).unwrap_or_default())
                .collect();
            writeln!(w, "{name},{}", row.join(","))?;
        }
        Ok(())
    }

    /// JSON metadata with per-entry KL components and tolerances.
    pub fn metadata(&self, config_hash: &str) -> serde_json::Value {
        let mut entries = Vec::new();
        for (i, row) in self.entries.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                entries.push(serde_json::json!({
                    "target": self.names[i],
                    "source": self.names[j],
                    "estimate": e,
                }));
            }
        }
        let diag_ok = (0..self.names.len()).all(|i| match &self.entries[i][i] {
            Some(e) => e.raw <= e.tolerance,
            None => false,
        });
        serde_json::json!({
            "beta": self.beta,
            "config_hash": config_hash,
            "diagonal_within_tolerance": diag_ok,
            "entries": entries,
        })
    }
}

/// All ordered pairs, including the diagonal. Each task and each union is
/// fitted once.
pub fn distance_matrix(tasks: &[(String, Dataset)], cfg: &DistanceConfig) -> Result<DistanceMatrix> {
    if tasks.len() < 2 {
        return Err(Error::param("a distance matrix needs at least two tasks"));
    }
    cfg.validate()?;
    let seeds = cfg.replicate_seeds();
    let singles = tasks
        .iter()
        .map(|(_, d)| fit_replicates(d, cfg, &seeds))
        .collect::<Result<Vec<_>>>()?;
    let t = tasks.len();
    let mut entries = vec![vec![None; t]; t];
    for (j, (_, src)) in tasks.iter().enumerate() {
        for (i, (_, tgt)) in tasks.iter().enumerate() {
            let union = fit_replicates(&disjoint_union(src, tgt)?, cfg, &seeds)?;
            entries[i][j] = match combine(&singles[j], &union, cfg) {
                Ok(e) => Some(e),
                Err(Error::DistanceUndefined) => None,
                Err(e) => return Err(e),
            };
        }
    }
    Ok(DistanceMatrix {
        names: tasks.iter().map(|(n, _)| n.clone()).collect(),
        beta: cfg.beta,
        entries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinetuneConfig {
    pub pretrain: SgdConfig,
    /// Fine-tuning schedule; its learning rate is normally below the pretraining one.
    pub finetune: SgdConfig,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FinetuneOutcome {
    /// Mean held-out cross-entropy per sample after pretraining on the source
    /// and fine-tuning on the target.
    pub finetuned: f64,
    /// Same budget on the target from the same initialization.
    pub scratch: f64,
}

/// Pretrains on `source`, fine-tunes on `target_train`, and compares to
/// training from scratch with the fine-tuning schedule.
pub fn finetune_correlate(
    source: &Dataset,
    target_train: &Dataset,
    target_test: &Dataset,
    arch: &Architecture,
    cfg: &FinetuneConfig,
) -> Result<FinetuneOutcome> {
    if target_test.is_empty() {
        return Err(Error::param("held-out target split is empty"));
    }
    let init = MlpParams::init(arch, cfg.pretrain.seed);
    let pre = sgd_train(source, init.clone(), &cfg.pretrain)?.params;
    let tuned = sgd_train(target_train, pre, &cfg.finetune)?.params;
    let scratch_cfg = SgdConfig {
        learning_rate: cfg.pretrain.learning_rate,
        ..cfg.finetune.clone()
    };
    let scratch = sgd_train(target_train, init, &scratch_cfg)?.params;
    let n = target_test.len() as f64;
    Ok(FinetuneOutcome {
        finetuned: models::dataset_loss(&tuned, target_test)? / n,
        scratch: models::dataset_loss(&scratch, target_test)? / n,
    })
}
