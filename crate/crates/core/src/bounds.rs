//! PAC-Bayes test-error bounds and an empirical coverage harness.
//!
//! The bound is
//! `L_test(Q) <= [L_D(Q) + beta * KL + beta * ln(1/delta)] / (N * (1 - 1/(2 beta)))`
//! where `L_D(Q)` is the total expected training loss with every per-sample
//! term clipped at `L_max` and divided by it, so each term lies in `[0, 1]`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{sample_loss, Architecture, Features, Workspace};
use crate::par;
use crate::rng::derive_seed;
use crate::tasks::Dataset;
use crate::variational::{
    kl_gaussian, mc_estimate, optimize_posterior, GaussianPosterior, IsotropicPrior,
    VariationalConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Mean clipped training loss per sample, in `[0, 1]`.
    pub train_term: f64,
    pub kl: f64,
    pub n: usize,
    pub beta: f64,
    pub delta: f64,
    pub bound: f64,
}

/// Evaluates the bound. `train_loss_total` is the sum over samples of the
/// clipped and rescaled per-sample losses.
pub fn pac_bayes_bound(
    train_loss_total: f64,
    kl: f64,
    n: usize,
    beta: f64,
    delta: f64,
) -> Result<BoundReport> {
    if !(beta > 0.5 && beta.is_finite()) {
        return Err(Error::InvalidBeta(beta));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidConfidence(delta));
    }
    if n == 0 {
        return Err(Error::param("the bound needs at least one sample"));
    }
    if !(train_loss_total >= 0.0 && train_loss_total <= n as f64 + 1e-9) {
        return Err(Error::param(format!(
            "clipped training loss {train_loss_total} must lie in [0, n]"
        )));
    }
    if !(kl >= 0.0 && kl.is_finite()) {
        return Err(Error::param("KL must be finite and nonnegative"));
    }
    let nf = n as f64;
    let bound = (train_loss_total + beta * kl + beta * (1.0 / delta).ln()) / (nf * (1.0 - 0.5 / beta));
    Ok(BoundReport {
        train_term: train_loss_total / nf,
        kl,
        n,
        beta,
        delta,
        bound,
    })
}

/// `min(loss, l_max) / l_max`.
pub fn clip_and_rescale(loss: f64, l_max: f64) -> f64 {
    loss.min(l_max) / l_max
}

/// `E_{w~Q}` of the summed clipped, rescaled loss over the dataset.
pub fn clipped_expected_loss(
    q: &GaussianPosterior,
    d: &Dataset,
    l_max: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(l_max > 0.0) {
        return Err(Error::param("clip level must be positive"));
    }
    let arch = q
        .arch()
        .ok_or_else(|| Error::param("posterior has no architecture"))?
        .clone();
    let f = Features::from_dataset(d)?;
    if f.dim() != arch.input_dim() {
        return Err(Error::InvalidInput("posterior architecture does not fit dataset".into()));
    }
    let est = mc_estimate(q, mc_samples, seed, |w| {
        let mut ws = Workspace::new(&arch);
        (0..f.len())
            .map(|i| clip_and_rescale(sample_loss(&arch, w, f.input(i), f.label(i), &mut ws), l_max))
            .sum()
    })?;
    Ok(est.mean)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationConfig {
    pub prior_scale: f64,
    pub posterior: VariationalConfig,
    /// Draws for the clipped train and test losses.
    #[serde(default = "default_eval_mc")]
    pub eval_mc_samples: usize,
}

fn default_eval_mc() -> usize {
    256
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub train_term: f64,
    pub kl: f64,
    pub bound: f64,
    /// Mean clipped, rescaled held-out loss.
    pub test_loss: f64,
    pub covered: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub rows: Vec<TrialRow>,
    pub delta: f64,
}

impl ValidationReport {
    pub fn covered(&self) -> usize {
        self.rows.iter().filter(|r| r.covered).count()
    }

    pub fn coverage(&self) -> f64 {
        self.covered() as f64 / self.rows.len() as f64
    }

    /// True when coverage falls below the nominal `1 - delta`.
    pub fn below_nominal(&self) -> bool {
        self.coverage() < 1.0 - self.delta
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "trial,train_term,kl_nats,bound,test_loss,covered")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.trial, r.train_term, r.kl, r.bound, r.test_loss, r.covered as u8
            )?;
        }
        Ok(())
    }
}

/// For each trial, draws `(train, test)` from `generator(trial_seed)`, fits
/// a posterior at level `beta` and checks the held-out clipped loss against
/// the bound. The clip level is `ln K`.
pub fn bound_validation_trial<G>(
    generator: G,
    arch: &Architecture,
    beta: f64,
    delta: f64,
    trials: usize,
    cfg: &ValidationConfig,
    seed: u64,
) -> Result<ValidationReport>
where
    G: Fn(u64) -> Result<(Dataset, Dataset)> + Sync,
{
    if trials == 0 {
        return Err(Error::EmptyTrialSet);
    }
    // validate the bound parameters once before doing any work
    pac_bayes_bound(0.0, 0.0, 1, beta, delta)?;
    let prior = IsotropicPrior::new(cfg.prior_scale)?;
    let l_max = (arch.num_labels() as f64).ln();
    let rows = par::map_indexed(trials, |t| -> Result<TrialRow> {
        let trial_seed = derive_seed(seed, t as u64);
        let (train, test) = generator(trial_seed)?;
        let pcfg = VariationalConfig {
            seed: trial_seed,
            ..cfg.posterior.clone()
        };
        let q = optimize_posterior(&train, arch, beta, &prior, &pcfg, None)?.posterior;
        let kl = kl_gaussian(&q, &prior);
        let train_total = clipped_expected_loss(&q, &train, l_max, cfg.eval_mc_samples, derive_seed(trial_seed, 1))?;
        let report = pac_bayes_bound(train_total.min(train.len() as f64), kl, train.len(), beta, delta)?;
        let test_total = clipped_expected_loss(&q, &test, l_max, cfg.eval_mc_samples, derive_seed(trial_seed, 2))?;
        let test_loss = test_total / test.len().max(1) as f64;
        Ok(TrialRow {
            trial: t,
            train_term: report.train_term,
            kl,
            bound: report.bound,
            test_loss,
            covered: test_loss <= report.bound,
        })
    });
    Ok(ValidationReport {
        rows: rows.into_iter().collect::<Result<Vec<_>>>()?,
        delta,
    })
}
