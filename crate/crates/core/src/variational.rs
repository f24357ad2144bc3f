//! Diagonal Gaussian posteriors over network weights and the information
//! they carry relative to an isotropic Gaussian prior.
//!
//! The central quantity is the Lagrangian
//! `E_{w~Q}[L_D(w)] + beta * KL(Q || P)`, estimated by reparameterized Monte
//! Carlo and minimized jointly over the posterior mean and log-variance.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::curve::{Curve, CurvePoint};
use crate::error::{Error, Result};
use crate::models::{
    self, accumulate_fisher_exact, Architecture, Features, MlpParams, Workspace,
};
use crate::par;
use crate::rng::{derive_seed, stream, stream_rng, TaskRng};
use crate::tasks::Dataset;

/// Floor applied to Fisher entries before taking logarithms.
pub const FISHER_FLOOR: f64 = 1e-8;

/// `P(w) = N(0, lambda^2 I)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsotropicPrior {
    scale: f64,
}

impl IsotropicPrior {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param(format!("prior scale must be positive, got {scale}")));
        }
        Ok(IsotropicPrior { scale })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn variance(&self) -> f64 {
        self.scale * self.scale
    }

    pub fn log_variance(&self) -> f64 {
        2.0 * self.scale.ln()
    }
}

/// Mean-field Gaussian `Q(w) = N(mean, diag(exp(log_var)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPosterior {
    arch: Option<Architecture>,
    mean: Vec<f64>,
    log_var: Vec<f64>,
}

impl GaussianPosterior {
    pub fn new(arch: &Architecture, mean: Vec<f64>, log_var: Vec<f64>) -> Result<Self> {
        if mean.len() != arch.num_params() {
            return Err(Error::param(format!(
                "architecture has {} parameters, mean has {}",
                arch.num_params(),
                mean.len()
            )));
        }
        let mut q = GaussianPosterior::unstructured(mean, log_var)?;
        q.arch = Some(arch.clone());
        Ok(q)
    }

    /// A posterior over a plain parameter vector with no network attached.
    pub fn unstructured(mean: Vec<f64>, log_var: Vec<f64>) -> Result<Self> {
        if mean.len() != log_var.len() {
            return Err(Error::param("mean and log-variance lengths differ"));
        }
        if mean.iter().chain(&log_var).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("posterior entries must be finite".into()));
        }
        if log_var.iter().any(|v| v.exp() <= 0.0) {
            return Err(Error::InvalidInput("variance underflows to zero".into()));
        }
        Ok(GaussianPosterior {
            arch: None,
            mean,
            log_var,
        })
    }

    /// `Q = P`: zero mean and the prior variance everywhere.
    pub fn prior_matched(arch: &Architecture, prior: &IsotropicPrior) -> Self {
        let k = arch.num_params();
        GaussianPosterior {
            arch: Some(arch.clone()),
            mean: vec![0.0; k],
            log_var: vec![prior.log_variance(); k],
        }
    }

    /// Centered on `params` with a common log-variance.
    pub fn around(params: &MlpParams, log_var: f64) -> Result<Self> {
        GaussianPosterior::new(params.arch(), params.values().to_vec(), vec![log_var; params.len()])
    }

    pub fn arch(&self) -> Option<&Architecture> {
        self.arch.as_ref()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn log_var(&self) -> &[f64] {
        &self.log_var
    }

    pub fn variances(&self) -> Vec<f64> {
        self.log_var.iter().map(|v| v.exp()).collect()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// The mean as network parameters.
    pub fn mean_params(&self) -> Result<MlpParams> {
        let arch = self
            .arch
            .as_ref()
            .ok_or_else(|| Error::param("posterior has no architecture"))?;
        MlpParams::from_values(arch, self.mean.clone())
    }

    /// `w = mean + sigma * eps`.
    pub fn sample_with(&self, eps: &[f64], out: &mut [f64]) {
        for i in 0..self.mean.len() {
            out[i] = self.mean[i] + (0.5 * self.log_var[i]).exp() * eps[i];
        }
    }

    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        let arch = self
            .arch
            .as_ref()
            .ok_or_else(|| Error::param("only network posteriors can be checkpointed"))?;
        writeln!(w, "# taskinfo-posterior v1")?;
        models::write_widths(&mut w, arch)?;
        models::write_arrays(&mut w, arch, "mean", &self.mean)?;
        models::write_arrays(&mut w, arch, "log_var", &self.log_var)?;
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = models::numbered_lines(r)?;
        models::expect_line(&mut lines, "# taskinfo-posterior v1")?;
        let arch = models::read_widths(&mut lines)?;
        let mean = models::read_arrays(&mut lines, &arch, "mean")?;
        let log_var = models::read_arrays(&mut lines, &arch, "log_var")?;
        GaussianPosterior::new(&arch, mean, log_var)
    }
}

/// `KL(Q || P)` for diagonal `Q` and isotropic `P`, in NATS.
pub fn kl_gaussian(q: &GaussianPosterior, p: &IsotropicPrior) -> f64 {
    let lv = p.log_variance();
    let inv = 1.0 / p.variance();
    let mut total = 0.0;
    for (m, s) in q.mean.iter().zip(&q.log_var) {
        // exp(t) - 1 - t with t = ln(sigma^2 / lambda^2), written to avoid cancellation
        let t = s - lv;
        total += m * m * inv + t.exp_m1() - t;
    }
    0.5 * total
}

/// A differentiable loss over a flat parameter vector.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn loss(&self, w: &[f64]) -> f64;

    /// Writes the gradient into `grad` and returns the loss.
    fn loss_and_grad(&self, w: &[f64], grad: &mut [f64]) -> f64;
}

/// Summed cross-entropy of a network over a dataset.
#[derive(Clone, Debug)]
pub struct NetworkObjective {
    arch: Architecture,
    features: Features,
}

impl NetworkObjective {
    pub fn new(arch: &Architecture, d: &Dataset) -> Result<Self> {
        let features = Features::from_dataset(d)?;
        if features.dim() != arch.input_dim() || features.num_labels() > arch.num_labels() {
            return Err(Error::InvalidInput(format!(
                "architecture {:?} does not fit dataset with input width {} and {} labels",
                arch.widths(),
                features.dim(),
                features.num_labels()
            )));
        }
        Ok(NetworkObjective {
            arch: arch.clone(),
            features,
        })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn features(&self) -> &Features {
        &self.features
    }
}

impl Objective for NetworkObjective {
    fn dim(&self) -> usize {
        self.arch.num_params()
    }

    fn loss(&self, w: &[f64]) -> f64 {
        models::features_loss(&self.arch, w, &self.features)
    }

    fn loss_and_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        let mut ws = Workspace::new(&self.arch);
        models::loss_and_gradient(&self.arch, w, &self.features, 0..self.features.len(), grad, &mut ws)
    }
}

/// `L(w) = sum_i h_i (w_i - c_i)^2`.
///
/// With this scaling the optimal posterior covariance against a prior of
/// scale `lambda` is exactly [`closed_form_sigma`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalQuadratic {
    pub center: Vec<f64>,
    pub curvature: Vec<f64>,
}

impl DiagonalQuadratic {
    pub fn new(center: Vec<f64>, curvature: Vec<f64>) -> Result<Self> {
        if center.len() != curvature.len() {
            return Err(Error::param("center and curvature lengths differ"));
        }
        if curvature.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
            return Err(Error::param("curvatures must be finite and nonnegative"));
        }
        Ok(DiagonalQuadratic { center, curvature })
    }
}

impl Objective for DiagonalQuadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn loss(&self, w: &[f64]) -> f64 {
        w.iter()
            .zip(&self.center)
            .zip(&self.curvature)
            .map(|((w, c), h)| h * (w - c) * (w - c))
            .sum()
    }

    fn loss_and_grad(&self, w: &[f64], grad: &mut [f64]) -> f64 {
        for i in 0..w.len() {
            grad[i] = 2.0 * self.curvature[i] * (w[i] - self.center[i]);
        }
        self.loss(w)
    }
}

/// A fixed set of standard normal draws, one vector per Monte-Carlo sample.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseDraws {
    eps: Vec<Vec<f64>>,
}

impl NoiseDraws {
    pub fn plain(dim: usize, count: usize, rng: &mut TaskRng) -> Self {
        let eps = (0..count)
            .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        NoiseDraws { eps }
    }

    /// Antithetic pairs `(e, -e)` rescaled per coordinate so the sample
    /// second moment is exactly 1. Odd counts fall back to plain draws.
    pub fn balanced(dim: usize, count: usize, rng: &mut TaskRng) -> Self {
        if count < 2 || count % 2 == 1 {
            return NoiseDraws::plain(dim, count, rng);
        }
        let half = NoiseDraws::plain(dim, count / 2, rng).eps;
        let mut scale = vec![0.0; dim];
        for e in &half {
            for (s, v) in scale.iter_mut().zip(e) {
                *s += v * v;
            }
        }
        for s in &mut scale {
            *s = if *s > 0.0 { (half.len() as f64 / *s).sqrt() } else { 1.0 };
        }
        let mut eps = Vec::with_capacity(count);
        for e in half {
            let pos: Vec<f64> = e.iter().zip(&scale).map(|(v, s)| v * s).collect();
            let neg: Vec<f64> = pos.iter().map(|v| -v).collect();
            eps.push(pos);
            eps.push(neg);
        }
        NoiseDraws { eps }
    }

    pub fn from_vectors(eps: Vec<Vec<f64>>) -> Self {
        NoiseDraws { eps }
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn draws(&self) -> &[Vec<f64>] {
        &self.eps
    }
}

/// Lagrangian estimate and its exact gradient at fixed noise draws.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianGradient {
    pub value: f64,
    pub expected_loss: f64,
    pub kl: f64,
    pub mean: Vec<f64>,
    pub log_var: Vec<f64>,
}

/// `mean_j L(mu + sigma * e_j) + beta * KL` at the given draws.
pub fn lagrangian_estimate<O: Objective + ?Sized>(
    obj: &O,
    q: &GaussianPosterior,
    beta: f64,
    prior: &IsotropicPrior,
    draws: &NoiseDraws,
) -> f64 {
    let n = draws.len().max(1) as f64;
    let losses = par::map_indexed(draws.len(), |j| {
        let mut w = vec![0.0; q.len()];
        q.sample_with(&draws.eps[j], &mut w);
        obj.loss(&w)
    });
    losses.iter().sum::<f64>() / n + beta * kl_gaussian(q, prior)
}

pub fn lagrangian_gradient<O: Objective + ?Sized>(
    obj: &O,
    q: &GaussianPosterior,
    beta: f64,
    prior: &IsotropicPrior,
    draws: &NoiseDraws,
) -> LagrangianGradient {
    let k = q.len();
    let sigma: Vec<f64> = q.log_var.iter().map(|v| (0.5 * v).exp()).collect();
    let per_draw = par::map_indexed(draws.len(), |j| {
        let e = &draws.eps[j];
        let mut w = vec![0.0; k];
        q.sample_with(e, &mut w);
        let mut g = vec![0.0; k];
        let loss = obj.loss_and_grad(&w, &mut g);
        (loss, g)
    });
    let n = draws.len().max(1) as f64;
    let mut g_mean = vec![0.0; k];
    let mut g_lv = vec![0.0; k];
    let mut loss = 0.0;
    for (j, (l, g)) in per_draw.into_iter().enumerate() {
        loss += l;
        let e = &draws.eps[j];
        for i in 0..k {
            g_mean[i] += g[i];
            g_lv[i] += g[i] * e[i] * 0.5 * sigma[i];
        }
    }
    loss /= n;
    let inv = 1.0 / prior.variance();
    let lv = prior.log_variance();
    for i in 0..k {
        g_mean[i] = g_mean[i] / n + beta * q.mean[i] * inv;
        g_lv[i] = g_lv[i] / n + beta * 0.5 * (q.log_var[i] - lv).exp_m1();
    }
    let kl = kl_gaussian(q, prior);
    LagrangianGradient {
        value: loss + beta * kl,
        expected_loss: loss,
        kl,
        mean: g_mean,
        log_var: g_lv,
    }
}

/// Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Plain Monte-Carlo estimate of `E_Q[L(w)]`. Draw `j` uses its own derived
/// seed, so the estimate is independent of evaluation order.
pub fn expected_loss_estimate<O: Objective + ?Sized>(
    obj: &O,
    q: &GaussianPosterior,
    mc_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    mc_estimate(q, mc_samples, seed, |w| obj.loss(w))
}

/// Monte-Carlo mean of `f(w)` for `w ~ Q`.
pub fn mc_estimate<F>(q: &GaussianPosterior, mc_samples: usize, seed: u64, f: F) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    if mc_samples == 0 {
        return Err(Error::param("need at least one Monte-Carlo sample"));
    }
    let losses = par::map_indexed(mc_samples, |j| {
        let mut rng = stream_rng(derive_seed(seed, j as u64), stream::MONTE_CARLO);
        let eps: Vec<f64> = (0..q.len()).map(|_| rng.sample(StandardNormal)).collect();
        let mut w = vec![0.0; q.len()];
        q.sample_with(&eps, &mut w);
        f(&w)
    });
    let n = mc_samples as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let var = if mc_samples > 1 {
        losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        samples: mc_samples,
    })
}

fn network_objective(q: &GaussianPosterior, d: &Dataset) -> Result<NetworkObjective> {
    let arch = q
        .arch
        .as_ref()
        .ok_or_else(|| Error::param("posterior has no architecture"))?;
    NetworkObjective::new(arch, d)
}

/// `E_{w~Q}[L_D(w)]` in NATS.
pub fn expected_loss(q: &GaussianPosterior, d: &Dataset, mc_samples: usize, seed: u64) -> Result<f64> {
    let obj = network_objective(q, d)?;
    Ok(expected_loss_estimate(&obj, q, mc_samples, seed)?.mean)
}

/// `E_Q[L_D] + beta * KL(Q || P)`.
pub fn lagrangian(
    q: &GaussianPosterior,
    d: &Dataset,
    beta: f64,
    prior: &IsotropicPrior,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    check_beta(beta)?;
    Ok(expected_loss(q, d, mc_samples, seed)? + beta * kl_gaussian(q, prior))
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::param(format!("beta must be finite and nonnegative, got {beta}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariationalConfig {
    pub learning_rate: f64,
    pub steps: usize,
    /// Draws per gradient step.
    pub mc_samples: usize,
    /// Draws used for reported expected losses.
    pub report_mc_samples: usize,
    /// The learning rate decays geometrically to this fraction by the last step.
    pub final_lr_fraction: f64,
    /// Log-variance of a freshly initialized posterior.
    pub init_log_var: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        VariationalConfig {
            learning_rate: 0.01,
            steps: 1000,
            mc_samples: 8,
            report_mc_samples: 1024,
            final_lr_fraction: 0.01,
            init_log_var: -6.0,
            optimizer: Optimizer::Adam,
            seed: 0,
        }
    }
}

impl VariationalConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning rate must be positive"));
        }
        if self.mc_samples == 0 || self.report_mc_samples == 0 {
            return Err(Error::param("Monte-Carlo sample counts must be positive"));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::param("final_lr_fraction must lie in (0, 1]"));
        }
        if !self.init_log_var.is_finite() {
            return Err(Error::param("init_log_var must be finite"));
        }
        Ok(())
    }

    fn rate_at(&self, step: usize) -> f64 {
        if self.steps <= 1 {
            return self.learning_rate;
        }
        let frac = step as f64 / (self.steps - 1) as f64;
        self.learning_rate * self.final_lr_fraction.powf(frac)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorFit {
    pub posterior: GaussianPosterior,
    /// `(expected_loss, kl)` per step, the loss estimated from that step's draws.
    pub trace: Vec<(f64, f64)>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, x: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..x.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            x[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Minimizes the Lagrangian over `(mean, log_var)` starting from `init`.
pub fn optimize_objective<O: Objective + ?Sized>(
    obj: &O,
    beta: f64,
    prior: &IsotropicPrior,
    cfg: &VariationalConfig,
    init: GaussianPosterior,
) -> Result<PosteriorFit> {
    check_beta(beta)?;
    cfg.validate()?;
    if init.len() != obj.dim() {
        return Err(Error::param(format!(
            "posterior has {} entries, objective expects {}",
            init.len(),
            obj.dim()
        )));
    }
    let k = init.len();
    let mut q = init;
    let mut last_finite = q.clone();
    let mut rng = stream_rng(cfg.seed, stream::MONTE_CARLO);
    let mut opt_mean = Adam::new(k);
    let mut opt_lv = Adam::new(k);
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let draws = NoiseDraws::balanced(k, cfg.mc_samples, &mut rng);
        let g = lagrangian_gradient(obj, &q, beta, prior, &draws);
        let finite = g.value.is_finite()
            && g.mean.iter().chain(&g.log_var).all(|v| v.is_finite());
        if !finite {
            return Err(Error::PosteriorDiverged {
                step,
                last_finite: Box::new(last_finite),
            });
        }
        trace.push((g.expected_loss, g.kl));
        let lr = cfg.rate_at(step);
        match cfg.optimizer {
            Optimizer::Adam => {
                opt_mean.step(&mut q.mean, &g.mean, lr);
                opt_lv.step(&mut q.log_var, &g.log_var, lr);
            }
            Optimizer::Sgd => {
                for i in 0..k {
                    q.mean[i] -= lr * g.mean[i];
                    q.log_var[i] -= lr * g.log_var[i];
                }
            }
        }
        if q.mean.iter().chain(&q.log_var).any(|v| !v.is_finite()) {
            return Err(Error::PosteriorDiverged {
                step,
                last_finite: Box::new(last_finite),
            });
        }
        last_finite.mean.copy_from_slice(&q.mean);
        last_finite.log_var.copy_from_slice(&q.log_var);
    }
    Ok(PosteriorFit {
        posterior: q,
        trace,
    })
}

/// Fits a posterior for a network on `d`. Without `init` the mean starts at
/// a Glorot draw seeded by `cfg.seed` and the log-variance at `cfg.init_log_var`.
pub fn optimize_posterior(
    d: &Dataset,
    arch: &Architecture,
    beta: f64,
    prior: &IsotropicPrior,
    cfg: &VariationalConfig,
    init: Option<&GaussianPosterior>,
) -> Result<PosteriorFit> {
    let obj = NetworkObjective::new(arch, d)?;
    let init = match init {
        Some(q) => {
            if q.arch() != Some(arch) {
                return Err(Error::param("initial posterior has a different architecture"));
            }
            q.clone()
        }
        None => GaussianPosterior::around(&MlpParams::init(arch, cfg.seed), cfg.init_log_var)?,
    };
    optimize_objective(&obj, beta, prior, cfg, init)
}

/// `Sigma*_ii = (beta/2) / (H_ii + beta / (2 lambda^2))`. An infinite `lambda`
/// gives the flat-prior limit `beta / (2 H_ii)`.
pub fn closed_form_sigma(h_diag: &[f64], beta: f64, lambda: f64) -> Result<Vec<f64>> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta must be positive"));
    }
    if !(lambda > 0.0) {
        return Err(Error::param("prior scale must be positive"));
    }
    if h_diag.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
        return Err(Error::param("curvatures must be finite and nonnegative"));
    }
    let shrink = beta / (2.0 * lambda * lambda);
    Ok(h_diag.iter().map(|h| 0.5 * beta / (h + shrink)).collect())
}

/// Diagonal of the Fisher information, averaged over samples.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherDiagonal {
    pub entries: Vec<f64>,
    pub n: usize,
}

impl FisherDiagonal {
    pub fn trace(&self) -> f64 {
        self.entries.iter().sum()
    }
}

/// `F_jj = mean_i E_{y~p_w(.|x_i)} [(d ln p_w(y|x_i) / dw_j)^2]`, with the
/// label expectation computed exactly.
pub fn fisher_diagonal(p: &MlpParams, d: &Dataset) -> Result<FisherDiagonal> {
    let obj = NetworkObjective::new(p.arch(), d)?;
    let f = &obj.features;
    let arch = p.arch();
    let k = p.len();
    let n = f.len();
    let sums = par::map_reduce(
        n,
        16,
        Vec::new,
        |range| {
            let mut acc = vec![0.0; k];
            let mut g = vec![0.0; k];
            let mut ws = Workspace::new(arch);
            for i in range {
                accumulate_fisher_exact(arch, p.values(), f.input(i), 1.0, &mut acc, &mut g, &mut ws);
            }
            acc
        },
        |a, b| {
            if a.is_empty() {
                return b;
            }
            a.into_iter().zip(b).map(|(x, y)| x + y).collect()
        },
    );
    let entries = if n == 0 {
        vec![0.0; k]
    } else {
        sums.into_iter().map(|s| s / n as f64).collect()
    };
    Ok(FisherDiagonal { entries, n })
}

/// `0.5 * sum_i ln max(F_ii, floor) + 0.5 * k * ln lambda^2`.
pub fn fisher_information_nats(f: &FisherDiagonal, lambda: f64, floor: f64) -> f64 {
    let k = f.entries.len() as f64;
    0.5 * f.entries.iter().map(|v| v.max(floor).ln()).sum::<f64>() + 0.5 * k * (lambda * lambda).ln()
}

pub fn fim_trace(p: &MlpParams, d: &Dataset) -> Result<f64> {
    Ok(fisher_diagonal(p, d)?.trace())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub beta: f64,
    pub expected_loss: f64,
    pub kl: f64,
    pub loss_per_sample: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    /// In schedule order, so `beta` decreases.
    pub points: Vec<SweepPoint>,
    pub num_samples: usize,
    pub num_labels: usize,
}

impl Sweep {
    /// The sweep as a curve over increasing `beta`.
    pub fn to_curve(&self) -> Result<Curve> {
        Curve::new(
            self.points
                .iter()
                .rev()
                .map(|p| CurvePoint {
                    x: p.beta,
                    loss: p.expected_loss,
                    complexity: p.kl,
                })
                .collect(),
        )
    }

    /// Implied structure-function points `(t = KL, loss)`.
    pub fn tradeoff(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.kl, p.expected_loss)).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "beta,expected_loss_nats,kl_nats,loss_per_sample_nats")?;
        for p in &self.points {
            writeln!(w, "{},{},{},{}", p.beta, p.expected_loss, p.kl, p.loss_per_sample)?;
        }
        Ok(())
    }

    /// The `beta` at which the per-sample loss first drops below
    /// `0.5 * ln K` while `beta` decreases, interpolated in `ln beta`.
    /// `None` if it never drops; the first `beta` if it starts below.
    pub fn transition_beta(&self) -> Option<f64> {
        let level = 0.5 * (self.num_labels as f64).ln();
        let i = self.points.iter().position(|p| p.loss_per_sample < level)?;
        if i == 0 {
            return Some(self.points[0].beta);
        }
        let (a, b) = (&self.points[i - 1], &self.points[i]);
        let frac = (a.loss_per_sample - level) / (a.loss_per_sample - b.loss_per_sample);
        let lb = a.beta.ln() + frac * (b.beta.ln() - a.beta.ln());
        Some(lb.exp())
    }
}

/// Annealed sweep over a strictly decreasing `betas`. The first point starts
/// from the prior and each later point is warm-started from the previous
/// optimum. Expected losses are reported with `cfg.report_mc_samples` draws.
pub fn structure_sweep(
    d: &Dataset,
    arch: &Architecture,
    betas: &[f64],
    prior: &IsotropicPrior,
    cfg: &VariationalConfig,
) -> Result<Sweep> {
    if betas.is_empty() {
        return Err(Error::param("beta schedule is empty"));
    }
    if betas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::param("beta schedule must be strictly decreasing"));
    }
    let obj = NetworkObjective::new(arch, d)?;
    let mut q = GaussianPosterior::prior_matched(arch, prior);
    let mut points = Vec::with_capacity(betas.len());
    for (i, &beta) in betas.iter().enumerate() {
        let step_cfg = VariationalConfig {
            seed: derive_seed(cfg.seed, i as u64),
            ..cfg.clone()
        };
        q = optimize_objective(&obj, beta, prior, &step_cfg, q)?.posterior;
        let loss = expected_loss_estimate(&obj, &q, cfg.report_mc_samples, derive_seed(cfg.seed, 1 << 32 | i as u64))?;
        let n = d.len().max(1) as f64;
        points.push(SweepPoint {
            beta,
            expected_loss: loss.mean,
            kl: kl_gaussian(&q, prior),
            loss_per_sample: loss.mean / n,
        });
    }
    Ok(Sweep {
        points,
        num_samples: d.len(),
        num_labels: d.num_labels(),
    })
}
