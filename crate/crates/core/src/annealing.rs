//! Local learning with annealing over a finite set of candidate posteriors.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::rng::{derive_seed, stream, stream_rng};
use crate::variational::{
    expected_loss_estimate, kl_gaussian, GaussianPosterior, IsotropicPrior, Objective,
};

const METRIC_TOL: f64 = 1e-9;

/// Candidate statistics with their loss, complexity and a metric.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorGrid {
    loss: Vec<f64>,
    kl: Vec<f64>,
    /// Row-major `n x n`.
    metric: Vec<f64>,
}

impl PosteriorGrid {
    pub fn new(loss: Vec<f64>, kl: Vec<f64>, metric: Vec<f64>) -> Result<Self> {
        let n = loss.len();
        if n == 0 {
            return Err(Error::param("grid must have at least one node"));
        }
        if kl.len() != n || metric.len() != n * n {
            return Err(Error::param("grid arrays have inconsistent sizes"));
        }
        if loss.iter().chain(&kl).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("node values must be finite".into()));
        }
        let d = |i: usize, j: usize| metric[i * n + j];
        for i in 0..n {
            if d(i, i) != 0.0 {
                return Err(Error::InvalidInput(format!("metric diagonal at node {i} is not zero")));
            }
            for j in 0..n {
                let v = d(i, j);
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidInput(format!("metric entry ({i},{j}) is invalid")));
                }
                if (v - d(j, i)).abs() > METRIC_TOL {
                    return Err(Error::InvalidInput(format!("metric is not symmetric at ({i},{j})")));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if d(i, k) > d(i, j) + d(j, k) + METRIC_TOL {
                        return Err(Error::InvalidInput(format!(
                            "triangle inequality fails for ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        Ok(PosteriorGrid { loss, kl, metric })
    }

    /// Euclidean metric over the given coordinates.
    pub fn from_points(loss: Vec<f64>, kl: Vec<f64>, coords: &[Vec<f64>]) -> Result<Self> {
        let n = coords.len();
        let mut metric = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let v = coords[i]
                    .iter()
                    .zip(&coords[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                metric[i * n + j] = v;
                metric[j * n + i] = v;
            }
        }
        PosteriorGrid::new(loss, kl, metric)
    }

    /// Gaussian posteriors evaluated on an objective; the metric is Euclidean
    /// over `(mean, log sigma)`.
    pub fn from_gaussians<O: Objective + ?Sized>(
        obj: &O,
        prior: &IsotropicPrior,
        posteriors: &[GaussianPosterior],
        mc_samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let losses = par::map_indexed(posteriors.len(), |i| {
            expected_loss_estimate(obj, &posteriors[i], mc_samples, derive_seed(seed, i as u64)).map(|e| e.mean)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let kl = posteriors.iter().map(|q| kl_gaussian(q, prior)).collect();
        let coords: Vec<Vec<f64>> = posteriors
            .iter()
            .map(|q| q.mean().iter().copied().chain(q.log_var().iter().map(|v| 0.5 * v)).collect())
            .collect();
        PosteriorGrid::from_points(losses, kl, &coords)
    }

    pub fn len(&self) -> usize {
        self.loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loss.is_empty()
    }

    pub fn loss(&self, i: usize) -> f64 {
        self.loss[i]
    }

    pub fn kl(&self, i: usize) -> f64 {
        self.kl[i]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.metric[i * self.len() + j]
    }

    pub fn lagrangian(&self, i: usize, beta: f64) -> f64 {
        self.loss[i] + beta * self.kl[i]
    }

    pub fn diameter(&self) -> f64 {
        self.metric.iter().copied().fold(0.0, f64::max)
    }

    fn check_node(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::param(format!("node {i} is not in a grid of {} nodes", self.len())));
        }
        Ok(())
    }

    /// Minimum Lagrangian over the grid.
    pub fn min_lagrangian(&self, beta: f64) -> f64 {
        (0..self.len()).map(|i| self.lagrangian(i, beta)).fold(f64::INFINITY, f64::min)
    }

    /// True when node `i` attains the global minimum up to rounding.
    pub fn is_global_minimizer(&self, i: usize, beta: f64) -> bool {
        let m = self.min_lagrangian(beta);
        self.lagrangian(i, beta) <= m + 1e-12 * m.abs().max(1.0)
    }

    pub fn global_minimizers(&self, beta: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_global_minimizer(i, beta)).collect()
    }

    /// Writes `node_id,loss_nats,kl_nats`.
    pub fn write_nodes<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# taskinfo-grid v1")?;
        writeln!(w, "node_id,loss_nats,kl_nats")?;
        for i in 0..self.len() {
            writeln!(w, "{i},{},{}", self.loss[i], self.kl[i])?;
        }
        Ok(())
    }

    /// Writes the dense metric, one row per line.
    pub fn write_metric<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# taskinfo-metric v1, n={}", self.len())?;
        for row in self.metric.chunks(self.len()) {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn read<R1: BufRead, R2: BufRead>(nodes: R1, metric: R2) -> Result<Self> {
        const NODES: &str = "grid";
        const METRIC: &str = "metric";
        let mut loss = Vec::new();
        let mut kl = Vec::new();
        let mut header = 0;
        for (i, line) in nodes.lines().enumerate() {
            let line = line?;
            let n = i + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            match header {
                0 => {
                    if t != "# taskinfo-grid v1" {
                        return Err(Error::parse(NODES, n, "expected `# taskinfo-grid v1`"));
                    }
                    header = 1;
                    continue;
                }
                _ if t.starts_with('#') => continue,
                1 => {
                    if t != "node_id,loss_nats,kl_nats" {
                        return Err(Error::parse(NODES, n, "expected column header `node_id,loss_nats,kl_nats`"));
                    }
                    header = 2;
                    continue;
                }
                _ => {}
            }
            let fields: Vec<&str> = t.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::parse(NODES, n, format!("expected 3 fields, found {}", fields.len())));
            }
            let id: usize = fields[0]
                .trim()
                .parse()
                .map_err(|_| Error::parse(NODES, n, format!("bad node id `{}`", fields[0])))?;
            if id != loss.len() {
                return Err(Error::parse(NODES, n, format!("node ids must be consecutive, expected {}", loss.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.trim()
                    .parse()
                    .map_err(|_| Error::parse(NODES, n, format!("bad number `{s}`")))
            };
            loss.push(num(fields[1])?);
            kl.push(num(fields[2])?);
        }
        if header < 2 {
            return Err(Error::parse(NODES, 1, "missing grid header"));
        }
        let size = loss.len();
        let mut values = Vec::with_capacity(size * size);
        let mut seen_header = false;
        let mut rows = 0;
        for (i, line) in metric.lines().enumerate() {
            let line = line?;
            let n = i + 1;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if !seen_header {
                if !t.starts_with("# taskinfo-metric v1") {
                    return Err(Error::parse(METRIC, n, "expected `# taskinfo-metric v1`"));
                }
                seen_header = true;
                continue;
            }
            if t.starts_with('#') {
                continue;
            }
            let row = t
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse(METRIC, n, format!("bad number `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != size {
                return Err(Error::parse(METRIC, n, format!("expected {size} entries, found {}", row.len())));
            }
            values.extend(row);
            rows += 1;
        }
        if !seen_header || rows != size {
            return Err(Error::parse(METRIC, rows + 1, format!("expected {size} metric rows, found {rows}")));
        }
        PosteriorGrid::new(loss, kl, values)
    }
}

/// `beta_0 >= beta_1 >= ... >= beta_n` with step radius `epsilon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleFields")]
pub struct AnnealSchedule {
    betas: Vec<f64>,
    epsilon: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFields {
    betas: Vec<f64>,
    epsilon: f64,
}

impl TryFrom<ScheduleFields> for AnnealSchedule {
    type Error = Error;
    fn try_from(f: ScheduleFields) -> Result<Self> {
        AnnealSchedule::new(f.betas, f.epsilon)
    }
}

impl AnnealSchedule {
    pub fn new(betas: Vec<f64>, epsilon: f64) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::param("schedule needs at least the final beta"));
        }
        if betas.iter().any(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(Error::param("schedule betas must be finite and nonnegative"));
        }
        if betas.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::param("schedule must be nonincreasing"));
        }
        if !(epsilon > 0.0) {
            return Err(Error::param("epsilon must be positive"));
        }
        Ok(AnnealSchedule { betas, epsilon })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn final_beta(&self) -> f64 {
        *self.betas.last().unwrap()
    }
}

/// Lagrangian minimizer within the closed `epsilon` ball around `q0`; ties
/// go to the smaller KL and then the smaller index.
pub fn epsilon_local_step(g: &PosteriorGrid, q0: usize, beta: f64, epsilon: f64) -> Result<usize> {
    g.check_node(q0)?;
    let mut best = q0;
    for q in 0..g.len() {
        if g.distance(q0, q) > epsilon {
            continue;
        }
        let key = |i: usize| (g.lagrangian(i, beta), g.kl(i), i);
        let (a, b) = (key(q), key(best));
        if a.0 < b.0 || (a.0 == b.0 && (a.1 < b.1 || (a.1 == b.1 && a.2 < b.2))) {
            best = q;
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryStep {
    pub step: usize,
    pub beta: f64,
    pub node: usize,
    pub lagrangian: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn final_node(&self) -> usize {
        self.steps.last().unwrap().node
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "step,beta,node_id,lagrangian_nats")?;
        for s in &self.steps {
            writeln!(w, "{},{},{},{}", s.step, s.beta, s.node, s.lagrangian)?;
        }
        Ok(())
    }
}

/// Starting from `q_init` at `beta_0`, takes one local step at each
/// schedule value. Step 0 of the trajectory is the starting node.
pub fn anneal(g: &PosteriorGrid, s: &AnnealSchedule, q_init: usize) -> Result<(usize, Trajectory)> {
    g.check_node(q_init)?;
    let b0 = s.betas[0];
    let mut steps = vec![TrajectoryStep {
        step: 0,
        beta: b0,
        node: q_init,
        lagrangian: g.lagrangian(q_init, b0),
    }];
    let mut q = q_init;
    for (i, &beta) in s.betas.iter().enumerate() {
        q = epsilon_local_step(g, q, beta, s.epsilon)?;
        steps.push(TrajectoryStep {
            step: i + 1,
            beta,
            node: q,
            lagrangian: g.lagrangian(q, beta),
        });
    }
    Ok((q, Trajectory { steps }))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Connectivity {
    /// A chain of global minimizers, one per schedule value, with
    /// consecutive gaps at most epsilon.
    Connected { witness: Vec<usize> },
    /// The transition from `betas[index]` to `betas[index + 1]` has a global
    /// minimizer with no global minimizer of the next level within epsilon.
    Disconnected { index: usize, stranded: usize },
}

impl Connectivity {
    pub fn is_connected(&self) -> bool {
        matches!(self, Connectivity::Connected { .. })
    }
}

pub fn check_epsilon_connected(g: &PosteriorGrid, s: &AnnealSchedule) -> Connectivity {
    let mins: Vec<Vec<usize>> = s.betas.iter().map(|&b| g.global_minimizers(b)).collect();
    for i in 0..mins.len().saturating_sub(1) {
        for &q in &mins[i] {
            if !mins[i + 1].iter().any(|&p| g.distance(q, p) <= s.epsilon) {
                return Connectivity::Disconnected { index: i, stranded: q };
            }
        }
    }
    let mut witness = vec![mins[0][0]];
    for next in &mins[1..] {
        let cur = *witness.last().unwrap();
        let step = next
            .iter()
            .copied()
            .filter(|&p| g.distance(cur, p) <= s.epsilon)
            .min_by(|&a, &b| g.distance(cur, a).total_cmp(&g.distance(cur, b)).then(a.cmp(&b)))
            .expect("checked above");
        witness.push(step);
    }
    Connectivity::Connected { witness }
}

/// Exhaustive search over every local learner that moves within epsilon
/// without raising the current Lagrangian. True if some such path from
/// `start` ends at a global minimizer of the final level.
pub fn reachable_global_minimizer(g: &PosteriorGrid, s: &AnnealSchedule, start: usize) -> Result<bool> {
    g.check_node(start)?;
    let mut frontier = vec![false; g.len()];
    frontier[start] = true;
    for &beta in &s.betas {
        let mut next = vec![false; g.len()];
        for p in (0..g.len()).filter(|&p| frontier[p]) {
            for (q, reach) in next.iter_mut().enumerate() {
                if g.distance(p, q) <= s.epsilon && g.lagrangian(q, beta) <= g.lagrangian(p, beta) {
                    *reach = true;
                }
            }
        }
        frontier = next;
    }
    let b = s.final_beta();
    Ok((0..g.len()).any(|q| frontier[q] && g.is_global_minimizer(q, b)))
}

/// `C_beta(qf) - C_beta(q0)`.
pub fn effective_potential_delta(g: &PosteriorGrid, q0: usize, qf: usize, beta: f64) -> Result<f64> {
    g.check_node(q0)?;
    g.check_node(qf)?;
    Ok(g.lagrangian(qf, beta) - g.lagrangian(q0, beta))
}

/// Normalized static weights `exp(-delta / (2T))` over all target nodes.
pub fn static_transition_weights(g: &PosteriorGrid, q0: usize, beta: f64, temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::param("temperature must be positive"));
    }
    let deltas = (0..g.len())
        .map(|q| effective_potential_delta(g, q0, q, beta))
        .collect::<Result<Vec<_>>>()?;
    let logits: Vec<f64> = deltas.iter().map(|d| -d / (2.0 * temperature)).collect();
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / z).collect())
}

/// `KL(q || p)` between distributions over nodes.
pub fn node_kl(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| if *b > 0.0 { a * (a / b).ln() } else { f64::INFINITY })
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct InformationEstimate {
    /// `E_D[KL(Q(.|D) || Q_bar)]` in NATS.
    pub information: f64,
    /// `Q_bar`, the trial average of the trained distributions.
    pub marginal: Vec<f64>,
    /// Every trained distribution, in trial order.
    pub posteriors: Vec<Vec<f64>>,
}

impl InformationEstimate {
    /// Mean `KL(Q(.|D) || prior)` over the trials.
    pub fn mean_kl_to(&self, prior: &[f64]) -> f64 {
        self.posteriors.iter().map(|q| node_kl(q, prior)).sum::<f64>() / self.posteriors.len() as f64
    }

    /// True when the marginal does at least as well as every alternative.
    pub fn marginal_is_optimal(&self, alternatives: &[Vec<f64>]) -> bool {
        let own = self.mean_kl_to(&self.marginal);
        alternatives.iter().all(|p| own <= self.mean_kl_to(p) + 1e-12)
    }
}

/// Estimates the mutual information between a trained node and the dataset.
/// `sampler(seed)` draws a dataset and `trainer` maps it to a distribution
/// over the nodes.
pub fn shannon_information_estimate<D, S, T>(
    sampler: S,
    trainer: T,
    trials: usize,
    seed: u64,
) -> Result<InformationEstimate>
where
    S: Fn(u64) -> Result<D> + Sync,
    T: Fn(&D) -> Result<Vec<f64>> + Sync,
    D: Send,
{
    if trials == 0 {
        return Err(Error::EmptyTrialSet);
    }
    let posteriors = par::map_indexed(trials, |t| {
        let d = sampler(derive_seed(seed, t as u64))?;
        let q = trainer(&d)?;
        let total: f64 = q.iter().sum();
        if q.iter().any(|v| !(*v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("trainer output is not a distribution".into()));
        }
        Ok(q)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let n = posteriors[0].len();
    if posteriors.iter().any(|q| q.len() != n) {
        return Err(Error::InvalidInput("trainer outputs have different lengths".into()));
    }
    let mut marginal = vec![0.0; n];
    for q in &posteriors {
        for (m, v) in marginal.iter_mut().zip(q) {
            *m += v / trials as f64;
        }
    }
    let mut est = InformationEstimate {
        information: 0.0,
        marginal,
        posteriors,
    };
    est.information = est.mean_kl_to(&est.marginal);
    Ok(est)
}

/// Random distributions over `n` nodes, half of them mixtures with `center`.
pub fn alternative_priors(center: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, stream::GRID);
    (0..count)
        .map(|i| {
            let raw: Vec<f64> = (0..center.len()).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
            let z: f64 = raw.iter().sum();
            let mix = if i % 2 == 0 { 0.0 } else { rng.random::<f64>() };
            raw.iter()
                .zip(center)
                .map(|(r, c)| mix * c + (1.0 - mix) * r / z)
                .collect()
        })
        .collect()
}

/// A randomized grid whose schedule is epsilon-connected by construction,
/// together with the schedule and a global minimizer at `beta_0`.
///
/// Chain nodes lie on a convex loss/KL frontier so that each schedule value
/// has exactly one chain node as its unique global minimizer; consecutive
/// chain nodes sit less than epsilon apart in the plane. Distractor nodes
/// lie strictly above the frontier and never minimize.
pub fn connected_instance(seed: u64, chain: usize, distractors: usize) -> Result<(PosteriorGrid, AnnealSchedule, usize)> {
    if chain == 0 {
        return Err(Error::param("chain must have at least one node"));
    }
    let mut rng = stream_rng(seed, stream::GRID);
    let epsilon = 1.0;
    // frontier: KL increases, loss decreases with shrinking slopes
    let mut kls = vec![0.0];
    let mut losses = vec![100.0];
    let mut slopes = Vec::new();
    let mut slope = 8.0 + 4.0 * rng.random::<f64>();
    for _ in 1..chain {
        let dk = 0.5 + rng.random::<f64>();
        kls.push(kls.last().unwrap() + dk);
        losses.push(losses.last().unwrap() - slope * dk);
        slopes.push(slope);
        slope *= 0.4 + 0.4 * rng.random::<f64>();
    }
    // node j is the unique minimizer for beta in (slopes[j], slopes[j-1])
    let betas: Vec<f64> = (0..chain)
        .map(|j| {
            let hi = if j == 0 { slopes.first().map_or(2.0, |s| 2.0 * s) } else { slopes[j - 1] };
            let lo = if j + 1 < chain { slopes[j] } else { hi * 0.25 };
            (lo * hi).sqrt()
        })
        .collect();
    let mut coords = vec![vec![0.0, 0.0]];
    for _ in 1..chain {
        let last = coords.last().unwrap().clone();
        let angle = rng.random::<f64>() * std::f64::consts::TAU;
        let r = epsilon * (0.3 + 0.6 * rng.random::<f64>());
        coords.push(vec![last[0] + r * angle.cos(), last[1] + r * angle.sin()]);
    }
    let extent = chain as f64 * epsilon;
    let chain_min: Vec<f64> = betas
        .iter()
        .map(|b| (0..chain).map(|c| losses[c] + b * kls[c]).fold(f64::INFINITY, f64::min))
        .collect();
    for _ in 0..distractors {
        let j = rng.random_range(0..chain);
        let k = (kls[j] + rng.random::<f64>() * 2.0 - 0.5).max(0.0);
        // strictly above the chain optimum at every schedule value
        let floor = betas
            .iter()
            .zip(&chain_min)
            .map(|(b, m)| m - b * k)
            .fold(f64::NEG_INFINITY, f64::max);
        kls.push(k);
        losses.push(floor + 1.0 + 5.0 * rng.random::<f64>());
        coords.push(vec![
            (rng.random::<f64>() - 0.5) * 2.0 * extent,
            (rng.random::<f64>() - 0.5) * 2.0 * extent,
        ]);
    }
    // shuffle node order so the chain is not simply 0..chain
    let n = kls.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut l2 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut c2 = vec![Vec::new(); n];
    for (old, &new) in perm.iter().enumerate() {
        l2[new] = losses[old];
        k2[new] = kls[old];
        c2[new] = coords[old].clone();
    }
    let grid = PosteriorGrid::from_points(l2, k2, &c2)?;
    let schedule = AnnealSchedule::new(betas, epsilon)?;
    Ok((grid, schedule, perm[0]))
}

/// Three nodes where the low-beta optimum is far from the high-beta basin.
pub fn disconnected_instance() -> (PosteriorGrid, AnnealSchedule, usize) {
    let grid = PosteriorGrid::from_points(
        vec![10.0, 8.0, 2.0],
        vec![0.0, 1.0, 2.0],
        &[vec![0.0], vec![0.5], vec![10.0]],
    )
    .expect("valid construction");
    let schedule = AnnealSchedule::new(vec![5.0, 0.5], 1.0).expect("valid schedule");
    (grid, schedule, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_grid(seed: u64, n: usize) -> PosteriorGrid {
        let mut rng = stream_rng(seed, stream::TRIAL);
        let loss = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
        let kl = (0..n).map(|_| rng.random::<f64>() * 5.0).collect();
        let coords: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
        PosteriorGrid::from_points(loss, kl, &coords).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(PosteriorGrid::new(vec![1.0, 2.0], vec![0.0, 0.0], vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(PosteriorGrid::new(vec![1.0, 2.0], vec![0.0, 0.0], vec![0.0, 1.0, 1.0, 0.1]).is_err());
        let bad_triangle = vec![0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0];
        assert!(PosteriorGrid::new(vec![0.0; 3], vec![0.0; 3], bad_triangle).is_err());
        assert!(PosteriorGrid::new(vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn local_step_extremes() {
        let g = random_grid(1, 20);
        let beta = 0.7;
        let global = epsilon_local_step(&g, 3, beta, g.diameter()).unwrap();
        assert!(g.is_global_minimizer(global, beta));
        let tiny = (0..20)
            .flat_map(|i| (0..20).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| g.distance(i, j))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(epsilon_local_step(&g, 3, beta, tiny * 0.5).unwrap(), 3);
        assert!(epsilon_local_step(&g, 20, beta, 1.0).is_err());
    }

    #[test]
    fn local_step_matches_ball_scan() {
        for seed in 0..10 {
            let g = random_grid(seed, 20);
            for q0 in 0..20 {
                let eps = 0.3;
                let ball: Vec<usize> = (0..20).filter(|&q| g.distance(q0, q) <= eps).collect();
                let best = ball
                    .iter()
                    .copied()
                    .min_by(|&a, &b| {
                        g.lagrangian(a, 1.3)
                            .total_cmp(&g.lagrangian(b, 1.3))
                            .then(g.kl(a).total_cmp(&g.kl(b)))
                            .then(a.cmp(&b))
                    })
                    .unwrap();
                assert_eq!(epsilon_local_step(&g, q0, 1.3, eps).unwrap(), best);
            }
        }
    }

    #[test]
    fn constant_schedule_with_large_radius_finds_global() {
        let g = random_grid(3, 15);
        let s = AnnealSchedule::new(vec![0.4], g.diameter()).unwrap();
        let (q, traj) = anneal(&g, &s, 0).unwrap();
        assert!(g.is_global_minimizer(q, 0.4));
        assert_eq!(traj.steps.len(), 2);
        assert_eq!(traj.final_node(), q);
    }

    #[test]
    fn single_node_is_connected() {
        let g = PosteriorGrid::new(vec![1.0], vec![0.5], vec![0.0]).unwrap();
        let s = AnnealSchedule::new(vec![3.0, 1.0, 0.1], 0.1).unwrap();
        assert_eq!(check_epsilon_connected(&g, &s), Connectivity::Connected { witness: vec![0, 0, 0] });
    }

    #[test]
    fn disconnected_instance_strands_the_learner() {
        let (g, s, start) = disconnected_instance();
        assert!(g.is_global_minimizer(start, s.betas()[0]));
        let (q, _) = anneal(&g, &s, start).unwrap();
        assert!(!g.is_global_minimizer(q, s.final_beta()));
        assert!(!reachable_global_minimizer(&g, &s, start).unwrap());
        match check_epsilon_connected(&g, &s) {
            Connectivity::Disconnected { index, .. } => assert_eq!(index, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(AnnealSchedule::new(vec![1.0, 2.0], 1.0).is_err());
        assert!(AnnealSchedule::new(vec![], 1.0).is_err());
        assert!(AnnealSchedule::new(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn potential_and_weights() {
        let g = random_grid(5, 10);
        assert_eq!(effective_potential_delta(&g, 4, 4, 2.0).unwrap(), 0.0);
        let w = static_transition_weights(&g, 2, 0.5, 0.8).unwrap();
        let raw: Vec<f64> = (0..10)
            .map(|q| (-(g.lagrangian(q, 0.5) - g.lagrangian(2, 0.5)) / 1.6).exp())
            .collect();
        let z: f64 = raw.iter().sum();
        for (a, b) in w.iter().zip(&raw) {
            assert!((a - b / z).abs() < 1e-12);
        }
        let mut order: Vec<usize> = (0..10).collect();
        order.sort_by(|&a, &b| g.lagrangian(a, 0.5).total_cmp(&g.lagrangian(b, 0.5)));
        let deltas: Vec<f64> = order.iter().map(|&q| effective_potential_delta(&g, 2, q, 0.5).unwrap()).collect();
        assert!(deltas.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn grid_files_round_trip_and_report_lines() {
        let g = random_grid(8, 6);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        g.write_nodes(&mut a).unwrap();
        g.write_metric(&mut b).unwrap();
        assert_eq!(PosteriorGrid::read(a.as_slice(), b.as_slice()).unwrap(), g);
        let broken = String::from_utf8(a).unwrap().replace("\n3,", "\n3,x");
        match PosteriorGrid::read(broken.as_bytes(), b.as_slice()) {
            Err(Error::Parse(p)) => assert_eq!(p.line, 6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn information_estimates() {
        let fixed = shannon_information_estimate(Ok, |_| Ok(vec![0.2, 0.3, 0.5]), 20, 1).unwrap();
        assert!(fixed.information.abs() < 1e-12);
        let varying = shannon_information_estimate(
            |s| Ok(s % 4),
            |d: &u64| {
                let mut q = vec![0.05; 4];
                q[*d as usize] = 0.85;
                Ok(q)
            },
            40,
            2,
        )
        .unwrap();
        assert!(varying.information > 0.0 && varying.information <= 4f64.ln());
        let alts = alternative_priors(&varying.marginal, 50, 3);
        assert!(varying.marginal_is_optimal(&alts));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn local_step_never_increases_lagrangian(seed in any::<u64>(), q0 in 0usize..12, beta in 0.0f64..4.0, eps in 0.0f64..1.5) {
            let g = random_grid(seed, 12);
            let eps = eps.max(1e-9);
            let q = epsilon_local_step(&g, q0, beta, eps).unwrap();
            prop_assert!(g.lagrangian(q, beta) <= g.lagrangian(q0, beta));
        }

        #[test]
        fn connected_instances_reach_the_global_minimum(seed in any::<u64>()) {
            let (g, s, start) = connected_instance(seed, 8, 12).unwrap();
            prop_assert!(g.is_global_minimizer(start, s.betas()[0]));
            prop_assert!(check_epsilon_connected(&g, &s).is_connected());
            let (q, traj) = anneal(&g, &s, start).unwrap();
            prop_assert!(g.is_global_minimizer(q, s.final_beta()));
            for w in traj.steps.windows(2) {
                prop_assert!(g.lagrangian(w[1].node, w[1].beta) <= g.lagrangian(w[0].node, w[1].beta));
            }
        }
    }
}
