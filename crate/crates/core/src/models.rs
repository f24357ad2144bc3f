//! Small fully connected networks with rectifier hidden layers, softmax
//! output, exact backpropagation and plain SGD.
//!
//! Parameters live in one flat vector. Layer `l` stores its weights as a
//! row-major `out x in` block followed by its `out` biases.

use std::io::{BufRead, Write};

use rand::Rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};
use crate::tasks::Dataset;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    widths: Vec<usize>,
}

impl Architecture {
    /// `widths = [input, hidden..., K]`.
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::param("architecture needs at least input and output widths"));
        }
        if widths.contains(&0) {
            return Err(Error::param("layer widths must be positive"));
        }
        if *widths.last().unwrap() < 2 {
            return Err(Error::InvalidAlphabet(*widths.last().unwrap()));
        }
        Ok(Architecture { widths })
    }

    /// A network with no hidden layer: multinomial logistic regression.
    pub fn linear(input: usize, k: usize) -> Result<Self> {
        Architecture::new(vec![input, k])
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn num_labels(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// `(inputs, outputs, offset of weights, offset of biases)` for layer `l`.
    pub fn layer(&self, l: usize) -> (usize, usize, usize, usize) {
        let mut off = 0;
        for i in 0..l {
            off += self.widths[i + 1] * (self.widths[i] + 1);
        }
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        (n_in, n_out, off, off + n_in * n_out)
    }

    pub fn num_params(&self) -> usize {
        self.widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    fn check(&self, d: &Features) -> Result<()> {
        if d.dim != self.input_dim() || d.k > self.num_labels() {
            return Err(Error::InvalidInput(format!(
                "architecture {:?} is incompatible with features of width {} and {} labels",
                self.widths, d.dim, d.k
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams {
    arch: Architecture,
    values: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(arch: &Architecture) -> Self {
        MlpParams {
            values: vec![0.0; arch.num_params()],
            arch: arch.clone(),
        }
    }

    pub fn from_values(arch: &Architecture, values: Vec<f64>) -> Result<Self> {
        if values.len() != arch.num_params() {
            return Err(Error::param(format!(
                "expected {} parameters, got {}",
                arch.num_params(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("parameters must be finite".into()));
        }
        Ok(MlpParams {
            arch: arch.clone(),
            values,
        })
    }

    /// Uniform in `[-a, a]` with `a = sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(arch: &Architecture, seed: u64) -> Self {
        let mut rng = stream_rng(seed, stream::INIT);
        let mut values = vec![0.0; arch.num_params()];
        for l in 0..arch.num_layers() {
            let (n_in, n_out, w, _) = arch.layer(l);
            let a = (6.0 / (n_in + n_out) as f64).sqrt();
            for v in &mut values[w..w + n_in * n_out] {
                *v = rng.random_range(-a..=a);
            }
        }
        MlpParams {
            arch: arch.clone(),
            values,
        }
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes the text checkpoint format.
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# taskinfo-params v1")?;
        write_widths(&mut w, &self.arch)?;
        write_arrays(&mut w, &self.arch, "params", &self.values)?;
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = numbered_lines(r)?;
        expect_line(&mut lines, "# taskinfo-params v1")?;
        let arch = read_widths(&mut lines)?;
        let values = read_arrays(&mut lines, &arch, "params")?;
        MlpParams::from_values(&arch, values)
    }
}

pub(crate) type Lines = std::iter::Peekable<std::vec::IntoIter<(usize, String)>>;
const CKPT: &str = "checkpoint";

pub(crate) fn numbered_lines<R: BufRead>(r: R) -> Result<Lines> {
    let mut out = Vec::new();
    for (i, l) in r.lines().enumerate() {
        let l = l?;
        if !l.trim().is_empty() {
            out.push((i + 1, l));
        }
    }
    Ok(out.into_iter().peekable())
}

pub(crate) fn expect_line(lines: &mut Lines, want: &str) -> Result<()> {
    match lines.next() {
        Some((_, l)) if l.trim() == want => Ok(()),
        Some((n, l)) => Err(Error::parse(CKPT, n, format!("expected `{want}`, found `{l}`"))),
        None => Err(Error::parse(CKPT, 1, format!("expected `{want}`"))),
    }
}

pub(crate) fn read_widths(lines: &mut Lines) -> Result<Architecture> {
    let (n, l) = lines
        .next()
        .ok_or_else(|| Error::parse(CKPT, 1, "missing widths line"))?;
    let rest = l
        .strip_prefix("widths = ")
        .ok_or_else(|| Error::parse(CKPT, n, "expected `widths = ...`"))?;
    let widths = rest
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(CKPT, n, format!("bad width `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Architecture::new(widths).map_err(|e| Error::parse(CKPT, n, e.to_string()))
}

pub(crate) fn write_widths<W: Write>(w: &mut W, arch: &Architecture) -> Result<()> {
    let widths: Vec<String> = arch.widths().iter().map(|w| w.to_string()).collect();
    writeln!(w, "widths = {}", widths.join(","))?;
    Ok(())
}

pub(crate) fn write_arrays<W: Write>(
    w: &mut W,
    arch: &Architecture,
    name: &str,
    values: &[f64],
) -> Result<()> {
    for l in 0..arch.num_layers() {
        let (n_in, n_out, wo, bo) = arch.layer(l);
        writeln!(w, "{name} layer {l} weights {n_out}x{n_in}")?;
        for r in 0..n_out {
            let row: Vec<String> = values[wo + r * n_in..wo + (r + 1) * n_in]
                .iter()
                .map(|v| v.to_string())
                .collect();
            writeln!(w, "{}", row.join(","))?;
        }
        writeln!(w, "{name} layer {l} bias {n_out}")?;
        let row: Vec<String> = values[bo..bo + n_out].iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub(crate) fn read_arrays(lines: &mut Lines, arch: &Architecture, name: &str) -> Result<Vec<f64>> {
    let mut values = vec![0.0; arch.num_params()];
    let parse_row = |lines: &mut Lines, out: &mut [f64]| -> Result<()> {
        let (n, l) = lines
            .next()
            .ok_or_else(|| Error::parse(CKPT, 0, "unexpected end of checkpoint"))?;
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != out.len() {
            return Err(Error::parse(
                CKPT,
                n,
                format!("expected {} values, found {}", out.len(), fields.len()),
            ));
        }
        for (slot, f) in out.iter_mut().zip(fields) {
            *slot = f
                .trim()
                .parse()
                .map_err(|_| Error::parse(CKPT, n, format!("bad value `{f}`")))?;
        }
        Ok(())
    };
    for l in 0..arch.num_layers() {
        let (n_in, n_out, wo, bo) = arch.layer(l);
        expect_line(lines, &format!("{name} layer {l} weights {n_out}x{n_in}"))?;
        for r in 0..n_out {
            parse_row(lines, &mut values[wo + r * n_in..wo + (r + 1) * n_in])?;
        }
        expect_line(lines, &format!("{name} layer {l} bias {n_out}"))?;
        parse_row(lines, &mut values[bo..bo + n_out])?;
    }
    Ok(values)
}

/// A dataset flattened into a feature matrix for the network.
#[derive(Clone, Debug, PartialEq)]
pub struct Features {
    dim: usize,
    k: usize,
    x: Vec<f64>,
    y: Vec<usize>,
}

impl Features {
    pub fn from_dataset(d: &Dataset) -> Result<Self> {
        let dim = d.domain().feature_dim();
        let mut x = Vec::with_capacity(dim * d.len());
        for i in 0..d.len() {
            let f = d.features(i);
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("sample {i} has a non-finite input")));
            }
            x.extend(f);
        }
        Ok(Features {
            dim,
            k: d.num_labels(),
            x,
            y: d.labels().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_labels(&self) -> usize {
        self.k
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.y[i]
    }
}

/// Scratch buffers reused across forward and backward passes.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub fn new(arch: &Architecture) -> Self {
        Workspace {
            acts: arch.widths().iter().map(|w| vec![0.0; *w]).collect(),
            deltas: arch.widths().iter().map(|w| vec![0.0; *w]).collect(),
        }
    }
}

/// Computes logits into `ws.acts[last]`; hidden activations are stored for backprop.
fn forward_raw(arch: &Architecture, w: &[f64], x: &[f64], ws: &mut Workspace) {
    ws.acts[0].copy_from_slice(x);
    let layers = arch.num_layers();
    for l in 0..layers {
        let (n_in, n_out, wo, bo) = arch.layer(l);
        let (prev, next) = ws.acts.split_at_mut(l + 1);
        let a = &prev[l];
        let z = &mut next[0];
        z.copy_from_slice(&w[bo..bo + n_out]);
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for (j, zj) in z.iter_mut().enumerate() {
                *zj += w[wo + j * n_in + i] * ai;
            }
        }
        if l + 1 < layers {
            for v in z.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
    }
}

/// In-place softmax with max subtraction; returns `ln sum exp(z)`.
fn log_softmax_normalizer(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Output distribution for one input.
pub fn forward(p: &MlpParams, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != p.arch.input_dim() {
        return Err(Error::InvalidInput(format!(
            "input has {} coordinates, network expects {}",
            x.len(),
            p.arch.input_dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite input".into()));
    }
    let mut ws = Workspace::new(&p.arch);
    forward_raw(&p.arch, &p.values, x, &mut ws);
    let z = ws.acts.last().unwrap();
    let lse = log_softmax_normalizer(z);
    Ok(z.iter().map(|v| (v - lse).exp()).collect())
}

/// `-ln p_w(y|x)` for one sample, with `w` a raw parameter slice.
pub fn sample_loss(arch: &Architecture, w: &[f64], x: &[f64], y: usize, ws: &mut Workspace) -> f64 {
    forward_raw(arch, w, x, ws);
    let z = ws.acts.last().unwrap();
    log_softmax_normalizer(z) - z[y]
}

/// Adds `scale * d(-ln p(y|x))/dw` into `grad` and returns the sample loss.
/// Activations from the forward pass stay in `ws`.
pub fn accumulate_gradient(
    arch: &Architecture,
    w: &[f64],
    x: &[f64],
    y: usize,
    scale: f64,
    grad: &mut [f64],
    ws: &mut Workspace,
) -> f64 {
    let loss = sample_loss(arch, w, x, y, ws);
    let layers = arch.num_layers();
    {
        let z = &ws.acts[layers];
        let lse = log_softmax_normalizer(z);
        let delta = &mut ws.deltas[layers];
        for (j, d) in delta.iter_mut().enumerate() {
            *d = (z[j] - lse).exp() - if j == y { 1.0 } else { 0.0 };
        }
    }
    backprop(arch, w, scale, grad, ws);
    loss
}

/// Propagates `ws.deltas[last]` (the logit gradient) backwards.
fn backprop(arch: &Architecture, w: &[f64], scale: f64, grad: &mut [f64], ws: &mut Workspace) {
    let layers = arch.num_layers();
    for l in (0..layers).rev() {
        let (n_in, n_out, wo, bo) = arch.layer(l);
        let (lower, upper) = ws.deltas.split_at_mut(l + 1);
        let delta = &upper[0];
        let a = &ws.acts[l];
        for j in 0..n_out {
            grad[bo + j] += scale * delta[j];
        }
        for (i, &ai) in a.iter().enumerate() {
            if ai == 0.0 {
                continue;
            }
            for j in 0..n_out {
                grad[wo + j * n_in + i] += scale * delta[j] * ai;
            }
        }
        if l > 0 {
            let below = &mut lower[l];
            for (i, b) in below.iter_mut().enumerate() {
                // rectifier derivative: stored activation is zero iff pre-activation <= 0
                if a[i] == 0.0 {
                    *b = 0.0;
                    continue;
                }
                let mut s = 0.0;
                for j in 0..n_out {
                    s += w[wo + j * n_in + i] * delta[j];
                }
                *b = s;
            }
        }
    }
}

/// Total cross-entropy in NATS.
pub fn dataset_loss(p: &MlpParams, d: &Dataset) -> Result<f64> {
    let f = Features::from_dataset(d)?;
    p.arch.check(&f)?;
    Ok(features_loss(&p.arch, &p.values, &f))
}

pub fn features_loss(arch: &Architecture, w: &[f64], f: &Features) -> f64 {
    let mut ws = Workspace::new(arch);
    (0..f.len())
        .map(|i| sample_loss(arch, w, f.input(i), f.label(i), &mut ws))
        .sum()
}

/// Summed loss and its gradient over the samples in `batch`.
pub fn loss_and_gradient(
    arch: &Architecture,
    w: &[f64],
    f: &Features,
    batch: impl IntoIterator<Item = usize>,
    grad: &mut [f64],
    ws: &mut Workspace,
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for i in batch {
        loss += accumulate_gradient(arch, w, f.input(i), f.label(i), 1.0, grad, ws);
    }
    loss
}

/// Exact gradient of the summed cross-entropy of `batch` (indices into `d`).
pub fn gradient(p: &MlpParams, d: &Dataset, batch: &[usize]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::param("gradient needs a nonempty batch"));
    }
    let f = Features::from_dataset(d)?;
    p.arch.check(&f)?;
    if let Some(&i) = batch.iter().find(|&&i| i >= f.len()) {
        return Err(Error::param(format!("batch index {i} out of range")));
    }
    let mut grad = vec![0.0; p.len()];
    let mut ws = Workspace::new(&p.arch);
    loss_and_gradient(&p.arch, &p.values, &f, batch.iter().copied(), &mut grad, &mut ws);
    Ok(grad)
}

/// Per-sample squared score averaged over labels `y ~ p_w(y|x)`, added into
/// `out` with weight `scale`.
pub(crate) fn accumulate_fisher_exact(
    arch: &Architecture,
    w: &[f64],
    x: &[f64],
    scale: f64,
    out: &mut [f64],
    g: &mut [f64],
    ws: &mut Workspace,
) {
    forward_raw(arch, w, x, ws);
    let layers = arch.num_layers();
    let z = ws.acts[layers].clone();
    let lse = log_softmax_normalizer(&z);
    let probs: Vec<f64> = z.iter().map(|v| (v - lse).exp()).collect();
    for (y, &py) in probs.iter().enumerate() {
        if py == 0.0 {
            continue;
        }
        g.iter_mut().for_each(|v| *v = 0.0);
        for (j, d) in ws.deltas[layers].iter_mut().enumerate() {
            *d = probs[j] - if j == y { 1.0 } else { 0.0 };
        }
        backprop(arch, w, 1.0, g, ws);
        for (o, gi) in out.iter_mut().zip(g.iter()) {
            *o += scale * py * gi * gi;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(default)]
    pub weight_decay: f64,
    pub epochs: usize,
    /// Epochs at which the learning rate is multiplied by `decay_factor`.
    #[serde(default)]
    pub decay_epochs: Vec<usize>,
    #[serde(default = "one")]
    pub decay_factor: f64,
    pub seed: u64,
    /// Stop after the first epoch whose full-data loss is at or below this.
    #[serde(default)]
    pub target_loss: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl SgdConfig {
    pub fn new(learning_rate: f64, batch_size: usize, epochs: usize, seed: u64) -> Self {
        SgdConfig {
            learning_rate,
            batch_size,
            weight_decay: 0.0,
            epochs,
            decay_epochs: Vec::new(),
            decay_factor: 1.0,
            seed,
            target_loss: None,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning rate must be positive"));
        }
        if self.batch_size == 0 || (n > 0 && self.batch_size > n) {
            return Err(Error::param(format!(
                "batch size {} must lie in 1..={n}",
                self.batch_size
            )));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::param("weight decay must be nonnegative"));
        }
        if !(self.decay_factor > 0.0) {
            return Err(Error::param("decay factor must be positive"));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn rate_at(&self, epoch: usize) -> f64 {
        let drops = self.decay_epochs.iter().filter(|&&e| e <= epoch).count();
        self.learning_rate * self.decay_factor.powi(drops as i32)
    }

    /// `beta = 2 lambda^2 gamma T` with temperature `T = eta / B`.
    pub fn implied_beta(&self, lambda: f64) -> f64 {
        2.0 * lambda * lambda * self.weight_decay * self.learning_rate / self.batch_size as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainResult {
    pub params: MlpParams,
    /// Full-data loss before training and after each completed epoch.
    pub loss_trace: Vec<f64>,
}

impl TrainResult {
    pub fn write_trace<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,loss_nats")?;
        for (e, l) in self.loss_trace.iter().enumerate() {
            writeln!(w, "{e},{l}")?;
        }
        Ok(())
    }
}

/// Minibatch SGD on the summed cross-entropy with weight decay.
pub fn sgd_train(d: &Dataset, init: MlpParams, cfg: &SgdConfig) -> Result<TrainResult> {
    let f = Features::from_dataset(d)?;
    sgd_train_features(&f, init, cfg)
}

pub fn sgd_train_features(f: &Features, init: MlpParams, cfg: &SgdConfig) -> Result<TrainResult> {
    cfg.validate(f.len())?;
    init.arch.check(f)?;
    let arch = init.arch.clone();
    let mut w = init.values.clone();
    let mut last_finite = w.clone();
    let mut grad = vec![0.0; w.len()];
    let mut ws = Workspace::new(&arch);
    let mut rng = stream_rng(cfg.seed, stream::SHUFFLE);
    let mut order: Vec<usize> = (0..f.len()).collect();
    let mut trace = vec![features_loss(&arch, &w, f)];
    for epoch in 0..cfg.epochs {
        if f.is_empty() {
            trace.push(0.0);
            continue;
        }
        if cfg.target_loss.is_some_and(|t| *trace.last().unwrap() <= t) {
            break;
        }
        let eta = cfg.rate_at(epoch);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            loss_and_gradient(&arch, &w, f, batch.iter().copied(), &mut grad, &mut ws);
            for (wi, gi) in w.iter_mut().zip(&grad) {
                *wi -= eta * (gi + cfg.weight_decay * *wi);
            }
        }
        let loss = features_loss(&arch, &w, f);
        if !loss.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err(Error::TrainingDiverged {
                epoch,
                last_finite: Box::new(MlpParams {
                    arch,
                    values: last_finite,
                }),
            });
        }
        last_finite.copy_from_slice(&w);
        trace.push(loss);
    }
    Ok(TrainResult {
        params: MlpParams { arch, values: w },
        loss_trace: trace,
    })
}

/// Mean per-sample cross-entropy, each term clipped at `clip`.
pub fn clipped_mean_loss(arch: &Architecture, w: &[f64], f: &Features, clip: f64) -> f64 {
    if f.is_empty() {
        return 0.0;
    }
    let mut ws = Workspace::new(arch);
    let s: f64 = (0..f.len())
        .map(|i| sample_loss(arch, w, f.input(i), f.label(i), &mut ws).min(clip))
        .sum();
    s / f.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::tasks::{generate_random_label_task, InputDomain, Teacher};
    use proptest::prelude::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn zero_network_is_uniform() {
        let arch = Architecture::new(vec![3, 4, 5]).unwrap();
        let p = MlpParams::zeros(&arch);
        let out = forward(&p, &[0.3, -1.0, 2.0]).unwrap();
        for v in out {
            assert!((v - 0.2).abs() < 1e-15);
        }
        let d = generate_random_label_task(7, InputDomain::Real(3), 5, 1).unwrap();
        assert!((dataset_loss(&p, &d).unwrap() - 7.0 * 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hand_softmax() {
        let arch = Architecture::linear(1, 2).unwrap();
        let p = MlpParams::from_values(&arch, vec![0.0, 0.0, 0.0, 3f64.ln()]).unwrap();
        let out = forward(&p, &[1.0]).unwrap();
        assert!((out[0] - 0.25).abs() < 1e-15 && (out[1] - 0.75).abs() < 1e-15);
        assert!(forward(&p, &[f64::NAN]).is_err());
        assert!(forward(&p, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn softmax_shift_invariance() {
        let arch = Architecture::new(vec![2, 3, 3]).unwrap();
        let p = MlpParams::init(&arch, 4);
        let mut q = p.clone();
        let (_, n_out, _, bo) = arch.layer(1);
        for j in 0..n_out {
            q.values_mut()[bo + j] += 17.5;
        }
        let a = forward(&p, &[0.4, -0.7]).unwrap();
        let b = forward(&q, &[0.4, -0.7]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_matches_forward_recomputation() {
        let arch = Architecture::new(vec![4, 6, 3]).unwrap();
        let p = MlpParams::init(&arch, 8);
        let d = generate_random_label_task(20, InputDomain::Real(4), 3, 2).unwrap();
        let mut total = 0.0;
        for i in 0..d.len() {
            let probs = forward(&p, &d.features(i)).unwrap();
            total -= probs[d.samples()[i].label].ln();
        }
        assert!((dataset_loss(&p, &d).unwrap() - total).abs() < 1e-10);
    }

    #[test]
    fn dead_rectifier_has_zero_gradient() {
        let arch = Architecture::new(vec![2, 2, 2]).unwrap();
        let mut p = MlpParams::init(&arch, 3);
        // hidden unit 0: weights and bias force a negative pre-activation
        let (_, _, wo, bo) = arch.layer(0);
        p.values_mut()[wo] = 0.0;
        p.values_mut()[wo + 1] = 0.0;
        p.values_mut()[bo] = -5.0;
        let d = generate_random_label_task(10, InputDomain::Real(2), 2, 5).unwrap();
        let g = gradient(&p, &d, &(0..10).collect::<Vec<_>>()).unwrap();
        assert_eq!(g[wo], 0.0);
        assert_eq!(g[wo + 1], 0.0);
        assert_eq!(g[bo], 0.0);
        let (_, _, wo1, _) = arch.layer(1);
        assert_eq!(g[wo1], 0.0);
    }

    #[test]
    fn gradient_is_additive() {
        let arch = Architecture::new(vec![3, 4, 2]).unwrap();
        let p = MlpParams::init(&arch, 1);
        let d = generate_random_label_task(6, InputDomain::Real(3), 2, 9).unwrap();
        let all = gradient(&p, &d, &[0, 1, 2, 3, 4, 5]).unwrap();
        let mut sum = vec![0.0; p.len()];
        for i in 0..6 {
            for (s, g) in sum.iter_mut().zip(gradient(&p, &d, &[i]).unwrap()) {
                *s += g;
            }
        }
        for (a, b) in all.iter().zip(&sum) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(gradient(&p, &d, &[]).is_err());
    }

    #[test]
    fn sgd_zero_epochs_replay_and_descent() {
        let teacher = Teacher::random(3, 2, 1).unwrap();
        let d = teacher.sample(40, 0.0, 2).unwrap();
        let arch = Architecture::linear(3, 2).unwrap();
        let init = MlpParams::init(&arch, 0);
        let zero = sgd_train(&d, init.clone(), &SgdConfig::new(0.01, 40, 0, 0)).unwrap();
        assert_eq!(zero.params, init);
        let cfg = SgdConfig::new(0.01, 40, 50, 7);
        let a = sgd_train(&d, init.clone(), &cfg).unwrap();
        let b = sgd_train(&d, init.clone(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.loss_trace.last().unwrap() < &a.loss_trace[0]);
        let mb = SgdConfig::new(0.01, 7, 5, 7);
        assert_eq!(sgd_train(&d, init.clone(), &mb).unwrap(), sgd_train(&d, init, &mb).unwrap());
    }

    #[test]
    fn divergence_is_reported() {
        let teacher = Teacher::random(3, 2, 1).unwrap();
        let d = teacher.sample(40, 0.3, 2).unwrap();
        let arch = Architecture::new(vec![3, 16, 2]).unwrap();
        let init = MlpParams::init(&arch, 0);
        let cfg = SgdConfig::new(1e300, 40, 20, 0);
        match sgd_train(&d, init, &cfg) {
            Err(Error::TrainingDiverged { last_finite, .. }) => {
                assert!(last_finite.values().iter().all(|v| v.is_finite()))
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn weight_decay_shrinks_without_gradient() {
        let arch = Architecture::linear(2, 2).unwrap();
        let d = Dataset::empty(2, InputDomain::Real(2)).unwrap();
        let init = MlpParams::from_values(&arch, vec![1.0, -2.0, 0.5, 3.0, 0.1, -0.1]).unwrap();
        let mut cfg = SgdConfig::new(0.1, 1, 5, 0);
        cfg.weight_decay = 0.5;
        let f = Features::from_dataset(&d).unwrap();
        let mut w = init.values().to_vec();
        for _ in 0..5 {
            let before: f64 = w.iter().map(|v| v * v).sum();
            for v in &mut w {
                *v -= cfg.learning_rate * cfg.weight_decay * *v;
            }
            let after: f64 = w.iter().map(|v| v * v).sum();
            assert!(after <= before);
        }
        assert!(f.is_empty());
    }

    #[test]
    fn checkpoint_round_trip() {
        let arch = Architecture::new(vec![3, 5, 2]).unwrap();
        let p = MlpParams::init(&arch, 11);
        let mut buf = Vec::new();
        p.write_checkpoint(&mut buf).unwrap();
        let q = MlpParams::read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(p, q);
        let bad = String::from_utf8(buf).unwrap().replacen("widths = 3,5,2", "widths = 3,x,2", 1);
        assert!(matches!(MlpParams::read_checkpoint(bad.as_bytes()), Err(Error::Parse(_))));
    }

    #[test]
    fn schedule_and_beta_helper() {
        let mut cfg = SgdConfig::new(0.1, 10, 30, 0);
        cfg.decay_epochs = vec![10, 20];
        cfg.decay_factor = 0.5;
        assert_eq!(cfg.rate_at(0), 0.1);
        assert_eq!(cfg.rate_at(10), 0.05);
        assert_eq!(cfg.rate_at(25), 0.025);
        cfg.weight_decay = 1e-3;
        assert!((cfg.implied_beta(2.0) - 2.0 * 4.0 * 1e-3 * 0.01).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn backprop_matches_central_differences(
            widths in prop::collection::vec(1usize..5, 1..3),
            seed in any::<u64>(),
        ) {
            let mut ws_ = vec![3];
            ws_.extend(widths);
            ws_.push(3);
            let arch = Architecture::new(ws_).unwrap();
            // biases drawn away from zero so no pre-activation sits on a kink
            let mut rng = stream_rng(seed, stream::TRIAL);
            let values: Vec<f64> = (0..arch.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = MlpParams::from_values(&arch, values).unwrap();
            let d = generate_random_label_task(5, InputDomain::Real(3), 3, seed ^ 1).unwrap();
            let g = gradient(&p, &d, &[0, 1, 2, 3, 4]).unwrap();
            let f = Features::from_dataset(&d).unwrap();
            let h = 1e-5;
            for i in 0..p.len() {
                let mut w = p.values().to_vec();
                w[i] += h;
                let up = features_loss(&arch, &w, &f);
                w[i] -= 2.0 * h;
                let down = features_loss(&arch, &w, &f);
                let fd = (up - down) / (2.0 * h);
                prop_assert!(rel_err(g[i], fd) < 1e-5 || (g[i] - fd).abs() < 1e-9,
                    "param {}: backprop {} vs fd {}", i, g[i], fd);
            }
        }
    }
}
