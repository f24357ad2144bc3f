//! Datasets, synthetic task generators, task transforms and the disjoint
//! union used by every distance computation.
//!
//! Discrete inputs are integers `0..M`; real inputs are fixed-length `f64`
//! vectors. Labels are dense indices `0..K`.

use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::Hypothesis;
use crate::rng::{stream, stream_rng};

/// Shape of the input space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputDomain {
    /// Integers `0..size`.
    Discrete(usize),
    /// Vectors of the given dimension.
    Real(usize),
}

impl InputDomain {
    pub fn kind(&self) -> &'static str {
        match self {
            InputDomain::Discrete(_) => "discrete",
            InputDomain::Real(_) => "real",
        }
    }

    /// Width of the feature vector a model sees for this domain under
    /// [`Encoding::Bits`] (discrete) or as-is (real).
    pub fn feature_dim(&self) -> usize {
        match *self {
            InputDomain::Discrete(m) => bit_width(m),
            InputDomain::Real(d) => d,
        }
    }
}

impl fmt::Display for InputDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputDomain::Discrete(m) => write!(f, "discrete:{m}"),
            InputDomain::Real(d) => write!(f, "real:{d}"),
        }
    }
}

impl std::str::FromStr for InputDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, size) = s
            .split_once(':')
            .ok_or_else(|| Error::param(format!("input descriptor `{s}` is not kind:size")))?;
        let size: usize = size
            .trim()
            .parse()
            .map_err(|_| Error::param(format!("bad size in input descriptor `{s}`")))?;
        match kind.trim() {
            "discrete" if size > 0 => Ok(InputDomain::Discrete(size)),
            "real" => Ok(InputDomain::Real(size)),
            _ => Err(Error::param(format!("unknown input descriptor `{s}`"))),
        }
    }
}

/// Number of bits needed to write every integer in `0..m`.
pub fn bit_width(m: usize) -> usize {
    if m <= 1 {
        0
    } else {
        (usize::BITS - (m - 1).leading_zeros()) as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    Discrete(usize),
    Real(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Input,
    pub label: usize,
}

/// One operand of a disjoint union, kept so the union can be split again.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnionPart {
    pub domain: InputDomain,
    pub num_labels: usize,
    pub union: Option<Box<UnionInfo>>,
}

/// Metadata recorded on a dataset built by [`disjoint_union`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnionInfo {
    pub left: UnionPart,
    pub right: UnionPart,
    /// Discrete: offset between the two tagged copies of the domain.
    /// Real: width the operands were zero-padded to before the tag pair.
    pub stride: usize,
}

/// A finite list of labelled samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    num_labels: usize,
    domain: InputDomain,
    union: Option<Box<UnionInfo>>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, num_labels: usize, domain: InputDomain) -> Result<Self> {
        if num_labels < 2 {
            return Err(Error::InvalidAlphabet(num_labels));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.label >= num_labels {
                return Err(Error::InvalidInput(format!(
                    "sample {i}: label {} outside alphabet of size {num_labels}",
                    s.label
                )));
            }
            match (&s.input, domain) {
                (Input::Discrete(x), InputDomain::Discrete(m)) if *x < m => {}
                (Input::Real(v), InputDomain::Real(d)) if v.len() == d => {}
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "sample {i}: input does not conform to {domain}"
                    )))
                }
            }
        }
        Ok(Dataset {
            samples,
            num_labels,
            domain,
            union: None,
        })
    }

    pub fn empty(num_labels: usize, domain: InputDomain) -> Result<Self> {
        Dataset::new(Vec::new(), num_labels, domain)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn domain(&self) -> InputDomain {
        self.domain
    }

    pub fn union_info(&self) -> Option<&UnionInfo> {
        self.union.as_deref()
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.samples.iter().map(|s| s.label)
    }

    /// Model-facing feature vector of sample `i`: real inputs as-is,
    /// discrete inputs as ±1 bits (least significant first).
    pub fn features(&self, i: usize) -> Vec<f64> {
        match &self.samples[i].input {
            Input::Real(v) => v.clone(),
            Input::Discrete(x) => bits_pm1(*x, self.domain.feature_dim()),
        }
    }

    /// Keeps only samples whose label is in `keep`; the alphabet is preserved.
    pub fn restrict_labels(&self, keep: &[usize]) -> Dataset {
        let samples = self
            .samples
            .iter()
            .filter(|s| keep.contains(&s.label))
            .cloned()
            .collect();
        Dataset {
            samples,
            num_labels: self.num_labels,
            domain: self.domain,
            union: None,
        }
    }

    /// Concatenates two datasets over the same domain and alphabet.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.domain != other.domain || self.num_labels != other.num_labels {
            return Err(Error::InvalidInput(
                "concatenated datasets must share domain and alphabet".into(),
            ));
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Dataset::new(samples, self.num_labels, self.domain)
    }

    /// Splits a dataset produced by [`disjoint_union`] back into its operands.
    pub fn split_union(&self) -> Result<(Dataset, Dataset)> {
        let info = self
            .union
            .as_deref()
            .ok_or_else(|| Error::InvalidInput("dataset carries no union metadata".into()))?;
        let mut left = Vec::new();
        let mut right = Vec::new();
        for s in &self.samples {
            let (origin, input) = match &s.input {
                Input::Discrete(x) => {
                    let origin = x / info.stride;
                    (origin, Input::Discrete(x % info.stride))
                }
                Input::Real(v) => {
                    let origin = if v[info.stride] > 0.5 { 0 } else { 1 };
                    let part = if origin == 0 { &info.left } else { &info.right };
                    let width = part.domain.feature_dim();
                    (origin, Input::Real(v[..width].to_vec()))
                }
            };
            let sample = Sample {
                input,
                label: s.label,
            };
            if origin == 0 {
                left.push(sample);
            } else {
                right.push(sample);
            }
        }
        let build = |samples: Vec<Sample>, part: &UnionPart| -> Result<Dataset> {
            let mut d = Dataset::new(samples, part.num_labels, part.domain)?;
            d.union = part.union.clone();
            Ok(d)
        };
        Ok((build(left, &info.left)?, build(right, &info.right)?))
    }

    /// Re-encodes a discrete dataset as real vectors; real datasets are
    /// returned unchanged.
    pub fn encode(&self, encoding: Encoding) -> Dataset {
        let m = match self.domain {
            InputDomain::Real(_) => return self.clone(),
            InputDomain::Discrete(m) => m,
        };
        let bits = bit_width(m);
        let dim = encoding.dim(m);
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let x = match s.input {
                    Input::Discrete(x) => x,
                    Input::Real(_) => unreachable!("validated by constructor"),
                };
                let mut v = Vec::with_capacity(dim);
                if matches!(encoding, Encoding::OneHot | Encoding::OneHotBits) {
                    let mut one_hot = vec![0.0; m];
                    one_hot[x] = 1.0;
                    v.extend(one_hot);
                }
                if matches!(encoding, Encoding::Bits | Encoding::OneHotBits) {
                    v.extend(bits_pm1(x, bits));
                }
                Sample {
                    input: Input::Real(v),
                    label: s.label,
                }
            })
            .collect();
        Dataset {
            samples,
            num_labels: self.num_labels,
            domain: InputDomain::Real(dim),
            union: None,
        }
    }

    /// Writes the dataset CSV format.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# taskinfo-dataset v1, K={}, input={}",
            self.num_labels, self.domain
        )?;
        if let Some(info) = &self.union {
            let json = serde_json::to_string(info).map_err(|e| Error::param(e.to_string()))?;
            writeln!(w, "# union {json}")?;
        }
        for s in &self.samples {
            match &s.input {
                Input::Discrete(x) => writeln!(w, "{x},{}", s.label)?,
                Input::Real(v) => {
                    for x in v {
                        write!(w, "{x},")?;
                    }
                    writeln!(w, "{}", s.label)?;
                }
            }
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// Reads the dataset CSV format. Extra `#` comment lines are ignored.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Dataset> {
        const FORMAT: &str = "dataset csv";
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(FORMAT, 1, "missing header"))?;
        let header = header?;
        let rest = header
            .strip_prefix("# taskinfo-dataset v1,")
            .ok_or_else(|| Error::parse(FORMAT, 1, "expected `# taskinfo-dataset v1, ...` header"))?;
        let mut num_labels = None;
        let mut domain = None;
        for field in rest.split(',') {
            let (key, value) = field
                .trim()
                .split_once('=')
                .ok_or_else(|| Error::parse(FORMAT, 1, format!("bad header field `{field}`")))?;
            match key {
                "K" => {
                    num_labels = Some(value.parse::<usize>().map_err(|_| {
                        Error::parse(FORMAT, 1, format!("bad label count `{value}`"))
                    })?)
                }
                "input" => {
                    domain = Some(
                        value
                            .parse::<InputDomain>()
                            .map_err(|e| Error::parse(FORMAT, 1, e.to_string()))?,
                    )
                }
                _ => return Err(Error::parse(FORMAT, 1, format!("unknown header key `{key}`"))),
            }
        }
        let num_labels = num_labels.ok_or_else(|| Error::parse(FORMAT, 1, "header lacks K"))?;
        let domain = domain.ok_or_else(|| Error::parse(FORMAT, 1, "header lacks input"))?;
        let mut union = None;
        let mut samples = Vec::new();
        for (i, line) in lines {
            let line = line?;
            let lineno = i + 1;
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(json) = comment.trim_start().strip_prefix("union ") {
                    let info: UnionInfo = serde_json::from_str(json)
                        .map_err(|e| Error::parse(FORMAT, lineno, e.to_string()))?;
                    union = Some(Box::new(info));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let (label, input) = fields
                .split_last()
                .ok_or_else(|| Error::parse(FORMAT, lineno, "empty row"))?;
            let label: usize = label
                .trim()
                .parse()
                .map_err(|_| Error::parse(FORMAT, lineno, format!("bad label `{label}`")))?;
            let input = match domain {
                InputDomain::Discrete(_) => {
                    if input.len() != 1 {
                        return Err(Error::parse(FORMAT, lineno, "discrete row needs 2 fields"));
                    }
                    Input::Discrete(input[0].trim().parse().map_err(|_| {
                        Error::parse(FORMAT, lineno, format!("bad input `{}`", input[0]))
                    })?)
                }
                InputDomain::Real(d) => {
                    if input.len() != d {
                        return Err(Error::parse(
                            FORMAT,
                            lineno,
                            format!("expected {} fields, found {}", d + 1, fields.len()),
                        ));
                    }
                    let v = input
                        .iter()
                        .map(|f| {
                            f.trim().parse::<f64>().map_err(|_| {
                                Error::parse(FORMAT, lineno, format!("bad value `{f}`"))
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Input::Real(v)
                }
            };
            samples.push(Sample { input, label });
        }
        let mut d = Dataset::new(samples, num_labels, domain).map_err(|e| match e {
            Error::InvalidInput(m) => Error::parse(FORMAT, 0, m),
            other => other,
        })?;
        d.union = union;
        Ok(d)
    }
}

fn bits_pm1(x: usize, bits: usize) -> Vec<f64> {
    (0..bits)
        .map(|b| if (x >> b) & 1 == 1 { 1.0 } else { -1.0 })
        .collect()
}

/// How discrete inputs are turned into vectors for the network engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Encoding {
    /// ±1 per bit.
    Bits,
    /// Indicator of the input value.
    OneHot,
    /// Indicator followed by ±1 bits.
    OneHotBits,
}

impl Encoding {
    pub fn dim(&self, m: usize) -> usize {
        match self {
            Encoding::Bits => bit_width(m),
            Encoding::OneHot => m,
            Encoding::OneHotBits => m + bit_width(m),
        }
    }
}

/// A deterministic rewrite of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskTransform {
    /// Keeps `ceil(fraction * N)` samples chosen by `seed`, in original order.
    Subset { fraction: f64, seed: u64 },
    /// Relabels `y -> permutation[y]`.
    LabelPermutation { permutation: Vec<usize> },
    /// Gaussian smoothing along the coordinate axis, `width` in coordinates.
    InputBlur { width: f64 },
    /// `x -> -x`.
    SignInversion,
    /// Replaces every label with a uniform draw.
    LabelRandomization { seed: u64 },
}

impl TaskTransform {
    fn name(&self) -> &'static str {
        match self {
            TaskTransform::Subset { .. } => "subset",
            TaskTransform::LabelPermutation { .. } => "label-permutation",
            TaskTransform::InputBlur { .. } => "input-blur",
            TaskTransform::SignInversion => "sign-inversion",
            TaskTransform::LabelRandomization { .. } => "label-randomization",
        }
    }
}

/// Applies a transform; the result is a pure function of `(d, t)`.
pub fn apply_transform(d: &Dataset, t: &TaskTransform) -> Result<Dataset> {
    let incompatible = || Error::IncompatibleTransform {
        transform: t.name(),
        input: d.domain.kind(),
    };
    let mut samples = d.samples.clone();
    match t {
        TaskTransform::Subset { fraction, seed } => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::param(format!("subset fraction {fraction} outside [0,1]")));
            }
            let n = d.len();
            let keep = ((fraction * n as f64).ceil() as usize).min(n);
            let mut rng = stream_rng(*seed, stream::SUBSET);
            let mut chosen = index::sample(&mut rng, n, keep).into_vec();
            chosen.sort_unstable();
            samples = chosen.into_iter().map(|i| d.samples[i].clone()).collect();
        }
        TaskTransform::LabelPermutation { permutation } => {
            let k = d.num_labels;
            let mut seen = vec![false; k];
            if permutation.len() != k
                || permutation
                    .iter()
                    .any(|&p| p >= k || std::mem::replace(&mut seen[p], true))
            {
                return Err(Error::param("label permutation is not a bijection of 0..K"));
            }
            for s in &mut samples {
                s.label = permutation[s.label];
            }
        }
        TaskTransform::InputBlur { width } => {
            if d.domain.kind() != "real" {
                return Err(incompatible());
            }
            if !(*width >= 0.0) {
                return Err(Error::param("blur width must be nonnegative"));
            }
            for s in &mut samples {
                if let Input::Real(v) = &mut s.input {
                    *v = blur(v, *width);
                }
            }
        }
        TaskTransform::SignInversion => {
            if d.domain.kind() != "real" {
                return Err(incompatible());
            }
            for s in &mut samples {
                if let Input::Real(v) = &mut s.input {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
            }
        }
        TaskTransform::LabelRandomization { seed } => {
            let mut rng = stream_rng(*seed, stream::LABELS);
            for s in &mut samples {
                s.label = rng.random_range(0..d.num_labels);
            }
        }
    }
    Ok(Dataset {
        samples,
        num_labels: d.num_labels,
        domain: d.domain,
        union: None,
    })
}

fn blur(v: &[f64], width: f64) -> Vec<f64> {
    if width == 0.0 || v.is_empty() {
        return v.to_vec();
    }
    let reach = (3.0 * width).ceil() as isize;
    let kernel: Vec<f64> = (-reach..=reach)
        .map(|o| (-(o as f64).powi(2) / (2.0 * width * width)).exp())
        .collect();
    let n = v.len() as isize;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            let mut norm = 0.0;
            for (k, o) in (-reach..=reach).enumerate() {
                let j = i + o;
                if (0..n).contains(&j) {
                    acc += kernel[k] * v[j as usize];
                    norm += kernel[k];
                }
            }
            acc / norm
        })
        .collect()
}

/// Tags each input with its origin and concatenates.
///
/// Discrete domains: both operands are embedded in `0..S` where `S` is the
/// smallest power of two covering either domain, and origin 2 is shifted by
/// `S`, so the tag is the new leading bit. Real domains: the shorter input is
/// zero-padded to the common width and a one-hot origin pair is appended.
/// The output alphabet is `max(K1, K2)`.
pub fn disjoint_union(d1: &Dataset, d2: &Dataset) -> Result<Dataset> {
    let num_labels = d1.num_labels.max(d2.num_labels);
    let part = |d: &Dataset| UnionPart {
        domain: d.domain,
        num_labels: d.num_labels,
        union: d.union.clone(),
    };
    let (domain, stride, samples) = match (d1.domain, d2.domain) {
        (InputDomain::Discrete(m1), InputDomain::Discrete(m2)) => {
            let stride = m1.max(m2).next_power_of_two();
            let tag = |d: &Dataset, origin: usize| {
                d.samples
                    .iter()
                    .map(move |s| match s.input {
                        Input::Discrete(x) => Sample {
                            input: Input::Discrete(origin * stride + x),
                            label: s.label,
                        },
                        Input::Real(_) => unreachable!(),
                    })
                    .collect::<Vec<_>>()
            };
            let mut samples = tag(d1, 0);
            samples.extend(tag(d2, 1));
            (InputDomain::Discrete(2 * stride), stride, samples)
        }
        (InputDomain::Real(a), InputDomain::Real(b)) => {
            let width = a.max(b);
            let tag = |d: &Dataset, origin: usize| {
                d.samples
                    .iter()
                    .map(move |s| match &s.input {
                        Input::Real(v) => {
                            let mut x = v.clone();
                            x.resize(width, 0.0);
                            x.push(if origin == 0 { 1.0 } else { 0.0 });
                            x.push(if origin == 0 { 0.0 } else { 1.0 });
                            Sample {
                                input: Input::Real(x),
                                label: s.label,
                            }
                        }
                        Input::Discrete(_) => unreachable!(),
                    })
                    .collect::<Vec<_>>()
            };
            let mut samples = tag(d1, 0);
            samples.extend(tag(d2, 1));
            (InputDomain::Real(width + 2), width, samples)
        }
        _ => {
            return Err(Error::InvalidInput(
                "disjoint union needs operands of the same input kind".into(),
            ))
        }
    };
    Ok(Dataset {
        samples,
        num_labels,
        domain,
        union: Some(Box::new(UnionInfo {
            left: part(d1),
            right: part(d2),
            stride,
        })),
    })
}

/// Labels drawn i.i.d. uniformly; discrete inputs are distinct.
pub fn generate_random_label_task(
    n: usize,
    domain: InputDomain,
    k: usize,
    seed: u64,
) -> Result<Dataset> {
    if k < 2 {
        return Err(Error::InvalidAlphabet(k));
    }
    let mut input_rng = stream_rng(seed, stream::INPUTS);
    let mut label_rng = stream_rng(seed, stream::LABELS);
    let inputs: Vec<Input> = match domain {
        InputDomain::Discrete(m) => {
            if n > m {
                return Err(Error::DomainExhausted {
                    domain: m,
                    requested: n,
                });
            }
            index::sample(&mut input_rng, m, n)
                .into_iter()
                .map(Input::Discrete)
                .collect()
        }
        InputDomain::Real(d) => (0..n)
            .map(|_| {
                Input::Real(
                    (0..d)
                        .map(|_| input_rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                )
            })
            .collect(),
    };
    let samples = inputs
        .into_iter()
        .map(|input| Sample {
            input,
            label: label_rng.random_range(0..k),
        })
        .collect();
    Dataset::new(samples, k, domain)
}

/// Inputs uniform over the rule's discrete domain; labels drawn from the
/// rule, then replaced by a different uniformly chosen label with
/// probability `noise`.
pub fn generate_planted_task(
    n: usize,
    rule: &Hypothesis,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::param(format!("noise {noise} outside [0,1]")));
    }
    let m = rule.domain_size();
    let k = rule.num_labels();
    let mut input_rng = stream_rng(seed, stream::INPUTS);
    let mut label_rng = stream_rng(seed, stream::LABELS);
    let mut noise_rng = stream_rng(seed, stream::NOISE);
    let samples = (0..n)
        .map(|_| {
            let x = input_rng.random_range(0..m);
            let mut y = sample_row(rule.row(x), &mut label_rng);
            if noise_rng.random::<f64>() < noise {
                let other = noise_rng.random_range(0..k - 1);
                y = if other >= y { other + 1 } else { other };
            }
            Sample {
                input: Input::Discrete(x),
                label: y,
            }
        })
        .collect();
    Dataset::new(samples, k, InputDomain::Discrete(m))
}

pub(crate) fn sample_row<R: Rng>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (y, p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return y;
        }
    }
    row.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

/// A fixed real-vector classification rule: the label is the index of the
/// prototype with the largest inner product with the input.
#[derive(Clone, Debug, PartialEq)]
pub struct Teacher {
    prototypes: Vec<Vec<f64>>,
}

impl Teacher {
    /// Prototypes are independent standard normal vectors.
    pub fn random(dim: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidAlphabet(k));
        }
        let mut rng = stream_rng(seed, stream::INIT);
        let prototypes = (0..k)
            .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        Ok(Teacher { prototypes })
    }

    pub fn dim(&self) -> usize {
        self.prototypes[0].len()
    }

    pub fn num_labels(&self) -> usize {
        self.prototypes.len()
    }

    pub fn classify(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (y, p) in self.prototypes.iter().enumerate() {
            let score: f64 = p.iter().zip(x).map(|(a, b)| a * b).sum();
            if score > best_score {
                best = y;
                best_score = score;
            }
        }
        best
    }

    /// Standard normal inputs, teacher labels flipped with probability `noise`.
    pub fn sample(&self, n: usize, noise: f64, seed: u64) -> Result<Dataset> {
        if !(0.0..=1.0).contains(&noise) {
            return Err(Error::param(format!("noise {noise} outside [0,1]")));
        }
        let k = self.num_labels();
        let mut input_rng = stream_rng(seed, stream::INPUTS);
        let mut noise_rng = stream_rng(seed, stream::NOISE);
        let samples = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..self.dim())
                    .map(|_| input_rng.sample(StandardNormal))
                    .collect();
                let mut y = self.classify(&x);
                if noise_rng.random::<f64>() < noise {
                    let other = noise_rng.random_range(0..k - 1);
                    y = if other >= y { other + 1 } else { other };
                }
                Sample {
                    input: Input::Real(x),
                    label: y,
                }
            })
            .collect();
        Dataset::new(samples, k, InputDomain::Real(self.dim()))
    }
}
