//! Enumeration engine: evaluates every (base rule, pin count) pair, keeps
//! the loss/code Pareto frontier, and answers all queries from it.
//!
//! A memorizing variant of a base rule pins `s` distinct training inputs to
//! their observed label. Among the `C(n, s)` subsets of a given size the
//! enumeration keeps the one with the largest loss reduction (ties broken by
//! ascending input), since every other subset of that size has the same code
//! length and no smaller loss.

use crate::curve::{Curve, CurvePoint};
use crate::error::{Error, Result};
use crate::oracle::family::{BaseRule, HypothesisFamily};
use crate::oracle::{canonical_loss, Hypothesis};
use crate::par;
use crate::rng::derive_seed;
use crate::tasks::{disjoint_union, generate_planted_task, Dataset, Input, InputDomain};

const CHUNK: usize = 64;
const PRUNE_AT: usize = 8192;

/// One enumerated hypothesis: base rule index plus pin count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub base: usize,
    pub pins: usize,
    pub code: f64,
    pub loss: f64,
}

impl Candidate {
    pub fn value(&self, beta: f64) -> f64 {
        self.loss + beta * self.code
    }

    fn index_cmp(&self, other: &Candidate) -> std::cmp::Ordering {
        (self.base, self.pins).cmp(&(other.base, other.pins))
    }

    fn frontier_cmp(&self, other: &Candidate) -> std::cmp::Ordering {
        self.code
            .total_cmp(&other.code)
            .then(self.loss.total_cmp(&other.loss))
            .then(self.index_cmp(other))
    }

    fn lagrangian_cmp(&self, other: &Candidate, beta: f64) -> std::cmp::Ordering {
        self.value(beta)
            .total_cmp(&other.value(beta))
            .then(self.code.total_cmp(&other.code))
            .then(self.index_cmp(other))
    }
}

/// A member of a `beta`-sufficient set.
#[derive(Clone, Debug, PartialEq)]
pub struct Statistic {
    pub candidate: Candidate,
    pub value: f64,
    /// Smallest code length among the sufficient set.
    pub minimal: bool,
}

/// Per-dataset counts, independent of sample order.
#[derive(Clone, Debug)]
struct Summary {
    k: usize,
    inputs: Vec<usize>,
    counts: Vec<u64>,
    totals: Vec<u64>,
    consistent: Vec<Option<usize>>,
    ln_fact: Vec<f64>,
    ln_k: f64,
}

impl Summary {
    fn new(d: &Dataset, k: usize) -> Self {
        let mut xs: Vec<(usize, usize)> = d
            .samples()
            .iter()
            .map(|s| match s.input {
                Input::Discrete(x) => (x, s.label),
                Input::Real(_) => unreachable!("oracle datasets are discrete"),
            })
            .collect();
        xs.sort_unstable();
        let mut inputs = Vec::new();
        let mut counts = Vec::new();
        for (x, y) in xs {
            if inputs.last() != Some(&x) {
                inputs.push(x);
                counts.extend(std::iter::repeat_n(0u64, k));
            }
            let i = inputs.len() - 1;
            counts[i * k + y] += 1;
        }
        let totals: Vec<u64> = counts.chunks(k).map(|c| c.iter().sum()).collect();
        let consistent = counts
            .chunks(k)
            .map(|c| {
                let mut nz = c.iter().enumerate().filter(|(_, n)| **n > 0);
                match (nz.next(), nz.next()) {
                    (Some((y, _)), None) => Some(y),
                    _ => None,
                }
            })
            .collect();
        let mut ln_fact = vec![0.0; inputs.len() + 1];
        for i in 1..ln_fact.len() {
            ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
        }
        Summary {
            k,
            inputs,
            counts,
            totals,
            consistent,
            ln_fact,
            ln_k: -(1.0 / k as f64).ln(),
        }
    }

    fn distinct(&self) -> usize {
        self.inputs.len()
    }

    fn ln_choose(&self, s: usize) -> f64 {
        let n = self.distinct();
        self.ln_fact[n] - self.ln_fact[s] - self.ln_fact[n - s]
    }

    fn pin_code(&self, base_code: f64, s: usize) -> f64 {
        base_code + s as f64 * self.ln_k + self.ln_choose(s)
    }
}

#[derive(Clone, Copy, Debug)]
struct Gain {
    gain: f64,
    input: usize,
    value: f64,
    count: u64,
}

/// Loss groups and sorted pin gains of one base rule on one dataset.
struct Profile {
    groups: Vec<(f64, u64)>,
    gains: Vec<Gain>,
}

fn add_group(groups: &mut Vec<(f64, u64)>, v: f64, n: u64) {
    if n == 0 {
        return;
    }
    match groups.iter_mut().find(|g| g.0 == v) {
        Some(g) => g.1 += n,
        None => groups.push((v, n)),
    }
}

fn profile(rule: &BaseRule, s: &Summary, memorize: bool) -> Profile {
    let k = s.k;
    let noise = rule.noise();
    let hit = 1.0 - noise;
    let miss = noise / (k - 1) as f64;
    let unif = 1.0 / k as f64;
    let mut groups = Vec::with_capacity(4);
    let mut gains = Vec::new();
    for (i, &x) in s.inputs.iter().enumerate() {
        let total = s.totals[i];
        let label = rule.function_at(x).label(x);
        match label {
            None => add_group(&mut groups, unif, total),
            Some(l) => {
                let hits = s.counts[i * k + l];
                add_group(&mut groups, hit, hits);
                add_group(&mut groups, miss, total - hits);
            }
        }
        if memorize {
            if let Some(y) = s.consistent[i] {
                let value = match label {
                    None => unif,
                    Some(l) if l == y => hit,
                    Some(_) => miss,
                };
                let per = -value.ln();
                gains.push(Gain {
                    gain: total as f64 * per,
                    input: i,
                    value,
                    count: total,
                });
            }
        }
    }
    gains.sort_by(|a, b| b.gain.total_cmp(&a.gain).then(a.input.cmp(&b.input)));
    Profile { groups, gains }
}

/// Calls `f(pins, code, loss)` for every pin count of one base rule.
fn for_each_point(base_code: f64, p: &Profile, s: &Summary, mut f: impl FnMut(usize, f64, f64)) {
    let mut groups = p.groups.clone();
    let mut scratch = Vec::with_capacity(groups.len());
    for pins in 0..=p.gains.len() {
        scratch.clear();
        scratch.extend_from_slice(&groups);
        let loss = canonical_loss(&mut scratch);
        f(pins, s.pin_code(base_code, pins), loss);
        if let Some(g) = p.gains.get(pins) {
            let slot = groups
                .iter_mut()
                .find(|e| e.0 == g.value)
                .expect("pinned value present in groups");
            slot.1 -= g.count;
        }
    }
}

/// Keeps the points not dominated in (code, loss), plus the overall first
/// point so that an argmin always exists.
fn prune(points: &mut Vec<Candidate>) {
    points.sort_by(|a, b| a.frontier_cmp(b));
    let mut best = f64::INFINITY;
    let mut first = true;
    points.retain(|c| {
        let keep = first || c.loss < best;
        if keep {
            best = best.min(c.loss);
        }
        first = false;
        keep
    });
}

fn merge(mut a: Vec<Candidate>, b: Vec<Candidate>) -> Vec<Candidate> {
    a.extend(b);
    prune(&mut a);
    a
}

/// Oracle queries for one dataset against one family.
pub struct Oracle<'a> {
    fam: &'a HypothesisFamily,
    summary: Summary,
    frontier: Vec<Candidate>,
}

impl<'a> Oracle<'a> {
    pub fn new(fam: &'a HypothesisFamily, d: &Dataset) -> Result<Self> {
        match d.domain() {
            InputDomain::Discrete(m)
                if m == fam.domain_size() && d.num_labels() <= fam.num_labels() => {}
            other => {
                return Err(Error::IncompatibleHypothesis {
                    hypothesis: format!("discrete:{} K={}", fam.domain_size(), fam.num_labels()),
                    dataset: format!("{other} K={}", d.num_labels()),
                })
            }
        }
        let summary = Summary::new(d, fam.num_labels());
        let memorize = fam.spec().memorize;
        let bases = fam.bases();
        let frontier = par::map_reduce(
            bases.len(),
            CHUNK,
            Vec::new,
            |range| {
                let mut pts = Vec::new();
                for b in range {
                    let p = profile(&bases[b].rule, &summary, memorize);
                    for_each_point(bases[b].code, &p, &summary, |pins, code, loss| {
                        pts.push(Candidate {
                            base: b,
                            pins,
                            code,
                            loss,
                        })
                    });
                    if pts.len() > PRUNE_AT {
                        prune(&mut pts);
                    }
                }
                prune(&mut pts);
                pts
            },
            merge,
        );
        Ok(Oracle {
            fam,
            summary,
            frontier,
        })
    }

    pub fn family(&self) -> &HypothesisFamily {
        self.fam
    }

    /// Non-dominated (code, loss) points, sorted by increasing code.
    pub fn frontier(&self) -> &[Candidate] {
        &self.frontier
    }

    pub fn rule(&self, c: &Candidate) -> &BaseRule {
        &self.fam.bases()[c.base].rule
    }

    /// Number of distinct training inputs, the population pins index into.
    pub fn distinct_inputs(&self) -> usize {
        self.summary.distinct()
    }

    /// `ln C(n_distinct, s)`.
    pub fn subset_index_code(&self, s: usize) -> f64 {
        self.summary.ln_choose(s)
    }

    /// True for pin-free rules whose rows do not depend on the input.
    pub fn is_constant(&self, c: &Candidate) -> bool {
        c.pins == 0 && self.rule(c).is_input_independent()
    }

    /// Visits every enumerated hypothesis in enumeration order.
    pub fn for_each_candidate(&self, mut f: impl FnMut(Candidate)) {
        let memorize = self.fam.spec().memorize;
        for (b, base) in self.fam.bases().iter().enumerate() {
            let p = profile(&base.rule, &self.summary, memorize);
            for_each_point(base.code, &p, &self.summary, |pins, code, loss| {
                f(Candidate {
                    base: b,
                    pins,
                    code,
                    loss,
                })
            });
        }
    }

    /// Lagrangian minimizer with ties broken by code length then enumeration order.
    pub fn argmin(&self, beta: f64) -> Candidate {
        *self
            .frontier
            .iter()
            .min_by(|a, b| a.lagrangian_cmp(b, beta))
            .expect("frontier is never empty")
    }

    pub fn lagrangian(&self, beta: f64) -> f64 {
        self.argmin(beta).value(beta)
    }

    /// Same minimum as [`Oracle::argmin`] but scanning the whole family
    /// instead of the frontier.
    pub fn argmin_exhaustive(&self, beta: f64) -> Candidate {
        let bases = self.fam.bases();
        let memorize = self.fam.spec().memorize;
        let s = &self.summary;
        let best = par::map_reduce(
            bases.len(),
            CHUNK,
            || None,
            |range| {
                let mut best: Option<Candidate> = None;
                for b in range {
                    let p = profile(&bases[b].rule, s, memorize);
                    for_each_point(bases[b].code, &p, s, |pins, code, loss| {
                        let c = Candidate {
                            base: b,
                            pins,
                            code,
                            loss,
                        };
                        if best.is_none_or(|cur| c.lagrangian_cmp(&cur, beta).is_lt()) {
                            best = Some(c);
                        }
                    });
                }
                best
            },
            |a, b| match (a, b) {
                (Some(x), Some(y)) => Some(if y.lagrangian_cmp(&x, beta).is_lt() { y } else { x }),
                (x, None) => x,
                (None, y) => y,
            },
        );
        best.expect("family is nonempty")
    }

    /// `S(t)` and the witness code length; infinite when nothing fits.
    pub fn structure_value(&self, t: f64) -> (f64, f64) {
        // frontier codes increase and losses decrease, so the last point
        // within budget is the best
        let idx = self.frontier.partition_point(|c| c.code <= t);
        if idx == 0 {
            (f64::INFINITY, f64::INFINITY)
        } else {
            let c = &self.frontier[idx - 1];
            (c.loss, c.code)
        }
    }

    pub fn structure_function(&self, t_grid: &[f64]) -> Result<Curve> {
        let points = t_grid
            .iter()
            .map(|&t| {
                let (loss, complexity) = self.structure_value(t);
                CurvePoint {
                    x: t,
                    loss,
                    complexity,
                }
            })
            .collect();
        Curve::new(points)
    }

    pub fn lagrangian_curve(&self, betas: &[f64]) -> Result<Curve> {
        for &b in betas {
            if !(b >= 0.0) {
                return Err(Error::param(format!("beta {b} must be nonnegative")));
            }
        }
        let points = betas
            .iter()
            .map(|&beta| {
                let c = self.argmin(beta);
                CurvePoint {
                    x: beta,
                    loss: c.loss,
                    complexity: c.code,
                }
            })
            .collect();
        Curve::new(points)
    }

    /// Every hypothesis within `tol` of the minimum, in enumeration order.
    pub fn sufficient_statistics(&self, beta: f64, tol: f64) -> Vec<Statistic> {
        let min = self.lagrangian(beta);
        let mut out = Vec::new();
        self.for_each_candidate(|c| {
            let v = c.value(beta);
            if v <= min + tol {
                out.push(Statistic {
                    candidate: c,
                    value: v,
                    minimal: false,
                });
            }
        });
        let min_code = out
            .iter()
            .map(|s| s.candidate.code)
            .fold(f64::INFINITY, f64::min);
        for s in &mut out {
            s.minimal = s.candidate.code == min_code;
        }
        out
    }

    /// Smallest code length among the `tol`-sufficient set. The frontier
    /// always contains such a point.
    pub fn minimal_code(&self, beta: f64, tol: f64) -> f64 {
        let min = self.lagrangian(beta);
        self.frontier
            .iter()
            .filter(|c| c.value(beta) <= min + tol)
            .map(|c| c.code)
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `beta` at which the minimizer is not an input-independent
    /// rule, by bisection. Zero when a constant rule already wins at
    /// `beta = 0`; infinite if no constant rule ever wins.
    pub fn critical_beta(&self) -> f64 {
        if self.is_constant(&self.argmin(0.0)) {
            return 0.0;
        }
        let mut hi: f64 = 1.0;
        while !self.is_constant(&self.argmin(hi)) {
            hi *= 2.0;
            if hi > 1e15 {
                return f64::INFINITY;
            }
        }
        let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
        for _ in 0..200 {
            if hi - lo <= 1e-12 * hi.max(1.0) {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.is_constant(&self.argmin(mid)) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Cheapest deterministic zero-loss hypothesis, if any.
    pub fn deterministic_complexity(&self) -> Option<Candidate> {
        let s = &self.summary;
        let k = s.k;
        let memorize = self.fam.spec().memorize;
        let covers_domain = s.distinct() == self.fam.domain_size();
        let mut best: Option<Candidate> = None;
        for (b, base) in self.fam.bases().iter().enumerate() {
            let pins = if base.rule.is_deterministic() {
                let mut pins = 0;
                let mut ok = true;
                for (i, &x) in s.inputs.iter().enumerate() {
                    let l = base.rule.function_at(x).label(x).expect("deterministic");
                    if s.counts[i * k + l] == s.totals[i] {
                        continue;
                    }
                    if s.consistent[i].is_some() && memorize {
                        pins += 1;
                    } else {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    continue;
                }
                pins
            } else if matches!(base.rule, BaseRule::Leaf { .. })
                && self.fam.base_has_uniform_part(b)
                && covers_domain
                && memorize
                && s.consistent.iter().all(Option::is_some)
            {
                s.distinct()
            } else {
                continue;
            };
            let c = Candidate {
                base: b,
                pins,
                code: s.pin_code(base.code, pins),
                loss: 0.0,
            };
            let better = best.is_none_or(|cur| {
                c.code
                    .total_cmp(&cur.code)
                    .then(c.index_cmp(&cur))
                    .is_lt()
            });
            if better {
                best = Some(c);
            }
        }
        best
    }

    /// Builds the explicit table for a candidate.
    pub fn materialize(&self, c: &Candidate) -> Hypothesis {
        let base = &self.fam.bases()[c.base];
        let k = self.fam.num_labels();
        let m = self.fam.domain_size();
        let mut table = Vec::with_capacity(m * k);
        for x in 0..m {
            for y in 0..k {
                table.push(base.rule.prob(x, y, k));
            }
        }
        let p = profile(&base.rule, &self.summary, self.fam.spec().memorize);
        for g in &p.gains[..c.pins] {
            let x = self.summary.inputs[g.input];
            let y = self.summary.consistent[g.input].expect("pins are consistent");
            for (j, slot) in table[x * k..(x + 1) * k].iter_mut().enumerate() {
                *slot = if j == y { 1.0 } else { 0.0 };
            }
        }
        let desc = if c.pins == 0 {
            base.rule.to_string()
        } else {
            format!("{} + {} pinned", base.rule, c.pins)
        };
        Hypothesis::from_parts(table, k, c.code, desc)
    }
}

/// Tolerance used when deciding which statistics tie with the minimum.
pub(crate) fn sufficiency_tol(value: f64) -> f64 {
    1e-9 * value.abs().max(1.0)
}

/// `C(D) = min L_D(h) + code(h)` with its argmin.
pub fn complexity(d: &Dataset, fam: &HypothesisFamily) -> Result<(f64, Hypothesis)> {
    lagrangian_complexity(d, fam, 1.0)
}

/// `C_beta(D) = min L_D(h) + beta * code(h)` with its argmin.
pub fn lagrangian_complexity(
    d: &Dataset,
    fam: &HypothesisFamily,
    beta: f64,
) -> Result<(f64, Hypothesis)> {
    if !(beta >= 0.0) {
        return Err(Error::param(format!("beta {beta} must be nonnegative")));
    }
    let o = Oracle::new(fam, d)?;
    let c = o.argmin(beta);
    Ok((c.value(beta), o.materialize(&c)))
}

pub fn structure_function(d: &Dataset, fam: &HypothesisFamily, t_grid: &[f64]) -> Result<Curve> {
    Oracle::new(fam, d)?.structure_function(t_grid)
}

pub fn lagrangian_curve(d: &Dataset, fam: &HypothesisFamily, betas: &[f64]) -> Result<Curve> {
    Oracle::new(fam, d)?.lagrangian_curve(betas)
}

/// Statistics within `tol` of the `beta`-Lagrangian minimum, with their tables.
pub fn beta_sufficient_statistics(
    d: &Dataset,
    fam: &HypothesisFamily,
    beta: f64,
    tol: f64,
) -> Result<Vec<(Statistic, Hypothesis)>> {
    if !(tol >= 0.0) {
        return Err(Error::param("tolerance must be nonnegative"));
    }
    let o = Oracle::new(fam, d)?;
    Ok(o
        .sufficient_statistics(beta, tol)
        .into_iter()
        .map(|s| {
            let h = o.materialize(&s.candidate);
            (s, h)
        })
        .collect())
}

pub fn critical_beta(d: &Dataset, fam: &HypothesisFamily) -> Result<f64> {
    Ok(Oracle::new(fam, d)?.critical_beta())
}

pub fn deterministic_complexity(d: &Dataset, fam: &HypothesisFamily) -> Result<Option<f64>> {
    Ok(Oracle::new(fam, d)?.deterministic_complexity().map(|c| c.code))
}

/// `d_beta(d1 -> d2)`: extra code needed by a minimal statistic of `d1 ⊔ d2`
/// over a minimal statistic of `d1`, floored at zero. The family for the
/// union is instantiated from the same recipe as `fam`.
pub fn oracle_distance(d1: &Dataset, d2: &Dataset, fam: &HypothesisFamily, beta: f64) -> Result<f64> {
    Ok(oracle_distance_raw(d1, d2, fam, beta)?.max(0.0))
}

/// Unfloored distance.
pub fn oracle_distance_raw(
    d1: &Dataset,
    d2: &Dataset,
    fam: &HypothesisFamily,
    beta: f64,
) -> Result<f64> {
    let u = disjoint_union(d1, d2)?;
    let m = match u.domain() {
        InputDomain::Discrete(m) => m,
        other => {
            return Err(Error::IncompatibleHypothesis {
                hypothesis: "discrete family".into(),
                dataset: other.to_string(),
            })
        }
    };
    let k = fam.num_labels().max(u.num_labels());
    let fam_u = fam.spec().instantiate(m, k)?;
    let own;
    let fam_1 = match d1.domain() {
        InputDomain::Discrete(m1) if m1 == fam.domain_size() && k == fam.num_labels() => fam,
        InputDomain::Discrete(m1) => {
            own = fam.spec().instantiate(m1, k)?;
            &own
        }
        other => {
            return Err(Error::IncompatibleHypothesis {
                hypothesis: "discrete family".into(),
                dataset: other.to_string(),
            })
        }
    };
    let o1 = Oracle::new(fam_1, d1)?;
    let o12 = Oracle::new(&fam_u, &u)?;
    let c1 = o1.minimal_code(beta, sufficiency_tol(o1.lagrangian(beta)));
    let c12 = o12.minimal_code(beta, sufficiency_tol(o12.lagrangian(beta)));
    Ok(c12 - c1)
}

/// Monte-Carlo summary of `C(D)` over datasets drawn from a rule.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialReport {
    pub mean: f64,
    pub std_error: f64,
    /// Conditional entropy `H_p(y|x)` per sample under uniform inputs.
    pub entropy: f64,
    pub rule_code: f64,
    pub n: usize,
    pub values: Vec<f64>,
}

pub fn expected_complexity_trial(
    fam: &HypothesisFamily,
    rule: &BaseRule,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<TrialReport> {
    if n == 0 || trials == 0 {
        return Err(Error::param("n and trials must be at least 1"));
    }
    let h = Hypothesis::from_rule(fam, rule)?;
    let values = par::map_indexed(trials, |t| -> Result<f64> {
        let d = generate_planted_task(n, &h, 0.0, derive_seed(seed, t as u64))?;
        Ok(Oracle::new(fam, &d)?.lagrangian(1.0))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().sum::<f64>() / trials as f64;
    let var = if trials > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (trials - 1) as f64
    } else {
        0.0
    };
    Ok(TrialReport {
        mean,
        std_error: (var / trials as f64).sqrt(),
        entropy: h.conditional_entropy(),
        rule_code: h.code_length(),
        n,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::family::{FamilySpec, Function, RuleClass};
    use crate::oracle::empirical_loss;
    use crate::tasks::{apply_transform, generate_random_label_task, Sample, TaskTransform};
    use proptest::prelude::*;

    fn data(pairs: &[(usize, usize)], m: usize, k: usize) -> Dataset {
        Dataset::new(
            pairs
                .iter()
                .map(|&(x, y)| Sample {
                    input: Input::Discrete(x),
                    label: y,
                })
                .collect(),
            k,
            InputDomain::Discrete(m),
        )
        .unwrap()
    }

    fn parity_rule() -> BaseRule {
        BaseRule::Leaf {
            f: Function::Parity {
                mask: 0b0111,
                map: [0, 1],
            },
            noise: 0.0,
        }
    }

    /// Every explicit hypothesis of the family on a tiny dataset: all base
    /// rules, every subset of consistent inputs and every pinned labelling.
    fn naive_values(fam: &HypothesisFamily, d: &Dataset, beta: f64) -> Vec<(f64, f64, f64)> {
        let k = fam.num_labels();
        let m = fam.domain_size();
        let mut distinct: Vec<usize> = d
            .samples()
            .iter()
            .map(|s| match s.input {
                Input::Discrete(x) => x,
                _ => unreachable!(),
            })
            .collect();
        distinct.sort_unstable();
        distinct.dedup();
        let n = distinct.len();
        let ln_k = -(1.0 / k as f64).ln();
        let lnc = |s: usize| -> f64 {
            let f = |a: usize| (1..=a).map(|i| (i as f64).ln()).sum::<f64>();
            f(n) - f(s) - f(n - s)
        };
        let mut out = Vec::new();
        for base in fam.bases() {
            for subset in 0u32..(1 << n) {
                let chosen: Vec<usize> = (0..n).filter(|i| subset >> i & 1 == 1).map(|i| distinct[i]).collect();
                let s = chosen.len();
                for labels in 0..k.pow(s as u32) {
                    let mut table: Vec<f64> = (0..m)
                        .flat_map(|x| (0..k).map(move |y| (x, y)))
                        .map(|(x, y)| base.rule.prob(x, y, k))
                        .collect();
                    let mut l = labels;
                    for &x in &chosen {
                        let y = l % k;
                        l /= k;
                        for j in 0..k {
                            table[x * k + j] = if j == y { 1.0 } else { 0.0 };
                        }
                    }
                    let code = base.code + s as f64 * ln_k + lnc(s);
                    let h = Hypothesis::from_parts(table, k, code, String::new());
                    let loss = empirical_loss(&h, d).unwrap();
                    out.push((loss + beta * code, code, loss));
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_enumeration_on_tiny_data() {
        let fam = FamilySpec::default().instantiate(2, 2).unwrap();
        let d = data(&[(0, 1), (1, 0), (1, 0), (0, 1)], 2, 2);
        let o = Oracle::new(&fam, &d).unwrap();
        for beta in [0.0, 0.3, 1.0, 2.5] {
            let naive = naive_values(&fam, &d, beta);
            let min = naive.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
            assert_eq!(o.lagrangian(beta), min, "beta={beta}");
            assert_eq!(o.argmin_exhaustive(beta).value(beta), min);
        }
        let d2 = data(&[(0, 1), (0, 0), (1, 0), (1, 1)], 2, 2);
        let o2 = Oracle::new(&fam, &d2).unwrap();
        let naive = naive_values(&fam, &d2, 1.0);
        let min = naive.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
        assert_eq!(o2.lagrangian(1.0), min);
    }

    #[test]
    fn all_zero_labels_pick_constant_zero() {
        let fam = HypothesisFamily::new(16, 2).unwrap();
        let d = data(&[(1, 0), (3, 0), (7, 0), (9, 0), (12, 0), (3, 0)], 16, 2);
        let (value, h) = complexity(&d, &fam).unwrap();
        let want = BaseRule::Leaf {
            f: Function::Constant(0),
            noise: 0.0,
        };
        assert_eq!(h.description(), want.to_string());
        assert_eq!(value, fam.bases()[fam.find(&want).unwrap()].code);
    }

    #[test]
    fn planted_rule_is_recovered() {
        let fam = HypothesisFamily::new(16, 2).unwrap();
        let rule = parity_rule();
        let h = Hypothesis::from_rule(&fam, &rule).unwrap();
        let d = generate_planted_task(200, &h, 0.0, 4).unwrap();
        let o = Oracle::new(&fam, &d).unwrap();
        let c = o.argmin(1.0);
        assert_eq!(o.rule(&c), &rule);
        assert_eq!(c.pins, 0);
        assert_eq!(c.loss, 0.0);
        let det = o.deterministic_complexity().unwrap();
        assert_eq!(det.code, h.code_length());
        let s = o.structure_value(h.code_length());
        assert_eq!(s.0, 0.0);
        assert!(o.critical_beta() > 1.0);
    }

    #[test]
    fn contradictory_labels_have_no_deterministic_fit() {
        let fam = HypothesisFamily::new(4, 2).unwrap();
        let d = data(&[(0, 0), (0, 1)], 4, 2);
        assert_eq!(deterministic_complexity(&d, &fam).unwrap(), None);
        let d = data(&[(0, 0), (1, 1), (2, 1)], 4, 2);
        let det = deterministic_complexity(&d, &fam).unwrap().unwrap();
        assert!(complexity(&d, &fam).unwrap().0 <= det);
    }

    #[test]
    fn random_labels_memorizer_ties_uniform_at_beta_one() {
        let fam = HypothesisFamily::new(64, 2).unwrap();
        let d = generate_random_label_task(50, InputDomain::Discrete(64), 2, 1).unwrap();
        let o = Oracle::new(&fam, &d).unwrap();
        let stats = o.sufficient_statistics(1.0, 1e-9);
        let u = fam.uniform_index().unwrap();
        let uniform = stats.iter().find(|s| s.candidate.base == u && s.candidate.pins == 0).unwrap();
        let memorizer = stats.iter().find(|s| s.candidate.base == u && s.candidate.pins == 50).unwrap();
        assert!(uniform.minimal);
        assert!(!memorizer.minimal);
        let beta_star = o.critical_beta();
        assert!((beta_star - 1.0).abs() < 0.02, "{beta_star}");
        let (value, h) = complexity(&d, &fam).unwrap();
        assert!((value - 50.0 * 2f64.ln()).abs() <= h.code_length() + 1e-9);
    }

    #[test]
    fn beta_zero_is_min_loss_and_huge_beta_is_uniform() {
        let fam = HypothesisFamily::new(16, 2).unwrap();
        let h = Hypothesis::from_rule(&fam, &parity_rule()).unwrap();
        let d = generate_planted_task(40, &h, 0.1, 9).unwrap();
        let o = Oracle::new(&fam, &d).unwrap();
        let mut min_loss = f64::INFINITY;
        o.for_each_candidate(|c| min_loss = min_loss.min(c.loss));
        assert_eq!(o.lagrangian(0.0), min_loss);
        let c = o.argmin(1e6);
        assert_eq!(Some(c.base), fam.uniform_index());
        let stats = o.sufficient_statistics(1e6, 0.0);
        assert!(stats.iter().all(|s| o.is_constant(&s.candidate)));
    }

    #[test]
    fn label_randomization_raises_complexity() {
        let fam = HypothesisFamily::new(64, 2).unwrap();
        let h = Hypothesis::from_rule(&fam, &parity_rule()).unwrap();
        let d = generate_planted_task(60, &h, 0.0, 2).unwrap();
        let r = apply_transform(&d, &TaskTransform::LabelRandomization { seed: 5 }).unwrap();
        let c_planted = complexity(&d, &fam).unwrap().0;
        let (c_random, arg) = complexity(&r, &fam).unwrap();
        assert!(c_planted < 20.0);
        assert!((c_random - 60.0 * 2f64.ln()).abs() <= arg.code_length() + 1e-9);
    }

    #[test]
    fn zero_loss_hypothesis_has_zero_loss() {
        let fam = HypothesisFamily::new(8, 3).unwrap();
        let d = data(&[(0, 2), (5, 1), (5, 1), (7, 0)], 8, 3);
        let o = Oracle::new(&fam, &d).unwrap();
        let c = o.argmin(0.0);
        let h = o.materialize(&c);
        assert_eq!(empirical_loss(&h, &d).unwrap(), c.loss);
        assert_eq!(c.loss, 0.0);
    }

    #[test]
    fn distances_behave_on_planted_tasks() {
        let spec = FamilySpec {
            noise: vec![0.0, 0.1],
            ..FamilySpec::default()
        };
        let fam = spec.instantiate(64, 2).unwrap();
        let a = Hypothesis::from_rule(
            &fam,
            &BaseRule::Leaf {
                f: Function::Feature { bit: 0, map: [0, 1] },
                noise: 0.0,
            },
        )
        .unwrap();
        let b = Hypothesis::from_rule(
            &fam,
            &BaseRule::Leaf {
                f: Function::Parity { mask: 0b110, map: [1, 0] },
                noise: 0.0,
            },
        )
        .unwrap();
        let d1 = generate_planted_task(200, &a, 0.0, 1).unwrap();
        let d2 = generate_planted_task(200, &b, 0.0, 2).unwrap();
        assert_eq!(oracle_distance(&d1, &d1, &fam, 1.0).unwrap(), 0.0);
        let u = disjoint_union(&d1, &d2).unwrap();
        let fam_u = spec.instantiate(128, 2).unwrap();
        assert_eq!(oracle_distance(&u, &d1, &fam_u, 1.0).unwrap(), 0.0);
        assert!(oracle_distance(&d1, &d2, &fam, 1.0).unwrap() > 0.0);
    }

    #[test]
    fn mismatched_domain_is_rejected() {
        let fam = HypothesisFamily::new(8, 2).unwrap();
        let d = data(&[(0, 0)], 16, 2);
        assert!(matches!(Oracle::new(&fam, &d), Err(Error::IncompatibleHypothesis { .. })));
    }

    #[test]
    fn trial_report_for_deterministic_rule() {
        let spec = FamilySpec {
            classes: vec![RuleClass::Uniform, RuleClass::Constant, RuleClass::Feature, RuleClass::Parity],
            ..FamilySpec::default()
        };
        let fam = spec.instantiate(16, 2).unwrap();
        let r = expected_complexity_trial(&fam, &parity_rule(), 200, 8, 3).unwrap();
        let code = Hypothesis::from_rule(&fam, &parity_rule()).unwrap().code_length();
        assert_eq!(r.mean, code);
        assert_eq!(r.entropy, 0.0);
        assert!(expected_complexity_trial(&fam, &parity_rule(), 10, 0, 3).is_err());
    }

    fn arb_small() -> impl Strategy<Value = (Dataset, Vec<usize>)> {
        (prop::collection::vec((0usize..8, 0usize..2), 1..24), any::<u64>()).prop_map(|(pairs, seed)| {
            let d = data(&pairs, 8, 2);
            let mut perm: Vec<usize> = (0..pairs.len()).collect();
            let mut rng = crate::rng::stream_rng(seed, 0);
            use rand::seq::SliceRandom;
            perm.shuffle(&mut rng);
            (d, perm)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn permutation_invariance((d, perm) in arb_small()) {
            let fam = FamilySpec::flat().instantiate(8, 2).unwrap();
            let shuffled = Dataset::new(
                perm.iter().map(|&i| d.samples()[i].clone()).collect(),
                2,
                InputDomain::Discrete(8),
            ).unwrap();
            let a = Oracle::new(&fam, &d).unwrap();
            let b = Oracle::new(&fam, &shuffled).unwrap();
            prop_assert_eq!(a.frontier(), b.frontier());
            prop_assert_eq!(a.critical_beta(), b.critical_beta());
            prop_assert_eq!(a.deterministic_complexity(), b.deterministic_complexity());
        }

        #[test]
        fn legendre_duality_and_monotonicity((d, _) in arb_small(), beta in 0.0f64..4.0) {
            let fam = FamilySpec::flat().instantiate(8, 2).unwrap();
            let o = Oracle::new(&fam, &d).unwrap();
            let mut codes = Vec::new();
            o.for_each_candidate(|c| codes.push(c.code));
            codes.sort_by(f64::total_cmp);
            codes.dedup();
            let dual = codes
                .iter()
                .map(|&t| o.structure_value(t).0 + beta * t)
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(o.argmin_exhaustive(beta).value(beta), dual);
            prop_assert!(o.lagrangian(beta) <= o.lagrangian(beta + 0.5));
            let s: Vec<f64> = codes.iter().map(|&t| o.structure_value(t).0).collect();
            prop_assert!(s.windows(2).all(|w| w[1] <= w[0]));
            prop_assert_eq!(o.lagrangian(1.0), complexity(&d, &fam).unwrap().0);
        }
    }
}
