//! Exact enumeration over a finite prefix-coded hypothesis family.
//!
//! The description length of a hypothesis is an explicit code length in
//! NATS. Everything here is computed by brute force and is bit-reproducible:
//! losses are summed in a canonical order that depends only on the multiset
//! of assigned probabilities, never on sample order.

mod family;
mod search;

pub use family::{
    index_code, map_code, order_code, Base, BaseRule, FamilySpec, Function, HypothesisFamily,
    RuleClass,
};
pub use search::{
    complexity, critical_beta, deterministic_complexity, expected_complexity_trial,
    lagrangian_complexity, lagrangian_curve, oracle_distance, oracle_distance_raw, structure_function,
    beta_sufficient_statistics, Candidate, Oracle, Statistic, TrialReport,
};

use crate::error::{Error, Result};
use crate::tasks::{Dataset, Input, InputDomain};

/// A conditional table `p(y|x)` over a discrete domain with a code length.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    table: Vec<f64>,
    num_labels: usize,
    code_length: f64,
    description: String,
}

impl Hypothesis {
    /// Builds a hypothesis from a row-major `M x K` table.
    pub fn from_table(
        table: Vec<f64>,
        num_labels: usize,
        code_length: f64,
        description: impl Into<String>,
    ) -> Result<Self> {
        if num_labels < 2 {
            return Err(Error::InvalidAlphabet(num_labels));
        }
        if table.is_empty() || !table.len().is_multiple_of(num_labels) {
            return Err(Error::param("table size is not a multiple of the alphabet"));
        }
        if !(code_length.is_finite() && code_length >= 0.0) {
            return Err(Error::param("code length must be finite and nonnegative"));
        }
        for (x, row) in table.chunks(num_labels).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::param(format!("row {x} is not a distribution")));
            }
        }
        Ok(Hypothesis {
            table,
            num_labels,
            code_length,
            description: description.into(),
        })
    }

    pub(crate) fn from_parts(table: Vec<f64>, num_labels: usize, code: f64, desc: String) -> Self {
        Hypothesis {
            table,
            num_labels,
            code_length: code,
            description: desc,
        }
    }

    /// Materializes a base rule of `fam` without pins.
    pub fn from_rule(fam: &HypothesisFamily, rule: &BaseRule) -> Result<Self> {
        let i = fam
            .find(rule)
            .ok_or_else(|| Error::param(format!("rule `{rule}` is not in the family")))?;
        let base = &fam.bases()[i];
        let k = fam.num_labels();
        let mut table = Vec::with_capacity(fam.domain_size() * k);
        for x in 0..fam.domain_size() {
            for y in 0..k {
                table.push(base.rule.prob(x, y, k));
            }
        }
        Ok(Hypothesis::from_parts(table, k, base.code, base.rule.to_string()))
    }

    pub fn domain_size(&self) -> usize {
        self.table.len() / self.num_labels
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn code_length(&self) -> f64 {
        self.code_length
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.table[x * self.num_labels..(x + 1) * self.num_labels]
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.table[x * self.num_labels + y]
    }

    /// True when every row is the same distribution.
    pub fn is_constant(&self) -> bool {
        let first = self.row(0);
        (1..self.domain_size()).all(|x| self.row(x) == first)
    }

    /// True when every row is one-hot.
    pub fn is_deterministic(&self) -> bool {
        self.table.chunks(self.num_labels).all(|row| {
            row.iter().filter(|p| **p == 1.0).count() == 1 && row.iter().all(|p| *p == 0.0 || *p == 1.0)
        })
    }

    /// Conditional entropy `H(y|x)` under uniform inputs.
    pub fn conditional_entropy(&self) -> f64 {
        let total: f64 = self
            .table
            .chunks(self.num_labels)
            .map(|row| row.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum::<f64>())
            .sum();
        total / self.domain_size() as f64
    }
}

/// Sums `count * -ln(v)` over `(v, count)` groups in ascending `v`, merging
/// equal values first. The result depends only on the multiset.
pub(crate) fn canonical_loss(groups: &mut Vec<(f64, u64)>) -> f64 {
    groups.retain(|g| g.1 > 0);
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut i = 0;
    while i < groups.len() {
        let v = groups[i].0;
        let mut count = 0u64;
        while i < groups.len() && groups[i].0 == v {
            count += groups[i].1;
            i += 1;
        }
        if v <= 0.0 {
            return f64::INFINITY;
        }
        total += count as f64 * -v.ln();
    }
    total
}

fn check_domain(h: &Hypothesis, d: &Dataset) -> Result<usize> {
    match d.domain() {
        InputDomain::Discrete(m) if m == h.domain_size() && d.num_labels() <= h.num_labels() => {
            Ok(m)
        }
        other => Err(Error::IncompatibleHypothesis {
            hypothesis: format!("discrete:{} K={}", h.domain_size(), h.num_labels()),
            dataset: format!("{other} K={}", d.num_labels()),
        }),
    }
}

/// `sum_i -ln p(y_i | x_i)`, infinite if any assigned probability is zero.
pub fn empirical_loss(h: &Hypothesis, d: &Dataset) -> Result<f64> {
    check_domain(h, d)?;
    let mut groups: Vec<(f64, u64)> = Vec::new();
    for s in d.samples() {
        let x = match s.input {
            Input::Discrete(x) => x,
            Input::Real(_) => unreachable!("checked discrete domain"),
        };
        let p = h.prob(x, s.label);
        match groups.iter_mut().find(|g| g.0 == p) {
            Some(g) => g.1 += 1,
            None => groups.push((p, 1)),
        }
    }
    Ok(canonical_loss(&mut groups))
}

/// Maximum likelihood conditional table. Unseen inputs get the uniform row.
///
/// The attached code length is `(K-1) * M * ln(N+1)`: each of the `M(K-1)`
/// free counts is written as an integer in `0..=N`.
pub fn mle(d: &Dataset) -> Result<Hypothesis> {
    let m = match d.domain() {
        InputDomain::Discrete(m) => m,
        other => {
            return Err(Error::IncompatibleHypothesis {
                hypothesis: "discrete table".into(),
                dataset: other.to_string(),
            })
        }
    };
    let k = d.num_labels();
    let mut counts = vec![0u64; m * k];
    for s in d.samples() {
        if let Input::Discrete(x) = s.input {
            counts[x * k + s.label] += 1;
        }
    }
    let mut table = vec![0.0; m * k];
    for x in 0..m {
        let row = &counts[x * k..(x + 1) * k];
        let total: u64 = row.iter().sum();
        for y in 0..k {
            table[x * k + y] = if total == 0 {
                1.0 / k as f64
            } else {
                row[y] as f64 / total as f64
            };
        }
    }
    let code = (k - 1) as f64 * m as f64 * ((d.len() + 1) as f64).ln();
    Ok(Hypothesis::from_parts(table, k, code, "maximum likelihood table".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::Sample;

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

    #[test]
    fn hand_computed_loss() {
        let h = Hypothesis::from_table(
            vec![0.5, 0.5, 0.75, 0.25, 0.0, 1.0],
            2,
            1.0,
            "hand",
        )
        .unwrap();
        let d = data(&[(0, 0), (1, 1), (2, 1)], 3, 2);
        let l = empirical_loss(&h, &d).unwrap();
        assert!((l - (2f64.ln() + 4f64.ln())).abs() < 1e-12);
        assert!((l - 2.0794).abs() < 1e-4);
        let d0 = data(&[(2, 0)], 3, 2);
        assert_eq!(empirical_loss(&h, &d0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn uniform_loss_and_mismatch() {
        let fam = HypothesisFamily::new(4, 3).unwrap();
        let u = Hypothesis::from_rule(&fam, &fam.bases()[fam.uniform_index().unwrap()].rule).unwrap();
        let d = data(&[(0, 0), (1, 2), (3, 1), (3, 1)], 4, 3);
        assert!((empirical_loss(&u, &d).unwrap() - 4.0 * 3f64.ln()).abs() < 1e-12);
        let other = data(&[(0, 0)], 8, 3);
        assert!(matches!(
            empirical_loss(&u, &other),
            Err(Error::IncompatibleHypothesis { .. })
        ));
    }

    #[test]
    fn mle_rows() {
        let d = data(&[(0, 1), (0, 1), (1, 0), (1, 1)], 3, 2);
        let h = mle(&d).unwrap();
        assert_eq!(h.row(0), &[0.0, 1.0]);
        assert_eq!(h.row(1), &[0.5, 0.5]);
        assert_eq!(h.row(2), &[0.5, 0.5]);
        assert!((h.code_length() - 3.0 * 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn mle_beats_a_dense_grid_of_tables() {
        let d = data(&[(0, 1), (0, 0), (0, 1), (1, 0), (1, 0), (1, 1), (1, 0)], 2, 2);
        let best = empirical_loss(&mle(&d).unwrap(), &d).unwrap();
        for a in 1..50 {
            for b in 1..50 {
                let (p, q) = (a as f64 / 50.0, b as f64 / 50.0);
                let h = Hypothesis::from_table(vec![1.0 - p, p, 1.0 - q, q], 2, 0.0, "grid").unwrap();
                assert!(best <= empirical_loss(&h, &d).unwrap() + 1e-12);
            }
        }
    }

    #[test]
    fn canonical_loss_merges_equal_values() {
        let mut a = vec![(0.5, 2), (0.25, 1), (0.5, 1)];
        let mut b = vec![(0.25, 1), (0.5, 3)];
        assert_eq!(canonical_loss(&mut a), canonical_loss(&mut b));
    }
}
