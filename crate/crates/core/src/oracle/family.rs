//! Prefix-coded hypothesis families.
//!
//! Every base rule has a code length built from self-delimiting pieces that
//! do not depend on the size of the input domain, so the same rule costs the
//! same number of NATS on a dataset and on any disjoint union containing it.

use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tasks::bit_width;

const FORMAT: &str = "family file";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleClass {
    Uniform,
    Constant,
    Feature,
    Parity,
    Split,
}

impl RuleClass {
    pub const ALL: [RuleClass; 5] = [
        RuleClass::Uniform,
        RuleClass::Constant,
        RuleClass::Feature,
        RuleClass::Parity,
        RuleClass::Split,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RuleClass::Uniform => "uniform",
            RuleClass::Constant => "constant",
            RuleClass::Feature => "feature",
            RuleClass::Parity => "parity",
            RuleClass::Split => "split",
        }
    }
}

impl std::str::FromStr for RuleClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RuleClass::ALL
            .into_iter()
            .find(|c| c.name() == s.trim())
            .ok_or_else(|| Error::param(format!("unknown rule class `{s}`")))
    }
}

/// The deterministic part of a rule: a map from inputs to labels, or the
/// uniform distribution.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Function {
    Uniform,
    Constant(usize),
    /// Label `map[bit_j(x)]`.
    Feature { bit: u32, map: [usize; 2] },
    /// Label `map[parity of the bits of x selected by mask]`.
    Parity { mask: u64, map: [usize; 2] },
}

impl Function {
    #[inline]
    pub fn label(&self, x: usize) -> Option<usize> {
        match *self {
            Function::Uniform => None,
            Function::Constant(c) => Some(c),
            Function::Feature { bit, map } => Some(map[(x >> bit) & 1]),
            Function::Parity { mask, map } => {
                Some(map[((x as u64 & mask).count_ones() & 1) as usize])
            }
        }
    }

    pub fn uses_bit(&self, b: u32) -> bool {
        match *self {
            Function::Feature { bit, .. } => bit == b,
            Function::Parity { mask, .. } => mask >> b & 1 == 1,
            _ => false,
        }
    }

    pub fn class(&self) -> RuleClass {
        match self {
            Function::Uniform => RuleClass::Uniform,
            Function::Constant(_) => RuleClass::Constant,
            Function::Feature { .. } => RuleClass::Feature,
            Function::Parity { .. } => RuleClass::Parity,
        }
    }

    /// Code length of the function body, excluding the class prefix.
    pub fn body_code(&self, k: usize) -> f64 {
        match *self {
            Function::Uniform => 0.0,
            Function::Constant(_) => (k as f64).ln(),
            Function::Feature { bit, .. } => index_code(bit as usize) + map_code(k),
            Function::Parity { mask, .. } => {
                let bits = mask_bits(mask);
                order_code(bits.len()) + positions_code(&bits) + map_code(k)
            }
        }
    }
}

impl fmt::Display for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Function::Uniform => write!(f, "uniform"),
            Function::Constant(c) => write!(f, "constant({c})"),
            Function::Feature { bit, map } => write!(f, "feature(bit {bit} -> {}/{})", map[0], map[1]),
            Function::Parity { mask, map } => {
                let bits: Vec<String> = mask_bits(*mask).iter().map(|b| b.to_string()).collect();
                write!(f, "parity(bits {} -> {}/{})", bits.join("+"), map[0], map[1])
            }
        }
    }
}

/// A base rule: one soft function, or a split on one input bit with a
/// function on each side. `noise` is the probability mass moved off the
/// function's label, spread evenly over the other labels.
#[derive(Clone, Debug, PartialEq)]
pub enum BaseRule {
    Leaf {
        f: Function,
        noise: f64,
    },
    Split {
        bit: u32,
        low: Function,
        high: Function,
        noise: f64,
    },
}

impl BaseRule {
    #[inline]
    pub fn function_at(&self, x: usize) -> &Function {
        match self {
            BaseRule::Leaf { f, .. } => f,
            BaseRule::Split { bit, low, high, .. } => {
                if (x >> bit) & 1 == 0 {
                    low
                } else {
                    high
                }
            }
        }
    }

    pub fn noise(&self) -> f64 {
        match *self {
            BaseRule::Leaf { noise, .. } | BaseRule::Split { noise, .. } => noise,
        }
    }

    /// `p(y|x)`.
    #[inline]
    pub fn prob(&self, x: usize, y: usize, k: usize) -> f64 {
        let noise = self.noise();
        match self.function_at(x).label(x) {
            None => 1.0 / k as f64,
            Some(l) if l == y => 1.0 - noise,
            Some(_) => noise / (k - 1) as f64,
        }
    }

    /// True when `p(y|x)` does not depend on `x`.
    pub fn is_input_independent(&self) -> bool {
        matches!(
            self,
            BaseRule::Leaf {
                f: Function::Uniform | Function::Constant(_),
                ..
            }
        )
    }

    /// True when every row is one-hot.
    pub fn is_deterministic(&self) -> bool {
        match self {
            BaseRule::Leaf { f, noise } => *f != Function::Uniform && *noise == 0.0,
            BaseRule::Split {
                low, high, noise, ..
            } => *low != Function::Uniform && *high != Function::Uniform && *noise == 0.0,
        }
    }

    fn has_uniform_part(&self) -> bool {
        match self {
            BaseRule::Leaf { f, .. } => *f == Function::Uniform,
            BaseRule::Split { low, high, .. } => {
                *low == Function::Uniform || *high == Function::Uniform
            }
        }
    }
}

impl fmt::Display for BaseRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseRule::Leaf {
                f: Function::Uniform,
                ..
            } => write!(f, "uniform"),
            BaseRule::Leaf { f: func, noise } => write!(f, "{func} noise={noise}"),
            BaseRule::Split {
                bit,
                low,
                high,
                noise,
            } => write!(f, "split(bit {bit}: {low} | {high}) noise={noise}"),
        }
    }
}

/// `ln((j+1)(j+2))`: a prefix code over the nonnegative integers whose
/// Kraft sum is exactly 1.
pub fn index_code(j: usize) -> f64 {
    ((j as f64 + 1.0) * (j as f64 + 2.0)).ln()
}

/// Code for a parity order `r >= 2`.
pub fn order_code(r: usize) -> f64 {
    debug_assert!(r >= 2);
    ((r as f64 - 1.0) * r as f64).ln()
}

/// Code for an ordered pair of distinct labels.
pub fn map_code(k: usize) -> f64 {
    (k as f64 * (k as f64 - 1.0)).ln()
}

/// Increasing bit positions coded as the first position followed by gaps.
fn positions_code(bits: &[u32]) -> f64 {
    let mut code = 0.0;
    let mut prev: Option<u32> = None;
    for &b in bits {
        let gap = match prev {
            None => b as usize,
            Some(p) => (b - p - 1) as usize,
        };
        code += index_code(gap);
        prev = Some(b);
    }
    code
}

pub(crate) fn mask_bits(mask: u64) -> Vec<u32> {
    (0..64).filter(|b| mask >> b & 1 == 1).collect()
}

/// The recipe for a family: which rule classes, which noise levels, and the
/// pricing constants. Instantiate it for a concrete domain and alphabet
/// with [`FamilySpec::instantiate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub classes: Vec<RuleClass>,
    pub noise: Vec<f64>,
    pub max_parity_order: usize,
    pub split_children: Vec<RuleClass>,
    pub split_max_parity_order: usize,
    pub memorize: bool,
    /// Per-class prefix costs in NATS; classes not listed get `ln(#classes)`.
    #[serde(default)]
    pub class_costs: Vec<(RuleClass, f64)>,
}

impl Default for FamilySpec {
    fn default() -> Self {
        FamilySpec {
            classes: RuleClass::ALL.to_vec(),
            noise: vec![0.0, 0.05, 0.1, 0.2, 0.3],
            max_parity_order: 3,
            split_children: vec![
                RuleClass::Uniform,
                RuleClass::Constant,
                RuleClass::Feature,
                RuleClass::Parity,
            ],
            split_max_parity_order: 2,
            memorize: true,
            class_costs: Vec::new(),
        }
    }
}

impl FamilySpec {
    /// Family without split rules; much smaller on wide domains.
    pub fn flat() -> Self {
        FamilySpec {
            classes: vec![
                RuleClass::Uniform,
                RuleClass::Constant,
                RuleClass::Feature,
                RuleClass::Parity,
            ],
            ..FamilySpec::default()
        }
    }

    fn validate(&self) -> Result<()> {
        for &e in &self.noise {
            if !(0.0..1.0).contains(&e) {
                return Err(Error::param(format!("noise level {e} outside [0,1)")));
            }
        }
        let mut sorted = self.noise.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() != self.noise.len() {
            return Err(Error::param("noise levels must be distinct"));
        }
        if self.split_children.contains(&RuleClass::Split) {
            return Err(Error::param("split children cannot themselves be splits"));
        }
        let kraft: f64 = self.classes.iter().map(|c| (-self.class_cost(*c)).exp()).sum();
        if kraft > 1.0 + 1e-12 {
            return Err(Error::param(format!(
                "class costs violate the Kraft budget (sum of exp(-cost) = {kraft})"
            )));
        }
        for (c, cost) in &self.class_costs {
            if !(cost.is_finite() && *cost >= 0.0) {
                return Err(Error::param(format!("cost of {} must be finite and >= 0", c.name())));
            }
        }
        Ok(())
    }

    pub fn class_cost(&self, c: RuleClass) -> f64 {
        self.class_costs
            .iter()
            .find(|(cc, _)| *cc == c)
            .map(|(_, v)| *v)
            .unwrap_or_else(|| (self.classes.len() as f64).ln())
    }

    fn noise_code(&self) -> f64 {
        if self.noise.len() <= 1 {
            0.0
        } else {
            (self.noise.len() as f64).ln()
        }
    }

    /// Enumerates every base rule over a domain of `domain_size` inputs and
    /// `k` labels, in a fixed order.
    pub fn instantiate(&self, domain_size: usize, k: usize) -> Result<HypothesisFamily> {
        if k < 2 {
            return Err(Error::InvalidAlphabet(k));
        }
        self.validate()?;
        let bits = bit_width(domain_size) as u32;
        if bits > 63 {
            return Err(Error::param("domain too large for the oracle"));
        }
        let mut bases = Vec::new();
        let noise_code = self.noise_code();
        for &class in &self.classes {
            let prefix = self.class_cost(class);
            if class == RuleClass::Split {
                let child_prefix = (self.split_children.len() as f64).ln();
                for bit in 0..bits {
                    let children: Vec<Function> = self
                        .split_children
                        .iter()
                        .flat_map(|c| functions(*c, bits, k, self.split_max_parity_order))
                        .filter(|f| !f.uses_bit(bit))
                        .collect();
                    for low in &children {
                        for high in &children {
                            if low == high {
                                continue;
                            }
                            let body = index_code(bit as usize)
                                + child_prefix
                                + low.body_code(k)
                                + child_prefix
                                + high.body_code(k);
                            let both_uniform =
                                *low == Function::Uniform && *high == Function::Uniform;
                            debug_assert!(!both_uniform);
                            for &noise in &self.noise {
                                bases.push(Base {
                                    rule: BaseRule::Split {
                                        bit,
                                        low: low.clone(),
                                        high: high.clone(),
                                        noise,
                                    },
                                    code: prefix + body + noise_code,
                                });
                            }
                        }
                    }
                }
            } else {
                for f in functions(class, bits, k, self.max_parity_order) {
                    if f == Function::Uniform {
                        bases.push(Base {
                            rule: BaseRule::Leaf { f, noise: 0.0 },
                            code: prefix,
                        });
                        continue;
                    }
                    let body = f.body_code(k);
                    for &noise in &self.noise {
                        bases.push(Base {
                            rule: BaseRule::Leaf {
                                f: f.clone(),
                                noise,
                            },
                            code: prefix + body + noise_code,
                        });
                    }
                }
            }
        }
        if bases.is_empty() {
            return Err(Error::NoHypothesis);
        }
        Ok(HypothesisFamily {
            spec: self.clone(),
            domain_size,
            num_labels: k,
            bases,
        })
    }

    /// Reads the family text format.
    pub fn read(r: impl BufRead) -> Result<FamilySpec> {
        let mut spec = FamilySpec::default();
        let mut saw_header = false;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let trimmed = line.trim();
            if !saw_header {
                if trimmed != "# taskinfo-family v1" {
                    return Err(Error::parse(FORMAT, lineno, "expected `# taskinfo-family v1` header"));
                }
                saw_header = true;
                continue;
            }
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| Error::parse(FORMAT, lineno, "expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let err = |m: String| Error::parse(FORMAT, lineno, m);
            let list = |v: &str| -> Vec<String> {
                v.split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            };
            match key {
                "classes" | "split_children" => {
                    let classes = list(value)
                        .iter()
                        .map(|s| s.parse::<RuleClass>())
                        .collect::<Result<Vec<_>>>()
                        .map_err(|e| err(e.to_string()))?;
                    if key == "classes" {
                        spec.classes = classes;
                    } else {
                        spec.split_children = classes;
                    }
                }
                "noise" => {
                    spec.noise = list(value)
                        .iter()
                        .map(|s| s.parse::<f64>().map_err(|_| err(format!("bad noise `{s}`"))))
                        .collect::<Result<_>>()?;
                }
                "max_parity_order" | "split_max_parity_order" => {
                    let v: usize = value
                        .parse()
                        .map_err(|_| err(format!("bad integer `{value}`")))?;
                    if key == "max_parity_order" {
                        spec.max_parity_order = v;
                    } else {
                        spec.split_max_parity_order = v;
                    }
                }
                "memorize" => {
                    spec.memorize = value
                        .parse()
                        .map_err(|_| err(format!("bad boolean `{value}`")))?;
                }
                _ if key.starts_with("cost.") => {
                    let class: RuleClass = key["cost.".len()..]
                        .parse()
                        .map_err(|e: Error| err(e.to_string()))?;
                    let cost: f64 = value.parse().map_err(|_| err(format!("bad cost `{value}`")))?;
                    spec.class_costs.retain(|(c, _)| *c != class);
                    spec.class_costs.push((class, cost));
                }
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        if !saw_header {
            return Err(Error::parse(FORMAT, 1, "empty family file"));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let names = |cs: &[RuleClass]| cs.iter().map(|c| c.name()).collect::<Vec<_>>().join(", ");
        let noise: Vec<String> = self.noise.iter().map(|n| n.to_string()).collect();
        let mut out = format!(
            "# taskinfo-family v1\nclasses = {}\nnoise = {}\nmax_parity_order = {}\nsplit_children = {}\nsplit_max_parity_order = {}\nmemorize = {}\n",
            names(&self.classes),
            noise.join(", "),
            self.max_parity_order,
            names(&self.split_children),
            self.split_max_parity_order,
            self.memorize
        );
        for (c, cost) in &self.class_costs {
            out.push_str(&format!("cost.{} = {}\n", c.name(), cost));
        }
        out
    }
}

/// All functions of one class over `bits` input bits, in enumeration order.
fn functions(class: RuleClass, bits: u32, k: usize, max_order: usize) -> Vec<Function> {
    let maps = || {
        (0..k).flat_map(move |a| (0..k).filter(move |&b| b != a).map(move |b| [a, b]))
    };
    match class {
        RuleClass::Uniform => vec![Function::Uniform],
        RuleClass::Constant => (0..k).map(Function::Constant).collect(),
        RuleClass::Feature => (0..bits)
            .flat_map(|bit| maps().map(move |map| Function::Feature { bit, map }))
            .collect(),
        RuleClass::Parity => {
            let mut out = Vec::new();
            for order in 2..=max_order.min(bits as usize) {
                for mask in masks_of_order(bits, order) {
                    out.extend(maps().map(|map| Function::Parity { mask, map }));
                }
            }
            out
        }
        RuleClass::Split => Vec::new(),
    }
}

/// Bit masks with exactly `order` ones below `bits`, in increasing numeric order.
fn masks_of_order(bits: u32, order: usize) -> Vec<u64> {
    let mut out: Vec<u64> = (0u64..1 << bits)
        .filter(|m| m.count_ones() as usize == order)
        .collect();
    out.sort_unstable();
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Base {
    pub rule: BaseRule,
    pub code: f64,
}

/// A family instantiated for one domain size and label alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct HypothesisFamily {
    spec: FamilySpec,
    domain_size: usize,
    num_labels: usize,
    bases: Vec<Base>,
}

impl HypothesisFamily {
    pub fn new(domain_size: usize, k: usize) -> Result<Self> {
        FamilySpec::default().instantiate(domain_size, k)
    }

    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn bases(&self) -> &[Base] {
        &self.bases
    }

    /// Index of the uniform rule, if the family has one.
    pub fn uniform_index(&self) -> Option<usize> {
        self.bases.iter().position(|b| {
            matches!(
                b.rule,
                BaseRule::Leaf {
                    f: Function::Uniform,
                    ..
                }
            )
        })
    }

    /// Looks up a base rule by structural equality.
    pub fn find(&self, rule: &BaseRule) -> Option<usize> {
        self.bases.iter().position(|b| &b.rule == rule)
    }

    /// Sum of `exp(-code)` over the base rules.
    pub fn kraft_sum(&self) -> f64 {
        self.bases.iter().map(|b| (-b.code).exp()).sum()
    }

    pub(crate) fn base_has_uniform_part(&self, i: usize) -> bool {
        self.bases[i].rule.has_uniform_part()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kraft_budget_holds() {
        for (m, k) in [(2, 2), (16, 2), (64, 3), (256, 2)] {
            let fam = HypothesisFamily::new(m, k).unwrap();
            assert!(fam.kraft_sum() <= 1.0 + 1e-12, "m={m} k={k}: {}", fam.kraft_sum());
        }
    }

    #[test]
    fn uniform_is_cheapest() {
        let fam = HypothesisFamily::new(16, 2).unwrap();
        let u = fam.uniform_index().unwrap();
        let min = fam.bases().iter().map(|b| b.code).fold(f64::INFINITY, f64::min);
        assert_eq!(fam.bases()[u].code, min);
    }

    #[test]
    fn code_lengths_do_not_depend_on_domain() {
        let small = HypothesisFamily::new(8, 2).unwrap();
        let large = HypothesisFamily::new(64, 2).unwrap();
        for b in small.bases() {
            let j = large.find(&b.rule).expect("rule present in larger domain");
            assert_eq!(large.bases()[j].code, b.code);
        }
    }

    #[test]
    fn split_children_avoid_split_bit() {
        let fam = HypothesisFamily::new(8, 2).unwrap();
        for b in fam.bases() {
            if let BaseRule::Split { bit, low, high, .. } = &b.rule {
                assert!(!low.uses_bit(*bit) && !high.uses_bit(*bit));
                assert_ne!(low, high);
            }
        }
    }

    #[test]
    fn family_file_round_trip_and_errors() {
        let mut spec = FamilySpec::flat();
        spec.class_costs.push((RuleClass::Uniform, 2.0));
        spec.class_costs.push((RuleClass::Parity, 3.0));
        let text = spec.to_text();
        assert_eq!(FamilySpec::read(text.as_bytes()).unwrap(), spec);

        let bad = "# taskinfo-family v1\nclasses = uniform\nbogus = 3\n";
        match FamilySpec::read(bad.as_bytes()) {
            Err(Error::Parse(p)) => assert_eq!(p.line, 3),
            other => panic!("{other:?}"),
        }
        let overspent = "# taskinfo-family v1\nclasses = uniform, constant\ncost.uniform = 0.1\ncost.constant = 0.1\n";
        assert!(FamilySpec::read(overspent.as_bytes()).is_err());
    }

    #[test]
    fn empty_family_is_an_error() {
        let spec = FamilySpec {
            classes: vec![],
            ..FamilySpec::default()
        };
        assert!(matches!(spec.instantiate(4, 2), Err(Error::NoHypothesis)));
    }

    #[test]
    fn parity_and_feature_labels() {
        let f = Function::Parity {
            mask: 0b101,
            map: [0, 1],
        };
        assert_eq!(f.label(0b001), Some(1));
        assert_eq!(f.label(0b101), Some(0));
        let g = Function::Feature { bit: 1, map: [1, 0] };
        assert_eq!(g.label(0b10), Some(0));
    }
}
