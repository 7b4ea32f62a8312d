//! Hyperparameter spaces and their box-constrained encoding.
//!
//! Scalar parameters map to one dimension each. A [`LayeredGroup`] of up to
//! `u` hidden layers maps either to `u` size variables plus a count variable
//! in `[0, u]` (only the first `count` sizes are used), or, in the naive
//! encoding, to `u` size variables in `[0, l]` where zeros mean "no layer".
//!
//! Dimension order: parameters in declaration order, then groups in
//! declaration order; within a group the size variables come first.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::ConfigError;
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Continuous,
    /// `low`/`high` bound the base-10 exponent.
    Log10Continuous,
    Integer,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default)]
    pub low: f64,
    #[serde(default)]
    pub high: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl ParamSpec {
    pub fn continuous(name: &str, low: f64, high: f64) -> Self {
        Self { name: name.into(), kind: ParamKind::Continuous, low, high, categories: vec![] }
    }

    /// Log-scale parameter given by its exponent range.
    pub fn log10(name: &str, low_exp: f64, high_exp: f64) -> Self {
        Self { name: name.into(), kind: ParamKind::Log10Continuous, low: low_exp, high: high_exp, categories: vec![] }
    }

    /// Log-scale parameter given by its value range, e.g. `1e-4..1e-1`.
    pub fn log10_range(name: &str, low: f64, high: f64) -> Self {
        Self::log10(name, low.log10(), high.log10())
    }

    pub fn integer(name: &str, low: i64, high: i64) -> Self {
        Self { name: name.into(), kind: ParamKind::Integer, low: low as f64, high: high as f64, categories: vec![] }
    }

    pub fn categorical<S: Into<String>>(name: &str, categories: impl IntoIterator<Item = S>) -> Self {
        let categories: Vec<String> = categories.into_iter().map(Into::into).collect();
        let high = categories.len().saturating_sub(1) as f64;
        Self { name: name.into(), kind: ParamKind::Categorical, low: 0.0, high, categories }
    }

    fn bounds(&self) -> (f64, f64) {
        match self.kind {
            ParamKind::Categorical => (0.0, self.categories.len().saturating_sub(1) as f64),
            _ => (self.low, self.high),
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(format!("parameter '{}': {msg}", self.name)));
        match self.kind {
            ParamKind::Categorical if self.categories.len() < 2 => bad("needs at least 2 categories".into()),
            ParamKind::Categorical => Ok(()),
            ParamKind::Integer if self.low.fract() != 0.0 || self.high.fract() != 0.0 => {
                bad("integer bounds must be integers".into())
            }
            _ if !(self.low < self.high) => bad(format!("low {} must be below high {}", self.low, self.high)),
            _ => Ok(()),
        }
    }
}

/// Up to `max_layers` hidden layers whose sizes range over
/// `size_low..=size_high` in multiples of `size_step`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayeredGroup {
    pub name: String,
    pub max_layers: usize,
    pub size_low: u64,
    pub size_high: u64,
    #[serde(default = "one")]
    pub size_step: u64,
}

fn one() -> u64 {
    1
}

impl LayeredGroup {
    pub fn new(name: &str, max_layers: usize, size_low: u64, size_high: u64, size_step: u64) -> Self {
        Self { name: name.into(), max_layers, size_low, size_high, size_step }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(format!("group '{}': {msg}", self.name)));
        if self.max_layers == 0 {
            return bad("max_layers must be at least 1");
        }
        if self.size_step == 0 || self.size_low == 0 {
            return bad("size_low and size_step must be at least 1");
        }
        if self.size_low % self.size_step != 0 || self.size_high % self.size_step != 0 {
            return bad("size bounds must be multiples of size_step");
        }
        if self.size_high <= self.size_low {
            return bad("size_high must exceed size_low");
        }
        Ok(())
    }

    /// Bounds of one size variable, in multiples of the step.
    fn size_bounds(&self, encoding: Encoding) -> (f64, f64) {
        let hi = (self.size_high / self.size_step) as f64;
        match encoding {
            Encoding::CountVariable => ((self.size_low / self.size_step) as f64, hi),
            Encoding::Naive => (0.0, hi),
        }
    }

    fn width(&self, encoding: Encoding) -> usize {
        match encoding {
            Encoding::CountVariable => self.max_layers + 1,
            Encoding::Naive => self.max_layers,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    #[default]
    CountVariable,
    Naive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpoSpace {
    #[serde(default)]
    pub params: Vec<ParamSpec>,
    #[serde(default)]
    pub groups: Vec<LayeredGroup>,
    #[serde(default)]
    pub encoding: Encoding,
}

/// A decoded value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Label(String),
    Layers(Vec<u64>),
}

pub type Configuration = BTreeMap<String, ParamValue>;

impl HpoSpace {
    pub fn new(params: Vec<ParamSpec>, groups: Vec<LayeredGroup>, encoding: Encoding) -> Result<Self, ConfigError> {
        let space = Self { params, groups, encoding };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.params.is_empty() && self.groups.is_empty() {
            return Err(ConfigError::Invalid("space has no parameters".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for name in self.params.iter().map(|p| &p.name).chain(self.groups.iter().map(|g| &g.name)) {
            if !names.insert(name) {
                return Err(ConfigError::Invalid(format!("duplicate parameter name '{name}'")));
            }
        }
        self.params.iter().try_for_each(ParamSpec::validate)?;
        self.groups.iter().try_for_each(LayeredGroup::validate)
    }

    pub fn dim(&self) -> usize {
        self.params.len() + self.groups.iter().map(|g| g.width(self.encoding)).sum::<usize>()
    }

    pub fn to_domain(&self) -> Result<BoxDomain, ConfigError> {
        self.validate()?;
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        let mut integer = Vec::new();
        for p in &self.params {
            let (lo, hi) = p.bounds();
            if matches!(p.kind, ParamKind::Integer | ParamKind::Categorical) {
                integer.push(lower.len());
            }
            lower.push(lo);
            upper.push(hi);
        }
        for g in &self.groups {
            let (lo, hi) = g.size_bounds(self.encoding);
            for _ in 0..g.max_layers {
                integer.push(lower.len());
                lower.push(lo);
                upper.push(hi);
            }
            if self.encoding == Encoding::CountVariable {
                integer.push(lower.len());
                lower.push(0.0);
                upper.push(g.max_layers as f64);
            }
        }
        Ok(BoxDomain::new(lower, upper, integer)?)
    }

    /// Maps a box point to a concrete configuration.
    pub fn decode(&self, x: &[f64]) -> Result<Configuration, ConfigError> {
        let domain = self.to_domain()?;
        domain.scale_to_unit(x)?;
        let x = domain.snap_integers(x);
        let mut out = Configuration::new();
        for (p, &v) in self.params.iter().zip(&x) {
            let value = match p.kind {
                ParamKind::Continuous => ParamValue::Real(v),
                ParamKind::Log10Continuous => ParamValue::Real(10f64.powf(v)),
                ParamKind::Integer => ParamValue::Int(v as i64),
                ParamKind::Categorical => ParamValue::Label(p.categories[v as usize].clone()),
            };
            out.insert(p.name.clone(), value);
        }
        let mut offset = self.params.len();
        for g in &self.groups {
            let sizes = &x[offset..offset + g.max_layers];
            let layers: Vec<u64> = match self.encoding {
                Encoding::CountVariable => {
                    let count = x[offset + g.max_layers] as usize;
                    sizes[..count].iter().map(|&s| s as u64 * g.size_step).collect()
                }
                Encoding::Naive => sizes
                    .iter()
                    .filter(|&&s| s > 0.0)
                    .map(|&s| s as u64 * g.size_step)
                    .collect(),
            };
            out.insert(g.name.clone(), ParamValue::Layers(layers));
            offset += g.width(self.encoding);
        }
        Ok(out)
    }

    /// Monte Carlo mean of the total decoded layer size over uniform box draws.
    pub fn expected_decoded_cost(&self, samples: usize, stream: &RngStream) -> Result<f64, ConfigError> {
        if self.groups.is_empty() {
            return Err(ConfigError::Invalid("space has no layered group".into()));
        }
        if samples == 0 {
            return Err(ConfigError::Invalid("need at least one sample".into()));
        }
        let domain = self.to_domain()?;
        let mut rng = stream.rng();
        let mut total = 0.0;
        for _ in 0..samples {
            let x = domain.sample_uniform(&mut rng);
            let config = self.decode(&x)?;
            total += self
                .groups
                .iter()
                .map(|g| match &config[&g.name] {
                    ParamValue::Layers(l) => l.iter().sum::<u64>() as f64,
                    _ => 0.0,
                })
                .sum::<f64>();
        }
        Ok(total / samples as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::DomainError;

    fn layers(c: &Configuration, name: &str) -> Vec<u64> {
        match &c[name] {
            ParamValue::Layers(l) => l.clone(),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn learning_rate_exponent_bounds() {
        let s = HpoSpace::new(vec![ParamSpec::log10_range("lr", 1e-4, 1e-1)], vec![], Encoding::CountVariable).unwrap();
        let d = s.to_domain().unwrap();
        assert!((d.lower()[0] + 4.0).abs() < 1e-12 && (d.upper()[0] + 1.0).abs() < 1e-12);
        assert!(d.integer_dims().is_empty());
        let c = s.decode(&[d.lower()[0]]).unwrap();
        match c["lr"] {
            ParamValue::Real(v) => assert!((v - 1e-4).abs() < 1e-16),
            ref other => panic!("{other:?}"),
        }
    }

    #[test]
    fn activation_categorical() {
        let s = HpoSpace::new(
            vec![ParamSpec::categorical("act", ["relu", "linear", "sigmoid"])],
            vec![],
            Encoding::CountVariable,
        )
        .unwrap();
        let d = s.to_domain().unwrap();
        assert_eq!((d.lower(), d.upper(), d.integer_dims()), (&[0.0][..], &[2.0][..], &[0usize][..]));
        assert_eq!(s.decode(&[2.0]).unwrap()["act"], ParamValue::Label("sigmoid".into()));
    }

    #[test]
    fn layered_group_domain() {
        let s = HpoSpace::new(vec![], vec![LayeredGroup::new("fc", 3, 10, 500, 10)], Encoding::CountVariable).unwrap();
        let d = s.to_domain().unwrap();
        assert_eq!(d.lower(), &[1.0, 1.0, 1.0, 0.0]);
        assert_eq!(d.upper(), &[50.0, 50.0, 50.0, 3.0]);
        assert_eq!(d.integer_dims(), &[0, 1, 2, 3]);
    }

    #[test]
    fn five_layer_decode_example() {
        let s = HpoSpace::new(vec![], vec![LayeredGroup::new("hidden", 5, 1, 100, 1)], Encoding::CountVariable).unwrap();
        let c = s.decode(&[20.0, 10.0, 30.0, 10.0, 40.0, 3.0]).unwrap();
        assert_eq!(layers(&c, "hidden"), vec![20, 10, 30]);
        let c = s.decode(&[20.0, 10.0, 30.0, 10.0, 40.0, 0.0]).unwrap();
        assert!(layers(&c, "hidden").is_empty());
    }

    #[test]
    fn count_increment_appends_one_layer() {
        let s = HpoSpace::new(vec![], vec![LayeredGroup::new("h", 4, 1, 9, 1)], Encoding::CountVariable).unwrap();
        let mut x = vec![3.0, 7.0, 1.0, 9.0, 0.0];
        let mut prev = layers(&s.decode(&x).unwrap(), "h");
        for c in 1..=4 {
            x[4] = c as f64;
            let cur = layers(&s.decode(&x).unwrap(), "h");
            assert_eq!(cur.len(), prev.len() + 1);
            assert_eq!(&cur[..prev.len()], &prev[..]);
            prev = cur;
        }
    }

    #[test]
    fn naive_skips_zeros() {
        let s = HpoSpace::new(vec![], vec![LayeredGroup::new("h", 4, 10, 100, 10)], Encoding::Naive).unwrap();
        let d = s.to_domain().unwrap();
        assert_eq!(d.lower(), &[0.0; 4]);
        assert_eq!(d.upper(), &[10.0; 4]);
        assert_eq!(layers(&s.decode(&[3.0, 0.0, 5.0, 0.0]).unwrap(), "h"), vec![30, 50]);
    }

    #[test]
    fn decode_rejects_out_of_box() {
        let s = HpoSpace::new(vec![ParamSpec::continuous("m", 0.05, 0.95)], vec![], Encoding::CountVariable).unwrap();
        assert!(matches!(s.decode(&[1.0]), Err(ConfigError::Domain(DomainError::OutOfBounds { .. }))));
        assert!(matches!(s.decode(&[0.5, 0.5]), Err(ConfigError::Domain(DomainError::DimensionMismatch { .. }))));
    }

    #[test]
    fn mixed_space_layout() {
        let s = HpoSpace::new(
            vec![
                ParamSpec::log10("lr", -4.0, -1.0),
                ParamSpec::continuous("momentum", 0.05, 0.95),
                ParamSpec::integer("batch", 16, 256),
            ],
            vec![LayeredGroup::new("conv", 2, 10, 500, 10), LayeredGroup::new("fc", 2, 10, 500, 10)],
            Encoding::CountVariable,
        )
        .unwrap();
        assert_eq!(s.dim(), 3 + 3 + 3);
        let d = s.to_domain().unwrap();
        assert_eq!(d.integer_dims(), &[2, 3, 4, 5, 6, 7, 8]);
        let c = s.decode(&[-2.0, 0.5, 64.0, 5.0, 6.0, 1.0, 50.0, 2.0, 2.0]).unwrap();
        assert_eq!(c["batch"], ParamValue::Int(64));
        assert_eq!(layers(&c, "conv"), vec![50]);
        assert_eq!(layers(&c, "fc"), vec![500, 20]);
    }

    #[test]
    fn invalid_spaces() {
        assert!(HpoSpace::new(vec![], vec![], Encoding::Naive).is_err());
        assert!(HpoSpace::new(vec![ParamSpec::categorical("a", ["x"])], vec![], Encoding::Naive).is_err());
        assert!(HpoSpace::new(vec![ParamSpec::continuous("a", 1.0, 1.0)], vec![], Encoding::Naive).is_err());
        assert!(HpoSpace::new(vec![], vec![LayeredGroup::new("g", 2, 15, 500, 10)], Encoding::Naive).is_err());
        assert!(HpoSpace::new(
            vec![ParamSpec::continuous("a", 0.0, 1.0)],
            vec![LayeredGroup::new("a", 2, 10, 500, 10)],
            Encoding::Naive
        )
        .is_err());
    }

    #[test]
    fn decoded_cost_needs_group() {
        let s = HpoSpace::new(vec![ParamSpec::continuous("a", 0.0, 1.0)], vec![], Encoding::Naive).unwrap();
        assert!(s.expected_decoded_cost(10, &RngStream::new(0, "mc")).is_err());
    }

    #[test]
    fn decoded_cost_matches_closed_form() {
        // count ~ U{0..4}, size ~ U{1..100}: E = 2 · 50.5 = 101.
        // naive size ~ U{0..100}: E = 4 · 50 = 200.
        let cv = HpoSpace::new(vec![], vec![LayeredGroup::new("h", 4, 1, 100, 1)], Encoding::CountVariable).unwrap();
        let nv = HpoSpace::new(vec![], vec![LayeredGroup::new("h", 4, 1, 100, 1)], Encoding::Naive).unwrap();
        let a = cv.expected_decoded_cost(100_000, &RngStream::new(1, "mc")).unwrap();
        let b = nv.expected_decoded_cost(100_000, &RngStream::new(2, "mc")).unwrap();
        assert!((a - 101.0).abs() / 101.0 < 0.02, "{a}");
        assert!((b - 200.0).abs() / 200.0 < 0.02, "{b}");
        assert!(((b / a) - 200.0 / 101.0).abs() / (200.0 / 101.0) < 0.02);
    }
}
