//! Bounded mixed parameter domains and points inside them.
//!
//! A [`ParamSpace`] is an ordered list of named domains, each continuous
//! (closed real interval), integer (inclusive range) or categorical (ordered
//! labels). A [`Config`] holds one [`Value`] per domain, in domain order.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Continuous { lo: f64, hi: f64 },
    Integer { lo: i64, hi: i64 },
    Categorical { choices: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDomain {
    pub name: String,
    #[serde(flatten)]
    pub kind: DomainKind,
}

impl ParamDomain {
    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            kind: DomainKind::Continuous { lo, hi },
        }
    }

    pub fn integer(name: impl Into<String>, lo: i64, hi: i64) -> Self {
        Self {
            name: name.into(),
            kind: DomainKind::Integer { lo, hi },
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        choices: impl IntoIterator<Item = S>,
    ) -> Self {
        Self {
            name: name.into(),
            kind: DomainKind::Categorical {
                choices: choices.into_iter().map(Into::into).collect(),
            },
        }
    }

    fn check(&self) -> Result<()> {
        match &self.kind {
            DomainKind::Continuous { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidSpace(format!(
                        "`{}` needs finite bounds with lo < hi, got [{lo}, {hi}]",
                        self.name
                    )));
                }
            }
            DomainKind::Integer { lo, hi } => {
                if lo >= hi {
                    return Err(Error::InvalidSpace(format!(
                        "`{}` needs lo < hi, got [{lo}, {hi}]",
                        self.name
                    )));
                }
            }
            DomainKind::Categorical { choices } => {
                let distinct: HashSet<&String> = choices.iter().collect();
                if choices.len() < 2 || distinct.len() != choices.len() {
                    return Err(Error::InvalidSpace(format!(
                        "`{}` needs at least 2 distinct choices",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Natural log of the uniform density (or mass) over this domain.
    pub fn log_uniform_density(&self) -> f64 {
        match &self.kind {
            DomainKind::Continuous { lo, hi } => -(hi - lo).ln(),
            DomainKind::Integer { lo, hi } => -((hi - lo + 1) as f64).ln(),
            DomainKind::Categorical { choices } => -(choices.len() as f64).ln(),
        }
    }

    fn contains(&self, value: &Value) -> std::result::Result<(), ViolationKind> {
        match (&self.kind, value) {
            (DomainKind::Continuous { lo, hi }, Value::Real(v)) => {
                if v.is_finite() && lo <= v && v <= hi {
                    Ok(())
                } else {
                    Err(ViolationKind::OutOfBounds)
                }
            }
            (DomainKind::Integer { lo, hi }, Value::Int(v)) => {
                if lo <= v && v <= hi {
                    Ok(())
                } else {
                    Err(ViolationKind::OutOfBounds)
                }
            }
            (DomainKind::Categorical { choices }, Value::Choice(i)) => {
                if *i < choices.len() {
                    Ok(())
                } else {
                    Err(ViolationKind::OutOfBounds)
                }
            }
            _ => Err(ViolationKind::WrongType),
        }
    }
}

/// The search domain. Immutable once built; construction enforces the domain invariants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParamDomain>", into = "Vec<ParamDomain>")]
pub struct ParamSpace {
    domains: Vec<ParamDomain>,
}

impl TryFrom<Vec<ParamDomain>> for ParamSpace {
    type Error = Error;

    fn try_from(domains: Vec<ParamDomain>) -> Result<Self> {
        Self::new(domains)
    }
}

impl From<ParamSpace> for Vec<ParamDomain> {
    fn from(space: ParamSpace) -> Self {
        space.domains
    }
}

impl ParamSpace {
    pub fn new(domains: Vec<ParamDomain>) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::InvalidSpace(
                "at least one domain is required".into(),
            ));
        }
        let mut names = HashSet::new();
        for d in &domains {
            d.check()?;
            if !names.insert(d.name.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate name `{}`", d.name)));
            }
        }
        Ok(Self { domains })
    }

    pub fn domains(&self) -> &[ParamDomain] {
        &self.domains
    }

    /// Dimension count `m`.
    pub fn dim(&self) -> usize {
        self.domains.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.domains.iter().position(|d| d.name == name)
    }

    pub fn validate(&self, config: &Config) -> std::result::Result<(), Vec<Violation>> {
        if config.len() != self.dim() {
            return Err(vec![Violation {
                index: None,
                name: None,
                kind: ViolationKind::LengthMismatch {
                    expected: self.dim(),
                    got: config.len(),
                },
            }]);
        }
        let violations: Vec<Violation> = self
            .domains
            .iter()
            .zip(config.values())
            .enumerate()
            .filter_map(|(i, (d, v))| {
                d.contains(v).err().map(|kind| Violation {
                    index: Some(i),
                    name: Some(d.name.clone()),
                    kind,
                })
            })
            .collect();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// Like [`ParamSpace::validate`], folded into the crate error type.
    pub fn check(&self, config: &Config) -> Result<()> {
        self.validate(config).map_err(Error::InvalidConfig)
    }

    /// Draws every coordinate independently and uniformly over its domain.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Config {
        let values = self
            .domains
            .iter()
            .map(|d| match &d.kind {
                DomainKind::Continuous { lo, hi } => Value::Real(rng.random_range(*lo..=*hi)),
                DomainKind::Integer { lo, hi } => Value::Int(rng.random_range(*lo..=*hi)),
                DomainKind::Categorical { choices } => {
                    Value::Choice(rng.random_range(0..choices.len()))
                }
            })
            .collect();
        Config::new(values)
    }

    /// Log density of the uniform distribution over the whole space.
    pub fn log_uniform_density(&self) -> f64 {
        self.domains
            .iter()
            .map(ParamDomain::log_uniform_density)
            .sum()
    }

    /// Serializes a config as a JSON object keyed by domain name, with
    /// categorical values written as their labels.
    pub fn config_to_json(&self, config: &Config) -> Result<Map<String, Json>> {
        self.check(config)?;
        let mut map = Map::with_capacity(self.dim());
        for (d, v) in self.domains.iter().zip(config.values()) {
            let json = match (&d.kind, v) {
                (DomainKind::Continuous { .. }, Value::Real(x)) => Json::from(*x),
                (DomainKind::Integer { .. }, Value::Int(x)) => Json::from(*x),
                (DomainKind::Categorical { choices }, Value::Choice(i)) => {
                    Json::from(choices[*i].clone())
                }
                _ => unreachable!("validated above"),
            };
            map.insert(d.name.clone(), json);
        }
        Ok(map)
    }

    pub fn config_from_json(&self, object: &Map<String, Json>) -> Result<Config> {
        let mut violations = Vec::new();
        let mut values = Vec::with_capacity(self.dim());
        for (i, d) in self.domains.iter().enumerate() {
            let parsed = object.get(&d.name).and_then(|json| match &d.kind {
                DomainKind::Continuous { .. } => json.as_f64().map(Value::Real),
                DomainKind::Integer { .. } => json.as_i64().map(Value::Int),
                DomainKind::Categorical { choices } => json
                    .as_str()
                    .and_then(|s| choices.iter().position(|c| c == s))
                    .map(Value::Choice),
            });
            match parsed {
                Some(v) => values.push(v),
                None => violations.push(Violation {
                    index: Some(i),
                    name: Some(d.name.clone()),
                    kind: ViolationKind::WrongType,
                }),
            }
        }
        for key in object.keys() {
            if self.index_of(key).is_none() {
                violations.push(Violation {
                    index: None,
                    name: Some(key.clone()),
                    kind: ViolationKind::UnknownName,
                });
            }
        }
        if !violations.is_empty() {
            return Err(Error::InvalidConfig(violations));
        }
        let config = Config::new(values);
        self.check(&config)?;
        Ok(config)
    }
}

/// A single coordinate value. Categorical values are indices into the domain's choice list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Real(f64),
    Int(i64),
    Choice(usize),
}

impl Value {
    /// Numeric view used by kernels; categorical indices map to their position.
    pub fn as_f64(&self) -> f64 {
        match *self {
            Value::Real(x) => x,
            Value::Int(x) => x as f64,
            Value::Choice(i) => i as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config(Vec<Value>);

impl Config {
    pub fn new(values: Vec<Value>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Value> {
        self.0.get(index)
    }
}

impl std::ops::Index<usize> for Config {
    type Output = Value;

    fn index(&self, index: usize) -> &Value {
        &self.0[index]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    LengthMismatch { expected: usize, got: usize },
    OutOfBounds,
    WrongType,
    UnknownName,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub index: Option<usize>,
    pub name: Option<String>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.kind, self.index, &self.name) {
            (ViolationKind::LengthMismatch { expected, got }, _, _) => {
                write!(f, "expected {expected} values, got {got}")
            }
            (ViolationKind::UnknownName, _, Some(name)) => write!(f, "unknown parameter `{name}`"),
            (kind, Some(i), Some(name)) => write!(f, "coordinate {i} (`{name}`): {kind:?}"),
            (kind, _, _) => write!(f, "{kind:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit() -> ParamSpace {
        ParamSpace::new(vec![ParamDomain::continuous("x", 0.0, 1.0)]).unwrap()
    }

    #[test]
    fn interior_point_validates() {
        assert!(unit()
            .validate(&Config::new(vec![Value::Real(0.5)]))
            .is_ok());
    }

    #[test]
    fn out_of_bounds_reports_coordinate() {
        let err = unit()
            .validate(&Config::new(vec![Value::Real(1.5)]))
            .unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err[0].index, Some(0));
        assert_eq!(err[0].kind, ViolationKind::OutOfBounds);
    }

    #[test]
    fn length_mismatch_is_distinct() {
        let space = ParamSpace::new(vec![
            ParamDomain::continuous("a", 0.0, 1.0),
            ParamDomain::continuous("b", 0.0, 1.0),
        ])
        .unwrap();
        let err = space
            .validate(&Config::new(vec![Value::Real(0.5)]))
            .unwrap_err();
        assert_eq!(
            err[0].kind,
            ViolationKind::LengthMismatch {
                expected: 2,
                got: 1
            }
        );
    }

    #[test]
    fn rejects_bad_domains() {
        assert!(ParamSpace::new(vec![]).is_err());
        assert!(ParamSpace::new(vec![ParamDomain::continuous("x", 1.0, 1.0)]).is_err());
        assert!(ParamSpace::new(vec![ParamDomain::integer("n", 3, 2)]).is_err());
        assert!(ParamSpace::new(vec![ParamDomain::categorical("c", ["a"])]).is_err());
        assert!(ParamSpace::new(vec![ParamDomain::categorical("c", ["a", "a"])]).is_err());
        assert!(ParamSpace::new(vec![
            ParamDomain::continuous("x", 0.0, 1.0),
            ParamDomain::integer("x", 0, 1),
        ])
        .is_err());
    }

    #[test]
    fn wrong_type_is_a_violation() {
        let err = unit()
            .validate(&Config::new(vec![Value::Int(0)]))
            .unwrap_err();
        assert_eq!(err[0].kind, ViolationKind::WrongType);
    }

    #[test]
    fn same_seed_same_config() {
        let space = mixed();
        let a = space.sample_uniform(&mut ChaCha8Rng::seed_from_u64(7));
        let b = space.sample_uniform(&mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn binary_categorical_frequencies() {
        let space = ParamSpace::new(vec![ParamDomain::categorical("c", ["A", "B"])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let a = (0..n)
            .filter(|_| space.sample_uniform(&mut rng)[0] == Value::Choice(0))
            .count();
        let freq = a as f64 / n as f64;
        assert!((0.47..=0.53).contains(&freq), "{freq}");
    }

    #[test]
    fn json_round_trip() {
        let space = mixed();
        let text = serde_json::to_string(&space).unwrap();
        assert!(text.contains(r#""kind":"categorical""#));
        let back: ParamSpace = serde_json::from_str(&text).unwrap();
        assert_eq!(space, back);

        let config = space.sample_uniform(&mut ChaCha8Rng::seed_from_u64(3));
        let obj = space.config_to_json(&config).unwrap();
        assert!(["mid", "mid2", "mid3"].contains(&obj["c"].as_str().unwrap()));
        assert_eq!(space.config_from_json(&obj).unwrap(), config);
    }

    #[test]
    fn invalid_space_json_is_rejected() {
        let text = r#"[{"name":"x","kind":"continuous","lo":1.0,"hi":0.0}]"#;
        assert!(serde_json::from_str::<ParamSpace>(text).is_err());
    }

    #[test]
    fn config_json_rejects_unknown_and_missing() {
        let space = unit();
        let mut obj = Map::new();
        obj.insert("y".into(), Json::from(0.5));
        let Err(Error::InvalidConfig(v)) = space.config_from_json(&obj) else {
            panic!("expected violation list");
        };
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn uniform_density_of_mixed_space() {
        let space = mixed();
        // 1/(2) * 1/(10) * 1/3
        let expected = (1.0f64 / 60.0).ln();
        assert!((space.log_uniform_density() - expected).abs() < 1e-12);
    }

    fn mixed() -> ParamSpace {
        ParamSpace::new(vec![
            ParamDomain::continuous("x", -1.0, 1.0),
            ParamDomain::integer("n", 1, 10),
            ParamDomain::categorical("c", ["mid", "mid2", "mid3"]),
        ])
        .unwrap()
    }

    fn arb_domain() -> impl Strategy<Value = DomainKind> {
        prop_oneof![
            (-1e3f64..1e3, 1e-6f64..1e3)
                .prop_map(|(lo, w)| DomainKind::Continuous { lo, hi: lo + w }),
            (-1000i64..1000, 1i64..500).prop_map(|(lo, w)| DomainKind::Integer { lo, hi: lo + w }),
            (2usize..8).prop_map(|n| DomainKind::Categorical {
                choices: (0..n).map(|i| format!("c{i}")).collect()
            }),
        ]
    }

    proptest! {
        #[test]
        fn uniform_samples_always_validate(
            kinds in proptest::collection::vec(arb_domain(), 1..12),
            seed in any::<u64>(),
        ) {
            let domains = kinds
                .into_iter()
                .enumerate()
                .map(|(i, kind)| ParamDomain { name: format!("p{i}"), kind })
                .collect();
            let space = ParamSpace::new(domains).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..20 {
                let c = space.sample_uniform(&mut rng);
                prop_assert!(space.validate(&c).is_ok());
            }
        }
    }
}
