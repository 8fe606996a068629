//! Typed hyperparameters and the per-kind schema they are checked against.
//!
//! The searchable domains here double as the optimizer's gene pools.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClassifierError, ClassifierKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl ParamValue {
    pub fn str(s: &str) -> Self {
        ParamValue::Str(s.to_string())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(i) => Some(*i),
            ParamValue::Float(f) if f.fract() == 0.0 && f.is_finite() => Some(*f as i64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, ParamValue::None)
    }

    /// Parses a command-line style token: `None`, `true`, integers, floats, else a string.
    pub fn parse_loose(s: &str) -> Self {
        let t = s.trim().trim_matches('\'').trim_matches('"');
        match t {
            "None" | "none" | "null" => ParamValue::None,
            "true" | "True" => ParamValue::Bool(true),
            "false" | "False" => ParamValue::Bool(false),
            _ => {
                if let Ok(i) = t.parse::<i64>() {
                    ParamValue::Int(i)
                } else if let Ok(f) = t.parse::<f64>() {
                    ParamValue::Float(f)
                } else {
                    ParamValue::Str(t.to_string())
                }
            }
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::None => f.write_str("None"),
            ParamValue::Bool(b) => write!(f, "{}", if *b { "True" } else { "False" }),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x:?}"),
            ParamValue::Str(s) => write!(f, "'{s}'"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Categorical(Vec<ParamValue>),
    /// Inclusive integer range.
    Int { lo: i64, hi: i64 },
    /// Inclusive float range.
    Float { lo: f64, hi: f64 },
}

impl Domain {
    pub fn contains(&self, v: &ParamValue) -> bool {
        match self {
            Domain::Categorical(vals) => vals.contains(v),
            Domain::Int { lo, hi } => v.as_i64().is_some_and(|i| (*lo..=*hi).contains(&i)),
            Domain::Float { lo, hi } => v.as_f64().is_some_and(|x| x.is_finite() && *lo <= x && x <= *hi),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        match self {
            Domain::Categorical(vals) => vals[rng.gen_range(0..vals.len())].clone(),
            Domain::Int { lo, hi } => ParamValue::Int(rng.gen_range(*lo..=*hi)),
            Domain::Float { lo, hi } => ParamValue::Float(rng.gen_range(*lo..=*hi)),
        }
    }

    /// Coerces integers to floats for float domains so stored values are canonical.
    fn canonical(&self, v: ParamValue) -> ParamValue {
        match (self, &v) {
            (Domain::Float { .. }, ParamValue::Int(i)) => ParamValue::Float(*i as f64),
            (Domain::Int { .. }, ParamValue::Float(_)) => v.as_i64().map_or(v, ParamValue::Int),
            _ => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: &'static str,
    /// Range explored by the optimizers.
    pub search: Domain,
    /// Range accepted by `fit`.
    pub bounds: Domain,
    pub default: ParamValue,
    pub nullable: bool,
    pub evolvable: bool,
}

impl ParamSpec {
    pub fn accepts(&self, v: &ParamValue) -> bool {
        (self.nullable && v.is_none()) || self.bounds.contains(v)
    }

    pub fn in_search_domain(&self, v: &ParamValue) -> bool {
        (self.nullable && v.is_none()) || self.search.contains(v)
    }

    /// Uniform draw from the search domain; a nullable gene treats `None`
    /// as one more value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamValue {
        if self.nullable {
            let n = match &self.search {
                Domain::Int { lo, hi } => (hi - lo + 1) as u64,
                Domain::Categorical(v) => v.len() as u64,
                Domain::Float { .. } => 1,
            };
            if rng.gen_range(0..=n) == 0 {
                return ParamValue::None;
            }
        }
        self.search.sample(rng)
    }
}

fn cat(vals: &[&str]) -> Domain {
    Domain::Categorical(vals.iter().map(|s| ParamValue::str(s)).collect())
}

fn cat_none(vals: &[&str]) -> Domain {
    let mut v: Vec<ParamValue> = vals.iter().map(|s| ParamValue::str(s)).collect();
    v.push(ParamValue::None);
    Domain::Categorical(v)
}

fn gene(name: &'static str, search: Domain, bounds: Domain, default: ParamValue) -> ParamSpec {
    ParamSpec {
        name,
        search,
        bounds,
        default,
        nullable: false,
        evolvable: true,
    }
}

fn fixed(name: &'static str, bounds: Domain, default: ParamValue, nullable: bool) -> ParamSpec {
    ParamSpec {
        name,
        search: bounds.clone(),
        bounds,
        default,
        nullable,
        evolvable: false,
    }
}

const INT_MAX: i64 = i64::MAX;

fn tree_genes() -> Vec<ParamSpec> {
    vec![
        gene("criterion", cat(&["gini", "entropy"]), cat(&["gini", "entropy"]), ParamValue::str("gini")),
        gene(
            "min_samples_split",
            Domain::Int { lo: 2, hi: 5 },
            Domain::Int { lo: 2, hi: INT_MAX },
            ParamValue::Int(2),
        ),
        gene(
            "min_samples_leaf",
            Domain::Int { lo: 1, hi: 4 },
            Domain::Int { lo: 1, hi: INT_MAX },
            ParamValue::Int(1),
        ),
        gene(
            "min_weight_fraction_leaf",
            Domain::Float { lo: 0.0, hi: 0.1 },
            Domain::Float { lo: 0.0, hi: 0.5 },
            ParamValue::Float(0.0),
        ),
        gene("class_weight", cat_none(&["balanced"]), cat_none(&["balanced"]), ParamValue::None),
    ]
}

/// Ordered schema for a classifier kind. Evolvable entries, in order, form
/// the chromosome layout.
pub fn schema(kind: ClassifierKind) -> Vec<ParamSpec> {
    let max_depth = fixed("max_depth", Domain::Int { lo: 1, hi: INT_MAX }, ParamValue::None, true);
    let features = cat(&["all", "sqrt", "log2"]);
    match kind {
        ClassifierKind::GaussianNB => vec![gene(
            "var_smoothing",
            Domain::Float { lo: 1e-12, hi: 1e-3 },
            Domain::Float { lo: 0.0, hi: 1.0 },
            ParamValue::Float(1e-9),
        )],
        ClassifierKind::DecisionTree => {
            let mut v = tree_genes();
            v.insert(
                1,
                gene("splitter", cat(&["best", "random"]), cat(&["best", "random"]), ParamValue::str("best")),
            );
            v.push(max_depth);
            v.push(fixed("max_features", features, ParamValue::str("all"), false));
            v
        }
        ClassifierKind::RandomForest => {
            let mut v = vec![gene(
                "n_estimators",
                Domain::Int { lo: 10, hi: 200 },
                Domain::Int { lo: 1, hi: 10_000 },
                ParamValue::Int(100),
            )];
            v.extend(tree_genes());
            v.push(max_depth);
            v.push(fixed("max_features", features, ParamValue::str("sqrt"), false));
            v.push(fixed(
                "bootstrap",
                Domain::Categorical(vec![ParamValue::Bool(true), ParamValue::Bool(false)]),
                ParamValue::Bool(true),
                false,
            ));
            v
        }
        ClassifierKind::AdaBoost => vec![
            gene(
                "n_estimators",
                Domain::Int { lo: 5, hi: 100 },
                Domain::Int { lo: 1, hi: 10_000 },
                ParamValue::Int(50),
            ),
            gene(
                "learning_rate",
                Domain::Float { lo: 0.1, hi: 1.0 },
                Domain::Float { lo: 1e-6, hi: 100.0 },
                ParamValue::Float(1.0),
            ),
            gene("algorithm", cat(&["SAMME", "SAMME.R"]), cat(&["SAMME", "SAMME.R"]), ParamValue::str("SAMME.R")),
            ParamSpec {
                nullable: true,
                ..gene(
                    "random_state",
                    Domain::Int { lo: 1, hi: 50 },
                    Domain::Int { lo: 0, hi: INT_MAX },
                    ParamValue::None,
                )
            },
            fixed("max_depth", Domain::Int { lo: 1, hi: 64 }, ParamValue::Int(1), false),
        ],
        ClassifierKind::LinearSVM => vec![
            gene(
                "loss",
                cat(&["hinge", "squared_hinge"]),
                cat(&["hinge", "squared_hinge"]),
                ParamValue::str("squared_hinge"),
            ),
            gene(
                "tol",
                Domain::Float { lo: 1e-5, hi: 0.1 },
                Domain::Float { lo: 1e-12, hi: 1.0 },
                ParamValue::Float(1e-4),
            ),
            gene(
                "C",
                Domain::Float { lo: 1.0, hi: 5.0 },
                Domain::Float { lo: 1e-6, hi: 1e6 },
                ParamValue::Float(1.0),
            ),
            fixed("max_epochs", Domain::Int { lo: 1, hi: 1_000_000 }, ParamValue::Int(1000), false),
        ],
        ClassifierKind::KNN => vec![
            gene(
                "n_neighbors",
                Domain::Int { lo: 1, hi: 10 },
                Domain::Int { lo: 1, hi: INT_MAX },
                ParamValue::Int(5),
            ),
            gene(
                "weights",
                cat(&["uniform", "distance"]),
                cat(&["uniform", "distance"]),
                ParamValue::str("uniform"),
            ),
            gene(
                "algorithm",
                cat(&["auto", "ball_tree", "kd_tree", "brute"]),
                cat(&["auto", "ball_tree", "kd_tree", "brute"]),
                ParamValue::str("auto"),
            ),
            gene(
                "leaf_size",
                Domain::Int { lo: 1, hi: 50 },
                Domain::Int { lo: 1, hi: INT_MAX },
                ParamValue::Int(30),
            ),
            gene("p", Domain::Int { lo: 1, hi: 5 }, Domain::Int { lo: 1, hi: 64 }, ParamValue::Int(2)),
            fixed("tie_break", cat(&["Normal", "Botnet"]), ParamValue::str("Normal"), false),
        ],
    }
}

/// Classifier kind plus a name-to-value hyperparameter map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub params: BTreeMap<String, ParamValue>,
}

impl ClassifierSpec {
    pub fn default_for(kind: ClassifierKind) -> Self {
        let params = schema(kind)
            .into_iter()
            .map(|p| (p.name.to_string(), p.default))
            .collect();
        ClassifierSpec { kind, params }
    }

    /// Sets one parameter, validating it against the schema.
    pub fn with(mut self, name: &str, value: ParamValue) -> Result<Self, ClassifierError> {
        let spec = schema(self.kind)
            .into_iter()
            .find(|p| p.name == name)
            .ok_or_else(|| ClassifierError::invalid(name, "unknown hyperparameter"))?;
        let value = spec.bounds.canonical(value);
        if !spec.accepts(&value) {
            return Err(ClassifierError::invalid(name, format!("value {value} out of range")));
        }
        self.params.insert(name.to_string(), value);
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let schema = schema(self.kind);
        for (name, value) in &self.params {
            let spec = schema
                .iter()
                .find(|p| p.name == name)
                .ok_or_else(|| ClassifierError::invalid(name, "unknown hyperparameter"))?;
            if !spec.accepts(value) {
                return Err(ClassifierError::invalid(name, format!("value {value} out of range")));
            }
        }
        if self.params.get("min_weight_fraction_leaf").and_then(|v| v.as_f64()).unwrap_or(0.0) > 0.5 {
            return Err(ClassifierError::invalid("min_weight_fraction_leaf", "must be <= 0.5"));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> ParamValue {
        self.params.get(name).cloned().unwrap_or_else(|| {
            schema(self.kind)
                .into_iter()
                .find(|p| p.name == name)
                .map(|p| p.default)
                .unwrap_or(ParamValue::None)
        })
    }

    pub(crate) fn int(&self, name: &str) -> i64 {
        self.get(name).as_i64().unwrap_or(0)
    }

    pub(crate) fn float(&self, name: &str) -> f64 {
        self.get(name).as_f64().unwrap_or(0.0)
    }

    pub(crate) fn text(&self, name: &str) -> String {
        self.get(name).as_str().unwrap_or_default().to_string()
    }

    pub(crate) fn opt_int(&self, name: &str) -> Option<i64> {
        self.get(name).as_i64()
    }

    pub(crate) fn flag(&self, name: &str) -> bool {
        matches!(self.get(name), ParamValue::Bool(true))
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.kind)?;
        for (i, p) in schema(self.kind).iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}={}", p.name, self.get(p.name))?;
        }
        f.write_str(")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_lie_in_search_domains() {
        for kind in ClassifierKind::ALL {
            for p in schema(kind) {
                assert!(p.in_search_domain(&p.default), "{kind} {}", p.name);
                assert!(p.accepts(&p.default), "{kind} {}", p.name);
            }
            ClassifierSpec::default_for(kind).validate().unwrap();
        }
    }

    #[test]
    fn default_tree_vector() {
        let genes: Vec<String> = schema(ClassifierKind::DecisionTree)
            .iter()
            .filter(|p| p.evolvable)
            .map(|p| p.default.to_string())
            .collect();
        assert_eq!(genes.join(", "), "'gini', 'best', 2, 1, 0.0, None");
    }

    #[test]
    fn out_of_range_rejected() {
        let s = ClassifierSpec::default_for(ClassifierKind::RandomForest);
        assert!(s.clone().with("n_estimators", ParamValue::Int(0)).is_err());
        assert!(s.clone().with("criterion", ParamValue::str("log_loss")).is_err());
        assert!(s.clone().with("bogus", ParamValue::Int(1)).is_err());
        let ok = s.with("min_weight_fraction_leaf", ParamValue::Int(0)).unwrap();
        assert_eq!(ok.get("min_weight_fraction_leaf"), ParamValue::Float(0.0));
    }

    #[test]
    fn loose_parsing() {
        assert_eq!(ParamValue::parse_loose("None"), ParamValue::None);
        assert_eq!(ParamValue::parse_loose("12"), ParamValue::Int(12));
        assert_eq!(ParamValue::parse_loose("0.5"), ParamValue::Float(0.5));
        assert_eq!(ParamValue::parse_loose("'gini'"), ParamValue::str("gini"));
    }
}
